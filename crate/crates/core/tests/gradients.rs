use quant::nn::{build_arch, MlpParams};
use quant::qubo::{QuboMatrix, Topology};
use quant::rng;
use quant::solvers::exhaustive_solve;
use quant::training::{total_loss, LossWeights};
use quant::BitString;
use rand::Rng;

/// `Σ c_k·out_k + Σ_f Σ_j e_fj·f_j`: linear in outputs and features, so its
/// parameter gradient exercises every backward path.
fn probe(net: &MlpParams<f64>, p: &[f64], c: &[f64], e: &[Vec<f64>]) -> f64 {
    let t = net.forward(p).unwrap();
    let out: f64 = t.output().iter().zip(c).map(|(a, b)| a * b).sum();
    let feat: f64 = t
        .features()
        .iter()
        .zip(e)
        .map(|(f, w)| f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    out + feat
}

/// Relative error with a floor on the denominator: central differences of a
/// loss of order one carry roundoff near 1e-10 even where the exact gradient
/// is zero.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Central differences over every weight, bias and input entry.
fn check_all<F: Fn(&MlpParams<f64>, &[f64]) -> f64>(
    net: &MlpParams<f64>,
    p: &[f64],
    grads: &quant::nn::Gradients<f64>,
    f: F,
    h: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for l in 0..net.num_layers() {
        for which in 0..2 {
            let len = if which == 0 { net.layers()[l].weights.len() } else { net.layers()[l].bias.len() };
            for k in 0..len {
                let eval = |d: f64| {
                    let mut m = net.clone();
                    let layer = &mut m.layers_mut()[l];
                    if which == 0 {
                        layer.weights[k] += d;
                    } else {
                        layer.bias[k] += d;
                    }
                    f(&m, p)
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = if which == 0 { grads.layers[l].weights[k] } else { grads.layers[l].bias[k] };
                worst = worst.max(rel_err(fd, an));
            }
        }
    }
    for k in 0..p.len() {
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[k] += h;
        lo[k] -= h;
        let fd = (f(net, &hi) - f(net, &lo)) / (2.0 * h);
        worst = worst.max(rel_err(fd, grads.input[k]));
    }
    worst
}

#[test]
fn backprop_matches_finite_differences_on_random_architectures() {
    let mut r = rng::from_seed(2024);
    for case in 0..20 {
        let input = r.gen_range(1..6);
        let output = r.gen_range(1..5);
        let layers = r.gen_range(2..6);
        let hidden = r.gen_range(2..7);
        let specs = build_arch(input, output, layers, hidden).unwrap();
        let mut init = rng::from_seed(case);
        let net = MlpParams::<f64>::glorot(input, specs, &mut init).unwrap();
        let p: Vec<f64> = (0..input).map(|_| r.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..output).map(|_| r.gen_range(-1.0..1.0)).collect();
        let trace = net.forward(&p).unwrap();
        let e: Vec<Vec<f64>> = trace.features().iter().map(|f| f.iter().map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let grads = net.backward(&trace, &c, Some(&e)).unwrap();
        let worst = check_all(&net, &p, &grads, |m, q| probe(m, q, &c, &e), 1e-6);
        assert!(worst < 1e-5, "case {case} (L={layers}, H={hidden}): rel err {worst}");
    }
}

#[test]
fn end_to_end_loss_gradient_with_frozen_solver_outputs() {
    let mut r = rng::from_seed(77);
    let topo = Topology::dense(4);
    let index = topo.free_parameter_index();
    for case in 0..5 {
        let specs = build_arch(3, index.len(), 3, 6).unwrap();
        let net = MlpParams::<f64>::glorot(3, specs, &mut rng::from_seed(100 + case)).unwrap();
        let p: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
        let truth: BitString = "1010".parse().unwrap();
        let trace = net.forward(&p).unwrap();
        let a = QuboMatrix::from_free_parameters(&topo, &index, trace.output()).unwrap();
        let res = exhaustive_solve(&a).unwrap();
        let star = res.best().clone();
        let plus = res.second_best().cloned();
        let weights = LossWeights { unique: 0.1, mlp: 0.05 };
        let value = |m: &MlpParams<f64>, q: &[f64]| {
            let t = m.forward(q).unwrap();
            let a = QuboMatrix::from_free_parameters(&topo, &index, t.output()).unwrap();
            total_loss(&a, &index, &t, &truth, Some(&star), plus.as_ref(), weights).unwrap().value
        };
        let tl = total_loss(&a, &index, &trace, &truth, Some(&star), plus.as_ref(), weights).unwrap();
        assert!(!tl.unique_clamped);
        let grads = net.backward(&trace, &tl.d_out, Some(&tl.d_features)).unwrap();
        let worst = check_all(&net, &p, &grads, value, 1e-6);
        assert!(worst < 1e-4, "case {case}: rel err {worst}");
    }
}

#[test]
fn zero_weights_reduce_total_loss_to_gap() {
    let topo = Topology::dense(3);
    let index = topo.free_parameter_index();
    let net = MlpParams::<f64>::glorot(2, build_arch(2, index.len(), 3, 4).unwrap(), &mut rng::from_seed(1)).unwrap();
    let t = net.forward(&[0.3, -0.7]).unwrap();
    let a = QuboMatrix::from_free_parameters(&topo, &index, t.output()).unwrap();
    let res = exhaustive_solve(&a).unwrap();
    let truth: BitString = "011".parse().unwrap();
    let zero = LossWeights { unique: 0.0, mlp: 0.0 };
    let tl = total_loss(&a, &index, &t, &truth, Some(res.best()), res.second_best(), zero).unwrap();
    let (gap, _) = quant::training::loss_gap(&a, &truth, Some(res.best())).unwrap();
    assert_eq!(tl.value, gap);
    assert!(gap >= 0.0);
}
