use super::mlp::{Gradients, Layer, MlpParams};
use crate::scalar::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates, one per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Layer<T>>,
    pub v: Vec<Layer<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &MlpParams<T>) -> Self {
        let zeros = Gradients::zeros_like(params).layers;
        AdamState {
            m: zeros.clone(),
            v: zeros,
        }
    }
}

fn update<T: Scalar>(p: &mut [T], g: &[T], m: &mut [T], v: &mut [T], lr: T, c1: T, c2: T) {
    let b1 = T::from_f64_lossy(ADAM_BETA1);
    let b2 = T::from_f64_lossy(ADAM_BETA2);
    let eps = T::from_f64_lossy(ADAM_EPS);
    for k in 0..p.len() {
        m[k] = b1 * m[k] + (T::one() - b1) * g[k];
        v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
        let m_hat = m[k] / c1;
        let v_hat = v[k] / c2;
        p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One bias-corrected Adam update at step `t` (1-based).
pub fn adam_step<T: Scalar>(
    params: &mut MlpParams<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    lr: f64,
    t: u64,
) {
    assert!(t >= 1, "Adam step counter starts at 1");
    let c1 = T::from_f64_lossy(1.0 - ADAM_BETA1.powf(t as f64));
    let c2 = T::from_f64_lossy(1.0 - ADAM_BETA2.powf(t as f64));
    let lr = T::from_f64_lossy(lr);
    for (((layer, g), m), v) in params
        .layers_mut()
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        update(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights, lr, c1, c2);
        update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias, lr, c1, c2);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};

    fn scalar_net(w: f64) -> MlpParams<f64> {
        let spec = LayerSpec { in_dim: 1, out_dim: 1, activation: Activation::None, takes_skip: false };
        MlpParams::from_layers(1, vec![spec], vec![Layer { weights: vec![w], bias: vec![0.0] }], None).unwrap()
    }

    fn grad(gw: f64) -> Gradients<f64> {
        Gradients {
            layers: vec![Layer { weights: vec![gw], bias: vec![0.0] }],
            input: vec![0.0],
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar_net(0.5);
        let mut s = AdamState::new(&p);
        s.m[0].weights[0] = 0.2;
        s.v[0].weights[0] = 0.04;
        adam_step(&mut p, &grad(0.0), &mut s, 0.0, 1);
        assert_eq!(p.layers()[0].weights[0], 0.5);
        assert!((s.m[0].weights[0] - 0.18).abs() < 1e-15);
        assert!((s.v[0].weights[0] - 0.04 * 0.999).abs() < 1e-15);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        for g in [3.0, -0.02] {
            let mut p = scalar_net(1.0);
            let mut s = AdamState::new(&p);
            adam_step(&mut p, &grad(g), &mut s, 1e-3, 1);
            // m̂ = g, v̂ = g², step = lr·g/(|g|+ε)
            let expected = 1.0 - 1e-3 * g / (g.abs() + 1e-8);
            assert!((p.layers()[0].weights[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn two_steps_match_hand_calculation() {
        let g = 0.5;
        let lr = 0.01;
        let mut p = scalar_net(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &grad(g), &mut s, lr, 1);
        adam_step(&mut p, &grad(g), &mut s, lr, 2);
        let m2 = 0.9 * (0.1 * g) + 0.1 * g;
        let v2 = 0.999 * (0.001 * g * g) + 0.001 * g * g;
        assert!((s.m[0].weights[0] - m2).abs() < 1e-15);
        assert!((s.v[0].weights[0] - v2).abs() < 1e-15);
        let step1 = lr * g / (g.abs() + 1e-8);
        let step2 = lr * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        assert!((p.layers()[0].weights[0] + step1 + step2).abs() < 1e-14);
    }
}
