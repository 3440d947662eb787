use rand::Rng as _;

use super::arch::{validate_chain, Activation, LayerSpec};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// One affine map; `weights` is `out_dim × in_dim`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    fn zeros(spec: &LayerSpec) -> Self {
        Layer {
            weights: vec![T::zero(); spec.in_dim * spec.out_dim],
            bias: vec![T::zero(); spec.out_dim],
        }
    }
}

/// Fixed affine standardization `(p − mean) ⊙ scale` applied before layer 1.
#[derive(Clone, Debug, PartialEq)]
pub struct InputScaler<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> InputScaler<T> {
    /// Per-feature mean and inverse standard deviation over `rows`.
    /// Constant features get unit scale.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        for row in rows {
            if count == 0 {
                sum = vec![0.0; row.len()];
                sq = vec![0.0; row.len()];
            } else if row.len() != sum.len() {
                return Err(Error::Dimension {
                    what: "problem vector length",
                    expected: sum.len(),
                    got: row.len(),
                });
            }
            for (k, &v) in row.iter().enumerate() {
                sum[k] += v;
                sq[k] += v * v;
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::InvalidParam("cannot fit a scaler on no data".into()));
        }
        let c = count as f64;
        let mut mean = Vec::with_capacity(sum.len());
        let mut scale = Vec::with_capacity(sum.len());
        for (s, q) in sum.iter().zip(&sq) {
            let m = s / c;
            let var = (q / c - m * m).max(0.0);
            let sd = var.sqrt();
            mean.push(T::from_f64_lossy(m));
            scale.push(T::from_f64_lossy(if sd > 1e-12 { 1.0 / sd } else { 1.0 }));
        }
        Ok(InputScaler { mean, scale })
    }

    fn apply(&self, p: &[T]) -> Vec<T> {
        p.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&v, &m), &s)| (v - m) * s)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams<T> {
    input_dim: usize,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer<T>>,
    scaler: Option<InputScaler<T>>,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    /// Input after standardization.
    input: Vec<T>,
    /// Per layer: the vector the affine map was applied to.
    layer_inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    post: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardTrace<T> {
    /// Post-activation outputs of every layer but the last.
    pub fn features(&self) -> &[Vec<T>] {
        &self.post[..self.post.len() - 1]
    }

    pub fn output(&self) -> &[T] {
        self.post.last().expect("trace has at least one layer")
    }

    pub fn input(&self) -> &[T] {
        &self.input
    }
}

/// Parameter gradients, laid out like [`MlpParams`], plus the gradient with
/// respect to the raw (unstandardized) input vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Layer<T>>,
    pub input: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(params: &MlpParams<T>) -> Self {
        Gradients {
            layers: params.specs.iter().map(Layer::zeros).collect(),
            input: vec![T::zero(); params.input_dim],
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, &y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, &y)| *x += y);
        }
        self.input.iter_mut().zip(&other.input).for_each(|(x, &y)| *x += y);
    }

    pub fn scale(&mut self, factor: T) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|x| *x *= factor);
            l.bias.iter_mut().for_each(|x| *x *= factor);
        }
        self.input.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

#[inline]
fn activate<T: Scalar>(a: Activation, x: T) -> T {
    match a {
        Activation::Relu => {
            if x > T::zero() {
                x
            } else {
                T::zero()
            }
        }
        Activation::Sin => x.sin(),
        Activation::None => x,
    }
}

#[inline]
fn activation_grad<T: Scalar>(a: Activation, pre: T) -> T {
    match a {
        Activation::Relu => {
            if pre > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        Activation::Sin => pre.cos(),
        Activation::None => T::one(),
    }
}

impl<T: Scalar> MlpParams<T> {
    pub fn zeros(input_dim: usize, specs: Vec<LayerSpec>) -> Result<Self> {
        validate_chain(input_dim, &specs)?;
        let layers = specs.iter().map(Layer::zeros).collect();
        Ok(MlpParams {
            input_dim,
            specs,
            layers,
            scaler: None,
        })
    }

    /// Uniform weights in `±√(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(input_dim: usize, specs: Vec<LayerSpec>, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(input_dim, specs)?;
        for (layer, spec) in p.layers.iter_mut().zip(&p.specs) {
            let bound = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
            for w in &mut layer.weights {
                *w = T::from_f64_lossy(rng.gen_range(-bound..bound));
            }
        }
        Ok(p)
    }

    pub fn from_layers(
        input_dim: usize,
        specs: Vec<LayerSpec>,
        layers: Vec<Layer<T>>,
        scaler: Option<InputScaler<T>>,
    ) -> Result<Self> {
        validate_chain(input_dim, &specs)?;
        if layers.len() != specs.len() {
            return Err(Error::Shape(format!(
                "{} layer specs but {} parameter blocks",
                specs.len(),
                layers.len()
            )));
        }
        for (i, (l, s)) in layers.iter().zip(&specs).enumerate() {
            if l.weights.len() != s.in_dim * s.out_dim || l.bias.len() != s.out_dim {
                return Err(Error::Shape(format!("layer {} parameter sizes", i + 1)));
            }
        }
        if let Some(sc) = &scaler {
            if sc.mean.len() != input_dim || sc.scale.len() != input_dim {
                return Err(Error::Shape("input scaler width".into()));
            }
        }
        Ok(MlpParams {
            input_dim,
            specs,
            layers,
            scaler,
        })
    }

    pub fn with_scaler(mut self, scaler: InputScaler<T>) -> Result<Self> {
        if scaler.mean.len() != self.input_dim || scaler.scale.len() != self.input_dim {
            return Err(Error::Shape("input scaler width".into()));
        }
        self.scaler = Some(scaler);
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.specs.last().map_or(0, |s| s.out_dim)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn scaler(&self) -> Option<&InputScaler<T>> {
        self.scaler.as_ref()
    }

    pub fn num_layers(&self) -> usize {
        self.specs.len()
    }

    /// Errors with [`Error::Shape`] unless the layer plan equals `specs`.
    pub fn check_arch(&self, input_dim: usize, specs: &[LayerSpec]) -> Result<()> {
        if self.input_dim != input_dim || self.specs != specs {
            return Err(Error::Shape(format!(
                "network has {} layers over input width {}, expected {} layers over {}",
                self.specs.len(),
                self.input_dim,
                specs.len(),
                input_dim
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn forward(&self, p: &[T]) -> Result<ForwardTrace<T>> {
        if p.len() != self.input_dim {
            return Err(Error::Dimension {
                what: "network input width",
                expected: self.input_dim,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        let input = match &self.scaler {
            Some(s) => s.apply(p),
            None => p.to_vec(),
        };
        let l = self.specs.len();
        let mut layer_inputs = Vec::with_capacity(l);
        let mut pre = Vec::with_capacity(l);
        let mut post: Vec<Vec<T>> = Vec::with_capacity(l);
        for (spec, layer) in self.specs.iter().zip(&self.layers) {
            let mut x = match post.last() {
                None => input.clone(),
                Some(h) => h.clone(),
            };
            if spec.takes_skip {
                x.extend_from_slice(&input);
            }
            let z: Vec<T> = (0..spec.out_dim)
                .map(|o| {
                    let row = &layer.weights[o * spec.in_dim..(o + 1) * spec.in_dim];
                    row.iter().zip(&x).fold(layer.bias[o], |acc, (&w, &v)| acc + w * v)
                })
                .collect();
            let h = z.iter().map(|&v| activate(spec.activation, v)).collect();
            layer_inputs.push(x);
            pre.push(z);
            post.push(h);
        }
        Ok(ForwardTrace {
            input,
            layer_inputs,
            pre,
            post,
        })
    }

    /// Reverse-mode gradients for an upstream gradient on the output and,
    /// optionally, on each feature in [`ForwardTrace::features`].
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        d_out: &[T],
        d_features: Option<&[Vec<T>]>,
    ) -> Result<Gradients<T>> {
        let l = self.specs.len();
        let consistent = trace.pre.len() == l
            && trace.input.len() == self.input_dim
            && self
                .specs
                .iter()
                .zip(&trace.pre)
                .zip(&trace.layer_inputs)
                .all(|((s, z), x)| z.len() == s.out_dim && x.len() == s.in_dim);
        if !consistent {
            return Err(Error::Shape("forward trace does not match network".into()));
        }
        if d_out.len() != self.output_dim() {
            return Err(Error::Dimension {
                what: "output gradient width",
                expected: self.output_dim(),
                got: d_out.len(),
            });
        }
        if let Some(df) = d_features {
            let ok = df.len() == l - 1
                && df.iter().zip(&self.specs).all(|(g, s)| g.len() == s.out_dim);
            if !ok {
                return Err(Error::Shape("feature gradient widths".into()));
            }
        }

        let mut grads = Gradients::zeros_like(self);
        let mut d_input = vec![T::zero(); self.input_dim];
        let mut d_post = d_out.to_vec();
        for idx in (0..l).rev() {
            let spec = &self.specs[idx];
            let layer = &self.layers[idx];
            if idx < l - 1 {
                if let Some(df) = d_features {
                    d_post.iter_mut().zip(&df[idx]).for_each(|(a, &b)| *a += b);
                }
            }
            let d_pre: Vec<T> = d_post
                .iter()
                .zip(&trace.pre[idx])
                .map(|(&g, &z)| g * activation_grad(spec.activation, z))
                .collect();
            let x = &trace.layer_inputs[idx];
            let g = &mut grads.layers[idx];
            let mut d_x = vec![T::zero(); spec.in_dim];
            for (o, &dz) in d_pre.iter().enumerate() {
                g.bias[o] = dz;
                if dz == T::zero() {
                    continue;
                }
                let wrow = &layer.weights[o * spec.in_dim..(o + 1) * spec.in_dim];
                let grow = &mut g.weights[o * spec.in_dim..(o + 1) * spec.in_dim];
                for k in 0..spec.in_dim {
                    grow[k] = dz * x[k];
                    d_x[k] += dz * wrow[k];
                }
            }
            if spec.takes_skip {
                let split = spec.in_dim - self.input_dim;
                d_input.iter_mut().zip(&d_x[split..]).for_each(|(a, &b)| *a += b);
                d_x.truncate(split);
            }
            if idx == 0 {
                d_input.iter_mut().zip(&d_x).for_each(|(a, &b)| *a += b);
            }
            d_post = d_x;
        }
        if let Some(s) = &self.scaler {
            d_input.iter_mut().zip(&s.scale).for_each(|(a, &k)| *a *= k);
        }
        grads.input = d_input;
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::build_arch;
    use crate::rng;

    fn random_net(m: usize, out: usize, l: usize, h: usize, seed: u64) -> MlpParams<f64> {
        let mut r = rng::from_seed(seed);
        let mut p = MlpParams::glorot(m, build_arch(m, out, l, h).unwrap(), &mut r).unwrap();
        for layer in p.layers_mut() {
            for b in &mut layer.bias {
                *b = r.gen_range(-0.5..0.5);
            }
        }
        p
    }

    /// Straightforward evaluation written independently of `forward`.
    fn oracle_forward(p: &MlpParams<f64>, input: &[f64]) -> Vec<f64> {
        let mut h = input.to_vec();
        for (spec, layer) in p.specs().iter().zip(p.layers()) {
            let mut x = h.clone();
            if spec.takes_skip {
                x.extend(input.iter().copied());
            }
            let mut next = vec![0.0; spec.out_dim];
            for o in 0..spec.out_dim {
                let mut acc = layer.bias[o];
                for k in 0..spec.in_dim {
                    acc += layer.weights[o * spec.in_dim + k] * x[k];
                }
                next[o] = match spec.activation {
                    Activation::Relu => acc.max(0.0),
                    Activation::Sin => acc.sin(),
                    Activation::None => acc,
                };
            }
            h = next;
        }
        h
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = MlpParams::<f64>::zeros(4, build_arch(4, 3, 3, 5).unwrap()).unwrap();
        let t = p.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(t.output(), &[0.0, 0.0, 0.0]);
        assert_eq!(t.features().len(), 2);
    }

    #[test]
    fn single_sin_layer() {
        let spec = LayerSpec { in_dim: 1, out_dim: 1, activation: Activation::Sin, takes_skip: false };
        let p = MlpParams::from_layers(
            1,
            vec![spec],
            vec![Layer { weights: vec![std::f64::consts::FRAC_PI_2], bias: vec![0.0] }],
            None,
        )
        .unwrap();
        let out = p.forward(&[1.0]).unwrap();
        assert!((out.output()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn forward_matches_oracle_and_rejects_nan() {
        let p = random_net(6, 4, 5, 9, 2);
        let x = [0.3, -0.2, 0.9, 0.0, -1.1, 0.4];
        let t = p.forward(&x).unwrap();
        let o = oracle_forward(&p, &x);
        for (a, b) in t.output().iter().zip(&o) {
            assert!((a - b).abs() < 1e-12);
        }
        for (f, s) in t.features().iter().zip(p.specs()) {
            assert_eq!(f.len(), s.out_dim);
        }
        assert!(matches!(p.forward(&[f64::NAN; 6]), Err(Error::NonFinite(_))));
        assert!(p.forward(&[0.0; 5]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = random_net(3, 2, 4, 5, 1);
        let t = p.forward(&[0.1, 0.2, 0.3]).unwrap();
        let g = p.backward(&t, &[0.0, 0.0], None).unwrap();
        assert_eq!(g, Gradients::zeros_like(&p));
    }

    #[test]
    fn linear_unit_weight_gradient_is_input() {
        let spec = LayerSpec { in_dim: 1, out_dim: 1, activation: Activation::None, takes_skip: false };
        let p = MlpParams::from_layers(1, vec![spec], vec![Layer { weights: vec![0.7], bias: vec![0.1] }], None).unwrap();
        let t = p.forward(&[2.5]).unwrap();
        let g = p.backward(&t, &[1.0], None).unwrap();
        assert_eq!(g.layers[0].weights[0], 2.5);
        assert_eq!(g.layers[0].bias[0], 1.0);
        assert_eq!(g.input[0], 0.7);
    }

    #[test]
    fn mismatched_trace_is_rejected() {
        let a = random_net(3, 2, 4, 5, 1);
        let b = random_net(3, 2, 3, 5, 1);
        let t = b.forward(&[0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(a.backward(&t, &[1.0, 1.0], None), Err(Error::Shape(_))));
    }

    #[test]
    fn scaler_fit_standardizes() {
        let rows = [vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = InputScaler::<f64>::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[3.0, 5.0]), vec![1.0, 0.0]);
    }
}
