use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation value.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - pre.tanh().powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: &[usize], output_dim: usize) -> Self {
        MlpSpec {
            input_dim,
            hidden_dims: hidden_dims.to_vec(),
            output_dim,
            activation: Activation::Relu,
        }
    }

    /// Single affine map.
    pub fn linear(input_dim: usize, output_dim: usize) -> Self {
        Self::new(input_dim, &[], output_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("layer widths must be positive: {self:?}")));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden_dims);
        w.push(self.output_dim);
        w
    }
}

/// Fully connected network; weights are stored `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Layer inputs and hidden pre-activations from a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let widths = spec.widths();
        let weights = widths.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect();
        let biases = widths[1..].iter().map(|&w| Array1::zeros(w)).collect();
        Ok(Mlp { spec, weights, biases })
    }

    /// Uniform `±1/√fan_in` initialisation of weights and biases.
    pub fn new(spec: MlpSpec, rng: &mut impl Rng) -> Result<Self> {
        let mut m = Self::zeros(spec)?;
        for (w, b) in m.weights.iter_mut().zip(&mut m.biases) {
            let bound = 1.0 / (w.nrows() as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-bound..bound));
            b.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        Ok(m)
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            spec: self.spec.clone(),
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        if x.ncols() != self.spec.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "input width {} but network expects {}",
                x.ncols(),
                self.spec.input_dim
            )));
        }
        let act = self.spec.activation;
        let last = self.layers() - 1;
        let mut inputs = Vec::with_capacity(self.layers());
        let mut pre = Vec::with_capacity(last);
        let mut h = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut out = h.dot(w) + b;
            inputs.push(h);
            if l < last {
                pre.push(out.clone());
                out.mapv_inplace(|v| act.apply(v));
            }
            h = out;
        }
        Ok((h, MlpCache { inputs, pre }))
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x)?.0)
    }

    /// Parameter gradients and input gradient for an upstream `grad_out`.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Array2<f64>) -> (Mlp, Array2<f64>) {
        let act = self.spec.activation;
        let mut grads = self.zeros_like();
        let mut g = grad_out.to_owned();
        for l in (0..self.layers()).rev() {
            grads.weights[l] = cache.inputs[l].t().dot(&g).as_standard_layout().into_owned();
            grads.biases[l] = g.sum_axis(Axis(0));
            let mut g_in = g.dot(&self.weights[l].t());
            if l > 0 {
                Zip::from(&mut g_in)
                    .and(&cache.pre[l - 1])
                    .for_each(|gi, &p| *gi *= act.derivative(p));
            }
            g = g_in;
        }
        (grads, g)
    }
}

impl Parameters for Mlp {
    fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::with_capacity(2 * self.layers());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            out.push((format!("layer{l}.weight"), w.shape().to_vec(), w.as_slice().expect("standard layout")));
            out.push((format!("layer{l}.bias"), b.shape().to_vec(), b.as_slice().expect("standard layout")));
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_slice_mut().expect("standard layout"));
            out.push(b.as_slice_mut().expect("standard layout"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network() {
        let m = Mlp::zeros(MlpSpec::new(3, &[4, 4], 2)).unwrap();
        let y = m.predict(&array![[1.0, -2.0, 3.0]]).unwrap();
        assert_eq!(y, Array2::<f64>::zeros((1, 2)));
    }

    #[test]
    fn identity_layer_rectifies() {
        let mut m = Mlp::zeros(MlpSpec::new(2, &[2], 2)).unwrap();
        m.weights[0] = Array2::eye(2);
        m.weights[1] = Array2::eye(2);
        let y = m.predict(&array![[1.5, -0.5], [-2.0, 3.0]]).unwrap();
        assert_eq!(y, array![[1.5, 0.0], [0.0, 3.0]]);
    }

    #[test]
    fn shape_checks() {
        let m = Mlp::zeros(MlpSpec::linear(3, 1)).unwrap();
        assert!(matches!(m.predict(&Array2::zeros((2, 4))), Err(Error::ShapeMismatch(_))));
        assert!(Mlp::zeros(MlpSpec::new(3, &[0], 1)).is_err());
    }

    #[test]
    fn finite_difference_audit() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = MlpSpec {
                activation: if seed % 2 == 0 { Activation::Relu } else { Activation::Tanh },
                ..MlpSpec::new(4, &[6, 5], 3)
            };
            let m = Mlp::new(spec, &mut rng).unwrap();
            let x = Array2::from_shape_fn((5, 4), |_| rng.random_range(-1.0..1.0));
            let probe = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
            let loss = |net: &Mlp, x: &Array2<f64>| (net.predict(x).unwrap() * &probe).sum();
            let (_, cache) = m.forward(&x).unwrap();
            let (grads, gx) = m.backward(&cache, &probe);
            super::super::gradcheck::assert_param_grads(&m, &grads, |net| loss(net, &x), 1e-4);
            let h = 1e-5;
            for idx in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp.as_slice_mut().unwrap()[idx] += h;
                xm.as_slice_mut().unwrap()[idx] -= h;
                let fd = (loss(&m, &xp) - loss(&m, &xm)) / (2.0 * h);
                let an = gx.as_slice().unwrap()[idx];
                assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-3));
            }
        }
    }
}
