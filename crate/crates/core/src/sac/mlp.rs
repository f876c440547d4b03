//! Fully connected networks with ReLU hidden layers and a linear output layer.
//!
//! Inputs are batches stored as `batch × features` matrices. Layer weights are `out × in`.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    // bumped on every parameter change so that stale caches are rejected
    version: u64,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
    version: u64,
}

impl ForwardCache {
    /// `batch × outputs`.
    pub fn output(&self) -> &DMatrix<f64> {
        self.pre.last().expect("network has at least one layer")
    }
}

/// Parameter gradients with the same shapes as the network layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| Layer {
                    weight: DMatrix::zeros(l.weight.nrows(), l.weight.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weight.as_slice());
        out.extend_from_slice(l.bias.as_slice());
    }
    out
}

impl Mlp {
    /// Uniform `±1/√fan_in` initialisation for weights and biases.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        Self::check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Layer {
                    weight: DMatrix::from_fn(w[1], w[0], |_, _| rng.random_range(-bound..bound)),
                    bias: DVector::from_fn(w[1], |_, _| rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Ok(Self { layers, version: 0 })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                weight: DMatrix::zeros(w[1], w[0]),
                bias: DVector::zeros(w[1]),
            })
            .collect();
        Ok(Self { layers, version: 0 })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: l.weight.nrows(),
                    got: l.bias.len(),
                });
            }
            if i > 0 && layers[i - 1].weight.nrows() != l.weight.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: layers[i - 1].weight.nrows(),
                    got: l.weight.ncols(),
                });
            }
        }
        Ok(Self { layers, version: 0 })
    }

    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.nrows())
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn params(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weight.len();
            l.weight.as_mut_slice().copy_from_slice(&params[k..k + nw]);
            k += nw;
            let nb = l.bias.len();
            l.bias.as_mut_slice().copy_from_slice(&params[k..k + nb]);
            k += nb;
        }
        self.version += 1;
        Ok(())
    }

    /// Applies `f(param, grad)` to every parameter in a fixed order.
    pub(crate) fn update_with(
        &mut self,
        grads: &Gradients,
        mut f: impl FnMut(usize, &mut f64, f64),
    ) {
        let mut k = 0;
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (p, &d) in l.weight.iter_mut().zip(g.weight.iter()) {
                f(k, p, d);
                k += 1;
            }
            for (p, &d) in l.bias.iter_mut().zip(g.bias.iter()) {
                f(k, p, d);
                k += 1;
            }
        }
        self.version += 1;
    }

    /// `θ ← (1 − τ)·θ + τ·source`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            t.weight
                .zip_apply(&s.weight, |a, b| *a = (1.0 - tau) * *a + tau * b);
            t.bias
                .zip_apply(&s.bias, |a, b| *a = (1.0 - tau) * *a + tau * b);
        }
        self.version += 1;
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Forward pass over a `batch × inputs` matrix.
pub fn mlp_forward(net: &Mlp, input: &DMatrix<f64>) -> Result<ForwardCache> {
    if input.ncols() != net.n_inputs() {
        return Err(Error::DimensionMismatch {
            expected: net.n_inputs(),
            got: input.ncols(),
        });
    }
    let last = net.layers.len() - 1;
    let mut inputs = Vec::with_capacity(net.layers.len());
    let mut pre = Vec::with_capacity(net.layers.len());
    let mut a = input.clone();
    for (i, l) in net.layers.iter().enumerate() {
        let mut z = &a * l.weight.transpose();
        for mut row in z.row_iter_mut() {
            row += l.bias.transpose();
        }
        inputs.push(a);
        a = if i < last {
            z.map(|v| v.max(0.0))
        } else {
            z.clone()
        };
        pre.push(z);
    }
    Ok(ForwardCache {
        inputs,
        pre,
        version: net.version,
    })
}

/// Reverse pass for `upstream = ∂L/∂output` (`batch × outputs`). Returns parameter gradients
/// summed over the batch and `∂L/∂input`.
pub fn mlp_backward(
    net: &Mlp,
    upstream: &DMatrix<f64>,
    cache: &ForwardCache,
) -> Result<(Gradients, DMatrix<f64>)> {
    if cache.version != net.version || cache.pre.len() != net.layers.len() {
        return Err(Error::invalid("forward cache does not match the network"));
    }
    let out = cache.output();
    if upstream.shape() != out.shape() {
        return Err(Error::DimensionMismatch {
            expected: out.len(),
            got: upstream.len(),
        });
    }
    let n = net.layers.len();
    let mut grads = Vec::with_capacity(n);
    let mut delta = upstream.clone();
    for i in (0..n).rev() {
        if i < n - 1 {
            delta.zip_apply(&cache.pre[i], |d, z| {
                if z <= 0.0 {
                    *d = 0.0
                }
            });
        }
        let l = &net.layers[i];
        let weight = delta.transpose() * &cache.inputs[i];
        let bias = DVector::from_iterator(l.bias.len(), delta.column_iter().map(|c| c.sum()));
        delta = &delta * &l.weight;
        grads.push(Layer { weight, bias });
    }
    grads.reverse();
    Ok((Gradients { layers: grads }, delta))
}
