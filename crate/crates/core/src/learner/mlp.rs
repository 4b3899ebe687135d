//! Fully connected network with tanh hidden layers and a linear output,
//! plus closed-form backpropagation.
//!
//! Weights are stored `(in, out)` so a batch `x` of shape `(n, in)` maps to
//! `x · W + b`.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Dense<T> {
    fn uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = || T::lit(rng.random_range(-bound..bound));
        Self {
            weight: Array2::from_shape_simple_fn((fan_in, fan_out), &mut draw),
            bias: Array1::from_shape_simple_fn(fan_out, &mut draw),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
}

/// Activations kept from a forward pass for the backward pass.
///
/// `inputs[l]` is the input to layer `l`; for `l > 0` it is also the tanh
/// output of layer `l - 1`.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    inputs: Vec<Array2<T>>,
    pub output: Array2<T>,
}

impl<T: Real> Mlp<T> {
    /// Builds a network with layer widths `sizes` (input first), initialized
    /// uniformly in `±1/√fan_in`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an mlp needs at least an input and an output width");
        let layers = sizes
            .windows(2)
            .map(|w| Dense::uniform(w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn scale_output_layer(&mut self, factor: T) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weight.mapv_inplace(|w| w * factor);
        last.bias.mapv_inplace(|b| b * factor);
    }

    /// Parameter tensors in a fixed order: `w0, b0, w1, b1, ...`.
    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    /// Shapes matching [`Mlp::tensors`].
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.shape().to_vec(), l.bias.shape().to_vec()])
            .collect()
    }

    fn affine(layer: &Dense<T>, x: &ArrayView2<'_, T>) -> Array2<T> {
        let mut z = x.dot(&layer.weight);
        z += &layer.bias;
        z
    }

    pub fn predict(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            h = Self::affine(layer, &h.view());
            if l < last {
                T::tanh_in_place(h.as_slice_mut().expect("standard layout"));
            }
        }
        h
    }

    pub fn forward(&self, x: ArrayView2<'_, T>) -> ForwardCache<T> {
        assert_eq!(x.ncols(), self.input_dim(), "input width mismatch");
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Self::affine(layer, &inputs[l].view());
            if l < last {
                T::tanh_in_place(z.as_slice_mut().expect("standard layout"));
                inputs.push(z);
            } else {
                return ForwardCache { inputs, output: z };
            }
        }
        unreachable!("the loop returns on the last layer")
    }

    /// Backpropagates `d_output = ∂L/∂output` and returns `∂L/∂input`.
    ///
    /// Parameter gradients are accumulated into `grads` when given.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        d_output: ArrayView2<'_, T>,
        mut grads: Option<&mut Mlp<T>>,
    ) -> Array2<T> {
        let mut delta = d_output.to_owned();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            if let Some(g) = grads.as_deref_mut() {
                let gl = &mut g.layers[l];
                general_mat_mul(T::one(), &cache.inputs[l].t(), &delta, T::one(), &mut gl.weight);
                gl.bias += &delta.sum_axis(Axis(0));
            }
            let mut d_input = Array2::zeros((delta.nrows(), layer.in_dim()));
            general_mat_mul(T::one(), &delta, &layer.weight.t(), T::zero(), &mut d_input);
            if l == 0 {
                return d_input;
            }
            // through tanh of the previous layer: 1 - y²
            delta = d_input;
            let y = cache.inputs[l].as_slice().expect("standard layout");
            let d = delta.as_slice_mut().expect("standard layout");
            d.iter_mut().zip(y).for_each(|(d, &y)| *d *= T::one() - y * y);
        }
        unreachable!("the loop returns on layer 0")
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: l.weight.mapv(|v| U::lit(v.as_f64())),
                    bias: l.bias.mapv(|v| U::lit(v.as_f64())),
                })
                .collect(),
        }
    }
}
