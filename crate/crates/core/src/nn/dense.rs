//! Fully connected layer over flattened feature vectors.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Dense layer; weights are row-major `(in_features, out_features)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    in_features: usize,
    out_features: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

/// Gradients for one dense layer, same layout as the layer itself.
#[derive(Debug, Clone)]
pub struct DenseGrad<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(in_features: usize, out_features: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weights.len() != in_features * out_features {
            return Err(Error::shape(format!(
                "dense needs {in_features}*{out_features} weights, got {}",
                weights.len()
            )));
        }
        if bias.len() != out_features {
            return Err(Error::shape(format!(
                "dense bias length {} != {out_features}",
                bias.len()
            )));
        }
        Ok(Self { in_features, out_features, weights, bias })
    }

    pub fn in_features(&self) -> usize {
        self.in_features
    }

    pub fn out_features(&self) -> usize {
        self.out_features
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `x` must be `(batch, 1, 1, in_features)`; returns `(batch, 1, 1, out_features)`.
    pub fn forward(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let (batch, h, w, c) = x.shape();
        if h != 1 || w != 1 || c != self.in_features {
            return Err(Error::shape(format!(
                "dense forward expects (b, 1, 1, {}), got {:?}",
                self.in_features,
                x.shape()
            )));
        }
        let mut out = Tensor4::zeros(batch, 1, 1, self.out_features)?;
        for b in 0..batch {
            let x_base = b * self.in_features;
            let o_base = b * self.out_features;
            out.data_mut()[o_base..o_base + self.out_features].copy_from_slice(&self.bias);
            for i in 0..self.in_features {
                let xv = x.data()[x_base + i];
                let w_base = i * self.out_features;
                for o in 0..self.out_features {
                    out.data_mut()[o_base + o] =
                        out.data()[o_base + o] + xv * self.weights[w_base + o];
                }
            }
        }
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor4<T>, grad_out: &Tensor4<T>) -> Result<(Tensor4<T>, DenseGrad<T>)> {
        let (batch, _, _, _) = x.shape();
        if grad_out.shape() != (batch, 1, 1, self.out_features) {
            return Err(Error::shape(format!(
                "dense backward: grad_out {:?} != ({batch}, 1, 1, {})",
                grad_out.shape(),
                self.out_features
            )));
        }
        let mut grad_x = Tensor4::zeros(batch, 1, 1, self.in_features)?;
        let mut grad = DenseGrad {
            weights: vec![T::zero(); self.weights.len()],
            bias: vec![T::zero(); self.bias.len()],
        };
        for b in 0..batch {
            let x_base = b * self.in_features;
            let g_base = b * self.out_features;
            for o in 0..self.out_features {
                grad.bias[o] = grad.bias[o] + grad_out.data()[g_base + o];
            }
            for i in 0..self.in_features {
                let xv = x.data()[x_base + i];
                let w_base = i * self.out_features;
                let mut gx = T::zero();
                for o in 0..self.out_features {
                    let g = grad_out.data()[g_base + o];
                    gx = gx + g * self.weights[w_base + o];
                    grad.weights[w_base + o] = grad.weights[w_base + o] + xv * g;
                }
                grad_x.data_mut()[x_base + i] = gx;
            }
        }
        Ok((grad_x, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_is_an_affine_map() {
        let d = Dense::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], vec![0.5, -0.5]).unwrap();
        let x = Tensor4::<f64>::new(1, 1, 1, 2, vec![1.0, 1.0]).unwrap();
        let y = d.forward(&x).unwrap();
        assert_eq!(y.data(), &[4.5, 5.5]);
    }

    #[test]
    fn backward_matches_hand_computation() {
        let d = Dense::new(2, 1, vec![3.0, -2.0], vec![0.0]).unwrap();
        let x = Tensor4::<f64>::new(1, 1, 1, 2, vec![5.0, 7.0]).unwrap();
        let g = Tensor4::<f64>::new(1, 1, 1, 1, vec![2.0]).unwrap();
        let (gx, gw) = d.backward(&x, &g).unwrap();
        assert_eq!(gx.data(), &[6.0, -4.0]);
        assert_eq!(gw.weights, vec![10.0, 14.0]);
        assert_eq!(gw.bias, vec![2.0]);
    }
}
