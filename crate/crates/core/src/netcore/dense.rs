//! Fully connected feed-forward networks with hand-derived backward passes.

use super::{Activation, Mat};
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One dense layer. Weights are stored input-major: `w` is `in_dim x out_dim`
/// so a batch forward is `X (n x in) . w + b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    pub w: Mat,
    pub b: Vec<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

/// Per-layer inputs and pre-activations captured during a forward pass.
pub struct ForwardCache {
    inputs: Vec<Mat>,
    preacts: Vec<Mat>,
}

/// Gradients mirroring one layer's parameter shapes.
#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub dw: Mat,
    pub db: Vec<f64>,
}

impl DenseNet {
    /// Glorot-uniform initialization: weights in +-sqrt(6/(fan_in+fan_out)),
    /// biases zero. `dims` chains layer widths, `acts` has one entry per layer.
    pub fn new<R: Rng>(dims: &[usize], acts: &[Activation], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || acts.len() != dims.len() - 1 {
            return Err(Error::Config(format!(
                "dense net needs chained dims and one activation per layer (got {} dims, {} activations)",
                dims.len(),
                acts.len()
            )));
        }
        let mut layers = Vec::with_capacity(acts.len());
        for (l, &act) in acts.iter().enumerate() {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            layers.push(Layer {
                w: Mat::from_vec(fan_in, fan_out, data)?,
                b: vec![0.0; fan_out],
                act,
            });
        }
        Ok(DenseNet { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty net").w.cols()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.rows() * l.w.cols() + l.b.len())
            .sum()
    }

    pub fn forward(&self, x: &Mat) -> Result<(Mat, ForwardCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "net input width {} but x has {} columns",
                self.input_dim(),
                x.cols()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            inputs.push(cur.clone());
            let mut z = cur.matmul(&layer.w)?;
            for i in 0..z.rows() {
                let row = z.row_mut(i);
                for (j, bj) in layer.b.iter().enumerate() {
                    row[j] += bj;
                }
            }
            preacts.push(z.clone());
            for v in z.data_mut() {
                *v = layer.act.apply(*v);
            }
            cur = z;
        }
        Ok((cur, ForwardCache { inputs, preacts }))
    }

    /// Backpropagate `upstream` (gradient of the loss with respect to the
    /// network output) through a cached forward pass. Returns per-layer
    /// parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Mat) -> Result<(Vec<LayerGrad>, Mat)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Shape(
                "forward cache does not match network depth".into(),
            ));
        }
        let last = self.layers.len() - 1;
        if upstream.rows() != cache.preacts[last].rows()
            || upstream.cols() != cache.preacts[last].cols()
        {
            return Err(Error::Shape(
                "upstream gradient does not match cached output shape".into(),
            ));
        }
        let mut grads: Vec<LayerGrad> = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.preacts[l];
            if z.rows() != delta.rows() || z.cols() != delta.cols() {
                return Err(Error::Shape("stale forward cache".into()));
            }
            // d loss / d z = d loss / d a * act'(z)
            let mut dz = delta;
            for (v, zv) in dz.data_mut().iter_mut().zip(z.data().iter()) {
                *v *= layer.act.derivative(*zv);
            }
            let input = &cache.inputs[l];
            let dw = input.transpose().matmul(&dz)?;
            let mut db = vec![0.0; layer.b.len()];
            for i in 0..dz.rows() {
                for (j, dbj) in db.iter_mut().enumerate() {
                    *dbj += dz.get(i, j);
                }
            }
            delta = dz.matmul(&layer.w.transpose())?;
            grads.push(LayerGrad { dw, db });
        }
        grads.reverse();
        Ok((grads, delta))
    }

    /// Canonical parameter flattening: per layer, weights row-major then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.w.data());
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut off = 0;
        for layer in &mut self.layers {
            let nw = layer.w.rows() * layer.w.cols();
            layer.w.data_mut().copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = layer.b.len();
            layer.b.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Flatten layer gradients with the same ordering as `params_flat`.
    pub fn grads_flat(&self, grads: &[LayerGrad]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for g in grads {
            out.extend_from_slice(g.dw.data());
            out.extend_from_slice(&g.db);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_layer(d: usize) -> DenseNet {
        let mut w = Mat::zeros(d, d);
        for i in 0..d {
            w.set(i, i, 1.0);
        }
        DenseNet {
            layers: vec![Layer {
                w,
                b: vec![0.0; d],
                act: Activation::Identity,
            }],
        }
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = identity_layer(2);
        let x = Mat::from_rows(vec![vec![1.5, -2.0], vec![0.0, 3.0]]).unwrap();
        let (out, _) = net.forward(&x).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn zero_sigmoid_layer_outputs_half() {
        let net = DenseNet {
            layers: vec![Layer {
                w: Mat::zeros(3, 2),
                b: vec![0.0; 2],
                act: Activation::Sigmoid,
            }],
        };
        let x = Mat::from_rows(vec![vec![1.0, -4.0, 2.0]]).unwrap();
        let (out, _) = net.forward(&x).unwrap();
        assert_eq!(out.data(), &[0.5, 0.5]);
    }

    #[test]
    fn relu_layer_clips_negatives() {
        let net = DenseNet {
            layers: vec![Layer {
                w: {
                    let mut w = Mat::zeros(2, 2);
                    w.set(0, 0, 1.0);
                    w.set(1, 1, 1.0);
                    w
                },
                b: vec![0.0; 2],
                act: Activation::Relu,
            }],
        };
        let x = Mat::from_rows(vec![vec![-1.0, 2.0]]).unwrap();
        let (out, _) = net.forward(&x).unwrap();
        assert_eq!(out.data(), &[0.0, 2.0]);
    }

    #[test]
    fn scalar_linear_gradient() {
        // y = w * x with x = 3: dL/dw = 3 under unit upstream.
        let net = DenseNet {
            layers: vec![Layer {
                w: Mat::from_vec(1, 1, vec![2.0]).unwrap(),
                b: vec![0.0],
                act: Activation::Identity,
            }],
        };
        let x = Mat::from_vec(1, 1, vec![3.0]).unwrap();
        let (_, cache) = net.forward(&x).unwrap();
        let upstream = Mat::from_vec(1, 1, vec![1.0]).unwrap();
        let (grads, dx) = net.backward(&cache, &upstream).unwrap();
        assert_eq!(grads[0].dw.get(0, 0), 3.0);
        assert_eq!(grads[0].db[0], 1.0);
        assert_eq!(dx.get(0, 0), 2.0);
    }

    #[test]
    fn sigmoid_preactivation_gradient() {
        let net = DenseNet {
            layers: vec![Layer {
                w: Mat::from_vec(1, 1, vec![1.0]).unwrap(),
                b: vec![0.3],
                act: Activation::Sigmoid,
            }],
        };
        let x = Mat::from_vec(1, 1, vec![0.7]).unwrap();
        let (out, cache) = net.forward(&x).unwrap();
        let o = out.get(0, 0);
        let upstream = Mat::from_vec(1, 1, vec![1.0]).unwrap();
        let (grads, _) = net.backward(&cache, &upstream).unwrap();
        // d sigma(z)/db = o(1-o)
        assert!((grads[0].db[0] - o * (1.0 - o)).abs() < 1e-15);
    }

    #[test]
    fn random_two_layer_net_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = DenseNet::new(
            &[3, 4, 1],
            &[Activation::Relu, Activation::Sigmoid],
            &mut rng,
        )
        .unwrap();
        let x = Mat::from_vec(5, 3, (0..15).map(|i| (i as f64) * 0.17 - 1.0).collect()).unwrap();
        // Scalar loss: sum of squared outputs.
        let loss_of = |net: &DenseNet| -> f64 {
            let (out, _) = net.forward(&x).unwrap();
            out.data().iter().map(|v| v * v).sum()
        };
        let (out, cache) = net.forward(&x).unwrap();
        let mut upstream = out.clone();
        for v in upstream.data_mut() {
            *v *= 2.0;
        }
        let (grads, _) = net.backward(&cache, &upstream).unwrap();
        let analytic = net.grads_flat(&grads);
        let params = net.params_flat();
        let mut probe = net.clone();
        let max_err = grad_check(
            |p| {
                probe.set_params_flat(p).unwrap();
                Ok(loss_of(&probe))
            },
            &params,
            &analytic,
            1e-5,
        )
        .unwrap();
        assert!(max_err < 1e-5, "max relative error {max_err}");
    }

    #[test]
    fn mismatched_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = DenseNet::new(&[2, 2], &[Activation::Identity], &mut rng).unwrap();
        let x = Mat::zeros(3, 2);
        let (_, cache) = net.forward(&x).unwrap();
        let bad_upstream = Mat::zeros(2, 2);
        assert!(net.backward(&cache, &bad_upstream).is_err());
    }
}
