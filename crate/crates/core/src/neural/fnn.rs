use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative with the subgradient at 0 fixed to 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine map followed by an elementwise activation.
///
/// Weights are stored row-major with shape `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    act: Activation,
}

impl DenseLayer {
    pub fn from_flat(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        act: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::invalid("dense layer dimensions must be positive"));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::DimensionMismatch {
                context: "dense layer weights",
                expected: in_dim * out_dim,
                got: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::DimensionMismatch {
                context: "dense layer bias",
                expected: out_dim,
                got: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite weight or bias"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            act,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, bias: Vec<f64>, act: Activation) -> Result<Self> {
        let out_dim = rows.len();
        let in_dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != in_dim) {
            return Err(Error::invalid("ragged weight matrix"));
        }
        Self::from_flat(in_dim, out_dim, rows.concat(), bias, act)
    }

    pub fn zeros(in_dim: usize, out_dim: usize, act: Activation) -> Result<Self> {
        Self::from_flat(
            in_dim,
            out_dim,
            vec![0.0; in_dim * out_dim],
            vec![0.0; out_dim],
            act,
        )
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.act
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.weights[row * self.in_dim..(row + 1) * self.in_dim]
    }

    /// Pre-activations `W x + b` written into `out`.
    #[inline]
    pub fn affine_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.out_dim {
            let mut acc = self.bias[r];
            for (w, xi) in self.row(r).iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }

    /// Largest absolute row sum, the operator norm induced by the max-norm.
    pub fn inf_norm(&self) -> f64 {
        (0..self.out_dim)
            .map(|r| self.row(r).iter().map(|w| w.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Layered feedforward network. The last layer is always linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Fnn {
    input_dim: usize,
    layers: Vec<DenseLayer>,
}

/// Gradient of `upstream . f(x)` with respect to the input and the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnGrad {
    pub dx: Vec<f64>,
    pub dparams: Vec<f64>,
}

impl Fnn {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::invalid("an FNN needs at least one layer"))?;
        let input_dim = first.in_dim;
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::DimensionMismatch {
                    context: "fnn layer chaining",
                    expected: pair[0].out_dim,
                    got: pair[1].in_dim,
                });
            }
        }
        if layers.last().map(|l| l.act) != Some(Activation::Identity) {
            return Err(Error::invalid("the final FNN layer must be linear"));
        }
        Ok(Self { input_dim, layers })
    }

    /// Single linear layer computing `x`.
    pub fn identity(dim: usize) -> Result<Self> {
        let mut w = vec![0.0; dim * dim];
        for i in 0..dim {
            w[i * dim + i] = 1.0;
        }
        Self::new(vec![DenseLayer::from_flat(
            dim,
            dim,
            w,
            vec![0.0; dim],
            Activation::Identity,
        )?])
    }

    /// Single linear layer `W x + b`.
    pub fn linear(rows: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        Self::new(vec![DenseLayer::from_rows(rows, bias, Activation::Identity)?])
    }

    /// ReLU MLP with the given widths (`dims[0]` is the input) and
    /// PyTorch-style uniform initialisation `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn mlp_init(dims: &[usize], rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid("mlp needs an input and an output width"));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            let b = (0..fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
            let act = if i + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(DenseLayer::from_flat(fan_in, fan_out, w, b, act)?);
        }
        Self::new(layers)
    }

    /// ReLU MLP with weights uniform in `[-scale, scale]` and biases uniform in
    /// `[-bias_scale, bias_scale]`.
    pub fn random_uniform(dims: &[usize], scale: f64, bias_scale: f64, rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid("mlp needs an input and an output width"));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let mut draw = |s: f64| if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 };
            let w = (0..fan_in * fan_out).map(|_| draw(scale)).collect();
            let b = (0..fan_out).map(|_| draw(bias_scale)).collect();
            let act = if i + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(DenseLayer::from_flat(fan_in, fan_out, w, b, act)?);
        }
        Self::new(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Node count: inputs plus every computing unit.
    pub fn size(&self) -> usize {
        self.input_dim + self.layers.iter().map(|l| l.out_dim).sum::<usize>()
    }

    /// Largest number of incoming edges of any node, where zero weights are
    /// absent edges.
    pub fn max_in_degree(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| (0..l.out_dim).map(move |r| l.row(r).iter().filter(|&&w| w != 0.0).count()))
            .max()
            .unwrap_or(0)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    /// Parameters flattened layer by layer: weights (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                context: "fnn parameters",
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "fnn input",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for l in &self.layers {
            l.affine_into(&cur, &mut next);
            for z in next.iter_mut() {
                *z = l.act.apply(*z);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Vector-Jacobian product of `f` at `x` against `upstream`.
    pub fn grad(&self, x: &[f64], upstream: &[f64]) -> Result<FnnGrad> {
        self.check_input(x)?;
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "fnn upstream gradient",
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        // forward, keeping each layer's input and pre-activation
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for l in &self.layers {
            let mut z = Vec::new();
            l.affine_into(&cur, &mut z);
            let a: Vec<f64> = z.iter().map(|&v| l.act.apply(v)).collect();
            inputs.push(std::mem::replace(&mut cur, a));
            pres.push(z);
        }

        let mut dparams = vec![0.0; self.num_params()];
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.num_params();
        }

        let mut delta = upstream.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            for (d, &z) in delta.iter_mut().zip(&pres[li]) {
                *d *= l.act.derivative(z);
            }
            let base = offsets[li];
            let input = &inputs[li];
            for r in 0..l.out_dim {
                let dr = delta[r];
                if dr != 0.0 {
                    let row = &mut dparams[base + r * l.in_dim..base + (r + 1) * l.in_dim];
                    for (g, xi) in row.iter_mut().zip(input) {
                        *g += dr * xi;
                    }
                }
                dparams[base + l.weights.len() + r] += dr;
            }
            let mut prev = vec![0.0; l.in_dim];
            for r in 0..l.out_dim {
                let dr = delta[r];
                if dr != 0.0 {
                    for (p, w) in prev.iter_mut().zip(l.row(r)) {
                        *p += dr * w;
                    }
                }
            }
            delta = prev;
        }
        Ok(FnnGrad {
            dx: delta,
            dparams,
        })
    }

    /// Upper bound on the Lipschitz constant with respect to the max-norm:
    /// the product of the layers' induced infinity norms.
    pub fn lipschitz_upper(&self) -> f64 {
        self.layers.iter().map(DenseLayer::inf_norm).product()
    }

    /// Interval propagation of the box `[lo, hi]` through the network.
    pub fn interval_bounds(&self, lo: &[f64], hi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(lo)?;
        self.check_input(hi)?;
        let mut lo = lo.to_vec();
        let mut hi = hi.to_vec();
        for l in &self.layers {
            let mut nlo = Vec::with_capacity(l.out_dim);
            let mut nhi = Vec::with_capacity(l.out_dim);
            for r in 0..l.out_dim {
                let (mut a, mut b) = (l.bias[r], l.bias[r]);
                for (j, &w) in l.row(r).iter().enumerate() {
                    if w >= 0.0 {
                        a += w * lo[j];
                        b += w * hi[j];
                    } else {
                        a += w * hi[j];
                        b += w * lo[j];
                    }
                }
                nlo.push(l.act.apply(a));
                nhi.push(l.act.apply(b));
            }
            lo = nlo;
            hi = nhi;
        }
        Ok((lo, hi))
    }

    /// Network computing `self(x)` followed by `next`.
    pub fn then(&self, next: &Fnn) -> Result<Fnn> {
        if self.output_dim() != next.input_dim {
            return Err(Error::DimensionMismatch {
                context: "fnn composition",
                expected: self.output_dim(),
                got: next.input_dim,
            });
        }
        // fold our final linear layer into the first layer of `next`
        let mut layers = self.layers.clone();
        let tail = layers.pop().expect("fnn has a layer");
        let head = &next.layers[0];
        let mut w = vec![0.0; head.out_dim * tail.in_dim];
        let mut b = head.bias.clone();
        for r in 0..head.out_dim {
            for k in 0..head.in_dim {
                let hw = head.weight(r, k);
                if hw == 0.0 {
                    continue;
                }
                b[r] += hw * tail.bias[k];
                for c in 0..tail.in_dim {
                    w[r * tail.in_dim + c] += hw * tail.weight(k, c);
                }
            }
        }
        layers.push(DenseLayer::from_flat(
            tail.in_dim,
            head.out_dim,
            w,
            b,
            head.act,
        )?);
        layers.extend(next.layers[1..].iter().cloned());
        Fnn::new(layers)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    act: Activation,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FnnRepr {
    input_dim: usize,
    layers: Vec<LayerRepr>,
}

impl Serialize for Fnn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = FnnRepr {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerRepr {
                    w: (0..l.out_dim).map(|r| l.row(r).to_vec()).collect(),
                    b: l.bias.clone(),
                    act: l.act,
                })
                .collect(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Fnn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FnnRepr::deserialize(d)?;
        let mut layers = Vec::with_capacity(repr.layers.len());
        for (i, l) in repr.layers.into_iter().enumerate() {
            let in_dim = if i == 0 {
                repr.input_dim
            } else {
                l.w.first().map_or(0, Vec::len)
            };
            if l.w.iter().any(|r| r.len() != in_dim) {
                return Err(serde::de::Error::custom(format!(
                    "layer {i}: weight rows must have length {in_dim}"
                )));
            }
            let out_dim = l.w.len();
            let layer = DenseLayer::from_flat(in_dim, out_dim, l.w.concat(), l.b, l.act)
                .map_err(|e| serde::de::Error::custom(format!("layer {i}: {e}")))?;
            layers.push(layer);
        }
        Fnn::new(layers).map_err(serde::de::Error::custom)
    }
}
