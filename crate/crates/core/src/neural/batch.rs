//! Row-batched evaluation and backpropagation of an [`Fnn`] on ndarray matrices.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::fnn::{Activation, Fnn};

/// Per-layer inputs and pre-activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchCache {
    inputs: Vec<Array2<f64>>,
    pres: Vec<Array2<f64>>,
}

impl BatchCache {
    /// Sign pattern of every ReLU pre-activation, used to detect kink crossings.
    pub fn relu_pattern(&self, fnn: &Fnn, out: &mut Vec<bool>) {
        for (l, z) in fnn.layers().iter().zip(&self.pres) {
            if l.activation() == Activation::Relu {
                out.extend(z.iter().map(|&v| v > 0.0));
            }
        }
    }
}

fn weight_view(layer: &super::DenseLayer) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((layer.out_dim(), layer.in_dim()), layer.weights())
        .expect("dense layer shape is consistent")
}

/// Evaluates `fnn` on every row of `x`.
pub fn forward_batch(fnn: &Fnn, x: Array2<f64>) -> (Array2<f64>, BatchCache) {
    debug_assert_eq!(x.ncols(), fnn.input_dim());
    let mut inputs = Vec::with_capacity(fnn.depth());
    let mut pres = Vec::with_capacity(fnn.depth());
    let mut cur = x;
    for l in fnn.layers() {
        let mut z = cur.dot(&weight_view(l).t());
        z += &ArrayView2::from_shape((1, l.out_dim()), l.bias()).expect("bias shape");
        let a = match l.activation() {
            Activation::Relu => z.mapv(|v| if v > 0.0 { v } else { 0.0 }),
            Activation::Identity => z.clone(),
        };
        inputs.push(std::mem::replace(&mut cur, a));
        pres.push(z);
    }
    (cur, BatchCache { inputs, pres })
}

/// Backpropagates `upstream` (one row per batch row). Parameter gradients are
/// accumulated into `dparams` in [`Fnn::params`] order; returns the input gradient.
pub fn backward_batch(
    fnn: &Fnn,
    cache: &BatchCache,
    upstream: Array2<f64>,
    dparams: &mut [f64],
) -> Array2<f64> {
    let mut offsets = Vec::with_capacity(fnn.depth());
    let mut off = 0;
    for l in fnn.layers() {
        offsets.push(off);
        off += l.weights().len() + l.bias().len();
    }
    debug_assert_eq!(off, dparams.len());

    let mut delta = upstream;
    for (li, l) in fnn.layers().iter().enumerate().rev() {
        if l.activation() == Activation::Relu {
            ndarray::Zip::from(&mut delta)
                .and(&cache.pres[li])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
        }
        let dw = delta.t().dot(&cache.inputs[li]);
        let db: Array1<f64> = delta.sum_axis(Axis(0));
        let base = offsets[li];
        let nw = l.weights().len();
        for (g, v) in dparams[base..base + nw].iter_mut().zip(dw.iter()) {
            *g += v;
        }
        for (g, v) in dparams[base + nw..base + nw + l.out_dim()].iter_mut().zip(db.iter()) {
            *g += v;
        }
        delta = delta.dot(&weight_view(l));
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;
    use rand::Rng;

    #[test]
    fn batch_matches_single_vector_path() {
        let mut rng = seeded_rng(11);
        let f = Fnn::mlp_init(&[3, 6, 4, 2], &mut rng).unwrap();
        let rows = 5;
        let x = Array2::from_shape_fn((rows, 3), |_| rng.gen_range(-2.0..2.0));
        let up = Array2::from_shape_fn((rows, 2), |_| rng.gen_range(-1.0..1.0));
        let (y, cache) = forward_batch(&f, x.clone());
        let mut dp = vec![0.0; f.num_params()];
        let dx = backward_batch(&f, &cache, up.clone(), &mut dp);

        let mut dp_ref = vec![0.0; f.num_params()];
        for r in 0..rows {
            let xr = x.row(r).to_vec();
            let yr = f.eval(&xr).unwrap();
            for c in 0..2 {
                assert!((yr[c] - y[[r, c]]).abs() < 1e-12);
            }
            let g = f.grad(&xr, &up.row(r).to_vec()).unwrap();
            for c in 0..3 {
                assert!((g.dx[c] - dx[[r, c]]).abs() < 1e-12);
            }
            for (a, b) in dp_ref.iter_mut().zip(&g.dparams) {
                *a += b;
            }
        }
        for (a, b) in dp.iter().zip(&dp_ref) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
