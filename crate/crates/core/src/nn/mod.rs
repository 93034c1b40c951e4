//! Hand-rolled recurrent Q-network: FC -> ReLU -> GRU -> FC, all f64.
//!
//! No autograd. The backward pass is derived by hand and checked against
//! central finite differences in the tests. Everything the optimizer and the
//! checkpoint code need goes through a single canonical flattening order, so
//! a parameter vector is just `Vec<f64>`.

pub mod adam;
pub mod checkpoint;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

pub use adam::OptimState;

// ---------------------------------------------------------------------------
// Tensor2
// ---------------------------------------------------------------------------

/// Dense row-major matrix. Just enough linear algebra for this crate.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Tensor2 {
        Tensor2 { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Tensor2 {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Tensor2 { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// y = W x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let row = self.row(i);
            // Four independent lanes keep the adds pipelined; a single
            // accumulator chain is add-latency-bound and several times slower.
            let mut lanes = [0.0f64; 4];
            let mut rc = row.chunks_exact(4);
            let mut xc = x.chunks_exact(4);
            for (r4, x4) in (&mut rc).zip(&mut xc) {
                lanes[0] += r4[0] * x4[0];
                lanes[1] += r4[1] * x4[1];
                lanes[2] += r4[2] * x4[2];
                lanes[3] += r4[3] * x4[3];
            }
            let mut tail = 0.0;
            for (a, b) in rc.remainder().iter().zip(xc.remainder()) {
                tail += a * b;
            }
            *yi = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail;
        }
    }

    /// x += W^T y
    pub fn matvec_t_add(&self, y: &[f64], x: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for i in 0..self.rows {
            let row = self.row(i);
            let yi = y[i];
            for j in 0..self.cols {
                x[j] += row[j] * yi;
            }
        }
    }

    /// W += y x^T (outer-product accumulate, for gradients).
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for i in 0..self.rows {
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            let yi = y[i];
            for j in 0..self.cols {
                row[j] += yi * x[j];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Network definition
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QNetDims {
    pub input: usize,
    pub hidden: usize,
    pub actions: usize,
}

/// Parameters of one Q-network.
///
/// Hidden-state recurrence (elementwise ops, sigma = logistic):
///   z  = sigma(Wz x1 + Uz h + bz)
///   r  = sigma(Wr x1 + Ur h + br)
///   c  = tanh(Wh x1 + Uh (r.h) + bh)
///   h' = (1 - z).h + z.c
/// where x1 = relu(W1 x + b1) and Q = W2 h' + b2.
#[derive(Clone, Debug, PartialEq)]
pub struct QNetParams {
    pub dims: QNetDims,
    pub w1: Tensor2,
    pub b1: Vec<f64>,
    pub wz: Tensor2,
    pub uz: Tensor2,
    pub bz: Vec<f64>,
    pub wr: Tensor2,
    pub ur: Tensor2,
    pub br: Vec<f64>,
    pub wh: Tensor2,
    pub uh: Tensor2,
    pub bh: Vec<f64>,
    pub w2: Tensor2,
    pub b2: Vec<f64>,
}

impl QNetParams {
    /// Weights uniform in +-1/sqrt(fan_in), biases zero.
    pub fn init(dims: QNetDims, rng: &mut ChaCha12Rng) -> QNetParams {
        let mut mat = |rows: usize, cols: usize| {
            let bound = 1.0 / (cols as f64).sqrt();
            Tensor2::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
        };
        let (i, d, a) = (dims.input, dims.hidden, dims.actions);
        QNetParams {
            dims,
            w1: mat(d, i),
            b1: vec![0.0; d],
            wz: mat(d, d),
            uz: mat(d, d),
            bz: vec![0.0; d],
            wr: mat(d, d),
            ur: mat(d, d),
            br: vec![0.0; d],
            wh: mat(d, d),
            uh: mat(d, d),
            bh: vec![0.0; d],
            w2: mat(a, d),
            b2: vec![0.0; a],
        }
    }

    pub fn zeros_like(&self) -> QNetParams {
        let mut p = self.clone();
        p.visit_mut(|s| s.fill(0.0));
        p
    }

    /// Canonical parameter order. Optimizer state, checkpoints and the
    /// finite-difference tests all rely on this exact sequence.
    pub fn visit(&self, mut f: impl FnMut(&[f64])) {
        f(&self.w1.data);
        f(&self.b1);
        f(&self.wz.data);
        f(&self.uz.data);
        f(&self.bz);
        f(&self.wr.data);
        f(&self.ur.data);
        f(&self.br);
        f(&self.wh.data);
        f(&self.uh.data);
        f(&self.bh);
        f(&self.w2.data);
        f(&self.b2);
    }

    pub fn visit_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        f(&mut self.w1.data);
        f(&mut self.b1);
        f(&mut self.wz.data);
        f(&mut self.uz.data);
        f(&mut self.bz);
        f(&mut self.wr.data);
        f(&mut self.ur.data);
        f(&mut self.br);
        f(&mut self.wh.data);
        f(&mut self.uh.data);
        f(&mut self.bh);
        f(&mut self.w2.data);
        f(&mut self.b2);
    }

    pub fn flat_len(&self) -> usize {
        let mut n = 0;
        self.visit(|s| n += s.len());
        n
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        self.visit(|s| out.extend_from_slice(s));
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.flat_len(), "flat parameter length mismatch");
        let mut off = 0;
        self.visit_mut(|s| {
            s.copy_from_slice(&flat[off..off + s.len()]);
            off += s.len();
        });
    }

    pub fn zero_hidden(&self) -> Vec<f64> {
        vec![0.0; self.dims.hidden]
    }
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

/// Intermediates of one forward step, kept for backprop through time.
#[derive(Clone, Debug)]
pub struct StepCache {
    pub x: Vec<f64>,
    /// Pre-ReLU first-layer activation.
    pub a1: Vec<f64>,
    pub x1: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    /// r . h_prev
    pub rh: Vec<f64>,
    /// Candidate state (tanh output).
    pub c: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub h_new: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One recurrent step: Q-values for every action plus the new hidden state.
pub fn qnet_forward(p: &QNetParams, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, Vec<f64>, StepCache) {
    let d = p.dims.hidden;
    debug_assert_eq!(x.len(), p.dims.input);
    debug_assert_eq!(h_prev.len(), d);

    let mut a1 = vec![0.0; d];
    p.w1.matvec(x, &mut a1);
    for (a, b) in a1.iter_mut().zip(&p.b1) {
        *a += b;
    }
    let x1: Vec<f64> = a1.iter().map(|&v| v.max(0.0)).collect();

    let gate = |w: &Tensor2, u: &Tensor2, b: &[f64], hin: &[f64]| {
        let mut acc = vec![0.0; d];
        w.matvec(&x1, &mut acc);
        let mut uh = vec![0.0; d];
        u.matvec(hin, &mut uh);
        for i in 0..d {
            acc[i] += uh[i] + b[i];
        }
        acc
    };

    let z: Vec<f64> = gate(&p.wz, &p.uz, &p.bz, h_prev).iter().map(|&v| sigmoid(v)).collect();
    let r: Vec<f64> = gate(&p.wr, &p.ur, &p.br, h_prev).iter().map(|&v| sigmoid(v)).collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(&ri, &hi)| ri * hi).collect();
    let c: Vec<f64> = gate(&p.wh, &p.uh, &p.bh, &rh).iter().map(|&v| v.tanh()).collect();
    let h_new: Vec<f64> = (0..d).map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * c[i]).collect();

    let mut q = vec![0.0; p.dims.actions];
    p.w2.matvec(&h_new, &mut q);
    for (qi, b) in q.iter_mut().zip(&p.b2) {
        *qi += b;
    }

    let cache = StepCache {
        x: x.to_vec(),
        a1,
        x1,
        z,
        r,
        rh,
        c,
        h_prev: h_prev.to_vec(),
        h_new: h_new.clone(),
    };
    (q, h_new, cache)
}

/// Q-values only, no cache. For action selection and target evaluation.
pub fn qnet_forward_nograd(p: &QNetParams, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (q, h, _) = qnet_forward(p, x, h_prev);
    (q, h)
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

/// Backprop one step. `dq` is dLoss/dQ for this step, `dh_new` is the
/// gradient flowing back from the following step's hidden input. Parameter
/// gradients accumulate into `grads`; the return value is dLoss/dh_prev, to
/// be fed to the previous step.
pub fn qnet_backward(
    p: &QNetParams,
    cache: &StepCache,
    dq: &[f64],
    dh_new: &[f64],
    grads: &mut QNetParams,
) -> Vec<f64> {
    let d = p.dims.hidden;
    debug_assert_eq!(dq.len(), p.dims.actions);
    debug_assert_eq!(dh_new.len(), d);

    // Output layer: Q = W2 h' + b2.
    grads.w2.add_outer(dq, &cache.h_new);
    for (g, &v) in grads.b2.iter_mut().zip(dq) {
        *g += v;
    }
    let mut dh = dh_new.to_vec();
    p.w2.matvec_t_add(dq, &mut dh);

    // h' = (1 - z).h + z.c
    let mut dh_prev = vec![0.0; d];
    let mut dc = vec![0.0; d];
    let mut dz = vec![0.0; d];
    for i in 0..d {
        dz[i] = dh[i] * (cache.c[i] - cache.h_prev[i]);
        dc[i] = dh[i] * cache.z[i];
        dh_prev[i] = dh[i] * (1.0 - cache.z[i]);
    }

    // c = tanh(Wh x1 + Uh (r.h) + bh)
    let dah: Vec<f64> = (0..d).map(|i| dc[i] * (1.0 - cache.c[i] * cache.c[i])).collect();
    grads.wh.add_outer(&dah, &cache.x1);
    grads.uh.add_outer(&dah, &cache.rh);
    for (g, &v) in grads.bh.iter_mut().zip(&dah) {
        *g += v;
    }
    let mut drh = vec![0.0; d];
    p.uh.matvec_t_add(&dah, &mut drh);
    let mut dr = vec![0.0; d];
    for i in 0..d {
        dr[i] = drh[i] * cache.h_prev[i];
        dh_prev[i] += drh[i] * cache.r[i];
    }

    // Gate pre-activations through the logistic derivative.
    let daz: Vec<f64> = (0..d).map(|i| dz[i] * cache.z[i] * (1.0 - cache.z[i])).collect();
    let dar: Vec<f64> = (0..d).map(|i| dr[i] * cache.r[i] * (1.0 - cache.r[i])).collect();
    grads.wz.add_outer(&daz, &cache.x1);
    grads.uz.add_outer(&daz, &cache.h_prev);
    for (g, &v) in grads.bz.iter_mut().zip(&daz) {
        *g += v;
    }
    grads.wr.add_outer(&dar, &cache.x1);
    grads.ur.add_outer(&dar, &cache.h_prev);
    for (g, &v) in grads.br.iter_mut().zip(&dar) {
        *g += v;
    }
    p.uz.matvec_t_add(&daz, &mut dh_prev);
    p.ur.matvec_t_add(&dar, &mut dh_prev);

    // Into the first layer: x1 = relu(W1 x + b1).
    let mut dx1 = vec![0.0; d];
    p.wz.matvec_t_add(&daz, &mut dx1);
    p.wr.matvec_t_add(&dar, &mut dx1);
    p.wh.matvec_t_add(&dah, &mut dx1);
    let da1: Vec<f64> = (0..d)
        .map(|i| if cache.a1[i] > 0.0 { dx1[i] } else { 0.0 })
        .collect();
    grads.w1.add_outer(&da1, &cache.x);
    for (g, &v) in grads.b1.iter_mut().zip(&da1) {
        *g += v;
    }

    dh_prev
}
