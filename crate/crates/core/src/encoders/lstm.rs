//! LSTM cell and batched sequence runner with exact backpropagation.
//!
//! Gate equations, with `*` the elementwise product:
//!
//! ```text
//! i_t = sigmoid(W_ii x_t + b_ii + W_hi h_{t-1} + b_hi)
//! f_t = sigmoid(W_if x_t + b_if + W_hf h_{t-1} + b_hf)
//! g_t = tanh   (W_ig x_t + b_ig + W_hg h_{t-1} + b_hg)
//! o_t = sigmoid(W_io x_t + b_io + W_ho h_{t-1} + b_ho)
//! c_t = f_t * c_{t-1} + i_t * g_t
//! h_t = o_t * tanh(c_t)
//! ```
//!
//! Several sequences are run together: they are ranked by decreasing length
//! (ties keep input order) so that the sequences still active at step `t`
//! always occupy the first rows of that step's matrices.

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, DenseMatrix, DenseVector, Rng, Scalar};

const GATES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    pub w_ii: DenseMatrix<T>,
    pub w_hi: DenseMatrix<T>,
    pub w_if: DenseMatrix<T>,
    pub w_hf: DenseMatrix<T>,
    pub w_ig: DenseMatrix<T>,
    /// Hidden-to-cell-gate weight (the recurrent matrix of `g_t`).
    pub w_hg: DenseMatrix<T>,
    pub w_io: DenseMatrix<T>,
    pub w_ho: DenseMatrix<T>,
    pub b_ii: DenseVector<T>,
    pub b_hi: DenseVector<T>,
    pub b_if: DenseVector<T>,
    pub b_hf: DenseVector<T>,
    pub b_ig: DenseVector<T>,
    pub b_hg: DenseVector<T>,
    pub b_io: DenseVector<T>,
    pub b_ho: DenseVector<T>,
}

pub(crate) struct GateRefs<'a, T> {
    pub wx: [&'a DenseMatrix<T>; GATES],
    pub wh: [&'a DenseMatrix<T>; GATES],
    pub bx: [&'a DenseVector<T>; GATES],
    pub bh: [&'a DenseVector<T>; GATES],
}

pub(crate) struct GateMuts<'a, T> {
    pub wx: [&'a mut DenseMatrix<T>; GATES],
    pub wh: [&'a mut DenseMatrix<T>; GATES],
    pub bx: [&'a mut DenseVector<T>; GATES],
    pub bh: [&'a mut DenseVector<T>; GATES],
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let wx = || DenseMatrix::zeros(hidden_dim, input_dim);
        let wh = || DenseMatrix::zeros(hidden_dim, hidden_dim);
        let b = || DenseVector::zeros(hidden_dim);
        Self {
            w_ii: wx(),
            w_hi: wh(),
            w_if: wx(),
            w_hf: wh(),
            w_ig: wx(),
            w_hg: wh(),
            w_io: wx(),
            w_ho: wh(),
            b_ii: b(),
            b_hi: b(),
            b_if: b(),
            b_hf: b(),
            b_ig: b(),
            b_hg: b(),
            b_io: b(),
            b_ho: b(),
        }
    }

    /// Weights uniform in `[-scale, scale)`, biases zero.
    pub fn uniform(input_dim: usize, hidden_dim: usize, scale: f64, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(input_dim, hidden_dim);
        {
            let g = p.gates_mut();
            for m in g.wx.into_iter().chain(g.wh) {
                for x in m.as_mut_slice() {
                    *x = T::lit(rng.uniform(-scale, scale)?);
                }
            }
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.w_ii.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_ii.rows()
    }

    pub(crate) fn gates(&self) -> GateRefs<'_, T> {
        GateRefs {
            wx: [&self.w_ii, &self.w_if, &self.w_ig, &self.w_io],
            wh: [&self.w_hi, &self.w_hf, &self.w_hg, &self.w_ho],
            bx: [&self.b_ii, &self.b_if, &self.b_ig, &self.b_io],
            bh: [&self.b_hi, &self.b_hf, &self.b_hg, &self.b_ho],
        }
    }

    pub(crate) fn gates_mut(&mut self) -> GateMuts<'_, T> {
        GateMuts {
            wx: [&mut self.w_ii, &mut self.w_if, &mut self.w_ig, &mut self.w_io],
            wh: [&mut self.w_hi, &mut self.w_hf, &mut self.w_hg, &mut self.w_ho],
            bx: [&mut self.b_ii, &mut self.b_if, &mut self.b_ig, &mut self.b_io],
            bh: [&mut self.b_hi, &mut self.b_hf, &mut self.b_hg, &mut self.b_ho],
        }
    }

    /// Named views of all sixteen tensors, in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &[T])> {
        vec![
            ("w_ii", self.w_ii.as_slice()),
            ("w_hi", self.w_hi.as_slice()),
            ("w_if", self.w_if.as_slice()),
            ("w_hf", self.w_hf.as_slice()),
            ("w_ig", self.w_ig.as_slice()),
            ("w_hg", self.w_hg.as_slice()),
            ("w_io", self.w_io.as_slice()),
            ("w_ho", self.w_ho.as_slice()),
            ("b_ii", self.b_ii.as_slice()),
            ("b_hi", self.b_hi.as_slice()),
            ("b_if", self.b_if.as_slice()),
            ("b_hf", self.b_hf.as_slice()),
            ("b_ig", self.b_ig.as_slice()),
            ("b_hg", self.b_hg.as_slice()),
            ("b_io", self.b_io.as_slice()),
            ("b_ho", self.b_ho.as_slice()),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        vec![
            ("w_ii", self.w_ii.as_mut_slice()),
            ("w_hi", self.w_hi.as_mut_slice()),
            ("w_if", self.w_if.as_mut_slice()),
            ("w_hf", self.w_hf.as_mut_slice()),
            ("w_ig", self.w_ig.as_mut_slice()),
            ("w_hg", self.w_hg.as_mut_slice()),
            ("w_io", self.w_io.as_mut_slice()),
            ("w_ho", self.w_ho.as_mut_slice()),
            ("b_ii", self.b_ii.as_mut_slice()),
            ("b_hi", self.b_hi.as_mut_slice()),
            ("b_if", self.b_if.as_mut_slice()),
            ("b_hf", self.b_hf.as_mut_slice()),
            ("b_ig", self.b_ig.as_mut_slice()),
            ("b_hg", self.b_hg.as_mut_slice()),
            ("b_io", self.b_io.as_mut_slice()),
            ("b_ho", self.b_ho.as_mut_slice()),
        ]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> LstmParams<U> {
        LstmParams {
            w_ii: self.w_ii.map(f),
            w_hi: self.w_hi.map(f),
            w_if: self.w_if.map(f),
            w_hf: self.w_hf.map(f),
            w_ig: self.w_ig.map(f),
            w_hg: self.w_hg.map(f),
            w_io: self.w_io.map(f),
            w_ho: self.w_ho.map(f),
            b_ii: self.b_ii.map(f),
            b_hi: self.b_hi.map(f),
            b_if: self.b_if.map(f),
            b_hf: self.b_hf.map(f),
            b_ig: self.b_ig.map(f),
            b_hg: self.b_hg.map(f),
            b_io: self.b_io.map(f),
            b_ho: self.b_ho.map(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: DenseVector<T>,
    pub c: DenseVector<T>,
}

impl<T: Scalar> LstmState<T> {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: DenseVector::zeros(hidden_dim),
            c: DenseVector::zeros(hidden_dim),
        }
    }
}

/// Activations of one time step for the `rows` sequences still running.
/// All buffers are row-major `rows x dim`.
#[derive(Debug, Clone)]
struct StepCache<T> {
    rows: usize,
    h_prev_zero: bool,
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    /// Gate activations in order i, f, g, o.
    gates: [Vec<T>; GATES],
    tanh_c: Vec<T>,
    c: Vec<T>,
    h: Vec<T>,
}

fn forward_step<T: Scalar>(
    params: &LstmParams<T>,
    rows: usize,
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    h_prev_zero: bool,
) -> StepCache<T> {
    let hid = params.hidden_dim();
    let inp = params.input_dim();
    let g = params.gates();
    let mut pre: [Vec<T>; GATES] = std::array::from_fn(|_| vec![T::zero(); rows * hid]);
    for k in 0..GATES {
        let bias: Vec<T> = g.bx[k]
            .as_slice()
            .iter()
            .zip(g.bh[k].as_slice())
            .map(|(&a, &b)| a + b)
            .collect();
        for r in 0..rows {
            pre[k][r * hid..(r + 1) * hid].copy_from_slice(&bias);
        }
        T::gemm(
            rows,
            inp,
            hid,
            T::one(),
            &x,
            inp,
            1,
            g.wx[k].as_slice(),
            1,
            inp,
            T::one(),
            &mut pre[k],
            hid,
            1,
        );
        if !h_prev_zero {
            T::gemm(
                rows,
                hid,
                hid,
                T::one(),
                &h_prev,
                hid,
                1,
                g.wh[k].as_slice(),
                1,
                hid,
                T::one(),
                &mut pre[k],
                hid,
                1,
            );
        }
    }
    let [mut a_i, mut a_f, mut a_g, mut a_o] = pre;
    a_i.iter_mut().for_each(|v| *v = sigmoid(*v));
    a_f.iter_mut().for_each(|v| *v = sigmoid(*v));
    a_g.iter_mut().for_each(|v| *v = v.tanh());
    a_o.iter_mut().for_each(|v| *v = sigmoid(*v));
    let n = rows * hid;
    let mut c = vec![T::zero(); n];
    let mut tanh_c = vec![T::zero(); n];
    let mut h = vec![T::zero(); n];
    for e in 0..n {
        c[e] = a_f[e] * c_prev[e] + a_i[e] * a_g[e];
        tanh_c[e] = c[e].tanh();
        h[e] = a_o[e] * tanh_c[e];
    }
    StepCache {
        rows,
        h_prev_zero,
        x,
        h_prev,
        c_prev,
        gates: [a_i, a_f, a_g, a_o],
        tanh_c,
        c,
        h,
    }
}

/// One cell update from an explicit previous state.
pub fn lstm_step<T: Scalar>(params: &LstmParams<T>, x: &DenseVector<T>, prev: &LstmState<T>) -> Result<LstmState<T>> {
    let hid = params.hidden_dim();
    if x.dim() != params.input_dim() {
        return Err(Error::dim("lstm input", params.input_dim(), x.dim()));
    }
    if prev.h.dim() != hid || prev.c.dim() != hid {
        return Err(Error::dim("lstm state", hid, prev.h.dim().max(prev.c.dim())));
    }
    let step = forward_step(
        params,
        1,
        x.as_slice().to_vec(),
        prev.h.as_slice().to_vec(),
        prev.c.as_slice().to_vec(),
        false,
    );
    Ok(LstmState {
        h: DenseVector::from_vec(step.h),
        c: DenseVector::from_vec(step.c),
    })
}

/// Cached forward pass over a batch of sequences, started from the zero state.
#[derive(Debug, Clone)]
pub struct LstmTrace<T> {
    input_dim: usize,
    hidden_dim: usize,
    lens: Vec<usize>,
    /// `order[r]` is the sequence at rank `r`.
    order: Vec<usize>,
    rank: Vec<usize>,
    steps: Vec<StepCache<T>>,
}

/// Runs the LSTM over every sequence in `seqs` (each a list of input rows).
pub fn run_lstm_batch<T: Scalar>(params: &LstmParams<T>, seqs: &[Vec<&[T]>]) -> Result<LstmTrace<T>> {
    let inp = params.input_dim();
    let hid = params.hidden_dim();
    for s in seqs {
        if s.is_empty() {
            return Err(Error::Empty("empty sequence"));
        }
        if let Some(bad) = s.iter().find(|x| x.len() != inp) {
            return Err(Error::dim("lstm input", inp, bad.len()));
        }
    }
    let lens: Vec<usize> = seqs.iter().map(Vec::len).collect();
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    order.sort_by(|&a, &b| lens[b].cmp(&lens[a]));
    let mut rank = vec![0; seqs.len()];
    for (r, &s) in order.iter().enumerate() {
        rank[s] = r;
    }
    let max_len = order.first().map_or(0, |&s| lens[s]);

    let mut steps: Vec<StepCache<T>> = Vec::with_capacity(max_len);
    for t in 0..max_len {
        let rows = order.iter().take_while(|&&s| lens[s] > t).count();
        let mut x = Vec::with_capacity(rows * inp);
        for &s in &order[..rows] {
            x.extend_from_slice(seqs[s][t]);
        }
        let (h_prev, c_prev, zero) = match steps.last() {
            Some(prev) => (prev.h[..rows * hid].to_vec(), prev.c[..rows * hid].to_vec(), false),
            None => (vec![T::zero(); rows * hid], vec![T::zero(); rows * hid], true),
        };
        steps.push(forward_step(params, rows, x, h_prev, c_prev, zero));
    }
    Ok(LstmTrace {
        input_dim: inp,
        hidden_dim: hid,
        lens,
        order,
        rank,
        steps,
    })
}

/// Single-sequence convenience over [`run_lstm_batch`].
pub fn run_lstm<T: Scalar>(params: &LstmParams<T>, inputs: &[DenseVector<T>]) -> Result<LstmTrace<T>> {
    let seq: Vec<&[T]> = inputs.iter().map(DenseVector::as_slice).collect();
    run_lstm_batch(params, &[seq])
}

impl<T: Scalar> LstmTrace<T> {
    pub fn num_sequences(&self) -> usize {
        self.lens.len()
    }

    pub fn len_of(&self, seq: usize) -> usize {
        self.lens[seq]
    }

    /// Hidden state after the last step of `seq`.
    pub fn final_hidden(&self, seq: usize) -> &[T] {
        self.hidden_at(seq, self.lens[seq] - 1)
    }

    pub fn hidden_at(&self, seq: usize, t: usize) -> &[T] {
        let hid = self.hidden_dim;
        let r = self.rank[seq];
        &self.steps[t].h[r * hid..(r + 1) * hid]
    }

    /// State after step `t` (0-based) of `seq`.
    pub fn state_at(&self, seq: usize, t: usize) -> LstmState<T> {
        let hid = self.hidden_dim;
        let r = self.rank[seq];
        let s = &self.steps[t];
        LstmState {
            h: DenseVector::from_vec(s.h[r * hid..(r + 1) * hid].to_vec()),
            c: DenseVector::from_vec(s.c[r * hid..(r + 1) * hid].to_vec()),
        }
    }

    pub fn final_state(&self, seq: usize) -> LstmState<T> {
        self.state_at(seq, self.lens[seq] - 1)
    }

    /// Gate activations `[i, f, g, o]` of `seq` at step `t`.
    pub fn gates_at(&self, seq: usize, t: usize) -> [&[T]; GATES] {
        let hid = self.hidden_dim;
        let r = self.rank[seq];
        let s = &self.steps[t];
        std::array::from_fn(|k| &s.gates[k][r * hid..(r + 1) * hid])
    }

    /// Backpropagates `d_final` (one row of length `hidden_dim` per sequence,
    /// the loss gradient w.r.t. each final hidden state) through the trace.
    ///
    /// Parameter gradients are added into `grads`. Returns the input
    /// gradients, one `len x input_dim` row-major buffer per sequence.
    pub fn backward(&self, params: &LstmParams<T>, d_final: &[T], grads: &mut LstmParams<T>) -> Vec<Vec<T>> {
        let hid = self.hidden_dim;
        let inp = self.input_dim;
        assert_eq!(d_final.len(), self.lens.len() * hid, "d_final shape");
        let mut dx: Vec<Vec<T>> = self.lens.iter().map(|&l| vec![T::zero(); l * inp]).collect();
        let g = params.gates();
        let gm = grads.gates_mut();

        let mut dh_carry: Vec<T> = Vec::new();
        let mut dc_carry: Vec<T> = Vec::new();
        let mut carried_rows = 0;
        for (t, step) in self.steps.iter().enumerate().rev() {
            let rows = step.rows;
            let n = rows * hid;
            let mut dh = vec![T::zero(); n];
            let mut dc = vec![T::zero(); n];
            dh[..carried_rows * hid].copy_from_slice(&dh_carry[..carried_rows * hid]);
            dc[..carried_rows * hid].copy_from_slice(&dc_carry[..carried_rows * hid]);
            // Sequences whose last step is `t` occupy ranks carried_rows..rows.
            for r in carried_rows..rows {
                let s = self.order[r];
                debug_assert_eq!(self.lens[s], t + 1);
                for (a, &b) in dh[r * hid..(r + 1) * hid]
                    .iter_mut()
                    .zip(&d_final[s * hid..(s + 1) * hid])
                {
                    *a += b;
                }
            }

            let [gi, gf, gg, go] = &step.gates;
            let mut da: [Vec<T>; GATES] = std::array::from_fn(|_| vec![T::zero(); n]);
            let mut dc_prev = vec![T::zero(); n];
            let one = T::one();
            for e in 0..n {
                let tc = step.tanh_c[e];
                let d_o = dh[e] * tc;
                let dce = dc[e] + dh[e] * go[e] * (one - tc * tc);
                let d_i = dce * gg[e];
                let d_g = dce * gi[e];
                let d_f = dce * step.c_prev[e];
                dc_prev[e] = dce * gf[e];
                da[0][e] = d_i * gi[e] * (one - gi[e]);
                da[1][e] = d_f * gf[e] * (one - gf[e]);
                da[2][e] = d_g * (one - gg[e] * gg[e]);
                da[3][e] = d_o * go[e] * (one - go[e]);
            }

            let mut dx_step = vec![T::zero(); rows * inp];
            let mut dh_prev = vec![T::zero(); n];
            for k in 0..GATES {
                // dW_x += dA^T X ; dW_h += dA^T H_prev
                T::gemm(
                    hid,
                    rows,
                    inp,
                    one,
                    &da[k],
                    1,
                    hid,
                    &step.x,
                    inp,
                    1,
                    one,
                    gm.wx[k].as_mut_slice(),
                    inp,
                    1,
                );
                if !step.h_prev_zero {
                    T::gemm(
                        hid,
                        rows,
                        hid,
                        one,
                        &da[k],
                        1,
                        hid,
                        &step.h_prev,
                        hid,
                        1,
                        one,
                        gm.wh[k].as_mut_slice(),
                        hid,
                        1,
                    );
                }
                // Input and hidden biases enter the gate identically.
                for r in 0..rows {
                    for (j, &v) in da[k][r * hid..(r + 1) * hid].iter().enumerate() {
                        gm.bx[k][j] += v;
                        gm.bh[k][j] += v;
                    }
                }
                // dX += dA W_x ; dH_prev += dA W_h
                T::gemm(
                    rows,
                    hid,
                    inp,
                    one,
                    &da[k],
                    hid,
                    1,
                    g.wx[k].as_slice(),
                    inp,
                    1,
                    one,
                    &mut dx_step,
                    inp,
                    1,
                );
                T::gemm(
                    rows,
                    hid,
                    hid,
                    one,
                    &da[k],
                    hid,
                    1,
                    g.wh[k].as_slice(),
                    hid,
                    1,
                    one,
                    &mut dh_prev,
                    hid,
                    1,
                );
            }
            for r in 0..rows {
                let s = self.order[r];
                dx[s][t * inp..(t + 1) * inp].copy_from_slice(&dx_step[r * inp..(r + 1) * inp]);
            }
            dh_carry = dh_prev;
            dc_carry = dc_prev;
            carried_rows = rows;
        }
        dx
    }
}
