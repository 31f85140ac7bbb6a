//! Single LSTM cell, sequence-level forward/backward passes, and the plain
//! recurrent cell kept as a comparison baseline.
//!
//! Gate pre-activations are one fused affine map over the concatenation
//! `[h_{t-1}; x_t]`:
//!
//! ```text
//! i = sigmoid(W_i [h; x] + b_i)      f = sigmoid(W_f [h; x] + b_f)
//! o = sigmoid(W_o [h; x] + b_o)      c_hat = tanh(W_c [h; x] + b_c)
//! c_t = f .* c_{t-1} + i .* c_hat    h_t = o .* tanh(c_t)
//! ```
//!
//! The backward pass accumulates gradients through both the `h` and `c`
//! recurrences; an optional truncation length cuts gradient flow at fixed
//! segment boundaries while the forward state still carries across them.

use crate::nn::{
    mix_seed, sigmoid, sigmoid_prime, tanh_act, tanh_prime, xavier_init, Matrix2D, NnError,
    Vector1D,
};

/// Gate weights and biases for one direction. Each weight matrix has shape
/// `hidden x (hidden + input)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_i: Matrix2D,
    pub w_f: Matrix2D,
    pub w_o: Matrix2D,
    pub w_c: Matrix2D,
    pub b_i: Vector1D,
    pub b_f: Vector1D,
    pub b_o: Vector1D,
    pub b_c: Vector1D,
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let w = || Matrix2D::zeros(hidden_size, hidden_size + input_size);
        let b = || vec![0.0; hidden_size];
        LstmParams {
            w_i: w(),
            w_f: w(),
            w_o: w(),
            w_c: w(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_c: b(),
        }
    }

    /// Xavier-initialized weights, zero biases. Deterministic per seed.
    pub fn xavier(input_size: usize, hidden_size: usize, seed: u64) -> Self {
        let cols = hidden_size + input_size;
        LstmParams {
            w_i: xavier_init(hidden_size, cols, mix_seed(seed, 1)),
            w_f: xavier_init(hidden_size, cols, mix_seed(seed, 2)),
            w_o: xavier_init(hidden_size, cols, mix_seed(seed, 3)),
            w_c: xavier_init(hidden_size, cols, mix_seed(seed, 4)),
            b_i: vec![0.0; hidden_size],
            b_f: vec![0.0; hidden_size],
            b_o: vec![0.0; hidden_size],
            b_c: vec![0.0; hidden_size],
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_i.rows()
    }

    pub fn input_size(&self) -> usize {
        self.w_i.cols() - self.w_i.rows()
    }

    /// Parameter tensors in declared order (weights, then biases).
    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.w_i.as_slice(),
            self.w_f.as_slice(),
            self.w_o.as_slice(),
            self.w_c.as_slice(),
            &self.b_i,
            &self.b_f,
            &self.b_o,
            &self.b_c,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.w_i.as_mut_slice(),
            self.w_f.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.w_c.as_mut_slice(),
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
        ]
    }
}

/// Hidden and cell state; both zero-initialized at the start of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vector1D,
    pub c: Vector1D,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        LstmState { h: vec![0.0; hidden_size], c: vec![0.0; hidden_size] }
    }
}

/// Activations retained from one forward step, enough for an exact backward
/// pass.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub x: Vector1D,
    pub i: Vector1D,
    pub f: Vector1D,
    pub o: Vector1D,
    pub c_hat: Vector1D,
    pub c: Vector1D,
    pub tanh_c: Vector1D,
    pub h: Vector1D,
}

/// Per-step caches in step order, plus the initial state they started from.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub init: LstmState,
    pub steps: Vec<LstmStepCache>,
}

impl LstmCache {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn prev_h(&self, t: usize) -> &[f64] {
        if t == 0 {
            &self.init.h
        } else {
            &self.steps[t - 1].h
        }
    }

    fn prev_c(&self, t: usize) -> &[f64] {
        if t == 0 {
            &self.init.c
        } else {
            &self.steps[t - 1].c
        }
    }
}

/// Gradients w.r.t. every LSTM parameter, same shapes as [`LstmParams`].
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub w_i: Matrix2D,
    pub w_f: Matrix2D,
    pub w_o: Matrix2D,
    pub w_c: Matrix2D,
    pub b_i: Vector1D,
    pub b_f: Vector1D,
    pub b_o: Vector1D,
    pub b_c: Vector1D,
}

impl LstmGrads {
    pub fn zeros_like(params: &LstmParams) -> Self {
        let rows = params.w_i.rows();
        let cols = params.w_i.cols();
        LstmGrads {
            w_i: Matrix2D::zeros(rows, cols),
            w_f: Matrix2D::zeros(rows, cols),
            w_o: Matrix2D::zeros(rows, cols),
            w_c: Matrix2D::zeros(rows, cols),
            b_i: vec![0.0; rows],
            b_f: vec![0.0; rows],
            b_o: vec![0.0; rows],
            b_c: vec![0.0; rows],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.w_i.as_slice(),
            self.w_f.as_slice(),
            self.w_o.as_slice(),
            self.w_c.as_slice(),
            &self.b_i,
            &self.b_f,
            &self.b_o,
            &self.b_c,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.w_i.as_mut_slice(),
            self.w_f.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.w_c.as_mut_slice(),
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
        ]
    }

    pub fn add_assign(&mut self, other: &LstmGrads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

fn check_cell_shapes(params: &LstmParams, x: &[f64], prev: &LstmState) -> Result<(), NnError> {
    let hidden = params.hidden_size();
    let input = params.input_size();
    if x.len() != input {
        return Err(NnError::Shape(format!(
            "input length {} does not match cell input size {}",
            x.len(),
            input
        )));
    }
    if prev.h.len() != hidden || prev.c.len() != hidden {
        return Err(NnError::Shape(format!(
            "state length {}/{} does not match hidden size {}",
            prev.h.len(),
            prev.c.len(),
            hidden
        )));
    }
    Ok(())
}

/// One LSTM step. Returns the new state and the cached activations.
pub fn lstm_cell_forward(
    params: &LstmParams,
    x: &[f64],
    prev: &LstmState,
) -> Result<(LstmState, LstmStepCache), NnError> {
    check_cell_shapes(params, x, prev)?;
    let hidden = params.hidden_size();

    let mut hx = Vec::with_capacity(hidden + x.len());
    hx.extend_from_slice(&prev.h);
    hx.extend_from_slice(x);

    let affine = |w: &Matrix2D, b: &[f64]| -> Vector1D {
        let mut out = w.matvec(&hx);
        for (o, bv) in out.iter_mut().zip(b) {
            *o += bv;
        }
        out
    };

    let i: Vector1D = affine(&params.w_i, &params.b_i).into_iter().map(sigmoid).collect();
    let f: Vector1D = affine(&params.w_f, &params.b_f).into_iter().map(sigmoid).collect();
    let o: Vector1D = affine(&params.w_o, &params.b_o).into_iter().map(sigmoid).collect();
    let c_hat: Vector1D = affine(&params.w_c, &params.b_c).into_iter().map(tanh_act).collect();

    let c: Vector1D = (0..hidden).map(|k| f[k] * prev.c[k] + i[k] * c_hat[k]).collect();
    let tanh_c: Vector1D = c.iter().copied().map(tanh_act).collect();
    let h: Vector1D = (0..hidden).map(|k| o[k] * tanh_c[k]).collect();

    let state = LstmState { h: h.clone(), c: c.clone() };
    let cache = LstmStepCache { x: x.to_vec(), i, f, o, c_hat, c, tanh_c, h };
    Ok((state, cache))
}

/// Runs the cell over a whole input sequence. Returns hidden states in step
/// order plus the cache needed for the backward pass.
pub fn lstm_sequence_forward(
    params: &LstmParams,
    inputs: &[Vector1D],
    init: &LstmState,
) -> Result<(Vec<Vector1D>, LstmCache), NnError> {
    if inputs.is_empty() {
        return Err(NnError::Shape("empty input sequence".into()));
    }
    let mut state = init.clone();
    let mut steps = Vec::with_capacity(inputs.len());
    let mut hidden_states = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (next, cache) = lstm_cell_forward(params, x, &state)?;
        hidden_states.push(next.h.clone());
        steps.push(cache);
        state = next;
    }
    Ok((hidden_states, LstmCache { init: init.clone(), steps }))
}

/// Full BPTT over a cached forward pass.
///
/// `dh_per_step[t]` is the loss gradient w.r.t. the hidden state emitted at
/// step `t`. Returns parameter gradients and the gradient w.r.t. each input.
pub fn lstm_sequence_backward(
    params: &LstmParams,
    cache: &LstmCache,
    dh_per_step: &[Vector1D],
) -> Result<(LstmGrads, Vec<Vector1D>), NnError> {
    lstm_sequence_backward_truncated(params, cache, dh_per_step, cache.len().max(1))
}

/// BPTT with gradient flow cut at segment boundaries of `truncated_len`
/// steps. `truncated_len >= sequence length` reproduces full BPTT exactly.
pub fn lstm_sequence_backward_truncated(
    params: &LstmParams,
    cache: &LstmCache,
    dh_per_step: &[Vector1D],
    truncated_len: usize,
) -> Result<(LstmGrads, Vec<Vector1D>), NnError> {
    if dh_per_step.len() != cache.len() {
        return Err(NnError::Shape(format!(
            "upstream gradient count {} does not match cache length {}",
            dh_per_step.len(),
            cache.len()
        )));
    }
    assert!(truncated_len >= 1, "truncated length must be at least 1");
    let hidden = params.hidden_size();
    let input = params.input_size();
    let steps = cache.len();

    let mut grads = LstmGrads::zeros_like(params);
    let mut dx = vec![vec![0.0; input]; steps];
    let mut dh_carry = vec![0.0; hidden];
    let mut dc_carry = vec![0.0; hidden];

    for t in (0..steps).rev() {
        let sc = &cache.steps[t];
        let prev_c = cache.prev_c(t);
        let prev_h = cache.prev_h(t);

        // dh: upstream contribution at this step plus the recurrent carry.
        let dh: Vector1D =
            dh_per_step[t].iter().zip(&dh_carry).map(|(u, c)| u + c).collect();

        let mut da_i = vec![0.0; hidden];
        let mut da_f = vec![0.0; hidden];
        let mut da_o = vec![0.0; hidden];
        let mut da_c = vec![0.0; hidden];
        let mut dc_prev = vec![0.0; hidden];

        for k in 0..hidden {
            let d_o = dh[k] * sc.tanh_c[k];
            let dc = dc_carry[k] + dh[k] * sc.o[k] * tanh_prime(sc.tanh_c[k]);
            let d_i = dc * sc.c_hat[k];
            let d_f = dc * prev_c[k];
            let d_chat = dc * sc.i[k];
            da_i[k] = d_i * sigmoid_prime(sc.i[k]);
            da_f[k] = d_f * sigmoid_prime(sc.f[k]);
            da_o[k] = d_o * sigmoid_prime(sc.o[k]);
            da_c[k] = d_chat * tanh_prime(sc.c_hat[k]);
            dc_prev[k] = dc * sc.f[k];
        }

        let mut hx = Vec::with_capacity(hidden + input);
        hx.extend_from_slice(prev_h);
        hx.extend_from_slice(&sc.x);

        grads.w_i.add_outer(&da_i, &hx);
        grads.w_f.add_outer(&da_f, &hx);
        grads.w_o.add_outer(&da_o, &hx);
        grads.w_c.add_outer(&da_c, &hx);
        for k in 0..hidden {
            grads.b_i[k] += da_i[k];
            grads.b_f[k] += da_f[k];
            grads.b_o[k] += da_o[k];
            grads.b_c[k] += da_c[k];
        }

        let mut dhx = params.w_i.matvec_transposed(&da_i);
        for (acc, v) in dhx.iter_mut().zip(params.w_f.matvec_transposed(&da_f)) {
            *acc += v;
        }
        for (acc, v) in dhx.iter_mut().zip(params.w_o.matvec_transposed(&da_o)) {
            *acc += v;
        }
        for (acc, v) in dhx.iter_mut().zip(params.w_c.matvec_transposed(&da_c)) {
            *acc += v;
        }

        dx[t].copy_from_slice(&dhx[hidden..]);

        if t % truncated_len == 0 {
            // Segment boundary: stop gradient flow into the previous segment.
            dh_carry.iter_mut().for_each(|v| *v = 0.0);
            dc_carry.iter_mut().for_each(|v| *v = 0.0);
        } else {
            dh_carry.copy_from_slice(&dhx[..hidden]);
            dc_carry = dc_prev;
        }
    }

    Ok((grads, dx))
}

/// Parameters of the plain recurrent cell (comparison baseline only):
/// `h = tanh(Ux + Wh_prev + b_h)`, `y = Vh + b_y`.
#[derive(Debug, Clone)]
pub struct RnnParams {
    pub u: Matrix2D,
    pub w: Matrix2D,
    pub b_h: Vector1D,
    pub v: Matrix2D,
    pub b_y: Vector1D,
}

/// One step of the plain recurrent cell.
pub fn rnn_cell_forward(
    params: &RnnParams,
    x: &[f64],
    h_prev: &[f64],
) -> Result<(Vector1D, Vector1D), NnError> {
    if params.u.cols() != x.len() || params.w.cols() != h_prev.len() {
        return Err(NnError::Shape(format!(
            "rnn input/state lengths {}/{} do not match U cols {} / W cols {}",
            x.len(),
            h_prev.len(),
            params.u.cols(),
            params.w.cols()
        )));
    }
    let ux = params.u.matvec(x);
    let wh = params.w.matvec(h_prev);
    let h: Vector1D = ux
        .iter()
        .zip(&wh)
        .zip(&params.b_h)
        .map(|((a, b), c)| tanh_act(a + b + c))
        .collect();
    let mut y = params.v.matvec(&h);
    for (yv, bv) in y.iter_mut().zip(&params.b_y) {
        *yv += bv;
    }
    Ok((h, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix2D;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn zero_params_halve_everything() {
        let params = LstmParams::zeros(2, 3);
        let prev = LstmState { h: vec![0.1, -0.2, 0.3], c: vec![0.4, 0.5, -0.6] };
        let (state, cache) = lstm_cell_forward(&params, &[1.0, -1.0], &prev).unwrap();
        for k in 0..3 {
            assert_eq!(cache.i[k], 0.5);
            assert_eq!(cache.f[k], 0.5);
            assert_eq!(cache.o[k], 0.5);
            assert_eq!(cache.c_hat[k], 0.0);
            assert!((state.c[k] - 0.5 * prev.c[k]).abs() < 1e-15);
            assert!((state.h[k] - 0.5 * (0.5 * prev.c[k]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_everything_gives_zero_hidden() {
        let params = LstmParams::zeros(2, 3);
        let prev = LstmState::zeros(3);
        let (state, _) = lstm_cell_forward(&params, &[0.0, 0.0], &prev).unwrap();
        assert_eq!(state.h, vec![0.0; 3]);
        assert_eq!(state.c, vec![0.0; 3]);
    }

    #[test]
    fn scalar_cell_matches_hand_computation() {
        // 1-unit cell, input size 1. Weights laid out as [w_h, w_x].
        let mut params = LstmParams::zeros(1, 1);
        params.w_i = Matrix2D::from_vec(1, 2, vec![0.3, 0.5]);
        params.w_f = Matrix2D::from_vec(1, 2, vec![-0.2, 0.4]);
        params.w_o = Matrix2D::from_vec(1, 2, vec![0.1, -0.3]);
        params.w_c = Matrix2D::from_vec(1, 2, vec![0.7, 0.2]);
        params.b_i[0] = 0.05;
        params.b_f[0] = -0.1;
        params.b_o[0] = 0.2;
        params.b_c[0] = 0.0;
        let h_prev = 0.3;
        let c_prev = -0.4;
        let x = 0.8;

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = sig(0.3 * h_prev + 0.5 * x + 0.05);
        let f = sig(-0.2 * h_prev + 0.4 * x - 0.1);
        let o = sig(0.1 * h_prev - 0.3 * x + 0.2);
        let c_hat = (0.7 * h_prev + 0.2 * x).tanh();
        let c = f * c_prev + i * c_hat;
        let h = o * c.tanh();

        let prev = LstmState { h: vec![h_prev], c: vec![c_prev] };
        let (state, _) = lstm_cell_forward(&params, &[x], &prev).unwrap();
        assert!((state.c[0] - c).abs() < 1e-15);
        assert!((state.h[0] - h).abs() < 1e-15);
    }

    #[test]
    fn cell_shape_errors() {
        let params = LstmParams::zeros(2, 3);
        let prev = LstmState::zeros(3);
        assert!(lstm_cell_forward(&params, &[1.0], &prev).is_err());
        let bad_prev = LstmState::zeros(2);
        assert!(lstm_cell_forward(&params, &[1.0, 2.0], &bad_prev).is_err());
    }

    #[test]
    fn sequence_of_one_equals_single_cell() {
        let params = LstmParams::xavier(2, 3, 42);
        let init = LstmState::zeros(3);
        let x = vec![0.5, -0.25];
        let (hs, cache) = lstm_sequence_forward(&params, &[x.clone()], &init).unwrap();
        let (state, _) = lstm_cell_forward(&params, &x, &init).unwrap();
        assert_eq!(hs.len(), 1);
        assert_eq!(cache.len(), 1);
        assert_eq!(hs[0], state.h);
    }

    #[test]
    fn empty_sequence_is_error() {
        let params = LstmParams::zeros(1, 1);
        assert!(lstm_sequence_forward(&params, &[], &LstmState::zeros(1)).is_err());
    }

    #[test]
    fn repeated_input_converges_on_contractive_cell() {
        // Small weights make the map contractive; successive hidden deltas shrink.
        let params = LstmParams::xavier(1, 4, 9);
        let inputs: Vec<Vector1D> = (0..12).map(|_| vec![0.4]).collect();
        let (hs, _) = lstm_sequence_forward(&params, &inputs, &LstmState::zeros(4)).unwrap();
        let mut deltas = Vec::new();
        for t in 1..hs.len() {
            let d: Vec<f64> = hs[t].iter().zip(&hs[t - 1]).map(|(a, b)| a - b).collect();
            deltas.push(norm(&d));
        }
        for t in 1..deltas.len() {
            assert!(
                deltas[t] <= deltas[t - 1] + 1e-12,
                "hidden deltas should shrink: {:?}",
                deltas
            );
        }
    }

    #[test]
    fn memory_carry_under_gate_saturation() {
        // Forget gate saturated to 1, input gate to 0: cell state carries.
        let mut params = LstmParams::xavier(1, 3, 5);
        for k in 0..3 {
            params.b_f[k] = 60.0;
            params.b_i[k] = -60.0;
        }
        let init = LstmState { h: vec![0.0; 3], c: vec![0.7, -0.3, 0.1] };
        let inputs: Vec<Vector1D> = (0..6).map(|t| vec![(t as f64).sin()]).collect();
        let (_, cache) = lstm_sequence_forward(&params, &inputs, &init).unwrap();
        for step in &cache.steps {
            for k in 0..3 {
                assert!((step.c[k] - init.c[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let params = LstmParams::xavier(3, 4, 77);
        let inputs: Vec<Vector1D> =
            (0..5).map(|t| vec![t as f64 * 0.1, -0.2, 0.05 * t as f64]).collect();
        let init = LstmState::zeros(4);
        let (h1, _) = lstm_sequence_forward(&params, &inputs, &init).unwrap();
        let (h2, _) = lstm_sequence_forward(&params, &inputs, &init).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let params = LstmParams::xavier(2, 3, 1);
        let inputs: Vec<Vector1D> = (0..4).map(|t| vec![0.1 * t as f64, -0.3]).collect();
        let (_, cache) = lstm_sequence_forward(&params, &inputs, &LstmState::zeros(3)).unwrap();
        let dh = vec![vec![0.0; 3]; 4];
        let (grads, dx) = lstm_sequence_backward(&params, &cache, &dh).unwrap();
        for t in grads.tensors() {
            assert!(t.iter().all(|v| *v == 0.0));
        }
        for d in dx {
            assert!(d.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn backward_length_mismatch_is_error() {
        let params = LstmParams::xavier(2, 3, 1);
        let inputs: Vec<Vector1D> = (0..4).map(|_| vec![0.1, 0.2]).collect();
        let (_, cache) = lstm_sequence_forward(&params, &inputs, &LstmState::zeros(3)).unwrap();
        let dh = vec![vec![0.0; 3]; 3];
        assert!(lstm_sequence_backward(&params, &cache, &dh).is_err());
    }

    /// Central finite differences over every parameter of a tiny instance.
    /// Loss is sum(dh[t] . h[t]) so dL/dh[t] = dh[t] exactly.
    #[test]
    fn bptt_matches_finite_differences() {
        let input = 3;
        let hidden = 3;
        let steps = 2;
        let params = LstmParams::xavier(input, hidden, 1234);
        let inputs: Vec<Vector1D> = (0..steps)
            .map(|t| (0..input).map(|k| ((t * input + k) as f64 * 0.7).sin() * 0.8).collect())
            .collect();
        let dh: Vec<Vector1D> = (0..steps)
            .map(|t| (0..hidden).map(|k| ((t + k) as f64 * 0.3).cos()).collect())
            .collect();
        let init = LstmState::zeros(hidden);

        let loss = |p: &LstmParams| -> f64 {
            let (hs, _) = lstm_sequence_forward(p, &inputs, &init).unwrap();
            hs.iter()
                .zip(&dh)
                .map(|(h, d)| h.iter().zip(d).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        };

        let (_, cache) = lstm_sequence_forward(&params, &inputs, &init).unwrap();
        let (grads, _) = lstm_sequence_backward(&params, &cache, &dh).unwrap();

        let h_step = 1e-5;
        let mut max_rel = 0.0_f64;
        for tensor_idx in 0..8 {
            let len = params.tensors()[tensor_idx].len();
            for j in 0..len {
                let mut plus = params.clone();
                plus.tensors_mut()[tensor_idx][j] += h_step;
                let mut minus = params.clone();
                minus.tensors_mut()[tensor_idx][j] -= h_step;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h_step);
                let analytic = grads.tensors()[tensor_idx][j];
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                max_rel = max_rel.max((numeric - analytic).abs() / denom);
            }
        }
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn rnn_zero_params() {
        let params = RnnParams {
            u: Matrix2D::zeros(2, 1),
            w: Matrix2D::zeros(2, 2),
            b_h: vec![0.0; 2],
            v: Matrix2D::zeros(1, 2),
            b_y: vec![0.0],
        };
        let (h, y) = rnn_cell_forward(&params, &[0.7], &[0.0, 0.0]).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
        assert_eq!(y, vec![0.0]);
    }

    #[test]
    fn rnn_scalar_oracle() {
        let params = RnnParams {
            u: Matrix2D::from_vec(1, 1, vec![1.0]),
            w: Matrix2D::from_vec(1, 1, vec![0.0]),
            b_h: vec![0.0],
            v: Matrix2D::from_vec(1, 1, vec![1.0]),
            b_y: vec![0.0],
        };
        let (h, y) = rnn_cell_forward(&params, &[0.5], &[0.9]).unwrap();
        assert!((h[0] - 0.5_f64.tanh()).abs() < 1e-15);
        assert!((y[0] - 0.5_f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn rnn_shares_params_across_steps() {
        let params = RnnParams {
            u: Matrix2D::from_vec(1, 1, vec![0.5]),
            w: Matrix2D::from_vec(1, 1, vec![0.25]),
            b_h: vec![0.1],
            v: Matrix2D::from_vec(1, 1, vec![2.0]),
            b_y: vec![0.0],
        };
        let (h1, _) = rnn_cell_forward(&params, &[1.0], &[0.0]).unwrap();
        let (h2, _) = rnn_cell_forward(&params, &[0.3], &h1).unwrap();
        // Same params object drives both steps; just confirm the recursion ran.
        assert!((h2[0] - (0.5 * 0.3 + 0.25 * h1[0] + 0.1).tanh()).abs() < 1e-15);
    }
}
