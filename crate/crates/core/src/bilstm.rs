//! The prediction network: a forward LSTM and a backward LSTM over the
//! history window, per-step fusion of the two hidden sequences, a fully
//! connected ReLU layer over the flattened features, and a bias-free linear
//! regression head.
//!
//! The backward direction reads the same history window in reverse; it never
//! sees ground-truth future values. With `bidirectional: false` the same
//! struct degrades to the unidirectional LSTM baseline sharing every other
//! piece of machinery.

use crate::ingest::Scaler;
use crate::lstm::{
    lstm_sequence_backward_truncated, lstm_sequence_forward, LstmCache, LstmGrads, LstmParams,
    LstmState,
};
use crate::nn::{mix_seed, relu, relu_prime, xavier_init, Matrix2D, NnError, Vector1D};

/// How the two directions' per-step hidden states are fused.
///
/// Concatenation is the default; elementwise sum is kept for ablation. The
/// fusion weights are fixed scalars, not learnable: unit weights are absorbed
/// by the FC layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fusion {
    Concat,
    Sum,
}

/// Network dimensions and fusion settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub input_size: usize,
    pub hidden_size: usize,
    pub fc_size: usize,
    pub output_size: usize,
    /// History window length `W_in`.
    pub window: usize,
    pub bidirectional: bool,
    pub fusion: Fusion,
    pub lambda_fwd: f64,
    pub lambda_bwd: f64,
}

impl NetConfig {
    pub fn bidirectional(
        input_size: usize,
        hidden_size: usize,
        fc_size: usize,
        output_size: usize,
        window: usize,
    ) -> Self {
        NetConfig {
            input_size,
            hidden_size,
            fc_size,
            output_size,
            window,
            bidirectional: true,
            fusion: Fusion::Concat,
            lambda_fwd: 1.0,
            lambda_bwd: 1.0,
        }
    }

    pub fn unidirectional(
        input_size: usize,
        hidden_size: usize,
        fc_size: usize,
        output_size: usize,
        window: usize,
    ) -> Self {
        NetConfig {
            input_size,
            hidden_size,
            fc_size,
            output_size,
            window,
            bidirectional: false,
            fusion: Fusion::Concat,
            lambda_fwd: 1.0,
            lambda_bwd: 1.0,
        }
    }

    /// Fused feature width per time step.
    pub fn feature_size(&self) -> usize {
        if self.bidirectional && self.fusion == Fusion::Concat {
            2 * self.hidden_size
        } else {
            self.hidden_size
        }
    }

    /// Flattened FC input width: all window steps stacked.
    pub fn fc_input_size(&self) -> usize {
        self.window * self.feature_size()
    }

    pub fn validate(&self) -> Result<(), NnError> {
        for (name, v) in [
            ("input_size", self.input_size),
            ("hidden_size", self.hidden_size),
            ("fc_size", self.fc_size),
            ("output_size", self.output_size),
            ("window", self.window),
        ] {
            if v == 0 {
                return Err(NnError::Shape(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// The full prediction network.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub cfg: NetConfig,
    pub fwd: LstmParams,
    pub bwd: Option<LstmParams>,
    pub w_fc: Matrix2D,
    pub b_fc: Vector1D,
    pub w_r: Matrix2D,
}

/// Activations retained from one forward pass, enough for an exact backward
/// pass. Belongs to exactly one example; never shared.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub fwd_cache: LstmCache,
    /// Cache of the backward direction in its own step order (input reversed).
    pub bwd_cache: Option<LstmCache>,
    /// Flattened fused features, step-major.
    pub features: Vector1D,
    pub fc_pre: Vector1D,
    pub fc_out: Vector1D,
    /// Per-unit scale factors applied after ReLU (inverted dropout), if any.
    pub dropout_scales: Option<Vector1D>,
    /// Standardized prediction.
    pub y: Vector1D,
}

/// Gradients for every learnable parameter group. The fusion weights are
/// fixed, so they have no slot here.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub fwd: LstmGrads,
    pub bwd: Option<LstmGrads>,
    pub w_fc: Matrix2D,
    pub b_fc: Vector1D,
    pub w_r: Matrix2D,
}

impl ModelGrads {
    pub fn zeros_like(model: &BiLstm) -> Self {
        ModelGrads {
            fwd: LstmGrads::zeros_like(&model.fwd),
            bwd: model.bwd.as_ref().map(LstmGrads::zeros_like),
            w_fc: Matrix2D::zeros(model.w_fc.rows(), model.w_fc.cols()),
            b_fc: vec![0.0; model.b_fc.len()],
            w_r: Matrix2D::zeros(model.w_r.rows(), model.w_r.cols()),
        }
    }

    /// Gradient tensors in the model's declared parameter order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.fwd.tensors().to_vec();
        if let Some(b) = &self.bwd {
            out.extend(b.tensors());
        }
        out.push(self.w_fc.as_slice());
        out.push(&self.b_fc);
        out.push(self.w_r.as_slice());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.fwd.tensors_mut().into_iter().collect();
        if let Some(b) = &mut self.bwd {
            out.extend(b.tensors_mut());
        }
        out.push(self.w_fc.as_mut_slice());
        out.push(&mut self.b_fc);
        out.push(self.w_r.as_mut_slice());
        out
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= factor;
            }
        }
    }
}

impl BiLstm {
    /// Builds a network with Xavier-initialized weights, deterministic per seed.
    pub fn new(cfg: NetConfig, seed: u64) -> Result<Self, NnError> {
        cfg.validate()?;
        let fwd = LstmParams::xavier(cfg.input_size, cfg.hidden_size, mix_seed(seed, 101));
        let bwd = cfg
            .bidirectional
            .then(|| LstmParams::xavier(cfg.input_size, cfg.hidden_size, mix_seed(seed, 202)));
        let w_fc = xavier_init(cfg.fc_size, cfg.fc_input_size(), mix_seed(seed, 303));
        let w_r = xavier_init(cfg.output_size, cfg.fc_size, mix_seed(seed, 404));
        Ok(BiLstm { cfg, fwd, bwd, w_fc, b_fc: vec![0.0; cfg.fc_size], w_r })
    }

    /// Parameter tensors in declared order: forward LSTM, backward LSTM (if
    /// present), FC weights, FC bias, regression weights. Persistence and the
    /// optimizer both rely on this order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.fwd.tensors().to_vec();
        if let Some(b) = &self.bwd {
            out.extend(b.tensors());
        }
        out.push(self.w_fc.as_slice());
        out.push(&self.b_fc);
        out.push(self.w_r.as_slice());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.fwd.tensors_mut().into_iter().collect();
        if let Some(b) = &mut self.bwd {
            out.extend(b.tensors_mut());
        }
        out.push(self.w_fc.as_mut_slice());
        out.push(&mut self.b_fc);
        out.push(self.w_r.as_mut_slice());
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn check_inputs(&self, inputs: &[Vector1D]) -> Result<(), NnError> {
        if inputs.len() != self.cfg.window {
            return Err(NnError::Shape(format!(
                "window length {} does not match configured W_in {}",
                inputs.len(),
                self.cfg.window
            )));
        }
        for x in inputs {
            if x.len() != self.cfg.input_size {
                return Err(NnError::Shape(format!(
                    "step input length {} does not match input size {}",
                    x.len(),
                    self.cfg.input_size
                )));
            }
        }
        Ok(())
    }

    /// Runs both directions over the window and fuses the hidden sequences.
    /// Returns the flattened step-major features and both caches.
    pub fn encode(
        &self,
        inputs: &[Vector1D],
    ) -> Result<(Vector1D, LstmCache, Option<LstmCache>), NnError> {
        self.check_inputs(inputs)?;
        let hidden = self.cfg.hidden_size;
        let window = self.cfg.window;
        let init = LstmState::zeros(hidden);

        let (fwd_hs, fwd_cache) = lstm_sequence_forward(&self.fwd, inputs, &init)?;

        let (bwd_hs, bwd_cache) = match &self.bwd {
            Some(bwd) => {
                let reversed: Vec<Vector1D> = inputs.iter().rev().cloned().collect();
                let (hs, cache) = lstm_sequence_forward(bwd, &reversed, &init)?;
                (Some(hs), Some(cache))
            }
            None => (None, None),
        };

        let mut features = Vec::with_capacity(self.cfg.fc_input_size());
        for t in 0..window {
            match (&bwd_hs, self.cfg.fusion) {
                (Some(bh), Fusion::Concat) => {
                    features.extend(fwd_hs[t].iter().map(|v| self.cfg.lambda_fwd * v));
                    // Backward step s covers original time window-1-s.
                    features.extend(bh[window - 1 - t].iter().map(|v| self.cfg.lambda_bwd * v));
                }
                (Some(bh), Fusion::Sum) => {
                    features.extend(
                        fwd_hs[t]
                            .iter()
                            .zip(&bh[window - 1 - t])
                            .map(|(f, b)| self.cfg.lambda_fwd * f + self.cfg.lambda_bwd * b),
                    );
                }
                (None, _) => features.extend_from_slice(&fwd_hs[t]),
            }
        }
        Ok((features, fwd_cache, bwd_cache))
    }

    /// FC layer: `o = relu(W_F * features + b_F)`.
    pub fn fc_forward(&self, features: &[f64]) -> Result<(Vector1D, Vector1D), NnError> {
        if features.len() != self.cfg.fc_input_size() {
            return Err(NnError::Shape(format!(
                "feature length {} does not match FC input size {}",
                features.len(),
                self.cfg.fc_input_size()
            )));
        }
        let mut pre = self.w_fc.matvec(features);
        for (p, b) in pre.iter_mut().zip(&self.b_fc) {
            *p += b;
        }
        let out = pre.iter().copied().map(relu).collect();
        Ok((pre, out))
    }

    /// Regression head: `y = W_R * o`, no bias, no activation.
    pub fn regress(&self, fc_out: &[f64]) -> Result<Vector1D, NnError> {
        if fc_out.len() != self.cfg.fc_size {
            return Err(NnError::Shape(format!(
                "FC output length {} does not match fc size {}",
                fc_out.len(),
                self.cfg.fc_size
            )));
        }
        Ok(self.w_r.matvec(fc_out))
    }

    /// Complete forward pass. `dropout_scales`, when given, is applied to the
    /// FC output elementwise (training mode); prediction passes `None`.
    pub fn forward(
        &self,
        inputs: &[Vector1D],
        dropout_scales: Option<&[f64]>,
    ) -> Result<ForwardPass, NnError> {
        let (features, fwd_cache, bwd_cache) = self.encode(inputs)?;
        let (fc_pre, mut fc_out) = self.fc_forward(&features)?;
        if let Some(scales) = dropout_scales {
            if scales.len() != fc_out.len() {
                return Err(NnError::Shape("dropout mask length mismatch".into()));
            }
            for (o, s) in fc_out.iter_mut().zip(scales) {
                *o *= s;
            }
        }
        let y = self.regress(&fc_out)?;
        Ok(ForwardPass {
            fwd_cache,
            bwd_cache,
            features,
            fc_pre,
            fc_out,
            dropout_scales: dropout_scales.map(|s| s.to_vec()),
            y,
        })
    }

    /// Convenience for scalar-per-step series (the host-load case).
    pub fn forward_window(
        &self,
        window: &[f64],
        dropout_scales: Option<&[f64]>,
    ) -> Result<ForwardPass, NnError> {
        if self.cfg.input_size != 1 {
            return Err(NnError::Shape(
                "forward_window requires input_size 1; use forward() for vector inputs".into(),
            ));
        }
        let inputs: Vec<Vector1D> = window.iter().map(|v| vec![*v]).collect();
        self.forward(&inputs, dropout_scales)
    }

    /// Exact analytic gradients for every parameter group, flowing through
    /// the regression head, ReLU, fusion, and both LSTM directions. The
    /// backward direction's BPTT runs in its own time order. `truncated_len`
    /// cuts recurrent gradient flow; pass `window` or more for full BPTT.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        d_y: &[f64],
        truncated_len: usize,
    ) -> Result<ModelGrads, NnError> {
        if d_y.len() != self.cfg.output_size {
            return Err(NnError::Shape(format!(
                "upstream gradient length {} does not match output size {}",
                d_y.len(),
                self.cfg.output_size
            )));
        }
        if pass.fwd_cache.len() != self.cfg.window
            || pass.features.len() != self.cfg.fc_input_size()
            || pass.bwd_cache.is_some() != self.bwd.is_some()
        {
            return Err(NnError::Shape("forward cache does not match this model".into()));
        }
        let hidden = self.cfg.hidden_size;
        let window = self.cfg.window;
        let feat = self.cfg.feature_size();

        let mut grads = ModelGrads::zeros_like(self);

        // Regression head.
        grads.w_r.add_outer(d_y, &pass.fc_out);
        let mut d_fc_out = self.w_r.matvec_transposed(d_y);

        // Dropout scales are constants of the pass.
        if let Some(scales) = &pass.dropout_scales {
            for (d, s) in d_fc_out.iter_mut().zip(scales) {
                *d *= s;
            }
        }

        // ReLU.
        let d_fc_pre: Vector1D = d_fc_out
            .iter()
            .zip(&pass.fc_pre)
            .map(|(d, pre)| d * relu_prime(*pre))
            .collect();

        grads.w_fc.add_outer(&d_fc_pre, &pass.features);
        for (g, d) in grads.b_fc.iter_mut().zip(&d_fc_pre) {
            *g += d;
        }
        let d_features = self.w_fc.matvec_transposed(&d_fc_pre);

        // Split flattened feature gradients into per-step, per-direction dh.
        let mut dh_fwd = vec![vec![0.0; hidden]; window];
        let mut dh_bwd_orig = vec![vec![0.0; hidden]; window];
        for t in 0..window {
            let step = &d_features[t * feat..(t + 1) * feat];
            match (self.bwd.is_some(), self.cfg.fusion) {
                (true, Fusion::Concat) => {
                    for k in 0..hidden {
                        dh_fwd[t][k] = self.cfg.lambda_fwd * step[k];
                        dh_bwd_orig[t][k] = self.cfg.lambda_bwd * step[hidden + k];
                    }
                }
                (true, Fusion::Sum) => {
                    for k in 0..hidden {
                        dh_fwd[t][k] = self.cfg.lambda_fwd * step[k];
                        dh_bwd_orig[t][k] = self.cfg.lambda_bwd * step[k];
                    }
                }
                (false, _) => dh_fwd[t].copy_from_slice(step),
            }
        }

        let (fwd_grads, _) = lstm_sequence_backward_truncated(
            &self.fwd,
            &pass.fwd_cache,
            &dh_fwd,
            truncated_len,
        )?;
        grads.fwd = fwd_grads;

        if let (Some(bwd), Some(bwd_cache)) = (&self.bwd, &pass.bwd_cache) {
            // Reorder upstream gradients into the backward direction's own time order.
            let dh_bwd: Vec<Vector1D> =
                (0..window).map(|s| dh_bwd_orig[window - 1 - s].clone()).collect();
            let (bwd_grads, _) =
                lstm_sequence_backward_truncated(bwd, bwd_cache, &dh_bwd, truncated_len)?;
            grads.bwd = Some(bwd_grads);
        }

        Ok(grads)
    }

    /// Forward, FC, regression, then inverse z-score with the training-split
    /// scaler. Output is in original load units, clamped at zero: loads are
    /// non-negative physical quantities.
    pub fn predict(&self, window: &[f64], scaler: &Scaler) -> Result<Vector1D, NnError> {
        let pass = self.forward_window(window, None)?;
        Ok(pass.y.iter().map(|z| scaler.inverse(*z).max(0.0)).collect())
    }
}
