//! Forward composition of the five modules plus the classifier, and the
//! matching backward pass that deposits gradients on the named parameters.

use std::collections::BTreeMap;

use agtc_tensor::{
    kernels, multi_head_attention, positional_encoding, MhaVars, Mode, Padding, RngStream, Tape,
    Tensor, TensorError, Var,
};

use crate::state::{ModelState, BN_EPS};
use crate::ModelError;

/// Normalized edge-attention coefficients per head, captured before the
/// attention dropout: shape (B, C, C, T'), rows over the second C axis sum
/// to one across each node's masked neighborhood.
#[derive(Clone, Debug)]
pub struct EdgeAttention {
    pub per_head: Vec<Tensor>,
}

/// One recorded forward pass. The tape stays alive so a backward sweep can
/// follow; `stage_shapes` documents every stage output for shape audits.
pub struct ForwardPass {
    pub tape: Tape,
    pub logits: Var,
    pub probs: Tensor,
    pub attention: EdgeAttention,
    pub stage_shapes: Vec<(&'static str, Vec<usize>)>,
    /// Values of the CTC and GCAT stage outputs, kept for graph-level audits
    /// (message-passing locality, the residual-concat identity).
    pub stage_values: Vec<(&'static str, Tensor)>,
    pub(crate) param_vars: Vec<(usize, Var)>,
    pub(crate) bn_updates: Vec<(usize, Tensor, Tensor)>,
}

impl ForwardPass {
    pub fn stage_value(&self, name: &str) -> Option<&Tensor> {
        self.stage_values.iter().find(|(n, _)| *n == name).map(|(_, t)| t)
    }

    pub fn stage_shape(&self, name: &str) -> Option<&[usize]> {
        self.stage_shapes.iter().find(|(n, _)| *n == name).map(|(_, s)| s.as_slice())
    }
}

struct Fwd<'m> {
    model: &'m ModelState,
    tape: Tape,
    mode: Mode,
    param_vars: Vec<(usize, Var)>,
    registered: BTreeMap<usize, Var>,
    bn_updates: Vec<(usize, Tensor, Tensor)>,
}

fn stage(name: &'static str) -> impl FnOnce(TensorError) -> ModelError {
    move |source| ModelError::Stage { stage: name, source }
}

impl<'m> Fwd<'m> {
    fn p(&mut self, name: &str) -> Var {
        let idx = self.model.param_idx(name);
        if let Some(&v) = self.registered.get(&idx) {
            return v;
        }
        let requires = self.mode == Mode::Train;
        let v = self.tape.leaf(self.model.params()[idx].value.clone(), requires);
        self.registered.insert(idx, v);
        self.param_vars.push((idx, v));
        v
    }

    fn bn(&mut self, x: Var, site: &str) -> Var {
        let gamma = self.p(&format!("{site}.gamma"));
        let beta = self.p(&format!("{site}.beta"));
        match self.mode {
            Mode::Train => {
                let (y, mean, var) = self.tape.batch_norm_train(x, gamma, beta, BN_EPS);
                self.bn_updates.push((self.model.bn_idx(site), mean, var));
                y
            }
            Mode::Infer => {
                let st = self.model.bn_state(site).expect("bn site exists");
                self.tape.batch_norm_infer(x, gamma, beta, &st.running_mean, &st.running_var, BN_EPS)
            }
        }
    }

    fn sep_conv(&mut self, x: Var, prefix: &str, pad: Padding) -> Result<Var, TensorError> {
        let dw = self.p(&format!("{prefix}.depthwise"));
        let pw = self.p(&format!("{prefix}.pointwise"));
        self.tape.separable_conv2d(x, dw, pw, (1, 1), pad)
    }

    /// Separable conv -> BN -> SELU, the recurring GCAT building block.
    fn conv_bn_selu(&mut self, x: Var, prefix: &str) -> Result<Var, TensorError> {
        let conv = self.sep_conv(x, prefix, Padding::Same)?;
        let normed = self.bn(conv, &format!("{prefix}.bn"));
        Ok(self.tape.selu(normed))
    }
}

impl ModelState {
    /// Record one forward pass. In training mode this also folds the batch
    /// statistics into the BN running estimates.
    pub fn forward(
        &mut self,
        batch: &Tensor,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<ForwardPass, ModelError> {
        let pass = self.run_forward(batch, mode, rng)?;
        if mode == Mode::Train {
            for (idx, mean, var) in &pass.bn_updates {
                self.bn_state_mut_idx(*idx).update(mean, var);
            }
        }
        Ok(pass)
    }

    /// Deterministic inference on a frozen model; safe to share across
    /// threads since nothing mutates.
    pub fn infer(&self, batch: &Tensor) -> Result<Tensor, ModelError> {
        let mut rng = RngStream::new(0);
        Ok(self.run_forward(batch, Mode::Infer, &mut rng)?.probs)
    }

    /// Like [`ModelState::infer`] but keeps the attention maps.
    pub fn infer_with_attention(&self, batch: &Tensor) -> Result<(Tensor, EdgeAttention), ModelError> {
        let mut rng = RngStream::new(0);
        let pass = self.run_forward(batch, Mode::Infer, &mut rng)?;
        Ok((pass.probs, pass.attention))
    }

    fn run_forward(
        &self,
        batch: &Tensor,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<ForwardPass, ModelError> {
        let cfg = &self.config;
        if batch.rank() != 4
            || batch.shape()[1] != cfg.num_channels
            || batch.shape()[2] != cfg.num_samples
            || batch.shape()[3] != 1
        {
            return Err(ModelError::BadInput {
                expected: vec![0, cfg.num_channels, cfg.num_samples, 1],
                found: batch.shape().to_vec(),
            });
        }

        let mut f = Fwd {
            model: self,
            tape: Tape::new(),
            mode,
            param_vars: Vec::new(),
            registered: BTreeMap::new(),
            bn_updates: Vec::new(),
        };
        let mut shapes: Vec<(&'static str, Vec<usize>)> = Vec::new();
        let record = |name: &'static str, tape: &Tape, v: Var, shapes: &mut Vec<(&'static str, Vec<usize>)>| {
            shapes.push((name, tape.value(v).shape().to_vec()));
        };

        let x = f.tape.leaf(batch.clone(), false);

        // --- channel-wise temporal convolution ---
        let kernel = f.p("ctc.conv.kernel");
        let conv = f.tape.conv2d(x, kernel, (1, 1), Padding::Valid).map_err(stage("ctc"))?;
        record("ctc.conv", &f.tape, conv, &mut shapes);
        let normed = f.bn(conv, "ctc.bn");
        let ctc_out = f
            .tape
            .avg_pool(normed, (1, cfg.ctc_pool), (1, cfg.ctc_pool_stride))
            .map_err(stage("ctc"))?;
        record("ctc", &f.tape, ctc_out, &mut shapes);
        let mut stage_values = vec![("ctc", f.tape.value(ctc_out).clone())];

        // --- graph convolutional attention ---
        let (gcat_out, attention) =
            self.gcat_stage(&mut f, ctc_out, rng).map_err(stage("gcat"))?;
        record("gcat", &f.tape, gcat_out, &mut shapes);
        stage_values.push(("gcat", f.tape.value(gcat_out).clone()));

        // --- global convolutional adaptive pooling ---
        let gcap_kernel = f.p("gcap.depthwise");
        let pooled = f
            .tape
            .depthwise_conv2d(gcat_out, gcap_kernel, (1, 1), Padding::Valid)
            .map_err(stage("gcap"))?;
        let pooled = f.bn(pooled, "gcap.bn");
        let gcap_out = f.tape.selu(pooled);
        record("gcap", &f.tape, gcap_out, &mut shapes);

        // --- global temporal convolution ---
        let p = (1, cfg.gtc_pool);
        let pool1 = f.tape.avg_pool(gcap_out, p, p).map_err(stage("gtc"))?;
        let pool1 = f.tape.dropout(pool1, cfg.gtc_dropout, mode, rng).map_err(stage("gtc"))?;
        let conv = f.sep_conv(pool1, "gtc.conv", Padding::Same).map_err(stage("gtc"))?;
        let conv = f.bn(conv, "gtc.bn");
        let conv = f.tape.selu(conv);
        record("gtc.conv", &f.tape, conv, &mut shapes);
        let pool2 = f.tape.avg_pool(conv, p, p).map_err(stage("gtc"))?;
        let gtc_out = f.tape.dropout(pool2, cfg.gtc_dropout, mode, rng).map_err(stage("gtc"))?;
        record("gtc", &f.tape, gtc_out, &mut shapes);

        // --- temporal context enhancement ---
        let tce_out = self.tce_stage(&mut f, gtc_out, rng).map_err(stage("tce"))?;
        record("tce", &f.tape, tce_out, &mut shapes);

        // --- classifier ---
        let b = batch.shape()[0];
        let flat_dim = tce_out_features(&f.tape, tce_out);
        let flat = f.tape.reshape(tce_out, &[b, flat_dim]).map_err(stage("classifier"))?;
        let w = f.p("classifier.weight");
        let bias = f.p("classifier.bias");
        let logits = f.tape.linear(flat, w, Some(bias)).map_err(stage("classifier"))?;
        record("logits", &f.tape, logits, &mut shapes);

        let probs = kernels::softmax_forward(f.tape.value(logits), 1, None)
            .map_err(stage("classifier"))?;

        Ok(ForwardPass {
            tape: f.tape,
            logits,
            probs,
            attention,
            stage_shapes: shapes,
            stage_values,
            param_vars: f.param_vars,
            bn_updates: f.bn_updates,
        })
    }

    /// Attentive message passing over the channel graph, one head at a time,
    /// head-averaged, biased, activated, normalized, dropped out, and
    /// finally concatenated with the input features (the 0-hop residual).
    fn gcat_stage(
        &self,
        f: &mut Fwd,
        x: Var,
        rng: &mut RngStream,
    ) -> Result<(Var, EdgeAttention), TensorError> {
        let cfg = &self.config;
        let c = cfg.num_channels;

        // adjacency-plus-self-loop mask, broadcast over batch and time
        let mut mask = Tensor::zeros(&[1, c, c, 1]);
        for i in 0..c {
            for j in 0..c {
                if i == j || self.adjacency.has_edge(i, j) {
                    mask.set(&[0, i, j, 0], 1.0);
                }
            }
        }

        let mut head_outputs = Vec::with_capacity(cfg.gcat_heads);
        let mut attention = Vec::with_capacity(cfg.gcat_heads);
        for h in 0..cfg.gcat_heads {
            let prefix = format!("gcat.head{h}");
            let z = f.conv_bn_selu(x, &format!("{prefix}.weight"))?;
            let src = f.conv_bn_selu(z, &format!("{prefix}.src"))?;
            let dst = f.conv_bn_selu(z, &format!("{prefix}.dst"))?;
            let edges = f.tape.pairwise_add(src, dst)?;
            let alpha_param = f.p(&format!("{prefix}.attn.alpha"));
            let scored = f.tape.prelu(edges, alpha_param)?;
            let alpha = f.tape.masked_softmax(scored, 2, &mask)?;
            attention.push(f.tape.value(alpha).clone());
            let alpha = f.tape.dropout(alpha, cfg.gcat_attn_dropout, f.mode, rng)?;
            let values = f.conv_bn_selu(x, &format!("{prefix}.val"))?;
            head_outputs.push(f.tape.edge_weighted_sum(alpha, values)?);
        }

        let mut acc = head_outputs[0];
        for &h in &head_outputs[1..] {
            acc = f.tape.add(acc, h)?;
        }
        let averaged = f.tape.scale(acc, 1.0 / cfg.gcat_heads as f64);
        let bias = f.p("gcat.bias");
        let biased = f.tape.add_bias(averaged, bias)?;
        let activated = f.tape.selu(biased);
        let normed = f.bn(activated, "gcat.bn");
        let dropped = f.tape.dropout(normed, cfg.gcat_dropout, f.mode, rng)?;
        let out = f.tape.concat_last(&[x, dropped])?;
        Ok((out, EdgeAttention { per_head: attention }))
    }

    /// Positional encoding with a learnable scale, residual multi-head
    /// attention, then a residual separable-convolution feedforward.
    fn tce_stage(&self, f: &mut Fwd, x: Var, rng: &mut RngStream) -> Result<Var, TensorError> {
        let cfg = &self.config;
        let shape = f.tape.value(x).shape().to_vec();
        let (b, t, dm) = (shape[0], shape[2], shape[3]);

        let x3 = f.tape.reshape(x, &[b, t, dm])?;
        let pe = positional_encoding(t, dm)?;
        let scale = f.p("tce.pe.scale");
        let y0 = f.tape.add_scaled_const(x3, scale, pe)?;

        let vars = MhaVars {
            wq: (0..cfg.mha_heads).map(|h| f.p(&format!("tce.mha.head{h}.wq"))).collect(),
            bq: (0..cfg.mha_heads).map(|h| f.p(&format!("tce.mha.head{h}.bq"))).collect(),
            wk: (0..cfg.mha_heads).map(|h| f.p(&format!("tce.mha.head{h}.wk"))).collect(),
            bk: (0..cfg.mha_heads).map(|h| f.p(&format!("tce.mha.head{h}.bk"))).collect(),
            wv: (0..cfg.mha_heads).map(|h| f.p(&format!("tce.mha.head{h}.wv"))).collect(),
            bv: (0..cfg.mha_heads).map(|h| f.p(&format!("tce.mha.head{h}.bv"))).collect(),
            wo: f.p("tce.mha.out.weight"),
            bo: f.p("tce.mha.out.bias"),
        };
        let mha =
            multi_head_attention(&mut f.tape, y0, &vars, cfg.mha_key_dim, cfg.mha_dropout, f.mode, rng)?;
        let normed = f.bn(mha.out, "tce.mha.bn");
        let dropped = f.tape.dropout(normed, cfg.tce_mha_dropout, f.mode, rng)?;
        let y1 = f.tape.add(y0, dropped)?;

        let y1_4d = f.tape.reshape(y1, &[b, 1, t, dm])?;
        let conv = f.sep_conv(y1_4d, "tce.conv", Padding::Same)?;
        let conv = f.bn(conv, "tce.conv.bn");
        let conv = f.tape.selu(conv);
        let conv = f.tape.dropout(conv, cfg.tce_dropout, f.mode, rng)?;
        let conv3 = f.tape.reshape(conv, &[b, t, dm])?;
        let y2 = f.tape.add(y1, conv3)?;

        f.tape.reshape(y2, &[b, 1, t, dm])
    }

    /// Reverse sweep seeded with d(loss)/d(logits); gradients accumulate on
    /// each parameter's grad slot.
    pub fn backward(&mut self, pass: &ForwardPass, logit_grad: Tensor) -> Result<(), ModelError> {
        let mut grads = pass
            .tape
            .backward(pass.logits, logit_grad)
            .map_err(|source| ModelError::Stage { stage: "backward", source })?;
        for &(idx, var) in &pass.param_vars {
            if let Some(g) = grads.take(var) {
                match &mut self.params_mut()[idx].grad {
                    Some(existing) => existing.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }
}

fn tce_out_features(tape: &Tape, v: Var) -> usize {
    tape.value(v).numel() / tape.value(v).shape()[0]
}
