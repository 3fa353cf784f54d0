//! Model state: named parameters, batch-norm running statistics, adjacency.

use std::collections::BTreeMap;

use agtc_graph::AdjacencyGraph;
use agtc_tensor::{fans_of, glorot_uniform, Constraint, LayerParam, RngStream, Tensor};

use crate::config::ModelConfig;
use crate::ModelError;

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPS: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct BnState {
    pub running_mean: Tensor,
    pub running_var: Tensor,
}

impl BnState {
    fn new(features: usize) -> BnState {
        BnState {
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::full(&[features], 1.0),
        }
    }

    pub fn update(&mut self, batch_mean: &Tensor, batch_var: &Tensor) {
        for (r, b) in self.running_mean.data_mut().iter_mut().zip(batch_mean.data()) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
        }
        for (r, b) in self.running_var.data_mut().iter_mut().zip(batch_var.data()) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelState {
    pub config: ModelConfig,
    pub adjacency: AdjacencyGraph,
    params: Vec<LayerParam>,
    param_index: BTreeMap<String, usize>,
    bn: Vec<(String, BnState)>,
    bn_index: BTreeMap<String, usize>,
}

struct Builder {
    rng: RngStream,
    params: Vec<LayerParam>,
    bn: Vec<(String, BnState)>,
}

impl Builder {
    fn glorot(&mut self, name: &str, shape: &[usize]) {
        let (fan_in, fan_out) = fans_of(shape);
        let t = glorot_uniform(shape, fan_in, fan_out, &mut self.rng);
        self.params.push(LayerParam::new(name, t));
    }

    fn glorot_constrained(&mut self, name: &str, shape: &[usize], c: Constraint) {
        let (fan_in, fan_out) = fans_of(shape);
        let mut p =
            LayerParam::new(name, glorot_uniform(shape, fan_in, fan_out, &mut self.rng))
                .with_constraint(c);
        c.project(&mut p.value);
        self.params.push(p);
    }

    fn zeros(&mut self, name: &str, shape: &[usize]) {
        self.params.push(LayerParam::new(name, Tensor::zeros(shape)));
    }

    fn scalar(&mut self, name: &str, value: f64, constraint: Option<Constraint>) {
        let mut p = LayerParam::new(name, Tensor::scalar(value));
        p.constraint = constraint;
        self.params.push(p);
    }

    /// gamma/beta parameters plus running statistics for one BN site.
    fn batch_norm(&mut self, site: &str, features: usize) {
        let mut gamma = LayerParam::new(format!("{site}.gamma"), Tensor::full(&[features], 1.0));
        gamma.trainable = true;
        self.params.push(gamma);
        self.params.push(LayerParam::new(format!("{site}.beta"), Tensor::zeros(&[features])));
        self.bn.push((site.to_string(), BnState::new(features)));
    }

    /// Depthwise + pointwise kernel pair for one separable convolution.
    fn separable(&mut self, prefix: &str, kernel: (usize, usize), f_in: usize, depth: usize, f_out: usize) {
        self.glorot(
            &format!("{prefix}.depthwise"),
            &[kernel.0, kernel.1, f_in, depth],
        );
        self.glorot(&format!("{prefix}.pointwise"), &[1, 1, f_in * depth, f_out]);
    }
}

impl ModelState {
    /// Fresh Glorot-initialized model. Parameter creation order is fixed, so
    /// one seed reproduces one model bit for bit.
    pub fn new(
        config: ModelConfig,
        adjacency: AdjacencyGraph,
        rng: &mut RngStream,
    ) -> Result<ModelState, ModelError> {
        config.validate()?;
        if adjacency.num_channels() != config.num_channels {
            return Err(ModelError::AdjacencyMismatch {
                expected: config.num_channels,
                found: adjacency.num_channels(),
            });
        }
        let c = &config;
        let mut b = Builder { rng: rng.substream(0xA61C), params: Vec::new(), bn: Vec::new() };

        // channel-wise temporal convolution
        b.glorot("ctc.conv.kernel", &[1, c.ctc_kernel, 1, c.ctc_filters]);
        b.batch_norm("ctc.bn", c.ctc_filters);

        // graph convolutional attention, one set of convs per head
        for h in 0..c.gcat_heads {
            let p = format!("gcat.head{h}");
            b.separable(
                &format!("{p}.weight"),
                (1, c.gcat_weight_kernel),
                c.ctc_filters,
                c.gcat_depth,
                c.gcat_out_features,
            );
            b.batch_norm(&format!("{p}.weight.bn"), c.gcat_out_features);
            b.separable(
                &format!("{p}.val"),
                (1, c.gcat_weight_kernel),
                c.ctc_filters,
                c.gcat_depth,
                c.gcat_out_features,
            );
            b.batch_norm(&format!("{p}.val.bn"), c.gcat_out_features);
            b.separable(
                &format!("{p}.src"),
                (1, c.gcat_attn_kernel),
                c.gcat_out_features,
                c.gcat_depth,
                1,
            );
            b.batch_norm(&format!("{p}.src.bn"), 1);
            b.separable(
                &format!("{p}.dst"),
                (1, c.gcat_attn_kernel),
                c.gcat_out_features,
                c.gcat_depth,
                1,
            );
            b.batch_norm(&format!("{p}.dst.bn"), 1);
            b.scalar(&format!("{p}.attn.alpha"), 0.0, None);
        }
        b.zeros("gcat.bias", &[c.gcat_out_features]);
        b.batch_norm("gcat.bn", c.gcat_out_features);

        // global convolutional adaptive pooling: learnable spatial filters
        b.glorot_constrained(
            "gcap.depthwise",
            &[c.num_channels, 1, c.gcat_concat_features(), c.gcap_depth],
            Constraint::MaxNorm { limit: 1.0, axis: 0 },
        );
        b.batch_norm("gcap.bn", c.gcap_features());

        // global temporal convolution
        b.separable(
            "gtc.conv",
            (1, c.gtc_kernel),
            c.gcap_features(),
            c.gtc_depth,
            c.gtc_filters,
        );
        b.batch_norm("gtc.bn", c.gtc_filters);

        // temporal context enhancement
        b.scalar("tce.pe.scale", 0.0, Some(Constraint::MinMax { lo: 0.0, hi: 1.0 }));
        for h in 0..c.mha_heads {
            let p = format!("tce.mha.head{h}");
            b.glorot(&format!("{p}.wq"), &[c.gtc_filters, c.mha_key_dim]);
            b.zeros(&format!("{p}.bq"), &[c.mha_key_dim]);
            b.glorot(&format!("{p}.wk"), &[c.gtc_filters, c.mha_key_dim]);
            b.zeros(&format!("{p}.bk"), &[c.mha_key_dim]);
            b.glorot(&format!("{p}.wv"), &[c.gtc_filters, c.mha_value_dim]);
            b.zeros(&format!("{p}.bv"), &[c.mha_value_dim]);
        }
        b.glorot("tce.mha.out.weight", &[c.mha_heads * c.mha_value_dim, c.gtc_filters]);
        b.zeros("tce.mha.out.bias", &[c.gtc_filters]);
        b.batch_norm("tce.mha.bn", c.gtc_filters);
        b.separable("tce.conv", (1, c.tce_kernel), c.gtc_filters, c.tce_depth, c.gtc_filters);
        b.batch_norm("tce.conv.bn", c.gtc_filters);

        // classifier
        b.glorot_constrained(
            "classifier.weight",
            &[c.flatten_dim()?, c.num_classes],
            Constraint::MaxNorm { limit: 0.25, axis: 0 },
        );
        b.zeros("classifier.bias", &[c.num_classes]);

        let param_index =
            b.params.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
        let bn_index = b.bn.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
        Ok(ModelState {
            config,
            adjacency,
            params: b.params,
            param_index,
            bn: b.bn,
            bn_index,
        })
    }

    pub fn params(&self) -> &[LayerParam] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParam] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&LayerParam> {
        self.param_index.get(name).map(|&i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut LayerParam> {
        self.param_index.get(name).copied().map(move |i| &mut self.params[i])
    }

    pub(crate) fn param_idx(&self, name: &str) -> usize {
        *self
            .param_index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter '{name}'"))
    }

    pub fn bn_states(&self) -> &[(String, BnState)] {
        &self.bn
    }

    pub fn bn_state(&self, site: &str) -> Option<&BnState> {
        self.bn_index.get(site).map(|&i| &self.bn[i].1)
    }

    pub(crate) fn bn_state_mut_idx(&mut self, idx: usize) -> &mut BnState {
        &mut self.bn[idx].1
    }

    pub(crate) fn bn_idx(&self, site: &str) -> usize {
        *self.bn_index.get(site).unwrap_or_else(|| panic!("unknown BN site '{site}'"))
    }

    /// Project every constrained parameter (run after each optimizer step).
    pub fn apply_constraints(&mut self) {
        agtc_tensor::apply_constraints(&mut self.params);
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }
}

/// Total parameter count, including batch-norm running statistics, with a
/// per-tensor and per-module breakdown.
#[derive(Clone, Debug)]
pub struct ParamCountReport {
    pub total: usize,
    pub trainable: usize,
    pub non_trainable: usize,
    pub per_tensor: Vec<(String, usize)>,
    pub per_module: BTreeMap<String, usize>,
}

pub fn param_count(model: &ModelState) -> ParamCountReport {
    let mut per_tensor = Vec::new();
    let mut per_module: BTreeMap<String, usize> = BTreeMap::new();
    let mut trainable = 0;
    let mut non_trainable = 0;
    for p in model.params() {
        let n = p.value.numel();
        trainable += n;
        per_tensor.push((p.name.clone(), n));
        let module = p.name.split('.').next().unwrap_or("").to_string();
        *per_module.entry(module).or_default() += n;
    }
    for (site, bn) in model.bn_states() {
        let n = bn.running_mean.numel() + bn.running_var.numel();
        non_trainable += n;
        per_tensor.push((format!("{site}.running"), n));
        let module = site.split('.').next().unwrap_or("").to_string();
        *per_module.entry(module).or_default() += n;
    }
    ParamCountReport {
        total: trainable + non_trainable,
        trainable,
        non_trainable,
        per_tensor,
        per_module,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use agtc_graph::{build_adjacency, montages::BCICIV2A_22};

    fn bci_model() -> ModelState {
        let adj = build_adjacency(&BCICIV2A_22).unwrap();
        ModelState::new(ModelConfig::bciciv2a(), adj, &mut RngStream::new(1)).unwrap()
    }

    #[test]
    fn bciciv2a_total_within_two_percent_of_reference() {
        let report = param_count(&bci_model());
        let reference = 75_069.0;
        let rel = (report.total as f64 - reference).abs() / reference;
        assert!(rel <= 0.02, "total {} deviates {:.3}% from {reference}", report.total, rel * 100.0);
    }

    #[test]
    fn gcat_weight_path_parameter_count() {
        let m = bci_model();
        let dw = m.param("gcat.head0.weight.depthwise").unwrap().value.numel();
        let pw = m.param("gcat.head0.weight.pointwise").unwrap().value.numel();
        assert_eq!(dw + pw, 768); // 8*8*4 + 8*4*16
    }

    #[test]
    fn growing_gcat_features_grows_the_count() {
        let adj = build_adjacency(&BCICIV2A_22).unwrap();
        let base = param_count(&bci_model()).total;
        let cfg = ModelConfig { gcat_out_features: 32, ..ModelConfig::bciciv2a() };
        let bigger =
            param_count(&ModelState::new(cfg, adj, &mut RngStream::new(1)).unwrap()).total;
        assert!(bigger > base);
    }

    #[test]
    fn mha_parameter_count_is_6288() {
        let m = bci_model();
        let mha: usize = m
            .params()
            .iter()
            .filter(|p| p.name.starts_with("tce.mha.") && !p.name.contains(".bn"))
            .map(|p| p.value.numel())
            .sum();
        assert_eq!(mha, 6_288);
    }

    #[test]
    fn classifier_parameter_count() {
        let m = bci_model();
        let w = m.param("classifier.weight").unwrap().value.numel();
        let b = m.param("classifier.bias").unwrap().value.numel();
        assert_eq!(w + b, 960 * 4 + 4);
    }

    #[test]
    fn gcap_depthwise_weight_count_and_constraint() {
        let m = bci_model();
        let p = m.param("gcap.depthwise").unwrap();
        assert_eq!(p.value.numel(), 22 * 24 * 2);
        assert_eq!(p.constraint, Some(Constraint::MaxNorm { limit: 1.0, axis: 0 }));
    }

    #[test]
    fn same_seed_same_model() {
        let adj = build_adjacency(&BCICIV2A_22).unwrap();
        let a = ModelState::new(ModelConfig::bciciv2a(), adj.clone(), &mut RngStream::new(9))
            .unwrap();
        let b =
            ModelState::new(ModelConfig::bciciv2a(), adj, &mut RngStream::new(9)).unwrap();
        for (pa, pb) in a.params().iter().zip(b.params()) {
            assert_eq!(pa.value, pb.value, "{} differs", pa.name);
        }
    }

    #[test]
    fn adjacency_size_must_match() {
        let adj = build_adjacency(&["C1", "Cz", "C2"]).unwrap();
        assert!(matches!(
            ModelState::new(ModelConfig::bciciv2a(), adj, &mut RngStream::new(0)),
            Err(ModelError::AdjacencyMismatch { .. })
        ));
    }
}
