//! Mini-batch training loop and cross-domain pool construction.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::{DomainDataset, Role};
use crate::densemath::DenseMatrix;
use crate::error::{Error, Result};
use crate::neuralnet::{backward, sgd_step, Batch, MlpModel};
use crate::objectives::{LossBreakdown, ObjectiveSpec};

pub const DEFAULT_BATCH_SIZE: usize = 200;
pub const DEFAULT_LEARNING_RATE: f64 = 0.005;
pub const DEFAULT_EPOCHS: usize = 100;
/// The benchmarked cross-domain mixing proportions.
pub const FRACTION_GRID: [f64; 4] = [0.0, 0.15, 0.25, 0.40];
pub const MAX_CROSS_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder: f64,
    pub lr_decoder: f64,
    pub objective: ObjectiveSpec,
    pub cross_domain_fraction: f64,
    pub seed: u64,
    /// Record every n-th optimizer step (1 = every batch).
    pub log_every: usize,
}

impl TrainConfig {
    pub fn new(objective: ObjectiveSpec) -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            lr_encoder: DEFAULT_LEARNING_RATE,
            lr_decoder: DEFAULT_LEARNING_RATE,
            objective,
            cross_domain_fraction: 0.0,
            seed: 0,
            log_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::param(
                "batch_size",
                format!("must be >= 2, got {}", self.batch_size),
            ));
        }
        for (name, lr) in [
            ("lr_encoder", self.lr_encoder),
            ("lr_decoder", self.lr_decoder),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::param(name, format!("must be > 0, got {lr}")));
            }
        }
        check_fraction(self.cross_domain_fraction)?;
        if self.log_every == 0 {
            return Err(Error::param("log_every", "must be >= 1"));
        }
        self.objective.validate()
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if (0.0..=MAX_CROSS_FRACTION).contains(&f) {
        Ok(())
    } else {
        Err(Error::param(
            "cross_domain_fraction",
            format!("must lie in [0, {MAX_CROSS_FRACTION}], got {f}"),
        ))
    }
}

/// Stacked training rows with per-row role and domain tags.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPool {
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub roles: Vec<Role>,
    /// Index into `domain_names` for every row.
    pub domains: Vec<usize>,
    pub domain_names: Vec<String>,
}

impl TrainingPool {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, role: Role) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }

    pub fn count_domain(&self, name: &str) -> usize {
        match self.domain_names.iter().position(|d| d == name) {
            Some(k) => self.domains.iter().filter(|&&d| d == k).count(),
            None => 0,
        }
    }

    pub fn batch(&self, idx: &[usize]) -> Result<Batch> {
        Batch::new(
            self.features.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
            idx.iter().map(|&i| self.roles[i]).collect(),
        )
    }
}

/// Number of rows drawn from each cross domain.
pub fn cross_rows_per_domain(total_source: usize, n_cross: usize, fraction: f64) -> usize {
    if n_cross == 0 {
        return 0;
    }
    (fraction * total_source as f64 / n_cross as f64).floor() as usize
}

/// Keeps every source row and samples `floor(fraction · |source| / |cross domains|)`
/// rows without replacement from each cross domain.
pub fn build_training_pool(
    source: &[DomainDataset],
    cross: &[DomainDataset],
    fraction: f64,
    seed: u64,
) -> Result<TrainingPool> {
    check_fraction(fraction)?;
    let total_source: usize = source.iter().map(DomainDataset::len).sum();
    if total_source == 0 {
        return Err(Error::EmptyPartition { role: "source" });
    }
    let d = source[0].n_features();
    let take = cross_rows_per_domain(total_source, cross.len(), fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut parts: Vec<(DomainDataset, Role)> =
        source.iter().map(|s| (s.clone(), Role::Source)).collect();
    if take > 0 {
        for c in cross {
            if c.len() < take {
                return Err(Error::Data(format!(
                    "cross domain `{}` has {} rows but {take} were requested",
                    c.name,
                    c.len()
                )));
            }
            let all: Vec<usize> = (0..c.len()).collect();
            let mut picked: Vec<usize> = all.choose_multiple(&mut rng, take).copied().collect();
            picked.sort_unstable();
            parts.push((c.subset(&picked), Role::Cross));
        }
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut roles = Vec::new();
    let mut domains = Vec::new();
    let mut domain_names = Vec::new();
    for (k, (ds, role)) in parts.iter().enumerate() {
        if ds.n_features() != d {
            return Err(Error::ShapeMismatch {
                op: "build_training_pool",
                left: (ds.len(), ds.n_features()),
                right: (ds.len(), d),
            });
        }
        data.extend_from_slice(ds.features.as_slice());
        labels.extend_from_slice(&ds.labels);
        roles.extend(std::iter::repeat_n(*role, ds.len()));
        domains.extend(std::iter::repeat_n(k, ds.len()));
        domain_names.push(ds.name.clone());
    }
    Ok(TrainingPool {
        features: DenseMatrix::from_vec(labels.len(), d, data)?,
        labels,
        roles,
        domains,
        domain_names,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub epoch: usize,
    pub batch: usize,
    pub loss: LossBreakdown,
    pub wall_secs: f64,
}

impl TraceRecord {
    pub fn to_line(&self) -> String {
        let l = &self.loss;
        format!(
            "{{\"epoch\":{},\"batch\":{},\"total\":{},\"ce\":{},\"rec\":{},\"reg\":{},\"wall_secs\":{:.6}}}",
            self.epoch, self.batch, l.total, l.ce, l.rec, l.reg, self.wall_secs
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            writeln!(out, "{}", r.to_line()).unwrap();
        }
        out
    }

    /// Equality ignoring wall-clock time.
    pub fn same_values(&self, other: &TrainTrace) -> bool {
        self.records.len() == other.records.len()
            && self
                .records
                .iter()
                .zip(&other.records)
                .all(|(a, b)| a.epoch == b.epoch && a.batch == b.batch && a.loss == b.loss)
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

/// Row indices of every batch of every epoch, as `train` visits them.
///
/// Each epoch is a fresh seeded shuffle cut into chunks of `batch_size`;
/// a final chunk with fewer than two rows is dropped.
pub fn batch_schedule(
    n_rows: usize,
    batch_size: usize,
    epochs: usize,
    seed: u64,
) -> Vec<Vec<Vec<usize>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n_rows).collect();
    (0..epochs)
        .map(|_| {
            order.shuffle(&mut rng);
            order
                .chunks(batch_size)
                .filter(|c| c.len() >= 2)
                .map(<[usize]>::to_vec)
                .collect()
        })
        .collect()
}

/// Runs plain two-rate SGD over `pool`.
pub fn train(
    pool: &TrainingPool,
    model: MlpModel,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainTrace)> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::EmptyPartition { role: "source" });
    }
    if pool.features.cols() != model.input_dim() {
        return Err(Error::ShapeMismatch {
            op: "train",
            left: pool.features.shape(),
            right: (pool.len(), model.input_dim()),
        });
    }
    let mut model = model;
    let mut trace = TrainTrace::default();
    let start = Instant::now();
    let mut step = 0usize;
    for (epoch, batches) in batch_schedule(pool.len(), cfg.batch_size, cfg.epochs, cfg.seed)
        .into_iter()
        .enumerate()
    {
        for (b, idx) in batches.iter().enumerate() {
            let batch = pool.batch(idx)?;
            let grads = backward(&model, &batch, &cfg.objective).map_err(|e| match e {
                Error::NonFinite { context } => Error::NonFinite {
                    context: format!("epoch {epoch} batch {b}: {context}"),
                },
                other => other,
            })?;
            sgd_step(&mut model, &grads, cfg.lr_encoder, cfg.lr_decoder).map_err(|e| match e {
                Error::NonFinite { context } => Error::NonFinite {
                    context: format!("epoch {epoch} batch {b}: {context} (loss {:?})", grads.loss),
                },
                other => other,
            })?;
            if step.is_multiple_of(cfg.log_every) {
                trace.records.push(TraceRecord {
                    epoch,
                    batch: b,
                    loss: grads.loss,
                    wall_secs: start.elapsed().as_secs_f64(),
                });
            }
            step += 1;
        }
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{cross_entropy_loss, encode, init_model, logits, LayerSpec};
    use crate::objectives::{assemble_loss, ObjectiveKind};
    use rand::Rng;

    fn toy(name: &str, n: usize, d: usize, seed: u64) -> DomainDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let data = labels
            .iter()
            .flat_map(|&y| {
                let shift = if y == 1 { 1.5 } else { -1.5 };
                (0..d)
                    .map(|_| shift + rng.random_range(-1.0..1.0))
                    .collect::<Vec<_>>()
            })
            .collect();
        let x = DenseMatrix::from_vec(n, d, data).unwrap();
        let names = (0..d).map(|i| format!("f{i}")).collect();
        DomainDataset::new(name, Role::Source, x, labels, names).unwrap()
    }

    #[test]
    fn pool_floor_rule() {
        let source = vec![toy("s0", 600, 3, 1), toy("s1", 400, 3, 2)];
        let cross = vec![toy("c0", 500, 3, 3), toy("c1", 500, 3, 4)];
        let pool = build_training_pool(&source, &cross, 0.4, 7).unwrap();
        assert_eq!(pool.count(Role::Source), 1000);
        assert_eq!(pool.count_domain("c0"), 200);
        assert_eq!(pool.count_domain("c1"), 200);
        let none = build_training_pool(&source, &cross, 0.0, 7).unwrap();
        assert_eq!(none.len(), 1000);
        assert_eq!(none.count(Role::Cross), 0);
        // 0.15 · 1000 / 2 = 75
        assert_eq!(
            build_training_pool(&source, &cross, 0.15, 7)
                .unwrap()
                .count_domain("c1"),
            75
        );
    }

    #[test]
    fn pool_errors() {
        let source = vec![toy("s0", 1000, 3, 1)];
        let small = vec![toy("tiny", 10, 3, 3)];
        let err = build_training_pool(&source, &small, 0.4, 0).unwrap_err();
        assert!(err.to_string().contains("tiny"));
        assert!(build_training_pool(&source, &small, 0.6, 0).is_err());
        assert!(build_training_pool(&[], &small, 0.1, 0).is_err());
    }

    #[test]
    fn pool_sampling_is_seeded() {
        let source = vec![toy("s0", 100, 3, 1)];
        let cross = vec![toy("c0", 100, 3, 3)];
        let a = build_training_pool(&source, &cross, 0.25, 9).unwrap();
        let b = build_training_pool(&source, &cross, 0.25, 9).unwrap();
        let c = build_training_pool(&source, &cross, 0.25, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn schedule_drops_singleton_tail() {
        let s = batch_schedule(9, 4, 2, 0);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4]);
        let s = batch_schedule(10, 4, 1, 0);
        assert_eq!(s[0].iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut seen: Vec<usize> = s[0].concat();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    fn setup(objective: ObjectiveSpec, epochs: usize) -> (TrainingPool, MlpModel, TrainConfig) {
        let pool =
            build_training_pool(&[toy("s", 64, 4, 11)], &[toy("c", 64, 4, 12)], 0.5, 0).unwrap();
        let specs = LayerSpec::encoder_from_dims(&[4, 6, 2]).unwrap();
        let model = init_model(&specs, 2, 5).unwrap();
        let mut cfg = TrainConfig::new(objective);
        cfg.epochs = epochs;
        cfg.batch_size = 16;
        cfg.lr_encoder = 0.05;
        cfg.lr_decoder = 0.05;
        (pool, model, cfg)
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (pool, model, cfg) = setup(ObjectiveSpec::dmtae(0.6), 0);
        let (trained, trace) = train(&pool, model.clone(), &cfg).unwrap();
        assert_eq!(trained, model);
        assert!(trace.records.is_empty());
    }

    #[test]
    fn separable_toy_reaches_low_ce() {
        let (pool, model, cfg) = setup(ObjectiveSpec::dmtae(0.6), 50);
        let (trained, trace) = train(&pool, model, &cfg).unwrap();
        let z = encode(&trained, &pool.features).unwrap();
        let ce = cross_entropy_loss(&logits(&trained, &z).unwrap(), &pool.labels).unwrap();
        assert!(ce < 0.1, "ce = {ce}");
        assert!(trace.records.iter().all(|r| r.loss.is_finite()));
    }

    #[test]
    fn training_is_deterministic() {
        let obj = ObjectiveSpec::mtls_red(2.0, 0.6, 1.0).unwrap();
        let (pool, model, cfg) = setup(obj, 3);
        let (a, ta) = train(&pool, model.clone(), &cfg).unwrap();
        let (b, tb) = train(&pool, model, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(ta.same_values(&tb));
    }

    #[test]
    fn trace_reg_matches_posthoc_mi() {
        let obj = ObjectiveSpec::mtls_red(2.0, 0.6, 1.0).unwrap();
        let (pool, model, mut cfg) = setup(obj, 1);
        cfg.epochs = 1;
        let (_, trace) = train(&pool, model.clone(), &cfg).unwrap();
        let first = &batch_schedule(pool.len(), cfg.batch_size, 1, cfg.seed)[0][0];
        let loss = assemble_loss(&obj, &model, &pool.batch(first).unwrap()).unwrap();
        assert!((trace.records[0].loss.reg - loss.reg).abs() <= 1e-10);
    }

    #[test]
    fn beta_zero_matches_dmtae() {
        let red = ObjectiveSpec::mtls_red(0.0, 0.6, 1.0).unwrap();
        let (pool, model, cfg) = setup(red, 5);
        let mut cfg_d = cfg.clone();
        cfg_d.objective = ObjectiveSpec::dmtae(0.6);
        let (a, _) = train(&pool, model.clone(), &cfg).unwrap();
        let (b, _) = train(&pool, model, &cfg_d).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_kind_trains() {
        for kind in ObjectiveKind::ALL {
            let obj = ObjectiveSpec::new(kind, 1.0, 0.6, 0.5, 1.0).unwrap();
            let (pool, model, cfg) = setup(obj, 2);
            let (trained, trace) = train(&pool, model, &cfg).unwrap();
            assert!(trained.is_finite(), "{kind:?}");
            assert_eq!(trace.records.len(), 2 * 6);
        }
    }

    #[test]
    fn divergence_names_the_batch() {
        let (pool, model, mut cfg) = setup(ObjectiveSpec::dmtae(0.6), 50);
        cfg.lr_encoder = 1e6;
        cfg.lr_decoder = 1e6;
        let err = train(&pool, model, &cfg).unwrap_err().to_string();
        assert!(err.contains("epoch") && err.contains("batch"), "{err}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::new(ObjectiveSpec::dmtae(0.6));
        assert!(cfg.validate().is_ok());
        cfg.batch_size = 1;
        assert!(cfg.validate().is_err());
        cfg.batch_size = 200;
        cfg.cross_domain_fraction = 0.7;
        assert!(cfg.validate().is_err());
        cfg.cross_domain_fraction = 0.4;
        cfg.lr_decoder = 0.0;
        assert!(cfg.validate().is_err());
    }
}
