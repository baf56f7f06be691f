//! The `synth`, `train`, `eval`, `gradcheck` and `entropy` commands.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};

use mireg::dataio::{
    generate_synthetic, read_csv_table, read_numeric_csv, write_synthetic, DomainDataset, LabelMap,
    Role, Standardizer, SynthSpec,
};
use mireg::densemath::DenseMatrix;
use mireg::evalreport::{correlation_csv, correlation_matrix, evaluate, EvalReport, MiSettings};
use mireg::gradcheck::{self, CheckOutcome, GradcheckPlan};
use mireg::kernelinfo::{gram, renyi_entropy};
use mireg::neuralnet::{init_model, LayerSpec};
use mireg::objectives::ObjectiveSpec;
use mireg::trainer::{build_training_pool, train, TrainConfig, TrainTrace};

use crate::checkpoint::Checkpoint;
use crate::config::{DataSource, ExperimentConfig, RunKey};

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes one CSV per domain plus `manifest.txt`. `seed` overrides the spec's seed.
pub fn cmd_synth(spec_path: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SynthSpec::from_manifest(&text)
                .with_context(|| format!("invalid spec {}", p.display()))?
        }
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(write_synthetic(&spec, out)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    /// Raw (unstandardized) datasets with their configured roles.
    pub datasets: Vec<DomainDataset>,
    pub class_names: Vec<String>,
    pub dropped_rows: usize,
}

impl LoadedData {
    pub fn with_role(&self, role: Role) -> Vec<DomainDataset> {
        self.datasets
            .iter()
            .filter(|d| d.role == role)
            .cloned()
            .collect()
    }
}

/// Reads or generates every domain and applies the role assignment.
pub fn load_data(cfg: &ExperimentConfig) -> Result<LoadedData> {
    let (mut datasets, class_names, dropped_rows) = match &cfg.data {
        DataSource::Synth(spec) => {
            let data = generate_synthetic(spec)?;
            (data, vec!["0".to_string(), "1".to_string()], 0)
        }
        DataSource::Files {
            paths,
            label_column,
            domain_column,
            binary_negative,
        } => {
            let tables = paths
                .iter()
                .map(|p| read_csv_table(p, label_column, domain_column.as_deref()))
                .collect::<mireg::Result<Vec<_>>>()?;
            for t in &tables[1..] {
                ensure!(
                    t.feature_names == tables[0].feature_names,
                    "{} has different feature columns from {}",
                    t.path.display(),
                    tables[0].path.display()
                );
            }
            let labels = match binary_negative {
                Some(neg) => LabelMap::Binary {
                    negative: neg.clone(),
                },
                None => LabelMap::infer(
                    tables
                        .iter()
                        .flat_map(|t| t.rows.iter().map(|r| r.label.as_str())),
                ),
            };
            let mut all = Vec::new();
            for t in &tables {
                all.extend(t.into_datasets(&labels)?);
            }
            let dropped = tables.iter().map(|t| t.dropped_rows).sum();
            (all, labels.class_names(), dropped)
        }
    };

    let mut seen = BTreeSet::new();
    for d in &datasets {
        ensure!(
            seen.insert(d.name.clone()),
            "domain `{}` appears twice",
            d.name
        );
    }
    if !cfg.roles.is_empty() {
        for name in cfg.roles.keys() {
            ensure!(
                seen.contains(name),
                "role assignment names unknown domain `{name}`"
            );
        }
        for d in datasets.iter_mut() {
            match cfg.roles.get(&d.name) {
                Some(&r) => d.role = r,
                None => bail!("domain `{}` has no role assignment", d.name),
            }
        }
    }
    ensure!(
        datasets.iter().any(|d| d.role == Role::Source),
        "no source domain"
    );
    Ok(LoadedData {
        datasets,
        class_names,
        dropped_rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub key: RunKey,
    pub checkpoint: Checkpoint,
    pub trace: TrainTrace,
    pub report: EvalReport,
    pub echo: Vec<(String, String)>,
}

pub fn objective_for(cfg: &ExperimentConfig, key: &RunKey) -> Result<ObjectiveSpec> {
    Ok(
        ObjectiveSpec::new(key.kind, cfg.beta, cfg.lambda, cfg.lambda2, key.bandwidth)?
            .with_latent_bandwidth(cfg.latent_bandwidth_for(key.bandwidth))?
            .with_mmd_bandwidth(cfg.mmd_bandwidth_for(key.bandwidth))?,
    )
}

fn standardize_all(scaler: &Standardizer, data: &[DomainDataset]) -> Result<Vec<DomainDataset>> {
    Ok(data
        .iter()
        .map(|d| scaler.apply(d))
        .collect::<mireg::Result<Vec<_>>>()?)
}

/// Trains one grid point and evaluates it on every configured domain.
pub fn run_one(cfg: &ExperimentConfig, data: &LoadedData, key: RunKey) -> Result<RunOutput> {
    let sources = data.with_role(Role::Source);
    let crosses = data.with_role(Role::Cross);
    let mut pool = build_training_pool(&sources, &crosses, key.fraction, key.seed)?;
    let scaler = Standardizer::fit([&pool.features])?;
    pool.features = scaler.transform(&pool.features)?;

    let d = pool.features.cols();
    ensure!(
        cfg.topology[0] == d,
        "topology starts at {} but the data has {d} features",
        cfg.topology[0]
    );
    let max_label = data
        .datasets
        .iter()
        .flat_map(|ds| ds.labels.iter().copied())
        .max()
        .unwrap_or(0);
    let n_classes = data.class_names.len().max(max_label + 1);
    let model = init_model(
        &LayerSpec::encoder_from_dims(&cfg.topology)?,
        n_classes,
        key.seed,
    )?;

    let objective = objective_for(cfg, &key)?;
    let tcfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        lr_encoder: cfg.lr_encoder,
        lr_decoder: cfg.lr_decoder,
        objective,
        cross_domain_fraction: key.fraction,
        seed: key.seed,
        log_every: cfg.log_every,
    };
    let (model, trace) =
        train(&pool, model, &tcfg).with_context(|| format!("run {}", key.dir_name()))?;

    let eval_sets = standardize_all(&scaler, &data.datasets)?;
    let settings = MiSettings {
        input_bandwidth: objective.input_bandwidth(),
        latent_bandwidth: objective.latent_bandwidth(),
        batch_size: cfg.batch_size,
    };
    let echo = vec![
        ("objective".to_string(), key.kind.name().to_string()),
        ("fraction".into(), key.fraction.to_string()),
        ("seed".into(), key.seed.to_string()),
        (
            "input_bandwidth".into(),
            objective.input_bandwidth().to_string(),
        ),
        (
            "latent_bandwidth".into(),
            objective.latent_bandwidth().to_string(),
        ),
        (
            "mmd_bandwidth".into(),
            objective.mmd_bandwidth().to_string(),
        ),
        ("beta".into(), cfg.beta.to_string()),
        ("lambda".into(), cfg.lambda.to_string()),
        ("lambda2".into(), cfg.lambda2.to_string()),
        ("epochs".into(), cfg.epochs.to_string()),
        ("batch_size".into(), cfg.batch_size.to_string()),
        ("lr_encoder".into(), cfg.lr_encoder.to_string()),
        ("lr_decoder".into(), cfg.lr_decoder.to_string()),
        ("topology".into(), topology_string(&cfg.topology)),
        ("pool_rows".into(), pool.len().to_string()),
        (
            "pool_cross_rows".into(),
            pool.count(Role::Cross).to_string(),
        ),
    ];
    let report = evaluate(&model, &eval_sets, &settings)?.with_config(echo.clone());
    Ok(RunOutput {
        key,
        checkpoint: Checkpoint {
            model,
            scaler: Some(scaler),
        },
        trace,
        report,
        echo,
    })
}

pub fn topology_string(t: &[usize]) -> String {
    t.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

fn write_report(dir: &Path, report: &EvalReport) -> Result<()> {
    write(&dir.join("report.txt"), &report.to_document())?;
    write(&dir.join("recall.csv"), &report.recall_csv())?;
    write(&dir.join("confusion.csv"), &report.confusion_csv())
}

/// One line of the grid summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub key: RunKey,
    pub dir: PathBuf,
    pub source_recall: Option<f64>,
    pub cross_recall: Option<f64>,
    pub ood_recall: Option<f64>,
    pub ood_mi: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Trains every grid point of the config. Each run gets its own directory
/// under `out` holding `model.ckpt`, `trace.jsonl`, `run.cfg` and its report.
pub fn cmd_train(config_path: &Path, out: &Path) -> Result<Vec<RunSummary>> {
    let cfg = ExperimentConfig::load(config_path)?;
    let data = load_data(&cfg)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let config_text = fs::read_to_string(config_path)?;
    write(&out.join("config.cfg"), &config_text)?;

    let mut summaries = Vec::new();
    for key in cfg.grid() {
        let run = run_one(&cfg, &data, key)?;
        let dir = out.join(key.dir_name());
        fs::create_dir_all(&dir)?;
        run.checkpoint.save(&dir.join("model.ckpt"))?;
        write(&dir.join("trace.jsonl"), &run.trace.to_jsonl())?;
        let mut echo = String::from("[run]\n");
        for (k, v) in &run.echo {
            writeln!(echo, "{k} = {v}").unwrap();
        }
        write(&dir.join("run.cfg"), &echo)?;
        write_report(&dir, &run.report)?;
        summaries.push(RunSummary {
            key,
            dir,
            source_recall: run.report.mean_recall(Role::Source),
            cross_recall: run.report.mean_recall(Role::Cross),
            ood_recall: run.report.mean_recall(Role::Ood),
            ood_mi: run.report.role_mi.get(&Role::Ood).copied(),
        });
    }
    let mut csv = String::from(
        "run,objective,fraction,seed,bandwidth,source_recall,cross_recall,ood_recall,ood_mi_bits\n",
    );
    for s in &summaries {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            s.key.dir_name(),
            s.key.kind.name(),
            s.key.fraction,
            s.key.seed,
            s.key.bandwidth,
            opt(s.source_recall),
            opt(s.cross_recall),
            opt(s.ood_recall),
            opt(s.ood_mi)
        )
        .unwrap();
    }
    write(&out.join("summary.csv"), &csv)?;
    Ok(summaries)
}

/// Evaluates a checkpoint on the config's domains and writes the report,
/// CSV tables and one feature-correlation matrix per domain.
pub fn cmd_eval(model_path: &Path, config_path: &Path, report_dir: &Path) -> Result<EvalReport> {
    let ck = Checkpoint::load(model_path)?;
    let cfg = ExperimentConfig::load(config_path)?;
    let data = load_data(&cfg)?;
    let d = data.datasets[0].n_features();
    ensure!(
        ck.model.input_dim() == d,
        "checkpoint expects {} features but the data has {d}",
        ck.model.input_dim()
    );
    let sets = match &ck.scaler {
        Some(s) => standardize_all(s, &data.datasets)?,
        None => data.datasets.clone(),
    };
    let bandwidth = cfg.bandwidths[0];
    let settings = MiSettings {
        input_bandwidth: bandwidth,
        latent_bandwidth: cfg.latent_bandwidth_for(bandwidth),
        batch_size: cfg.batch_size,
    };
    let echo = vec![
        ("seed".to_string(), ck.model.seed.to_string()),
        ("topology".into(), topology_string(&ck.model.topology())),
        ("classes".into(), data.class_names.join(" ")),
        (
            "input_bandwidth".into(),
            settings.input_bandwidth.to_string(),
        ),
        (
            "latent_bandwidth".into(),
            settings.latent_bandwidth.to_string(),
        ),
        ("batch_size".into(), settings.batch_size.to_string()),
        ("dropped_rows".into(), data.dropped_rows.to_string()),
    ];
    let report = evaluate(&ck.model, &sets, &settings)?.with_config(echo);
    fs::create_dir_all(report_dir)?;
    write_report(report_dir, &report)?;
    for ds in &data.datasets {
        if ds.len() >= 2 {
            let corr = correlation_matrix(ds)?;
            write(
                &report_dir.join(format!("correlation_{}.csv", ds.name)),
                &correlation_csv(&ds.feature_names, &corr),
            )?;
        }
    }
    Ok(report)
}

/// Runs every finite-difference suite; the flag is true iff all pass.
pub fn cmd_gradcheck(plan: &GradcheckPlan) -> Result<(Vec<CheckOutcome>, bool)> {
    let outcomes = gradcheck::run_all(plan)?;
    let ok = outcomes.iter().all(CheckOutcome::passed);
    Ok((outcomes, ok))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropySummary {
    /// Second-order entropy of each full batch, in bits.
    pub per_batch: Vec<f64>,
    pub mean: f64,
    /// Rows left over after the last full batch.
    pub leftover: usize,
}

/// Second-order entropy of consecutive full batches of `batch` rows.
pub fn entropy_of_rows(x: &DenseMatrix, bandwidth: f64, batch: usize) -> Result<EntropySummary> {
    ensure!(batch >= 2, "batch size must be >= 2, got {batch}");
    let n_batches = x.rows() / batch;
    ensure!(
        n_batches > 0,
        "{} rows are fewer than one batch of {batch}",
        x.rows()
    );
    let per_batch = (0..n_batches)
        .map(|b| {
            let idx: Vec<usize> = (b * batch..(b + 1) * batch).collect();
            Ok(renyi_entropy(&gram(&x.select_rows(&idx), bandwidth)?, 2.0)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_batch.iter().sum::<f64>() / per_batch.len() as f64;
    Ok(EntropySummary {
        per_batch,
        mean,
        leftover: x.rows() - n_batches * batch,
    })
}

/// `skip` names non-feature columns such as labels or domain tags.
pub fn cmd_entropy(
    input: &Path,
    skip: &[String],
    bandwidth: f64,
    batch: usize,
) -> Result<EntropySummary> {
    ensure!(batch >= 2, "batch size must be >= 2, got {batch}");
    let skip: Vec<&str> = skip.iter().map(String::as_str).collect();
    let (_, x, _) = read_numeric_csv(input, &skip)?;
    entropy_of_rows(&x, bandwidth, batch)
}
