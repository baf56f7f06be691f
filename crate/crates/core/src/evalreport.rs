//! Per-class recall, per-role accuracy, held-out MI and report serialization.
//!
//! Table cells are per-class recall (detection rate): the fraction of rows of
//! class `c` in domain `d` that the classifier assigns to `c`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use crate::dataio::{DomainDataset, Role};
use crate::densemath::DenseMatrix;
use crate::error::{Error, Result};
use crate::neuralnet::{encode, logits, MlpModel};
use crate::objectives::batch_mutual_information;

/// Bandwidths and batch size for MI measured on evaluation data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiSettings {
    pub input_bandwidth: f64,
    pub latent_bandwidth: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRecall {
    pub domain: String,
    pub role: Role,
    pub class: usize,
    pub support: usize,
    pub correct: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// One cell per (domain, class) with nonzero support, in dataset then class order.
    pub recalls: Vec<ClassRecall>,
    pub role_accuracy: BTreeMap<Role, f64>,
    /// Rows are true classes, columns predictions, pooled over all datasets.
    pub confusion: Vec<Vec<usize>>,
    /// Mean MI in bits over full evaluation batches, per role.
    pub role_mi: BTreeMap<Role, f64>,
    pub mean_mi: Option<f64>,
    pub mi_batches: usize,
    pub settings: MiSettings,
    /// Free-form `(key, value)` echo of the producing configuration.
    pub config: Vec<(String, String)>,
    pub runtime_secs: f64,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Classifies every row and measures MI on consecutive full batches of
/// `settings.batch_size` rows within each dataset.
pub fn evaluate(
    model: &MlpModel,
    datasets: &[DomainDataset],
    settings: &MiSettings,
) -> Result<EvalReport> {
    let start = Instant::now();
    if settings.batch_size < 2 {
        return Err(Error::param("batch_size", "must be >= 2"));
    }
    let k = model.n_classes();
    let mut recalls = Vec::new();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut role_counts: BTreeMap<Role, (usize, usize)> = BTreeMap::new();
    let mut role_mi_acc: BTreeMap<Role, (f64, usize)> = BTreeMap::new();

    for ds in datasets {
        if ds.is_empty() {
            return Err(Error::Data(format!("dataset `{}` is empty", ds.name)));
        }
        if ds.n_features() != model.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "evaluate",
                left: ds.features.shape(),
                right: (ds.len(), model.input_dim()),
            });
        }
        let z = encode(model, &ds.features)?;
        let scores = logits(model, &z)?;
        let mut support = vec![0usize; k];
        let mut correct = vec![0usize; k];
        for (row, &y) in scores.row_iter().zip(&ds.labels) {
            if y >= k {
                return Err(Error::InvalidLabel {
                    label: y,
                    classes: k,
                });
            }
            let p = argmax(row);
            confusion[y][p] += 1;
            support[y] += 1;
            correct[y] += usize::from(p == y);
        }
        for c in (0..k).filter(|&c| support[c] > 0) {
            recalls.push(ClassRecall {
                domain: ds.name.clone(),
                role: ds.role,
                class: c,
                support: support[c],
                correct: correct[c],
                recall: correct[c] as f64 / support[c] as f64,
            });
        }
        let counts = role_counts.entry(ds.role).or_default();
        counts.0 += correct.iter().sum::<usize>();
        counts.1 += ds.len();

        let l = settings.batch_size;
        for start in (0..ds.len() / l).map(|b| b * l) {
            let idx: Vec<usize> = (start..start + l).collect();
            let mi = batch_mutual_information(
                &ds.features.select_rows(&idx),
                &z.select_rows(&idx),
                settings.input_bandwidth,
                settings.latent_bandwidth,
            )?;
            let acc = role_mi_acc.entry(ds.role).or_default();
            acc.0 += mi;
            acc.1 += 1;
        }
    }

    let role_accuracy = role_counts
        .into_iter()
        .map(|(r, (c, n))| (r, c as f64 / n as f64))
        .collect();
    let mi_batches: usize = role_mi_acc.values().map(|v| v.1).sum();
    let mi_total: f64 = role_mi_acc.values().map(|v| v.0).sum();
    let role_mi = role_mi_acc
        .into_iter()
        .map(|(r, (s, n))| (r, s / n as f64))
        .collect();
    Ok(EvalReport {
        recalls,
        role_accuracy,
        confusion,
        role_mi,
        mean_mi: (mi_batches > 0).then(|| mi_total / mi_batches as f64),
        mi_batches,
        settings: *settings,
        config: Vec::new(),
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

impl EvalReport {
    pub fn with_config(mut self, config: Vec<(String, String)>) -> Self {
        self.config = config;
        self
    }

    /// Unweighted mean of the recall cells of `role`.
    pub fn mean_recall(&self, role: Role) -> Option<f64> {
        let cells: Vec<f64> = self
            .recalls
            .iter()
            .filter(|c| c.role == role)
            .map(|c| c.recall)
            .collect();
        (!cells.is_empty()).then(|| cells.iter().sum::<f64>() / cells.len() as f64)
    }

    pub fn recall(&self, domain: &str, class: usize) -> Option<f64> {
        self.recalls
            .iter()
            .find(|c| c.domain == domain && c.class == class)
            .map(|c| c.recall)
    }

    /// Section-structured text document. Runtime is left out so that the
    /// document is a pure function of its inputs.
    pub fn to_document(&self) -> String {
        let mut out = String::from("# metric: per-class recall (detection rate)\n[config]\n");
        for (k, v) in &self.config {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out.push_str("\n[mi]\n");
        writeln!(out, "input_bandwidth = {}", self.settings.input_bandwidth).unwrap();
        writeln!(out, "latent_bandwidth = {}", self.settings.latent_bandwidth).unwrap();
        writeln!(out, "batch_size = {}", self.settings.batch_size).unwrap();
        writeln!(out, "batches = {}", self.mi_batches).unwrap();
        if let Some(m) = self.mean_mi {
            writeln!(out, "mean_bits = {m}").unwrap();
        }
        for (r, v) in &self.role_mi {
            writeln!(out, "{r}_bits = {v}").unwrap();
        }
        out.push_str("\n[accuracy]\n");
        for (r, v) in &self.role_accuracy {
            writeln!(out, "{r} = {v}").unwrap();
        }
        out.push_str("\n[mean_recall]\n");
        for r in Role::ALL {
            if let Some(v) = self.mean_recall(r) {
                writeln!(out, "{r} = {v}").unwrap();
            }
        }
        out.push_str("\n[recall]\n");
        for c in &self.recalls {
            writeln!(out, "{}.{} = {}", c.domain, c.class, c.recall).unwrap();
        }
        out
    }

    pub fn recall_csv(&self) -> String {
        let mut out = String::from("domain,role,class,support,correct,recall\n");
        for c in &self.recalls {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c.domain, c.role, c.class, c.support, c.correct, c.recall
            )
            .unwrap();
        }
        out
    }

    pub fn confusion_csv(&self) -> String {
        let k = self.confusion.len();
        let mut out = String::from("true");
        for p in 0..k {
            write!(out, ",pred_{p}").unwrap();
        }
        out.push('\n');
        for (t, row) in self.confusion.iter().enumerate() {
            write!(out, "{t}").unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Pearson correlation of the feature columns. Constant features get 0 off
/// the diagonal; the diagonal is exactly 1.
pub fn correlation_matrix(dataset: &DomainDataset) -> Result<DenseMatrix> {
    let x = &dataset.features;
    let n = x.rows();
    if n < 2 {
        return Err(Error::TooFewSamples {
            op: "correlation_matrix",
            need: 2,
            got: n,
        });
    }
    let d = x.cols();
    let means = x.column_means();
    let mut cov = DenseMatrix::zeros(d, d);
    for row in x.row_iter() {
        for i in 0..d {
            let ci = row[i] - means[i];
            for j in i..d {
                cov[(i, j)] += ci * (row[j] - means[j]);
            }
        }
    }
    let sd: Vec<f64> = (0..d).map(|i| cov[(i, i)].sqrt()).collect();
    let mut out = DenseMatrix::identity(d);
    for i in 0..d {
        for j in i + 1..d {
            let denom = sd[i] * sd[j];
            let r = if denom > 0.0 {
                (cov[(i, j)] / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            out[(i, j)] = r;
            out[(j, i)] = r;
        }
    }
    Ok(out)
}

pub fn correlation_csv(names: &[String], corr: &DenseMatrix) -> String {
    let mut out = String::from("feature");
    for n in names {
        write!(out, ",{n}").unwrap();
    }
    out.push('\n');
    for (n, row) in names.iter().zip(corr.row_iter()) {
        out.push_str(n);
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecallDelta {
    pub domain: String,
    pub role: Role,
    pub class: usize,
    pub a: f64,
    pub b: f64,
    /// `a − b`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunComparison {
    pub cells: Vec<RecallDelta>,
    /// Per role: unweighted means of `a`, `b` and `delta` over member cells.
    pub role_means: BTreeMap<Role, (f64, f64, f64)>,
}

impl RunComparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain,role,class,a,b,delta\n");
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c.domain, c.role, c.class, c.a, c.b, c.delta
            )
            .unwrap();
        }
        out
    }
}

/// Cell-by-cell recall differences `a − b`. Both reports must cover the same cells.
pub fn compare_runs(a: &EvalReport, b: &EvalReport) -> Result<RunComparison> {
    let key = |c: &ClassRecall| (c.domain.clone(), c.role, c.class);
    let a_keys: Vec<_> = a.recalls.iter().map(key).collect();
    let b_keys: Vec<_> = b.recalls.iter().map(key).collect();
    if a_keys != b_keys {
        return Err(Error::Data(
            "reports cover different (domain, class) cells".into(),
        ));
    }
    let cells: Vec<RecallDelta> = a
        .recalls
        .iter()
        .zip(&b.recalls)
        .map(|(x, y)| RecallDelta {
            domain: x.domain.clone(),
            role: x.role,
            class: x.class,
            a: x.recall,
            b: y.recall,
            delta: x.recall - y.recall,
        })
        .collect();
    let mut sums: BTreeMap<Role, (f64, f64, f64, usize)> = BTreeMap::new();
    for c in &cells {
        let s = sums.entry(c.role).or_default();
        s.0 += c.a;
        s.1 += c.b;
        s.2 += c.delta;
        s.3 += 1;
    }
    let role_means = sums
        .into_iter()
        .map(|(r, (sa, sb, sd, n))| {
            let n = n as f64;
            (r, (sa / n, sb / n, sd / n))
        })
        .collect();
    Ok(RunComparison { cells, role_means })
}
