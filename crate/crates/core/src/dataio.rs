//! Dataset ingestion, standardization and the synthetic multi-domain generator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::densemath::DenseMatrix;
use crate::error::{Error, Result};
use crate::neuralnet::{encode, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Source,
    Cross,
    Ood,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Source, Role::Cross, Role::Ood];

    pub fn name(self) -> &'static str {
        match self {
            Role::Source => "source",
            Role::Cross => "cross",
            Role::Ood => "ood",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::param("role", format!("unknown role `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub name: String,
    pub role: Role,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
}

impl DomainDataset {
    pub fn new(
        name: impl Into<String>,
        role: Role,
        features: DenseMatrix,
        labels: Vec<usize>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        if features.rows() != labels.len() {
            return Err(Error::Data(format!(
                "dataset {name}: {} rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::Data(format!(
                "dataset {name}: {} feature names for {} columns",
                feature_names.len(),
                features.cols()
            )));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite {
                context: format!("dataset {name}"),
            });
        }
        Ok(Self {
            name,
            role,
            features,
            labels,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            role: self.role,
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Writes `features…, label, domain` with shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for name in &self.feature_names {
            out.push_str(name);
            out.push(',');
        }
        out.push_str("label,domain\n");
        for (row, y) in self.features.row_iter().zip(&self.labels) {
            for v in row {
                write!(out, "{v},").unwrap();
            }
            writeln!(out, "{y},{}", self.name).unwrap();
        }
        out
    }
}

/// How raw label cells map to class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelMap {
    /// Cells are non-negative integers used as-is.
    Integer { classes: usize },
    /// Distinct strings in sorted order.
    Named(Vec<String>),
    /// `negative` → 0, anything else → 1.
    Binary { negative: String },
}

impl LabelMap {
    /// Integer labels when every cell parses as one, otherwise sorted distinct names.
    pub fn infer<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        let labels: Vec<&str> = labels.into_iter().collect();
        let ints: Option<Vec<usize>> = labels.iter().map(|s| s.trim().parse().ok()).collect();
        match ints {
            Some(v) => LabelMap::Integer {
                classes: v.iter().max().map_or(0, |m| m + 1),
            },
            None => {
                let set: BTreeSet<String> = labels.iter().map(|s| s.trim().to_string()).collect();
                LabelMap::Named(set.into_iter().collect())
            }
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            LabelMap::Integer { classes } => *classes,
            LabelMap::Named(names) => names.len(),
            LabelMap::Binary { .. } => 2,
        }
    }

    pub fn encode(&self, raw: &str) -> Result<usize> {
        let raw = raw.trim();
        match self {
            LabelMap::Integer { classes } => raw
                .parse::<usize>()
                .ok()
                .filter(|v| v < classes)
                .ok_or_else(|| {
                    Error::Data(format!("label `{raw}` is not an integer below {classes}"))
                }),
            LabelMap::Named(names) => names
                .binary_search_by(|n| n.as_str().cmp(raw))
                .map_err(|_| Error::Data(format!("unknown label `{raw}`"))),
            LabelMap::Binary { negative } => Ok(usize::from(raw != negative)),
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        match self {
            LabelMap::Integer { classes } => (0..*classes).map(|c| c.to_string()).collect(),
            LabelMap::Named(names) => names.clone(),
            LabelMap::Binary { negative } => vec![negative.clone(), format!("not-{negative}")],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub domain: Option<String>,
    pub label: String,
    pub features: Vec<f64>,
}

/// Parsed CSV before label encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub path: PathBuf,
    pub feature_names: Vec<String>,
    pub rows: Vec<CsvRow>,
    /// Rows dropped for non-numeric or non-finite feature cells.
    pub dropped_rows: usize,
}

impl CsvTable {
    /// Splits rows into one dataset per domain value, in order of first appearance.
    /// Without a domain column the file stem names the single dataset.
    pub fn into_datasets(&self, labels: &LabelMap) -> Result<Vec<DomainDataset>> {
        let default_name = self
            .path
            .file_stem()
            .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
        let mut order: Vec<String> = Vec::new();
        let mut groups: HashMap<String, (Vec<f64>, Vec<usize>)> = HashMap::new();
        for row in &self.rows {
            let key = row.domain.clone().unwrap_or_else(|| default_name.clone());
            let entry = groups.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                (Vec::new(), Vec::new())
            });
            entry.0.extend_from_slice(&row.features);
            entry.1.push(labels.encode(&row.label)?);
        }
        let d = self.feature_names.len();
        order
            .into_iter()
            .map(|name| {
                let (data, y) = groups.remove(&name).expect("grouped above");
                let x = DenseMatrix::from_vec(y.len(), d, data)?;
                DomainDataset::new(name, Role::Source, x, y, self.feature_names.clone())
            })
            .collect()
    }
}

fn find_column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Data(format!("{}: missing column `{name}`", path.display())))
}

/// Reads a header-first, comma-separated file. Every column other than the
/// label and domain columns is a numeric feature.
pub fn read_csv_table(
    path: impl AsRef<Path>,
    label_column: &str,
    domain_column: Option<&str>,
) -> Result<CsvTable> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.is_empty() {
        return Err(Error::Data(format!("{}: empty file", path.display())));
    }
    let label_idx = find_column(&headers, label_column, path)?;
    let domain_idx = domain_column
        .map(|d| find_column(&headers, d, path))
        .transpose()?;
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && Some(i) != domain_idx)
        .collect();
    let feature_names = feature_idx
        .iter()
        .map(|&i| headers[i].trim().to_string())
        .collect();

    let mut rows = Vec::new();
    let mut dropped_rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let features: Option<Vec<f64>> = feature_idx
            .iter()
            .map(|&i| {
                record[i]
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
            })
            .collect();
        match features {
            Some(features) => rows.push(CsvRow {
                domain: domain_idx.map(|i| record[i].trim().to_string()),
                label: record[label_idx].trim().to_string(),
                features,
            }),
            None => dropped_rows += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::Data(format!(
            "{}: no usable rows ({dropped_rows} dropped)",
            path.display()
        )));
    }
    Ok(CsvTable {
        path: path.to_path_buf(),
        feature_names,
        rows,
        dropped_rows,
    })
}

/// Reads a header-first CSV whose columns, apart from `skip`, are all numeric.
/// Rows with a non-numeric or non-finite cell are dropped; returns the kept
/// names, the matrix and the drop count.
pub fn read_numeric_csv(
    path: impl AsRef<Path>,
    skip: &[&str],
) -> Result<(Vec<String>, DenseMatrix, usize)> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    for col in skip {
        find_column(&headers, col, path)?;
    }
    let keep: Vec<usize> = (0..headers.len())
        .filter(|&i| !skip.contains(&headers[i].trim()))
        .collect();
    let names: Vec<String> = keep
        .iter()
        .map(|&i| headers[i].trim().to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::Data(format!(
            "{}: no numeric columns",
            path.display()
        )));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    let mut dropped = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let vals: Option<Vec<f64>> = keep
            .iter()
            .map(|&i| {
                record
                    .get(i)
                    .and_then(|c| c.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
            })
            .collect();
        match vals {
            Some(v) => {
                data.extend(v);
                rows += 1;
            }
            None => dropped += 1,
        }
    }
    if rows == 0 {
        return Err(Error::Data(format!(
            "{}: no usable rows ({dropped} dropped)",
            path.display()
        )));
    }
    let cols = names.len();
    Ok((names, DenseMatrix::from_vec(rows, cols, data)?, dropped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCsv {
    pub datasets: Vec<DomainDataset>,
    pub labels: LabelMap,
    pub dropped_rows: usize,
}

/// Loads one file into per-domain datasets, inferring the label encoding from the file.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    domain_column: Option<&str>,
) -> Result<LoadedCsv> {
    let table = read_csv_table(path, label_column, domain_column)?;
    let labels = LabelMap::infer(table.rows.iter().map(|r| r.label.as_str()));
    Ok(LoadedCsv {
        datasets: table.into_datasets(&labels)?,
        labels,
        dropped_rows: table.dropped_rows,
    })
}

/// Per-feature affine standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population (n-denominator) std; 1 for constant features.
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit<'a>(pool: impl IntoIterator<Item = &'a DenseMatrix>) -> Result<Self> {
        let parts: Vec<&DenseMatrix> = pool.into_iter().collect();
        let stacked = DenseMatrix::vstack(&parts)?;
        if stacked.rows() == 0 {
            return Err(Error::TooFewSamples {
                op: "fit_standardizer",
                need: 1,
                got: 0,
            });
        }
        let n = stacked.rows() as f64;
        let mean = stacked.column_means();
        let mut var = vec![0.0; stacked.cols()];
        for r in stacked.row_iter() {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let mut std = Vec::with_capacity(var.len());
        let mut constant = Vec::with_capacity(var.len());
        for v in var {
            let s = (v / n).sqrt();
            let is_const = !(s > 1e-12 * 1f64.max(s));
            constant.push(is_const);
            std.push(if is_const { 1.0 } else { s });
        }
        Ok(Self {
            mean,
            std,
            constant,
        })
    }

    pub fn transform(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::ShapeMismatch {
                op: "standardize",
                left: x.shape(),
                right: (x.rows(), self.mean.len()),
            });
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn apply(&self, dataset: &DomainDataset) -> Result<DomainDataset> {
        Ok(DomainDataset {
            features: self.transform(&dataset.features)?,
            ..dataset.clone()
        })
    }
}

pub fn fit_standardizer(pool: &[DomainDataset]) -> Result<Standardizer> {
    Standardizer::fit(pool.iter().map(|d| &d.features))
}

pub fn apply_standardizer(std: &Standardizer, dataset: &DomainDataset) -> Result<DomainDataset> {
    std.apply(dataset)
}

/// Multi-domain binary data with an invariant signal block and a per-domain spurious block.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_per_domain: usize,
    pub signal_dims: usize,
    pub spurious_dims: usize,
    pub noise_dims: usize,
    pub signal_strength: f64,
    pub spurious_strength: f64,
    pub noise_scale: f64,
    pub n_source_domains: usize,
    pub n_cross_domains: usize,
    pub n_ood_domains: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_per_domain: 2000,
            signal_dims: 4,
            spurious_dims: 8,
            noise_dims: 4,
            signal_strength: 1.0,
            spurious_strength: 2.0,
            noise_scale: 1.0,
            n_source_domains: 1,
            n_cross_domains: 2,
            n_ood_domains: 2,
            seed: 0,
        }
    }
}

const SYNTH_KEYS: [&str; 11] = [
    "n_per_domain",
    "signal_dims",
    "spurious_dims",
    "noise_dims",
    "signal_strength",
    "spurious_strength",
    "noise_scale",
    "n_source_domains",
    "n_cross_domains",
    "n_ood_domains",
    "seed",
];

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_per_domain", self.n_per_domain),
            ("signal_dims", self.signal_dims),
            ("spurious_dims", self.spurious_dims),
            ("noise_dims", self.noise_dims),
            ("n_source_domains", self.n_source_domains),
            ("n_ood_domains", self.n_ood_domains),
        ] {
            if v < 1 {
                return Err(Error::param(name, "must be >= 1"));
            }
        }
        for (name, v) in [
            ("signal_strength", self.signal_strength),
            ("spurious_strength", self.spurious_strength),
            ("noise_scale", self.noise_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.signal_dims + self.spurious_dims + self.noise_dims
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_features());
        names.extend((0..self.signal_dims).map(|i| format!("signal_{i}")));
        names.extend((0..self.spurious_dims).map(|i| format!("spurious_{i}")));
        names.extend((0..self.noise_dims).map(|i| format!("noise_{i}")));
        names
    }

    /// `(name, role)` of every generated domain in generation order.
    pub fn domains(&self) -> Vec<(String, Role)> {
        let mut out = Vec::new();
        out.extend((0..self.n_source_domains).map(|i| (format!("source_{i}"), Role::Source)));
        out.extend((0..self.n_cross_domains).map(|i| (format!("cross_{i}"), Role::Cross)));
        out.extend((0..self.n_ood_domains).map(|i| (format!("ood_{i}"), Role::Ood)));
        out
    }

    /// `key = value` lines, one per field.
    pub fn to_manifest(&self) -> String {
        let values = [
            self.n_per_domain.to_string(),
            self.signal_dims.to_string(),
            self.spurious_dims.to_string(),
            self.noise_dims.to_string(),
            self.signal_strength.to_string(),
            self.spurious_strength.to_string(),
            self.noise_scale.to_string(),
            self.n_source_domains.to_string(),
            self.n_cross_domains.to_string(),
            self.n_ood_domains.to_string(),
            self.seed.to_string(),
        ];
        let mut out = String::from("[synth]\n");
        for (k, v) in SYNTH_KEYS.iter().zip(values) {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    /// Applies `key = value` pairs on top of the defaults. Unknown keys are errors.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut spec = SynthSpec::default();
        for (k, v) in pairs {
            let bad = |_| Error::param(k, format!("cannot parse `{v}`"));
            match k {
                "n_per_domain" => spec.n_per_domain = v.parse().map_err(bad)?,
                "signal_dims" => spec.signal_dims = v.parse().map_err(bad)?,
                "spurious_dims" => spec.spurious_dims = v.parse().map_err(bad)?,
                "noise_dims" => spec.noise_dims = v.parse().map_err(bad)?,
                "signal_strength" => {
                    spec.signal_strength = v.parse().map_err(|_| Error::param(k, v))?
                }
                "spurious_strength" => {
                    spec.spurious_strength = v.parse().map_err(|_| Error::param(k, v))?
                }
                "noise_scale" => spec.noise_scale = v.parse().map_err(|_| Error::param(k, v))?,
                "n_source_domains" => spec.n_source_domains = v.parse().map_err(bad)?,
                "n_cross_domains" => spec.n_cross_domains = v.parse().map_err(bad)?,
                "n_ood_domains" => spec.n_ood_domains = v.parse().map_err(bad)?,
                "seed" => spec.seed = v.parse().map_err(bad)?,
                other => return Err(Error::param(other, "unknown synth key")),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Parses the output of [`SynthSpec::to_manifest`]; other sections are ignored.
    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut in_synth = false;
        let mut pairs = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                in_synth = line == "[synth]";
                continue;
            }
            if in_synth {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Data(format!("malformed manifest line `{line}`")))?;
                pairs.push((k.trim(), v.trim()));
            }
        }
        Self::from_pairs(pairs)
    }
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generates every domain of `spec`.
///
/// Rows are `[signal | spurious | noise]`. The signal block is `y·μ·u + ε`
/// with one unit vector `u` for all domains. The spurious block is `y·c·v_d + ε`
/// with a unit vector per source/cross domain; OOD domain `k` uses the
/// negation of source domain `k mod n_source`'s vector. Labels are balanced.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<DomainDataset>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let u = unit_vector(spec.signal_dims, &mut rng);
    let n_train = spec.n_source_domains + spec.n_cross_domains;
    let train_dirs: Vec<Vec<f64>> = (0..n_train)
        .map(|_| unit_vector(spec.spurious_dims, &mut rng))
        .collect();

    let names = spec.feature_names();
    let d = spec.n_features();
    let n = spec.n_per_domain;
    let mut out = Vec::new();
    for (k, (name, role)) in spec.domains().into_iter().enumerate() {
        let v: Vec<f64> = if k < n_train {
            train_dirs[k].clone()
        } else {
            let src = (k - n_train) % spec.n_source_domains;
            train_dirs[src].iter().map(|x| -x).collect()
        };
        let mut labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
        labels.shuffle(&mut rng);
        let mut data = Vec::with_capacity(n * d);
        for &y in &labels {
            let yf = y as f64;
            for &uj in &u {
                let e: f64 = StandardNormal.sample(&mut rng);
                data.push(yf * spec.signal_strength * uj + spec.noise_scale * e);
            }
            for &vj in &v {
                let e: f64 = StandardNormal.sample(&mut rng);
                data.push(yf * spec.spurious_strength * vj + spec.noise_scale * e);
            }
            for _ in 0..spec.noise_dims {
                let e: f64 = StandardNormal.sample(&mut rng);
                data.push(spec.noise_scale * e);
            }
        }
        let x = DenseMatrix::from_vec(n, d, data)?;
        out.push(DomainDataset::new(name, role, x, labels, names.clone())?);
    }
    Ok(out)
}

/// Writes one CSV per domain plus `manifest.txt`. Returns the written paths.
pub fn write_synthetic(spec: &SynthSpec, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let datasets = generate_synthetic(spec)?;
    let mut paths = Vec::new();
    let mut manifest = spec.to_manifest();
    manifest.push_str("\n[files]\n");
    for ds in &datasets {
        let file = format!("{}.csv", ds.name);
        let path = dir.join(&file);
        fs::write(&path, ds.to_csv()).map_err(|e| Error::io(&path, e))?;
        writeln!(manifest, "{} = {} {}", ds.name, ds.role, file).unwrap();
        paths.push(path);
    }
    let mpath = dir.join("manifest.txt");
    fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))?;
    paths.push(mpath);
    Ok(paths)
}

/// CSV of latent codes: `domain, role, label, z_1 … z_dz`.
pub fn export_latents(model: &MlpModel, datasets: &[DomainDataset]) -> Result<String> {
    let dz = model.latent_dim();
    let mut out = String::from("domain,role,label");
    for i in 1..=dz {
        write!(out, ",z_{i}").unwrap();
    }
    out.push('\n');
    for ds in datasets {
        let z = encode(model, &ds.features)?;
        for (row, y) in z.row_iter().zip(&ds.labels) {
            write!(out, "{},{},{}", ds.name, ds.role, y).unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// Parses an [`export_latents`] dump back into per-domain latent matrices.
pub fn parse_latents(text: &str) -> Result<BTreeMap<String, DenseMatrix>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let mut rows: BTreeMap<String, (usize, Vec<f64>)> = BTreeMap::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(e.to_string()))?;
        let vals: Vec<f64> = record
            .iter()
            .skip(3)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Data(format!("bad latent value `{v}`")))
            })
            .collect::<Result<_>>()?;
        width = Some(vals.len());
        let entry = rows.entry(record[0].to_string()).or_default();
        entry.0 += 1;
        entry.1.extend(vals);
    }
    let width = width.unwrap_or(0);
    rows.into_iter()
        .map(|(k, (n, data))| Ok((k, DenseMatrix::from_vec(n, width, data)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{init_model, Dense, LayerSpec};
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_small_fixture() {
        let f = write_tmp("a,b,label\n1.0,2.0,0\n3,4,1\n-5,6e-1,1\n");
        let loaded = load_csv(f.path(), "label", None).unwrap();
        assert_eq!(loaded.datasets.len(), 1);
        let ds = &loaded.datasets[0];
        assert_eq!(ds.features.shape(), (3, 2));
        assert_eq!(ds.labels, vec![0, 1, 1]);
        assert_eq!(ds.features.row(2), &[-5.0, 0.6]);
        assert_eq!(ds.feature_names, vec!["a", "b"]);
        assert_eq!(loaded.dropped_rows, 0);
    }

    #[test]
    fn nan_rows_are_dropped_and_counted() {
        let f = write_tmp("a,b,label\n1,2,0\nNaN,4,1\n5,6,1\n7,x,0\n");
        let loaded = load_csv(f.path(), "label", None).unwrap();
        assert_eq!(loaded.datasets[0].len(), 2);
        assert_eq!(loaded.dropped_rows, 2);
        let f = write_tmp("a,b,label\n1,2,0\nNaN,4,1\n5,6,1\n");
        assert_eq!(load_csv(f.path(), "label", None).unwrap().dropped_rows, 1);
    }

    #[test]
    fn domains_and_string_labels() {
        let f = write_tmp("x,Label,dom\n1,BENIGN,a\n2,DDOS,b\n3,BENIGN,b\n4,WEB,a\n");
        let loaded = load_csv(f.path(), "Label", Some("dom")).unwrap();
        assert_eq!(
            loaded.labels,
            LabelMap::Named(vec!["BENIGN".into(), "DDOS".into(), "WEB".into()])
        );
        let names: Vec<_> = loaded.datasets.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, vec!["a", "b"]);
        assert_eq!(loaded.datasets[0].labels, vec![0, 2]);
        assert_eq!(loaded.datasets[1].labels, vec![1, 0]);
        let bin = LabelMap::Binary {
            negative: "BENIGN".into(),
        };
        assert_eq!(bin.encode("BENIGN").unwrap(), 0);
        assert_eq!(bin.encode("WEB").unwrap(), 1);
    }

    #[test]
    fn load_errors() {
        let f = write_tmp("a,b\n1,2\n");
        assert!(load_csv(f.path(), "label", None).is_err());
        let f = write_tmp("");
        assert!(load_csv(f.path(), "label", None).is_err());
        let f = write_tmp("a,label\nx,0\n");
        assert!(load_csv(f.path(), "label", None).is_err());
        assert!(load_csv("/nonexistent/file.csv", "label", None).is_err());
    }

    #[test]
    fn numeric_csv() {
        let f = write_tmp("a,b\n1,2\n3,inf\n5,6\n");
        let (names, x, dropped) = read_numeric_csv(f.path(), &[]).unwrap();
        assert_eq!(names, vec!["a", "b"]);
        assert_eq!(
            x,
            DenseMatrix::from_rows(&[[1.0, 2.0], [5.0, 6.0]]).unwrap()
        );
        assert_eq!(dropped, 1);
        let f = write_tmp("a,dom,b\n1,x,2\n3,y,4\n");
        assert!(read_numeric_csv(f.path(), &[]).is_err());
        let (names, x, _) = read_numeric_csv(f.path(), &["dom"]).unwrap();
        assert_eq!(names, vec!["a", "b"]);
        assert_eq!(
            x,
            DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap()
        );
        assert!(read_numeric_csv(f.path(), &["missing"]).is_err());
    }

    #[test]
    fn standardizer_cases() {
        let x = DenseMatrix::from_rows(&[[0.0, 3.0], [10.0, 3.0]]).unwrap();
        let s = Standardizer::fit([&x]).unwrap();
        assert_eq!(s.constant, vec![false, true]);
        let t = s.transform(&x).unwrap();
        assert_eq!(
            t,
            DenseMatrix::from_rows(&[[-1.0, 0.0], [1.0, 0.0]]).unwrap()
        );
        // idempotent on standardized data
        let s2 = Standardizer::fit([&t]).unwrap();
        let t2 = s2.transform(&t).unwrap();
        for (a, b) in t.as_slice().iter().zip(t2.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert!(Standardizer::fit([&DenseMatrix::zeros(0, 2)]).is_err());
    }

    #[test]
    fn synthetic_is_reproducible_and_balanced() {
        let spec = SynthSpec {
            n_per_domain: 101,
            ..SynthSpec::default()
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        for ds in &a {
            let ones = ds.labels.iter().filter(|&&y| y == 1).count();
            assert_eq!(ones, 51);
            assert_eq!(ds.n_features(), 16);
        }
        let roles: Vec<_> = a.iter().map(|d| d.role).collect();
        assert_eq!(
            roles,
            vec![Role::Source, Role::Cross, Role::Cross, Role::Ood, Role::Ood]
        );
    }

    #[test]
    fn synthetic_rejects_invalid_spec() {
        let spec = SynthSpec {
            signal_dims: 0,
            ..SynthSpec::default()
        };
        assert!(generate_synthetic(&spec).is_err());
        let spec = SynthSpec {
            spurious_strength: 0.0,
            ..SynthSpec::default()
        };
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let spec = SynthSpec {
            seed: 17,
            signal_strength: 1.25,
            ..SynthSpec::default()
        };
        let text = spec.to_manifest();
        assert_eq!(SynthSpec::from_manifest(&text).unwrap(), spec);
        assert!(SynthSpec::from_pairs([("bogus", "1")]).is_err());
    }

    #[test]
    fn latent_export_round_trip() {
        let specs = LayerSpec::encoder_from_dims(&[16, 6, 3]).unwrap();
        let model = init_model(&specs, 2, 2).unwrap();
        let spec = SynthSpec {
            n_per_domain: 20,
            ..SynthSpec::default()
        };
        let data = generate_synthetic(&spec).unwrap();
        let text = export_latents(&model, &data).unwrap();
        let parsed = parse_latents(&text).unwrap();
        assert_eq!(parsed.len(), data.len());
        for ds in &data {
            let z = encode(&model, &ds.features).unwrap();
            assert_eq!(parsed[&ds.name], z);
        }
        let mut zero = model.clone();
        for l in zero.encoder.iter_mut() {
            *l = Dense::zeros(l.spec());
        }
        let parsed = parse_latents(&export_latents(&zero, &data).unwrap()).unwrap();
        assert!(parsed.values().all(|z| z.max_abs() == 0.0));
    }

    #[test]
    fn csv_round_trip_is_a_fixed_point() {
        let spec = SynthSpec {
            n_per_domain: 30,
            ..SynthSpec::default()
        };
        let ds = &generate_synthetic(&spec).unwrap()[0];
        let text = ds.to_csv();
        let f = write_tmp(&text);
        let loaded = load_csv(f.path(), "label", Some("domain")).unwrap();
        assert_eq!(loaded.datasets[0].features, ds.features);
        assert_eq!(loaded.datasets[0].labels, ds.labels);
        assert_eq!(loaded.datasets[0].to_csv(), text);
    }
}
