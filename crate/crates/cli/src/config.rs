//! Experiment configuration: line-oriented `[section]` blocks of `key = value`.
//!
//! Every accepted key is listed in [`SCHEMA`]; anything else is rejected.
//! Validation collects all problems before failing.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use mireg::dataio::{Role, SynthSpec};
use mireg::objectives::ObjectiveKind;

pub const MIN_BANDWIDTH: f64 = 0.01;
pub const MAX_BANDWIDTH: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Text,
    TextList,
    Count,
    CountList,
    Real,
    RealList,
    Topology,
}

impl ValueKind {
    fn label(self) -> &'static str {
        match self {
            ValueKind::Text => "text",
            ValueKind::TextList => "comma-separated text",
            ValueKind::Count => "integer",
            ValueKind::CountList => "comma-separated integers",
            ValueKind::Real => "real",
            ValueKind::RealList => "comma-separated reals",
            ValueKind::Topology => "dash-separated widths",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub section: &'static str,
    pub key: &'static str,
    pub kind: ValueKind,
    pub required: bool,
    /// Inclusive numeric bounds, applied to every element of a list.
    pub range: Option<(f64, f64)>,
    pub doc: &'static str,
}

const fn key(
    section: &'static str,
    key: &'static str,
    kind: ValueKind,
    required: bool,
    range: Option<(f64, f64)>,
    doc: &'static str,
) -> KeySpec {
    KeySpec {
        section,
        key,
        kind,
        required,
        range,
        doc,
    }
}

use ValueKind::*;

pub const SCHEMA: &[KeySpec] = &[
    key("data", "files", TextList, true, None, "CSV files, relative to the config file"),
    key("data", "label_column", Text, false, None, "label column name (default `label`)"),
    key("data", "domain_column", Text, false, None, "column naming the domain of each row; without it each file is one domain named by its stem"),
    key("data", "label_mode", Text, false, None, "`multiclass` (default) or `binary`"),
    key("data", "negative_label", Text, false, None, "class mapped to 0 in binary mode; required there"),
    key("synth", "n_per_domain", Count, false, Some((2.0, 1e7)), "rows per generated domain"),
    key("synth", "signal_dims", Count, false, Some((1.0, 1e4)), "invariant signal features"),
    key("synth", "spurious_dims", Count, false, Some((1.0, 1e4)), "per-domain spurious features"),
    key("synth", "noise_dims", Count, false, Some((1.0, 1e4)), "pure noise features"),
    key("synth", "signal_strength", Real, false, Some((1e-9, 1e3)), "signal mean shift"),
    key("synth", "spurious_strength", Real, false, Some((1e-9, 1e3)), "spurious mean shift"),
    key("synth", "noise_scale", Real, false, Some((1e-9, 1e3)), "noise standard deviation"),
    key("synth", "n_source_domains", Count, false, Some((1.0, 1e3)), "source domains"),
    key("synth", "n_cross_domains", Count, false, Some((0.0, 1e3)), "cross domains"),
    key("synth", "n_ood_domains", Count, false, Some((1.0, 1e3)), "out-of-distribution domains"),
    key("synth", "seed", Count, false, None, "generator seed"),
    key("roles", "source", TextList, false, None, "source domains"),
    key("roles", "cross", TextList, false, None, "cross domains, sampled by the mixing fraction"),
    key("roles", "ood", TextList, false, None, "held-out domains, evaluation only"),
    key("model", "topology", Topology, true, Some((1.0, 1e5)), "encoder widths from input to latent, e.g. 79-30-15"),
    key("objective", "kinds", TextList, true, None, "any of mtls_red, dmtae, mmd_ae, coral, nsae"),
    key("objective", "beta", Real, false, Some((0.0, 1e3)), "MI weight (mtls_red) or CORAL weight; default 2"),
    key("objective", "lambda", Real, false, Some((0.0, 1e3)), "reconstruction weight; default 0.6"),
    key("objective", "lambda2", Real, false, Some((0.0, 1e3)), "MMD or second-reconstruction weight; default 0.6"),
    key("objective", "bandwidths", RealList, true, Some((MIN_BANDWIDTH, MAX_BANDWIDTH)), "input-kernel bandwidth grid"),
    key("objective", "latent_bandwidth", Real, false, Some((MIN_BANDWIDTH, MAX_BANDWIDTH)), "latent-kernel bandwidth; default equals the input bandwidth"),
    key("objective", "mmd_bandwidth", Real, false, Some((MIN_BANDWIDTH, MAX_BANDWIDTH)), "MMD kernel bandwidth; default equals the latent bandwidth"),
    key("train", "epochs", Count, false, Some((0.0, 1e6)), "passes over the pool; default 100"),
    key("train", "batch_size", Count, false, Some((2.0, 1e6)), "rows per batch; default 200"),
    key("train", "lr_encoder", Real, false, Some((1e-12, 10.0)), "encoder and classifier step size; default 0.005"),
    key("train", "lr_decoder", Real, false, Some((1e-12, 10.0)), "decoder step size; default 0.005"),
    key("train", "fractions", RealList, false, Some((0.0, 0.5)), "cross-domain mixing grid; default 0"),
    key("train", "seeds", CountList, false, None, "seed grid; default 0"),
    key("train", "log_every", Count, false, Some((1.0, 1e9)), "trace every n-th step; default 1"),
];

pub const SECTIONS: &[&str] = &["data", "synth", "roles", "model", "objective", "train"];

/// Markdown rendering of [`SCHEMA`], shipped as `configs/SCHEMA.md`.
pub fn schema_markdown() -> String {
    let mut out = String::from(
        "# Experiment config schema\n\n\
         Sections hold `key = value` lines; `#` starts a comment. Unknown sections or keys,\n\
         duplicate keys and out-of-range values are errors. Exactly one of `[data]` and\n\
         `[synth]` must be present.\n",
    );
    for section in SECTIONS {
        write!(out, "\n## [{section}]\n\n| key | type | required | range | meaning |\n|---|---|---|---|---|\n").unwrap();
        for k in SCHEMA.iter().filter(|k| k.section == *section) {
            let range = k
                .range
                .map_or_else(String::new, |(lo, hi)| format!("{lo} to {hi}"));
            writeln!(
                out,
                "| `{}` | {} | {} | {} | {} |",
                k.key,
                k.kind.label(),
                if k.required { "yes" } else { "no" },
                range,
                k.doc
            )
            .unwrap();
        }
    }
    out
}

/// All validation problems of one config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid config ({} problems):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files {
        paths: Vec<PathBuf>,
        label_column: String,
        domain_column: Option<String>,
        binary_negative: Option<String>,
    },
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Explicit role assignment; empty for synthetic data with default roles.
    pub roles: BTreeMap<String, Role>,
    pub topology: Vec<usize>,
    pub kinds: Vec<ObjectiveKind>,
    pub beta: f64,
    pub lambda: f64,
    pub lambda2: f64,
    pub bandwidths: Vec<f64>,
    pub latent_bandwidth: Option<f64>,
    pub mmd_bandwidth: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder: f64,
    pub lr_decoder: f64,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub log_every: usize,
}

type Raw = BTreeMap<String, BTreeMap<String, (String, usize)>>;

fn parse_raw(text: &str, errors: &mut Vec<String>) -> Raw {
    let mut raw: Raw = BTreeMap::new();
    let mut section: Option<String> = None;
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                errors.push(format!("line {lineno}: unknown section [{name}]"));
            } else if raw.contains_key(&name) {
                errors.push(format!("line {lineno}: duplicate section [{name}]"));
            }
            raw.entry(name.clone()).or_default();
            section = Some(name);
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!("line {lineno}: expected `key = value`"));
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let Some(sec) = &section else {
            errors.push(format!("line {lineno}: `{k}` appears before any section"));
            continue;
        };
        if !SECTIONS.contains(&sec.as_str()) {
            continue;
        }
        if !SCHEMA.iter().any(|s| s.section == sec && s.key == k) {
            errors.push(format!("line {lineno}: unknown key `{k}` in [{sec}]"));
            continue;
        }
        let entries = raw.entry(sec.clone()).or_default();
        if entries.contains_key(&k) {
            errors.push(format!("line {lineno}: duplicate key `{sec}.{k}`"));
            continue;
        }
        entries.insert(k, (v, lineno));
    }
    raw
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

struct Reader<'a> {
    raw: &'a Raw,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn spec(section: &str, key: &str) -> &'static KeySpec {
        SCHEMA
            .iter()
            .find(|s| s.section == section && s.key == key)
            .expect("key listed in schema")
    }

    fn get(&self, section: &str, key: &str) -> Option<&(String, usize)> {
        self.raw.get(section).and_then(|s| s.get(key))
    }

    fn check_range(&mut self, section: &str, key: &str, line: usize, v: f64) -> bool {
        if let Some((lo, hi)) = Self::spec(section, key).range {
            if !(lo..=hi).contains(&v) {
                self.errors.push(format!(
                    "line {line}: `{section}.{key}` = {v} is outside [{lo}, {hi}]"
                ));
                return false;
            }
        }
        true
    }

    fn text(&mut self, section: &str, key: &str) -> Option<String> {
        self.get(section, key).map(|(v, _)| v.clone())
    }

    fn texts(&mut self, section: &str, key: &str) -> Option<Vec<String>> {
        let (v, line) = self.get(section, key)?.clone();
        let items = split_list(&v);
        if items.is_empty() {
            self.errors
                .push(format!("line {line}: `{section}.{key}` is empty"));
        }
        Some(items)
    }

    fn reals(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        let (v, line) = self.get(section, key)?.clone();
        let mut out = Vec::new();
        let items = split_list(&v);
        if items.is_empty() {
            self.errors
                .push(format!("line {line}: `{section}.{key}` is empty"));
        }
        for item in items {
            match item.parse::<f64>() {
                Ok(x) if x.is_finite() => {
                    if self.check_range(section, key, line, x) {
                        out.push(x);
                    }
                }
                _ => self.errors.push(format!(
                    "line {line}: `{section}.{key}`: `{item}` is not a real number"
                )),
            }
        }
        Some(out)
    }

    fn real(&mut self, section: &str, key: &str) -> Option<f64> {
        let line = self.get(section, key)?.1;
        let v = self.reals(section, key)?;
        if v.len() > 1 {
            self.errors.push(format!(
                "line {line}: `{section}.{key}` takes a single value"
            ));
        }
        v.first().copied()
    }

    fn counts(&mut self, section: &str, key: &str) -> Option<Vec<u64>> {
        let (v, line) = self.get(section, key)?.clone();
        let mut out = Vec::new();
        let items = split_list(&v);
        if items.is_empty() {
            self.errors
                .push(format!("line {line}: `{section}.{key}` is empty"));
        }
        for item in items {
            match item.parse::<u64>() {
                Ok(x) => {
                    if self.check_range(section, key, line, x as f64) {
                        out.push(x);
                    }
                }
                Err(_) => self.errors.push(format!(
                    "line {line}: `{section}.{key}`: `{item}` is not a non-negative integer"
                )),
            }
        }
        Some(out)
    }

    fn count(&mut self, section: &str, key: &str) -> Option<u64> {
        let line = self.get(section, key)?.1;
        let v = self.counts(section, key)?;
        if v.len() > 1 {
            self.errors.push(format!(
                "line {line}: `{section}.{key}` takes a single value"
            ));
        }
        v.first().copied()
    }

    fn require(&mut self, section: &str, key: &str) {
        if self.get(section, key).is_none() {
            self.errors
                .push(format!("missing required key `{section}.{key}`"));
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates `text`; relative data paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigErrors> {
        let mut errors = Vec::new();
        let raw = parse_raw(text, &mut errors);
        let mut r = Reader { raw: &raw, errors };

        for section in ["model", "objective", "train"] {
            if !raw.contains_key(section) {
                r.errors.push(format!("missing section [{section}]"));
            }
        }
        for spec in SCHEMA.iter().filter(|s| s.required) {
            if raw.contains_key(spec.section) {
                r.require(spec.section, spec.key);
            }
        }

        let data = match (raw.contains_key("data"), raw.contains_key("synth")) {
            (true, true) => {
                r.errors
                    .push("[data] and [synth] are mutually exclusive".into());
                None
            }
            (false, false) => {
                r.errors.push("one of [data] or [synth] is required".into());
                None
            }
            (true, false) => {
                let paths = r
                    .texts("data", "files")
                    .unwrap_or_default()
                    .into_iter()
                    .map(|p| base_dir.join(p))
                    .collect();
                let label_column = r
                    .text("data", "label_column")
                    .unwrap_or_else(|| "label".into());
                let domain_column = r.text("data", "domain_column");
                let mode = r
                    .text("data", "label_mode")
                    .unwrap_or_else(|| "multiclass".into());
                let negative = r.text("data", "negative_label");
                let binary_negative = match mode.as_str() {
                    "multiclass" => {
                        if negative.is_some() {
                            r.errors.push(
                                "`data.negative_label` only applies to binary label_mode".into(),
                            );
                        }
                        None
                    }
                    "binary" => {
                        if negative.is_none() {
                            r.errors
                                .push("binary label_mode requires `data.negative_label`".into());
                        }
                        negative
                    }
                    other => {
                        r.errors.push(format!(
                            "`data.label_mode` must be multiclass or binary, got `{other}`"
                        ));
                        None
                    }
                };
                Some(DataSource::Files {
                    paths,
                    label_column,
                    domain_column,
                    binary_negative,
                })
            }
            (false, true) => {
                let pairs: Vec<(String, String)> = raw["synth"]
                    .iter()
                    .map(|(k, (v, _))| (k.clone(), v.clone()))
                    .collect();
                for (k, (_, _)) in raw["synth"].iter() {
                    let spec = Reader::spec("synth", k);
                    match spec.kind {
                        Count => {
                            r.count("synth", k);
                        }
                        _ => {
                            r.real("synth", k);
                        }
                    }
                }
                match SynthSpec::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))) {
                    Ok(spec) => Some(DataSource::Synth(spec)),
                    Err(e) => {
                        r.errors.push(format!("[synth]: {e}"));
                        None
                    }
                }
            }
        };

        let mut roles = BTreeMap::new();
        for role in Role::ALL {
            for name in r.texts("roles", role.name()).unwrap_or_default() {
                if let Some(prev) = roles.insert(name.clone(), role) {
                    r.errors.push(format!(
                        "domain `{name}` is assigned to both {prev} and {role}"
                    ));
                }
            }
        }
        if matches!(data, Some(DataSource::Files { .. }))
            && !roles.values().any(|&x| x == Role::Source)
        {
            r.errors
                .push("`roles.source` must name at least one domain".into());
        }

        let topology: Vec<usize> = match r.get("model", "topology").cloned() {
            Some((v, line)) => {
                let parts: Vec<Option<usize>> = v
                    .split('-')
                    .map(|p| p.trim().parse::<usize>().ok())
                    .collect();
                if parts.len() < 2 || parts.iter().any(|p| p.is_none_or(|w| w == 0)) {
                    r.errors.push(format!(
                        "line {line}: `model.topology` must be two or more positive widths joined by `-`, got `{v}`"
                    ));
                    Vec::new()
                } else {
                    parts.into_iter().flatten().collect()
                }
            }
            None => Vec::new(),
        };

        let mut kinds = Vec::new();
        for name in r.texts("objective", "kinds").unwrap_or_default() {
            match name.parse::<ObjectiveKind>() {
                Ok(k) if kinds.contains(&k) => r
                    .errors
                    .push(format!("objective kind `{name}` listed twice")),
                Ok(k) => kinds.push(k),
                Err(_) => r.errors.push(format!("unknown objective kind `{name}`")),
            }
        }
        let beta = r.real("objective", "beta").unwrap_or(2.0);
        let lambda = r.real("objective", "lambda").unwrap_or(0.6);
        let lambda2 = r.real("objective", "lambda2").unwrap_or(0.6);
        let bandwidths = r.reals("objective", "bandwidths").unwrap_or_default();
        let latent_bandwidth = r.real("objective", "latent_bandwidth");
        let mmd_bandwidth = r.real("objective", "mmd_bandwidth");

        let epochs = r.count("train", "epochs").unwrap_or(100) as usize;
        let batch_size = r.count("train", "batch_size").unwrap_or(200) as usize;
        let lr_encoder = r.real("train", "lr_encoder").unwrap_or(0.005);
        let lr_decoder = r.real("train", "lr_decoder").unwrap_or(0.005);
        let fractions = r.reals("train", "fractions").unwrap_or_else(|| vec![0.0]);
        let seeds = r.counts("train", "seeds").unwrap_or_else(|| vec![0]);
        let log_every = r.count("train", "log_every").unwrap_or(1) as usize;

        let needs_cross = kinds.iter().any(|k| k.needs_partition());
        if needs_cross && fractions.contains(&0.0) {
            r.errors.push(
                "mmd_ae and coral align source with cross rows; `train.fractions` must not contain 0 for them"
                    .into(),
            );
        }

        match data {
            Some(data) if r.errors.is_empty() => Ok(Self {
                data,
                roles,
                topology,
                kinds,
                beta,
                lambda,
                lambda2,
                bandwidths,
                latent_bandwidth,
                mmd_bandwidth,
                epochs,
                batch_size,
                lr_encoder,
                lr_decoder,
                fractions,
                seeds,
                log_every,
            }),
            _ => Err(ConfigErrors(r.errors)),
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Ok(Self::parse(&text, base)?)
    }

    /// Every `(kind, fraction, seed, bandwidth)` combination, in that nesting order.
    pub fn grid(&self) -> Vec<RunKey> {
        let mut out = Vec::new();
        for &kind in &self.kinds {
            for &fraction in &self.fractions {
                for &seed in &self.seeds {
                    for &bandwidth in &self.bandwidths {
                        out.push(RunKey {
                            kind,
                            fraction,
                            seed,
                            bandwidth,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn latent_bandwidth_for(&self, input_bandwidth: f64) -> f64 {
        self.latent_bandwidth.unwrap_or(input_bandwidth)
    }

    pub fn mmd_bandwidth_for(&self, input_bandwidth: f64) -> f64 {
        self.mmd_bandwidth
            .unwrap_or_else(|| self.latent_bandwidth_for(input_bandwidth))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunKey {
    pub kind: ObjectiveKind,
    pub fraction: f64,
    pub seed: u64,
    pub bandwidth: f64,
}

impl RunKey {
    /// Directory name of the run, e.g. `mtls_red_f0.25_s0_bw4`.
    pub fn dir_name(&self) -> String {
        format!(
            "{}_f{:.2}_s{}_bw{}",
            self.kind.name(),
            self.fraction,
            self.seed,
            self.bandwidth
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "
[synth]
n_per_domain = 100
[model]
topology = 16-8-4
[objective]
kinds = mtls_red, dmtae
bandwidths = 1, 4
[train]
fractions = 0, 0.25
seeds = 0, 1
";

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
        ExperimentConfig::parse(text, Path::new("/base"))
    }

    #[test]
    fn parses_with_defaults() {
        let cfg = parse(GOOD).unwrap();
        assert_eq!(cfg.topology, vec![16, 8, 4]);
        assert_eq!(cfg.beta, 2.0);
        assert_eq!(cfg.lambda, 0.6);
        assert_eq!(cfg.batch_size, 200);
        assert_eq!(cfg.lr_encoder, 0.005);
        assert_eq!(cfg.epochs, 100);
        assert_eq!(cfg.grid().len(), 2 * 2 * 2 * 2);
        match cfg.data {
            DataSource::Synth(s) => assert_eq!(s.n_per_domain, 100),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_problem_is_reported() {
        let text = "
[synth]
bogus = 1
[model]
topology = 16-0
[objective]
kinds = mtls_red, nope
bandwidths = 7
beta = -1
[train]
batch_size = 1
color = blue
";
        let err = parse(text).unwrap_err();
        let joined = err.0.join("\n");
        for needle in [
            "bogus",
            "topology",
            "nope",
            "bandwidths",
            "beta",
            "batch_size",
            "color",
        ] {
            assert!(joined.contains(needle), "missing {needle} in {joined}");
        }
    }

    #[test]
    fn role_conflicts_are_errors() {
        let text = "
[data]
files = a.csv
[roles]
source = a
ood = a
[model]
topology = 4-2
[objective]
kinds = dmtae
bandwidths = 1
[train]
";
        let err = parse(text).unwrap_err();
        assert!(err.to_string().contains("assigned to both"));
    }

    #[test]
    fn structural_errors() {
        assert!(parse("[model]\ntopology = 4-2\n").is_err());
        assert!(parse(&format!("{GOOD}\n[data]\nfiles = a.csv\n")).is_err());
        let dup = GOOD.replace("seeds = 0, 1", "seeds = 0\nseeds = 1");
        assert!(parse(&dup).unwrap_err().to_string().contains("duplicate"));
        let coral = GOOD.replace("mtls_red, dmtae", "coral");
        assert!(parse(&coral).is_err());
        let stray = format!("x = 1\n{GOOD}");
        assert!(parse(&stray).is_err());
    }

    #[test]
    fn binary_mode_needs_negative_label() {
        let base = "
[data]
files = a.csv
label_mode = binary
[roles]
source = a
[model]
topology = 4-2
[objective]
kinds = dmtae
bandwidths = 1
[train]
";
        assert!(parse(base).is_err());
        let ok = parse(&base.replace(
            "label_mode = binary",
            "label_mode = binary\nnegative_label = BENIGN",
        ))
        .unwrap();
        match ok.data {
            DataSource::Files {
                binary_negative,
                paths,
                ..
            } => {
                assert_eq!(binary_negative.as_deref(), Some("BENIGN"));
                assert_eq!(paths, vec![PathBuf::from("/base/a.csv")]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_lists_every_section() {
        let md = schema_markdown();
        for s in SECTIONS {
            assert!(md.contains(&format!("## [{s}]")));
        }
    }

    #[test]
    fn run_dir_names() {
        let k = RunKey {
            kind: ObjectiveKind::MtlsRed,
            fraction: 0.25,
            seed: 3,
            bandwidth: 4.0,
        };
        assert_eq!(k.dir_name(), "mtls_red_f0.25_s3_bw4");
    }
}
