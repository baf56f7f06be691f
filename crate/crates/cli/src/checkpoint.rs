//! Text checkpoint: header, then one line per weight row at 17 significant digits.
//!
//! ```text
//! MIREG-CHECKPOINT
//! version 1
//! topology 16 8 4
//! classes 2
//! seed 0
//! encoder_activations relu identity
//! decoder_activations relu identity
//! head_activation identity
//! layer encoder 0 16 8
//! w <8 values>        (16 lines)
//! b <8 values>
//! ...
//! scaler 16
//! mean <16 values>
//! std <16 values>
//! constant <16 flags>
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};

use mireg::dataio::Standardizer;
use mireg::densemath::DenseMatrix;
use mireg::neuralnet::{Activation, Dense, MlpModel};

pub const MAGIC: &str = "MIREG-CHECKPOINT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: MlpModel,
    /// Input standardization fitted on the training pool.
    pub scaler: Option<Standardizer>,
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_values(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    for v in values {
        out.push(' ');
        out.push_str(&fmt_value(*v));
    }
    out.push('\n');
}

fn activations(layers: &[Dense]) -> String {
    layers
        .iter()
        .map(|l| l.activation.name())
        .collect::<Vec<_>>()
        .join(" ")
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let mut out = format!("{MAGIC}\nversion {VERSION}\n");
        let topo: Vec<String> = m.topology().iter().map(ToString::to_string).collect();
        writeln!(out, "topology {}", topo.join(" ")).unwrap();
        writeln!(out, "classes {}", m.n_classes()).unwrap();
        writeln!(out, "seed {}", m.seed).unwrap();
        writeln!(out, "encoder_activations {}", activations(&m.encoder)).unwrap();
        writeln!(out, "decoder_activations {}", activations(&m.decoder)).unwrap();
        writeln!(out, "head_activation {}", m.head.activation.name()).unwrap();
        let stacks: [(&str, &[Dense]); 3] = [
            ("encoder", &m.encoder),
            ("decoder", &m.decoder),
            ("head", std::slice::from_ref(&m.head)),
        ];
        for (name, layers) in stacks {
            for (i, l) in layers.iter().enumerate() {
                writeln!(out, "layer {name} {i} {} {}", l.in_dim(), l.out_dim()).unwrap();
                for row in l.weights.row_iter() {
                    push_values(&mut out, "w", row);
                }
                push_values(&mut out, "b", &l.bias);
            }
        }
        if let Some(s) = &self.scaler {
            writeln!(out, "scaler {}", s.mean.len()).unwrap();
            push_values(&mut out, "mean", &s.mean);
            push_values(&mut out, "std", &s.std);
            out.push_str("constant");
            for &c in &s.constant {
                out.push_str(if c { " 1" } else { " 0" });
            }
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .map(|(n, l)| (n + 1, l))
                .ok_or_else(|| anyhow!("checkpoint truncated: expected {what}"))
        };
        let (_, magic) = next("magic")?;
        ensure!(
            magic == MAGIC,
            "not a checkpoint (bad magic line `{magic}`)"
        );
        let version: u32 = field(next("version")?, "version")?.parse()?;
        ensure!(
            version == VERSION,
            "unsupported checkpoint version {version}"
        );
        let topology = parse_usizes(field(next("topology")?, "topology")?)?;
        ensure!(topology.len() >= 2, "topology needs at least two widths");
        let classes: usize = field(next("classes")?, "classes")?.parse()?;
        let seed: u64 = field(next("seed")?, "seed")?.parse()?;
        let enc_act =
            parse_activations(field(next("encoder activations")?, "encoder_activations")?)?;
        let dec_act =
            parse_activations(field(next("decoder activations")?, "decoder_activations")?)?;
        let head_act: Activation = field(next("head activation")?, "head_activation")?
            .parse()
            .map_err(|e| anyhow!("{e}"))?;
        let n_layers = topology.len() - 1;
        ensure!(
            enc_act.len() == n_layers && dec_act.len() == n_layers,
            "activation lists do not match the topology"
        );

        let mut read_layer = |stack: &str, index: usize, act: Activation| -> Result<Dense> {
            let (n, header) = next("layer header")?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            ensure!(
                parts.len() == 5
                    && parts[0] == "layer"
                    && parts[1] == stack
                    && parts[2] == index.to_string(),
                "line {n}: expected `layer {stack} {index} <in> <out>`"
            );
            let (rows, cols): (usize, usize) = (parts[3].parse()?, parts[4].parse()?);
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let row = parse_values(next("weight row")?, "w", cols)?;
                data.extend(row);
            }
            let bias = parse_values(next("bias row")?, "b", cols)?;
            Ok(Dense {
                weights: DenseMatrix::from_vec(rows, cols, data)?,
                bias,
                activation: act,
            })
        };
        let encoder = (0..n_layers)
            .map(|i| read_layer("encoder", i, enc_act[i]))
            .collect::<Result<Vec<_>>>()?;
        let decoder = (0..n_layers)
            .map(|i| read_layer("decoder", i, dec_act[i]))
            .collect::<Result<Vec<_>>>()?;
        let head = read_layer("head", 0, head_act)?;
        let model = MlpModel {
            encoder,
            decoder,
            head,
            seed,
        };
        model.validate()?;
        ensure!(
            model.topology() == topology,
            "layer shapes disagree with the topology line"
        );
        ensure!(
            model.n_classes() == classes,
            "head width disagrees with the classes line"
        );

        let (n, line) = next("scaler or end")?;
        let scaler = if let Some(rest) = line.strip_prefix("scaler ") {
            let d: usize = rest.trim().parse()?;
            ensure!(
                d == model.input_dim(),
                "line {n}: scaler width {d} differs from the input width"
            );
            let mean = parse_values(next("scaler mean")?, "mean", d)?;
            let std = parse_values(next("scaler std")?, "std", d)?;
            let constant: Vec<bool> = parse_values(next("scaler flags")?, "constant", d)?
                .into_iter()
                .map(|v| v != 0.0)
                .collect();
            let (_, end) = next("end")?;
            ensure!(end == "end", "expected `end` after the scaler");
            Some(Standardizer {
                mean,
                std,
                constant,
            })
        } else {
            ensure!(line == "end", "line {n}: expected `scaler` or `end`");
            None
        };
        ensure!(lines.next().is_none(), "trailing content after `end`");
        Ok(Self { model, scaler })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_text(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn field<'a>((n, line): (usize, &'a str), name: &str) -> Result<&'a str> {
    match line.split_once(' ') {
        Some((k, v)) if k == name => Ok(v.trim()),
        _ => bail!("line {n}: expected `{name} ...`, got `{line}`"),
    }
}

fn parse_usizes(s: &str) -> Result<Vec<usize>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| anyhow!("bad integer `{t}`: {e}"))
        })
        .collect()
}

fn parse_activations(s: &str) -> Result<Vec<Activation>> {
    s.split_whitespace()
        .map(|t| t.parse::<Activation>().map_err(|e| anyhow!("{e}")))
        .collect()
}

fn parse_values((n, line): (usize, &str), tag: &str, expected: usize) -> Result<Vec<f64>> {
    let mut parts = line.split_whitespace();
    ensure!(
        parts.next() == Some(tag),
        "line {n}: expected a `{tag}` row"
    );
    let vals = parts
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| anyhow!("line {n}: bad number `{t}`: {e}"))
        })
        .collect::<Result<Vec<f64>>>()?;
    ensure!(
        vals.len() == expected,
        "line {n}: expected {expected} values, found {}",
        vals.len()
    );
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mireg::neuralnet::{init_model, LayerSpec};

    fn sample() -> Checkpoint {
        let specs = LayerSpec::encoder_from_dims(&[5, 4, 2]).unwrap();
        let mut model = init_model(&specs, 3, 42).unwrap();
        model.encoder[0].bias[1] = 1.0 / 3.0;
        model.head.bias[0] = -1e-300;
        let x = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0, 4.0, 5.0], [0.5, 2.0, 1.0, 0.0, 7.0]])
            .unwrap();
        Checkpoint {
            model,
            scaler: Some(Standardizer::fit([&x]).unwrap()),
        }
    }

    #[test]
    fn exact_round_trip() {
        let ck = sample();
        let text = ck.to_text();
        let back = Checkpoint::from_text(&text).unwrap();
        assert_eq!(back.model, ck.model);
        assert_eq!(back.to_text(), text);
        assert_eq!(
            back.scaler.as_ref().unwrap().mean,
            ck.scaler.as_ref().unwrap().mean
        );
        assert_eq!(back.scaler, ck.scaler);
    }

    #[test]
    fn header_fields() {
        let text = sample().to_text();
        let head: Vec<&str> = text.lines().take(8).collect();
        assert_eq!(head[0], MAGIC);
        assert_eq!(head[1], "version 1");
        assert_eq!(head[2], "topology 5 4 2");
        assert_eq!(head[3], "classes 3");
        assert_eq!(head[4], "seed 42");
        assert_eq!(head[5], "encoder_activations relu identity");
    }

    #[test]
    fn without_scaler() {
        let mut ck = sample();
        ck.scaler = None;
        let text = ck.to_text();
        assert_eq!(Checkpoint::from_text(&text).unwrap(), ck);
    }

    #[test]
    fn corrupt_inputs_fail() {
        let text = sample().to_text();
        assert!(Checkpoint::from_text("garbage").is_err());
        assert!(Checkpoint::from_text(&text.replace("version 1", "version 9")).is_err());
        let truncated: String = text.lines().take(12).map(|l| format!("{l}\n")).collect();
        assert!(Checkpoint::from_text(&truncated).is_err());
        assert!(Checkpoint::from_text(&format!("{text}extra\n")).is_err());
        assert!(Checkpoint::from_text(&text.replace("classes 3", "classes 4")).is_err());
    }
}
