//! The five training objectives and their regularizers.
//!
//! | kind       | loss                                        |
//! |------------|---------------------------------------------|
//! | `mtls_red` | CE + λ·REC + β·MI(X;Z)                      |
//! | `dmtae`    | CE + λ·REC                                  |
//! | `mmd_ae`   | CE + λ·REC + λ₂·MMD(z_source, z_cross)      |
//! | `coral`    | CE + λ·REC + β·‖C_source − C_cross‖²_F      |
//! | `nsae`     | CE + λ·REC + λ₂·REC(f(g(x̂)), x̂)              |

use std::fmt;
use std::str::FromStr;

use crate::densemath::{covariance, frobenius_distance_sq, DenseMatrix};
use crate::error::{Error, Result};
use crate::kernelinfo::{gram, mutual_information, KernelConfig};
use crate::neuralnet::{
    cross_entropy_loss, decode, encode, logits, reconstruction_loss, Batch, MlpModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectiveKind {
    MtlsRed,
    Dmtae,
    MmdAe,
    Coral,
    Nsae,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 5] = [
        ObjectiveKind::MtlsRed,
        ObjectiveKind::Dmtae,
        ObjectiveKind::MmdAe,
        ObjectiveKind::Coral,
        ObjectiveKind::Nsae,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::MtlsRed => "mtls_red",
            ObjectiveKind::Dmtae => "dmtae",
            ObjectiveKind::MmdAe => "mmd_ae",
            ObjectiveKind::Coral => "coral",
            ObjectiveKind::Nsae => "nsae",
        }
    }

    /// Whether the regularizer compares the source and cross partitions of a batch.
    pub fn needs_partition(self) -> bool {
        matches!(self, ObjectiveKind::MmdAe | ObjectiveKind::Coral)
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::param("objective", format!("unknown objective `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    /// MI weight (mtls_red) or CORAL weight (coral).
    pub beta: f64,
    /// Reconstruction weight.
    pub lambda: f64,
    /// MMD weight (mmd_ae) or second-reconstruction weight (nsae).
    pub lambda2: f64,
    /// Input-side kernel; its bandwidth is the default for every kernel.
    pub kernel: KernelConfig,
    pub latent_bandwidth: Option<f64>,
    pub mmd_bandwidth: Option<f64>,
}

impl ObjectiveSpec {
    pub fn new(
        kind: ObjectiveKind,
        beta: f64,
        lambda: f64,
        lambda2: f64,
        bandwidth: f64,
    ) -> Result<Self> {
        let spec = Self {
            kind,
            beta,
            lambda,
            lambda2,
            kernel: KernelConfig::new(bandwidth)?,
            latent_bandwidth: None,
            mmd_bandwidth: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn mtls_red(beta: f64, lambda: f64, bandwidth: f64) -> Result<Self> {
        Self::new(ObjectiveKind::MtlsRed, beta, lambda, 0.0, bandwidth)
    }

    pub fn dmtae(lambda: f64) -> Self {
        Self::new(ObjectiveKind::Dmtae, 0.0, lambda, 0.0, 1.0).expect("valid weights")
    }

    pub fn with_latent_bandwidth(mut self, sigma: f64) -> Result<Self> {
        self.latent_bandwidth = Some(sigma);
        self.validate()?;
        Ok(self)
    }

    pub fn with_mmd_bandwidth(mut self, sigma: f64) -> Result<Self> {
        self.mmd_bandwidth = Some(sigma);
        self.validate()?;
        Ok(self)
    }

    pub fn input_bandwidth(&self) -> f64 {
        self.kernel.bandwidth
    }

    pub fn latent_bandwidth(&self) -> f64 {
        self.latent_bandwidth.unwrap_or(self.kernel.bandwidth)
    }

    pub fn mmd_bandwidth(&self) -> f64 {
        self.mmd_bandwidth.unwrap_or(self.kernel.bandwidth)
    }

    /// `(reconstruction weight, regularizer weight)` for this kind.
    pub fn weights(&self) -> (f64, f64) {
        match self.kind {
            ObjectiveKind::Dmtae => (self.lambda, 0.0),
            ObjectiveKind::MtlsRed | ObjectiveKind::Coral => (self.lambda, self.beta),
            ObjectiveKind::MmdAe | ObjectiveKind::Nsae => (self.lambda, self.lambda2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("lambda2", self.lambda2),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("must be finite and >= 0, got {w}"),
                ));
            }
        }
        self.kernel.validate()?;
        for (name, s) in [
            ("latent_bandwidth", self.latent_bandwidth),
            ("mmd_bandwidth", self.mmd_bandwidth),
        ] {
            if let Some(s) = s {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::param(name, format!("must be > 0, got {s}")));
                }
            }
        }
        if self.kind == ObjectiveKind::MtlsRed && self.kernel.alpha != 2.0 {
            return Err(Error::param(
                "alpha",
                "the MI penalty is trained with second-order entropy only (alpha = 2)",
            ));
        }
        Ok(())
    }
}

/// Loss terms of one batch. `rec` and `reg` are unweighted.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub ce: f64,
    pub rec: f64,
    /// MI (bits), MMD, CORAL distance or second reconstruction, by kind; 0 for dmtae.
    pub reg: f64,
    pub rec_weight: f64,
    pub reg_weight: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(ce: f64, rec: f64, reg: f64, rec_weight: f64, reg_weight: f64) -> Self {
        Self {
            ce,
            rec,
            reg,
            rec_weight,
            reg_weight,
            total: ce + rec_weight * rec + reg_weight * reg,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.ce, self.rec, self.reg, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Both partitions need two rows for a covariance; batches that fall short
/// contribute no alignment term.
pub const MIN_PARTITION_ROWS: usize = 2;

pub fn alignment_applicable(n_source: usize, n_cross: usize) -> bool {
    n_source >= MIN_PARTITION_ROWS && n_cross >= MIN_PARTITION_ROWS
}

/// Biased (V-statistic) RBF maximum mean discrepancy between two sample sets.
pub fn mmd(a: &DenseMatrix, b: &DenseMatrix, sigma: f64) -> Result<f64> {
    Ok(mmd_with_grad(a, b, sigma)?.0)
}

fn rbf(p: &[f64], q: &[f64], inv2s2: f64) -> f64 {
    let d: f64 = p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d * inv2s2).exp()
}

/// Accumulates `w · Σⱼ k(pᵢ, qⱼ)(qⱼ − pᵢ)` into `grad` row `i` and returns `Σᵢⱼ k(pᵢ, qⱼ)`.
fn kernel_sum_and_pull(
    p: &DenseMatrix,
    q: &DenseMatrix,
    inv2s2: f64,
    w: f64,
    grad: &mut DenseMatrix,
) -> f64 {
    let mut total = 0.0;
    for i in 0..p.rows() {
        let pi = p.row(i);
        for j in 0..q.rows() {
            let qj = q.row(j);
            let k = rbf(pi, qj, inv2s2);
            total += k;
            for (g, (&pv, &qv)) in grad.row_mut(i).iter_mut().zip(pi.iter().zip(qj)) {
                *g += w * k * (qv - pv);
            }
        }
    }
    total
}

/// MMD value and its gradients with respect to every row of `a` and of `b`.
pub fn mmd_with_grad(
    a: &DenseMatrix,
    b: &DenseMatrix,
    sigma: f64,
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(
            "bandwidth",
            format!("must be > 0, got {sigma}"),
        ));
    }
    if a.rows() == 0 {
        return Err(Error::EmptyPartition { role: "source" });
    }
    if b.rows() == 0 {
        return Err(Error::EmptyPartition { role: "cross" });
    }
    if a.cols() != b.cols() {
        return Err(Error::ShapeMismatch {
            op: "mmd",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, m) = (a.rows() as f64, b.rows() as f64);
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let s2 = sigma * sigma;
    let mut ga = DenseMatrix::zeros(a.rows(), a.cols());
    let mut gb = DenseMatrix::zeros(b.rows(), b.cols());
    // ∂k(p,q)/∂p = k·(q − p)/σ²; the self terms count each pair twice
    let kaa = kernel_sum_and_pull(a, a, inv2s2, 2.0 / (n * n * s2), &mut ga);
    let kab = kernel_sum_and_pull(a, b, inv2s2, -2.0 / (n * m * s2), &mut ga);
    let kbb = kernel_sum_and_pull(b, b, inv2s2, 2.0 / (m * m * s2), &mut gb);
    kernel_sum_and_pull(b, a, inv2s2, -2.0 / (n * m * s2), &mut gb);
    let value = kaa / (n * n) - 2.0 * kab / (n * m) + kbb / (m * m);
    Ok((value, ga, gb))
}

/// `‖cov(a) − cov(b)‖²_F`.
pub fn coral_distance(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    Ok(coral_with_grad(a, b)?.0)
}

pub fn coral_with_grad(
    a: &DenseMatrix,
    b: &DenseMatrix,
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    if a.rows() == 0 {
        return Err(Error::EmptyPartition { role: "source" });
    }
    if b.rows() == 0 {
        return Err(Error::EmptyPartition { role: "cross" });
    }
    let ca = covariance(a)?;
    let cb = covariance(b)?;
    let value = frobenius_distance_sq(&ca, &cb)?;
    // dL/dC_a = 2(C_a − C_b); dL/dz_i = (2/(n−1))·G·(z_i − mean), G symmetric
    let diff = ca.sub(&cb)?;
    let pull = |x: &DenseMatrix, sign: f64| {
        let means = x.column_means();
        let coef = sign * 4.0 / (x.rows() - 1) as f64;
        let d = x.cols();
        let mut g = DenseMatrix::zeros(x.rows(), d);
        for r in 0..x.rows() {
            let row = x.row(r);
            for i in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    s += diff[(i, j)] * (row[j] - means[j]);
                }
                g[(r, i)] = coef * s;
            }
        }
        g
    };
    Ok((value, pull(a, 1.0), pull(b, -1.0)))
}

/// MI(X;Z) of one batch in bits, second order.
pub fn batch_mutual_information(
    x: &DenseMatrix,
    z: &DenseMatrix,
    sigma_x: f64,
    sigma_z: f64,
) -> Result<f64> {
    mutual_information(&gram(x, sigma_x)?, &gram(z, sigma_z)?, 2.0)
}

/// Loss of one batch under `spec`, by direct forward evaluation.
pub fn assemble_loss(
    spec: &ObjectiveSpec,
    model: &MlpModel,
    batch: &Batch,
) -> Result<LossBreakdown> {
    spec.validate()?;
    let z = encode(model, &batch.x)?;
    let x_hat = decode(model, &z)?;
    let ce = cross_entropy_loss(&logits(model, &z)?, &batch.labels)?;
    let rec = reconstruction_loss(&batch.x, &x_hat)?;
    let reg = match spec.kind {
        ObjectiveKind::Dmtae => 0.0,
        ObjectiveKind::MtlsRed => batch_mutual_information(
            &batch.x,
            &z,
            spec.input_bandwidth(),
            spec.latent_bandwidth(),
        )?,
        ObjectiveKind::MmdAe | ObjectiveKind::Coral => {
            let (src, cross) = batch.partition();
            let (zs, zc) = (z.select_rows(&src), z.select_rows(&cross));
            if !alignment_applicable(src.len(), cross.len()) {
                0.0
            } else if spec.kind == ObjectiveKind::MmdAe {
                mmd(&zs, &zc, spec.mmd_bandwidth())?
            } else {
                coral_distance(&zs, &zc)?
            }
        }
        ObjectiveKind::Nsae => {
            let again = decode(model, &encode(model, &x_hat)?)?;
            reconstruction_loss(&x_hat, &again)?
        }
    };
    let (rec_weight, reg_weight) = spec.weights();
    let loss = LossBreakdown::new(ce, rec, reg, rec_weight, reg_weight);
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            context: format!("loss components {loss:?}"),
        });
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Role;
    use crate::neuralnet::{backward, init_model, Activation, Dense, LayerSpec};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn mmd_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(6, 3, &mut rng);
        let b = random(4, 3, &mut rng);
        assert!(mmd(&a, &a, 0.7).unwrap().abs() <= 1e-12);
        assert_abs_diff_eq!(
            mmd(&a, &b, 0.7).unwrap(),
            mmd(&b, &a, 0.7).unwrap(),
            epsilon = 1e-14
        );
        // singletons at distance d: 1 − 2k + 1
        let d: f64 = 1.3;
        let sigma = 0.9;
        let p = DenseMatrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let q = DenseMatrix::from_rows(&[[d, 0.0]]).unwrap();
        let expect = 2.0 - 2.0 * (-d * d / (2.0 * sigma * sigma)).exp();
        assert_abs_diff_eq!(mmd(&p, &q, sigma).unwrap(), expect, epsilon = 1e-14);
        assert!(mmd(&p, &q, 0.0).is_err());
        assert!(matches!(
            mmd(&p, &DenseMatrix::zeros(0, 2), 1.0),
            Err(Error::EmptyPartition { .. })
        ));
    }

    #[test]
    fn coral_zero_for_identical_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(7, 3, &mut rng);
        let (v, ga, gb) = coral_with_grad(&a, &a).unwrap();
        assert!(v.abs() <= 1e-12);
        assert!(ga.max_abs() <= 1e-12 && gb.max_abs() <= 1e-12);
        assert!(coral_distance(&a, &DenseMatrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn breakdown_sums_to_total() {
        let l = LossBreakdown::new(0.7, 1.3, 0.25, 0.6, 2.0);
        assert_abs_diff_eq!(l.total, 0.7 + 0.6 * 1.3 + 2.0 * 0.25, epsilon = 1e-15);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ObjectiveKind::ALL {
            assert_eq!(k.name().parse::<ObjectiveKind>().unwrap(), k);
        }
        assert!("mtlsred".parse::<ObjectiveKind>().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ObjectiveSpec::new(ObjectiveKind::MtlsRed, -1.0, 0.6, 0.0, 1.0).is_err());
        assert!(ObjectiveSpec::new(ObjectiveKind::MtlsRed, 2.0, f64::NAN, 0.0, 1.0).is_err());
        assert!(ObjectiveSpec::new(ObjectiveKind::MmdAe, 0.0, 0.6, 1.0, 0.0).is_err());
        let s = ObjectiveSpec::mtls_red(2.0, 0.6, 1.0).unwrap();
        assert!(s.with_latent_bandwidth(-1.0).is_err());
        let mut s = ObjectiveSpec::mtls_red(2.0, 0.6, 1.0).unwrap();
        s.kernel.alpha = 3.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn mtls_red_without_weights_is_cross_entropy() {
        let specs = LayerSpec::encoder_from_dims(&[4, 3, 2]).unwrap();
        let model = init_model(&specs, 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = Batch::source_only(random(6, 4, &mut rng), vec![0, 1, 1, 0, 1, 0]).unwrap();
        let spec = ObjectiveSpec::mtls_red(0.0, 0.0, 1.0).unwrap();
        let loss = assemble_loss(&spec, &model, &batch).unwrap();
        let z = encode(&model, &batch.x).unwrap();
        let ce = cross_entropy_loss(&logits(&model, &z).unwrap(), &batch.labels).unwrap();
        assert_eq!(loss.total, ce);
    }

    #[test]
    fn nsae_identity_autoencoder_has_zero_reconstruction() {
        let d = 3;
        let ident = |act| Dense {
            weights: DenseMatrix::identity(d),
            bias: vec![0.0; d],
            activation: act,
        };
        let model = MlpModel {
            encoder: vec![ident(Activation::Identity)],
            decoder: vec![ident(Activation::Identity)],
            head: Dense::zeros(LayerSpec::new(d, 2, Activation::Identity)),
            seed: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch = Batch::source_only(random(5, d, &mut rng), vec![0, 1, 0, 1, 1]).unwrap();
        let spec = ObjectiveSpec::new(ObjectiveKind::Nsae, 0.0, 0.6, 0.4, 1.0).unwrap();
        let loss = assemble_loss(&spec, &model, &batch).unwrap();
        assert!(loss.rec.abs() <= 1e-12);
        assert!(loss.reg.abs() <= 1e-12);
        assert_eq!(loss.total, loss.ce);
    }

    #[test]
    fn alignment_needs_both_partitions() {
        let specs = LayerSpec::encoder_from_dims(&[3, 2]).unwrap();
        let model = init_model(&specs, 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch = Batch::source_only(random(4, 3, &mut rng), vec![0, 1, 0, 1]).unwrap();
        let spec = ObjectiveSpec::new(ObjectiveKind::Coral, 1.0, 0.6, 0.0, 1.0).unwrap();
        assert_eq!(assemble_loss(&spec, &model, &batch).unwrap().reg, 0.0);
        assert_eq!(backward(&model, &batch, &spec).unwrap().loss.reg, 0.0);
        let empty = DenseMatrix::zeros(0, 3);
        assert!(matches!(
            coral_distance(&random(4, 3, &mut rng), &empty),
            Err(Error::EmptyPartition { role: "cross" })
        ));
        // identical halves → zero CORAL term
        let x = random(3, 3, &mut rng);
        let xx = DenseMatrix::vstack(&[&x, &x]).unwrap();
        let mut roles = vec![Role::Source; 3];
        roles.extend([Role::Cross; 3]);
        let batch = Batch::new(xx, vec![0, 1, 0, 0, 1, 0], roles).unwrap();
        let loss = assemble_loss(&spec, &model, &batch).unwrap();
        assert!(loss.reg.abs() <= 1e-12);
    }
}
