//! Matrix-based Rényi entropy on normalized RBF Gram matrices.
//!
//! A batch of `l` samples is mapped to an `l×l` Gram matrix, normalized to
//! unit trace (diagonal `1/l`), and treated as a density operator: its
//! order-α entropy is `1/(1−α) · log Σ λᵢ^α`. For α = 2 the sum is just
//! `tr(K²) = ‖K‖²_F`, so no eigendecomposition is required.
//!
//! Joint entropy uses the trace-renormalized Hadamard product and mutual
//! information is `H(X) + H(Z) − H(X,Z)`.
//!
//! Entropies are reported in bits. The `*_nats` helpers and all gradients
//! work in natural log; divide by `ln 2` to convert.

use std::f64::consts::LN_2;

use crate::densemath::{default_eigen_tol, hadamard, sym_eigen, trace, DenseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    /// RBF length scale σ.
    pub bandwidth: f64,
    /// Rényi order.
    pub alpha: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        let cfg = Self {
            bandwidth,
            alpha: 2.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_bandwidth(self.bandwidth)?;
        check_alpha(self.alpha)
    }
}

fn check_bandwidth(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(
            "bandwidth",
            format!("must be > 0, got {sigma}"),
        ));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) || alpha == 1.0 {
        return Err(Error::param(
            "alpha",
            format!("Rényi order must be > 0 and != 1, got {alpha}"),
        ));
    }
    Ok(())
}

/// Unit-trace Gram matrix with diagonal `1/l`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    m: DenseMatrix,
}

impl GramMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn batch_size(&self) -> usize {
        self.m.rows()
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.m
    }

    /// Wraps an already-normalized matrix, checking the unit-trace and symmetry invariants.
    pub fn from_normalized(m: DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                op: "GramMatrix",
                shape: m.shape(),
            });
        }
        if !m.is_finite() {
            return Err(Error::NonFinite {
                context: "Gram matrix".into(),
            });
        }
        let t = trace(&m)?;
        if (t - 1.0).abs() > 1e-10 {
            return Err(Error::Data(format!("Gram matrix trace {t} is not 1")));
        }
        let n = m.rows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Data(format!(
                        "Gram matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { m })
    }

    /// Simultaneous row/column permutation `P·K·Pᵀ`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.m.rows();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self.m[(perm[i], perm[j])];
            }
        }
        Self { m: out }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    /// Entropy in bits.
    pub value: f64,
    /// Σ λᵢ^α, the argument of the logarithm.
    pub information_potential: f64,
}

impl EntropyEstimate {
    pub fn nats(&self) -> f64 {
        self.value * LN_2
    }
}

pub fn pairwise_sq_dists(samples: &DenseMatrix) -> DenseMatrix {
    let n = samples.rows();
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let xi = samples.row(i);
        for j in (i + 1)..n {
            let dist: f64 = xi
                .iter()
                .zip(samples.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    d
}

/// Raw RBF Gram matrix `exp(−‖xᵢ − xⱼ‖² / (2σ²))`.
pub fn rbf_gram(samples: &DenseMatrix, sigma: f64) -> Result<DenseMatrix> {
    check_bandwidth(sigma)?;
    if samples.rows() == 0 {
        return Err(Error::TooFewSamples {
            op: "rbf_gram",
            need: 1,
            got: 0,
        });
    }
    if !samples.is_finite() {
        return Err(Error::NonFinite {
            context: "rbf_gram samples".into(),
        });
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    Ok(pairwise_sq_dists(samples).map(|d| (-d * inv).exp()))
}

/// `out_ij = (1/l) · raw_ij / √(raw_ii · raw_jj)`.
pub fn normalize_gram(raw: &DenseMatrix) -> Result<GramMatrix> {
    if !raw.is_square() {
        return Err(Error::NotSquare {
            op: "normalize_gram",
            shape: raw.shape(),
        });
    }
    let l = raw.rows();
    let diag = raw.diag();
    if let Some((index, &value)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(Error::DegenerateKernel { index, value });
    }
    let sqrt_diag: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();
    let inv_l = 1.0 / l as f64;
    let mut m = DenseMatrix::zeros(l, l);
    for i in 0..l {
        m[(i, i)] = inv_l;
        for j in (i + 1)..l {
            let v = inv_l * 0.5 * (raw[(i, j)] + raw[(j, i)]) / (sqrt_diag[i] * sqrt_diag[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    if !m.is_finite() {
        return Err(Error::NonFinite {
            context: "normalized Gram matrix".into(),
        });
    }
    Ok(GramMatrix { m })
}

/// Normalized RBF Gram matrix of a batch.
pub fn gram(samples: &DenseMatrix, sigma: f64) -> Result<GramMatrix> {
    normalize_gram(&rbf_gram(samples, sigma)?)
}

fn estimate_from_potential(ip: f64, alpha: f64) -> Result<EntropyEstimate> {
    if !(ip > 0.0) || !ip.is_finite() {
        return Err(Error::Data(format!(
            "information potential {ip} is not positive"
        )));
    }
    let value = if alpha == 2.0 {
        -ip.log2()
    } else {
        ip.log2() / (1.0 - alpha)
    };
    Ok(EntropyEstimate {
        value,
        information_potential: ip,
    })
}

/// Rényi entropy of a unit-trace Gram matrix.
///
/// α = 2 takes the `tr(K²)` path; any other order goes through the spectrum.
pub fn renyi_entropy(g: &GramMatrix, alpha: f64) -> Result<EntropyEstimate> {
    check_alpha(alpha)?;
    if alpha == 2.0 {
        estimate_from_potential(g.m.frobenius_norm_sq(), alpha)
    } else {
        renyi_entropy_spectral(g, alpha)
    }
}

/// Rényi entropy from the clamped eigenvalues, for any valid order.
pub fn renyi_entropy_spectral(g: &GramMatrix, alpha: f64) -> Result<EntropyEstimate> {
    check_alpha(alpha)?;
    let eig = sym_eigen(&g.m, default_eigen_tol(&g.m))?;
    let ip: f64 = eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0))
        .filter(|&l| l > 0.0)
        .map(|l| if alpha == 2.0 { l * l } else { l.powf(alpha) })
        .sum();
    estimate_from_potential(ip, alpha)
}

/// `(gx ∘ gz) / tr(gx ∘ gz)`.
pub fn joint_gram(gx: &GramMatrix, gz: &GramMatrix) -> Result<GramMatrix> {
    let h = hadamard(&gx.m, &gz.m)?;
    let t = trace(&h)?;
    if !(t > 0.0) {
        return Err(Error::Data(format!(
            "Hadamard trace {t} is not positive; Gram inputs are corrupt"
        )));
    }
    Ok(GramMatrix {
        m: h.scale(1.0 / t),
    })
}

pub fn joint_entropy(gx: &GramMatrix, gz: &GramMatrix, alpha: f64) -> Result<EntropyEstimate> {
    renyi_entropy(&joint_gram(gx, gz)?, alpha)
}

/// `H(X) + H(Z) − H(X,Z)` in bits.
pub fn mutual_information(gx: &GramMatrix, gz: &GramMatrix, alpha: f64) -> Result<f64> {
    let hx = renyi_entropy(gx, alpha)?.value;
    let hz = renyi_entropy(gz, alpha)?.value;
    let hxz = joint_entropy(gx, gz, alpha)?.value;
    Ok(hx + hz - hxz)
}

/// Second-order entropy in nats, `−ln tr(K²)`.
pub fn entropy2_nats(k: &DenseMatrix) -> f64 {
    -k.frobenius_norm_sq().ln()
}

/// Mutual information of two batches in nats (α = 2), from raw samples.
pub fn mutual_information_nats(
    x_batch: &DenseMatrix,
    z_batch: &DenseMatrix,
    sigma_x: f64,
    sigma_z: f64,
) -> Result<f64> {
    let gx = gram(x_batch, sigma_x)?;
    let gz = gram(z_batch, sigma_z)?;
    let gj = joint_gram(&gx, &gz)?;
    Ok(entropy2_nats(&gx.m) + entropy2_nats(&gz.m) - entropy2_nats(&gj.m))
}

/// Gradient of `−ln tr(K²)` with respect to each entry of `K`: `−2K / tr(K²)`.
pub fn grad_entropy_wrt_gram(g: &GramMatrix) -> Result<DenseMatrix> {
    let ip = g.m.frobenius_norm_sq();
    if ip == 0.0 {
        return Err(Error::Data("tr(K²) is zero".into()));
    }
    // ∂ tr(K²)/∂K_ij = 2 K_ji
    Ok(g.m.transpose().scale(-2.0 / ip))
}

/// Gradient of the joint entropy `H((A∘B)/tr(A∘B))` (nats) with respect to the entries of `B`,
/// holding `A` fixed.
fn grad_joint_entropy_wrt_second(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let h = hadamard(a, b)?;
    let t = trace(&h)?;
    let ip = h.frobenius_norm_sq();
    if !(t > 0.0) || ip == 0.0 {
        return Err(Error::Data("degenerate joint Gram matrix".into()));
    }
    // H = −ln ‖h‖²_F + 2 ln tr(h)
    let n = a.rows();
    let mut dh = h.scale(-2.0 / ip);
    for i in 0..n {
        dh[(i, i)] += 2.0 / t;
    }
    hadamard(&dh, a)
}

/// Gradient of the mutual information (nats, α = 2) with respect to each latent coordinate.
///
/// `x_batch` is treated as data: only the latent Gram matrix depends on the
/// differentiated variables. The chain runs through the unit-trace
/// normalization and the RBF kernel, `∂K_ij/∂zᵢ = K_ij (zⱼ − zᵢ)/σz²`.
pub fn grad_mi_wrt_latent(
    x_batch: &DenseMatrix,
    z_batch: &DenseMatrix,
    sigma_x: f64,
    sigma_z: f64,
) -> Result<DenseMatrix> {
    Ok(mi_and_grad_wrt_latent(x_batch, z_batch, sigma_x, sigma_z)?.1)
}

/// Same as [`grad_mi_wrt_latent`], also returning the MI value in nats.
pub fn mi_and_grad_wrt_latent(
    x_batch: &DenseMatrix,
    z_batch: &DenseMatrix,
    sigma_x: f64,
    sigma_z: f64,
) -> Result<(f64, DenseMatrix)> {
    check_bandwidth(sigma_z)?;
    let l = z_batch.rows();
    if l < 2 {
        return Err(Error::TooFewSamples {
            op: "grad_mi_wrt_latent",
            need: 2,
            got: l,
        });
    }
    if x_batch.rows() != l {
        return Err(Error::ShapeMismatch {
            op: "grad_mi_wrt_latent",
            left: x_batch.shape(),
            right: z_batch.shape(),
        });
    }
    let gx = gram(x_batch, sigma_x)?;
    let raw_z = rbf_gram(z_batch, sigma_z)?;
    let gz = normalize_gram(&raw_z)?;
    let gj = joint_gram(&gx, &gz)?;
    let mi = entropy2_nats(&gx.m) + entropy2_nats(&gz.m) - entropy2_nats(&gj.m);

    // dMI/dKz
    let mut gk = grad_entropy_wrt_gram(&gz)?;
    gk.axpy(-1.0, &grad_joint_entropy_wrt_second(&gx.m, &gz.m)?)?;

    // RBF diagonals are identically 1, so the normalization is Kz = raw / l
    // and only off-diagonal entries carry a dependence on z.
    let inv_l = 1.0 / l as f64;
    let coef = inv_l / (sigma_z * sigma_z);
    let dz = z_batch.cols();
    let mut grad = DenseMatrix::zeros(l, dz);
    for i in 0..l {
        let zi = z_batch.row(i);
        let mut acc = vec![0.0; dz];
        for j in 0..l {
            if i == j {
                continue;
            }
            let w = (gk[(i, j)] + gk[(j, i)]) * raw_z[(i, j)] * coef;
            for ((a, &zj), &zik) in acc.iter_mut().zip(z_batch.row(j)).zip(zi) {
                *a += w * (zj - zik);
            }
        }
        grad.row_mut(i).copy_from_slice(&acc);
    }
    Ok((mi, grad))
}

/// Converts a nat-valued quantity (or gradient scale) to bits.
pub fn nats_to_bits(v: f64) -> f64 {
    v / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    }

    fn scaled_identity(l: usize) -> GramMatrix {
        normalize_gram(&DenseMatrix::identity(l)).unwrap()
    }

    fn constant(l: usize) -> GramMatrix {
        normalize_gram(&DenseMatrix::filled(l, l, 1.0)).unwrap()
    }

    #[test]
    fn rbf_cases() {
        let x = DenseMatrix::from_rows(&[[0.5, -1.0], [0.5, -1.0]]).unwrap();
        assert_eq!(rbf_gram(&x, 1.3).unwrap(), DenseMatrix::filled(2, 2, 1.0));

        let sigma = 0.7;
        let x = DenseMatrix::from_rows(&[[0.0], [sigma * 2f64.sqrt()]]).unwrap();
        let k = rbf_gram(&x, sigma).unwrap();
        assert_abs_diff_eq!(k[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(k[(0, 1)], 0.367879, epsilon = 1e-6);

        let x = DenseMatrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let k = rbf_gram(&x, 1e-9).unwrap();
        assert_eq!(k.diag(), vec![1.0; 3]);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(k[(i, j)] < 1e-300);
                }
            }
        }
    }

    #[test]
    fn rbf_errors() {
        let x = DenseMatrix::zeros(2, 2);
        assert!(rbf_gram(&x, 0.0).is_err());
        assert!(rbf_gram(&x, -1.0).is_err());
        assert!(rbf_gram(&DenseMatrix::zeros(0, 2), 1.0).is_err());
    }

    #[test]
    fn normalize_cases() {
        let l = 5;
        assert_eq!(
            scaled_identity(l).matrix(),
            &DenseMatrix::identity(l).scale(0.2)
        );
        assert_eq!(constant(l).matrix(), &DenseMatrix::filled(l, l, 0.2));
        let g =
            normalize_gram(&DenseMatrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap()).unwrap();
        assert_eq!(
            g.matrix(),
            &DenseMatrix::from_rows(&[[0.5, 0.25], [0.25, 0.5]]).unwrap()
        );
    }

    #[test]
    fn normalize_rejects_degenerate_diagonal() {
        let raw = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        match normalize_gram(&raw) {
            Err(Error::DegenerateKernel { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn entropy_closed_forms() {
        let h = renyi_entropy(&scaled_identity(4), 2.0).unwrap();
        assert_abs_diff_eq!(h.value, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.information_potential, 0.25, epsilon = 1e-15);
        let h = renyi_entropy(&constant(7), 2.0).unwrap();
        assert_abs_diff_eq!(h.value, 0.0, epsilon = 1e-12);

        // eigenvalues a ± b = 0.8, 0.2
        let g =
            GramMatrix::from_normalized(DenseMatrix::from_rows(&[[0.5, 0.3], [0.3, 0.5]]).unwrap())
                .unwrap();
        let expect = -(0.68f64).log2();
        assert_abs_diff_eq!(
            renyi_entropy(&g, 2.0).unwrap().value,
            expect,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            renyi_entropy_spectral(&g, 2.0).unwrap().value,
            expect,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(expect, 0.556, epsilon = 1e-3);
        // α = 3: log2(0.8³ + 0.2³) / (1 − 3)
        let h3 = renyi_entropy(&g, 3.0).unwrap();
        assert_abs_diff_eq!(h3.value, (0.52f64).log2() / -2.0, epsilon = 1e-12);
    }

    #[test]
    fn entropy_rejects_alpha_one() {
        assert!(renyi_entropy(&scaled_identity(3), 1.0).is_err());
        assert!(KernelConfig::new(1.0).unwrap().with_alpha(1.0).is_err());
        assert!(KernelConfig::new(0.0).is_err());
    }

    #[test]
    fn joint_and_mi_closed_forms() {
        let gx = scaled_identity(2);
        let h = joint_entropy(&gx, &gx, 2.0).unwrap();
        assert_abs_diff_eq!(h.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            mutual_information(&gx, &gx, 2.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gx = gram(&uniform(6, 3, &mut rng), 0.8).unwrap();
        let gz = constant(6);
        let hj = joint_entropy(&gx, &gz, 2.0).unwrap().value;
        let hx = renyi_entropy(&gx, 2.0).unwrap().value;
        assert_abs_diff_eq!(hj, hx, epsilon = 1e-10);
        assert_abs_diff_eq!(
            mutual_information(&gx, &gz, 2.0).unwrap(),
            0.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn joint_and_mi_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let gx = gram(&uniform(9, 4, &mut rng), 0.9).unwrap();
            let gz = gram(&uniform(9, 2, &mut rng), 0.4).unwrap();
            let a = joint_entropy(&gx, &gz, 2.0).unwrap().value;
            let b = joint_entropy(&gz, &gx, 2.0).unwrap().value;
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            let a = mutual_information(&gx, &gz, 2.0).unwrap();
            let b = mutual_information(&gz, &gx, 2.0).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn grad_entropy_closed_form() {
        let g = scaled_identity(2);
        let grad = grad_entropy_wrt_gram(&g).unwrap();
        assert_eq!(grad, DenseMatrix::identity(2).scale(-2.0));
    }

    #[test]
    fn scale_invariance_of_mi() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = uniform(8, 3, &mut rng);
        let z = uniform(8, 2, &mut rng);
        let a = mutual_information_nats(&x, &z, 1.0, 0.6).unwrap();
        let b = mutual_information_nats(&x, &z.scale(2.0), 1.0, 1.2).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        // directional derivative along z·(1+t), σz·(1+t) is zero:
        // ⟨∇z MI, z⟩ + ∂MI/∂σz · σz = 0, and ∂MI/∂σz · σz = −⟨∇z MI, z⟩ by homogeneity
        let g = grad_mi_wrt_latent(&x, &z, 1.0, 0.6).unwrap();
        let dir: f64 = g
            .as_slice()
            .iter()
            .zip(z.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        let h = 1e-5;
        let sig = |s: f64| mutual_information_nats(&x, &z, 1.0, s).unwrap();
        let dsigma = (sig(0.6 + h) - sig(0.6 - h)) / (2.0 * h) * 0.6;
        assert_abs_diff_eq!(dir + dsigma, 0.0, epsilon = 1e-7);
    }

    #[test]
    fn grad_mi_rejects_bad_input() {
        let x = DenseMatrix::zeros(3, 2);
        assert!(grad_mi_wrt_latent(&x, &DenseMatrix::zeros(3, 1), 1.0, 0.0).is_err());
        assert!(
            grad_mi_wrt_latent(&x.select_rows(&[0]), &DenseMatrix::zeros(1, 1), 1.0, 1.0).is_err()
        );
        assert!(grad_mi_wrt_latent(&x, &DenseMatrix::zeros(2, 1), 1.0, 1.0).is_err());
    }
}
