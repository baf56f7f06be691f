//! Central finite-difference checks of every analytic gradient.
//!
//! Instances are generated from `(seed, category, trial)` alone, so a failing
//! instance can be replayed from its [`InstanceId`].

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::Role;
use crate::densemath::DenseMatrix;
use crate::error::Result;
use crate::kernelinfo::{
    entropy2_nats, grad_entropy_wrt_gram, grad_mi_wrt_latent, gram, mutual_information_nats,
    GramMatrix,
};
use crate::neuralnet::{backward, init_model, relu_pattern, Batch, LayerSpec, MlpModel};
use crate::objectives::{assemble_loss, ObjectiveKind, ObjectiveSpec};

pub const TOLERANCE: f64 = 1e-4;
pub const ENTROPY_TOLERANCE: f64 = 1e-6;
pub const ENTROPY_STEP: f64 = 1e-6;
pub const MI_STEP: f64 = 1e-5;
pub const BACKWARD_STEP: f64 = 1e-5;
/// Denominator floor for the relative error.
const SCALE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceId {
    pub seed: u64,
    pub category: u32,
    pub trial: u32,
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seed={} category={} trial={}",
            self.seed, self.category, self.trial
        )
    }
}

impl InstanceId {
    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((u64::from(self.category) << 32) | u64::from(self.trial));
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub category: String,
    pub instances: usize,
    pub coordinates: usize,
    /// Coordinates skipped because a relu changed sign within the step.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub worst: Option<InstanceId>,
    pub tolerance: f64,
}

impl CheckOutcome {
    fn new(category: impl Into<String>, tolerance: f64) -> Self {
        Self {
            category: category.into(),
            instances: 0,
            coordinates: 0,
            skipped: 0,
            max_rel_error: 0.0,
            worst: None,
            tolerance,
        }
    }

    fn record(&mut self, id: InstanceId, err: f64, coordinates: usize, skipped: usize) {
        self.instances += 1;
        self.coordinates += coordinates;
        self.skipped += skipped;
        if err > self.max_rel_error || self.worst.is_none() || err.is_nan() {
            self.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
            self.worst = Some(id);
        }
    }

    pub fn passed(&self) -> bool {
        self.instances > 0 && self.max_rel_error <= self.tolerance
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<18} {} instances={} coords={} skipped={} max_rel_err={:.3e} tol={:.0e}",
            self.category,
            if self.passed() { "PASS" } else { "FAIL" },
            self.instances,
            self.coordinates,
            self.skipped,
            self.max_rel_error,
            self.tolerance
        )?;
        if !self.passed() {
            if let Some(id) = self.worst {
                write!(f, " worst=[{id}]")?;
            }
        }
        Ok(())
    }
}

/// `‖a − n‖_∞ / max(‖a‖_∞, ‖n‖_∞, floor)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(SCALE_FLOOR, f64::max);
    diff / scale
}

fn random_matrix(rows: usize, cols: usize, spread: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-spread..spread))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).expect("finite by construction")
}

fn entropy_instance(id: InstanceId) -> Result<GramMatrix> {
    let mut rng = id.rng();
    let l = rng.random_range(3..=12);
    let d = rng.random_range(1..=4);
    let sigma = rng.random_range(0.5..2.0);
    gram(&random_matrix(l, d, 1.5, &mut rng), sigma)
}

/// Checks `grad_fn` against finite differences of `−ln tr(K²)` in each entry of `K`.
pub fn check_entropy_gradient_with<F>(seed: u64, trials: usize, grad_fn: F) -> Result<CheckOutcome>
where
    F: Fn(&GramMatrix) -> Result<DenseMatrix>,
{
    let mut out = CheckOutcome::new("entropy_gram", ENTROPY_TOLERANCE);
    for trial in 0..trials {
        let id = InstanceId {
            seed,
            category: 0,
            trial: trial as u32,
        };
        let g = entropy_instance(id)?;
        let analytic = grad_fn(&g)?;
        let mut k = g.matrix().clone();
        let mut numeric = Vec::with_capacity(k.as_slice().len());
        for i in 0..k.as_slice().len() {
            let orig = k.as_slice()[i];
            k.as_mut_slice()[i] = orig + ENTROPY_STEP;
            let fp = entropy2_nats(&k);
            k.as_mut_slice()[i] = orig - ENTROPY_STEP;
            let fm = entropy2_nats(&k);
            k.as_mut_slice()[i] = orig;
            numeric.push((fp - fm) / (2.0 * ENTROPY_STEP));
        }
        let err = relative_error(analytic.as_slice(), &numeric);
        out.record(id, err, numeric.len(), 0);
    }
    Ok(out)
}

pub fn check_entropy_gradient(seed: u64, trials: usize) -> Result<CheckOutcome> {
    check_entropy_gradient_with(seed, trials, grad_entropy_wrt_gram)
}

/// `(x, z, σx, σz)` with `l ≤ 16`, `d_z ≤ 4`.
pub fn mi_instance(id: InstanceId) -> (DenseMatrix, DenseMatrix, f64, f64) {
    let mut rng = id.rng();
    let l = rng.random_range(4..=16);
    let dx = rng.random_range(1..=6);
    let dz = rng.random_range(1..=4);
    let x = random_matrix(l, dx, 1.5, &mut rng);
    let z = random_matrix(l, dz, 1.5, &mut rng);
    let sx = rng.random_range(0.5..3.0);
    let sz = rng.random_range(0.5..3.0);
    (x, z, sx, sz)
}

pub fn check_mi_gradient(seed: u64, trials: usize) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("mi_latent", TOLERANCE);
    for trial in 0..trials {
        let id = InstanceId {
            seed,
            category: 1,
            trial: trial as u32,
        };
        let (x, mut z, sx, sz) = mi_instance(id);
        let analytic = grad_mi_wrt_latent(&x, &z, sx, sz)?;
        let mut numeric = Vec::with_capacity(z.as_slice().len());
        for i in 0..z.as_slice().len() {
            let orig = z.as_slice()[i];
            z.as_mut_slice()[i] = orig + MI_STEP;
            let fp = mutual_information_nats(&x, &z, sx, sz)?;
            z.as_mut_slice()[i] = orig - MI_STEP;
            let fm = mutual_information_nats(&x, &z, sx, sz)?;
            z.as_mut_slice()[i] = orig;
            numeric.push((fp - fm) / (2.0 * MI_STEP));
        }
        out.record(
            id,
            relative_error(analytic.as_slice(), &numeric),
            numeric.len(),
            0,
        );
    }
    Ok(out)
}

fn category_of(kind: ObjectiveKind) -> u32 {
    2 + ObjectiveKind::ALL
        .iter()
        .position(|&k| k == kind)
        .unwrap_or(0) as u32
}

/// A small random model, batch and objective of the given kind
/// (`l ≤ 8`, every width ≤ 6, one relu hidden layer).
pub fn backward_instance(
    kind: ObjectiveKind,
    id: InstanceId,
) -> Result<(MlpModel, Batch, ObjectiveSpec)> {
    let mut rng = id.rng();
    let dx = rng.random_range(2..=6);
    let hidden = rng.random_range(2..=6);
    let dz = rng.random_range(1..=4);
    let classes = rng.random_range(2..=4);
    let l = rng.random_range(4..=8);
    let specs = LayerSpec::encoder_from_dims(&[dx, hidden, dz])?;
    let mut model = init_model(&specs, classes, rng.random())?;
    for layer in model.layers_mut() {
        for b in layer.bias.iter_mut() {
            *b = rng.random_range(-0.2..0.2);
        }
    }
    let x = random_matrix(l, dx, 1.5, &mut rng);
    let labels = (0..l).map(|_| rng.random_range(0..classes)).collect();
    let roles = (0..l)
        .map(|i| {
            if i % 2 == 0 {
                Role::Source
            } else {
                Role::Cross
            }
        })
        .collect();
    let batch = Batch::new(x, labels, roles)?;
    let beta = rng.random_range(0.5..2.0);
    let lambda = rng.random_range(0.2..1.0);
    let lambda2 = rng.random_range(0.2..1.0);
    let sigma = rng.random_range(0.5..2.0);
    let objective = ObjectiveSpec::new(kind, beta, lambda, lambda2, sigma)?
        .with_latent_bandwidth(rng.random_range(0.5..2.0))?
        .with_mmd_bandwidth(rng.random_range(0.5..2.0))?;
    Ok((model, batch, objective))
}

fn param_mut(model: &mut MlpModel, mut idx: usize) -> &mut f64 {
    for layer in model.layers_mut() {
        let nw = layer.weights.as_slice().len();
        if idx < nw {
            return &mut layer.weights.as_mut_slice()[idx];
        }
        idx -= nw;
        if idx < layer.bias.len() {
            return &mut layer.bias[idx];
        }
        idx -= layer.bias.len();
    }
    panic!("parameter index out of range");
}

/// Checks [`backward`] against finite differences of [`assemble_loss`] in every parameter.
pub fn check_backward(kind: ObjectiveKind, seed: u64, trials: usize) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new(format!("backward_{}", kind.name()), TOLERANCE);
    for trial in 0..trials {
        let id = InstanceId {
            seed,
            category: category_of(kind),
            trial: trial as u32,
        };
        let (model, batch, objective) = backward_instance(kind, id)?;
        let analytic_all = backward(&model, &batch, &objective)?.flatten();
        let base_pattern = relu_pattern(&model, &batch.x, kind)?;
        let mut probe = model.clone();
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        let mut skipped = 0;
        for (i, &a) in analytic_all.iter().enumerate() {
            let orig = *param_mut(&mut probe, i);
            *param_mut(&mut probe, i) = orig + BACKWARD_STEP;
            let same_p = relu_pattern(&probe, &batch.x, kind)? == base_pattern;
            let fp = assemble_loss(&objective, &probe, &batch)?.total;
            *param_mut(&mut probe, i) = orig - BACKWARD_STEP;
            let same_m = relu_pattern(&probe, &batch.x, kind)? == base_pattern;
            let fm = assemble_loss(&objective, &probe, &batch)?.total;
            *param_mut(&mut probe, i) = orig;
            if same_p && same_m {
                analytic.push(a);
                numeric.push((fp - fm) / (2.0 * BACKWARD_STEP));
            } else {
                skipped += 1;
            }
        }
        out.record(
            id,
            relative_error(&analytic, &numeric),
            numeric.len(),
            skipped,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradcheckPlan {
    pub seed: u64,
    pub entropy_trials: usize,
    pub mi_trials: usize,
    pub backward_trials: usize,
}

impl Default for GradcheckPlan {
    fn default() -> Self {
        Self {
            seed: 0,
            entropy_trials: 100,
            mi_trials: 100,
            backward_trials: 50,
        }
    }
}

/// Every category: entropy, MI, then backward for each objective kind.
pub fn run_all(plan: &GradcheckPlan) -> Result<Vec<CheckOutcome>> {
    let mut out = vec![
        check_entropy_gradient(plan.seed, plan.entropy_trials)?,
        check_mi_gradient(plan.seed, plan.mi_trials)?,
    ];
    for kind in ObjectiveKind::ALL {
        out.push(check_backward(kind, plan.seed, plan.backward_trials)?);
    }
    Ok(out)
}
