//! Recovery of `x` (up to sign) from `bᵢ = ‖Pᵢx‖²`.
//!
//! The solver minimizes `F(z) = Σᵢ (zᵗPᵢz − bᵢ)²`. Each residual has
//! derivative `2Pᵢz`, so `∇F(z) = 4 Σᵢ (zᵗPᵢz − bᵢ) Pᵢz` and the residual
//! Jacobian has rows `2(Pᵢz)ᵗ`. Every restart runs backtracking gradient descent
//! first and then damped Gauss–Newton; only steps that decrease `F` are taken.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::injectivity::measurement_map;
use crate::linalg;
use crate::projection::{ProjectionCollection, TOL_STRUCT};
use crate::rng;

/// Measured squared magnitudes `‖Pᵢx‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVector {
    #[serde(with = "linalg::vec_serde")]
    values: DVector<f64>,
    #[serde(default)]
    collection_ref: String,
}

impl MeasurementVector {
    /// Entries in `[−tol_struct, 0)` are clamped to zero; more negative ones are rejected.
    pub fn new(values: Vec<f64>, collection_ref: impl Into<String>) -> Result<Self> {
        let mut values = DVector::from_vec(values);
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() || *v < -TOL_STRUCT {
                return Err(Error::NegativeMeasurement { index: i, value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            values,
            collection_ref: collection_ref.into(),
        })
    }

    /// Exact measurements of `x`.
    pub fn of(collection: &ProjectionCollection, x: &DVector<f64>, collection_ref: impl Into<String>) -> Self {
        Self {
            values: measurement_map(collection, x),
            collection_ref: collection_ref.into(),
        }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn collection_ref(&self) -> &str {
        &self.collection_ref
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Validates the record after deserialization.
    pub fn checked(self) -> Result<Self> {
        Self::new(self.values.iter().copied().collect(), self.collection_ref)
    }
}

/// `F(z)` and `∇F(z)`.
pub fn objective_and_gradient(
    collection: &ProjectionCollection,
    b: &MeasurementVector,
    z: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    check(collection, b, z)?;
    Ok(eval(collection, b.values(), z))
}

fn check(collection: &ProjectionCollection, b: &MeasurementVector, z: &DVector<f64>) -> Result<()> {
    if b.len() != collection.len() {
        return Err(Error::DimensionMismatch {
            expected: collection.len(),
            found: b.len(),
        });
    }
    if z.len() != collection.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: collection.ambient_dim(),
            found: z.len(),
        });
    }
    Ok(())
}

fn eval(collection: &ProjectionCollection, b: &DVector<f64>, z: &DVector<f64>) -> (f64, DVector<f64>) {
    let mut f = 0.0;
    let mut grad = DVector::zeros(z.len());
    for (p, &bi) in collection.iter().zip(b.iter()) {
        let pz = p.apply(z);
        let r = z.dot(&pz) - bi;
        f += r * r;
        grad.axpy(4.0 * r, &pz, 1.0);
    }
    (f, grad)
}

fn objective(collection: &ProjectionCollection, b: &DVector<f64>, z: &DVector<f64>) -> f64 {
    collection
        .iter()
        .zip(b.iter())
        .map(|(p, &bi)| (p.quadratic_form(z) - bi).powi(2))
        .sum()
}

/// `min(‖x̂ − x‖, ‖x̂ + x‖)`.
pub fn recovery_error(x_hat: &DVector<f64>, x_true: &DVector<f64>) -> Result<f64> {
    if x_hat.len() != x_true.len() {
        return Err(Error::DimensionMismatch {
            expected: x_true.len(),
            found: x_hat.len(),
        });
    }
    Ok((x_hat - x_true).norm().min((x_hat + x_true).norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructBudget {
    /// Starting points, the spectral seed included.
    pub restarts: usize,
    pub max_iterations: usize,
    /// Relative residual target: converged iff residual ≤ tol·(1 + ‖b‖).
    pub tol_recon: f64,
    pub seed: u64,
}

impl Default for ReconstructBudget {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iterations: 2000,
            tol_recon: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    #[serde(with = "linalg::vec_serde")]
    pub x_hat: DVector<f64>,
    /// `‖(x̂ᵗPᵢx̂ − bᵢ)ᵢ‖₂`, recomputed from `x_hat`.
    pub residual: f64,
    pub restarts_used: usize,
    pub converged: bool,
    /// Iterations of the winning restart.
    pub iterations: usize,
    /// Other sign-canonical solutions that also meet the residual target and
    /// differ from `x_hat` (and each other) by more than [`AMBIGUITY_GAP`].
    #[serde(with = "vec_list_serde")]
    pub alternatives: Vec<DVector<f64>>,
}

/// Distance (modulo sign) above which two converged solutions are distinct.
pub const AMBIGUITY_GAP: f64 = 1e-4;

mod vec_list_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<f64>>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Ok(rows.into_iter().map(DVector::from_vec).collect())
    }
}

/// One restart of the local solver.
#[derive(Debug, Clone)]
pub struct Descent {
    pub z: DVector<f64>,
    /// `F` at the start and after every accepted step.
    pub history: Vec<f64>,
    pub iterations: usize,
}

const GD_ITERATIONS: usize = 100;
const ARMIJO: f64 = 1e-4;

/// Gradient descent with backtracking, then damped Gauss–Newton.
pub fn descend(collection: &ProjectionCollection, b: &DVector<f64>, z0: &DVector<f64>, max_iterations: usize) -> Descent {
    let mut z = z0.clone();
    let (mut f, mut grad) = eval(collection, b, &z);
    let mut history = vec![f];
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < max_iterations && f > 0.0 {
        iterations += 1;
        let gd_phase = iterations <= GD_ITERATIONS;
        let accepted = if gd_phase {
            gradient_step(collection, b, &z, f, &grad, &mut step)
        } else {
            gauss_newton_step(collection, b, &z, f)
                .or_else(|| gradient_step(collection, b, &z, f, &grad, &mut step))
        };
        match accepted {
            Some((nz, nf)) => {
                z = nz;
                f = nf;
                grad = eval(collection, b, &z).1;
                history.push(f);
            }
            // Nothing decreases F any more; in the GD phase switch to Gauss–Newton.
            None if gd_phase => iterations = GD_ITERATIONS,
            None => break,
        }
    }
    Descent {
        z,
        history,
        iterations,
    }
}

fn gradient_step(
    collection: &ProjectionCollection,
    b: &DVector<f64>,
    z: &DVector<f64>,
    f: f64,
    grad: &DVector<f64>,
    step: &mut f64,
) -> Option<(DVector<f64>, f64)> {
    let g2 = grad.norm_squared();
    if g2 == 0.0 {
        return None;
    }
    let mut t = *step * 2.0;
    for _ in 0..60 {
        let nz = z - grad * t;
        let nf = objective(collection, b, &nz);
        if nf <= f - ARMIJO * t * g2 && nf < f {
            *step = t;
            return Some((nz, nf));
        }
        t *= 0.5;
    }
    None
}

fn gauss_newton_step(
    collection: &ProjectionCollection,
    b: &DVector<f64>,
    z: &DVector<f64>,
    f: f64,
) -> Option<(DVector<f64>, f64)> {
    let m = z.len();
    let n = collection.len();
    let mut jac = DMatrix::zeros(n, m);
    let mut r = DVector::zeros(n);
    for (i, (p, &bi)) in collection.iter().zip(b.iter()).enumerate() {
        let pz = p.apply(z);
        r[i] = z.dot(&pz) - bi;
        jac.row_mut(i).copy_from(&(pz * 2.0).transpose());
    }
    let svd = jac.svd(true, true);
    let cut = 1e-12 * svd.singular_values.max();
    let d = svd.solve(&(-r), cut).ok()?;
    let mut t = 1.0;
    for _ in 0..30 {
        let nz = z + &d * t;
        let nf = objective(collection, b, &nz);
        if nf < f {
            return Some((nz, nf));
        }
        t *= 0.5;
    }
    None
}

/// Starting points: the spectral seed (top eigenvector of `Σ bᵢPᵢ`, scaled so
/// that `Σᵢ zᵗPᵢz = Σ bᵢ`) followed by random unit vectors scaled by
/// `√(Σbᵢ · M / Σkᵢ)`.
fn starting_points(collection: &ProjectionCollection, b: &DVector<f64>, budget: &ReconstructBudget) -> Vec<DVector<f64>> {
    let m = collection.ambient_dim();
    let total: f64 = b.sum();
    let rank_sum: usize = collection.ranks().iter().sum();
    let random_scale = (total * m as f64 / rank_sum as f64).sqrt();

    let weighted = collection
        .iter()
        .zip(b.iter())
        .fold(DMatrix::zeros(m, m), |acc, (p, &bi)| acc + p.matrix() * bi);
    let (_, v) = linalg::top_eigenpair(&weighted);
    let sum_p = collection
        .iter()
        .fold(DMatrix::zeros(m, m), |acc, p| acc + p.matrix());
    let denom = v.dot(&(&sum_p * &v));
    let spectral_scale = if denom > 0.0 {
        (total / denom).sqrt()
    } else {
        random_scale
    };

    let mut out = Vec::with_capacity(budget.restarts.max(1));
    out.push(v * spectral_scale);
    for r in 1..budget.restarts.max(1) {
        let mut s = rng::substream(budget.seed, &[r as u64]);
        out.push(linalg::random_unit(m, &mut s) * random_scale);
    }
    out
}

/// Multi-start reconstruction; the best restart wins by (residual, index).
pub fn reconstruct(
    collection: &ProjectionCollection,
    b: &MeasurementVector,
    budget: &ReconstructBudget,
) -> Result<ReconstructionResult> {
    if b.len() != collection.len() {
        return Err(Error::DimensionMismatch {
            expected: collection.len(),
            found: b.len(),
        });
    }
    let values = b.values();
    let target = budget.tol_recon * (1.0 + values.norm());
    let starts = starting_points(collection, values, budget);
    let outcomes: Vec<(DVector<f64>, f64, usize)> = starts
        .par_iter()
        .map(|z0| {
            let d = descend(collection, values, z0, budget.max_iterations);
            let z = linalg::canonical_sign(d.z);
            let residual = objective(collection, values, &z).sqrt();
            (z, residual, d.iterations)
        })
        .collect();

    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.1.total_cmp(&b.1).then(i.cmp(j)))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let (x_hat, residual, iterations) = outcomes[best].clone();

    let mut alternatives: Vec<DVector<f64>> = Vec::new();
    for (z, res, _) in &outcomes {
        if *res > target {
            continue;
        }
        let distinct = std::iter::once(&x_hat)
            .chain(alternatives.iter())
            .all(|s| recovery_error(z, s).is_ok_and(|e| e > AMBIGUITY_GAP));
        if distinct {
            alternatives.push(z.clone());
        }
    }

    Ok(ReconstructionResult {
        x_hat,
        residual,
        restarts_used: outcomes.len(),
        converged: residual <= target,
        iterations,
        alternatives,
    })
}
