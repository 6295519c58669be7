//! Injectivity of the magnitude map `x ↦ (‖P₁x‖², …, ‖P_Nx‖²)` modulo sign.
//!
//! The map is injective exactly when the vectors `P₁x, …, P_Nx` span `R^M` for
//! every nonzero `x`. The analysis below works with the *spanning defect*, the
//! smallest singular value of `[P₁x | … | P_Nx]`, and with *witnesses*: unit
//! pairs `(x, y)` with `yᵗPᵢx = 0` for all `i`. A witness exists iff the defect
//! vanishes somewhere, and each witness yields the colliding pair `x ± y`.
//!
//! Refuting injectivity is a search problem ([`find_witness`]); certifying it
//! is a covering argument: `x ↦ [P₁x | … | P_Nx]` is `√N`-Lipschitz in the
//! spectral norm, hence so is the defect, and a cell of radius `r` whose center
//! has defect at least `tol_cert + √N·r` contains no zero
//! ([`certify_injective`]).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, TOL_RANK_REL};
use crate::projection::{Projection, ProjectionCollection};
use crate::rng;
use crate::sphere;

/// Numerical thresholds for the injectivity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Largest accepted witness residual `max_i |yᵗPᵢx|`.
    pub witness: f64,
    /// Smallest defect a certificate may rely on.
    pub cert: f64,
    /// Largest accepted measurement gap of a collision pair.
    pub collision: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            witness: 1e-8,
            cert: 1e-4,
            collision: 1e-7,
        }
    }
}

/// `(xᵗP₁x, …, xᵗP_Nx)`.
pub fn measurement_map(collection: &ProjectionCollection, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        collection.len(),
        collection.iter().map(|p| p.quadratic_form(x)),
    )
}

/// The `M×N` matrix `[P₁x | … | P_Nx]`.
pub fn image_matrix(collection: &ProjectionCollection, x: &DVector<f64>) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = collection.iter().map(|p| p.apply(x)).collect();
    DMatrix::from_columns(&cols)
}

/// `G(x) = Σᵢ (Pᵢx)(Pᵢx)ᵗ`, symmetric positive semidefinite.
pub fn gram(collection: &ProjectionCollection, x: &DVector<f64>) -> DMatrix<f64> {
    let a = image_matrix(collection, x);
    let g = &a * a.transpose();
    (&g + g.transpose()) * 0.5
}

/// Spanning defect at a unit direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanningDefect {
    #[serde(with = "linalg::vec_serde")]
    pub x: DVector<f64>,
    pub defect: f64,
}

fn defect_at_unit(collection: &ProjectionCollection, x: &DVector<f64>) -> f64 {
    linalg::smallest_singular_value(&image_matrix(collection, x))
}

/// Smallest singular value of `[P₁x | … | P_Nx]` after normalizing `x`.
pub fn spanning_defect(collection: &ProjectionCollection, x: &DVector<f64>) -> Result<SpanningDefect> {
    check_dim(collection, x)?;
    let n = x.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    let x = x / n;
    let defect = defect_at_unit(collection, &x);
    Ok(SpanningDefect { x, defect })
}

fn check_dim(collection: &ProjectionCollection, x: &DVector<f64>) -> Result<()> {
    if x.len() != collection.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: collection.ambient_dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Unit pair `(x, y)` with `yᵗPᵢx ≈ 0` for every `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(with = "linalg::vec_serde")]
    pub x: DVector<f64>,
    #[serde(with = "linalg::vec_serde")]
    pub y: DVector<f64>,
    /// `max_i |yᵗPᵢx|`.
    pub residual: f64,
}

impl Witness {
    /// Normalizes both vectors and evaluates the residual.
    pub fn new(collection: &ProjectionCollection, x: &DVector<f64>, y: &DVector<f64>) -> Result<Self> {
        check_dim(collection, x)?;
        check_dim(collection, y)?;
        let (nx, ny) = (x.norm(), y.norm());
        if nx == 0.0 || ny == 0.0 {
            return Err(Error::ZeroVector);
        }
        let (x, y) = (x / nx, y / ny);
        let residual = bilinear_residual(collection, &x, &y);
        Ok(Self { x, y, residual })
    }
}

fn bilinear_residual(collection: &ProjectionCollection, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    collection
        .iter()
        .map(|p| p.bilinear(y, x).abs())
        .fold(0.0, f64::max)
}

/// `g(x, y) = Σᵢ (yᵗPᵢx)²`.
pub fn bilinear_objective(collection: &ProjectionCollection, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    collection.iter().map(|p| p.bilinear(y, x).powi(2)).sum()
}

/// Two distinct vectors (modulo sign) with equal measurements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionPair {
    #[serde(with = "linalg::vec_serde")]
    pub u: DVector<f64>,
    #[serde(with = "linalg::vec_serde")]
    pub v: DVector<f64>,
    /// `max_i |‖Pᵢu‖² − ‖Pᵢv‖²|`.
    pub max_measurement_gap: f64,
}

/// `u = x + y`, `v = x − y`. Their measurements differ by `4·yᵗPᵢx` entrywise.
pub fn collision_from_witness(collection: &ProjectionCollection, w: &Witness) -> Result<CollisionPair> {
    check_dim(collection, &w.x)?;
    check_dim(collection, &w.y)?;
    let u = &w.x + &w.y;
    let v = &w.x - &w.y;
    let scale = w.x.norm().max(w.y.norm());
    let floor = TOL_RANK_REL * scale.max(f64::MIN_POSITIVE);
    for n in [u.norm(), v.norm()] {
        if n < floor {
            return Err(Error::DegenerateWitness { norm: n });
        }
    }
    let gap = (measurement_map(collection, &u) - measurement_map(collection, &v)).amax();
    Ok(CollisionPair {
        u,
        v,
        max_measurement_gap: gap,
    })
}

/// Budget for [`min_defect_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Approximate number of grid points on the projective sphere.
    pub grid_points: usize,
    /// Number of lowest grid points refined by local descent.
    pub refine_top: usize,
    /// Extra random starting points.
    pub random_starts: usize,
    /// Alternations per local descent.
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            grid_points: 4000,
            refine_top: 12,
            random_starts: 8,
            iterations: 200,
            seed: 0,
        }
    }
}

/// Budget for [`find_witness`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessBudget {
    pub restarts: usize,
    /// Alternations per restart.
    pub alternations: usize,
    /// Gauss–Newton polishing steps after the alternation stalls.
    pub polish_steps: usize,
    pub seed: u64,
}

impl Default for WitnessBudget {
    fn default() -> Self {
        Self {
            restarts: 50,
            alternations: 200,
            polish_steps: 30,
            seed: 0,
        }
    }
}

impl WitnessBudget {
    pub fn scaled(self, factor: usize) -> Self {
        Self {
            restarts: self.restarts * factor,
            alternations: self.alternations * factor,
            ..self
        }
    }
}

/// Result of one local descent on `g(x, y)` over pairs of unit vectors.
#[derive(Debug, Clone)]
pub struct LocalSearch {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    /// `g` after every half-step and accepted polishing step.
    pub history: Vec<f64>,
    pub residual: f64,
}

/// Alternating minimization of `g(x, y) = Σᵢ (yᵗPᵢx)²` from `x0`, followed by
/// Gauss–Newton polishing of the bilinear system.
///
/// For fixed `x` the optimal unit `y` is the least eigenvector of `G(x)`; since
/// `yᵗPᵢx = (Pᵢy)ᵗx`, for fixed `y` the optimal `x` is the least eigenvector of
/// `G(y)`. Each half-step is therefore nonincreasing in `g`; polishing steps
/// are accepted only when they decrease `g`.
pub fn alternating_search(
    collection: &ProjectionCollection,
    x0: &DVector<f64>,
    alternations: usize,
    polish_steps: usize,
    stop_residual: f64,
) -> LocalSearch {
    let mut x = x0 / x0.norm();
    let (mut g, mut y) = linalg::least_eigenpair(&gram(collection, &x));
    let mut history = vec![g.max(0.0)];
    let stop_g = stop_residual * stop_residual;
    for _ in 0..alternations {
        if g <= stop_g {
            break;
        }
        let before = g;
        let (gx, nx) = linalg::least_eigenpair(&gram(collection, &y));
        x = nx;
        history.push(gx.max(0.0));
        let (gy, ny) = linalg::least_eigenpair(&gram(collection, &x));
        y = ny;
        g = gy;
        history.push(g.max(0.0));
        if before - g <= 1e-10 * before {
            break;
        }
    }
    let mut current = bilinear_objective(collection, &x, &y);
    for _ in 0..polish_steps {
        if current <= 1e-32 {
            break;
        }
        match gauss_newton_step(collection, &x, &y, current) {
            Some((nx, ny, ng)) => {
                x = nx;
                y = ny;
                current = ng;
                history.push(current);
            }
            None => break,
        }
    }
    let residual = bilinear_residual(collection, &x, &y);
    LocalSearch {
        x,
        y,
        history,
        residual,
    }
}

/// One damped Gauss–Newton step on `rᵢ = yᵗPᵢx` with tangency rows keeping
/// `x` and `y` on the sphere to first order.
fn gauss_newton_step(
    collection: &ProjectionCollection,
    x: &DVector<f64>,
    y: &DVector<f64>,
    current: f64,
) -> Option<(DVector<f64>, DVector<f64>, f64)> {
    let m = x.len();
    let n = collection.len();
    let mut jac = DMatrix::zeros(n + 2, 2 * m);
    let mut rhs = DVector::zeros(n + 2);
    for (i, p) in collection.iter().enumerate() {
        let py = p.apply(y);
        let px = p.apply(x);
        for j in 0..m {
            jac[(i, j)] = py[j];
            jac[(i, m + j)] = px[j];
        }
        rhs[i] = -px.dot(y);
    }
    for j in 0..m {
        jac[(n, j)] = x[j];
        jac[(n + 1, m + j)] = y[j];
    }
    let svd = jac.svd(true, true);
    let cut = 1e-12 * svd.singular_values.max();
    let step = svd.solve(&rhs, cut).ok()?;
    let mut t = 1.0;
    for _ in 0..6 {
        let nx = x + step.rows(0, m) * t;
        let ny = y + step.rows(m, m) * t;
        let (nxn, nyn) = (nx.norm(), ny.norm());
        if nxn > 0.0 && nyn > 0.0 {
            let (nx, ny) = (nx / nxn, ny / nyn);
            let g = bilinear_objective(collection, &nx, &ny);
            if g < current {
                return Some((nx, ny, g));
            }
        }
        t *= 0.5;
    }
    None
}

/// Directions lying in the joint kernel of a maximal group of projections
/// whose ranks sum to at most `M − 1`.
///
/// At such an `x` every projection of the group vanishes, so at most
/// `N − |group|` image vectors remain. When `M − 1` rank-one projections are
/// present and `N ≤ 2M − 2` this is always a zero of the spanning defect.
/// Enumeration is skipped for more than 20 projections.
pub fn kernel_directions(collection: &ProjectionCollection) -> Vec<DVector<f64>> {
    let n = collection.len();
    let m = collection.ambient_dim();
    if n > 20 {
        return Vec::new();
    }
    let ranks = collection.ranks();
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let total: usize = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if total > m - 1 {
            continue;
        }
        let maximal = (0..n)
            .filter(|&i| mask >> i & 1 == 0)
            .all(|i| total + ranks[i] > m - 1);
        if !maximal {
            continue;
        }
        let stacked: Vec<&Projection> = (0..n)
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| &collection.projections()[i])
            .collect();
        let mut rows = DMatrix::zeros(stacked.len() * m, m);
        for (b, p) in stacked.iter().enumerate() {
            rows.rows_mut(b * m, m).copy_from(p.matrix());
        }
        let (v, _) = linalg::null_vector(&rows);
        out.push(v);
    }
    out
}

/// Lowest spanning defect found by grid evaluation plus local descent.
///
/// Candidates: a quasi-uniform grid on the projective sphere, joint-kernel
/// directions ([`kernel_directions`]) and seeded random points. The lowest
/// `refine_top` grid values, all kernel directions and the random points are
/// refined by [`alternating_search`]; ties go to the earliest candidate.
pub fn min_defect_search(collection: &ProjectionCollection, budget: &SearchBudget) -> SpanningDefect {
    let m = collection.ambient_dim();
    let grid = sphere::search_grid(m, budget.grid_points);
    let values: Vec<f64> = grid.par_iter().map(|x| defect_at_unit(collection, x)).collect();

    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let mut best = SpanningDefect {
        x: grid[order[0]].clone(),
        defect: values[order[0]],
    };

    let mut starts: Vec<DVector<f64>> = kernel_directions(collection);
    starts.extend(order.iter().take(budget.refine_top).map(|&i| grid[i].clone()));
    starts.extend((0..budget.random_starts).map(|r| {
        let mut s = rng::substream(budget.seed, &[0x5EA2C4, r as u64]);
        linalg::random_unit(m, &mut s)
    }));

    let refined: Vec<SpanningDefect> = starts
        .par_iter()
        .map(|x0| {
            let start = SpanningDefect {
                x: x0.clone(),
                defect: defect_at_unit(collection, x0),
            };
            let local = alternating_search(collection, x0, budget.iterations, 10, 0.0);
            // Both members of a pair see the same minimum of g; keep the better one.
            [start, candidate(collection, local.x), candidate(collection, local.y)]
                .into_iter()
                .min_by(|a, b| a.defect.total_cmp(&b.defect))
                .unwrap()
        })
        .collect();
    for r in refined {
        if r.defect < best.defect {
            best = r;
        }
    }
    best.x = linalg::canonical_sign(best.x);
    best
}

fn candidate(collection: &ProjectionCollection, x: DVector<f64>) -> SpanningDefect {
    let defect = defect_at_unit(collection, &x);
    SpanningDefect { x, defect }
}

/// Restarts are evaluated in fixed batches so that early exit does not depend
/// on thread scheduling.
const RESTART_BATCH: usize = 8;

/// Multi-start search for a witness with residual at most `tol_witness`.
///
/// Joint-kernel directions are tried first, then `budget.restarts` random
/// starts drawn from substreams `(seed, restart)`. The search stops early once
/// a residual below `tol_witness / 10` is seen; the returned witness is the one
/// of least residual, ties going to the lowest start index.
pub fn find_witness(
    collection: &ProjectionCollection,
    budget: &WitnessBudget,
    tol_witness: f64,
) -> Option<Witness> {
    let m = collection.ambient_dim();
    let early = tol_witness / 10.0;
    let run = |x0: &DVector<f64>| {
        alternating_search(collection, x0, budget.alternations, budget.polish_steps, early / 100.0)
    };

    let mut best: Option<LocalSearch> = None;
    let consider = |cand: LocalSearch, best: &mut Option<LocalSearch>| {
        if best.as_ref().is_none_or(|b| cand.residual < b.residual) {
            *best = Some(cand);
        }
    };

    for x0 in kernel_directions(collection) {
        let local = run(&x0);
        let done = local.residual < early;
        consider(local, &mut best);
        if done {
            return best.map(|b| to_witness(collection, b));
        }
    }

    let mut start = 0;
    while start < budget.restarts {
        let end = (start + RESTART_BATCH).min(budget.restarts);
        let batch: Vec<LocalSearch> = (start..end)
            .into_par_iter()
            .map(|r| {
                let mut s = rng::substream(budget.seed, &[r as u64]);
                run(&linalg::random_unit(m, &mut s))
            })
            .collect();
        for local in batch {
            consider(local, &mut best);
        }
        if best.as_ref().is_some_and(|b| b.residual < early) {
            break;
        }
        start = end;
    }
    best.filter(|b| b.residual <= tol_witness)
        .map(|b| to_witness(collection, b))
}

/// `(x, y)` and `(y, x)` solve the same system; `x` is the member with the
/// smaller spanning defect.
fn to_witness(collection: &ProjectionCollection, local: LocalSearch) -> Witness {
    let (x, y) = if defect_at_unit(collection, &local.y) < defect_at_unit(collection, &local.x) {
        (local.y, local.x)
    } else {
        (local.x, local.y)
    };
    Witness {
        x,
        y,
        residual: local.residual,
    }
}

/// Outcome classes of the injectivity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    CertifiedInjective,
    WitnessFound,
    Inconclusive,
}

/// Settings for grid certification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertGrid {
    /// Covering radius of the initial grid.
    pub delta: f64,
    /// Cap on evaluated nodes (initial grid plus refinements).
    pub node_cap: u128,
    /// Cells failing the Lipschitz test are halved at most this many times.
    pub max_refine_depth: usize,
}

impl Default for CertGrid {
    fn default() -> Self {
        Self {
            delta: 1e-2,
            node_cap: 10_000_000,
            max_refine_depth: 12,
        }
    }
}

/// Search effort recorded in a verdict.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_delta: Option<f64>,
    pub grid_nodes: u64,
    pub restarts: usize,
    pub alternations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityVerdict {
    pub status: Status,
    pub min_defect: f64,
    pub witness: Option<Witness>,
    pub budget: BudgetRecord,
    pub tolerances: Tolerances,
}

impl InjectivityVerdict {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

enum GridOutcome {
    Certified { min_defect: f64, nodes: u64 },
    Failed { min_defect: f64, nodes: u64 },
}

fn certify_grid(collection: &ProjectionCollection, tol_cert: f64, grid: &CertGrid) -> Result<GridOutcome> {
    let m = collection.ambient_dim();
    let initial = sphere::cell_count(m, grid.delta);
    if initial > grid.node_cap {
        return Err(Error::BudgetExceeded {
            nodes: initial,
            cap: grid.node_cap,
        });
    }
    let lipschitz = (collection.len() as f64).sqrt();
    let mut level = sphere::initial_cells(m, grid.delta);
    let mut nodes: u64 = 0;
    let mut min_defect = f64::INFINITY;
    for depth in 0..=grid.max_refine_depth {
        let mut pending = Vec::new();
        for chunk in level.chunks(4096) {
            let evaluated: Vec<(f64, f64)> = chunk
                .par_iter()
                .map(|c| (defect_at_unit(collection, &c.point()), c.radius()))
                .collect();
            nodes += chunk.len() as u64;
            for (cell, (d, r)) in chunk.iter().zip(evaluated) {
                min_defect = min_defect.min(d);
                if d < tol_cert {
                    return Ok(GridOutcome::Failed { min_defect, nodes });
                }
                if d < tol_cert + lipschitz * r {
                    pending.push(cell);
                }
            }
        }
        if pending.is_empty() {
            return Ok(GridOutcome::Certified { min_defect, nodes });
        }
        if depth == grid.max_refine_depth {
            break;
        }
        let next: Vec<sphere::Cell> = pending.iter().flat_map(|c| c.split()).collect();
        if nodes as u128 + next.len() as u128 > grid.node_cap {
            break;
        }
        level = next;
    }
    Ok(GridOutcome::Failed { min_defect, nodes })
}

/// Decides injectivity by grid certification, falling back to witness search.
///
/// Returns `CertifiedInjective` when every certification cell passes the
/// Lipschitz test, `WitnessFound` when [`find_witness`] succeeds, and
/// `Inconclusive` otherwise. Only affordable for small `M`; the initial grid
/// size is checked against `grid.node_cap`.
pub fn certify_injective(
    collection: &ProjectionCollection,
    tolerances: &Tolerances,
    grid: &CertGrid,
    witness_budget: &WitnessBudget,
) -> Result<InjectivityVerdict> {
    let outcome = certify_grid(collection, tolerances.cert, grid)?;
    let mut budget = BudgetRecord {
        grid_delta: Some(grid.delta),
        ..Default::default()
    };
    let grid_min = match outcome {
        GridOutcome::Certified { min_defect, nodes } => {
            budget.grid_nodes = nodes;
            return Ok(InjectivityVerdict {
                status: Status::CertifiedInjective,
                min_defect,
                witness: None,
                budget,
                tolerances: *tolerances,
            });
        }
        GridOutcome::Failed { min_defect, nodes } => {
            budget.grid_nodes = nodes;
            min_defect
        }
    };
    Ok(search_verdict(collection, tolerances, witness_budget, grid_min, budget))
}

/// Witness search only; for dimensions where certification is unaffordable.
pub fn refute_injective(
    collection: &ProjectionCollection,
    tolerances: &Tolerances,
    search: &SearchBudget,
    witness_budget: &WitnessBudget,
) -> InjectivityVerdict {
    let found = min_defect_search(collection, search);
    search_verdict(
        collection,
        tolerances,
        witness_budget,
        found.defect,
        BudgetRecord::default(),
    )
}

fn search_verdict(
    collection: &ProjectionCollection,
    tolerances: &Tolerances,
    witness_budget: &WitnessBudget,
    prior_min: f64,
    mut budget: BudgetRecord,
) -> InjectivityVerdict {
    budget.restarts = witness_budget.restarts;
    budget.alternations = witness_budget.alternations;
    match find_witness(collection, witness_budget, tolerances.witness) {
        Some(w) => InjectivityVerdict {
            status: Status::WitnessFound,
            min_defect: defect_at_unit(collection, &w.x).min(prior_min),
            witness: Some(w),
            budget,
            tolerances: *tolerances,
        },
        None => InjectivityVerdict {
            status: Status::Inconclusive,
            min_defect: prior_min,
            witness: None,
            budget,
            tolerances: *tolerances,
        },
    }
}

/// Result of the rank-one complement-property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplementReport {
    pub holds: bool,
    /// A partition `(S, S')` with neither side spanning, when `holds` is false.
    pub violating_partition: Option<(Vec<usize>, Vec<usize>)>,
}

/// Default cap on the number of lines for partition enumeration.
pub const PARTITION_CAP: usize = 24;

/// Complement property for a collection of lines: for every partition of the
/// indices, the lines on one side span `R^M`.
///
/// For rank-one collections this is equivalent to injectivity and serves as an
/// independent combinatorial check of the spanning criterion.
pub fn complement_property(collection: &ProjectionCollection, cap: usize) -> Result<ComplementReport> {
    let n = collection.len();
    if n > cap {
        return Err(Error::PartitionCapExceeded { count: n, cap });
    }
    let gens = collection
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.line_generator().ok_or(Error::NonRankOne {
                index: i,
                rank: p.rank(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = collection.ambient_dim();
    let spans = |idx: &[usize]| -> bool {
        if idx.len() < m {
            return false;
        }
        let cols: Vec<DVector<f64>> = idx.iter().map(|&i| gens[i].clone()).collect();
        linalg::numerical_rank(&DMatrix::from_columns(&cols)) == m
    };
    // Index 0 always sits in S; this visits each unordered partition once.
    for mask in 0u64..(1u64 << (n - 1)) {
        let mut s = vec![0];
        let mut s_prime = Vec::new();
        for i in 1..n {
            if mask >> (i - 1) & 1 == 1 {
                s.push(i);
            } else {
                s_prime.push(i);
            }
        }
        if !spans(&s) && !spans(&s_prime) {
            return Ok(ComplementReport {
                holds: false,
                violating_partition: Some((s, s_prime)),
            });
        }
    }
    Ok(ComplementReport {
        holds: true,
        violating_partition: None,
    })
}

/// Replaces each projection by the rank-one projections onto one orthonormal
/// basis of its image.
///
/// If the original collection admits phase retrieval then so does this frame,
/// for any basis choice; the converse needs every basis choice, so a
/// non-injective expansion refutes injectivity but an injective one proves
/// nothing.
pub fn expand_to_lines(collection: &ProjectionCollection) -> Result<ProjectionCollection> {
    let mut lines = Vec::new();
    for p in collection {
        let s = p.subspace();
        for c in s.basis().column_iter() {
            let m = c.len();
            lines.push(Projection::from_basis(&DMatrix::from_column_slice(m, 1, c.as_slice()))?);
        }
    }
    ProjectionCollection::new(lines)
}
