//! Reproducible experiments wired from the analysis modules: single-collection
//! checks, parameter sweeps, the two-basis example in `R³`, and bound tables.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::injectivity::{
    self, certify_injective, collision_from_witness, complement_property, refute_injective,
    CertGrid, CollisionPair, InjectivityVerdict, SearchBudget, Status, Tolerances, WitnessBudget,
};
use crate::linalg;
use crate::projection::{Projection, ProjectionCollection, Provenance};
use crate::rng;
use crate::sharpness::{obstruction_predicate, BoundReport};

/// Largest ambient dimension for which grid certification is attempted.
pub const CERTIFY_MAX_DIM: usize = 4;

/// Largest line count for which `check` cross-runs the complement property.
pub const COMPLEMENT_CROSS_CHECK_CAP: usize = 8;

/// Settings shared by `check`, `sweep` and the demo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub tolerances: Tolerances,
    pub grid: CertGrid,
    pub witness: WitnessBudget,
    pub search: SearchBudget,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            grid: CertGrid {
                delta: 0.05,
                ..CertGrid::default()
            },
            witness: WitnessBudget::default(),
            search: SearchBudget::default(),
        }
    }
}

impl CheckOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.witness.seed = seed;
        self.search.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    #[serde(flatten)]
    pub verdict: InjectivityVerdict,
    /// Complement-property result, for rank-one collections of modest size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complement_property: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collision: Option<CollisionPair>,
}

impl CheckReport {
    /// True when the complement property was evaluated and contradicts a
    /// decisive verdict.
    pub fn oracle_disagrees(&self) -> bool {
        matches!(
            (self.complement_property, self.verdict.status),
            (Some(true), Status::WitnessFound) | (Some(false), Status::CertifiedInjective)
        )
    }
}

/// Certifies when `M ≤ 4` and the grid fits the node cap, otherwise searches
/// for a witness only.
pub fn check(collection: &ProjectionCollection, opts: &CheckOptions) -> Result<CheckReport> {
    let m = collection.ambient_dim();
    let verdict = if m <= CERTIFY_MAX_DIM {
        match certify_injective(collection, &opts.tolerances, &opts.grid, &opts.witness) {
            Ok(v) => v,
            Err(Error::BudgetExceeded { .. }) => {
                refute_injective(collection, &opts.tolerances, &opts.search, &opts.witness)
            }
            Err(e) => return Err(e),
        }
    } else {
        refute_injective(collection, &opts.tolerances, &opts.search, &opts.witness)
    };
    let complement = if collection.iter().all(|p| p.rank() == 1)
        && collection.len() <= COMPLEMENT_CROSS_CHECK_CAP
    {
        Some(complement_property(collection, COMPLEMENT_CROSS_CHECK_CAP)?.holds)
    } else {
        None
    };
    let collision = match &verdict.witness {
        Some(w) => Some(collision_from_witness(collection, w)?),
        None => None,
    };
    Ok(CheckReport {
        verdict,
        complement_property: complement,
        collision,
    })
}

/// Either an explicit list or an inclusive span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntRange {
    List(Vec<usize>),
    Span { from: usize, to: usize },
}

impl IntRange {
    pub fn values(&self) -> Vec<usize> {
        match self {
            IntRange::List(v) => v.clone(),
            IntRange::Span { from, to } => (*from..=*to).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolicy {
    /// Each rank uniform in `1..=M−1`, drawn per trial.
    Random,
    /// Every projection has this rank.
    Uniform(usize),
    /// Explicit profile; its length must equal every `N` of the sweep.
    List(Vec<usize>),
}

fn default_grid() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub m: IntRange,
    pub n: IntRange,
    pub ranks: RankPolicy,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Initial covering radius for certification.
    #[serde(default = "default_grid")]
    pub grid: f64,
    #[serde(default)]
    pub restarts: Option<usize>,
    #[serde(default)]
    pub output: Option<String>,
    /// gnuplot-style data file.
    #[serde(default)]
    pub plot: Option<String>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ms = self.m.values();
        let ns = self.n.values();
        if ms.is_empty() {
            return Err(Error::InvalidInput("sweep M range is empty".into()));
        }
        if ns.is_empty() {
            return Err(Error::InvalidInput("sweep N range is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("sweep needs at least one trial".into()));
        }
        if let Some(&m) = ms.iter().find(|&&m| m < 2) {
            return Err(Error::InvalidInput(format!("ambient dimension {m} < 2")));
        }
        if ns.contains(&0) {
            return Err(Error::InvalidInput("N must be positive".into()));
        }
        for &m in &ms {
            match &self.ranks {
                RankPolicy::Random => {}
                RankPolicy::Uniform(k) => {
                    if *k == 0 || *k >= m {
                        return Err(Error::InvalidRank {
                            rank: *k,
                            ambient_dim: m,
                        });
                    }
                }
                RankPolicy::List(list) => {
                    if let Some(&n) = ns.iter().find(|&&n| n != list.len()) {
                        return Err(Error::InvalidInput(format!(
                            "rank list has {} entries but N = {n}",
                            list.len()
                        )));
                    }
                    if let Some(&k) = list.iter().find(|&&k| k == 0 || k >= m) {
                        return Err(Error::InvalidRank {
                            rank: k,
                            ambient_dim: m,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn profile_label(&self, n: usize) -> String {
        match &self.ranks {
            RankPolicy::Random => "random".into(),
            RankPolicy::Uniform(k) => vec![k.to_string(); n].join(" "),
            RankPolicy::List(l) => l.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
        }
    }

    fn ranks_for(&self, m: usize, n: usize, stream: &mut rng::StreamRng) -> Vec<usize> {
        match &self.ranks {
            RankPolicy::Random => (0..n).map(|_| stream.gen_range(1..m)).collect(),
            RankPolicy::Uniform(k) => vec![*k; n],
            RankPolicy::List(l) => l.clone(),
        }
    }

    fn check_options(&self, trial_seed: u64) -> CheckOptions {
        let mut opts = CheckOptions {
            tolerances: self.tolerances,
            grid: CertGrid {
                delta: self.grid,
                ..CertGrid::default()
            },
            ..CheckOptions::default()
        };
        if let Some(r) = self.restarts {
            opts.witness.restarts = r;
        }
        opts.with_seed(trial_seed)
    }
}

/// One `(M, N)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCellResult {
    pub m: usize,
    pub n: usize,
    pub rank_profile: String,
    pub trials: usize,
    pub injective_count: usize,
    pub witness_count: usize,
    pub inconclusive_count: usize,
    pub median_min_defect: f64,
    pub median_witness_residual: Option<f64>,
    pub wall_time_s: f64,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    })
}

/// Outcome of one sweep trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub status: Status,
    pub min_defect: f64,
    pub witness_residual: Option<f64>,
}

/// Trial `t` of cell `(m, n)` uses the substream `(seed, m, n, t)`.
pub fn run_trial(cfg: &SweepConfig, m: usize, n: usize, trial: usize) -> Result<TrialOutcome> {
    let mut stream = rng::substream(cfg.seed, &[m as u64, n as u64, trial as u64]);
    let ranks = cfg.ranks_for(m, n, &mut stream);
    let collection_seed = stream.next_u64();
    let search_seed = stream.next_u64();
    let collection = ProjectionCollection::sample(m, &ranks, collection_seed)?;
    let report = check(&collection, &cfg.check_options(search_seed))?;
    Ok(TrialOutcome {
        status: report.verdict.status,
        min_defect: report.verdict.min_defect,
        witness_residual: report.verdict.witness.map(|w| w.residual),
    })
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepCellResult>> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for m in cfg.m.values() {
        for n in cfg.n.values() {
            let start = Instant::now();
            let outcomes = (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, m, n, t))
                .collect::<Result<Vec<_>>>()?;
            let count = |s: Status| outcomes.iter().filter(|o| o.status == s).count();
            cells.push(SweepCellResult {
                m,
                n,
                rank_profile: cfg.profile_label(n),
                trials: cfg.trials,
                injective_count: count(Status::CertifiedInjective),
                witness_count: count(Status::WitnessFound),
                inconclusive_count: count(Status::Inconclusive),
                median_min_defect: median(outcomes.iter().map(|o| o.min_defect).collect())
                    .unwrap_or(f64::NAN),
                median_witness_residual: median(
                    outcomes.iter().filter_map(|o| o.witness_residual).collect(),
                ),
                wall_time_s: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(cells)
}

pub fn write_sweep_csv<W: std::io::Write>(cells: &[SweepCellResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated columns for gnuplot.
pub fn write_sweep_plot<W: std::io::Write>(cells: &[SweepCellResult], mut out: W) -> Result<()> {
    writeln!(out, "# M N injective witness inconclusive median_min_defect")?;
    for c in cells {
        writeln!(
            out,
            "{} {} {} {} {} {:e}",
            c.m, c.n, c.injective_count, c.witness_count, c.inconclusive_count, c.median_min_defect
        )?;
    }
    Ok(())
}

/// Rows of the bound table for every `(M, N)` pair.
pub fn bounds_table(ms: &[usize], ns: &[usize]) -> Result<Vec<BoundReport>> {
    let mut rows = Vec::new();
    for &m in ms {
        for &n in ns {
            rows.push(obstruction_predicate(m, n)?);
        }
    }
    Ok(rows)
}

pub fn format_bounds_table(rows: &[BoundReport]) -> String {
    let mut s = format!(
        "{:>4} {:>4} {:>18} {:>19} {:>3}  {}\n",
        "M", "N", "generic_sufficient", "obstruction_applies", "v2", "outlook"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>4} {:>4} {:>18} {:>19} {:>3}  {}\n",
            r.ambient_dim,
            r.count,
            r.generic_sufficient,
            r.obstruction_applies,
            r.central_binomial_2adic,
            r.outlook()
        ));
    }
    s
}

/// Smallest `|det|` over 3-subsets accepted as full spark in the demo.
pub const SPARK_FLOOR: f64 = 1e-3;
const SPARK_ATTEMPTS: usize = 1000;

/// Haar-distributed orthogonal matrix (QR of a Gaussian with sign fix).
fn random_orthogonal<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = linalg::gaussian_matrix(m, m, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Smallest `|det|` over all `M`-subsets of the columns.
pub fn spark_margin(vectors: &DMatrix<f64>) -> f64 {
    let m = vectors.nrows();
    let n = vectors.ncols();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let cols: Vec<DVector<f64>> = (0..n)
            .filter(|&j| mask >> j & 1 == 1)
            .map(|j| vectors.column(j).into_owned())
            .collect();
        best = best.min(DMatrix::from_columns(&cols).determinant().abs());
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoReport {
    pub seed: u64,
    pub attempts: usize,
    pub spark_margin: f64,
    /// Columns `φ₁, φ₂, φ₃`.
    pub phi: Vec<Vec<f64>>,
    /// Columns `ψ₁, ψ₂, ψ₃`.
    pub psi: Vec<Vec<f64>>,
    pub subspaces: CheckReport,
    pub complements: CheckReport,
    /// Angle between the witness direction and the line through `φ₃`.
    pub witness_angle_to_phi3: Option<f64>,
}

/// Two orthonormal bases `{φₙ}`, `{ψₙ}` of `R³` with jointly full spark, the
/// subspaces `W₁ = ⟨φ₁, φ₃⟩`, `W₂ = ⟨φ₂, φ₃⟩`, `W₃ = ⟨φ₃⟩`, `W₄ = ⟨ψ₁⟩`,
/// `W₅ = ⟨ψ₂⟩`, and the verdicts for `{Wᵢ}` and `{Wᵢ^⊥}`.
///
/// `{Wᵢ}` admits phase retrieval; `{Wᵢ^⊥}` does not, because `φ₃` is
/// annihilated by the first three complements.
pub fn demo_ccpw(seed: u64, opts: &CheckOptions) -> Result<DemoReport> {
    let mut stream = rng::root(seed);
    let mut attempts = 0;
    let (phi, psi, margin) = loop {
        attempts += 1;
        if attempts > SPARK_ATTEMPTS {
            return Err(Error::FullSparkSamplingFailed {
                attempts: SPARK_ATTEMPTS,
            });
        }
        let phi = random_orthogonal(3, &mut stream);
        let psi = random_orthogonal(3, &mut stream);
        let all = DMatrix::from_columns(&[
            phi.column(0).into_owned(),
            phi.column(1).into_owned(),
            phi.column(2).into_owned(),
            psi.column(0).into_owned(),
            psi.column(1).into_owned(),
            psi.column(2).into_owned(),
        ]);
        let margin = spark_margin(&all);
        if margin > SPARK_FLOOR {
            break (phi, psi, margin);
        }
    };

    let span = |cols: &[DVector<f64>]| Projection::from_basis(&DMatrix::from_columns(cols));
    let f = |j: usize| phi.column(j).into_owned();
    let p = |j: usize| psi.column(j).into_owned();
    let w = ProjectionCollection::new(vec![
        span(&[f(0), f(2)])?,
        span(&[f(1), f(2)])?,
        span(&[f(2)])?,
        span(&[p(0)])?,
        span(&[p(1)])?,
    ])?
    .with_provenance(Provenance {
        seed: Some(seed),
        sampler: "two-bases".into(),
        note: "W1=<phi1,phi3> W2=<phi2,phi3> W3=<phi3> W4=<psi1> W5=<psi2>".into(),
    });
    let w_perp = w.complements();

    let opts = opts.with_seed(seed);
    let subspaces = check(&w, &opts)?;
    let complements = check(&w_perp, &opts)?;
    let phi3 = f(2);
    let angle = complements
        .verdict
        .witness
        .as_ref()
        .map(|wit| wit.x.dot(&phi3).abs().min(1.0).acos());

    let cols = |q: &DMatrix<f64>| {
        q.column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    };
    Ok(DemoReport {
        seed,
        attempts,
        spark_margin: margin,
        phi: cols(&phi),
        psi: cols(&psi),
        subspaces,
        complements,
        witness_angle_to_phi3: angle,
    })
}

/// Default options for the demo: initial covering radius `10⁻²`.
pub fn demo_options() -> CheckOptions {
    CheckOptions {
        grid: CertGrid {
            delta: 1e-2,
            ..CertGrid::default()
        },
        ..CheckOptions::default()
    }
}

/// Reads and validates a collection document.
pub fn load_collection(path: &Path) -> Result<ProjectionCollection> {
    ProjectionCollection::from_json(&std::fs::read_to_string(path)?)
}

/// Spanning defect at `x` for the given collection, re-exported for reports.
pub fn defect_at(collection: &ProjectionCollection, x: &DVector<f64>) -> Result<f64> {
    Ok(injectivity::spanning_defect(collection, x)?.defect)
}
