//! Counting bounds on the number of projections needed for phase retrieval.
//!
//! * `N ≥ 2M − 1`: a generic collection is injective.
//! * `M = 2^k + 1` and `N ≤ 2M − 2`: no collection is injective. The
//!   obstruction is a parity count: the bilinear system `yᵗPᵢx = 0` has
//!   `C(2M−2, M−1)` complex solutions, non-real ones come in groups of four,
//!   and `C(2M−2, M−1)` is not divisible by 4 exactly when `M − 1` is a power
//!   of two.
//!
//! The 2-adic valuation follows from Legendre's formula `v₂(m!) = m − s₂(m)`,
//! which gives `v₂(C(2n, n)) = s₂(n)`, the binary digit sum of `n`.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::injectivity::Witness;
use crate::linalg::{self, TOL_RANK_REL};
use crate::projection::ProjectionCollection;

/// `v₂(C(2n, n))` via the binary digit sum of `n`.
pub fn central_binomial_2adic(n: u64) -> Result<u32> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    Ok(n.count_ones())
}

/// `C(2n, n)` in exact arithmetic.
pub fn central_binomial(n: u64) -> BigUint {
    // C(2n, n) = Π_{i=1..n} (n + i) / i, exact at every step.
    let mut acc = BigUint::from(1u32);
    for i in 1..=n {
        acc = acc * BigUint::from(n + i) / BigUint::from(i);
    }
    acc
}

/// Exponent of 2 in a positive integer.
pub fn two_adic_valuation(v: &BigUint) -> Option<u64> {
    v.trailing_zeros()
}

/// What the counting bounds say about `N` projections in `R^M`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundReport {
    pub ambient_dim: usize,
    pub count: usize,
    /// `N ≥ 2M − 1`.
    pub generic_sufficient: bool,
    /// `M − 1` is a power of two and `N ≤ 2M − 2`.
    pub obstruction_applies: bool,
    /// `v₂(C(2M−2, M−1))`.
    pub central_binomial_2adic: u32,
}

impl BoundReport {
    pub fn outlook(&self) -> &'static str {
        if self.generic_sufficient {
            "generic-injective"
        } else if self.obstruction_applies {
            "never-injective"
        } else {
            "unknown"
        }
    }
}

pub fn obstruction_predicate(m: usize, n: usize) -> Result<BoundReport> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("M must be at least 2, got {m}")));
    }
    if n < 1 {
        return Err(Error::InvalidInput(format!("N must be at least 1, got {n}")));
    }
    let v2 = central_binomial_2adic((m - 1) as u64)?;
    Ok(BoundReport {
        ambient_dim: m,
        count: n,
        generic_sufficient: n + 1 >= 2 * m,
        obstruction_applies: (m - 1).is_power_of_two() && n <= 2 * m - 2,
        central_binomial_2adic: v2,
    })
}

/// Explicit witness for `2M − 2` lines with generators `v₁, …, v_{2M−2}`.
///
/// For rank-one projections `yᵗPᵢx = ⟨y, vᵢ⟩⟨x, vᵢ⟩`, so any `y` orthogonal to
/// the first `M − 1` generators and `x` orthogonal to the last `M − 1` solve
/// the whole system. Both are null vectors of `(M−1)×M` systems.
pub fn rank1_witness_by_linear_algebra(lines: &ProjectionCollection) -> Result<Witness> {
    let m = lines.ambient_dim();
    if lines.len() != 2 * m - 2 {
        return Err(Error::InvalidInput(format!(
            "expected {} lines in R^{m}, got {}",
            2 * m - 2,
            lines.len()
        )));
    }
    let gens = lines
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.line_generator().ok_or(Error::NonRankOne {
                index: i,
                rank: p.rank(),
            })
        })
        .collect::<Result<Vec<DVector<f64>>>>()?;
    let stack = |vs: &[DVector<f64>]| {
        let rows: Vec<_> = vs.iter().map(|v| v.transpose()).collect();
        DMatrix::from_rows(&rows)
    };
    let null = |vs: &[DVector<f64>]| -> Result<DVector<f64>> {
        let rows = stack(vs);
        let (v, sigma) = linalg::null_vector(&rows);
        // M − 1 rows in R^M always leave a null direction; kept as a guard.
        if sigma > TOL_RANK_REL * linalg::singular_values(&rows).max().max(1.0) {
            return Err(Error::DegenerateSystem { sigma });
        }
        Ok(v)
    };
    let y = null(&gens[..m - 1])?;
    let x = null(&gens[m - 1..])?;
    Witness::new(lines, &x, &y)
}
