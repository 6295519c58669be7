//! Small dense linear-algebra helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative singular-value threshold used for every rank decision.
pub const TOL_RANK_REL: f64 = 1e-10;

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // Column-major fill order is part of the reproducibility contract.
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Uniform random unit vector.
pub fn random_unit<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = gaussian_vector(len, rng);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

/// Smallest singular value of the linear map, counting the missing ones as
/// zero when the matrix is wider in the row direction (`rows > cols`).
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.ncols() < m.nrows() {
        return 0.0;
    }
    singular_values(m).min()
}

/// Numerical rank at the relative threshold [`TOL_RANK_REL`].
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let s = singular_values(m);
    if s.is_empty() {
        return 0;
    }
    let cut = TOL_RANK_REL * s.max();
    s.iter().filter(|&&v| v > cut).count()
}

/// Unit vector `v` minimizing `‖rows · v‖`, together with that minimum.
///
/// `rows` may have fewer rows than columns; it is padded with zero rows so
/// the full right singular basis is available.
pub fn null_vector(rows: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let n = rows.ncols();
    let mut square = DMatrix::zeros(n.max(rows.nrows()), n);
    square.rows_mut(0, rows.nrows()).copy_from(rows);
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let (idx, sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &s)| if s < best.1 { (i, s) } else { best });
    let v = v_t.row(idx).transpose();
    (canonical_sign(v.clone() / v.norm()), sigma)
}

/// Flip `v` so that its first component of non-negligible magnitude is positive.
pub fn canonical_sign(mut v: DVector<f64>) -> DVector<f64> {
    let scale = v.amax();
    if scale == 0.0 {
        return v;
    }
    let cut = TOL_RANK_REL * scale;
    if let Some(first) = v.iter().find(|c| c.abs() > cut) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Eigenpair of a symmetric matrix with the smallest eigenvalue.
///
/// Ties (eigenvalues equal up to solver resolution) are broken by taking the
/// candidate whose vector of absolute components is lexicographically
/// largest; the result is sign-canonicalized.
pub fn least_eigenpair(sym: &DMatrix<f64>) -> (f64, DVector<f64>) {
    extreme_eigenpair(sym, false)
}

/// Eigenpair of a symmetric matrix with the largest eigenvalue.
pub fn top_eigenpair(sym: &DMatrix<f64>) -> (f64, DVector<f64>) {
    extreme_eigenpair(sym, true)
}

fn extreme_eigenpair(sym: &DMatrix<f64>, largest: bool) -> (f64, DVector<f64>) {
    let eig = sym.clone().symmetric_eigen();
    let vals = &eig.eigenvalues;
    let spread = vals.amax().max(f64::MIN_POSITIVE);
    let target = if largest { vals.max() } else { vals.min() };
    let tie = 64.0 * f64::EPSILON * spread;
    let mut best: Option<DVector<f64>> = None;
    for (i, &lambda) in vals.iter().enumerate() {
        if (lambda - target).abs() > tie {
            continue;
        }
        let cand = eig.eigenvectors.column(i).into_owned();
        best = match best {
            None => Some(cand),
            Some(cur) => {
                if lex_abs_greater(&cand, &cur) {
                    Some(cand)
                } else {
                    Some(cur)
                }
            }
        };
    }
    let v = best.expect("nonempty spectrum");
    (target, canonical_sign(v))
}

fn lex_abs_greater(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        let (x, y) = (x.abs(), y.abs());
        if x > y {
            return true;
        }
        if x < y {
            return false;
        }
    }
    false
}

/// Entry-wise maximum absolute value.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn null_vector_of_single_row() {
        let rows = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let (v, sigma) = null_vector(&rows);
        assert_abs_diff_eq!(sigma, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tall_matrix_has_zero_smallest_singular_value() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(smallest_singular_value(&m), 0.0);
    }

    #[test]
    fn least_eigenpair_tie_break_is_deterministic() {
        let (lambda, v) = least_eigenpair(&DMatrix::zeros(3, 3));
        assert_eq!(lambda, 0.0);
        assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-15);
        let (_, w) = least_eigenpair(&DMatrix::zeros(3, 3));
        assert_eq!(v, w);
    }

    #[test]
    fn least_and_top_of_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let (lo, vlo) = least_eigenpair(&d);
        let (hi, vhi) = top_eigenpair(&d);
        assert_abs_diff_eq!(lo, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vlo[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vhi[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn canonical_sign_flips_leading_negative() {
        let v = canonical_sign(DVector::from_vec(vec![0.0, -2.0, 1.0]));
        assert_eq!(v.as_slice(), &[0.0, 2.0, -1.0]);
    }
}

/// Serializes a `DVector<f64>` as a plain JSON array.
pub mod vec_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}
