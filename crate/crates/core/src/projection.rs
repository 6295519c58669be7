//! Orthogonal projections, subspaces and collections of projections.
//!
//! A [`Projection`] is a symmetric idempotent `M×M` matrix of rank `k` with
//! `1 ≤ k ≤ M−1`. Values are immutable once built; every constructor checks
//! the structural invariants at [`TOL_STRUCT`].

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, TOL_RANK_REL};
use crate::rng;

/// Default tolerance for structural validation.
pub const TOL_STRUCT: f64 = 1e-8;

/// Bounded number of redraws when a Gaussian basis comes out rank deficient.
const MAX_SAMPLE_ATTEMPTS: usize = 16;

/// A violated projection invariant, with the measured deviation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NotSquare { rows: usize, cols: usize },
    NonFinite,
    RankOutOfRange { rank: usize, ambient_dim: usize },
    Symmetry { max_dev: f64 },
    Idempotency { max_dev: f64 },
    Trace { trace: f64, rank: usize },
    Eigenvalues { max_dev: f64 },
    /// Declared rank disagrees with the count of non-negligible singular values.
    RankMismatch { numerical: usize, declared: usize },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::NotSquare { .. } => "not_square",
            Violation::NonFinite => "non_finite",
            Violation::RankOutOfRange { .. } => "rank_out_of_range",
            Violation::Symmetry { .. } => "symmetry",
            Violation::Idempotency { .. } => "idempotency",
            Violation::Trace { .. } => "trace",
            Violation::Eigenvalues { .. } => "eigenvalues",
            Violation::RankMismatch { .. } => "rank_mismatch",
        }
    }
}

/// Checks `matrix` against the orthogonal-projection invariants for the
/// declared `rank`. Returns an empty list iff all of them hold at `tol`.
pub fn validate_matrix(matrix: &DMatrix<f64>, rank: usize, tol: f64) -> Vec<Violation> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return vec![Violation::NotSquare { rows, cols }];
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return vec![Violation::NonFinite];
    }
    let m = rows;
    let mut out = Vec::new();
    if rank == 0 || rank >= m {
        out.push(Violation::RankOutOfRange {
            rank,
            ambient_dim: m,
        });
    }

    let sym_dev = linalg::max_abs(&(matrix - matrix.transpose()));
    if sym_dev > tol {
        out.push(Violation::Symmetry { max_dev: sym_dev });
    }

    let idem_dev = linalg::max_abs(&(matrix * matrix - matrix));
    if idem_dev > tol {
        out.push(Violation::Idempotency { max_dev: idem_dev });
    }

    let trace = matrix.trace();
    if (trace - rank as f64).abs() > tol {
        out.push(Violation::Trace { trace, rank });
    }

    let eig_dev = eigenvalue_deviation(matrix, sym_dev <= tol);
    if eig_dev > tol {
        out.push(Violation::Eigenvalues { max_dev: eig_dev });
    }

    let numerical = linalg::numerical_rank(matrix);
    if numerical != rank {
        out.push(Violation::RankMismatch {
            numerical,
            declared: rank,
        });
    }
    out
}

/// Largest distance of an eigenvalue from `{0, 1}`.
///
/// Near-symmetric input goes through the symmetric solver on its symmetric
/// part. Otherwise the real Schur form is used, with a bounded iteration count
/// (the unbounded default can stall on clustered spectra); non-convergence
/// counts as an infinite deviation.
fn eigenvalue_deviation(matrix: &DMatrix<f64>, symmetric: bool) -> f64 {
    let dist = |re: f64, im: f64| im.abs().max(re.abs().min((re - 1.0).abs()));
    if symmetric {
        let sym = (matrix + matrix.transpose()) * 0.5;
        return sym
            .symmetric_eigenvalues()
            .iter()
            .map(|&v| dist(v, 0.0))
            .fold(0.0, f64::max);
    }
    match nalgebra::linalg::Schur::try_new(matrix.clone(), f64::EPSILON, 10_000) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|z| dist(z.re, z.im))
            .fold(0.0, f64::max),
        None => f64::INFINITY,
    }
}

/// Orthogonal projection onto a proper subspace of `R^M`.
#[derive(Clone, PartialEq)]
pub struct Projection {
    matrix: DMatrix<f64>,
    rank: usize,
}

impl fmt::Debug for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Projection")
            .field("ambient_dim", &self.ambient_dim())
            .field("rank", &self.rank)
            .field("matrix", &self.matrix)
            .finish()
    }
}

impl Projection {
    /// Wraps a matrix, rejecting it if any invariant fails at [`TOL_STRUCT`].
    pub fn new(matrix: DMatrix<f64>, rank: usize) -> Result<Self> {
        let violations = validate_matrix(&matrix, rank, TOL_STRUCT);
        if violations.is_empty() {
            Ok(Self { matrix, rank })
        } else {
            Err(Error::Invariant {
                index: 0,
                violations,
            })
        }
    }

    /// Projection onto the column span of `basis` (`M×k`, full column rank).
    pub fn from_basis(basis: &DMatrix<f64>) -> Result<Self> {
        let (m, k) = basis.shape();
        if k == 0 || k >= m {
            return Err(Error::InvalidRank {
                rank: k,
                ambient_dim: m,
            });
        }
        let s = linalg::singular_values(basis);
        let threshold = TOL_RANK_REL * s.max();
        let smallest = s.min();
        if smallest <= threshold {
            return Err(Error::RankDeficientBasis {
                smallest,
                threshold,
            });
        }
        let q = orthonormalize(basis);
        Ok(Self::from_orthonormal(&q))
    }

    pub fn from_subspace(subspace: &Subspace) -> Self {
        Self::from_orthonormal(&subspace.basis)
    }

    /// `Q Qᵗ`, symmetrized so that the stored matrix is exactly symmetric.
    fn from_orthonormal(q: &DMatrix<f64>) -> Self {
        let p = q * q.transpose();
        let p = (&p + p.transpose()) * 0.5;
        Self {
            matrix: p,
            rank: q.ncols(),
        }
    }

    /// Projection onto a uniformly distributed `k`-dimensional subspace.
    pub fn sample_grassmannian<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 || k >= m {
            return Err(Error::InvalidRank {
                rank: k,
                ambient_dim: m,
            });
        }
        for _ in 0..MAX_SAMPLE_ATTEMPTS {
            let g = linalg::gaussian_matrix(m, k, rng);
            match Self::from_basis(&g) {
                Ok(p) => return Ok(p),
                Err(Error::RankDeficientBasis { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::DegenerateSample {
            attempts: MAX_SAMPLE_ATTEMPTS,
        })
    }

    /// Projection onto the orthogonal complement, `I − P`.
    pub fn complement(&self) -> Self {
        let m = self.ambient_dim();
        Self {
            matrix: DMatrix::identity(m, m) - &self.matrix,
            rank: m - self.rank,
        }
    }

    pub fn validate(&self, tol: f64) -> Vec<Violation> {
        validate_matrix(&self.matrix, self.rank, tol)
    }

    pub fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    /// `xᵗ P x`, which equals `‖Px‖²` for an orthogonal projection.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.matrix * x))
    }

    /// `yᵗ P x`.
    pub fn bilinear(&self, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
        y.dot(&(&self.matrix * x))
    }

    /// Orthonormal basis of the image.
    pub fn subspace(&self) -> Subspace {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.ambient_dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let cols: Vec<DVector<f64>> = order[..self.rank]
            .iter()
            .map(|&i| linalg::canonical_sign(eig.eigenvectors.column(i).into_owned()))
            .collect();
        Subspace {
            basis: DMatrix::from_columns(&cols),
        }
    }

    /// Unit generator of the line, for rank-one projections.
    pub fn line_generator(&self) -> Option<DVector<f64>> {
        if self.rank != 1 {
            return None;
        }
        // P = v vᵗ: the column with the largest diagonal entry is v_j v.
        let j = self.matrix.diagonal().imax();
        let col = self.matrix.column(j).into_owned();
        Some(linalg::canonical_sign(&col / col.norm()))
    }
}

/// Thin orthonormal factor of a full-column-rank matrix (Householder QR).
pub fn orthonormalize(basis: &DMatrix<f64>) -> DMatrix<f64> {
    basis.clone().qr().q()
}

/// A proper linear subspace given by an orthonormal basis (`M×k`).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Accepts a basis whose columns are already orthonormal at [`TOL_STRUCT`].
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (m, k) = basis.shape();
        if k == 0 || k >= m {
            return Err(Error::InvalidRank {
                rank: k,
                ambient_dim: m,
            });
        }
        let dev = linalg::max_abs(&(basis.transpose() * &basis - DMatrix::identity(k, k)));
        if dev > TOL_STRUCT {
            return Err(Error::InvalidInput(format!(
                "basis columns are not orthonormal (deviation {dev:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Orthonormalizes an arbitrary spanning set of linearly independent columns.
    pub fn spanned_by(columns: &DMatrix<f64>) -> Result<Self> {
        let p = Projection::from_basis(columns)?;
        Ok(p.subspace())
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Where a collection came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sampler: String,
    #[serde(default)]
    pub note: String,
}

/// Ordered projections sharing one ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCollection {
    ambient_dim: usize,
    projections: Vec<Projection>,
    provenance: Option<Provenance>,
}

impl ProjectionCollection {
    pub fn new(projections: Vec<Projection>) -> Result<Self> {
        let first = projections.first().ok_or_else(|| Error::Schema {
            path: "projections".into(),
            message: "collection must contain at least one projection".into(),
        })?;
        let m = first.ambient_dim();
        for p in &projections {
            if p.ambient_dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: p.ambient_dim(),
                });
            }
        }
        Ok(Self {
            ambient_dim: m,
            projections,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    /// Independent Grassmannian draws with the given rank profile; projection
    /// `i` uses the substream `(seed, i)`.
    pub fn sample(m: usize, ranks: &[usize], seed: u64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput(format!(
                "ambient dimension must be at least 2, got {m}"
            )));
        }
        if let Some(&bad) = ranks.iter().find(|&&k| k == 0 || k >= m) {
            return Err(Error::InvalidRank {
                rank: bad,
                ambient_dim: m,
            });
        }
        let projections = ranks
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let mut stream = rng::substream(seed, &[i as u64]);
                Projection::sample_grassmannian(m, k, &mut stream)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(projections)?.with_provenance(Provenance {
            seed: Some(seed),
            sampler: "grassmannian-gaussian-qr".into(),
            note: String::new(),
        }))
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    pub fn projections(&self) -> &[Projection] {
        &self.projections
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Projection> {
        self.projections.iter()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.projections.iter().map(Projection::rank).collect()
    }

    pub fn complements(&self) -> Self {
        Self {
            ambient_dim: self.ambient_dim,
            projections: self.projections.iter().map(Projection::complement).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CollectionDoc {
            ambient_dim: self.ambient_dim,
            projections: self
                .projections
                .iter()
                .map(|p| ProjectionDoc {
                    rank: p.rank,
                    matrix: p
                        .matrix
                        .row_iter()
                        .map(|r| r.iter().copied().collect())
                        .collect(),
                })
                .collect(),
            provenance: self.provenance.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses a collection document, validating every matrix at [`TOL_STRUCT`].
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: CollectionDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        doc.into_collection()
    }
}

impl<'a> IntoIterator for &'a ProjectionCollection {
    type Item = &'a Projection;
    type IntoIter = std::slice::Iter<'a, Projection>;

    fn into_iter(self) -> Self::IntoIter {
        self.projections.iter()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CollectionDoc {
    ambient_dim: usize,
    projections: Vec<ProjectionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectionDoc {
    rank: usize,
    matrix: Vec<Vec<f64>>,
}

impl CollectionDoc {
    fn into_collection(self) -> Result<ProjectionCollection> {
        let m = self.ambient_dim;
        if m < 2 {
            return Err(Error::Schema {
                path: "ambient_dim".into(),
                message: format!("must be at least 2, got {m}"),
            });
        }
        if self.projections.is_empty() {
            return Err(Error::Schema {
                path: "projections".into(),
                message: "collection must contain at least one projection".into(),
            });
        }
        let mut projections = Vec::with_capacity(self.projections.len());
        for (i, doc) in self.projections.into_iter().enumerate() {
            if doc.rank == 0 || doc.rank >= m {
                return Err(Error::Schema {
                    path: format!("projections[{i}].rank"),
                    message: format!("rank must lie in 1..={}, got {}", m - 1, doc.rank),
                });
            }
            if doc.matrix.len() != m {
                return Err(Error::Schema {
                    path: format!("projections[{i}].matrix"),
                    message: format!("expected {m} rows, got {}", doc.matrix.len()),
                });
            }
            for (r, row) in doc.matrix.iter().enumerate() {
                if row.len() != m {
                    return Err(Error::Schema {
                        path: format!("projections[{i}].matrix[{r}]"),
                        message: format!("expected {m} columns, got {}", row.len()),
                    });
                }
            }
            let matrix = DMatrix::from_fn(m, m, |r, c| doc.matrix[r][c]);
            let violations = validate_matrix(&matrix, doc.rank, TOL_STRUCT);
            if !violations.is_empty() {
                return Err(Error::Invariant {
                    index: i,
                    violations,
                });
            }
            projections.push(Projection {
                matrix,
                rank: doc.rank,
            });
        }
        let mut c = ProjectionCollection::new(projections)?;
        c.provenance = self.provenance;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn kinds(v: &[Violation]) -> Vec<&'static str> {
        v.iter().map(Violation::kind).collect()
    }

    #[test]
    fn coordinate_axis_and_plane() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let p = Projection::from_basis(&e1).unwrap();
        assert_abs_diff_eq!(
            p.matrix().clone(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0])),
            epsilon = 1e-15
        );
        let e12 = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let p = Projection::from_basis(&e12).unwrap();
        assert_abs_diff_eq!(
            p.matrix().clone(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0])),
            epsilon = 1e-15
        );
        assert_eq!(p.rank(), 2);
    }

    #[test]
    fn diagonal_line_matches_outer_product_formula() {
        let v = DVector::from_vec(vec![1.0, 1.0]);
        let expected = &v * v.transpose() / v.dot(&v);
        let p = Projection::from_basis(&DMatrix::from_column_slice(2, 1, v.as_slice())).unwrap();
        assert_abs_diff_eq!(p.matrix().clone(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(p.matrix()[(0, 1)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rank_deficient_basis_is_rejected() {
        let b = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(
            Projection::from_basis(&b),
            Err(Error::RankDeficientBasis { .. })
        ));
    }

    #[test]
    fn improper_ranks_are_rejected() {
        let mut r = rng::root(1);
        assert!(matches!(
            Projection::sample_grassmannian(3, 0, &mut r),
            Err(Error::InvalidRank { rank: 0, .. })
        ));
        assert!(matches!(
            Projection::sample_grassmannian(3, 3, &mut r),
            Err(Error::InvalidRank { rank: 3, .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        for k in 1..3 {
            let a = Projection::sample_grassmannian(3, k, &mut rng::root(42)).unwrap();
            let b = Projection::sample_grassmannian(3, k, &mut rng::root(42)).unwrap();
            assert_eq!(a.matrix(), b.matrix());
            assert!(a.validate(TOL_STRUCT).is_empty());
            assert_abs_diff_eq!(a.matrix().trace(), k as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn complement_examples() {
        let p = Projection::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0])),
            1,
        )
        .unwrap();
        let c = p.complement();
        assert_eq!(c.rank(), 2);
        assert_eq!(
            c.matrix(),
            &DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0]))
        );
        assert_eq!(c.complement(), p);
    }

    #[test]
    fn validate_examples() {
        let ok = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        assert!(validate_matrix(&ok, 1, TOL_STRUCT).is_empty());

        let oblique = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(kinds(&validate_matrix(&oblique, 1, TOL_STRUCT)), vec!["symmetry"]);

        let half = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5]));
        let k = kinds(&validate_matrix(&half, 1, TOL_STRUCT));
        assert!(k.contains(&"idempotency"));
        assert!(k.contains(&"eigenvalues"));
        assert!(k.contains(&"rank_mismatch"));
        assert!(!k.contains(&"symmetry"));
        // Declared rank 2 (the numerical rank) exposes the trace mismatch.
        let k2 = kinds(&validate_matrix(&half, 2, TOL_STRUCT));
        assert!(k2.contains(&"trace"));
    }

    #[test]
    fn line_generator_recovers_direction() {
        let v = DVector::from_vec(vec![0.6, -0.8, 0.0]);
        let p = Projection::from_basis(&DMatrix::from_column_slice(3, 1, v.as_slice())).unwrap();
        let g = p.line_generator().unwrap();
        assert_abs_diff_eq!(g, v, epsilon = 1e-14);
    }

    #[test]
    fn subspace_round_trip() {
        let p = Projection::sample_grassmannian(5, 2, &mut rng::root(3)).unwrap();
        let s = p.subspace();
        assert_eq!(s.dim(), 2);
        let q = Projection::from_subspace(&s);
        assert_abs_diff_eq!(q.matrix().clone(), p.matrix().clone(), epsilon = 1e-12);
        assert!(Subspace::new(s.basis().clone()).is_ok());
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let c = ProjectionCollection::sample(4, &[1, 2, 3, 2], 9).unwrap();
        let back = ProjectionCollection::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_document_is_schema_error() {
        let err = ProjectionCollection::from_json(r#"{"ambient_dim": 2, "projections": []}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Schema { ref path, .. } if path == "projections"));
    }

    #[test]
    fn wrong_type_reports_path() {
        let err = ProjectionCollection::from_json(
            r#"{"ambient_dim": 2, "projections": [{"rank": 1, "matrix": [[1, 0], [0, "x"]]}]}"#,
        )
        .unwrap_err();
        match err {
            Error::Schema { path, .. } => assert!(path.starts_with("projections[0].matrix"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn perturbed_matrix_is_invariant_error() {
        let doc = r#"{"ambient_dim": 2, "projections": [{"rank": 1, "matrix": [[1.01, 0], [0, 0]]}]}"#;
        let err = ProjectionCollection::from_json(doc).unwrap_err();
        match err {
            Error::Invariant { index, violations } => {
                assert_eq!(index, 0);
                assert!(kinds(&violations).contains(&"idempotency"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
