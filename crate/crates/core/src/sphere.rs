//! Point sets on the unit sphere modulo `±1`.
//!
//! Two kinds of point sets live here:
//!
//! * search grids: cheap quasi-uniform samples used to seed local minimization
//!   (uniform angles for `M = 2`, a Fibonacci spiral on the upper hemisphere
//!   for `M = 3`, a product of hyperspherical angles for `M ≥ 4`);
//! * certification cells: a subdivision of the projective sphere with a
//!   provable covering radius, used for Lipschitz certification.
//!
//! Certification cells for `M ≥ 3` are hypercubes on the `+1` faces of the
//! cube `[-1, 1]^M`, pushed radially onto the sphere. Every unit vector is, up
//! to sign, the radial image of a point on one of the `M` positive faces, and
//! radial retraction onto the ball is 1-Lipschitz outside it, so a face cell of
//! half-side `a` is covered within chordal distance `a·√(M−1)` by the image of
//! its center. For `M = 2` cells are arcs of `[0, π)`.

use std::f64::consts::PI;

use nalgebra::DVector;

/// Quasi-uniform representatives of the projective sphere, roughly `target` of them.
pub fn search_grid(m: usize, target: usize) -> Vec<DVector<f64>> {
    let target = target.max(1);
    match m {
        0 | 1 => vec![DVector::from_element(m, 1.0)],
        2 => (0..target)
            .map(|j| {
                let t = PI * (j as f64 + 0.5) / target as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => fibonacci_hemisphere(target),
        _ => hyperspherical_grid(m, target),
    }
}

fn fibonacci_hemisphere(n: usize) -> Vec<DVector<f64>> {
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

/// Midpoint product grid over hyperspherical angles, last angle restricted to `[0, π)`.
fn hyperspherical_grid(m: usize, target: usize) -> Vec<DVector<f64>> {
    let angles = m - 1;
    let per = ((target as f64).powf(1.0 / angles as f64).ceil() as usize).max(2);
    let total = per.pow(angles as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; angles];
    for _ in 0..total {
        let phi: Vec<f64> = idx
            .iter()
            .map(|&i| PI * (i as f64 + 0.5) / per as f64)
            .collect();
        let mut x = DVector::zeros(m);
        let mut sin_prod = 1.0;
        for (j, &a) in phi.iter().enumerate() {
            x[j] = sin_prod * a.cos();
            sin_prod *= a.sin();
        }
        x[m - 1] = sin_prod;
        out.push(x);
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < per {
                break;
            }
            *slot = 0;
        }
    }
    out
}

/// A certification cell: its representative unit vector and covering radius.
#[derive(Debug, Clone)]
pub struct Cell {
    kind: CellKind,
}

#[derive(Debug, Clone)]
enum CellKind {
    Arc { center: f64, half_width: f64 },
    Face { face: usize, center: Vec<f64>, half_side: f64 },
}

impl Cell {
    /// Unit vector at the cell center.
    pub fn point(&self) -> DVector<f64> {
        match &self.kind {
            CellKind::Arc { center, .. } => DVector::from_vec(vec![center.cos(), center.sin()]),
            CellKind::Face { face, center, .. } => {
                let m = center.len() + 1;
                let mut u = DVector::zeros(m);
                let mut it = center.iter();
                for j in 0..m {
                    u[j] = if j == *face { 1.0 } else { *it.next().unwrap() };
                }
                let n = u.norm();
                u / n
            }
        }
    }

    /// Every unit vector in the cell (up to sign) lies within this chordal
    /// distance of [`Cell::point`].
    pub fn radius(&self) -> f64 {
        match &self.kind {
            CellKind::Arc { half_width, .. } => 2.0 * (half_width / 2.0).sin(),
            CellKind::Face {
                center, half_side, ..
            } => half_side * (center.len() as f64).sqrt(),
        }
    }

    /// Children after halving every side.
    pub fn split(&self) -> Vec<Cell> {
        match &self.kind {
            CellKind::Arc { center, half_width } => {
                let h = half_width / 2.0;
                vec![
                    Cell {
                        kind: CellKind::Arc {
                            center: center - h,
                            half_width: h,
                        },
                    },
                    Cell {
                        kind: CellKind::Arc {
                            center: center + h,
                            half_width: h,
                        },
                    },
                ]
            }
            CellKind::Face {
                face,
                center,
                half_side,
            } => {
                let d = center.len();
                let h = half_side / 2.0;
                (0..1usize << d)
                    .map(|mask| {
                        let c = center
                            .iter()
                            .enumerate()
                            .map(|(j, &v)| if mask >> j & 1 == 1 { v + h } else { v - h })
                            .collect();
                        Cell {
                            kind: CellKind::Face {
                                face: *face,
                                center: c,
                                half_side: h,
                            },
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Number of initial cells needed for covering radius at most `delta`.
pub fn cell_count(m: usize, delta: f64) -> u128 {
    if m == 2 {
        return (PI / (2.0 * delta)).ceil() as u128;
    }
    let per = per_axis(m, delta) as u128;
    (m as u128).saturating_mul(per.saturating_pow((m - 1) as u32))
}

fn per_axis(m: usize, delta: f64) -> usize {
    let a = delta / ((m - 1) as f64).sqrt();
    (1.0 / a).ceil().min(usize::MAX as f64) as usize
}

/// Initial cells with covering radius at most `delta`. Caller checks
/// [`cell_count`] against its node cap first.
pub fn initial_cells(m: usize, delta: f64) -> Vec<Cell> {
    if m == 2 {
        let n = cell_count(2, delta) as usize;
        let w = PI / n as f64;
        return (0..n)
            .map(|j| Cell {
                kind: CellKind::Arc {
                    center: w * (j as f64 + 0.5),
                    half_width: w / 2.0,
                },
            })
            .collect();
    }
    let per = per_axis(m, delta);
    let d = m - 1;
    let half_side = 1.0 / per as f64;
    let mut out = Vec::new();
    for face in 0..m {
        let mut idx = vec![0usize; d];
        for _ in 0..per.pow(d as u32) {
            let center = idx
                .iter()
                .map(|&i| -1.0 + half_side * (2 * i + 1) as f64)
                .collect();
            out.push(Cell {
                kind: CellKind::Face {
                    face,
                    center,
                    half_side,
                },
            });
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < per {
                    break;
                }
                *slot = 0;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_unit;
    use crate::rng;

    fn projective_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).norm().min((a + b).norm())
    }

    #[test]
    fn search_grids_are_unit() {
        for m in 2..6 {
            let g = search_grid(m, 500);
            assert!(!g.is_empty());
            for p in g {
                assert!((p.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn initial_cells_cover_within_delta() {
        for (m, delta) in [(2usize, 0.05), (3, 0.2), (4, 0.4)] {
            let cells = initial_cells(m, delta);
            assert_eq!(cells.len() as u128, cell_count(m, delta));
            for c in &cells {
                assert!(c.radius() <= delta + 1e-12);
            }
            let pts: Vec<_> = cells.iter().map(Cell::point).collect();
            let mut r = rng::root(m as u64);
            for _ in 0..2000 {
                let x = random_unit(m, &mut r);
                let best = pts
                    .iter()
                    .map(|p| projective_distance(p, &x))
                    .fold(f64::INFINITY, f64::min);
                assert!(best <= delta, "m={m} best={best}");
            }
        }
    }

    #[test]
    fn split_roughly_halves_radius() {
        for m in [2usize, 3, 4] {
            let c = &initial_cells(m, 0.3)[0];
            let kids = c.split();
            assert_eq!(kids.len(), if m == 2 { 2 } else { 1 << (m - 1) });
            for k in kids {
                // Chords of half arcs are a hair longer than half chords.
                assert!(k.radius() <= c.radius() * 0.51);
            }
        }
    }
}
