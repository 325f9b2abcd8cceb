//! Symmetric eigendecomposition, the symmetric inverse square root and the
//! orthogonal joint approximate diagonalizer.

use nalgebra::SymmetricEigen;

use crate::error::{BssError, Result};
use crate::tensor::Matrix;

/// Relative eigenvalue floor below which a covariance is treated as singular.
pub const RANK_FLOOR: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;
const ORTHOGONALITY_TOL: f64 = 1e-10;

/// A square matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix(Matrix);

impl OrthogonalMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(BssError::ShapeMismatch(format!(
                "orthogonal matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let err = (m.tr_mul(&m) - Matrix::identity(m.nrows(), m.ncols())).amax();
        if err >= ORTHOGONALITY_TOL {
            return Err(BssError::InvalidParameter(format!(
                "matrix is not orthogonal (max |UᵀU - I| = {err:e})"
            )));
        }
        Ok(OrthogonalMatrix(m))
    }

    pub fn identity(p: usize) -> Self {
        OrthogonalMatrix(Matrix::identity(p, p))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

/// Largest asymmetry of `s` relative to its largest entry (at least 1).
fn relative_asymmetry(s: &Matrix) -> f64 {
    let scale = s.amax().max(1.0);
    (s - s.transpose()).amax() / scale
}

/// Eigenvalues in descending order with the matching orthonormal eigenvectors
/// as columns.
pub fn sym_eigen(s: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !s.is_square() {
        return Err(BssError::ShapeMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            s.nrows(),
            s.ncols()
        )));
    }
    let asym = relative_asymmetry(s);
    if asym > SYMMETRY_TOL {
        return Err(BssError::NotSymmetric(asym));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Matrix::from_fn(s.nrows(), s.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// The unique symmetric `R` with `R S R = I`.
pub fn sym_inv_sqrt(s: &Matrix) -> Result<Matrix> {
    let (values, vectors) = sym_eigen(s)?;
    let largest = values[0];
    let smallest = *values.last().unwrap();
    let ratio = if largest > 0.0 {
        smallest / largest
    } else {
        f64::NEG_INFINITY
    };
    if !(ratio > RANK_FLOOR) {
        return Err(BssError::RankDeficient {
            ratio,
            floor: RANK_FLOOR,
            mode: None,
        });
    }
    let scaled = Matrix::from_fn(s.nrows(), s.ncols(), |i, j| vectors[(i, j)] / values[j].sqrt());
    let r = &scaled * vectors.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// Starting rotation of the Jacobi sweeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum JointDiagInit {
    /// Eigenvectors of `Σ_k M̃_k²` with `M̃_k = M_k - (tr M_k / p) I`.
    /// Rotating the inputs rotates this start with them, so the result is
    /// orthogonally equivariant on any data; like the objective it ignores
    /// identity shifts of individual matrices.
    #[default]
    SquaredSum,
    Identity,
}

#[derive(Debug, Clone, Copy)]
pub struct JointDiagOptions {
    /// Stop once every Givens angle in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
    pub init: JointDiagInit,
}

impl Default for JointDiagOptions {
    fn default() -> Self {
        JointDiagOptions {
            tol: 1e-12,
            max_sweeps: 100,
            init: JointDiagInit::default(),
        }
    }
}

fn sign_by_pivot(u: &mut Matrix) {
    for mut col in u.column_iter_mut() {
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
}

#[derive(Debug, Clone)]
pub struct JointDiagResult {
    /// `U` such that `Uᵀ M U` is as diagonal as possible for every `M`.
    pub rotation: OrthogonalMatrix,
    /// Sum of squared diagonals of `Uᵀ M U` over the set.
    pub objective: f64,
    pub sweeps_used: usize,
    pub converged: bool,
    /// Objective at the starting rotation followed by its value after each sweep.
    pub trace: Vec<f64>,
}

/// Sum over the set of `‖diag(Uᵀ M U)‖²`.
pub fn diag_objective(mats: &[Matrix], u: &Matrix) -> f64 {
    mats.iter()
        .map(|m| {
            let r = u.tr_mul(m) * u;
            r.diagonal().norm_squared()
        })
        .sum()
}

/// Sum over the set of the squared off-diagonal entries of `Uᵀ M U`.
pub fn off_diagonal_mass(mats: &[Matrix], u: &Matrix) -> f64 {
    mats.iter()
        .map(|m| {
            let r = u.tr_mul(m) * u;
            r.norm_squared() - r.diagonal().norm_squared()
        })
        .sum()
}

/// Cyclic Jacobi joint diagonalization of the symmetric parts of `mats`.
///
/// The returned columns are ordered by the descending diagonal of `Uᵀ M_1 U`
/// and each column is signed so that its largest-magnitude entry is positive.
pub fn joint_diagonalize(mats: &[Matrix], opts: JointDiagOptions) -> Result<JointDiagResult> {
    let first = mats
        .first()
        .ok_or_else(|| BssError::InvalidParameter("joint diagonalization of an empty set".into()))?;
    let p = first.nrows();
    for (k, m) in mats.iter().enumerate() {
        if m.nrows() != p || m.ncols() != p {
            return Err(BssError::ShapeMismatch(format!(
                "matrix {k} is {}x{}, expected {p}x{p}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    if mats.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
        return Err(BssError::NonFinite("joint diagonalization input".into()));
    }

    let sym: Vec<Matrix> = mats.iter().map(|m| (m + m.transpose()) * 0.5).collect();
    let mut v = match opts.init {
        JointDiagInit::Identity => Matrix::identity(p, p),
        JointDiagInit::SquaredSum => {
            let squares = sym.iter().fold(Matrix::zeros(p, p), |acc, m| {
                let centered = m - Matrix::identity(p, p) * (m.trace() / p as f64);
                acc + &centered * &centered
            });
            let mut u = sym_eigen(&((&squares + squares.transpose()) * 0.5))?.1;
            sign_by_pivot(&mut u);
            u
        }
    };
    // Working copies of VᵀMV, column-major p*p blocks.
    let mut work: Vec<Vec<f64>> = sym.iter().map(|m| (v.tr_mul(m) * &v).as_slice().to_vec()).collect();
    let objective_of = |work: &[Vec<f64>]| -> f64 {
        work.iter()
            .map(|a| (0..p).map(|i| a[i + p * i] * a[i + p * i]).sum::<f64>())
            .sum()
    };

    let mut trace = vec![objective_of(&work)];
    let mut converged = p < 2;
    let mut sweeps = 0;
    while !converged && sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        for i in 0..p - 1 {
            for j in i + 1..p {
                let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
                for a in &work {
                    let h = a[i + p * i] - a[j + p * j];
                    let o = a[i + p * j] + a[j + p * i];
                    g11 += h * h;
                    g12 += h * o;
                    g22 += o * o;
                }
                let ton = g11 - g22;
                let toff = 2.0 * g12;
                let theta = 0.5 * toff.atan2(ton + ton.hypot(toff));
                if theta.abs() <= opts.tol {
                    continue;
                }
                rotated = true;
                let (s, c) = theta.sin_cos();
                for a in work.iter_mut() {
                    rotate_pair(a, p, i, j, c, s);
                }
                for r in 0..p {
                    let vi = v[(r, i)];
                    let vj = v[(r, j)];
                    v[(r, i)] = c * vi + s * vj;
                    v[(r, j)] = c * vj - s * vi;
                }
            }
        }
        trace.push(objective_of(&work));
        if !rotated {
            converged = true;
        }
    }

    // Deterministic order and signs.
    let d1: Vec<f64> = (0..p).map(|i| work[0][i + p * i]).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| d1[b].total_cmp(&d1[a]));
    let mut u = Matrix::from_fn(p, p, |r, c| v[(r, order[c])]);
    sign_by_pivot(&mut u);

    Ok(JointDiagResult {
        objective: *trace.last().unwrap(),
        rotation: OrthogonalMatrix(u),
        sweeps_used: sweeps,
        converged,
        trace,
    })
}

// A <- Gᵀ A G with the Givens rotation acting on coordinates (i, j).
fn rotate_pair(a: &mut [f64], p: usize, i: usize, j: usize, c: f64, s: f64) {
    for col in 0..p {
        let ai = a[i + p * col];
        let aj = a[j + p * col];
        a[i + p * col] = c * ai + s * aj;
        a[j + p * col] = c * aj - s * ai;
    }
    for row in 0..p {
        let ai = a[row + p * i];
        let aj = a[row + p * j];
        a[row + p * i] = c * ai + s * aj;
        a[row + p * j] = c * aj - s * ai;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::pj_distance;
    use crate::simgen::haar_orthogonal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    #[test]
    fn eigen_simple_cases() {
        let (vals, _) = sym_eigen(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(vals, vec![1.0, 1.0, 1.0]);
        let (vals, vecs) = sym_eigen(&diag(&[1.0, 3.0])).unwrap();
        assert_eq!(vals, vec![3.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((vecs[(0, 1)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_recovers_planted_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = haar_orthogonal(5, &mut rng);
        let planted = [7.0, 3.5, 1.25, -0.5, -2.0];
        let s = &q * diag(&planted) * q.transpose();
        let (vals, vecs) = sym_eigen(&s).unwrap();
        for (a, b) in vals.iter().zip(planted) {
            assert!((a - b).abs() < 1e-9);
        }
        let recon = &vecs * diag(&vals) * vecs.transpose();
        assert!((recon - &s).amax() < 1e-9 * s.norm());
    }

    #[test]
    fn eigen_rejects_asymmetric() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eigen(&m), Err(BssError::NotSymmetric(_))));
    }

    #[test]
    fn inverse_square_root() {
        assert_eq!(sym_inv_sqrt(&Matrix::identity(3, 3)).unwrap(), Matrix::identity(3, 3));
        let r = sym_inv_sqrt(&diag(&[4.0, 9.0])).unwrap();
        assert!((r - diag(&[0.5, 1.0 / 3.0])).amax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let a = Matrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let s = &a * a.transpose() + Matrix::identity(4, 4) * 0.1;
            let r = sym_inv_sqrt(&s).unwrap();
            assert!((&r * &s * &r - Matrix::identity(4, 4)).amax() < 1e-8);
            assert!((&r - r.transpose()).amax() < 1e-10);
        }
    }

    #[test]
    fn inverse_square_root_reports_rank_deficiency() {
        let s = diag(&[1.0, 1e-14]);
        match sym_inv_sqrt(&s) {
            Err(BssError::RankDeficient { ratio, .. }) => assert!((ratio - 1e-14).abs() < 1e-20),
            other => panic!("unexpected {other:?}"),
        }
        assert!(sym_inv_sqrt(&diag(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn diagonal_set_gives_signed_permutation() {
        let mats = vec![diag(&[1.0, 3.0, 2.0]), diag(&[0.5, -1.0, 4.0])];
        let res = joint_diagonalize(&mats, JointDiagOptions::default()).unwrap();
        let u = res.rotation.as_matrix();
        assert!(pj_distance(u, &Matrix::identity(3, 3)) < 1e-14);
        // columns ordered by descending diagonal of the first matrix: 3, 2, 1
        assert_eq!(u[(1, 0)], 1.0);
        assert_eq!(u[(2, 1)], 1.0);
        assert_eq!(u[(0, 2)], 1.0);
    }

    #[test]
    fn planted_rotation_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for p in [3, 6, 12] {
            let u0 = haar_orthogonal(p, &mut rng);
            let mats: Vec<Matrix> = (0..13)
                .map(|_| {
                    let d: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
                    &u0 * diag(&d) * u0.transpose()
                })
                .collect();
            let res = joint_diagonalize(&mats, JointDiagOptions::default()).unwrap();
            assert!(res.converged);
            assert!(pj_distance(res.rotation.as_matrix(), &u0) < 1e-8, "p={p}");
            for w in res.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].abs());
            }
        }
    }

    #[test]
    fn single_matrix_matches_eigenvectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = Matrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let s = &a + a.transpose();
        let res = joint_diagonalize(std::slice::from_ref(&s), JointDiagOptions::default()).unwrap();
        let (_, vecs) = sym_eigen(&s).unwrap();
        assert!(pj_distance(res.rotation.as_matrix(), &vecs) < 1e-8);
    }

    #[test]
    fn objective_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mats: Vec<Matrix> = (0..4)
            .map(|_| {
                let a = Matrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
                &a + a.transpose()
            })
            .collect();
        let res = joint_diagonalize(&mats, JointDiagOptions::default()).unwrap();
        let u = res.rotation.as_matrix();
        let at_identity = diag_objective(&mats, &Matrix::identity(4, 4));
        let at_u = diag_objective(&mats, u);
        assert!(at_u >= at_identity);
        assert!((at_u - res.objective).abs() < 1e-10 * at_u);

        // invariant under signed permutations
        let mut pj = Matrix::zeros(4, 4);
        for (r, (c, s)) in [(2, 1.0), (0, -1.0), (3, 1.0), (1, -1.0)].iter().enumerate() {
            pj[(r, *c)] = *s;
        }
        let up = u * pj;
        assert!((diag_objective(&mats, &up) - at_u).abs() < 1e-12 * at_u);

        // conservation of Frobenius mass
        let total: f64 = mats.iter().map(|m| m.norm_squared()).sum();
        let off = off_diagonal_mass(&mats, u);
        assert!((at_u + off - total).abs() < 1e-10 * total);
    }

    #[test]
    fn rotation_equivariant_on_arbitrary_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = 8;
        let mats: Vec<Matrix> = (0..6)
            .map(|_| {
                let a = Matrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
                &a + a.transpose()
            })
            .collect();
        let o = crate::simgen::haar_orthogonal(p, &mut rng);
        let q = crate::simgen::haar_orthogonal(mats.len(), &mut rng);
        // conjugate every matrix and mix the set orthogonally
        let rotated: Vec<Matrix> = (0..mats.len())
            .map(|k| {
                let mixed = (0..mats.len()).fold(Matrix::zeros(p, p), |acc, l| acc + &mats[l] * q[(k, l)]);
                &o * mixed * o.transpose()
            })
            .collect();
        let u = joint_diagonalize(&mats, JointDiagOptions::default())
            .unwrap()
            .rotation
            .into_inner();
        let ur = joint_diagonalize(&rotated, JointDiagOptions::default())
            .unwrap()
            .rotation
            .into_inner();
        assert!(crate::eval::pj_distance(&ur, &(&o * &u)) < 1e-8);

        let shifted: Vec<Matrix> = mats
            .iter()
            .enumerate()
            .map(|(k, m)| m + Matrix::identity(p, p) * k as f64)
            .collect();
        let us = joint_diagonalize(&shifted, JointDiagOptions::default())
            .unwrap()
            .rotation
            .into_inner();
        assert!(crate::eval::pj_distance(&us, &u) < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(joint_diagonalize(&[], JointDiagOptions::default()).is_err());
        let mats = vec![Matrix::identity(2, 2), Matrix::identity(3, 3)];
        assert!(joint_diagonalize(&mats, JointDiagOptions::default()).is_err());
        assert!(joint_diagonalize(&[Matrix::zeros(2, 3)], JointDiagOptions::default()).is_err());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mats: Vec<Matrix> = (0..3)
            .map(|_| {
                let a = Matrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
                &a + a.transpose()
            })
            .collect();
        let res = joint_diagonalize(
            &mats,
            JointDiagOptions {
                tol: 0.0,
                max_sweeps: 1,
                init: JointDiagInit::Identity,
            },
        )
        .unwrap();
        assert!(!res.converged);
        assert_eq!(res.sweeps_used, 1);
    }

    #[test]
    fn orthogonal_newtype_checks() {
        assert!(OrthogonalMatrix::new(Matrix::identity(3, 3)).is_ok());
        assert!(OrthogonalMatrix::new(Matrix::identity(3, 3) * 2.0).is_err());
        assert!(OrthogonalMatrix::new(Matrix::zeros(2, 3)).is_err());
    }
}
