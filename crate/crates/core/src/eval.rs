//! Separation metrics: the minimum distance index, Kronecker composition of
//! mode unmixers, signal matching by correlation and kurtosis ranking.

use serde::Serialize;

use crate::error::{BssError, Result};
use crate::tensor::{unravel, Matrix, TensorSeries};

/// `Γ^r ⊗ ⋯ ⊗ Γ^1`, matching the first-index-fastest vectorization.
pub fn kron_unmixing(gammas: &[Matrix]) -> Matrix {
    gammas.iter().fold(Matrix::identity(1, 1), |acc, g| g.kronecker(&acc))
}

/// Solves the square assignment problem `min Σ_i cost[i, σ(i)]`.
/// Returns `σ` as a row-to-column map.
pub fn linear_assignment(cost: &Matrix) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    // Shortest augmenting path with potentials; 1-based internal indexing.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

#[derive(Debug, Clone, Serialize)]
pub struct MdiValue {
    pub value: f64,
    /// `assignment[i]` is the column of `Γ̂Ω` matched to its row `i`.
    pub assignment: Vec<usize>,
    /// `g²_{i,σ(i)} / ‖g_i‖²` for each row.
    pub row_scores: Vec<f64>,
}

/// Minimum distance index of an unmixing estimate `Γ̂` against the mixing
/// matrix `Ω`: `(p-1)^{-1/2} inf_{C=PJD} ‖C Γ̂ Ω - I‖`.
///
/// The optimal scaling of each row is solved in closed form, leaving a
/// linear assignment over the normalized squared entries of `Γ̂Ω`.
pub fn mdi(gamma: &Matrix, omega: &Matrix) -> Result<MdiValue> {
    if !gamma.is_square() || gamma.shape() != omega.shape() {
        return Err(BssError::ShapeMismatch(format!(
            "MDI needs two square matrices of equal size, got {:?} and {:?}",
            gamma.shape(),
            omega.shape()
        )));
    }
    let p = gamma.nrows();
    if p < 2 {
        return Err(BssError::InvalidParameter("MDI needs p >= 2".into()));
    }
    let g = gamma * omega;
    let scores = normalized_squares(&g)?;
    let cost = scores.map(|s| 1.0 - s);
    let assignment = linear_assignment(&cost);
    let row_scores: Vec<f64> = assignment.iter().enumerate().map(|(i, &j)| scores[(i, j)]).collect();
    let total: f64 = row_scores.iter().sum();
    let value = ((p as f64 - total) / (p as f64 - 1.0)).clamp(0.0, 1.0).sqrt();
    Ok(MdiValue {
        value,
        assignment,
        row_scores,
    })
}

fn normalized_squares(g: &Matrix) -> Result<Matrix> {
    let mut s = g.map(|v| v * v);
    for (i, mut row) in s.row_iter_mut().enumerate() {
        let norm: f64 = row.sum();
        if !(norm > 0.0) {
            return Err(BssError::ZeroRow(i));
        }
        row /= norm;
    }
    Ok(s)
}

/// `min over signed column permutations Q of ‖a - b Q‖_F`.
pub fn pj_distance(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let n = a.ncols();
    let cost = Matrix::from_fn(n, n, |i, j| {
        let ai = a.column(i);
        let bj = b.column(j);
        (ai - bj).norm_squared().min((ai + bj).norm_squared())
    });
    let assignment = linear_assignment(&cost);
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[(i, j)])
        .sum::<f64>()
        .sqrt()
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa > 0.0 && sbb > 0.0 {
        Some(sab / (saa * sbb).sqrt())
    } else {
        None
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationMatch {
    pub target: usize,
    pub max_abs_corr: f64,
    pub component: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationReport {
    pub matches: Vec<CorrelationMatch>,
    /// Components with zero variance, left out of the search.
    pub skipped: Vec<usize>,
}

/// For each target, the recovered component with the largest absolute
/// Pearson correlation. `components` holds one component per row.
pub fn max_abs_correlations(components: &Matrix, targets: &[Vec<f64>]) -> Result<CorrelationReport> {
    let t = components.ncols();
    if let Some((k, bad)) = targets.iter().enumerate().find(|(_, s)| s.len() != t) {
        return Err(BssError::ShapeMismatch(format!(
            "target {k} has length {}, components have length {t}",
            bad.len()
        )));
    }
    let rows: Vec<Vec<f64>> = components.row_iter().map(|r| r.iter().copied().collect()).collect();
    let skipped: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.iter().all(|&v| v == r[0]))
        .map(|(k, _)| k)
        .collect();
    let mut matches = Vec::with_capacity(targets.len());
    for (k, target) in targets.iter().enumerate() {
        let best = rows
            .iter()
            .enumerate()
            .filter(|(c, _)| !skipped.contains(c))
            .filter_map(|(c, r)| pearson(r, target).map(|v| (c, v.abs())))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let (component, max_abs_corr) = best.unwrap_or((usize::MAX, f64::NAN));
        matches.push(CorrelationMatch {
            target: k,
            max_abs_corr,
            component,
        });
    }
    Ok(CorrelationReport { matches, skipped })
}

/// Same as [`max_abs_correlations`] with the cells of a tensor series as components.
pub fn max_abs_correlations_series(recovered: &TensorSeries, targets: &[Vec<f64>]) -> Result<CorrelationReport> {
    max_abs_correlations(&recovered.to_vector_series(), targets)
}

/// Plain moment ratio `m4 / m2² - 3`; `None` for constant input.
pub fn sample_excess_kurtosis(x: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in x {
        let d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    if m2 > 0.0 {
        Some(m4 / (m2 * m2) - 3.0)
    } else {
        None
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedComponent {
    pub linear_index: usize,
    pub multi_index: Vec<usize>,
    pub kurtosis: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KurtosisReport {
    /// Components in descending order of excess kurtosis.
    pub ranked: Vec<RankedComponent>,
    /// Zero-variance components.
    pub excluded: Vec<usize>,
}

pub fn kurtosis_rank(recovered: &TensorSeries) -> Result<KurtosisReport> {
    if recovered.len() < 4 {
        return Err(BssError::InvalidParameter(format!(
            "kurtosis ranking needs at least 4 time points, got {}",
            recovered.len()
        )));
    }
    let mut ranked = Vec::new();
    let mut excluded = Vec::new();
    for l in 0..recovered.frame_size() {
        match sample_excess_kurtosis(&recovered.component(l)) {
            Some(k) => ranked.push(RankedComponent {
                linear_index: l,
                multi_index: unravel(l, recovered.dims()),
                kurtosis: k,
            }),
            None => excluded.push(l),
        }
    }
    ranked.sort_by(|a, b| b.kurtosis.total_cmp(&a.kurtosis));
    Ok(KurtosisReport { ranked, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_pjd(p: usize, rng: &mut impl Rng) -> Matrix {
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(rng);
        let mut c = Matrix::zeros(p, p);
        for (i, &j) in perm.iter().enumerate() {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            c[(i, j)] = sign * rng.random_range(0.1..10.0);
        }
        c
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for rest in permutations(n - 1) {
            for pos in 0..=rest.len() {
                let mut p = rest.clone();
                p.insert(pos, n - 1);
                out.push(p);
            }
        }
        out
    }

    // Independent route: brute force over permutations with per-row
    // least-squares scaling d_i = g_{σ(i)}·e_i / ‖g_{σ(i)}‖².
    fn mdi_brute(gamma: &Matrix, omega: &Matrix) -> f64 {
        let g = gamma * omega;
        let p = g.nrows();
        let eye = Matrix::identity(p, p);
        let mut best = f64::INFINITY;
        for perm in permutations(p) {
            let mut cg = Matrix::zeros(p, p);
            for i in 0..p {
                let row = g.row(perm[i]);
                let d = row[i] / row.norm_squared();
                cg.row_mut(i).copy_from(&(row * d));
            }
            best = best.min((cg - &eye).norm());
        }
        best / ((p - 1) as f64).sqrt()
    }

    #[test]
    fn kron_identities() {
        let eye: Vec<Matrix> = [3, 2, 2].iter().map(|&p| Matrix::identity(p, p)).collect();
        assert_eq!(kron_unmixing(&eye), Matrix::identity(12, 12));
        let g = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(kron_unmixing(std::slice::from_ref(&g)), g);
    }

    #[test]
    fn kron_matches_frame_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let gs: Vec<Matrix> = [3, 2, 2]
            .iter()
            .map(|&p| Matrix::from_fn(p, p, |_, _| rng.sample(StandardNormal)))
            .collect();
        let x = Tensor::from_fn(vec![3, 2, 2], |_| rng.sample(StandardNormal)).unwrap();
        let lhs = x.multi_mode_product(&gs).unwrap().vectorize();
        let rhs = kron_unmixing(&gs) * x.vectorize();
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn mdi_zero_for_exact_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let omega = Matrix::from_fn(5, 5, |_, _| rng.sample(StandardNormal));
        let inv = omega.clone().try_inverse().unwrap();
        assert!(mdi(&inv, &omega).unwrap().value < 1e-7);
        let c = random_pjd(5, &mut rng);
        assert!(mdi(&(&c * &inv), &omega).unwrap().value < 1e-7);
        assert_eq!(
            mdi(&Matrix::identity(4, 4), &Matrix::identity(4, 4)).unwrap().value,
            0.0
        );
    }

    #[test]
    fn mdi_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for p in 2..=6 {
            for _ in 0..10 {
                let g = Matrix::from_fn(p, p, |_, _| rng.sample(StandardNormal));
                let o = Matrix::from_fn(p, p, |_, _| rng.sample(StandardNormal));
                let fast = mdi(&g, &o).unwrap().value;
                assert!((fast - mdi_brute(&g, &o)).abs() < 1e-12);
                assert!((0.0..=1.0).contains(&fast));
            }
        }
    }

    #[test]
    fn mdi_errors() {
        let z = Matrix::zeros(3, 3);
        assert!(matches!(mdi(&z, &Matrix::identity(3, 3)), Err(BssError::ZeroRow(0))));
        assert!(mdi(&Matrix::identity(2, 2), &Matrix::identity(3, 3)).is_err());
        assert!(mdi(&Matrix::identity(1, 1), &Matrix::identity(1, 1)).is_err());
    }

    #[test]
    fn assignment_is_optimal_against_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for n in 1..=6 {
            let cost = Matrix::from_fn(n, n, |_, _| rng.random_range(-5.0..5.0));
            let a = linear_assignment(&cost);
            let got: f64 = a.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
            let best = permutations(n)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            assert!((got - best).abs() < 1e-12);
        }
    }

    #[test]
    fn correlations() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let comps = Matrix::from_fn(12, 1000, |_, _| rng.sample(StandardNormal));
        let target: Vec<f64> = comps.row(4).iter().copied().collect();
        let neg: Vec<f64> = target.iter().map(|v| -v).collect();
        let noise: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
        let r = max_abs_correlations(&comps, &[target, neg, noise]).unwrap();
        assert!((r.matches[0].max_abs_corr - 1.0).abs() < 1e-12);
        assert_eq!(r.matches[0].component, 4);
        assert!((r.matches[1].max_abs_corr - 1.0).abs() < 1e-12);
        assert!(r.matches[2].max_abs_corr < 0.2);

        let mut with_const = comps.clone();
        with_const.row_mut(0).fill(3.0);
        let r = max_abs_correlations(&with_const, &[vec![0.0; 999]]);
        assert!(r.is_err());
        let r = max_abs_correlations(&with_const, &[with_const.row(1).iter().copied().collect()]).unwrap();
        assert_eq!(r.skipped, vec![0]);
    }

    #[test]
    fn kurtosis_ranking() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let t = 100_000;
        // cell 0: Gaussian, cell 1: rare spikes, cell 2: scaled copy of cell 0, cell 3: constant
        let gauss: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
        let spikes: Vec<f64> = (0..t).map(|k| if k % 100 == 0 { 1.0 } else { 0.0 }).collect();
        let frames = (0..t)
            .map(|k| Tensor::new(vec![2, 2], vec![gauss[k], spikes[k], 5.0 * gauss[k], 1.0]).unwrap())
            .collect();
        let s = TensorSeries::new(frames).unwrap();
        let rep = kurtosis_rank(&s).unwrap();
        assert_eq!(rep.excluded, vec![3]);
        assert_eq!(rep.ranked[0].linear_index, 1);
        assert_eq!(rep.ranked[0].multi_index, vec![1, 0]);
        // Bernoulli(q) excess kurtosis: (1 - 6q(1-q)) / (q(1-q))
        let q = 0.01;
        let analytic = (1.0 - 6.0 * q * (1.0 - q)) / (q * (1.0 - q));
        assert!((rep.ranked[0].kurtosis - analytic).abs() < 1e-9);
        let k0 = sample_excess_kurtosis(&gauss).unwrap();
        assert!(k0.abs() < 0.1);
        let k2 = rep.ranked.iter().find(|r| r.linear_index == 2).unwrap().kurtosis;
        assert!((k2 - k0).abs() < 1e-10);

        let short = TensorSeries::new(vec![Tensor::zeros(vec![2]).unwrap(); 3]).unwrap();
        assert!(kurtosis_rank(&short).is_err());
    }
}
