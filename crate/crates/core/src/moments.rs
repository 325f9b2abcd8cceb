//! Lagged second- and fourth-order moment matrices of vector and tensor
//! series.
//!
//! Vector series are `p × T` matrices with one column per time point. Every
//! expectation is a sample average over the valid range, dividing by the
//! number of summands `T - τ_max`. Inputs are assumed to be centered already.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{BssError, Result};
use crate::tensor::{check_mode, Matrix, TensorSeries};

/// A non-empty sorted set of non-negative lags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagSet(Vec<usize>);

impl LagSet {
    pub fn new(mut lags: Vec<usize>) -> Result<Self> {
        if lags.is_empty() {
            return Err(BssError::InvalidParameter("lag set must not be empty".into()));
        }
        lags.sort_unstable();
        lags.dedup();
        Ok(LagSet(lags))
    }

    /// Inclusive range `a..=b`.
    pub fn range(a: usize, b: usize) -> Result<Self> {
        if a > b {
            return Err(BssError::InvalidParameter(format!("empty lag range {a}:{b}")));
        }
        LagSet::new((a..=b).collect())
    }

    pub fn single(lag: usize) -> Self {
        LagSet(vec![lag])
    }

    pub fn max(&self) -> usize {
        *self.0.last().unwrap()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Parses `a:b` (inclusive range) or `a,b,c`.
impl FromStr for LagSet {
    type Err = BssError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || BssError::InvalidParameter(format!("invalid lag specification {s:?}"));
        let s = s.trim();
        if let Some((a, b)) = s.split_once(':') {
            let a = a.trim().parse().map_err(|_| bad())?;
            let b = b.trim().parse().map_err(|_| bad())?;
            LagSet::range(a, b)
        } else {
            let lags = s
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            LagSet::new(lags)
        }
    }
}

impl fmt::Display for LagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let contiguous = self.0.windows(2).all(|w| w[1] == w[0] + 1);
        if contiguous && self.0.len() > 2 {
            write!(f, "{}:{}", self.0[0], self.max())
        } else {
            let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

impl Serialize for LagSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    SigmaTau {
        tau: usize,
        symmetrized: bool,
    },
    BTau {
        tau: usize,
    },
    BTauIj {
        tau: usize,
        i: usize,
        j: usize,
    },
    CTauIj {
        tau: usize,
        i: usize,
        j: usize,
    },
    ModeCov {
        mode: usize,
    },
    ModeAutocov {
        mode: usize,
        tau: usize,
        symmetrized: bool,
    },
    ModeBTau {
        mode: usize,
        tau: usize,
    },
    ModeBLags {
        mode: usize,
        lags: [usize; 4],
        i: usize,
        j: usize,
    },
    ModeCTauIj {
        mode: usize,
        tau: usize,
        i: usize,
        j: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    pub entries: Matrix,
    pub kind: MomentKind,
}

fn check_lag(lag: usize, len: usize) -> Result<()> {
    if lag >= len {
        Err(BssError::LagTooLarge { lag, len })
    } else {
        Ok(())
    }
}

fn check_index(i: usize, j: usize, dim: usize) -> Result<()> {
    if i >= dim || j >= dim {
        Err(BssError::IndexOutOfRange { i, j, dim })
    } else {
        Ok(())
    }
}

fn symmetrize(m: Matrix) -> Matrix {
    (&m + m.transpose()) * 0.5
}

/// `(1/n) Σ_t w_t a_t b_tᵀ` over the columns of `a` and `b`.
fn weighted_cross(a: &Matrix, b: &Matrix, w: impl Fn(usize) -> f64, n: usize) -> Matrix {
    let mut aw = a.clone();
    for (t, mut col) in aw.column_iter_mut().enumerate() {
        col *= w(t);
    }
    aw * b.transpose() / n as f64
}

/// `Σ_τ = E[x_t x_{t+τ}ᵀ]`, optionally replaced by its symmetric part.
pub fn sigma_tau(x: &Matrix, tau: usize, symmetrize_flag: bool) -> Result<MomentMatrix> {
    let len = x.ncols();
    check_lag(tau, len)?;
    let n = len - tau;
    let m = x.columns(0, n) * x.columns(tau, n).transpose() / n as f64;
    Ok(MomentMatrix {
        entries: if symmetrize_flag { symmetrize(m) } else { m },
        kind: MomentKind::SigmaTau {
            tau,
            symmetrized: symmetrize_flag,
        },
    })
}

/// `B_τ = E[x_t x_{t+τ}ᵀ x_{t+τ} x_tᵀ]`.
pub fn b_tau(x: &Matrix, tau: usize) -> Result<MomentMatrix> {
    let len = x.ncols();
    check_lag(tau, len)?;
    let n = len - tau;
    let head = x.columns(0, n).into_owned();
    let lagged = x.columns(tau, n);
    let m = weighted_cross(&head, &head, |t| lagged.column(t).norm_squared(), n);
    Ok(MomentMatrix {
        entries: symmetrize(m),
        kind: MomentKind::BTau { tau },
    })
}

/// `B_τij = E[(x_{t+τ})_i (x_{t+τ})_j x_t x_tᵀ]`.
pub fn b_tau_ij(x: &Matrix, tau: usize, i: usize, j: usize) -> Result<MomentMatrix> {
    let len = x.ncols();
    check_lag(tau, len)?;
    check_index(i, j, x.nrows())?;
    let n = len - tau;
    let head = x.columns(0, n).into_owned();
    let m = weighted_cross(&head, &head, |t| x[(i, t + tau)] * x[(j, t + tau)], n);
    Ok(MomentMatrix {
        entries: m,
        kind: MomentKind::BTauIj { tau, i, j },
    })
}

/// `C_τij = B_τij - Σ_τ (E^ij + E^ji) Σ_τᵀ - δ_ij I`, with the raw `Σ_τ`.
pub fn c_tau_ij(x: &Matrix, tau: usize, i: usize, j: usize) -> Result<MomentMatrix> {
    let b = b_tau_ij(x, tau, i, j)?.entries;
    let sigma = sigma_tau(x, tau, false)?.entries;
    Ok(MomentMatrix {
        entries: c_from_parts(b, &sigma, i, j),
        kind: MomentKind::CTauIj { tau, i, j },
    })
}

fn c_from_parts(mut b: Matrix, sigma: &Matrix, i: usize, j: usize) -> Matrix {
    let si = sigma.column(i);
    let sj = sigma.column(j);
    b -= si * sj.transpose() + sj * si.transpose();
    if i == j {
        for k in 0..b.nrows() {
            b[(k, k)] -= 1.0;
        }
    }
    b
}

// Upper-triangular pair list (i <= j) and the products of those pairs per column.
fn pair_products(x: &Matrix) -> (Vec<(usize, usize)>, Matrix) {
    let p = x.nrows();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).collect();
    let prods = Matrix::from_fn(x.ncols(), pairs.len(), |t, k| {
        let (i, j) = pairs[k];
        x[(i, t)] * x[(j, t)]
    });
    (pairs, prods)
}

/// All `B_τij`, `i, j < p`, returned in row-major `(i, j)` order.
pub fn b_tau_ij_grid(x: &Matrix, tau: usize) -> Result<Vec<Matrix>> {
    let len = x.ncols();
    check_lag(tau, len)?;
    let p = x.nrows();
    let n = len - tau;
    let (pairs, lagged) = pair_products(&x.columns(tau, n).into_owned());
    let (_, head) = pair_products(&x.columns(0, n).into_owned());
    // cross[(ij), (kl)] = Σ_t y_i y_j x_k x_l
    let cross = lagged.tr_mul(&head) / n as f64;
    let mut index = vec![0usize; p * p];
    for (k, &(a, b)) in pairs.iter().enumerate() {
        index[a * p + b] = k;
        index[b * p + a] = k;
    }
    let mut out = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            let row = index[i * p + j];
            out.push(Matrix::from_fn(p, p, |k, l| cross[(row, index[k * p + l])]));
        }
    }
    Ok(out)
}

/// All `C_τij`, `i, j < p`, returned in row-major `(i, j)` order.
pub fn c_tau_ij_grid(x: &Matrix, tau: usize) -> Result<Vec<Matrix>> {
    let p = x.nrows();
    let sigma = sigma_tau(x, tau, false)?.entries;
    let grid = b_tau_ij_grid(x, tau)?;
    Ok(grid
        .into_iter()
        .enumerate()
        .map(|(k, b)| c_from_parts(b, &sigma, k / p, k % p))
        .collect())
}

/// The `m`-flattenings of every frame of a series.
#[derive(Debug, Clone)]
pub struct ModeFlattenings {
    pub mode: usize,
    pub rho: usize,
    pub frames: Vec<Matrix>,
}

impl ModeFlattenings {
    pub fn new(s: &TensorSeries, m: usize) -> Result<Self> {
        check_mode(m, s.order())?;
        let frames = s.frames().iter().map(|f| f.flatten(m)).collect::<Result<Vec<_>>>()?;
        Ok(ModeFlattenings {
            mode: m,
            rho: s.frame_size() / s.dims()[m],
            frames,
        })
    }

    pub fn dim(&self) -> usize {
        self.frames[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    fn scale(&self, n: usize) -> f64 {
        1.0 / (self.rho as f64 * n as f64)
    }

    /// `Σ^m_0 = (1/ρ_m) E[X_t X_tᵀ]`.
    pub fn cov(&self) -> Matrix {
        let p = self.dim();
        let mut acc = Matrix::zeros(p, p);
        for x in &self.frames {
            acc.gemm(1.0, x, &x.transpose(), 1.0);
        }
        symmetrize(acc * self.scale(self.len()))
    }

    /// `Σ^m_τ = (1/ρ_m) E[X_t X_{t+τ}ᵀ]`.
    pub fn autocov(&self, tau: usize, symmetrize_flag: bool) -> Result<Matrix> {
        check_lag(tau, self.len())?;
        let n = self.len() - tau;
        let p = self.dim();
        let mut acc = Matrix::zeros(p, p);
        for t in 0..n {
            acc.gemm(1.0, &self.frames[t], &self.frames[t + tau].transpose(), 1.0);
        }
        let m = acc * self.scale(n);
        Ok(if symmetrize_flag { symmetrize(m) } else { m })
    }

    /// `B^m_τ = (1/ρ_m) E[X_t X_{t+τ}ᵀ X_{t+τ} X_tᵀ]`.
    pub fn b_tau(&self, tau: usize) -> Result<Matrix> {
        check_lag(tau, self.len())?;
        let n = self.len() - tau;
        let p = self.dim();
        let mut acc = Matrix::zeros(p, p);
        for t in 0..n {
            let a = &self.frames[t] * self.frames[t + tau].transpose();
            acc += &a * a.transpose();
        }
        Ok(symmetrize(acc * self.scale(n)))
    }

    /// `B^m_{τ1τ2τ3τ4ij} = (1/ρ_m) E[(X_{t+τ1} X_{t+τ2}ᵀ)_ij X_{t+τ3} X_{t+τ4}ᵀ]`.
    pub fn b_lags(&self, lags: [usize; 4], i: usize, j: usize) -> Result<Matrix> {
        let max = *lags.iter().max().unwrap();
        check_lag(max, self.len())?;
        check_index(i, j, self.dim())?;
        let n = self.len() - max;
        let p = self.dim();
        let mut acc = Matrix::zeros(p, p);
        for t in 0..n {
            let w = self.frames[t + lags[0]].row(i).dot(&self.frames[t + lags[1]].row(j));
            acc.gemm(w, &self.frames[t + lags[2]], &self.frames[t + lags[3]].transpose(), 1.0);
        }
        Ok(acc * self.scale(n))
    }

    /// All `B^m_{τ1τ2τ3τ4ij}`, returned in row-major `(i, j)` order.
    pub fn b_lags_grid(&self, lags: [usize; 4]) -> Result<Vec<Matrix>> {
        let max = *lags.iter().max().unwrap();
        check_lag(max, self.len())?;
        let n = self.len() - max;
        let p = self.dim();
        let pp = p * p;
        let mut left = Matrix::zeros(n, pp);
        let mut right = Matrix::zeros(n, pp);
        for t in 0..n {
            let a = &self.frames[t + lags[0]] * self.frames[t + lags[1]].transpose();
            let b = &self.frames[t + lags[2]] * self.frames[t + lags[3]].transpose();
            for k in 0..pp {
                left[(t, k)] = a[k];
                right[(t, k)] = b[k];
            }
        }
        // column-major: entry (i, j) of a p×p block sits at i + p*j
        let cross = left.tr_mul(&right) * self.scale(n);
        let mut out = Vec::with_capacity(pp);
        for i in 0..p {
            for j in 0..p {
                let row = i + p * j;
                out.push(Matrix::from_fn(p, p, |k, l| cross[(row, k + p * l)]));
            }
        }
        Ok(out)
    }

    /// `C^m_τij = B^m_{0ττ0ij} + B^m_{0τ0τij} - B^m_{ττ00ij} - Σ^m_0 (E^ij + E^ji + I) Σ^m_0ᵀ`.
    pub fn c_tau_ij(&self, tau: usize, i: usize, j: usize) -> Result<Matrix> {
        let sigma = self.cov();
        let b1 = self.b_lags([0, tau, tau, 0], i, j)?;
        let b2 = self.b_lags([0, tau, 0, tau], i, j)?;
        let b3 = self.b_lags([tau, tau, 0, 0], i, j)?;
        Ok(mode_c_from_parts(b1 + b2 - b3, &sigma, i, j, IdentityShift::AllPairs))
    }

    /// All `C^m_τij`, returned in row-major `(i, j)` order.
    pub fn c_tau_ij_grid(&self, tau: usize) -> Result<Vec<Matrix>> {
        self.c_tau_ij_grid_with(tau, IdentityShift::AllPairs)
    }

    /// [`Self::c_tau_ij_grid`] with a choice of identity term.
    pub fn c_tau_ij_grid_with(&self, tau: usize, shift: IdentityShift) -> Result<Vec<Matrix>> {
        let p = self.dim();
        let sigma = self.cov();
        let b1 = self.b_lags_grid([0, tau, tau, 0])?;
        let b2 = self.b_lags_grid([0, tau, 0, tau])?;
        let b3 = self.b_lags_grid([tau, tau, 0, 0])?;
        Ok(b1
            .into_iter()
            .zip(b2)
            .zip(b3)
            .enumerate()
            .map(|(k, ((a, b), c))| mode_c_from_parts(a + b - c, &sigma, k / p, k % p, shift))
            .collect())
    }
}

/// The `I` inside `Σ^m_0 (E^ij + E^ji + I) Σ^m_0ᵀ`.
///
/// `AllPairs` subtracts it for every `(i, j)` as in the tensor definition.
/// `DiagonalPairs` uses `δ_ij I` as the vector definition does; the two sets
/// differ by identity shifts when `Σ^m_0 = I`, and only the latter is exactly
/// orthogonally equivariant when `Σ^m_0` of the standardized sample is not `I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityShift {
    #[default]
    AllPairs,
    DiagonalPairs,
}

fn mode_c_from_parts(mut b: Matrix, sigma: &Matrix, i: usize, j: usize, shift: IdentityShift) -> Matrix {
    let si = sigma.column(i);
    let sj = sigma.column(j);
    b -= si * sj.transpose() + sj * si.transpose();
    if shift == IdentityShift::AllPairs || i == j {
        b -= sigma * sigma.transpose();
    }
    b
}

pub fn mode_cov(s: &TensorSeries, m: usize) -> Result<MomentMatrix> {
    Ok(MomentMatrix {
        entries: ModeFlattenings::new(s, m)?.cov(),
        kind: MomentKind::ModeCov { mode: m },
    })
}

pub fn mode_autocov(s: &TensorSeries, m: usize, tau: usize, symmetrize_flag: bool) -> Result<MomentMatrix> {
    Ok(MomentMatrix {
        entries: ModeFlattenings::new(s, m)?.autocov(tau, symmetrize_flag)?,
        kind: MomentKind::ModeAutocov {
            mode: m,
            tau,
            symmetrized: symmetrize_flag,
        },
    })
}

pub fn mode_b_tau(s: &TensorSeries, m: usize, tau: usize) -> Result<MomentMatrix> {
    Ok(MomentMatrix {
        entries: ModeFlattenings::new(s, m)?.b_tau(tau)?,
        kind: MomentKind::ModeBTau { mode: m, tau },
    })
}

pub fn mode_b_lags(s: &TensorSeries, m: usize, lags: [usize; 4], i: usize, j: usize) -> Result<MomentMatrix> {
    Ok(MomentMatrix {
        entries: ModeFlattenings::new(s, m)?.b_lags(lags, i, j)?,
        kind: MomentKind::ModeBLags { mode: m, lags, i, j },
    })
}

pub fn mode_c_tau_ij(s: &TensorSeries, m: usize, tau: usize, i: usize, j: usize) -> Result<MomentMatrix> {
    Ok(MomentMatrix {
        entries: ModeFlattenings::new(s, m)?.c_tau_ij(tau, i, j)?,
        kind: MomentKind::ModeCTauIj { mode: m, tau, i, j },
    })
}
