//! SOBI, gFOBI and gJADE for vector series and their tensorial versions
//! TSOBI, TgFOBI and TgJADE, all as whitening followed by joint
//! diagonalization. FOBI, JADE, TFOBI and TJADE are the zero-lag cases.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{BssError, Result};
use crate::linalg::{joint_diagonalize, off_diagonal_mass, sym_inv_sqrt, JointDiagOptions, OrthogonalMatrix};
use crate::moments::{b_tau, c_tau_ij_grid, sigma_tau, IdentityShift, LagSet, ModeFlattenings};
use crate::tensor::{center, Matrix, Tensor, TensorSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sobi,
    Gfobi,
    Gjade,
}

impl Family {
    pub fn default_lags(self) -> LagSet {
        match self {
            Family::Sobi => LagSet::range(1, 12).unwrap(),
            Family::Gfobi | Family::Gjade => LagSet::range(0, 12).unwrap(),
        }
    }
}

/// Which `(i, j)` pairs enter the gJADE matrix set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JadePairs {
    #[default]
    All,
    UpperTriangle,
}

#[derive(Debug, Clone)]
pub struct MethodConfig {
    pub family: Family,
    pub lags: LagSet,
    pub jd: JointDiagOptions,
    pub jade_pairs: JadePairs,
    /// Identity term of the tensor gJADE matrices; ignored by vector methods.
    pub identity_shift: IdentityShift,
}

impl MethodConfig {
    pub fn new(family: Family) -> Self {
        MethodConfig {
            family,
            lags: family.default_lags(),
            jd: JointDiagOptions::default(),
            jade_pairs: JadePairs::All,
            identity_shift: IdentityShift::AllPairs,
        }
    }

    pub fn with_lags(mut self, lags: LagSet) -> Self {
        self.lags = lags;
        self
    }
}

/// The ten estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fobi,
    Jade,
    Sobi,
    Gfobi,
    Gjade,
    Tfobi,
    Tjade,
    Tsobi,
    Tgfobi,
    Tgjade,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Fobi,
        Method::Jade,
        Method::Sobi,
        Method::Gfobi,
        Method::Gjade,
        Method::Tfobi,
        Method::Tjade,
        Method::Tsobi,
        Method::Tgfobi,
        Method::Tgjade,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fobi => "fobi",
            Method::Jade => "jade",
            Method::Sobi => "sobi",
            Method::Gfobi => "gfobi",
            Method::Gjade => "gjade",
            Method::Tfobi => "tfobi",
            Method::Tjade => "tjade",
            Method::Tsobi => "tsobi",
            Method::Tgfobi => "tgfobi",
            Method::Tgjade => "tgjade",
        }
    }

    pub fn is_tensor(self) -> bool {
        matches!(
            self,
            Method::Tfobi | Method::Tjade | Method::Tsobi | Method::Tgfobi | Method::Tgjade
        )
    }

    pub fn family(self) -> Family {
        match self {
            Method::Sobi | Method::Tsobi => Family::Sobi,
            Method::Fobi | Method::Gfobi | Method::Tfobi | Method::Tgfobi => Family::Gfobi,
            Method::Jade | Method::Gjade | Method::Tjade | Method::Tgjade => Family::Gjade,
        }
    }

    /// FOBI, JADE and their tensor versions use only lag zero.
    pub fn is_zero_lag(self) -> bool {
        matches!(self, Method::Fobi | Method::Jade | Method::Tfobi | Method::Tjade)
    }

    pub fn default_config(self) -> MethodConfig {
        let cfg = MethodConfig::new(self.family());
        if self.is_zero_lag() {
            cfg.with_lags(LagSet::single(0))
        } else {
            cfg
        }
    }

    /// Configuration with user-chosen lags; zero-lag methods only accept `{0}`.
    pub fn config_with_lags(self, lags: Option<LagSet>) -> Result<MethodConfig> {
        match lags {
            None => Ok(self.default_config()),
            Some(l) if self.is_zero_lag() && l.as_slice() != [0] => Err(BssError::InvalidParameter(format!(
                "{self} uses only lag 0, got lags {l}"
            ))),
            Some(l) => Ok(self.default_config().with_lags(l)),
        }
    }

    pub fn vector_counterpart(self) -> Method {
        match self {
            Method::Tfobi => Method::Fobi,
            Method::Tjade => Method::Jade,
            Method::Tsobi => Method::Sobi,
            Method::Tgfobi => Method::Gfobi,
            Method::Tgjade => Method::Gjade,
            v => v,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = BssError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| BssError::InvalidParameter(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeDiagnostics {
    pub mode: usize,
    pub matrices: usize,
    pub objective: f64,
    pub off_diagonal: f64,
    pub sweeps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct UnmixingResult {
    /// `Γ^m = U_mᵀ (Σ^m_0)^{-1/2}`, one per mode (a single matrix for vector methods).
    pub mode_unmixers: Vec<Matrix>,
    pub whitening: Vec<Matrix>,
    pub rotations: Vec<OrthogonalMatrix>,
    /// Temporal mean removed before unmixing.
    pub mean: Tensor,
    pub recovered: TensorSeries,
    pub diagnostics: Vec<ModeDiagnostics>,
}

impl UnmixingResult {
    /// The trivial result that only centers.
    pub fn identity(mean: Tensor, recovered: TensorSeries) -> Self {
        let eye: Vec<Matrix> = mean.dims().iter().map(|&p| Matrix::identity(p, p)).collect();
        UnmixingResult {
            rotations: mean.dims().iter().map(|&p| OrthogonalMatrix::identity(p)).collect(),
            whitening: eye.clone(),
            mode_unmixers: eye,
            mean,
            recovered,
            diagnostics: Vec::new(),
        }
    }
}

fn column_mean(x: &Matrix) -> nalgebra::DVector<f64> {
    x.column_mean()
}

/// Whitens a centered `p × T` series; returns it with `W = Σ_0^{-1/2}`.
pub fn whiten_vector(x: &Matrix) -> Result<(Matrix, Matrix)> {
    let cov = sigma_tau(x, 0, true)?.entries;
    let w = sym_inv_sqrt(&cov)?;
    Ok((&w * x, w))
}

/// Standardizes a centered tensor series from all modes at once, using the
/// mode covariances of the input.
pub fn whiten_tensor(s: &TensorSeries) -> Result<(TensorSeries, Vec<Matrix>)> {
    let ws = (0..s.order())
        .map(|m| {
            let cov = ModeFlattenings::new(s, m)?.cov();
            sym_inv_sqrt(&cov).map_err(|e| e.in_mode(m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((s.multi_mode_product(&ws)?, ws))
}

fn check_length(len: usize, lags: &LagSet) -> Result<()> {
    if len <= lags.max() {
        Err(BssError::LagTooLarge { lag: lags.max(), len })
    } else {
        Ok(())
    }
}

fn jade_pairs(p: usize, pairs: JadePairs) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |i| {
        let start = if pairs == JadePairs::UpperTriangle { i } else { 0 };
        (start..p).map(move |j| (i, j))
    })
}

fn vector_matrix_set(z: &Matrix, cfg: &MethodConfig) -> Result<Vec<Matrix>> {
    let p = z.nrows();
    let mut set = Vec::new();
    for tau in cfg.lags.iter() {
        match cfg.family {
            Family::Sobi => set.push(sigma_tau(z, tau, true)?.entries),
            Family::Gfobi => set.push(b_tau(z, tau)?.entries),
            Family::Gjade => {
                let mut grid: Vec<Option<Matrix>> = c_tau_ij_grid(z, tau)?.into_iter().map(Some).collect();
                for (i, j) in jade_pairs(p, cfg.jade_pairs) {
                    set.push(grid[i * p + j].take().unwrap());
                }
            }
        }
    }
    Ok(set)
}

fn mode_matrix_set(flat: &ModeFlattenings, cfg: &MethodConfig) -> Result<Vec<Matrix>> {
    let p = flat.dim();
    let mut set = Vec::new();
    for tau in cfg.lags.iter() {
        match cfg.family {
            Family::Sobi => set.push(flat.autocov(tau, true)?),
            Family::Gfobi => set.push(flat.b_tau(tau)?),
            Family::Gjade => {
                let mut grid: Vec<Option<Matrix>> = flat
                    .c_tau_ij_grid_with(tau, cfg.identity_shift)?
                    .into_iter()
                    .map(Some)
                    .collect();
                for (i, j) in jade_pairs(p, cfg.jade_pairs) {
                    set.push(grid[i * p + j].take().unwrap());
                }
            }
        }
    }
    Ok(set)
}

fn diagonalize(set: &[Matrix], mode: usize, opts: JointDiagOptions) -> Result<(OrthogonalMatrix, ModeDiagnostics)> {
    let res = joint_diagonalize(set, opts)?;
    let off = off_diagonal_mass(set, res.rotation.as_matrix());
    let diag = ModeDiagnostics {
        mode,
        matrices: set.len(),
        objective: res.objective,
        off_diagonal: off,
        sweeps: res.sweeps_used,
        converged: res.converged,
    };
    Ok((res.rotation, diag))
}

/// Vector-series estimator on a `p × T` series.
pub fn unmix_vector(x: &Matrix, cfg: &MethodConfig) -> Result<UnmixingResult> {
    let p = x.nrows();
    if p < 2 {
        return Err(BssError::InvalidParameter(format!(
            "vector methods need at least 2 components, got {p}"
        )));
    }
    check_length(x.ncols(), &cfg.lags)?;
    let mean = column_mean(x);
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let (z, w) = whiten_vector(&centered)?;
    let set = vector_matrix_set(&z, cfg)?;
    let (u, diag) = diagonalize(&set, 0, cfg.jd)?;
    let gamma = u.as_matrix().tr_mul(&w);
    let recovered = TensorSeries::from_vector_series(&(&gamma * &centered))?;
    Ok(UnmixingResult {
        mode_unmixers: vec![gamma],
        whitening: vec![w],
        rotations: vec![u],
        mean: Tensor::new(vec![p], mean.as_slice().to_vec())?,
        recovered,
        diagnostics: vec![diag],
    })
}

/// Tensor-series estimator: center, standardize all modes from the input's
/// mode covariances, jointly diagonalize one matrix set per mode built from
/// the same standardized series, and rotate.
pub fn unmix_tensor(s: &TensorSeries, cfg: &MethodConfig) -> Result<UnmixingResult> {
    check_length(s.len(), &cfg.lags)?;
    let mean = s.mean();
    let centered = s.subtract(&mean)?;
    let (standardized, whitening) = whiten_tensor(&centered)?;
    let mut rotations = Vec::with_capacity(s.order());
    let mut diagnostics = Vec::with_capacity(s.order());
    for m in 0..s.order() {
        let flat = ModeFlattenings::new(&standardized, m)?;
        let set = mode_matrix_set(&flat, cfg)?;
        let (u, diag) = diagonalize(&set, m, cfg.jd).map_err(|e| e.in_mode(m))?;
        rotations.push(u);
        diagnostics.push(diag);
    }
    let mode_unmixers: Vec<Matrix> = rotations
        .iter()
        .zip(&whitening)
        .map(|(u, w)| u.as_matrix().tr_mul(w))
        .collect();
    let recovered = centered.multi_mode_product(&mode_unmixers)?;
    Ok(UnmixingResult {
        mode_unmixers,
        whitening,
        rotations,
        mean,
        recovered,
        diagnostics,
    })
}

/// Runs `method`, vectorizing the frames first for the vector methods.
pub fn unmix(s: &TensorSeries, method: Method, cfg: &MethodConfig) -> Result<UnmixingResult> {
    if method.is_tensor() {
        unmix_tensor(s, cfg)
    } else {
        unmix_vector(&s.to_vector_series(), cfg)
    }
}

/// Applies the stored centering and mode unmixers to any series of matching
/// shape. Results of vector methods also accept series whose vectorized
/// frames have the right length.
pub fn apply_unmixing(s: &TensorSeries, u: &UnmixingResult) -> Result<TensorSeries> {
    if s.dims() == u.mean.dims() {
        return s.subtract(&u.mean)?.multi_mode_product(&u.mode_unmixers);
    }
    if u.mean.order() == 1 && s.frame_size() == u.mean.len() {
        let v = TensorSeries::from_vector_series(&s.to_vector_series())?;
        return v.subtract(&u.mean)?.multi_mode_product(&u.mode_unmixers);
    }
    Err(BssError::ShapeMismatch(format!(
        "series dims {:?} do not match unmixer dims {:?}",
        s.dims(),
        u.mean.dims()
    )))
}

/// Centers a series and wraps it as an identity unmixing result.
pub fn identity_result(s: &TensorSeries) -> UnmixingResult {
    UnmixingResult::identity(s.mean(), center(s))
}
