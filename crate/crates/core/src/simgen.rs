//! Latent series generators (ARMA, GARCH, stochastic volatility), mixing
//! matrix samplers and the two twelve-component simulation settings.
//!
//! Every generator runs a burn-in of [`BURN_IN`] steps and standardizes its
//! output to zero sample mean and unit sample variance.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::Serialize;

use crate::error::{BssError, Result};
use crate::tensor::{Matrix, Tensor, TensorSeries};

pub const BURN_IN: usize = 1000;
/// Gaussian mixing matrices with a larger condition number are redrawn.
pub const MAX_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct ArmaSpec {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
}

impl ArmaSpec {
    pub fn new(ar: Vec<f64>, ma: Vec<f64>) -> Self {
        ArmaSpec { ar, ma }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchSpec {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl GarchSpec {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let persistence: f64 = alpha.iter().chain(&beta).sum();
        if alpha.iter().chain(&beta).any(|&c| !(c >= 0.0)) || persistence >= 1.0 {
            return Err(BssError::InvalidParameter(format!(
                "GARCH coefficients must be non-negative with sum below 1, got α={alpha:?} β={beta:?}"
            )));
        }
        Ok(GarchSpec { alpha, beta })
    }

    /// Intercept giving unit unconditional variance.
    pub fn omega(&self) -> f64 {
        1.0 - self.alpha.iter().sum::<f64>() - self.beta.iter().sum::<f64>()
    }
}

/// Stochastic volatility: `h_t = μ + φ(h_{t-1} - μ) + σ η_t`, `y_t = exp(h_t/2) ε_t`
/// with `ε_t` unit-variance Student t with `ν` degrees of freedom
/// (`None` is Gaussian).
#[derive(Debug, Clone, PartialEq)]
pub struct SvSpec {
    pub mu: f64,
    pub phi: f64,
    pub sigma: f64,
    pub nu: Option<f64>,
}

impl SvSpec {
    pub fn new(mu: f64, phi: f64, sigma: f64, nu: Option<f64>) -> Result<Self> {
        if !(phi.abs() < 1.0) || !(sigma > 0.0) || nu.is_some_and(|v| !(v > 2.0)) || !mu.is_finite() {
            return Err(BssError::InvalidParameter(format!(
                "invalid SV parameters μ={mu} φ={phi} σ={sigma} ν={nu:?}"
            )));
        }
        Ok(SvSpec { mu, phi, sigma, nu })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentModel {
    Arma(ArmaSpec),
    Garch(GarchSpec),
    Sv(SvSpec),
}

impl ComponentModel {
    pub fn generate<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            ComponentModel::Arma(s) => gen_arma(s, t, rng),
            ComponentModel::Garch(s) => gen_garch(s, t, rng),
            ComponentModel::Sv(s) => gen_sv(s, t, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Arma,
    Sv,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Arma => "arma",
            Setting::Sv => "sv",
        })
    }
}

impl FromStr for Setting {
    type Err = BssError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arma" => Ok(Setting::Arma),
            "sv" => Ok(Setting::Sv),
            _ => Err(BssError::InvalidParameter(format!("unknown setting {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MixingKind {
    Gaussian,
    Haar,
}

impl fmt::Display for MixingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixingKind::Gaussian => "gaussian",
            MixingKind::Haar => "haar",
        })
    }
}

impl FromStr for MixingKind {
    type Err = BssError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(MixingKind::Gaussian),
            "haar" | "orthogonal" => Ok(MixingKind::Haar),
            _ => Err(BssError::InvalidParameter(format!("unknown mixing kind {s:?}"))),
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Zero mean, unit variance (divisor `n`).
fn standardize(mut v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(BssError::NonFinite(format!("{what} output")));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return Err(BssError::NonFinite(format!("{what} output has variance {var}")));
    }
    let sd = var.sqrt();
    v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
    Ok(v)
}

fn arma_raw<R: Rng + ?Sized>(spec: &ArmaSpec, t: usize, rng: &mut R) -> Vec<f64> {
    let total = t + BURN_IN;
    let mut x = vec![0.0; total];
    let mut e = vec![0.0; total];
    for k in 0..total {
        e[k] = normal(rng);
        let mut v = e[k];
        for (i, phi) in spec.ar.iter().enumerate() {
            if k > i {
                v += phi * x[k - i - 1];
            }
        }
        for (j, theta) in spec.ma.iter().enumerate() {
            if k > j {
                v += theta * e[k - j - 1];
            }
        }
        x[k] = v;
    }
    x.split_off(BURN_IN)
}

/// `x_t = Σ φ_i x_{t-i} + e_t + Σ θ_j e_{t-j}` with standard normal `e_t`.
pub fn gen_arma<R: Rng + ?Sized>(spec: &ArmaSpec, t: usize, rng: &mut R) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(BssError::InvalidParameter("series length must be positive".into()));
    }
    standardize(arma_raw(spec, t, rng), "ARMA")
}

fn garch_raw<R: Rng + ?Sized>(spec: &GarchSpec, t: usize, rng: &mut R) -> Vec<f64> {
    let total = t + BURN_IN;
    let omega = spec.omega();
    let q = spec.alpha.len();
    let p = spec.beta.len();
    // initial conditional variances and squared shocks at the unconditional level
    let mut eps2 = vec![1.0; q.max(1)];
    let mut sig2 = vec![1.0; p.max(1)];
    let mut out = Vec::with_capacity(total);
    for _ in 0..total {
        let mut s2 = omega;
        for (i, a) in spec.alpha.iter().enumerate() {
            s2 += a * eps2[i];
        }
        for (j, b) in spec.beta.iter().enumerate() {
            s2 += b * sig2[j];
        }
        let e = s2.sqrt() * normal(rng);
        eps2.rotate_right(1);
        eps2[0] = e * e;
        sig2.rotate_right(1);
        sig2[0] = s2;
        out.push(e);
    }
    out.split_off(BURN_IN)
}

/// GARCH(q, p): `σ²_t = ω + Σ α_i ε²_{t-i} + Σ β_j σ²_{t-j}`, `ε_t = σ_t z_t`,
/// with `ω = 1 - Σα - Σβ`.
pub fn gen_garch<R: Rng + ?Sized>(spec: &GarchSpec, t: usize, rng: &mut R) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(BssError::InvalidParameter("series length must be positive".into()));
    }
    standardize(garch_raw(spec, t, rng), "GARCH")
}

fn sv_raw<R: Rng + ?Sized>(spec: &SvSpec, t: usize, rng: &mut R) -> Vec<f64> {
    let total = t + BURN_IN;
    let stationary_sd = spec.sigma / (1.0 - spec.phi * spec.phi).sqrt();
    let mut h = spec.mu + stationary_sd * normal(rng);
    let student = spec.nu.map(|nu| (StudentT::new(nu).unwrap(), ((nu - 2.0) / nu).sqrt()));
    let mut out = Vec::with_capacity(total);
    for k in 0..total {
        if k > 0 {
            h = spec.mu + spec.phi * (h - spec.mu) + spec.sigma * normal(rng);
        }
        let eps = match &student {
            Some((dist, scale)) => dist.sample(rng) * scale,
            None => normal(rng),
        };
        out.push((h / 2.0).exp() * eps);
    }
    out.split_off(BURN_IN)
}

pub fn gen_sv<R: Rng + ?Sized>(spec: &SvSpec, t: usize, rng: &mut R) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(BssError::InvalidParameter("series length must be positive".into()));
    }
    standardize(sv_raw(spec, t, rng), "SV")
}

/// The twelve component models of a setting, in cell order. The MA(q)
/// coefficients of the ARMA setting are drawn from `U(-1, 1)` on every call.
pub fn setting_models<R: Rng + ?Sized>(setting: Setting, rng: &mut R) -> Vec<ComponentModel> {
    match setting {
        Setting::Arma => {
            let mut models = vec![
                ArmaSpec::new(vec![0.9], vec![]),
                ArmaSpec::new(vec![-0.9], vec![]),
                ArmaSpec::new(vec![], vec![0.5, -0.5]),
                ArmaSpec::new(vec![-0.5, -0.3], vec![]),
                ArmaSpec::new(vec![0.5, -0.3, 0.1, -0.1], vec![0.7, -0.3]),
                ArmaSpec::new(vec![-0.7, 0.1], vec![0.9, 0.3, 0.1, -0.1]),
            ];
            for q in [5, 10, 20, 30, 40, 50] {
                let ma = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
                models.push(ArmaSpec::new(vec![], ma));
            }
            models.into_iter().map(ComponentModel::Arma).collect()
        }
        Setting::Sv => {
            let sv = [
                (-10.0, 0.98, 0.2, None),
                (-5.0, -0.98, 0.2, Some(10.0)),
                (-10.0, 0.7, 0.7, None),
                (-5.0, -0.70, 0.7, Some(10.0)),
                (-9.0, 0.20, 0.01, None),
                (-9.0, -0.20, 0.01, Some(10.0)),
            ];
            let garch: [(&[f64], &[f64]); 6] = [
                (&[0.7], &[]),
                (&[0.2], &[0.2]),
                (&[0.1], &[0.8]),
                (&[0.20, 0.10, 0.05, 0.01], &[]),
                (&[0.05, 0.03, 0.01], &[0.5]),
                (&[0.20, 0.14, 0.12, 0.10, 0.05, 0.05, 0.04, 0.03, 0.02, 0.01], &[]),
            ];
            sv.iter()
                .map(|&(mu, phi, sigma, nu)| ComponentModel::Sv(SvSpec::new(mu, phi, sigma, nu).unwrap()))
                .chain(
                    garch
                        .iter()
                        .map(|(a, b)| ComponentModel::Garch(GarchSpec::new(a.to_vec(), b.to_vec()).unwrap())),
                )
                .collect()
        }
    }
}

/// Twelve independent latent components placed into the cells of a tensor
/// series in linear-layout order.
pub fn gen_latent_setting<R: Rng + ?Sized>(
    setting: Setting,
    dims: &[usize],
    t: usize,
    rng: &mut R,
) -> Result<TensorSeries> {
    let models = setting_models(setting, rng);
    let n: usize = dims.iter().product();
    if n != models.len() {
        return Err(BssError::ShapeMismatch(format!(
            "dims {dims:?} hold {n} cells but the {setting} setting has {} components",
            models.len()
        )));
    }
    let comps = models.iter().map(|m| m.generate(t, rng)).collect::<Result<Vec<_>>>()?;
    let frames = (0..t)
        .map(|k| Tensor::new(dims.to_vec(), comps.iter().map(|c| c[k]).collect()))
        .collect::<Result<Vec<_>>>()?;
    TensorSeries::new(frames)
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal moved into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Matrix {
    let g = Matrix::from_fn(p, p, |_, _| normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

fn condition_number(m: &Matrix) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

pub fn gaussian_mixing<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Matrix {
    loop {
        let a = Matrix::from_fn(p, p, |_, _| normal(rng));
        if condition_number(&a) <= MAX_CONDITION {
            return a;
        }
    }
}

/// One square mixing matrix per mode.
pub fn gen_mixing<R: Rng + ?Sized>(dims: &[usize], kind: MixingKind, rng: &mut R) -> Vec<Matrix> {
    dims.iter()
        .map(|&p| match kind {
            MixingKind::Gaussian => gaussian_mixing(p, rng),
            MixingKind::Haar => haar_orthogonal(p, rng),
        })
        .collect()
}

/// `X_t = Z_t ⊙_1 A_1 ⋯ ⊙_r A_r`.
pub fn mix(z: &TensorSeries, mixing: &[Matrix]) -> Result<TensorSeries> {
    for (m, (a, &p)) in mixing.iter().zip(z.dims()).enumerate() {
        if a.nrows() != p || a.ncols() != p {
            return Err(BssError::ShapeMismatch(format!(
                "mixing matrix {m} is {}x{}, expected {p}x{p}",
                a.nrows(),
                a.ncols()
            )));
        }
    }
    z.multi_mode_product(mixing)
}
