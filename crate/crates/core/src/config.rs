//! Experiment specifications for the benchmark harness.
//!
//! The file format is flat `key = value` text, one entry per line. Lists are
//! comma separated. Blank lines and anything after `#` are ignored. Keys:
//!
//! ```text
//! setting    = arma, sv             # latent model settings
//! mixing     = gaussian, haar       # mixing matrix kinds
//! dims       = 3,2,2                # frame shape, 12 cells
//! T          = 1000, 2000, 4000     # series lengths
//! methods    = all                  # or a list of method names
//! lags.sobi  = 1:12                 # a:b (inclusive) or a,b,c
//! lags.gfobi = 0:12
//! lags.gjade = 0:12
//! reps       = 100
//! seed       = 1
//! out        = bench-out            # output directory
//! ```
//!
//! Omitted keys take the defaults shown above except `setting = arma`,
//! `mixing = gaussian` and `seed = 0`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::bss::{Family, Method, MethodConfig};
use crate::error::{BssError, Result};
use crate::moments::LagSet;
use crate::simgen::{MixingKind, Setting};

/// Lag sets per method family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FamilyLags {
    pub sobi: LagSet,
    pub gfobi: LagSet,
    pub gjade: LagSet,
}

impl Default for FamilyLags {
    fn default() -> Self {
        FamilyLags {
            sobi: Family::Sobi.default_lags(),
            gfobi: Family::Gfobi.default_lags(),
            gjade: Family::Gjade.default_lags(),
        }
    }
}

impl FamilyLags {
    pub fn get(&self, family: Family) -> &LagSet {
        match family {
            Family::Sobi => &self.sobi,
            Family::Gfobi => &self.gfobi,
            Family::Gjade => &self.gjade,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub settings: Vec<Setting>,
    pub mixings: Vec<MixingKind>,
    pub dims: Vec<usize>,
    #[serde(rename = "T")]
    pub lengths: Vec<usize>,
    pub methods: Vec<Method>,
    pub lags: FamilyLags,
    pub reps: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            settings: vec![Setting::Arma],
            mixings: vec![MixingKind::Gaussian],
            dims: vec![3, 2, 2],
            lengths: vec![1000, 2000, 4000],
            methods: Method::ALL.to_vec(),
            lags: FamilyLags::default(),
            reps: 100,
            seed: 0,
            out: PathBuf::from("bench-out"),
        }
    }
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> BssError {
    BssError::InvalidParameter(format!("field `{field}`: {msg}"))
}

fn parse_list<T: FromStr>(field: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| field_error(field, format!("{s:?}: {e}"))))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(field_error(field, "empty list"));
    }
    Ok(items)
}

fn parse_scalar<T: FromStr>(field: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| field_error(field, format!("{value:?}: {e}")))
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = ExperimentSpec::default();
        let mut seen = std::collections::HashSet::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| BssError::Parse {
                line: k + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(BssError::Parse {
                    line: k + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            let value = value.trim();
            match key {
                "setting" => spec.settings = parse_list(key, value)?,
                "mixing" => spec.mixings = parse_list(key, value)?,
                "dims" => spec.dims = parse_list(key, value)?,
                "T" => spec.lengths = parse_list(key, value)?,
                "methods" => {
                    spec.methods = if value.eq_ignore_ascii_case("all") {
                        Method::ALL.to_vec()
                    } else {
                        parse_list(key, value)?
                    }
                }
                "lags.sobi" => spec.lags.sobi = parse_scalar(key, value)?,
                "lags.gfobi" => spec.lags.gfobi = parse_scalar(key, value)?,
                "lags.gjade" => spec.lags.gjade = parse_scalar(key, value)?,
                "reps" => spec.reps = parse_scalar(key, value)?,
                "seed" => spec.seed = parse_scalar(key, value)?,
                "out" => spec.out = PathBuf::from(value),
                other => {
                    return Err(BssError::Parse {
                        line: k + 1,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The configuration a method runs with under this spec.
    pub fn method_config(&self, method: Method) -> MethodConfig {
        if method.is_zero_lag() {
            method.default_config()
        } else {
            method
                .default_config()
                .with_lags(self.lags.get(method.family()).clone())
        }
    }

    /// Largest lag used by any selected method.
    pub fn max_lag(&self) -> usize {
        self.methods
            .iter()
            .map(|&m| self.method_config(m).lags.max())
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.settings.is_empty() {
            return Err(field_error("setting", "empty list"));
        }
        if self.mixings.is_empty() {
            return Err(field_error("mixing", "empty list"));
        }
        if self.methods.is_empty() {
            return Err(field_error("methods", "empty list"));
        }
        if self.dims.contains(&0) {
            return Err(field_error("dims", "zero-length mode"));
        }
        let cells: usize = self.dims.iter().product();
        if cells != 12 {
            return Err(field_error(
                "dims",
                format!(
                    "{:?} has {cells} cells, the simulation settings have 12 components",
                    self.dims
                ),
            ));
        }
        if self.reps < 1 {
            return Err(field_error("reps", "must be at least 1"));
        }
        let min_t = 2 * (self.max_lag() + 1);
        if let Some(&t) = self.lengths.iter().find(|&&t| t < min_t) {
            return Err(field_error("T", format!("{t} is below 2·(max lag + 1) = {min_t}")));
        }
        if self.lengths.is_empty() {
            return Err(field_error("T", "empty list"));
        }
        Ok(())
    }
}
