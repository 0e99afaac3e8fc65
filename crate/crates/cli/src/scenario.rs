//! Scenario files: JSON parsing and validation into a runnable sweep.

use nalgebra::DMatrix;
use serde::Deserialize;
use vlc_secrecy::intensity::check_alpha;
use vlc_secrecy::presets;
use vlc_secrecy::rates::{ChannelCase, LogBase, WiretapChannel};
use vlc_secrecy::sca::SCAConfig;
use vlc_secrecy::Error;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Direct,
    Fc,
    FcZf,
    Sc,
    ScZf,
    ScMlse,
    FcCase2,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Direct => "direct",
            Scheme::Fc => "fc",
            Scheme::FcZf => "fc-zf",
            Scheme::Sc => "sc",
            Scheme::ScZf => "sc-zf",
            Scheme::ScMlse => "sc-mlse",
            Scheme::FcCase2 => "fc-case2",
        }
    }

    /// Whether the scheme can be requested for a channel of this case. Zero-forcing
    /// and sub-connected requests on Case II are accepted and answered per row.
    pub fn admits(self, case: ChannelCase) -> bool {
        match case {
            ChannelCase::CaseI => self != Scheme::FcCase2,
            ChannelCase::CaseII => matches!(self, Scheme::Direct | Scheme::FcCase2 | Scheme::FcZf | Scheme::Sc | Scheme::ScZf),
            ChannelCase::Unsupported => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum LogBaseSpec {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
}

impl From<LogBaseSpec> for LogBase {
    fn from(s: LogBaseSpec) -> Self {
        match s {
            LogBaseSpec::Two => LogBase::Two,
            LogBaseSpec::E => LogBase::E,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaOverrides {
    pub tau: Option<f64>,
    pub gamma0: Option<f64>,
    pub gamma_decay: Option<f64>,
    pub tol_step: Option<f64>,
    pub tol_obj: Option<f64>,
    pub max_iters: Option<usize>,
    pub qp_tol: Option<f64>,
    pub qp_max_iters: Option<usize>,
}

impl ScaOverrides {
    pub fn apply(&self, mut c: SCAConfig) -> SCAConfig {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(tau, gamma0, gamma_decay, tol_step, tol_obj, max_iters, qp_tol, qp_max_iters);
        c
    }
}

/// The scenario file as written.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub preset: Option<String>,
    pub hb: Option<Vec<Vec<f64>>>,
    pub he: Option<Vec<Vec<f64>>>,
    pub snr_db: Option<Vec<f64>>,
    pub amplitude: Option<f64>,
    pub alpha: AlphaSpec,
    #[serde(default)]
    pub schemes: Option<Vec<Scheme>>,
    #[serde(default)]
    pub sca: ScaOverrides,
    pub log_base: Option<LogBaseSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub amplitude: f64,
}

impl SweepPoint {
    pub fn from_db(snr_db: f64) -> Self {
        Self {
            snr_db,
            amplitude: 10f64.powf(snr_db / 20.0),
        }
    }

    pub fn from_amplitude(amplitude: f64) -> Self {
        Self {
            snr_db: 20.0 * amplitude.log10(),
            amplitude,
        }
    }
}

/// 0, 5, ..., 70 dB.
pub fn default_sweep() -> Vec<f64> {
    (0..=14).map(|k| 5.0 * k as f64).collect()
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub channel: WiretapChannel,
    pub alpha: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub schemes: Vec<Scheme>,
    pub sca: SCAConfig,
    pub log_base: LogBase,
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(CliError::schema(field, "matrix must have at least one row and one column"));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(CliError::schema(field, format!("row {i} has {} entries, expected {cols}", r.len())));
        }
        if let Some(j) = r.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(CliError::schema(format!("{field}[{i}][{j}]"), format!("{} is not a nonnegative finite gain", r[j])));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| CliError::schema("scenario", e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, CliError> {
        let channel = match (&file.preset, &file.hb, &file.he) {
            (Some(name), None, None) => presets::by_name(name).ok_or_else(|| {
                CliError::schema("preset", format!("unknown preset {name:?}; expected one of {}", presets::NAMES.join(", ")))
            })?,
            (None, Some(hb), Some(he)) => {
                let hb = matrix("hb", hb)?;
                let he = matrix("he", he)?;
                if hb.ncols() != he.ncols() {
                    return Err(CliError::schema("he", format!("has {} columns but hb has {}", he.ncols(), hb.ncols())));
                }
                WiretapChannel::new(hb, he).map_err(|e| CliError::schema("hb", e.to_string()))?
            }
            (Some(_), _, _) => return Err(CliError::schema("preset", "give either a preset or hb and he, not both")),
            _ => return Err(CliError::schema("hb", "both hb and he are required when no preset is given")),
        };
        let nt = channel.nt();

        let alpha = match file.alpha {
            AlphaSpec::Scalar(a) => vec![a; nt],
            AlphaSpec::Vector(v) => v,
        };
        if alpha.len() != nt {
            return Err(CliError::schema("alpha", format!("has {} entries but the channel has {nt} LEDs", alpha.len())));
        }
        for (i, &a) in alpha.iter().enumerate() {
            check_alpha(i, a).map_err(|e| CliError::schema(format!("alpha[{i}]"), e.to_string()))?;
        }

        let points = match (file.snr_db, file.amplitude) {
            (Some(_), Some(_)) => return Err(CliError::schema("amplitude", "give either snr_db or amplitude, not both")),
            (Some(list), None) => {
                if let Some(i) = list.iter().position(|x| !x.is_finite()) {
                    return Err(CliError::schema(format!("snr_db[{i}]"), "must be finite"));
                }
                list.into_iter().map(SweepPoint::from_db).collect()
            }
            (None, Some(a)) => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(CliError::schema("amplitude", format!("{a} must be positive and finite")));
                }
                vec![SweepPoint::from_amplitude(a)]
            }
            (None, None) => default_sweep().into_iter().map(SweepPoint::from_db).collect(),
        };

        let sca = file.sca.apply(SCAConfig::default());
        sca.validate().map_err(|e| CliError::schema("sca", e.to_string()))?;

        Ok(Scenario {
            channel,
            alpha,
            points,
            schemes: file.schemes.unwrap_or_else(|| vec![Scheme::Direct]),
            sca,
            log_base: file.log_base.map(LogBase::from).unwrap_or_default(),
        })
    }

    /// Every requested scheme must suit the channel's case.
    pub fn check_case(&self, schemes: &[Scheme]) -> Result<(), CliError> {
        let case = self.channel.case;
        if case == ChannelCase::Unsupported {
            return Err(CliError::CaseMismatch(
                Error::UnsupportedCase {
                    nt: self.channel.nt(),
                    nb: self.channel.nb(),
                    ne: self.channel.ne(),
                }
                .to_string(),
            ));
        }
        match schemes.iter().find(|s| !s.admits(case)) {
            Some(s) => Err(CliError::CaseMismatch(format!("scheme {} is not available for a {} channel", s.name(), case.name()))),
            None => Ok(()),
        }
    }
}
