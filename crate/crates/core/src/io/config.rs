//! `key = value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{NsacError, Result};
use crate::state::{CosineAmplitudes, Grid, Params, Preset};

/// Initial-condition family selected by the `preset` key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Steady,
    Cosine,
    Tabulated,
}

impl FromStr for PresetKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "steady" => Ok(PresetKind::Steady),
            "cosine" | "cosine-perturbation" => Ok(PresetKind::Cosine),
            "tabulated" | "tabulated-file" => Ok(PresetKind::Tabulated),
            other => Err(format!(
                "unknown preset '{other}' (expected steady, cosine-perturbation or tabulated-file)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_cells: usize,
    /// Physical exponents, numerical safety factors and `t_end`.
    pub params: Params,
    pub preset: PresetKind,
    pub amplitudes: CosineAmplitudes,
    pub ic_file: Option<PathBuf>,
    pub normalize: bool,
    /// Every `series_stride`-th snapshot becomes a row of the time series.
    pub series_stride: usize,
    /// Spacing of the snapshot lattice; `None` picks roughly one `dx`.
    pub snapshot_dt: Option<f64>,
    /// Times at which the reconstructed volume is compared with the simulation.
    /// Empty means `{t_end/2, t_end}`.
    pub repr_check_times: Vec<f64>,
    /// Where [`crate::io::run_single`] writes; `None` keeps everything in memory.
    pub output_dir: Option<PathBuf>,
    pub sweep_alpha: Vec<f64>,
    pub sweep_beta: Vec<f64>,
    pub sweep_n_cells: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_cells: 128,
            params: Params::default(),
            preset: PresetKind::Cosine,
            amplitudes: CosineAmplitudes::default(),
            ic_file: None,
            normalize: true,
            series_stride: 1,
            snapshot_dt: None,
            repr_check_times: Vec::new(),
            output_dir: None,
            sweep_alpha: Vec::new(),
            sweep_beta: Vec::new(),
            sweep_n_cells: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_cells)
    }

    pub fn preset(&self) -> Result<Preset> {
        match self.preset {
            PresetKind::Steady => Ok(Preset::Steady),
            PresetKind::Cosine => Ok(Preset::Cosine(self.amplitudes)),
            PresetKind::Tabulated => self
                .ic_file
                .clone()
                .map(Preset::Tabulated)
                .ok_or_else(|| NsacError::InvalidParam("preset tabulated-file needs ic_file".into())),
        }
    }

    /// Comparison times, defaulting to the midpoint and the end of the run.
    pub fn check_times(&self) -> Vec<f64> {
        if self.repr_check_times.is_empty() {
            vec![0.5 * self.params.t_end, self.params.t_end]
        } else {
            self.repr_check_times.clone()
        }
    }

    /// Checks everything that does not depend on a particular config line.
    pub fn validate(&self) -> Result<()> {
        Grid::new(self.n_cells)?;
        self.params.validate()?;
        if self.series_stride == 0 {
            return Err(NsacError::InvalidParam("series_stride must be at least 1".into()));
        }
        if let Some(dt) = self.snapshot_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(NsacError::InvalidParam(format!("snapshot_dt must be > 0, got {dt}")));
            }
        }
        if self.preset == PresetKind::Tabulated && self.ic_file.is_none() {
            return Err(NsacError::InvalidParam("preset tabulated-file needs ic_file".into()));
        }
        for &t in &self.repr_check_times {
            if !(0.0..=self.params.t_end).contains(&t) {
                return Err(NsacError::InvalidParam(format!(
                    "repr check time {t} outside [0, {}]",
                    self.params.t_end
                )));
            }
        }
        Ok(())
    }
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| NsacError::io(path, e))?;
    parse_config(&text)
}

/// Parses `key = value` lines (`#` starts a comment) on top of the defaults.
/// Every error names the offending line.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<(&str, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| NsacError::Config { line, message };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if let Some((_, first)) = seen.iter().find(|(k, _)| *k == key) {
            return Err(err(format!("duplicate key '{key}' (first set on line {first})")));
        }
        apply(&mut cfg, key, value).map_err(err)?;
        seen.push((key, line));
    }

    let line_of = |key: &str| seen.iter().find(|(k, _)| *k == key).map_or(0, |(_, l)| *l);
    if cfg.preset == PresetKind::Tabulated && cfg.ic_file.is_none() {
        return Err(NsacError::Config {
            line: line_of("preset"),
            message: "preset tabulated-file needs ic_file".into(),
        });
    }
    for &t in &cfg.repr_check_times {
        if t > cfg.params.t_end {
            return Err(NsacError::Config {
                line: line_of("repr_check_times"),
                message: format!("check time {t} exceeds t_end = {}", cfg.params.t_end),
            });
        }
    }
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    let p = &mut cfg.params;
    let a = &mut cfg.amplitudes;
    match key {
        "n_cells" => {
            let n: usize = parse(key, value)?;
            Grid::new(n).map_err(|e| e.to_string())?;
            cfg.n_cells = n;
        }
        "alpha" => p.alpha = checked(key, value, |x| x >= 0.0, "must be >= 0")?,
        "beta" => p.beta = checked(key, value, |x| x > 0.0, "must be > 0")?,
        "t_end" => p.t_end = checked(key, value, |x| x > 0.0, "must be > 0")?,
        "cfl_safety" => {
            p.cfl_safety = checked(key, value, |x| x > 0.0 && x <= 1.0, "must lie in (0, 1]")?
        }
        "preset" => cfg.preset = value.parse()?,
        "amp_v" => a.amp_v = checked(key, value, |_| true, "")?,
        "amp_u" => a.amp_u = checked(key, value, |_| true, "")?,
        "amp_chi" => a.amp_chi = checked(key, value, |_| true, "")?,
        "chi_base" => a.chi_base = checked(key, value, |x| x > 0.0, "must be > 0")?,
        "amp_theta" => a.amp_theta = checked(key, value, |_| true, "")?,
        "theta_base" => a.theta_base = checked(key, value, |x| x > 0.0, "must be > 0")?,
        "normalize" => cfg.normalize = parse_bool(value).ok_or(format!("normalize: '{value}' is not a boolean"))?,
        "output_dir" => cfg.output_dir = Some(PathBuf::from(value)),
        "ic_file" => cfg.ic_file = Some(PathBuf::from(value)),
        "series_stride" => {
            let s: usize = parse(key, value)?;
            if s == 0 {
                return Err("series_stride must be >= 1".into());
            }
            cfg.series_stride = s;
        }
        "snapshot_dt" => cfg.snapshot_dt = Some(checked(key, value, |x| x > 0.0, "must be > 0")?),
        "repr_check_times" => {
            cfg.repr_check_times = list(key, value)?;
            if cfg.repr_check_times.iter().any(|&t| t < 0.0) {
                return Err("repr_check_times must be >= 0".into());
            }
        }
        "sweep_alpha" => {
            cfg.sweep_alpha = list(key, value)?;
            if cfg.sweep_alpha.iter().any(|&x| x < 0.0) {
                return Err("sweep_alpha entries must be >= 0".into());
            }
        }
        "sweep_beta" => {
            cfg.sweep_beta = list(key, value)?;
            if cfg.sweep_beta.iter().any(|&x| x <= 0.0) {
                return Err("sweep_beta entries must be > 0".into());
            }
        }
        "sweep_n_cells" => {
            cfg.sweep_n_cells = list(key, value)?;
            for &n in &cfg.sweep_n_cells {
                Grid::new(n).map_err(|e| e.to_string())?;
            }
        }
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("{key}: cannot parse '{value}'"))
}

fn checked(
    key: &str,
    value: &str,
    ok: impl Fn(f64) -> bool,
    requirement: &str,
) -> std::result::Result<f64, String> {
    let x: f64 = parse(key, value)?;
    if !x.is_finite() {
        return Err(format!("{key} must be finite, got {value}"));
    }
    if !ok(x) {
        return Err(format!("{key} {requirement}, got {value}"));
    }
    Ok(x)
}

fn list<T: FromStr>(key: &str, value: &str) -> std::result::Result<Vec<T>, String> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err(format!("{key}: empty list"));
    }
    Ok(items)
}

fn parse_bool(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}
