//! Run configuration: INI file, then command-line flags, then defaults.
//!
//! The general section holds the shared keys (`payoff`, `s0`, `model`,
//! `paths`, `steps`, `horizon`, `seed`, `threads`, `delta_override`);
//! `[attainment]`, `[probe]`, `[proximity]` and `[stopping]` hold the
//! per-experiment knobs. [`RunConfig::to_ini`] writes the resolved values
//! back in the same format, so a run can be replayed from its echo.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use super::CliError;
use crate::duality::DEFAULT_GAINS;
use crate::models::{ModelKind, ModelSpec};

/// Either every model family with default parameters, or one model.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelChoice {
    All,
    One(ModelKind),
}

impl ModelChoice {
    /// `all`, a model name, or `name:key=value,key=value`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let text = text.trim();
        if text == "all" {
            return Ok(ModelChoice::All);
        }
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut params = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("model parameter '{item}' is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("model parameter {k} = '{v}' is not a number")))?;
            params.insert(k.trim().to_string(), v);
        }
        Ok(ModelChoice::One(ModelKind::from_params(name.trim(), &params)?))
    }

    pub fn kinds(&self) -> Vec<ModelKind> {
        match self {
            ModelChoice::All => ModelKind::NAMES
                .iter()
                .map(|n| ModelKind::default_for(n).expect("known model"))
                .collect(),
            ModelChoice::One(k) => vec![*k],
        }
    }
}

impl std::fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelChoice::All => f.write_str("all"),
            ModelChoice::One(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttainmentConfig {
    pub sigma_min: f64,
    pub sigma_max: Vec<f64>,
    pub nu0: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub eps: f64,
    pub gains: Vec<f64>,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProximityConfig {
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoppingConfig {
    pub half_width: usize,
    pub log_step: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Allowed `|bellman − ĝ(s0)|`, relative to `1 + ĝ(s0)`.
    pub agreement: f64,
}

/// Fully resolved and validated settings of one CLI run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub payoff: Option<String>,
    pub s0: f64,
    pub model: ModelChoice,
    pub n_paths: usize,
    pub n_steps: usize,
    pub horizon: f64,
    pub seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
    /// Replaces the computed hedge ratio in the domination and upper checks.
    pub delta_override: Option<f64>,
    pub attainment: AttainmentConfig,
    pub probe: ProbeConfig,
    pub proximity: ProximityConfig,
    pub stopping: StoppingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            payoff: None,
            s0: 100.0,
            model: ModelChoice::All,
            n_paths: 10_000,
            n_steps: 50,
            horizon: 1.0,
            seed: 42,
            threads: 0,
            out: None,
            delta_override: None,
            attainment: AttainmentConfig {
                sigma_min: 0.01,
                sigma_max: vec![2.0, 4.0, 8.0],
                nu0: 0.2,
                steps: 2000,
            },
            probe: ProbeConfig {
                eps: 0.1,
                gains: DEFAULT_GAINS.to_vec(),
                steps: 200,
            },
            proximity: ProximityConfig { delta: 0.05 },
            stopping: StoppingConfig {
                half_width: 600,
                log_step: 0.01,
                tol: 1e-10,
                max_iter: 50_000_000,
                agreement: 0.01,
            },
        }
    }
}

/// Values given on the command line; `None` defers to the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub payoff: Option<String>,
    pub s0: Option<f64>,
    pub model: Option<String>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub delta_override: Option<f64>,
}

fn parse_value<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<T, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("[{section}] {key} = '{raw}' is not valid")))
}

fn parse_list(section: &str, key: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',').map(|v| parse_value(section, key, v)).collect()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Reads `path` (if any), applies `flags` on top and validates.
    pub fn resolve(path: Option<&Path>, flags: Overrides) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = path {
            let ini = Ini::load_from_file_noescape(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            cfg.apply_ini(&ini)?;
        }
        cfg.apply_flags(flags)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_ini(&mut self, ini: &Ini) -> Result<(), CliError> {
        for (section, props) in ini.iter() {
            let name = section.unwrap_or("general");
            for (key, raw) in props.iter() {
                match (name, key) {
                    ("general", "payoff") => self.payoff = Some(raw.trim().to_string()),
                    ("general", "s0") => self.s0 = parse_value(name, key, raw)?,
                    ("general", "model") => self.model = ModelChoice::parse(raw)?,
                    ("general", "paths") => self.n_paths = parse_value(name, key, raw)?,
                    ("general", "steps") => self.n_steps = parse_value(name, key, raw)?,
                    ("general", "horizon") => self.horizon = parse_value(name, key, raw)?,
                    ("general", "seed") => self.seed = parse_value(name, key, raw)?,
                    ("general", "threads") => self.threads = parse_value(name, key, raw)?,
                    ("general", "out") => self.out = Some(PathBuf::from(raw.trim())),
                    ("general", "delta_override") => self.delta_override = Some(parse_value(name, key, raw)?),
                    ("attainment", "sigma_min") => self.attainment.sigma_min = parse_value(name, key, raw)?,
                    ("attainment", "sigma_max") => self.attainment.sigma_max = parse_list(name, key, raw)?,
                    ("attainment", "nu0") => self.attainment.nu0 = parse_value(name, key, raw)?,
                    ("attainment", "steps") => self.attainment.steps = parse_value(name, key, raw)?,
                    ("probe", "eps") => self.probe.eps = parse_value(name, key, raw)?,
                    ("probe", "gains") => self.probe.gains = parse_list(name, key, raw)?,
                    ("probe", "steps") => self.probe.steps = parse_value(name, key, raw)?,
                    ("proximity", "delta") => self.proximity.delta = parse_value(name, key, raw)?,
                    ("stopping", "half_width") => self.stopping.half_width = parse_value(name, key, raw)?,
                    ("stopping", "log_step") => self.stopping.log_step = parse_value(name, key, raw)?,
                    ("stopping", "tol") => self.stopping.tol = parse_value(name, key, raw)?,
                    ("stopping", "max_iter") => self.stopping.max_iter = parse_value(name, key, raw)?,
                    ("stopping", "agreement") => self.stopping.agreement = parse_value(name, key, raw)?,
                    _ => return Err(CliError::Config(format!("unknown config key [{name}] {key}"))),
                }
            }
        }
        Ok(())
    }

    fn apply_flags(&mut self, f: Overrides) -> Result<(), CliError> {
        if let Some(p) = f.payoff {
            self.payoff = Some(p);
        }
        if let Some(m) = f.model {
            self.model = ModelChoice::parse(&m)?;
        }
        macro_rules! take {
            ($($src:ident => $dst:ident),*) => {$( if let Some(v) = f.$src { self.$dst = v; } )*};
        }
        take!(s0 => s0, paths => n_paths, steps => n_steps, horizon => horizon, seed => seed, threads => threads);
        if f.out.is_some() {
            self.out = f.out;
        }
        if f.delta_override.is_some() {
            self.delta_override = f.delta_override;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |what: &str, v: f64| Err(CliError::Config(format!("{what} = {v} is out of range")));
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return bad("s0", self.s0);
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon", self.horizon);
        }
        if self.n_paths == 0 {
            return bad("paths", 0.0);
        }
        if self.n_steps == 0 {
            return bad("steps", 0.0);
        }
        if let Some(d) = self.delta_override {
            if !d.is_finite() {
                return bad("delta_override", d);
            }
        }
        for kind in self.model.kinds() {
            ModelSpec::new(kind, self.s0, self.horizon, self.n_steps).validate()?;
        }
        let a = &self.attainment;
        if !(a.sigma_min > 0.0)
            || a.sigma_max.is_empty()
            || a.sigma_max.iter().any(|&s| !(s > a.sigma_min && s.is_finite()))
        {
            return Err(CliError::Config(
                "[attainment] needs 0 < sigma_min < every sigma_max".into(),
            ));
        }
        if !(a.nu0 >= a.sigma_min && a.sigma_max.iter().all(|&s| a.nu0 <= s)) {
            return bad("[attainment] nu0", a.nu0);
        }
        if a.steps == 0 {
            return bad("[attainment] steps", 0.0);
        }
        if !(self.probe.eps > 0.0)
            || self.probe.gains.iter().any(|g| !(*g >= 0.0 && g.is_finite()))
            || self.probe.steps == 0
        {
            return Err(CliError::Config(
                "[probe] needs eps > 0, gains ≥ 0 and steps > 0".into(),
            ));
        }
        if !(self.proximity.delta > 0.0 && self.proximity.delta.is_finite()) {
            return bad("[proximity] delta", self.proximity.delta);
        }
        let s = &self.stopping;
        if s.half_width == 0 || !(s.log_step > 0.0) || !(s.tol > 0.0) || s.max_iter == 0 || !(s.agreement > 0.0) {
            return Err(CliError::Config(
                "[stopping] needs positive half_width, log_step, tol, max_iter and agreement".into(),
            ));
        }
        Ok(())
    }

    /// INI text of the resolved configuration.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        if let Some(p) = &self.payoff {
            let _ = writeln!(s, "payoff = {p}");
        }
        let _ = writeln!(s, "s0 = {}", self.s0);
        let _ = writeln!(s, "model = {}", self.model);
        let _ = writeln!(s, "paths = {}", self.n_paths);
        let _ = writeln!(s, "steps = {}", self.n_steps);
        let _ = writeln!(s, "horizon = {}", self.horizon);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "threads = {}", self.threads);
        if let Some(d) = self.delta_override {
            let _ = writeln!(s, "delta_override = {d}");
        }
        let a = &self.attainment;
        let _ = write!(
            s,
            "\n[attainment]\nsigma_min = {}\nsigma_max = {}\nnu0 = {}\nsteps = {}\n",
            a.sigma_min,
            join(&a.sigma_max),
            a.nu0,
            a.steps
        );
        let p = &self.probe;
        let _ = write!(
            s,
            "\n[probe]\neps = {}\ngains = {}\nsteps = {}\n",
            p.eps,
            join(&p.gains),
            p.steps
        );
        let _ = write!(s, "\n[proximity]\ndelta = {}\n", self.proximity.delta);
        let t = &self.stopping;
        let _ = write!(
            s,
            "\n[stopping]\nhalf_width = {}\nlog_step = {}\ntol = {:e}\nmax_iter = {}\nagreement = {}\n",
            t.half_width, t.log_step, t.tol, t.max_iter, t.agreement
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_choice_parsing() {
        assert_eq!(ModelChoice::parse("all").unwrap(), ModelChoice::All);
        let m = ModelChoice::parse("heston:xi=0, kappa=2").unwrap();
        assert_eq!(
            m,
            ModelChoice::One(ModelKind::Heston {
                v0: 0.04,
                kappa: 2.0,
                theta: 0.04,
                xi: 0.0
            })
        );
        assert!(ModelChoice::parse("heston:xi").is_err());
        assert!(ModelChoice::parse("sabr").is_err());
        assert_eq!(ModelChoice::parse(&m.to_string()).unwrap(), m);
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ini");
        std::fs::write(&path, "payoff = pos(x-100)\ns0 = 90\nseed = 1\n[probe]\neps = 0.2\n").unwrap();
        let flags = Overrides {
            s0: Some(110.0),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(Some(&path), flags).unwrap();
        assert_eq!(cfg.s0, 110.0);
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.probe.eps, 0.2);
        assert_eq!(cfg.payoff.as_deref(), Some("pos(x-100)"));
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig {
            payoff: Some("pos(x-90)-2*pos(x-100)+pos(x-110)".into()),
            model: ModelChoice::parse("scott:beta=0.3").unwrap(),
            delta_override: Some(0.0),
            ..RunConfig::default()
        };
        cfg.attainment.sigma_max = vec![3.0, 6.0];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("echo.ini");
        std::fs::write(&path, cfg.to_ini()).unwrap();
        assert_eq!(RunConfig::resolve(Some(&path), Overrides::default()).unwrap(), cfg);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ini");
        for text in [
            "s0 = -1",
            "paths = 0",
            "[probe]\neps = 0",
            "colour = red",
            "steps = many",
        ] {
            std::fs::write(&path, text).unwrap();
            assert!(RunConfig::resolve(Some(&path), Overrides::default()).is_err(), "{text}");
        }
    }
}
