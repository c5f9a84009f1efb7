//! Flat `key = value` experiment configs: `#` comments, comma-separated
//! lists, one key per line. Every key has a default except `kind`, the
//! figure number, and the λ grid of curve/theory runs; defaults are recorded
//! in the run manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use netjam_core::{Approach, GrowthConfig, HubSelection};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Generate,
    Profile,
    Timeseries,
    Betac,
    Curve,
    Theory,
    Figure,
}

impl Kind {
    fn from_str(s: &str) -> Option<Kind> {
        Some(match s {
            "generate" => Kind::Generate,
            "profile" => Kind::Profile,
            "timeseries" => Kind::Timeseries,
            "betac" => Kind::Betac,
            "curve" => Kind::Curve,
            "theory" => Kind::Theory,
            "figure" => Kind::Figure,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Generate => "generate",
            Kind::Profile => "profile",
            Kind::Timeseries => "timeseries",
            Kind::Betac => "betac",
            Kind::Curve => "curve",
            Kind::Theory => "theory",
            Kind::Figure => "figure",
        }
    }
}

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub msg: String,
}

impl ConfigError {
    fn at(line: usize, key: impl Into<String>, msg: impl Into<String>) -> ConfigError {
        ConfigError {
            line: Some(line),
            key: Some(key.into()),
            msg: msg.into(),
        }
    }

    fn key(key: impl Into<String>, msg: impl Into<String>) -> ConfigError {
        ConfigError {
            line: None,
            key: Some(key.into()),
            msg: msg.into(),
        }
    }

    fn plain(msg: impl Into<String>) -> ConfigError {
        ConfigError {
            line: None,
            key: None,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(line), Some(key)) => write!(f, "line {line}, key `{key}`: {}", self.msg),
            (None, Some(key)) => write!(f, "key `{key}`: {}", self.msg),
            _ => write!(f, "{}", self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

const ALL_KEYS: &[&str] = &[
    "kind",
    "figure",
    "N",
    "m",
    "p",
    "lambda",
    "lambdas",
    "calibrate_lambda",
    "beta",
    "approach",
    "f",
    "k_thr",
    "t_max",
    "realizations",
    "snapshots",
    "fit_window",
    "beta_lo",
    "beta_hi",
    "tol",
    "epsilon",
    "out_dir",
    "master_seed",
    "workers",
];

/// Keys meaningful for every kind.
const UNIVERSAL_KEYS: &[&str] = &[
    "kind",
    "N",
    "m",
    "p",
    "t_max",
    "realizations",
    "out_dir",
    "master_seed",
    "workers",
];

fn keys_for(kind: Kind) -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = UNIVERSAL_KEYS.to_vec();
    let extra: &[&str] = match kind {
        Kind::Generate => &[],
        Kind::Profile => &["lambda", "beta", "approach", "f", "k_thr"],
        Kind::Timeseries => &["lambda", "beta", "approach", "f", "k_thr", "snapshots"],
        Kind::Betac => &[
            "lambda", "approach", "f", "k_thr", "fit_window", "beta_lo", "beta_hi", "tol",
            "epsilon",
        ],
        Kind::Curve => &[
            "lambdas", "approach", "f", "k_thr", "fit_window", "beta_lo", "beta_hi", "tol",
            "epsilon",
        ],
        Kind::Theory => &[
            "lambdas",
            "calibrate_lambda",
            "approach",
            "f",
            "k_thr",
            "fit_window",
            "beta_lo",
            "beta_hi",
            "tol",
            "epsilon",
        ],
        Kind::Figure => &[
            "figure", "lambda", "f", "fit_window", "beta_lo", "beta_hi", "tol", "epsilon",
        ],
    };
    keys.extend_from_slice(extra);
    keys
}

/// A parsed, validated experiment. `set` records which keys the user wrote,
/// so the manifest can mark everything else as a default.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub figure: u32,
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub lambda: f64,
    pub lambdas: Vec<f64>,
    pub calibrate_lambda: f64,
    pub beta: f64,
    pub approach: Approach,
    pub hubs: HubSelection,
    pub t_max: u32,
    pub realizations: usize,
    pub snapshots: Vec<u32>,
    pub fit_window: (u32, u32),
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub tol: f64,
    pub epsilon: f64,
    pub out_dir: String,
    pub master_seed: u64,
    /// 0 = all available CPUs.
    pub workers: usize,
    set: BTreeSet<&'static str>,
}

fn canonical(key: &str) -> Option<&'static str> {
    ALL_KEYS.iter().copied().find(|&k| k == key)
}

struct RawConfig {
    values: BTreeMap<&'static str, (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut values: BTreeMap<&'static str, (usize, String)> = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line_no),
                    key: None,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            let value = value.trim().to_string();
            let Some(key) = canonical(key) else {
                return Err(ConfigError::at(line_no, key, "unknown key"));
            };
            if let Some((first, _)) = values.get(key) {
                return Err(ConfigError::at(
                    line_no,
                    key,
                    format!("duplicate (first set on line {first})"),
                ));
            }
            values.insert(key, (line_no, value));
        }
        Ok(RawConfig { values })
    }

    fn take<T>(
        &self,
        key: &'static str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, value)) => parse(value)
                .map(Some)
                .map_err(|msg| ConfigError::at(*line, key, msg)),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse::<usize>()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn parse_u32(s: &str) -> Result<u32, String> {
    s.parse::<u32>()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.parse::<u64>()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|part| item(part.trim())).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let raw = RawConfig::parse(text)?;
        let set: BTreeSet<&'static str> = raw.values.keys().copied().collect();

        let kind = raw
            .take("kind", |s| {
                Kind::from_str(s).ok_or_else(|| {
                    format!(
                        "`{s}` is not one of generate, profile, timeseries, betac, curve, \
                         theory, figure"
                    )
                })
            })?
            .ok_or_else(|| ConfigError::key("kind", "required key is missing"))?;

        for key in &set {
            if !keys_for(kind).contains(key) {
                let (line, _) = raw.values[key];
                return Err(ConfigError::at(
                    line,
                    *key,
                    format!("not used by kind = {}", kind.name()),
                ));
            }
        }

        let figure = raw.take("figure", |s| parse_u32(s))?.unwrap_or(0);
        let t_max = raw.take("t_max", |s| parse_u32(s))?.unwrap_or(match kind {
            Kind::Profile => 500,
            Kind::Figure if figure == 1 || figure == 2 => 500,
            _ => 1000,
        });
        let realizations = raw
            .take("realizations", |s| parse_usize(s))?
            .unwrap_or(match kind {
                Kind::Generate | Kind::Timeseries => 1,
                Kind::Profile => 100,
                Kind::Figure if figure == 1 || figure == 2 => 100,
                _ => 20,
            });
        let fit_window = raw
            .take("fit_window", |s| {
                let parts = parse_list(s, parse_u32)?;
                if parts.len() != 2 {
                    return Err(format!("expected two values `t1,t2`, got {}", parts.len()));
                }
                Ok((parts[0], parts[1]))
            })?
            .unwrap_or(((t_max / 5).max(1), t_max));

        let f = raw.take("f", |s| parse_f64(s))?;
        let k_thr = raw.take("k_thr", |s| parse_usize(s))?;
        let hubs = match (f, k_thr) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::key("k_thr", "set either f or k_thr, not both"))
            }
            (None, Some(k)) => HubSelection::DegreeThreshold(k),
            (Some(frac), None) => HubSelection::TopFraction(frac),
            (None, None) => HubSelection::TopFraction(0.03),
        };

        let config = ExperimentConfig {
            kind,
            figure,
            n: raw.take("N", |s| parse_usize(s))?.unwrap_or(1000),
            m: raw.take("m", |s| parse_usize(s))?.unwrap_or(3),
            p: raw.take("p", |s| parse_f64(s))?.unwrap_or(0.0),
            lambda: raw.take("lambda", |s| parse_f64(s))?.unwrap_or(0.01),
            lambdas: raw
                .take("lambdas", |s| parse_list(s, parse_f64))?
                .unwrap_or_default(),
            calibrate_lambda: raw
                .take("calibrate_lambda", |s| parse_f64(s))?
                .unwrap_or(0.01),
            beta: raw.take("beta", |s| parse_f64(s))?.unwrap_or(0.0),
            approach: raw
                .take("approach", |s| match s {
                    "normal" => Ok(Approach::Normal),
                    "efficient" => Ok(Approach::Efficient),
                    _ => Err(format!("`{s}` is not `normal` or `efficient`")),
                })?
                .unwrap_or(Approach::Normal),
            hubs,
            t_max,
            realizations,
            snapshots: raw
                .take("snapshots", |s| parse_list(s, parse_u32))?
                .unwrap_or_default(),
            fit_window,
            beta_lo: raw.take("beta_lo", |s| parse_f64(s))?.unwrap_or(0.0),
            beta_hi: raw.take("beta_hi", |s| parse_f64(s))?.unwrap_or(0.2),
            tol: raw.take("tol", |s| parse_f64(s))?.unwrap_or(0.002),
            epsilon: raw.take("epsilon", |s| parse_f64(s))?.unwrap_or(1e-4),
            out_dir: raw
                .take("out_dir", |s| Ok(s.to_string()))?
                .unwrap_or_else(|| "out".to_string()),
            master_seed: raw.take("master_seed", |s| parse_u64(s))?.unwrap_or(42),
            workers: raw.take("workers", |s| parse_usize(s))?.unwrap_or(0),
            set,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let growth = GrowthConfig {
            n: self.n,
            m: self.m,
            p: self.p,
            seed: 0,
        };
        growth
            .validate()
            .map_err(|e| ConfigError::plain(e.to_string()))?;
        if self.n < 2 {
            return Err(ConfigError::key("N", "need at least 2 nodes for traffic"));
        }
        let check_lambda = |key: &'static str, v: f64| {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::key(key, format!("{v} outside [0, 1]")));
            }
            Ok(())
        };
        check_lambda("lambda", self.lambda)?;
        for &l in &self.lambdas {
            check_lambda("lambdas", l)?;
        }
        if !(0.0..=10.0).contains(&self.beta) {
            return Err(ConfigError::key("beta", format!("{} outside [0, 10]", self.beta)));
        }
        if let HubSelection::TopFraction(f) = self.hubs {
            if !(f > 0.0 && f <= 1.0) {
                return Err(ConfigError::key("f", format!("{f} outside (0, 1]")));
            }
        }
        if let HubSelection::DegreeThreshold(k) = self.hubs {
            if k < 1 {
                return Err(ConfigError::key("k_thr", "must be ≥ 1"));
            }
        }
        if self.t_max < 1 {
            return Err(ConfigError::key("t_max", "must be ≥ 1"));
        }
        if self.realizations < 1 {
            return Err(ConfigError::key("realizations", "must be ≥ 1"));
        }
        for &t in &self.snapshots {
            if t < 1 || t > self.t_max {
                return Err(ConfigError::key(
                    "snapshots",
                    format!("snapshot time {t} outside [1, t_max = {}]", self.t_max),
                ));
            }
        }
        let uses_window = match self.kind {
            // only the phase-diagram figure runs β_c searches
            Kind::Figure => self.figure == 4,
            kind => keys_for(kind).contains(&"fit_window"),
        };
        if uses_window {
            let (t1, t2) = self.fit_window;
            if t1 < 1 || t1 >= t2 || t2 > self.t_max {
                return Err(ConfigError::key(
                    "fit_window",
                    format!("[{t1}, {t2}] invalid for t_max = {}", self.t_max),
                ));
            }
            if t2 - t1 < 50 {
                return Err(ConfigError::key(
                    "fit_window",
                    format!("[{t1}, {t2}] spans under 50 steps; the slope fit needs more"),
                ));
            }
        }
        if !(0.0..=10.0).contains(&self.beta_lo) || !(0.0..=10.0).contains(&self.beta_hi) {
            return Err(ConfigError::key("beta_lo", "bracket outside [0, 10]"));
        }
        if self.beta_lo >= self.beta_hi {
            return Err(ConfigError::key(
                "beta_hi",
                format!("bracket [{}, {}] is empty", self.beta_lo, self.beta_hi),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(ConfigError::key("tol", "must be > 0"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(ConfigError::key("epsilon", "must be ≥ 0"));
        }
        match self.kind {
            Kind::Curve | Kind::Theory => {
                if self.lambdas.is_empty() {
                    return Err(ConfigError::key(
                        "lambdas",
                        format!("kind = {} needs a non-empty λ list", self.kind.name()),
                    ));
                }
            }
            Kind::Figure => {
                if !self.set.contains("figure") {
                    return Err(ConfigError::key("figure", "required for kind = figure"));
                }
                if !(1..=5).contains(&self.figure) {
                    return Err(ConfigError::key(
                        "figure",
                        format!("{} outside 1..=5", self.figure),
                    ));
                }
            }
            _ => {}
        }
        if self.kind == Kind::Theory && !self.lambdas.contains(&self.calibrate_lambda) {
            return Err(ConfigError::key(
                "calibrate_lambda",
                format!("{} is not one of lambdas", self.calibrate_lambda),
            ));
        }
        Ok(())
    }

    pub fn growth_config(&self, seed: u64) -> GrowthConfig {
        GrowthConfig {
            n: self.n,
            m: self.m,
            p: self.p,
            seed,
        }
    }

    /// Mark a key as explicitly set (CLI flag overrides).
    pub fn override_out_dir(&mut self, dir: String) {
        self.out_dir = dir;
        self.set.insert("out_dir");
    }

    pub fn override_master_seed(&mut self, seed: u64) {
        self.master_seed = seed;
        self.set.insert("master_seed");
    }

    pub fn override_workers(&mut self, workers: usize) {
        self.workers = workers;
        self.set.insert("workers");
    }

    /// Resolved configuration for the manifest, defaults marked.
    pub fn manifest_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        let mut push = |key: &'static str, value: String| {
            if self.set.contains(key) {
                lines.push(format!("{key} = {value}"));
            } else {
                lines.push(format!("{key} = {value}  # default"));
            }
        };
        push("kind", self.kind.name().to_string());
        if self.kind == Kind::Figure {
            push("figure", self.figure.to_string());
        }
        push("N", self.n.to_string());
        push("m", self.m.to_string());
        push("p", self.p.to_string());
        let keys = keys_for(self.kind);
        if keys.contains(&"lambda") {
            push("lambda", self.lambda.to_string());
        }
        if keys.contains(&"lambdas") {
            let list: Vec<String> = self.lambdas.iter().map(f64::to_string).collect();
            push("lambdas", list.join(","));
        }
        if keys.contains(&"calibrate_lambda") {
            push("calibrate_lambda", self.calibrate_lambda.to_string());
        }
        if keys.contains(&"beta") {
            push("beta", self.beta.to_string());
        }
        if keys.contains(&"approach") {
            push(
                "approach",
                match self.approach {
                    Approach::Normal => "normal".to_string(),
                    Approach::Efficient => "efficient".to_string(),
                },
            );
        }
        if keys.contains(&"f") {
            match self.hubs {
                HubSelection::TopFraction(f) => push("f", f.to_string()),
                HubSelection::DegreeThreshold(k) => push("k_thr", k.to_string()),
            }
        }
        push("t_max", self.t_max.to_string());
        push("realizations", self.realizations.to_string());
        if keys.contains(&"snapshots") {
            let list: Vec<String> = self.snapshots.iter().map(u32::to_string).collect();
            push("snapshots", list.join(","));
        }
        if keys.contains(&"fit_window") {
            push("fit_window", format!("{},{}", self.fit_window.0, self.fit_window.1));
        }
        if keys.contains(&"beta_lo") {
            push("beta_lo", self.beta_lo.to_string());
            push("beta_hi", self.beta_hi.to_string());
            push("tol", self.tol.to_string());
            push("epsilon", self.epsilon.to_string());
        }
        push("out_dir", self.out_dir.clone());
        push("master_seed", self.master_seed.to_string());
        push("workers", self.workers.to_string());
        lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_applies_defaults() {
        let cfg = ExperimentConfig::parse(
            "kind = profile\nN = 200\nm = 3\np = 0\nlambda = 0.01\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, Kind::Profile);
        assert_eq!(cfg.t_max, 500);
        assert_eq!(cfg.realizations, 100);
        assert_eq!(cfg.approach, Approach::Normal);
        assert_eq!(cfg.hubs, HubSelection::TopFraction(0.03));
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.workers, 0);
        let manifest = cfg.manifest_lines().join("\n");
        assert!(manifest.contains("t_max = 500  # default"));
        assert!(manifest.contains("realizations = 100  # default"));
        assert!(manifest.contains("lambda = 0.01\n"));
        assert!(!manifest.contains("lambda = 0.01  # default"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = ExperimentConfig::parse(
            "# a comment\nkind = generate # trailing comment\n\nN = 50 \n m =2\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, Kind::Generate);
        assert_eq!(cfg.n, 50);
        assert_eq!(cfg.m, 2);
    }

    #[test]
    fn unknown_key_names_line_and_key() {
        let err = ExperimentConfig::parse("kind = generate\nnn = 3\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert_eq!(err.key.as_deref(), Some("nn"));
    }

    #[test]
    fn out_of_range_p_rejected() {
        let err = ExperimentConfig::parse("kind = generate\np = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("outside [0, 1]"), "{err}");
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = ExperimentConfig::parse("kind = generate\nN = 10\nN = 20\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn missing_equals_sign_rejected() {
        let err = ExperimentConfig::parse("kind = generate\njust words\n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn curve_requires_lambdas() {
        let err = ExperimentConfig::parse("kind = curve\n").unwrap_err();
        assert_eq!(err.key.as_deref(), Some("lambdas"));
        let err = ExperimentConfig::parse("kind = curve\nlambdas = \n").unwrap_err();
        assert_eq!(err.key.as_deref(), Some("lambdas"));
        let cfg = ExperimentConfig::parse("kind = curve\nlambdas = 0.004, 0.01\n").unwrap();
        assert_eq!(cfg.lambdas, vec![0.004, 0.01]);
    }

    #[test]
    fn kind_specific_keys_are_rejected_elsewhere() {
        let err = ExperimentConfig::parse("kind = generate\nlambda = 0.01\n").unwrap_err();
        assert!(err.to_string().contains("not used by kind"), "{err}");
    }

    #[test]
    fn f_and_k_thr_are_exclusive() {
        let err =
            ExperimentConfig::parse("kind = profile\nf = 0.05\nk_thr = 10\n").unwrap_err();
        assert!(err.to_string().contains("not both"));
        let cfg = ExperimentConfig::parse("kind = profile\nk_thr = 10\n").unwrap();
        assert_eq!(cfg.hubs, HubSelection::DegreeThreshold(10));
    }

    #[test]
    fn figure_requires_number_in_range() {
        assert!(ExperimentConfig::parse("kind = figure\n").is_err());
        assert!(ExperimentConfig::parse("kind = figure\nfigure = 6\n").is_err());
        let cfg = ExperimentConfig::parse("kind = figure\nfigure = 3\n").unwrap();
        assert_eq!(cfg.figure, 3);
        assert_eq!(cfg.realizations, 20);
        // figures 1 and 2 default to the heavier profile ensembles
        let cfg = ExperimentConfig::parse("kind = figure\nfigure = 1\n").unwrap();
        assert_eq!(cfg.realizations, 100);
        assert_eq!(cfg.t_max, 500);
    }

    #[test]
    fn fit_window_validation() {
        let err = ExperimentConfig::parse(
            "kind = betac\nt_max = 100\nfit_window = 80,100\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("under 50 steps"));
        let err = ExperimentConfig::parse(
            "kind = betac\nt_max = 100\nfit_window = 10,200\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("invalid for t_max"));
        // default window tracks t_max
        let cfg = ExperimentConfig::parse("kind = betac\nt_max = 600\n").unwrap();
        assert_eq!(cfg.fit_window, (120, 600));
    }

    #[test]
    fn theory_calibration_point_must_be_on_grid() {
        let err = ExperimentConfig::parse(
            "kind = theory\nlambdas = 0.004,0.008\ncalibrate_lambda = 0.01\n",
        )
        .unwrap_err();
        assert_eq!(err.key.as_deref(), Some("calibrate_lambda"));
        let cfg = ExperimentConfig::parse(
            "kind = theory\nlambdas = 0.004,0.01\n",
        )
        .unwrap();
        assert_eq!(cfg.calibrate_lambda, 0.01);
    }

    #[test]
    fn overrides_mark_keys_as_set() {
        let mut cfg = ExperimentConfig::parse("kind = generate\n").unwrap();
        cfg.override_master_seed(7);
        cfg.override_workers(2);
        let manifest = cfg.manifest_lines().join("\n");
        assert!(manifest.contains("master_seed = 7\n"));
        assert!(manifest.contains("workers = 2"));
        assert!(!manifest.contains("master_seed = 7  # default"));
    }
}
