//! Run configuration: flags, an optional `key=value` file, and defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use szego::models::Model;
use szego::symbolcalc::AlmostComplexBall;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "SZEGO_CACHE_DIR";

/// A usage or configuration problem; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Sampling parameters shared by the subcommands. Their meaning depends on
/// the subcommand and is listed in its `--help`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radius: f64,
    pub samples: usize,
    pub steps: usize,
}

/// Everything a run depends on; echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub model: String,
    pub levels: Vec<usize>,
    pub grid: GridSpec,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub out_dir: PathBuf,
    pub cache_dir: PathBuf,
}

/// Values that may come from the command line or the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub model: Option<String>,
    pub levels: Option<Vec<usize>>,
    pub radius: Option<f64>,
    pub samples: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub tolerances: BTreeMap<String, f64>,
    pub out_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl Overrides {
    /// Fills unset fields from `other`.
    fn or(self, other: Overrides) -> Overrides {
        let mut tolerances = other.tolerances;
        tolerances.extend(self.tolerances);
        Overrides {
            model: self.model.or(other.model),
            levels: self.levels.or(other.levels),
            radius: self.radius.or(other.radius),
            samples: self.samples.or(other.samples),
            steps: self.steps.or(other.steps),
            seed: self.seed.or(other.seed),
            tolerances,
            out_dir: self.out_dir.or(other.out_dir),
            cache_dir: self.cache_dir.or(other.cache_dir),
        }
    }
}

/// Per-subcommand defaults and the tolerance names it understands.
#[derive(Clone, Debug)]
pub struct Defaults {
    pub model: &'static str,
    pub levels: &'static [usize],
    pub grid: GridSpec,
    pub tolerances: &'static [(&'static str, f64)],
}

fn parse_number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse().map_err(|_| bad(format!("invalid value for {key}: {v:?}")))
}

/// Parses `64,128,256`.
pub fn parse_levels(v: &str) -> Result<Vec<usize>, ConfigError> {
    let out: Vec<usize> = v.split(',').map(|s| parse_number("N", s)).collect::<Result<_, _>>()?;
    if out.is_empty() || out.contains(&0) {
        return Err(bad(format!("N must list positive levels, got {v:?}")));
    }
    Ok(out)
}

/// Parses `name=value`.
pub fn parse_tolerance(v: &str) -> Result<(String, f64), ConfigError> {
    let (k, x) = v.split_once('=').ok_or_else(|| bad(format!("tolerance {v:?} is not name=value")))?;
    Ok((k.trim().to_string(), parse_number(k, x)?))
}

/// Reads a plain-text file of `key = value` lines; `#` starts a comment.
/// Keys: `model`, `N`, `radius`, `samples`, `steps`, `seed`, `out`,
/// `cache-dir` and `tol.<name>`.
pub fn parse_config_text(text: &str) -> Result<Overrides, ConfigError> {
    let mut o = Overrides::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| bad(format!("config line {}: expected key = value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "model" => o.model = Some(value.to_string()),
            "N" => o.levels = Some(parse_levels(value)?),
            "radius" => o.radius = Some(parse_number(key, value)?),
            "samples" => o.samples = Some(parse_number(key, value)?),
            "steps" => o.steps = Some(parse_number(key, value)?),
            "seed" => o.seed = Some(parse_number(key, value)?),
            "out" => o.out_dir = Some(PathBuf::from(value)),
            "cache-dir" => o.cache_dir = Some(PathBuf::from(value)),
            _ => match key.strip_prefix("tol.") {
                Some(name) => {
                    o.tolerances.insert(name.to_string(), parse_number(key, value)?);
                }
                None => return Err(bad(format!("config line {}: unknown key {key:?}", lineno + 1))),
            },
        }
    }
    Ok(o)
}

pub fn read_config_file(path: &Path) -> Result<Overrides, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

/// Default cache location when neither a flag, the environment nor the
/// config file names one.
pub fn default_cache_dir() -> PathBuf {
    std::env::temp_dir().join("szego-cache")
}

/// Resolves flags over the config file over defaults. The cache directory
/// takes the flag first, then `SZEGO_CACHE_DIR`, then the file.
pub fn resolve(
    command: &str,
    flags: Overrides,
    file: Option<Overrides>,
    defaults: &Defaults,
) -> Result<RunConfig, ConfigError> {
    let env_cache = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let cache_flag = flags.cache_dir.clone();
    let merged = flags.or(file.unwrap_or_default());
    let mut tolerances: BTreeMap<String, f64> = defaults.tolerances.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in merged.tolerances {
        if !tolerances.contains_key(&k) {
            let known: Vec<&str> = defaults.tolerances.iter().map(|(k, _)| *k).collect();
            return Err(bad(format!("unknown tolerance {k:?} for {command}; known: {}", known.join(", "))));
        }
        tolerances.insert(k, v);
    }
    let grid = GridSpec {
        radius: merged.radius.unwrap_or(defaults.grid.radius),
        samples: merged.samples.unwrap_or(defaults.grid.samples),
        steps: merged.steps.unwrap_or(defaults.grid.steps),
    };
    if !(grid.radius > 0.0 && grid.radius.is_finite()) {
        return Err(bad(format!("radius must be positive, got {}", grid.radius)));
    }
    Ok(RunConfig {
        command: command.to_string(),
        model: merged.model.unwrap_or_else(|| defaults.model.to_string()),
        levels: merged.levels.unwrap_or_else(|| defaults.levels.to_vec()),
        grid,
        seed: merged.seed.unwrap_or(1),
        tolerances,
        out_dir: merged.out_dir.unwrap_or_else(|| PathBuf::from("szego-reports")),
        cache_dir: cache_flag.or(env_cache).or(merged.cache_dir).unwrap_or_else(default_cache_dir),
    })
}

impl RunConfig {
    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}

/// Parses a model spec: `torus`, `torus:RE,IM`, `projective-line`,
/// `perturbed`, `perturbed:EPS`, `fock:M`.
pub fn parse_model(spec: &str) -> Result<Model, ConfigError> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    };
    let model = match (name, arg) {
        ("torus", None) => Model::square_torus(),
        ("torus", Some(a)) => {
            let (re, im) = a.split_once(',').ok_or_else(|| bad(format!("torus period {a:?} is not RE,IM")))?;
            Model::Torus { tau: C::new(parse_number("tau", re)?, parse_number("tau", im)?) }
        }
        ("projective-line" | "cp1", None) => Model::ProjectiveLine,
        ("perturbed", None) => Model::perturbed(0.1),
        ("perturbed", Some(a)) => Model::perturbed(parse_number("eps", a)?),
        ("fock" | "bargmann-fock", None) => Model::BargmannFock { m: 1 },
        ("fock" | "bargmann-fock", Some(a)) => Model::BargmannFock { m: parse_number("m", a)? },
        _ => return Err(bad(format!("unknown model {spec:?}"))),
    };
    model.validate().map_err(|e| bad(format!("model {spec:?}: {e}")))?;
    Ok(model)
}

/// Parses the almost complex structures of `ideal-check`: `witness`,
/// `witness3`, `flat:M`.
pub fn parse_ball(spec: &str) -> Result<AlmostComplexBall, ConfigError> {
    match spec.split_once(':') {
        None if spec == "witness" => Ok(AlmostComplexBall::witness()),
        None if spec == "witness3" => Ok(AlmostComplexBall::witness3()),
        Some(("flat", m)) => {
            let m: usize = parse_number("m", m)?;
            if m == 0 {
                return Err(bad("flat ball needs m ≥ 1"));
            }
            Ok(AlmostComplexBall::standard(m))
        }
        _ => Err(bad(format!("unknown almost complex structure {spec:?}; use witness, witness3 or flat:M"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const D: Defaults = Defaults {
        model: "torus",
        levels: &[64, 128],
        grid: GridSpec { radius: 2.0, samples: 10, steps: 5 },
        tolerances: &[("ratio_low", 0.3)],
    };

    #[test]
    fn flags_override_file_override_defaults() {
        let file =
            parse_config_text("model = projective-line\nN = 8,16 # levels\nseed=7\ntol.ratio_low = 0.25\n").unwrap();
        let flags = Overrides { levels: Some(vec![4]), ..Default::default() };
        let c = resolve("scaling", flags, Some(file), &D).unwrap();
        assert_eq!(c.model, "projective-line");
        assert_eq!(c.levels, vec![4]);
        assert_eq!(c.seed, 7);
        assert_eq!(c.tol("ratio_low"), 0.25);
        assert_eq!(c.grid.samples, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config_text("colour = blue").is_err());
        assert!(parse_config_text("no equals sign").is_err());
        let file = parse_config_text("tol.nonsense = 1").unwrap();
        assert!(resolve("scaling", Overrides::default(), Some(file), &D).is_err());
    }

    #[test]
    fn model_specs() {
        assert_eq!(parse_model("torus").unwrap(), Model::square_torus());
        assert_eq!(parse_model("perturbed:0.05").unwrap(), Model::perturbed(0.05));
        assert_eq!(parse_model("fock:2").unwrap(), Model::BargmannFock { m: 2 });
        assert!(parse_model("sphere").is_err());
        assert!(parse_model("torus:1").is_err());
        assert!(parse_levels("8,0").is_err());
    }
}
