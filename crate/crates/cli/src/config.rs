//! Flat `key = value` configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Recognised keys and defaults:
//!
//! | key           | default                          | meaning                                        |
//! |---------------|----------------------------------|------------------------------------------------|
//! | `seed`        | required                         | master seed                                    |
//! | `dim`         | 2                                | torus dimension `d`                            |
//! | `bandwidth`   | 16                               | Fourier bandwidth `K` of operators             |
//! | `grid`        | `2K+2`                           | grid points per axis for operator norms        |
//! | `horizon`     | 0.5                              | time horizon `T`                               |
//! | `steps`       | 200                              | time steps                                     |
//! | `paths`       | 20000                            | Monte Carlo paths (per ensemble)               |
//! | `p`           | `2`                              | exponent list, e.g. `4/3, 2, 4`                |
//! | `a`           | `riesz:1,2`                      | matrix: `identity`, `riesz:i,j`, `riesz-sum:J`, `diag:…`, `matrix:…` (row-major), `rotation:c` |
//! | `v`           | `0`                              | potential: `0` or `const:m` (`V ≡ −m`)         |
//! | `profile`     | `constant:1`                     | `a(t)`: `constant:c`, `exp:r`, `indicator:s,e` |
//! | `f`           | `cos:1,0:1; sin:1,1:0.5`         | trig polynomial terms `cos:k:amp`, `sin:k:amp`, `const:c` |
//! | `start`       | `uniform`                        | initial law: `uniform` or a point `x1,…,xd`    |
//! | `depth`       | 10                               | dyadic tree depth                              |
//! | `ensembles`   | 10                               | independent ensembles (bdg, matrix-bdg)        |
//! | `bins`        | 8                                | histogram bins per axis                        |
//! | `checkpoints` | 8                                | martingale checkpoints                         |
//! | `k`           | 0.5                              | exponent of the domination inequality          |
//! | `pairs`       | 20                               | random pairs for the bilinear embedding        |
//! | `max_n`       | 50                               | largest SU(2) representation dimension         |
//! | `alpha`       | 1                                | root length `‖α‖`                              |
//! | `range`       | `-1,1`                           | predictable range `[b, B]`                     |
//! | `dump`        | `false`                          | write field and ensemble files next to the report |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use martlab_core::quadrature::TimeProfile;
use martlab_core::spectral::{FourierField, TrigTerm};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("key {key:?}: {msg}")]
    Value { key: String, msg: String },
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
}

const KEYS: &[&str] = &[
    "seed",
    "dim",
    "bandwidth",
    "grid",
    "horizon",
    "steps",
    "paths",
    "p",
    "a",
    "v",
    "profile",
    "f",
    "start",
    "depth",
    "ensembles",
    "bins",
    "checkpoints",
    "k",
    "pairs",
    "max_n",
    "alpha",
    "range",
    "dump",
];

/// Raw key-value pairs, in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            let key = k.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: i + 1, key });
            }
        }
        Ok(Config { values })
    }

    /// Sets `key`, replacing any value from the file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|e: T::Err| value_err(key, e.to_string())),
        }
    }
}

fn value_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.to_string(), msg: msg.into() }
}

/// A number, optionally written as a fraction `a/b`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad number {s:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad number {s:?}"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("bad number {s:?}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite number {s:?}"))
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(parse_number).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Constants,
    TransformSim,
    Subordination,
    Bdg,
    MatrixBdg,
    Lenglart,
    MartingaleCheck,
    ProjectCompare,
    /// `L^p` size of the untransformed stochastic integral (`prop35` on the command line).
    IntegralLp,
    RieszNorm,
    ChoiRiesz,
    Bilinear,
    LaplaceMult,
    Su2,
}

impl Experiment {
    pub const ALL: [Experiment; 14] = [
        Experiment::Constants,
        Experiment::TransformSim,
        Experiment::Subordination,
        Experiment::Bdg,
        Experiment::MatrixBdg,
        Experiment::Lenglart,
        Experiment::MartingaleCheck,
        Experiment::ProjectCompare,
        Experiment::IntegralLp,
        Experiment::RieszNorm,
        Experiment::ChoiRiesz,
        Experiment::Bilinear,
        Experiment::LaplaceMult,
        Experiment::Su2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Constants => "constants",
            Experiment::TransformSim => "transform-sim",
            Experiment::Subordination => "subordination",
            Experiment::Bdg => "bdg",
            Experiment::MatrixBdg => "matrix-bdg",
            Experiment::Lenglart => "lenglart",
            Experiment::MartingaleCheck => "martingale-check",
            Experiment::ProjectCompare => "project-compare",
            Experiment::IntegralLp => "prop35",
            Experiment::RieszNorm => "riesz-norm",
            Experiment::ChoiRiesz => "choi-riesz",
            Experiment::Bilinear => "bilinear",
            Experiment::LaplaceMult => "laplace-mult",
            Experiment::Su2 => "su2",
        }
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| ConfigError::UnknownExperiment(s.to_string()))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Matrix coefficient of a transform.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MatrixSpec {
    Identity,
    /// `e_i ⊗ e_j`, 1-based; gives `R_iR_j` as a multiplier.
    Riesz {
        i: usize,
        j: usize,
    },
    /// Projection onto the coordinates `J`, 1-based.
    RieszSum {
        axes: Vec<usize>,
    },
    Diag {
        entries: Vec<f64>,
    },
    /// Row-major `d × d`.
    Matrix {
        entries: Vec<f64>,
    },
    /// Position-dependent rotation field of amplitude `c`.
    Rotation {
        amplitude: f64,
    },
}

impl MatrixSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let ints = || -> Result<Vec<usize>, String> {
            rest.split(',').map(|x| x.trim().parse::<usize>().map_err(|_| format!("bad axis in {s:?}"))).collect()
        };
        match head {
            "identity" => Ok(MatrixSpec::Identity),
            "riesz" => match ints()?.as_slice() {
                &[i, j] if i >= 1 && j >= 1 => Ok(MatrixSpec::Riesz { i, j }),
                _ => Err(format!("riesz needs two 1-based axes, got {s:?}")),
            },
            "riesz-sum" => {
                let axes = ints()?;
                if axes.is_empty() || axes.contains(&0) {
                    return Err(format!("riesz-sum needs 1-based axes, got {s:?}"));
                }
                Ok(MatrixSpec::RieszSum { axes })
            }
            "diag" => Ok(MatrixSpec::Diag { entries: parse_list(rest)? }),
            "matrix" => Ok(MatrixSpec::Matrix { entries: parse_list(rest)? }),
            "rotation" => Ok(MatrixSpec::Rotation { amplitude: parse_number(rest)? }),
            _ => Err(format!("unknown matrix spec {s:?}")),
        }
    }

    /// Constant matrix in dimension `d`; `None` for the rotation field.
    pub fn matrix(&self, d: usize) -> Result<Option<DMatrix<f64>>, String> {
        let axis = |a: usize| if a <= d { Ok(a - 1) } else { Err(format!("axis {a} exceeds dimension {d}")) };
        Ok(Some(match self {
            MatrixSpec::Identity => DMatrix::identity(d, d),
            MatrixSpec::Riesz { i, j } => {
                let mut m = DMatrix::zeros(d, d);
                m[(axis(*i)?, axis(*j)?)] = 1.0;
                m
            }
            MatrixSpec::RieszSum { axes } => {
                let mut m = DMatrix::zeros(d, d);
                for a in axes {
                    m[(axis(*a)?, axis(*a)?)] = 1.0;
                }
                m
            }
            MatrixSpec::Diag { entries } => {
                if entries.len() != d {
                    return Err(format!("diag needs {d} entries, got {}", entries.len()));
                }
                DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries))
            }
            MatrixSpec::Matrix { entries } => {
                if entries.len() != d * d {
                    return Err(format!("matrix needs {} entries, got {}", d * d, entries.len()));
                }
                DMatrix::from_row_slice(d, d, entries)
            }
            MatrixSpec::Rotation { .. } => return Ok(None),
        }))
    }
}

/// `V ≡ −m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialSpec {
    pub m: f64,
}

impl PotentialSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let m = if s == "0" {
            0.0
        } else if let Some(rest) = s.strip_prefix("const:") {
            parse_number(rest)?
        } else {
            return Err(format!("potential must be `0` or `const:m`, got {s:?}"));
        };
        if m < 0.0 {
            return Err(format!("V ≡ −m needs m ≥ 0, got {m}"));
        }
        Ok(PotentialSpec { m })
    }
}

pub fn parse_profile(s: &str) -> Result<TimeProfile, String> {
    let s = s.trim();
    let (head, rest) = s.split_once(':').ok_or_else(|| format!("profile needs `kind:args`, got {s:?}"))?;
    let args = parse_list(rest)?;
    match (head, args.as_slice()) {
        ("constant", &[c]) => Ok(TimeProfile::constant(c)),
        ("exp", &[r]) => Ok(TimeProfile::exponential(r)),
        ("indicator", &[a, b]) => Ok(TimeProfile::indicator(a, b)),
        _ => Err(format!("unknown profile {s:?}")),
    }
}

/// Terms `cos:k1,…,kd:amp`, `sin:k1,…,kd:amp` or `const:c`, separated by `;`.
pub fn parse_trig(s: &str, dim: usize) -> Result<Vec<TrigTerm>, String> {
    let mut terms = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').map(str::trim).collect();
        let term = match fields.as_slice() {
            ["const", c] => TrigTerm::Constant(parse_number(c)?),
            [kind @ ("cos" | "sin"), modes, amp] => {
                let mode: Vec<i64> = modes
                    .split(',')
                    .map(|x| x.trim().parse::<i64>().map_err(|_| format!("bad mode in {part:?}")))
                    .collect::<Result<_, _>>()?;
                if mode.len() != dim {
                    return Err(format!("mode {mode:?} is not {dim}-dimensional"));
                }
                let amplitude = parse_number(amp)?;
                if *kind == "cos" {
                    TrigTerm::Cos { mode, amplitude }
                } else {
                    TrigTerm::Sin { mode, amplitude }
                }
            }
            _ => return Err(format!("bad trig term {part:?}")),
        };
        terms.push(term);
    }
    if terms.is_empty() {
        return Err("empty trig polynomial".into());
    }
    Ok(terms)
}

pub fn trig_bandwidth(terms: &[TrigTerm]) -> usize {
    terms
        .iter()
        .map(|t| match t {
            TrigTerm::Cos { mode, .. } | TrigTerm::Sin { mode, .. } => mode.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0),
            TrigTerm::Constant(_) => 0,
        })
        .max()
        .unwrap_or(0)
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub seed: u64,
    pub dim: usize,
    pub bandwidth: usize,
    pub grid: Option<usize>,
    pub horizon: f64,
    pub steps: usize,
    pub n_paths: usize,
    pub p: Vec<f64>,
    pub a: MatrixSpec,
    pub v: PotentialSpec,
    pub profile: TimeProfile,
    pub f: String,
    pub start: Option<Vec<f64>>,
    pub depth: usize,
    pub ensembles: usize,
    pub bins: usize,
    pub checkpoints: usize,
    pub k: f64,
    pub pairs: usize,
    pub max_n: usize,
    pub alpha: f64,
    pub range: (f64, f64),
    pub dump: bool,
}

impl ExperimentSpec {
    pub fn resolve(experiment: Experiment, cfg: &Config) -> Result<Self, ConfigError> {
        let seed = cfg.get("seed").ok_or(ConfigError::Missing("seed"))?.parse::<u64>().map_err(|e| value_err("seed", e.to_string()))?;
        let dim: usize = cfg.parsed("dim", 2)?;
        if !(1..=6).contains(&dim) {
            return Err(value_err("dim", format!("need 1 ≤ d ≤ 6, got {dim}")));
        }
        let bandwidth: usize = cfg.parsed("bandwidth", 16)?;
        let grid = cfg.get("grid").map(|g| g.parse::<usize>().map_err(|e| value_err("grid", e.to_string()))).transpose()?;
        if let Some(g) = grid {
            if g < 2 * bandwidth + 2 {
                return Err(value_err("grid", format!("grid {g} below 2K+2 = {}", 2 * bandwidth + 2)));
            }
        }
        let horizon = parse_number(cfg.get("horizon").unwrap_or("0.5")).map_err(|m| value_err("horizon", m))?;
        if !(horizon > 0.0) {
            return Err(value_err("horizon", "must be positive"));
        }
        let steps: usize = cfg.parsed("steps", 200)?;
        let n_paths: usize = cfg.parsed("paths", 20_000)?;
        if steps == 0 || n_paths < 2 {
            return Err(value_err("paths", "need steps ≥ 1 and at least two paths"));
        }
        let p = parse_list(cfg.get("p").unwrap_or("2")).map_err(|m| value_err("p", m))?;
        if p.is_empty() || p.iter().any(|x| !(*x > 1.0)) {
            return Err(value_err("p", "need a nonempty list of exponents > 1"));
        }
        let default_a = match experiment {
            Experiment::ChoiRiesz => "riesz-sum:1",
            Experiment::ProjectCompare | Experiment::IntegralLp => "identity",
            _ => "riesz:1,2",
        };
        let a = MatrixSpec::parse(cfg.get("a").unwrap_or(default_a)).map_err(|m| value_err("a", m))?;
        a.matrix(dim).map_err(|m| value_err("a", m))?;
        let v = PotentialSpec::parse(cfg.get("v").unwrap_or("0")).map_err(|m| value_err("v", m))?;
        let profile = parse_profile(cfg.get("profile").unwrap_or("constant:1")).map_err(|m| value_err("profile", m))?;
        let default_f = if dim >= 2 {
            format!("cos:1{}:1; sin:1,1{}:0.5", ",0".repeat(dim - 1), ",0".repeat(dim - 2))
        } else {
            "cos:1:1; sin:2:0.5".to_string()
        };
        let f = cfg.get("f").map(str::to_string).unwrap_or(default_f);
        parse_trig(&f, dim).map_err(|m| value_err("f", m))?;
        let start = match cfg.get("start").unwrap_or("uniform") {
            "uniform" => None,
            s => {
                let x = parse_list(s).map_err(|m| value_err("start", m))?;
                if x.len() != dim {
                    return Err(value_err("start", format!("need {dim} coordinates")));
                }
                Some(x)
            }
        };
        let range = match parse_list(cfg.get("range").unwrap_or("-1,1")).map_err(|m| value_err("range", m))?.as_slice() {
            &[b, big_b] if b < big_b => (b, big_b),
            _ => return Err(value_err("range", "need `b, B` with b < B")),
        };
        let depth: usize = cfg.parsed("depth", 10)?;
        if !(1..=20).contains(&depth) {
            return Err(value_err("depth", "need 1 ≤ depth ≤ 20"));
        }
        let k = parse_number(cfg.get("k").unwrap_or("0.5")).map_err(|m| value_err("k", m))?;
        let spec = ExperimentSpec {
            experiment,
            seed,
            dim,
            bandwidth,
            grid,
            horizon,
            steps,
            n_paths,
            p,
            a,
            v,
            profile,
            f,
            start,
            depth,
            ensembles: cfg.parsed("ensembles", 10)?,
            bins: cfg.parsed("bins", 8)?,
            checkpoints: cfg.parsed("checkpoints", 8)?,
            k,
            pairs: cfg.parsed("pairs", 20)?,
            max_n: cfg.parsed("max_n", 50)?,
            alpha: parse_number(cfg.get("alpha").unwrap_or("1")).map_err(|m| value_err("alpha", m))?,
            range,
            dump: cfg.parsed("dump", false)?,
        };
        if spec.ensembles == 0 || spec.bins == 0 || spec.checkpoints == 0 || spec.pairs == 0 || spec.max_n < 2 {
            return Err(value_err("ensembles", "counts must be positive (max_n ≥ 2)"));
        }
        Ok(spec)
    }

    pub fn field(&self) -> FourierField {
        let terms = parse_trig(&self.f, self.dim).expect("validated in resolve");
        FourierField::real_trig(self.dim, trig_bandwidth(&terms).max(1), &terms).expect("validated in resolve")
    }

    /// SHA-256 of the canonical JSON of the resolved spec.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("spec serialises");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut cfg = Config::parse("# test\nseed = 7\n\np = 4/3, 2\n").unwrap();
        cfg.set("paths", "100").unwrap();
        let s = ExperimentSpec::resolve(Experiment::RieszNorm, &cfg).unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.n_paths, 100);
        assert!((s.p[0] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.a, MatrixSpec::Riesz { i: 1, j: 2 });
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Config::parse("seed 7"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(Config::parse("colour = red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(Config::parse("seed = 1\nseed = 2"), Err(ConfigError::Duplicate { line: 2, .. })));
        let cfg = Config::parse("dim = 2").unwrap();
        assert!(matches!(ExperimentSpec::resolve(Experiment::Su2, &cfg), Err(ConfigError::Missing("seed"))));
        let cfg = Config::parse("seed = 1\na = riesz:1,3").unwrap();
        assert!(ExperimentSpec::resolve(Experiment::RieszNorm, &cfg).is_err());
        assert!("nope".parse::<Experiment>().is_err());
    }

    #[test]
    fn trig_terms() {
        let t = parse_trig("cos:1,0:1; sin:1,1:0.5; const:0.25", 2).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(trig_bandwidth(&t), 1);
        assert!(parse_trig("cos:1:1", 2).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let cfg = Config::parse("seed = 1").unwrap();
        let a = ExperimentSpec::resolve(Experiment::Bdg, &cfg).unwrap();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.n_paths += 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
