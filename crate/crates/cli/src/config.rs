//! Run configuration: an INI file with `[problem]`, `[grid]`, `[run]` and
//! `[eigenbench]` sections.
//!
//! ```ini
//! [problem]
//! domain = interval(0, 1)
//! lambda = 10
//! m = 1
//! a = d
//! f = u^2
//! g = 1
//!
//! [grid]
//! h = 1/256
//!
//! [run]
//! mode = certify
//! certify_with = computed
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, ParseOption, Properties};
use supersol::construct::CertifyWith;
use supersol::domain::DomainSpec;
use supersol::expr::{self, Expr};
use supersol::problem::ProblemSpec;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Validate,
    Certify,
    Solve,
    Mms,
    Eigenbench,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Validate, Mode::Certify, Mode::Solve, Mode::Mms, Mode::Eigenbench];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Validate => "validate",
            Mode::Certify => "certify",
            Mode::Solve => "solve",
            Mode::Mms => "mms",
            Mode::Eigenbench => "eigenbench",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {}, column {}: {}", .0.line, .0.col, .0.msg)]
    Syntax(ini::ParseError),

    #[error("unknown section [{0}]")]
    UnknownSection(String),

    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },

    #[error("missing key `{key}` in [{section}]")]
    MissingKey { section: &'static str, key: &'static str },

    #[error("{section}.{key} = `{value}`: {reason}")]
    BadValue {
        section: &'static str,
        key: &'static str,
        value: String,
        reason: String,
    },
}

/// One table row: a domain, or its collar of width `eps`, at spacing `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub domain: DomainSpec,
    pub eps: Option<f64>,
    pub h: f64,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: Option<ProblemSpec>,
    pub h: Option<f64>,
    pub mode: Option<Mode>,
    /// Stopping tolerance of the iterations.
    pub tol: f64,
    pub samples: usize,
    pub certify_with: CertifyWith,
    pub out: Option<PathBuf>,
    pub mms_solution: Option<Expr>,
    /// Number of grid halvings in mms mode.
    pub mms_halvings: usize,
    pub rows: Vec<BenchRow>,
    pub eigen_tol: f64,
}

const SECTIONS: [(&str, &[&str]); 4] = [
    ("problem", &["domain", "lambda", "m", "a", "f", "g"]),
    ("grid", &["h"]),
    ("run", &["mode", "tol", "samples", "certify_with", "out", "mms_solution", "mms_halvings"]),
    ("eigenbench", &["row", "eigen_tol"]),
];

/// A real number, also accepting a quotient `p/q` of two reals.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("`{p}` is not a number"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("`{q}` is not a number"))?;
            p / q
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn bad(section: &'static str, key: &'static str, value: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::BadValue {
        section,
        key,
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

struct Section<'a> {
    name: &'static str,
    props: Option<&'a Properties>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &'static str) -> Option<&'a str> {
        self.props.and_then(|p| p.get(key)).map(str::trim)
    }

    fn require(&self, key: &'static str) -> Result<&'a str, ConfigError> {
        self.get(key).ok_or(ConfigError::MissingKey { section: self.name, key })
    }

    fn parse<T>(&self, key: &'static str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| f(v).map_err(|e| bad(self.name, key, v, e)))
            .transpose()
    }

    fn expr(&self, key: &'static str) -> Result<Expr, ConfigError> {
        let v = self.require(key)?;
        expr::parse(v).map_err(|e| bad(self.name, key, v, e))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses configuration text; a relative `out` is taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let opts = ParseOption {
            enabled_quote: false,
            enabled_escape: false,
            ..ParseOption::default()
        };
        let ini = Ini::load_from_str_opt(text, opts).map_err(ConfigError::Syntax)?;
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(ConfigError::UnknownKey {
                        section: "(top level)".into(),
                        key: key.into(),
                    });
                }
                continue;
            };
            let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
                return Err(ConfigError::UnknownSection(name.into()));
            };
            for (key, _) in props.iter() {
                if !keys.contains(&key) {
                    return Err(ConfigError::UnknownKey {
                        section: name.into(),
                        key: key.into(),
                    });
                }
            }
        }
        let section = |name: &'static str| Section {
            name,
            props: ini.section(Some(name)),
        };

        let problem = section("problem");
        let problem = match problem.props {
            None => None,
            Some(_) => {
                let domain_src = problem.require("domain")?;
                let domain: DomainSpec = domain_src.parse().map_err(|e| bad("problem", "domain", domain_src, e))?;
                let lambda = problem.parse("lambda", parse_real)?.ok_or(ConfigError::MissingKey {
                    section: "problem",
                    key: "lambda",
                })?;
                let (m, a, f, g) = (problem.expr("m")?, problem.expr("a")?, problem.expr("f")?, problem.expr("g")?);
                let spec = ProblemSpec::new(domain, lambda, m, a, g, f).map_err(|e| {
                    let src = problem.get("m").unwrap_or_default();
                    bad("problem", "m/a/g", src, e)
                })?;
                Some(spec)
            }
        };

        let grid = section("grid");
        let h = grid.parse("h", parse_real)?;

        let run = section("run");
        let mode = run.parse("mode", |s| s.parse::<Mode>())?;
        let tol = run.parse("tol", parse_real)?.unwrap_or(1e-10);
        if !(tol > 0.0) {
            return Err(bad("run", "tol", run.get("tol").unwrap_or_default(), "must be positive"));
        }
        let samples = run
            .parse("samples", |s| s.parse::<usize>().map_err(|e| e.to_string()))?
            .unwrap_or(200);
        let certify_with = run.parse("certify_with", |s| s.parse::<CertifyWith>())?.unwrap_or(CertifyWith::Computed);
        let out = run.get("out").map(|o| base.join(o));
        let mms_solution = run
            .get("mms_solution")
            .map(|v| expr::parse(v).map_err(|e| bad("run", "mms_solution", v, e)))
            .transpose()?;
        let mms_halvings = run
            .parse("mms_halvings", |s| s.parse::<usize>().map_err(|e| e.to_string()))?
            .unwrap_or(3);

        let bench = section("eigenbench");
        let eigen_tol = bench.parse("eigen_tol", parse_real)?.unwrap_or(supersol::eigen::DEFAULT_EIGEN_TOL);
        let rows = bench
            .props
            .map(|p| p.get_all("row").map(|r| parse_row(r.trim())).collect::<Result<Vec<_>, _>>())
            .transpose()?
            .unwrap_or_default();

        Ok(Self {
            problem,
            h,
            mode,
            tol,
            samples,
            certify_with,
            out,
            mms_solution,
            mms_halvings,
            rows,
            eigen_tol,
        })
    }
}

/// `domain | eps | h`, with `-` for no collar.
fn parse_row(src: &str) -> Result<BenchRow, ConfigError> {
    let err = |reason: String| bad("eigenbench", "row", src, reason);
    let parts: Vec<&str> = src.split('|').map(str::trim).collect();
    let [domain, eps, h] = parts[..] else {
        return Err(err("expected `domain | eps | h`".into()));
    };
    let domain: DomainSpec = domain.parse().map_err(|e: supersol::Error| err(e.to_string()))?;
    let eps = match eps {
        "-" => None,
        e => Some(parse_real(e).map_err(err)?),
    };
    let h = parse_real(h).map_err(err)?;
    Ok(BenchRow { domain, eps, h })
}
