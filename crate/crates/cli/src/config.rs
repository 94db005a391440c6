//! TOML configuration: four blocks (`geometry`, `physics`, `numerics`,
//! `output`), unknown keys rejected with near-miss suggestions, and every
//! validation error reported with its field path.

use lee2d::meanfield::AnsatzForm;
use lee2d::renorm::PhysicalParams;
use lee2d::{Manifold, Point};
use std::fmt;
use std::path::PathBuf;

pub const DEFAULT_SEED: u64 = lee2d::analysis::DEFAULT_SEED;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    /// Dotted path such as `physics.mu`; empty for whole-document errors.
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// All problems found in one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<FieldError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub seed: u64,
    /// Short-time cutoff of the bare mass.
    pub epsilon: f64,
    /// Accepted residual of root solves; larger residuals exit with the
    /// accuracy code.
    pub tolerance: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub s_points: usize,
    /// Width of the Gaussian trial on noncompact geometries.
    pub width: f64,
    pub bracket: Option<(f64, f64)>,
    pub ansatz: AnsatzForm,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            epsilon: 1e-4,
            tolerance: 1e-8,
            s_min: 1e-3,
            s_max: 1e3,
            s_points: 13,
            width: 1.0,
            bracket: None,
            ansatz: AnsatzForm::Printed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub manifold: Manifold<f64>,
    pub params: PhysicalParams<f64>,
    pub numerics: Numerics,
    /// `None` lets each subcommand pick its natural format.
    pub format: Option<Format>,
    pub path: Option<PathBuf>,
}

/// Every field optional; filled from the file, then from flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub kind: Option<String>,
    pub radius: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub m: Option<f64>,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub n: Option<f64>,
    pub source: Option<(f64, f64)>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub tolerance: Option<f64>,
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub s_points: Option<u64>,
    pub width: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    pub ansatz: Option<String>,
    pub format: Option<String>,
    pub path: Option<String>,
}

#[derive(Clone, Copy)]
enum Kind {
    Str,
    Float,
    Int,
    Pair,
}

const SCHEMA: &[(&str, &[(&str, Kind)])] = &[
    (
        "geometry",
        &[
            ("kind", Kind::Str),
            ("radius", Kind::Float),
            ("l1", Kind::Float),
            ("l2", Kind::Float),
        ],
    ),
    (
        "physics",
        &[
            ("m", Kind::Float),
            ("mu", Kind::Float),
            ("lambda", Kind::Float),
            ("n", Kind::Float),
            ("source", Kind::Pair),
        ],
    ),
    (
        "numerics",
        &[
            ("seed", Kind::Int),
            ("epsilon", Kind::Float),
            ("tolerance", Kind::Float),
            ("s_min", Kind::Float),
            ("s_max", Kind::Float),
            ("s_points", Kind::Int),
            ("width", Kind::Float),
            ("bracket", Kind::Pair),
            ("ansatz", Kind::Str),
        ],
    ),
    ("output", &[("format", Kind::Str), ("path", Kind::Str)]),
];

enum Value {
    Str(String),
    Float(f64),
    Int(u64),
    Pair(f64, f64),
}

fn suggestion<'a>(word: &str, candidates: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .map(|c| (strsim::damerau_levenshtein(word, c), c))
        .filter(|&(d, c)| d <= 2.max(c.len() / 3) && d < c.len())
        .min_by_key(|&(d, _)| d)
        .map(|(_, c)| c)
}

fn unknown(path: String, word: &str, candidates: Vec<String>) -> FieldError {
    let hint = suggestion(word, candidates.iter().map(String::as_str))
        .map(|s| format!("; did you mean `{s}`?"))
        .unwrap_or_default();
    FieldError {
        path,
        message: format!("unknown key `{word}`{hint}"),
    }
}

fn as_float(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn convert(v: &toml::Value, kind: Kind) -> Result<Value, String> {
    match kind {
        Kind::Str => v
            .as_str()
            .map(|s| Value::Str(s.to_string()))
            .ok_or("expected a string".into()),
        Kind::Float => as_float(v)
            .map(Value::Float)
            .ok_or("expected a number".into()),
        Kind::Int => match v {
            toml::Value::Integer(i) if *i >= 0 => Ok(Value::Int(*i as u64)),
            _ => Err("expected a nonnegative integer".into()),
        },
        Kind::Pair => match v
            .as_array()
            .map(|a| a.iter().map(as_float).collect::<Option<Vec<_>>>())
        {
            Some(Some(xs)) if xs.len() == 2 => Ok(Value::Pair(xs[0], xs[1])),
            _ => Err("expected an array of two numbers".into()),
        },
    }
}

fn store(raw: &mut RawConfig, key: &str, v: Value) {
    match (key, v) {
        ("kind", Value::Str(s)) => raw.kind = Some(s),
        ("radius", Value::Float(x)) => raw.radius = Some(x),
        ("l1", Value::Float(x)) => raw.l1 = Some(x),
        ("l2", Value::Float(x)) => raw.l2 = Some(x),
        ("m", Value::Float(x)) => raw.m = Some(x),
        ("mu", Value::Float(x)) => raw.mu = Some(x),
        ("lambda", Value::Float(x)) => raw.lambda = Some(x),
        ("n", Value::Float(x)) => raw.n = Some(x),
        ("source", Value::Pair(a, b)) => raw.source = Some((a, b)),
        ("seed", Value::Int(x)) => raw.seed = Some(x),
        ("epsilon", Value::Float(x)) => raw.epsilon = Some(x),
        ("tolerance", Value::Float(x)) => raw.tolerance = Some(x),
        ("s_min", Value::Float(x)) => raw.s_min = Some(x),
        ("s_max", Value::Float(x)) => raw.s_max = Some(x),
        ("s_points", Value::Int(x)) => raw.s_points = Some(x),
        ("width", Value::Float(x)) => raw.width = Some(x),
        ("bracket", Value::Pair(a, b)) => raw.bracket = Some((a, b)),
        ("ansatz", Value::Str(s)) => raw.ansatz = Some(s),
        ("format", Value::Str(s)) => raw.format = Some(s),
        ("path", Value::Str(s)) => raw.path = Some(s),
        _ => unreachable!("schema and store disagree on {key}"),
    }
}

/// Line and column (1-based) of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.len(), |i| before.len() - i - 1)
        + 1;
    (line, col)
}

/// Reads the document into a [`RawConfig`], collecting every schema error.
pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigErrors> {
    match parse_partial(text)? {
        (raw, errors) if errors.is_empty() => Ok(raw),
        (_, errors) => Err(ConfigErrors(errors)),
    }
}

/// Like [`parse_raw`] but keeps the well-formed fields next to the schema
/// errors, so validation can report its own errors as well. Only a syntax
/// error is fatal.
pub fn parse_partial(text: &str) -> Result<(RawConfig, Vec<FieldError>), ConfigErrors> {
    let table: toml::Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            let at = e
                .span()
                .map(|s| {
                    let (l, c) = line_col(text, s.start);
                    format!("line {l}, column {c}: ")
                })
                .unwrap_or_default();
            return Err(ConfigErrors(vec![FieldError {
                path: String::new(),
                message: format!("syntax error at {at}{}", e.message()),
            }]));
        }
    };
    let mut raw = RawConfig::default();
    let mut errors = Vec::new();
    let blocks = || {
        SCHEMA
            .iter()
            .map(|(b, _)| b.to_string())
            .collect::<Vec<_>>()
    };
    for (block, body) in &table {
        let Some((_, fields)) = SCHEMA.iter().find(|(b, _)| b == block) else {
            errors.push(unknown(block.clone(), block, blocks()));
            continue;
        };
        let Some(body) = body.as_table() else {
            errors.push(FieldError {
                path: block.clone(),
                message: "expected a table".into(),
            });
            continue;
        };
        for (key, value) in body {
            let path = format!("{block}.{key}");
            match fields.iter().find(|(k, _)| k == key) {
                Some(&(name, kind)) => match convert(value, kind) {
                    Ok(v) => store(&mut raw, name, v),
                    Err(message) => errors.push(FieldError { path, message }),
                },
                None => {
                    let here: Vec<String> = fields.iter().map(|(k, _)| k.to_string()).collect();
                    let mut err = unknown(path, key, here);
                    if !err.message.contains("did you mean") {
                        let elsewhere = SCHEMA
                            .iter()
                            .flat_map(|(b, fs)| fs.iter().map(move |(k, _)| (b, k)))
                            .find(|(_, k)| *k == key);
                        if let Some((b, k)) = elsewhere {
                            err.message = format!("unknown key `{key}`; it belongs in `{b}.{k}`");
                        }
                    }
                    errors.push(err);
                }
            }
        }
    }
    Ok((raw, errors))
}

impl RawConfig {
    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: RawConfig) -> RawConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RawConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            kind, radius, l1, l2, m, mu, lambda, n, source, seed, epsilon, tolerance, s_min, s_max,
            s_points, width, bracket, ansatz, format, path
        )
    }

    pub fn validate(&self) -> Result<Config, ConfigErrors> {
        let mut errors = Vec::new();
        let mut err = |path: &str, message: String| {
            errors.push(FieldError {
                path: path.into(),
                message,
            })
        };
        let positive = |x: f64| x > 0.0 && x.is_finite();

        let radius = self.radius.unwrap_or(1.0);
        let (l1, l2) = (self.l1.unwrap_or(1.0), self.l2.unwrap_or(1.0));
        let kind = self.kind.as_deref().unwrap_or("plane");
        let manifold = match kind {
            "plane" => Some(Manifold::plane()),
            "torus" => {
                let mut ok = true;
                for (path, v) in [("geometry.l1", l1), ("geometry.l2", l2)] {
                    if !positive(v) {
                        err(path, format!("side length must be positive, got {v}"));
                        ok = false;
                    }
                }
                ok.then(|| Manifold::torus(l1, l2).expect("sides checked"))
            }
            "sphere" | "hyperbolic" => {
                if positive(radius) {
                    Some(if kind == "sphere" {
                        Manifold::sphere(radius).expect("radius checked")
                    } else {
                        Manifold::hyperbolic(radius).expect("radius checked")
                    })
                } else {
                    err(
                        "geometry.radius",
                        format!("radius must be positive, got {radius}"),
                    );
                    None
                }
            }
            other => {
                let names = ["plane", "torus", "sphere", "hyperbolic"];
                let hint = suggestion(other, names.into_iter())
                    .map(|s| format!("; did you mean `{s}`?"))
                    .unwrap_or_default();
                err("geometry.kind", format!("unknown geometry `{other}`{hint} (expected plane, torus, sphere or hyperbolic)"));
                None
            }
        };

        let m = self.m.unwrap_or(1.0);
        let mu = self.mu.unwrap_or(0.1);
        let lambda = self.lambda.unwrap_or(1.0);
        let n = self.n.unwrap_or(1.0);
        if !positive(m) {
            err("physics.m", format!("mass must be positive, got {m}"));
        }
        if !mu.is_finite() || (positive(m) && mu >= m) {
            err(
                "physics.mu",
                format!("binding energy must be finite and below m = {m}, got {mu}"),
            );
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            err(
                "physics.lambda",
                format!("coupling must be nonnegative, got {lambda}"),
            );
        }
        let n_ok = n >= 0.0 && n.fract() == 0.0 && n <= 9.007e15;
        if !n_ok {
            err(
                "physics.n",
                format!("boson count must be a nonnegative integer, got {n}"),
            );
        }
        let (sx, sy) = self.source.unwrap_or((0.0, 0.0));
        let source = Point::new(sx, sy);
        if let Some(man) = &manifold {
            if let Err(e) = man.validate_point(&source) {
                err("physics.source", e.to_string());
            }
        }

        let mut num = Numerics::default();
        num.seed = self.seed.unwrap_or(num.seed);
        for (path, slot, v) in [
            ("numerics.epsilon", &mut num.epsilon, self.epsilon),
            ("numerics.tolerance", &mut num.tolerance, self.tolerance),
            ("numerics.s_min", &mut num.s_min, self.s_min),
            ("numerics.s_max", &mut num.s_max, self.s_max),
            ("numerics.width", &mut num.width, self.width),
        ] {
            if let Some(v) = v {
                if positive(v) {
                    *slot = v;
                } else {
                    err(path, format!("must be positive, got {v}"));
                }
            }
        }
        if num.s_min >= num.s_max {
            err(
                "numerics.s_max",
                format!("must exceed numerics.s_min = {}", num.s_min),
            );
        }
        match self.s_points {
            Some(k) if k < 2 => err(
                "numerics.s_points",
                format!("need at least 2 points, got {k}"),
            ),
            Some(k) => num.s_points = k as usize,
            None => {}
        }
        if let Some((lo, hi)) = self.bracket {
            if !(lo < hi && hi < m) {
                err(
                    "numerics.bracket",
                    format!("need lo < hi < m, got [{lo}, {hi}]"),
                );
            }
            num.bracket = Some((lo, hi));
        }
        match self.ansatz.as_deref() {
            None | Some("printed") => {}
            Some("exact_kernel") => num.ansatz = AnsatzForm::ExactKernel,
            Some(other) => err(
                "numerics.ansatz",
                format!("unknown ansatz `{other}` (expected printed or exact_kernel)"),
            ),
        }

        let format = match self.format.as_deref() {
            None => None,
            Some(f) => match Format::parse(f) {
                Some(f) => Some(f),
                None => {
                    err(
                        "output.format",
                        format!("unknown format `{f}` (expected csv or json)"),
                    );
                    None
                }
            },
        };

        if !errors.is_empty() {
            return Err(ConfigErrors(errors));
        }
        let params = PhysicalParams::new(m, mu, lambda, n as u64)
            .expect("physics checked")
            .with_source(source);
        Ok(Config {
            manifold: manifold.expect("geometry checked"),
            params,
            numerics: num,
            format,
            path: self.path.as_ref().map(PathBuf::from),
        })
    }
}

/// Parses and validates a whole document.
pub fn parse_config(text: &str) -> Result<Config, ConfigErrors> {
    load(text, RawConfig::default())
}

/// Parses `text`, applies `overrides` and validates, reporting schema and
/// validation errors together.
pub fn load(text: &str, overrides: RawConfig) -> Result<Config, ConfigErrors> {
    let (raw, mut errors) = parse_partial(text)?;
    match raw.merge(overrides).validate() {
        Ok(cfg) if errors.is_empty() => Ok(cfg),
        Ok(_) => Err(ConfigErrors(errors)),
        Err(ConfigErrors(more)) => {
            errors.extend(more);
            Err(ConfigErrors(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_sphere_gets_defaults() {
        let c = parse_config("[geometry]\nkind = \"sphere\"\n").unwrap();
        assert_eq!(c.manifold, Manifold::sphere(1.0).unwrap());
        assert_eq!(c.params.m, 1.0);
        assert_eq!(c.params.mu, 0.1);
        assert_eq!(c.numerics, Numerics::default());
        assert_eq!(c.format, None);
    }

    #[test]
    fn mu_above_m_names_the_field() {
        let e = parse_config("[physics]\nm = 1.0\nmu = 1.5\n").unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert_eq!(e.0[0].path, "physics.mu");
    }

    #[test]
    fn misspelled_key_gets_suggestion() {
        let e = parse_config("[physics]\nlamda = 0.5\n").unwrap_err();
        assert_eq!(e.0[0].path, "physics.lamda");
        assert!(
            e.0[0].message.contains("did you mean `lambda`"),
            "{}",
            e.0[0].message
        );
    }

    #[test]
    fn all_errors_are_reported() {
        let text = "[geometry]\nkind = \"sphere\"\nradius = -1\n[physics]\nm = 1\nmu = 2\nlambda = -1\n[numerics]\nansatz = \"x\"\n[outptu]\n";
        let e = parse_config(text).unwrap_err();
        let paths: Vec<&str> = e.0.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(e.0.len(), 5, "{e}");
        for p in [
            "outptu",
            "geometry.radius",
            "physics.mu",
            "physics.lambda",
            "numerics.ansatz",
        ] {
            assert!(paths.contains(&p), "{p} missing from {paths:?}");
        }
        assert!(e
            .0
            .iter()
            .any(|f| f.message.contains("did you mean `output`")));
    }

    #[test]
    fn key_in_wrong_block_is_pointed_out() {
        let e = parse_config("[geometry]\nseed = 3\n").unwrap_err();
        assert!(
            e.0[0].message.contains("numerics.seed"),
            "{}",
            e.0[0].message
        );
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_config("[physics]\nm = = 1\n").unwrap_err();
        assert!(e.0[0].message.contains("line 2"), "{}", e.0[0].message);
    }

    #[test]
    fn flags_override_file() {
        let raw = parse_raw("[physics]\nm = 2.0\nmu = 0.5\n").unwrap();
        let over = RawConfig {
            mu: Some(-0.5),
            ..RawConfig::default()
        };
        let c = raw.merge(over).validate().unwrap();
        assert_eq!((c.params.m, c.params.mu), (2.0, -0.5));
    }

    #[test]
    fn source_is_checked_against_the_chart() {
        let e = parse_config(
            "[geometry]\nkind = \"torus\"\nl1 = 1\nl2 = 1\n[physics]\nsource = [2.0, 0.0]\n",
        )
        .unwrap_err();
        assert_eq!(e.0[0].path, "physics.source");
    }
}
