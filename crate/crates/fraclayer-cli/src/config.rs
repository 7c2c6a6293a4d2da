//! Run configuration: a `[subcommand]` header followed by `key = value` lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::output::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Heteroclinic,
    Layer,
    Psi,
    MEps,
    Expansion,
    Counterexample,
    Recovery,
    SweepHalf,
    Validate,
}

impl Subcommand {
    pub const ALL: [Subcommand; 9] = [
        Subcommand::Heteroclinic,
        Subcommand::Layer,
        Subcommand::Psi,
        Subcommand::MEps,
        Subcommand::Expansion,
        Subcommand::Counterexample,
        Subcommand::Recovery,
        Subcommand::SweepHalf,
        Subcommand::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Heteroclinic => "heteroclinic",
            Subcommand::Layer => "layer",
            Subcommand::Psi => "psi",
            Subcommand::MEps => "m-eps",
            Subcommand::Expansion => "expansion",
            Subcommand::Counterexample => "counterexample",
            Subcommand::Recovery => "recovery",
            Subcommand::SweepHalf => "sweep-half",
            Subcommand::Validate => "validate",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Accepted keys with their defaults, besides the common ones.
    fn keys(self) -> Vec<(&'static str, Value)> {
        use Value::{Float as F, Int as I, List as L, Text as T};
        let layer = || {
            vec![("l", F(400.0)), ("h_min", F(0.02)), ("growth", F(1.05))]
        };
        let psi_ladder = || vec![("r_min", F(25.0)), ("r_count", I(9))];
        let domain = || {
            vec![
                ("omega", L(vec![-1.0, 1.0])),
                ("datum", T("step".into())),
                ("datum_at", F(0.0)),
                ("datum_left", F(-1.0)),
                ("datum_right", F(1.0)),
                ("datum_value", F(0.3)),
                ("kappa", F(0.0)),
                ("h_rel", F(0.05)),
            ]
        };
        let mut k = match self {
            Subcommand::Heteroclinic => vec![("s", F(0.75))],
            Subcommand::Layer => vec![("s", F(0.7)), ("gamma", F(0.0)), ("sign", F(-1.0))],
            Subcommand::Psi => {
                let mut k = vec![("s", F(0.75)), ("gamma", F(0.0)), ("sign", F(-1.0))];
                k.extend(psi_ladder());
                k
            }
            Subcommand::MEps => {
                let mut k = vec![("s", F(0.25)), ("eps", L(vec![0.05]))];
                k.extend(domain());
                k
            }
            Subcommand::Expansion => {
                let mut k = vec![
                    ("s", F(0.25)),
                    ("eps", L(vec![0.1, 0.05, 0.025, 0.0125])),
                    ("max_jumps", I(2)),
                    ("jumps", L(vec![])),
                    ("left_sign", F(-1.0)),
                ];
                k.extend(domain());
                k.extend(psi_ladder());
                k
            }
            Subcommand::Counterexample => vec![
                ("s", F(0.25)),
                ("eps", L(vec![])),
                ("eps_count", I(4)),
                ("delta_max", F(0.5)),
                ("h_min", F(1e-3)),
            ],
            Subcommand::Recovery => {
                let mut k = vec![
                    ("s", F(0.75)),
                    ("eps", L(vec![0.1, 0.05, 0.025, 0.0125])),
                    ("rho", L(vec![])),
                    ("jumps", L(vec![0.0])),
                    ("left_sign", F(-1.0)),
                ];
                k.extend(domain());
                k.retain(|(key, _)| *key != "kappa");
                // boundary layers need |g| < 1 on ∂Ω
                for (key, v) in k.iter_mut() {
                    if *key == "datum" {
                        *v = T("constant".into());
                    }
                }
                k.extend(psi_ladder());
                k
            }
            Subcommand::SweepHalf => vec![
                ("gamma", F(0.0)),
                ("s_list", L(vec![0.6, 0.55, 0.52, 0.51])),
                ("window", L(vec![-10.0, 0.0])),
            ],
            Subcommand::Validate => vec![("seed", I(7))],
        };
        if matches!(
            self,
            Subcommand::Heteroclinic
                | Subcommand::Layer
                | Subcommand::Psi
                | Subcommand::Expansion
                | Subcommand::Recovery
                | Subcommand::SweepHalf
        ) {
            k.extend(layer());
        }
        k.extend([
            ("potential", T("quartic".into())),
            ("out", T("out".into())),
            ("workers", I(0)),
            ("max_iters", I(20_000)),
            ("tol_pg", F(1e-6)),
            ("tol_energy", F(1e-10)),
        ]);
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<f64>),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(x) => fmt_f64(*x),
            Value::Text(t) => serde_json::to_string(t).expect("string serializes"),
            Value::List(v) => {
                let items: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
                format!("[{}]", items.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    /// `line` is 1-based; 0 refers to a command-line override.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{key} must lie in {interval}")]
    Range { key: String, interval: String },
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Parse { .. } => "ParseError",
            ConfigError::Range { .. } => "RangeError",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    /// Closed or open bounds: `(lo, lo_closed, hi, hi_closed)`.
    Float(f64, bool, f64, bool),
    Int(i64, i64),
    Sign,
    Text(&'static [&'static str]),
    Path,
    /// Entries in an open interval.
    List(f64, f64),
}

fn kind_of(key: &str) -> Option<Kind> {
    const INF: f64 = f64::INFINITY;
    Some(match key {
        "s" => Kind::Float(0.0, false, 1.0, false),
        // |γ| = 1 passes here and is reported by the solver as a well value
        "gamma" => Kind::Float(-1.0, true, 1.0, true),
        "sign" | "left_sign" => Kind::Sign,
        "eps" => Kind::List(0.0, 1.0),
        "rho" => Kind::List(0.0, INF),
        "kappa" => Kind::Float(0.0, true, INF, false),
        "omega" | "window" | "jumps" => Kind::List(-INF, INF),
        "s_list" => Kind::List(0.5, 1.0),
        "datum" => Kind::Text(&["step", "constant"]),
        "datum_at" => Kind::Float(-INF, false, INF, false),
        "datum_left" | "datum_right" | "datum_value" => Kind::Float(-1.0, true, 1.0, true),
        "h_rel" | "h_min" | "l" | "r_min" | "delta_max" => Kind::Float(0.0, false, INF, false),
        "growth" => Kind::Float(1.0, true, 2.0, true),
        "tol_pg" | "tol_energy" => Kind::Float(0.0, false, 1.0, false),
        "max_iters" => Kind::Int(1, 1_000_000_000),
        "workers" => Kind::Int(0, 1024),
        "r_count" | "eps_count" => Kind::Int(2, 30),
        "max_jumps" => Kind::Int(0, 8),
        "seed" => Kind::Int(0, i64::MAX),
        "potential" => Kind::Text(&["quartic"]),
        "out" => Kind::Path,
        _ => return None,
    })
}

fn interval(lo: f64, lc: bool, hi: f64, hc: bool) -> String {
    let b = |x: f64| {
        if x.is_infinite() {
            if x > 0.0 { "∞".to_string() } else { "-∞".to_string() }
        } else {
            format!("{x}")
        }
    };
    format!(
        "{}{},{}{}",
        if lc { "[" } else { "(" },
        b(lo),
        b(hi),
        if hc { "]" } else { ")" }
    )
}

fn range_err(key: &str, interval: String) -> ConfigError {
    ConfigError::Range {
        key: key.to_string(),
        interval,
    }
}

/// Check one raw value against the key's kind.
fn convert(key: &str, raw: &toml::Value, line: usize) -> Result<Value, ConfigError> {
    let kind = kind_of(key).ok_or_else(|| ConfigError::Parse {
        line,
        message: format!("unknown key `{key}`"),
    })?;
    let bad_type = |want: &str| ConfigError::Parse {
        line,
        message: format!("`{key}` expects {want}"),
    };
    let number = |v: &toml::Value| match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    };
    match kind {
        Kind::Float(lo, lc, hi, hc) => {
            let x = number(raw).ok_or_else(|| bad_type("a number"))?;
            let ok = (if lc { x >= lo } else { x > lo }) && (if hc { x <= hi } else { x < hi });
            if !ok {
                return Err(range_err(key, interval(lo, lc, hi, hc)));
            }
            Ok(Value::Float(x))
        }
        Kind::Int(lo, hi) => {
            let toml::Value::Integer(i) = raw else {
                return Err(bad_type("an integer"));
            };
            if *i < lo || *i > hi {
                return Err(range_err(key, format!("[{lo},{hi}]")));
            }
            Ok(Value::Int(*i))
        }
        Kind::Sign => {
            let x = number(raw).ok_or_else(|| bad_type("a number"))?;
            if x != 1.0 && x != -1.0 {
                return Err(range_err(key, "{-1, 1}".into()));
            }
            Ok(Value::Float(x))
        }
        Kind::Text(choices) => {
            let toml::Value::String(t) = raw else {
                return Err(bad_type("a quoted string"));
            };
            if !choices.contains(&t.as_str()) {
                return Err(range_err(key, format!("{{{}}}", choices.join(", "))));
            }
            Ok(Value::Text(t.clone()))
        }
        Kind::Path => match raw {
            toml::Value::String(t) if !t.is_empty() => Ok(Value::Text(t.clone())),
            _ => Err(bad_type("a non-empty quoted string")),
        },
        Kind::List(lo, hi) => {
            let items: Vec<f64> = match raw {
                toml::Value::Array(a) => a
                    .iter()
                    .map(|v| number(v).ok_or_else(|| bad_type("a list of numbers")))
                    .collect::<Result<_, _>>()?,
                v => vec![number(v).ok_or_else(|| bad_type("a number or a list of numbers"))?],
            };
            if items.iter().any(|x| !(*x > lo && *x < hi)) {
                return Err(range_err(key, interval(lo, false, hi, false)));
            }
            Ok(Value::List(items))
        }
    }
}

/// 1-based line of the first `key =` assignment, 0 when absent.
fn line_of(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    /// Effective values, defaults included.
    pub params: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn f64(&self, key: &str) -> f64 {
        match &self.params[key] {
            Value::Float(x) => *x,
            Value::Int(i) => *i as f64,
            v => panic!("{key} is not numeric: {v:?}"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        match &self.params[key] {
            Value::Int(i) => *i as usize,
            v => panic!("{key} is not an integer: {v:?}"),
        }
    }

    pub fn list(&self, key: &str) -> &[f64] {
        match &self.params[key] {
            Value::List(v) => v,
            v => panic!("{key} is not a list: {v:?}"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match &self.params[key] {
            Value::Text(t) => t,
            v => panic!("{key} is not text: {v:?}"),
        }
    }

    /// Effective configuration in the input syntax; parses back to `self`.
    pub fn echo(&self) -> String {
        let mut out = format!("[{}]\n", self.subcommand.name());
        for (k, v) in &self.params {
            writeln!(out, "{k} = {}", v.render()).expect("write to string");
        }
        out
    }

    /// Parameters that describe the computation, without execution knobs.
    pub fn physical(&self) -> BTreeMap<String, Value> {
        let mut p = self.params.clone();
        p.remove("workers");
        p.remove("out");
        p
    }
}

/// Parse and validate a configuration, then apply `key=value` overrides.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(0, |s| line_at(text, s.start)),
        message: e.message().to_string(),
    })?;

    let mut section: Option<(String, usize)> = None;
    let mut raw: Vec<(String, toml::Value, usize)> = Vec::new();
    for (k, v) in table {
        match v {
            toml::Value::Table(t) => {
                let line = text
                    .lines()
                    .position(|l| l.trim() == format!("[{k}]"))
                    .map_or(0, |i| i + 1);
                if let Some((first, _)) = &section {
                    return Err(ConfigError::Parse {
                        line,
                        message: format!("second section [{k}] after [{first}]"),
                    });
                }
                section = Some((k, line));
                for (kk, vv) in t {
                    let line = line_of(text, &kk);
                    raw.push((kk, vv, line));
                }
            }
            v => {
                let line = line_of(text, &k);
                raw.push((k, v, line));
            }
        }
    }
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: 0,
            message: format!("override `{o}` is not key=value"),
        })?;
        let k = k.trim();
        let parsed: toml::Table = toml::from_str(&format!("x = {}", v.trim()))
            .or_else(|_| toml::from_str(&format!("x = {:?}", v.trim())))
            .map_err(|e| ConfigError::Parse {
                line: 0,
                message: format!("override `{o}`: {}", e.message()),
            })?;
        raw.retain(|(kk, _, _)| kk != k);
        raw.push((k.to_string(), parsed["x"].clone(), 0));
    }

    let mut given = BTreeMap::new();
    for (k, v, line) in &raw {
        given.insert(k.clone(), (convert(k, v, *line)?, *line));
    }

    let Some((name, line)) = section else {
        return Err(ConfigError::Parse {
            line: 1,
            message: "missing [subcommand] header".into(),
        });
    };
    let subcommand = Subcommand::from_name(&name).ok_or_else(|| ConfigError::Parse {
        line,
        message: format!(
            "unknown subcommand [{name}]; expected one of {}",
            Subcommand::ALL.map(|c| c.name()).join(", ")
        ),
    })?;
    let mut params: BTreeMap<String, Value> = BTreeMap::new();
    for (k, default) in subcommand.keys() {
        params.insert(k.to_string(), default);
    }
    for (k, (v, line)) in given {
        if !params.contains_key(&k) {
            return Err(ConfigError::Parse {
                line,
                message: format!("key `{k}` is not accepted by [{}]", subcommand.name()),
            });
        }
        params.insert(k, v);
    }
    let cfg = RunConfig { subcommand, params };
    cross_check(&cfg)?;
    Ok(cfg)
}

fn cross_check(cfg: &RunConfig) -> Result<(), ConfigError> {
    let p = &cfg.params;
    let pair = |key: &str| -> Result<(f64, f64), ConfigError> {
        match cfg.list(key) {
            [a, b] if a < b => Ok((*a, *b)),
            _ => Err(range_err(key, "[lo, hi] with lo < hi".into())),
        }
    };
    if p.contains_key("omega") {
        let (lo, hi) = pair("omega")?;
        if p.contains_key("kappa") {
            let half = 0.5 * (hi - lo);
            let k = cfg.f64("kappa");
            if k >= half {
                return Err(range_err("kappa", interval(0.0, true, half, false)));
            }
        }
        if p.contains_key("jumps") && cfg.list("jumps").iter().any(|j| !(*j > lo && *j < hi)) {
            return Err(range_err("jumps", interval(lo, false, hi, false)));
        }
    }
    if p.contains_key("window") {
        pair("window")?;
    }
    if p.contains_key("rho") && cfg.list("rho").len() > 1 {
        return Err(range_err("rho", "a single value or an empty list".into()));
    }
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    for key in ["eps", "s_list"] {
        if p.contains_key(key) && !decreasing(cfg.list(key)) {
            return Err(range_err(key, "a strictly decreasing list".into()));
        }
    }
    if cfg.subcommand == Subcommand::MEps && cfg.list("eps").len() != 1 {
        return Err(range_err("eps", "a single value in (0,1)".into()));
    }
    Ok(())
}
