//! Experiment configs in TOML.
//!
//! ```toml
//! name = "sin-h2"
//! h = 0.7
//! t = 1.0
//! x0 = [1.0]
//! eps = [1e-2, 1e-3]
//! paths = 2000
//! seed = 42
//! dt = 1e-3
//!
//! [[component]]
//! field = "sin"      # sin | tanh | rational | linear-saturated | constant | linear
//! amp = [1.0]        # per state component, default all ones
//! scale = 1.0
//! g = "H2"           # H<k>, sin, tanh; or coeffs = [0, 0, 1]
//! ```
//!
//! Optional `[sample]` (`model`, `m`, `t1`, `dt`, `paths`) and `[verify]`
//! (`scale`, `checks`) tables configure the corresponding commands.

use serde::{Deserialize, Serialize};
use toml::{Spanned, Table, Value};

use crate::chaos::{chaos_coefficients, ChaosExpansion};
use crate::error::{Error, Result};
use crate::homogenizer::{Component, FieldKind, FieldSpec, MultiscaleSystem};

/// Highest chaos level kept for named smooth observables.
pub const NAMED_K_MAX: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentConfig {
    pub field: FieldKind,
    pub amp: Vec<f64>,
    pub scale: f64,
    pub g: ChaosExpansion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    /// `fou`, `fbm` or `hermite`.
    pub model: String,
    /// Rank of the Hermite process.
    pub m: usize,
    pub t1: f64,
    pub dt: f64,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// `smoke` or `full`.
    pub scale: String,
    /// Check numbers to run; all when empty.
    pub checks: Vec<u32>,
}

/// A config with every default resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub h: f64,
    pub t: f64,
    pub x0: Vec<f64>,
    pub eps: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub components: Vec<ComponentConfig>,
    pub sample: SampleConfig,
    pub verify: VerifyConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    field: Spanned<String>,
    amp: Option<Vec<f64>>,
    scale: Option<f64>,
    g: Option<Spanned<String>>,
    coeffs: Option<Spanned<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    model: Option<Spanned<String>>,
    m: Option<usize>,
    t1: Option<f64>,
    dt: Option<f64>,
    paths: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    scale: Option<Spanned<String>>,
    checks: Option<Vec<u32>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    h: Spanned<f64>,
    t: Option<f64>,
    x0: Spanned<Vec<f64>>,
    eps: Option<Spanned<Vec<f64>>>,
    paths: Option<usize>,
    seed: Option<u64>,
    dt: Option<f64>,
    #[serde(default, rename = "component")]
    components: Vec<RawComponent>,
    sample: Option<RawSample>,
    verify: Option<RawVerify>,
}

/// 1-based line and column of a byte offset.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    (line, column)
}

fn parse_error(text: &str, offset: usize, message: impl Into<String>) -> Error {
    let (line, column) = line_column(text, offset);
    Error::Parse { line, column, message: message.into() }
}

/// Named observable: `H<k>` (also `H_k`), `sin` or `tanh`.
pub fn named_observable(name: &str) -> Result<ChaosExpansion> {
    let lower = name.trim().to_ascii_lowercase();
    if let Some(rest) = lower.strip_prefix('h') {
        let k: usize = rest
            .trim_start_matches('_')
            .parse()
            .map_err(|_| Error::Argument(format!("cannot read a Hermite degree from {name:?}")))?;
        if k == 0 {
            return Err(Error::Argument("H0 is not centred".into()));
        }
        return Ok(ChaosExpansion::hermite(k));
    }
    match lower.as_str() {
        "sin" => chaos_coefficients(f64::sin, NAMED_K_MAX, 200, "sin"),
        "tanh" => chaos_coefficients(f64::tanh, NAMED_K_MAX, 200, "tanh"),
        _ => Err(Error::Argument(format!("unknown observable {name:?}; expected H<k>, sin, tanh or a coeffs list"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let at = e.span().map(|s| s.start).unwrap_or(0);
            parse_error(text, at, e.message().trim().to_string())
        })?;
        let mut components = Vec::with_capacity(raw.components.len());
        if raw.components.is_empty() {
            return Err(parse_error(text, text.len(), "at least one [[component]] table is required"));
        }
        let d = raw.x0.get_ref().len();
        if d == 0 {
            return Err(parse_error(text, raw.x0.span().start, "x0 is empty"));
        }
        for c in raw.components {
            let field = FieldKind::parse(c.field.get_ref()).map_err(|e| parse_error(text, c.field.span().start, e.to_string()))?;
            let g = match (&c.g, &c.coeffs) {
                (Some(g), None) => named_observable(g.get_ref()).map_err(|e| parse_error(text, g.span().start, e.to_string()))?,
                (None, Some(cs)) => ChaosExpansion::from_coeffs(cs.get_ref().clone(), "coeffs")
                    .map_err(|e| parse_error(text, cs.span().start, e.to_string()))?,
                _ => return Err(parse_error(text, c.field.span().start, "give exactly one of g or coeffs")),
            };
            let amp = c.amp.unwrap_or_else(|| vec![1.0; d]);
            if amp.len() != d {
                return Err(parse_error(text, c.field.span().start, format!("amp has {} entries, x0 has {d}", amp.len())));
            }
            components.push(ComponentConfig { field, amp, scale: c.scale.unwrap_or(1.0), g });
        }
        let eps = match raw.eps {
            Some(e) => {
                if e.get_ref().is_empty() || e.get_ref().iter().any(|v| !(*v > 0.0)) {
                    return Err(parse_error(text, e.span().start, "eps must be a nonempty list of positive values"));
                }
                e.into_inner()
            }
            None => vec![1e-2, 1e-3],
        };
        let sample = raw.sample.unwrap_or(RawSample { model: None, m: None, t1: None, dt: None, paths: None });
        let model = match sample.model {
            Some(m) => {
                if !["fou", "fbm", "hermite"].contains(&m.get_ref().as_str()) {
                    return Err(parse_error(text, m.span().start, format!("unknown model {:?}; expected fou, fbm or hermite", m.get_ref())));
                }
                m.into_inner()
            }
            None => "fou".into(),
        };
        let verify = raw.verify.unwrap_or(RawVerify { scale: None, checks: None });
        let scale = match verify.scale {
            Some(s) => {
                if !["smoke", "full"].contains(&s.get_ref().as_str()) {
                    return Err(parse_error(text, s.span().start, format!("unknown scale {:?}; expected smoke or full", s.get_ref())));
                }
                s.into_inner()
            }
            None => "smoke".into(),
        };
        let t = raw.t.unwrap_or(1.0);
        let cfg = Self {
            name: raw.name.unwrap_or_else(|| "experiment".into()),
            h: *raw.h.get_ref(),
            t,
            x0: raw.x0.get_ref().clone(),
            eps,
            paths: raw.paths.unwrap_or(2000),
            seed: raw.seed.unwrap_or(0),
            dt: raw.dt.unwrap_or(1e-3),
            components,
            sample: SampleConfig {
                model,
                m: sample.m.unwrap_or(2),
                t1: sample.t1.unwrap_or(t),
                dt: sample.dt.unwrap_or(1e-3),
                paths: sample.paths.unwrap_or(4),
            },
            verify: VerifyConfig { scale, checks: verify.checks.unwrap_or_default() },
        };
        if !(cfg.h > 0.0 && cfg.h < 1.0) {
            return Err(parse_error(text, raw.h.span().start, format!("h = {} outside (0, 1)", cfg.h)));
        }
        Ok(cfg)
    }

    /// Parses `text` after applying `key=value` overrides. Keys are dotted
    /// paths; array elements are addressed by index (`component.0.field`).
    /// Values are read as TOML and fall back to strings.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Self::parse(text);
        }
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| {
            let at = e.span().map(|s| s.start).unwrap_or(0);
            parse_error(text, at, e.message().trim().to_string())
        })?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let rewritten = toml::to_string(&table).map_err(|e| Error::Argument(format!("cannot re-serialize config: {e}")))?;
        Self::parse(&rewritten).map_err(|e| match e {
            Error::Parse { line, column, message } => Error::Parse { line, column, message: format!("{message} (after overrides)") },
            other => other,
        })
    }

    /// The slow/fast system; fails for configurations the simulators do not
    /// cover (boundary ranks, Hermite ranks above 3, mixed systems with
    /// `H*` in `[0, 1/2]`).
    pub fn system(&self) -> Result<MultiscaleSystem> {
        let components = self
            .components
            .iter()
            .map(|c| Ok(Component { g: c.g.clone(), field: FieldSpec::new(c.field, c.amp.clone(), c.scale)? }))
            .collect::<Result<Vec<_>>>()?;
        MultiscaleSystem::new(self.h, self.x0.clone(), self.t, components)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

fn override_value(raw: &str) -> Value {
    let probe = format!("v = {raw}");
    match probe.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

/// Sets `key=value` in a TOML table.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Argument(format!("override {assignment:?} is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Argument(format!("override key {key:?} has an empty segment")));
    }
    let value = override_value(raw.trim());
    let mut slot: &mut Value = table
        .entry(parts[0].to_string())
        .or_insert_with(|| if parts.len() > 1 { Value::Table(Table::new()) } else { Value::Boolean(false) });
    for p in &parts[1..] {
        slot = match slot {
            Value::Table(t) => t.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new())),
            Value::Array(a) => {
                let i: usize = p.parse().map_err(|_| Error::Argument(format!("override {key:?}: {p:?} is not an index")))?;
                let len = a.len();
                a.get_mut(i).ok_or_else(|| Error::Argument(format!("override {key:?}: index {i} out of range ({len})")))?
            }
            _ => return Err(Error::Argument(format!("override {key:?}: {p:?} does not address a table or array"))),
        };
    }
    *slot = value;
    Ok(())
}
