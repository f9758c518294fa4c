//! Run configuration: a JSON document, optional `key=value` overrides, and
//! validation that reports the offending field path.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use soliton_forge_core::example::{
    build_example_oriented, default_grid_size, grid_points, AngleOrientation, CustomProfile, EllProfile,
    DEFAULT_COORD_VALUES, DEFAULT_T_VALUES,
};
use soliton_forge_core::suite::{Check, Subject, Tolerances};
use soliton_forge_core::table::ExpressionTable;
use soliton_forge_core::Point;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub fn invalid(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Invalid {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Log,
    ScaledLog,
    Linear,
    Exp,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub kind: ProfileKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub orientation: AngleOrientation,
    /// `ℓ(t)` for the custom kind.
    #[serde(default)]
    pub expression: Option<String>,
    /// Restricts a custom profile to `t > 0`.
    #[serde(default)]
    pub positive_t: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_coordinates")]
    pub coordinates: Vec<f64>,
    #[serde(default = "default_t")]
    pub t: Vec<f64>,
    #[serde(default)]
    pub size: Option<usize>,
    /// Explicit points; replaces the generated grid.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
}

fn default_coordinates() -> Vec<f64> {
    DEFAULT_COORD_VALUES.to_vec()
}

fn default_t() -> Vec<f64> {
    DEFAULT_T_VALUES.to_vec()
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            coordinates: default_coordinates(),
            t: default_t(),
            size: None,
            points: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// Named groups of checks. A group silently drops checks the subject
/// cannot support; a check named on its own must apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    PaperSuite,
    Structure,
    Classification,
    Curvature,
    Soliton,
}

impl Group {
    pub const ALL: [Group; 5] = [
        Group::PaperSuite,
        Group::Structure,
        Group::Classification,
        Group::Curvature,
        Group::Soliton,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::PaperSuite => "paper_suite",
            Group::Structure => "structure",
            Group::Classification => "classification",
            Group::Curvature => "curvature",
            Group::Soliton => "soliton",
        }
    }

    pub fn checks(self) -> Vec<Check> {
        use Check::*;
        match self {
            Group::PaperSuite => Check::ALL.to_vec(),
            Group::Structure => vec![Axioms, ClassFlags],
            Group::Classification => vec![ClassFlags, TorseForming, Regularity, EinsteinLikeFit, SolitonFit],
            Group::Curvature => vec![
                CurvatureOracle,
                CurvatureSymmetries,
                ScalarConsistency,
                VerticalCurvature,
                XiSectionSpread,
                Geodesic,
            ],
            Group::Soliton => vec![
                TorseForming,
                Regularity,
                EinsteinLikeFit,
                SolitonFit,
                CoefficientRelations,
                ReebRelations,
                RegularityEquivalence,
                Parallel,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckSelector {
    Group(Group),
    One(Check),
}

impl CheckSelector {
    pub fn name(self) -> &'static str {
        match self {
            CheckSelector::Group(g) => g.name(),
            CheckSelector::One(c) => c.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Group::ALL
            .into_iter()
            .find(|g| g.name() == name)
            .map(CheckSelector::Group)
            .or_else(|| Check::from_name(name).map(CheckSelector::One))
    }
}

impl Serialize for CheckSelector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for CheckSelector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        CheckSelector::from_name(&name).ok_or_else(|| {
            let known: Vec<&str> = Group::ALL
                .iter()
                .map(|g| g.name())
                .chain(Check::ALL.iter().map(|c| c.name()))
                .collect();
            serde::de::Error::custom(format!("unknown check `{name}`, expected one of {}", known.join(", ")))
        })
    }
}

fn default_k() -> f64 {
    1.0
}

fn default_checks() -> Vec<CheckSelector> {
    vec![CheckSelector::Group(Group::PaperSuite)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required for the example family; taken from the table otherwise.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default)]
    pub profile: Option<ProfileConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckSelector>,
    #[serde(default)]
    pub output: OutputConfig,
    /// A user structure given as an expression table.
    #[serde(default)]
    pub manifold: Option<ExpressionTable>,
}

/// A validated configuration together with the effective document it was
/// read from, which the report echoes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub document: Value,
}

/// What a run executes.
#[derive(Debug, Clone)]
pub struct Plan {
    pub subject: Subject,
    pub grid: Vec<Point>,
    pub checks: Vec<Check>,
    pub tolerances: Tolerances,
}

pub fn load_file(path: &std::path::Path, overrides: &[String]) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_str(&text, overrides)
}

/// Parses `text`, applies `key.path=value` overrides in order, then
/// deserializes and validates.
pub fn load_str(text: &str, overrides: &[String]) -> Result<LoadedConfig, ConfigError> {
    let mut document: Value = serde_json::from_str(text).map_err(|e| ConfigError::invalid("<document>", e))?;
    for o in overrides {
        apply_override(&mut document, o)?;
    }
    let config: RunConfig = serde_path_to_error::deserialize(document.clone()).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::invalid(if path == "." { "<document>".into() } else { path }, e.into_inner())
    })?;
    config.validate()?;
    Ok(LoadedConfig { config, document })
}

/// Sets `key.path` (dots separate object keys, integers index arrays) to
/// `value`, read as JSON when it parses and as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::invalid(assignment, "override must look like key=value"))?;
    if key.is_empty() {
        return Err(ConfigError::invalid(assignment, "empty override key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(doc, key, value)
}

pub(crate) fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), ConfigError> {
    let segments: Vec<&str> = key.split('.').collect();
    set_segments(doc, &segments, key, value)
}

fn set_segments(cur: &mut Value, segments: &[&str], key: &str, value: Value) -> Result<(), ConfigError> {
    let Some((seg, rest)) = segments.split_first() else {
        *cur = value;
        return Ok(());
    };
    if cur.is_null() {
        *cur = Value::Object(Default::default());
    }
    let slot = match cur {
        Value::Array(items) => {
            let len = items.len();
            let i: usize = seg
                .parse()
                .map_err(|_| ConfigError::invalid(key, format!("`{seg}` is not an array index")))?;
            items
                .get_mut(i)
                .ok_or_else(|| ConfigError::invalid(key, format!("index {i} out of range (length {len})")))?
        }
        Value::Object(obj) => obj.entry(seg.to_string()).or_insert(Value::Null),
        _ => return Err(ConfigError::invalid(key, format!("`{seg}` does not address an object field"))),
    };
    set_segments(slot, rest, key, value)
}

fn param(p: &ProfileConfig, name: &str) -> Option<f64> {
    p.params.get(name).copied()
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |path: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::invalid(path, format!("must be a positive finite number, got {v}")))
            }
        };
        positive("tolerances.jet_exact", self.tolerances.jet_exact)?;
        positive("tolerances.refit_derivative", self.tolerances.refit_derivative)?;
        if self.k == 0.0 || !self.k.is_finite() {
            return Err(ConfigError::invalid("k", format!("must be a nonzero finite number, got {}", self.k)));
        }
        if self.checks.is_empty() {
            return Err(ConfigError::invalid("checks", "at least one check is required"));
        }
        match (&self.manifold, self.n) {
            (None, None) => return Err(ConfigError::invalid("n", "required for the example family")),
            (None, Some(0)) => return Err(ConfigError::invalid("n", "must be at least 1")),
            (Some(t), Some(n)) if t.n != n => {
                return Err(ConfigError::invalid("n", format!("{n} disagrees with manifold.n = {}", t.n)))
            }
            (Some(t), _) if t.n == 0 => return Err(ConfigError::invalid("manifold.n", "must be at least 1")),
            _ => {}
        }
        if self.grid.coordinates.is_empty() {
            return Err(ConfigError::invalid("grid.coordinates", "must not be empty"));
        }
        if self.grid.t.is_empty() {
            return Err(ConfigError::invalid("grid.t", "must not be empty"));
        }
        if self.grid.size == Some(0) {
            return Err(ConfigError::invalid("grid.size", "must be at least 1"));
        }
        for (i, v) in self.grid.coordinates.iter().chain(&self.grid.t).enumerate() {
            if !v.is_finite() {
                let path = if i < self.grid.coordinates.len() {
                    format!("grid.coordinates[{i}]")
                } else {
                    format!("grid.t[{}]", i - self.grid.coordinates.len())
                };
                return Err(ConfigError::invalid(path, "must be finite"));
            }
        }
        if let Some(points) = &self.grid.points {
            if points.is_empty() {
                return Err(ConfigError::invalid("grid.points", "must not be empty"));
            }
            let dim = 2 * self.dimension_n() + 1;
            for (i, p) in points.iter().enumerate() {
                if p.len() != dim {
                    return Err(ConfigError::invalid(
                        format!("grid.points[{i}]"),
                        format!("expected {dim} coordinates, got {}", p.len()),
                    ));
                }
            }
        }
        if self.manifold.is_none() {
            let p = self
                .profile
                .as_ref()
                .ok_or_else(|| ConfigError::invalid("profile", "required for the example family"))?;
            self.profile_of(p)?;
        }
        if let Some(t) = &self.manifold {
            t.build()
                .map_err(|e| ConfigError::invalid("manifold", e.to_string().trim_start_matches("usage: ")))?;
        }
        Ok(())
    }

    fn dimension_n(&self) -> usize {
        self.manifold.as_ref().map_or(self.n.unwrap_or(1), |t| t.n)
    }

    /// The profile described by `p`, checking parameter names.
    pub fn profile_of(&self, p: &ProfileConfig) -> Result<EllProfile, ConfigError> {
        let allowed: &[&str] = match p.kind {
            ProfileKind::Log => &["c"],
            ProfileKind::ScaledLog | ProfileKind::Custom => &[],
            ProfileKind::Linear => &["alpha"],
            ProfileKind::Exp => &["q", "amplitude", "rate"],
        };
        for (name, v) in &p.params {
            if !allowed.contains(&name.as_str()) {
                return Err(ConfigError::invalid(
                    format!("profile.params.{name}"),
                    format!("not a parameter of this profile (expected {})", list_or_none(allowed)),
                ));
            }
            if !v.is_finite() {
                return Err(ConfigError::invalid(format!("profile.params.{name}"), "must be finite"));
            }
        }
        if p.expression.is_some() && p.kind != ProfileKind::Custom {
            return Err(ConfigError::invalid("profile.expression", "only used by the custom kind"));
        }
        let n = self.n.unwrap_or(1);
        Ok(match p.kind {
            ProfileKind::Log => EllProfile::Log {
                c: param(p, "c").unwrap_or(1.0),
            },
            ProfileKind::ScaledLog => EllProfile::ScaledLog,
            ProfileKind::Linear => EllProfile::Linear {
                alpha: param(p, "alpha").unwrap_or(1.0),
            },
            ProfileKind::Exp => match (param(p, "q"), param(p, "amplitude"), param(p, "rate")) {
                (Some(q), None, None) => EllProfile::exp_for(q, n, self.k),
                (None, Some(amplitude), Some(rate)) => EllProfile::Exp { amplitude, rate },
                (None, None, None) => EllProfile::exp_for(1.0, n, self.k),
                _ => {
                    return Err(ConfigError::invalid(
                        "profile.params",
                        "give either q or both amplitude and rate",
                    ))
                }
            },
            ProfileKind::Custom => {
                let src = p
                    .expression
                    .as_deref()
                    .ok_or_else(|| ConfigError::invalid("profile.expression", "required for the custom kind"))?;
                EllProfile::Custom(
                    CustomProfile::from_expression(src, p.positive_t)
                        .map_err(|e| ConfigError::invalid("profile.expression", e))?,
                )
            }
        })
    }

    /// Builds the subject and grid and expands the check selectors.
    pub fn plan(&self) -> Result<Plan, ConfigError> {
        let (subject, manifold) = match &self.manifold {
            Some(table) => {
                let user = table
                    .build()
                    .map_err(|e| ConfigError::invalid("manifold", e))?;
                let subject = Subject {
                    name: format!("expression table n={}", table.n),
                    manifold: user.manifold.clone(),
                    potential: user.potential,
                    example: None,
                };
                (subject, user.manifold)
            }
            None => {
                let p = self
                    .profile
                    .as_ref()
                    .ok_or_else(|| ConfigError::invalid("profile", "required for the example family"))?;
                let n = self.n.ok_or_else(|| ConfigError::invalid("n", "required"))?;
                let e = build_example_oriented(n, self.profile_of(p)?, self.k, p.orientation)
                    .map_err(|e| ConfigError::invalid("profile", e))?;
                let subject = Subject::from_example(&e);
                (subject, e.transformed)
            }
        };
        let grid = match &self.grid.points {
            Some(points) => points
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let path = format!("grid.points[{i}]");
                    let p = Point::new(c.clone()).map_err(|e| ConfigError::invalid(&path, e))?;
                    manifold.admit(&p).map_err(|e| ConfigError::invalid(&path, e))?;
                    Ok(p)
                })
                .collect::<Result<Vec<_>, ConfigError>>()?,
            None => {
                let size = self.grid.size.unwrap_or_else(|| default_grid_size(manifold.n()));
                let g = grid_points(&manifold, &self.grid.coordinates, &self.grid.t, size)
                    .map_err(|e| ConfigError::invalid("grid", e))?;
                if g.is_empty() {
                    return Err(ConfigError::invalid("grid", "no grid point lies inside the chart"));
                }
                g
            }
        };
        let supports = |c: Check| {
            (!c.needs_example() || subject.example.is_some()) && (!c.needs_potential() || subject.potential.is_some())
        };
        let mut checks = Vec::new();
        for (i, sel) in self.checks.iter().enumerate() {
            match *sel {
                CheckSelector::Group(g) => checks.extend(g.checks().into_iter().filter(|&c| supports(c))),
                CheckSelector::One(c) if supports(c) => checks.push(c),
                CheckSelector::One(c) => {
                    let why = if c.needs_example() {
                        "needs the example family"
                    } else {
                        "needs a potential vector field"
                    };
                    return Err(ConfigError::invalid(format!("checks[{i}]"), format!("`{c}` {why}")));
                }
            }
        }
        checks.sort();
        checks.dedup();
        if checks.is_empty() {
            return Err(ConfigError::invalid("checks", "no selected check applies to this manifold"));
        }
        Ok(Plan {
            subject,
            grid,
            checks,
            tolerances: self.tolerances,
        })
    }
}

fn list_or_none(names: &[&str]) -> String {
    if names.is_empty() {
        "none".into()
    } else {
        names.join(", ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<LoadedConfig, ConfigError> {
        load_str(text, &[])
    }

    fn path_of(e: ConfigError) -> String {
        match e {
            ConfigError::Invalid { path, .. } => path,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = load(r#"{"n": 1, "profile": {"kind": "scaled_log"}}"#).unwrap().config;
        assert_eq!(c.k, 1.0);
        assert_eq!(c.checks, vec![CheckSelector::Group(Group::PaperSuite)]);
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.output.format, Format::Json);
    }

    #[test]
    fn unknown_check_names_report_their_index() {
        let e = load(r#"{"n": 1, "profile": {"kind": "log"}, "checks": ["axioms", "bogus"]}"#).unwrap_err();
        assert_eq!(path_of(e), "checks[1]");
    }

    #[test]
    fn invalid_values_report_field_paths() {
        for (text, path) in [
            (r#"{"n": 0, "profile": {"kind": "log"}}"#, "n"),
            (r#"{"n": 1, "k": 0, "profile": {"kind": "log"}}"#, "k"),
            (r#"{"n": 1, "profile": {"kind": "log"}, "tolerances": {"jet_exact": 0}}"#, "tolerances.jet_exact"),
            (r#"{"n": 1, "profile": {"kind": "log"}, "tolerances": {"jitter": 1}}"#, "tolerances.jitter"),
            (r#"{"n": 1, "profile": {"kind": "linear", "params": {"beta": 1}}}"#, "profile.params.beta"),
            (r#"{"n": 1, "profile": {"kind": "cubic"}}"#, "profile.kind"),
            (r#"{"n": 1, "profile": {"kind": "custom"}}"#, "profile.expression"),
            (r#"{"n": 1, "profile": {"kind": "log"}, "grid": {"size": 0}}"#, "grid.size"),
            (r#"{"n": 1}"#, "profile"),
        ] {
            assert_eq!(path_of(load(text).unwrap_err()), path, "{text}");
        }
    }

    #[test]
    fn overrides_apply_before_validation() {
        let base = r#"{"n": 1, "profile": {"kind": "linear", "params": {"alpha": 1}}}"#;
        let c = load_str(base, &["profile.params.alpha=0.5".into(), "checks=[\"regularity\"]".into()]).unwrap();
        assert_eq!(c.config.profile.unwrap().params["alpha"], 0.5);
        assert_eq!(c.config.checks, vec![CheckSelector::One(Check::Regularity)]);
        assert_eq!(c.document["profile"]["params"]["alpha"], serde_json::json!(0.5));
        let e = load_str(base, &["n=0".into()]).unwrap_err();
        assert_eq!(path_of(e), "n");
        assert!(load_str(base, &["novalue".into()]).is_err());
    }

    #[test]
    fn explicit_points_are_checked_against_the_chart() {
        let text = r#"{"n": 1, "profile": {"kind": "log"}, "grid": {"points": [[0.5, 0, 1]]}}"#;
        let loaded = load(text).unwrap();
        let e = loaded.config.plan().unwrap_err();
        assert_eq!(path_of(e), "grid.points[0]");
    }

    #[test]
    fn groups_drop_checks_a_table_cannot_support() {
        let text = r#"{
            "manifold": {
                "n": 1,
                "metric": [["-exp(2*t)", 0, 0], [0, "exp(2*t)", 0], [0, 0, 1]],
                "phi": [[0, -1, 0], [1, 0, 0], [0, 0, 0]],
                "xi": [0, 0, 1],
                "eta": [0, 0, 1]
            },
            "grid": {"size": 3}
        }"#;
        let loaded = load(text).unwrap();
        let plan = loaded.config.plan().unwrap();
        assert!(plan.checks.contains(&Check::Axioms));
        assert!(!plan.checks.contains(&Check::CurvatureOracle));
        assert!(!plan.checks.contains(&Check::TorseForming));
        let mut named = loaded.config.clone();
        named.checks = vec![CheckSelector::One(Check::CurvatureOracle)];
        assert_eq!(path_of(named.plan().unwrap_err()), "checks[0]");
    }
}
