//! Scenario documents: schema, validation and dotted-path overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::coeffs::{CoefficientProfile, ProfileDoc, Verdict};
use crate::diagnose::{FloorMode, SeparationConfig, WaveSpeedConfig};
use crate::error::{LabError, Result};
use crate::evolve::SampleStrategy;
use crate::grid::{AssemblyOptions, FaceRule, Mesh};

/// Every `kind` a check may carry.
pub const CHECK_KINDS: &[&str] = &[
    "conservation",
    "structure",
    "classify",
    "offdiagonal_gaussian",
    "euclidean_offdiagonal",
    "wave_speed",
    "separation",
    "invariance",
    "invariance_refinement",
    "form_additivity",
    "smalltime_decay",
    "largetime_floor",
    "resolvent_volume",
    "ondiagonal_lower",
    "holder_fit",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Plain-language statement the scenario exercises.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub anchor: String,
    pub profile: ProfileDoc,
    pub mesh: MeshSpec,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub t_small: Vec<f64>,
    #[serde(default)]
    pub t_large: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    pub checks: Vec<CheckSpec>,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// Cells per axis.
    pub n: usize,
    /// Defaults to the profile domain.
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub snap_cut: bool,
    #[serde(default, skip_serializing_if = "is_midpoint")]
    pub rule: FaceRule,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_midpoint(r: &FaceRule) -> bool {
    *r == FaceRule::Midpoint
}

impl MeshSpec {
    pub fn options(&self) -> AssemblyOptions {
        AssemblyOptions { rule: self.rule, snap_cut: self.snap_cut }
    }
}

/// A time list, or one of the scenario grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Times {
    Grid(GridRef),
    List(Vec<f64>),
}

impl Default for Times {
    fn default() -> Self {
        Times::Grid(GridRef::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridRef {
    Small,
    Large,
    /// Small followed by large.
    All,
}

/// Point sets for masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    /// Closed axis-aligned box.
    Box { min: Vec<f64>, max: Vec<f64> },
    /// Closed Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Strictly negative side of a shell or surface degeneracy.
    Inner,
}

impl Region {
    pub fn mask(&self, profile: &CoefficientProfile, mesh: &Mesh) -> Result<Vec<bool>> {
        let d = mesh.dimension();
        match self {
            Region::Box { min, max } => {
                if min.len() != d || max.len() != d {
                    return Err(LabError::arg(format!("box region needs {d} coordinates per corner")));
                }
                Ok(mesh.mask(|x| (0..d).all(|k| min[k] <= x[k] && x[k] <= max[k])))
            }
            Region::Ball { center, radius } => {
                if center.len() != d {
                    return Err(LabError::arg(format!("ball region needs a {d}-dimensional center")));
                }
                Ok(mesh.mask(|x| (0..d).map(|k| (x[k] - center[k]).powi(2)).sum::<f64>() <= radius * radius))
            }
            Region::Inner => {
                if profile.signed_offset(&vec![0.0; d]).is_none() {
                    return Err(LabError::arg("an inner region needs a shell or surface profile"));
                }
                Ok(mesh.mask(|x| profile.signed_offset(x).is_some_and(|s| s < 0.0)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Log-spaced radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Conservation {
        #[serde(default)]
        times: Times,
    },
    Structure {
        t: f64,
    },
    Classify {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Verdict>,
    },
    OffdiagonalGaussian {
        balls: Vec<BallSpec>,
        #[serde(default)]
        times: Times,
    },
    EuclideanOffdiagonal {
        sets: Vec<Region>,
        #[serde(default)]
        times: Times,
    },
    WaveSpeed {
        center: Vec<f64>,
        radius: f64,
        times: Vec<f64>,
        /// Region that must stay unexcited, probed at `cut_times`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beyond_cut: Option<Region>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        cut_times: Vec<f64>,
        #[serde(default)]
        config: WaveSpeedConfig,
    },
    Separation {
        probe: SeparationConfig,
    },
    Invariance {
        omega: Region,
        t: f64,
        #[serde(default = "default_invariance_tol")]
        tol: f64,
    },
    InvarianceRefinement {
        omega: Region,
        t: f64,
        levels: Vec<usize>,
    },
    FormAdditivity {
        omega: Region,
        #[serde(default = "default_form_tol")]
        tol: f64,
    },
    SmalltimeDecay {
        /// Defaults to the profile's predicted order.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default)]
        sampling: SampleStrategy,
        #[serde(default = "small_times")]
        times: Times,
    },
    LargetimeFloor {
        mode: FloorMode,
        #[serde(default)]
        sampling: SampleStrategy,
        #[serde(default = "large_times")]
        times: Times,
    },
    ResolventVolume {
        origin: Vec<f64>,
        radii: RadiusGrid,
        #[serde(default = "one")]
        m: usize,
    },
    OndiagonalLower {
        t: f64,
        diameter: f64,
        centers: Vec<Vec<f64>>,
        #[serde(default)]
        separated: bool,
    },
    HolderFit {
        origin: f64,
        range: [f64; 2],
        #[serde(default = "default_holder_count")]
        count: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<f64>,
        #[serde(default = "default_holder_tol")]
        tol: f64,
    },
}

fn default_invariance_tol() -> f64 {
    1e-8
}

fn default_form_tol() -> f64 {
    1e-12
}

fn small_times() -> Times {
    Times::Grid(GridRef::Small)
}

fn large_times() -> Times {
    Times::Grid(GridRef::Large)
}

fn one() -> usize {
    1
}

fn default_holder_count() -> usize {
    16
}

fn default_holder_tol() -> f64 {
    0.02
}

impl CheckSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            CheckSpec::Conservation { .. } => "conservation",
            CheckSpec::Structure { .. } => "structure",
            CheckSpec::Classify { .. } => "classify",
            CheckSpec::OffdiagonalGaussian { .. } => "offdiagonal_gaussian",
            CheckSpec::EuclideanOffdiagonal { .. } => "euclidean_offdiagonal",
            CheckSpec::WaveSpeed { .. } => "wave_speed",
            CheckSpec::Separation { .. } => "separation",
            CheckSpec::Invariance { .. } => "invariance",
            CheckSpec::InvarianceRefinement { .. } => "invariance_refinement",
            CheckSpec::FormAdditivity { .. } => "form_additivity",
            CheckSpec::SmalltimeDecay { .. } => "smalltime_decay",
            CheckSpec::LargetimeFloor { .. } => "largetime_floor",
            CheckSpec::ResolventVolume { .. } => "resolvent_volume",
            CheckSpec::OndiagonalLower { .. } => "ondiagonal_lower",
            CheckSpec::HolderFit { .. } => "holder_fit",
        }
    }

    /// Checks that depend on the profile alone and run once, not per `ε`.
    pub fn profile_level(&self) -> bool {
        matches!(self, CheckSpec::Classify { .. } | CheckSpec::Separation { .. })
    }
}

fn schema(location: impl Into<String>, message: impl Into<String>) -> LabError {
    LabError::Schema { location: location.into(), message: message.into() }
}

impl Scenario {
    /// Parses, applies `key=value` overrides and validates.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| schema(position(&e), e.to_string()))?;
        let typed_error = if overrides.is_empty() { serde_json::from_str::<Scenario>(text).err() } else { None };
        reject_unknown_kinds(&value, typed_error.as_ref())?;
        let scenario = if overrides.is_empty() {
            match typed_error {
                Some(e) => return Err(schema(position(&e), e.to_string())),
                None => serde_json::from_str::<Scenario>(text).map_err(|e| schema(position(&e), e.to_string()))?,
            }
        } else {
            for o in overrides {
                apply_override(&mut value, o)?;
            }
            reject_unknown_kinds(&value, None)?;
            serde_json::from_value::<Scenario>(value).map_err(|e| schema("scenario after overrides", e.to_string()))?
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dimension(&self) -> usize {
        self.profile.dimension
    }

    pub fn profile(&self, base_dir: Option<&std::path::Path>) -> Result<CoefficientProfile> {
        self.profile.clone().into_profile(base_dir)
    }

    pub fn mesh(&self, profile: &CoefficientProfile) -> Result<Mesh> {
        let bbox = self.mesh.bbox.clone().unwrap_or_else(|| profile.domain().to_vec());
        Mesh::new(profile.dimension(), bbox, self.mesh.n)
    }

    /// Resolves a time reference against the scenario grids.
    pub fn times(&self, t: &Times) -> Vec<f64> {
        match t {
            Times::List(v) => v.clone(),
            Times::Grid(GridRef::Small) => self.t_small.clone(),
            Times::Grid(GridRef::Large) => self.t_large.clone(),
            Times::Grid(GridRef::All) => self.t_small.iter().chain(&self.t_large).copied().collect(),
        }
    }

    /// Preconditions that serde cannot express. Runs before any evaluation.
    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if self.name.trim().is_empty() {
            return Err(schema("name", "scenario name must not be empty"));
        }
        if !(d == 1 || d == 2) {
            return Err(schema("profile.dimension", format!("dimension must be 1 or 2, got {d}")));
        }
        if self.mesh.n < 8 {
            return Err(schema("mesh.n", format!("need at least 8 cells per axis, got {}", self.mesh.n)));
        }
        if let Some(b) = &self.mesh.bbox {
            if b.len() != d || b.iter().any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
                return Err(schema("mesh.box", format!("need {d} increasing finite intervals")));
            }
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(schema("epsilons", "need at least one finite ε ≥ 0"));
        }
        for (name, grid) in [("t_small", &self.t_small), ("t_large", &self.t_large)] {
            if grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(schema(name, "times must be finite and positive"));
            }
        }
        if self.checks.is_empty() {
            return Err(schema("checks", "a scenario needs at least one check"));
        }
        for (i, c) in self.checks.iter().enumerate() {
            self.validate_check(c).map_err(|m| schema(format!("checks[{i}] ({})", c.kind()), m))?;
        }
        Ok(())
    }

    fn validate_check(&self, c: &CheckSpec) -> std::result::Result<(), String> {
        let d = self.dimension();
        let positive = |ts: &[f64], what: &str| -> std::result::Result<(), String> {
            if ts.is_empty() {
                return Err(format!("{what} is empty"));
            }
            if ts.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(format!("{what} must hold finite positive times"));
            }
            Ok(())
        };
        let dim = |v: &[f64], what: &str| -> std::result::Result<(), String> {
            if v.len() != d {
                return Err(format!("{what} needs {d} coordinates, got {}", v.len()));
            }
            Ok(())
        };
        match c {
            CheckSpec::Conservation { times } => positive(&self.times(times), "times"),
            CheckSpec::Structure { t } => positive(&[*t], "t"),
            CheckSpec::Classify { .. } => Ok(()),
            CheckSpec::OffdiagonalGaussian { balls, times } => {
                if balls.len() < 2 {
                    return Err("need at least two balls".into());
                }
                for b in balls {
                    dim(&b.center, "ball center")?;
                    if !(b.radius > 0.0) {
                        return Err("ball radii must be positive".into());
                    }
                }
                positive(&self.times(times), "times")
            }
            CheckSpec::EuclideanOffdiagonal { sets, times } => {
                if sets.len() < 2 {
                    return Err("need at least two sets".into());
                }
                positive(&self.times(times), "times")
            }
            CheckSpec::WaveSpeed { center, radius, times, beyond_cut, cut_times, config } => {
                dim(center, "center")?;
                if !(*radius > 0.0) {
                    return Err("radius must be positive".into());
                }
                positive(times, "times")?;
                if beyond_cut.is_some() {
                    positive(cut_times, "cut_times")?;
                }
                if !(config.cfl_safety > 0.0 && config.cfl_safety < 1.0) {
                    return Err("cfl_safety must lie in (0, 1)".into());
                }
                Ok(())
            }
            CheckSpec::Separation { probe } => {
                if d != 1 {
                    return Err("the separation probe needs a 1D profile".into());
                }
                if probe.levels.len() < 2 {
                    return Err("need at least two refinement levels".into());
                }
                positive(&[probe.t, probe.dt], "t and dt")
            }
            CheckSpec::Invariance { t, tol, .. } => positive(&[*t, *tol], "t and tol"),
            CheckSpec::InvarianceRefinement { t, levels, .. } => {
                if levels.len() < 2 || levels.windows(2).any(|w| w[1] <= w[0]) {
                    return Err("levels must be two or more increasing cell counts".into());
                }
                positive(&[*t], "t")
            }
            CheckSpec::FormAdditivity { tol, .. } => positive(&[*tol], "tol"),
            CheckSpec::SmalltimeDecay { gamma, times, .. } => {
                let g = gamma.or(self.profile.predicted_gamma);
                match g {
                    Some(g) if g > 0.0 && g <= 1.0 => {}
                    Some(g) => return Err(format!("predicted order must lie in (0, 1], got {g}")),
                    None => return Err("no gamma given and the profile has no predicted order".into()),
                }
                let ts = self.times(times);
                positive(&ts, "times")?;
                if ts.iter().filter(|t| **t <= 0.1).count() < 2 {
                    return Err("the small-time fit needs at least two times ≤ 0.1".into());
                }
                Ok(())
            }
            CheckSpec::LargetimeFloor { mode, times, .. } => {
                positive(&self.times(times), "times")?;
                if let FloorMode::Separated { component_volume, growth } = mode {
                    if !(*component_volume > 0.0 && *growth > 0.0) {
                        return Err("component_volume and growth must be positive".into());
                    }
                }
                Ok(())
            }
            CheckSpec::ResolventVolume { origin, radii, m } => {
                dim(origin, "origin")?;
                if radii.count < 3 || !(radii.min > 0.0 && radii.min < radii.max) {
                    return Err("radii need 0 < min < max and at least three values".into());
                }
                if 4 * m <= d {
                    return Err(format!("need 4m > d for a bounded kernel, got m = {m}"));
                }
                Ok(())
            }
            CheckSpec::OndiagonalLower { t, diameter, centers, .. } => {
                if centers.is_empty() {
                    return Err("need at least one center".into());
                }
                for c in centers {
                    dim(c, "center")?;
                }
                positive(&[*t, *diameter], "t and diameter")
            }
            CheckSpec::HolderFit { range, count, tol, .. } => {
                if d != 1 {
                    return Err("the Hölder fit runs on 1D profiles".into());
                }
                if !(range[0] > 0.0 && range[0] < range[1]) || *count < 12 {
                    return Err("need 0 < range[0] < range[1] and at least 12 samples".into());
                }
                positive(&[*tol], "tol")
            }
        }
    }
}

fn position(e: &serde_json::Error) -> String {
    format!("line {}, column {}", e.line(), e.column())
}

/// Unknown check kinds are reported with the offending field path, plus the
/// parser position when one is available.
fn reject_unknown_kinds(value: &Value, typed: Option<&serde_json::Error>) -> Result<()> {
    let Some(checks) = value.get("checks").and_then(Value::as_array) else {
        return Ok(());
    };
    for (i, c) in checks.iter().enumerate() {
        match c.get("kind") {
            Some(Value::String(k)) if CHECK_KINDS.contains(&k.as_str()) => {}
            Some(Value::String(k)) => {
                let at = typed.map(|e| format!(" ({})", position(e))).unwrap_or_default();
                return Err(schema(
                    format!("checks[{i}].kind{at}"),
                    format!("unknown check `{k}`; expected one of {}", CHECK_KINDS.join(", ")),
                ));
            }
            _ => return Err(schema(format!("checks[{i}].kind"), "every check needs a string `kind`")),
        }
    }
    Ok(())
}

/// Applies `a.b.3.c=value`. Numeric segments index arrays; missing object
/// keys are created. The value parses as JSON and falls back to a string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| schema("--override", format!("expected key=value, got `{spec}`")))?;
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(schema("--override", format!("empty segment in path `{path}`")));
    }
    let mut node = root;
    for (k, seg) in segments.iter().enumerate() {
        let last = k + 1 == segments.len();
        node = match node {
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| schema(format!("--override {path}"), format!("`{seg}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| schema(format!("--override {path}"), format!("index {idx} out of range ({len})")))?
            }
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), Value::Null);
                }
                map.entry(seg.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            _ => return Err(schema(format!("--override {path}"), format!("`{seg}` descends into a scalar"))),
        };
    }
    *node = new;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "name": "tiny",
  "profile": {"dimension": 1, "family": {"kind": "power", "delta": 0.5, "centers": [0.0]}, "domain": [-1.0, 1.0]},
  "mesh": {"n": 64},
  "t_small": [0.01, 0.02],
  "checks": [{"kind": "conservation"}]
}"#;

    #[test]
    fn minimal_parses_with_defaults() {
        let s = Scenario::parse(MINIMAL, &[]).unwrap();
        assert_eq!(s.epsilons, vec![0.0]);
        assert_eq!(s.times(&Times::default()), vec![0.01, 0.02]);
    }

    #[test]
    fn unknown_kind_names_the_field() {
        let text = MINIMAL.replace("\"conservation\"", "\"foo\"");
        match Scenario::parse(&text, &[]) {
            Err(LabError::Schema { location, message }) => {
                assert!(location.starts_with("checks[0].kind"), "{location}");
                assert!(location.contains("line"), "{location}");
                assert!(message.contains("foo"));
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        match Scenario::parse("{\"name\": ", &[]) {
            Err(LabError::Schema { location, .. }) => assert!(location.starts_with("line 1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = MINIMAL.replace("\"mesh\": {\"n\": 64}", "\"mesh\": {\"n\": 64, \"cells\": 3}");
        assert!(matches!(Scenario::parse(&text, &[]), Err(LabError::Schema { .. })));
    }

    #[test]
    fn overrides_use_dotted_paths() {
        let s = Scenario::parse(MINIMAL, &["mesh.n=128".into(), "t_small.1=0.05".into(), "name=renamed".into()]).unwrap();
        assert_eq!(s.mesh.n, 128);
        assert_eq!(s.t_small, vec![0.01, 0.05]);
        assert_eq!(s.name, "renamed");
        assert!(Scenario::parse(MINIMAL, &["t_small.7=1".into()]).is_err());
        assert!(Scenario::parse(MINIMAL, &["mesh.n".into()]).is_err());
    }

    #[test]
    fn preconditions_are_checked_before_running() {
        let text = MINIMAL.replace("{\"kind\": \"conservation\"}", "{\"kind\": \"smalltime_decay\", \"gamma\": 0.5}");
        let err = Scenario::parse(&text, &["t_small=[0.5, 1.0]".into()]).unwrap_err();
        assert!(err.to_string().contains("≤ 0.1"), "{err}");
        let text = MINIMAL.replace("\"epsilons\"", "\"x\"").replace("\"mesh\"", "\"epsilons\": [-1], \"mesh\"");
        assert!(Scenario::parse(&text, &[]).is_err());
    }

    #[test]
    fn round_trip_is_stable() {
        let s = Scenario::parse(MINIMAL, &[]).unwrap();
        let again = Scenario::parse(&s.to_json().unwrap(), &[]).unwrap();
        assert_eq!(s, again);
    }
}
