//! Run configuration: a TOML file with sections `[grid]`, `[time]`,
//! `[weight]`, `[data]`, `[nonlinearity]`, `[monitors]`, `[output]` and
//! `[study]`. See `docs/config.md` for the full grammar.
//!
//! Parsing reports syntax errors with a line number; every semantic
//! violation found is collected before failing.

use std::path::PathBuf;

use serde::Deserialize;

use crate::data::{self, DataProfile, FieldData, Profile, Traveling};
use crate::error::{Error, Result};
use crate::geometry::WeightSpec;
use crate::nullform::{Block, Frame, NonlinearitySpec};
use crate::solver::Grid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitors {
    /// Ratio threshold `K` for `(E + F)/E(0)`.
    pub bootstrap_k: f64,
    /// Blow-up threshold on `max(|p|, |q|)` as a multiple of its initial value.
    pub blowup_factor: f64,
    /// Treat corrector failures as blow-up events instead of errors.
    pub blowup_events: bool,
}

impl Default for Monitors {
    fn default() -> Self {
        Self { bootstrap_k: 4.0, blowup_factor: 1e6, blowup_events: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotFormat {
    #[default]
    None,
    Csv,
    Binary,
}

impl SnapshotFormat {
    pub fn is_enabled(&self) -> bool {
        *self != SnapshotFormat::None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub snapshots: SnapshotFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), snapshots: SnapshotFormat::None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Grid rungs for `converge` (each halves `h`).
    pub refinements: usize,
    pub eps_ladder: Vec<f64>,
    /// Cap on each lifespan run.
    pub t_cap: Option<f64>,
    /// Diagonal tracked by the energy-identity check.
    pub ubar0: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { refinements: 3, eps_ladder: Vec::new(), t_cap: None, ubar0: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub t_final: f64,
    /// Steps between reports.
    pub cadence: usize,
    pub weight: WeightSpec,
    pub eps: f64,
    /// Data as run; already rescaled when `normalized` is set.
    pub data: DataProfile,
    pub normalized: bool,
    pub spec: NonlinearitySpec,
    pub monitors: Monitors,
    pub output: OutputConfig,
    pub study: StudyConfig,
    /// Accepted for compatibility; no current pipeline draws random numbers.
    pub seed: Option<u64>,
}

impl RunConfig {
    /// A config with default monitors, output and study settings.
    pub fn new(
        grid: Grid,
        t_final: f64,
        weight: WeightSpec,
        eps: f64,
        data: DataProfile,
        spec: NonlinearitySpec,
    ) -> Result<Self> {
        let cfg = Self {
            grid,
            t_final,
            cadence: 1,
            weight,
            eps,
            data,
            normalized: false,
            spec,
            monitors: Monitors::default(),
            output: OutputConfig::default(),
            study: StudyConfig::default(),
            seed: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_cadence(mut self, cadence: usize) -> Self {
        self.cadence = cadence.max(1);
        self
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_spec(mut self, spec: NonlinearitySpec) -> Self {
        self.spec = spec;
        self
    }

    pub fn with_t_final(mut self, t: f64) -> Self {
        self.t_final = t;
        self
    }

    /// Rescales the data to unit weighted norm.
    pub fn normalize(mut self) -> Result<Self> {
        if !self.normalized {
            self.data = data::normalize(&self.data, self.weight.delta())?;
            self.normalized = true;
        }
        Ok(self)
    }

    /// Same config without nonlinearity.
    pub fn linear(&self) -> Self {
        self.clone().with_spec(NonlinearitySpec::zero(self.spec.fields()))
    }

    pub fn steps(&self) -> usize {
        self.grid.steps_to(self.t_final)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        self.collect_violations(&mut errs);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(errs))
        }
    }

    fn collect_violations(&self, errs: &mut Vec<String>) {
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            errs.push(format!("time.t_final = {} must be finite and ≥ 0", self.t_final));
        }
        if self.cadence == 0 {
            errs.push("time.cadence must be ≥ 1".into());
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            errs.push(format!("data.eps = {} must be finite and ≥ 0", self.eps));
        }
        if self.data.fields.is_empty() {
            errs.push("data must declare at least one [[data.field]]".into());
        }
        if self.spec.fields() != self.data.fields.len() {
            errs.push(format!(
                "dimension mismatch: nonlinearity has {} fields but data declares {}",
                self.spec.fields(),
                self.data.fields.len()
            ));
        }
        if !(self.monitors.bootstrap_k > 0.0) {
            errs.push(format!("monitors.bootstrap_k = {} must be > 0", self.monitors.bootstrap_k));
        }
        if !(self.monitors.blowup_factor > 1.0) {
            errs.push(format!(
                "monitors.blowup_factor = {} must be > 1",
                self.monitors.blowup_factor
            ));
        }
        match data::sample(&self.data, &self.grid) {
            Ok(_) => {}
            Err(e) => errs.push(format!("data: {e}")),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<i64>,
    grid: Option<RawGrid>,
    time: Option<RawTime>,
    weight: Option<RawWeight>,
    data: Option<RawData>,
    nonlinearity: Option<RawNonlinearity>,
    monitors: Option<RawMonitors>,
    output: Option<RawOutput>,
    study: Option<RawStudy>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    x_min: Option<f64>,
    x_max: Option<f64>,
    m: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t_final: Option<f64>,
    cadence: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeight {
    delta: Option<f64>,
    unit: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    eps: Option<f64>,
    normalize: Option<bool>,
    analytic_derivatives: Option<bool>,
    field: Option<Vec<RawField>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    f: Option<RawProfile>,
    g: Option<RawProfile>,
    traveling: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    kind: String,
    center: Option<f64>,
    width: Option<f64>,
    amplitude: Option<f64>,
    radius: Option<f64>,
    level: Option<f64>,
    half_width: Option<f64>,
    taper: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNonlinearity {
    fields: Option<i64>,
    preset: Option<String>,
    coupling: Option<f64>,
    null_tolerance: Option<f64>,
    block: Option<Vec<RawBlock>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    i: i64,
    k: i64,
    l: i64,
    frame: Option<String>,
    coeffs: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMonitors {
    bootstrap_k: Option<f64>,
    blowup_factor: Option<f64>,
    blowup_events: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    snapshots: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudy {
    refinements: Option<i64>,
    eps_ladder: Option<Vec<f64>>,
    t_cap: Option<f64>,
    ubar0: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn profile_from_raw(raw: &RawProfile, at: &str, errs: &mut Vec<String>) -> Profile {
    let before = errs.len();
    let mut need = |name: &str, v: Option<f64>| match v {
        Some(v) => v,
        None => {
            errs.push(format!("{at}: kind '{}' requires '{name}'", raw.kind));
            f64::NAN
        }
    };
    let center = raw.center.unwrap_or(0.0);
    let amplitude = raw.amplitude.unwrap_or(1.0);
    let p = match raw.kind.as_str() {
        "zero" => Profile::Zero,
        "gaussian" => Profile::Gaussian { center, width: need("width", raw.width), amplitude },
        "compact_bump" => {
            Profile::CompactBump { center, radius: need("radius", raw.radius), amplitude }
        }
        "plateau" => Profile::Plateau {
            center,
            level: need("level", raw.level),
            half_width: need("half_width", raw.half_width),
            taper: need("taper", raw.taper),
        },
        other => {
            errs.push(format!(
                "{at}: unknown profile kind '{other}' (expected zero, gaussian, compact_bump, plateau)"
            ));
            return Profile::Zero;
        }
    };
    if errs.len() == before {
        if let Err(e) = p.validate() {
            errs.push(format!("{at}: {e}"));
        }
    }
    p
}

fn spec_from_raw(
    raw: Option<&RawNonlinearity>,
    data_fields: usize,
    errs: &mut Vec<String>,
) -> NonlinearitySpec {
    let Some(raw) = raw else {
        return NonlinearitySpec::zero(data_fields.max(1));
    };
    let n = match raw.fields {
        Some(v) if v >= 1 => v as usize,
        Some(v) => {
            errs.push(format!("nonlinearity.fields = {v} must be ≥ 1"));
            return NonlinearitySpec::zero(data_fields.max(1));
        }
        None => data_fields.max(1),
    };
    let tol = raw.null_tolerance.unwrap_or(0.0);
    if !(tol >= 0.0) {
        errs.push(format!("nonlinearity.null_tolerance = {tol} must be ≥ 0"));
    }
    let blocks = raw.block.as_deref().unwrap_or(&[]);
    if let Some(preset) = &raw.preset {
        if !blocks.is_empty() {
            errs.push("nonlinearity: give either 'preset' or [[nonlinearity.block]], not both".into());
        }
        let want = |need: usize, errs: &mut Vec<String>| {
            if n != need {
                errs.push(format!(
                    "dimension mismatch: preset '{preset}' has {need} field(s) but nonlinearity.fields = {n}"
                ));
            }
        };
        return match preset.as_str() {
            "linear" => NonlinearitySpec::zero(n),
            "john" => {
                want(1, errs);
                NonlinearitySpec::john()
            }
            "null" => {
                want(1, errs);
                NonlinearitySpec::single_null(raw.coupling.unwrap_or(1.0))
            }
            "antisymmetric" => {
                want(2, errs);
                NonlinearitySpec::antisymmetric_pair()
            }
            other => {
                errs.push(format!(
                    "nonlinearity.preset: unknown '{other}' (expected linear, john, null, antisymmetric)"
                ));
                NonlinearitySpec::zero(n)
            }
        };
    }
    let mut parsed = Vec::new();
    for (bi, b) in blocks.iter().enumerate() {
        let at = format!("nonlinearity.block[{}]", bi + 1);
        let mut ok = true;
        for (name, v) in [("i", b.i), ("k", b.k), ("l", b.l)] {
            if v < 1 || v as usize > n {
                errs.push(format!(
                    "dimension mismatch: {at}.{name} = {v} outside 1..={n} (fields = {n})"
                ));
                ok = false;
            }
        }
        let frame = match b.frame.as_deref().unwrap_or("cartesian") {
            "cartesian" => Frame::Cartesian,
            "null" => Frame::Null,
            other => {
                errs.push(format!("{at}.frame: unknown '{other}' (expected cartesian, null)"));
                ok = false;
                Frame::Cartesian
            }
        };
        let coeffs: [f64; 4] = match b.coeffs.as_slice().try_into() {
            Ok(c) => c,
            Err(_) => {
                errs.push(format!("{at}.coeffs must have 4 entries, got {}", b.coeffs.len()));
                ok = false;
                [0.0; 4]
            }
        };
        if ok {
            parsed.push(Block {
                i: b.i as usize - 1,
                k: b.k as usize - 1,
                l: b.l as usize - 1,
                frame,
                coeffs,
            });
        }
    }
    match NonlinearitySpec::from_blocks(n, &parsed, tol.max(0.0)) {
        Ok(s) => s,
        Err(e) => {
            errs.push(format!("nonlinearity: {e}"));
            NonlinearitySpec::zero(n)
        }
    }
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::ConfigSyntax {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let mut errs = Vec::new();

    let grid = match &raw.grid {
        None => {
            errs.push("missing section [grid]".into());
            None
        }
        Some(g) => match (g.x_min, g.x_max, g.m) {
            (Some(a), Some(b), Some(m)) => {
                if m < 0 {
                    errs.push(format!("grid.m = {m} must be positive"));
                    None
                } else {
                    Grid::new(a, b, m as usize).map_err(|e| errs.push(format!("grid: {e}"))).ok()
                }
            }
            _ => {
                errs.push("grid requires x_min, x_max and m".into());
                None
            }
        },
    };

    let (t_final, cadence) = match &raw.time {
        None => {
            errs.push("missing section [time]".into());
            (0.0, 1)
        }
        Some(t) => {
            let tf = t.t_final.unwrap_or_else(|| {
                errs.push("time.t_final is required".into());
                0.0
            });
            let c = t.cadence.unwrap_or(1);
            if c < 1 {
                errs.push(format!("time.cadence = {c} must be ≥ 1"));
            }
            (tf, c.max(1) as usize)
        }
    };

    let weight = match &raw.weight {
        None => {
            errs.push("missing section [weight]".into());
            None
        }
        Some(w) if w.unit == Some(true) => Some(WeightSpec::unit()),
        Some(w) => match w.delta {
            None => {
                errs.push("weight.delta is required".into());
                None
            }
            Some(d) => match WeightSpec::new(d) {
                Ok(ws) => Some(ws),
                Err(_) => {
                    errs.push(format!("weight.delta = {d} must lie in the open interval (0, 1)"));
                    None
                }
            },
        },
    };

    let rd = raw.data.as_ref();
    let eps = rd.and_then(|d| d.eps).unwrap_or(1.0);
    let normalize = rd.and_then(|d| d.normalize).unwrap_or(false);
    let raw_fields = rd.and_then(|d| d.field.as_deref()).unwrap_or(&[]);
    if raw_fields.is_empty() {
        errs.push("data must declare at least one [[data.field]]".into());
    }
    let mut fields = Vec::new();
    for (fi, rf) in raw_fields.iter().enumerate() {
        let at = format!("data.field[{}]", fi + 1);
        let traveling = match rf.traveling.as_deref().unwrap_or("none") {
            "none" => Traveling::None,
            "right" => Traveling::Right,
            "left" => Traveling::Left,
            other => {
                errs.push(format!("{at}.traveling: unknown '{other}' (expected none, right, left)"));
                Traveling::None
            }
        };
        let f = rf.f.as_ref().map_or(Profile::Zero, |p| profile_from_raw(p, &format!("{at}.f"), &mut errs));
        let g = rf.g.as_ref().map_or(Profile::Zero, |p| profile_from_raw(p, &format!("{at}.g"), &mut errs));
        if traveling != Traveling::None && rf.g.is_some() {
            errs.push(format!("{at}: 'g' cannot be given for a traveling field"));
        }
        fields.push(FieldData { f, g, traveling });
    }
    let mut data = DataProfile::new(fields);
    data.analytic_derivatives = rd.and_then(|d| d.analytic_derivatives).unwrap_or(true);

    let spec = spec_from_raw(raw.nonlinearity.as_ref(), data.fields.len(), &mut errs);

    let mut monitors = Monitors::default();
    if let Some(m) = &raw.monitors {
        monitors.bootstrap_k = m.bootstrap_k.unwrap_or(monitors.bootstrap_k);
        monitors.blowup_factor = m.blowup_factor.unwrap_or(monitors.blowup_factor);
        monitors.blowup_events = m.blowup_events.unwrap_or(monitors.blowup_events);
    }

    let mut output = OutputConfig::default();
    if let Some(o) = &raw.output {
        if let Some(d) = &o.dir {
            output.dir = PathBuf::from(d);
        }
        output.snapshots = match o.snapshots.as_deref().unwrap_or("none") {
            "none" => SnapshotFormat::None,
            "csv" => SnapshotFormat::Csv,
            "binary" => SnapshotFormat::Binary,
            other => {
                errs.push(format!("output.snapshots: unknown '{other}' (expected none, csv, binary)"));
                SnapshotFormat::None
            }
        };
    }

    let mut study = StudyConfig::default();
    if let Some(s) = &raw.study {
        if let Some(r) = s.refinements {
            if r < 2 {
                errs.push(format!("study.refinements = {r} must be ≥ 2"));
            }
            study.refinements = r.max(2) as usize;
        }
        study.eps_ladder = s.eps_ladder.clone().unwrap_or_default();
        study.t_cap = s.t_cap;
        study.ubar0 = s.ubar0.unwrap_or(0.0);
    }

    let seed = match raw.seed {
        Some(s) if s < 0 => {
            errs.push(format!("seed = {s} must be ≥ 0"));
            None
        }
        s => s.map(|v| v as u64),
    };

    let (Some(grid), Some(weight)) = (grid, weight) else {
        if !(t_final >= 0.0 && t_final.is_finite()) {
            errs.push(format!("time.t_final = {t_final} must be finite and ≥ 0"));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            errs.push(format!("data.eps = {eps} must be finite and ≥ 0"));
        }
        return Err(Error::ConfigInvalid(errs));
    };
    if normalize && weight.is_unit() {
        errs.push("data.normalize requires a weighted run (weight.unit = false)".into());
    }
    let mut cfg = RunConfig {
        grid,
        t_final,
        cadence,
        weight,
        eps,
        data,
        normalized: false,
        spec,
        monitors,
        output,
        study,
        seed,
    };
    if normalize && !weight.is_unit() && errs.is_empty() {
        match cfg.clone().normalize() {
            Ok(c) => cfg = c,
            Err(e) => errs.push(format!("data.normalize: {e}")),
        }
    }
    cfg.collect_violations(&mut errs);
    let mut seen = std::collections::HashSet::new();
    errs.retain(|e| seen.insert(e.clone()));
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::ConfigInvalid(errs))
    }
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
