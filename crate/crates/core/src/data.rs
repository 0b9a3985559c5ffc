//! Initial-data profiles, grid sampling and the weighted Sobolev norm
//!
//! ```text
//! ‖(F, G)‖ = ∫ (1+|x|)^{2+2δ} (|F'|² + |F''|² + |G|² + |G'|²) dx
//! ```
//!
//! summed over fields. `normalize` rescales data to unit norm so that the
//! amplitude parameter `ε` enters only through `solver::initialize`.

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::solver::Grid;

/// Relative threshold below which a sample counts as outside the support.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Cells at each end of the grid that must be free of data.
pub const BOUNDARY_MARGIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Zero,
    /// `a exp(-((x-c)/w)²)`
    Gaussian { center: f64, width: f64, amplitude: f64 },
    /// `a (1 - s²)^6` for `|s| < 1`, `s = (x-c)/r`.
    CompactBump { center: f64, radius: f64, amplitude: f64 },
    /// `level` on `|x-c| ≤ half_width`, tapering smoothly to zero over
    /// `taper` (septic smootherstep, C³).
    Plateau { center: f64, level: f64, half_width: f64, taper: f64 },
}

fn smootherstep(s: f64) -> (f64, f64, f64) {
    // τ = 35s⁴ − 84s⁵ + 70s⁶ − 20s⁷
    let s2 = s * s;
    let r = 1.0 - s;
    let v = s2 * s2 * (35.0 - 84.0 * s + 70.0 * s2 - 20.0 * s2 * s);
    let d1 = 140.0 * s2 * s * r * r * r;
    let d2 = 420.0 * s2 * r * r * (1.0 - 2.0 * s);
    (v, d1, d2)
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Profile::Zero => true,
            Profile::Gaussian { center, width, amplitude } => {
                center.is_finite() && amplitude.is_finite() && width > 0.0 && width.is_finite()
            }
            Profile::CompactBump { center, radius, amplitude } => {
                center.is_finite() && amplitude.is_finite() && radius > 0.0 && radius.is_finite()
            }
            Profile::Plateau { center, level, half_width, taper } => {
                center.is_finite()
                    && level.is_finite()
                    && half_width >= 0.0
                    && half_width.is_finite()
                    && taper > 0.0
                    && taper.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid profile parameters {self:?}")))
        }
    }

    /// Value, first and second derivative at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match *self {
            Profile::Zero => (0.0, 0.0, 0.0),
            Profile::Gaussian { center, width, amplitude } => {
                let z = (x - center) / width;
                let v = amplitude * (-z * z).exp();
                (v, -2.0 * z * v / width, (4.0 * z * z - 2.0) * v / (width * width))
            }
            Profile::CompactBump { center, radius, amplitude } => {
                let s = (x - center) / radius;
                if s.abs() >= 1.0 {
                    return (0.0, 0.0, 0.0);
                }
                let r = 1.0 - s * s;
                let r4 = r * r * r * r;
                let v = amplitude * r4 * r * r;
                let d1 = amplitude * -12.0 * s * r4 * r / radius;
                let d2 = amplitude * (-12.0 * r4 * r + 120.0 * s * s * r4) / (radius * radius);
                (v, d1, d2)
            }
            Profile::Plateau { center, level, half_width, taper } => {
                let d = x - center;
                let dist = d.abs();
                if dist <= half_width {
                    (level, 0.0, 0.0)
                } else if dist >= half_width + taper {
                    (0.0, 0.0, 0.0)
                } else {
                    let (t, t1, t2) = smootherstep((dist - half_width) / taper);
                    (
                        level * (1.0 - t),
                        -level * t1 * d.signum() / taper,
                        -level * t2 / (taper * taper),
                    )
                }
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// Closed-form antiderivative `∫_{-∞}^x`, when one is available.
    pub fn antiderivative(&self, x: f64) -> Option<f64> {
        match *self {
            Profile::Zero => Some(0.0),
            Profile::Gaussian { center, width, amplitude } => {
                let z = (x - center) / width;
                Some(amplitude * width * std::f64::consts::PI.sqrt() * 0.5 * (1.0 + libm::erf(z)))
            }
            _ => None,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            Profile::Zero => Profile::Zero,
            Profile::Gaussian { center, width, amplitude } => {
                Profile::Gaussian { center, width, amplitude: amplitude * c }
            }
            Profile::CompactBump { center, radius, amplitude } => {
                Profile::CompactBump { center, radius, amplitude: amplitude * c }
            }
            Profile::Plateau { center, level, half_width, taper } => {
                Profile::Plateau { center, level: level * c, half_width, taper }
            }
        }
    }

    /// Interval outside of which the profile is zero or below
    /// `1e-40 × |amplitude|`. `None` for the zero profile.
    pub fn extent(&self) -> Option<(f64, f64)> {
        match *self {
            Profile::Zero => None,
            Profile::Gaussian { center, width, .. } => {
                let r = width * (40.0 * std::f64::consts::LN_10).sqrt();
                Some((center - r, center + r))
            }
            Profile::CompactBump { center, radius, .. } => Some((center - radius, center + radius)),
            Profile::Plateau { center, half_width, taper, .. } => {
                Some((center - half_width - taper, center + half_width + taper))
            }
        }
    }

    /// Points where the profile changes its analytic form.
    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Profile::Zero => vec![],
            Profile::Gaussian { center, .. } => vec![center],
            Profile::CompactBump { center, radius, .. } => {
                vec![center - radius, center, center + radius]
            }
            Profile::Plateau { center, half_width, taper, .. } => vec![
                center - half_width - taper,
                center - half_width,
                center + half_width,
                center + half_width + taper,
            ],
        }
    }

    pub fn is_plateau(&self) -> bool {
        matches!(self, Profile::Plateau { .. })
    }
}

/// How `G` is obtained for one field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Traveling {
    /// `G` is its own profile.
    #[default]
    None,
    /// `G = -F'`: the solution is `F(x - t)`, so `LΦ ≡ 0`.
    Right,
    /// `G = F'`: the solution is `F(x + t)`, so `L̄Φ ≡ 0`.
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldData {
    pub f: Profile,
    pub g: Profile,
    pub traveling: Traveling,
}

impl FieldData {
    pub fn new(f: Profile, g: Profile) -> Self {
        Self { f, g, traveling: Traveling::None }
    }

    pub fn traveling(f: Profile, direction: Traveling) -> Self {
        Self { f, g: Profile::Zero, traveling: direction }
    }

    /// `(F', F'', G, G')` at `x`.
    pub fn norm_terms(&self, x: f64) -> (f64, f64, f64, f64) {
        let (_, f1, f2) = self.f.eval(x);
        match self.traveling {
            Traveling::None => {
                let (g, g1, _) = self.g.eval(x);
                (f1, f2, g, g1)
            }
            Traveling::Right => (f1, f2, -f1, -f2),
            Traveling::Left => (f1, f2, f1, f2),
        }
    }

    /// `(G, G')` at `x`.
    pub fn g_eval(&self, x: f64) -> (f64, f64) {
        let t = self.norm_terms(x);
        (t.2, t.3)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { f: self.f.scaled(c), g: self.g.scaled(c), traveling: self.traveling }
    }

    fn profiles(&self) -> impl Iterator<Item = &Profile> {
        let g = if self.traveling == Traveling::None { Some(&self.g) } else { None };
        std::iter::once(&self.f).chain(g)
    }
}

/// Per-field initial data `(F, G)` for an `n`-field system.
#[derive(Debug, Clone, PartialEq)]
pub struct DataProfile {
    pub fields: Vec<FieldData>,
    /// Use closed-form derivatives; otherwise fourth-order differences of the
    /// sampled values.
    pub analytic_derivatives: bool,
}

impl DataProfile {
    pub fn new(fields: Vec<FieldData>) -> Self {
        Self { fields, analytic_derivatives: true }
    }

    pub fn single(f: Profile, g: Profile) -> Self {
        Self::new(vec![FieldData::new(f, g)])
    }

    pub fn zero(n: usize) -> Self {
        Self::new(vec![FieldData::new(Profile::Zero, Profile::Zero); n])
    }

    pub fn validate(&self) -> Result<()> {
        for fd in &self.fields {
            fd.f.validate()?;
            fd.g.validate()?;
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            fields: self.fields.iter().map(|f| f.scaled(c)).collect(),
            analytic_derivatives: self.analytic_derivatives,
        }
    }

    /// Plateau data violates the decay hypothesis; runs using it are flagged.
    pub fn is_theorem_regime(&self) -> bool {
        !self.fields.iter().any(|f| f.profiles().any(Profile::is_plateau))
    }

    /// Largest plateau level in any `G`, used for the spatially homogeneous
    /// reduction.
    pub fn plateau_velocity(&self) -> Option<f64> {
        self.fields
            .iter()
            .filter(|f| f.traveling == Traveling::None)
            .filter_map(|f| match f.g {
                Profile::Plateau { level, .. } => Some(level),
                _ => None,
            })
            .reduce(f64::max)
    }
}

/// Grid samples; each `Vec` holds one array per field.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledData {
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub df: Vec<Vec<f64>>,
    pub dg: Vec<Vec<f64>>,
}

impl SampledData {
    pub fn fields(&self) -> usize {
        self.f.len()
    }

    /// Errors if any of `F`, `F'`, `G` is nonzero (relative to the largest
    /// sample) in the outer `BOUNDARY_MARGIN` cells at either end.
    pub fn check_margin(&self) -> Result<()> {
        let all = || self.f.iter().chain(&self.g).chain(&self.df);
        let peak = all().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        if peak == 0.0 {
            return Ok(());
        }
        let tol = SUPPORT_TOL * peak;
        for arr in all() {
            let m = arr.len();
            let edge = arr[..BOUNDARY_MARGIN].iter().chain(&arr[m - BOUNDARY_MARGIN..]);
            if let Some(v) = edge.copied().find(|v| v.abs() > tol) {
                return Err(Error::Margin {
                    t: 0.0,
                    detail: format!(
                        "initial data reaches the outer {BOUNDARY_MARGIN} cells (|value| = {v:e})"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Fourth-order centered difference, second order in the two edge cells.
pub fn fourth_order_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let m = v.len();
    let mut d = vec![0.0; m];
    if m < 3 {
        return d;
    }
    for j in 2..m.saturating_sub(2) {
        d[j] = (v[j - 2] - 8.0 * v[j - 1] + 8.0 * v[j + 1] - v[j + 2]) / (12.0 * h);
    }
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d[m - 1] = (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) / (2.0 * h);
    if m >= 4 {
        d[1] = (v[2] - v[0]) / (2.0 * h);
        d[m - 2] = (v[m - 1] - v[m - 3]) / (2.0 * h);
    }
    d
}

pub fn sample(profile: &DataProfile, grid: &Grid) -> Result<SampledData> {
    profile.validate()?;
    let xs: Vec<f64> = (0..grid.m).map(|j| grid.x(j)).collect();
    let n = profile.fields.len();
    let mut out = SampledData {
        f: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
        df: Vec::with_capacity(n),
        dg: Vec::with_capacity(n),
    };
    for fd in &profile.fields {
        let fe: Vec<_> = xs.iter().map(|&x| fd.f.eval(x)).collect();
        let f: Vec<f64> = fe.iter().map(|e| e.0).collect();
        let (df, g, dg) = if profile.analytic_derivatives {
            let df: Vec<f64> = fe.iter().map(|e| e.1).collect();
            let (g, dg): (Vec<f64>, Vec<f64>) = xs.iter().map(|&x| fd.g_eval(x)).unzip();
            (df, g, dg)
        } else {
            let df = fourth_order_derivative(&f, grid.h);
            let g: Vec<f64> = match fd.traveling {
                Traveling::None => xs.iter().map(|&x| fd.g.value(x)).collect(),
                Traveling::Right => df.iter().map(|v| -v).collect(),
                Traveling::Left => df.clone(),
            };
            let dg = fourth_order_derivative(&g, grid.h);
            (df, g, dg)
        };
        out.f.push(f);
        out.g.push(g);
        out.df.push(df);
        out.dg.push(dg);
    }
    out.check_margin()?;
    Ok(out)
}

/// `∫ (1+|x|)^{2+2δ} integrand(x) dx` over ℝ.
///
/// `core` must contain every feature of the integrand; beyond it the
/// integral is extended over doubling intervals until the last one adds
/// less than the tolerance. `breakpoints` are extra interior split points.
pub fn weighted_integral<F: Fn(f64) -> f64>(
    integrand: F,
    delta: f64,
    core: (f64, f64),
    breakpoints: &[f64],
) -> Result<f64> {
    const REL: f64 = 1e-8;
    const MAX_DOUBLINGS: usize = 60;
    let weighted = |x: f64| {
        let v = integrand(x);
        if v == 0.0 {
            0.0
        } else {
            (1.0 + x.abs()).powf(2.0 + 2.0 * delta) * v
        }
    };
    let tol = Tolerance::new(1e-300, REL * 1e-2);

    let (lo, hi) = core;
    let mut pts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .chain([lo, hi, 0.0])
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = quadrature::integrate_piecewise(&weighted, &pts, tol)?;

    let span = (hi - lo).max(1.0);
    for side in [-1.0, 1.0] {
        let mut a = if side > 0.0 { hi } else { lo };
        let mut width = span;
        let mut converged = false;
        for _ in 0..MAX_DOUBLINGS {
            let b = a + side * width;
            let piece = quadrature::integrate(&weighted, a, b, tol)?.abs();
            total += piece;
            if piece <= 1e-2 * REL * total.abs() || (piece == 0.0 && total == 0.0) {
                converged = true;
                break;
            }
            a = b;
            width *= 2.0;
        }
        if !converged {
            return Err(Error::HypothesisViolation(format!(
                "tail contributions do not decay past |x| = {:e}",
                a.abs()
            )));
        }
    }
    Ok(total)
}

pub fn weighted_sobolev_norm(profile: &DataProfile, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    profile.validate()?;
    let mut core: Option<(f64, f64)> = None;
    let mut breaks = Vec::new();
    for fd in &profile.fields {
        for p in fd.profiles() {
            if let Some((a, b)) = p.extent() {
                core = Some(match core {
                    None => (a, b),
                    Some((lo, hi)) => (lo.min(a), hi.max(b)),
                });
            }
            breaks.extend(p.breakpoints());
        }
    }
    let Some(core) = core else {
        return Ok(0.0);
    };
    let integrand = |x: f64| {
        profile
            .fields
            .iter()
            .map(|fd| {
                let (a, b, c, d) = fd.norm_terms(x);
                a * a + b * b + c * c + d * d
            })
            .sum::<f64>()
    };
    weighted_integral(integrand, delta, core, &breaks)
}

/// Rescales `(F, G)` by `norm^{-1/2}` so that the weighted norm becomes 1.
pub fn normalize(profile: &DataProfile, delta: f64) -> Result<DataProfile> {
    let norm = weighted_sobolev_norm(profile, delta)?;
    if norm == 0.0 {
        return Err(Error::DegenerateData("cannot normalize data with zero norm".into()));
    }
    Ok(profile.scaled(norm.sqrt().recip()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(c: f64, w: f64, a: f64) -> Profile {
        Profile::Gaussian { center: c, width: w, amplitude: a }
    }

    #[test]
    fn sample_examples() {
        let grid = Grid::new(-20.0, 20.0, 401).unwrap();
        let zero = sample(&DataProfile::zero(2), &grid).unwrap();
        assert!(zero.f.iter().chain(&zero.g).flatten().all(|&v| v == 0.0));

        let s = sample(&DataProfile::single(gauss(0.0, 1.0, 1.0), Profile::Zero), &grid).unwrap();
        assert_eq!(s.f[0][200], 1.0);
        assert_eq!(s.df[0][200], 0.0);

        let plateau = Profile::Plateau { center: 0.0, level: 0.2, half_width: 15.0, taper: 2.0 };
        let grid = Grid::new(-40.0, 40.0, 801).unwrap();
        let s = sample(&DataProfile::single(Profile::Zero, plateau), &grid).unwrap();
        for j in 0..grid.m {
            if grid.x(j).abs() <= 15.0 {
                assert_eq!(s.g[0][j], 0.2);
            }
        }
    }

    #[test]
    fn margin_violation() {
        let grid = Grid::new(-5.0, 5.0, 101).unwrap();
        let err = sample(&DataProfile::single(gauss(4.9, 1.0, 1.0), Profile::Zero), &grid);
        assert!(matches!(err, Err(Error::Margin { .. })));
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let bump = Profile::CompactBump { center: 0.3, radius: 2.0, amplitude: 1.5 };
        let plateau = Profile::Plateau { center: -0.5, level: 0.7, half_width: 1.0, taper: 1.5 };
        for p in [gauss(0.2, 0.8, 2.0), bump, plateau] {
            let h = 1e-5;
            for i in 0..200 {
                let x = -4.0 + 0.0401 * i as f64;
                let (_, d1, d2) = p.eval(x);
                let fd1 = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
                let fd2 = (p.eval(x + h).1 - p.eval(x - h).1) / (2.0 * h);
                assert!((d1 - fd1).abs() < 1e-6, "{p:?} at {x}: {d1} vs {fd1}");
                assert!((d2 - fd2).abs() < 1e-5, "{p:?} at {x}: {d2} vs {fd2}");
            }
        }
    }

    #[test]
    fn gaussian_antiderivative() {
        let p = gauss(1.0, 2.0, 3.0);
        let total = p.antiderivative(50.0).unwrap();
        assert!((total - 3.0 * 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let half = p.antiderivative(1.0).unwrap();
        assert!((half - 0.5 * total).abs() < 1e-12);
    }

    #[test]
    fn fourth_order_differences() {
        let h = 0.01;
        let v: Vec<f64> = (0..500).map(|j| (j as f64 * h).sin()).collect();
        let d = fourth_order_derivative(&v, h);
        for j in 2..498 {
            assert!((d[j] - (j as f64 * h).cos()).abs() < 1e-9);
        }
        let sampled = sample(
            &DataProfile {
                fields: vec![FieldData::traveling(gauss(0.0, 1.0, 1.0), Traveling::Right)],
                analytic_derivatives: false,
            },
            &Grid::new(-10.0, 10.0, 2001).unwrap(),
        )
        .unwrap();
        for j in 0..2001 {
            assert!((sampled.g[0][j] + sampled.df[0][j]).abs() == 0.0);
        }
    }

    #[test]
    fn norm_of_zero_and_homogeneity() {
        assert_eq!(weighted_sobolev_norm(&DataProfile::zero(2), 0.5).unwrap(), 0.0);
        let d = DataProfile::single(gauss(0.5, 1.3, 1.0), gauss(-1.0, 0.7, -0.4));
        let n1 = weighted_sobolev_norm(&d, 0.3).unwrap();
        let n3 = weighted_sobolev_norm(&d.scaled(3.0), 0.3).unwrap();
        assert!((n3 - 9.0 * n1).abs() < 1e-7 * n3);
    }

    #[test]
    fn normalize_examples() {
        let d = DataProfile::single(gauss(0.0, 1.0, 1.0), Profile::Zero);
        let norm = weighted_sobolev_norm(&d, 0.5).unwrap();
        // scale to norm 4
        let d4 = d.scaled((4.0 / norm).sqrt());
        let n4 = normalize(&d4, 0.5).unwrap();
        match (n4.fields[0].f, d4.fields[0].f) {
            (Profile::Gaussian { amplitude: a, .. }, Profile::Gaussian { amplitude: b, .. }) => {
                assert!((a / b - 0.5).abs() < 1e-8)
            }
            _ => unreachable!(),
        }
        let unit = normalize(&d, 0.5).unwrap();
        let again = normalize(&unit, 0.5).unwrap();
        assert!((weighted_sobolev_norm(&again, 0.5).unwrap() - 1.0).abs() < 1e-6);
        assert!(matches!(normalize(&DataProfile::zero(1), 0.5), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn divergent_integrand_is_rejected() {
        let e = weighted_integral(|_| 1.0, 0.5, (-1.0, 1.0), &[]);
        assert!(matches!(e, Err(Error::HypothesisViolation(_))));
        let e = weighted_integral(|x: f64| (1.0 + x * x).powf(-1.0), 0.5, (-1.0, 1.0), &[]);
        assert!(matches!(e, Err(Error::HypothesisViolation(_))));
    }

    #[test]
    fn theorem_regime_flag() {
        let plateau = Profile::Plateau { center: 0.0, level: 0.2, half_width: 15.0, taper: 2.0 };
        assert!(!DataProfile::single(Profile::Zero, plateau).is_theorem_regime());
        assert!(DataProfile::single(gauss(0.0, 1.0, 1.0), Profile::Zero).is_theorem_regime());
        assert_eq!(DataProfile::single(Profile::Zero, plateau).plateau_velocity(), Some(0.2));
    }
}
