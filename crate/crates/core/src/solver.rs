//! Characteristic-grid integrator for `LL̄Φ = N(p, q)`.
//!
//! The unknowns are `Φ`, `p = LΦ` and `q = L̄Φ`. Since `L` and `L̄`
//! commute, the second-order system splits into two transport equations
//! with a common source,
//!
//! ```text
//! L̄p = N,   Lq = N,   ∂_tΦ = (p + q)/2,
//! ```
//!
//! With `dt = h` the characteristics of `L̄` (left-going) and `L`
//! (right-going) are the grid diagonals, so `p` is carried from cell `j+1`
//! and `q` from cell `j-1` without interpolation. The source is integrated
//! by the trapezoid rule; the implicit half is solved per cell by Newton's
//! method (the cell equations couple only the `2n` unknowns of that cell).

use crate::config::RunConfig;
use crate::data::{self, FieldData, SampledData, Traveling, BOUNDARY_MARGIN, SUPPORT_TOL};
use crate::energy::{Accumulators, EnergyReport, SliceFields};
use crate::error::{Error, Result};
use crate::geometry::WeightSpec;
use crate::nullform::NonlinearitySpec;
use crate::quadrature::{self, Tolerance};

pub const CORRECTOR_TOL: f64 = 1e-12;
pub const CORRECTOR_MAX_ITER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub m: usize,
    pub h: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, m: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::Domain(format!("invalid interval [{x_min}, {x_max}]")));
        }
        if m < 3 {
            return Err(Error::Domain(format!("grid needs at least 3 points, got {m}")));
        }
        let h = (x_max - x_min) / (m - 1) as f64;
        Ok(Self { x_min, x_max, m, h })
    }

    /// Grid point `j`; endpoints are exact and mirror points are exact
    /// negatives on a symmetric interval.
    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        let n = (self.m - 1) as f64;
        let j = j as f64;
        (self.x_min * (n - j) + self.x_max * j) / n
    }

    pub fn dt(&self) -> f64 {
        self.h
    }

    /// Same interval with half the spacing.
    pub fn refined(&self) -> Self {
        Self::new(self.x_min, self.x_max, 2 * (self.m - 1) + 1).unwrap()
    }

    /// Number of whole steps that reach `t_final` (rounded to the nearest
    /// step when within 1e-9 relative, otherwise up).
    pub fn steps_to(&self, t_final: f64) -> usize {
        let r = t_final / self.h;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.abs().max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSlice {
    pub phi: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl FieldSlice {
    fn zeros(m: usize) -> Self {
        Self { phi: vec![0.0; m], p: vec![0.0; m], q: vec![0.0; m] }
    }
}

/// One time slice `t = step · h`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicState {
    pub t: f64,
    pub step: usize,
    pub fields: Vec<FieldSlice>,
}

impl CharacteristicState {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { t: 0.0, step: 0, fields: vec![FieldSlice::zeros(m); n] }
    }

    pub fn m(&self) -> usize {
        self.fields.first().map_or(0, |f| f.p.len())
    }

    /// `max |p|, |q|` over all fields and cells.
    pub fn peak(&self) -> f64 {
        self.fields
            .iter()
            .flat_map(|f| f.p.iter().chain(&f.q))
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// `Φ = εF`, `p = εG + εF'`, `q = εG - εF'`.
pub fn initialize(grid: &Grid, data: &SampledData, eps: f64) -> Result<CharacteristicState> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps must be finite and ≥ 0, got {eps}")));
    }
    for arrs in [&data.f, &data.g, &data.df] {
        for a in arrs.iter() {
            if a.len() != grid.m {
                return Err(Error::Dimension { expected: grid.m, got: a.len() });
            }
        }
    }
    data.check_margin()?;
    let fields = (0..data.fields())
        .map(|k| {
            let (f, g, df) = (&data.f[k], &data.g[k], &data.df[k]);
            FieldSlice {
                phi: f.iter().map(|v| eps * v).collect(),
                p: g.iter().zip(df).map(|(g, d)| eps * g + eps * d).collect(),
                q: g.iter().zip(df).map(|(g, d)| eps * g - eps * d).collect(),
            }
        })
        .collect();
    Ok(CharacteristicState { t: 0.0, step: 0, fields })
}

/// Per-field `∂_x p = L∂_xΦ` and `∂_x q = L̄∂_xΦ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDerivatives {
    pub dp: Vec<f64>,
    pub dq: Vec<f64>,
}

/// Second-order centered difference; one-sided second order at the edges.
pub fn centered_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let m = v.len();
    let mut d = vec![0.0; m];
    let inv = 0.5 / h;
    for j in 1..m - 1 {
        d[j] = (v[j + 1] - v[j - 1]) * inv;
    }
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv;
    d[m - 1] = (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) * inv;
    d
}

pub fn commuted_derivatives(state: &CharacteristicState, grid: &Grid) -> Vec<FieldDerivatives> {
    state
        .fields
        .iter()
        .map(|f| FieldDerivatives {
            dp: centered_derivative(&f.p, grid.h),
            dq: centered_derivative(&f.q, grid.h),
        })
        .collect()
}

/// Scratch space for [`step`].
#[derive(Debug, Default)]
pub struct Stepper {
    nl_old: Vec<f64>,
    pj: Vec<f64>,
    qj: Vec<f64>,
    nl: Vec<f64>,
    jp: Vec<f64>,
    jq: Vec<f64>,
    mat: Vec<f64>,
    rhs: Vec<f64>,
    // Iterations used by the last step, summed over cells.
    pub corrector_iterations: usize,
}

impl Stepper {
    pub fn new() -> Self {
        Self::default()
    }

    /// Nonlinearity at every cell of the slice passed to the last [`step`](Self::step),
    /// laid out `[j * n + i]`.
    pub fn last_source(&self) -> &[f64] {
        &self.nl_old
    }

    pub fn step(
        &mut self,
        state: &CharacteristicState,
        spec: &NonlinearitySpec,
        grid: &Grid,
    ) -> Result<CharacteristicState> {
        let n = state.fields.len();
        let m = grid.m;
        if spec.fields() != n {
            return Err(Error::Dimension { expected: n, got: spec.fields() });
        }
        if state.m() != m {
            return Err(Error::Dimension { expected: m, got: state.m() });
        }
        let h = grid.h;
        let half = 0.5 * h;
        let t_new = (state.step + 1) as f64 * h;
        let mut next = CharacteristicState {
            t: t_new,
            step: state.step + 1,
            fields: vec![FieldSlice::zeros(m); n],
        };

        self.nl_old.clear();
        self.nl_old.resize(n * m, 0.0);
        self.corrector_iterations = 0;

        if spec.is_zero() {
            for (old, new) in state.fields.iter().zip(&mut next.fields) {
                new.p[..m - 1].copy_from_slice(&old.p[1..]);
                new.q[1..].copy_from_slice(&old.q[..m - 1]);
            }
        } else {
            self.pj.resize(n, 0.0);
            self.qj.resize(n, 0.0);
            self.nl.resize(n, 0.0);
            for j in 0..m {
                for (k, f) in state.fields.iter().enumerate() {
                    self.pj[k] = f.p[j];
                    self.qj[k] = f.q[j];
                }
                spec.evaluate_into(&self.pj, &self.qj, &mut self.nl_old[j * n..(j + 1) * n]);
            }
            let mut ap = vec![0.0; n];
            let mut aq = vec![0.0; n];
            let mut z = vec![0.0; 2 * n];
            for j in 0..m {
                for (k, f) in state.fields.iter().enumerate() {
                    ap[k] = if j + 1 < m {
                        f.p[j + 1] + half * self.nl_old[(j + 1) * n + k]
                    } else {
                        0.0
                    };
                    aq[k] = if j >= 1 {
                        f.q[j - 1] + half * self.nl_old[(j - 1) * n + k]
                    } else {
                        0.0
                    };
                }
                z[..n].copy_from_slice(&ap);
                z[n..].copy_from_slice(&aq);
                self.solve_cell(spec, half, &ap, &aq, &mut z, t_new, j)?;
                for (k, f) in next.fields.iter_mut().enumerate() {
                    f.p[j] = z[k];
                    f.q[j] = z[n + k];
                }
            }
        }

        let quarter = 0.25 * h;
        for (old, new) in state.fields.iter().zip(&mut next.fields) {
            for j in 0..m {
                new.phi[j] = old.phi[j] + quarter * ((old.p[j] + old.q[j]) + (new.p[j] + new.q[j]));
            }
            let bad = new
                .p
                .iter()
                .chain(&new.q)
                .chain(&new.phi)
                .position(|v| !v.is_finite());
            if let Some(pos) = bad {
                return Err(Error::NumericalFailure {
                    t: t_new,
                    detail: format!("non-finite value at cell {}", pos % m),
                });
            }
        }
        Ok(next)
    }

    /// Newton iteration for `z_p = ap + (h/2)N(z)`, `z_q = aq + (h/2)N(z)`.
    #[allow(clippy::too_many_arguments)]
    fn solve_cell(
        &mut self,
        spec: &NonlinearitySpec,
        half: f64,
        ap: &[f64],
        aq: &[f64],
        z: &mut [f64],
        t: f64,
        cell: usize,
    ) -> Result<()> {
        let n = ap.len();
        let dim = 2 * n;
        self.jp.resize(n * n, 0.0);
        self.jq.resize(n * n, 0.0);
        self.mat.resize(dim * dim, 0.0);
        self.rhs.resize(dim, 0.0);
        let mut change = f64::INFINITY;
        for _ in 0..CORRECTOR_MAX_ITER {
            self.corrector_iterations += 1;
            let (zp, zq) = z.split_at(n);
            spec.evaluate_into(zp, zq, &mut self.nl);
            spec.jacobian_into(zp, zq, &mut self.jp, &mut self.jq);
            for a in 0..n {
                self.rhs[a] = -(zp[a] - ap[a] - half * self.nl[a]);
                self.rhs[n + a] = -(zq[a] - aq[a] - half * self.nl[a]);
            }
            for row in 0..dim {
                let i = row % n;
                for col in 0..dim {
                    let d = if col < n { self.jp[i * n + col] } else { self.jq[i * n + col - n] };
                    let id = if row == col { 1.0 } else { 0.0 };
                    self.mat[row * dim + col] = id - half * d;
                }
            }
            if !gauss_solve(&mut self.mat, &mut self.rhs, dim) {
                return Err(Error::NumericalFailure {
                    t,
                    detail: format!("singular corrector system at cell {cell}"),
                });
            }
            change = 0.0;
            for (zi, di) in z.iter_mut().zip(&self.rhs) {
                *zi += di;
                change = change.max(di.abs());
            }
            if !change.is_finite() {
                return Err(Error::NumericalFailure {
                    t,
                    detail: format!("corrector diverged at cell {cell}"),
                });
            }
            if change <= CORRECTOR_TOL {
                return Ok(());
            }
        }
        Err(Error::StepFailure { t, cell, change })
    }
}

/// In-place Gaussian elimination with partial pivoting; solution in `b`.
fn gauss_solve(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &k| a[i * n + col].abs().total_cmp(&a[k * n + col].abs()))
            .unwrap();
        let pv = a[piv * n + col];
        if !(pv.abs() > 1e-300) || !pv.is_finite() {
            return false;
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            b.swap(piv, col);
        }
        for r in col + 1..n {
            let factor = a[r * n + col] / pv;
            if factor != 0.0 {
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col * n + c] * b[c];
        }
        b[col] = s / a[col * n + col];
    }
    true
}

/// Convenience wrapper around [`Stepper::step`].
pub fn step(
    state: &CharacteristicState,
    spec: &NonlinearitySpec,
    grid: &Grid,
) -> Result<CharacteristicState> {
    Stepper::new().step(state, spec, grid)
}

/// `ε[(F(x+t) + F(x-t))/2 + ½∫_{x-t}^{x+t} G]`, the free-wave solution.
pub fn dalembert_reference(field: &FieldData, eps: f64, t: f64, x: f64) -> Result<f64> {
    let (a, b) = (x - t, x + t);
    let fa = field.f.value(a);
    let fb = field.f.value(b);
    let g_int = match field.traveling {
        Traveling::Right => -(fb - fa),
        Traveling::Left => fb - fa,
        Traveling::None => match (field.g.antiderivative(a), field.g.antiderivative(b)) {
            (Some(ga), Some(gb)) => gb - ga,
            _ => {
                let mut pts = vec![a, b];
                if let Some((lo, hi)) = field.g.extent() {
                    pts.extend([lo, hi].into_iter().filter(|&p| p > a && p < b));
                }
                pts.sort_by(f64::total_cmp);
                quadrature::integrate_piecewise(
                    |s| field.g.value(s),
                    &pts,
                    Tolerance::new(1e-13, 1e-12),
                )?
            }
        },
    };
    Ok(eps * (0.5 * (fa + fb) + 0.5 * g_int))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlowupCause {
    /// `max(|p|, |q|)` crossed the configured threshold.
    Threshold,
    /// The corrector stopped converging (no real trapezoid update exists).
    StepFailure { cell: usize },
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupEvent {
    pub t: f64,
    pub cause: BlowupCause,
    /// `max(|p|, |q|)` on the last accepted slice.
    pub peak: f64,
}

/// One run: the current slice plus all running diagnostics.
#[derive(Debug)]
pub struct Simulation {
    grid: Grid,
    spec: NonlinearitySpec,
    weight: WeightSpec,
    state: CharacteristicState,
    stepper: Stepper,
    acc: Accumulators,
    e_initial: f64,
    initial_peak: f64,
    threshold: f64,
}

/// What happened in [`Simulation::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advance {
    Stepped,
    Threshold(f64),
}

impl Simulation {
    pub fn new(
        grid: Grid,
        spec: NonlinearitySpec,
        weight: WeightSpec,
        data: &SampledData,
        eps: f64,
        blowup_factor: f64,
    ) -> Result<Self> {
        if spec.fields() != data.fields() {
            return Err(Error::Dimension { expected: data.fields(), got: spec.fields() });
        }
        let state = initialize(&grid, data, eps)?;
        let fields = SliceFields::compute(&state, &grid, &weight);
        let acc = Accumulators::new(&fields, &grid);
        let e_initial = fields.e0 + fields.e1;
        let initial_peak = state.peak();
        Ok(Self {
            grid,
            spec,
            weight,
            state,
            stepper: Stepper::new(),
            acc,
            e_initial,
            initial_peak,
            threshold: blowup_factor * initial_peak,
        })
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let sampled = data::sample(&cfg.data, &cfg.grid)?;
        Self::new(
            cfg.grid,
            cfg.spec.clone(),
            cfg.weight,
            &sampled,
            cfg.eps,
            cfg.monitors.blowup_factor,
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    pub fn state(&self) -> &CharacteristicState {
        &self.state
    }

    pub fn accumulators(&self) -> &Accumulators {
        &self.acc
    }

    pub fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    /// `E(0) = E_0(0) + E_1(0)`.
    pub fn e_initial(&self) -> f64 {
        self.e_initial
    }

    pub fn initial_peak(&self) -> f64 {
        self.initial_peak
    }

    pub fn report(&self) -> EnergyReport {
        EnergyReport::compute(&self.state, &self.grid, &self.weight, &self.acc, self.e_initial)
    }

    /// One step of the integrator plus accumulator updates.
    pub fn advance(&mut self) -> Result<Advance> {
        let next = self.stepper.step(&self.state, &self.spec, &self.grid)?;
        self.check_margin(&next)?;
        let fields = SliceFields::compute(&next, &self.grid, &self.weight);
        self.acc.update(&fields, self.grid.h);
        self.state = next;
        let peak = self.state.peak();
        if peak > self.threshold && self.initial_peak > 0.0 {
            return Ok(Advance::Threshold(peak));
        }
        Ok(Advance::Stepped)
    }

    fn check_margin(&self, s: &CharacteristicState) -> Result<()> {
        let tol = SUPPORT_TOL * self.initial_peak;
        let m = self.grid.m;
        for f in &s.fields {
            for arr in [&f.p, &f.q] {
                let edge = arr[..BOUNDARY_MARGIN].iter().chain(&arr[m - BOUNDARY_MARGIN..]);
                if let Some(v) = edge.copied().find(|v| v.abs() > tol) {
                    return Err(Error::Margin {
                        t: s.t,
                        detail: format!("solution reached the boundary cells (|value| = {v:e})"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub reports: Vec<EnergyReport>,
    pub snapshots: Vec<CharacteristicState>,
    pub final_state: CharacteristicState,
    pub blowup: Option<BlowupEvent>,
    pub e_initial: f64,
    pub steps: usize,
    pub theorem_regime: bool,
    /// `2 · sup flux · ∫Λ̄^{-1/2}` per k at the end of the run.
    pub fubini_bound: [f64; 2],
}

/// Runs a config, calling `on_tick` for every reported slice.
pub fn run_observed<F>(cfg: &RunConfig, mut on_tick: F) -> Result<RunOutput>
where
    F: FnMut(&CharacteristicState, &EnergyReport) -> Result<()>,
{
    let mut sim = Simulation::from_config(cfg)?;
    let total = cfg.grid.steps_to(cfg.t_final);
    let mut reports = Vec::new();
    let mut blowup = None;

    let first = sim.report();
    on_tick(sim.state(), &first)?;
    reports.push(first);

    for n in 1..=total {
        let peak_before = sim.state().peak();
        match sim.advance() {
            Ok(Advance::Stepped) => {}
            Ok(Advance::Threshold(_)) => {
                blowup = Some(BlowupEvent {
                    t: sim.state().t,
                    cause: BlowupCause::Threshold,
                    peak: sim.state().peak(),
                });
            }
            Err(e) if e.is_numerical() && cfg.monitors.blowup_events => {
                let (t, cause) = match e {
                    Error::StepFailure { t, cell, .. } => (t, BlowupCause::StepFailure { cell }),
                    Error::NumericalFailure { t, .. } => (t, BlowupCause::NumericalFailure),
                    _ => unreachable!(),
                };
                blowup = Some(BlowupEvent { t, cause, peak: peak_before });
            }
            Err(e) => return Err(e),
        }
        let last = n == total || blowup.is_some();
        if n % cfg.cadence == 0 || last {
            // A failed step leaves the previous slice in place; it was already
            // reported if it fell on the cadence.
            if sim.state().step == n {
                let r = sim.report();
                on_tick(sim.state(), &r)?;
                reports.push(r);
            } else if reports.last().map(|r| r.t) != Some(sim.state().t) {
                let r = sim.report();
                on_tick(sim.state(), &r)?;
                reports.push(r);
            }
        }
        if blowup.is_some() {
            break;
        }
    }

    Ok(RunOutput {
        reports,
        snapshots: Vec::new(),
        final_state: sim.state().clone(),
        blowup,
        e_initial: sim.e_initial(),
        steps: sim.state().step,
        theorem_regime: cfg.data.is_theorem_regime(),
        fubini_bound: [0, 1].map(|k| sim.accumulators().fubini_bound(k, &cfg.weight)),
    })
}

/// Runs a config to `t_final` (or a blow-up event), collecting reports and,
/// when the config asks for snapshot output, the reported slices.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let keep = cfg.output.snapshots.is_enabled();
    let mut snaps = Vec::new();
    let mut out = run_observed(cfg, |s, _| {
        if keep {
            snaps.push(s.clone());
        }
        Ok(())
    })?;
    out.snapshots = snaps;
    Ok(out)
}
