//! Weighted energies, null-curve fluxes and the pointwise diagnostics.
//!
//! For a slice at time `t`,
//!
//! ```text
//! E_k(t) = ∫ Λ(u)(L̄∂_x^kΦ)² + Λ̄(ū)(L∂_x^kΦ)² dx,
//! F_k(t) = sup_ū ∫_{C̄_ū} Λ(u)|L̄∂_x^kΦ|² dt + sup_u ∫_{C_u} Λ̄(ū)|L∂_x^kΦ|² dt,
//! ```
//!
//! summed over fields. Slices and curves use the trapezoid rule. Curves are
//! the lattice diagonals: `C̄` (constant `ū`) through `(n, j)` has index
//! `j + n`, `C` (constant `u`) has index `j - n`.

use std::collections::VecDeque;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::WeightSpec;
use crate::nullform::NonlinearitySpec;
use crate::solver::{commuted_derivatives, Advance, CharacteristicState, Grid, Simulation};

pub const CSV_HEADER: &str =
    "t,e0,e1,f0,f1,e_total,f_total,ratio,sup_wL,sup_wLbar,mixed_sup,st_int_k0,st_int_k1";

fn trapz(v: &[f64], h: f64) -> f64 {
    match v.len() {
        0 | 1 => 0.0,
        m => h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[m - 1])),
    }
}

fn trapz_by<F: Fn(usize) -> f64>(lo: usize, hi: usize, h: f64, f: F) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let inner: f64 = (lo + 1..hi).map(&f).sum();
    h * (inner + 0.5 * (f(lo) + f(hi)))
}

/// `Λ(u_j)` and `Λ̄(ū_j)` along one slice.
#[derive(Debug, Clone)]
pub struct SliceWeights {
    pub lam_u: Vec<f64>,
    pub lam_ubar: Vec<f64>,
}

impl SliceWeights {
    pub fn compute(grid: &Grid, w: &WeightSpec, t: f64) -> Self {
        let (lam_u, lam_ubar) = (0..grid.m)
            .map(|j| {
                let x = grid.x(j);
                (w.lambda(0.5 * (t - x)), w.lambda(0.5 * (t + x)))
            })
            .unzip();
        Self { lam_u, lam_ubar }
    }
}

/// Per-point curve integrands of one slice, summed over fields.
///
/// `lbar[k][j] = Λ(u_j) Σ(L̄∂^kΦ)²`, `l[k][j] = Λ̄(ū_j) Σ(L∂^kΦ)²`.
#[derive(Debug, Clone)]
pub struct SliceFields {
    pub t: f64,
    pub h: f64,
    pub lbar: [Vec<f64>; 2],
    pub l: [Vec<f64>; 2],
    /// Slice quadrature of `lbar[k] / Λ̄^{1/2}`.
    pub st: [f64; 2],
    pub e0: f64,
    pub e1: f64,
}

impl SliceFields {
    pub fn compute(state: &CharacteristicState, grid: &Grid, w: &WeightSpec) -> Self {
        let m = grid.m;
        let wts = SliceWeights::compute(grid, w, state.t);
        let derivs = commuted_derivatives(state, grid);
        let mut lbar = [vec![0.0; m], vec![0.0; m]];
        let mut l = [vec![0.0; m], vec![0.0; m]];
        for (f, d) in state.fields.iter().zip(&derivs) {
            for j in 0..m {
                lbar[0][j] += f.q[j] * f.q[j];
                lbar[1][j] += d.dq[j] * d.dq[j];
                l[0][j] += f.p[j] * f.p[j];
                l[1][j] += d.dp[j] * d.dp[j];
            }
        }
        for k in 0..2 {
            for j in 0..m {
                lbar[k][j] *= wts.lam_u[j];
                l[k][j] *= wts.lam_ubar[j];
            }
        }
        let h = grid.h;
        let st = [0, 1].map(|k| trapz_by(0, m - 1, h, |j| lbar[k][j] / wts.lam_ubar[j].sqrt()));
        let e = [0, 1].map(|k| trapz(&lbar[k], h) + trapz(&l[k], h));
        Self { t: state.t, h, lbar, l, st, e0: e[0], e1: e[1] }
    }
}

/// `E_k(t)` for one slice.
pub fn slice_energy(state: &CharacteristicState, grid: &Grid, w: &WeightSpec, k: usize) -> f64 {
    assert!(k <= 1, "slice_energy: k must be 0 or 1");
    let f = SliceFields::compute(state, grid, w);
    if k == 0 {
        f.e0
    } else {
        f.e1
    }
}

/// Running curve integrals on every lattice diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxAccumulators {
    m: usize,
    steps: usize,
    // C̄ diagonals, index d = j + n.
    cbar: [Vec<f64>; 2],
    // C diagonals; at step n, position j of the deque is the diagonal
    // through (n, j).
    c: [VecDeque<f64>; 2],
    prev_lbar: [Vec<f64>; 2],
    prev_l: [Vec<f64>; 2],
}

impl FluxAccumulators {
    pub fn new(initial: &SliceFields) -> Self {
        let m = initial.lbar[0].len();
        Self {
            m,
            steps: 0,
            cbar: [vec![0.0; m], vec![0.0; m]],
            c: [VecDeque::from(vec![0.0; m]), VecDeque::from(vec![0.0; m])],
            prev_lbar: initial.lbar.clone(),
            prev_l: initial.l.clone(),
        }
    }

    /// Trapezoid update from the previous slice to `next` (one step later).
    pub fn update(&mut self, next: &SliceFields, dt: f64) {
        let m = self.m;
        let n = self.steps;
        let half = 0.5 * dt;
        for k in 0..2 {
            let (gp, gn) = (&self.prev_lbar[k], &next.lbar[k]);
            // (n, j) and (n+1, j-1) share C̄ index j + n. The diagonal
            // entering on the right at n+1 has index m + n.
            self.cbar[k].push(0.0);
            for jp in 0..=m {
                let d = jp + n;
                let a = if jp < m { gp[jp] } else { 0.0 };
                let b = if jp >= 1 { gn[jp - 1] } else { 0.0 };
                self.cbar[k][d] += half * (a + b);
            }
            // (n, j) and (n+1, j+1) share C index j - n; after push_front the
            // deque is indexed by the slice-(n+1) cell.
            let (fp, fnx) = (&self.prev_l[k], &next.l[k]);
            let c = &mut self.c[k];
            c.push_front(0.0);
            for jn in 0..m {
                let a = if jn >= 1 { fp[jn - 1] } else { 0.0 };
                c[jn] += half * (a + fnx[jn]);
            }
            c[m] += half * fp[m - 1];
        }
        self.prev_lbar = next.lbar.clone();
        self.prev_l = next.l.clone();
        self.steps += 1;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn diagonal_count(&self) -> usize {
        self.cbar[0].len() + self.c[0].len()
    }

    /// `∫_{C̄} Λ(u)|L̄∂^kΦ|² dt` for the C̄ diagonal with index `d = j + n`.
    pub fn cbar_flux(&self, k: usize, d: usize) -> f64 {
        self.cbar[k].get(d).copied().unwrap_or(0.0)
    }

    /// `∫_C Λ̄(ū)|L∂^kΦ|² dt` for the C diagonal with index `j - n`.
    pub fn c_flux(&self, k: usize, index: isize) -> f64 {
        let pos = index + self.steps as isize;
        if pos < 0 {
            return 0.0;
        }
        self.c[k].get(pos as usize).copied().unwrap_or(0.0)
    }

    pub fn cbar_fluxes(&self, k: usize) -> &[f64] {
        &self.cbar[k]
    }

    pub fn c_fluxes(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.c[k].iter().copied()
    }

    pub fn cbar_sup(&self, k: usize) -> f64 {
        self.cbar[k].iter().copied().fold(0.0, f64::max)
    }

    pub fn c_sup(&self, k: usize) -> f64 {
        self.c[k].iter().copied().fold(0.0, f64::max)
    }

    /// `F_k`: the two one-family sups added.
    pub fn flux_sup(&self, k: usize) -> f64 {
        self.cbar_sup(k) + self.c_sup(k)
    }
}

/// Running `∬ Λ(u)|L̄∂_x^kΦ|² / Λ̄(ū)^{1/2} dx dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeAccumulator {
    value: [f64; 2],
    prev: [f64; 2],
}

impl SpacetimeAccumulator {
    pub fn new(initial: &SliceFields) -> Self {
        Self { value: [0.0; 2], prev: initial.st }
    }

    pub fn update(&mut self, next: &SliceFields, dt: f64) {
        for k in 0..2 {
            self.value[k] += 0.5 * dt * (self.prev[k] + next.st[k]);
        }
        self.prev = next.st;
    }

    pub fn value(&self, k: usize) -> f64 {
        self.value[k]
    }
}

/// Fluxes and the spacetime integral, updated together once per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulators {
    pub flux: FluxAccumulators,
    pub spacetime: SpacetimeAccumulator,
    x_min: f64,
    h: f64,
}

impl Accumulators {
    pub fn new(initial: &SliceFields, grid: &Grid) -> Self {
        Self {
            flux: FluxAccumulators::new(initial),
            spacetime: SpacetimeAccumulator::new(initial),
            x_min: grid.x_min,
            h: grid.h,
        }
    }

    pub fn update(&mut self, next: &SliceFields, dt: f64) {
        self.flux.update(next, dt);
        self.spacetime.update(next, dt);
    }

    /// `ū` of the C̄ diagonal with index `d`.
    pub fn ubar_of(&self, d: usize) -> f64 {
        0.5 * (d as f64).mul_add(self.h, self.x_min)
    }

    /// `2 · sup_ū flux · ∫Λ̄^{-1/2} dū`. The factor 2 is the Jacobian of
    /// `(t, x) ↦ (t, ū)`.
    pub fn fubini_bound(&self, k: usize, w: &WeightSpec) -> f64 {
        2.0 * self.flux.cbar_sup(k) * w.inverse_sqrt_integral()
    }

    /// Discrete counterpart `h Σ_d Λ̄(ū_d)^{-1/2} flux_d`.
    pub fn fubini_sum(&self, k: usize, w: &WeightSpec) -> f64 {
        self.flux
            .cbar_fluxes(k)
            .iter()
            .enumerate()
            .map(|(d, f)| f * w.lambda_pow(self.ubar_of(d), -0.5))
            .sum::<f64>()
            * self.h
    }
}

/// `(sup Λ̄^{1/2}|LΦ|, sup Λ^{1/2}|L̄Φ|)` over grid and fields.
pub fn pointwise_diagnostics(state: &CharacteristicState, grid: &Grid, w: &WeightSpec) -> (f64, f64) {
    let wts = SliceWeights::compute(grid, w, state.t);
    let mut sup_l = 0.0f64;
    let mut sup_lbar = 0.0f64;
    for f in &state.fields {
        for j in 0..grid.m {
            sup_l = sup_l.max(wts.lam_ubar[j].sqrt() * f.p[j].abs());
            sup_lbar = sup_lbar.max(wts.lam_u[j].sqrt() * f.q[j].abs());
        }
    }
    (sup_l, sup_lbar)
}

/// Quantities of the mixed-weight Sobolev bound with `W = Λ^{1/2}Λ̄^{-1/4}`
/// (and its mirror `W' = Λ̄^{1/2}Λ^{-1/4}` paired with `L`).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MixedWeightDiagnostics {
    /// `sup W|L̄Φ|`.
    pub sup: f64,
    /// `‖W L̄Φ‖`, `‖W L̄∂_xΦ‖`.
    pub l2: (f64, f64),
    pub sup_mirror: f64,
    pub l2_mirror: (f64, f64),
}

impl MixedWeightDiagnostics {
    /// `sup / (‖·‖ + ‖·‖)`, the larger of the two families; 0 for a zero slice.
    pub fn sobolev_ratio(&self) -> f64 {
        let r = |s: f64, (a, b): (f64, f64)| if a + b > 0.0 { s / (a + b) } else { 0.0 };
        r(self.sup, self.l2).max(r(self.sup_mirror, self.l2_mirror))
    }
}

pub fn mixed_weight_diagnostics(
    state: &CharacteristicState,
    grid: &Grid,
    w: &WeightSpec,
) -> MixedWeightDiagnostics {
    let m = grid.m;
    let derivs = commuted_derivatives(state, grid);
    let mut wq = vec![0.0; m];
    let mut wp = vec![0.0; m];
    for j in 0..m {
        let x = grid.x(j);
        let (u, ub) = (0.5 * (state.t - x), 0.5 * (state.t + x));
        wq[j] = w.lambda_pow(u, 0.5) * w.lambda_pow(ub, -0.25);
        wp[j] = w.lambda_pow(ub, 0.5) * w.lambda_pow(u, -0.25);
    }
    let mut out = MixedWeightDiagnostics::default();
    let mut sq = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    for (f, d) in state.fields.iter().zip(&derivs) {
        for j in 0..m {
            out.sup = out.sup.max(wq[j] * f.q[j].abs());
            out.sup_mirror = out.sup_mirror.max(wp[j] * f.p[j].abs());
            sq[0][j] += (wq[j] * f.q[j]).powi(2);
            sq[1][j] += (wq[j] * d.dq[j]).powi(2);
            sq[2][j] += (wp[j] * f.p[j]).powi(2);
            sq[3][j] += (wp[j] * d.dp[j]).powi(2);
        }
    }
    let n = sq.map(|v| trapz(&v, grid.h).sqrt());
    out.l2 = (n[0], n[1]);
    out.l2_mirror = (n[2], n[3]);
    out
}

/// `max_j |∂_x W| / W` for `W = Λ^{1/2}Λ̄^{-1/4}` by centered differences.
pub fn mixed_weight_log_slope(grid: &Grid, w: &WeightSpec, t: f64) -> f64 {
    let wv = |x: f64| w.lambda_pow(0.5 * (t - x), 0.5) * w.lambda_pow(0.5 * (t + x), -0.25);
    let h = grid.h;
    (1..grid.m - 1)
        .map(|j| {
            let x = grid.x(j);
            ((wv(x + h) - wv(x - h)) / (2.0 * h)).abs() / wv(x)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub e0: f64,
    pub e1: f64,
    pub f0: f64,
    pub f1: f64,
    pub e_total: f64,
    pub f_total: f64,
    /// `(E + F) / E(0)`; 0 when `E(0) = 0`.
    pub ratio: f64,
    pub sup_wl: f64,
    pub sup_wlbar: f64,
    pub mixed: MixedWeightDiagnostics,
    pub st_integral: [f64; 2],
}

impl EnergyReport {
    pub fn compute(
        state: &CharacteristicState,
        grid: &Grid,
        w: &WeightSpec,
        acc: &Accumulators,
        e_initial: f64,
    ) -> Self {
        let fields = SliceFields::compute(state, grid, w);
        let (sup_wl, sup_wlbar) = pointwise_diagnostics(state, grid, w);
        let f0 = acc.flux.flux_sup(0);
        let f1 = acc.flux.flux_sup(1);
        let e_total = fields.e0 + fields.e1;
        let f_total = f0 + f1;
        Self {
            t: state.t,
            e0: fields.e0,
            e1: fields.e1,
            f0,
            f1,
            e_total,
            f_total,
            ratio: if e_initial > 0.0 { (e_total + f_total) / e_initial } else { 0.0 },
            sup_wl,
            sup_wlbar,
            mixed: mixed_weight_diagnostics(state, grid, w),
            st_integral: [acc.spacetime.value(0), acc.spacetime.value(1)],
        }
    }

    pub fn csv_row(&self) -> String {
        [
            self.t,
            self.e0,
            self.e1,
            self.f0,
            self.f1,
            self.e_total,
            self.f_total,
            self.ratio,
            self.sup_wl,
            self.sup_wlbar,
            self.mixed.sup,
            self.st_integral[0],
            self.st_integral[1],
        ]
        .iter()
        .map(|v| crate::output::fmt_num(*v))
        .collect::<Vec<_>>()
        .join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Pass,
    Fail { t: f64, ratio: f64 },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

/// Pass iff `(E + F)/E(0) ≤ K` at every report; fails at the first violation.
pub fn bootstrap_monitor(reports: &[EnergyReport], e_initial: f64, k: f64) -> Result<Verdict> {
    if e_initial == 0.0 {
        if let Some(r) = reports.iter().find(|r| r.e_total + r.f_total > 0.0) {
            return Err(Error::DegenerateData(format!(
                "E(0) = 0 but E + F = {:e} at t = {}",
                r.e_total + r.f_total,
                r.t
            )));
        }
        return Ok(Verdict::Pass);
    }
    for r in reports {
        let ratio = (r.e_total + r.f_total) / e_initial;
        if !(ratio <= k) {
            return Ok(Verdict::Fail { t: r.t, ratio });
        }
    }
    Ok(Verdict::Pass)
}

/// Residuals of the two one-sided energy balances.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IdentityResidual {
    /// Region `x ≤ 2ū₀ - t`, weight Λ, derivative `L̄`.
    pub minus: f64,
    /// Region `x ≥ t + 2u₀` with `u₀ = -ū₀`, weight Λ̄, derivative `L`.
    pub plus: f64,
}

impl IdentityResidual {
    pub fn magnitude(&self) -> f64 {
        self.minus.abs() + self.plus.abs()
    }
}

#[derive(Debug, Clone, Default)]
struct Side {
    s0: f64,
    s: f64,
    flux: f64,
    source: f64,
    prev_edge: f64,
    prev_density: f64,
}

impl Side {
    fn residual(&self) -> f64 {
        0.5 * self.s + self.flux - 0.5 * self.s0 - self.source
    }
}

/// Accumulates the discrete form of
/// `½∫_{Σ⁻_t}Λq² + ∫_{C̄}Λq² dt - ½∫_{Σ⁻_0}Λq² - ∬Λqρ` and its mirror,
/// for the diagonals through `(0, 2ū₀)`.
#[derive(Debug, Clone)]
pub struct IdentityTracker {
    j0: usize,
    steps: usize,
    minus: Side,
    plus: Side,
    started: bool,
    pbuf: Vec<f64>,
    qbuf: Vec<f64>,
    nbuf: Vec<f64>,
}

impl IdentityTracker {
    pub fn new(grid: &Grid, ubar0: f64) -> Result<Self> {
        let jr = (2.0 * ubar0 - grid.x_min) / grid.h;
        let j0 = jr.round();
        if !jr.is_finite() || (jr - j0).abs() > 1e-6 || j0 < 0.0 || j0 > (grid.m - 1) as f64 {
            return Err(Error::Geometry(format!(
                "ū₀ = {ubar0} is not a lattice diagonal inside the grid"
            )));
        }
        Ok(Self {
            j0: j0 as usize,
            steps: 0,
            minus: Side::default(),
            plus: Side::default(),
            started: false,
            pbuf: Vec::new(),
            qbuf: Vec::new(),
            nbuf: Vec::new(),
        })
    }

    /// Feeds the next slice; slices must arrive in order starting at step 0.
    pub fn observe(
        &mut self,
        state: &CharacteristicState,
        grid: &Grid,
        w: &WeightSpec,
        spec: &NonlinearitySpec,
    ) -> Result<()> {
        let m = grid.m;
        let n = state.step;
        if self.started && n != self.steps + 1 {
            return Err(Error::Geometry(format!("slice {n} observed out of order")));
        }
        let (e, s) = match (self.j0.checked_sub(n), self.j0 + n) {
            (Some(e), s) if s < m => (e, s),
            _ => {
                return Err(Error::Geometry(format!(
                    "the tracked diagonals leave the grid at t = {}",
                    state.t
                )))
            }
        };
        let nf = state.fields.len();
        self.pbuf.resize(nf, 0.0);
        self.qbuf.resize(nf, 0.0);
        self.nbuf.resize(nf, 0.0);
        let wts = SliceWeights::compute(grid, w, state.t);
        let mut lq2 = vec![0.0; m];
        let mut lp2 = vec![0.0; m];
        let mut lqr = vec![0.0; m];
        let mut lpr = vec![0.0; m];
        for j in 0..m {
            for (k, f) in state.fields.iter().enumerate() {
                self.pbuf[k] = f.p[j];
                self.qbuf[k] = f.q[j];
            }
            spec.evaluate_into(&self.pbuf, &self.qbuf, &mut self.nbuf);
            for k in 0..nf {
                lq2[j] += self.qbuf[k] * self.qbuf[k];
                lp2[j] += self.pbuf[k] * self.pbuf[k];
                lqr[j] += self.qbuf[k] * self.nbuf[k];
                lpr[j] += self.pbuf[k] * self.nbuf[k];
            }
            lq2[j] *= wts.lam_u[j];
            lqr[j] *= wts.lam_u[j];
            lp2[j] *= wts.lam_ubar[j];
            lpr[j] *= wts.lam_ubar[j];
        }
        let h = grid.h;
        let s_minus = trapz_by(0, e, h, |j| lq2[j]);
        let d_minus = trapz_by(0, e, h, |j| lqr[j]);
        let s_plus = trapz_by(s, m - 1, h, |j| lp2[j]);
        let d_plus = trapz_by(s, m - 1, h, |j| lpr[j]);
        let half = 0.5 * h;
        for (side, sv, dv, edge) in [
            (&mut self.minus, s_minus, d_minus, lq2[e]),
            (&mut self.plus, s_plus, d_plus, lp2[s]),
        ] {
            if self.started {
                side.flux += half * (side.prev_edge + edge);
                side.source += half * (side.prev_density + dv);
            } else {
                side.s0 = sv;
            }
            side.s = sv;
            side.prev_edge = edge;
            side.prev_density = dv;
        }
        self.steps = n;
        self.started = true;
        Ok(())
    }

    pub fn residual(&self) -> IdentityResidual {
        IdentityResidual { minus: self.minus.residual(), plus: self.plus.residual() }
    }

    /// `½∫_{Σ⁻_0}Λq² + ½∫_{Σ⁺_0}Λ̄p²`, the natural scale of the residual.
    pub fn initial_scale(&self) -> f64 {
        0.5 * (self.minus.s0 + self.plus.s0)
    }
}

/// Runs `cfg` to `t_final` and returns the identity residual on the
/// diagonals through `(0, 2ū₀)`, with `ρ` the run's own nonlinearity.
pub fn identity_residual(cfg: &RunConfig, ubar0: f64) -> Result<IdentityResidual> {
    let mut sim = Simulation::from_config(cfg)?;
    let mut tracker = IdentityTracker::new(&cfg.grid, ubar0)?;
    tracker.observe(sim.state(), &cfg.grid, &cfg.weight, &cfg.spec)?;
    for _ in 0..cfg.grid.steps_to(cfg.t_final) {
        if let Advance::Threshold(peak) = sim.advance()? {
            return Err(Error::NumericalFailure {
                t: sim.state().t,
                detail: format!("blow-up threshold crossed (peak {peak:e})"),
            });
        }
        tracker.observe(sim.state(), &cfg.grid, &cfg.weight, &cfg.spec)?;
    }
    Ok(tracker.residual())
}
