//! Multi-run studies: grid convergence, blow-up detection against the
//! spatially homogeneous ODE, increment scaling in ε and lifespan sweeps.
//!
//! Rungs are independent runs and execute in parallel; results are
//! assembled in ladder order, so every study is deterministic.

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::solver::{self, dalembert_reference, BlowupCause, BlowupEvent, CharacteristicState, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Convergence,
    IncrementScaling,
    Lifespan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StudyStatus {
    Conclusive,
    Inconclusive(String),
}

/// One run of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rung {
    pub h: f64,
    pub m: usize,
    pub eps: f64,
    /// Error (convergence), increment Δ (scaling) or `T*` (lifespan).
    pub value: f64,
    /// Rounding floor (scaling) or Richardson gap (lifespan); NaN otherwise.
    pub aux: f64,
    /// Lifespan runs that reached the cap without blowing up.
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub kind: StudyKind,
    pub rungs: Vec<Rung>,
    /// Orders (convergence), exponents ν (scaling) or lifespan ratios, one
    /// per adjacent pair of rungs; NaN where undefined.
    pub fitted: Vec<f64>,
    pub status: StudyStatus,
}

impl StudyResult {
    pub fn is_conclusive(&self) -> bool {
        self.status == StudyStatus::Conclusive
    }
}

/// `log₂(e_coarse / e_fine)`.
pub fn observed_order(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}

fn final_state(cfg: &RunConfig) -> Result<CharacteristicState> {
    let out = solver::run(cfg)?;
    if let Some(ev) = out.blowup {
        return Err(Error::NumericalFailure {
            t: ev.t,
            detail: "blow-up during a convergence run".into(),
        });
    }
    Ok(out.final_state)
}

/// Max-norm error of `Φ` against the free-wave solution at the final slice.
pub fn dalembert_error(cfg: &RunConfig, state: &CharacteristicState) -> Result<f64> {
    let mut err = 0.0f64;
    for (fd, f) in cfg.data.fields.iter().zip(&state.fields) {
        for j in 0..cfg.grid.m {
            let exact = dalembert_reference(fd, cfg.eps, state.t, cfg.grid.x(j))?;
            err = err.max((f.phi[j] - exact).abs());
        }
    }
    Ok(err)
}

/// Grid-halving study. Linear specs are compared with the d'Alembert
/// solution; nonlinear ones through successive differences
/// `‖Φ_h - Φ_{h/2}‖` on the coarse points, so `refinements` grids give
/// `refinements - 1` differences.
pub fn convergence_study(cfg: &RunConfig, refinements: usize) -> Result<StudyResult> {
    if refinements < 2 {
        return Err(Error::Domain(format!("convergence study needs ≥ 2 rungs, got {refinements}")));
    }
    let mut grids: Vec<Grid> = vec![cfg.grid];
    for _ in 1..refinements {
        let g = grids.last().unwrap().refined();
        grids.push(g);
    }
    let cfgs: Vec<RunConfig> = grids.iter().map(|g| cfg.clone().with_grid(*g).with_cadence(usize::MAX)).collect();
    let states: Vec<CharacteristicState> =
        cfgs.par_iter().map(final_state).collect::<Result<_>>()?;

    let mut rungs = Vec::new();
    if cfg.spec.is_zero() {
        for (c, s) in cfgs.iter().zip(&states) {
            rungs.push(Rung {
                h: c.grid.h,
                m: c.grid.m,
                eps: c.eps,
                value: dalembert_error(c, s)?,
                aux: f64::NAN,
                censored: false,
            });
        }
    } else {
        for i in 0..states.len() - 1 {
            let (a, b) = (&states[i], &states[i + 1]);
            let mut d = 0.0f64;
            for (fa, fb) in a.fields.iter().zip(&b.fields) {
                for j in 0..grids[i].m {
                    d = d.max((fa.phi[j] - fb.phi[2 * j]).abs());
                }
            }
            rungs.push(Rung {
                h: grids[i].h,
                m: grids[i].m,
                eps: cfg.eps,
                value: d,
                aux: f64::NAN,
                censored: false,
            });
        }
    }
    let fitted: Vec<f64> = rungs.windows(2).map(|w| observed_order(w[0].value, w[1].value)).collect();
    let monotone = rungs.windows(2).all(|w| w[1].value < w[0].value);
    let status = if rungs.len() < 2 {
        StudyStatus::Inconclusive("fewer than two error values".into())
    } else if !monotone {
        StudyStatus::Inconclusive("errors do not decrease under refinement".into())
    } else {
        StudyStatus::Conclusive
    };
    Ok(StudyResult { kind: StudyKind::Convergence, rungs, fitted, status })
}

/// Blow-up time of `φ'' = φ'²` with `φ'(0) = a`: `1/a` for `a > 0`.
pub fn john_oracle(a: f64) -> Option<f64> {
    (a > 0.0).then(|| 1.0 / a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupEstimate {
    /// Richardson value `2t_fine - t_coarse` when both rungs agree within
    /// 10%, otherwise the time of whichever rung blew up (fine preferred).
    pub t_blow: f64,
    pub cause: BlowupCause,
    pub coarse: Option<BlowupEvent>,
    pub fine: Option<BlowupEvent>,
    /// `|t_fine - t_coarse|`, infinite when only one rung blew up.
    pub gap: f64,
    pub low_confidence: bool,
}

pub const BLOWUP_AGREEMENT: f64 = 0.10;

/// Runs `cfg` on its grid and on one refinement and pairs the blow-up times.
pub fn detect_blowup(cfg: &RunConfig) -> Result<Option<BlowupEstimate>> {
    let mut base = cfg.clone().with_cadence(usize::MAX);
    base.monitors.blowup_events = true;
    let fine_cfg = base.clone().with_grid(cfg.grid.refined());
    let (c, f) = rayon::join(|| solver::run(&base), || solver::run(&fine_cfg));
    let (c, f) = (c?.blowup, f?.blowup);
    let est = match (c, f) {
        (None, None) => return Ok(None),
        (Some(c), Some(f)) => {
            let gap = (f.t - c.t).abs();
            let low = gap > BLOWUP_AGREEMENT * f.t;
            BlowupEstimate {
                t_blow: if low { f.t } else { 2.0 * f.t - c.t },
                cause: f.cause,
                coarse: Some(c),
                fine: Some(f),
                gap,
                low_confidence: low,
            }
        }
        (c, f) => {
            let ev = f.or(c).unwrap();
            BlowupEstimate {
                t_blow: ev.t,
                cause: ev.cause,
                coarse: c,
                fine: f,
                gap: f64::INFINITY,
                low_confidence: true,
            }
        }
    };
    Ok(Some(est))
}

fn check_ladder(ladder: &[f64], min_len: usize) -> Result<Vec<f64>> {
    if ladder.len() < min_len {
        return Err(Error::Domain(format!(
            "ε ladder needs at least {min_len} values, got {}",
            ladder.len()
        )));
    }
    let mut v = ladder.to_vec();
    v.sort_by(f64::total_cmp);
    if v[0] <= 0.0 {
        return Err(Error::Domain("ε ladder values must be positive".into()));
    }
    for w in v.windows(2) {
        if ((w[1] / w[0]) - 2.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "ε ladder must be geometric with ratio 2 ({} → {})",
                w[0], w[1]
            )));
        }
    }
    Ok(v)
}

/// `Δ(ε) = max_t |(E+F)_nonlinear(t) - (E+F)_linear(t)|` for one ε, plus
/// the rounding floor `steps · ε_mach · max(E+F)`.
pub fn increment(cfg: &RunConfig, eps: f64) -> Result<(f64, f64)> {
    let nl_cfg = cfg.clone().with_eps(eps);
    let lin_cfg = nl_cfg.linear();
    let (nl, lin) = rayon::join(|| solver::run(&nl_cfg), || solver::run(&lin_cfg));
    let (nl, lin) = (nl?, lin?);
    if let Some(ev) = nl.blowup {
        return Err(Error::NumericalFailure {
            t: ev.t,
            detail: format!("blow-up in the ε = {eps} increment run"),
        });
    }
    let mut delta = 0.0f64;
    let mut top = 0.0f64;
    for (a, b) in nl.reports.iter().zip(&lin.reports) {
        let (ea, eb) = (a.e_total + a.f_total, b.e_total + b.f_total);
        delta = delta.max((ea - eb).abs());
        top = top.max(ea.max(eb));
    }
    let floor = nl.steps.max(1) as f64 * f64::EPSILON * top;
    Ok((delta, floor))
}

pub const NOISE_FACTOR: f64 = 100.0;

pub fn increment_scaling(cfg: &RunConfig, ladder: &[f64]) -> Result<StudyResult> {
    let ladder = check_ladder(ladder, 3)?;
    let vals: Vec<(f64, f64)> =
        ladder.par_iter().map(|&e| increment(cfg, e)).collect::<Result<_>>()?;
    let rungs: Vec<Rung> = ladder
        .iter()
        .zip(&vals)
        .map(|(&eps, &(d, floor))| Rung {
            h: cfg.grid.h,
            m: cfg.grid.m,
            eps,
            value: d,
            aux: floor,
            censored: false,
        })
        .collect();
    let fitted = rungs.windows(2).map(|w| (w[1].value / w[0].value).log2()).collect();
    let status = match rungs.iter().find(|r| !(r.value > NOISE_FACTOR * r.aux)) {
        Some(r) => StudyStatus::Inconclusive(format!(
            "increment {:e} at ε = {} is within {NOISE_FACTOR}× the rounding floor {:e}",
            r.value, r.eps, r.aux
        )),
        None => StudyStatus::Conclusive,
    };
    Ok(StudyResult { kind: StudyKind::IncrementScaling, rungs, fitted, status })
}

/// Blow-up time per ε (largest first), censored at `t_cap`; `fitted` holds
/// `T*(ε/2)/T*(ε)` per adjacent pair.
pub fn lifespan_sweep(cfg: &RunConfig, ladder: &[f64], t_cap: f64) -> Result<StudyResult> {
    let mut ladder = check_ladder(ladder, 2)?;
    ladder.reverse();
    let runs: Vec<Option<BlowupEstimate>> = ladder
        .par_iter()
        .map(|&e| detect_blowup(&cfg.clone().with_eps(e).with_t_final(t_cap)))
        .collect::<Result<_>>()?;
    let rungs: Vec<Rung> = ladder
        .iter()
        .zip(&runs)
        .map(|(&eps, r)| Rung {
            h: cfg.grid.h,
            m: cfg.grid.m,
            eps,
            value: r.map_or(t_cap, |b| b.t_blow),
            aux: r.map_or(f64::NAN, |b| b.gap),
            censored: r.is_none(),
        })
        .collect();
    let fitted = rungs
        .windows(2)
        .map(|w| if w[0].censored || w[1].censored { f64::NAN } else { w[1].value / w[0].value })
        .collect();
    let status = if rungs.iter().filter(|r| !r.censored).count() < 2 {
        StudyStatus::Inconclusive(format!(
            "fewer than two rungs blew up before T_cap = {t_cap}; no ratio to fit"
        ))
    } else {
        StudyStatus::Conclusive
    };
    Ok(StudyResult { kind: StudyKind::Lifespan, rungs, fitted, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DataProfile, Profile};
    use crate::geometry::WeightSpec;
    use crate::nullform::NonlinearitySpec;

    #[test]
    fn order_arithmetic() {
        assert_eq!(observed_order(0.04, 0.01), 2.0);
        assert_eq!(observed_order(0.08, 0.01), 3.0);
    }

    #[test]
    fn john_oracle_examples() {
        assert_eq!(john_oracle(0.0), None);
        assert_eq!(john_oracle(-1.0), None);
        assert_eq!(john_oracle(0.1), Some(10.0));
        assert_eq!(john_oracle(0.5), Some(2.0));
    }

    #[test]
    fn ladder_validation() {
        assert!(check_ladder(&[0.1, 0.05], 3).is_err());
        assert!(check_ladder(&[0.1, 0.05, 0.02], 3).is_err());
        assert_eq!(check_ladder(&[0.1, 0.025, 0.05], 3).unwrap(), vec![0.025, 0.05, 0.1]);
    }

    fn small_cfg(spec: NonlinearitySpec, eps: f64) -> RunConfig {
        let grid = Grid::new(-20.0, 20.0, 201).unwrap();
        let data = DataProfile::single(
            Profile::Gaussian { center: 0.0, width: 1.0, amplitude: 1.0 },
            Profile::Zero,
        );
        RunConfig::new(grid, 4.0, WeightSpec::new(0.5).unwrap(), eps, data, spec).unwrap()
    }

    #[test]
    fn linear_increment_is_inconclusive() {
        let cfg = small_cfg(NonlinearitySpec::zero(1), 1.0);
        let r = increment_scaling(&cfg, &[0.025, 0.05, 0.1]).unwrap();
        assert!(!r.is_conclusive());
        assert!(r.rungs.iter().all(|r| r.value == 0.0));
    }

    #[test]
    fn zero_data_has_no_blowup() {
        let cfg = small_cfg(NonlinearitySpec::john(), 0.0);
        assert_eq!(detect_blowup(&cfg).unwrap(), None);
    }

    #[test]
    fn null_sweep_is_censored() {
        let cfg = small_cfg(NonlinearitySpec::single_null(1.0), 1.0);
        let r = lifespan_sweep(&cfg, &[0.05, 0.1], 3.0).unwrap();
        assert!(!r.is_conclusive());
        assert!(r.rungs.iter().all(|r| r.censored && r.value == 3.0));
        assert_eq!(r.rungs[0].eps, 0.1);
    }

    #[test]
    fn linear_convergence_small() {
        let cfg = small_cfg(NonlinearitySpec::zero(1), 1.0);
        let r = convergence_study(&cfg, 3).unwrap();
        assert!(r.is_conclusive(), "{r:?}");
        for p in &r.fitted {
            assert!((1.8..=2.2).contains(p), "{r:?}");
        }
    }
}
