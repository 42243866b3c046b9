//! Fixed-length restarts: a method with sublinear rate
//! `f(x_k) - f* <= C L ‖x_0 - x*‖² / k^α` run in epochs of
//! `⌈(4 C L / μ)^{1/α}⌉` steps halves the gap every epoch under
//! `μ`-strong convexity.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::instances::{suboptimality, QuadraticInstance};
use crate::pcli::{diverged, CoefficientSchedule, PcliState, SideInformation, Stepper};

/// Guard on the total number of iterations of a wrapped run.
pub const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateCertificate {
    pub c: f64,
    pub alpha: f64,
}

impl RateCertificate {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0 && alpha.is_finite() && alpha > 0.0) {
            return Err(invalid(format!(
                "rate certificate needs C, alpha > 0, got {c}, {alpha}"
            )));
        }
        Ok(RateCertificate { c, alpha })
    }

    /// Nesterov's smooth method: `4 L R² / (k + 2)²` implies `C = 4, α = 2`.
    pub fn agd_smooth() -> Self {
        RateCertificate { c: 4.0, alpha: 2.0 }
    }

    /// Gradient descent with step `1/L`: `L R² / (2k)`.
    pub fn gd() -> Self {
        RateCertificate { c: 0.5, alpha: 1.0 }
    }
}

/// `⌈(4 C L / μ)^{1/α}⌉`, at least 1. Values within `1e-9` relative of an
/// integer are taken as that integer so that exact roots are not bumped by
/// rounding in `powf`.
pub fn epoch_length(cert: &RateCertificate, l: f64, mu: f64) -> Result<usize> {
    if !(mu.is_finite() && l.is_finite() && mu > 0.0 && mu <= l) {
        return Err(invalid(format!(
            "epoch length needs 0 < mu <= L, got mu = {mu}, L = {l}"
        )));
    }
    let x = (4.0 * cert.c * l / mu).powf(1.0 / cert.alpha);
    let nearest = x.round();
    let n = if (x - nearest).abs() <= 1e-9 * x {
        nearest
    } else {
        x.ceil()
    };
    if n > MAX_ITERATIONS as f64 {
        return Err(invalid(format!(
            "epoch length {x} exceeds the iteration guard"
        )));
    }
    Ok((n as usize).max(1))
}

/// How the next epoch is seeded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum WarmStart {
    /// Keep every point of the p-CLI state; only the step clock resets.
    #[default]
    FullState,
    /// Re-initialize all points to copies of the returned iterate.
    LastIterate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub iterations: usize,
    pub suboptimality: f64,
}

#[derive(Clone, Debug)]
pub struct RestartRun {
    pub epoch_length: usize,
    /// Row 0 is the starting point.
    pub epochs: Vec<EpochRecord>,
    pub total_iterations: usize,
    pub final_state: PcliState,
}

#[derive(Clone, Copy, Debug)]
pub struct RestartOptions {
    pub target_eps: f64,
    pub warm_start: WarmStart,
    pub max_iterations: usize,
}

impl RestartOptions {
    pub fn new(target_eps: f64) -> Self {
        RestartOptions {
            target_eps,
            warm_start: WarmStart::default(),
            max_iterations: MAX_ITERATIONS,
        }
    }
}

/// Run `base` in restarted epochs from `x0` until the epoch-end
/// suboptimality drops below the target. `observe(t, state)` sees every
/// state, `t` counting all iterations.
pub fn restart_wrap_observed(
    base: &CoefficientSchedule,
    info: &SideInformation,
    cert: &RateCertificate,
    inst: &QuadraticInstance,
    x0: &[f64],
    opts: &RestartOptions,
    mut observe: impl FnMut(usize, &PcliState),
) -> Result<RestartRun> {
    let mu = info.require_mu(base.label())?;
    if !(opts.target_eps > 0.0) {
        return Err(invalid("target_eps must be positive"));
    }
    let n = epoch_length(cert, info.l, mu)?;
    let d = inst.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {}, instance {d}",
            x0.len()
        )));
    }
    let mut state = PcliState::replicated(base.p(), x0);
    let mut epochs = vec![EpochRecord {
        epoch: 0,
        iterations: 0,
        suboptimality: suboptimality(inst, x0)?,
    }];
    let mut t = 0;
    observe(0, &state);
    let mut stepper = Stepper::new(base.p(), d);
    while epochs
        .last()
        .is_some_and(|e| e.suboptimality >= opts.target_eps)
    {
        if t + n > opts.max_iterations {
            return Err(Error::NonConvergence(opts.max_iterations));
        }
        if opts.warm_start == WarmStart::LastIterate {
            state = PcliState::replicated(base.p(), state.returned());
        }
        for j in 0..n {
            let grids = base.coefficients(j, info)?;
            grids.validate(base.p(), d)?;
            stepper.advance(&mut state, &grids, inst);
            t += 1;
            if diverged(&state) {
                return Err(Error::Divergence { step: t });
            }
            observe(t, &state);
        }
        epochs.push(EpochRecord {
            epoch: epochs.len(),
            iterations: t,
            suboptimality: suboptimality(inst, state.returned())?,
        });
    }
    Ok(RestartRun {
        epoch_length: n,
        epochs,
        total_iterations: t,
        final_state: state,
    })
}

/// [`restart_wrap_observed`] collecting the returned iterate of every step.
pub fn restart_wrap(
    base: &CoefficientSchedule,
    info: &SideInformation,
    cert: &RateCertificate,
    inst: &QuadraticInstance,
    x0: &[f64],
    opts: &RestartOptions,
) -> Result<(RestartRun, Vec<Vec<f64>>)> {
    let mut iterates = Vec::new();
    let run = restart_wrap_observed(base, info, cert, inst, x0, opts, |_, s| {
        iterates.push(s.returned().to_vec())
    })?;
    Ok((run, iterates))
}

/// CSV with header `epoch,iterations,suboptimality`.
pub fn epoch_log_csv(epochs: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,iterations,suboptimality\n");
    for e in epochs {
        let _ = writeln!(out, "{},{},{:e}", e.epoch, e.iterations, e.suboptimality);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HalvingVerdict {
    pub pass: bool,
    pub worst_ratio: f64,
}

/// Every consecutive ratio of epoch-end gaps must be at most `½ (1 + 1e-6)`.
pub fn halving_check(epochs: &[EpochRecord]) -> Result<HalvingVerdict> {
    if epochs.len() < 2 {
        return Err(invalid("halving check needs at least two epochs"));
    }
    let worst_ratio = epochs
        .windows(2)
        .map(|w| w[1].suboptimality / w[0].suboptimality)
        .fold(0.0, f64::max);
    Ok(HalvingVerdict {
        pass: worst_ratio <= 0.5 * (1.0 + 1e-6),
        worst_ratio,
    })
}
