//! The experiments behind the CLI subcommands. Each returns report rows;
//! none of them writes files.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::algos::stochastic::{
    expected_schedule, expected_update, max_abs_z, monte_carlo, StochasticMethod,
    StochasticMethodConfig,
};
use crate::algos::{
    agd_smooth_schedule, agd_stationary_schedule, gd_schedule, heavy_ball_schedule, GdStep,
};
use crate::bounds::{
    default_grid, lb_smooth_after, lb_strongly_convex, lemma_b3_check, residual_max,
    weighted_residual_max, B3Verdict, Interval,
};
use crate::error::{Error, Result};
use crate::harness::config::{Experiment, ExperimentConfig};
use crate::harness::report::{ExperimentReport, ReportRow};
use crate::instances::{
    finite_sum_split, hard_instance, log_grid, spectral_sweep, suboptimality, FiniteSumInstance,
    QuadraticInstance,
};
use crate::pcli::{
    residual_poly, run, run_until, symbolic_run_observed, CoefficientSchedule, DiagonalOperator,
    GradientOracle, PcliState, SideInformation,
};
use crate::poly::{optimal_residual_sc, Wide};
use crate::restart::{epoch_length, halving_check, restart_wrap, RateCertificate, RestartOptions};

/// Absolute tolerance of the lower-bound checks.
pub const LB_TOL: f64 = 1e-12;
/// Largest admissible `|z|` in the Monte Carlo comparisons.
pub const Z_MAX: f64 = 4.0;
/// Allowed distance of a fitted slope from its nominal value.
pub const SLOPE_TOL: f64 = 0.1;
/// Slack on the restart iteration total.
pub const RESTART_SLACK: f64 = 1.5;

const STOCHASTIC_METHODS: [StochasticMethod; 3] = [
    StochasticMethod::Sag,
    StochasticMethod::Saga,
    StochasticMethod::Svrg,
];

/// Step of the stochastic methods in the sum formulation.
pub fn stochastic_step(method: StochasticMethod, l: f64) -> f64 {
    match method {
        StochasticMethod::Svrg => 1.0 / (2.0 * l),
        _ => 1.0 / (4.0 * l),
    }
}

/// Expected dynamics of a stochastic method on an equal `m`-way split.
pub fn expected_equal_split(
    method: StochasticMethod,
    info: &SideInformation,
    m: usize,
) -> Result<CoefficientSchedule> {
    let cfg = StochasticMethodConfig::new(method, m, stochastic_step(method, info.l), 0);
    let weights = vec![DiagonalOperator::Scalar(1.0 / m as f64); m];
    expected_schedule(&cfg, &weights)
}

/// Schedules that may use `μ`, plus the expected stochastic dynamics.
pub fn sc_schedules(info: &SideInformation, m: usize) -> Result<Vec<CoefficientSchedule>> {
    let mut out = vec![
        gd_schedule(info, GdStep::InvL)?,
        gd_schedule(info, GdStep::TwoOverSum)?,
        heavy_ball_schedule(info)?,
        agd_stationary_schedule(info)?,
        agd_smooth_schedule(info)?,
    ];
    for method in STOCHASTIC_METHODS {
        out.push(expected_equal_split(method, info, m)?);
    }
    Ok(out)
}

/// Schedules that use only `L`.
pub fn smooth_schedules(info: &SideInformation, m: usize) -> Result<Vec<CoefficientSchedule>> {
    let mut out = vec![gd_schedule(info, GdStep::InvL)?, agd_smooth_schedule(info)?];
    for method in STOCHASTIC_METHODS {
        out.push(expected_equal_split(method, info, m)?);
    }
    Ok(out)
}

/// Dispatch on `cfg.experiment`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rep = match cfg.experiment {
        Experiment::All => return Err(Error::Config("\"all\" is not a single experiment".into())),
        Experiment::VerifyLbSc => verify_lb_sc(cfg)?,
        Experiment::VerifyLbSmooth => verify_lb_smooth(cfg)?,
        Experiment::RateFit => rate_fit(cfg)?,
        Experiment::LemmaB3 => lemma_b3(cfg)?,
        Experiment::Stochastic => stochastic(cfg)?,
        Experiment::RestartDemo => restart_demo(cfg)?,
        Experiment::Polybound => polybound(cfg)?,
    };
    rep.sort();
    Ok(rep)
}

fn collect(parts: Vec<Result<ExperimentReport>>) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::default();
    for p in parts {
        rep.merge(p?);
    }
    Ok(rep)
}

fn grid_for(cfg: &ExperimentConfig, degree: usize) -> usize {
    cfg.n_grid.unwrap_or_else(|| default_grid(degree))
}

/// `max |r_k|` on `[μ, L]` against `((√κ-1)/(√κ+1))^k` for every schedule,
/// with `μ = 1` and `L = κ`.
pub fn verify_lb_sc(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let name = Experiment::VerifyLbSc.name();
    let ks: BTreeSet<usize> = cfg.k_list.iter().copied().collect();
    let kmax = *ks.iter().next_back().unwrap_or(&0);
    let mut jobs = Vec::new();
    for &kappa in &cfg.kappa_list {
        let info = SideInformation::strongly_convex(1.0, kappa)?;
        for s in sc_schedules(&info, cfg.m)? {
            jobs.push((kappa, info, s));
        }
    }
    let parts = jobs
        .into_par_iter()
        .map(|(kappa, info, sched)| {
            let iv = Interval::closed(1.0, kappa)?;
            let mut rep = ExperimentReport::default();
            symbolic_run_observed::<Wide>(&sched, &info, &[cfg.r], kmax, |traj| {
                let k = traj.steps();
                if ks.contains(&k) {
                    let r = residual_poly(traj, 0)?;
                    let bound = lb_strongly_convex(k, kappa)?;
                    let cert = residual_max(&r, &iv, grid_for(cfg, k))?.against(bound);
                    rep.rows.push(ReportRow::check(
                        name,
                        sched.label(),
                        Some(kappa),
                        Some(k),
                        cert.value,
                        bound,
                        cert.margin,
                        LB_TOL,
                    ));
                }
                Ok(())
            })?;
            Ok(rep)
        })
        .collect();
    collect(parts)
}

/// `½R² max η r_k(η)²` on `[0, L]` against `½R² L/(2k+1)²`, plus the
/// numeric gap on the hard instance at the maximizing curvature.
pub fn verify_lb_smooth(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let name = Experiment::VerifyLbSmooth.name();
    let info = SideInformation::smooth(cfg.l)?;
    let ks: BTreeSet<usize> = cfg.k_list.iter().copied().collect();
    let kmax = *ks.iter().next_back().unwrap_or(&0);
    let half_r2 = 0.5 * cfg.r * cfg.r;
    let parts = smooth_schedules(&info, cfg.m)?
        .into_par_iter()
        .map(|sched| {
            let mut rep = ExperimentReport::default();
            let mut worst = Vec::new();
            symbolic_run_observed::<Wide>(&sched, &info, &[cfg.r], kmax, |traj| {
                let k = traj.steps();
                if ks.contains(&k) {
                    let r = residual_poly(traj, 0)?;
                    let bound = half_r2 * lb_smooth_after(k, cfg.l)?;
                    let cert = weighted_residual_max(&r, cfg.l, grid_for(cfg, k))?;
                    let measured = half_r2 * cert.value;
                    let tol = LB_TOL * bound.max(1.0);
                    rep.rows.push(ReportRow::check(
                        name,
                        sched.label(),
                        None,
                        Some(k),
                        measured,
                        bound,
                        measured - bound,
                        tol,
                    ));
                    worst.push((k, cert.argmax_eta, bound, tol));
                }
                Ok(())
            })?;
            for (k, eta, bound, tol) in worst {
                let label = format!("{}/numeric", sched.label());
                let inst = hard_instance(1, eta, cfg.r)?;
                let states = run(&inst, &sched, &info, &PcliState::zeros(sched.p(), 1), k)?;
                let gap = suboptimality(&inst, states[k].returned())?;
                rep.rows.push(ReportRow::check(
                    name,
                    label,
                    None,
                    Some(k),
                    gap,
                    bound,
                    gap - bound,
                    tol,
                ));
            }
            Ok(rep)
        })
        .collect();
    collect(parts)
}

/// Least squares line through `(x, y)`: slope, intercept, RMS residual.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter(
            "a line fit needs at least two matching points".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "a line fit needs distinct abscissae".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok((slope, intercept, (rss / n).sqrt()))
}

/// Methods whose iteration counts the rate fit measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateMethod {
    Gd,
    AgdStationary,
    RestartedAgdSmooth,
}

impl RateMethod {
    pub const ALL: [RateMethod; 3] = [
        RateMethod::Gd,
        RateMethod::AgdStationary,
        RateMethod::RestartedAgdSmooth,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RateMethod::Gd => "gd-inv-L",
            RateMethod::AgdStationary => "agd-stationary",
            RateMethod::RestartedAgdSmooth => "restart-agd-smooth",
        }
    }

    /// Exponent of `κ` in the iteration count.
    pub fn nominal_slope(self) -> f64 {
        match self {
            RateMethod::Gd => 1.0,
            _ => 0.5,
        }
    }
}

/// Iterations of `method` until `F(x) - F* < eps` (and it stays there) on
/// the sweep, together with a guaranteed upper count.
pub fn iterations_to_eps(
    method: RateMethod,
    inst: &QuadraticInstance,
    kappa: f64,
    eps: f64,
) -> Result<(usize, usize)> {
    let info = SideInformation::strongly_convex(1.0, kappa)?;
    let d = inst.dim();
    let delta0 = suboptimality(inst, &vec![0.0; d])?;
    let ln_ratio = |e: f64| (delta0 / e).ln().max(0.0);
    if method == RateMethod::RestartedAgdSmooth {
        let cert = RateCertificate::agd_smooth();
        let n = epoch_length(&cert, kappa, 1.0)?;
        let sched = agd_smooth_schedule(&info)?;
        let (run, _) = restart_wrap(
            &sched,
            &info,
            &cert,
            inst,
            &vec![0.0; d],
            &RestartOptions::new(eps),
        )?;
        let epochs = (delta0 / eps).log2().floor().max(0.0) as usize + 1;
        return Ok((run.total_iterations, n * epochs));
    }
    let (sched, per_iter) = match method {
        // Δ0 (1 - 1/κ)^{2t}
        RateMethod::Gd => (
            gd_schedule(&info, GdStep::InvL)?,
            -2.0 * (1.0 - 1.0 / kappa).ln(),
        ),
        // 2 Δ0 (1 - 1/√κ)^t
        _ => (
            agd_stationary_schedule(&info)?,
            -(1.0 - 1.0 / kappa.sqrt()).ln(),
        ),
    };
    let lead = if method == RateMethod::Gd {
        0.0
    } else {
        2f64.ln()
    };
    let upper = |e: f64| ((lead + ln_ratio(e)) / per_iter).ceil() as usize;
    let bound = upper(eps);
    let target = eps * 1e-3;
    let horizon = upper(target) + 1;
    let mut last_violation = 0;
    let mut reached = false;
    run_until(
        inst,
        &sched,
        &info,
        &PcliState::zeros(sched.p(), d),
        horizon,
        |t, s| {
            let gap = suboptimality(inst, s.returned()).unwrap_or(f64::NAN);
            if !(gap < eps) {
                last_violation = t;
            }
            reached = gap < target;
            reached
        },
    )?;
    if !reached {
        return Err(Error::NonConvergence(horizon));
    }
    Ok((last_violation + 1, bound))
}

/// Iteration counts over `κ` on a log-spaced spectral sweep and the
/// log-log slopes.
pub fn rate_fit(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let name = Experiment::RateFit.name();
    let cells: Vec<(RateMethod, f64)> = RateMethod::ALL
        .iter()
        .flat_map(|&m| cfg.kappa_list.iter().map(move |&k| (m, k)))
        .collect();
    let counts = cells
        .par_iter()
        .map(|&(method, kappa)| {
            let inst = spectral_sweep(&log_grid(1.0, kappa, cfg.n_eta), cfg.r)?;
            match iterations_to_eps(method, &inst, kappa, cfg.eps) {
                Ok(c) => Ok(Some(c)),
                Err(Error::Divergence { .. } | Error::NonConvergence(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<Option<(usize, usize)>>>>()?;
    let mut rep = ExperimentReport::default();
    for (&(method, kappa), count) in cells.iter().zip(&counts) {
        match count {
            Some((iters, bound)) => rep.rows.push(ReportRow::check(
                name,
                method.label(),
                Some(kappa),
                None,
                *iters as f64,
                *bound as f64,
                *bound as f64 - *iters as f64,
                0.0,
            )),
            None => {
                rep.rows.push(ReportRow::failed(
                    name,
                    format!("{}/diverged", method.label()),
                    Some(kappa),
                    None,
                ));
            }
        }
    }
    for method in RateMethod::ALL {
        let (xs, ys): (Vec<f64>, Vec<f64>) = cells
            .iter()
            .zip(&counts)
            .filter(|((m, _), _)| *m == method)
            .filter_map(|((_, kappa), c)| c.map(|(iters, _)| (kappa.ln(), (iters as f64).ln())))
            .unzip();
        let label = format!("{}/slope", method.label());
        if xs.len() < 2 {
            rep.rows.push(ReportRow::failed(name, label, None, None));
            continue;
        }
        let (slope, _, rms) = fit_line(&xs, &ys)?;
        let nominal = method.nominal_slope();
        rep.rows.push(ReportRow::check(
            name,
            label,
            None,
            None,
            slope,
            nominal,
            SLOPE_TOL - (slope - nominal).abs(),
            0.0,
        ));
        rep.notes.push(format!(
            "{}: slope {slope:.4}, log-log RMS {rms:.3e}",
            method.label()
        ));
    }
    Ok(rep)
}

/// For each `L`-only schedule and `k`: either the residual is
/// `(1 - η/L)^n` or it exceeds that near `L`.
pub fn lemma_b3(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let name = Experiment::LemmaB3.name();
    let info = SideInformation::smooth(cfg.l)?;
    let ks: BTreeSet<usize> = cfg.k_list.iter().copied().collect();
    let kmax = *ks.iter().next_back().unwrap_or(&0);
    let eps = 0.1 * cfg.l;
    let n_grid = cfg.n_grid.unwrap_or(1000);
    let parts = smooth_schedules(&info, cfg.m)?
        .into_par_iter()
        .map(|sched| {
            let mut rep = ExperimentReport::default();
            symbolic_run_observed::<Wide>(&sched, &info, &[1.0], kmax, |traj| {
                let k = traj.steps();
                if !ks.contains(&k) {
                    return Ok(());
                }
                let r = residual_poly(traj, 0)?;
                let row = match lemma_b3_check(&r, cfg.l, eps, n_grid) {
                    Ok(B3Verdict::Exceeds {
                        residual, power, ..
                    }) => ReportRow::check(
                        name,
                        format!("{}/exceeds", sched.label()),
                        None,
                        Some(k),
                        residual,
                        power,
                        residual - power,
                        0.0,
                    ),
                    Ok(B3Verdict::IsPowerForm { max_rel_dev }) => ReportRow::check(
                        name,
                        format!("{}/power-form", sched.label()),
                        None,
                        Some(k),
                        max_rel_dev,
                        1e-9,
                        1e-9 - max_rel_dev,
                        0.0,
                    ),
                    Err(Error::Inconclusive(_)) => ReportRow::failed(
                        name,
                        format!("{}/inconclusive", sched.label()),
                        None,
                        Some(k),
                    ),
                    Err(e) => return Err(e),
                };
                rep.rows.push(row);
                Ok(())
            })?;
            Ok(rep)
        })
        .collect();
    collect(parts)
}

/// Initial state with every point nonzero: slots hold gradients at a
/// second point, SVRG's snapshot is that point.
pub fn stochastic_nonzero_init(
    cfg: &StochasticMethodConfig,
    fs: &FiniteSumInstance,
    r: f64,
) -> PcliState {
    let d = fs.dim();
    let x: Vec<f64> = (0..d).map(|c| 0.5 * r + 0.1 * c as f64).collect();
    let other: Vec<f64> = (0..d).map(|c| -0.25 * r * (1.0 + c as f64)).collect();
    let mut pts = Vec::with_capacity(cfg.p());
    match cfg.method {
        StochasticMethod::Svrg => pts.push(other),
        _ => {
            for comp in fs.components() {
                let mut g = vec![0.0; d];
                comp.gradient_into(&other, &mut g);
                pts.push(g);
            }
        }
    }
    pts.push(x);
    PcliState { points: pts }
}

/// `k` applications of the expected one-step map.
pub fn expected_trajectory(
    cfg: &StochasticMethodConfig,
    fs: &FiniteSumInstance,
    init: &PcliState,
    k: usize,
) -> Result<Vec<PcliState>> {
    let mut out = vec![init.clone()];
    for j in 0..k {
        let next = expected_update(cfg, fs, j)?.apply(&out[j]);
        out.push(next);
    }
    Ok(out)
}

/// Largest `|x_t - x_t^GD|` over `steps` for a method with `m = 1`.
pub fn single_component_deviation(
    method: StochasticMethod,
    inst: &QuadraticInstance,
    steps: usize,
) -> Result<f64> {
    let step = stochastic_step(method, inst.l_eff());
    let cfg = StochasticMethodConfig::new(method, 1, step, 0);
    let fs = finite_sum_split(inst, 1, 0)?;
    let d = inst.dim();
    let mut init = PcliState::zeros(cfg.p(), d);
    let x0: Vec<f64> = (0..d).map(|c| 0.3 - 0.2 * c as f64).collect();
    *init.points.last_mut().expect("state has points") = x0.clone();
    let mut gd = x0;
    let mut g = vec![0.0; d];
    let mut worst = 0.0f64;
    crate::algos::stochastic::stochastic_run_observed(&cfg, &fs, &init, steps, 0, |t, s| {
        if t > 0 {
            fs.components()[0].gradient_into(&gd, &mut g);
            for c in 0..d {
                gd[c] -= step * g[c];
            }
        }
        for (a, b) in s.returned().iter().zip(&gd) {
            worst = worst.max((a - b).abs());
        }
    })?;
    Ok(worst)
}

/// Monte Carlo means of SAG, SAGA and SVRG against their exact expected
/// dynamics, and the `m = 1` reduction to gradient descent.
pub fn stochastic(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let name = Experiment::Stochastic.name();
    let inst = hard_instance(cfg.d, cfg.l, cfg.r)?;
    let fs = finite_sum_split(&inst, cfg.m, cfg.seed)?;
    let ks: BTreeSet<usize> = cfg.k_list.iter().copied().collect();
    let kmax = *ks.iter().next_back().unwrap_or(&0);
    let jobs: Vec<(StochasticMethod, bool)> = STOCHASTIC_METHODS
        .iter()
        .flat_map(|&m| [(m, false), (m, true)])
        .collect();
    let parts = jobs
        .into_par_iter()
        .map(|(method, from_zero)| {
            let mcfg = StochasticMethodConfig::new(
                method,
                cfg.m,
                stochastic_step(method, inst.l_eff()),
                cfg.seed,
            );
            let init = if from_zero {
                PcliState::zeros(mcfg.p(), cfg.d)
            } else {
                stochastic_nonzero_init(&mcfg, &fs, cfg.r)
            };
            let summary = monte_carlo(&mcfg, &fs, &init, kmax, cfg.replicates)?;
            let expected = expected_trajectory(&mcfg, &fs, &init, kmax)?;
            let tag = if from_zero { "from-zero" } else { "from-state" };
            let mut rep = ExperimentReport::default();
            let (bias, spread) = bias_and_expected_gap(
                &inst,
                &summary.mean[kmax],
                &summary.std_err[kmax],
                cfg.replicates,
            );
            rep.notes.push(format!(
                "{}/{tag} k={kmax}: bias f(E x) - f* = {bias:e}, E f(x) - f* = {:e}",
                mcfg.label(),
                bias + spread
            ));
            for &k in &ks {
                let z = max_abs_z(&summary.mean[k], &summary.std_err[k], &expected[k]);
                rep.rows.push(ReportRow::check(
                    name,
                    format!("{}/{tag}", mcfg.label()),
                    None,
                    Some(k),
                    z,
                    Z_MAX,
                    Z_MAX - z,
                    0.0,
                ));
            }
            Ok(rep)
        })
        .collect();
    let mut rep = collect(parts)?;
    for method in [StochasticMethod::Sag, StochasticMethod::Saga] {
        let steps = kmax.max(50);
        let dev = single_component_deviation(method, &inst, steps)?;
        rep.rows.push(ReportRow::check(
            name,
            format!("{}(m=1)/equals-gd", method.name()),
            None,
            Some(steps),
            dev,
            0.0,
            -dev,
            0.0,
        ));
    }
    rep.notes.push(format!(
        "{} replicates per Monte Carlo cell",
        cfg.replicates
    ));
    Ok(rep)
}

/// `f(E x) - f*` for the returned point of the Monte Carlo mean, and the
/// variance term that turns it into `E f(x) - f*`.
fn bias_and_expected_gap(
    inst: &QuadraticInstance,
    mean: &PcliState,
    se: &PcliState,
    n: usize,
) -> (f64, f64) {
    let bias = suboptimality(inst, mean.returned()).unwrap_or(f64::NAN);
    let spread: f64 = inst
        .diag()
        .iter()
        .zip(se.returned())
        .map(|(h, s)| 0.5 * h * s * s * n as f64)
        .sum();
    (bias, spread)
}

/// Largest `|a - b|` over two iterate sequences; `inf` on length mismatch.
fn max_deviation(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

/// Restarted smooth AGD: per-epoch halving, the iteration total, and the
/// fixed points of stationary schedules.
pub fn restart_demo(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let name = Experiment::RestartDemo.name();
    let parts = cfg
        .kappa_list
        .par_iter()
        .map(|&kappa| {
            let mut rep = ExperimentReport::default();
            let info = SideInformation::strongly_convex(1.0, kappa)?;
            let cert = RateCertificate::agd_smooth();
            let sched = agd_smooth_schedule(&info)?;
            let opts = RestartOptions::new(cfg.eps);
            let insts = [
                ("hard", hard_instance(1, 1.0, cfg.r)?),
                ("sweep", spectral_sweep(&log_grid(1.0, kappa, 17), cfg.r)?),
            ];
            for (tag, inst) in &insts {
                let x0 = vec![0.0; inst.dim()];
                let (run, _) = restart_wrap(&sched, &info, &cert, inst, &x0, &opts)?;
                for w in run.epochs.windows(2) {
                    let ratio = w[1].suboptimality / w[0].suboptimality;
                    rep.rows.push(ReportRow::check(
                        name,
                        format!("agd-smooth/{tag}/epoch-ratio"),
                        Some(kappa),
                        Some(w[1].epoch),
                        ratio,
                        0.5,
                        0.5 - ratio,
                        0.5e-6,
                    ));
                }
                let verdict = halving_check(&run.epochs)?;
                rep.rows.push(ReportRow::check(
                    name,
                    format!("agd-smooth/{tag}/halving"),
                    Some(kappa),
                    None,
                    verdict.worst_ratio,
                    0.5,
                    if verdict.pass { 0.0 } else { -1.0 },
                    0.0,
                ));
                let delta0 = run.epochs[0].suboptimality;
                let bound =
                    RESTART_SLACK * (4.0 * cert.c * kappa).sqrt() * (delta0 / cfg.eps).log2();
                let total = run.total_iterations as f64;
                rep.rows.push(ReportRow::check(
                    name,
                    format!("agd-smooth/{tag}/total-iterations"),
                    Some(kappa),
                    Some(run.total_iterations),
                    total,
                    bound,
                    bound - total,
                    0.0,
                ));
            }
            let hard = &insts[0].1;
            for base in [
                gd_schedule(&info, GdStep::InvL)?,
                gd_schedule(&info, GdStep::TwoOverSum)?,
                heavy_ball_schedule(&info)?,
                agd_stationary_schedule(&info)?,
            ] {
                let ((run, restarted), plain) =
                    stationary_pair(&base, &info, &RateCertificate::gd(), hard, cfg.eps)?;
                let dev = max_deviation(&restarted, &plain);
                rep.rows.push(ReportRow::check(
                    name,
                    format!("{}/restart-identical", base.label()),
                    Some(kappa),
                    Some(run.total_iterations),
                    dev,
                    0.0,
                    -dev,
                    0.0,
                ));
            }
            Ok(rep)
        })
        .collect();
    collect(parts)
}

type RestartPair = ((crate::restart::RestartRun, Vec<Vec<f64>>), Vec<Vec<f64>>);

/// A restarted run of a stationary schedule (epochs sized by `cert`) and
/// the plain run of the same length, both from the origin.
pub fn stationary_pair(
    base: &CoefficientSchedule,
    info: &SideInformation,
    cert: &RateCertificate,
    inst: &QuadraticInstance,
    eps: f64,
) -> Result<RestartPair> {
    let x0 = vec![0.0; inst.dim()];
    let restarted = restart_wrap(base, info, cert, inst, &x0, &RestartOptions::new(eps))?;
    let total = restarted.0.total_iterations;
    let plain: Vec<Vec<f64>> = run(
        inst,
        base,
        info,
        &PcliState::replicated(base.p(), &x0),
        total,
    )?
    .iter()
    .map(|s| s.returned().to_vec())
    .collect();
    Ok((restarted, plain))
}

/// `2ρ^n / (1 + ρ^{2n})` with `ρ = (√κ-1)/(√κ+1)`: the max of the scaled
/// Chebyshev residual of degree `n` on `[μ, L]`.
pub fn chebyshev_optimum(n: usize, kappa: f64) -> f64 {
    let rho = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);
    let rn = rho.powi(n as i32);
    2.0 * rn / (1.0 + rn * rn)
}

/// The optimal degree-`n` residual against the lower bound: above it,
/// within a factor two, and equal to the closed form.
pub fn polybound(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let name = Experiment::Polybound.name();
    let cells: Vec<(f64, usize)> = cfg
        .kappa_list
        .iter()
        .flat_map(|&kappa| {
            cfg.k_list
                .iter()
                .filter(|&&n| n >= 1)
                .map(move |&n| (kappa, n))
        })
        .collect();
    let n_grid = cfg.n_grid.unwrap_or(100_000);
    let parts = cells
        .into_par_iter()
        .map(|(kappa, n)| {
            let r = optimal_residual_sc::<Wide>(n - 1, 1.0, kappa)?;
            let value = residual_max(&r, &Interval::closed(1.0, kappa)?, n_grid)?.value;
            let lb = lb_strongly_convex(n, kappa)?;
            let closed = chebyshev_optimum(n, kappa);
            let rel = (value - closed).abs() / closed;
            let row = |label: &str, bound: f64, margin: f64, tol: f64| {
                ReportRow::check(name, label, Some(kappa), Some(n), value, bound, margin, tol)
            };
            Ok(ExperimentReport {
                rows: vec![
                    row("chebyshev/above-lb", lb, value - lb, LB_TOL),
                    row(
                        "chebyshev/within-2x-lb",
                        2.0 * lb,
                        2.0 * lb - value,
                        LB_TOL * lb,
                    ),
                    row("chebyshev/closed-form", closed, 1e-6 - rel, 0.0),
                ],
                notes: Vec::new(),
            })
        })
        .collect();
    collect(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Overrides;

    fn cfg(e: Experiment, over: Overrides) -> ExperimentConfig {
        ExperimentConfig::resolve(e, None, &over).unwrap()
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 + 0.5 * x).collect();
        let (s, b, rms) = fit_line(&xs, &ys).unwrap();
        assert!((s - 0.5).abs() < 1e-15 && (b - 2.0).abs() < 1e-15 && rms < 1e-15);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn small_lb_sc_passes() {
        let c = cfg(
            Experiment::VerifyLbSc,
            Overrides {
                kappa_list: Some(vec![10.0]),
                k_list: Some(vec![0, 3, 8]),
                ..Default::default()
            },
        );
        let rep = run_experiment(&c).unwrap();
        assert_eq!(rep.rows.len(), 8 * 3);
        assert!(rep.all_pass(), "{:?}", rep.failures().collect::<Vec<_>>());
    }

    #[test]
    fn small_lb_smooth_passes() {
        let c = cfg(
            Experiment::VerifyLbSmooth,
            Overrides {
                k_list: Some(vec![0, 1, 5]),
                ..Default::default()
            },
        );
        let rep = run_experiment(&c).unwrap();
        assert_eq!(rep.rows.len(), 5 * 3 * 2);
        assert!(rep.all_pass(), "{:?}", rep.failures().collect::<Vec<_>>());
    }

    #[test]
    fn gd_b3_is_power_form() {
        let c = cfg(
            Experiment::LemmaB3,
            Overrides {
                k_list: Some(vec![0, 1, 4]),
                ..Default::default()
            },
        );
        let rep = run_experiment(&c).unwrap();
        assert!(rep.all_pass());
        let labels: Vec<_> = rep
            .rows
            .iter()
            .filter(|r| r.label.starts_with("gd-inv-L"))
            .map(|r| (r.k, r.label.as_str()))
            .collect();
        assert_eq!(
            labels,
            vec![
                (Some(0), "gd-inv-L/exceeds"),
                (Some(1), "gd-inv-L/power-form"),
                (Some(4), "gd-inv-L/power-form")
            ]
        );
    }

    #[test]
    fn iteration_counts_below_guarantee() {
        let inst = spectral_sweep(&log_grid(1.0, 50.0, 9), 1.0).unwrap();
        for m in RateMethod::ALL {
            let (iters, bound) = iterations_to_eps(m, &inst, 50.0, 1e-4).unwrap();
            assert!(iters <= bound, "{m:?}: {iters} > {bound}");
        }
    }

    #[test]
    fn sag_single_component_is_gd() {
        let inst = hard_instance(3, 2.0, 1.5).unwrap();
        for m in [StochasticMethod::Sag, StochasticMethod::Saga] {
            assert_eq!(single_component_deviation(m, &inst, 40).unwrap(), 0.0);
        }
    }

    #[test]
    fn chebyshev_optimum_between_bounds() {
        for kappa in [2.0, 10.0, 100.0] {
            for n in 1..20 {
                let lb = lb_strongly_convex(n, kappa).unwrap();
                let v = chebyshev_optimum(n, kappa);
                assert!(v >= lb && v <= 2.0 * lb);
            }
        }
    }
}
