//! Concrete schedules: gradient descent, heavy ball and two Nesterov
//! variants, plus the variance-reduced stochastic methods in [`stochastic`].
//!
//! Two-point schedules keep the previous iterate in point 1 and the current
//! iterate in point 2, so `x_{k+1} = β1 x_k + β2 x_{k-1} + α1 ∇f(x_k) + α2 ∇f(x_{k-1})`.

pub mod stochastic;

use crate::error::Result;
use crate::pcli::{CoefficientGrids, CoefficientSchedule, DiagonalOperator, SideInformation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GdStep {
    /// `1 / L`, needs only `L`.
    InvL,
    /// `2 / (L + mu)`.
    TwoOverSum,
}

fn one_point(a: f64) -> CoefficientGrids {
    let mut g = CoefficientGrids::zeros(1);
    g.a[0][0] = DiagonalOperator::Scalar(a);
    g.b[0][0] = DiagonalOperator::Scalar(1.0);
    g
}

/// Grids for `x_{k+1} = β1 x_k + β2 x_{k-1} + α1 ∇f(x_k) + α2 ∇f(x_{k-1})`.
pub fn two_point(beta1: f64, beta2: f64, alpha1: f64, alpha2: f64) -> CoefficientGrids {
    let mut g = CoefficientGrids::zeros(2);
    g.b[0][1] = DiagonalOperator::Scalar(1.0);
    g.b[1][1] = DiagonalOperator::Scalar(beta1);
    g.b[1][0] = DiagonalOperator::Scalar(beta2);
    g.a[1][1] = DiagonalOperator::Scalar(alpha1);
    g.a[1][0] = DiagonalOperator::Scalar(alpha2);
    g
}

pub fn gd_schedule(info: &SideInformation, step: GdStep) -> Result<CoefficientSchedule> {
    Ok(match step {
        GdStep::InvL => {
            CoefficientSchedule::new("gd-inv-L", 1, |_, info| Ok(one_point(-1.0 / info.l)))
        }
        GdStep::TwoOverSum => {
            info.require_mu("gd-two-over-sum")?;
            CoefficientSchedule::new("gd-two-over-sum", 1, |_, info| {
                let mu = info.require_mu("gd-two-over-sum")?;
                Ok(one_point(-2.0 / (info.l + mu)))
            })
        }
    })
}

/// Polyak's heavy ball with the optimal constant parameters.
pub fn heavy_ball_schedule(info: &SideInformation) -> Result<CoefficientSchedule> {
    info.require_mu("heavy-ball")?;
    Ok(CoefficientSchedule::new("heavy-ball", 2, |_, info| {
        let mu = info.require_mu("heavy-ball")?;
        let kappa = info.l / mu;
        let beta = ((kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0)).powi(2);
        let alpha = 4.0 / (info.l.sqrt() + mu.sqrt()).powi(2);
        Ok(two_point(1.0 + beta, -beta, -alpha, 0.0))
    }))
}

/// Nesterov's constant-momentum scheme for strongly convex objectives:
/// `y = x_k + m (x_k - x_{k-1})`, `x_{k+1} = y - ∇f(y) / L`, with
/// `m = (√κ - 1)/(√κ + 1)`.
pub fn agd_stationary_schedule(info: &SideInformation) -> Result<CoefficientSchedule> {
    info.require_mu("agd-stationary")?;
    Ok(CoefficientSchedule::new("agd-stationary", 2, |_, info| {
        let mu = info.require_mu("agd-stationary")?;
        let s = (info.l / mu).sqrt();
        Ok(momentum_grids((s - 1.0) / (s + 1.0), info.l))
    }))
}

fn momentum_grids(m: f64, l: f64) -> CoefficientGrids {
    two_point(1.0 + m, -m, -(1.0 + m) / l, m / l)
}

/// Momentum of step `k` for the smooth scheme: `(t_k - 1) / t_{k+1}` with
/// `t_0 = 1`, `t_{k+1} = (1 + √(1 + 4 t_k²)) / 2`.
pub fn agd_smooth_momentum(k: usize) -> f64 {
    let next = |t: f64| (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
    let mut t = 1.0;
    for _ in 0..k {
        t = next(t);
    }
    (t - 1.0) / next(t)
}

/// Nesterov's method for smooth convex objectives (uses only `L`). On a
/// quadratic the gap after `k` steps is at most `2 L R² / (k + 1)²`.
pub fn agd_smooth_schedule(info: &SideInformation) -> Result<CoefficientSchedule> {
    SideInformation::smooth(info.l)?;
    Ok(CoefficientSchedule::new("agd-smooth", 2, |k, info| {
        Ok(momentum_grids(agd_smooth_momentum(k), info.l))
    }))
}
