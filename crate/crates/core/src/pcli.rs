//! Oblivious p-CLI schedules, numeric trajectories and the matching symbolic
//! trajectories on the separable quadratic family.
//!
//! A step maps `p` points `x_1..x_p` to
//! `x_i' = Σ_j A_ij ∇f(x_j) + B_ij x_j`, where the coefficient grids may
//! depend on the step index and the side information but never on the
//! objective. The returned iterate is the last point.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::poly::{Polynomial, Real, Wide};

/// Iterates beyond this magnitude are reported as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e100;

/// Problem-class information available to a schedule: smoothness `L` and,
/// for strongly convex classes, `mu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideInformation {
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: Option<f64>,
}

impl SideInformation {
    pub fn smooth(l: f64) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(invalid(format!("L must be positive, got {l}")));
        }
        Ok(SideInformation { l, mu: None })
    }

    pub fn strongly_convex(mu: f64, l: f64) -> Result<Self> {
        let info = Self::smooth(l)?;
        if !(mu.is_finite() && mu > 0.0 && mu <= l) {
            return Err(invalid(format!("need 0 < mu <= L, got mu = {mu}, L = {l}")));
        }
        Ok(SideInformation {
            mu: Some(mu),
            ..info
        })
    }

    pub fn kappa(&self) -> Option<f64> {
        self.mu.map(|mu| self.l / mu)
    }

    pub fn require_mu(&self, who: &str) -> Result<f64> {
        self.mu.ok_or_else(|| Error::MissingMu(who.to_string()))
    }
}

/// A coefficient acting coordinate-wise: a scalar multiple of the identity
/// or an explicit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub enum DiagonalOperator {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

impl DiagonalOperator {
    pub const ZERO: DiagonalOperator = DiagonalOperator::Scalar(0.0);

    pub fn entry(&self, c: usize) -> f64 {
        match self {
            DiagonalOperator::Scalar(a) => *a,
            DiagonalOperator::Diagonal(v) => v[c],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DiagonalOperator::Scalar(a) => *a == 0.0,
            DiagonalOperator::Diagonal(v) => v.iter().all(|&a| a == 0.0),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            DiagonalOperator::Diagonal(v) if v.len() != d => Err(Error::DimensionMismatch(
                format!("diagonal operator of length {} in dimension {d}", v.len()),
            )),
            _ => Ok(()),
        }
    }
}

impl From<f64> for DiagonalOperator {
    fn from(a: f64) -> Self {
        DiagonalOperator::Scalar(a)
    }
}

/// The `p x p` grids `A` (gradient) and `B` (iterate) for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientGrids {
    pub a: Vec<Vec<DiagonalOperator>>,
    pub b: Vec<Vec<DiagonalOperator>>,
}

impl CoefficientGrids {
    pub fn zeros(p: usize) -> Self {
        let row = vec![DiagonalOperator::ZERO; p];
        CoefficientGrids {
            a: vec![row.clone(); p],
            b: vec![row; p],
        }
    }

    pub fn p(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self, p: usize, d: usize) -> Result<()> {
        let square =
            |g: &Vec<Vec<DiagonalOperator>>| g.len() == p && g.iter().all(|r| r.len() == p);
        if !square(&self.a) || !square(&self.b) {
            return Err(Error::DimensionMismatch(format!(
                "coefficient grids are not {p} x {p}"
            )));
        }
        self.a
            .iter()
            .chain(&self.b)
            .flatten()
            .try_for_each(|op| op.check_dim(d))
    }
}

type Generator = dyn Fn(usize, &SideInformation) -> Result<CoefficientGrids> + Send + Sync;

/// A labelled rule producing the coefficient grids of step `k`.
#[derive(Clone)]
pub struct CoefficientSchedule {
    label: String,
    p: usize,
    generator: Arc<Generator>,
}

impl CoefficientSchedule {
    pub fn new(
        label: impl Into<String>,
        p: usize,
        generator: impl Fn(usize, &SideInformation) -> Result<CoefficientGrids> + Send + Sync + 'static,
    ) -> Self {
        CoefficientSchedule {
            label: label.into(),
            p,
            generator: Arc::new(generator),
        }
    }

    /// A schedule whose grids never change.
    pub fn stationary(label: impl Into<String>, grids: CoefficientGrids) -> Self {
        let p = grids.p();
        Self::new(label, p, move |_, _| Ok(grids.clone()))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn coefficients(&self, k: usize, info: &SideInformation) -> Result<CoefficientGrids> {
        let grids = (self.generator)(k, info)?;
        if grids.p() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "schedule `{}` declared p = {} but produced {} points",
                self.label,
                self.p,
                grids.p()
            )));
        }
        Ok(grids)
    }
}

impl fmt::Debug for CoefficientSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSchedule")
            .field("label", &self.label)
            .field("p", &self.p)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stationarity {
    Stationary,
    Oblivious,
}

/// Stationary iff the grids agree at every probed step.
pub fn classify(
    sched: &CoefficientSchedule,
    info: &SideInformation,
    probe_ks: &[usize],
) -> Result<Stationarity> {
    let Some((&first, rest)) = probe_ks.split_first() else {
        return Err(invalid("classify needs at least one probe step"));
    };
    let base = sched.coefficients(first, info)?;
    for &k in rest {
        if sched.coefficients(k, info)? != base {
            return Ok(Stationarity::Oblivious);
        }
    }
    Ok(Stationarity::Stationary)
}

/// The `p` points of a p-CLI, each in dimension `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PcliState {
    pub points: Vec<Vec<f64>>,
}

impl PcliState {
    pub fn zeros(p: usize, d: usize) -> Self {
        PcliState {
            points: vec![vec![0.0; d]; p],
        }
    }

    /// Every point set to `x`.
    pub fn replicated(p: usize, x: &[f64]) -> Self {
        PcliState {
            points: vec![x.to_vec(); p],
        }
    }

    pub fn p(&self) -> usize {
        self.points.len()
    }

    pub fn d(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// The returned iterate (point `p`).
    pub fn returned(&self) -> &[f64] {
        self.points.last().map_or(&[], Vec::as_slice)
    }
}

pub trait GradientOracle {
    fn dim(&self) -> usize;
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);
}

fn check_state(state: &PcliState, p: usize, d: usize) -> Result<()> {
    if state.p() != p || state.points.iter().any(|x| x.len() != d) {
        return Err(Error::DimensionMismatch(format!(
            "state has {} points, expected {p} points of dimension {d}",
            state.p()
        )));
    }
    Ok(())
}

/// Reusable buffers for repeated steps.
pub(crate) struct Stepper {
    grads: Vec<Vec<f64>>,
    next: Vec<Vec<f64>>,
}

impl Stepper {
    pub(crate) fn new(p: usize, d: usize) -> Self {
        Stepper {
            grads: vec![vec![0.0; d]; p],
            next: vec![vec![0.0; d]; p],
        }
    }

    pub(crate) fn advance(
        &mut self,
        state: &mut PcliState,
        grids: &CoefficientGrids,
        oracle: &impl GradientOracle,
    ) {
        for (x, g) in state.points.iter().zip(&mut self.grads) {
            oracle.gradient_into(x, g);
        }
        for (i, out) in self.next.iter_mut().enumerate() {
            out.fill(0.0);
            for j in 0..state.points.len() {
                let (a, b) = (&grids.a[i][j], &grids.b[i][j]);
                if !a.is_zero() {
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += a.entry(c) * self.grads[j][c];
                    }
                }
                if !b.is_zero() {
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += b.entry(c) * state.points[j][c];
                    }
                }
            }
        }
        std::mem::swap(&mut state.points, &mut self.next);
    }
}

pub(crate) fn diverged(state: &PcliState) -> bool {
    state
        .points
        .iter()
        .flatten()
        .any(|x| !(x.abs() <= DIVERGENCE_LIMIT))
}

/// One step with the grids of step `k`.
pub fn step(
    state: &PcliState,
    sched: &CoefficientSchedule,
    k: usize,
    info: &SideInformation,
    oracle: &impl GradientOracle,
) -> Result<PcliState> {
    let d = oracle.dim();
    check_state(state, sched.p(), d)?;
    let grids = sched.coefficients(k, info)?;
    grids.validate(sched.p(), d)?;
    let mut next = state.clone();
    Stepper::new(sched.p(), d).advance(&mut next, &grids, oracle);
    if diverged(&next) {
        return Err(Error::Divergence { step: k + 1 });
    }
    Ok(next)
}

/// Run `k` steps, calling `observe(j, state)` for `j = 0..=k`. Returns the
/// final state.
pub fn run_observed(
    oracle: &impl GradientOracle,
    sched: &CoefficientSchedule,
    info: &SideInformation,
    init: &PcliState,
    k: usize,
    mut observe: impl FnMut(usize, &PcliState),
) -> Result<PcliState> {
    let d = oracle.dim();
    check_state(init, sched.p(), d)?;
    let mut state = init.clone();
    let mut stepper = Stepper::new(sched.p(), d);
    observe(0, &state);
    for j in 0..k {
        let grids = sched.coefficients(j, info)?;
        grids.validate(sched.p(), d)?;
        stepper.advance(&mut state, &grids, oracle);
        if diverged(&state) {
            return Err(Error::Divergence { step: j + 1 });
        }
        observe(j + 1, &state);
    }
    Ok(state)
}

/// Step until `stop(j, state)` returns true or `max_k` steps have run.
/// Returns the number of steps taken and the final state.
pub fn run_until(
    oracle: &impl GradientOracle,
    sched: &CoefficientSchedule,
    info: &SideInformation,
    init: &PcliState,
    max_k: usize,
    mut stop: impl FnMut(usize, &PcliState) -> bool,
) -> Result<(usize, PcliState)> {
    let d = oracle.dim();
    check_state(init, sched.p(), d)?;
    let mut state = init.clone();
    let mut stepper = Stepper::new(sched.p(), d);
    if stop(0, &state) {
        return Ok((0, state));
    }
    for j in 0..max_k {
        let grids = sched.coefficients(j, info)?;
        grids.validate(sched.p(), d)?;
        stepper.advance(&mut state, &grids, oracle);
        if diverged(&state) {
            return Err(Error::Divergence { step: j + 1 });
        }
        if stop(j + 1, &state) {
            return Ok((j + 1, state));
        }
    }
    Ok((max_k, state))
}

/// All `k + 1` states of a run, initial state first.
pub fn run(
    oracle: &impl GradientOracle,
    sched: &CoefficientSchedule,
    info: &SideInformation,
    init: &PcliState,
    k: usize,
) -> Result<Vec<PcliState>> {
    let mut states = Vec::with_capacity(k + 1);
    run_observed(oracle, sched, info, init, k, |_, s| states.push(s.clone()))?;
    Ok(states)
}

/// Trajectory of a p-CLI on `f(x) = ½ η Σ x_c² - η v·x`, zero start, as
/// polynomials in `η`: point `i`, coordinate `c` equals `η s_{i,c}(η)`.
#[derive(Clone, Debug)]
pub struct SymbolicTrajectory<T = Wide> {
    steps: usize,
    v: Vec<f64>,
    s: Vec<Vec<Polynomial<T>>>,
}

impl<T: Real> SymbolicTrajectory<T> {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn p(&self) -> usize {
        self.s.len()
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn s(&self, i: usize, c: usize) -> &Polynomial<T> {
        &self.s[i][c]
    }

    /// Point `i` of the state at curvature `eta`.
    pub fn point(&self, i: usize, eta: f64) -> Vec<f64> {
        let e = T::from_f64(eta);
        self.s[i].iter().map(|s| (e * s.eval(e)).to_f64()).collect()
    }

    pub fn returned(&self, eta: f64) -> Vec<f64> {
        self.point(self.p() - 1, eta)
    }
}

/// Like [`symbolic_run`], calling `observe` after every step (and once at
/// step 0).
pub fn symbolic_run_observed<T: Real>(
    sched: &CoefficientSchedule,
    info: &SideInformation,
    v: &[f64],
    k: usize,
    mut observe: impl FnMut(&SymbolicTrajectory<T>) -> Result<()>,
) -> Result<SymbolicTrajectory<T>> {
    let (p, d) = (sched.p(), v.len());
    if d == 0 {
        return Err(Error::DimensionMismatch("v is empty".into()));
    }
    let mut traj = SymbolicTrajectory {
        steps: 0,
        v: v.to_vec(),
        s: vec![vec![Polynomial::zero(); d]; p],
    };
    observe(&traj)?;
    for j in 0..k {
        let grids = sched.coefficients(j, info)?;
        grids.validate(p, d)?;
        let mut next = vec![Vec::with_capacity(d); p];
        for (i, row) in next.iter_mut().enumerate() {
            for c in 0..d {
                let mut acc = Polynomial::<T>::zero();
                let mut a_sum = T::zero();
                for jj in 0..p {
                    let a = T::from_f64(grids.a[i][jj].entry(c));
                    let b = T::from_f64(grids.b[i][jj].entry(c));
                    a_sum += a;
                    acc = &acc + &traj.s[jj][c].mul_linear(a, b)?;
                }
                let shift = Polynomial::constant(a_sum * T::from_f64(v[c]));
                row.push(&acc - &shift);
            }
        }
        traj.s = next;
        traj.steps = j + 1;
        observe(&traj)?;
    }
    Ok(traj)
}

/// Symbolic counterpart of [`run`] on the hard family with minimizer `v`.
pub fn symbolic_run<T: Real>(
    sched: &CoefficientSchedule,
    info: &SideInformation,
    v: &[f64],
    k: usize,
) -> Result<SymbolicTrajectory<T>> {
    symbolic_run_observed(sched, info, v, k, |_| Ok(()))
}

/// Residual `r(η) = 1 - η s_{p,c}(η) / v_c`, so that the returned iterate
/// satisfies `x_c - v_c = -v_c r(η)`.
pub fn residual_poly<T: Real>(traj: &SymbolicTrajectory<T>, coord: usize) -> Result<Polynomial<T>> {
    let vc = *traj
        .v
        .get(coord)
        .ok_or_else(|| Error::DimensionMismatch(format!("coordinate {coord} out of range")))?;
    if vc == 0.0 {
        return Err(Error::ZeroAnchor(coord));
    }
    let s = traj.s(traj.p() - 1, coord);
    let scale = -T::one() / T::from_f64(vc);
    let mut coeffs = Vec::with_capacity(s.coeffs().len() + 1);
    coeffs.push(T::one());
    coeffs.extend(s.coeffs().iter().map(|&c| c * scale));
    Ok(Polynomial::new(coeffs))
}
