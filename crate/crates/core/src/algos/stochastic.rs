//! SAG, SAGA and SVRG on finite sums `F = Σ_i f_i`, their exact expected
//! one-step maps, and the p-CLI schedules those maps define.
//!
//! States reuse [`PcliState`]. For SAG and SAGA points `0..m` hold the
//! stored component gradients and point `m` holds the iterate. For SVRG
//! point 0 is the snapshot and point 1 the iterate.
//!
//! Randomness is counter based: the component drawn at step `k` of
//! replicate `r` depends only on `(seed, r, k)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instances::FiniteSumInstance;
use crate::pcli::{
    CoefficientGrids, CoefficientSchedule, DiagonalOperator, GradientOracle, PcliState,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StochasticMethod {
    Sag,
    Saga,
    Svrg,
}

impl StochasticMethod {
    pub fn name(self) -> &'static str {
        match self {
            StochasticMethod::Sag => "sag",
            StochasticMethod::Saga => "saga",
            StochasticMethod::Svrg => "svrg",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticMethodConfig {
    pub method: StochasticMethod,
    pub m: usize,
    pub step: f64,
    /// Snapshot refresh period (SVRG only).
    pub svrg_epoch: usize,
    pub seed: u64,
}

impl StochasticMethodConfig {
    pub fn new(method: StochasticMethod, m: usize, step: f64, seed: u64) -> Self {
        StochasticMethodConfig {
            method,
            m,
            step,
            svrg_epoch: 2 * m.max(1),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || !(self.step.is_finite() && self.step > 0.0) || self.svrg_epoch == 0 {
            return Err(invalid(format!(
                "stochastic config needs m >= 1, step > 0, svrg_epoch >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    /// Points in the state.
    pub fn p(&self) -> usize {
        match self.method {
            StochasticMethod::Sag | StochasticMethod::Saga => self.m + 1,
            StochasticMethod::Svrg => 2,
        }
    }

    pub fn label(&self) -> String {
        format!("{}(m={})", self.method.name(), self.m)
    }

    fn refresh(&self, k: usize) -> bool {
        k.is_multiple_of(self.svrg_epoch)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `r` under master seed `seed`.
pub fn replicate_seed(seed: u64, r: u64) -> u64 {
    splitmix64(seed ^ splitmix64(r))
}

/// Component drawn at step `k` by the replicate with seed `rseed`.
pub fn sample_index(rseed: u64, k: usize, m: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(rseed);
    rng.set_stream(k as u64);
    rng.gen_range(0..m)
}

fn check(cfg: &StochasticMethodConfig, fs: &FiniteSumInstance, state: &PcliState) -> Result<()> {
    cfg.validate()?;
    if fs.m() != cfg.m {
        return Err(Error::DimensionMismatch(format!(
            "config has m = {} but the instance has {} components",
            cfg.m,
            fs.m()
        )));
    }
    if state.p() != cfg.p() || state.points.iter().any(|x| x.len() != fs.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "state must hold {} points of dimension {}",
            cfg.p(),
            fs.dim()
        )));
    }
    Ok(())
}

struct Scratch {
    g: Vec<f64>,
    h: Vec<f64>,
}

/// Advance one step drawing component `j`.
fn advance(
    cfg: &StochasticMethodConfig,
    fs: &FiniteSumInstance,
    state: &mut PcliState,
    k: usize,
    j: usize,
    s: &mut Scratch,
) {
    let comps = fs.components();
    let m = cfg.m;
    let d = fs.dim();
    let alpha = cfg.step;
    match cfg.method {
        StochasticMethod::Sag => {
            let (slots, x) = state.points.split_at_mut(m);
            comps[j].gradient_into(&x[0], &mut slots[j]);
            for c in 0..d {
                let mut sum = 0.0;
                for y in slots.iter() {
                    sum += y[c];
                }
                x[0][c] -= alpha * sum;
            }
        }
        StochasticMethod::Saga => {
            let (slots, x) = state.points.split_at_mut(m);
            comps[j].gradient_into(&x[0], &mut s.g);
            let mf = m as f64;
            for c in 0..d {
                // m ∇f_j(x) - m y_j + Σ_i y_i, grouped so that m = 1 is plain GD
                let mut others = 0.0;
                for (i, y) in slots.iter().enumerate() {
                    if i != j {
                        others += y[c];
                    }
                }
                let est = mf * s.g[c] + others - (mf - 1.0) * slots[j][c];
                x[0][c] -= alpha * est;
            }
            slots[j].copy_from_slice(&s.g);
        }
        StochasticMethod::Svrg => {
            let (snap, x) = state.points.split_at_mut(1);
            if cfg.refresh(k) {
                snap[0].copy_from_slice(&x[0]);
            }
            let (snap, x) = (&snap[0], &mut x[0]);
            fs.total().gradient_into(snap, &mut s.h);
            comps[j].gradient_into(x, &mut s.g);
            let mf = m as f64;
            for c in 0..d {
                let gj_snap = comps[j].diag()[c] * snap[c] + comps[j].linear()[c];
                let est = mf * (s.g[c] - gj_snap) + s.h[c];
                x[c] -= alpha * est;
            }
        }
    }
}

/// Run replicate `r` for `k` steps, calling `observe(step, state)` for
/// `step = 0..=k`.
pub fn stochastic_run_observed(
    cfg: &StochasticMethodConfig,
    fs: &FiniteSumInstance,
    init: &PcliState,
    k: usize,
    r: u64,
    mut observe: impl FnMut(usize, &PcliState),
) -> Result<PcliState> {
    check(cfg, fs, init)?;
    let rseed = replicate_seed(cfg.seed, r);
    let d = fs.dim();
    let mut scratch = Scratch {
        g: vec![0.0; d],
        h: vec![0.0; d],
    };
    let mut state = init.clone();
    observe(0, &state);
    for step in 0..k {
        let j = sample_index(rseed, step, cfg.m);
        advance(cfg, fs, &mut state, step, j, &mut scratch);
        if state.points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { step: step + 1 });
        }
        observe(step + 1, &state);
    }
    Ok(state)
}

/// All `k + 1` states of replicate 0.
pub fn stochastic_run(
    cfg: &StochasticMethodConfig,
    fs: &FiniteSumInstance,
    init: &PcliState,
    k: usize,
) -> Result<Vec<PcliState>> {
    let mut out = Vec::with_capacity(k + 1);
    stochastic_run_observed(cfg, fs, init, k, 0, |_, s| out.push(s.clone()))?;
    Ok(out)
}

/// `state ↦ M state + o` with diagonal `d x d` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineBlockMap {
    /// `blocks[i][j][c]`: coefficient of point `j`, coordinate `c` in point `i`.
    pub blocks: Vec<Vec<Vec<f64>>>,
    pub offset: Vec<Vec<f64>>,
}

impl AffineBlockMap {
    fn zeros(p: usize, d: usize) -> Self {
        AffineBlockMap {
            blocks: vec![vec![vec![0.0; d]; p]; p],
            offset: vec![vec![0.0; d]; p],
        }
    }

    pub fn apply(&self, state: &PcliState) -> PcliState {
        let points = self
            .blocks
            .iter()
            .zip(&self.offset)
            .map(|(row, off)| {
                let mut out = off.clone();
                for (blk, x) in row.iter().zip(&state.points) {
                    for c in 0..out.len() {
                        out[c] += blk[c] * x[c];
                    }
                }
                out
            })
            .collect();
        PcliState { points }
    }
}

/// Exact `E[state_{k+1} | state_k]` for step `k`.
pub fn expected_update(
    cfg: &StochasticMethodConfig,
    fs: &FiniteSumInstance,
    k: usize,
) -> Result<AffineBlockMap> {
    cfg.validate()?;
    if fs.m() != cfg.m {
        return Err(Error::DimensionMismatch(
            "component count differs from m".into(),
        ));
    }
    let (m, d, alpha) = (cfg.m, fs.dim(), cfg.step);
    let mf = m as f64;
    let total = fs.total();
    let mut map = AffineBlockMap::zeros(cfg.p(), d);
    match cfg.method {
        StochasticMethod::Sag | StochasticMethod::Saga => {
            for (i, comp) in fs.components().iter().enumerate() {
                for c in 0..d {
                    map.blocks[i][i][c] = 1.0 - 1.0 / mf;
                    map.blocks[i][m][c] = comp.diag()[c] / mf;
                    map.offset[i][c] = comp.linear()[c] / mf;
                }
            }
            let sag = cfg.method == StochasticMethod::Sag;
            let grad_weight = if sag { alpha / mf } else { alpha };
            for c in 0..d {
                if sag {
                    for j in 0..m {
                        map.blocks[m][j][c] = -alpha * (1.0 - 1.0 / mf);
                    }
                }
                map.blocks[m][m][c] = 1.0 - grad_weight * total.diag()[c];
                map.offset[m][c] = -grad_weight * total.linear()[c];
            }
        }
        StochasticMethod::Svrg => {
            let src = if cfg.refresh(k) { 1 } else { 0 };
            for c in 0..d {
                map.blocks[0][src][c] = 1.0;
                map.blocks[1][1][c] = 1.0 - alpha * total.diag()[c];
                map.offset[1][c] = -alpha * total.linear()[c];
            }
        }
    }
    Ok(map)
}

/// The expected dynamics as a p-CLI in `∇F`, valid when every component
/// is `f_i = W_i ⊙ F` (e.g. a split). `weights[i]` is `W_i`.
pub fn expected_schedule(
    cfg: &StochasticMethodConfig,
    weights: &[DiagonalOperator],
) -> Result<CoefficientSchedule> {
    cfg.validate()?;
    let needs = match cfg.method {
        StochasticMethod::Svrg => 0,
        _ => cfg.m,
    };
    if needs > 0 && weights.len() != needs {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for m = {}",
            weights.len(),
            cfg.m
        )));
    }
    let cfg = cfg.clone();
    let weights = weights.to_vec();
    let label = format!("{}-expected(m={})", cfg.method.name(), cfg.m);
    let p = cfg.p();
    Ok(CoefficientSchedule::new(label, p, move |k, _| {
        let (m, alpha) = (cfg.m, cfg.step);
        let mf = m as f64;
        let mut g = CoefficientGrids::zeros(p);
        match cfg.method {
            StochasticMethod::Sag | StochasticMethod::Saga => {
                for (i, w) in weights.iter().enumerate() {
                    g.b[i][i] = (1.0 - 1.0 / mf).into();
                    g.a[i][m] = match w {
                        DiagonalOperator::Scalar(s) => (s / mf).into(),
                        DiagonalOperator::Diagonal(v) => {
                            DiagonalOperator::Diagonal(v.iter().map(|s| s / mf).collect())
                        }
                    };
                }
                g.b[m][m] = 1.0.into();
                if cfg.method == StochasticMethod::Sag {
                    for j in 0..m {
                        g.b[m][j] = (-alpha * (1.0 - 1.0 / mf)).into();
                    }
                    g.a[m][m] = (-alpha / mf).into();
                } else {
                    g.a[m][m] = (-alpha).into();
                }
            }
            StochasticMethod::Svrg => {
                let src = if cfg.refresh(k) { 1 } else { 0 };
                g.b[0][src] = 1.0.into();
                g.b[1][1] = 1.0.into();
                g.a[1][1] = (-alpha).into();
            }
        }
        Ok(g)
    }))
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Per-step replicate means and standard errors (indexed `0..=k`).
#[derive(Clone, Debug)]
pub struct MonteCarloSummary {
    pub replicates: usize,
    pub mean: Vec<PcliState>,
    pub std_err: Vec<PcliState>,
}

/// Empirical mean trajectory over `replicates` independent runs.
pub fn monte_carlo(
    cfg: &StochasticMethodConfig,
    fs: &FiniteSumInstance,
    init: &PcliState,
    k: usize,
    replicates: usize,
) -> Result<MonteCarloSummary> {
    if replicates < 2 {
        return Err(invalid("Monte Carlo needs at least two replicates"));
    }
    check(cfg, fs, init)?;
    let (p, d) = (init.p(), fs.dim());
    let cells = (k + 1) * p * d;
    // shift by the first replicate to keep the squared sums well conditioned
    let mut shift = vec![0.0; cells];
    let mut sums = vec![CompensatedSum::default(); cells];
    let mut squares = vec![CompensatedSum::default(); cells];
    for r in 0..replicates as u64 {
        stochastic_run_observed(cfg, fs, init, k, r, |step, s| {
            for (i, x) in s.points.iter().enumerate() {
                for (c, &v) in x.iter().enumerate() {
                    let idx = (step * p + i) * d + c;
                    if r == 0 {
                        shift[idx] = v;
                    }
                    let dv = v - shift[idx];
                    sums[idx].add(dv);
                    squares[idx].add(dv * dv);
                }
            }
        })?;
    }
    let n = replicates as f64;
    let mut mean = Vec::with_capacity(k + 1);
    let mut std_err = Vec::with_capacity(k + 1);
    for step in 0..=k {
        let mut mpts = vec![vec![0.0; d]; p];
        let mut spts = vec![vec![0.0; d]; p];
        for i in 0..p {
            for c in 0..d {
                let idx = (step * p + i) * d + c;
                let m1 = sums[idx].value() / n;
                let var = ((squares[idx].value() - n * m1 * m1) / (n - 1.0)).max(0.0);
                mpts[i][c] = shift[idx] + m1;
                spts[i][c] = (var / n).sqrt();
            }
        }
        mean.push(PcliState { points: mpts });
        std_err.push(PcliState { points: spts });
    }
    Ok(MonteCarloSummary {
        replicates,
        mean,
        std_err,
    })
}

/// Largest `|mean - expected| / se` over all points and coordinates. A
/// cell with zero standard error must match exactly (else `inf`).
pub fn max_abs_z(mean: &PcliState, se: &PcliState, expected: &PcliState) -> f64 {
    let mut worst = 0.0f64;
    for ((mp, sp), ep) in mean.points.iter().zip(&se.points).zip(&expected.points) {
        for ((&m, &s), &e) in mp.iter().zip(sp).zip(ep) {
            let diff = (m - e).abs();
            let z = if s > 0.0 {
                diff / s
            } else if diff <= 1e-14 * e.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
    }
    worst
}
