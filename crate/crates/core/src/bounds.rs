//! Closed-form lower bounds and numerical min-max certificates for residual
//! polynomials.
//!
//! Maxima are found on a uniform mesh followed by a golden-section
//! refinement in the best cell. For extended-precision inputs the scan runs
//! on a Chebyshev interpolant of the residual (exact up to rounding, since the
//! interpolant has the same degree); reported values are always re-evaluated
//! in the coefficient precision.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::poly::{Polynomial, Real};

/// Mesh values within this relative distance of the maximum count as ties;
/// the lowest index wins.
pub const TIE_RTOL: f64 = 1e-9;

/// Mesh size used when the caller has no preference.
pub fn default_grid(degree: usize) -> usize {
    if degree <= 30 {
        10_000
    } else {
        100_000
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub open_lo: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        Self::build(lo, hi, false)
    }

    /// `(lo, hi]`.
    pub fn open_lo(lo: f64, hi: f64) -> Result<Self> {
        Self::build(lo, hi, true)
    }

    fn build(lo: f64, hi: f64, open_lo: bool) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("degenerate interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi, open_lo })
    }

    pub fn contains(&self, x: f64) -> bool {
        x <= self.hi && (x > self.lo || (!self.open_lo && x == self.lo))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinMaxCertificate {
    pub value: f64,
    pub argmax_eta: f64,
    pub bound: f64,
    pub margin: f64,
}

impl MinMaxCertificate {
    fn new(value: f64, argmax_eta: f64) -> Self {
        MinMaxCertificate {
            value,
            argmax_eta,
            bound: 0.0,
            margin: value,
        }
    }

    /// Attach a bound; `margin = value - bound`.
    pub fn against(self, bound: f64) -> Self {
        MinMaxCertificate {
            bound,
            margin: self.value - bound,
            ..self
        }
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa.is_finite() && kappa >= 1.0) {
        return Err(invalid(format!(
            "condition number must be >= 1, got {kappa}"
        )));
    }
    Ok(())
}

/// `((√κ - 1)/(√κ + 1))^n`: no residual of degree `n` with `q(0) = 1` stays
/// below this on `[μ, L]`. Degree 0 gives 1 (the constant residual).
pub fn lb_strongly_convex(residual_degree: usize, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if residual_degree == 0 {
        return Ok(1.0);
    }
    let s = kappa.sqrt();
    Ok(((s - 1.0) / (s + 1.0)).powi(residual_degree as i32))
}

/// `L / (2k + 3)^2`: lower bound on `max η (1 + s(η) η)^2` over `[0, L]`
/// for `s` of degree at most `k`.
pub fn lb_smooth(s_degree: usize, l: f64) -> Result<f64> {
    check_l(l)?;
    let d = (2 * s_degree + 3) as f64;
    Ok(l / (d * d))
}

/// Same bound indexed by iteration count: after `k` steps `s` has degree at
/// most `k - 1`, giving `L / (2k + 1)^2` (and `L` for `k = 0`).
pub fn lb_smooth_after(iterations: usize, l: f64) -> Result<f64> {
    check_l(l)?;
    let d = (2 * iterations + 1) as f64;
    Ok(l / (d * d))
}

fn check_l(l: f64) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(invalid(format!("smoothness must be positive, got {l}")));
    }
    Ok(())
}

/// Fast `f64` stand-in for a polynomial on an interval.
enum Proxy {
    Horner(Vec<f64>),
    Chebyshev {
        coeffs: Vec<f64>,
        center: f64,
        half_width: f64,
    },
}

impl Proxy {
    fn build<T: Real>(r: &Polynomial<T>, lo: f64, hi: f64) -> Proxy {
        let n = r.degree().unwrap_or(0);
        if !T::EXTENDED || n == 0 {
            return Proxy::Horner(r.coeffs().iter().map(|c| c.to_f64()).collect());
        }
        let center = T::from_f64(0.5) * (T::from_f64(lo) + T::from_f64(hi));
        let half = T::from_f64(0.5) * (T::from_f64(hi) - T::from_f64(lo));
        let values: Vec<f64> = (0..=n)
            .map(|j| {
                let t = (j as f64 * PI / n as f64).cos();
                r.eval(center + half * T::from_f64(t)).to_f64()
            })
            .collect();
        let mut coeffs = vec![0.0; n + 1];
        for (k, a) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &f) in values.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                let phase = (j * k) % (2 * n);
                acc += w * f * (phase as f64 * PI / n as f64).cos();
            }
            *a = 2.0 * acc / n as f64;
        }
        coeffs[0] *= 0.5;
        coeffs[n] *= 0.5;
        Proxy::Chebyshev {
            coeffs,
            center: center.to_f64(),
            half_width: half.to_f64(),
        }
    }

    fn eval(&self, eta: f64) -> f64 {
        match self {
            Proxy::Horner(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * eta + ci),
            Proxy::Chebyshev {
                coeffs,
                center,
                half_width,
            } => {
                let t = (eta - center) / half_width;
                let (mut b1, mut b2) = (0.0, 0.0);
                for &a in coeffs[1..].iter().rev() {
                    let b0 = a + 2.0 * t * b1 - b2;
                    b2 = b1;
                    b1 = b0;
                }
                coeffs[0] + t * b1 - b2
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Objective {
    Abs,
    EtaSquared,
}

impl Objective {
    fn apply(self, eta: f64, r: f64) -> f64 {
        match self {
            Objective::Abs => r.abs(),
            Objective::EtaSquared => eta * r * r,
        }
    }

    fn exact<T: Real>(self, r: &Polynomial<T>, eta: f64) -> f64 {
        let x = T::from_f64(eta);
        let v = r.eval(x);
        match self {
            Objective::Abs => v.abs().to_f64(),
            Objective::EtaSquared => (x * v * v).to_f64(),
        }
    }
}

fn mesh_point(iv: &Interval, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        iv.hi
    } else {
        iv.lo + (iv.hi - iv.lo) * (i as f64 / (n - 1) as f64)
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn scan<T: Real>(
    r: &Polynomial<T>,
    iv: &Interval,
    n_grid: usize,
    obj: Objective,
) -> Result<MinMaxCertificate> {
    if n_grid < 2 {
        return Err(invalid("mesh needs at least two points"));
    }
    let proxy = Proxy::build(r, iv.lo, iv.hi);
    let f = |eta: f64| obj.apply(eta, proxy.eval(eta));
    let start = usize::from(iv.open_lo && obj == Objective::Abs);
    let values: Vec<f64> = (start..n_grid)
        .map(|i| f(mesh_point(iv, n_grid, i)))
        .collect();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(invalid("residual is not finite on the interval"));
    }
    let cut = top - TIE_RTOL * top.abs();
    let best = values.iter().position(|&v| v >= cut).unwrap_or(0) + start;
    let eta_mesh = mesh_point(iv, n_grid, best);

    // never refine towards an excluded endpoint
    let a = if best > start {
        mesh_point(iv, n_grid, best - 1)
    } else if start == 1 {
        eta_mesh
    } else {
        iv.lo
    };
    let b = if best + 1 < n_grid {
        mesh_point(iv, n_grid, best + 1)
    } else {
        iv.hi
    };
    let (eta_ref, v_ref) = golden_max(f, a, b);
    let v_mesh = f(eta_mesh);
    let eta = if v_ref > v_mesh + TIE_RTOL * v_mesh.abs() && iv.contains(eta_ref) {
        eta_ref
    } else {
        eta_mesh
    };
    Ok(MinMaxCertificate::new(obj.exact(r, eta), eta))
}

/// `max |r(η)|` over the interval.
pub fn residual_max<T: Real>(
    r: &Polynomial<T>,
    iv: &Interval,
    n_grid: usize,
) -> Result<MinMaxCertificate> {
    scan(r, iv, n_grid, Objective::Abs)
}

/// `max η r(η)^2` over `[0, L]`.
pub fn weighted_residual_max<T: Real>(
    r: &Polynomial<T>,
    l: f64,
    n_grid: usize,
) -> Result<MinMaxCertificate> {
    check_l(l)?;
    scan(r, &Interval::closed(0.0, l)?, n_grid, Objective::EtaSquared)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BruteForceOptimum {
    pub certificate: MinMaxCertificate,
    /// Coefficients of the best `s`, lowest order first.
    pub s_coeffs: Vec<f64>,
}

/// Grid search over residuals `1 + s(η) η` with `deg s < residual_degree`
/// and every coefficient of `s` in `[-coeff_box, coeff_box]`. Degrees 1 and
/// 2 only.
pub fn brute_force_minmax(
    residual_degree: usize,
    iv: &Interval,
    coeff_box: f64,
    n_coeff_grid: usize,
    n_eta_grid: usize,
) -> Result<BruteForceOptimum> {
    if !(1..=2).contains(&residual_degree) {
        return Err(invalid("brute force supports residual degree 1 or 2"));
    }
    if !(coeff_box.is_finite() && coeff_box > 0.0) || n_coeff_grid < 2 || n_eta_grid < 2 {
        return Err(invalid(
            "brute force needs a positive box and grids of size >= 2",
        ));
    }
    let grid: Vec<f64> = (0..n_coeff_grid)
        .map(|i| -coeff_box + 2.0 * coeff_box * i as f64 / (n_coeff_grid - 1) as f64)
        .collect();
    let start = usize::from(iv.open_lo);
    let etas: Vec<(f64, f64)> = (start..n_eta_grid)
        .map(|i| {
            let e = mesh_point(iv, n_eta_grid, i);
            (e, e * e)
        })
        .collect();
    let mesh_max = |c0: f64, c1: f64| {
        etas.iter()
            .map(|&(e, e2)| (1.0 + c0 * e + c1 * e2).abs())
            .fold(0.0, f64::max)
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let c1_grid: &[f64] = if residual_degree == 2 { &grid } else { &[0.0] };
    for &c0 in &grid {
        for &c1 in c1_grid {
            let v = mesh_max(c0, c1);
            if v < best.0 {
                best = (v, c0, c1);
            }
        }
    }
    let s_coeffs = if residual_degree == 2 {
        vec![best.1, best.2]
    } else {
        vec![best.1]
    };
    let r = Polynomial::<f64>::from_f64_coeffs(&[1.0, best.1, best.2]);
    Ok(BruteForceOptimum {
        certificate: residual_max(&r, iv, n_eta_grid)?,
        s_coeffs,
    })
}

/// Outcome of comparing a residual against `(1 - η/L)^n` near `L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum B3Verdict {
    /// `|r(η)| > (1 - η/L)^n` at `eta`, with the two values reported.
    Exceeds { eta: f64, residual: f64, power: f64 },
    /// Coefficients agree with the power form; worst relative deviation.
    IsPowerForm { max_rel_dev: f64 },
}

const B3_RTOL: f64 = 1e-9;

/// Either `r` is `(1 - η/L)^n` (coefficients equal at `1e-9` relative) or
/// some `η ∈ (L - eps, L)` has `|r(η)|` above it. The exponent is
/// `n = max(deg r, 1)`, so the constant residual is compared against
/// `1 - η/L`. A witness only counts when the gap exceeds the evaluation
/// error bound at that point.
pub fn lemma_b3_check<T: Real>(
    r: &Polynomial<T>,
    l: f64,
    eps: f64,
    n_grid: usize,
) -> Result<B3Verdict> {
    check_l(l)?;
    if !(eps > 0.0 && eps <= l) || n_grid == 0 {
        return Err(invalid(format!(
            "need 0 < eps <= L and a non-empty grid, got eps = {eps}"
        )));
    }
    let r0 = r.coeff(0).to_f64();
    if (r0 - 1.0).abs() > B3_RTOL {
        return Err(invalid(format!("residual must satisfy r(0) = 1, got {r0}")));
    }
    let deg = r.degree().unwrap_or(0);
    let n = deg.max(1);

    if deg == n {
        let step = -T::one() / T::from_f64(l);
        let mut power = Polynomial::<T>::one();
        for _ in 0..n {
            power = power.mul_linear(step, T::one())?;
        }
        let mut worst = 0.0f64;
        for i in 0..=n {
            let want = power.coeff(i);
            let dev = ((r.coeff(i) - want).abs() / want.abs()).to_f64();
            worst = worst.max(dev);
        }
        if worst <= B3_RTOL {
            return Ok(B3Verdict::IsPowerForm { max_rel_dev: worst });
        }
    }

    let slack = 4.0 * (deg + 1) as f64 * T::UNIT_ROUNDOFF;
    let mut witness: Option<(f64, f64, f64)> = None;
    for j in 1..=n_grid {
        let eta = l - eps + eps * (j as f64 / (n_grid + 1) as f64);
        if !(eta > l - eps && eta < l) {
            continue;
        }
        let value = r.eval(T::from_f64(eta)).abs().to_f64();
        let power = (1.0 - eta / l).powi(n as i32);
        let err = slack * r.abs_eval(eta);
        if value - err > power * (1.0 + B3_RTOL) {
            let gap = value - power;
            if witness.is_none_or(|(_, v, p)| gap > v - p) {
                witness = Some((eta, value, power));
            }
        }
    }
    match witness {
        Some((eta, residual, power)) => Ok(B3Verdict::Exceeds {
            eta,
            residual,
            power,
        }),
        None => Err(Error::Inconclusive(format!(
            "residual differs from (1 - η/L)^{n} but no certified witness in (L - {eps}, L)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{chebyshev_value, optimal_residual_sc, optimal_residual_smooth, Wide};
    use proptest::prelude::*;

    fn p(c: &[f64]) -> Polynomial<f64> {
        Polynomial::from_f64_coeffs(c)
    }

    #[test]
    fn sc_bound_values() {
        assert!((lb_strongly_convex(1, 4.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(lb_strongly_convex(5, 1.0).unwrap(), 0.0);
        assert_eq!(lb_strongly_convex(0, 100.0).unwrap(), 1.0);
        assert!((lb_strongly_convex(10, 100.0).unwrap() - (9.0f64 / 11.0).powi(10)).abs() < 1e-15);
        assert!(lb_strongly_convex(3, 0.5).is_err());
        assert!(lb_strongly_convex(3, f64::NAN).is_err());
    }

    #[test]
    fn smooth_bound_values() {
        assert!((lb_smooth(0, 1.0).unwrap() - 1.0 / 9.0).abs() < 1e-16);
        assert_eq!(lb_smooth_after(0, 2.0).unwrap(), 2.0);
        assert!((lb_smooth_after(3, 1.0).unwrap() - 1.0 / 49.0).abs() < 1e-16);
        assert!(lb_smooth(1, 0.0).is_err());
    }

    #[test]
    fn interval_validation() {
        assert!(Interval::closed(1.0, 1.0).is_err());
        assert!(Interval::closed(2.0, 1.0).is_err());
        let iv = Interval::open_lo(0.0, 1.0).unwrap();
        assert!(!iv.contains(0.0));
        assert!(iv.contains(1.0));
    }

    #[test]
    fn gd_residual_max_at_mu() {
        let iv = Interval::closed(1.0, 10.0).unwrap();
        let c = residual_max(&p(&[1.0, -0.1]), &iv, 10_000).unwrap();
        assert!((c.value - 0.9).abs() < 1e-15);
        assert_eq!(c.argmax_eta, 1.0);
        assert_eq!(c.margin, c.value - c.bound);
    }

    #[test]
    fn endpoint_tie_resolves_low() {
        let iv = Interval::closed(1.0, 10.0).unwrap();
        let r = p(&[1.0, -2.0 / 11.0]);
        let c = residual_max(&r, &iv, 10_000).unwrap();
        assert!((c.value - 9.0 / 11.0).abs() < 1e-15);
        assert_eq!(c.argmax_eta, 1.0);
    }

    #[test]
    fn open_endpoint_is_skipped() {
        let iv = Interval::open_lo(0.0, 1.0).unwrap();
        let c = residual_max(&p(&[1.0, -1.0]), &iv, 1001).unwrap();
        assert!(c.argmax_eta > 0.0);
        assert!(c.value < 1.0);
    }

    #[test]
    fn chebyshev_residual_attains_closed_form() {
        let iv = Interval::closed(1.0, 10.0).unwrap();
        let q = optimal_residual_sc::<Wide>(3, 1.0, 10.0).unwrap();
        let c = residual_max(&q, &iv, 10_000).unwrap();
        let want = 1.0 / chebyshev_value(4, 11.0 / 9.0);
        assert!((c.value - want).abs() < 1e-6 * want);
    }

    #[test]
    fn weighted_constant_residual() {
        let c = weighted_residual_max(&p(&[1.0]), 3.0, 1000).unwrap();
        assert_eq!(c.value, 3.0);
        assert_eq!(c.argmax_eta, 3.0);
    }

    #[test]
    fn weighted_optimal_smooth_residual() {
        let q = optimal_residual_smooth::<Wide>(2, 1.0).unwrap();
        let c = weighted_residual_max(&q, 1.0, 10_000).unwrap();
        assert!((c.value - 1.0 / 49.0).abs() < 1e-6 / 49.0);
    }

    #[test]
    fn brute_force_degree_one() {
        let iv = Interval::closed(1.0, 5.0).unwrap();
        let bf = brute_force_minmax(1, &iv, 1.0, 2001, 1000).unwrap();
        let want = 4.0 / 6.0;
        assert!((bf.certificate.value - want).abs() < 0.01 * want);
        assert!((bf.s_coeffs[0] + 2.0 / 6.0).abs() < 0.01);
    }

    #[test]
    fn brute_force_rejects_bad_degree() {
        let iv = Interval::closed(1.0, 5.0).unwrap();
        assert!(brute_force_minmax(3, &iv, 1.0, 10, 10).is_err());
        assert!(brute_force_minmax(1, &iv, 0.0, 10, 10).is_err());
    }

    #[test]
    fn b3_power_form_detected() {
        let l = 2.0;
        let r = p(&[1.0, -1.0 / l]);
        let cube = r.try_mul(&r).unwrap().try_mul(&r).unwrap();
        assert!(matches!(
            lemma_b3_check(&cube, l, l / 2.0, 1000).unwrap(),
            B3Verdict::IsPowerForm { .. }
        ));
    }

    #[test]
    fn b3_constant_residual_exceeds() {
        match lemma_b3_check(&p(&[1.0]), 1.0, 0.5, 100).unwrap() {
            B3Verdict::Exceeds {
                eta,
                residual,
                power,
            } => {
                assert!(eta > 0.5 && eta < 1.0);
                assert_eq!(residual, 1.0);
                assert!(power < 0.5);
            }
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn b3_detects_slow_root() {
        // (1 - η)(1 - η/2) decays linearly at η = 1, its square degree beats it.
        let r = p(&[1.0, -1.5, 0.5]);
        assert!(matches!(
            lemma_b3_check(&r, 1.0, 0.5, 100).unwrap(),
            B3Verdict::Exceeds { .. }
        ));
        assert!(lemma_b3_check(&p(&[2.0, 1.0]), 1.0, 0.5, 100).is_err());
    }

    #[test]
    fn b3_rejects_inconclusive_grid() {
        // (1-η)^2 - δη(1-η) only exceeds the power form within δ/2 of L
        let r = p(&[1.0, -2.0 - 1e-6, 1.0 + 1e-6]);
        assert!(matches!(
            lemma_b3_check(&r, 1.0, 0.01, 3),
            Err(Error::Inconclusive(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_residuals_obey_sc_bound(
            s in prop::collection::vec(-10.0f64..10.0, 1..20),
            kappa in 1.5f64..100.0,
        ) {
            let mut c = vec![1.0];
            c.extend(&s);
            let r = p(&c);
            let n = r.degree().unwrap_or(0);
            let iv = Interval::closed(1.0, kappa).unwrap();
            let cert = residual_max(&r, &iv, 2000).unwrap();
            prop_assert!(cert.value >= lb_strongly_convex(n, kappa).unwrap() - 1e-12);
        }

        #[test]
        fn random_residuals_obey_smooth_bound(
            s in prop::collection::vec(-10.0f64..10.0, 0..10),
            l in 0.5f64..10.0,
        ) {
            let mut c = vec![1.0];
            c.extend(&s);
            let r = p(&c);
            let k = r.degree().unwrap_or(1).max(1) - 1;
            let cert = weighted_residual_max(&r, l, 2000).unwrap();
            prop_assert!(cert.value >= lb_smooth(k, l).unwrap() - 1e-12);
        }
    }
}
