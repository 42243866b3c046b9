//! Dense univariate polynomials in the monomial basis, plus the Chebyshev
//! constructions behind the min-max bounds.
//!
//! Coefficients are generic over [`Real`]. `f64` is fine for short
//! trajectories and random residuals; the symbolic engine uses [`Wide`]
//! because the monomial coefficients of accelerated residuals cancel
//! catastrophically once the degree passes ~20.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::{invalid, Error, Result};

pub use f256::f256;

/// IEEE binary256: 237-bit significand, unit roundoff about 9e-72.
pub type Wide = f256;

/// Largest degree any constructor or product will produce.
pub const MAX_DEGREE: usize = 200;

/// Scalar field used for polynomial coefficients.
pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    /// Unit roundoff.
    const UNIT_ROUNDOFF: f64;
    /// Whether the format is wider than `f64`.
    const EXTENDED: bool;

    fn zero() -> Self;
    fn one() -> Self;
    /// Exact for every finite `f64`.
    fn from_f64(x: f64) -> Self;
    /// Rounds to nearest.
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;

    fn is_zero(self) -> bool {
        self == Self::zero()
    }
}

impl Real for f64 {
    const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;
    const EXTENDED: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

impl Real for f256 {
    // 2^-237
    const UNIT_ROUNDOFF: f64 = 4.4176e-72;
    const EXTENDED: bool = true;

    fn zero() -> Self {
        f256::ZERO
    }
    fn one() -> Self {
        f256::ONE
    }
    fn from_f64(x: f64) -> Self {
        f256::from(x)
    }
    fn to_f64(self) -> f64 {
        wide_to_f64(self)
    }
    fn abs(self) -> Self {
        f256::abs(&self)
    }
}

const WIDE_FRACTION_HI_BITS: u32 = 108;
const WIDE_EXP_MAX: i64 = (1 << 19) - 1;
const WIDE_EXP_BIAS: i64 = WIDE_EXP_MAX >> 1;

/// Correctly rounded binary256 to binary64 conversion (ties resolved with a
/// sticky bit, subnormal inputs flush to zero).
fn wide_to_f64(x: f256) -> f64 {
    let (hi, lo) = x.to_bits();
    let sign = if hi >> 127 == 1 { -1.0 } else { 1.0 };
    let biased = ((hi >> WIDE_FRACTION_HI_BITS) as i64) & WIDE_EXP_MAX;
    let frac_hi = hi & ((1u128 << WIDE_FRACTION_HI_BITS) - 1);
    if biased == WIDE_EXP_MAX {
        return if frac_hi == 0 && lo == 0 {
            sign * f64::INFINITY
        } else {
            f64::NAN
        };
    }
    if biased == 0 {
        return sign * 0.0;
    }
    let mut sig = (1u128 << WIDE_FRACTION_HI_BITS) | frac_hi;
    if lo != 0 {
        sig |= 1;
    }
    let exp = biased - WIDE_EXP_BIAS - WIDE_FRACTION_HI_BITS as i64;
    sign * scale_pow2(sig as f64, exp)
}

fn scale_pow2(mut v: f64, mut e: i64) -> f64 {
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
        if v.is_infinite() {
            return v;
        }
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
        if v == 0.0 {
            return v;
        }
    }
    v * 2f64.powi(e as i32)
}

/// Polynomial `c[0] + c[1] η + ... + c[n] η^n`, normalized so the leading
/// coefficient is nonzero. The zero polynomial has no coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<T = f64> {
    coeffs: Vec<T>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn from_f64_coeffs(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| T::from_f64(c)).collect())
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(T::one())
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// The identity polynomial `η`.
    pub fn identity() -> Self {
        Self::new(vec![T::zero(), T::one()])
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of `η^i` (zero past the degree).
    pub fn coeff(&self, i: usize) -> T {
        self.coeffs.get(i).copied().unwrap_or_else(T::zero)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, x: T) -> T {
        let mut acc = T::zero();
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.eval(T::from_f64(x)).to_f64()
    }

    /// `Σ |c_i| |x|^i`, the scale of the rounding error of [`Self::eval`].
    pub fn abs_eval(&self, x: f64) -> f64 {
        let x = x.abs();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c.to_f64().abs())
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Polynomial<U> {
        Polynomial::new(self.coeffs.iter().map(|&c| f(c)).collect())
    }

    pub fn to_f64(&self) -> Polynomial<f64> {
        self.map(Real::to_f64)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|x| x * c)
    }

    /// `(a η + b) · self`.
    pub fn mul_linear(&self, a: T, b: T) -> Result<Self> {
        let n = self.coeffs.len();
        if a.is_zero() || n == 0 {
            return Ok(self.scale(b));
        }
        check_degree(n)?;
        let mut out = vec![T::zero(); n + 1];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] += b * c;
            out[i + 1] += a * c;
        }
        Ok(Self::new(out))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero());
        }
        let deg = self.coeffs.len() + other.coeffs.len() - 2;
        check_degree(deg)?;
        let mut out = vec![T::zero(); deg + 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Ok(Self::new(out))
    }

    /// `self(a η + b)`.
    pub fn compose_affine(&self, a: T, b: T) -> Self {
        let n = self.coeffs.len();
        if n == 0 {
            return Self::zero();
        }
        let binom = pascal_rows::<T>(n - 1);
        let mut a_pow = vec![T::one(); n];
        let mut b_pow = vec![T::one(); n];
        for i in 1..n {
            a_pow[i] = a_pow[i - 1] * a;
            b_pow[i] = b_pow[i - 1] * b;
        }
        let mut out = vec![T::zero(); n];
        for (j, &c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for i in 0..=j {
                out[i] += c * binom[j][i] * a_pow[i] * b_pow[j - i];
            }
        }
        Self::new(out)
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        Err(Error::DegreeCap {
            degree,
            max: MAX_DEGREE,
        })
    } else {
        Ok(())
    }
}

/// Rows `0..=n` of Pascal's triangle.
fn pascal_rows<T: Real>(n: usize) -> Vec<Vec<T>> {
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(n + 1);
    rows.push(vec![T::one()]);
    for j in 1..=n {
        let prev = &rows[j - 1];
        let mut row = vec![T::one(); j + 1];
        for i in 1..j {
            row[i] = prev[i - 1] + prev[i];
        }
        rows.push(row);
    }
    rows
}

fn zip_coeffs<T: Real>(p: &[T], q: &[T], f: impl Fn(T, T) -> T) -> Vec<T> {
    let n = p.len().max(q.len());
    (0..n)
        .map(|i| {
            let a = p.get(i).copied().unwrap_or_else(T::zero);
            let b = q.get(i).copied().unwrap_or_else(T::zero);
            f(a, b)
        })
        .collect()
}

impl<T: Real> Add for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: Self) -> Polynomial<T> {
        Polynomial::new(zip_coeffs(&self.coeffs, &rhs.coeffs, |a, b| a + b))
    }
}

impl<T: Real> Sub for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: Self) -> Polynomial<T> {
        Polynomial::new(zip_coeffs(&self.coeffs, &rhs.coeffs, |a, b| a - b))
    }
}

impl<T: Real> Add for Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: Self) -> Polynomial<T> {
        &self + &rhs
    }
}

impl<T: Real> Sub for Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: Self) -> Polynomial<T> {
        &self - &rhs
    }
}

impl<T: Real> Neg for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        self.map(|c| -c)
    }
}

impl<T: Real> Neg for Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        -&self
    }
}

/// `T_k(x)` from the closed form (cos inside `[-1, 1]`, cosh outside).
pub fn chebyshev_value(k: usize, x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let kf = k as f64;
    if x.abs() <= 1.0 {
        (kf * x.acos()).cos()
    } else if x > 1.0 {
        (kf * x.acosh()).cosh()
    } else {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * (kf * (-x).acosh()).cosh()
    }
}

/// Monomial coefficients of `T_k` via `T_k = 2x T_{k-1} - T_{k-2}`.
pub fn chebyshev_poly<T: Real>(k: usize) -> Result<Polynomial<T>> {
    check_degree(k)?;
    let two = T::from_f64(2.0);
    let mut prev = Polynomial::<T>::one();
    if k == 0 {
        return Ok(prev);
    }
    let mut cur = Polynomial::<T>::identity();
    for _ in 1..k {
        let next = &cur.mul_linear(two, T::zero())? - &prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

fn check_interval(mu: f64, l: f64) -> Result<()> {
    if !(mu.is_finite() && l.is_finite() && mu > 0.0 && mu < l) {
        return Err(invalid(format!("need 0 < mu < L, got mu = {mu}, L = {l}")));
    }
    Ok(())
}

/// The degree-`k+1` residual minimizing `max |q|` over `[mu, L]` subject to
/// `q(0) = 1`: a shifted, scaled `T_{k+1}`. Its maximum modulus is
/// `1 / T_{k+1}((L + mu) / (L - mu))`.
pub fn optimal_residual_sc<T: Real>(k: usize, mu: f64, l: f64) -> Result<Polynomial<T>> {
    check_interval(mu, l)?;
    let (mu_t, l_t) = (T::from_f64(mu), T::from_f64(l));
    let width = l_t - mu_t;
    let a = T::from_f64(-2.0) / width;
    let b = (l_t + mu_t) / width;
    let shifted = chebyshev_poly::<T>(k + 1)?.compose_affine(a, b);
    let c0 = shifted.coeff(0);
    Ok(shifted.map(|c| c / c0))
}

/// The degree-`k+1` residual minimizing `max η q(η)^2` over `[0, L]` subject
/// to `q(0) = 1`, built from the odd coefficients of `T_{2k+3}`. The maximum
/// equals `L / (2k+3)^2`.
pub fn optimal_residual_smooth<T: Real>(k: usize, l: f64) -> Result<Polynomial<T>> {
    if !(l.is_finite() && l > 0.0) {
        return Err(invalid(format!("need L > 0, got {l}")));
    }
    let t = chebyshev_poly::<T>(2 * k + 3)?;
    let lead = t.coeff(1);
    let l_t = T::from_f64(l);
    let mut l_pow = T::one();
    let mut out = Vec::with_capacity(k + 2);
    for j in 0..=k + 1 {
        out.push(t.coeff(2 * j + 1) / (lead * l_pow));
        l_pow *= l_t;
    }
    Ok(Polynomial::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> Polynomial<f64> {
        Polynomial::from_f64_coeffs(c)
    }

    #[test]
    fn product_example() {
        let prod = p(&[1.0, 2.0]).try_mul(&p(&[1.0, -1.0])).unwrap();
        assert_eq!(prod, p(&[1.0, 1.0, -2.0]));
    }

    #[test]
    fn horner_example() {
        assert_eq!(p(&[1.0, -3.0, 1.0]).eval(2.0), -1.0);
    }

    #[test]
    fn compose_example() {
        assert_eq!(p(&[1.0, 1.0]).compose_affine(2.0, 1.0), p(&[2.0, 2.0]));
    }

    #[test]
    fn zero_and_identity_laws() {
        let q = p(&[3.0, 0.0, -1.5]);
        assert_eq!(&q + &Polynomial::zero(), q);
        assert_eq!(&q - &Polynomial::zero(), q);
        assert_eq!(q.try_mul(&Polynomial::one()).unwrap(), q);
        let z = q.try_mul(&Polynomial::zero()).unwrap();
        assert!(z.is_zero());
        assert_eq!(z.degree(), None);
        assert_eq!((&q - &q).degree(), None);
    }

    #[test]
    fn trailing_zeros_are_trimmed() {
        assert_eq!(p(&[1.0, 2.0, 0.0, 0.0]).degree(), Some(1));
        assert_eq!(p(&[0.0]), Polynomial::zero());
    }

    #[test]
    fn degree_cap_is_enforced() {
        let big = Polynomial::<f64>::new(vec![1.0; MAX_DEGREE + 1]);
        assert!(matches!(
            big.mul_linear(1.0, 0.0),
            Err(Error::DegreeCap { .. })
        ));
        assert!(chebyshev_poly::<f64>(MAX_DEGREE + 1).is_err());
    }

    #[test]
    fn wide_roundtrip_and_rounding() {
        for x in [0.0, -0.0, 1.0, -2.5, 1e-300, 3.7e250, f64::MAX, 0.1] {
            assert_eq!(Wide::from_f64(x).to_f64(), x);
        }
        let third = Wide::one() / Wide::from_f64(3.0);
        assert_eq!(third.to_f64(), 1.0 / 3.0);
        let tiny = Wide::from_f64(1e-300) * Wide::from_f64(1e-300);
        assert_eq!(tiny.to_f64(), 0.0);
        let huge = Wide::from_f64(1e300) * Wide::from_f64(1e300);
        assert_eq!(huge.to_f64(), f64::INFINITY);
        // 1 + 2^-60 rounds back to 1, 1 + 2^-52 + 2^-60 rounds up.
        let e60 = Wide::from_f64(2f64.powi(-60));
        assert_eq!((Wide::one() + e60).to_f64(), 1.0);
        let up = Wide::one() + Wide::from_f64(2f64.powi(-53)) + e60;
        assert_eq!(up.to_f64(), 1.0 + f64::EPSILON);
    }

    #[test]
    fn chebyshev_spot_values() {
        assert!((chebyshev_value(2, 0.5) + 0.5).abs() < 1e-15);
        assert_eq!(chebyshev_value(0, 7.0), 1.0);
        assert!((chebyshev_value(3, -2.0) - (4.0 * -8.0 + 6.0)).abs() < 1e-12);
        assert!((chebyshev_value(5, 1.0) - 1.0).abs() < 1e-15);
        assert!((chebyshev_value(5, -1.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_polys_small() {
        assert_eq!(chebyshev_poly::<f64>(0).unwrap(), p(&[1.0]));
        assert_eq!(chebyshev_poly::<f64>(1).unwrap(), p(&[0.0, 1.0]));
        assert_eq!(chebyshev_poly::<f64>(2).unwrap(), p(&[-1.0, 0.0, 2.0]));
        assert_eq!(
            chebyshev_poly::<f64>(5).unwrap(),
            p(&[0.0, 5.0, 0.0, -20.0, 0.0, 16.0])
        );
    }

    #[test]
    fn chebyshev_equioscillates() {
        for k in 1..=30usize {
            for j in 0..=k {
                let x = (j as f64 * std::f64::consts::PI / k as f64).cos();
                let want = if j % 2 == 0 { 1.0 } else { -1.0 };
                assert!((chebyshev_value(k, x) - want).abs() < 1e-10, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn sc_residual_normalized_and_extremal() {
        let q = optimal_residual_sc::<Wide>(3, 1.0, 10.0).unwrap();
        assert_eq!(q.coeff(0), Wide::one());
        assert_eq!(q.degree(), Some(4));
        let peak = 1.0 / chebyshev_value(4, 11.0 / 9.0);
        // extremal points of the shifted T_4
        for j in 0..=4 {
            let t = (j as f64 * std::f64::consts::PI / 4.0).cos();
            let eta = (t * 9.0 + 11.0) / 2.0;
            assert!((q.eval_f64(eta).abs() - peak).abs() < 1e-14 * peak.max(1.0));
        }
    }

    #[test]
    fn smooth_residual_hand_case() {
        // T_3 = 4x^3 - 3x gives 1 - 4η/(3L)
        let q = optimal_residual_smooth::<f64>(0, 2.0).unwrap();
        assert_eq!(q.degree(), Some(1));
        assert!((q.coeff(0) - 1.0).abs() < 1e-15);
        assert!((q.coeff(1) + 4.0 / 6.0).abs() < 1e-15);
        let q = optimal_residual_smooth::<Wide>(7, 1.0).unwrap();
        assert_eq!(q.coeff(0), Wide::one());
        assert_eq!(q.degree(), Some(8));
    }

    #[test]
    fn residual_constructors_reject_bad_input() {
        assert!(optimal_residual_sc::<f64>(2, 0.0, 1.0).is_err());
        assert!(optimal_residual_sc::<f64>(2, 2.0, 1.0).is_err());
        assert!(optimal_residual_sc::<f64>(2, 1.0, 1.0).is_err());
        assert!(optimal_residual_smooth::<f64>(2, -1.0).is_err());
        assert!(optimal_residual_smooth::<f64>(2, f64::NAN).is_err());
    }

    fn coeffs_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 0..8)
    }

    proptest! {
        #[test]
        fn eval_is_a_ring_homomorphism(a in coeffs_strategy(), b in coeffs_strategy(), x in -2.0f64..2.0) {
            let (pa, pb) = (p(&a), p(&b));
            let xw = Wide::from_f64(x);
            let (wa, wb) = (pa.map(Wide::from_f64), pb.map(Wide::from_f64));
            let sum = (&wa + &wb).eval(xw).to_f64();
            let prod = wa.try_mul(&wb).unwrap().eval(xw).to_f64();
            let ea = wa.eval(xw).to_f64();
            let eb = wb.eval(xw).to_f64();
            prop_assert!((sum - (ea + eb)).abs() <= 1e-12 * (1.0 + ea.abs() + eb.abs()));
            prop_assert!((prod - ea * eb).abs() <= 1e-12 * (1.0 + (ea * eb).abs()));
        }

        #[test]
        fn compose_matches_substitution(a in coeffs_strategy(), s in -3.0f64..3.0, t in -3.0f64..3.0, x in -2.0f64..2.0) {
            let w = p(&a).map(Wide::from_f64);
            let c = w.compose_affine(Wide::from_f64(s), Wide::from_f64(t));
            let lhs = c.eval(Wide::from_f64(x)).to_f64();
            let rhs = w.eval(Wide::from_f64(s) * Wide::from_f64(x) + Wide::from_f64(t)).to_f64();
            prop_assert!((lhs - rhs).abs() <= 1e-40 * (1.0 + rhs.abs()));
        }

        #[test]
        fn cosh_identity(k in 0usize..30, x in 1.0f64..3.0) {
            let direct = chebyshev_value(k, x);
            let via = (k as f64 * x.acosh()).cosh();
            prop_assert!((direct - via).abs() <= 1e-12 * via.abs().max(1.0));
        }

        #[test]
        fn sc_residual_q0_is_one(k in 0usize..40, mu in 0.1f64..5.0, ratio in 1.01f64..1e4) {
            let q = optimal_residual_sc::<Wide>(k, mu, mu * ratio).unwrap();
            prop_assert_eq!(q.eval(Wide::zero()), Wide::one());
            prop_assert_eq!(q.degree(), Some(k + 1));
        }
    }
}
