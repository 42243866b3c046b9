//! Diagonal quadratic test problems, finite-sum splits and the worst-case
//! curvature search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{residual_max, Interval};
use crate::error::{invalid, Error, Result};
use crate::pcli::{
    residual_poly, symbolic_run, CoefficientSchedule, GradientOracle, SideInformation,
};
use crate::poly::Wide;

pub const FORMAT_VERSION: u32 = 1;

/// `f(x) = ½ Σ q_c x_c² + Σ b_c x_c` with `q_c >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticInstance {
    diag_q: Vec<f64>,
    linear_q: Vec<f64>,
    mu_eff: f64,
    l_eff: f64,
    minimizer: Option<Vec<f64>>,
}

impl QuadraticInstance {
    pub fn new(diag_q: Vec<f64>, linear_q: Vec<f64>) -> Result<Self> {
        if diag_q.is_empty() || diag_q.len() != linear_q.len() {
            return Err(Error::DimensionMismatch(format!(
                "diag has {} entries, linear term {}",
                diag_q.len(),
                linear_q.len()
            )));
        }
        if diag_q.iter().chain(&linear_q).any(|x| !x.is_finite()) {
            return Err(invalid("instance entries must be finite"));
        }
        if diag_q.iter().any(|&q| q < 0.0) {
            return Err(invalid("diagonal must be nonnegative"));
        }
        let mu_eff = diag_q.iter().copied().fold(f64::INFINITY, f64::min);
        let l_eff = diag_q.iter().copied().fold(0.0, f64::max);
        let minimizer = diag_q
            .iter()
            .zip(&linear_q)
            .map(|(&q, &b)| match (q > 0.0, b == 0.0) {
                (true, _) => Some(-b / q),
                (false, true) => Some(0.0),
                (false, false) => None,
            })
            .collect();
        Ok(QuadraticInstance {
            diag_q,
            linear_q,
            mu_eff,
            l_eff,
            minimizer,
        })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag_q
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear_q
    }

    pub fn mu_eff(&self) -> f64 {
        self.mu_eff
    }

    pub fn l_eff(&self) -> f64 {
        self.l_eff
    }

    pub fn minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.diag_q.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.diag_q
            .iter()
            .zip(&self.linear_q)
            .zip(x)
            .map(|((&q, &b), &xc)| 0.5 * q * xc * xc + b * xc)
            .sum()
    }

    pub fn optimal_value(&self) -> Result<f64> {
        let xs = self.minimizer().ok_or(Error::UnboundedBelow)?;
        Ok(self.value(xs))
    }

    /// Per-coordinate gaps `½ q_c (x_c - x*_c)²`.
    pub fn coordinate_gaps(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xs = self.minimizer().ok_or(Error::UnboundedBelow)?;
        if x.len() != xs.len() {
            return Err(Error::DimensionMismatch(format!(
                "point of dimension {} for instance of dimension {}",
                x.len(),
                xs.len()
            )));
        }
        Ok(self
            .diag_q
            .iter()
            .zip(x.iter().zip(xs))
            .map(|(&q, (&xc, &sc))| 0.5 * q * (xc - sc) * (xc - sc))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&QuadraticDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        QuadraticDoc::into_instance(serde_json::from_str(text)?)
    }
}

impl GradientOracle for QuadraticInstance {
    fn dim(&self) -> usize {
        self.diag_q.len()
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.diag_q[c] * x[c] + self.linear_q[c];
        }
    }
}

/// `f(x) - f*`.
pub fn suboptimality(inst: &QuadraticInstance, x: &[f64]) -> Result<f64> {
    Ok(inst.coordinate_gaps(x)?.iter().sum())
}

/// `½ η Σ x_c² - η R x_1`, minimized at `R e_1`.
pub fn hard_instance(d: usize, eta: f64, r: f64) -> Result<QuadraticInstance> {
    if d == 0 || !(eta.is_finite() && eta > 0.0) || !r.is_finite() {
        return Err(invalid(format!(
            "hard instance needs d >= 1, eta > 0, got d = {d}, eta = {eta}"
        )));
    }
    let mut linear = vec![0.0; d];
    linear[0] = -eta * r;
    QuadraticInstance::new(vec![eta; d], linear)
}

/// One decoupled hard instance per coordinate: curvature `etas[c]`,
/// minimizer `R` in every coordinate.
pub fn spectral_sweep(etas: &[f64], r: f64) -> Result<QuadraticInstance> {
    if etas.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
        return Err(invalid("sweep curvatures must be positive"));
    }
    QuadraticInstance::new(etas.to_vec(), etas.iter().map(|&e| -e * r).collect())
}

/// `n` log-spaced points from `lo` to `hi`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 || lo == hi {
        return vec![lo; n.max(1)];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i + 1 == n => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Curvature in `iv` where the `k`-step residual of `sched` is largest, with
/// that residual value.
pub fn worst_eta(
    sched: &CoefficientSchedule,
    info: &SideInformation,
    k: usize,
    iv: &Interval,
    n_grid: usize,
) -> Result<(f64, f64)> {
    let traj = symbolic_run::<Wide>(sched, info, &[1.0], k)?;
    let cert = residual_max(&residual_poly(&traj, 0)?, iv, n_grid)?;
    Ok((cert.argmax_eta, cert.value))
}

/// `F = Σ_i f_i` with every component a diagonal quadratic.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSumInstance {
    components: Vec<QuadraticInstance>,
    total: QuadraticInstance,
    weights: Option<Vec<Vec<f64>>>,
}

impl FiniteSumInstance {
    pub fn new(components: Vec<QuadraticInstance>) -> Result<Self> {
        let d = components
            .first()
            .ok_or_else(|| invalid("finite sum needs at least one component"))?
            .dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch(
                "components differ in dimension".into(),
            ));
        }
        let sum = |f: fn(&QuadraticInstance) -> &[f64]| -> Vec<f64> {
            (0..d)
                .map(|c| components.iter().map(|q| f(q)[c]).sum())
                .collect()
        };
        let total =
            QuadraticInstance::new(sum(QuadraticInstance::diag), sum(QuadraticInstance::linear))?;
        Ok(FiniteSumInstance {
            components,
            total,
            weights: None,
        })
    }

    pub fn components(&self) -> &[QuadraticInstance] {
        &self.components
    }

    pub fn total(&self) -> &QuadraticInstance {
        &self.total
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    /// Per-coordinate weights `w_i` with `f_i = w_i ⊙ F`, when the instance
    /// came from a split.
    pub fn weights(&self) -> Option<&[Vec<f64>]> {
        self.weights.as_deref()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = FiniteSumDoc {
            format_version: FORMAT_VERSION,
            components: self.components.iter().map(QuadraticDoc::from).collect(),
            total: QuadraticDoc::from(&self.total),
            weights: self.weights.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FiniteSumDoc = serde_json::from_str(text)?;
        check_version(doc.format_version)?;
        let components = doc
            .components
            .into_iter()
            .map(QuadraticDoc::into_instance)
            .collect::<Result<Vec<_>>>()?;
        let total = QuadraticDoc::into_instance(doc.total)?;
        let mut out = FiniteSumInstance::new(components)?;
        check_sum(&out.total, &total)?;
        out.total = total;
        out.weights = doc.weights;
        Ok(out)
    }
}

fn check_sum(summed: &QuadraticInstance, total: &QuadraticInstance) -> Result<()> {
    let close = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0))
    };
    if summed.dim() != total.dim()
        || !close(summed.diag(), total.diag())
        || !close(summed.linear(), total.linear())
    {
        return Err(invalid("components do not sum to the total"));
    }
    Ok(())
}

fn split_with(inst: &QuadraticInstance, weights: Vec<Vec<f64>>) -> Result<FiniteSumInstance> {
    let components = weights
        .iter()
        .map(|w| {
            let scale = |v: &[f64]| v.iter().zip(w).map(|(x, wi)| x * wi).collect();
            QuadraticInstance::new(scale(inst.diag()), scale(inst.linear()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = FiniteSumInstance::new(components)?;
    check_sum(&out.total, inst)?;
    out.total = inst.clone();
    out.weights = Some(weights);
    Ok(out)
}

/// Split into `m` components with independent random nonnegative weights
/// per coordinate (summing to one). `m = 1` returns the instance itself.
pub fn finite_sum_split(
    inst: &QuadraticInstance,
    m: usize,
    seed: u64,
) -> Result<FiniteSumInstance> {
    if m == 0 {
        return Err(invalid("split needs m >= 1"));
    }
    let d = inst.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![vec![0.0; d]; m];
    for c in 0..d {
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut used = 0.0;
        for i in 0..m - 1 {
            weights[i][c] = raw[i] / total;
            used += weights[i][c];
        }
        weights[m - 1][c] = 1.0 - used;
    }
    split_with(inst, weights)
}

/// Split into `m` identical components `F / m`.
pub fn equal_split(inst: &QuadraticInstance, m: usize) -> Result<FiniteSumInstance> {
    if m == 0 {
        return Err(invalid("split needs m >= 1"));
    }
    split_with(inst, vec![vec![1.0 / m as f64; inst.dim()]; m])
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Config(format!("unsupported format_version {v}")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct QuadraticDoc {
    format_version: u32,
    diag_q: Vec<f64>,
    linear_q: Vec<f64>,
    mu_eff: f64,
    #[serde(rename = "L_eff")]
    l_eff: f64,
    minimizer: Option<Vec<f64>>,
}

impl From<&QuadraticInstance> for QuadraticDoc {
    fn from(q: &QuadraticInstance) -> Self {
        QuadraticDoc {
            format_version: FORMAT_VERSION,
            diag_q: q.diag_q.clone(),
            linear_q: q.linear_q.clone(),
            mu_eff: q.mu_eff,
            l_eff: q.l_eff,
            minimizer: q.minimizer.clone(),
        }
    }
}

impl QuadraticDoc {
    fn into_instance(self) -> Result<QuadraticInstance> {
        check_version(self.format_version)?;
        let inst = QuadraticInstance::new(self.diag_q, self.linear_q)?;
        if inst.mu_eff != self.mu_eff
            || inst.l_eff != self.l_eff
            || inst.minimizer != self.minimizer
        {
            return Err(invalid("derived fields do not match diag_q and linear_q"));
        }
        Ok(inst)
    }
}

#[derive(Serialize, Deserialize)]
struct FiniteSumDoc {
    format_version: u32,
    components: Vec<QuadraticDoc>,
    total: QuadraticDoc,
    weights: Option<Vec<Vec<f64>>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn worked_example() {
        let q = QuadraticInstance::new(vec![2.0, 2.0], vec![-2.0, 0.0]).unwrap();
        assert_eq!(q.minimizer().unwrap(), &[1.0, 0.0]);
        assert_eq!(q.optimal_value().unwrap(), -1.0);
        assert_eq!(suboptimality(&q, &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(q.mu_eff(), 2.0);
        assert_eq!(q.l_eff(), 2.0);
    }

    #[test]
    fn degenerate_curvature() {
        let q = QuadraticInstance::new(vec![0.0, 0.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(q.l_eff(), 0.0);
        assert!(q.minimizer().is_none());
        assert!(matches!(
            suboptimality(&q, &[0.0, 0.0]),
            Err(Error::UnboundedBelow)
        ));
        let flat = QuadraticInstance::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(flat.minimizer().unwrap(), &[0.0]);
    }

    #[test]
    fn invalid_instances() {
        assert!(QuadraticInstance::new(vec![-1.0], vec![0.0]).is_err());
        assert!(QuadraticInstance::new(vec![1.0], vec![0.0, 1.0]).is_err());
        assert!(QuadraticInstance::new(vec![], vec![]).is_err());
        assert!(hard_instance(0, 1.0, 1.0).is_err());
        assert!(hard_instance(2, 0.0, 1.0).is_err());
    }

    #[test]
    fn hard_instance_shape() {
        let h = hard_instance(3, 4.0, 2.0).unwrap();
        assert_eq!(h.minimizer().unwrap(), &[2.0, 0.0, 0.0]);
        assert_eq!(h.diag(), &[4.0; 3]);
        assert_eq!(suboptimality(&h, &[0.0; 3]).unwrap(), 8.0);
    }

    #[test]
    fn json_roundtrip() {
        let h = hard_instance(2, 3.0, 1.5).unwrap();
        let text = h.to_json().unwrap();
        assert!(text.contains("\"format_version\": 1"));
        assert_eq!(QuadraticInstance::from_json(&text).unwrap(), h);
        let bad = text.replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(QuadraticInstance::from_json(&bad).is_err());
        let tampered = text.replace("\"L_eff\": 3.0", "\"L_eff\": 4.0");
        assert!(QuadraticInstance::from_json(&tampered).is_err());

        let fs = finite_sum_split(&h, 3, 9).unwrap();
        assert_eq!(
            FiniteSumInstance::from_json(&fs.to_json().unwrap()).unwrap(),
            fs
        );
    }

    #[test]
    fn equal_split_halves() {
        let q = QuadraticInstance::new(vec![2.0], vec![1.0]).unwrap();
        let fs = equal_split(&q, 2).unwrap();
        assert_eq!(fs.components()[0].diag(), &[1.0]);
        assert_eq!(fs.components()[1].linear(), &[0.5]);
    }

    #[test]
    fn single_component_split_is_identity() {
        let h = hard_instance(4, 2.5, 1.0).unwrap();
        let fs = finite_sum_split(&h, 1, 3).unwrap();
        assert_eq!(fs.components(), std::slice::from_ref(&h));
        assert_eq!(fs.total(), &h);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1.0, 100.0, 3);
        assert_eq!(g[0], 1.0);
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert_eq!(g[2], 100.0);
    }

    proptest! {
        #[test]
        fn suboptimality_nonnegative_and_strongly_convex(
            diag in prop::collection::vec(0.1f64..10.0, 1..6),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = diag.len();
            let lin: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let q = QuadraticInstance::new(diag, lin).unwrap();
            let gap = suboptimality(&q, &x).unwrap();
            let dist2: f64 = x.iter().zip(q.minimizer().unwrap()).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert!(gap >= 0.0);
            prop_assert!(gap >= 0.5 * q.mu_eff() * dist2 * (1.0 - 1e-12));
            let direct = q.value(&x) - q.optimal_value().unwrap();
            prop_assert!((gap - direct).abs() <= 1e-9 * (1.0 + gap.abs()));
        }

        #[test]
        fn splits_sum_to_total(m in 1usize..8, d in 1usize..5, seed in any::<u64>()) {
            let h = hard_instance(d, 3.0, 2.0).unwrap();
            let fs = finite_sum_split(&h, m, seed).unwrap();
            for c in 0..d {
                let s: f64 = fs.components().iter().map(|q| q.diag()[c]).sum();
                prop_assert!((s - 3.0).abs() <= 1e-12);
                let w: f64 = fs.weights().unwrap().iter().map(|w| w[c]).sum();
                prop_assert!((w - 1.0).abs() <= 1e-12);
                prop_assert!(fs.weights().unwrap().iter().all(|w| w[c] >= 0.0));
            }
        }
    }
}
