//! Increment laws: mean, moment generating function, the adjustment
//! coefficient, exponential tilting and sampling.

use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::scalar::Real;

/// Default tolerance on `|mgf(theta) - 1|` for the root solver.
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// Grid used to decide commensurability of table values.
const LATTICE_GRID: f64 = 1e-9;
/// Lattices with more than this many points per largest step are treated as
/// non-arithmetic.
const LATTICE_MAX_RATIO: i64 = 1_000_000;

/// The law of a single increment of the walk.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncrementModel<T> {
    /// Finite support: `values` strictly increasing, `probs` positive and summing to one.
    DiscreteTable { values: Vec<T>, probs: Vec<T> },
    Gaussian { mu: T, sigma: T },
}

/// The increment law under the exponentially tilted measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltedModel<T> {
    /// Positive root of `mgf(theta) = 1`.
    pub theta_star: T,
    /// Law of one increment under the tilted measure.
    pub tilted: IncrementModel<T>,
    /// Mean of the tilted law, the derivative of the mgf at `theta_star`.
    pub mu_star: T,
}

fn sum_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

impl<T: Real> IncrementModel<T> {
    /// Builds a table from `(value, probability)` pairs. Pairs may be given in
    /// any order; zero-probability entries are dropped.
    pub fn table(pairs: &[(T, T)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidModel("table has no entries".into()));
        }
        let mut entries: Vec<(T, T)> = Vec::with_capacity(pairs.len());
        for &(v, p) in pairs {
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("value {v} is not finite")));
            }
            if !(p >= T::zero()) || !p.is_finite() {
                return Err(Error::InvalidModel(format!("probability {p} of value {v} is not a nonnegative number")));
            }
            if p > T::zero() {
                entries.push((v, p));
            }
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidModel(format!("duplicate value {}", w[0].0)));
        }
        let total: T = entries.iter().map(|e| e.1).sum();
        if (total - T::one()).abs() > sum_tol::<T>() {
            return Err(Error::InvalidModel(format!("probabilities sum to {total}, not 1")));
        }
        let (values, probs) = entries.into_iter().unzip();
        Ok(Self::DiscreteTable { values, probs })
    }

    pub fn gaussian(mu: T, sigma: T) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidModel(format!("mu = {mu} is not finite")));
        }
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidModel(format!("sigma = {sigma} must be positive")));
        }
        Ok(Self::Gaussian { mu, sigma })
    }

    pub fn mean(&self) -> T {
        match self {
            Self::DiscreteTable { values, probs } => values.iter().zip(probs).map(|(&v, &p)| v * p).sum(),
            Self::Gaussian { mu, .. } => *mu,
        }
    }

    /// `E[exp(theta X)]`; overflow shows up as `+inf`.
    pub fn mgf(&self, theta: T) -> T {
        if theta == T::zero() {
            return T::one();
        }
        match self {
            Self::DiscreteTable { values, probs } => {
                values.iter().zip(probs).map(|(&v, &p)| p * (theta * v).exp()).sum()
            }
            Self::Gaussian { mu, sigma } => {
                (*mu * theta + *sigma * *sigma * theta * theta / T::lit(2.0)).exp()
            }
        }
    }

    /// Derivative of the mgf in `theta`.
    pub fn mgf_derivative(&self, theta: T) -> T {
        match self {
            Self::DiscreteTable { values, probs } => {
                values.iter().zip(probs).map(|(&v, &p)| p * v * (theta * v).exp()).sum()
            }
            Self::Gaussian { mu, sigma } => (*mu + *sigma * *sigma * theta) * self.mgf(theta),
        }
    }

    /// Largest support point, `None` for unbounded support.
    pub fn max_support(&self) -> Option<T> {
        match self {
            Self::DiscreteTable { values, .. } => values.last().copied(),
            Self::Gaussian { .. } => None,
        }
    }

    pub fn min_support(&self) -> Option<T> {
        match self {
            Self::DiscreteTable { values, .. } => values.first().copied(),
            Self::Gaussian { .. } => None,
        }
    }

    /// Exponentially tilted law with density `exp(theta x) / mgf(theta)`.
    pub fn tilt(&self, theta: T) -> Result<Self> {
        let phi = self.mgf(theta);
        if !phi.is_finite() {
            return Err(Error::InfiniteMgf { theta: theta.as_f64() });
        }
        match self {
            Self::DiscreteTable { values, probs } => {
                let weights: Vec<T> = values.iter().zip(probs).map(|(&v, &p)| p * (theta * v).exp()).collect();
                let total: T = weights.iter().copied().sum();
                Ok(Self::DiscreteTable {
                    values: values.clone(),
                    probs: weights.into_iter().map(|w| w / total).collect(),
                })
            }
            Self::Gaussian { mu, sigma } => Ok(Self::Gaussian { mu: *mu + *sigma * *sigma * theta, sigma: *sigma }),
        }
    }

    /// Solves `mgf(theta) = 1` for the positive root by bracketing and
    /// bisection, then builds the tilted law.
    ///
    /// Bisection stops once `|mgf - 1| <= tol`, or when the bracket can no
    /// longer be split in the scalar type; Newton steps then polish the root
    /// while they keep reducing the residual.
    pub fn solve_theta_star(&self, tol: T) -> Result<TiltedModel<T>> {
        let mean = self.mean();
        if !(mean < T::zero()) {
            return Err(Error::NoPositiveDrift { mean: mean.as_f64() });
        }
        if let Some(top) = self.max_support() {
            if top <= T::zero() {
                return Err(Error::NoRoot);
            }
        }
        let excess = |theta: T| self.mgf(theta) - T::one();

        let scale = match self {
            Self::DiscreteTable { values, .. } => values.iter().fold(T::zero(), |m, v| m.max(v.abs())),
            Self::Gaussian { mu, sigma } => mu.abs().max(*sigma),
        };
        let mut lo = T::zero();
        let mut hi = T::lit(1e-3) / scale;
        while !(excess(hi) > T::zero()) {
            lo = hi;
            hi = hi * T::lit(2.0);
            if !hi.is_finite() {
                return Err(Error::NoRoot);
            }
        }

        let mut best = hi;
        let mut best_err = excess(hi).abs();
        for _ in 0..4096 {
            let mid = (lo + hi) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            let f = excess(mid);
            if f.abs() < best_err {
                best = mid;
                best_err = f.abs();
            }
            if f.abs() <= tol {
                break;
            }
            if f < T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // a few Newton steps take the root to full working precision
        let mut theta_star = best;
        for _ in 0..8 {
            let slope = self.mgf_derivative(theta_star);
            let next = theta_star - excess(theta_star) / slope;
            if !(next > lo && next < hi) || !(excess(next).abs() < best_err) {
                break;
            }
            theta_star = next;
            best_err = excess(next).abs();
        }
        let tilted = self.tilt(theta_star)?;
        let mu_star = self.mgf_derivative(theta_star);
        Ok(TiltedModel { theta_star, tilted, mu_star })
    }

    /// Span of the lattice carrying the support, if the law is arithmetic.
    pub fn lattice_span(&self) -> Option<T> {
        let Self::DiscreteTable { values, .. } = self else {
            return None;
        };
        let ints: Vec<i64> = values
            .iter()
            .map(|v| (v.as_f64() / LATTICE_GRID).round() as i64)
            .filter(|&k| k != 0)
            .collect();
        let g = ints.iter().fold(0i64, |g, &k| gcd(g, k.abs()));
        if g == 0 {
            return None;
        }
        let widest = ints.iter().map(|k| k.abs()).max().unwrap_or(0);
        if widest / g > LATTICE_MAX_RATIO {
            return None;
        }
        Some(T::lit(g as f64 * LATTICE_GRID))
    }

    pub fn sampler(&self) -> Sampler<T> {
        match self {
            Self::DiscreteTable { values, probs } => {
                let mut acc = T::zero();
                let mut cdf: Vec<T> = probs
                    .iter()
                    .map(|&p| {
                        acc = acc + p;
                        acc
                    })
                    .collect();
                if let Some(last) = cdf.last_mut() {
                    *last = T::infinity();
                }
                Sampler::Table { values: values.clone(), cdf }
            }
            Self::Gaussian { mu, sigma } => Sampler::Gaussian { mu: *mu, sigma: *sigma },
        }
    }

    /// Draws `n` i.i.d. increments.
    pub fn sample(&self, stream: &mut RandomStream, n: usize) -> Vec<T> {
        let sampler = self.sampler();
        (0..n).map(|_| sampler.draw(stream)).collect()
    }
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Precomputed sampler for an [`IncrementModel`].
#[derive(Debug, Clone)]
pub enum Sampler<T> {
    Table { values: Vec<T>, cdf: Vec<T> },
    Gaussian { mu: T, sigma: T },
}

impl<T: Real> Sampler<T> {
    #[inline]
    pub fn draw(&self, stream: &mut RandomStream) -> T {
        match self {
            Self::Table { values, cdf } => {
                if values.len() == 1 {
                    return values[0];
                }
                let u: T = stream.uniform();
                values[cdf.partition_point(|&c| c <= u)]
            }
            Self::Gaussian { mu, sigma } => *mu + *sigma * stream.standard_normal::<T>(),
        }
    }
}

fn parse_number<T: Real>(text: &str, position: usize) -> Result<T> {
    text.trim()
        .parse::<f64>()
        .map(T::lit)
        .map_err(|_| Error::Parse { position, message: format!("expected a number, found {text:?}") })
}

/// Parses `table:v1:p1,v2:p2,...` or `gauss:mu=<r>,sigma=<r>`.
impl<T: Real> FromStr for IncrementModel<T> {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        if let Some(body) = spec.strip_prefix("table:") {
            let mut offset = "table:".len();
            let mut pairs = Vec::new();
            for item in body.split(',') {
                let (v, p) = item.split_once(':').ok_or_else(|| Error::Parse {
                    position: offset,
                    message: format!("expected value:probability, found {item:?}"),
                })?;
                pairs.push((parse_number(v, offset)?, parse_number(p, offset + v.len() + 1)?));
                offset += item.len() + 1;
            }
            Self::table(&pairs)
        } else if let Some(body) = spec.strip_prefix("gauss:") {
            let mut offset = "gauss:".len();
            let (mut mu, mut sigma) = (None, None);
            for item in body.split(',') {
                let (key, val) = item.split_once('=').ok_or_else(|| Error::Parse {
                    position: offset,
                    message: format!("expected key=value, found {item:?}"),
                })?;
                let x = parse_number(val, offset + key.len() + 1)?;
                match key.trim() {
                    "mu" => mu = Some(x),
                    "sigma" => sigma = Some(x),
                    other => {
                        return Err(Error::Parse { position: offset, message: format!("unknown parameter {other:?}") })
                    }
                }
                offset += item.len() + 1;
            }
            let missing = |name: &str| Error::Parse { position: spec.len(), message: format!("missing {name}") };
            Self::gaussian(mu.ok_or_else(|| missing("mu"))?, sigma.ok_or_else(|| missing("sigma"))?)
        } else {
            Err(Error::Parse { position: 0, message: format!("unknown distribution {spec:?}; expected table:... or gauss:...") })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pm1() -> IncrementModel<f64> {
        IncrementModel::table(&[(-1.0, 0.75), (1.0, 0.25)]).unwrap()
    }

    fn skewed() -> IncrementModel<f64> {
        IncrementModel::table(&[(-2.0, 0.4), (1.0, 0.6)]).unwrap()
    }

    #[test]
    fn means() {
        assert_eq!(pm1().mean(), -0.5);
        assert_eq!(IncrementModel::gaussian(-0.5, 1.0).unwrap().mean(), -0.5);
        assert_abs_diff_eq!(skewed().mean(), -0.2, epsilon = 1e-15);
    }

    #[test]
    fn mgf_values() {
        let g = IncrementModel::gaussian(-0.5, 1.0).unwrap();
        assert_eq!(pm1().mgf(0.0), 1.0);
        assert_eq!(g.mgf(0.0), 1.0);
        assert_abs_diff_eq!(pm1().mgf(3f64.ln()), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.mgf(1.0), 1.0, epsilon = 1e-15);
        assert_eq!(pm1().mgf(1e5), f64::INFINITY);
    }

    #[test]
    fn theta_star_pm1() {
        let t = pm1().solve_theta_star(1e-12).unwrap();
        assert_abs_diff_eq!(t.theta_star, 3f64.ln(), epsilon = 1e-10);
        assert_abs_diff_eq!(t.mu_star, 0.5, epsilon = 1e-10);
        let IncrementModel::DiscreteTable { values, probs } = &t.tilted else { panic!() };
        assert_eq!(values, &vec![-1.0, 1.0]);
        assert_abs_diff_eq!(probs[0], 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(probs[1], 0.75, epsilon = 1e-10);
    }

    #[test]
    fn theta_star_gaussian() {
        let t = IncrementModel::gaussian(-0.5, 1.0).unwrap().solve_theta_star(1e-12).unwrap();
        assert_abs_diff_eq!(t.theta_star, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(t.mu_star, 0.5, epsilon = 1e-10);
        let IncrementModel::Gaussian { mu, sigma } = t.tilted else { panic!() };
        assert_abs_diff_eq!(mu, 0.5, epsilon = 1e-10);
        assert_eq!(sigma, 1.0);
    }

    #[test]
    fn theta_star_skewed() {
        let t = skewed().solve_theta_star(1e-12).unwrap();
        let exact = ((1.0 + 7f64.sqrt()) / 3.0).ln();
        assert_abs_diff_eq!(t.theta_star, exact, epsilon = 1e-10);
        let IncrementModel::DiscreteTable { probs, .. } = &t.tilted else { panic!() };
        assert_abs_diff_eq!(probs[0], 0.270849737787082, epsilon = 1e-10);
        assert_abs_diff_eq!(probs[1], 0.729150262212918, epsilon = 1e-10);
        assert!(t.mu_star > 0.0);
        assert_abs_diff_eq!(t.tilted.mean(), t.mu_star, epsilon = 1e-10);
    }

    #[test]
    fn theta_star_in_f32() {
        let m = IncrementModel::<f32>::table(&[(-1.0, 0.75), (1.0, 0.25)]).unwrap();
        let t = m.solve_theta_star(1e-6).unwrap();
        assert!((t.theta_star - 3f32.ln()).abs() < 1e-5);
    }

    #[test]
    fn theta_star_errors() {
        assert_eq!(
            IncrementModel::table(&[(-1.0, 0.25), (1.0, 0.75)]).unwrap().solve_theta_star(1e-12),
            Err(Error::NoPositiveDrift { mean: 0.5 })
        );
        assert_eq!(IncrementModel::table(&[(-1.0, 1.0)]).unwrap().solve_theta_star(1e-12), Err(Error::NoRoot));
        assert_eq!(
            IncrementModel::table(&[(-1.0, 0.5), (0.0, 0.5)]).unwrap().solve_theta_star(1e-12),
            Err(Error::NoRoot)
        );
    }

    #[test]
    fn tilt_identity_and_gaussian_shift() {
        assert_eq!(pm1().tilt(0.0).unwrap(), pm1());
        let g = IncrementModel::gaussian(-0.5, 1.0).unwrap();
        assert_eq!(g.tilt(1.0).unwrap(), IncrementModel::gaussian(0.5, 1.0).unwrap());
        assert!(matches!(pm1().tilt(1e5), Err(Error::InfiniteMgf { .. })));
    }

    #[test]
    fn tilt_composes() {
        let a = pm1().tilt(0.3).unwrap().tilt(0.3).unwrap();
        let b = pm1().tilt(0.6).unwrap();
        let (IncrementModel::DiscreteTable { probs: pa, .. }, IncrementModel::DiscreteTable { probs: pb, .. }) = (a, b)
        else {
            panic!()
        };
        for (x, y) in pa.iter().zip(&pb) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn table_validation() {
        assert!(IncrementModel::table(&[(1.0, 0.5), (1.0, 0.5)]).is_err());
        assert!(IncrementModel::table(&[(1.0, 0.5), (2.0, 0.4)]).is_err());
        assert!(IncrementModel::table(&[(1.0, -0.5), (2.0, 1.5)]).is_err());
        assert!(IncrementModel::<f64>::table(&[]).is_err());
        assert!(IncrementModel::gaussian(0.0, 0.0).is_err());
        // unsorted input is accepted and sorted
        let m = IncrementModel::table(&[(1.0, 0.25), (-1.0, 0.75)]).unwrap();
        assert_eq!(m, pm1());
    }

    #[test]
    fn lattice_spans() {
        assert_eq!(pm1().lattice_span(), Some(1.0));
        let half = IncrementModel::table(&[(-1.5, 0.5), (0.5, 0.5)]).unwrap();
        assert_abs_diff_eq!(half.lattice_span().unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(IncrementModel::gaussian(-0.5, 1.0).unwrap().lattice_span(), None);
        let irr = IncrementModel::table(&[(-1.0, 0.5), (2f64.sqrt(), 0.5)]).unwrap();
        assert_eq!(irr.lattice_span(), None);
    }

    #[test]
    fn sampling_basics() {
        let mut s = RandomStream::from_seed(1);
        assert!(pm1().sample(&mut s, 0).is_empty());
        let degenerate = IncrementModel::table(&[(-1.0, 1.0)]).unwrap();
        assert_eq!(degenerate.sample(&mut s, 5), vec![-1.0; 5]);
        let a = pm1().sample(&mut RandomStream::from_seed(9), 50);
        let b = pm1().sample(&mut RandomStream::from_seed(9), 50);
        assert_eq!(a, b);
    }

    #[test]
    fn sample_mean_clt() {
        let n = 1_000_000;
        let xs = pm1().sample(&mut RandomStream::from_seed(7), n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        // variance of +-1 with p = 1/4 is 1 - 0.25 = 0.75
        let se = (0.75f64 / n as f64).sqrt();
        assert!((mean + 0.5).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn sampling_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let m = IncrementModel::table(&[(-2.0, 0.1), (-1.0, 0.4), (0.0, 0.2), (3.0, 0.3)]).unwrap();
        let IncrementModel::DiscreteTable { values, probs } = &m else { panic!() };
        let n = 100_000;
        let xs = m.sample(&mut RandomStream::from_seed(11), n);
        let stat: f64 = values
            .iter()
            .zip(probs)
            .map(|(v, p)| {
                let obs = xs.iter().filter(|&&x| x == *v).count() as f64;
                let exp = p * n as f64;
                (obs - exp).powi(2) / exp
            })
            .sum();
        let pval = 1.0 - ChiSquared::new((values.len() - 1) as f64).unwrap().cdf(stat);
        assert!(pval > 1e-3, "chi-square p-value {pval}");
    }

    #[test]
    fn parse_specs() {
        let m: IncrementModel<f64> = "table:-1:0.75,1:0.25".parse().unwrap();
        assert_eq!(m, pm1());
        let g: IncrementModel<f64> = "gauss:mu=-0.5,sigma=1".parse().unwrap();
        assert_eq!(g, IncrementModel::gaussian(-0.5, 1.0).unwrap());
        let err = "table:-1:0.75,x:0.25".parse::<IncrementModel<f64>>().unwrap_err();
        assert_eq!(err, Error::Parse { position: 14, message: "expected a number, found \"x\"".into() });
        assert!("poisson:3".parse::<IncrementModel<f64>>().is_err());
        assert!("gauss:mu=1".parse::<IncrementModel<f64>>().is_err());
    }

    fn arb_table() -> impl Strategy<Value = IncrementModel<f64>> {
        proptest::collection::btree_map(-8i32..8, 1u32..100, 2..6).prop_map(|m| {
            let total: u32 = m.values().sum();
            let pairs: Vec<(f64, f64)> =
                m.into_iter().map(|(v, w)| (v as f64 * 0.5, w as f64 / total as f64)).collect();
            let s: f64 = pairs.iter().map(|p| p.1).sum();
            IncrementModel::table(&pairs.iter().map(|&(v, p)| (v, p / s)).collect::<Vec<_>>()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn mgf_is_convex(m in arb_table(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mid = m.mgf((lo + hi) / 2.0);
            prop_assert!(mid <= (m.mgf(lo) + m.mgf(hi)) / 2.0 + 1e-12);
        }

        #[test]
        fn root_solves_equation(m in arb_table()) {
            prop_assume!(m.mean() < -1e-3 && m.max_support().unwrap() > 0.0);
            let t = m.solve_theta_star(1e-12).unwrap();
            prop_assert!(t.theta_star > 0.0);
            prop_assert!((m.mgf(t.theta_star) - 1.0).abs() <= 1e-12);
            prop_assert!(t.tilted.mean() > 0.0);
            let IncrementModel::DiscreteTable { values, probs } = &t.tilted else { unreachable!() };
            let IncrementModel::DiscreteTable { probs: orig, .. } = &m else { unreachable!() };
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            for ((v, p), q) in values.iter().zip(probs).zip(orig) {
                prop_assert!((p - q * (t.theta_star * v).exp()).abs() < 1e-10);
            }
        }

        #[test]
        fn tilt_composition(m in arb_table(), a in -0.7f64..0.7, b in -0.7f64..0.7) {
            let two = m.tilt(a).unwrap().tilt(b).unwrap();
            let one = m.tilt(a + b).unwrap();
            let (IncrementModel::DiscreteTable { probs: p2, .. }, IncrementModel::DiscreteTable { probs: p1, .. }) = (two, one) else { unreachable!() };
            for (x, y) in p2.iter().zip(&p1) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
