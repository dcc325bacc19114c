//! Significance of `M(Y)` for i.i.d. letters: `P(M(Y) > u) ~ 1 - exp(-n K* exp(-theta* u))`
//! with `K* = (E*[exp(theta* D1)] + E*[exp(theta* D2)]) E*[exp(-theta* B)]`.

use serde::Serialize;

use super::{sample_null, scan_reflected, PenaltyFunction, ScoreFunction};
use crate::asymptotics::{tail_constants, ConstantsOptions};
use crate::error::{Error, Result};
use crate::mc::{run_blocks, McConfig};
use crate::model::IncrementModel;
use crate::rng::StreamFamily;
use crate::scalar::Real;

pub fn validate_base<T: Real>(base: &[T; 4]) -> Result<()> {
    if base.iter().any(|p| !(*p >= T::zero())) {
        return Err(Error::InvalidArgument("letter probabilities must be nonnegative".into()));
    }
    let total: T = base.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) {
        return Err(Error::InvalidArgument(format!("letter probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Law of `f(Y1, Y2)` for independent letters with probabilities `base`.
pub fn induced_increment<T: Real>(f: &ScoreFunction<T>, base: &[T; 4]) -> Result<IncrementModel<T>> {
    validate_base(base)?;
    let mut atoms: Vec<(T, T)> = Vec::new();
    for x in 0..4u8 {
        for y in 0..4u8 {
            let p = base[x as usize] * base[y as usize];
            if p == T::zero() {
                continue;
            }
            let v = f.score(x, y);
            match atoms.iter_mut().find(|(a, _)| *a == v) {
                Some(atom) => atom.1 = atom.1 + p,
                None => atoms.push((v, p)),
            }
        }
    }
    let model = IncrementModel::table(&atoms)?;
    if !(model.mean() < T::zero()) {
        log::warn!("mean pair score {} is not negative", model.mean());
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceReport<T> {
    pub theta_star: T,
    pub c_d1: T,
    pub c_d1_stderr: T,
    pub c_d2: T,
    pub c_d2_stderr: T,
    pub c_b: T,
    pub k_star: T,
    /// Lower end of the arithmetic-case bracket; equals `k_star` when both
    /// barriers stay on the lattice or the law is not arithmetic.
    pub k_star_low: T,
    pub lattice_span: Option<T>,
}

/// Constants of the significance approximation for penalty `penalty`.
pub fn k_star<T: Real>(
    f: &ScoreFunction<T>,
    base: &[T; 4],
    penalty: &PenaltyFunction<T>,
    opts: &ConstantsOptions<T>,
) -> Result<SignificanceReport<T>> {
    let model = induced_increment(f, base)?;
    let (g1, g2) = penalty.barriers()?;
    let mut opts1 = *opts;
    opts1.mc = McConfig { seed: opts.mc.seed, workers: opts.mc.workers };
    let tc1 = tail_constants(&model, &g1, &opts1)?;
    // second barrier draws from an independent seed
    let mut opts2 = *opts;
    opts2.mc = McConfig { seed: opts.mc.seed ^ 0x9e37_79b9_7f4a_7c15, workers: opts.mc.workers };
    let tc2 = tail_constants(&model, &g2, &opts2)?;
    Ok(SignificanceReport {
        theta_star: tc1.theta_star,
        c_d1: tc1.c_d,
        c_d1_stderr: tc1.c_d_stderr,
        c_d2: tc2.c_d,
        c_d2_stderr: tc2.c_d_stderr,
        c_b: tc1.c_b,
        k_star: (tc1.c_d + tc2.c_d) * tc1.c_b,
        k_star_low: tc1.bracket.0 + tc2.bracket.0,
        lattice_span: tc1.lattice_span,
    })
}

fn p_from_constant<T: Real>(n: usize, k: T, theta: T, u: T) -> T {
    let p = -(-(T::from_count(n) * k * (-theta * u).exp())).exp_m1();
    p.max(T::zero()).min(T::one())
}

/// `1 - exp(-n K* exp(-theta* u))`, clamped to `[0, 1]`.
pub fn p_value<T: Real>(n: usize, report: &SignificanceReport<T>, u: T) -> Result<T> {
    if n == 0 || !(u >= T::zero()) {
        return Err(Error::InvalidArgument(format!("p-value needs n >= 1 and u >= 0, got n = {n}, u = {u}")));
    }
    Ok(p_from_constant(n, report.k_star, report.theta_star, u))
}

/// `(p, p_low, p_high)` with the band induced by the constant's bracket.
pub fn p_value_band<T: Real>(n: usize, report: &SignificanceReport<T>, u: T) -> Result<(T, T, T)> {
    let p = p_value(n, report, u)?;
    Ok((p, p_from_constant(n, report.k_star_low, report.theta_star, u), p))
}

/// `M(Y)` for `replicates` null sequences of length `n`, in replicate order.
pub fn null_maxima<T: Real>(
    f: &ScoreFunction<T>,
    base: &[T; 4],
    penalty: &PenaltyFunction<T>,
    n: usize,
    replicates: u64,
    mc: McConfig,
) -> Result<Vec<T>> {
    validate_base(base)?;
    let family = StreamFamily::new(mc.seed, "rna-null");
    let blocks = run_blocks(replicates, &family, mc.workers, |stream, _, count| {
        (0..count).map(|_| Ok(scan_reflected(&sample_null(base, n, stream)?, f, penalty).m_y)).collect::<Result<Vec<T>>>()
    })?;
    Ok(blocks.into_iter().flatten().collect())
}

/// Fraction of `maxima` strictly above `u`.
pub fn empirical_exceedance<T: Real>(maxima: &[T], u: T) -> T {
    if maxima.is_empty() {
        return T::nan();
    }
    T::from_count(maxima.iter().filter(|&&m| m > u).count()) / T::from_count(maxima.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn opts() -> ConstantsOptions<f64> {
        let mut o = ConstantsOptions::new(McConfig::new(11));
        o.n_samples = 20_000;
        o
    }

    #[test]
    fn induced_laws() {
        let wc = ScoreFunction::<f64>::watson_crick();
        let m = induced_increment(&wc, &[0.25; 4]).unwrap();
        assert_eq!(m, IncrementModel::table(&[(-1.0, 0.75), (1.0, 0.25)]).unwrap());
        let flat = ScoreFunction::new([[2.0; 4]; 4]).unwrap();
        assert_eq!(induced_increment(&flat, &[0.25; 4]).unwrap(), IncrementModel::table(&[(2.0, 1.0)]).unwrap());
        assert_eq!(induced_increment(&wc, &[1.0, 0.0, 0.0, 0.0]).unwrap(), IncrementModel::table(&[(-1.0, 1.0)]).unwrap());
        assert!(induced_increment(&wc, &[0.5, 0.5, 0.5, 0.0]).is_err());
    }

    #[test]
    fn zero_penalty_is_refused() {
        let r = k_star(&ScoreFunction::watson_crick(), &[0.25; 4], &PenaltyFunction::Zero, &opts());
        assert!(matches!(r, Err(Error::InfiniteByCriterion(_))));
    }

    #[test]
    fn linear_loop_constants() {
        let wc = ScoreFunction::watson_crick();
        for beta in [0.5, 1.0, 2.0] {
            let r = k_star(&wc, &[0.25; 4], &PenaltyFunction::linear_loop(beta).unwrap(), &opts()).unwrap();
            assert_abs_diff_eq!(r.theta_star, 3f64.ln(), epsilon = 1e-10);
            assert_abs_diff_eq!(r.c_b, 1.0 / 3.0, epsilon = 1e-10);
            assert_abs_diff_eq!(r.k_star, (r.c_d1 + r.c_d2) / 3.0, epsilon = 1e-10);
            let (g1, _) = PenaltyFunction::linear_loop(beta).unwrap().barriers().unwrap();
            assert!(r.c_d1 >= 1.0 && r.c_d1 <= g1.eq9_bound(r.theta_star, 1e-12) + 1e-9);
        }
        // steep penalties leave D1 = D2 = 0
        let r = k_star(&wc, &[0.25; 4], &PenaltyFunction::linear_loop(4.0).unwrap(), &opts()).unwrap();
        assert_abs_diff_eq!(r.k_star, 2.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn p_value_shape() {
        let r = SignificanceReport {
            theta_star: 3f64.ln(),
            c_d1: 1.0,
            c_d1_stderr: 0.0,
            c_d2: 1.0,
            c_d2_stderr: 0.0,
            c_b: 1.0 / 3.0,
            k_star: 2.0 / 3.0,
            k_star_low: 2.0 / 3.0,
            lattice_span: Some(1.0),
        };
        assert_eq!(p_value(500, &r, 1e6).unwrap(), 0.0);
        let u = (500.0 * r.k_star / 2f64.ln()).ln() / r.theta_star;
        assert_abs_diff_eq!(p_value(500, &r, u).unwrap(), 0.5, epsilon = 1e-12);
        let mut last = 1.0;
        for u in 0..30 {
            let p = p_value(500, &r, u as f64).unwrap();
            assert!(p <= last && (0.0..=1.0).contains(&p));
            assert!(p_value(1000, &r, u as f64).unwrap() >= p);
            last = p;
        }
        assert!(p_value(0, &r, 1.0).is_err());
    }

    #[test]
    fn null_maxima_are_reproducible() {
        let wc = ScoreFunction::watson_crick();
        let p = PenaltyFunction::linear_loop(1.0).unwrap();
        let a = null_maxima(&wc, &[0.25; 4], &p, 50, 2100, McConfig::new(5).with_workers(1)).unwrap();
        let b = null_maxima(&wc, &[0.25; 4], &p, 50, 2100, McConfig::new(5).with_workers(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2100);
        assert_eq!(empirical_exceedance(&a, -10.0), 1.0);
    }
}
