//! Constants of the exponential tail `P(M > u) ~ C_D C_B exp(-theta* u)`:
//! ladder heights and the overshoot factor `C_B`, the barrier factor `C_D`,
//! and the resulting asymptotic tail with arithmetic-case brackets.

use serde::Serialize;

use crate::barrier::{Barrier, Finiteness};
use crate::error::{Error, Result};
use crate::estimators::{d_distribution_dp, DDistribution, Method, TailEstimate};
use crate::lattice::{barrier_on_lattice, to_units, LatticeModel};
use crate::mc::{run_blocks, McConfig};
use crate::model::{IncrementModel, TiltedModel, DEFAULT_ROOT_TOL};
use crate::rng::StreamFamily;
use crate::scalar::Real;
use crate::stats::MeanVar;
use crate::walk::{first_passage_with, DEFAULT_CAP};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderSummary<T> {
    pub span: Option<T>,
    /// `heights[k - 1] = P*(S_{tau+} = k span)`; exact lattice computations only.
    pub heights: Option<Vec<T>>,
    pub mean_height: Option<T>,
    /// `E*[exp(-theta* B)]`.
    pub c_b: T,
    pub c_b_stderr: T,
    /// False when the Monte Carlo overshoot check saw the estimate move between levels.
    pub converged: bool,
}

/// First strict ascent of a lattice walk started at 0, tracked on `[-depth, 0]`.
struct Ascent<T> {
    /// `heights[k - 1]`: probability of first entering `(0, inf)` at `k`.
    heights: Vec<T>,
    /// Mass that fell below `-depth` before ascending.
    escaped: T,
}

fn first_ascent<T: Real>(steps: &[i64], probs: &[T], depth: i64, tol: T) -> Result<Ascent<T>> {
    let top = steps.iter().copied().max().unwrap_or(0).max(0) as usize;
    let mut heights = vec![T::zero(); top];
    let mut escaped = T::zero();
    // index i holds level -i
    let mut mass = vec![T::zero(); depth as usize + 1];
    mass[0] = T::one();
    let stop = tol * T::lit(1e-3);
    for _ in 0..100_000_000u64 {
        let mut next = vec![T::zero(); mass.len()];
        for (i, &p) in mass.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            for (&k, &q) in steps.iter().zip(probs) {
                let level = k - i as i64;
                if level > 0 {
                    heights[level as usize - 1] = heights[level as usize - 1] + p * q;
                } else if -level > depth {
                    escaped = escaped + p * q;
                } else {
                    next[(-level) as usize] = next[(-level) as usize] + p * q;
                }
            }
        }
        mass = next;
        let live: T = mass.iter().copied().sum();
        if live <= stop {
            escaped = escaped + live;
            return Ok(Ascent { heights, escaped });
        }
    }
    Err(Error::NotConverged("first-ascent iteration".into()))
}

/// Exact ascending ladder height law of the tilted walk and the overshoot
/// factor from the discrete stationary-excess law
/// `P(B = j span) = P*(H >= j span) / E*[H / span]`.
pub fn ladder_exact<T: Real>(tilted: &TiltedModel<T>, tol: T, max_depth: u64) -> Result<LadderSummary<T>> {
    let lattice = LatticeModel::new(&tilted.tilted)?;
    if !(lattice.mean_units() > T::zero()) {
        return Err(Error::NonPositiveDrift);
    }
    let span = lattice.span;
    let theta = tilted.theta_star;
    let mut depth = ((T::one() / tol).ln() / (theta * span)).ceil().to_i64().unwrap_or(1) + (-lattice.min_step()).max(1);
    let ascent = loop {
        let a = first_ascent(&lattice.steps, &lattice.probs, depth, tol)?;
        if a.escaped <= tol {
            break a;
        }
        depth *= 2;
        if depth as u64 > max_depth {
            return Err(Error::NotConverged(format!("ladder heights need depth beyond {max_depth}")));
        }
    };
    let heights = ascent.heights;
    let mean_units: T = heights.iter().enumerate().map(|(i, &h)| T::lit((i + 1) as f64) * h).sum();
    let mut tail = T::zero();
    let mut c_b = T::zero();
    for j in (1..=heights.len()).rev() {
        tail = tail + heights[j - 1];
        c_b = c_b + (-theta * span * T::lit(j as f64)).exp() * tail;
    }
    c_b = c_b / mean_units;
    Ok(LadderSummary {
        span: Some(span),
        heights: Some(heights),
        mean_height: Some(mean_units * span),
        c_b,
        c_b_stderr: T::zero(),
        converged: true,
    })
}

fn overshoot_mean<T: Real>(tilted: &TiltedModel<T>, level: T, n_samples: u64, family: &StreamFamily, workers: usize) -> Result<MeanVar<T>> {
    let sampler = tilted.tilted.sampler();
    let blocks = run_blocks(n_samples, family, workers, |stream, _, count| {
        let mut acc = MeanVar::new();
        for _ in 0..count {
            let rec = first_passage_with(&sampler, &Barrier::Free, level, stream, DEFAULT_CAP)?;
            acc.push((-tilted.theta_star * (rec.s_at_tau - level)).exp());
        }
        Ok(acc)
    })?;
    Ok(blocks.iter().fold(MeanVar::new(), |mut a, b| {
        a.merge(b);
        a
    }))
}

/// Monte Carlo estimate of `E*[exp(-theta* (S_tau(u) - u))]` at `u = u_ref`,
/// with a convergence check against `2 u_ref`.
pub fn overshoot_factor_mc<T: Real>(tilted: &TiltedModel<T>, u_ref: T, n_samples: u64, mc: McConfig) -> Result<LadderSummary<T>> {
    if !(u_ref >= T::zero()) {
        return Err(Error::InvalidArgument(format!("reference level {u_ref} must be nonnegative")));
    }
    let near = overshoot_mean(tilted, u_ref, n_samples, &StreamFamily::new(mc.seed, "overshoot"), mc.workers)?;
    let far = overshoot_mean(tilted, u_ref * T::lit(2.0), n_samples, &StreamFamily::new(mc.seed, "overshoot-2u"), mc.workers)?;
    let spread = (near.stderr().powi(2) + far.stderr().powi(2)).sqrt();
    let converged = (near.mean() - far.mean()).abs() <= T::lit(3.0) * spread;
    if !converged {
        log::warn!("overshoot factor moved from {} to {} between u_ref and 2 u_ref", near.mean(), far.mean());
    }
    Ok(LadderSummary {
        span: None,
        heights: None,
        mean_height: None,
        c_b: near.mean(),
        c_b_stderr: near.stderr(),
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdEstimate<T> {
    pub c_d: T,
    pub stderr: T,
    pub n_samples: u64,
    /// Rerun on a tenth of the samples with `eps / 10`.
    pub diagnostic_c_d: T,
    pub diagnostic_stderr: T,
    /// Set when the diagnostic differs by more than two combined standard errors.
    pub bias_flag: bool,
}

fn cd_mean<T: Real>(tilted: &TiltedModel<T>, barrier: &Barrier<T>, n_samples: u64, eps: T, family: &StreamFamily, workers: usize) -> Result<MeanVar<T>> {
    let theta = tilted.theta_star;
    let sampler = tilted.tilted.sampler();
    let stop = (T::one() / eps).ln();
    let blocks = run_blocks(n_samples, family, workers, |stream, start, count| {
        let mut acc = MeanVar::new();
        for i in 0..count {
            let (mut s, mut d) = (T::zero(), T::zero());
            let mut n = 0u64;
            loop {
                let sup = barrier.future_sup(n);
                if sup == T::neg_infinity() || theta * (s + d - sup) > stop {
                    break;
                }
                n += 1;
                if n > DEFAULT_CAP {
                    return Err(Error::CapExceeded { cap: DEFAULT_CAP, sample: Some(start + i) });
                }
                s = s + sampler.draw(stream);
                d = d.max(barrier.evaluate(n) - s);
            }
            acc.push((theta * d).exp());
        }
        Ok(acc)
    })?;
    Ok(blocks.iter().fold(MeanVar::new(), |mut a, b| {
        a.merge(b);
        a
    }))
}

/// Monte Carlo estimate of `C_D = E*[exp(theta* D)]`. Each path stops once
/// the Lundberg bound on a future record of `g(n) - S_n` falls below `eps`.
pub fn estimate_cd_mc<T: Real>(tilted: &TiltedModel<T>, barrier: &Barrier<T>, n_samples: u64, eps: T, mc: McConfig) -> Result<CdEstimate<T>> {
    let verdict = barrier.classify_finiteness(tilted.theta_star);
    match verdict.class {
        Finiteness::Infinite => return Err(Error::InfiniteByCriterion(verdict.reason)),
        Finiteness::Unknown => log::warn!("C_D may be infinite: {}", verdict.reason),
        Finiteness::Finite => {}
    }
    let main = cd_mean(tilted, barrier, n_samples, eps, &StreamFamily::new(mc.seed, "cd"), mc.workers)?;
    let diag = cd_mean(
        tilted,
        barrier,
        (n_samples / 10).max(1),
        eps / T::lit(10.0),
        &StreamFamily::new(mc.seed, "cd-diagnostic"),
        mc.workers,
    )?;
    let spread = (main.stderr().powi(2) + diag.stderr().powi(2)).sqrt();
    let bias_flag = (main.mean() - diag.mean()).abs() > T::lit(2.0) * spread;
    Ok(CdEstimate {
        c_d: main.mean(),
        stderr: main.stderr(),
        n_samples: main.count(),
        diagnostic_c_d: diag.mean(),
        diagnostic_stderr: diag.stderr(),
        bias_flag,
    })
}

/// Law of `D` for the linear barrier `g(n) = -alpha n`: `D` is the maximum of
/// the walk with increments `-alpha - X`, a compound geometric sum of that
/// walk's defective ascending ladder heights.
pub fn d_exact_linear<T: Real>(tilted: &TiltedModel<T>, alpha: T, tol: T) -> Result<DDistribution<T>> {
    let lattice = LatticeModel::new(&tilted.tilted)?;
    let span = lattice.span;
    let theta = tilted.theta_star;
    let a = to_units(alpha, span).ok_or(Error::LatticeMismatch { n: 1, value: (-alpha).as_f64(), span: span.as_f64() })?;
    let aux: Vec<i64> = lattice.steps.iter().map(|&k| -a - k).collect();
    let aux_mean: T = aux.iter().zip(&lattice.probs).map(|(&k, &p)| T::lit(k as f64) * p).sum();
    if !(aux_mean < T::zero()) {
        return Err(Error::PositiveAuxDrift);
    }
    let bound = Barrier::linear(alpha)?.eq9_bound(theta, tol);

    let mut depth = ((T::one() / tol).ln() / (theta * span)).ceil().to_i64().unwrap_or(1) + aux.iter().map(|k| -k).max().unwrap_or(1).max(1);
    let mut ascent = first_ascent(&aux, &lattice.probs, depth, tol)?;
    loop {
        depth *= 2;
        let deeper = first_ascent(&aux, &lattice.probs, depth, tol)?;
        let change: T = deeper.heights.iter().zip(&ascent.heights).map(|(x, y)| (*x - *y).abs()).sum();
        ascent = deeper;
        if change <= tol {
            break;
        }
        if depth > 1 << 24 {
            return Err(Error::NotConverged("defective ladder heights".into()));
        }
    }
    let ladder = ascent.heights;
    let p_up: T = ladder.iter().copied().sum();
    let p_stop = T::one() - p_up;

    // renewal measure U(d) = sum_n G^{*n}(d), P(D = d) = p_stop U(d)
    let mut renewal: Vec<T> = vec![T::one()];
    let mut probs = vec![p_stop];
    let mut c_d = p_stop;
    let mut mass = p_stop;
    let mut prev_term = p_stop;
    let growth = (theta * span).exp();
    let mut weight = T::one();
    for d in 1..10_000_000usize {
        let u: T = (1..=ladder.len().min(d)).map(|k| ladder[k - 1] * renewal[d - k]).sum();
        renewal.push(u);
        let p = p_stop * u;
        probs.push(p);
        weight = weight * growth;
        let term = p * weight;
        c_d = c_d + term;
        mass = mass + p;
        if c_d > bound * (T::one() + T::lit(1e-9)) {
            return Err(Error::DivergedSum { partial: c_d.as_f64(), bound: bound.as_f64() });
        }
        let ratio = if prev_term > T::zero() { term / prev_term } else { T::zero() };
        prev_term = term;
        let tail_ok = ratio < T::one() && term * ratio / (T::one() - ratio) <= tol * T::lit(1e-2);
        if (T::one() - mass).abs() <= tol && (tail_ok || term == T::zero()) {
            let truncation_bound = if term == T::zero() { T::zero() } else { term * ratio / (T::one() - ratio) };
            while probs.len() > 1 && probs[probs.len() - 1] == T::zero() {
                probs.pop();
            }
            return Ok(DDistribution { span, probs, c_d, truncation_bound });
        }
    }
    Err(Error::NotConverged("compound geometric law of D".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailConstants<T> {
    pub theta_star: T,
    pub mu: T,
    pub mu_star: T,
    pub c_d: T,
    pub c_d_stderr: T,
    pub c_d_method: &'static str,
    pub c_b: T,
    pub c_b_stderr: T,
    pub c_b_method: &'static str,
    /// `c_d * c_b`.
    pub constant: T,
    pub lattice_span: Option<T>,
    /// Limits of `exp(theta* u) P(M > u)`; equal unless the law is arithmetic
    /// and the barrier leaves the lattice.
    pub bracket: (T, T),
    pub eq9_bound: T,
    pub finiteness: Finiteness,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsOptions<T> {
    pub tol: T,
    pub eps: T,
    pub n_samples: u64,
    pub u_ref: T,
    pub max_depth: u64,
    pub mc: McConfig,
}

impl<T: Real> ConstantsOptions<T> {
    pub fn new(mc: McConfig) -> Self {
        Self { tol: T::lit(1e-12), eps: T::lit(1e-10), n_samples: 100_000, u_ref: T::lit(20.0), max_depth: 1 << 24, mc }
    }
}

/// Computes every tail constant, using exact lattice programs where the
/// model and barrier allow and Monte Carlo otherwise.
pub fn tail_constants<T: Real>(model: &IncrementModel<T>, barrier: &Barrier<T>, opts: &ConstantsOptions<T>) -> Result<TailConstants<T>> {
    let tilted = model.solve_theta_star(T::lit(DEFAULT_ROOT_TOL).max(T::epsilon() * T::lit(16.0)))?;
    let theta = tilted.theta_star;
    let verdict = barrier.classify_finiteness(theta);
    if verdict.class == Finiteness::Infinite {
        return Err(Error::InfiniteByCriterion(verdict.reason));
    }
    let span = model.lattice_span();

    let (ladder, c_b_method) = match span {
        Some(_) => (ladder_exact(&tilted, opts.tol, opts.max_depth)?, "exact-dp"),
        None => (overshoot_factor_mc(&tilted, opts.u_ref, opts.n_samples, opts.mc)?, "mc"),
    };

    let mut leaves_lattice = false;
    let exact_cd = match span {
        Some(span) if barrier_on_lattice(barrier, span, 10_000) => match d_distribution_dp(&tilted, barrier, opts.tol) {
            Ok(d) => Some(d),
            Err(Error::LatticeMismatch { .. }) => {
                leaves_lattice = true;
                None
            }
            Err(e) => return Err(e),
        },
        Some(_) => {
            leaves_lattice = true;
            None
        }
        None => None,
    };
    let (c_d, c_d_stderr, c_d_method) = match exact_cd {
        Some(d) => (d.c_d, T::zero(), "exact-dp"),
        None => {
            let est = estimate_cd_mc(&tilted, barrier, opts.n_samples, opts.eps, opts.mc)?;
            (est.c_d, est.stderr, "mc")
        }
    };

    let constant = c_d * ladder.c_b;
    let lower = match span {
        Some(span) if leaves_lattice => constant * (-theta * span).exp(),
        _ => constant,
    };
    Ok(TailConstants {
        theta_star: theta,
        mu: model.mean(),
        mu_star: tilted.mu_star,
        c_d,
        c_d_stderr,
        c_d_method,
        c_b: ladder.c_b,
        c_b_stderr: ladder.c_b_stderr,
        c_b_method,
        constant,
        lattice_span: span,
        bracket: (lower, constant),
        eq9_bound: verdict.eq9_bound,
        finiteness: verdict.class,
    })
}

/// `exp(-theta* u) * constant`, and the bracket scaled the same way.
pub fn asymptotic_tail<T: Real>(tc: &TailConstants<T>, u: T) -> (T, (T, T)) {
    let decay = (-tc.theta_star * u).exp();
    (decay * tc.constant, (decay * tc.bracket.0, decay * tc.bracket.1))
}

pub fn asymptotic_estimate<T: Real>(tc: &TailConstants<T>, u: T) -> TailEstimate<T> {
    let (point, bracket) = asymptotic_tail(tc, u);
    TailEstimate {
        u,
        point: point.min(T::one()),
        stderr: T::zero(),
        ci95: (bracket.0.min(T::one()), bracket.1.min(T::one())),
        method: Method::Asymptotic,
        n_samples: 0,
        horizon: None,
        lost_mass: T::zero(),
        u_rounded: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::tail_dp_converged;
    use approx::assert_abs_diff_eq;

    fn pm1() -> IncrementModel<f64> {
        IncrementModel::table(&[(-1.0, 0.75), (1.0, 0.25)]).unwrap()
    }

    fn skewed() -> IncrementModel<f64> {
        IncrementModel::table(&[(-2.0, 0.4), (1.0, 0.6)]).unwrap()
    }

    #[test]
    fn ladder_skip_free() {
        let t = pm1().solve_theta_star(1e-12).unwrap();
        let l = ladder_exact(&t, 1e-12, 1 << 20).unwrap();
        assert_abs_diff_eq!(l.heights.as_ref().unwrap()[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(l.mean_height.unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(l.c_b, 1.0 / 3.0, epsilon = 1e-10);

        let t = skewed().solve_theta_star(1e-12).unwrap();
        let l = ladder_exact(&t, 1e-12, 1 << 20).unwrap();
        assert_eq!(l.heights.as_ref().unwrap().len(), 1);
        assert_abs_diff_eq!(l.c_b, 0.822875655532295, epsilon = 1e-10);
    }

    #[test]
    fn ladder_multi_step() {
        // tilted law with up-jumps of 1 and 2: heights law must be proper and
        // c_b within (0, 1]
        let m = IncrementModel::table(&[(-3.0, 0.5), (1.0, 0.3), (2.0, 0.2)]).unwrap();
        let t = m.solve_theta_star(1e-12).unwrap();
        let l = ladder_exact(&t, 1e-12, 1 << 20).unwrap();
        let h = l.heights.unwrap();
        assert_eq!(h.len(), 2);
        assert_abs_diff_eq!(h.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        assert!(l.c_b > 0.0 && l.c_b <= 1.0);
        // free-barrier tail is asymptotically c_b exp(-theta* u) on the lattice
        let u = 40.0;
        let p = tail_dp_converged(&m, &Barrier::Free, u, 1e-16, 1 << 22).unwrap().point;
        assert_abs_diff_eq!(p * (t.theta_star * u).exp(), l.c_b, epsilon = 1e-6);
    }

    #[test]
    fn ladder_rejects_bad_input() {
        let t = IncrementModel::gaussian(-0.5, 1.0).unwrap().solve_theta_star(1e-12).unwrap();
        assert_eq!(ladder_exact(&t, 1e-12, 1 << 20).unwrap_err(), Error::NonLattice);
    }

    #[test]
    fn overshoot_mc_lattice_cases() {
        let up = TiltedModel { theta_star: 0.7, tilted: IncrementModel::table(&[(1.0, 1.0)]).unwrap(), mu_star: 1.0 };
        let l = overshoot_factor_mc(&up, 10.5, 100, McConfig::new(1)).unwrap();
        assert_abs_diff_eq!(l.c_b, (-0.35f64).exp(), epsilon = 1e-15);
        assert_eq!(l.c_b_stderr, 0.0);

        let t = pm1().solve_theta_star(1e-12).unwrap();
        let l = overshoot_factor_mc(&t, 7.0, 1000, McConfig::new(1)).unwrap();
        assert_abs_diff_eq!(l.c_b, 1.0 / 3.0, epsilon = 1e-11);
        assert_eq!(l.c_b_stderr, 0.0);
        assert!(l.converged);
    }

    #[test]
    fn overshoot_mc_gaussian_matches_naive() {
        // exp(theta* u) P(M > u) is exactly the overshoot factor at level u
        let m = IncrementModel::gaussian(-0.5, 1.0).unwrap();
        let t = m.solve_theta_star(1e-12).unwrap();
        let u: f64 = 1.5;
        let l = overshoot_factor_mc(&t, u, 200_000, McConfig::new(5)).unwrap();
        let naive = crate::estimators::tail_naive(&m, &Barrier::Free, u, 400, 400_000, McConfig::new(6)).unwrap();
        let scale = (t.theta_star * u).exp();
        let diff = (naive.point * scale - l.c_b).abs();
        let se = ((naive.stderr * scale).powi(2) + l.c_b_stderr.powi(2)).sqrt();
        assert!(diff <= 3.0 * se, "{} vs {} (se {se})", naive.point * scale, l.c_b);
        assert!(l.c_b > 0.0 && l.c_b < 1.0);
    }

    #[test]
    fn cd_mc_simple_cases() {
        let t = pm1().solve_theta_star(1e-12).unwrap();
        let e = estimate_cd_mc(&t, &Barrier::Free, 1000, 1e-10, McConfig::new(1)).unwrap();
        assert_eq!((e.c_d, e.stderr), (1.0, 0.0));
        let e = estimate_cd_mc(&t, &Barrier::linear(1.0).unwrap(), 1000, 1e-10, McConfig::new(1)).unwrap();
        assert_eq!((e.c_d, e.stderr), (1.0, 0.0));
        assert!(matches!(estimate_cd_mc(&t, &Barrier::Zero, 10, 1e-10, McConfig::new(1)), Err(Error::InfiniteByCriterion(_))));
    }

    #[test]
    fn cd_exact_linear_cases() {
        let t = pm1().solve_theta_star(1e-12).unwrap();
        let d = d_exact_linear(&t, 1.0, 1e-12).unwrap();
        assert_eq!(d.probs, vec![1.0]);
        assert_eq!(d.c_d, 1.0);

        let t = skewed().solve_theta_star(1e-12).unwrap();
        let d = d_exact_linear(&t, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(d.c_d, 1.095538029372306, epsilon = 1e-10);
        assert!(d.c_d <= Barrier::linear(1.0).unwrap().eq9_bound(t.theta_star, 1e-12));
        assert_abs_diff_eq!(d.total_mass(), 1.0, epsilon = 1e-11);
        assert!(matches!(d_exact_linear(&t, 0.5, 1e-12), Err(Error::LatticeMismatch { .. })));
    }

    #[test]
    fn cd_exact_linear_below_series_bound() {
        for (m, alpha) in [(skewed(), 2.0), (skewed(), 3.0), (pm1(), 2.0)] {
            let t = m.solve_theta_star(1e-12).unwrap();
            let d = d_exact_linear(&t, alpha, 1e-12).unwrap();
            assert!(d.c_d >= 1.0);
            assert!(d.c_d <= Barrier::linear(alpha).unwrap().eq9_bound(t.theta_star, 1e-12));
        }
    }

    #[test]
    fn multi_step_dp_agrees_with_compound_geometric() {
        let m = IncrementModel::table(&[(-3.0, 0.5), (1.0, 0.3), (2.0, 0.2)]).unwrap();
        let t = m.solve_theta_star(1e-12).unwrap();
        for alpha in [1.0, 2.0] {
            let a = d_exact_linear(&t, alpha, 1e-12).unwrap();
            let b = d_distribution_dp(&t, &Barrier::linear(alpha).unwrap(), 1e-12).unwrap();
            assert_abs_diff_eq!(a.c_d, b.c_d, epsilon = 1e-9);
            for k in 0..a.probs.len().min(b.probs.len()).min(30) {
                assert_abs_diff_eq!(a.probs[k], b.probs[k], epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn constants_pipeline_pm1() {
        let tc = tail_constants(&pm1(), &Barrier::Free, &ConstantsOptions::new(McConfig::new(1))).unwrap();
        assert_abs_diff_eq!(tc.theta_star, 3f64.ln(), epsilon = 1e-10);
        assert_eq!(tc.c_d, 1.0);
        assert_abs_diff_eq!(tc.c_b, 1.0 / 3.0, epsilon = 1e-10);
        assert_eq!(tc.bracket.0, tc.bracket.1);
        let (point, bracket) = asymptotic_tail(&tc, 10.0);
        assert_abs_diff_eq!(point, 3f64.powi(-11), epsilon = 1e-15);
        assert_eq!(bracket.0, bracket.1);
        assert_eq!(asymptotic_tail(&tc, 0.0).0, tc.constant);
    }

    #[test]
    fn constants_bracket_when_barrier_leaves_lattice() {
        let t = skewed().solve_theta_star(1e-12).unwrap();
        let b = Barrier::log(2.0 / t.theta_star).unwrap();
        let mut opts = ConstantsOptions::new(McConfig::new(2));
        opts.n_samples = 20_000;
        let tc = tail_constants(&skewed(), &b, &opts).unwrap();
        assert_eq!(tc.c_d_method, "mc");
        assert_eq!(tc.c_b_method, "exact-dp");
        assert_abs_diff_eq!(tc.bracket.0, tc.constant * (-t.theta_star).exp(), epsilon = 1e-15);
        assert!(tc.constant <= tc.eq9_bound * tc.c_b);
        assert!(tc.c_d >= 1.0);
    }

    #[test]
    fn constants_gaussian_uses_mc() {
        let m = IncrementModel::gaussian(-0.5, 1.0).unwrap();
        let mut opts = ConstantsOptions::new(McConfig::new(3));
        opts.n_samples = 20_000;
        let tc = tail_constants(&m, &Barrier::linear(1.0).unwrap(), &opts).unwrap();
        assert_eq!((tc.c_b_method, tc.c_d_method), ("mc", "mc"));
        assert_eq!(tc.lattice_span, None);
        assert!(tc.c_b > 0.0 && tc.c_b <= 1.0);
        assert!(tc.c_d >= 1.0 && tc.c_d <= tc.eq9_bound);
    }
}
