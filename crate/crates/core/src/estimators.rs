//! Estimators of `P(M > u)` for the maximum `M` of the reflected walk:
//! importance sampling under the tilted law, naive finite-horizon Monte Carlo,
//! and exact lattice dynamic programs (which also give the exact law of `D`).

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::barrier::{Barrier, Finiteness};
use crate::error::{Error, Result};
use crate::lattice::{barrier_units, future_sup_units, LatticeModel};
use crate::mc::{run_blocks, McConfig};
use crate::model::{IncrementModel, Sampler, TiltedModel};
use crate::rng::{RandomStream, StreamFamily};
use crate::scalar::Real;
use crate::stats::MeanVar;
use crate::walk::{first_passage_with, reflect_step, PassageRecord};

/// Default pruning tolerance for [`TailDp`].
pub const DEFAULT_PRUNE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "is-mc")]
    IsMc,
    #[serde(rename = "naive-mc")]
    NaiveMc,
    #[serde(rename = "dp-exact")]
    DpExact,
    #[serde(rename = "asymptotic")]
    Asymptotic,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::IsMc => "is-mc",
            Method::NaiveMc => "naive-mc",
            Method::DpExact => "dp-exact",
            Method::Asymptotic => "asymptotic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate<T> {
    pub u: T,
    pub point: T,
    pub stderr: T,
    pub ci95: (T, T),
    pub method: Method,
    pub n_samples: u64,
    pub horizon: Option<u64>,
    /// Probability mass dropped by state pruning (exact methods only).
    pub lost_mass: T,
    /// Set when `u` was not a lattice point and was rounded down.
    pub u_rounded: bool,
}

impl<T: Real> TailEstimate<T> {
    fn from_mean(u: T, acc: &MeanVar<T>, method: Method, horizon: Option<u64>) -> Self {
        let point = acc.mean().max(T::zero()).min(T::one());
        let stderr = acc.stderr();
        let half = T::lit(1.96) * stderr;
        Self {
            u,
            point,
            stderr,
            ci95: ((point - half).max(T::zero()), (point + half).min(T::one())),
            method,
            n_samples: acc.count(),
            horizon,
            lost_mass: T::zero(),
            u_rounded: false,
        }
    }
}

/// Writes rows `u,method,point,stderr,ci_low,ci_high,n_samples,horizon`.
pub fn write_estimates_csv<T: Real>(rows: &[TailEstimate<T>], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "method", "point", "stderr", "ci_low", "ci_high", "n_samples", "horizon"])?;
    for r in rows {
        w.write_record([
            r.u.to_string(),
            r.method.as_str().to_string(),
            format!("{:e}", r.point.as_f64()),
            format!("{:e}", r.stderr.as_f64()),
            format!("{:e}", r.ci95.0.as_f64()),
            format!("{:e}", r.ci95.1.as_f64()),
            r.n_samples.to_string(),
            r.horizon.map(|h| h.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn refuse_infinite<T: Real>(barrier: &Barrier<T>, theta_star: T) -> Result<()> {
    let verdict = barrier.classify_finiteness(theta_star);
    match verdict.class {
        Finiteness::Infinite => Err(Error::InfiniteByCriterion(verdict.reason)),
        Finiteness::Unknown => {
            log::warn!("finiteness of the maximum is unknown: {}", verdict.reason);
            Ok(())
        }
        Finiteness::Finite => Ok(()),
    }
}

/// One importance-sampling replicate: the likelihood ratio
/// `exp(-theta* S_tau)` at the first passage of the tilted walk over `u`.
pub fn is_sample<T: Real>(
    tilted: &TiltedModel<T>,
    sampler: &Sampler<T>,
    barrier: &Barrier<T>,
    u: T,
    stream: &mut RandomStream,
    cap: u64,
) -> Result<(T, PassageRecord<T>)> {
    let rec = first_passage_with(sampler, barrier, u, stream, cap)?;
    Ok(((-tilted.theta_star * rec.s_at_tau).exp(), rec))
}

/// Unbiased estimate of `P(M > u)` via `E*[exp(-theta* S_tau)]`.
pub fn tail_is<T: Real>(
    tilted: &TiltedModel<T>,
    barrier: &Barrier<T>,
    u: T,
    n_samples: u64,
    mc: McConfig,
    cap: u64,
) -> Result<TailEstimate<T>> {
    if !(u >= T::zero()) {
        return Err(Error::InvalidArgument(format!("level u = {u} must be nonnegative")));
    }
    refuse_infinite(barrier, tilted.theta_star)?;
    let sampler = tilted.tilted.sampler();
    let family = StreamFamily::new(mc.seed, "tail-is");
    let blocks = run_blocks(n_samples, &family, mc.workers, |stream, start, count| {
        let mut acc = MeanVar::new();
        for i in 0..count {
            let (value, _) = is_sample(tilted, &sampler, barrier, u, stream, cap).map_err(|e| match e {
                Error::CapExceeded { cap, .. } => Error::CapExceeded { cap, sample: Some(start + i) },
                other => other,
            })?;
            acc.push(value);
        }
        Ok(acc)
    })?;
    let acc = blocks.iter().fold(MeanVar::new(), |mut a, b| {
        a.merge(b);
        a
    });
    Ok(TailEstimate::from_mean(u, &acc, Method::IsMc, None))
}

/// Fraction of paths whose reflected walk exceeds `u` within `horizon` steps.
pub fn tail_naive<T: Real>(
    model: &IncrementModel<T>,
    barrier: &Barrier<T>,
    u: T,
    horizon: u64,
    n_samples: u64,
    mc: McConfig,
) -> Result<TailEstimate<T>> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("naive estimator needs horizon >= 1".into()));
    }
    let sampler = model.sampler();
    let family = StreamFamily::new(mc.seed, "tail-naive");
    let gs: Vec<T> = (1..=horizon).map(|n| barrier.evaluate(n)).collect();
    let blocks = run_blocks(n_samples, &family, mc.workers, |stream, _, count| {
        let mut acc = MeanVar::new();
        for _ in 0..count {
            let mut w = T::zero();
            let mut hit = T::zero();
            for &g in &gs {
                w = reflect_step(w, sampler.draw(stream), g);
                if w > u {
                    hit = T::one();
                    break;
                }
            }
            acc.push(hit);
        }
        Ok(acc)
    })?;
    let acc = blocks.iter().fold(MeanVar::new(), |mut a, b| {
        a.merge(b);
        a
    });
    Ok(TailEstimate::from_mean(u, &acc, Method::NaiveMc, Some(horizon)))
}

/// Forward propagation of the law of the reflected walk on the lattice, with
/// an absorbing state for `W > u`.
///
/// States more than `2 ln(1/prune_tol) / theta*` below `u` are dropped into
/// [`TailDp::lost_mass`]; pruning is disabled when the drift is not negative.
/// A pruned unit of mass at `w` exceeds `u` later with probability at most
/// `exp(-theta* (u - w)) + sum_{k >= 1} exp(-theta* (u - g(n + k)))`, which
/// gives the upper end of the reported interval.
#[derive(Debug, Clone)]
pub struct TailDp<T> {
    lattice: LatticeModel<T>,
    barrier: Barrier<T>,
    upper: i64,
    prune_below: Option<i64>,
    theta_star: Option<T>,
    lower: i64,
    mass: Vec<T>,
    time: u64,
    absorbed: T,
    lost: T,
    lost_bound: T,
    u: T,
    u_rounded: bool,
}

impl<T: Real> TailDp<T> {
    pub fn new(model: &IncrementModel<T>, barrier: &Barrier<T>, u: T, prune_tol: T) -> Result<Self> {
        if !(u >= T::zero()) {
            return Err(Error::InvalidArgument(format!("level u = {u} must be nonnegative")));
        }
        let lattice = LatticeModel::new(model)?;
        let span = lattice.span;
        barrier_units(barrier, 0, span)?;
        let ratio = (u / span).as_f64();
        let upper = (ratio + 1e-9).floor() as i64;
        let u_rounded = (ratio - ratio.round()).abs() > 1e-9;
        let theta_star = model.solve_theta_star(T::lit(crate::model::DEFAULT_ROOT_TOL)).ok().map(|t| t.theta_star);
        let prune_below = theta_star.map(|theta| {
            let width = (T::lit(2.0) * (T::one() / prune_tol).ln() / (theta * span)).ceil();
            upper - width.to_i64().unwrap_or(i64::MAX / 4)
        });
        Ok(Self {
            lattice,
            barrier: barrier.clone(),
            upper,
            prune_below,
            theta_star,
            lower: 0,
            mass: vec![T::one()],
            time: 0,
            absorbed: T::zero(),
            lost: T::zero(),
            lost_bound: T::zero(),
            u,
            u_rounded,
        })
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// `P(tau <= time)`.
    pub fn absorbed(&self) -> T {
        self.absorbed
    }

    pub fn lost_mass(&self) -> T {
        self.lost
    }

    /// Upper bound on the probability that pruned mass would have been absorbed.
    pub fn lost_bound(&self) -> T {
        self.lost_bound
    }

    /// Mass neither absorbed nor pruned.
    pub fn live_mass(&self) -> T {
        self.mass.iter().copied().sum()
    }

    pub fn step(&mut self) -> Result<()> {
        let n = self.time + 1;
        let g = barrier_units(&self.barrier, n, self.lattice.span)?;
        let mut new_lower = self.lower + self.lattice.min_step();
        if let Some(g) = g {
            new_lower = new_lower.max(g);
        }
        if let Some(p) = self.prune_below {
            new_lower = new_lower.max(p);
        }
        new_lower = new_lower.min(self.upper);
        let mut next = vec![T::zero(); (self.upper - new_lower + 1) as usize];
        // pruned mass weighted by exp(theta* w)
        let mut lost_tilted = T::zero();
        let mut lost_now = T::zero();
        for (idx, &p) in self.mass.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            let w = self.lower + idx as i64;
            for (&k, &q) in self.lattice.steps.iter().zip(&self.lattice.probs) {
                let mut w2 = w + k;
                if let Some(g) = g {
                    w2 = w2.max(g);
                }
                let pq = p * q;
                if w2 > self.upper {
                    self.absorbed = self.absorbed + pq;
                } else if w2 < new_lower {
                    lost_now = lost_now + pq;
                    if let Some(theta) = self.theta_star {
                        lost_tilted = lost_tilted + pq * (theta * self.lattice.span * T::lit(w2 as f64)).exp();
                    }
                } else {
                    next[(w2 - new_lower) as usize] = next[(w2 - new_lower) as usize] + pq;
                }
            }
        }
        if lost_now > T::zero() {
            self.lost = self.lost + lost_now;
            let bound = match self.theta_star {
                Some(theta) => {
                    let sup = self.barrier.future_sup(n);
                    let reflected = if sup == T::neg_infinity() {
                        T::zero()
                    } else {
                        (-theta * (self.u - sup)).exp() * self.barrier.shifted_tail_bound(n, theta)
                    };
                    ((-theta * self.u).exp() * lost_tilted + lost_now * reflected).min(lost_now)
                }
                None => lost_now,
            };
            self.lost_bound = self.lost_bound + bound;
        }
        self.mass = next;
        self.lower = new_lower;
        self.time = n;
        Ok(())
    }

    pub fn run_to(&mut self, horizon: u64) -> Result<()> {
        while self.time < horizon {
            self.step()?;
        }
        Ok(())
    }

    pub fn estimate(&self) -> TailEstimate<T> {
        let point = self.absorbed.min(T::one());
        TailEstimate {
            u: self.u,
            point,
            stderr: T::zero(),
            ci95: (point, (point + self.lost_bound).min(T::one())),
            method: Method::DpExact,
            n_samples: 0,
            horizon: Some(self.time),
            lost_mass: self.lost,
            u_rounded: self.u_rounded,
        }
    }
}

/// Exact `P(max_{n <= horizon} W_n > u)` on the lattice.
pub fn tail_dp<T: Real>(model: &IncrementModel<T>, barrier: &Barrier<T>, u: T, horizon: u64) -> Result<TailEstimate<T>> {
    let mut dp = TailDp::new(model, barrier, u, T::lit(DEFAULT_PRUNE_TOL))?;
    dp.run_to(horizon)?;
    Ok(dp.estimate())
}

/// Runs [`TailDp`] with doubling horizons until the absorbed mass changes by
/// at most `change_tol` between `h` and `2h`, or no live mass remains.
pub fn tail_dp_converged<T: Real>(
    model: &IncrementModel<T>,
    barrier: &Barrier<T>,
    u: T,
    change_tol: T,
    max_horizon: u64,
) -> Result<TailEstimate<T>> {
    let mut dp = TailDp::new(model, barrier, u, T::lit(DEFAULT_PRUNE_TOL))?;
    let mut horizon = 64;
    dp.run_to(horizon)?;
    loop {
        let before = dp.absorbed();
        horizon *= 2;
        if horizon > max_horizon {
            return Err(Error::NotConverged(format!("tail DP at u = {u} still moving at horizon {}", dp.time())));
        }
        dp.run_to(horizon)?;
        if dp.absorbed() - before <= change_tol || dp.live_mass() == T::zero() {
            return Ok(dp.estimate());
        }
    }
}

/// Law of `D = sup_n (g(n) - S_n)` under the tilted measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DDistribution<T> {
    pub span: T,
    /// `probs[k] = P*(D = k span)`.
    pub probs: Vec<T>,
    /// `E*[exp(theta* D)]`.
    pub c_d: T,
    /// Bound on the error of `c_d` from truncating the computation.
    pub truncation_bound: T,
}

impl<T: Real> DDistribution<T> {
    pub fn total_mass(&self) -> T {
        self.probs.iter().copied().sum()
    }
}

/// Exact lattice law of `D` by propagating (current record, distance below
/// record). A state is finalized once the Lundberg bound on ever setting a
/// new record drops below `tol`.
pub fn d_distribution_dp<T: Real>(tilted: &TiltedModel<T>, barrier: &Barrier<T>, tol: T) -> Result<DDistribution<T>> {
    let theta = tilted.theta_star;
    refuse_infinite(barrier, theta)?;
    let lattice = LatticeModel::new(&tilted.tilted)?;
    let span = lattice.span;
    if !(lattice.mean_units() > T::zero()) {
        return Err(Error::NonPositiveDrift);
    }
    let freeze_gap = ((T::one() / tol).ln() / (theta * span)).ceil().to_i64().unwrap_or(i64::MAX / 4);
    // negligible states: mass * exp(theta* d) below this are dropped and counted
    let drop_weight = tol * T::lit(1e-6);
    let max_steps: u64 = 50_000_000;

    let mut active: BTreeMap<(i64, i64), T> = BTreeMap::new();
    active.insert((0, 0), T::one());
    let mut frozen: Vec<T> = Vec::new();
    // bound on E[exp(theta* D)] missed by freezing states early
    let mut missed = T::zero();
    let mut d_max = 0i64;
    let weight = |d: i64| (theta * span * T::lit(d as f64)).exp();
    fn freeze<T: Real>(frozen: &mut Vec<T>, d: i64, m: T) {
        let d = d as usize;
        if frozen.len() <= d {
            frozen.resize(d + 1, T::zero());
        }
        frozen[d] = frozen[d] + m;
    }
    // at time n: (g(n), future supremum, shifted series bound)
    let horizon_state = |n: u64| -> Result<(i64, Option<i64>, T)> {
        let h = barrier_units(barrier, n, span)?.expect("finite while future supremum is finite");
        let sup = future_sup_units(barrier, n, span)?;
        Ok((h, sup, barrier.shifted_tail_bound(n, theta)))
    };
    // contribution bound of a state frozen at time n
    let miss = |d: i64, gap: i64, m: T, (h, sup, k): (i64, Option<i64>, T)| match sup {
        None => T::zero(),
        Some(sup) => m * weight(d) * (-theta * span * T::lit((gap - (sup - h)) as f64)).exp() * k,
    };

    let mut n = 0u64;
    let mut state = horizon_state(0)?;
    loop {
        let (h, sup, _) = state;
        let mut live = T::zero();
        active.retain(|&(d, gap), m| {
            let done = match sup {
                None => true,
                Some(sup) => gap - (sup - h) >= freeze_gap,
            };
            if done {
                freeze(&mut frozen, d, *m);
                missed = missed + miss(d, gap, *m, state);
                false
            } else {
                live = live + *m;
                true
            }
        });
        if active.is_empty() {
            break;
        }
        if live * weight(d_max + freeze_gap) <= drop_weight {
            for (&(d, gap), &m) in &active {
                freeze(&mut frozen, d, m);
                missed = missed + miss(d, gap, m, state);
            }
            break;
        }
        n += 1;
        if n > max_steps {
            return Err(Error::NotConverged(format!("law of D still has live mass {live} after {max_steps} steps")));
        }
        let next_state = horizon_state(n)?;
        let shift = next_state.0 - h;
        let mut next: BTreeMap<(i64, i64), T> = BTreeMap::new();
        for (&(d, gap), &m) in &active {
            for (&k, &q) in lattice.steps.iter().zip(&lattice.probs) {
                let mut gap2 = gap - shift + k;
                let mut d2 = d;
                if gap2 < 0 {
                    d2 = d - gap2;
                    gap2 = 0;
                }
                let mq = m * q;
                if mq * weight(d2) < drop_weight {
                    freeze(&mut frozen, d2, mq);
                    missed = missed + miss(d2, gap2, mq, next_state);
                    continue;
                }
                d_max = d_max.max(d2);
                let e = next.entry((d2, gap2)).or_insert(T::zero());
                *e = *e + mq;
            }
        }
        active = next;
        state = next_state;
    }

    let c_d: T = frozen.iter().enumerate().map(|(d, &p)| p * weight(d as i64)).sum();
    Ok(DDistribution { span, probs: frozen, c_d, truncation_bound: missed })
}
