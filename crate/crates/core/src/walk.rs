//! The reflected walk: the one-step reflection, full trajectories, the
//! running-maximum representation, and first passage over a level.

use std::io::Write;

use serde::Serialize;

use crate::barrier::Barrier;
use crate::error::{Error, Result};
use crate::model::{IncrementModel, Sampler, TiltedModel};
use crate::rng::RandomStream;
use crate::scalar::Real;

/// Default step cap for [`first_passage`].
pub const DEFAULT_CAP: u64 = 100_000_000;
const CHECKPOINT: u64 = 10_000_000;

/// `max(w_prev + x, g_n)`.
#[inline]
pub fn reflect_step<T: Real>(w_prev: T, x: T, g_n: T) -> T {
    (w_prev + x).max(g_n)
}

/// A simulated path with every derived sequence; index `k` is time `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    /// `X_1..X_n`.
    pub increments: Vec<T>,
    pub partial_sums: Vec<T>,
    pub reflected: Vec<T>,
    /// `D_k = max_{j <= k} (g(j) - S_j)`.
    pub running_d: Vec<T>,
    /// `theta* S_k`, present when the path was drawn under the tilted law.
    pub log_likelihood_ratio: Option<Vec<T>>,
}

impl<T: Real> Trajectory<T> {
    /// Runs the reflection recursion over a given increment path.
    pub fn from_increments(increments: Vec<T>, barrier: &Barrier<T>) -> Self {
        let n = increments.len();
        let mut partial_sums = Vec::with_capacity(n + 1);
        let mut reflected = Vec::with_capacity(n + 1);
        let mut running_d = Vec::with_capacity(n + 1);
        let (mut s, mut w, mut d) = (T::zero(), T::zero(), T::zero());
        partial_sums.push(s);
        reflected.push(w);
        running_d.push(d);
        for (k, &x) in increments.iter().enumerate() {
            let g = barrier.evaluate(k as u64 + 1);
            s = s + x;
            w = reflect_step(w, x, g);
            d = d.max(g - s);
            partial_sums.push(s);
            reflected.push(w);
            running_d.push(d);
        }
        Self { increments, partial_sums, reflected, running_d, log_likelihood_ratio: None }
    }

    pub fn horizon(&self) -> usize {
        self.increments.len()
    }

    /// Writes columns `n,x,s,w,d`; `x` is empty at `n = 0`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "x", "s", "w", "d"])?;
        for n in 0..=self.horizon() {
            let x = if n == 0 { String::new() } else { self.increments[n - 1].to_string() };
            w.write_record([
                n.to_string(),
                x,
                self.partial_sums[n].to_string(),
                self.reflected[n].to_string(),
                self.running_d[n].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn simulate_trajectory<T: Real>(
    model: &IncrementModel<T>,
    barrier: &Barrier<T>,
    horizon: usize,
    stream: &mut RandomStream,
) -> Trajectory<T> {
    Trajectory::from_increments(model.sample(stream, horizon), barrier)
}

/// Simulates under the tilted law and records `theta* S_k`.
pub fn simulate_tilted_trajectory<T: Real>(
    tilted: &TiltedModel<T>,
    barrier: &Barrier<T>,
    horizon: usize,
    stream: &mut RandomStream,
) -> Trajectory<T> {
    let mut traj = simulate_trajectory(&tilted.tilted, barrier, horizon, stream);
    traj.log_likelihood_ratio = Some(traj.partial_sums.iter().map(|&s| tilted.theta_star * s).collect());
    traj
}

/// `W_n = S_n + max_{k <= n} (g(k) - S_k)`, computed without the recursion.
pub fn reflect_from_sums<T: Real>(partial_sums: &[T], barrier: &Barrier<T>) -> Vec<T> {
    let mut best = T::neg_infinity();
    partial_sums
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            best = best.max(barrier.evaluate(k as u64) - s);
            s + best
        })
        .collect()
}

/// State at the first time the reflected walk exceeds `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassageRecord<T> {
    pub tau: u64,
    pub s_at_tau: T,
    pub w_at_tau: T,
    /// `D_u = W_tau - S_tau`.
    pub d_at_tau: T,
    /// `B_u = W_tau - u`.
    pub overshoot: T,
}

/// Runs the reflection until `W_n > u`. Meant for laws with positive drift;
/// `cap` bounds the number of steps.
pub fn first_passage<T: Real>(
    model: &IncrementModel<T>,
    barrier: &Barrier<T>,
    u: T,
    stream: &mut RandomStream,
    cap: u64,
) -> Result<PassageRecord<T>> {
    first_passage_with(&model.sampler(), barrier, u, stream, cap)
}

pub(crate) fn first_passage_with<T: Real>(
    sampler: &Sampler<T>,
    barrier: &Barrier<T>,
    u: T,
    stream: &mut RandomStream,
    cap: u64,
) -> Result<PassageRecord<T>> {
    if !(u >= T::zero()) {
        return Err(Error::InvalidArgument(format!("level u = {u} must be nonnegative")));
    }
    let (mut s, mut w) = (T::zero(), T::zero());
    for n in 1..=cap {
        let x = sampler.draw(stream);
        s = s + x;
        w = reflect_step(w, x, barrier.evaluate(n));
        if w > u {
            return Ok(PassageRecord { tau: n, s_at_tau: s, w_at_tau: w, d_at_tau: w - s, overshoot: w - u });
        }
        if n % CHECKPOINT == 0 {
            log::debug!("first passage of {u}: {n} steps, W = {w}");
        }
    }
    Err(Error::CapExceeded { cap, sample: None })
}
