//! Integer representations of arithmetic laws and lattice-valued barriers,
//! shared by the exact dynamic programs.

use crate::barrier::Barrier;
use crate::error::{Error, Result};
use crate::model::IncrementModel;
use crate::scalar::Real;

const ON_LATTICE_TOL: f64 = 1e-9;

/// An arithmetic increment law in units of its span.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel<T> {
    pub span: T,
    pub steps: Vec<i64>,
    pub probs: Vec<T>,
}

impl<T: Real> LatticeModel<T> {
    pub fn new(model: &IncrementModel<T>) -> Result<Self> {
        let span = model.lattice_span().ok_or(Error::NonLattice)?;
        Self::with_span(model, span)
    }

    pub fn with_span(model: &IncrementModel<T>, span: T) -> Result<Self> {
        let IncrementModel::DiscreteTable { values, probs } = model else {
            return Err(Error::NonLattice);
        };
        let steps = values
            .iter()
            .map(|&v| to_units(v, span).ok_or(Error::NonLattice))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { span, steps, probs: probs.clone() })
    }

    pub fn max_step(&self) -> i64 {
        *self.steps.iter().max().expect("nonempty table")
    }

    pub fn min_step(&self) -> i64 {
        *self.steps.iter().min().expect("nonempty table")
    }

    pub fn mean_units(&self) -> T {
        self.steps.iter().zip(&self.probs).map(|(&k, &p)| T::lit(k as f64) * p).sum()
    }
}

/// `x / span` as an integer when `x` lies on the lattice.
pub fn to_units<T: Real>(x: T, span: T) -> Option<i64> {
    let r = (x / span).as_f64();
    let k = r.round();
    ((r - k).abs() <= ON_LATTICE_TOL * k.abs().max(1.0)).then_some(k as i64)
}

/// `g(n)` in lattice units; `None` encodes `-inf`.
pub fn barrier_units<T: Real>(barrier: &Barrier<T>, n: u64, span: T) -> Result<Option<i64>> {
    let g = barrier.evaluate(n);
    if g == T::neg_infinity() {
        return Ok(None);
    }
    to_units(g, span)
        .map(Some)
        .ok_or(Error::LatticeMismatch { n, value: g.as_f64(), span: span.as_f64() })
}

/// `sup_{m > n} g(m)` in lattice units; `None` encodes `-inf`.
pub fn future_sup_units<T: Real>(barrier: &Barrier<T>, n: u64, span: T) -> Result<Option<i64>> {
    let g = barrier.future_sup(n);
    if g == T::neg_infinity() {
        return Ok(None);
    }
    to_units(g, span)
        .map(Some)
        .ok_or(Error::LatticeMismatch { n: n + 1, value: g.as_f64(), span: span.as_f64() })
}

/// Whether `g(n)` is lattice-valued for every `n <= horizon`, plus the whole
/// tail for the families whose tail is determined by finitely many values.
pub fn barrier_on_lattice<T: Real>(barrier: &Barrier<T>, span: T, horizon: u64) -> bool {
    let check = |n: u64| barrier_units(barrier, n, span).is_ok();
    match barrier {
        Barrier::Zero | Barrier::Free => true,
        Barrier::Linear { .. } => check(1),
        Barrier::Table { values, .. } => (0..=values.len() as u64).all(check),
        Barrier::Log { .. } => (0..=horizon).all(check),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units() {
        assert_eq!(to_units(-1.5, 0.5), Some(-3));
        assert_eq!(to_units(0.3, 0.5), None);
        let m = IncrementModel::table(&[(-1.5, 0.5), (0.5, 0.5)]).unwrap();
        let l = LatticeModel::new(&m).unwrap();
        assert_eq!(l.steps, vec![-3, 1]);
        assert!(LatticeModel::new(&IncrementModel::gaussian(-1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn barrier_lattice_checks() {
        assert_eq!(barrier_units(&Barrier::linear(1.0).unwrap(), 3, 1.0), Ok(Some(-3)));
        assert_eq!(barrier_units(&Barrier::<f64>::Free, 3, 1.0), Ok(None));
        let log = Barrier::log(2.0).unwrap();
        assert!(matches!(barrier_units(&log, 2, 1.0), Err(Error::LatticeMismatch { n: 2, .. })));
        assert!(!barrier_on_lattice(&log, 1.0, 10));
        assert!(barrier_on_lattice(&Barrier::linear(2.0).unwrap(), 1.0, 10));
        assert!(!barrier_on_lattice(&Barrier::linear(0.5).unwrap(), 1.0, 10));
    }
}
