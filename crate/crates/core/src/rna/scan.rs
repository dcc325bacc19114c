//! The stack statistic `M(y)`: exhaustive oracle and center-wise reflected scan.

use serde::Serialize;

use super::{PenaltyFunction, ScoreFunction, Sequence};
use crate::scalar::Real;
use crate::walk::reflect_step;

/// Innermost pair `(i, j)` (1-based) of a stack of `m + 1` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StackLocation {
    pub i: usize,
    pub j: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// Center on letter `n0`; odd loop lengths.
    Letter,
    /// Center between letters `n0` and `n0 + 1`; even loop lengths.
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CenterMax<T> {
    pub parity: Parity,
    pub n0: usize,
    pub max: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult<T> {
    /// `-inf` when the sequence admits no pair.
    pub m_y: T,
    pub argmax: Option<StackLocation>,
    pub per_center_max: Option<Vec<CenterMax<T>>>,
}

/// Score of one stack, summed from the penalty outward so that every scan
/// produces bit-identical values.
pub fn rescore<T: Real>(y: &Sequence, f: &ScoreFunction<T>, penalty: &PenaltyFunction<T>, loc: StackLocation) -> T {
    let s = y.indices();
    let mut total = penalty.eval(loc.j - loc.i - 1);
    for k in 0..=loc.m {
        total = total + f.score(s[loc.i - 1 - k], s[loc.j - 1 + k]);
    }
    total
}

/// Exhaustive `O(n^3)` evaluation over every innermost pair and stack depth.
pub fn scan_bruteforce<T: Real>(y: &Sequence, f: &ScoreFunction<T>, penalty: &PenaltyFunction<T>) -> ScanResult<T> {
    let s = y.indices();
    let n = s.len();
    let mut best = T::neg_infinity();
    let mut argmax = None;
    for i in 1..=n {
        for j in i + 1..=n {
            let mut total = penalty.eval(j - i - 1);
            for k in 0..=(i - 1).min(n - j) {
                total = total + f.score(s[i - 1 - k], s[j - 1 + k]);
                if total > best {
                    best = total;
                    argmax = Some(StackLocation { i, j, m: k });
                }
            }
        }
    }
    ScanResult { m_y: best, argmax, per_center_max: None }
}

/// Runs the reflected walk outward from one center. `pair(l)` gives the
/// 0-based positions of the `l`-th pair out, `loop_len(k)` the loop enclosed
/// by pair `k + 1`.
fn center_walk<T: Real>(
    s: &[u8],
    f: &ScoreFunction<T>,
    penalty: &PenaltyFunction<T>,
    steps: usize,
    pair: impl Fn(usize) -> (usize, usize),
    loop_len: impl Fn(usize) -> usize,
) -> (T, Option<(usize, usize)>) {
    // w is the best stack ending at the current offset, possibly empty;
    // start is the offset of its innermost pair
    let mut w = penalty.eval(loop_len(0));
    let mut start = 1;
    let mut best = T::neg_infinity();
    let mut best_at = None;
    for l in 1..=steps {
        let (a, b) = pair(l);
        let x = f.score(s[a], s[b]);
        let extended = w + x;
        if extended > best {
            best = extended;
            best_at = Some((start, l));
        }
        let g = penalty.eval(loop_len(l));
        let next = reflect_step(w, x, g);
        // ties keep the older start
        if next != extended {
            start = l + 1;
        }
        w = next;
    }
    (best, best_at)
}

fn scan_centers<T: Real>(y: &Sequence, f: &ScoreFunction<T>, penalty: &PenaltyFunction<T>, detailed: bool) -> ScanResult<T> {
    let s = y.indices();
    let n = s.len();
    let mut best = T::neg_infinity();
    let mut argmax = None;
    let mut per_center = detailed.then(Vec::new);
    for n0 in 1..=n {
        // letter center: pair l is (n0 - l, n0 + l), loop 2l - 1
        let steps = (n0 - 1).min(n - n0);
        let (m, at) = center_walk(s, f, penalty, steps, |l| (n0 - l - 1, n0 + l - 1), |k| 2 * k + 1);
        if let Some(v) = per_center.as_mut() {
            v.push(CenterMax { parity: Parity::Letter, n0, max: m });
        }
        if m > best {
            best = m;
            argmax = at.map(|(a, b)| StackLocation { i: n0 - a, j: n0 + a, m: b - a });
        }
        if n0 == n {
            continue;
        }
        // gap center: pair l is (n0 - l + 1, n0 + l), loop 2l - 2
        let steps = n0.min(n - n0);
        let (m, at) = center_walk(s, f, penalty, steps, |l| (n0 - l, n0 + l - 1), |k| 2 * k);
        if let Some(v) = per_center.as_mut() {
            v.push(CenterMax { parity: Parity::Gap, n0, max: m });
        }
        if m > best {
            best = m;
            argmax = at.map(|(a, b)| StackLocation { i: n0 - a + 1, j: n0 + a, m: b - a });
        }
    }
    ScanResult { m_y: best, argmax, per_center_max: per_center }
}

/// `O(n^2)` scan: one reflected walk per center, with increments the pair
/// scores moving outward and barrier the loop penalty of each possible
/// innermost pair. Empty stacks are excluded from the statistic.
pub fn scan_reflected<T: Real>(y: &Sequence, f: &ScoreFunction<T>, penalty: &PenaltyFunction<T>) -> ScanResult<T> {
    scan_centers(y, f, penalty, false)
}

/// As [`scan_reflected`], also reporting the maximum of every center.
pub fn scan_reflected_detailed<T: Real>(y: &Sequence, f: &ScoreFunction<T>, penalty: &PenaltyFunction<T>) -> ScanResult<T> {
    scan_centers(y, f, penalty, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rna::sample_null;
    use crate::rng::RandomStream;
    use proptest::prelude::*;

    fn wc() -> ScoreFunction<f64> {
        ScoreFunction::watson_crick()
    }

    #[test]
    fn hairpin_example() {
        let y = Sequence::parse("aaggaacaaccuu").unwrap();
        let brute = scan_bruteforce(&y, &wc(), &PenaltyFunction::Zero);
        let fast = scan_reflected(&y, &wc(), &PenaltyFunction::Zero);
        assert_eq!(brute.m_y, 4.0);
        assert_eq!(fast.m_y, 4.0);
        let loc = fast.argmax.unwrap();
        assert_eq!(loc, StackLocation { i: 4, j: 10, m: 3 });
        assert_eq!(rescore(&y, &wc(), &PenaltyFunction::Zero, loc), 4.0);
    }

    #[test]
    fn degenerate_sequences() {
        let y = Sequence::parse("aaaaaaa").unwrap();
        assert_eq!(scan_bruteforce(&y, &wc(), &PenaltyFunction::Zero).m_y, -1.0);
        assert_eq!(scan_reflected(&y, &wc(), &PenaltyFunction::Zero).m_y, -1.0);
        let y = Sequence::parse("a").unwrap();
        let r = scan_reflected(&y, &wc(), &PenaltyFunction::Zero);
        assert_eq!(r.m_y, f64::NEG_INFINITY);
        assert_eq!(r.argmax, None);
        assert_eq!(scan_bruteforce(&y, &wc(), &PenaltyFunction::Zero).m_y, f64::NEG_INFINITY);
        let y = Sequence::parse("au").unwrap();
        let p = PenaltyFunction::linear_loop(5.0).unwrap();
        assert_eq!(scan_reflected(&y, &wc(), &p).m_y, 1.0);
        assert_eq!(scan_bruteforce(&y, &wc(), &p).m_y, 1.0);
    }

    #[test]
    fn center_recursion_matches_max_over_starts() {
        let y = sample_null(&[0.25f64; 4], 60, &mut RandomStream::from_seed(4)).unwrap();
        let p = PenaltyFunction::linear_loop(0.7).unwrap();
        let s = y.indices();
        let n0 = 30;
        let steps = (n0 - 1).min(s.len() - n0);
        let xs: Vec<f64> = (1..=steps).map(|l| wc().score(s[n0 - l - 1], s[n0 + l - 1])).collect();
        let mut w = p.eval(1);
        for m in 1..=steps {
            w = reflect_step(w, xs[m - 1], p.eval(2 * m + 1));
            let direct = (0..=m)
                .map(|k| xs[k..m].iter().fold(p.eval(2 * k + 1), |a, &x| a + x))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(w, direct);
        }
    }

    #[test]
    fn detailed_scan_reports_every_center() {
        let y = Sequence::parse("gcauagc").unwrap();
        let r = scan_reflected_detailed(&y, &wc(), &PenaltyFunction::Zero);
        let centers = r.per_center_max.unwrap();
        assert_eq!(centers.len(), 2 * 7 - 1);
        let top = centers.iter().map(|c| c.max).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(top, r.m_y);
    }

    fn arb_case() -> impl Strategy<Value = (Vec<u8>, [[f64; 4]; 4], PenaltyFunction<f64>)> {
        let seq = prop::collection::vec(0u8..4, 2..60);
        let table = prop::array::uniform4(prop::array::uniform4(-3i32..3)).prop_map(|t| t.map(|r| r.map(|v| v as f64 * 0.5)));
        let penalty = prop_oneof![
            Just(PenaltyFunction::Zero),
            (1i32..8).prop_map(|b| PenaltyFunction::LinearLoop { beta: b as f64 * 0.25 }),
            prop::collection::vec(-6i32..=0, 0..12).prop_map(|v| {
                let mut values = vec![0.0, 0.0];
                let mut acc = 0.0;
                for d in v {
                    acc += d as f64 * 0.3;
                    values.push(acc);
                }
                PenaltyFunction::Table { values }
            }),
        ];
        (seq, table, penalty)
    }

    proptest! {
        #[test]
        fn reflected_equals_bruteforce((seq, table, penalty) in arb_case()) {
            let y = Sequence::from_indices(seq).unwrap();
            let f = ScoreFunction::new(table).unwrap();
            let fast = scan_reflected(&y, &f, &penalty);
            let brute = scan_bruteforce(&y, &f, &penalty);
            prop_assert_eq!(fast.m_y, brute.m_y);
            let loc = fast.argmax.unwrap();
            prop_assert_eq!(rescore(&y, &f, &penalty, loc), fast.m_y);
        }

        #[test]
        fn harsher_penalty_never_raises_m(seq in prop::collection::vec(0u8..4, 2..40), b in 1i32..8) {
            let y = Sequence::from_indices(seq).unwrap();
            let soft = scan_reflected(&y, &wc(), &PenaltyFunction::LinearLoop { beta: b as f64 * 0.25 }).m_y;
            let hard = scan_reflected(&y, &wc(), &PenaltyFunction::LinearLoop { beta: b as f64 * 0.5 }).m_y;
            let none = scan_reflected(&y, &wc(), &PenaltyFunction::Zero).m_y;
            prop_assert!(hard <= soft && soft <= none);
        }
    }
}
