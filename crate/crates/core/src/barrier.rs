//! Reflection barriers `g: N -> [-inf, 0]` with `g(0) = 0`, the series bound
//! `sum_n exp(theta* g(n))` on the barrier constant, and the finiteness
//! classification of the reflected maximum.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// How a [`Barrier::Table`] continues past its last entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// Continue linearly with the slope of the last two entries.
    Slope,
    /// No reflection beyond the table.
    NegInf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Barrier<T> {
    /// `g = 0`: the classical reflection at zero.
    Zero,
    /// `g(0) = 0`, `g(n) = -inf` afterwards: the unreflected walk.
    Free,
    /// `g(n) = -alpha n`.
    Linear { alpha: T },
    /// `g(n) = -rho ln n` for `n >= 1`, `g(0) = 0`.
    Log { rho: T },
    /// Explicit values for `n = 0..values.len()`, then `extension`.
    Table { values: Vec<T>, extension: Extension },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Finiteness {
    Finite,
    Infinite,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinitenessVerdict<T> {
    pub class: Finiteness,
    pub reason: String,
    pub eq9_bound: T,
}

impl<T: Real> Barrier<T> {
    pub fn linear(alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::InvalidBarrier(format!("linear slope alpha = {alpha} must be positive")));
        }
        Ok(Self::Linear { alpha })
    }

    pub fn log(rho: T) -> Result<Self> {
        if !(rho > T::zero()) || !rho.is_finite() {
            return Err(Error::InvalidBarrier(format!("log coefficient rho = {rho} must be positive")));
        }
        Ok(Self::Log { rho })
    }

    pub fn table(values: Vec<T>, extension: Extension) -> Result<Self> {
        match values.first() {
            None => return Err(Error::InvalidBarrier("empty barrier table".into())),
            Some(&v) if v != T::zero() => {
                return Err(Error::InvalidBarrier(format!("barrier table must start with g(0) = 0, found {v}")))
            }
            _ => {}
        }
        if let Some((n, v)) = values.iter().enumerate().find(|(_, v)| !(**v <= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidBarrier(format!("g({n}) = {v} must be finite and nonpositive")));
        }
        let b = Self::Table { values, extension };
        if extension == Extension::Slope && b.tail_slope() > T::zero() {
            return Err(Error::InvalidBarrier("slope extension would make the barrier positive".into()));
        }
        Ok(b)
    }

    fn tail_slope(&self) -> T {
        match self {
            Self::Table { values, .. } if values.len() >= 2 => values[values.len() - 1] - values[values.len() - 2],
            _ => T::zero(),
        }
    }

    /// `g(n)`, possibly `-inf`.
    pub fn evaluate(&self, n: u64) -> T {
        match self {
            Self::Zero => T::zero(),
            Self::Free => {
                if n == 0 {
                    T::zero()
                } else {
                    T::neg_infinity()
                }
            }
            Self::Linear { alpha } => -*alpha * T::lit(n as f64),
            Self::Log { rho } => {
                if n == 0 {
                    T::zero()
                } else {
                    -*rho * T::lit(n as f64).ln()
                }
            }
            Self::Table { values, extension } => {
                let last = values.len() as u64 - 1;
                if n <= last {
                    values[n as usize]
                } else {
                    match extension {
                        Extension::NegInf => T::neg_infinity(),
                        Extension::Slope => values[last as usize] + T::lit((n - last) as f64) * self.tail_slope(),
                    }
                }
            }
        }
    }

    /// `sup_{m > n} g(m)`.
    pub fn future_sup(&self, n: u64) -> T {
        match self {
            Self::Zero => T::zero(),
            Self::Free => T::neg_infinity(),
            Self::Linear { .. } | Self::Log { .. } => self.evaluate(n + 1),
            Self::Table { values, extension } => {
                let last = values.len() as u64 - 1;
                let tail = match extension {
                    Extension::NegInf => T::neg_infinity(),
                    Extension::Slope => self.evaluate(last.max(n) + 1),
                };
                values.iter().skip(n as usize + 1).fold(tail, |m, &v| m.max(v))
            }
        }
    }

    /// `sum_{n >= 0} exp(theta g(n))`, `+inf` when divergent. The logarithmic
    /// family is summed with an Euler-Maclaurin tail whose error is at most `tol`.
    pub fn eq9_bound(&self, theta: T, tol: T) -> T {
        match self {
            Self::Zero => T::infinity(),
            Self::Free => T::one(),
            Self::Linear { alpha } => T::one() / (T::one() - (-theta * *alpha).exp()),
            Self::Log { rho } => {
                let s = theta * *rho;
                if s <= T::one() {
                    T::infinity()
                } else {
                    T::one() + zeta(s, tol)
                }
            }
            Self::Table { values, extension } => {
                let head: T = values.iter().map(|&v| (theta * v).exp()).sum();
                match extension {
                    Extension::NegInf => head,
                    Extension::Slope => {
                        let slope = self.tail_slope();
                        if slope >= T::zero() {
                            T::infinity()
                        } else {
                            let r = (theta * slope).exp();
                            let last = *values.last().expect("nonempty table");
                            head + (theta * last).exp() * r / (T::one() - r)
                        }
                    }
                }
            }
        }
    }

    /// Upper bound on `sum_{m >= 1} exp(theta (g(n + m) - sup_{k > n} g(k)))`,
    /// the factor by which a walk started `e` below the future supremum can
    /// raise `E[exp(theta D)]`: at most `exp(-theta e)` times this.
    pub fn shifted_tail_bound(&self, n: u64, theta: T) -> T {
        let sup = self.future_sup(n);
        match self {
            Self::Zero => T::infinity(),
            Self::Free => T::zero(),
            Self::Linear { alpha } => T::one() / (T::one() - (-theta * *alpha).exp()),
            Self::Log { rho } => {
                let s = theta * *rho;
                if s <= T::one() {
                    return T::infinity();
                }
                let a = T::lit((n + 1) as f64);
                let terms = 256u64;
                let head: T = (0..terms).map(|j| (s * (a / (a + T::lit(j as f64))).ln()).exp()).sum();
                // integral bound on the rest of the decreasing series
                let x = a + T::lit((terms - 1) as f64);
                head + (s * (a / x).ln()).exp() * x / (s - T::one())
            }
            Self::Table { values, extension } => {
                if sup == T::neg_infinity() {
                    return T::zero();
                }
                let last = values.len() as u64 - 1;
                let head: T = values.iter().skip(n as usize + 1).map(|&v| (theta * (v - sup)).exp()).sum();
                match extension {
                    Extension::NegInf => head,
                    Extension::Slope => {
                        let r = (theta * self.tail_slope()).exp();
                        if r >= T::one() {
                            return T::infinity();
                        }
                        let first = self.evaluate(last.max(n) + 1);
                        head + (theta * (first - sup)).exp() / (T::one() - r)
                    }
                }
            }
        }
    }

    /// Decides whether the maximum of the reflected walk is finite a.s.
    ///
    /// A convergent series bound proves finiteness. Divergence proves
    /// infiniteness only when the barrier eventually lies above
    /// `-rho ln n` with `rho theta* < 1`; otherwise the verdict is `Unknown`.
    pub fn classify_finiteness(&self, theta_star: T) -> FinitenessVerdict<T> {
        let bound = self.eq9_bound(theta_star, T::lit(1e-12));
        let verdict = |class, reason: &str| FinitenessVerdict { class, reason: reason.to_string(), eq9_bound: bound };
        if bound.is_finite() {
            return verdict(Finiteness::Finite, "series bound converges");
        }
        match self {
            Self::Zero => verdict(Finiteness::Infinite, "constant barrier dominates -rho ln n for every rho"),
            Self::Log { rho } => {
                let s = *rho * theta_star;
                if (s - T::one()).abs() <= T::lit(1e-12) {
                    verdict(Finiteness::Unknown, "critical logarithmic barrier rho = 1/theta*")
                } else {
                    verdict(Finiteness::Infinite, "logarithmic barrier with rho < 1/theta*")
                }
            }
            Self::Table { extension: Extension::Slope, .. } if self.tail_slope() == T::zero() => verdict(
                Finiteness::Infinite,
                "eventually constant barrier dominates -rho ln n for every rho",
            ),
            _ => verdict(Finiteness::Unknown, "series bound diverges"),
        }
    }

    /// Parses `zero | free | linear:alpha=<r> | log:rho=<r> | table:<path>`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let param = |body: &str, name: &str, offset: usize| -> Result<T> {
            let val = body.strip_prefix(name).and_then(|r| r.strip_prefix('=')).ok_or_else(|| Error::Parse {
                position: offset,
                message: format!("expected {name}=<number>, found {body:?}"),
            })?;
            val.trim().parse::<f64>().map(T::lit).map_err(|_| Error::Parse {
                position: offset + name.len() + 1,
                message: format!("expected a number, found {val:?}"),
            })
        };
        match spec.trim() {
            "zero" => Ok(Self::Zero),
            "free" => Ok(Self::Free),
            s => {
                if let Some(body) = s.strip_prefix("linear:") {
                    Self::linear(param(body, "alpha", 7)?)
                } else if let Some(body) = s.strip_prefix("log:") {
                    Self::log(param(body, "rho", 4)?)
                } else if let Some(path) = s.strip_prefix("table:") {
                    Self::read_table_file(path)
                } else {
                    Err(Error::Parse { position: 0, message: format!("unknown barrier {s:?}") })
                }
            }
        }
    }

    pub fn read_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::read_table(file)
    }

    /// Reads CSV with header `n,g`, rows `n = 0..N`, and a comment line
    /// `# extension=slope|neginf`.
    pub fn read_table(mut reader: impl Read) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let extension = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix('#'))
            .find_map(|c| c.trim().strip_prefix("extension="))
            .map(|e| match e.trim() {
                "slope" => Ok(Extension::Slope),
                "neginf" => Ok(Extension::NegInf),
                other => Err(Error::InvalidBarrier(format!("unknown extension {other:?}"))),
            })
            .unwrap_or_else(|| Err(Error::InvalidBarrier("missing '# extension=slope|neginf' line".into())))?;
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["n", "g"] {
            return Err(Error::InvalidBarrier(format!("expected header n,g, found {headers:?}")));
        }
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::InvalidBarrier(format!("row {}: bad {what}", row + 1));
            let n: u64 = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("n"))?;
            let g: f64 = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("g"))?;
            if n != row as u64 {
                return Err(Error::InvalidBarrier(format!("rows must list n = 0, 1, ...; found n = {n} at row {}", row + 1)));
            }
            values.push(T::lit(g));
        }
        Self::table(values, extension)
    }
}

/// Riemann zeta for `s > 1`: direct sum to `N - 1`, Euler-Maclaurin tail from `N`.
fn zeta<T: Real>(s: T, tol: T) -> T {
    let tol = tol.max(T::epsilon());
    let three = T::lit(3.0);
    let coeff = s * (s + T::one()) * (s + T::lit(2.0)) / T::lit(720.0);
    let mut n_terms = 10u64;
    while coeff * T::lit(n_terms as f64).powf(-(s + three)) > tol && n_terms < 10_000_000 {
        n_terms *= 2;
    }
    let head: T = (1..n_terms).rev().map(|k| T::lit(k as f64).powf(-s)).sum();
    let n = T::lit(n_terms as f64);
    let tail = n.powf(T::one() - s) / (s - T::one()) + n.powf(-s) / T::lit(2.0) + s * n.powf(-s - T::one()) / T::lit(12.0);
    head + tail
}
