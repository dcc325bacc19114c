//! Loop-penalized stack scoring of nucleotide sequences.
//!
//! A stack of `m + 1` pairs with innermost pair `(i, j)` scores
//! `sum_{k=0..m} f(y_{i-k}, y_{j+k}) + p(j - i - 1)`, where `p` is the loop
//! penalty. Around each center the best stack ending at offset `m` follows a
//! reflected walk, which gives an `O(n^2)` scan and, under an i.i.d. letter
//! model, the significance approximation in [`significance`].

mod scan;
mod significance;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::barrier::{Barrier, Extension};
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::scalar::Real;

pub use scan::{rescore, scan_bruteforce, scan_reflected, scan_reflected_detailed, CenterMax, Parity, ScanResult, StackLocation};
pub use significance::{
    empirical_exceedance, induced_increment, k_star, null_maxima, p_value, p_value_band, validate_base, SignificanceReport,
};

pub const ALPHABET: [char; 4] = ['a', 'c', 'g', 'u'];

/// A nonempty string over `{a, c, g, u}`, stored as letter indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    letters: Vec<u8>,
    /// Set when a `t` was read and stored as `u`.
    pub converted_t: bool,
}

impl Sequence {
    /// Parses plain text or FASTA: lines starting with `>` are skipped,
    /// whitespace is ignored, case is folded and `t` becomes `u`. Positions in
    /// errors count sequence letters from 1.
    pub fn parse(text: &str) -> Result<Self> {
        let mut letters = Vec::new();
        let mut converted_t = false;
        let mut position = 0;
        for line in text.lines() {
            if line.trim_start().starts_with('>') {
                continue;
            }
            for c in line.chars().filter(|c| !c.is_whitespace()) {
                position += 1;
                let idx = match c.to_ascii_lowercase() {
                    'a' => 0,
                    'c' => 1,
                    'g' => 2,
                    'u' => 3,
                    't' => {
                        converted_t = true;
                        3
                    }
                    _ => return Err(Error::InvalidLetter { letter: c, position }),
                };
                letters.push(idx);
            }
        }
        if letters.is_empty() {
            return Err(Error::InvalidArgument("empty sequence".into()));
        }
        if converted_t {
            log::warn!("sequence contains t; read as u");
        }
        Ok(Self { letters, converted_t })
    }

    pub fn from_indices(letters: Vec<u8>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidArgument("empty sequence".into()));
        }
        if let Some(p) = letters.iter().position(|&l| l > 3) {
            return Err(Error::InvalidArgument(format!("letter index {} at position {} is out of range", letters[p], p + 1)));
        }
        Ok(Self { letters, converted_t: false })
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn indices(&self) -> &[u8] {
        &self.letters
    }
}

impl FromStr for Sequence {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.letters.iter().try_for_each(|&l| write!(f, "{}", ALPHABET[l as usize]))
    }
}

/// Pair score table `f(x, y)`, rows and columns in the order a, c, g, u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreFunction<T> {
    pub table: [[T; 4]; 4],
}

impl<T: Real> ScoreFunction<T> {
    /// `+1` for a-u, u-a, c-g, g-c and `-1` otherwise.
    pub fn watson_crick() -> Self {
        let mut table = [[-T::one(); 4]; 4];
        for (x, y) in [(0, 3), (3, 0), (1, 2), (2, 1)] {
            table[x][y] = T::one();
        }
        Self { table }
    }

    pub fn new(table: [[T; 4]; 4]) -> Result<Self> {
        if table.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("score table entries must be finite".into()));
        }
        Ok(Self { table })
    }

    #[inline]
    pub fn score(&self, x: u8, y: u8) -> T {
        self.table[x as usize][y as usize]
    }
}

impl<T: Real> FromStr for ScoreFunction<T> {
    type Err = Error;

    /// `wc` for the default, or 16 comma-separated numbers in row-major order.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("wc") || s.eq_ignore_ascii_case("watson-crick") {
            return Ok(Self::watson_crick());
        }
        let mut table = [[T::zero(); 4]; 4];
        let mut count = 0;
        let mut offset = 0;
        for field in s.split(',') {
            if count == 16 {
                return Err(Error::Parse { position: offset, message: "more than 16 scores".into() });
            }
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Parse { position: offset, message: format!("bad score {:?}", field.trim()) })?;
            table[count / 4][count % 4] = T::lit(v);
            count += 1;
            offset += field.len() + 1;
        }
        if count != 16 {
            return Err(Error::Parse { position: s.len(), message: format!("expected 16 scores, found {count}") });
        }
        Self::new(table)
    }
}

/// Loop penalty `p(l) <= 0` as a function of the number `l` of unpaired
/// letters enclosed by the innermost pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyFunction<T> {
    Zero,
    /// `p(l) = -beta max(0, l - 1)`.
    LinearLoop { beta: T },
    /// `p(l) = values[l]`; loops longer than the table are not allowed.
    Table { values: Vec<T> },
}

impl<T: Real> PenaltyFunction<T> {
    pub fn linear_loop(beta: T) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("loop penalty beta = {beta} must be positive")));
        }
        Ok(Self::LinearLoop { beta })
    }

    pub fn table(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 || values[0] != T::zero() || values[1] != T::zero() {
            return Err(Error::InvalidArgument("penalty table must start with p(0) = p(1) = 0".into()));
        }
        if let Some((l, v)) = values.iter().enumerate().find(|(_, v)| !(**v <= T::zero())) {
            return Err(Error::InvalidArgument(format!("penalty p({l}) = {v} must be nonpositive")));
        }
        Ok(Self::Table { values })
    }

    #[inline]
    pub fn eval(&self, loop_len: usize) -> T {
        match self {
            Self::Zero => T::zero(),
            Self::LinearLoop { beta } => -*beta * T::from_count(loop_len.saturating_sub(1)),
            Self::Table { values } => values.get(loop_len).copied().unwrap_or(T::neg_infinity()),
        }
    }

    /// Barriers of the two center parities: `g1(k) = p(2k + 1)` for centers on
    /// a letter and `g2(k) = p(2k)` for centers between letters.
    pub fn barriers(&self) -> Result<(Barrier<T>, Barrier<T>)> {
        match self {
            Self::Zero => Ok((Barrier::Zero, Barrier::Zero)),
            Self::LinearLoop { beta } => Ok((
                Barrier::linear(T::lit(2.0) * *beta)?,
                Barrier::table(vec![T::zero(), -*beta, -T::lit(3.0) * *beta], Extension::Slope)?,
            )),
            Self::Table { values } => {
                let odd: Vec<T> = values.iter().skip(1).step_by(2).copied().collect();
                let even: Vec<T> = values.iter().step_by(2).copied().collect();
                let finite = |v: Vec<T>| v.into_iter().take_while(|x| x.is_finite()).collect::<Vec<_>>();
                Ok((Barrier::table(finite(odd), Extension::NegInf)?, Barrier::table(finite(even), Extension::NegInf)?))
            }
        }
    }

    /// `zero`, `linear:beta=<b>` or `table:<p0>,<p1>,...`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "zero" {
            return Ok(Self::Zero);
        }
        if let Some(rest) = spec.strip_prefix("linear:") {
            let v = rest.strip_prefix("beta=").ok_or(Error::Parse { position: 7, message: "expected beta=<value>".into() })?;
            let beta: f64 = v.parse().map_err(|_| Error::Parse { position: 12, message: format!("bad number {v:?}") })?;
            return Self::linear_loop(T::lit(beta));
        }
        if let Some(rest) = spec.strip_prefix("table:") {
            let mut values = Vec::new();
            let mut offset = 6;
            for field in rest.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse { position: offset, message: format!("bad number {:?}", field.trim()) })?;
                values.push(T::lit(v));
                offset += field.len() + 1;
            }
            return Self::table(values);
        }
        Err(Error::Parse { position: 0, message: format!("unknown penalty {spec:?}; expected zero, linear:beta=, or table:") })
    }
}

/// Draws `n` i.i.d. letters with probabilities `base` over a, c, g, u.
pub fn sample_null<T: Real>(base: &[T; 4], n: usize, stream: &mut RandomStream) -> Result<Sequence> {
    validate_base(base)?;
    if n == 0 {
        return Err(Error::InvalidArgument("sequence length must be at least 1".into()));
    }
    let mut cdf = [T::zero(); 4];
    let mut acc = T::zero();
    for (c, &p) in cdf.iter_mut().zip(base) {
        acc = acc + p;
        *c = acc;
    }
    cdf[3] = T::infinity();
    let letters = (0..n)
        .map(|_| {
            let v: T = stream.uniform();
            cdf.iter().position(|&c| v < c).unwrap_or(3) as u8
        })
        .collect();
    Sequence::from_indices(letters)
}
