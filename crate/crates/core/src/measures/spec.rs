use std::fmt;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Normal};

use super::AtomicMeasure;
use crate::error::{Error, Result};

/// Declarative description of an atomic measure.
///
/// Textual grammar (whitespace insignificant):
/// `point(t)`, `two_point(t1,t2,p)`, `uniform_atoms(a,b,K)`,
/// `gaussian_quantile(m,s,K)`, `explicit[(t1,w1),(t2,w2),...]`.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    Point(f64),
    /// Weight `p` at `t1` and `1 - p` at `t2`.
    TwoPoint { t1: f64, t2: f64, p: f64 },
    /// `k` equal atoms at the midpoint quantiles of the uniform law on `[a, b]`.
    UniformAtoms { a: f64, b: f64, k: usize },
    /// `k` equal atoms at the Gaussian quantiles `(i - 1/2)/k`.
    GaussianQuantile { mean: f64, sd: f64, k: usize },
    Explicit(Vec<(f64, f64)>),
}

impl MeasureSpec {
    pub fn materialize(&self) -> Result<AtomicMeasure> {
        match *self {
            MeasureSpec::Point(t) => {
                finite("t", t)?;
                AtomicMeasure::point(t)
            }
            MeasureSpec::TwoPoint { t1, t2, p } => {
                finite("t1", t1)?;
                finite("t2", t2)?;
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Config(format!("two_point: need 0 < p < 1, got {p}")));
                }
                if t1 == t2 {
                    return Err(Error::Config(format!("two_point: t1 and t2 coincide at {t1}")));
                }
                AtomicMeasure::new([(t1, p), (t2, 1.0 - p)])
            }
            MeasureSpec::UniformAtoms { a, b, k } => {
                finite("a", a)?;
                finite("b", b)?;
                if !(a < b) {
                    return Err(Error::Config(format!("uniform_atoms: need a < b, got a={a}, b={b}")));
                }
                check_count("uniform_atoms", k)?;
                let w = 1.0 / k as f64;
                AtomicMeasure::normalized(
                    (0..k).map(|i| (a + (b - a) * ((i as f64 + 0.5) / k as f64), w)),
                )
            }
            MeasureSpec::GaussianQuantile { mean, sd, k } => {
                finite("m", mean)?;
                if !(sd.is_finite() && sd > 0.0) {
                    return Err(Error::Config(format!("gaussian_quantile: need s > 0, got {sd}")));
                }
                check_count("gaussian_quantile", k)?;
                let normal = Normal::new(mean, sd)
                    .map_err(|e| Error::Config(format!("gaussian_quantile: {e}")))?;
                let w = 1.0 / k as f64;
                AtomicMeasure::normalized(
                    (0..k).map(|i| (normal.inverse_cdf((i as f64 + 0.5) / k as f64), w)),
                )
            }
            MeasureSpec::Explicit(ref atoms) => {
                AtomicMeasure::new(atoms.iter().copied()).map_err(|e| match e {
                    Error::InvalidMeasure(msg) => Error::Config(format!("explicit: {msg}")),
                    other => other,
                })
            }
        }
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("parameter {name} must be finite, got {v}")))
    }
}

fn check_count(family: &str, k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::Config(format!("{family}: need K >= 1")))
    } else {
        Ok(())
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::Point(t) => write!(f, "point({t})"),
            MeasureSpec::TwoPoint { t1, t2, p } => write!(f, "two_point({t1},{t2},{p})"),
            MeasureSpec::UniformAtoms { a, b, k } => write!(f, "uniform_atoms({a},{b},{k})"),
            MeasureSpec::GaussianQuantile { mean, sd, k } => {
                write!(f, "gaussian_quantile({mean},{sd},{k})")
            }
            MeasureSpec::Explicit(atoms) => {
                f.write_str("explicit[")?;
                for (i, (t, w)) in atoms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "({t},{w})")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl FromStr for MeasureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Parser::new(s).parse_spec()
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn new(s: &str) -> Self {
        Self {
            chars: s.chars().collect(),
            pos: 0,
        }
    }

    fn error<T>(&self, position: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn describe(&self, at: usize) -> String {
        match self.chars.get(at) {
            Some(c) => format!("'{c}'"),
            None => "end of input".to_string(),
        }
    }

    fn expect(&mut self, want: char) -> Result<()> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            _ => {
                let at = self.pos;
                self.error(at, format!("expected '{want}', found {}", self.describe(at)))
            }
        }
    }

    fn ident(&mut self) -> Result<(usize, String)> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_ascii_alphanumeric() || self.chars[self.pos] == '_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return self.error(start, format!("expected a family name, found {}", self.describe(start)));
        }
        Ok((start, self.chars[start..self.pos].iter().collect()))
    }

    fn number(&mut self) -> Result<(usize, f64)> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len()
            && matches!(self.chars[self.pos], '0'..='9' | '.' | '+' | '-' | 'e' | 'E')
        {
            self.pos += 1;
        }
        let token: String = self.chars[start..self.pos].iter().collect();
        if token.is_empty() {
            return self.error(start, format!("expected a number, found {}", self.describe(start)));
        }
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok((start, v)),
            _ => self.error(start, format!("invalid number '{token}'")),
        }
    }

    fn count(&mut self) -> Result<usize> {
        let (at, v) = self.number()?;
        if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Ok(v as usize)
        } else {
            self.error(at, format!("atom count must be a positive integer, got {v}"))
        }
    }

    fn comma(&mut self) -> Result<()> {
        self.expect(',')
    }

    fn parse_spec(&mut self) -> Result<MeasureSpec> {
        let (at, name) = self.ident()?;
        let spec = match name.as_str() {
            "explicit" => {
                self.expect('[')?;
                let mut atoms = Vec::new();
                loop {
                    self.expect('(')?;
                    let (_, t) = self.number()?;
                    self.comma()?;
                    let (_, w) = self.number()?;
                    self.expect(')')?;
                    atoms.push((t, w));
                    match self.peek() {
                        Some(',') => self.pos += 1,
                        _ => break,
                    }
                }
                self.expect(']')?;
                MeasureSpec::Explicit(atoms)
            }
            "point" => {
                self.expect('(')?;
                let (_, t) = self.number()?;
                self.expect(')')?;
                MeasureSpec::Point(t)
            }
            "two_point" => {
                self.expect('(')?;
                let (_, t1) = self.number()?;
                self.comma()?;
                let (_, t2) = self.number()?;
                self.comma()?;
                let (_, p) = self.number()?;
                self.expect(')')?;
                MeasureSpec::TwoPoint { t1, t2, p }
            }
            "uniform_atoms" => {
                self.expect('(')?;
                let (_, a) = self.number()?;
                self.comma()?;
                let (_, b) = self.number()?;
                self.comma()?;
                let k = self.count()?;
                self.expect(')')?;
                MeasureSpec::UniformAtoms { a, b, k }
            }
            "gaussian_quantile" => {
                self.expect('(')?;
                let (_, mean) = self.number()?;
                self.comma()?;
                let (_, sd) = self.number()?;
                self.comma()?;
                let k = self.count()?;
                self.expect(')')?;
                MeasureSpec::GaussianQuantile { mean, sd, k }
            }
            other => return self.error(at, format!("unknown measure family '{other}'")),
        };
        if self.peek().is_some() {
            let at = self.pos;
            return self.error(at, format!("unexpected trailing {}", self.describe(at)));
        }
        Ok(spec)
    }
}
