//! Declarative measure sequences `{μₙ}` with normalizers `{bₙ}`.

use std::fmt;

use crate::error::{Error, Result};
use crate::measures::{AtomicMeasure, MeasureSpec};

/// How `μₙ` is produced from `n` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureRule {
    /// The same law at every step.
    Iid(MeasureSpec),
    /// `μₙ = D_{n^{α/2}}(base − m(base))`, so `var(μₙ) = n^α · var(base)`
    /// and every `μₙ` is centered.
    Scaled { base: MeasureSpec, alpha: f64 },
    /// `μₙ` is the `n`-th entry.
    Explicit(Vec<MeasureSpec>),
}

/// How `bₙ` is produced from `n` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub enum NormalizerRule {
    /// `bₙ = n`.
    Linear,
    /// `bₙ = n^p`, `p > 0`.
    Power(f64),
    /// `bₙ = 2ⁿ`.
    Geometric,
    Explicit(Vec<f64>),
}

impl NormalizerRule {
    fn value(&self, n: usize) -> Result<f64> {
        let nf = n as f64;
        match self {
            NormalizerRule::Linear => Ok(nf),
            NormalizerRule::Power(p) => Ok(nf.powf(*p)),
            NormalizerRule::Geometric => Ok(2f64.powi(n as i32)),
            NormalizerRule::Explicit(values) => values.get(n - 1).copied().ok_or_else(|| {
                Error::Config(format!(
                    "explicit normalizer list has {} entries, need b_{n}",
                    values.len()
                ))
            }),
        }
    }
}

impl fmt::Display for MeasureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureRule::Iid(spec) => write!(f, "iid({spec})"),
            MeasureRule::Scaled { base, alpha } => write!(f, "scaled({base}, alpha={alpha})"),
            MeasureRule::Explicit(list) => {
                f.write_str("explicit[")?;
                for (i, spec) in list.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{spec}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl fmt::Display for NormalizerRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizerRule::Linear => f.write_str("b_n = n"),
            NormalizerRule::Power(p) => write!(f, "b_n = n^{p}"),
            NormalizerRule::Geometric => f.write_str("b_n = 2^n"),
            NormalizerRule::Explicit(values) => {
                let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                write!(f, "b_n = [{}]", parts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub measure_rule: MeasureRule,
    /// Absent normalizers leave the `Sₙ` series of a simulation empty.
    pub normalizer_rule: Option<NormalizerRule>,
    pub horizon: usize,
}

impl SequenceSpec {
    pub fn new(measure_rule: MeasureRule, normalizer_rule: Option<NormalizerRule>, horizon: usize) -> Self {
        Self {
            measure_rule,
            normalizer_rule,
            horizon,
        }
    }

    pub fn iid(spec: MeasureSpec, normalizer: NormalizerRule, horizon: usize) -> Self {
        Self::new(MeasureRule::Iid(spec), Some(normalizer), horizon)
    }

    fn check_range(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.horizon {
            return Err(Error::Config(format!(
                "step {n} outside 1..={} of the sequence horizon",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `μ₁, …, μₙ`.
    pub fn measures(&self, n: usize) -> Result<Vec<AtomicMeasure>> {
        self.check_range(n)?;
        match &self.measure_rule {
            MeasureRule::Iid(spec) => Ok(vec![spec.materialize()?; n]),
            MeasureRule::Scaled { base, alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::Config(format!("alpha must be finite, got {alpha}")));
                }
                let base = base.materialize()?;
                let centered = base.translate(-base.mean())?;
                (1..=n)
                    .map(|k| centered.dilate((k as f64).powf(alpha / 2.0)))
                    .collect()
            }
            MeasureRule::Explicit(list) => {
                if list.len() < n {
                    return Err(Error::Config(format!(
                        "explicit measure list has {} entries, need {n}",
                        list.len()
                    )));
                }
                list[..n].iter().map(MeasureSpec::materialize).collect()
            }
        }
    }

    /// `μₙ` alone.
    pub fn measure(&self, n: usize) -> Result<AtomicMeasure> {
        self.check_range(n)?;
        match &self.measure_rule {
            MeasureRule::Explicit(list) => list
                .get(n - 1)
                .ok_or_else(|| Error::Config(format!("explicit measure list has no entry {n}")))?
                .materialize(),
            _ => Ok(self.measures(n)?.pop().expect("n >= 1")),
        }
    }

    /// `b₁, …, bₙ`, validated positive and strictly increasing.
    pub fn normalizers(&self, n: usize) -> Result<Vec<f64>> {
        self.check_range(n)?;
        let rule = self
            .normalizer_rule
            .as_ref()
            .ok_or_else(|| Error::Config("no normalizer schedule configured".into()))?;
        if let NormalizerRule::Power(p) = rule {
            if !(p.is_finite() && *p > 0.0) {
                return Err(Error::Config(format!("normalizer power must be positive, got {p}")));
            }
        }
        let values = (1..=n).map(|k| rule.value(k)).collect::<Result<Vec<f64>>>()?;
        if !(values[0].is_finite() && values[0] > 0.0) {
            return Err(Error::Config(format!("b_1 must be positive, got {}", values[0])));
        }
        for (k, pair) in values.windows(2).enumerate() {
            if !(pair[1] > pair[0] && pair[1].is_finite()) {
                return Err(Error::Config(format!(
                    "normalizers must increase strictly: b_{} = {} but b_{} = {}",
                    k + 1,
                    pair[0],
                    k + 2,
                    pair[1]
                )));
            }
        }
        Ok(values)
    }

    /// Validates every materialized measure and normalizer up to the horizon.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        self.measures(self.horizon)?;
        if self.normalizer_rule.is_some() {
            self.normalizers(self.horizon)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bernoulli() -> MeasureSpec {
        MeasureSpec::TwoPoint {
            t1: -1.0,
            t2: 1.0,
            p: 0.5,
        }
    }

    #[test]
    fn scaled_family_variance_grows() {
        let spec = SequenceSpec::new(
            MeasureRule::Scaled {
                base: MeasureSpec::TwoPoint { t1: 0.0, t2: 2.0, p: 0.5 },
                alpha: 0.5,
            },
            Some(NormalizerRule::Linear),
            16,
        );
        let mus = spec.measures(16).unwrap();
        for (k, mu) in mus.iter().enumerate() {
            let n = (k + 1) as f64;
            assert!(mu.mean().abs() < 1e-12);
            assert!((mu.variance() - n.sqrt()).abs() < 1e-12);
        }
        assert_eq!(spec.measure(9).unwrap(), mus[8]);
    }

    #[test]
    fn normalizer_families() {
        let spec = |rule| SequenceSpec::iid(bernoulli(), rule, 5);
        assert_eq!(spec(NormalizerRule::Linear).normalizers(3).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(spec(NormalizerRule::Geometric).normalizers(3).unwrap(), vec![2.0, 4.0, 8.0]);
        let sq = spec(NormalizerRule::Power(2.0)).normalizers(3).unwrap();
        assert_eq!(sq, vec![1.0, 4.0, 9.0]);
        assert!(spec(NormalizerRule::Power(-1.0)).normalizers(3).is_err());
        let bad = spec(NormalizerRule::Explicit(vec![1.0, 3.0, 3.0, 4.0, 5.0]));
        assert!(matches!(bad.normalizers(4), Err(Error::Config(_))));
        let short = spec(NormalizerRule::Explicit(vec![1.0, 2.0]));
        assert!(short.validate().is_err());
    }

    #[test]
    fn range_and_list_checks() {
        let spec = SequenceSpec::new(
            MeasureRule::Explicit(vec![MeasureSpec::Point(1.0), MeasureSpec::Point(2.0)]),
            None,
            2,
        );
        assert!(spec.validate().is_ok());
        assert_eq!(spec.measure(2).unwrap().mean(), 2.0);
        assert!(spec.measures(3).is_err());
        assert!(spec.measures(0).is_err());
        assert!(spec.normalizers(1).is_err());
        let long = SequenceSpec { horizon: 3, ..spec };
        assert!(long.validate().is_err());
    }
}
