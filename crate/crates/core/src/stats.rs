//! Frequency histograms and the chi-squared goodness-of-fit machinery.
//!
//! Reports carry two verdicts. `standard_pass` is the usual upper-tail
//! test at the 5% level. `paper_style_pass` compares the statistic against
//! the lower 5% point of the distribution, which is how the original
//! experiments were scored.

use serde::{Deserialize, Serialize};

use crate::error::{EcoError, Result};
use crate::userbase::{expected_probabilities, DistributionSpec};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Integer-binned frequency counts over `[lo, hi]`.
///
/// Values below `lo` land in the first bin and values above `hi` in the
/// last one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: i64,
    pub hi: i64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: i64, hi: i64) -> Self {
        assert!(hi >= lo, "histogram range [{lo}, {hi}] is empty");
        Self {
            lo,
            hi,
            counts: vec![0; (hi - lo + 1) as usize],
        }
    }

    pub fn record(&mut self, value: i64) {
        let idx = (value.clamp(self.lo, self.hi) - self.lo) as usize;
        self.counts[idx] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bins(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        (self.lo..=self.hi).zip(self.counts.iter().copied())
    }

    /// Adds another histogram's counts bin by bin.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if (self.lo, self.hi) != (other.lo, other.hi) {
            return Err(EcoError::InvalidInput(format!(
                "cannot merge histogram [{}, {}] into [{}, {}]",
                other.lo, other.hi, self.lo, self.hi
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: u32,
    pub lower_critical_005: f64,
    pub upper_p_value: f64,
    pub paper_style_pass: bool,
    pub standard_pass: bool,
}

impl ChiSquareReport {
    pub fn from_statistic(statistic: f64, dof: u32) -> Result<Self> {
        let lower_critical_005 = chi2_lower_critical(dof, 0.05)?;
        let upper_p_value = chi2_sf(statistic, dof)?;
        Ok(Self {
            statistic,
            dof,
            lower_critical_005,
            upper_p_value,
            paper_style_pass: statistic < lower_critical_005,
            standard_pass: upper_p_value > 0.05,
        })
    }
}

/// Pearson's statistic `Σ (O − E)² / E`.
pub fn chi_squared_statistic(observed: &[u64], expected: &[f64]) -> Result<f64> {
    if observed.len() != expected.len() {
        return Err(EcoError::InvalidInput(format!(
            "observed has {} bins but expected has {}",
            observed.len(),
            expected.len()
        )));
    }
    if observed.len() < 2 {
        return Err(EcoError::InvalidInput("need at least two bins".into()));
    }
    if let Some((i, e)) = expected.iter().enumerate().find(|(_, &e)| !(e > 0.0)) {
        return Err(EcoError::InvalidInput(format!(
            "expected count in bin {i} is {e}; every bin needs positive mass"
        )));
    }
    let total_obs: f64 = observed.iter().map(|&o| o as f64).sum();
    let total_exp: f64 = expected.iter().sum();
    if (total_obs - total_exp).abs() > 1e-6 * total_obs.max(1.0) {
        return Err(EcoError::InvalidInput(format!(
            "expected counts sum to {total_exp} but observed sum to {total_obs}"
        )));
    }
    Ok(observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum())
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn check_gamma_domain(s: f64, x: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(EcoError::InvalidInput(format!(
            "gamma shape must be positive, got {s}"
        )));
    }
    if !(x >= 0.0) {
        return Err(EcoError::InvalidInput(format!(
            "gamma argument must be non-negative, got {x}"
        )));
    }
    Ok(())
}

fn lower_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut denom = s;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum.ln() - x + s * x.ln() - ln_gamma(s)).exp()
}

/// Modified Lentz evaluation of the continued fraction for Q(s, x).
fn upper_continued_fraction(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + s * x.ln() - ln_gamma(s)).exp() * h
}

/// Regularized lower incomplete gamma P(s, x).
pub fn regularized_lower_gamma(s: f64, x: f64) -> Result<f64> {
    check_gamma_domain(s, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(if x < s + 1.0 {
        lower_series(s, x).min(1.0)
    } else {
        (1.0 - upper_continued_fraction(s, x)).max(0.0)
    })
}

/// Regularized upper incomplete gamma Q(s, x) = 1 − P(s, x), computed
/// without cancellation in the far tail.
pub fn regularized_upper_gamma(s: f64, x: f64) -> Result<f64> {
    check_gamma_domain(s, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(if x < s + 1.0 {
        (1.0 - lower_series(s, x)).max(0.0)
    } else {
        upper_continued_fraction(s, x).min(1.0)
    })
}

fn check_dof(dof: u32) -> Result<()> {
    if dof == 0 {
        return Err(EcoError::InvalidInput(
            "degrees of freedom must be positive".into(),
        ));
    }
    Ok(())
}

pub fn chi2_cdf(x: f64, dof: u32) -> Result<f64> {
    check_dof(dof)?;
    regularized_lower_gamma(dof as f64 / 2.0, x / 2.0)
}

/// Upper-tail probability of the chi-squared distribution.
pub fn chi2_sf(x: f64, dof: u32) -> Result<f64> {
    check_dof(dof)?;
    regularized_upper_gamma(dof as f64 / 2.0, x / 2.0)
}

/// The point with `chi2_cdf(x, dof) = tail`, by bisection.
pub fn chi2_lower_critical(dof: u32, tail: f64) -> Result<f64> {
    check_dof(dof)?;
    if !(tail > 0.0 && tail < 1.0) {
        return Err(EcoError::InvalidInput(format!(
            "tail must lie in (0, 1), got {tail}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = dof as f64 + 10.0;
    while chi2_cdf(hi, dof)? < tail {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(mid, dof)? < tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Standard normal CDF via the incomplete gamma function.
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let half_sq = 0.5 * z * z;
    if half_sq == 0.0 {
        return 0.5;
    }
    // erfc(|z|/sqrt 2) = Q(1/2, z²/2)
    let tail = 0.5 * regularized_upper_gamma(0.5, half_sq).expect("valid gamma domain");
    if z < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Goodness of fit of `observed` against the distribution `spec`, one
/// degree of freedom fewer than the number of bins.
pub fn analyze(observed: &Histogram, spec: &DistributionSpec) -> Result<ChiSquareReport> {
    analyze_with(observed, spec, None)
}

/// As [`analyze`], optionally merging adjacent bins until every merged bin
/// expects at least `min_expected` observations.
pub fn analyze_with(
    observed: &Histogram,
    spec: &DistributionSpec,
    min_expected: Option<f64>,
) -> Result<ChiSquareReport> {
    if (observed.lo, observed.hi) != (spec.lo, spec.hi) {
        return Err(EcoError::InvalidInput(format!(
            "histogram range [{}, {}] differs from distribution range [{}, {}]",
            observed.lo, observed.hi, spec.lo, spec.hi
        )));
    }
    let total = observed.total();
    if total == 0 {
        return Err(EcoError::InvalidInput("histogram has no observations".into()));
    }
    let expected: Vec<f64> = expected_probabilities(spec)?
        .into_iter()
        .map(|p| p * total as f64)
        .collect();
    let (obs, exp) = match min_expected {
        Some(min) => merge_small_bins(&observed.counts, &expected, min),
        None => (observed.counts.clone(), expected),
    };
    if obs.len() < 2 {
        return Err(EcoError::InvalidInput(
            "fewer than two bins remain after merging".into(),
        ));
    }
    let statistic = chi_squared_statistic(&obs, &exp)?;
    ChiSquareReport::from_statistic(statistic, (obs.len() - 1) as u32)
}

fn merge_small_bins(observed: &[u64], expected: &[f64], min: f64) -> (Vec<u64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o_acc, mut e_acc) = (0u64, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= min {
            obs.push(o_acc);
            exp.push(e_acc);
            o_acc = 0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0 {
        match (obs.last_mut(), exp.last_mut()) {
            (Some(lo), Some(le)) => {
                *lo += o_acc;
                *le += e_acc;
            }
            _ => {
                obs.push(o_acc);
                exp.push(e_acc);
            }
        }
    }
    (obs, exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::userbase::DistributionKind;

    #[test]
    fn identical_counts_give_zero() {
        let s = chi_squared_statistic(&[5, 10, 15], &[5.0, 10.0, 15.0]).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn hand_computed_pearson() {
        let s = chi_squared_statistic(&[10, 20], &[15.0, 15.0]).unwrap();
        assert!((s - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn statistic_rejects_bad_input() {
        assert!(chi_squared_statistic(&[1, 2], &[3.0]).is_err());
        assert!(chi_squared_statistic(&[1, 2], &[0.0, 3.0]).is_err());
        assert!(chi_squared_statistic(&[3], &[3.0]).is_err());
        assert!(chi_squared_statistic(&[1, 2], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn gamma_closed_forms() {
        assert_eq!(regularized_lower_gamma(3.0, 0.0).unwrap(), 0.0);
        let p = regularized_lower_gamma(1.0, 1.0).unwrap();
        assert!((p - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        let p = regularized_lower_gamma(0.5, 0.5).unwrap();
        assert!((p - 0.682_689_492_137_085_9).abs() < 1e-12);
        // large x uses the continued fraction
        let p = regularized_lower_gamma(1.0, 10.0).unwrap();
        assert!((p - (1.0 - (-10.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn gamma_domain_errors() {
        assert!(regularized_lower_gamma(0.0, 1.0).is_err());
        assert!(regularized_lower_gamma(-1.0, 1.0).is_err());
        assert!(regularized_lower_gamma(1.0, -0.1).is_err());
        assert!(chi2_cdf(1.0, 0).is_err());
    }

    #[test]
    fn ln_gamma_integers() {
        let mut fact = 1.0f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n = {n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn critical_values() {
        assert!((chi2_lower_critical(16, 0.05).unwrap() - 7.962).abs() < 1e-3);
        assert!((chi2_lower_critical(10, 0.05).unwrap() - 3.940).abs() < 1e-3);
        assert!((chi2_lower_critical(1, 0.05).unwrap() - 0.003932).abs() < 1e-5);
        assert!((chi2_cdf(7.962, 16).unwrap() - 0.05).abs() < 5e-4);
        assert!((chi2_cdf(3.940, 10).unwrap() - 0.05).abs() < 5e-4);
        assert_eq!(chi2_cdf(0.0, 4).unwrap(), 0.0);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-13);
        assert!((normal_cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-13);
        assert!(normal_cdf(-40.0) >= 0.0);
    }

    #[test]
    fn histogram_overflow_goes_to_edges() {
        let mut h = Histogram::new(2, 4);
        for v in [0, 2, 3, 4, 9] {
            h.record(v);
        }
        assert_eq!(h.counts, vec![2, 1, 2]);
        assert_eq!(h.total(), 5);
    }

    #[test]
    fn merge_requires_same_range() {
        let mut a = Histogram::new(1, 3);
        let b = Histogram::new(1, 4);
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn analyze_uniform_dof_and_near_zero_statistic() {
        let spec = DistributionSpec::uniform(2, 18);
        let mut h = Histogram::new(2, 18);
        h.counts = vec![100; 17];
        let r = analyze(&h, &spec).unwrap();
        assert_eq!(r.dof, 16);
        assert!(r.statistic < 1e-12);
        assert!(r.standard_pass);
        assert!(r.paper_style_pass);
    }

    #[test]
    fn analyze_errors() {
        let spec = DistributionSpec::uniform(2, 18);
        assert!(analyze(&Histogram::new(2, 18), &spec).is_err());
        let mut h = Histogram::new(2, 12);
        h.record(3);
        assert!(analyze(&h, &spec).is_err());
    }

    #[test]
    fn merging_reduces_bins() {
        let spec = DistributionSpec {
            kind: DistributionKind::PowerLaw,
            lo: 1,
            hi: 8,
            mu: None,
            sigma: None,
            alpha: Some(3.0),
        };
        let mut h = Histogram::new(1, 8);
        let probs = expected_probabilities(&spec).unwrap();
        for (i, p) in probs.iter().enumerate() {
            h.counts[i] = (p * 200.0).round() as u64;
        }
        let plain = analyze(&h, &spec).unwrap();
        let merged = analyze_with(&h, &spec, Some(5.0)).unwrap();
        assert_eq!(plain.dof, 7);
        assert!(merged.dof < plain.dof);
    }
}
