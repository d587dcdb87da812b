//! Value distributions on a bounded support and their virtual values.

use std::fmt;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::quadrature;

/// Regular value law `F` on `[support_lo, support_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueDistribution {
    /// Uniform on `[0, hi]`.
    Uniform { hi: f64 },
    /// `F(v) = (v / hi)^k` on `[0, hi]`.
    Power { k: f64, hi: f64 },
    /// Exponential with rate `rate` truncated to `[0, hi]`.
    TruncatedExponential { rate: f64, hi: f64 },
    /// Piecewise-linear CDF through tabulated points.
    Tabulated(Tabulated),
}

/// Tabulated CDF: strictly increasing `values` and `cdf`, first cdf 0, last 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    values: Vec<f64>,
    cdf: Vec<f64>,
}

impl Tabulated {
    pub fn new(values: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if values.len() != cdf.len() || values.len() < 2 {
            return Err(Error::Table("need at least two rows of `v cdf`".into()));
        }
        if values[0] < 0.0 {
            return Err(Error::Table("values must be nonnegative".into()));
        }
        if cdf[0] != 0.0 || cdf[cdf.len() - 1] != 1.0 {
            return Err(Error::Table("first cdf must be 0 and last cdf must be 1".into()));
        }
        for i in 1..values.len() {
            if !(values[i] > values[i - 1]) || !(cdf[i] > cdf[i - 1]) {
                return Err(Error::Table(format!(
                    "row {} is not strictly increasing in both columns",
                    i + 1
                )));
            }
        }
        Ok(Self { values, cdf })
    }

    /// Parses the two-column `v cdf` text format. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut cdf = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.parse::<f64>().ok())
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Table(format!("line {}: expected `v cdf`", lineno + 1)))
            };
            let v = parse(cols.next())?;
            let c = parse(cols.next())?;
            if cols.next().is_some() {
                return Err(Error::Table(format!("line {}: extra columns", lineno + 1)));
            }
            values.push(v);
            cdf.push(c);
        }
        Self::new(values, cdf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn knots(&self) -> &[f64] {
        &self.values
    }

    // Segment index containing v (right-continuous; the top knot maps to the last segment).
    fn segment(&self, v: f64) -> usize {
        let n = self.values.len();
        match self.values.partition_point(|&x| x <= v) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    fn slope(&self, i: usize) -> f64 {
        (self.cdf[i + 1] - self.cdf[i]) / (self.values[i + 1] - self.values[i])
    }
}

impl ValueDistribution {
    pub fn uniform() -> Self {
        ValueDistribution::Uniform { hi: 1.0 }
    }

    pub fn power(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid("k", "power exponent must be positive"));
        }
        Ok(ValueDistribution::Power { k, hi: 1.0 })
    }

    pub fn truncated_exponential(rate: f64, hi: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid("rate", "must be positive"));
        }
        if !(hi > 0.0 && hi.is_finite()) {
            return Err(invalid("hi", "must be positive"));
        }
        Ok(ValueDistribution::TruncatedExponential { rate, hi })
    }

    pub fn support_lo(&self) -> f64 {
        match self {
            ValueDistribution::Tabulated(t) => t.values[0],
            _ => 0.0,
        }
    }

    pub fn support_hi(&self) -> f64 {
        match self {
            ValueDistribution::Uniform { hi }
            | ValueDistribution::Power { hi, .. }
            | ValueDistribution::TruncatedExponential { hi, .. } => *hi,
            ValueDistribution::Tabulated(t) => t.values[t.values.len() - 1],
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Points where the density may be non-smooth, including both endpoints.
    pub fn knots(&self) -> Vec<f64> {
        match self {
            ValueDistribution::Tabulated(t) => t.values.clone(),
            _ => vec![self.support_lo(), self.support_hi()],
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.support_lo() && v <= self.support_hi()
    }

    pub(crate) fn check_support(&self, v: f64) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::OutOfSupport {
                value: v,
                lo: self.support_lo(),
                hi: self.support_hi(),
            })
        }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        if v <= self.support_lo() {
            return 0.0;
        }
        if v >= self.support_hi() {
            return 1.0;
        }
        match self {
            ValueDistribution::Uniform { hi } => v / hi,
            ValueDistribution::Power { k, hi } => (v / hi).powf(*k),
            ValueDistribution::TruncatedExponential { rate, hi } => {
                (-rate * v).exp_m1() / (-rate * hi).exp_m1()
            }
            ValueDistribution::Tabulated(t) => {
                let i = t.segment(v);
                t.cdf[i] + t.slope(i) * (v - t.values[i])
            }
        }
    }

    /// Density; zero outside the support, right-continuous at tabulated knots
    /// except at the upper endpoint.
    pub fn pdf(&self, v: f64) -> f64 {
        if !self.contains(v) {
            return 0.0;
        }
        match self {
            ValueDistribution::Uniform { hi } => 1.0 / hi,
            ValueDistribution::Power { k, hi } => {
                if v == 0.0 {
                    if *k < 1.0 {
                        f64::INFINITY
                    } else if *k == 1.0 {
                        1.0 / hi
                    } else {
                        0.0
                    }
                } else {
                    k / hi * (v / hi).powf(k - 1.0)
                }
            }
            ValueDistribution::TruncatedExponential { rate, hi } => {
                rate * (-rate * v).exp() / -(-rate * hi).exp_m1()
            }
            ValueDistribution::Tabulated(t) => t.slope(t.segment(v)),
        }
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        match self {
            ValueDistribution::Uniform { hi } => q * hi,
            ValueDistribution::Power { k, hi } => hi * q.powf(1.0 / k),
            ValueDistribution::TruncatedExponential { rate, hi } => {
                let z = -(-rate * hi).exp_m1();
                (-(-q * z).ln_1p() / rate).min(*hi)
            }
            ValueDistribution::Tabulated(t) => {
                let n = t.cdf.len();
                let i = match t.cdf.partition_point(|&c| c <= q) {
                    0 => 0,
                    i if i >= n => n - 2,
                    i => i - 1,
                };
                t.values[i] + (q - t.cdf[i]) / t.slope(i)
            }
        }
    }

    /// `∫_lo^v y f(y) dy`, analytic for every family.
    pub fn partial_mean(&self, v: f64) -> f64 {
        let v = v.clamp(self.support_lo(), self.support_hi());
        match self {
            ValueDistribution::Uniform { hi } => v * v / (2.0 * hi),
            ValueDistribution::Power { k, hi } => k / (k + 1.0) * v * (v / hi).powf(*k),
            ValueDistribution::TruncatedExponential { rate, hi } => {
                let z = -(-rate * hi).exp_m1();
                (1.0 - (-rate * v).exp() * (1.0 + rate * v)) / (rate * z)
            }
            ValueDistribution::Tabulated(t) => {
                let mut acc = 0.0;
                for i in 0..t.values.len() - 1 {
                    let a = t.values[i];
                    if a >= v {
                        break;
                    }
                    let b = t.values[i + 1].min(v);
                    acc += t.slope(i) * 0.5 * (b * b - a * a);
                }
                acc
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.partial_mean(self.support_hi())
    }

    /// Virtual value `v − (1 − F(v)) / f(v)`.
    pub fn virtual_value(&self, v: f64) -> Result<f64> {
        self.check_support(v)?;
        let f = self.pdf(v);
        if !(f > 0.0) {
            return Err(Error::ZeroDensity(v));
        }
        if f.is_infinite() {
            return Ok(v);
        }
        Ok(v - (1.0 - self.cdf(v)) / f)
    }

    /// `φ(v) f(v) = v f(v) − (1 − F(v))`, bounded even where `f` vanishes.
    pub fn virtual_density(&self, v: f64) -> f64 {
        v * self.pdf(v) - (1.0 - self.cdf(v))
    }

    /// `∫ g` over the support, split at the distribution's knots.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, tol: f64) -> f64 {
        quadrature::integrate_knots(g, &self.knots(), tol)
    }

    /// Scans φ on an even grid (points with zero density are skipped) and
    /// reports the first decrease beyond `-1e-9`.
    pub fn check_regularity(&self, grid_size: usize) -> RegularityReport {
        let grid_size = grid_size.max(2);
        let lo = self.support_lo();
        let hi = self.support_hi();
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..grid_size {
            let v = lo + (hi - lo) * i as f64 / (grid_size - 1) as f64;
            let Ok(phi) = self.virtual_value(v) else { continue };
            if let Some((pv, pphi)) = prev {
                if phi - pphi < -REGULARITY_SLACK {
                    return RegularityReport {
                        regular: false,
                        violation: Some(RegularityViolation {
                            from: pv,
                            to: v,
                            drop: pphi - phi,
                        }),
                    };
                }
            }
            prev = Some((v, phi));
        }
        RegularityReport {
            regular: true,
            violation: None,
        }
    }
}

const REGULARITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub regular: bool,
    pub violation: Option<RegularityViolation>,
}

/// φ fell by `drop` between grid points `from` and `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityViolation {
    pub from: f64,
    pub to: f64,
    pub drop: f64,
}

impl fmt::Display for ValueDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueDistribution::Uniform { hi } => write!(f, "uniform[0,{hi}]"),
            ValueDistribution::Power { k, hi } => write!(f, "power(k={k})[0,{hi}]"),
            ValueDistribution::TruncatedExponential { rate, hi } => {
                write!(f, "truncexp(rate={rate})[0,{hi}]")
            }
            ValueDistribution::Tabulated(t) => write!(f, "tabulated({} rows)", t.values.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn families() -> Vec<ValueDistribution> {
        vec![
            ValueDistribution::uniform(),
            ValueDistribution::power(2.0).unwrap(),
            ValueDistribution::power(0.7).unwrap(),
            ValueDistribution::truncated_exponential(4.0, 1.0).unwrap(),
            ValueDistribution::Tabulated(
                Tabulated::parse("0 0\n0.3 0.1\n0.6 0.5\n1 1\n").unwrap(),
            ),
        ]
    }

    #[test]
    fn virtual_value_uniform() {
        let d = ValueDistribution::uniform();
        assert_eq!(d.virtual_value(1.0).unwrap(), 1.0);
        assert!((d.virtual_value(0.75).unwrap() - 0.5).abs() < 1e-15);
        assert!(d.virtual_value(0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn virtual_value_matches_finite_difference_density() {
        // f recovered from F by central differences, independent of pdf().
        let d = ValueDistribution::uniform();
        let v = 0.75;
        let h = 1e-6;
        let f = (d.cdf(v + h) - d.cdf(v - h)) / (2.0 * h);
        let phi = v - (1.0 - d.cdf(v)) / f;
        assert!((phi - 0.5).abs() < 1e-8);
    }

    #[test]
    fn virtual_value_errors() {
        let d = ValueDistribution::uniform();
        assert!(matches!(d.virtual_value(1.5), Err(Error::OutOfSupport { .. })));
        let p = ValueDistribution::power(2.0).unwrap();
        assert_eq!(p.virtual_value(0.0), Err(Error::ZeroDensity(0.0)));
    }

    #[test]
    fn cdf_endpoints_and_density_integrates_to_one() {
        for d in families() {
            assert_eq!(d.cdf(d.support_lo()), 0.0, "{d}");
            assert_eq!(d.cdf(d.support_hi()), 1.0, "{d}");
            let mass = d.integrate(|v| d.pdf(v), 1e-10);
            assert!((mass - 1.0).abs() < 1e-8, "{d}: {mass}");
        }
    }

    #[test]
    fn partial_mean_matches_quadrature() {
        for d in families() {
            for &v in &[0.2, 0.55, 1.0] {
                let q = quadrature::integrate_knots(
                    |y| y * d.pdf(y),
                    &d.knots().into_iter().filter(|&k| k < v).chain([v]).collect::<Vec<_>>(),
                    1e-12,
                );
                assert!((d.partial_mean(v) - q).abs() < 1e-9, "{d} at {v}");
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for d in families() {
            for i in 0..=200 {
                let q = i as f64 / 200.0;
                assert!((d.cdf(d.quantile(q)) - q).abs() < 1e-8, "{d} at {q}");
            }
        }
    }

    #[test]
    fn expected_virtual_value_is_zero() {
        for d in families() {
            let m = d.integrate(|v| d.virtual_density(v), 1e-10);
            assert!(m.abs() < 1e-6, "{d}: {m}");
        }
    }

    #[test]
    fn regularity_of_builtins() {
        assert!(ValueDistribution::uniform().check_regularity(1001).regular);
        assert!(ValueDistribution::power(2.0).unwrap().check_regularity(1001).regular);
        assert!(ValueDistribution::truncated_exponential(4.0, 1.0)
            .unwrap()
            .check_regularity(1001)
            .regular);
    }

    #[test]
    fn irregular_mixture_is_reported() {
        // Bimodal: most mass near 0.1 and near 0.9 with a thin middle.
        let t = Tabulated::parse("0 0\n0.2 0.45\n0.8 0.55\n1 1\n").unwrap();
        let d = ValueDistribution::Tabulated(t);
        let report = d.check_regularity(101);
        assert!(!report.regular);
        let v = report.violation.unwrap();
        // φ jumps down where the density falls at 0.2.
        assert!((v.to - 0.2).abs() < 1e-9, "{v:?}");
        assert!(v.drop > 0.0);
    }

    #[test]
    fn table_validation() {
        assert!(Tabulated::parse("0 0\n0.5 0.5\n0.4 1\n").is_err());
        assert!(Tabulated::parse("0 0.1\n1 1\n").is_err());
        assert!(Tabulated::parse("0 0\n1 0.9\n").is_err());
        assert!(Tabulated::parse("0 0\nx 1\n").is_err());
    }
}
