//! Sample mean and standard error accumulation.

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    /// Number of independent samples behind the estimate (pairs count once
    /// under antithetic sampling).
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { mean: value, se: 0.0, samples: 0 }
    }

    /// `|self - other| <= k (se_self + se_other) + slack`
    pub fn agrees_with(&self, other: &Estimate, k: f64, slack: f64) -> bool {
        (self.mean - other.mean).abs() <= k * (self.se + other.se) + slack
    }
}

/// Mergeable running mean / variance (pairwise update).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n > 1 { (self.m2 / (self.n as f64 - 1.0) / self.n as f64).sqrt() } else { 0.0 };
        Estimate { mean: self.mean, se, samples: self.n }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let all: Accumulator = xs.iter().copied().collect();
        let mut left: Accumulator = xs[..333].iter().copied().collect();
        let right: Accumulator = xs[333..].iter().copied().collect();
        left.merge(&right);
        let (a, b) = (all.estimate(), left.estimate());
        assert_eq!(a.samples, b.samples);
        assert!((a.mean - b.mean).abs() < 1e-12);
        assert!((a.se - b.se).abs() < 1e-12);
    }

    #[test]
    fn constant_sample_has_zero_se() {
        let acc: Accumulator = std::iter::repeat_n(2.5, 10).collect();
        let e = acc.estimate();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.se, 0.0);
    }
}
