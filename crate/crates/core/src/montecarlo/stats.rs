//! Goodness-of-fit helpers for checking simulated samples against analytic
//! laws.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Asymptotic Kolmogorov–Smirnov coefficient at the 1% level.
pub const KS_COEFF_1PCT: f64 = 1.628;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
}

impl KsResult {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical
    }
}

/// Two-sample KS test at the 1% level.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    KsResult {
        statistic: d,
        critical: KS_COEFF_1PCT * ((n + m) / (n * m)).sqrt(),
    }
}

/// One-sample KS test against a continuous CDF at the 1% level.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut s = samples.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    KsResult {
        statistic: d,
        critical: KS_COEFF_1PCT / n.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Samples outside the edges.
    pub outside: u64,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        let edges = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        Self {
            edges,
            counts: vec![0; bins],
            outside: 0,
        }
    }

    pub fn fill(mut self, samples: &[f64]) -> Self {
        let lo = self.edges[0];
        let hi = *self.edges.last().expect("at least one edge");
        for &x in samples {
            if !(x >= lo && x <= hi) {
                self.outside += 1;
                continue;
            }
            let i = self.edges.partition_point(|&e| e <= x).saturating_sub(1);
            let last = self.counts.len() - 1;
            self.counts[i.min(last)] += 1;
        }
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.outside
    }

    /// Empirical density per bin.
    pub fn density(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, w)| if n > 0.0 { c as f64 / (n * (w[1] - w[0])) } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson test of a histogram against a CDF, merging neighbouring bins
/// until every expected count reaches 5.
pub fn chi_square<F: Fn(f64) -> f64>(hist: &Histogram, cdf: F) -> ChiSquare {
    let n = hist.counts.iter().sum::<u64>() as f64;
    let lo = cdf(hist.edges[0]);
    let hi = cdf(*hist.edges.last().expect("at least one edge"));
    let mass = hi - lo;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (i, &c) in hist.counts.iter().enumerate() {
        obs += c as f64;
        exp += n * (cdf(hist.edges[i + 1]) - cdf(hist.edges[i])) / mass;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1).max(1);
    let p_value = ChiSquared::new(dof as f64).map(|d| 1.0 - d.cdf(statistic)).unwrap_or(f64::NAN);
    ChiSquare {
        statistic,
        dof,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn ks_accepts_same_law_and_rejects_shift() {
        let a = uniform(20_000, 1);
        let b = uniform(20_000, 2);
        assert!(ks_two_sample(&a, &b).passes());
        let c: Vec<f64> = b.iter().map(|x| x * 0.95).collect();
        assert!(!ks_two_sample(&a, &c).passes());
        assert!(ks_one_sample(&a, |x| x.clamp(0.0, 1.0)).passes());
        assert!(!ks_one_sample(&a, |x| (x * x).clamp(0.0, 1.0)).passes());
    }

    #[test]
    fn ks_statistic_by_hand() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[2.5, 3.5]);
        assert!((r.statistic - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::uniform(0.0, 1.0, 10).fill(&[0.0, 0.05, 0.95, 1.0, 1.5, -0.1]);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[9], 2);
        assert_eq!(h.outside, 2);
        assert_eq!(h.total(), 6);
        let u = Histogram::uniform(0.0, 1.0, 4).fill(&uniform(40_000, 3));
        let d = u.density();
        assert!(d.iter().all(|&x| (x - 1.0).abs() < 0.05));
    }

    #[test]
    fn chi_square_calibration() {
        let h = Histogram::uniform(0.0, 1.0, 40).fill(&uniform(100_000, 4));
        let good = chi_square(&h, |x| x);
        assert_eq!(good.dof, 39);
        assert!(good.p_value > 0.01);
        let bad = chi_square(&h, |x| x.powf(1.05));
        assert!(bad.p_value < 1e-6);
    }

    #[test]
    fn chi_square_merges_sparse_bins() {
        let h = Histogram {
            edges: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            counts: vec![2, 3, 1, 2],
            outside: 0,
        };
        let r = chi_square(&h, |x| x);
        assert!(r.dof >= 1);
        assert!(r.p_value > 0.01);
    }
}
