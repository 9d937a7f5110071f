//! Distance distributions of the ring process conditioned on the visible
//! count, and the distribution of the relative distance `delta = d_1 / d_K`.
//!
//! All densities are in km^-1 (km^-2 for the joint law) and vanish outside
//! their support. Sums are written as Poisson masses and tails so that no
//! term ever cancels against another.

use crate::error::{check_range, Error, Result};
use crate::geometry::RingGeometry;
use crate::special::{factorial, poisson_cdf, poisson_cdf_drop, poisson_pmf, poisson_range, poisson_sf};

pub const MAX_CLUSTER_SIZE: u32 = 64;

/// Cluster size `K` together with the relative distance `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterGeometry {
    k: u32,
    delta: f64,
}

impl ClusterGeometry {
    pub fn new(ring: &RingGeometry, k: u32, delta: f64) -> Result<Self> {
        check_k(k, 1)?;
        check_delta(ring, delta)?;
        Ok(Self { k, delta })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Probabilities of seeing no, between 1 and `K-1`, or at least `K`
/// satellites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountProbabilities {
    pub p_zero: f64,
    pub p_one_to_km1: f64,
    pub p_geq_k: f64,
}

pub(crate) fn check_k(k: u32, min: u32) -> Result<()> {
    if k < min || k > MAX_CLUSTER_SIZE {
        return Err(Error::invalid(
            "K",
            format!("cluster size must lie in {min}..={MAX_CLUSTER_SIZE}, got {k}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_delta(ring: &RingGeometry, delta: f64) -> Result<()> {
    check_range("delta", delta, ring.min_delta(), 1.0)
}

pub fn count_probabilities(ring: &RingGeometry, k: u32) -> Result<CountProbabilities> {
    check_k(k, 1)?;
    let mu = ring.mean_count();
    let p_zero = poisson_pmf(0, mu);
    let p_one_to_km1 = poisson_range(1, k as u64 - 1, mu);
    let p_geq_k = poisson_sf(k as u64, mu);
    Ok(CountProbabilities {
        p_zero,
        p_one_to_km1,
        p_geq_k,
    })
}

/// `P[d_1 > r1 | 1 <= N <= K-1]`.
pub fn nearest_ccdf_given_few(ring: &RingGeometry, k: u32, r1: f64) -> Result<f64> {
    check_k(k, 2)?;
    if r1 <= ring.r_min() {
        return Ok(1.0);
    }
    if r1 >= ring.r_max() {
        return Ok(0.0);
    }
    // given N = n the points are iid uniform in area
    let t = ring.mean_outside(r1) / ring.mean_count();
    let mu = ring.mean_count();
    let (mut num, mut den) = (0.0, 0.0);
    for n in 1..k as u64 {
        let p = poisson_pmf(n, mu);
        num += p * t.powi(n as i32);
        den += p;
    }
    Ok(num / den)
}

/// Density of `d_1` given `1 <= N <= K-1`.
pub fn nearest_pdf_given_few(ring: &RingGeometry, k: u32, r1: f64) -> Result<f64> {
    check_k(k, 2)?;
    if r1 < ring.r_min() || r1 > ring.r_max() {
        return Ok(0.0);
    }
    let mu = ring.mean_count();
    let t = ring.mean_outside(r1) / mu;
    let dt = 2.0 * r1 / (ring.r_max().powi(2) - ring.r_min().powi(2));
    let (mut num, mut den) = (0.0, 0.0);
    for n in 1..k as u64 {
        let p = poisson_pmf(n, mu);
        num += p * n as f64 * t.powi(n as i32 - 1);
        den += p;
    }
    Ok(num * dt / den)
}

/// `sum_{i<K} P[Pois(inner) = i] P[Pois(outer) >= K - i]`, i.e. the chance
/// that fewer than `K` points fall inside radius `r` but at least `K`
/// overall.
fn fewer_inside_at_least_total(k: u32, inner: f64, outer: f64) -> f64 {
    (0..k as u64)
        .map(|i| poisson_pmf(i, inner) * poisson_sf(k as u64 - i, outer))
        .sum()
}

/// `P[N >= K, d_K >= R_min / delta]`.
pub fn kth_normalizer(ring: &RingGeometry, k: u32, delta: f64) -> Result<f64> {
    check_k(k, 1)?;
    check_delta(ring, delta)?;
    let r0 = exclusion_radius(ring, delta);
    Ok(fewer_inside_at_least_total(k, ring.mean_inside(r0), ring.mean_outside(r0)))
}

fn exclusion_radius(ring: &RingGeometry, delta: f64) -> f64 {
    (ring.r_min() / delta).min(ring.r_max())
}

/// Density of `d_K` given `N >= K` and `d_K >= R_min / delta`.
///
/// `K = 1` is accepted: at `delta = 1` it is the nearest-distance density
/// given at least one visible satellite.
pub fn kth_pdf_given_many(ring: &RingGeometry, k: u32, delta: f64, rk: f64) -> Result<f64> {
    let v = kth_normalizer(ring, k, delta)?;
    let r0 = exclusion_radius(ring, delta);
    if rk < r0 || rk > ring.r_max() || v <= 0.0 {
        return Ok(0.0);
    }
    let a = ring.mean_inside(rk);
    Ok(2.0 * ring.lambda_pi() * rk * poisson_pmf(k as u64 - 1, a) / v)
}

/// `P[d_K > rk | N >= K, d_K >= R_min / delta]`.
pub fn kth_ccdf_given_many(ring: &RingGeometry, k: u32, delta: f64, rk: f64) -> Result<f64> {
    let v = kth_normalizer(ring, k, delta)?;
    let r0 = exclusion_radius(ring, delta);
    if rk <= r0 {
        return Ok(1.0);
    }
    if rk >= ring.r_max() || v <= 0.0 {
        return Ok(0.0);
    }
    let p = fewer_inside_at_least_total(k, ring.mean_inside(rk), ring.mean_outside(rk));
    Ok((p / v).min(1.0))
}

/// Nearest-distance density given at least one visible satellite, the
/// non-coordinated serving-distance law.
pub fn nearest_pdf_given_any(ring: &RingGeometry, r1: f64) -> f64 {
    if r1 < ring.r_min() || r1 > ring.r_max() {
        return 0.0;
    }
    let lp = ring.lambda_pi();
    2.0 * lp * (lp * ring.r_min().powi(2)).exp() * r1 * (-lp * r1 * r1).exp() / -(-ring.mean_count()).exp_m1()
}

/// Density of `delta` given `N >= K`.
pub fn delta_pdf(ring: &RingGeometry, k: u32, x: f64) -> Result<f64> {
    check_k(k, 2)?;
    if x < ring.min_delta() || x > 1.0 {
        return Ok(0.0);
    }
    let lp = ring.lambda_pi();
    let c = lp * ring.r_min().powi(2);
    let y1 = c / (x * x);
    let y2 = lp * ring.r_max().powi(2);
    let p_many = poisson_sf(k as u64, ring.mean_count());
    let shape = if k == 2 { 1.0 } else { (1.0 - x * x).powi(k as i32 - 2) };
    let drop = poisson_cdf_drop(k as u64, y1, y2);
    Ok(2.0 * (k - 1) as f64 * x * shape * c.exp() * drop / p_many)
}

/// `P[delta <= x | N >= K]`.
pub fn delta_cdf(ring: &RingGeometry, k: u32, x: f64) -> Result<f64> {
    check_k(k, 2)?;
    if x <= ring.min_delta() {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    // given N >= K and d_K = r, the K-1 inner points are iid uniform in area,
    // so P[delta <= x | d_K = r] = 1 - P[all inner points beyond x r]
    let lp = ring.lambda_pi();
    let rmin2 = ring.r_min().powi(2);
    let p_many = poisson_sf(k as u64, ring.mean_count());
    let km1 = k as i32 - 1;
    let integrand = |r: f64| -> f64 {
        let inner = r * r - rmin2;
        let keep = if x * r <= ring.r_min() {
            1.0
        } else {
            ((r * r - (x * r).powi(2)) / inner).powi(km1)
        };
        2.0 * lp * r * poisson_pmf(k as u64 - 1, lp * inner) * (1.0 - keep)
    };
    let tol = crate::quadrature::Tolerance::new(1e-14, 1e-12);
    let split = (ring.r_min() / x).min(ring.r_max());
    let v = crate::quadrature::integrate(integrand, split, ring.r_max(), tol)?;
    Ok((v / p_many).clamp(0.0, 1.0))
}

/// Joint density of `(d_1, d_K)` given `N >= K`.
pub fn joint_pdf_d1_dk(ring: &RingGeometry, k: u32, r1: f64, rk: f64) -> Result<f64> {
    check_k(k, 2)?;
    if r1 < ring.r_min() || rk < r1 || rk > ring.r_max() {
        return Ok(0.0);
    }
    let lp = ring.lambda_pi();
    let p_many = poisson_sf(k as u64, ring.mean_count());
    let gap = if k == 2 { 1.0 } else { (rk * rk - r1 * r1).powi(k as i32 - 2) };
    let log_scale = k as f64 * lp.ln() - lp * (rk * rk - ring.r_min().powi(2));
    Ok(4.0 * r1 * rk * gap * log_scale.exp() / (factorial(k - 2) * p_many))
}

/// `P[N = n]` on the whole annulus, exposed for the baseline branch.
pub fn visible_count_pmf(ring: &RingGeometry, n: u64) -> f64 {
    poisson_pmf(n, ring.mean_count())
}

/// `P[N <= n]` on the whole annulus.
pub fn visible_count_cdf(ring: &RingGeometry, n: u64) -> f64 {
    poisson_cdf(n, ring.mean_count())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::{density_for_mean_visible, to_ring, SphereGeometry};
    use crate::quadrature::{integrate, Integrator, Tolerance};
    use proptest::prelude::*;

    pub(crate) fn ring_with_mean(mu: f64) -> RingGeometry {
        let g = SphereGeometry::with_altitude(500.0, 0.0).unwrap();
        to_ring(&g, density_for_mean_visible(&g, mu)).unwrap()
    }

    const NORM: Tolerance = Tolerance::new(1e-13, 1e-11);

    #[test]
    fn count_probabilities_at_mean_five() {
        let ring = ring_with_mean(5.0);
        let p = count_probabilities(&ring, 2).unwrap();
        assert!((p.p_zero - 6.7379e-3).abs() < 1e-7);
        assert!((p.p_one_to_km1 - 3.3690e-2).abs() < 1e-6);
        assert!((p.p_zero + p.p_one_to_km1 + p.p_geq_k - 1.0).abs() < 1e-12);
        let one = count_probabilities(&ring, 1).unwrap();
        assert_eq!(one.p_one_to_km1, 0.0);
        assert!(count_probabilities(&ring, 0).is_err());
        assert!(count_probabilities(&ring, 65).is_err());
    }

    #[test]
    fn nearest_given_one_is_area_uniform() {
        let ring = ring_with_mean(5.0);
        let span = ring.r_max().powi(2) - ring.r_min().powi(2);
        for r in [500.0, 900.0, 1700.0, ring.r_max()] {
            let f = nearest_pdf_given_few(&ring, 2, r).unwrap();
            assert!((f - 2.0 * r / span).abs() < 1e-15);
        }
        assert_eq!(nearest_pdf_given_few(&ring, 2, 499.0).unwrap(), 0.0);
        assert_eq!(nearest_pdf_given_few(&ring, 2, 2600.0).unwrap(), 0.0);
        assert!(nearest_pdf_given_few(&ring, 1, 600.0).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        for mu in [2.0, 5.0, 10.0] {
            let ring = ring_with_mean(mu);
            let (lo, hi) = (ring.r_min(), ring.r_max());
            for k in [2u32, 3, 5] {
                let few = integrate(|r| nearest_pdf_given_few(&ring, k, r).unwrap(), lo, hi, NORM).unwrap();
                assert!((few - 1.0).abs() < 1e-9, "nearest K={k} mu={mu}: {few}");
                let d = integrate(|x| delta_pdf(&ring, k, x).unwrap(), ring.min_delta(), 1.0, NORM).unwrap();
                assert!((d - 1.0).abs() < 1e-9, "delta K={k} mu={mu}: {d}");
                for delta in [0.5, 0.8, 0.95] {
                    let r0 = lo / delta;
                    let f = integrate(|r| kth_pdf_given_many(&ring, k, delta, r).unwrap(), r0, hi, NORM).unwrap();
                    assert!((f - 1.0).abs() < 1e-9, "kth K={k} mu={mu} delta={delta}: {f}");
                }
            }
        }
    }

    #[test]
    fn joint_density_integrates_to_one() {
        for mu in [5.0, 10.0] {
            let ring = ring_with_mean(mu);
            for k in [2u32, 4] {
                let outer = Integrator::new(NORM)
                    .integrate(
                        |rk| {
                            let inner = integrate(|r1| joint_pdf_d1_dk(&ring, k, r1, rk).unwrap(), ring.r_min(), rk, NORM)?;
                            Ok(inner)
                        },
                        ring.r_min(),
                        ring.r_max(),
                    )
                    .unwrap();
                assert!((outer - 1.0).abs() < 1e-9, "K={k} mu={mu}: {outer}");
            }
        }
        let ring = ring_with_mean(5.0);
        assert_eq!(joint_pdf_d1_dk(&ring, 3, 900.0, 800.0).unwrap(), 0.0);
    }

    #[test]
    fn joint_density_reproduces_delta_density() {
        // d/dx P[d_1 <= x d_K] from the joint law
        let ring = ring_with_mean(5.0);
        let k = 3;
        let cdf = |x: f64| -> f64 {
            integrate(
                |rk| {
                    let hi = (x * rk).min(rk);
                    if hi <= ring.r_min() {
                        return 0.0;
                    }
                    integrate(|r1| joint_pdf_d1_dk(&ring, k, r1, rk).unwrap(), ring.r_min(), hi, NORM).unwrap()
                },
                ring.r_min(),
                ring.r_max(),
                NORM,
            )
            .unwrap()
        };
        for i in 0..20 {
            let x = 0.25 + 0.035 * i as f64;
            let h = 1e-4;
            let fd = (cdf(x + h) - cdf(x - h)) / (2.0 * h);
            let want = delta_pdf(&ring, k, x).unwrap();
            assert!((fd - want).abs() < 1e-5 * want.max(1.0), "x={x}: {fd} vs {want}");
            let c = delta_cdf(&ring, k, x).unwrap();
            assert!((c - cdf(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn kth_reduces_to_nearest_given_any() {
        let ring = ring_with_mean(5.0);
        for i in 0..=100 {
            let r = ring.r_min() + (ring.r_max() - ring.r_min()) * i as f64 / 100.0;
            let a = kth_pdf_given_many(&ring, 1, 1.0, r).unwrap();
            let b = nearest_pdf_given_any(&ring, r);
            assert!((a - b).abs() <= 1e-12, "r={r}");
        }
    }

    #[test]
    fn normalizer_limits() {
        for mu in [2.0, 5.0, 10.0] {
            let ring = ring_with_mean(mu);
            for k in [1u32, 2, 3, 5] {
                let full = kth_normalizer(&ring, k, 1.0).unwrap();
                let p = count_probabilities(&ring, k).unwrap();
                assert!((full - p.p_geq_k).abs() < 1e-14);
                let mut prev = full;
                for delta in [0.9, 0.7, 0.5, 0.3, ring.min_delta()] {
                    let v = kth_normalizer(&ring, k, delta).unwrap();
                    assert!(v <= prev + 1e-15 && v >= 0.0);
                    prev = v;
                }
                // exclusion radius at R_max: all K must sit on the rim
                assert!(kth_normalizer(&ring, k, ring.min_delta()).unwrap() < 1e-12);
            }
        }
        let ring = ring_with_mean(5.0);
        assert!(kth_normalizer(&ring, 2, 0.1).is_err());
        assert!(kth_normalizer(&ring, 2, 1.01).is_err());
    }

    #[test]
    fn kth_ccdf_endpoints_and_derivative() {
        let ring = ring_with_mean(5.0);
        for k in [2u32, 3, 5] {
            for delta in [0.5, 0.8, 0.95] {
                let r0 = ring.r_min() / delta;
                assert_eq!(kth_ccdf_given_many(&ring, k, delta, r0).unwrap(), 1.0);
                assert_eq!(kth_ccdf_given_many(&ring, k, delta, ring.r_max()).unwrap(), 0.0);
                for i in 1..=50 {
                    let r = r0 + (ring.r_max() - r0) * i as f64 / 51.0;
                    let ccdf = |t: f64| kth_ccdf_given_many(&ring, k, delta, t).unwrap();
                    let central = |h: f64| -(ccdf(r + h) - ccdf(r - h)) / (2.0 * h);
                    let fd = (4.0 * central(0.1) - central(0.2)) / 3.0;
                    let f = kth_pdf_given_many(&ring, k, delta, r).unwrap();
                    assert!((fd - f).abs() <= 1e-5 * f, "K={k} delta={delta} r={r}: {fd} vs {f}");
                    let tail = integrate(|t| kth_pdf_given_many(&ring, k, delta, t).unwrap(), r, ring.r_max(), NORM).unwrap();
                    let c = kth_ccdf_given_many(&ring, k, delta, r).unwrap();
                    assert!((tail - c).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn nearest_ccdf_matches_density() {
        let ring = ring_with_mean(10.0);
        for k in [2u32, 3, 5] {
            for i in 1..20 {
                let r = ring.r_min() + (ring.r_max() - ring.r_min()) * i as f64 / 20.0;
                let tail = integrate(|t| nearest_pdf_given_few(&ring, k, t).unwrap(), r, ring.r_max(), NORM).unwrap();
                assert!((tail - nearest_ccdf_given_few(&ring, k, r).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn delta_density_shape() {
        let ring = ring_with_mean(5.0);
        assert_eq!(delta_pdf(&ring, 2, 0.1).unwrap(), 0.0);
        assert_eq!(delta_pdf(&ring, 2, 1.1).unwrap(), 0.0);
        for x in [0.3, 0.5, 0.9, 0.999] {
            assert!(delta_pdf(&ring, 2, x).unwrap() > 0.0);
        }
        // the (1 - x^2)^(K-2) factor kills the top endpoint for K >= 3
        assert_eq!(delta_pdf(&ring, 3, 1.0).unwrap(), 0.0);
        assert!(delta_pdf(&ring, 1, 0.5).is_err());
    }

    #[test]
    fn large_mean_stays_finite() {
        let ring = ring_with_mean(60.0);
        let p = count_probabilities(&ring, 64).unwrap();
        assert!((p.p_zero + p.p_one_to_km1 + p.p_geq_k - 1.0).abs() < 1e-12);
        let f = integrate(|x| delta_pdf(&ring, 40, x).unwrap(), ring.min_delta(), 1.0, NORM).unwrap();
        assert!((f - 1.0).abs() < 1e-8, "{f}");
    }

    proptest! {
        #[test]
        fn densities_are_nonnegative(mu in 0.5f64..30.0, k in 2u32..8, delta in 0.2f64..1.0, u in 0f64..1.0) {
            let ring = ring_with_mean(mu);
            let delta = delta.max(ring.min_delta());
            let r = ring.r_min() + u * (ring.r_max() - ring.r_min());
            prop_assert!(nearest_pdf_given_few(&ring, k, r).unwrap() >= 0.0);
            prop_assert!(kth_pdf_given_many(&ring, k, delta, r).unwrap() >= 0.0);
            prop_assert!(delta_pdf(&ring, k, delta).unwrap() >= 0.0);
            let c = kth_ccdf_given_many(&ring, k, delta, r).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
        }

        #[test]
        fn count_masses_sum_to_one(mu in 0.01f64..80.0, k in 1u32..=64) {
            let ring = ring_with_mean(mu);
            let p = count_probabilities(&ring, k).unwrap();
            prop_assert!((p.p_zero + p.p_one_to_km1 + p.p_geq_k - 1.0).abs() < 1e-12);
        }
    }
}
