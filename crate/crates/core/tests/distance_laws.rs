mod common;

use common::{setup, sphere};
use leocov::distributions::*;
use leocov::montecarlo::stats::{chi_square, ks_one_sample, Histogram};
use leocov::montecarlo::{empirical_distance_stats, ConstellationSampler, DeltaBin, SampleMode};
use leocov::quadrature::{integrate, Tolerance};
use leocov::special::factorial;

/// The K-th distance CCDF written out term by term with raw powers and
/// exponentials, no Poisson helpers and no telescoping.
fn literal_kth_ccdf(lp: f64, rmin: f64, rmax: f64, delta: f64, k: u32, rk: f64) -> f64 {
    let r0sq = (rmin / delta).powi(2);
    let mut v = 0.0;
    for j in 0..k {
        let inner = lp * (r0sq - rmin * rmin);
        let outer = lp * (rmax * rmax - r0sq);
        let mut tail = 0.0;
        for w in 0..(k - j) {
            tail += outer.powi(w as i32) / factorial(w);
        }
        v += inner.powi(j as i32) / factorial(j) * ((-inner).exp() - (-lp * (rmax * rmax - rmin * rmin)).exp() * tail);
    }
    let mut num = 0.0;
    for i in 0..k {
        let inner = lp * (rk * rk - rmin * rmin);
        let outer = lp * (rmax * rmax - rk * rk);
        let mut tail = 0.0;
        for t in 0..(k - i) {
            tail += outer.powi(t as i32) / factorial(t);
        }
        num += inner.powi(i as i32) / factorial(i) * ((-inner).exp() - (-lp * (rmax * rmax - rmin * rmin)).exp() * tail);
    }
    num / v
}

#[test]
fn kth_ccdf_matches_literal_sum() {
    for mu in [2.0, 5.0, 10.0] {
        let (_, ring) = setup(mu);
        for k in [1u32, 2, 3, 5] {
            for delta in [0.5, 0.8, 0.95] {
                let r0 = ring.r_min() / delta;
                for i in 0..40 {
                    let rk = r0 + (ring.r_max() - r0) * (i as f64 + 0.5) / 40.0;
                    let got = kth_ccdf_given_many(&ring, k, delta, rk).unwrap();
                    let want = literal_kth_ccdf(ring.lambda_pi(), ring.r_min(), ring.r_max(), delta, k, rk);
                    assert!(
                        (got - want).abs() <= 1e-10 * want.abs().max(1e-300) || (got - want).abs() < 1e-14,
                        "mu={mu} K={k} delta={delta} rk={rk}: {got} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn kth_pdf_is_minus_ccdf_slope_of_literal_form() {
    let (_, ring) = setup(5.0);
    let (lp, a, b) = (ring.lambda_pi(), ring.r_min(), ring.r_max());
    for k in [2u32, 3] {
        let delta = 0.7;
        for rk in [800.0, 1200.0, 1800.0, 2300.0] {
            let f = |r: f64| literal_kth_ccdf(lp, a, b, delta, k, r);
            let c = |h: f64| (f(rk - h) - f(rk + h)) / (2.0 * h);
            let fd = (4.0 * c(0.1) - c(0.2)) / 3.0;
            let pdf = kth_pdf_given_many(&ring, k, delta, rk).unwrap();
            assert!((fd - pdf).abs() <= 1e-6 * pdf, "K={k} rk={rk}: {fd} vs {pdf}");
        }
    }
}

fn sampler(mu: f64) -> ConstellationSampler {
    let (lambda, _) = setup(mu);
    ConstellationSampler::new(sphere(), lambda, SampleMode::Ring).unwrap()
}

fn hist(lo: f64, hi: f64, samples: &[f64]) -> Histogram {
    Histogram::uniform(lo, hi, 40).fill(samples)
}

#[test]
fn sampled_distances_follow_their_laws() {
    let k = 3;
    let delta0 = 0.6;
    let s = sampler(2.0);
    let ring = *s.ring();
    let bin = DeltaBin::new(0.7, 0.01).unwrap();
    let d = empirical_distance_stats(&s, k, delta0, bin, 400_000, 11).unwrap();
    assert!(d.nearest_few.len() >= 100_000, "{}", d.nearest_few.len());
    assert!(d.kth_many.len() >= 50_000, "{}", d.kth_many.len());

    let h = hist(ring.r_min(), ring.r_max(), &d.nearest_few);
    let c = chi_square(&h, |r| 1.0 - nearest_ccdf_given_few(&ring, k, r).unwrap());
    assert!(c.p_value > 0.01, "nearest given few: {c:?}");

    let h = hist(ring.r_min() / delta0, ring.r_max(), &d.kth_many);
    let c = chi_square(&h, |r| 1.0 - kth_ccdf_given_many(&ring, k, delta0, r).unwrap());
    assert!(c.p_value > 0.01, "K-th given many: {c:?}");

    let h = hist(ring.min_delta(), 1.0, &d.delta_many);
    let c = chi_square(&h, |x| delta_cdf(&ring, k, x).unwrap());
    assert!(c.p_value > 0.01, "relative distance: {c:?}");
}

#[test]
fn normalizer_is_an_event_frequency() {
    let s = sampler(5.0);
    let ring = *s.ring();
    for (k, delta0) in [(2u32, 0.5), (3, 0.8)] {
        let bin = DeltaBin::new(0.5, 0.01).unwrap();
        let n = 200_000u64;
        let d = empirical_distance_stats(&s, k, delta0, bin, n, 5).unwrap();
        let p = kth_normalizer(&ring, k, delta0).unwrap();
        let freq = d.kth_many.len() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * se, "K={k}: {freq} vs {p}");
        let many = d.counts.iter().filter(|&&c| c >= k).count() as f64 / n as f64;
        let want = count_probabilities(&ring, k).unwrap().p_geq_k;
        assert!((many - want).abs() < 4.0 * (want * (1.0 - want) / n as f64).sqrt());
    }
}

/// Given `delta = x`, the joint density of `(d_1, d_K)` restricted to
/// `d_1 = x d_K` leaves `d_K` with density proportional to
/// `r^(2K-1) exp(-lambda pi r^2)` on `[R_min / x, R_max]`. The sampled
/// bin conditioning reproduces that law, which differs from the
/// `d_K >= R_min / x` law used by the conditional coverage.
#[test]
fn kth_distance_inside_a_delta_bin() {
    let k = 2;
    let s = sampler(5.0);
    let ring = *s.ring();
    let x = 0.7;
    let bin = DeltaBin::new(x, 0.01).unwrap();
    let d = empirical_distance_stats(&s, k, x, bin, 1_500_000, 17).unwrap();
    assert!(d.kth_in_bin.len() > 20_000, "{}", d.kth_in_bin.len());

    let lp = ring.lambda_pi();
    let lo = ring.r_min() / x;
    let dens = |r: f64| r.powi(2 * k as i32 - 1) * (-lp * (r * r - lo * lo)).exp();
    let tol = Tolerance::new(1e-14, 1e-10);
    let z = integrate(dens, lo, ring.r_max(), tol).unwrap();
    let cdf = |r: f64| {
        if r <= lo {
            0.0
        } else {
            integrate(dens, lo, r.min(ring.r_max()), tol).unwrap() / z
        }
    };
    let ks = ks_one_sample(&d.kth_in_bin, cdf);
    assert!(ks.passes(), "{ks:?}");

    let naive = ks_one_sample(&d.kth_in_bin, |r| 1.0 - kth_ccdf_given_many(&ring, k, x, r).unwrap());
    assert!(!naive.passes(), "the two conditionings should be distinguishable: {naive:?}");
}

#[test]
fn single_satellite_reduction_pointwise() {
    for mu in [2.0, 5.0, 10.0] {
        let (_, ring) = setup(mu);
        for i in 0..100 {
            let r = ring.r_min() + (ring.r_max() - ring.r_min()) * i as f64 / 99.0;
            let a = kth_pdf_given_many(&ring, 1, 1.0, r).unwrap();
            let b = nearest_pdf_given_any(&ring, r);
            assert!((a - b).abs() <= 1e-12 * b.max(1e-300), "r={r}: {a} vs {b}");
        }
    }
}
