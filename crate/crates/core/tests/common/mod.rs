#![allow(dead_code)]

use leocov::geometry::{density_for_mean_visible, to_ring, RingGeometry, SphereGeometry};
use leocov::interference::{LinkBudget, RadioParams};
use leocov::special::FadingParams;

pub fn sphere() -> SphereGeometry {
    SphereGeometry::with_altitude(500.0, 0.0).unwrap()
}

/// Density (per km^2 of the orbit shell) and annulus with `mu` visible satellites on average.
pub fn setup(mu: f64) -> (f64, RingGeometry) {
    let g = sphere();
    let lambda = density_for_mean_visible(&g, mu);
    (lambda, to_ring(&g, lambda).unwrap())
}

pub fn heavy() -> FadingParams {
    FadingParams::new(1, 0.063, 8.97e-4).unwrap()
}

pub fn light() -> FadingParams {
    FadingParams::new(10, 0.126, 0.835).unwrap()
}

pub fn budget(n_t: u32, k: u32) -> LinkBudget {
    RadioParams::default().budget(n_t, k).unwrap()
}

pub fn db_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}
