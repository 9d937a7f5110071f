//! Laplace transform of out-of-cluster interference plus normalised noise,
//! and its derivatives.
//!
//! With `X = I + sigma_bar^2`, write `L(s) = E[exp(-s X)] = exp(g(s))` and
//! `kappa_j = (-1)^j g^(j)(s) >= 0`. The moments `M_v = E[X^v exp(-s X)]`
//! then follow from `M_n = sum_j C(n-1, j) kappa_{j+1} M_{n-1-j}`.

use crate::error::{check_range, Error, Result};
use crate::geometry::RingGeometry;
use crate::quadrature::{Integrator, Tolerance};
use crate::special::{binomial, pochhammer, FadingParams};
use crate::units::{db_to_linear, dbm_to_watts, free_space_constant_db, km_to_m};

pub const LAPLACE_TOL: Tolerance = Tolerance::new(0.0, 1e-9);

/// Powers and gains of one link, all linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    tx_power: f64,
    noise_power: f64,
    serving_gain: f64,
    gbar: f64,
    alpha: f64,
}

impl LinkBudget {
    pub fn new(tx_power: f64, noise_power: f64, serving_gain: f64, gbar: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("tx_power", tx_power), ("noise_power", noise_power), ("serving_gain", serving_gain)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        check_range("gbar", gbar, 0.0, 1.0)?;
        if !(alpha >= 2.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("path-loss exponent must be >= 2, got {alpha}")));
        }
        Ok(Self {
            tx_power,
            noise_power,
            serving_gain,
            gbar,
            alpha,
        })
    }

    /// Builds the budget from radio parameters in dB units; the noise power
    /// is the PSD integrated over the bandwidth.
    pub fn from_radio(
        tx_power_dbm: f64,
        noise_psd_dbm_hz: f64,
        bandwidth_hz: f64,
        serving_gain_db: f64,
        gbar: f64,
        alpha: f64,
    ) -> Result<Self> {
        if !(bandwidth_hz > 0.0) {
            return Err(Error::invalid("bandwidth_hz", format!("must be positive, got {bandwidth_hz}")));
        }
        Self::new(
            dbm_to_watts(tx_power_dbm),
            dbm_to_watts(noise_psd_dbm_hz) * bandwidth_hz,
            db_to_linear(serving_gain_db),
            gbar,
            alpha,
        )
    }

    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn serving_gain(&self) -> f64 {
        self.serving_gain
    }

    pub fn gbar(&self) -> f64 {
        self.gbar
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `sigma^2 / (P G_1)`.
    pub fn noise_normalized(&self) -> f64 {
        self.noise_power / (self.tx_power * self.serving_gain)
    }

    pub fn with_gbar(mut self, gbar: f64) -> Result<Self> {
        check_range("gbar", gbar, 0.0, 1.0)?;
        self.gbar = gbar;
        Ok(self)
    }

    pub fn with_noise_power(self, noise_power: f64) -> Result<Self> {
        Self::new(self.tx_power, noise_power, self.serving_gain, self.gbar, self.alpha)
    }

    /// Path loss `d^-alpha` for a distance given in km.
    #[inline]
    pub fn path_loss(&self, km: f64) -> f64 {
        let m = km_to_m(km);
        if self.alpha == 2.0 {
            1.0 / (m * m)
        } else {
            m.powf(-self.alpha)
        }
    }
}

/// Radio parameters in engineering units, from which a [`LinkBudget`] is
/// assembled for each `(N_t, K)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub g0_dbi: f64,
    /// Receive main-lobe gain; `None` uses a matched array, `G0 + 10 log10(N_t)`.
    pub grx_main_dbi: Option<f64>,
    pub carrier_hz: f64,
    pub gbar: f64,
    pub alpha: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            tx_power_dbm: 43.0,
            noise_psd_dbm_hz: -174.0,
            bandwidth_hz: 100e6,
            g0_dbi: 20.0,
            grx_main_dbi: None,
            carrier_hz: 13.5e9,
            gbar: 0.1,
            alpha: 2.0,
        }
    }
}

impl RadioParams {
    pub fn grx_main_dbi(&self, n_t: u32) -> f64 {
        self.grx_main_dbi
            .unwrap_or(self.g0_dbi + 10.0 * (n_t as f64).log10())
    }

    pub fn budget(&self, n_t: u32, k: u32) -> Result<LinkBudget> {
        if !(self.carrier_hz > 0.0) {
            return Err(Error::invalid("carrier_hz", format!("must be positive, got {}", self.carrier_hz)));
        }
        let g1 = serving_gain_db(self.g0_dbi, n_t, k, self.grx_main_dbi(n_t), self.carrier_hz)?;
        LinkBudget::from_radio(
            self.tx_power_dbm,
            self.noise_psd_dbm_hz,
            self.bandwidth_hz,
            g1,
            self.gbar,
            self.alpha,
        )
    }
}

/// Main-lobe transmit gain after spending `K - 1` degrees of freedom on nulls.
pub fn beamforming_gain_db(g0_dbi: f64, n_t: u32, k: u32) -> Result<f64> {
    if k == 0 || k > n_t {
        return Err(Error::invalid(
            "K",
            format!("cluster size must lie in 1..=N_t = {n_t} to null K - 1 interferers, got {k}"),
        ));
    }
    Ok(g0_dbi + 10.0 * ((n_t - k + 1) as f64).log10())
}

/// Serving-link gain `G_1` in dB including the free-space constant.
pub fn serving_gain_db(g0_dbi: f64, n_t: u32, k: u32, grx_main_dbi: f64, carrier_hz: f64) -> Result<f64> {
    Ok(beamforming_gain_db(g0_dbi, n_t, k)? + grx_main_dbi + free_space_constant_db(carrier_hz))
}

/// Radial integrals behind `g(s)` and its derivatives for a batch of `s`.
///
/// Component `i * (order + 1) + j` of the result holds, for `s_values[i]`,
/// `int_{rk}^{R_max} T_j(v) v dv` where `T_0 = 1 - E[exp(-s a H)]` and
/// `T_j = sum_z w_z (z+1)_j (scale u)^j q^(z+1)`.
fn radial_integrals(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    s_values: &[f64],
    order: usize,
    rk: f64,
    scale: f64,
) -> Result<Vec<f64>> {
    let dim = s_values.len() * (order + 1);
    if rk >= ring.r_max() || budget.gbar() == 0.0 {
        return Ok(vec![0.0; dim]);
    }
    let w = fading.weights();
    let rate = fading.rate();
    let rising: Vec<Vec<f64>> = (0..w.len())
        .map(|z| (0..=order).map(|j| pochhammer(z as f64 + 1.0, j as u32)).collect())
        .collect();
    let integrand = |v: f64, out: &mut [f64]| {
        let a = budget.gbar() * budget.path_loss(v);
        for (i, &s) in s_values.iter().enumerate() {
            let den = rate + s * a;
            let log_q = (-(s * a) / den).ln_1p();
            let u = scale * a / den;
            let slot = &mut out[i * (order + 1)..(i + 1) * (order + 1)];
            slot.iter_mut().for_each(|x| *x = 0.0);
            for (z, &wz) in w.iter().enumerate() {
                let zf = (z + 1) as f64;
                slot[0] -= wz * (zf * log_q).exp_m1();
                if order > 0 {
                    let qz = (zf * log_q).exp();
                    let mut uj = 1.0;
                    for j in 1..=order {
                        uj *= u;
                        slot[j] += wz * rising[z][j] * uj * qz;
                    }
                }
            }
            slot.iter_mut().for_each(|x| *x *= v);
        }
        Ok(())
    };
    Ok(Integrator::new(LAPLACE_TOL).integrate_vec(integrand, rk, ring.r_max(), dim)?)
}

fn check_args(ring: &RingGeometry, s: f64, rk: f64) -> Result<()> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::invalid("s", format!("must be finite and >= 0, got {s}")));
    }
    check_range("rK", rk, ring.r_min(), ring.r_max())
}

/// `g(s)` together with `kappa_1..=kappa_order`.
fn exponent_terms(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    order: usize,
    s: f64,
    rk: f64,
    scale: f64,
) -> Result<(f64, Vec<f64>)> {
    check_args(ring, s, rk)?;
    let ints = radial_integrals(ring, budget, fading, &[s], order, rk, scale)?;
    let two_pi_lambda = 2.0 * std::f64::consts::PI * ring.density();
    let noise = budget.noise_normalized();
    let g = -s * noise - two_pi_lambda * ints[0];
    let kappa = (1..=order)
        .map(|j| if j == 1 { scale * noise } else { 0.0 } + two_pi_lambda * ints[j])
        .collect();
    Ok((g, kappa))
}

/// Exponent `g(s)` with `L(s) = exp(g(s))`.
pub fn laplace_exponent(ring: &RingGeometry, budget: &LinkBudget, fading: &FadingParams, s: f64, rk: f64) -> Result<f64> {
    Ok(exponent_terms(ring, budget, fading, 0, s, rk, 1.0)?.0)
}

/// `g(s), g'(s), ..., g^(order)(s)`.
pub fn laplace_exponent_derivatives(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    order: usize,
    s: f64,
    rk: f64,
) -> Result<Vec<f64>> {
    let (g, kappa) = exponent_terms(ring, budget, fading, order, s, rk, 1.0)?;
    let mut out = vec![g];
    out.extend(kappa.iter().enumerate().map(|(i, k)| if i % 2 == 0 { -k } else { *k }));
    Ok(out)
}

/// `M_v = E[X^v exp(-s X)] = (-1)^v L^(v)(s)` for `v = 0..=order`.
pub fn laplace_moments(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    order: usize,
    s: f64,
    rk: f64,
) -> Result<Vec<f64>> {
    laplace_moments_scaled(ring, budget, fading, order, s, rk, 1.0)
}

/// `scale^v M_v`. High orders of `M_v` alone leave the floating-point range
/// long before the products `s^v M_v` that coverage needs do.
pub fn laplace_moments_scaled(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    order: usize,
    s: f64,
    rk: f64,
    scale: f64,
) -> Result<Vec<f64>> {
    let (g, kappa) = exponent_terms(ring, budget, fading, order, s, rk, scale)?;
    let mut m = Vec::with_capacity(order + 1);
    m.push(g.exp());
    for n in 1..=order {
        let mut acc = 0.0;
        for j in 0..n {
            acc += binomial(n as u32 - 1, j as u32) * kappa[j] * m[n - 1 - j];
        }
        m.push(acc);
    }
    Ok(m)
}

/// `L(s) = E[exp(-s (I + sigma_bar^2))]` given the interferers lie beyond `rk`.
pub fn laplace(ring: &RingGeometry, budget: &LinkBudget, fading: &FadingParams, s: f64, rk: f64) -> Result<f64> {
    Ok(laplace_moments(ring, budget, fading, 0, s, rk)?[0])
}

/// `L(s_i)` for several arguments sharing one radial quadrature.
pub fn laplace_batch(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    s_values: &[f64],
    rk: f64,
) -> Result<Vec<f64>> {
    for &s in s_values {
        check_args(ring, s, rk)?;
    }
    let ints = radial_integrals(ring, budget, fading, s_values, 0, rk, 1.0)?;
    let two_pi_lambda = 2.0 * std::f64::consts::PI * ring.density();
    let noise = budget.noise_normalized();
    Ok(s_values
        .iter()
        .zip(&ints)
        .map(|(&s, &i0)| (-s * noise - two_pi_lambda * i0).exp())
        .collect())
}

/// `L^(v)(s)`, the signed `v`-th derivative, for `v < m`.
pub fn laplace_derivative(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    v: u32,
    s: f64,
    rk: f64,
) -> Result<f64> {
    if v >= fading.m() {
        return Err(Error::invalid(
            "v",
            format!("derivative order must be below m = {}, got {v}", fading.m()),
        ));
    }
    let m = laplace_moments(ring, budget, fading, v as usize, s, rk)?;
    let sign = if v % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * m[v as usize])
}
