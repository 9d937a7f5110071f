//! Special functions and the shadowed-Rician fading coefficients.
//!
//! For integer Nakagami `m` the channel power `H` of a shadowed-Rician link
//! has density `sum_z zeta(z) h^z exp(-(beta - c) h)`, i.e. a finite mixture
//! of Erlang laws with shapes `1..=m` and a common rate `beta - c`. Every
//! fading quantity in the crate is derived from that mixture.

use crate::error::{Error, Result};

pub const MAX_NAKAGAMI_M: u32 = 20;

const SERIES_MAX_TERMS: usize = 10_000;

/// Rising factorial `x (x+1) ... (x+z-1)`; `(x)_0 = 1`.
pub fn pochhammer(x: f64, z: u32) -> f64 {
    (0..z).fold(1.0, |acc, k| acc * (x + k as f64))
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn ln_factorial(n: u64) -> f64 {
    if n < 171 {
        factorial(n as u32).ln()
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Upper incomplete gamma `Gamma(a, x)` for integer `a >= 1`, from the
/// finite sum `(a-1)! e^{-x} sum_{v<a} x^v / v!`.
pub fn upper_incomplete_gamma(a: u32, x: f64) -> Result<f64> {
    if a == 0 {
        return Err(Error::invalid("a", "incomplete gamma needs an integer a >= 1"));
    }
    if !(x >= 0.0) {
        return Err(Error::invalid("x", format!("must be >= 0, got {x}")));
    }
    Ok(factorial(a - 1) * poisson_cdf(a as u64 - 1, x))
}

/// Regularised upper incomplete gamma `Q(a, x) = Gamma(a, x) / (a-1)!` for
/// integer `a`, which equals `P[Poisson(x) <= a - 1]`.
pub fn regularized_upper_gamma(a: u32, x: f64) -> f64 {
    poisson_cdf(a as u64 - 1, x)
}

/// `P[N = n]` for `N ~ Poisson(mu)`.
pub fn poisson_pmf(n: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if mu <= 30.0 && n <= 170 {
        let mut term = (-mu).exp();
        for k in 1..=n {
            term *= mu / k as f64;
        }
        term
    } else {
        (n as f64 * mu.ln() - mu - ln_factorial(n)).exp()
    }
}

/// `P[N <= n]` for `N ~ Poisson(mu)`.
pub fn poisson_cdf(n: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return 1.0;
    }
    if (n as f64) < mu {
        // lower tail is the small side
        let mut term = poisson_pmf(0, mu);
        if term == 0.0 {
            return pmf_sum(0, n, mu);
        }
        let mut sum = term;
        for k in 1..=n {
            term *= mu / k as f64;
            sum += term;
        }
        sum.min(1.0)
    } else {
        1.0 - poisson_sf(n + 1, mu)
    }
}

/// `P[N >= n]` for `N ~ Poisson(mu)`, summed from the small side so that
/// tiny upper tails keep full relative precision.
pub fn poisson_sf(n: u64, mu: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if mu == 0.0 {
        return 0.0;
    }
    if (n as f64) > mu {
        let mut term = poisson_pmf(n, mu);
        let mut sum = term;
        let mut k = n;
        loop {
            k += 1;
            term *= mu / k as f64;
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        sum.min(1.0)
    } else {
        (1.0 - pmf_sum(0, n - 1, mu)).max(0.0)
    }
}

fn pmf_sum(lo: u64, hi: u64, mu: f64) -> f64 {
    (lo..=hi).map(|k| poisson_pmf(k, mu)).sum()
}

/// `P[a <= N <= b]`, `N ~ Poisson(mu)`.
pub fn poisson_range(a: u64, b: u64, mu: f64) -> f64 {
    if a > b {
        return 0.0;
    }
    pmf_sum(a, b, mu)
}

/// `P[lo_mu-process <= n-1] - P[hi_mu-process <= n-1]` for `lo_mu <= hi_mu`,
/// i.e. `P[lo_mu < Gamma(n, 1) <= hi_mu]`, evaluated on whichever tail
/// avoids cancellation.
pub fn poisson_cdf_drop(n: u64, lo_mu: f64, hi_mu: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let lower_lo = poisson_cdf(n - 1, lo_mu);
    if lower_lo <= 0.5 {
        (lower_lo - poisson_cdf(n - 1, hi_mu)).max(0.0)
    } else {
        (poisson_sf(n, hi_mu) - poisson_sf(n, lo_mu)).max(0.0)
    }
}

/// Confluent hypergeometric function `1F1(a; b; x)` by its power series.
pub fn confluent_1f1(a: f64, b: f64, x: f64) -> Result<f64> {
    if b <= 0.0 && b.fract() == 0.0 {
        return Err(Error::invalid("b", "1F1 is undefined for non-positive integer b"));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) * x / ((b + kf) * (kf + 1.0));
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        if term.abs() <= 1e-16 * sum.abs() && (kf + 1.0) > x.abs() {
            return Ok(sum);
        }
    }
    Err(Error::SeriesDivergence {
        what: "1F1",
        iterations: SERIES_MAX_TERMS,
    })
}

/// One Erlang component of the channel-power mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangComponent {
    pub weight: f64,
    pub shape: u32,
    pub rate: f64,
}

/// Shadowed-Rician parameters: Nakagami `m`, half scatter power `b` and
/// line-of-sight power `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingParams {
    m: u32,
    b: f64,
    omega: f64,
    beta: f64,
    c_fad: f64,
    zeta: Vec<f64>,
    weights: Vec<f64>,
}

impl FadingParams {
    pub fn new(m: u32, b: f64, omega: f64) -> Result<Self> {
        if !(1..=MAX_NAKAGAMI_M).contains(&m) {
            return Err(Error::invalid("m", format!("Nakagami m must be an integer in 1..={MAX_NAKAGAMI_M}, got {m}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid("b", format!("must be positive, got {b}")));
        }
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::invalid("omega", format!("must be >= 0, got {omega}")));
        }
        let mf = m as f64;
        let beta = 1.0 / (2.0 * b);
        let c_fad = omega / (2.0 * b * (2.0 * b * mf + omega));
        let lead = (2.0 * b * mf / (2.0 * b * mf + omega)).powi(m as i32) * beta;
        let zeta: Vec<f64> = (0..m)
            .map(|z| {
                let sign = if z % 2 == 0 { 1.0 } else { -1.0 };
                let fz = factorial(z);
                lead * sign * pochhammer(1.0 - mf, z) * c_fad.powi(z as i32) / (fz * fz)
            })
            .collect();
        let rate = beta - c_fad;
        let weights = zeta
            .iter()
            .enumerate()
            .map(|(z, &zt)| zt * factorial(z as u32) / rate.powi(z as i32 + 1))
            .collect();
        Ok(Self {
            m,
            b,
            omega,
            beta,
            c_fad,
            zeta,
            weights,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c_fad(&self) -> f64 {
        self.c_fad
    }

    /// Common Erlang rate `beta - c`.
    pub fn rate(&self) -> f64 {
        self.beta - self.c_fad
    }

    /// Mixture weights `w_z`, `z = 0..m`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mean channel power `2b + omega`.
    pub fn mean_power(&self) -> f64 {
        2.0 * self.b + self.omega
    }

    /// Density of `H` at `h`.
    pub fn pdf(&self, h: f64) -> f64 {
        if h < 0.0 {
            return 0.0;
        }
        let mut hz = 1.0;
        let mut sum = 0.0;
        for &z in &self.zeta {
            sum += z * hz;
            hz *= h;
        }
        sum * (-self.rate() * h).exp()
    }

    /// `E[exp(-x H)]`.
    pub fn laplace(&self, x: f64) -> f64 {
        let q = self.rate() / (self.rate() + x);
        let mut qp = q;
        let mut sum = 0.0;
        for &w in &self.weights {
            sum += w * qp;
            qp *= q;
        }
        sum
    }

    /// Density of the complex amplitude magnitude `sqrt(H)` via `1F1`.
    pub fn amplitude_pdf(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        let (b, om, mf) = (self.b, self.omega, self.m as f64);
        let lead = (2.0 * b * mf / (2.0 * b * mf + om)).powi(self.m as i32);
        let arg = om * x * x / (2.0 * b * (2.0 * b * mf + om));
        Ok(lead * x / b * (-x * x / (2.0 * b)).exp() * confluent_1f1(mf, 1.0, arg)?)
    }
}

/// `zeta(z)` for `0 <= z <= m-1`.
pub fn zeta_coeff(f: &FadingParams, z: u32) -> Result<f64> {
    f.zeta
        .get(z as usize)
        .copied()
        .ok_or_else(|| Error::invalid("z", format!("zeta(z) is only defined for z < m = {}", f.m)))
}

pub fn erlang_mixture_weights(f: &FadingParams) -> Vec<ErlangComponent> {
    f.weights
        .iter()
        .enumerate()
        .map(|(z, &weight)| ErlangComponent {
            weight,
            shape: z as u32 + 1,
            rate: f.rate(),
        })
        .collect()
}

/// `P[H > h]`.
pub fn channel_power_ccdf(f: &FadingParams, h: f64) -> f64 {
    if h <= 0.0 {
        return 1.0;
    }
    let x = f.rate() * h;
    let e = (-x).exp();
    // running Erlang tails: tail_z = e^{-x} sum_{v<=z} x^v / v!
    let mut term = e;
    let mut tail = e;
    let mut sum = 0.0;
    for (z, &w) in f.weights.iter().enumerate() {
        if z > 0 {
            term *= x / z as f64;
            tail += term;
        }
        sum += w * tail;
    }
    sum.clamp(0.0, 1.0)
}
