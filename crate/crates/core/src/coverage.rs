//! Coverage probability conditioned on the relative distance, its
//! derivative-free approximation, the delta-marginal coverage, ergodic
//! spectral efficiency and the optimal cluster size.
//!
//! The typical station falls in one of three count events. With no visible
//! satellite it is in outage. With `1..K-1` visible the serving links null
//! every other visible satellite and only noise remains. With at least `K`
//! visible it is served by the nearest satellite at distance `delta d_K` and
//! interfered by every satellite beyond `d_K`.

use rayon::prelude::*;

use crate::distributions::{
    check_delta, check_k, count_probabilities, delta_pdf, kth_normalizer, kth_pdf_given_many,
    nearest_pdf_given_any, nearest_pdf_given_few, CountProbabilities,
};
use crate::error::{Error, Result};
use crate::geometry::RingGeometry;
use crate::interference::{laplace_batch, laplace_moments_scaled, LinkBudget, RadioParams};
use crate::quadrature::{EvalBudget, Integrator, QuadError, Tolerance};
use crate::special::{binomial, channel_power_ccdf, factorial, FadingParams};

/// Radial integrals of conditional coverage.
pub const INNER_TOL: Tolerance = Tolerance::new(1e-12, 1e-7);
/// Outer integral over the relative distance.
pub const OUTER_TOL: Tolerance = Tolerance::new(1e-12, 1e-6);
/// Integrand evaluations allowed for one marginal coverage value.
pub const MARGINAL_EVAL_BUDGET: u64 = 10_000_000;

const SE_TOL: Tolerance = Tolerance::new(1e-7, 1e-7);
const SE_NEGLIGIBLE_COVERAGE: f64 = 1e-6;
const SE_TAIL_LIMIT: f64 = 1e-5;
const SE_MAX_LOG2_GAMMA: f64 = 64.0;
const K_STAR_TIE: f64 = 1e-9;

/// Choice of the exponent scale `kappa_z` in the approximation
/// `P[Gamma(z+1) > y] ~ 1 - (1 - exp(-kappa_z y))^(z+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaRule {
    /// `kappa = 1`; lower-bounds coverage.
    Unit,
    /// `kappa_z = ((z+1)!)^(-1/(z+1))`; upper-bounds coverage.
    Alzer,
    /// Linear blend, `t = 0` is `Unit` and `t = 1` is `Alzer`.
    Blend(f64),
}

impl KappaRule {
    pub fn kappa(&self, z: u32) -> f64 {
        let alzer = factorial(z + 1).powf(-1.0 / (z + 1) as f64);
        match *self {
            KappaRule::Unit => 1.0,
            KappaRule::Alzer => alzer,
            KappaRule::Blend(t) => (1.0 - t) + t * alzer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let KappaRule::Blend(t) = *self {
            crate::error::check_range("kappa blend", t, 0.0, 1.0)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Exact,
    Approx(KappaRule),
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageQuery {
    pub gamma: f64,
    pub mode: Mode,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageResult {
    pub probability: f64,
    /// Coverage given `1 <= N <= K-1`.
    pub branch_few: f64,
    /// Coverage given `N >= K` (and the relative distance, if conditioned).
    pub branch_many: f64,
    pub weights: CountProbabilities,
}

impl CoverageResult {
    fn assemble(weights: CountProbabilities, few: f64, many: f64) -> Self {
        let few = few.clamp(0.0, 1.0);
        let many = many.clamp(0.0, 1.0);
        Self {
            probability: (weights.p_one_to_km1 * few + weights.p_geq_k * many).clamp(0.0, 1.0),
            branch_few: few,
            branch_many: many,
            weights,
        }
    }
}

struct Ctx<'a> {
    ring: &'a RingGeometry,
    budget: &'a LinkBudget,
    fading: &'a FadingParams,
}

impl Ctx<'_> {
    /// Argument `s = (beta - c) gamma d^alpha` for a serving distance in km.
    fn s_at(&self, gamma: f64, serving_km: f64) -> f64 {
        self.fading.rate() * gamma / self.budget.path_loss(serving_km)
    }

    /// `P[SINR >= gamma | d_K = rk, delta]` from the Laplace moments.
    fn many_exact(&self, gamma: f64, delta: f64, rk: f64) -> Result<f64> {
        let s = self.s_at(gamma, delta * rk);
        let order = self.fading.m() as usize - 1;
        let m = laplace_moments_scaled(self.ring, self.budget, self.fading, order, s, rk, s)?;
        let mut total = 0.0;
        for (z, &w) in self.fading.weights().iter().enumerate() {
            let mut t = 0.0;
            for (v, mv) in m.iter().enumerate().take(z + 1) {
                t += mv / factorial(v as u32);
            }
            total += w * t;
        }
        Ok(total)
    }

    /// Same probability with each Erlang tail replaced by its exponential
    /// envelope, so only plain Laplace values are needed.
    fn many_approx(&self, gamma: f64, delta: f64, rk: f64, rule: KappaRule) -> Result<f64> {
        let s = self.s_at(gamma, delta * rk);
        let m = self.fading.m();
        let mut args = Vec::with_capacity((m * (m + 1) / 2) as usize);
        for z in 0..m {
            let kz = if z == 0 { 1.0 } else { rule.kappa(z) };
            for l in 1..=z + 1 {
                args.push(l as f64 * kz * s);
            }
        }
        let lap = laplace_batch(self.ring, self.budget, self.fading, &args, rk)?;
        let mut next = lap.iter();
        let mut total = 0.0;
        for (z, &w) in self.fading.weights().iter().enumerate() {
            let z = z as u32;
            let mut t = 0.0;
            for l in 1..=z + 1 {
                let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
                t += sign * binomial(z + 1, l) * next.next().expect("one value per term");
            }
            total += w * t;
        }
        Ok(total)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma", format!("SINR threshold must be finite and >= 0, got {gamma}")));
    }
    Ok(())
}

/// Carries non-quadrature errors out of quadrature callbacks.
#[derive(Default)]
struct Stash(std::cell::RefCell<Option<Error>>);

impl Stash {
    fn lift<T>(&self, r: Result<T>) -> std::result::Result<T, QuadError> {
        r.map_err(|e| match e {
            Error::Quadrature(q) => q,
            other => {
                self.0.borrow_mut().get_or_insert(other);
                QuadError::NonFinite { x: f64::NAN }
            }
        })
    }

    fn finish<T>(self, r: std::result::Result<T, QuadError>) -> Result<T> {
        match (self.0.into_inner(), r) {
            (Some(e), _) => Err(e),
            (None, r) => Ok(r?),
        }
    }
}

/// SNR coverage given `1 <= N <= K-1`.
pub fn snr_coverage_few(ring: &RingGeometry, budget: &LinkBudget, fading: &FadingParams, k: u32, gamma: f64) -> Result<f64> {
    check_k(k, 2)?;
    check_gamma(gamma)?;
    let noise = budget.noise_normalized();
    let stash = Stash::default();
    let f = |r1: f64| -> std::result::Result<f64, QuadError> {
        let h = gamma * noise / budget.path_loss(r1);
        Ok(channel_power_ccdf(fading, h) * stash.lift(nearest_pdf_given_few(ring, k, r1))?)
    };
    let v = Integrator::new(INNER_TOL).integrate(f, ring.r_min(), ring.r_max());
    Ok(stash.finish(v)?.clamp(0.0, 1.0))
}

fn many_integral(ctx: &Ctx, k: u32, delta: f64, gamma: f64, approx: Option<KappaRule>) -> Result<f64> {
    let r0 = (ctx.ring.r_min() / delta).min(ctx.ring.r_max());
    let stash = Stash::default();
    let f = |rk: f64| -> std::result::Result<f64, QuadError> {
        let pdf = stash.lift(kth_pdf_given_many(ctx.ring, k, delta, rk))?;
        if pdf == 0.0 {
            return Ok(0.0);
        }
        let inner = match approx {
            None => stash.lift(ctx.many_exact(gamma, delta, rk))?,
            Some(rule) => stash.lift(ctx.many_approx(gamma, delta, rk, rule))?,
        };
        Ok(inner * pdf)
    };
    let v = Integrator::new(INNER_TOL).integrate(f, r0, ctx.ring.r_max());
    stash.finish(v)
}

/// SINR coverage given `N >= K` and the relative distance `delta`.
pub fn sinr_coverage_many(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    k: u32,
    delta: f64,
    gamma: f64,
) -> Result<f64> {
    check_k(k, 2)?;
    check_delta(ring, delta)?;
    check_gamma(gamma)?;
    let ctx = Ctx { ring, budget, fading };
    Ok(many_integral(&ctx, k, delta, gamma, None)?.clamp(0.0, 1.0))
}

/// Coverage given the relative distance `delta`.
pub fn coverage_cond_delta(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    k: u32,
    delta: f64,
    gamma: f64,
) -> Result<CoverageResult> {
    let weights = count_probabilities(ring, k)?;
    let few = snr_coverage_few(ring, budget, fading, k, gamma)?;
    let many = sinr_coverage_many(ring, budget, fading, k, delta, gamma)?;
    Ok(CoverageResult::assemble(weights, few, many))
}

/// Derivative-free approximation of [`coverage_cond_delta`].
pub fn coverage_cond_delta_approx(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    k: u32,
    delta: f64,
    gamma: f64,
    rule: KappaRule,
) -> Result<CoverageResult> {
    check_k(k, 2)?;
    check_delta(ring, delta)?;
    check_gamma(gamma)?;
    rule.validate()?;
    let weights = count_probabilities(ring, k)?;
    let few = snr_coverage_few(ring, budget, fading, k, gamma)?;
    let ctx = Ctx { ring, budget, fading };
    let many = many_integral(&ctx, k, delta, gamma, Some(rule))?;
    Ok(CoverageResult::assemble(weights, few, many))
}

/// Coverage averaged over the relative distance.
///
/// `K = 1` is the non-coordinated baseline: the nearest satellite serves and
/// every other visible satellite interferes.
pub fn coverage_marginal(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    k: u32,
    gamma: f64,
) -> Result<CoverageResult> {
    check_k(k, 1)?;
    check_gamma(gamma)?;
    let weights = count_probabilities(ring, k)?;
    let ctx = Ctx { ring, budget, fading };
    let evals = EvalBudget::new(MARGINAL_EVAL_BUDGET);
    let (lo, hi) = (ring.r_min(), ring.r_max());
    let stash = Stash::default();

    if k == 1 {
        let f = |r1: f64| -> std::result::Result<f64, QuadError> {
            let pdf = nearest_pdf_given_any(ring, r1);
            Ok(stash.lift(ctx.many_exact(gamma, 1.0, r1))? * pdf)
        };
        let many = Integrator::new(OUTER_TOL).with_budget(&evals).integrate(f, lo, hi);
        let many = stash.finish(many)?;
        return Ok(CoverageResult::assemble(weights, 0.0, many));
    }

    let few = snr_coverage_few(ring, budget, fading, k, gamma)?;
    let lp = ring.lambda_pi();
    // The conditional density of d_K factors as
    // 2 lambda pi r Pois(K-1; A(r)) / v(x), so the outer integral runs over
    // d_K and the inner one over the relative distance.
    let outer = |rk: f64| -> std::result::Result<f64, QuadError> {
        let x_lo = (lo / rk).max(ring.min_delta());
        if x_lo >= 1.0 {
            return Ok(0.0);
        }
        let radial = 2.0 * lp * rk * crate::special::poisson_pmf(k as u64 - 1, lp * (rk * rk - lo * lo));
        if radial == 0.0 {
            return Ok(0.0);
        }
        let inner = |x: f64| -> std::result::Result<f64, QuadError> {
            let v = stash.lift(kth_normalizer(ring, k, x))?;
            if v <= 0.0 {
                return Ok(0.0);
            }
            let fx = stash.lift(delta_pdf(ring, k, x))?;
            if fx == 0.0 {
                return Ok(0.0);
            }
            Ok(stash.lift(ctx.many_exact(gamma, x, rk))? * fx / v)
        };
        let tot = Integrator::new(INNER_TOL).with_budget(&evals).integrate(inner, x_lo, 1.0)?;
        Ok(radial * tot)
    };
    let many = Integrator::new(OUTER_TOL).with_budget(&evals).integrate(outer, lo, hi);
    let many = stash.finish(many)?;
    Ok(CoverageResult::assemble(weights, few, many))
}

/// Dispatches a query to the matching coverage routine.
pub fn evaluate(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    k: u32,
    query: &CoverageQuery,
) -> Result<CoverageResult> {
    let need_delta = || {
        query
            .delta
            .ok_or_else(|| Error::invalid("delta", "conditional coverage needs a relative distance"))
    };
    match query.mode {
        Mode::Exact => coverage_cond_delta(ring, budget, fading, k, need_delta()?, query.gamma),
        Mode::Approx(rule) => coverage_cond_delta_approx(ring, budget, fading, k, need_delta()?, query.gamma, rule),
        Mode::Marginal => coverage_marginal(ring, budget, fading, k, query.gamma),
    }
}

/// SINR threshold needed to carry `rate` bit/s over `bandwidth` Hz.
pub fn rate_to_sinr(rate: f64, bandwidth: f64) -> Result<f64> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::invalid("rate", format!("must be finite and >= 0, got {rate}")));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid("bandwidth", format!("must be positive, got {bandwidth}")));
    }
    Ok((rate / bandwidth).exp2() - 1.0)
}

/// `P[W log2(1 + SINR) >= rate]`, averaged over the relative distance.
pub fn rate_coverage(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    k: u32,
    rate: f64,
    bandwidth: f64,
) -> Result<f64> {
    let gamma = rate_to_sinr(rate, bandwidth)?;
    Ok(coverage_marginal(ring, budget, fading, k, gamma)?.probability)
}

/// `int_0^inf log2(e) P(gamma) / (1 + gamma) d gamma` for a coverage curve.
///
/// Substituting `gamma = 2^u - 1` turns this into `int_0^inf P(2^u - 1) du`.
/// The range doubles until coverage is negligible; what lies beyond is
/// bounded by one further decade of the last coverage value.
pub fn ergodic_se_of<F>(mut coverage: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut u_max: f64 = 8.0;
    let mut last = coverage(u_max.exp2() - 1.0)?;
    while last >= SE_NEGLIGIBLE_COVERAGE && u_max < SE_MAX_LOG2_GAMMA {
        u_max *= 2.0;
        last = coverage(u_max.exp2() - 1.0)?;
    }
    let gamma_max = u_max.exp2() - 1.0;
    let bound = last * ((1.0 + 10.0 * gamma_max) / (1.0 + gamma_max)).log2();
    if bound > SE_TAIL_LIMIT {
        return Err(Error::TailBound {
            gamma_max,
            bound,
            limit: SE_TAIL_LIMIT,
        });
    }
    let stash = Stash::default();
    let v = Integrator::new(SE_TOL).integrate(|u| stash.lift(coverage(u.exp2() - 1.0)), 0.0, u_max);
    stash.finish(v)
}

/// Ergodic spectral efficiency in bit/s/Hz from the marginal coverage.
pub fn ergodic_se(ring: &RingGeometry, budget: &LinkBudget, fading: &FadingParams, k: u32) -> Result<f64> {
    check_k(k, 1)?;
    ergodic_se_of(|g| Ok(coverage_marginal(ring, budget, fading, k, g)?.probability))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalK {
    pub k_star: u32,
    pub se_star: f64,
    /// Smallest cluster size swept; `se_by_k[i]` belongs to `k_min + i`.
    pub k_min: u32,
    pub se_by_k: Vec<f64>,
}

/// Cluster size in `1..=N_t` maximising ergodic spectral efficiency; the
/// smaller size wins a tie.
pub fn optimal_cluster_size(ring: &RingGeometry, radio: &RadioParams, fading: &FadingParams, n_t: u32) -> Result<OptimalK> {
    if n_t == 0 {
        return Err(Error::invalid("N_t", "need at least one transmit antenna"));
    }
    let hi = n_t.min(crate::distributions::MAX_CLUSTER_SIZE);
    optimal_cluster_size_in(ring, radio, fading, n_t, 1, hi)
}

/// Same search restricted to `k_min..=k_max`.
pub fn optimal_cluster_size_in(
    ring: &RingGeometry,
    radio: &RadioParams,
    fading: &FadingParams,
    n_t: u32,
    k_min: u32,
    k_max: u32,
) -> Result<OptimalK> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::invalid("k_range", format!("need 1 <= k_min <= k_max, got {k_min}..={k_max}")));
    }
    if k_max > n_t || k_max > crate::distributions::MAX_CLUSTER_SIZE {
        return Err(Error::invalid(
            "k_range",
            format!("k_max = {k_max} exceeds N_t = {n_t} or the supported maximum"),
        ));
    }
    let se_by_k = (k_min..=k_max)
        .into_par_iter()
        .map(|k| ergodic_se(ring, &radio.budget(n_t, k)?, fading, k))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pick_best(k_min, se_by_k))
}

fn pick_best(k_min: u32, se_by_k: Vec<f64>) -> OptimalK {
    let mut best = 0;
    for (i, &se) in se_by_k.iter().enumerate().skip(1) {
        if se > se_by_k[best] * (1.0 + K_STAR_TIE) {
            best = i;
        }
    }
    OptimalK {
        k_star: k_min + best as u32,
        se_star: se_by_k[best],
        k_min,
        se_by_k,
    }
}
