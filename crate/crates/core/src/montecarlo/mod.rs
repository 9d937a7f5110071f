//! Brute-force simulation of the constellation, the fading and the SINR.
//!
//! Trial `i` draws from its own ChaCha8 stream `(seed, i)`, trials run in
//! fixed chunks of [`CHUNK`] and chunk results merge in chunk order, so every
//! estimate is bit-identical for any number of worker threads.

pub mod stats;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;

use crate::error::{check_range, Error, Result};
use crate::geometry::{to_ring, RingGeometry, SphereGeometry};
use crate::interference::LinkBudget;
use crate::special::FadingParams;

pub const CHUNK: u64 = 1024;
pub const MIN_TRIALS: u64 = 1000;
pub const DEFAULT_BIN_HALF_WIDTH: f64 = 0.01;
const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleMode {
    /// Poisson points on the whole orbital sphere, kept if above the
    /// visibility plane.
    Sphere,
    /// Poisson points on the equivalent planar annulus.
    #[default]
    Ring,
}

/// Visible satellites of one trial, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSample {
    /// Distances to the typical station in km, ascending.
    pub visible_distances: Vec<f64>,
    pub mode: SampleMode,
}

impl ConstellationSample {
    pub fn total_visible(&self) -> usize {
        self.visible_distances.len()
    }
}

/// Per-trial random stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `trials` trials, folding each chunk into its own accumulator and
/// merging the chunk accumulators in order.
pub fn run_trials<A, I, F, M>(seed: u64, trials: u64, init: I, trial: F, mut merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut ChaCha8Rng, u64, &mut A) + Sync,
    M: FnMut(&mut A, A),
{
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = trial_rng(seed, i);
                trial(&mut rng, i, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

/// Draws visible satellites for the typical station at `(0, 0, R_E)`.
#[derive(Debug, Clone)]
pub struct ConstellationSampler {
    geometry: SphereGeometry,
    ring: RingGeometry,
    mode: SampleMode,
    count: Option<Poisson<f64>>,
}

impl ConstellationSampler {
    /// `density` is per unit area of the orbital sphere (km^-2).
    pub fn new(geometry: SphereGeometry, density: f64, mode: SampleMode) -> Result<Self> {
        let ring = to_ring(&geometry, density)?;
        let mean = match mode {
            SampleMode::Sphere => density * geometry.shell_area(),
            SampleMode::Ring => ring.mean_count(),
        };
        let count = if mean > 0.0 {
            Some(Poisson::new(mean).map_err(|e| Error::invalid("density", e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            geometry,
            ring,
            mode,
            count,
        })
    }

    pub fn ring(&self) -> &RingGeometry {
        &self.ring
    }

    pub fn mode(&self) -> SampleMode {
        self.mode
    }

    /// Fills `out` with the sorted visible distances.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        let n = self.count.as_ref().map_or(0, |p| p.sample(rng) as u64);
        match self.mode {
            SampleMode::Sphere => {
                // only the polar coordinate matters for the distance to a
                // station on the axis, and it is uniform in z
                let (re, rs) = (self.geometry.earth_radius(), self.geometry.orbit_radius());
                let plane = re + self.geometry.min_visibility_altitude();
                for _ in 0..n {
                    let z = rng.random_range(-rs..rs);
                    if z >= plane {
                        out.push((rs * rs + re * re - 2.0 * re * z).max(0.0).sqrt());
                    }
                }
            }
            SampleMode::Ring => {
                let lo2 = self.ring.r_min().powi(2);
                let span = self.ring.r_max().powi(2) - lo2;
                for _ in 0..n {
                    let u: f64 = rng.random();
                    out.push((lo2 + u * span).sqrt());
                }
            }
        }
        out.sort_unstable_by(f64::total_cmp);
    }
}

pub fn sample_constellation<R: Rng + ?Sized>(
    geometry: &SphereGeometry,
    density: f64,
    mode: SampleMode,
    rng: &mut R,
) -> Result<ConstellationSample> {
    let sampler = ConstellationSampler::new(*geometry, density, mode)?;
    let mut d = Vec::new();
    sampler.sample_into(rng, &mut d);
    Ok(ConstellationSample {
        visible_distances: d,
        mode,
    })
}

/// Channel power: mixture component by weight, then a sum of exponentials.
pub fn sample_channel_power<R: Rng + ?Sized>(fading: &FadingParams, rng: &mut R) -> f64 {
    let w = fading.weights();
    let z = if w.len() == 1 {
        0
    } else {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = w.len() - 1;
        for (i, &wi) in w.iter().enumerate() {
            acc += wi;
            if u < acc {
                pick = i;
                break;
            }
        }
        pick
    };
    let mut h = 0.0;
    for _ in 0..=z {
        let e: f64 = Exp1.sample(rng);
        h += e;
    }
    h / fading.rate()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrRealization {
    /// `None` when no satellite is visible.
    pub sinr: Option<f64>,
    /// `d_1 / d_K` when at least `K` are visible (`d_1 / d_2` for `K = 1`).
    pub delta: Option<f64>,
    pub visible: usize,
}

/// SINR of the typical station; `serving_power` forces `H_1`.
pub fn realize_sinr_with<R: Rng + ?Sized>(
    distances: &[f64],
    budget: &LinkBudget,
    fading: &FadingParams,
    k: u32,
    serving_power: Option<f64>,
    rng: &mut R,
) -> SinrRealization {
    let visible = distances.len();
    let k = k as usize;
    if visible == 0 {
        return SinrRealization {
            sinr: None,
            delta: None,
            visible,
        };
    }
    let h1 = serving_power.unwrap_or_else(|| sample_channel_power(fading, rng));
    let signal = h1 * budget.path_loss(distances[0]);
    let noise = budget.noise_normalized();
    let mut interference = 0.0;
    if visible >= k {
        for &d in &distances[k..] {
            interference += budget.gbar() * sample_channel_power(fading, rng) * budget.path_loss(d);
        }
    }
    let delta = match k {
        1 if visible >= 2 => Some(distances[0] / distances[1]),
        1 => None,
        _ if visible >= k => Some(distances[0] / distances[k - 1]),
        _ => None,
    };
    SinrRealization {
        sinr: Some(signal / (interference + noise)),
        delta,
        visible,
    }
}

pub fn realize_sinr<R: Rng + ?Sized>(
    sample: &ConstellationSample,
    budget: &LinkBudget,
    fading: &FadingParams,
    k: u32,
    rng: &mut R,
) -> SinrRealization {
    realize_sinr_with(&sample.visible_distances, budget, fading, k, None, rng)
}

/// Everything a coverage simulation needs.
#[derive(Debug, Clone)]
pub struct McSetup {
    pub sampler: ConstellationSampler,
    pub budget: LinkBudget,
    pub fading: FadingParams,
    pub k: u32,
}

impl McSetup {
    pub fn new(
        geometry: SphereGeometry,
        density: f64,
        mode: SampleMode,
        budget: LinkBudget,
        fading: FadingParams,
        k: u32,
    ) -> Result<Self> {
        crate::distributions::check_k(k, 1)?;
        Ok(Self {
            sampler: ConstellationSampler::new(geometry, density, mode)?,
            budget,
            fading,
            k,
        })
    }

    /// Visible counts that make up the noise-limited branch.
    fn is_few(&self, visible: usize) -> bool {
        visible >= 1 && visible < (self.k as usize).max(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub trials: u64,
    pub half_width_95: f64,
}

impl McEstimate {
    pub fn proportion(hits: u64, trials: u64) -> Self {
        let p = if trials > 0 { hits as f64 / trials as f64 } else { f64::NAN };
        Self {
            value: p,
            trials,
            half_width_95: Z95 * (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }

    /// Standard error implied by the half-width.
    pub fn std_error(&self) -> f64 {
        self.half_width_95 / Z95
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        (x - self.value).abs() <= self.half_width_95 + slack
    }
}

/// Relative-distance window `|delta - center| <= half_width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBin {
    pub center: f64,
    pub half_width: f64,
}

impl DeltaBin {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        check_range("delta bin center", center, 0.0, 1.0)?;
        if !(half_width > 0.0) {
            return Err(Error::invalid("delta bin half-width", format!("must be positive, got {half_width}")));
        }
        Ok(Self { center, half_width })
    }

    pub fn contains(&self, delta: f64) -> bool {
        (delta - self.center).abs() <= self.half_width
    }
}

/// Coverage estimates conditioned on one relative-distance bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCoverage {
    pub bin: DeltaBin,
    /// Trials with enough visible satellites and `delta` inside the bin.
    pub conditioned_trials: u64,
    /// `P[SINR >= gamma | many, delta in bin]`.
    pub many: Vec<McEstimate>,
    /// Count-weighted total matching the conditional analytic coverage:
    /// `p_few C_few + p_many C_many|bin`.
    pub composite: Vec<McEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageEstimate {
    pub trials: u64,
    /// Unconditioned `P[SINR >= gamma]`.
    pub overall: Vec<McEstimate>,
    /// `P[SINR >= gamma | few]`.
    pub few: Vec<McEstimate>,
    pub bins: Vec<BinnedCoverage>,
}

#[derive(Clone)]
struct CovAcc {
    few: u64,
    many: u64,
    few_hits: Vec<u64>,
    all_hits: Vec<u64>,
    bin_trials: Vec<u64>,
    bin_hits: Vec<Vec<u64>>,
}

impl CovAcc {
    fn new(gammas: usize, bins: usize) -> Self {
        Self {
            few: 0,
            many: 0,
            few_hits: vec![0; gammas],
            all_hits: vec![0; gammas],
            bin_trials: vec![0; bins],
            bin_hits: vec![vec![0; gammas]; bins],
        }
    }

    fn merge(&mut self, o: CovAcc) {
        self.few += o.few;
        self.many += o.many;
        add(&mut self.few_hits, &o.few_hits);
        add(&mut self.all_hits, &o.all_hits);
        add(&mut self.bin_trials, &o.bin_trials);
        for (a, b) in self.bin_hits.iter_mut().zip(&o.bin_hits) {
            add(a, b);
        }
    }
}

fn add(a: &mut [u64], b: &[u64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

/// Simulates `trials` trials and estimates coverage at each threshold
/// (linear SINR), overall and inside each relative-distance bin.
pub fn estimate_coverage_binned(
    setup: &McSetup,
    gammas: &[f64],
    trials: u64,
    seed: u64,
    bins: &[DeltaBin],
) -> Result<CoverageEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials {
            got: trials,
            needed: MIN_TRIALS,
        });
    }
    let acc = run_trials(
        seed,
        trials,
        || (CovAcc::new(gammas.len(), bins.len()), Vec::new()),
        |rng, _, (acc, buf)| {
            setup.sampler.sample_into(rng, buf);
            let r = realize_sinr_with(buf, &setup.budget, &setup.fading, setup.k, None, rng);
            let Some(sinr) = r.sinr else { return };
            let few = setup.is_few(r.visible);
            if few {
                acc.few += 1;
            } else {
                acc.many += 1;
            }
            for (g, &gamma) in gammas.iter().enumerate() {
                if sinr >= gamma {
                    acc.all_hits[g] += 1;
                    if few {
                        acc.few_hits[g] += 1;
                    }
                }
            }
            if let Some(delta) = r.delta {
                for (b, bin) in bins.iter().enumerate() {
                    if bin.contains(delta) {
                        acc.bin_trials[b] += 1;
                        for (g, &gamma) in gammas.iter().enumerate() {
                            if sinr >= gamma {
                                acc.bin_hits[b][g] += 1;
                            }
                        }
                    }
                }
            }
        },
        |a, (b, _)| a.0.merge(b),
    )
    .0;

    let n = trials as f64;
    let p_few = acc.few as f64 / n;
    let p_many = acc.many as f64 / n;
    let few: Vec<McEstimate> = acc.few_hits.iter().map(|&h| McEstimate::proportion(h, acc.few)).collect();
    let overall = acc.all_hits.iter().map(|&h| McEstimate::proportion(h, trials)).collect();
    let binned = bins
        .iter()
        .enumerate()
        .map(|(b, &bin)| {
            let m = acc.bin_trials[b];
            let many: Vec<McEstimate> = acc.bin_hits[b].iter().map(|&h| McEstimate::proportion(h, m)).collect();
            let composite = few
                .iter()
                .zip(&many)
                .map(|(f, c)| composite_estimate(p_few, p_many, f, c, trials))
                .collect();
            BinnedCoverage {
                bin,
                conditioned_trials: m,
                many,
                composite,
            }
        })
        .collect();
    Ok(CoverageEstimate {
        trials,
        overall,
        few,
        bins: binned,
    })
}

/// `p_f C_f + p_m C_m` with a delta-method half-width: binomial noise of the
/// two conditional rates plus multinomial noise of the count fractions.
fn composite_estimate(p_few: f64, p_many: f64, few: &McEstimate, many: &McEstimate, n: u64) -> McEstimate {
    let (cf, var_f) = if few.trials > 0 {
        (few.value, few.std_error().powi(2))
    } else {
        (0.0, 0.0)
    };
    let cm = many.value;
    let value = p_few * cf + p_many * cm;
    let var_rates = p_few.powi(2) * var_f + p_many.powi(2) * many.std_error().powi(2);
    let var_counts = (p_few * cf * cf + p_many * cm * cm - value * value) / n as f64;
    McEstimate {
        value,
        trials: many.trials,
        half_width_95: Z95 * (var_rates + var_counts.max(0.0)).sqrt(),
    }
}

/// Unconditioned coverage at each threshold.
pub fn estimate_coverage(
    setup: &McSetup,
    gammas: &[f64],
    trials: u64,
    seed: u64,
    delta_condition: Option<DeltaBin>,
) -> Result<Vec<McEstimate>> {
    match delta_condition {
        None => Ok(estimate_coverage_binned(setup, gammas, trials, seed, &[])?.overall),
        Some(bin) => {
            let est = estimate_coverage_binned(setup, gammas, trials, seed, &[bin])?;
            let b = &est.bins[0];
            if b.conditioned_trials < MIN_TRIALS {
                return Err(Error::InsufficientTrials {
                    got: b.conditioned_trials,
                    needed: MIN_TRIALS,
                });
            }
            Ok(b.composite.clone())
        }
    }
}

/// Mean of `log2(1 + SINR)`, outage counting as zero.
pub fn estimate_ergodic_se(setup: &McSetup, trials: u64, seed: u64) -> Result<McEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials {
            got: trials,
            needed: MIN_TRIALS,
        });
    }
    let (sum, sq, _) = run_trials(
        seed,
        trials,
        || (0.0f64, 0.0f64, Vec::new()),
        |rng, _, (s, q, buf)| {
            setup.sampler.sample_into(rng, buf);
            let r = realize_sinr_with(buf, &setup.budget, &setup.fading, setup.k, None, rng);
            let c = r.sinr.map_or(0.0, |x| x.ln_1p() / std::f64::consts::LN_2);
            *s += c;
            *q += c * c;
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    );
    let n = trials as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0);
    Ok(McEstimate {
        value: mean,
        trials,
        half_width_95: Z95 * (var / n).sqrt(),
    })
}

/// Conditioned distance samples, in trial order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistanceSamples {
    pub trials: u64,
    /// `d_1` given `1 <= N <= K-1`.
    pub nearest_few: Vec<f64>,
    /// `d_K` given `N >= K` and `d_K >= R_min / delta_0`.
    pub kth_many: Vec<f64>,
    /// `d_K` given `N >= K` and `delta` inside the bin.
    pub kth_in_bin: Vec<f64>,
    /// `delta` given `N >= K`; empty for `K = 1`.
    pub delta_many: Vec<f64>,
    /// Visible counts of every trial.
    pub counts: Vec<u32>,
}

pub fn empirical_distance_stats(
    sampler: &ConstellationSampler,
    k: u32,
    delta0: f64,
    bin: DeltaBin,
    trials: u64,
    seed: u64,
) -> Result<DistanceSamples> {
    crate::distributions::check_k(k, 1)?;
    let r0 = sampler.ring().r_min() / delta0;
    let k = k as usize;
    let mut out = run_trials(
        seed,
        trials,
        || (DistanceSamples::default(), Vec::new()),
        |rng, _, (acc, buf)| {
            sampler.sample_into(rng, buf);
            let n = buf.len();
            acc.counts.push(n as u32);
            if n >= 1 && n < k {
                acc.nearest_few.push(buf[0]);
            }
            if n >= k {
                let dk = buf[k - 1];
                if dk >= r0 {
                    acc.kth_many.push(dk);
                }
                if k >= 2 {
                    let delta = buf[0] / dk;
                    acc.delta_many.push(delta);
                    if bin.contains(delta) {
                        acc.kth_in_bin.push(dk);
                    }
                }
            }
        },
        |a, (b, _)| {
            a.0.nearest_few.extend(b.nearest_few);
            a.0.kth_many.extend(b.kth_many);
            a.0.kth_in_bin.extend(b.kth_in_bin);
            a.0.delta_many.extend(b.delta_many);
            a.0.counts.extend(b.counts);
        },
    )
    .0;
    out.trials = trials;
    Ok(out)
}

/// Direct estimate of `E[exp(-s (I + sigma_bar^2))]` with interferers on
/// `[rk, R_max]`; returns the mean and its standard error.
pub fn mc_laplace(
    ring: &RingGeometry,
    budget: &LinkBudget,
    fading: &FadingParams,
    s: f64,
    rk: f64,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    check_range("rK", rk, ring.r_min(), ring.r_max())?;
    let mean = ring.lambda_pi() * (ring.r_max().powi(2) - rk * rk);
    let count = if mean > 0.0 {
        Some(Poisson::new(mean).map_err(|e| Error::invalid("density", e.to_string()))?)
    } else {
        None
    };
    let lo2 = rk * rk;
    let span = ring.r_max().powi(2) - lo2;
    let noise = budget.noise_normalized();
    let (sum, sq) = run_trials(
        seed,
        trials,
        || (0.0f64, 0.0f64),
        |rng, _, acc| {
            let n = count.as_ref().map_or(0, |p| p.sample(rng) as u64);
            let mut i = 0.0;
            for _ in 0..n {
                let u: f64 = rng.random();
                let r = (lo2 + u * span).sqrt();
                i += budget.gbar() * sample_channel_power(fading, rng) * budget.path_loss(r);
            }
            let v = (-s * (i + noise)).exp();
            acc.0 += v;
            acc.1 += v * v;
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    );
    let n = trials as f64;
    let m = sum / n;
    Ok((m, ((sq / n - m * m).max(0.0) / n).sqrt()))
}
