//! Adaptive Gauss–Kronrod quadrature (10-point Gauss / 21-point Kronrod).
//!
//! Both a scalar and a vector-valued driver are provided. The vector driver
//! integrates several components over one set of abscissae and refines until
//! every component meets its own tolerance, which is what the Laplace
//! derivative chain needs: all derivative orders share the same integrand
//! geometry and are integrated in a single pass.

use std::cell::Cell;

use thiserror::Error;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Number of integrand evaluations per panel.
pub const POINTS_PER_PANEL: u64 = 21;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn accepts(&self, value: f64, error: f64) -> bool {
        error <= self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not reach tolerance after {panels} panels on [{a}, {b}] (estimate {value:e}, error {error:e})")]
    NotConverged {
        a: f64,
        b: f64,
        panels: usize,
        value: f64,
        error: f64,
    },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("integrand evaluation budget of {budget} exhausted")]
    BudgetExhausted { budget: u64 },
}

/// Shared evaluation counter for nested integrations.
#[derive(Debug)]
pub struct EvalBudget {
    used: Cell<u64>,
    limit: u64,
}

impl EvalBudget {
    pub fn new(limit: u64) -> Self {
        Self {
            used: Cell::new(0),
            limit,
        }
    }

    pub fn used(&self) -> u64 {
        self.used.get()
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    fn charge(&self, n: u64) -> Result<(), QuadError> {
        let used = self.used.get() + n;
        self.used.set(used);
        if used > self.limit {
            Err(QuadError::BudgetExhausted { budget: self.limit })
        } else {
            Ok(())
        }
    }
}

/// Adaptive integrator settings.
#[derive(Debug, Clone, Copy)]
pub struct Integrator<'b> {
    pub tol: Tolerance,
    pub max_panels: usize,
    budget: Option<&'b EvalBudget>,
}

impl Integrator<'static> {
    pub fn new(tol: Tolerance) -> Self {
        Self {
            tol,
            max_panels: 2000,
            budget: None,
        }
    }
}

impl<'b> Integrator<'b> {
    pub fn with_budget<'c>(self, budget: &'c EvalBudget) -> Integrator<'c> {
        Integrator {
            tol: self.tol,
            max_panels: self.max_panels,
            budget: Some(budget),
        }
    }

    /// Integrates a scalar function over `[a, b]`.
    pub fn integrate<F>(&self, mut f: F, a: f64, b: f64) -> Result<f64, QuadError>
    where
        F: FnMut(f64) -> Result<f64, QuadError>,
    {
        let out = self.integrate_vec(
            |x, out| {
                out[0] = f(x)?;
                Ok(())
            },
            a,
            b,
            1,
        )?;
        Ok(out[0])
    }

    /// Integrates a `dim`-component function over `[a, b]`. The integrand
    /// writes its components into the provided slice.
    pub fn integrate_vec<F>(&self, mut f: F, a: f64, b: f64, dim: usize) -> Result<Vec<f64>, QuadError>
    where
        F: FnMut(f64, &mut [f64]) -> Result<(), QuadError>,
    {
        if a == b {
            return Ok(vec![0.0; dim]);
        }
        if b < a {
            let mut v = self.integrate_vec(f, b, a, dim)?;
            v.iter_mut().for_each(|x| *x = -*x);
            return Ok(v);
        }

        let mut scratch = Scratch::new(dim);
        let mut panels: Vec<Panel> = Vec::with_capacity(16);
        let mut values: Vec<f64> = Vec::with_capacity(16 * dim);
        let mut errors: Vec<f64> = Vec::with_capacity(16 * dim);

        self.charge()?;
        let (v, e) = scratch.kronrod(&mut f, a, b)?;
        panels.push(Panel { a, b });
        values.extend_from_slice(v);
        errors.extend_from_slice(e);

        let mut total = vec![0.0; dim];
        let mut total_err = vec![0.0; dim];
        loop {
            total.iter_mut().for_each(|t| *t = 0.0);
            total_err.iter_mut().for_each(|t| *t = 0.0);
            for p in 0..panels.len() {
                for k in 0..dim {
                    total[k] += values[p * dim + k];
                    total_err[k] += errors[p * dim + k];
                }
            }
            let done = (0..dim).all(|k| self.tol.accepts(total[k], total_err[k]));
            if done {
                return Ok(total);
            }
            if panels.len() >= self.max_panels {
                let worst = (0..dim)
                    .max_by(|&i, &j| {
                        let ri = total_err[i] / self.tol.abs.max(self.tol.rel * total[i].abs()).max(f64::MIN_POSITIVE);
                        let rj = total_err[j] / self.tol.abs.max(self.tol.rel * total[j].abs()).max(f64::MIN_POSITIVE);
                        ri.total_cmp(&rj)
                    })
                    .unwrap_or(0);
                return Err(QuadError::NotConverged {
                    a,
                    b,
                    panels: panels.len(),
                    value: total[worst],
                    error: total_err[worst],
                });
            }

            // Split the panel whose error is largest relative to the
            // per-component allowance.
            let allowance: Vec<f64> = (0..dim)
                .map(|k| self.tol.abs.max(self.tol.rel * total[k].abs()).max(f64::MIN_POSITIVE))
                .collect();
            let mut split = 0;
            let mut worst = f64::NEG_INFINITY;
            for p in 0..panels.len() {
                let score = (0..dim)
                    .map(|k| errors[p * dim + k] / allowance[k])
                    .fold(0.0, f64::max);
                if score > worst {
                    worst = score;
                    split = p;
                }
            }

            let Panel { a: pa, b: pb } = panels[split];
            let mid = 0.5 * (pa + pb);
            if !(mid > pa && mid < pb) {
                return Err(QuadError::NotConverged {
                    a,
                    b,
                    panels: panels.len(),
                    value: total[0],
                    error: total_err[0],
                });
            }

            self.charge()?;
            let (lv, le) = scratch.kronrod(&mut f, pa, mid)?;
            panels[split] = Panel { a: pa, b: mid };
            values[split * dim..(split + 1) * dim].copy_from_slice(lv);
            errors[split * dim..(split + 1) * dim].copy_from_slice(le);

            self.charge()?;
            let (rv, re) = scratch.kronrod(&mut f, mid, pb)?;
            panels.push(Panel { a: mid, b: pb });
            values.extend_from_slice(rv);
            errors.extend_from_slice(re);
        }
    }

    fn charge(&self) -> Result<(), QuadError> {
        match self.budget {
            Some(b) => b.charge(POINTS_PER_PANEL),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
}

struct Scratch {
    dim: usize,
    fx: Vec<f64>,
    kronrod: Vec<f64>,
    gauss: Vec<f64>,
    res_abs: Vec<f64>,
    res_asc: Vec<f64>,
    samples: Vec<f64>,
    value: Vec<f64>,
    error: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            fx: vec![0.0; dim],
            kronrod: vec![0.0; dim],
            gauss: vec![0.0; dim],
            res_abs: vec![0.0; dim],
            res_asc: vec![0.0; dim],
            samples: vec![0.0; 21 * dim],
            value: vec![0.0; dim],
            error: vec![0.0; dim],
        }
    }

    /// One G10/K21 panel. Returns (integral, error estimate) slices.
    fn kronrod<F>(&mut self, f: &mut F, a: f64, b: f64) -> Result<(&[f64], &[f64]), QuadError>
    where
        F: FnMut(f64, &mut [f64]) -> Result<(), QuadError>,
    {
        let dim = self.dim;
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);

        // samples layout: index 0 is the centre, then pairs (2j+1, 2j+2)
        // for node j at center -/+ half*XGK[j].
        let mut eval = |x: f64, slot: usize, fx: &mut [f64], samples: &mut [f64]| -> Result<(), QuadError> {
            f(x, fx)?;
            for k in 0..dim {
                if !fx[k].is_finite() {
                    return Err(QuadError::NonFinite { x });
                }
                samples[slot * dim + k] = fx[k];
            }
            Ok(())
        };

        eval(center, 0, &mut self.fx, &mut self.samples)?;
        for j in 0..10 {
            let dx = half * XGK[j];
            eval(center - dx, 2 * j + 1, &mut self.fx, &mut self.samples)?;
            eval(center + dx, 2 * j + 2, &mut self.fx, &mut self.samples)?;
        }

        for k in 0..dim {
            let fc = self.samples[k];
            let mut res_k = fc * WGK[10];
            let mut res_g = 0.0;
            let mut res_abs = (fc * WGK[10]).abs();
            for j in 0..10 {
                let f1 = self.samples[(2 * j + 1) * dim + k];
                let f2 = self.samples[(2 * j + 2) * dim + k];
                res_k += WGK[j] * (f1 + f2);
                res_abs += WGK[j] * (f1.abs() + f2.abs());
                if j % 2 == 1 {
                    res_g += WG[j / 2] * (f1 + f2);
                }
            }
            let mean = 0.5 * res_k;
            let mut res_asc = WGK[10] * (fc - mean).abs();
            for j in 0..10 {
                let f1 = self.samples[(2 * j + 1) * dim + k];
                let f2 = self.samples[(2 * j + 2) * dim + k];
                res_asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
            }
            self.kronrod[k] = res_k * half;
            self.gauss[k] = res_g * half;
            self.res_abs[k] = res_abs * half.abs();
            self.res_asc[k] = res_asc * half.abs();
            self.value[k] = self.kronrod[k];
            self.error[k] = rescale_error(
                (self.kronrod[k] - self.gauss[k]).abs(),
                self.res_abs[k],
                self.res_asc[k],
            );
        }
        Ok((&self.value, &self.error))
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err;
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let floor = 50.0 * f64::EPSILON * res_abs;
        if floor > scaled {
            scaled = floor;
        }
    }
    scaled
}

/// Convenience wrapper for infallible scalar integrands.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64,
{
    Integrator::new(tol).integrate(|x| Ok(f(x)), a, b)
}
