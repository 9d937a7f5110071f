//! The five analyses. Each returns a filled [`Table`]; writing and exit
//! codes are left to the caller.

use rayon::prelude::*;

use leocov::coverage::{
    coverage_cond_delta, coverage_marginal, ergodic_se as analytic_se, evaluate, optimal_cluster_size_in, CoverageQuery,
    Mode,
};
use leocov::distributions::{
    delta_cdf, delta_pdf, kth_ccdf_given_many, kth_pdf_given_many, nearest_ccdf_given_few, nearest_pdf_given_few,
};
use leocov::geometry::{density_for_mean_visible, to_ring};
use leocov::montecarlo::stats::{chi_square, Histogram};
use leocov::montecarlo::{
    empirical_distance_stats, estimate_coverage, estimate_coverage_binned, estimate_ergodic_se, ConstellationSampler,
    DeltaBin, McSetup, MIN_TRIALS,
};
use leocov::units::db_to_linear;

use crate::config::ExperimentConfig;
use crate::output::{Cell, Table};
use crate::{CliError, ModeArg, WhichDist};

fn lib<T>(context: &str, r: leocov::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::from_lib(context, e))
}

fn check_trials(cfg: &ExperimentConfig) -> Result<u64, CliError> {
    let t = cfg.run.trials;
    if t < MIN_TRIALS {
        return Err(CliError::config(format!("run.trials: need at least {MIN_TRIALS}, got {t}")));
    }
    Ok(t)
}

pub fn coverage(cfg: &ExperimentConfig, mode: ModeArg) -> Result<Table, CliError> {
    let fading = cfg.fading()?;
    let radio = cfg.radio()?;
    let (_, ring) = cfg.ring()?;
    let (n_t, k) = (cfg.n_t()?, cfg.k()?);
    let budget = lib("network", radio.budget(n_t, k))?;
    let gammas = cfg.gammas_db()?;

    let (mode, name, deltas) = match mode {
        ModeArg::Marginal => (Mode::Marginal, "marginal", vec![None]),
        m => {
            if cfg.run.delta.is_empty() {
                return Err(CliError::config(
                    "run.delta: conditional modes need at least one relative distance",
                ));
            }
            let deltas = cfg.run.delta.iter().map(|&d| Some(d)).collect();
            match m {
                ModeArg::Exact => (Mode::Exact, "exact", deltas),
                _ => (Mode::Approx(cfg.run.kappa.rule()?), "approx", deltas),
            }
        }
    };
    let points: Vec<(Option<f64>, f64)> = deltas
        .iter()
        .flat_map(|&d| gammas.iter().map(move |&g| (d, g)))
        .collect();
    let results = points
        .par_iter()
        .map(|&(delta, g_db)| {
            let q = CoverageQuery {
                gamma: db_to_linear(g_db),
                mode,
                delta,
            };
            evaluate(&ring, &budget, &fading, k, &q)
        })
        .collect::<leocov::Result<Vec<_>>>();
    let results = lib("coverage", results)?;

    let options = format!("--mode {name}");
    let mut t = Table::new(
        "coverage",
        &options,
        cfg,
        &["gamma_db", "probability", "branch_few", "branch_many", "mode", "delta"],
    );
    for (&(delta, g_db), r) in points.iter().zip(&results) {
        t.row(&[
            Cell::F(g_db),
            Cell::F(r.probability),
            Cell::F(r.branch_few),
            Cell::F(r.branch_many),
            Cell::S(name.into()),
            delta.map_or(Cell::Empty, Cell::F),
        ]);
    }
    Ok(t)
}

pub struct ValidationReport {
    pub table: Table,
    pub failures: usize,
    pub max_discrepancy: f64,
    pub summary: String,
}

pub fn validate(cfg: &ExperimentConfig) -> Result<ValidationReport, CliError> {
    let fading = cfg.fading()?;
    let radio = cfg.radio()?;
    let sphere = cfg.sphere()?;
    let (lambda, ring) = cfg.ring()?;
    let n_t = cfg.n_t()?;
    let ks = cfg.k_list()?;
    let gammas_db = cfg.gammas_db()?;
    let gammas: Vec<f64> = gammas_db.iter().map(|&g| db_to_linear(g)).collect();
    let trials = check_trials(cfg)?;
    let allowance = cfg.run.allowance;
    if !(allowance >= 0.0 && allowance.is_finite()) {
        return Err(CliError::config(format!("run.allowance: must be >= 0, got {allowance}")));
    }
    let bins = cfg
        .run
        .delta
        .iter()
        .map(|&d| DeltaBin::new(d, cfg.run.bin_half_width))
        .collect::<leocov::Result<Vec<_>>>();
    let bins = lib("run.delta", bins)?;

    let mut t = Table::new(
        "validate",
        "",
        cfg,
        &["k", "delta", "gamma_db", "analytic", "mc", "mc_half_width", "conditioned_trials", "pass"],
    );
    let (mut failures, mut max_gap) = (0usize, 0.0f64);
    for &k in &ks {
        let budget = lib("network.k", radio.budget(n_t, k))?;
        let setup = lib(
            "network",
            McSetup::new(sphere, lambda, cfg.sample_mode(), budget, fading.clone(), k),
        )?;
        // one entry per (delta or marginal, gamma)
        let mut cases: Vec<(Option<f64>, Vec<leocov::montecarlo::McEstimate>, u64)> = Vec::new();
        if bins.is_empty() {
            let mc = lib("simulation", estimate_coverage(&setup, &gammas, trials, cfg.run.seed, None))?;
            cases.push((None, mc, trials));
        } else {
            let est = lib(
                "simulation",
                estimate_coverage_binned(&setup, &gammas, trials, cfg.run.seed, &bins),
            )?;
            for b in est.bins {
                if b.conditioned_trials < MIN_TRIALS {
                    return Err(CliError::config(format!(
                        "run.trials: only {} of {trials} trials fell within {} of delta = {}; need {MIN_TRIALS}",
                        b.conditioned_trials, b.bin.half_width, b.bin.center
                    )));
                }
                cases.push((Some(b.bin.center), b.composite, b.conditioned_trials));
            }
        }
        for (delta, mc, conditioned) in cases {
            let analytic = gammas
                .par_iter()
                .map(|&g| match delta {
                    Some(d) => coverage_cond_delta(&ring, &budget, &fading, k, d, g).map(|r| r.probability),
                    None => coverage_marginal(&ring, &budget, &fading, k, g).map(|r| r.probability),
                })
                .collect::<leocov::Result<Vec<f64>>>();
            let analytic = lib("coverage", analytic)?;
            for ((g_db, a), m) in gammas_db.iter().zip(&analytic).zip(&mc) {
                let pass = m.contains(*a, allowance);
                failures += usize::from(!pass);
                max_gap = max_gap.max((a - m.value).abs());
                t.row(&[
                    Cell::U(k as u64),
                    delta.map_or(Cell::Empty, Cell::F),
                    Cell::F(*g_db),
                    Cell::F(*a),
                    Cell::F(m.value),
                    Cell::F(m.half_width_95),
                    Cell::U(conditioned),
                    Cell::S(if pass { "pass" } else { "fail" }.into()),
                ]);
            }
        }
    }
    let summary = format!(
        "summary: points={} failures={failures} max_discrepancy={max_gap:?} allowance={allowance:?}",
        t.len()
    );
    t.trailer(summary.clone());
    Ok(ValidationReport {
        table: t,
        failures,
        max_discrepancy: max_gap,
        summary,
    })
}

pub fn optimal_k(cfg: &ExperimentConfig, densities: &[f64]) -> Result<Table, CliError> {
    if densities.is_empty() {
        return Err(CliError::config("densities: need at least one mean visible count"));
    }
    if let Some(bad) = densities.iter().find(|&&d| !(d > 0.0 && d.is_finite())) {
        return Err(CliError::config(format!("densities: must be positive, got {bad}")));
    }
    let fading = cfg.fading()?;
    let radio = cfg.radio()?;
    let sphere = cfg.sphere()?;
    let n_ts = cfg.n_t_list()?;
    let [lo, hi] = cfg.network.k_range.unwrap_or([1, u32::MAX]);
    if lo == 0 || lo > hi {
        return Err(CliError::config(format!("network.k_range: need 1 <= lo <= hi, got [{lo}, {hi}]")));
    }

    let list = densities.iter().map(|d| format!("{d:?}")).collect::<Vec<_>>().join(" ");
    let mut t = Table::new(
        "optimal-k",
        &format!("--densities {list}"),
        cfg,
        &["density", "n_t", "k_star", "ergodic_se_at_k_star"],
    );
    for &n_t in &n_ts {
        let k_hi = hi.min(n_t).min(leocov::distributions::MAX_CLUSTER_SIZE);
        if lo > k_hi {
            return Err(CliError::config(format!("network.k_range: lower end {lo} exceeds N_t = {n_t}")));
        }
        for &mu in densities {
            let ring = lib("densities", to_ring(&sphere, density_for_mean_visible(&sphere, mu)))?;
            let best = lib("optimal-k", optimal_cluster_size_in(&ring, &radio, &fading, n_t, lo, k_hi))?;
            t.row(&[Cell::F(mu), Cell::U(n_t as u64), Cell::U(best.k_star as u64), Cell::F(best.se_star)]);
            let per_k: Vec<String> = best
                .se_by_k
                .iter()
                .enumerate()
                .map(|(i, se)| format!("{}:{se:?}", best.k_min + i as u32))
                .collect();
            t.trailer(format!("se_by_k density={mu:?} n_t={n_t} {}", per_k.join(" ")));
        }
    }
    Ok(t)
}

pub fn dists(cfg: &ExperimentConfig, which: WhichDist, bins: usize) -> Result<Table, CliError> {
    if bins < 2 {
        return Err(CliError::config(format!("bins: need at least 2, got {bins}")));
    }
    let sphere = cfg.sphere()?;
    let (lambda, ring) = cfg.ring()?;
    let k = cfg.k()?;
    let trials = check_trials(cfg)?;
    let sampler = lib("network", ConstellationSampler::new(sphere, lambda, cfg.sample_mode()))?;

    // the nearest distance of an uncoordinated link is the K = 1, delta = 1 case of the K-th law
    let (k_law, delta0) = match which {
        WhichDist::Nearest if k == 1 => (1, 1.0),
        WhichDist::Kth => {
            let d = *cfg
                .run
                .delta
                .first()
                .ok_or_else(|| CliError::config("run.delta: kth needs a relative distance (or --delta)"))?;
            (k, d)
        }
        _ => (k, 1.0),
    };
    if which == WhichDist::Delta && k < 2 {
        return Err(CliError::config("network.k: the relative distance needs K >= 2"));
    }
    // validates delta0 against the geometry
    lib("run.delta", kth_pdf_given_many(&ring, k_law, delta0, ring.r_max()))?;

    let probe = DeltaBin::new(0.5, 0.01).expect("fixed bin");
    let samples = lib(
        "simulation",
        empirical_distance_stats(&sampler, k_law, delta0, probe, trials, cfg.run.seed),
    )?;
    let use_kth = which == WhichDist::Kth || k_law == 1;
    let (lo, hi, data) = match which {
        WhichDist::Delta => (ring.min_delta(), 1.0, &samples.delta_many),
        _ if use_kth => ((ring.r_min() / delta0).min(ring.r_max()), ring.r_max(), &samples.kth_many),
        _ => (ring.r_min(), ring.r_max(), &samples.nearest_few),
    };
    let pdf = |x: f64| -> leocov::Result<f64> {
        match which {
            WhichDist::Delta => delta_pdf(&ring, k, x),
            _ if use_kth => kth_pdf_given_many(&ring, k_law, delta0, x),
            _ => nearest_pdf_given_few(&ring, k, x),
        }
    };
    let cdf = |x: f64| -> f64 {
        let v = match which {
            WhichDist::Delta => delta_cdf(&ring, k, x),
            _ if use_kth => kth_ccdf_given_many(&ring, k_law, delta0, x).map(|c| 1.0 - c),
            _ => nearest_ccdf_given_few(&ring, k, x).map(|c| 1.0 - c),
        };
        v.unwrap_or(f64::NAN)
    };

    let hist = Histogram::uniform(lo, hi, bins).fill(data);
    let density = hist.density();
    let xs: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
    let pdfs = lib("dists", xs.iter().map(|&x| pdf(x)).collect::<leocov::Result<Vec<f64>>>())?;
    let trapezoid: f64 = xs.windows(2).zip(pdfs.windows(2)).map(|(x, p)| 0.5 * (x[1] - x[0]) * (p[0] + p[1])).sum();

    let name = match which {
        WhichDist::Nearest => "nearest",
        WhichDist::Kth => "kth",
        WhichDist::Delta => "delta",
    };
    let mut t = Table::new(
        "dists",
        &format!("--which {name} --bins {bins}"),
        cfg,
        &["x", "pdf", "mc_density"],
    );
    if data.is_empty() {
        t.note("no simulated samples met the conditioning event");
    } else {
        let chi = chi_square(&hist, cdf);
        t.note(format!(
            "chi_square: statistic={:?} dof={} p_value={:?}",
            chi.statistic, chi.dof, chi.p_value
        ));
    }
    t.note(format!("samples={} trials={trials}", data.len()));
    t.note(format!("pdf_trapezoid={trapezoid:?}"));
    for (i, (&x, &p)) in xs.iter().zip(&pdfs).enumerate() {
        let mc = if i < bins && !data.is_empty() { Cell::F(density[i]) } else { Cell::Empty };
        t.row(&[Cell::F(x), Cell::F(p), mc]);
    }
    Ok(t)
}

pub fn ergodic_se(cfg: &ExperimentConfig, with_mc: bool) -> Result<Table, CliError> {
    let fading = cfg.fading()?;
    let radio = cfg.radio()?;
    let sphere = cfg.sphere()?;
    let (lambda, ring) = cfg.ring()?;
    let n_t = cfg.n_t()?;
    let ks = cfg.k_list()?;
    let trials = if with_mc { check_trials(cfg)? } else { 0 };

    let rows = ks
        .par_iter()
        .map(|&k| -> Result<(u32, f64, Option<leocov::montecarlo::McEstimate>), CliError> {
            let budget = lib("network.k", radio.budget(n_t, k))?;
            let se = lib("ergodic-se", analytic_se(&ring, &budget, &fading, k))?;
            let mc = if with_mc {
                let setup = lib(
                    "network",
                    McSetup::new(sphere, lambda, cfg.sample_mode(), budget, fading.clone(), k),
                )?;
                Some(lib("simulation", estimate_ergodic_se(&setup, trials, cfg.run.seed))?)
            } else {
                None
            };
            Ok((k, se, mc))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut cols = vec!["k", "ergodic_se"];
    if with_mc {
        cols.extend(["mc_ergodic_se", "mc_half_width"]);
    }
    let mut t = Table::new("ergodic-se", if with_mc { "--mc" } else { "" }, cfg, &cols);
    for (k, se, mc) in rows {
        let mut cells = vec![Cell::U(k as u64), Cell::F(se)];
        if let Some(m) = mc {
            cells.extend([Cell::F(m.value), Cell::F(m.half_width_95)]);
        }
        t.row(&cells);
    }
    Ok(t)
}
