//! Experiment execution: N replicates per ladder cell in parallel over
//! disjoint streams, deterministic aggregation, verdict suites per
//! experiment kind.
//!
//! Reproducibility: replicate r of batch b in cell c always uses the stream
//! (master_seed, class, (c * 8 + b) << 32 | r). Results are collected into
//! an index-ordered vector and folded sequentially, so worker count and
//! scheduling never change a single bit of the output.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::limit_laws::{sample_limit_thm12, sample_limit_thm31, SpaceAverageRegime};
use crate::local_time::{
    epsilon_floor, expected_delta_functional, expected_local_time,
    expected_local_time_mollified, local_time_second_moment_oracle, LocalTimeEstimator,
};
use crate::phi::PhiSpec;
use crate::rng::{Stream, StreamClass};
use crate::sheet::SheetSample;
use crate::solver::{
    chaos_variance_oracle, mild_variance_oracle, simulate_nonlinear, ChaosSimulator,
    WalshSimulator,
};
use crate::stats::{ks_distance, rate_fit, BatchLineage, McBatch, RateFit};
use crate::weights::KernelShape;

use super::config::{Coupling, ExperimentConfig, ExperimentKind, Tolerances};
use super::record::{CellResult, ResultRecord, Verdict};

/// Parallel Monte Carlo batch over disjoint replicate streams with a
/// deterministic fold.
pub fn mc_batch<F>(
    label: &str,
    master_seed: u64,
    class: StreamClass,
    first_replicate: u64,
    n: usize,
    f: F,
) -> Result<McBatch>
where
    F: Fn(&mut Stream) -> Result<f64> + Sync,
{
    let values: Result<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut stream = Stream::new(master_seed, class, first_replicate + i);
            f(&mut stream)
        })
        .collect();
    McBatch::new(
        label,
        values?,
        Some(BatchLineage { master_seed, class, first_replicate, count: n as u64 }),
    )
}

fn batch_base(cell: usize, role: usize) -> u64 {
    ((cell * 8 + role) as u64) << 32
}

/// Run one configured experiment and persist the record to
/// `<out_dir>/record.json`.
pub fn run(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let start = Instant::now();
    let body = || dispatch(config);
    let outcome = if config.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Record(format!("thread pool: {e}")))?;
        pool.install(body)
    } else {
        body()
    };
    let (cells, verdicts, rate_fits, incomplete) = outcome?;
    let record = ResultRecord {
        experiment: config.experiment.name().to_string(),
        claim: config.experiment.claim().to_string(),
        config_digest: config.digest(),
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: config.master_seed,
        cells,
        verdicts,
        rate_fits,
        wall_clock_s: start.elapsed().as_secs_f64(),
        incomplete,
    };
    record.save(&config.out_dir.join("record.json"))?;
    Ok(record)
}

type Outcome = (Vec<CellResult>, Vec<Verdict>, Vec<RateFit>, bool);

fn dispatch(config: &ExperimentConfig) -> Result<Outcome> {
    match config.experiment {
        ExperimentKind::VarianceCheck => variance_check(config),
        ExperimentKind::ScalingIdentity => scaling_identity(config),
        ExperimentKind::Thm12 => thm12(config),
        ExperimentKind::Thm13 => thm13(config),
        ExperimentKind::Thm31 => thm31(config),
        ExperimentKind::Thm32 => thm32(config),
        ExperimentKind::ChaosRates => chaos_rates(config),
        ExperimentKind::Lemma21Cauchy => lemma21_cauchy(config),
        ExperimentKind::NonlinearRateProbe => nonlinear_rate_probe(config),
    }
}

fn sigma(tol: &Tolerances) -> f64 {
    tol.sigma_multiplier
}

fn variance_check(config: &ExperimentConfig) -> Result<Outcome> {
    let phi = config.phi.to_phi()?;
    let grid = config.grid.to_grid()?;
    let tol = config.tolerances();
    let mut cells = Vec::new();
    let mut incomplete = false;
    for (ci, &t) in config.ladder.t.iter().enumerate() {
        let sim = WalshSimulator::mild(phi.clone(), t, config.x_eval, grid)?;
        let cell = match mc_batch(
            &format!("mild t={t}"),
            config.master_seed,
            StreamClass::Driving,
            batch_base(ci, 0),
            config.replicates,
            |s| Ok(sim.sample(s)),
        ) {
            Ok(batch) => {
                let oracle = mild_variance_oracle(&phi, t, config.x_eval, 1e-7);
                let verdicts = vec![
                    Verdict::check(
                        "variance",
                        batch.variance,
                        oracle,
                        sigma(&tol) * batch.variance_se(),
                        "variance law / quadrature oracle",
                    ),
                    Verdict::check(
                        "mean_zero",
                        batch.mean,
                        0.0,
                        sigma(&tol) * batch.stderr,
                        "martingale mean",
                    ),
                ];
                CellResult { t, radius: None, batch: Some(batch.summary()), verdicts, complete: true }
            }
            Err(e) => {
                incomplete = true;
                CellResult {
                    t,
                    radius: None,
                    batch: None,
                    verdicts: vec![Verdict::info("error", f64::NAN, f64::NAN, e.to_string())],
                    complete: false,
                }
            }
        };
        cells.push(cell);
    }
    Ok((cells, Vec::new(), Vec::new(), incomplete))
}

fn scaling_identity(config: &ExperimentConfig) -> Result<Outcome> {
    let phi = config.phi.to_phi()?;
    let grid = config.grid.to_grid()?;
    let tol = config.tolerances();
    let mut cells = Vec::new();
    for (ci, &t) in config.ladder.t.iter().enumerate() {
        let mild = WalshSimulator::mild(phi.clone(), t, config.x_eval, grid)?;
        let resc = WalshSimulator::rescaled(phi.clone(), t, config.x_eval, grid)?;
        let a = mc_batch(
            &format!("mild t={t}"),
            config.master_seed,
            StreamClass::Driving,
            batch_base(ci, 0),
            config.replicates,
            |s| Ok(mild.sample(s)),
        )?;
        let b = mc_batch(
            &format!("rescaled t={t}"),
            config.master_seed,
            StreamClass::Driving,
            batch_base(ci, 1),
            config.replicates,
            |s| Ok(resc.sample(s)),
        )?;
        let (_, p) = ks_distance(&a, &b);
        let verdicts = vec![Verdict::above(
            "ks_p_value",
            p,
            tol.p_threshold,
            "two-sample KS, mild vs rescaled",
        )];
        cells.push(CellResult {
            t,
            radius: None,
            batch: Some(a.summary()),
            verdicts,
            complete: true,
        });
        cells.push(CellResult {
            t,
            radius: None,
            batch: Some(b.summary()),
            verdicts: Vec::new(),
            complete: true,
        });
    }
    Ok((cells, Vec::new(), Vec::new(), false))
}

/// Conditioning functional for the stable test: exp(i mu W(t0, 1)) with
/// t0 = 1, read from the same sheet driving the statistic. On the rescaled
/// grid, W(1, 1) = sqrt(t) B(1/t, 1); when 1/t falls below the first node
/// the value is completed by the exact two-parameter bridge given the first
/// row (conditional mean (s*/s1) B(s1, 1), variance s*(1 - s*/s1)).
fn early_window_value(sheet: &SheetSample, t: f64, stream: &mut Stream) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    let grid = sheet.grid;
    let ds = grid.ds();
    let s_star = (1.0 / t).min(1.0);
    let kn_one = ((1.0 + grid.y_max) / grid.dy()).round() as usize;
    let i1 = ((s_star / ds).ceil() as usize).clamp(1, grid.n_time);
    let s1 = i1 as f64 * ds;
    let b1 = sheet.value(i1, kn_one.min(grid.space_nodes() - 1));
    let mean = (s_star / s1) * b1;
    let var = s_star * (1.0 - s_star / s1);
    let z: f64 = StandardNormal.sample(&mut stream.rng);
    t.sqrt() * (mean + var.max(0.0).sqrt() * z)
}

fn thm12(config: &ExperimentConfig) -> Result<Outcome> {
    let phi = config.phi.to_phi()?;
    let (alpha, c_plus, c_minus) = match phi {
        PhiSpec::HomogeneousPower { alpha, c_plus, c_minus } => (alpha, c_plus, c_minus),
        PhiSpec::Constant(c) => (0.0, c, c),
        other => {
            return Err(Error::Config(vec![format!(
                "thm12 needs a homogeneous-type phi, got {other:?}"
            )]))
        }
    };
    let grid = config.grid.to_grid()?;
    let tol = config.tolerances();
    let exponent = (3.0 * alpha + 1.0) / 4.0;
    let mut cells = Vec::new();
    let mut sd_ladder = Vec::new();
    for (ci, &t) in config.ladder.t.iter().enumerate() {
        let sim = WalshSimulator::rescaled(phi.clone(), t, config.x_eval, grid)?;
        let batch = mc_batch(
            &format!("rescaled t={t}"),
            config.master_seed,
            StreamClass::Driving,
            batch_base(ci, 0),
            config.replicates,
            |s| Ok(sim.sample(s)),
        )?;
        sd_ladder.push((t, batch.sd()));
        cells.push(CellResult {
            t,
            radius: None,
            batch: Some(batch.summary()),
            verdicts: Vec::new(),
            complete: true,
        });
    }
    let fit = rate_fit(&sd_ladder)?;
    let mut verdicts = vec![Verdict::check(
        "rate_exponent",
        fit.exponent,
        exponent,
        tol.exponent_window,
        "normalizer (3a+1)/4",
    )];

    // Final-cell comparison against the limit sampler.
    let &t_last = config.ladder.t.last().unwrap();
    let n_cells = config.ladder.t.len();
    let limit = mc_batch(
        "limit",
        config.master_seed,
        StreamClass::Limit,
        batch_base(n_cells, 1),
        config.replicates,
        |s| sample_limit_thm12(alpha, c_plus, c_minus, grid, s),
    )?;
    let sim_last = WalshSimulator::rescaled(phi.clone(), t_last, config.x_eval, grid)?;
    let norm = t_last.powf(-exponent);
    let normalized = mc_batch(
        "normalized final",
        config.master_seed,
        StreamClass::Driving,
        batch_base(n_cells, 0),
        config.replicates,
        |s| Ok(norm * sim_last.sample(s)),
    )?;
    let combined =
        (normalized.sd_se().powi(2) + limit.sd_se().powi(2)).sqrt();
    verdicts.push(Verdict::check(
        "normalized_sd_vs_limit",
        normalized.sd(),
        limit.sd(),
        sigma(&tol) * combined,
        "limit sampler",
    ));

    if alpha == 0.0 && c_plus == c_minus {
        // Gaussian limit: KS against N(0, c^2/sqrt(pi)) and the
        // characteristic-function factorization test.
        let var_oracle = c_plus * c_plus / std::f64::consts::PI.sqrt();
        let reference = mc_batch(
            "gaussian reference",
            config.master_seed,
            StreamClass::Reference,
            batch_base(n_cells, 2),
            config.replicates,
            |s| {
                use rand_distr::{Distribution, StandardNormal};
                let z: f64 = StandardNormal.sample(&mut s.rng);
                Ok(var_oracle.sqrt() * z)
            },
        )?;
        let (_, p) = ks_distance(&normalized, &reference);
        verdicts.push(Verdict::above("ks_vs_gaussian_limit", p, tol.p_threshold, "KS vs N(0, c^2/sqrt(pi))"));

        let joint: Result<Vec<(num_complex::Complex64, f64)>> = (0..config.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut stream =
                    Stream::new(config.master_seed, StreamClass::Driving, batch_base(n_cells, 3) + r);
                let sheet = SheetSample::draw(grid, &mut stream.rng, stream.lineage);
                let f = norm * sim_last.sample_on(&sheet, &mut stream.rng);
                let w = early_window_value(&sheet, t_last, &mut stream);
                let (s, c) = w.sin_cos();
                Ok((num_complex::Complex64::new(c, s), f))
            })
            .collect();
        let report = crate::stats::stable_test(
            &joint?,
            &limit,
            &crate::stats::default_lambda_grid(),
            config.master_seed,
        )?;
        verdicts.push(Verdict::check(
            "stable_factorization_gap",
            report.max_abs_gap,
            0.0,
            3.0 * report.mc_error_bound,
            "cf factorization <= 3x bootstrap error",
        ));
    }
    Ok((cells, verdicts, vec![fit], false))
}

fn thm13(config: &ExperimentConfig) -> Result<Outcome> {
    let phi = config.phi.to_phi()?;
    let l2 = phi.l2_norm_sq().ok_or_else(|| {
        Error::Config(vec!["thm13 needs phi with a finite L2 norm".into()])
    })?;
    let grid = config.grid.to_grid()?;
    let tol = config.tolerances();
    let mut cells = Vec::new();
    let mut sd_ladder = Vec::new();
    let mut last_batch: Option<McBatch> = None;
    for (ci, &t) in config.ladder.t.iter().enumerate() {
        let sim = WalshSimulator::rescaled(phi.clone(), t, config.x_eval, grid)?;
        let batch = mc_batch(
            &format!("rescaled t={t}"),
            config.master_seed,
            StreamClass::Driving,
            batch_base(ci, 0),
            config.replicates,
            |s| Ok(sim.sample(s)),
        )?;
        sd_ladder.push((t, batch.sd()));
        cells.push(CellResult {
            t,
            radius: None,
            batch: Some(batch.summary()),
            verdicts: Vec::new(),
            complete: true,
        });
        last_batch = Some(batch);
    }
    let fit = rate_fit(&sd_ladder)?;
    let mut verdicts = vec![Verdict::check(
        "rate_exponent",
        fit.exponent,
        -0.125,
        tol.exponent_window,
        "normalizer t^{1/8}",
    )];
    let &t_last = config.ladder.t.last().unwrap();
    let last = last_batch.unwrap();
    let el = expected_local_time(1.0)?;
    let scale = t_last.powf(0.25); // Var(t^{1/8} u) = t^{1/4} Var(u)
    let observed_var = scale * last.variance;
    verdicts.push(Verdict::check(
        "normalized_variance",
        observed_var,
        l2 * el,
        sigma(&tol) * scale * last.variance_se(),
        "||phi||^2 E[L] quadrature oracle",
    ));
    let el2 = local_time_second_moment_oracle();
    let m4 = last.raw_moment(4) * t_last.sqrt();
    let m4_se = last.raw_moment_se(4) * t_last.sqrt();
    verdicts.push(Verdict::check(
        "normalized_fourth_moment",
        m4,
        3.0 * l2 * l2 * el2,
        sigma(&tol) * m4_se,
        "3 ||phi||^4 E[L^2] second-moment oracle",
    ));
    Ok((cells, verdicts, vec![fit], false))
}

fn regime_for(coupling: Coupling, c: f64) -> Result<SpaceAverageRegime> {
    match coupling {
        Coupling::CSqrtT => Ok(SpaceAverageRegime::Comparable { c }),
        Coupling::TQuarter => Ok(SpaceAverageRegime::Narrow),
        Coupling::LinearT => Ok(SpaceAverageRegime::Wide),
        Coupling::None => Err(Error::Config(vec!["space-average run needs a coupling".into()])),
    }
}

/// Normalizer exponents: value * t^{-a} * R^{-b} is compared to the limit.
fn thm31_normalizer(regime: SpaceAverageRegime, alpha: f64) -> (f64, f64) {
    match regime {
        SpaceAverageRegime::Comparable { .. } => (0.75 * (alpha + 1.0), 0.0),
        SpaceAverageRegime::Narrow => ((3.0 * alpha + 1.0) / 4.0, 1.0),
        SpaceAverageRegime::Wide => (0.5 * (alpha + 1.0), 0.5 * (alpha + 1.0)),
    }
}

fn thm31(config: &ExperimentConfig) -> Result<Outcome> {
    let phi = config.phi.to_phi()?;
    let alpha = match phi {
        PhiSpec::HomogeneousPower { alpha, c_plus, c_minus }
            if c_plus == 1.0 && c_minus == 1.0 =>
        {
            alpha
        }
        other => {
            return Err(Error::Config(vec![format!(
                "thm31 needs phi = |x|^alpha, got {other:?}"
            )]))
        }
    };
    let grid = config.grid.to_grid()?;
    let tol = config.tolerances();
    let regime = regime_for(config.ladder.coupling, config.ladder.c)?;
    let (t_exp, r_exp) = thm31_normalizer(regime, alpha);

    let mut cells = Vec::new();
    let mut sd_ladder = Vec::new();
    let mut last: Option<(McBatch, f64)> = None;
    for (ci, &t) in config.ladder.t.iter().enumerate() {
        let radius = config.ladder.coupling.radius(config.ladder.c, t).unwrap();
        let sim = WalshSimulator::space_average(phi.clone(), t, radius, grid)?;
        let batch = mc_batch(
            &format!("space avg t={t} R={radius}"),
            config.master_seed,
            StreamClass::Driving,
            batch_base(ci, 0),
            config.replicates,
            |s| Ok(sim.sample(s)),
        )?;
        sd_ladder.push((t, batch.sd()));
        cells.push(CellResult {
            t,
            radius: Some(radius),
            batch: Some(batch.summary()),
            verdicts: Vec::new(),
            complete: true,
        });
        let norm = t.powf(-t_exp) * radius.powf(-r_exp);
        last = Some((batch, norm));
    }
    let fit = rate_fit(&sd_ladder)?;
    // d log sd / d log t along the coupling.
    let growth = match regime {
        SpaceAverageRegime::Comparable { .. } => t_exp,
        SpaceAverageRegime::Narrow => t_exp + 0.25,
        SpaceAverageRegime::Wide => t_exp + r_exp,
    };
    let mut verdicts = vec![Verdict::check(
        "rate_exponent",
        fit.exponent,
        growth,
        tol.exponent_window,
        "stated normalizer growth",
    )];

    // Normalized final cell against the regime limit sampler.
    let limit_grid = limit_grid_for(regime, &config.grid)?;
    let n_cells = config.ladder.t.len();
    let limit = mc_batch(
        "limit",
        config.master_seed,
        StreamClass::Limit,
        batch_base(n_cells, 1),
        config.replicates,
        |s| sample_limit_thm31(regime, alpha, limit_grid, s),
    )?;
    let (batch, norm) = last.unwrap();
    let combined =
        ((norm * batch.sd_se()).powi(2) + limit.sd_se().powi(2)).sqrt();
    verdicts.push(Verdict::check(
        "normalized_sd_vs_limit",
        norm * batch.sd(),
        limit.sd(),
        sigma(&tol) * combined,
        "regime limit sampler",
    ));
    Ok((cells, verdicts, vec![fit], false))
}

fn limit_grid_for(regime: SpaceAverageRegime, base: &super::config::GridConfig) -> Result<GridSpec> {
    let y_max = match regime {
        SpaceAverageRegime::Comparable { c } => c + 6.5,
        SpaceAverageRegime::Narrow => 6.5,
        SpaceAverageRegime::Wide => 1.25,
    };
    GridSpec::new(base.n_time, base.n_space, y_max)
}

fn thm32_normalizer(regime: SpaceAverageRegime) -> (f64, f64) {
    match regime {
        // t^{-3/8}
        SpaceAverageRegime::Comparable { .. } => (0.375, 0.0),
        // R^{-1} t^{1/2}
        SpaceAverageRegime::Narrow => (-0.5, 1.0),
        // R^{-1/2} t^{1/4}
        SpaceAverageRegime::Wide => (-0.25, 0.5),
    }
}

fn thm32(config: &ExperimentConfig) -> Result<Outcome> {
    let phi = config.phi.to_phi()?;
    let l2 = phi.l2_norm_sq().ok_or_else(|| {
        Error::Config(vec!["thm32 needs phi with a finite L2 norm".into()])
    })?;
    let grid = config.grid.to_grid()?;
    let tol = config.tolerances();
    let regime = regime_for(config.ladder.coupling, config.ladder.c)?;
    let (t_exp, r_exp) = thm32_normalizer(regime);

    let mut cells = Vec::new();
    let mut sd_ladder = Vec::new();
    let mut last: Option<(McBatch, f64, f64)> = None;
    for (ci, &t) in config.ladder.t.iter().enumerate() {
        let radius = config.ladder.coupling.radius(config.ladder.c, t).unwrap();
        let sim = WalshSimulator::space_average(phi.clone(), t, radius, grid)?;
        let batch = mc_batch(
            &format!("space avg t={t} R={radius}"),
            config.master_seed,
            StreamClass::Driving,
            batch_base(ci, 0),
            config.replicates,
            |s| Ok(sim.sample(s)),
        )?;
        sd_ladder.push((t, batch.sd()));
        cells.push(CellResult {
            t,
            radius: Some(radius),
            batch: Some(batch.summary()),
            verdicts: Vec::new(),
            complete: true,
        });
        let norm = t.powf(-t_exp) * radius.powf(-r_exp);
        last = Some((batch, norm, t));
    }
    let fit = rate_fit(&sd_ladder)?;
    let growth = match regime {
        SpaceAverageRegime::Comparable { .. } => t_exp,
        SpaceAverageRegime::Narrow => t_exp + 0.25,
        SpaceAverageRegime::Wide => t_exp + r_exp,
    };
    let mut verdicts = vec![Verdict::check(
        "rate_exponent",
        fit.exponent,
        growth,
        tol.exponent_window,
        "stated normalizer growth",
    )];

    let (batch, norm, t_last) = last.unwrap();
    let target = match regime {
        SpaceAverageRegime::Comparable { c } => {
            l2 * expected_delta_functional(
                KernelShape::Window { half_width: c, time_scale: 1.0 },
                0.0,
                0.0,
                1e-6,
            )
        }
        SpaceAverageRegime::Narrow => 2.0 * l2 * expected_local_time(1.0)?,
        SpaceAverageRegime::Wide => {
            2.0 * l2
                * expected_delta_functional(
                    KernelShape::Heat { time_scale: 1.0, center: 0.0, y_clip: Some(1.0) },
                    0.0,
                    0.0,
                    1e-6,
                )
        }
    };
    let observed = norm * norm * batch.variance;
    verdicts.push(Verdict::check(
        "normalized_variance",
        observed,
        target,
        sigma(&tol) * norm * norm * batch.variance_se(),
        "stated limit variance",
    ));
    if matches!(regime, SpaceAverageRegime::Narrow) {
        // Diagnostic: the corrected normalization R^{-1} t^{1/8} against the
        // window-collapse variance 4 ||phi||^2 E[L].
        let radius = config.ladder.coupling.radius(config.ladder.c, t_last).unwrap();
        let corrected = (t_last.powf(0.125) / radius).powi(2) * batch.variance;
        verdicts.push(Verdict::info(
            "diagnostic_corrected_normalization",
            corrected,
            4.0 * l2 * expected_local_time(1.0)?,
            "R^{-1} t^{1/8} normalizer, 4 ||phi||^2 E[L]",
        ));
    }
    Ok((cells, verdicts, vec![fit], false))
}

fn chaos_rates(config: &ExperimentConfig) -> Result<Outcome> {
    let grid = config.grid.to_grid()?;
    let tol = config.tolerances();
    let orders = config.chaos_orders.clone().unwrap_or_else(|| vec![1, 2]);
    let mut cells = Vec::new();
    let mut verdicts = Vec::new();
    let mut fits = Vec::new();
    for (oi, &n) in orders.iter().enumerate() {
        let m_unit = chaos_variance_oracle(n, 1e-7);
        let mut sd_ladder = Vec::new();
        for (ci, &t) in config.ladder.t.iter().enumerate() {
            let sim = ChaosSimulator::new(n, t, config.x_eval, grid)?;
            let batch = mc_batch(
                &format!("chaos n={n} t={t}"),
                config.master_seed,
                StreamClass::Driving,
                batch_base(oi * config.ladder.t.len() + ci, 0),
                config.replicates,
                |s| Ok(sim.sample(s).value),
            )?;
            let target = t.powf(1.5 * n as f64) * m_unit;
            let verdicts_cell = vec![Verdict::check(
                "variance",
                batch.variance,
                target,
                sigma(&tol) * batch.variance_se(),
                "nested quadrature oracle",
            )];
            sd_ladder.push((t, batch.sd()));
            cells.push(CellResult {
                t,
                radius: None,
                batch: Some(batch.summary()),
                verdicts: verdicts_cell,
                complete: true,
            });
        }
        let fit = rate_fit(&sd_ladder)?;
        verdicts.push(Verdict::check(
            format!("rate_exponent_order_{n}"),
            fit.exponent,
            0.75 * n as f64,
            tol.exponent_window,
            "per-chaos normalizer 3n/4",
        ));
        fits.push(fit);
    }
    Ok((cells, verdicts, fits, false))
}

fn lemma21_cauchy(config: &ExperimentConfig) -> Result<Outcome> {
    let grid = config.grid.to_grid()?;
    let tol = config.tolerances();
    let ladder: Vec<f64> =
        config.epsilon_ladder.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05]);
    if ladder.windows(2).any(|w| w[1] >= w[0]) || ladder.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Config(vec!["epsilon ladder must be positive and decreasing".into()]));
    }
    let floor = epsilon_floor(&grid);
    let est = LocalTimeEstimator::new(grid);
    let cauchy_n = config.replicates.min(1000).max(100);

    // Pathwise L2 differences on common sheets for the Cauchy property.
    let per_sheet: Result<Vec<Vec<f64>>> = (0..cauchy_n as u64)
        .into_par_iter()
        .map(|r| {
            let mut stream = Stream::new(config.master_seed, StreamClass::Driving, r);
            let sheet = SheetSample::draw(grid, &mut stream.rng, stream.lineage);
            ladder
                .iter()
                .map(|&eps| {
                    let a = est.weighted_local_time(&sheet, eps, 1.0)?.value;
                    let b = est.weighted_local_time(&sheet, eps * 0.5, 1.0)?.value;
                    Ok((a - b) * (a - b))
                })
                .collect()
        })
        .collect();
    let per_sheet = per_sheet?;
    let l2_diffs: Vec<f64> = (0..ladder.len())
        .map(|j| {
            (per_sheet.iter().map(|row| row[j]).sum::<f64>() / cauchy_n as f64).sqrt()
        })
        .collect();

    let mut verdicts = Vec::new();
    for j in 1..ladder.len() {
        verdicts.push(Verdict::above(
            format!("l2_diff_decreases_{}_{}", ladder[j - 1], ladder[j]),
            l2_diffs[j - 1] - l2_diffs[j],
            0.0,
            "Cauchy decay on common sheets",
        ));
    }
    for (j, &eps) in ladder.iter().enumerate() {
        verdicts.push(Verdict::info(
            format!("l2_diff_eps_{eps}"),
            l2_diffs[j],
            0.0,
            format!("||L^eps - L^eps/2||, grid floor {floor:.4}"),
        ));
    }

    // Monte Carlo mean of the finest ladder entry against the smoothed
    // envelope oracle.
    let eps_last = *ladder.last().unwrap();
    let batch = mc_batch(
        &format!("local time eps={eps_last}"),
        config.master_seed,
        StreamClass::Driving,
        1 << 32,
        config.replicates,
        |s| {
            let sheet = SheetSample::draw(grid, &mut s.rng, s.lineage);
            Ok(est.weighted_local_time(&sheet, eps_last, 1.0)?.value)
        },
    )?;
    let oracle = expected_local_time_mollified(1.0, eps_last)?;
    verdicts.push(Verdict::check(
        "mean_vs_mollified_oracle",
        batch.mean,
        oracle,
        sigma(&tol) * batch.stderr,
        "smoothed-envelope quadrature",
    ));
    let cells = vec![CellResult {
        t: eps_last,
        radius: None,
        batch: Some(batch.summary()),
        verdicts: Vec::new(),
        complete: true,
    }];
    Ok((cells, verdicts, Vec::new(), false))
}

fn nonlinear_rate_probe(config: &ExperimentConfig) -> Result<Outcome> {
    let sigma_fn = config.phi.to_phi()?;
    let tol = config.tolerances();
    let mut cells = Vec::new();
    let mut sd_ladder = Vec::new();
    for (ci, &t) in config.ladder.t.iter().enumerate() {
        // Physical truncation must cover the horizon.
        let y_max = GridSpec::recommended_y_max(config.x_eval, t) + 2.0;
        let grid = GridSpec::new(config.grid.n_time, config.grid.n_space, y_max)?;
        let sigma_fn = sigma_fn.clone();
        let batch = mc_batch(
            &format!("nonlinear t={t}"),
            config.master_seed,
            StreamClass::Driving,
            batch_base(ci, 0),
            config.replicates,
            move |s| Ok(simulate_nonlinear(sigma_fn.clone(), t, config.x_eval, grid, s)? - 1.0),
        )?;
        sd_ladder.push((t, batch.sd()));
        cells.push(CellResult {
            t,
            radius: None,
            batch: Some(batch.summary()),
            verdicts: Vec::new(),
            complete: true,
        });
    }
    let fit = rate_fit(&sd_ladder)?;
    // EXPLORATORY: recorded against the conjectured 1/6, never pass/fail.
    let verdicts = vec![Verdict::info(
        "EXPLORATORY_fitted_exponent",
        fit.exponent,
        1.0 / 6.0,
        "conjectured normalization t^{1/6}; record only",
    )];
    let _ = tol;
    Ok((cells, verdicts, vec![fit], false))
}
