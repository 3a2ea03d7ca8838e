//! Sweeps, the duality benchmark, the feedback demo and the end-to-end run.
//!
//! Every task derives its seed from the base seed and its own indices, never
//! from a shared generator, so a row can be recomputed from its sweep value
//! and seed alone and results do not depend on thread scheduling.

use std::io::Write;
use std::time::Instant;

use aircomp_core::beamforming::mse_monte_carlo;
use aircomp_core::feedback::run_feedback_protocol;
use aircomp_core::multicast::{duality_instance, solve_centroid_multicast, solve_sdr};
use aircomp_core::nomographic::{end_to_end, FunctionResult};
use aircomp_core::random::{mix_seed, stream_rng};
use aircomp_core::{design, generate_channels, ChannelSet, FeedbackReport, NomographicFunction, SensorData};
use anyhow::{bail, ensure, Context, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;

pub const SCHEMA: &str = "# aircomp-results v1";
pub const HEADER: &str = "sweep,method,mse_mean,mse_se,eta_mean,wall_ms,seed";

/// Margin below which a multicast solution counts as infeasible.
pub const FEASIBILITY: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    L,
    Nr,
    K,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::L => "l",
            SweepVariable::Nr => "n_r",
            SweepVariable::K => "k",
        }
    }

    fn default_grid(self, cfg: &ExperimentConfig) -> Vec<usize> {
        match self {
            SweepVariable::L => (1..=cfg.nt.min(cfg.nr)).collect(),
            SweepVariable::Nr => vec![cfg.nr, cfg.nr + 4, cfg.nr + 8],
            SweepVariable::K => vec![cfg.k, 2 * cfg.k, 3 * cfg.k],
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig, v: usize) {
        match self {
            SweepVariable::L => cfg.l = v,
            SweepVariable::Nr => cfg.nr = v,
            SweepVariable::K => cfg.k = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep: f64,
    pub method: String,
    pub mse_mean: f64,
    pub mse_se: f64,
    pub eta_mean: f64,
    pub wall_ms: f64,
    pub seed: u64,
}

pub fn write_rows<W: Write>(mut w: W, rows: &[ResultRow]) -> std::io::Result<()> {
    writeln!(w, "{SCHEMA}")?;
    writeln!(w, "{HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{:e},{}",
            r.sweep, r.method, r.mse_mean, r.mse_se, r.eta_mean, r.wall_ms, r.seed
        )?;
    }
    Ok(())
}

/// Channels of draw `d`. Independent of the sweep value, so rows of a `K`
/// sweep share their first sensors.
pub fn draw_channels(cfg: &ExperimentConfig, draw: usize) -> Result<ChannelSet> {
    Ok(generate_channels(
        cfg.rician,
        cfg.k,
        cfg.nt,
        cfg.nr,
        mix_seed(cfg.seed, draw as u64),
    )?)
}

fn integer_grid(cfg: &ExperimentConfig, var: SweepVariable) -> Result<Vec<usize>> {
    match &cfg.grid {
        None => Ok(var.default_grid(cfg)),
        Some(g) => g
            .iter()
            .map(|&x| {
                ensure!(
                    x >= 1.0 && x.fract() == 0.0,
                    "{} grid value {x} is not a positive integer",
                    var.name()
                );
                Ok(x as usize)
            })
            .collect(),
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct DrawResult {
    analytic: f64,
    empirical: Option<f64>,
    eta: f64,
    wall_ms: f64,
}

/// Per grid point and method: analytic MSE averaged over draws, plus a
/// `<method>-mc` row with the Monte-Carlo estimate when `trials > 0`.
pub fn run_sweep(cfg: &ExperimentConfig, var: SweepVariable) -> Result<Vec<ResultRow>> {
    let grid = integer_grid(cfg, var)?;
    let points: Vec<ExperimentConfig> = grid
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            var.apply(&mut c, v);
            c.validate().with_context(|| format!("{} = {v}", var.name()))?;
            Ok(c)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (point, &value) in points.iter().zip(&grid) {
        let sigma2 = point.noise_variance();
        let per_draw: Vec<Vec<DrawResult>> = (0..point.draws)
            .into_par_iter()
            .map(|d| {
                let cs = draw_channels(point, d)?;
                point
                    .methods
                    .iter()
                    .enumerate()
                    .map(|(mi, &m)| {
                        let t = Instant::now();
                        let des = design(&cs, point.l, m, point.p0, sigma2)
                            .with_context(|| format!("{m} at {} = {value}, draw {d}", var.name()))?;
                        let wall_ms = t.elapsed().as_secs_f64() * 1e3;
                        let empirical = if point.trials > 0 {
                            let seed = mix_seed(mix_seed(point.seed, d as u64), 0x100 + mi as u64);
                            Some(mse_monte_carlo(&des, &cs, point.trials, seed)?.empirical)
                        } else {
                            None
                        };
                        Ok(DrawResult {
                            analytic: aircomp_core::beamforming::mse_analytic(&des),
                            empirical,
                            eta: des.receive.eta,
                            wall_ms,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        for (mi, m) in point.methods.iter().enumerate() {
            let col = |f: &dyn Fn(&DrawResult) -> f64| per_draw.iter().map(|r| f(&r[mi])).collect::<Vec<_>>();
            let (eta_mean, _) = mean_se(&col(&|r| r.eta));
            let wall_ms = if cfg.timing {
                mean_se(&col(&|r| r.wall_ms)).0
            } else {
                0.0
            };
            let (mse_mean, mse_se) = mean_se(&col(&|r| r.analytic));
            rows.push(ResultRow {
                sweep: value as f64,
                method: m.tag().to_string(),
                mse_mean,
                mse_se,
                eta_mean,
                wall_ms,
                seed: cfg.seed,
            });
            if point.trials > 0 {
                let (mse_mean, mse_se) = mean_se(&col(&|r| r.empirical.unwrap_or(f64::NAN)));
                rows.push(ResultRow {
                    sweep: value as f64,
                    method: format!("{}-mc", m.tag()),
                    mse_mean,
                    mse_se,
                    eta_mean,
                    wall_ms,
                    seed: cfg.seed,
                });
            }
        }
    }
    Ok(rows)
}

/// Centroid multicast vs ADMM-SDR on `N_t = 1` channels over an `N_r` grid
/// (default 4, 8, 16). Rows report `mse = σ_n²·power/P0` and `eta = power/P0`
/// for `centroid`, `sdr` and the relaxation bound `sdr-relaxation`.
pub fn run_duality_bench(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let grid = match &cfg.grid {
        None => vec![4, 8, 16],
        Some(_) => integer_grid(cfg, SweepVariable::Nr)?,
    };
    let points: Vec<ExperimentConfig> = grid
        .iter()
        .map(|&nr| {
            let mut c = cfg.clone();
            c.nt = 1;
            c.l = 1;
            c.nr = nr;
            c.validate().with_context(|| format!("n_r = {nr}"))?;
            Ok(c)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (point, &nr) in points.iter().zip(&grid) {
        let sigma2 = point.noise_variance();
        // (centroid power, centroid ms, sdr power, sdr ms, relaxation)
        let per_draw: Vec<[f64; 5]> = (0..point.draws)
            .into_par_iter()
            .map(|d| {
                let cs = draw_channels(point, d)?;
                let inst = duality_instance(&cs)?;
                let c = solve_centroid_multicast(&inst)?;
                let mut sdr_cfg = point.sdr;
                sdr_cfg.seed = mix_seed(mix_seed(point.seed, d as u64), 1);
                let s = solve_sdr(&inst, &sdr_cfg)?;
                for sol in [&c, &s] {
                    if sol.margin < FEASIBILITY {
                        bail!(
                            "{} infeasible at n_r = {nr}, draw {d}: margin {}",
                            sol.solver.tag(),
                            sol.margin
                        );
                    }
                }
                Ok([
                    c.power,
                    c.wall_time.as_secs_f64() * 1e3,
                    s.power,
                    s.wall_time.as_secs_f64() * 1e3,
                    s.relaxation.unwrap_or(f64::NAN),
                ])
            })
            .collect::<Result<_>>()?;
        let col = |i: usize| per_draw.iter().map(|r| r[i]).collect::<Vec<_>>();
        for (tag, power, ms) in [
            ("centroid", 0, Some(1)),
            ("sdr", 2, Some(3)),
            ("sdr-relaxation", 4, None),
        ] {
            let etas: Vec<f64> = col(power).iter().map(|p| p / point.p0).collect();
            let mses: Vec<f64> = etas.iter().map(|e| sigma2 * e).collect();
            let (mse_mean, mse_se) = mean_se(&mses);
            let wall_ms = match (cfg.timing, ms) {
                (true, Some(i)) => mean_se(&col(i)).0,
                _ => 0.0,
            };
            rows.push(ResultRow {
                sweep: nr as f64,
                method: tag.to_string(),
                mse_mean,
                mse_se,
                eta_mean: mean_se(&etas).0,
                wall_ms,
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

/// Both feedback phases on draw 0 of the configured channels.
pub fn run_feedback_demo(cfg: &ExperimentConfig) -> Result<FeedbackReport> {
    cfg.validate()?;
    let cs = draw_channels(cfg, 0)?;
    Ok(run_feedback_protocol(
        &cs,
        cfg.l,
        cfg.p0,
        cfg.eta_min,
        cfg.eta_max,
        cfg.rounds,
    )?)
}

pub fn write_feedback_report<W: Write>(mut w: W, r: &FeedbackReport, seed: u64) -> std::io::Result<()> {
    writeln!(w, "{SCHEMA}")?;
    writeln!(w, "metric,value")?;
    let clamped: Vec<String> = r.clamped.iter().map(|k| k.to_string()).collect();
    let entries: [(&str, String); 11] = [
        ("eta_estimate", format!("{:e}", r.eta_estimate)),
        ("eta_exact", format!("{:e}", r.eta_exact)),
        ("eta_error", format!("{:e}", r.eta_error())),
        ("error_bound", format!("{:e}", r.bound)),
        ("rounds", r.rounds.to_string()),
        ("slots_aircomp", r.slots_aircomp.to_string()),
        ("slots_conventional", r.slots_conventional.to_string()),
        ("subspace_distance", format!("{:e}", r.subspace_distance)),
        ("aggregate_error", format!("{:e}", r.aggregate_error)),
        ("clamped", clamped.join(";")),
        ("seed", seed.to_string()),
    ];
    for (k, v) in entries {
        writeln!(w, "{k},{v}")?;
    }
    Ok(())
}

/// Cycles through the five registry functions on positive data drawn from
/// `U(0.5, 2)`, standardized.
pub fn synthetic_sensor_data(cfg: &ExperimentConfig) -> Result<(SensorData, Vec<NomographicFunction>)> {
    let k = cfg.k;
    let tags = [
        "arithmetic-mean",
        "weighted-sum:0.5",
        "geometric-mean",
        "polynomial:2.5",
        "euclidean-norm",
    ];
    let funcs = (0..cfg.l)
        .map(|l| NomographicFunction::parse(tags[l % tags.len()], k))
        .collect::<aircomp_core::Result<Vec<_>>>()?;
    let mut rng = stream_rng(cfg.seed, 0xDA7A);
    let d = DMatrix::from_fn(k, cfg.l, |_, _| rng.random_range(0.5..2.0));
    let mut data = SensorData::new(d)?;
    data.standardize(&funcs)?;
    Ok((data, funcs))
}

/// One pass of the computation pipeline over draw 0 with the centroid design.
/// `data` overrides `K` and `L`.
pub fn run_e2e(
    cfg: &ExperimentConfig,
    data: Option<(SensorData, Vec<NomographicFunction>)>,
) -> Result<(Vec<NomographicFunction>, FunctionResult)> {
    let mut cfg = cfg.clone();
    let (data, funcs) = match data {
        Some((mut data, funcs)) => {
            cfg.k = data.k();
            cfg.l = data.l();
            cfg.validate().context("sensor data does not fit the configuration")?;
            data.standardize(&funcs)?;
            (data, funcs)
        }
        None => {
            cfg.validate()?;
            synthetic_sensor_data(&cfg)?
        }
    };
    let cs = draw_channels(&cfg, 0)?;
    let sigma2 = cfg.noise_variance();
    let des = design(&cs, cfg.l, aircomp_core::ReceiveMethod::Centroid, cfg.p0, sigma2)?;
    let result = end_to_end(&data, &funcs, &des, &cs, sigma2, mix_seed(cfg.seed, 0xE2E))?;
    Ok((funcs, result))
}

pub fn write_e2e<W: Write>(mut w: W, funcs: &[NomographicFunction], r: &FunctionResult) -> std::io::Result<()> {
    writeln!(w, "{SCHEMA}")?;
    writeln!(w, "function,computed,exact,abs_error,rel_error")?;
    for (i, f) in funcs.iter().enumerate() {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e}",
            f.name(),
            r.computed[i],
            r.exact[i],
            r.abs_error()[i],
            r.rel_error()[i]
        )?;
    }
    Ok(())
}
