//! Scans over the number of amplifier units, exponential decay fits and
//! extrapolation toward large n.

use std::time::Instant;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::born::{born_from, check_born_span, measure_trajectory, COL_OVERLAP};
use crate::dynamics::{time_average, uniform_times, EvolutionConfig};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// r² below which an exponential fit is not trusted for extrapolation.
pub const MIN_FIT_R2: f64 = 0.9;

#[derive(Clone, Debug)]
pub struct ScanPlan {
    pub template: ModelSpec,
    pub n_list: Vec<usize>,
    pub c0: C64,
    pub c1: C64,
    pub theta: f64,
    pub t_max: f64,
    pub cfg: EvolutionConfig,
    pub seeds: Vec<u64>,
    pub max_tail_variation: f64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

/// One trajectory of the scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub n: usize,
    pub seed: u64,
    /// NaN when a branch is absent.
    pub time_avg_d: f64,
    pub p_hat: f64,
    pub abs_error: f64,
    pub mixture_distance: f64,
    /// Larger of the tail variations of the two time averages.
    pub tail_variation: f64,
    pub converged: bool,
    pub wall_time_s: f64,
}

/// Medians across seeds at one n, over converged rows only.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanSummary {
    pub n: usize,
    pub time_avg_d: f64,
    pub p_hat: f64,
    pub abs_error: f64,
    pub mixture_distance: f64,
    pub used: usize,
    pub flagged: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// d ln(value) / dn.
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub rate_stderr: f64,
    /// Standard deviation of the log residuals.
    pub residual_std: f64,
    pub points: usize,
    pub n_max: f64,
}

impl DecayFit {
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.rate * n).exp()
    }
}

#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub target: f64,
    pub theta: f64,
    /// Sorted by n, then seed.
    pub rows: Vec<ScanRow>,
    pub summary: Vec<ScanSummary>,
    /// Fit of the median time-averaged overlap against n, or why there is none.
    pub fit: std::result::Result<DecayFit, String>,
}

impl ScalingReport {
    pub fn flagged(&self) -> impl Iterator<Item = &ScanRow> {
        self.rows.iter().filter(|r| !r.converged)
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn scan_row(plan: &ScanPlan, n: usize, seed: u64) -> Result<ScanRow> {
    let start = Instant::now();
    let spec = plan.template.with_units(n)?.with_seed(seed)?;
    let times = uniform_times(plan.t_max, plan.cfg.dt);
    let series = measure_trajectory(&spec, plan.c0, plan.c1, plan.theta, &times, &plan.cfg)?;
    let born = born_from(
        &series,
        &spec,
        plan.c0,
        plan.c1,
        plan.theta,
        plan.max_tail_variation,
    )?;
    let (time_avg_d, d_tail) = match born.time_avg_d {
        Some(_) => {
            let avg = time_average(&series, COL_OVERLAP)?;
            (avg.mean, avg.tail_variation)
        }
        None => (f64::NAN, 0.0),
    };
    let tail_variation = born.tail_variation.max(d_tail);
    Ok(ScanRow {
        n,
        seed,
        time_avg_d,
        p_hat: born.p_hat,
        abs_error: born.abs_error,
        mixture_distance: born.mixture_distance(),
        tail_variation,
        converged: tail_variation <= plan.max_tail_variation,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn scan_n(plan: &ScanPlan) -> Result<ScalingReport> {
    let mut n_list = plan.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    if n_list.len() < 3 {
        return Err(Error::InsufficientPoints {
            got: n_list.len(),
            need: 3,
        });
    }
    if plan.seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    for &n in &n_list {
        check_born_span(&plan.template.with_units(n)?, plan.t_max)?;
    }
    let mut seeds = plan.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let jobs: Vec<(usize, u64)> = n_list
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let run = || -> Result<Vec<ScanRow>> {
        jobs.par_iter()
            .map(|&(n, seed)| scan_row(plan, n, seed))
            .collect()
    };
    let rows = match plan.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    for r in rows.iter().filter(|r| !r.converged) {
        log::warn!(
            "n = {}, seed = {}: tail variation {:.3e} exceeds {:.3e}; row excluded from the fit",
            r.n,
            r.seed,
            r.tail_variation,
            plan.max_tail_variation
        );
    }
    let summary: Vec<ScanSummary> = n_list
        .iter()
        .map(|&n| {
            let good: Vec<&ScanRow> = rows.iter().filter(|r| r.n == n && r.converged).collect();
            let pick = |f: fn(&ScanRow) -> f64| median(&mut good.iter().map(|r| f(r)).collect::<Vec<_>>());
            ScanSummary {
                n,
                time_avg_d: pick(|r| r.time_avg_d),
                p_hat: pick(|r| r.p_hat),
                abs_error: pick(|r| r.abs_error),
                mixture_distance: pick(|r| r.mixture_distance),
                used: good.len(),
                flagged: rows.iter().filter(|r| r.n == n && !r.converged).count(),
            }
        })
        .collect();
    let points: Vec<(f64, f64)> = summary
        .iter()
        .filter(|s| s.used > 0 && s.time_avg_d.is_finite())
        .map(|s| (s.n as f64, s.time_avg_d))
        .collect();
    let fit = fit_exponential_decay(&points).map_err(|e| e.to_string());
    Ok(ScalingReport {
        target: plan.c1.norm_sqr(),
        theta: plan.theta,
        rows,
        summary,
        fit,
    })
}

/// Least squares of ln(value) against n. Nonpositive values are dropped with a
/// warning.
pub fn fit_exponential_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(n, v)| {
            let ok = v > 0.0 && v.is_finite();
            if !ok {
                log::warn!("dropping nonpositive point ({n}, {v}) from the exponential fit");
            }
            ok
        })
        .map(|&(n, v)| (n, v.ln()))
        .collect();
    let m = kept.len();
    if m < 3 {
        return Err(Error::InsufficientPoints { got: m, need: 3 });
    }
    let mf = m as f64;
    let mean_x = kept.iter().map(|p| p.0).sum::<f64>() / mf;
    let mean_y = kept.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = kept.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "exponential fit needs at least two distinct n".into(),
        ));
    }
    let n_max = kept.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_scale = kept.iter().map(|p| p.1.abs()).fold(1.0, f64::max);
    if syy <= (1e-15 * y_scale).powi(2) * mf {
        return Ok(DecayFit {
            rate: 0.0,
            intercept: mean_y,
            r2: 1.0,
            rate_stderr: 0.0,
            residual_std: 0.0,
            points: m,
            n_max,
        });
    }
    let rate = sxy / sxx;
    let intercept = mean_y - rate * mean_x;
    let ssr: f64 = kept
        .iter()
        .map(|p| (p.1 - intercept - rate * p.0).powi(2))
        .sum();
    let r2 = (1.0 - ssr / syy).clamp(0.0, 1.0);
    let dof = (m - 2).max(1) as f64;
    let sigma2 = ssr / dof;
    Ok(DecayFit {
        rate,
        intercept,
        r2,
        rate_stderr: (sigma2 / sxx).sqrt(),
        residual_std: sigma2.sqrt(),
        points: m,
        n_max,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrapolation {
    pub d_inf: f64,
    pub d_inf_uncertainty: f64,
    pub p_inf: f64,
    pub p_inf_uncertainty: f64,
}

/// Probability that fewer than ceil(θn) of n units are de-excited when each
/// is de-excited independently with probability 1/2, the long-time shortfall
/// of the threshold projector.
pub fn threshold_shortfall(n: usize, theta: f64) -> f64 {
    let need = crate::macro_obs::threshold_count(n, theta);
    let mut term = 0.5f64.powi(n as i32);
    let mut total = 0.0;
    for m in 0..need.min(n + 1) {
        total += term;
        term *= (n - m) as f64 / (m + 1) as f64;
    }
    total
}

/// Large-n limits of the overlap and of the detection probability. Refuses
/// when the overlap fit is poor or no decay is established.
pub fn extrapolate_limit(report: &ScalingReport) -> Result<Extrapolation> {
    let fit = report
        .fit
        .as_ref()
        .map_err(|why| Error::FitRefused(format!("no overlap fit: {why}")))?;
    if fit.r2 < MIN_FIT_R2 {
        return Err(Error::FitRefused(format!(
            "overlap fit r² = {:.4} below {MIN_FIT_R2}",
            fit.r2
        )));
    }
    if fit.rate + 2.0 * fit.rate_stderr >= 0.0 {
        return Err(Error::FitRefused(format!(
            "no decay established: rate {:.4e} ± {:.1e}",
            fit.rate, fit.rate_stderr
        )));
    }
    let points: Vec<(usize, f64)> = report
        .summary
        .iter()
        .filter(|s| s.used > 0 && s.p_hat.is_finite())
        .map(|s| (s.n, s.p_hat))
        .collect();
    let (p_inf, p_inf_uncertainty) = fit_threshold_limit(&points, report.theta)?;
    Ok(Extrapolation {
        d_inf: 0.0,
        d_inf_uncertainty: fit.predict(fit.n_max) * fit.residual_std.exp(),
        p_inf,
        p_inf_uncertainty,
    })
}

/// Fits p(n) = p∞·(1 − shortfall(n)) by least squares. The uncertainty is
/// the residual standard deviation: the residuals come from interference
/// terms and finite averaging windows, which do not average out across n.
pub fn fit_threshold_limit(points: &[(usize, f64)], theta: f64) -> Result<(f64, f64)> {
    let m = points.len();
    if m < 2 {
        return Err(Error::InsufficientPoints { got: m, need: 2 });
    }
    let w: Vec<f64> = points
        .iter()
        .map(|&(n, _)| 1.0 - threshold_shortfall(n, theta))
        .collect();
    let sww: f64 = w.iter().map(|x| x * x).sum();
    let swp: f64 = w.iter().zip(points).map(|(x, p)| x * p.1).sum();
    let p_inf = swp / sww;
    let ssr: f64 = w
        .iter()
        .zip(points)
        .map(|(x, p)| (p.1 - p_inf * x).powi(2))
        .sum();
    Ok((p_inf, (ssr / (m - 1) as f64).sqrt()))
}
