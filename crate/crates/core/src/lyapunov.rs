//! Lyapunov exponents, their uniformity over hull samples, exponential
//! splitting and the semi-uniform subadditive bound.
//!
//! Norms are spectral norms throughout.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::WindowMeasure;
use crate::par;
use crate::propagator::{transfer_matrix, Path, Scalar, TransferMatrix};

/// `{1, 2, 4, ...} ∪ {t_max}`, increasing.
pub fn dyadic_schedule(t_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 1.0;
    while t < t_max {
        out.push(t);
        t *= 2.0;
    }
    out.push(t_max);
    out
}

fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::EmptyInput("time schedule"));
    }
    if schedule.iter().any(|t| !t.is_finite() || *t <= 0.0) || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("time schedule must be positive and increasing".into()));
    }
    Ok(())
}

/// `ln ‖T_z(t, ω)‖` at every `t` of an increasing schedule, in one sweep.
pub fn log_norms<S: Scalar>(omega: &WindowMeasure, z: S, schedule: &[f64]) -> Result<Vec<f64>> {
    check_schedule(schedule)?;
    let t_max = *schedule.last().unwrap_or(&0.0);
    let path = Path::compile(omega, 0.0, t_max, schedule)?;
    let (at, _) = path.propagate_marks(z)?;
    Ok(at.iter().map(TransferMatrix::ln_norm).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub energy: f64,
    pub gamma_hat: f64,
    pub t_used: f64,
    /// `(t, (1/t) ln ‖T(t)‖)` at dyadic checkpoints; the last entry is `gamma_hat`.
    pub slope_history: Vec<(f64, f64)>,
    /// Last three slopes lie within `10 / t_max` of each other.
    pub tail_converged: bool,
}

/// Slope history over an arbitrary schedule, real or complex energy.
pub fn slope_history<S: Scalar>(omega: &WindowMeasure, z: S, schedule: &[f64]) -> Result<Vec<(f64, f64)>> {
    let logs = log_norms(omega, z, schedule)?;
    Ok(schedule.iter().zip(logs).map(|(&t, l)| (t, (l / t).max(0.0))).collect())
}

pub fn lyapunov_estimate(omega: &WindowMeasure, e: f64, t_max: f64) -> Result<LyapunovEstimate> {
    if !(t_max > 0.0) {
        return Err(Error::Precondition(format!("t_max = {t_max} must be positive")));
    }
    let slope_history = slope_history(omega, e, &dyadic_schedule(t_max))?;
    let gamma_hat = slope_history.last().map_or(0.0, |p| p.1);
    let tail: Vec<f64> = slope_history.iter().rev().take(3).map(|p| p.1).collect();
    let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(LyapunovEstimate {
        energy: e,
        gamma_hat,
        t_used: t_max,
        slope_history,
        tail_converged: tail.len() == 3 && spread <= 10.0 / t_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UniformityVerdict {
    UniformConsistent,
    NonUniformSuspect,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityReport {
    pub energy: f64,
    pub gamma_hat: f64,
    pub schedule: Vec<f64>,
    /// `slopes[i][k]`: sample `i` at `schedule[k]`.
    pub slopes: Vec<Vec<f64>>,
    /// Per-sample deviation from `gamma_hat` at the final time.
    pub deviations: Vec<f64>,
    /// Supremum of the deviations at each scheduled time.
    pub sup_by_time: Vec<f64>,
    pub sup_deviation: f64,
    pub threshold: f64,
    pub verdict: UniformityVerdict,
}

/// Surrogate threshold `max(5e-2, 20 / t)` for the uniformity verdict.
pub fn uniformity_threshold(t: f64) -> f64 {
    (5e-2f64).max(20.0 / t)
}

/// Deviations of `(1/t) ln ‖T_E(t, ω)‖` from `gamma_hat` over hull samples.
/// When `gamma_hat` is `None` the mean final slope is used.
pub fn uniformity_scan(
    samples: &[WindowMeasure],
    e: f64,
    schedule: &[f64],
    gamma_hat: Option<f64>,
) -> Result<UniformityReport> {
    if samples.len() < 8 {
        return Err(Error::Precondition(format!("{} hull samples given, at least 8 needed", samples.len())));
    }
    check_schedule(schedule)?;
    let slopes: Vec<Vec<f64>> = par::try_map(samples, |w| {
        Ok::<_, Error>(slope_history(w, e, schedule)?.into_iter().map(|p| p.1).collect())
    })?;
    let last = schedule.len() - 1;
    let gamma_hat = gamma_hat.unwrap_or_else(|| slopes.iter().map(|s| s[last]).sum::<f64>() / slopes.len() as f64);
    let sup_by_time: Vec<f64> = (0..schedule.len())
        .map(|k| slopes.iter().map(|s| (s[k] - gamma_hat).abs()).fold(0.0, f64::max))
        .collect();
    let deviations: Vec<f64> = slopes.iter().map(|s| (s[last] - gamma_hat).abs()).collect();
    let sup_deviation = deviations.iter().cloned().fold(0.0, f64::max);
    let threshold = uniformity_threshold(schedule[last]);
    let monotone = sup_by_time.windows(2).all(|w| w[1] <= w[0]);
    let verdict = if monotone && sup_deviation <= threshold {
        UniformityVerdict::UniformConsistent
    } else {
        UniformityVerdict::NonUniformSuspect
    };
    Ok(UniformityReport {
        energy: e,
        gamma_hat,
        schedule: schedule.to_vec(),
        slopes,
        deviations,
        sup_by_time,
        sup_deviation,
        threshold,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplittingCertificate {
    pub energy: f64,
    /// Projective angle in `[0, π)` of the direction decaying forward in time.
    pub contracting: f64,
    /// Projective angle of the direction decaying backward in time.
    pub expanding: f64,
    pub kappa: f64,
    pub c: f64,
    /// Times used in the fit and `ln ‖T(t) U‖` there.
    pub fit: Vec<(f64, f64)>,
    /// Regression residuals of the fit.
    pub residuals: Vec<f64>,
}

fn projective_angle(v: [f64; 2]) -> f64 {
    let a = v[1].atan2(v[0]);
    a.rem_euclid(std::f64::consts::PI)
}

/// Angle distance on the projective line.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let d = (a - b).rem_euclid(pi);
    d.min(pi - d)
}

/// Input direction least expanded by `m`: orthogonal to the top right
/// singular vector.
fn least_expanded(m: &TransferMatrix<f64>) -> [f64; 2] {
    let [a, b, c, d] = m.entries();
    // Top eigenvector of MᵀM = [[p, q], [q, r]].
    let (p, q, r) = (a * a + c * c, a * b + c * d, b * b + d * d);
    let theta = 0.5 * (2.0 * q).atan2(p - r);
    let top = [theta.cos(), theta.sin()];
    [-top[1], top[0]]
}

/// Forward-decaying direction at 0 read off the transfer over `[0, t]`
/// (`t < 0` for the backward direction).
fn decaying_direction(omega: &WindowMeasure, e: f64, t: f64) -> Result<[f64; 2]> {
    Ok(least_expanded(&transfer_matrix(omega, e, 0.0, t)?))
}

/// Fit `‖T_E(t, ω) U‖ ≤ C e^{−κ t}` for the contracting direction `U`.
/// Returns `None` when the direction does not settle between `t/2` and `t`.
pub fn splitting_detect(
    omega: &WindowMeasure,
    e: f64,
    t_grid: &[f64],
    gamma_threshold: f64,
) -> Result<Option<SplittingCertificate>> {
    check_schedule(t_grid)?;
    let t_max = t_grid[t_grid.len() - 1];
    let gamma = lyapunov_estimate(omega, e, t_max)?.gamma_hat;
    if gamma <= gamma_threshold {
        return Err(Error::Precondition(format!(
            "gamma_hat = {gamma:e} at E = {e} is not above {gamma_threshold:e}"
        )));
    }
    // Past ~18/γ a unit rounding error in U outgrows the decaying solution.
    let t_dir = t_max.min(15.0 / gamma);
    let u = decaying_direction(omega, e, t_dir)?;
    let u_half = decaying_direction(omega, e, t_dir / 2.0)?;
    let v = decaying_direction(omega, e, -t_dir)?;
    let v_half = decaying_direction(omega, e, -t_dir / 2.0)?;
    let (cu, cv) = (projective_angle(u), projective_angle(v));
    let settle = 1e-6;
    if angle_gap(cu, projective_angle(u_half)) > settle
        || angle_gap(cv, projective_angle(v_half)) > settle
        || angle_gap(cu, cv) < 1e-8
    {
        return Ok(None);
    }
    let times: Vec<f64> = t_grid.iter().cloned().filter(|&t| t <= t_dir / 2.0).collect();
    if times.len() < 2 {
        return Ok(None);
    }
    let path = Path::compile(omega, 0.0, times[times.len() - 1], &times)?;
    let (at, _) = path.propagate_marks(e)?;
    let fit: Vec<(f64, f64)> = times.iter().zip(&at).map(|(&t, m)| (t, m.apply(u).1)).collect();
    let n = fit.len() as f64;
    let (mx, my) = (fit.iter().map(|p| p.0).sum::<f64>() / n, fit.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = fit.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let kappa = -sxy / sxx;
    let intercept = my + kappa * mx;
    let residuals: Vec<f64> = fit.iter().map(|p| p.1 - (intercept - kappa * p.0)).collect();
    let ln_c = fit.iter().map(|p| p.1 + kappa * p.0).fold(0.0, f64::max);
    Ok(Some(SplittingCertificate { energy: e, contracting: cu, expanding: cv, kappa, c: ln_c.exp(), fit, residuals }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemiUniformReport {
    pub reference: f64,
    pub epsilon: f64,
    /// `(t, sup_ω (1/t) X_t(ω))`.
    pub curve: Vec<(f64, f64)>,
    pub pass: bool,
}

/// Check `sup_ω (1/t) X_t(ω) ≤ reference + epsilon` at the final time for a
/// process given as `x(sample, t)`.
pub fn semi_uniform_harness<F>(
    samples: usize,
    schedule: &[f64],
    reference: f64,
    epsilon: f64,
    x: F,
) -> Result<SemiUniformReport>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    check_schedule(schedule)?;
    if samples == 0 {
        return Err(Error::EmptyInput("hull samples"));
    }
    let values = par::map_range(samples, &x).into_iter().collect::<Result<Vec<_>>>()?;
    if values.iter().any(|v| v.len() != schedule.len()) {
        return Err(Error::Precondition("process values do not match the schedule".into()));
    }
    let curve: Vec<(f64, f64)> = schedule
        .iter()
        .enumerate()
        .map(|(k, &t)| (t, values.iter().map(|v| v[k] / t).fold(f64::NEG_INFINITY, f64::max)))
        .collect();
    let pass = curve.last().is_some_and(|p| p.1 <= reference + epsilon);
    Ok(SemiUniformReport { reference, epsilon, curve, pass })
}

/// The semi-uniform bound for `X_t = ln ‖T_E(t, ·)‖` against `gamma_hat`.
pub fn semi_uniform_check(
    samples: &[WindowMeasure],
    e: f64,
    schedule: &[f64],
    gamma_hat: f64,
    epsilon: f64,
) -> Result<SemiUniformReport> {
    semi_uniform_harness(samples.len(), schedule, gamma_hat, epsilon, |i| log_norms(&samples[i], e, schedule))
}

/// `X_{s+t}(ω) − X_s(ω) − X_t(α_s ω)`, non-positive up to rounding.
pub fn subadditivity_defect(omega: &WindowMeasure, e: f64, s: f64, t: f64) -> Result<f64> {
    let full = transfer_matrix(omega, e, 0.0, s + t)?.ln_norm();
    let first = transfer_matrix(omega, e, 0.0, s)?.ln_norm();
    let second = transfer_matrix(&omega.translate(s), e, 0.0, t)?.ln_norm();
    Ok(full - first - second)
}
