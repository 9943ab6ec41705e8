use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::WindowMeasure;
use crate::par;
use crate::propagator::Path;

const MIN_CELLS: usize = 100;

/// Tolerance schedule `{1e-1, 3e-2, 1e-2, 3e-3}`.
pub fn default_tolerances() -> Vec<f64> {
    vec![1e-1, 3e-2, 1e-2, 3e-3]
}

/// Propagation time paired with a tolerance.
fn time_for(tol: f64) -> f64 {
    10.0 / tol
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcVerdict {
    /// The measure of `{γ ≤ tol}` shrinks steadily toward zero.
    AcSpectrumExcludedConsistent,
    /// The measure stays put as the tolerance tightens.
    AcSpectrumPresentConsistent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcReport {
    pub interval: (f64, f64),
    pub grid_points: usize,
    /// `(tol, t_max, measure of {γ ≤ tol})`.
    pub curve: Vec<(f64, f64, f64)>,
    pub verdict: AcVerdict,
}

/// Estimate `|{E ∈ I : γ(E) ≤ tol}|` along a shrinking tolerance schedule,
/// with `t_max = 10 / tol`, on the cell midpoints of a uniform grid.
pub fn ac_diagnostic(
    omega: &WindowMeasure,
    interval: (f64, f64),
    grid_points: usize,
    tolerances: &[f64],
) -> Result<AcReport> {
    let (lo, hi) = interval;
    // The verdict compares measures down to a quarter of the first one, so
    // cells must resolve a small fraction of the interval.
    if !(lo < hi) || grid_points < MIN_CELLS {
        return Err(Error::Precondition(format!("need a nonempty interval and at least {MIN_CELLS} grid cells")));
    }
    if tolerances.is_empty() || tolerances.windows(2).any(|w| w[1] >= w[0]) || tolerances.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Precondition("tolerances must be positive and decreasing".into()));
    }
    let h = (hi - lo) / grid_points as f64;
    let times: Vec<f64> = tolerances.iter().map(|&t| time_for(t)).collect();
    let path = Path::compile(omega, 0.0, times[times.len() - 1], &times)?;
    let grid: Vec<f64> = (0..grid_points).map(|i| lo + (i as f64 + 0.5) * h).collect();
    // gammas[i][k]: energy i at times[k].
    let gammas = par::try_map(&grid, |&e| {
        let (at, _) = path.propagate_marks(e)?;
        Ok::<_, Error>(at.iter().zip(&times).map(|(m, t)| (m.ln_norm() / t).max(0.0)).collect::<Vec<f64>>())
    })?;
    let curve: Vec<(f64, f64, f64)> = tolerances
        .iter()
        .enumerate()
        .map(|(k, &tol)| {
            let count = gammas.iter().filter(|g| g[k] <= tol).count();
            (tol, times[k], count as f64 * h)
        })
        .collect();
    let first = curve[0].2;
    let last = curve[curve.len() - 1].2;
    let decreasing = curve.windows(2).all(|w| w[1].2 <= w[0].2);
    let verdict = if first == 0.0 || (decreasing && last <= 0.25 * first) {
        AcVerdict::AcSpectrumExcludedConsistent
    } else if last >= 0.9 * first {
        AcVerdict::AcSpectrumPresentConsistent
    } else {
        AcVerdict::Inconclusive
    };
    Ok(AcReport { interval, grid_points, curve, verdict })
}
