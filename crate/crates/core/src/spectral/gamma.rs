use serde::Serialize;

use crate::error::{Error, Result};
use crate::lyapunov::{uniformity_scan, UniformityVerdict};
use crate::measure::WindowMeasure;
use crate::par;
use crate::propagator::Path;

use super::bands::{BandSet, Provenance};

/// `n` equally spaced energies from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaScanOptions {
    pub t_max: f64,
    pub tol: f64,
    /// Dyadic refinement passes at every marked/unmarked transition.
    pub refine_levels: usize,
    /// Hull samples for uniformity labels; empty to skip.
    pub hull_samples: Vec<WindowMeasure>,
    pub uniformity_schedule: Vec<f64>,
    /// Check uniformity at unmarked points too, not only at marked ones.
    pub uniformity_everywhere: bool,
}

impl GammaScanOptions {
    pub fn new(t_max: f64, tol: f64) -> Self {
        Self {
            t_max,
            tol,
            refine_levels: 0,
            hull_samples: Vec::new(),
            uniformity_schedule: Vec::new(),
            uniformity_everywhere: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointLabel {
    /// `γ ≤ tol`, uniformity consistent or not checked.
    ZeroGamma,
    /// `γ ≤ tol` but the hull samples disagree.
    ZeroGammaNonUniformSuspect,
    /// `γ > tol` and the hull samples disagree.
    NonUniformSuspect,
    /// `γ > tol` and nothing suggests non-uniformity.
    Resolvent,
}

impl PointLabel {
    /// Counted in the spectrum approximation.
    pub fn in_spectrum(self) -> bool {
        !matches!(self, PointLabel::Resolvent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaPoint {
    pub energy: f64,
    pub gamma_hat: f64,
    pub marked: bool,
    pub uniformity: Option<UniformityVerdict>,
    pub label: PointLabel,
    /// Marked without a marked neighbor: a resolution artifact.
    pub isolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaScan {
    pub t_max: f64,
    pub tol: f64,
    pub points: Vec<GammaPoint>,
    /// Runs of consecutive marked points.
    pub bands: BandSet,
    pub isolated_count: usize,
}

impl GammaScan {
    /// Runs of consecutive points labeled as spectrum, including
    /// non-uniform suspects.
    pub fn spectrum_approximation(&self) -> Result<BandSet> {
        runs_to_bands(&self.points, |p| p.label.in_spectrum())
    }
}

fn runs_to_bands(points: &[GammaPoint], pred: impl Fn(&GammaPoint) -> bool) -> Result<BandSet> {
    let mut bands = Vec::new();
    let mut start: Option<f64> = None;
    let mut prev = 0.0;
    for p in points {
        match (pred(p), start) {
            (true, None) => start = Some(p.energy),
            (false, Some(s)) => {
                bands.push((s, prev));
                start = None;
            }
            _ => {}
        }
        prev = p.energy;
    }
    if let Some(s) = start {
        bands.push((s, prev));
    }
    BandSet::new(bands, Provenance::GammaScan)
}

/// Mark energies whose Lyapunov estimate at `t_max` is at most `tol`.
pub fn gamma_zero_scan(omega: &WindowMeasure, grid: &[f64], opts: &GammaScanOptions) -> Result<GammaScan> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("energy grid"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("energy grid must be strictly increasing".into()));
    }
    if !(opts.t_max > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::Precondition("t_max and tol must be positive".into()));
    }
    let path = Path::compile(omega, 0.0, opts.t_max, &[])?;
    let gamma = |e: f64| -> Result<f64> { Ok((path.propagate(e)?.ln_norm() / opts.t_max).max(0.0)) };
    let mut pts: Vec<(f64, f64)> = grid.iter().cloned().zip(par::try_map(grid, |&e| gamma(e))?).collect();

    for _ in 0..opts.refine_levels {
        let mids: Vec<f64> = pts
            .windows(2)
            .filter(|w| (w[0].1 <= opts.tol) != (w[1].1 <= opts.tol))
            .map(|w| 0.5 * (w[0].0 + w[1].0))
            .collect();
        if mids.is_empty() {
            break;
        }
        let vals = par::try_map(&mids, |&e| gamma(e))?;
        pts.extend(mids.into_iter().zip(vals));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let marked: Vec<bool> = pts.iter().map(|p| p.1 <= opts.tol).collect();
    let check_uniformity = opts.hull_samples.len() >= 8 && !opts.uniformity_schedule.is_empty();
    let to_check: Vec<f64> = pts
        .iter()
        .zip(&marked)
        .filter(|(_, &m)| check_uniformity && (m || opts.uniformity_everywhere))
        .map(|(p, _)| p.0)
        .collect();
    let verdicts = par::try_map(&to_check, |&e| {
        Ok::<_, Error>(uniformity_scan(&opts.hull_samples, e, &opts.uniformity_schedule, None)?.verdict)
    })?;
    let mut verdict_iter = to_check.iter().zip(verdicts).peekable();

    let n = pts.len();
    let mut points = Vec::with_capacity(n);
    for (i, &(e, g)) in pts.iter().enumerate() {
        let uniformity = match verdict_iter.peek() {
            Some((&ec, _)) if ec == e => verdict_iter.next().map(|(_, v)| v),
            _ => None,
        };
        let suspect = uniformity == Some(UniformityVerdict::NonUniformSuspect);
        let label = match (marked[i], suspect) {
            (true, false) => PointLabel::ZeroGamma,
            (true, true) => PointLabel::ZeroGammaNonUniformSuspect,
            (false, true) => PointLabel::NonUniformSuspect,
            (false, false) => PointLabel::Resolvent,
        };
        let isolated = marked[i] && !(i > 0 && marked[i - 1]) && !(i + 1 < n && marked[i + 1]) && n > 1;
        points.push(GammaPoint { energy: e, gamma_hat: g, marked: marked[i], uniformity, label, isolated });
    }
    let bands = runs_to_bands(&points, |p| p.marked)?;
    let isolated_count = points.iter().filter(|p| p.isolated).count();
    Ok(GammaScan { t_max: opts.t_max, tol: opts.tol, points, bands, isolated_count })
}
