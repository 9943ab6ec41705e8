use crate::error::{Error, Result};
use crate::measure::WindowMeasure;
use crate::par;
use crate::propagator::Path;
use crate::subshift::SubshiftWord;
use crate::suspension::SuspensionModel;

use super::bands::{BandSet, Provenance};

const IN_BAND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FloquetOptions {
    /// Initial sampling step in energy.
    pub resolution: f64,
    /// Bisection stops once the bracket is this narrow and `|tr| − 2` is small.
    pub edge_tol: f64,
    /// Target for `||tr| − 2|` at refined edges.
    pub trace_tol: f64,
    /// Sampling doublings allowed while the band count keeps changing.
    pub max_doublings: usize,
    /// Gaps narrower than this are closed.
    pub min_gap: f64,
}

impl FloquetOptions {
    pub fn new(resolution: f64) -> Self {
        Self { resolution, edge_tol: 1e-9, trace_tol: 1e-10, max_doublings: 8, min_gap: 1e-9 }
    }
}

/// One period of a periodic word, compiled for repeated evaluation. Returns
/// the path and the period length `s_{|w|}`.
pub fn period_path(model: &SuspensionModel, word: &SubshiftWord) -> Result<(Path, f64)> {
    if !word.is_periodic() {
        return Err(Error::NotPeriodic);
    }
    let pieces = word
        .symbols()
        .iter()
        .map(|&c| model.piece(c).cloned())
        .collect::<Result<Vec<_>>>()?;
    let w = WindowMeasure::tiled(0.0, &pieces)?;
    let (_, period) = w.window();
    Ok((Path::compile(&w, 0.0, period, &[])?, period))
}

/// `tr T_E(one period)`; may be infinite deep in a gap.
pub fn discriminant(path: &Path, e: f64) -> Result<f64> {
    let t = path.propagate(e)?;
    let [a, _, _, d] = t.entries();
    let s = a + d;
    // Avoid 0·∞ when the scale overflows.
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok(s * t.log_scale().exp())
}

fn in_band(d: f64) -> bool {
    d.abs() <= 2.0 * (1.0 + IN_BAND_SLACK)
}

fn runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, flags.len() - 1));
    }
    out
}

/// Bisect between an in-band and an out-of-band energy; returns the probe
/// with the smallest `||tr| − 2|`.
fn refine_edge(path: &Path, mut inside: f64, mut outside: f64, opts: &FloquetOptions) -> Result<f64> {
    let mut best = ((discriminant(path, inside)?.abs() - 2.0).abs(), inside);
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        let d = discriminant(path, mid)?;
        let margin = (d.abs() - 2.0).abs();
        if margin < best.0 {
            best = (margin, mid);
        }
        if in_band(d) {
            inside = mid;
        } else {
            outside = mid;
        }
        if (outside - inside).abs() <= opts.edge_tol && best.0 <= opts.trace_tol {
            break;
        }
    }
    Ok(best.1)
}

/// Bands `{E : |tr T_E(period)| ≤ 2}` inside `range`.
pub fn floquet_bands(
    model: &SuspensionModel,
    word: &SubshiftWord,
    range: (f64, f64),
    resolution: f64,
) -> Result<BandSet> {
    floquet_bands_with(model, word, range, &FloquetOptions::new(resolution))
}

pub fn floquet_bands_with(
    model: &SuspensionModel,
    word: &SubshiftWord,
    range: (f64, f64),
    opts: &FloquetOptions,
) -> Result<BandSet> {
    let (path, _) = period_path(model, word)?;
    bands_of_path(&path, range, opts)
}

pub(crate) fn bands_of_path(path: &Path, range: (f64, f64), opts: &FloquetOptions) -> Result<BandSet> {
    let (lo, hi) = range;
    if !(lo < hi) || !(opts.resolution > 0.0) {
        return Err(Error::Precondition(format!("energy range [{lo}, {hi}] and resolution {}", opts.resolution)));
    }
    let n = ((hi - lo) / opts.resolution).ceil() as usize + 1;
    let mut grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut values = par::try_map(&grid, |&e| discriminant(path, e))?;
    let mut count = runs(&values.iter().map(|&d| in_band(d)).collect::<Vec<_>>()).len();
    for _ in 0..opts.max_doublings {
        let mids: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mid_vals = par::try_map(&mids, |&e| discriminant(path, e))?;
        let mut g = Vec::with_capacity(grid.len() + mids.len());
        let mut v = Vec::with_capacity(g.capacity());
        for i in 0..grid.len() {
            g.push(grid[i]);
            v.push(values[i]);
            if i < mids.len() {
                g.push(mids[i]);
                v.push(mid_vals[i]);
            }
        }
        grid = g;
        values = v;
        let c = runs(&values.iter().map(|&d| in_band(d)).collect::<Vec<_>>()).len();
        if c == count {
            break;
        }
        count = c;
    }
    let flags: Vec<bool> = values.iter().map(|&d| in_band(d)).collect();
    let last = grid.len() - 1;
    let edges = par::try_map(&runs(&flags), |&(i, j)| {
        let a = if i == 0 { grid[0] } else { refine_edge(path, grid[i], grid[i - 1], opts)? };
        let b = if j == last { grid[last] } else { refine_edge(path, grid[j], grid[j + 1], opts)? };
        Ok::<_, Error>((a, b))
    })?;
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(edges.len());
    for (a, b) in edges {
        match merged.last_mut() {
            Some(l) if a - l.1 < opts.min_gap => l.1 = b,
            _ => merged.push((a, b)),
        }
    }
    BandSet::new(merged, Provenance::Floquet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::PieceMeasure;

    fn kp_model() -> SuspensionModel {
        SuspensionModel::new(vec![('a', PieceMeasure::atom(1.0, 1.0, 1.0).unwrap())]).unwrap()
    }

    /// `2 cos k + sin(k)/k`, continued to `E ≤ 0`.
    fn kp_dispersion(e: f64) -> f64 {
        if e > 0.0 {
            let k = e.sqrt();
            2.0 * k.cos() + k.sin() / k
        } else if e < 0.0 {
            let k = (-e).sqrt();
            2.0 * k.cosh() + k.sinh() / k
        } else {
            3.0
        }
    }

    /// Edges from sign changes of `|D| − 2` on a fine grid, polished by
    /// a secant-free bisection on the analytic formula.
    fn kp_edges(lo: f64, hi: f64) -> Vec<f64> {
        let f = |e: f64| kp_dispersion(e).abs() - 2.0;
        let n = 200_000;
        let mut out = Vec::new();
        for i in 0..n {
            let (a, b) = (lo + (hi - lo) * i as f64 / n as f64, lo + (hi - lo) * (i + 1) as f64 / n as f64);
            if f(a).signum() != f(b).signum() {
                let (mut x, mut y) = (a, b);
                for _ in 0..100 {
                    let m = 0.5 * (x + y);
                    if f(m).signum() == f(x).signum() {
                        x = m
                    } else {
                        y = m
                    }
                }
                out.push(0.5 * (x + y));
            }
        }
        out
    }

    #[test]
    fn free_model_is_one_band() {
        let m = SuspensionModel::new(vec![('a', PieceMeasure::zero(1.0).unwrap())]).unwrap();
        let w = SubshiftWord::periodic(vec!['a']).unwrap();
        let b = floquet_bands(&m, &w, (0.0, 10.0), 0.05).unwrap();
        assert_eq!(b.bands(), &[(0.0, 10.0)]);
    }

    #[test]
    fn constant_potential_shifts_the_band() {
        let m = SuspensionModel::new(vec![('a', PieceMeasure::constant(1.3, 2.5).unwrap())]).unwrap();
        let w = SubshiftWord::periodic(vec!['a', 'a']).unwrap();
        let b = floquet_bands(&m, &w, (-3.0, 10.0), 0.05).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b.bands()[0].0 - 2.5).abs() < 1e-8 && b.bands()[0].1 == 10.0);
    }

    #[test]
    fn kronig_penney_edges() {
        let m = kp_model();
        let w = SubshiftWord::periodic(vec!['a']).unwrap();
        let bands = floquet_bands(&m, &w, (0.0, 40.0), 0.01).unwrap();
        let mut ours: Vec<f64> = bands.bands().iter().flat_map(|&(a, b)| [a, b]).collect();
        if ours.last() == Some(&40.0) {
            ours.pop();
        }
        let oracle = kp_edges(0.0, 40.0);
        assert_eq!(ours.len(), oracle.len(), "{ours:?} vs {oracle:?}");
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        let (path, _) = period_path(&m, &w).unwrap();
        for e in &ours {
            assert!((discriminant(&path, *e).unwrap().abs() - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn non_periodic_word_rejected() {
        let w = SubshiftWord::one_sided(vec!['a']);
        assert!(matches!(floquet_bands(&kp_model(), &w, (0.0, 1.0), 0.1), Err(Error::NotPeriodic)));
    }
}
