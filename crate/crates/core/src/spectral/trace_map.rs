use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{PieceMeasure, WindowMeasure};
use crate::propagator::{symbol_matrix, transfer_matrix};
use crate::subshift::Substitution;
use crate::suspension::SuspensionModel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceLevel {
    /// Index of `w_n`, from `w_{-1} = b`, `w_0 = a`, `w_{n+1} = w_n w_{n-1}`.
    pub n: i64,
    pub x_recursion: f64,
    pub x_direct: f64,
    /// `x_{n+1}² + x_n² + x_{n-1}² − 2 x_{n+1} x_n x_{n-1} − 1`, when defined.
    pub invariant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMap {
    pub energy: f64,
    pub levels: Vec<TraceLevel>,
    /// Largest `|x_rec − x_dir| / max(1, |x_dir|)`.
    pub max_disagreement: f64,
    /// Largest change of the invariant relative to the size of its terms.
    pub invariant_drift: f64,
    /// First `n` at which the escape condition holds.
    pub escape_level: Option<i64>,
}

fn half_trace(m: &crate::propagator::TransferMatrix<f64>) -> f64 {
    0.5 * m.trace()
}

/// Half-traces of the Fibonacci approximant transfer matrices for
/// `n = -1..=levels`, by the trace recursion and by direct products.
pub fn trace_map_fibonacci(
    model: &SuspensionModel,
    substitution: &Substitution,
    e: f64,
    levels: usize,
) -> Result<TraceMap> {
    let (a, b) = substitution.fibonacci_letters().ok_or(Error::NotFibonacci)?;
    let ma = symbol_matrix(model, a, e)?;
    let mb = symbol_matrix(model, b, e)?;
    // x_{-1}, x_0, x_1 seed the recursion; w_1 = ab gives M_1 = M_b M_a.
    let mut rec = vec![half_trace(&mb), half_trace(&ma), half_trace(&mb.mul(&ma))];
    while rec.len() < levels + 2 {
        let k = rec.len();
        rec.push(2.0 * rec[k - 1] * rec[k - 2] - rec[k - 3]);
    }
    rec.truncate(levels + 2);

    let mut words: Vec<Vec<char>> = vec![vec![b], vec![a]];
    while words.len() < levels + 2 {
        let k = words.len();
        let mut w = words[k - 1].clone();
        w.extend_from_slice(&words[k - 2]);
        words.push(w);
    }
    let direct = words
        .iter()
        .map(|w| {
            let pieces = w.iter().map(|&c| model.piece(c).cloned()).collect::<Result<Vec<PieceMeasure>>>()?;
            let window = WindowMeasure::tiled(0.0, &pieces)?;
            Ok(half_trace(&transfer_matrix(&window, e, 0.0, window.window().1)?))
        })
        .collect::<Result<Vec<f64>>>()?;

    let invariant = |k: usize| -> Option<(f64, f64)> {
        (k >= 1 && k + 1 < rec.len()).then(|| {
            let (x0, x1, x2) = (rec[k - 1], rec[k], rec[k + 1]);
            let cross = 2.0 * x2 * x1 * x0;
            let value = x2 * x2 + x1 * x1 + x0 * x0 - cross - 1.0;
            let scale = [1.0, x2 * x2, x1 * x1, x0 * x0, cross.abs()].into_iter().fold(0.0, f64::max);
            (value, scale)
        })
    };
    let first = invariant(1).map(|p| p.0);
    let mut drift: f64 = 0.0;
    let mut levels_out = Vec::with_capacity(rec.len());
    for k in 0..rec.len() {
        let inv = invariant(k);
        if let (Some((v, s)), Some(i0)) = (inv, first) {
            drift = drift.max((v - i0).abs() / s);
        }
        levels_out.push(TraceLevel {
            n: k as i64 - 1,
            x_recursion: rec[k],
            x_direct: direct[k],
            invariant: inv.map(|p| p.0),
        });
    }
    let max_disagreement = rec
        .iter()
        .zip(&direct)
        .map(|(r, d)| (r - d).abs() / d.abs().max(1.0))
        .fold(0.0, f64::max);
    let escape_level = (1..rec.len().saturating_sub(1))
        .find(|&k| {
            let (x0, x1, x2) = (rec[k - 1], rec[k], rec[k + 1]);
            x1.abs() > 1.0 && x2.abs() > 1.0 && (x2 * x1).abs() > x0.abs()
        })
        .map(|k| k as i64 - 1);
    Ok(TraceMap { energy: e, levels: levels_out, max_disagreement, invariant_drift: drift, escape_level })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::floquet::{floquet_bands, period_path, discriminant};

    fn model(la: f64, lb: f64, ma: f64, mb: f64) -> SuspensionModel {
        SuspensionModel::new(vec![
            ('a', PieceMeasure::atom(la, la, ma).unwrap()),
            ('b', PieceMeasure::atom(lb, lb, mb).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn free_traces_are_cosines() {
        let m = SuspensionModel::new(vec![
            ('a', PieceMeasure::zero(1.0).unwrap()),
            ('b', PieceMeasure::zero(0.7).unwrap()),
        ])
        .unwrap();
        let e: f64 = 2.3;
        let tm = trace_map_fibonacci(&m, &Substitution::fibonacci(), e, 12).unwrap();
        let (mut lp, mut l) = (0.7, 1.0);
        for lvl in &tm.levels[1..] {
            assert!((lvl.x_recursion - (e.sqrt() * l).cos()).abs() < 1e-9, "n = {}", lvl.n);
            let next = l + lp;
            lp = l;
            l = next;
        }
        assert!(tm.invariant_drift < 1e-9);
        assert_eq!(tm.escape_level, None);
    }

    #[test]
    fn recursion_matches_products() {
        let m = model(1.0, 1.0, 1.0, 3.0);
        for e in [0.3, 1.7, 4.0, 9.5, 15.0] {
            let tm = trace_map_fibonacci(&m, &Substitution::fibonacci(), e, 12).unwrap();
            assert!(tm.max_disagreement < 1e-8, "E = {e}: {}", tm.max_disagreement);
            assert!(tm.invariant_drift < 1e-6);
        }
    }

    #[test]
    fn escape_excludes_deeper_approximant_bands() {
        let m = model(1.0, 1.0, 1.0, 3.0);
        let sub = Substitution::fibonacci();
        let mut escaped = 0;
        for i in 0..40 {
            let e = 0.25 + 0.5 * i as f64;
            let tm = trace_map_fibonacci(&m, &sub, e, 14).unwrap();
            let Some(n0) = tm.escape_level else { continue };
            escaped += 1;
            for k in (n0.max(0) as usize)..=10 {
                let word = sub.periodic_approximant('a', k).unwrap();
                let (path, _) = period_path(&m, &word).unwrap();
                assert!(discriminant(&path, e).unwrap().abs() > 2.0, "E = {e}, level {k}");
                if k == 8 {
                    let b = floquet_bands(&m, &word, (e - 0.5, e + 0.5), 1e-3).unwrap();
                    assert!(!b.contains(e));
                }
            }
        }
        assert!(escaped > 0);
    }

    #[test]
    fn requires_fibonacci() {
        let m = model(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(
            trace_map_fibonacci(&m, &Substitution::thue_morse(), 1.0, 5),
            Err(Error::NotFibonacci)
        ));
    }
}
