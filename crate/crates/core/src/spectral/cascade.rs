use serde::Serialize;

use crate::error::{Error, Result};
use crate::subshift::Substitution;
use crate::suspension::SuspensionModel;

use super::bands::{slope, BandSet, Provenance};
use super::floquet::{floquet_bands_with, FloquetOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeLevel {
    pub level: usize,
    pub period_symbols: usize,
    pub bands: BandSet,
    pub measure: f64,
    pub band_count: usize,
    /// Fraction of this level's band measure inside the previous level's bands.
    pub nesting: Option<f64>,
    /// Same, inside the union of the two previous levels.
    pub nesting_two_levels: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cascade {
    pub range: (f64, f64),
    pub levels: Vec<CascadeLevel>,
    /// Slope of `ln N_n` against `−ln(mean band width_n)` across levels.
    pub box_dimension: Option<f64>,
}

impl Cascade {
    pub fn measures(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.measure).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].measure < w[0].measure)
    }

    pub fn min_nesting(&self) -> Option<f64> {
        self.levels.iter().filter_map(|l| l.nesting).reduce(f64::min)
    }
}

fn fraction_inside(b: &BandSet, inside: &BandSet) -> Option<f64> {
    let m = b.measure();
    (m > 0.0).then(|| b.intersection_measure(inside) / m)
}

/// Floquet bands of the periodic approximants `s^n(seed)` for each level.
pub fn approximant_cascade(
    model: &SuspensionModel,
    substitution: &Substitution,
    seed: char,
    levels: &[usize],
    range: (f64, f64),
    opts: &FloquetOptions,
) -> Result<Cascade> {
    if levels.is_empty() {
        return Err(Error::EmptyInput("cascade levels"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("cascade levels must be increasing".into()));
    }
    let mut out: Vec<CascadeLevel> = Vec::with_capacity(levels.len());
    for &n in levels {
        let word = substitution.periodic_approximant(seed, n)?;
        let bands = floquet_bands_with(model, &word, range, opts)?;
        let nesting = out.last().and_then(|p| fraction_inside(&bands, &p.bands));
        let nesting_two_levels = if out.len() >= 2 {
            let (p, q) = (&out[out.len() - 1].bands, &out[out.len() - 2].bands);
            let union = BandSet::new(p.bands().iter().chain(q.bands()).cloned().collect(), Provenance::Floquet)?;
            fraction_inside(&bands, &union)
        } else {
            None
        };
        out.push(CascadeLevel {
            level: n,
            period_symbols: word.len(),
            measure: bands.measure(),
            band_count: bands.len(),
            bands,
            nesting,
            nesting_two_levels,
        });
    }
    let pts: Vec<(f64, f64)> = out
        .iter()
        .filter(|l| l.band_count > 0 && l.measure > 0.0)
        .map(|l| (-(l.measure / l.band_count as f64).ln(), (l.band_count as f64).ln()))
        .collect();
    Ok(Cascade { range, levels: out, box_dimension: slope(&pts) })
}
