//! The suspension measure `ω_x`: lay the piece of symbol `x(n)` on
//! `[s_n, s_{n+1}]` with `s_{n+1} - s_n = l_{x(n)}`, and sample the hull by
//! translating it.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::measure::{compensated_prefix, DecompositionAlphabet, PieceMeasure, WindowMeasure};
use crate::subshift::SubshiftWord;

/// One piece per symbol; `l_a` is the length of the piece for `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuspensionModel {
    alphabet: DecompositionAlphabet,
    lengths: BTreeMap<char, f64>,
    atomless: bool,
}

impl SuspensionModel {
    pub fn new(pieces: Vec<(char, PieceMeasure)>) -> Result<Self> {
        let lengths = pieces.iter().map(|(c, p)| (*c, p.length())).collect();
        let alphabet =
            DecompositionAlphabet::new(pieces.into_iter().map(|(c, p)| (c.to_string(), p)).collect())?;
        let atomless = alphabet.is_atomless();
        Ok(SuspensionModel { alphabet, lengths, atomless })
    }

    pub fn alphabet(&self) -> &DecompositionAlphabet {
        &self.alphabet
    }

    pub fn lengths(&self) -> &BTreeMap<char, f64> {
        &self.lengths
    }

    pub fn is_atomless(&self) -> bool {
        self.atomless
    }

    pub fn piece(&self, c: char) -> Result<&PieceMeasure> {
        self.alphabet.get(&c.to_string()).ok_or(Error::UnknownSymbol(c))
    }

    pub fn length(&self, c: char) -> Result<f64> {
        self.lengths.get(&c).copied().ok_or(Error::UnknownSymbol(c))
    }

    pub fn max_length(&self) -> f64 {
        self.lengths.values().copied().fold(0.0, f64::max)
    }

    pub fn min_length(&self) -> f64 {
        self.lengths.values().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_a |ν_a|([0, l_a]) · (1 + 1 / min_a l_a)`: the recorded estimate of
    /// the uniform norm of `ω_x`.
    pub fn unif_norm_estimate(&self) -> f64 {
        self.max_piece_variation() * (1.0 + 1.0 / self.min_length())
    }

    /// `max_a |ν_a|([0, l_a]) · (⌊1 / min_a l_a⌋ + 2)`: a unit interval meets
    /// at most that many pieces, so this bounds every unit-interval variation.
    pub fn unif_norm_bound(&self) -> f64 {
        self.max_piece_variation() * ((1.0 / self.min_length()).floor() + 2.0)
    }

    fn max_piece_variation(&self) -> f64 {
        self.alphabet.pieces().iter().map(|(_, p)| p.total_variation()).fold(0.0, f64::max)
    }

    /// Mean signed mass per unit length of `ω_x` given letter frequencies.
    pub fn mean_density(&self, freqs: &BTreeMap<char, f64>) -> Result<f64> {
        let mut mass = 0.0;
        let mut len = 0.0;
        for (&c, &f) in freqs {
            let p = self.piece(c)?;
            let total = p.signed_total();
            mass += f * total;
            len += f * p.length();
        }
        Ok(mass / len)
    }
}

/// `s_0 = 0, s_{n+1} = s_n + l_{x(n)}` over the right half of the word.
pub fn boundary_times(model: &SuspensionModel, w: &SubshiftWord) -> Result<Vec<f64>> {
    let lens = w.right_half().iter().map(|&c| model.length(c)).collect::<Result<Vec<_>>>()?;
    Ok(compensated_prefix(0.0, lens))
}

/// `s_{-n}` for `n = 0, 1, ...` over the left half of the word.
pub fn left_boundary_times(model: &SuspensionModel, w: &SubshiftWord) -> Result<Vec<f64>> {
    let lens = w.left_half_reversed().map(|c| model.length(c).map(|l| -l)).collect::<Result<Vec<_>>>()?;
    Ok(compensated_prefix(0.0, lens))
}

/// `ω_x` on the window `[s_{-m}, s_k]` covered by the word.
pub fn build_omega(model: &SuspensionModel, w: &SubshiftWord) -> Result<WindowMeasure> {
    let pieces = w
        .symbols()
        .iter()
        .map(|&c| model.piece(c).cloned())
        .collect::<Result<Vec<_>>>()?;
    WindowMeasure::anchored_with_bound(&pieces, w.origin(), model.unif_norm_bound())
}

/// A translate `α_t(ω_x)` together with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct HullSample {
    pub word_shift: usize,
    pub shift_t: f64,
    /// Total translation applied to `ω_x`: `s_{word_shift} + shift_t`.
    pub translation: f64,
    pub measure: WindowMeasure,
}

/// `α_t(ω_x)`, checked to cover `cover` after translation.
pub fn hull_sample(
    model: &SuspensionModel,
    w: &SubshiftWord,
    t: f64,
    cover: (f64, f64),
) -> Result<HullSample> {
    let omega = build_omega(model, w)?;
    sample_from(&omega, 0, 0.0, t, cover)
}

fn sample_from(
    omega: &WindowMeasure,
    word_shift: usize,
    s_j: f64,
    t: f64,
    cover: (f64, f64),
) -> Result<HullSample> {
    let measure = omega.translate(s_j + t);
    measure.require_coverage(cover.0, cover.1)?;
    Ok(HullSample { word_shift, shift_t: t, translation: s_j + t, measure })
}

/// Deterministic hull grid: shifts `k · Δ` with `Δ = max_a l_a / steps`,
/// `k = 0..steps`, crossed with word shifts `S^j`, `j = 0..=max_word_shift`.
/// `ω_{S^j x} = α_{s_j}(ω_x)`, so each sample is a translate of one build.
pub fn hull_grid(
    model: &SuspensionModel,
    w: &SubshiftWord,
    steps: usize,
    max_word_shift: usize,
    cover: (f64, f64),
) -> Result<Vec<HullSample>> {
    let omega = build_omega(model, w)?;
    let times = boundary_times(model, w)?;
    if max_word_shift >= times.len() {
        return Err(Error::InsufficientWindow { len: w.len(), needed: max_word_shift + 1 });
    }
    let delta = model.max_length() / steps.max(1) as f64;
    let mut out = Vec::with_capacity((max_word_shift + 1) * steps.max(1));
    for (j, &s_j) in times.iter().enumerate().take(max_word_shift + 1) {
        for k in 0..steps.max(1) {
            out.push(sample_from(&omega, j, s_j, k as f64 * delta, cover)?);
        }
    }
    Ok(out)
}

/// Extra hull samples at the given `(word shift, t)` pairs.
pub fn hull_samples_at(
    model: &SuspensionModel,
    w: &SubshiftWord,
    points: &[(usize, f64)],
    cover: (f64, f64),
) -> Result<Vec<HullSample>> {
    let omega = build_omega(model, w)?;
    let times = boundary_times(model, w)?;
    points
        .iter()
        .map(|&(j, t)| {
            let s_j = *times
                .get(j)
                .ok_or(Error::InsufficientWindow { len: w.len(), needed: j + 1 })?;
            sample_from(&omega, j, s_j, t, cover)
        })
        .collect()
}

/// Smallest word length (right half) whose boundary times reach `t`.
pub fn symbols_to_cover(model: &SuspensionModel, t: f64) -> usize {
    (t / model.min_length()).ceil() as usize + 1
}
