//! Finite pieces, windowed local measures and the decomposition-property checks.
//!
//! A [`PieceMeasure`] is a finite signed measure on `[0, length]` made of point
//! masses and piecewise densities. Pieces concatenate end to end. A
//! [`WindowMeasure`] places a sequence of pieces on a finite window of the real
//! line and supports the translation and reflection actions without touching
//! the stored pieces: positions are resolved lazily through an orientation
//! sign and a shift.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Absolute tolerance used when comparing positions that should coincide.
pub const POSITION_TOL: f64 = 1e-12;

/// Density of a segment, either constant or uniformly sampled and linearly
/// interpolated between samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Constant(f64),
    Sampled(Arc<[f64]>),
}

impl Density {
    fn is_finite(&self) -> bool {
        match self {
            Density::Constant(v) => v.is_finite(),
            Density::Sampled(s) => s.iter().all(|v| v.is_finite()),
        }
    }

    /// The constant value if the density does not vary.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Density::Constant(v) => Some(*v),
            Density::Sampled(s) => {
                let first = s[0];
                s.iter().all(|&v| v == first).then_some(first)
            }
        }
    }

    /// Largest absolute value.
    pub fn max_abs(&self) -> f64 {
        match self {
            Density::Constant(v) => v.abs(),
            Density::Sampled(s) => s.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            Density::Constant(v) => *v,
            Density::Sampled(s) => s.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySegment {
    pub lo: f64,
    pub hi: f64,
    pub density: Density,
}

impl DensitySegment {
    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        DensitySegment { lo, hi, density: Density::Constant(value) }
    }

    pub fn sampled(lo: f64, hi: f64, samples: Vec<f64>) -> Self {
        DensitySegment { lo, hi, density: Density::Sampled(samples.into()) }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn value_at(&self, x: f64) -> f64 {
        DensityView {
            density: self.density.clone(),
            lo: self.lo,
            hi: self.hi,
            reversed: false,
        }
        .value_at(x)
    }
}

/// A density segment placed on the physical line. `reversed` is set when the
/// window is reflected, so sample order runs from `hi` down to `lo`.
#[derive(Debug, Clone)]
pub(crate) struct DensityView {
    pub density: Density,
    pub lo: f64,
    pub hi: f64,
    pub reversed: bool,
}

impl DensityView {
    fn unit_coord(&self, x: f64) -> f64 {
        let f = ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        if self.reversed {
            1.0 - f
        } else {
            f
        }
    }

    pub fn value_at(&self, x: f64) -> f64 {
        match &self.density {
            Density::Constant(v) => *v,
            Density::Sampled(s) => {
                let f = self.unit_coord(x) * (s.len() - 1) as f64;
                let k = (f.floor() as usize).min(s.len() - 2);
                let w = f - k as f64;
                s[k] * (1.0 - w) + s[k + 1] * w
            }
        }
    }

    fn integral(&self, x0: f64, x1: f64, absolute: bool) -> f64 {
        if x1 <= x0 {
            return 0.0;
        }
        match &self.density {
            Density::Constant(v) => {
                let v = if absolute { v.abs() } else { *v };
                v * (x1 - x0)
            }
            Density::Sampled(s) => {
                let (mut f0, mut f1) = (self.unit_coord(x0), self.unit_coord(x1));
                if f0 > f1 {
                    std::mem::swap(&mut f0, &mut f1);
                }
                (self.hi - self.lo) * unit_integral(s, f0, f1, absolute)
            }
        }
    }
}

/// Integral over `[f0, f1] ⊆ [0, 1]` of the piecewise-linear interpolant of
/// `samples` placed at nodes `k / (n - 1)`.
fn unit_integral(samples: &[f64], f0: f64, f1: f64, absolute: bool) -> f64 {
    let cells = (samples.len() - 1) as f64;
    let eval = |f: f64| {
        let g = f * cells;
        let k = (g.floor() as usize).min(samples.len() - 2);
        let w = g - k as f64;
        samples[k] * (1.0 - w) + samples[k + 1] * w
    };
    let k0 = ((f0 * cells).floor() as usize).min(samples.len() - 2);
    let k1 = ((f1 * cells).ceil() as usize).clamp(1, samples.len() - 1);
    let mut total = 0.0;
    for k in k0..k1 {
        let c0 = (k as f64 / cells).max(f0);
        let c1 = ((k + 1) as f64 / cells).min(f1);
        if c1 <= c0 {
            continue;
        }
        let (v0, v1) = (eval(c0), eval(c1));
        let h = c1 - c0;
        total += if !absolute {
            0.5 * (v0 + v1) * h
        } else if v0 * v1 >= 0.0 {
            0.5 * (v0.abs() + v1.abs()) * h
        } else {
            0.5 * (v0 * v0 + v1 * v1) / (v0.abs() + v1.abs()) * h
        };
    }
    total
}

/// Neumaier-compensated prefix sums: `[start, start + v0, start + v0 + v1, ...]`.
pub(crate) fn compensated_prefix<I: IntoIterator<Item = f64>>(start: f64, values: I) -> Vec<f64> {
    let mut sum = start;
    let mut comp = 0.0;
    let mut out = vec![start];
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        out.push(sum + comp);
    }
    out
}

/// A single uncomposed piece.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Leaf {
    pub length: f64,
    pub atoms: Vec<(f64, f64)>,
    pub segments: Vec<DensitySegment>,
}

impl Leaf {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPiece(m));
        if !(self.length.is_finite() && self.length > 0.0) {
            return bad(format!("length must be positive and finite, got {}", self.length));
        }
        let mut prev = f64::NEG_INFINITY;
        for &(p, m) in &self.atoms {
            if !p.is_finite() || !m.is_finite() {
                return bad(format!("non-finite atom ({p}, {m})"));
            }
            if p < 0.0 || p > self.length {
                return bad(format!("atom at {p} outside [0, {}]", self.length));
            }
            if p <= prev {
                return bad("atom positions must be strictly increasing".into());
            }
            prev = p;
        }
        let mut end = 0.0f64;
        for s in &self.segments {
            if !(s.lo.is_finite() && s.hi.is_finite() && s.lo < s.hi) {
                return bad(format!("degenerate density segment [{}, {}]", s.lo, s.hi));
            }
            if s.lo < end - POSITION_TOL || s.hi > self.length + POSITION_TOL || s.lo < 0.0 {
                return bad(format!(
                    "density segment [{}, {}] overlaps or leaves [0, {}]",
                    s.lo, s.hi, self.length
                ));
            }
            if let Density::Sampled(v) = &s.density {
                if v.len() < 2 {
                    return bad("sampled profile needs at least two samples".into());
                }
            }
            if !s.density.is_finite() {
                return bad("non-finite density value".into());
            }
            end = s.hi;
        }
        Ok(())
    }

    fn total_variation(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|(_, m)| m.abs()).sum();
        let dens: f64 = self
            .segments
            .iter()
            .map(|s| {
                DensityView { density: s.density.clone(), lo: s.lo, hi: s.hi, reversed: false }
                    .integral(s.lo, s.hi, true)
            })
            .sum();
        atoms + dens
    }
}

/// A finite measure on `[0, length]`: atoms plus piecewise densities.
///
/// Concatenations keep their constituents, so `(A|B)|C` and `A|(B|C)` are the
/// same value bit for bit: both flatten to the same constituent list and all
/// offsets come from one compensated left-to-right sum.
#[derive(Debug, Clone)]
pub struct PieceMeasure {
    leaves: Vec<Arc<Leaf>>,
    offsets: Vec<f64>,
}

impl PartialEq for PieceMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.leaves == other.leaves
    }
}

impl PieceMeasure {
    pub fn new(length: f64, atoms: Vec<(f64, f64)>, segments: Vec<DensitySegment>) -> Result<Self> {
        let leaf = Leaf { length, atoms, segments };
        leaf.validate()?;
        Ok(Self::from_leaves(vec![Arc::new(leaf)]))
    }

    fn from_leaves(leaves: Vec<Arc<Leaf>>) -> Self {
        let offsets = compensated_prefix(0.0, leaves.iter().map(|l| l.length));
        PieceMeasure { leaves, offsets }
    }

    /// The zero measure on `[0, length]`.
    pub fn zero(length: f64) -> Result<Self> {
        Self::new(length, vec![], vec![])
    }

    /// `value · λ` restricted to `[0, length]`.
    pub fn constant(length: f64, value: f64) -> Result<Self> {
        Self::new(length, vec![], vec![DensitySegment::constant(0.0, length, value)])
    }

    /// A single point mass on `[0, length]`.
    pub fn atom(length: f64, position: f64, mass: f64) -> Result<Self> {
        Self::new(length, vec![(position, mass)], vec![])
    }

    pub fn length(&self) -> f64 {
        *self.offsets.last().expect("offsets never empty")
    }

    pub(crate) fn leaves(&self) -> impl Iterator<Item = (f64, &Arc<Leaf>)> {
        self.offsets.iter().copied().zip(self.leaves.iter())
    }

    /// Atoms in increasing position; coincident atoms at constituent
    /// boundaries are merged by adding their masses.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (off, leaf) in self.leaves() {
            for &(p, m) in &leaf.atoms {
                let x = off + p;
                match out.last_mut() {
                    Some(last) if (last.0 - x).abs() <= POSITION_TOL => last.1 += m,
                    _ => out.push((x, m)),
                }
            }
        }
        out
    }

    /// Density segments shifted to their position in this piece.
    pub fn segments(&self) -> Vec<DensitySegment> {
        self.leaves()
            .flat_map(|(off, leaf)| {
                leaf.segments.iter().map(move |s| DensitySegment {
                    lo: off + s.lo,
                    hi: off + s.hi,
                    density: s.density.clone(),
                })
            })
            .collect()
    }

    pub fn is_atomless(&self) -> bool {
        self.leaves.iter().all(|l| l.atoms.iter().all(|&(_, m)| m == 0.0))
    }

    /// `|ν|([0, length])`.
    pub fn total_variation(&self) -> f64 {
        self.leaves.iter().map(|l| l.total_variation()).sum()
    }

    /// `ν([0, length])`.
    pub fn signed_total(&self) -> f64 {
        let atoms: f64 = self.leaves.iter().flat_map(|l| l.atoms.iter()).map(|a| a.1).sum();
        let dens: f64 = self
            .segments()
            .iter()
            .map(|s| {
                DensityView { density: s.density.clone(), lo: s.lo, hi: s.hi, reversed: false }
                    .integral(s.lo, s.hi, false)
            })
            .sum();
        atoms + dens
    }

    /// `Some(c)` when the piece equals `c · 1_[0,length] · λ`.
    pub fn lebesgue_multiple(&self) -> Option<f64> {
        if !self.is_atomless() {
            return None;
        }
        let segs = self.segments();
        let mut value: Option<f64> = None;
        let mut covered = 0.0;
        for s in &segs {
            let c = s.density.as_constant()?;
            match value {
                Some(v) if v != c => return None,
                _ => value = Some(c),
            }
            covered += s.len();
        }
        match value {
            None => Some(0.0),
            Some(0.0) => Some(0.0),
            Some(c) if (covered - self.length()).abs() <= 1e-12 * self.length().max(1.0) => Some(c),
            Some(_) => None,
        }
    }

    /// Compare positions and values up to `tol`, ignoring how the piece was
    /// composed.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
        if !close(self.length(), other.length()) {
            return false;
        }
        let (a1, a2) = (self.atoms(), other.atoms());
        if a1.len() != a2.len() || a1.iter().zip(&a2).any(|(x, y)| !close(x.0, y.0) || !close(x.1, y.1)) {
            return false;
        }
        let (s1, s2) = (self.segments(), other.segments());
        s1.len() == s2.len()
            && s1.iter().zip(&s2).all(|(x, y)| {
                close(x.lo, y.lo)
                    && close(x.hi, y.hi)
                    && match (&x.density, &y.density) {
                        (Density::Constant(u), Density::Constant(v)) => close(*u, *v),
                        (Density::Sampled(u), Density::Sampled(v)) => {
                            u.len() == v.len() && u.iter().zip(v.iter()).all(|(p, q)| close(*p, *q))
                        }
                        _ => false,
                    }
            })
    }
}

/// Glue pieces end to end; the k-th piece is shifted by the summed lengths of
/// its predecessors.
pub fn concatenate(pieces: &[PieceMeasure]) -> Result<PieceMeasure> {
    if pieces.is_empty() {
        return Err(Error::EmptyInput("concatenate needs at least one piece"));
    }
    let leaves = pieces.iter().flat_map(|p| p.leaves.iter().cloned()).collect();
    Ok(PieceMeasure::from_leaves(leaves))
}

#[derive(Debug, Clone, PartialEq)]
struct Tile {
    offset: f64,
    leaf: Arc<Leaf>,
}

/// Something located on the physical line.
#[derive(Debug, Clone)]
pub(crate) enum Item {
    Atom { x: f64, mass: f64 },
    Segment { x0: f64, x1: f64, density: DensityView },
}

/// A local measure restricted to a finite window, tiled by pieces.
///
/// Physical position `x` and stored coordinate `y` are related by
/// `x = sigma * y - tau`; translation changes `tau`, reflection flips both.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMeasure {
    tiles: Arc<[Tile]>,
    y_lo: f64,
    y_hi: f64,
    sigma: f64,
    tau: f64,
    unif_norm_bound: f64,
}

impl WindowMeasure {
    /// Tile pieces starting at `start`; the uniform norm bound is measured.
    pub fn tiled(start: f64, pieces: &[PieceMeasure]) -> Result<Self> {
        let mut w = Self::build(start, pieces, f64::INFINITY)?;
        w.unif_norm_bound = w.sup_unit_variation();
        Ok(w)
    }

    /// Tile pieces with a declared bound on the variation of unit intervals.
    pub fn tiled_with_bound(start: f64, pieces: &[PieceMeasure], bound: f64) -> Result<Self> {
        let w = Self::build(start, pieces, bound)?;
        let sup = w.sup_unit_variation();
        if sup > bound * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::InvalidPiece(format!(
                "unit-interval variation {sup} exceeds declared bound {bound}"
            )));
        }
        Ok(w)
    }

    fn build(start: f64, pieces: &[PieceMeasure], bound: f64) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::EmptyInput("window needs at least one piece"));
        }
        if !start.is_finite() {
            return Err(Error::NonFinite("window start".into()));
        }
        let leaves: Vec<&Arc<Leaf>> = pieces.iter().flat_map(|p| p.leaves.iter()).collect();
        let offsets = compensated_prefix(start, leaves.iter().map(|l| l.length));
        let tiles: Vec<Tile> = leaves
            .iter()
            .zip(&offsets)
            .map(|(l, &o)| Tile { offset: o, leaf: Arc::clone(l) })
            .collect();
        Ok(WindowMeasure {
            tiles: tiles.into(),
            y_lo: start,
            y_hi: *offsets.last().unwrap(),
            sigma: 1.0,
            tau: 0.0,
            unif_norm_bound: bound,
        })
    }

    /// Tile pieces so that `pieces[anchor]` starts exactly at 0: offsets to
    /// the right are summed forward from 0, offsets to the left backward.
    pub fn anchored_with_bound(pieces: &[PieceMeasure], anchor: usize, bound: f64) -> Result<Self> {
        if anchor >= pieces.len() {
            return Err(Error::EmptyInput("anchor piece outside the piece list"));
        }
        let left: Vec<&Arc<Leaf>> = pieces[..anchor].iter().flat_map(|p| p.leaves.iter()).collect();
        let right: Vec<&Arc<Leaf>> = pieces[anchor..].iter().flat_map(|p| p.leaves.iter()).collect();
        let right_off = compensated_prefix(0.0, right.iter().map(|l| l.length));
        let left_off = compensated_prefix(0.0, left.iter().rev().map(|l| -l.length));
        let mut tiles: Vec<Tile> = left
            .iter()
            .rev()
            .zip(&left_off[1..])
            .map(|(l, &o)| Tile { offset: o, leaf: Arc::clone(l) })
            .collect();
        tiles.reverse();
        tiles.extend(right.iter().zip(&right_off).map(|(l, &o)| Tile { offset: o, leaf: Arc::clone(l) }));
        let w = WindowMeasure {
            tiles: tiles.into(),
            y_lo: *left_off.last().unwrap(),
            y_hi: *right_off.last().unwrap(),
            sigma: 1.0,
            tau: 0.0,
            unif_norm_bound: bound,
        };
        let sup = w.sup_unit_variation();
        if sup > bound * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::InvalidPiece(format!(
                "unit-interval variation {sup} exceeds declared bound {bound}"
            )));
        }
        Ok(w)
    }

    /// The zero measure on `[a, b]`.
    pub fn zero(a: f64, b: f64) -> Result<Self> {
        Self::tiled(a, &[PieceMeasure::zero(b - a)?])
    }

    /// Physical window `[a, b]`.
    pub fn window(&self) -> (f64, f64) {
        let p = self.sigma * self.y_lo - self.tau;
        let q = self.sigma * self.y_hi - self.tau;
        (p.min(q), p.max(q))
    }

    pub fn unif_norm_bound(&self) -> f64 {
        self.unif_norm_bound
    }

    pub fn piece_count(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_atomless(&self) -> bool {
        self.tiles.iter().all(|t| t.leaf.atoms.iter().all(|&(_, m)| m == 0.0))
    }

    /// `α_t`: the measure `ω(· + t)`. The window moves to `[a - t, b - t]`.
    pub fn translate(&self, t: f64) -> Self {
        WindowMeasure { tau: self.tau + t, tiles: Arc::clone(&self.tiles), ..*self }
    }

    /// The reflected measure `ω(-(·))`.
    pub fn reflect(&self) -> Self {
        WindowMeasure {
            sigma: -self.sigma,
            tau: -self.tau,
            tiles: Arc::clone(&self.tiles),
            ..*self
        }
    }

    fn covers(&self, a: f64, b: f64) -> bool {
        let (lo, hi) = self.window();
        let tol = POSITION_TOL * lo.abs().max(hi.abs()).max(1.0);
        a >= lo - tol && b <= hi + tol && a <= b
    }

    pub(crate) fn require_inside(&self, a: f64, b: f64) -> Result<()> {
        if self.covers(a, b) {
            Ok(())
        } else {
            let (window_lo, window_hi) = self.window();
            Err(Error::WindowViolation { lo: a, hi: b, window_lo, window_hi })
        }
    }

    pub(crate) fn require_coverage(&self, a: f64, b: f64) -> Result<()> {
        if self.covers(a, b) {
            Ok(())
        } else {
            let (window_lo, window_hi) = self.window();
            Err(Error::WindowCoverage { lo: a, hi: b, window_lo, window_hi })
        }
    }

    /// Visit every atom and density segment meeting `[a, b]` in increasing
    /// physical order. An atom at `x` comes after segments ending at `x` and
    /// before segments starting at `x`; segments containing an atom in their
    /// interior are split there.
    pub(crate) fn for_each_item(&self, a: f64, b: f64, mut f: impl FnMut(Item)) {
        let (y0, y1) = if self.sigma > 0.0 {
            (a + self.tau, b + self.tau)
        } else {
            (-b - self.tau, -a - self.tau)
        };
        let tol = POSITION_TOL * y0.abs().max(y1.abs()).max(1.0);
        let first = self.tiles.partition_point(|t| t.offset + t.leaf.length < y0 - tol);
        let last = self.tiles.partition_point(|t| t.offset <= y1 + tol);
        if first >= last {
            return;
        }
        let range = first..last;
        if self.sigma > 0.0 {
            for t in &self.tiles[range] {
                self.emit_tile(t, &mut f);
            }
        } else {
            for t in self.tiles[range].iter().rev() {
                self.emit_tile(t, &mut f);
            }
        }
    }

    fn emit_tile(&self, tile: &Tile, f: &mut impl FnMut(Item)) {
        let leaf = &tile.leaf;
        let (sig, tau, off) = (self.sigma, self.tau, tile.offset);
        let forward = sig > 0.0;
        let (na, ns) = (leaf.atoms.len(), leaf.segments.len());
        let atom = |k: usize| {
            let (p, m) = leaf.atoms[if forward { k } else { na - 1 - k }];
            (sig * (off + p) - tau, m)
        };
        let segment = |k: usize| {
            let s = &leaf.segments[if forward { k } else { ns - 1 - k }];
            let p = sig * (off + s.lo) - tau;
            let q = sig * (off + s.hi) - tau;
            let (lo, hi) = (p.min(q), p.max(q));
            (lo, hi, DensityView { density: s.density.clone(), lo, hi, reversed: !forward })
        };
        let (mut i, mut j) = (0, 0);
        let mut current: Option<(f64, f64, DensityView)> = None;
        loop {
            if current.is_none() && j < ns {
                current = Some(segment(j));
                j += 1;
            }
            match current.take() {
                None if i < na => {
                    let (x, mass) = atom(i);
                    f(Item::Atom { x, mass });
                    i += 1;
                }
                None => break,
                Some((x0, x1, density)) if i >= na => {
                    f(Item::Segment { x0, x1, density });
                }
                Some((x0, x1, density)) => {
                    let (x, mass) = atom(i);
                    if x <= x0 {
                        f(Item::Atom { x, mass });
                        i += 1;
                        current = Some((x0, x1, density));
                    } else if x >= x1 {
                        f(Item::Segment { x0, x1, density });
                    } else {
                        f(Item::Segment { x0, x1: x, density: density.clone() });
                        f(Item::Atom { x, mass });
                        i += 1;
                        current = Some((x, x1, density));
                    }
                }
            }
        }
    }

    fn variation(&self, a: f64, b: f64, include_left: bool, absolute: bool) -> f64 {
        let mut total = 0.0;
        self.for_each_item(a, b, |item| match item {
            Item::Atom { x, mass } => {
                let inside = if include_left { x >= a } else { x > a };
                if inside && x <= b {
                    total += if absolute { mass.abs() } else { mass };
                }
            }
            Item::Segment { x0, x1, density } => {
                total += density.integral(x0.max(a), x1.min(b), absolute);
            }
        });
        total
    }

    /// `|μ|([a, b])` for a closed interval inside the window.
    pub fn total_variation(&self, a: f64, b: f64) -> Result<f64> {
        self.require_inside(a, b)?;
        Ok(self.variation(a, b, true, true))
    }

    /// `|μ|((a, b])`.
    pub fn variation_half_open(&self, a: f64, b: f64) -> Result<f64> {
        self.require_inside(a, b)?;
        Ok(self.variation(a, b, false, true))
    }

    /// Signed mass `μ((a, b])`.
    pub fn signed_mass(&self, a: f64, b: f64) -> Result<f64> {
        self.require_inside(a, b)?;
        Ok(self.variation(a, b, false, false))
    }

    /// Atoms with position in `[a, b]`, physical coordinates, increasing.
    pub fn atoms_in(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        self.for_each_item(a, b, |item| {
            if let Item::Atom { x, mass } = item {
                if x >= a && x <= b {
                    out.push((x, mass));
                }
            }
        });
        out
    }

    /// Largest `|μ|((t, t + 1])` over unit intervals inside the window,
    /// evaluated at the positions where the maximum can occur.
    pub fn sup_unit_variation(&self) -> f64 {
        let (a, b) = self.window();
        if b - a <= 1.0 {
            return self.variation(a, b, true, true);
        }
        let mut candidates = vec![a, b - 1.0];
        self.for_each_item(a, b, |item| match item {
            Item::Atom { x, .. } => {
                candidates.push(x - 1.0);
                candidates.push(x - 1e-9 * x.abs().max(1.0));
            }
            Item::Segment { x0, x1, .. } => {
                candidates.extend([x0, x1, x0 - 1.0, x1 - 1.0]);
            }
        });
        candidates
            .into_iter()
            .filter(|&t| t >= a && t <= b - 1.0)
            .map(|t| self.variation(t, t + 1.0, false, true))
            .fold(0.0, f64::max)
    }

    /// The content of `[a, b]` as a piece on `[0, b - a]`. Atoms at both ends
    /// are kept. Clipped sampled profiles are resampled at their original
    /// spacing.
    pub fn slice(&self, a: f64, b: f64) -> Result<PieceMeasure> {
        self.require_inside(a, b)?;
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut segments = Vec::new();
        self.for_each_item(a, b, |item| match item {
            Item::Atom { x, mass } if x >= a && x <= b => match atoms.last_mut() {
                Some(last) if (last.0 - (x - a)).abs() <= POSITION_TOL => last.1 += mass,
                _ => atoms.push((x - a, mass)),
            },
            Item::Atom { .. } => {}
            Item::Segment { x0, x1, density } => {
                let (lo, hi) = (x0.max(a), x1.min(b));
                if hi <= lo {
                    return;
                }
                let seg = match &density.density {
                    Density::Constant(v) => DensitySegment::constant(lo - a, hi - a, *v),
                    Density::Sampled(s) => {
                        let spacing = (density.hi - density.lo) / (s.len() - 1) as f64;
                        let n = (((hi - lo) / spacing).ceil() as usize).max(1) + 1;
                        let samples = (0..n)
                            .map(|k| density.value_at(lo + (hi - lo) * k as f64 / (n - 1) as f64))
                            .collect();
                        DensitySegment::sampled(lo - a, hi - a, samples)
                    }
                };
                segments.push(seg);
            }
        });
        PieceMeasure::new(b - a, atoms, segments)
    }
}

/// A finite alphabet of local pieces with their Lebesgue-multiple flags.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionAlphabet {
    pieces: Vec<(String, PieceMeasure)>,
    lebesgue_flags: Vec<bool>,
}

impl DecompositionAlphabet {
    pub fn new(pieces: Vec<(String, PieceMeasure)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::EmptyInput("alphabet needs at least one piece"));
        }
        let lebesgue_flags = pieces.iter().map(|(_, p)| p.lebesgue_multiple().is_some()).collect();
        Ok(DecompositionAlphabet { pieces, lebesgue_flags })
    }

    pub fn pieces(&self) -> &[(String, PieceMeasure)] {
        &self.pieces
    }

    pub fn lebesgue_flags(&self) -> &[bool] {
        &self.lebesgue_flags
    }

    pub fn get(&self, id: &str) -> Option<&PieceMeasure> {
        self.pieces.iter().find(|(k, _)| k == id).map(|(_, p)| p)
    }

    pub fn is_atomless(&self) -> bool {
        self.pieces.iter().all(|(_, p)| p.is_atomless())
    }

    /// True when at least two pieces differ as measures.
    pub fn has_distinct_pieces(&self, tol: f64) -> bool {
        let first = &self.pieces[0].1;
        self.pieces.iter().skip(1).any(|(_, p)| !p.approx_eq(first, tol))
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum SfdpVerdict {
    Satisfied,
    ViolatedWithWitness { first: String, second: String },
}

impl SfdpVerdict {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, SfdpVerdict::Satisfied)
    }
}

/// Sufficient condition for the simple finite decomposition property: at most
/// one piece is a multiple of Lebesgue measure. Otherwise the first two such
/// pieces are returned as witness.
pub fn check_sfdp(alphabet: &DecompositionAlphabet) -> SfdpVerdict {
    let mut flagged = alphabet
        .pieces
        .iter()
        .zip(&alphabet.lebesgue_flags)
        .filter(|(_, &f)| f)
        .map(|((id, _), _)| id.clone());
    match (flagged.next(), flagged.next()) {
        (Some(first), Some(second)) => SfdpVerdict::ViolatedWithWitness { first, second },
        _ => SfdpVerdict::Satisfied,
    }
}
