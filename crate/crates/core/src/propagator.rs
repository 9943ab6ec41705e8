//! Solutions of `-u'' + μ u = z u` and their transfer matrices.
//!
//! `u'` is carried as the right derivative `u'(t+)`, so the transfer over
//! `[a, b]` integrates the half-open interval `(a, b]`: an atom sitting at `b`
//! is crossed, an atom at `a` is not.

use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measure::{Density, DensityView, Item, WindowMeasure, POSITION_TOL};
use crate::subshift::SubshiftWord;
use crate::suspension::{boundary_times, build_omega, SuspensionModel};

const RENORM_AT: f64 = 1e100;
const SERIES_BELOW: f64 = 1e-6;
const MAX_DECAY_PER_STEP: f64 = 20.0;

/// Real or complex field the propagation runs over.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn abs(self) -> f64;
    fn norm_sqr(self) -> f64;
    fn is_finite(self) -> bool;
    fn conj(self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn to_complex(self) -> Complex64;
    /// `(cos(kℓ), sin(kℓ)/k)` with `k² = q`, continued analytically through `q = 0`.
    fn free_coefficients(q: Self, len: f64) -> (Self, Self);
    /// Growth rate `|Im √q|` of solutions with `k² = q`.
    fn decay_rate(q: Self) -> f64;
}

fn series(y: f64) -> (f64, f64) {
    let c = 1.0 - y / 2.0 + y * y / 24.0 - y * y * y / 720.0 + y * y * y * y / 40320.0;
    let s = 1.0 - y / 6.0 + y * y / 120.0 - y * y * y / 5040.0 + y * y * y * y / 362880.0;
    (c, s)
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn conj(self) -> Self {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn free_coefficients(q: f64, len: f64) -> (f64, f64) {
        let y = q * len * len;
        if y.abs() < SERIES_BELOW {
            let (c, s) = series(y);
            return (c, len * s);
        }
        if q > 0.0 {
            let k = q.sqrt();
            ((k * len).cos(), (k * len).sin() / k)
        } else {
            let k = (-q).sqrt();
            ((k * len).cosh(), (k * len).sinh() / k)
        }
    }
    fn decay_rate(q: f64) -> f64 {
        if q < 0.0 {
            (-q).sqrt()
        } else {
            0.0
        }
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn free_coefficients(q: Complex64, len: f64) -> (Complex64, Complex64) {
        let y = q * (len * len);
        if y.norm() < SERIES_BELOW {
            let one = Complex64::new(1.0, 0.0);
            let c = one - y / 2.0 + y * y / 24.0 - y * y * y / 720.0 + y * y * y * y / 40320.0;
            let s = one - y / 6.0 + y * y / 120.0 - y * y * y / 5040.0 + y * y * y * y / 362880.0;
            return (c, s * len);
        }
        let k = upper_sqrt(q);
        let x = k * len;
        (x.cos(), x.sin() / k)
    }
    fn decay_rate(q: Complex64) -> f64 {
        upper_sqrt(q).im.abs()
    }
}

/// Square root on the branch with `Im ≥ 0`.
pub fn upper_sqrt(q: Complex64) -> Complex64 {
    let r = q.sqrt();
    if r.im < 0.0 {
        -r
    } else {
        r
    }
}

/// `e^{log_scale} · [[a, b], [c, d]]`. Columns are the Neumann and Dirichlet
/// solutions `(u, u')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix<S> {
    entries: [S; 4],
    log_scale: f64,
}

fn mul2<S: Scalar>(p: &[S; 4], q: &[S; 4]) -> [S; 4] {
    [
        p[0] * q[0] + p[1] * q[2],
        p[0] * q[1] + p[1] * q[3],
        p[2] * q[0] + p[3] * q[2],
        p[2] * q[1] + p[3] * q[3],
    ]
}

impl<S: Scalar> TransferMatrix<S> {
    pub fn identity() -> Self {
        let (o, z) = (S::from_f64(1.0), S::from_f64(0.0));
        Self { entries: [o, z, z, o], log_scale: 0.0 }
    }

    pub fn from_entries(entries: [S; 4], log_scale: f64) -> Self {
        let mut m = Self { entries, log_scale };
        m.renormalize();
        m
    }

    pub fn entries(&self) -> [S; 4] {
        self.entries
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Entries of the true matrix; overflows to infinity for huge scales.
    pub fn to_plain(&self) -> [S; 4] {
        let f = self.log_scale.exp();
        self.entries.map(|e| e.scale(f))
    }

    fn max_abs_sqr(&self) -> f64 {
        self.entries.iter().map(|e| e.norm_sqr()).fold(0.0, f64::max)
    }

    fn renormalize(&mut self) {
        let m2 = self.max_abs_sqr();
        if m2 > RENORM_AT * RENORM_AT && m2.is_finite() {
            let m = m2.sqrt();
            self.entries = self.entries.map(|e| e.scale(1.0 / m));
            self.log_scale += m.ln();
        }
    }

    /// `step · self`.
    pub(crate) fn left_mul_entries(&mut self, step: &[S; 4]) {
        self.entries = mul2(step, &self.entries);
        if self.max_abs_sqr() > RENORM_AT * RENORM_AT {
            self.renormalize();
        }
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        Self::from_entries(mul2(&self.entries, &rhs.entries), self.log_scale + rhs.log_scale)
    }

    /// Inverse of a unimodular matrix: the adjugate divided by the determinant.
    pub fn inverse(&self) -> Self {
        let [a, b, c, d] = self.entries;
        let det = self.det_entries();
        let adj = [d, -b, -c, a];
        // det(entries) = e^{-2L}·det(true); true inverse = adj(true)/det(true).
        let dabs = det.abs();
        if dabs > 0.0 && dabs.is_finite() {
            let l = -self.log_scale - dabs.ln();
            let phase = scalar_div(S::from_f64(dabs), det);
            Self::from_entries(adj.map(|e| e * phase), l)
        } else {
            Self::from_entries(adj, -self.log_scale)
        }
    }

    fn det_entries(&self) -> S {
        let [a, b, c, d] = self.entries;
        a * d - b * c
    }

    /// Determinant of the true matrix.
    pub fn det(&self) -> S {
        self.det_entries().scale((2.0 * self.log_scale).exp())
    }

    /// `|det(entries) − e^{−2L}|` relative to `‖entries‖²`.
    pub fn det_defect(&self) -> f64 {
        let target = S::from_f64((-2.0 * self.log_scale).exp());
        let n = self.norm_entries();
        (self.det_entries() - target).abs() / (n * n).max((-2.0 * self.log_scale).exp())
    }

    pub fn trace(&self) -> S {
        (self.entries[0] + self.entries[3]).scale(self.log_scale.exp())
    }

    /// Largest singular value of the entries.
    pub fn norm_entries(&self) -> f64 {
        let mx = self.max_abs_sqr().sqrt();
        if mx == 0.0 || !mx.is_finite() {
            return mx;
        }
        let e = self.entries.map(|e| e.scale(1.0 / mx));
        let f: f64 = e.iter().map(|e| e.norm_sqr()).sum();
        let det = (e[0] * e[3] - e[1] * e[2]).abs();
        let disc = (f * f - 4.0 * det * det).max(0.0).sqrt();
        mx * ((f + disc) / 2.0).sqrt()
    }

    /// `ln ‖T‖` with the spectral norm.
    pub fn ln_norm(&self) -> f64 {
        self.norm_entries().ln() + self.log_scale
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.is_finite()) && self.log_scale.is_finite()
    }

    /// `‖self − other‖_F / ‖other‖_F`, computed at a common scale.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let l = self.log_scale.max(other.log_scale);
        let fa = (self.log_scale - l).exp();
        let fb = (other.log_scale - l).exp();
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..4 {
            let a = self.entries[k].scale(fa);
            let b = other.entries[k].scale(fb);
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
        (num / den).sqrt()
    }

    /// `T·v` as (normalized vector, log of the factor removed).
    pub fn apply(&self, v: [S; 2]) -> ([S; 2], f64) {
        let [a, b, c, d] = self.entries;
        let w = [a * v[0] + b * v[1], c * v[0] + d * v[1]];
        let n = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
        if n > 0.0 && n.is_finite() {
            ([w[0].scale(1.0 / n), w[1].scale(1.0 / n)], self.log_scale + n.ln())
        } else {
            (w, self.log_scale)
        }
    }

    /// The true matrix applied to a state; finite only when the scale allows.
    pub fn apply_state(&self, s: &SolutionState<S>, t: f64) -> SolutionState<S> {
        let f = self.log_scale.exp();
        let [a, b, c, d] = self.entries;
        SolutionState {
            u: (a * s.u + b * s.du).scale(f),
            du: (c * s.u + d * s.du).scale(f),
            t,
        }
    }
}

impl TransferMatrix<f64> {
    pub fn to_complex(&self) -> TransferMatrix<Complex64> {
        TransferMatrix { entries: self.entries.map(|e| Complex64::new(e, 0.0)), log_scale: self.log_scale }
    }
}

fn scalar_div<S: Scalar>(num: S, den: S) -> S {
    // num / den = num · conj(den) / |den|².
    (num * den.conj()).scale(1.0 / den.norm_sqr())
}

/// `(u(t), u'(t+))` at position `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionState<S> {
    pub u: S,
    pub du: S,
    pub t: f64,
}

impl<S: Scalar> SolutionState<S> {
    pub fn new(u: S, du: S, t: f64) -> Self {
        Self { u, du, t }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.du.is_finite() && self.t.is_finite()
    }
}

/// Cross an atom: `u'(t+) = u'(t−) + mass · u(t)`.
pub fn step_atom<S: Scalar>(s: SolutionState<S>, mass: f64) -> SolutionState<S> {
    SolutionState { u: s.u, du: s.du + s.u.scale(mass), t: s.t }
}

/// Matrix of one segment of constant density `v` and length `len`.
fn constant_step<S: Scalar>(z: S, v: f64, len: f64) -> [S; 4] {
    let q = z - S::from_f64(v);
    let (c, s) = S::free_coefficients(q, len);
    [c, s, -(q * s), c]
}

/// Sub-steps needed to keep each factor's growth below `e^{20}`.
fn constant_substeps<S: Scalar>(z: S, v: f64, len: f64) -> usize {
    let rate = S::decay_rate(z - S::from_f64(v));
    ((rate * len / MAX_DECAY_PER_STEP).ceil() as usize).max(1)
}

fn profile_steps<S: Scalar>(z: S, view: &DensityView, x0: f64, x1: f64) -> usize {
    let (vmin, vmax) = match &view.density {
        Density::Constant(v) => (*v, *v),
        Density::Sampled(s) => {
            s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
        }
    };
    let qmax = (z - S::from_f64(vmin)).abs().max((z - S::from_f64(vmax)).abs());
    let len = x1 - x0;
    let base = (len * 8f64.max(4.0 * qmax.sqrt())).ceil() as usize;
    32 * base.max(1)
}

/// Classical RK4 on `Y' = [[0, 1], [V − z, 0]] Y` over `[x0, x1]`, applied to
/// `m`. Steps never straddle a sample node, where `V` has a kink.
fn profile_propagate<S: Scalar>(z: S, view: &DensityView, x0: f64, x1: f64, m: &mut TransferMatrix<S>) {
    let n = profile_steps(z, view, x0, x1);
    let h_max = (x1 - x0) / n as f64;
    let mut cuts = vec![x0];
    if let Density::Sampled(s) = &view.density {
        let k = s.len() - 1;
        let w = (view.hi - view.lo) / k as f64;
        cuts.extend((1..k).map(|i| view.lo + i as f64 * w).filter(|&x| x > x0 && x < x1));
    }
    cuts.push(x1);
    for c in cuts.windows(2) {
        let pieces = ((c[1] - c[0]) / h_max).ceil().max(1.0) as usize;
        rk4_run(z, view, c[0], c[1], pieces, m);
    }
}

fn rk4_run<S: Scalar>(z: S, view: &DensityView, x0: f64, x1: f64, n: usize, m: &mut TransferMatrix<S>) {
    let h = (x1 - x0) / n as f64;
    let one = S::from_f64(1.0);
    let zero = S::from_f64(0.0);
    let coeff = |x: f64| S::from_f64(view.value_at(x)) - z;
    let rhs = |p: S, y: &[S; 4]| [y[2], y[3], p * y[0], p * y[1]];
    for i in 0..n {
        let x = x0 + i as f64 * h;
        let (p0, pm, p1) = (coeff(x), coeff(x + h / 2.0), coeff(x + h));
        // Propagate the identity across one step, then fold into m.
        let y = [one, zero, zero, one];
        let k1 = rhs(p0, &y);
        let y2 = add_scaled(&y, &k1, h / 2.0);
        let k2 = rhs(pm, &y2);
        let y3 = add_scaled(&y, &k2, h / 2.0);
        let k3 = rhs(pm, &y3);
        let y4 = add_scaled(&y, &k3, h);
        let k4 = rhs(p1, &y4);
        let mut step = y;
        for k in 0..4 {
            step[k] = y[k] + (k1[k] + k2[k].scale(2.0) + k3[k].scale(2.0) + k4[k]).scale(h / 6.0);
        }
        m.left_mul_entries(&step);
    }
}

fn add_scaled<S: Scalar>(y: &[S; 4], k: &[S; 4], h: f64) -> [S; 4] {
    [y[0] + k[0].scale(h), y[1] + k[1].scale(h), y[2] + k[2].scale(h), y[3] + k[3].scale(h)]
}

fn check_finite_input<S: Scalar>(z: S, len: f64) -> Result<()> {
    if !z.is_finite() || !len.is_finite() {
        return Err(Error::NonFinite(format!("energy {z:?}, length {len}")));
    }
    Ok(())
}

/// Propagate a state across a segment of length `len` with density `density`.
/// Sampled densities are spread evenly over `[s.t, s.t + len]`.
pub fn step_interval<S: Scalar>(s: SolutionState<S>, z: S, density: &Density, len: f64) -> Result<SolutionState<S>> {
    check_finite_input(z, len)?;
    if !s.is_finite() {
        return Err(Error::NonFinite("solution state".into()));
    }
    if len <= 0.0 {
        return Err(Error::Precondition(format!("segment length {len} must be positive")));
    }
    let mut m = TransferMatrix::identity();
    match density {
        Density::Constant(v) => {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("density {v}")));
            }
            let n = constant_substeps(z, *v, len);
            let step = constant_step(z, *v, len / n as f64);
            for _ in 0..n {
                m.left_mul_entries(&step);
            }
        }
        Density::Sampled(_) => {
            let view = DensityView { density: density.clone(), lo: s.t, hi: s.t + len, reversed: false };
            profile_propagate(z, &view, s.t, s.t + len, &mut m);
        }
    }
    let out = m.apply_state(&s, s.t + len);
    if !out.is_finite() {
        return Err(Error::NonFinite("propagated state".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Step {
    Kind(usize),
    Profile(usize),
    Atom(f64),
    Mark(usize),
}

/// A measure restricted to `[a, b]`, flattened into propagation steps once so
/// that many energies can be run through it cheaply.
#[derive(Debug, Clone)]
pub struct Path {
    start: f64,
    end: f64,
    steps: Vec<Step>,
    kinds: Vec<(f64, f64)>,
    profiles: Vec<(DensityView, f64, f64)>,
    marks: Vec<f64>,
}

struct Compiler<'a> {
    steps: Vec<Step>,
    kind_index: HashMap<(u64, u64), usize>,
    kinds: Vec<(f64, f64)>,
    profiles: Vec<(DensityView, f64, f64)>,
    marks: &'a [f64],
    next_mark: usize,
    cursor: f64,
}

impl Compiler<'_> {
    fn push_const(&mut self, v: f64, len: f64) {
        if len <= 0.0 {
            return;
        }
        let key = (v.to_bits(), len.to_bits());
        let kinds = &mut self.kinds;
        let idx = *self.kind_index.entry(key).or_insert_with(|| {
            kinds.push((v, len));
            kinds.len() - 1
        });
        self.steps.push(Step::Kind(idx));
    }

    fn push_segment(&mut self, view: Option<&DensityView>, x1: f64) {
        let x0 = self.cursor;
        if x1 <= x0 {
            return;
        }
        match view.map(|v| (v, v.density.as_constant())) {
            None => self.push_const(0.0, x1 - x0),
            Some((_, Some(v))) => self.push_const(v, x1 - x0),
            Some((view, None)) => {
                self.profiles.push((view.clone(), x0, x1));
                self.steps.push(Step::Profile(self.profiles.len() - 1));
            }
        }
        self.cursor = x1;
    }

    fn advance(&mut self, target: f64, view: Option<&DensityView>) {
        while self.next_mark < self.marks.len() && self.marks[self.next_mark] < target {
            let m = self.marks[self.next_mark];
            self.push_segment(view, m);
            self.steps.push(Step::Mark(self.next_mark));
            self.next_mark += 1;
        }
        self.push_segment(view, target);
    }
}

impl Path {
    /// Flatten `m` over `[a, b]`, `a ≤ b`, recording the transfer at each
    /// sorted checkpoint in `marks ⊆ [a, b]`. A checkpoint at an atom sees the
    /// atom already crossed.
    pub fn compile(m: &WindowMeasure, a: f64, b: f64, marks: &[f64]) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite(format!("interval [{a}, {b}]")));
        }
        if b < a {
            return Err(Error::Precondition(format!("path needs a <= b, got [{a}, {b}]")));
        }
        if marks.windows(2).any(|w| w[1] < w[0]) || marks.iter().any(|&x| x < a || x > b) {
            return Err(Error::Precondition("checkpoints must be sorted and inside the interval".into()));
        }
        m.require_coverage(a, b)?;
        let tol = POSITION_TOL * a.abs().max(b.abs()).max(1.0);
        let mut c = Compiler {
            steps: Vec::new(),
            kind_index: HashMap::new(),
            kinds: Vec::new(),
            profiles: Vec::new(),
            marks,
            next_mark: 0,
            cursor: a,
        };
        m.for_each_item(a, b, |item| match item {
            Item::Atom { x, mass } => {
                if x > a + tol && x <= b + tol && mass != 0.0 {
                    c.advance(x.min(b), None);
                    c.steps.push(Step::Atom(mass));
                }
            }
            Item::Segment { x0, x1, density } => {
                let lo = x0.max(a);
                let hi = x1.min(b);
                if hi > lo {
                    c.advance(lo, None);
                    c.advance(hi, Some(&density));
                }
            }
        });
        c.advance(b, None);
        while c.next_mark < marks.len() {
            c.steps.push(Step::Mark(c.next_mark));
            c.next_mark += 1;
        }
        Ok(Self { start: a, end: b, steps: c.steps, kinds: c.kinds, profiles: c.profiles, marks: marks.to_vec() })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    /// Transfer over the whole path, calling `on_mark(i, T(a → marks[i]))`.
    pub fn propagate_with<S: Scalar>(
        &self,
        z: S,
        mut on_mark: impl FnMut(usize, &TransferMatrix<S>),
    ) -> Result<TransferMatrix<S>> {
        check_finite_input(z, self.end - self.start)?;
        let table: Vec<([S; 4], usize)> = self
            .kinds
            .iter()
            .map(|&(v, len)| {
                let n = constant_substeps(z, v, len);
                (constant_step(z, v, len / n as f64), n)
            })
            .collect();
        let mut m = TransferMatrix::identity();
        for step in &self.steps {
            match step {
                Step::Kind(k) => {
                    let (e, n) = &table[*k];
                    for _ in 0..*n {
                        m.left_mul_entries(e);
                    }
                }
                Step::Atom(mass) => {
                    let o = S::from_f64(1.0);
                    let zr = S::from_f64(0.0);
                    m.left_mul_entries(&[o, zr, S::from_f64(*mass), o]);
                }
                Step::Profile(p) => {
                    let (view, x0, x1) = &self.profiles[*p];
                    profile_propagate(z, view, *x0, *x1, &mut m);
                }
                Step::Mark(i) => on_mark(*i, &m),
            }
        }
        if !m.is_finite() {
            return Err(Error::NonFinite(format!("transfer matrix at z = {z:?}")));
        }
        Ok(m)
    }

    pub fn propagate<S: Scalar>(&self, z: S) -> Result<TransferMatrix<S>> {
        self.propagate_with(z, |_, _| {})
    }

    /// Transfer matrices at every checkpoint, then at the path end.
    pub fn propagate_marks<S: Scalar>(&self, z: S) -> Result<(Vec<TransferMatrix<S>>, TransferMatrix<S>)> {
        let mut at = vec![TransferMatrix::identity(); self.marks.len()];
        let end = self.propagate_with(z, |i, m| at[i] = *m)?;
        Ok((at, end))
    }
}

/// `T_z` from `a` to `b`; for `b < a` the inverse of the forward transfer.
pub fn transfer_matrix<S: Scalar>(m: &WindowMeasure, z: S, a: f64, b: f64) -> Result<TransferMatrix<S>> {
    if b >= a {
        Path::compile(m, a, b, &[])?.propagate(z)
    } else {
        Ok(Path::compile(m, b, a, &[])?.propagate(z)?.inverse())
    }
}

/// Transfer across the single piece of symbol `c`.
pub fn symbol_matrix(model: &SuspensionModel, c: char, e: f64) -> Result<TransferMatrix<f64>> {
    let piece = model.piece(c)?;
    let w = WindowMeasure::tiled(0.0, std::slice::from_ref(piece))?;
    transfer_matrix(&w, e, 0.0, piece.length())
}

/// `T_E(s_n, ω_x)`: transfer over the first `n` symbols of the right half.
pub fn discrete_cocycle(model: &SuspensionModel, w: &SubshiftWord, e: f64, n: usize) -> Result<TransferMatrix<f64>> {
    let times = boundary_times(model, w)?;
    let s_n = *times.get(n).ok_or(Error::InsufficientWindow { len: w.right_half().len(), needed: n })?;
    if n == 0 {
        return Ok(TransferMatrix::identity());
    }
    let omega = build_omega(model, w)?;
    transfer_matrix(&omega, e, 0.0, s_n)
}
