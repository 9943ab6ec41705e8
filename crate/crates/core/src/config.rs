//! Experiment configuration: flat sectioned key–value text.
//!
//! ```text
//! version = 1
//!
//! [model]
//! rule a = ab
//! rule b = a
//! seed = a
//! left = mirror          # mirror | none | explicit letters x(-1) x(-2) ...
//!
//! [piece a]
//! length = 1
//! density 0 1 0
//!
//! [piece b]
//! length = 1
//! atom 0.5 1.0
//! profile 0 1 0 2 4 2 0
//!
//! [scan]
//! e_min = 0
//! e_max = 20
//! grid = 2000
//! t_max = 2000
//!
//! [output]
//! formats = csv json dat
//! ```
//!
//! A periodic model replaces the rules with `periodic = <one period>`.
//! Unknown sections and keys are errors; `#` starts a comment.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{DensitySegment, PieceMeasure};
use crate::subshift::{Substitution, SubshiftWord};
use crate::suspension::{symbols_to_cover, SuspensionModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeftExtension {
    Mirror,
    None,
    /// `x(-1), x(-2), ...` in this order.
    Explicit(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WordSource {
    Substitution { rules: Vec<(char, String)>, seed: char },
    Periodic(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub source: WordSource,
    pub left: LeftExtension,
    /// Lower bound on the right half of the word; the runner extends it to
    /// cover every scan horizon.
    pub min_symbols: usize,
    pub pieces: Vec<(char, PieceMeasure)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanConfig {
    pub e_min: f64,
    pub e_max: f64,
    pub grid: usize,
    pub t_max: f64,
    pub gamma_tol: f64,
    pub refine: usize,
    pub levels: Vec<usize>,
    pub floquet_resolution: f64,
    pub hull_steps: usize,
    pub word_shifts: usize,
    /// Extra hull samples drawn from the seeded generator.
    pub random_hull_samples: usize,
    pub uniformity_times: Vec<f64>,
    /// Empty means: a few evenly spaced grid energies.
    pub uniformity_energies: Vec<f64>,
    pub semi_epsilon: f64,
    pub truncation: f64,
    pub m_tolerance: f64,
    pub z: Vec<(f64, f64)>,
    pub boshernitzan_n: usize,
    pub boshernitzan_threshold: f64,
    pub boshernitzan_symbols: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            e_min: 0.0,
            e_max: 20.0,
            grid: 1000,
            t_max: 1000.0,
            gamma_tol: 1e-2,
            refine: 3,
            levels: vec![4, 5, 6, 7, 8],
            floquet_resolution: 1e-3,
            hull_steps: 8,
            word_shifts: 3,
            random_hull_samples: 0,
            uniformity_times: vec![1e2, 1e3],
            uniformity_energies: Vec::new(),
            semi_epsilon: 5e-2,
            truncation: 50.0,
            m_tolerance: 1e-4,
            z: vec![(-1.0, 0.5), (1.0, 1.0)],
            boshernitzan_n: 32,
            boshernitzan_threshold: 0.05,
            boshernitzan_symbols: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Dat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub formats: BTreeSet<Format>,
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub version: u32,
    pub model: ModelConfig,
    pub scan: ScanConfig,
    pub output: OutputConfig,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| err(line, format!("cannot parse '{v}' for {key}")))
}

fn nums<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split_whitespace().map(|x| num(line, key, x)).collect()
}

fn single_char(line: usize, v: &str) -> Result<char> {
    let mut it = v.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(err(line, format!("expected a single symbol, got '{v}'"))),
    }
}

#[derive(Default)]
struct PieceDraft {
    line: usize,
    length: Option<f64>,
    atoms: Vec<(f64, f64)>,
    segments: Vec<DensitySegment>,
}

enum Section {
    Top,
    Model,
    Piece(char),
    Scan,
    Output,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut rules: Vec<(char, String)> = Vec::new();
        let mut seed = None;
        let mut periodic = None;
        let mut left = LeftExtension::Mirror;
        let mut min_symbols = 0usize;
        let mut drafts: Vec<(char, PieceDraft)> = Vec::new();
        let mut scan = ScanConfig::default();
        let mut formats: BTreeSet<Format> = [Format::Csv, Format::Json, Format::Dat].into();
        let mut section = Section::Top;
        let mut z_seen = false;

        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(head) = line.strip_prefix('[') {
                let head = head.strip_suffix(']').ok_or_else(|| err(ln, "unterminated section header"))?.trim();
                section = match head.split_whitespace().collect::<Vec<_>>().as_slice() {
                    ["model"] => Section::Model,
                    ["scan"] => Section::Scan,
                    ["output"] => Section::Output,
                    ["piece", sym] => {
                        let c = single_char(ln, sym)?;
                        if drafts.iter().any(|d| d.0 == c) {
                            return Err(err(ln, format!("piece '{c}' defined twice")));
                        }
                        drafts.push((c, PieceDraft { line: ln, ..Default::default() }));
                        Section::Piece(c)
                    }
                    _ => return Err(err(ln, format!("unknown section [{head}]"))),
                };
                continue;
            }

            // `key = value`, or a bare directive `atom ...` inside a piece.
            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => {
                    let (k, v) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
                    (k, v.trim())
                }
            };

            match &section {
                Section::Top => match key {
                    "version" => version = Some(num::<u32>(ln, key, value)?),
                    _ => return Err(err(ln, format!("unknown top-level key '{key}'"))),
                },
                Section::Model => {
                    if let Some(sym) = key.strip_prefix("rule ") {
                        let c = single_char(ln, sym.trim())?;
                        if value.is_empty() {
                            return Err(err(ln, format!("rule for '{c}' has an empty image")));
                        }
                        rules.push((c, value.to_string()));
                        continue;
                    }
                    match key {
                        "seed" => seed = Some(single_char(ln, value)?),
                        "periodic" => {
                            if value.is_empty() {
                                return Err(err(ln, "periodic word is empty"));
                            }
                            periodic = Some(value.to_string());
                        }
                        "left" => {
                            left = match value {
                                "mirror" => LeftExtension::Mirror,
                                "none" => LeftExtension::None,
                                w if !w.is_empty() => LeftExtension::Explicit(w.to_string()),
                                _ => return Err(err(ln, "empty left extension")),
                            }
                        }
                        "symbols" => min_symbols = num(ln, key, value)?,
                        _ => return Err(err(ln, format!("unknown model key '{key}'"))),
                    }
                }
                Section::Piece(c) => {
                    let d = &mut drafts.iter_mut().find(|d| d.0 == *c).expect("piece registered").1;
                    match key {
                        "length" => d.length = Some(num(ln, key, value)?),
                        "atom" => match nums::<f64>(ln, key, value)?.as_slice() {
                            [pos, mass] => d.atoms.push((*pos, *mass)),
                            _ => return Err(err(ln, "atom expects: pos mass")),
                        },
                        "density" => match nums::<f64>(ln, key, value)?.as_slice() {
                            [lo, hi, v] => d.segments.push(DensitySegment::constant(*lo, *hi, *v)),
                            _ => return Err(err(ln, "density expects: lo hi value")),
                        },
                        "profile" => {
                            let v = nums::<f64>(ln, key, value)?;
                            if v.len() < 4 {
                                return Err(err(ln, "profile expects: lo hi v0 v1 ..."));
                            }
                            d.segments.push(DensitySegment::sampled(v[0], v[1], v[2..].to_vec()));
                        }
                        _ => return Err(err(ln, format!("unknown piece key '{key}'"))),
                    }
                }
                Section::Scan => {
                    let s = &mut scan;
                    match key {
                        "e_min" => s.e_min = num(ln, key, value)?,
                        "e_max" => s.e_max = num(ln, key, value)?,
                        "grid" => s.grid = num(ln, key, value)?,
                        "t_max" => s.t_max = num(ln, key, value)?,
                        "gamma_tol" => s.gamma_tol = num(ln, key, value)?,
                        "refine" => s.refine = num(ln, key, value)?,
                        "levels" => s.levels = nums(ln, key, value)?,
                        "floquet_resolution" => s.floquet_resolution = num(ln, key, value)?,
                        "hull_steps" => s.hull_steps = num(ln, key, value)?,
                        "word_shifts" => s.word_shifts = num(ln, key, value)?,
                        "random_hull_samples" => s.random_hull_samples = num(ln, key, value)?,
                        "uniformity_times" => s.uniformity_times = nums(ln, key, value)?,
                        "uniformity_energies" => s.uniformity_energies = nums(ln, key, value)?,
                        "semi_epsilon" => s.semi_epsilon = num(ln, key, value)?,
                        "truncation" => s.truncation = num(ln, key, value)?,
                        "m_tolerance" => s.m_tolerance = num(ln, key, value)?,
                        "z" => {
                            // The first `z` line replaces the defaults.
                            if !z_seen {
                                s.z.clear();
                                z_seen = true;
                            }
                            match nums::<f64>(ln, key, value)?.as_slice() {
                                [re, im] => s.z.push((*re, *im)),
                                _ => return Err(err(ln, "z expects: re im")),
                            }
                        }
                        "boshernitzan_n" => s.boshernitzan_n = num(ln, key, value)?,
                        "boshernitzan_threshold" => s.boshernitzan_threshold = num(ln, key, value)?,
                        "boshernitzan_symbols" => s.boshernitzan_symbols = num(ln, key, value)?,
                        _ => return Err(err(ln, format!("unknown scan key '{key}'"))),
                    }
                }
                Section::Output => match key {
                    "formats" => {
                        formats = value
                            .split_whitespace()
                            .map(|f| match f {
                                "csv" => Ok(Format::Csv),
                                "json" => Ok(Format::Json),
                                "dat" => Ok(Format::Dat),
                                _ => Err(err(ln, format!("unknown format '{f}'"))),
                            })
                            .collect::<Result<_>>()?;
                    }
                    _ => return Err(err(ln, format!("unknown output key '{key}'"))),
                },
            }
        }

        let version = version.ok_or_else(|| err(0, "missing `version`"))?;
        if version != SCHEMA_VERSION {
            return Err(err(0, format!("unsupported schema version {version}")));
        }

        let source = match (periodic, rules.is_empty()) {
            (Some(p), true) => {
                if seed.is_some() {
                    return Err(err(0, "`seed` has no meaning for a periodic model"));
                }
                WordSource::Periodic(p)
            }
            (None, false) => WordSource::Substitution {
                rules,
                seed: seed.ok_or_else(|| err(0, "substitution model needs `seed`"))?,
            },
            (Some(_), false) => return Err(err(0, "give either `rule` lines or `periodic`, not both")),
            (None, true) => return Err(err(0, "model needs `rule` lines or `periodic`")),
        };

        let mut pieces = Vec::with_capacity(drafts.len());
        for (c, d) in drafts {
            let length = d.length.ok_or_else(|| err(d.line, format!("piece '{c}' has no length")))?;
            let p = PieceMeasure::new(length, d.atoms, d.segments).map_err(|e| err(d.line, e.to_string()))?;
            pieces.push((c, p));
        }
        let cfg = ExperimentConfig {
            version,
            model: ModelConfig { source, left, min_symbols, pieces },
            scan,
            output: OutputConfig { formats },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        let s = &self.scan;
        let defined: BTreeSet<char> = self.model.pieces.iter().map(|p| p.0).collect();
        let used: Vec<char> = match &self.model.source {
            WordSource::Substitution { rules, seed } => {
                let mut u: Vec<char> = rules.iter().flat_map(|(c, w)| std::iter::once(*c).chain(w.chars())).collect();
                u.push(*seed);
                u
            }
            WordSource::Periodic(p) => p.chars().collect(),
        };
        let left: Vec<char> = match &self.model.left {
            LeftExtension::Explicit(w) => w.chars().collect(),
            _ => Vec::new(),
        };
        if let Some(c) = used.iter().chain(&left).find(|c| !defined.contains(c)) {
            return Err(err(0, format!("symbol '{c}' has no [piece {c}] section")));
        }
        if !(s.e_min < s.e_max) || !s.e_min.is_finite() || !s.e_max.is_finite() {
            return Err(err(0, format!("empty energy range [{}, {}]", s.e_min, s.e_max)));
        }
        if !(s.t_max > 0.0) || !s.t_max.is_finite() {
            return Err(err(0, "t_max must be positive"));
        }
        if s.grid < 2 {
            return Err(err(0, "grid needs at least 2 points"));
        }
        if !(s.gamma_tol > 0.0 && s.floquet_resolution > 0.0 && s.truncation > 0.0 && s.m_tolerance > 0.0) {
            return Err(err(0, "tolerances, resolution and truncation must be positive"));
        }
        if s.uniformity_times.is_empty() || s.uniformity_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(err(0, "uniformity_times must be strictly increasing"));
        }
        if s.uniformity_times[0] <= 0.0 {
            return Err(err(0, "uniformity_times must be positive"));
        }
        if s.z.iter().any(|z| !(z.1 > 0.0)) {
            return Err(err(0, "m-function points need Im z > 0"));
        }
        if s.hull_steps == 0 {
            return Err(err(0, "hull_steps must be at least 1"));
        }
        Ok(())
    }

    pub fn suspension_model(&self) -> Result<SuspensionModel> {
        SuspensionModel::new(self.model.pieces.clone())
    }

    pub fn substitution(&self) -> Result<Option<(Substitution, char)>> {
        match &self.model.source {
            WordSource::Substitution { rules, seed } => {
                Ok(Some((Substitution::new(rules.iter().map(|(c, w)| (*c, w.as_str())))?, *seed)))
            }
            WordSource::Periodic(_) => Ok(None),
        }
    }

    /// Largest time any scan propagates to, on either side of the origin.
    pub fn horizon(&self) -> f64 {
        let s = &self.scan;
        s.t_max.max(*s.uniformity_times.last().unwrap_or(&0.0)).max(s.truncation)
    }

    /// Right half-line symbols needed so every hull sample covers the
    /// horizon.
    pub fn symbols_needed(&self, model: &SuspensionModel) -> usize {
        let h = self.horizon() + 2.0 * model.max_length();
        (symbols_to_cover(model, h) + self.scan.word_shifts + 2).max(self.model.min_symbols)
    }

    /// The two-sided word the experiments run on.
    pub fn word(&self, model: &SuspensionModel) -> Result<SubshiftWord> {
        let n = self.symbols_needed(model);
        let right: Vec<char> = match &self.model.source {
            WordSource::Substitution { .. } => {
                let (sub, seed) = self.substitution()?.expect("substitution source");
                sub.iterate_to_length(seed, n)?.symbols().to_vec()
            }
            WordSource::Periodic(p) => p.chars().cycle().take(n.div_ceil(p.len()) * p.len()).collect(),
        };
        // A periodic word continues periodically to the left unless told
        // otherwise; mirroring would break the period.
        match (&self.model.left, &self.model.source) {
            (LeftExtension::Mirror, WordSource::Periodic(p)) => {
                let left: Vec<char> = p.chars().rev().cycle().take(n.div_ceil(p.len()) * p.len()).collect();
                SubshiftWord::two_sided(left.into_iter().rev().collect(), right)
            }
            (LeftExtension::Mirror, _) => SubshiftWord::two_sided_mirror(right),
            (LeftExtension::None, _) => Ok(SubshiftWord::one_sided(right)),
            (LeftExtension::Explicit(w), _) => {
                let left: Vec<char> = w.chars().collect();
                SubshiftWord::two_sided(left.into_iter().rev().collect(), right)
            }
        }
    }
}
