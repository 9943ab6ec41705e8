//! Configuration-driven experiments. Every subcommand writes its artifacts
//! into one output directory together with `manifest.json`.
//!
//! Numeric artifacts (CSV, `.dat`, report JSON) depend only on the config text
//! and the seed, so reruns are byte-identical. Each starts with the config
//! hash; wall-clock timestamps live in the manifest alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Format, WordSource};
use crate::error::{Error, Result};
use crate::lyapunov::{
    lyapunov_estimate, semi_uniform_check, uniformity_scan, LyapunovEstimate, SemiUniformReport, UniformityReport,
};
use crate::measure::{check_sfdp, SfdpVerdict, WindowMeasure};
use crate::par;
use crate::spectral::{
    approximant_cascade, floquet_bands_with, gamma_zero_scan, m_function, uniform_grid, BandSet, Cascade,
    CascadeLevel, FloquetOptions, GammaScan, GammaScanOptions, MFunctionValue,
};
use crate::subshift::{aperiodicity_consistent, boshernitzan_profile, BoshernitzanProfile, SubshiftWord};
use crate::suspension::{build_omega, hull_grid, hull_samples_at, SuspensionModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    LyapunovScan,
    Spectrum,
    Uniformity,
    Mfunction,
    Boshernitzan,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::LyapunovScan => "lyapunov-scan",
            Command::Spectrum => "spectrum",
            Command::Uniformity => "uniformity",
            Command::Mfunction => "mfunction",
            Command::Boshernitzan => "boshernitzan",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub command: Command,
    pub config_sha256: String,
    /// Seeds the single ChaCha8 generator behind every randomized choice.
    pub seed: u64,
    pub rng: String,
    pub module_versions: BTreeMap<String, String>,
    pub parallel: bool,
    pub threads: Option<usize>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub pieces: Vec<char>,
    pub atomless: bool,
    pub sfdp: SfdpVerdict,
    /// `None` for periodic models.
    pub aperiodic: Option<bool>,
    pub word_symbols: usize,
    pub window: (f64, f64),
    pub horizon: f64,
    pub warnings: Vec<String>,
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn module_versions() -> BTreeMap<String, String> {
    let v = env!("CARGO_PKG_VERSION");
    ["measure", "subshift", "suspension", "propagator", "lyapunov", "spectral", "runner"]
        .iter()
        .map(|m| (m.to_string(), v.to_string()))
        .collect()
}

/// Artifact writer; remembers file names in creation order.
struct Sink<'a> {
    dir: &'a Path,
    hash: &'a str,
    seed: u64,
    formats: &'a crate::config::OutputConfig,
    files: Vec<String>,
}

impl Sink<'_> {
    fn header(&self) -> String {
        format!("# manifest {} seed {}\n", self.hash, self.seed)
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, columns: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
        if !self.formats.wants(Format::Csv) {
            return Ok(());
        }
        let mut s = self.header();
        s.push_str(columns);
        s.push('\n');
        for r in rows {
            s.push_str(&r);
            s.push('\n');
        }
        self.write(name, &s)
    }

    /// Whitespace-separated columns; blank lines separate gnuplot blocks.
    fn dat(&mut self, name: &str, body: &str) -> Result<()> {
        if !self.formats.wants(Format::Dat) {
            return Ok(());
        }
        let s = self.header() + body;
        self.write(name, &s)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.formats.wants(Format::Json) {
            return Ok(());
        }
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            config_sha256: &'a str,
            seed: u64,
            data: &'a T,
        }
        let w = Wrapped { config_sha256: self.hash, seed: self.seed, data: value };
        let s = serde_json::to_string_pretty(&w).map_err(|e| Error::Io(e.to_string()))? + "\n";
        self.write(name, &s)
    }
}

/// Everything the experiments share, built once per run.
struct Context {
    cfg: ExperimentConfig,
    model: SuspensionModel,
    word: SubshiftWord,
    omega: WindowMeasure,
    seed: u64,
}

impl Context {
    fn new(cfg: ExperimentConfig, seed: u64) -> Result<Self> {
        let model = cfg.suspension_model()?;
        let word = cfg.word(&model)?;
        let omega = build_omega(&model, &word)?;
        Ok(Context { cfg, model, word, omega, seed })
    }

    fn grid(&self) -> Vec<f64> {
        let s = &self.cfg.scan;
        uniform_grid(s.e_min, s.e_max, s.grid)
    }

    /// Deterministic hull grid plus `random_hull_samples` draws, all
    /// covering `[0, horizon]`.
    fn hull(&self, horizon: f64) -> Result<Vec<WindowMeasure>> {
        let s = &self.cfg.scan;
        let cover = (0.0, horizon);
        let mut out: Vec<WindowMeasure> =
            hull_grid(&self.model, &self.word, s.hull_steps, s.word_shifts, cover)?.into_iter().map(|h| h.measure).collect();
        if s.random_hull_samples > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let lmax = self.model.max_length();
            let pts: Vec<(usize, f64)> = (0..s.random_hull_samples)
                .map(|_| (rng.random_range(0..=s.word_shifts), rng.random::<f64>() * lmax))
                .collect();
            out.extend(hull_samples_at(&self.model, &self.word, &pts, cover)?.into_iter().map(|h| h.measure));
        }
        Ok(out)
    }

    fn validate(&self) -> Result<ValidationReport> {
        let atomless = self.model.is_atomless();
        let sfdp = check_sfdp(self.model.alphabet());
        let aperiodic = match &self.cfg.model.source {
            WordSource::Periodic(_) => None,
            WordSource::Substitution { .. } => {
                let right = SubshiftWord::one_sided(self.word.right_half().to_vec());
                let n_max = 20.min(right.len().saturating_sub(1)).max(1);
                Some(aperiodicity_consistent(&right, n_max)?)
            }
        };
        let h = self.cfg.horizon();
        self.omega.require_coverage(-self.cfg.scan.truncation, h)?;
        let mut warnings = Vec::new();
        if !atomless {
            warnings.push("atomless=false: some piece carries a point mass".to_string());
        }
        if let SfdpVerdict::ViolatedWithWitness { first, second } = &sfdp {
            warnings.push(format!(
                "finite decomposition check inconclusive: pieces '{first}' and '{second}' are both Lebesgue multiples"
            ));
        }
        if aperiodic == Some(false) {
            warnings.push("word looks eventually periodic".to_string());
        }
        let pieces = self.cfg.model.pieces.iter().map(|p| p.0).collect();
        Ok(ValidationReport {
            pieces,
            atomless,
            sfdp,
            aperiodic,
            word_symbols: self.word.len(),
            window: self.omega.window(),
            horizon: h,
            warnings,
        })
    }

    fn lyapunov_scan(&self, sink: &mut Sink) -> Result<Vec<LyapunovEstimate>> {
        let t = self.cfg.scan.t_max;
        let est = par::try_map(&self.grid(), |&e| lyapunov_estimate(&self.omega, e, t))?;
        sink.csv(
            "lyapunov.csv",
            "E,gamma_hat,t_used,tail_converged",
            est.iter().map(|g| format!("{:e},{:e},{:e},{}", g.energy, g.gamma_hat, g.t_used, g.tail_converged)),
        )?;
        let mut dat = String::new();
        for g in &est {
            let _ = writeln!(dat, "{:e} {:e}", g.energy, g.gamma_hat);
        }
        sink.dat("lyapunov.dat", &dat)?;
        Ok(est)
    }

    fn cascade(&self) -> Result<Cascade> {
        let s = &self.cfg.scan;
        let range = (s.e_min, s.e_max);
        let opts = FloquetOptions::new(s.floquet_resolution);
        match (&self.cfg.model.source, self.cfg.substitution()?) {
            (WordSource::Substitution { .. }, Some((sub, seed))) => {
                approximant_cascade(&self.model, &sub, seed, &s.levels, range, &opts)
            }
            (WordSource::Periodic(p), _) => {
                let word = SubshiftWord::periodic(p.chars().collect())?;
                let bands = floquet_bands_with(&self.model, &word, range, &opts)?;
                let level = CascadeLevel {
                    level: 0,
                    period_symbols: p.chars().count(),
                    measure: bands.measure(),
                    band_count: bands.len(),
                    bands,
                    nesting: None,
                    nesting_two_levels: None,
                };
                Ok(Cascade { range, levels: vec![level], box_dimension: None })
            }
            _ => unreachable!("substitution source always yields rules"),
        }
    }

    fn spectrum(&self, sink: &mut Sink) -> Result<(Cascade, GammaScan, BandSet)> {
        let s = &self.cfg.scan;
        let cascade = self.cascade()?;
        sink.csv(
            "bands.csv",
            "level,E_lo,E_hi",
            cascade.levels.iter().flat_map(|l| l.bands.bands().iter().map(move |b| format!("{},{:e},{:e}", l.level, b.0, b.1))),
        )?;
        let mut dat = String::new();
        for l in &cascade.levels {
            for b in l.bands.bands() {
                let _ = writeln!(dat, "{:e} {}\n{:e} {}\n", b.0, l.level, b.1, l.level);
            }
        }
        sink.dat("cascade.dat", &dat)?;
        sink.json("cascade.json", &cascade)?;

        let mut opts = GammaScanOptions::new(s.t_max, s.gamma_tol);
        opts.refine_levels = s.refine;
        opts.uniformity_schedule = s.uniformity_times.clone();
        let last = *s.uniformity_times.last().expect("validated non-empty");
        opts.hull_samples = self.hull(last)?;
        let scan = gamma_zero_scan(&self.omega, &self.grid(), &opts)?;
        let sigma = scan.spectrum_approximation()?;
        sink.csv(
            "gamma_scan.csv",
            "E,gamma_hat,marked,label",
            scan.points.iter().map(|p| {
                let label = serde_json::to_value(p.label).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
                format!("{:e},{:e},{},{}", p.energy, p.gamma_hat, p.marked, label)
            }),
        )?;
        sink.csv(
            "gamma_bands.csv",
            "E_lo,E_hi",
            sigma.bands().iter().map(|b| format!("{:e},{:e}", b.0, b.1)),
        )?;
        let mut dat = String::new();
        for p in &scan.points {
            let _ = writeln!(dat, "{:e} {:e}", p.energy, p.gamma_hat);
        }
        sink.dat("gamma.dat", &dat)?;

        #[derive(Serialize)]
        struct Summary<'a> {
            levels: Vec<(usize, f64, usize)>,
            strictly_decreasing: bool,
            min_nesting: Option<f64>,
            box_dimension: Option<f64>,
            gamma_bands: &'a BandSet,
            gamma_measure: f64,
            isolated_points: usize,
        }
        sink.json(
            "spectrum.json",
            &Summary {
                levels: cascade.levels.iter().map(|l| (l.level, l.measure, l.band_count)).collect(),
                strictly_decreasing: cascade.strictly_decreasing(),
                min_nesting: cascade.min_nesting(),
                box_dimension: cascade.box_dimension,
                gamma_bands: &sigma,
                gamma_measure: sigma.measure(),
                isolated_points: scan.isolated_count,
            },
        )?;
        Ok((cascade, scan, sigma))
    }

    fn uniformity_energies(&self) -> Vec<f64> {
        let s = &self.cfg.scan;
        if !s.uniformity_energies.is_empty() {
            return s.uniformity_energies.clone();
        }
        // Interior points only; the ends of the range are often band edges.
        let g = uniform_grid(s.e_min, s.e_max, 7);
        g[1..6].to_vec()
    }

    fn uniformity(&self, sink: &mut Sink) -> Result<Vec<(UniformityReport, SemiUniformReport)>> {
        let s = &self.cfg.scan;
        let times = &s.uniformity_times;
        let last = *times.last().expect("validated non-empty");
        let samples = self.hull(last)?;
        let energies = self.uniformity_energies();
        let reports = par::try_map(&energies, |&e| {
            let r = uniformity_scan(&samples, e, times, None)?;
            let g = lyapunov_estimate(&self.omega, e, last)?.gamma_hat;
            let semi = semi_uniform_check(&samples, e, times, g, s.semi_epsilon)?;
            Ok::<_, Error>((r, semi))
        })?;
        let mut rows = Vec::new();
        for (r, _) in &reports {
            for (i, slopes) in r.slopes.iter().enumerate() {
                for (t, sl) in times.iter().zip(slopes) {
                    rows.push(format!("{:e},{:e},{},{:e}", r.energy, t, i, sl));
                }
            }
        }
        sink.csv("uniformity.csv", "E,t,sample_id,slope", rows)?;
        let mut dat = String::new();
        for (r, _) in &reports {
            for (t, d) in times.iter().zip(&r.sup_by_time) {
                let _ = writeln!(dat, "{t:e} {d:e}");
            }
            dat.push('\n');
        }
        sink.dat("uniformity.dat", &dat)?;
        #[derive(Serialize)]
        struct Entry<'a> {
            uniformity: &'a UniformityReport,
            semi_uniform: &'a SemiUniformReport,
        }
        let entries: Vec<Entry> = reports.iter().map(|(u, s)| Entry { uniformity: u, semi_uniform: s }).collect();
        sink.json("uniformity.json", &entries)?;
        Ok(reports)
    }

    fn mfunction(&self, sink: &mut Sink) -> Result<Vec<MFunctionValue>> {
        let s = &self.cfg.scan;
        let vals =
            par::try_map(&s.z, |&(re, im)| m_function(&self.omega, Complex64::new(re, im), s.truncation, s.m_tolerance))?;
        sink.csv(
            "mfunction.csv",
            "z_re,z_im,m_plus_re,m_plus_im,m_minus_re,m_minus_im,radius_plus,radius_minus,herglotz",
            vals.iter().map(|m| {
                format!(
                    "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                    m.z_re,
                    m.z_im,
                    m.m_plus_re,
                    m.m_plus_im,
                    m.m_minus_re,
                    m.m_minus_im,
                    m.radius_plus,
                    m.radius_minus,
                    m.is_herglotz()
                )
            }),
        )?;
        sink.json("mfunction.json", &vals)?;
        Ok(vals)
    }

    fn boshernitzan(&self, sink: &mut Sink) -> Result<BoshernitzanProfile> {
        let s = &self.cfg.scan;
        let n = s.boshernitzan_symbols;
        let prefix: Vec<char> = match (&self.cfg.model.source, self.cfg.substitution()?) {
            (WordSource::Substitution { .. }, Some((sub, seed))) => {
                sub.iterate_to_length(seed, n)?.symbols()[..n].to_vec()
            }
            (WordSource::Periodic(p), _) => p.chars().cycle().take(n).collect(),
            _ => unreachable!("substitution source always yields rules"),
        };
        let p = boshernitzan_profile(&SubshiftWord::one_sided(prefix), s.boshernitzan_n, s.boshernitzan_threshold)?;
        sink.csv("boshernitzan.csv", "n,n_eta", p.points.iter().map(|(n, v)| format!("{n},{v:e}")))?;
        let mut dat = String::new();
        for (n, v) in &p.points {
            let _ = writeln!(dat, "{n} {v:e}");
        }
        sink.dat("boshernitzan.dat", &dat)?;
        sink.json("boshernitzan.json", &p)?;
        Ok(p)
    }
}

/// Run one subcommand on config text.
pub fn run_text(command: Command, config_text: &str, opts: &RunOptions) -> Result<RunOutcome> {
    let started = now();
    let cfg = ExperimentConfig::parse(config_text)?;
    let hash = config_hash(config_text);
    fs::create_dir_all(&opts.out)?;
    let ctx = Context::new(cfg, opts.seed)?;
    let mut sink = Sink { dir: &opts.out, hash: &hash, seed: opts.seed, formats: &ctx.cfg.output, files: Vec::new() };

    let warnings = par::with_threads(opts.threads, || -> Result<Vec<String>> {
        let validation = ctx.validate()?;
        let warnings = validation.warnings.clone();
        match command {
            Command::Validate => sink.json("validate.json", &validation)?,
            Command::LyapunovScan => {
                ctx.lyapunov_scan(&mut sink)?;
            }
            Command::Spectrum => {
                ctx.spectrum(&mut sink)?;
            }
            Command::Uniformity => {
                ctx.uniformity(&mut sink)?;
            }
            Command::Mfunction => {
                ctx.mfunction(&mut sink)?;
            }
            Command::Boshernitzan => {
                ctx.boshernitzan(&mut sink)?;
            }
            Command::Report => {
                let lyap = ctx.lyapunov_scan(&mut sink)?;
                let (cascade, _, sigma) = ctx.spectrum(&mut sink)?;
                let unif = ctx.uniformity(&mut sink)?;
                let m = ctx.mfunction(&mut sink)?;
                let b = ctx.boshernitzan(&mut sink)?;
                #[derive(Serialize)]
                struct Report<'a> {
                    validation: &'a ValidationReport,
                    lyapunov: Vec<(f64, f64)>,
                    cascade_measures: Vec<f64>,
                    cascade_strictly_decreasing: bool,
                    gamma_bands: &'a BandSet,
                    uniformity: Vec<(f64, f64, String, bool)>,
                    herglotz_everywhere: bool,
                    boshernitzan_min: f64,
                    boshernitzan_consistent: bool,
                }
                let report = Report {
                    validation: &validation,
                    lyapunov: lyap.iter().map(|g| (g.energy, g.gamma_hat)).collect(),
                    cascade_measures: cascade.measures(),
                    cascade_strictly_decreasing: cascade.strictly_decreasing(),
                    gamma_bands: &sigma,
                    uniformity: unif
                        .iter()
                        .map(|(u, s)| {
                            let v = serde_json::to_value(u.verdict)
                                .ok()
                                .and_then(|v| v.as_str().map(str::to_string))
                                .unwrap_or_default();
                            (u.energy, u.sup_deviation, v, s.pass)
                        })
                        .collect(),
                    herglotz_everywhere: m.iter().all(MFunctionValue::is_herglotz),
                    boshernitzan_min: b.min_value(),
                    boshernitzan_consistent: b.b_consistent,
                };
                sink.json("report.json", &report)?;
            }
        }
        Ok(warnings)
    })?;

    let manifest = RunManifest {
        tool: "cantorspec".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        schema_version: ctx.cfg.version,
        command,
        config_sha256: hash.clone(),
        seed: opts.seed,
        rng: "ChaCha8".into(),
        module_versions: module_versions(),
        parallel: par::is_parallel(),
        threads: opts.threads,
        started_unix: started,
        finished_unix: now(),
        files: sink.files.clone(),
    };
    let s = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))? + "\n";
    fs::write(opts.out.join("manifest.json"), s)?;
    Ok(RunOutcome { manifest, warnings })
}

pub fn run(command: Command, config: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let text = fs::read_to_string(config)?;
    run_text(command, &text, opts)
}
