//! Monte Carlo symbol-error-rate sweeps.
//!
//! Trial `t` at sweep point `p` draws everything from its own generator,
//! `stream_rng(seed, p << 40 | t)`, so results do not depend on how trials are
//! spread over threads. Trials run in fixed-size batches in order; the
//! early-stop rule is only checked between batches, which keeps it
//! deterministic as well.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{n0_from_ebn0, sample_awgn, stream_rng, Fading, GainMatrix, Link, NoiseSample};
use crate::codebook::CodebookSet;
use crate::error::{Error, Result};
use crate::hma::{Cancellation, HmaConfig, HmaLink};
use crate::mpa::{detect, DetectorConfig, Observation};
use crate::{fixtures, FactorGraph};

/// Trials per batch.
pub const BATCH: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum System {
    Scma6x4,
    Scma8x4,
    Scma9x6,
    /// Two 6x4 groups superposed in power, 12 users on 4 resources.
    Hma,
}

impl System {
    pub fn label(self) -> &'static str {
        match self {
            System::Scma6x4 => "6x4",
            System::Scma8x4 => "8x4",
            System::Scma9x6 => "9x6",
            System::Hma => "hma",
        }
    }

    /// Bundled codebooks; `None` for the hybrid system.
    pub fn codebooks(self) -> Option<CodebookSet> {
        match self {
            System::Scma6x4 => Some(fixtures::table2()),
            System::Scma8x4 => Some(fixtures::scma_8x4()),
            System::Scma9x6 => Some(fixtures::scma_9x6()),
            System::Hma => None,
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "6x4" => Ok(System::Scma6x4),
            "8x4" => Ok(System::Scma8x4),
            "9x6" => Ok(System::Scma9x6),
            "hma" => Ok(System::Hma),
            _ => Err(Error::InvalidArgument(format!(
                "unknown system `{s}` (6x4, 8x4, 9x6, hma)"
            ))),
        }
    }
}

/// Hybrid-system settings used when `system` is [`System::Hma`].
#[derive(Debug, Clone, PartialEq)]
pub struct HmaOptions {
    pub config: HmaConfig,
    pub weak_gain: f64,
    pub cancellation: Cancellation,
}

impl Default for HmaOptions {
    fn default() -> Self {
        Self {
            config: HmaConfig::default_12x4(),
            weak_gain: 0.5,
            cancellation: Cancellation::ReceiverGain,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub system: System,
    pub fading: Fading,
    pub link: Link,
    /// `Eb/N0` points in dB.
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub detector: DetectorConfig,
    pub seed: u64,
    /// Replaces the system's bundled codebooks.
    pub codebooks: Option<CodebookSet>,
    /// Stop a point once this many symbol errors have accumulated (checked per batch).
    pub max_errors: Option<u64>,
    /// Zero the noise while the detector still assumes the nominal `N0`.
    pub noiseless: bool,
    /// Downlink only: judge every user at one receiver instead of each at its own.
    /// All receivers see statistically identical signals, so the SER estimate
    /// stays unbiased while the cost drops by a factor `J`.
    pub shared_receiver: bool,
    pub hma: HmaOptions,
}

impl SimConfig {
    /// Defaults: AWGN downlink, 0 to 12 dB in 2 dB steps, 200000 trials, seed 42.
    pub fn new(system: System) -> Self {
        Self {
            system,
            fading: Fading::Awgn,
            link: Link::Downlink,
            snr_db: (0..=6).map(|i| 2.0 * i as f64).collect(),
            trials: 200_000,
            detector: DetectorConfig::default(),
            seed: 42,
            codebooks: None,
            max_errors: None,
            noiseless: false,
            shared_receiver: false,
            hma: HmaOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::InvalidArgument("no SNR points".into()));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("SNR points must be finite".into()));
        }
        if self.system == System::Hma && self.link == Link::Uplink {
            return Err(Error::InvalidArgument("the hybrid system is downlink only".into()));
        }
        self.detector.validate()
    }
}

/// Result of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SerRecord {
    pub snr_db: f64,
    pub trials: u64,
    pub symbol_errors: u64,
    /// `symbol_errors / (trials * J)`.
    pub ser: f64,
    pub seed: u64,
    pub wall_time: Duration,
}

impl SerRecord {
    /// Number of judged symbols.
    pub fn symbols(&self) -> f64 {
        if self.ser > 0.0 {
            self.symbol_errors as f64 / self.ser
        } else {
            f64::NAN
        }
    }

    /// Binomial standard error of `ser` given `users` judged per trial.
    pub fn std_error(&self, users: usize) -> f64 {
        let n = self.trials as f64 * users as f64;
        (self.ser * (1.0 - self.ser) / n).sqrt()
    }

    /// Normal-approximation interval `ser +- z * std_error`.
    pub fn confidence_interval(&self, users: usize, z: f64) -> (f64, f64) {
        let half = z * self.std_error(users);
        ((self.ser - half).max(0.0), (self.ser + half).min(1.0))
    }
}

/// Prepared system: codebooks, graph and per-trial procedure.
#[derive(Debug, Clone)]
pub struct Scenario {
    cfg: SimConfig,
    kind: ScenarioKind,
}

#[derive(Debug, Clone)]
enum ScenarioKind {
    Scma { codebooks: CodebookSet, graph: FactorGraph },
    Hma(Box<HmaLink>),
}

impl Scenario {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let kind = match cfg.system {
            System::Hma => {
                let mut link = HmaLink::new(cfg.hma.config.clone(), cfg.fading);
                link.weak_gain = cfg.hma.weak_gain;
                link.cancellation = cfg.hma.cancellation;
                link.detector = cfg.detector;
                link.shared_receiver = cfg.shared_receiver;
                ScenarioKind::Hma(Box::new(link))
            }
            system => {
                let codebooks = match &cfg.codebooks {
                    Some(c) => c.clone(),
                    None => system.codebooks().expect("SCMA system has codebooks"),
                };
                let graph = codebooks.factor_graph()?;
                ScenarioKind::Scma { codebooks, graph }
            }
        };
        Ok(Self { cfg: cfg.clone(), kind })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Users whose symbols are judged per trial.
    pub fn users(&self) -> usize {
        match &self.kind {
            ScenarioKind::Scma { codebooks, .. } => codebooks.users(),
            ScenarioKind::Hma(link) => link.users(),
        }
    }

    /// One transmission at `snr_db`; `true` marks a wrong symbol decision.
    pub fn run_trial<R: Rng + ?Sized>(&self, snr_db: f64, rng: &mut R) -> Result<Vec<bool>> {
        let n0 = n0_from_ebn0(snr_db);
        match &self.kind {
            ScenarioKind::Hma(link) => Ok(link.run_trial(n0, self.cfg.noiseless, rng)?.indicators()),
            ScenarioKind::Scma { codebooks, graph } => self.scma_trial(codebooks, graph, n0, rng),
        }
    }

    fn scma_trial<R: Rng + ?Sized>(
        &self,
        cbs: &CodebookSet,
        fg: &FactorGraph,
        n0: f64,
        rng: &mut R,
    ) -> Result<Vec<bool>> {
        let (j, k) = (cbs.users(), cbs.resources());
        let symbols = draw_symbols(j, cbs.order(), rng);
        let codewords = cbs.encode_all(&symbols)?;
        let powers = vec![1.0; j];
        let noise = |rng: &mut R| -> Result<NoiseSample> {
            if self.cfg.noiseless {
                Ok(NoiseSample::zeros(k))
            } else {
                sample_awgn(n0, k, rng)
            }
        };
        let mut errors = vec![false; j];
        match self.cfg.link {
            Link::Uplink => {
                let gains: Vec<_> = (0..j).map(|_| self.cfg.fading.draw(k, rng)).collect();
                let n = noise(rng)?;
                let y = crate::channel::receive_uplink(&codewords, &powers, &gains, &n)?;
                let obs = Observation::new(y, GainMatrix::uplink(&gains), powers, n0);
                let det = detect(&obs, cbs, fg, &self.cfg.detector)?;
                for (e, (d, s)) in errors.iter_mut().zip(det.symbols.iter().zip(&symbols)) {
                    *e = d != s;
                }
            }
            Link::Downlink => {
                let receivers = if self.cfg.shared_receiver { 1 } else { j };
                for i in 0..receivers {
                    let h = self.cfg.fading.draw(k, rng);
                    let n = noise(rng)?;
                    let y = crate::channel::receive_downlink(&codewords, &powers, &h, &n)?;
                    let obs = Observation::new(y, GainMatrix::downlink(&h, j), powers.clone(), n0);
                    let det = detect(&obs, cbs, fg, &self.cfg.detector)?;
                    let judged = if self.cfg.shared_receiver { 0..j } else { i..i + 1 };
                    for u in judged {
                        errors[u] = det.symbols[u] != symbols[u];
                    }
                }
            }
        }
        Ok(errors)
    }

    /// Errors summed over trials `range` of sweep point `point`.
    fn run_range(&self, point: usize, snr_db: f64, range: std::ops::Range<u64>) -> Result<u64> {
        let seed = self.cfg.seed;
        range
            .into_par_iter()
            .map(|t| {
                let mut rng = stream_rng(seed, trial_stream(point, t));
                let e = self.run_trial(snr_db, &mut rng)?;
                Ok(e.iter().filter(|&&x| x).count() as u64)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))
    }

    /// One point of the sweep.
    pub fn run_point(&self, point: usize) -> Result<SerRecord> {
        let snr_db = self.cfg.snr_db[point];
        let start = Instant::now();
        let mut done = 0;
        let mut errors = 0;
        while done < self.cfg.trials {
            let end = (done + BATCH).min(self.cfg.trials);
            errors += self.run_range(point, snr_db, done..end)?;
            done = end;
            if self.cfg.max_errors.is_some_and(|m| errors >= m) {
                break;
            }
        }
        Ok(SerRecord {
            snr_db,
            trials: done,
            symbol_errors: errors,
            ser: errors as f64 / (done as f64 * self.users() as f64),
            seed: self.cfg.seed,
            wall_time: start.elapsed(),
        })
    }
}

/// Independent uniform data symbols, one per user.
pub fn draw_symbols<R: Rng + ?Sized>(users: usize, order: usize, rng: &mut R) -> Vec<usize> {
    (0..users).map(|_| rng.random_range(0..order)).collect()
}

/// Generator stream of trial `t` at sweep point `point`.
pub fn trial_stream(point: usize, trial: u64) -> u64 {
    ((point as u64) << 40) | trial
}

/// One [`SerRecord`] per SNR point, in order.
pub fn run_sweep(cfg: &SimConfig) -> Result<Vec<SerRecord>> {
    let scenario = Scenario::new(cfg)?;
    (0..cfg.snr_db.len()).map(|p| scenario.run_point(p)).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    snr_db: f64,
    trials: u64,
    errors: u64,
    ser: f64,
    seed: u64,
}

/// Header `snr_db,trials,errors,ser,seed`, one row per record. Wall time is
/// left out so equal runs give byte-identical files.
pub fn write_csv<W: Write>(records: &[SerRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow {
            snr_db: r.snr_db,
            trials: r.trials,
            errors: r.symbol_errors,
            ser: r.ser,
            seed: r.seed,
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_csv`]; wall times come back as zero.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<SerRecord>> {
    csv::Reader::from_reader(input)
        .deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(csv_error)?;
            Ok(SerRecord {
                snr_db: row.snr_db,
                trials: row.trials,
                symbol_errors: row.errors,
                ser: row.ser,
                seed: row.seed,
                wall_time: Duration::ZERO,
            })
        })
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

pub fn emit_csv(records: &[SerRecord], path: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records".into()));
    }
    write_csv(records, std::fs::File::create(path)?)
}

/// Whitespace-separated `snr_db ser` columns, one block per series, blocks
/// separated by a blank line and headed by a `# label` comment.
pub fn write_plot_data<W: Write>(series: &[(&str, &[SerRecord])], mut out: W) -> Result<()> {
    for (i, (label, records)) in series.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "# {label}")?;
        writeln!(out, "# snr_db ser")?;
        for r in *records {
            writeln!(out, "{} {:e}", r.snr_db, r.ser)?;
        }
    }
    Ok(())
}

pub fn emit_plot_data(series: &[(&str, &[SerRecord])], path: impl AsRef<Path>) -> Result<()> {
    if series.iter().all(|(_, r)| r.is_empty()) {
        return Err(Error::InvalidArgument("no records".into()));
    }
    write_plot_data(series, std::fs::File::create(path)?)
}

/// One labeled block of `(x, y)` points.
pub type Series = (String, Vec<(f64, f64)>);

/// Reads plot data back as labeled blocks.
pub fn read_plot_data(text: &str) -> Result<Vec<Series>> {
    let mut out: Vec<Series> = Vec::new();
    let mut fresh = true;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            fresh = true;
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if fresh {
                out.push((c.trim().to_string(), Vec::new()));
                fresh = false;
            }
            continue;
        }
        if fresh {
            out.push((String::new(), Vec::new()));
            fresh = false;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        if cols.len() != 2 {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected 2 columns, found {}", cols.len()),
            });
        }
        out.last_mut().expect("block started").1.push((cols[0], cols[1]));
    }
    Ok(out)
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_snr_list(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("bad SNR list `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (start, step, stop) = (v[0], v[1], v[2]);
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + step * i as f64).collect());
    }
    if parts.len() != 1 {
        return Err(bad());
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}
