use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use scma::channel::{n0_from_ebn0, stream_rng, Fading, Link};
use scma::design::{self, UserConstellation};
use scma::hma::{hma_overloading, Cancellation, HmaConfig, PdNomaBaseline};
use scma::mpa::{self, DetectorConfig, Direction, MessageDomain, Observation, ResourceLikelihoods};
use scma::sim::{self, HmaOptions, SerRecord, SimConfig, System};
use scma::{fixtures, CodebookSet};

#[derive(Parser)]
#[command(name = "scma-sim", version, about = "SCMA link-level simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo SER sweep over Eb/N0.
    Sweep(SweepArgs),
    /// Rotation-angle search and codebook assembly.
    Design(DesignArgs),
    /// Hybrid two-group system with SIC at the near users.
    Hma(HmaArgs),
    /// Message dump of the worked 6x4 detection example.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Channel {
    Awgn,
    Rayleigh,
}

impl From<Channel> for Fading {
    fn from(c: Channel) -> Self {
        match c {
            Channel::Awgn => Fading::Awgn,
            Channel::Rayleigh => Fading::Rayleigh,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkArg {
    Downlink,
    Uplink,
}

#[derive(Clone, Copy, ValueEnum)]
enum CancelArg {
    /// Subtract with the receiving user's own channel.
    Receiver,
    /// Subtract with each weak user's channel.
    WeakUser,
}

#[derive(Args)]
struct Common {
    /// Fading model.
    #[arg(long, value_enum, default_value = "awgn")]
    channel: Channel,
    /// Eb/N0 points in dB: `start:step:stop` or a comma list.
    #[arg(long, default_value = "0:2:12")]
    snr: String,
    #[arg(long, default_value_t = 200_000)]
    trials: u64,
    /// MPA iteration cap.
    #[arg(long, default_value_t = 10)]
    max_iters: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Stop a point after this many symbol errors (checked every 1000 trials).
    #[arg(long)]
    max_errors: Option<u64>,
    /// Judge all users at one receiver per trial (downlink).
    #[arg(long)]
    shared_receiver: bool,
    /// Run the detector in the log domain.
    #[arg(long)]
    log_domain: bool,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Two-column plot data output.
    #[arg(long)]
    plot: Option<PathBuf>,
}

impl Common {
    fn detector(&self) -> DetectorConfig {
        let mut d = DetectorConfig::with_iterations(self.max_iters);
        if self.log_domain {
            d.domain = MessageDomain::Log;
        }
        d
    }

    fn config(&self, system: System) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(system);
        cfg.fading = self.channel.into();
        cfg.snr_db = sim::parse_snr_list(&self.snr)?;
        cfg.trials = self.trials;
        cfg.detector = self.detector();
        cfg.seed = self.seed;
        cfg.max_errors = self.max_errors;
        cfg.shared_receiver = self.shared_receiver;
        Ok(cfg)
    }

    fn emit(&self, label: &str, records: &[SerRecord], extra: &[(&str, &[SerRecord])]) -> Result<()> {
        match &self.out {
            Some(path) => sim::emit_csv(records, path).with_context(|| format!("writing {}", path.display()))?,
            None => sim::write_csv(records, io::stdout().lock())?,
        }
        if let Some(path) = &self.plot {
            let mut series = vec![(label, records)];
            series.extend_from_slice(extra);
            sim::emit_plot_data(&series, path).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct SweepArgs {
    /// One of 6x4, 8x4, 9x6, hma.
    #[arg(long, default_value = "6x4")]
    system: System,
    #[arg(long, value_enum, default_value = "downlink")]
    link: LinkArg,
    /// Codebook file replacing the system's bundled codebooks.
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DesignArgs {
    /// Eb/N0 of the objective, dB.
    #[arg(long, default_value_t = 10.0)]
    snr_db: f64,
    /// Angle grid step in degrees; must divide 360.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Use the unscaled PAM mother instead of the unit-energy one.
    #[arg(long)]
    unscaled: bool,
    /// Codebook output for the 6x4 layer placement.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HmaArgs {
    /// Codebooks of the near (strong) group.
    #[arg(long, default_value = "6x4")]
    strong: System,
    /// Codebooks of the far (weak) group.
    #[arg(long, default_value = "6x4")]
    weak: System,
    /// Fraction of each user pair's power given to the strong user.
    #[arg(long, default_value_t = 0.2)]
    strong_share: f64,
    /// Amplitude factor on the far users' channels.
    #[arg(long, default_value_t = 0.5)]
    weak_gain: f64,
    #[arg(long, value_enum, default_value = "receiver")]
    cancellation: CancelArg,
    /// Also run the power-domain NOMA baseline into the plot data.
    #[arg(long)]
    baseline: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TraceArgs {
    /// Iterations to dump.
    #[arg(long, default_value_t = 1)]
    iterations: usize,
    /// Also list the terms of the first resource message.
    #[arg(long)]
    terms: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Design(a) => design_cmd(a),
        Command::Hma(a) => hma(a),
        Command::Trace(a) => trace(a, &mut io::stdout().lock()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn summarize(records: &[SerRecord]) {
    for r in records {
        eprintln!(
            "{:>6.2} dB  {:>9} trials  {:>8} errors  SER {:.4e}  {:.1}s",
            r.snr_db,
            r.trials,
            r.symbol_errors,
            r.ser,
            r.wall_time.as_secs_f64()
        );
    }
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = a.common.config(a.system)?;
    cfg.link = match a.link {
        LinkArg::Downlink => Link::Downlink,
        LinkArg::Uplink => Link::Uplink,
    };
    if let Some(path) = &a.codebook {
        ensure!(
            a.system != System::Hma,
            "--codebook does not apply to the hybrid system"
        );
        let cbs = CodebookSet::load(path).with_context(|| format!("loading {}", path.display()))?;
        cfg.codebooks = Some(cbs);
    }
    cfg.validate()?;
    let records = sim::run_sweep(&cfg)?;
    summarize(&records);
    a.common.emit(a.system.label(), &records, &[])
}

fn hma(a: HmaArgs) -> Result<()> {
    let group = |s: System| {
        s.codebooks()
            .with_context(|| "a group needs an SCMA system, not hma".to_string())
    };
    let (strong, weak) = (group(a.strong)?, group(a.weak)?);
    ensure!(
        (0.0..=1.0).contains(&a.strong_share),
        "--strong-share must lie in [0, 1]"
    );
    ensure!(a.weak_gain > 0.0, "--weak-gain must be positive");
    let (j1, j2) = (strong.users(), weak.users());
    let config = HmaConfig::new(
        strong,
        weak,
        vec![2.0 * a.strong_share; j1],
        vec![2.0 * (1.0 - a.strong_share); j2],
    )?;
    if !config.power_ordered() {
        bail!("the weak group must get more total power than the strong group (lower --strong-share)");
    }
    let mut cfg = a.common.config(System::Hma)?;
    cfg.hma = HmaOptions {
        config,
        weak_gain: a.weak_gain,
        cancellation: match a.cancellation {
            CancelArg::Receiver => Cancellation::ReceiverGain,
            CancelArg::WeakUser => Cancellation::WeakUserGain,
        },
    };
    let k = cfg.hma.config.resources();
    eprintln!(
        "{j1} + {j2} users on {k} resources, overloading {:.0}%",
        hma_overloading(j1, j2, k)
    );
    let records = sim::run_sweep(&cfg)?;
    summarize(&records);

    let baseline = if a.baseline {
        let base = PdNomaBaseline::new(k, cfg.fading);
        let mut out = Vec::new();
        for (p, &db) in cfg.snr_db.iter().enumerate() {
            let start = Instant::now();
            let n0 = n0_from_ebn0(db);
            let mut errors = 0u64;
            let mut done = 0;
            while done < cfg.trials {
                let mut rng = stream_rng(cfg.seed, sim::trial_stream(p, done));
                errors += base.run_trial(n0, false, &mut rng)? as u64;
                done += 1;
                if done % sim::BATCH == 0 && cfg.max_errors.is_some_and(|m| errors >= m) {
                    break;
                }
            }
            out.push(SerRecord {
                snr_db: db,
                trials: done,
                symbol_errors: errors,
                ser: errors as f64 / (done as f64 * base.users() as f64),
                seed: cfg.seed,
                wall_time: start.elapsed(),
            });
        }
        eprintln!("power-domain baseline, {} users:", base.users());
        summarize(&out);
        out
    } else {
        Vec::new()
    };
    let extra: Vec<(&str, &[SerRecord])> = if a.baseline {
        vec![("pd-noma", &baseline)]
    } else {
        vec![]
    };
    a.common.emit("hma", &records, &extra)
}

fn design_cmd(a: DesignArgs) -> Result<()> {
    let mother = design::pam_mother(4, !a.unscaled)?;
    let n0 = n0_from_ebn0(a.snr_db);
    let best = design::optimize_rotation_angles(&mother, n0, a.step)?;
    let layers = [
        mother.clone().with_label(1),
        design::rotate(&mother, best.theta2_deg.to_radians()).with_label(2),
        design::rotate(&mother, best.theta3_deg.to_radians()).with_label(3),
    ];
    println!("theta2 = {} deg, theta3 = {} deg", best.theta2_deg, best.theta3_deg);
    println!("lower-bound MI at {} dB: {:.6} bits", a.snr_db, best.objective);
    let sum = design::sum_alphabet(&layers)?;
    report_shaping("sum alphabet", &sum.values);
    let pair = design::sum_alphabet(&layers[..2])?;
    report_shaping("layers 1+2", &pair.values);
    for l in &layers {
        report_shaping(&format!("layer {}", l.label), &l.points);
    }
    if let Some(path) = &a.out {
        let cbs = design::assemble_codebooks(&layers, &design::indicator_6x4())?;
        cbs.save(path).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn report_shaping(name: &str, points: &[Complex64]) {
    let c = UserConstellation::new(0, points.to_vec());
    match design::shaping_gain(points, 2) {
        Ok(g) => println!(
            "{name}: {} points, E_av {:.4}, shaping gain {g:.4}",
            points.len(),
            c.average_energy()
        ),
        Err(_) => println!(
            "{name}: {} points, E_av {:.4}, shaping gain undefined (collinear)",
            points.len(),
            c.average_energy()
        ),
    }
}

fn trace(a: TraceArgs, out: &mut impl Write) -> Result<()> {
    ensure!(a.iterations >= 1, "--iterations must be at least 1");
    let cbs = fixtures::table2();
    let fg = fixtures::graph_6x4();
    let y = fixtures::example_received();
    let n0 = fixtures::example_n0();
    let symbols: Vec<String> = fixtures::EXAMPLE_SYMBOLS.iter().map(|s| (s + 1).to_string()).collect();
    writeln!(out, "symbols: {}", symbols.join(" "))?;
    writeln!(out, "N0 = {n0:.4}")?;
    writeln!(out, "y:")?;
    for v in &y {
        writeln!(out, "  {:.4} {:+.4}i", v.re, v.im)?;
    }
    let obs = Observation::awgn(y, 6, n0);
    let lik = ResourceLikelihoods::new(&cbs, &fg, &obs)?;
    let mut state = mpa::initialize(&fg, cbs.order());
    writeln!(out, "\nV (initial):\n{}", state.dump(&fg, Direction::UserToResource))?;
    if a.terms {
        writeln!(out, "terms of U[1->1](1):")?;
        let terms = mpa::resource_terms(&state, &fg, &lik, 0, 0, 0);
        for t in &terms {
            let s: Vec<String> = t.symbols.iter().map(|s| (s + 1).to_string()).collect();
            writeln!(out, "  {}  {:.2e}", s.join(" "), t.value)?;
        }
        writeln!(out, "  sum {:.2e}\n", terms.iter().map(|t| t.value).sum::<f64>())?;
    }
    for it in 1..=a.iterations {
        mpa::resource_update(&mut state, &fg, &lik, MessageDomain::Probability);
        writeln!(
            out,
            "U (iteration {it}):\n{}",
            state.dump(&fg, Direction::ResourceToUser)
        )?;
        mpa::user_update(&mut state, &fg, MessageDomain::Probability);
        writeln!(
            out,
            "V (iteration {it}):\n{}",
            state.dump(&fg, Direction::UserToResource)
        )?;
        let post = mpa::compute_posterior(&mut state, &fg, MessageDomain::Probability);
        writeln!(out, "posterior (iteration {it}):")?;
        for m in 0..cbs.order() {
            let row: Vec<String> = post.iter().map(|p| format!("{:8.4}", p[m])).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        let d: Vec<String> = mpa::decide(&post).iter().map(|s| (s + 1).to_string()).collect();
        writeln!(out, "decisions: {}\n", d.join(" "))?;
    }
    Ok(())
}
