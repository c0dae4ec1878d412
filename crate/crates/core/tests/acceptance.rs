use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use scma::channel::{n0_from_ebn0, sample_awgn, stream_rng, Fading};
use scma::design::{self, UserConstellation};
use scma::hma::HmaLink;
use scma::mpa::{self, DetectorConfig, Direction, MessageDomain, Observation, ResourceLikelihoods};
use scma::sim::{self, SerRecord, SimConfig, System};
use scma::{fixtures, CodebookSet};

type Outcome = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_abs_diff(a: &[Vec<f64>], b: &[[f64; 6]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

// First-iteration resource messages of the worked example, KM x J block layout.
const U_FIRST: [[f64; 6]; 16] = [
    [0.1764, 0.0, 0.9962, 0.0, 0.0042, 0.0],
    [0.6415, 0.0, 0.0038, 0.0, 0.0000, 0.0],
    [0.1784, 0.0, 0.0000, 0.0, 0.9958, 0.0],
    [0.0038, 0.0, 0.0000, 0.0, 0.0000, 0.0],
    [0.0, 0.0000, 0.7860, 0.0, 0.0, 0.0000],
    [0.0, 0.9986, 0.0000, 0.0, 0.0, 0.0000],
    [0.0, 0.0000, 0.2042, 0.0, 0.0, 0.0079],
    [0.0, 0.0014, 0.0098, 0.0, 0.0, 0.9921],
    [0.0328, 0.0, 0.0, 0.2660, 0.0, 0.0168],
    [0.6324, 0.0, 0.0, 0.4763, 0.0, 0.6641],
    [0.0002, 0.0, 0.0, 0.2362, 0.0, 0.0000],
    [0.3347, 0.0, 0.0, 0.0215, 0.0, 0.3191],
    [0.0, 0.1512, 0.0, 0.3688, 0.2511, 0.0],
    [0.0, 0.3453, 0.0, 0.0387, 0.3669, 0.0],
    [0.0, 0.2673, 0.0, 0.3406, 0.3087, 0.0],
    [0.0, 0.2362, 0.0, 0.2519, 0.0733, 0.0],
];

// User messages after the first user update.
const V_SECOND: [[f64; 6]; 16] = [
    [0.0328, 0.0, 0.7860, 0.0, 0.2511, 0.0],
    [0.6324, 0.0, 0.0000, 0.0, 0.3669, 0.0],
    [0.0002, 0.0, 0.2042, 0.0, 0.3087, 0.0],
    [0.3347, 0.0, 0.0098, 0.0, 0.0733, 0.0],
    [0.0, 0.1512, 0.9962, 0.0, 0.0, 0.0168],
    [0.0, 0.3453, 0.0038, 0.0, 0.0, 0.6641],
    [0.0, 0.2673, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.2362, 0.0000, 0.0, 0.0, 0.3191],
    [0.1764, 0.0, 0.0, 0.3688, 0.0, 0.0],
    [0.6415, 0.0, 0.0, 0.0387, 0.0, 0.0],
    [0.1784, 0.0, 0.0, 0.3406, 0.0, 0.0079],
    [0.0038, 0.0, 0.0, 0.2519, 0.0, 0.9921],
    [0.0, 0.0, 0.0, 0.2660, 0.0042, 0.0],
    [0.0, 0.9986, 0.0, 0.4763, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.2362, 0.9958, 0.0],
    [0.0, 0.0014, 0.0, 0.0215, 0.0, 0.0],
];

fn golden_trace() -> Outcome {
    let cbs = fixtures::table2();
    let fg = fixtures::graph_6x4();
    let printed = fixtures::example_received();

    let codewords = cbs.encode_all(&fixtures::EXAMPLE_SYMBOLS).map_err(|e| e.to_string())?;
    let r = scma::codebook::superpose(&codewords, &[1.0; 6]).map_err(|e| e.to_string())?;
    let y_err = r
        .iter()
        .zip(fixtures::example_noise().values())
        .zip(&printed)
        .map(|((r, n), p)| (r + n - p).norm())
        .fold(0.0, f64::max);
    ensure(y_err < 1.5e-4, || format!("received vector off by {y_err:.2e}"))?;

    let n0 = fixtures::example_n0();
    ensure((n0 - 0.5012).abs() < 5e-5, || format!("N0 = {n0}"))?;
    let obs = Observation::awgn(printed, 6, n0);
    let lik = ResourceLikelihoods::new(&cbs, &fg, &obs).map_err(|e| e.to_string())?;
    let mut state = mpa::initialize(&fg, 4);

    let terms = mpa::resource_terms(&state, &fg, &lik, 0, 0, 0);
    let sum: f64 = terms.iter().map(|t| t.value).sum();
    let term = terms
        .iter()
        .find(|t| t.symbols == [0, 1, 2])
        .map(|t| t.value)
        .ok_or("missing combination term")?;
    ensure((sum - 6.2e-4).abs() <= 5e-5, || {
        format!("U11(1) unnormalized = {sum:.3e}")
    })?;
    ensure((term - 8.5e-6).abs() <= 5e-7, || {
        format!("combination term = {term:.3e}")
    })?;

    mpa::resource_update(&mut state, &fg, &lik, MessageDomain::Probability);
    let du = max_abs_diff(&state.block_matrix(&fg, Direction::ResourceToUser), &U_FIRST);
    ensure(du <= 5e-4, || format!("first U off by {du:.2e}"))?;

    mpa::user_update(&mut state, &fg, MessageDomain::Probability);
    let dv = max_abs_diff(&state.block_matrix(&fg, Direction::UserToResource), &V_SECOND);
    ensure(dv <= 5e-4, || format!("second V off by {dv:.2e}"))?;

    let post = mpa::compute_posterior(&mut state, &fg, MessageDomain::Probability);
    let first = mpa::decide(&post);
    ensure(first == fixtures::EXAMPLE_SYMBOLS, || {
        format!("one-iteration decision {first:?}")
    })?;
    let full = mpa::detect(&obs, &cbs, &fg, &DetectorConfig::default()).map_err(|e| e.to_string())?;
    ensure(full.symbols == fixtures::EXAMPLE_SYMBOLS, || {
        format!("decision {:?}", full.symbols)
    })?;

    Ok(format!(
        "y err {y_err:.1e}, U11(1) {sum:.2e}, term {term:.2e}, U err {du:.1e}, V err {dv:.1e}"
    ))
}

/// Per-user MAP decisions by enumerating every joint symbol vector.
fn brute_force_map(cbs: &CodebookSet, y: &[Complex64], n0: f64) -> Vec<usize> {
    let (j, k, m) = (cbs.users(), cbs.resources(), cbs.order());
    let total = m.pow(j as u32);
    let mut metrics = Vec::with_capacity(total);
    for idx in 0..total {
        let mut d = 0.0;
        for (row, yk) in y.iter().enumerate().take(k) {
            let mut s = Complex64::new(0.0, 0.0);
            let mut rest = idx;
            for user in (0..j).rev() {
                s += cbs.codebook(user).entry(row, rest % m);
                rest /= m;
            }
            d += (yk - s).norm_sqr();
        }
        metrics.push(d / n0);
    }
    let best = metrics.iter().copied().fold(f64::INFINITY, f64::min);
    let mut marginals = vec![vec![0.0; m]; j];
    for (idx, d) in metrics.iter().enumerate() {
        let w = (best - d).exp();
        let mut rest = idx;
        for user in (0..j).rev() {
            marginals[user][rest % m] += w;
            rest /= m;
        }
    }
    marginals
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
                .0
        })
        .collect()
}

fn brute_force_agreement() -> Outcome {
    let cbs = fixtures::table2();
    let fg = cbs.factor_graph().map_err(|e| e.to_string())?;
    let det = DetectorConfig::with_iterations(10);
    let mut report = Vec::new();
    for (p, snr) in [6.0, 10.0].into_iter().enumerate() {
        let n0 = n0_from_ebn0(snr);
        let (mut agree, mut total) = (0, 0);
        let (mut conv_agree, mut conv_total) = (0, 0);
        for t in 0..100u64 {
            let mut rng = stream_rng(7, ((p as u64) << 40) | t);
            let symbols: Vec<usize> = (0..6).map(|_| rng.random_range(0..4)).collect();
            let cw = cbs.encode_all(&symbols).map_err(|e| e.to_string())?;
            let x = scma::codebook::superpose(&cw, &[1.0; 6]).map_err(|e| e.to_string())?;
            let n = sample_awgn(n0, 4, &mut rng).map_err(|e| e.to_string())?;
            let y: Vec<Complex64> = x.iter().zip(n.values()).map(|(a, b)| a + b).collect();
            let map = brute_force_map(&cbs, &y, n0);
            let d = mpa::detect(&Observation::awgn(y, 6, n0), &cbs, &fg, &det).map_err(|e| e.to_string())?;
            let same = d.symbols.iter().zip(&map).filter(|(a, b)| a == b).count();
            agree += same;
            total += 6;
            if d.converged {
                conv_agree += same;
                conv_total += 6;
            }
        }
        let rate = agree as f64 / total as f64;
        ensure(rate >= 0.95, || format!("{snr} dB agreement {rate:.3}"))?;
        if snr == 10.0 {
            let conv = conv_agree as f64 / conv_total.max(1) as f64;
            ensure(conv_total > 0 && conv >= 0.99, || {
                format!("10 dB converged agreement {conv:.3} over {conv_total}")
            })?;
            report.push(format!("10 dB converged {conv:.3} ({} decisions)", conv_total));
        }
        report.push(format!("{snr} dB {rate:.3}"));
    }
    Ok(report.join(", "))
}

fn noiseless_exhaustive() -> Outcome {
    let cbs = fixtures::table2();
    let fg = fixtures::graph_6x4();
    let n0 = n0_from_ebn0(10.0);
    let det = DetectorConfig::default();
    let mut errors = 0;
    for idx in 0..4096usize {
        let symbols: Vec<usize> = (0..6).map(|u| (idx >> (2 * (5 - u))) & 3).collect();
        let cw = cbs.encode_all(&symbols).map_err(|e| e.to_string())?;
        let y = scma::codebook::superpose(&cw, &[1.0; 6]).map_err(|e| e.to_string())?;
        let d = mpa::detect(&Observation::awgn(y, 6, n0), &cbs, &fg, &det).map_err(|e| e.to_string())?;
        errors += d.symbols.iter().zip(&symbols).filter(|(a, b)| a != b).count();
    }
    ensure(errors == 0, || format!("{errors} symbol errors"))?;
    Ok("4096 combinations, 0 errors".into())
}

fn angle_search() -> Outcome {
    let mother = design::pam_mother(4, true).map_err(|e| e.to_string())?;
    let best = design::optimize_rotation_angles(&mother, n0_from_ebn0(10.0), 1.0).map_err(|e| e.to_string())?;
    let found = (best.theta2_deg.round() as i64, best.theta3_deg.round() as i64);
    ensure(found == (60, 120) || found == (120, 60), || {
        format!("optimum at {found:?}")
    })?;
    Ok(format!(
        "({}, {}) deg, bound {:.4} bits",
        found.0, found.1, best.objective
    ))
}

fn assembly() -> Outcome {
    let cbs = design::assemble_codebooks(&design::printed_layers(), &design::indicator_6x4_tabulated())
        .map_err(|e| e.to_string())?;
    ensure(cbs == fixtures::table1(), || {
        "assembled codebooks differ from the table".into()
    })?;
    let fg = cbs.factor_graph().map_err(|e| e.to_string())?;
    let want: Vec<Vec<u8>> = fixtures::F_6X4.iter().map(|r| r.to_vec()).collect();
    ensure(fg.matrix() == want.as_slice(), || "sparsity pattern differs".into())?;
    ensure(cbs.validate_against_graph(&fixtures::graph_6x4()).passed(), || {
        "validation failed".into()
    })?;
    Ok("table reproduced (users 3 and 5 relabeled per cell), pattern matches".into())
}

fn sweep(system: System, fading: Fading, snr: &[f64]) -> Result<Vec<SerRecord>, String> {
    let mut cfg = SimConfig::new(system);
    cfg.fading = fading;
    cfg.snr_db = snr.to_vec();
    cfg.trials = 200_000;
    cfg.max_errors = Some(500);
    cfg.shared_receiver = true;
    sim::run_sweep(&cfg).map_err(|e| e.to_string())
}

/// Non-increasing up to three combined standard errors between neighbours.
fn smoothed_monotone(records: &[SerRecord], users: usize) -> bool {
    records.windows(2).all(|w| {
        let slack = 3.0 * (w[0].std_error(users).powi(2) + w[1].std_error(users).powi(2)).sqrt();
        w[1].ser <= w[0].ser + slack
    })
}

fn ser_trends(fading: Fading, snr: &[f64]) -> Outcome {
    let systems = [(System::Scma8x4, 8), (System::Scma6x4, 6), (System::Scma9x6, 9)];
    let mut curves = Vec::new();
    for (system, users) in systems {
        let rec = sweep(system, fading, snr)?;
        ensure(smoothed_monotone(&rec, users), || {
            format!("{system} not monotone: {:?}", sers(&rec))
        })?;
        curves.push(rec);
    }
    let resolvable = |r: &SerRecord| r.ser * r.trials as f64 >= 10.0;
    let point = (0..snr.len())
        .rev()
        .find(|&p| curves.iter().all(|c| resolvable(&c[p])))
        .ok_or("no SNR point resolvable for all systems")?;
    let (a, b, d) = (curves[0][point].ser, curves[1][point].ser, curves[2][point].ser);
    ensure(a > b && b > d, || {
        format!("at {} dB: 8x4 {a:.3e}, 6x4 {b:.3e}, 9x6 {d:.3e}", snr[point])
    })?;
    Ok(format!("at {} dB: 8x4 {a:.3e} > 6x4 {b:.3e} > 9x6 {d:.3e}", snr[point]))
}

fn sers(records: &[SerRecord]) -> Vec<String> {
    records.iter().map(|r| format!("{:.2e}", r.ser)).collect()
}

fn hma_ordering() -> Outcome {
    let snr = [20.0, 25.0, 30.0];
    let scma = sweep(System::Scma8x4, Fading::Rayleigh, &snr)?;
    let mut cfg = SimConfig::new(System::Hma);
    cfg.fading = Fading::Rayleigh;
    cfg.snr_db = snr.to_vec();
    cfg.trials = 20_000;
    cfg.max_errors = Some(2_000);
    cfg.shared_receiver = true;
    let hma = sim::run_sweep(&cfg).map_err(|e| e.to_string())?;
    for (s, h) in scma.iter().zip(&hma) {
        let (_, s_hi) = s.confidence_interval(8, 3.0);
        let (h_lo, _) = h.confidence_interval(12, 3.0);
        ensure(s_hi < h_lo, || {
            format!("at {} dB SCMA {:.3e} vs HMA {:.3e}", s.snr_db, s.ser, h.ser)
        })?;
    }

    let mut link = HmaLink::new(cfg.hma.config.clone(), Fading::Rayleigh);
    link.shared_receiver = true;
    let (mut sic, mut genie) = (0, 0);
    for (p, &db) in snr.iter().enumerate() {
        let n0 = n0_from_ebn0(db);
        for t in 0..2_000u64 {
            let mut rng = stream_rng(99, sim::trial_stream(p, t));
            let trial = link.run_trial(n0, false, &mut rng).map_err(|e| e.to_string())?;
            sic += trial.strong_errors();
            genie += trial.genie_strong_errors();
        }
    }
    ensure(genie < sic, || format!("genie {genie} vs SIC {sic} strong-user errors"))?;
    let pairs: Vec<String> = scma
        .iter()
        .zip(&hma)
        .map(|(s, h)| format!("{} dB {:.2e} < {:.2e}", s.snr_db, s.ser, h.ser))
        .collect();
    Ok(format!("{}; strong errors genie {genie} < SIC {sic}", pairs.join(", ")))
}

fn random_alphabet<R: Rng>(rng: &mut R) -> Vec<Complex64> {
    let size = rng.random_range(4..=16);
    (0..size)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn mi_properties() -> Outcome {
    let mut rng = stream_rng(2024, 0);
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let s = random_alphabet(&mut rng);
        let n0 = rng.random_range(0.01..1.0);
        let lb = design::mi_lower_bound(&s, n0);
        let est = design::mi_exact_estimate(&s, n0, 20_000, &mut rng).map_err(|e| e.to_string())?;
        let margin = (est.bits - lb) / est.std_error.max(1e-12);
        worst = worst.min(margin);
        ensure(est.bits >= lb - 3.0 * est.std_error, || {
            format!(
                "estimate {:.4} below bound {lb:.4} (se {:.1e})",
                est.bits, est.std_error
            )
        })?;
    }

    let qam: Vec<Complex64> = (0..16)
        .map(|i| c((i % 4) as f64 * 2.0 - 3.0, (i / 4) as f64 * 2.0 - 3.0))
        .collect();
    let psk: Vec<Complex64> = (0..8)
        .map(|i| Complex64::from_polar(1.0, i as f64 * std::f64::consts::FRAC_PI_4))
        .collect();
    let pam = design::pam_mother(4, true).map_err(|e| e.to_string())?;
    let sum = design::sum_alphabet(&fixtures::table2_layers()).map_err(|e| e.to_string())?;
    let mut limits = Vec::new();
    for s in [qam, psk, pam.points.clone(), sum.values] {
        let d = UserConstellation::new(1, s.clone()).min_distance();
        let n0 = d * d / 200.0;
        let full = (s.len() as f64).log2();
        let lb = design::mi_lower_bound(&s, n0);
        let est = design::mi_exact_estimate(&s, n0, 5_000, &mut rng).map_err(|e| e.to_string())?;
        for v in [lb, est.bits] {
            ensure((full - v).abs() <= 0.01 * full, || {
                format!("{v:.4} vs {full:.4} bits for |S| = {}", s.len())
            })?;
        }
        limits.push(format!("{}:{:.4}", s.len(), lb.min(est.bits) / full));
    }
    Ok(format!(
        "min margin {worst:.1} se; low-noise ratios {}",
        limits.join(" ")
    ))
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let checks: [(&str, Check); 9] = [
        ("1 golden trace", golden_trace),
        ("2 brute-force MAP agreement", brute_force_agreement),
        ("3 noiseless exhaustive decoding", noiseless_exhaustive),
        ("4 rotation angle search", angle_search),
        ("5 codebook assembly", assembly),
        ("6a SER trends, AWGN", || {
            ser_trends(Fading::Awgn, &[0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0])
        }),
        ("6b SER trends, Rayleigh", || {
            ser_trends(Fading::Rayleigh, &[0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0])
        }),
        ("7 hybrid vs SCMA ordering", hma_ordering),
        ("8 mutual information properties", mi_properties),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
