//! Hybrid multiple access: two SCMA groups sharing `K` resources in the power domain.
//!
//! The strong (near) group is given less power than the weak (far) group. A
//! strong user's receiver first detects the weak group while treating the
//! strong group as noise, re-encodes and subtracts it, then detects its own
//! group. Weak users detect their group directly with the strong group left
//! in as noise.
//!
//! A power-domain NOMA baseline with one near/far pair per resource is in
//! [`PdNomaBaseline`].

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{sample_awgn, Fading, GainMatrix, NoiseSample};
use crate::codebook::{superpose, CodebookSet};
use crate::error::{Error, Result};
use crate::mpa::{detect, Detection, DetectorConfig, Observation};
use crate::FactorGraph;

/// Two SCMA groups and their per-user powers.
#[derive(Debug, Clone, PartialEq)]
pub struct HmaConfig {
    pub strong: CodebookSet,
    pub weak: CodebookSet,
    pub strong_powers: Vec<f64>,
    pub weak_powers: Vec<f64>,
    strong_graph: FactorGraph,
    weak_graph: FactorGraph,
}

impl HmaConfig {
    /// Checks shapes only. The power ordering is not enforced so degenerate
    /// splits stay expressible; see [`HmaConfig::power_ordered`].
    pub fn new(strong: CodebookSet, weak: CodebookSet, strong_powers: Vec<f64>, weak_powers: Vec<f64>) -> Result<Self> {
        if strong.resources() != weak.resources() {
            return Err(Error::Dimension(format!(
                "groups use {} and {} resources",
                strong.resources(),
                weak.resources()
            )));
        }
        if strong_powers.len() != strong.users() || weak_powers.len() != weak.users() {
            return Err(Error::Dimension("one power per user is required".into()));
        }
        if strong_powers.iter().chain(&weak_powers).any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidArgument("powers must be nonnegative".into()));
        }
        let strong_graph = strong.factor_graph()?;
        let weak_graph = weak.factor_graph()?;
        Ok(Self {
            strong,
            weak,
            strong_powers,
            weak_powers,
            strong_graph,
            weak_graph,
        })
    }

    /// Both groups use `codebooks`; every user pair splits power 2 as
    /// `strong_share : 1 - strong_share`, so the mean user power is 1.
    pub fn split(codebooks: CodebookSet, strong_share: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strong_share) {
            return Err(Error::InvalidArgument(format!(
                "strong share {strong_share} outside [0, 1]"
            )));
        }
        let j = codebooks.users();
        Self::new(
            codebooks.clone(),
            codebooks,
            vec![2.0 * strong_share; j],
            vec![2.0 * (1.0 - strong_share); j],
        )
    }

    /// The default 12x4 setup: two groups sharing the scaled 6x4 codebooks, strong:weak power 1:4.
    pub fn default_12x4() -> Self {
        Self::split(crate::fixtures::table2(), 0.2).expect("valid default")
    }

    pub fn resources(&self) -> usize {
        self.strong.resources()
    }

    pub fn strong_graph(&self) -> &FactorGraph {
        &self.strong_graph
    }

    pub fn weak_graph(&self) -> &FactorGraph {
        &self.weak_graph
    }

    /// Whether the weak group gets more total power than the strong group.
    pub fn power_ordered(&self) -> bool {
        self.weak_powers.iter().sum::<f64>() > self.strong_powers.iter().sum::<f64>()
    }

    /// `sum_i P_i E|x_ik|^2` of the strong group on every resource, uniform symbols.
    pub fn strong_interference(&self) -> Vec<f64> {
        group_energy(&self.strong, &self.strong_powers)
    }
}

fn group_energy(cbs: &CodebookSet, powers: &[f64]) -> Vec<f64> {
    let m = cbs.order() as f64;
    (0..cbs.resources())
        .map(|k| {
            cbs.codebooks()
                .iter()
                .zip(powers)
                .map(|(cb, p)| p * cb.rows()[k].iter().map(|x| x.norm_sqr()).sum::<f64>() / m)
                .sum()
        })
        .collect()
}

/// `100 (J1 + J2) / K`.
pub fn hma_overloading(j1: usize, j2: usize, k: usize) -> f64 {
    100.0 * (j1 + j2) as f64 / k as f64
}

/// `sum_i sqrt(Ps_i) xs_i + sum_j sqrt(Pw_j) xw_j` for 0-based symbols.
pub fn hma_superpose(strong: &[usize], weak: &[usize], cfg: &HmaConfig) -> Result<Vec<Complex64>> {
    let s = superpose(&cfg.strong.encode_all(strong)?, &cfg.strong_powers)?;
    let w = superpose(&cfg.weak.encode_all(weak)?, &cfg.weak_powers)?;
    Ok(s.iter().zip(&w).map(|(a, b)| a + b).collect())
}

/// Which gains the strong receiver applies to the re-encoded weak codewords.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Cancellation {
    /// The receiver's own gains, matching how the whole sum reached it.
    #[default]
    ReceiverGain,
    /// Each weak user's own gains. Only consistent when those equal the receiver's.
    WeakUserGain,
}

/// Result of SIC at one strong receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct SicOutcome {
    /// Weak-group decisions used for cancellation.
    pub weak_estimate: Vec<usize>,
    /// Strong-group detection on the cleaned signal.
    pub strong: Detection,
}

/// Weak-group detection with the strong group treated as Gaussian noise.
pub fn detect_weak(
    y: &[Complex64],
    h: &[Complex64],
    n0: f64,
    cfg: &HmaConfig,
    det: &DetectorConfig,
) -> Result<Detection> {
    let noise = cfg
        .strong_interference()
        .iter()
        .zip(h)
        .map(|(e, g)| n0 + g.norm_sqr() * e)
        .collect();
    let obs = Observation {
        y: y.to_vec(),
        gains: GainMatrix::downlink(h, cfg.weak.users()),
        powers: cfg.weak_powers.clone(),
        noise,
    };
    detect(&obs, &cfg.weak, &cfg.weak_graph, det)
}

/// Cancels `weak_symbols` from `y` and detects the strong group.
///
/// `weak_gains` holds one gain vector per weak user and is only read under
/// [`Cancellation::WeakUserGain`].
#[allow(clippy::too_many_arguments)]
pub fn cancel_and_detect(
    y: &[Complex64],
    h: &[Complex64],
    weak_symbols: &[usize],
    weak_gains: Option<&[Vec<Complex64>]>,
    cancellation: Cancellation,
    n0: f64,
    cfg: &HmaConfig,
    det: &DetectorConfig,
) -> Result<Detection> {
    let y_sic = cancel(y, h, weak_symbols, weak_gains, cancellation, cfg)?;
    let obs = Observation::new(
        y_sic,
        GainMatrix::downlink(h, cfg.strong.users()),
        cfg.strong_powers.clone(),
        n0,
    );
    detect(&obs, &cfg.strong, &cfg.strong_graph, det)
}

/// `y - sum_j diag(g_j) sqrt(Pw_j) xw_j`.
pub fn cancel(
    y: &[Complex64],
    h: &[Complex64],
    weak_symbols: &[usize],
    weak_gains: Option<&[Vec<Complex64>]>,
    cancellation: Cancellation,
    cfg: &HmaConfig,
) -> Result<Vec<Complex64>> {
    let codewords = cfg.weak.encode_all(weak_symbols)?;
    let mut out = y.to_vec();
    for (j, (cw, p)) in codewords.iter().zip(&cfg.weak_powers).enumerate() {
        let g: &[Complex64] = match cancellation {
            Cancellation::ReceiverGain => h,
            Cancellation::WeakUserGain => weak_gains
                .and_then(|g| g.get(j))
                .ok_or_else(|| Error::InvalidArgument("weak user gains are required".into()))?,
        };
        if g.len() != out.len() {
            return Err(Error::Dimension("gain vector length differs from K".into()));
        }
        let a = p.sqrt();
        for ((o, x), gk) in out.iter_mut().zip(cw.values()).zip(g) {
            *o -= gk * x * a;
        }
    }
    Ok(out)
}

/// Full SIC at a strong receiver: detect weak group, cancel, detect strong group.
pub fn sic_detect_strong(
    y: &[Complex64],
    h: &[Complex64],
    weak_gains: Option<&[Vec<Complex64>]>,
    cancellation: Cancellation,
    n0: f64,
    cfg: &HmaConfig,
    det: &DetectorConfig,
) -> Result<SicOutcome> {
    let weak = detect_weak(y, h, n0, cfg, det)?;
    let strong = cancel_and_detect(y, h, &weak.symbols, weak_gains, cancellation, n0, cfg, det)?;
    Ok(SicOutcome {
        weak_estimate: weak.symbols,
        strong,
    })
}

/// Per-user error indicators of one hybrid transmission.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HmaTrial {
    pub strong: Vec<bool>,
    pub weak: Vec<bool>,
    /// Strong-user errors when the true weak codewords are cancelled.
    pub genie_strong: Vec<bool>,
}

fn count(v: &[bool]) -> usize {
    v.iter().filter(|&&e| e).count()
}

impl HmaTrial {
    pub fn strong_errors(&self) -> usize {
        count(&self.strong)
    }

    pub fn weak_errors(&self) -> usize {
        count(&self.weak)
    }

    pub fn genie_strong_errors(&self) -> usize {
        count(&self.genie_strong)
    }

    pub fn errors(&self) -> usize {
        self.strong_errors() + self.weak_errors()
    }

    /// Strong users first, then weak users.
    pub fn indicators(&self) -> Vec<bool> {
        self.strong.iter().chain(&self.weak).copied().collect()
    }
}

/// Channel and receiver settings for hybrid trials.
#[derive(Debug, Clone, PartialEq)]
pub struct HmaLink {
    pub config: HmaConfig,
    pub fading: Fading,
    /// Amplitude factor on every weak receiver's gains (far users see more path loss).
    pub weak_gain: f64,
    pub cancellation: Cancellation,
    pub detector: DetectorConfig,
    /// Decide every user at one receiver of its group instead of at its own.
    pub shared_receiver: bool,
}

impl HmaLink {
    pub fn new(config: HmaConfig, fading: Fading) -> Self {
        Self {
            config,
            fading,
            weak_gain: 0.5,
            cancellation: Cancellation::ReceiverGain,
            detector: DetectorConfig::default(),
            shared_receiver: false,
        }
    }

    pub fn users(&self) -> usize {
        self.config.strong.users() + self.config.weak.users()
    }

    /// One transmission at noise level `n0`; `noiseless` zeroes the noise
    /// while the detectors still assume `n0`.
    ///
    /// Draw order: strong symbols, weak symbols, then gains and noise of
    /// every strong receiver followed by every weak receiver. All receivers
    /// are drawn even with a shared receiver so the streams line up.
    pub fn run_trial<R: Rng + ?Sized>(&self, n0: f64, noiseless: bool, rng: &mut R) -> Result<HmaTrial> {
        let cfg = &self.config;
        let k = cfg.resources();
        let (j1, j2) = (cfg.strong.users(), cfg.weak.users());
        let strong: Vec<usize> = (0..j1).map(|_| rng.random_range(0..cfg.strong.order())).collect();
        let weak: Vec<usize> = (0..j2).map(|_| rng.random_range(0..cfg.weak.order())).collect();
        let x = hma_superpose(&strong, &weak, cfg)?;
        let mut receive = |scale: f64| -> Result<(Vec<Complex64>, Vec<Complex64>)> {
            let h: Vec<Complex64> = self.fading.draw(k, rng).into_iter().map(|g| g * scale).collect();
            let n = if noiseless {
                NoiseSample::zeros(k)
            } else {
                sample_awgn(n0, k, rng)?
            };
            let y = x.iter().zip(&h).zip(n.values()).map(|((s, g), e)| g * s + e).collect();
            Ok((h, y))
        };
        let strong_rx = (0..j1).map(|_| receive(1.0)).collect::<Result<Vec<_>>>()?;
        let weak_rx = (0..j2).map(|_| receive(self.weak_gain)).collect::<Result<Vec<_>>>()?;
        let weak_gains: Vec<Vec<Complex64>> = weak_rx.iter().map(|(h, _)| h.clone()).collect();

        let mut out = HmaTrial {
            strong: vec![false; j1],
            weak: vec![false; j2],
            genie_strong: vec![false; j1],
        };
        let used = if self.shared_receiver { 1 } else { j1 };
        for (i, (h, y)) in strong_rx.iter().enumerate().take(used) {
            let sic = sic_detect_strong(y, h, Some(&weak_gains), self.cancellation, n0, cfg, &self.detector)?;
            let genie = cancel_and_detect(
                y,
                h,
                &weak,
                Some(&weak_gains),
                self.cancellation,
                n0,
                cfg,
                &self.detector,
            )?;
            let judged = if self.shared_receiver { 0..j1 } else { i..i + 1 };
            for u in judged {
                out.strong[u] = sic.strong.symbols[u] != strong[u];
                out.genie_strong[u] = genie.symbols[u] != strong[u];
            }
        }
        let used = if self.shared_receiver { 1 } else { j2 };
        for (j, (h, y)) in weak_rx.iter().enumerate().take(used) {
            let det = detect_weak(y, h, n0, cfg, &self.detector)?;
            let judged = if self.shared_receiver { 0..j2 } else { j..j + 1 };
            for u in judged {
                out.weak[u] = det.symbols[u] != weak[u];
            }
        }
        Ok(out)
    }
}

/// Power-domain NOMA with one near/far pair per resource and QPSK.
///
/// This is a plain baseline construction: `2K` users on `K` resources. The
/// near user removes the far user's symbol by SIC; the far user detects its
/// own symbol with the near user's signal left as interference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdNomaBaseline {
    pub resources: usize,
    pub near_power: f64,
    pub far_power: f64,
    pub far_gain: f64,
    pub fading: Fading,
}

/// Unit-energy QPSK, Gray order.
pub fn qpsk() -> [Complex64; 4] {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    [
        Complex64::new(a, a),
        Complex64::new(-a, a),
        Complex64::new(a, -a),
        Complex64::new(-a, -a),
    ]
}

fn nearest(points: &[Complex64], z: Complex64) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        if (z - p).norm_sqr() < (z - points[best]).norm_sqr() {
            best = i;
        }
    }
    best
}

impl PdNomaBaseline {
    /// Same 1:4 split and far-user path loss as the hybrid default.
    pub fn new(resources: usize, fading: Fading) -> Self {
        Self {
            resources,
            near_power: 0.4,
            far_power: 1.6,
            far_gain: 0.5,
            fading,
        }
    }

    pub fn users(&self) -> usize {
        2 * self.resources
    }

    /// Symbol errors over all `2K` users of one transmission.
    pub fn run_trial<R: Rng + ?Sized>(&self, n0: f64, noiseless: bool, rng: &mut R) -> Result<usize> {
        if !(n0 > 0.0) {
            return Err(Error::InvalidArgument(format!("noise level {n0} must be positive")));
        }
        let c = qpsk();
        let (an, af) = (self.near_power.sqrt(), self.far_power.sqrt());
        let sigma = (n0 / 2.0).sqrt();
        let mut errors = 0;
        for _ in 0..self.resources {
            let sn = rng.random_range(0..4);
            let sf = rng.random_range(0..4);
            let x = an * c[sn] + af * c[sf];
            for (scale, near) in [(1.0, true), (self.far_gain, false)] {
                let h = self.fading.draw(1, rng)[0] * scale;
                let n = if noiseless {
                    Complex64::new(0.0, 0.0)
                } else {
                    let re: f64 = rng.sample(rand_distr::StandardNormal);
                    let im: f64 = rng.sample(rand_distr::StandardNormal);
                    Complex64::new(re * sigma, im * sigma)
                };
                let z = (h * x + n) / h;
                // Far symbol first, as it carries the larger power.
                let far_points: Vec<Complex64> = c.iter().map(|p| p * af).collect();
                let f = nearest(&far_points, z);
                if near {
                    let own: Vec<Complex64> = c.iter().map(|p| p * an).collect();
                    errors += usize::from(nearest(&own, z - far_points[f]) != sn);
                } else {
                    errors += usize::from(f != sf);
                }
            }
        }
        Ok(errors)
    }
}
