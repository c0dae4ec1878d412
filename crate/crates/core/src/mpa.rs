//! Message-passing multi-user detection over the SCMA factor graph.
//!
//! Messages are length-`M` probability vectors living on graph edges:
//! `U[k -> j]` from resource nodes to user nodes and `V[j -> k]` back. One
//! iteration is a resource update followed by a user update; the posterior is
//! the product of all incoming `U` messages at a user node, and the decision
//! is its argmax.
//!
//! The resource update is the exact sum-product rule: for edge `(k, j)` and
//! candidate symbol `m`,
//!
//! ```text
//! U[k->j](m) = sum over symbols c of the other users j' on resource k of
//!              1/(pi N0) exp(-|y_k - a_kj x_jmk - sum a_kj' x_j'c k|^2 / N0)
//!              * prod V[j'->k](c_j')
//! ```
//!
//! with `a_kj = sqrt(P_j) h_kj`. The Gaussian factor only depends on the joint
//! symbol choice on resource `k`, so it is tabulated once per detection in
//! [`ResourceLikelihoods`] and reused by every iteration.
//!
//! Every message is normalized after each half-iteration. A vector whose sum
//! falls below [`UNDERFLOW_FLOOR`] (or is not finite) is replaced by the
//! uniform distribution and counted in [`MessageState::underflow_events`].

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::channel::GainMatrix;
use crate::codebook::CodebookSet;
use crate::error::{Error, Result};
use crate::factor_graph::FactorGraph;

/// Sums below this are treated as underflowed.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Arithmetic used for message computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MessageDomain {
    /// Products and sums of probabilities, as written in the update rules.
    #[default]
    Probability,
    /// The same sum-product rule evaluated with log-sum-exp on log messages, so
    /// nothing underflows. Probabilities are kept alongside for inspection.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Iteration cap `kappa`, at least 1.
    pub max_iterations: usize,
    /// Stop once the largest posterior change between iterations is below this.
    pub convergence_tol: f64,
    pub domain: MessageDomain,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            convergence_tol: 1e-6,
            domain: MessageDomain::Probability,
        }
    }
}

impl DetectorConfig {
    pub fn with_iterations(max_iterations: usize) -> Self {
        Self {
            max_iterations,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::InvalidArgument("convergence_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// What the detector knows about one received block.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Vec<Complex64>,
    pub gains: GainMatrix,
    pub powers: Vec<f64>,
    /// Noise variance per resource; usually all equal to `N0`.
    pub noise: Vec<f64>,
}

impl Observation {
    pub fn new(y: Vec<Complex64>, gains: GainMatrix, powers: Vec<f64>, n0: f64) -> Self {
        let k = y.len();
        Self {
            y,
            gains,
            powers,
            noise: vec![n0; k],
        }
    }

    /// Unit gains and powers.
    pub fn awgn(y: Vec<Complex64>, users: usize, n0: f64) -> Self {
        let k = y.len();
        Self::new(y, GainMatrix::unit(k, users), vec![1.0; users], n0)
    }

    fn check(&self, cbs: &CodebookSet, fg: &FactorGraph) -> Result<()> {
        let (k, j) = (fg.resources(), fg.users());
        if cbs.users() != j || cbs.resources() != k {
            return Err(Error::Dimension(format!(
                "codebooks are {}x{} but graph is {j}x{k}",
                cbs.users(),
                cbs.resources()
            )));
        }
        if self.y.len() != k || self.noise.len() != k {
            return Err(Error::Dimension(format!(
                "received {} samples and {} noise levels for {k} resources",
                self.y.len(),
                self.noise.len()
            )));
        }
        if self.gains.resources() != k || self.gains.users() != j || self.powers.len() != j {
            return Err(Error::Dimension("gain matrix or powers do not match J x K".into()));
        }
        if self.noise.iter().any(|n| !(*n > 0.0)) {
            return Err(Error::InvalidArgument("noise levels must be positive".into()));
        }
        Ok(())
    }
}

/// Gaussian likelihood of every joint symbol choice on every resource.
///
/// For resource `k` with users `j_0 < j_1 < ... < j_{d-1}` the table is
/// indexed by `c = sum_t m_t M^(d-1-t)`, i.e. the first user's symbol is the
/// most significant digit.
#[derive(Debug, Clone)]
pub struct ResourceLikelihoods {
    order: usize,
    /// `(1/(pi N0)) exp(-d^2/N0)` per resource and combination.
    prob: Vec<Vec<f64>>,
    /// Natural log of the same.
    log: Vec<Vec<f64>>,
}

impl ResourceLikelihoods {
    pub fn new(cbs: &CodebookSet, fg: &FactorGraph, obs: &Observation) -> Result<Self> {
        obs.check(cbs, fg)?;
        let m = cbs.order();
        let mut prob = Vec::with_capacity(fg.resources());
        let mut log = Vec::with_capacity(fg.resources());
        for k in 0..fg.resources() {
            let users = fg.resource_neighbors(k);
            // Effective received constellation of each user on this resource.
            let points: Vec<Vec<Complex64>> = users
                .iter()
                .map(|&j| {
                    let a = obs.gains.get(k, j) * obs.powers[j].sqrt();
                    (0..m).map(|s| a * cbs.codebook(j).entry(k, s)).collect()
                })
                .collect();
            let n0 = obs.noise[k];
            let log_norm = -(std::f64::consts::PI * n0).ln();
            let combos = m.pow(users.len() as u32);
            let mut lp = Vec::with_capacity(combos);
            let mut digits = vec![0usize; users.len()];
            for _ in 0..combos {
                let s: Complex64 = digits.iter().zip(&points).map(|(&d, p)| p[d]).sum();
                lp.push(log_norm - (obs.y[k] - s).norm_sqr() / n0);
                increment(&mut digits, m);
            }
            prob.push(lp.iter().map(|l| l.exp()).collect());
            log.push(lp);
        }
        Ok(Self { order: m, prob, log })
    }

    /// Likelihood of the joint assignment `symbols` (one per user on `k`, ascending user order).
    pub fn likelihood(&self, k: usize, symbols: &[usize]) -> f64 {
        self.prob[k][combo_index(symbols, self.order)]
    }
}

/// Edge messages and the posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    order: usize,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    posterior: Vec<Vec<f64>>,
    // Normalized log messages, kept only by the log-domain schedule.
    log_u: Vec<Vec<f64>>,
    log_v: Vec<Vec<f64>>,
    underflow_events: usize,
}

impl MessageState {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `U[k -> j]` for edge id `e`.
    pub fn u(&self, e: usize) -> &[f64] {
        &self.u[e]
    }

    /// `V[j -> k]` for edge id `e`.
    pub fn v(&self, e: usize) -> &[f64] {
        &self.v[e]
    }

    /// Normalized posterior per user; empty until [`compute_posterior`] runs.
    pub fn posterior(&self) -> &[Vec<f64>] {
        &self.posterior
    }

    pub fn underflow_events(&self) -> usize {
        self.underflow_events
    }

    /// Messages of one direction in `KM x J` block layout: block `k`, row `m`,
    /// column `j` holds the edge `(k, j)` message, 0 where there is no edge.
    pub fn block_matrix(&self, fg: &FactorGraph, direction: Direction) -> Vec<Vec<f64>> {
        let m = self.order;
        let mut out = vec![vec![0.0; fg.users()]; fg.resources() * m];
        for e in 0..fg.edge_count() {
            let (k, j) = fg.edge_endpoints(e);
            let msg = match direction {
                Direction::ResourceToUser => &self.u[e],
                Direction::UserToResource => &self.v[e],
            };
            for (s, &p) in msg.iter().enumerate() {
                out[k * m + s][j] = p;
            }
        }
        out
    }

    /// Plain-text dump of [`MessageState::block_matrix`] with 4 decimals.
    pub fn dump(&self, fg: &FactorGraph, direction: Direction) -> String {
        format_blocks(&self.block_matrix(fg, direction), self.order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `U` messages.
    ResourceToUser,
    /// `V` messages.
    UserToResource,
}

/// Formats a `KM x J` matrix with a rule between each block of `m` rows.
pub fn format_blocks(matrix: &[Vec<f64>], m: usize) -> String {
    let mut out = String::new();
    for (r, row) in matrix.iter().enumerate() {
        if r > 0 && r % m == 0 {
            let _ = writeln!(out, "{}", "-".repeat(row.len() * 9));
        }
        let cells: Vec<String> = row.iter().map(|v| format!("{v:8.4}")).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}

/// All `V[j -> k] = 1/M`; `U` zero; no posterior.
pub fn initialize(fg: &FactorGraph, m: usize) -> MessageState {
    let e = fg.edge_count();
    MessageState {
        order: m,
        u: vec![vec![0.0; m]; e],
        v: vec![vec![1.0 / m as f64; m]; e],
        posterior: Vec::new(),
        log_u: vec![vec![f64::NEG_INFINITY; m]; e],
        log_v: vec![vec![-(m as f64).ln(); m]; e],
        underflow_events: 0,
    }
}

/// One term of a resource-node sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationTerm {
    /// Symbols of every user on the resource, ascending user order (target user included).
    pub symbols: Vec<usize>,
    /// Gaussian factor times the incoming `V` probabilities of the other users.
    pub value: f64,
}

/// The `M^(d_f - 1)` terms whose sum is the unnormalized `U[k -> j](m)`.
pub fn resource_terms(
    state: &MessageState,
    fg: &FactorGraph,
    lik: &ResourceLikelihoods,
    k: usize,
    j: usize,
    m: usize,
) -> Vec<CombinationTerm> {
    let users = fg.resource_neighbors(k);
    let t = users.iter().position(|&u| u == j).expect("user not on resource");
    let order = state.order;
    let mut terms = Vec::new();
    let mut digits = vec![0usize; users.len()];
    for c in 0..lik.prob[k].len() {
        if digits[t] == m {
            let mut value = lik.prob[k][c];
            for (s, &u) in users.iter().enumerate() {
                if s != t {
                    let e = fg.edge(k, u).expect("edge");
                    value *= state.v[e][digits[s]];
                }
            }
            terms.push(CombinationTerm {
                symbols: digits.clone(),
                value,
            });
        }
        increment(&mut digits, order);
    }
    terms
}

/// Unnormalized resource-to-user messages computed from the current `V`.
///
/// Combinations are visited in groups sharing all digits but the last user's,
/// so the last user's `V` is folded in once per group.
pub fn resource_messages_unnormalized(
    state: &MessageState,
    fg: &FactorGraph,
    lik: &ResourceLikelihoods,
) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; state.order]; fg.edge_count()];
    accumulate_resource_messages(&mut out, &state.v, fg, lik, state.order);
    out
}

/// Adds the sum-product terms into `out`, which must start at zero.
fn accumulate_resource_messages(
    out: &mut [Vec<f64>],
    v: &[Vec<f64>],
    fg: &FactorGraph,
    lik: &ResourceLikelihoods,
    m: usize,
) {
    for k in 0..fg.resources() {
        let users = fg.resource_neighbors(k);
        let d = users.len();
        // Edges of one resource are numbered consecutively.
        let e0 = fg.edge(k, users[0]).expect("edge");
        let table = &lik.prob[k];
        if d == 1 {
            out[e0].copy_from_slice(table);
            continue;
        }
        let last = e0 + d - 1;
        let vs: Vec<&[f64]> = (e0..last).map(|e| v[e].as_slice()).collect();
        let mut digits = vec![0usize; d - 1];
        // Prefix and suffix products of the current head digits' V values.
        let mut prefix = vec![1.0; d];
        let mut suffix = vec![1.0; d];
        let (front, back) = out.split_at_mut(last);
        let sums = &mut back[0];
        for block in table.chunks_exact(m) {
            for t in 0..d - 1 {
                prefix[t + 1] = prefix[t] * vs[t][digits[t]];
            }
            for t in (0..d - 1).rev() {
                suffix[t] = suffix[t + 1] * vs[t][digits[t]];
            }
            let head = prefix[d - 1];
            let mut folded = 0.0;
            for ((acc, &l), &vl) in sums.iter_mut().zip(block).zip(&v[last]) {
                *acc += head * l;
                folded += l * vl;
            }
            for t in 0..d - 1 {
                front[e0 + t][digits[t]] += folded * prefix[t] * suffix[t + 1];
            }
            increment(&mut digits, m);
        }
    }
}

/// Sum-product resource update followed by normalization.
pub fn resource_update(state: &mut MessageState, fg: &FactorGraph, lik: &ResourceLikelihoods, domain: MessageDomain) {
    match domain {
        MessageDomain::Probability => {
            state.u.iter_mut().for_each(|msg| msg.fill(0.0));
            accumulate_resource_messages(&mut state.u, &state.v, fg, lik, state.order);
            for msg in &mut state.u {
                state.underflow_events += usize::from(!normalize(msg));
            }
        }
        MessageDomain::Log => {
            let fresh = resource_messages_log(state, fg, lik);
            for (e, mut msg) in fresh.into_iter().enumerate() {
                state.underflow_events += usize::from(!log_normalize(&mut msg));
                exp_into(&mut state.u[e], &msg);
                state.log_u[e] = msg;
            }
        }
    }
}

/// Log of the unnormalized resource messages, via log-sum-exp.
fn resource_messages_log(state: &MessageState, fg: &FactorGraph, lik: &ResourceLikelihoods) -> Vec<Vec<f64>> {
    let m = state.order;
    let mut out = vec![vec![f64::NEG_INFINITY; m]; fg.edge_count()];
    for k in 0..fg.resources() {
        let users = fg.resource_neighbors(k);
        let edges: Vec<usize> = users.iter().map(|&j| fg.edge(k, j).expect("edge")).collect();
        let log_v: Vec<&Vec<f64>> = edges.iter().map(|&e| &state.log_v[e]).collect();
        let combos = lik.log[k].len();
        // Two passes per edge: find the max exponent, then accumulate shifted terms.
        let mut terms = vec![vec![0.0; combos]; edges.len()];
        let mut digits = vec![0usize; users.len()];
        for (c, &base) in lik.log[k].iter().enumerate() {
            for (t, row) in terms.iter_mut().enumerate() {
                let mut x = base;
                for (s, lv) in log_v.iter().enumerate() {
                    if s != t {
                        x += lv[digits[s]];
                    }
                }
                row[c] = x;
            }
            increment(&mut digits, m);
        }
        for (t, &e) in edges.iter().enumerate() {
            let mut max = vec![f64::NEG_INFINITY; m];
            let mut digits = vec![0usize; users.len()];
            for &x in &terms[t] {
                max[digits[t]] = max[digits[t]].max(x);
                increment(&mut digits, m);
            }
            let mut acc = vec![0.0; m];
            let mut digits = vec![0usize; users.len()];
            for &x in &terms[t] {
                let s = digits[t];
                if max[s].is_finite() {
                    acc[s] += (x - max[s]).exp();
                }
                increment(&mut digits, m);
            }
            for s in 0..m {
                out[e][s] = if max[s].is_finite() {
                    max[s] + acc[s].ln()
                } else {
                    f64::NEG_INFINITY
                };
            }
        }
    }
    out
}

/// `V[j -> k](m) = prod over the user's other resources k' of U[k' -> j](m)`, normalized.
pub fn user_update(state: &mut MessageState, fg: &FactorGraph, domain: MessageDomain) {
    let MessageState {
        u,
        v,
        log_u,
        log_v,
        underflow_events,
        ..
    } = state;
    for j in 0..fg.users() {
        let resources = fg.user_neighbors(j);
        for &k in resources {
            let e = fg.edge(k, j).expect("edge");
            let others = resources
                .iter()
                .filter(|&&r| r != k)
                .map(|&r| fg.edge(r, j).expect("edge"));
            let ok = match domain {
                MessageDomain::Probability => product_into(&mut v[e], u, others),
                MessageDomain::Log => {
                    let ok = log_sum_into(&mut log_v[e], log_u, others);
                    exp_into(&mut v[e], &log_v[e]);
                    ok
                }
            };
            *underflow_events += usize::from(!ok);
        }
    }
}

/// Unnormalized `prod over all k in N_j of U[k -> j](m)` per user.
pub fn posterior_unnormalized(state: &MessageState, fg: &FactorGraph) -> Vec<Vec<f64>> {
    (0..fg.users())
        .map(|j| {
            let edges = fg.user_neighbors(j).iter().map(|&k| fg.edge(k, j).expect("edge"));
            combine(&state.u, edges, state.order)
        })
        .collect()
}

/// Normalized posterior per user, stored in the state and returned.
pub fn compute_posterior(state: &mut MessageState, fg: &FactorGraph, domain: MessageDomain) -> Vec<Vec<f64>> {
    update_posterior(state, fg, domain);
    state.posterior.clone()
}

fn update_posterior(state: &mut MessageState, fg: &FactorGraph, domain: MessageDomain) {
    let m = state.order;
    state.posterior.resize(fg.users(), vec![0.0; m]);
    let mut log = vec![0.0; m];
    let MessageState {
        u,
        log_u,
        posterior,
        underflow_events,
        ..
    } = state;
    for (j, p) in posterior.iter_mut().enumerate() {
        let edges = fg.user_neighbors(j).iter().map(|&k| fg.edge(k, j).expect("edge"));
        let ok = match domain {
            MessageDomain::Probability => product_into(p, u, edges),
            MessageDomain::Log => {
                let ok = log_sum_into(&mut log, log_u, edges);
                exp_into(p, &log);
                ok
            }
        };
        *underflow_events += usize::from(!ok);
    }
}

/// Per-user argmax; exact ties go to the smallest symbol index.
pub fn decide(posterior: &[Vec<f64>]) -> Vec<usize> {
    posterior
        .iter()
        .map(|p| {
            let mut best = 0;
            for (s, &v) in p.iter().enumerate().skip(1) {
                if v > p[best] {
                    best = s;
                }
            }
            best
        })
        .collect()
}

/// Outcome of [`detect`].
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// 0-based symbol per user.
    pub symbols: Vec<usize>,
    pub posterior: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub underflow_events: usize,
}

/// Runs the full message-passing detector.
///
/// Iterates resource and user updates until the posterior moves by less than
/// `cfg.convergence_tol` (checked from the second iteration on) or
/// `cfg.max_iterations` is reached, then decides on the last posterior.
pub fn detect(obs: &Observation, cbs: &CodebookSet, fg: &FactorGraph, cfg: &DetectorConfig) -> Result<Detection> {
    cfg.validate()?;
    let lik = ResourceLikelihoods::new(cbs, fg, obs)?;
    let mut state = initialize(fg, cbs.order());
    let mut previous: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iterations {
        iterations += 1;
        resource_update(&mut state, fg, &lik, cfg.domain);
        user_update(&mut state, fg, cfg.domain);
        update_posterior(&mut state, fg, cfg.domain);
        if iterations > 1 {
            let change = previous
                .iter()
                .flatten()
                .zip(state.posterior.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if change < cfg.convergence_tol {
                converged = true;
                break;
            }
            for (p, q) in previous.iter_mut().zip(&state.posterior) {
                p.copy_from_slice(q);
            }
        } else {
            previous = state.posterior.clone();
        }
    }
    let posterior = state.posterior;
    Ok(Detection {
        symbols: decide(&posterior),
        posterior,
        iterations,
        converged,
        underflow_events: state.underflow_events,
    })
}

/// Convenience wrapper holding the immutable inputs.
#[derive(Debug, Clone, Copy)]
pub struct MpaDetector<'a> {
    pub codebooks: &'a CodebookSet,
    pub graph: &'a FactorGraph,
    pub config: DetectorConfig,
}

impl<'a> MpaDetector<'a> {
    pub fn new(codebooks: &'a CodebookSet, graph: &'a FactorGraph, config: DetectorConfig) -> Self {
        Self {
            codebooks,
            graph,
            config,
        }
    }

    pub fn detect(&self, obs: &Observation) -> Result<Detection> {
        detect(obs, self.codebooks, self.graph, &self.config)
    }
}

/// Product of the given edges' `U` messages.
fn combine(u: &[Vec<f64>], edges: impl Iterator<Item = usize>, m: usize) -> Vec<f64> {
    let mut acc = vec![1.0; m];
    for e in edges {
        for (a, p) in acc.iter_mut().zip(&u[e]) {
            *a *= p;
        }
    }
    acc
}

/// Normalized product of the `U` messages on `edges`, written into `out`.
fn product_into(out: &mut [f64], u: &[Vec<f64>], edges: impl Iterator<Item = usize>) -> bool {
    out.fill(1.0);
    for e in edges {
        for (a, p) in out.iter_mut().zip(&u[e]) {
            *a *= p;
        }
    }
    normalize(out)
}

/// Log-domain counterpart of [`product_into`].
fn log_sum_into(out: &mut [f64], log_u: &[Vec<f64>], edges: impl Iterator<Item = usize>) -> bool {
    out.fill(0.0);
    for e in edges {
        for (a, l) in out.iter_mut().zip(&log_u[e]) {
            *a += l;
        }
    }
    log_normalize(out)
}

fn exp_into(out: &mut [f64], log: &[f64]) {
    for (p, l) in out.iter_mut().zip(log) {
        *p = l.exp();
    }
}

/// Scales to unit sum; falls back to uniform and returns false on underflow.
fn normalize(msg: &mut [f64]) -> bool {
    let sum: f64 = msg.iter().sum();
    if sum.is_finite() && sum >= UNDERFLOW_FLOOR {
        msg.iter_mut().for_each(|p| *p /= sum);
        true
    } else {
        let uniform = 1.0 / msg.len() as f64;
        msg.iter_mut().for_each(|p| *p = uniform);
        false
    }
}

/// Shifts log-weights so they log-sum-exp to 0; uniform and false if none is finite.
fn log_normalize(msg: &mut [f64]) -> bool {
    let max = msg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let uniform = -(msg.len() as f64).ln();
        msg.iter_mut().for_each(|p| *p = uniform);
        return false;
    }
    let lse = max + msg.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    msg.iter_mut().for_each(|p| *p -= lse);
    true
}

fn increment(digits: &mut [usize], base: usize) {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return;
        }
        *d = 0;
    }
}

fn combo_index(symbols: &[usize], base: usize) -> usize {
    symbols.iter().fold(0, |acc, &s| acc * base + s)
}
