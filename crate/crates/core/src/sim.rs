//! Slotted-time simulator: Bernoulli arrivals, degree-of-freedom virtual
//! queues x_{iJj}(t), the online max-weight stable set operation, the
//! finite-horizon batching scheme with backlog clearance and idle/busy
//! tracking, the deterministic offline frame run, the uncoded baseline, and
//! load sweeps with CSV output.
//!
//! Every run is deterministic given its `SimConfig` (including the seed):
//! identical configs produce bit-identical metrics and CSV rows. The exact
//! integer conservation identity
//! `arrivals(t) = x(t) + innovative deliveries(t)` is checked for every
//! sub-flow in every slot of every coded run.

use std::collections::VecDeque;
use std::env;

use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coding::{encode_prefix, find_innovative, CodedPacket, PacketPool, ReceiverState};
use crate::conflict::{build_enhanced_conflict_graph, StableSet};
use crate::gf::Field;
use crate::ratio::{ratio_to_f64, Rational};
use crate::region::{build_offline_schedule, rational_times_usize};
use crate::sched::{
    mwss_exact, mwss_randomized, offline_executor, uncoded_fanout_policy, Action, StoredPacket,
    SwitchConfig,
};
use crate::traffic::TrafficPattern;
use crate::{Error, Result};

/// Exact CSV header for sweep output.
pub const CSV_HEADER: &str = "alpha,policy,seed,slots,mean_delay,p95_delay,mean_backlog,\
backlog_slope,stable,decode_failures,throughput_per_flow(json)";

/// Candidate sets per slot for the randomized policies.
pub const DEFAULT_CANDIDATES: usize = 10;

/// Backlog-growth slope below which a run counts as stable, per slot.
pub const DEFAULT_STABILITY_THRESHOLD: f64 = 1e-3;

/// Environment variable that overrides the configured master seed.
pub const SEED_ENV_VAR: &str = "CODEDXBAR_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Exact maximum-weight stable set, every slot.
    Mwss,
    /// Best of k random maximal stable sets plus the previous slot's set.
    MwssRand,
    /// Precomputed frame schedule with saturated arrivals.
    Offline,
    /// Fanout splitting without coding (multicast VOQs with re-enqueue).
    UncodedRand,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Mwss => "mwss",
            Policy::MwssRand => "mwss-rand",
            Policy::Offline => "offline",
            Policy::UncodedRand => "uncoded-rand",
        }
    }

    pub fn parse(name: &str) -> Result<Policy> {
        match name {
            "mwss" => Ok(Policy::Mwss),
            "mwss-rand" => Ok(Policy::MwssRand),
            "offline" => Ok(Policy::Offline),
            "uncoded-rand" => Ok(Policy::UncodedRand),
            other => Err(Error::Parse(format!(
                "unknown policy {other:?}; expected mwss, mwss-rand, offline or uncoded-rand"
            ))),
        }
    }

    pub fn is_coded(&self) -> bool {
        !matches!(self, Policy::UncodedRand)
    }
}

/// Everything one simulation run needs. Flow rates are the pattern's rates
/// scaled by `alpha`.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub pattern: TrafficPattern,
    pub alpha: Rational,
    pub policy: Policy,
    pub seed: u64,
    pub horizon: usize,
    /// Frame length Δ; its presence selects the finite-horizon batching
    /// scheme for the coded policies.
    pub delta: Option<usize>,
    /// Batch stretch ε; the batch window is Δ0 = ceil((1+ε)Δ).
    pub epsilon: Rational,
    pub field_order: usize,
    pub payload_len: usize,
    pub candidates: usize,
    pub stability_threshold: f64,
}

impl SimConfig {
    pub fn new(pattern: TrafficPattern) -> SimConfig {
        SimConfig {
            pattern,
            alpha: Rational::one(),
            policy: Policy::MwssRand,
            seed: 0xC0DE,
            horizon: 10_000,
            delta: None,
            epsilon: Rational::new(BigInt::one(), 200.into()),
            field_order: 256,
            payload_len: 8,
            candidates: DEFAULT_CANDIDATES,
            stability_threshold: DEFAULT_STABILITY_THRESHOLD,
        }
    }

    fn scaled_rates(&self) -> Vec<Rational> {
        self.pattern.rates().scaled(&self.alpha).0
    }

    fn check_common(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Validation("horizon must be positive".into()));
        }
        if self.payload_len == 0 {
            return Err(Error::Validation("payload length must be positive".into()));
        }
        if self.candidates == 0 {
            return Err(Error::Validation("need at least one candidate set".into()));
        }
        if self.alpha.is_negative() {
            return Err(Error::Validation("load factor must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One flushed batch of a finite-horizon run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchRecord {
    /// Window index (batch k collects arrivals in slots [kΔ0, (k+1)Δ0)).
    pub index: usize,
    /// Slot the frame started (first slot the batch was fully arrived and
    /// at the head of the processing queue).
    pub frame_start: usize,
    /// Slot the batch decoded and flushed.
    pub flush_slot: usize,
    /// Clearance slots T_k spent after the frame.
    pub clearance_slots: usize,
}

/// Run outcome. Delay is measured from a packet's arrival slot to the slot
/// its decode completes at the slowest fanout output (for the uncoded
/// baseline: the slot its residual fanout empties). The non-batched online
/// runs never decode, so their delay fields are `None` and their throughput
/// counts innovative degrees of freedom instead of decoded packets.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub slots: usize,
    pub mean_backlog: f64,
    /// Least-squares slope of the per-slot total backlog over the last half
    /// of the run.
    pub backlog_slope: f64,
    pub stable: bool,
    pub mean_delay: Option<f64>,
    pub p95_delay: Option<f64>,
    pub decode_failures: u64,
    /// Decoded packets per slot per output, in flow order.
    pub throughput_per_flow: Vec<f64>,
    pub arrivals_per_flow: Vec<u64>,
    /// Innovative deliveries (coded) or served copies (uncoded) per sub-flow.
    pub delivered_per_subflow: Vec<u64>,
    /// Packets decoded at each output, per flow (finite-horizon/offline).
    pub decoded_per_flow: Vec<u64>,
    pub idle_slots: u64,
    pub busy_periods: Vec<u64>,
    /// Waiting time W_n per flushed batch: full arrival to flush.
    pub waiting_times: Vec<u64>,
    /// One record per flushed batch, in flush order.
    pub batch_records: Vec<BatchRecord>,
    pub batches_flushed: u64,
    pub final_backlog: u64,
    pub per_slot_backlog: Vec<u64>,
}

/// I.i.d. Bernoulli arrival sampler with per-flow thresholds at 2^-64
/// resolution, so runs are reproducible across platforms.
pub struct ArrivalProcess {
    thresholds: Vec<Threshold>,
}

#[derive(Clone, Copy)]
enum Threshold {
    Never,
    Always,
    Below(u64),
}

impl ArrivalProcess {
    pub fn new(rates: &[Rational]) -> Result<ArrivalProcess> {
        let one = Rational::one();
        let mut thresholds = Vec::with_capacity(rates.len());
        for r in rates {
            if r.is_negative() || r > &one {
                return Err(Error::Validation(format!(
                    "arrival rate {} outside [0, 1]",
                    crate::ratio::ratio_string(r)
                )));
            }
            thresholds.push(if r.is_zero() {
                Threshold::Never
            } else if r.is_one() {
                Threshold::Always
            } else {
                let t = (r.numer() << 64u32) / r.denom();
                Threshold::Below(t.to_u64().expect("rate < 1"))
            });
        }
        Ok(ArrivalProcess { thresholds })
    }

    /// One indicator per flow. Always draws one word per flow so the rng
    /// stream does not depend on the rates.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<bool> {
        self.thresholds
            .iter()
            .map(|t| {
                let u: u64 = rng.random();
                match t {
                    Threshold::Never => false,
                    Threshold::Always => true,
                    Threshold::Below(b) => u < *b,
                }
            })
            .collect()
    }
}

/// Per-flow arrival indicators for one slot: flow f arrives with probability
/// rate_f, independently across flows and slots.
pub fn bernoulli_arrivals(rates: &[Rational], rng: &mut impl Rng) -> Result<Vec<bool>> {
    Ok(ArrivalProcess::new(rates)?.sample(rng))
}

/// The batch window length Δ0 = ceil((1+ε)Δ).
pub fn batch_length(delta: usize, epsilon: &Rational) -> Result<usize> {
    if delta == 0 {
        return Err(Error::Validation("frame length must be positive".into()));
    }
    if epsilon.is_negative() {
        return Err(Error::Validation("epsilon must be nonnegative".into()));
    }
    let exact = (Rational::one() + epsilon) * Rational::from_integer(delta.into());
    exact
        .ceil()
        .to_integer()
        .to_usize()
        .ok_or_else(|| Error::SizeCap("batch window overflows".into()))
}

/// FNV-1a over (master seed, policy name, exact alpha), so each sweep cell
/// gets its own reproducible stream; running `simulate` with the derived
/// seed reproduces the cell exactly.
pub fn derive_run_seed(master: u64, policy: &str, alpha: &Rational) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&master.to_le_bytes());
    eat(policy.as_bytes());
    eat(&[0]);
    eat(crate::ratio::ratio_string(alpha).as_bytes());
    h
}

/// The master seed, unless `CODEDXBAR_SEED` overrides it.
pub fn seed_from_env(default: u64) -> Result<u64> {
    match env::var(SEED_ENV_VAR) {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Parse(format!("{SEED_ENV_VAR}={text:?} is not a u64"))),
        Err(_) => Ok(default),
    }
}

fn mean_of(values: &[u64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64
}

/// Least-squares slope of the last half of the series, per slot.
fn slope_last_half(series: &[u64]) -> f64 {
    let tail = &series[series.len() / 2..];
    let n = tail.len();
    if n < 2 {
        return 0.0;
    }
    let xbar = (n as f64 - 1.0) / 2.0;
    let ybar = mean_of(tail);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &y) in tail.iter().enumerate() {
        let dx = i as f64 - xbar;
        num += dx * (y as f64 - ybar);
        den += dx * dx;
    }
    num / den
}

fn delay_stats(delays: &mut [u64]) -> (Option<f64>, Option<f64>) {
    if delays.is_empty() {
        return (None, None);
    }
    delays.sort_unstable();
    let mean = mean_of(delays);
    let idx = ((0.95 * delays.len() as f64).ceil() as usize)
        .saturating_sub(1)
        .min(delays.len() - 1);
    (Some(mean), Some(delays[idx] as f64))
}

struct BusyTracker {
    current: u64,
    periods: Vec<u64>,
    idle: u64,
}

impl BusyTracker {
    fn new() -> Self {
        BusyTracker {
            current: 0,
            periods: Vec::new(),
            idle: 0,
        }
    }

    fn record(&mut self, busy: bool) {
        if busy {
            self.current += 1;
        } else {
            self.idle += 1;
            if self.current > 0 {
                self.periods.push(self.current);
                self.current = 0;
            }
        }
    }

    fn finish(mut self) -> (Vec<u64>, u64) {
        if self.current > 0 {
            self.periods.push(self.current);
        }
        (self.periods, self.idle)
    }
}

/// arrivals(t) = x(t) + deliveries(t), exactly, for every sub-flow.
fn check_conservation(
    t: usize,
    pattern: &TrafficPattern,
    arrivals_per_flow: &[u64],
    x: &[u64],
    delivered: &[u64],
) -> Result<()> {
    for (s, sf) in pattern.subflows().iter().enumerate() {
        if arrivals_per_flow[sf.flow] != x[s] + delivered[s] {
            return Err(Error::Contract(format!(
                "conservation violated at slot {t} for sub-flow {s}: \
                 {} arrivals vs {} backlogged + {} delivered",
                arrivals_per_flow[sf.flow], x[s], delivered[s]
            )));
        }
    }
    Ok(())
}

fn gen_payload(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.random()).collect()
}

/// Codes one packet over the first `n` pool packets that is innovative to
/// every listed receiver, and delivers it. `Ok(None)` means the innovative
/// search proved no such combination exists (possible only when the field is
/// no larger than the receiver count).
fn code_and_deliver(
    field: &Field,
    pool: &PacketPool,
    n: usize,
    subflow_ids: &[usize],
    receivers: &mut [ReceiverState],
    rng: &mut impl Rng,
) -> Result<Option<CodedPacket>> {
    let coeffs = {
        let refs: Vec<&ReceiverState> = subflow_ids.iter().map(|&s| &receivers[s]).collect();
        find_innovative(field, n, &refs, rng)?
    };
    let Some(coeffs) = coeffs else {
        return Ok(None);
    };
    let packet = encode_prefix(field, pool, &coeffs)?;
    for &s in subflow_ids {
        if !receivers[s].absorb(&packet)? {
            return Err(Error::Contract(
                "delivered coded packet was not innovative".into(),
            ));
        }
    }
    Ok(Some(packet))
}

/// The online (non-batched) coded run: every slot, arrivals join per-flow
/// pools, the policy picks a stable set on the degree-of-freedom backlogs,
/// and each chosen flow sends one packet innovative to all its chosen
/// positive-backlog outputs. Pools are unbounded and nothing ever decodes,
/// so delay is not applicable and throughput counts degrees of freedom.
pub fn run_online(cfg: &SimConfig) -> Result<Metrics> {
    cfg.check_common()?;
    if !matches!(cfg.policy, Policy::Mwss | Policy::MwssRand) {
        return Err(Error::Validation(format!(
            "online run needs a coded stable-set policy, got {}",
            cfg.policy.name()
        )));
    }
    let pattern = &cfg.pattern;
    let graph = build_enhanced_conflict_graph(pattern);
    let field = Field::new(cfg.field_order)?;
    let arrivals = ArrivalProcess::new(&cfg.scaled_rates())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let nf = pattern.flows.len();
    let ns = pattern.num_subflows();
    let mut pools: Vec<PacketPool> = (0..nf)
        .map(|f| PacketPool::new(f, 0, cfg.payload_len))
        .collect();
    let mut receivers: Vec<ReceiverState> = pattern
        .subflows()
        .iter()
        .map(|sf| ReceiverState::new(sf.flow, 0, &field, cfg.payload_len))
        .collect();
    let mut x = vec![0u64; ns];
    let mut arrivals_per_flow = vec![0u64; nf];
    let mut delivered = vec![0u64; ns];
    let mut per_slot = Vec::with_capacity(cfg.horizon);
    let mut previous = StableSet::new(vec![]);
    let mut decode_failures = 0u64;

    for t in 0..cfg.horizon {
        for (f, arrived) in arrivals.sample(&mut rng).into_iter().enumerate() {
            if !arrived {
                continue;
            }
            let payload = gen_payload(&mut rng, cfg.payload_len);
            pools[f].push(payload)?;
            arrivals_per_flow[f] += 1;
            for (s, sf) in pattern.subflows().iter().enumerate() {
                if sf.flow == f {
                    x[s] += 1;
                }
            }
        }

        let set = match cfg.policy {
            Policy::Mwss => mwss_exact(&graph, &x)?,
            _ => mwss_randomized(&graph, &x, &previous, cfg.candidates, &mut rng)?,
        };
        previous = set.clone();
        let config = SwitchConfig::from_stable_set(pattern, &graph, set)?;
        for (flow, outputs) in &config.flows {
            let n = pools[*flow].len();
            if n == 0 {
                continue;
            }
            let chosen: Vec<usize> = outputs
                .iter()
                .filter_map(|&j| pattern.subflow_index(*flow, j))
                .filter(|&s| receivers[s].rank() < n)
                .collect();
            if chosen.is_empty() {
                continue;
            }
            match code_and_deliver(&field, &pools[*flow], n, &chosen, &mut receivers, &mut rng)? {
                Some(_) => {
                    for &s in &chosen {
                        x[s] -= 1;
                        delivered[s] += 1;
                    }
                }
                None => decode_failures += 1,
            }
        }

        check_conservation(t, pattern, &arrivals_per_flow, &x, &delivered)?;
        per_slot.push(x.iter().sum());
    }

    let slope = slope_last_half(&per_slot);
    let throughput: Vec<f64> = pattern
        .flows
        .iter()
        .enumerate()
        .map(|(f, flow)| {
            let total: u64 = pattern
                .subflows()
                .iter()
                .enumerate()
                .filter(|(_, sf)| sf.flow == f)
                .map(|(s, _)| delivered[s])
                .sum();
            total as f64 / (cfg.horizon as f64 * flow.fanout.len() as f64)
        })
        .collect();
    Ok(Metrics {
        slots: cfg.horizon,
        mean_backlog: mean_of(&per_slot),
        backlog_slope: slope,
        stable: slope < cfg.stability_threshold,
        mean_delay: None,
        p95_delay: None,
        decode_failures,
        throughput_per_flow: throughput,
        arrivals_per_flow,
        delivered_per_subflow: delivered,
        decoded_per_flow: vec![0; nf],
        idle_slots: 0,
        busy_periods: Vec::new(),
        waiting_times: Vec::new(),
        batch_records: Vec::new(),
        batches_flushed: 0,
        final_backlog: per_slot.last().copied().unwrap_or(0),
        per_slot_backlog: per_slot,
    })
}

struct Batch {
    index: usize,
    pools: Vec<PacketPool>,
    /// Absolute arrival slot of each pool packet, per flow, ascending.
    arrival_slots: Vec<Vec<usize>>,
    receivers: Vec<ReceiverState>,
    frame_pos: usize,
    frame_start: Option<usize>,
    clearance_slots: usize,
    total_packets: usize,
}

impl Batch {
    fn new(index: usize, cfg: &SimConfig, field: &Field) -> Batch {
        let nf = cfg.pattern.flows.len();
        Batch {
            index,
            pools: (0..nf)
                .map(|f| PacketPool::new(f, index, cfg.payload_len))
                .collect(),
            arrival_slots: vec![Vec::new(); nf],
            receivers: cfg
                .pattern
                .subflows()
                .iter()
                .map(|sf| ReceiverState::new(sf.flow, index, field, cfg.payload_len))
                .collect(),
            frame_pos: 0,
            frame_start: None,
            clearance_slots: 0,
            total_packets: 0,
        }
    }

    fn deficiency_total(&self, pattern: &TrafficPattern) -> usize {
        pattern
            .subflows()
            .iter()
            .enumerate()
            .map(|(s, sf)| self.pools[sf.flow].len() - self.receivers[s].rank())
            .sum()
    }
}

/// The finite-horizon batching run. Arrivals are grouped into windows of
/// Δ0 = ceil((1+ε)Δ) slots; a batch is processed only once fully arrived:
/// first a frame of Δ policy slots in which frame-slot κ sees only the
/// arrivals before batch-relative slot floor((Δ0/Δ)κ), then a clearance
/// phase serving maximal conflict-free groups of the remaining deficiencies
/// round-robin (T_k slots), then a verified decode and a flush. Slots with
/// no fully-arrived unserved batch are idle.
pub fn run_finite_horizon(cfg: &SimConfig) -> Result<Metrics> {
    cfg.check_common()?;
    if !matches!(cfg.policy, Policy::Mwss | Policy::MwssRand) {
        return Err(Error::Validation(format!(
            "finite-horizon run needs a coded stable-set policy, got {}",
            cfg.policy.name()
        )));
    }
    let Some(delta) = cfg.delta else {
        return Err(Error::Validation(
            "finite-horizon run needs a frame length".into(),
        ));
    };
    let delta0 = batch_length(delta, &cfg.epsilon)?;
    if cfg.horizon < 10 * delta0 {
        return Err(Error::Validation(format!(
            "horizon {} shorter than ten batch windows ({})",
            cfg.horizon,
            10 * delta0
        )));
    }

    let pattern = &cfg.pattern;
    let graph = build_enhanced_conflict_graph(pattern);
    let field = Field::new(cfg.field_order)?;
    let arrivals = ArrivalProcess::new(&cfg.scaled_rates())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let nf = pattern.flows.len();
    let ns = pattern.num_subflows();
    let mut pending: VecDeque<Batch> = VecDeque::new();
    let mut x = vec![0u64; ns];
    let mut arrivals_per_flow = vec![0u64; nf];
    let mut delivered = vec![0u64; ns];
    let mut decoded_per_flow = vec![0u64; nf];
    let mut per_slot = Vec::with_capacity(cfg.horizon);
    let mut previous = StableSet::new(vec![]);
    let mut decode_failures = 0u64;
    let mut delays: Vec<u64> = Vec::new();
    let mut waits: Vec<u64> = Vec::new();
    let mut records: Vec<BatchRecord> = Vec::new();
    let mut flushed = 0u64;
    let mut busy = BusyTracker::new();

    for t in 0..cfg.horizon {
        // arrivals join the window's batch
        let window = t / delta0;
        for (f, arrived) in arrivals.sample(&mut rng).into_iter().enumerate() {
            if !arrived {
                continue;
            }
            if pending.back().map(|b| b.index) != Some(window) {
                pending.push_back(Batch::new(window, cfg, &field));
            }
            let b = pending.back_mut().unwrap();
            b.pools[f].push(gen_payload(&mut rng, cfg.payload_len))?;
            b.arrival_slots[f].push(t);
            b.total_packets += 1;
            arrivals_per_flow[f] += 1;
            for (s, sf) in pattern.subflows().iter().enumerate() {
                if sf.flow == f {
                    x[s] += 1;
                }
            }
        }

        // serve the oldest fully-arrived batch
        let servable = pending.front().is_some_and(|b| t >= (b.index + 1) * delta0);
        busy.record(servable);
        if servable {
            let b = pending.front_mut().unwrap();
            b.frame_start.get_or_insert(t);
            if b.frame_pos < delta {
                // one frame slot, restricted to the visible arrivals
                let kappa = b.frame_pos + 1;
                let visible_before = b.index * delta0 + delta0 * kappa / delta;
                let nvis: Vec<usize> = b
                    .arrival_slots
                    .iter()
                    .map(|slots| slots.partition_point(|&a| a < visible_before))
                    .collect();
                let mut w = vec![0u64; ns];
                for (s, sf) in pattern.subflows().iter().enumerate() {
                    w[s] = (nvis[sf.flow] - b.receivers[s].rank()) as u64;
                }
                let set = match cfg.policy {
                    Policy::Mwss => mwss_exact(&graph, &w)?,
                    _ => mwss_randomized(&graph, &w, &previous, cfg.candidates, &mut rng)?,
                };
                previous = set.clone();
                let config = SwitchConfig::from_stable_set(pattern, &graph, set)?;
                for (flow, outputs) in &config.flows {
                    let n = nvis[*flow];
                    if n == 0 {
                        continue;
                    }
                    let chosen: Vec<usize> = outputs
                        .iter()
                        .filter_map(|&j| pattern.subflow_index(*flow, j))
                        .filter(|&s| b.receivers[s].rank() < n)
                        .collect();
                    if chosen.is_empty() {
                        continue;
                    }
                    match code_and_deliver(
                        &field,
                        &b.pools[*flow],
                        n,
                        &chosen,
                        &mut b.receivers,
                        &mut rng,
                    )? {
                        Some(_) => {
                            for &s in &chosen {
                                x[s] -= 1;
                                delivered[s] += 1;
                            }
                        }
                        None => decode_failures += 1,
                    }
                }
                b.frame_pos += 1;
            } else {
                // clearance slot: a maximal conflict-free group of the
                // positive-deficiency sub-flows, rotated for round-robin
                let mut cands: Vec<usize> = (0..ns)
                    .filter(|&s| {
                        let f = pattern.subflows()[s].flow;
                        b.receivers[s].rank() < b.pools[f].len()
                    })
                    .collect();
                let rot = b.clearance_slots % cands.len().max(1);
                cands.rotate_left(rot);
                let mut group: Vec<usize> = Vec::new();
                for &s in &cands {
                    if group.iter().all(|&u| !graph.has_edge(u, s)) {
                        group.push(s);
                    }
                }
                group.sort_unstable();
                let mut served_any = false;
                let mut i = 0;
                while i < group.len() {
                    let flow = pattern.subflows()[group[i]].flow;
                    let mut j = i;
                    while j < group.len() && pattern.subflows()[group[j]].flow == flow {
                        j += 1;
                    }
                    let chosen = &group[i..j];
                    let n = b.pools[flow].len();
                    match code_and_deliver(
                        &field,
                        &b.pools[flow],
                        n,
                        chosen,
                        &mut b.receivers,
                        &mut rng,
                    )? {
                        Some(_) => {
                            served_any = true;
                            for &s in chosen {
                                x[s] -= 1;
                                delivered[s] += 1;
                            }
                        }
                        None => decode_failures += 1,
                    }
                    i = j;
                }
                b.clearance_slots += 1;
                if !served_any {
                    // Only reachable when the field is too small for the
                    // fanout; the batch can never finish, so fail it.
                    return Err(Error::Coding(format!(
                        "clearance of batch {} stalled: no innovative packet found",
                        b.index
                    )));
                }
            }

            // flush once the whole batch is delivered
            if b.frame_pos == delta && b.deficiency_total(pattern) == 0 {
                for (s, sf) in pattern.subflows().iter().enumerate() {
                    let n = b.pools[sf.flow].len();
                    if n == 0 {
                        continue;
                    }
                    let ok = match b.receivers[s].decode(n)? {
                        Ok(payloads) => (0..n).all(|i| payloads[i] == b.pools[sf.flow].packet(i)),
                        Err(_) => false,
                    };
                    if !ok {
                        decode_failures += 1;
                    }
                }
                for (f, slots) in b.arrival_slots.iter().enumerate() {
                    decoded_per_flow[f] += slots.len() as u64;
                    for &a in slots {
                        delays.push((t - a) as u64);
                    }
                }
                waits.push((t + 1 - (b.index + 1) * delta0) as u64);
                records.push(BatchRecord {
                    index: b.index,
                    frame_start: b.frame_start.expect("flushed batches were served"),
                    flush_slot: t,
                    clearance_slots: b.clearance_slots,
                });
                flushed += 1;
                pending.pop_front();
            }
        }

        check_conservation(t, pattern, &arrivals_per_flow, &x, &delivered)?;
        per_slot.push(x.iter().sum());
    }

    let slope = slope_last_half(&per_slot);
    let throughput: Vec<f64> = decoded_per_flow
        .iter()
        .map(|&d| d as f64 / cfg.horizon as f64)
        .collect();
    let (periods, idle) = busy.finish();
    let (mean_delay, p95_delay) = delay_stats(&mut delays);
    Ok(Metrics {
        slots: cfg.horizon,
        mean_backlog: mean_of(&per_slot),
        backlog_slope: slope,
        stable: slope < cfg.stability_threshold,
        mean_delay,
        p95_delay,
        decode_failures,
        throughput_per_flow: throughput,
        arrivals_per_flow,
        delivered_per_subflow: delivered,
        decoded_per_flow,
        idle_slots: idle,
        busy_periods: periods,
        waiting_times: waits,
        batch_records: records,
        batches_flushed: flushed,
        final_backlog: per_slot.last().copied().unwrap_or(0),
        per_slot_backlog: per_slot,
    })
}

/// The deterministic offline run: each frame injects exactly rate·F packets
/// per flow (saturated arrivals), executes the precomputed schedule, and
/// verifies that every output decodes the whole batch by frame end.
pub fn run_offline(cfg: &SimConfig) -> Result<Metrics> {
    cfg.check_common()?;
    if cfg.policy != Policy::Offline {
        return Err(Error::Validation(format!(
            "offline run got policy {}",
            cfg.policy.name()
        )));
    }
    let pattern = &cfg.pattern;
    let rates = crate::traffic::RateVector(cfg.scaled_rates());
    let frame = build_offline_schedule(pattern, &rates)?;
    let f_len = frame.frame_length;
    let graph = build_enhanced_conflict_graph(pattern);
    let field = Field::new(cfg.field_order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let nf = pattern.flows.len();
    let ns = pattern.num_subflows();
    let inject: Vec<usize> = rates
        .0
        .iter()
        .map(|r| rational_times_usize(r, f_len))
        .collect::<Result<_>>()?;
    let frames = cfg.horizon / f_len;

    let mut x = vec![0u64; ns];
    let mut arrivals_per_flow = vec![0u64; nf];
    let mut delivered = vec![0u64; ns];
    let mut decoded_per_flow = vec![0u64; nf];
    let mut per_slot = Vec::with_capacity(cfg.horizon);
    let mut delays: Vec<u64> = Vec::new();
    let mut decode_failures = 0u64;
    let mut busy = BusyTracker::new();

    for b in 0..frames {
        let t0 = b * f_len;
        let mut pools: Vec<PacketPool> = (0..nf)
            .map(|f| PacketPool::new(f, b, cfg.payload_len))
            .collect();
        let mut receivers: Vec<ReceiverState> = pattern
            .subflows()
            .iter()
            .map(|sf| ReceiverState::new(sf.flow, b, &field, cfg.payload_len))
            .collect();
        for (f, &count) in inject.iter().enumerate() {
            for _ in 0..count {
                pools[f].push(gen_payload(&mut rng, cfg.payload_len))?;
            }
            arrivals_per_flow[f] += count as u64;
            for (s, sf) in pattern.subflows().iter().enumerate() {
                if sf.flow == f {
                    x[s] += count as u64;
                }
            }
        }
        let batch_busy = inject.iter().any(|&c| c > 0);

        for k in 0..f_len {
            let t = t0 + k;
            let decision = offline_executor(
                pattern, &graph, &field, &frame, t, &pools, &receivers, &mut rng,
            )?;
            for action in &decision.actions {
                let Action::Coded {
                    flow,
                    packet,
                    outputs,
                } = action
                else {
                    return Err(Error::Contract("offline policy must code".into()));
                };
                for &j in outputs {
                    let s = pattern
                        .subflow_index(*flow, j)
                        .ok_or_else(|| Error::Contract("output outside fanout".into()))?;
                    if !receivers[s].absorb(packet)? {
                        return Err(Error::Contract(
                            "offline schedule delivered a non-innovative packet".into(),
                        ));
                    }
                    x[s] -= 1;
                    delivered[s] += 1;
                }
            }
            check_conservation(t, pattern, &arrivals_per_flow, &x, &delivered)?;
            per_slot.push(x.iter().sum());
            busy.record(batch_busy);
        }

        // frame end: every output decodes the whole batch
        for (s, sf) in pattern.subflows().iter().enumerate() {
            let n = pools[sf.flow].len();
            if n == 0 {
                continue;
            }
            let ok = match receivers[s].decode(n)? {
                Ok(payloads) => (0..n).all(|i| payloads[i] == pools[sf.flow].packet(i)),
                Err(_) => false,
            };
            if !ok {
                decode_failures += 1;
            }
        }
        for (f, &count) in inject.iter().enumerate() {
            decoded_per_flow[f] += count as u64;
            delays.extend(std::iter::repeat_n((f_len - 1) as u64, count));
        }
    }

    for _ in frames * f_len..cfg.horizon {
        busy.record(false);
    }
    per_slot.resize(cfg.horizon, 0);

    let slope = slope_last_half(&per_slot);
    let (mean_delay, p95) = delay_stats(&mut delays);
    let throughput: Vec<f64> = decoded_per_flow
        .iter()
        .map(|&d| d as f64 / cfg.horizon as f64)
        .collect();
    let (periods, idle) = busy.finish();
    Ok(Metrics {
        slots: cfg.horizon,
        mean_backlog: mean_of(&per_slot),
        backlog_slope: slope,
        stable: slope < cfg.stability_threshold,
        mean_delay,
        p95_delay: p95,
        decode_failures,
        throughput_per_flow: throughput,
        arrivals_per_flow,
        delivered_per_subflow: delivered,
        decoded_per_flow,
        idle_slots: idle,
        busy_periods: periods,
        waiting_times: Vec::new(),
        batch_records: Vec::new(),
        batches_flushed: frames as u64,
        final_backlog: 0,
        per_slot_backlog: per_slot,
    })
}

/// The uncoded fanout-splitting baseline over multicast VOQs with
/// re-enqueue. Delay is measured at the slot a packet's residual fanout
/// empties; throughput counts served copies per output.
pub fn run_uncoded(cfg: &SimConfig) -> Result<Metrics> {
    cfg.check_common()?;
    if cfg.policy != Policy::UncodedRand {
        return Err(Error::Validation(format!(
            "uncoded run got policy {}",
            cfg.policy.name()
        )));
    }
    let pattern = &cfg.pattern;
    let graph = build_enhanced_conflict_graph(pattern);
    let arrivals = ArrivalProcess::new(&cfg.scaled_rates())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let nf = pattern.flows.len();
    let ns = pattern.num_subflows();
    let mut queues: Vec<VecDeque<StoredPacket>> = (0..nf).map(|_| VecDeque::new()).collect();
    let mut backlogs = vec![0u64; ns];
    let mut arrivals_per_flow = vec![0u64; nf];
    let mut delivered = vec![0u64; ns];
    let mut delivered_packets_per_flow = vec![0u64; nf];
    let mut per_slot = Vec::with_capacity(cfg.horizon);
    let mut delays: Vec<u64> = Vec::new();
    let mut previous: Option<SwitchConfig> = None;

    for t in 0..cfg.horizon {
        for (f, arrived) in arrivals.sample(&mut rng).into_iter().enumerate() {
            if !arrived {
                continue;
            }
            queues[f].push_back(StoredPacket {
                arrival: t,
                residual: pattern.flows[f].fanout.clone(),
            });
            arrivals_per_flow[f] += 1;
            for &j in &pattern.flows[f].fanout {
                backlogs[pattern.subflow_index(f, j).expect("fanout")] += 1;
            }
        }

        let decision = uncoded_fanout_policy(
            pattern,
            &graph,
            &queues,
            &backlogs,
            previous.as_ref(),
            cfg.candidates,
            &mut rng,
        )?;
        previous = Some(decision.config.clone());
        for action in &decision.actions {
            let Action::Uncoded { flow, outputs } = action else {
                return Err(Error::Contract("uncoded policy must not code".into()));
            };
            let packet = queues[*flow]
                .front_mut()
                .ok_or_else(|| Error::Contract("served an empty queue".into()))?;
            for &j in outputs {
                let s = pattern.subflow_index(*flow, j).expect("fanout");
                backlogs[s] -= 1;
                delivered[s] += 1;
            }
            packet.residual.retain(|j| !outputs.contains(j));
            if packet.residual.is_empty() {
                delays.push((t - packet.arrival) as u64);
                delivered_packets_per_flow[*flow] += 1;
                queues[*flow].pop_front();
            }
        }

        // copies arrived = copies queued + copies served, per sub-flow
        for (s, sf) in pattern.subflows().iter().enumerate() {
            if arrivals_per_flow[sf.flow] != backlogs[s] + delivered[s] {
                return Err(Error::Contract(format!(
                    "copy conservation violated at slot {t} for sub-flow {s}"
                )));
            }
        }
        per_slot.push(backlogs.iter().sum());
    }

    let slope = slope_last_half(&per_slot);
    let throughput: Vec<f64> = pattern
        .flows
        .iter()
        .enumerate()
        .map(|(f, flow)| {
            let total: u64 = flow
                .fanout
                .iter()
                .map(|&j| delivered[pattern.subflow_index(f, j).expect("fanout")])
                .sum();
            total as f64 / (cfg.horizon as f64 * flow.fanout.len() as f64)
        })
        .collect();
    let (mean_delay, p95) = delay_stats(&mut delays);
    Ok(Metrics {
        slots: cfg.horizon,
        mean_backlog: mean_of(&per_slot),
        backlog_slope: slope,
        stable: slope < cfg.stability_threshold,
        mean_delay,
        p95_delay: p95,
        decode_failures: 0,
        throughput_per_flow: throughput,
        arrivals_per_flow,
        delivered_per_subflow: delivered,
        decoded_per_flow: delivered_packets_per_flow,
        idle_slots: 0,
        busy_periods: Vec::new(),
        waiting_times: Vec::new(),
        batch_records: Vec::new(),
        batches_flushed: 0,
        final_backlog: per_slot.last().copied().unwrap_or(0),
        per_slot_backlog: per_slot,
    })
}

/// Dispatches on policy; a frame length selects the finite-horizon scheme
/// for the coded stable-set policies.
pub fn run(cfg: &SimConfig) -> Result<Metrics> {
    match cfg.policy {
        Policy::Offline => run_offline(cfg),
        Policy::UncodedRand => run_uncoded(cfg),
        Policy::Mwss | Policy::MwssRand => {
            if cfg.delta.is_some() {
                run_finite_horizon(cfg)
            } else {
                run_online(cfg)
            }
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NaN".into(),
    }
}

fn throughput_json(m: &Metrics) -> String {
    let fields: Vec<String> = m
        .throughput_per_flow
        .iter()
        .enumerate()
        .map(|(f, v)| format!("\"{f}\":{v}"))
        .collect();
    format!("{{{}}}", fields.join(","))
}

fn csv_quote(field: &str) -> String {
    format!("\"{}\"", field.replace('"', "\"\""))
}

/// One CSV data row matching [`CSV_HEADER`].
pub fn csv_row(alpha: &Rational, policy: Policy, seed: u64, m: &Metrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        ratio_to_f64(alpha),
        policy.name(),
        seed,
        m.slots,
        fmt_opt(m.mean_delay),
        fmt_opt(m.p95_delay),
        m.mean_backlog,
        m.backlog_slope,
        m.stable,
        m.decode_failures,
        csv_quote(&throughput_json(m))
    )
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub alpha: Rational,
    pub policy: Policy,
    pub seed: u64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub csv: String,
}

impl SweepOutcome {
    /// Smallest alpha whose run was unstable for the policy, if any.
    pub fn first_unstable(&self, policy: Policy) -> Option<&Rational> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && !r.metrics.stable)
            .map(|r| &r.alpha)
    }
}

/// One run per (alpha, policy), each with its own seed derived from the
/// master seed, so row results do not depend on sweep composition.
pub fn sweep(base: &SimConfig, alphas: &[Rational], policies: &[Policy]) -> Result<SweepOutcome> {
    if alphas.is_empty() || policies.is_empty() {
        return Err(Error::Validation(
            "sweep needs at least one alpha and one policy".into(),
        ));
    }
    if alphas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Validation("alpha list must be monotone".into()));
    }
    let mut rows = Vec::new();
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for alpha in alphas {
        for &policy in policies {
            let seed = derive_run_seed(base.seed, policy.name(), alpha);
            let mut cfg = base.clone();
            cfg.alpha = alpha.clone();
            cfg.policy = policy;
            cfg.seed = seed;
            let metrics = run(&cfg)?;
            csv.push_str(&csv_row(alpha, policy, seed, &metrics));
            csv.push('\n');
            rows.push(SweepRow {
                alpha: alpha.clone(),
                policy,
                seed,
                metrics,
            });
        }
    }
    Ok(SweepOutcome { rows, csv })
}
