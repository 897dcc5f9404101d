//! Slot-by-slot scheduling policies: exact and randomized maximum-weight
//! stable set, the offline frame executor, and the uncoded fanout-splitting
//! baseline.
//!
//! All policies return a [`PolicyDecision`] whose configuration is a stable
//! set of the enhanced conflict graph, which guarantees at most one flow per
//! input and at most one sub-flow per output.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::coding::{encode, find_innovative, CodedPacket, PacketPool, ReceiverState};
use crate::conflict::{ConflictGraph, StableSet, ENUMERATION_CAP};
use crate::gf::Field;
use crate::region::ScheduleFrame;
use crate::traffic::TrafficPattern;
use crate::{Error, Result};

/// The set of sub-flows served in one slot, grouped by flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchConfig {
    pub set: StableSet,
    /// (flow index, chosen outputs ascending), in flow order.
    pub flows: Vec<(usize, Vec<usize>)>,
}

impl SwitchConfig {
    /// Groups a stable set by flow and checks the crossbar invariants:
    /// conflict-free, at most one flow per input, at most one sub-flow per
    /// output.
    pub fn from_stable_set(
        pattern: &TrafficPattern,
        graph: &ConflictGraph,
        set: StableSet,
    ) -> Result<SwitchConfig> {
        let subs = pattern.subflows();
        if set.vertices.iter().any(|&v| v >= subs.len()) {
            return Err(Error::Dimension(
                "configuration references a sub-flow outside the pattern".into(),
            ));
        }
        if !graph.is_stable_set(&set.vertices) {
            return Err(Error::Validation(
                "configuration is not a stable set of the conflict graph".into(),
            ));
        }
        let mut flows: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut input_claims: Vec<Option<usize>> = vec![None; pattern.num_inputs];
        let mut output_claims: Vec<bool> = vec![false; pattern.num_outputs];
        for &v in &set.vertices {
            let sf = &subs[v];
            match input_claims[sf.input] {
                Some(f) if f != sf.flow => {
                    return Err(Error::Validation(format!(
                        "two flows scheduled at input {}",
                        sf.input + 1
                    )))
                }
                _ => input_claims[sf.input] = Some(sf.flow),
            }
            if output_claims[sf.output] {
                return Err(Error::Validation(format!(
                    "output {} claimed twice",
                    sf.output + 1
                )));
            }
            output_claims[sf.output] = true;
            match flows.last_mut() {
                Some((f, outs)) if *f == sf.flow => outs.push(sf.output),
                _ => flows.push((sf.flow, vec![sf.output])),
            }
        }
        Ok(SwitchConfig { set, flows })
    }

    pub fn empty() -> SwitchConfig {
        SwitchConfig {
            set: StableSet::new(vec![]),
            flows: vec![],
        }
    }
}

/// Per-flow service action attached to a configuration.
#[derive(Debug, Clone)]
pub enum Action {
    /// Deliver one coded packet to every listed output.
    Coded {
        flow: usize,
        packet: CodedPacket,
        outputs: Vec<usize>,
    },
    /// Serve the listed outputs of the flow's head-of-line packet.
    Uncoded { flow: usize, outputs: Vec<usize> },
}

/// A configuration plus what each chosen flow actually transmits.
#[derive(Debug, Clone)]
pub struct PolicyDecision {
    pub config: SwitchConfig,
    pub actions: Vec<Action>,
}

/// Total weight of a vertex set.
pub fn set_weight(vertices: &[usize], weights: &[u64]) -> u64 {
    vertices.iter().map(|&v| weights[v]).sum()
}

struct MwssSearch<'a> {
    adj: &'a [u64],
    w: &'a [u64],
    best_set: u64,
    best_w: u64,
}

impl MwssSearch<'_> {
    /// Greedy clique-cover bound: any stable set takes at most one vertex
    /// from each clique class, so the class-maxima sum bounds the best
    /// completion of `cand`.
    fn bound(&self, mut cand: u64) -> u64 {
        let mut common: Vec<u64> = Vec::new();
        let mut class_max: Vec<u64> = Vec::new();
        let mut total = 0u64;
        while cand != 0 {
            let v = cand.trailing_zeros() as usize;
            cand &= cand - 1;
            let bit = 1u64 << v;
            let mut placed = false;
            for (c, m) in common.iter_mut().zip(class_max.iter_mut()) {
                if *c & bit != 0 {
                    *c &= self.adj[v];
                    if self.w[v] > *m {
                        total += self.w[v] - *m;
                        *m = self.w[v];
                    }
                    placed = true;
                    break;
                }
            }
            if !placed {
                common.push(self.adj[v]);
                class_max.push(self.w[v]);
                total += self.w[v];
            }
        }
        total
    }

    /// DFS over stable sets, branching on the lowest candidate and taking
    /// the include branch first. That visits complete sets in lexicographic
    /// order of their sorted vertex sequences, so keeping the incumbent on
    /// ties (strict `>` update) yields the lexicographically smallest
    /// maximum, and pruning at `<=` only discards lex-later equals.
    fn expand(&mut self, cand: u64, set: u64, acc: u64) {
        if cand == 0 {
            if acc > self.best_w {
                self.best_w = acc;
                self.best_set = set;
            }
            return;
        }
        if acc + self.bound(cand) <= self.best_w {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        let bit = 1u64 << v;
        self.expand(cand & !bit & !self.adj[v], set | bit, acc + self.w[v]);
        self.expand(cand & !bit, set, acc);
    }
}

/// Exact maximum-weight stable set. Zero-weight vertices are dropped before
/// the search; ties are broken toward the lexicographically smallest sorted
/// vertex sequence.
pub fn mwss_exact(graph: &ConflictGraph, weights: &[u64]) -> Result<StableSet> {
    if weights.len() != graph.num_vertices() {
        return Err(Error::Dimension(format!(
            "{} weights for {} vertices",
            weights.len(),
            graph.num_vertices()
        )));
    }
    graph.check_cap(ENUMERATION_CAP, "exact stable set search")?;
    let adj = graph.adjacency_masks();
    let mut cand: u64 = 0;
    for (v, &w) in weights.iter().enumerate() {
        if w > 0 {
            cand |= 1u64 << v;
        }
    }
    let mut search = MwssSearch {
        adj: &adj,
        w: weights,
        best_set: 0,
        best_w: 0,
    };
    search.expand(cand, 0, 0);
    let mut vertices = Vec::new();
    let mut left = search.best_set;
    while left != 0 {
        vertices.push(left.trailing_zeros() as usize);
        left &= left - 1;
    }
    Ok(StableSet::new(vertices))
}

/// Best of `k` random greedy maximal stable sets and `previous` re-evaluated
/// at the current weights (restricted to its positive-weight vertices).
/// Candidates insert positive-weight vertices first, in shuffled order, so
/// the returned weight is never below the previous configuration's. Ties
/// keep the earliest candidate, with `previous` evaluated first, so the
/// schedule only changes on strict improvement.
pub fn mwss_randomized(
    graph: &ConflictGraph,
    weights: &[u64],
    previous: &StableSet,
    k: usize,
    rng: &mut impl Rng,
) -> Result<StableSet> {
    let n = graph.num_vertices();
    if weights.len() != n {
        return Err(Error::Dimension(format!(
            "{} weights for {n} vertices",
            weights.len()
        )));
    }
    if k == 0 {
        return Err(Error::Validation("need at least one candidate set".into()));
    }
    if previous.vertices.iter().any(|&v| v >= n) {
        return Err(Error::Dimension(
            "previous configuration references an unknown vertex".into(),
        ));
    }
    let mut best: Vec<usize> = previous
        .vertices
        .iter()
        .copied()
        .filter(|&v| weights[v] > 0)
        .collect();
    let mut best_w = set_weight(&best, weights);

    let mut positive: Vec<usize> = (0..n).filter(|&v| weights[v] > 0).collect();
    let mut zero: Vec<usize> = (0..n).filter(|&v| weights[v] == 0).collect();
    let mut cand: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..k {
        positive.shuffle(rng);
        zero.shuffle(rng);
        cand.clear();
        for &v in positive.iter().chain(zero.iter()) {
            if cand.iter().all(|&u| !graph.has_edge(u, v)) {
                cand.push(v);
            }
        }
        let w = set_weight(&cand, weights);
        if w > best_w {
            best_w = w;
            best = cand.clone();
        }
    }
    Ok(StableSet::new(best))
}

/// Executes slot `t` (mod the frame length) of an offline schedule: for each
/// flow in the slot's stable set, codes one packet that is innovative to all
/// chosen outputs still short of the pool's rank. Outputs already at full
/// rank are no-ops, as are flows with empty pools.
#[allow(clippy::too_many_arguments)]
pub fn offline_executor(
    pattern: &TrafficPattern,
    graph: &ConflictGraph,
    field: &Field,
    frame: &ScheduleFrame,
    t: usize,
    pools: &[PacketPool],
    receivers: &[ReceiverState],
    rng: &mut impl Rng,
) -> Result<PolicyDecision> {
    if pools.len() != pattern.flows.len() || receivers.len() != pattern.subflows().len() {
        return Err(Error::Dimension(
            "pools must be per flow and receiver states per sub-flow".into(),
        ));
    }
    let set = frame.slots[t % frame.frame_length].clone();
    let config = SwitchConfig::from_stable_set(pattern, graph, set)?;
    let mut actions = Vec::new();
    for (flow, outputs) in &config.flows {
        let n = pools[*flow].len();
        if n == 0 {
            continue;
        }
        let mut chosen: Vec<usize> = Vec::new();
        let mut refs: Vec<&ReceiverState> = Vec::new();
        for &j in outputs {
            let s = pattern
                .subflow_index(*flow, j)
                .ok_or_else(|| Error::Contract("scheduled output outside the fanout".into()))?;
            if receivers[s].rank() < n {
                chosen.push(j);
                refs.push(&receivers[s]);
            }
        }
        if chosen.is_empty() {
            continue;
        }
        let coeffs = find_innovative(field, n, &refs, rng)?.ok_or_else(|| {
            Error::Coding(format!(
                "no innovative combination for flow {flow} over {} receivers",
                refs.len()
            ))
        })?;
        let packet = encode(field, &pools[*flow], &coeffs)?;
        actions.push(Action::Coded {
            flow: *flow,
            packet,
            outputs: chosen,
        });
    }
    Ok(PolicyDecision { config, actions })
}

/// One multicast packet waiting in a flow queue: served outputs are removed
/// from `residual`; the packet departs when `residual` empties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredPacket {
    pub arrival: usize,
    pub residual: Vec<usize>,
}

/// Uncoded fanout-splitting baseline over multicast VOQs. A candidate
/// shuffles the inputs into a priority order and grants outputs one at a
/// time, cycling through the inputs: each round, an input claims the next
/// unclaimed output of its head-of-line packet's residual fanout. An input
/// commits to the first flow (in its own random order) that can claim an
/// output and keeps serving that flow only; granting one output per round
/// keeps a backlogged input from being starved by another input's full
/// fanout. The candidate weight is the total residual-fanout backlog of the
/// flows it serves (all queued copies of a served flow count, whether or not
/// their output is claimed, so a configuration that leaves a backlogged
/// input idle is always beaten by one that serves it); the best of `k`
/// candidates and the re-evaluated previous configuration wins, previous
/// first on ties.
pub fn uncoded_fanout_policy(
    pattern: &TrafficPattern,
    graph: &ConflictGraph,
    queues: &[VecDeque<StoredPacket>],
    backlogs: &[u64],
    previous: Option<&SwitchConfig>,
    k: usize,
    rng: &mut impl Rng,
) -> Result<PolicyDecision> {
    if queues.len() != pattern.flows.len() || backlogs.len() != pattern.subflows().len() {
        return Err(Error::Dimension(
            "queues must be per flow and backlogs per sub-flow".into(),
        ));
    }
    if k == 0 {
        return Err(Error::Validation("need at least one candidate".into()));
    }

    let mut best: (Vec<(usize, Vec<usize>)>, u64) = match previous {
        Some(cfg) => {
            let orders: Vec<Vec<usize>> = cfg.flows.iter().map(|(f, _)| vec![*f]).collect();
            allocate_round_robin(&orders, pattern, queues, backlogs)
        }
        None => (Vec::new(), 0),
    };

    let mut flows_at_input: Vec<Vec<usize>> = vec![Vec::new(); pattern.num_inputs];
    for (f, flow) in pattern.flows.iter().enumerate() {
        flows_at_input[flow.input].push(f);
    }
    let mut inputs: Vec<usize> = (0..pattern.num_inputs).collect();
    for _ in 0..k {
        inputs.shuffle(rng);
        let orders: Vec<Vec<usize>> = inputs
            .iter()
            .map(|&i| {
                let mut fl = flows_at_input[i].clone();
                fl.shuffle(rng);
                fl
            })
            .collect();
        let cand = allocate_round_robin(&orders, pattern, queues, backlogs);
        if cand.1 > best.1 {
            best = cand;
        }
    }

    best.0.sort_by_key(|(f, _)| *f);
    let mut vertices = Vec::new();
    let mut actions = Vec::new();
    for (f, outs) in &best.0 {
        for &j in outs {
            vertices.push(pattern.subflow_index(*f, j).expect("inside fanout"));
        }
        actions.push(Action::Uncoded {
            flow: *f,
            outputs: outs.clone(),
        });
    }
    let config = SwitchConfig::from_stable_set(pattern, graph, StableSet::new(vertices))?;
    Ok(PolicyDecision { config, actions })
}

/// One preference list of flows per participating input, in priority order.
/// Rounds grant each input at most one output claim until nothing moves.
fn allocate_round_robin(
    orders: &[Vec<usize>],
    pattern: &TrafficPattern,
    queues: &[VecDeque<StoredPacket>],
    backlogs: &[u64],
) -> (Vec<(usize, Vec<usize>)>, u64) {
    fn first_unclaimed(
        f: usize,
        claimed: &[bool],
        queues: &[VecDeque<StoredPacket>],
    ) -> Option<usize> {
        queues[f]
            .front()?
            .residual
            .iter()
            .copied()
            .find(|&j| !claimed[j])
    }

    let flow_backlog = |f: usize| -> u64 {
        pattern.flows[f]
            .fanout
            .iter()
            .map(|&j| backlogs[pattern.subflow_index(f, j).expect("fanout")])
            .sum()
    };

    let mut claimed = vec![false; pattern.num_outputs];
    let mut chosen: Vec<Option<usize>> = vec![None; orders.len()];
    let mut claims: Vec<Vec<usize>> = vec![Vec::new(); orders.len()];
    let mut weight = 0u64;
    loop {
        let mut progress = false;
        for (slot, prefs) in orders.iter().enumerate() {
            let pick = match chosen[slot] {
                Some(f) => first_unclaimed(f, &claimed, queues).map(|j| (f, j)),
                None => prefs
                    .iter()
                    .copied()
                    .find_map(|f| first_unclaimed(f, &claimed, queues).map(|j| (f, j))),
            };
            let Some((f, j)) = pick else { continue };
            if chosen[slot].is_none() {
                weight += flow_backlog(f);
            }
            chosen[slot] = Some(f);
            claimed[j] = true;
            claims[slot].push(j);
            progress = true;
        }
        if !progress {
            break;
        }
    }

    let mut served: Vec<(usize, Vec<usize>)> = Vec::new();
    for (slot, f) in chosen.into_iter().enumerate() {
        if let Some(f) = f {
            let mut outs = std::mem::take(&mut claims[slot]);
            outs.sort_unstable();
            served.push((f, outs));
        }
    }
    (served, weight)
}
