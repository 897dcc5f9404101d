//! Rate region analysis: fractional weighted coloring, region membership,
//! minimum speedup, the 2xN closed-form no-coding check, and offline frame
//! schedules.
//!
//! A rate vector is achievable with coding iff its enhanced rate vector lies
//! in the stable set polytope of the enhanced conflict graph, iff the
//! fractional weighted chromatic number at those weights is at most 1. That
//! chromatic number is also the minimum speedup at which the vector becomes
//! achievable.

use num::{One, Signed, Zero};
use std::collections::BTreeMap;

use crate::conflict::{build_enhanced_conflict_graph, ConflictGraph, StableSet};
use crate::lp::solve_coloring_lp;
use crate::polytope::{enumerate_vertices, DdCaps};
use crate::ratio::{ratio_string, Rational};
use crate::traffic::{RateVector, TrafficPattern};
use crate::{Error, Result};

/// Optimal fractional weighted coloring with its dual certificate.
#[derive(Debug, Clone)]
pub struct ColoringSolution {
    /// The fractional weighted chromatic number at the given weights.
    pub value: Rational,
    /// Stable sets with positive multipliers; Σλ = value.
    pub terms: Vec<(StableSet, Rational)>,
    /// Per-vertex dual certificate: y ≥ 0, y·χ^S ≤ 1 on every maximal
    /// stable set, and y·w = value.
    pub dual: Vec<Rational>,
}

impl ColoringSolution {
    /// Full audit against a graph and weight vector. Verifies primal cover,
    /// value consistency, and the dual certificate against every maximal
    /// stable set (so the graph must be within the enumeration cap).
    pub fn verify(&self, graph: &ConflictGraph, weights: &[Rational]) -> Result<()> {
        let n = graph.num_vertices();
        if weights.len() != n || self.dual.len() != n {
            return Err(Error::Dimension("coloring audit length mismatch".into()));
        }
        let mut covered = vec![Rational::zero(); n];
        let mut total = Rational::zero();
        for (set, l) in &self.terms {
            if !l.is_positive() {
                return Err(Error::Contract("non-positive coloring term".into()));
            }
            if !graph.is_stable_set(&set.vertices) {
                return Err(Error::Contract("coloring term is not a stable set".into()));
            }
            total += l;
            for &v in &set.vertices {
                covered[v] += l;
            }
        }
        if total != self.value {
            return Err(Error::Contract("coloring value differs from Σλ".into()));
        }
        for (c, w) in covered.iter().zip(weights) {
            if c < w {
                return Err(Error::Contract("coloring leaves a weight uncovered".into()));
            }
        }
        if self.dual.iter().any(|y| y.is_negative()) {
            return Err(Error::Contract("negative dual entry".into()));
        }
        let yw: Rational = self.dual.iter().zip(weights).map(|(y, w)| y * w).sum();
        if yw != self.value {
            return Err(Error::Contract("dual certificate value mismatch".into()));
        }
        for set in graph.maximal_stable_sets()? {
            let s: Rational = set.vertices.iter().map(|&v| self.dual[v].clone()).sum();
            if s > Rational::one() {
                return Err(Error::Contract(
                    "dual certificate violates a stable set".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Minimum speedup report: the chromatic number together with the plain
/// admissibility verdict at the same rates.
#[derive(Debug, Clone)]
pub struct SpeedupReport {
    pub chi_f: Rational,
    pub admissible: bool,
}

/// Exact min Σλ over maximal-stable-set columns with Σ λ χ^S ≥ w.
///
/// Zero-weight vertices are projected out first: rows with w = 0 are
/// automatically covered, maximal stable sets of the induced subgraph are
/// exactly the projections of full maximal sets, and any induced set
/// extends back to a full maximal set. The projection keeps the LP at the
/// size of the support of w.
pub fn fractional_weighted_coloring(
    graph: &ConflictGraph,
    weights: &[Rational],
) -> Result<ColoringSolution> {
    let n = graph.num_vertices();
    if weights.len() != n {
        return Err(Error::Dimension(format!(
            "{} weights for {} vertices",
            weights.len(),
            n
        )));
    }
    if weights.iter().any(|w| w.is_negative()) {
        return Err(Error::Validation("negative weight".into()));
    }
    let active: Vec<usize> = (0..n).filter(|&v| weights[v].is_positive()).collect();
    if active.is_empty() {
        return Ok(ColoringSolution {
            value: Rational::zero(),
            terms: vec![],
            dual: vec![Rational::zero(); n],
        });
    }
    let induced = graph.induced_subgraph(&active);
    let sets = induced.maximal_stable_sets()?;
    let columns: Vec<Vec<u8>> = sets.iter().map(|s| s.incidence(active.len())).collect();
    let wa: Vec<Rational> = active.iter().map(|&v| weights[v].clone()).collect();
    let lp = solve_coloring_lp(&columns, &wa)?;

    let mut terms = Vec::new();
    for (set, l) in sets.iter().zip(&lp.lambda) {
        if l.is_positive() {
            let full: Vec<usize> = set.vertices.iter().map(|&k| active[k]).collect();
            terms.push((graph.extend_to_maximal_stable(&full), l.clone()));
        }
    }
    let mut dual = vec![Rational::zero(); n];
    for (k, &v) in active.iter().enumerate() {
        dual[v] = lp.dual[k].clone();
    }
    Ok(ColoringSolution {
        value: lp.value,
        terms,
        dual,
    })
}

/// Rate-region membership: e(r) lies in the stable set polytope iff the
/// fractional weighted coloring value is at most 1.
pub fn in_rate_region(pattern: &TrafficPattern, rates: &RateVector) -> Result<bool> {
    Ok(min_speedup(pattern, rates)?.chi_f <= Rational::one())
}

/// The fractional weighted chromatic number of the enhanced conflict graph
/// at weights e(r): the minimum speedup making `rates` achievable.
pub fn min_speedup(pattern: &TrafficPattern, rates: &RateVector) -> Result<SpeedupReport> {
    let e = pattern.enhanced_rate_vector(rates)?;
    let graph = build_enhanced_conflict_graph(pattern);
    let coloring = fractional_weighted_coloring(&graph, &e.0)?;
    Ok(SpeedupReport {
        chi_f: coloring.value,
        admissible: pattern.is_admissible(rates)?,
    })
}

/// Line-load constraint rows over flow-rate space (inputs then outputs;
/// ports with no flows are skipped).
fn admissible_constraints(pattern: &TrafficPattern) -> (Vec<Vec<Rational>>, Vec<Rational>) {
    let f = pattern.num_flows();
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    for i in 0..pattern.num_inputs {
        let mut row = vec![Rational::zero(); f];
        let mut any = false;
        for (k, flow) in pattern.flows.iter().enumerate() {
            if flow.input == i {
                row[k] = Rational::one();
                any = true;
            }
        }
        if any {
            rows.push(row);
        }
    }
    for j in 0..pattern.num_outputs {
        let mut row = vec![Rational::zero(); f];
        let mut any = false;
        for (k, flow) in pattern.flows.iter().enumerate() {
            if flow.fanout.contains(&j) {
                row[k] = Rational::one();
                any = true;
            }
        }
        if any {
            rows.push(row);
        }
    }
    let b = vec![Rational::one(); rows.len()];
    (rows, b)
}

/// Worst-case minimum speedup over the whole admissible region: the maximum
/// of the coloring value over the vertices of {r ≥ 0, line loads ≤ 1}. The
/// LP value is convex in the weights, so the maximum over the polytope is
/// attained at a vertex.
pub fn min_speedup_for_admissible(pattern: &TrafficPattern) -> Result<Rational> {
    let (a, b) = admissible_constraints(pattern);
    let vertices = enumerate_vertices(&a, &b, &DdCaps::default())?;
    let graph = build_enhanced_conflict_graph(pattern);
    let mut best = Rational::zero();
    for v in vertices {
        let rates = RateVector(v);
        let e = pattern.enhanced_rate_vector(&rates)?;
        let value = fractional_weighted_coloring(&graph, &e.0)?.value;
        if value > best {
            best = value;
        }
    }
    Ok(best)
}

/// Evaluates the 2xN no-coding inequalities. Returns whether the point
/// needs no speedup, and the smallest scale factor making it feasible:
/// the largest of Σ r_i, max_i (r0 + r_i), and (2 r0 + Σ r_i)/2.
pub fn uncoded_2xn_check(
    n: usize,
    broadcast_rate: &Rational,
    unicast_rates: &[Rational],
) -> Result<(bool, Rational)> {
    if n == 0 || unicast_rates.len() != n {
        return Err(Error::Dimension(format!(
            "{} unicast rates for N = {n}",
            unicast_rates.len()
        )));
    }
    if broadcast_rate.is_negative() || unicast_rates.iter().any(|r| r.is_negative()) {
        return Err(Error::Validation("negative rate".into()));
    }
    let sum: Rational = unicast_rates.iter().cloned().sum();
    let mut scale = sum.clone();
    for r in unicast_rates {
        let s = broadcast_rate + r;
        if s > scale {
            scale = s;
        }
    }
    let s4 = (broadcast_rate * Rational::from_integer(2.into()) + &sum)
        / Rational::from_integer(2.into());
    if s4 > scale {
        scale = s4;
    }
    Ok((scale <= Rational::one(), scale))
}

/// A periodic frame schedule realizing `rates` exactly.
#[derive(Debug, Clone)]
pub struct ScheduleFrame {
    pub frame_length: usize,
    /// Active sub-flow set per slot, already trimmed so that each sub-flow
    /// appears in exactly rate·F slots.
    pub slots: Vec<StableSet>,
    /// The coloring decomposition the frame was built from.
    pub terms: Vec<(StableSet, Rational)>,
    /// Slots in which at least one sub-flow of the flow is served.
    pub per_flow_slots: Vec<usize>,
    /// Service slots per sub-flow (canonical order); equals rate·F.
    pub per_subflow_slots: Vec<usize>,
}

const FRAME_CAP: usize = 1_000_000;

pub(crate) fn rational_times_usize(r: &Rational, f: usize) -> Result<usize> {
    use num::ToPrimitive;
    let exact = r * Rational::from_integer(f.into());
    if !exact.is_integer() {
        return Err(Error::Contract(format!(
            "{} x {f} is not an integer",
            ratio_string(r)
        )));
    }
    exact
        .to_integer()
        .to_usize()
        .ok_or_else(|| Error::SizeCap("frame slot count overflows".into()))
}

/// Builds the offline frame: F is the least common denominator of the
/// coloring multipliers and the flow rates, stable sets occupy contiguous
/// blocks in decomposition order, and per-sub-flow service beyond rate·F
/// is trimmed from the latest slots.
pub fn build_offline_schedule(
    pattern: &TrafficPattern,
    rates: &RateVector,
) -> Result<ScheduleFrame> {
    let e = pattern.enhanced_rate_vector(rates)?;
    let graph = build_enhanced_conflict_graph(pattern);
    let coloring = fractional_weighted_coloring(&graph, &e.0)?;
    if coloring.value > Rational::one() {
        return Err(Error::OutOfRegion(coloring.value));
    }

    let mut f_big = num::BigInt::one();
    for (_, l) in &coloring.terms {
        f_big = num::Integer::lcm(&f_big, l.denom());
    }
    for r in &rates.0 {
        f_big = num::Integer::lcm(&f_big, r.denom());
    }
    use num::ToPrimitive;
    let f = f_big
        .to_usize()
        .filter(|&f| f <= FRAME_CAP)
        .ok_or_else(|| Error::SizeCap(format!("frame length exceeds {FRAME_CAP}")))?;

    let n = pattern.num_subflows();
    let mut remaining: Vec<usize> =
        e.0.iter()
            .map(|r| rational_times_usize(r, f))
            .collect::<Result<_>>()?;
    let mut slots: Vec<StableSet> = Vec::with_capacity(f);
    for (set, l) in &coloring.terms {
        let block = rational_times_usize(l, f)?;
        for _ in 0..block {
            let active: Vec<usize> = set
                .vertices
                .iter()
                .copied()
                .filter(|&v| {
                    if remaining[v] > 0 {
                        remaining[v] -= 1;
                        true
                    } else {
                        false
                    }
                })
                .collect();
            slots.push(StableSet::new(active));
        }
    }
    if slots.len() > f {
        return Err(Error::Contract(
            "decomposition longer than the frame".into(),
        ));
    }
    slots.resize(f, StableSet::new(vec![]));
    if remaining.iter().any(|&r| r > 0) {
        return Err(Error::Contract("coloring under-serves a sub-flow".into()));
    }

    let mut per_subflow = vec![0usize; n];
    let mut per_flow = vec![0usize; pattern.num_flows()];
    for slot in &slots {
        let mut flows_hit: Vec<usize> = Vec::new();
        for &v in &slot.vertices {
            per_subflow[v] += 1;
            let fl = pattern.subflows()[v].flow;
            if !flows_hit.contains(&fl) {
                flows_hit.push(fl);
            }
        }
        for fl in flows_hit {
            per_flow[fl] += 1;
        }
    }
    Ok(ScheduleFrame {
        frame_length: f,
        slots,
        terms: coloring.terms,
        per_flow_slots: per_flow,
        per_subflow_slots: per_subflow,
    })
}

impl ScheduleFrame {
    /// {"frame_length": F, "slots": [[subflow...]...],
    ///  "lambda": [["p/q", [subflow...]]...]}
    pub fn to_json_string(&self) -> String {
        let slots: Vec<Vec<usize>> = self.slots.iter().map(|s| s.vertices.clone()).collect();
        let lambda: Vec<(String, Vec<usize>)> = self
            .terms
            .iter()
            .map(|(s, l)| (ratio_string(l), s.vertices.clone()))
            .collect();
        let mut map = BTreeMap::new();
        map.insert(
            "frame_length".to_string(),
            serde_json::to_value(self.frame_length).unwrap(),
        );
        map.insert("slots".to_string(), serde_json::to_value(slots).unwrap());
        map.insert("lambda".to_string(), serde_json::to_value(lambda).unwrap());
        serde_json::to_string_pretty(&map).unwrap()
    }
}
