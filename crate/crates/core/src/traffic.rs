//! Traffic patterns: multicast flows, their sub-flows, and rate vectors.
//!
//! A flow is (input, fanout set); serving it once delivers one packet to
//! every output in the fanout. Each (flow, output) pair is a sub-flow, and
//! all per-sub-flow quantities in the crate (enhanced rates, conflict graph
//! vertices, backlogs) use the canonical sub-flow order: flows in pattern
//! order, then fanout outputs in ascending order within each flow.

use num::{One, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::ratio::{parse_rational, rat, ratio_string, Rational};
use crate::{Error, Result};

/// One multicast flow. Ports are 0-indexed internally; the JSON schema and
/// user-facing text are 1-indexed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub input: usize,
    /// Fanout outputs, strictly ascending, nonempty.
    pub fanout: Vec<usize>,
    /// Nominal arrival rate in packets per slot.
    pub rate: Rational,
}

/// One (flow, output) pair in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubFlow {
    /// Index of the parent flow in the pattern.
    pub flow: usize,
    pub input: usize,
    pub fanout: Vec<usize>,
    pub output: usize,
}

impl fmt::Display for SubFlow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fan: Vec<String> = self.fanout.iter().map(|j| (j + 1).to_string()).collect();
        write!(
            f,
            "({}, {{{}}}, {})",
            self.input + 1,
            fan.join(","),
            self.output + 1
        )
    }
}

/// Per-flow rates, in pattern flow order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateVector(pub Vec<Rational>);

impl RateVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, factor: &Rational) -> RateVector {
        RateVector(self.0.iter().map(|r| r * factor).collect())
    }
}

/// Per-sub-flow rates in canonical order: each sub-flow inherits its parent
/// flow's rate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnhancedRateVector(pub Vec<Rational>);

/// Per-port line loads induced by a rate vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineLoads {
    pub input: Vec<Rational>,
    pub output: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficPattern {
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub flows: Vec<Flow>,
    subflows: Vec<SubFlow>,
}

impl TrafficPattern {
    pub fn new(num_inputs: usize, num_outputs: usize, mut flows: Vec<Flow>) -> Result<Self> {
        if num_inputs == 0 || num_outputs == 0 {
            return Err(Error::Validation(
                "switch must have at least one input and one output".into(),
            ));
        }
        for flow in &mut flows {
            flow.fanout.sort_unstable();
            flow.fanout.dedup();
            if flow.fanout.is_empty() {
                return Err(Error::Validation(format!(
                    "flow at input {} has empty fanout",
                    flow.input + 1
                )));
            }
            if flow.input >= num_inputs {
                return Err(Error::Validation(format!(
                    "flow input {} out of range for {} inputs",
                    flow.input + 1,
                    num_inputs
                )));
            }
            if let Some(&j) = flow.fanout.iter().find(|&&j| j >= num_outputs) {
                return Err(Error::Validation(format!(
                    "fanout output {} out of range for {} outputs",
                    j + 1,
                    num_outputs
                )));
            }
            if flow.rate < Rational::zero() {
                return Err(Error::Validation(format!(
                    "flow ({}, {:?}) has negative rate",
                    flow.input + 1,
                    flow.fanout
                )));
            }
        }
        for a in 0..flows.len() {
            for b in a + 1..flows.len() {
                if flows[a].input == flows[b].input && flows[a].fanout == flows[b].fanout {
                    return Err(Error::Validation(format!(
                        "duplicate flow (input {}, fanout {:?})",
                        flows[a].input + 1,
                        flows[a].fanout
                    )));
                }
            }
        }
        let mut subflows = Vec::new();
        for (fi, flow) in flows.iter().enumerate() {
            for &j in &flow.fanout {
                subflows.push(SubFlow {
                    flow: fi,
                    input: flow.input,
                    fanout: flow.fanout.clone(),
                    output: j,
                });
            }
        }
        Ok(TrafficPattern {
            num_inputs,
            num_outputs,
            flows,
            subflows,
        })
    }

    /// Sub-flows in canonical order (flow order, then ascending output).
    pub fn subflows(&self) -> &[SubFlow] {
        &self.subflows
    }

    pub fn num_flows(&self) -> usize {
        self.flows.len()
    }

    pub fn num_subflows(&self) -> usize {
        self.subflows.len()
    }

    /// Nominal rates carried on the flows themselves.
    pub fn rates(&self) -> RateVector {
        RateVector(self.flows.iter().map(|f| f.rate.clone()).collect())
    }

    /// Position of flow `fi`'s sub-flow toward `output` in canonical order.
    pub fn subflow_index(&self, fi: usize, output: usize) -> Option<usize> {
        self.subflows
            .iter()
            .position(|s| s.flow == fi && s.output == output)
    }

    /// Expands per-flow rates to per-sub-flow rates (each sub-flow inherits
    /// its parent's rate).
    pub fn enhanced_rate_vector(&self, rates: &RateVector) -> Result<EnhancedRateVector> {
        if rates.len() != self.flows.len() {
            return Err(Error::Dimension(format!(
                "{} rates for {} flows",
                rates.len(),
                self.flows.len()
            )));
        }
        Ok(EnhancedRateVector(
            self.subflows
                .iter()
                .map(|s| rates.0[s.flow].clone())
                .collect(),
        ))
    }

    /// Line loads per port and the admissibility verdict (all loads <= 1).
    pub fn line_loads(&self, rates: &RateVector) -> Result<LineLoads> {
        if rates.len() != self.flows.len() {
            return Err(Error::Dimension(format!(
                "{} rates for {} flows",
                rates.len(),
                self.flows.len()
            )));
        }
        let mut input = vec![Rational::zero(); self.num_inputs];
        let mut output = vec![Rational::zero(); self.num_outputs];
        for (flow, r) in self.flows.iter().zip(&rates.0) {
            input[flow.input] += r;
            for &j in &flow.fanout {
                output[j] += r;
            }
        }
        Ok(LineLoads { input, output })
    }

    pub fn is_admissible(&self, rates: &RateVector) -> Result<bool> {
        let loads = self.line_loads(rates)?;
        let one = Rational::one();
        Ok(loads
            .input
            .iter()
            .chain(loads.output.iter())
            .all(|l| *l <= one))
    }

    pub fn to_json_string(&self, rates: &RateVector) -> Result<String> {
        if rates.len() != self.flows.len() {
            return Err(Error::Dimension(format!(
                "{} rates for {} flows",
                rates.len(),
                self.flows.len()
            )));
        }
        let file = PatternFile {
            inputs: self.num_inputs,
            outputs: self.num_outputs,
            flows: self
                .flows
                .iter()
                .zip(&rates.0)
                .map(|(f, r)| FlowFile {
                    input: f.input + 1,
                    fanout: f.fanout.iter().map(|j| j + 1).collect(),
                    rate: ratio_string(r),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parses the JSON pattern schema (1-indexed ports, rates as strings).
    pub fn from_json_str(text: &str) -> Result<(TrafficPattern, RateVector)> {
        let file: PatternFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut flows = Vec::with_capacity(file.flows.len());
        let mut rates = Vec::with_capacity(file.flows.len());
        for f in &file.flows {
            if f.input == 0 {
                return Err(Error::Parse("port indices in JSON are 1-based".into()));
            }
            if f.fanout.contains(&0) {
                return Err(Error::Parse("port indices in JSON are 1-based".into()));
            }
            flows.push(Flow {
                input: f.input - 1,
                fanout: f.fanout.iter().map(|j| j - 1).collect(),
                rate: parse_rational(&f.rate)?,
            });
            rates.push(parse_rational(&f.rate)?);
        }
        let pattern = TrafficPattern::new(file.inputs, file.outputs, flows)?;
        Ok((pattern, RateVector(rates)))
    }
}

#[derive(Serialize, Deserialize)]
struct PatternFile {
    inputs: usize,
    outputs: usize,
    flows: Vec<FlowFile>,
}

#[derive(Serialize, Deserialize)]
struct FlowFile {
    input: usize,
    fanout: Vec<usize>,
    rate: String,
}

/// 2x3 pattern with a broadcast at rate 2/3 on input 1 and unicasts at rate
/// 1/3 from input 2 to each output.
pub fn pattern_fig1() -> TrafficPattern {
    TrafficPattern::new(
        2,
        3,
        vec![
            Flow {
                input: 0,
                fanout: vec![0, 1, 2],
                rate: rat(2, 3),
            },
            Flow {
                input: 1,
                fanout: vec![0],
                rate: rat(1, 3),
            },
            Flow {
                input: 1,
                fanout: vec![1],
                rate: rat(1, 3),
            },
            Flow {
                input: 1,
                fanout: vec![2],
                rate: rat(1, 3),
            },
        ],
    )
    .expect("builtin pattern")
}

/// 2xN pattern: one broadcast from input 1 at `broadcast_rate`, one unicast
/// from input 2 to each output with the given per-output rates.
pub fn pattern_2xn(
    n: usize,
    broadcast_rate: Rational,
    unicast_rates: &[Rational],
) -> Result<TrafficPattern> {
    if n == 0 {
        return Err(Error::Validation("2xN pattern needs N >= 1".into()));
    }
    if unicast_rates.len() != n {
        return Err(Error::Dimension(format!(
            "{} unicast rates for N = {}",
            unicast_rates.len(),
            n
        )));
    }
    let mut flows = vec![Flow {
        input: 0,
        fanout: (0..n).collect(),
        rate: broadcast_rate,
    }];
    for (j, r) in unicast_rates.iter().enumerate() {
        flows.push(Flow {
            input: 1,
            fanout: vec![j],
            rate: r.clone(),
        });
    }
    TrafficPattern::new(2, n, flows)
}

/// The 2xN vertex with broadcast rate 1 - 1/N and unicast rates 1/N; every
/// output line is loaded to exactly 1.
pub fn pattern_2xn_vertex(n: usize) -> Result<TrafficPattern> {
    let r0 = Rational::one() - rat(1, n as i64);
    let unicast = vec![rat(1, n as i64); n];
    pattern_2xn(n, r0, &unicast)
}

/// 4x3 simulation pattern: a broadcast at 4α/9 on input 1, light unicasts at
/// α/100 from inputs 1, 3, 4 to outputs 1, 2, 3, and a heavier unicast at
/// (2/9 + 1/100)α from input 2 to output 1.
pub fn pattern_4x3_sim(alpha: &Rational) -> Result<TrafficPattern> {
    TrafficPattern::new(
        4,
        3,
        vec![
            Flow {
                input: 0,
                fanout: vec![0, 1, 2],
                rate: rat(4, 9) * alpha,
            },
            Flow {
                input: 0,
                fanout: vec![0],
                rate: rat(1, 100) * alpha,
            },
            Flow {
                input: 1,
                fanout: vec![0],
                rate: (rat(2, 9) + rat(1, 100)) * alpha,
            },
            Flow {
                input: 2,
                fanout: vec![1],
                rate: rat(1, 100) * alpha,
            },
            Flow {
                input: 3,
                fanout: vec![2],
                rate: rat(1, 100) * alpha,
            },
        ],
    )
}

/// Every possible flow on an MxN switch (each input paired with every
/// nonempty fanout set), all at rate zero. Useful for whole-region analysis.
pub fn pattern_all_flows(m: usize, n: usize) -> Result<TrafficPattern> {
    if n >= usize::BITS as usize {
        return Err(Error::SizeCap(format!(
            "{n} outputs is too many fanout sets"
        )));
    }
    let mut flows = Vec::new();
    for input in 0..m {
        for mask in 1usize..(1 << n) {
            let fanout: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
            flows.push(Flow {
                input,
                fanout,
                rate: Rational::zero(),
            });
        }
    }
    TrafficPattern::new(m, n, flows)
}
