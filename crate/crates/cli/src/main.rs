//! Command-line front end: pattern analysis, frame-schedule synthesis,
//! simulation runs and sweeps, and the 2xN closed-form region report.
//!
//! Exit codes: 0 ok, 2 parse error, 3 size cap, 4 out of region,
//! 5 decode failure. All analytical output is exact ("p/q" strings);
//! floats appear only in simulation statistics.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num::{One, Zero};
use serde_json::json;

use codedxbar::conflict::build_enhanced_conflict_graph;
use codedxbar::ratio::{parse_rational, rat_int, ratio_string, Rational};
use codedxbar::region::{build_offline_schedule, min_speedup, uncoded_2xn_check, ScheduleFrame};
use codedxbar::sim::{self, csv_row, seed_from_env, Policy, SimConfig, CSV_HEADER};
use codedxbar::traffic::{
    pattern_2xn, pattern_2xn_vertex, pattern_4x3_sim, pattern_fig1, Flow, RateVector,
    TrafficPattern,
};
use codedxbar::{Error, Result};

#[derive(Parser)]
#[command(
    name = "codedxbar",
    about = "Multicast crossbar scheduling with intra-flow network coding",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conflict-graph and rate-region report for a pattern (JSON).
    Analyze(AnalyzeArgs),
    /// Synthesize the offline frame schedule for a pattern.
    Schedule(ScheduleArgs),
    /// Run one simulation and print a CSV row.
    Simulate(SimulateArgs),
    /// Run a grid of simulations over scale factors and policies.
    Sweep(SweepArgs),
    /// Closed-form 2xN no-coding region report.
    Region(RegionArgs),
}

#[derive(Args)]
struct PatternArgs {
    /// Pattern source: a JSON file path or a builtin name
    /// (fig1 | 2xN, e.g. 2x4 | sim4x3).
    #[arg(long)]
    pattern: String,
    /// Override flow rates: inline "p/q,p/q,..." in flow order, or a path
    /// to a JSON array of rate strings.
    #[arg(long)]
    rates: Option<String>,
    /// Scale every flow rate by this exact factor.
    #[arg(long, default_value = "1")]
    alpha: String,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    pattern: PatternArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[command(flatten)]
    pattern: PatternArgs,
    /// Print only the frame JSON, without the slot table.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    pattern: PatternArgs,
    #[arg(long, default_value = "mwss-rand")]
    policy: String,
    #[arg(long, default_value_t = 10_000)]
    slots: usize,
    #[arg(long, default_value_t = 0xC0DE)]
    seed: u64,
    /// Frame length; selects the finite-horizon scheme for coded policies.
    #[arg(long)]
    delta: Option<usize>,
    /// Batch stretch for the finite-horizon scheme.
    #[arg(long, default_value = "1/200")]
    epsilon: String,
    #[arg(long, default_value_t = 256, value_parser = parse_field)]
    field: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    pattern: PatternArgs,
    /// Comma-separated policy names.
    #[arg(long, default_value = "mwss-rand,uncoded-rand")]
    policies: String,
    /// Scale grid "start:stop:step" in exact rationals, stop inclusive.
    #[arg(long)]
    alphas: String,
    #[arg(long, default_value_t = 10_000)]
    slots: usize,
    #[arg(long, default_value_t = 0xC0DE)]
    seed: u64,
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long, default_value = "1/200")]
    epsilon: String,
    #[arg(long, default_value_t = 256, value_parser = parse_field)]
    field: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegionArgs {
    /// Number of outputs N of the 2xN switch.
    n: usize,
    /// Broadcast rate followed by the N unicast rates.
    #[arg(num_args = 1..)]
    rates: Vec<String>,
    #[arg(long)]
    json: bool,
}

fn parse_field(s: &str) -> std::result::Result<usize, String> {
    match s {
        "2" => Ok(2),
        "16" => Ok(16),
        "256" => Ok(256),
        _ => Err("field order must be 2, 16, or 256".to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Parse(_) => 2,
                Error::SizeCap(_) => 3,
                Error::OutOfRegion(_) => 4,
                Error::Coding(_) => 5,
                _ => 1,
            })
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Schedule(args) => cmd_schedule(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Region(args) => cmd_region(args),
    }
}

/// Resolves the pattern source and returns it with the effective per-flow
/// rates (overrides applied, then scaled by alpha).
fn load_pattern(args: &PatternArgs) -> Result<(TrafficPattern, RateVector)> {
    let pattern = match args.pattern.as_str() {
        "fig1" => pattern_fig1(),
        "sim4x3" => pattern_4x3_sim(&rat_int(1))?,
        name => {
            if let Some(n) = name
                .strip_prefix("2x")
                .and_then(|tail| tail.parse::<usize>().ok())
            {
                pattern_2xn_vertex(n)?
            } else {
                let text = fs::read_to_string(name)
                    .map_err(|e| Error::Parse(format!("cannot read {name}: {e}")))?;
                TrafficPattern::from_json_str(&text)?.0
            }
        }
    };
    let mut rates = match &args.rates {
        Some(src) => parse_rates(src, pattern.num_flows())?,
        None => pattern.rates(),
    };
    let alpha = parse_rational(&args.alpha)?;
    if !alpha.is_one() {
        rates = rates.scaled(&alpha);
    }
    // bake the effective rates back into the pattern so downstream
    // consumers (simulator configs, schedules) see one source of truth
    let flows = pattern
        .flows
        .iter()
        .zip(&rates.0)
        .map(|(f, r)| Flow {
            input: f.input,
            fanout: f.fanout.clone(),
            rate: r.clone(),
        })
        .collect();
    let pattern = TrafficPattern::new(pattern.num_inputs, pattern.num_outputs, flows)?;
    Ok((pattern, rates))
}

fn parse_rates(src: &str, num_flows: usize) -> Result<RateVector> {
    let inline: std::result::Result<Vec<Rational>, Error> =
        src.split(',').map(parse_rational).collect();
    let rates = match inline {
        Ok(list) => list,
        Err(_) => {
            let text = fs::read_to_string(src).map_err(|_| {
                Error::Parse(format!(
                    "--rates {src:?} is neither an inline rational list nor a readable file"
                ))
            })?;
            let strings: Vec<String> =
                serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            strings
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Result<Vec<_>>>()?
        }
    };
    if rates.len() != num_flows {
        return Err(Error::Dimension(format!(
            "{} rates for {} flows",
            rates.len(),
            num_flows
        )));
    }
    Ok(RateVector(rates))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<ExitCode> {
    let (pattern, rates) = load_pattern(&args.pattern)?;
    let graph = build_enhanced_conflict_graph(&pattern);
    let stable_sets = graph.maximal_stable_sets()?;
    let cliques = graph.maximal_cliques()?;
    let loads = pattern.line_loads(&rates)?;
    let admissible = pattern.is_admissible(&rates)?;
    let (split, _) = graph.is_split_graph();
    let perfect = graph.is_perfect()?;
    let report = min_speedup(&pattern, &rates)?;
    let speedup = if report.chi_f > Rational::one() {
        report.chi_f.clone()
    } else {
        Rational::one()
    };
    let frac = |r: &Rational| ratio_string(r);
    let doc = json!({
        "pattern": {
            "inputs": pattern.num_inputs,
            "outputs": pattern.num_outputs,
            "flows": pattern.num_flows(),
            "subflows": pattern.num_subflows(),
        },
        "graph": {
            "vertices": pattern.subflows().iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "edges": graph.edge_list().iter().map(|&(u, v)| vec![u, v]).collect::<Vec<_>>(),
            "maximal_stable_sets": stable_sets.len(),
            "maximal_cliques": cliques.len(),
        },
        "admissible": admissible,
        "loads": {
            "inputs": loads.input.iter().map(frac).collect::<Vec<_>>(),
            "outputs": loads.output.iter().map(frac).collect::<Vec<_>>(),
        },
        "split": split,
        "perfect": perfect,
        "chi_f": frac(&report.chi_f),
        "in_region": report.chi_f <= Rational::one(),
        "min_speedup": frac(&speedup),
    });
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    emit(&args.out, &text)?;
    Ok(ExitCode::SUCCESS)
}

/// Renders the per-slot table: one column per input showing the flow served
/// and the outputs reached, mirroring the frame tables in the literature.
fn slot_table(pattern: &TrafficPattern, frame: &ScheduleFrame) -> String {
    let subs = pattern.subflows();
    let mut lines = Vec::new();
    let header: Vec<String> = std::iter::once("slot".to_string())
        .chain((0..pattern.num_inputs).map(|i| format!("input {}", i + 1)))
        .chain(std::iter::once("outputs".to_string()))
        .collect();
    lines.push(header);
    for (t, set) in frame.slots.iter().enumerate() {
        let mut per_input: Vec<Vec<(usize, usize)>> = vec![Vec::new(); pattern.num_inputs];
        let mut outs: Vec<usize> = Vec::new();
        for &v in &set.vertices {
            per_input[subs[v].input].push((subs[v].flow, subs[v].output));
            outs.push(subs[v].output + 1);
        }
        outs.sort_unstable();
        let mut row = vec![format!("{}", t + 1)];
        for cell in &per_input {
            if cell.is_empty() {
                row.push("-".to_string());
            } else {
                let flow = cell[0].0;
                let outputs: Vec<String> = cell.iter().map(|&(_, j)| (j + 1).to_string()).collect();
                row.push(format!("flow {} -> {{{}}}", flow + 1, outputs.join(",")));
            }
        }
        row.push(
            outs.iter()
                .map(|j| j.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        lines.push(row);
    }
    let cols = lines[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| lines.iter().map(|row| row[c].len()).max().unwrap())
        .collect();
    let mut text = String::new();
    for row in &lines {
        let mut rendered: Vec<String> = Vec::new();
        for (c, cell) in row.iter().enumerate() {
            rendered.push(format!("{cell:<width$}", width = widths[c]));
        }
        text.push_str(rendered.join("  ").trim_end());
        text.push('\n');
    }
    text
}

fn cmd_schedule(args: ScheduleArgs) -> Result<ExitCode> {
    let (pattern, rates) = load_pattern(&args.pattern)?;
    let frame = build_offline_schedule(&pattern, &rates)?;
    let mut text = frame.to_json_string();
    text.push('\n');
    if !args.json {
        text.push('\n');
        text.push_str(&slot_table(&pattern, &frame));
    }
    emit(&args.out, &text)?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn sim_config(
    pattern: TrafficPattern,
    alpha: &str,
    policy: Policy,
    slots: usize,
    seed: u64,
    delta: Option<usize>,
    epsilon: &str,
    field: usize,
) -> Result<SimConfig> {
    let mut cfg = SimConfig::new(pattern);
    cfg.alpha = parse_rational(alpha)?;
    cfg.policy = policy;
    cfg.horizon = slots;
    cfg.seed = seed_from_env(seed)?;
    cfg.delta = delta;
    cfg.epsilon = parse_rational(epsilon)?;
    cfg.field_order = field;
    Ok(cfg)
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    // alpha is handled by the simulator config, not baked into the pattern
    let base = PatternArgs {
        alpha: "1".to_string(),
        ..clone_pattern_args(&args.pattern)
    };
    let (pattern, _) = load_pattern(&base)?;
    let policy = Policy::parse(&args.policy)?;
    let cfg = sim_config(
        pattern,
        &args.pattern.alpha,
        policy,
        args.slots,
        args.seed,
        args.delta,
        &args.epsilon,
        args.field,
    )?;
    let metrics = sim::run(&cfg)?;
    let text = format!(
        "{CSV_HEADER}\n{}\n",
        csv_row(&cfg.alpha, cfg.policy, cfg.seed, &metrics)
    );
    emit(&args.out, &text)?;
    if metrics.decode_failures > 0 {
        eprintln!("error: {} decode failures", metrics.decode_failures);
        return Ok(ExitCode::from(5));
    }
    Ok(ExitCode::SUCCESS)
}

fn clone_pattern_args(args: &PatternArgs) -> PatternArgs {
    PatternArgs {
        pattern: args.pattern.clone(),
        rates: args.rates.clone(),
        alpha: args.alpha.clone(),
    }
}

fn parse_alpha_grid(grid: &str) -> Result<Vec<Rational>> {
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!(
            "--alphas {grid:?} is not start:stop:step"
        )));
    }
    let start = parse_rational(parts[0])?;
    let stop = parse_rational(parts[1])?;
    let step = parse_rational(parts[2])?;
    if step <= Rational::zero() || stop < start {
        return Err(Error::Validation(
            "alpha grid needs step > 0 and stop >= start".into(),
        ));
    }
    let mut grid = Vec::new();
    let mut cur = start;
    while cur <= stop {
        grid.push(cur.clone());
        cur += &step;
    }
    Ok(grid)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let base_args = PatternArgs {
        alpha: "1".to_string(),
        ..clone_pattern_args(&args.pattern)
    };
    let (pattern, _) = load_pattern(&base_args)?;
    let policies = args
        .policies
        .split(',')
        .map(Policy::parse)
        .collect::<Result<Vec<_>>>()?;
    let alphas = parse_alpha_grid(&args.alphas)?;
    let base = sim_config(
        pattern,
        &args.pattern.alpha,
        Policy::MwssRand,
        args.slots,
        args.seed,
        args.delta,
        &args.epsilon,
        args.field,
    )?;
    if !base.alpha.is_one() {
        return Err(Error::Validation(
            "sweep scales via --alphas; --alpha must stay 1".into(),
        ));
    }
    let outcome = sim::sweep(&base, &alphas, &policies)?;
    emit(&args.out, &outcome.csv)?;
    let failures: u64 = outcome.rows.iter().map(|r| r.metrics.decode_failures).sum();
    if failures > 0 {
        eprintln!("error: {failures} decode failures across the sweep");
        return Ok(ExitCode::from(5));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_region(args: RegionArgs) -> Result<ExitCode> {
    if args.rates.len() != args.n + 1 {
        return Err(Error::Dimension(format!(
            "expected 1 broadcast + {} unicast rates, got {}",
            args.n,
            args.rates.len()
        )));
    }
    let rates = args
        .rates
        .iter()
        .map(|s| parse_rational(s))
        .collect::<Result<Vec<_>>>()?;
    let (r0, unicast) = (rates[0].clone(), rates[1..].to_vec());
    let (feasible, min_scale) = uncoded_2xn_check(args.n, &r0, &unicast)?;
    let pattern = pattern_2xn(args.n, r0.clone(), &unicast)?;
    let report = min_speedup(&pattern, &pattern.rates())?;
    let speedup = if report.chi_f > Rational::one() {
        report.chi_f.clone()
    } else {
        Rational::one()
    };
    let one = Rational::one();
    let two = rat_int(2);
    let sum: Rational = unicast.iter().cloned().sum();
    let lhs4 = &r0 * &two + &sum;
    let mut ineqs: Vec<(String, Rational, Rational)> = vec![
        ("input 1: r0".to_string(), r0.clone(), one.clone()),
        ("input 2: sum r_j".to_string(), sum, one.clone()),
    ];
    for (j, r) in unicast.iter().enumerate() {
        ineqs.push((
            format!("output {}: r0 + r_{}", j + 1, j + 1),
            &r0 + r,
            one.clone(),
        ));
    }
    ineqs.push(("no coding: 2 r0 + sum r_j".to_string(), lhs4, two));
    if args.json {
        let doc = json!({
            "n": args.n,
            "inequalities": ineqs.iter().map(|(name, lhs, rhs)| json!({
                "name": name,
                "lhs": ratio_string(lhs),
                "rhs": ratio_string(rhs),
                "holds": lhs <= rhs,
            })).collect::<Vec<_>>(),
            "uncoded_feasible": feasible,
            "uncoded_min_scale": ratio_string(&min_scale),
            "coded_speedup": ratio_string(&speedup),
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?
        );
    } else {
        println!("2x{} no-coding region report", args.n);
        for (name, lhs, rhs) in &ineqs {
            let verdict = if lhs <= rhs { "holds" } else { "violated" };
            println!(
                "  {} = {} {} {} : {}",
                name,
                ratio_string(lhs),
                if lhs <= rhs { "<=" } else { ">" },
                ratio_string(rhs),
                verdict
            );
        }
        println!(
            "  uncoded feasible: {feasible}, min_scale = {}",
            ratio_string(&min_scale)
        );
        println!("  coded speedup (chi_f) = {}", ratio_string(&speedup));
    }
    Ok(ExitCode::SUCCESS)
}
