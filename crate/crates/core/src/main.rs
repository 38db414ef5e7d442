//! Experiment driver: single simulations, parameter sweeps, oracle
//! validation, trace generation, and WCET profiling.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use anysched::{
    manifest_json, profile_wcet, rows_to_csv, run_aligned_suite, run_bound_suite, run_experiment,
    run_incremental_suite, run_workload, synth_library, ArrivalMode, CostMode, CostModel, DropMode,
    Error, ExperimentPlan, Policy, QuantConfig, Result, SimConfig, SimReport, SweepAxis, SynthParams,
    TraceLibrary, WcetMethod, Workload, WorkloadSpec,
};

#[derive(Parser)]
#[command(name = "anysched", version, about = "Depth planning and simulation for anytime inference under deadlines")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one simulation and report summary metrics (optionally a per-job CSV).
    Simulate(RunArgs),
    /// Sweep one axis across policies and write a CSV + JSON manifest.
    Sweep(SweepArgs),
    /// Cross-check the planner against the exact oracle on random instances.
    Validate(ValidateArgs),
    /// Generate a synthetic trace library.
    GenTrace(GenTraceArgs),
    /// Estimate per-stage WCETs from a timing-samples file.
    Profile(ProfileArgs),
}

/// Knobs shared by `simulate` and `sweep`. Every option is also accepted as a
/// `key = value` line in `--config`; explicit flags win.
#[derive(Args, Debug, Default, Clone)]
struct RunArgs {
    /// Scheduling policy.
    #[arg(long)]
    policy: Option<String>,
    /// Concurrent clients (closed loop).
    #[arg(long)]
    k: Option<usize>,
    /// Minimum relative deadline, seconds.
    #[arg(long)]
    dl: Option<f64>,
    /// Maximum relative deadline, seconds.
    #[arg(long)]
    du: Option<f64>,
    /// Fixed reward quantum; mutually exclusive with --epsilon.
    #[arg(long)]
    delta: Option<f64>,
    /// Approximation parameter; quantum becomes eps·R/N per planning instant.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Trace library path; omitted → a default synthetic library from --seed.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Total requests to simulate.
    #[arg(long)]
    count: Option<u64>,
    /// allow | mandatory.
    #[arg(long = "drop-mode")]
    drop_mode: Option<String>,
    /// off | model | measured.
    #[arg(long)]
    cost: Option<String>,
    /// Depth-1 reward before anything runs; default 1/num_classes.
    #[arg(long)]
    prior: Option<f64>,
    /// CPU-side constant subtracted in the deadline adjustment, seconds.
    #[arg(long = "cpu-overhead")]
    cpu_overhead: Option<f64>,
    /// closed-loop | poisson:<rate>.
    #[arg(long)]
    arrivals: Option<String>,
    /// Per-job outcome CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key = value defaults file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// k | du | dl | delta.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values.
    #[arg(long)]
    values: String,
    /// Comma-separated policies to compare.
    #[arg(long, default_value = "planner-exp,edf,lcf,rr")]
    policies: String,
    /// Replications per (value, policy) cell.
    #[arg(long)]
    reps: Option<u64>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Random instances for the bound and aligned suites.
    #[arg(long, default_value_t = 1000)]
    instances: u64,
    /// Arrival sequences for the incremental-table suite.
    #[arg(long, default_value_t = 200)]
    sequences: u64,
    /// Comma-separated ε values for the bound suite.
    #[arg(long, default_value = "0.1,0.25,0.5")]
    epsilons: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GenTraceArgs {
    #[arg(long, default_value_t = 3)]
    stages: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 400)]
    records: usize,
    /// Comma-separated per-stage WCETs, seconds.
    #[arg(long, default_value = "0.001,0.004,0.009")]
    wcet: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fraction of easy (high first-exit confidence) records.
    #[arg(long = "easy-frac")]
    easy_frac: Option<f64>,
    /// Fraction of hard records whose confidence barely improves with depth.
    #[arg(long = "stuck-frac")]
    stuck_frac: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    /// Samples file: line i holds whitespace-separated timings for stage i.
    #[arg(long)]
    samples: PathBuf,
    /// Empirical percentile in [0,1]; default is the normal 99% CI bound.
    #[arg(long)]
    percentile: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::GenTrace(a) => cmd_gen_trace(a),
        Cmd::Profile(a) => cmd_profile(a),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// `key = value` lines; '#' starts a comment; unknown keys are rejected so
/// typos fail loudly.
fn parse_config(path: &Path) -> Result<HashMap<String, String>> {
    const KEYS: &[&str] = &[
        "policy", "k", "dl", "du", "delta", "epsilon", "trace", "seed", "count", "drop-mode",
        "cost", "prior", "cpu-overhead", "arrivals", "out",
    ];
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected key = value", path.display(), i + 1))
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!(
                "{}:{}: unknown key {key:?}",
                path.display(),
                i + 1
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn fill<T: FromStr>(slot: &mut Option<T>, map: &HashMap<String, String>, key: &str) -> Result<()>
where
    T::Err: std::fmt::Display,
{
    if slot.is_none() {
        if let Some(raw) = map.get(key) {
            *slot = Some(raw.parse().map_err(|e| {
                Error::Config(format!("config key {key} = {raw:?}: {e}"))
            })?);
        }
    }
    Ok(())
}

/// Resolved single-run setup: everything `simulate` needs, also the fixed
/// part of a sweep.
struct Setup {
    spec: WorkloadSpec,
    cfg: SimConfig,
    library: TraceLibrary,
    trace_label: String,
    out: Option<PathBuf>,
}

fn resolve(mut a: RunArgs) -> Result<Setup> {
    if let Some(path) = &a.config {
        let map = parse_config(path)?;
        fill(&mut a.policy, &map, "policy")?;
        fill(&mut a.k, &map, "k")?;
        fill(&mut a.dl, &map, "dl")?;
        fill(&mut a.du, &map, "du")?;
        fill(&mut a.delta, &map, "delta")?;
        fill(&mut a.epsilon, &map, "epsilon")?;
        fill(&mut a.seed, &map, "seed")?;
        fill(&mut a.count, &map, "count")?;
        fill(&mut a.drop_mode, &map, "drop-mode")?;
        fill(&mut a.cost, &map, "cost")?;
        fill(&mut a.prior, &map, "prior")?;
        fill(&mut a.cpu_overhead, &map, "cpu-overhead")?;
        fill(&mut a.arrivals, &map, "arrivals")?;
        if a.trace.is_none() {
            a.trace = map.get("trace").map(PathBuf::from);
        }
        if a.out.is_none() {
            a.out = map.get("out").map(PathBuf::from);
        }
    }
    if a.delta.is_some() && a.epsilon.is_some() {
        return Err(Error::Validation("--delta and --epsilon are mutually exclusive".into()));
    }

    let seed = a.seed.unwrap_or(1);
    let policy: Policy = a.policy.as_deref().unwrap_or("planner-exp").parse()?;
    let arrivals = match a.arrivals.as_deref() {
        None | Some("closed-loop") => ArrivalMode::ClosedLoop,
        Some(s) => {
            let rate = s
                .strip_prefix("poisson:")
                .ok_or_else(|| {
                    Error::Validation(format!(
                        "arrivals must be closed-loop or poisson:<rate>, got {s:?}"
                    ))
                })?
                .parse::<f64>()
                .map_err(|e| Error::Validation(format!("poisson rate: {e}")))?;
            ArrivalMode::Poisson { rate }
        }
    };
    let spec = WorkloadSpec {
        clients: a.k.unwrap_or(20),
        d_min: a.dl.unwrap_or(0.01),
        d_max: a.du.unwrap_or(0.35),
        count: a.count.unwrap_or(300),
        mandatory: 1,
        arrivals,
        seed,
    };
    let quant = match (a.delta, a.epsilon) {
        (Some(d), None) => QuantConfig::Delta(d),
        (None, Some(e)) => QuantConfig::Epsilon(e),
        _ => QuantConfig::Delta(0.1),
    };
    let cost_mode = match a.cost.as_deref() {
        None | Some("model") => CostMode::Model,
        Some("off") => CostMode::Off,
        Some("measured") => CostMode::Measured,
        Some(other) => {
            return Err(Error::Validation(format!(
                "cost must be off, model, or measured, got {other:?}"
            )))
        }
    };
    let cfg = SimConfig {
        policy,
        quant,
        drop_mode: a
            .drop_mode
            .as_deref()
            .map(DropMode::from_str)
            .transpose()?
            .unwrap_or(DropMode::Allow),
        prior: a.prior,
        cpu_overhead: a.cpu_overhead.unwrap_or(0.001),
        cost: CostModel { mode: cost_mode, ..CostModel::default() },
        jitter: None,
        jitter_seed: seed,
        reassign: true,
    };
    let (library, trace_label) = match &a.trace {
        Some(path) => (TraceLibrary::load(path)?, path.display().to_string()),
        None => {
            let wcet = [0.001, 0.004, 0.009];
            let lib = synth_library(3, 2, 400, &wcet, &SynthParams::default(), seed)?;
            (lib, format!("synthetic(seed={seed})"))
        }
    };
    Ok(Setup { spec, cfg, library, trace_label, out: a.out })
}

fn outcome_csv(report: &SimReport) -> String {
    let mut out = String::from("job,depth,missed,finished_by_deadline,correct,returned_at\n");
    for o in &report.outcomes {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6}\n",
            o.id.0,
            o.depth_executed,
            o.missed as u8,
            o.finished_by_deadline as u8,
            o.final_correct as u8,
            o.returned_at,
        ));
    }
    out
}

fn cmd_simulate(args: RunArgs) -> Result<ExitCode> {
    let setup = resolve(args)?;
    let mut workload = Workload::new(setup.spec, setup.library)?;
    let report = run_workload(&mut workload, &setup.cfg)?;
    println!(
        "policy={} jobs={} accuracy={:.6} accuracy_served={:.6} miss_rate={:.6} mean_depth={:.6} \
         scheduler_overhead_fraction={:.6} feasibility_violations={} makespan={:.6}",
        setup.cfg.policy,
        report.jobs,
        report.accuracy,
        report.accuracy_served,
        report.miss_rate,
        report.mean_depth,
        report.scheduler_overhead_fraction,
        report.feasibility_violations,
        report.makespan,
    );
    if let Some(p) = &report.planner {
        println!(
            "planner: full_builds={} incremental_builds={} cells={} reassign_swaps={}/{} \
             infeasible_fallbacks={}",
            p.full_builds,
            p.incremental_builds,
            p.cells_built,
            p.reassign_swaps,
            p.reassign_calls,
            p.infeasible_fallbacks,
        );
    }
    if let Some(path) = &setup.out {
        std::fs::write(path, outcome_csv(&report))?;
    }
    // With scheduling cost off the planner's conservatism is exact, so any
    // violation is a bug worth a hard failure. Charged decision latency may
    // legitimately consume the adjustment cushion; then the count in the
    // summary line is the report, not an error.
    if report.feasibility_violations > 0 && setup.cfg.cost.mode == CostMode::Off {
        eprintln!(
            "error: {} planned stages finished past an adjusted deadline",
            report.feasibility_violations
        );
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|e| Error::Validation(format!("bad {what} entry {t:?}: {e}")))
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let axis: SweepAxis = args.axis.parse()?;
    let values: Vec<f64> = parse_list(&args.values, "value")?;
    let policies: Vec<Policy> = parse_list(&args.policies, "policy")?;
    let reps = args.reps.unwrap_or(3);
    let out = args
        .run
        .out
        .clone()
        .ok_or_else(|| Error::Validation("sweep requires --out <csv>".into()))?;
    let setup = resolve(args.run)?;
    let seed = setup.spec.seed;
    let plan = ExperimentPlan {
        axis,
        values,
        policies,
        spec: setup.spec,
        sim: setup.cfg,
        replications: reps,
        seed,
    };
    let rows = run_experiment(&plan, &setup.library)?;
    std::fs::write(&out, rows_to_csv(&rows))?;
    let manifest = out.with_extension("manifest.json");
    std::fs::write(&manifest, manifest_json(&plan, &setup.trace_label))?;
    println!(
        "wrote {} rows to {} (manifest {})",
        rows.len(),
        out.display(),
        manifest.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let epsilons: Vec<f64> = parse_list(&args.epsilons, "epsilon")?;
    let bound = run_bound_suite(args.instances, &epsilons, args.seed)?;
    let bound_ok = bound.violations == 0 && bound.infeasible_plans == 0;
    println!(
        "bound: instances={} checks={} violations={} infeasible_plans={} worst_ratio={:.6} -> {}",
        bound.instances,
        bound.checks,
        bound.violations,
        bound.infeasible_plans,
        bound.worst_ratio,
        if bound_ok { "PASS" } else { "FAIL" }
    );
    let aligned = run_aligned_suite(args.instances, args.seed.wrapping_add(1))?;
    let aligned_ok = aligned.mismatches == 0;
    println!(
        "aligned: instances={} mismatches={} max_abs_err={:.3e} -> {}",
        aligned.instances,
        aligned.mismatches,
        aligned.max_abs_err,
        if aligned_ok { "PASS" } else { "FAIL" }
    );
    let inc = run_incremental_suite(args.sequences, args.seed.wrapping_add(2))?;
    let inc_ok = inc.mismatches == 0;
    println!(
        "incremental: sequences={} arrivals={} partial_rebuilds={} mismatches={} -> {}",
        inc.sequences,
        inc.arrivals,
        inc.partial_rebuilds,
        inc.mismatches,
        if inc_ok { "PASS" } else { "FAIL" }
    );
    Ok(if bound_ok && aligned_ok && inc_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_gen_trace(args: GenTraceArgs) -> Result<ExitCode> {
    let wcet: Vec<f64> = parse_list(&args.wcet, "wcet")?;
    let mut params = SynthParams::default();
    if let Some(f) = args.easy_frac {
        params.easy_frac = f;
    }
    if let Some(f) = args.stuck_frac {
        params.stuck_frac = f;
    }
    let lib = synth_library(args.stages, args.classes, args.records, &wcet, &params, args.seed)?;
    lib.save(&args.out)?;
    println!(
        "wrote {} records ({} stages, {} classes) to {}",
        lib.records.len(),
        lib.header.num_stages,
        lib.header.num_classes,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_profile(args: ProfileArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.samples)?;
    let samples: Vec<Vec<f64>> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|e| {
                        Error::Validation(format!("samples line {}: {e}", i + 1))
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let method = match args.percentile {
        Some(p) => WcetMethod::Percentile(p),
        None => WcetMethod::NormalCi99,
    };
    let wcets = profile_wcet(&samples, method)?;
    for (i, w) in wcets.iter().enumerate() {
        println!("stage {}: wcet={:.6}", i + 1, w);
    }
    let joined: Vec<String> = wcets.iter().map(|w| format!("{w:.6}")).collect();
    println!("wcet={}", joined.join(","));
    Ok(ExitCode::SUCCESS)
}
