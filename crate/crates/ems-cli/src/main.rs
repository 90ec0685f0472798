//! `ems` — command-line front end for the hybrid-powertrain energy-management
//! toolkit. Subcommands cover the pipeline end to end: turning a drive cycle
//! into a demand profile, fitting the battery and fuel-curve surrogates,
//! solving a whole horizon as one mixed-integer program, running the
//! dynamic-programming benchmark, closed-loop block-receding-horizon
//! simulation, and a side-by-side comparison.
//!
//! Every invocation creates a timestamped directory under the configured
//! output root (or `--out`) containing `manifest.json` plus the artifacts of
//! the subcommand. Exit codes: 0 success, 2 configuration/input problems,
//! 3 fit-quality failures, 4 infeasible programs, 5 time limit without a
//! usable solution, 1 anything else.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use ems_core::battery::{self, BatterySurrogate};
use ems_core::config::{load_config, Assembled};
use ems_core::dp::{rollout, solve_dp, write_value_dump};
use ems_core::formulation::{self, Mode, Schedule};
use ems_core::fuelcell;
use ems_core::mpc::{run_mpc, truth_simulate, CurtailmentEvent, SolveStats, TruthAccount};
use ems_core::report::{self, write_trace_csv, CostBreakdown};
use ems_core::EmsError;
use miqp::{MiqpSolution, MiqpSolver, SolveStatus, VarKind};

/// Health-aware energy management for hybrid powertrains with several
/// hydrogen fuel-cell stacks and one battery pack.
#[derive(Parser)]
#[command(name = "ems", version, about, propagate_version = true)]
struct Cli {
    /// Run configuration (TOML or JSON)
    #[arg(short, long, global = true, default_value = "config/default.toml")]
    config: PathBuf,

    /// Output root; each invocation creates a timestamped subdirectory
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert the configured drive cycle into a power-demand profile
    Profile,
    /// Fit the battery surrogates, and optionally a stack fuel curve
    Fit {
        /// CSV of (power kW, fuel kg/s) samples for the quadratic fuel fit
        #[arg(long)]
        fuel_samples: Option<PathBuf>,
    },
    /// Solve the whole horizon as one mixed-integer program
    Optimize {
        /// Override the configured stack coordination mode
        #[arg(long, value_enum)]
        mode: Option<CliMode>,
        /// Also write the assembled program as problem.mps
        #[arg(long)]
        export_mps: bool,
    },
    /// Dynamic-programming benchmark: value iteration plus policy rollout
    Dp {
        /// Also write every value layer to values.csv
        #[arg(long)]
        dump_values: bool,
    },
    /// Closed-loop block-receding-horizon simulation over the profile
    Simulate {
        /// Override the configured stack coordination mode
        #[arg(long, value_enum)]
        mode: Option<CliMode>,
    },
    /// One-shot optimization and the benchmark on the same profile, side by side
    Compare,
}

/// Stack coordination: one shared schedule or one per stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliMode {
    /// all stacks share a single setpoint schedule
    Csc,
    /// each stack is scheduled independently
    Isc,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Mode {
        match m {
            CliMode::Csc => Mode::Csc,
            CliMode::Isc => Mode::Isc,
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Profile => cmd_profile(cli),
        Command::Fit { fuel_samples } => cmd_fit(cli, fuel_samples.as_deref()),
        Command::Optimize { mode, export_mps } => cmd_optimize(cli, *mode, *export_mps),
        Command::Dp { dump_values } => cmd_dp(cli, *dump_values),
        Command::Simulate { mode } => cmd_simulate(cli, *mode),
        Command::Compare => cmd_compare(cli),
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<EmsError>() {
        Some(
            EmsError::Io { .. }
            | EmsError::Parse { .. }
            | EmsError::Validation(_)
            | EmsError::Domain(_),
        ) => 2,
        Some(EmsError::Fit(_)) => 3,
        Some(EmsError::Infeasible(_)) => 4,
        Some(EmsError::TimeLimit(_)) => 5,
        Some(EmsError::SolverFailed(_)) | None => 1,
    }
}

// ---------------------------------------------------------------------------
// run directories and shared output helpers

struct Ctx {
    assembled: Assembled,
    run_dir: PathBuf,
}

/// Loads and assembles the configuration, creates the run directory, and
/// drops a manifest into it so the run is reproducible later.
fn prepare(cli: &Cli, name: &str) -> anyhow::Result<Ctx> {
    let loaded = load_config(&cli.config)?;
    let assembled = loaded.assemble()?;
    let out_root = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&loaded.config.output.dir));
    let run_dir = make_run_dir(&out_root, name)?;
    write_manifest(cli, name, &run_dir)?;
    log::info!("writing results to {}", run_dir.display());
    Ok(Ctx { assembled, run_dir })
}

fn make_run_dir(root: &Path, name: &str) -> anyhow::Result<PathBuf> {
    let fmt =
        time::format_description::parse_borrowed::<2>("[year][month][day]-[hour][minute][second]")?;
    let stamp = OffsetDateTime::now_utc().format(&fmt)?;
    let mut dir = root.join(format!("{stamp}-{name}"));
    let mut k = 1;
    while dir.exists() {
        k += 1;
        dir = root.join(format!("{stamp}-{name}-{k}"));
    }
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    invocation: Vec<String>,
    config_path: String,
    config_sha256: String,
    version: String,
    created_utc: String,
}

fn write_manifest(cli: &Cli, command: &str, run_dir: &Path) -> anyhow::Result<()> {
    let bytes =
        fs::read(&cli.config).with_context(|| format!("reading {}", cli.config.display()))?;
    let manifest = Manifest {
        command: command.to_string(),
        invocation: std::env::args().collect(),
        config_path: cli.config.display().to_string(),
        config_sha256: format!("{:x}", Sha256::digest(&bytes)),
        version: env!("CARGO_PKG_VERSION").to_string(),
        created_utc: OffsetDateTime::now_utc().format(&Rfc3339)?,
    };
    write_json(&run_dir.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::GapLimit => "gap_limit",
        SolveStatus::TimeLimit => "time_limit",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
    }
}

fn print_costs(title: &str, cost: &CostBreakdown) {
    println!("{title}:");
    for (name, value) in CostBreakdown::CATEGORIES.iter().zip(cost.parts()) {
        println!("  {name:<20} ${value:>12.4}");
    }
    println!("  {:<20} ${:>12.4}", "total", cost.total);
}

// ---------------------------------------------------------------------------
// profile

fn cmd_profile(cli: &Cli) -> anyhow::Result<()> {
    let ctx = prepare(cli, "profile")?;
    let profile = &ctx.assembled.profile;
    let mut text = String::from("t_s,demand_kw\n");
    for (i, d) in profile.demand.iter().enumerate() {
        text.push_str(&format!("{:.3},{:.6}\n", i as f64 * profile.dt, d));
    }
    let csv_path = ctx.run_dir.join("profile.csv");
    fs::write(&csv_path, text).with_context(|| format!("writing {}", csv_path.display()))?;

    let n = profile.demand.len();
    let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    let (mut traction_kwh, mut regen_kwh) = (0.0, 0.0);
    for &d in &profile.demand {
        min = min.min(d);
        max = max.max(d);
        sum += d;
        if d > 0.0 {
            traction_kwh += d * profile.dt / 3600.0;
        } else {
            regen_kwh -= d * profile.dt / 3600.0;
        }
    }
    #[derive(Serialize)]
    struct ProfileSummary {
        steps: usize,
        dt_s: f64,
        duration_s: f64,
        min_kw: f64,
        mean_kw: f64,
        max_kw: f64,
        traction_kwh: f64,
        regen_kwh: f64,
    }
    let summary = ProfileSummary {
        steps: n,
        dt_s: profile.dt,
        duration_s: n as f64 * profile.dt,
        min_kw: min,
        mean_kw: sum / n as f64,
        max_kw: max,
        traction_kwh,
        regen_kwh,
    };
    write_json(&ctx.run_dir.join("profile.json"), &summary)?;
    println!(
        "profile: {} steps at {} s ({:.0} s total)",
        summary.steps, summary.dt_s, summary.duration_s
    );
    println!(
        "demand: min {:.2} kW, mean {:.2} kW, max {:.2} kW",
        summary.min_kw, summary.mean_kw, summary.max_kw
    );
    println!(
        "energy: {:.2} kWh traction, {:.2} kWh recoverable braking",
        summary.traction_kwh, summary.regen_kwh
    );
    println!("results in {}", ctx.run_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// fit

fn cmd_fit(cli: &Cli, fuel_samples: Option<&Path>) -> anyhow::Result<()> {
    let ctx = prepare(cli, "fit")?;
    let surrogate = &ctx.assembled.models.surrogate;

    #[derive(Serialize, Clone)]
    struct FuelFit {
        a_kg_per_s_kw2: f64,
        b_kg_per_s_kw: f64,
        c_kg_per_s: f64,
        r_squared: f64,
        curvature_clamped: bool,
    }
    #[derive(Serialize)]
    struct FitReport<'a> {
        battery: &'a BatterySurrogate,
        fuel: Option<FuelFit>,
    }

    let fuel = match fuel_samples {
        Some(path) => {
            let samples = battery::load_points(path)?;
            let (a, b, c, r_squared, clamped) = fuelcell::fit_fuel_curve(&samples)?;
            Some(FuelFit {
                a_kg_per_s_kw2: a,
                b_kg_per_s_kw: b,
                c_kg_per_s: c,
                r_squared,
                curvature_clamped: clamped,
            })
        }
        None => None,
    };
    write_json(
        &ctx.run_dir.join("fit.json"),
        &FitReport { battery: surrogate, fuel: fuel.clone() },
    )?;

    println!(
        "battery current map: i = {:.6e}·p + {:.6e}·soc  (R² = {:.6})",
        surrogate.a_bat, surrogate.b_bat, surrogate.r_squared_current
    );
    println!(
        "battery wear line:   1/(2·Ah_eol) = {:.6e}·c_rate + {:.6e}{}",
        surrogate.a_d,
        surrogate.b_d,
        if surrogate.eol_slope_clamped {
            "  (slope clamped to keep the objective convex)"
        } else {
            ""
        }
    );
    if let Some(f) = &fuel {
        println!(
            "fuel curve: mdot = {:.4e}·p² + {:.4e}·p + {:.4e}  (R² = {:.6}{})",
            f.a_kg_per_s_kw2,
            f.b_kg_per_s_kw,
            f.c_kg_per_s,
            f.r_squared,
            if f.curvature_clamped { ", curvature clamped" } else { "" }
        );
    }
    println!("results in {}", ctx.run_dir.display());

    if surrogate.r_squared_current < 0.98 {
        return Err(EmsError::Fit(format!(
            "current map R² {:.4} is below the 0.98 quality floor",
            surrogate.r_squared_current
        ))
        .into());
    }
    if let Some(f) = &fuel {
        if f.r_squared < 0.98 {
            return Err(EmsError::Fit(format!(
                "fuel curve R² {:.4} is below the 0.98 quality floor",
                f.r_squared
            ))
            .into());
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// one-shot optimization (shared by `optimize` and `compare`)

struct OneShot {
    solution: MiqpSolution,
    schedule: Schedule,
    truth: TruthAccount,
    variables: usize,
    binaries: usize,
}

fn solve_one_shot(a: &Assembled, mps_path: Option<&Path>) -> anyhow::Result<OneShot> {
    let (problem, layout) = formulation::build(
        &a.profile,
        &a.horizon,
        &a.models.cell,
        &a.models.pack,
        &a.models.surrogate,
        &a.models.stacks,
        &a.models.rates,
    )?;
    if let Some(path) = mps_path {
        miqp::export_mps(&problem, path)
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))?;
        log::info!("wrote {}", path.display());
    }
    let variables = problem.lin.len();
    let binaries = problem.kind.iter().filter(|k| **k == VarKind::Binary).count();
    log::info!(
        "solving {} steps x {} stacks ({}): {} variables, {} binary",
        a.horizon.n_steps,
        a.horizon.n_stacks,
        a.horizon.mode,
        variables,
        binaries
    );
    let mut solver = MiqpSolver::new(&problem, a.solver_options.clone())
        .map_err(|e| EmsError::SolverFailed(format!("setting up the search: {e}")))?;
    let solution = solver.solve();
    accept_solution(&solution)?;
    let schedule = formulation::extract_schedule(
        &layout,
        &a.horizon,
        &a.models.cell,
        &a.models.stacks,
        &a.profile,
        &solution.values,
    )?;
    let truth = truth_simulate(&schedule, &a.profile, &a.horizon, &a.models)?;
    Ok(OneShot { solution, schedule, truth, variables, binaries })
}

/// Gate on the search outcome: accept anything with a finite incumbent,
/// translate the rest into the matching error (and exit code).
fn accept_solution(solution: &MiqpSolution) -> Result<(), EmsError> {
    match solution.status {
        SolveStatus::Optimal | SolveStatus::GapLimit if solution.objective.is_finite() => Ok(()),
        SolveStatus::TimeLimit if solution.objective.is_finite() => {
            log::warn!(
                "time limit reached; reporting the incumbent (gap {:.3e})",
                solution.gap
            );
            Ok(())
        }
        SolveStatus::Infeasible => Err(EmsError::Infeasible(
            "no schedule satisfies the power balance, SOC windows, and stack bands".into(),
        )),
        SolveStatus::TimeLimit => Err(EmsError::TimeLimit(
            "no incumbent before the limit; raise solver.time_limit_s or loosen the gap tolerances"
                .into(),
        )),
        other => Err(EmsError::SolverFailed(format!(
            "search ended {} without an incumbent",
            status_name(other)
        ))),
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    status: &'static str,
    objective: f64,
    best_bound: f64,
    gap: f64,
    nodes_explored: usize,
    qp_iterations: usize,
    node_failures: usize,
    wall_time_s: f64,
    variables: usize,
    binaries: usize,
    soc_final_planned: f64,
    soc_final_truth: f64,
    battery_cost_surrogate: f64,
    truth_costs: &'a CostBreakdown,
}

fn cmd_optimize(cli: &Cli, mode: Option<CliMode>, export_mps: bool) -> anyhow::Result<()> {
    let mut ctx = prepare(cli, "optimize")?;
    if let Some(m) = mode {
        ctx.assembled.horizon.mode = m.into();
    }
    let mps = export_mps.then(|| ctx.run_dir.join("problem.mps"));
    let shot = solve_one_shot(&ctx.assembled, mps.as_deref())?;

    write_json(
        &ctx.run_dir.join("solve.json"),
        &SolveReport {
            status: status_name(shot.solution.status),
            objective: shot.solution.objective,
            best_bound: shot.solution.best_bound,
            gap: shot.solution.gap,
            nodes_explored: shot.solution.nodes_explored,
            qp_iterations: shot.solution.qp_iterations,
            node_failures: shot.solution.node_failures,
            wall_time_s: shot.solution.wall_time.as_secs_f64(),
            variables: shot.variables,
            binaries: shot.binaries,
            soc_final_planned: shot.schedule.soc_final,
            soc_final_truth: shot.truth.trace.soc_final,
            battery_cost_surrogate: shot.truth.battery_cost_surrogate,
            truth_costs: &shot.truth.cost,
        },
    )?;
    write_json(&ctx.run_dir.join("schedule.json"), &shot.schedule)?;
    write_trace_csv(&shot.truth.trace, &ctx.run_dir.join("trace.csv"))?;
    write_json(&ctx.run_dir.join("costs.json"), &shot.truth.cost)?;

    println!(
        "search: {} in {:.2} s, {} nodes, {} QP iterations",
        status_name(shot.solution.status),
        shot.solution.wall_time.as_secs_f64(),
        shot.solution.nodes_explored,
        shot.solution.qp_iterations
    );
    println!(
        "objective ${:.4}   best bound ${:.4}   gap {:.2e}",
        shot.solution.objective, shot.solution.best_bound, shot.solution.gap
    );
    print_costs("truth accounting of the applied schedule", &shot.truth.cost);
    println!(
        "SOC: {:.2} % -> {:.2} % (planned {:.2} %)",
        ctx.assembled.horizon.soc_initial,
        shot.truth.trace.soc_final,
        shot.schedule.soc_final
    );
    println!("results in {}", ctx.run_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// dp benchmark

fn cmd_dp(cli: &Cli, dump_values: bool) -> anyhow::Result<()> {
    let ctx = prepare(cli, "dp")?;
    let a = &ctx.assembled;
    let sol = solve_dp(
        &a.profile,
        &a.horizon,
        &a.models.cell,
        &a.models.pack,
        &a.models.stacks,
        &a.models.rates,
        &a.grids,
        dump_values,
    )?;
    let (trace, cost) = rollout(
        &sol,
        &a.profile,
        &a.horizon,
        &a.models.cell,
        &a.models.pack,
        &a.models.stacks,
        &a.models.rates,
    )?;
    if dump_values {
        write_value_dump(&sol, &ctx.run_dir.join("values.csv"))?;
    }
    write_trace_csv(&trace, &ctx.run_dir.join("trace.csv"))?;
    write_json(&ctx.run_dir.join("costs.json"), &cost)?;

    #[derive(Serialize)]
    struct DpReport<'a> {
        value_initial: f64,
        rollout_total: f64,
        wall_time_s: f64,
        stage_evals: u64,
        soc_points: usize,
        controls: usize,
        steps: usize,
        soc_final: f64,
        truth_costs: &'a CostBreakdown,
    }
    write_json(
        &ctx.run_dir.join("dp.json"),
        &DpReport {
            value_initial: sol.value_initial,
            rollout_total: cost.total,
            wall_time_s: sol.wall_time.as_secs_f64(),
            stage_evals: sol.stage_evals,
            soc_points: sol.soc_points.len(),
            controls: sol.controls.len(),
            steps: sol.policy.len(),
            soc_final: trace.soc_final,
            truth_costs: &cost,
        },
    )?;

    println!(
        "grid: {} SOC points x {} controls x {} steps ({} stage evaluations)",
        sol.soc_points.len(),
        sol.controls.len(),
        sol.policy.len(),
        sol.stage_evals
    );
    println!(
        "value iteration {:.2} s; cost-to-go from start ${:.4}",
        sol.wall_time.as_secs_f64(),
        sol.value_initial
    );
    print_costs("rollout truth accounting", &cost);
    println!(
        "SOC: {:.2} % -> {:.2} %",
        a.horizon.soc_initial, trace.soc_final
    );
    println!("results in {}", ctx.run_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// closed-loop simulation

fn cmd_simulate(cli: &Cli, mode: Option<CliMode>) -> anyhow::Result<()> {
    let mut ctx = prepare(cli, "simulate")?;
    if let Some(m) = mode {
        ctx.assembled.horizon.mode = m.into();
    }
    let a = &ctx.assembled;
    let run = run_mpc(&a.profile, &a.horizon, &a.models, &a.mpc, &a.solver_options)?;

    write_trace_csv(&run.trace, &ctx.run_dir.join("trace.csv"))?;
    write_json(&ctx.run_dir.join("costs.json"), &run.cost)?;

    #[derive(Serialize)]
    struct MpcReport<'a> {
        windows: usize,
        recovered_windows: usize,
        curtailed_steps: usize,
        total_solver_time_s: f64,
        soc_final: f64,
        battery_cost_surrogate: f64,
        battery_surrogate_gap: f64,
        truth_costs: &'a CostBreakdown,
        curtailments: &'a [CurtailmentEvent],
        solves: &'a [SolveStats],
    }
    let recovered = run.solves.iter().filter(|s| s.recovered).count();
    write_json(
        &ctx.run_dir.join("mpc.json"),
        &MpcReport {
            windows: run.solves.len(),
            recovered_windows: recovered,
            curtailed_steps: run.curtailments.len(),
            total_solver_time_s: run.total_wall_time().as_secs_f64(),
            soc_final: run.trace.soc_final,
            battery_cost_surrogate: run.battery_cost_surrogate,
            battery_surrogate_gap: run.battery_surrogate_gap(),
            truth_costs: &run.cost,
            curtailments: &run.curtailments,
            solves: &run.solves,
        },
    )?;

    println!(
        "closed loop: {} windows ({} recovered), {} curtailed steps, solver time {:.2} s",
        run.solves.len(),
        recovered,
        run.curtailments.len(),
        run.total_wall_time().as_secs_f64()
    );
    print_costs("applied-trajectory truth accounting", &run.cost);
    println!(
        "SOC: {:.2} % -> {:.2} %",
        a.horizon.soc_initial, run.trace.soc_final
    );
    println!("results in {}", ctx.run_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// compare

fn cmd_compare(cli: &Cli) -> anyhow::Result<()> {
    let ctx = prepare(cli, "compare")?;
    let a = &ctx.assembled;

    let shot = solve_one_shot(a, None)?;
    let miqp_wall = shot.solution.wall_time.as_secs_f64();

    let dp_start = Instant::now();
    let sol = solve_dp(
        &a.profile,
        &a.horizon,
        &a.models.cell,
        &a.models.pack,
        &a.models.stacks,
        &a.models.rates,
        &a.grids,
        false,
    )?;
    let (dp_trace, dp_cost) = rollout(
        &sol,
        &a.profile,
        &a.horizon,
        &a.models.cell,
        &a.models.pack,
        &a.models.stacks,
        &a.models.rates,
    )?;
    let dp_wall = dp_start.elapsed().as_secs_f64();

    let comparison = report::compare(
        "one-shot",
        (&shot.truth.trace, &shot.truth.cost),
        "benchmark",
        (&dp_trace, &dp_cost),
    )?;
    write_trace_csv(&shot.truth.trace, &ctx.run_dir.join("trace_oneshot.csv"))?;
    write_trace_csv(&dp_trace, &ctx.run_dir.join("trace_benchmark.csv"))?;

    #[derive(Serialize)]
    struct CompareReport<'a> {
        comparison: &'a report::ComparisonReport,
        oneshot_objective: f64,
        oneshot_wall_s: f64,
        benchmark_value_initial: f64,
        benchmark_wall_s: f64,
        speedup: f64,
    }
    write_json(
        &ctx.run_dir.join("compare.json"),
        &CompareReport {
            comparison: &comparison,
            oneshot_objective: shot.solution.objective,
            oneshot_wall_s: miqp_wall,
            benchmark_value_initial: sol.value_initial,
            benchmark_wall_s: dp_wall,
            speedup: dp_wall / miqp_wall.max(1e-9),
        },
    )?;

    println!("{comparison}");
    println!(
        "one-shot solve {:.2} s, benchmark {:.2} s ({:.0}x)",
        miqp_wall,
        dp_wall,
        dp_wall / miqp_wall.max(1e-9)
    );
    println!("results in {}", ctx.run_dir.display());
    Ok(())
}
