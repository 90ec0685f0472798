//! Receding-horizon harness around the optimizer: solve a window, apply the
//! first block to the exact truth models, carry the resulting state into the
//! next window, and account every applied step with the truth cost rules.
//!
//! The harness prices applied battery throughput with the exact end-of-life
//! path while also accumulating what the optimizer's fitted surrogate charged
//! for the same steps, so the surrogate gap can be reported per run.

use crate::battery::{self, BatteryCellParams, BatteryPackParams, BatterySurrogate};
use crate::formulation::{self, HorizonSpec, Schedule, ScheduleStep};
use crate::fuelcell::{self, DegradationRates, FcStackParams};
use crate::report::{CostBreakdown, SimulationTrace, TraceStep};
use crate::vehicle::PowerProfile;
use crate::{EmsError, Result};
use miqp::{warm_start_from, MiqpSolver, SolveStatus, SolverOptions};
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Fitted and physical model set shared by the optimizer and the harness.
#[derive(Debug, Clone)]
pub struct EmsModels {
    pub cell: BatteryCellParams,
    pub pack: BatteryPackParams,
    pub surrogate: BatterySurrogate,
    pub stacks: Vec<FcStackParams>,
    pub rates: DegradationRates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonPolicy {
    /// Plan to the mission end every time; windows shrink as blocks commit.
    Shrinking,
    /// Fixed-length lookahead sliding over the profile.
    Rolling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    /// s of lookahead (shrinking: the whole mission length)
    pub horizon_s: f64,
    /// s committed to the plant per solve
    pub block_s: f64,
    pub policy: HorizonPolicy,
    /// clip regen that exceeds battery charge capability
    pub curtailment: bool,
    /// % the terminal SOC window is tightened by on each side, absorbing
    /// surrogate-vs-exact drift of the applied trajectory
    pub terminal_margin_pct: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon_s: 600.0,
            block_s: 60.0,
            policy: HorizonPolicy::Shrinking,
            curtailment: true,
            terminal_margin_pct: 0.2,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self, dt: f64) -> Result<()> {
        if !(self.horizon_s > 0.0 && self.block_s > 0.0) {
            return Err(EmsError::Validation("horizon and block must be positive".into()));
        }
        if self.block_s > self.horizon_s + 1e-9 {
            return Err(EmsError::Validation(format!(
                "block {} s exceeds horizon {} s",
                self.block_s, self.horizon_s
            )));
        }
        for (name, v) in [("horizon_s", self.horizon_s), ("block_s", self.block_s)] {
            let steps = v / dt;
            if (steps - steps.round()).abs() > 1e-9 || steps.round() < 1.0 {
                return Err(EmsError::Validation(format!(
                    "{name} = {v} s is not a whole number of {dt} s steps"
                )));
            }
        }
        if self.terminal_margin_pct < 0.0 {
            return Err(EmsError::Validation("terminal margin must be >= 0".into()));
        }
        Ok(())
    }
}

/// One optimizer invocation inside a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveStats {
    pub start_step: usize,
    pub window_steps: usize,
    /// % truth SOC the window was built from
    pub soc_initial: f64,
    pub status: String,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes_explored: usize,
    pub wall_time_s: f64,
    /// the terminal window had to be widened to restore feasibility
    pub recovered: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurtailmentEvent {
    pub step: usize,
    pub original_kw: f64,
    pub curtailed_kw: f64,
}

/// Applied trajectory plus per-solve diagnostics.
#[derive(Debug, Clone)]
pub struct MpcRun {
    pub trace: SimulationTrace,
    pub cost: CostBreakdown,
    pub solves: Vec<SolveStats>,
    pub curtailments: Vec<CurtailmentEvent>,
    /// $ the optimizer's surrogate charged for the applied battery steps
    pub battery_cost_surrogate: f64,
}

impl MpcRun {
    /// $ difference between exact and surrogate pricing of applied battery use.
    pub fn battery_surrogate_gap(&self) -> f64 {
        (self.cost.battery_degradation - self.battery_cost_surrogate).abs()
    }

    pub fn total_wall_time(&self) -> Duration {
        Duration::from_secs_f64(self.solves.iter().map(|s| s.wall_time_s).sum())
    }
}

struct TruthState {
    soc: f64,
    prev_p: Vec<f64>,
    prev_on: Vec<bool>,
}

/// Truth accounting of one planned step: exact battery current from the
/// power balance residual, exact degradation pricing, stack wear from the
/// plan's own on/off and load decisions.
fn apply_step(
    state: &mut TruthState,
    step: &ScheduleStep,
    demand: f64,
    t: f64,
    dt: f64,
    h2_price: f64,
    models: &EmsModels,
) -> Result<(TraceStep, f64)> {
    let mut cost = CostBreakdown::default();
    let mut p_fc_total = 0.0;
    for (j, (stack, params)) in step.stacks.iter().zip(&models.stacks).enumerate() {
        p_fc_total += stack.p_kw;
        cost.h2_cost += dt * h2_price * fuelcell::fuel_rate(stack.p_kw, stack.on, params)?;
        cost.fc_load_change +=
            fuelcell::loss_load_change((stack.p_kw - state.prev_p[j]).abs(), &models.rates, params);
        cost.fc_on_off +=
            fuelcell::loss_on_off(stack.on != state.prev_on[j], &models.rates, params);
        cost.fc_idling += fuelcell::loss_idling(stack.p_kw, stack.on, dt, &models.rates, params);
        cost.fc_high_load += fuelcell::loss_high_load(stack.p_kw, dt, &models.rates, params);
    }
    let p_bat_kw = demand - p_fc_total;
    let p_cell_w = 1000.0 * p_bat_kw / models.pack.cell_count as f64;
    let current = battery::power_to_current_exact(p_cell_w, state.soc, &models.cell)
        .map_err(|e| EmsError::Domain(format!("truth battery at t = {t} s: {e}")))?;
    if current < models.cell.i_min - 1e-6 || current > models.cell.i_max + 1e-6 {
        log::warn!("truth current {current} A leaves [{}, {}] at t = {t} s", models.cell.i_min, models.cell.i_max);
    }
    cost.battery_degradation =
        battery::pack_degradation_cost_exact(current, dt, &models.cell, &models.pack)?;
    let surrogate_cost = battery::pack_degradation_cost_step(
        step.current_a,
        dt,
        &models.surrogate,
        &models.cell,
        &models.pack,
    );
    let trace_step = TraceStep {
        t,
        demand_kw: demand,
        stack_p_kw: step.stacks.iter().map(|s| s.p_kw).collect(),
        stack_on: step.stacks.iter().map(|s| s.on).collect(),
        p_bat_kw,
        current_a: current,
        soc: state.soc,
        cost: cost.seal(),
    };
    state.soc = battery::soc_after_step(state.soc, current, dt, &models.cell)?;
    for (j, stack) in step.stacks.iter().enumerate() {
        state.prev_p[j] = stack.p_kw;
        state.prev_on[j] = stack.on;
    }
    Ok((trace_step, surrogate_cost))
}

/// Result of pushing a full schedule through the exact truth models.
#[derive(Debug, Clone)]
pub struct TruthAccount {
    pub trace: SimulationTrace,
    pub cost: CostBreakdown,
    /// $ surrogate pricing of the same battery steps
    pub battery_cost_surrogate: f64,
}

/// Simulates a schedule open-loop from the horizon's initial state with the
/// exact truth models and returns the trace and both battery pricings.
pub fn truth_simulate(
    schedule: &Schedule,
    profile: &PowerProfile,
    horizon: &HorizonSpec,
    models: &EmsModels,
) -> Result<TruthAccount> {
    if schedule.steps.len() != profile.demand.len() {
        return Err(EmsError::Validation(format!(
            "schedule covers {} steps, profile has {}",
            schedule.steps.len(),
            profile.demand.len()
        )));
    }
    let mut state = TruthState {
        soc: horizon.soc_initial,
        prev_p: horizon.prev_power.clone(),
        prev_on: horizon.prev_on.clone(),
    };
    let mut steps = Vec::with_capacity(schedule.steps.len());
    let mut surrogate_total = 0.0;
    for (i, (step, &demand)) in schedule.steps.iter().zip(&profile.demand).enumerate() {
        let (ts, sur) = apply_step(
            &mut state,
            step,
            demand,
            i as f64 * horizon.dt,
            horizon.dt,
            horizon.h2_price,
            models,
        )?;
        steps.push(ts);
        surrogate_total += sur;
    }
    let trace = SimulationTrace { dt: horizon.dt, steps, soc_final: state.soc };
    let cost = crate::report::account_costs(&trace);
    Ok(TruthAccount { trace, cost, battery_cost_surrogate: surrogate_total })
}

/// kW floor (most negative admissible battery power) for regen curtailment:
/// 98 % of the tighter of the exact and surrogate charge capabilities at the
/// given SOC.
fn charge_floor_kw(soc: f64, models: &EmsModels) -> Result<f64> {
    let cells = models.pack.cell_count as f64;
    let exact_kw =
        cells * battery::current_to_power(models.cell.i_max, soc, &models.cell)? / 1000.0;
    let map_p = models.surrogate.a_bat * 1000.0 / cells;
    let sur_kw = if map_p.abs() > 1e-12 {
        (models.cell.i_max - models.surrogate.b_bat * soc) / map_p
    } else {
        exact_kw
    };
    Ok(0.98 * exact_kw.max(sur_kw))
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

/// Runs the receding-horizon loop over `profile` and returns the applied
/// trajectory. `template` supplies dt, mode, SOC windows, pricing, and the
/// initial plant state; its `n_steps` is replaced per window.
pub fn run_mpc(
    profile: &PowerProfile,
    template: &HorizonSpec,
    models: &EmsModels,
    config: &MpcConfig,
    opts: &SolverOptions,
) -> Result<MpcRun> {
    let dt = template.dt;
    config.validate(dt)?;
    if (profile.dt - dt).abs() > 1e-9 {
        return Err(EmsError::Validation(format!(
            "profile dt {} differs from horizon dt {dt}",
            profile.dt
        )));
    }
    let lookahead = (config.horizon_s / dt).round() as usize;
    let mission = match config.policy {
        HorizonPolicy::Shrinking => lookahead,
        HorizonPolicy::Rolling => profile.demand.len(),
    };
    if profile.demand.len() < mission {
        return Err(EmsError::Validation(format!(
            "profile has {} steps, mission needs {mission}",
            profile.demand.len()
        )));
    }
    let block = (config.block_s / dt).round() as usize;
    let margin = config.terminal_margin_pct;
    let half_window = 0.5 * (template.soc_final_max - template.soc_final_min);
    if margin >= half_window && half_window > 0.0 {
        return Err(EmsError::Validation(format!(
            "terminal margin {margin} % swallows the final window (half-width {half_window} %)"
        )));
    }

    let mut state = TruthState {
        soc: template.soc_initial,
        prev_p: template.prev_power.clone(),
        prev_on: template.prev_on.clone(),
    };
    let mut trace_steps = Vec::with_capacity(mission);
    let mut solves = Vec::new();
    let mut curtailments = Vec::new();
    let mut surrogate_total = 0.0;
    let mut prev_solution: Option<(miqp::MiqpSolution, usize)> = None;
    let mut k0 = 0usize;

    while k0 < mission {
        let window = match config.policy {
            HorizonPolicy::Shrinking => mission - k0,
            HorizonPolicy::Rolling => lookahead.min(mission - k0),
        };
        // demand for this window, with regen clipped to charge capability
        let floor = charge_floor_kw(state.soc, models)?;
        let mut window_demand = Vec::with_capacity(window);
        let mut window_curtailed = Vec::new();
        for (off, &d) in profile.demand[k0..k0 + window].iter().enumerate() {
            if config.curtailment && d < floor {
                window_curtailed.push(CurtailmentEvent {
                    step: k0 + off,
                    original_kw: d,
                    curtailed_kw: floor,
                });
                window_demand.push(floor);
            } else {
                window_demand.push(d);
            }
        }
        let window_profile = PowerProfile { dt, demand: window_demand };

        let mut horizon = template.clone();
        horizon.n_steps = window;
        horizon.soc_initial = state.soc;
        horizon.soc_final_min = template.soc_final_min + margin;
        horizon.soc_final_max = template.soc_final_max - margin;
        horizon.prev_power = state.prev_p.clone();
        horizon.prev_on = state.prev_on.clone();

        let hint = match &prev_solution {
            Some((sol, vps)) => {
                let shifted = warm_start_from(sol, *vps, block)
                    .map_err(|e| EmsError::SolverFailed(format!("warm start: {e:?}")))?;
                if shifted.is_empty() {
                    None
                } else {
                    Some(shifted)
                }
            }
            None => None,
        };

        let (problem, layout) = formulation::build(
            &window_profile,
            &horizon,
            &models.cell,
            &models.pack,
            &models.surrogate,
            &models.stacks,
            &models.rates,
        )?;
        let mut solver = MiqpSolver::new(&problem, opts.clone())
            .map_err(|e| EmsError::SolverFailed(format!("window at step {k0}: {e:?}")))?;
        let mut solution = solver.solve_with_hint(hint.as_deref());
        let mut recovered = false;
        if solution.status == SolveStatus::Infeasible {
            // one retry with the terminal window doubled about its center
            let c = 0.5 * (horizon.soc_final_min + horizon.soc_final_max);
            let w = (horizon.soc_final_max - horizon.soc_final_min).max(1e-6);
            horizon.soc_final_min = (c - w).max(horizon.soc_min);
            horizon.soc_final_max = (c + w).min(horizon.soc_max);
            log::warn!(
                "window at step {k0} infeasible; retrying with terminal window [{}, {}] %",
                horizon.soc_final_min,
                horizon.soc_final_max
            );
            let (problem, _layout2) = formulation::build(
                &window_profile,
                &horizon,
                &models.cell,
                &models.pack,
                &models.surrogate,
                &models.stacks,
                &models.rates,
            )?;
            let mut solver = MiqpSolver::new(&problem, opts.clone())
                .map_err(|e| EmsError::SolverFailed(format!("window at step {k0}: {e:?}")))?;
            solution = solver.solve_with_hint(hint.as_deref());
            recovered = solution.status != SolveStatus::Infeasible;
            debug_assert_eq!(_layout2.num_vars(), layout.num_vars());
        }
        // a search that closed no incumbent reports an infinite objective
        // over placeholder values; never apply those as a schedule
        match solution.status {
            SolveStatus::Optimal | SolveStatus::GapLimit if solution.objective.is_finite() => {}
            SolveStatus::TimeLimit if solution.objective.is_finite() => {
                log::warn!(
                    "window at step {k0} hit the time limit; applying the incumbent (gap {:.3e})",
                    solution.gap
                );
            }
            SolveStatus::Infeasible => {
                return Err(EmsError::Infeasible(format!(
                    "window at step {k0} stayed infeasible after widening: SOC {} %, \
                     terminal [{}, {}] %, {} steps",
                    state.soc, horizon.soc_final_min, horizon.soc_final_max, window
                )));
            }
            SolveStatus::TimeLimit => {
                return Err(EmsError::TimeLimit(format!(
                    "window at step {k0} ran out of time before any incumbent"
                )));
            }
            other => {
                return Err(EmsError::SolverFailed(format!(
                    "window at step {k0} ended {other:?} without an incumbent"
                )));
            }
        }
        let schedule = formulation::extract_schedule(
            &layout,
            &horizon,
            &models.cell,
            &models.stacks,
            &window_profile,
            &solution.values,
        )?;
        solves.push(SolveStats {
            start_step: k0,
            window_steps: window,
            soc_initial: state.soc,
            status: status_name(solution.status).to_string(),
            objective: solution.objective,
            best_bound: solution.best_bound,
            gap: solution.gap,
            nodes_explored: solution.nodes_explored,
            wall_time_s: solution.wall_time.as_secs_f64(),
            recovered,
        });

        let apply = block.min(window);
        for off in 0..apply {
            let demand = window_profile.demand[off];
            let (ts, sur) = apply_step(
                &mut state,
                &schedule.steps[off],
                demand,
                (k0 + off) as f64 * dt,
                dt,
                template.h2_price,
                models,
            )?;
            trace_steps.push(ts);
            surrogate_total += sur;
        }
        curtailments.extend(window_curtailed.into_iter().filter(|e| e.step < k0 + apply));
        prev_solution = Some((solution, layout.vars_per_step()));
        k0 += apply;
    }

    if state.soc < template.soc_final_min - 1e-6 || state.soc > template.soc_final_max + 1e-6 {
        log::warn!(
            "final truth SOC {} % missed the window [{}, {}] %",
            state.soc,
            template.soc_final_min,
            template.soc_final_max
        );
    }
    let trace = SimulationTrace { dt, steps: trace_steps, soc_final: state.soc };
    let cost = crate::report::account_costs(&trace);
    Ok(MpcRun { trace, cost, solves, curtailments, battery_cost_surrogate: surrogate_total })
}
