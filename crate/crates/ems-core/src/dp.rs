//! Grid dynamic-programming benchmark under collective stack control: all
//! stacks share one setpoint, the state is (SOC, previous collective power),
//! and a backward Bellman sweep over discretized SOC and power grids yields
//! a policy whose rollout cost cross-checks the MIQP optimizer.
//!
//! The stage cost uses the exact truth models throughout: quadratic fuel,
//! the four stack-wear rules, and the battery priced through its exact
//! current and end-of-life throughput (no fitted surrogates).

use crate::battery::{self, BatteryCellParams, BatteryPackParams};
use crate::formulation::{HorizonSpec, Mode};
use crate::fuelcell::{self, DegradationRates, FcStackParams};
use crate::report::{CostBreakdown, SimulationTrace, TraceStep};
use crate::vehicle::PowerProfile;
use crate::{EmsError, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read as _, Write as _};
use std::time::{Duration, Instant};

/// Discretization of the two state/control axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpGrids {
    /// % per SOC grid cell
    pub soc_step_pct: f64,
    /// kW per collective-power grid cell
    pub fc_power_step_kw: f64,
}

impl Default for DpGrids {
    fn default() -> Self {
        DpGrids { soc_step_pct: 0.02, fc_power_step_kw: 5.0 }
    }
}

impl DpGrids {
    pub fn validate(&self) -> Result<()> {
        if !(self.soc_step_pct > 0.0 && self.fc_power_step_kw > 0.0) {
            return Err(EmsError::Validation("grid steps must be positive".into()));
        }
        Ok(())
    }
}

/// Solved policy and value information.
#[derive(Debug, Clone)]
pub struct DpSolution {
    pub grids: DpGrids,
    /// % SOC grid points, ascending
    pub soc_points: Vec<f64>,
    /// kW collective-power controls; `controls[0] = 0` is the all-off point
    pub controls: Vec<f64>,
    /// per step: best control index for each (soc index * n_controls +
    /// previous-control index)
    pub policy: Vec<Vec<u16>>,
    /// $ optimal cost-to-go from the initial state
    pub value_initial: f64,
    /// value tables for every layer (step 0..=N), kept only on request
    pub values: Option<Vec<Vec<f64>>>,
    pub wall_time: Duration,
    /// number of stage-cost evaluations performed
    pub stage_evals: u64,
}

struct StageModels<'a> {
    cell: &'a BatteryCellParams,
    pack: &'a BatteryPackParams,
    stack: &'a FcStackParams,
    rates: &'a DegradationRates,
    n_stacks: f64,
    dt: f64,
    h2_price: f64,
    soc_min: f64,
    soc_max: f64,
}

struct StageOutcome {
    cost: CostBreakdown,
    soc_next: f64,
    current_a: f64,
}

/// Exact cost and state transition of running the collective setpoint `u`
/// for one step, or `None` when the battery cannot absorb the residual.
fn stage(m: &StageModels, u: f64, prev_u: f64, soc: f64, demand: f64) -> Option<StageOutcome> {
    let per_stack = u / m.n_stacks;
    let on = u > 0.0;
    let mut cost = CostBreakdown::default();
    cost.h2_cost = m.n_stacks
        * m.dt
        * m.h2_price
        * fuelcell::fuel_rate(per_stack, on, m.stack).ok()?;
    let prev_per_stack = prev_u / m.n_stacks;
    cost.fc_load_change = m.n_stacks
        * fuelcell::loss_load_change((per_stack - prev_per_stack).abs(), m.rates, m.stack);
    let switched = (prev_u > 0.0) != on;
    cost.fc_on_off = m.n_stacks * fuelcell::loss_on_off(switched, m.rates, m.stack);
    cost.fc_idling = m.n_stacks * fuelcell::loss_idling(per_stack, on, m.dt, m.rates, m.stack);
    cost.fc_high_load = m.n_stacks * fuelcell::loss_high_load(per_stack, m.dt, m.rates, m.stack);

    let p_bat_kw = demand - u;
    let p_cell_w = 1000.0 * p_bat_kw / m.pack.cell_count as f64;
    let current = battery::power_to_current_exact(p_cell_w, soc, m.cell).ok()?;
    if current < m.cell.i_min - 1e-12 || current > m.cell.i_max + 1e-12 {
        return None;
    }
    let soc_next = battery::soc_after_step(soc, current, m.dt, m.cell).ok()?;
    if soc_next < m.soc_min - 1e-12 || soc_next > m.soc_max + 1e-12 {
        return None;
    }
    cost.battery_degradation =
        battery::pack_degradation_cost_exact(current, m.dt, m.cell, m.pack).ok()?;
    Some(StageOutcome { cost: cost.seal(), soc_next, current_a: current })
}

fn build_soc_grid(soc_min: f64, soc_max: f64, step: f64) -> Vec<f64> {
    let n = ((soc_max - soc_min) / step).round() as usize;
    let mut pts: Vec<f64> = (0..=n).map(|k| soc_min + k as f64 * step).collect();
    if let Some(last) = pts.last_mut() {
        *last = soc_max;
    }
    pts
}

fn build_control_grid(stack: &FcStackParams, n_stacks: f64, step: f64) -> Vec<f64> {
    let lo = n_stacks * stack.p_min;
    let hi = n_stacks * stack.p_max;
    let mut controls = vec![0.0];
    let mut u = lo;
    while u < hi - 1e-9 {
        controls.push(u);
        u += step;
    }
    controls.push(hi);
    controls
}

/// Linear interpolation of a value layer in SOC at a fixed control column.
/// Infinite neighbors poison the estimate unless the point sits on a node.
fn interp_value(layer: &[f64], n_u: usize, soc_points: &[f64], soc: f64, u_idx: usize) -> f64 {
    let step = soc_points[1] - soc_points[0];
    let pos = (soc - soc_points[0]) / step;
    let i0 = (pos.floor() as usize).min(soc_points.len() - 1);
    let frac = pos - i0 as f64;
    let v0 = layer[i0 * n_u + u_idx];
    if frac <= 1e-12 || i0 + 1 >= soc_points.len() {
        return v0;
    }
    let v1 = layer[(i0 + 1) * n_u + u_idx];
    if !v0.is_finite() || !v1.is_finite() {
        return f64::INFINITY;
    }
    (1.0 - frac) * v0 + frac * v1
}

fn check_homogeneous(stacks: &[FcStackParams]) -> Result<&FcStackParams> {
    let first = stacks
        .first()
        .ok_or_else(|| EmsError::Validation("need at least one stack".into()))?;
    if stacks.iter().any(|s| s != first) {
        return Err(EmsError::Validation(
            "the collective benchmark needs identical stacks".into(),
        ));
    }
    Ok(first)
}

/// Backward value iteration over the grids. Returns the policy and the
/// optimal cost from the initial state; set `keep_values` to retain every
/// value layer (memory scales with N, SOC points, and controls).
#[allow(clippy::too_many_arguments)]
pub fn solve_dp(
    profile: &PowerProfile,
    horizon: &HorizonSpec,
    cell: &BatteryCellParams,
    pack: &BatteryPackParams,
    stacks: &[FcStackParams],
    rates: &DegradationRates,
    grids: &DpGrids,
    keep_values: bool,
) -> Result<DpSolution> {
    let start = Instant::now();
    horizon.validate()?;
    cell.validate()?;
    rates.validate()?;
    grids.validate()?;
    if horizon.mode != Mode::Csc {
        return Err(EmsError::Validation(
            "the benchmark runs under collective stack control".into(),
        ));
    }
    let stack = check_homogeneous(stacks)?;
    if stacks.len() != horizon.n_stacks {
        return Err(EmsError::Validation(format!(
            "horizon declares {} stacks, got {}",
            horizon.n_stacks,
            stacks.len()
        )));
    }
    if profile.demand.len() != horizon.n_steps {
        return Err(EmsError::Validation(format!(
            "demand profile has {} steps, horizon expects {}",
            profile.demand.len(),
            horizon.n_steps
        )));
    }
    let n_stacks = horizon.n_stacks as f64;
    let soc_points = build_soc_grid(horizon.soc_min, horizon.soc_max, grids.soc_step_pct);
    let controls = build_control_grid(stack, n_stacks, grids.fc_power_step_kw);
    let n_soc = soc_points.len();
    let n_u = controls.len();
    if n_u > u16::MAX as usize {
        return Err(EmsError::Validation("control grid too fine for the policy table".into()));
    }
    let models = StageModels {
        cell,
        pack,
        stack,
        rates,
        n_stacks,
        dt: horizon.dt,
        h2_price: horizon.h2_price,
        soc_min: horizon.soc_min,
        soc_max: horizon.soc_max,
    };

    // terminal layer: admissible only inside the final SOC window
    let mut next_layer = vec![f64::INFINITY; n_soc * n_u];
    for (si, &s) in soc_points.iter().enumerate() {
        if s >= horizon.soc_final_min - 1e-9 && s <= horizon.soc_final_max + 1e-9 {
            for ui in 0..n_u {
                next_layer[si * n_u + ui] = 0.0;
            }
        }
    }
    let mut all_values = if keep_values { vec![next_layer.clone()] } else { Vec::new() };
    let mut policy: Vec<Vec<u16>> = Vec::with_capacity(horizon.n_steps);
    let mut stage_evals = 0u64;

    for i in (0..horizon.n_steps).rev() {
        let demand = profile.demand[i];
        let mut layer = vec![f64::INFINITY; n_soc * n_u];
        let mut choice = vec![0u16; n_soc * n_u];
        for (si, &soc) in soc_points.iter().enumerate() {
            for pu in 0..n_u {
                let mut best = f64::INFINITY;
                let mut best_u = 0u16;
                for (ui, &u) in controls.iter().enumerate() {
                    stage_evals += 1;
                    if let Some(out) = stage(&models, u, controls[pu], soc, demand) {
                        let tail =
                            interp_value(&next_layer, n_u, &soc_points, out.soc_next, ui);
                        if tail.is_finite() {
                            let total = out.cost.total + tail;
                            if total < best {
                                best = total;
                                best_u = ui as u16;
                            }
                        }
                    }
                }
                layer[si * n_u + pu] = best;
                choice[si * n_u + pu] = best_u;
            }
        }
        policy.push(choice);
        next_layer = layer;
        if keep_values {
            all_values.push(next_layer.clone());
        }
    }
    policy.reverse();
    if keep_values {
        all_values.reverse();
    }

    // initial state: SOC on its grid node, previous power snapped to grid
    let init_si = ((horizon.soc_initial - horizon.soc_min) / grids.soc_step_pct).round() as usize;
    let init_si = init_si.min(n_soc - 1);
    let prev_collective: f64 = horizon.prev_power.iter().sum();
    let init_pu = nearest_control(&controls, prev_collective);
    if (controls[init_pu] - prev_collective).abs() > 1e-9 {
        log::warn!(
            "previous collective power {prev_collective} kW snapped to grid point {} kW",
            controls[init_pu]
        );
    }
    let value_initial = next_layer[init_si * n_u + init_pu];
    if !value_initial.is_finite() {
        return Err(EmsError::Infeasible(
            "no grid policy reaches the terminal SOC window from the initial state".into(),
        ));
    }
    Ok(DpSolution {
        grids: *grids,
        soc_points,
        controls,
        policy,
        value_initial,
        values: if keep_values { Some(all_values) } else { None },
        wall_time: start.elapsed(),
        stage_evals,
    })
}

fn nearest_control(controls: &[f64], value: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in controls.iter().enumerate() {
        let d = (c - value).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Forward simulation of the solved policy with the exact truth models,
/// starting from the horizon's initial state. The SOC axis is snapped to
/// the nearest grid node for each policy lookup; costs and transitions use
/// the true continuous SOC.
pub fn rollout(
    sol: &DpSolution,
    profile: &PowerProfile,
    horizon: &HorizonSpec,
    cell: &BatteryCellParams,
    pack: &BatteryPackParams,
    stacks: &[FcStackParams],
    rates: &DegradationRates,
) -> Result<(SimulationTrace, CostBreakdown)> {
    let stack = check_homogeneous(stacks)?;
    if profile.demand.len() != sol.policy.len() {
        return Err(EmsError::Validation(format!(
            "profile has {} steps, policy covers {}",
            profile.demand.len(),
            sol.policy.len()
        )));
    }
    let n_stacks = horizon.n_stacks as f64;
    let n_u = sol.controls.len();
    let models = StageModels {
        cell,
        pack,
        stack,
        rates,
        n_stacks,
        dt: horizon.dt,
        h2_price: horizon.h2_price,
        soc_min: horizon.soc_min,
        soc_max: horizon.soc_max,
    };
    let step_pct = sol.grids.soc_step_pct;
    let mut soc = horizon.soc_initial;
    let mut pu = nearest_control(&sol.controls, horizon.prev_power.iter().sum());
    let mut steps = Vec::with_capacity(profile.demand.len());
    for (i, &demand) in profile.demand.iter().enumerate() {
        let si = (((soc - horizon.soc_min) / step_pct).round() as isize)
            .clamp(0, sol.soc_points.len() as isize - 1) as usize;
        if soc < horizon.soc_min - 1e-9 || soc > horizon.soc_max + 1e-9 {
            return Err(EmsError::Domain(format!(
                "rollout left the SOC grid at step {i}: {soc} %"
            )));
        }
        let ui = sol.policy[i][si * n_u + pu] as usize;
        let u = sol.controls[ui];
        let out = stage(&models, u, sol.controls[pu], soc, demand).ok_or_else(|| {
            EmsError::Domain(format!(
                "policy control {u} kW infeasible at step {i} (SOC {soc} %)"
            ))
        })?;
        let per_stack = u / n_stacks;
        steps.push(TraceStep {
            t: i as f64 * horizon.dt,
            demand_kw: demand,
            stack_p_kw: vec![per_stack; horizon.n_stacks],
            stack_on: vec![u > 0.0; horizon.n_stacks],
            p_bat_kw: demand - u,
            current_a: out.current_a,
            soc,
            cost: out.cost,
        });
        soc = out.soc_next;
        pu = ui;
    }
    let trace = SimulationTrace { dt: horizon.dt, steps, soc_final: soc };
    let total = crate::report::account_costs(&trace);
    Ok((trace, total))
}

/// Writes retained value tables as little-endian binary: three u64 header
/// words {layers, soc points, controls}, then each layer row-major
/// (SOC-major, control-minor) as f64.
pub fn write_value_dump(sol: &DpSolution, path: &std::path::Path) -> Result<()> {
    let values = sol.values.as_ref().ok_or_else(|| {
        EmsError::Validation("value tables were not retained; re-solve with keep_values".into())
    })?;
    let io_err = |e: std::io::Error| EmsError::Io { path: path.display().to_string(), source: e };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    let io_err = |e: std::io::Error| EmsError::Io { path: path.display().to_string(), source: e };
    f.write_all(&(values.len() as u64).to_le_bytes()).map_err(io_err)?;
    f.write_all(&(sol.soc_points.len() as u64).to_le_bytes()).map_err(io_err)?;
    f.write_all(&(sol.controls.len() as u64).to_le_bytes()).map_err(io_err)?;
    for layer in values {
        for v in layer {
            f.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    f.flush().map_err(io_err)?;
    Ok(())
}

/// Reads a dump produced by [`write_value_dump`]: header plus layers.
pub fn read_value_dump(path: &std::path::Path) -> Result<(u64, u64, u64, Vec<Vec<f64>>)> {
    let io_err = |e: std::io::Error| EmsError::Io { path: path.display().to_string(), source: e };
    let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err)?);
    let io_err = |e: std::io::Error| EmsError::Io { path: path.display().to_string(), source: e };
    let mut word = [0u8; 8];
    let mut read_u64 = |f: &mut std::io::BufReader<std::fs::File>| -> Result<u64> {
        f.read_exact(&mut word).map_err(io_err)?;
        Ok(u64::from_le_bytes(word))
    };
    let layers = read_u64(&mut f)?;
    let n_soc = read_u64(&mut f)?;
    let n_u = read_u64(&mut f)?;
    let mut values = Vec::with_capacity(layers as usize);
    let mut buf = vec![0u8; (n_soc * n_u) as usize * 8];
    for _ in 0..layers {
        f.read_exact(&mut buf)
            .map_err(|e| EmsError::Io { path: path.display().to_string(), source: e })?;
        values.push(
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    Ok((layers, n_soc, n_u, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{test_cell, tmp_dir};

    fn csc_horizon(n_steps: usize, n_stacks: usize) -> HorizonSpec {
        let mut h = crate::testutil::small_horizon(n_steps, n_stacks, Mode::Csc);
        // small SOC span keeps unit-test grids tiny
        h.soc_min = 45.0;
        h.soc_max = 55.0;
        h.soc_final_min = 45.0;
        h.soc_final_max = 55.0;
        h
    }

    fn profile(demand: &[f64], dt: f64) -> PowerProfile {
        PowerProfile { dt, demand: demand.to_vec() }
    }

    fn solve(
        demand: &[f64],
        n_stacks: usize,
        soc_step: f64,
        keep: bool,
    ) -> (DpSolution, HorizonSpec, Vec<FcStackParams>) {
        let h = csc_horizon(demand.len(), n_stacks);
        let stacks = vec![FcStackParams::default(); n_stacks];
        let sol = solve_dp(
            &profile(demand, h.dt),
            &h,
            &test_cell(),
            &BatteryPackParams::default(),
            &stacks,
            &DegradationRates::default(),
            &DpGrids { soc_step_pct: soc_step, fc_power_step_kw: 5.0 },
            keep,
        )
        .unwrap();
        (sol, h, stacks)
    }

    #[test]
    fn single_step_value_matches_direct_minimum() {
        let demand = [35.0];
        let (sol, h, stacks) = solve(&demand, 1, 0.05, true);
        // independent minimum over the same control grid using the public
        // truth models
        let cell = test_cell();
        let pack = BatteryPackParams::default();
        let rates = DegradationRates::default();
        let sp = &stacks[0];
        let mut best = f64::INFINITY;
        for &u in &sol.controls {
            let on = u > 0.0;
            let fuel = match fuelcell::fuel_rate(u, on, sp) {
                Ok(f) => 4.0 * f,
                Err(_) => continue,
            };
            let lc = fuelcell::loss_load_change(u, &rates, sp);
            let sw = fuelcell::loss_on_off(on, &rates, sp);
            let idle = fuelcell::loss_idling(u, on, 1.0, &rates, sp);
            let hl = fuelcell::loss_high_load(u, 1.0, &rates, sp);
            let p_cell = 1000.0 * (35.0 - u) / pack.cell_count as f64;
            let i = battery::power_to_current_exact(p_cell, 50.0, &cell).unwrap();
            let bat = battery::pack_degradation_cost_exact(i, 1.0, &cell, &pack).unwrap();
            best = best.min(fuel + lc + sw + idle + hl + bat);
        }
        assert!(
            (sol.value_initial - best).abs() < 1e-12 * best.max(1.0),
            "dp {} vs direct {best}",
            sol.value_initial
        );
        let _ = h;
    }

    #[test]
    fn refining_the_soc_grid_never_raises_cost() {
        let demand = [40.0, 80.0, 25.0, 60.0, 10.0, 45.0];
        let (coarse, _, _) = solve(&demand, 1, 0.04, false);
        let (fine, _, _) = solve(&demand, 1, 0.02, false);
        assert!(
            fine.value_initial <= coarse.value_initial + 1e-6,
            "fine {} vs coarse {}",
            fine.value_initial,
            coarse.value_initial
        );
    }

    #[test]
    fn bellman_residual_is_tiny() {
        let demand = [40.0, 80.0, 25.0, 60.0];
        let (sol, h, stacks) = solve(&demand, 1, 0.05, true);
        let values = sol.values.as_ref().unwrap();
        let cell = test_cell();
        let pack = BatteryPackParams::default();
        let rates = DegradationRates::default();
        let models = StageModels {
            cell: &cell,
            pack: &pack,
            stack: &stacks[0],
            rates: &rates,
            n_stacks: 1.0,
            dt: h.dt,
            h2_price: h.h2_price,
            soc_min: h.soc_min,
            soc_max: h.soc_max,
        };
        let n_u = sol.controls.len();
        for i in 0..demand.len() {
            for si in (0..sol.soc_points.len()).step_by(37) {
                for pu in 0..n_u {
                    let stored = values[i][si * n_u + pu];
                    let mut best = f64::INFINITY;
                    for (ui, &u) in sol.controls.iter().enumerate() {
                        if let Some(out) =
                            stage(&models, u, sol.controls[pu], sol.soc_points[si], demand[i])
                        {
                            let tail = interp_value(
                                &values[i + 1],
                                n_u,
                                &sol.soc_points,
                                out.soc_next,
                                ui,
                            );
                            if tail.is_finite() {
                                best = best.min(out.cost.total + tail);
                            }
                        }
                    }
                    if stored.is_finite() || best.is_finite() {
                        assert!(
                            (stored - best).abs() <= 1e-9 * best.abs().max(1.0),
                            "step {i} soc {si} pu {pu}: stored {stored} vs {best}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn rollout_is_self_consistent_and_feasible() {
        let demand = [40.0, 80.0, 25.0, 60.0, 10.0, 45.0];
        let (sol, h, stacks) = solve(&demand, 1, 0.02, false);
        let cell = test_cell();
        let (trace, total) = rollout(
            &sol,
            &profile(&demand, h.dt),
            &h,
            &cell,
            &BatteryPackParams::default(),
            &stacks,
            &DegradationRates::default(),
        )
        .unwrap();
        assert!(
            (total.total - sol.value_initial).abs() <= 1e-3 * sol.value_initial.max(1e-9),
            "rollout {} vs value {}",
            total.total,
            sol.value_initial
        );
        assert!(total.validate().is_ok());
        for s in &trace.steps {
            let balance = s.stack_p_kw.iter().sum::<f64>() + s.p_bat_kw - s.demand_kw;
            assert!(balance.abs() < 1e-9);
            assert!(s.current_a >= cell.i_min - 1e-9 && s.current_a <= cell.i_max + 1e-9);
            assert!(s.soc >= h.soc_min - 1e-9 && s.soc <= h.soc_max + 1e-9);
        }
        assert!(trace.soc_final >= h.soc_final_min - 1e-6);
        assert!(trace.soc_final <= h.soc_final_max + 1e-6);
    }

    #[test]
    fn zero_demand_costs_nothing() {
        let demand = [0.0, 0.0, 0.0];
        let (sol, h, stacks) = solve(&demand, 2, 0.05, false);
        assert!(sol.value_initial.abs() < 1e-12);
        let (trace, total) = rollout(
            &sol,
            &profile(&demand, h.dt),
            &h,
            &test_cell(),
            &BatteryPackParams::default(),
            &stacks,
            &DegradationRates::default(),
        )
        .unwrap();
        assert!(total.total.abs() < 1e-12);
        assert!(trace.steps.iter().all(|s| !s.stack_on[0] && s.p_bat_kw.abs() < 1e-12));
    }

    #[test]
    fn unreachable_terminal_window_is_infeasible() {
        let mut h = csc_horizon(1, 1);
        h.soc_final_min = 54.0;
        h.soc_final_max = 55.0;
        let err = solve_dp(
            &profile(&[0.0], h.dt),
            &h,
            &test_cell(),
            &BatteryPackParams::default(),
            &[FcStackParams::default()],
            &DegradationRates::default(),
            &DpGrids { soc_step_pct: 0.05, fc_power_step_kw: 5.0 },
            false,
        );
        assert!(matches!(err, Err(EmsError::Infeasible(_))), "{err:?}");
    }

    #[test]
    fn value_dump_round_trips() {
        let demand = [30.0, 50.0];
        let (sol, _, _) = solve(&demand, 1, 0.1, true);
        let path = tmp_dir("dp").join("values.bin");
        write_value_dump(&sol, &path).unwrap();
        let (layers, n_soc, n_u, values) = read_value_dump(&path).unwrap();
        assert_eq!(layers as usize, demand.len() + 1);
        assert_eq!(n_soc as usize, sol.soc_points.len());
        assert_eq!(n_u as usize, sol.controls.len());
        let orig = sol.values.as_ref().unwrap();
        for (a, b) in orig.iter().zip(&values) {
            for (x, y) in a.iter().zip(b) {
                assert!(x.to_bits() == y.to_bits());
            }
        }
        std::fs::remove_file(path).unwrap();

        let (no_vals, _, _) = solve(&demand, 1, 0.1, false);
        assert!(write_value_dump(&no_vals, &tmp_dir("dp").join("x.bin")).is_err());
    }

    #[test]
    fn control_grid_includes_endpoints_and_off() {
        let stack = FcStackParams::default();
        let g = build_control_grid(&stack, 2.0, 5.0);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 28.0);
        assert_eq!(*g.last().unwrap(), 140.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        // grid lands exactly on the ceiling when divisible
        let g2 = build_control_grid(&stack, 1.0, 7.0);
        assert_eq!(*g2.last().unwrap(), 70.0);
        assert_eq!(g2.iter().filter(|&&u| u == 70.0).count(), 1);
    }
}
