//! Builds the sparse convex MIQP that schedules the fuel-cell stacks and the
//! battery over a power-demand horizon.
//!
//! Per step the model carries, for each stack: power setpoint, a ramp
//! epigraph variable for |setpoint change|, and binary on/off, switch,
//! high-load, and idle indicators plus a continuous idle-cost auxiliary.
//! The battery contributes pack power, cell current, a |current| epigraph
//! variable, and state of charge. Two dispatch modes are supported:
//! independent stack control (ISC), where stacks are scheduled individually,
//! and collective stack control (CSC), where one shared set of stack
//! variables drives all stacks in lockstep.

use crate::battery::{BatteryCellParams, BatteryPackParams, BatterySurrogate};
use crate::fuelcell::{DegradationRates, FcStackParams, BAND_EPS_KW};
use crate::vehicle::PowerProfile;
use crate::{EmsError, Result};
use miqp::{MiqpProblem, Sense, VarKind};
use serde::{Deserialize, Serialize};

/// Stack dispatch mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// independent stack control: each stack gets its own schedule
    Isc,
    /// collective stack control: all stacks share one schedule
    Csc,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Isc => write!(f, "isc"),
            Mode::Csc => write!(f, "csc"),
        }
    }
}

/// Horizon dimensions, SOC policy, pricing, and the carried-over state the
/// first step differences against (previous setpoint and on/off per stack).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonSpec {
    pub n_steps: usize,
    /// s
    pub dt: f64,
    pub n_stacks: usize,
    pub mode: Mode,
    /// %
    pub soc_initial: f64,
    /// % window the end-of-horizon SOC must land in
    pub soc_final_min: f64,
    pub soc_final_max: f64,
    /// % hard bounds along the horizon
    pub soc_min: f64,
    pub soc_max: f64,
    /// $/kg
    pub h2_price: f64,
    /// kW setpoint each stack held before the horizon
    pub prev_power: Vec<f64>,
    /// on/off state each stack held before the horizon
    pub prev_on: Vec<bool>,
}

impl HorizonSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 || self.n_stacks == 0 {
            return Err(EmsError::Validation(
                "horizon needs at least one step and one stack".into(),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(EmsError::Validation(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.soc_min <= self.soc_final_min
            && self.soc_final_min <= self.soc_final_max
            && self.soc_final_max <= self.soc_max)
        {
            return Err(EmsError::Validation(format!(
                "SOC windows must nest: min {} <= final [{}, {}] <= max {}",
                self.soc_min, self.soc_final_min, self.soc_final_max, self.soc_max
            )));
        }
        if self.soc_initial < self.soc_min || self.soc_initial > self.soc_max {
            return Err(EmsError::Validation(format!(
                "initial SOC {} outside [{}, {}]",
                self.soc_initial, self.soc_min, self.soc_max
            )));
        }
        if self.h2_price < 0.0 {
            return Err(EmsError::Validation("hydrogen price must be >= 0".into()));
        }
        if self.prev_power.len() != self.n_stacks || self.prev_on.len() != self.n_stacks {
            return Err(EmsError::Validation(format!(
                "carried-over state must cover all {} stacks (got {} powers, {} states)",
                self.n_stacks,
                self.prev_power.len(),
                self.prev_on.len()
            )));
        }
        Ok(())
    }
}

/// Index map from (step, stack, role) to flat variable positions. Variables
/// are laid out step-major so a receding-horizon shift by whole steps is a
/// contiguous slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    pub n_steps: usize,
    pub n_stacks: usize,
    pub mode: Mode,
}

impl VariableLayout {
    /// Number of independently scheduled stack variable blocks.
    pub fn stack_blocks(&self) -> usize {
        match self.mode {
            Mode::Isc => self.n_stacks,
            Mode::Csc => 1,
        }
    }

    pub fn vars_per_step(&self) -> usize {
        7 * self.stack_blocks() + 4
    }

    pub fn num_vars(&self) -> usize {
        self.n_steps * self.vars_per_step()
    }

    fn block(&self, stack: usize) -> usize {
        match self.mode {
            Mode::Isc => stack,
            Mode::Csc => 0,
        }
    }

    fn stack_base(&self, step: usize, stack: usize) -> usize {
        step * self.vars_per_step() + 7 * self.block(stack)
    }

    /// kW setpoint
    pub fn p_fc(&self, step: usize, stack: usize) -> usize {
        self.stack_base(step, stack)
    }

    /// kW epigraph of |setpoint change|
    pub fn dp_fc(&self, step: usize, stack: usize) -> usize {
        self.stack_base(step, stack) + 1
    }

    /// binary on/off
    pub fn on(&self, step: usize, stack: usize) -> usize {
        self.stack_base(step, stack) + 2
    }

    /// binary switch event
    pub fn switch(&self, step: usize, stack: usize) -> usize {
        self.stack_base(step, stack) + 3
    }

    /// binary high-load indicator
    pub fn high(&self, step: usize, stack: usize) -> usize {
        self.stack_base(step, stack) + 4
    }

    /// binary idle indicator
    pub fn idle(&self, step: usize, stack: usize) -> usize {
        self.stack_base(step, stack) + 5
    }

    /// continuous idle-cost auxiliary in [0, 1]
    pub fn z_idle(&self, step: usize, stack: usize) -> usize {
        self.stack_base(step, stack) + 6
    }

    fn bat_base(&self, step: usize) -> usize {
        step * self.vars_per_step() + 7 * self.stack_blocks()
    }

    /// kW pack power, discharge-positive
    pub fn p_bat(&self, step: usize) -> usize {
        self.bat_base(step)
    }

    /// A cell current, charging-positive
    pub fn i_bat(&self, step: usize) -> usize {
        self.bat_base(step) + 1
    }

    /// A epigraph of |cell current|
    pub fn i_plus(&self, step: usize) -> usize {
        self.bat_base(step) + 2
    }

    /// % state of charge at the beginning of the step
    pub fn soc(&self, step: usize) -> usize {
        self.bat_base(step) + 3
    }
}

/// One stack's action over one step of an extracted schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackStep {
    /// kW
    pub p_kw: f64,
    pub on: bool,
    /// a start or stop happened entering this step
    pub switched: bool,
    /// optimizer's high-load indicator
    pub high_load: bool,
    /// optimizer's idle indicator
    pub idle: bool,
}

/// One step of an extracted schedule, carrying the optimizer's own battery
/// trajectory (surrogate current and SOC) alongside the stack actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub stacks: Vec<StackStep>,
    /// kW, discharge-positive
    pub p_bat_kw: f64,
    /// A per cell, charging-positive
    pub current_a: f64,
    /// % at the beginning of the step
    pub soc_begin: f64,
}

/// Typed view of a solved horizon. In CSC mode the shared stack block is
/// expanded so `steps[i].stacks` always has one entry per physical stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// s
    pub dt: f64,
    pub mode: Mode,
    pub steps: Vec<ScheduleStep>,
    /// % at the end of the horizon, per the optimizer's SOC recursion
    pub soc_final: f64,
}

fn soc_step_gain(dt: f64, capacity_ah: f64) -> f64 {
    100.0 * dt / (3600.0 * capacity_ah)
}

/// Translates a demand horizon plus fitted models into the sparse MIQP.
/// Returns the problem and the index layout needed to read solutions back.
pub fn build(
    profile: &PowerProfile,
    horizon: &HorizonSpec,
    cell: &BatteryCellParams,
    pack: &BatteryPackParams,
    surrogate: &BatterySurrogate,
    stacks: &[FcStackParams],
    rates: &DegradationRates,
) -> Result<(MiqpProblem, VariableLayout)> {
    horizon.validate()?;
    cell.validate()?;
    rates.validate()?;
    if stacks.len() != horizon.n_stacks {
        return Err(EmsError::Validation(format!(
            "horizon declares {} stacks but {} parameter sets were supplied",
            horizon.n_stacks,
            stacks.len()
        )));
    }
    for s in stacks {
        s.validate()?;
    }
    if profile.demand.len() != horizon.n_steps {
        return Err(EmsError::Validation(format!(
            "demand profile has {} steps, horizon expects {}",
            profile.demand.len(),
            horizon.n_steps
        )));
    }
    if (profile.dt - horizon.dt).abs() > 1e-9 {
        return Err(EmsError::Validation(format!(
            "profile dt {} differs from horizon dt {}",
            profile.dt, horizon.dt
        )));
    }
    if surrogate.a_d < 0.0 {
        return Err(EmsError::Validation(
            "battery aging slope must be >= 0 for a convex objective".into(),
        ));
    }
    if pack.cell_count == 0 || !(pack.energy_kwh > 0.0) || !(pack.price_per_kwh > 0.0) {
        return Err(EmsError::Validation("battery pack sizing must be positive".into()));
    }
    let homogeneous = stacks.windows(2).all(|w| w[0] == w[1])
        && horizon.prev_power.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12)
        && horizon.prev_on.windows(2).all(|w| w[0] == w[1]);
    if horizon.mode == Mode::Csc && !homogeneous {
        return Err(EmsError::Validation(
            "collective control needs identical stacks and identical carried-over state".into(),
        ));
    }

    let layout = VariableLayout {
        n_steps: horizon.n_steps,
        n_stacks: horizon.n_stacks,
        mode: horizon.mode,
    };
    let n = layout.num_vars();
    let mut p = MiqpProblem::new(n);

    let blocks = layout.stack_blocks();
    // each shared CSC block stands for this many physical stacks
    let dup = match horizon.mode {
        Mode::Isc => 1.0,
        Mode::Csc => horizon.n_stacks as f64,
    };
    let dt = horizon.dt;
    let kappa = soc_step_gain(dt, cell.capacity_ah);
    // cell current from pack kW and SOC: I = map_p * P_bat + map_soc * SOC
    let map_p = surrogate.a_bat * 1000.0 / pack.cell_count as f64;
    let map_soc = surrogate.b_bat;
    let i_abs_max = cell.i_max.max(-cell.i_min);
    // loosest pack power compatible with the current map over the SOC box
    let p_bat_box = (i_abs_max + map_soc.abs() * 100.0) / map_p.abs().max(1e-12) + 1.0;
    // $ per A^2 and per A of |current| per step (pack life fraction at pack price)
    let bat_q = surrogate.a_d / cell.capacity_ah * (dt / 7200.0) * pack.energy_kwh
        * pack.price_per_kwh;
    let bat_l = surrogate.b_d * (dt / 7200.0) * pack.energy_kwh * pack.price_per_kwh;

    for i in 0..horizon.n_steps {
        for b in 0..blocks {
            let stack = &stacks[b];
            let (vp, vdp, vo, vs, vh, vi, vz) = (
                layout.p_fc(i, b),
                layout.dp_fc(i, b),
                layout.on(i, b),
                layout.switch(i, b),
                layout.high(i, b),
                layout.idle(i, b),
                layout.z_idle(i, b),
            );
            p.names[vp] = format!("p_fc_{i}_{b}");
            p.names[vdp] = format!("dp_fc_{i}_{b}");
            p.names[vo] = format!("on_{i}_{b}");
            p.names[vs] = format!("sw_{i}_{b}");
            p.names[vh] = format!("hi_{i}_{b}");
            p.names[vi] = format!("id_{i}_{b}");
            p.names[vz] = format!("z_{i}_{b}");
            p.lb[vp] = 0.0;
            p.ub[vp] = stack.p_max;
            p.lb[vdp] = 0.0;
            p.ub[vdp] = stack.p_max + horizon.prev_power[b].abs();
            for &v in &[vo, vs, vh, vi] {
                p.lb[v] = 0.0;
                p.ub[v] = 1.0;
                p.kind[v] = VarKind::Binary;
            }
            p.lb[vz] = 0.0;
            p.ub[vz] = 1.0;

            // objective: hydrogen (gated fixed draw) + the four wear terms
            let fuel_scale = dup * dt * horizon.h2_price;
            p.q_diag[vp] += fuel_scale * stack.a_fc;
            p.lin[vp] += fuel_scale * stack.b_fc;
            p.lin[vo] += fuel_scale * stack.c_fc;
            let wear = dup * stack.stack_cost / stack.v_drop_max_uv;
            p.lin[vdp] += wear * rates.load_change_uv_per_kw;
            p.lin[vs] += wear * rates.on_off_uv;
            p.lin[vz] += wear * rates.idling_uv_per_h * dt / 3600.0;
            p.lin[vh] += wear * rates.high_load_uv_per_h * dt / 3600.0;

            // on/off gates the setpoint into the operating band
            p.add_row(
                vec![(vp, 1.0), (vo, -stack.p_min)],
                Sense::Ge,
                0.0,
                format!("gate_lo[{i}][{b}]"),
            );
            p.add_row(
                vec![(vp, 1.0), (vo, -stack.p_max)],
                Sense::Le,
                0.0,
                format!("gate_hi[{i}][{b}]"),
            );

            // switch and ramp epigraphs difference against the previous step
            // (or the carried-over state on the first step)
            if i == 0 {
                let o_prev = if horizon.prev_on[b] { 1.0 } else { 0.0 };
                let p_prev = horizon.prev_power[b];
                p.add_row(vec![(vs, 1.0), (vo, -1.0)], Sense::Ge, -o_prev, format!("switch_up[{i}][{b}]"));
                p.add_row(vec![(vs, 1.0), (vo, 1.0)], Sense::Ge, o_prev, format!("switch_dn[{i}][{b}]"));
                p.add_row(vec![(vdp, 1.0), (vp, -1.0)], Sense::Ge, -p_prev, format!("ramp_up[{i}][{b}]"));
                p.add_row(vec![(vdp, 1.0), (vp, 1.0)], Sense::Ge, p_prev, format!("ramp_dn[{i}][{b}]"));
            } else {
                let vo_prev = layout.on(i - 1, b);
                let vp_prev = layout.p_fc(i - 1, b);
                p.add_row(
                    vec![(vs, 1.0), (vo, -1.0), (vo_prev, 1.0)],
                    Sense::Ge,
                    0.0,
                    format!("switch_up[{i}][{b}]"),
                );
                p.add_row(
                    vec![(vs, 1.0), (vo, 1.0), (vo_prev, -1.0)],
                    Sense::Ge,
                    0.0,
                    format!("switch_dn[{i}][{b}]"),
                );
                p.add_row(
                    vec![(vdp, 1.0), (vp, -1.0), (vp_prev, 1.0)],
                    Sense::Ge,
                    0.0,
                    format!("ramp_up[{i}][{b}]"),
                );
                p.add_row(
                    vec![(vdp, 1.0), (vp, 1.0), (vp_prev, -1.0)],
                    Sense::Ge,
                    0.0,
                    format!("ramp_dn[{i}][{b}]"),
                );
            }

            // high-load indicator, anchored so p = 0 forces it off and the
            // threshold sits a hair inside the band edge
            let hi_thr = stack.p_high - 2.0 * BAND_EPS_KW;
            p.add_row(
                vec![(vh, stack.p_max - hi_thr), (vp, -1.0)],
                Sense::Ge,
                -hi_thr,
                format!("high_force[{i}][{b}]"),
            );
            p.add_row(
                vec![(vh, hi_thr), (vp, -1.0)],
                Sense::Le,
                0.0,
                format!("high_cap[{i}][{b}]"),
            );

            // idle indicator: forced on at or below the idle ceiling, capped
            // off well above it
            let lo_thr = stack.p_low + 2.0 * BAND_EPS_KW;
            p.add_row(
                vec![(vi, lo_thr), (vp, 1.0)],
                Sense::Ge,
                lo_thr,
                format!("idle_force[{i}][{b}]"),
            );
            p.add_row(
                vec![(vi, stack.p_max - lo_thr), (vp, 1.0)],
                Sense::Le,
                stack.p_max,
                format!("idle_cap[{i}][{b}]"),
            );
            // the idle cost multiplies on-and-idle, never a negative excess
            p.add_row(
                vec![(vz, 1.0), (vi, -1.0), (vo, -1.0)],
                Sense::Ge,
                -1.0,
                format!("idle_aux[{i}][{b}]"),
            );
        }

        let (vpb, vib, vip, vsoc) = (
            layout.p_bat(i),
            layout.i_bat(i),
            layout.i_plus(i),
            layout.soc(i),
        );
        p.names[vpb] = format!("p_bat_{i}");
        p.names[vib] = format!("i_bat_{i}");
        p.names[vip] = format!("i_abs_{i}");
        p.names[vsoc] = format!("soc_{i}");
        p.lb[vpb] = -p_bat_box;
        p.ub[vpb] = p_bat_box;
        p.lb[vib] = cell.i_min;
        p.ub[vib] = cell.i_max;
        p.lb[vip] = 0.0;
        p.ub[vip] = i_abs_max;
        if i == 0 {
            p.lb[vsoc] = horizon.soc_initial;
            p.ub[vsoc] = horizon.soc_initial;
        } else {
            p.lb[vsoc] = horizon.soc_min;
            p.ub[vsoc] = horizon.soc_max;
        }

        p.q_diag[vip] += bat_q;
        p.lin[vip] += bat_l;

        // demand balance: stack output plus battery meets the demand
        let mut balance: Vec<(usize, f64)> = (0..blocks).map(|b| (layout.p_fc(i, b), dup)).collect();
        balance.push((vpb, 1.0));
        p.add_row(balance, Sense::Eq, profile.demand[i], format!("balance[{i}]"));

        // fitted current map ties cell current to pack power and SOC
        p.add_row(
            vec![(vib, 1.0), (vpb, -map_p), (vsoc, -map_soc)],
            Sense::Eq,
            0.0,
            format!("current_map[{i}]"),
        );

        // |current| epigraph feeding the aging cost
        p.add_row(vec![(vip, 1.0), (vib, -1.0)], Sense::Ge, 0.0, format!("i_abs_up[{i}]"));
        p.add_row(vec![(vip, 1.0), (vib, 1.0)], Sense::Ge, 0.0, format!("i_abs_dn[{i}]"));

        // SOC recursion (coulomb counting)
        if i + 1 < horizon.n_steps {
            p.add_row(
                vec![(layout.soc(i + 1), 1.0), (vsoc, -1.0), (vib, -kappa)],
                Sense::Eq,
                0.0,
                format!("soc_step[{i}]"),
            );
        }
    }

    // end-of-horizon SOC window on the post-final-step state
    let last = horizon.n_steps - 1;
    p.add_row(
        vec![(layout.soc(last), 1.0), (layout.i_bat(last), kappa)],
        Sense::Ge,
        horizon.soc_final_min,
        "soc_final_lo",
    );
    p.add_row(
        vec![(layout.soc(last), 1.0), (layout.i_bat(last), kappa)],
        Sense::Le,
        horizon.soc_final_max,
        "soc_final_hi",
    );

    // identical stacks with identical carried-over state are interchangeable;
    // ordering the first step's setpoints keeps one representative per orbit
    if horizon.mode == Mode::Isc && homogeneous && blocks > 1 {
        for b in 0..blocks - 1 {
            p.add_row(
                vec![(layout.p_fc(0, b), 1.0), (layout.p_fc(0, b + 1), -1.0)],
                Sense::Ge,
                0.0,
                format!("order[{b}]"),
            );
        }
    }

    Ok((p, layout))
}

/// Reads a raw solution vector back into a typed schedule, rounding binaries
/// and re-verifying integrality, gating, and the demand balance.
pub fn extract_schedule(
    layout: &VariableLayout,
    horizon: &HorizonSpec,
    cell: &BatteryCellParams,
    stacks: &[FcStackParams],
    profile: &PowerProfile,
    values: &[f64],
) -> Result<Schedule> {
    if values.len() != layout.num_vars() {
        return Err(EmsError::Validation(format!(
            "solution vector has {} entries, layout expects {}",
            values.len(),
            layout.num_vars()
        )));
    }
    if stacks.len() != layout.n_stacks || profile.demand.len() != layout.n_steps {
        return Err(EmsError::Validation(
            "stack list or demand profile does not match the layout".into(),
        ));
    }
    let tol = 1e-6;
    let as_bool = |v: f64, what: &str| -> Result<bool> {
        let r = v.round();
        if (v - r).abs() > tol || !(r == 0.0 || r == 1.0) {
            return Err(EmsError::Validation(format!(
                "integrality violated at {what}: value {v}"
            )));
        }
        Ok(r == 1.0)
    };
    let mut steps = Vec::with_capacity(layout.n_steps);
    for i in 0..layout.n_steps {
        let mut stacks_out = Vec::with_capacity(layout.n_stacks);
        let mut total_fc = 0.0;
        for s in 0..layout.n_stacks {
            let b = match layout.mode {
                Mode::Isc => s,
                Mode::Csc => 0,
            };
            let p_kw = values[layout.p_fc(i, b)];
            let on = as_bool(values[layout.on(i, b)], &format!("on[{i}][{b}]"))?;
            let switched = as_bool(values[layout.switch(i, b)], &format!("sw[{i}][{b}]"))?;
            let high_load = as_bool(values[layout.high(i, b)], &format!("hi[{i}][{b}]"))?;
            let idle = as_bool(values[layout.idle(i, b)], &format!("id[{i}][{b}]"))?;
            if on {
                if p_kw < stacks[s].p_min - tol || p_kw > stacks[s].p_max + tol {
                    return Err(EmsError::Validation(format!(
                        "gating violated at gate row, step {i} stack {s}: on at {p_kw} kW"
                    )));
                }
            } else if p_kw.abs() > tol {
                return Err(EmsError::Validation(format!(
                    "gating violated at gate row, step {i} stack {s}: off but {p_kw} kW"
                )));
            }
            total_fc += p_kw;
            stacks_out.push(StackStep { p_kw, on, switched, high_load, idle });
        }
        let p_bat_kw = values[layout.p_bat(i)];
        if (total_fc + p_bat_kw - profile.demand[i]).abs() > tol {
            return Err(EmsError::Validation(format!(
                "demand balance violated at step {i}: {} + {} != {}",
                total_fc, p_bat_kw, profile.demand[i]
            )));
        }
        steps.push(ScheduleStep {
            stacks: stacks_out,
            p_bat_kw,
            current_a: values[layout.i_bat(i)],
            soc_begin: values[layout.soc(i)],
        });
    }
    let last = layout.n_steps - 1;
    // the post-horizon SOC continues the same coulomb-counting recursion the
    // problem's rows encode between steps
    let soc_final = values[layout.soc(last)]
        + soc_step_gain(horizon.dt, cell.capacity_ah) * values[layout.i_bat(last)];
    Ok(Schedule {
        dt: horizon.dt,
        mode: layout.mode,
        steps,
        soc_final,
    })
}
