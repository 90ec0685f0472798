//! Cost accounting and reporting: per-category cost breakdowns, step-level
//! simulation traces with CSV round-tripping, and side-by-side run
//! comparisons rendered as JSON and an aligned text table.

use crate::battery::{self, BatteryCellParams, BatteryPackParams, BatterySurrogate};
use crate::formulation::{HorizonSpec, Schedule};
use crate::fuelcell::{self, DegradationRates, FcStackParams};
use crate::{EmsError, Result};
use serde::{Deserialize, Serialize};
use std::io::Write as _;

/// Dollar cost split by source. `total` always equals the sum of the parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub battery_degradation: f64,
    pub h2_cost: f64,
    pub fc_idling: f64,
    pub fc_high_load: f64,
    pub fc_load_change: f64,
    pub fc_on_off: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub const CATEGORIES: [&'static str; 6] = [
        "battery degradation",
        "hydrogen",
        "fc idling",
        "fc high load",
        "fc load change",
        "fc on/off",
    ];

    pub fn parts(&self) -> [f64; 6] {
        [
            self.battery_degradation,
            self.h2_cost,
            self.fc_idling,
            self.fc_high_load,
            self.fc_load_change,
            self.fc_on_off,
        ]
    }

    /// Recomputes `total` from the parts.
    pub fn seal(mut self) -> Self {
        self.total = self.parts().iter().sum();
        self
    }

    pub fn add(&mut self, other: &CostBreakdown) {
        self.battery_degradation += other.battery_degradation;
        self.h2_cost += other.h2_cost;
        self.fc_idling += other.fc_idling;
        self.fc_high_load += other.fc_high_load;
        self.fc_load_change += other.fc_load_change;
        self.fc_on_off += other.fc_on_off;
        self.total += other.total;
    }

    /// All parts nonnegative and total consistent with their sum.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in Self::CATEGORIES.iter().zip(self.parts()) {
            if v < 0.0 {
                return Err(EmsError::Validation(format!("negative {name} cost: {v}")));
            }
        }
        let sum: f64 = self.parts().iter().sum();
        if (self.total - sum).abs() > 1e-9 * sum.abs().max(1.0) {
            return Err(EmsError::Validation(format!(
                "total {} drifted from part sum {sum}",
                self.total
            )));
        }
        Ok(())
    }
}

/// One simulated step: the applied actions, the battery's true response, and
/// the incremental cost of the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// s since the start of the run
    pub t: f64,
    /// kW demand after any curtailment
    pub demand_kw: f64,
    /// kW per stack
    pub stack_p_kw: Vec<f64>,
    pub stack_on: Vec<bool>,
    /// kW, discharge-positive
    pub p_bat_kw: f64,
    /// A per cell, charging-positive
    pub current_a: f64,
    /// % at the beginning of the step
    pub soc: f64,
    /// cost incurred during this step
    pub cost: CostBreakdown,
}

/// Step-by-step record of a simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    /// s
    pub dt: f64,
    pub steps: Vec<TraceStep>,
    /// % after the last step
    pub soc_final: f64,
}

impl SimulationTrace {
    pub fn n_stacks(&self) -> usize {
        self.steps.first().map_or(0, |s| s.stack_p_kw.len())
    }
}

/// Sums a trace's per-step increments into one breakdown.
pub fn account_costs(trace: &SimulationTrace) -> CostBreakdown {
    let mut out = CostBreakdown::default();
    for s in &trace.steps {
        out.add(&s.cost);
    }
    // rebuild the total from parts so accumulation error cannot drift it
    out.seal()
}

/// Writes a trace as CSV (`{}`-formatted floats round-trip exactly).
pub fn write_trace_csv(trace: &SimulationTrace, path: &std::path::Path) -> Result<()> {
    let m = trace.n_stacks();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| EmsError::Io {
        path: path.display().to_string(),
        source: e,
    })?);
    let io_err = |e: std::io::Error| EmsError::Io { path: path.display().to_string(), source: e };
    let mut header = vec!["t_s".to_string(), "demand_kw".to_string()];
    for j in 0..m {
        header.push(format!("p_fc{j}_kw"));
    }
    for j in 0..m {
        header.push(format!("on{j}"));
    }
    header.extend(
        [
            "p_bat_kw",
            "i_bat_a",
            "soc_pct",
            "cost_bat",
            "cost_h2",
            "cost_idle",
            "cost_high",
            "cost_load_change",
            "cost_on_off",
        ]
        .map(String::from),
    );
    writeln!(f, "{}", header.join(",")).map_err(io_err)?;
    for s in &trace.steps {
        let mut row = vec![s.t.to_string(), s.demand_kw.to_string()];
        row.extend(s.stack_p_kw.iter().map(|p| p.to_string()));
        row.extend(s.stack_on.iter().map(|&o| if o { "1" } else { "0" }.to_string()));
        row.push(s.p_bat_kw.to_string());
        row.push(s.current_a.to_string());
        row.push(s.soc.to_string());
        row.push(s.cost.battery_degradation.to_string());
        row.push(s.cost.h2_cost.to_string());
        row.push(s.cost.fc_idling.to_string());
        row.push(s.cost.fc_high_load.to_string());
        row.push(s.cost.fc_load_change.to_string());
        row.push(s.cost.fc_on_off.to_string());
        writeln!(f, "{}", row.join(",")).map_err(io_err)?;
    }
    // footer row is not CSV-friendly; the final SOC is recoverable from the
    // last step, so persist it in a sibling key file only when needed
    f.flush().map_err(io_err)?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]. The final SOC is
/// reconstructed from the last step's state and current.
pub fn read_trace_csv(path: &std::path::Path, capacity_ah: f64, dt: f64) -> Result<SimulationTrace> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| EmsError::Io {
            path: display.clone(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| EmsError::Parse { path: display.clone(), line: 1, message: e.to_string() })?
        .clone();
    let m = headers.iter().filter(|h| h.starts_with("p_fc") && h.ends_with("_kw")).count();
    let mut steps = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| EmsError::Parse {
            path: display.clone(),
            line,
            message: e.to_string(),
        })?;
        let num = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| EmsError::Parse {
                    path: display.clone(),
                    line,
                    message: format!("missing column {i}"),
                })?
                .parse()
                .map_err(|e| EmsError::Parse {
                    path: display.clone(),
                    line,
                    message: format!("{e}"),
                })
        };
        let mut col = 0;
        let mut next = || -> Result<f64> {
            let v = num(col);
            col += 1;
            v
        };
        let t = next()?;
        let demand_kw = next()?;
        let stack_p_kw: Vec<f64> = (0..m).map(|_| next()).collect::<Result<_>>()?;
        let stack_on: Vec<bool> = (0..m)
            .map(|_| next().map(|v| v != 0.0))
            .collect::<Result<_>>()?;
        let p_bat_kw = next()?;
        let current_a = next()?;
        let soc = next()?;
        let cost = CostBreakdown {
            battery_degradation: next()?,
            h2_cost: next()?,
            fc_idling: next()?,
            fc_high_load: next()?,
            fc_load_change: next()?,
            fc_on_off: next()?,
            total: 0.0,
        }
        .seal();
        steps.push(TraceStep {
            t,
            demand_kw,
            stack_p_kw,
            stack_on,
            p_bat_kw,
            current_a,
            soc,
            cost,
        });
    }
    if steps.is_empty() {
        return Err(EmsError::Parse {
            path: display,
            line: 2,
            message: "trace has no steps".into(),
        });
    }
    let last = steps.last().unwrap();
    let soc_final = last.soc + 100.0 * dt * last.current_a / (3600.0 * capacity_ah);
    Ok(SimulationTrace { dt, steps, soc_final })
}

/// Per-category deltas between two runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub label_a: String,
    pub label_b: String,
    pub a: CostBreakdown,
    pub b: CostBreakdown,
    /// b − a per category, then total
    pub delta: Vec<f64>,
    /// 100·(b − a)/a per category (None when a = 0), then total
    pub percent: Vec<Option<f64>>,
}

/// Compares two accounted runs over the same demand profile.
pub fn compare(
    label_a: &str,
    run_a: (&SimulationTrace, &CostBreakdown),
    label_b: &str,
    run_b: (&SimulationTrace, &CostBreakdown),
) -> Result<ComparisonReport> {
    let (ta, ca) = run_a;
    let (tb, cb) = run_b;
    if ta.steps.len() != tb.steps.len()
        || ta
            .steps
            .iter()
            .zip(&tb.steps)
            .any(|(x, y)| (x.demand_kw - y.demand_kw).abs() > 1e-9)
    {
        return Err(EmsError::Validation(
            "runs were simulated on different demand profiles".into(),
        ));
    }
    let mut delta = Vec::with_capacity(7);
    let mut percent = Vec::with_capacity(7);
    for (x, y) in ca.parts().iter().zip(cb.parts()).chain([(&ca.total, cb.total)]) {
        delta.push(y - x);
        percent.push(if x.abs() > 0.0 { Some(100.0 * (y - x) / x) } else { None });
    }
    Ok(ComparisonReport {
        label_a: label_a.to_string(),
        label_b: label_b.to_string(),
        a: *ca,
        b: *cb,
        delta,
        percent,
    })
}

impl std::fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<22} {:>14} {:>14} {:>14} {:>10}",
            "category", self.label_a, self.label_b, "delta", "delta %"
        )?;
        let names = CostBreakdown::CATEGORIES.iter().copied().chain(["total"]);
        let a = self.a.parts().into_iter().chain([self.a.total]);
        let b = self.b.parts().into_iter().chain([self.b.total]);
        for ((((name, va), vb), d), p) in
            names.zip(a).zip(b).zip(&self.delta).zip(&self.percent)
        {
            let pct = match p {
                Some(p) => format!("{p:+.2}%"),
                None => "-".to_string(),
            };
            writeln!(f, "{name:<22} {va:>14.6} {vb:>14.6} {d:>+14.6} {pct:>10}")?;
        }
        Ok(())
    }
}

/// Re-prices a solved schedule with the optimizer's own cost model (fitted
/// battery surrogate, stored indicator states). At an optimum this equals
/// the solver objective, which makes it the cross-check that the objective
/// coefficients and the constraint epigraphs agree.
pub fn account_schedule_surrogate(
    schedule: &Schedule,
    horizon: &HorizonSpec,
    stacks: &[FcStackParams],
    rates: &DegradationRates,
    cell: &BatteryCellParams,
    pack: &BatteryPackParams,
    surrogate: &BatterySurrogate,
) -> Result<CostBreakdown> {
    if stacks.len() != horizon.n_stacks {
        return Err(EmsError::Validation("stack list does not match horizon".into()));
    }
    let dt = schedule.dt;
    let mut out = CostBreakdown::default();
    let mut prev_p = horizon.prev_power.clone();
    let mut prev_on = horizon.prev_on.clone();
    for step in &schedule.steps {
        for (j, st) in step.stacks.iter().enumerate() {
            let sp = &stacks[j];
            out.h2_cost += dt * horizon.h2_price * fuelcell::fuel_rate(st.p_kw, st.on, sp)?;
            out.fc_load_change +=
                fuelcell::loss_load_change((st.p_kw - prev_p[j]).abs(), rates, sp);
            out.fc_on_off += fuelcell::loss_on_off(st.on != prev_on[j], rates, sp);
            // the optimizer charges idling through its indicator pair
            if st.idle && st.on {
                out.fc_idling +=
                    dt * rates.idling_uv_per_h * sp.stack_cost / (3600.0 * sp.v_drop_max_uv);
            }
            if st.high_load {
                out.fc_high_load +=
                    dt * rates.high_load_uv_per_h * sp.stack_cost / (3600.0 * sp.v_drop_max_uv);
            }
            prev_p[j] = st.p_kw;
            prev_on[j] = st.on;
        }
        out.battery_degradation +=
            battery::pack_degradation_cost_step(step.current_a, dt, surrogate, cell, pack);
    }
    Ok(out.seal())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{Mode, ScheduleStep, StackStep};

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "ems-report-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn sample_trace() -> SimulationTrace {
        let step = |t: f64, d: f64, p: f64, on: bool| TraceStep {
            t,
            demand_kw: d,
            stack_p_kw: vec![p, p / 2.0],
            stack_on: vec![on, on],
            p_bat_kw: d - 1.5 * p,
            current_a: -0.123456789123 * p,
            soc: 50.0 + 0.01 * t,
            cost: CostBreakdown {
                battery_degradation: 0.001 * p,
                h2_cost: 0.002 * p,
                fc_idling: 0.0,
                fc_high_load: 0.0003,
                fc_load_change: 0.0,
                fc_on_off: if t == 0.0 { 0.01 } else { 0.0 },
                total: 0.0,
            }
            .seal(),
        };
        SimulationTrace {
            dt: 1.0,
            steps: vec![step(0.0, 40.0, 20.0, true), step(1.0, 38.0, 18.0, true)],
            soc_final: 50.02,
        }
    }

    #[test]
    fn breakdown_seal_and_validate() {
        let c = CostBreakdown {
            battery_degradation: 1.0,
            h2_cost: 2.0,
            fc_idling: 0.5,
            fc_high_load: 0.25,
            fc_load_change: 0.125,
            fc_on_off: 0.0625,
            total: 0.0,
        }
        .seal();
        assert!((c.total - 3.9375).abs() < 1e-15);
        assert!(c.validate().is_ok());
        let mut bad = c;
        bad.total += 1.0;
        assert!(bad.validate().is_err());
        let mut neg = c;
        neg.fc_idling = -0.1;
        assert!(neg.seal().validate().is_err());
    }

    #[test]
    fn accounting_sums_steps() {
        let trace = sample_trace();
        let total = account_costs(&trace);
        assert!(total.validate().is_ok());
        assert!((total.h2_cost - (0.04 + 0.036)).abs() < 1e-12);
        assert!((total.fc_on_off - 0.01).abs() < 1e-15);
    }

    #[test]
    fn trace_csv_round_trips_exactly() {
        let trace = sample_trace();
        let path = tmp("trace.csv");
        write_trace_csv(&trace, &path).unwrap();
        let back = read_trace_csv(&path, 3.2, trace.dt).unwrap();
        assert_eq!(back.steps.len(), trace.steps.len());
        for (a, b) in trace.steps.iter().zip(&back.steps) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.demand_kw, b.demand_kw);
            assert_eq!(a.stack_p_kw, b.stack_p_kw);
            assert_eq!(a.stack_on, b.stack_on);
            assert_eq!(a.current_a, b.current_a);
            assert_eq!(a.soc, b.soc);
            assert!((a.cost.total - b.cost.total).abs() < 1e-9);
        }
        let at = account_costs(&trace);
        let ab = account_costs(&back);
        assert!((at.total - ab.total).abs() < 1e-9);
        std::fs::remove_file(path).unwrap();
    }

    #[test]
    fn comparison_identity_and_rendering() {
        let trace = sample_trace();
        let cost = account_costs(&trace);
        let report = compare("isc", (&trace, &cost), "csc", (&trace, &cost)).unwrap();
        assert!(report.delta.iter().all(|d| d.abs() < 1e-15));
        assert!(report
            .percent
            .iter()
            .flatten()
            .all(|p| p.abs() < 1e-12));
        let text = format!("{report}");
        for name in CostBreakdown::CATEGORIES {
            assert!(text.contains(name), "missing {name} in\n{text}");
        }
        assert!(text.contains("total"));
        // JSON round trip
        let json = serde_json::to_string(&report).unwrap();
        let back: ComparisonReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.a, report.a);

        // different demand is rejected
        let mut other = trace.clone();
        other.steps[0].demand_kw += 1.0;
        let cost2 = account_costs(&other);
        assert!(compare("a", (&trace, &cost), "b", (&other, &cost2)).is_err());
    }

    #[test]
    fn surrogate_accounting_matches_hand_arithmetic() {
        use crate::testutil::{small_horizon, test_cell, test_surrogate};
        let cell = test_cell();
        let pack = BatteryPackParams::default();
        let sur = test_surrogate(&cell);
        let stacks = vec![FcStackParams::default()];
        let rates = DegradationRates::default();
        let horizon = small_horizon(2, 1, Mode::Isc);
        let sp = &stacks[0];

        // step 1: turn on at 30 kW; step 2: ramp to 56 kW (high load)
        let schedule = Schedule {
            dt: 1.0,
            mode: Mode::Isc,
            steps: vec![
                ScheduleStep {
                    stacks: vec![StackStep {
                        p_kw: 30.0,
                        on: true,
                        switched: true,
                        high_load: false,
                        idle: false,
                    }],
                    p_bat_kw: 5.0,
                    current_a: -0.2,
                    soc_begin: 50.0,
                },
                ScheduleStep {
                    stacks: vec![StackStep {
                        p_kw: 56.0,
                        on: true,
                        switched: false,
                        high_load: true,
                        idle: false,
                    }],
                    p_bat_kw: -6.0,
                    current_a: 0.25,
                    soc_begin: 49.998,
                },
            ],
            soc_final: 50.0,
        };
        let c = account_schedule_surrogate(&schedule, &horizon, &stacks, &rates, &cell, &pack, &sur)
            .unwrap();
        let fuel = 4.0
            * (fuelcell::fuel_rate(30.0, true, sp).unwrap()
                + fuelcell::fuel_rate(56.0, true, sp).unwrap());
        assert!((c.h2_cost - fuel).abs() < 1e-12);
        let lc = fuelcell::loss_load_change(30.0, &rates, sp)
            + fuelcell::loss_load_change(26.0, &rates, sp);
        assert!((c.fc_load_change - lc).abs() < 1e-12);
        assert!((c.fc_on_off - fuelcell::loss_on_off(true, &rates, sp)).abs() < 1e-15);
        assert_eq!(c.fc_idling, 0.0);
        assert!(c.fc_high_load > 0.0);
        let bat = battery::pack_degradation_cost_step(-0.2, 1.0, &sur, &cell, &pack)
            + battery::pack_degradation_cost_step(0.25, 1.0, &sur, &cell, &pack);
        assert!((c.battery_degradation - bat).abs() < 1e-12);
        assert!(c.validate().is_ok());
    }
}
