//! Battery pack modeling: equivalent-circuit electrical model (open-circuit
//! voltage plus series resistance), empirical capacity-fade model, and the
//! two linear surrogates (power-to-current map, inverse end-of-life
//! throughput) that keep the optimizer quadratic.
//!
//! Sign conventions, used consistently across the crate:
//! - cell current is charging-positive (the SOC recursion adds `I`),
//! - battery power is discharge-positive (the power balance adds `P_bat`).

use crate::{EmsError, Result};
use serde::{Deserialize, Serialize};

/// Piecewise-linear curve over SOC percent.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// (soc %, value), soc strictly increasing
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(EmsError::Validation(
                "curve needs at least two points".into(),
            ));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(EmsError::Validation(format!(
                    "curve breakpoints must increase: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if points.iter().any(|&(s, v)| !s.is_finite() || !v.is_finite()) {
            return Err(EmsError::Validation("non-finite curve point".into()));
        }
        Ok(Curve { points })
    }

    /// CSV with header `soc_pct,value`.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        Curve::new(load_points(path)?)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Linear interpolation; values outside the breakpoint span are an error.
    pub fn eval(&self, soc: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if soc < lo - 1e-12 || soc > hi + 1e-12 {
            return Err(EmsError::Domain(format!(
                "SOC {soc} outside curve domain [{lo}, {hi}]"
            )));
        }
        let soc = soc.clamp(lo, hi);
        let idx = self
            .points
            .partition_point(|&(s, _)| s <= soc)
            .clamp(1, self.points.len() - 1);
        let (s0, v0) = self.points[idx - 1];
        let (s1, v1) = self.points[idx];
        Ok(v0 + (v1 - v0) * (soc - s0) / (s1 - s0))
    }
}

/// Reads a two-column numeric CSV (one header line) into (x, y) pairs.
pub fn load_points(path: &std::path::Path) -> Result<Vec<(f64, f64)>> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| EmsError::Io {
            path: display.clone(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        })?;
    let mut points = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| EmsError::Parse {
            path: display.clone(),
            line,
            message: e.to_string(),
        })?;
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| EmsError::Parse {
                    path: display.clone(),
                    line,
                    message: "missing column".into(),
                })?
                .parse()
                .map_err(|e| EmsError::Parse {
                    path: display.clone(),
                    line,
                    message: format!("{e}"),
                })
        };
        points.push((parse(0)?, parse(1)?));
    }
    Ok(points)
}

/// Single-cell electrical and aging parameters.
#[derive(Debug, Clone)]
pub struct BatteryCellParams {
    /// Ah
    pub capacity_ah: f64,
    pub ocv: Curve,
    /// ohm
    pub r0: Curve,
    /// A, charging-positive convention: i_min < 0 < i_max
    pub i_min: f64,
    pub i_max: f64,
    /// K
    pub temperature: f64,
    /// aging activation-energy intercept, J/mol
    pub a_c: f64,
    /// aging activation-energy slope per C-rate, J/mol
    pub b_c: f64,
    /// power-law exponent on Ah throughput
    pub z_exp: f64,
    /// (C-rate, pre-exponent M), keys strictly increasing
    pub m_table: Vec<(f64, f64)>,
    /// J/(mol K)
    pub gas_constant: f64,
}

impl BatteryCellParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.i_min < 0.0 && 0.0 < self.i_max) {
            return Err(EmsError::Validation(format!(
                "current bounds must straddle zero: [{}, {}]",
                self.i_min, self.i_max
            )));
        }
        if !(self.capacity_ah > 0.0) {
            return Err(EmsError::Validation("capacity must be positive".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(EmsError::Validation("temperature must be positive".into()));
        }
        for w in self.m_table.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(EmsError::Validation(
                    "pre-exponent table keys must increase".into(),
                ));
            }
        }
        if self.m_table.is_empty() {
            return Err(EmsError::Validation("pre-exponent table is empty".into()));
        }
        for &(_, v) in &self.ocv.points {
            if v <= 0.0 {
                return Err(EmsError::Validation("OCV must be positive".into()));
            }
        }
        for &(_, v) in &self.r0.points {
            if v <= 0.0 {
                return Err(EmsError::Validation("R0 must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Pack-level sizing and pricing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BatteryPackParams {
    pub cell_count: usize,
    /// kWh
    pub energy_kwh: f64,
    /// $/kWh
    pub price_per_kwh: f64,
}

impl Default for BatteryPackParams {
    fn default() -> Self {
        BatteryPackParams {
            cell_count: 7594,
            energy_kwh: 90.0,
            price_per_kwh: 178.41,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    /// %
    pub soc: f64,
    /// Ah moved through the cell since the start of accounting
    pub ah_throughput: f64,
    /// % capacity lost
    pub q_loss: f64,
    /// % of initial capacity remaining
    pub soh: f64,
}

impl BatteryState {
    pub fn fresh(soc: f64) -> Self {
        BatteryState {
            soc,
            ah_throughput: 0.0,
            q_loss: 0.0,
            soh: 100.0,
        }
    }
}

/// Fitted linear maps: cell current from (cell power, SOC), and inverse
/// end-of-life throughput from C-rate.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BatterySurrogate {
    /// A per W (cell power is W, discharge-positive)
    pub a_bat: f64,
    /// A per SOC-%
    pub b_bat: f64,
    /// 1/Ah per C-rate (clamped to >= 0 for objective convexity)
    pub a_d: f64,
    /// 1/Ah
    pub b_d: f64,
    pub r_squared_current: f64,
    /// SOC % span of the current-map fit
    pub soc_range: (f64, f64),
    /// W/cell span of the current-map fit
    pub power_range: (f64, f64),
    /// true when the raw end-of-life slope was negative and clamped to zero
    pub eol_slope_clamped: bool,
}

impl BatterySurrogate {
    /// Cell current (A, charging-positive) predicted from cell power
    /// (W, discharge-positive) and SOC (%).
    pub fn current(&self, p_cell_w: f64, soc: f64) -> f64 {
        self.a_bat * p_cell_w + self.b_bat * soc
    }
}

/// SOC (%) after one step of constant current (A, charging-positive),
/// without throughput bookkeeping.
pub fn soc_after_step(
    soc: f64,
    current: f64,
    dt: f64,
    params: &BatteryCellParams,
) -> Result<f64> {
    let next = soc + 100.0 * dt * current / (3600.0 * params.capacity_ah);
    if !(0.0..=100.0).contains(&next) {
        return Err(EmsError::Domain(format!(
            "SOC left [0, 100]: {next:.3} % after {dt} s at {current} A"
        )));
    }
    Ok(next)
}

/// Advances SOC and Ah throughput over one step of constant current
/// (A, charging-positive).
pub fn soc_step(
    state: &BatteryState,
    current: f64,
    dt: f64,
    params: &BatteryCellParams,
) -> Result<BatteryState> {
    if !(dt > 0.0) {
        return Err(EmsError::Validation(format!("dt must be positive, got {dt}")));
    }
    let soc = soc_after_step(state.soc, current, dt, params)?;
    Ok(BatteryState {
        soc,
        ah_throughput: state.ah_throughput + current.abs() * dt / 3600.0,
        q_loss: state.q_loss,
        soh: state.soh,
    })
}

/// Terminal voltage under the charging-positive current convention.
pub fn terminal_voltage(soc: f64, current: f64, params: &BatteryCellParams) -> Result<f64> {
    Ok(params.ocv.eval(soc)? + params.r0.eval(soc)? * current)
}

/// Inverts cell power (W, discharge-positive) to cell current
/// (A, charging-positive) through the equivalent circuit:
/// `P = -OCV*I - R0*I^2`, taking the root that vanishes at zero power.
pub fn power_to_current_exact(
    p_cell_w: f64,
    soc: f64,
    params: &BatteryCellParams,
) -> Result<f64> {
    let ocv = params.ocv.eval(soc)?;
    let r0 = params.r0.eval(soc)?;
    let disc = ocv * ocv - 4.0 * r0 * p_cell_w;
    if disc < 0.0 {
        return Err(EmsError::Domain(format!(
            "power {p_cell_w} W/cell exceeds battery capability at SOC {soc} %"
        )));
    }
    Ok(-(ocv - disc.sqrt()) / (2.0 * r0))
}

/// Cell power (W, discharge-positive) delivered at a given current — the
/// inverse of [`power_to_current_exact`].
pub fn current_to_power(current: f64, soc: f64, params: &BatteryCellParams) -> Result<f64> {
    let ocv = params.ocv.eval(soc)?;
    let r0 = params.r0.eval(soc)?;
    Ok(-ocv * current - r0 * current * current)
}

/// Least-squares fit of `I = a*P_cell + b*SOC` on a regular grid.
pub fn fit_current_surrogate(
    params: &BatteryCellParams,
    soc_range: (f64, f64),
    power_range_w: (f64, f64),
    grid: (usize, usize),
) -> Result<(f64, f64, f64)> {
    let (ns, np) = grid;
    if ns < 10 || np < 10 {
        return Err(EmsError::Fit(format!(
            "current-map grid must be at least 10x10, got {ns}x{np}"
        )));
    }
    let (mut spp, mut sps, mut sss) = (0.0f64, 0.0f64, 0.0f64);
    let (mut spi, mut ssi) = (0.0f64, 0.0f64);
    let mut currents = Vec::with_capacity(ns * np);
    for a in 0..ns {
        let soc = soc_range.0 + (soc_range.1 - soc_range.0) * a as f64 / (ns - 1) as f64;
        for b in 0..np {
            let p =
                power_range_w.0 + (power_range_w.1 - power_range_w.0) * b as f64 / (np - 1) as f64;
            let i = power_to_current_exact(p, soc, params)?;
            spp += p * p;
            sps += p * soc;
            sss += soc * soc;
            spi += p * i;
            ssi += soc * i;
            currents.push((p, soc, i));
        }
    }
    let det = spp * sss - sps * sps;
    if det.abs() < 1e-12 * (spp * sss).max(1.0) {
        return Err(EmsError::Fit("degenerate current-map grid".into()));
    }
    let a_bat = (spi * sss - ssi * sps) / det;
    let b_bat = (ssi * spp - spi * sps) / det;
    let mean = currents.iter().map(|&(_, _, i)| i).sum::<f64>() / currents.len() as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(p, s, i) in &currents {
        ss_res += (i - (a_bat * p + b_bat * s)).powi(2);
        ss_tot += (i - mean).powi(2);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((a_bat, b_bat, r2))
}

fn pre_exponent(c_rate: f64, params: &BatteryCellParams) -> f64 {
    let t = &params.m_table;
    if c_rate <= t[0].0 {
        return t[0].1;
    }
    if c_rate >= t[t.len() - 1].0 {
        return t[t.len() - 1].1;
    }
    let idx = t.partition_point(|&(c, _)| c <= c_rate).clamp(1, t.len() - 1);
    let (c0, m0) = t[idx - 1];
    let (c1, m1) = t[idx];
    m0 + (m1 - m0) * (c_rate - c0) / (c1 - c0)
}

/// Capacity fade (% of initial capacity) after `ah` amp-hours of throughput
/// at a given C-rate and temperature: an Arrhenius factor with activation
/// energy `a_c + b_c*c_rate` times a power law in throughput.
pub fn capacity_loss(c_rate: f64, temperature: f64, ah: f64, params: &BatteryCellParams) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(EmsError::Domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if c_rate < 0.0 || ah < 0.0 {
        return Err(EmsError::Domain(
            "c_rate and throughput must be nonnegative".into(),
        ));
    }
    let m = pre_exponent(c_rate, params);
    let ea = params.a_c + params.b_c * c_rate;
    Ok(m * (-ea / (params.gas_constant * temperature)).exp() * ah.powf(params.z_exp))
}

/// Ah throughput at which capacity fade reaches 20 % (end of life), from the
/// closed-form inversion of [`capacity_loss`].
pub fn ah_eol(c_rate: f64, temperature: f64, params: &BatteryCellParams) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(EmsError::Domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if c_rate < 0.0 {
        return Err(EmsError::Domain("c_rate must be nonnegative".into()));
    }
    let m = pre_exponent(c_rate, params);
    let ea = params.a_c + params.b_c * c_rate;
    let k = m * (-ea / (params.gas_constant * temperature)).exp();
    Ok((20.0 / k).powf(1.0 / params.z_exp))
}

/// Least-squares line `1/Ah_EOL = a_d*c + b_d` over the supplied C-rates.
/// A negative slope is clamped to zero (the objective needs `a_d >= 0` for
/// convexity) with the intercept refit as the mean.
pub fn fit_eol_surrogate(
    params: &BatteryCellParams,
    c_rates: &[f64],
    temperature: f64,
) -> Result<(f64, f64, bool)> {
    if c_rates.len() < 2 {
        return Err(EmsError::Fit("need at least two C-rate samples".into()));
    }
    let n = c_rates.len() as f64;
    let ys: Vec<f64> = c_rates
        .iter()
        .map(|&c| ah_eol(c, temperature, params).map(|a| 1.0 / a))
        .collect::<Result<_>>()?;
    let sx: f64 = c_rates.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = c_rates.iter().map(|c| c * c).sum();
    let sxy: f64 = c_rates.iter().zip(&ys).map(|(c, y)| c * y).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-18 {
        return Err(EmsError::Fit("degenerate C-rate samples".into()));
    }
    let a = (n * sxy - sx * sy) / det;
    let b = (sy * sxx - sx * sxy) / det;
    if a < 0.0 {
        Ok((0.0, sy / n, true))
    } else {
        Ok((a, b, false))
    }
}

/// Pack-level degradation cost ($) of moving current `i` (A per cell) for
/// `dt` seconds: the cell-life fraction consumed, priced at the pack
/// replacement value `energy * price`.
pub fn pack_degradation_cost_step(
    current: f64,
    dt: f64,
    surrogate: &BatterySurrogate,
    cell: &BatteryCellParams,
    pack: &BatteryPackParams,
) -> f64 {
    let i_plus = current.abs();
    (surrogate.a_d * i_plus * i_plus / cell.capacity_ah + surrogate.b_d * i_plus)
        * (dt / 7200.0)
        * pack.energy_kwh
        * pack.price_per_kwh
}

/// Per-cell share of [`pack_degradation_cost_step`].
pub fn degradation_cost_step(
    current: f64,
    dt: f64,
    surrogate: &BatterySurrogate,
    cell: &BatteryCellParams,
    pack: &BatteryPackParams,
) -> f64 {
    pack_degradation_cost_step(current, dt, surrogate, cell, pack) / pack.cell_count as f64
}

/// Pack degradation cost ($) over one step from the exact aging path: the
/// Ah increment over twice the end-of-life throughput at this step's C-rate,
/// priced at the pack replacement value.
pub fn pack_degradation_cost_exact(
    current: f64,
    dt: f64,
    cell: &BatteryCellParams,
    pack: &BatteryPackParams,
) -> Result<f64> {
    let i_plus = current.abs();
    if i_plus == 0.0 {
        return Ok(0.0);
    }
    let c_rate = i_plus / cell.capacity_ah;
    let eol = ah_eol(c_rate, cell.temperature, cell)?;
    let delta_ah = i_plus * dt / 3600.0;
    Ok(delta_ah / (2.0 * eol) * pack.energy_kwh * pack.price_per_kwh)
}
