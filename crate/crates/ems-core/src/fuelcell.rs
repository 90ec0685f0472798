//! Fuel-cell stack modeling: quadratic hydrogen-consumption curve, cell
//! polarization voltage, and the four degradation-loss rules (load change,
//! on/off switching, idling, high load) that price stack wear in dollars.
//!
//! Each loss converts a voltage-drop increment to money as the fraction of
//! the stack's allowed lifetime voltage drop, times the stack replacement
//! cost.

use crate::{EmsError, Result};
use serde::{Deserialize, Serialize};

/// Band-membership tolerance (kW) shared by the truth rules, the optimizer's
/// indicator constraints, and the benchmark so all three agree on whether a
/// setpoint counts as idling or high-load.
pub const BAND_EPS_KW: f64 = 1e-6;

/// Stack sizing, operating band, fuel curve, and replacement pricing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FcStackParams {
    pub cell_count: usize,
    /// cm^2
    pub active_area_cm2: f64,
    /// kW
    pub p_min: f64,
    /// kW, ceiling of the idling band
    pub p_low: f64,
    /// kW, floor of the high-load band
    pub p_high: f64,
    /// kW
    pub p_max: f64,
    /// kg/s per kW^2
    pub a_fc: f64,
    /// kg/s per kW
    pub b_fc: f64,
    /// kg/s fixed draw while on
    pub c_fc: f64,
    /// $ replacement cost of one stack
    pub stack_cost: f64,
    /// microvolts of cumulative drop that end the stack's life
    pub v_drop_max_uv: f64,
}

impl Default for FcStackParams {
    fn default() -> Self {
        FcStackParams {
            cell_count: 500,
            active_area_cm2: 280.0,
            p_min: 14.0,
            p_low: 14.0,
            p_high: 56.0,
            p_max: 70.0,
            a_fc: 1e-7,
            b_fc: 1.6e-5,
            c_fc: 2e-5,
            stack_cost: 70.0 * 960.0,
            v_drop_max_uv: 70_000.0,
        }
    }
}

impl FcStackParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.p_min && self.p_min <= self.p_low && self.p_low < self.p_high
            && self.p_high <= self.p_max)
        {
            return Err(EmsError::Validation(format!(
                "power band must satisfy 0 < p_min <= p_low < p_high <= p_max, got \
                 {}/{}/{}/{}",
                self.p_min, self.p_low, self.p_high, self.p_max
            )));
        }
        if self.a_fc < 0.0 {
            return Err(EmsError::Validation(
                "fuel curvature must be nonnegative for a convex objective".into(),
            ));
        }
        if self.c_fc < 0.0 {
            return Err(EmsError::Validation("fixed fuel draw must be nonnegative".into()));
        }
        if !(self.stack_cost > 0.0 && self.v_drop_max_uv > 0.0) {
            return Err(EmsError::Validation(
                "stack cost and lifetime voltage drop must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Voltage-drop rates for the four degrading operating conditions.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DegradationRates {
    /// uV per kW of setpoint change
    pub load_change_uv_per_kw: f64,
    /// uV per on/off event
    pub on_off_uv: f64,
    /// uV per hour spent idling
    pub idling_uv_per_h: f64,
    /// uV per hour spent at high load
    pub high_load_uv_per_h: f64,
}

impl Default for DegradationRates {
    fn default() -> Self {
        DegradationRates {
            load_change_uv_per_kw: 1.79,
            on_off_uv: 13.79,
            idling_uv_per_h: 8.66,
            high_load_uv_per_h: 10.0,
        }
    }
}

impl DegradationRates {
    pub fn validate(&self) -> Result<()> {
        if self.load_change_uv_per_kw < 0.0
            || self.on_off_uv < 0.0
            || self.idling_uv_per_h < 0.0
            || self.high_load_uv_per_h < 0.0
        {
            return Err(EmsError::Validation("degradation rates must be >= 0".into()));
        }
        Ok(())
    }
}

/// Cell polarization constants. The shipped defaults are standard PEM
/// laboratory values; override them in the config when stack data is known.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PolarizationParams {
    /// J/mol
    pub gibbs_energy: f64,
    /// C/mol
    pub faraday: f64,
    /// K
    pub temperature: f64,
    /// V/K, activation (Tafel) coefficient
    pub alpha: f64,
    /// V, concentration-loss constant
    pub beta: f64,
    /// A/cm^2, exchange current density
    pub i0: f64,
    /// A/cm^2, crossover current density
    pub i_loss: f64,
    /// A/cm^2, limiting current density
    pub i_limit: f64,
    /// ohm cm^2
    pub r_ohm: f64,
}

impl Default for PolarizationParams {
    fn default() -> Self {
        PolarizationParams {
            gibbs_energy: 237_200.0,
            faraday: 96_485.0,
            temperature: 298.15,
            alpha: 2e-4,
            beta: 0.05,
            i0: 1e-4,
            i_loss: 2e-3,
            i_limit: 1.5,
            r_ohm: 0.15,
        }
    }
}

impl PolarizationParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gibbs_energy", self.gibbs_energy),
            ("faraday", self.faraday),
            ("temperature", self.temperature),
            ("i0", self.i0),
            ("i_limit", self.i_limit),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(EmsError::Validation(format!(
                    "polarization parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("i_loss", self.i_loss),
            ("r_ohm", self.r_ohm),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(EmsError::Validation(format!(
                    "polarization parameter {name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Hydrogen mass flow (kg/s) at a setpoint. Off consumes nothing; on-band
/// power follows the fitted quadratic.
pub fn fuel_rate(p_fc: f64, on: bool, params: &FcStackParams) -> Result<f64> {
    if !on {
        if p_fc.abs() > BAND_EPS_KW {
            return Err(EmsError::Domain(format!(
                "stack reported off but producing {p_fc} kW"
            )));
        }
        return Ok(0.0);
    }
    if p_fc < params.p_min - BAND_EPS_KW || p_fc > params.p_max + BAND_EPS_KW {
        return Err(EmsError::Domain(format!(
            "setpoint {p_fc} kW outside operating band [{}, {}]",
            params.p_min, params.p_max
        )));
    }
    Ok(params.a_fc * p_fc * p_fc + params.b_fc * p_fc + params.c_fc)
}

/// Electrical output over fuel energy input at an on-band setpoint.
pub fn efficiency(p_fc: f64, params: &FcStackParams, lhv_j_per_kg: f64) -> Result<f64> {
    let mdot = fuel_rate(p_fc, true, params)?;
    if mdot <= 0.0 {
        return Err(EmsError::Domain("zero fuel rate has no efficiency".into()));
    }
    Ok(p_fc * 1000.0 / (mdot * lhv_j_per_kg))
}

/// Cell voltage (V) at a current density (A/cm^2): reversible voltage minus
/// activation, ohmic, and concentration losses.
pub fn polarization_voltage(i_fc: f64, params: &PolarizationParams) -> Result<f64> {
    if i_fc < 0.0 {
        return Err(EmsError::Domain("current density must be >= 0".into()));
    }
    if i_fc >= params.i_limit {
        return Err(EmsError::Domain(format!(
            "current density {i_fc} beyond limiting current {}",
            params.i_limit
        )));
    }
    if i_fc + params.i_loss <= 0.0 {
        return Err(EmsError::Domain("activation term needs i_fc + i_loss > 0".into()));
    }
    let v_ocv = params.gibbs_energy / (2.0 * params.faraday);
    let v_act = params.alpha * params.temperature * ((i_fc + params.i_loss) / params.i0).ln();
    let v_ohm = params.r_ohm * i_fc;
    let v_con = -params.beta * (1.0 - i_fc / params.i_limit).ln();
    Ok(v_ocv - v_act - v_ohm - v_con)
}

/// Least-squares quadratic `mdot = a*p^2 + b*p + c` through measured fuel
/// samples. Negative curvature is refit as a constrained (linear) model so
/// the optimizer objective stays convex; the flag reports when that engaged.
pub fn fit_fuel_curve(samples: &[(f64, f64)]) -> Result<(f64, f64, f64, f64, bool)> {
    if samples.len() < 3 {
        return Err(EmsError::Fit(format!(
            "need at least 3 fuel samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    // normal equations for [a b c] over basis [p^2, p, 1]
    let (mut s1, mut s2, mut s3, mut s4) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut ty0, mut ty1, mut ty2) = (0.0f64, 0.0f64, 0.0f64);
    for &(p, y) in samples {
        s1 += p;
        s2 += p * p;
        s3 += p * p * p;
        s4 += p * p * p * p;
        ty0 += y;
        ty1 += p * y;
        ty2 += p * p * y;
    }
    let m = [[s4, s3, s2], [s3, s2, s1], [s2, s1, n]];
    let rhs = [ty2, ty1, ty0];
    let sol = solve3(m, rhs).ok_or_else(|| EmsError::Fit("rank-deficient fuel samples".into()))?;
    let (mut a, mut b, mut c) = (sol[0], sol[1], sol[2]);
    let mut clamped = false;
    if a < 0.0 {
        // constrained refit with a = 0: plain line in p
        let det = n * s2 - s1 * s1;
        if det.abs() < 1e-12 * (n * s2).max(1.0) {
            return Err(EmsError::Fit("rank-deficient fuel samples".into()));
        }
        a = 0.0;
        b = (n * ty1 - s1 * ty0) / det;
        c = (ty0 * s2 - s1 * ty1) / det;
        clamped = true;
    }
    let mean = ty0 / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(p, y) in samples {
        ss_res += (y - (a * p * p + b * p + c)).powi(2);
        ss_tot += (y - mean).powi(2);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((a, b, c, r2, clamped))
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let mut aug = [[0.0f64; 4]; 3];
    for r in 0..3 {
        aug[r][..3].copy_from_slice(&m[r]);
        aug[r][3] = rhs[r];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| {
            aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap()
        })?;
        if aug[piv][col].abs() < 1e-14 * aug.iter().map(|r| r[col].abs()).fold(1.0, f64::max) {
            return None;
        }
        aug.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = aug[r][col] / aug[col][col];
                for k in col..4 {
                    aug[r][k] -= f * aug[col][k];
                }
            }
        }
    }
    Some([aug[0][3] / aug[0][0], aug[1][3] / aug[1][1], aug[2][3] / aug[2][2]])
}

/// Dollar cost of moving a stack's setpoint by `delta_p` kW (pass the
/// magnitude of the change).
pub fn loss_load_change(delta_p: f64, rates: &DegradationRates, params: &FcStackParams) -> f64 {
    debug_assert!(delta_p >= 0.0);
    delta_p * rates.load_change_uv_per_kw * params.stack_cost / params.v_drop_max_uv
}

/// Dollar cost of one start or stop event.
pub fn loss_on_off(switched: bool, rates: &DegradationRates, params: &FcStackParams) -> f64 {
    if switched {
        rates.on_off_uv * params.stack_cost / params.v_drop_max_uv
    } else {
        0.0
    }
}

/// Dollar cost of spending `dt` seconds on at or below the idling ceiling.
pub fn loss_idling(
    p_fc: f64,
    on: bool,
    dt: f64,
    rates: &DegradationRates,
    params: &FcStackParams,
) -> f64 {
    if on && p_fc <= params.p_low + BAND_EPS_KW {
        dt * rates.idling_uv_per_h * params.stack_cost / (3600.0 * params.v_drop_max_uv)
    } else {
        0.0
    }
}

/// Dollar cost of spending `dt` seconds at or above the high-load floor.
pub fn loss_high_load(p_fc: f64, dt: f64, rates: &DegradationRates, params: &FcStackParams) -> f64 {
    if p_fc >= params.p_high - BAND_EPS_KW {
        dt * rates.high_load_uv_per_h * params.stack_cost / (3600.0 * params.v_drop_max_uv)
    } else {
        0.0
    }
}
