//! Drive-cycle ingestion and longitudinal vehicle dynamics: speed traces in,
//! electrical power demand out.

use crate::{EmsError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// m/s^2
    pub gravity: f64,
    /// m^2
    pub frontal_area: f64,
    pub rolling_coeff: f64,
    pub drag_coeff: f64,
    /// kg/m^3
    pub air_density: f64,
    /// driveline efficiency, (0, 1]
    pub eff_transmission: f64,
    /// electric machine efficiency, (0, 1]
    pub eff_machine: f64,
    /// fraction of braking power recovered electrically, (0, 1]
    pub eff_regen: f64,
}

impl Default for VehicleParams {
    /// City-bus parameter set used throughout the shipped configs.
    fn default() -> Self {
        VehicleParams {
            mass: 13_500.0,
            gravity: 9.8,
            frontal_area: 7.5,
            rolling_coeff: 0.018,
            drag_coeff: 0.7,
            air_density: 1.29,
            eff_transmission: 0.9,
            eff_machine: 0.85,
            eff_regen: 0.5,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("frontal_area", self.frontal_area),
            ("rolling_coeff", self.rolling_coeff),
            ("drag_coeff", self.drag_coeff),
            ("air_density", self.air_density),
            ("eff_transmission", self.eff_transmission),
            ("eff_machine", self.eff_machine),
            ("eff_regen", self.eff_regen),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(EmsError::Validation(format!(
                    "vehicle parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("eff_transmission", self.eff_transmission),
            ("eff_machine", self.eff_machine),
            ("eff_regen", self.eff_regen),
        ] {
            if v > 1.0 {
                return Err(EmsError::Validation(format!(
                    "efficiency {name} must be <= 1, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Speed-versus-time trace, optionally with a road grade per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveCycle {
    /// (time s, speed m/s), time strictly increasing, speed >= 0
    pub samples: Vec<(f64, f64)>,
    /// rad, same length as samples when present
    pub grade: Option<Vec<f64>>,
}

/// Electrical power demand at fixed step width.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    /// s
    pub dt: f64,
    /// kW per step; positive draws from the powertrain, negative is
    /// recoverable braking power
    pub demand: Vec<f64>,
}

/// Reads a drive cycle from CSV with header `t,v` or `t,v,grade`
/// (seconds, m/s, radians).
pub fn load_drive_cycle(path: &std::path::Path) -> Result<DriveCycle> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => EmsError::Io {
                path: display.clone(),
                source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            },
            _ => EmsError::Parse {
                path: display.clone(),
                line: 0,
                message: e.to_string(),
            },
        })?;
    let headers = reader
        .headers()
        .map_err(|e| EmsError::Parse {
            path: display.clone(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let has_grade = headers.len() >= 3;
    if headers.len() < 2 || headers.get(0) != Some("t") || headers.get(1) != Some("v") {
        return Err(EmsError::Parse {
            path: display,
            line: 1,
            message: format!("expected header `t,v[,grade]`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut samples = Vec::new();
    let mut grade = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = record.map_err(|e| EmsError::Parse {
            path: display.clone(),
            line,
            message: e.to_string(),
        })?;
        let field = |i: usize, name: &str| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| EmsError::Parse {
                    path: display.clone(),
                    line,
                    message: format!("missing column {name}"),
                })?
                .parse::<f64>()
                .map_err(|e| EmsError::Parse {
                    path: display.clone(),
                    line,
                    message: format!("bad {name}: {e}"),
                })
        };
        let t = field(0, "t")?;
        let mut v = field(1, "v")?;
        if v < 0.0 {
            if v > -1e-9 {
                log::warn!("clamping tiny negative speed {v} at line {line} to 0");
                v = 0.0;
            } else {
                return Err(EmsError::Validation(format!(
                    "{display}:{line}: negative speed {v}"
                )));
            }
        }
        if !t.is_finite() || !v.is_finite() {
            return Err(EmsError::Validation(format!(
                "{display}:{line}: non-finite sample"
            )));
        }
        if let Some(&(prev_t, _)) = samples.last() {
            if t <= prev_t {
                return Err(EmsError::Validation(format!(
                    "{display}:{line}: time must be strictly increasing ({prev_t} then {t})"
                )));
            }
        }
        samples.push((t, v));
        if has_grade {
            grade.push(field(2, "grade")?);
        }
    }
    if samples.is_empty() {
        return Err(EmsError::Validation(format!("{display}: no samples")));
    }
    Ok(DriveCycle {
        samples,
        grade: if has_grade { Some(grade) } else { None },
    })
}

/// Mechanical power at the wheel in kW for one sample: rolling resistance,
/// aerodynamic drag, acceleration, and climbing terms.
fn wheel_power_kw(v: f64, accel: f64, grade: f64, p: &VehicleParams) -> f64 {
    let w = p.mass * p.gravity * p.rolling_coeff * v * grade.cos()
        + 0.5 * p.drag_coeff * p.frontal_area * p.air_density * v.powi(3)
        + p.mass * v * accel
        + p.mass * p.gravity * v * grade.sin();
    w / 1000.0
}

/// Converts a drive cycle into electrical power demand: traction power is
/// wheel power inflated by driveline and machine efficiency; braking power is
/// deflated by the regeneration efficiency. Acceleration uses forward
/// differences, repeating the previous value at the final sample.
pub fn power_demand(cycle: &DriveCycle, params: &VehicleParams) -> Result<PowerProfile> {
    params.validate()?;
    let n = cycle.samples.len();
    if n == 0 {
        return Err(EmsError::Validation("empty drive cycle".into()));
    }
    let dt = if n >= 2 {
        let dt = cycle.samples[1].0 - cycle.samples[0].0;
        for w in cycle.samples.windows(2) {
            let step = w[1].0 - w[0].0;
            if (step - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(EmsError::Validation(format!(
                    "non-uniform sample spacing: {dt} s then {step} s"
                )));
            }
        }
        dt
    } else {
        1.0
    };
    let mut accel = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        accel[i] = (cycle.samples[i + 1].1 - cycle.samples[i].1) / dt;
    }
    if n >= 2 {
        accel[n - 1] = accel[n - 2];
    }
    let mut demand = Vec::with_capacity(n);
    for i in 0..n {
        let v = cycle.samples[i].1;
        let grade = cycle.grade.as_ref().map_or(0.0, |g| g[i]);
        let pv = wheel_power_kw(v, accel[i], grade, params);
        let pd = if pv >= 0.0 {
            pv / (params.eff_transmission * params.eff_machine)
        } else {
            pv * params.eff_regen
        };
        demand.push(pd);
    }
    Ok(PowerProfile { dt, demand })
}

/// Zero-order-hold resampling: step `j` of the new profile takes the sample
/// active at time `j * dt_new`. Total duration is preserved to within one
/// output step.
pub fn resample(profile: &PowerProfile, dt_new: f64) -> Result<PowerProfile> {
    if !(dt_new > 0.0) || !dt_new.is_finite() {
        return Err(EmsError::Validation(format!(
            "resample step must be a positive finite number, got {dt_new}"
        )));
    }
    if (dt_new - profile.dt).abs() < 1e-12 {
        return Ok(profile.clone());
    }
    let total = profile.demand.len() as f64 * profile.dt;
    let n_new = ((total / dt_new).round() as usize).max(1);
    let mut demand = Vec::with_capacity(n_new);
    for j in 0..n_new {
        let idx = ((j as f64 * dt_new / profile.dt).floor() as usize).min(profile.demand.len() - 1);
        demand.push(profile.demand[idx]);
    }
    Ok(PowerProfile { dt: dt_new, demand })
}

/// Uniform scaling of the demand (used by desk-scale test scenarios).
pub fn scale(profile: &PowerProfile, factor: f64) -> PowerProfile {
    PowerProfile {
        dt: profile.dt,
        demand: profile.demand.iter().map(|p| p * factor).collect(),
    }
}
