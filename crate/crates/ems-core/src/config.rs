//! Run configuration: one TOML (or JSON) document describing the vehicle,
//! the demand profile, every model parameter, and the optimizer/benchmark
//! knobs. Loading resolves referenced files relative to the config file and
//! `assemble` turns the document into ready-to-use model objects, fitting
//! the battery surrogates from the shipped curves.

use crate::battery::{self, BatteryCellParams, BatteryPackParams, BatterySurrogate, Curve};
use crate::dp::DpGrids;
use crate::formulation::{HorizonSpec, Mode};
use crate::fuelcell::{DegradationRates, FcStackParams, PolarizationParams};
use crate::mpc::{EmsModels, MpcConfig};
use crate::vehicle::{self, PowerProfile, VehicleParams};
use crate::{EmsError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileSection {
    /// drive-cycle CSV (`t,v[,grade]`), relative to the config file
    pub path: String,
    /// demand multiplier applied after conversion
    pub scale: f64,
    /// optional zero-order-hold resampling step, s
    pub resample_dt: Option<f64>,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            path: "data/cbdc_synthetic.csv".into(),
            scale: 1.0,
            resample_dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatterySection {
    /// Ah per cell
    pub capacity_ah: f64,
    /// A, charging-positive
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
    /// J/(mol K)
    pub gas_constant: f64,
    /// (C-rate, pre-exponent) rows, C-rate strictly increasing
    pub m_table: Vec<(f64, f64)>,
    /// open-circuit-voltage CSV (`soc_pct,value`), relative to the config
    pub ocv_curve: String,
    /// internal-resistance CSV, same format
    pub r0_curve: String,
    pub pack_cells: usize,
    /// kWh
    pub pack_energy_kwh: f64,
    /// $/kWh
    pub pack_price_per_kwh: f64,
    /// % span the current map is fitted over
    pub fit_soc_range: (f64, f64),
    /// W/cell span the current map is fitted over
    pub fit_power_range_w: (f64, f64),
    /// samples per axis of the fit grid
    pub fit_grid: (usize, usize),
    /// C-rates the end-of-life line is fitted over
    pub fit_c_rates: Vec<f64>,
}

impl Default for BatterySection {
    fn default() -> Self {
        BatterySection {
            capacity_ah: 3.2,
            i_min: -3.84,
            i_max: 3.84,
            temperature: 298.15,
            a_c: 31_700.0,
            b_c: 370.3,
            z_exp: 0.55,
            gas_constant: 8.314,
            m_table: vec![
                (0.5, 31_630.0),
                (2.0, 21_681.0),
                (6.0, 12_934.0),
                (10.0, 15_512.0),
            ],
            ocv_curve: "data/ocv_curve.csv".into(),
            r0_curve: "data/r0_curve.csv".into(),
            pack_cells: 7594,
            pack_energy_kwh: 90.0,
            pack_price_per_kwh: 178.41,
            fit_soc_range: (20.0, 90.0),
            fit_power_range_w: (-12.0, 12.0),
            fit_grid: (25, 25),
            fit_c_rates: (0..20).map(|k| 0.5 + 9.5 * k as f64 / 19.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StackSection {
    /// number of identical stacks
    pub count: usize,
    #[serde(flatten)]
    pub params: FcStackParams,
}

impl Default for StackSection {
    fn default() -> Self {
        StackSection { count: 8, params: FcStackParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HorizonSection {
    /// s
    pub dt: f64,
    pub mode: Mode,
    /// %
    pub soc_initial: f64,
    pub soc_final_min: f64,
    pub soc_final_max: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    /// $/kg
    pub h2_price: f64,
}

impl Default for HorizonSection {
    fn default() -> Self {
        HorizonSection {
            dt: 1.0,
            mode: Mode::Isc,
            soc_initial: 50.0,
            soc_final_min: 47.0,
            soc_final_max: 53.0,
            soc_min: 20.0,
            soc_max: 90.0,
            h2_price: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchingChoice {
    MostFractional,
    PseudoCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionChoice {
    BestBound,
    DepthFirstDive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    pub abs_gap_tol: f64,
    pub rel_gap_tol: f64,
    pub kkt_tol: f64,
    pub node_eps: f64,
    pub integrality_tol: f64,
    pub node_limit: usize,
    /// s, unlimited when absent
    pub time_limit_s: Option<f64>,
    pub threads: usize,
    pub branching: BranchingChoice,
    pub node_selection: SelectionChoice,
    pub heuristic_period: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = miqp::SolverOptions::default();
        SolverSection {
            abs_gap_tol: d.abs_gap_tol,
            rel_gap_tol: d.rel_gap_tol,
            kkt_tol: d.kkt_tol,
            node_eps: d.node_eps,
            integrality_tol: d.integrality_tol,
            node_limit: d.node_limit,
            time_limit_s: None,
            threads: d.threads,
            branching: BranchingChoice::PseudoCost,
            node_selection: SelectionChoice::BestBound,
            heuristic_period: d.heuristic_period,
        }
    }
}

impl SolverSection {
    pub fn to_options(&self) -> miqp::SolverOptions {
        miqp::SolverOptions {
            abs_gap_tol: self.abs_gap_tol,
            rel_gap_tol: self.rel_gap_tol,
            kkt_tol: self.kkt_tol,
            node_eps: self.node_eps,
            integrality_tol: self.integrality_tol,
            node_limit: self.node_limit,
            time_limit: self.time_limit_s.map(std::time::Duration::from_secs_f64),
            threads: self.threads,
            branching: match self.branching {
                BranchingChoice::MostFractional => miqp::Branching::MostFractional,
                BranchingChoice::PseudoCost => miqp::Branching::PseudoCost,
            },
            node_selection: match self.node_selection {
                SelectionChoice::BestBound => miqp::NodeSelection::BestBound,
                SelectionChoice::DepthFirstDive => miqp::NodeSelection::DepthFirstDive,
            },
            heuristic_period: self.heuristic_period,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    /// directory run artifacts go under, relative to the working directory
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "runs".into() }
    }
}

/// The full run document. Every section falls back to its default when
/// absent, so a minimal config can be a single override.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub vehicle: VehicleParams,
    pub profile: ProfileSection,
    pub battery: BatterySection,
    pub stack: StackSection,
    pub rates: DegradationRates,
    pub polarization: PolarizationParams,
    pub horizon: HorizonSection,
    pub mpc: MpcConfig,
    pub solver: SolverSection,
    pub dp: DpGrids,
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses TOML or, when that fails and the text looks like JSON, JSON.
    pub fn from_str_auto(text: &str, origin: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            return serde_json::from_str(text).map_err(|e| EmsError::Parse {
                path: origin.to_string(),
                line: e.line(),
                message: e.to_string(),
            });
        }
        toml::from_str(text).map_err(|e| EmsError::Parse {
            path: origin.to_string(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count()),
            message: e.message().to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| EmsError::Validation(format!("config serialization: {e}")))
    }

    /// Field-level sanity checks that do not need the referenced files.
    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.stack.params.validate()?;
        self.rates.validate()?;
        self.dp.validate()?;
        self.mpc.validate(self.horizon.dt)?;
        if self.stack.count == 0 {
            return Err(EmsError::Validation("stack.count must be at least 1".into()));
        }
        if !(self.profile.scale.is_finite() && self.profile.scale > 0.0) {
            return Err(EmsError::Validation(format!(
                "profile.scale must be positive, got {}",
                self.profile.scale
            )));
        }
        let h = &self.horizon;
        if !(h.soc_min <= h.soc_final_min
            && h.soc_final_min <= h.soc_final_max
            && h.soc_final_max <= h.soc_max)
        {
            return Err(EmsError::Validation(format!(
                "SOC windows must nest: min {} <= final [{}, {}] <= max {}",
                h.soc_min, h.soc_final_min, h.soc_final_max, h.soc_max
            )));
        }
        if h.soc_initial < h.soc_min || h.soc_initial > h.soc_max {
            return Err(EmsError::Validation(format!(
                "initial SOC {} outside [{}, {}]",
                h.soc_initial, h.soc_min, h.soc_max
            )));
        }
        if !(h.dt > 0.0 && h.h2_price >= 0.0) {
            return Err(EmsError::Validation(
                "dt must be positive and the hydrogen price non-negative".into(),
            ));
        }
        let b = &self.battery;
        if !(b.capacity_ah > 0.0 && b.i_min < 0.0 && 0.0 < b.i_max) {
            return Err(EmsError::Validation(
                "battery capacity must be positive and current bounds straddle zero".into(),
            ));
        }
        if b.pack_cells == 0 || !(b.pack_energy_kwh > 0.0) || !(b.pack_price_per_kwh > 0.0) {
            return Err(EmsError::Validation("battery pack sizing must be positive".into()));
        }
        if b.fit_c_rates.len() < 2 {
            return Err(EmsError::Validation(
                "need at least two C-rates for the end-of-life fit".into(),
            ));
        }
        if self.solver.threads == 0 {
            return Err(EmsError::Validation("solver.threads must be at least 1".into()));
        }
        self.polarization.validate()?;
        Ok(())
    }
}

/// A config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

/// Reads and validates a config file; `.json` files parse as JSON, anything
/// else as TOML. Referenced data files must exist.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| EmsError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let config = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| EmsError::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?
    } else {
        RunConfig::from_str_auto(&text, &path.display().to_string())?
    };
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let loaded = LoadedConfig { config, base_dir };
    loaded.config.validate()?;
    for rel in [
        &loaded.config.profile.path,
        &loaded.config.battery.ocv_curve,
        &loaded.config.battery.r0_curve,
    ] {
        let p = loaded.resolve(rel);
        if !p.exists() {
            return Err(EmsError::Validation(format!(
                "referenced file does not exist: {}",
                p.display()
            )));
        }
    }
    Ok(loaded)
}

/// Everything a run needs, built from a validated config.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub vehicle: VehicleParams,
    pub profile: PowerProfile,
    pub models: EmsModels,
    /// horizon spanning the whole profile, stacks starting off
    pub horizon: HorizonSpec,
    pub mpc: MpcConfig,
    pub solver_options: miqp::SolverOptions,
    pub grids: DpGrids,
}

impl LoadedConfig {
    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Loads the cycle and curves, fits the battery surrogates, and returns
    /// the ready-to-run bundle.
    pub fn assemble(&self) -> Result<Assembled> {
        let c = &self.config;
        c.validate()?;
        let cycle = vehicle::load_drive_cycle(&self.resolve(&c.profile.path))?;
        let mut profile = vehicle::power_demand(&cycle, &c.vehicle)?;
        if let Some(dt) = c.profile.resample_dt {
            profile = vehicle::resample(&profile, dt)?;
        }
        if (c.profile.scale - 1.0).abs() > 1e-15 {
            profile = vehicle::scale(&profile, c.profile.scale);
        }
        if (profile.dt - c.horizon.dt).abs() > 1e-9 {
            return Err(EmsError::Validation(format!(
                "profile step {} s does not match horizon dt {} s; set profile.resample_dt",
                profile.dt, c.horizon.dt
            )));
        }

        let b = &c.battery;
        let cell = BatteryCellParams {
            capacity_ah: b.capacity_ah,
            ocv: Curve::load(&self.resolve(&b.ocv_curve))?,
            r0: Curve::load(&self.resolve(&b.r0_curve))?,
            i_min: b.i_min,
            i_max: b.i_max,
            temperature: b.temperature,
            a_c: b.a_c,
            b_c: b.b_c,
            z_exp: b.z_exp,
            m_table: b.m_table.clone(),
            gas_constant: b.gas_constant,
        };
        cell.validate()?;
        let pack = BatteryPackParams {
            cell_count: b.pack_cells,
            energy_kwh: b.pack_energy_kwh,
            price_per_kwh: b.pack_price_per_kwh,
        };
        let (a_bat, b_bat, r2) = battery::fit_current_surrogate(
            &cell,
            b.fit_soc_range,
            b.fit_power_range_w,
            b.fit_grid,
        )?;
        let (a_d, b_d, clamped) =
            battery::fit_eol_surrogate(&cell, &b.fit_c_rates, b.temperature)?;
        let surrogate = BatterySurrogate {
            a_bat,
            b_bat,
            a_d,
            b_d,
            r_squared_current: r2,
            soc_range: b.fit_soc_range,
            power_range: b.fit_power_range_w,
            eol_slope_clamped: clamped,
        };
        let models = EmsModels {
            cell,
            pack,
            surrogate,
            stacks: vec![c.stack.params.clone(); c.stack.count],
            rates: c.rates.clone(),
        };
        let horizon = HorizonSpec {
            n_steps: profile.demand.len(),
            dt: profile.dt,
            n_stacks: c.stack.count,
            mode: c.horizon.mode,
            soc_initial: c.horizon.soc_initial,
            soc_final_min: c.horizon.soc_final_min,
            soc_final_max: c.horizon.soc_final_max,
            soc_min: c.horizon.soc_min,
            soc_max: c.horizon.soc_max,
            h2_price: c.horizon.h2_price,
            prev_power: vec![0.0; c.stack.count],
            prev_on: vec![false; c.stack.count],
        };
        horizon.validate()?;
        Ok(Assembled {
            vehicle: c.vehicle.clone(),
            profile,
            models,
            horizon,
            mpc: c.mpc,
            solver_options: c.solver.to_options(),
            grids: c.dp,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::tmp_dir;

    fn workspace_config() -> LoadedConfig {
        LoadedConfig {
            config: RunConfig::default(),
            base_dir: Path::new(env!("CARGO_MANIFEST_DIR")).join("../.."),
        }
    }

    #[test]
    fn defaults_match_published_parameter_set() {
        let c = RunConfig::default();
        assert_eq!(c.vehicle.mass, 13_500.0);
        assert_eq!(c.vehicle.gravity, 9.8);
        assert_eq!(c.vehicle.frontal_area, 7.5);
        assert_eq!(c.vehicle.rolling_coeff, 0.018);
        assert_eq!(c.vehicle.drag_coeff, 0.7);
        assert_eq!(c.vehicle.air_density, 1.29);
        assert_eq!(c.vehicle.eff_transmission, 0.9);
        assert_eq!(c.vehicle.eff_machine, 0.85);
        assert_eq!(c.vehicle.eff_regen, 0.5);
        assert_eq!(c.battery.capacity_ah, 3.2);
        assert_eq!((c.battery.i_min, c.battery.i_max), (-3.84, 3.84));
        assert_eq!(c.battery.temperature, 298.15);
        assert_eq!((c.battery.a_c, c.battery.b_c, c.battery.z_exp), (31_700.0, 370.3, 0.55));
        assert_eq!(c.battery.gas_constant, 8.314);
        assert_eq!(
            c.battery.m_table,
            vec![(0.5, 31_630.0), (2.0, 21_681.0), (6.0, 12_934.0), (10.0, 15_512.0)]
        );
        assert_eq!(c.battery.pack_cells, 7594);
        assert_eq!(c.battery.pack_energy_kwh, 90.0);
        assert_eq!(c.battery.pack_price_per_kwh, 178.41);
        assert_eq!(c.stack.count, 8);
        assert_eq!(c.stack.params.cell_count, 500);
        assert_eq!(
            (c.stack.params.p_min, c.stack.params.p_low, c.stack.params.p_high, c.stack.params.p_max),
            (14.0, 14.0, 56.0, 70.0)
        );
        assert_eq!(
            (c.stack.params.a_fc, c.stack.params.b_fc, c.stack.params.c_fc),
            (1e-7, 1.6e-5, 2e-5)
        );
        assert_eq!(c.stack.params.stack_cost, 67_200.0);
        assert_eq!(c.rates.load_change_uv_per_kw, 1.79);
        assert_eq!(c.rates.on_off_uv, 13.79);
        assert_eq!(c.rates.idling_uv_per_h, 8.66);
        assert_eq!(c.rates.high_load_uv_per_h, 10.0);
        assert_eq!(c.horizon.dt, 1.0);
        assert_eq!(c.horizon.h2_price, 4.0);
        assert_eq!(c.horizon.soc_initial, 50.0);
        assert_eq!((c.horizon.soc_final_min, c.horizon.soc_final_max), (47.0, 53.0));
        assert_eq!((c.horizon.soc_min, c.horizon.soc_max), (20.0, 90.0));
        assert_eq!(c.mpc.horizon_s, 600.0);
        assert_eq!(c.mpc.block_s, 60.0);
        assert_eq!(c.dp.soc_step_pct, 0.02);
        assert_eq!(c.dp.fc_power_step_kw, 5.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn toml_and_json_round_trip() {
        let c = RunConfig::default();
        let toml_text = c.to_toml().unwrap();
        let back = RunConfig::from_str_auto(&toml_text, "mem").unwrap();
        assert_eq!(back, c);
        let json_text = serde_json::to_string_pretty(&c).unwrap();
        let back = RunConfig::from_str_auto(&json_text, "mem").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_document_overrides_one_field() {
        let c = RunConfig::from_str_auto("[horizon]\ndt = 5.0\n", "mem").unwrap();
        assert_eq!(c.horizon.dt, 5.0);
        assert_eq!(c.horizon.h2_price, 4.0);
        assert_eq!(c.stack.count, 8);
    }

    #[test]
    fn validation_rejects_bad_nesting_and_scale() {
        let mut c = RunConfig::default();
        c.horizon.soc_final_min = 10.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.profile.scale = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.solver.threads = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn load_reports_missing_files_by_path() {
        let dir = tmp_dir("cfg");
        let path = dir.join("run.toml");
        std::fs::write(&path, "[profile]\npath = \"nope.csv\"\n").unwrap();
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("nope.csv"), "{err}");
    }

    #[test]
    fn assemble_builds_consistent_bundle() {
        let loaded = workspace_config();
        let a = loaded.assemble().unwrap();
        assert_eq!(a.profile.demand.len(), 600);
        assert_eq!(a.horizon.n_steps, 600);
        assert_eq!(a.models.stacks.len(), 8);
        assert!(a.models.surrogate.r_squared_current >= 0.98);
        assert!(a.models.surrogate.a_d >= 0.0);
        let peak = a.profile.demand.iter().cloned().fold(f64::MIN, f64::max);
        assert!((250.0..=350.0).contains(&peak), "peak demand {peak} kW");
        assert_eq!(a.horizon.mode, Mode::Isc);
    }

    #[test]
    fn assemble_honors_resample_and_scale() {
        let mut loaded = workspace_config();
        loaded.config.profile.resample_dt = Some(5.0);
        loaded.config.profile.scale = 0.5;
        loaded.config.horizon.dt = 5.0;
        let a = loaded.assemble().unwrap();
        assert_eq!(a.profile.demand.len(), 120);
        assert_eq!(a.profile.dt, 5.0);
        let peak = a.profile.demand.iter().cloned().fold(f64::MIN, f64::max);
        assert!(peak < 180.0, "peak {peak}");
        // mismatched dt is refused
        loaded.config.horizon.dt = 1.0;
        assert!(loaded.assemble().is_err());
    }

    #[test]
    fn json_extension_is_parsed_as_json() {
        let dir = tmp_dir("cfgjson");
        let path = dir.join("run.json");
        std::fs::write(&path, serde_json::to_string(&RunConfig::default()).unwrap()).unwrap();
        // the default profile paths resolve against the temp dir and fail
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("does not exist"), "{err}");
    }

    #[test]
    fn shipped_configs_load_and_assemble() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config");

        // the reference document spells out exactly the built-in defaults,
        // apart from paths rewritten to resolve from the config directory
        let reference = load_config(&dir.join("default.toml")).unwrap();
        let mut want = RunConfig::default();
        want.profile.path = "../data/cbdc_synthetic.csv".into();
        want.battery.ocv_curve = "../data/ocv_curve.csv".into();
        want.battery.r0_curve = "../data/r0_curve.csv".into();
        assert_eq!(reference.config, want);

        let desk = load_config(&dir.join("desk_dp.toml")).unwrap();
        let a = desk.assemble().unwrap();
        assert_eq!(a.profile.demand.len(), 120);
        assert_eq!(a.horizon.mode, Mode::Csc);
        assert_eq!(a.models.stacks.len(), 2);

        let low = load_config(&dir.join("mpc_low_demand.toml")).unwrap();
        let a = low.assemble().unwrap();
        assert_eq!(a.profile.demand.len(), 30);
        assert_eq!(a.horizon.mode, Mode::Isc);
        assert!(a.solver_options.time_limit.is_some());
    }
}

