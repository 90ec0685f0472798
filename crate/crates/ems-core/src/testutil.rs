//! Shared fixtures for unit tests: default parameter sets wired to the
//! shipped curve data, plus small horizon builders.

use crate::battery::{self, BatteryCellParams, BatterySurrogate, Curve};
use crate::formulation::{HorizonSpec, Mode};

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

pub fn test_cell() -> BatteryCellParams {
    BatteryCellParams {
        capacity_ah: 3.2,
        ocv: Curve::load(&data_path("ocv_curve.csv")).unwrap(),
        r0: Curve::load(&data_path("r0_curve.csv")).unwrap(),
        i_min: -3.84,
        i_max: 3.84,
        temperature: 298.15,
        a_c: 31_700.0,
        b_c: 370.3,
        z_exp: 0.55,
        m_table: vec![(0.5, 31_630.0), (2.0, 21_681.0), (6.0, 12_934.0), (10.0, 15_512.0)],
        gas_constant: 8.314,
    }
}

pub fn test_surrogate(cell: &BatteryCellParams) -> BatterySurrogate {
    let p_cell_max = 12.0;
    let (a_bat, b_bat, r2) =
        battery::fit_current_surrogate(cell, (20.0, 90.0), (-p_cell_max, p_cell_max), (25, 25))
            .unwrap();
    let cs: Vec<f64> = (0..20).map(|k| 0.5 + 9.5 * k as f64 / 19.0).collect();
    let (a_d, b_d, clamped) = battery::fit_eol_surrogate(cell, &cs, cell.temperature).unwrap();
    BatterySurrogate {
        a_bat,
        b_bat,
        a_d,
        b_d,
        r_squared_current: r2,
        soc_range: (20.0, 90.0),
        power_range: (-p_cell_max, p_cell_max),
        eol_slope_clamped: clamped,
    }
}

/// Horizon with a free terminal window, dt = 1 s, and all stacks starting
/// off at zero power.
pub fn small_horizon(n_steps: usize, n_stacks: usize, mode: Mode) -> HorizonSpec {
    HorizonSpec {
        n_steps,
        dt: 1.0,
        n_stacks,
        mode,
        soc_initial: 50.0,
        soc_final_min: 20.0,
        soc_final_max: 90.0,
        soc_min: 20.0,
        soc_max: 90.0,
        h2_price: 4.0,
        prev_power: vec![0.0; n_stacks],
        prev_on: vec![false; n_stacks],
    }
}

/// Per-test scratch directory.
pub fn tmp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "ems-{tag}-{}-{:?}",
        std::process::id(),
        std::thread::current().id()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
