use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::pillow_schema;
use crate::network::{BoundaryValues, QuadraticForm};
use crate::solver::{scalar_bisect, SolveError};
use crate::Result;

/// Pillow conductance classes and the level-1 interior potentials of the
/// first configuration (`v4 = 1`, other corners 0): `x` at `u1`, `y` at `u2`.
///
/// `C1` joins `v1v3` and `v2v4`, `C2` joins `v1v2` and `v3v4`, `C3` joins
/// `v1v4` and `v2v3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PillowParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub x: f64,
    pub y: f64,
}

impl PillowParams {
    /// Fills in `x`, `y` from the conductances.
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        for (name, v) in [("C1", c1), ("C2", c2), ("C3", c3)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SolveError::InvalidOption(format!("pillow {name} = {v} must be positive")).into());
            }
        }
        let (x, y) = pillow_xy(c1, c2, c3)?;
        Ok(PillowParams { c1, c2, c3, x, y })
    }
}

/// Solves `2S x - 2C1 y = C2`, `-2C1 x + 2S y = C3` with `S = C1 + C2 + C3`.
pub fn pillow_xy(c1: f64, c2: f64, c3: f64) -> Result<(f64, f64)> {
    let s = c1 + c2 + c3;
    let det = 4.0 * (s * s - c1 * c1);
    if det == 0.0 || !det.is_finite() {
        return Err(SolveError::Degenerate("singular system for the interior potentials".into()).into());
    }
    let x = (2.0 * s * c2 + 2.0 * c1 * c3) / det;
    let y = (2.0 * s * c3 + 2.0 * c1 * c2) / det;
    Ok((x, y))
}

pub fn pillow_class_values(p: &PillowParams) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("C1".to_string(), p.c1),
        ("C2".to_string(), p.c2),
        ("C3".to_string(), p.c3),
    ])
}

pub fn pillow_form(p: &PillowParams) -> Result<QuadraticForm> {
    Ok(pillow_schema().base_form(&pillow_class_values(p))?)
}

/// The three boundary states: `v4` raised; `v1, v4` raised; `v3, v4` raised.
pub fn pillow_configurations() -> [BoundaryValues; 3] {
    let state = |vals: [f64; 4]| -> BoundaryValues {
        ["v1", "v2", "v3", "v4"].into_iter().zip(vals).collect()
    };
    [
        state([0.0, 0.0, 0.0, 1.0]),
        state([1.0, 0.0, 0.0, 1.0]),
        state([0.0, 0.0, 1.0, 1.0]),
    ]
}

fn ratio_one(c1: f64, c2: f64, c3: f64, x: f64, y: f64) -> f64 {
    let fine = c1 * (1.0 + 2.0 * (x - y).powi(2))
        + c2 * (x * x + 2.0 * y * y + (x - 1.0).powi(2))
        + c3 * (2.0 * x * x + y * y + (y - 1.0).powi(2));
    (c1 + c2 + c3) / fine
}

/// Level-0 over level-1 energy for the three configurations.
pub fn pillow_config_ratios(p: &PillowParams) -> Result<(f64, f64, f64)> {
    let PillowParams { c1, c2, c3, .. } = *p;
    let (x, y) = pillow_xy(c1, c2, c3)?;
    let r1 = ratio_one(c1, c2, c3, x, y);
    let r2 = (2.0 * c1 + 2.0 * c2) / (2.0 * c1 + c2 + c3);
    let r3 = (2.0 * c1 + 2.0 * c3) / (c2 + c3);
    Ok((r1, r2, r3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PillowSolution {
    pub params: PillowParams,
    /// Resistance growth per level.
    pub rho: f64,
}

/// `C2`, `C3` (with `C1 = 1`) making the second and third ratios equal `ρ`.
fn classes_for(rho: f64) -> (f64, f64) {
    let d = 2.0 * (rho - 1.0);
    ((rho * rho - 2.0 * rho + 2.0) / d, (2.0 - rho * rho) / d)
}

/// Bisects the first-configuration mismatch for `ρ` on `(1.01, 1.99)`.
pub fn pillow_solve(tol: f64) -> Result<PillowSolution> {
    let mismatch = |rho: f64| {
        let (c2, c3) = classes_for(rho);
        match pillow_xy(1.0, c2, c3) {
            Ok((x, y)) => ratio_one(1.0, c2, c3, x, y) - rho,
            Err(_) => f64::NAN,
        }
    };
    let rho = scalar_bisect(mismatch, 1.01, 1.99, tol)?;
    let (c2, c3) = classes_for(rho);
    Ok(PillowSolution {
        params: PillowParams::new(1.0, c2, c3)?,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::energy_ratio;
    use crate::structure::{replicate, CellSchema};
    use approx::assert_relative_eq;

    fn solution() -> PillowParams {
        let c3 = 2f64.powf(-1.0 / 3.0);
        PillowParams::new(1.0, c3 + 2f64.powf(1.0 / 3.0), c3).unwrap()
    }

    #[test]
    fn unit_ratios() {
        let p = PillowParams::new(1.0, 1.0, 1.0).unwrap();
        let (_, r2, r3) = pillow_config_ratios(&p).unwrap();
        assert_eq!(r2, 1.0);
        assert_eq!(r3, 2.0);
    }

    #[test]
    fn xy_at_solution() {
        let p = solution();
        assert_relative_eq!(p.x, 2f64.powf(-5.0 / 3.0), epsilon = 1e-15);
        assert_relative_eq!(p.y, 0.5 - 2f64.powf(-5.0 / 3.0), epsilon = 1e-15);
        assert!(0.0 < p.y && p.y < p.x && p.x < 1.0);
    }

    #[test]
    fn xy_is_the_harmonic_extension() {
        let s = pillow_schema();
        for p in [solution(), PillowParams::new(0.4, 1.7, 2.9).unwrap()] {
            let fine = replicate(&s, s.weights(), &pillow_form(&p).unwrap()).unwrap();
            let h = fine.harmonic_extension(&pillow_configurations()[0]).unwrap();
            assert_relative_eq!(h["u1"], p.x, epsilon = 1e-14);
            assert_relative_eq!(h["u2"], p.y, epsilon = 1e-14);
        }
    }

    #[test]
    fn closed_ratios_match_energy_ratio() {
        let s = pillow_schema();
        let p = PillowParams::new(0.8, 1.3, 0.6).unwrap();
        let m = pillow_form(&p).unwrap();
        let (r1, r2, r3) = pillow_config_ratios(&p).unwrap();
        let cfg = pillow_configurations();
        for (r, f) in [r1, r2, r3].into_iter().zip(&cfg) {
            assert_relative_eq!(energy_ratio(&s, &m, f).unwrap(), r, epsilon = 1e-13);
        }
    }

    #[test]
    fn energies_at_solution() {
        let p = solution();
        let m = pillow_form(&p).unwrap();
        let cfg = pillow_configurations();
        let full = |f: &BoundaryValues| f.iter().map(|(n, v)| (n.clone(), v)).collect();
        assert_relative_eq!(m.energy(&full(&cfg[0])).unwrap(), 3.847_322_101_863_073, epsilon = 1e-12);
        assert_relative_eq!(m.energy(&full(&cfg[1])).unwrap(), 2.0 * p.c1 + 2.0 * p.c2, epsilon = 1e-14);
    }

    #[test]
    fn alternative_second_cell_gives_same_network() {
        let s = pillow_schema();
        let mut file = s.file().clone();
        file.cells[1] = [("v1", "v4"), ("v2", "u1"), ("v3", "v3"), ("v4", "u2")]
            .into_iter()
            .map(|(a, b)| (a.into(), b.into()))
            .collect();
        let alt = CellSchema::new(file).unwrap();
        let m = pillow_form(&solution()).unwrap();
        let a = replicate(&s, s.weights(), &m).unwrap();
        let b = replicate(&alt, alt.weights(), &m).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-15);
    }
}
