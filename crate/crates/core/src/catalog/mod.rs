//! Built-in cell structures and their closed-form solution routes.

mod fractalina;
mod pillow;

use std::collections::BTreeMap;
use std::path::Path;

use crate::structure::{CellSchema, SchemaError};

pub use fractalina::{
    fractalina_audit, fractalina_class_values, fractalina_form, fractalina_level1_y,
    fractalina_level1_y_by_reduction, fractalina_mismatch, fractalina_primes, fractalina_primes_closed_form,
    fractalina_solve, r1_of_k, FractalinaAudit, FractalinaParams, FractalinaSolution, LevelY, Primes,
};
pub use pillow::{
    pillow_class_values, pillow_config_ratios, pillow_configurations, pillow_form, pillow_solve, pillow_xy,
    PillowParams, PillowSolution,
};

const GASKET_JSON: &str = include_str!("../../schemas/gasket.json");
const FRACTALINA_JSON: &str = include_str!("../../schemas/fractalina.json");
const PILLOW_JSON: &str = include_str!("../../schemas/pillow.json");

pub const BUILTIN_NAMES: [&str; 3] = ["gasket", "fractalina", "pillow"];

fn parse_builtin(text: &str) -> CellSchema {
    CellSchema::from_json(text).expect("built-in schema is valid")
}

/// Equilateral Sierpinski gasket with unit conductances.
pub fn gasket_schema() -> CellSchema {
    parse_builtin(GASKET_JSON)
}

/// Fractalina with class values at the self-similar solution.
pub fn fractalina_schema() -> CellSchema {
    parse_builtin(FRACTALINA_JSON)
}

/// Pillow with class values at the self-similar solution (`C1 = 1`).
pub fn pillow_schema() -> CellSchema {
    parse_builtin(PILLOW_JSON)
}

pub fn builtin(name: &str) -> Option<CellSchema> {
    match name {
        "gasket" => Some(gasket_schema()),
        "fractalina" => Some(fractalina_schema()),
        "pillow" => Some(pillow_schema()),
        _ => None,
    }
}

/// Corner-to-corner resistance of the unit gasket at level `n`: `(2/3)(5/3)^n`.
pub fn gasket_corner_resistance(n: u32) -> f64 {
    2.0 / 3.0 * (5.0f64 / 3.0).powi(n as i32)
}

/// Named schemas, the built-ins unless overridden from a directory.
#[derive(Debug, Clone)]
pub struct Catalog {
    schemas: BTreeMap<String, CellSchema>,
}

impl Default for Catalog {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Catalog {
    pub fn builtin() -> Self {
        let schemas = BUILTIN_NAMES
            .iter()
            .map(|n| (n.to_string(), builtin(n).unwrap()))
            .collect();
        Catalog { schemas }
    }

    /// Built-ins, with `<name>.json` files in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, SchemaError> {
        let mut cat = Self::builtin();
        for name in BUILTIN_NAMES {
            let path = dir.join(format!("{name}.json"));
            if path.exists() {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| SchemaError::Json(format!("{}: {e}", path.display())))?;
                cat.schemas.insert(name.to_string(), CellSchema::from_json(&text)?);
            }
        }
        Ok(cat)
    }

    pub fn get(&self, name: &str) -> Option<&CellSchema> {
        self.schemas.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.schemas.keys().map(String::as_str)
    }

    pub fn gasket(&self) -> &CellSchema {
        &self.schemas["gasket"]
    }

    pub fn fractalina(&self) -> &CellSchema {
        &self.schemas["fractalina"]
    }

    pub fn pillow(&self) -> &CellSchema {
        &self.schemas["pillow"]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{build_level, replicate};

    #[test]
    fn builtin_sizes() {
        let sizes: Vec<_> = BUILTIN_NAMES
            .iter()
            .map(|n| {
                let s = builtin(n).unwrap();
                (s.boundary().len(), s.level1_nodes().len(), s.cell_count())
            })
            .collect();
        assert_eq!(sizes, vec![(3, 6, 3), (5, 12, 3), (4, 6, 2)]);
        assert!(builtin("koch").is_none());
    }

    #[test]
    fn fractalina_embedding() {
        let s = fractalina_schema();
        let got: Vec<_> = (0..5).map(|a| s.boundary_embedding(a)).collect();
        // P1 -> (1, P1), P2 -> (2, P2), P3 -> (3, P3), Q1 -> (3, P1), Q2 -> (3, P2), zero-based here.
        assert_eq!(got, vec![(0, 0), (1, 1), (2, 2), (2, 0), (2, 1)]);
        assert_eq!(build_level(&s, s.class_values(), 1).unwrap().node_count(), 12);
    }

    #[test]
    fn pillow_doubled_edge() {
        let s = pillow_schema();
        let c1 = s.class_values()["C1"];
        let m = s.base_form(s.class_values()).unwrap();
        let fine = replicate(&s, s.weights(), &m).unwrap();
        assert_eq!(fine.conductance("u1", "u2").unwrap(), 2.0 * c1);
        assert_eq!(fine.conductance("v1", "u2").unwrap(), s.class_values()["C2"]);
    }

    #[test]
    fn overrides_replace_builtins() {
        let dir = std::env::temp_dir().join(format!("fractal-forms-cat-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut file = gasket_schema().file().clone();
        file.class_values.insert("side".into(), 2.0);
        std::fs::write(dir.join("gasket.json"), serde_json::to_string(&file).unwrap()).unwrap();
        let cat = Catalog::with_overrides(&dir).unwrap();
        assert_eq!(cat.gasket().class_values()["side"], 2.0);
        assert_eq!(cat.pillow(), &pillow_schema());
        std::fs::write(dir.join("pillow.json"), "{").unwrap();
        assert!(Catalog::with_overrides(&dir).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
