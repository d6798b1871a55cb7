//! Self-similar cell structures and the maps between their levels.
//!
//! A [`CellSchema`] says how `m` copies of a boundary `v0` are glued into the
//! level-1 node set `v1`. [`replicate`] pushes a form on `v0` into every cell
//! and [`renormalize`] traces the result back onto `v0`; the fixed points of
//! that map (up to scale) are the self-similar energies.

mod level;
mod schema;

use crate::network::{NodeId, QuadraticForm, ResistorNetwork};
use crate::Result;

pub use level::{build_level, build_level_from, Address, LevelGraph};
pub use schema::{validate, CellSchema, SchemaEdge, SchemaError, SchemaFile, WeightVector};

fn check_weights(schema: &CellSchema, weights: &WeightVector) -> Result<()> {
    if weights.len() != schema.cell_count() {
        return Err(SchemaError::WeightCount {
            expected: schema.cell_count(),
            found: weights.len(),
        }
        .into());
    }
    Ok(())
}

fn mapped_conductances<'a>(
    schema: &'a CellSchema,
    cell: usize,
    form: &'a QuadraticForm,
    factor: f64,
) -> impl Iterator<Item = (NodeId, NodeId, f64)> + 'a {
    let v1 = schema.level1_nodes();
    form.conductances().map(move |(i, j, c)| {
        (
            v1[schema.image(cell, i)].clone(),
            v1[schema.image(cell, j)].clone(),
            c * factor,
        )
    })
}

/// Form on `v1` obtained by placing `form` on cell `cell` and zero elsewhere.
pub fn pushforward(schema: &CellSchema, cell: usize, form: &QuadraticForm) -> Result<QuadraticForm> {
    let form = schema.on_boundary(form)?;
    let edges: Vec<_> = mapped_conductances(schema, cell, &form, 1.0).collect();
    Ok(QuadraticForm::from_conductances(schema.level1_nodes().to_vec(), edges)?)
}

/// `Ψ(ρ, M) = Σ ρ_i ψ_i M ψ_iᵀ`, a form on `v1`.
pub fn replicate(schema: &CellSchema, weights: &WeightVector, form: &QuadraticForm) -> Result<QuadraticForm> {
    check_weights(schema, weights)?;
    let form = schema.on_boundary(form)?;
    let mut edges = Vec::with_capacity(form.conductances().count() * schema.cell_count());
    for (cell, &w) in weights.as_slice().iter().enumerate() {
        edges.extend(mapped_conductances(schema, cell, &form, w));
    }
    Ok(QuadraticForm::from_conductances(schema.level1_nodes().to_vec(), edges)?)
}

/// `Λ(ρ, M)`: the trace of `Ψ(ρ, M)` back onto `v0`.
pub fn renormalize(schema: &CellSchema, weights: &WeightVector, form: &QuadraticForm) -> Result<QuadraticForm> {
    Ok(replicate(schema, weights, form)?.trace_to(schema.boundary())?)
}

/// Network on `v1` holding one scaled copy of `base` per cell.
///
/// Unlike [`replicate`], parallel edges from different cells stay separate.
pub fn replicate_network(
    schema: &CellSchema,
    weights: &WeightVector,
    base: &ResistorNetwork,
) -> Result<ResistorNetwork> {
    check_weights(schema, weights)?;
    let index = |n: &NodeId| {
        schema
            .boundary()
            .iter()
            .position(|b| b == n)
            .ok_or_else(|| SchemaError::FormMismatch {
                expected: schema.boundary().to_vec(),
                found: base.nodes().to_vec(),
            })
    };
    let v1 = schema.level1_nodes();
    let mut out = ResistorNetwork::with_nodes(v1.iter().cloned())?;
    for (cell, &w) in weights.as_slice().iter().enumerate() {
        for e in base.edges() {
            let (i, j) = (index(&e.u)?, index(&e.v)?);
            out.add_edge(
                v1[schema.image(cell, i)].clone(),
                v1[schema.image(cell, j)].clone(),
                e.conductance * w,
            )?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_relative_eq;

    #[test]
    fn replicate_is_sum_of_pushforwards() {
        let schema = catalog::pillow_schema();
        let m = schema.base_form(schema.class_values()).unwrap();
        let w = WeightVector::new(vec![0.7, 1.9]).unwrap();
        let total = replicate(&schema, &w, &m).unwrap();
        let sum = pushforward(&schema, 0, &m)
            .unwrap()
            .scaled(0.7)
            .add(&pushforward(&schema, 1, &m).unwrap().scaled(1.9))
            .unwrap();
        assert!(total.max_abs_diff(&sum).unwrap() < 1e-15);
    }

    #[test]
    fn replicate_network_keeps_parallel_edges() {
        let schema = catalog::gasket_schema();
        let base = schema.base_network(schema.class_values()).unwrap();
        let w = schema.weights().clone();
        let net = replicate_network(&schema, &w, &base).unwrap();
        assert_eq!(net.edges().len(), 9);
        let form = replicate(&schema, &w, &base.laplacian()).unwrap();
        assert!(net.laplacian().max_abs_diff(&form).unwrap() < 1e-15);
    }

    #[test]
    fn gasket_renormalizes_by_three_fifths() {
        let schema = catalog::gasket_schema();
        let m = schema.base_form(schema.class_values()).unwrap();
        let lam = renormalize(&schema, schema.weights(), &m).unwrap();
        assert!(lam.max_abs_diff(&m.scaled(0.6)).unwrap() < 1e-14);
    }

    #[test]
    fn mismatched_form_is_rejected() {
        let schema = catalog::gasket_schema();
        let other = catalog::pillow_schema();
        let m = other.base_form(other.class_values()).unwrap();
        assert!(replicate(&schema, schema.weights(), &m).is_err());
        let short = WeightVector::uniform(2, 1.0).unwrap();
        let g = schema.base_form(schema.class_values()).unwrap();
        assert!(replicate(&schema, &short, &g).is_err());
    }

    #[test]
    fn renormalize_is_homogeneous() {
        let schema = catalog::fractalina_schema();
        let m = schema.base_form(schema.class_values()).unwrap();
        let once = renormalize(&schema, schema.weights(), &m).unwrap();
        let scaled = renormalize(&schema, schema.weights(), &m.scaled(3.5)).unwrap();
        for (i, j, c) in once.conductances() {
            assert_relative_eq!(scaled.conductance_at(i, j), 3.5 * c, max_relative = 1e-13);
        }
    }
}
