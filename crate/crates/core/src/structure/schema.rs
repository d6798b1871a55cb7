use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NodeId, QuadraticForm, ResistorNetwork};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("schema is empty: {0}")]
    Empty(&'static str),
    #[error("duplicate label `{label}` in {list}")]
    DuplicateLabel { list: &'static str, label: NodeId },
    #[error("boundary node `{0}` is not a level-1 node")]
    BoundaryNotInLevel1(NodeId),
    #[error("cell {cell}: boundary node `{slot}` is not mapped")]
    IncompleteCellMap { cell: usize, slot: NodeId },
    #[error("cell {cell}: `{label}` is not a boundary node")]
    UnknownSlot { cell: usize, label: NodeId },
    #[error("cell {cell}: target `{label}` is not a level-1 node")]
    UnknownTarget { cell: usize, label: NodeId },
    #[error("cell {cell}: two boundary nodes map to `{target}`")]
    NonInjective { cell: usize, target: NodeId },
    #[error("level-1 node `{0}` is not the image of any cell")]
    Uncovered(NodeId),
    #[error("boundary node `{0}` is not the image of any cell map")]
    MissingPreimage(NodeId),
    #[error("edge {u}-{v}: {reason}")]
    BadEdge { u: NodeId, v: NodeId, reason: &'static str },
    #[error("class `{0}` has no value")]
    UnknownClass(String),
    #[error("class `{0}` is not used by any edge")]
    UnusedClass(String),
    #[error("class `{class}`: conductance {value} is not a positive finite number")]
    InvalidClassValue { class: String, value: f64 },
    #[error("expected {expected} weights, found {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("weight {index} is {value}; weights must be positive and finite")]
    InvalidWeight { index: usize, value: f64 },
    #[error("symmetry {index}: {reason}")]
    BadSymmetry { index: usize, reason: String },
    #[error("normalization edge {u}-{v} is not a base edge")]
    BadNormalization { u: NodeId, v: NodeId },
    #[error("form on {found:?} does not live on the boundary {expected:?}")]
    FormMismatch { expected: Vec<NodeId>, found: Vec<NodeId> },
    #[error("invalid schema JSON: {0}")]
    Json(String),
}

/// Positive weights `ρ_i`, one per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self, SchemaError> {
        for (index, &value) in weights.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(SchemaError::InvalidWeight { index, value });
            }
        }
        Ok(WeightVector(weights))
    }

    pub fn uniform(cells: usize, value: f64) -> Result<Self, SchemaError> {
        Self::new(vec![value; cells])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Base edge of the level-0 network together with its conductance class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub class: String,
}

/// On-disk form of a [`CellSchema`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    pub name: String,
    pub boundary: Vec<NodeId>,
    pub level1_nodes: Vec<NodeId>,
    /// One map per cell, from boundary label to level-1 label.
    pub cells: Vec<BTreeMap<NodeId, NodeId>>,
    pub edges: Vec<SchemaEdge>,
    pub class_values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Generators of a symmetry group, as permutations of the boundary.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub symmetries: Vec<BTreeMap<NodeId, NodeId>>,
}

/// Checks a schema description without keeping the result.
pub fn validate(file: &SchemaFile) -> Result<(), SchemaError> {
    CellSchema::new(file.clone()).map(|_| ())
}

/// Validated cell structure: boundary `v0`, level-1 nodes `v1`, one
/// injective map `v0 -> v1` per cell, base edges with conductance classes,
/// weights and an optional symmetry group.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSchema {
    file: SchemaFile,
    v1_index: HashMap<NodeId, usize>,
    maps: Vec<Vec<usize>>,
    embedding: Vec<(usize, usize)>,
    edge_index: Vec<(usize, usize)>,
    weights: WeightVector,
    group: Vec<Vec<usize>>,
}

fn index_labels(list: &'static str, labels: &[NodeId]) -> Result<HashMap<NodeId, usize>, SchemaError> {
    let mut out = HashMap::with_capacity(labels.len());
    for (i, l) in labels.iter().enumerate() {
        if out.insert(l.clone(), i).is_some() {
            return Err(SchemaError::DuplicateLabel {
                list,
                label: l.clone(),
            });
        }
    }
    Ok(out)
}

fn compose(a: &[usize], b: &[usize]) -> Vec<usize> {
    b.iter().map(|&x| a[x]).collect()
}

/// Closure of a set of permutations under composition, identity first.
fn close_group(generators: &[Vec<usize>], n: usize) -> Vec<Vec<usize>> {
    let identity: Vec<usize> = (0..n).collect();
    let mut seen = BTreeSet::from([identity.clone()]);
    let mut group = vec![identity.clone()];
    let mut queue = VecDeque::from([identity]);
    while let Some(g) = queue.pop_front() {
        for s in generators {
            let h = compose(s, &g);
            if seen.insert(h.clone()) {
                group.push(h.clone());
                queue.push_back(h);
            }
        }
    }
    group
}

impl CellSchema {
    pub fn new(file: SchemaFile) -> Result<Self, SchemaError> {
        if file.boundary.is_empty() {
            return Err(SchemaError::Empty("no boundary nodes"));
        }
        if file.cells.is_empty() {
            return Err(SchemaError::Empty("no cells"));
        }
        if file.edges.is_empty() {
            return Err(SchemaError::Empty("no base edges"));
        }
        let v0_index = index_labels("boundary", &file.boundary)?;
        let v1_index = index_labels("level1_nodes", &file.level1_nodes)?;
        for b in &file.boundary {
            if !v1_index.contains_key(b) {
                return Err(SchemaError::BoundaryNotInLevel1(b.clone()));
            }
        }

        let mut maps = Vec::with_capacity(file.cells.len());
        let mut covered = vec![false; file.level1_nodes.len()];
        for (cell, map) in file.cells.iter().enumerate() {
            for key in map.keys() {
                if !v0_index.contains_key(key) {
                    return Err(SchemaError::UnknownSlot {
                        cell,
                        label: key.clone(),
                    });
                }
            }
            let mut row = Vec::with_capacity(file.boundary.len());
            let mut used = BTreeSet::new();
            for slot in &file.boundary {
                let target = map.get(slot).ok_or_else(|| SchemaError::IncompleteCellMap {
                    cell,
                    slot: slot.clone(),
                })?;
                let t = *v1_index.get(target).ok_or_else(|| SchemaError::UnknownTarget {
                    cell,
                    label: target.clone(),
                })?;
                if !used.insert(t) {
                    return Err(SchemaError::NonInjective {
                        cell,
                        target: target.clone(),
                    });
                }
                covered[t] = true;
                row.push(t);
            }
            maps.push(row);
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(SchemaError::Uncovered(file.level1_nodes[i].clone()));
        }

        let mut embedding = Vec::with_capacity(file.boundary.len());
        for a in &file.boundary {
            let target = v1_index[a];
            let hit = maps.iter().enumerate().find_map(|(cell, row)| {
                row.iter().position(|&t| t == target).map(|slot| (cell, slot))
            });
            embedding.push(hit.ok_or_else(|| SchemaError::MissingPreimage(a.clone()))?);
        }

        let mut edge_index = Vec::with_capacity(file.edges.len());
        let mut pairs = BTreeSet::new();
        for e in &file.edges {
            let bad = |reason| SchemaError::BadEdge {
                u: e.u.clone(),
                v: e.v.clone(),
                reason,
            };
            let i = *v0_index.get(&e.u).ok_or_else(|| bad("endpoint is not a boundary node"))?;
            let j = *v0_index.get(&e.v).ok_or_else(|| bad("endpoint is not a boundary node"))?;
            if i == j {
                return Err(bad("self-loop"));
            }
            if !pairs.insert((i.min(j), i.max(j))) {
                return Err(bad("repeated edge"));
            }
            if !file.class_values.contains_key(&e.class) {
                return Err(SchemaError::UnknownClass(e.class.clone()));
            }
            edge_index.push((i, j));
        }
        check_class_values(&file, &file.class_values)?;

        let weights = match &file.weights {
            None => WeightVector::uniform(file.cells.len(), 1.0)?,
            Some(w) if w.len() != file.cells.len() => {
                return Err(SchemaError::WeightCount {
                    expected: file.cells.len(),
                    found: w.len(),
                })
            }
            Some(w) => WeightVector::new(w.clone())?,
        };

        let class_of: BTreeMap<(usize, usize), &str> = edge_index
            .iter()
            .zip(&file.edges)
            .map(|(&(i, j), e)| ((i.min(j), i.max(j)), e.class.as_str()))
            .collect();
        let mut generators = Vec::with_capacity(file.symmetries.len());
        for (index, sym) in file.symmetries.iter().enumerate() {
            let bad = |reason: String| SchemaError::BadSymmetry { index, reason };
            let mut perm = Vec::with_capacity(file.boundary.len());
            for a in &file.boundary {
                let img = sym.get(a).ok_or_else(|| bad(format!("`{a}` is not mapped")))?;
                perm.push(*v0_index.get(img).ok_or_else(|| bad(format!("`{img}` is not a boundary node")))?);
            }
            if sym.len() != file.boundary.len() || perm.iter().collect::<BTreeSet<_>>().len() != perm.len() {
                return Err(bad("not a permutation of the boundary".into()));
            }
            for (&(i, j), class) in &class_of {
                let (p, q) = (perm[i], perm[j]);
                match class_of.get(&(p.min(q), p.max(q))) {
                    Some(c) if c == class => {}
                    _ => {
                        return Err(bad(format!(
                            "edge {}-{} is not carried to an edge of class `{class}`",
                            file.boundary[i], file.boundary[j]
                        )))
                    }
                }
            }
            generators.push(perm);
        }
        let group = close_group(&generators, file.boundary.len());

        Ok(CellSchema {
            file,
            v1_index,
            maps,
            embedding,
            edge_index,
            weights,
            group,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let file: SchemaFile = serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))?;
        Self::new(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("schema serializes")
    }

    pub fn file(&self) -> &SchemaFile {
        &self.file
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    /// Boundary nodes `v0`.
    pub fn boundary(&self) -> &[NodeId] {
        &self.file.boundary
    }

    /// Level-1 nodes `v1`.
    pub fn level1_nodes(&self) -> &[NodeId] {
        &self.file.level1_nodes
    }

    pub fn level1_index(&self, label: &str) -> Option<usize> {
        self.v1_index.get(label).copied()
    }

    pub fn cell_count(&self) -> usize {
        self.maps.len()
    }

    /// `v1` index of `ψ_cell(slot)`.
    pub fn image(&self, cell: usize, slot: usize) -> usize {
        self.maps[cell][slot]
    }

    /// First `(cell, slot)` in row-major order whose image is boundary node `a`.
    pub fn boundary_embedding(&self, a: usize) -> (usize, usize) {
        self.embedding[a]
    }

    pub fn base_edges(&self) -> &[SchemaEdge] {
        &self.file.edges
    }

    /// Base edges as boundary index pairs, in schema order.
    pub fn base_edge_indices(&self) -> &[(usize, usize)] {
        &self.edge_index
    }

    pub fn class_values(&self) -> &BTreeMap<String, f64> {
        &self.file.class_values
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// All symmetries generated by the declared ones, identity first.
    pub fn symmetry_group(&self) -> &[Vec<usize>] {
        &self.group
    }

    /// The first base edge; the default normalization edge.
    pub fn default_normalization(&self) -> (NodeId, NodeId) {
        let e = &self.file.edges[0];
        (e.u.clone(), e.v.clone())
    }

    /// Copy of the schema with replaced class values.
    pub fn with_class_values(&self, values: BTreeMap<String, f64>) -> Result<Self, SchemaError> {
        let mut file = self.file.clone();
        file.class_values = values;
        Self::new(file)
    }

    /// Base network with one edge per base edge, conductance taken from `values`.
    pub fn base_network(&self, values: &BTreeMap<String, f64>) -> Result<ResistorNetwork, SchemaError> {
        check_class_values(&self.file, values)?;
        let mut net = ResistorNetwork::with_nodes(self.file.boundary.iter().cloned())
            .expect("boundary labels are distinct");
        for e in &self.file.edges {
            net.add_edge(e.u.clone(), e.v.clone(), values[&e.class])
                .expect("validated edge");
        }
        Ok(net)
    }

    pub fn base_form(&self, values: &BTreeMap<String, f64>) -> Result<QuadraticForm, SchemaError> {
        Ok(self.base_network(values)?.laplacian())
    }

    /// Reorders `form` to the boundary order, failing if the node sets differ.
    pub fn on_boundary(&self, form: &QuadraticForm) -> Result<QuadraticForm, SchemaError> {
        let mismatch = || SchemaError::FormMismatch {
            expected: self.file.boundary.clone(),
            found: form.nodes().to_vec(),
        };
        if form.nodes() == self.boundary() {
            return Ok(form.clone());
        }
        form.reordered(self.boundary()).map_err(|_| mismatch())
    }

    /// Average of `form` over the symmetry group. `form` must be in boundary order.
    pub fn symmetrize(&self, form: &QuadraticForm) -> QuadraticForm {
        if self.group.len() == 1 {
            return form.clone();
        }
        let share = 1.0 / self.group.len() as f64;
        let mut edges = Vec::new();
        for g in &self.group {
            for (i, j, c) in form.conductances() {
                edges.push((self.file.boundary[g[i]].clone(), self.file.boundary[g[j]].clone(), c * share));
            }
        }
        QuadraticForm::from_conductances(self.file.boundary.clone(), edges).expect("symmetric image is valid")
    }
}

fn check_class_values(file: &SchemaFile, values: &BTreeMap<String, f64>) -> Result<(), SchemaError> {
    let used: BTreeSet<&str> = file.edges.iter().map(|e| e.class.as_str()).collect();
    for class in &used {
        if !values.contains_key(*class) {
            return Err(SchemaError::UnknownClass(class.to_string()));
        }
    }
    for (class, &value) in values {
        if !used.contains(class.as_str()) {
            return Err(SchemaError::UnusedClass(class.clone()));
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(SchemaError::InvalidClassValue {
                class: class.clone(),
                value,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval() -> SchemaFile {
        // Unit interval split in two: 0 - h - 1.
        serde_json::from_str(
            r#"{
              "name": "interval",
              "boundary": ["l", "r"],
              "level1_nodes": ["l", "r", "h"],
              "cells": [{"l": "l", "r": "h"}, {"l": "h", "r": "r"}],
              "edges": [{"u": "l", "v": "r", "class": "unit"}],
              "class_values": {"unit": 1.0},
              "symmetries": [{"l": "r", "r": "l"}]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn accepts_interval() {
        let s = CellSchema::new(interval()).unwrap();
        assert_eq!(s.cell_count(), 2);
        assert_eq!(s.boundary_embedding(0), (0, 0));
        assert_eq!(s.boundary_embedding(1), (1, 1));
        assert_eq!(s.symmetry_group().len(), 2);
        assert_eq!(s.weights().as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn rejects_non_injective_cell() {
        let mut f = interval();
        f.cells[0].insert("r".into(), "l".into());
        assert!(matches!(CellSchema::new(f), Err(SchemaError::NonInjective { cell: 0, .. })));
    }

    #[test]
    fn rejects_incomplete_and_unknown() {
        let mut f = interval();
        f.cells[1].remove(&NodeId::from("r"));
        assert!(matches!(CellSchema::new(f), Err(SchemaError::IncompleteCellMap { cell: 1, .. })));

        let mut f = interval();
        f.cells[1].insert("r".into(), "zz".into());
        assert!(matches!(CellSchema::new(f), Err(SchemaError::UnknownTarget { .. })));

        let mut f = interval();
        f.cells[0].insert("q".into(), "h".into());
        assert!(matches!(CellSchema::new(f), Err(SchemaError::UnknownSlot { .. })));
    }

    #[test]
    fn rejects_uncovered_and_missing_preimage() {
        let mut f = interval();
        f.level1_nodes.push("orphan".into());
        assert_eq!(CellSchema::new(f), Err(SchemaError::Uncovered("orphan".into())));

        let mut f = interval();
        f.level1_nodes.push("x".into());
        f.cells[1].insert("r".into(), "x".into());
        assert_eq!(CellSchema::new(f), Err(SchemaError::Uncovered("r".into())));
    }

    #[test]
    fn rejects_bad_edges_and_classes() {
        let mut f = interval();
        f.edges.push(SchemaEdge { u: "r".into(), v: "l".into(), class: "unit".into() });
        assert!(matches!(CellSchema::new(f), Err(SchemaError::BadEdge { reason: "repeated edge", .. })));

        let mut f = interval();
        f.edges[0].class = "other".into();
        assert_eq!(CellSchema::new(f), Err(SchemaError::UnknownClass("other".into())));

        let mut f = interval();
        f.class_values.insert("spare".into(), 1.0);
        assert_eq!(CellSchema::new(f), Err(SchemaError::UnusedClass("spare".into())));

        let mut f = interval();
        f.class_values.insert("unit".into(), -1.0);
        assert!(matches!(CellSchema::new(f), Err(SchemaError::InvalidClassValue { .. })));
    }

    #[test]
    fn rejects_bad_weights_and_symmetries() {
        let mut f = interval();
        f.weights = Some(vec![1.0]);
        assert!(matches!(CellSchema::new(f), Err(SchemaError::WeightCount { .. })));

        let mut f = interval();
        f.weights = Some(vec![1.0, 0.0]);
        assert!(matches!(CellSchema::new(f), Err(SchemaError::InvalidWeight { index: 1, .. })));

        let mut f = interval();
        f.symmetries[0].insert("r".into(), "r".into());
        assert!(matches!(CellSchema::new(f), Err(SchemaError::BadSymmetry { .. })));
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let s = CellSchema::new(interval()).unwrap();
        let back = CellSchema::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let text = s.to_json().replacen('{', "{\"extra\": 1,", 1);
        assert!(matches!(CellSchema::from_json(&text), Err(SchemaError::Json(_))));
    }

    #[test]
    fn group_closure_of_two_reflections() {
        let gens = vec![vec![1, 0, 2], vec![0, 2, 1]];
        assert_eq!(close_group(&gens, 3).len(), 6);
    }
}
