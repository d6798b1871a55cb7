//! Finite electrical networks.
//!
//! A [`ResistorNetwork`] is a bag of conductance edges between labelled nodes.
//! It is the object that Kirchhoff and Δ-Y reductions act on. Its
//! [`laplacian`](ResistorNetwork::laplacian) is a [`QuadraticForm`], which is
//! where traces (Schur complements), effective resistances and harmonic
//! extensions live.

mod form;
mod io;

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use form::{BoundaryValues, Potentials, QuadraticForm};

/// Opaque node label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(label: impl Into<String>) -> Self {
        NodeId(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl PartialEq<str> for NodeId {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for NodeId {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl From<&NodeId> for NodeId {
    fn from(id: &NodeId) -> Self {
        id.clone()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("duplicate node `{0}`")]
    DuplicateNode(NodeId),
    #[error("self-loop at node `{0}`")]
    SelfLoop(NodeId),
    #[error("edge {u}-{v}: conductance {value} is not a positive finite number")]
    InvalidConductance { u: NodeId, v: NodeId, value: f64 },
    #[error("`{node}` is not a series node: it has {degree} distinct neighbours")]
    NotSeriesNode { node: NodeId, degree: usize },
    #[error("triangle edge {u}-{v} is missing")]
    MissingTriangleEdge { u: NodeId, v: NodeId },
    #[error("`{node}` is not the centre of a star: it has {degree} distinct neighbours")]
    NotStarNode { node: NodeId, degree: usize },
    #[error("singular interior: floating interior component containing `{node}`")]
    FloatingInterior { node: NodeId },
    #[error("infinite resistance: `{p}` and `{q}` lie in different components")]
    InfiniteResistance { p: NodeId, q: NodeId },
    #[error("no potential assigned to node `{0}`")]
    MissingValue(NodeId),
    #[error("not an energy form: {0}")]
    InvalidForm(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A single conductance edge. Serialized as `{"u":..,"v":..,"c":..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    #[serde(rename = "c")]
    pub conductance: f64,
}

impl Edge {
    pub fn resistance(&self) -> f64 {
        1.0 / self.conductance
    }

    fn joins(&self, a: &NodeId, b: &NodeId) -> bool {
        (&self.u == a && &self.v == b) || (&self.u == b && &self.v == a)
    }

    fn touches(&self, n: &NodeId) -> bool {
        &self.u == n || &self.v == n
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
}

/// Labelled nodes plus a multiset of positive conductance edges.
///
/// Parallel edges are kept as separate entries until something sums them
/// ([`parallel_reduced`](Self::parallel_reduced) or [`laplacian`](Self::laplacian)).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct ResistorNetwork {
    nodes: Vec<NodeId>,
    #[serde(skip)]
    index: HashMap<NodeId, usize>,
    edges: Vec<Edge>,
}

impl TryFrom<NetworkRepr> for ResistorNetwork {
    type Error = NetworkError;

    fn try_from(repr: NetworkRepr) -> Result<Self, Self::Error> {
        let mut net = ResistorNetwork::with_nodes(repr.nodes)?;
        for e in repr.edges {
            net.add_edge(e.u, e.v, e.conductance)?;
        }
        Ok(net)
    }
}

impl From<ResistorNetwork> for NetworkRepr {
    fn from(net: ResistorNetwork) -> Self {
        NetworkRepr {
            nodes: net.nodes,
            edges: net.edges,
        }
    }
}

impl ResistorNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_nodes<I, N>(nodes: I) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = N>,
        N: Into<NodeId>,
    {
        let mut net = Self::new();
        for n in nodes {
            net.add_node(n)?;
        }
        Ok(net)
    }

    /// Builds a network from edges, declaring nodes in order of first appearance.
    pub fn from_edges<I, N>(edges: I) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = (N, N, f64)>,
        N: Into<NodeId>,
    {
        let mut net = Self::new();
        for (u, v, c) in edges {
            let (u, v) = (u.into(), v.into());
            net.ensure_node(u.clone());
            net.ensure_node(v.clone());
            net.add_edge(u, v, c)?;
        }
        Ok(net)
    }

    pub fn add_node(&mut self, node: impl Into<NodeId>) -> Result<(), NetworkError> {
        let node = node.into();
        if self.index.contains_key(&node) {
            return Err(NetworkError::DuplicateNode(node));
        }
        self.index.insert(node.clone(), self.nodes.len());
        self.nodes.push(node);
        Ok(())
    }

    /// Adds `node` unless it is already present.
    pub fn ensure_node(&mut self, node: impl Into<NodeId>) {
        let node = node.into();
        if !self.index.contains_key(&node) {
            self.index.insert(node.clone(), self.nodes.len());
            self.nodes.push(node);
        }
    }

    pub fn add_edge(
        &mut self,
        u: impl Into<NodeId>,
        v: impl Into<NodeId>,
        conductance: f64,
    ) -> Result<(), NetworkError> {
        let (u, v) = (u.into(), v.into());
        for n in [&u, &v] {
            if !self.index.contains_key(n) {
                return Err(NetworkError::UnknownNode(n.clone()));
            }
        }
        if u == v {
            return Err(NetworkError::SelfLoop(u));
        }
        if !(conductance.is_finite() && conductance > 0.0) {
            return Err(NetworkError::InvalidConductance {
                u,
                v,
                value: conductance,
            });
        }
        self.edges.push(Edge { u, v, conductance });
        Ok(())
    }

    /// Removes and returns the edge at `index` in [`edges`](Self::edges).
    pub fn remove_edge(&mut self, index: usize) -> Option<Edge> {
        (index < self.edges.len()).then(|| self.edges.remove(index))
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, node: &str) -> bool {
        self.index.contains_key(node)
    }

    fn require(&self, node: &str) -> Result<&NodeId, NetworkError> {
        self.index
            .get_key_value(node)
            .map(|(k, _)| k)
            .ok_or_else(|| NetworkError::UnknownNode(NodeId::from(node)))
    }

    /// Summed conductance from `node` to each distinct neighbour.
    pub fn neighbours(&self, node: &str) -> Result<BTreeMap<NodeId, f64>, NetworkError> {
        let node = self.require(node)?;
        let mut out = BTreeMap::new();
        for e in &self.edges {
            let other = if &e.u == node {
                &e.v
            } else if &e.v == node {
                &e.u
            } else {
                continue;
            };
            *out.entry(other.clone()).or_insert(0.0) += e.conductance;
        }
        Ok(out)
    }

    /// Summed conductance between `a` and `b` (0 when not adjacent).
    pub fn conductance_between(&self, a: &str, b: &str) -> Result<f64, NetworkError> {
        let a = self.require(a)?;
        let b = self.require(b)?;
        Ok(self
            .edges
            .iter()
            .filter(|e| e.joins(a, b))
            .map(|e| e.conductance)
            .sum())
    }

    /// Energy form `L = D - C`; parallel edges are summed.
    pub fn laplacian(&self) -> QuadraticForm {
        let edges = self.edges.iter().map(|e| (self.index[&e.u], self.index[&e.v], e.conductance));
        QuadraticForm::from_indexed(self.nodes.clone(), edges)
    }

    /// Effective resistance between two nodes; shorthand for the Laplacian route.
    pub fn effective_resistance(&self, p: &str, q: &str) -> Result<f64, NetworkError> {
        self.laplacian().effective_resistance(p, q)
    }

    /// Kirchhoff's parallel law: at most one edge per node pair afterwards.
    pub fn parallel_reduced(&self) -> ResistorNetwork {
        let mut order: Vec<(usize, usize)> = Vec::new();
        let mut merged: HashMap<(usize, usize), Edge> = HashMap::new();
        for e in &self.edges {
            let (i, j) = (self.index[&e.u], self.index[&e.v]);
            let key = (i.min(j), i.max(j));
            match merged.get_mut(&key) {
                Some(m) => m.conductance += e.conductance,
                None => {
                    order.push(key);
                    merged.insert(key, e.clone());
                }
            }
        }
        ResistorNetwork {
            nodes: self.nodes.clone(),
            index: self.index.clone(),
            edges: order.into_iter().map(|k| merged.remove(&k).unwrap()).collect(),
        }
    }

    /// Kirchhoff's series law: removes `r`, which must have exactly two
    /// distinct neighbours `p`, `q`, and joins them with resistance
    /// `R_pr + R_rq`. The new edge is merged with any existing `p`-`q` edges.
    pub fn eliminate_series_node(&self, r: &str) -> Result<ResistorNetwork, NetworkError> {
        let r = self.require(r)?.clone();
        let nbrs = self.neighbours(r.as_str())?;
        if nbrs.len() != 2 {
            return Err(NetworkError::NotSeriesNode {
                node: r,
                degree: nbrs.len(),
            });
        }
        let mut it = nbrs.into_iter();
        let (p, c_pr) = it.next().unwrap();
        let (q, c_rq) = it.next().unwrap();
        let series = 1.0 / (1.0 / c_pr + 1.0 / c_rq);

        let mut out = self.without_node(&r);
        let existing = out.conductance_between(p.as_str(), q.as_str())?;
        out.edges.retain(|e| !e.joins(&p, &q));
        out.edges.push(Edge {
            u: p,
            v: q,
            conductance: existing + series,
        });
        Ok(out)
    }

    /// Replaces the triangle `tri` by a star around the new node `center`.
    ///
    /// Leg resistances follow `r_a = R_ab R_ac / (R_ab + R_bc + R_ac)`; parallel
    /// edges along each side are summed first.
    pub fn delta_to_y(
        &self,
        tri: [&str; 3],
        center: impl Into<NodeId>,
    ) -> Result<ResistorNetwork, NetworkError> {
        let center = center.into();
        let [a, b, c] = [self.require(tri[0])?, self.require(tri[1])?, self.require(tri[2])?];
        if a == b || b == c || a == c {
            return Err(NetworkError::DuplicateNode(if a == b { a.clone() } else { c.clone() }));
        }
        if self.contains(center.as_str()) {
            return Err(NetworkError::DuplicateNode(center));
        }
        let side = |x: &NodeId, y: &NodeId| -> Result<f64, NetworkError> {
            let g = self.conductance_between(x.as_str(), y.as_str())?;
            if g > 0.0 {
                Ok(1.0 / g)
            } else {
                Err(NetworkError::MissingTriangleEdge {
                    u: x.clone(),
                    v: y.clone(),
                })
            }
        };
        let (r_ab, r_bc, r_ac) = (side(a, b)?, side(b, c)?, side(a, c)?);
        let total = r_ab + r_bc + r_ac;
        let legs = [
            (a, r_ab * r_ac / total),
            (b, r_ab * r_bc / total),
            (c, r_ac * r_bc / total),
        ];

        let mut out = self.clone();
        out.edges
            .retain(|e| !(e.joins(a, b) || e.joins(b, c) || e.joins(a, c)));
        out.add_node(center.clone())?;
        for (n, r) in legs {
            out.add_edge(n.clone(), center.clone(), 1.0 / r)?;
        }
        Ok(out)
    }

    /// Inverse of [`delta_to_y`](Self::delta_to_y): removes a node with exactly
    /// three distinct neighbours and adds the equivalent triangle
    /// `R_ab = (r_a r_b + r_b r_c + r_a r_c) / r_c`.
    pub fn y_to_delta(&self, center: &str) -> Result<ResistorNetwork, NetworkError> {
        let center = self.require(center)?.clone();
        let nbrs = self.neighbours(center.as_str())?;
        if nbrs.len() != 3 {
            return Err(NetworkError::NotStarNode {
                node: center,
                degree: nbrs.len(),
            });
        }
        let legs: Vec<(NodeId, f64)> = nbrs.into_iter().map(|(n, g)| (n, 1.0 / g)).collect();
        let (ra, rb, rc) = (legs[0].1, legs[1].1, legs[2].1);
        let p = ra * rb + rb * rc + ra * rc;

        let mut out = self.without_node(&center);
        for (x, y, r) in [(0, 1, p / rc), (1, 2, p / ra), (0, 2, p / rb)] {
            out.add_edge(legs[x].0.clone(), legs[y].0.clone(), 1.0 / r)?;
        }
        Ok(out)
    }

    fn without_node(&self, node: &NodeId) -> ResistorNetwork {
        let nodes: Vec<NodeId> = self.nodes.iter().filter(|n| *n != node).cloned().collect();
        let index = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let edges = self.edges.iter().filter(|e| !e.touches(node)).cloned().collect();
        ResistorNetwork {
            nodes,
            index,
            edges,
        }
    }

    /// Copy of the network with every conductance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<ResistorNetwork, NetworkError> {
        let mut out = ResistorNetwork {
            nodes: self.nodes.clone(),
            index: self.index.clone(),
            edges: Vec::with_capacity(self.edges.len()),
        };
        for e in &self.edges {
            out.add_edge(e.u.clone(), e.v.clone(), e.conductance * factor)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn path(c1: f64, c2: f64) -> ResistorNetwork {
        ResistorNetwork::from_edges([("a", "b", c1), ("b", "c", c2)]).unwrap()
    }

    #[test]
    fn rejects_invalid_edges() {
        let mut net = ResistorNetwork::with_nodes(["a", "b"]).unwrap();
        assert_eq!(
            net.add_edge("a", "a", 1.0),
            Err(NetworkError::SelfLoop("a".into()))
        );
        assert!(matches!(
            net.add_edge("a", "b", 0.0),
            Err(NetworkError::InvalidConductance { .. })
        ));
        assert!(matches!(
            net.add_edge("a", "b", f64::NAN),
            Err(NetworkError::InvalidConductance { .. })
        ));
        assert_eq!(
            net.add_edge("a", "z", 1.0),
            Err(NetworkError::UnknownNode("z".into()))
        );
        assert_eq!(net.add_node("a"), Err(NetworkError::DuplicateNode("a".into())));
    }

    #[test]
    fn parallel_edges_add() {
        let net = ResistorNetwork::from_edges([("a", "b", 1.0), ("b", "a", 2.0)]).unwrap();
        let red = net.parallel_reduced();
        assert_eq!(red.edges().len(), 1);
        assert_eq!(red.edges()[0].conductance, 3.0);
    }

    #[test]
    fn parallel_reduce_is_identity_on_simple_network() {
        let net = ResistorNetwork::from_edges([("a", "b", 1.0), ("b", "c", 2.0), ("a", "c", 4.0)])
            .unwrap();
        assert_eq!(net.parallel_reduced(), net);
    }

    #[test]
    fn series_law() {
        let red = path(1.0, 1.0).eliminate_series_node("b").unwrap();
        assert_eq!(red.nodes(), &[NodeId::from("a"), NodeId::from("c")]);
        assert_eq!(red.edges().len(), 1);
        assert_relative_eq!(red.edges()[0].conductance, 0.5);

        let red = path(0.5, 1.0 / 3.0).eliminate_series_node("b").unwrap();
        assert_relative_eq!(red.edges()[0].resistance(), 5.0, max_relative = 1e-15);
    }

    #[test]
    fn series_merges_with_existing_edge() {
        let mut net = path(1.0, 1.0);
        net.add_edge("a", "c", 1.0).unwrap();
        let red = net.eliminate_series_node("b").unwrap();
        assert_eq!(red.edges().len(), 1);
        assert_relative_eq!(red.edges()[0].conductance, 1.5);
    }

    #[test]
    fn series_requires_degree_two() {
        let net =
            ResistorNetwork::from_edges([("r", "a", 1.0), ("r", "b", 1.0), ("r", "c", 1.0)]).unwrap();
        assert_eq!(
            net.eliminate_series_node("r"),
            Err(NetworkError::NotSeriesNode {
                node: "r".into(),
                degree: 3
            })
        );
    }

    #[test]
    fn symmetric_delta_gives_unit_legs() {
        let third = 1.0 / 3.0;
        let net = ResistorNetwork::from_edges([("a", "b", third), ("b", "c", third), ("a", "c", third)])
            .unwrap();
        let y = net.delta_to_y(["a", "b", "c"], "o").unwrap();
        assert_eq!(y.edges().len(), 3);
        for e in y.edges() {
            assert_relative_eq!(e.resistance(), 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn delta_to_y_missing_side() {
        let net = path(1.0, 1.0);
        assert!(matches!(
            net.delta_to_y(["a", "b", "c"], "o"),
            Err(NetworkError::MissingTriangleEdge { .. })
        ));
    }

    #[test]
    fn y_to_delta_formula() {
        // legs 2, 3, 6: R_ab = (6 + 18 + 12) / 6 = 6.
        let net = ResistorNetwork::from_edges([
            ("o", "a", 1.0 / 2.0),
            ("o", "b", 1.0 / 3.0),
            ("o", "c", 1.0 / 6.0),
        ])
        .unwrap();
        let tri = net.y_to_delta("o").unwrap();
        assert!(!tri.contains("o"));
        assert_relative_eq!(1.0 / tri.conductance_between("a", "b").unwrap(), 6.0, max_relative = 1e-14);
        assert_relative_eq!(1.0 / tri.conductance_between("b", "c").unwrap(), 36.0 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(1.0 / tri.conductance_between("a", "c").unwrap(), 12.0, max_relative = 1e-14);
        // Cross-check by effective resistance.
        for (p, q) in [("a", "b"), ("b", "c"), ("a", "c")] {
            assert_relative_eq!(
                net.effective_resistance(p, q).unwrap(),
                tri.effective_resistance(p, q).unwrap(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn unit_star_becomes_triangle_of_three() {
        let net = ResistorNetwork::from_edges([("o", "a", 1.0), ("o", "b", 1.0), ("o", "c", 1.0)])
            .unwrap();
        let tri = net.y_to_delta("o").unwrap();
        for e in tri.edges() {
            assert_relative_eq!(e.resistance(), 3.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn y_to_delta_undoes_delta_to_y() {
        let net = ResistorNetwork::from_edges([("a", "b", 0.7), ("b", "c", 2.5), ("a", "c", 1.3)])
            .unwrap();
        let back = net.delta_to_y(["a", "b", "c"], "o").unwrap().y_to_delta("o").unwrap();
        for (p, q) in [("a", "b"), ("b", "c"), ("a", "c")] {
            assert_relative_eq!(
                net.conductance_between(p, q).unwrap(),
                back.conductance_between(p, q).unwrap(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn y_to_delta_requires_three_neighbours() {
        assert!(matches!(
            path(1.0, 1.0).y_to_delta("b"),
            Err(NetworkError::NotStarNode { degree: 2, .. })
        ));
    }

    #[test]
    fn json_round_trip_validates() {
        let net = path(1.0, 2.0);
        let json = serde_json::to_string(&net).unwrap();
        let back: ResistorNetwork = serde_json::from_str(&json).unwrap();
        assert_eq!(back, net);
        let bad = r#"{"nodes":["a"],"edges":[{"u":"a","v":"b","c":1.0}]}"#;
        assert!(serde_json::from_str::<ResistorNetwork>(bad).is_err());
    }
}
