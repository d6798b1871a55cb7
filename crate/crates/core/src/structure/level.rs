use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CellSchema, SchemaError};
use crate::network::{NodeId, QuadraticForm, ResistorNetwork};
use crate::Result;

/// Canonical address of a node of the level-`n` network.
///
/// For `n >= 1` the node is level-1 node `node` inside the copy reached by
/// the cell word `word` (length `n - 1`). At level 0, `node` indexes `v0`.
/// Among all addresses of a glued node the lexicographically smallest wins.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Address {
    pub word: Vec<usize>,
    pub node: usize,
}

impl Address {
    pub fn display<'a>(&'a self, schema: &'a CellSchema, level: usize) -> impl fmt::Display + 'a {
        AddressDisplay {
            addr: self,
            schema,
            level,
        }
    }
}

struct AddressDisplay<'a> {
    addr: &'a Address,
    schema: &'a CellSchema,
    level: usize,
}

impl fmt::Display for AddressDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = if self.level == 0 {
            &self.schema.boundary()[self.addr.node]
        } else {
            &self.schema.level1_nodes()[self.addr.node]
        };
        if self.addr.word.is_empty() {
            return write!(f, "{label}");
        }
        let word: Vec<String> = self.addr.word.iter().map(|c| (c + 1).to_string()).collect();
        write!(f, "{}/{label}", word.join("."))
    }
}

/// The level-`n` network with its boundary and node addresses.
#[derive(Debug, Clone)]
pub struct LevelGraph {
    level: usize,
    network: ResistorNetwork,
    boundary: Vec<NodeId>,
    addresses: BTreeMap<NodeId, Address>,
}

impl LevelGraph {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn network(&self) -> &ResistorNetwork {
        &self.network
    }

    pub fn into_network(self) -> ResistorNetwork {
        self.network
    }

    pub fn form(&self) -> QuadraticForm {
        self.network.laplacian()
    }

    /// Labels of the images of the boundary nodes, in `v0` order.
    pub fn boundary(&self) -> &[NodeId] {
        &self.boundary
    }

    pub fn address(&self, node: &str) -> Option<&Address> {
        self.addresses.get(node)
    }

    pub fn node_count(&self) -> usize {
        self.network.node_count()
    }
}

struct Stage {
    edges: Vec<(usize, usize, f64)>,
    boundary: Vec<usize>,
    canon: Vec<Address>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        parent[hi] = lo;
    }
}

fn first_stage(schema: &CellSchema, base: &[(usize, usize, f64)]) -> Stage {
    let mut edges = Vec::with_capacity(base.len() * schema.cell_count());
    for (cell, &w) in schema.weights().as_slice().iter().enumerate() {
        for &(i, j, c) in base {
            edges.push((schema.image(cell, i), schema.image(cell, j), c * w));
        }
    }
    let boundary = schema
        .boundary()
        .iter()
        .map(|b| schema.level1_index(b.as_str()).expect("validated boundary"))
        .collect();
    let canon = (0..schema.level1_nodes().len())
        .map(|node| Address { word: Vec::new(), node })
        .collect();
    Stage {
        edges,
        boundary,
        canon,
    }
}

/// Glues one copy of `prev` into every cell.
fn next_stage(schema: &CellSchema, prev: &Stage) -> Stage {
    let count = prev.canon.len();
    let cells = schema.cell_count();
    let mut parent: Vec<usize> = (0..cells * count).collect();

    let mut preimages: Vec<Vec<usize>> = vec![Vec::new(); schema.level1_nodes().len()];
    for cell in 0..cells {
        for (slot, &b) in prev.boundary.iter().enumerate() {
            preimages[schema.image(cell, slot)].push(cell * count + b);
        }
    }
    for group in &preimages {
        for &x in &group[1..] {
            union(&mut parent, group[0], x);
        }
    }

    let mut best: HashMap<usize, Address> = HashMap::new();
    for cell in 0..cells {
        for (x, addr) in prev.canon.iter().enumerate() {
            let root = find(&mut parent, cell * count + x);
            let mut word = Vec::with_capacity(addr.word.len() + 1);
            word.push(cell);
            word.extend_from_slice(&addr.word);
            let cand = Address { word, node: addr.node };
            match best.get_mut(&root) {
                Some(cur) if *cur <= cand => {}
                Some(cur) => *cur = cand,
                None => {
                    best.insert(root, cand);
                }
            }
        }
    }
    let mut classes: Vec<(Address, usize)> = best.into_iter().map(|(r, a)| (a, r)).collect();
    classes.sort_unstable();
    let mut renumber = HashMap::with_capacity(classes.len());
    for (new, (_, root)) in classes.iter().enumerate() {
        renumber.insert(*root, new);
    }
    let mut locate = |cell: usize, x: usize| renumber[&find(&mut parent, cell * count + x)];

    let mut edges = Vec::with_capacity(prev.edges.len() * cells);
    for (cell, &w) in schema.weights().as_slice().iter().enumerate() {
        for &(i, j, c) in &prev.edges {
            edges.push((locate(cell, i), locate(cell, j), c * w));
        }
    }
    let boundary = (0..schema.boundary().len())
        .map(|a| {
            let (cell, slot) = schema.boundary_embedding(a);
            locate(cell, prev.boundary[slot])
        })
        .collect();
    let canon = classes.into_iter().map(|(a, _)| a).collect();
    Stage {
        edges,
        boundary,
        canon,
    }
}

/// Level-`n` network with base edges weighted by `class_values`.
///
/// Level 0 is the base network on `v0`; level 1 lives on `v1`; level `n`
/// glues one copy of level `n - 1` into each cell, scaling copy `i` by the
/// weight `ρ_i`. Boundary images keep their `v0` labels, level-1 nodes keep
/// their `v1` labels and deeper nodes are labelled `w/y` with a 1-based cell
/// word `w` and a level-1 label `y`.
pub fn build_level(
    schema: &CellSchema,
    class_values: &BTreeMap<String, f64>,
    level: usize,
) -> Result<LevelGraph> {
    let base = schema.base_network(class_values)?;
    build_level_from(schema, &base, level)
}

/// Like [`build_level`], starting from an arbitrary network on `v0`.
pub fn build_level_from(schema: &CellSchema, base: &ResistorNetwork, level: usize) -> Result<LevelGraph> {
    let mut v0_edges = Vec::with_capacity(base.edges().len());
    for e in base.edges() {
        let pos = |n: &NodeId| {
            schema.boundary().iter().position(|b| b == n).ok_or_else(|| SchemaError::FormMismatch {
                expected: schema.boundary().to_vec(),
                found: base.nodes().to_vec(),
            })
        };
        v0_edges.push((pos(&e.u)?, pos(&e.v)?, e.conductance));
    }
    if base.node_count() != schema.boundary().len() {
        return Err(SchemaError::FormMismatch {
            expected: schema.boundary().to_vec(),
            found: base.nodes().to_vec(),
        }
        .into());
    }

    if level == 0 {
        let addresses = (0..schema.boundary().len())
            .map(|node| (schema.boundary()[node].clone(), Address { word: Vec::new(), node }))
            .collect();
        let mut network = ResistorNetwork::with_nodes(schema.boundary().iter().cloned())?;
        for (i, j, c) in v0_edges {
            network.add_edge(schema.boundary()[i].clone(), schema.boundary()[j].clone(), c)?;
        }
        return Ok(LevelGraph {
            level,
            network,
            boundary: schema.boundary().to_vec(),
            addresses,
        });
    }

    let mut stage = first_stage(schema, &v0_edges);
    for _ in 1..level {
        stage = next_stage(schema, &stage);
    }

    let mut labels: Vec<NodeId> = stage
        .canon
        .iter()
        .map(|a| NodeId::from(a.display(schema, level).to_string()))
        .collect();
    for (a, &b) in stage.boundary.iter().enumerate() {
        labels[b] = schema.boundary()[a].clone();
    }
    let mut network = ResistorNetwork::with_nodes(labels.iter().cloned())?;
    for &(i, j, c) in &stage.edges {
        network.add_edge(labels[i].clone(), labels[j].clone(), c)?;
    }
    let boundary = stage.boundary.iter().map(|&b| labels[b].clone()).collect();
    let addresses = labels.into_iter().zip(stage.canon).collect();
    Ok(LevelGraph {
        level,
        network,
        boundary,
        addresses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn gasket_node_counts() {
        let s = catalog::gasket_schema();
        for n in 0..=6u32 {
            let g = build_level(&s, s.class_values(), n as usize).unwrap();
            assert_eq!(g.node_count(), (3usize.pow(n + 1) + 3) / 2, "level {n}");
            assert_eq!(g.network().edges().len(), 3usize.pow(n + 1));
        }
    }

    #[test]
    fn level_one_uses_level1_labels() {
        let s = catalog::fractalina_schema();
        let g = build_level(&s, s.class_values(), 1).unwrap();
        assert_eq!(g.network().nodes(), s.level1_nodes());
        assert_eq!(g.network().edges().len(), 18);
        assert_eq!(g.boundary(), s.boundary());
    }

    #[test]
    fn level_two_labels_and_boundary() {
        let s = catalog::gasket_schema();
        let g = build_level(&s, s.class_values(), 2).unwrap();
        assert_eq!(g.boundary(), s.boundary());
        let interior: Vec<_> = g.network().nodes().iter().filter(|n| n.as_str().contains('/')).collect();
        assert_eq!(interior.len(), 15 - 3);
        for n in g.network().nodes() {
            assert!(g.address(n.as_str()).is_some());
        }
    }

    #[test]
    fn level_one_matches_replicated_network() {
        let s = catalog::pillow_schema();
        let base = s.base_network(s.class_values()).unwrap();
        let g = build_level_from(&s, &base, 1).unwrap();
        let r = super::super::replicate_network(&s, s.weights(), &base).unwrap();
        assert_eq!(g.network(), &r);
    }
}
