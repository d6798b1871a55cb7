use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Edge, NetworkError, NodeId, ResistorNetwork};

/// Node potentials keyed by label.
pub type Potentials = BTreeMap<NodeId, f64>;

/// Prescribed potentials on a subset of nodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundaryValues(BTreeMap<NodeId, f64>);

impl BoundaryValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, node: impl Into<NodeId>, value: f64) {
        self.0.insert(node.into(), value);
    }

    pub fn get(&self, node: &str) -> Option<f64> {
        self.0.get(node).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, f64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every assigned value is the same (or nothing is assigned).
    pub fn is_constant(&self) -> bool {
        let mut vals = self.0.values();
        match vals.next() {
            None => true,
            Some(first) => vals.all(|v| v == first),
        }
    }
}

impl<N: Into<NodeId>> FromIterator<(N, f64)> for BoundaryValues {
    fn from_iter<I: IntoIterator<Item = (N, f64)>>(iter: I) -> Self {
        BoundaryValues(iter.into_iter().map(|(n, v)| (n.into(), v)).collect())
    }
}

/// Row of a node removed by Gaussian elimination: its pivot and the
/// conductances it had to the nodes still present at that moment.
struct Eliminated {
    node: usize,
    pivot: f64,
    row: Vec<(usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct FormRepr {
    nodes: Vec<NodeId>,
    conductances: Vec<Edge>,
}

/// Dirichlet form on a finite node set, stored as its off-diagonal
/// conductances `c_pq = -M_pq > 0`.
///
/// The diagonal is always the row sum of conductances, so every value of this
/// type is symmetric with zero row sums by construction and round-off cannot
/// leak out of the class of energy forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FormRepr", into = "FormRepr")]
pub struct QuadraticForm {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    adj: Vec<BTreeMap<usize, f64>>,
}

impl TryFrom<FormRepr> for QuadraticForm {
    type Error = NetworkError;

    fn try_from(repr: FormRepr) -> Result<Self, NetworkError> {
        QuadraticForm::from_conductances(
            repr.nodes,
            repr.conductances.into_iter().map(|e| (e.u, e.v, e.conductance)),
        )
    }
}

impl From<QuadraticForm> for FormRepr {
    fn from(form: QuadraticForm) -> Self {
        FormRepr {
            conductances: form.edge_list(),
            nodes: form.nodes,
        }
    }
}

fn build_index(nodes: &[NodeId]) -> Result<HashMap<NodeId, usize>, NetworkError> {
    let mut index = HashMap::with_capacity(nodes.len());
    for (i, n) in nodes.iter().enumerate() {
        if index.insert(n.clone(), i).is_some() {
            return Err(NetworkError::DuplicateNode(n.clone()));
        }
    }
    Ok(index)
}

impl QuadraticForm {
    /// The zero form on `nodes`.
    pub fn zero(nodes: Vec<NodeId>) -> Result<Self, NetworkError> {
        let index = build_index(&nodes)?;
        let adj = vec![BTreeMap::new(); nodes.len()];
        Ok(QuadraticForm { nodes, index, adj })
    }

    /// Builds a form from labelled conductances; repeated pairs are summed.
    pub fn from_conductances<I, N>(nodes: Vec<NodeId>, edges: I) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = (N, N, f64)>,
        N: Into<NodeId>,
    {
        let mut form = Self::zero(nodes)?;
        for (u, v, c) in edges {
            let (u, v) = (u.into(), v.into());
            let i = form.require(u.as_str())?;
            let j = form.require(v.as_str())?;
            if i == j {
                return Err(NetworkError::SelfLoop(u));
            }
            if !(c.is_finite() && c > 0.0) {
                return Err(NetworkError::InvalidConductance { u, v, value: c });
            }
            form.add_conductance(i, j, c);
        }
        Ok(form)
    }

    /// Trusted constructor used by [`ResistorNetwork::laplacian`].
    pub(super) fn from_indexed(
        nodes: Vec<NodeId>,
        edges: impl Iterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let index = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut form = QuadraticForm {
            adj: vec![BTreeMap::new(); nodes.len()],
            nodes,
            index,
        };
        for (i, j, c) in edges {
            form.add_conductance(i, j, c);
        }
        form
    }

    /// Reads a dense symmetric matrix with zero row sums.
    ///
    /// Asymmetry and row-sum defects up to `1e-12 * max|entry|` are accepted.
    /// Positive off-diagonal entries up to `1e-9 * max|entry|` are treated as
    /// round-off and dropped; anything larger is rejected.
    pub fn from_matrix(nodes: Vec<NodeId>, matrix: &[Vec<f64>]) -> Result<Self, NetworkError> {
        let n = nodes.len();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(NetworkError::InvalidForm(format!("expected a {n}x{n} matrix")));
        }
        if matrix.iter().flatten().any(|x| !x.is_finite()) {
            return Err(NetworkError::InvalidForm("non-finite entry".into()));
        }
        let scale = matrix.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let tight = 1e-12 * scale;
        for i in 0..n {
            let row_sum: f64 = matrix[i].iter().sum();
            if row_sum.abs() > tight {
                return Err(NetworkError::InvalidForm(format!(
                    "row {} sums to {row_sum:e}",
                    nodes[i]
                )));
            }
            for j in 0..i {
                if (matrix[i][j] - matrix[j][i]).abs() > tight {
                    return Err(NetworkError::InvalidForm(format!(
                        "not symmetric at ({}, {})",
                        nodes[i], nodes[j]
                    )));
                }
            }
        }
        let mut form = Self::zero(nodes)?;
        for i in 0..n {
            for j in 0..i {
                let c = -0.5 * (matrix[i][j] + matrix[j][i]);
                if c > 0.0 {
                    form.add_conductance(i, j, c);
                } else if c < -1e-9 * scale {
                    return Err(NetworkError::InvalidForm(format!(
                        "negative conductance {c:e} between {} and {}",
                        form.nodes[i], form.nodes[j]
                    )));
                }
            }
        }
        Ok(form)
    }

    fn require(&self, node: &str) -> Result<usize, NetworkError> {
        self.index
            .get(node)
            .copied()
            .ok_or_else(|| NetworkError::UnknownNode(NodeId::from(node)))
    }

    fn add_conductance(&mut self, i: usize, j: usize, c: f64) {
        *self.adj[i].entry(j).or_insert(0.0) += c;
        *self.adj[j].entry(i).or_insert(0.0) += c;
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, node: &str) -> Option<usize> {
        self.index.get(node).copied()
    }

    /// Conductance between two labelled nodes (0 if they are not joined).
    pub fn conductance(&self, a: &str, b: &str) -> Result<f64, NetworkError> {
        let i = self.require(a)?;
        let j = self.require(b)?;
        Ok(self.conductance_at(i, j))
    }

    pub fn conductance_at(&self, i: usize, j: usize) -> f64 {
        self.adj[i].get(&j).copied().unwrap_or(0.0)
    }

    /// Matrix entry `M_ij` with the diagonal equal to the row's total conductance.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.adj[i].values().sum()
        } else {
            -self.conductance_at(i, j)
        }
    }

    /// Positive conductances as `(i, j, c)` with `i < j`, sorted by `(i, j)`.
    pub fn conductances(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, row)| {
            row.range(i + 1..).map(move |(&j, &c)| (i, j, c))
        })
    }

    pub fn edge_list(&self) -> Vec<Edge> {
        self.conductances()
            .map(|(i, j, c)| Edge {
                u: self.nodes[i].clone(),
                v: self.nodes[j].clone(),
                conductance: c,
            })
            .collect()
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n).map(|i| (0..n).map(|j| self.entry(i, j)).collect()).collect()
    }

    /// Largest diagonal entry, which is also the largest entry in absolute value.
    pub fn scale(&self) -> f64 {
        (0..self.len()).map(|i| self.entry(i, i)).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> QuadraticForm {
        let mut out = self.clone();
        for row in &mut out.adj {
            for c in row.values_mut() {
                *c *= factor;
            }
            if factor == 0.0 {
                row.clear();
            }
        }
        out
    }

    /// Sum of two forms on the same node list.
    pub fn add(&self, other: &QuadraticForm) -> Result<QuadraticForm, NetworkError> {
        if self.nodes != other.nodes {
            return Err(NetworkError::InvalidForm("node lists differ".into()));
        }
        let mut out = self.clone();
        for (i, j, c) in other.conductances() {
            out.add_conductance(i, j, c);
        }
        Ok(out)
    }

    /// Drops conductances at or below `threshold`.
    pub fn pruned(&self, threshold: f64) -> QuadraticForm {
        let mut out = self.clone();
        for row in &mut out.adj {
            row.retain(|_, c| *c > threshold);
        }
        out
    }

    /// Same form with nodes listed in `order` (a permutation of the labels).
    pub fn reordered(&self, order: &[NodeId]) -> Result<QuadraticForm, NetworkError> {
        if order.len() != self.len() {
            return Err(NetworkError::InvalidForm("reordering is not a permutation".into()));
        }
        let perm: Vec<usize> = order.iter().map(|n| self.require(n.as_str())).collect::<Result<_, _>>()?;
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let edges = self.conductances().map(|(i, j, c)| (inverse[i], inverse[j], c));
        let out = QuadraticForm::from_indexed(order.to_vec(), edges);
        if out.index.len() != out.len() {
            return Err(NetworkError::InvalidForm("reordering is not a permutation".into()));
        }
        Ok(out)
    }

    /// Largest entrywise difference, matching nodes by label.
    pub fn max_abs_diff(&self, other: &QuadraticForm) -> Result<f64, NetworkError> {
        if self.len() != other.len() {
            return Err(NetworkError::InvalidForm("node sets differ".into()));
        }
        let map: Vec<usize> = self
            .nodes
            .iter()
            .map(|n| other.require(n.as_str()))
            .collect::<Result<_, _>>()?;
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..self.len() {
                worst = worst.max((self.entry(i, j) - other.entry(map[i], map[j])).abs());
            }
        }
        Ok(worst)
    }

    /// `sum over edges of c_pq (u_p - u_q)^2`; every node needs a value.
    pub fn energy(&self, u: &Potentials) -> Result<f64, NetworkError> {
        let vals: Vec<f64> = self
            .nodes
            .iter()
            .map(|n| u.get(n).copied().ok_or_else(|| NetworkError::MissingValue(n.clone())))
            .collect::<Result<_, _>>()?;
        Ok(self.energy_of(&vals))
    }

    /// Energy of a potential vector indexed like [`nodes`](Self::nodes).
    pub fn energy_of(&self, u: &[f64]) -> f64 {
        self.conductances().map(|(i, j, c)| c * (u[i] - u[j]).powi(2)).sum()
    }

    pub fn to_network(&self) -> ResistorNetwork {
        ResistorNetwork::from_parts(self.nodes.clone(), self.edge_list())
    }

    /// Connected components (by positive conductance), each sorted by index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for s in 0..self.len() {
            if !seen[s] {
                out.push(self.component_from(s, &mut seen));
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    fn component_from(&self, start: usize, seen: &mut [bool]) -> Vec<usize> {
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(k) = queue.pop_front() {
            for &j in self.adj[k].keys() {
                if !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                    queue.push_back(j);
                }
            }
        }
        comp.sort_unstable();
        comp
    }

    fn resolve(&self, labels: &[NodeId]) -> Result<Vec<usize>, NetworkError> {
        let mut seen = BTreeSet::new();
        labels
            .iter()
            .map(|n| {
                let i = self.require(n.as_str())?;
                if !seen.insert(i) {
                    return Err(NetworkError::DuplicateNode(n.clone()));
                }
                Ok(i)
            })
            .collect()
    }

    /// Minimum-degree star-mesh elimination of `interior`, in place on `adj`.
    ///
    /// Removing node `k` adds `c_ik c_kj / pivot` to `c_ij` for every pair of
    /// its neighbours. A pivot at or below `1e-12` times the original largest
    /// diagonal means `k` sits in a component with no remaining boundary.
    fn eliminate(
        &self,
        adj: &mut [BTreeMap<usize, f64>],
        interior: &[usize],
        mut record: Option<&mut Vec<Eliminated>>,
    ) -> Result<(), NetworkError> {
        let floor = 1e-12 * self.scale();
        let mut pending = vec![false; adj.len()];
        let mut queue = BTreeSet::new();
        for &k in interior {
            pending[k] = true;
            queue.insert((adj[k].len(), k));
        }
        while let Some((_, k)) = queue.pop_first() {
            pending[k] = false;
            let row: Vec<(usize, f64)> = std::mem::take(&mut adj[k]).into_iter().collect();
            let pivot: f64 = row.iter().map(|&(_, c)| c).sum();
            if !(pivot > floor) {
                return Err(NetworkError::FloatingInterior {
                    node: self.nodes[k].clone(),
                });
            }
            for &(i, _) in &row {
                if pending[i] {
                    queue.remove(&(adj[i].len(), i));
                }
                adj[i].remove(&k);
            }
            for (a, &(i, ci)) in row.iter().enumerate() {
                for &(j, cj) in &row[a + 1..] {
                    let fill = ci * cj / pivot;
                    *adj[i].entry(j).or_insert(0.0) += fill;
                    *adj[j].entry(i).or_insert(0.0) += fill;
                }
            }
            for &(i, _) in &row {
                if pending[i] {
                    queue.insert((adj[i].len(), i));
                }
            }
            if let Some(steps) = record.as_deref_mut() {
                steps.push(Eliminated { node: k, pivot, row });
            }
        }
        Ok(())
    }

    /// Trace (Schur complement) onto `boundary`, listed in the given order.
    ///
    /// Fails with [`NetworkError::FloatingInterior`] when some interior node
    /// is not connected to any boundary node.
    pub fn trace_to(&self, boundary: &[NodeId]) -> Result<QuadraticForm, NetworkError> {
        let keep = self.resolve(boundary)?;
        let mut is_kept = vec![false; self.len()];
        for &i in &keep {
            is_kept[i] = true;
        }
        let interior: Vec<usize> = (0..self.len()).filter(|&i| !is_kept[i]).collect();
        let mut adj = self.adj.clone();
        self.eliminate(&mut adj, &interior, None)?;

        let mut position = vec![usize::MAX; self.len()];
        for (p, &i) in keep.iter().enumerate() {
            position[i] = p;
        }
        let edges = keep.iter().flat_map(|&i| {
            let position = &position;
            adj[i]
                .iter()
                .filter(move |(&j, &c)| i < j && c > 0.0)
                .map(move |(&j, &c)| (position[i], position[j], c))
        });
        Ok(QuadraticForm::from_indexed(boundary.to_vec(), edges.collect::<Vec<_>>().into_iter()))
    }

    /// Effective resistance between `p` and `q`.
    ///
    /// Zero when `p == q`; [`NetworkError::InfiniteResistance`] when they
    /// lie in different components.
    pub fn effective_resistance(&self, p: &str, q: &str) -> Result<f64, NetworkError> {
        let ip = self.require(p)?;
        let iq = self.require(q)?;
        if ip == iq {
            return Ok(0.0);
        }
        let mut seen = vec![false; self.len()];
        let comp = self.component_from(ip, &mut seen);
        if !seen[iq] {
            return Err(NetworkError::InfiniteResistance {
                p: self.nodes[ip].clone(),
                q: self.nodes[iq].clone(),
            });
        }
        let interior: Vec<usize> = comp.into_iter().filter(|&i| i != ip && i != iq).collect();
        let mut adj = self.adj.clone();
        self.eliminate(&mut adj, &interior, None)?;
        let c = adj[ip].get(&iq).copied().unwrap_or(0.0);
        if c > 0.0 {
            Ok(1.0 / c)
        } else {
            Err(NetworkError::InfiniteResistance {
                p: self.nodes[ip].clone(),
                q: self.nodes[iq].clone(),
            })
        }
    }

    /// Energy-minimising extension of boundary potentials to every node.
    ///
    /// Each interior value is the conductance-weighted mean of its neighbours.
    pub fn harmonic_extension(&self, bv: &BoundaryValues) -> Result<Potentials, NetworkError> {
        let mut values = vec![f64::NAN; self.len()];
        let mut fixed = vec![false; self.len()];
        for (n, v) in bv.iter() {
            let i = self.require(n.as_str())?;
            values[i] = v;
            fixed[i] = true;
        }
        let interior: Vec<usize> = (0..self.len()).filter(|&i| !fixed[i]).collect();
        let mut adj = self.adj.clone();
        let mut steps = Vec::with_capacity(interior.len());
        self.eliminate(&mut adj, &interior, Some(&mut steps))?;
        for step in steps.iter().rev() {
            let weighted: f64 = step.row.iter().map(|&(j, c)| c * values[j]).sum();
            values[step.node] = weighted / step.pivot;
        }
        Ok(self.nodes.iter().cloned().zip(values).collect())
    }
}

impl ResistorNetwork {
    pub(super) fn from_parts(nodes: Vec<NodeId>, edges: Vec<Edge>) -> ResistorNetwork {
        let index = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        ResistorNetwork {
            nodes,
            index,
            edges,
        }
    }
}
