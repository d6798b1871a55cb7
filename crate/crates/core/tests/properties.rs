use std::collections::BTreeSet;

use fractal_forms::catalog;
use fractal_forms::solver::{power_iterate, random_start, SolverOptions};
use fractal_forms::structure::{renormalize, replicate};
use fractal_forms::{BoundaryValues, CellSchema, NodeId, QuadraticForm, ResistorNetwork, WeightVector};
use proptest::prelude::*;

fn label(i: usize) -> String {
    format!("n{i}")
}

/// Connected network: a random spanning tree plus extra chords.
fn network() -> impl Strategy<Value = ResistorNetwork> {
    (3usize..9).prop_flat_map(|n| {
        let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
        (
            Just(n),
            parents,
            prop::collection::vec(0.05f64..20.0, n - 1),
            prop::collection::vec((0..n, 0..n, 0.05f64..20.0), 0..2 * n),
        )
    })
    .prop_map(|(n, parents, tree_c, chords)| {
        let mut net = ResistorNetwork::with_nodes((0..n).map(label)).unwrap();
        for (i, (p, c)) in parents.into_iter().zip(tree_c).enumerate() {
            net.add_edge(label(i + 1), label(p), c).unwrap();
        }
        for (a, b, c) in chords {
            if a != b {
                net.add_edge(label(a), label(b), c).unwrap();
            }
        }
        net
    })
}

fn network_with_subset() -> impl Strategy<Value = (ResistorNetwork, Vec<NodeId>)> {
    network().prop_flat_map(|net| {
        let n = net.node_count();
        let subset = prop::sample::subsequence((0..n).collect::<Vec<_>>(), 2..=n);
        (Just(net), subset).prop_map(|(net, idx)| {
            let nodes = idx.into_iter().map(|i| net.nodes()[i].clone()).collect();
            (net, nodes)
        })
    })
}

fn scale_of(m: &QuadraticForm) -> f64 {
    m.scale().max(1.0)
}

fn builtin() -> impl Strategy<Value = CellSchema> {
    prop::sample::select(catalog::BUILTIN_NAMES.to_vec()).prop_map(|n| catalog::builtin(n).unwrap())
}

fn random_form(schema: &CellSchema, values: &[f64]) -> QuadraticForm {
    let nodes = schema.boundary().to_vec();
    let k = nodes.len();
    let mut edges = Vec::new();
    let mut it = values.iter().cycle();
    for i in 0..k {
        for j in i + 1..k {
            edges.push((nodes[i].clone(), nodes[j].clone(), *it.next().unwrap()));
        }
    }
    QuadraticForm::from_conductances(nodes, edges).unwrap()
}

fn permuted(m: &QuadraticForm, perm: &[usize]) -> QuadraticForm {
    let nodes = m.nodes().to_vec();
    let edges = m
        .conductances()
        .map(|(i, j, c)| (nodes[perm[i]].clone(), nodes[perm[j]].clone(), c))
        .collect::<Vec<_>>();
    QuadraticForm::from_conductances(nodes, edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn trace_is_a_conductance_form((net, b) in network_with_subset()) {
        let t = net.laplacian().trace_to(&b).unwrap();
        let m = t.to_matrix();
        let s = scale_of(&t);
        for i in 0..m.len() {
            let row: f64 = m[i].iter().sum();
            prop_assert!(row.abs() <= 1e-12 * s * m.len() as f64);
            for j in 0..m.len() {
                prop_assert!((m[i][j] - m[j][i]).abs() <= 1e-12 * s);
                if i != j {
                    prop_assert!(m[i][j] <= 1e-12 * s);
                }
            }
        }
        prop_assert!(t.is_connected());
    }

    #[test]
    fn trace_tower((net, b) in network_with_subset(), keep in 2usize..8) {
        let keep = keep.min(b.len());
        let c = &b[..keep];
        let l = net.laplacian();
        let direct = l.trace_to(c).unwrap();
        let stepwise = l.trace_to(&b).unwrap().trace_to(c).unwrap();
        prop_assert!(direct.max_abs_diff(&stepwise).unwrap() <= 1e-10 * scale_of(&direct));
    }

    #[test]
    fn trace_preserves_resistance((net, b) in network_with_subset()) {
        let t = net.laplacian().trace_to(&b).unwrap();
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                let r0 = net.effective_resistance(b[i].as_str(), b[j].as_str()).unwrap();
                let r1 = t.effective_resistance(b[i].as_str(), b[j].as_str()).unwrap();
                prop_assert!((r0 - r1).abs() <= 1e-9 * r0.max(1.0));
            }
        }
    }

    #[test]
    fn resistance_is_a_metric(net in network()) {
        let nodes = net.nodes().to_vec();
        let r = |a: &NodeId, b: &NodeId| net.effective_resistance(a.as_str(), b.as_str()).unwrap();
        for a in &nodes {
            prop_assert_eq!(r(a, a), 0.0);
            for b in &nodes {
                prop_assert!((r(a, b) - r(b, a)).abs() <= 1e-12 * r(a, b).max(1.0));
                if a != b {
                    prop_assert!(r(a, b) > 0.0);
                }
                for c in &nodes {
                    prop_assert!(r(a, c) <= r(a, b) + r(b, c) + 1e-10);
                }
            }
        }
    }

    #[test]
    fn raising_a_conductance_never_raises_resistance(net in network(), pick in any::<prop::sample::Index>(), factor in 1.0f64..50.0) {
        let e = pick.get(net.edges()).clone();
        let mut stronger = net.clone();
        stronger.add_edge(e.u.clone(), e.v.clone(), e.conductance * (factor - 1.0) + 1e-9).unwrap();
        let nodes = net.nodes();
        for a in nodes {
            for b in nodes {
                let before = net.effective_resistance(a.as_str(), b.as_str()).unwrap();
                let after = stronger.effective_resistance(a.as_str(), b.as_str()).unwrap();
                prop_assert!(after <= before * (1.0 + 1e-12) + 1e-14);
            }
        }
    }

    #[test]
    fn harmonic_extension_minimises_energy(
        (net, b) in network_with_subset(),
        vals in prop::collection::vec(-3.0f64..3.0, 9),
        bump in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let l = net.laplacian();
        let bv: BoundaryValues = b.iter().cloned().zip(vals.iter().copied()).collect();
        let h = l.harmonic_extension(&bv).unwrap();
        let lo = vals[..b.len()].iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals[..b.len()].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in h.values() {
            prop_assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
        }
        let e_h = l.energy(&h).unwrap();
        let e_trace = l.trace_to(&b).unwrap().energy(&bv.iter().map(|(n, v)| (n.clone(), v)).collect()).unwrap();
        prop_assert!((e_h - e_trace).abs() <= 1e-9 * e_h.max(1.0));
        let boundary: BTreeSet<_> = b.iter().collect();
        let mut other = h.clone();
        for ((node, v), d) in other.iter_mut().zip(bump.iter().cycle()) {
            if !boundary.contains(node) {
                *v += d;
            }
        }
        prop_assert!(l.energy(&other).unwrap() >= e_h - 1e-9 * e_h.max(1.0));
    }

    #[test]
    fn delta_y_round_trip_preserves_trace(
        a in 0.1f64..10.0, b in 0.1f64..10.0, c in 0.1f64..10.0,
        tail in prop::collection::vec(0.1f64..10.0, 3),
    ) {
        let mut net = ResistorNetwork::from_edges([("x", "y", a), ("y", "z", b), ("x", "z", c)]).unwrap();
        net.ensure_node("t");
        net.ensure_node("s");
        net.add_edge("x", "t", tail[0]).unwrap();
        net.add_edge("y", "t", tail[1]).unwrap();
        net.add_edge("z", "s", tail[2]).unwrap();
        let keep: Vec<NodeId> = ["x", "y", "z", "t", "s"].map(NodeId::from).to_vec();
        let before = net.laplacian().trace_to(&keep).unwrap();
        let star = net.delta_to_y(["x", "y", "z"], "o").unwrap();
        let after = star.laplacian().trace_to(&keep).unwrap();
        prop_assert!(before.max_abs_diff(&after).unwrap() <= 1e-10 * scale_of(&before));
        let back = star.y_to_delta("o").unwrap().parallel_reduced();
        let again = back.laplacian().reordered(&keep).unwrap();
        prop_assert!(before.max_abs_diff(&again).unwrap() <= 1e-10 * scale_of(&before));
    }

    #[test]
    fn series_elimination_preserves_resistance(r1 in 0.01f64..100.0, r2 in 0.01f64..100.0, par in 0.01f64..100.0) {
        let net = ResistorNetwork::from_edges([("a", "m", 1.0 / r1), ("m", "b", 1.0 / r2), ("a", "b", par)]).unwrap();
        let reduced = net.eliminate_series_node("m").unwrap();
        prop_assert_eq!(reduced.node_count(), 2);
        let r0 = net.effective_resistance("a", "b").unwrap();
        let r1_ = reduced.effective_resistance("a", "b").unwrap();
        prop_assert!((r0 - r1_).abs() <= 1e-12 * r0);
        let expected = 1.0 / (par + 1.0 / (r1 + r2));
        prop_assert!((r0 - expected).abs() <= 1e-12 * r0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn renormalization_is_homogeneous(
        schema in builtin(),
        vals in prop::collection::vec(0.1f64..5.0, 10),
        w in prop::collection::vec(0.2f64..3.0, 3),
        c in 0.1f64..10.0,
    ) {
        let m = random_form(&schema, &vals);
        let weights = WeightVector::new(w[..schema.cell_count()].to_vec()).unwrap();
        let base = renormalize(&schema, &weights, &m).unwrap();
        let s = scale_of(&base);
        let scaled_form = renormalize(&schema, &weights, &m.scaled(c)).unwrap();
        prop_assert!(scaled_form.max_abs_diff(&base.scaled(c)).unwrap() <= 1e-11 * s * c.max(1.0));
        let scaled_w = WeightVector::new(weights.as_slice().iter().map(|x| x * c).collect()).unwrap();
        let via_w = renormalize(&schema, &scaled_w, &m).unwrap();
        prop_assert!(via_w.max_abs_diff(&base.scaled(c)).unwrap() <= 1e-11 * s * c.max(1.0));
    }

    #[test]
    fn replication_is_additive(
        schema in builtin(),
        a in prop::collection::vec(0.1f64..5.0, 10),
        b in prop::collection::vec(0.1f64..5.0, 10),
    ) {
        let (ma, mb) = (random_form(&schema, &a), random_form(&schema, &b));
        let w = schema.weights().clone();
        let sum = replicate(&schema, &w, &ma.add(&mb).unwrap()).unwrap();
        let parts = replicate(&schema, &w, &ma).unwrap().add(&replicate(&schema, &w, &mb).unwrap()).unwrap();
        prop_assert!(sum.max_abs_diff(&parts).unwrap() <= 1e-12 * scale_of(&sum));
    }

    #[test]
    fn renormalization_preserves_invariant_forms(
        schema in builtin(),
        vals in prop::collection::vec(0.1f64..5.0, 10),
    ) {
        let m = schema.symmetrize(&random_form(&schema, &vals));
        let image = renormalize(&schema, schema.weights(), &m).unwrap();
        for perm in schema.symmetry_group() {
            prop_assert!(m.max_abs_diff(&permuted(&m, perm)).unwrap() <= 1e-12 * scale_of(&m));
            prop_assert!(image.max_abs_diff(&permuted(&image, perm)).unwrap() <= 1e-11 * scale_of(&image));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn power_iteration_ignores_start_scale(schema in builtin(), seed in 1u64..1000, c in prop::sample::select(vec![0.01, 0.5, 7.0, 300.0])) {
        let opts = SolverOptions::default();
        let start = random_start(&schema, seed);
        let a = power_iterate(&schema, &start, &opts).unwrap();
        let b = power_iterate(&schema, &start.scaled(c), &opts).unwrap();
        prop_assert!((a.lambda - b.lambda).abs() <= 1e-10);
        prop_assert!(a.form.max_abs_diff(&b.form).unwrap() <= 1e-9);
    }

    #[test]
    fn power_iteration_is_deterministic(schema in builtin(), seed in 0u64..1000) {
        let opts = SolverOptions { seed, ..SolverOptions::default() };
        let start = fractal_forms::solver::start_form(&schema, seed);
        let a = power_iterate(&schema, &start, &opts).unwrap();
        let b = power_iterate(&schema, &start, &opts).unwrap();
        prop_assert_eq!(a, b);
    }
}
