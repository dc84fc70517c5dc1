use edgeswitch::discrete::{
    assemble, discrete_edge_switch, lambda_study, random_chain_cluster, Coupling, DiscreteGraph, LAMBDA_GRID,
};
use edgeswitch::ensemble::{all_permutations, swap_distance};
use edgeswitch::fixtures::{self, RandomGraphOptions};
use edgeswitch::graph::insert_kirchhoff_vertex;
use edgeswitch::metric::eigenvalues_first;
use edgeswitch::oracle::{discretize, Stencil};
use edgeswitch::perturbation::{sweep, RangeMode, SweepOptions};
use edgeswitch::shift::{self, random_transformation, TransformKind};
use edgeswitch::transform::{edge_switch, replay};
use edgeswitch::{BoundaryCondition, Edge, EdgeEndpoint, End, MetricGraph, Vertex};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn levels(g: &MetricGraph, n: usize) -> Vec<f64> {
    let s = eigenvalues_first(g, n).unwrap();
    let mut k = vec![0.0; s.zero_modes];
    k.extend(s.wavenumbers());
    k.truncate(n);
    k
}

fn assert_same_levels(a: &[f64], b: &[f64], tol: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.len(), b.len());
    for (n, (x, y)) in a.iter().zip(b).enumerate() {
        prop_assert!((x - y).abs() <= tol, "level {}: {} vs {}", n, x, y);
    }
    Ok(())
}

fn kind_strategy() -> impl Strategy<Value = TransformKind> {
    prop::sample::select(TransformKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inserting_a_vertex_leaves_the_spectrum(seed in any::<u64>(), frac in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_graph(&mut rng, &RandomGraphOptions::default());
        let e = &g.edges()[rng.random_range(0..g.edges().len())];
        let split = insert_kirchhoff_vertex(&g, e.id, frac * e.length).unwrap();
        assert_same_levels(&levels(&g, 40), &levels(&split, 40), 1e-8)?;
    }

    #[test]
    fn vertex_gauge_leaves_the_spectrum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_graph(&mut rng, &RandomGraphOptions::default());
        let phi: Vec<f64> = g.vertices().iter().map(|_| rng.random_range(-3.0..3.0)).collect();
        let edges: Vec<Edge> = g
            .edges()
            .iter()
            .map(|e| Edge { alpha: e.alpha + phi[e.head] - phi[e.tail], ..*e })
            .collect();
        let gauged = MetricGraph::new(g.vertices().to_vec(), edges).unwrap();
        assert_same_levels(&levels(&g, 30), &levels(&gauged, 30), 1e-8)?;
    }

    #[test]
    fn discrete_gauge_leaves_the_spectrum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, _) = random_chain_cluster(&mut rng, &Default::default());
        let phi: Vec<f64> = (0..g.n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let gauged = DiscreteGraph {
            couplings: g
                .couplings
                .iter()
                .map(|c| Coupling { theta: c.theta + phi[c.u] - phi[c.v], ..*c })
                .collect(),
            ..g.clone()
        };
        let a = assemble(&g).unwrap().eigenvalues();
        let b = assemble(&gauged).unwrap().eigenvalues();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn decomposition_replays_to_the_same_graph(seed in any::<u64>(), kind in kind_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_graph(&mut rng, &RandomGraphOptions::default());
        let t = random_transformation(kind, &g, &mut rng).unwrap();
        let direct = t.apply(&g).unwrap();
        let steps = t.decompose(&g).unwrap();
        prop_assert!(steps.iter().all(|s| s.is_primitive()));
        prop_assert!(direct.approx_eq_canonical(&replay(&g, &steps).unwrap(), 1e-12));
    }

    #[test]
    fn transformations_keep_total_length_and_degrees(seed in any::<u64>(), kind in kind_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_graph(&mut rng, &RandomGraphOptions::default());
        let h = random_transformation(kind, &g, &mut rng).unwrap().apply(&g).unwrap();
        prop_assert!((g.total_length() - h.total_length()).abs() < 1e-12 * g.total_length());
        prop_assert_eq!(g.degree_sequence(), h.degree_sequence());
        prop_assert_eq!(g.edges().len(), h.edges().len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lambda_family_is_monotone_and_stabilizes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, site) = random_chain_cluster(&mut rng, &Default::default());
        let h = assemble(&g).unwrap();
        let st = lambda_study(&h, &site, &LAMBDA_GRID, 30, &mut rng).unwrap();
        prop_assert!(st.monotone);
        prop_assert!(st.max_decrease <= 2);
        prop_assert!(st.stabilized);
        prop_assert!(st.max_conjugate_shift <= 1);
        prop_assert!(st.conjugate_ranks.iter().all(|&r| r == 2));
    }

    #[test]
    fn discretization_commutes_with_the_switch(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 0.05;
        let nv = rng.random_range(2..=4);
        let vertices: Vec<Vertex> = (0..nv).map(|id| Vertex { id, bc: BoundaryCondition::Kirchhoff }).collect();
        let edges: Vec<Edge> = (0..rng.random_range(3..=6))
            .map(|id| Edge {
                id,
                tail: rng.random_range(0..nv),
                head: rng.random_range(0..nv),
                length: rng.random_range(4..=12) as f64 * h,
                alpha: rng.random_range(-3.0..3.0),
            })
            .collect();
        let g = MetricGraph::new(vertices, edges).unwrap();
        let m = g.edges().len();
        let e = rng.random_range(0..m);
        let f = (e + rng.random_range(1..m)) % m;
        let switched = edge_switch(&g, EdgeEndpoint::head(e), EdgeEndpoint::head(f)).unwrap();

        let d = discretize(&g, h, None, Stencil::Plain).unwrap();
        let (a, a_next, a_vert) = d.chain_end(e, End::Head);
        let (b, b_next, b_vert) = d.chain_end(f, End::Head);
        let site = edgeswitch::discrete::SwitchSite {
            a, a_next, a_vert: a_vert.unwrap(), b, b_next, b_vert: b_vert.unwrap(),
        };
        let via_discrete = discrete_edge_switch(&d.operator().unwrap(), &site).unwrap();
        let via_metric = discretize(&switched, h, None, Stencil::Plain).unwrap().operator().unwrap();
        let diff = (via_discrete.matrix() - via_metric.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-9, "operators differ by {}", diff);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn histogram_never_exceeds_the_interlacing_degree(seed in any::<u64>(), kind in kind_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_graph(&mut rng, &RandomGraphOptions::default());
        let t = random_transformation(kind, &g, &mut rng).unwrap();
        let h = t.apply(&g).unwrap();
        let (a, b) = shift::spectra_pair(&g, &h, 300).unwrap();
        let il = shift::interlacing(&a, &b).unwrap();
        let hist = shift::histogram_from_spectra(&a, &b, 2000, seed).unwrap();
        prop_assert!(hist.max_abs() <= il.degree);
        prop_assert!(il.degree <= t.interlacing_bound(), "{} gave {}", t.describe(), il.degree);
    }
}

#[test]
fn swap_distance_is_a_metric_on_four_letters() {
    let perms = all_permutations(4);
    let d: Vec<Vec<usize>> = perms.iter().map(|p| perms.iter().map(|q| swap_distance(p, q).unwrap()).collect()).collect();
    for i in 0..24 {
        assert_eq!(d[i][i], 0);
        for j in 0..24 {
            assert_eq!(d[i][j], d[j][i]);
            assert_eq!(d[i][j] == 0, i == j);
            for k in 0..24 {
                assert!(d[i][k] <= d[i][j] + d[j][k]);
            }
        }
    }
}

#[test]
fn lemma_sweep_in_both_modes() {
    for mode in [RangeMode::Balanced, RangeMode::Generic] {
        let verdicts = sweep(&SweepOptions { n: 12, ranks: vec![1, 2, 3, 4], fixtures: 20, energies: 30, mode, seed: 8 }).unwrap();
        for v in &verdicts {
            assert!(v.rank_bound.holds, "fixture {}", v.index);
            assert!(v.chain_step <= 1);
            if mode == RangeMode::Balanced {
                assert!(v.reflection.holds, "fixture {}", v.index);
                assert!(v.reflection.antisymmetry_defect <= 1e-10);
            }
        }
    }
}

#[test]
fn walk_transitions_are_reversible() {
    let t = edgeswitch::ensemble::walk(&fixtures::lollipop(&[1.0; 4]), &[1.0, 1.4, 1.7, 2.2], 200_000, 3).unwrap();
    assert_eq!(t.transitions.len(), 24 * 6);
    for ((p, q), &forward) in &t.transitions {
        let backward = t.transitions[&(q.clone(), p.clone())];
        let spread = ((forward + backward) as f64).sqrt();
        assert!((forward as f64 - backward as f64).abs() <= 5.0 * spread, "{p:?} -> {q:?}: {forward} vs {backward}");
    }
}
