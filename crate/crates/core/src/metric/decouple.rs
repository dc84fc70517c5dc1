use crate::error::{Error, Result};
use crate::graph::{BoundaryCondition, EdgeId, MetricGraph};

/// Inserts a Dirichlet vertex at each `(edge, s)` point, cutting the graph there.
/// Positions refer to the input graph; several cuts on one edge are allowed.
pub fn dirichlet_decouple(g: &MetricGraph, points: &[(EdgeId, f64)]) -> Result<MetricGraph> {
    let mut sorted = points.to_vec();
    // Cut each edge from the head side first so the tail piece keeps the id
    // and the remaining positions stay valid.
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
            return Err(Error::Domain(format!("repeated cut point ({}, {})", w[0].0, w[0].1)));
        }
    }
    let mut out = g.clone();
    for (e, s) in sorted {
        out = out.split_edge(e, s, BoundaryCondition::Dirichlet)?.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::metric::eigenvalues_up_to;
    use std::f64::consts::PI;

    #[test]
    fn cut_loop_is_dirichlet_interval() {
        let g = dirichlet_decouple(&fixtures::loop_graph(1.0, 0.0), &[(0, 0.37)]).unwrap();
        let s = eigenvalues_up_to(&g, 10.0).unwrap();
        assert_eq!(s.zero_modes, 0);
        let ks = s.wavenumbers();
        assert_eq!(ks.len(), 3);
        for (n, k) in ks.iter().enumerate() {
            assert!((k - (n + 1) as f64 * PI).abs() < 1e-10);
        }
    }

    #[test]
    fn cut_interval_is_union_of_intervals() {
        let g = dirichlet_decouple(&fixtures::interval(1.0), &[(0, 0.4)]).unwrap();
        let s = eigenvalues_up_to(&g, 20.0).unwrap();
        let mut want: Vec<f64> = (1..7)
            .map(|n| n as f64 * PI / 0.4)
            .chain((1..7).map(|n| n as f64 * PI / 0.6))
            .filter(|&k| k < 20.0)
            .collect();
        want.sort_by(f64::total_cmp);
        let got = s.wavenumbers();
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn two_cuts_on_one_edge() {
        let g = dirichlet_decouple(&fixtures::interval(1.0), &[(0, 0.2), (0, 0.7)]).unwrap();
        assert_eq!(g.edges().len(), 3);
        assert!(g.edges().iter().all(|e| e.length > 0.0));
        let lengths = g.length_multiset();
        assert!((lengths[0] - 0.2).abs() < 1e-15 && (lengths[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn boundary_point_rejected() {
        let g = fixtures::interval(1.0);
        assert!(matches!(dirichlet_decouple(&g, &[(0, 1.0)]), Err(Error::Domain(_))));
    }
}
