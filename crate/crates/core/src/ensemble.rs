//! Length-arrangement ensembles: a fixed topology whose edges receive a fixed
//! list of lengths in every order, the swap distance between arrangements, and
//! the random walk by elementary swaps on the arrangements.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::metric::{MetricSolver, Spectrum};
use crate::shift::interlacing;

/// `perm[i]` is the index into the length list carried by edge `i`.
pub type Permutation = Vec<usize>;

/// Largest edge count for which visit and transition counts are kept.
pub const EXHAUSTIVE_EDGES: usize = 7;
/// Levels kept per arrangement in walk summaries and pair comparisons.
pub const SUMMARY_LEVELS: usize = 200;
/// Fewest levels accepted by [`unfold_and_spacings`].
pub const MIN_UNFOLD_LEVELS: usize = 100;

fn check_permutation(p: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if p.len() != n {
        return Err(Error::Validation(format!("permutation has {} entries, expected {n}", p.len())));
    }
    for &x in p {
        if x >= n || seen[x] {
            return Err(Error::Validation(format!("{p:?} is not a permutation of 0..{n}")));
        }
        seen[x] = true;
    }
    Ok(())
}

/// Minimal number of transpositions taking `pi` to `sigma`: `n − cycles(σπ⁻¹)`.
pub fn swap_distance(pi: &[usize], sigma: &[usize]) -> Result<usize> {
    if pi.len() != sigma.len() {
        return Err(Error::Validation(format!(
            "permutations of different sizes ({} and {})",
            pi.len(),
            sigma.len()
        )));
    }
    let n = pi.len();
    check_permutation(pi, n)?;
    check_permutation(sigma, n)?;
    let mut inv = vec![0; n];
    for (i, &x) in pi.iter().enumerate() {
        inv[x] = i;
    }
    let rho: Vec<usize> = (0..n).map(|x| sigma[inv[x]]).collect();
    let mut seen = vec![false; n];
    let mut cycles = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            x = rho[x];
        }
    }
    Ok(n - cycles)
}

/// A topology with lengths assigned to its edges by a permutation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthArrangement {
    pub topology: MetricGraph,
    pub lengths: Vec<f64>,
    pub perm: Permutation,
}

impl LengthArrangement {
    pub fn new(topology: MetricGraph, lengths: Vec<f64>, perm: Permutation) -> Result<Self> {
        let n = topology.edges().len();
        if lengths.len() != n {
            return Err(Error::Validation(format!("{} lengths for {n} edges", lengths.len())));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Validation(format!("edge length {l} is not positive")));
        }
        check_permutation(&perm, n)?;
        Ok(LengthArrangement { topology, lengths, perm })
    }

    pub fn identity(topology: MetricGraph, lengths: Vec<f64>) -> Result<Self> {
        let n = lengths.len();
        Self::new(topology, lengths, (0..n).collect())
    }

    pub fn graph(&self) -> MetricGraph {
        graph_for(&self.topology, &self.lengths, &self.perm)
    }

    /// Exchanges the lengths on edges `i` and `j` (by position).
    pub fn swap(&mut self, i: usize, j: usize) {
        self.perm.swap(i, j);
    }
}

fn graph_for(topology: &MetricGraph, lengths: &[f64], perm: &[usize]) -> MetricGraph {
    let mut edges = topology.edges().to_vec();
    for (e, &p) in edges.iter_mut().zip(perm) {
        e.length = lengths[p];
    }
    MetricGraph::unchecked(topology.vertices().to_vec(), edges)
}

/// All `n!` permutations of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap_or(i);
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

/// Random walk on arrangements: each step exchanges the lengths of a uniformly
/// chosen pair of edges.
#[derive(Debug, Clone)]
pub struct WalkState {
    pub perm: Permutation,
    pub step: usize,
    pub seed: u64,
    /// Visits per permutation (the start included); kept for at most
    /// [`EXHAUSTIVE_EDGES`] edges.
    pub visits: BTreeMap<Permutation, u64>,
    pub transitions: HashMap<(Permutation, Permutation), u64>,
    rng: ChaCha8Rng,
    exhaustive: bool,
}

impl WalkState {
    pub fn new(start: Permutation, seed: u64) -> Result<Self> {
        check_permutation(&start, start.len())?;
        if start.len() < 2 {
            return Err(Error::Validation("a walk needs at least two edges".into()));
        }
        let exhaustive = start.len() <= EXHAUSTIVE_EDGES;
        let mut visits = BTreeMap::new();
        if exhaustive {
            visits.insert(start.clone(), 1);
        }
        Ok(WalkState {
            perm: start,
            step: 0,
            seed,
            visits,
            transitions: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            exhaustive,
        })
    }

    /// Takes one step and returns the exchanged edge positions.
    pub fn advance(&mut self) -> (usize, usize) {
        let n = self.perm.len();
        let i = self.rng.random_range(0..n);
        let mut j = self.rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let before = self.exhaustive.then(|| self.perm.clone());
        self.perm.swap(i, j);
        self.step += 1;
        if let Some(before) = before {
            *self.visits.entry(self.perm.clone()).or_insert(0) += 1;
            *self.transitions.entry((before, self.perm.clone())).or_insert(0) += 1;
        }
        (i.min(j), i.max(j))
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub n_edges: usize,
    /// Permutations after each step, flattened; `steps + 1` states.
    states: Vec<usize>,
    /// Swap distance of each state from the start.
    pub distances: Vec<usize>,
    pub swaps: Vec<(usize, usize)>,
    pub visits: BTreeMap<Permutation, u64>,
    pub transitions: HashMap<(Permutation, Permutation), u64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn state(&self, i: usize) -> &[usize] {
        &self.states[i * self.n_edges..(i + 1) * self.n_edges]
    }

    /// Chi-squared statistic and p-value of the visit counts against the
    /// uniform distribution on all `n!` arrangements.
    pub fn uniformity(&self) -> Result<(f64, f64)> {
        chi_square_uniform(&self.visits, self.n_edges)
    }
}

/// Runs `steps` steps from the identity arrangement.
pub fn walk(topology: &MetricGraph, lengths: &[f64], steps: usize, seed: u64) -> Result<Trajectory> {
    let arrangement = LengthArrangement::identity(topology.clone(), lengths.to_vec())?;
    let start = arrangement.perm.clone();
    let n = start.len();
    let mut state = WalkState::new(start.clone(), seed)?;
    let mut states = Vec::with_capacity((steps + 1) * n);
    let mut distances = Vec::with_capacity(steps + 1);
    let mut swaps = Vec::with_capacity(steps);
    states.extend_from_slice(&start);
    distances.push(0);
    for _ in 0..steps {
        swaps.push(state.advance());
        states.extend_from_slice(&state.perm);
        distances.push(swap_distance(&start, &state.perm)?);
    }
    Ok(Trajectory {
        n_edges: n,
        states,
        distances,
        swaps,
        visits: state.visits,
        transitions: state.transitions,
    })
}

/// Pearson chi-squared test of `visits` against uniform occupation of the `n!`
/// permutations (unvisited ones count as zero).
pub fn chi_square_uniform(visits: &BTreeMap<Permutation, u64>, n: usize) -> Result<(f64, f64)> {
    if n > EXHAUSTIVE_EDGES {
        return Err(Error::Unsupported(format!("visit counts are not kept for {n} edges")));
    }
    let states: u64 = (1..=n as u64).product();
    let total: u64 = visits.values().sum();
    if states < 2 || total == 0 {
        return Err(Error::InsufficientData("no visits to test".into()));
    }
    let expected = total as f64 / states as f64;
    let visited: f64 = visits.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let unvisited = (states - visits.len() as u64) as f64 * expected;
    let stat = visited + unvisited;
    let dist = ChiSquared::new((states - 1) as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((stat, 1.0 - dist.cdf(stat)))
}

/// Spectra of arrangements, computed on demand and kept by permutation.
pub struct SpectrumCache {
    topology: MetricGraph,
    lengths: Vec<f64>,
    n_levels: usize,
    cache: Mutex<HashMap<Permutation, Arc<Spectrum>>>,
}

impl SpectrumCache {
    pub fn new(topology: MetricGraph, lengths: Vec<f64>, n_levels: usize) -> Result<Self> {
        LengthArrangement::identity(topology.clone(), lengths.clone())?;
        Ok(SpectrumCache { topology, lengths, n_levels, cache: Mutex::new(HashMap::new()) })
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }

    /// Spectra for `perms`, computing the missing ones in parallel.
    pub fn get_many(&self, perms: &[Permutation]) -> Result<Vec<Arc<Spectrum>>> {
        let missing: Vec<Permutation> = {
            let cache = self.cache.lock().map_err(|_| Error::Numerical("spectrum cache poisoned".into()))?;
            let mut m: Vec<Permutation> = perms.iter().filter(|p| !cache.contains_key(*p)).cloned().collect();
            m.sort();
            m.dedup();
            m
        };
        for p in &missing {
            check_permutation(p, self.lengths.len())?;
        }
        let computed: Vec<(Permutation, Spectrum)> = missing
            .into_par_iter()
            .map(|p| {
                let g = graph_for(&self.topology, &self.lengths, &p);
                let s = MetricSolver::new(&g)?.eigenvalues_first(self.n_levels)?;
                Ok((p, s))
            })
            .collect::<Result<_>>()?;
        let mut cache = self.cache.lock().map_err(|_| Error::Numerical("spectrum cache poisoned".into()))?;
        for (p, s) in computed {
            cache.insert(p, Arc::new(s));
        }
        Ok(perms.iter().map(|p| cache[p].clone()).collect())
    }

    pub fn get(&self, perm: &[usize]) -> Result<Arc<Spectrum>> {
        Ok(self.get_many(&[perm.to_vec()])?.remove(0))
    }
}

/// Unfolded spacings `x_{n+1} − x_n` with `x_n = L k_n / π` over the positive levels.
pub fn unfold_and_spacings(spec: &Spectrum, total_length: f64) -> Result<Vec<f64>> {
    let k = spec.wavenumbers();
    if k.len() < MIN_UNFOLD_LEVELS {
        return Err(Error::InsufficientData(format!(
            "unfolding needs at least {MIN_UNFOLD_LEVELS} levels, have {}",
            k.len()
        )));
    }
    if !(total_length > 0.0) {
        return Err(Error::Domain(format!("total length {total_length} is not positive")));
    }
    let scale = total_length / std::f64::consts::PI;
    Ok(k.windows(2).map(|w| scale * (w[1] - w[0])).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRow {
    pub pi: Permutation,
    pub sigma: Permutation,
    pub distance: usize,
    pub degree: usize,
}

impl PairRow {
    pub fn within_bound(&self) -> bool {
        self.degree <= 2 * self.distance
    }
}

/// Interlacing degree against swap distance for `pairs` uniformly drawn pairs
/// of arrangements, each compared over its first `n_levels` levels.
pub fn shift_vs_distance(
    topology: &MetricGraph,
    lengths: &[f64],
    pairs: usize,
    n_levels: usize,
    seed: u64,
) -> Result<Vec<PairRow>> {
    let cache = SpectrumCache::new(topology.clone(), lengths.to_vec(), n_levels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lengths.len();
    let sampled: Vec<(Permutation, Permutation)> = (0..pairs)
        .map(|_| {
            let mut a: Permutation = (0..n).collect();
            let mut b = a.clone();
            a.shuffle(&mut rng);
            b.shuffle(&mut rng);
            (a, b)
        })
        .collect();
    let all: Vec<Permutation> = sampled.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    let spectra = cache.get_many(&all)?;
    sampled
        .into_iter()
        .zip(spectra.chunks(2))
        .map(|((pi, sigma), s)| {
            Ok(PairRow {
                distance: swap_distance(&pi, &sigma)?,
                degree: interlacing(&s[0], &s[1])?.degree,
                pi,
                sigma,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::metric::Level;
    use std::f64::consts::PI;

    #[test]
    fn swap_distance_examples() {
        assert_eq!(swap_distance(&[0, 1, 2], &[0, 1, 2]).unwrap(), 0);
        assert_eq!(swap_distance(&[0, 1, 2], &[0, 2, 1]).unwrap(), 1);
        assert_eq!(swap_distance(&[0, 1, 2, 3, 4, 5], &[1, 2, 3, 4, 5, 0]).unwrap(), 5);
        assert!(swap_distance(&[0, 1], &[0, 1, 2]).is_err());
        assert!(swap_distance(&[0, 0], &[0, 1]).is_err());
    }

    #[test]
    fn swap_distance_matches_breadth_first_search() {
        let perms = all_permutations(4);
        assert_eq!(perms.len(), 24);
        let index: HashMap<Permutation, usize> = perms.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let mut dist = vec![usize::MAX; 24];
        let mut queue = std::collections::VecDeque::from([0]);
        dist[0] = 0;
        while let Some(u) = queue.pop_front() {
            for i in 0..4 {
                for j in i + 1..4 {
                    let mut p = perms[u].clone();
                    p.swap(i, j);
                    let v = index[&p];
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        for (p, d) in perms.iter().zip(&dist) {
            assert_eq!(swap_distance(&perms[0], p).unwrap(), *d);
        }
    }

    #[test]
    fn walk_steps_are_single_swaps() {
        let g = fixtures::tetrahedron();
        let t = walk(&g, &fixtures::tetrahedron_lengths(), 0, 1).unwrap();
        assert_eq!(t.len(), 1);
        let t = walk(&g, &fixtures::tetrahedron_lengths(), 200, 1).unwrap();
        assert_eq!(t.len(), 201);
        for i in 0..200 {
            assert_eq!(swap_distance(t.state(i), t.state(i + 1)).unwrap(), 1);
        }
        let again = walk(&g, &fixtures::tetrahedron_lengths(), 200, 1).unwrap();
        assert_eq!(t.states, again.states);
    }

    #[test]
    fn arrangement_places_lengths() {
        let g = fixtures::lollipop(&[1.0; 4]);
        let mut a = LengthArrangement::identity(g.clone(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        a.swap(0, 3);
        let lengths: Vec<f64> = a.graph().edges().iter().map(|e| e.length).collect();
        assert_eq!(lengths, vec![4.0, 2.0, 3.0, 1.0]);
        assert!(LengthArrangement::new(g, vec![1.0; 4], vec![0, 1, 2, 2]).is_err());
    }

    #[test]
    fn unfolding_analytic_spectra() {
        let interval = Spectrum {
            levels: (1..=150).map(|n| Level { k: n as f64 * PI / 2.0, multiplicity: 1 }).collect(),
            k_max: 151.0 * PI / 2.0,
            zero_modes: 0,
        };
        let s = unfold_and_spacings(&interval, 2.0).unwrap();
        assert!(s.iter().all(|x| (x - 1.0).abs() < 1e-12));
        let ring = Spectrum {
            levels: (1..=80).map(|n| Level { k: 2.0 * PI * n as f64, multiplicity: 2 }).collect(),
            k_max: 161.0 * PI,
            zero_modes: 1,
        };
        let s = unfold_and_spacings(&ring, 1.0).unwrap();
        for (i, x) in s.iter().enumerate() {
            let want = if i % 2 == 0 { 0.0 } else { 2.0 };
            assert!((x - want).abs() < 1e-12);
        }
        let short = interval.truncated(50);
        assert!(matches!(unfold_and_spacings(&short, 2.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn cache_reuses_spectra() {
        let cache = SpectrumCache::new(fixtures::lollipop(&[1.0; 4]), vec![1.0, 1.3, 1.7, 2.2], 30).unwrap();
        let p = vec![vec![0, 1, 2, 3], vec![1, 0, 2, 3], vec![0, 1, 2, 3]];
        let s = cache.get_many(&p).unwrap();
        assert_eq!(cache.cached(), 2);
        assert!(Arc::ptr_eq(&s[0], &s[2]));
    }

    #[test]
    fn pair_table_respects_bound() {
        let rows = shift_vs_distance(&fixtures::lollipop(&[1.0; 4]), &[1.0, 1.3, 1.7, 2.2], 8, 60, 5).unwrap();
        assert_eq!(rows.len(), 8);
        for r in &rows {
            assert!(r.within_bound(), "{r:?}");
            if r.distance == 0 {
                assert_eq!(r.degree, 0);
            }
        }
    }
}
