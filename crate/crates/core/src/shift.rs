//! Spectral shift `ξ(E; A, B) = N_A(E) − N_B(E)` between two metric graphs:
//! pointwise values, the interlacing degree, sampled histograms, the additivity
//! identity under Dirichlet decoupling, and the switch as a limit of crossings.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeEndpoint, EdgeId, End, MetricGraph};
use crate::metric::{dirichlet_decouple, MetricSolver, Spectrum};
use crate::transform::{edge_crossing, edge_reversal, edge_switch, Transformation};

/// Energies within this fraction of `max(1, E)` of an eigenvalue are ambiguous.
pub const ENERGY_TOL: f64 = 1e-9;
/// Levels of the two spectra closer than this (relative) are compared as one cluster.
pub const CLUSTER_TOL: f64 = 1e-9;
/// Fewest levels below the cut for which an interlacing degree is reported.
pub const MIN_LEVELS: usize = 10;
const CHUNK: usize = 1024;

fn count_energies(sorted: &[f64], e: f64) -> usize {
    sorted.partition_point(|&x| x < e)
}

fn near_eigenvalue(sorted: &[f64], e: f64) -> bool {
    let tol = ENERGY_TOL * e.abs().max(1.0);
    let i = sorted.partition_point(|&x| x < e);
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter_map(|j| sorted.get(j))
        .any(|&x| (x - e).abs() <= tol)
}

/// `N_A(E) − N_B(E)`.
pub fn counting_shift(a: &Spectrum, b: &Spectrum, energy: f64) -> Result<i64> {
    let k_top = a.k_max.min(b.k_max);
    if energy >= k_top * k_top {
        return Err(Error::Completeness(format!(
            "energy {energy} is not below the certified bound {}",
            k_top * k_top
        )));
    }
    let (ea, eb) = (a.energies(), b.energies());
    if near_eigenvalue(&ea, energy) || near_eigenvalue(&eb, energy) {
        return Err(Error::AmbiguousCount { k: energy.max(0.0).sqrt(), tol: ENERGY_TOL });
    }
    Ok(count_energies(&ea, energy) as i64 - count_energies(&eb, energy) as i64)
}

/// Upper end of the range on which two spectra are compared: the smaller
/// `k_max` less one mean level spacing.
pub fn certified_cut(a: &Spectrum, b: &Spectrum) -> Result<f64> {
    let spacing = [a, b]
        .iter()
        .map(|s| {
            let n = s.len() + s.zero_modes;
            if n == 0 { f64::INFINITY } else { s.k_max / n as f64 }
        })
        .fold(0.0f64, f64::max);
    let cut = a.k_max.min(b.k_max) - spacing;
    if !(cut > 0.0) {
        return Err(Error::InsufficientData("spectra too short to compare".into()));
    }
    Ok(cut)
}

/// `ξ` just above each cluster of levels below `k_cut`, as `(k, ξ)` pairs.
pub fn shift_profile(a: &Spectrum, b: &Spectrum, k_cut: f64) -> Vec<(f64, i64)> {
    let mut events: Vec<(f64, i64)> = Vec::new();
    if a.zero_modes + b.zero_modes > 0 {
        events.push((0.0, a.zero_modes as i64 - b.zero_modes as i64));
    }
    for (s, sign) in [(a, 1i64), (b, -1i64)] {
        events.extend(s.levels.iter().filter(|l| l.k < k_cut).map(|l| (l.k, sign * l.multiplicity as i64)));
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, i64)> = Vec::new();
    let mut running = 0;
    let mut i = 0;
    while i < events.len() {
        running += events[i].1;
        let mut j = i + 1;
        while j < events.len() && events[j].0 - events[j - 1].0 <= CLUSTER_TOL * events[j].0.max(1.0) {
            running += events[j].1;
            j += 1;
        }
        out.push((events[j - 1].0, running));
        i = j;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Interlacing {
    /// Smallest `r` with `E_{n−r} ≤ Ẽ_n ≤ E_{n+r}` on the compared range.
    pub degree: usize,
    pub k_cut: f64,
    /// Levels (zero modes included) below the cut in each spectrum.
    pub compared: [usize; 2],
    /// Wavenumber just above which the largest `|ξ|` is first reached.
    pub worst_k: Option<f64>,
}

/// Interlacing degree of two spectra over their common certified range.
pub fn interlacing(a: &Spectrum, b: &Spectrum) -> Result<Interlacing> {
    let k_cut = certified_cut(a, b)?;
    let compared = [a.count_below(k_cut), b.count_below(k_cut)];
    if compared.iter().any(|&n| n < MIN_LEVELS) {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_LEVELS} levels below k = {k_cut}, have {compared:?}"
        )));
    }
    let mut degree = 0;
    let mut worst_k = None;
    for (k, xi) in shift_profile(a, b, k_cut) {
        if xi.unsigned_abs() as usize > degree {
            degree = xi.unsigned_abs() as usize;
            worst_k = Some(k);
        }
    }
    Ok(Interlacing { degree, k_cut, compared, worst_k })
}

pub fn interlacing_degree(a: &Spectrum, b: &Spectrum) -> Result<usize> {
    Ok(interlacing(a, b)?.degree)
}

/// Both spectra to at least `n_levels` positive levels, computed concurrently.
pub fn spectra_pair(ga: &MetricGraph, gb: &MetricGraph, n_levels: usize) -> Result<(Spectrum, Spectrum)> {
    let (a, b) = rayon::join(
        || MetricSolver::new(ga)?.eigenvalues_first(n_levels),
        || MetricSolver::new(gb)?.eigenvalues_first(n_levels),
    );
    Ok((a?, b?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftHistogram {
    /// `ξ` value → number of samples.
    pub counts: BTreeMap<i64, usize>,
    pub samples: usize,
    pub resamples: usize,
    pub k_cut: f64,
    pub seed: u64,
}

impl ShiftHistogram {
    pub fn max_abs(&self) -> usize {
        self.counts.keys().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// Fraction of samples with `|ξ| = m`.
    pub fn frequency_abs(&self, m: usize) -> f64 {
        let hits: usize = self.counts.iter().filter(|(k, _)| k.unsigned_abs() as usize == m).map(|(_, c)| c).sum();
        hits as f64 / self.samples as f64
    }

    /// `dN,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dN,count\n");
        for (k, c) in &self.counts {
            out.push_str(&format!("{k},{c}\n"));
        }
        out
    }
}

/// Histogram of `ξ(E)` at `n_samples` energies with `√E` uniform on the
/// certified range. Chunk `i` of the samples draws from ChaCha stream `i`.
pub fn histogram_from_spectra(a: &Spectrum, b: &Spectrum, n_samples: usize, seed: u64) -> Result<ShiftHistogram> {
    let k_cut = certified_cut(a, b)?;
    let (ea, eb) = (a.energies(), b.energies());
    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<(BTreeMap<i64, usize>, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(n_samples - c * CHUNK);
            let mut counts = BTreeMap::new();
            let mut resamples = 0;
            let mut done = 0;
            while done < n {
                let k = rng.random_range(0.0..k_cut);
                let e = k * k;
                if near_eigenvalue(&ea, e) || near_eigenvalue(&eb, e) {
                    resamples += 1;
                    continue;
                }
                let xi = count_energies(&ea, e) as i64 - count_energies(&eb, e) as i64;
                *counts.entry(xi).or_insert(0) += 1;
                done += 1;
            }
            (counts, resamples)
        })
        .collect();
    let mut counts = BTreeMap::new();
    let mut resamples = 0;
    for (part, r) in parts {
        resamples += r;
        for (k, c) in part {
            *counts.entry(k).or_insert(0) += c;
        }
    }
    Ok(ShiftHistogram { counts, samples: n_samples, resamples, k_cut, seed })
}

pub fn shift_histogram(
    ga: &MetricGraph,
    gb: &MetricGraph,
    n_levels: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ShiftHistogram> {
    let (a, b) = spectra_pair(ga, gb, n_levels)?;
    histogram_from_spectra(&a, &b, n_samples, seed)
}

/// Summary of one comparison, as written by the command-line tool.
#[derive(Debug, Clone, Serialize)]
pub struct ShiftReport {
    pub transformations: Vec<String>,
    pub composed_bound: usize,
    pub levels: [usize; 2],
    pub k_cut: f64,
    pub interlacing_degree: usize,
    pub worst_k: Option<f64>,
    pub max_abs_shift: usize,
    pub histogram: BTreeMap<i64, usize>,
    pub samples: usize,
    pub resamples: usize,
    pub seed: u64,
    pub within_bound: bool,
}

impl ShiftReport {
    pub fn new(a: &Spectrum, b: &Spectrum, steps: &[Transformation], n_samples: usize, seed: u64) -> Result<Self> {
        let il = interlacing(a, b)?;
        let h = histogram_from_spectra(a, b, n_samples, seed)?;
        let composed_bound = crate::transform::composed_bound(steps);
        Ok(ShiftReport {
            transformations: steps.iter().map(|t| t.describe()).collect(),
            composed_bound,
            levels: il.compared,
            k_cut: il.k_cut,
            interlacing_degree: il.degree,
            worst_k: il.worst_k,
            max_abs_shift: h.max_abs(),
            histogram: h.counts,
            samples: h.samples,
            resamples: h.resamples,
            seed,
            within_bound: il.degree <= composed_bound,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdditivityReport {
    /// `max_E |ξ(H, H̃) − [ξ(H, H₀) − ξ(H̃, H̃₀)]|`.
    pub residual: u64,
    /// `max_E |ξ(H, H̃)|`.
    pub max_shift: u64,
    /// `max_E |ξ(H, H₀)|` and `max_E |ξ(H̃, H̃₀)|`.
    pub max_decoupling_shift: [u64; 2],
    pub energies: usize,
    pub resamples: usize,
}

/// Evaluates the additivity identity for `H`, `H̃` and their Dirichlet
/// decouplings `H₀`, `H̃₀`, at `n_energies` energies with `√E` uniform on `(0, k_max)`.
pub fn additivity(
    graphs: [&MetricGraph; 4],
    n_energies: usize,
    k_max: f64,
    seed: u64,
) -> Result<AdditivityReport> {
    let solvers: Vec<MetricSolver> = graphs.iter().map(|g| MetricSolver::new(g)).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AdditivityReport { residual: 0, max_shift: 0, max_decoupling_shift: [0, 0], energies: 0, resamples: 0 };
    while report.energies < n_energies {
        let k = rng.random_range(0.0..k_max);
        let counts: Result<Vec<i64>> = solvers.iter().map(|s| s.count(k).map(|n| n as i64)).collect();
        let n = match counts {
            Ok(n) => n,
            Err(Error::AmbiguousCount { .. }) | Err(Error::Domain(_)) => {
                report.resamples += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let direct = n[0] - n[1];
        let via = (n[0] - n[2]) - (n[1] - n[3]);
        report.residual = report.residual.max((direct - via).unsigned_abs());
        report.max_shift = report.max_shift.max(direct.unsigned_abs());
        report.max_decoupling_shift[0] = report.max_decoupling_shift[0].max((n[0] - n[2]).unsigned_abs());
        report.max_decoupling_shift[1] = report.max_decoupling_shift[1].max((n[1] - n[3]).unsigned_abs());
        report.energies += 1;
    }
    Ok(report)
}

/// Additivity for the crossing of `e` at `s_e` with `f` at `s_f`. The crossed
/// graph is decoupled at the same coordinates, which after the crossing are
/// again the junctions of the exchanged pieces.
pub fn additivity_check(
    g: &MetricGraph,
    e: EdgeId,
    s_e: f64,
    f: EdgeId,
    s_f: f64,
    n_energies: usize,
    k_max: f64,
    seed: u64,
) -> Result<AdditivityReport> {
    let crossed = edge_crossing(g, e, s_e, f, s_f)?;
    let cuts = [(e, s_e), (f, s_f)];
    let h0 = dirichlet_decouple(g, &cuts)?;
    let ht0 = dirichlet_decouple(&crossed, &cuts)?;
    additivity([g, &crossed, &h0, &ht0], n_energies, k_max, seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingLimit {
    pub eps: Vec<f64>,
    /// `|k_n(ε) − k_n(switch)|` for the first levels, one row per `ε`.
    pub errors: Vec<Vec<f64>>,
    pub max_errors: Vec<f64>,
    /// Maximum error non-increasing along the `ε` sequence (up to 1e-10).
    pub monotone: bool,
}

/// Compares the switch of `p` and `q` with the crossings at distance `ε` from
/// the switched endpoints. Edges are first oriented so that both switched
/// endpoints are heads; the crossing is then taken at `(L_e − ε, L_f − ε)`.
pub fn switch_as_crossing_limit(
    g: &MetricGraph,
    p: EdgeEndpoint,
    q: EdgeEndpoint,
    eps: &[f64],
    n_levels: usize,
) -> Result<CrossingLimit> {
    if p.edge == q.edge {
        return Err(Error::Precondition("switch needs two distinct edges".into()));
    }
    if eps.is_empty() || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("eps sequence must be nonempty and strictly decreasing".into()));
    }
    let mut oriented = g.clone();
    for x in [p, q] {
        if x.end == End::Tail {
            oriented = edge_reversal(&oriented, x.edge)?;
        }
    }
    let le = oriented.edge(p.edge).map(|x| x.length).unwrap_or(0.0);
    let lf = oriented.edge(q.edge).map(|x| x.length).unwrap_or(0.0);
    let limit = le.min(lf) / 2.0;
    if let Some(&bad) = eps.iter().find(|&&x| !(x > 0.0) || x >= limit) {
        return Err(Error::Precondition(format!("eps {bad} must lie in (0, {limit})")));
    }
    let switched = edge_switch(&oriented, EdgeEndpoint::head(p.edge), EdgeEndpoint::head(q.edge))?;
    let reference = MetricSolver::new(&switched)?.eigenvalues_first(n_levels)?;
    let k_ref = first_wavenumbers(&reference, n_levels);
    let errors: Vec<Vec<f64>> = eps
        .par_iter()
        .map(|&x| {
            let crossed = edge_crossing(&oriented, p.edge, le - x, q.edge, lf - x)?;
            let spec = MetricSolver::new(&crossed)?.eigenvalues_first(n_levels)?;
            Ok(first_wavenumbers(&spec, n_levels).iter().zip(&k_ref).map(|(a, b)| (a - b).abs()).collect())
        })
        .collect::<Result<_>>()?;
    let max_errors: Vec<f64> = errors.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
    let monotone = max_errors.windows(2).all(|w| w[1] <= w[0] + 1e-10);
    Ok(CrossingLimit { eps: eps.to_vec(), errors, max_errors, monotone })
}

fn first_wavenumbers(s: &Spectrum, n: usize) -> Vec<f64> {
    let mut k = vec![0.0; s.zero_modes];
    k.extend(s.wavenumbers());
    k.truncate(n);
    k
}

/// Transformation families with a tabulated interlacing bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Switch,
    Crossing,
    Reversal,
    Swap,
    SegmentExchange,
}

impl TransformKind {
    pub const ALL: [TransformKind; 5] = [
        TransformKind::Switch,
        TransformKind::Crossing,
        TransformKind::Reversal,
        TransformKind::Swap,
        TransformKind::SegmentExchange,
    ];

    pub fn bound(self) -> usize {
        match self {
            TransformKind::Switch | TransformKind::Crossing | TransformKind::Reversal => 1,
            TransformKind::Swap | TransformKind::SegmentExchange => 2,
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TransformKind::Switch => "switch",
            TransformKind::Crossing => "crossing",
            TransformKind::Reversal => "reversal",
            TransformKind::Swap => "swap",
            TransformKind::SegmentExchange => "segment exchange",
        };
        f.write_str(s)
    }
}

/// A random transformation of the given kind on `g` (at least two edges).
pub fn random_transformation<R: Rng + ?Sized>(kind: TransformKind, g: &MetricGraph, rng: &mut R) -> Result<Transformation> {
    let edges = g.edges();
    if edges.len() < 2 {
        return Err(Error::Precondition("need at least two edges".into()));
    }
    let i = rng.random_range(0..edges.len());
    let mut j = rng.random_range(0..edges.len() - 1);
    if j >= i {
        j += 1;
    }
    let (e, f) = (&edges[i], &edges[j]);
    let end = |rng: &mut R| if rng.random_bool(0.5) { End::Head } else { End::Tail };
    let interior = |rng: &mut R, len: f64| rng.random_range(0.1 * len..0.9 * len);
    let pair = |rng: &mut R, len: f64| {
        let a = rng.random_range(0.05 * len..0.6 * len);
        let b = rng.random_range(a + 0.1 * len..0.95 * len);
        [a, b]
    };
    Ok(match kind {
        TransformKind::Switch => Transformation::Switch {
            p: EdgeEndpoint::new(e.id, end(rng)),
            q: EdgeEndpoint::new(f.id, end(rng)),
        },
        TransformKind::Crossing => Transformation::Crossing {
            e: e.id,
            s_e: interior(rng, e.length),
            f: f.id,
            s_f: interior(rng, f.length),
        },
        TransformKind::Reversal => Transformation::Reversal { edge: e.id },
        TransformKind::Swap => Transformation::Swap { e: e.id, f: f.id },
        TransformKind::SegmentExchange => Transformation::SegmentExchange {
            e: e.id,
            s: pair(rng, e.length),
            f: f.id,
            t: pair(rng, f.length),
        },
    })
}
