//! Exact eigenvalue counting and certified spectra for the Laplacian on a metric graph.
//!
//! For `k > 0` let `r_j(k) ∈ [0, 2π)` be the reduced eigenphases of `U(k)`.
//! The phases increase monotonically in `k`, and the continuous branches sum to
//! `Φ(k) + F₀`, where `Φ(k) = 2kΣL + Σ_δ [π − 2 atan(χ/(k d_v))]` is the phase of
//! `det U(k)` relative to `k = 0` and `F₀ = Σ r_j(0)`. Every completed winding of a
//! branch through `2π` is one eigenvalue, so
//!
//! ```text
//! N(k) = (Φ(k) − Σ r_j(k) + F₀) / 2π
//! ```
//!
//! is an integer computed from a single eigendecomposition. The grid and the
//! bracketing below only serve to locate the individual levels.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bonds::SecularOperator;
use crate::error::{Error, Result};
use crate::graph::{BoundaryCondition, MetricGraph};
use crate::linalg::wrap;

const TWO_PI: f64 = 2.0 * PI;

/// Phases closer than this to zero make a count ambiguous.
pub const DEFAULT_COUNT_TOL: f64 = 1e-9;
/// Root refinement stops once the crossing phase is this close to zero.
pub const PHASE_TOL: f64 = 1e-11;
/// Largest admissible deviation of the counting formula from an integer.
const INTEGRALITY_TOL: f64 = 1e-6;

/// One eigenvalue `E = k²` with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub k: f64,
    pub multiplicity: usize,
}

/// Eigenvalues `0 < k_n < k_max`, complete below `k_max`, plus the zero modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub levels: Vec<Level>,
    pub k_max: f64,
    pub zero_modes: usize,
}

impl Spectrum {
    /// Number of positive levels counted with multiplicity.
    pub fn len(&self) -> usize {
        self.levels.iter().map(|l| l.multiplicity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Positive wavenumbers repeated by multiplicity.
    pub fn wavenumbers(&self) -> Vec<f64> {
        self.levels
            .iter()
            .flat_map(|l| std::iter::repeat_n(l.k, l.multiplicity))
            .collect()
    }

    /// All energies `E_n` in ascending order, zero modes included.
    pub fn energies(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.zero_modes];
        e.extend(self.wavenumbers().into_iter().map(|k| k * k));
        e
    }

    /// Number of eigenvalues strictly below `k²`, zero modes included for `k > 0`.
    pub fn count_below(&self, k: f64) -> usize {
        if k <= 0.0 {
            return 0;
        }
        self.zero_modes
            + self
                .levels
                .iter()
                .take_while(|l| l.k < k)
                .map(|l| l.multiplicity)
                .sum::<usize>()
    }

    /// Keeps the first `n` positive levels (a degenerate level is kept whole) and
    /// lowers `k_max` to the midpoint of the gap that follows, preserving completeness.
    pub fn truncated(&self, n: usize) -> Spectrum {
        let mut acc = 0;
        let mut keep = 0;
        for l in &self.levels {
            if acc >= n {
                break;
            }
            acc += l.multiplicity;
            keep += 1;
        }
        if keep == self.levels.len() {
            return self.clone();
        }
        let k_max = 0.5 * (self.levels[keep - 1].k + self.levels[keep].k);
        Spectrum { levels: self.levels[..keep].to_vec(), k_max, zero_modes: self.zero_modes }
    }
}

/// Number of zero modes (`E = 0`): one per component that carries edges, has
/// no Dirichlet or positive delta vertex, and trivial flux around every cycle.
pub fn zero_modes(g: &MetricGraph) -> usize {
    let mut total = 0;
    for comp in g.components() {
        let edges: Vec<_> = g.edges().iter().filter(|e| comp.contains(&e.tail)).collect();
        if edges.is_empty() {
            continue;
        }
        let confining = comp.iter().any(|&v| {
            g.vertex(v).is_some_and(|x| match x.bc {
                BoundaryCondition::Dirichlet => true,
                BoundaryCondition::Delta(c) => c != 0.0,
                BoundaryCondition::Kirchhoff => false,
            })
        });
        if confining {
            continue;
        }
        // Potentials along a spanning tree, then check every edge.
        let mut pot: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
        pot.insert(comp[0], 0.0);
        let mut changed = true;
        while changed {
            changed = false;
            for e in &edges {
                match (pot.get(&e.tail).copied(), pot.get(&e.head).copied()) {
                    (Some(p), None) => {
                        pot.insert(e.head, p + e.alpha);
                        changed = true;
                    }
                    (None, Some(p)) => {
                        pot.insert(e.tail, p - e.alpha);
                        changed = true;
                    }
                    _ => {}
                }
            }
        }
        let trivial = edges
            .iter()
            .all(|e| wrap(pot[&e.tail] + e.alpha - pot[&e.head]).abs() <= 1e-9);
        if trivial {
            total += 1;
        }
    }
    total
}

/// Reduced eigenphases and positive-level count at one wavenumber.
#[derive(Debug, Clone)]
struct Sample {
    k: f64,
    /// Reduced phases in [0, 2π), ascending.
    r: Vec<f64>,
    /// Eigenvalues in (0, k], without zero modes.
    count: usize,
}

impl Sample {
    /// Distance of the closest phase to a crossing, from below (≤ 0).
    fn below(&self) -> f64 {
        self.r.last().map_or(-TWO_PI, |&x| x - TWO_PI)
    }

    /// Distance of the closest phase past a crossing (≥ 0).
    fn above(&self) -> f64 {
        self.r.first().copied().unwrap_or(TWO_PI)
    }

    fn min_abs_phase(&self) -> f64 {
        self.above().min(-self.below())
    }
}

/// Counting and level location for one graph.
#[derive(Debug, Clone)]
pub struct MetricSolver {
    op: SecularOperator,
    total_length: f64,
    deltas: Vec<(f64, usize)>,
    f0: f64,
    zero_modes: usize,
}

impl MetricSolver {
    pub fn new(g: &MetricGraph) -> Result<Self> {
        let op = SecularOperator::new(g)?;
        let deltas = g
            .vertices()
            .iter()
            .filter_map(|v| match v.bc {
                BoundaryCondition::Delta(chi) if chi > 0.0 => Some((chi, g.degree(v.id))),
                _ => None,
            })
            .filter(|&(_, d)| d > 0)
            .collect();
        let f0 = phases_at_zero(&op)?.iter().sum();
        Ok(MetricSolver { op, total_length: g.total_length(), deltas, f0, zero_modes: zero_modes(g) })
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn zero_modes(&self) -> usize {
        self.zero_modes
    }

    fn det_phase(&self, k: f64) -> f64 {
        let mut phi = 2.0 * k * self.total_length;
        if k > 0.0 {
            for &(chi, d) in &self.deltas {
                phi += PI - 2.0 * (chi / (k * d as f64)).atan();
            }
        }
        phi
    }

    fn sample(&self, k: f64) -> Result<Sample> {
        let mut r: Vec<f64> = self.op.phases(k)?.into_iter().map(reduce).collect();
        r.sort_by(f64::total_cmp);
        let x = (self.det_phase(k) - r.iter().sum::<f64>() + self.f0) / TWO_PI;
        let n = x.round();
        if (x - n).abs() > INTEGRALITY_TOL || n < 0.0 {
            return Err(Error::Numerical(format!(
                "counting formula gave non-integer {x} at k = {k}"
            )));
        }
        Ok(Sample { k, r, count: n as usize })
    }

    /// `N(k²)`: eigenvalues strictly below `k²`, zero modes included.
    pub fn count(&self, k: f64) -> Result<usize> {
        self.count_with_tol(k, DEFAULT_COUNT_TOL)
    }

    pub fn count_with_tol(&self, k: f64, tol: f64) -> Result<usize> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Domain(format!("count needs finite k > 0, got {k}")));
        }
        let s = self.sample(k)?;
        if s.min_abs_phase() < tol {
            return Err(Error::AmbiguousCount { k, tol });
        }
        Ok(self.zero_modes + s.count)
    }

    /// All levels with `k < k_max`. If `k_max` itself sits on an eigenvalue it is
    /// lowered slightly; the returned `k_max` is the certified bound.
    pub fn eigenvalues_up_to(&self, k_max: f64) -> Result<Spectrum> {
        if !(k_max > 0.0) || !k_max.is_finite() {
            return Err(Error::Domain(format!("k_max must be finite and positive, got {k_max}")));
        }
        let mut top = self.sample(k_max)?;
        let mut tries = 0;
        while top.min_abs_phase() < DEFAULT_COUNT_TOL {
            tries += 1;
            if tries > 20 {
                return Err(Error::Completeness(format!("could not move k_max = {k_max} off the spectrum")));
            }
            top = self.sample(top.k - 1e-7 * top.k.max(1.0))?;
        }
        let k_top = top.k;
        let dk = PI / (2.0 * self.total_length);
        let n = ((k_top / dk).ceil() as usize).max(1);
        let mut samples: Vec<Sample> = (1..n)
            .into_par_iter()
            .map(|j| self.sample(j as f64 * k_top / n as f64))
            .collect::<Result<_>>()?;
        samples.insert(0, Sample { k: 0.0, r: phases_at_zero(&self.op)?, count: 0 });
        samples.push(top);
        for w in samples.windows(2) {
            if w[1].count < w[0].count {
                return Err(Error::Numerical(format!(
                    "count decreased between k = {} and k = {}",
                    w[0].k, w[1].k
                )));
            }
        }
        let found: Vec<Vec<Level>> = samples
            .par_windows(2)
            .filter(|w| w[1].count > w[0].count)
            .map(|w| {
                let mut out = Vec::new();
                self.locate(&w[0], &w[1], &mut out)?;
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let levels = merge_levels(found.into_iter().flatten().collect());
        let spec = Spectrum { levels, k_max: k_top, zero_modes: self.zero_modes };
        let expected = samples.last().map_or(0, |s| s.count);
        if spec.len() != expected {
            return Err(Error::Completeness(format!(
                "located {} levels below k = {k_top}, counting formula gives {expected}",
                spec.len()
            )));
        }
        Ok(spec)
    }

    /// Spectrum containing at least the first `n` positive levels.
    pub fn eigenvalues_first(&self, n: usize) -> Result<Spectrum> {
        let mut k = PI * (n as f64 + 2.0) / self.total_length;
        loop {
            let s = self.sample(k)?;
            if s.count > n {
                break;
            }
            k *= 1.1;
        }
        Ok(self.eigenvalues_up_to(k)?.truncated(n))
    }

    fn locate(&self, lo: &Sample, hi: &Sample, out: &mut Vec<Level>) -> Result<()> {
        let m = hi.count - lo.count;
        if m == 0 {
            return Ok(());
        }
        if m == 1 {
            out.push(Level { k: self.refine_single(lo, hi)?, multiplicity: 1 });
            return Ok(());
        }
        if hi.k - lo.k <= merge_width(hi.k) {
            out.push(Level { k: 0.5 * (lo.k + hi.k), multiplicity: m });
            return Ok(());
        }
        let mid = self.sample(0.5 * (lo.k + hi.k))?;
        if mid.count < lo.count || mid.count > hi.count {
            return Err(Error::Refinement(format!(
                "count {} at k = {} outside bracket [{}, {}]",
                mid.count, mid.k, lo.count, hi.count
            )));
        }
        self.locate(lo, &mid, out)?;
        self.locate(&mid, hi, out)
    }

    /// Illinois iteration on the phase nearest to crossing, bracketed by counts.
    fn refine_single(&self, lo: &Sample, hi: &Sample) -> Result<f64> {
        let (mut a, mut fa) = (lo.k, lo.below());
        let (mut b, mut fb) = (hi.k, hi.above());
        if fb <= PHASE_TOL {
            return Ok(b);
        }
        if -fa <= PHASE_TOL {
            return Ok(a);
        }
        let mut side = 0i8;
        let mut widths = [b - a; 2];
        for iter in 0..200 {
            let w = b - a;
            if w <= 4.0 * f64::EPSILON * b {
                let s = self.sample(0.5 * (a + b))?;
                if s.min_abs_phase() <= 1e-9 {
                    return Ok(s.k);
                }
                break;
            }
            let mut x = a - fa * (b - a) / (fb - fa);
            // Fall back to bisection when the secant stalls.
            if !(x > a && x < b) || (iter >= 2 && w > 0.5 * widths[0]) {
                x = 0.5 * (a + b);
            }
            widths = [widths[1], w];
            let s = self.sample(x)?;
            if s.count == lo.count {
                let f = s.below();
                if -f <= PHASE_TOL {
                    return Ok(x);
                }
                a = x;
                fa = f;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else if s.count == hi.count {
                let f = s.above();
                if f <= PHASE_TOL {
                    return Ok(x);
                }
                b = x;
                fb = f;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            } else {
                return Err(Error::Refinement(format!(
                    "count {} at k = {x} outside bracket [{}, {}]",
                    s.count, lo.count, hi.count
                )));
            }
        }
        Err(Error::Refinement(format!(
            "no convergence in [{a}, {b}] (phases {fa:e}, {fb:e})"
        )))
    }
}

/// Reduced phases at k = 0. Phases just below 2π are zero phases that move up.
fn phases_at_zero(op: &SecularOperator) -> Result<Vec<f64>> {
    let mut r: Vec<f64> = op
        .phases(0.0)?
        .into_iter()
        .map(|p| {
            let r = reduce(p);
            if r > TWO_PI - 1e-9 {
                0.0
            } else {
                r
            }
        })
        .collect();
    r.sort_by(f64::total_cmp);
    Ok(r)
}

fn reduce(p: f64) -> f64 {
    if p < 0.0 {
        p + TWO_PI
    } else {
        p
    }
}

fn merge_width(k: f64) -> f64 {
    1e-11 + 1e-14 * k
}

/// Joins levels that coincide to within resolution.
fn merge_levels(mut levels: Vec<Level>) -> Vec<Level> {
    levels.sort_by(|x, y| x.k.total_cmp(&y.k));
    let mut out: Vec<Level> = Vec::with_capacity(levels.len());
    for l in levels {
        match out.last_mut() {
            Some(last) if l.k - last.k <= 1e-10 + 1e-13 * l.k => {
                let m = last.multiplicity + l.multiplicity;
                last.k = (last.k * last.multiplicity as f64 + l.k * l.multiplicity as f64) / m as f64;
                last.multiplicity = m;
            }
            _ => out.push(l),
        }
    }
    out
}

/// `N(k²)` for a single wavenumber; see [`MetricSolver::count`].
pub fn count(g: &MetricGraph, k: f64) -> Result<usize> {
    MetricSolver::new(g)?.count(k)
}

pub fn eigenvalues_up_to(g: &MetricGraph, k_max: f64) -> Result<Spectrum> {
    MetricSolver::new(g)?.eigenvalues_up_to(k_max)
}

pub fn eigenvalues_first(g: &MetricGraph, n: usize) -> Result<Spectrum> {
    MetricSolver::new(g)?.eigenvalues_first(n)
}

/// `N(E)/√E`, which tends to `ΣL/π`.
pub fn weyl_ratio(g: &MetricGraph, energy: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::Domain(format!("weyl_ratio needs E > 0, got {energy}")));
    }
    let k = energy.sqrt();
    Ok(count(g, k)? as f64 / k)
}
