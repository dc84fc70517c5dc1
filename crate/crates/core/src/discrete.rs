//! Discrete graph Hamiltonians `H_{uv} = J_{uv} e^{iθ(u,v)}`, `H_{uu} = V_u`, and the
//! vertex-splitting construction used to compare a graph with its edge switch.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, inf_norm, symmetric_eigenvalues, CMatrix};

/// One hop `u → v` with strength `j > 0` and phase `theta`; the reverse hop
/// carries `−theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64, f64)", into = "(usize, usize, f64, f64)")]
pub struct Coupling {
    pub u: usize,
    pub v: usize,
    pub j: f64,
    pub theta: f64,
}

impl From<(usize, usize, f64, f64)> for Coupling {
    fn from((u, v, j, theta): (usize, usize, f64, f64)) -> Self {
        Coupling { u, v, j, theta }
    }
}

impl From<Coupling> for (usize, usize, f64, f64) {
    fn from(c: Coupling) -> Self {
        (c.u, c.v, c.j, c.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteGraph {
    pub n: usize,
    pub couplings: Vec<Coupling>,
    pub potential: Vec<f64>,
}

impl DiscreteGraph {
    pub fn from_json(text: &str) -> Result<Self> {
        let g: DiscreteGraph = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("discrete graph serializes")
    }

    /// Checks indices, strengths and the pairing of hops. A pair may be listed
    /// once, or in both directions with equal `j` and opposite `theta`.
    pub fn validate(&self) -> Result<()> {
        if self.potential.len() != self.n {
            return Err(Error::Validation(format!(
                "potential has {} entries for {} vertices",
                self.potential.len(),
                self.n
            )));
        }
        if let Some(v) = self.potential.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite potential {v}")));
        }
        self.unique_hops().map(|_| ())
    }

    /// One entry per unordered pair, keyed `(min, max)`, with the phase of the `min → max` hop.
    fn unique_hops(&self) -> Result<BTreeMap<(usize, usize), (f64, f64)>> {
        let mut seen: BTreeMap<(usize, usize), (f64, f64, usize)> = BTreeMap::new();
        for (i, c) in self.couplings.iter().enumerate() {
            if c.u >= self.n || c.v >= self.n {
                return Err(Error::Validation(format!("coupling {i} references a vertex outside 0..{}", self.n)));
            }
            if c.u == c.v {
                return Err(Error::Validation(format!("self-coupling at vertex {}", c.u)));
            }
            if !(c.j > 0.0 && c.j.is_finite()) || !c.theta.is_finite() {
                return Err(Error::Validation(format!("coupling {i} needs finite J > 0 and finite theta")));
            }
            let key = (c.u.min(c.v), c.u.max(c.v));
            let theta = if c.u < c.v { c.theta } else { -c.theta };
            match seen.get(&key) {
                None => {
                    seen.insert(key, (c.j, theta, c.u));
                }
                Some(&(j, t, from)) => {
                    if from == c.u {
                        return Err(Error::Validation(format!("duplicate coupling ({}, {})", c.u, c.v)));
                    }
                    let dt = crate::linalg::wrap(t - theta).abs();
                    if (j - c.j).abs() > 1e-12 * j || dt > 1e-12 {
                        return Err(Error::Validation(format!(
                            "asymmetric coupling between {} and {}: theta(u,v) must equal -theta(v,u)",
                            key.0, key.1
                        )));
                    }
                }
            }
        }
        Ok(seen.into_iter().map(|(k, (j, t, _))| (k, (j, t))).collect())
    }
}

/// Dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    /// Accepts `m` if `‖m − m*‖` is below `1e-12·max(1, ‖m‖∞)`.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Validation("operator must be square".into()));
        }
        let defect = hermitian_defect(&m);
        if defect > 1e-12 * inf_norm(&m).max(1.0) {
            return Err(Error::Validation(format!("matrix is not Hermitian (defect {defect:e})")));
        }
        Ok(HermitianOperator { matrix: m })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn norm(&self) -> f64 {
        inf_norm(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues(self)
    }

    pub fn counting(&self, energy: f64) -> usize {
        counting(self, energy)
    }
}

pub fn assemble(g: &DiscreteGraph) -> Result<HermitianOperator> {
    g.validate()?;
    let mut m = CMatrix::zeros(g.n, g.n);
    for (u, &v) in g.potential.iter().enumerate() {
        m[(u, u)] = Complex64::new(v, 0.0);
    }
    for ((u, v), (j, theta)) in g.unique_hops()? {
        let z = Complex64::from_polar(j, theta);
        m[(u, v)] = z;
        m[(v, u)] = z.conj();
    }
    HermitianOperator::new(m)
}

/// All eigenvalues, ascending. A complex `H = X + iY` is diagonalized through the
/// real symmetric embedding `[[X, −Y], [Y, X]]`, whose spectrum repeats every
/// eigenvalue twice; consecutive pairs are averaged.
pub fn eigenvalues(h: &HermitianOperator) -> Vec<f64> {
    let m = &h.matrix;
    let n = m.nrows();
    if m.iter().all(|z| z.im == 0.0) {
        return symmetric_eigenvalues(&m.map(|z| z.re));
    }
    let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            big[(i, j)] = z.re;
            big[(i + n, j + n)] = z.re;
            big[(i, j + n)] = -z.im;
            big[(i + n, j)] = z.im;
        }
    }
    symmetric_eigenvalues(&big)
        .chunks(2)
        .map(|p| 0.5 * (p[0] + p[1]))
        .collect()
}

/// Number of eigenvalues strictly below `energy`.
pub fn counting(h: &HermitianOperator, energy: f64) -> usize {
    count_sorted(&eigenvalues(h), energy)
}

/// Number of entries strictly below `energy` in an ascending list.
pub fn count_sorted(sorted: &[f64], energy: f64) -> usize {
    sorted.partition_point(|&x| x < energy)
}

/// Numerical rank: eigenvalues of the Hermitian `m` above `rel_tol·‖m‖∞` in magnitude.
pub fn hermitian_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let scale = inf_norm(m);
    if scale == 0.0 {
        return 0;
    }
    crate::linalg::hermitian_eigenvalues(m)
        .iter()
        .filter(|x| x.abs() > rel_tol * scale)
        .count()
}

/// The two chain endpoints used by the split and the switch: `a` has exactly the
/// neighbours `a_next` (along its chain) and `a_vert` (the vertex side); same for `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchSite {
    pub a: usize,
    pub a_next: usize,
    pub a_vert: usize,
    pub b: usize,
    pub b_next: usize,
    pub b_vert: usize,
}

fn neighbours(m: &CMatrix, u: usize) -> Vec<usize> {
    (0..m.ncols()).filter(|&v| v != u && m[(u, v)] != Complex64::new(0.0, 0.0)).collect()
}

fn check_site(h: &HermitianOperator, s: &SwitchSite) -> Result<()> {
    let n = h.dim();
    let all = [s.a, s.a_next, s.a_vert, s.b, s.b_next, s.b_vert];
    if all.iter().any(|&x| x >= n) {
        return Err(Error::Precondition(format!("switch site {s:?} outside dimension {n}")));
    }
    if s.a == s.b {
        return Err(Error::Precondition("endpoints A and B must differ".into()));
    }
    for (x, next, vert) in [(s.a, s.a_next, s.a_vert), (s.b, s.b_next, s.b_vert)] {
        let mut nb = neighbours(&h.matrix, x);
        nb.sort_unstable();
        let mut want = vec![next, vert];
        want.sort_unstable();
        if nb != want || next == vert {
            return Err(Error::Precondition(format!(
                "vertex {x} must have exactly the neighbours {next} and {vert}, found {nb:?}"
            )));
        }
    }
    if [s.a_next, s.a_vert].contains(&s.b) || [s.b_next, s.b_vert].contains(&s.a) {
        return Err(Error::Precondition("A and B must not be adjacent".into()));
    }
    Ok(())
}

/// Switch of the hops `A–a_vert` and `B–b_vert`: afterwards `A` hops to `b_vert` and
/// `B` to `a_vert`. Each hop keeps its value, i.e. travels with its chain.
pub fn discrete_edge_switch(h: &HermitianOperator, site: &SwitchSite) -> Result<HermitianOperator> {
    check_site(h, site)?;
    let SwitchSite { a, a_vert, b, b_vert, .. } = *site;
    let mut m = h.matrix.clone();
    let za = m[(a, a_vert)];
    let zb = m[(b, b_vert)];
    let zero = Complex64::new(0.0, 0.0);
    for (x, y) in [(a, a_vert), (b, b_vert)] {
        m[(x, y)] = zero;
        m[(y, x)] = zero;
    }
    if m[(a, b_vert)] != zero || m[(b, a_vert)] != zero {
        return Err(Error::Precondition("switch would create a double hop".into()));
    }
    m[(a, b_vert)] = za;
    m[(b_vert, a)] = za.conj();
    m[(b, a_vert)] = zb;
    m[(a_vert, b)] = zb.conj();
    HermitianOperator::new(m)
}

/// `Ĥ` on dimension `n + 2` together with the positions of the split copies.
/// `A₁` keeps the index of `A` and the chain hop; `A₂ = n` takes the vertex hop.
/// Likewise `B₁ = B`, `B₂ = n + 1`.
#[derive(Debug, Clone)]
pub struct SplitOperator {
    pub op: HermitianOperator,
    pub a1: usize,
    pub a2: usize,
    pub b1: usize,
    pub b2: usize,
}

/// Splits `A` into `A₁` (chain side) and `A₂` (vertex side), both hops scaled by
/// √2 and both copies carrying `V_A`; same at `B`.
pub fn split_endpoints(h: &HermitianOperator, site: &SwitchSite) -> Result<SplitOperator> {
    check_site(h, site)?;
    let n = h.dim();
    let mut m = CMatrix::zeros(n + 2, n + 2);
    m.view_mut((0, 0), (n, n)).copy_from(&h.matrix);
    let zero = Complex64::new(0.0, 0.0);
    for (x, next, vert, x2) in [(site.a, site.a_next, site.a_vert, n), (site.b, site.b_next, site.b_vert, n + 1)] {
        let z_next = h.matrix[(x, next)];
        let z_vert = h.matrix[(x, vert)];
        m[(x, vert)] = zero;
        m[(vert, x)] = zero;
        m[(x, next)] = z_next * SQRT_2;
        m[(next, x)] = (z_next * SQRT_2).conj();
        m[(x2, vert)] = z_vert * SQRT_2;
        m[(vert, x2)] = (z_vert * SQRT_2).conj();
        m[(x2, x2)] = h.matrix[(x, x)];
    }
    Ok(SplitOperator { op: HermitianOperator::new(m)?, a1: site.a, a2: n, b1: site.b, b2: n + 1 })
}

impl SplitOperator {
    fn rank_one(&self, p: usize, q: usize, lambda: f64) -> CMatrix {
        let dim = self.op.dim();
        let mut k = CMatrix::zeros(dim, dim);
        let l = Complex64::new(lambda, 0.0);
        k[(p, p)] += l;
        k[(q, q)] += l;
        k[(p, q)] -= l;
        k[(q, p)] -= l;
        k
    }

    /// `λ[(A₁ − A₂)(A₁ − A₂)* + (B₁ − B₂)(B₁ − B₂)*]`.
    pub fn penalty(&self, lambda: f64) -> CMatrix {
        self.rank_one(self.a1, self.a2, lambda) + self.rank_one(self.b1, self.b2, lambda)
    }

    /// The penalty conjugated by the transposition `A₂ ↔ B₂`.
    pub fn switched_penalty(&self, lambda: f64) -> CMatrix {
        self.rank_one(self.a1, self.b2, lambda) + self.rank_one(self.b1, self.a2, lambda)
    }

    /// The transposition `A₂ ↔ B₂` as a matrix.
    pub fn transposition(&self) -> CMatrix {
        let dim = self.op.dim();
        let mut s = CMatrix::identity(dim, dim);
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        s[(self.a2, self.a2)] = zero;
        s[(self.b2, self.b2)] = zero;
        s[(self.a2, self.b2)] = one;
        s[(self.b2, self.a2)] = one;
        s
    }
}

/// `H_λ = Ĥ + λ[(A₁ − A₂)(A₁ − A₂)* + (B₁ − B₂)(B₁ − B₂)*]`.
pub fn lambda_family(split: &SplitOperator, lambda: f64) -> Result<HermitianOperator> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    HermitianOperator::new(split.op.matrix() + split.penalty(lambda))
}

/// `Ĥ + S K_λ S` with `S` the transposition `A₂ ↔ B₂` and `K_λ` the penalty: the
/// penalty now glues `A₁` to `B₂` and `B₁` to `A₂`, which in the limit `λ → ∞`
/// reattaches each chain to the other vertex. The difference to `H_λ` is
/// `λ(A₁ − B₁)(A₂ − B₂)* + λ(A₂ − B₂)(A₁ − B₁)*`.
pub fn switch_conjugate(split: &SplitOperator, lambda: f64) -> Result<HermitianOperator> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    HermitianOperator::new(split.op.matrix() + split.switched_penalty(lambda))
}

/// Stand-in for `λ = ∞`: `1e8·‖H‖∞`.
pub fn lambda_infinity(h: &HermitianOperator) -> f64 {
    1e8 * h.norm().max(1.0)
}

/// Default `λ` values of a [`lambda_study`]; the stand-in for `λ = ∞` is appended
/// unless the list already reaches it.
pub const LAMBDA_GRID: [f64; 9] = [0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e6];

/// Counting functions along the `λ` family at a set of energies.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaStudy {
    /// The requested values, ending with at least the stand-in for `λ = ∞`.
    pub lambdas: Vec<f64>,
    pub energies: Vec<f64>,
    pub resampled: usize,
    /// `N(E; H)` per energy.
    pub original: Vec<usize>,
    /// `N(E; H_λ)`, indexed `[energy][λ]`.
    pub counts: Vec<Vec<usize>>,
    /// `N(E; Ĥ + S K_λ S)`, indexed `[energy][λ]`.
    pub conjugate_counts: Vec<Vec<usize>>,
    pub monotone: bool,
    /// `max_E [N(E; H_0) − N(E; H_∞)]`.
    pub max_decrease: usize,
    pub stabilized: bool,
    pub max_conjugate_shift: usize,
    /// Rank of `Ĥ + S K_λ S − H_λ` at each finite positive `λ`.
    pub conjugate_ranks: Vec<usize>,
}

impl LambdaStudy {
    pub fn holds(&self) -> bool {
        self.monotone
            && self.max_decrease <= 2
            && self.stabilized
            && self.max_conjugate_shift <= 1
            && self.conjugate_ranks.iter().all(|&r| r == 2)
    }
}

/// Evaluates the `λ` family of the split at `site` on `n_energies` energies in
/// the spectral range of `H`, each at least `1e-6·max(1, ‖H‖)` from every
/// eigenvalue of every operator involved.
pub fn lambda_study<R: Rng + ?Sized>(
    h: &HermitianOperator,
    site: &SwitchSite,
    lambdas: &[f64],
    n_energies: usize,
    rng: &mut R,
) -> Result<LambdaStudy> {
    let split = split_endpoints(h, site)?;
    let mut lambdas = lambdas.to_vec();
    let infinity = lambda_infinity(h);
    if lambdas.last().is_none_or(|&l| l < infinity) {
        lambdas.push(infinity);
    }
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("lambda values must be increasing".into()));
    }
    let fam: Vec<Vec<f64>> = lambdas.iter().map(|&l| Ok(lambda_family(&split, l)?.eigenvalues())).collect::<Result<_>>()?;
    let conj: Vec<Vec<f64>> = lambdas.iter().map(|&l| Ok(switch_conjugate(&split, l)?.eigenvalues())).collect::<Result<_>>()?;
    let base = h.eigenvalues();
    let (lo, hi) = match (base.first(), base.last()) {
        (Some(&lo), Some(&hi)) => (lo - 0.5, hi + 0.5),
        _ => return Err(Error::Domain("empty operator".into())),
    };
    let gap = 1e-6 * h.norm().max(1.0);
    let mut energies = Vec::with_capacity(n_energies);
    let mut resampled = 0;
    while energies.len() < n_energies {
        let e = rng.random_range(lo..hi);
        let clear = std::iter::once(&base).chain(&fam).chain(&conj).all(|s| {
            let i = s.partition_point(|&x| x < e);
            [i.checked_sub(1), Some(i)].into_iter().flatten().filter_map(|j| s.get(j)).all(|&x| (x - e).abs() >= gap)
        });
        if clear {
            energies.push(e);
        } else {
            resampled += 1;
        }
    }
    let original: Vec<usize> = energies.iter().map(|&e| count_sorted(&base, e)).collect();
    let counts: Vec<Vec<usize>> = energies.iter().map(|&e| fam.iter().map(|s| count_sorted(s, e)).collect()).collect();
    let conjugate_counts: Vec<Vec<usize>> =
        energies.iter().map(|&e| conj.iter().map(|s| count_sorted(s, e)).collect()).collect();
    let monotone = counts.iter().all(|row| row.windows(2).all(|w| w[1] <= w[0]));
    let max_decrease = counts.iter().map(|row| row[0] - row[row.len() - 1].min(row[0])).max().unwrap_or(0);
    let stabilized = counts.iter().zip(&original).all(|(row, &n)| row[row.len() - 1] == n);
    let max_conjugate_shift = counts
        .iter()
        .zip(&conjugate_counts)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y)))
        .max()
        .unwrap_or(0);
    let conjugate_ranks = lambdas
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| hermitian_rank(&(split.switched_penalty(l) - split.penalty(l)), 1e-10))
        .collect();
    Ok(LambdaStudy {
        lambdas,
        energies,
        resampled,
        original,
        counts,
        conjugate_counts,
        monotone,
        max_decrease,
        stabilized,
        max_conjugate_shift,
        conjugate_ranks,
    })
}

/// Parameters of [`random_chain_cluster`].
#[derive(Debug, Clone)]
pub struct ChainClusterOptions {
    pub clusters: (usize, usize),
    pub cluster_size: (usize, usize),
    pub chains: (usize, usize),
    pub chain_length: (usize, usize),
    pub j_range: (f64, f64),
    pub v_range: (f64, f64),
}

impl Default for ChainClusterOptions {
    fn default() -> Self {
        ChainClusterOptions {
            clusters: (2, 4),
            cluster_size: (1, 4),
            chains: (2, 5),
            chain_length: (2, 8),
            j_range: (0.5, 1.5),
            v_range: (-1.0, 1.0),
        }
    }
}

/// Random graph of fully connected clusters joined by chains of degree-2
/// vertices, together with a switch site at the first vertex of two chains.
pub fn random_chain_cluster<R: Rng + ?Sized>(rng: &mut R, opts: &ChainClusterOptions) -> (DiscreteGraph, SwitchSite) {
    let mut couplings = Vec::new();
    let mut hop = |rng: &mut R, u: usize, v: usize| {
        couplings.push(Coupling {
            u,
            v,
            j: rng.random_range(opts.j_range.0..opts.j_range.1),
            theta: rng.random_range(-PI..PI),
        });
    };
    let mut n = 0;
    let mut clusters = Vec::new();
    for _ in 0..rng.random_range(opts.clusters.0..=opts.clusters.1) {
        let size = rng.random_range(opts.cluster_size.0..=opts.cluster_size.1);
        let members: Vec<usize> = (n..n + size).collect();
        for (i, &u) in members.iter().enumerate() {
            for &v in &members[i + 1..] {
                hop(rng, u, v);
            }
        }
        n += size;
        clusters.push(members);
    }
    let mut starts = Vec::new();
    for _ in 0..rng.random_range(opts.chains.0..=opts.chains.1) {
        let len = rng.random_range(opts.chain_length.0..=opts.chain_length.1);
        let c1 = &clusters[rng.random_range(0..clusters.len())];
        let x = c1[rng.random_range(0..c1.len())];
        let c2 = &clusters[rng.random_range(0..clusters.len())];
        let y = c2[rng.random_range(0..c2.len())];
        let nodes: Vec<usize> = (n..n + len).collect();
        n += len;
        hop(rng, x, nodes[0]);
        for w in nodes.windows(2) {
            hop(rng, w[0], w[1]);
        }
        hop(rng, nodes[len - 1], y);
        starts.push((nodes[0], nodes[1], x));
    }
    let potential = (0..n).map(|_| rng.random_range(opts.v_range.0..opts.v_range.1)).collect();
    let i = rng.random_range(0..starts.len());
    let mut j = rng.random_range(0..starts.len() - 1);
    if j >= i {
        j += 1;
    }
    let (a, a_next, a_vert) = starts[i];
    let (b, b_next, b_vert) = starts[j];
    (DiscreteGraph { n, couplings, potential }, SwitchSite { a, a_next, a_vert, b, b_next, b_vert })
}

/// `count` energies spread over the joint spectral range, each at least
/// `gap·max(1, ‖H‖)` away from every listed eigenvalue. Returns the energies and
/// the number of rejected draws.
pub fn sample_energies<R: Rng + ?Sized>(
    rng: &mut R,
    spectra: &[&[f64]],
    count: usize,
    gap: f64,
) -> (Vec<f64>, usize) {
    let lo = spectra.iter().flat_map(|s| s.first()).fold(f64::INFINITY, |a, &x| a.min(x)) - 0.5;
    let hi = spectra.iter().flat_map(|s| s.last()).fold(f64::NEG_INFINITY, |a, &x| a.max(x)) + 0.5;
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0;
    while out.len() < count {
        let e = rng.random_range(lo..hi);
        let clear = spectra.iter().all(|s| {
            let i = s.partition_point(|&x| x < e);
            let near = [i.checked_sub(1).map(|j| s[j]), s.get(i).copied()];
            near.iter().flatten().all(|&x| (x - e).abs() >= gap * scale)
        });
        if clear {
            out.push(e);
        } else {
            rejected += 1;
        }
    }
    (out, rejected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, max_abs};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path(n: usize) -> DiscreteGraph {
        DiscreteGraph {
            n,
            couplings: (0..n - 1).map(|i| Coupling { u: i, v: i + 1, j: 1.0, theta: 0.0 }).collect(),
            potential: vec![0.0; n],
        }
    }

    fn cycle(n: usize, thetas: &[f64]) -> DiscreteGraph {
        DiscreteGraph {
            n,
            couplings: (0..n).map(|i| Coupling { u: i, v: (i + 1) % n, j: 1.0, theta: thetas[i] }).collect(),
            potential: vec![0.0; n],
        }
    }

    #[test]
    fn three_path_is_tridiagonal() {
        let h = assemble(&path(3)).unwrap();
        let m = h.matrix();
        assert_eq!(m[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(m[(0, 2)], Complex64::new(0.0, 0.0));
        let ev = eigenvalues(&h);
        let want = [-SQRT_2, 0.0, SQRT_2];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(counting(&h, -1e-9), 1);
        assert_eq!(counting(&h, 1e-9), 2);
    }

    #[test]
    fn four_cycle_spectrum() {
        let h = assemble(&cycle(4, &[0.0; 4])).unwrap();
        let ev = eigenvalues(&h);
        for (a, b) in ev.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(counting(&h, 2.0), 3);
    }

    #[test]
    fn duplicate_and_asymmetric_couplings_rejected() {
        let mut g = path(3);
        g.couplings.push(Coupling { u: 0, v: 1, j: 1.0, theta: 0.0 });
        assert!(matches!(assemble(&g), Err(Error::Validation(_))));
        let mut g = path(3);
        g.couplings.push(Coupling { u: 1, v: 0, j: 1.0, theta: 0.3 });
        assert!(matches!(assemble(&g), Err(Error::Validation(_))));
        // consistent reverse listing is accepted
        let mut g = path(3);
        g.couplings[0].theta = 0.4;
        g.couplings.push(Coupling { u: 1, v: 0, j: 1.0, theta: -0.4 });
        assert!(assemble(&g).is_ok());
    }

    #[test]
    fn triangle_spectrum_depends_on_flux_only() {
        let a = eigenvalues(&assemble(&cycle(3, &[0.3, 0.5, 0.4])).unwrap());
        let b = eigenvalues(&assemble(&cycle(3, &[1.2, 0.0, 0.0])).unwrap());
        let c = eigenvalues(&assemble(&cycle(3, &[1.2 + 2.0 * PI, 0.0, 0.0])).unwrap());
        let d = eigenvalues(&assemble(&cycle(3, &[0.0, 0.0, 0.0])).unwrap());
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-12 && (b[i] - c[i]).abs() < 1e-12);
        }
        assert!(a.iter().zip(&d).any(|(x, y)| (x - y).abs() > 1e-3));
    }

    #[test]
    fn embedding_agrees_with_direct_hermitian_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = CMatrix::from_fn(20, 20, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let h = HermitianOperator::new(&a + a.adjoint()).unwrap();
        let ev = eigenvalues(&h);
        let direct = hermitian_eigenvalues(h.matrix());
        let tr = h.matrix().trace().re;
        let fro2: f64 = h.matrix().iter().map(|z| z.norm_sqr()).sum();
        assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-9 * tr.abs().max(1.0));
        assert!((ev.iter().map(|x| x * x).sum::<f64>() - fro2).abs() < 1e-9 * fro2);
        for (x, y) in ev.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-10 * h.norm());
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(HermitianOperator::new(m).is_err());
    }

    fn six_path_site() -> (HermitianOperator, SwitchSite) {
        // 0-1-2-3-4-5, split at 2 (next 3, vertex side 1) and at 4 (next 3? no: 5 end)
        let mut g = path(6);
        g.potential = vec![0.1, -0.2, 0.3, 0.0, 0.2, -0.1];
        let h = assemble(&g).unwrap();
        (h, SwitchSite { a: 1, a_next: 2, a_vert: 0, b: 4, b_next: 3, b_vert: 5 })
    }

    #[test]
    fn split_dimension_and_symmetric_projection() {
        let (h, site) = six_path_site();
        let s = split_endpoints(&h, &site).unwrap();
        let n = h.dim();
        assert_eq!(s.op.dim(), n + 2);
        // basis change: A ← (A₁ + A₂)/√2, B ← (B₁ + B₂)/√2, other sites unchanged
        let mut p = CMatrix::zeros(n + 2, n);
        for i in 0..n {
            p[(i, i)] = Complex64::new(1.0, 0.0);
        }
        let r = Complex64::new(1.0 / SQRT_2, 0.0);
        p[(s.a1, site.a)] = r;
        p[(s.a2, site.a)] = r;
        p[(s.b1, site.b)] = r;
        p[(s.b2, site.b)] = r;
        let back = p.adjoint() * s.op.matrix() * &p;
        assert!(max_abs(&(back - h.matrix())) < 1e-14);
    }

    #[test]
    fn split_rejects_wrong_degree() {
        let (h, mut site) = six_path_site();
        site.a = 0;
        assert!(matches!(split_endpoints(&h, &site), Err(Error::Precondition(_))));
    }

    #[test]
    fn large_lambda_recovers_original_counting() {
        let (h, site) = six_path_site();
        let s = split_endpoints(&h, &site).unwrap();
        let hl = lambda_family(&s, 1e6).unwrap();
        assert_eq!(counting(&hl, 1.0), counting(&h, 1.0));
        let h0 = lambda_family(&s, 0.0).unwrap();
        assert_eq!(h0.matrix(), s.op.matrix());
        assert!(lambda_family(&s, -1.0).is_err());
    }

    #[test]
    fn conjugate_difference_is_rank_two_and_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (g, site) = random_chain_cluster(&mut rng, &Default::default());
        let h = assemble(&g).unwrap();
        let s = split_endpoints(&h, &site).unwrap();
        let lam = 3.7;
        let d = switch_conjugate(&s, lam).unwrap().matrix() - lambda_family(&s, lam).unwrap().matrix();
        assert_eq!(hermitian_rank(&d, 1e-10), 2);
        let t = s.transposition();
        assert!(max_abs(&(&t * &d * &t + &d)) < 1e-12);
        // matches λ(A₁ − B₁)(A₂ − B₂)* + h.c.
        let dim = s.op.dim();
        let mut u = nalgebra::DVector::<Complex64>::zeros(dim);
        let mut w = nalgebra::DVector::<Complex64>::zeros(dim);
        u[s.a1] = Complex64::new(1.0, 0.0);
        u[s.b1] = Complex64::new(-1.0, 0.0);
        w[s.a2] = Complex64::new(1.0, 0.0);
        w[s.b2] = Complex64::new(-1.0, 0.0);
        let display = (&u * w.adjoint() + &w * u.adjoint()) * Complex64::new(lam, 0.0);
        assert!(max_abs(&(d - display)) < 1e-12);
    }

    #[test]
    fn direct_switch_is_rank_four_and_sharp() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let (g, site) = random_chain_cluster(&mut rng, &Default::default());
            let h = assemble(&g).unwrap();
            let sw = discrete_edge_switch(&h, &site).unwrap();
            assert!(hermitian_rank(&(h.matrix() - sw.matrix()), 1e-12) <= 4);
            let (e1, e2) = (eigenvalues(&h), eigenvalues(&sw));
            let (grid, _) = sample_energies(&mut rng, &[&e1, &e2], 50, 1e-6);
            for e in grid {
                let d = count_sorted(&e1, e) as i64 - count_sorted(&e2, e) as i64;
                assert!(d.abs() <= 1, "ΔN = {d} at E = {e}");
            }
        }
    }

    #[test]
    fn lambda_study_on_chain_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let (g, site) = random_chain_cluster(&mut rng, &Default::default());
            let h = assemble(&g).unwrap();
            let st = lambda_study(&h, &site, &LAMBDA_GRID, 40, &mut rng).unwrap();
            assert!(st.holds(), "{st:?}");
            assert_eq!(st.lambdas.len(), LAMBDA_GRID.len() + 1);
        }
    }

    #[test]
    fn switching_identical_chains_is_identity() {
        // Star: center 0 with two identical arms 0-1-2 and 0-3-4, switched at 1 and 3.
        let g = DiscreteGraph {
            n: 5,
            couplings: vec![
                Coupling { u: 0, v: 1, j: 1.0, theta: 0.0 },
                Coupling { u: 1, v: 2, j: 1.0, theta: 0.0 },
                Coupling { u: 0, v: 3, j: 1.0, theta: 0.0 },
                Coupling { u: 3, v: 4, j: 1.0, theta: 0.0 },
            ],
            potential: vec![0.0; 5],
        };
        let h = assemble(&g).unwrap();
        let site = SwitchSite { a: 1, a_next: 2, a_vert: 0, b: 3, b_next: 4, b_vert: 0 };
        assert_eq!(discrete_edge_switch(&h, &site).unwrap(), h);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"n":3,"couplings":[[0,1,1.0,0.5],[1,2,2.0,0.0]],"potential":[0.0,1.0,-1.0]}"#;
        let g = DiscreteGraph::from_json(text).unwrap();
        assert_eq!(g.couplings[0], Coupling { u: 0, v: 1, j: 1.0, theta: 0.5 });
        assert_eq!(DiscreteGraph::from_json(&g.to_json()).unwrap(), g);
    }
}
