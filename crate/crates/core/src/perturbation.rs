//! Randomized checks of the finite-rank and reflection bounds on the counting
//! function of Hermitian matrices.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::discrete::{count_sorted, eigenvalues, sample_energies, HermitianOperator};
use crate::error::{Error, Result};
use crate::linalg::{inf_norm, max_abs, CMatrix};

/// Minimum distance of a test energy from any eigenvalue, relative to `max(1, ‖H‖)`.
pub const ENERGY_GAP: f64 = 1e-6;
/// Eigenvalues of `ΔH` below this fraction of `max(‖ΔH‖∞, ‖K‖∞)` count as zero.
pub const SIGN_TOL: f64 = 1e-10;

/// How the range of `K` sits relative to the eigenspaces of `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMode {
    /// Random range, no relation to `T`.
    Generic,
    /// Range spanned by `⌈r/2⌉` vectors of the `T = +1` eigenspace and `⌊r/2⌋` of
    /// the `T = −1` eigenspace, then rotated by a random unitary inside that span.
    Balanced,
}

#[derive(Debug, Clone)]
pub struct PerturbationFixture {
    pub h0: HermitianOperator,
    pub k: HermitianOperator,
    pub t: CMatrix,
    pub rank: usize,
    pub seed: u64,
}

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(rand_distr::StandardNormal);
    let im: f64 = rng.sample(rand_distr::StandardNormal);
    Complex64::new(re, im)
}

/// Haar-like random unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| gaussian_complex(rng)).qr().q()
}

fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| gaussian_complex(rng));
    (&a + a.adjoint()).scale(0.5 / (n as f64).sqrt())
}

/// `U diag(signs) U*`.
pub fn involution_from(u: &CMatrix, signs: &[f64]) -> CMatrix {
    let d = CMatrix::from_diagonal(&DVector::from_iterator(signs.len(), signs.iter().map(|&s| Complex64::new(s, 0.0))));
    let t = u * d * u.adjoint();
    (&t + t.adjoint()).scale(0.5)
}

/// Random unitary involution `T = T* = T⁻¹`, with at least one sign of each kind when `n ≥ 2`.
pub fn random_involution(n: usize, seed: u64) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::Domain("involution needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_unitary(n, &mut rng);
    let plus = if n == 1 { 1 } else { rng.random_range(1..n) };
    let signs: Vec<f64> = (0..n).map(|i| if i < plus { 1.0 } else { -1.0 }).collect();
    Ok(involution_from(&u, &signs))
}

/// `Σ μ_j φ_j φ_j*` over the columns of `phi`.
fn from_spectral(phi: &CMatrix, mu: &[f64]) -> CMatrix {
    let n = phi.nrows();
    let mut k = CMatrix::zeros(n, n);
    for (j, &m) in mu.iter().enumerate() {
        let c = phi.column(j);
        k += (&c * c.adjoint()) * Complex64::new(m, 0.0);
    }
    (&k + k.adjoint()).scale(0.5)
}

fn random_weights<R: Rng + ?Sized>(r: usize, rng: &mut R) -> Vec<f64> {
    (0..r)
        .map(|_| {
            let m: f64 = rng.random_range(0.2..3.0);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect()
}

impl PerturbationFixture {
    /// Random `H0`, rank-`r` `K` and an involution `T` with `n/2` positive signs.
    pub fn random(n: usize, r: usize, mode: RangeMode, seed: u64) -> Result<Self> {
        if r == 0 || r > n || (mode == RangeMode::Balanced && r.div_ceil(2) > n.div_ceil(2)) {
            return Err(Error::Domain(format!("rank {r} not realizable in dimension {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h0 = HermitianOperator::new(random_hermitian(n, &mut rng))?;
        let u = random_unitary(n, &mut rng);
        let n_plus = n.div_ceil(2);
        let signs: Vec<f64> = (0..n).map(|i| if i < n_plus { 1.0 } else { -1.0 }).collect();
        let t = involution_from(&u, &signs);
        let phi = match mode {
            RangeMode::Generic => random_unitary(n, &mut rng).columns(0, r).into_owned(),
            RangeMode::Balanced => {
                let (p, m) = (r.div_ceil(2), r / 2);
                let mut basis = CMatrix::zeros(n, r);
                for j in 0..p {
                    basis.set_column(j, &u.column(j));
                }
                for j in 0..m {
                    basis.set_column(p + j, &u.column(n_plus + j));
                }
                basis * random_unitary(r, &mut rng)
            }
        };
        let k = HermitianOperator::new(from_spectral(&phi, &random_weights(r, &mut rng)))?;
        Ok(PerturbationFixture { h0, k, t, rank: r, seed })
    }

    /// `H0 + K` with `K = μ φφ*` for a random unit `φ`.
    pub fn rank_one(n: usize, mu: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h0 = HermitianOperator::new(random_hermitian(n, &mut rng))?;
        let phi = random_unitary(n, &mut rng).columns(0, 1).into_owned();
        let k = HermitianOperator::new(from_spectral(&phi, &[mu]))?;
        Ok(PerturbationFixture { h0, k, t: CMatrix::identity(n, n), rank: 1, seed })
    }

    pub fn perturbed(&self) -> CMatrix {
        self.h0.matrix() + self.k.matrix()
    }

    pub fn reflected(&self) -> CMatrix {
        self.h0.matrix() + &self.t * self.k.matrix() * &self.t
    }

    /// `ΔH = TKT − K`.
    pub fn delta(&self) -> CMatrix {
        &self.t * self.k.matrix() * &self.t - self.k.matrix()
    }

    /// Energies avoiding the spectra of `H0`, `H0 + K` and `H0 + TKT`; also
    /// returns the number of rejected draws.
    pub fn energy_grid<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<(Vec<f64>, usize)> {
        let spectra = self.spectra()?;
        let refs: Vec<&[f64]> = spectra.iter().map(|s| s.as_slice()).collect();
        Ok(sample_energies(rng, &refs, count, ENERGY_GAP))
    }

    fn spectra(&self) -> Result<[Vec<f64>; 3]> {
        Ok([
            eigenvalues(&self.h0),
            eigenvalues(&HermitianOperator::new(self.perturbed())?),
            eigenvalues(&HermitianOperator::new(self.reflected())?),
        ])
    }
}

fn check_grid(spectra: &[&[f64]], grid: &[f64], scale: f64) -> Result<()> {
    for &e in grid {
        for s in spectra {
            if s.iter().any(|&x| (x - e).abs() < ENERGY_GAP * scale) {
                return Err(Error::Precondition(format!("energy {e} lies within the eigenvalue gap; resample")));
            }
        }
    }
    Ok(())
}

fn grid_scale(spectra: &[&[f64]]) -> f64 {
    spectra
        .iter()
        .flat_map(|s| [s.first(), s.last()])
        .flatten()
        .fold(1.0f64, |a, x| a.max(x.abs()))
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub rank: usize,
    pub max_shift: usize,
    /// Signed shift `N(E;H0) − N(E;H0+K)` at each grid point.
    pub shifts: Vec<i64>,
    pub holds: bool,
}

/// `max |N(E;H0) − N(E;H0+K)|` over the grid, against `rank(K)`.
pub fn verify_rank_bound(fx: &PerturbationFixture, grid: &[f64]) -> Result<RankReport> {
    let a = eigenvalues(&fx.h0);
    let b = eigenvalues(&HermitianOperator::new(fx.perturbed())?);
    check_grid(&[&a, &b], grid, grid_scale(&[&a, &b]))?;
    let shifts: Vec<i64> = grid.iter().map(|&e| count_sorted(&a, e) as i64 - count_sorted(&b, e) as i64).collect();
    let max_shift = shifts.iter().map(|s| s.unsigned_abs() as usize).max().unwrap_or(0);
    Ok(RankReport { rank: fx.rank, max_shift, shifts, holds: max_shift <= fx.rank })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReflectionReport {
    pub rank: usize,
    pub bound: usize,
    pub max_shift: usize,
    /// Strictly positive and strictly negative eigenvalues of `ΔH = TKT − K`.
    pub positive: usize,
    pub negative: usize,
    /// `‖TΔHT + ΔH‖∞`.
    pub antisymmetry_defect: f64,
    pub holds: bool,
}

/// `max |N(E;H0+K) − N(E;H0+TKT)|` against `⌈rank(K)/2⌉`, with the sign split of `ΔH`.
pub fn verify_reflection_bound(fx: &PerturbationFixture, grid: &[f64]) -> Result<ReflectionReport> {
    let b = eigenvalues(&HermitianOperator::new(fx.perturbed())?);
    let c = eigenvalues(&HermitianOperator::new(fx.reflected())?);
    check_grid(&[&b, &c], grid, grid_scale(&[&b, &c]))?;
    let max_shift = grid
        .iter()
        .map(|&e| (count_sorted(&b, e) as i64 - count_sorted(&c, e) as i64).unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    let delta = fx.delta();
    let antisymmetry_defect = max_abs(&(&fx.t * &delta * &fx.t + &delta));
    let (positive, negative) = sign_split(&delta, fx.k.norm());
    let bound = fx.rank.div_ceil(2);
    let holds = max_shift <= bound && positive <= bound && negative <= bound && antisymmetry_defect <= 1e-10 * inf_norm(&delta).max(1.0);
    Ok(ReflectionReport { rank: fx.rank, bound, max_shift, positive, negative, antisymmetry_defect, holds })
}

/// Counts of strictly positive and strictly negative eigenvalues; magnitudes below
/// `SIGN_TOL·max(‖m‖∞, floor)` are zero.
pub fn sign_split(m: &CMatrix, floor: f64) -> (usize, usize) {
    let tol = SIGN_TOL * inf_norm(m).max(floor);
    let ev = crate::linalg::hermitian_eigenvalues(m);
    (ev.iter().filter(|&&x| x > tol).count(), ev.iter().filter(|&&x| x < -tol).count())
}

/// Adds the spectral terms of `ΔH` to `H0 + K` one at a time and returns the
/// largest change of `N(E)` produced by a single term over the grid.
pub fn rank_one_chain(fx: &PerturbationFixture, grid: &[f64]) -> Result<usize> {
    let delta = fx.delta();
    let tol = SIGN_TOL * inf_norm(&delta).max(fx.k.norm());
    let eig = ((&delta + delta.adjoint()) * Complex64::new(0.5, 0.0)).symmetric_eigen();
    let mut current = fx.perturbed();
    let mut counts: Vec<usize> = {
        let ev = eigenvalues(&HermitianOperator::new(current.clone())?);
        grid.iter().map(|&e| count_sorted(&ev, e)).collect()
    };
    let mut worst = 0;
    for (j, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu.abs() <= tol {
            continue;
        }
        let v = eig.eigenvectors.column(j);
        current += (&v * v.adjoint()) * Complex64::new(mu, 0.0);
        current = (&current + current.adjoint()).scale(0.5);
        let ev = eigenvalues(&HermitianOperator::new(current.clone())?);
        for (c, &e) in counts.iter_mut().zip(grid) {
            let next = count_sorted(&ev, e);
            worst = worst.max(next.abs_diff(*c));
            *c = next;
        }
    }
    Ok(worst)
}

/// Fixture with rank-2 `K` whose reflected shift reaches 2: `H0 = diag(0, 0, 10, 10)`,
/// `K = −20(e₃e₃* + e₄e₄*)`, `T` swapping `e₁ ↔ e₃` and `e₂ ↔ e₄`.
pub fn unbalanced_example() -> PerturbationFixture {
    let c = |x: f64| Complex64::new(x, 0.0);
    let h0 = CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0), c(0.0), c(10.0), c(10.0)]));
    let k = CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0), c(0.0), c(-20.0), c(-20.0)]));
    let mut t = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 2), (2, 0), (1, 3), (3, 1)] {
        t[(i, j)] = c(1.0);
    }
    PerturbationFixture {
        h0: HermitianOperator::new(h0).expect("diagonal"),
        k: HermitianOperator::new(k).expect("diagonal"),
        t,
        rank: 2,
        seed: 0,
    }
}

/// Result of one fixture in a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct FixtureVerdict {
    pub index: usize,
    pub seed: u64,
    pub n: usize,
    pub rank: usize,
    pub mode: RangeMode,
    pub rank_bound: RankReport,
    pub reflection: ReflectionReport,
    pub chain_step: usize,
    pub resampled: usize,
    pub holds: bool,
}

/// Parameters of a lemma sweep.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub n: usize,
    pub ranks: Vec<usize>,
    pub fixtures: usize,
    pub energies: usize,
    pub mode: RangeMode,
    pub seed: u64,
}

/// Runs `fixtures` independent fixtures in parallel; fixture `i` draws from
/// ChaCha stream `i` of the base seed, with rank `ranks[i % ranks.len()]`.
pub fn sweep(opts: &SweepOptions) -> Result<Vec<FixtureVerdict>> {
    if opts.ranks.is_empty() {
        return Err(Error::Domain("at least one rank is required".into()));
    }
    (0..opts.fixtures)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let seed: u64 = rng.random();
            let rank = opts.ranks[i % opts.ranks.len()];
            let fx = PerturbationFixture::random(opts.n, rank, opts.mode, seed)?;
            let (grid, resampled) = fx.energy_grid(opts.energies, &mut rng)?;
            let rank_bound = verify_rank_bound(&fx, &grid)?;
            let reflection = verify_reflection_bound(&fx, &grid)?;
            let chain_step = rank_one_chain(&fx, &grid)?;
            let holds = rank_bound.holds && reflection.holds && chain_step <= 1;
            Ok(FixtureVerdict {
                index: i,
                seed,
                n: opts.n,
                rank,
                mode: opts.mode,
                rank_bound,
                reflection,
                chain_step,
                resampled,
                holds,
            })
        })
        .collect()
}
