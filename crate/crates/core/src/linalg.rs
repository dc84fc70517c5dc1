//! Dense helpers shared by the solvers: Hermitian eigenvalues and unitary eigenphases.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Largest absolute row sum.
pub fn inf_norm(m: &CMatrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn unitary_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    max_abs(&(m * m.adjoint() - CMatrix::identity(n, n)))
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the Hermitian part is used.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let h = (m + m.transpose()).scale(0.5);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Pole guard for the Cayley map: |tan(θ/2)| above this is re-centred.
const CAYLEY_LIMIT: f64 = 1e2;

/// Eigenphases of a unitary matrix in (−π, π], ascending.
///
/// The rotated Cayley transform `C = i(I − V)(I + V)⁻¹`, `V = e^{−iφ}U`, is
/// Hermitian with eigenvalues `tan((θ − φ)/2)`. The rotation φ keeps the pole
/// away from the spectrum.
pub fn unitary_eigenphases(u: &CMatrix) -> Result<Vec<f64>> {
    let first = cayley_phases(u, 0.0);
    if let Some((phases, t_max)) = &first {
        if *t_max <= CAYLEY_LIMIT {
            return Ok(phases.clone());
        }
        let phi = widest_gap_midpoint(phases) - PI;
        if let Some((phases, t_max)) = cayley_phases(u, phi) {
            if t_max <= CAYLEY_LIMIT {
                return Ok(phases);
            }
        }
    }
    // Scan rotations incommensurate with simple fractions of π.
    let mut best = first;
    for j in 0..16 {
        let phi = 0.37 + j as f64 * (2.0 * PI / 16.0);
        if let Some((phases, t_max)) = cayley_phases(u, phi) {
            if t_max <= CAYLEY_LIMIT {
                return Ok(phases);
            }
            if best.as_ref().is_none_or(|b| t_max < b.1) {
                best = Some((phases, t_max));
            }
        }
    }
    match best {
        Some((phases, t_max)) if t_max < 1e6 => Ok(phases),
        _ => Err(Error::Numerical("eigenphase computation failed to separate the spectrum from the Cayley pole".into())),
    }
}

/// Phases from one Cayley rotation, or `None` if `I + V` is too close to singular
/// for the transform to stay Hermitian.
fn cayley_phases(u: &CMatrix, phi: f64) -> Option<(Vec<f64>, f64)> {
    let n = u.nrows();
    let v = u * Complex64::from_polar(1.0, -phi);
    let id = CMatrix::identity(n, n);
    let plus = &id + &v;
    let minus = (&id - &v) * Complex64::i();
    let c = plus.lu().solve(&minus)?;
    let scale = max_abs(&c).max(1.0);
    if !scale.is_finite() || hermitian_defect(&c) > 1e-9 * scale {
        return None;
    }
    let t = hermitian_eigenvalues(&c);
    let t_max = t.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut phases: Vec<f64> = t.iter().map(|&x| wrap(phi + 2.0 * x.atan())).collect();
    phases.sort_by(f64::total_cmp);
    Some((phases, t_max))
}

/// Maps an angle to (−π, π].
pub fn wrap(theta: f64) -> f64 {
    let mut x = theta.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

fn widest_gap_midpoint(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let mut best = (sorted[0] + 2.0 * PI - sorted[sorted.len() - 1], sorted[sorted.len() - 1]);
    for w in sorted.windows(2) {
        let gap = w[1] - w[0];
        if gap > best.0 {
            best = (gap, w[0]);
        }
    }
    best.1 + best.0 / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unitary(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        a.qr().q()
    }

    #[test]
    fn diagonal_unitary_phases() {
        let angles = [-3.0, -1.0, 0.0, 0.5, PI];
        let u = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            angles.len(),
            angles.iter().map(|&a| Complex64::from_polar(1.0, a)),
        ));
        let p = unitary_eigenphases(&u).unwrap();
        for (a, b) in p.iter().zip(angles) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn permutation_matrix_phases() {
        // cyclic shift of order 4: phases 0, ±π/2, π
        let u = CMatrix::from_fn(4, 4, |i, j| if (j + 1) % 4 == i { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
        let p = unitary_eigenphases(&u).unwrap();
        let expect = [-PI / 2.0, 0.0, PI / 2.0, PI];
        for b in expect {
            assert!(p.iter().any(|a| wrap(a - b).abs() < 1e-12), "{p:?}");
        }
    }

    #[test]
    fn repeated_minus_one_is_resolved() {
        // Orthogonal conjugate of diag(−1, −1, −1, 1, 1): the first Cayley attempt is singular.
        let q = random_unitary(5, 42);
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            [-1.0, -1.0, -1.0, 1.0, 1.0].map(|x| Complex64::new(x, 0.0)).to_vec(),
        ));
        let u = &q * d * q.adjoint();
        let p = unitary_eigenphases(&u).unwrap();
        assert_eq!(p.iter().filter(|x| wrap(**x - PI).abs() < 1e-10).count(), 3, "{p:?}");
        assert_eq!(p.iter().filter(|x| x.abs() < 1e-10).count(), 2, "{p:?}");
    }

    #[test]
    fn phases_reproduce_trace_powers() {
        // Σ e^{i m θ_j} = tr(U^m) is an independent check of the phase set.
        for seed in 0..20 {
            let u = random_unitary(12, seed);
            let p = unitary_eigenphases(&u).unwrap();
            let mut um = CMatrix::identity(12, 12);
            for m in 1..4 {
                um = &um * &u;
                let tr = um.trace();
                let s: Complex64 = p.iter().map(|&t| Complex64::from_polar(1.0, m as f64 * t)).sum();
                assert!((tr - s).norm() < 1e-10, "seed {seed} power {m}");
            }
        }
    }

    #[test]
    fn hermitian_eigenvalues_match_trace_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = CMatrix::from_fn(20, 20, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let h = &a + a.adjoint();
        let ev = hermitian_eigenvalues(&h);
        let tr = h.trace().re;
        let fro2: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-9 * tr.abs().max(1.0));
        assert!((ev.iter().map(|x| x * x).sum::<f64>() - fro2).abs() < 1e-9 * fro2);
    }
}
