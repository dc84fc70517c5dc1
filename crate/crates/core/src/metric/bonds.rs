//! Directed bonds and the bond scattering matrix `U(k) = D(k) S(k)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::{BoundaryCondition, End, MetricGraph};
use crate::linalg::{unitary_defect, unitary_eigenphases, CMatrix};

/// Scattering matrix of a single vertex of degree `d` at wavenumber `k`.
///
/// Kirchhoff: `2/d − δ`; Dirichlet: `−I`; `Delta(χ)`: `2/(d + iχ/k) − δ`,
/// which tends to `−I` as `k → 0` for `χ > 0`.
pub fn vertex_scattering(d: usize, bc: BoundaryCondition, k: f64) -> Result<CMatrix> {
    if d == 0 {
        return Err(Error::Precondition("vertex scattering needs degree at least 1".into()));
    }
    let minus_id = -CMatrix::identity(d, d);
    let c = match bc {
        BoundaryCondition::Dirichlet => return Ok(minus_id),
        BoundaryCondition::Kirchhoff | BoundaryCondition::Delta(0.0) => Complex64::new(2.0 / d as f64, 0.0),
        BoundaryCondition::Delta(chi) => {
            if k == 0.0 {
                return Ok(minus_id);
            }
            Complex64::new(2.0, 0.0) / Complex64::new(d as f64, chi / k)
        }
    };
    Ok(CMatrix::from_element(d, d, c) + minus_id)
}

/// The `2|E|` directed bonds of a graph. Bond `2i` runs along edge `i`
/// (position in the edge list) from tail to head, bond `2i + 1` back.
#[derive(Debug, Clone)]
pub struct BondBasis {
    lengths: Vec<f64>,
    phases: Vec<f64>,
}

impl BondBasis {
    pub fn new(g: &MetricGraph) -> Self {
        let mut lengths = Vec::with_capacity(2 * g.edges().len());
        let mut phases = Vec::with_capacity(2 * g.edges().len());
        for e in g.edges() {
            lengths.extend([e.length, e.length]);
            phases.extend([e.alpha, -e.alpha]);
        }
        BondBasis { lengths, phases }
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Reversed bond.
    pub fn reverse(b: usize) -> usize {
        b ^ 1
    }

    /// Edge position and traversal direction of bond `b`.
    pub fn edge_of(b: usize) -> (usize, End) {
        (b / 2, if b.is_multiple_of(2) { End::Tail } else { End::Head })
    }

    pub fn length(&self, b: usize) -> f64 {
        self.lengths[b]
    }

    pub fn phase(&self, b: usize) -> f64 {
        self.phases[b]
    }
}

/// Incoming and outgoing bond at one edge end.
fn bonds_at(edge_pos: usize, end: End) -> (usize, usize) {
    match end {
        End::Head => (2 * edge_pos, 2 * edge_pos + 1),
        End::Tail => (2 * edge_pos + 1, 2 * edge_pos),
    }
}

#[derive(Debug, Clone)]
struct VertexBlock {
    bc: BoundaryCondition,
    incoming: Vec<usize>,
    outgoing: Vec<usize>,
}

/// `U(k) = D(k) S(k)` with `D_b = exp(i(k L_b + α_b))`.
#[derive(Debug, Clone)]
pub struct SecularOperator {
    bonds: BondBasis,
    blocks: Vec<VertexBlock>,
    /// S for k-independent conditions, assembled once.
    fixed: Option<CMatrix>,
}

impl SecularOperator {
    pub fn new(g: &MetricGraph) -> Result<Self> {
        let bonds = BondBasis::new(g);
        let pos: std::collections::HashMap<_, _> =
            g.edges().iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        let mut blocks = Vec::new();
        for v in g.vertices() {
            if let BoundaryCondition::Delta(chi) = v.bc {
                if chi < 0.0 {
                    return Err(Error::Unsupported(format!(
                        "negative delta strength {chi} at vertex {}: eigenphases are not monotone in k",
                        v.id
                    )));
                }
            }
            let ends = g.incident_ends(v.id);
            if ends.is_empty() {
                continue;
            }
            let (incoming, outgoing) = ends.iter().map(|p| bonds_at(pos[&p.edge], p.end)).unzip();
            blocks.push(VertexBlock { bc: v.bc, incoming, outgoing });
        }
        let mut op = SecularOperator { bonds, blocks, fixed: None };
        let k_dependent = op
            .blocks
            .iter()
            .any(|b| matches!(b.bc, BoundaryCondition::Delta(chi) if chi > 0.0));
        if !k_dependent {
            op.fixed = Some(op.assemble_scattering(1.0)?);
        }
        Ok(op)
    }

    pub fn bonds(&self) -> &BondBasis {
        &self.bonds
    }

    fn assemble_scattering(&self, k: f64) -> Result<CMatrix> {
        let n = self.bonds.len();
        let mut s = CMatrix::zeros(n, n);
        for b in &self.blocks {
            let sigma = vertex_scattering(b.incoming.len(), b.bc, k)?;
            for (j, &out) in b.outgoing.iter().enumerate() {
                for (l, &inc) in b.incoming.iter().enumerate() {
                    s[(out, inc)] += sigma[(j, l)];
                }
            }
        }
        Ok(s)
    }

    /// Bond scattering matrix S(k).
    pub fn scattering(&self, k: f64) -> CMatrix {
        match &self.fixed {
            Some(s) => s.clone(),
            None => self.assemble_scattering(k).expect("blocks have positive degree"),
        }
    }

    pub fn unitary(&self, k: f64) -> CMatrix {
        let mut u = self.scattering(k);
        for (b, mut row) in u.row_iter_mut().enumerate() {
            let d = Complex64::from_polar(1.0, k * self.bonds.length(b) + self.bonds.phase(b));
            row *= d;
        }
        u
    }

    /// Sorted eigenphases of U(k) in (−π, π].
    pub fn phases(&self, k: f64) -> Result<Vec<f64>> {
        unitary_eigenphases(&self.unitary(k))
    }
}

/// Eigenphases of U(k), ascending in (−π, π]. `k` is an eigenvalue exactly when
/// some phase vanishes.
pub fn eigenphases(g: &MetricGraph, k: f64) -> Result<Vec<f64>> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("eigenphases need k > 0, got {k}")));
    }
    let op = SecularOperator::new(g)?;
    let u = op.unitary(k);
    let defect = unitary_defect(&u);
    if defect > 1e-10 {
        return Err(Error::Numerical(format!("U(k) departs from unitarity by {defect:e}")));
    }
    unitary_eigenphases(&u)
}
