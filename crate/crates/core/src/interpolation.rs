//! Gauss-Lobatto interpolation, Gauss-Radau interpolation and the composite
//! operator that uses Radau up to `x_{N/2+1}` and Lobatto beyond it.

use std::ops::Range;
use std::sync::Arc;

use serde::Serialize;

use crate::dgspace::{DgError, DgFunction, ElementQuadrature};
use crate::mesh::{Coord, Mesh};
use crate::orthopoly::{gauss_lobatto_nodes, legendre_all, lobatto_to_modal};

/// Which operator defines the composite interpolant on an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InterpolantKind {
    Radau,
    Lobatto,
}

/// Per-element operator choice of the composite interpolant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompositeAssignment {
    pub kinds: Vec<InterpolantKind>,
}

impl CompositeAssignment {
    /// Elements `0 ..= N/2` (i.e. `I_1 .. I_{N/2+1}`) are Radau, the rest Lobatto.
    pub fn for_transition(elements: usize, transition_index: usize) -> Self {
        let kinds = (0..elements)
            .map(|e| if e <= transition_index { InterpolantKind::Radau } else { InterpolantKind::Lobatto })
            .collect();
        Self { kinds }
    }

    pub fn radau_elements(&self) -> Range<usize> {
        let end = self.kinds.iter().take_while(|k| **k == InterpolantKind::Radau).count();
        0..end
    }

    pub fn lobatto_elements(&self) -> Range<usize> {
        self.radau_elements().end..self.kinds.len()
    }
}

fn check_range(mesh: &Mesh, range: &Range<usize>) -> Result<(), DgError> {
    if range.end > mesh.elements() {
        return Err(DgError::ElementOutOfRange { index: range.end - 1, elements: mesh.elements() });
    }
    Ok(())
}

fn lobatto_into(u: &dyn Fn(Coord) -> f64, mesh: &Mesh, k: usize, range: Range<usize>, coeffs: &mut [f64]) {
    let s = k + 1;
    let nodes = gauss_lobatto_nodes(k);
    let inv = lobatto_to_modal(k);
    let mut nodal = vec![0.0; s];
    for e in range {
        for (v, &t) in nodal.iter_mut().zip(nodes.nodes()) {
            *v = u(mesh.coord(e, t));
        }
        let c = &mut coeffs[e * s..(e + 1) * s];
        for (m, cm) in c.iter_mut().enumerate() {
            *cm = inv[m * s..(m + 1) * s].iter().zip(&nodal).map(|(a, b)| a * b).sum();
        }
    }
}

fn radau_into(
    u: &dyn Fn(Coord) -> f64,
    mesh: &Mesh,
    k: usize,
    range: Range<usize>,
    quad: &ElementQuadrature,
    coeffs: &mut [f64],
) {
    let s = k + 1;
    for e in range {
        let h = mesh.width(e);
        let c = &mut coeffs[e * s..(e + 1) * s];
        c.fill(0.0);
        for qp in quad.element_points(mesh, e) {
            let uv = u(qp.at);
            let (p, _) = legendre_all(k - 1, qp.t);
            for m in 0..k {
                c[m] += qp.weight * uv * p[m];
            }
        }
        for (m, cm) in c.iter_mut().enumerate().take(k) {
            *cm *= (2.0 * m as f64 + 1.0) / h;
        }
        // P_m(1) = 1 for every m, so the right-end value is the coefficient sum.
        let partial: f64 = c[..k].iter().sum();
        c[k] = u(mesh.coord(e, 1.0)) - partial;
    }
}

/// Lagrange interpolation at the mapped Gauss-Lobatto points of degree `k`
/// on the elements in `range`; other elements are zero.
pub fn lobatto_interpolate(
    u: &dyn Fn(Coord) -> f64,
    mesh: Arc<Mesh>,
    k: usize,
    range: Range<usize>,
) -> Result<DgFunction, DgError> {
    check_range(&mesh, &range)?;
    let mut f = DgFunction::zeros(Arc::clone(&mesh), k)?;
    lobatto_into(u, &mesh, k, range, f.coeffs_mut());
    Ok(f)
}

/// Gauss-Radau interpolation: moments against degree `< k` are preserved and
/// the value at each element's right end is matched exactly.
pub fn radau_interpolate(
    u: &dyn Fn(Coord) -> f64,
    mesh: Arc<Mesh>,
    k: usize,
    range: Range<usize>,
    quad: &ElementQuadrature,
) -> Result<DgFunction, DgError> {
    check_range(&mesh, &range)?;
    let mut f = DgFunction::zeros(Arc::clone(&mesh), k)?;
    radau_into(u, &mesh, k, range, quad, f.coeffs_mut());
    Ok(f)
}

/// The composite interpolant: Radau on `I_1 .. I_{N/2+1}`, Lobatto elsewhere.
pub fn composite_interpolate(
    u: &dyn Fn(Coord) -> f64,
    mesh: Arc<Mesh>,
    k: usize,
    quad: &ElementQuadrature,
) -> Result<(DgFunction, CompositeAssignment), DgError> {
    let split = mesh.transition_index().ok_or(DgError::NoTransition)?;
    let assignment = CompositeAssignment::for_transition(mesh.elements(), split);
    let mut f = DgFunction::zeros(Arc::clone(&mesh), k)?;
    radau_into(u, &mesh, k, assignment.radau_elements(), quad, f.coeffs_mut());
    lobatto_into(u, &mesh, k, assignment.lobatto_elements(), f.coeffs_mut());
    Ok((f, assignment))
}

/// Default rule for Radau moments: `k + 6` points per cell.
pub fn radau_quadrature(k: usize, layer_rate: Option<f64>) -> ElementQuadrature {
    match layer_rate {
        Some(r) => ElementQuadrature::layer_aware(k + 6, r),
        None => ElementQuadrature::gauss(k + 6),
    }
}
