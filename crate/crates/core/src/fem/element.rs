//! Lagrange Q1 and Q2 shape functions on the unit reference square.
//!
//! Q2 node order: the four vertices, the four edge midpoints (edge `e` runs
//! from vertex `e` to `e + 1`), then the center.

use crate::{Point, Real};

/// 1D node index (0 → 0, 1 → ½, 2 → 1) of every Q2 node, per axis.
pub const Q2_NODES: [(usize, usize); 9] = [(0, 0), (2, 0), (2, 2), (0, 2), (1, 0), (2, 1), (1, 2), (0, 1), (1, 1)];
const Q1_NODES: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

/// Reference position of local node `i` of the degree-`degree` element.
pub fn node_position<T: Real>(degree: usize, i: usize) -> Point<T> {
    match degree {
        1 => {
            let (a, b) = Q1_NODES[i];
            [T::from_count(a), T::from_count(b)]
        }
        2 => {
            let (a, b) = Q2_NODES[i];
            [T::from_count(a) * T::half(), T::from_count(b) * T::half()]
        }
        _ => panic!("unsupported degree {degree}"),
    }
}

pub fn n_local(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Value, first and second derivative of the 1D Lagrange basis.
fn lagrange_1d<T: Real>(degree: usize, k: usize, s: T) -> (T, T, T) {
    let one = T::one();
    let two = T::two();
    let four = T::lit(4.0);
    match (degree, k) {
        (1, 0) => (one - s, -one, T::zero()),
        (1, 1) => (s, one, T::zero()),
        (2, 0) => (two * (s - T::half()) * (s - one), four * s - T::lit(3.0), four),
        (2, 1) => (four * s * (one - s), four - T::lit(8.0) * s, -T::lit(8.0)),
        (2, 2) => (two * s * (s - T::half()), four * s - one, four),
        _ => unreachable!(),
    }
}

/// Shape function values, reference gradients and reference Hessians at `xi`.
#[derive(Debug, Clone)]
pub struct ReferenceBasis<T> {
    pub values: Vec<T>,
    pub grads: Vec<[T; 2]>,
    pub hessians: Vec<[[T; 2]; 2]>,
}

pub fn reference_basis<T: Real>(degree: usize, xi: Point<T>) -> ReferenceBasis<T> {
    let n = n_local(degree);
    let mut values = Vec::with_capacity(n);
    let mut grads = Vec::with_capacity(n);
    let mut hessians = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = if degree == 1 { Q1_NODES[i] } else { Q2_NODES[i] };
        let (fx, dfx, ddfx) = lagrange_1d(degree, a, xi[0]);
        let (fy, dfy, ddfy) = lagrange_1d(degree, b, xi[1]);
        values.push(fx * fy);
        grads.push([dfx * fy, fx * dfy]);
        hessians.push([[ddfx * fy, dfx * dfy], [dfx * dfy, fx * ddfy]]);
    }
    ReferenceBasis { values, grads, hessians }
}
