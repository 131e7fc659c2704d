//! Monic orthogonal-polynomial recurrences and Gauss rules for a [`Measure1D`].
//!
//! Recurrence coefficients come from the Stieltjes procedure run on a discrete
//! copy of the measure: atoms as they are, and each density piece replaced by
//! a Gauss–Legendre rule. For polynomial pieces the 32-point rule integrates
//! every product the procedure needs exactly; analytic pieces use a composite
//! rule whose error is far below double-precision rounding at the capped order.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{numerical, param, Result};
use crate::linalg::tridiagonal_eigen;
use crate::math::{sqrt, LegendreRule};
use crate::measure::{Density, Measure1D};

/// Highest order accepted by [`recurrence_from_measure`] in double precision.
pub const MAX_ORDER: usize = 12;

const MIN_B: f64 = 1e-14;

/// Coefficients of `p_{i+1} = (x − a_i) p_i − b_i p_{i−1}`; `b[0]` is the total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl RecurrenceCoefficients {
    pub fn order(&self) -> usize {
        self.a.len()
    }
}

/// Nodes (strictly increasing) and positive weights of a Gauss rule.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `Σ λ_i ξ_i^j`.
    pub fn moment(&self, j: u32) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * crate::math::ipow(*x, j))
            .sum()
    }
}

fn discretize(m: &Measure1D) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for a in m.atoms() {
        xs.push(a.x);
        ws.push(a.mass);
    }
    let rule = LegendreRule::new(32);
    for p in m.pieces() {
        let panels = match p.density {
            Density::Polynomial(_) => 1,
            _ => 8,
        };
        let (px, pw) = rule.on_interval(p.lo, p.hi, panels);
        for (x, w) in px.into_iter().zip(pw) {
            let v = w * p.density.value(x);
            if v != 0.0 {
                xs.push(x);
                ws.push(v);
            }
        }
    }
    (xs, ws)
}

/// Stieltjes procedure for the first `order` coefficients of `a` and `b`.
pub fn recurrence_from_measure(m: &Measure1D, order: usize) -> Result<RecurrenceCoefficients> {
    if order == 0 {
        return Err(param("recurrence order must be at least 1"));
    }
    if order > MAX_ORDER {
        return Err(numerical(format!(
            "order {order} exceeds the double-precision cap {MAX_ORDER}; use order <= {MAX_ORDER}"
        )));
    }
    let (xs, ws) = discretize(m);
    let npts = xs.len();
    let mut prev = alloc::vec![0.0; npts];
    let mut cur = alloc::vec![1.0; npts];
    let mut a = Vec::with_capacity(order);
    let mut b = Vec::with_capacity(order);
    let mut norm_prev = 1.0;
    for i in 0..order {
        let mut norm = 0.0;
        let mut first = 0.0;
        for t in 0..npts {
            let q = ws[t] * cur[t] * cur[t];
            norm += q;
            first += q * xs[t];
        }
        let bi = if i == 0 { norm } else { norm / norm_prev };
        if !(bi >= MIN_B) {
            return Err(numerical(format!(
                "recurrence coefficient b_{i} = {bi:e} is degenerate; the measure supports at most order {i}"
            )));
        }
        let ai = first / norm;
        a.push(ai);
        b.push(bi);
        norm_prev = norm;
        let bb = if i == 0 { 0.0 } else { bi };
        for t in 0..npts {
            let next = (xs[t] - ai) * cur[t] - bb * prev[t];
            prev[t] = cur[t];
            cur[t] = next;
        }
    }
    Ok(RecurrenceCoefficients { a, b })
}

/// Golub–Welsch: eigenvalues of the `m × m` Jacobi matrix are the nodes, squared
/// first eigenvector components times `b_0` are the weights.
pub fn gauss_rule(coeffs: &RecurrenceCoefficients, m: usize) -> Result<GaussRule> {
    if m == 0 || m > coeffs.order() {
        return Err(param(format!(
            "Gauss rule of size {m} needs 1 <= m <= {} recurrence coefficients",
            coeffs.order()
        )));
    }
    let off: Vec<f64> = coeffs.b[1..m].iter().map(|v| sqrt(*v)).collect();
    let (nodes, first) = tridiagonal_eigen(&coeffs.a[..m], &off, 1e-14, 50)?;
    let mu0 = coeffs.b[0];
    let weights = first.iter().map(|f| mu0 * f * f).collect();
    Ok(GaussRule { nodes, weights })
}

/// The `m`-point Gauss rule of a measure.
pub fn gauss_rule_for_measure(measure: &Measure1D, m: usize) -> Result<GaussRule> {
    gauss_rule(&recurrence_from_measure(measure, m)?, m)
}
