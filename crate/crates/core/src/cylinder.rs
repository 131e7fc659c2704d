//! Local cubature on the cylinder surface `P_{L,W} = {|x_1| ≤ L, x_2² + … + x_d² = W²}`
//! carrying the linearly increasing axial density.
//!
//! Cells are `axis interval × sphere box` on `P_{2L,1}`. Along the axis each
//! box gets consecutive intervals of equal `v`-mass starting at `−3L/2`, so
//! every cell has mass exactly `τ^{d−1}`. Cell nodes are products of an axis
//! rule and the box's sphere nodes. Radius `W` is handled by building the
//! `W = 1` cubature for `(L/W, τ/W, δ/W^k)` and scaling every point by `W`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{param, Result};
use crate::math::{ipow, sqrt, LegendreRule};
use crate::measure::{Density, Measure1D, Piece};
use crate::quadrature::construct_on_support;
use crate::sphere::{
    search_common_n, shifted_from_monomials, spherical_angles, spherical_map, FactorRule,
    SphereCubature, SpherePlan,
};

/// `v(x) = 1 + (x + 2L)/(4L)`: the axial density of `ν_{2L,·}`, rising from 1 at `−2L` to 2 at `2L`.
pub fn axis_density(l: f64, x: f64) -> f64 {
    1.0 + (x + 2.0 * l) / (4.0 * l)
}

/// `∫_a^b v`.
pub fn axis_mass(l: f64, a: f64, b: f64) -> f64 {
    0.5 * (b - a) * (axis_density(l, a) + axis_density(l, b))
}

/// Consecutive intervals of `v`-mass `target` starting at `−3L/2`, as many as
/// fit inside `[−3L/2, 3L/2]`. Fails unless the last right end exceeds `L`.
pub fn axis_intervals(l: f64, target: f64) -> Result<Vec<(f64, f64)>> {
    if !(l > 0.0 && target > 0.0) {
        return Err(param(format!(
            "need L > 0 and a positive target mass, got L = {l}, target = {target}"
        )));
    }
    let end = 1.5 * l;
    let mut a = -end;
    let mut out = Vec::new();
    loop {
        // B t + t²/(8L) = target, stable form of the positive root
        let b0 = axis_density(l, a);
        let t = 2.0 * target / (b0 + sqrt(b0 * b0 + target / (2.0 * l)));
        let b = a + t;
        if b > end {
            break;
        }
        out.push((a, b));
        a = b;
    }
    if a <= l {
        return Err(param(format!(
            "L too small for tau: the axis intervals stop at {a}, which does not exceed L = {l}"
        )));
    }
    Ok(out)
}

/// The axis weight `v / ∫v` on `[a, b]`, written in the unit variable `u = (x − a)/(b − a)`.
fn unit_axis_measure(l: f64, (a, b): (f64, f64)) -> Result<Measure1D> {
    let w = b - a;
    let mass = axis_mass(l, a, b);
    let c0 = w * axis_density(l, a) / mass;
    let c1 = w * w / (4.0 * l) / mass;
    Measure1D::new(
        (0.0, 1.0),
        Vec::new(),
        alloc::vec![Piece::new(
            0.0,
            1.0,
            Density::Polynomial([c0, c1, 0.0, 0.0])
        )],
    )
}

/// `n` equal-weight nodes on `interval` matching the `v`-weighted moments up to degree `max(k, 2)`.
pub fn axis_quadrature(interval: (f64, f64), l: f64, k: u32, n: usize) -> Result<FactorRule> {
    let (a, b) = interval;
    let degree = k.max(2);
    let unit = unit_axis_measure(l, interval)?;
    let res = construct_on_support(&unit, degree as usize, n, None)?;
    Ok(FactorRule {
        q: 0,
        interval,
        degree,
        nodes: res
            .nodes
            .iter()
            .map(|u| (a + (b - a) * u).clamp(a, b))
            .collect(),
        residual: res.residual,
        mode: res.mode,
    })
}

/// `(1/∫v) ∫_a^b (x − y)^p v(x) dx`, exact for the polynomial integrand.
pub fn axis_shifted_exact(l: f64, (a, b): (f64, f64), p: u32, y: f64) -> f64 {
    let rule = LegendreRule::new(p as usize / 2 + 2);
    rule.integrate(a, b, 1, |x| ipow(x - y, p) * axis_density(l, x)) / axis_mass(l, a, b)
}

/// Parameters of a cylinder cubature.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CylinderSpec {
    pub d: u32,
    pub k: u32,
    pub l: f64,
    pub w: f64,
    pub tau: f64,
    pub delta: f64,
}

impl CylinderSpec {
    /// Range checks, with `L` required to exceed `min_length`.
    pub fn validate(&self, min_length: f64) -> Result<()> {
        if self.d < 3 {
            return Err(param(format!(
                "cylinder dimension must be at least 3, got {}",
                self.d
            )));
        }
        if self.k == 0 {
            return Err(param("k must be at least 1"));
        }
        if !(self.w > 0.0) {
            return Err(param(format!("W must be positive, got {}", self.w)));
        }
        if !(self.tau > 0.0 && self.tau < self.w) {
            return Err(param(format!("tau must lie in (0, W), got {}", self.tau)));
        }
        if !(self.delta > 0.0 && self.delta < ipow(self.w, self.k)) {
            return Err(param(format!(
                "delta must lie in (0, W^k), got {}",
                self.delta
            )));
        }
        if !(self.l > min_length) {
            return Err(param(format!("L must exceed {min_length}, got {}", self.l)));
        }
        Ok(())
    }

    /// The equivalent unit-radius problem `(L/W, τ/W, δ/W^k)`.
    pub fn unit(&self) -> Self {
        Self {
            d: self.d,
            k: self.k,
            l: self.l / self.w,
            w: 1.0,
            tau: self.tau / self.w,
            delta: self.delta / ipow(self.w, self.k),
        }
    }
}

/// One cell: sphere box `sphere_box` times axis interval `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CylinderCell {
    pub sphere_box: usize,
    /// Index into the distinct axis intervals.
    pub axis: usize,
}

/// Partition data and the distinct factors of a unit-radius cylinder cubature.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderPlan {
    pub spec: CylinderSpec,
    pub sphere: SpherePlan,
    pub axis_intervals: Vec<(f64, f64)>,
    pub cells: Vec<CylinderCell>,
}

impl CylinderPlan {
    /// Plans the unit-radius problem of `spec` (already validated).
    pub fn new(spec: &CylinderSpec) -> Result<Self> {
        let unit = spec.unit();
        let sphere_delta = unit.delta / ipow(4.0 * unit.l, unit.k);
        let sphere = SpherePlan::new(unit.d - 2, unit.k, unit.tau, sphere_delta.min(0.5))?;
        let cell_mass = ipow(unit.tau, unit.d - 1);
        let mut index: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        let mut axis = Vec::new();
        let mut cells = Vec::new();
        for (bi, cert) in sphere.partition.certificates.iter().enumerate() {
            for iv in axis_intervals(unit.l, cell_mass / cert.mass)? {
                let id = *index
                    .entry((iv.0.to_bits(), iv.1.to_bits()))
                    .or_insert_with(|| {
                        axis.push(iv);
                        axis.len() - 1
                    });
                cells.push(CylinderCell {
                    sphere_box: bi,
                    axis: id,
                });
            }
        }
        Ok(Self {
            spec: *spec,
            sphere,
            axis_intervals: axis,
            cells,
        })
    }

    /// Sphere factors first, then axis factors.
    pub fn factor_count(&self) -> usize {
        self.sphere.factor_count() + self.axis_intervals.len()
    }

    pub fn initial_n(&self) -> usize {
        self.sphere.initial_n()
    }

    pub fn build_factor(&self, i: usize, n: usize) -> Result<FactorRule> {
        let s = self.sphere.factor_count();
        if i < s {
            self.sphere.build_factor(i, n)
        } else {
            let u = self.spec.unit();
            axis_quadrature(self.axis_intervals[i - s], u.l, u.k, n)
        }
    }

    pub fn assemble(self, n: usize, mut rules: Vec<FactorRule>) -> CylinderCubature {
        let axis_rules = rules.split_off(self.sphere.factor_count());
        CylinderCubature {
            spec: self.spec,
            n,
            sphere: self.sphere.assemble(n, rules),
            axis_intervals: self.axis_intervals,
            axis_rules,
            cells: self.cells,
        }
    }
}

/// Sequential construction; `n = None` searches for a common node count.
pub fn cylinder_cubature(
    spec: &CylinderSpec,
    min_length: f64,
    n: Option<usize>,
) -> Result<CylinderCubature> {
    spec.validate(min_length)?;
    let plan = CylinderPlan::new(spec)?;
    let build = |n: usize| -> Result<Vec<FactorRule>> {
        (0..plan.factor_count())
            .map(|i| plan.build_factor(i, n))
            .collect()
    };
    let (n, rules) = match n {
        Some(n) => (n, build(n)?),
        None => search_common_n(plan.initial_n(), build)?,
    };
    Ok(plan.assemble(n, rules))
}

/// Cylinder cubature; everything is stored at unit radius and scaled by `spec.w` on output.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CylinderCubature {
    pub spec: CylinderSpec,
    /// Nodes per factor; each cell carries `n^{d−1}` points.
    pub n: usize,
    pub sphere: SphereCubature,
    pub axis_intervals: Vec<(f64, f64)>,
    pub axis_rules: Vec<FactorRule>,
    pub cells: Vec<CylinderCell>,
}

impl CylinderCubature {
    fn unit_l(&self) -> f64 {
        self.spec.l / self.spec.w
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.n.pow(self.spec.d - 1)
    }

    /// `ν_{2L,W}(D)`.
    pub fn cell_mass(&self, c: usize) -> f64 {
        let cell = self.cells[c];
        let (a, b) = self.axis_intervals[cell.axis];
        axis_mass(self.unit_l(), a, b)
            * self.sphere.partition.certificates[cell.sphere_box].mass
            * ipow(self.spec.w, self.spec.d - 1)
    }

    /// `W · sqrt(|I|² + diam(E)²)` with the box diameter bound.
    pub fn cell_diameter_bound(&self, c: usize) -> f64 {
        let cell = self.cells[c];
        let (a, b) = self.axis_intervals[cell.axis];
        let e = self.sphere.partition.certificates[cell.sphere_box].diameter_bound;
        self.spec.w * sqrt((b - a) * (b - a) + e * e)
    }

    /// Materialized nodes of cell `c`, axis coordinate varying fastest.
    pub fn cell_points(&self, c: usize) -> Vec<Vec<f64>> {
        let cell = self.cells[c];
        let axis = &self.axis_rules[cell.axis].nodes;
        let w = self.spec.w;
        let mut out = Vec::with_capacity(self.nodes_per_cell());
        for s in self.sphere.box_points(cell.sphere_box) {
            for &x in axis {
                let mut p = Vec::with_capacity(s.len() + 1);
                p.push(w * x);
                p.extend(s.iter().map(|v| w * v));
                out.push(p);
            }
        }
        out
    }

    fn split_shift(&self, alpha: &[u32], y: &[f64]) -> (f64, Vec<f64>, f64) {
        let w = self.spec.w;
        let scale = ipow(w, alpha.iter().sum());
        (y[0] / w, y[1..].iter().map(|v| v / w).collect(), scale)
    }

    /// Node average of `(w − y)^α` on cell `c`, via the product structure.
    pub fn cell_shifted_average(&self, c: usize, alpha: &[u32], y: &[f64]) -> f64 {
        let cell = self.cells[c];
        let (y1, rest, scale) = self.split_shift(alpha, y);
        let axis = &self.axis_rules[cell.axis].nodes;
        let mut acc = crate::math::KahanSum::new();
        for &x in axis {
            acc.add(ipow(x - y1, alpha[0]));
        }
        let axial = acc.value() / axis.len() as f64;
        scale
            * axial
            * self
                .sphere
                .box_shifted_average(cell.sphere_box, &alpha[1..], &rest)
    }

    /// `(1/ν(D)) ∫_D (w − y)^α dν`, via the product structure.
    pub fn cell_shifted_exact(&self, c: usize, alpha: &[u32], y: &[f64]) -> f64 {
        let cell = self.cells[c];
        let (y1, rest, scale) = self.split_shift(alpha, y);
        let axial = axis_shifted_exact(self.unit_l(), self.axis_intervals[cell.axis], alpha[0], y1);
        scale
            * axial
            * self
                .sphere
                .box_shifted_exact(cell.sphere_box, &alpha[1..], &rest)
    }

    /// Number of cells containing the point `p` of the cylinder surface (half-open cells).
    pub fn cells_containing(&self, p: &[f64]) -> usize {
        let w = self.spec.w;
        let x = p[0] / w;
        let z: Vec<f64> = p[1..].iter().map(|v| v / w).collect();
        let ang = spherical_angles(&z);
        self.cells
            .iter()
            .filter(|cell| {
                let (a, b) = self.axis_intervals[cell.axis];
                x >= a && x < b && self.sphere.partition.boxes[cell.sphere_box].contains(&ang)
            })
            .count()
    }

    /// Point of the surface at axis coordinate `x` and sphere angles `ang` (unit radius input).
    pub fn surface_point(&self, x: f64, ang: &[f64]) -> Vec<f64> {
        let w = self.spec.w;
        let mut p = alloc::vec![w * x];
        p.extend(spherical_map(ang).iter().map(|v| w * v));
        p
    }

    /// Node average of `(w − y)^α` from plain monomial averages (binomial expansion).
    pub fn cell_shifted_by_expansion(&self, c: usize, alpha: &[u32], y: &[f64]) -> f64 {
        let zero = alloc::vec![0.0; y.len()];
        shifted_from_monomials(alpha, y, |beta| self.cell_shifted_average(c, beta, &zero))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_examples() {
        assert_eq!(axis_density(3.0, -6.0), 1.0);
        assert_eq!(axis_density(3.0, 6.0), 2.0);
        assert_eq!(axis_density(3.0, 0.0), 1.5);
    }

    #[test]
    fn interval_examples() {
        let iv = axis_intervals(1.0, 0.5).unwrap();
        let t = (-9.0 + sqrt(97.0)) / 2.0;
        assert!((iv[0].1 - (-1.5 + t)).abs() < 1e-12);
        assert!((iv[0].1 + 1.07557).abs() < 1e-5);
        for &(a, b) in &iv {
            assert!((axis_mass(1.0, a, b) - 0.5).abs() < 1e-12);
            assert!(b - a <= 0.5);
        }
        assert!(iv.last().unwrap().1 > 1.0);
        assert!(axis_intervals(0.1, 0.5).is_err());
    }

    #[test]
    fn axis_rule_matches_linear_density() {
        let iv = axis_intervals(1.0, 0.5).unwrap()[0];
        let r = axis_quadrature(iv, 1.0, 2, 40).unwrap();
        for p in 0..=2 {
            let avg: f64 = r.nodes.iter().map(|x| ipow(*x, p)).sum::<f64>() / r.nodes.len() as f64;
            assert!((avg - axis_shifted_exact(1.0, iv, p, 0.0)).abs() < 1e-9);
        }
    }
}
