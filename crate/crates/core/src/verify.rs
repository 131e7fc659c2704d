//! Independent checks: moment residual reports, reference integration over
//! sphere boxes and cylinder cells, and a damped Newton solver for `T_k(w) = p`
//! that shares no code path with the moment flow.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::cylinder::CylinderCubature;
use crate::error::{numerical, param, Error, Result};
use crate::linalg::DenseMatrix;
use crate::math::{ipow, sin, sqrt, KahanSum, LegendreRule};
use crate::measure::Measure1D;
use crate::momentmap::{tk, u_matrix};
use crate::sphere::{monomials_up_to, spherical_angles, spherical_map, AngleBox, SphereCubature};

/// Per-degree defects of `(1/n) Σ x_i^j = ∫ x^j dσ`, with content hashes of both inputs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualReport {
    /// `|(1/n) Σ x_i^j − m_j|` for `j = 1..=k`.
    pub per_degree: Vec<f64>,
    pub max: f64,
    pub measure_hash: String,
    pub nodes_hash: String,
}

impl ResidualReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max <= tol
    }
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Hash of a node list: count, then each value's little-endian bytes.
pub fn nodes_hash(nodes: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((nodes.len() as u64).to_le_bytes());
    for x in nodes {
        h.update(x.to_le_bytes());
    }
    let mut out = String::with_capacity(64);
    for b in h.finalize() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Compensated residual report of `nodes` against the first `k` moments of `m`.
pub fn moment_residual(nodes: &[f64], m: &Measure1D, k: u32) -> ResidualReport {
    let n = nodes.len() as f64;
    let mut acc = alloc::vec![KahanSum::new(); k as usize];
    for &x in nodes {
        let mut p = 1.0;
        for a in acc.iter_mut() {
            p *= x;
            a.add(p);
        }
    }
    let per_degree: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(j, a)| (a.value() / n - m.moment(j as u32 + 1)).abs())
        .collect();
    let max = per_degree.iter().fold(0.0f64, |a, b| a.max(*b));
    ResidualReport {
        per_degree,
        max,
        measure_hash: sha256_hex(&m.fingerprint()),
        nodes_hash: nodes_hash(nodes),
    }
}

/// `h(x) = Π_c (x_c − y_c)^{α_c}`; a plain monomial has `y = 0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerProduct {
    pub alpha: Vec<u32>,
    pub shift: Vec<f64>,
}

impl PowerProduct {
    pub fn monomial(alpha: &[u32]) -> Self {
        Self {
            alpha: alpha.to_vec(),
            shift: alloc::vec![0.0; alpha.len()],
        }
    }

    pub fn shifted(alpha: &[u32], shift: &[f64]) -> Self {
        assert_eq!(
            alpha.len(),
            shift.len(),
            "shift and exponent dimensions differ"
        );
        Self {
            alpha: alpha.to_vec(),
            shift: shift.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn degree(&self) -> u32 {
        self.alpha.iter().sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.alpha
            .iter()
            .zip(&self.shift)
            .zip(x)
            .map(|((&a, &y), &xc)| ipow(xc - y, a))
            .product()
    }

    /// The factor acting on coordinates `range` only.
    pub fn restrict(&self, range: core::ops::Range<usize>) -> Self {
        Self {
            alpha: self.alpha[range.clone()].to_vec(),
            shift: self.shift[range].to_vec(),
        }
    }
}

/// Where a reference integral is taken.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Image of an angle box on `S^d` under the spherical map, surface measure.
    SphereBox(AngleBox),
    /// `axis × box` on the unit-radius cylinder with the linear density of
    /// [`crate::cylinder::axis_density`]; the axis is the first coordinate.
    CylinderCell {
        axis: (f64, f64),
        half_length: f64,
        sphere_box: AngleBox,
    },
}

/// Integral, region mass and the gap between the two resolutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceValue {
    pub integral: f64,
    pub mass: f64,
    pub error_estimate: f64,
}

impl ReferenceValue {
    /// `(1/mass) ∫ h`.
    pub fn average(&self) -> f64 {
        self.integral / self.mass
    }
}

fn sphere_box_integral(g: &PowerProduct, b: &AngleBox, rule: &LegendreRule) -> f64 {
    let d = b.d();
    let per: Vec<(Vec<f64>, Vec<f64>)> = b
        .intervals
        .iter()
        .map(|&(lo, hi)| rule.on_interval(lo, hi, 1))
        .collect();
    let p = rule.points();
    let total = p.pow(d as u32);
    let mut ang = alloc::vec![0.0; d];
    let mut acc = KahanSum::new();
    for idx in 0..total {
        let mut rem = idx;
        let mut w = 1.0;
        for q in 0..d {
            let t = rem % p;
            rem /= p;
            ang[q] = per[q].0[t];
            w *= per[q].1[t] * ipow(sin(ang[q]), q as u32);
        }
        acc.add(w * g.eval(&spherical_map(&ang)));
    }
    acc.value()
}

fn evaluate(g: &PowerProduct, region: &Region, rule: &LegendreRule) -> f64 {
    match region {
        Region::SphereBox(b) => sphere_box_integral(g, b, rule),
        Region::CylinderCell {
            axis,
            half_length,
            sphere_box,
        } => {
            let ax = g.restrict(0..1);
            let sph = g.restrict(1..g.dim());
            let axial = rule.integrate(axis.0, axis.1, 1, |x| {
                ax.eval(&[x]) * crate::cylinder::axis_density(*half_length, x)
            });
            axial * sphere_box_integral(&sph, sphere_box, rule)
        }
    }
}

fn region_dim(region: &Region) -> usize {
    match region {
        Region::SphereBox(b) => b.d() + 1,
        Region::CylinderCell { sphere_box, .. } => sphere_box.d() + 2,
    }
}

/// Tensor Gauss–Legendre integral of `g` over `region` at `resolution` and
/// `2·resolution` points per coordinate. The finer value is returned; the
/// difference is the error estimate and must not exceed `tol`. Cylinder cells
/// use the product structure: axis integral times sphere-box integral.
pub fn reference_integral(
    g: &PowerProduct,
    region: &Region,
    resolution: usize,
    tol: f64,
) -> Result<ReferenceValue> {
    if resolution < 16 {
        return Err(param(format!(
            "reference resolution must be at least 16, got {resolution}"
        )));
    }
    if g.dim() != region_dim(region) {
        return Err(param(format!(
            "integrand has {} coordinates, region lives in {}",
            g.dim(),
            region_dim(region)
        )));
    }
    let coarse = evaluate(g, region, &LegendreRule::new(resolution));
    let fine = evaluate(g, region, &LegendreRule::new(2 * resolution));
    let one = PowerProduct::monomial(&alloc::vec![0; g.dim()]);
    let mass = evaluate(&one, region, &LegendreRule::new(2 * resolution));
    let error_estimate = (fine - coarse).abs();
    if error_estimate > tol {
        return Err(Error::Precision {
            estimate: error_estimate,
            tolerance: tol,
        });
    }
    Ok(ReferenceValue {
        integral: fine,
        mass,
        error_estimate,
    })
}

/// Points per coordinate of the coarse reference rule used by the cubature checks.
pub const REFERENCE_RESOLUTION: usize = 16;
/// Largest accepted gap between the two reference resolutions.
pub const REFERENCE_TOL: f64 = 1e-10;

/// Worst errors on one sphere box or cylinder cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionCheck {
    pub index: usize,
    /// `|node average − reference average|` over plain monomials `|α| ≤ k`.
    pub monomial_error: f64,
    /// The same over the shifted monomials.
    pub shifted_error: f64,
    /// `|closed-form average − reference average|` over every tested function.
    pub reference_gap: f64,
}

/// Aggregate of the region checks of one cubature.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CubatureReport {
    pub regions: usize,
    pub delta: f64,
    pub max_monomial_error: f64,
    pub max_shifted_error: f64,
    pub max_reference_gap: f64,
    /// Region with the largest error.
    pub worst_region: usize,
}

impl CubatureReport {
    pub fn from_checks(checks: &[RegionCheck], delta: f64) -> Self {
        let mut out = Self {
            regions: checks.len(),
            delta,
            max_monomial_error: 0.0,
            max_shifted_error: 0.0,
            max_reference_gap: 0.0,
            worst_region: 0,
        };
        let mut worst = -1.0;
        for c in checks {
            out.max_monomial_error = out.max_monomial_error.max(c.monomial_error);
            out.max_shifted_error = out.max_shifted_error.max(c.shifted_error);
            out.max_reference_gap = out.max_reference_gap.max(c.reference_gap);
            let e = c.monomial_error.max(c.shifted_error);
            if e > worst {
                worst = e;
                out.worst_region = c.index;
            }
        }
        out
    }

    pub fn within_delta(&self) -> bool {
        self.max_monomial_error <= self.delta && self.max_shifted_error <= self.delta
    }
}

/// Uniform point of the unit sphere in `R^dim` by rejection from the cube.
pub fn random_unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let r = sqrt(v.iter().map(|x| x * x).sum());
        if r > 1e-3 && r <= 1.0 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

fn random_alpha<R: Rng>(rng: &mut R, dim: usize, k: u32) -> Vec<u32> {
    let mut alpha = alloc::vec![0u32; dim];
    let degree = rng.random_range(1..=k.max(1));
    for _ in 0..degree {
        alpha[rng.random_range(0..dim)] += 1;
    }
    alpha
}

/// `(z − w)^α` with `1 ≤ |α| ≤ k` and `w` uniform on `S^d`.
pub fn sphere_shifts(d: u32, k: u32, count: usize, seed: u64) -> Vec<PowerProduct> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = d as usize + 1;
    (0..count)
        .map(|_| {
            let alpha = random_alpha(&mut rng, dim, k);
            PowerProduct::shifted(&alpha, &random_unit_vector(&mut rng, dim))
        })
        .collect()
}

/// `(w − y)^α` with `1 ≤ |α| ≤ k` and `y` on `P_{2L,W}`: axis coordinate
/// uniform in `[−2L, 2L]`, the rest uniform on the radius-`W` sphere.
pub fn cylinder_shifts(c: &CylinderCubature, count: usize, seed: u64) -> Vec<PowerProduct> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = c.spec;
    let dim = spec.d as usize;
    (0..count)
        .map(|_| {
            let alpha = random_alpha(&mut rng, dim, spec.k);
            let mut y = alloc::vec![(4.0 * rng.random::<f64>() - 2.0) * spec.l];
            y.extend(
                random_unit_vector(&mut rng, dim - 1)
                    .iter()
                    .map(|v| v * spec.w),
            );
            PowerProduct::shifted(&alpha, &y)
        })
        .collect()
}

/// Node averages on box `i` against reference integration.
pub fn sphere_box_check(
    c: &SphereCubature,
    i: usize,
    shifted: &[PowerProduct],
) -> Result<RegionCheck> {
    let region = Region::SphereBox(c.partition.boxes[i].clone());
    let mut out = RegionCheck {
        index: i,
        ..RegionCheck::default()
    };
    for alpha in monomials_up_to(c.d as usize + 1, c.k) {
        let r = reference_integral(
            &PowerProduct::monomial(&alpha),
            &region,
            REFERENCE_RESOLUTION,
            REFERENCE_TOL,
        )?
        .average();
        out.monomial_error = out
            .monomial_error
            .max((c.box_monomial_average(i, &alpha) - r).abs());
        out.reference_gap = out
            .reference_gap
            .max((c.box_monomial_exact(i, &alpha) - r).abs());
    }
    for g in shifted {
        let r = reference_integral(g, &region, REFERENCE_RESOLUTION, REFERENCE_TOL)?.average();
        out.shifted_error = out
            .shifted_error
            .max((c.box_shifted_average(i, &g.alpha, &g.shift) - r).abs());
        out.reference_gap = out
            .reference_gap
            .max((c.box_shifted_exact(i, &g.alpha, &g.shift) - r).abs());
    }
    Ok(out)
}

/// Node averages on cell `i` against reference integration. The reference
/// runs at unit radius: `(w − y)^α = W^{|α|} (u − y/W)^α`.
pub fn cylinder_cell_check(
    c: &CylinderCubature,
    i: usize,
    shifted: &[PowerProduct],
) -> Result<RegionCheck> {
    let cell = c.cells[i];
    let w = c.spec.w;
    let region = Region::CylinderCell {
        axis: c.axis_intervals[cell.axis],
        half_length: c.spec.l / w,
        sphere_box: c.sphere.partition.boxes[cell.sphere_box].clone(),
    };
    let reference = |g: &PowerProduct| -> Result<f64> {
        let shift: Vec<f64> = g.shift.iter().map(|v| v / w).collect();
        let unit = PowerProduct::shifted(&g.alpha, &shift);
        let r = reference_integral(&unit, &region, REFERENCE_RESOLUTION, REFERENCE_TOL)?;
        Ok(ipow(w, g.degree()) * r.average())
    };
    let mut out = RegionCheck {
        index: i,
        ..RegionCheck::default()
    };
    let zero = alloc::vec![0.0; c.spec.d as usize];
    for alpha in monomials_up_to(c.spec.d as usize, c.spec.k) {
        let r = reference(&PowerProduct::monomial(&alpha))?;
        out.monomial_error = out
            .monomial_error
            .max((c.cell_shifted_average(i, &alpha, &zero) - r).abs());
        out.reference_gap = out
            .reference_gap
            .max((c.cell_shifted_exact(i, &alpha, &zero) - r).abs());
    }
    for g in shifted {
        let r = reference(g)?;
        out.shifted_error = out
            .shifted_error
            .max((c.cell_shifted_average(i, &g.alpha, &g.shift) - r).abs());
        out.reference_gap = out
            .reference_gap
            .max((c.cell_shifted_exact(i, &g.alpha, &g.shift) - r).abs());
    }
    Ok(out)
}

/// Samples `samples` points of `P_{L,W}` and counts those not in exactly one cell.
pub fn cylinder_coverage_failures(c: &CylinderCubature, samples: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lu = c.spec.l / c.spec.w;
    let dim = c.spec.d as usize - 1;
    (0..samples)
        .filter(|_| {
            let x = (2.0 * rng.random::<f64>() - 1.0) * lu;
            let ang = spherical_angles(&random_unit_vector(&mut rng, dim));
            c.cells_containing(&c.surface_point(x, &ang)) != 1
        })
        .count()
}

/// Damped Newton on `T_k(w) = p` from `w = z`, halving the step until the
/// residual drops. Returns the sorted solution.
pub fn newton_oracle(z: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    let k = z.len();
    if p.len() != k {
        return Err(param(format!(
            "target has {} entries, nodes have {k}",
            p.len()
        )));
    }
    let scale = p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let residual = |w: &[f64]| -> f64 {
        tk(w)
            .iter()
            .zip(p)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };
    let mut w = z.to_vec();
    let mut res = residual(&w);
    for _ in 0..100 {
        if res <= 1e-14 * scale {
            break;
        }
        let r: Vec<f64> = p.iter().zip(tk(&w)).map(|(a, b)| a - b).collect();
        let step = solve(&u_matrix(&w), &r)?;
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-12 {
            let trial: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
            let now = residual(&trial);
            if now < res {
                w = trial;
                res = now;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            // no descent left: accept only if already at the rounding floor
            if res <= 1e-11 * scale {
                break;
            }
            return Err(numerical(format!(
                "Newton oracle stalled at residual {res:e}"
            )));
        }
    }
    if res > 1e-11 * scale {
        return Err(numerical(format!(
            "Newton oracle did not converge: residual {res:e}"
        )));
    }
    w.sort_by(f64::total_cmp);
    Ok(w)
}

fn solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    a.solve(b)
        .map_err(|_| numerical("singular Jacobian in the Newton oracle"))
}
