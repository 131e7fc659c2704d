//! Verification of sphere and cylinder cubatures against reference
//! integration and the frozen constants.

use chebyquad_core::config::Constants;
use chebyquad_core::cylinder::CylinderCubature;
use chebyquad_core::math::ipow;
use chebyquad_core::sphere::{sphere_area, SphereCubature};
use chebyquad_core::verify::{
    cylinder_cell_check, cylinder_coverage_failures, cylinder_shifts, sphere_box_check,
    sphere_shifts, CubatureReport, RegionCheck,
};
use chebyquad_core::Result;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::parallel::ordered;

/// Accepted gap between the partition mass and the sphere area, and between
/// cell masses and `τ^{d−1}`.
pub const MASS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Random shifted monomials per region.
    pub shifts: usize,
    pub seed: u64,
    /// Coverage samples of `P_{L,W}` (cylinders only).
    pub samples: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            shifts: 20,
            seed: 0,
            samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereVerification {
    pub options: CheckOptions,
    pub total_mass: f64,
    pub sphere_area: f64,
    pub constant_violations: Vec<String>,
    pub report: CubatureReport,
    pub regions: Vec<RegionCheck>,
    pub failures: Vec<String>,
}

impl SphereVerification {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn verify_sphere(
    pool: &ThreadPool,
    c: &SphereCubature,
    consts: &Constants,
    opts: CheckOptions,
) -> Result<SphereVerification> {
    let shifted = sphere_shifts(c.d, c.k, opts.shifts, opts.seed);
    let regions = ordered(pool, c.box_count(), |i| sphere_box_check(c, i, &shifted))?;
    let report = CubatureReport::from_checks(&regions, c.delta);
    let total_mass = c.partition.total_mass();
    let area = sphere_area(c.d);
    let constant_violations = consts
        .sphere_violations(&c.partition)
        .unwrap_or_else(|e| vec![e]);
    let mut failures = Vec::new();
    if (total_mass - area).abs() > MASS_TOL {
        failures.push(format!(
            "partition mass {total_mass} differs from the sphere area {area}"
        ));
    }
    if !report.within_delta() {
        failures.push(format!(
            "box {} errs by {:e} > delta = {}",
            report.worst_region,
            report.max_monomial_error.max(report.max_shifted_error),
            c.delta
        ));
    }
    failures.extend(constant_violations.iter().cloned());
    Ok(SphereVerification {
        options: opts,
        total_mass,
        sphere_area: area,
        constant_violations,
        report,
        regions,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderVerification {
    pub options: CheckOptions,
    /// `τ^{d−1}`.
    pub cell_mass_target: f64,
    pub max_cell_mass_error: f64,
    pub max_diameter: f64,
    pub diameter_limit: f64,
    pub cell_count: usize,
    pub count_limit: f64,
    pub coverage_failures: usize,
    pub report: CubatureReport,
    pub regions: Vec<RegionCheck>,
    pub failures: Vec<String>,
}

impl CylinderVerification {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn verify_cylinder(
    pool: &ThreadPool,
    c: &CylinderCubature,
    consts: &Constants,
    opts: CheckOptions,
) -> Result<CylinderVerification> {
    let spec = c.spec;
    let cc = consts.cylinder(spec.d).ok_or_else(|| {
        chebyquad_core::Error::Parameter(format!("no frozen cylinder constants for d = {}", spec.d))
    })?;
    let shifted = cylinder_shifts(c, opts.shifts, opts.seed);
    let regions = ordered(pool, c.cell_count(), |i| {
        cylinder_cell_check(c, i, &shifted)
    })?;
    let report = CubatureReport::from_checks(&regions, spec.delta);

    let target = ipow(spec.tau, spec.d - 1);
    let mut max_mass_err: f64 = 0.0;
    let mut max_diam: f64 = 0.0;
    for i in 0..c.cell_count() {
        max_mass_err = max_mass_err.max((c.cell_mass(i) - target).abs());
        max_diam = max_diam.max(c.cell_diameter_bound(i));
    }
    let unit = spec.unit();
    let count_limit = cc.count * unit.l / ipow(unit.tau, spec.d - 1);
    let diameter_limit = cc.diameter * spec.tau;
    let coverage_failures = cylinder_coverage_failures(c, opts.samples, opts.seed);

    let mut failures = Vec::new();
    if max_mass_err > MASS_TOL * target.max(1.0) {
        failures.push(format!(
            "cell mass off tau^(d-1) = {target} by {max_mass_err:e}"
        ));
    }
    if max_diam > diameter_limit {
        failures.push(format!("cell diameter {max_diam} > {diameter_limit}"));
    }
    if c.cell_count() as f64 > count_limit {
        failures.push(format!("{} cells > {count_limit}", c.cell_count()));
    }
    if coverage_failures > 0 {
        failures.push(format!(
            "{coverage_failures} of {} sampled points are not in exactly one cell",
            opts.samples
        ));
    }
    if !report.within_delta() {
        failures.push(format!(
            "cell {} errs by {:e} > delta = {}",
            report.worst_region,
            report.max_monomial_error.max(report.max_shifted_error),
            spec.delta
        ));
    }
    Ok(CylinderVerification {
        options: opts,
        cell_mass_target: target,
        max_cell_mass_error: max_mass_err,
        max_diameter: max_diam,
        diameter_limit,
        cell_count: c.cell_count(),
        count_limit,
        coverage_failures,
        report,
        regions,
        failures,
    })
}
