//! Frozen empirical constants for the partition certificates.
//!
//! The existence results only say that suitable `C(d)` and `c(d)` exist. The
//! values here were measured over `τ ∈ {0.2, 0.3, …, 0.8}` and padded: the
//! sphere numbers by about 15–25%, the minimum cylinder half-length by a factor
//! of 2 over the smallest power of two for which the axis intervals cover
//! `[−L, L]` on the whole grid.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math::ipow;
use crate::sphere::SpherePartition;

/// Version tag written into every file this library's companion produces.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SphereConstants {
    pub d: u32,
    /// Box image diameter `≤ diameter · τ`.
    pub diameter: f64,
    /// Box mass `≥ mass · τ^d`.
    pub mass: f64,
    /// Box count `≤ count · τ^{−d}`.
    pub count: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CylinderConstants {
    pub d: u32,
    /// `L` must exceed this.
    pub min_length: f64,
    /// Cell diameter `≤ diameter · τ`.
    pub diameter: f64,
    /// Cell count `≤ count · L W^{d−2} τ^{−(d−1)}`.
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Constants {
    pub format_version: u32,
    pub sphere: Vec<SphereConstants>,
    pub cylinder: Vec<CylinderConstants>,
    /// Largest Gauss rule order accepted; at most [`crate::orthopoly::MAX_ORDER`].
    pub max_gauss_order: usize,
}

impl Default for Constants {
    fn default() -> Self {
        let sphere = |d, diameter, mass, count| SphereConstants {
            d,
            diameter,
            mass,
            count,
        };
        let cylinder = |d, min_length, diameter, count| CylinderConstants {
            d,
            min_length,
            diameter,
            count,
        };
        Self {
            format_version: FORMAT_VERSION,
            sphere: alloc::vec![
                sphere(1, 1.1, 0.85, 7.5),
                sphere(2, 2.5, 0.15, 40.0),
                sphere(3, 4.0, 0.008, 220.0),
            ],
            cylinder: alloc::vec![cylinder(3, 2.0, 1.6, 35.0), cylinder(4, 8.0, 6.0, 70.0)],
            max_gauss_order: crate::orthopoly::MAX_ORDER,
        }
    }
}

impl Constants {
    pub fn sphere(&self, d: u32) -> Option<&SphereConstants> {
        self.sphere.iter().find(|c| c.d == d)
    }

    pub fn cylinder(&self, d: u32) -> Option<&CylinderConstants> {
        self.cylinder.iter().find(|c| c.d == d)
    }

    /// Consistency of a loaded table.
    pub fn validate(&self) -> Result<(), String> {
        if self.format_version != FORMAT_VERSION {
            return Err(format!(
                "constants format_version {} is not the supported {FORMAT_VERSION}",
                self.format_version
            ));
        }
        if self.max_gauss_order == 0 || self.max_gauss_order > crate::orthopoly::MAX_ORDER {
            return Err(format!(
                "max_gauss_order must lie in 1..={}, got {}",
                crate::orthopoly::MAX_ORDER,
                self.max_gauss_order
            ));
        }
        for c in &self.sphere {
            if !(c.diameter > 0.0 && c.mass > 0.0 && c.count > 0.0) {
                return Err(format!("sphere constants for d = {} must be positive", c.d));
            }
        }
        for c in &self.cylinder {
            if !(c.min_length > 0.0 && c.diameter > 0.0 && c.count > 0.0) {
                return Err(format!(
                    "cylinder constants for d = {} must be positive",
                    c.d
                ));
            }
        }
        Ok(())
    }

    /// Every certificate of `p` checked against the sphere constants; returns the violations.
    pub fn sphere_violations(&self, p: &SpherePartition) -> Result<Vec<String>, String> {
        let c = self
            .sphere(p.d)
            .ok_or_else(|| format!("no frozen sphere constants for d = {}", p.d))?;
        let td = ipow(p.tau, p.d);
        let mut out = Vec::new();
        for (i, cert) in p.certificates.iter().enumerate() {
            if cert.diameter_bound > c.diameter * p.tau {
                out.push(format!(
                    "box {i}: diameter {} > {} tau",
                    cert.diameter_bound, c.diameter
                ));
            }
            if cert.mass < c.mass * td {
                out.push(format!("box {i}: mass {} < {} tau^d", cert.mass, c.mass));
            }
        }
        if p.len() as f64 > c.count / td {
            out.push(format!("{} boxes > {} tau^-d", p.len(), c.count));
        }
        Ok(out)
    }
}
