//! Local approximate equal-weight cubature on the unit sphere `S^d ⊂ ℝ^{d+1}`.
//!
//! Angles are `(φ, θ_1, …, θ_{d−1})` with `φ ∈ [0, 2π]`, `θ_i ∈ [0, π]`, and
//!
//! ```text
//! T_1(φ) = (sin φ, cos φ),   T_{j+1}(…, θ_j) = (sin θ_j · T_j(…), cos θ_j).
//! ```
//!
//! Surface measure pulls back to `dφ · Π sin^i(θ_i) dθ_i`. The angle domain is
//! cut into boxes; on each box every angle gets its own equal-weight rule for
//! the weight `sin^q` (`q = 0` for `φ`), and the box's nodes are the images of
//! the Cartesian product of those rules. A monomial `z^α` factors over the
//! angles, so node averages are computed factor by factor without building the
//! `n^d` points.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::math::{ceil, cos, exp, ipow, lgamma, ln, sin, sqrt, taylor_degree, LegendreRule, PI};
use crate::measure::{sine_power_integral, Measure1D};
use crate::quadrature::{construct_on_support, Mode};

/// Largest nodes-per-factor the common-`n` search will try.
pub const MAX_FACTOR_NODES: usize = 1 << 20;

/// Smallest `m ≥ 1` with `(ke/(m+1))^{m+1} ≤ δ/(2d·2^k)`.
pub fn m0(d: u32, k: u32, delta: f64) -> u32 {
    taylor_degree(k, delta / (2.0 * f64::from(d) * ipow(2.0, k)))
}

/// Surface area of `S^d`: `2π^{(d+1)/2} / Γ((d+1)/2)`.
pub fn sphere_area(d: u32) -> f64 {
    let h = f64::from(d + 1) / 2.0;
    2.0 * exp(h * ln(PI) - lgamma(h))
}

/// `T(φ, θ_1, …, θ_{d−1})` on `S^d`.
pub fn spherical_map(ang: &[f64]) -> Vec<f64> {
    assert!(!ang.is_empty(), "need at least the angle φ");
    let mut z = Vec::with_capacity(ang.len() + 1);
    z.push(sin(ang[0]));
    z.push(cos(ang[0]));
    for &t in &ang[1..] {
        let s = sin(t);
        z.iter_mut().for_each(|v| *v *= s);
        z.push(cos(t));
    }
    z
}

/// Inverse of [`spherical_map`] for a unit vector, with `φ ∈ [0, 2π)`.
pub fn spherical_angles(z: &[f64]) -> Vec<f64> {
    assert!(z.len() >= 2, "need a point in at least two dimensions");
    let d = z.len() - 1;
    let mut ang = alloc::vec![0.0; d];
    let mut rest = z.to_vec();
    for q in (1..d).rev() {
        let last = rest.pop().unwrap();
        let rad = sqrt(rest.iter().map(|v| v * v).sum::<f64>());
        ang[q] = libm::atan2(rad, last);
        if rad > 0.0 {
            rest.iter_mut().for_each(|v| *v /= rad);
        }
    }
    let mut phi = libm::atan2(rest[0], rest[1]);
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    ang[0] = phi;
    ang
}

/// A box `J × I_1 × … × I_{d−1}` in angle space; `intervals[0]` is the `φ` range.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AngleBox {
    pub intervals: Vec<(f64, f64)>,
}

impl AngleBox {
    pub fn d(&self) -> usize {
        self.intervals.len()
    }

    /// Pulled-back surface measure `∫_J dφ · Π ∫_{I_q} sin^q`, in closed form.
    pub fn mass(&self) -> f64 {
        self.intervals
            .iter()
            .enumerate()
            .map(|(q, &(a, b))| sine_power_integral(q as u32, a, b))
            .product()
    }

    pub fn max_side(&self) -> f64 {
        self.intervals
            .iter()
            .fold(0.0_f64, |m, (a, b)| m.max(b - a))
    }

    /// Half-open membership `a ≤ x < b` per angle (closed at `π` and `2π`).
    pub fn contains(&self, ang: &[f64]) -> bool {
        self.intervals
            .iter()
            .zip(ang)
            .enumerate()
            .all(|(q, (&(a, b), &x))| {
                let top = if q == 0 { 2.0 * PI } else { PI };
                x >= a && (x < b || (b >= top && x <= b))
            })
    }

    /// Upper bound on the diameter of the image: exact chord for the `φ` arc,
    /// then `max sin θ · diam(previous) + 2 sin(|I|/2)` per added angle.
    pub fn diameter_bound(&self) -> f64 {
        let (a, b) = self.intervals[0];
        let mut diam = if b - a >= PI {
            2.0
        } else {
            2.0 * sin((b - a) / 2.0)
        };
        for &(a, b) in &self.intervals[1..] {
            let max_sin = if a <= PI / 2.0 && b >= PI / 2.0 {
                1.0
            } else {
                sin(a).max(sin(b))
            };
            diam = max_sin * diam + 2.0 * sin((b - a) / 2.0);
        }
        diam.min(2.0)
    }

    /// Largest distance among images of a `per_axis^d` grid (a lower estimate).
    pub fn sampled_diameter(&self, per_axis: usize) -> f64 {
        let d = self.d();
        let per_axis = per_axis.max(2);
        let total = per_axis.pow(d as u32);
        let mut pts = Vec::with_capacity(total);
        let mut ang = alloc::vec![0.0; d];
        for idx in 0..total {
            let mut rem = idx;
            for (q, &(a, b)) in self.intervals.iter().enumerate() {
                let t = (rem % per_axis) as f64 / (per_axis - 1) as f64;
                rem /= per_axis;
                ang[q] = a + (b - a) * t;
            }
            pts.push(spherical_map(&ang));
        }
        let mut best: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d2: f64 = pts[i]
                    .iter()
                    .zip(&pts[j])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                best = best.max(d2);
            }
        }
        sqrt(best)
    }
}

/// Per-box numbers checked against the frozen constants.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxCertificate {
    pub mass: f64,
    pub diameter_bound: f64,
    pub diameter_sampled: f64,
}

/// Boxes covering the angle domain of `S^d` up to measure zero.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpherePartition {
    pub d: u32,
    pub tau: f64,
    pub boxes: Vec<AngleBox>,
    pub certificates: Vec<BoxCertificate>,
}

/// Worst-case ratios of a partition against `C τ`, `c τ^d` and `C τ^{−d}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionRatios {
    /// `max diam / τ`.
    pub diameter: f64,
    /// `min mass / τ^d`.
    pub mass: f64,
    /// `K τ^d`.
    pub count: f64,
}

impl SpherePartition {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        crate::math::sum(&self.certificates.iter().map(|c| c.mass).collect::<Vec<_>>())
    }

    pub fn ratios(&self) -> PartitionRatios {
        let td = ipow(self.tau, self.d);
        PartitionRatios {
            diameter: self
                .certificates
                .iter()
                .fold(0.0_f64, |m, c| m.max(c.diameter_bound))
                / self.tau,
            mass: self
                .certificates
                .iter()
                .fold(f64::INFINITY, |m: f64, c| m.min(c.mass))
                / td,
            count: self.boxes.len() as f64 * td,
        }
    }

    /// Index of the box containing the angles `ang`.
    pub fn locate(&self, ang: &[f64]) -> Option<usize> {
        self.boxes.iter().position(|b| b.contains(ang))
    }
}

fn partition_boxes(d: u32, tau: f64) -> Vec<Vec<(f64, f64)>> {
    if d == 1 {
        let m = ceil(2.0 * PI / tau) as usize;
        let h = 2.0 * PI / m as f64;
        return (0..m)
            .map(|i| {
                let hi = if i + 1 == m {
                    2.0 * PI
                } else {
                    h * (i + 1) as f64
                };
                alloc::vec![(h * i as f64, hi)]
            })
            .collect();
    }
    let m = ceil(PI / tau) as usize;
    let h = PI / m as f64;
    let mut out = Vec::new();
    for i in 0..m {
        let a = h * i as f64;
        let b = if i + 1 == m { PI } else { h * (i + 1) as f64 };
        let r = sin(0.5 * (a + b));
        let sub_tau = (tau / r).min(0.5);
        for mut sub in partition_boxes(d - 1, sub_tau) {
            sub.push((a, b));
            out.push(sub);
        }
    }
    out
}

/// Recursive box partition of the angle domain of `S^d`, with certificates.
pub fn partition_sphere(d: u32, tau: f64) -> Result<SpherePartition> {
    if d == 0 {
        return Err(param("sphere dimension must be at least 1"));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(param(format!("tau must lie in (0, 1], got {tau}")));
    }
    let boxes: Vec<AngleBox> = partition_boxes(d, tau)
        .into_iter()
        .map(|intervals| AngleBox { intervals })
        .collect();
    let per_axis = if d <= 2 { 8 } else { 5 };
    let certificates = boxes
        .iter()
        .map(|b| BoxCertificate {
            mass: b.mass(),
            diameter_bound: b.diameter_bound(),
            diameter_sampled: b.sampled_diameter(per_axis),
        })
        .collect();
    Ok(SpherePartition {
        d,
        tau,
        boxes,
        certificates,
    })
}

/// An equal-weight rule for the normalized weight `sin^q` on one interval.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FactorRule {
    pub q: u32,
    pub interval: (f64, f64),
    /// Degree of exactly matched moments `θ^s`.
    pub degree: u32,
    pub nodes: Vec<f64>,
    pub residual: f64,
    pub mode: Mode,
}

impl FactorRule {
    /// `(1/n) Σ sin^a(y) cos^b(y)`.
    pub fn trig_average(&self, a: u32, b: u32) -> f64 {
        let mut acc = crate::math::KahanSum::new();
        for &y in &self.nodes {
            acc.add(ipow(sin(y), a) * ipow(cos(y), b));
        }
        acc.value() / self.nodes.len() as f64
    }

    /// `∫ sin^{a+q} cos^b / ∫ sin^q` over the interval, by composite Gauss–Legendre.
    pub fn trig_reference(&self, a: u32, b: u32) -> f64 {
        trig_reference(self.q, self.interval, a, b)
    }
}

/// `∫_I sin^{a+q} cos^b / ∫_I sin^q`.
pub fn trig_reference(q: u32, (lo, hi): (f64, f64), a: u32, b: u32) -> f64 {
    let rule = LegendreRule::new(32);
    let num = rule.integrate(lo, hi, 4, |t| ipow(sin(t), a + q) * ipow(cos(t), b));
    num / sine_power_integral(q, lo, hi)
}

/// Degree of exactly matched moments needed for accuracy `gamma` with trig degree `k`:
/// smallest `m` with `(ke/(m+1))^{m+1} ≤ γ/2`.
pub fn factor_degree(k: u32, gamma: f64) -> u32 {
    taylor_degree(k, gamma / 2.0)
}

/// Equal-weight rule on `[lo, hi]` matching the `sin^q`-weighted moments
/// `θ^s`, `s ≤ m`, where `m` comes from [`factor_degree`]. Degrees below 2
/// are raised to 2, the smallest degree the construction handles.
pub fn sine_weight_quadrature(
    q: u32,
    interval: (f64, f64),
    k: u32,
    gamma: f64,
    n: usize,
    mode: Option<Mode>,
) -> Result<FactorRule> {
    let (lo, hi) = interval;
    let top = if q == 0 { 2.0 * PI } else { PI };
    if !(lo >= -1e-12 && hi <= top + 1e-12 && lo < hi && hi - lo <= 1.0 + 1e-12) {
        return Err(param(format!(
            "interval [{lo}, {hi}] must lie in [0, {top}] with length at most 1"
        )));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(param(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let degree = factor_degree(k, gamma).max(2);
    let weight = Measure1D::sine_power(q, lo, hi)?;
    let res = construct_on_support(&weight, degree as usize, n, mode)?;
    Ok(FactorRule {
        q,
        interval,
        degree,
        nodes: res.nodes,
        residual: res.residual,
        mode: res.mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct FactorKey {
    q: u32,
    lo: f64,
    hi: f64,
}

/// Everything about a sphere cubature except the node rules: partition, the
/// accuracy split and the distinct one-dimensional factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePlan {
    pub d: u32,
    pub k: u32,
    pub tau: f64,
    pub delta: f64,
    /// `δ/(d 2^k)`, the per-factor budget.
    pub gamma: f64,
    /// `m_0(d, k, δ)`.
    pub m: u32,
    pub partition: SpherePartition,
    factors: Vec<FactorKey>,
    /// For every box, the index of each angle's factor.
    pub box_factors: Vec<Vec<usize>>,
}

impl SpherePlan {
    pub fn new(d: u32, k: u32, tau: f64, delta: f64) -> Result<Self> {
        if k == 0 {
            return Err(param("k must be at least 1"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(param(format!("delta must lie in (0, 1), got {delta}")));
        }
        let partition = partition_sphere(d, tau)?;
        let gamma = delta / (f64::from(d) * ipow(2.0, k));
        let mut index: BTreeMap<(u32, u64, u64), usize> = BTreeMap::new();
        let mut factors = Vec::new();
        let mut box_factors = Vec::with_capacity(partition.len());
        for b in &partition.boxes {
            let mut ids = Vec::with_capacity(b.d());
            for (q, &(lo, hi)) in b.intervals.iter().enumerate() {
                let key = (q as u32, lo.to_bits(), hi.to_bits());
                let id = *index.entry(key).or_insert_with(|| {
                    factors.push(FactorKey {
                        q: q as u32,
                        lo,
                        hi,
                    });
                    factors.len() - 1
                });
                ids.push(id);
            }
            box_factors.push(ids);
        }
        Ok(Self {
            d,
            k,
            tau,
            delta,
            gamma,
            m: m0(d, k, delta),
            partition,
            factors,
            box_factors,
        })
    }

    /// Degree actually matched by each factor rule.
    pub fn degree(&self) -> u32 {
        self.m.max(2)
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    /// `(q, interval)` of factor `i`.
    pub fn factor(&self, i: usize) -> (u32, (f64, f64)) {
        let f = self.factors[i];
        (f.q, (f.lo, f.hi))
    }

    /// First node count tried by the common-`n` search: `m(m+3)` at the matched degree.
    pub fn initial_n(&self) -> usize {
        let m = self.degree() as usize;
        m * (m + 3)
    }

    pub fn build_factor(&self, i: usize, n: usize) -> Result<FactorRule> {
        let f = self.factors[i];
        sine_weight_quadrature(f.q, (f.lo, f.hi), self.k, self.gamma, n, None)
    }

    pub fn assemble(self, n: usize, rules: Vec<FactorRule>) -> SphereCubature {
        SphereCubature {
            d: self.d,
            k: self.k,
            tau: self.tau,
            delta: self.delta,
            gamma: self.gamma,
            m: self.m,
            n,
            partition: self.partition,
            factors: rules,
            box_factors: self.box_factors,
        }
    }
}

/// Whether a failed attempt at node count `n` should be retried with more nodes.
pub fn retry_with_more_nodes(e: &Error) -> bool {
    !matches!(
        e,
        Error::Parameter(_) | Error::Validation { .. } | Error::Unsupported(_)
    )
}

/// Runs `build(n)` for `n = start, ⌈1.5 n⌉, …` until it succeeds.
pub fn search_common_n<T, F>(start: usize, mut build: F) -> Result<(usize, T)>
where
    F: FnMut(usize) -> Result<T>,
{
    let mut n = start.max(1);
    loop {
        match build(n) {
            Ok(v) => return Ok((n, v)),
            Err(e) if retry_with_more_nodes(&e) && n < MAX_FACTOR_NODES => {
                n = (n + n / 2).max(n + 1);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Product cubature on every box of a sphere partition, stored as factor rules.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SphereCubature {
    pub d: u32,
    pub k: u32,
    pub tau: f64,
    pub delta: f64,
    pub gamma: f64,
    pub m: u32,
    /// Nodes per factor; each box carries `n^d` points.
    pub n: usize,
    pub partition: SpherePartition,
    pub factors: Vec<FactorRule>,
    pub box_factors: Vec<Vec<usize>>,
}

/// Sequential construction. With `n = None` the smallest common node count in
/// the search sequence that works for every factor is used.
pub fn sphere_cubature(
    d: u32,
    k: u32,
    tau: f64,
    delta: f64,
    n: Option<usize>,
) -> Result<SphereCubature> {
    let plan = SpherePlan::new(d, k, tau, delta)?;
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

impl SphereCubature {
    pub fn box_count(&self) -> usize {
        self.partition.len()
    }

    /// `N = n^d`.
    pub fn nodes_per_box(&self) -> usize {
        self.n.pow(self.d)
    }

    pub fn box_rules(&self, i: usize) -> impl Iterator<Item = &FactorRule> {
        self.box_factors[i].iter().map(move |&f| &self.factors[f])
    }

    /// Materialized points of box `i` (`n^d` of them), `φ` varying fastest.
    pub fn box_points(&self, i: usize) -> Vec<Vec<f64>> {
        let rules: Vec<&FactorRule> = self.box_rules(i).collect();
        let d = rules.len();
        let total = self.nodes_per_box();
        let mut out = Vec::with_capacity(total);
        let mut ang = alloc::vec![0.0; d];
        for idx in 0..total {
            let mut rem = idx;
            for (q, r) in rules.iter().enumerate() {
                ang[q] = r.nodes[rem % self.n];
                rem /= self.n;
            }
            out.push(spherical_map(&ang));
        }
        out
    }

    /// Node average of `z^α` on box `i`, from the factor rules.
    pub fn box_monomial_average(&self, i: usize, alpha: &[u32]) -> f64 {
        let rules: Vec<&FactorRule> = self.box_rules(i).collect();
        trig_exponents(alpha)
            .iter()
            .zip(&rules)
            .map(|(&(a, b), r)| r.trig_average(a, b))
            .product()
    }

    /// `(1/σ(E)) ∫_E z^α` on box `i`, factor by factor.
    pub fn box_monomial_exact(&self, i: usize, alpha: &[u32]) -> f64 {
        let b = &self.partition.boxes[i];
        trig_exponents(alpha)
            .iter()
            .enumerate()
            .map(|(q, &(a, e))| trig_reference(q as u32, b.intervals[q], a, e))
            .product()
    }

    /// Node average of `(z − w)^α` on box `i`, by binomial expansion.
    pub fn box_shifted_average(&self, i: usize, alpha: &[u32], w: &[f64]) -> f64 {
        shifted_from_monomials(alpha, w, |beta| self.box_monomial_average(i, beta))
    }

    /// Exact normalized integral of `(z − w)^α` on box `i`.
    pub fn box_shifted_exact(&self, i: usize, alpha: &[u32], w: &[f64]) -> f64 {
        shifted_from_monomials(alpha, w, |beta| self.box_monomial_exact(i, beta))
    }

    /// Largest per-factor error `|ref − avg|` over `sin^{k1} cos^{k2}`, `k1 + k2 ≤ k`.
    pub fn max_factor_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for f in &self.factors {
            for k1 in 0..=self.k {
                for k2 in 0..=self.k - k1 {
                    worst = worst.max((f.trig_reference(k1, k2) - f.trig_average(k1, k2)).abs());
                }
            }
        }
        worst
    }
}

/// Per-angle `(sin power, cos power)` of `z^α`: `φ` gets `(α_1, α_2)`, and
/// `θ_q` gets `(α_1 + … + α_{q+1}, α_{q+2})`.
pub fn trig_exponents(alpha: &[u32]) -> Vec<(u32, u32)> {
    let d = alpha.len() - 1;
    let mut out = Vec::with_capacity(d);
    out.push((alpha[0], alpha[1]));
    let mut prefix = alpha[0] + alpha[1];
    for q in 1..d {
        out.push((prefix, alpha[q + 1]));
        prefix += alpha[q + 1];
    }
    out
}

/// `E[(z − w)^α] = Σ_{β ≤ α} Π binom(α_i, β_i) (−w_i)^{α_i − β_i} E[z^β]`.
pub fn shifted_from_monomials<F: FnMut(&[u32]) -> f64>(
    alpha: &[u32],
    w: &[f64],
    mut mono: F,
) -> f64 {
    let dim = alpha.len();
    let count: usize = alpha.iter().map(|&a| a as usize + 1).product();
    let mut beta = alloc::vec![0u32; dim];
    let mut acc = crate::math::KahanSum::new();
    for idx in 0..count {
        let mut rem = idx;
        let mut coef = 1.0;
        for c in 0..dim {
            let b = (rem % (alpha[c] as usize + 1)) as u32;
            rem /= alpha[c] as usize + 1;
            beta[c] = b;
            coef *= crate::math::binomial(alpha[c], b) * ipow(-w[c], alpha[c] - b);
        }
        if coef != 0.0 {
            acc.add(coef * mono(&beta));
        }
    }
    acc.value()
}

/// All multi-indices in `dim` variables with `|α| ≤ k`, including `α = 0`.
pub fn monomials_up_to(dim: usize, k: u32) -> Vec<Vec<u32>> {
    let mut out = alloc::vec![alloc::vec![0u32; dim]];
    out.extend(
        crate::momentmap::MultiIndexBasis::new(k, dim as u32)
            .indices()
            .iter()
            .cloned(),
    );
    out
}
