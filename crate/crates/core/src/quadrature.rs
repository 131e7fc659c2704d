//! Equal-weight quadrature construction.
//!
//! The pipeline is: seed `n` nodes at the quantiles `i/n` of the measure, pick
//! `s = ⌈n/(k+3)⌉` disjoint, well-separated groups of `k` nodes, then move each
//! group along the flow `ẇ = U(w)^{-1}(p − T_k(w))` so that the total power sums
//! end at `n·p`. The flow drives the residual of the group down like `e^{-t}`.
//!
//! Measures with heavy atoms go through [`construct_quadrature_large_atoms`],
//! which places most of each heavy atom's mass directly and runs the main
//! construction on what remains.

use alloc::format;
use alloc::vec::Vec;

use crate::bounds::{n_from_r, r_from_rho, separation_rho};
use crate::error::{domain, numerical, param, Error, Result};
use crate::linalg::lu_solve_in_place;
use crate::math::{ceil, floor, KahanSum};
use crate::measure::Measure1D;
use crate::momentmap::{empirical_moments, power_sums, tk, u_matrix};

/// Normalized-moment residual accepted for a finished construction.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Upper limit on sweeps over the groups in best-effort mode.
pub const BEST_EFFORT_PASSES: usize = 64;

const SUPPORT_SLACK: f64 = 1e-12;

/// Whether the node count is certified by the closed-form bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mode {
    /// Requires `n ≥ ⌈1/r⌉`; every step is covered by the separation argument.
    Guaranteed,
    /// Any `n ≥ k(k+3)`; the same pipeline, with retries, and no certificate.
    BestEffort,
}

/// Bookkeeping from a construction run.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub rho: f64,
    pub r: f64,
    /// `⌈1/r⌉`, absent when `ρ = 0`.
    pub n_guaranteed: Option<f64>,
    pub subsets_total: usize,
    pub subsets_used: usize,
    pub flow_steps: usize,
    /// Best-effort only: increments that had to be halved.
    pub retries: usize,
    pub passes: usize,
    /// Best-effort only: minimum-norm Gauss–Newton steps taken over all nodes.
    #[cfg_attr(feature = "serde", serde(default))]
    pub polish_steps: usize,
    /// Heavy atoms placed directly: `(location, multiplicity)`.
    pub atoms_placed: Vec<(f64, u64)>,
    /// Total mass `q` handed to the main construction in the large-atom path.
    pub q: Option<f64>,
}

/// Equal-weight nodes and how well they match the target moments.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadratureResult {
    /// Sorted ascending.
    pub nodes: Vec<f64>,
    pub k: u32,
    /// Normalized target moments of orders `1..=k`.
    pub target: Vec<f64>,
    /// `max_j |(1/n) Σ x_i^j − target_j|`.
    pub residual: f64,
    pub mode: Mode,
    pub diagnostics: Diagnostics,
}

impl QuadratureResult {
    /// Recomputes the residual from the stored nodes.
    pub fn recompute_residual(&self) -> f64 {
        moment_residual(&self.nodes, &self.target)
    }
}

/// `max_j |(1/n) Σ x_i^j − target_j|`.
pub fn moment_residual(nodes: &[f64], target: &[f64]) -> f64 {
    empirical_moments(nodes, target.len())
        .iter()
        .zip(target)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// `y_i = quantile(i/n)`, `i = 1..=n`.
pub fn simple_approximation(m: &Measure1D, n: usize) -> Vec<f64> {
    let nf = n as f64;
    (1..=n).map(|i| m.quantile(i as f64 / nf)).collect()
}

/// `y_i ≈ n ∫_{(i−1)/n}^{i/n} quantile(u) du`, the centroid of the `i`-th
/// quantile cell, by 4-point Gauss–Legendre in `u`. Each node stays inside its
/// cell like in [`simple_approximation`], so the same `1/n` moment-gap bound
/// applies, but the gap is typically `O(1/n²)`. Best-effort mode seeds from these.
pub fn centroid_approximation(m: &Measure1D, n: usize) -> Vec<f64> {
    let rule = crate::math::LegendreRule::new(4);
    let nf = n as f64;
    (1..=n)
        .map(|i| {
            let (us, ws) = rule.on_interval((i - 1) as f64 / nf, i as f64 / nf, 1);
            let y: f64 = us
                .iter()
                .zip(&ws)
                .map(|(u, w)| w * m.quantile(*u))
                .sum::<f64>()
                * nf;
            y.clamp(m.quantile((i - 1) as f64 / nf), m.quantile(i as f64 / nf))
        })
        .collect()
}

/// Disjoint groups of `k` seeded nodes, `group r = (y_{i0+r-1}, y_{2 i0+r-1}, …)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSelection {
    /// 0-based indices into the seeded node list.
    pub groups: Vec<Vec<usize>>,
    pub i0: usize,
    pub rho: f64,
}

impl SubsetSelection {
    /// Index groups for `n` seeded nodes without any separation check.
    pub fn by_index(n: usize, k: usize, rho: f64) -> Self {
        let i0 = n.div_ceil(k + 3);
        let groups = (1..=i0)
            .map(|r| (1..=k).map(|j| j * i0 + r - 2).collect())
            .collect();
        Self { groups, i0, rho }
    }

    /// Checks `ρ/(3(k−1)) ≤ z_i ≤ 1 − ρ/(3(k−1))` and `|z_i − z_j| ≥ ρ/(k−1)` for
    /// every group, returning the first violating group.
    pub fn check_separation(&self, y: &[f64]) -> core::result::Result<(), usize> {
        let k = self.groups.first().map_or(1, Vec::len);
        if k < 2 {
            return Ok(());
        }
        let km1 = (k - 1) as f64;
        let edge = self.rho / (3.0 * km1) * (1.0 - 1e-12);
        let gap = self.rho / km1 * (1.0 - 1e-12);
        for (g, idx) in self.groups.iter().enumerate() {
            for (t, &i) in idx.iter().enumerate() {
                let z = y[i];
                if z < edge || z > 1.0 - edge {
                    return Err(g);
                }
                if t > 0 && (z - y[idx[t - 1]]).abs() < gap {
                    return Err(g);
                }
            }
        }
        Ok(())
    }
}

/// Selects the separated groups for seeded nodes `y` of measure `m`.
pub fn select_subsets(y: &[f64], k: usize, m: &Measure1D) -> Result<SubsetSelection> {
    if k < 2 {
        return Err(param(format!("subset selection needs k >= 2, got {k}")));
    }
    let n = y.len();
    if n < k * (k + 3) {
        return Err(param(format!(
            "need n >= k(k+3) = {}, got {n}",
            k * (k + 3)
        )));
    }
    let rho = separation_rho(m, k as u32)?;
    if rho == 0.0 {
        return Err(Error::Construction(format!(
            "an atom carries mass >= 1/(k+3) = {}, so no separated subsets exist; use the large-atom construction",
            1.0 / (k + 3) as f64
        )));
    }
    let sel = SubsetSelection::by_index(n, k, rho);
    sel.check_separation(y).map_err(|g| {
        Error::Construction(format!(
            "group {} violates the separation condition for rho = {rho}",
            g + 1
        ))
    })?;
    Ok(sel)
}

/// Settings for [`moment_flow`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    /// Maximum allowed `|w − z|_∞`.
    pub ball: Option<f64>,
    /// Box every node must stay in.
    pub bounds: Option<(f64, f64)>,
    pub step: f64,
    /// Stop once `|T_k(w) − p|_∞` falls below this.
    pub tol: f64,
    pub max_steps: usize,
    /// Keep `(t, residual)` after every step.
    pub record: bool,
}

impl FlowOptions {
    pub fn new(k: usize) -> Self {
        Self {
            ball: None,
            bounds: None,
            step: 0.1,
            tol: 1e-13 * k as f64,
            max_steps: 2000,
            record: false,
        }
    }
}

/// Output of [`moment_flow`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub w: Vec<f64>,
    pub steps: usize,
    /// `(t, |T_k(w(t)) − p|_∞)`, starting with `t = 0`; filled only when recording.
    pub history: Vec<(f64, f64)>,
}

struct FlowWork {
    k: usize,
    mat: Vec<f64>,
    rhs: Vec<f64>,
}

impl FlowWork {
    fn new(k: usize) -> Self {
        Self {
            k,
            mat: alloc::vec![0.0; k * k],
            rhs: alloc::vec![0.0; k],
        }
    }

    /// Loads `p − T_k(w)` and returns its sup norm; [`Self::solve`] then turns it into the velocity.
    fn residual(&mut self, w: &[f64], p: &[f64]) -> f64 {
        raw_residual(w, p, &mut self.rhs);
        self.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `U(w)^{-1}` applied to the loaded residual, into `out`.
    fn solve(&mut self, w: &[f64], out: &mut [f64]) -> Result<()> {
        let k = self.k;
        for (i, &wi) in w.iter().enumerate() {
            let mut pw = 1.0;
            for j in 0..k {
                self.mat[j * k + i] = (j + 1) as f64 * pw;
                pw *= wi;
            }
        }
        lu_solve_in_place(&mut self.mat, k, &mut self.rhs)
            .map_err(|_| numerical(format!("U(w) is singular at w = {w:?}")))?;
        out.copy_from_slice(&self.rhs);
        Ok(())
    }

    /// `G(w) = U(w)^{-1}(p − T_k(w))` into `out`.
    fn velocity(&mut self, w: &[f64], p: &[f64], out: &mut [f64]) -> Result<()> {
        self.residual(w, p);
        self.solve(w, out)
    }
}

/// `out = p − T_k(w)`.
fn raw_residual(w: &[f64], p: &[f64], out: &mut [f64]) {
    out.copy_from_slice(p);
    for &wi in w {
        let mut pw = wi;
        for o in out.iter_mut() {
            *o -= pw;
            pw *= wi;
        }
    }
}

fn residual_inf(w: &[f64], p: &[f64]) -> f64 {
    let mut tmp = alloc::vec![0.0; p.len()];
    raw_residual(w, p, &mut tmp);
    tmp.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Integrates `ẇ = U(w)^{-1}(p − T_k(w))` from `w(0) = z` with classical RK4
/// until `|T_k(w) − p|_∞ < opts.tol`.
pub fn moment_flow(z: &[f64], p: &[f64], opts: &FlowOptions) -> Result<FlowTrace> {
    let k = z.len();
    if p.len() != k {
        return Err(param(format!(
            "target has {} entries, nodes have {k}",
            p.len()
        )));
    }
    let mut work = FlowWork::new(k);
    let mut w = z.to_vec();
    let mut res = work.residual(&w, p);
    let res0 = res;
    let mut history = Vec::new();
    if opts.record {
        history.push((0.0, res));
    }
    let h = opts.step;
    let (mut k1, mut k2, mut k3, mut k4) = (
        alloc::vec![0.0; k],
        alloc::vec![0.0; k],
        alloc::vec![0.0; k],
        alloc::vec![0.0; k],
    );
    let mut tmp = alloc::vec![0.0; k];
    let mut steps = 0;
    while res >= opts.tol {
        if steps >= opts.max_steps {
            return Err(numerical(format!(
                "moment flow stalled at residual {res:e} after {steps} steps"
            )));
        }
        // the residual for this w is still loaded from the convergence check
        work.solve(&w, &mut k1)?;
        for i in 0..k {
            tmp[i] = w[i] + 0.5 * h * k1[i];
        }
        work.velocity(&tmp, p, &mut k2)?;
        for i in 0..k {
            tmp[i] = w[i] + 0.5 * h * k2[i];
        }
        work.velocity(&tmp, p, &mut k3)?;
        for i in 0..k {
            tmp[i] = w[i] + h * k3[i];
        }
        work.velocity(&tmp, p, &mut k4)?;
        for i in 0..k {
            w[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        steps += 1;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(numerical("moment flow produced a non-finite node"));
        }
        if let Some(radius) = opts.ball {
            let dist = w
                .iter()
                .zip(z)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if dist > radius * (1.0 + 1e-9) + 1e-15 {
                return Err(domain(format!(
                    "flow left the ball: |w - z| = {dist:e} > {radius:e}; the starting residual violates the precondition"
                )));
            }
        }
        if let Some((lo, hi)) = opts.bounds {
            if let Some(v) = w
                .iter()
                .find(|v| **v < lo - SUPPORT_SLACK || **v > hi + SUPPORT_SLACK)
            {
                return Err(domain(format!(
                    "flow moved a node to {v}, outside [{lo}, {hi}]"
                )));
            }
        }
        let prev = res;
        res = work.residual(&w, p);
        if opts.record {
            history.push((steps as f64 * h, res));
        }
        if res > 10.0 * res0.max(opts.tol) {
            return Err(numerical(format!("moment flow diverged: residual {res:e}")));
        }
        // rounding floor: the residual can stop shrinking just above tol
        if res >= prev && res < 1e3 * opts.tol {
            break;
        }
    }
    if let Some((lo, hi)) = opts.bounds {
        for v in &mut w {
            *v = v.clamp(lo, hi);
        }
    }
    Ok(FlowTrace { w, steps, history })
}

/// Moves `z` so that `T_k(w) = p`, staying within `ρ/(3(k−1))` of `z`.
pub fn perturb_to_moments(z: &[f64], p: &[f64], rho: f64) -> Result<Vec<f64>> {
    let k = z.len();
    let mut opts = FlowOptions::new(k);
    if k >= 2 {
        opts.ball = Some(rho / (3.0 * (k - 1) as f64));
    }
    let trace = moment_flow(z, p, &opts)?;
    let mut w = trace.w;
    let mut res = residual_inf(&w, p);
    // The flow stops at 1e-13·k, which ‖U⁻¹‖ can turn into 1e-9 in the nodes;
    // a few Newton steps take the residual down to rounding.
    for _ in 0..4 {
        let r: Vec<f64> = tk(&w).iter().zip(p).map(|(a, b)| b - a).collect();
        let Ok(dw) = u_matrix(&w).solve(&r) else {
            break;
        };
        let trial: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a + b).collect();
        let next = residual_inf(&trial, p);
        if !(next < res) {
            break;
        }
        w = trial;
        res = next;
    }
    let scale = p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if res > 1e-12 * scale {
        return Err(numerical(format!("flow finished at residual {res:e}")));
    }
    Ok(w)
}

fn check_unit_support(m: &Measure1D) -> Result<()> {
    let (a, b) = m.support();
    if a < -SUPPORT_SLACK || b > 1.0 + SUPPORT_SLACK {
        return Err(domain(format!(
            "construction needs support inside [0, 1], got [{a}, {b}]; rescale the measure first"
        )));
    }
    Ok(())
}

/// Moves all nodes at once by damped minimum-norm Gauss–Newton steps
/// `Δy = Jᵀ(J Jᵀ)⁻¹ r` toward the normalized moments `p`, keeping them in
/// `[0, 1]`. Stops below `tol` or when a step no longer helps; returns the
/// number of accepted steps.
pub fn polish_moments(y: &mut [f64], p: &[f64], tol: f64) -> usize {
    let k = p.len();
    let n = y.len() as f64;
    let mut res = moment_residual(y, p);
    let mut trial = alloc::vec![0.0; y.len()];
    let mut steps = 0;
    for _ in 0..50 {
        if res <= tol {
            break;
        }
        let e = empirical_moments(y, k);
        let mut r: Vec<f64> = p.iter().zip(&e).map(|(a, b)| a - b).collect();
        // Gram matrix of the rows g_i[j] = (j+1) y_i^j / n
        let mut gram = alloc::vec![0.0; k * k];
        let mut g = alloc::vec![0.0; k];
        for &yi in y.iter() {
            let mut pw = 1.0;
            for (j, gj) in g.iter_mut().enumerate() {
                *gj = (j + 1) as f64 * pw / n;
                pw *= yi;
            }
            for a in 0..k {
                for b in 0..k {
                    gram[a * k + b] += g[a] * g[b];
                }
            }
        }
        if lu_solve_in_place(&mut gram, k, &mut r).is_err() {
            break;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            for (t, &yi) in trial.iter_mut().zip(y.iter()) {
                let mut pw = 1.0;
                let mut d = 0.0;
                for (j, rj) in r.iter().enumerate() {
                    d += rj * (j + 1) as f64 * pw / n;
                    pw *= yi;
                }
                *t = yi + lambda * d;
            }
            if trial.iter().all(|v| (0.0..=1.0).contains(v)) {
                let now = moment_residual(&trial, p);
                if now < res {
                    y.copy_from_slice(&trial);
                    res = now;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        steps += 1;
    }
    steps
}

/// Builds `n` equal-weight nodes in `[0, 1]` whose first `k` normalized moments equal `p`.
pub fn construct_quadrature(
    m: &Measure1D,
    k: usize,
    n: usize,
    p: &[f64],
    mode: Mode,
) -> Result<QuadratureResult> {
    check_unit_support(m)?;
    if k < 2 {
        return Err(param(format!("construction needs k >= 2, got {k}")));
    }
    if p.len() != k {
        return Err(param(format!(
            "target has {} moments, expected k = {k}",
            p.len()
        )));
    }
    if n < k * (k + 3) {
        return Err(param(format!(
            "need n >= k(k+3) = {}, got {n}",
            k * (k + 3)
        )));
    }
    let rho = separation_rho(m, k as u32)?;
    let r = r_from_rho(rho, k as u32);
    let n_guaranteed = (rho > 0.0).then(|| n_from_r(r));

    let mut diag = Diagnostics {
        rho,
        r,
        n_guaranteed,
        ..Diagnostics::default()
    };

    if mode == Mode::Guaranteed {
        let Some(need) = n_guaranteed else {
            return Err(Error::Construction(format!(
                "an atom carries mass >= 1/(k+3) = {}; use the large-atom construction",
                1.0 / (k + 3) as f64
            )));
        };
        if (n as f64) < need {
            return Err(param(format!(
                "guaranteed mode needs n >= {need} (r = {r:e}), got {n}"
            )));
        }
        for (j, pj) in p.iter().enumerate() {
            let mj = m.moment(j as u32 + 1);
            // a target built as m ± r lands an ulp of m away from r
            if (pj - mj).abs() > r + 4.0 * f64::EPSILON * mj.abs().max(1.0) {
                return Err(param(format!(
                    "target moment {} = {pj} is farther than r = {r:e} from the measure's {mj}",
                    j + 1
                )));
            }
        }
    }

    let mut y = match mode {
        Mode::Guaranteed => simple_approximation(m, n),
        Mode::BestEffort => centroid_approximation(m, n),
    };
    let sel = SubsetSelection::by_index(n, k, rho);
    if mode == Mode::Guaranteed {
        sel.check_separation(&y).map_err(|g| {
            Error::Construction(format!(
                "group {} violates the separation condition for rho = {rho}",
                g + 1
            ))
        })?;
    }
    diag.subsets_total = sel.groups.len();

    let target_raw: Vec<f64> = p.iter().map(|v| v * n as f64).collect();
    let mut running: Vec<KahanSum> = power_sums(&y, k)
        .into_iter()
        .map(|v| {
            let mut s = KahanSum::new();
            s.add(v);
            s
        })
        .collect();

    let mut opts = FlowOptions::new(k);
    match mode {
        Mode::Guaranteed => opts.ball = Some(rho / (3.0 * (k - 1) as f64)),
        Mode::BestEffort => opts.bounds = Some((0.0, 1.0)),
    }
    let max_passes = if mode == Mode::Guaranteed {
        1
    } else {
        BEST_EFFORT_PASSES
    };
    let mut last_residual = f64::INFINITY;
    let mut used = alloc::vec![false; sel.groups.len()];
    let mut z = alloc::vec![0.0; k];
    let mut pz = alloc::vec![0.0; k];

    for pass in 0..max_passes {
        diag.passes = pass + 1;
        let s = sel.groups.len();
        for (gi, group) in sel.groups.iter().enumerate() {
            for (t, &i) in group.iter().enumerate() {
                z[t] = y[i];
            }
            let tz = power_sums(&z, k);
            let left = (s - gi) as f64;
            let mut inc: Vec<f64> = (0..k)
                .map(|j| (target_raw[j] - running[j].value()) / left)
                .collect();
            let mut outcome = None;
            for attempt in 0..9 {
                for j in 0..k {
                    pz[j] = tz[j] + inc[j];
                }
                match moment_flow(&z, &pz, &opts) {
                    Ok(tr) => {
                        outcome = Some(tr);
                        break;
                    }
                    Err(e) if mode == Mode::Guaranteed => return Err(e),
                    Err(_) if attempt < 8 => {
                        diag.retries += 1;
                        inc.iter_mut().for_each(|v| *v *= 0.5);
                    }
                    Err(_) => {}
                }
            }
            if let Some(tr) = outcome {
                diag.flow_steps += tr.steps;
                let tw = power_sums(&tr.w, k);
                for j in 0..k {
                    running[j].add(tw[j] - tz[j]);
                }
                for (t, &i) in group.iter().enumerate() {
                    y[i] = tr.w[t];
                }
                used[gi] = true;
            }
        }
        if mode == Mode::BestEffort {
            let now = moment_residual(&y, p);
            // stop when converged or when a whole pass gains less than ten percent
            if now <= 0.1 * RESIDUAL_TOL || now > 0.9 * last_residual {
                break;
            }
            last_residual = now;
        }
    }
    diag.subsets_used = used.iter().filter(|u| **u).count();
    if mode == Mode::BestEffort && moment_residual(&y, p) > 0.1 * RESIDUAL_TOL {
        diag.polish_steps = polish_moments(&mut y, p, 0.1 * RESIDUAL_TOL);
    }

    y.sort_by(f64::total_cmp);
    let residual = moment_residual(&y, p);
    if residual > RESIDUAL_TOL {
        return Err(match mode {
            Mode::Guaranteed => {
                numerical(format!("construction finished at residual {residual:e}"))
            }
            Mode::BestEffort => Error::BestEffort {
                residual,
                tolerance: RESIDUAL_TOL,
            },
        });
    }
    Ok(QuadratureResult {
        nodes: y,
        k: k as u32,
        target: p.to_vec(),
        residual,
        mode,
        diagnostics: diag,
    })
}

/// [`construct_quadrature`] aimed at the measure's own moments.
pub fn construct_for_measure(
    m: &Measure1D,
    k: usize,
    n: usize,
    mode: Mode,
) -> Result<QuadratureResult> {
    let p = m.moments(k as u32);
    construct_quadrature(m, k, n, &p, mode)
}

/// Guaranteed when `n` reaches `⌈1/r⌉` for this measure and degree, best-effort otherwise.
pub fn mode_for(m: &Measure1D, k: usize, n: usize) -> Result<Mode> {
    let rho = separation_rho(m, k as u32)?;
    let certified = rho > 0.0 && (n as f64) >= n_from_r(r_from_rho(rho, k as u32));
    Ok(if certified {
        Mode::Guaranteed
    } else {
        Mode::BestEffort
    })
}

/// Equal-weight nodes on an arbitrary support: rescales to `[0, 1]`, matches the
/// rescaled measure's own moments and maps the nodes back. The stored target and
/// residual refer to the rescaled problem. With `mode = None` the mode comes
/// from [`mode_for`].
pub fn construct_on_support(
    m: &Measure1D,
    k: usize,
    n: usize,
    mode: Option<Mode>,
) -> Result<QuadratureResult> {
    let (a, b) = m.support();
    let unit = if a == 0.0 && b == 1.0 {
        m.clone()
    } else {
        m.affine_rescale(0.0, 1.0)?
    };
    let mode = match mode {
        Some(mode) => mode,
        None => mode_for(&unit, k, n)?,
    };
    let mut res = construct_for_measure(&unit, k, n, mode)?;
    if a != 0.0 || b != 1.0 {
        let w = b - a;
        for x in &mut res.nodes {
            *x = (a + w * *x).clamp(a, b);
        }
    }
    Ok(res)
}

/// The parameters of the large-atom decomposition.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LargeAtomPlan {
    /// Total mass of the atom-capped measure `σ^t_ε`.
    pub truncated_mass: f64,
    pub rho: f64,
    pub r: f64,
    /// `max(⌈1/(r σ^t_ε)⌉, ⌈(2k+6)/ε⌉)`.
    pub n_required: f64,
}

/// Checks `ε/σ^t_ε([0,1]) < 2/(2k+7)` and evaluates the node-count requirement.
pub fn large_atom_plan(m: &Measure1D, k: usize, eps: f64) -> Result<LargeAtomPlan> {
    check_unit_support(m)?;
    if k < 2 {
        return Err(param(format!("construction needs k >= 2, got {k}")));
    }
    if m.is_purely_atomic() && m.atoms().len() <= k + 3 {
        return Err(Error::Unsupported(format!(
            "purely atomic measure with {} <= k+3 atoms: no cap eps satisfies the large-atom condition",
            m.atoms().len()
        )));
    }
    let trunc = m.truncate_atoms(eps)?;
    let kf = k as f64;
    let ratio = eps / trunc.truncated_mass;
    if !(ratio < 2.0 / (2.0 * kf + 7.0)) {
        return Err(param(format!(
            "eps / capped mass = {ratio} must be below 2/(2k+7) = {}",
            2.0 / (2.0 * kf + 7.0)
        )));
    }
    let rho = (kf - 1.0) * trunc.normalized.inverse_modulus(2.0 / (2.0 * kf + 7.0))?;
    let r = r_from_rho(rho, k as u32);
    if rho == 0.0 {
        return Err(Error::Construction(
            "capped measure still has an atom of mass >= 2/(2k+7); lower eps".into(),
        ));
    }
    let n1 = ceil(1.0 / (r * trunc.truncated_mass));
    let n2 = ceil((2.0 * kf + 6.0) / eps);
    Ok(LargeAtomPlan {
        truncated_mass: trunc.truncated_mass,
        rho,
        r,
        n_required: n1.max(n2),
    })
}

/// Equal-weight nodes for a measure with heavy atoms.
///
/// Each atom heavier than `(2k+7)/(2k+6)·ε` keeps `⌊n(σ({x}) − ε)⌋` nodes
/// placed on it; the remaining `qn` nodes come from the main construction on
/// the renormalized remainder.
pub fn construct_quadrature_large_atoms(
    m: &Measure1D,
    k: usize,
    eps: f64,
    n: usize,
    mode: Mode,
) -> Result<QuadratureResult> {
    let plan = large_atom_plan(m, k, eps)?;
    if mode == Mode::Guaranteed && (n as f64) < plan.n_required {
        return Err(param(format!(
            "guaranteed mode needs n >= {} for eps = {eps}, got {n}",
            plan.n_required
        )));
    }
    let kf = k as f64;
    let heavy = (2.0 * kf + 7.0) / (2.0 * kf + 6.0) * eps;
    let nf = n as f64;
    let mut counts = Vec::with_capacity(m.atoms().len());
    for a in m.atoms() {
        let c = if a.mass > heavy {
            // the small slack absorbs rounding in n(mass − eps) at exact integers
            floor(nf * (a.mass - eps) + 1e-9).max(0.0) as u64
        } else {
            0
        };
        counts.push(c);
    }
    let placed: u64 = counts.iter().sum();
    let target = m.moments(k as u32);
    let mut diag_atoms = Vec::new();
    let mut nodes = Vec::with_capacity(n);
    for (a, &c) in m.atoms().iter().zip(&counts) {
        if c > 0 {
            diag_atoms.push((a.x, c));
            nodes.extend(core::iter::repeat_n(a.x, c as usize));
        }
    }
    let qn = n - placed as usize;
    let q = qn as f64 / nf;

    let (inner_diag, inner_nodes) = if placed == 0 {
        let res = construct_for_measure(m, k, n, mode)?;
        (res.diagnostics, res.nodes)
    } else {
        let removal: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
        let (_, rest) = m.with_atoms_reduced(&removal)?;
        let res = construct_for_measure(&rest, k, qn, mode)?;
        (res.diagnostics, res.nodes)
    };
    nodes.extend(inner_nodes);
    nodes.sort_by(f64::total_cmp);
    let residual = moment_residual(&nodes, &target);
    if residual > RESIDUAL_TOL {
        return Err(numerical(format!(
            "merged node set has residual {residual:e}"
        )));
    }
    let diagnostics = Diagnostics {
        rho: plan.rho,
        r: plan.r,
        n_guaranteed: Some(plan.n_required),
        atoms_placed: diag_atoms,
        q: Some(q),
        ..inner_diag
    };
    Ok(QuadratureResult {
        nodes,
        k: k as u32,
        target,
        residual,
        mode,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::E;
    use alloc::vec;

    #[test]
    fn simple_approximation_examples() {
        let u = Measure1D::uniform();
        assert_eq!(simple_approximation(&u, 2), vec![0.5, 1.0]);
        assert_eq!(simple_approximation(&u, 4), vec![0.25, 0.5, 0.75, 1.0]);
        let two = Measure1D::equal_atoms(&[0.0, 1.0]).unwrap();
        assert_eq!(simple_approximation(&two, 2), vec![0.0, 1.0]);
    }

    #[test]
    fn subset_indices() {
        let sel = SubsetSelection::by_index(30, 2, 0.2);
        assert_eq!(sel.i0, 6);
        assert_eq!(sel.groups.len(), 6);
        // y_6 and y_12 in 1-based numbering
        assert_eq!(sel.groups[0], vec![5, 11]);
        let u = Measure1D::uniform();
        let y = simple_approximation(&u, 30);
        let sel = select_subsets(&y, 2, &u).unwrap();
        assert!((y[sel.groups[0][0]] - 0.2).abs() < 1e-15);
        assert!((y[sel.groups[0][1]] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn subsets_fail_on_heavy_atoms() {
        let m = Measure1D::equal_atoms(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]).unwrap();
        let y = simple_approximation(&m, 40);
        assert!(matches!(
            select_subsets(&y, 3, &m),
            Err(Error::Construction(_))
        ));
    }

    #[test]
    fn flow_fixed_point() {
        let z = [0.25, 0.75];
        let w = perturb_to_moments(&z, &power_sums(&z, 2), 0.5).unwrap();
        assert_eq!(w, z.to_vec());
    }

    #[test]
    fn flow_matches_quadratic_roots() {
        let w = perturb_to_moments(&[0.25, 0.75], &[1.002, 0.625], 0.5).unwrap();
        let s: f64 = 1.002;
        let prod = (s * s - 0.625) / 2.0;
        let disc = (s * s - 4.0 * prod).sqrt();
        let (a, b) = ((s - disc) / 2.0, (s + disc) / 2.0);
        assert!(
            (w[0] - a).abs() < 1e-12 && (w[1] - b).abs() < 1e-12,
            "{w:?}"
        );
        assert!((w[0] - 0.25301).abs() < 1e-5);
    }

    #[test]
    fn guaranteed_uniform_k2() {
        let u = Measure1D::uniform();
        let r = (0.2 / 30.0) * (0.2 / (12.0 * E));
        let n = ceil(1.0 / r) as usize;
        let res = construct_for_measure(&u, 2, n, Mode::Guaranteed).unwrap();
        assert_eq!(res.nodes.len(), n);
        assert!(res.residual <= RESIDUAL_TOL);
        assert!((res.diagnostics.rho - 0.2).abs() < 1e-12);
        assert!(res.nodes.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn guaranteed_rejects_small_n() {
        let u = Measure1D::uniform();
        assert!(matches!(
            construct_for_measure(&u, 2, 1000, Mode::Guaranteed),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn best_effort_uniform_k5() {
        let u = Measure1D::uniform();
        let res = construct_for_measure(&u, 5, 1000, Mode::BestEffort).unwrap();
        assert!(res.residual <= RESIDUAL_TOL);
        assert_eq!(res.mode, Mode::BestEffort);
    }

    #[test]
    fn large_atom_counts() {
        let m = Measure1D::mixture(0.3, 0.5).unwrap();
        let res = construct_quadrature_large_atoms(&m, 2, 0.1, 2000, Mode::BestEffort).unwrap();
        assert_eq!(res.nodes.len(), 2000);
        assert_eq!(res.diagnostics.atoms_placed, vec![(0.3, 800)]);
        assert!(res.residual <= RESIDUAL_TOL);
        assert!((res.diagnostics.q.unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn large_atom_condition() {
        let m = Measure1D::mixture(0.3, 0.5).unwrap();
        let plan = large_atom_plan(&m, 2, 0.1).unwrap();
        assert!((plan.truncated_mass - 0.6).abs() < 1e-15);
        let few = Measure1D::equal_atoms(&[0.1, 0.5, 0.9]).unwrap();
        assert!(matches!(
            large_atom_plan(&few, 2, 0.1),
            Err(Error::Unsupported(_))
        ));
    }
}
