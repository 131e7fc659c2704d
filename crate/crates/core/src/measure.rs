//! Probability measures on a bounded interval: finitely many atoms plus a
//! piecewise density.
//!
//! Densities are polynomials of degree at most three, or one of two analytic
//! families whose integrals are available in closed form: a scaled exponential
//! and a scaled power of a sine. The CDF is taken over closed intervals, so
//! `cdf(x)` includes an atom sitting at `x`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, param, Result};
use crate::math::{self, binomial, cos, exp, expm1, ipow, sin, KahanSum, LegendreRule, PI};

const MASS_TOL: f64 = 1e-12;
const POSITION_TOL: f64 = 1e-12;

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

/// Density on one piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    /// `c0 + c1 x + c2 x^2 + c3 x^3`.
    Polynomial([f64; 4]),
    /// `scale * exp(rate * (x - anchor))`.
    Exponential { scale: f64, rate: f64, anchor: f64 },
    /// `scale * sin(freq * x + phase)^power`.
    SinePower {
        scale: f64,
        power: u32,
        freq: f64,
        phase: f64,
    },
}

impl Density {
    pub fn constant(c: f64) -> Self {
        Density::Polynomial([c, 0.0, 0.0, 0.0])
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Density::Polynomial(c) => c[0] + x * (c[1] + x * (c[2] + x * c[3])),
            Density::Exponential {
                scale,
                rate,
                anchor,
            } => scale * exp(rate * (x - anchor)),
            Density::SinePower {
                scale,
                power,
                freq,
                phase,
            } => scale * ipow(sin(freq * x + phase), power),
        }
    }

    /// `∫_u^v f(x) dx`.
    pub fn integral(&self, u: f64, v: f64) -> f64 {
        match *self {
            Density::Polynomial(c) => {
                let anti =
                    |x: f64| x * (c[0] + x * (c[1] / 2.0 + x * (c[2] / 3.0 + x * c[3] / 4.0)));
                anti(v) - anti(u)
            }
            Density::Exponential {
                scale,
                rate,
                anchor,
            } => {
                if rate == 0.0 {
                    scale * (v - u)
                } else {
                    scale * exp(rate * (u - anchor)) * expm1(rate * (v - u)) / rate
                }
            }
            Density::SinePower {
                scale,
                power,
                freq,
                phase,
            } => {
                scale
                    * (sine_power_antiderivative(power, freq * v + phase)
                        - sine_power_antiderivative(power, freq * u + phase))
                    / freq
            }
        }
    }

    /// `∫_lo^hi x^j f(x) dx`.
    pub fn moment(&self, j: u32, lo: f64, hi: f64) -> f64 {
        match *self {
            Density::Polynomial(c) => {
                let mut acc = KahanSum::new();
                for (i, ci) in c.iter().enumerate() {
                    if *ci != 0.0 {
                        let e = j + i as u32 + 1;
                        acc.add(ci * (ipow(hi, e) - ipow(lo, e)) / f64::from(e));
                    }
                }
                acc.value()
            }
            Density::Exponential {
                scale,
                rate,
                anchor,
            } => exponential_moment(j, lo, hi, scale, rate, anchor),
            Density::SinePower { .. } => {
                // x^j sin^q(..) is entire; 2 x 48 Gauss–Legendre points are exact to rounding
                // for the short pieces and moderate degrees used here.
                let rule = LegendreRule::new(48);
                rule.integrate(lo, hi, 2, |x| ipow(x, j) * self.value(x))
            }
        }
    }

    /// Maximum of the density over `[lo, hi]`.
    pub fn max_on(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            Density::Polynomial(c) => polynomial_critical_points(&c, lo, hi)
                .into_iter()
                .map(|x| self.value(x))
                .fold(f64::NEG_INFINITY, f64::max),
            Density::Exponential { .. } => self.value(lo).max(self.value(hi)),
            Density::SinePower {
                scale,
                power,
                freq,
                phase,
            } => {
                let (a, b) = ordered(freq * lo + phase, freq * hi + phase);
                // a crest of |sin| inside the angle range
                let j = math::ceil((a - PI / 2.0) / PI);
                let crest = PI / 2.0 + j * PI;
                if power > 0 && crest <= b {
                    scale
                } else {
                    self.value(lo).max(self.value(hi))
                }
            }
        }
    }

    fn check_nonnegative(&self, lo: f64, hi: f64) -> core::result::Result<(), String> {
        match *self {
            Density::Polynomial(c) => {
                for x in polynomial_critical_points(&c, lo, hi) {
                    let v = self.value(x);
                    if v < -1e-14 {
                        return Err(format!("density {v:e} at x = {x} on [{lo}, {hi}]"));
                    }
                }
                Ok(())
            }
            Density::Exponential { scale, .. } => {
                if scale < 0.0 {
                    Err(format!("exponential scale {scale} < 0"))
                } else {
                    Ok(())
                }
            }
            Density::SinePower {
                scale,
                power,
                freq,
                phase,
            } => {
                if scale < 0.0 {
                    return Err(format!("sine-power scale {scale} < 0"));
                }
                if power % 2 == 0 {
                    return Ok(());
                }
                let (a, b) = ordered(freq * lo + phase, freq * hi + phase);
                let half = math::floor((a + 1e-12) / PI);
                let even = libm::fmod(half, 2.0) == 0.0;
                if even && b <= (half + 1.0) * PI + 1e-12 {
                    Ok(())
                } else {
                    Err(format!("sin changes sign on angle range [{a}, {b}]"))
                }
            }
        }
    }

    /// Density of the pushforward under `x ↦ s x + t` (any `s != 0`).
    fn pushforward(&self, s: f64, t: f64) -> Density {
        let inv = 1.0 / s.abs();
        match *self {
            Density::Polynomial(c) => {
                let alpha = 1.0 / s;
                let beta = -t / s;
                let mut out = [0.0; 4];
                for (i, ci) in c.iter().enumerate() {
                    for (l, o) in out.iter_mut().enumerate().take(i + 1) {
                        *o += ci
                            * binomial(i as u32, l as u32)
                            * ipow(alpha, l as u32)
                            * ipow(beta, (i - l) as u32);
                    }
                }
                out.iter_mut().for_each(|v| *v *= inv);
                Density::Polynomial(out)
            }
            Density::Exponential {
                scale,
                rate,
                anchor,
            } => Density::Exponential {
                scale: scale * inv,
                rate: rate / s,
                anchor: s * anchor + t,
            },
            Density::SinePower {
                scale,
                power,
                freq,
                phase,
            } => Density::SinePower {
                scale: scale * inv,
                power,
                freq: freq / s,
                phase: phase - freq * t / s,
            },
        }
    }

    fn scaled(&self, factor: f64) -> Density {
        match *self {
            Density::Polynomial(c) => Density::Polynomial(c.map(|v| v * factor)),
            Density::Exponential {
                scale,
                rate,
                anchor,
            } => Density::Exponential {
                scale: scale * factor,
                rate,
                anchor,
            },
            Density::SinePower {
                scale,
                power,
                freq,
                phase,
            } => Density::SinePower {
                scale: scale * factor,
                power,
                freq,
                phase,
            },
        }
    }

    fn fingerprint(&self, out: &mut Vec<u8>) {
        let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
        match *self {
            Density::Polynomial(c) => {
                put(0.0);
                c.iter().for_each(|v| put(*v));
            }
            Density::Exponential {
                scale,
                rate,
                anchor,
            } => {
                put(1.0);
                put(scale);
                put(rate);
                put(anchor);
            }
            Density::SinePower {
                scale,
                power,
                freq,
                phase,
            } => {
                put(2.0);
                put(scale);
                put(f64::from(power));
                put(freq);
                put(phase);
            }
        }
    }
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Endpoints plus interior stationary points of a cubic.
fn polynomial_critical_points(c: &[f64; 4], lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = alloc::vec![lo, hi];
    // derivative c1 + 2 c2 x + 3 c3 x^2
    let (a, b, cc) = (3.0 * c[3], 2.0 * c[2], c[1]);
    let mut push = |x: f64| {
        if x > lo && x < hi {
            pts.push(x);
        }
    };
    if a == 0.0 {
        if b != 0.0 {
            push(-cc / b);
        }
    } else {
        let disc = b * b - 4.0 * a * cc;
        if disc >= 0.0 {
            let sq = math::sqrt(disc);
            push((-b + sq) / (2.0 * a));
            push((-b - sq) / (2.0 * a));
        }
    }
    pts
}

/// `∫_a^b sin^q(θ) dθ` in closed form.
pub fn sine_power_integral(q: u32, a: f64, b: f64) -> f64 {
    sine_power_antiderivative(q, b) - sine_power_antiderivative(q, a)
}

/// `∫_0^θ sin^q`.
fn sine_power_antiderivative(q: u32, theta: f64) -> f64 {
    match q {
        0 => theta,
        1 => 1.0 - cos(theta),
        _ => {
            let qf = f64::from(q);
            -ipow(sin(theta), q - 1) * cos(theta) / qf
                + (qf - 1.0) / qf * sine_power_antiderivative(q - 2, theta)
        }
    }
}

/// `∫_0^w u^i e^{-λu} du` through the positive series of the lower incomplete gamma
/// function: `e^{-λw} w^{i+1}/(i+1) Σ_m Π_{r≤m} λw/(i+1+r)`.
fn incomplete_gamma_integral(i: u32, lambda: f64, w: f64) -> f64 {
    let x = lambda * w;
    let mut term = 1.0;
    let mut acc = KahanSum::new();
    acc.add(term);
    let mut r = 1u32;
    loop {
        term *= x / f64::from(i + 1 + r);
        acc.add(term);
        if term < 1e-18 * acc.value() || r > 10_000 {
            break;
        }
        r += 1;
    }
    exp(-x) * ipow(w, i + 1) / f64::from(i + 1) * acc.value()
}

fn exponential_moment(j: u32, lo: f64, hi: f64, scale: f64, rate: f64, anchor: f64) -> f64 {
    if rate == 0.0 {
        return Density::constant(scale).moment(j, lo, hi);
    }
    let w = hi - lo;
    let lambda = rate.abs();
    let mut acc = KahanSum::new();
    if rate < 0.0 {
        // x = lo + u, density A e^{-λu}
        let amp = scale * exp(rate * (lo - anchor));
        for i in 0..=j {
            acc.add(binomial(j, i) * ipow(lo, j - i) * incomplete_gamma_integral(i, lambda, w));
        }
        amp * acc.value()
    } else {
        // x = hi - u, density A e^{-λu}
        let amp = scale * exp(rate * (hi - anchor));
        for i in 0..=j {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(
                sign * binomial(j, i) * ipow(hi, j - i) * incomplete_gamma_integral(i, lambda, w),
            );
        }
        amp * acc.value()
    }
}

/// One density piece on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub density: Density,
}

impl Piece {
    pub fn new(lo: f64, hi: f64, density: Density) -> Self {
        Self { lo, hi, density }
    }

    pub fn mass(&self) -> f64 {
        self.density.integral(self.lo, self.hi)
    }
}

/// A probability measure on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure1D {
    support: (f64, f64),
    atoms: Vec<Atom>,
    pieces: Vec<Piece>,
    breaks: Vec<f64>,
    cdf_before: Vec<f64>,
    cdf_at: Vec<f64>,
    segment_piece: Vec<Option<usize>>,
}

/// Result of capping every atom at mass `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationResult {
    /// Total mass of the capped (unnormalized) measure.
    pub truncated_mass: f64,
    /// The capped measure divided by `truncated_mass`.
    pub normalized: Measure1D,
}

impl Measure1D {
    /// Builds and validates a measure.
    pub fn new(support: (f64, f64), atoms: Vec<Atom>, pieces: Vec<Piece>) -> Result<Self> {
        let (a, b) = support;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid(
                "support",
                format!("support [{a}, {b}] must be a finite nondegenerate interval"),
            ));
        }
        for (i, at) in atoms.iter().enumerate() {
            if !(at.mass > 0.0 && at.mass.is_finite()) {
                return Err(invalid(
                    "atom-mass-positive",
                    format!("atom {i} has mass {}", at.mass),
                ));
            }
            if !(at.x >= a - POSITION_TOL && at.x <= b + POSITION_TOL) {
                return Err(invalid(
                    "atom-in-support",
                    format!("atom {i} at {} outside [{a}, {b}]", at.x),
                ));
            }
            if i > 0 && at.x <= atoms[i - 1].x {
                return Err(invalid(
                    "atoms-increasing",
                    format!(
                        "atom {i} at {} does not exceed previous {}",
                        at.x,
                        atoms[i - 1].x
                    ),
                ));
            }
        }
        for (i, p) in pieces.iter().enumerate() {
            if !(p.lo < p.hi && p.lo.is_finite() && p.hi.is_finite()) {
                return Err(invalid(
                    "piece-interval",
                    format!("piece {i} has interval [{}, {}]", p.lo, p.hi),
                ));
            }
            if p.lo < a - POSITION_TOL || p.hi > b + POSITION_TOL {
                return Err(invalid(
                    "piece-in-support",
                    format!("piece {i} [{}, {}] outside [{a}, {b}]", p.lo, p.hi),
                ));
            }
            if i > 0 && p.lo < pieces[i - 1].hi {
                return Err(invalid(
                    "pieces-non-overlapping",
                    format!(
                        "piece {i} starts at {} before previous end {}",
                        p.lo,
                        pieces[i - 1].hi
                    ),
                ));
            }
            if let Err(detail) = p.density.check_nonnegative(p.lo, p.hi) {
                return Err(invalid(
                    "density-nonnegative",
                    format!("piece {i}: {detail}"),
                ));
            }
        }
        let m = Self::assemble(support, atoms, pieces);
        let total = *m.cdf_at.last().unwrap_or(&0.0);
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(
                "mass-one",
                format!("total mass is {total}, expected 1"),
            ));
        }
        Ok(m)
    }

    fn assemble(support: (f64, f64), atoms: Vec<Atom>, pieces: Vec<Piece>) -> Self {
        let mut breaks: Vec<f64> = atoms
            .iter()
            .map(|a| a.x)
            .chain(pieces.iter().flat_map(|p| [p.lo, p.hi]))
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let nb = breaks.len();
        let mut segment_piece = alloc::vec![None; nb];
        for (s, seg) in segment_piece
            .iter_mut()
            .enumerate()
            .take(nb.saturating_sub(1))
        {
            let mid = 0.5 * (breaks[s] + breaks[s + 1]);
            *seg = pieces.iter().position(|p| p.lo <= mid && mid <= p.hi);
        }
        let mut cdf_before = alloc::vec![0.0; nb];
        let mut cdf_at = alloc::vec![0.0; nb];
        let mut running = KahanSum::new();
        let mut ai = 0;
        for i in 0..nb {
            cdf_before[i] = running.value();
            while ai < atoms.len() && atoms[ai].x == breaks[i] {
                running.add(atoms[ai].mass);
                ai += 1;
            }
            cdf_at[i] = running.value();
            if i + 1 < nb {
                if let Some(p) = segment_piece[i] {
                    running.add(pieces[p].density.integral(breaks[i], breaks[i + 1]));
                }
            }
        }
        Self {
            support,
            atoms,
            pieces,
            breaks,
            cdf_before,
            cdf_at,
            segment_piece,
        }
    }

    // ---- built-in families ----

    /// Lebesgue measure on `[0, 1]`.
    pub fn uniform() -> Self {
        Self::uniform_on(0.0, 1.0).expect("unit interval is valid")
    }

    /// Normalized Lebesgue measure on `[a, b]`.
    pub fn uniform_on(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(param(format!("uniform needs a < b, got [{a}, {b}]")));
        }
        Self::new(
            (a, b),
            Vec::new(),
            alloc::vec![Piece::new(a, b, Density::constant(1.0 / (b - a)))],
        )
    }

    /// Uniform distribution on `[-1, -1/2] ∪ [1/2, 1]`.
    pub fn two_interval_sigma0() -> Self {
        Self::new(
            (-1.0, 1.0),
            Vec::new(),
            alloc::vec![
                Piece::new(-1.0, -0.5, Density::constant(1.0)),
                Piece::new(0.5, 1.0, Density::constant(1.0)),
            ],
        )
        .expect("sigma_0 is valid")
    }

    /// Exponential distribution truncated to `[0, 2k]` and rescaled to `[0, 1]`:
    /// density `2k c_k e^{-2kx}` with `c_k = 1/(1 - e^{-2k})`.
    pub fn truncated_exponential(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(param("truncated exponential needs k >= 1"));
        }
        let two_k = 2.0 * f64::from(k);
        let c_k = 1.0 / -expm1(-two_k);
        Self::new(
            (0.0, 1.0),
            Vec::new(),
            alloc::vec![Piece::new(
                0.0,
                1.0,
                Density::Exponential {
                    scale: two_k * c_k,
                    rate: -two_k,
                    anchor: 0.0,
                },
            )],
        )
    }

    /// `weight·δ_atom + (1 - weight)·uniform[0, 1]`.
    pub fn mixture(atom: f64, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(param(format!("mixture weight {weight} must lie in (0, 1]")));
        }
        let pieces = if weight < 1.0 {
            alloc::vec![Piece::new(0.0, 1.0, Density::constant(1.0 - weight))]
        } else {
            Vec::new()
        };
        Self::new(
            (0.0, 1.0),
            alloc::vec![Atom {
                x: atom,
                mass: weight
            }],
            pieces,
        )
    }

    /// Equal-mass atoms at the given sorted locations.
    pub fn equal_atoms(locations: &[f64]) -> Result<Self> {
        if locations.is_empty() {
            return Err(param("need at least one atom"));
        }
        let mass = 1.0 / locations.len() as f64;
        let lo = locations[0];
        let hi = *locations.last().unwrap();
        let support = if lo < hi {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        };
        Self::new(
            support,
            locations.iter().map(|&x| Atom { x, mass }).collect(),
            Vec::new(),
        )
    }

    /// `sin^q(θ)` on `[lo, hi] ⊆ [0, π]` (or any interval when `q` is even), normalized.
    pub fn sine_power(q: u32, lo: f64, hi: f64) -> Result<Self> {
        let raw = Density::SinePower {
            scale: 1.0,
            power: q,
            freq: 1.0,
            phase: 0.0,
        };
        let mass = raw.integral(lo, hi);
        if !(mass > 0.0) {
            return Err(param(format!("sin^{q} has no mass on [{lo}, {hi}]")));
        }
        let density = if q == 0 {
            Density::constant(1.0 / mass)
        } else {
            raw.scaled(1.0 / mass)
        };
        Self::new(
            (lo, hi),
            Vec::new(),
            alloc::vec![Piece::new(lo, hi, density)],
        )
    }

    // ---- accessors ----

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_purely_atomic(&self) -> bool {
        self.pieces.iter().all(|p| p.mass() == 0.0)
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.iter().fold(0.0, |m, a| m.max(a.mass))
    }

    /// Essential supremum of the density, if the measure has no atoms.
    pub fn density_sup(&self) -> Option<f64> {
        if !self.atoms.is_empty() {
            return None;
        }
        Some(
            self.pieces
                .iter()
                .map(|p| p.density.max_on(p.lo, p.hi))
                .fold(0.0, f64::max),
        )
    }

    /// Points where the CDF is not smooth (atoms and piece endpoints), sorted.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    /// Byte string that identifies the measure, for content hashing.
    pub fn fingerprint(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.support.0.to_le_bytes());
        out.extend_from_slice(&self.support.1.to_le_bytes());
        out.extend_from_slice(&(self.atoms.len() as u64).to_le_bytes());
        for a in &self.atoms {
            out.extend_from_slice(&a.x.to_le_bytes());
            out.extend_from_slice(&a.mass.to_le_bytes());
        }
        out.extend_from_slice(&(self.pieces.len() as u64).to_le_bytes());
        for p in &self.pieces {
            out.extend_from_slice(&p.lo.to_le_bytes());
            out.extend_from_slice(&p.hi.to_le_bytes());
            p.density.fingerprint(&mut out);
        }
        out
    }

    fn total(&self) -> f64 {
        *self.cdf_at.last().unwrap_or(&1.0)
    }

    fn segment_integral(&self, seg: usize, u: f64, v: f64) -> f64 {
        match self.segment_piece.get(seg).copied().flatten() {
            Some(p) => self.pieces[p].density.integral(u, v),
            None => 0.0,
        }
    }

    // ---- distribution functions ----

    /// `σ([a, x])` for `x >= a`, zero to the left of the support.
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b <= x);
        if idx == 0 {
            return 0.0;
        }
        let i = idx - 1;
        if self.breaks[i] == x || i + 1 == self.breaks.len() {
            return self.cdf_at[i].min(1.0);
        }
        let partial = self.segment_integral(i, self.breaks[i], x);
        (self.cdf_at[i] + partial)
            .min(self.cdf_before[i + 1])
            .min(1.0)
    }

    /// `σ((-∞, x))`: the mass strictly left of `x`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b < x);
        if idx == 0 {
            return 0.0;
        }
        let i = idx - 1;
        if i + 1 == self.breaks.len() {
            return self.cdf_at[i];
        }
        let partial = self.segment_integral(i, self.breaks[i], x);
        (self.cdf_at[i] + partial).min(self.cdf_before[i + 1])
    }

    /// `min { y : cdf(y) >= p }` for `0 < p <= 1`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.min(self.total());
        let idx = self.cdf_at.partition_point(|&c| c < p);
        let idx = idx.min(self.breaks.len() - 1);
        if self.cdf_before[idx] < p || idx == 0 {
            return self.breaks[idx];
        }
        let seg = idx - 1;
        let (lo, hi) = (self.breaks[seg], self.breaks[idx]);
        let target = p - self.cdf_at[seg];
        let mut y = self.solve_in_segment(seg, lo, hi, target);
        // snap to the exact minimizer at floating-point resolution
        for _ in 0..64 {
            if self.cdf(y) >= p || y >= hi {
                break;
            }
            y = y.next_up();
        }
        for _ in 0..64 {
            let prev = y.next_down();
            if prev <= lo || self.cdf(prev) < p {
                break;
            }
            y = prev;
        }
        y.min(hi)
    }

    /// Solves `∫_lo^y f = target` inside one segment by safeguarded Newton.
    fn solve_in_segment(&self, seg: usize, lo: f64, hi: f64, target: f64) -> f64 {
        let piece = match self.segment_piece[seg] {
            Some(p) => &self.pieces[p],
            None => return hi,
        };
        let seg_mass = piece.density.integral(lo, hi);
        if target >= seg_mass {
            return hi;
        }
        let (mut a, mut b) = (lo, hi);
        let mut y = lo + (hi - lo) * (target / seg_mass);
        for _ in 0..200 {
            let g = piece.density.integral(lo, y) - target;
            if g == 0.0 {
                return y;
            }
            if g < 0.0 {
                a = y;
            } else {
                b = y;
            }
            let f = piece.density.value(y);
            let mut next = if f > 0.0 { y - g / f } else { f64::NAN };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(1e-300)
                || b - a <= f64::EPSILON * b.abs()
            {
                return next;
            }
            y = next;
        }
        y
    }

    /// Raw moment `∫ x^j dσ`; exactly 1 for `j = 0`.
    pub fn moment(&self, j: u32) -> f64 {
        if j == 0 {
            return 1.0;
        }
        let mut acc = KahanSum::new();
        for a in &self.atoms {
            acc.add(a.mass * ipow(a.x, j));
        }
        for p in &self.pieces {
            acc.add(p.density.moment(j, p.lo, p.hi));
        }
        acc.value()
    }

    /// Moments of orders `1..=k`.
    pub fn moments(&self, k: u32) -> Vec<f64> {
        (1..=k).map(|j| self.moment(j)).collect()
    }

    /// `∫ f dσ` for a smooth `f`, using Gauss–Legendre on each piece (`points` nodes
    /// per panel, `panels` panels) and exact atom evaluation.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, points: usize, panels: usize) -> f64 {
        let rule = LegendreRule::new(points);
        let mut acc = KahanSum::new();
        for a in &self.atoms {
            acc.add(a.mass * f(a.x));
        }
        for p in &self.pieces {
            acc.add(rule.integrate(p.lo, p.hi, panels, |x| f(x) * p.density.value(x)));
        }
        acc.value()
    }

    /// `R_σ(δ)`: the minimal length of a closed interval carrying mass at least `δ`.
    pub fn inverse_modulus(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(param(format!(
                "inverse modulus needs 0 < delta < 1, got {delta}"
            )));
        }
        if self.atoms.iter().any(|a| a.mass >= delta) {
            return Ok(0.0);
        }
        let total = self.total();
        let feasible = |x: f64| self.cdf_left(x) + delta <= total + 1e-15;
        let gap = |x: f64| self.quantile(self.cdf_left(x) + delta) - x;

        let x_max = self.quantile((total - delta).max(f64::MIN_POSITIVE));
        let mut cands: Vec<f64> = Vec::new();
        for (i, &b) in self.breaks.iter().enumerate() {
            cands.push(b);
            for t in [self.cdf_at[i] - delta, self.cdf_before[i] - delta] {
                if t > 0.0 {
                    cands.push(self.quantile(t));
                }
            }
        }
        cands.push(x_max);
        cands.retain(|&x| x <= x_max && feasible(x));
        cands.sort_by(f64::total_cmp);
        cands.dedup();

        let mut best = f64::INFINITY;
        for &x in &cands {
            best = best.min(gap(x));
        }
        // smooth interior of each candidate cell: sample, then golden-section refine
        const SAMPLES: usize = 16;
        for w in cands.windows(2) {
            let (l, r) = (w[0], w[1]);
            if r - l <= 1e-15 {
                continue;
            }
            let h = (r - l) / (SAMPLES as f64 + 1.0);
            let mut best_i = 0;
            let mut best_v = f64::INFINITY;
            for s in 1..=SAMPLES {
                let v = gap(l + h * s as f64);
                if v < best_v {
                    best_v = v;
                    best_i = s;
                }
            }
            best = best.min(best_v);
            let (mut a, mut b) = (l + h * (best_i as f64 - 1.0), l + h * (best_i as f64 + 1.0));
            let phi = 0.5 * (math::sqrt(5.0) - 1.0);
            let mut c = b - phi * (b - a);
            let mut d = a + phi * (b - a);
            let (mut fc, mut fd) = (gap(c), gap(d));
            while b - a > 1e-13 {
                if fc <= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - phi * (b - a);
                    fc = gap(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + phi * (b - a);
                    fd = gap(d);
                }
            }
            best = best.min(fc).min(fd);
        }
        Ok(best.max(0.0))
    }

    /// Caps every atom heavier than `eps` at mass `eps` and renormalizes.
    pub fn truncate_atoms(&self, eps: f64) -> Result<TruncationResult> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(param(format!("truncation needs 0 < eps < 1, got {eps}")));
        }
        let removed: f64 = self
            .atoms
            .iter()
            .filter(|a| a.mass > eps)
            .map(|a| a.mass - eps)
            .sum();
        let truncated_mass = 1.0 - removed;
        let scale = 1.0 / truncated_mass;
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                x: a.x,
                mass: a.mass.min(eps) * scale,
            })
            .collect();
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece::new(p.lo, p.hi, p.density.scaled(scale)))
            .collect();
        let normalized = Self::new(self.support, atoms, pieces)?;
        Ok(TruncationResult {
            truncated_mass,
            normalized,
        })
    }

    /// The measure with atom masses reduced by `removal[i]` at `self.atoms()[i]`,
    /// renormalized. Used by the large-atom decomposition.
    pub(crate) fn with_atoms_reduced(&self, removal: &[f64]) -> Result<(f64, Self)> {
        let removed: f64 = removal.iter().sum();
        let q = 1.0 - removed;
        let scale = 1.0 / q;
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (a, r) in self.atoms.iter().zip(removal) {
            let mass = a.mass - r;
            if mass > 0.0 {
                atoms.push(Atom {
                    x: a.x,
                    mass: mass * scale,
                });
            }
        }
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece::new(p.lo, p.hi, p.density.scaled(scale)))
            .collect();
        Ok((q, Self::new(self.support, atoms, pieces)?))
    }

    /// Pushforward under `x ↦ s x + t`, `s != 0`.
    pub fn affine_map(&self, s: f64, t: f64) -> Result<Self> {
        if !(s != 0.0 && s.is_finite() && t.is_finite()) {
            return Err(param(format!(
                "affine map needs finite nonzero scale, got {s}"
            )));
        }
        let f = |x: f64| s * x + t;
        let (a, b) = (f(self.support.0), f(self.support.1));
        let support = ordered(a, b);
        let mut atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|at| Atom {
                x: f(at.x),
                mass: at.mass,
            })
            .collect();
        let mut pieces: Vec<Piece> = self
            .pieces
            .iter()
            .map(|p| {
                let (lo, hi) = ordered(f(p.lo), f(p.hi));
                Piece::new(lo, hi, p.density.pushforward(s, t))
            })
            .collect();
        if s < 0.0 {
            atoms.reverse();
            pieces.reverse();
        }
        // clamp rounding at the support edges
        for at in &mut atoms {
            at.x = at.x.clamp(support.0, support.1);
        }
        for p in &mut pieces {
            p.lo = p.lo.max(support.0);
            p.hi = p.hi.min(support.1);
        }
        Self::new(support, atoms, pieces)
    }

    /// Pushforward under the increasing affine map of the support onto `[lo, hi]`.
    pub fn affine_rescale(&self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(param(format!("target interval [{lo}, {hi}] is degenerate")));
        }
        let (a, b) = self.support;
        let s = (hi - lo) / (b - a);
        let t = lo - s * a;
        let mut m = self.affine_map(s, t)?;
        m.support = (lo, hi);
        Ok(m)
    }

    /// Reflection through the origin.
    pub fn reflect(&self) -> Result<Self> {
        self.affine_map(-1.0, 0.0)
    }

    /// Translation by `shift`.
    pub fn translate(&self, shift: f64) -> Result<Self> {
        self.affine_map(1.0, shift)
    }
}

/// Declarative description of a measure: either a named built-in family or
/// explicit atoms and polynomial pieces.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasureSpec {
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub support: Option<[f64; 2]>,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Vec::is_empty")
    )]
    pub atoms: Vec<Atom>,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Vec::is_empty")
    )]
    pub pieces: Vec<PieceSpec>,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub builtin: Option<String>,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "BTreeMap::is_empty")
    )]
    pub params: BTreeMap<String, f64>,
}

/// A polynomial piece: coefficients of `1, x, x^2, x^3` on `interval`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PieceSpec {
    pub interval: [f64; 2],
    pub coeffs: Vec<f64>,
}

/// Names accepted in [`MeasureSpec::builtin`].
pub const BUILTINS: [&str; 4] = [
    "uniform",
    "two_interval_sigma0",
    "truncated_exponential_sigma_k",
    "mixture",
];

impl MeasureSpec {
    pub fn builtin(name: &str) -> Self {
        Self {
            builtin: Some(name.into()),
            ..Self::default()
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.into(), value);
        self
    }

    fn param_or(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    /// Validates the description and builds the measure.
    pub fn build(&self) -> Result<Measure1D> {
        let explicit = !self.atoms.is_empty() || !self.pieces.is_empty();
        match (&self.builtin, explicit) {
            (Some(_), true) => Err(invalid(
                "builtin-xor-explicit",
                "give either a builtin name or explicit atoms/pieces, not both",
            )),
            (None, false) => Err(invalid(
                "builtin-xor-explicit",
                "measure spec has neither a builtin name nor atoms/pieces",
            )),
            (Some(name), false) => match name.as_str() {
                "uniform" => {
                    Measure1D::uniform_on(self.param_or("a", 0.0), self.param_or("b", 1.0))
                }
                "two_interval_sigma0" => Ok(Measure1D::two_interval_sigma0()),
                "truncated_exponential_sigma_k" => {
                    let k = self.params.get("k").copied().ok_or_else(|| {
                        invalid(
                            "builtin-params",
                            "truncated_exponential_sigma_k needs params.k",
                        )
                    })?;
                    if !(k >= 1.0 && libm::trunc(k) == k && k <= 1e6) {
                        return Err(invalid(
                            "builtin-params",
                            format!("k = {k} must be a positive integer"),
                        ));
                    }
                    Measure1D::truncated_exponential(k as u32)
                }
                "mixture" => {
                    Measure1D::mixture(self.param_or("atom", 0.0), self.param_or("weight", 0.5))
                }
                other => Err(invalid(
                    "builtin-name",
                    format!("unknown builtin '{other}', expected one of {BUILTINS:?}"),
                )),
            },
            (None, true) => {
                let [a, b] = self.support.ok_or_else(|| {
                    invalid("support", "explicit measure needs a support interval")
                })?;
                let mut pieces = Vec::with_capacity(self.pieces.len());
                for (i, p) in self.pieces.iter().enumerate() {
                    if p.coeffs.is_empty() || p.coeffs.len() > 4 {
                        return Err(invalid(
                            "piece-degree",
                            format!(
                                "piece {i} has {} coefficients, expected 1..=4",
                                p.coeffs.len()
                            ),
                        ));
                    }
                    let mut c = [0.0; 4];
                    c[..p.coeffs.len()].copy_from_slice(&p.coeffs);
                    pieces.push(Piece::new(
                        p.interval[0],
                        p.interval[1],
                        Density::Polynomial(c),
                    ));
                }
                Measure1D::new((a, b), self.atoms.clone(), pieces)
            }
        }
    }
}
