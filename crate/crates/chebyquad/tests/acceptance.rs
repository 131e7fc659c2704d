//! Acceptance run: one PASS/FAIL line per criterion with its pinned tolerances,
//! runtime and budget. A criterion over budget fails. Exits nonzero on any failure.

use std::time::{Duration, Instant};

use chebyquad::checks::{verify_cylinder, verify_sphere, CheckOptions};
use chebyquad::parallel;
use chebyquad_core::bounds::{
    exponential_family_bound, gaussian_weight_check, lower_bound_bernstein, lower_bound_moments,
    upper_bound,
};
use chebyquad_core::config::Constants;
use chebyquad_core::cylinder::{cylinder_cubature, CylinderSpec};
use chebyquad_core::math::E;
use chebyquad_core::measure::{Measure1D, MeasureSpec};
use chebyquad_core::momentmap::{tk, u_matrix, vandermonde, vandermonde_inverse_norm};
use chebyquad_core::orthopoly::gauss_rule_for_measure;
use chebyquad_core::quadrature::{
    construct_for_measure, construct_quadrature, construct_quadrature_large_atoms, large_atom_plan,
    moment_flow, moment_residual, perturb_to_moments, simple_approximation, FlowOptions, Mode,
};
use chebyquad_core::random::{moment_statistics, small_ball_probability, sup_deviations};
use chebyquad_core::verify::newton_oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: chebyquad_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn builtins() -> Vec<(&'static str, Measure1D)> {
    vec![
        ("uniform", Measure1D::uniform()),
        ("sigma0", Measure1D::two_interval_sigma0()),
        ("sigma_3", Measure1D::truncated_exponential(3).unwrap()),
        ("sigma_15", Measure1D::truncated_exponential(15).unwrap()),
        ("mixture", MeasureSpec::builtin("mixture").build().unwrap()),
    ]
}

fn simple_approximation_gap() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for (name, m) in builtins() {
        for n in [2usize, 7, 100, 10_000] {
            let y = simple_approximation(&m, n);
            for j in 1..=10u32 {
                let e = y.iter().map(|v| v.powi(j as i32)).sum::<f64>() / n as f64;
                let gap = (e - m.moment(j)).abs();
                ensure(gap <= 1.0 / n as f64, || {
                    format!("{name}, n = {n}, j = {j}: gap {gap:e}")
                })?;
                worst = worst.max(gap * n as f64);
            }
        }
    }
    Ok(format!(
        "5 measures x n in {{2,7,100,1e4}} x j <= 10; max n*gap = {worst:.6} (bound 1)"
    ))
}

fn gautschi_formula() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let k = 1 + case % 6;
        let mut x = 0.0;
        let w: Vec<f64> = (0..k)
            .map(|i| {
                if i > 0 {
                    x += rng.random_range(0.05..0.3);
                }
                x
            })
            .collect();
        let closed = lib(vandermonde_inverse_norm(&w))?;
        let direct = lib(vandermonde(&w).inverse())?.norm_inf();
        let rel = ((closed - direct) / direct).abs();
        ensure(rel <= 1e-8, || format!("case {case}: relative gap {rel:e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!(
        "200 node sets, k <= 6, gap >= 0.05: max relative gap {worst:.2e} (tol 1e-8)"
    ))
}

fn admissible(rng: &mut ChaCha8Rng, k: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let km1 = (k - 1) as f64;
    let rho: f64 = rng.random_range(0.1..0.5);
    let edge = rho / (3.0 * km1);
    let gap = rho / km1;
    let slack = 1.0 - 2.0 * edge - gap * km1;
    let mut cuts: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * slack).collect();
    cuts.sort_by(f64::total_cmp);
    let z: Vec<f64> = (0..k).map(|i| edge + gap * i as f64 + cuts[i]).collect();
    let radius = rho / 3.0 * (rho / (12.0 * E)).powi(k as i32 - 1);
    let p = tk(&z)
        .iter()
        .map(|v| v + radius * rng.random_range(-1.0..=1.0))
        .collect();
    (z, p, rho)
}

fn raw_residual(w: &[f64], p: &[f64]) -> f64 {
    tk(w)
        .iter()
        .zip(p)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

fn perturbation_flow() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let (mut res_max, mut newton_max, mut closed_max): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for case in 0..50 {
        let k = 2 + case % 5;
        let (z, p, rho) = admissible(&mut rng, k);
        let w = lib(perturb_to_moments(&z, &p, rho))?;
        let res = raw_residual(&w, &p);
        ensure(res <= 1e-12, || format!("case {case}: residual {res:e}"))?;
        let dist = w
            .iter()
            .zip(&z)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        ensure(dist <= rho / (3.0 * (k - 1) as f64), || {
            format!("case {case}: moved {dist}")
        })?;
        let mut sorted = w.clone();
        sorted.sort_by(f64::total_cmp);
        let newton = lib(newton_oracle(&z, &p))?;
        let gap = sorted
            .iter()
            .zip(&newton)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        ensure(gap <= 1e-9, || format!("case {case}: Newton gap {gap:e}"))?;
        if k == 2 {
            let disc = (2.0 * p[1] - p[0] * p[0]).sqrt();
            let roots = [(p[0] - disc) / 2.0, (p[0] + disc) / 2.0];
            let g = (sorted[0] - roots[0])
                .abs()
                .max((sorted[1] - roots[1]).abs());
            ensure(g <= 1e-12, || format!("case {case}: quadratic gap {g:e}"))?;
            closed_max = closed_max.max(g);
        }
        res_max = res_max.max(res);
        newton_max = newton_max.max(gap);
    }

    // decay checkpoints on evenly spread nodes (see decay_instance in the core tests)
    let mut decay_max: f64 = 0.0;
    for k in 2..=6usize {
        let z: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect();
        let cond = lib(u_matrix(&z).inverse())?.norm_inf();
        let size = (1e-2 / (cond * cond)).min(1e-5);
        let p: Vec<f64> = tk(&z)
            .iter()
            .map(|v| v + size * rng.random_range(-1.0..=1.0))
            .collect();
        let mut opts = FlowOptions::new(k);
        opts.record = true;
        let trace = lib(moment_flow(&z, &p, &opts))?;
        let r0 = trace.history[0].1;
        for &(t, r) in &trace.history {
            if t <= 1.0 + 1e-12 {
                let rel = (r / r0 - (-t).exp()).abs() / (-t).exp();
                ensure(rel <= 1e-6, || {
                    format!("k = {k}, t = {t}: decay deviation {rel:e}")
                })?;
                decay_max = decay_max.max(rel);
            }
        }
    }
    Ok(format!(
        "50 instances: residual {res_max:.1e} (tol 1e-12), Newton gap {newton_max:.1e} (1e-9), \
         quadratic gap {closed_max:.1e} (1e-12); e^-t deviation {decay_max:.1e} (1e-6)"
    ))
}

fn end_to_end() -> Result<String, String> {
    let u = Measure1D::uniform();
    let rep = lib(upper_bound(&u, 2, None))?;
    let r = rep.rho / 30.0 * (rep.rho / (12.0 * E));
    ensure(
        (rep.rho - 0.2).abs() <= 1e-12 && (rep.r - r).abs() <= 1e-18,
        || format!("rho {} r {} vs formula {r}", rep.rho, rep.r),
    )?;
    let n = (1.0 / r).ceil() as usize;
    ensure(rep.n_guaranteed == n as f64, || {
        format!("n {} vs {n}", rep.n_guaranteed)
    })?;
    let check = |nodes: &[f64], p: &[f64], what: &str| -> Result<f64, String> {
        ensure(nodes.iter().all(|x| (0.0..=1.0).contains(x)), || {
            format!("{what}: node outside [0, 1]")
        })?;
        let res = moment_residual(nodes, p);
        ensure(res <= 1e-9, || format!("{what}: residual {res:e}"))?;
        Ok(res)
    };
    let res = lib(construct_for_measure(&u, 2, n, Mode::Guaranteed))?;
    let mut worst = check(&res.nodes, &u.moments(2), "k = 2")?;
    for signs in [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
        let p: Vec<f64> = u
            .moments(2)
            .iter()
            .zip(signs)
            .map(|(m, s)| m + s * rep.r)
            .collect();
        let res = lib(construct_quadrature(&u, 2, n, &p, Mode::Guaranteed))?;
        worst = worst.max(check(&res.nodes, &p, &format!("k = 2, signs {signs:?}"))?);
    }
    let n3 = lib(upper_bound(&u, 3, None))?.n_guaranteed as usize;
    let res = lib(construct_for_measure(&u, 3, n3, Mode::Guaranteed))?;
    let r3 = check(&res.nodes, &u.moments(3), "k = 3")?;
    Ok(format!(
        "k = 2: n = {n}, residual {worst:.1e} incl. 4 perturbed targets; k = 3: n = {n3}, residual {r3:.1e} (tol 1e-9)"
    ))
}

fn heavy_atom() -> Result<String, String> {
    let m = lib(Measure1D::mixture(0.3, 0.5))?;
    let plan = lib(large_atom_plan(&m, 2, 0.1))?;
    let ratio = 0.1 / plan.truncated_mass;
    ensure(ratio < 2.0 / 11.0, || {
        format!("eps condition {ratio} >= 2/11")
    })?;
    let n = plan.n_required as usize;
    let res = lib(construct_quadrature_large_atoms(
        &m,
        2,
        0.1,
        n,
        Mode::Guaranteed,
    ))?;
    let resid = moment_residual(&res.nodes, &m.moments(2));
    ensure(resid <= 1e-9, || format!("residual {resid:e}"))?;
    let qn = res.diagnostics.q.unwrap_or(f64::NAN) * n as f64;
    ensure(qn == qn.round(), || format!("q n = {qn} not integral"))?;
    ensure(res.nodes.len() == n, || {
        format!("{} nodes, expected {n}", res.nodes.len())
    })?;
    Ok(format!(
        "eps/mass = {ratio:.4} < 2/11; n = {n}, residual {resid:.1e} (tol 1e-9), q n = {qn}"
    ))
}

fn lower_bounds() -> Result<String, String> {
    let u = Measure1D::uniform();
    let m3 = lib(lower_bound_moments(&u, 3))?;
    ensure(m3 == 27.0 / 16.0, || format!("moment bound {m3} != 27/16"))?;
    let b2 = lib(lower_bound_bernstein(&u, 2))?;
    let b3 = lib(lower_bound_bernstein(&u, 3))?;
    ensure(
        (b2 - 2.0).abs() <= 1e-10 && (b3 - 3.6).abs() <= 1e-10,
        || format!("Bernstein {b2}, {b3}"),
    )?;
    let s15 = lib(lower_bound_moments(
        &lib(Measure1D::truncated_exponential(15))?,
        15,
    ))?;
    let asym = exponential_family_bound(15);
    ensure(s15 >= asym, || format!("sigma_15 bound {s15} < {asym}"))?;
    Ok(format!(
        "27/16 exact; Bernstein 2, 3.6 (tol 1e-10); sigma_15: {s15:.4} >= (e/2)^15/(2 sqrt 15) = {asym:.4} \
         (asymptotic form, recorded)"
    ))
}

fn sandwich() -> Result<String, String> {
    let u = Measure1D::uniform();
    let mut parts = Vec::new();
    for k in [3u32, 5] {
        let lower = lib(lower_bound_moments(&u, k))?;
        let bern = lib(lower_bound_bernstein(&u, (k as usize).div_ceil(2)))?;
        let upper = lib(upper_bound(&u, k, None))?.n_guaranteed;
        let mut n = bern.ceil() as usize;
        let achieved = loop {
            if let Ok(res) = construct_for_measure(&u, k as usize, n, Mode::BestEffort) {
                if res.residual <= 1e-9 {
                    break n;
                }
            }
            n += 1;
            ensure(n < 2000, || {
                format!("k = {k}: no best-effort rule below 2000 nodes")
            })?;
        };
        let chain = lower <= bern && bern <= achieved as f64 && (achieved as f64) <= upper;
        ensure(chain, || {
            format!("k = {k}: {lower} <= {bern} <= {achieved} <= {upper} fails")
        })?;
        parts.push(format!(
            "k = {k}: {lower:.4} <= {bern:.4} <= {achieved} <= {upper:.3e}"
        ));
    }
    Ok(parts.join("; "))
}

fn weight_inequality() -> Result<String, String> {
    let u = Measure1D::uniform();
    let mut min_ratio = f64::INFINITY;
    for mth in 1..=5usize {
        let c = lib(gaussian_weight_check(&u, mth))?;
        let k = (2 * mth - 1) as f64;
        let rhs = 1.0 / (75.0 * E.powi(4) * k * (12.0 * E).powi(2 * mth as i32 - 2)).ceil();
        ensure((c.rhs - rhs).abs() <= 1e-12 * rhs, || {
            format!("m = {mth}: rhs {} vs {rhs}", c.rhs)
        })?;
        let smallest = c.lambda_first.min(c.lambda_last);
        ensure(smallest >= rhs && c.holds, || {
            format!("m = {mth}: {smallest} < {rhs}")
        })?;
        min_ratio = min_ratio.min(smallest / rhs);
    }
    Ok(format!(
        "m = 1..5, M = 1: min end weight / rhs = {min_ratio:.3e} (>= 1)"
    ))
}

fn gauss_engine() -> Result<String, String> {
    let mut exact_max: f64 = 0.0;
    let mut fail_min = f64::INFINITY;
    for (name, m) in [
        ("uniform", Measure1D::uniform()),
        ("sigma0", Measure1D::two_interval_sigma0()),
    ] {
        for order in 1..=6usize {
            let g = lib(gauss_rule_for_measure(&m, order))?;
            for j in 0..2 * order as u32 {
                let gap = (g.moment(j) - m.moment(j)).abs();
                ensure(gap <= 1e-10, || {
                    format!("{name}, m = {order}, j = {j}: {gap:e}")
                })?;
                exact_max = exact_max.max(gap);
            }
            let gap = (g.moment(2 * order as u32) - m.moment(2 * order as u32)).abs();
            ensure(gap > 1e-8, || {
                format!("{name}, m = {order}: exact at 2m ({gap:e})")
            })?;
            fail_min = fail_min.min(gap);
        }
    }
    Ok(format!(
        "uniform, sigma0, m <= 6: max gap j < 2m {exact_max:.1e} (tol 1e-10), min gap j = 2m {fail_min:.1e} (> 1e-8)"
    ))
}

fn sphere_cubature() -> Result<String, String> {
    let pool = parallel::pool(None).map_err(|e| e.to_string())?;
    let c = lib(parallel::sphere_cubature(&pool, 2, 2, 0.5, 0.1, None))?;
    let v = lib(verify_sphere(
        &pool,
        &c,
        &Constants::default(),
        CheckOptions::default(),
    ))?;
    let mass_err = (v.total_mass - v.sphere_area).abs();
    ensure(mass_err <= 1e-10, || {
        format!("mass off 4 pi by {mass_err:e}")
    })?;
    ensure(v.report.max_reference_gap <= 1e-10, || {
        format!("closed form vs reference {:e}", v.report.max_reference_gap)
    })?;
    ensure(v.passed(), || v.failures.join("; "))?;
    Ok(format!(
        "{} boxes, n = {}; mass error {mass_err:.1e} (1e-10); max error {:.1e} monomials |a| <= 2, \
         {:.1e} on 20 shifted (delta 0.1); reference tol 1e-10",
        c.box_count(),
        c.n,
        v.report.max_monomial_error,
        v.report.max_shifted_error
    ))
}

fn cylinder_spec(w: f64) -> CylinderSpec {
    CylinderSpec {
        d: 3,
        k: 1,
        l: 10.0 * w,
        w,
        tau: 0.5 * w,
        delta: 0.1 * w,
    }
}

fn cylinder_cubature_check() -> Result<String, String> {
    let consts = Constants::default();
    let min = consts
        .cylinder(3)
        .ok_or("no constants for d = 3")?
        .min_length;
    let pool = parallel::pool(None).map_err(|e| e.to_string())?;
    let c = lib(parallel::cylinder_cubature(
        &pool,
        &cylinder_spec(1.0),
        min,
        None,
    ))?;
    let v = lib(verify_cylinder(&pool, &c, &consts, CheckOptions::default()))?;
    ensure(v.passed(), || v.failures.join("; "))?;

    let two = lib(cylinder_cubature(&cylinder_spec(2.0), 2.0 * min, None))?;
    ensure(two.cell_count() == c.cell_count() && two.n == c.n, || {
        "W = 2 changes the cells".into()
    })?;
    for i in 0..c.cell_count() {
        ensure(two.cell_mass(i) == 4.0 * c.cell_mass(i), || {
            format!("cell {i}: mass not scaled by W^2")
        })?;
        let exact = c
            .cell_points(i)
            .iter()
            .zip(&two.cell_points(i))
            .all(|(p, q)| p.iter().zip(q).all(|(x, y)| 2.0 * x == *y));
        ensure(exact, || format!("cell {i}: points not scaled by W"))?;
    }
    Ok(format!(
        "{} cells (<= {:.0}); mass 0.25 within {:.1e} (1e-10); coverage 1000/1000; max error {:.1e} (delta 0.1); \
         W = 2 rescaling exact",
        v.cell_count,
        v.count_limit,
        v.max_cell_mass_error,
        v.report.max_monomial_error.max(v.report.max_shifted_error)
    ))
}

fn random_cubature() -> Result<String, String> {
    let est = small_ball_probability(1, 1, 1, 0.3, 100_000, 2024);
    ensure(est.ci_low <= 0.3 && 0.3 <= est.ci_high, || {
        format!("{est:?}")
    })?;
    let stats = moment_statistics(10, 3, 2, 10_000, 77);
    let zmax = stats
        .standard_scores()
        .iter()
        .fold(0.0f64, |m, z| m.max(*z));
    ensure(zmax <= 4.0, || {
        format!("mean deviation {zmax:.2} standard errors")
    })?;
    let a = moment_statistics(1000, 2, 1, 4000, 5);
    let b = moment_statistics(4000, 2, 1, 4000, 6);
    let mut worst: f64 = 0.0;
    for (sa, sb) in a.std_dev.iter().zip(&b.std_dev) {
        worst = worst.max((sa / sb / 2.0 - 1.0).abs());
    }
    ensure(worst <= 0.1, || {
        format!("sqrt(n) scaling off by {worst:.3}")
    })?;
    let again = small_ball_probability(1, 1, 1, 0.3, 100_000, 2024);
    ensure(again == est, || "rerun differs".into())?;
    let pool = parallel::pool(Some(3)).map_err(|e| e.to_string())?;
    let par = parallel::sup_deviations(&pool, 20, 2, 2, 500, 9);
    ensure(par == sup_deviations(20, 2, 2, 500, 9), || {
        "thread count changes results".into()
    })?;
    Ok(format!(
        "P = {:.4} in [{:.4}, {:.4}] at 1e5 reps; max |mean|/SE {zmax:.2} (<= 4); std ratio off 2 by {worst:.3} (<= 0.1); \
         reruns bit-identical",
        est.estimate, est.ci_low, est.ci_high
    ))
}

fn main() {
    let criteria: [(&str, Check, u64); 12] = [
        (
            "simple approximation gap <= 1/n",
            simple_approximation_gap,
            1,
        ),
        ("closed-form Vandermonde inverse norm", gautschi_formula, 1),
        ("moment perturbation flow", perturbation_flow, 5),
        ("guaranteed construction, uniform", end_to_end, 600),
        ("large-atom construction", heavy_atom, 60),
        ("lower bounds", lower_bounds, 1),
        ("bounds sandwich, uniform", sandwich, 120),
        ("Gaussian weight inequality", weight_inequality, 1),
        ("Gauss rule exactness", gauss_engine, 1),
        ("sphere cubature d = 2", sphere_cubature, 300),
        ("cylinder cubature d = 3", cylinder_cubature_check, 600),
        ("random cubature harness", random_cubature, 60),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let over = took > Duration::from_secs(*budget);
        let (tag, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("over budget; {d}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!(
            "[{tag}] {:>2} {name} ({:.2} s, budget {budget} s): {detail}",
            i + 1,
            took.as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
