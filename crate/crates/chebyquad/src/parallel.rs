//! Rayon drivers. Work items are independent and collected in index order,
//! so results (and the error reported, the first by index) do not depend on
//! the thread count.

use chebyquad_core::cylinder::{CylinderCubature, CylinderPlan, CylinderSpec};
use chebyquad_core::random::{euclidean_norm, normalized_deviation, sup_norm};
use chebyquad_core::sphere::{search_common_n, SphereCubature, SpherePlan};
use chebyquad_core::Result;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::CliError;

pub fn pool(threads: Option<usize>) -> Result<ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        b = b.num_threads(t);
    }
    b.build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))
}

/// `f(0), …, f(count − 1)` in parallel, in order; the first error by index wins.
pub fn ordered<T, F>(pool: &ThreadPool, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let all: Vec<Result<T>> = pool.install(|| (0..count).into_par_iter().map(&f).collect());
    all.into_iter().collect()
}

pub fn sphere_cubature(
    pool: &ThreadPool,
    d: u32,
    k: u32,
    tau: f64,
    delta: f64,
    n: Option<usize>,
) -> Result<SphereCubature> {
    let plan = SpherePlan::new(d, k, tau, delta)?;
    let build = |n: usize| ordered(pool, plan.factor_count(), |i| plan.build_factor(i, n));
    let (n, rules) = match n {
        Some(n) => (n, build(n)?),
        None => search_common_n(plan.initial_n(), build)?,
    };
    Ok(plan.assemble(n, rules))
}

pub fn cylinder_cubature(
    pool: &ThreadPool,
    spec: &CylinderSpec,
    min_length: f64,
    n: Option<usize>,
) -> Result<CylinderCubature> {
    spec.validate(min_length)?;
    let plan = CylinderPlan::new(spec)?;
    let build = |n: usize| ordered(pool, plan.factor_count(), |i| plan.build_factor(i, n));
    let (n, rules) = match n {
        Some(n) => (n, build(n)?),
        None => search_common_n(plan.initial_n(), build)?,
    };
    Ok(plan.assemble(n, rules))
}

/// `√n ‖M_k(σ_n) − M_k(σ)‖_∞` for repetitions `0..reps`.
pub fn sup_deviations(
    pool: &ThreadPool,
    n: usize,
    k: u32,
    d: u32,
    reps: u64,
    seed: u64,
) -> Vec<f64> {
    pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| sup_norm(&normalized_deviation(n, k, d, seed, r)))
            .collect()
    })
}

/// `|√n (M_k(σ_n) − M_k(σ))|` for repetitions `0..reps`.
pub fn euclidean_deviations(
    pool: &ThreadPool,
    n: usize,
    k: u32,
    d: u32,
    reps: u64,
    seed: u64,
) -> Vec<f64> {
    pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| euclidean_norm(&normalized_deviation(n, k, d, seed, r)))
            .collect()
    })
}
