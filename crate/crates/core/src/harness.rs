//! Cost comparison between the decomposed solver and monolithic brute force.
//!
//! Each cell draws a block-diagonalizable plant with `r` distinct eigenvalues
//! (one Jordan chain of length `nj` each), attacks `s` of its scalar sensors
//! and solves the same measurements both ways. The two states must agree
//! before any timing is reported.

use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decompose::{self, project_measurements, SubsystemBundle};
use crate::error::{Result, SsrError};
use crate::generate;
use crate::model::{MeasurementBundle, Tolerances};
use crate::observability::classify_eigenvalues;
use crate::search::SearchConfig;
use crate::simulate::{measure, random_attack};
use crate::solvers::{brute_force, brute_force_ssr, decomposition_ssr, SolveOptions};
use crate::Vector;

/// States from the two solvers must agree to this (relative) accuracy.
pub const AGREEMENT: f64 = 1e-6;

/// Default wall-clock limit per cell.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// One benchmark configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchCell {
    /// State dimension per eigenvalue.
    pub nj: usize,
    /// Number of distinct eigenvalues.
    pub r: usize,
    pub n_sensors: usize,
    pub s: usize,
    pub seed: u64,
}

impl BenchCell {
    pub fn n(&self) -> usize {
        self.nj * self.r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRecord {
    pub n: usize,
    #[serde(rename = "N")]
    pub n_sensors: usize,
    pub r: usize,
    pub nj: usize,
    pub s: usize,
    pub seed: u64,
    /// Eigenstructure, projectors, per-sensor splits and measurement projection.
    pub decompose_secs: f64,
    /// Classification plus voting and per-subsystem search.
    pub solve_secs: f64,
    pub monolithic_secs: f64,
    /// Subsets examined by the classified path (J2 vote, J3 search).
    pub decomposed_subsets: u64,
    /// Subsets examined when every block is brute-forced separately.
    pub blockwise_subsets: u64,
    pub monolithic_subsets: u64,
    /// Largest state discrepancy between the two solvers.
    pub agreement: f64,
    pub timed_out: bool,
}

impl BenchRecord {
    fn timed_out(cell: &BenchCell) -> Self {
        BenchRecord {
            n: cell.n(),
            n_sensors: cell.n_sensors,
            r: cell.r,
            nj: cell.nj,
            s: cell.s,
            seed: cell.seed,
            decompose_secs: 0.0,
            solve_secs: 0.0,
            monolithic_secs: 0.0,
            decomposed_subsets: 0,
            blockwise_subsets: 0,
            monolithic_subsets: 0,
            agreement: 0.0,
            timed_out: true,
        }
    }
}

/// Subsets examined when each block is solved by brute force on its own.
pub fn blockwise_search(
    bundle: &SubsystemBundle,
    meas: &MeasurementBundle,
    s: usize,
    opts: &SolveOptions,
) -> Result<(Vector, u64)> {
    let proj = project_measurements(bundle, meas)?;
    let mut parts = Vec::with_capacity(bundle.len());
    let mut examined = 0u64;
    for j in 0..bundle.len() {
        let maps = bundle.subsystem_maps(j);
        let ys: Vec<Vector> = proj.coords.iter().map(|c| c[j].clone()).collect();
        let res = brute_force(&maps, &ys, bundle.dim(j), s, proj.y_scale, opts)?;
        examined += res.examined;
        parts.push(Some(res.x));
    }
    let x = decompose::recompose_state(&parts, &bundle.direct_sum)?;
    Ok((x, examined))
}

/// Runs one cell to completion on the current thread.
pub fn run_cell(cell: &BenchCell, tol: &Tolerances, cfg: &SearchConfig) -> Result<BenchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cell.seed);
    let sys = generate::bench_system(cell.r, cell.nj, cell.n_sensors, &mut rng)?;
    let x0 = generate::random_state(sys.n(), &mut rng);
    let obs = sys.observability_matrices(tol);
    let attack = random_attack(&obs, cell.s, 10.0, cell.seed ^ 0x5eed)?;
    let meas = measure(&obs, &x0, &attack, 0.0, cell.seed)?;
    let opts = SolveOptions {
        tol: *tol,
        search: *cfg,
        ..Default::default()
    };

    let start = Instant::now();
    let bundle = decompose::decompose(&sys, tol, cfg)?;
    let proj = project_measurements(&bundle, &meas)?;
    let decompose_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let class = classify_eigenvalues(&bundle, cell.s, tol, cfg);
    let decomposed = decomposition_ssr(&bundle, &class, &proj, &opts)?;
    let solve_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mono = brute_force_ssr(&bundle, &meas, cell.s, &opts)?;
    let monolithic_secs = start.elapsed().as_secs_f64();

    let (blockwise_x, blockwise_subsets) = blockwise_search(&bundle, &meas, cell.s, &opts)?;

    let scale = 1.0 + mono.x.amax();
    let agreement = (&decomposed.x - &mono.x).amax().max((&blockwise_x - &mono.x).amax());
    if agreement > AGREEMENT * scale || decomposed.attack_set != mono.attack_set {
        return Err(SsrError::NumericalDegeneracy(format!(
            "cell n={} N={} r={} s={} seed={}: solvers disagree (state gap {agreement:.3e}, attack sets {:?} vs {:?})",
            cell.n(),
            cell.n_sensors,
            cell.r,
            cell.s,
            cell.seed,
            decomposed.attack_set,
            mono.attack_set
        )));
    }
    Ok(BenchRecord {
        n: cell.n(),
        n_sensors: cell.n_sensors,
        r: cell.r,
        nj: cell.nj,
        s: cell.s,
        seed: cell.seed,
        decompose_secs,
        solve_secs,
        monolithic_secs,
        decomposed_subsets: class.examined + decomposed.examined,
        blockwise_subsets,
        monolithic_subsets: mono.examined,
        agreement,
        timed_out: false,
    })
}

/// Runs a cell on a worker thread, marking it timed out after `timeout`.
///
/// A timed-out worker is left to finish in the background; its result is
/// discarded.
pub fn run_cell_with_timeout(
    cell: BenchCell,
    tol: Tolerances,
    cfg: SearchConfig,
    timeout: Duration,
) -> Result<BenchRecord> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(run_cell(&cell, &tol, &cfg));
    });
    match rx.recv_timeout(timeout) {
        Ok(res) => res,
        Err(_) => Ok(BenchRecord::timed_out(&cell)),
    }
}

/// Runs every cell in order. The first disagreement aborts the run.
pub fn run_grid(
    cells: &[BenchCell],
    tol: &Tolerances,
    cfg: &SearchConfig,
    timeout: Duration,
) -> Result<Vec<BenchRecord>> {
    cells
        .iter()
        .map(|&c| run_cell_with_timeout(c, *tol, *cfg, timeout))
        .collect()
}

/// Median wall time of the decomposition phase on a diagonalizable
/// `n`-dimensional plant with `n_sensors` full-rank sensors.
pub fn decomposition_time(n: usize, n_sensors: usize, seed: u64, reps: usize, cfg: &SearchConfig) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys = generate::scaling_system(n, n_sensors, &mut rng)?;
    let tol = Tolerances::default();
    let mut times = Vec::with_capacity(reps.max(1));
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let bundle = decompose::decompose(&sys, &tol, cfg)?;
        times.push(start.elapsed().as_secs_f64());
        debug_assert_eq!(bundle.len(), n);
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

/// Least-squares slope of `log t` against `log n`.
pub fn loglog_slope(points: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.max(f64::MIN_POSITIVE).ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
