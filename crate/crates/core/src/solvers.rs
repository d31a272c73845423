//! State reconstruction: per-sensor observers, majority voting, trimmed
//! means, brute-force minimal-attack search and the composite solver that
//! routes each eigenvalue block to the cheapest method that is guaranteed to
//! work for it.

use serde::Serialize;

use crate::decompose::{self, ProjectedMeasurements, SubsystemBundle};
use crate::error::{Result, SsrError};
use crate::linalg;
use crate::model::{MeasurementBundle, Tolerances};
use crate::observability::EigenClassification;
use crate::search::{self, SearchConfig};
use crate::{Mat, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Uniqueness {
    Unique,
    Ambiguous,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStatus {
    Voted,
    BruteForced,
    Unreconstructable,
}

/// A reconstructed state with the sensors blamed for the inconsistency.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SsrSolution {
    #[serde(serialize_with = "ser_vector")]
    pub x: Vector,
    /// Sorted sensor ids.
    pub attack_set: Vec<usize>,
    /// Largest `|Y_i - O_i x|` over sensors outside the attack set.
    pub residual: f64,
    pub unique: Uniqueness,
    /// One status per eigenvalue block (composite solver only).
    pub per_eigenvalue_status: Vec<BlockStatus>,
    /// Candidate attack sets tested.
    pub examined: u64,
}

fn ser_vector<S: serde::Serializer>(v: &Vector, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

/// Knobs shared by the solvers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveOptions {
    pub tol: Tolerances,
    pub search: SearchConfig,
    /// Scan every attack set of size at most `s` for a second explanation.
    pub exhaustive_unique: bool,
    /// Drop sensors already identified as attacked before brute-forcing the
    /// remaining blocks.
    pub prune: bool,
    /// A known lower bound on the sparse observability index, used to certify uniqueness.
    pub sparse_index: Option<i64>,
}

/// Least-squares estimate from one sensor, with its residual norm.
///
/// Injectivity of `o` is decided against `scale`, typically the norm of the
/// sensor's full observability matrix, so an all-but-zero map is rejected.
pub fn single_sensor_solve(o: &Mat, y: &Vector, rtol: f64, scale: f64) -> Result<(Vector, f64)> {
    if o.nrows() != y.len() {
        return Err(SsrError::DimensionMismatch(format!(
            "map has {} rows, measurement has {}",
            o.nrows(),
            y.len()
        )));
    }
    if o.ncols() == 0 {
        return Ok((Vector::zeros(0), y.norm()));
    }
    if o.nrows() < o.ncols() || linalg::rank_scaled(o, rtol, scale) < o.ncols() {
        return Err(SsrError::NotObservable);
    }
    let x = linalg::lstsq(o, y, rtol);
    let r = (o * &x - y).norm();
    Ok((x, r))
}

/// Result of a whole-vector vote.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VoteOutcome {
    #[serde(serialize_with = "ser_vector")]
    pub winner: Vector,
    /// Ids agreeing with the winner.
    pub support: Vec<usize>,
    pub dissenters: Vec<usize>,
}

/// Majority vote over `(sensor id, estimate)` pairs. Estimates within
/// `radius` (max-norm) of each other agree; the largest agreeing group wins,
/// ties going to the lowest id, and it needs at least `s + 1` members.
pub fn majority_vote(estimates: &[(usize, Vector)], s: usize, radius: f64) -> Result<VoteOutcome> {
    let mut best: Option<(usize, Vec<usize>)> = None;
    for (k, (_, center)) in estimates.iter().enumerate() {
        let members: Vec<usize> = (0..estimates.len())
            .filter(|&m| (&estimates[m].1 - center).amax() <= radius)
            .collect();
        if best.as_ref().is_none_or(|(_, b)| members.len() > b.len()) {
            best = Some((k, members));
        }
    }
    let Some((_, members)) = best else {
        return Err(SsrError::VoteFailure {
            support: 0,
            required: s + 1,
        });
    };
    if members.len() < s + 1 {
        return Err(SsrError::VoteFailure {
            support: members.len(),
            required: s + 1,
        });
    }
    let winner_idx = *members
        .iter()
        .min_by_key(|&&m| estimates[m].0)
        .expect("non-empty");
    let mut support: Vec<usize> = members.iter().map(|&m| estimates[m].0).collect();
    support.sort_unstable();
    let mut dissenters: Vec<usize> = (0..estimates.len())
        .filter(|m| !members.contains(m))
        .map(|m| estimates[m].0)
        .collect();
    dissenters.sort_unstable();
    Ok(VoteOutcome {
        winner: estimates[winner_idx].1.clone(),
        support,
        dissenters,
    })
}

/// Mean of the values left after discarding the `s` largest and `s` smallest.
pub fn trimmed_mean(values: &[f64], s: usize) -> Result<f64> {
    if values.len() < 2 * s + 1 {
        return Err(SsrError::TooFewEstimates {
            got: values.len(),
            need: 2 * s + 1,
        });
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let kept = &v[s..v.len() - s];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Outcome of the attack-set enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceResult {
    pub x: Vector,
    /// 1-based positions in the input lists.
    pub attack_set: Vec<usize>,
    pub residual: f64,
    /// Kernel dimension of the stacked map over the accepted sensors.
    pub nullity: usize,
    pub unique: Uniqueness,
    pub examined: u64,
}

struct Accepted {
    x: Vector,
    residual: f64,
    nullity: usize,
}

fn try_explain(
    maps: &[Mat],
    ys: &[Vector],
    removed: &[usize],
    dim: usize,
    threshold: f64,
    rtol: f64,
) -> Option<Accepted> {
    let kept = search::complement(removed, maps.len());
    let stack = linalg::vstack(kept.iter().map(|&i| &maps[i]), dim);
    let y = linalg::vcat(kept.iter().map(|&i| &ys[i]));
    let x = if stack.nrows() == 0 {
        Vector::zeros(dim)
    } else {
        linalg::lstsq(&stack, &y, rtol)
    };
    let mut residual = 0.0f64;
    for &i in &kept {
        let r = (&maps[i] * &x - &ys[i]).norm();
        if r > threshold {
            return None;
        }
        residual = residual.max(r);
    }
    let nullity = dim - linalg::rank(&stack, rtol).min(dim);
    Some(Accepted { x, residual, nullity })
}

/// Minimal attack-set search on generic per-sensor maps `maps[i] x = ys[i]`.
///
/// `y_scale` sets the residual threshold; pass the scale of the full
/// measurement bundle when solving a subproblem.
pub fn brute_force(
    maps: &[Mat],
    ys: &[Vector],
    dim: usize,
    s_max: usize,
    y_scale: f64,
    opts: &SolveOptions,
) -> Result<BruteForceResult> {
    if maps.len() != ys.len() {
        return Err(SsrError::DimensionMismatch(format!(
            "{} maps for {} measurement vectors",
            maps.len(),
            ys.len()
        )));
    }
    let n_s = maps.len();
    let threshold = opts.tol.residual_threshold(y_scale);
    let rtol = opts.tol.rank_rtol;
    let cfg = &opts.search;
    let mut examined = 0u64;
    let mut found = None;
    for k in 0..=s_max.min(n_s) {
        let remaining = cfg.budget.saturating_sub(examined);
        let total = search::binomial(n_s, k);
        match search::find_map_first(n_s, k, remaining, cfg, |removed| {
            try_explain(maps, ys, removed, dim, threshold, rtol)
        }) {
            Some((rank, removed, acc)) => {
                examined += rank + 1;
                found = Some((removed, acc));
                break;
            }
            None if remaining < total => {
                examined += remaining;
                return Err(SsrError::BudgetExhausted(examined));
            }
            None => examined += total,
        }
    }
    let Some((removed, acc)) = found else {
        return Err(SsrError::Infeasible(format!(
            "no consistent explanation with at most {s_max} attacked sensors"
        )));
    };
    let k = removed.len();
    let mut unique = if acc.nullity > 0 {
        Uniqueness::Ambiguous
    } else if opts.sparse_index.is_some_and(|idx| idx >= (k + s_max) as i64) {
        Uniqueness::Unique
    } else {
        Uniqueness::Unknown
    };
    if opts.exhaustive_unique && unique != Uniqueness::Ambiguous {
        let radius = opts.tol.vote_radius(y_scale);
        let mut verdict = Uniqueness::Unique;
        for kk in 0..=s_max.min(n_s) {
            let remaining = cfg.budget.saturating_sub(examined);
            let total = search::binomial(n_s, kk);
            let other = search::find_map_first(n_s, kk, remaining, cfg, |alt| {
                try_explain(maps, ys, alt, dim, threshold, rtol)
                    .filter(|a| a.nullity > 0 || (&a.x - &acc.x).amax() > radius)
            });
            match other {
                Some((rank, _, _)) => {
                    examined += rank + 1;
                    verdict = Uniqueness::Ambiguous;
                    break;
                }
                None if remaining < total => {
                    examined += remaining;
                    verdict = Uniqueness::Unknown;
                    break;
                }
                None => examined += total,
            }
        }
        unique = verdict;
    }
    Ok(BruteForceResult {
        x: acc.x,
        attack_set: removed.iter().map(|i| i + 1).collect(),
        residual: acc.residual,
        nullity: acc.nullity,
        unique,
        examined,
    })
}

/// Brute force on the full system.
pub fn brute_force_ssr(
    bundle: &SubsystemBundle,
    meas: &MeasurementBundle,
    s_max: usize,
    opts: &SolveOptions,
) -> Result<SsrSolution> {
    let maps: Vec<Mat> = bundle.observability.iter().map(|o| o.o.clone()).collect();
    let n = bundle.direct_sum.change_of_basis.nrows();
    let r = brute_force(&maps, &meas.y, n, s_max, meas.scale(), opts)?;
    Ok(SsrSolution {
        x: r.x,
        attack_set: r.attack_set,
        residual: r.residual,
        unique: r.unique,
        per_eigenvalue_status: Vec::new(),
        examined: r.examined,
    })
}

/// Largest residual over sensors outside `attack_set`.
pub fn consistency_residual(bundle: &SubsystemBundle, meas: &MeasurementBundle, x: &Vector, attack_set: &[usize]) -> f64 {
    bundle
        .observability
        .iter()
        .zip(&meas.y)
        .filter(|(o, _)| !attack_set.contains(&o.sensor_id))
        .map(|(o, y)| (&o.o * x - y).norm())
        .fold(0.0, f64::max)
}

fn estimate(bundle: &SubsystemBundle, proj: &ProjectedMeasurements, id: usize, j: usize, rtol: f64) -> Result<Vector> {
    let blk = bundle.block(id, j);
    let scale = linalg::spectral_norm(&bundle.observability[id - 1].o);
    single_sensor_solve(&blk.coords, &proj.coords[id - 1][j], rtol, scale).map(|(x, _)| x)
}

/// Composite solver: vote on J2 blocks, brute-force J3 blocks on their
/// subproblems, leave J1 blocks at zero.
pub fn decomposition_ssr(
    bundle: &SubsystemBundle,
    class: &EigenClassification,
    proj: &ProjectedMeasurements,
    opts: &SolveOptions,
) -> Result<SsrSolution> {
    let s = class.s;
    let tol = &opts.tol;
    let threshold = tol.residual_threshold(proj.y_scale);
    let radius = tol.vote_radius(proj.y_scale);
    let r = bundle.len();
    let ids: Vec<usize> = (1..=bundle.num_sensors()).collect();
    let mut flagged: Vec<usize> = ids
        .iter()
        .copied()
        .filter(|&i| proj.residual_norm(i) > threshold)
        .collect();
    let mut parts: Vec<Option<Vector>> = vec![None; r];
    let mut status = vec![BlockStatus::Unreconstructable; r];
    let mut unique = if class.j1.is_empty() {
        if class.is_exhaustive() {
            Uniqueness::Unique
        } else {
            Uniqueness::Unknown
        }
    } else {
        Uniqueness::Ambiguous
    };
    let inconsistent = |j: usize, xj: &Vector| -> Vec<usize> {
        ids.iter()
            .copied()
            .filter(|&i| {
                let blk = bundle.block(i, j);
                (&blk.coords * xj - &proj.coords[i - 1][j]).norm() > threshold
            })
            .collect()
    };

    for &j in &class.j2 {
        let estimates = class.observers[j]
            .iter()
            .map(|&i| estimate(bundle, proj, i, j, tol.rank_rtol).map(|x| (i, x)))
            .collect::<Result<Vec<_>>>()?;
        let vote = majority_vote(&estimates, s, radius)?;
        // a dissenting estimate from an ill-conditioned map can still fit the
        // winner; only sensors whose data contradict it are flagged
        flagged.extend(inconsistent(j, &vote.winner));
        parts[j] = Some(vote.winner);
        status[j] = BlockStatus::Voted;
    }
    flagged.sort_unstable();
    flagged.dedup();

    let mut examined = 0u64;
    for &j in &class.j3 {
        let pruned: Vec<usize> = if opts.prune && flagged.len() <= s {
            flagged.clone()
        } else {
            Vec::new()
        };
        let kept: Vec<usize> = ids.iter().copied().filter(|i| !pruned.contains(i)).collect();
        let maps: Vec<Mat> = kept.iter().map(|&i| bundle.block(i, j).coords.clone()).collect();
        let ys: Vec<Vector> = kept.iter().map(|&i| proj.coords[i - 1][j].clone()).collect();
        let sub_opts = SolveOptions {
            search: opts.search.with_budget(opts.search.budget.saturating_sub(examined)),
            sparse_index: None,
            ..opts.clone()
        };
        let res = brute_force(&maps, &ys, bundle.dim(j), s - pruned.len(), proj.y_scale, &sub_opts);
        let res = match res {
            Err(SsrError::BudgetExhausted(k)) => return Err(SsrError::BudgetExhausted(examined + k)),
            other => other?,
        };
        examined += res.examined;
        if res.nullity > 0 || (opts.exhaustive_unique && res.unique == Uniqueness::Ambiguous) {
            unique = Uniqueness::Ambiguous;
        }
        flagged.extend(res.attack_set.iter().map(|&p| kept[p - 1]));
        parts[j] = Some(res.x);
        status[j] = BlockStatus::BruteForced;
    }
    for &j in &class.j1 {
        parts[j] = Some(Vector::zeros(bundle.dim(j)));
    }
    flagged.sort_unstable();
    flagged.dedup();
    let x = decompose::recompose_state(&parts, &bundle.direct_sum)?;
    let residual = consistency_residual(bundle, &proj.raw, &x, &flagged);
    Ok(SsrSolution {
        x,
        attack_set: flagged,
        residual,
        unique,
        per_eigenvalue_status: status,
        examined,
    })
}

/// Majority voting on every block. Requires every block to have at least
/// `2s + 1` observers.
pub fn vote_ssr(
    bundle: &SubsystemBundle,
    class: &EigenClassification,
    proj: &ProjectedMeasurements,
    opts: &SolveOptions,
) -> Result<SsrSolution> {
    let need = 2 * class.s + 1;
    if let Some(j) = (0..bundle.len()).find(|&j| class.observers[j].len() < need) {
        return Err(SsrError::TooFewEstimates {
            got: class.observers[j].len(),
            need,
        });
    }
    let all_vote = EigenClassification {
        j1: Vec::new(),
        j2: (0..bundle.len()).collect(),
        j3: Vec::new(),
        non_exhaustive: Vec::new(),
        ..class.clone()
    };
    decomposition_ssr(bundle, &all_vote, proj, opts)
}

/// Noise-tolerant reconstruction: per block, each observing sensor's
/// estimate is combined component-wise by a trimmed mean. No sensor is
/// identified as attacked.
pub fn trimmed_mean_ssr(
    bundle: &SubsystemBundle,
    observers: &[Vec<usize>],
    proj: &ProjectedMeasurements,
    s: usize,
    tol: &Tolerances,
) -> Result<SsrSolution> {
    let mut parts = Vec::with_capacity(bundle.len());
    for (j, obs) in observers.iter().enumerate() {
        if obs.len() < 2 * s + 1 {
            return Err(SsrError::TooFewEstimates {
                got: obs.len(),
                need: 2 * s + 1,
            });
        }
        let ests = obs
            .iter()
            .map(|&i| estimate(bundle, proj, i, j, tol.rank_rtol))
            .collect::<Result<Vec<_>>>()?;
        let dim = bundle.dim(j);
        let mut xj = Vector::zeros(dim);
        for l in 0..dim {
            let column: Vec<f64> = ests.iter().map(|e| e[l]).collect();
            xj[l] = trimmed_mean(&column, s)?;
        }
        parts.push(Some(xj));
    }
    let x = decompose::recompose_state(&parts, &bundle.direct_sum)?;
    let residual = consistency_residual(bundle, &proj.raw, &x, &[]);
    Ok(SsrSolution {
        x,
        attack_set: Vec::new(),
        residual,
        unique: Uniqueness::Unknown,
        per_eigenvalue_status: vec![BlockStatus::Voted; bundle.len()],
        examined: 0,
    })
}
