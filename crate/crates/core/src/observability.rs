//! Sparse observability, eigenvalue observability, and the classification
//! of eigenvalues into the three reconstruction regimes.

use serde::Serialize;

use crate::decompose::SubsystemBundle;
use crate::error::Result;
use crate::linalg::{self, to_complex};
use crate::model::{LtiSystem, Tolerances};
use crate::search::{self, SearchConfig};
use crate::spectral::{self, EigenStructure};
use crate::{Complex, Mat};

/// PBH test: is `[A - lambda I; C]` injective?
pub fn pbh_rank_full(a: &Mat, c: &Mat, lambda: Complex, rtol: f64) -> bool {
    let n = a.nrows();
    let mut stacked = nalgebra::DMatrix::<Complex>::zeros(n + c.nrows(), n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&to_complex(a));
    for i in 0..n {
        stacked[(i, i)] -= lambda;
    }
    stacked.view_mut((n, 0), (c.nrows(), n)).copy_from(&to_complex(c));
    // scale from the data, not the shifted stack, which can be entirely tiny
    let scale = linalg::spectral_norm(a).max(linalg::spectral_norm(c));
    linalg::rank_scaled(&stacked, rtol, scale) == n
}

/// PBH test for sensor `id` of a system.
pub fn pbh_observable(sys: &LtiSystem, id: usize, lambda: Complex, tol: &Tolerances) -> Result<bool> {
    Ok(pbh_rank_full(sys.a(), &sys.sensor(id)?.c, lambda, tol.rank_rtol))
}

/// Observer sets of every distinct eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigObsReport {
    #[serde(skip)]
    pub lambdas: Vec<Complex>,
    /// `observers[j]` lists the sensor ids for which eigenvalue `j` passes the PBH test.
    pub observers: Vec<Vec<usize>>,
    /// `min_j |observers[j]| - 1`.
    pub index: i64,
}

fn index_of(observers: &[Vec<usize>]) -> i64 {
    observers.iter().map(|s| s.len() as i64 - 1).min().unwrap_or(-1)
}

/// Eigenvalue observability of the whole system.
pub fn eigenvalue_observability_report(sys: &LtiSystem, tol: &Tolerances) -> Result<EigObsReport> {
    let es = spectral::eigenstructure(sys.a(), tol)?;
    Ok(eig_report_with(sys, &es, tol))
}

/// Same as [`eigenvalue_observability_report`] with a precomputed eigenstructure.
pub fn eig_report_with(sys: &LtiSystem, es: &EigenStructure, tol: &Tolerances) -> EigObsReport {
    let cs: Vec<&Mat> = sys.sensors().iter().map(|s| &s.c).collect();
    let observers = es
        .blocks
        .iter()
        .map(|b| observers_of(sys.a(), &cs, b.lambda, tol.rank_rtol))
        .collect::<Vec<_>>();
    EigObsReport {
        lambdas: es.lambdas(),
        index: index_of(&observers),
        observers,
    }
}

fn observers_of(a: &Mat, cs: &[&Mat], lambda: Complex, rtol: f64) -> Vec<usize> {
    cs.iter()
        .enumerate()
        .filter(|(_, c)| pbh_rank_full(a, c, lambda, rtol))
        .map(|(i, _)| i + 1)
        .collect()
}

/// Observer set of subsystem `j`, from `A^(j)` and `C_i M_j`.
pub fn subsystem_observers(bundle: &SubsystemBundle, j: usize, tol: &Tolerances) -> Vec<usize> {
    let cs: Vec<&Mat> = bundle.sensors.iter().map(|s| &s.blocks[j].c_restricted).collect();
    observers_of(
        &bundle.a_restricted[j],
        &cs,
        bundle.eigen.blocks[j].lambda,
        tol.rank_rtol,
    )
}

/// Outcome of the removal-set search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SparseObsReport {
    /// Largest `k` such that every removal of `k` sensors keeps the system
    /// observable. A lower bound when the search was cut short.
    pub index: i64,
    /// Smallest, then lexicographically first, sensor set whose removal breaks
    /// observability. Empty if none was found.
    pub witness: Vec<usize>,
    /// False when the budget ran out before the answer was settled.
    pub exhaustive: bool,
    /// Number of removal sets tested.
    pub examined: u64,
}

/// Row-compressed factor `R` with `R^T R = O^T O`; preserves stacked ranks.
fn compress(o: &Mat, rtol: f64) -> Mat {
    let (rows, cols) = o.shape();
    if rows <= cols || rows == 0 || cols == 0 {
        return o.clone();
    }
    let d = linalg::svd(o, false, true);
    let top = d.s.first().copied().unwrap_or(0.0);
    let thr = linalg::rank_threshold(rtol, top, rows, cols) * 1e-3;
    let keep: Vec<usize> = (0..d.s.len()).filter(|&k| d.s[k] > thr).collect();
    Mat::from_fn(keep.len(), cols, |r, c| d.s[keep[r]] * d.v[(c, keep[r])])
}

/// Removal-set search over per-sensor observability maps of a space of
/// dimension `n`, up to removal size `max_k`.
///
/// If no removal of size at most `max_k` breaks observability the reported
/// index is `max_k` (exact when `max_k` is the number of sensors minus one).
pub fn sparse_search(
    maps: &[Mat],
    n: usize,
    rtol: f64,
    max_k: usize,
    cfg: &SearchConfig,
) -> SparseObsReport {
    sparse_search_at_scale(maps, n, rtol, None, max_k, cfg)
}

/// [`sparse_search`] with rank decisions made relative to `scale` instead of
/// the norm of the stacked maps. Subsystem maps are restrictions of larger
/// maps; a subsystem that every sensor is blind to has a stack made of
/// rounding noise, which only looks rank-deficient against the outer scale.
pub fn sparse_search_at_scale(
    maps: &[Mat],
    n: usize,
    rtol: f64,
    scale: Option<f64>,
    max_k: usize,
    cfg: &SearchConfig,
) -> SparseObsReport {
    let big_n = maps.len();
    let rows: Vec<Mat> = maps.iter().map(|m| compress(m, rtol)).collect();
    let own = linalg::spectral_norm(&linalg::vstack(rows.iter(), n));
    let scale = scale.map_or(own, |s| s.max(own));
    let observable_without = |removed: &[usize]| {
        let kept = search::complement(removed, big_n);
        let stack = linalg::vstack(kept.iter().map(|&i| &rows[i]), n);
        if stack.nrows() < n {
            return false;
        }
        // scale fixed by the full stack so a removal cannot inflate small directions
        linalg::rank_scaled(&stack, rtol, scale) == n
    };
    let mut examined = 0u64;
    for k in 0..=max_k.min(big_n) {
        let remaining = cfg.budget.saturating_sub(examined);
        let total = search::binomial(big_n, k);
        let hit = search::find_map_first(big_n, k, remaining, cfg, |removed| {
            (!observable_without(removed)).then_some(())
        });
        match hit {
            Some((rank, removed, ())) => {
                examined += rank + 1;
                return SparseObsReport {
                    index: k as i64 - 1,
                    witness: removed.iter().map(|i| i + 1).collect(),
                    exhaustive: true,
                    examined,
                };
            }
            None if remaining < total => {
                examined += remaining;
                return SparseObsReport {
                    index: k as i64 - 1,
                    witness: Vec::new(),
                    exhaustive: false,
                    examined,
                };
            }
            None => examined += total,
        }
    }
    SparseObsReport {
        index: max_k.min(big_n) as i64,
        witness: Vec::new(),
        exhaustive: true,
        examined,
    }
}

/// Sparse observability index of a system by exhaustive removal search.
pub fn sparse_observability_report(
    sys: &LtiSystem,
    tol: &Tolerances,
    cfg: &SearchConfig,
) -> SparseObsReport {
    let maps: Vec<Mat> = sys.observability_matrices(tol).into_iter().map(|o| o.o).collect();
    sparse_search(&maps, sys.n(), tol.rank_rtol, sys.num_sensors(), cfg)
}

/// Sparse observability of subsystem `j`, searched up to removal size `max_k`.
pub fn subsystem_sparse_report(
    bundle: &SubsystemBundle,
    j: usize,
    tol: &Tolerances,
    max_k: usize,
    cfg: &SearchConfig,
) -> SparseObsReport {
    let maps: Vec<Mat> = bundle.sensors.iter().map(|s| s.blocks[j].restricted.clone()).collect();
    let n = bundle.direct_sum.change_of_basis.nrows();
    let outer = linalg::spectral_norm(&linalg::vstack(bundle.observability.iter().map(|o| &o.o), n));
    sparse_search_at_scale(&maps, bundle.dim(j), tol.rank_rtol, Some(outer), max_k, cfg)
}

/// Reconstruction regime of each eigenvalue block for attack budget `s`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EigenClassification {
    pub s: usize,
    /// Subsystem not `2s`-sparse observable: cannot be reconstructed.
    pub j1: Vec<usize>,
    /// At least `2s + 1` observers: majority voting suffices.
    pub j2: Vec<usize>,
    /// The remaining blocks: brute-force search on the subsystem.
    pub j3: Vec<usize>,
    /// Blocks whose sparse check ran out of budget (kept in J3).
    pub non_exhaustive: Vec<usize>,
    /// Observer set of each block.
    pub observers: Vec<Vec<usize>>,
    /// Removal sets tested across all subsystem checks.
    pub examined: u64,
}

impl EigenClassification {
    pub fn is_exhaustive(&self) -> bool {
        self.non_exhaustive.is_empty()
    }
}

/// Sorts every block into J1, J2 or J3.
pub fn classify_eigenvalues(
    bundle: &SubsystemBundle,
    s: usize,
    tol: &Tolerances,
    cfg: &SearchConfig,
) -> EigenClassification {
    let mut out = EigenClassification {
        s,
        j1: Vec::new(),
        j2: Vec::new(),
        j3: Vec::new(),
        non_exhaustive: Vec::new(),
        observers: Vec::new(),
        examined: 0,
    };
    for j in 0..bundle.len() {
        let observers = subsystem_observers(bundle, j, tol);
        if observers.len() > 2 * s {
            // 2s-eigenvalue observability already implies 2s-sparse observability
            out.j2.push(j);
        } else {
            let report = subsystem_sparse_report(bundle, j, tol, 2 * s, cfg);
            out.examined += report.examined;
            if !report.exhaustive {
                out.non_exhaustive.push(j);
                out.j3.push(j);
            } else if report.index < 2 * s as i64 {
                out.j1.push(j);
            } else {
                out.j3.push(j);
            }
        }
        out.observers.push(observers);
    }
    out
}

/// Comparison of the two observability indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Gm1Report {
    pub all_gamma_one: bool,
    pub sparse_index: i64,
    pub eig_index: i64,
    pub equal: bool,
    /// Equality when every geometric multiplicity is one, `sparse >= eig` otherwise.
    pub holds: bool,
    pub exhaustive: bool,
}

pub fn check_gm1_equivalence(sys: &LtiSystem, tol: &Tolerances, cfg: &SearchConfig) -> Result<Gm1Report> {
    let es = spectral::eigenstructure(sys.a(), tol)?;
    let eig = eig_report_with(sys, &es, tol);
    let sparse = sparse_observability_report(sys, tol, cfg);
    let all_gamma_one = es.all_gamma_one();
    let equal = sparse.index == eig.index;
    Ok(Gm1Report {
        all_gamma_one,
        sparse_index: sparse.index,
        eig_index: eig.index,
        equal,
        holds: if all_gamma_one { equal } else { sparse.index >= eig.index },
        exhaustive: sparse.exhaustive,
    })
}
