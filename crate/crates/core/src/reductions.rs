//! The two hardness reductions as instance builders, together with the
//! brute-force deciders used to check them.
//!
//! * Sparsest solution of `F e = b` maps to secure state reconstruction with
//!   `A = I`, scalar sensors spanning `ker F`, and a particular solution as
//!   the measurements.
//! * A singular square submatrix of a tall `F` maps to an `r`-sparse
//!   unobservability question for `(I, F)` with `r = p - n`.

use num_bigint::BigInt;

use crate::error::{Result, SsrError};
use crate::exact;
use crate::linalg;
use crate::model::{HorizonPolicy, LtiSystem, MeasurementBundle, Tolerances};
use crate::search::{self, SearchConfig};
use crate::{Mat, Vector};

/// Integer-exact rank when possible, otherwise thresholded at `scale`.
fn decide_rank(m: &Mat, rtol: f64, scale: f64) -> usize {
    match exact::integer_matrix(m) {
        Some(ints) => exact::rank(ints),
        None => linalg::rank_scaled(m, rtol, scale),
    }
}

fn select_rows(m: &Mat, rows: &[usize]) -> Mat {
    Mat::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

fn select_cols(m: &Mat, cols: &[usize]) -> Mat {
    Mat::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// Find the sparsest `e` with `F e = b`.
#[derive(Clone, Debug, PartialEq)]
pub struct CsInstance {
    pub f: Mat,
    pub b: Vector,
}

impl CsInstance {
    /// Requires `F` of full row rank with fewer rows than columns.
    pub fn new(f: Mat, b: Vector, tol: &Tolerances) -> Result<Self> {
        let (m, n) = f.shape();
        if m == 0 || b.len() != m {
            return Err(SsrError::DimensionMismatch(format!(
                "F is {m}x{n} but b has length {}",
                b.len()
            )));
        }
        if f.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(SsrError::NonFinite("F or b".into()));
        }
        if m >= n {
            return Err(SsrError::Invalid(format!(
                "F must have fewer rows than columns, got {m}x{n}"
            )));
        }
        if decide_rank(&f, tol.rank_rtol, linalg::spectral_norm(&f)) < m {
            return Err(SsrError::Invalid("F must have full row rank".into()));
        }
        Ok(CsInstance { f, b })
    }

    pub fn n(&self) -> usize {
        self.f.ncols()
    }
}

/// The SSR instance built from a compressed-sensing instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSsr {
    /// `A = I` of size `n - m`, one scalar sensor per column of `F`.
    pub system: LtiSystem,
    pub measurements: MeasurementBundle,
    /// Orthonormal basis of `ker F`; row `i` is sensor `i + 1`.
    pub kernel: Mat,
    /// Minimum-norm particular solution of `F Y = b`.
    pub particular: Vector,
}

impl ReducedSsr {
    /// Translates a reconstructed state back to a solution `e = Y - C x` of `F e = b`.
    pub fn error_vector(&self, x: &Vector) -> Vector {
        &self.particular - &self.kernel * x
    }
}

pub fn cs_to_ssr(cs: &CsInstance, tol: &Tolerances) -> Result<ReducedSsr> {
    let n = cs.n();
    let kernel = linalg::null_space(&cs.f, tol.rank_rtol);
    let dim = kernel.ncols();
    if dim == 0 {
        return Err(SsrError::Invalid("F has a trivial kernel".into()));
    }
    let particular = linalg::lstsq(&cs.f, &cs.b, tol.rank_rtol);
    let system = LtiSystem::with_scalar_sensors(Mat::identity(dim, dim), &kernel)?
        .with_horizon(HorizonPolicy::Minimal);
    let obs = system.observability_matrices(tol);
    let y: Vec<Vector> = (0..n).map(|i| Vector::from_element(1, particular[i])).collect();
    let measurements = MeasurementBundle::new(&obs, y)?;
    Ok(ReducedSsr {
        system,
        measurements,
        kernel,
        particular,
    })
}

/// A sparsest solution found by support enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct CsSolution {
    pub e: Vector,
    /// 1-based support, lexicographically first among the sparsest.
    pub support: Vec<usize>,
    pub examined: u64,
}

/// Supports of increasing size, lexicographic within a size; a support is
/// feasible when appending `b` does not raise the rank of `F_S`.
pub fn cs_brute_force(cs: &CsInstance, k_max: usize, tol: &Tolerances, cfg: &SearchConfig) -> Result<CsSolution> {
    let n = cs.n();
    let fb = linalg::hstack([&cs.f, &Mat::from_column_slice(cs.b.len(), 1, cs.b.as_slice())], cs.f.nrows());
    let scale = linalg::spectral_norm(&fb);
    let mut examined = 0u64;
    for k in 0..=k_max.min(n) {
        let remaining = cfg.budget.saturating_sub(examined);
        let total = search::binomial(n, k);
        let hit = search::find_map_first(n, k, remaining, cfg, |support| {
            let fs = select_cols(&cs.f, support);
            let mut cols = support.to_vec();
            cols.push(n);
            let fsb = select_cols(&fb, &cols);
            let feasible = decide_rank(&fs, tol.rank_rtol, scale) == decide_rank(&fsb, tol.rank_rtol, scale);
            feasible.then(|| {
                let coef = linalg::lstsq(&fs, &cs.b, tol.rank_rtol);
                let mut e = Vector::zeros(n);
                for (c, &i) in support.iter().enumerate() {
                    e[i] = coef[c];
                }
                e
            })
        });
        match hit {
            Some((rank, support, e)) => {
                examined += rank + 1;
                return Ok(CsSolution {
                    e,
                    support: support.iter().map(|i| i + 1).collect(),
                    examined,
                });
            }
            None if remaining < total => return Err(SsrError::BudgetExhausted(examined + remaining)),
            None => examined += total,
        }
    }
    Err(SsrError::Infeasible(format!("no solution with at most {k_max} nonzeros")))
}

/// Does the tall full-column-rank `F` contain a singular square submatrix?
#[derive(Clone, Debug, PartialEq)]
pub struct DegeneracyInstance {
    pub f: Mat,
}

impl DegeneracyInstance {
    pub fn new(f: Mat, tol: &Tolerances) -> Result<Self> {
        let (p, n) = f.shape();
        if n == 0 || p <= n {
            return Err(SsrError::Invalid(format!("F must be tall, got {p}x{n}")));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(SsrError::NonFinite("F".into()));
        }
        if decide_rank(&f, tol.rank_rtol, linalg::spectral_norm(&f)) < n {
            return Err(SsrError::Invalid("F must have full column rank".into()));
        }
        Ok(DegeneracyInstance { f })
    }
}

/// `(A = I_n, C = F, r = p - n)`, one scalar sensor per row of `F`.
pub fn degeneracy_to_unobservability(di: &DegeneracyInstance) -> Result<(LtiSystem, usize)> {
    let (p, n) = di.f.shape();
    let sys = LtiSystem::with_scalar_sensors(Mat::identity(n, n), &di.f)?;
    Ok((sys, p - n))
}

/// Yes/no answer of an exhaustive search with its first witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decision {
    pub answer: bool,
    /// 1-based ids, empty when the answer is no.
    pub witness: Vec<usize>,
    pub examined: u64,
}

fn decide<F>(n_items: usize, k: usize, cfg: &SearchConfig, test: F) -> Result<Decision>
where
    F: Fn(&[usize]) -> bool + Sync + Send,
{
    let total = search::binomial(n_items, k);
    match search::find_map_first(n_items, k, cfg.budget, cfg, |s| test(s).then_some(())) {
        Some((rank, s, ())) => Ok(Decision {
            answer: true,
            witness: s.iter().map(|i| i + 1).collect(),
            examined: rank + 1,
        }),
        None if cfg.budget < total => Err(SsrError::BudgetExhausted(cfg.budget)),
        None => Ok(Decision {
            answer: false,
            witness: Vec::new(),
            examined: total,
        }),
    }
}

/// Exact per-sensor observability stacks (full horizon) for integer data.
fn exact_blocks(sys: &LtiSystem) -> Option<Vec<Vec<Vec<BigInt>>>> {
    let a = exact::integer_matrix(sys.a())?;
    let n = sys.n();
    sys.sensors()
        .iter()
        .map(|s| {
            let c = exact::integer_matrix(&s.c)?;
            let mut stack = c.clone();
            let mut block = c;
            for _ in 1..n {
                block = exact::matmul(&block, &a);
                stack.extend(block.iter().cloned());
            }
            Some(stack)
        })
        .collect()
}

/// Can some set of exactly `r` sensors be removed so that the rest no
/// longer observe the state?
pub fn r_sparse_unobservability(sys: &LtiSystem, r: usize, tol: &Tolerances, cfg: &SearchConfig) -> Result<Decision> {
    let n = sys.n();
    let big_n = sys.num_sensors();
    if r > big_n {
        return Err(SsrError::Invalid(format!("cannot remove {r} of {big_n} sensors")));
    }
    if let Some(blocks) = exact_blocks(sys) {
        return decide(big_n, r, cfg, |removed| {
            let kept = search::complement(removed, big_n);
            let stack: Vec<Vec<BigInt>> = kept.iter().flat_map(|&i| blocks[i].iter().cloned()).collect();
            exact::rank(stack) < n
        });
    }
    let maps: Vec<Mat> = sys.observability_matrices(tol).into_iter().map(|o| o.o).collect();
    let scale = linalg::spectral_norm(&linalg::vstack(maps.iter(), n));
    decide(big_n, r, cfg, |removed| {
        let kept = search::complement(removed, big_n);
        let stack = linalg::vstack(kept.iter().map(|&i| &maps[i]), n);
        linalg::rank_scaled(&stack, tol.rank_rtol, scale) < n
    })
}

/// Exhaustive search for a singular `n x n` row submatrix.
pub fn linear_degeneracy(f: &Mat, tol: &Tolerances, cfg: &SearchConfig) -> Result<Decision> {
    let (p, n) = f.shape();
    if let Some(ints) = exact::integer_matrix(f) {
        return decide(p, n, cfg, |rows| {
            exact::rank(rows.iter().map(|&i| ints[i].clone()).collect()) < n
        });
    }
    let scale = linalg::spectral_norm(f);
    decide(p, n, cfg, |rows| linalg::rank_scaled(&select_rows(f, rows), tol.rank_rtol, scale) < n)
}
