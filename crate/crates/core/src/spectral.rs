//! Eigenstructure, generalized eigenspaces and the canonical (oblique)
//! projections of the resulting direct sum.
//!
//! A complex-conjugate pair of eigenvalues of a real matrix is handled as a
//! single real block whose subspace is the real invariant subspace of both
//! members, so every matrix exposed here is real.

use nalgebra::Schur;

use crate::error::{Result, SsrError};
use crate::linalg::{self, normalized_power, to_complex};
use crate::model::Tolerances;
use crate::{Complex, Mat, Vector};

type CMat = nalgebra::DMatrix<Complex>;
type CVector = nalgebra::DVector<Complex>;

/// One distinct eigenvalue (or conjugate pair) with its generalized eigenspace.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenBlock {
    /// The eigenvalue; for a conjugate pair the member with positive imaginary part.
    pub lambda: Complex,
    /// Algebraic multiplicity of `lambda`.
    pub alpha: usize,
    /// Geometric multiplicity of `lambda`.
    pub gamma: usize,
    /// Orthonormal columns spanning `ker (A - lambda I)^alpha` (and its conjugate).
    pub basis: Mat,
}

impl EigenBlock {
    pub fn is_conjugate_pair(&self) -> bool {
        self.lambda.im != 0.0
    }

    /// Real dimension of the block's subspace.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Short human-readable label, e.g. `2` or `0.5+1i`.
    pub fn label(&self) -> String {
        eigen_label(self.lambda)
    }
}

/// Label with at most nine significant digits, so `2.9999999999999996` prints as `3`.
pub fn eigen_label(z: Complex) -> String {
    let re = short_number(z.re);
    if z.im == 0.0 {
        return re;
    }
    let im = short_number(z.im.abs());
    let sign = if z.im < 0.0 { '-' } else { '+' };
    format!("{re}{sign}{im}i")
}

fn short_number(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    let out = format!("{rounded}");
    if out == "-0" {
        "0".into()
    } else {
        out
    }
}

/// Distinct eigenvalues of `A` with multiplicities and eigenspace bases.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenStructure {
    pub blocks: Vec<EigenBlock>,
    pub n: usize,
}

impl EigenStructure {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn all_gamma_one(&self) -> bool {
        self.blocks.iter().all(|b| b.gamma == 1)
    }

    pub fn lambdas(&self) -> Vec<Complex> {
        self.blocks.iter().map(|b| b.lambda).collect()
    }

    /// Index of the block whose eigenvalue is within `radius` of `z` (or of its conjugate).
    pub fn find(&self, z: Complex, radius: f64) -> Option<usize> {
        self.blocks.iter().position(|b| {
            (b.lambda - z).norm() <= radius || (b.lambda.conj() - z).norm() <= radius
        })
    }
}

/// Computes the eigenstructure of a square real matrix.
pub fn eigenstructure(a: &Mat, tol: &Tolerances) -> Result<EigenStructure> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(SsrError::DimensionMismatch("A must be square and non-empty".into()));
    }
    let a_norm = linalg::spectral_norm(a);
    let radius = tol.cluster_radius(a_norm);
    let (q, t) = Schur::try_new(to_complex(a), f64::EPSILON, 1000 * n.max(10))
        .ok_or(SsrError::EigenFailure)?
        .unpack();
    let eigs: Vec<Complex> = t.diagonal().iter().copied().collect();

    let clusters = cluster(&eigs, radius)?;
    let mut blocks = Vec::new();
    for members in clusters {
        let alpha = members.len();
        let mean = members.iter().map(|&k| eigs[k]).sum::<Complex>() / alpha as f64;
        if mean.im < -radius {
            continue;
        }
        let block = if alpha == 1 {
            simple_block(&q, &t, members[0], mean.im.abs() <= radius, radius, tol)?
        } else if mean.im.abs() <= radius {
            real_block(a, mean.re, alpha, tol)
        } else {
            complex_block(a, mean, alpha, tol)?
        };
        blocks.push(block);
    }
    blocks.sort_by(|x, y| {
        x.lambda
            .re
            .total_cmp(&y.lambda.re)
            .then(x.lambda.im.total_cmp(&y.lambda.im))
    });
    let total: usize = blocks.iter().map(|b| b.dim()).sum();
    if total != n {
        return Err(SsrError::IllSeparatedSpectrum(format!(
            "block dimensions sum to {total}, expected {n}"
        )));
    }
    Ok(EigenStructure { blocks, n })
}

/// Single-linkage clustering at `radius`; clusters that end up closer than
/// `2 * radius` without merging are reported as ill-separated.
fn cluster(eigs: &[Complex], radius: f64) -> Result<Vec<Vec<usize>>> {
    let m = eigs.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..m {
        for j in i + 1..m {
            if (eigs[i] - eigs[j]).norm() <= radius {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; m];
    for i in 0..m {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    for (gi, g) in groups.iter().enumerate() {
        for h in groups.iter().skip(gi + 1) {
            for &i in g {
                for &j in h {
                    let d = (eigs[i] - eigs[j]).norm();
                    if d < 2.0 * radius {
                        return Err(SsrError::IllSeparatedSpectrum(format!(
                            "eigenvalues {} and {} are {d:.3e} apart (cluster radius {radius:.3e})",
                            eigen_label(eigs[i]),
                            eigen_label(eigs[j])
                        )));
                    }
                }
            }
        }
    }
    Ok(groups)
}

fn nullity<T>(m: &nalgebra::DMatrix<T>, rtol: f64) -> usize
where
    T: nalgebra::ComplexField<RealField = f64>,
{
    m.ncols() - linalg::rank(m, rtol)
}

/// Eigenvector of a simple eigenvalue by back-substitution in the Schur form
/// `A = Q T Q^H`, which costs `O(n^2)` instead of a fresh factorization.
fn schur_eigenvector(q: &CMat, t: &CMat, k: usize, floor: f64) -> CVector {
    let lambda = t[(k, k)];
    let mut v = CVector::zeros(k + 1);
    v[k] = Complex::new(1.0, 0.0);
    for i in (0..k).rev() {
        let mut acc = Complex::new(0.0, 0.0);
        for l in i + 1..=k {
            acc += t[(i, l)] * v[l];
        }
        let mut d = t[(i, i)] - lambda;
        if d.norm() < floor {
            d = Complex::new(floor, 0.0);
        }
        v[i] = -acc / d;
    }
    q.columns(0, k + 1) * v
}

fn simple_block(q: &CMat, t: &CMat, k: usize, real: bool, radius: f64, tol: &Tolerances) -> Result<EigenBlock> {
    let n = q.nrows();
    let w = schur_eigenvector(q, t, k, radius.max(f64::EPSILON));
    let lambda = t[(k, k)];
    let (lambda, basis) = if real {
        let pivot = w.iter().copied().max_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap_or_default();
        let phase = pivot.conj() / pivot.norm().max(f64::MIN_POSITIVE);
        let v = Mat::from_fn(n, 1, |i, _| (w[i] * phase).re);
        (Complex::new(lambda.re, 0.0), &v / v.norm())
    } else {
        let (lambda, w) = if lambda.im < 0.0 { (lambda.conj(), w.conjugate()) } else { (lambda, w) };
        let both = Mat::from_fn(n, 2, |i, c| if c == 0 { w[i].re } else { w[i].im });
        let basis = linalg::orthonormal_columns(&both, tol.rank_rtol);
        if basis.ncols() != 2 {
            return Err(SsrError::IllSeparatedSpectrum(format!(
                "real invariant subspace of {} is degenerate",
                eigen_label(lambda)
            )));
        }
        (lambda, basis)
    };
    Ok(EigenBlock {
        lambda,
        alpha: 1,
        gamma: 1,
        basis,
    })
}

fn real_block(a: &Mat, lambda: f64, alpha: usize, tol: &Tolerances) -> EigenBlock {
    let n = a.nrows();
    let shifted = a - Mat::identity(n, n) * lambda;
    let gamma = nullity(&shifted, tol.rank_rtol).clamp(1, alpha);
    let power = normalized_power(&shifted, alpha);
    let basis = linalg::smallest_right_singular_vectors(&power, alpha);
    EigenBlock {
        lambda: Complex::new(lambda, 0.0),
        alpha,
        gamma,
        basis,
    }
}

fn complex_block(a: &Mat, lambda: Complex, alpha: usize, tol: &Tolerances) -> Result<EigenBlock> {
    let n = a.nrows();
    let shifted = to_complex(a) - nalgebra::DMatrix::<Complex>::identity(n, n) * lambda;
    let gamma = nullity(&shifted, tol.rank_rtol).clamp(1, alpha);
    let power = normalized_power(&shifted, alpha);
    let w = linalg::smallest_right_singular_vectors(&power, alpha);
    // span{Re w, Im w} is the real invariant subspace of lambda and its conjugate
    let re = w.map(|z| z.re);
    let im = w.map(|z| z.im);
    let both = linalg::hstack([&re, &im], n);
    let basis = linalg::orthonormal_columns(&both, tol.rank_rtol);
    if basis.ncols() != 2 * alpha {
        return Err(SsrError::IllSeparatedSpectrum(format!(
            "real invariant subspace of {} has dimension {}, expected {}",
            eigen_label(lambda),
            basis.ncols(),
            2 * alpha
        )));
    }
    Ok(EigenBlock {
        lambda,
        alpha,
        gamma,
        basis,
    })
}

/// Canonical projections and inclusions of `R^n = V^1 + ... + V^r`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectSum {
    /// Inclusion maps `M_j` (basis coordinates to ambient space).
    pub bases: Vec<Mat>,
    /// Coordinate maps `R_j` (rows of `M^{-1}` aligned with `M_j`).
    pub coordinate_maps: Vec<Mat>,
    /// Oblique projectors `P_j = M_j R_j` onto `V^j` along the other summands.
    pub projectors: Vec<Mat>,
    /// `M = [M_1 | ... | M_r]`.
    pub change_of_basis: Mat,
    pub inverse: Mat,
}

impl DirectSum {
    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn dim(&self, j: usize) -> usize {
        self.bases[j].ncols()
    }

    /// `V^j` coordinates of the component of `x` in `V^j`.
    pub fn coordinates(&self, j: usize, x: &Vector) -> Vector {
        &self.coordinate_maps[j] * x
    }

    /// Embeds `V^j` coordinates into the ambient space.
    pub fn include(&self, j: usize, c: &Vector) -> Vector {
        &self.bases[j] * c
    }
}

/// Builds the canonical projectors from the eigenspace bases.
pub fn canonical_projectors(es: &EigenStructure, tol: &Tolerances) -> Result<DirectSum> {
    let bases: Vec<Mat> = es.blocks.iter().map(|b| b.basis.clone()).collect();
    direct_sum(bases, es.n, tol)
}

/// Direct sum from arbitrary complementary bases.
pub fn direct_sum(bases: Vec<Mat>, n: usize, tol: &Tolerances) -> Result<DirectSum> {
    let m = linalg::hstack(bases.iter(), n);
    if m.ncols() != n {
        return Err(SsrError::NotDirectSum(format!(
            "bases have {} columns in total, expected {n}",
            m.ncols()
        )));
    }
    if linalg::rank(&m, tol.rank_rtol) < n {
        return Err(SsrError::NotDirectSum("assembled basis is singular".into()));
    }
    let inverse = m
        .clone()
        .try_inverse()
        .ok_or_else(|| SsrError::NotDirectSum("assembled basis is singular".into()))?;
    let mut coordinate_maps = Vec::with_capacity(bases.len());
    let mut projectors = Vec::with_capacity(bases.len());
    let mut at = 0;
    for b in &bases {
        let r = inverse.rows(at, b.ncols()).into_owned();
        projectors.push(b * &r);
        coordinate_maps.push(r);
        at += b.ncols();
    }
    Ok(DirectSum {
        bases,
        coordinate_maps,
        projectors,
        change_of_basis: m,
        inverse,
    })
}

/// Restriction `F^(j) = pi_j F iota_j` of a map leaving `V^j` invariant,
/// in `V^j` coordinates.
pub fn restrict_map(f: &Mat, ds: &DirectSum, j: usize, tol: &Tolerances) -> Result<Mat> {
    let mj = &ds.bases[j];
    let fj = &ds.coordinate_maps[j] * f * mj;
    let defect = (f * mj - mj * &fj).norm();
    let limit = tol.residual_threshold(linalg::spectral_norm(f)) * mj.norm().max(1.0);
    if defect > limit {
        return Err(SsrError::NotInvariant(defect));
    }
    Ok(fj)
}
