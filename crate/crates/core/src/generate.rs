//! Seeded random instance families used by tests, the acceptance suite and
//! the benchmark.
//!
//! Systems are built in modal form `J` and moved to random coordinates,
//! `A = T J T^{-1}`. Sensor rows are drawn in modal coordinates, which makes
//! it easy to switch a sensor's view of an eigenvalue block off.

use rand::Rng;

use crate::error::Result;
use crate::model::{LtiSystem, SensorDef};
use crate::reductions::{CsInstance, DegeneracyInstance};
use crate::{Mat, Tolerances, Vector};

/// One block of a modal (real Jordan) form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModalBlock {
    /// A simple real eigenvalue.
    Simple(f64),
    /// A single Jordan chain of the given length (geometric multiplicity one).
    Jordan(f64, usize),
    /// `lambda I_k`: algebraic and geometric multiplicity `k`.
    Repeated(f64, usize),
    /// `[[re, -im], [im, re]]`, a complex-conjugate pair.
    Rotation(f64, f64),
}

impl ModalBlock {
    pub fn size(&self) -> usize {
        match *self {
            ModalBlock::Simple(_) => 1,
            ModalBlock::Jordan(_, k) | ModalBlock::Repeated(_, k) => k,
            ModalBlock::Rotation(..) => 2,
        }
    }

    pub fn gamma_one(&self) -> bool {
        !matches!(*self, ModalBlock::Repeated(_, k) if k > 1)
    }
}

/// Block-diagonal real Jordan form.
pub fn modal_matrix(blocks: &[ModalBlock]) -> Mat {
    let n = blocks.iter().map(|b| b.size()).sum();
    let mut j = Mat::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        match *b {
            ModalBlock::Simple(l) => j[(at, at)] = l,
            ModalBlock::Jordan(l, k) => {
                for i in 0..k {
                    j[(at + i, at + i)] = l;
                    if i + 1 < k {
                        j[(at + i, at + i + 1)] = 1.0;
                    }
                }
            }
            ModalBlock::Repeated(l, k) => {
                for i in 0..k {
                    j[(at + i, at + i)] = l;
                }
            }
            ModalBlock::Rotation(re, im) => {
                j[(at, at)] = re;
                j[(at + 1, at + 1)] = re;
                j[(at, at + 1)] = -im;
                j[(at + 1, at)] = im;
            }
        }
        at += b.size();
    }
    j
}

pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> Mat {
    let g = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let q = g.qr().q();
    let signs = Mat::from_diagonal(&Vector::from_fn(n, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }));
    q * signs
}

/// `Q1 diag(d) Q2` with `d` in `[1, spread]`: condition number at most `spread`.
pub fn random_similarity<R: Rng>(n: usize, spread: f64, rng: &mut R) -> Mat {
    let q1 = random_orthogonal(n, rng);
    let q2 = random_orthogonal(n, rng);
    let d = Vector::from_fn(n, |_, _| if spread > 1.0 { rng.gen_range(1.0..spread) } else { 1.0 });
    q1 * Mat::from_diagonal(&d) * q2
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> Vector {
    Vector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0))
}

/// Entry with magnitude in `[0.4, 1.4]` and random sign.
fn entry<R: Rng>(rng: &mut R) -> f64 {
    let v = rng.gen_range(0.4..1.4);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

/// Eigenvalues in `[-lim, lim]` at least `gap` apart.
pub fn spread_values<R: Rng>(count: usize, lim: f64, gap: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..count).map(|_| rng.gen_range(-lim..lim)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[1] - w[0] >= gap) {
            return v;
        }
    }
}

/// Family of random systems.
#[derive(Clone, Debug, PartialEq)]
pub struct Family {
    pub n_min: usize,
    pub n_max: usize,
    pub sensors_min: usize,
    pub sensors_max: usize,
    /// Rows per sensor are drawn from `1..=max_rows`.
    pub max_rows: usize,
    /// Probability that a sensor is blind to a given block.
    pub mask_prob: f64,
    pub allow_jordan: bool,
    pub allow_repeated: bool,
    pub allow_rotation: bool,
    /// Condition-number bound of the similarity transform.
    pub spread: f64,
}

impl Default for Family {
    fn default() -> Self {
        Family {
            n_min: 1,
            n_max: 6,
            sensors_min: 3,
            sensors_max: 9,
            max_rows: 2,
            mask_prob: 0.3,
            allow_jordan: true,
            allow_repeated: true,
            allow_rotation: true,
            spread: 2.0,
        }
    }
}

impl Family {
    /// Diagonalizable blocks with simple real eigenvalues only.
    pub fn simple() -> Self {
        Family {
            allow_jordan: false,
            allow_repeated: false,
            allow_rotation: false,
            ..Default::default()
        }
    }
}

/// A random modal structure of total size `n`.
pub fn random_blocks<R: Rng>(n: usize, fam: &Family, rng: &mut R) -> Vec<ModalBlock> {
    let mut kinds = Vec::new();
    let mut left = n;
    while left > 0 {
        let mut options = vec![0u8];
        if left >= 2 {
            if fam.allow_jordan {
                options.push(1);
            }
            if fam.allow_repeated {
                options.push(2);
            }
            if fam.allow_rotation {
                options.push(3);
            }
        }
        let k = options[rng.gen_range(0..options.len())];
        kinds.push(k);
        left -= if k == 0 { 1 } else { 2 };
    }
    let values = spread_values(kinds.len(), 1.8, 0.3, rng);
    kinds
        .into_iter()
        .zip(values)
        .map(|(k, l)| match k {
            0 => ModalBlock::Simple(l),
            1 => ModalBlock::Jordan(l, 2),
            2 => ModalBlock::Repeated(l, 2),
            _ => ModalBlock::Rotation(l, rng.gen_range(0.3..1.0)),
        })
        .collect()
}

/// Builds `A = T J T^{-1}` and sensors `C_i = W_i T^{-1}` where the modal rows
/// `W_i` vanish on the masked blocks.
pub fn system_from_blocks<R: Rng>(
    blocks: &[ModalBlock],
    n_sensors: usize,
    fam: &Family,
    rng: &mut R,
) -> Result<LtiSystem> {
    let n: usize = blocks.iter().map(|b| b.size()).sum();
    let j = modal_matrix(blocks);
    let t = random_similarity(n, fam.spread, rng);
    let t_inv = t.clone().try_inverse().expect("similarity is well conditioned");
    let a = &t * j * &t_inv;
    let sensors = (0..n_sensors)
        .map(|i| {
            let rows = rng.gen_range(1..=fam.max_rows.max(1));
            let mut w = Mat::from_fn(rows, n, |_, _| entry(rng));
            let mut at = 0;
            for b in blocks {
                if rng.gen_bool(fam.mask_prob) {
                    w.columns_mut(at, b.size()).fill(0.0);
                }
                at += b.size();
            }
            SensorDef {
                id: i + 1,
                c: w * &t_inv,
            }
        })
        .collect();
    LtiSystem::new(a, sensors)
}

pub fn random_system<R: Rng>(fam: &Family, rng: &mut R) -> Result<LtiSystem> {
    let n = rng.gen_range(fam.n_min..=fam.n_max);
    let n_sensors = rng.gen_range(fam.sensors_min..=fam.sensors_max);
    let blocks = random_blocks(n, fam, rng);
    system_from_blocks(&blocks, n_sensors, fam, rng)
}

/// Companion matrix (ones on the superdiagonal, negated coefficients in the
/// last row) of the monic polynomial with the given real roots.
pub fn companion(roots: &[f64]) -> Mat {
    let n = roots.len();
    // coefficients of prod (x - r), lowest degree first
    let mut coef = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; coef.len() + 1];
        for (k, &c) in coef.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= r * c;
        }
        coef = next;
    }
    let mut a = Mat::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for k in 0..n {
        a[(n - 1, k)] = -coef[k];
    }
    a
}

/// Companion-form system with scalar sensors. Sensor rows are drawn in the
/// Vandermonde eigenbasis `[1, z, z^2, ...]`, so masking a modal entry makes
/// the sensor blind to that eigenvalue.
pub fn companion_system<R: Rng>(roots: &[f64], n_sensors: usize, mask_prob: f64, rng: &mut R) -> Result<LtiSystem> {
    let n = roots.len();
    let a = companion(roots);
    let v = Mat::from_fn(n, n, |i, j| roots[j].powi(i as i32));
    let v_inv = v.try_inverse().expect("distinct roots");
    let w = Mat::from_fn(n_sensors, n, |_, _| if rng.gen_bool(mask_prob) { 0.0 } else { entry(rng) });
    LtiSystem::with_scalar_sensors(a, &(w * v_inv))
}

/// Benchmark cell: `r` Jordan chains of length `nj` (all geometric
/// multiplicities one) and `n_sensors` scalar sensors seeing every block.
pub fn bench_system<R: Rng>(r: usize, nj: usize, n_sensors: usize, rng: &mut R) -> Result<LtiSystem> {
    let values = spread_values(r, 1.5, 0.3, rng);
    let blocks: Vec<ModalBlock> = values
        .into_iter()
        .map(|l| if nj == 1 { ModalBlock::Simple(l) } else { ModalBlock::Jordan(l, nj) })
        .collect();
    let fam = Family {
        max_rows: 1,
        mask_prob: 0.0,
        spread: 1.5,
        ..Default::default()
    };
    system_from_blocks(&blocks, n_sensors, &fam, rng)
}

/// Diagonalizable `n x n` plant with `n_sensors` full-rank `n x n` sensors,
/// so every observability matrix has horizon one.
pub fn scaling_system<R: Rng>(n: usize, n_sensors: usize, rng: &mut R) -> Result<LtiSystem> {
    let values: Vec<f64> = (0..n).map(|k| -1.0 + 2.0 * (k as f64 + 0.5) / n as f64).collect();
    let blocks: Vec<ModalBlock> = values.into_iter().map(ModalBlock::Simple).collect();
    let j = modal_matrix(&blocks);
    let t = random_similarity(n, 1.5, rng);
    let a = &t * j * t.clone().try_inverse().expect("well conditioned");
    let sensors = (0..n_sensors)
        .map(|i| SensorDef {
            id: i + 1,
            c: random_similarity(n, 1.5, rng),
        })
        .collect();
    LtiSystem::new(a, sensors)
}

/// Random integer compressed-sensing instance with `b = F e*` for a sparse
/// integer `e*` (or, with probability 1/4, an arbitrary integer `b`).
pub fn random_cs<R: Rng>(m_max: usize, n_max: usize, rng: &mut R) -> CsInstance {
    let tol = Tolerances::default();
    loop {
        let m = rng.gen_range(1..=m_max);
        let n = rng.gen_range(m + 1..=n_max);
        let f = Mat::from_fn(m, n, |_, _| rng.gen_range(-3i32..=3) as f64);
        let b = if rng.gen_bool(0.25) {
            Vector::from_fn(m, |_, _| rng.gen_range(-4i32..=4) as f64)
        } else {
            let k = rng.gen_range(0..=m.min(n));
            let mut e = Vector::zeros(n);
            for idx in rand::seq::index::sample(rng, n, k) {
                e[idx] = rng.gen_range(1i32..=3) as f64 * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            }
            &f * e
        };
        if let Ok(cs) = CsInstance::new(f, b, &tol) {
            return cs;
        }
    }
}

/// Random tall full-column-rank integer matrix with small entries (so
/// singular square submatrices are common).
pub fn random_degeneracy<R: Rng>(n_max: usize, p_max: usize, rng: &mut R) -> DegeneracyInstance {
    let tol = Tolerances::default();
    loop {
        let n = rng.gen_range(1..=n_max);
        let p = rng.gen_range(n + 1..=p_max.max(n + 1));
        let f = Mat::from_fn(p, n, |_, _| rng.gen_range(-2i32..=2) as f64);
        if let Ok(di) = DegeneracyInstance::new(f, &tol) {
            return di;
        }
    }
}
