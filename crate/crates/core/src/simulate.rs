//! Trajectories, measurements and attack scenarios.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsrError};
use crate::linalg;
use crate::model::{LtiSystem, MeasurementBundle, ObservabilityMatrix, Tolerances};
use crate::observability;
use crate::search::SearchConfig;
use crate::{Mat, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackStrategy {
    Random,
    Stealth,
    Custom,
}

/// Additive corruption of a subset of sensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackScenario {
    /// Sorted ids of attacked sensors.
    pub attacked: Vec<usize>,
    /// `(id, E_i)` for every attacked sensor, in id order.
    pub signals: Vec<(usize, Vector)>,
    pub strategy: AttackStrategy,
    /// A state the corrupted measurements are also consistent with.
    pub alt_state: Option<Vector>,
}

impl AttackScenario {
    pub fn none() -> Self {
        AttackScenario {
            attacked: Vec::new(),
            signals: Vec::new(),
            strategy: AttackStrategy::Custom,
            alt_state: None,
        }
    }

    pub fn custom(signals: Vec<(usize, Vector)>) -> Self {
        let mut signals = signals;
        signals.sort_by_key(|(id, _)| *id);
        AttackScenario {
            attacked: signals.iter().map(|(id, _)| *id).collect(),
            signals,
            strategy: AttackStrategy::Custom,
            alt_state: None,
        }
    }

    pub fn signal(&self, id: usize) -> Option<&Vector> {
        self.signals.iter().find(|(i, _)| *i == id).map(|(_, e)| e)
    }
}

/// `x[0], ..., x[T-1]` with `x[k+1] = A x[k]`.
pub fn simulate_trajectory(sys: &LtiSystem, x0: &Vector, steps: usize) -> Result<Vec<Vector>> {
    if steps == 0 {
        return Err(SsrError::Invalid("trajectory length must be at least 1".into()));
    }
    check_state(sys.n(), x0)?;
    let mut out = Vec::with_capacity(steps);
    out.push(x0.clone());
    for k in 1..steps {
        out.push(sys.a() * &out[k - 1]);
    }
    Ok(out)
}

fn check_state(n: usize, x0: &Vector) -> Result<()> {
    if x0.len() != n {
        return Err(SsrError::DimensionMismatch(format!("x0 has length {}, expected {n}", x0.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SsrError::NonFinite("x0".into()));
    }
    Ok(())
}

/// `Y_i = O_i x0 + E_i + noise`, noise uniform in `[-noise_bound, noise_bound]`.
pub fn measure(
    obs: &[ObservabilityMatrix],
    x0: &Vector,
    scenario: &AttackScenario,
    noise_bound: f64,
    seed: u64,
) -> Result<MeasurementBundle> {
    let n = obs.first().map_or(x0.len(), |o| o.o.ncols());
    check_state(n, x0)?;
    if !(noise_bound.is_finite() && noise_bound >= 0.0) {
        return Err(SsrError::Invalid(format!("noise bound must be non-negative, got {noise_bound}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(obs.len());
    for o in obs {
        let mut yi = &o.o * x0;
        if let Some(e) = scenario.signal(o.sensor_id) {
            if e.len() != yi.len() {
                return Err(SsrError::DimensionMismatch(format!(
                    "E_{} has length {}, expected {}",
                    o.sensor_id,
                    e.len(),
                    yi.len()
                )));
            }
            yi += e;
        }
        if noise_bound > 0.0 {
            for v in yi.iter_mut() {
                *v += rng.gen_range(-noise_bound..=noise_bound);
            }
        }
        y.push(yi);
    }
    if let Some(bad) = scenario.attacked.iter().find(|&&id| id == 0 || id > obs.len()) {
        return Err(SsrError::UnknownSensor(*bad));
    }
    MeasurementBundle::new(obs, y)
}

/// Uniformly chosen support of size `s` with signal entries uniform in
/// `[-magnitude, magnitude]`.
pub fn random_attack(obs: &[ObservabilityMatrix], s: usize, magnitude: f64, seed: u64) -> Result<AttackScenario> {
    if s > obs.len() {
        return Err(SsrError::Invalid(format!("cannot attack {s} of {} sensors", obs.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, obs.len(), s).into_iter().collect();
    picked.sort_unstable();
    let signals = picked
        .iter()
        .map(|&k| {
            let e = Vector::from_fn(obs[k].rows(), |_, _| rng.gen_range(-magnitude..=magnitude));
            (obs[k].sensor_id, e)
        })
        .collect::<Vec<_>>();
    Ok(AttackScenario {
        attacked: signals.iter().map(|(id, _)| *id).collect(),
        signals,
        strategy: AttackStrategy::Random,
        alt_state: None,
    })
}

/// The attacked sensors report the trajectory of `alt` instead of `x0`.
pub fn emulation_attack(obs: &[ObservabilityMatrix], attacked: &[usize], x0: &Vector, alt: &Vector) -> Result<AttackScenario> {
    let d = alt - x0;
    let mut signals = Vec::with_capacity(attacked.len());
    for &id in attacked {
        let o = obs
            .iter()
            .find(|o| o.sensor_id == id)
            .ok_or(SsrError::UnknownSensor(id))?;
        signals.push((id, &o.o * &d));
    }
    let mut sc = AttackScenario::custom(signals);
    sc.alt_state = Some(alt.clone());
    Ok(sc)
}

/// An attack on at most `s` sensors after which the measurements are exactly
/// consistent with two different states. Exists iff the system is not
/// `2s`-sparse observable.
pub fn stealth_attack(
    sys: &LtiSystem,
    s: usize,
    x0: &Vector,
    tol: &Tolerances,
    cfg: &SearchConfig,
) -> Result<AttackScenario> {
    let n = sys.n();
    check_state(n, x0)?;
    let obs = sys.observability_matrices(tol);
    let maps: Vec<Mat> = obs.iter().map(|o| o.o.clone()).collect();
    let report = observability::sparse_search(&maps, n, tol.rank_rtol, 2 * s, cfg);
    if !report.exhaustive {
        return Err(SsrError::BudgetExhausted(report.examined));
    }
    if report.index >= 2 * s as i64 {
        return Err(SsrError::NoStealthAttack(report.index));
    }
    let k = &report.witness;
    let kept: Vec<&Mat> = obs
        .iter()
        .filter(|o| !k.contains(&o.sensor_id))
        .map(|o| &o.o)
        .collect();
    let stack = linalg::vstack(kept.iter().copied(), n);
    let kernel = if stack.nrows() == 0 {
        Mat::identity(n, n)
    } else {
        let scale = linalg::spectral_norm(&linalg::vstack(maps.iter(), n));
        kernel_at_scale(&stack, tol.rank_rtol, scale)
    };
    if kernel.ncols() == 0 {
        return Err(SsrError::NumericalDegeneracy("removal witness has no kernel".into()));
    }
    let mut delta = kernel.column(0).into_owned();
    let (imax, _) = delta.iamax_full();
    if delta[imax] < 0.0 {
        delta = -delta;
    }
    delta *= x0.norm().max(1.0);
    let k1: Vec<usize> = k.iter().copied().take(k.len().div_ceil(2).min(s)).collect();
    let alt = x0 + &delta;
    let mut sc = emulation_attack(&obs, &k1, x0, &alt)?;
    sc.strategy = AttackStrategy::Stealth;
    Ok(sc)
}

fn kernel_at_scale(m: &Mat, rtol: f64, scale: f64) -> Mat {
    let cols = m.ncols();
    let r = linalg::rank_scaled(m, rtol, scale);
    let v = linalg::smallest_right_singular_vectors(m, cols);
    v.columns(r, cols - r).into_owned()
}
