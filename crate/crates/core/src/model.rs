//! Plant/sensor data model, tolerances and per-sensor observability matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsrError};
use crate::linalg::{self, from_rows};
use crate::{Mat, Vector};

/// How many row blocks `C_i A^t` an observability matrix stacks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonPolicy {
    /// The smallest horizon reaching the maximal rank (the observability index).
    #[default]
    Minimal,
    /// Always `n` blocks.
    Full,
}

/// Numerical thresholds. All are relative coefficients; the absolute values
/// are derived from the scale of the data they are applied to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Singular values below `rank_rtol * sigma_max * max(rows, cols)` count as zero.
    pub rank_rtol: f64,
    /// Eigenvalues closer than `eig_cluster * (1 + |A|)` are merged.
    pub eig_cluster: f64,
    /// A sensor is consistent when its residual is below `residual * (1 + |Y|)`.
    pub residual: f64,
    /// Estimates closer than `vote * (1 + |Y|)` (max-norm) agree in a vote.
    pub vote: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_rtol: 1e-10,
            eig_cluster: 1e-7,
            residual: 1e-7,
            vote: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rank_rtol", self.rank_rtol),
            ("eig_cluster", self.eig_cluster),
            ("residual", self.residual),
            ("vote", self.vote),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(SsrError::InvalidTolerance(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn cluster_radius(&self, a_norm: f64) -> f64 {
        self.eig_cluster * (1.0 + a_norm)
    }

    pub fn residual_threshold(&self, y_scale: f64) -> f64 {
        self.residual * (1.0 + y_scale)
    }

    pub fn vote_radius(&self, y_scale: f64) -> f64 {
        self.vote * (1.0 + y_scale)
    }
}

/// One sensor: `y_i[k] = C_i x[k] + e_i[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorDef {
    /// 1-based sensor id.
    pub id: usize,
    pub c: Mat,
}

impl SensorDef {
    pub fn rows(&self) -> usize {
        self.c.nrows()
    }
}

/// A validated plant `x[k+1] = A x[k]` with its sensor suite.
#[derive(Clone, Debug, PartialEq)]
pub struct LtiSystem {
    a: Mat,
    sensors: Vec<SensorDef>,
    horizon: HorizonPolicy,
}

impl LtiSystem {
    /// Validates and builds a system. Sensors are sorted by id; ids must be `1..=N`.
    pub fn new(a: Mat, sensors: Vec<SensorDef>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(SsrError::DimensionMismatch(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(SsrError::NonFinite("A".into()));
        }
        if sensors.is_empty() {
            return Err(SsrError::NoSensors);
        }
        let mut sensors = sensors;
        sensors.sort_by_key(|s| s.id);
        for w in sensors.windows(2) {
            if w[0].id == w[1].id {
                return Err(SsrError::DuplicateSensor(w[0].id));
            }
        }
        for (pos, s) in sensors.iter().enumerate() {
            if s.id != pos + 1 {
                return Err(SsrError::Invalid(format!(
                    "sensor ids must be 1..={}, found {}",
                    sensors.len(),
                    s.id
                )));
            }
            if s.c.ncols() != n {
                return Err(SsrError::DimensionMismatch(format!(
                    "C_{} has {} columns, expected {n}",
                    s.id,
                    s.c.ncols()
                )));
            }
            if s.c.nrows() == 0 {
                return Err(SsrError::DimensionMismatch(format!("C_{} has no rows", s.id)));
            }
            if s.c.iter().any(|x| !x.is_finite()) {
                return Err(SsrError::NonFinite(format!("C_{}", s.id)));
            }
        }
        Ok(LtiSystem {
            a,
            sensors,
            horizon: HorizonPolicy::Minimal,
        })
    }

    /// Builds a system with scalar sensors, one per row of `c`.
    pub fn with_scalar_sensors(a: Mat, c: &Mat) -> Result<Self> {
        let sensors = c
            .row_iter()
            .enumerate()
            .map(|(i, r)| SensorDef {
                id: i + 1,
                c: Mat::from_row_slice(1, r.len(), r.clone_owned().as_slice()),
            })
            .collect();
        LtiSystem::new(a, sensors)
    }

    pub fn with_horizon(mut self, horizon: HorizonPolicy) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn horizon(&self) -> HorizonPolicy {
        self.horizon
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of sensors.
    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn sensors(&self) -> &[SensorDef] {
        &self.sensors
    }

    pub fn sensor(&self, id: usize) -> Result<&SensorDef> {
        id.checked_sub(1)
            .and_then(|i| self.sensors.get(i))
            .ok_or(SsrError::UnknownSensor(id))
    }

    pub fn sensor_ids(&self) -> Vec<usize> {
        (1..=self.sensors.len()).collect()
    }

    /// Keeps only the listed sensors, renumbered `1..` in the given order.
    pub fn without_sensors(&self, removed: &[usize]) -> Result<Self> {
        let kept: Vec<SensorDef> = self
            .sensors
            .iter()
            .filter(|s| !removed.contains(&s.id))
            .enumerate()
            .map(|(i, s)| SensorDef {
                id: i + 1,
                c: s.c.clone(),
            })
            .collect();
        Ok(LtiSystem::new(self.a.clone(), kept)?.with_horizon(self.horizon))
    }

    /// Observability matrices of every sensor, in id order.
    pub fn observability_matrices(&self, tol: &Tolerances) -> Vec<ObservabilityMatrix> {
        self.sensors
            .iter()
            .map(|s| build_observability(&self.a, s, self.horizon, tol))
            .collect()
    }
}

/// Validates raw row-major matrices into an [`LtiSystem`].
pub fn validate_system(a: &[Vec<f64>], sensors: &[(usize, Vec<Vec<f64>>)]) -> Result<LtiSystem> {
    let n = a.len();
    let a = from_rows(a, n)
        .ok_or_else(|| SsrError::DimensionMismatch("A must be square".into()))?;
    let mut defs = Vec::with_capacity(sensors.len());
    for (id, rows) in sensors {
        let cols = rows.first().map_or(0, |r| r.len());
        let c = from_rows(rows, cols).ok_or_else(|| {
            SsrError::DimensionMismatch(format!("C_{id} has rows of different lengths"))
        })?;
        defs.push(SensorDef { id: *id, c });
    }
    LtiSystem::new(a, defs)
}

/// Stacked `C_i A^t` blocks of one sensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservabilityMatrix {
    pub sensor_id: usize,
    /// `(p_i * tau) x n`.
    pub o: Mat,
    /// Number of stacked blocks (the horizon of the measurement vector `Y_i`).
    pub tau: usize,
    /// Observability index: smallest horizon whose stack reaches the maximal rank.
    pub index: usize,
    /// Rank of the stack.
    pub rank: usize,
}

impl ObservabilityMatrix {
    pub fn rows(&self) -> usize {
        self.o.nrows()
    }
}

/// Observability matrix and horizon of sensor `id`.
pub fn observability_matrix(
    sys: &LtiSystem,
    id: usize,
    tol: &Tolerances,
) -> Result<ObservabilityMatrix> {
    let s = sys.sensor(id)?;
    Ok(build_observability(sys.a(), s, sys.horizon(), tol))
}

fn build_observability(
    a: &Mat,
    sensor: &SensorDef,
    policy: HorizonPolicy,
    tol: &Tolerances,
) -> ObservabilityMatrix {
    let n = a.nrows();
    let p = sensor.rows();
    let mut blocks: Vec<Mat> = vec![sensor.c.clone()];
    let mut stack = sensor.c.clone();
    let mut prev_rank = linalg::rank(&stack, tol.rank_rtol);
    let mut index = 1;
    // Rank growth stops for good at the first block that adds nothing.
    if prev_rank < n {
        for t in 1..n {
            let next = blocks[t - 1].clone() * a;
            stack = linalg::vstack([&stack, &next], n);
            blocks.push(next);
            let r = linalg::rank(&stack, tol.rank_rtol);
            if r == prev_rank {
                break;
            }
            prev_rank = r;
            index = t + 1;
            if r == n {
                break;
            }
        }
    }
    let tau = match policy {
        HorizonPolicy::Minimal => index,
        HorizonPolicy::Full => n,
    };
    while blocks.len() < tau {
        let next = blocks[blocks.len() - 1].clone() * a;
        blocks.push(next);
    }
    let o = linalg::vstack(blocks.iter().take(tau), n);
    debug_assert_eq!(o.nrows(), p * tau);
    ObservabilityMatrix {
        sensor_id: sensor.id,
        o,
        tau,
        index,
        rank: prev_rank,
    }
}

/// Per-sensor stacked measurements `Y_i = O_i x[0] + E_i`, indexed by id - 1.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementBundle {
    pub y: Vec<Vector>,
}

impl MeasurementBundle {
    /// Checks one entry per sensor with the horizon-consistent length.
    pub fn new(obs: &[ObservabilityMatrix], y: Vec<Vector>) -> Result<Self> {
        if y.len() != obs.len() {
            return Err(SsrError::DimensionMismatch(format!(
                "{} measurement vectors for {} sensors",
                y.len(),
                obs.len()
            )));
        }
        for (o, yi) in obs.iter().zip(&y) {
            if yi.len() != o.rows() {
                return Err(SsrError::DimensionMismatch(format!(
                    "Y_{} has length {}, expected {}",
                    o.sensor_id,
                    yi.len(),
                    o.rows()
                )));
            }
            if yi.iter().any(|x| !x.is_finite()) {
                return Err(SsrError::NonFinite(format!("Y_{}", o.sensor_id)));
            }
        }
        Ok(MeasurementBundle { y })
    }

    /// Attack-free, noise-free measurements of `x0`.
    pub fn exact(obs: &[ObservabilityMatrix], x0: &Vector) -> Self {
        MeasurementBundle {
            y: obs.iter().map(|o| &o.o * x0).collect(),
        }
    }

    /// Largest absolute measurement entry.
    pub fn scale(&self) -> f64 {
        self.y.iter().map(|v| linalg::max_abs(v.as_slice())).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dvec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f_example() -> LtiSystem {
        let a = vec![
            vec![1.0, 0.0, 0.0, -2.0],
            vec![0.5, 1.5, -0.5, 2.0],
            vec![-0.5, -0.5, 1.5, 0.0],
            vec![0.0, 0.0, 0.0, 3.0],
        ];
        let sensors = vec![
            (1, vec![vec![3.0, 2.0, 0.0, 2.0]]),
            (2, vec![vec![2.0, 3.0, 1.0, -1.0]]),
            (3, vec![vec![2.0, 2.0, 0.0, 0.0]]),
            (4, vec![vec![2.0, 3.0, -1.0, 0.0]]),
        ];
        validate_system(&a, &sensors).unwrap()
    }

    #[test]
    fn f_example_is_valid() {
        let sys = f_example();
        assert_eq!(sys.n(), 4);
        assert_eq!(sys.num_sensors(), 4);
    }

    #[test]
    fn wrong_column_count_rejected() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let err = validate_system(&a, &[(1, vec![vec![1.0, 2.0, 3.0]])]).unwrap_err();
        assert!(matches!(err, SsrError::DimensionMismatch(_)));
    }

    #[test]
    fn empty_sensor_list_rejected() {
        let a = vec![vec![1.0]];
        let err = validate_system(&a, &[]).unwrap_err();
        assert_eq!(err.to_string(), "at least one sensor required");
    }

    #[test]
    fn duplicate_and_non_finite_rejected() {
        let a = vec![vec![1.0]];
        let dup = validate_system(&a, &[(1, vec![vec![1.0]]), (1, vec![vec![2.0]])]);
        assert!(matches!(dup, Err(SsrError::DuplicateSensor(1))));
        let nan = validate_system(&[vec![f64::NAN]], &[(1, vec![vec![1.0]])]);
        assert!(matches!(nan, Err(SsrError::NonFinite(_))));
    }

    #[test]
    fn f_example_sensor_one_full_horizon() {
        let sys = f_example().with_horizon(HorizonPolicy::Full);
        let o = observability_matrix(&sys, 1, &Tolerances::default()).unwrap();
        let expected = Mat::from_row_slice(
            4,
            4,
            &[
                3.0, 2.0, 0.0, 2.0, 4.0, 3.0, -1.0, 4.0, 6.0, 5.0, -3.0, 10.0, 10.0, 9.0, -7.0,
                28.0,
            ],
        );
        assert!((&o.o - &expected).amax() < 1e-12);
        assert_eq!(o.tau, 4);
        // three one-dimensional images: the rank saturates after three blocks
        assert_eq!(o.index, 3);
        assert_eq!(o.rank, 3);
    }

    #[test]
    fn f_example_sensor_two_full_horizon() {
        let sys = f_example().with_horizon(HorizonPolicy::Full);
        let o = observability_matrix(&sys, 2, &Tolerances::default()).unwrap();
        let expected = Mat::from_row_slice(
            4,
            4,
            &[
                2.0, 3.0, 1.0, -1.0, 3.0, 4.0, 0.0, -1.0, 5.0, 6.0, -2.0, -1.0, 9.0, 10.0, -6.0,
                -1.0,
            ],
        );
        assert!((&o.o - &expected).amax() < 1e-12);
        assert_eq!(o.index, 2);
    }

    #[test]
    fn identity_plant_has_unit_horizon() {
        let sys = LtiSystem::with_scalar_sensors(
            Mat::identity(3, 3),
            &Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 0.0, 1.0, 0.0]),
        )
        .unwrap();
        for id in 1..=2 {
            let o = observability_matrix(&sys, id, &Tolerances::default()).unwrap();
            assert_eq!(o.tau, 1);
            assert_eq!(o.o, sys.sensor(id).unwrap().c);
        }
        assert!(observability_matrix(&sys, 3, &Tolerances::default()).is_err());
    }

    #[test]
    fn measurement_length_checked() {
        let sys = f_example();
        let obs = sys.observability_matrices(&Tolerances::default());
        let short = vec![dvec(&[1.0]); 4];
        assert!(MeasurementBundle::new(&obs, short).is_err());
        let ok = MeasurementBundle::exact(&obs, &dvec(&[1.0, 0.0, 0.0, 0.0]));
        assert!(MeasurementBundle::new(&obs, ok.y).is_ok());
    }

    #[test]
    fn tolerances_must_be_positive() {
        let mut t = Tolerances::default();
        assert!(t.validate().is_ok());
        t.vote = 0.0;
        assert!(t.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn horizon_is_exact_and_blocks_are_powers(seed in any::<u64>(), n in 1usize..8, p in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            // occasionally rank-deficient sensors
            let rows = Mat::from_fn(p, n, |_, j| if j % 3 == 2 { 0.0 } else { rng.gen_range(-1.0..1.0) });
            let sys = LtiSystem::new(a.clone(), vec![SensorDef { id: 1, c: rows.clone() }]).unwrap();
            let tol = Tolerances::default();
            let o = observability_matrix(&sys, 1, &tol).unwrap();
            let full = observability_matrix(&sys.clone().with_horizon(HorizonPolicy::Full), 1, &tol).unwrap();
            prop_assert!(o.tau >= 1 && o.tau <= n);
            prop_assert_eq!(linalg::rank(&o.o, tol.rank_rtol), linalg::rank(&full.o, tol.rank_rtol));
            let mut power = Mat::identity(n, n);
            for t in 0..n {
                let block = full.o.rows(t * p, p).into_owned();
                let expected = &rows * &power;
                let scale = 1.0 + expected.amax();
                prop_assert!((block - expected).amax() <= 1e-9 * scale);
                power = &power * &a;
            }
        }
    }
}
