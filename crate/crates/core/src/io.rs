//! JSON instance format and report serialization.
//!
//! Instances use row-major nested arrays:
//!
//! ```json
//! {"A": [[1, 0], [0, 1]],
//!  "sensors": [{"id": 1, "C": [[1, 0]]}, {"id": 2, "C": [[0, 1]]}],
//!  "s": 1,
//!  "measurements": [{"sensor": 1, "Y": [0.5]}, {"sensor": 2, "Y": [2]}],
//!  "tolerances": {"rank_rtol": 1e-10}}
//! ```
//!
//! Unknown top-level keys are dropped with a warning. Reports built by the
//! `*_json` functions write matrices as lists of columns and zero maps as
//! `{"zero": true, "rows": r, "cols": c}`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::decompose::SubsystemBundle;
use crate::error::{Result, SsrError};
use crate::linalg::{self, from_rows, to_columns, to_rows};
use crate::model::{HorizonPolicy, LtiSystem, MeasurementBundle, SensorDef, Tolerances};
use crate::observability::{EigObsReport, EigenClassification, SparseObsReport};
use crate::simulate::AttackScenario;
use crate::solvers::SsrSolution;
use crate::spectral::{eigen_label, EigenStructure};
use crate::{Mat, Vector};

const KNOWN_KEYS: [&str; 8] = [
    "A",
    "sensors",
    "s",
    "measurements",
    "tolerances",
    "horizon",
    "scenario",
    "mapping",
];

#[derive(Deserialize, Serialize)]
struct RawSensor {
    id: usize,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
}

#[derive(Deserialize, Serialize)]
struct RawMeasurement {
    sensor: usize,
    #[serde(rename = "Y")]
    y: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    sensors: Vec<RawSensor>,
    s: Option<usize>,
    measurements: Option<Vec<RawMeasurement>>,
    tolerances: Option<Tolerances>,
    horizon: Option<HorizonPolicy>,
    scenario: Option<Value>,
    mapping: Option<Value>,
}

/// A parsed instance file.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub system: LtiSystem,
    pub s: Option<usize>,
    pub measurements: Option<MeasurementBundle>,
    pub tolerances: Tolerances,
    /// Free-form attack description carried along by `simulate`.
    pub scenario: Option<Value>,
    /// Back-translation notes attached by the reductions.
    pub mapping: Option<Value>,
}

impl Instance {
    pub fn new(system: LtiSystem) -> Self {
        Instance {
            system,
            s: None,
            measurements: None,
            tolerances: Tolerances::default(),
            scenario: None,
            mapping: None,
        }
    }
}

/// Parses an instance, returning it with any warnings about ignored keys.
pub fn parse_instance(text: &str) -> Result<(Instance, Vec<String>)> {
    let value: Value = serde_json::from_str(text)?;
    let Value::Object(mut obj) = value else {
        return Err(SsrError::Invalid("instance must be a JSON object".into()));
    };
    let mut warnings = Vec::new();
    let unknown: Vec<String> = obj.keys().filter(|k| !KNOWN_KEYS.contains(&k.as_str())).cloned().collect();
    for k in unknown {
        warnings.push(format!("ignoring unknown key \"{k}\""));
        obj.remove(&k);
    }
    let raw: RawInstance = serde_json::from_value(Value::Object(obj))?;
    let tolerances = raw.tolerances.unwrap_or_default();
    tolerances.validate()?;
    let n = raw.a.len();
    let a = from_rows(&raw.a, n).ok_or_else(|| SsrError::DimensionMismatch("A must be square".into()))?;
    let mut sensors = Vec::with_capacity(raw.sensors.len());
    for s in raw.sensors {
        let cols = s.c.first().map_or(0, |r| r.len());
        let c = from_rows(&s.c, cols)
            .ok_or_else(|| SsrError::DimensionMismatch(format!("C_{} has rows of different lengths", s.id)))?;
        sensors.push(SensorDef { id: s.id, c });
    }
    let system = LtiSystem::new(a, sensors)?.with_horizon(raw.horizon.unwrap_or_default());
    let measurements = match raw.measurements {
        None => None,
        Some(ms) => Some(build_measurements(&system, &tolerances, ms)?),
    };
    Ok((
        Instance {
            system,
            s: raw.s,
            measurements,
            tolerances,
            scenario: raw.scenario,
            mapping: raw.mapping,
        },
        warnings,
    ))
}

fn build_measurements(sys: &LtiSystem, tol: &Tolerances, ms: Vec<RawMeasurement>) -> Result<MeasurementBundle> {
    let obs = sys.observability_matrices(tol);
    let mut y: Vec<Option<Vector>> = vec![None; sys.num_sensors()];
    for m in ms {
        let slot = m
            .sensor
            .checked_sub(1)
            .and_then(|i| y.get_mut(i))
            .ok_or(SsrError::UnknownSensor(m.sensor))?;
        if slot.is_some() {
            return Err(SsrError::DuplicateSensor(m.sensor));
        }
        *slot = Some(Vector::from_vec(m.y));
    }
    let missing: Vec<usize> = y.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i + 1).collect();
    if !missing.is_empty() {
        return Err(SsrError::Invalid(format!("no measurements for sensors {missing:?}")));
    }
    MeasurementBundle::new(&obs, y.into_iter().map(Option::unwrap).collect())
}

/// Serializes an instance in the input format.
pub fn instance_to_json(inst: &Instance) -> Value {
    let sys = &inst.system;
    let mut obj = Map::new();
    obj.insert("A".into(), json!(to_rows(sys.a())));
    obj.insert(
        "sensors".into(),
        Value::Array(
            sys.sensors()
                .iter()
                .map(|s| json!({"id": s.id, "C": to_rows(&s.c)}))
                .collect(),
        ),
    );
    if let Some(s) = inst.s {
        obj.insert("s".into(), json!(s));
    }
    if let Some(m) = &inst.measurements {
        obj.insert(
            "measurements".into(),
            Value::Array(
                m.y.iter()
                    .enumerate()
                    .map(|(i, y)| json!({"sensor": i + 1, "Y": y.as_slice()}))
                    .collect(),
            ),
        );
    }
    if inst.tolerances != Tolerances::default() {
        obj.insert("tolerances".into(), json!(inst.tolerances));
    }
    if sys.horizon() != HorizonPolicy::Minimal {
        obj.insert("horizon".into(), json!(sys.horizon()));
    }
    if let Some(v) = &inst.scenario {
        obj.insert("scenario".into(), v.clone());
    }
    if let Some(v) = &inst.mapping {
        obj.insert("mapping".into(), v.clone());
    }
    Value::Object(obj)
}

/// Parses a state vector given as a JSON array or comma-separated numbers.
pub fn parse_vector(text: &str) -> Result<Vector> {
    let t = text.trim();
    let values: Vec<f64> = if t.starts_with('[') {
        serde_json::from_str(t)?
    } else {
        t.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| SsrError::Invalid(format!("not a number: {p}")))
            })
            .collect::<Result<_>>()?
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SsrError::NonFinite("vector".into()));
    }
    Ok(Vector::from_vec(values))
}

/// Column-major matrix, or a zero marker when every entry is (numerically) zero.
pub fn matrix_json(m: &Mat, zero_tol: f64) -> Value {
    if m.ncols() == 0 || m.nrows() == 0 || linalg::max_abs(m.as_slice()) <= zero_tol {
        json!({"zero": true, "rows": m.nrows(), "cols": m.ncols()})
    } else {
        json!(to_columns(m))
    }
}

pub fn eigenstructure_json(es: &EigenStructure) -> Value {
    json!({
        "n": es.n,
        "blocks": es.blocks.iter().map(|b| json!({
            "label": b.label(),
            "lambda": [b.lambda.re, b.lambda.im],
            "alpha": b.alpha,
            "gamma": b.gamma,
            "basis": to_columns(&b.basis),
        })).collect::<Vec<_>>(),
    })
}

fn labels(es: &EigenStructure, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&j| eigen_label(es.blocks[j].lambda)).collect()
}

pub fn eig_report_json(es: &EigenStructure, r: &EigObsReport) -> Value {
    let mut sets = Map::new();
    for (b, obs) in es.blocks.iter().zip(&r.observers) {
        sets.insert(b.label(), json!(obs));
    }
    json!({"index": r.index, "S": sets})
}

pub fn sparse_report_json(r: &SparseObsReport) -> Value {
    json!({
        "index": r.index,
        "witness": r.witness,
        "exhaustive": r.exhaustive,
        "examined": r.examined,
    })
}

pub fn classification_json(es: &EigenStructure, c: &EigenClassification) -> Value {
    json!({
        "s": c.s,
        "J1": labels(es, &c.j1),
        "J2": labels(es, &c.j2),
        "J3": labels(es, &c.j3),
        "non_exhaustive": labels(es, &c.non_exhaustive),
    })
}

pub fn bundle_json(b: &SubsystemBundle, tol: &Tolerances) -> Value {
    let zero = |m: &Mat, scale: f64| matrix_json(m, tol.rank_rtol * scale.max(1.0) * 1e3);
    let blocks: Vec<Value> = b
        .eigen
        .blocks
        .iter()
        .enumerate()
        .map(|(j, blk)| {
            json!({
                "label": blk.label(),
                "lambda": [blk.lambda.re, blk.lambda.im],
                "basis": to_columns(&b.direct_sum.bases[j]),
                "A_restricted": to_columns(&b.a_restricted[j]),
            })
        })
        .collect();
    let sensors: Vec<Value> = b
        .sensors
        .iter()
        .zip(&b.observability)
        .map(|(s, o)| {
            let scale = linalg::spectral_norm(&o.o);
            json!({
                "id": s.sensor_id,
                "tau": o.tau,
                "index": o.index,
                "O": to_rows(&o.o),
                "blocks": s.blocks.iter().zip(&b.eigen.blocks).map(|(blk, e)| json!({
                    "label": e.label(),
                    "image": matrix_json(&blk.image, 0.0),
                    "O_restricted": zero(&blk.restricted, scale),
                    "projector": zero(&blk.projector, 1.0),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({"blocks": blocks, "sensors": sensors})
}

pub fn solution_json(sol: &SsrSolution, es: Option<&EigenStructure>) -> Value {
    let mut v = serde_json::to_value(sol).expect("solution serializes");
    if let (Some(es), Value::Object(obj)) = (es, &mut v) {
        if !sol.per_eigenvalue_status.is_empty() {
            let mut m = Map::new();
            for (b, st) in es.blocks.iter().zip(&sol.per_eigenvalue_status) {
                m.insert(b.label(), json!(st));
            }
            obj.insert("per_eigenvalue_status".into(), Value::Object(m));
        }
    }
    v
}

pub fn scenario_json(sc: &AttackScenario) -> Value {
    json!({
        "strategy": sc.strategy,
        "attacked": sc.attacked,
        "signals": sc.signals.iter().map(|(id, e)| json!({"sensor": id, "E": e.as_slice()})).collect::<Vec<_>>(),
        "alt_state": sc.alt_state.as_ref().map(|x| x.as_slice().to_vec()),
    })
}
