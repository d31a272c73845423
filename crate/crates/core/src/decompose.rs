//! Per-eigenvalue subproblems: restricted dynamics, restricted observability
//! maps and the splitting of each sensor's measurement space.
//!
//! For sensor `i` the image `O_i(R^n)` is the direct sum of the images
//! `O_i(V^j)`. Each image gets an orthonormal basis `M~_i^j`; a measurement
//! vector is split by the oblique projectors onto those images, and whatever
//! lies outside `O_i(R^n)` is kept as the sensor's residual.

use crate::error::{Result, SsrError};
use crate::linalg;
use crate::model::{LtiSystem, MeasurementBundle, ObservabilityMatrix, Tolerances};
use crate::search::{self, SearchConfig};
use crate::spectral::{self, DirectSum, EigenStructure};
use crate::{Mat, Vector};

/// Data of one (sensor, eigenvalue) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorBlock {
    /// Orthonormal basis `M~_i^j` of `O_i(V^j)`; zero columns for a zero image.
    pub image: Mat,
    /// `O_i^j` in image coordinates: `image * coords == O_i M_j`.
    pub coords: Mat,
    /// `O_i^j = O_i M_j`, a `(p_i tau_i) x dim_j` matrix.
    pub restricted: Mat,
    /// `C_i M_j`.
    pub c_restricted: Mat,
    /// Oblique projector of the measurement space onto `O_i(V^j)`.
    pub projector: Mat,
}

impl SensorBlock {
    /// Dimension of `O_i(V^j)`.
    pub fn image_dim(&self) -> usize {
        self.image.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.image.ncols() == 0
    }
}

/// Measurement-space splitting of one sensor.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorSplit {
    pub sensor_id: usize,
    pub blocks: Vec<SensorBlock>,
    /// Left inverse of `[M~_i^1 | ... | M~_i^r]`; row block `j` yields image coordinates.
    pub splitter: Mat,
    /// Offsets of each block's rows inside `splitter`.
    pub offsets: Vec<usize>,
}

impl SensorSplit {
    fn image_coordinates(&self, j: usize, y: &Vector) -> Vector {
        let d = self.blocks[j].image_dim();
        self.splitter.rows(self.offsets[j], d) * y
    }
}

/// All per-eigenvalue subproblems of a system.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsystemBundle {
    pub eigen: EigenStructure,
    pub direct_sum: DirectSum,
    /// `A^(j)` in `V^j` coordinates.
    pub a_restricted: Vec<Mat>,
    pub observability: Vec<ObservabilityMatrix>,
    /// One entry per sensor, in id order.
    pub sensors: Vec<SensorSplit>,
}

impl SubsystemBundle {
    /// Number of eigenvalue blocks.
    pub fn len(&self) -> usize {
        self.a_restricted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_restricted.is_empty()
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn dim(&self, j: usize) -> usize {
        self.a_restricted[j].nrows()
    }

    pub fn block(&self, sensor_id: usize, j: usize) -> &SensorBlock {
        &self.sensors[sensor_id - 1].blocks[j]
    }

    /// Ids of sensors whose restricted map on `V^j` is injective.
    pub fn injective_sensors(&self, j: usize) -> Vec<usize> {
        let d = self.dim(j);
        self.sensors
            .iter()
            .filter(|s| s.blocks[j].image_dim() == d)
            .map(|s| s.sensor_id)
            .collect()
    }

    /// Per-sensor image-coordinate maps of subproblem `j`.
    pub fn subsystem_maps(&self, j: usize) -> Vec<Mat> {
        self.sensors.iter().map(|s| s.blocks[j].coords.clone()).collect()
    }
}

/// Builds every subproblem from a precomputed eigenstructure and direct sum.
pub fn decompose_system(
    sys: &LtiSystem,
    es: &EigenStructure,
    ds: &DirectSum,
    tol: &Tolerances,
    cfg: &SearchConfig,
) -> Result<SubsystemBundle> {
    let a = sys.a();
    let a_norm = linalg::spectral_norm(a);
    let a_restricted = (0..ds.len())
        .map(|j| restrict(a, a_norm, ds, j, tol))
        .collect::<Result<Vec<_>>>()?;
    let observability = sys.observability_matrices(tol);
    let work: Vec<(&ObservabilityMatrix, &Mat)> = observability
        .iter()
        .zip(sys.sensors())
        .map(|(o, s)| (o, &s.c))
        .collect();
    let sensors = search::map_items(&work, cfg, |(o, c)| split_sensor(o, c, ds, tol))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(SubsystemBundle {
        eigen: es.clone(),
        direct_sum: ds.clone(),
        a_restricted,
        observability,
        sensors,
    })
}

/// Computes the eigenstructure and the direct sum, then decomposes.
pub fn decompose(sys: &LtiSystem, tol: &Tolerances, cfg: &SearchConfig) -> Result<SubsystemBundle> {
    let es = spectral::eigenstructure(sys.a(), tol)?;
    let ds = spectral::canonical_projectors(&es, tol)?;
    decompose_system(sys, &es, &ds, tol, cfg)
}

fn restrict(a: &Mat, a_norm: f64, ds: &DirectSum, j: usize, tol: &Tolerances) -> Result<Mat> {
    let mj = &ds.bases[j];
    let aj = (&ds.coordinate_maps[j] * a) * mj;
    let defect = (a * mj - mj * &aj).norm();
    if defect > tol.residual_threshold(a_norm) * mj.norm().max(1.0) {
        return Err(SsrError::NotInvariant(defect));
    }
    Ok(aj)
}

fn split_sensor(
    o: &ObservabilityMatrix,
    c: &Mat,
    ds: &DirectSum,
    tol: &Tolerances,
) -> Result<SensorSplit> {
    let rows = o.rows();
    let scale = linalg::spectral_norm(&o.o);
    let mut images = Vec::with_capacity(ds.len());
    let mut restricted = Vec::with_capacity(ds.len());
    for m in &ds.bases {
        let om = &o.o * m;
        images.push(linalg::column_space(&om, tol.rank_rtol, scale));
        restricted.push(om);
    }
    let q = linalg::hstack(images.iter(), rows);
    let total = q.ncols();
    let splitter = if total == 0 {
        Mat::zeros(0, rows)
    } else {
        let sv = linalg::singular_values(&q);
        let smallest = sv.last().copied().unwrap_or(0.0);
        if sv.len() < total || smallest <= linalg::rank_threshold(tol.rank_rtol, 1.0, rows, total) {
            return Err(SsrError::NumericalDegeneracy(format!(
                "images of sensor {} are not independent (smallest singular value {smallest:.3e})",
                o.sensor_id
            )));
        }
        let qt = q.transpose();
        let gram = &qt * &q;
        let chol = gram.cholesky().ok_or_else(|| {
            SsrError::NumericalDegeneracy(format!("image basis of sensor {} is singular", o.sensor_id))
        })?;
        chol.solve(&qt)
    };
    let mut offsets = Vec::with_capacity(images.len());
    let mut blocks = Vec::with_capacity(images.len());
    let mut at = 0;
    for ((image, om), m) in images.into_iter().zip(restricted).zip(&ds.bases) {
        let d = image.ncols();
        let projector = &image * splitter.rows(at, d);
        blocks.push(SensorBlock {
            coords: image.transpose() * &om,
            c_restricted: c * m,
            restricted: om,
            projector,
            image,
        });
        offsets.push(at);
        at += d;
    }
    Ok(SensorSplit {
        sensor_id: o.sensor_id,
        blocks,
        splitter,
        offsets,
    })
}

/// Measurements split along the eigenvalue images.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedMeasurements {
    /// `Y_i^j` in image coordinates, `[sensor index][block]`.
    pub coords: Vec<Vec<Vector>>,
    /// `Y_i^j = P~_i^j Y_i` embedded in measurement space.
    pub parts: Vec<Vec<Vector>>,
    /// Component of `Y_i` outside `O_i(R^n)`.
    pub residuals: Vec<Vector>,
    /// Largest absolute measurement entry (reference scale for thresholds).
    pub y_scale: f64,
    pub raw: MeasurementBundle,
}

impl ProjectedMeasurements {
    pub fn residual_norm(&self, sensor_id: usize) -> f64 {
        self.residuals[sensor_id - 1].norm()
    }
}

/// Splits every `Y_i` into its per-eigenvalue components and residual.
pub fn project_measurements(
    bundle: &SubsystemBundle,
    meas: &MeasurementBundle,
) -> Result<ProjectedMeasurements> {
    if meas.y.len() != bundle.num_sensors() {
        return Err(SsrError::DimensionMismatch(format!(
            "{} measurement vectors for {} sensors",
            meas.y.len(),
            bundle.num_sensors()
        )));
    }
    let mut coords = Vec::with_capacity(meas.y.len());
    let mut parts = Vec::with_capacity(meas.y.len());
    let mut residuals = Vec::with_capacity(meas.y.len());
    for (split, y) in bundle.sensors.iter().zip(&meas.y) {
        if y.len() != split.splitter.ncols() {
            return Err(SsrError::DimensionMismatch(format!(
                "Y_{} has length {}, expected {}",
                split.sensor_id,
                y.len(),
                split.splitter.ncols()
            )));
        }
        let mut in_image = Vector::zeros(y.len());
        let mut cs = Vec::with_capacity(split.blocks.len());
        let mut ps = Vec::with_capacity(split.blocks.len());
        for (j, b) in split.blocks.iter().enumerate() {
            let c = split.image_coordinates(j, y);
            let part = &b.image * &c;
            in_image += &part;
            cs.push(c);
            ps.push(part);
        }
        residuals.push(y - in_image);
        coords.push(cs);
        parts.push(ps);
    }
    Ok(ProjectedMeasurements {
        coords,
        parts,
        residuals,
        y_scale: meas.scale(),
        raw: meas.clone(),
    })
}

/// `x = sum_j M_j part_j`. Every block needs a part.
pub fn recompose_state(parts: &[Option<Vector>], ds: &DirectSum) -> Result<Vector> {
    let missing: Vec<usize> = parts
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_none())
        .map(|(j, _)| j)
        .chain(parts.len()..ds.len())
        .collect();
    if !missing.is_empty() {
        return Err(SsrError::MissingParts(missing));
    }
    if parts.len() > ds.len() {
        return Err(SsrError::DimensionMismatch(format!(
            "{} parts for {} blocks",
            parts.len(),
            ds.len()
        )));
    }
    let n = ds.change_of_basis.nrows();
    let mut x = Vector::zeros(n);
    for (j, p) in parts.iter().enumerate() {
        let p = p.as_ref().expect("checked above");
        if p.len() != ds.dim(j) {
            return Err(SsrError::DimensionMismatch(format!(
                "part {j} has length {}, expected {}",
                p.len(),
                ds.dim(j)
            )));
        }
        x += ds.include(j, p);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dvec;
    use crate::model::HorizonPolicy;

    fn f_system() -> LtiSystem {
        let a = vec![
            vec![1.0, 0.0, 0.0, -2.0],
            vec![0.5, 1.5, -0.5, 2.0],
            vec![-0.5, -0.5, 1.5, 0.0],
            vec![0.0, 0.0, 0.0, 3.0],
        ];
        let c = [
            [3.0, 2.0, 0.0, 2.0],
            [2.0, 3.0, 1.0, -1.0],
            [2.0, 2.0, 0.0, 0.0],
            [2.0, 3.0, -1.0, 0.0],
        ];
        let sensors = c.iter().enumerate().map(|(i, r)| (i + 1, vec![r.to_vec()])).collect::<Vec<_>>();
        crate::validate_system(&a, &sensors).unwrap().with_horizon(HorizonPolicy::Full)
    }

    fn bundle() -> SubsystemBundle {
        decompose(&f_system(), &Tolerances::default(), &SearchConfig::default()).unwrap()
    }

    fn proportional(u: &Mat, v: &[f64]) -> bool {
        let v = dvec(v);
        let u = u.column(0).into_owned();
        let k = u.dot(&v) / v.dot(&v);
        (u - v * k).amax() < 1e-9
    }

    #[test]
    fn sensor_one_image_bases() {
        let b = bundle();
        assert!(proportional(&b.block(1, 0).image, &[1.0, 1.0, 1.0, 1.0]));
        assert!(proportional(&b.block(1, 1).image, &[1.0, 2.0, 4.0, 8.0]));
        assert!(proportional(&b.block(1, 2).image, &[1.0, 3.0, 9.0, 27.0]));
        for j in 0..3 {
            assert_eq!(b.block(1, j).image_dim(), 1);
        }
    }

    #[test]
    fn zero_images_for_lambda_three() {
        let b = bundle();
        for id in [2, 3] {
            let blk = b.block(id, 2);
            assert!(blk.is_zero());
            assert!(blk.restricted.amax() < 1e-12);
            assert!(blk.projector.amax() < 1e-12);
        }
        assert!(!b.block(1, 2).is_zero());
        assert!(!b.block(4, 2).is_zero());
    }

    #[test]
    fn restricted_dynamics() {
        let b = bundle();
        assert!((&b.a_restricted[0] - Mat::identity(2, 2)).amax() < 1e-9);
        assert!((b.a_restricted[1][(0, 0)] - 2.0).abs() < 1e-9);
        assert!((b.a_restricted[2][(0, 0)] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn injective_sensors_match_observers() {
        let b = bundle();
        assert_eq!(b.injective_sensors(0), Vec::<usize>::new());
        assert_eq!(b.injective_sensors(1), vec![1, 2, 3, 4]);
        assert_eq!(b.injective_sensors(2), vec![1, 4]);
    }

    #[test]
    fn projectors_split_identity_on_image() {
        let b = bundle();
        for s in &b.sensors {
            let o = &b.observability[s.sensor_id - 1].o;
            let sum = s.blocks.iter().fold(Mat::zeros(4, 4), |acc, blk| acc + &blk.projector);
            assert!((&sum * o - o).amax() < 1e-8);
            for (j, blk) in s.blocks.iter().enumerate() {
                let pp = &blk.projector * &blk.projector;
                assert!((pp - &blk.projector).amax() < 1e-8);
                // P~ O = O^j R_j
                let lhs = &blk.projector * o;
                let rhs = &blk.restricted * &b.direct_sum.coordinate_maps[j];
                assert!((lhs - rhs).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn sensor_one_split_by_direct_solve() {
        // oracle: solve [v1 v2 v3 r] k = Y_1 with r orthogonal to the image
        let b = bundle();
        let x0 = dvec(&[1.0, -2.0, 0.5, 3.0]);
        let meas = MeasurementBundle::exact(&b.observability, &x0);
        let proj = project_measurements(&b, &meas).unwrap();
        let basis = Mat::from_row_slice(
            4,
            3,
            &[1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 1.0, 4.0, 9.0, 1.0, 8.0, 27.0],
        );
        let k = basis.clone().svd(true, true).solve(&meas.y[0], 1e-14).unwrap();
        for j in 0..3 {
            let expect = basis.column(j) * k[j];
            assert!((&proj.parts[0][j] - expect).amax() < 1e-8);
        }
        assert!(proj.residuals[0].amax() < 1e-8);
    }

    #[test]
    fn exact_measurements_split_by_substate() {
        let b = bundle();
        let x0 = dvec(&[0.3, 1.0, -1.0, 2.0]);
        let meas = MeasurementBundle::exact(&b.observability, &x0);
        let proj = project_measurements(&b, &meas).unwrap();
        for (i, s) in b.sensors.iter().enumerate() {
            for (j, blk) in s.blocks.iter().enumerate() {
                let xj = b.direct_sum.coordinates(j, &x0);
                assert!((&proj.parts[i][j] - &blk.restricted * &xj).amax() < 1e-8);
                assert!((&proj.coords[i][j] - &blk.coords * &xj).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_measurements_give_zero_parts() {
        let b = bundle();
        let meas = MeasurementBundle::exact(&b.observability, &Vector::zeros(4));
        let proj = project_measurements(&b, &meas).unwrap();
        assert!(proj.parts.iter().flatten().all(|p| p.amax() == 0.0));
    }

    #[test]
    fn out_of_image_attack_lands_in_residual() {
        let b = bundle();
        let mut meas = MeasurementBundle::exact(&b.observability, &Vector::zeros(4));
        // O_2 has rank 3; its left kernel direction is outside the image
        let o2 = &b.observability[1].o;
        let svd = o2.clone().svd(true, false);
        let (imin, _) = svd.singular_values.argmin();
        let e = svd.u.unwrap().column(imin).into_owned();
        meas.y[1] = e.clone();
        let proj = project_measurements(&b, &meas).unwrap();
        assert!((proj.residuals[1].norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn recompose_f_example() {
        let b = bundle();
        let ds = &b.direct_sum;
        let m1 = Mat::from_row_slice(4, 2, &[2.0, 0.0, -1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let m2 = dvec(&[0.0, 1.0, -1.0, 0.0]);
        let m3 = dvec(&[-1.0, 1.0, 0.0, 1.0]);
        let x = &m1 * dvec(&[1.0, 0.0]) + &m2 + &m3;
        let parts: Vec<Option<Vector>> = (0..3).map(|j| Some(ds.coordinates(j, &x))).collect();
        let back = recompose_state(&parts, ds).unwrap();
        assert!((back - &x).amax() < 1e-10);
        assert_eq!(x, dvec(&[1.0, 1.0, 0.0, 1.0]));
    }

    #[test]
    fn recompose_reports_missing() {
        let b = bundle();
        let parts = vec![Some(Vector::zeros(2)), None, Some(Vector::zeros(1))];
        match recompose_state(&parts, &b.direct_sum) {
            Err(SsrError::MissingParts(m)) => assert_eq!(m, vec![1]),
            other => panic!("unexpected {other:?}"),
        }
        let zeros: Vec<Option<Vector>> = (0..3).map(|j| Some(Vector::zeros(b.dim(j)))).collect();
        assert_eq!(recompose_state(&zeros, &b.direct_sum).unwrap(), Vector::zeros(4));
    }
}
