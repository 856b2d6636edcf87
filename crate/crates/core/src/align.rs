//! Least-squares alignment of the evaluated receiver to the reference.
//!
//! Every paired epoch contributes three equations in a shared NED frame:
//!
//! ```text
//! x_ref = R · x_eval + R_body · y_body + y_eval + ε
//! ```
//!
//! `R` is an unconstrained 3×3 block (nine unknowns), `y_body` the lever arm
//! between the two antennas in body axes, `y_eval` a constant NED offset and
//! `R_body` the reference attitude (3-2-1 Euler). The 15 unknowns are ordered
//! `[R row-major; y_body; y_eval]`, so pair i contributes the block row
//! `[X_eval,i | R_body,i | I3]` with `X_eval,i` holding the eval position
//! three times along the block diagonal.
//!
//! The system is reduced to a 16×16 triangular factor by streaming
//! Householder QR over row chunks of `[A | b]`, then solved through the SVD
//! of that factor. `AᵀA` is never formed.

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{euler_to_rotation, EulerAttitude, LocalVector, RotationMatrix3};
use crate::ingest::PairedEpoch;
use crate::stats::{EmpiricalDistribution, PercentileRow, StatsError};

pub const DEFAULT_SIGMA_MAX_M: f64 = 0.10;
/// Hard floor: 15 unknowns at three equations per pair.
pub const MIN_PAIRS: usize = 5;
pub const RECOMMENDED_PAIRS: usize = 200;
pub const RECOMMENDED_HEADING_SPAN_DEG: f64 = 90.0;
/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;
pub const CONDITION_WARNING: f64 = 1e6;

const CHUNK_ROWS: usize = 3 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentModel {
    /// Rotation block, lever arm and global offset.
    Full15,
    /// Global offset fixed at zero.
    NoGlobalOffset,
    /// Rotation fixed at identity and global offset at zero; only the lever
    /// arm is estimated.
    TranslationOnly,
}

impl AlignmentModel {
    pub fn unknowns(self) -> usize {
        match self {
            AlignmentModel::Full15 => 15,
            AlignmentModel::NoGlobalOffset => 12,
            AlignmentModel::TranslationOnly => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlignmentModel::Full15 => "full15",
            AlignmentModel::NoGlobalOffset => "no-global-offset",
            AlignmentModel::TranslationOnly => "translation-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Full15, Self::NoGlobalOffset, Self::TranslationOnly]
            .into_iter()
            .find(|m| m.as_str() == s)
    }

    fn from_unknowns(k: usize) -> Option<Self> {
        match k {
            15 => Some(Self::Full15),
            12 => Some(Self::NoGlobalOffset),
            3 => Some(Self::TranslationOnly),
            _ => None,
        }
    }

    /// Which of the 15 full-model slots each estimated unknown fills.
    fn slots(self) -> std::ops::Range<usize> {
        match self {
            AlignmentModel::Full15 => 0..15,
            AlignmentModel::NoGlobalOffset => 0..12,
            AlignmentModel::TranslationOnly => 9..12,
        }
    }
}

impl fmt::Display for AlignmentModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationSource {
    #[default]
    Raw,
    Orthonormalized,
}

impl RotationSource {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(Self::Raw),
            "orthonormalized" => Some(Self::Orthonormalized),
            _ => None,
        }
    }
}

/// Parameter blocks spanned by the null space of a rank-deficient system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullSpaceClass {
    pub rotation: bool,
    pub lever_arm: bool,
    pub global_offset: bool,
}

impl fmt::Display for NullSpaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.rotation, "rotation"),
            (self.lever_arm, "lever arm"),
            (self.global_offset, "global offset"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect();
        if names.is_empty() {
            f.write_str("unclassified")
        } else {
            f.write_str(&names.join(" + "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignError {
    #[error("insufficient data: {got} usable pairs, at least {needed} required")]
    InsufficientData { needed: usize, got: usize },
    #[error(
        "rank-deficient system: numerical rank {rank} of {unknowns}; {class} not separable \
         (a constant-heading drive cannot tell the lever arm from the global offset; try a reduced model)"
    )]
    RankDeficient {
        rank: usize,
        unknowns: usize,
        class: NullSpaceClass,
        singular_values: Vec<f64>,
    },
    #[error("malformed system: {0}")]
    BadSystem(String),
}

/// One pair reduced to what the solver needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub x_eval: Vector3<f64>,
    pub r_body: Matrix3<f64>,
    pub x_ref: Vector3<f64>,
}

impl Observation {
    pub fn new(t: f64, x_eval: LocalVector, attitude: &EulerAttitude, x_ref: LocalVector) -> Self {
        Self {
            t,
            x_eval: x_eval.to_vector(),
            r_body: euler_to_rotation(attitude).0,
            x_ref: x_ref.to_vector(),
        }
    }

    /// `None` when the evaluated epoch carries no position.
    pub fn from_pair(p: &PairedEpoch) -> Option<Self> {
        p.eval_ned
            .map(|x| Self::new(p.t, x, &p.reference.attitude, p.ref_ned))
    }

    fn yaw(&self) -> f64 {
        self.r_body[(1, 0)].atan2(self.r_body[(0, 0)])
    }

    /// Appends the three rows of this observation, each `unknowns + 1` wide
    /// with the right-hand side last.
    fn push_rows(&self, model: AlignmentModel, out: &mut Vec<f64>) {
        for axis in 0..3 {
            match model {
                AlignmentModel::Full15 | AlignmentModel::NoGlobalOffset => {
                    for block in 0..3 {
                        if block == axis {
                            out.extend(self.x_eval.iter());
                        } else {
                            out.extend([0.0; 3]);
                        }
                    }
                    out.extend(self.r_body.row(axis).iter());
                    if model == AlignmentModel::Full15 {
                        let mut e = [0.0; 3];
                        e[axis] = 1.0;
                        out.extend(e);
                    }
                    out.push(self.x_ref[axis]);
                }
                AlignmentModel::TranslationOnly => {
                    out.extend(self.r_body.row(axis).iter());
                    out.push(self.x_ref[axis] - self.x_eval[axis]);
                }
            }
        }
    }
}

/// The three unknown blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentParameters {
    pub rotation: RotationMatrix3,
    /// Lever arm in body axes (forward, right, down), meters.
    pub y_body: LocalVector,
    /// Global offset in NED, meters.
    pub y_eval: LocalVector,
}

impl AlignmentParameters {
    pub fn identity() -> Self {
        Self {
            rotation: RotationMatrix3::identity(),
            y_body: LocalVector::ZERO,
            y_eval: LocalVector::ZERO,
        }
    }

    pub fn to_array(&self) -> [f64; 15] {
        let mut z = [0.0; 15];
        z[..9].copy_from_slice(&self.rotation.to_row_major());
        z[9..12].copy_from_slice(&self.y_body.to_array());
        z[12..].copy_from_slice(&self.y_eval.to_array());
        z
    }

    pub fn from_array(z: &[f64; 15]) -> Self {
        Self {
            rotation: RotationMatrix3::from_row_major(&z[..9]),
            y_body: LocalVector::new(z[9], z[10], z[11]),
            y_eval: LocalVector::new(z[12], z[13], z[14]),
        }
    }

    /// `R · x_eval + R_body · y_body + y_eval`.
    pub fn predict(&self, o: &Observation) -> Vector3<f64> {
        self.rotation.0 * o.x_eval + o.r_body * self.y_body.to_vector() + self.y_eval.to_vector()
    }

    /// Largest parameter difference expressed in meters: offsets compare
    /// directly, rotation entries are scaled by `position_scale`, the largest
    /// eval position norm the rotation acts on.
    pub fn equivalent_error_m(&self, other: &Self, position_scale: f64) -> f64 {
        let (a, b) = (self.to_array(), other.to_array());
        (0..15)
            .map(|i| {
                let d = (a[i] - b[i]).abs();
                if i < 9 {
                    d * position_scale
                } else {
                    d
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSolution {
    pub model: AlignmentModel,
    /// The rotation block exactly as solved, not constrained to SO(3).
    pub r_eval_ref: RotationMatrix3,
    /// Nearest proper rotation to `r_eval_ref`.
    pub r_orthonormalized: RotationMatrix3,
    pub y_body: LocalVector,
    pub y_eval: LocalVector,
    pub n_points: usize,
    /// `sqrt(Σ|ε|² / 3N)`, meters.
    pub rms_residual: f64,
    /// Singular values of the design matrix of the estimated unknowns,
    /// descending.
    pub singular_values: Vec<f64>,
    pub condition_number: f64,
    pub heading_span_deg: f64,
    /// One-sigma standard errors in the 15-slot parameter order, from the
    /// residual variance; `None` for parameters the model holds fixed.
    pub std_errors: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

impl AlignmentSolution {
    pub fn parameters(&self, source: RotationSource) -> AlignmentParameters {
        AlignmentParameters {
            rotation: match source {
                RotationSource::Raw => self.r_eval_ref,
                RotationSource::Orthonormalized => self.r_orthonormalized,
            },
            y_body: self.y_body,
            y_eval: self.y_eval,
        }
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition_number > CONDITION_WARNING
    }
}

/// Keeps pairs whose reference reports `sigma_h < sigma_max` and whose
/// evaluated epoch has a valid fix.
pub fn select_confident_pairs(pairs: Vec<PairedEpoch>, sigma_max: f64) -> Vec<PairedEpoch> {
    pairs
        .into_iter()
        .filter(|p| p.reference.sigma_h < sigma_max && p.eval.has_valid_fix() && p.eval_ned.is_some())
        .collect()
}

pub fn observations(pairs: &[PairedEpoch]) -> Vec<Observation> {
    pairs.iter().filter_map(Observation::from_pair).collect()
}

/// Dense stacked system of the full model, 3N × 15.
pub fn build_system(pairs: &[PairedEpoch]) -> Result<(DMatrix<f64>, DVector<f64>), AlignError> {
    build_system_for(&observations(pairs), AlignmentModel::Full15)
}

/// Dense system for any model. Fixed parameters are moved to the
/// right-hand side.
pub fn build_system_for(
    obs: &[Observation],
    model: AlignmentModel,
) -> Result<(DMatrix<f64>, DVector<f64>), AlignError> {
    check_count(obs.len())?;
    let k = model.unknowns();
    let mut rows = Vec::with_capacity(obs.len() * 3 * (k + 1));
    for o in obs {
        o.push_rows(model, &mut rows);
    }
    let aug = DMatrix::from_row_slice(obs.len() * 3, k + 1, &rows);
    Ok((aug.columns(0, k).into_owned(), aug.column(k).into_owned()))
}

fn check_count(n: usize) -> Result<(), AlignError> {
    if n < MIN_PAIRS {
        Err(AlignError::InsufficientData { needed: MIN_PAIRS, got: n })
    } else {
        Ok(())
    }
}

/// Streaming QR: keeps only the triangular factor of the rows seen so far.
struct TriangularAccumulator {
    width: usize,
    r: DMatrix<f64>,
    pending: Vec<f64>,
}

impl TriangularAccumulator {
    fn new(width: usize) -> Self {
        Self {
            width,
            r: DMatrix::zeros(0, width),
            pending: Vec::with_capacity(CHUNK_ROWS * width),
        }
    }

    fn extend(&mut self, rows: &[f64]) {
        self.pending.extend_from_slice(rows);
        if self.pending.len() >= CHUNK_ROWS * self.width {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let new_rows = self.pending.len() / self.width;
        let old = self.r.nrows();
        let mut stacked = DMatrix::zeros(old + new_rows, self.width);
        stacked.rows_mut(0, old).copy_from(&self.r);
        stacked
            .rows_mut(old, new_rows)
            .copy_from(&DMatrix::from_row_slice(new_rows, self.width, &self.pending));
        self.pending.clear();
        self.r = stacked.qr().r();
    }

    fn finish(mut self) -> DMatrix<f64> {
        self.flush();
        self.r
    }
}

struct Factored {
    z: Vec<f64>,
    singular_values: Vec<f64>,
    /// Diagonal of (AᵀA)⁻¹.
    inverse_gram_diag: Vec<f64>,
}

/// Solves from the triangular factor of `[A | b]`.
fn solve_factor(model: AlignmentModel, r: &DMatrix<f64>) -> Result<Factored, AlignError> {
    let k = model.unknowns();
    let rows = r.nrows().min(k);
    let ra = DMatrix::from_fn(k, k, |i, j| if i < rows { r[(i, j)] } else { 0.0 });
    let c = DVector::from_fn(k, |i, _| if i < rows { r[(i, k)] } else { 0.0 });
    if ra.iter().any(|v| !v.is_finite()) || c.iter().any(|v| !v.is_finite()) {
        return Err(AlignError::BadSystem("non-finite entries".into()));
    }

    let (u, singular_values, v) = svd(&ra)?;
    let s = &singular_values;

    let tol = RANK_TOLERANCE * singular_values[0];
    let null: Vec<usize> = (0..k).filter(|&j| !(s[j] > tol)).collect();
    if !null.is_empty() {
        return Err(AlignError::RankDeficient {
            rank: k - null.len(),
            unknowns: k,
            class: classify_null_space(model, &v, &null),
            singular_values,
        });
    }

    let mut z = vec![0.0; k];
    let mut inverse_gram_diag = vec![0.0; k];
    for j in 0..k {
        let coef = u.column(j).dot(&c) / s[j];
        for i in 0..k {
            z[i] += v[(i, j)] * coef;
            inverse_gram_diag[i] += (v[(i, j)] / s[j]).powi(2);
        }
    }
    Ok(Factored { z, singular_values, inverse_gram_diag })
}

/// `(U, s, V)`.
type Svd = (DMatrix<f64>, Vec<f64>, DMatrix<f64>);

/// Full SVD `m = U diag(s) Vᵀ` with `s` descending. Computed with faer:
/// nalgebra's iteration loses accuracy on the tightly clustered singular
/// values that the repeated diagonal blocks of this problem produce.
fn svd(m: &DMatrix<f64>) -> Result<Svd, AlignError> {
    let f = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let d = f
        .svd()
        .map_err(|e| AlignError::BadSystem(format!("SVD did not converge: {e:?}")))?;
    let (fu, fv) = (d.U(), d.V());
    let u = DMatrix::from_fn(fu.nrows(), fu.ncols(), |i, j| fu[(i, j)]);
    let v = DMatrix::from_fn(fv.nrows(), fv.ncols(), |i, j| fv[(i, j)]);
    let s = d.S().column_vector().iter().copied().collect();
    Ok((u, s, v))
}

fn classify_null_space(model: AlignmentModel, v: &DMatrix<f64>, null: &[usize]) -> NullSpaceClass {
    let slots = model.slots();
    let mut energy = [0.0; 3];
    for &j in null {
        for (col, slot) in slots.clone().enumerate() {
            energy[block_of(slot)] += v[(col, j)].powi(2);
        }
    }
    let total: f64 = energy.iter().sum();
    let share = |e: f64| total > 0.0 && e / total > 1e-3;
    NullSpaceClass {
        rotation: share(energy[0]),
        lever_arm: share(energy[1]),
        global_offset: share(energy[2]),
    }
}

fn block_of(slot: usize) -> usize {
    match slot {
        0..=8 => 0,
        9..=11 => 1,
        _ => 2,
    }
}

/// Solves the dense system from [`build_system`] or [`build_system_for`];
/// the model is inferred from the column count.
pub fn solve_alignment(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<AlignmentSolution, AlignError> {
    let model = AlignmentModel::from_unknowns(a.ncols())
        .ok_or_else(|| AlignError::BadSystem(format!("{} columns", a.ncols())))?;
    if !a.nrows().is_multiple_of(3) || a.nrows() != b.len() {
        return Err(AlignError::BadSystem(format!(
            "{} rows with {} right-hand sides",
            a.nrows(),
            b.len()
        )));
    }
    let n = a.nrows() / 3;
    check_count(n)?;
    let k = model.unknowns();

    let mut acc = TriangularAccumulator::new(k + 1);
    let mut row = Vec::with_capacity(k + 1);
    for i in 0..a.nrows() {
        row.clear();
        row.extend(a.row(i).iter());
        row.push(b[i]);
        acc.extend(&row);
    }
    let fac = solve_factor(model, &acc.finish())?;
    let rss = (a * DVector::from_column_slice(&fac.z) - b).norm_squared();
    let body_col = if model == AlignmentModel::TranslationOnly { 0 } else { 9 };
    let yaws: Vec<f64> = (0..n)
        .map(|i| a[(3 * i + 1, body_col)].atan2(a[(3 * i, body_col)]))
        .collect();
    Ok(assemble(model, n, fac, rss, &yaws))
}

/// Solves directly from observations without materializing the dense
/// system.
pub fn align_observations(
    obs: &[Observation],
    model: AlignmentModel,
) -> Result<AlignmentSolution, AlignError> {
    check_count(obs.len())?;
    let k = model.unknowns();
    let mut acc = TriangularAccumulator::new(k + 1);
    let mut rows = Vec::with_capacity(3 * (k + 1));
    for o in obs {
        rows.clear();
        o.push_rows(model, &mut rows);
        acc.extend(&rows);
    }
    let fac = solve_factor(model, &acc.finish())?;
    let params = AlignmentParameters::from_array(&full_parameters(model, &fac.z));
    let rss: f64 = obs
        .iter()
        .map(|o| (o.x_ref - params.predict(o)).norm_squared())
        .sum();
    let yaws: Vec<f64> = obs.iter().map(Observation::yaw).collect();
    Ok(assemble(model, obs.len(), fac, rss, &yaws))
}

pub fn align_pairs(pairs: &[PairedEpoch], model: AlignmentModel) -> Result<AlignmentSolution, AlignError> {
    align_observations(&observations(pairs), model)
}

fn full_parameters(model: AlignmentModel, z: &[f64]) -> [f64; 15] {
    let mut full = AlignmentParameters::identity().to_array();
    for (slot, v) in model.slots().zip(z) {
        full[slot] = *v;
    }
    full
}

fn assemble(model: AlignmentModel, n: usize, fac: Factored, rss: f64, yaws: &[f64]) -> AlignmentSolution {
    let k = model.unknowns();
    let params = AlignmentParameters::from_array(&full_parameters(model, &fac.z));
    let dof = 3 * n - k;
    let sigma2 = if dof > 0 { rss / dof as f64 } else { f64::NAN };
    let mut std_errors = vec![None; 15];
    for (slot, g) in model.slots().zip(&fac.inverse_gram_diag) {
        std_errors[slot] = Some((sigma2 * g).sqrt()).filter(|v| v.is_finite());
    }
    let condition_number = fac.singular_values[0] / fac.singular_values[k - 1];
    let heading_span_deg = heading_span_deg(yaws);

    let mut warnings = Vec::new();
    if condition_number > CONDITION_WARNING {
        warnings.push(format!(
            "ill-conditioned system: condition number {condition_number:.3e} exceeds {CONDITION_WARNING:.0e}"
        ));
    }
    if n < RECOMMENDED_PAIRS {
        warnings.push(format!("only {n} pairs; at least {RECOMMENDED_PAIRS} recommended"));
    }
    if model != AlignmentModel::TranslationOnly && heading_span_deg < RECOMMENDED_HEADING_SPAN_DEG {
        warnings.push(format!(
            "heading span {heading_span_deg:.1} deg is below the recommended {RECOMMENDED_HEADING_SPAN_DEG} deg"
        ));
    }

    AlignmentSolution {
        model,
        r_eval_ref: params.rotation,
        r_orthonormalized: nearest_rotation(&params.rotation),
        y_body: params.y_body,
        y_eval: params.y_eval,
        n_points: n,
        rms_residual: (rss / (3 * n) as f64).sqrt(),
        singular_values: fac.singular_values,
        condition_number,
        heading_span_deg,
        std_errors,
        warnings,
    }
}

/// Smallest arc, in degrees, containing every heading.
pub fn heading_span_deg(yaws_rad: &[f64]) -> f64 {
    if yaws_rad.is_empty() {
        return 0.0;
    }
    let mut deg: Vec<f64> = yaws_rad
        .iter()
        .map(|y| y.to_degrees().rem_euclid(360.0))
        .collect();
    deg.sort_by(f64::total_cmp);
    let mut largest_gap = deg[0] + 360.0 - deg[deg.len() - 1];
    for w in deg.windows(2) {
        largest_gap = largest_gap.max(w[1] - w[0]);
    }
    (360.0 - largest_gap).max(0.0)
}

/// Nearest proper rotation in the Frobenius sense: `U diag(1, 1, d) Vᵀ` from
/// the SVD of `m`, with `d` chosen so the determinant is +1.
pub fn nearest_rotation(m: &RotationMatrix3) -> RotationMatrix3 {
    let dense = DMatrix::from_fn(3, 3, |i, j| m.0[(i, j)]);
    let Ok((u, _, v)) = svd(&dense) else {
        return RotationMatrix3(Matrix3::repeat(f64::NAN));
    };
    let u = Matrix3::from_fn(|i, j| u[(i, j)]);
    let vt = Matrix3::from_fn(|i, j| v[(j, i)]);
    // the smallest singular value is last
    let d = (u * vt).determinant();
    let diag = Vector3::new(1.0, 1.0, if d < 0.0 { -1.0 } else { 1.0 });
    RotationMatrix3(u * Matrix3::from_diagonal(&diag) * vt)
}

/// Error components along the vehicle axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyComponents {
    pub longitudinal: f64,
    pub lateral: f64,
    pub vertical: f64,
}

/// Rotates a NED error into body axes: `R_bodyᵀ · ε`.
pub fn project_to_body(r_body: &RotationMatrix3, eps: &LocalVector) -> BodyComponents {
    let v = r_body.0.transpose() * eps.to_vector();
    BodyComponents {
        longitudinal: v.x,
        lateral: v.y,
        vertical: v.z,
    }
}

/// Inverse of [`project_to_body`].
pub fn body_to_ned(r_body: &RotationMatrix3, c: &BodyComponents) -> LocalVector {
    LocalVector::from_vector(r_body.0 * Vector3::new(c.longitudinal, c.lateral, c.vertical))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub t: f64,
    pub epsilon_ned: LocalVector,
    pub lateral: f64,
    pub longitudinal: f64,
    pub vertical: f64,
    /// `sqrt(lateral² + longitudinal²)`.
    pub horizontal: f64,
}

pub fn error_sample(o: &Observation, params: &AlignmentParameters) -> ErrorSample {
    let eps = o.x_ref - params.predict(o);
    let body = o.r_body.transpose() * eps;
    ErrorSample {
        t: o.t,
        epsilon_ned: LocalVector::from_vector(eps),
        longitudinal: body.x,
        lateral: body.y,
        vertical: body.z,
        horizontal: body.x.hypot(body.y),
    }
}

/// Residual of every pair that has an evaluated position, in NED and body
/// axes.
pub fn compute_residuals(
    pairs: &[PairedEpoch],
    solution: &AlignmentSolution,
    source: RotationSource,
) -> Vec<ErrorSample> {
    let params = solution.parameters(source);
    pairs
        .iter()
        .filter_map(Observation::from_pair)
        .map(|o| error_sample(&o, &params))
        .collect()
}

/// Percentile table of error components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n: usize,
    pub lateral: PercentileRow,
    pub longitudinal: PercentileRow,
    pub horizontal: PercentileRow,
    pub vertical: PercentileRow,
}

/// 68/95/99 percentiles of |lateral|, |longitudinal|, horizontal and
/// |vertical|.
pub fn error_summary(samples: &[ErrorSample]) -> Result<ErrorSummary, StatsError> {
    summarize(samples, f64::abs)
}

/// As [`error_summary`] but on signed components, for bias diagnosis.
/// Horizontal stays a magnitude.
pub fn error_summary_signed(samples: &[ErrorSample]) -> Result<ErrorSummary, StatsError> {
    summarize(samples, |v| v)
}

fn summarize(samples: &[ErrorSample], f: fn(f64) -> f64) -> Result<ErrorSummary, StatsError> {
    let row = |g: &dyn Fn(&ErrorSample) -> f64| -> Result<PercentileRow, StatsError> {
        Ok(PercentileRow::upper(&EmpiricalDistribution::from_iter(samples.iter().map(g))?))
    };
    Ok(ErrorSummary {
        n: samples.len(),
        lateral: row(&|s| f(s.lateral))?,
        longitudinal: row(&|s| f(s.longitudinal))?,
        horizontal: row(&|s| s.horizontal)?,
        vertical: row(&|s| f(s.vertical))?,
    })
}

/// Largest eval position norm, the lever over which rotation errors act.
pub fn position_scale(obs: &[Observation]) -> f64 {
    obs.iter().map(|o| o.x_eval.norm()).fold(0.0, f64::max)
}
