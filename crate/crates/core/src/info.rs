//! Entropy, mutual information and measurement on small density matrices.
//!
//! All logarithms are base 2. Composite system-demon matrices use
//! system-major ordering: basis index `s * dim_d + d`.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Tolerance for Hermiticity, trace and projector identities.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Eigenvalues down to `-EIGEN_TOL` are treated as rounding and clamped to zero.
pub const EIGEN_TOL: f64 = 1e-10;
pub const MAX_DIM: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {0} outside 1..=64")]
    DimensionOutOfRange(usize),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace {0} differs from 1")]
    BadTrace(f64),
    #[error("matrix has eigenvalue {0:e} below -1e-10")]
    NotPositive(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid projector set: {0}")]
    InvalidProjectors(String),
    #[error("invalid record states: {0}")]
    InvalidRecords(String),
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

fn basis_projector(dim: usize, index: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(index, index)] = C64::new(1.0, 0.0);
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityDistribution {
    weights: Vec<f64>,
}

impl ProbabilityDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self, InfoError> {
        if weights.is_empty() {
            return Err(InfoError::InvalidDistribution("no outcomes".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(InfoError::InvalidDistribution(format!("weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > STRUCTURE_TOL {
            return Err(InfoError::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `-sum p lg p` with `0 lg 0 = 0`, over already-validated weights.
fn entropy_of(weights: impl IntoIterator<Item = f64>) -> f64 {
    let h: f64 = weights
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    h.max(0.0)
}

pub fn shannon_entropy(dist: &ProbabilityDistribution) -> f64 {
    entropy_of(dist.weights.iter().copied())
}

/// Hermitian, unit-trace, positive semidefinite matrix of dimension <= 64.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
    eigenvalues: Vec<f64>,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self, InfoError> {
        if !m.is_square() {
            return Err(InfoError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let dim = m.nrows();
        if dim == 0 || dim > MAX_DIM {
            return Err(InfoError::DimensionOutOfRange(dim));
        }
        let herm = max_abs(&(&m - m.adjoint()));
        if herm > STRUCTURE_TOL {
            return Err(InfoError::NotHermitian(herm));
        }
        let trace = m.trace();
        if (trace.re - 1.0).abs() > STRUCTURE_TOL || trace.im.abs() > STRUCTURE_TOL {
            return Err(InfoError::BadTrace(trace.re));
        }
        let eig = SymmetricEigen::new(m.clone()).eigenvalues;
        let mut eigenvalues = Vec::with_capacity(dim);
        for &l in eig.iter() {
            if l < -EIGEN_TOL {
                return Err(InfoError::NotPositive(l));
            }
            eigenvalues.push(l.max(0.0));
        }
        Ok(Self { m, eigenvalues })
    }

    // Unitary conjugation and partial traces keep the matrix Hermitian in exact
    // arithmetic; symmetrising removes the rounding before validation.
    fn from_hermitian_part(m: CMatrix) -> Result<Self, InfoError> {
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Self::new(h)
    }

    pub fn diagonal(p: &[f64]) -> Result<Self, InfoError> {
        let dist = ProbabilityDistribution::new(p.to_vec())?;
        let n = dist.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &w) in dist.weights().iter().enumerate() {
            m[(i, i)] = C64::new(w, 0.0);
        }
        Self::new(m)
    }

    /// `|psi><psi|` for the normalised `amplitudes`.
    pub fn pure(amplitudes: &[C64]) -> Result<Self, InfoError> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(InfoError::InvalidDistribution("zero state vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|a| a / norm),
        );
        Self::from_hermitian_part(&v * v.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self, InfoError> {
        if dim == 0 {
            return Err(InfoError::DimensionOutOfRange(0));
        }
        Self::diagonal(&vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    /// Eigenvalues with the rounding clamp applied.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `self (x) other`, system-major.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self, InfoError> {
        Self::from_hermitian_part(self.m.kronecker(&other.m))
    }

    /// `U rho U^dagger`.
    pub fn conjugate(&self, u: &CMatrix) -> Result<Self, InfoError> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(InfoError::DimensionMismatch(format!(
                "operator {}x{} on state of dim {}",
                u.nrows(),
                u.ncols(),
                self.dim()
            )));
        }
        Self::from_hermitian_part(u * &self.m * u.adjoint())
    }

    fn check_split(&self, dim_s: usize, dim_d: usize) -> Result<(), InfoError> {
        if dim_s == 0 || dim_d == 0 || dim_s * dim_d != self.dim() {
            return Err(InfoError::DimensionMismatch(format!(
                "{dim_s} x {dim_d} does not factor a state of dim {}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// `Tr_D`: the system marginal.
    pub fn reduce_to_system(&self, dim_s: usize, dim_d: usize) -> Result<Self, InfoError> {
        self.check_split(dim_s, dim_d)?;
        let mut out = CMatrix::zeros(dim_s, dim_s);
        for a in 0..dim_s {
            for b in 0..dim_s {
                out[(a, b)] = (0..dim_d)
                    .map(|d| self.m[(a * dim_d + d, b * dim_d + d)])
                    .sum();
            }
        }
        Self::from_hermitian_part(out)
    }

    /// `Tr_S`: the demon (record) marginal.
    pub fn reduce_to_demon(&self, dim_s: usize, dim_d: usize) -> Result<Self, InfoError> {
        self.check_split(dim_s, dim_d)?;
        let mut out = CMatrix::zeros(dim_d, dim_d);
        for a in 0..dim_d {
            for b in 0..dim_d {
                out[(a, b)] = (0..dim_s)
                    .map(|s| self.m[(s * dim_d + a, s * dim_d + b)])
                    .sum();
            }
        }
        Self::from_hermitian_part(out)
    }
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of(rho.eigenvalues.iter().copied())
}

/// `H(rho_D) + H(rho_S) - H(rho_SD)`.
pub fn mutual_information(
    rho_sd: &DensityMatrix,
    dim_s: usize,
    dim_d: usize,
) -> Result<f64, InfoError> {
    let rho_s = rho_sd.reduce_to_system(dim_s, dim_d)?;
    let rho_d = rho_sd.reduce_to_demon(dim_s, dim_d)?;
    Ok(von_neumann_entropy(&rho_d) + von_neumann_entropy(&rho_s) - von_neumann_entropy(rho_sd))
}

/// `H(sum p_i rho_i) - sum p_i H(rho_i)`.
pub fn holevo_chi(
    p: &ProbabilityDistribution,
    components: &[DensityMatrix],
) -> Result<f64, InfoError> {
    if components.len() != p.len() {
        return Err(InfoError::DimensionMismatch(format!(
            "{} weights for {} components",
            p.len(),
            components.len()
        )));
    }
    let dim = components[0].dim();
    if components.iter().any(|c| c.dim() != dim) {
        return Err(InfoError::DimensionMismatch(
            "components have different dimensions".into(),
        ));
    }
    let mut mix = CMatrix::zeros(dim, dim);
    let mut inner = 0.0;
    for (&w, c) in p.weights().iter().zip(components) {
        mix += c.matrix() * C64::new(w, 0.0);
        inner += w * von_neumann_entropy(c);
    }
    let mix = DensityMatrix::from_hermitian_part(mix)?;
    Ok(von_neumann_entropy(&mix) - inner)
}

/// Complete set of orthogonal projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet {
    projectors: Vec<CMatrix>,
}

impl ProjectorSet {
    pub fn new(projectors: Vec<CMatrix>) -> Result<Self, InfoError> {
        let first = projectors
            .first()
            .ok_or_else(|| InfoError::InvalidProjectors("empty set".into()))?;
        let dim = first.nrows();
        let mut sum = CMatrix::zeros(dim, dim);
        for (i, p) in projectors.iter().enumerate() {
            if p.nrows() != dim || p.ncols() != dim {
                return Err(InfoError::InvalidProjectors(format!(
                    "projector {i} is not {dim}x{dim}"
                )));
            }
            let herm = max_abs(&(p - p.adjoint()));
            let idem = max_abs(&(p * p - p));
            if herm > STRUCTURE_TOL || idem > STRUCTURE_TOL {
                return Err(InfoError::InvalidProjectors(format!(
                    "projector {i} not Hermitian idempotent ({herm:e}, {idem:e})"
                )));
            }
            for (j, q) in projectors.iter().enumerate().skip(i + 1) {
                let overlap = (p * q).trace().norm();
                if overlap > STRUCTURE_TOL {
                    return Err(InfoError::InvalidProjectors(format!(
                        "Tr(P{i} P{j}) = {overlap:e}"
                    )));
                }
            }
            sum += p;
        }
        let gap = max_abs(&(sum - identity(dim)));
        if gap > STRUCTURE_TOL {
            return Err(InfoError::InvalidProjectors(format!(
                "projectors sum to identity only within {gap:e}"
            )));
        }
        Ok(Self { projectors })
    }

    /// One rank-one projector per basis vector.
    pub fn computational(dim: usize) -> Result<Self, InfoError> {
        Self::new((0..dim).map(|i| basis_projector(dim, i)).collect())
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    /// `[P_i, rho] = 0` for all `i`, within `tol`.
    pub fn commutes_with(&self, rho: &DensityMatrix, tol: f64) -> bool {
        let r = rho.matrix();
        self.projectors
            .iter()
            .all(|p| max_abs(&(p * r - r * p)) <= tol)
    }
}

/// Controlled-swap coupling a system observable to demon record states:
/// `U = sum_i P_i (x) V_i` where `V_i` exchanges the blank record `delta_o`
/// with `delta_i` and fixes every other demon basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementUnitary {
    matrix: CMatrix,
    dim_s: usize,
    dim_d: usize,
    delta_o: usize,
    deltas: Vec<usize>,
}

impl MeasurementUnitary {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim_s(&self) -> usize {
        self.dim_s
    }

    pub fn dim_d(&self) -> usize {
        self.dim_d
    }

    pub fn blank(&self) -> usize {
        self.delta_o
    }

    pub fn records(&self) -> &[usize] {
        &self.deltas
    }

    /// `max |(U U)_{ij} - I_{ij}|`.
    pub fn involution_error(&self) -> f64 {
        let n = self.matrix.nrows();
        max_abs(&(&self.matrix * &self.matrix - identity(n)))
    }

    /// `max |(U U^dagger)_{ij} - I_{ij}|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.matrix.nrows();
        max_abs(&(&self.matrix * self.matrix.adjoint() - identity(n)))
    }

    pub fn apply(&self, rho_sd: &DensityMatrix) -> Result<DensityMatrix, InfoError> {
        rho_sd.conjugate(&self.matrix)
    }
}

pub fn build_measurement_unitary(
    projs: &ProjectorSet,
    demon_dim: usize,
    delta_o: usize,
    deltas: &[usize],
) -> Result<MeasurementUnitary, InfoError> {
    if deltas.len() != projs.len() {
        return Err(InfoError::InvalidRecords(format!(
            "{} record states for {} projectors",
            deltas.len(),
            projs.len()
        )));
    }
    if let Some(&bad) = deltas.iter().chain([&delta_o]).find(|&&d| d >= demon_dim) {
        return Err(InfoError::InvalidRecords(format!(
            "index {bad} outside demon dimension {demon_dim}"
        )));
    }
    for (i, a) in deltas.iter().enumerate() {
        if deltas[i + 1..].contains(a) {
            return Err(InfoError::InvalidRecords(format!(
                "record state {a} used for more than one outcome"
            )));
        }
    }
    let dim_s = projs.dim();
    if dim_s * demon_dim > MAX_DIM {
        return Err(InfoError::DimensionOutOfRange(dim_s * demon_dim));
    }
    let one = C64::new(1.0, 0.0);
    let mut u = CMatrix::zeros(dim_s * demon_dim, dim_s * demon_dim);
    for (p, &di) in projs.projectors().iter().zip(deltas) {
        let mut v = identity(demon_dim);
        if di != delta_o {
            v[(delta_o, delta_o)] = C64::default();
            v[(di, di)] = C64::default();
            v[(di, delta_o)] = one;
            v[(delta_o, di)] = one;
        }
        u += p.kronecker(&v);
    }
    Ok(MeasurementUnitary {
        matrix: u,
        dim_s,
        dim_d: demon_dim,
        delta_o,
        deltas: deltas.to_vec(),
    })
}

/// Entropy bookkeeping of one system-demon measurement.
#[derive(Debug, Clone, Serialize)]
pub struct MeasurementAudit {
    /// Outcome probabilities `p_i = Tr(P_i rho_S)`.
    pub outcome_probabilities: Vec<f64>,
    /// Joint entropy of `rho_S (x) |delta_o><delta_o|`.
    pub h_before: f64,
    /// Joint entropy right after the unitary coupling.
    pub h_coherent: f64,
    /// Joint entropy once the record states have decohered.
    pub h_after: f64,
    pub delta_h_d: f64,
    pub delta_i_sd: f64,
    pub commuting: bool,
    /// Holevo quantity of the post-measurement ensemble, non-commuting case only.
    pub chi: Option<f64>,
    pub involution_error: f64,
    pub unitarity_error: f64,
}

/// Couples `rho_S` to a blank demon register with the controlled-swap unitary
/// (blank = demon state 0, outcome `i` recorded in state `i + 1`), lets the
/// records decohere, and reports how entropy moves between system and memory.
pub fn measurement_entropy_audit(
    rho_s: &DensityMatrix,
    projs: &ProjectorSet,
    demon_dim: usize,
) -> Result<MeasurementAudit, InfoError> {
    let dim_s = rho_s.dim();
    if projs.dim() != dim_s {
        return Err(InfoError::DimensionMismatch(format!(
            "projectors act on dim {}, state has dim {dim_s}",
            projs.dim()
        )));
    }
    if demon_dim < projs.len() + 1 {
        return Err(InfoError::DimensionMismatch(format!(
            "demon needs at least {} states, got {demon_dim}",
            projs.len() + 1
        )));
    }
    let deltas: Vec<usize> = (1..=projs.len()).collect();
    let u = build_measurement_unitary(projs, demon_dim, 0, &deltas)?;

    let blank = DensityMatrix::new(basis_projector(demon_dim, 0))?;
    let before = rho_s.tensor(&blank)?;
    let coherent = u.apply(&before)?;

    let mut decohered = CMatrix::zeros(dim_s * demon_dim, dim_s * demon_dim);
    for d in 0..demon_dim {
        let k = identity(dim_s).kronecker(&basis_projector(demon_dim, d));
        decohered += &k * coherent.matrix() * &k;
    }
    let after = DensityMatrix::from_hermitian_part(decohered)?;

    let h_d = |r: &DensityMatrix| -> Result<f64, InfoError> {
        Ok(von_neumann_entropy(&r.reduce_to_demon(dim_s, demon_dim)?))
    };
    let delta_h_d = h_d(&after)? - h_d(&before)?;
    let delta_i_sd = mutual_information(&after, dim_s, demon_dim)?
        - mutual_information(&before, dim_s, demon_dim)?;

    let r = rho_s.matrix();
    let probs: Vec<f64> = projs
        .projectors()
        .iter()
        .map(|p| (p * r).trace().re.max(0.0))
        .collect();
    let commuting = projs.commutes_with(rho_s, EIGEN_TOL);
    let chi = if commuting {
        None
    } else {
        let mut weights = Vec::new();
        let mut components = Vec::new();
        for (p, &w) in projs.projectors().iter().zip(&probs) {
            if w > EIGEN_TOL {
                let branch = (p * r * p) * C64::new(1.0 / w, 0.0);
                weights.push(w);
                components.push(DensityMatrix::from_hermitian_part(branch)?);
            }
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Some(holevo_chi(&ProbabilityDistribution::new(weights)?, &components)?)
    };

    Ok(MeasurementAudit {
        outcome_probabilities: probs,
        h_before: von_neumann_entropy(&before),
        h_coherent: von_neumann_entropy(&coherent),
        h_after: von_neumann_entropy(&after),
        delta_h_d,
        delta_i_sd,
        commuting,
        chi,
        involution_error: u.involution_error(),
        unitarity_error: u.unitarity_error(),
    })
}
