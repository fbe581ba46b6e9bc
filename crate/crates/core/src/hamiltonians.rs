//! Interaction and Hamiltonian assembly on the truncated Fock space.
//!
//! The quartic interaction at a time slice is assembled from the four-point
//! kernel, one mode quadruple at a time; an independent x-space quadrature
//! of g(t,x) :phi^4(x): provides the cross-check oracle. The module also
//! hosts the semibound (stabilizing shift) estimate, the scale-of-spaces
//! norms and the sandwiched operator norms used by the bound experiments.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::coupling::{Coupling, FourPointKernel, Profile};
use crate::error::{Error, Result};
use crate::fock::{field_creator_part, free_hamiltonian_diagonal, FockBasis, FockOperator};
use crate::linalg;

/// Dense eigensolver is used for spectral bottom estimates up to this
/// dimension; above it the matrix-free Lanczos path takes over.
pub const DENSE_EIGEN_THRESHOLD: usize = 2000;

/// Byte budget for cached interaction matrices per model.
const INTERACTION_CACHE_BYTES: usize = 64 << 20;

/// Lanczos iteration cap and fixed probe seed; both pinned so repeated runs
/// produce identical estimates.
const LANCZOS_ITERS: usize = 160;
const LANCZOS_SEED: u64 = 0x5eed_0001;

const BINOMIAL_4: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// One separable term of the interaction: the assembled time-independent
/// operator (amplitude folded in) and the temporal profile with its first
/// two derivatives.
struct ModelTerm {
    op: FockOperator,
    chi: [Profile; 3],
}

#[derive(Default)]
struct InteractionCache {
    map: HashMap<u64, Arc<DMatrix<Complex64>>>,
    bytes: usize,
}

/// A coupled model on a truncated Fock space: H(t) = H0 + V_g(t), plus the
/// stabilizing shift M defining H~(t) = H(t) + M.
///
/// V_g(t) = sum_i amp_i chi_i(t) T_i keeps the time dependence in scalars,
/// so each T_i is assembled once. Assembled interactions are cached per
/// requested time behind a read-write lock; the cache is shared across
/// shifted copies of the model because the interaction does not depend on
/// the shift.
pub struct Model {
    basis: Arc<FockBasis>,
    coupling: Coupling,
    shift: f64,
    h0: DVector<f64>,
    terms: Arc<Vec<ModelTerm>>,
    cache: Arc<RwLock<InteractionCache>>,
}

impl Model {
    /// Assemble the per-term interaction operators for a coupling on a
    /// basis. Bump spatial profiles must be supported inside the box; the
    /// shift starts at zero.
    pub fn assemble(basis: Arc<FockBasis>, coupling: Coupling) -> Result<Model> {
        let grid = basis.grid().clone();
        let half_l = 0.5 * grid.box_length();
        let mut terms = Vec::with_capacity(coupling.terms().len());
        for term in coupling.terms() {
            if let Some((lo, hi)) = term.spatial.support() {
                if lo < -half_l || hi > half_l {
                    return Err(Error::InvalidParameter(format!(
                        "spatial support [{lo}, {hi}] exceeds the box [{}, {half_l}]",
                        -half_l
                    )));
                }
            }
            let kernel = FourPointKernel::from_spatial_profile(&grid, &term.spatial)?;
            let op = assemble_quartic(&basis, &kernel, term.amplitude);
            let chi = term.temporal.clone();
            let chi_d1 = chi.derivative();
            let chi_d2 = chi_d1.derivative();
            terms.push(ModelTerm { op, chi: [chi, chi_d1, chi_d2] });
        }
        let h0 = free_hamiltonian_diagonal(&basis);
        Ok(Model {
            basis,
            coupling,
            shift: 0.0,
            h0,
            terms: Arc::new(terms),
            cache: Arc::new(RwLock::new(InteractionCache::default())),
        })
    }

    /// Same model with a different stabilizing shift. Assembled operators
    /// and the interaction cache are shared, not recomputed.
    pub fn with_shift(&self, shift: f64) -> Model {
        Model {
            basis: Arc::clone(&self.basis),
            coupling: self.coupling.clone(),
            shift,
            h0: self.h0.clone(),
            terms: Arc::clone(&self.terms),
            cache: Arc::clone(&self.cache),
        }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn h0_diagonal(&self) -> &DVector<f64> {
        &self.h0
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Assembled operator of one separable term (amplitude included).
    pub fn term_operator(&self, i: usize) -> &FockOperator {
        &self.terms[i].op
    }

    fn interaction_matrix(&self, t: f64, order: usize) -> Result<DMatrix<Complex64>> {
        let dim = self.dimension();
        let mut acc = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for term in self.terms.iter() {
            let c = term.chi[order].evaluate(t);
            if c == 0.0 {
                continue;
            }
            acc += term.op.dense()? * Complex64::new(c, 0.0);
        }
        Ok(acc)
    }

    /// Dense V_g(t), cached per requested time. Concurrent readers share
    /// one assembled matrix; on overflow of the byte budget the cache is
    /// dropped wholesale (values never change, only reuse is lost).
    pub fn interaction_dense(&self, t: f64) -> Result<Arc<DMatrix<Complex64>>> {
        let key = t.to_bits();
        if let Some(hit) = self.cache.read().expect("interaction cache poisoned").map.get(&key) {
            return Ok(Arc::clone(hit));
        }
        let fresh = Arc::new(self.interaction_matrix(t, 0)?);
        let bytes = 16 * self.dimension() * self.dimension();
        let mut cache = self.cache.write().expect("interaction cache poisoned");
        if bytes <= INTERACTION_CACHE_BYTES {
            if cache.bytes + bytes > INTERACTION_CACHE_BYTES {
                cache.map.clear();
                cache.bytes = 0;
            }
            if cache.map.insert(key, Arc::clone(&fresh)).is_none() {
                cache.bytes += bytes;
            }
        }
        Ok(fresh)
    }

    /// Dense V_{g'}(t) or V_{g''}(t): the same assembled operators with
    /// differentiated temporal scalars. Uncached.
    pub fn interaction_derivative_dense(&self, t: f64, order: usize) -> Result<DMatrix<Complex64>> {
        if !(1..=2).contains(&order) {
            return Err(Error::InvalidParameter(format!(
                "temporal derivative order {order} not in 1..=2"
            )));
        }
        self.interaction_matrix(t, order)
    }

    /// Matrix-free action of V_g(t).
    pub fn interaction_matvec(&self, t: f64, x: &DVector<Complex64>) -> DVector<Complex64> {
        let mut acc = DVector::from_element(self.dimension(), Complex64::new(0.0, 0.0));
        for term in self.terms.iter() {
            let c = term.chi[0].evaluate(t);
            if c == 0.0 {
                continue;
            }
            acc += term.op.matvec(x) * Complex64::new(c, 0.0);
        }
        acc
    }

    /// Matrix-free action of H(t) = H0 + V_g(t), optionally shifted.
    pub fn h_matvec(&self, t: f64, x: &DVector<Complex64>, shifted: bool) -> DVector<Complex64> {
        let mut y = self.interaction_matvec(t, x);
        let s = if shifted { self.shift } else { 0.0 };
        for i in 0..self.dimension() {
            y[i] += x[i] * (self.h0[i] + s);
        }
        y
    }

    fn h_matrix(&self, t: f64, shift: f64) -> Result<DMatrix<Complex64>> {
        let v = self.interaction_dense(t)?;
        let mut m = v.as_ref().clone();
        for i in 0..self.dimension() {
            m[(i, i)] += Complex64::new(self.h0[i] + shift, 0.0);
        }
        Ok(m)
    }

    /// Dense H(t) = H0 + V_g(t), without the shift.
    pub fn h_dense(&self, t: f64) -> Result<DMatrix<Complex64>> {
        self.h_matrix(t, 0.0)
    }

    /// Dense H~(t) = H0 + V_g(t) + M. Two shifts differ exactly by
    /// (M - M') off the diagonal and to rounding on it.
    pub fn h_tilde_dense(&self, t: f64) -> Result<DMatrix<Complex64>> {
        self.h_matrix(t, self.shift)
    }

    /// Truncated semibound estimate: max over the time grid of
    /// max(0, -lambda_min(H(t))). Dense eigensolve up to the threshold
    /// dimension, matrix-free Lanczos above.
    pub fn estimate_semibound(&self, times: &[f64]) -> Result<f64> {
        self.estimate_semibound_with_threshold(times, DENSE_EIGEN_THRESHOLD)
    }

    pub fn estimate_semibound_with_threshold(
        &self,
        times: &[f64],
        dense_threshold: usize,
    ) -> Result<f64> {
        if times.is_empty() {
            return Err(Error::InvalidParameter(
                "semibound estimate needs a nonempty time grid".into(),
            ));
        }
        let dim = self.dimension();
        let mut worst = 0.0f64;
        for &t in times {
            let lambda_min = if dim <= dense_threshold {
                linalg::hermitian_eigenvalues(&self.h_dense(t)?)?[0]
            } else {
                let matvec = |x: &DVector<Complex64>| self.h_matvec(t, x, false);
                linalg::lanczos_extremal(dim, LANCZOS_ITERS.min(dim), LANCZOS_SEED, &matvec)?.0
            };
            if -lambda_min > worst {
                worst = -lambda_min;
            }
        }
        Ok(worst)
    }

    /// Shift M = M_g + margin that makes H~(t) >= margin on the grid.
    pub fn stabilizing_shift(&self, times: &[f64], margin: f64) -> Result<f64> {
        if !(margin > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "stabilizing margin must be positive, got {margin}"
            )));
        }
        Ok(self.estimate_semibound(times)? + margin)
    }

    /// Number-operator sandwich at creator weight j:
    /// ||(N+1)^(-j/2) V_g(t) (N+1)^(-(4-j)/2)|| against the kernel norm.
    pub fn sandwich_bound_report(&self, t: f64, j: i32) -> Result<SandwichReport> {
        if j.abs() > 4 {
            return Err(Error::InvalidParameter(format!(
                "creator weight {j} outside |j| <= 4"
            )));
        }
        let v = self.interaction_dense(t)?;
        let dim = self.dimension();
        let occ_weight = |i: usize| (self.basis.total_occupancy(i) as f64) + 1.0;
        let left: Vec<f64> = (0..dim).map(|i| occ_weight(i).powf(-(j as f64) / 2.0)).collect();
        let right: Vec<f64> =
            (0..dim).map(|i| occ_weight(i).powf(-((4 - j) as f64) / 2.0)).collect();
        let mut m = v.as_ref().clone();
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] *= left[r] * right[c];
            }
        }
        let sandwiched_norm = linalg::op_norm(&m)?;
        let kernel_l2 =
            FourPointKernel::from_coupling(self.basis.grid(), &self.coupling, t)?.l2_norm();
        let ratio = if kernel_l2 > 0.0 { sandwiched_norm / kernel_l2 } else { 0.0 };
        Ok(SandwichReport { time: t, creator_weight: j, sandwiched_norm, kernel_l2, ratio })
    }

    /// Finite-difference check that V_{g'} is the time derivative of V_g,
    /// and V_{g''} of V_{g'}, in the resolvent-sandwiched norm. Reports the
    /// defect D(h) per step size and the fitted log-log slopes.
    pub fn smoothness_report(&self, t: f64, h_list: &[f64]) -> Result<SmoothnessReport> {
        if h_list.is_empty() {
            return Err(Error::InvalidParameter("smoothness sweep needs step sizes".into()));
        }
        for pair in h_list.windows(2) {
            if !(pair[0] > pair[1]) {
                return Err(Error::InvalidParameter(
                    "smoothness step sizes must decrease strictly".into(),
                ));
            }
        }
        if !(h_list[h_list.len() - 1] > 0.0) {
            return Err(Error::InvalidParameter("smoothness step sizes must be positive".into()));
        }
        let scale = ScaleNorms::new(&self.basis);
        let first = self.derivative_defects(t, h_list, 0, &scale)?;
        let second = self.derivative_defects(t, h_list, 1, &scale)?;
        Ok(SmoothnessReport {
            time: t,
            first_slope: linalg::fit_loglog_slope(&first),
            second_slope: linalg::fit_loglog_slope(&second),
            first,
            second,
        })
    }

    fn derivative_defects(
        &self,
        t: f64,
        h_list: &[f64],
        base_order: usize,
        scale: &ScaleNorms,
    ) -> Result<Vec<(f64, f64)>> {
        let dim = self.dimension();
        let mut out = Vec::with_capacity(h_list.len());
        for &h in h_list {
            let mut diff = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
            for term in self.terms.iter() {
                let f = &term.chi[base_order];
                let fp = &term.chi[base_order + 1];
                let c = (f.evaluate(t + h) - f.evaluate(t)) / h - fp.evaluate(t);
                if c == 0.0 {
                    continue;
                }
                diff += term.op.dense()? * Complex64::new(c, 0.0);
            }
            out.push((h, scale.sandwich_norm(&diff)?));
        }
        Ok(out)
    }
}

/// Number-operator sandwich of the interaction at one time and creator
/// weight, with the kernel norm it is bounded by.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SandwichReport {
    pub time: f64,
    pub creator_weight: i32,
    pub sandwiched_norm: f64,
    pub kernel_l2: f64,
    pub ratio: f64,
}

/// Defect sweeps D(h) for the first and second temporal derivative of the
/// interaction, with fitted log-log slopes (None when the defects sit at
/// the floating-point floor, e.g. for effectively time-independent g).
#[derive(Debug, Clone, serde::Serialize)]
pub struct SmoothnessReport {
    pub time: f64,
    pub first: Vec<(f64, f64)>,
    pub first_slope: Option<f64>,
    pub second: Vec<(f64, f64)>,
    pub second_slope: Option<f64>,
}

/// Diagonal weights of (H0+1) and its inverse: the scale-of-spaces norms.
pub struct ScaleNorms {
    plus: DVector<f64>,
    minus: DVector<f64>,
}

impl ScaleNorms {
    pub fn new(basis: &FockBasis) -> ScaleNorms {
        let plus = free_hamiltonian_diagonal(basis).map(|w| w + 1.0);
        let minus = plus.map(|w| 1.0 / w);
        ScaleNorms { plus, minus }
    }

    /// ||psi||_{+2} = ||(H0+1) psi||.
    pub fn norm_plus2(&self, psi: &DVector<Complex64>) -> f64 {
        weighted_norm(&self.plus, psi)
    }

    /// ||psi||_{-2} = ||(H0+1)^{-1} psi||.
    pub fn norm_minus2(&self, psi: &DVector<Complex64>) -> f64 {
        weighted_norm(&self.minus, psi)
    }

    /// Operator norm of (H0+1)^{-1} B (H0+1)^{-1}.
    pub fn sandwich_norm(&self, b: &DMatrix<Complex64>) -> Result<f64> {
        let dim = b.nrows();
        let mut m = b.clone();
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] *= self.minus[r] * self.minus[c];
            }
        }
        linalg::op_norm(&m)
    }
}

fn weighted_norm(weights: &DVector<f64>, psi: &DVector<Complex64>) -> f64 {
    psi.iter()
        .zip(weights.iter())
        .map(|(z, w)| (w * z.norm()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Assemble sum over classes j of
/// C(4,j) a*_{l1}..a*_{lj} a_{-l(j+1)}..a_{-l4} with coefficient
/// (4 pi)^{-2} dk^2 conj(W[l]), over all mode quadruples l.
///
/// Annihilators act first (right to left), then creators; a quadruple
/// contributes only when every intermediate state stays inside the
/// truncation, which for this ordering reduces to the final total staying
/// at or below the particle cutoff.
fn assemble_quartic(basis: &Arc<FockBasis>, kernel: &FourPointKernel, amplitude: f64) -> FockOperator {
    let grid = basis.grid();
    let modes = grid.mode_count();
    let n_max = basis.particle_cutoff();
    let dim = basis.dimension();
    let prefactor = amplitude * grid.delta_k().powi(2) / (FOUR_PI * FOUR_PI);
    let values = kernel.values();
    let zero = Complex64::new(0.0, 0.0);

    // slot of the negated mode: -k at slot s lives at M-1-s
    let mirror: Vec<usize> = (0..modes).map(|s| modes - 1 - s).collect();

    let mut triplets: Vec<(usize, usize, Complex64)> = Vec::new();
    let mut column: HashMap<usize, Complex64> = HashMap::new();
    let mut scratch: Vec<u32> = vec![0; modes];

    for col in 0..dim {
        let occ = basis.state(col);
        let total = basis.total_occupancy(col) as i64;
        column.clear();
        for class in 0..=4usize {
            let annihilators = (4 - class) as i64;
            if total < annihilators || total - annihilators + class as i64 > n_max as i64 {
                continue;
            }
            let class_coeff = prefactor * BINOMIAL_4[class];
            let mut idx = 0usize;
            for s1 in 0..modes {
                for s2 in 0..modes {
                    for s3 in 0..modes {
                        for s4 in 0..modes {
                            let w = values[idx];
                            idx += 1;
                            if w == zero {
                                continue;
                            }
                            let slots = [s1, s2, s3, s4];
                            scratch.copy_from_slice(occ);
                            let mut amp = 1.0f64;
                            let mut alive = true;
                            for i in (class..4).rev() {
                                let s = mirror[slots[i]];
                                let n = scratch[s];
                                if n == 0 {
                                    alive = false;
                                    break;
                                }
                                amp *= (n as f64).sqrt();
                                scratch[s] = n - 1;
                            }
                            if !alive {
                                continue;
                            }
                            for i in (0..class).rev() {
                                let s = slots[i];
                                scratch[s] += 1;
                                amp *= (scratch[s] as f64).sqrt();
                            }
                            let row = basis
                                .index_of(&scratch)
                                .expect("image state within the particle cutoff");
                            *column.entry(row).or_insert(zero) +=
                                w.conj() * (class_coeff * amp);
                        }
                    }
                }
            }
        }
        triplets.extend(column.iter().map(|(&row, &v)| (row, col, v)));
    }
    FockOperator::from_triplets(Arc::clone(basis), triplets, true)
}

/// Direct x-space quadrature of integral(g(t,x) :phi^4(x): dx) over the
/// box, the independent oracle for the kernel assembly. Midpoint rule;
/// normal ordering is the binomial expansion sum_j C(4,j) phi+^j phi-^(4-j)
/// in the creator part phi+ and its adjoint.
pub fn xspace_interaction(
    basis: &Arc<FockBasis>,
    coupling: &Coupling,
    t: f64,
    grid_points: usize,
) -> Result<FockOperator> {
    let grid = basis.grid();
    let needed = (4 * grid.cutoff() + 1) as usize;
    if grid_points < needed {
        return Err(Error::InvalidParameter(format!(
            "{grid_points} quadrature points cannot resolve the mode sums, need at least {needed}"
        )));
    }
    let dim = basis.dimension();
    let box_l = grid.box_length();
    let dx = box_l / grid_points as f64;
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = DMatrix::from_element(dim, dim, zero);
    for p in 0..grid_points {
        let x = -0.5 * box_l + (p as f64 + 0.5) * dx;
        let weight = coupling.evaluate(t, x) * dx;
        if weight == 0.0 {
            continue;
        }
        let plus = field_creator_part(basis, x)?.dense()?;
        let mut powers: Vec<DMatrix<Complex64>> = vec![DMatrix::identity(dim, dim)];
        for k in 1..=4 {
            powers.push(&powers[k - 1] * &plus);
        }
        let mut point = DMatrix::from_element(dim, dim, zero);
        for (j, &binom) in BINOMIAL_4.iter().enumerate() {
            point += &powers[j] * powers[4 - j].adjoint() * Complex64::new(binom, 0.0);
        }
        acc += point * Complex64::new(weight, 0.0);
    }
    Ok(FockOperator::from_dense(Arc::clone(basis), acc, true))
}
