//! Truncated bosonic Fock space over a finite momentum grid.
//!
//! Modes live on the symmetric grid k_j = 2*pi*j/L for j in -J..=J, with
//! relativistic dispersion omega_j = sqrt(k_j^2 + m^2). States are occupation
//! vectors with total particle number at most the configured cutoff, ordered
//! by total number and then lexicographically. Discrete ladder operators
//! correspond to the continuum ones through a(k_j) ~ a_j / sqrt(delta_k).

use crate::sparse::CsrMatrix;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::Arc;

/// Default cap on the basis dimension; enumeration refuses to go beyond it.
pub const DEFAULT_DIMENSION_LIMIT: usize = 20_000;

/// Operators on bases at or below this dimension are stored dense.
pub const DENSE_CUTOFF: usize = 512;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Symmetric momentum grid with box length L, mass m and mode cutoff J.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    mass: f64,
    box_length: f64,
    cutoff: i64,
}

impl ModeGrid {
    pub fn new(mass: f64, box_length: f64, cutoff: i64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "box length must be positive, got {box_length}"
            )));
        }
        if cutoff < 0 {
            return Err(Error::InvalidParameter(format!(
                "mode cutoff must be non-negative, got {cutoff}"
            )));
        }
        Ok(ModeGrid { mass, box_length, cutoff })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }

    /// Number of modes, 2J + 1.
    pub fn mode_count(&self) -> usize {
        (2 * self.cutoff + 1) as usize
    }

    /// Grid spacing 2*pi/L.
    pub fn delta_k(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.box_length
    }

    /// Momentum of mode j.
    pub fn momentum(&self, j: i64) -> f64 {
        self.delta_k() * j as f64
    }

    /// Dispersion omega_j = sqrt(k_j^2 + m^2).
    pub fn omega(&self, j: i64) -> f64 {
        let k = self.momentum(j);
        (k * k + self.mass * self.mass).sqrt()
    }

    /// Mode indices -J..=J in grid order.
    pub fn modes(&self) -> impl Iterator<Item = i64> {
        -self.cutoff..=self.cutoff
    }

    pub fn check_mode(&self, j: i64) -> Result<()> {
        if j.abs() > self.cutoff {
            Err(Error::ModeOutOfRange { index: j, cutoff: self.cutoff })
        } else {
            Ok(())
        }
    }

    /// Storage slot of mode j in occupation vectors.
    pub fn slot(&self, j: i64) -> usize {
        (j + self.cutoff) as usize
    }

    /// Mode index stored at a slot.
    pub fn mode_at(&self, slot: usize) -> i64 {
        slot as i64 - self.cutoff
    }
}

/// Occupation-number basis with total particle number at most `n_max`.
#[derive(Debug)]
pub struct FockBasis {
    grid: ModeGrid,
    n_max: u32,
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl FockBasis {
    /// Enumerate all occupation vectors with the default dimension cap.
    pub fn enumerate(grid: ModeGrid, n_max: u32) -> Result<Arc<Self>> {
        Self::enumerate_with_limit(grid, n_max, DEFAULT_DIMENSION_LIMIT)
    }

    /// Enumerate all occupation vectors, refusing when the dimension would
    /// exceed `limit`. States are ordered by total particle number, ties
    /// broken lexicographically on the occupation vector.
    pub fn enumerate_with_limit(grid: ModeGrid, n_max: u32, limit: usize) -> Result<Arc<Self>> {
        let modes = grid.mode_count();
        let dim = basis_dimension(modes, n_max)
            .ok_or_else(|| Error::InvalidParameter("basis dimension overflows".into()))?;
        if dim > limit {
            return Err(Error::ResourceLimit { dim, limit });
        }
        let mut states = Vec::with_capacity(dim);
        let mut current = vec![0u32; modes];
        for total in 0..=n_max {
            push_compositions(&mut states, &mut current, 0, total);
        }
        debug_assert_eq!(states.len(), dim);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Arc::new(FockBasis { grid, n_max, states, index }))
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn particle_cutoff(&self) -> u32 {
        self.n_max
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &[u32] {
        &self.states[idx]
    }

    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn total_occupancy(&self, idx: usize) -> u32 {
        self.states[idx].iter().sum()
    }

    /// Stable digest of the basis layout, used in dump headers and report
    /// provenance.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.grid.mass.to_bits().to_le_bytes());
        h.update(self.grid.box_length.to_bits().to_le_bytes());
        h.update(self.grid.cutoff.to_le_bytes());
        h.update(self.n_max.to_le_bytes());
        h.update((self.states.len() as u64).to_le_bytes());
        let out = h.finalize();
        out[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Number of occupation vectors over `modes` slots with total at most `n_max`:
/// sum over n of C(modes + n - 1, n).
pub fn basis_dimension(modes: usize, n_max: u32) -> Option<usize> {
    let mut total: usize = 0;
    for n in 0..=n_max as usize {
        total = total.checked_add(binomial(modes + n - 1, n)?)?;
    }
    Some(total)
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

fn push_compositions(states: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, slot: usize, remaining: u32) {
    if slot + 1 == current.len() {
        current[slot] = remaining;
        states.push(current.clone());
        current[slot] = 0;
        return;
    }
    for here in 0..=remaining {
        current[slot] = here;
        push_compositions(states, current, slot + 1, remaining - here);
    }
    current[slot] = 0;
}

enum Storage {
    Dense(DMatrix<Complex64>),
    Sparse(CsrMatrix),
}

/// A linear operator on a [`FockBasis`], stored dense below
/// [`DENSE_CUTOFF`] and compressed-sparse above.
pub struct FockOperator {
    basis: Arc<FockBasis>,
    storage: Storage,
    hermitian_claim: bool,
}

impl FockOperator {
    pub fn from_triplets(
        basis: Arc<FockBasis>,
        triplets: Vec<(usize, usize, Complex64)>,
        hermitian_claim: bool,
    ) -> Self {
        Self::from_triplets_with_cutoff(basis, triplets, hermitian_claim, DENSE_CUTOFF)
    }

    /// Like [`FockOperator::from_triplets`] but with an explicit dense/sparse
    /// switchover, so both storage paths can be exercised at any size.
    pub fn from_triplets_with_cutoff(
        basis: Arc<FockBasis>,
        triplets: Vec<(usize, usize, Complex64)>,
        hermitian_claim: bool,
        dense_cutoff: usize,
    ) -> Self {
        let dim = basis.dimension();
        let storage = if dim <= dense_cutoff {
            let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
            for (r, c, v) in triplets {
                m[(r, c)] += v;
            }
            Storage::Dense(m)
        } else {
            Storage::Sparse(CsrMatrix::from_triplets(dim, triplets))
        };
        FockOperator { basis, storage, hermitian_claim }
    }

    pub fn from_dense(basis: Arc<FockBasis>, matrix: DMatrix<Complex64>, hermitian_claim: bool) -> Self {
        assert_eq!(matrix.nrows(), basis.dimension());
        assert_eq!(matrix.ncols(), basis.dimension());
        FockOperator { basis, storage: Storage::Dense(matrix), hermitian_claim }
    }

    pub fn from_real_diagonal(basis: Arc<FockBasis>, diag: &[f64]) -> Self {
        assert_eq!(diag.len(), basis.dimension());
        let triplets = diag
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, Complex64::new(v, 0.0)))
            .collect();
        Self::from_triplets(basis, triplets, true)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dimension()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn hermitian_claim(&self) -> bool {
        self.hermitian_claim
    }

    /// Dense view of the matrix. Refuses above a hard cap to avoid
    /// accidentally materializing huge operators.
    pub fn dense(&self) -> Result<DMatrix<Complex64>> {
        match &self.storage {
            Storage::Dense(m) => Ok(m.clone()),
            Storage::Sparse(s) => {
                if self.dim() > 4096 {
                    Err(Error::DenseTooLarge(self.dim()))
                } else {
                    Ok(s.to_dense())
                }
            }
        }
    }

    pub fn matvec(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        match &self.storage {
            Storage::Dense(m) => m * x,
            Storage::Sparse(s) => s.matvec(x),
        }
    }

    pub fn frobenius(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m.norm(),
            Storage::Sparse(s) => s.frobenius(),
        }
    }

    pub fn adjoint(&self) -> FockOperator {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.adjoint()),
            Storage::Sparse(s) => Storage::Sparse(s.adjoint()),
        };
        FockOperator {
            basis: Arc::clone(&self.basis),
            storage,
            hermitian_claim: self.hermitian_claim,
        }
    }

    /// Frobenius norm of A - A^dagger.
    pub fn hermiticity_defect(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => (m - m.adjoint()).norm(),
            Storage::Sparse(s) => s.sub_frobenius(&s.adjoint()),
        }
    }

    /// Whether the hermiticity defect is within the accepted roundoff band
    /// relative to the operator size.
    pub fn verify_hermitian_claim(&self) -> bool {
        !self.hermitian_claim || self.hermiticity_defect() <= 1e-12 * self.frobenius().max(1.0)
    }

    pub fn scaled(&self, factor: Complex64) -> FockOperator {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m * factor),
            Storage::Sparse(s) => {
                let mut t = s.clone();
                t.scale(factor);
                Storage::Sparse(t)
            }
        };
        FockOperator {
            basis: Arc::clone(&self.basis),
            storage,
            hermitian_claim: self.hermitian_claim && factor.im == 0.0,
        }
    }

    /// Dense product self * other.
    pub fn compose(&self, other: &FockOperator) -> Result<FockOperator> {
        if !Arc::ptr_eq(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        let a = self.dense()?;
        let b = other.dense()?;
        Ok(FockOperator::from_dense(Arc::clone(&self.basis), a * b, false))
    }

    pub fn add(&self, other: &FockOperator) -> Result<FockOperator> {
        if !Arc::ptr_eq(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        let a = self.dense()?;
        let b = other.dense()?;
        Ok(FockOperator::from_dense(
            Arc::clone(&self.basis),
            a + b,
            self.hermitian_claim && other.hermitian_claim,
        ))
    }
}

/// Annihilation operator a_j: <n - e_j| a_j |n> = sqrt(n_j).
pub fn annihilator(basis: &Arc<FockBasis>, j: i64) -> Result<FockOperator> {
    basis.grid().check_mode(j)?;
    let slot = basis.grid().slot(j);
    let mut triplets = Vec::new();
    let mut scratch;
    for (idx, occ) in basis.states().iter().enumerate() {
        let n_j = occ[slot];
        if n_j == 0 {
            continue;
        }
        scratch = occ.clone();
        scratch[slot] = n_j - 1;
        let target = basis
            .index_of(&scratch)
            .expect("occupation below cutoff is always enumerated");
        triplets.push((target, idx, Complex64::new((n_j as f64).sqrt(), 0.0)));
    }
    Ok(FockOperator::from_triplets(Arc::clone(basis), triplets, false))
}

/// Creation operator, the adjoint of [`annihilator`]. States already at the
/// particle cutoff are annihilated rather than mapped out of the space.
pub fn creator(basis: &Arc<FockBasis>, j: i64) -> Result<FockOperator> {
    Ok(annihilator(basis, j)?.adjoint())
}

/// Total number operator, diagonal in the occupation basis.
pub fn number_operator(basis: &Arc<FockBasis>) -> FockOperator {
    let diag: Vec<f64> = (0..basis.dimension())
        .map(|i| basis.total_occupancy(i) as f64)
        .collect();
    FockOperator::from_real_diagonal(Arc::clone(basis), &diag)
}

/// Free Hamiltonian H_0 = sum_j omega_j n_j, diagonal in the occupation
/// basis.
pub fn free_hamiltonian(basis: &Arc<FockBasis>) -> FockOperator {
    let grid = basis.grid();
    let omegas: Vec<f64> = grid.modes().map(|j| grid.omega(j)).collect();
    let diag: Vec<f64> = basis
        .states()
        .iter()
        .map(|occ| occ.iter().zip(&omegas).map(|(&n, &w)| n as f64 * w).sum())
        .collect();
    FockOperator::from_real_diagonal(Arc::clone(basis), &diag)
}

/// Diagonal of the free Hamiltonian, for scale-of-spaces norms.
pub fn free_hamiltonian_diagonal(basis: &FockBasis) -> DVector<f64> {
    let grid = basis.grid();
    let omegas: Vec<f64> = grid.modes().map(|j| grid.omega(j)).collect();
    DVector::from_iterator(
        basis.dimension(),
        basis
            .states()
            .iter()
            .map(|occ| occ.iter().zip(&omegas).map(|(&n, &w)| n as f64 * w).sum()),
    )
}

/// Creator part of the field at position x:
/// (4 pi)^(-1/2) sqrt(delta_k) sum_j omega_j^(-1/2) e^(-i k_j x) a_j^dagger.
pub fn field_creator_part(basis: &Arc<FockBasis>, x: f64) -> Result<FockOperator> {
    let grid = basis.grid();
    let half_l = 0.5 * grid.box_length();
    if !(x >= -half_l && x <= half_l) {
        return Err(Error::InvalidParameter(format!(
            "position {x} outside the box [-{half_l}, {half_l}]"
        )));
    }
    let scale = (grid.delta_k() / FOUR_PI).sqrt();
    let mut triplets = Vec::new();
    let n_max = basis.particle_cutoff();
    let mut scratch;
    for (idx, occ) in basis.states().iter().enumerate() {
        let total: u32 = occ.iter().sum();
        if total >= n_max {
            continue;
        }
        for j in grid.modes() {
            let slot = grid.slot(j);
            let coeff = Complex64::from_polar(
                scale / grid.omega(j).sqrt(),
                -grid.momentum(j) * x,
            );
            scratch = occ.clone();
            scratch[slot] += 1;
            let target = basis.index_of(&scratch).expect("within cutoff");
            let amp = ((occ[slot] + 1) as f64).sqrt();
            triplets.push((target, idx, coeff * amp));
        }
    }
    Ok(FockOperator::from_triplets(Arc::clone(basis), triplets, false))
}

/// Field operator at position x: the creator part plus its adjoint.
/// Hermitian by construction.
pub fn field_operator(basis: &Arc<FockBasis>, x: f64) -> Result<FockOperator> {
    let plus = field_creator_part(basis, x)?;
    let mut op = plus.add(&plus.adjoint())?;
    op.hermitian_claim = true;
    Ok(op)
}
