//! Time evolution operators.
//!
//! Four ways to move states around: a unitary reference integrator
//! (midpoint-frozen exponential stepping), the resolvent-regularized scheme
//! built from sliced contraction products with Richardson extrapolation, the
//! interaction picture obtained by free-phase conjugation, and the scattering
//! matrix read off at the window ends.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::hamiltonians::Model;
use crate::linalg;

/// Relative slack when matching a requested endpoint to a grid node or a
/// slice boundary.
const ALIGNMENT_TOLERANCE: f64 = 1e-6;

/// Uniform time grid on a window [-T1, T2].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t1: f64,
    t2: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    /// Window [-t1, t2] sampled with the requested step. The step must tile
    /// the window; the stored step is renormalized so that an integer number
    /// of steps lands exactly on t2.
    pub fn new(t1: f64, t2: f64, step: f64) -> Result<TimeGrid> {
        if !t1.is_finite() || !t2.is_finite() || !(-t1 < t2) {
            return Err(Error::InvalidParameter(format!(
                "time window needs -T1 < T2, got [{}, {}]",
                -t1, t2
            )));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {step}"
            )));
        }
        let span = t2 + t1;
        let raw = span / step;
        let rounded = raw.round();
        if rounded < 1.0 || (raw - rounded).abs() > ALIGNMENT_TOLERANCE * raw.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "step {step} does not tile the window of length {span}"
            )));
        }
        let steps = rounded as usize;
        Ok(TimeGrid { t1, t2, dt: span / steps as f64, steps })
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Window length T1 + T2.
    pub fn span(&self) -> f64 {
        self.t2 + self.t1
    }

    /// Node i, with the final node pinned to t2 exactly.
    pub fn node(&self, i: usize) -> f64 {
        assert!(i <= self.steps, "node index {i} out of range");
        if i == self.steps {
            self.t2
        } else {
            -self.t1 + self.dt * i as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }

    /// Node index of a grid-aligned time.
    pub fn index_of(&self, time: f64) -> Result<usize> {
        let raw = (time + self.t1) / self.dt;
        let idx = raw.round();
        if !(0.0..=self.steps as f64).contains(&idx) || (raw - idx).abs() > ALIGNMENT_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "time {time} is not aligned to the grid"
            )));
        }
        Ok(idx as usize)
    }

    /// Every compactly supported temporal factor of the coupling must sit
    /// strictly inside the open window. Factors without compact support
    /// (gaussians) pass unchecked.
    pub fn check_window(&self, coupling: &Coupling) -> Result<()> {
        for term in coupling.terms() {
            if let Some((lo, hi)) = term.temporal.support() {
                if !(lo > -self.t1 && hi < self.t2) {
                    return Err(Error::InvalidParameter(format!(
                        "temporal support [{lo}, {hi}] is not strictly inside ({}, {})",
                        -self.t1, self.t2
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Scheme tag carried by every propagator record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Midpoint-frozen exponential stepping.
    Reference,
    /// Regularized generator of order n, frozen on `slices` equal slices of
    /// the window.
    Yosida { n: u32, slices: u32 },
    /// Interaction picture of another record.
    Dirac,
    /// Interaction-picture propagator across the full window.
    SMatrix,
}

/// A computed propagator with endpoints and diagnostics.
#[derive(Debug, Clone)]
pub struct PropagatorRecord {
    pub scheme: Scheme,
    /// Later endpoint.
    pub t: f64,
    /// Earlier endpoint.
    pub s: f64,
    pub matrix: DMatrix<Complex64>,
    /// Deviation of U&dagger;U from the identity, recorded for every record.
    pub unitarity_defect: f64,
    /// Richardson error estimate, on extrapolated records only.
    pub error_estimate: Option<f64>,
}

/// Unitary reference integrator between two grid-aligned endpoints:
/// one exponential per step, the generator frozen at the step midpoint.
/// Each factor is exactly unitary up to eigensolver roundoff, so the
/// unitarity defect stays at roundoff no matter how many steps compose.
pub fn reference_propagator(
    model: &Model,
    grid: &TimeGrid,
    t: f64,
    s: f64,
) -> Result<PropagatorRecord> {
    grid.check_window(model.coupling())?;
    let i_s = grid.index_of(s)?;
    let i_t = grid.index_of(t)?;
    if i_s > i_t {
        return Err(Error::InvalidParameter(format!(
            "propagation needs s <= t, got s = {s}, t = {t}"
        )));
    }
    let dim = model.dimension();
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    for i in i_s..i_t {
        let lo = grid.node(i);
        let hi = grid.node(i + 1);
        let h = model.h_tilde_dense(0.5 * (lo + hi))?;
        u = linalg::exp_i_hermitian(&h, -(hi - lo))? * u;
    }
    let unitarity_defect = linalg::unitary_defect(&u)?;
    Ok(PropagatorRecord {
        scheme: Scheme::Reference,
        t: grid.node(i_t),
        s: grid.node(i_s),
        matrix: u,
        unitarity_defect,
        error_estimate: None,
    })
}

/// Scalar symbol of the regularized generator: the map
/// lambda -> -i n lambda / (n + i lambda). Its real part is
/// -n lambda^2 / (n^2 + lambda^2) <= 0, and it tends to -i lambda as n
/// grows.
pub fn yosida_symbol(lambda: f64, n: u32) -> Complex64 {
    let nf = n as f64;
    let denom = nf * nf + lambda * lambda;
    Complex64::new(-nf * lambda * lambda / denom, -nf * nf * lambda / denom)
}

/// Regularized generator A_n(t): the scalar symbol applied to the spectrum
/// of the shifted hamiltonian. The result is a bounded normal matrix with
/// spectrum in the closed left half-plane, so its exponentials contract.
pub fn yosida_generator(model: &Model, t: f64, n: u32) -> Result<FockOperator> {
    require_order(n)?;
    let h = model.h_tilde_dense(t)?;
    let a = linalg::spectral_map(&h, &|lambda| yosida_symbol(lambda, n))?;
    Ok(FockOperator::from_dense(Arc::clone(model.basis()), a, false))
}

fn require_order(n: u32) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidParameter(
            "regularization order n must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Sliced contraction product U_{nK}: the window is cut into `slices` equal
/// subintervals, the regularized generator is frozen at the left endpoint of
/// each, and the factors exp(width * A_n) compose in time order between two
/// slice-aligned endpoints. Every factor is a contraction, so the product is
/// one too.
pub fn sliced_propagator(
    model: &Model,
    grid: &TimeGrid,
    n: u32,
    slices: u32,
    t: f64,
    s: f64,
) -> Result<PropagatorRecord> {
    require_order(n)?;
    if slices < 1 {
        return Err(Error::InvalidParameter("slice count must be at least 1".into()));
    }
    grid.check_window(model.coupling())?;
    let width = grid.span() / f64::from(slices);
    let boundary = |time: f64| -> Result<u32> {
        let raw = (time + grid.t1()) / width;
        let idx = raw.round();
        if !(0.0..=f64::from(slices)).contains(&idx) || (raw - idx).abs() > ALIGNMENT_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "time {time} is not on a boundary of {slices} slices"
            )));
        }
        Ok(idx as u32)
    };
    let slice_time = |i: u32| -> f64 {
        if i == slices {
            grid.t2()
        } else {
            -grid.t1() + width * f64::from(i)
        }
    };
    let i_s = boundary(s)?;
    let i_t = boundary(t)?;
    if i_s > i_t {
        return Err(Error::InvalidParameter(format!(
            "propagation needs s <= t, got s = {s}, t = {t}"
        )));
    }
    let dim = model.dimension();
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    for i in i_s..i_t {
        let h = model.h_tilde_dense(slice_time(i))?;
        let factor = linalg::spectral_map(&h, &|lambda| (width * yosida_symbol(lambda, n)).exp())?;
        u = factor * u;
    }
    let unitarity_defect = linalg::unitary_defect(&u)?;
    Ok(PropagatorRecord {
        scheme: Scheme::Yosida { n, slices },
        t: slice_time(i_t),
        s: slice_time(i_s),
        matrix: u,
        unitarity_defect,
        error_estimate: None,
    })
}

/// Regularized propagator U_n, computed as the sliced product at the finest
/// configured slice count K and its double, combined by Richardson
/// extrapolation in 1/K. Half the last increment is reported as the error
/// estimate; the extrapolated matrix can exceed norm one by about twice that
/// amount.
pub fn yosida_propagator(
    model: &Model,
    grid: &TimeGrid,
    n: u32,
    k_star: u32,
    t: f64,
    s: f64,
) -> Result<PropagatorRecord> {
    let doubled = k_star.checked_mul(2).ok_or_else(|| {
        Error::InvalidParameter(format!("slice count {k_star} too large to refine"))
    })?;
    let coarse = sliced_propagator(model, grid, n, k_star, t, s)?;
    let fine = sliced_propagator(model, grid, n, doubled, t, s)?;
    let increment = linalg::op_norm(&(&fine.matrix - &coarse.matrix))?;
    let matrix = &fine.matrix * Complex64::new(2.0, 0.0) - &coarse.matrix;
    let unitarity_defect = linalg::unitary_defect(&matrix)?;
    Ok(PropagatorRecord {
        scheme: Scheme::Yosida { n, slices: doubled },
        t: fine.t,
        s: fine.s,
        matrix,
        unitarity_defect,
        error_estimate: Some(0.5 * increment),
    })
}

/// Interaction-picture transport of a record: conjugation by the free-plus-
/// shift phases, exp(i(H0+M)t) U exp(-i(H0+M)s). Unitary whenever the input
/// is, and constant in t (or s) wherever the coupling has switched off.
pub fn dirac_propagator(model: &Model, record: &PropagatorRecord) -> Result<PropagatorRecord> {
    let dim = model.dimension();
    if record.matrix.nrows() != dim || record.matrix.ncols() != dim {
        return Err(Error::BasisMismatch);
    }
    let h0 = model.h0_diagonal();
    let shift = model.shift();
    let left: Vec<Complex64> =
        (0..dim).map(|r| Complex64::from_polar(1.0, (h0[r] + shift) * record.t)).collect();
    let right: Vec<Complex64> =
        (0..dim).map(|c| Complex64::from_polar(1.0, -(h0[c] + shift) * record.s)).collect();
    let mut matrix = record.matrix.clone();
    for c in 0..dim {
        for r in 0..dim {
            matrix[(r, c)] *= left[r] * right[c];
        }
    }
    let unitarity_defect = linalg::unitary_defect(&matrix)?;
    Ok(PropagatorRecord {
        scheme: Scheme::Dirac,
        t: record.t,
        s: record.s,
        matrix,
        unitarity_defect,
        error_estimate: record.error_estimate,
    })
}

/// Scattering matrix: the interaction-picture propagator across the full
/// window. With the temporal support strictly inside the window the value
/// has already stabilized, so it is independent of the shift and of window
/// enlargement up to stepping tolerance.
pub fn s_matrix(model: &Model, grid: &TimeGrid) -> Result<PropagatorRecord> {
    let u = reference_propagator(model, grid, grid.t2(), -grid.t1())?;
    let mut record = dirac_propagator(model, &u)?;
    record.scheme = Scheme::SMatrix;
    Ok(record)
}
