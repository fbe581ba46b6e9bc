//! Space-time coupling functions and their momentum-space footprint.
//!
//! A coupling is a finite sum of product terms amp * chi(t) * eta(x) built
//! from two smooth profile families: compactly supported bumps and
//! gaussians. Both families are closed under differentiation, so the same
//! machinery evaluates a coupling, its time derivatives, its spatial Fourier
//! transform and the L^p norms that enter the convolution chain bound on the
//! four-point interaction kernel.

use crate::fock::ModeGrid;
use crate::quad::integrate;
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::Mutex;

/// Holder/Young exponents of the omega factors in the chain bound,
/// outermost convolution first.
pub const CHAIN_OMEGA_EXPONENTS: [f64; 4] = [2.0, 4.0 / 3.0, 8.0 / 7.0, 16.0 / 15.0];

/// The coupling transform enters the chain through its L^(32/15) norm.
pub const CHAIN_PROFILE_EXPONENT: f64 = 32.0 / 15.0;

/// Real polynomial with ascending coefficients, used for the
/// differentiation-closed profile representations.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::new(Vec::new());
        }
        Poly::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| (i + 1) as f64 * c)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly::new(Vec::new());
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn add_scaled(&self, other: &Poly, factor: f64) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            out[i] += a;
        }
        for (i, &b) in other.coeffs.iter().enumerate() {
            out[i] += factor * b;
        }
        Poly::new(out)
    }

    pub fn scale(&self, factor: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * factor).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Crude magnitude scale used to pick quadrature tolerances.
    fn coeff_scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |acc, &c| acc.max(c.abs()))
    }
}

/// One smooth profile of a single variable.
///
/// `Bump` is p(u) (1-u^2)^(-pow) e^(-1/(1-u^2)) on |u| < 1 (and exactly zero
/// outside), `Gaussian` is p(u) e^(-u^2/2), both with u the centered,
/// rescaled coordinate. Derivatives stay inside the family, with the
/// prefactor polynomial and the inverse power absorbing the chain rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Bump { center: f64, halfwidth: f64, poly: Poly, pow: u32 },
    Gaussian { center: f64, sigma: f64, poly: Poly },
}

/// Gaussian evaluations are cut off here; e^(-u^2/2) is below the smallest
/// positive double long before, and the guard keeps huge polynomial values
/// from turning 0 * inf into NaN.
const GAUSSIAN_WINDOW: f64 = 40.0;

impl Profile {
    /// Standard bump e^(-1/(1-u^2)) with u = (x - center)/halfwidth.
    pub fn bump(center: f64, halfwidth: f64) -> Result<Profile> {
        if !halfwidth.is_finite() || !(halfwidth > 0.0) || !center.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bump profile needs finite center and positive halfwidth, got ({center}, {halfwidth})"
            )));
        }
        Ok(Profile::Bump { center, halfwidth, poly: Poly::constant(1.0), pow: 0 })
    }

    /// Unnormalized gaussian e^(-u^2/2) with u = (x - center)/sigma.
    pub fn gaussian(center: f64, sigma: f64) -> Result<Profile> {
        if !sigma.is_finite() || !(sigma > 0.0) || !center.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian profile needs finite center and positive sigma, got ({center}, {sigma})"
            )));
        }
        Ok(Profile::Gaussian { center, sigma, poly: Poly::constant(1.0) })
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            Profile::Bump { center, halfwidth, poly, pow } => {
                let u = (x - center) / halfwidth;
                if !(u.abs() < 1.0) {
                    return 0.0;
                }
                let s = 1.0 - u * u;
                if s <= 0.0 {
                    return 0.0;
                }
                // p(u) * s^(-pow) * e^(-1/s), evaluated in log space so the
                // essential zero at the support edge never meets an inf
                poly.eval(u) * (-1.0 / s - f64::from(*pow) * s.ln()).exp()
            }
            Profile::Gaussian { center, sigma, poly } => {
                let u = (x - center) / sigma;
                if u.abs() > GAUSSIAN_WINDOW {
                    return 0.0;
                }
                poly.eval(u) * (-0.5 * u * u).exp()
            }
        }
    }

    /// Derivative with respect to the profile's variable, as a new profile.
    pub fn derivative(&self) -> Profile {
        match self {
            Profile::Bump { center, halfwidth, poly, pow } => {
                let s = Poly::new(vec![1.0, 0.0, -1.0]);
                let u = Poly::new(vec![0.0, 1.0]);
                let up = u.mul(poly);
                // d/dx [p s^-pow e^(-1/s)] =
                //   (1/w) s^-(pow+2) [p' s^2 + 2 pow u p s - 2 u p] e^(-1/s)
                let num = poly
                    .derivative()
                    .mul(&s)
                    .mul(&s)
                    .add_scaled(&up.mul(&s), 2.0 * f64::from(*pow))
                    .add_scaled(&up, -2.0)
                    .scale(1.0 / halfwidth);
                Profile::Bump { center: *center, halfwidth: *halfwidth, poly: num, pow: pow + 2 }
            }
            Profile::Gaussian { center, sigma, poly } => {
                let u = Poly::new(vec![0.0, 1.0]);
                let num = poly
                    .derivative()
                    .add_scaled(&u.mul(poly), -1.0)
                    .scale(1.0 / sigma);
                Profile::Gaussian { center: *center, sigma: *sigma, poly: num }
            }
        }
    }

    /// Closed support, if compact.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Profile::Bump { center, halfwidth, .. } => {
                Some((center - halfwidth, center + halfwidth))
            }
            Profile::Gaussian { .. } => None,
        }
    }

    /// Interval outside which the profile is numerically zero.
    pub fn effective_window(&self) -> (f64, f64) {
        match self {
            Profile::Bump { center, halfwidth, .. } => {
                (center - halfwidth, center + halfwidth)
            }
            Profile::Gaussian { center, sigma, .. } => {
                (center - GAUSSIAN_WINDOW * sigma, center + GAUSSIAN_WINDOW * sigma)
            }
        }
    }

    /// Length scale of the profile (halfwidth or sigma).
    pub fn scale(&self) -> f64 {
        match self {
            Profile::Bump { halfwidth, .. } => *halfwidth,
            Profile::Gaussian { sigma, .. } => *sigma,
        }
    }

    /// Fourier transform integral(e^(ikx) f(x) dx) over the real line.
    ///
    /// The base bump routes through a memoized even shape transform so that
    /// f~(-k) is the exact complex conjugate of f~(k); the base gaussian
    /// uses the closed form. Derived profiles fall back to quadrature.
    pub fn fourier(&self, k: f64) -> Result<Complex64> {
        match self {
            Profile::Bump { center, halfwidth, poly, pow } => {
                if *pow == 0 && poly == &Poly::constant(1.0) {
                    let b = bump_shape_transform(k * halfwidth)?;
                    let phase = k * center;
                    Ok(Complex64::new(phase.cos(), phase.sin()) * (halfwidth * b))
                } else {
                    self.fourier_by_quadrature(k)
                }
            }
            Profile::Gaussian { center, sigma, poly } => {
                if poly.coeffs.len() == 1 {
                    let amp = poly.coeffs[0]
                        * sigma
                        * (2.0 * std::f64::consts::PI).sqrt()
                        * (-0.5 * (sigma * k) * (sigma * k)).exp();
                    let phase = k * center;
                    Ok(Complex64::new(phase.cos(), phase.sin()) * amp)
                } else {
                    self.fourier_by_quadrature(k)
                }
            }
        }
    }

    fn fourier_by_quadrature(&self, k: f64) -> Result<Complex64> {
        let (lo, hi) = self.effective_window();
        let tol = 1e-12 * self.poly_scale().max(1.0);
        let re = integrate(&mut |x| self.evaluate(x) * (k * x).cos(), lo, hi, tol)?;
        let im = integrate(&mut |x| self.evaluate(x) * (k * x).sin(), lo, hi, tol)?;
        Ok(Complex64::new(re, im))
    }

    fn poly_scale(&self) -> f64 {
        match self {
            Profile::Bump { poly, .. } | Profile::Gaussian { poly, .. } => poly.coeff_scale(),
        }
    }

    /// integral(|f(x)| dx) over the effective window.
    pub fn l1_norm(&self) -> Result<f64> {
        let (lo, hi) = self.effective_window();
        integrate(
            &mut |x| self.evaluate(x).abs(),
            lo,
            hi,
            1e-9 * self.poly_scale().max(1.0),
        )
    }
}

/// Memoized even transform of the standard bump:
/// B(s) = integral(e^(isu) e^(-1/(1-u^2)) du, -1..1) = 2 integral(cos(su) psi, 0..1).
///
/// Keyed on the bits of |s| so that B(-s) and B(s) are bit-identical; this
/// is what makes coupling transforms exactly conjugate-symmetric.
fn bump_shape_transform(s: f64) -> Result<f64> {
    static MEMO: Mutex<Option<HashMap<u64, f64>>> = Mutex::new(None);
    let key = s.abs().to_bits();
    {
        let memo = MEMO.lock().expect("transform memo poisoned");
        if let Some(v) = memo.as_ref().and_then(|m| m.get(&key)) {
            return Ok(*v);
        }
    }
    let sa = s.abs();
    let value = 2.0
        * integrate(
            &mut |u| {
                let w = 1.0 - u * u;
                if w <= 0.0 {
                    0.0
                } else {
                    (sa * u).cos() * (-1.0 / w).exp()
                }
            },
            0.0,
            1.0,
            1e-13,
        )?;
    let mut memo = MEMO.lock().expect("transform memo poisoned");
    memo.get_or_insert_with(HashMap::new).insert(key, value);
    Ok(value)
}

/// One product term amp * chi(t) * eta(x) of a coupling.
#[derive(Debug, Clone)]
pub struct CouplingTerm {
    pub amplitude: f64,
    pub temporal: Profile,
    pub spatial: Profile,
}

/// A space-time coupling g(t, x) = sum of product terms.
#[derive(Debug, Clone)]
pub struct Coupling {
    terms: Vec<CouplingTerm>,
}

impl Coupling {
    /// An empty term list is the zero coupling.
    pub fn new(terms: Vec<CouplingTerm>) -> Result<Self> {
        for t in &terms {
            if !t.amplitude.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "coupling amplitude must be finite, got {}",
                    t.amplitude
                )));
            }
        }
        Ok(Coupling { terms })
    }

    /// The zero coupling g = 0.
    pub fn zero() -> Coupling {
        Coupling { terms: Vec::new() }
    }

    /// Single product term.
    pub fn product(amplitude: f64, temporal: Profile, spatial: Profile) -> Result<Self> {
        Coupling::new(vec![CouplingTerm { amplitude, temporal, spatial }])
    }

    pub fn terms(&self) -> &[CouplingTerm] {
        &self.terms
    }

    pub fn evaluate(&self, t: f64, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| term.amplitude * term.temporal.evaluate(t) * term.spatial.evaluate(x))
            .sum()
    }

    /// Coupling with each temporal profile differentiated `order` times;
    /// order 0 returns the coupling unchanged.
    pub fn time_derivative(&self, order: u32) -> Coupling {
        Coupling {
            terms: self
                .terms
                .iter()
                .map(|term| {
                    let mut temporal = term.temporal.clone();
                    for _ in 0..order {
                        temporal = temporal.derivative();
                    }
                    CouplingTerm {
                        amplitude: term.amplitude,
                        temporal,
                        spatial: term.spatial.clone(),
                    }
                })
                .collect(),
        }
    }

    /// Spatial Fourier transform g~(k, t) = integral(e^(ikx) g(t, x) dx).
    pub fn fourier_spatial(&self, k: f64, t: f64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            acc += term.spatial.fourier(k)? * (term.amplitude * term.temporal.evaluate(t));
        }
        Ok(acc)
    }

    pub fn scaled(&self, factor: f64) -> Coupling {
        Coupling {
            terms: self
                .terms
                .iter()
                .map(|term| CouplingTerm {
                    amplitude: factor * term.amplitude,
                    temporal: term.temporal.clone(),
                    spatial: term.spatial.clone(),
                })
                .collect(),
        }
    }

    /// Sum of two couplings, by concatenating term lists.
    pub fn plus(&self, other: &Coupling) -> Coupling {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Coupling { terms }
    }

    /// Hull of the temporal supports, None when any term lacks compact
    /// temporal support. The zero coupling yields the empty hull
    /// (+inf, -inf), which every containment check passes vacuously.
    pub fn temporal_support(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for term in &self.terms {
            let (a, b) = term.temporal.support()?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Some((lo, hi))
    }

    /// Hull of the spatial supports, None when any term lacks compact
    /// spatial support.
    pub fn spatial_support(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for term in &self.terms {
            let (a, b) = term.spatial.support()?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Some((lo, hi))
    }

    /// Upper bound on integral(|d^2_x g(t, x)| dx), from the triangle
    /// inequality across terms. Controls the |g~| <= C2 / k^2 tail.
    pub fn second_spatial_l1(&self, t: f64) -> Result<f64> {
        let mut acc = 0.0;
        for term in &self.terms {
            let weight = (term.amplitude * term.temporal.evaluate(t)).abs();
            if weight == 0.0 {
                continue;
            }
            acc += weight * term.spatial.derivative().derivative().l1_norm()?;
        }
        Ok(acc)
    }

    /// Continuum L^r norm of g~(., t) over the real line, r > 1. The
    /// quadrature window is chosen from the profile scales and the remainder
    /// is covered by the C2/k^2 decay bound, so the result is a certified
    /// upper estimate good to quadrature accuracy.
    pub fn spatial_ft_norm(&self, t: f64, r: f64) -> Result<f64> {
        if !(r > 1.0) {
            return Err(Error::InvalidParameter(format!("L^r norm needs r > 1, got {r}")));
        }
        let min_scale = self
            .terms
            .iter()
            .map(|term| term.spatial.scale())
            .fold(f64::INFINITY, f64::min);
        let cut = 150.0 / min_scale.min(1.0);
        let main = integrate(
            &mut |k| match self.fourier_spatial(k, t) {
                Ok(v) => v.norm().powf(r),
                Err(_) => f64::NAN,
            },
            -cut,
            cut,
            1e-10,
        )?;
        if !main.is_finite() {
            return Err(Error::Quadrature("coupling transform failed inside norm".into()));
        }
        let c2 = self.second_spatial_l1(t)?;
        // two one-sided tails of (C2/k^2)^r beyond the window
        let tail = 2.0 * c2.powf(r) * cut.powf(1.0 - 2.0 * r) / (2.0 * r - 1.0);
        Ok((main + tail).powf(1.0 / r))
    }

    /// Chain bound report at one time slice: the four-point kernel norm,
    /// the coupling transform norm, the four omega factors and the
    /// resulting bound, which is uniform in the mode cutoff.
    pub fn young_chain_report(&self, grid: &ModeGrid, t: f64) -> Result<ChainReport> {
        let kernel = FourPointKernel::from_coupling(grid, self, t)?;
        let kernel_l2 = kernel.l2_norm();
        let mut omega_norms = [0.0; 4];
        for (slot, &r) in CHAIN_OMEGA_EXPONENTS.iter().enumerate() {
            omega_norms[slot] = omega_inverse_r_norm(grid.mass(), r)?;
        }
        let product_bound = omega_norms.iter().product::<f64>().sqrt();
        let profile_norm = self.spatial_ft_norm(t, CHAIN_PROFILE_EXPONENT)?;
        let chain_bound = profile_norm * product_bound;
        let ratio = if profile_norm > 0.0 { kernel_l2 / profile_norm } else { 0.0 };
        let satisfied = kernel_l2 <= chain_bound * (1.0 + CHAIN_RELATIVE_TOLERANCE);
        Ok(ChainReport {
            time: t,
            kernel_l2,
            profile_norm,
            omega_norms,
            product_bound,
            chain_bound,
            ratio,
            satisfied,
        })
    }
}

/// Quadrature slack allowed when comparing the kernel norm against the
/// chain bound.
pub const CHAIN_RELATIVE_TOLERANCE: f64 = 1e-6;

/// Output of [`Coupling::young_chain_report`].
///
/// `ratio` is the realized constant kernel_l2 / profile_norm; the chain
/// inequality says it never exceeds `product_bound`, the square root of the
/// product of the omega factors. `chain_bound` = product_bound *
/// profile_norm is the same statement against kernel_l2 directly.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ChainReport {
    pub time: f64,
    pub kernel_l2: f64,
    pub profile_norm: f64,
    pub omega_norms: [f64; 4],
    pub product_bound: f64,
    pub chain_bound: f64,
    pub ratio: f64,
    pub satisfied: bool,
}

/// Continuum L^r norm of 1/omega over the real line:
/// (integral((k^2 + m^2)^(-r/2) dk))^(1/r), with the range beyond the
/// quadrature window covered by the k^(-r) majorant. Independent of any
/// mode cutoff. Requires r > 1; at r = 2 this is sqrt(pi/m).
pub fn omega_inverse_r_norm(mass: f64, r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(Error::InvalidParameter(format!("L^r norm needs r > 1, got {r}")));
    }
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
    }
    let cut = 1000.0 * mass.max(1.0);
    let m2 = mass * mass;
    let main = integrate(&mut |k| (k * k + m2).powf(-0.5 * r), 0.0, cut, 1e-10)?;
    let tail = cut.powf(1.0 - r) / (r - 1.0);
    Ok((2.0 * (main + tail)).powf(1.0 / r))
}

/// Four-point interaction kernel on a mode grid at a fixed time:
/// W[l1..l4] = g~(k_l1 + .. + k_l4, t) * prod(omega_li^(-1/2)).
pub struct FourPointKernel {
    grid: ModeGrid,
    values: Vec<Complex64>,
}

impl FourPointKernel {
    /// Kernel of a unit-amplitude, time-independent spatial profile.
    pub fn from_spatial_profile(grid: &ModeGrid, spatial: &Profile) -> Result<Self> {
        let cutoff = grid.cutoff();
        // the transform only enters through total momenta, multiples of
        // delta_k between -4J and 4J
        let mut ft_by_total = Vec::with_capacity((8 * cutoff + 1) as usize);
        for q in -4 * cutoff..=4 * cutoff {
            ft_by_total.push(spatial.fourier(grid.delta_k() * q as f64)?);
        }
        let modes = grid.mode_count();
        let inv_sqrt_omega: Vec<f64> =
            grid.modes().map(|j| 1.0 / grid.omega(j).sqrt()).collect();
        let mut values = vec![Complex64::new(0.0, 0.0); modes.pow(4)];
        let mut idx = 0;
        for i1 in 0..modes {
            for i2 in 0..modes {
                for i3 in 0..modes {
                    for i4 in 0..modes {
                        let total = i1 + i2 + i3 + i4;
                        // shift by 4J to index the transform table
                        let ft = ft_by_total[total];
                        let w = inv_sqrt_omega[i1]
                            * inv_sqrt_omega[i2]
                            * inv_sqrt_omega[i3]
                            * inv_sqrt_omega[i4];
                        values[idx] = ft * w;
                        idx += 1;
                    }
                }
            }
        }
        Ok(FourPointKernel { grid: grid.clone(), values })
    }

    /// Full coupling kernel at time t, summed over product terms. The zero
    /// coupling gives the zero kernel.
    pub fn from_coupling(grid: &ModeGrid, coupling: &Coupling, t: f64) -> Result<Self> {
        let mut acc = FourPointKernel {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.mode_count().pow(4)],
        };
        for term in coupling.terms() {
            let factor = term.amplitude * term.temporal.evaluate(t);
            let part = FourPointKernel::from_spatial_profile(grid, &term.spatial)?;
            for (dst, src) in acc.values.iter_mut().zip(&part.values) {
                *dst += src * factor;
            }
        }
        Ok(acc)
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    /// All kernel values in slot-major order: the entry for slots
    /// (s1, s2, s3, s4) sits at ((s1 * M + s2) * M + s3) * M + s4.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Kernel entry at mode indices (l1, l2, l3, l4), each in -J..=J.
    pub fn entry(&self, l: [i64; 4]) -> Complex64 {
        let modes = self.grid.mode_count();
        let mut idx = 0;
        for &li in &l {
            debug_assert!(li.abs() <= self.grid.cutoff());
            idx = idx * modes + self.grid.slot(li);
        }
        self.values[idx]
    }

    /// Discrete L^2 norm with the grid measure:
    /// (delta_k^4 sum |W|^2)^(1/2).
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        self.grid.delta_k().powi(2) * sum.sqrt()
    }
}
