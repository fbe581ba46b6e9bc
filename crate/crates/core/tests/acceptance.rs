//! Acceptance suite: eleven numbered end-to-end criteria covering unitarity,
//! the propagator laws, causal factorization, refinement rates of the sliced
//! scheme, occupancy-weighted norm uniformity, the kernel chain bound,
//! smoothness of the interaction family, the quadrature oracle, weak-coupling
//! series consistency, the relative form operator, and shift invariance of
//! the scattering matrix.
//!
//! Every tolerance is pinned below as a named constant. Each test prints one
//! `criterion NN <name>: pass|FAIL` line with the measured values; run with
//! `cargo test --test acceptance -- --nocapture` to see the lines for passing
//! criteria as well.
//!
//! The corpus is three models on the window [-1, 1]: a gaussian pulse and a
//! stronger bump pulse on a unit-mass small box with two modes per sign and
//! particle cutoff 3, and a weak wide pulse on a light long box, the smallest
//! spectral radius in the set. Shifts are stabilized with a 0.1 margin over
//! nine evenly spaced scan times.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;

use phi4lab::analysis::{
    causality_experiment, dyson_consistency_experiment, q_operator, q_positivity,
    CausalityOptions, DysonOptions, PositivityOptions,
};
use phi4lab::coupling::{Coupling, Profile};
use phi4lab::fock::{FockBasis, ModeGrid};
use phi4lab::hamiltonians::{xspace_interaction, Model};
use phi4lab::linalg;
use phi4lab::propagators::{
    reference_propagator, s_matrix, sliced_propagator, yosida_propagator, TimeGrid,
};

// criterion 1
const UNITARITY_BOUND: f64 = 1e-10;
const CASE_BUDGET_SECONDS: f64 = 60.0;
// criterion 2
const COMPOSITION_BOUND: f64 = 1e-8;
// criterion 3
const CAUSALITY_DEFECT_BOUND: f64 = 1e-6;
const CAUSALITY_ORDER: f64 = 2.0;
const CAUSALITY_ORDER_SLACK: f64 = 0.3;
const CAUSALITY_BUDGET_SECONDS: f64 = 300.0;
// criterion 4
const REFINEMENT_SLOPE: f64 = -1.0;
const REFINEMENT_SLOPE_SLACK: f64 = 0.15;
const REFINEMENT_FINAL_BOUND: f64 = 1e-2;
// criterion 5
const SANDWICH_SPREAD_BOUND: f64 = 2.0;
// criterion 6
const KERNEL_BOUND_RELATIVE: f64 = 1e-6;
// criterion 7
const SMOOTHNESS_SLOPE_FLOOR: f64 = 0.9;
// criterion 8
const ORACLE_RELATIVE_BOUND: f64 = 1e-8;
// criterion 9
const DYSON_STABILITY: f64 = 0.2;
const DYSON_EXPONENT_SLACK: f64 = 0.2;
// criterion 10
const HERMITICITY_BOUND: f64 = 1e-10;
// criterion 11
const SHIFT_STEP: f64 = 5.0;
const SHIFT_INVARIANCE_BOUND: f64 = 1e-10;

/// Prints the criterion line, then enforces it.
fn report(number: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "pass" } else { "FAIL" };
    println!("criterion {number:02} {name}: {tag} ({detail})");
    assert!(pass, "criterion {number:02} {name}: {detail}");
}

fn basis(mass: f64, box_length: f64, modes: i64, particles: u32) -> Arc<FockBasis> {
    FockBasis::enumerate(ModeGrid::new(mass, box_length, modes).unwrap(), particles).unwrap()
}

fn scan_times(grid: &TimeGrid) -> Vec<f64> {
    (0..9).map(|k| -grid.t1() + grid.span() * k as f64 / 8.0).collect()
}

fn stabilized(basis: Arc<FockBasis>, coupling: Coupling, grid: &TimeGrid) -> Model {
    let model = Model::assemble(basis, coupling).unwrap();
    let shift = model.stabilizing_shift(&scan_times(grid), 0.1).unwrap();
    model.with_shift(shift)
}

fn gaussian_pulse() -> Coupling {
    Coupling::product(
        0.5,
        Profile::gaussian(0.0, 0.25).unwrap(),
        Profile::gaussian(0.0, 0.4).unwrap(),
    )
    .unwrap()
}

fn bump_pulse() -> Coupling {
    Coupling::product(
        1.0,
        Profile::bump(0.0, 0.5).unwrap(),
        Profile::bump(0.0, 1.0).unwrap(),
    )
    .unwrap()
}

fn soft_pulse() -> Coupling {
    Coupling::product(
        0.05,
        Profile::gaussian(0.0, 0.3).unwrap(),
        Profile::bump(0.0, 4.0).unwrap(),
    )
    .unwrap()
}

struct Corpus {
    grid: TimeGrid,
    models: Vec<(&'static str, Model)>,
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let grid = TimeGrid::new(1.0, 1.0, 1.0 / 64.0).unwrap();
        let models = vec![
            ("gaussian", stabilized(basis(1.0, 2.0 * PI, 2, 3), gaussian_pulse(), &grid)),
            ("bump", stabilized(basis(1.0, 2.0 * PI, 2, 3), bump_pulse(), &grid)),
            ("soft", stabilized(basis(0.2, 10.0 * PI, 1, 2), soft_pulse(), &grid)),
        ];
        Corpus { grid, models }
    })
}

fn soft_model() -> &'static Model {
    &corpus().models.iter().find(|(name, _)| *name == "soft").unwrap().1
}

fn identity_distance(u: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for c in 0..u.ncols() {
        for r in 0..u.nrows() {
            let expect = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((u[(r, c)] - Complex64::from(expect)).norm());
        }
    }
    worst
}

#[test]
fn criterion_01_unitarity() {
    let corpus = corpus();
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    for (_, model) in &corpus.models {
        let started = Instant::now();
        let u = reference_propagator(model, &corpus.grid, corpus.grid.t2(), -corpus.grid.t1())
            .unwrap();
        let s = s_matrix(model, &corpus.grid).unwrap();
        slowest = slowest.max(started.elapsed().as_secs_f64());
        worst = worst.max(u.unitarity_defect).max(s.unitarity_defect);
    }
    report(
        1,
        "unitarity",
        worst <= UNITARITY_BOUND && slowest <= CASE_BUDGET_SECONDS,
        format!(
            "worst defect {worst:.3e} (bound {UNITARITY_BOUND:.0e}), slowest case {slowest:.2}s"
        ),
    );
}

#[test]
fn criterion_02_propagator_laws() {
    let corpus = corpus();
    let grid = &corpus.grid;
    let (r, s, t) = (-grid.t1(), 0.25, grid.t2());
    let mut worst_composition = 0.0f64;
    let mut worst_identity = 0.0f64;
    for (_, model) in &corpus.models {
        let whole = reference_propagator(model, grid, t, r).unwrap();
        let head = reference_propagator(model, grid, s, r).unwrap();
        let tail = reference_propagator(model, grid, t, s).unwrap();
        let defect = linalg::op_norm(&(&tail.matrix * &head.matrix - &whole.matrix)).unwrap();
        worst_composition = worst_composition.max(defect);
        let stay = reference_propagator(model, grid, s, s).unwrap();
        worst_identity = worst_identity.max(identity_distance(&stay.matrix));
    }
    report(
        2,
        "propagator laws",
        worst_composition <= COMPOSITION_BOUND && worst_identity == 0.0,
        format!(
            "composition defect {worst_composition:.3e} (bound {COMPOSITION_BOUND:.0e}), \
             equal-endpoint distance {worst_identity:.1e} (must be exact)"
        ),
    );
}

#[test]
fn criterion_03_causal_factorization() {
    let started = Instant::now();
    let b = basis(1.0, 2.0 * PI, 1, 2);
    let spatial = Profile::bump(0.0, 1.0).unwrap();
    let late =
        Coupling::product(0.4, Profile::bump(0.65, 0.25).unwrap(), spatial.clone()).unwrap();
    let early = Coupling::product(0.4, Profile::bump(-0.65, 0.25).unwrap(), spatial).unwrap();
    let grid = TimeGrid::new(1.0, 1.0, 1e-3).unwrap();
    let combined = Model::assemble(Arc::clone(&b), late.plus(&early)).unwrap();
    let shift = combined.stabilizing_shift(&scan_times(&grid), 0.1).unwrap();
    let late_model = Model::assemble(Arc::clone(&b), late).unwrap().with_shift(shift);
    let early_model = Model::assemble(Arc::clone(&b), early).unwrap().with_shift(shift);
    let verdict = causality_experiment(
        &late_model,
        &early_model,
        &grid,
        &CausalityOptions {
            levels: 2,
            defect_bound: CAUSALITY_DEFECT_BOUND,
            order: CAUSALITY_ORDER,
            order_slack: CAUSALITY_ORDER_SLACK,
        },
    )
    .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let base = verdict
        .measurements
        .iter()
        .find(|m| m.label.starts_with("defect["))
        .unwrap()
        .value;
    // Disjoint pulses factorize the discrete scheme exactly, so the defects
    // sit at the roundoff floor and the order fit engages only when some
    // defect rises above it.
    let order_note = if verdict.checks.len() > 1 {
        "order fitted"
    } else {
        "defects at roundoff floor, order fit not engaged"
    };
    report(
        3,
        "causal factorization",
        verdict.passed && elapsed <= CAUSALITY_BUDGET_SECONDS,
        format!(
            "base defect {base:.3e} (bound {CAUSALITY_DEFECT_BOUND:.0e}); {order_note}; \
             {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_04_scheme_refinement() {
    let model = soft_model();
    let grid = TimeGrid::new(1.0, 1.0, 1.0 / 512.0).unwrap();
    let (t, s) = (grid.t2(), -grid.t1());
    let mut pass = true;
    let mut detail = Vec::new();
    for n in [4u32, 16, 64] {
        let mut sweep = Vec::new();
        let mut prev = sliced_propagator(model, &grid, n, 8, t, s).unwrap();
        let mut k = 8u32;
        while k <= 512 {
            let next = sliced_propagator(model, &grid, n, 2 * k, t, s).unwrap();
            let defect = linalg::op_norm(&(&next.matrix - &prev.matrix)).unwrap();
            sweep.push((f64::from(k), defect));
            prev = next;
            k *= 2;
        }
        let slope = linalg::fit_loglog_slope(&sweep).unwrap_or(f64::MAX);
        pass &= (slope - REFINEMENT_SLOPE).abs() <= REFINEMENT_SLOPE_SLACK;
        detail.push(format!("slope[n={n}] {slope:.3}"));
    }
    let reference = reference_propagator(model, &grid, t, s).unwrap();
    let mut last = f64::INFINITY;
    let mut final_error = f64::MAX;
    for n in [4u32, 16, 64, 256] {
        let u = yosida_propagator(model, &grid, n, 256, t, s).unwrap();
        let error = linalg::op_norm(&(&u.matrix - &reference.matrix)).unwrap();
        pass &= error < last;
        last = error;
        final_error = error;
    }
    pass &= final_error < REFINEMENT_FINAL_BOUND;
    detail.push(format!(
        "monotone error[n=256] {final_error:.3e} (bound {REFINEMENT_FINAL_BOUND:.0e})"
    ));
    report(
        4,
        "scheme refinement",
        pass,
        format!("{}; slope target {REFINEMENT_SLOPE}+-{REFINEMENT_SLOPE_SLACK}", detail.join(", ")),
    );
}

/// The occupancy-weighted interaction norm is dominated by which operator
/// classes the particle cutoff admits: the mixed three-one classes act only
/// from cutoff 3 and the vacuum-reaching four-zero classes from cutoff 4, so
/// the normalized norm roughly doubles at each of those thresholds for any
/// coupling (the classes share one kernel, and a pure amplitude rescale
/// cancels from the ratio). Sweeping from cutoff 2 therefore cannot stay
/// within a two-fold band; the criterion is asserted as stated and fails
/// honestly. Restricted to the class-complete cutoffs (4 and up) the spread
/// does stay within the band, which is what the uniformity experiment in the
/// analysis module checks.
#[test]
fn criterion_05_sandwich_uniformity() {
    let coupling = gaussian_pulse();
    let mut pass = true;
    let mut detail = Vec::new();
    for j in 0..=4 {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for modes in [1i64, 2] {
            for particles in [2u32, 3, 4] {
                let model =
                    Model::assemble(basis(1.0, 2.0 * PI, modes, particles), coupling.clone())
                        .unwrap();
                let ratio = model.sandwich_bound_report(0.0, j).unwrap().ratio;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
        let spread = hi / lo;
        pass &= spread <= SANDWICH_SPREAD_BOUND;
        detail.push(format!("spread[j={j}] {spread:.3}"));
    }
    report(
        5,
        "sandwich uniformity",
        pass,
        format!("{}; bound {SANDWICH_SPREAD_BOUND}", detail.join(", ")),
    );
}

#[test]
fn criterion_06_kernel_chain_bound() {
    let corpus = corpus();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut pass = true;
    for (_, model) in &corpus.models {
        for t in scan_times(&corpus.grid) {
            let chain = model.coupling().young_chain_report(model.basis().grid(), t).unwrap();
            if chain.chain_bound > 0.0 {
                let excess = chain.kernel_l2 / chain.chain_bound - 1.0;
                worst_excess = worst_excess.max(excess);
                pass &= excess <= KERNEL_BOUND_RELATIVE;
            } else {
                pass &= chain.kernel_l2 == 0.0;
            }
        }
    }
    report(
        6,
        "kernel chain bound",
        pass,
        format!("worst relative excess {worst_excess:.3e} (tolerance {KERNEL_BOUND_RELATIVE:.0e})"),
    );
}

#[test]
fn criterion_07_smoothness() {
    let corpus = corpus();
    let steps = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, model) in &corpus.models {
        let rep = model.smoothness_report(0.1, &steps).unwrap();
        let first = rep.first_slope.unwrap_or(f64::NEG_INFINITY);
        let second = rep.second_slope.unwrap_or(f64::NEG_INFINITY);
        pass &= first >= SMOOTHNESS_SLOPE_FLOOR && second >= SMOOTHNESS_SLOPE_FLOOR;
        detail.push(format!("{name} {first:.2}/{second:.2}"));
    }
    report(
        7,
        "smoothness",
        pass,
        format!("slopes {}; floor {SMOOTHNESS_SLOPE_FLOOR}", detail.join(", ")),
    );
}

#[test]
fn criterion_08_oracle_equivalence() {
    let b = basis(1.0, 2.0 * PI, 1, 2);
    let coupling = gaussian_pulse();
    let model = Model::assemble(Arc::clone(&b), coupling.clone()).unwrap();
    let live = model.interaction_dense(0.1).unwrap();
    let oracle = xspace_interaction(&b, &coupling, 0.1, 256).unwrap().dense().unwrap();
    let relative = linalg::op_norm(&(live.as_ref() - &oracle)).unwrap()
        / linalg::op_norm(&oracle).unwrap();
    report(
        8,
        "oracle equivalence",
        relative <= ORACLE_RELATIVE_BOUND,
        format!("relative difference {relative:.3e} (bound {ORACLE_RELATIVE_BOUND:.0e})"),
    );
}

#[test]
fn criterion_09_dyson_consistency() {
    // A strong shape keeps the cubic defect above the integrator floor at
    // the weakest coupling, and steps proportional to the strength keep the
    // integrator contamination of the cubic ratio level-independent.
    let b = basis(1.0, 2.0 * PI, 1, 2);
    let shape = Coupling::product(
        80.0,
        Profile::gaussian(0.0, 0.15).unwrap(),
        Profile::gaussian(0.0, 0.4).unwrap(),
    )
    .unwrap();
    let levels = [(1e-2, 1e-2), (1e-3, 1e-3), (1e-4, 1e-4)];
    let verdict = dyson_consistency_experiment(
        &b,
        &shape,
        1.0,
        1.0,
        &levels,
        &DysonOptions { stability: DYSON_STABILITY, exponent_slack: DYSON_EXPONENT_SLACK },
    )
    .unwrap();
    let find = |label: &str| {
        verdict.measurements.iter().find(|m| m.label == label).map(|m| m.value).unwrap_or(f64::NAN)
    };
    report(
        9,
        "dyson consistency",
        verdict.passed,
        format!(
            "cubic ratio spread {:.4} (bound {:.2}), strength exponents {:.3}/{:.3}",
            find("cubic ratio spread"),
            1.0 + DYSON_STABILITY,
            find("order-1 strength exponent"),
            find("order-2 strength exponent"),
        ),
    );
}

#[test]
fn criterion_10_form_operator() {
    let corpus = corpus();
    let grid = &corpus.grid;
    let times = scan_times(grid);
    let mut pass = true;
    let mut worst_identity = 0.0f64;
    let mut worst_leak = 0.0f64;
    let mut min_eigenvalue = f64::INFINITY;
    for (_, model) in &corpus.models {
        let base_q = q_operator(model, grid, -grid.t1()).unwrap().dense().unwrap();
        worst_identity = worst_identity.max(identity_distance(&base_q));
        let base = model.h_tilde_dense(-grid.t1()).unwrap();
        for &t in &times[1..] {
            let q = q_operator(model, grid, t).unwrap().dense().unwrap();
            let weighted = &base * &q;
            let leak = linalg::op_norm(&(&weighted - weighted.adjoint())).unwrap()
                / linalg::op_norm(&weighted).unwrap().max(1.0);
            worst_leak = worst_leak.max(leak);
        }
        let pencil =
            q_positivity(model, grid, &times, &PositivityOptions { eigenvalue_floor: 0.0 })
                .unwrap();
        pass &= pencil.passed;
        min_eigenvalue = min_eigenvalue.min(
            pencil
                .measurements
                .iter()
                .filter(|m| m.label.starts_with("lambda_min"))
                .map(|m| m.value)
                .fold(f64::INFINITY, f64::min),
        );
    }
    pass &= worst_identity == 0.0 && worst_leak < HERMITICITY_BOUND;
    report(
        10,
        "form operator",
        pass,
        format!(
            "base identity distance {worst_identity:.1e} (must be exact), hermiticity leak \
             {worst_leak:.3e} (bound {HERMITICITY_BOUND:.0e}), pencil minimum {min_eigenvalue:.3}"
        ),
    );
}

#[test]
fn criterion_11_shift_invariance() {
    let corpus = corpus();
    let mut worst = 0.0f64;
    for (_, model) in &corpus.models {
        let plain = s_matrix(model, &corpus.grid).unwrap();
        let shifted =
            s_matrix(&model.with_shift(model.shift() + SHIFT_STEP), &corpus.grid).unwrap();
        worst = worst.max(linalg::op_norm(&(&shifted.matrix - &plain.matrix)).unwrap());
    }
    report(
        11,
        "shift invariance",
        worst <= SHIFT_INVARIANCE_BOUND,
        format!("worst defect {worst:.3e} (bound {SHIFT_INVARIANCE_BOUND:.0e}, step {SHIFT_STEP})"),
    );
}
