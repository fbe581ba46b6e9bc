//! Experiment orchestration.
//!
//! `run` executes the experiments named in a validated config, each against a
//! model assembled fresh from the config sections, and writes one verdict
//! file per experiment plus a table for the sweep-shaped ones.  Experiments
//! are independent, so they may execute on a small worker pool; report
//! content never depends on the thread count.  Any experiment error aborts
//! the run before the first report file is written.
//!
//! Fixed evaluation conventions, chosen so every quantity is derived from
//! the config alone:
//!
//! * single-time quantities (bounds, smoothness, sweep, embedding) are
//!   evaluated at the window midpoint;
//! * positivity and hermiticity scans use nine evenly spaced times covering
//!   the window;
//! * stabilizing shifts add `model.shift_c` on top of the semibound estimate
//!   over those scan times;
//! * the dyson sweep runs `refinement_levels` levels, halving both the
//!   coupling scale (from 1/2) and the step (from `time.dt`) per level;
//! * slope checks are skipped when the underlying defects sit at the
//!   floating-point floor and carry no fittable decay.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::analysis::{
    self, CausalityOptions, Direction, DysonOptions, EmbeddingOptions, ExperimentVerdict,
    InputDigest, PositivityOptions, Truncation, UniformityOptions,
};
use crate::cli::config::{ExperimentConfig, ExperimentKind};
use crate::cli::report::{self, float_cell, Manifest, ManifestEntry, Table};
use crate::coupling::{Coupling, CouplingTerm, FourPointKernel};
use crate::error::{Error, Result};
use crate::hamiltonians::Model;
use crate::linalg;
use crate::propagators::{reference_propagator, s_matrix, yosida_propagator};

/// States sampled for the embedding bound inside `qcheck`.
const EMBEDDING_SAMPLES: usize = 256;

/// Step sizes for the smoothness experiment.
const SMOOTHNESS_STEPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Times in the positivity and hermiticity scans.
const SCAN_POINTS: usize = 9;

/// Process exit code for an error: 2 configuration, 3 resources, 4 numerics.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::ModeOutOfRange { .. }
        | Error::BasisMismatch
        | Error::SupportOverlap(_) => 2,
        Error::ResourceLimit { .. } | Error::DenseTooLarge(_) | Error::Io(_) => 3,
        Error::Quadrature(_) | Error::Eigensolver(_) | Error::Solver(_) => 4,
    }
}

/// One line per experiment, for `list-experiments`.
pub fn list_experiments() -> String {
    let mut out = String::new();
    for kind in ExperimentKind::ALL {
        let _ = writeln!(out, "{:<12} {}", kind.name(), kind.summary());
    }
    out
}

/// Midpoint of the time window.
fn eval_time(config: &ExperimentConfig) -> f64 {
    0.5 * (config.time.t2 - config.time.t1)
}

/// Evenly spaced scan times from the window start to its end.
fn scan_times(config: &ExperimentConfig) -> Vec<f64> {
    let span = config.time.t1 + config.time.t2;
    (0..SCAN_POINTS)
        .map(|k| -config.time.t1 + span * k as f64 / (SCAN_POINTS - 1) as f64)
        .collect()
}

/// Model with the config coupling and a stabilizing shift.
fn stabilized_model(config: &ExperimentConfig) -> Result<Model> {
    let model = Model::assemble(config.basis()?, config.coupling()?)?;
    let shift = model.stabilizing_shift(&scan_times(config), config.model.shift_c)?;
    Ok(model.with_shift(shift))
}

/// Folds a sub-experiment's records into a composite verdict.
fn absorb(into: &mut ExperimentVerdict, from: ExperimentVerdict) {
    into.passed &= from.passed;
    into.measurements.extend(from.measurements);
    into.checks.extend(from.checks);
}

fn find_measurement(verdict: &ExperimentVerdict, label: &str) -> Option<f64> {
    verdict.measurements.iter().find(|m| m.label == label).map(|m| m.value)
}

fn identity_distance(matrix: &DMatrix<Complex64>) -> f64 {
    let dim = matrix.nrows();
    let mut worst = 0.0_f64;
    for r in 0..dim {
        for c in 0..dim {
            let expected = if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            worst = worst.max((matrix[(r, c)] - expected).norm());
        }
    }
    worst
}

fn run_bounds(config: &ExperimentConfig) -> Result<(ExperimentVerdict, Option<Table>)> {
    let basis = config.basis()?;
    let coupling = config.coupling()?;
    let t = eval_time(config);
    let tol = config.tolerances.chain_relative;

    let mut digest = InputDigest::new("bounds");
    digest.basis(&basis);
    digest.coupling(&coupling);
    digest.number("t", t);
    digest.number("chain_relative", tol);
    let mut verdict = ExperimentVerdict::new("bounds", digest.finish());

    let chain = coupling.young_chain_report(basis.grid(), t)?;
    verdict.measure("kernel l2 norm", chain.kernel_l2);
    verdict.measure("profile transform norm", chain.profile_norm);
    verdict.measure("omega product bound", chain.product_bound);
    verdict.measure("chain bound", chain.chain_bound);
    verdict.check(
        "kernel l2 within chain bound",
        chain.kernel_l2,
        Direction::AtMost,
        chain.chain_bound * (1.0 + tol),
        "bounds.chain_relative",
    );

    let model = Model::assemble(Arc::clone(&basis), coupling)?;
    let mut table = Table::new(vec!["creator_weight", "sandwiched_norm", "kernel_l2", "ratio"]);
    for j in 0..=4 {
        let report = model.sandwich_bound_report(t, j)?;
        verdict.measure(format!("sandwich ratio[j={j}]"), report.ratio);
        table.push(vec![
            j.to_string(),
            float_cell(report.sandwiched_norm),
            float_cell(report.kernel_l2),
            float_cell(report.ratio),
        ]);
    }
    Ok((verdict, Some(table)))
}

fn run_smoothness(config: &ExperimentConfig) -> Result<(ExperimentVerdict, Option<Table>)> {
    let basis = config.basis()?;
    let coupling = config.coupling()?;
    let t = eval_time(config);
    let floor = config.tolerances.smoothness_slope_floor;

    let mut digest = InputDigest::new("smoothness");
    digest.basis(&basis);
    digest.coupling(&coupling);
    digest.number("t", t);
    digest.number("slope_floor", floor);
    for &h in &SMOOTHNESS_STEPS {
        digest.number("h", h);
    }
    let mut verdict = ExperimentVerdict::new("smoothness", digest.finish());

    let model = Model::assemble(basis, coupling)?;
    let report = model.smoothness_report(t, &SMOOTHNESS_STEPS)?;
    let mut table = Table::new(vec!["h", "first_defect", "second_defect"]);
    for (k, &(h, first)) in report.first.iter().enumerate() {
        let (_, second) = report.second[k];
        verdict.measure(format!("first defect[h={h}]"), first);
        verdict.measure(format!("second defect[h={h}]"), second);
        table.push(vec![float_cell(h), float_cell(first), float_cell(second)]);
    }
    if let Some(slope) = report.first_slope {
        verdict.check(
            "first derivative defect decay",
            slope,
            Direction::AtLeast,
            floor,
            "smoothness.slope_floor",
        );
    }
    if let Some(slope) = report.second_slope {
        verdict.check(
            "second derivative defect decay",
            slope,
            Direction::AtLeast,
            floor,
            "smoothness.slope_floor",
        );
    }
    Ok((verdict, Some(table)))
}

fn run_propagate(config: &ExperimentConfig) -> Result<(ExperimentVerdict, Option<Table>)> {
    let grid = config.grid()?;
    let model = stabilized_model(config)?;
    let tol = &config.tolerances;

    let mut digest = InputDigest::new("propagate");
    digest.model(&model);
    digest.time_grid(&grid);
    for &n in &config.schemes.yosida_n {
        digest.integer("n", i64::from(n));
    }
    for &k in &config.schemes.yosida_k {
        digest.integer("K", i64::from(k));
    }
    digest.number("unitarity", tol.unitarity);
    digest.number("composition", tol.composition);
    let mut verdict = ExperimentVerdict::new("propagate", digest.finish());

    let steps = grid.steps();
    let start = grid.node(0);
    let mid = grid.node(steps / 2);
    let end = grid.node(steps);

    let full = reference_propagator(&model, &grid, end, start)?;
    verdict.check(
        "reference unitarity defect",
        full.unitarity_defect,
        Direction::AtMost,
        tol.unitarity,
        "propagate.unitarity",
    );

    let head = reference_propagator(&model, &grid, end, mid)?;
    let tail = reference_propagator(&model, &grid, mid, start)?;
    let composed = &head.matrix * &tail.matrix;
    let composition = linalg::op_norm(&(&full.matrix - composed))?;
    verdict.check(
        "composition defect",
        composition,
        Direction::AtMost,
        tol.composition,
        "propagate.composition",
    );

    // Equal endpoints take zero steps, so the result is the identity matrix
    // itself, not merely close to it.
    let stay = reference_propagator(&model, &grid, mid, mid)?;
    verdict.check(
        "equal-endpoint identity distance",
        identity_distance(&stay.matrix),
        Direction::AtMost,
        0.0,
        "propagate.identity",
    );

    let mut table =
        Table::new(vec!["n", "slices", "defect", "error_estimate", "unitarity_defect"]);
    for &n in &config.schemes.yosida_n {
        for &k in &config.schemes.yosida_k {
            let record = yosida_propagator(&model, &grid, n, k, end, start)?;
            let defect = linalg::op_norm(&(&record.matrix - &full.matrix))?;
            verdict.measure(format!("scheme defect[n={n}, K={k}]"), defect);
            table.push(vec![
                n.to_string(),
                k.to_string(),
                float_cell(defect),
                record.error_estimate.map(float_cell).unwrap_or_default(),
                float_cell(record.unitarity_defect),
            ]);
        }
    }
    Ok((verdict, Some(table)))
}

fn run_smatrix(config: &ExperimentConfig) -> Result<(ExperimentVerdict, Option<Table>)> {
    let grid = config.grid()?;
    let model = stabilized_model(config)?;
    let tol = &config.tolerances;

    let mut digest = InputDigest::new("smatrix");
    digest.model(&model);
    digest.time_grid(&grid);
    digest.number("unitarity", tol.unitarity);
    digest.number("shift_invariance", tol.shift_invariance);
    let mut verdict = ExperimentVerdict::new("smatrix", digest.finish());

    let s = s_matrix(&model, &grid)?;
    verdict.check(
        "scattering unitarity defect",
        s.unitarity_defect,
        Direction::AtMost,
        tol.unitarity,
        "smatrix.unitarity",
    );

    let identity = identity_distance(&s.matrix);
    verdict.measure("distance from identity", identity);
    if config.coupling_is_zero() {
        verdict.check(
            "free scattering is the identity",
            identity,
            Direction::AtMost,
            tol.unitarity,
            "smatrix.identity",
        );
    }

    let reshifted = model.with_shift(model.shift() + 5.0);
    let s_reshifted = s_matrix(&reshifted, &grid)?;
    let shift_defect = linalg::op_norm(&(&s.matrix - s_reshifted.matrix))?;
    verdict.check(
        "shift invariance defect",
        shift_defect,
        Direction::AtMost,
        tol.shift_invariance,
        "smatrix.shift_invariance",
    );
    Ok((verdict, None))
}

fn run_causality(config: &ExperimentConfig) -> Result<(ExperimentVerdict, Option<Table>)> {
    let basis = config.basis()?;
    let grid = config.grid()?;
    let combined = config.coupling()?;
    if combined.terms().len() != 2 {
        return Err(Error::Config(format!(
            "causality needs exactly two coupling terms, got {}",
            combined.terms().len()
        )));
    }
    let single = |term: &CouplingTerm| {
        Coupling::product(term.amplitude, term.temporal.clone(), term.spatial.clone())
    };
    let first = single(&combined.terms()[0])?;
    let second = single(&combined.terms()[1])?;
    let onset = |c: &Coupling| c.temporal_support().map(|(lo, _)| lo);
    let (Some(first_onset), Some(second_onset)) = (onset(&first), onset(&second)) else {
        return Err(Error::SupportOverlap(
            "causality splitting needs compactly supported pulses".into(),
        ));
    };
    let (later, earlier) =
        if first_onset >= second_onset { (first, second) } else { (second, first) };

    // Both factors carry the shift stabilizing the combined model, so the
    // split propagators compose in a single frame.
    let shift = Model::assemble(Arc::clone(&basis), combined)?
        .stabilizing_shift(&scan_times(config), config.model.shift_c)?;
    let later_model = Model::assemble(Arc::clone(&basis), later)?.with_shift(shift);
    let earlier_model = Model::assemble(basis, earlier)?.with_shift(shift);

    let opts = CausalityOptions {
        levels: config.time.refinement_levels,
        defect_bound: config.tolerances.causality_defect,
        order: config.tolerances.causality_order,
        order_slack: config.tolerances.causality_order_slack,
    };
    let verdict = analysis::causality_experiment(&later_model, &earlier_model, &grid, &opts)?;
    Ok((verdict, None))
}

fn run_qcheck(config: &ExperimentConfig) -> Result<(ExperimentVerdict, Option<Table>)> {
    let grid = config.grid()?;
    let model = stabilized_model(config)?;
    let times = scan_times(config);
    let tol = &config.tolerances;

    let mut digest = InputDigest::new("qcheck");
    digest.model(&model);
    digest.time_grid(&grid);
    for &t in &times {
        digest.number("t", t);
    }
    digest.number("eigenvalue_floor", tol.qcheck_eigenvalue_floor);
    digest.number("hermiticity", tol.qcheck_hermiticity);
    digest.number("embedding_excess", tol.embedding_excess);
    digest.integer("samples", EMBEDDING_SAMPLES as i64);
    digest.integer("seed", config.seed as i64);
    let mut verdict = ExperimentVerdict::new("qcheck", digest.finish());

    let positivity = analysis::q_positivity(
        &model,
        &grid,
        &times,
        &PositivityOptions { eigenvalue_floor: tol.qcheck_eigenvalue_floor },
    )?;
    absorb(&mut verdict, positivity);

    // The solve at the base time short-circuits to the identity matrix.
    let base = analysis::q_operator(&model, &grid, grid.node(0))?;
    verdict.check(
        "base-point identity distance",
        identity_distance(&base.dense()?),
        Direction::AtMost,
        0.0,
        "qcheck.identity",
    );

    let b = model.h_tilde_dense(grid.node(0))?;
    let mut worst = 0.0_f64;
    for &t in &times[1..] {
        let q = analysis::q_operator(&model, &grid, t)?.dense()?;
        let bq = &b * &q;
        let leak = linalg::op_norm(&(bq.adjoint() - &bq))?;
        let scale = linalg::op_norm(&bq)?.max(1.0);
        worst = worst.max(leak / scale);
    }
    verdict.check(
        "form hermiticity leak",
        worst,
        Direction::AtMost,
        tol.qcheck_hermiticity,
        "qcheck.hermiticity",
    );

    let samples = analysis::seeded_states(model.dimension(), EMBEDDING_SAMPLES, config.seed);
    let embedding = analysis::embedding_experiment(
        &model,
        eval_time(config),
        &samples,
        &EmbeddingOptions { tolerance: tol.embedding_excess },
    )?;
    absorb(&mut verdict, embedding);

    let mut table = Table::new(vec!["t", "lambda_min", "lambda_max", "a"]);
    for &t in &times {
        let cell = |label: String| find_measurement(&verdict, &label).map(float_cell);
        table.push(vec![
            float_cell(t),
            cell(format!("lambda_min[t={t}]")).unwrap_or_default(),
            cell(format!("lambda_max[t={t}]")).unwrap_or_default(),
            cell(format!("a[t={t}]")).unwrap_or_default(),
        ]);
    }
    Ok((verdict, Some(table)))
}

fn run_sweep(config: &ExperimentConfig) -> Result<(ExperimentVerdict, Option<Table>)> {
    let coupling = config.coupling()?;
    let t = eval_time(config);
    let j = config.model.mode_cutoff;
    let n = config.model.particle_cutoff;
    // The configured truncation and its one-step refinements in each cutoff.
    let truncations = [
        Truncation { mode_cutoff: j, particle_cutoff: n },
        Truncation { mode_cutoff: j + 1, particle_cutoff: n },
        Truncation { mode_cutoff: j, particle_cutoff: n + 1 },
        Truncation { mode_cutoff: j + 1, particle_cutoff: n + 1 },
    ];
    let verdict = analysis::uniformity_sweep(
        &coupling,
        config.model.mass,
        config.model.box_length,
        t,
        &truncations,
        &UniformityOptions { growth_bound: config.tolerances.sweep_growth },
    )?;
    let mut table = Table::new(vec!["mode_cutoff", "particle_cutoff", "ratio"]);
    for tr in &truncations {
        let label = format!("ratio[J={}, N={}]", tr.mode_cutoff, tr.particle_cutoff);
        if let Some(ratio) = find_measurement(&verdict, &label) {
            table.push(vec![
                tr.mode_cutoff.to_string(),
                tr.particle_cutoff.to_string(),
                float_cell(ratio),
            ]);
        }
    }
    Ok((verdict, Some(table)))
}

fn run_dyson(config: &ExperimentConfig) -> Result<(ExperimentVerdict, Option<Table>)> {
    let basis = config.basis()?;
    let shape = config.coupling()?;
    let levels: Vec<(f64, f64)> = (0..config.time.refinement_levels)
        .map(|level| {
            (0.5_f64.powi(level as i32 + 1), config.time.dt * 0.5_f64.powi(level as i32))
        })
        .collect();
    let verdict = analysis::dyson_consistency_experiment(
        &basis,
        &shape,
        config.time.t1,
        config.time.t2,
        &levels,
        &DysonOptions {
            stability: config.tolerances.dyson_stability,
            exponent_slack: config.tolerances.dyson_exponent_slack,
        },
    )?;
    let mut table = Table::new(vec!["lambda", "dt", "defect1", "defect2", "cubic_ratio"]);
    for &(lambda, dt) in &levels {
        let entries = (
            find_measurement(&verdict, &format!("defect1[lambda={lambda}]")),
            find_measurement(&verdict, &format!("defect2[lambda={lambda}]")),
            find_measurement(&verdict, &format!("cubic ratio[lambda={lambda}]")),
        );
        if let (Some(d1), Some(d2), Some(ratio)) = entries {
            table.push(vec![
                float_cell(lambda),
                float_cell(dt),
                float_cell(d1),
                float_cell(d2),
                float_cell(ratio),
            ]);
        }
    }
    Ok((verdict, Some(table)))
}

fn run_one(
    config: &ExperimentConfig,
    kind: ExperimentKind,
) -> Result<(ExperimentVerdict, Option<Table>)> {
    match kind {
        ExperimentKind::Bounds => run_bounds(config),
        ExperimentKind::Smoothness => run_smoothness(config),
        ExperimentKind::Propagate => run_propagate(config),
        ExperimentKind::Smatrix => run_smatrix(config),
        ExperimentKind::Causality => run_causality(config),
        ExperimentKind::Qcheck => run_qcheck(config),
        ExperimentKind::Sweep => run_sweep(config),
        ExperimentKind::Dyson => run_dyson(config),
    }
}

/// What a completed run produced.
#[derive(Debug)]
pub struct RunOutcome {
    /// Conjunction of the per-experiment verdict flags.
    pub all_passed: bool,
    /// Files written, manifest last.
    pub reports: Vec<PathBuf>,
    /// One human-readable status line per experiment.
    pub lines: Vec<String>,
}

type JobResult = (Result<(ExperimentVerdict, Option<Table>)>, u128);

/// Runs every configured experiment and writes the report set.
pub fn run(config: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let jobs = &config.experiments;
    let workers = threads.max(1).min(jobs.len().max(1));

    let mut slots: Vec<Option<JobResult>> = (0..jobs.len()).map(|_| None).collect();
    if workers <= 1 {
        for (i, &kind) in jobs.iter().enumerate() {
            let clock = Instant::now();
            let out = run_one(config, kind);
            slots[i] = Some((out, clock.elapsed().as_millis()));
        }
    } else {
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(workers);
            for _ in 0..workers {
                handles.push(scope.spawn(|| {
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= jobs.len() {
                            break;
                        }
                        let clock = Instant::now();
                        let out = run_one(config, jobs[i]);
                        mine.push((i, out, clock.elapsed().as_millis()));
                    }
                    mine
                }));
            }
            for handle in handles {
                for (i, out, ms) in handle.join().expect("experiment worker panicked") {
                    slots[i] = Some((out, ms));
                }
            }
        });
    }

    // The first failure (in config order) aborts before any report lands, so
    // a report directory is always complete.
    let mut finished = Vec::with_capacity(jobs.len());
    for (slot, &kind) in slots.into_iter().zip(jobs) {
        let (outcome, ms) = slot.expect("worklist covered every job");
        finished.push((kind, outcome?, ms));
    }

    let mut run_outcome =
        RunOutcome { all_passed: true, reports: Vec::new(), lines: Vec::new() };
    let mut entries = Vec::with_capacity(finished.len());
    for (kind, (verdict, table), ms) in finished {
        run_outcome.all_passed &= verdict.passed;
        run_outcome.reports.push(report::write_verdict(out_dir, kind.name(), &verdict)?);
        if let Some(table) = table {
            run_outcome.reports.push(table.write(out_dir, kind.name())?);
        }
        run_outcome.lines.push(format!(
            "{}: {} ({ms} ms)",
            kind.name(),
            if verdict.passed { "pass" } else { "FAIL" }
        ));
        entries.push(ManifestEntry { name: kind.name().into(), passed: verdict.passed, wall_ms: ms });
    }

    let manifest = Manifest {
        format_version: 1,
        crate_version: env!("CARGO_PKG_VERSION"),
        config_digest: config.digest(),
        seed: config.seed,
        threads: workers,
        generated_unix_ms: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0),
        experiments: entries,
    };
    run_outcome.reports.push(report::write_manifest(out_dir, &manifest)?);
    Ok(run_outcome)
}

/// Writes the assembled operators at `time` (window midpoint when `None`):
/// the free Hamiltonian, the number operator, the interaction, the shifted
/// total Hamiltonian, and the four-point kernel.
pub fn dump(
    config: &ExperimentConfig,
    out_dir: &Path,
    time: Option<f64>,
) -> Result<Vec<PathBuf>> {
    let t = time.unwrap_or_else(|| eval_time(config));
    std::fs::create_dir_all(out_dir)?;
    let basis = config.basis()?;
    let coupling = config.coupling()?;
    let model = Model::assemble(Arc::clone(&basis), coupling.clone())?;
    let shift = model.stabilizing_shift(&scan_times(config), config.model.shift_c)?;
    let tag = report::basis_tag(&basis);
    let dim = basis.dimension();

    let write = |name: &str, matrix: &DMatrix<Complex64>| -> Result<PathBuf> {
        let path = out_dir.join(name);
        report::write_matrix(&path, matrix, &tag, true)?;
        Ok(path)
    };

    let mut paths = Vec::new();
    let h0 = DMatrix::from_diagonal(&model.h0_diagonal().map(|w| Complex64::new(w, 0.0)));
    paths.push(write("h0.mtx", &h0)?);

    let number = DMatrix::from_diagonal(&DVector::from_fn(dim, |i, _| {
        Complex64::new(f64::from(basis.total_occupancy(i)), 0.0)
    }));
    paths.push(write("number.mtx", &number)?);

    let interaction = model.interaction_dense(t)?;
    paths.push(write("v_g.mtx", &interaction)?);

    let h_tilde = model.with_shift(shift).h_tilde_dense(t)?;
    paths.push(write("h_tilde.mtx", &h_tilde)?);

    let kernel = FourPointKernel::from_coupling(basis.grid(), &coupling, t)?;
    let kernel_path = out_dir.join("w_kernel.knl");
    report::write_kernel(&kernel_path, &kernel)?;
    paths.push(kernel_path);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{
        CouplingSection, ModelSection, OutputSection, ProfileSection, SchemesSection,
        TimeSection, Tolerances,
    };

    fn base_config(experiments: Vec<ExperimentKind>) -> ExperimentConfig {
        let config = ExperimentConfig {
            model: ModelSection {
                mass: 1.0,
                box_length: std::f64::consts::TAU,
                mode_cutoff: 1,
                particle_cutoff: 2,
                shift_c: 0.5,
            },
            coupling: vec![CouplingSection {
                amplitude: 0.4,
                temporal: ProfileSection::Bump { center: 0.0, halfwidth: 0.3 },
                spatial: ProfileSection::Bump { center: 0.0, halfwidth: 1.0 },
            }],
            time: TimeSection { t1: 1.0, t2: 1.0, dt: 1.0 / 64.0, refinement_levels: 2 },
            schemes: SchemesSection { yosida_n: vec![4, 16], yosida_k: vec![8] },
            experiments,
            tolerances: Tolerances::default(),
            output: OutputSection { directory: "reports".into() },
            seed: 11,
        };
        config.validate().unwrap();
        config
    }

    #[test]
    fn exit_codes_classify_every_error() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::InvalidParameter("x".into())), 2);
        assert_eq!(exit_code(&Error::BasisMismatch), 2);
        assert_eq!(exit_code(&Error::SupportOverlap("x".into())), 2);
        assert_eq!(exit_code(&Error::ModeOutOfRange { index: 3, cutoff: 1 }), 2);
        assert_eq!(exit_code(&Error::ResourceLimit { dim: 10, limit: 5 }), 3);
        assert_eq!(exit_code(&Error::DenseTooLarge(9)), 3);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 3);
        assert_eq!(exit_code(&Error::Eigensolver("x".into())), 4);
        assert_eq!(exit_code(&Error::Solver("x".into())), 4);
        assert_eq!(exit_code(&Error::Quadrature("x".into())), 4);
    }

    #[test]
    fn listing_names_every_experiment() {
        let listing = list_experiments();
        for kind in ExperimentKind::ALL {
            assert!(listing.contains(kind.name()));
        }
        assert_eq!(listing.lines().count(), ExperimentKind::ALL.len());
    }

    #[test]
    fn run_writes_complete_deterministic_reports() {
        let config = base_config(vec![
            ExperimentKind::Bounds,
            ExperimentKind::Smoothness,
            ExperimentKind::Smatrix,
        ]);
        let dir = tempfile::tempdir().unwrap();
        let first_dir = dir.path().join("first");
        let second_dir = dir.path().join("second");

        let outcome = run(&config, &first_dir, 1).unwrap();
        assert!(outcome.all_passed, "lines: {:?}", outcome.lines);
        assert_eq!(outcome.lines.len(), 3);
        for name in ["bounds.json", "bounds.csv", "smoothness.json", "smoothness.csv", "smatrix.json", "manifest.json"] {
            assert!(first_dir.join(name).is_file(), "missing {name}");
        }

        // A parallel rerun produces byte-identical reports.
        run(&config, &second_dir, 3).unwrap();
        for name in ["bounds.json", "bounds.csv", "smoothness.json", "smoothness.csv", "smatrix.json"] {
            assert_eq!(
                std::fs::read(first_dir.join(name)).unwrap(),
                std::fs::read(second_dir.join(name)).unwrap(),
                "{name} differs between runs"
            );
        }

        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(first_dir.join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["config_digest"].as_str().unwrap(), config.digest());
        assert_eq!(manifest["experiments"].as_array().unwrap().len(), 3);
        assert_eq!(manifest["format_version"], 1);
    }

    #[test]
    fn free_scattering_reports_the_identity() {
        let mut config = base_config(vec![ExperimentKind::Smatrix]);
        config.coupling.clear();
        config.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run(&config, dir.path(), 1).unwrap();
        assert!(outcome.all_passed);

        let verdict: ExperimentVerdict = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("smatrix.json")).unwrap(),
        )
        .unwrap();
        let identity = verdict
            .checks
            .iter()
            .find(|c| c.label == "free scattering is the identity")
            .expect("identity check present for g = 0");
        assert!(identity.passed);
        assert!(identity.value <= 1e-10);
    }

    #[test]
    fn propagation_experiments_pass_on_a_small_model() {
        let config = base_config(vec![ExperimentKind::Propagate, ExperimentKind::Qcheck]);
        let dir = tempfile::tempdir().unwrap();
        let outcome = run(&config, dir.path(), 2).unwrap();
        assert!(outcome.all_passed, "lines: {:?}", outcome.lines);

        let qcheck: ExperimentVerdict = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("qcheck.json")).unwrap(),
        )
        .unwrap();
        for label in
            ["base-point identity distance", "form hermiticity leak", "max relative excess"]
        {
            assert!(
                qcheck.checks.iter().any(|c| c.label == label)
                    || qcheck.measurements.iter().any(|m| m.label == label),
                "missing {label}"
            );
        }
        let table = std::fs::read_to_string(dir.path().join("qcheck.csv")).unwrap();
        assert_eq!(table.lines().count(), 1 + SCAN_POINTS);
        assert!(table.starts_with("t,lambda_min,lambda_max,a\n"));
    }

    #[test]
    fn causality_split_assigns_pulses_by_onset() {
        let mut config = base_config(vec![ExperimentKind::Bounds]);
        config.experiments = vec![ExperimentKind::Causality];
        config.coupling = vec![
            CouplingSection {
                amplitude: 0.4,
                // Listed late pulse first: the split must reorder by onset.
                temporal: ProfileSection::Bump { center: 0.55, halfwidth: 0.25 },
                spatial: ProfileSection::Bump { center: 0.0, halfwidth: 1.0 },
            },
            CouplingSection {
                amplitude: 0.4,
                temporal: ProfileSection::Bump { center: -0.55, halfwidth: 0.25 },
                spatial: ProfileSection::Bump { center: 0.0, halfwidth: 1.0 },
            },
        ];
        config.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run(&config, dir.path(), 1).unwrap();
        assert!(outcome.all_passed, "lines: {:?}", outcome.lines);

        // Swapping the listed order changes nothing observable.
        config.coupling.swap(0, 1);
        let swapped_dir = tempfile::tempdir().unwrap();
        run(&config, swapped_dir.path(), 1).unwrap();
        let read = |d: &Path| std::fs::read_to_string(d.join("causality.json")).unwrap();
        let strip_digest = |text: &str| {
            serde_json::from_str::<ExperimentVerdict>(text)
                .map(|mut v| {
                    v.digest.clear();
                    serde_json::to_string(&v).unwrap()
                })
                .unwrap()
        };
        assert_eq!(strip_digest(&read(dir.path())), strip_digest(&read(swapped_dir.path())));

        // Overlapping pulses are a configuration error, not a verdict.
        config.coupling[0].temporal = ProfileSection::Bump { center: 0.1, halfwidth: 0.4 };
        config.coupling[1].temporal = ProfileSection::Bump { center: -0.1, halfwidth: 0.4 };
        config.validate().unwrap();
        let err = run(&config, tempfile::tempdir().unwrap().path(), 1).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn dump_reloads_bit_exactly_and_zero_coupling_dumps_zero() {
        let config = base_config(vec![ExperimentKind::Bounds]);
        let dir = tempfile::tempdir().unwrap();
        let paths = dump(&config, dir.path(), Some(0.1)).unwrap();
        assert_eq!(paths.len(), 5);

        let (header, h0) = report::read_matrix(&dir.path().join("h0.mtx")).unwrap();
        assert_eq!(header.dim, 10);
        assert!(header.hermitian);

        // The free energies must match a recompute from the dispersion
        // relation: modes at k = 2 pi j / L carry sqrt(k^2 + m^2).
        let omega = |j: f64| (j * j + 1.0).sqrt(); // L = 2 pi, m = 1
        let (_, number) = report::read_matrix(&dir.path().join("number.mtx")).unwrap();
        let mut seen_two_particle = false;
        for i in 0..10 {
            let n = number[(i, i)].re;
            let e = h0[(i, i)].re;
            match n as u32 {
                0 => assert_eq!(e, 0.0),
                1 => assert!([omega(0.0), omega(1.0)].iter().any(|&w| (e - w).abs() < 1e-12)),
                2 => {
                    seen_two_particle = true;
                    assert!(e >= 2.0 * omega(0.0) - 1e-12 && e <= 2.0 * omega(1.0) + 1e-12);
                }
                other => panic!("unexpected occupancy {other}"),
            }
        }
        assert!(seen_two_particle);

        // Bit-exact against the in-memory operators.
        let model = Model::assemble(config.basis().unwrap(), config.coupling().unwrap()).unwrap();
        let (_, v) = report::read_matrix(&dir.path().join("v_g.mtx")).unwrap();
        let live = model.interaction_dense(0.1).unwrap();
        for r in 0..10 {
            for c in 0..10 {
                assert_eq!(v[(r, c)].re.to_bits(), live[(r, c)].re.to_bits());
                assert_eq!(v[(r, c)].im.to_bits(), live[(r, c)].im.to_bits());
            }
        }
        let (cutoff, values) = report::read_kernel(&dir.path().join("w_kernel.knl")).unwrap();
        assert_eq!(cutoff, 1);
        assert_eq!(values.len(), 81);

        // Switched-off coupling dumps a zero interaction of full dimension.
        let mut free = config;
        free.coupling.clear();
        free.validate().unwrap();
        let free_dir = tempfile::tempdir().unwrap();
        dump(&free, free_dir.path(), None).unwrap();
        let (header, v) = report::read_matrix(&free_dir.path().join("v_g.mtx")).unwrap();
        assert_eq!(header.dim, 10);
        assert!(v.iter().all(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn sweep_and_dyson_run_end_to_end() {
        let mut config = base_config(vec![ExperimentKind::Sweep, ExperimentKind::Dyson]);
        config.time.dt = 1.0 / 96.0;
        // The base truncation sits below the particle threshold where whole
        // operator classes first appear, so the ratio roughly doubles from
        // N = 2 to N = 3; the growth bound must leave room for that step.
        config.tolerances.sweep_growth = 4.0;
        config.tolerances.dyson_stability = 0.3;
        config.tolerances.dyson_exponent_slack = 0.3;
        config.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run(&config, dir.path(), 2).unwrap();

        let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(sweep.lines().count(), 5, "{sweep}");
        let dyson = std::fs::read_to_string(dir.path().join("dyson.csv")).unwrap();
        assert_eq!(dyson.lines().count(), 3, "{dyson}");
        assert!(outcome.all_passed, "lines: {:?}", outcome.lines);
    }
}
