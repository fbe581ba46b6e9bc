// Drives the experiment layer end to end the way a consumer would:
// assemble models, run every experiment, print verdict JSON, and exercise
// one rejection path. Exits nonzero if any verdict fails.

use std::sync::Arc;

use phi4lab::analysis::{
    causality_experiment, dyson_consistency_experiment, embedding_experiment, q_operator,
    q_positivity, seeded_states, uniformity_sweep, CausalityOptions, DysonOptions,
    EmbeddingOptions, PositivityOptions, Truncation, UniformityOptions,
};
use phi4lab::coupling::{Coupling, Profile};
use phi4lab::fock::{FockBasis, ModeGrid};
use phi4lab::hamiltonians::Model;
use phi4lab::propagators::TimeGrid;

fn main() {
    let basis = FockBasis::enumerate(
        ModeGrid::new(1.0, 2.0 * std::f64::consts::PI, 1).unwrap(),
        2,
    )
    .unwrap();
    let grid = TimeGrid::new(1.0, 1.0, 1.0 / 64.0).unwrap();

    let bump = |center: f64| {
        Coupling::product(
            0.4,
            Profile::bump(center, 0.3).unwrap(),
            Profile::bump(0.0, 1.0).unwrap(),
        )
        .unwrap()
    };
    let late = Model::assemble(Arc::clone(&basis), bump(0.5))
        .unwrap()
        .with_shift(1.5);
    let early = Model::assemble(Arc::clone(&basis), bump(-0.5))
        .unwrap()
        .with_shift(1.5);

    let mut verdicts = Vec::new();
    verdicts.push(causality_experiment(&late, &early, &grid, &CausalityOptions::default()).unwrap());
    verdicts.push(
        q_positivity(
            &late,
            &grid,
            &[-0.5, 0.0, 0.5],
            &PositivityOptions::default(),
        )
        .unwrap(),
    );
    let samples = seeded_states(basis.dimension(), 64, 7);
    verdicts.push(embedding_experiment(&late, 0.5, &samples, &EmbeddingOptions::default()).unwrap());
    let smooth = Coupling::product(
        0.5,
        Profile::gaussian(0.0, 0.25).unwrap(),
        Profile::gaussian(0.0, 0.4).unwrap(),
    )
    .unwrap();
    verdicts.push(
        uniformity_sweep(
            &smooth,
            1.0,
            2.0 * std::f64::consts::PI,
            0.1,
            &[
                Truncation { mode_cutoff: 1, particle_cutoff: 4 },
                Truncation { mode_cutoff: 2, particle_cutoff: 4 },
            ],
            &UniformityOptions::default(),
        )
        .unwrap(),
    );
    let shape = Coupling::product(
        3.0,
        Profile::gaussian(0.0, 0.1).unwrap(),
        Profile::gaussian(0.0, 0.4).unwrap(),
    )
    .unwrap();
    verdicts.push(
        dyson_consistency_experiment(
            &basis,
            &shape,
            0.5,
            0.5,
            &[(0.4, 1.0 / 256.0), (0.2, 1.0 / 512.0)],
            &DysonOptions {
                stability: 0.3,
                exponent_slack: 0.3,
            },
        )
        .unwrap(),
    );

    let q = q_operator(&late, &grid, 0.25).unwrap();
    eprintln!(
        "q(0.25): dim {} frobenius {:.6}",
        q.dense().unwrap().nrows(),
        q.frobenius()
    );

    // rejection path: overlapping supports must refuse to run
    let overlapping = Model::assemble(Arc::clone(&basis), bump(0.3))
        .unwrap()
        .with_shift(1.5);
    match causality_experiment(&overlapping, &late, &grid, &CausalityOptions::default()) {
        Err(e) => eprintln!("rejected as expected: {e}"),
        Ok(_) => {
            eprintln!("overlap was not rejected");
            std::process::exit(1);
        }
    }

    let mut failed = false;
    for v in &verdicts {
        println!("{}", serde_json::to_string(v).unwrap());
        failed |= !v.passed;
    }
    eprintln!(
        "{} experiments, {} passed",
        verdicts.len(),
        verdicts.iter().filter(|v| v.passed).count()
    );
    if failed {
        std::process::exit(1);
    }
}
