//! Seeded solver benchmark.
//!
//! Goals are forward-kinematics images of uniformly random joint angles, so
//! every goal is reachable. Each trial starts from the rest pose.

use kinesnap::{
    fk_tip, solve_ik, ChainDefinition, DofVector, SolveMethod, SolverConfig, SolverError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: SolveMethod,
    pub trials: usize,
    pub converged: usize,
    pub mean_iterations: f64,
    pub mean_residual: f64,
}

impl BenchRow {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.converged as f64 / self.trials as f64
        }
    }
}

/// Random reachable goals for `chain`, identical for a given seed.
pub fn random_goals(chain: &ChainDefinition, trials: usize, seed: u64) -> Vec<kinesnap::Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let angles: Vec<f64> = (0..chain.dof_count())
                .map(|_| rng.random_range(-PI..PI))
                .collect();
            let dofs = DofVector::new(angles).expect("sampled angles are finite");
            fk_tip(chain, &dofs).expect("length matches the chain")
        })
        .collect()
}

/// Runs both solve methods on the same goals. Rows are pseudo-inverse first.
pub fn run_bench(
    chain: &ChainDefinition,
    trials: usize,
    seed: u64,
) -> Result<Vec<BenchRow>, SolverError> {
    let goals = random_goals(chain, trials, seed);
    let start = chain.zero_pose_dofs();
    [SolveMethod::PseudoInverse, SolveMethod::Transpose]
        .into_iter()
        .map(|method| {
            let cfg = SolverConfig::for_method(method);
            let mut converged = 0;
            let mut iterations = 0usize;
            let mut residual = 0.0;
            for goal in &goals {
                let r = solve_ik(chain, &start, goal, &cfg)?;
                converged += usize::from(r.converged());
                iterations += r.iterations_used;
                residual += r.residual;
            }
            let n = trials.max(1) as f64;
            Ok(BenchRow {
                method,
                trials,
                converged,
                mean_iterations: iterations as f64 / n,
                mean_residual: residual / n,
            })
        })
        .collect()
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:<15} {:>7} {:>10} {:>8} {:>10} {:>14}\n",
        "method", "trials", "converged", "rate", "mean_iter", "mean_residual"
    );
    for row in rows {
        let method = match row.method {
            SolveMethod::PseudoInverse => "pseudo_inverse",
            SolveMethod::Transpose => "transpose",
        };
        out.push_str(&format!(
            "{:<15} {:>7} {:>10} {:>8.3} {:>10.2} {:>14.3e}\n",
            method,
            row.trials,
            row.converged,
            row.rate(),
            row.mean_iterations,
            row.mean_residual
        ));
    }
    out
}
