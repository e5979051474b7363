//! Matching self-checks: greedy/Hungarian/exhaustive agreement on
//! factorized matrices and Hungarian optimality on general matrices.
//!
//! Random factors are drawn from a 1/128 dyadic grid so that every cell and
//! every assignment total is exact in floating point; equally-optimal
//! assignments then tie exactly and the matchers' shared canonical
//! tie-breaking is what the agreement check exercises. Roughly a third of
//! the entries duplicate earlier ones to cover tied scores.

use brmgr_core::matching::{
    brute_force_match, brute_force_match_cells, greedy_match, greedy_match_cells,
    hungarian_match, hungarian_match_cells, pairs_total,
};
use brmgr_core::{MatchedPair, RelevanceMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default RNG seed for the self-check.
pub const DEFAULT_SEED: u64 = 0xb12a;

/// Draws `len` log-scores from the exact dyadic grid, duplicating earlier
/// entries with probability 0.3.
pub fn dyadic_factors(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        if !values.is_empty() && rng.gen_bool(0.3) {
            let copy = values[rng.gen_range(0..values.len())];
            values.push(copy);
        } else {
            values.push(rng.gen_range(-12800..=12800) as f64 / 128.0);
        }
    }
    values
}

/// Draws an n×n grid of independent dyadic cells (generally not
/// factorizable).
pub fn dyadic_cells(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..n)
                .map(|_| rng.gen_range(-12800..=12800) as f64 / 128.0)
                .collect()
        })
        .collect()
}

fn pair_set(pairs: &[MatchedPair<f64>]) -> std::collections::BTreeSet<(usize, usize)> {
    pairs.iter().map(|p| (p.gen_index, p.retr_index)).collect()
}

/// Checks that greedy, Hungarian, and exhaustive matching return identical
/// pair sets on random square factorized matrices. Returns
/// (instances checked, failures).
pub fn check_rank_one_equivalence(
    instances: usize,
    max_size: usize,
    seed: u64,
) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..instances {
        let n = rng.gen_range(1..=max_size);
        let matrix =
            RelevanceMatrix::from_factors(dyadic_factors(&mut rng, n), dyadic_factors(&mut rng, n))
                .expect("finite factors");
        let greedy = pair_set(&greedy_match(&matrix));
        let hungarian = pair_set(&hungarian_match(&matrix));
        let brute = pair_set(&brute_force_match(&matrix).expect("within brute-force limit"));
        if greedy != hungarian || greedy != brute {
            failures += 1;
        }
    }
    (instances, failures)
}

/// Checks that the Hungarian total equals the exhaustive optimum exactly on
/// random general square matrices. Returns (instances checked, failures).
pub fn check_hungarian_optimality(instances: usize, max_size: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..instances {
        let n = rng.gen_range(1..=max_size);
        let cells = dyadic_cells(&mut rng, n);
        let hungarian = hungarian_match_cells(&cells);
        let brute = brute_force_match_cells(&cells).expect("within brute-force limit");
        if pairs_total(&hungarian) != pairs_total(&brute) {
            failures += 1;
        }
    }
    (instances, failures)
}

/// Fixed non-factorizable matrix on which greedy is strictly worse than the
/// optimal assignment — the factorization premise is necessary.
pub fn greedy_suboptimality_witness() -> bool {
    let cells = vec![vec![10.0, 9.0], vec![9.0, 1.0]];
    let greedy_total = pairs_total(&greedy_match_cells(&cells));
    let optimal_total = pairs_total(&brute_force_match_cells(&cells).expect("2x2"));
    greedy_total == 11.0 && optimal_total == 18.0 && greedy_total < optimal_total
}

/// Outcome of the full self-check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchCheckReport {
    pub rank_one_instances: usize,
    pub rank_one_failures: usize,
    pub general_instances: usize,
    pub general_failures: usize,
    pub witness_holds: bool,
}

impl MatchCheckReport {
    pub fn passed(&self) -> bool {
        self.rank_one_failures == 0 && self.general_failures == 0 && self.witness_holds
    }

    pub fn render(&self) -> String {
        let verdict = |failed: usize| if failed == 0 { "PASS" } else { "FAIL" };
        format!(
            "greedy/hungarian/exhaustive agreement on factorized matrices: {} ({}/{} instances)\n\
             hungarian total equals exhaustive optimum on general matrices: {} ({}/{} instances)\n\
             greedy suboptimality witness on a non-factorizable matrix: {}\n",
            verdict(self.rank_one_failures),
            self.rank_one_instances - self.rank_one_failures,
            self.rank_one_instances,
            verdict(self.general_failures),
            self.general_instances - self.general_failures,
            self.general_instances,
            if self.witness_holds { "PASS" } else { "FAIL" },
        )
    }
}

/// Runs all three checks.
pub fn run_match_check(instances: usize, max_size: usize, seed: u64) -> MatchCheckReport {
    let (rank_one_instances, rank_one_failures) =
        check_rank_one_equivalence(instances, max_size, seed);
    let general_instances = instances / 2;
    let (general_instances, general_failures) =
        check_hungarian_optimality(general_instances.max(1), max_size, seed.wrapping_add(1));
    MatchCheckReport {
        rank_one_instances,
        rank_one_failures,
        general_instances,
        general_failures,
        witness_holds: greedy_suboptimality_witness(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_check_passes() {
        let report = run_match_check(60, 5, DEFAULT_SEED);
        assert!(report.passed(), "{}", report.render());
        assert!(report.render().contains("PASS"));
    }

    #[test]
    fn witness_holds() {
        assert!(greedy_suboptimality_witness());
    }
}
