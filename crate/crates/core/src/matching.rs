//! Pairing generated with retrieved passages.
//!
//! [`greedy_match`] is the production path: it repeatedly takes the highest
//! remaining cell of the combination matrix. [`hungarian_match`] and
//! [`brute_force_match`] solve the assignment problem exactly and exist to
//! validate the greedy/assignment equivalence on factorized (log-rank-one)
//! matrices.
//!
//! On a square log-rank-one matrix every perfect matching has the same
//! total (each row and column contributes exactly once), so the assignment
//! optimum is decided entirely by tie-breaking. All matchers here therefore
//! share one canonical rule: among equal-total assignments, prefer the one
//! whose selected cells, sorted by value descending, are lexicographically
//! largest, breaking value ties by the lower (gen, retr) index pair. That
//! canonical optimum is exactly the greedy selection when the matrix
//! factorizes, and an ordinary maximum-total assignment otherwise.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{MatchedPair, Passage, RelevanceMatrix, Scalar, ScoredPassage};

/// Largest `min(M, N)` accepted by [`brute_force_match`].
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Offset below the minimum finite cell used to pad rectangular matrices to
/// square for the Hungarian solver.
const PAD_OFFSET: f64 = 1e6;

/// Matching failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchError {
    TooLarge {
        size: usize,
        limit: usize,
    },
    IndexOutOfRange {
        gen_index: usize,
        retr_index: usize,
        gen_len: usize,
        retr_len: usize,
    },
    DuplicateIndex {
        gen_index: usize,
        retr_index: usize,
    },
}

impl fmt::Display for MatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchError::TooLarge { size, limit } => {
                write!(f, "exhaustive matching limited to {limit} pairs, got {size}")
            }
            MatchError::IndexOutOfRange {
                gen_index,
                retr_index,
                gen_len,
                retr_len,
            } => write!(
                f,
                "pair ({gen_index}, {retr_index}) out of range for {gen_len}x{retr_len} lists"
            ),
            MatchError::DuplicateIndex {
                gen_index,
                retr_index,
            } => write!(f, "pair ({gen_index}, {retr_index}) reuses a matched index"),
        }
    }
}

impl std::error::Error for MatchError {}

/// Order of the two passages inside each emitted pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlattenPolicy {
    RetrievedFirst,
    GeneratedFirst,
}

/// Greedy matching: repeatedly selects the maximum cell among unmatched
/// rows and columns until `min(M, N)` pairs exist. Ties prefer the lower
/// gen index, then the lower retr index. Output is in selection order,
/// which is descending combined score.
pub fn greedy_match<T: Scalar>(matrix: &RelevanceMatrix<T>) -> Vec<MatchedPair<T>> {
    greedy_match_cells(matrix.cells())
}

/// [`greedy_match`] on a raw rectangular score grid.
pub fn greedy_match_cells<T: Scalar>(cells: &[Vec<T>]) -> Vec<MatchedPair<T>> {
    let rows = cells.len();
    let cols = if rows == 0 { 0 } else { cells[0].len() };
    let count = rows.min(cols);
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..rows {
            if row_used[i] {
                continue;
            }
            for j in 0..cols {
                if col_used[j] {
                    continue;
                }
                // Strict comparison plus ascending scan keeps the lowest
                // (gen, retr) pair on ties.
                let better = match best {
                    None => true,
                    Some((bi, bj)) => cells[i][j] > cells[bi][bj],
                };
                if better {
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best.expect("nonempty submatrix");
        row_used[i] = true;
        col_used[j] = true;
        pairs.push(MatchedPair {
            gen_index: i,
            retr_index: j,
            combined_score: cells[i][j],
        });
    }
    pairs
}

/// Optimal assignment via the Hungarian algorithm (maximization by negating
/// the classical minimization formulation), with the module's canonical
/// tie-breaking. Rectangular inputs are padded to square with
/// `min finite cell - 1e6` and padded assignments stripped. Output is
/// sorted by combined score descending, ties by (gen, retr) ascending.
pub fn hungarian_match<T: Scalar>(matrix: &RelevanceMatrix<T>) -> Vec<MatchedPair<T>> {
    hungarian_match_cells(matrix.cells())
}

/// [`hungarian_match`] on a raw rectangular score grid.
pub fn hungarian_match_cells<T: Scalar>(cells: &[Vec<T>]) -> Vec<MatchedPair<T>> {
    let rows = cells.len();
    let cols = if rows == 0 { 0 } else { cells[0].len() };
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let dim = rows.max(cols);

    let min_cell = cells
        .iter()
        .flatten()
        .copied()
        .fold(T::infinity(), T::min);
    let pad = min_cell - T::from_f64(PAD_OFFSET).expect("pad offset fits scalar");
    let padded: Vec<Vec<T>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| if i < rows && j < cols { cells[i][j] } else { pad })
                .collect()
        })
        .collect();

    let assignment = canonical_max_assignment(&padded);
    let mut pairs: Vec<MatchedPair<T>> = assignment
        .into_iter()
        .filter(|&(i, j)| i < rows && j < cols)
        .map(|(i, j)| MatchedPair {
            gen_index: i,
            retr_index: j,
            combined_score: cells[i][j],
        })
        .collect();
    sort_pairs_desc(&mut pairs);
    pairs
}

/// Exhaustive assignment oracle: maximizes the total over all injections of
/// the smaller side into the larger, resolving ties by the module's
/// canonical rule. Fails with [`MatchError::TooLarge`] when
/// `min(M, N) > 8`. Output is sorted like [`hungarian_match`].
pub fn brute_force_match<T: Scalar>(
    matrix: &RelevanceMatrix<T>,
) -> Result<Vec<MatchedPair<T>>, MatchError> {
    brute_force_match_cells(matrix.cells())
}

/// [`brute_force_match`] on a raw rectangular score grid.
pub fn brute_force_match_cells<T: Scalar>(
    cells: &[Vec<T>],
) -> Result<Vec<MatchedPair<T>>, MatchError> {
    let rows = cells.len();
    let cols = if rows == 0 { 0 } else { cells[0].len() };
    let count = rows.min(cols);
    if count > BRUTE_FORCE_LIMIT {
        return Err(MatchError::TooLarge {
            size: count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }

    let row_major = rows <= cols;
    let (small, large) = if row_major { (rows, cols) } else { (cols, rows) };
    let mut used = vec![false; large];
    let mut current = Vec::with_capacity(small);
    let mut best: Option<Vec<(usize, usize)>> = None;
    enumerate_assignments(
        cells,
        row_major,
        0,
        small,
        large,
        &mut used,
        &mut current,
        &mut best,
    );

    let mut pairs: Vec<MatchedPair<T>> = best
        .expect("at least one assignment")
        .into_iter()
        .map(|(i, j)| MatchedPair {
            gen_index: i,
            retr_index: j,
            combined_score: cells[i][j],
        })
        .collect();
    sort_pairs_desc(&mut pairs);
    Ok(pairs)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_assignments<T: Scalar>(
    cells: &[Vec<T>],
    row_major: bool,
    position: usize,
    small: usize,
    large: usize,
    used: &mut [bool],
    current: &mut Vec<(usize, usize)>,
    best: &mut Option<Vec<(usize, usize)>>,
) {
    if position == small {
        let better = match best {
            None => true,
            Some(incumbent) => compare_assignments(cells, current, incumbent) == Ordering::Greater,
        };
        if better {
            *best = Some(current.clone());
        }
        return;
    }
    for other in 0..large {
        if used[other] {
            continue;
        }
        used[other] = true;
        current.push(if row_major {
            (position, other)
        } else {
            (other, position)
        });
        enumerate_assignments(cells, row_major, position + 1, small, large, used, current, best);
        current.pop();
        used[other] = false;
    }
}

/// Total of the selected cells, always accumulated in ascending
/// (row, column) order so equal pair sets produce bit-identical sums.
pub fn assignment_total<T: Scalar>(cells: &[Vec<T>], pairs: &[(usize, usize)]) -> T {
    let mut ordered: Vec<(usize, usize)> = pairs.to_vec();
    ordered.sort_unstable();
    ordered
        .into_iter()
        .fold(T::zero(), |acc, (i, j)| acc + cells[i][j])
}

/// Total of a matched pair list, accumulated in ascending index order.
pub fn pairs_total<T: Scalar>(pairs: &[MatchedPair<T>]) -> T {
    let mut ordered: Vec<(usize, usize, T)> = pairs
        .iter()
        .map(|p| (p.gen_index, p.retr_index, p.combined_score))
        .collect();
    ordered.sort_unstable_by_key(|&(i, j, _)| (i, j));
    ordered.into_iter().fold(T::zero(), |acc, (_, _, v)| acc + v)
}

fn sort_pairs_desc<T: Scalar>(pairs: &mut [MatchedPair<T>]) {
    pairs.sort_by(|a, b| {
        b.combined_score
            .partial_cmp(&a.combined_score)
            .expect("finite combined scores")
            .then((a.gen_index, a.retr_index).cmp(&(b.gen_index, b.retr_index)))
    });
}

fn canonical_sequence<T: Scalar>(
    cells: &[Vec<T>],
    pairs: &[(usize, usize)],
) -> Vec<(T, usize, usize)> {
    let mut seq: Vec<(T, usize, usize)> = pairs
        .iter()
        .map(|&(i, j)| (cells[i][j], i, j))
        .collect();
    seq.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite cells")
            .then((a.1, a.2).cmp(&(b.1, b.2)))
    });
    seq
}

/// Canonical assignment order: higher total wins; on exactly equal totals
/// the value-descending cell sequences are compared position-wise,
/// preferring the higher value and then the lower (gen, retr) indices.
fn compare_assignments<T: Scalar>(
    cells: &[Vec<T>],
    a: &[(usize, usize)],
    b: &[(usize, usize)],
) -> Ordering {
    let total_a = assignment_total(cells, a);
    let total_b = assignment_total(cells, b);
    match total_a.partial_cmp(&total_b).expect("finite totals") {
        Ordering::Equal => {}
        other => return other,
    }
    let seq_a = canonical_sequence(cells, a);
    let seq_b = canonical_sequence(cells, b);
    for ((va, ia, ja), (vb, ib, jb)) in seq_a.into_iter().zip(seq_b) {
        match va.partial_cmp(&vb).expect("finite cells") {
            Ordering::Equal => {}
            other => return other,
        }
        match (ib, jb).cmp(&(ia, ja)) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    Ordering::Equal
}

/// Maximum-total complete assignment on a square grid with canonical
/// tie-breaking: pairs are fixed highest-value-first (lowest indices on
/// value ties) among choices that keep the optimal total reachable.
fn canonical_max_assignment<T: Scalar>(cells: &[Vec<T>]) -> Vec<(usize, usize)> {
    let dim = cells.len();
    let all: Vec<usize> = (0..dim).collect();
    let initial = solve_max_subset(cells, &all, &all);
    let mut target = assignment_total(cells, &initial);

    let mut fixed: Vec<(usize, usize)> = Vec::with_capacity(dim);
    let mut free_rows = all.clone();
    let mut free_cols = all;

    while !free_rows.is_empty() {
        let mut candidates: Vec<(usize, usize)> =
            Vec::with_capacity(free_rows.len() * free_cols.len());
        for &i in &free_rows {
            for &j in &free_cols {
                candidates.push((i, j));
            }
        }
        candidates.sort_by(|&(ai, aj), &(bi, bj)| {
            cells[bi][bj]
                .partial_cmp(&cells[ai][aj])
                .expect("finite cells")
                .then((ai, aj).cmp(&(bi, bj)))
        });

        let mut chosen: Option<(usize, usize)> = None;
        let mut fallback: Option<((usize, usize), T)> = None;
        for &(i, j) in &candidates {
            let rows_left: Vec<usize> = free_rows.iter().copied().filter(|&r| r != i).collect();
            let cols_left: Vec<usize> = free_cols.iter().copied().filter(|&c| c != j).collect();
            let completion = solve_max_subset(cells, &rows_left, &cols_left);
            let mut candidate_pairs = fixed.clone();
            candidate_pairs.push((i, j));
            candidate_pairs.extend(completion);
            let total = assignment_total(cells, &candidate_pairs);
            if total == target {
                chosen = Some((i, j));
                break;
            }
            let improves = match fallback {
                None => true,
                Some((_, best_total)) => total > best_total,
            };
            if improves {
                fallback = Some(((i, j), total));
            }
        }
        let (i, j) = match chosen {
            Some(pair) => pair,
            None => {
                // Rounding kept every completion off the target; take the
                // best reachable total and re-anchor on it.
                let (pair, total) = fallback.expect("at least one candidate");
                target = total;
                pair
            }
        };
        fixed.push((i, j));
        free_rows.retain(|&r| r != i);
        free_cols.retain(|&c| c != j);
    }
    fixed
}

/// Maximum-total assignment over the given row/column subsets (equal
/// sizes), as (row, column) pairs in the original index space.
fn solve_max_subset<T: Scalar>(
    cells: &[Vec<T>],
    rows: &[usize],
    cols: &[usize],
) -> Vec<(usize, usize)> {
    debug_assert_eq!(rows.len(), cols.len());
    if rows.is_empty() {
        return Vec::new();
    }
    let cost: Vec<Vec<T>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| -cells[r][c]).collect())
        .collect();
    solve_square_min(&cost)
        .into_iter()
        .enumerate()
        .map(|(ri, ci)| (rows[ri], cols[ci]))
        .collect()
}

/// Minimum-cost perfect assignment on a square matrix via the classical
/// potentials formulation of the Hungarian algorithm, O(n³). Returns the
/// column assigned to each row.
fn solve_square_min<T: Scalar>(cost: &[Vec<T>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = T::infinity();
    // 1-based arrays; column 0 is virtual, p[j] = 0 means column j is free.
    let mut potentials_row = vec![T::zero(); n + 1];
    let mut potentials_col = vec![T::zero(); n + 1];
    let mut row_for_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_for_col[0] = i;
        let mut j0 = 0usize;
        let mut min_reduced = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_for_col[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - potentials_row[i0] - potentials_col[j];
                if reduced < min_reduced[j] {
                    min_reduced[j] = reduced;
                    way[j] = j0;
                }
                if min_reduced[j] < delta {
                    delta = min_reduced[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    potentials_row[row_for_col[j]] = potentials_row[row_for_col[j]] + delta;
                    potentials_col[j] = potentials_col[j] - delta;
                } else {
                    min_reduced[j] = min_reduced[j] - delta;
                }
            }
            j0 = j1;
            if row_for_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_for_col[j0] = row_for_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if row_for_col[j] > 0 {
            assignment[row_for_col[j] - 1] = j - 1;
        }
    }
    assignment
}

fn source_precedence(policy: FlattenPolicy, source: crate::Source) -> u8 {
    match (policy, source) {
        (FlattenPolicy::RetrievedFirst, crate::Source::Retrieved) => 0,
        (FlattenPolicy::RetrievedFirst, crate::Source::Generated) => 1,
        (FlattenPolicy::GeneratedFirst, crate::Source::Generated) => 0,
        (FlattenPolicy::GeneratedFirst, crate::Source::Retrieved) => 1,
    }
}

/// Expands matched pairs into a single passage list: pairs in descending
/// combined-score order, each expanded per `policy`; unmatched leftovers
/// follow in descending individual score (ties by ascending origin rank,
/// then the policy's first source).
pub fn flatten_pairs<T: Scalar>(
    pairs: &[MatchedPair<T>],
    gen: &[ScoredPassage<T>],
    retr: &[ScoredPassage<T>],
    policy: FlattenPolicy,
) -> Result<Vec<Passage>, MatchError> {
    let mut gen_used = vec![false; gen.len()];
    let mut retr_used = vec![false; retr.len()];
    for pair in pairs {
        if pair.gen_index >= gen.len() || pair.retr_index >= retr.len() {
            return Err(MatchError::IndexOutOfRange {
                gen_index: pair.gen_index,
                retr_index: pair.retr_index,
                gen_len: gen.len(),
                retr_len: retr.len(),
            });
        }
        if gen_used[pair.gen_index] || retr_used[pair.retr_index] {
            return Err(MatchError::DuplicateIndex {
                gen_index: pair.gen_index,
                retr_index: pair.retr_index,
            });
        }
        gen_used[pair.gen_index] = true;
        retr_used[pair.retr_index] = true;
    }

    let mut ordered = pairs.to_vec();
    sort_pairs_desc(&mut ordered);

    let mut out = Vec::with_capacity(gen.len() + retr.len());
    for pair in &ordered {
        let generated = &gen[pair.gen_index].passage;
        let retrieved = &retr[pair.retr_index].passage;
        match policy {
            FlattenPolicy::RetrievedFirst => {
                out.push(retrieved.clone());
                out.push(generated.clone());
            }
            FlattenPolicy::GeneratedFirst => {
                out.push(generated.clone());
                out.push(retrieved.clone());
            }
        }
    }

    let mut leftovers: Vec<&ScoredPassage<T>> = gen
        .iter()
        .enumerate()
        .filter(|(i, _)| !gen_used[*i])
        .map(|(_, sp)| sp)
        .chain(
            retr.iter()
                .enumerate()
                .filter(|(j, _)| !retr_used[*j])
                .map(|(_, sp)| sp),
        )
        .collect();
    leftovers.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then(a.passage.origin_rank.cmp(&b.passage.origin_rank))
            .then(
                source_precedence(policy, a.passage.source)
                    .cmp(&source_precedence(policy, b.passage.source)),
            )
    });
    out.extend(leftovers.into_iter().map(|sp| sp.passage.clone()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Source;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair_set<T: Scalar>(pairs: &[MatchedPair<T>]) -> std::collections::BTreeSet<(usize, usize)> {
        pairs.iter().map(|p| (p.gen_index, p.retr_index)).collect()
    }

    fn scored(id: &str, source: Source, score: f64, origin_rank: usize) -> ScoredPassage {
        ScoredPassage {
            passage: Passage {
                id: id.into(),
                source,
                title: None,
                text: format!("text {id}"),
                origin_rank,
            },
            score,
            rank: origin_rank,
        }
    }

    // Draws from a 1/128 grid so every cell and assignment total is exact
    // in floating point; roughly a third of entries duplicate earlier ones.
    fn dyadic_factors(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
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

    #[test]
    fn greedy_pairs_top_with_top() {
        let matrix =
            RelevanceMatrix::from_factors(vec![-0.105, -0.693], vec![-0.223, -1.204]).unwrap();
        let pairs = greedy_match(&matrix);
        assert_eq!(
            pairs.iter().map(|p| (p.gen_index, p.retr_index)).collect::<Vec<_>>(),
            vec![(0, 0), (1, 1)]
        );
        assert!(pairs[0].combined_score >= pairs[1].combined_score);
        // Exhaustive check over both permutations.
        let brute = brute_force_match(&matrix).unwrap();
        assert_eq!(pair_set(&pairs), pair_set(&brute));
    }

    #[test]
    fn greedy_single_cell() {
        let matrix = RelevanceMatrix::from_factors(vec![-1.0], vec![-2.0]).unwrap();
        let pairs = greedy_match(&matrix);
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].gen_index, pairs[0].retr_index), (0, 0));
        assert_eq!(pairs[0].combined_score, -3.0);
    }

    #[test]
    fn greedy_zips_sorted_orders() {
        // Generated order by score: (2, 0, 1); retrieved order: (1, 2, 0).
        let matrix =
            RelevanceMatrix::from_factors(vec![-3.0, -4.0, -2.0], vec![-5.0, -3.0, -4.0]).unwrap();
        let pairs = greedy_match(&matrix);
        assert_eq!(
            pairs.iter().map(|p| (p.gen_index, p.retr_index)).collect::<Vec<_>>(),
            vec![(2, 1), (0, 2), (1, 0)]
        );
        // Brute force over all 6 permutations confirms the zip is optimal.
        let brute = brute_force_match(&matrix).unwrap();
        assert_eq!(pair_set(&pairs), pair_set(&brute));
    }

    #[test]
    fn greedy_breaks_ties_toward_lowest_indices() {
        let matrix = RelevanceMatrix::from_factors(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        for pairs in [
            greedy_match(&matrix),
            hungarian_match(&matrix),
            brute_force_match(&matrix).unwrap(),
        ] {
            assert_eq!(
                pairs.iter().map(|p| (p.gen_index, p.retr_index)).collect::<Vec<_>>(),
                vec![(0, 0), (1, 1)]
            );
        }
    }

    #[test]
    fn hungarian_solves_general_matrix() {
        let cells = vec![
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 1.0],
            vec![3.0, 1.0, 2.0],
        ];
        let pairs = hungarian_match_cells(&cells);
        assert_eq!(pair_set(&pairs), [(0, 2), (1, 1), (2, 0)].into_iter().collect());
        assert_eq!(pairs_total(&pairs), 10.0);
        let brute = brute_force_match_cells(&cells).unwrap();
        assert_eq!(pair_set(&pairs), pair_set(&brute));
        assert_eq!(pairs_total(&brute), 10.0);
    }

    #[test]
    fn hungarian_picks_dominant_diagonal() {
        let cells = vec![
            vec![10.0, 0.0, 0.0],
            vec![0.0, 10.0, 0.0],
            vec![0.0, 0.0, 10.0],
        ];
        let pairs = hungarian_match_cells(&cells);
        assert_eq!(pair_set(&pairs), [(0, 0), (1, 1), (2, 2)].into_iter().collect());
    }

    #[test]
    fn greedy_is_suboptimal_off_rank_one() {
        // Not factorizable: greedy grabs 10 and is stuck with 1.
        let cells = vec![vec![10.0, 9.0], vec![9.0, 1.0]];
        let greedy_total = pairs_total(&greedy_match_cells(&cells));
        let optimal_total = pairs_total(&brute_force_match_cells(&cells).unwrap());
        assert_eq!(greedy_total, 11.0);
        assert_eq!(optimal_total, 18.0);
        assert!(greedy_total < optimal_total);
    }

    #[test]
    fn all_matchers_agree_on_random_rank_one_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..150 {
            let n = rng.gen_range(1..=6);
            let matrix = RelevanceMatrix::from_factors(
                dyadic_factors(&mut rng, n),
                dyadic_factors(&mut rng, n),
            )
            .unwrap();
            let greedy = greedy_match(&matrix);
            let hungarian = hungarian_match(&matrix);
            let brute = brute_force_match(&matrix).unwrap();
            assert_eq!(pair_set(&greedy), pair_set(&hungarian), "matrix {matrix:?}");
            assert_eq!(pair_set(&greedy), pair_set(&brute), "matrix {matrix:?}");
        }
    }

    #[test]
    fn matchers_agree_on_rectangular_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xabcd);
        for _ in 0..80 {
            let m = rng.gen_range(1..=5);
            let n = rng.gen_range(1..=5);
            let matrix = RelevanceMatrix::from_factors(
                dyadic_factors(&mut rng, m),
                dyadic_factors(&mut rng, n),
            )
            .unwrap();
            let greedy = greedy_match(&matrix);
            let hungarian = hungarian_match(&matrix);
            let brute = brute_force_match(&matrix).unwrap();
            assert_eq!(greedy.len(), m.min(n));
            assert_eq!(pair_set(&greedy), pair_set(&hungarian));
            assert_eq!(pair_set(&greedy), pair_set(&brute));
        }
    }

    #[test]
    fn hungarian_matches_brute_force_on_general_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1234);
        for _ in 0..100 {
            let n = rng.gen_range(1..=5);
            let cells: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| rng.gen_range(-12800..=12800) as f64 / 128.0)
                        .collect()
                })
                .collect();
            let hungarian = hungarian_match_cells(&cells);
            let brute = brute_force_match_cells(&cells).unwrap();
            assert_eq!(pairs_total(&hungarian), pairs_total(&brute), "cells {cells:?}");
            assert_eq!(pair_set(&hungarian), pair_set(&brute), "cells {cells:?}");
        }
    }

    #[test]
    fn matching_is_injective() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x77);
        for _ in 0..40 {
            let m = rng.gen_range(1..=6);
            let n = rng.gen_range(1..=6);
            let matrix = RelevanceMatrix::from_factors(
                dyadic_factors(&mut rng, m),
                dyadic_factors(&mut rng, n),
            )
            .unwrap();
            for pairs in [
                greedy_match(&matrix),
                hungarian_match(&matrix),
                brute_force_match(&matrix).unwrap(),
            ] {
                let gens: std::collections::HashSet<usize> =
                    pairs.iter().map(|p| p.gen_index).collect();
                let retrs: std::collections::HashSet<usize> =
                    pairs.iter().map(|p| p.retr_index).collect();
                assert_eq!(gens.len(), pairs.len());
                assert_eq!(retrs.len(), pairs.len());
            }
        }
    }

    #[test]
    fn works_with_f32_scalars() {
        let matrix =
            RelevanceMatrix::<f32>::from_factors(vec![-1.0, -0.5], vec![-2.0, -0.25]).unwrap();
        let greedy = greedy_match(&matrix);
        let hungarian = hungarian_match(&matrix);
        assert_eq!(pair_set(&greedy), pair_set(&hungarian));
        assert_eq!(greedy[0].combined_score, -0.75f32);
    }

    #[test]
    fn brute_force_rejects_large_inputs() {
        let matrix = RelevanceMatrix::from_factors(vec![0.0; 9], vec![0.0; 9]).unwrap();
        assert_eq!(
            brute_force_match(&matrix).unwrap_err(),
            MatchError::TooLarge { size: 9, limit: 8 }
        );
    }

    #[test]
    fn flatten_retrieved_first_expands_pairs() {
        let gen = vec![
            scored("g0", Source::Generated, -1.0, 0),
            scored("g1", Source::Generated, -2.0, 1),
        ];
        let retr = vec![
            scored("r0", Source::Retrieved, -1.0, 0),
            scored("r1", Source::Retrieved, -2.0, 1),
        ];
        let pairs = vec![
            MatchedPair { gen_index: 0, retr_index: 0, combined_score: -2.0 },
            MatchedPair { gen_index: 1, retr_index: 1, combined_score: -4.0 },
        ];
        let flat = flatten_pairs(&pairs, &gen, &retr, FlattenPolicy::RetrievedFirst).unwrap();
        let ids: Vec<&str> = flat.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["r0", "g0", "r1", "g1"]);

        let flat = flatten_pairs(&pairs, &gen, &retr, FlattenPolicy::GeneratedFirst).unwrap();
        let ids: Vec<&str> = flat.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["g0", "r0", "g1", "r1"]);
    }

    #[test]
    fn flatten_appends_leftovers_by_score() {
        let gen = vec![
            scored("g0", Source::Generated, -1.0, 0),
            scored("g1", Source::Generated, -0.5, 1),
            scored("g2", Source::Generated, -3.0, 2),
        ];
        let retr = vec![
            scored("r0", Source::Retrieved, -1.0, 0),
            scored("r1", Source::Retrieved, -2.0, 1),
        ];
        let pairs = vec![
            MatchedPair { gen_index: 1, retr_index: 0, combined_score: -1.5 },
            MatchedPair { gen_index: 0, retr_index: 1, combined_score: -3.0 },
        ];
        let flat = flatten_pairs(&pairs, &gen, &retr, FlattenPolicy::RetrievedFirst).unwrap();
        let ids: Vec<&str> = flat.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["r0", "g1", "r1", "g0", "g2"]);
        assert_eq!(flat.len(), gen.len() + retr.len());
    }

    #[test]
    fn flatten_empty_pairs_yields_score_descending_leftovers() {
        let gen = vec![scored("g0", Source::Generated, -2.0, 0)];
        let retr = vec![
            scored("r0", Source::Retrieved, -3.0, 0),
            scored("r1", Source::Retrieved, -1.0, 1),
        ];
        let flat = flatten_pairs::<f64>(&[], &gen, &retr, FlattenPolicy::RetrievedFirst).unwrap();
        let ids: Vec<&str> = flat.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["r1", "g0", "r0"]);
    }

    #[test]
    fn flatten_rejects_out_of_range() {
        let gen = vec![scored("g0", Source::Generated, -1.0, 0)];
        let retr = vec![scored("r0", Source::Retrieved, -1.0, 0)];
        let pairs = vec![MatchedPair { gen_index: 1, retr_index: 0, combined_score: -2.0 }];
        assert!(matches!(
            flatten_pairs(&pairs, &gen, &retr, FlattenPolicy::RetrievedFirst),
            Err(MatchError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn flatten_rejects_duplicate_indices() {
        let gen = vec![
            scored("g0", Source::Generated, -1.0, 0),
            scored("g1", Source::Generated, -2.0, 1),
        ];
        let retr = vec![
            scored("r0", Source::Retrieved, -1.0, 0),
            scored("r1", Source::Retrieved, -2.0, 1),
        ];
        let pairs = vec![
            MatchedPair { gen_index: 0, retr_index: 0, combined_score: -2.0 },
            MatchedPair { gen_index: 0, retr_index: 1, combined_score: -3.0 },
        ];
        assert!(matches!(
            flatten_pairs(&pairs, &gen, &retr, FlattenPolicy::RetrievedFirst),
            Err(MatchError::DuplicateIndex { .. })
        ));
    }

    #[test]
    fn shifting_one_side_preserves_greedy_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x99);
        for _ in 0..50 {
            let n = rng.gen_range(1..=6);
            let gen_scores = dyadic_factors(&mut rng, n);
            let retr_scores = dyadic_factors(&mut rng, n);
            let base = RelevanceMatrix::from_factors(gen_scores.clone(), retr_scores.clone())
                .unwrap();
            let base_pairs: Vec<(usize, usize)> = greedy_match(&base)
                .iter()
                .map(|p| (p.gen_index, p.retr_index))
                .collect();
            for shift in [-10.0, 0.0, 7.5] {
                let shifted_gen: Vec<f64> = gen_scores.iter().map(|s| s + shift).collect();
                let shifted = RelevanceMatrix::from_factors(shifted_gen, retr_scores.clone())
                    .unwrap();
                let shifted_pairs: Vec<(usize, usize)> = greedy_match(&shifted)
                    .iter()
                    .map(|p| (p.gen_index, p.retr_index))
                    .collect();
                assert_eq!(base_pairs, shifted_pairs);
            }
        }
    }
}
