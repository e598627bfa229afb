//! Optimal and k-best 2-D assignment, ellipsoidal gating and
//! global-hypothesis counting.
//!
//! Cost matrices follow the tracking convention: one row per measurement,
//! columns for the existing Bernoulli components followed by one
//! new-component column per measurement, entries holding negated
//! log-weight ratios. Forbidden pairs carry a large sentinel cost instead of
//! infinity so the dual potentials stay finite.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::gaussian;

/// Sentinel cost marking a forbidden row/column pair.
pub const FORBIDDEN_COST: f64 = 1e9;
/// Costs at or above this are treated as forbidden when reading solutions.
pub const FEASIBLE_LIMIT: f64 = 1e8;
/// Relative tolerance under which two assignment costs count as tied.
const TIE_REL_TOL: f64 = 1e-12;

// ============================================================================
// Cost matrix and assignments
// ============================================================================

/// Rectangular assignment cost matrix with rows <= columns.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    costs: DMatrix<f64>,
    num_bernoullis: Option<usize>,
}

impl CostMatrix {
    /// Tracking-structured matrix: `m x (n + m)` with the new-component
    /// column `n + j` finite only in row `j`.
    pub fn new(costs: DMatrix<f64>, num_bernoullis: usize) -> Result<Self> {
        let m = costs.nrows();
        if costs.ncols() != num_bernoullis + m {
            return Err(Error::DimensionMismatch(format!(
                "cost matrix is {}x{}, expected {m}x{}",
                m,
                costs.ncols(),
                num_bernoullis + m
            )));
        }
        for j in 0..m {
            for i in 0..m {
                let entry = costs[(i, num_bernoullis + j)];
                if i == j {
                    if entry >= FEASIBLE_LIMIT {
                        return Err(Error::InvalidParameter(format!(
                            "new-component column {j} must be finite in row {j}"
                        )));
                    }
                } else if entry < FEASIBLE_LIMIT {
                    return Err(Error::InvalidParameter(format!(
                        "new-component column {j} must be forbidden in row {i}"
                    )));
                }
            }
        }
        Ok(Self { costs, num_bernoullis: Some(num_bernoullis) })
    }

    /// General matrix without the tracking structure; rows <= columns.
    pub fn dense(costs: DMatrix<f64>) -> Result<Self> {
        if costs.nrows() > costs.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows exceed {} columns",
                costs.nrows(),
                costs.ncols()
            )));
        }
        Ok(Self { costs, num_bernoullis: None })
    }

    pub fn costs(&self) -> &DMatrix<f64> {
        &self.costs
    }

    pub fn num_rows(&self) -> usize {
        self.costs.nrows()
    }

    pub fn num_cols(&self) -> usize {
        self.costs.ncols()
    }

    pub fn num_bernoullis(&self) -> Option<usize> {
        self.num_bernoullis
    }
}

/// A complete row-to-column assignment and its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    pub cost: f64,
}

impl Assignment {
    fn lex_cmp(&self, other: &Self) -> Ordering {
        self.row_to_col.cmp(&other.row_to_col)
    }
}

// ============================================================================
// Hungarian (shortest augmenting path with dual potentials)
// ============================================================================

/// Cost view of a Murty subproblem: the base matrix, rows pinned to one
/// column, and individually banned pairs. `banned` is sorted by (row, col).
struct SubCosts<'a> {
    base: &'a DMatrix<f64>,
    fixed_col: &'a [Option<usize>],
    banned: &'a [(usize, usize)],
}

impl SubCosts<'_> {
    /// Banned columns of one row, as a sorted slice of the ban list.
    fn row_bans(&self, row: usize) -> &[(usize, usize)] {
        let start = self.banned.partition_point(|&(r, _)| r < row);
        let end = self.banned.partition_point(|&(r, _)| r <= row);
        &self.banned[start..end]
    }
}

/// Dual potentials and matching of a (sub)problem, reusable across
/// incremental re-solves.
#[derive(Clone)]
struct MatchState {
    u: Vec<f64>,
    v: Vec<f64>,
    row_of_col: Vec<Option<usize>>,
    col_of_row: Vec<Option<usize>>,
}

impl MatchState {
    fn new(rows: usize, cols: usize) -> Self {
        Self {
            u: vec![0.0; rows],
            v: vec![0.0; cols],
            row_of_col: vec![None; cols],
            col_of_row: vec![None; rows],
        }
    }
}

/// Adds `cur_row` to the matching by one shortest augmenting path, keeping
/// the dual potentials feasible. Returns false when no path exists.
fn augment_row(costs: &SubCosts<'_>, cur_row: usize, state: &mut MatchState) -> bool {
    let rows = state.u.len();
    let cols = state.v.len();
    let mut shortest = vec![f64::INFINITY; cols];
    let mut came_from = vec![usize::MAX; cols];
    let mut visited_rows = vec![false; rows];
    let mut visited_cols = vec![false; cols];
    let mut min_val = 0.0_f64;
    let mut i = cur_row;
    let sink;
    loop {
        visited_rows[i] = true;
        let mut lowest = f64::INFINITY;
        let mut index = usize::MAX;
        let row_bans = costs.row_bans(i);
        let mut ban_ptr = 0usize;
        let fixed = costs.fixed_col[i];
        for j in 0..cols {
            while ban_ptr < row_bans.len() && row_bans[ban_ptr].1 < j {
                ban_ptr += 1;
            }
            let is_banned = ban_ptr < row_bans.len() && row_bans[ban_ptr].1 == j;
            if !visited_cols[j] {
                let entry = if is_banned || fixed.is_some_and(|c| c != j) {
                    FORBIDDEN_COST
                } else {
                    costs.base[(i, j)]
                };
                if entry < FEASIBLE_LIMIT {
                    let reduced = min_val + entry - state.u[i] - state.v[j];
                    if reduced < shortest[j] {
                        shortest[j] = reduced;
                        came_from[j] = i;
                    }
                }
                if shortest[j] < lowest
                    || (shortest[j] == lowest && state.row_of_col[j].is_none())
                {
                    lowest = shortest[j];
                    index = j;
                }
            }
        }
        if !lowest.is_finite() {
            return false;
        }
        min_val = lowest;
        visited_cols[index] = true;
        match state.row_of_col[index] {
            None => {
                sink = index;
                break;
            }
            Some(next_row) => i = next_row,
        }
    }

    state.u[cur_row] += min_val;
    for (r, visited) in visited_rows.iter().enumerate() {
        if *visited && r != cur_row {
            let col = state.col_of_row[r].expect("visited row is matched");
            state.u[r] += min_val - shortest[col];
        }
    }
    for (j, vis) in visited_cols.iter().enumerate() {
        if *vis {
            state.v[j] -= min_val - shortest[j];
        }
    }

    let mut j = sink;
    loop {
        let r = came_from[j];
        state.row_of_col[j] = Some(r);
        let prev = state.col_of_row[r].replace(j);
        if r == cur_row {
            break;
        }
        j = prev.expect("interior rows on the augmenting path are matched");
    }
    true
}

/// Minimum-cost assignment of every row to a distinct column.
///
/// Returns `None` when no assignment avoids forbidden entries.
fn solve_rows_to_cols(costs: &DMatrix<f64>) -> Option<Assignment> {
    let rows = costs.nrows();
    if rows == 0 {
        return Some(Assignment { row_to_col: Vec::new(), cost: 0.0 });
    }
    debug_assert!(rows <= costs.ncols());
    let fixed: Vec<Option<usize>> = vec![None; rows];
    let sub = SubCosts { base: costs, fixed_col: &fixed, banned: &[] };
    let mut state = MatchState::new(rows, costs.ncols());
    for cur_row in 0..rows {
        if !augment_row(&sub, cur_row, &mut state) {
            return None;
        }
    }
    assignment_from_state(costs, &state)
}

fn assignment_from_state(base: &DMatrix<f64>, state: &MatchState) -> Option<Assignment> {
    let row_to_col: Vec<usize> =
        state.col_of_row.iter().map(|c| c.expect("all rows matched")).collect();
    let cost: f64 = row_to_col.iter().enumerate().map(|(r, &c)| base[(r, c)]).sum();
    if cost >= FEASIBLE_LIMIT {
        return None;
    }
    Some(Assignment { row_to_col, cost })
}

/// Minimum-cost assignment of a [`CostMatrix`].
///
/// Tracking-structured matrices always have a feasible assignment (every
/// measurement can open its own component).
pub fn hungarian_solve(matrix: &CostMatrix) -> Result<Assignment> {
    solve_rows_to_cols(matrix.costs())
        .ok_or_else(|| Error::InvalidParameter("no feasible assignment".into()))
}

// ============================================================================
// Murty k-best ranked assignments
// ============================================================================

/// One node of the ranked-assignment search tree.
///
/// Subproblems are solved on a square padding of the cost matrix (dummy
/// zero-cost rows absorb the surplus columns). Squareness is what makes the
/// warm start sound: unassigning the partitioned row frees exactly one
/// column, the parent's dual potentials stay feasible because child costs
/// only increase, and a single augmenting path re-optimizes.
struct MurtyNode {
    /// `fixed_col[row]` forces that row to one column (real rows only).
    fixed_col: Vec<Option<usize>>,
    /// Pairs excluded from this node's subproblem, sorted by (row, col).
    banned: Vec<(usize, usize)>,
    /// Duals and matching of the solved padded problem.
    state: MatchState,
    /// Solution restricted to the real rows, costed on the real matrix.
    solution: Assignment,
}

/// Zero-padded square copy of a rows <= cols matrix.
fn pad_square(costs: &DMatrix<f64>) -> DMatrix<f64> {
    let n = costs.ncols();
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (costs.nrows(), n)).copy_from(costs);
    out
}

fn real_assignment(base: &DMatrix<f64>, real_rows: usize, state: &MatchState) -> Option<Assignment> {
    let row_to_col: Vec<usize> = state.col_of_row[..real_rows]
        .iter()
        .map(|c| c.expect("all rows matched"))
        .collect();
    let cost: f64 = row_to_col.iter().enumerate().map(|(r, &c)| base[(r, c)]).sum();
    if cost >= FEASIBLE_LIMIT {
        return None;
    }
    Some(Assignment { row_to_col, cost })
}

impl MurtyNode {
    fn root(base: &DMatrix<f64>, padded: &DMatrix<f64>) -> Option<Self> {
        let n = padded.nrows();
        let fixed_col: Vec<Option<usize>> = vec![None; n];
        let banned: Vec<(usize, usize)> = Vec::new();
        let mut state = MatchState::new(n, n);
        {
            let sub = SubCosts { base: padded, fixed_col: &fixed_col, banned: &banned };
            for cur_row in 0..n {
                if !augment_row(&sub, cur_row, &mut state) {
                    return None;
                }
            }
        }
        let solution = real_assignment(base, base.nrows(), &state)?;
        Some(Self { fixed_col, banned, state, solution })
    }

    /// Child subproblem: real rows before `row` (in this node's solution)
    /// become pinned and `(row, its column)` is banned.
    fn child(&self, base: &DMatrix<f64>, padded: &DMatrix<f64>, row: usize) -> Option<Self> {
        let banned_col = self.solution.row_to_col[row];
        let mut fixed_col = self.fixed_col.clone();
        for (r, &c) in self.solution.row_to_col.iter().enumerate() {
            if r == row {
                break;
            }
            fixed_col[r] = Some(c);
        }
        let mut banned = self.banned.clone();
        let pos = banned.partition_point(|&p| p < (row, banned_col));
        banned.insert(pos, (row, banned_col));

        let mut state = self.state.clone();
        state.col_of_row[row] = None;
        state.row_of_col[banned_col] = None;
        {
            let sub = SubCosts { base: padded, fixed_col: &fixed_col, banned: &banned };
            if !augment_row(&sub, row, &mut state) {
                return None;
            }
        }
        let solution = real_assignment(base, base.nrows(), &state)?;
        Some(Self { fixed_col, banned, state, solution })
    }
}

struct HeapEntry(MurtyNode);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we pop cheapest first.
        other
            .0
            .solution
            .cost
            .total_cmp(&self.0.solution.cost)
            .then_with(|| other.0.solution.lex_cmp(&self.0.solution))
    }
}

fn costs_tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// The `min(k, total feasible)` cheapest assignments in nondecreasing cost
/// order; equal-cost assignments are ordered by their column vectors.
pub fn murty_kbest(matrix: &CostMatrix, k: usize) -> Result<Vec<Assignment>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let base = matrix.costs();
    let padded = pad_square(base);
    let mut heap = BinaryHeap::new();
    if let Some(root) = MurtyNode::root(base, &padded) {
        heap.push(HeapEntry(root));
    }

    let mut emitted: Vec<Assignment> = Vec::new();
    while let Some(HeapEntry(node)) = heap.pop() {
        // Keep draining cost ties so truncation inside a tied group keeps the
        // lexicographically smallest members.
        if emitted.len() >= k && !costs_tied(node.solution.cost, emitted[k - 1].cost) {
            break;
        }
        // Partition the node around its solution before emitting it; only
        // real rows partition, dummy padding rows are interchangeable.
        for row in 0..node.solution.row_to_col.len() {
            if node.fixed_col[row].is_some() {
                continue;
            }
            if let Some(child) = node.child(base, &padded, row) {
                heap.push(HeapEntry(child));
            }
        }
        emitted.push(node.solution);
    }

    // Sort tied groups by column vector, then truncate.
    let mut start = 0;
    while start < emitted.len() {
        let mut end = start + 1;
        while end < emitted.len() && costs_tied(emitted[start].cost, emitted[end].cost) {
            end += 1;
        }
        emitted[start..end].sort_by(|a, b| a.lex_cmp(b));
        start = end;
    }
    emitted.truncate(k);
    Ok(emitted)
}

// ============================================================================
// Ellipsoidal gating
// ============================================================================

/// True when the normalized innovation squared is within the gate:
/// `(z - z_pred)' S^-1 (z - z_pred) <= threshold` (boundary inclusive).
pub fn ellipsoidal_gate(
    z: &DVector<f64>,
    z_pred: &DVector<f64>,
    innovation_cov: &DMatrix<f64>,
    gate_threshold: f64,
) -> Result<bool> {
    if z.len() != z_pred.len() || innovation_cov.nrows() != z.len() {
        return Err(Error::DimensionMismatch(format!(
            "gate: z {}  z_pred {}  S {}x{}",
            z.len(),
            z_pred.len(),
            innovation_cov.nrows(),
            innovation_cov.ncols()
        )));
    }
    let chol = nalgebra::Cholesky::new(innovation_cov.clone())
        .ok_or_else(|| Error::SingularMatrix("innovation covariance".into()))?;
    let resid = z - z_pred;
    let d2 = resid.dot(&chol.solve(&resid));
    Ok(d2 <= gate_threshold)
}

/// Normalized innovation squared, shared by gating and diagnostics.
pub fn mahalanobis_squared(
    resid: &DVector<f64>,
    innovation_cov: &DMatrix<f64>,
) -> Result<f64> {
    let chol = gaussian::cholesky_with_jitter(innovation_cov, "mahalanobis")?;
    Ok(resid.dot(&chol.solve(resid)))
}

// ============================================================================
// Global-hypothesis counting
// ============================================================================

/// Largest `m`/`n` accepted by the counting functions.
pub const COUNT_CAP: u64 = 30;

fn check_count_cap(m: u64, n: u64) -> Result<()> {
    if m > COUNT_CAP || n > COUNT_CAP {
        return Err(Error::LimitExceeded(format!(
            "counting supports m, n <= {COUNT_CAP}, got ({m}, {n})"
        )));
    }
    Ok(())
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let mut acc = BigUint::from(1u32);
    for i in 0..k.min(n - k) {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::from(1u32), |acc, i| acc * BigUint::from(i))
}

/// Number of global hypotheses after updating `n` Bernoulli components with
/// `m` measurements in multi-Bernoulli-mixture form:
/// `sum_p p! C(m, p) C(n, p)`.
pub fn count_mbm_hypotheses(m: u64, n: u64) -> Result<BigUint> {
    check_count_cap(m, n)?;
    let mut acc = BigUint::from(0u32);
    for p in 0..=m.min(n) {
        acc += factorial(p) * binomial(m, p) * binomial(n, p);
    }
    Ok(acc)
}

/// Same count for the deterministic-existence (MBM01) form:
/// `sum_{n_a} C(n, n_a) * count_mbm(m, n_a)`.
pub fn count_mbm01_hypotheses(m: u64, n: u64) -> Result<BigUint> {
    check_count_cap(m, n)?;
    let mut acc = BigUint::from(0u32);
    for n_a in 0..=n {
        acc += binomial(n, n_a) * count_mbm_hypotheses(m, n_a)?;
    }
    Ok(acc)
}

/// Enumerates every valid global association: each Bernoulli is either
/// misdetected (`None`) or claims a distinct measurement index.
///
/// Exponential; intended for oracle comparisons with small `m`, `n`.
pub fn enumerate_global_associations(m: usize, n: usize) -> Vec<Vec<Option<usize>>> {
    let mut out = Vec::new();
    let mut current: Vec<Option<usize>> = vec![None; n];
    fn recurse(
        i: usize,
        m: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<Option<usize>>,
        out: &mut Vec<Vec<Option<usize>>>,
    ) {
        if i == current.len() {
            out.push(current.clone());
            return;
        }
        current[i] = None;
        recurse(i + 1, m, used, current, out);
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                current[i] = Some(j);
                recurse(i + 1, m, used, current, out);
                current[i] = None;
                used[j] = false;
            }
        }
    }
    let mut used = vec![false; m];
    recurse(0, m, &mut used, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn dense(rows: usize, cols: usize, entries: &[f64]) -> CostMatrix {
        CostMatrix::dense(DMatrix::from_row_slice(rows, cols, entries)).unwrap()
    }

    /// Exhaustive minimum over all injective row-to-column maps.
    fn brute_force_all(costs: &DMatrix<f64>) -> Vec<Assignment> {
        let rows = costs.nrows();
        let cols = costs.ncols();
        let mut out = Vec::new();
        let mut current = vec![0usize; rows];
        let mut used = vec![false; cols];
        fn recurse(
            r: usize,
            costs: &DMatrix<f64>,
            used: &mut Vec<bool>,
            current: &mut Vec<usize>,
            out: &mut Vec<Assignment>,
        ) {
            if r == current.len() {
                let cost: f64 = current.iter().enumerate().map(|(i, &c)| costs[(i, c)]).sum();
                if cost < FEASIBLE_LIMIT {
                    out.push(Assignment { row_to_col: current.clone(), cost });
                }
                return;
            }
            for c in 0..used.len() {
                if !used[c] && costs[(r, c)] < FEASIBLE_LIMIT {
                    used[c] = true;
                    current[r] = c;
                    recurse(r + 1, costs, used, current, out);
                    used[c] = false;
                }
            }
        }
        recurse(0, costs, &mut used, &mut current, &mut out);
        out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.lex_cmp(b)));
        out
    }

    #[test]
    fn single_entry_matrix() {
        let m = dense(1, 1, &[5.0]);
        let a = hungarian_solve(&m).unwrap();
        assert_eq!(a.row_to_col, vec![0]);
        assert_eq!(a.cost, 5.0);
    }

    #[test]
    fn two_by_two_square() {
        let m = dense(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        let a = hungarian_solve(&m).unwrap();
        assert_eq!(a.row_to_col, vec![0, 1]);
        assert_eq!(a.cost, 2.0);
    }

    #[test]
    fn random_rectangular_matches_brute_force() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let entries: Vec<f64> = (0..5 * 8).map(|_| rng.random_range(0.0..10.0)).collect();
            let costs = DMatrix::from_row_slice(5, 8, &entries);
            let best = brute_force_all(&costs).into_iter().next().unwrap();
            let got = hungarian_solve(&CostMatrix::dense(costs).unwrap()).unwrap();
            assert!((got.cost - best.cost).abs() < 1e-9, "{} vs {}", got.cost, best.cost);
        }
    }

    #[test]
    fn forbidden_entries_avoided() {
        let m = dense(2, 2, &[FORBIDDEN_COST, 2.0, 3.0, FORBIDDEN_COST]);
        let a = hungarian_solve(&m).unwrap();
        assert_eq!(a.row_to_col, vec![1, 0]);
        assert_eq!(a.cost, 5.0);
        // Fully forbidden row is infeasible.
        let m = dense(1, 1, &[FORBIDDEN_COST]);
        assert!(hungarian_solve(&m).is_err());
    }

    #[test]
    fn row_constant_shift_preserves_argmin() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..20 {
            let entries: Vec<f64> = (0..4 * 6).map(|_| rng.random_range(0.0..5.0)).collect();
            let costs = DMatrix::from_row_slice(4, 6, &entries);
            let base = hungarian_solve(&CostMatrix::dense(costs.clone()).unwrap()).unwrap();
            let mut shifted = costs;
            let delta = 3.25;
            for j in 0..6 {
                shifted[(2, j)] += delta;
            }
            let moved = hungarian_solve(&CostMatrix::dense(shifted).unwrap()).unwrap();
            assert_eq!(moved.row_to_col, base.row_to_col);
            assert!((moved.cost - base.cost - delta).abs() < 1e-9);
        }
    }

    #[test]
    fn murty_k1_is_hungarian() {
        let m = dense(2, 3, &[4.0, 1.0, 3.5, 2.0, 0.25, 5.0]);
        let best = hungarian_solve(&m).unwrap();
        let list = murty_kbest(&m, 1).unwrap();
        assert_eq!(list.len(), 1);
        assert_eq!(list[0], best);
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..20 {
            let entries: Vec<f64> = (0..3 * 5).map(|_| rng.random_range(0.0..10.0)).collect();
            let m = CostMatrix::dense(DMatrix::from_row_slice(3, 5, &entries)).unwrap();
            assert_eq!(murty_kbest(&m, 1).unwrap()[0], hungarian_solve(&m).unwrap());
        }
    }

    #[test]
    fn murty_two_by_two_costs() {
        let m = dense(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        let list = murty_kbest(&m, 2).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[0].cost, 2.0);
        assert_eq!(list[1].cost, 5.0);
    }

    #[test]
    fn murty_matches_exhaustive_enumeration() {
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..40 {
            let entries: Vec<f64> = (0..4 * 6).map(|_| rng.random_range(0.0..10.0)).collect();
            let costs = DMatrix::from_row_slice(4, 6, &entries);
            let expect = brute_force_all(&costs);
            let got = murty_kbest(&CostMatrix::dense(costs).unwrap(), 10).unwrap();
            assert_eq!(got.len(), expect.len().min(10));
            for (g, e) in got.iter().zip(expect.iter()) {
                assert!((g.cost - e.cost).abs() < 1e-9);
                assert_eq!(g.row_to_col, e.row_to_col);
            }
        }
    }

    #[test]
    fn murty_prefix_property_and_distinctness() {
        let mut rng = StdRng::seed_from_u64(5);
        let entries: Vec<f64> = (0..4 * 7).map(|_| rng.random_range(0.0..10.0)).collect();
        let m = CostMatrix::dense(DMatrix::from_row_slice(4, 7, &entries)).unwrap();
        let long = murty_kbest(&m, 25).unwrap();
        for j in 1..long.len() {
            assert!(long[j - 1].cost <= long[j].cost + 1e-12);
            assert_ne!(long[j - 1].row_to_col, long[j].row_to_col);
        }
        for k in [1usize, 3, 7, 15] {
            let short = murty_kbest(&m, k).unwrap();
            assert_eq!(&long[..short.len()], &short[..]);
        }
    }

    #[test]
    fn murty_tied_costs_order_lexicographically() {
        // Fully symmetric 2x2: both permutations cost 2.
        let m = dense(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let list = murty_kbest(&m, 2).unwrap();
        assert_eq!(list[0].row_to_col, vec![0, 1]);
        assert_eq!(list[1].row_to_col, vec![1, 0]);
    }

    #[test]
    fn murty_counts_feasible_only() {
        // One row, two columns, one forbidden: only one feasible assignment.
        let m = dense(1, 2, &[3.0, FORBIDDEN_COST]);
        let list = murty_kbest(&m, 5).unwrap();
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].row_to_col, vec![0]);
    }

    #[test]
    fn tracking_structure_validated() {
        // m = 2, n = 1: columns are [bernoulli, new0, new1].
        let ok = DMatrix::from_row_slice(
            2,
            3,
            &[1.0, 2.0, FORBIDDEN_COST, 1.5, FORBIDDEN_COST, 2.5],
        );
        assert!(CostMatrix::new(ok, 1).is_ok());
        let bad = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 2.0, 1.5, 2.0, 2.5]);
        assert!(CostMatrix::new(bad, 1).is_err());
    }

    #[test]
    fn gate_examples() {
        let s = DMatrix::identity(1, 1);
        let z0 = DVector::from_vec(vec![0.0]);
        assert!(ellipsoidal_gate(&z0, &z0, &s, 1e-12).unwrap());
        let z = DVector::from_vec(vec![3.0]);
        assert!(ellipsoidal_gate(&z, &z0, &s, 9.0).unwrap());
        let z = DVector::from_vec(vec![3.001]);
        assert!(!ellipsoidal_gate(&z, &z0, &s, 9.0).unwrap());
        let singular = DMatrix::zeros(1, 1);
        assert!(ellipsoidal_gate(&z, &z0, &singular, 9.0).is_err());
    }

    #[test]
    fn counting_reference_values() {
        let table = [
            (4u64, 33_909u64, 46_328u64),
            (5, 384_091, 583_552),
            (6, 4_010_455, 6_882_352),
            (7, 38_398_641, 75_826_144),
        ];
        for (n, mbm, mbm01) in table {
            assert_eq!(count_mbm_hypotheses(14, n).unwrap(), BigUint::from(mbm));
            assert_eq!(count_mbm01_hypotheses(14, n).unwrap(), BigUint::from(mbm01));
        }
        assert_eq!(count_mbm_hypotheses(14, 0).unwrap(), BigUint::from(1u32));
        assert_eq!(count_mbm_hypotheses(2, 2).unwrap(), BigUint::from(7u32));
        assert_eq!(count_mbm01_hypotheses(2, 2).unwrap(), BigUint::from(14u32));
        assert!(count_mbm_hypotheses(31, 1).is_err());
        assert!(count_mbm01_hypotheses(1, 31).is_err());
    }

    #[test]
    fn counting_matches_exhaustive_generator() {
        for m in 0..=4usize {
            for n in 0..=4usize {
                let listed = enumerate_global_associations(m, n).len();
                let counted = count_mbm_hypotheses(m as u64, n as u64).unwrap();
                assert_eq!(counted, BigUint::from(listed));
                // MBM01: every subset of alive Bernoullis, misdetections not
                // allowed to revive dead ones.
                let mut total = 0usize;
                for mask in 0..(1usize << n) {
                    let alive = (mask as u32).count_ones() as usize;
                    total += enumerate_global_associations(m, alive).len();
                }
                assert_eq!(count_mbm01_hypotheses(m as u64, n as u64).unwrap(), BigUint::from(total));
            }
        }
    }
}
