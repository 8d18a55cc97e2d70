//! Problem reduction before the solve and its exact inverse afterwards.
//!
//! The reducer works on the equality form `Ax = b, l <= x <= u` and
//! applies, to a fixed point: empty-row removal, bound-consistency
//! checks, fixed-variable substitution, singleton-row elimination,
//! empty-column removal, and free-variable splitting. A final pass
//! removes linearly dependent rows, localized by connected components
//! of the bipartite row/column graph and detected by orthogonalizing
//! each component's rows with the right-hand side carried along as a
//! passenger (so an inconsistent dependent row proves infeasibility).
//!
//! Every change appends an undo record; [`postsolve`] replays the
//! records in reverse to map a reduced-space solution to the original
//! space. Rows and columns are tombstoned during reduction — indices
//! stay stable until one compaction at the end, and the kept-index maps
//! live in the [`PresolveStack`].
//!
//! Diagonal equilibration is housed here too: [`scale`] runs iterated
//! row/column 2-norm balancing on a standard-form problem until every
//! norm sits inside [1/10, 10], then divides `b` and `c` down to unit
//! norm so neither dominates the solver's embedded system.

use crate::lp_model::{CandidateSolution, GeneralLp, StandardLp};
use crate::sparse::Csc;

/// Residual slack allowed when deciding whether a forced value or a
/// dependent row's right-hand side is consistent.
const CONSISTENCY_TOL: f64 = 1e-9;

/// One undoable reduction, recorded in application order.
#[derive(Debug, Clone)]
pub enum Reduction {
    /// a row with no surviving entries and (consistent) zero rhs
    EmptyRow { row: usize },
    /// row with a single entry `coeff * x_col = b`; removing it fixes
    /// the variable, and the dual of the row absorbs the reduced cost
    SingletonRow { row: usize, col: usize, coeff: f64 },
    /// variable pinned to `value`; its column was folded into `b`
    FixedVariable { col: usize, value: f64, cost: f64, entries: Vec<(usize, f64)> },
    /// a column with no surviving entries, moved to its cheaper bound
    EmptyColumn { col: usize, value: f64, cost: f64 },
    /// free variable `x_col` replaced by `x_col - x_new` with both
    /// parts nonnegative; the new column holds the negated entries
    FreeSplit { col: usize, new_col: usize },
    /// rows proven to be linear combinations of the kept rows
    DependentRows { rows: Vec<usize> },
}

/// The record of a presolve run: what was done, and how the reduced
/// index space maps back to the workspace the records refer to.
#[derive(Debug, Clone)]
pub struct PresolveStack {
    reductions: Vec<Reduction>,
    kept_rows: Vec<usize>,
    kept_cols: Vec<usize>,
    /// workspace column count: original columns plus appended splits
    work_cols: usize,
    original_rows: usize,
    original_cols: usize,
}

impl PresolveStack {
    pub fn reduction_count(&self) -> usize {
        self.reductions.len()
    }

    pub fn reductions(&self) -> &[Reduction] {
        &self.reductions
    }
}

/// What presolve concluded about the problem.
#[derive(Debug)]
pub enum PresolveOutcome {
    Reduced { lp: GeneralLp, stack: PresolveStack },
    Infeasible(String),
    Unbounded(String),
}

struct Work {
    /// per-column entry snapshots (row, value); append-only
    cols: Vec<Vec<(usize, f64)>>,
    /// per-row entry snapshots (col, value); append-only
    rows: Vec<Vec<(usize, f64)>>,
    row_alive: Vec<bool>,
    col_alive: Vec<bool>,
    /// surviving entries per row / column
    row_count: Vec<usize>,
    col_count: Vec<usize>,
    b: Vec<f64>,
    c: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    offset: f64,
}

impl Work {
    fn from_lp(lp: &GeneralLp) -> Self {
        let (m, n) = (lp.nrows(), lp.ncols());
        let mut cols = Vec::with_capacity(n);
        let mut rows = vec![Vec::new(); m];
        for j in 0..n {
            let (ri, rv) = lp.a.col(j);
            let mut col = Vec::with_capacity(ri.len());
            for (&i, &v) in ri.iter().zip(rv) {
                col.push((i, v));
                rows[i].push((j, v));
            }
            cols.push(col);
        }
        let row_count = rows.iter().map(Vec::len).collect();
        let col_count = cols.iter().map(Vec::len).collect();
        Work {
            cols,
            rows,
            row_alive: vec![true; m],
            col_alive: vec![true; n],
            row_count,
            col_count,
            b: lp.b.clone(),
            c: lp.c.clone(),
            lower: lp.lower.clone(),
            upper: lp.upper.clone(),
            offset: lp.offset,
        }
    }

    /// Removes a column after pinning its variable at `value`,
    /// folding the contribution into the right-hand side.
    fn remove_col_at(&mut self, j: usize, value: f64) {
        for &(i, v) in &self.cols[j] {
            if self.row_alive[i] {
                self.b[i] -= v * value;
                self.row_count[i] -= 1;
            }
        }
        self.col_alive[j] = false;
    }

    fn remove_row(&mut self, i: usize) {
        for &(j, _) in &self.rows[i] {
            if self.col_alive[j] {
                self.col_count[j] -= 1;
            }
        }
        self.row_alive[i] = false;
    }
}

/// Reduces the problem or proves it infeasible/unbounded outright.
pub fn presolve(lp: &GeneralLp) -> PresolveOutcome {
    let mut w = Work::from_lp(lp);
    let mut reds: Vec<Reduction> = Vec::new();
    let b_ref = 1.0 + lp.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    // rule passes repeat until a full sweep changes nothing
    loop {
        let mut changed = false;

        // empty rows: 0 = b must hold
        for i in 0..w.b.len() {
            if w.row_alive[i] && w.row_count[i] == 0 {
                if w.b[i].abs() > CONSISTENCY_TOL * b_ref {
                    return PresolveOutcome::Infeasible(format!(
                        "row {i} reduces to 0 = {}",
                        w.b[i]
                    ));
                }
                w.remove_row(i);
                reds.push(Reduction::EmptyRow { row: i });
                changed = true;
            }
        }

        // contradictory or infinite-forcing bounds
        for j in 0..w.c.len() {
            if !w.col_alive[j] {
                continue;
            }
            if w.lower[j] > w.upper[j] {
                return PresolveOutcome::Infeasible(format!(
                    "variable {j} has empty bound interval [{}, {}]",
                    w.lower[j], w.upper[j]
                ));
            }
            if w.lower[j] == w.upper[j] && !w.lower[j].is_finite() {
                return PresolveOutcome::Infeasible(format!(
                    "variable {j} is forced to {}",
                    w.lower[j]
                ));
            }
        }

        // fixed variables substitute into b
        for j in 0..w.c.len() {
            if w.col_alive[j] && w.lower[j] == w.upper[j] {
                let value = w.lower[j];
                let entries: Vec<(usize, f64)> = w.cols[j]
                    .iter()
                    .filter(|&&(i, _)| w.row_alive[i])
                    .copied()
                    .collect();
                w.remove_col_at(j, value);
                w.offset += w.c[j] * value;
                reds.push(Reduction::FixedVariable { col: j, value, cost: w.c[j], entries });
                changed = true;
            }
        }

        // singleton rows force their variable; the fix itself is left
        // to the fixed-variable rule on the next sweep
        for i in 0..w.b.len() {
            if !w.row_alive[i] || w.row_count[i] != 1 {
                continue;
            }
            let &(j, coeff) = w.rows[i]
                .iter()
                .find(|&&(j, _)| w.col_alive[j])
                .expect("count says one entry survives");
            let value = w.b[i] / coeff;
            let tol = CONSISTENCY_TOL * (1.0 + value.abs());
            if w.lower[j] == w.upper[j] {
                // already pinned elsewhere; only consistency remains
                if (value - w.lower[j]).abs() > tol {
                    return PresolveOutcome::Infeasible(format!(
                        "row {i} forces variable {j} to {value}, already pinned at {}",
                        w.lower[j]
                    ));
                }
            } else {
                if value < w.lower[j] - tol || value > w.upper[j] + tol {
                    return PresolveOutcome::Infeasible(format!(
                        "row {i} forces variable {j} to {value}, outside [{}, {}]",
                        w.lower[j], w.upper[j]
                    ));
                }
                w.lower[j] = value;
                w.upper[j] = value;
            }
            w.remove_row(i);
            reds.push(Reduction::SingletonRow { row: i, col: j, coeff });
            changed = true;
        }

        // empty columns move to whichever bound the objective prefers
        match sweep_empty_columns(&mut w, &mut reds) {
            Ok(did) => changed |= did,
            Err(msg) => return PresolveOutcome::Unbounded(msg),
        }

        // free variables split into a nonnegative difference
        for j in 0..w.c.len() {
            if w.col_alive[j]
                && w.lower[j] == f64::NEG_INFINITY
                && w.upper[j] == f64::INFINITY
            {
                let new_col = w.cols.len();
                let mirrored: Vec<(usize, f64)> = w.cols[j]
                    .iter()
                    .filter(|&&(i, _)| w.row_alive[i])
                    .map(|&(i, v)| (i, -v))
                    .collect();
                for &(i, v) in &mirrored {
                    w.rows[i].push((new_col, v));
                    w.row_count[i] += 1;
                }
                w.col_count.push(mirrored.len());
                w.cols.push(mirrored);
                w.col_alive.push(true);
                w.c.push(-w.c[j]);
                w.lower.push(0.0);
                w.upper.push(f64::INFINITY);
                w.lower[j] = 0.0;
                w.upper[j] = f64::INFINITY;
                reds.push(Reduction::FreeSplit { col: j, new_col });
                changed = true;
            }
        }

        if !changed {
            break;
        }
    }

    // rank cleanup: drop rows spanned by earlier rows, then sweep the
    // columns that may have emptied
    if let Err(msg) = remove_dependent_rows(&mut w, &mut reds) {
        return PresolveOutcome::Infeasible(msg);
    }
    if let Err(msg) = sweep_empty_columns(&mut w, &mut reds) {
        return PresolveOutcome::Unbounded(msg);
    }

    // compact the tombstoned workspace into a dense index space
    let kept_rows: Vec<usize> = (0..w.b.len()).filter(|&i| w.row_alive[i]).collect();
    let kept_cols: Vec<usize> = (0..w.c.len()).filter(|&j| w.col_alive[j]).collect();
    let mut row_local = vec![usize::MAX; w.b.len()];
    for (local, &i) in kept_rows.iter().enumerate() {
        row_local[i] = local;
    }
    let mut trips = Vec::new();
    for (local_j, &j) in kept_cols.iter().enumerate() {
        for &(i, v) in &w.cols[j] {
            if w.row_alive[i] {
                trips.push((row_local[i], local_j, v));
            }
        }
    }
    let a = Csc::from_triplets(kept_rows.len(), kept_cols.len(), &trips);
    let mut reduced = GeneralLp::new(
        a,
        kept_rows.iter().map(|&i| w.b[i]).collect(),
        kept_cols.iter().map(|&j| w.c[j]).collect(),
        kept_cols.iter().map(|&j| w.lower[j]).collect(),
        kept_cols.iter().map(|&j| w.upper[j]).collect(),
    );
    reduced.offset = w.offset;
    reduced.maximize = lp.maximize;

    let stack = PresolveStack {
        reductions: reds,
        kept_rows,
        kept_cols,
        work_cols: w.c.len(),
        original_rows: lp.nrows(),
        original_cols: lp.ncols(),
    };
    PresolveOutcome::Reduced { lp: reduced, stack }
}

fn sweep_empty_columns(w: &mut Work, reds: &mut Vec<Reduction>) -> Result<bool, String> {
    let mut changed = false;
    for j in 0..w.c.len() {
        if !w.col_alive[j] || w.col_count[j] != 0 {
            continue;
        }
        let (lo, hi, cj) = (w.lower[j], w.upper[j], w.c[j]);
        let value = if cj > 0.0 {
            if lo == f64::NEG_INFINITY {
                return Err(format!(
                    "column {j} is unconstrained with positive cost and no lower bound"
                ));
            }
            lo
        } else if cj < 0.0 {
            if hi == f64::INFINITY {
                return Err(format!(
                    "column {j} is unconstrained with negative cost and no upper bound"
                ));
            }
            hi
        } else if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            0.0
        };
        w.col_alive[j] = false;
        w.offset += cj * value;
        reds.push(Reduction::EmptyColumn { col: j, value, cost: cj });
        changed = true;
    }
    Ok(changed)
}

/// Finds rows that are linear combinations of other rows within their
/// connected component and removes them, or proves the system
/// inconsistent. Earlier rows win; later dependent rows are dropped.
fn remove_dependent_rows(w: &mut Work, reds: &mut Vec<Reduction>) -> Result<(), String> {
    let m = w.b.len();
    // union-find over rows, joined through shared columns
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for j in 0..w.c.len() {
        if !w.col_alive[j] {
            continue;
        }
        let mut first: Option<usize> = None;
        for &(i, _) in &w.cols[j] {
            if !w.row_alive[i] {
                continue;
            }
            match first {
                None => first = Some(find(&mut parent, i)),
                Some(root) => {
                    let r = find(&mut parent, i);
                    parent[r] = root;
                }
            }
        }
    }
    let mut groups: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for i in 0..m {
        if w.row_alive[i] {
            groups.entry(find(&mut parent, i)).or_default().push(i);
        }
    }

    let mut dependent: Vec<usize> = Vec::new();
    let mut group_keys: Vec<usize> = groups.keys().copied().collect();
    group_keys.sort_unstable();
    for key in group_keys {
        let rows = &groups[&key];
        if rows.len() < 2 {
            continue;
        }
        // local dense column space for this component
        let mut col_local: std::collections::HashMap<usize, usize> =
            std::collections::HashMap::new();
        for &i in rows {
            for &(j, _) in &w.rows[i] {
                if w.col_alive[j] {
                    let next = col_local.len();
                    col_local.entry(j).or_insert(next);
                }
            }
        }
        let width = col_local.len();
        let b_ref = 1.0 + rows.iter().fold(0.0f64, |acc, &i| acc.max(w.b[i].abs()));
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut passengers: Vec<f64> = Vec::new();
        for &i in rows {
            let mut v = vec![0.0; width];
            for &(j, val) in &w.rows[i] {
                if w.col_alive[j] {
                    v[col_local[&j]] = val;
                }
            }
            let mut beta = w.b[i];
            let norm_orig = norm2(&v);
            // two projection passes for orthogonality at machine level
            for _ in 0..2 {
                for (q, p) in basis.iter().zip(&passengers) {
                    let proj = dot(&v, q);
                    axpy(&mut v, q, -proj);
                    beta -= proj * p;
                }
            }
            let res = norm2(&v);
            if res <= CONSISTENCY_TOL * (1.0 + norm_orig) {
                if beta.abs() > CONSISTENCY_TOL * b_ref {
                    return Err(format!(
                        "row {i} is a combination of earlier rows but its \
                         right-hand side differs by {beta:.3e}"
                    ));
                }
                dependent.push(i);
            } else {
                for x in v.iter_mut() {
                    *x /= res;
                }
                basis.push(v);
                passengers.push(beta / res);
            }
        }
    }

    if !dependent.is_empty() {
        dependent.sort_unstable();
        for &i in &dependent {
            w.remove_row(i);
        }
        reds.push(Reduction::DependentRows { rows: dependent });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], x: &[f64], alpha: f64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Maps a reduced-space solution back to the original problem by
/// replaying the reduction records in reverse.
pub fn postsolve(stack: &PresolveStack, reduced: &CandidateSolution) -> CandidateSolution {
    assert_eq!(reduced.y.len(), stack.kept_rows.len(), "row dimension mismatch");
    assert_eq!(reduced.x.len(), stack.kept_cols.len(), "column dimension mismatch");
    assert_eq!(reduced.s.len(), stack.kept_cols.len(), "column dimension mismatch");

    let mut x = vec![0.0; stack.work_cols];
    let mut s = vec![0.0; stack.work_cols];
    let mut y = vec![0.0; stack.original_rows];
    for (local, &i) in stack.kept_rows.iter().enumerate() {
        y[i] = reduced.y[local];
    }
    for (local, &j) in stack.kept_cols.iter().enumerate() {
        x[j] = reduced.x[local];
        s[j] = reduced.s[local];
    }

    for red in stack.reductions.iter().rev() {
        match red {
            Reduction::EmptyRow { row } => y[*row] = 0.0,
            Reduction::DependentRows { rows } => {
                for &i in rows {
                    y[i] = 0.0;
                }
            }
            Reduction::SingletonRow { row, col, coeff } => {
                // hand the variable's whole reduced cost to this row's dual
                y[*row] = s[*col] / coeff;
                s[*col] = 0.0;
            }
            Reduction::FixedVariable { col, value, cost, entries } => {
                x[*col] = *value;
                s[*col] = cost - entries.iter().map(|&(i, v)| v * y[i]).sum::<f64>();
            }
            Reduction::EmptyColumn { col, value, cost } => {
                x[*col] = *value;
                s[*col] = *cost;
            }
            Reduction::FreeSplit { col, new_col } => {
                x[*col] -= x[*new_col];
            }
        }
    }

    x.truncate(stack.original_cols);
    s.truncate(stack.original_cols);
    CandidateSolution { x, y, s }
}

/// Positive diagonal scalings applied as `D_r A D_c`, plus scalar
/// normalizations of the right-hand side and the cost: the solved
/// problem has `b̃ = D_r b / b_scale` and `c̃ = D_c c / c_scale`.
/// Solutions map back via `x = b_scale · D_c x̃`, `y = c_scale · D_r ỹ`,
/// `s = c_scale · s̃ / D_c`.
#[derive(Debug, Clone)]
pub struct ScaleRecord {
    pub row_scale: Vec<f64>,
    pub col_scale: Vec<f64>,
    pub b_scale: f64,
    pub c_scale: f64,
}

impl ScaleRecord {
    pub fn identity(m: usize, n: usize) -> Self {
        ScaleRecord {
            row_scale: vec![1.0; m],
            col_scale: vec![1.0; n],
            b_scale: 1.0,
            c_scale: 1.0,
        }
    }
}

const SCALE_BAND: (f64, f64) = (0.1, 10.0);
const SCALE_MAX_ITERS: usize = 10;

/// Iterated row/column 2-norm equilibration, then scalar normalization
/// of `b` and `c`. Multiplying each side by the square root of its norm
/// and repeating drives every row and column norm toward 1; iteration
/// stops once all norms are within [1/10, 10]. Because the embedding
/// carries `b` and `c` inside its skew matrix, their norms bound its
/// conditioning, so each is divided down to unit norm when larger
/// (never inflated when small). The normalization is not free: optimality
/// is certified in original units, so every factor taken out of `b` and
/// `c` must be paid back by a proportionally deeper barrier parameter,
/// whose cube drives the inner loop's stopping rule — but leaving a large
/// `b` or `c` in place stalls the splitting far worse than the deeper
/// barrier costs. The value of the objective transforms as
/// `c'x = b_scale · c_scale · c̃'x̃`; `offset` stays in original units.
pub fn scale(lp: &StandardLp) -> (StandardLp, ScaleRecord) {
    let (m, n) = (lp.nrows(), lp.ncols());
    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(lp.a.nnz());
    for j in 0..n {
        let (ri, rv) = lp.a.col(j);
        for (&i, &v) in ri.iter().zip(rv) {
            entries.push((i, j, v));
        }
    }
    let mut row_mul = vec![1.0; m];
    let mut col_mul = vec![1.0; n];

    for _ in 0..SCALE_MAX_ITERS {
        let mut row_sq = vec![0.0f64; m];
        let mut col_sq = vec![0.0f64; n];
        for &(i, j, v) in &entries {
            let w = v * row_mul[i] * col_mul[j];
            row_sq[i] += w * w;
            col_sq[j] += w * w;
        }
        let in_band = |sq: f64| {
            let nrm = sq.sqrt();
            sq == 0.0 || (SCALE_BAND.0 <= nrm && nrm <= SCALE_BAND.1)
        };
        if row_sq.iter().all(|&v| in_band(v)) && col_sq.iter().all(|&v| in_band(v)) {
            break;
        }
        for (mul, &sq) in row_mul.iter_mut().zip(&row_sq) {
            if sq > 0.0 {
                *mul /= sq.sqrt().sqrt();
            }
        }
        for (mul, &sq) in col_mul.iter_mut().zip(&col_sq) {
            if sq > 0.0 {
                *mul /= sq.sqrt().sqrt();
            }
        }
    }

    let trips: Vec<(usize, usize, f64)> = entries
        .iter()
        .map(|&(i, j, v)| (i, j, v * row_mul[i] * col_mul[j]))
        .collect();
    let a = Csc::from_triplets(m, n, &trips);
    let mut b: Vec<f64> = lp.b.iter().zip(&row_mul).map(|(v, d)| v * d).collect();
    let mut c: Vec<f64> = lp.c.iter().zip(&col_mul).map(|(v, d)| v * d).collect();
    let b_scale = norm2(&b).max(1.0);
    let c_scale = norm2(&c).max(1.0);
    for v in b.iter_mut() {
        *v /= b_scale;
    }
    for v in c.iter_mut() {
        *v /= c_scale;
    }
    let mut scaled = StandardLp::new(a, b, c);
    scaled.offset = lp.offset;
    (scaled, ScaleRecord { row_scale: row_mul, col_scale: col_mul, b_scale, c_scale })
}

/// Maps a solution of the scaled problem back to the unscaled one.
pub fn unscale_solution(rec: &ScaleRecord, sol: &CandidateSolution) -> CandidateSolution {
    let (sb, sc) = (rec.b_scale, rec.c_scale);
    CandidateSolution {
        x: sol.x.iter().zip(&rec.col_scale).map(|(v, d)| sb * v * d).collect(),
        y: sol.y.iter().zip(&rec.row_scale).map(|(v, d)| sc * v * d).collect(),
        s: sol.s.iter().zip(&rec.col_scale).map(|(v, d)| sc * v / d).collect(),
    }
}
