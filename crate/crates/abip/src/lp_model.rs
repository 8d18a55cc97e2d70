//! Problem containers and the bound-folding step that turns a bounded
//! equality-form LP into the standard form `min c'x, Ax = b, x >= 0`
//! the solver core works on.

use crate::sparse::{dot, norm2, Csc};

/// Equality-constrained LP with variable bounds:
/// `min c'x  s.t.  A x = b,  lower <= x <= upper` (entries may be infinite).
/// Inequality rows from ingestion have already been given slack columns.
#[derive(Clone, Debug)]
pub struct GeneralLp {
    pub a: Csc,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// constant added to c'x when reporting objectives
    pub offset: f64,
    /// true when the source problem was a maximization; `c` and `offset`
    /// are stored negated and reports flip the sign back
    pub maximize: bool,
}

impl GeneralLp {
    pub fn new(a: Csc, b: Vec<f64>, c: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(a.nrows(), b.len(), "b length must match row count");
        assert_eq!(a.ncols(), c.len(), "c length must match column count");
        assert_eq!(c.len(), lower.len());
        assert_eq!(c.len(), upper.len());
        GeneralLp { a, b, c, lower, upper, offset: 0.0, maximize: false }
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    /// Objective value of a point in this problem's own sign convention.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let raw = dot(&self.c, x) + self.offset;
        if self.maximize {
            -raw
        } else {
            raw
        }
    }
}

/// `min c'x  s.t.  A x = b, x >= 0`.
#[derive(Clone, Debug)]
pub struct StandardLp {
    pub a: Csc,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub offset: f64,
}

impl StandardLp {
    pub fn new(a: Csc, b: Vec<f64>, c: Vec<f64>) -> Self {
        assert_eq!(a.nrows(), b.len());
        assert_eq!(a.ncols(), c.len());
        StandardLp { a, b, c, offset: 0.0 }
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    /// Structural sanity: dimensions agree, no all-zero row, and the row
    /// count does not exceed the column count. The solver tolerates
    /// violations of the last two but the presolve pipeline guarantees
    /// them.
    pub fn validate(&self) -> Result<(), String> {
        if self.a.nrows() != self.b.len() || self.a.ncols() != self.c.len() {
            return Err("dimension mismatch".into());
        }
        if self.a.nrows() > self.a.ncols() {
            return Err(format!(
                "more rows ({}) than columns ({})",
                self.a.nrows(),
                self.a.ncols()
            ));
        }
        let counts = self.a.row_counts();
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(format!("row {i} has no entries"));
        }
        Ok(())
    }

    /// View as a bounded problem with bounds [0, inf).
    pub fn to_general(&self) -> GeneralLp {
        let n = self.ncols();
        let mut g = GeneralLp::new(
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            vec![0.0; n],
            vec![f64::INFINITY; n],
        );
        g.offset = self.offset;
        g
    }
}

/// Primal-dual candidate for a standard-form problem (or for the original
/// bounded problem after postsolve, where `s` holds reduced costs).
#[derive(Clone, Debug)]
pub struct CandidateSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
}

/// Unnormalized KKT residual norms; `gap` keeps its sign.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Residuals {
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
}

/// Residuals of a candidate against `A x = b`, `A'y + s = c`, `c'x = b'y`.
pub fn kkt_residuals(lp: &StandardLp, sol: &CandidateSolution) -> Residuals {
    let mut pres = lp.a.matvec(&sol.x);
    for (p, bi) in pres.iter_mut().zip(&lp.b) {
        *p -= bi;
    }
    let mut dres = lp.a.matvec_t(&sol.y);
    for ((d, si), ci) in dres.iter_mut().zip(&sol.s).zip(&lp.c) {
        *d += si - ci;
    }
    Residuals {
        pres: norm2(&pres),
        dres: norm2(&dres),
        gap: dot(&lp.c, &sol.x) - dot(&lp.b, &sol.y),
    }
}

/// Record of the transformations `to_standard_form` applied, in application
/// order: free-column splits, upper-bound mirrors, lower-bound shifts, then
/// one row per finite upper bound.
#[derive(Clone, Debug)]
pub struct FoldRecord {
    /// columns of the input problem
    pub orig_cols: usize,
    /// rows of the input problem
    pub orig_rows: usize,
    /// (column, appended negative-part column)
    pub splits: Vec<(usize, usize)>,
    /// (column, original finite upper bound) for columns with no lower bound
    pub mirrors: Vec<(usize, f64)>,
    /// per-column shift after splits and mirrors (finite)
    pub shift: Vec<f64>,
    /// (column, standard-form row index of its bound row)
    pub bound_rows: Vec<(usize, usize)>,
}

/// Folds bounds away: splits free columns into positive and negative
/// parts, mirrors columns bounded only above, shifts finite lower bounds
/// to zero, and turns finite upper bounds into extra equality rows with
/// slack columns. The objective constant moves into `offset`.
pub fn to_standard_form(lp: &GeneralLp) -> (StandardLp, FoldRecord) {
    let m = lp.nrows();
    let orig_n = lp.ncols();

    struct Col {
        entries: Vec<(usize, f64)>,
        lower: f64,
        upper: f64,
        cost: f64,
    }
    let mut cols: Vec<Col> = (0..orig_n)
        .map(|j| {
            let (rows, vals) = lp.a.col(j);
            Col {
                entries: rows.iter().copied().zip(vals.iter().copied()).collect(),
                lower: lp.lower[j],
                upper: lp.upper[j],
                cost: lp.c[j],
            }
        })
        .collect();
    let mut b = lp.b.clone();
    let mut offset = lp.offset;
    let mut splits = Vec::new();
    let mut mirrors = Vec::new();

    for j in 0..orig_n {
        if lp.lower[j] == f64::NEG_INFINITY {
            if lp.upper[j] == f64::INFINITY {
                // x = x+ - x-, both nonnegative
                let neg = cols.len();
                let entries = cols[j].entries.iter().map(|&(i, v)| (i, -v)).collect();
                let cost = -cols[j].cost;
                cols.push(Col { entries, lower: 0.0, upper: f64::INFINITY, cost });
                cols[j].lower = 0.0;
                splits.push((j, neg));
            } else {
                // x = upper - x', x' >= 0
                let w = lp.upper[j];
                for &(i, v) in &cols[j].entries {
                    b[i] -= v * w;
                }
                offset += cols[j].cost * w;
                for e in &mut cols[j].entries {
                    e.1 = -e.1;
                }
                cols[j].cost = -cols[j].cost;
                cols[j].lower = 0.0;
                cols[j].upper = f64::INFINITY;
                mirrors.push((j, w));
            }
        }
    }

    let n2 = cols.len();
    let mut shift = vec![0.0; n2];
    for (j, col) in cols.iter_mut().enumerate() {
        let l = col.lower;
        debug_assert!(l.is_finite());
        if l != 0.0 {
            for &(i, v) in &col.entries {
                b[i] -= v * l;
            }
            offset += col.cost * l;
        }
        shift[j] = l;
        col.upper -= l;
        col.lower = 0.0;
    }

    let bounded: Vec<usize> = (0..n2).filter(|&j| cols[j].upper.is_finite()).collect();
    let u = bounded.len();
    let rows_out = m + u;
    let cols_out = n2 + u;
    let mut trips = Vec::new();
    let mut c_out = vec![0.0; cols_out];
    let mut b_out = vec![0.0; rows_out];
    b_out[..m].copy_from_slice(&b);
    for (j, col) in cols.iter().enumerate() {
        for &(i, v) in &col.entries {
            trips.push((i, j, v));
        }
        c_out[j] = col.cost;
    }
    let mut bound_rows = Vec::with_capacity(u);
    for (k, &j) in bounded.iter().enumerate() {
        let row = m + k;
        trips.push((row, j, 1.0));
        trips.push((row, n2 + k, 1.0));
        b_out[row] = cols[j].upper;
        bound_rows.push((j, row));
    }

    let mut std = StandardLp::new(Csc::from_triplets(rows_out, cols_out, &trips), b_out, c_out);
    std.offset = offset;
    let record = FoldRecord { orig_cols: orig_n, orig_rows: m, splits, mirrors, shift, bound_rows };
    (std, record)
}

/// Maps a standard-form candidate back through a `FoldRecord`.
pub fn undo_fold(record: &FoldRecord, sol: &CandidateSolution) -> CandidateSolution {
    let n2 = record.shift.len();
    let mut x: Vec<f64> = (0..n2).map(|j| sol.x[j] + record.shift[j]).collect();
    let mut s: Vec<f64> = sol.s[..n2].to_vec();
    // a bound row's dual folds into the column's reduced cost
    for &(j, row) in &record.bound_rows {
        s[j] += sol.y[row];
    }
    for &(j, w) in record.mirrors.iter().rev() {
        x[j] = w - x[j];
        s[j] = -s[j];
    }
    for &(j, neg) in record.splits.iter().rev() {
        x[j] -= x[neg];
        // reduced cost of the original free column equals the positive
        // part's; at optimality both parts vanish
    }
    x.truncate(record.orig_cols);
    s.truncate(record.orig_cols);
    CandidateSolution { x, y: sol.y[..record.orig_rows].to_vec(), s }
}
