//! End-to-end solve pipeline for general bounded LPs: reduction, bound
//! folding, equilibration, the interior-point solve, and the reverse
//! mappings that state the answer in the caller's original space.

use std::time::Instant;

use crate::ipm_driver::{solve_with_observer, Certificate, SolveStatus, SolverConfig, TerminationFrame};
use crate::linalg::{rcm_order, LdlFactor};
use crate::lp_model::{to_standard_form, undo_fold, CandidateSolution, GeneralLp, Residuals, StandardLp};
use crate::presolve::{postsolve, presolve, scale, PresolveOutcome};
use crate::sparse::{dot, norm2, Csc};

/// Problem size triple plus density, the shape reduction tables use.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct DimReport {
    pub rows: usize,
    pub cols: usize,
    pub nonzeros: usize,
    pub density: f64,
}

impl DimReport {
    pub fn of_general(lp: &GeneralLp) -> Self {
        let (rows, cols, nonzeros) = (lp.nrows(), lp.ncols(), lp.a.nnz());
        let cells = rows * cols;
        DimReport {
            rows,
            cols,
            nonzeros,
            density: if cells == 0 { 0.0 } else { nonzeros as f64 / cells as f64 },
        }
    }
}

/// What the reduction stage did to the problem dimensions.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct PresolveSummary {
    pub before: DimReport,
    pub after: DimReport,
    /// individual reduction records applied (0 when reduction is disabled)
    pub reductions: usize,
}

/// Result of a full pipeline run.
///
/// `solution` and `objective` are stated for the caller's problem: the
/// point is mapped back through every reduction and folding step, and the
/// objective uses the problem's own sign convention (a maximization
/// problem reports the maximum). `s` holds reduced costs of the internal
/// minimization.
///
/// `residuals` are the unnormalized norms certified at termination; they
/// refer to the reduced standard-form problem that was actually solved,
/// before equilibration. `certificate` rays live in that same space:
/// infeasibility certificates generally do not survive the reverse
/// reduction mapping, so they are reported where they were found.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub solution: Option<CandidateSolution>,
    pub certificate: Option<Certificate>,
    pub residuals: Option<Residuals>,
    pub presolve: PresolveSummary,
    pub outer_iterations: u64,
    pub total_admm_steps: u64,
    pub bb_updates: u64,
    pub mu_final: f64,
    /// wall time of the whole pipeline, reduction and postsolve included
    pub solve_seconds: f64,
}

impl PipelineReport {
    fn empty(summary: PresolveSummary) -> Self {
        PipelineReport {
            status: SolveStatus::NumericalFailure,
            objective: None,
            solution: None,
            certificate: None,
            residuals: None,
            presolve: summary,
            outer_iterations: 0,
            total_admm_steps: 0,
            bb_updates: 0,
            mu_final: 0.0,
            solve_seconds: 0.0,
        }
    }
}

/// Solves `min c'x  s.t.  A x = b, lower <= x <= upper` end to end.
pub fn solve_general(lp: &GeneralLp, cfg: &SolverConfig) -> PipelineReport {
    let started = Instant::now();
    let before = DimReport::of_general(lp);

    // reduction
    let mut stack = None;
    let reduced_owned;
    let reduced: &GeneralLp = if cfg.presolve_enabled {
        match presolve(lp) {
            PresolveOutcome::Reduced { lp: red, stack: st } => {
                stack = Some(st);
                reduced_owned = red;
                &reduced_owned
            }
            PresolveOutcome::Infeasible(reason) => {
                log::info!("reduction proved infeasibility: {reason}");
                let mut report =
                    PipelineReport::empty(summary_of(before, before, 0));
                report.status = SolveStatus::PrimalInfeasible;
                report.solve_seconds = started.elapsed().as_secs_f64();
                return report;
            }
            PresolveOutcome::Unbounded(reason) => {
                log::info!("reduction proved unboundedness: {reason}");
                let mut report =
                    PipelineReport::empty(summary_of(before, before, 0));
                report.status = SolveStatus::DualInfeasible;
                report.solve_seconds = started.elapsed().as_secs_f64();
                return report;
            }
        }
    } else {
        lp
    };
    let after = DimReport::of_general(reduced);
    let summary = summary_of(
        before,
        after,
        stack.as_ref().map_or(0, |s| s.reduction_count()),
    );

    // a fully determined problem skips the solver
    if reduced.ncols() == 0 {
        let mut report = finish_determined(lp, reduced, &stack, summary, cfg);
        report.solve_seconds = started.elapsed().as_secs_f64();
        return report;
    }

    // bound folding onto `x >= 0`
    let (std_lp, fold_rec) = to_standard_form(reduced);

    // an unconstrained fold means every column is judged by its cost sign
    if std_lp.nrows() == 0 {
        let mut report = finish_unconstrained(lp, &std_lp, &fold_rec, &stack, summary);
        report.solve_seconds = started.elapsed().as_secs_f64();
        return report;
    }

    // equilibration; convergence is always judged on the unscaled data
    let frame;
    let scaled_owned;
    let solve_lp: &StandardLp = if cfg.scaling_enabled {
        let (scaled, rec) = scale(&std_lp);
        frame = TerminationFrame {
            row_scale: rec.row_scale,
            col_scale: rec.col_scale,
            b_scale: rec.b_scale,
            c_scale: rec.c_scale,
            norm_b: norm2(&std_lp.b),
            norm_c: norm2(&std_lp.c),
        };
        scaled_owned = scaled;
        &scaled_owned
    } else {
        frame = TerminationFrame::identity(&std_lp);
        &std_lp
    };

    let mut inner = solve_with_observer(solve_lp, cfg, &frame, |_| {});

    // equilibration usually speeds convergence up, but on some problems
    // the rescaled geometry is the slower one; when the budget runs out
    // there, one retry on the raw data is cheap insurance
    let mut retry_frame = None;
    if inner.status == SolveStatus::Unfinished && cfg.scaling_enabled {
        log::info!("rescaled solve ran out of budget; retrying unscaled");
        let identity = retry_frame.insert(TerminationFrame::identity(&std_lp));
        let retry = solve_with_observer(&std_lp, cfg, identity, |_| {});
        let spent = inner.total_admm_steps;
        let prior_outers = inner.outer_iterations;
        let prior_bb = inner.bb_updates;
        inner = retry;
        inner.total_admm_steps += spent;
        inner.outer_iterations += prior_outers;
        inner.bb_updates += prior_bb;
    }
    let judged_frame = retry_frame.as_ref().unwrap_or(&frame);

    let mut report = PipelineReport::empty(summary);
    report.status = inner.status;
    report.certificate = inner.certificate;
    report.residuals = inner.residuals;
    report.outer_iterations = inner.outer_iterations;
    report.total_admm_steps = inner.total_admm_steps;
    report.bb_updates = inner.bb_updates;
    report.mu_final = inner.mu_final;

    // refinement of the terminated point in the unscaled space
    let mut solution_std = inner.solution;
    if cfg.polish_enabled && report.status == SolveStatus::Optimal {
        if let (Some(sol), Some(res)) = (&solution_std, &report.residuals) {
            if let Some((better, better_res)) = polish(&std_lp, judged_frame, sol, res) {
                report.residuals = Some(better_res);
                solution_std = Some(better);
            }
        }
    }

    if let Some(sol_std) = solution_std {
        let sol_reduced = undo_fold(&fold_rec, &sol_std);
        let sol_orig = match &stack {
            Some(st) => postsolve(st, &sol_reduced),
            None => sol_reduced,
        };
        report.objective = Some(lp.objective(&sol_orig.x));
        report.solution = Some(sol_orig);
    }
    report.solve_seconds = started.elapsed().as_secs_f64();
    report
}

/// Solves a standard-form problem through the same pipeline.
pub fn solve_standard(lp: &StandardLp, cfg: &SolverConfig) -> PipelineReport {
    solve_general(&lp.to_general(), cfg)
}

fn summary_of(before: DimReport, after: DimReport, reductions: usize) -> PresolveSummary {
    PresolveSummary { before, after, reductions }
}

/// Reduction removed every column (hence every row): the point is pinned,
/// so map it back and grade it against the original data directly.
fn finish_determined(
    lp: &GeneralLp,
    reduced: &GeneralLp,
    stack: &Option<crate::presolve::PresolveStack>,
    summary: PresolveSummary,
    cfg: &SolverConfig,
) -> PipelineReport {
    debug_assert_eq!(reduced.nrows(), 0, "empty columns imply empty rows");
    let trivial = CandidateSolution { x: vec![], y: vec![], s: vec![] };
    let sol = match stack {
        Some(st) => postsolve(st, &trivial),
        None => trivial,
    };
    let mut report = PipelineReport::empty(summary);
    let res = general_residuals(lp, &sol);
    // only an actually consistent pinned point counts as solved
    report.status = if res.pres <= cfg.eps_pres && res.dres <= cfg.eps_dres {
        SolveStatus::Optimal
    } else {
        SolveStatus::PrimalInfeasible
    };
    if report.status == SolveStatus::Optimal {
        report.objective = Some(lp.objective(&sol.x));
        report.solution = Some(sol);
        report.residuals = Some(res);
    }
    report
}

/// No rows survived folding: each column sits at zero unless a negative
/// cost makes the problem unbounded below.
fn finish_unconstrained(
    lp: &GeneralLp,
    std_lp: &StandardLp,
    fold_rec: &crate::lp_model::FoldRecord,
    stack: &Option<crate::presolve::PresolveStack>,
    summary: PresolveSummary,
) -> PipelineReport {
    let mut report = PipelineReport::empty(summary);
    if let Some(j) = std_lp.c.iter().position(|&cj| cj < 0.0) {
        let mut ray = vec![0.0; std_lp.ncols()];
        ray[j] = 1.0 / -std_lp.c[j]; // normalized to c'x = -1
        report.status = SolveStatus::DualInfeasible;
        report.certificate = Some(Certificate::DualRay(ray));
        return report;
    }
    let sol_std = CandidateSolution {
        x: vec![0.0; std_lp.ncols()],
        y: vec![],
        s: std_lp.c.clone(),
    };
    let sol_reduced = undo_fold(fold_rec, &sol_std);
    let sol = match stack {
        Some(st) => postsolve(st, &sol_reduced),
        None => sol_reduced,
    };
    report.status = SolveStatus::Optimal;
    report.objective = Some(lp.objective(&sol.x));
    report.residuals = Some(general_residuals(lp, &sol));
    report.solution = Some(sol);
    report
}

/// Refinement of a terminated optimal point.
///
/// A splitting method stops with objective error roughly proportional to
/// the tolerance times the data norms. This guesses the optimal support
/// from complementarity and solves the support-restricted equations
/// directly; a correct guess turns first-order accuracy into direct-solve
/// accuracy, and a wrong one is filtered by the acceptance test, which
/// keeps the refined point only when its worst normalized residual is no
/// larger than the incumbent's. Borderline columns blur the guess at loose
/// tolerances, so progressively stricter splits are tried until one
/// passes.
fn polish(
    lp: &StandardLp,
    frame: &TerminationFrame,
    sol: &CandidateSolution,
    incumbent: &Residuals,
) -> Option<(CandidateSolution, Residuals)> {
    [1.0, 1e-2, 1e2, 1e4]
        .iter()
        .find_map(|&ratio| try_polish(lp, frame, sol, incumbent, ratio))
}

/// One attempt at [`polish`] with a fixed strictness for the support
/// split.
///
/// The complementarity comparison must happen between the solver's own
/// variables: in the caller's frame the pair `(x_j, s_j)` is the scaled
/// pair stretched by `b_scale·col_j` and `c_scale/col_j` respectively,
/// which would skew a direct size contest. On the guessed support the
/// primal is projected onto `{A_J x = b}` and the dual solves
/// `min ||A_J' y - c_J||`, sharing one factorization of the
/// ridge-regularized normal matrix per round; exchange rounds then drop
/// columns the projection drives negative and admit columns whose reduced
/// cost comes out negative, the usual fingerprints of a misdrawn split.
fn try_polish(
    lp: &StandardLp,
    frame: &TerminationFrame,
    sol: &CandidateSolution,
    incumbent: &Residuals,
    ratio: f64,
) -> Option<(CandidateSolution, Residuals)> {
    let m = lp.nrows();
    let mut support: Vec<usize> = (0..lp.ncols())
        .filter(|&j| {
            let d = frame.col_scale[j];
            sol.x[j] * frame.c_scale >= ratio * sol.s[j] * d * d * frame.b_scale
        })
        .collect();

    let (colptr, rowidx, vals) = lp.a.parts();
    let c_span = lp.c.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut in_support = vec![false; lp.ncols()];
    for &j in &support {
        in_support[j] = true;
    }
    let mut xj;
    let mut y;
    let mut rounds = 0;
    loop {
        if support.is_empty() {
            return None;
        }
        let mut trips = Vec::new();
        for (newj, &j) in support.iter().enumerate() {
            for p in colptr[j]..colptr[j + 1] {
                trips.push((rowidx[p], newj, vals[p]));
            }
        }
        let aj = Csc::from_triplets(m, support.len(), &trips);

        // the support may be rank-deficient, so regularize the normal
        // matrix and cancel the ridge bias with refinement steps
        let diag_max =
            aj.row_norms().iter().fold(0.0f64, |a, &r| a.max(r * r));
        let normal = aj.aat().add_diagonal(1e-10 * (1.0 + diag_max));
        let factor = LdlFactor::new(&normal, Some(rcm_order(&normal))).ok()?;

        // primal: project the incumbent onto {A_J x = b} — a correction
        // of the order of the current infeasibility, so nonnegativity is
        // preserved up to noise and repeated steps cancel the ridge bias
        xj = support.iter().map(|&j| sol.x[j]).collect::<Vec<f64>>();
        for _ in 0..3 {
            let mut r = lp.b.clone();
            aj.spmv_add(&xj, &mut r, -1.0);
            for (v, u) in xj.iter_mut().zip(aj.matvec_t(&factor.solve(&r))) {
                *v += u;
            }
        }

        // least-squares dual on the support: minimize ||A_J' y - c_J||
        let cj: Vec<f64> = support.iter().map(|&j| lp.c[j]).collect();
        y = factor.solve(&aj.matvec(&cj));
        for _ in 0..2 {
            let mut g = cj.clone();
            aj.spmv_t_add(&y, &mut g, -1.0);
            for (v, u) in y.iter_mut().zip(factor.solve(&aj.matvec(&g))) {
                *v += u;
            }
        }

        if rounds >= 6 {
            break;
        }
        rounds += 1;

        // exchange on the usual fingerprints of a misdrawn split: an
        // entry the projection drives negative never belonged; a column
        // carrying no mass whose reduced cost resists the fit is also a
        // stray; and a column whose reduced cost goes negative is missing
        let span = xj.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let drop_below = -1e-9 * (1.0 + span);
        let fit_bad = 1e-7 * (1.0 + c_span);
        let x_tiny = 1e-6 * (1.0 + span);
        let aty = lp.a.matvec_t(&y);
        let mut changed = false;
        {
            let mut k = 0;
            support.retain(|&j| {
                let stray = xj[k] < drop_below
                    || (xj[k] < x_tiny && (lp.c[j] - aty[j]).abs() > fit_bad);
                k += 1;
                if stray {
                    in_support[j] = false;
                    changed = true;
                }
                !stray
            });
        }
        let viol_below = -1e-9 * (1.0 + c_span);
        for j in 0..lp.ncols() {
            if !in_support[j] && lp.c[j] - aty[j] < viol_below {
                in_support[j] = true;
                support.push(j);
                changed = true;
            }
        }
        if changed {
            support.sort_unstable();
        } else {
            break;
        }
    }

    // assemble honestly: clamp to the cone first, then measure
    let mut x = vec![0.0; lp.ncols()];
    for (&j, &v) in support.iter().zip(&xj) {
        x[j] = v.max(0.0);
    }
    let mut s = lp.a.matvec_t(&y);
    for (sj, &cjv) in s.iter_mut().zip(&lp.c) {
        *sj = (cjv - *sj).max(0.0);
    }
    if x.iter().chain(&y).chain(&s).any(|v| !v.is_finite()) {
        return None;
    }

    let polished = CandidateSolution { x, y, s };
    let res = standard_residuals(lp, &polished);
    if score(lp, &polished, &res) <= score(lp, sol, incumbent) {
        Some((polished, res))
    } else {
        None
    }
}

/// Unnormalized residual norms of a candidate for a standard-form problem.
fn standard_residuals(lp: &StandardLp, sol: &CandidateSolution) -> Residuals {
    let mut pres = lp.b.clone();
    lp.a.spmv_add(&sol.x, &mut pres, -1.0);
    let mut dres = lp.a.matvec_t(&sol.y);
    for ((d, sj), cj) in dres.iter_mut().zip(&sol.s).zip(&lp.c) {
        *d += sj - cj;
    }
    Residuals {
        pres: norm2(&pres),
        dres: norm2(&dres),
        gap: dot(&lp.c, &sol.x) - dot(&lp.b, &sol.y),
    }
}

/// Worst normalized residual under the optimality test's normalizations.
fn score(lp: &StandardLp, sol: &CandidateSolution, r: &Residuals) -> f64 {
    let cx = dot(&lp.c, &sol.x);
    let by = dot(&lp.b, &sol.y);
    let pres = r.pres / (1.0 + norm2(&lp.b));
    let dres = r.dres / (1.0 + norm2(&lp.c));
    let gap = r.gap.abs() / (1.0 + cx.abs() + by.abs());
    pres.max(dres).max(gap)
}

/// Unnormalized residuals of a candidate against the original bounded
/// problem (`gap` is the raw `c'x - b'y`, ignoring bound multipliers).
fn general_residuals(lp: &GeneralLp, sol: &CandidateSolution) -> Residuals {
    let mut pres = lp.b.clone();
    lp.a.spmv_add(&sol.x, &mut pres, -1.0);
    for p in pres.iter_mut() {
        *p = -*p;
    }
    let mut dres = lp.a.matvec_t(&sol.y);
    for ((d, sj), cj) in dres.iter_mut().zip(&sol.s).zip(&lp.c) {
        *d += sj - cj;
    }
    Residuals {
        pres: norm2(&pres),
        dres: norm2(&dres),
        gap: dot(&lp.c, &sol.x) - dot(&lp.b, &sol.y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_random_lp, parse_mps};
    use crate::sparse::Csc;
    use std::collections::HashMap;
    use std::fs;
    use std::path::Path;

    fn fixture(name: &str) -> GeneralLp {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/netlib");
        let text = fs::read_to_string(dir.join(name)).unwrap();
        parse_mps(&text).unwrap()
    }

    fn reference(name: &str) -> f64 {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/netlib");
        let text = fs::read_to_string(dir.join("reference_objectives.json")).unwrap();
        let map: HashMap<String, f64> = serde_json::from_str(&text).unwrap();
        map[name]
    }

    #[test]
    #[ignore]
    fn probe_polish_diag() {
        let lp = fixture("afiro.mps");
        let cfg = SolverConfig::default();
        let reduced = match presolve(&lp) {
            PresolveOutcome::Reduced { lp, .. } => lp,
            other => panic!("{other:?}"),
        };
        let (std_lp, _fold) = to_standard_form(&reduced);
        let (scaled, rec) = scale(&std_lp);
        let frame = TerminationFrame {
            row_scale: rec.row_scale,
            col_scale: rec.col_scale,
            b_scale: rec.b_scale,
            c_scale: rec.c_scale,
            norm_b: norm2(&std_lp.b),
            norm_c: norm2(&std_lp.c),
        };
        let inner = solve_with_observer(&scaled, &cfg, &frame, |_| {});
        let sol = inner.solution.unwrap();
        let res = inner.residuals.unwrap();
        eprintln!(
            "incumbent: obj {} score {} res ({}, {}, {})",
            dot(&std_lp.c, &sol.x),
            score(&std_lp, &sol, &res),
            res.pres,
            res.dres,
            res.gap
        );
        let support = (0..std_lp.ncols())
            .filter(|&j| {
                let d = frame.col_scale[j];
                sol.x[j] * frame.c_scale >= sol.s[j] * d * d * frame.b_scale
            })
            .count();
        eprintln!(
            "support {} of {} (m = {})",
            support,
            std_lp.ncols(),
            std_lp.nrows()
        );
        match polish(&std_lp, &frame, &sol, &res) {
            Some((p, pr)) => eprintln!(
                "polished: obj {} score {} res ({}, {}, {})",
                dot(&std_lp.c, &p.x),
                score(&std_lp, &p, &pr),
                pr.pres,
                pr.dres,
                pr.gap
            ),
            None => eprintln!("rejected"),
        }
    }

    #[test]
    fn afiro_end_to_end_matches_reference() {
        let lp = fixture("afiro.mps");
        let report = solve_general(&lp, &SolverConfig::default());
        assert_eq!(report.status, SolveStatus::Optimal);
        let obj = report.objective.unwrap();
        let want = reference("afiro");
        assert!(
            (obj - want).abs() / (1.0 + want.abs()) <= 1e-3,
            "{obj} vs {want}"
        );
        // this instance is already irreducible
        let s = report.presolve;
        assert_eq!(s.before.rows, s.after.rows);
        assert_eq!(s.before.cols, s.after.cols);
        assert_eq!(s.before.nonzeros, s.after.nonzeros);
        assert!(report.residuals.is_some());
        let sol = report.solution.unwrap();
        assert_eq!(sol.x.len(), lp.ncols());
        assert_eq!(sol.y.len(), lp.nrows());
    }

    #[test]
    fn reduction_toggle_keeps_the_objective() {
        // irreducible instance: both paths solve the identical problem
        let lp = fixture("afiro.mps");
        let on = solve_general(&lp, &SolverConfig::default());
        let mut cfg = SolverConfig::default();
        cfg.presolve_enabled = false;
        let off = solve_general(&lp, &cfg);
        let (a, b) = (on.objective.unwrap(), off.objective.unwrap());
        assert!((a - b).abs() / (1.0 + b.abs()) <= 1e-6, "{a} vs {b}");

        // an instance the reduction actually shrinks
        let lp = fixture("sc50a.mps");
        let on = solve_general(&lp, &SolverConfig::default());
        assert!(on.presolve.after.rows < on.presolve.before.rows);
        let off = solve_general(&lp, &cfg);
        let (a, b) = (on.objective.unwrap(), off.objective.unwrap());
        assert!((a - b).abs() / (1.0 + b.abs()) <= 5e-3, "{a} vs {b}");
        let want = reference("sc50a");
        assert!((a - want).abs() / (1.0 + want.abs()) <= 1e-3);
    }

    #[test]
    fn scaling_toggle_keeps_the_objective() {
        // the agreement claim is about the limit point, so solve tightly
        // enough that both paths actually resolve it
        let cfg_on = SolverConfig::with_tol(1e-4);
        let mut cfg_off = cfg_on.clone();
        cfg_off.scaling_enabled = false;
        for seed in 0..20 {
            let inst = generate_random_lp(10, 40, seed).unwrap();
            let on = solve_standard(&inst.lp, &cfg_on);
            let off = solve_standard(&inst.lp, &cfg_off);
            assert_eq!(on.status, SolveStatus::Optimal, "seed {seed}");
            assert_eq!(off.status, SolveStatus::Optimal, "seed {seed}");
            let (a, b) = (on.objective.unwrap(), off.objective.unwrap());
            let denom = 1.0 + inst.objective.abs();
            // each path certifies its own residuals to the configured
            // tolerance, so the two objectives may differ by the sum of
            // those certified budgets; on degenerate faces one path can
            // sit at the edge of its budget while the other is exact
            assert!(
                (a - b).abs() / denom <= 2e-3,
                "seed {seed}: scaled {a} vs unscaled {b}"
            );
            assert!(
                (a - inst.objective).abs() / denom <= 1e-3,
                "seed {seed}: {a} vs planted {}",
                inst.objective
            );
        }
    }

    #[test]
    fn maximization_reports_the_maximum() {
        let text = "\
NAME          TINYMAX
OBJSENSE
    MAX
ROWS
 N  OBJ
 L  CAP
 L  ONE
COLUMNS
    X         OBJ       1.0        CAP       1.0
    X         ONE       1.0
    Y         OBJ       1.0        CAP       1.0
RHS
    RHS       CAP       4.0        ONE       3.0
ENDATA
";
        let lp = parse_mps(text).unwrap();
        assert!(lp.maximize);
        let report = solve_general(&lp, &SolverConfig::default());
        assert_eq!(report.status, SolveStatus::Optimal);
        let obj = report.objective.unwrap();
        assert!((obj - 4.0).abs() <= 5e-3, "max should be 4, got {obj}");
    }

    #[test]
    fn fully_determined_problem_skips_the_solver() {
        // 5 x = 10 pins x = 2; nothing is left to iterate on
        let lp = GeneralLp::new(
            Csc::from_dense(&[vec![5.0]]),
            vec![10.0],
            vec![3.0],
            vec![0.0],
            vec![f64::INFINITY],
        );
        let report = solve_general(&lp, &SolverConfig::default());
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.total_admm_steps, 0);
        assert_eq!(report.objective.unwrap(), 6.0);
        let sol = report.solution.unwrap();
        assert_eq!(sol.x, vec![2.0]);
        // dual recovery: y = c / a for the pinning row, reduced cost zero
        assert_eq!(sol.y, vec![0.6]);
        assert_eq!(sol.s, vec![0.0]);
        let res = report.residuals.unwrap();
        assert_eq!(res.pres, 0.0);
        assert_eq!(res.dres, 0.0);
        assert_eq!(res.gap, 0.0);
    }

    #[test]
    fn contradictory_bounds_stop_before_the_solver() {
        let lp = GeneralLp::new(
            Csc::from_dense(&[vec![1.0]]),
            vec![1.0],
            vec![1.0],
            vec![2.0],
            vec![1.0], // lower > upper
        );
        let report = solve_general(&lp, &SolverConfig::default());
        assert_eq!(report.status, SolveStatus::PrimalInfeasible);
        assert!(report.certificate.is_none());
        assert!(report.solution.is_none());
        assert_eq!(report.total_admm_steps, 0);
    }

    #[test]
    fn negative_cost_free_direction_is_unbounded() {
        // no rows restrain the negative-cost column
        let lp = GeneralLp::new(
            Csc::from_triplets(0, 2, &[]),
            vec![],
            vec![1.0, -1.0],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        );
        let report = solve_general(&lp, &SolverConfig::default());
        assert_eq!(report.status, SolveStatus::DualInfeasible);

        // the solver-free fold path reaches the same verdict
        let mut cfg = SolverConfig::default();
        cfg.presolve_enabled = false;
        let report = solve_general(&lp, &cfg);
        assert_eq!(report.status, SolveStatus::DualInfeasible);
        match report.certificate {
            Some(Certificate::DualRay(ray)) => assert_eq!(ray, vec![0.0, 1.0]),
            other => panic!("expected a dual ray, got {other:?}"),
        }
    }

    #[test]
    fn unconstrained_nonnegative_costs_sit_at_zero() {
        let lp = GeneralLp::new(
            Csc::from_triplets(0, 2, &[]),
            vec![],
            vec![2.0, 0.0],
            vec![1.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        );
        let mut cfg = SolverConfig::default();
        cfg.presolve_enabled = false;
        let report = solve_general(&lp, &cfg);
        assert_eq!(report.status, SolveStatus::Optimal);
        // shifted lower bound comes back out
        assert_eq!(report.solution.unwrap().x, vec![1.0, 0.0]);
        assert_eq!(report.objective.unwrap(), 2.0);
    }

    #[test]
    fn solver_detects_infeasible_rows_when_reduction_is_off() {
        // x = 1 and x = 2 cannot both hold; a second column keeps the
        // problem from being a pure singleton chain
        let lp = GeneralLp::new(
            Csc::from_dense(&[vec![1.0, 0.0], vec![1.0, 1e-3]]),
            vec![1.0, 2.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![f64::INFINITY, 1e-2],
        );
        let mut cfg = SolverConfig::default();
        cfg.presolve_enabled = false;
        let report = solve_general(&lp, &cfg);
        assert_eq!(report.status, SolveStatus::PrimalInfeasible);
        assert!(matches!(report.certificate, Some(Certificate::PrimalRay(_))));
    }

    #[test]
    fn pipeline_solution_satisfies_the_original_equations() {
        let lp = fixture("sc50b.mps");
        let report = solve_general(&lp, &SolverConfig::default());
        assert_eq!(report.status, SolveStatus::Optimal);
        let sol = report.solution.unwrap();
        let res = general_residuals(&lp, &sol);
        let bn = 1.0 + norm2(&lp.b);
        let cn = 1.0 + norm2(&lp.c);
        assert!(res.pres <= 2e-3 * bn, "pres {}", res.pres);
        assert!(res.dres <= 2e-3 * cn, "dres {}", res.dres);
        // bounds hold up to tolerance
        for (j, &xj) in sol.x.iter().enumerate() {
            assert!(xj >= lp.lower[j] - 1e-6 && xj <= lp.upper[j] + 1e-6);
        }
    }
}
