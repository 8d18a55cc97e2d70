//! The outer interior-point loop: barrier schedule with warm restarts,
//! spectral penalty adaptation, periodic termination probes, and
//! extraction of solutions or infeasibility certificates.

use std::time::Instant;

use crate::admm_core::{
    inner_converged, inner_step, run_inner_loop, HsdPoint, InnerExit, IterateState,
};
use crate::hsd_embed::{build_embedding, HsdEmbedding, LinSys};
use crate::linalg::LinalgError;
use crate::lp_model::{CandidateSolution, Residuals, StandardLp};
use crate::sparse::{dot, norm2};

/// Termination criteria are evaluated at every inner-loop exit and every
/// this many inner steps (the probe costs two extra mat-vecs).
const PROBE_EVERY: u64 = 50;
/// The optimality branch requires `tau >= TAU_GUARD * (1 + kappa)`;
/// below that only the infeasibility certificates are probed.
const TAU_GUARD: f64 = 1e-10;

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// primal feasibility tolerance
    pub eps_pres: f64,
    /// dual feasibility tolerance
    pub eps_dres: f64,
    /// duality gap tolerance
    pub eps_dgap: f64,
    /// primal infeasibility certificate tolerance
    pub eps_pinfeas: f64,
    /// dual infeasibility certificate tolerance
    pub eps_dinfeas: f64,
    /// over-relaxation weight in (0, 2)
    pub alpha: f64,
    /// initial penalty and initial barrier weight
    pub beta0: f64,
    /// slowest barrier reduction ratio
    pub gamma_min: f64,
    /// fastest barrier reduction ratio
    pub gamma_max: f64,
    /// correlation threshold for accepting spectral curvature estimates
    pub eps_cor: f64,
    /// closeness threshold in the penalty acceptance rule
    pub eps_penalty: f64,
    /// global budget of splitting steps
    pub max_admm_steps: u64,
    /// cap on outer (path) iterations
    pub max_outer: u64,
    /// spectral penalty adaptation on/off
    pub bb_enabled: bool,
    /// cap on redo rounds inside one penalty selection
    pub bb_retry_cap: u32,
    /// run the reduction pipeline before solving (pipeline level)
    pub presolve_enabled: bool,
    /// equilibrate the problem data before solving (pipeline level)
    pub scaling_enabled: bool,
    /// refine an optimal point by a support-restricted direct solve
    /// before reporting it (pipeline level)
    pub polish_enabled: bool,
    /// how the projection's normal systems are solved
    pub linsys: LinSys,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_pres: 1e-3,
            eps_dres: 1e-3,
            eps_dgap: 1e-3,
            eps_pinfeas: 1e-3,
            eps_dinfeas: 1e-3,
            alpha: 1.8,
            beta0: 1.0,
            gamma_min: 0.1,
            gamma_max: 0.9,
            eps_cor: 0.2,
            eps_penalty: 0.1,
            max_admm_steps: 1_000_000,
            max_outer: 200,
            bb_enabled: true,
            bb_retry_cap: 3,
            presolve_enabled: true,
            scaling_enabled: true,
            polish_enabled: true,
            linsys: LinSys::Direct,
        }
    }
}

impl SolverConfig {
    /// Sets all five termination tolerances at once.
    pub fn set_tol(&mut self, tol: f64) {
        self.eps_pres = tol;
        self.eps_dres = tol;
        self.eps_dgap = tol;
        self.eps_pinfeas = tol;
        self.eps_dinfeas = tol;
    }

    pub fn with_tol(tol: f64) -> Self {
        let mut cfg = Self::default();
        cfg.set_tol(tol);
        cfg
    }

    pub fn validate(&self) -> Result<(), String> {
        let pos = [
            (self.eps_pres, "eps_pres"),
            (self.eps_dres, "eps_dres"),
            (self.eps_dgap, "eps_dgap"),
            (self.eps_pinfeas, "eps_pinfeas"),
            (self.eps_dinfeas, "eps_dinfeas"),
            (self.eps_cor, "eps_cor"),
            (self.eps_penalty, "eps_penalty"),
            (self.beta0, "beta0"),
        ];
        for (v, name) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(format!("alpha must lie in (0, 2), got {}", self.alpha));
        }
        if !(self.gamma_min > 0.0 && self.gamma_min <= self.gamma_max && self.gamma_max < 1.0) {
            return Err(format!(
                "need 0 < gamma_min <= gamma_max < 1, got {} and {}",
                self.gamma_min, self.gamma_max
            ));
        }
        if self.max_admm_steps == 0 || self.max_outer == 0 {
            return Err("step and iteration caps must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    /// step or iteration budget exhausted before any criterion fired
    Unfinished,
    /// non-finite iterates or a failed linear solve
    NumericalFailure,
}

/// Farkas-type ray returned for infeasible problems, stated for the
/// standard-form data the solver ran on.
#[derive(Clone, Debug)]
pub enum Certificate {
    /// `y` with `b'y = 1` and `A'y <~ 0`: no primal-feasible point exists
    PrimalRay(Vec<f64>),
    /// `x >= 0` with `c'x = -1` and `A x ~ 0`: the primal is unbounded
    DualRay(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// populated exactly for `Optimal`
    pub solution: Option<CandidateSolution>,
    /// populated exactly for the two infeasible statuses
    pub certificate: Option<Certificate>,
    /// unscaled residual norms of the returned candidate, when one exists
    pub residuals: Option<Residuals>,
    /// `c'x + offset` of the returned candidate
    pub objective: Option<f64>,
    pub outer_iterations: u64,
    pub total_admm_steps: u64,
    /// inner steps spent at each path point, in order
    pub inner_steps_per_outer: Vec<u64>,
    /// accepted penalty changes
    pub bb_updates: u64,
    pub mu_final: f64,
    pub solve_seconds: f64,
}

/// Scaling context for termination: the solver may run on
/// row/column-equilibrated data with `b` and `c` divided by scalars,
/// but convergence is always judged on residuals mapped back to the
/// original standard-form problem. The inverse maps are
/// `x = b_scale · col_scale ∘ x̃`, `y = c_scale · row_scale ∘ ỹ`,
/// `s = c_scale · s̃ / col_scale` (componentwise, before the `1/τ`).
#[derive(Clone, Debug)]
pub struct TerminationFrame {
    pub row_scale: Vec<f64>,
    pub col_scale: Vec<f64>,
    /// scalar the right-hand side was divided by
    pub b_scale: f64,
    /// scalar the cost was divided by
    pub c_scale: f64,
    /// norm of the unscaled right-hand side
    pub norm_b: f64,
    /// norm of the unscaled cost
    pub norm_c: f64,
}

impl TerminationFrame {
    /// Frame for solving unscaled data as-is.
    pub fn identity(lp: &StandardLp) -> Self {
        TerminationFrame {
            row_scale: vec![1.0; lp.nrows()],
            col_scale: vec![1.0; lp.ncols()],
            b_scale: 1.0,
            c_scale: 1.0,
            norm_b: norm2(&lp.b),
            norm_c: norm2(&lp.c),
        }
    }
}

pub enum Termination {
    Optimal {
        /// candidate in the unscaled standard-form space
        solution: CandidateSolution,
        residuals: Residuals,
    },
    PrimalInfeasible {
        y: Vec<f64>,
    },
    DualInfeasible {
        x: Vec<f64>,
    },
}

/// The fresh interior start for an embedding: `mu = beta = beta0`.
pub fn init_state(emb: &HsdEmbedding, cfg: &SolverConfig) -> IterateState {
    IterateState {
        point: HsdPoint::start(emb.m(), emb.n()),
        mu: cfg.beta0,
        beta: cfg.beta0,
        alpha: cfg.alpha,
        total_steps: 0,
    }
}

/// Moves to the next path point: `mu <- gamma * mu`, every coordinate of
/// `(y, x, tau, theta, s, kappa)` shrinks by `sqrt(gamma)` (preserving
/// the pair products exactly), and the multiplier-like components reset
/// to `r = 0`, `xi = -(n + 1)`.
pub fn warm_restart(st: &mut IterateState, gamma: f64) {
    assert!(
        gamma > 0.0 && gamma < 1.0,
        "restart ratio must lie in (0, 1), got {gamma}"
    );
    let sg = gamma.sqrt();
    let m = st.point.m();
    let n = st.point.n();
    for val in st.point.u.iter_mut() {
        *val *= sg;
    }
    for val in st.point.v[m..m + n + 1].iter_mut() {
        *val *= sg;
    }
    for val in st.point.v[..m].iter_mut() {
        *val = 0.0;
    }
    st.point.v[m + n + 1] = -(n as f64) - 1.0;
    st.mu *= gamma;
}

/// Normalized residuals `(primal, dual, gap)` of the tau-scaled
/// candidate, mapped to the unscaled problem. `None` when tau is too
/// small to form the candidate.
fn normalized_residuals(
    st: &IterateState,
    emb: &HsdEmbedding,
    frame: &TerminationFrame,
) -> Option<(f64, f64, f64)> {
    let point = &st.point;
    let tau = point.tau();
    if tau < TAU_GUARD * (1.0 + point.kappa()) {
        return None;
    }
    let (m, n) = (emb.m(), emb.n());
    let (sb, sc) = (frame.b_scale, frame.c_scale);

    // primal: (A x/tau - b) per unscaled row
    let mut pres = emb.a().matvec(point.x());
    for i in 0..m {
        pres[i] = sb * (pres[i] / tau - emb.b()[i]) / frame.row_scale[i];
    }
    // dual: (A'y/tau + s/tau - c) per unscaled column
    let mut dres = emb.at().matvec(point.y());
    for j in 0..n {
        dres[j] = sc * ((dres[j] + point.s()[j]) / tau - emb.c()[j]) / frame.col_scale[j];
    }
    // both objective values pick up the same sb*sc factor
    let cx = sb * sc * dot(emb.c(), point.x()) / tau;
    let by = sb * sc * dot(emb.b(), point.y()) / tau;

    let r_pres = norm2(&pres) / (1.0 + frame.norm_b);
    let r_dres = norm2(&dres) / (1.0 + frame.norm_c);
    let r_gap = (cx - by).abs() / (1.0 + cx.abs() + by.abs());
    Some((r_pres, r_dres, r_gap))
}

/// Evaluates the three stopping criteria in order: optimality, primal
/// infeasibility, dual infeasibility. Solutions and certificates come
/// back in the unscaled standard-form space.
pub fn check_termination(
    st: &IterateState,
    emb: &HsdEmbedding,
    frame: &TerminationFrame,
    cfg: &SolverConfig,
) -> Option<Termination> {
    let point = &st.point;
    let (m, n) = (emb.m(), emb.n());
    let (sb, sc) = (frame.b_scale, frame.c_scale);
    let tau = point.tau();

    if let Some((r_pres, r_dres, r_gap)) = normalized_residuals(st, emb, frame) {
        if r_pres <= cfg.eps_pres && r_dres <= cfg.eps_dres && r_gap <= cfg.eps_dgap {
            let x: Vec<f64> =
                (0..n).map(|j| sb * frame.col_scale[j] * point.x()[j] / tau).collect();
            let y: Vec<f64> =
                (0..m).map(|i| sc * frame.row_scale[i] * point.y()[i] / tau).collect();
            let s: Vec<f64> =
                (0..n).map(|j| sc * point.s()[j] / (tau * frame.col_scale[j])).collect();
            let residuals = Residuals {
                pres: r_pres * (1.0 + frame.norm_b),
                dres: r_dres * (1.0 + frame.norm_c),
                gap: sb * sc
                    * (dot(emb.c(), point.x()) / tau - dot(emb.b(), point.y()) / tau),
            };
            return Some(Termination::Optimal {
                solution: CandidateSolution { x, y, s },
                residuals,
            });
        }
    }

    // primal infeasibility: b'y > 0 with A'y + s vanishing in proportion
    // (the scalar sc cancels between the two sides; sb does not)
    let by = sb * dot(emb.b(), point.y());
    if frame.norm_b > 0.0 && by > 0.0 {
        let mut aty = emb.at().matvec(point.y());
        for j in 0..n {
            aty[j] = (aty[j] + point.s()[j]) / frame.col_scale[j];
        }
        if norm2(&aty) <= cfg.eps_pinfeas * by / frame.norm_b {
            // normalized so that (unscaled b)'y = 1
            let y: Vec<f64> =
                (0..m).map(|i| frame.row_scale[i] * point.y()[i] / by).collect();
            return Some(Termination::PrimalInfeasible { y });
        }
    }

    // dual infeasibility: c'x < 0 with A x vanishing in proportion
    let cx = sc * dot(emb.c(), point.x());
    if frame.norm_c > 0.0 && cx < 0.0 {
        let mut ax = emb.a().matvec(point.x());
        for i in 0..m {
            ax[i] /= frame.row_scale[i];
        }
        if norm2(&ax) <= cfg.eps_dinfeas * (-cx) / frame.norm_c {
            // normalized so that (unscaled c)'x = -1
            let x: Vec<f64> =
                (0..n).map(|j| frame.col_scale[j] * point.x()[j] / (-cx)).collect();
            return Some(Termination::DualInfeasible { x });
        }
    }
    None
}

/// Barrier reduction ratio from the current residual picture: log-linear
/// between `gamma_min` (far away) and `gamma_max` (at tolerance).
pub fn select_gamma(
    st: &IterateState,
    emb: &HsdEmbedding,
    frame: &TerminationFrame,
    cfg: &SolverConfig,
) -> f64 {
    let max_res = match normalized_residuals(st, emb, frame) {
        Some((a, b, c)) => a.max(b).max(c),
        None => return cfg.gamma_min,
    };
    let eps = cfg.eps_pres.min(cfg.eps_dres).min(cfg.eps_dgap);
    if max_res <= 0.0 {
        return cfg.gamma_max;
    }
    let t = 1.0 - (max_res / eps).ln() / (1.0 / eps).ln();
    cfg.gamma_min + (cfg.gamma_max - cfg.gamma_min) * t.clamp(0.0, 1.0)
}

/// The hybrid of the steepest-descent and minimum-gradient quotients.
fn hybrid_stepsize(sd: f64, mg: f64) -> f64 {
    if 2.0 * mg > sd {
        mg
    } else {
        sd - mg / 2.0
    }
}

/// One safeguarded curvature estimate from the two trial displacements.
/// Falls back to `beta` when neither correlation passes the threshold.
fn safeguarded_beta(
    dv_hat: &[f64],
    du_tilde: &[f64],
    du: &[f64],
    beta: f64,
    eps_cor: f64,
) -> f64 {
    let nv = norm2(dv_hat);
    let nt = norm2(du_tilde);
    let nu = norm2(du);
    let vt = dot(dv_hat, du_tilde);
    let vu = dot(dv_hat, du);
    let phi_cor = if nv > 0.0 && nt > 0.0 { vt / (nv * nt) } else { 0.0 };
    let psi_cor = if nv > 0.0 && nu > 0.0 { vu / (nv * nu) } else { 0.0 };

    let phi = || {
        let sd = dot(dv_hat, dv_hat) / vt;
        let mg = vt / dot(du_tilde, du_tilde);
        hybrid_stepsize(sd, mg)
    };
    let psi = || {
        let sd = dot(dv_hat, dv_hat) / vu;
        let mg = vu / dot(du, du);
        hybrid_stepsize(sd, mg)
    };
    let cand = match (phi_cor > eps_cor, psi_cor > eps_cor) {
        (true, true) => (phi() * psi()).sqrt(),
        (true, false) => phi(),
        (false, true) => psi(),
        (false, false) => beta,
    };
    if cand.is_finite() && cand > 0.0 {
        cand
    } else {
        beta
    }
}

/// Rescales the dual-side pair components so `x o s = mu / beta_new`
/// holds again after a penalty change.
fn rescale_pair(st: &mut IterateState, ratio: f64) {
    let m = st.point.m();
    let n = st.point.n();
    for val in st.point.v[m..m + n + 1].iter_mut() {
        *val *= ratio;
    }
}

/// Penalty selection at the start of an outer iteration: runs two trial
/// steps, estimates curvature along them, and either keeps the penalty,
/// averages toward the estimate, or adopts it and redoes the trial from
/// the same initial point (at most `bb_retry_cap` redo rounds).
///
/// Returns the number of trial steps consumed and whether the penalty
/// changed.
fn bb_select_beta(
    st: &mut IterateState,
    emb: &HsdEmbedding,
    cfg: &SolverConfig,
    on_iterate: &mut impl FnMut(&IterateState),
) -> Result<(u64, bool), LinalgError> {
    let beta_entry = st.beta;
    let init = st.point.clone();
    let alpha = st.alpha;
    let mut retries = 0u32;
    let mut steps = 0u64;

    loop {
        let u0 = st.point.u.clone();
        let v0 = st.point.v.clone();
        let ut1 = inner_step(st, emb)?;
        on_iterate(st);
        let u1 = st.point.u.clone();
        let v1 = st.point.v.clone();
        let ut2 = inner_step(st, emb)?;
        on_iterate(st);
        let u2 = &st.point.u;
        steps += 2;

        let dim = u0.len();
        let mut dv_hat = vec![0.0; dim];
        let mut du_tilde = vec![0.0; dim];
        let mut du = vec![0.0; dim];
        for i in 0..dim {
            let vh1 = v0[i] - alpha * ut1[i] - (1.0 - alpha) * u0[i] + alpha * u1[i];
            let vh2 = v1[i] - alpha * ut2[i] - (1.0 - alpha) * u1[i] + alpha * u2[i];
            dv_hat[i] = vh2 - vh1;
            du_tilde[i] = alpha * (ut2[i] - ut1[i]) + (1.0 - alpha) * (u1[i] - u0[i]);
            du[i] = -(u2[i] - u1[i]);
        }

        let beta_hat = safeguarded_beta(&dv_hat, &du_tilde, &du, st.beta, cfg.eps_cor);
        if beta_hat == st.beta {
            // estimate agrees (or was unreliable): continue from the
            // trial iterates with the penalty unchanged
            return Ok((steps, st.beta != beta_entry));
        }
        if (beta_hat - st.beta).abs() <= cfg.eps_penalty {
            // close enough: split the difference and keep going
            let beta_new = 0.5 * (st.beta + beta_hat);
            rescale_pair(st, st.beta / beta_new);
            st.beta = beta_new;
            return Ok((steps, true));
        }
        // far off: adopt the estimate and redo the trial from the same
        // initial point
        st.point = init.clone();
        rescale_pair(st, beta_entry / beta_hat);
        st.beta = beta_hat;
        retries += 1;
        if retries > cfg.bb_retry_cap {
            return Ok((steps, true));
        }
    }
}

/// Solves a standard-form LP with default framing (no scaling context).
pub fn solve(lp: &StandardLp, cfg: &SolverConfig) -> SolveReport {
    solve_with_observer(lp, cfg, &TerminationFrame::identity(lp), |_| {})
}

/// Full-control entry point: `frame` describes how to judge residuals in
/// unscaled terms, and `on_iterate` observes the state after every single
/// splitting step (including penalty-selection trials).
pub fn solve_with_observer(
    lp: &StandardLp,
    cfg: &SolverConfig,
    frame: &TerminationFrame,
    mut on_iterate: impl FnMut(&IterateState),
) -> SolveReport {
    assert!(cfg.validate().is_ok(), "invalid solver configuration: {:?}", cfg.validate());
    let start = Instant::now();
    let fail = |st: Option<&IterateState>, inner: Vec<u64>, outer: u64, bb: u64| SolveReport {
        status: SolveStatus::NumericalFailure,
        solution: None,
        certificate: None,
        residuals: None,
        objective: None,
        outer_iterations: outer,
        total_admm_steps: st.map_or(0, |s| s.total_steps),
        inner_steps_per_outer: inner,
        bb_updates: bb,
        mu_final: st.map_or(f64::NAN, |s| s.mu),
        solve_seconds: start.elapsed().as_secs_f64(),
    };

    let emb = match build_embedding(lp, cfg.linsys) {
        Ok(e) => e,
        Err(err) => {
            log::error!("embedding construction failed: {err}");
            return fail(None, Vec::new(), 0, 0);
        }
    };
    let mut st = init_state(&emb, cfg);
    let mut inner_counts = Vec::new();
    let mut bb_updates = 0u64;
    let mut outcome = None;
    let mut outer = 0u64;

    while outer < cfg.max_outer {
        outer += 1;
        let mut spent = 0u64;
        if !inner_converged(&st, &emb) {
            if cfg.bb_enabled && st.total_steps + 2 <= cfg.max_admm_steps {
                match bb_select_beta(&mut st, &emb, cfg, &mut on_iterate) {
                    Ok((steps, changed)) => {
                        spent += steps;
                        if changed {
                            bb_updates += 1;
                        }
                    }
                    Err(err) => {
                        log::error!("penalty selection failed: {err}");
                        return fail(Some(&st), inner_counts, outer, bb_updates);
                    }
                }
            }
            let budget = cfg.max_admm_steps.saturating_sub(st.total_steps);
            let probe =
                |s: &IterateState| check_termination(s, &emb, frame, cfg).is_some();
            match run_inner_loop(&mut st, &emb, budget, PROBE_EVERY, probe, &mut on_iterate)
            {
                Ok((exit, steps)) => {
                    spent += steps;
                    if exit == InnerExit::Diverged {
                        log::error!("iterates left the finite range");
                        inner_counts.push(spent);
                        return fail(Some(&st), inner_counts, outer, bb_updates);
                    }
                }
                Err(err) => {
                    log::error!("projection failed: {err}");
                    inner_counts.push(spent);
                    return fail(Some(&st), inner_counts, outer, bb_updates);
                }
            }
        }
        inner_counts.push(spent);

        outcome = check_termination(&st, &emb, frame, cfg);
        if outcome.is_some() || st.total_steps >= cfg.max_admm_steps {
            break;
        }
        let gamma = select_gamma(&st, &emb, frame, cfg);
        warm_restart(&mut st, gamma);
    }

    let solve_seconds = start.elapsed().as_secs_f64();
    let mut report = SolveReport {
        status: SolveStatus::Unfinished,
        solution: None,
        certificate: None,
        residuals: None,
        objective: None,
        outer_iterations: outer,
        total_admm_steps: st.total_steps,
        inner_steps_per_outer: inner_counts,
        bb_updates,
        mu_final: st.mu,
        solve_seconds,
    };
    match outcome {
        Some(Termination::Optimal { solution, residuals }) => {
            report.status = SolveStatus::Optimal;
            // the solution is frame-unscaled, so undo the frame on c too:
            // the unscaled cost is c_scale * c_solved[j] / col_scale[j],
            // giving the c'x of the problem the frame describes
            report.objective = Some(
                frame.c_scale
                    * lp.c
                        .iter()
                        .zip(&solution.x)
                        .zip(&frame.col_scale)
                        .map(|((c, x), d)| c * x / d)
                        .sum::<f64>()
                    + lp.offset,
            );
            report.residuals = Some(residuals);
            report.solution = Some(solution);
        }
        Some(Termination::PrimalInfeasible { y }) => {
            report.status = SolveStatus::PrimalInfeasible;
            report.certificate = Some(Certificate::PrimalRay(y));
        }
        Some(Termination::DualInfeasible { x }) => {
            report.status = SolveStatus::DualInfeasible;
            report.certificate = Some(Certificate::DualRay(x));
        }
        None => {}
    }
    report
}
