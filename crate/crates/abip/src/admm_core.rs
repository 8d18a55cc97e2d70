//! The operator-splitting iteration on the embedded problem.
//!
//! Each step projects `u + v` onto the affine manifold `v = Q u`, applies
//! over-relaxation, then resolves the barrier subproblem in closed form:
//! every `(x_j, s_j)` pair (and `(tau, kappa)`) is the unique positive
//! root pair of `w - w' = a`, `w w' = mu / beta`. The multiplier-style
//! updates for `(y, r)` and `(theta, xi)` keep `r` at exactly zero and
//! `xi` pinned near `-(n + 1)`.
//!
//! The inner loop runs until `||Q u - v||^2 <= mu^3`, a step cap, a
//! divergence signal, or a caller-supplied probe (used for cheap periodic
//! termination checks) asks to stop.

use crate::hsd_embed::HsdEmbedding;
use crate::linalg::LinalgError;

/// Positive solution pair of `w - w' = a`, `w * w' = c` with `c > 0`.
///
/// Both roots are evaluated cancellation-free, so the product round-trips
/// to `c` within a couple of ulps even for `|a|` many orders of magnitude
/// away from `sqrt(c)`.
pub fn prox_pair(a: f64, c: f64) -> (f64, f64) {
    debug_assert!(c > 0.0, "barrier weight must be positive, got {c}");
    let d = (a * a + 4.0 * c).sqrt();
    if a >= 0.0 {
        let w = (a + d) / 2.0;
        (w, c / w)
    } else {
        let wm = (d - a) / 2.0;
        (c / wm, wm)
    }
}

/// The positive root `w` alone: the proximal map of `-c * ln(w)` in
/// disguise.
pub fn barrier_prox(a: f64, c: f64) -> f64 {
    prox_pair(a, c).0
}

/// A paired iterate `(u, v)` laid out as `u = (y, x, tau, theta)`,
/// `v = (r, s, kappa, xi)`.
#[derive(Clone, Debug)]
pub struct HsdPoint {
    m: usize,
    n: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl HsdPoint {
    /// The canonical interior start: `y = 0, x = e, tau = theta = 1`,
    /// `r = 0, s = e, kappa = 1, xi = -(n + 1)`. It satisfies `Q u = v`
    /// for any problem data, so the first inner loop converges in zero
    /// steps.
    pub fn start(m: usize, n: usize) -> Self {
        let dim = m + n + 2;
        let mut u = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        for j in 0..n {
            u[m + j] = 1.0;
            v[m + j] = 1.0;
        }
        u[m + n] = 1.0;
        u[m + n + 1] = 1.0;
        v[m + n] = 1.0;
        v[m + n + 1] = -(n as f64) - 1.0;
        HsdPoint { m, n, u, v }
    }

    pub fn dim(&self) -> usize {
        self.m + self.n + 2
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn y(&self) -> &[f64] {
        &self.u[..self.m]
    }

    pub fn x(&self) -> &[f64] {
        &self.u[self.m..self.m + self.n]
    }

    pub fn tau(&self) -> f64 {
        self.u[self.m + self.n]
    }

    pub fn theta(&self) -> f64 {
        self.u[self.m + self.n + 1]
    }

    pub fn r(&self) -> &[f64] {
        &self.v[..self.m]
    }

    pub fn s(&self) -> &[f64] {
        &self.v[self.m..self.m + self.n]
    }

    pub fn kappa(&self) -> f64 {
        self.v[self.m + self.n]
    }

    pub fn xi(&self) -> f64 {
        self.v[self.m + self.n + 1]
    }
}

/// Mutable solver state threaded through the inner loop.
#[derive(Clone, Debug)]
pub struct IterateState {
    pub point: HsdPoint,
    /// current path parameter
    pub mu: f64,
    /// splitting penalty; the barrier subproblems use `mu / beta`
    pub beta: f64,
    /// over-relaxation weight applied to the projected point
    pub alpha: f64,
    /// cumulative inner steps across all path points
    pub total_steps: u64,
}

/// Performs one splitting step in place and returns the projected point
/// `u~` (the spectral stepsize logic needs it; other callers drop it).
pub fn inner_step(
    st: &mut IterateState,
    emb: &HsdEmbedding,
) -> Result<Vec<f64>, LinalgError> {
    let (m, n) = (emb.m(), emb.n());
    let dim = emb.dim();
    let u = &st.point.u;
    let v = &st.point.v;

    let mut z = vec![0.0; dim];
    for i in 0..dim {
        z[i] = u[i] + v[i];
    }
    let ut = emb.project_affine(&z)?;

    // over-relaxed projection
    let alpha = st.alpha;
    let mut uh = z; // reuse the buffer
    for i in 0..dim {
        uh[i] = alpha * ut[i] + (1.0 - alpha) * u[i];
    }

    let c = st.mu / st.beta;
    let u = &mut st.point.u;
    let v = &mut st.point.v;
    for i in 0..m {
        let y_new = uh[i];
        v[i] = (v[i] - uh[i]) + y_new;
        u[i] = y_new;
    }
    for j in m..m + n {
        let (x_new, s_new) = prox_pair(uh[j] - v[j], c);
        u[j] = x_new;
        v[j] = s_new;
    }
    let t = m + n;
    let (tau_new, kappa_new) = prox_pair(uh[t] - v[t], c);
    u[t] = tau_new;
    v[t] = kappa_new;
    let th_new = uh[t + 1];
    v[t + 1] = (v[t + 1] - uh[t + 1]) + th_new;
    u[t + 1] = th_new;

    st.total_steps += 1;
    Ok(ut)
}

/// Squared distance of the iterate from the affine manifold.
pub fn inner_residual_sq(st: &IterateState, emb: &HsdEmbedding) -> f64 {
    let qu = emb.apply_q(&st.point.u);
    qu.iter()
        .zip(&st.point.v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// The inner stopping rule: `||Q u - v||^2 <= mu^3`.
pub fn inner_converged(st: &IterateState, emb: &HsdEmbedding) -> bool {
    inner_residual_sq(st, emb) <= st.mu.powi(3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerExit {
    /// manifold residual dropped below the path tolerance
    Converged,
    /// a periodic probe asked to stop (termination criteria already met)
    ProbeStop,
    /// the step budget for this path point ran out
    StepCap,
    /// non-finite values appeared in the iterate
    Diverged,
}

/// Runs inner steps until convergence, a probe stop, the step cap, or
/// divergence. The probe runs every `probe_every` steps; `on_iterate`
/// observes the state after every step. Returns the exit reason and the
/// number of steps taken in this call.
pub fn run_inner_loop(
    st: &mut IterateState,
    emb: &HsdEmbedding,
    max_steps: u64,
    probe_every: u64,
    mut probe: impl FnMut(&IterateState) -> bool,
    mut on_iterate: impl FnMut(&IterateState),
) -> Result<(InnerExit, u64), LinalgError> {
    let tol = st.mu.powi(3);
    let mut steps = 0u64;
    loop {
        let res_sq = inner_residual_sq(st, emb);
        if !res_sq.is_finite() {
            return Ok((InnerExit::Diverged, steps));
        }
        if res_sq <= tol {
            return Ok((InnerExit::Converged, steps));
        }
        if steps >= max_steps {
            return Ok((InnerExit::StepCap, steps));
        }
        inner_step(st, emb)?;
        steps += 1;
        on_iterate(st);
        if probe_every > 0 && steps % probe_every == 0 && probe(st) {
            return Ok((InnerExit::ProbeStop, steps));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsd_embed::{build_embedding, LinSys};
    use crate::lp_model::StandardLp;
    use crate::sparse::Csc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prox_pins() {
        assert_eq!(barrier_prox(0.0, 1.0), 1.0);
        let w = barrier_prox(3.0, 1.0);
        assert!((w - (3.0 + 13.0f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn prox_product_is_stable_across_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let a = if rng.random_bool(0.5) { -1.0 } else { 1.0 }
                * 10f64.powf(rng.random_range(-8.0..8.0));
            let c = 10f64.powf(rng.random_range(-10.0..4.0));
            let (w, wm) = prox_pair(a, c);
            assert!(w > 0.0 && wm > 0.0);
            assert!(
                (w * wm - c).abs() <= 4.0 * f64::EPSILON * c,
                "product drift: a={a:e} c={c:e} w*wm={:e}",
                w * wm
            );
            assert!(
                (w - wm - a).abs() <= 1e-14 * (a.abs() + w + wm),
                "difference drift: a={a:e} c={c:e}"
            );
        }
    }

    fn small_lp(rng: &mut ChaCha8Rng, m: usize, n: usize) -> StandardLp {
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            rows.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        }
        let a = Csc::from_dense(&rows);
        // feasible by construction: b = A x0 for a positive x0
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let b = a.matvec(&x0);
        let c = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        StandardLp::new(a, b, c)
    }

    #[test]
    fn start_point_converges_in_zero_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lp = small_lp(&mut rng, 3, 6);
        let emb = build_embedding(&lp, LinSys::Direct).unwrap();
        let mut st = IterateState {
            point: HsdPoint::start(emb.m(), emb.n()),
            mu: 1.0,
            beta: 1.0,
            alpha: 1.8,
            total_steps: 0,
        };
        let (exit, steps) =
            run_inner_loop(&mut st, &emb, 1000, 50, |_| false, |_| {}).unwrap();
        assert_eq!(exit, InnerExit::Converged);
        assert_eq!(steps, 0);
    }

    #[test]
    fn steps_keep_the_pair_on_the_barrier() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lp = small_lp(&mut rng, 4, 8);
        let emb = build_embedding(&lp, LinSys::Direct).unwrap();
        let mut st = IterateState {
            point: HsdPoint::start(emb.m(), emb.n()),
            mu: 0.3,
            beta: 1.4,
            alpha: 1.8,
            total_steps: 0,
        };
        let c = st.mu / st.beta;
        for _ in 0..100 {
            inner_step(&mut st, &emb).unwrap();
            let p = &st.point;
            for (xj, sj) in p.x().iter().zip(p.s()) {
                assert!(*xj > 0.0 && *sj > 0.0);
                assert!((xj * sj - c).abs() <= 1e-12 * c.max(1.0));
            }
            assert!((p.tau() * p.kappa() - c).abs() <= 1e-12 * c.max(1.0));
            assert!(p.r().iter().all(|&ri| ri == 0.0), "r must stay exactly zero");
            let xi_ref = -(emb.n() as f64) - 1.0;
            assert!((p.xi() - xi_ref).abs() <= 1e-9 * xi_ref.abs());
        }
    }

    /// A start-like state nudged off the affine manifold so the loop has
    /// actual work to do (the canonical start satisfies `Q u = v` for
    /// every `mu`).
    fn perturbed_state(rng: &mut ChaCha8Rng, emb: &crate::hsd_embed::HsdEmbedding, mu: f64) -> IterateState {
        let mut point = HsdPoint::start(emb.m(), emb.n());
        let (m, n) = (emb.m(), emb.n());
        for j in 0..n {
            point.u[m + j] = rng.random_range(0.5..2.0);
            point.v[m + j] = rng.random_range(0.5..2.0);
        }
        point.u[m + n] = 1.2;
        point.v[m + n] = 0.8;
        IterateState { point, mu, beta: 1.0, alpha: 1.8, total_steps: 0 }
    }

    #[test]
    fn inner_loop_reaches_tight_tolerances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let lp = small_lp(&mut rng, 3, 7);
        let emb = build_embedding(&lp, LinSys::Direct).unwrap();
        for &alpha in &[1.0, 1.8] {
            let mut st = perturbed_state(&mut rng, &emb, 0.05);
            st.alpha = alpha;
            let (exit, steps) =
                run_inner_loop(&mut st, &emb, 200_000, 0, |_| false, |_| {}).unwrap();
            assert_eq!(exit, InnerExit::Converged, "alpha = {alpha}");
            assert!(steps > 0);
            assert!(inner_residual_sq(&st, &emb) <= st.mu.powi(3));
        }
    }

    #[test]
    fn probe_and_cap_exits() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let lp = small_lp(&mut rng, 3, 7);
        let emb = build_embedding(&lp, LinSys::Direct).unwrap();
        let mut fresh_rng = rng.clone();
        let mut fresh = |mu: f64| perturbed_state(&mut fresh_rng, &emb, mu);
        let mut st = fresh(1e-6);
        let (exit, steps) = run_inner_loop(&mut st, &emb, 7, 0, |_| false, |_| {}).unwrap();
        assert_eq!(exit, InnerExit::StepCap);
        assert_eq!(steps, 7);

        let mut st = fresh(1e-6);
        let (exit, steps) =
            run_inner_loop(&mut st, &emb, 1000, 5, |_| true, |_| {}).unwrap();
        assert_eq!(exit, InnerExit::ProbeStop);
        assert_eq!(steps, 5);

        let mut count = 0u64;
        let mut st = fresh(1e-6);
        let (_, steps) =
            run_inner_loop(&mut st, &emb, 12, 0, |_| false, |_| count += 1).unwrap();
        assert_eq!(count, steps);
    }
}
