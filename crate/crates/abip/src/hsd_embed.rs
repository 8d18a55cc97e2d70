//! Homogeneous self-dual embedding of a standard-form LP and the
//! projection onto its affine constraint set.
//!
//! The embedding works with points `u = (y, x, tau, theta)` and
//! `v = (r, s, kappa, xi)` of dimension `m + n + 2`, coupled through a
//! skew-symmetric operator `Q` so that `Q u = v` holds on the constraint
//! manifold. Feasible and infeasible problem data alike admit the trivial
//! interior starting point `y = 0, x = e, tau = 1, theta = 1`, which is
//! what the two correction vectors `b_bar`, `c_bar` and the scalar
//! `z_bar` are tuned for.
//!
//! The projection step solves `(I + Q) u~ = z` once per splitting
//! iteration. `Q` has an arrow structure over the `(tau, theta)` pair, so
//! the solve reduces to one system with the fixed matrix
//! `M = [[I, A], [-A', I]]` plus a 2x2 correction whose vectors are
//! precomputed at build time. The `M` solve itself eliminates one block
//! through the normal matrix `I + A A'` (or `I + A'A` when the problem
//! has more rows than columns), factored once.

use crate::linalg::{cg_solve, rcm_order, LdlFactor, LinalgError};
use crate::lp_model::StandardLp;
use crate::sparse::{dot, Csc};

/// How the normal-matrix solves inside the projection are performed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinSys {
    /// Sparse LDL' factorization, computed once (default).
    Direct,
    /// Jacobi-preconditioned conjugate gradients per solve.
    Cg,
}

enum NormalSolver {
    Ldl(LdlFactor),
    Cg { k: Csc, max_iter: usize },
}

pub struct HsdEmbedding {
    m: usize,
    n: usize,
    a: Csc,
    at: Csc,
    b: Vec<f64>,
    c: Vec<f64>,
    b_bar: Vec<f64>,
    c_bar: Vec<f64>,
    z_bar: f64,
    /// tau column of the (y, x) block rows: (-b; c)
    g: Vec<f64>,
    /// theta column of the (y, x) block rows: (b_bar; -c_bar)
    h: Vec<f64>,
    /// M^-1 g
    p: Vec<f64>,
    /// M^-1 h
    q: Vec<f64>,
    gp: f64,
    gq: f64,
    hp: f64,
    hq: f64,
    /// true when the m x m normal matrix was the smaller choice
    wide: bool,
    solver: NormalSolver,
}

impl HsdEmbedding {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Length of the `u` and `v` vectors.
    pub fn dim(&self) -> usize {
        self.m + self.n + 2
    }

    pub fn a(&self) -> &Csc {
        &self.a
    }

    pub fn at(&self) -> &Csc {
        &self.at
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn b_bar(&self) -> &[f64] {
        &self.b_bar
    }

    pub fn c_bar(&self) -> &[f64] {
        &self.c_bar
    }

    pub fn z_bar(&self) -> f64 {
        self.z_bar
    }

    /// Applies the skew-symmetric coupling operator to a full-length
    /// vector laid out as `(y, x, tau, theta)`.
    pub fn apply_q(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.dim());
        let (m, n) = (self.m, self.n);
        let wy = &w[..m];
        let wx = &w[m..m + n];
        let wt = w[m + n];
        let wth = w[m + n + 1];
        let mut out = vec![0.0; self.dim()];

        // y rows: A x - b tau + b_bar theta
        self.a.spmv_add(wx, &mut out[..m], 1.0);
        for i in 0..m {
            out[i] += -self.b[i] * wt + self.b_bar[i] * wth;
        }
        // x rows: -A'y + c tau - c_bar theta
        {
            let (_, tail) = out.split_at_mut(m);
            let ox = &mut tail[..n];
            self.at.spmv_add(wy, ox, 1.0);
            for j in 0..n {
                ox[j] = -ox[j] + self.c[j] * wt - self.c_bar[j] * wth;
            }
        }
        // tau row: b'y - c'x + z_bar theta
        out[m + n] = dot(&self.b, wy) - dot(&self.c, wx) + self.z_bar * wth;
        // theta row: -b_bar'y + c_bar'x - z_bar tau
        out[m + n + 1] = -dot(&self.b_bar, wy) + dot(&self.c_bar, wx) - self.z_bar * wt;
        out
    }

    fn normal_solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        match &self.solver {
            NormalSolver::Ldl(f) => Ok(f.solve(rhs)),
            NormalSolver::Cg { k, max_iter } => cg_solve(k, rhs, 1e-12, *max_iter),
        }
    }

    /// Solves `M w = d` with `M = [[I, A], [-A', I]]`, `d` laid out as
    /// `(d_y, d_x)` of length `m + n`.
    fn m_solve(&self, d: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let (m, n) = (self.m, self.n);
        let d1 = &d[..m];
        let d2 = &d[m..];
        let mut w = vec![0.0; m + n];
        if self.wide {
            // (I + AA') w1 = d1 - A d2; w2 = d2 + A' w1
            let mut rhs = self.a.matvec(d2);
            for (r, v) in rhs.iter_mut().zip(d1) {
                *r = v - *r;
            }
            let w1 = self.normal_solve(&rhs)?;
            let mut w2 = self.at.matvec(&w1);
            for (w, v) in w2.iter_mut().zip(d2) {
                *w += v;
            }
            w[..m].copy_from_slice(&w1);
            w[m..].copy_from_slice(&w2);
        } else {
            // (I + A'A) w2 = d2 + A' d1; w1 = d1 - A w2
            let mut rhs = self.at.matvec(d1);
            for (r, v) in rhs.iter_mut().zip(d2) {
                *r += v;
            }
            let w2 = self.normal_solve(&rhs)?;
            let mut w1 = self.a.matvec(&w2);
            for (w, v) in w1.iter_mut().zip(d1) {
                *w = v - *w;
            }
            w[..m].copy_from_slice(&w1);
            w[m..].copy_from_slice(&w2);
        }
        Ok(w)
    }

    /// Solves `(I + Q) u~ = z`, returning `u~`. The complement
    /// `v~ = z - u~` is left to the caller.
    pub fn project_affine(&self, z: &[f64]) -> Result<Vec<f64>, LinalgError> {
        assert_eq!(z.len(), self.dim());
        let mn = self.m + self.n;
        let z_tau = z[mn];
        let z_theta = z[mn + 1];

        let w0 = self.m_solve(&z[..mn])?;
        let gw0 = dot(&self.g, &w0);
        let hw0 = dot(&self.h, &w0);

        // eliminate the (y, x) block: a 2x2 system remains for (tau, theta)
        let a11 = 1.0 + self.gp;
        let a12 = self.gq + self.z_bar;
        let a21 = self.hp - self.z_bar;
        let a22 = 1.0 + self.hq;
        let r1 = z_tau + gw0;
        let r2 = z_theta + hw0;
        let det = a11 * a22 - a12 * a21;
        if !det.is_finite() || det.abs() < f64::MIN_POSITIVE {
            return Err(LinalgError::SingularReduction);
        }
        let tau = (r1 * a22 - r2 * a12) / det;
        let theta = (a11 * r2 - a21 * r1) / det;

        let mut u = vec![0.0; self.dim()];
        for i in 0..mn {
            u[i] = w0[i] - tau * self.p[i] - theta * self.q[i];
        }
        u[mn] = tau;
        u[mn + 1] = theta;
        Ok(u)
    }
}

/// Builds the embedding for a standard-form problem and factors its
/// normal matrix.
pub fn build_embedding(lp: &StandardLp, linsys: LinSys) -> Result<HsdEmbedding, LinalgError> {
    let m = lp.nrows();
    let n = lp.ncols();
    let a = lp.a.clone();
    let at = a.transpose();

    let ones = vec![1.0; n];
    let ae = a.matvec(&ones);
    let b_bar: Vec<f64> = lp.b.iter().zip(&ae).map(|(bi, s)| bi - s).collect();
    let c_bar: Vec<f64> = lp.c.iter().map(|ci| ci - 1.0).collect();
    let z_bar = lp.c.iter().sum::<f64>() + 1.0;

    let mut g = vec![0.0; m + n];
    let mut h = vec![0.0; m + n];
    for i in 0..m {
        g[i] = -lp.b[i];
        h[i] = b_bar[i];
    }
    for j in 0..n {
        g[m + j] = lp.c[j];
        h[m + j] = -c_bar[j];
    }

    let wide = m <= n;
    let k = if wide { a.aat() } else { a.ata() }.add_diagonal(1.0);
    let solver = match linsys {
        LinSys::Direct => NormalSolver::Ldl(LdlFactor::new(&k, Some(rcm_order(&k)))?),
        LinSys::Cg => {
            let max_iter = 4 * k.nrows() + 100;
            NormalSolver::Cg { k, max_iter }
        }
    };

    let mut emb = HsdEmbedding {
        m,
        n,
        a,
        at,
        b: lp.b.clone(),
        c: lp.c.clone(),
        b_bar,
        c_bar,
        z_bar,
        g,
        h,
        p: Vec::new(),
        q: Vec::new(),
        gp: 0.0,
        gq: 0.0,
        hp: 0.0,
        hq: 0.0,
        wide,
        solver,
    };
    emb.p = emb.m_solve(&emb.g)?;
    emb.q = emb.m_solve(&emb.h)?;
    emb.gp = dot(&emb.g, &emb.p);
    emb.gq = dot(&emb.g, &emb.q);
    emb.hp = dot(&emb.h, &emb.p);
    emb.hq = dot(&emb.h, &emb.q);
    Ok(emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_solve;
    use crate::sparse::norm2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_1x1() -> StandardLp {
        StandardLp::new(Csc::from_dense(&[vec![1.0]]), vec![1.0], vec![1.0])
    }

    fn random_lp(rng: &mut ChaCha8Rng, m: usize, n: usize) -> StandardLp {
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            rows.push((0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>());
        }
        let b = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        StandardLp::new(Csc::from_dense(&rows), b, c)
    }

    fn dense_q(emb: &HsdEmbedding) -> Vec<Vec<f64>> {
        let d = emb.dim();
        let mut cols = Vec::with_capacity(d);
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            cols.push(emb.apply_q(&e));
        }
        // transpose column images into a row-major table
        (0..d).map(|i| (0..d).map(|j| cols[j][i]).collect()).collect()
    }

    #[test]
    fn one_by_one_pins() {
        let emb = build_embedding(&toy_1x1(), LinSys::Direct).unwrap();
        assert_eq!(emb.b_bar(), &[0.0]);
        assert_eq!(emb.c_bar(), &[0.0]);
        assert_eq!(emb.z_bar(), 2.0);
        let out = emb.apply_q(&[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(out, vec![0.0, 1.0, -1.0, -2.0]);
    }

    #[test]
    fn coupling_operator_is_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let lp = random_lp(&mut rng, 3, 5);
        let emb = build_embedding(&lp, LinSys::Direct).unwrap();
        let q = dense_q(&emb);
        let d = emb.dim();
        for i in 0..d {
            assert_eq!(q[i][i], 0.0);
            for j in 0..d {
                assert!(
                    (q[i][j] + q[j][i]).abs() < 1e-14,
                    "skew symmetry fails at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn starting_point_lies_on_manifold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lp = random_lp(&mut rng, 4, 7);
        let emb = build_embedding(&lp, LinSys::Direct).unwrap();
        let (m, n) = (emb.m(), emb.n());
        let mut u = vec![0.0; emb.dim()];
        for j in 0..n {
            u[m + j] = 1.0;
        }
        u[m + n] = 1.0;
        u[m + n + 1] = 1.0;
        let mut v = vec![0.0; emb.dim()];
        for j in 0..n {
            v[m + j] = 1.0;
        }
        v[m + n] = 1.0;
        v[m + n + 1] = -(n as f64) - 1.0;
        let qu = emb.apply_q(&u);
        let diff: Vec<f64> = qu.iter().zip(&v).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) < 1e-12, "residual {}", norm2(&diff));
    }

    #[test]
    fn projection_inverts_shifted_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..20 {
            let m = rng.random_range(1..6);
            let n = rng.random_range(m..m + 6);
            let lp = random_lp(&mut rng, m, n);
            let emb = build_embedding(&lp, LinSys::Direct).unwrap();
            let d = emb.dim();
            let z: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let u = emb.project_affine(&z).unwrap();
            let qu = emb.apply_q(&u);
            let mut res = 0.0f64;
            for i in 0..d {
                res = res.max((u[i] + qu[i] - z[i]).abs());
            }
            assert!(res < 1e-10, "trial {trial}: residual {res}");

            // cross-check against a dense solve of the same system
            let mut iq = dense_q(&emb);
            for (i, row) in iq.iter_mut().enumerate() {
                row[i] += 1.0;
            }
            let dense = dense_solve(&iq, &z).expect("I + Q is nonsingular");
            for i in 0..d {
                assert!((dense[i] - u[i]).abs() < 1e-8, "trial {trial} entry {i}");
            }
        }
    }

    #[test]
    fn tall_problems_use_the_other_normal_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let lp = random_lp(&mut rng, 6, 3);
        let emb = build_embedding(&lp, LinSys::Direct).unwrap();
        assert!(!emb.wide);
        let d = emb.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = emb.project_affine(&z).unwrap();
        let qu = emb.apply_q(&u);
        for i in 0..d {
            assert!((u[i] + qu[i] - z[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_and_direct_projections_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let lp = random_lp(&mut rng, 5, 9);
        let direct = build_embedding(&lp, LinSys::Direct).unwrap();
        let iterative = build_embedding(&lp, LinSys::Cg).unwrap();
        let d = direct.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ud = direct.project_affine(&z).unwrap();
        let uc = iterative.project_affine(&z).unwrap();
        for i in 0..d {
            assert!((ud[i] - uc[i]).abs() < 1e-7, "entry {i}: {} vs {}", ud[i], uc[i]);
        }
    }
}
