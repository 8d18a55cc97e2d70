//! Synthetic standard-form LPs with a planted primal-dual optimal pair.
//!
//! Construction: draw a dense Gaussian constraint matrix, plant a sparse
//! nonnegative `x` (60% of entries zeroed, 10% scaled up tenfold, the
//! rest scaled down tenfold), give the dual slack `s` support exactly on
//! the zero set of `x`, draw a free Gaussian `y`, then set `b = Ax` and
//! `c = A'y + s`. The pair (x, y, s) satisfies all KKT conditions, so
//! `c'x = b'y` is the optimal value by strong duality.
//!
//! Gaussian draws for `x` and `s` take absolute values to respect the
//! nonnegativity the construction needs. All randomness flows from a
//! ChaCha8 stream cipher seeded with the caller's integer, so identical
//! `(m, n, seed)` produce bitwise-identical instances on any platform.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::IngestError;
use crate::lp_model::StandardLp;
use crate::sparse::Csc;

/// A generated instance bundled with its planted certificate of
/// optimality.
#[derive(Debug, Clone)]
pub struct RandomLpInstance {
    pub lp: StandardLp,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// `c'x = b'y`, the known optimal value
    pub objective: f64,
}

/// Generates a random standard-form LP with known optimal solution.
/// Requires `0 < m < n`; equal or flipped dimensions are rejected
/// because the construction plants a sparse feasible point that needs
/// more columns than rows.
pub fn generate_random_lp(m: usize, n: usize, seed: u64) -> Result<RandomLpInstance, IngestError> {
    if m == 0 {
        return Err(IngestError::Invalid("m must be positive".into()));
    }
    if m >= n {
        return Err(IngestError::Invalid(format!(
            "need m < n for the planted construction, got m={m}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // draw order is part of the reproducibility contract:
    // A (row-major), x, the index shuffle, s, then y
    let mut trips = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let v: f64 = rng.sample(StandardNormal);
            trips.push((i, j, v));
        }
    }
    let a = Csc::from_triplets(m, n, &trips);

    let mut x: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_zero = (0.6 * n as f64).round() as usize;
    let n_up = (0.1 * n as f64).round() as usize;
    for (k, &j) in order.iter().enumerate() {
        if k < n_zero {
            x[j] = 0.0;
        } else if k < n_zero + n_up {
            x[j] *= 10.0;
        } else {
            x[j] /= 10.0;
        }
    }

    let s: Vec<f64> = x
        .iter()
        .map(|&xj| {
            if xj == 0.0 {
                rng.sample::<f64, _>(StandardNormal).abs()
            } else {
                0.0
            }
        })
        .collect();
    let y: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();

    let mut b = vec![0.0; m];
    a.spmv_add(&x, &mut b, 1.0);
    let mut c = s.clone();
    a.spmv_t_add(&y, &mut c, 1.0);

    let objective = c.iter().zip(&x).map(|(cj, xj)| cj * xj).sum();
    Ok(RandomLpInstance { lp: StandardLp::new(a, b, c), x, y, s, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(generate_random_lp(4, 4, 0).is_err());
        assert!(generate_random_lp(5, 4, 0).is_err());
        assert!(generate_random_lp(0, 4, 0).is_err());
    }

    #[test]
    fn sixty_percent_of_entries_are_zeroed() {
        let inst = generate_random_lp(2, 4, 0).unwrap();
        let zeros = inst.x.iter().filter(|&&v| v == 0.0).count();
        assert_eq!(zeros, 2); // round(0.6 * 4)
        for (seed, n) in [(1u64, 10usize), (2, 25), (3, 40)] {
            let inst = generate_random_lp(n / 2, n, seed).unwrap();
            let zeros = inst.x.iter().filter(|&&v| v == 0.0).count();
            assert_eq!(zeros, (0.6 * n as f64).round() as usize);
        }
    }

    #[test]
    fn planted_pair_satisfies_strong_duality() {
        for seed in 0..20 {
            let inst = generate_random_lp(8, 30, seed).unwrap();
            let primal = inst.objective;
            let dual: f64 = inst.lp.b.iter().zip(&inst.y).map(|(b, y)| b * y).sum();
            assert!(
                (primal - dual).abs() <= 1e-9 * (1.0 + primal.abs()),
                "seed {seed}: c'x = {primal}, b'y = {dual}"
            );
            // complementary slackness is exact by construction
            for j in 0..30 {
                assert!(inst.x[j] * inst.s[j] == 0.0);
                assert!(inst.x[j] >= 0.0 && inst.s[j] >= 0.0);
            }
        }
    }

    #[test]
    fn planted_point_is_feasible() {
        let inst = generate_random_lp(6, 20, 11).unwrap();
        // primal: Ax = b holds to round-off
        let mut r = inst.lp.b.clone();
        inst.lp.a.spmv_add(&inst.x, &mut r, -1.0);
        let pres = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(pres <= 1e-12 * (1.0 + inst.lp.b.iter().map(|v| v * v).sum::<f64>().sqrt()));
        // dual: c - A'y - s = 0 exactly as constructed
        let mut d = inst.lp.c.clone();
        inst.lp.a.spmv_t_add(&inst.y, &mut d, -1.0);
        for (dj, sj) in d.iter().zip(&inst.s) {
            assert!((dj - sj).abs() <= 1e-12 * (1.0 + sj.abs()));
        }
    }

    #[test]
    fn identical_seeds_are_bitwise_identical() {
        let a = generate_random_lp(5, 18, 42).unwrap();
        let b = generate_random_lp(5, 18, 42).unwrap();
        assert_eq!(a.lp.b, b.lp.b);
        assert_eq!(a.lp.c, b.lp.c);
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        let c = generate_random_lp(5, 18, 43).unwrap();
        assert_ne!(a.lp.b, c.lp.b);
    }
}
