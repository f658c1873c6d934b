mod oracle;

use approx::assert_relative_eq;
use kbh_core::em::{
    coefficient_system, mstep_beta, mstep_coefficients, mstep_noise_variance, q_function,
};
use kbh_core::kernel::uniform_beta_grid;
use kbh_core::{apply_nonlinearity, posterior_moments, HyperParameters, PosteriorMoments};
use nalgebra::{DMatrix, DVector};
use oracle::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn posterior_matches_joint_gaussian() {
    for seed in 0..10 {
        let (data, basis) = small_instance(seed, 15, 4, 2);
        let theta = random_theta(seed, 2);
        let post = posterior_moments(&data, &basis, &theta, 4).unwrap();
        let nll = kbh_core::marginal_neg_loglik(&data, &basis, &theta, 4).unwrap();
        let joint = joint_gaussian(&data, &basis, &theta, 4);
        assert!(max_rel_gap(post.mean.as_slice(), joint.mean.as_slice()) < 1e-8);
        assert!(max_rel_gap(post.cov.as_slice(), joint.cov.as_slice()) < 1e-8);
        assert_relative_eq!(nll, joint.neg_loglik, max_relative = 1e-8);
    }
}

#[test]
fn coefficient_system_matches_dense_materialization() {
    for (seed, rows, n, p) in [(1, 12, 3, 2), (2, 20, 5, 3), (3, 9, 1, 1), (4, 17, 4, 3)] {
        let (data, basis) = small_instance(seed, rows, n, p);
        let post = posterior_moments(&data, &basis, &random_theta(seed, p), n).unwrap();
        let (a, b) = coefficient_system(&data, &basis, &post, n).unwrap();
        let (da, db) = dense_coefficient_system(&data, &basis, &post.mean, &post.cov, n);
        assert!(
            max_rel_gap(a.as_slice(), da.as_slice()) < 1e-10,
            "seed {seed}"
        );
        assert!(
            max_rel_gap(b.as_slice(), db.as_slice()) < 1e-10,
            "seed {seed}"
        );
    }
}

#[test]
fn q_function_matches_dense_assembly() {
    for seed in 0..5 {
        let (data, basis) = small_instance(seed, 15, 4, 2);
        let post = posterior_moments(&data, &basis, &random_theta(seed, 2), 4).unwrap();
        let other = random_theta(seed + 100, 2);
        let q = q_function(&data, &basis, &other, &post, 4).unwrap();
        let (dq, _) = dense_q(&data, &basis, &other, &post.mean, &post.cov, 4);
        assert_relative_eq!(q, dq, max_relative = 1e-10);
    }
}

fn updated_theta(
    seed: u64,
) -> (
    kbh_core::SignalRecord,
    kbh_core::PolynomialBasis,
    PosteriorMoments,
    HyperParameters,
) {
    let (data, basis) = small_instance(seed, 15, 4, 2);
    let post = posterior_moments(&data, &basis, &random_theta(seed, 2), 4).unwrap();
    let c = mstep_coefficients(&data, &basis, &post, 4).unwrap();
    let w = apply_nonlinearity(&basis, &c, data.u()).unwrap();
    let s2 = mstep_noise_variance(&data, &w, &post, 4).unwrap();
    let beta = mstep_beta(&post, &uniform_beta_grid(99)).unwrap();
    let theta = HyperParameters::new(c.0, s2.value, beta).unwrap();
    (data, basis, post, theta)
}

#[test]
fn updates_are_stationary_points_of_q() {
    for seed in 0..10 {
        let (data, basis, post, theta) = updated_theta(seed);
        let q = |t: &HyperParameters| dense_q(&data, &basis, t, &post.mean, &post.cov, 4);
        let (_, scale) = q(&theta);
        let mut x = theta.to_vec();
        // c entries and sigma2; beta is a grid maximizer, checked separately.
        for i in 0..x.len() - 1 {
            let h = 1e-5 * x[i].abs().max(1e-3);
            let orig = x[i];
            x[i] = orig + h;
            let up = q(&from_vec(&x)).0;
            x[i] = orig - h;
            let down = q(&from_vec(&x)).0;
            x[i] = orig;
            let elasticity = (up - down) / (2.0 * h) * orig.abs().max(1e-3) / scale;
            assert!(
                elasticity.abs() < 1e-6,
                "seed {seed} index {i}: {elasticity}"
            );
        }
    }
}

#[test]
fn beta_update_beats_grid_neighbours() {
    let grid = uniform_beta_grid(99);
    for seed in 0..10 {
        let (data, basis, post, theta) = updated_theta(seed);
        let at = |beta: f64| {
            let t = HyperParameters::new(theta.c.as_slice().to_vec(), theta.sigma2, beta).unwrap();
            dense_q(&data, &basis, &t, &post.mean, &post.cov, 4).0
        };
        let idx = grid.iter().position(|&g| g == theta.beta).unwrap();
        let best = at(theta.beta);
        if idx > 0 {
            assert!(best >= at(grid[idx - 1]), "seed {seed}");
        }
        if idx + 1 < grid.len() {
            assert!(best >= at(grid[idx + 1]), "seed {seed}");
        }
    }
}

fn from_vec(x: &[f64]) -> HyperParameters {
    let p = x.len() - 2;
    HyperParameters::new(x[..p].to_vec(), x[p], x[p + 1]).unwrap()
}

#[test]
fn q_separates_linear_block_from_shaping_parameter() {
    for seed in 0..5 {
        let (data, basis, post, theta) = updated_theta(seed);
        let q = |c0: f64, s2: f64, beta: f64| {
            let mut c = theta.c.as_slice().to_vec();
            c[0] = c0;
            let t = HyperParameters::new(c, s2, beta).unwrap();
            q_function(&data, &basis, &t, &post, 4).unwrap()
        };
        let (c0, s2, b) = (theta.c.as_slice()[0], theta.sigma2, theta.beta);
        let (dc, ds, db) = (0.3, 0.2 * s2, 0.1 * (1.0 - b));
        let base = q(c0, s2, b).abs();
        for (c1, s1) in [(c0 + dc, s2), (c0, s2 + ds), (c0 + dc, s2 + ds)] {
            let cross = q(c1, s1, b + db) - q(c1, s1, b) - q(c0, s2, b + db) + q(c0, s2, b);
            assert!(cross.abs() <= 1e-8 * base, "seed {seed}: {cross}");
        }
    }
}

#[test]
fn coefficient_update_scales_inversely_with_moments() {
    for seed in 0..5 {
        let (data, basis) = small_instance(seed, 15, 4, 2);
        let post = posterior_moments(&data, &basis, &random_theta(seed, 2), 4).unwrap();
        let c = mstep_coefficients(&data, &basis, &post, 4).unwrap();
        for alpha in [-2.5, 0.1, 4.0] {
            let scaled = mstep_coefficients(&data, &basis, &post.scaled(alpha), 4).unwrap();
            for (a, b) in scaled.as_slice().iter().zip(c.as_slice()) {
                assert_relative_eq!(*a, b / alpha, max_relative = 1e-9);
            }
        }
    }
}

#[test]
fn scalar_coefficient_matches_line_search() {
    let (data, basis) = small_instance(11, 15, 4, 1);
    let post = posterior_moments(&data, &basis, &random_theta(11, 1), 4).unwrap();
    let c = mstep_coefficients(&data, &basis, &post, 4)
        .unwrap()
        .as_slice()[0];
    let theta_at = |c1: f64| HyperParameters::new(vec![c1], 1.0, 0.5).unwrap();
    let qc = |c1: f64| dense_q(&data, &basis, &theta_at(c1), &post.mean, &post.cov, 4).0;
    let (mut lo, mut hi) = (c - 10.0, c + 10.0);
    while hi - lo > 1e-12 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if qc(m1) < qc(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    assert_relative_eq!(c, 0.5 * (lo + hi), max_relative = 1e-8);
}

#[test]
fn noise_variance_matches_line_search() {
    for seed in 0..5 {
        let (data, basis) = small_instance(seed, 15, 4, 2);
        let post = posterior_moments(&data, &basis, &random_theta(seed, 2), 4).unwrap();
        let c = random_theta(seed + 50, 2).c.as_slice().to_vec();
        let w = apply_nonlinearity(
            &basis,
            &kbh_core::NonlinearityCoefficients(c.clone()),
            data.u(),
        )
        .unwrap();
        let s2 = mstep_noise_variance(&data, &w, &post, 4).unwrap().value;
        let q = |log_s2: f64| {
            let t = HyperParameters::new(c.clone(), log_s2.exp(), 0.5).unwrap();
            dense_q(&data, &basis, &t, &post.mean, &post.cov, 4).0
        };
        // Bisection on the sign of a central-difference slope; comparing Q
        // values directly cannot resolve a flat maximum beyond sqrt(eps).
        let slope = |x: f64| q(x + 1e-4) - q(x - 1e-4);
        let (mut lo, mut hi) = (s2.ln() - 5.0, s2.ln() + 5.0);
        assert!(slope(lo) > 0.0 && slope(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(s2, (0.5 * (lo + hi)).exp(), max_relative = 1e-8);
    }
}

#[test]
fn beta_recovers_shaping_of_a_kernel_draw() {
    let n = 100;
    let grid = uniform_beta_grid(99);
    let k = tc_dense(0.8, n);
    let l = k.clone().cholesky().unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let g = l * z;
    let post = PosteriorMoments::new(g.clone(), DMatrix::zeros(n, n)).unwrap();
    let chosen = mstep_beta(&post, &grid).unwrap();
    // Direct scan of the Gaussian log-likelihood of g on a fine grid.
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 1..1000 {
        let beta = i as f64 / 1000.0;
        let Some(chol) = tc_dense(beta, n).cholesky() else {
            continue;
        };
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let ll = -0.5 * logdet - 0.5 * g.dot(&chol.solve(&g));
        if ll > best.0 {
            best = (ll, beta);
        }
    }
    assert!(
        (chosen - best.1).abs() <= 0.01 + 1e-12,
        "{chosen} vs {}",
        best.1
    );
}
