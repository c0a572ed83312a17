use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgnlab_core::langevin::{
    analytic_covariances, hyperparam_map, inverse_hyperparam_map, noise_covariance_at, probability_current,
    simulate, simulate_with_observer, steady_state_density, step_momentum_sgd, step_underdamped, step_vanilla_sgd,
    Integrator, LangevinConfig, PhaseState, QuadraticPotential, Scheme, SgdHyperparams,
};
use sgnlab_core::net::{mean_loss, Activation, LossKind, NetSpec, Params, Sample};
use sgnlab_core::stats::std_normal_cdf;

fn random_spd(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    let l = DVector::from_fn(d, |_, _| rng.random_range(lo..hi));
    let h = &q * DMatrix::from_diagonal(&l) * q.transpose();
    (&h + h.transpose()) * 0.5
}

#[test]
fn hyperparam_map_roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let m = 10f64.powf(rng.random_range(-2.0..2.0));
        let g = 10f64.powf(rng.random_range(-2.0..2.0));
        let dt = 10f64.powf(rng.random_range(-3.0..0.0));
        let hp = hyperparam_map(m, g, dt).unwrap();
        let back = inverse_hyperparam_map(hp, dt).unwrap();
        assert!(((back.mass - m) / m).abs() < 1e-12);
        // γ comes from 1 - ρ, which cancels when γΔt/m is small
        assert!(((back.friction - g) / g).abs() < 1e-12 * (1.0 + m / (g * dt)));
        let again = hyperparam_map(back.mass, back.friction, dt).unwrap();
        assert!(((again.momentum - hp.momentum) / hp.momentum).abs() < 1e-12);
        assert!(((again.learning_rate - hp.learning_rate) / hp.learning_rate).abs() < 1e-12);
    }
    let mf = inverse_hyperparam_map(SgdHyperparams { momentum: 0.9, learning_rate: 0.1 }, 1.0).unwrap();
    assert!((mf.mass - 9.0).abs() < 1e-12 && (mf.friction - 1.0).abs() < 1e-12);
    let hp = hyperparam_map(mf.mass, mf.friction, 1.0).unwrap();
    assert!((hp.momentum - 0.9).abs() < 1e-12 && (hp.learning_rate - 0.1).abs() < 1e-12);
}

#[test]
fn noiseless_langevin_recurrence_is_momentum_sgd() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..10 {
        let d = rng.random_range(1..6);
        let h = random_spd(&mut rng, d, 0.1, 2.0);
        let center: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pot = QuadraticPotential::new(center, h).unwrap();
        let m = rng.random_range(0.5..2.0);
        let gamma = rng.random_range(0.1..5.0);
        let dt = rng.random_range(0.01..0.5);
        let hp = hyperparam_map(m, gamma, dt).unwrap();
        let cfg = LangevinConfig::deterministic(m, gamma, dt, d).unwrap().with_scheme(Scheme::SemiImplicit);
        let mut integrator = Integrator::new(cfg);
        let theta0: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut lang = PhaseState::at_rest(theta0.clone());
        let mut sgd = PhaseState::at_rest(theta0);
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let g = pot.gradient(&lang.theta);
            integrator.step(&mut lang, &g, &mut rng).unwrap();
            let g = pot.gradient(&sgd.theta);
            sgd = step_momentum_sgd(&sgd, &g, hp).unwrap();
            let disp = lang.to_displacement(dt);
            for i in 0..d {
                worst = worst.max((disp.theta[i] - sgd.theta[i]).abs()).max((disp.v[i] - sgd.v[i]).abs());
            }
        }
        assert!(worst < 1e-12, "trial {trial}: {worst:e}");
    }
}

/// Max deviation between heavy-ball with mapped (ρ, α) and vanilla SGD with
/// step Δt/γ, in units of that step.
fn friction_gap(gamma: f64) -> f64 {
    let (m, dt) = (1.0, 0.1);
    let pot = QuadraticPotential::diagonal(&[1.0, 3.0]).unwrap();
    let hp = hyperparam_map(m, gamma, dt).unwrap();
    let lr = dt / gamma;
    let mut mom = PhaseState::at_rest(vec![1.0, -1.0]);
    let mut van = vec![1.0, -1.0];
    let mut worst = 0.0f64;
    for _ in 0..(50.0 * gamma) as usize {
        mom = step_momentum_sgd(&mom, &pot.gradient(&mom.theta), hp).unwrap();
        let g = pot.gradient(&van);
        step_vanilla_sgd(&mut van, &g, lr);
        for i in 0..2 {
            worst = worst.max((mom.theta[i] - van[i]).abs() / lr);
        }
    }
    worst
}

#[test]
fn high_friction_limit_is_vanilla_sgd() {
    let hp = hyperparam_map(1.0, 1000.0, 0.01).unwrap();
    assert!((hp.learning_rate - 1e-5).abs() / 1e-5 < 0.1);
    let coarse = friction_gap(100.0);
    let fine = friction_gap(1000.0);
    assert!(coarse / fine >= 8.0, "{coarse} / {fine}");
}

#[test]
fn steady_state_covariances() {
    let pot = QuadraticPotential::diagonal(&[1.0, 4.0]).unwrap();
    let (gamma, dt) = (1.0, 0.01);
    let cfg = LangevinConfig::for_potential(gamma, dt, &pot).unwrap();
    let s = simulate(&cfg, &pot, &PhaseState::at_rest(vec![0.0, 0.0]), 1_000_000, 100_000, 7).unwrap();
    let (ct, cv) = analytic_covariances(gamma, dt, &pot);
    let rel_t = (s.cov_theta_matrix() - &ct).norm() / ct.norm();
    let rel_v = (s.cov_v_matrix() - &cv).norm() / cv.norm();
    assert!(rel_t < 0.1, "cov θ off by {rel_t}");
    assert!(rel_v < 0.1, "cov v off by {rel_v}");
    for i in 0..2 {
        assert!(s.mean_theta[i].abs() < 3.0 * s.theta_mean_stderr[i], "mean {i}");
        assert!(s.v_skewness[i].abs() < 4.0 * s.v_skewness_stderr[i], "skew {i}");
    }
}

#[test]
fn theta_marginal_matches_steady_state_in_total_variation() {
    let pot = QuadraticPotential::diagonal(&[1.0]).unwrap();
    let (gamma, dt) = (1.0, 0.01);
    let cfg = LangevinConfig::for_potential(gamma, dt, &pot).unwrap();
    let sd = (dt / (2.0 * gamma)).sqrt();
    let (lo, hi, bins) = (-5.0 * sd, 5.0 * sd, 200);
    let width = (hi - lo) / bins as f64;
    let burn = 100_000;
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    simulate_with_observer(&cfg, &pot, &PhaseState::at_rest(vec![0.0]), 5_000_000, burn, 11, |step, s| {
        if step > burn {
            total += 1;
            let b = ((s.theta[0] - lo) / width).floor();
            if b >= 0.0 && (b as usize) < bins {
                counts[b as usize] += 1;
            }
        }
    })
    .unwrap();
    let tv: f64 = 0.5
        * (0..bins)
            .map(|b| {
                let a = lo + b as f64 * width;
                let p = std_normal_cdf((a + width) / sd) - std_normal_cdf(a / sd);
                (counts[b] as f64 / total as f64 - p).abs()
            })
            .sum::<f64>();
    assert!(tv < 0.05, "TV {tv}");
}

#[test]
fn current_breaks_detailed_balance_on_grid() {
    let pot = QuadraticPotential::diagonal(&[1.0, 4.0]).unwrap();
    let (gamma, dt) = (1.0, 0.01);
    let d = pot.hessian() * dt;
    let dens = |t: &[f64], v: &[f64]| steady_state_density(t, v, gamma, dt, &pot).unwrap();
    let mut min_ratio = f64::INFINITY;
    for i in 0..21 {
        for j in 0..21 {
            let theta = [-0.3 + 0.03 * i as f64, 0.0];
            let v = [0.1 + 0.045 * j as f64, 0.0];
            let j_ = probability_current(&theta, &v, gamma, dt, &pot, &d, dens).unwrap();
            assert!(j_.density > 1e-300);
            assert!(j_.theta_norm() > 0.0);
            min_ratio = min_ratio.min(j_.theta_norm() / j_.density);
        }
    }
    assert!(min_ratio > 0.09, "{min_ratio}");
    assert!((min_ratio - 0.1).abs() < 1e-15);
}

#[test]
fn isotropic_current_matches_hand_derivative() {
    let pot = QuadraticPotential::new(vec![0.2, -0.1], DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
    let (gamma, dt, c) = (1.5, 0.05, 0.07);
    let k = gamma / dt;
    let d = DMatrix::identity(2, 2) * c;
    let dens = |t: &[f64], v: &[f64]| steady_state_density(t, v, gamma, dt, &pot).unwrap();
    let theta = [0.25, -0.05];
    let v = [0.1, -0.15];
    let j = probability_current(&theta, &v, gamma, dt, &pot, &d, dens).unwrap();
    let pi = dens(&theta, &v);
    let hinv_v = pot.hessian_inverse() * DVector::from_column_slice(&v);
    let force = pot.gradient(&theta);
    for i in 0..2 {
        let grad_v = -2.0 * k * hinv_v[i] * pi;
        let want = (gamma * v[i] + force[i]) * pi + 0.5 * c * grad_v;
        assert!(((j.j_v[i] - want) / want).abs() < 1e-6, "{} vs {want}", j.j_v[i]);
        assert_eq!(j.j_theta[i], -v[i] * pi);
    }
}

#[test]
fn noiseless_simulation_sits_at_the_fixed_point() {
    let pot = QuadraticPotential::diagonal(&[1.0, 4.0]).unwrap();
    let cfg = LangevinConfig::deterministic(1.0, 1.0, 0.01, 2).unwrap();
    let s = simulate(&cfg, &pot, &PhaseState::at_rest(vec![0.0, 0.0]), 10_000, 1000, 3).unwrap();
    assert_eq!(s.final_state, PhaseState::at_rest(vec![0.0, 0.0]));
    assert!(s.cov_v.iter().all(|&x| x == 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let noisy = LangevinConfig::for_potential(1.0, 0.01, &pot).unwrap();
    let s0 = PhaseState::at_rest(vec![0.0, 0.0]);
    let s1 = step_underdamped(&s0, |t| pot.gradient(t), &noisy, &mut rng).unwrap();
    assert_ne!(s1, s0);
}

fn regression_data(n: usize, seed: u64) -> Vec<Sample> {
    // y = 2x - 0.5 + ε with var ε = 1/2, so the per-sample gradient covariance
    // at the optimum equals the Hessian of the mean squared error
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(0.0..1.0);
            let e: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.5f64.sqrt();
            Sample::new(vec![x], vec![2.0 * x - 0.5 + e])
        })
        .collect()
}

#[test]
fn gradient_covariance_matches_hessian_at_optimum() {
    let spec = NetSpec::new(vec![1, 1], vec![Activation::Identity], LossKind::Mse).unwrap();
    let data = regression_data(4000, 5);
    let n = data.len() as f64;
    let (sx, sy) = data.iter().fold((0.0, 0.0), |(a, b), s| (a + s.input[0], b + s.target[0]));
    let (mx, my) = (sx / n, sy / n);
    let sxy: f64 = data.iter().map(|s| (s.input[0] - mx) * (s.target[0] - my)).sum();
    let sxx: f64 = data.iter().map(|s| (s.input[0] - mx).powi(2)).sum();
    let w = sxy / sxx;
    let params = Params::from_flat(&spec, vec![w, my - w * mx]).unwrap();

    let cov = noise_covariance_at(&params, &spec, &data, &[0, 1]).unwrap();
    assert!((&cov - cov.transpose()).amax() == 0.0);
    assert!(cov.clone().symmetric_eigenvalues().iter().all(|&l| l >= -1e-12));

    let h = 1e-4;
    let loss_at = |dw: f64, db: f64| {
        let p = Params::from_flat(&spec, vec![w + dw, my - w * mx + db]).unwrap();
        mean_loss(&p, &spec, &data).unwrap()
    };
    let l0 = loss_at(0.0, 0.0);
    let hess = [
        (loss_at(h, 0.0) - 2.0 * l0 + loss_at(-h, 0.0)) / (h * h),
        (loss_at(h, h) - loss_at(h, -h) - loss_at(-h, h) + loss_at(-h, -h)) / (4.0 * h * h),
        (loss_at(0.0, h) - 2.0 * l0 + loss_at(0.0, -h)) / (h * h),
    ];
    let pairs = [(cov[(0, 0)], hess[0]), (cov[(0, 1)], hess[1]), (cov[(1, 1)], hess[2])];
    for (c, hh) in pairs {
        assert!(((c - hh) / hh).abs() < 0.15, "C {c} vs H {hh}");
    }
}
