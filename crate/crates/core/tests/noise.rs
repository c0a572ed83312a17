use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgnlab_core::net::{batch_gradient, per_sample_gradient, Activation, LossKind, NetSpec, Params, Sample};
use sgnlab_core::noise::{
    decode_binary, encode_binary, full_gradient, sample_noise, select_coordinates, write_csv, GradientBank,
    ProbeConfig, Sampling,
};

fn setup(n: usize, seed: u64) -> (NetSpec, Params, Vec<Sample>) {
    let spec = NetSpec::new(
        vec![5, 8, 4],
        vec![Activation::Relu, Activation::Identity],
        LossKind::CrossEntropy,
    )
    .unwrap();
    let params = Params::init_uniform(&spec, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let data = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut y = vec![0.0; 4];
            y[rng.random_range(0..4)] = 1.0;
            Sample::new(x, y)
        })
        .collect();
    (spec, params, data)
}

fn cfg(batch_size: usize, n_draws: usize) -> ProbeConfig {
    ProbeConfig {
        batch_size,
        n_draws,
        max_coords_per_layer: 4096,
        sampling: Sampling::WithoutReplacement,
        include_bias: true,
        seed: 42,
    }
}

#[test]
fn full_gradient_definitions() {
    let (spec, p, data) = setup(40, 1);
    let one = full_gradient(&p, &spec, &data[..1]).unwrap();
    assert_eq!(one, per_sample_gradient(&p, &spec, &data[0].input, &data[0].target).unwrap());
    assert_eq!(full_gradient(&p, &spec, &data).unwrap(), batch_gradient(&p, &spec, &data).unwrap());
    let g1 = per_sample_gradient(&p, &spec, &data[0].input, &data[0].target).unwrap();
    let g2 = per_sample_gradient(&p, &spec, &data[1].input, &data[1].target).unwrap();
    let two = full_gradient(&p, &spec, &data[..2]).unwrap();
    for i in 0..two.len() {
        assert!((two.0[i] - (g1.0[i] + g2.0[i]) / 2.0).abs() <= 1e-16 * g1.0[i].abs().max(g2.0[i].abs()));
    }
    assert!(full_gradient(&p, &spec, &[]).is_err());
}

#[test]
fn full_batch_noise_is_exactly_zero() {
    let (spec, p, data) = setup(37, 2);
    let set = sample_noise(&p, &spec, &data, &cfg(37, 20)).unwrap();
    assert!(set.draws.iter().all(|&x| x == 0.0));
}

#[test]
fn two_sample_batches_of_one_enumerate_both_signs() {
    let (spec, p, data) = setup(2, 3);
    let g1 = per_sample_gradient(&p, &spec, &data[0].input, &data[0].target).unwrap();
    let g2 = per_sample_gradient(&p, &spec, &data[1].input, &data[1].target).unwrap();
    let set = sample_noise(&p, &spec, &data, &cfg(1, 200)).unwrap();
    let mut seen = [false, false];
    for j in 0..set.n_draws {
        let col = set.column(j);
        let first = set.coordinates.iter().zip(&col).all(|(c, &x)| (x - (g1.0[c.index] - g2.0[c.index]) / 2.0).abs() < 1e-15);
        let second = set.coordinates.iter().zip(&col).all(|(c, &x)| (x - (g2.0[c.index] - g1.0[c.index]) / 2.0).abs() < 1e-15);
        assert!(first || second, "draw {j} is neither enumerated value");
        seen[0] |= first;
        seen[1] |= second;
    }
    assert!(seen[0] && seen[1]);
}

#[test]
fn enumerated_summands_average_to_zero() {
    let (spec, p, data) = setup(300, 4);
    let coords: Vec<_> = (0..p.len()).map(|i| p.label(i)).collect();
    let bank = GradientBank::build(&p, &spec, &data, coords).unwrap();
    let set = bank.summand_noise();
    assert_eq!(set.n_draws, 300);
    for (_, row) in set.rows() {
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        assert!(mean.abs() < 1e-12, "{mean:e}");
    }
}

#[test]
fn noise_is_deterministic_and_thread_count_independent() {
    let (spec, p, data) = setup(120, 5);
    let c = ProbeConfig { max_coords_per_layer: 10, ..cfg(16, 300) };
    let a = sample_noise(&p, &spec, &data, &c).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| sample_noise(&p, &spec, &data, &c).unwrap());
    assert_eq!(a, b);
    assert_eq!(encode_binary(&a), encode_binary(&b));
    let other = sample_noise(&p, &spec, &data, &ProbeConfig { seed: 43, ..c.clone() }).unwrap();
    assert_ne!(a.draws, other.draws);
    assert_eq!(a.n_coords(), 20);
}

#[test]
fn column_means_shrink_at_clt_rate() {
    let (spec, p, data) = setup(200, 6);
    let c = ProbeConfig { max_coords_per_layer: 30, sampling: Sampling::WithReplacement, ..cfg(8, 10_000) };
    let set = sample_noise(&p, &spec, &data, &c).unwrap();
    let n = set.n_draws as f64;
    let mut ok = 0;
    let mut tested = 0;
    for (_, row) in set.rows() {
        let mean = row.iter().sum::<f64>() / n;
        let sd = (row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        if sd == 0.0 {
            continue;
        }
        tested += 1;
        if mean.abs() < 4.0 * sd / n.sqrt() {
            ok += 1;
        }
    }
    assert!(tested > 0);
    assert!(ok as f64 >= 0.99 * tested as f64, "{ok}/{tested}");
}

#[test]
fn bounded_inputs_give_finite_moments() {
    let (spec, p, data) = setup(100, 7);
    let c = ProbeConfig { max_coords_per_layer: 8, ..cfg(10, 100_000) };
    let set = sample_noise(&p, &spec, &data, &c).unwrap();
    assert!(set.draws.iter().all(|x| x.is_finite()));
    for (_, row) in set.rows() {
        let m4 = row.iter().map(|x| x.powi(4)).sum::<f64>() / row.len() as f64;
        assert!(m4.is_finite());
    }
}

#[test]
fn coordinate_cap_applies_per_layer() {
    let (_, p, _) = setup(1, 8);
    let sel = select_coordinates(&p, 7, false, 1);
    assert_eq!(sel.len(), 14);
    assert!(sel.windows(2).all(|w| w[0].index < w[1].index));
    assert_eq!(sel, select_coordinates(&p, 7, false, 1));
}

#[test]
fn containers_roundtrip() {
    let (spec, p, data) = setup(50, 9);
    let set = sample_noise(&p, &spec, &data, &ProbeConfig { max_coords_per_layer: 3, ..cfg(5, 7) }).unwrap();
    let bytes = encode_binary(&set);
    assert_eq!(&bytes[..4], b"SGNL");
    assert_eq!(bytes.len(), 40 + 8 * 6 * 7);
    let back = decode_binary(&bytes).unwrap();
    assert_eq!((back.n_coords, back.n_draws, back.batch_size, back.seed), (6, 7, 5, 42));
    assert_eq!(back.draws, set.draws);

    let mut csv = Vec::new();
    write_csv(&set, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("coordinate,d0,d1"));
    assert!(lines[1].starts_with("L1.W["));
}
