use approx::assert_relative_eq;
use proptest::prelude::*;

use gibbs_partition::estimators::TensorEstimator;
use gibbs_partition::meanest::MeanEstConfig;
use gibbs_partition::models::{
    conditional_weights, shifted_hamiltonian, Hamiltonian, IsingModel, ModelSpec, SiteSpace, TableModel, VotingModel,
};
use gibbs_partition::oracle::Enumeration;
use gibbs_partition::rng;
use gibbs_partition::tpa::{tpa_schedule, Backend, ExactEnergySampler, Schedule};

fn table() -> impl Strategy<Value = TableModel> {
    prop::collection::vec(2usize..=3, 1..=4).prop_flat_map(|domains| {
        let n: usize = domains.iter().product();
        prop::collection::vec(-3.0f64..3.0, n).prop_map(move |e| TableModel::new(&domains, e).unwrap())
    })
}

fn voting() -> impl Strategy<Value = VotingModel> {
    (1usize..=3).prop_flat_map(|n| {
        (
            -1.0f64..=1.0,
            prop::collection::vec(-1.0f64..=1.0, n),
            prop::collection::vec(-1.0f64..=1.0, n),
        )
            .prop_map(|(w, t, f)| VotingModel::new(w, t, f).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_round_trip(domains in prop::collection::vec(1usize..=4, 1..=6), seed in any::<u64>()) {
        let labels: Vec<Vec<i32>> = domains.iter().map(|&q| (0..q as i32).collect()).collect();
        let space = SiteSpace::new(labels).unwrap();
        let mut r = rng::stream(seed, &[]);
        let state: Vec<u8> = domains.iter().map(|&q| rng::index(&mut r, q) as u8).collect();
        let idx = space.encode(&state);
        prop_assert!(u128::from(idx) < space.state_count());
        let mut back = space.zero_state();
        space.decode(idx, &mut back);
        prop_assert_eq!(back, state);
    }

    #[test]
    fn shift_preserves_the_gibbs_law(model in table(), beta in 0.0f64..3.0) {
        let shifted = shifted_hamiltonian(&model);
        let raw = Enumeration::new(&model, 1 << 16).unwrap();
        let sh = Enumeration::new(&shifted, 1 << 16).unwrap();
        prop_assert_eq!(sh.energy_range().0, 0.0);
        for (p, q) in raw.probabilities(beta).iter().zip(sh.probabilities(beta)) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
        let restored = shifted.restore_partition(sh.partition(beta), beta);
        assert_relative_eq!(restored, raw.partition(beta), max_relative = 1e-12);
    }

    #[test]
    fn partition_offset_identity(model in table(), beta in 0.0f64..2.0, c in -5.0f64..5.0) {
        let moved = gibbs_partition::models::OffsetHamiltonian::with_offset(&model, c);
        let z = Enumeration::new(&model, 1 << 16).unwrap().partition(beta);
        let zc = Enumeration::new(&moved, 1 << 16).unwrap().partition(beta);
        assert_relative_eq!(zc, z * (-beta * c).exp(), max_relative = 1e-12);
    }

    #[test]
    fn conditional_weights_match_enumeration(model in voting(), beta in 0.0f64..2.0, seed in any::<u64>()) {
        let space = model.space().clone();
        let mut r = rng::stream(seed, &[]);
        let mut state: Vec<u8> = (0..space.n_sites()).map(|i| rng::index(&mut r, space.domain_size(i)) as u8).collect();
        let site = rng::index(&mut r, space.n_sites());
        let w = conditional_weights(&model, beta, &state, site).unwrap();
        let direct: Vec<f64> = (0..space.domain_size(site))
            .map(|v| {
                state[site] = v as u8;
                (-beta * model.energy(&state)).exp()
            })
            .collect();
        let total: f64 = direct.iter().sum();
        for (a, b) in w.iter().zip(&direct) {
            prop_assert!((a - b / total).abs() <= 1e-12);
        }
    }

    #[test]
    fn voting_range_is_attained(model in voting()) {
        let en = Enumeration::new(&model, 1 << 16).unwrap();
        let (lo, hi) = model.energy_range();
        let (elo, ehi) = en.energy_range();
        prop_assert!((lo - elo).abs() <= 1e-12 && (hi - ehi).abs() <= 1e-12);
    }

    #[test]
    fn model_files_round_trip(model in voting()) {
        let spec = gibbs_partition::models::Model::Voting(model).spec();
        let text = spec.to_toml();
        prop_assert_eq!(ModelSpec::parse(&text).unwrap(), spec);
    }

    #[test]
    fn estimators_bracket_one_and_ranges_are_tight(model in table(), cuts in prop::collection::vec(0.01f64..1.0, 1..4)) {
        let shifted = shifted_hamiltonian(&model);
        let en = Enumeration::new(&shifted, 1 << 16).unwrap();
        let (h_min, h_max) = en.energy_range();
        let mut betas = vec![0.0];
        for c in &cuts {
            let last = *betas.last().unwrap();
            betas.push(last + c);
        }
        let schedule = Schedule::new(betas, 1, 1, Backend::Grid).unwrap();
        let tensor = TensorEstimator::new(&schedule, h_min, h_max);
        for pair in tensor.pairs() {
            let fs: Vec<f64> = en.energies().iter().map(|&h| pair.f(h)).collect();
            let gs: Vec<f64> = en.energies().iter().map(|&h| pair.g(h)).collect();
            prop_assert!(fs.iter().all(|&f| f <= 1.0) && gs.iter().all(|&g| g >= 1.0));
            let (a, b) = pair.range_f();
            let (fmin, fmax) = fs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
            prop_assert!((a - fmin).abs() <= 1e-12 && (b - fmax).abs() <= 1e-12);
            let (a, b) = pair.range_g();
            let (gmin, gmax) = gs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
            prop_assert!((a - gmin).abs() <= 1e-12 * b && (b - gmax).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn tpa_schedules_are_monotone(k in 1usize..6, d in 1usize..8, beta_max in 0.01f64..3.0, seed in any::<u64>()) {
        let model = shifted_hamiltonian(IsingModel::new(2));
        let en = Enumeration::new(&model, 1 << 16).unwrap();
        let (s, _) = tpa_schedule(0.0, beta_max, k, d, |r| ExactEnergySampler::new(&en, rng::stream(seed, &[r as u64])), seed, Backend::Exact).unwrap();
        let b = s.betas();
        prop_assert_eq!(b[0], 0.0);
        prop_assert_eq!(*b.last().unwrap(), beta_max);
        prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sample_schedule_grows_to_worst_case(
        lambda in 0.0f64..0.99,
        a in 0.01f64..1.0,
        width in 0.01f64..5.0,
        eps in 0.01f64..0.5,
        delta in 0.01f64..0.5,
        ratio in 1.05f64..3.0,
    ) {
        let cfg = MeanEstConfig::new(lambda, a, a + width, eps, delta).with_ratio(ratio);
        let m = cfg.sample_schedule();
        prop_assert!(m[0] >= 1);
        prop_assert!(m.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(*m.last().unwrap() >= cfg.worst_case_samples());
    }
}

#[test]
fn ising_range_is_edge_count() {
    for side in 2..=4 {
        let m = IsingModel::new(side);
        let en = Enumeration::new(&m, 1 << 16).unwrap();
        let edges = 2 * side * (side - 1);
        assert_eq!(en.energy_range(), (-(edges as f64), 0.0));
        assert_eq!(m.energy_range(), (-(edges as f64), 0.0));
    }
}

#[test]
fn log_partition_is_convex_with_slope_minus_mean_energy() {
    let en = Enumeration::new(&VotingModel::reference(), 1 << 16).unwrap();
    let h = 1e-5;
    let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
    for &b in &grid[1..] {
        let slope = (en.log_partition(b + h) - en.log_partition(b - h)) / (2.0 * h);
        let e = en.exact_partition(b).mean_energy;
        assert!((slope + e).abs() <= 1e-6 * (1.0 + e.abs()), "β = {b}: {slope} vs {}", -e);
    }
    let z: Vec<f64> = grid.iter().map(|&b| en.log_partition(b)).collect();
    for w in z.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
    }
    for &b in &grid {
        assert!((en.probabilities(b).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
