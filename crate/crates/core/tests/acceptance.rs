//! Acceptance checks, one line per criterion.
//!
//! Run with `cargo test --test acceptance`. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use gibbs_partition::chains::{GibbsChain, MarkovChain, MatrixChain, StepMeter};
use gibbs_partition::estimators::{exact_pair_moments, TensorEstimator};
use gibbs_partition::meanest::{rel_mean_est, trace_variance_estimate, MeanEstConfig, Observed};
use gibbs_partition::models::{
    restore_partition, shifted_hamiltonian, Hamiltonian, IsingModel, Model, TableModel, VotingModel,
};
use gibbs_partition::oracle::{spectral, Enumeration, TransitionMatrix};
use gibbs_partition::pipelines::{
    baseline_plan, estimate_with, pipeline_schedule, BoundsProvider, BoundsSource, Method, PipelineConfig,
};
use gibbs_partition::rng::{self, derive_seed};
use gibbs_partition::tpa::{tpa_schedule, tpa_single_run, Backend, ExactEnergySampler, Schedule};

const ROOT: u64 = 0x00ac_ce97;
const CAP: u64 = 1 << 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn median(mut xs: Vec<u64>) -> f64 {
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2] as f64
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) as f64 / 2.0
    }
}

fn fpras_contract() -> Outcome {
    let cases: Vec<(&str, Model, f64)> = vec![
        ("ising2x2", Model::Ising(IsingModel::new(2)), 0.05),
        ("ising2x2", Model::Ising(IsingModel::new(2)), 0.01),
        ("ising3x3", Model::Ising(IsingModel::new(3)), 0.05),
        ("ising3x3", Model::Ising(IsingModel::new(3)), 0.01),
        ("voting3", Model::Voting(VotingModel::reference()), 0.1),
    ];
    let runs = 100;
    let mut pass = true;
    let mut parts = Vec::new();
    for (c, (name, model, beta)) in cases.iter().enumerate() {
        let exact = Enumeration::new(model, CAP).unwrap().partition(*beta);
        let bounds = BoundsProvider::new(model, BoundsSource::Oracle).unwrap();
        for (m, method) in Method::ALL.into_iter().enumerate() {
            let started = Instant::now();
            let mut hits = 0;
            for run in 0..runs {
                let seed = derive_seed(ROOT, &[1, c as u64, m as u64, run]);
                let cfg = PipelineConfig::new(method, *beta, 0.1, 0.1, seed);
                let r = estimate_with(model, &cfg, &bounds).unwrap();
                if (r.z_hat / exact - 1.0).abs() <= 0.1 {
                    hits += 1;
                }
            }
            let secs = started.elapsed().as_secs_f64();
            pass &= hits >= 85 && secs < 600.0;
            parts.push(format!("{name}@{beta}/{method} {hits}/{runs} in {secs:.0}s"));
        }
    }
    outcome(pass, parts.join("; "))
}

fn oracle_exactness() -> Outcome {
    let models: Vec<Model> = vec![
        Model::Ising(IsingModel::new(2)),
        Model::Ising(IsingModel::new(3)),
        Model::Ising(IsingModel::new(4)),
        Model::Voting(VotingModel::reference()),
        Model::Table(TableModel::new(&[2, 3], vec![0.5, -1.0, 2.0, 0.0, 1.5, -0.25]).unwrap()),
    ];
    let mut pass = true;
    for m in &models {
        let en = Enumeration::new(m, CAP).unwrap();
        pass &= en.partition(0.0) == m.space().state_count() as f64;
    }
    let en = Enumeration::new(&IsingModel::new(2), CAP).unwrap();
    let histogram_ok = en.histogram() == [(-4.0, 2), (-2.0, 12), (0.0, 2)];
    let closed = 2.0 * 0.2f64.exp() + 12.0 * 0.1f64.exp() + 2.0;
    let rel = (en.partition(0.05) / closed - 1.0).abs();
    pass &= histogram_ok && rel <= 1e-12;
    outcome(pass, format!("Z(0) = |Ω| on {} models; 2x2 histogram {histogram_ok}; Z(0.05) rel. diff {rel:.1e}", models.len()))
}

fn tpa_statistics() -> Outcome {
    let model = shifted_hamiltonian(IsingModel::new(2));
    let en = Enumeration::new(&model, CAP).unwrap();
    let beta_max = 2.0;
    let ln_q = en.log_partition(0.0) - en.log_partition(beta_max);

    let runs = 2000;
    let lengths: Vec<f64> = (0..runs)
        .map(|r| {
            let mut sampler = ExactEnergySampler::new(&en, rng::stream(ROOT, &[3, 0, r]));
            tpa_single_run(&mut sampler, 0.0, beta_max, &mut rng::stream(ROOT, &[3, 1, r])).unwrap().len() as f64
        })
        .collect();
    let (run_mean, run_sd) = mean_sd(&lengths);
    let run_ok = (run_mean - ln_q).abs() <= 3.0 * run_sd / (runs as f64).sqrt();

    let mut schedule_parts = Vec::new();
    let mut schedule_ok = true;
    let (h_min, h_max) = en.energy_range();
    assert_eq!(h_min, 0.0);
    for (k, d) in [(gibbs_partition::tpa::default_k(h_max), gibbs_partition::tpa::DEFAULT_D), (16, 4)] {
        let n = 500;
        let interior: Vec<f64> = (0..n)
            .map(|s| {
                let seed = derive_seed(ROOT, &[3, 2, k as u64, d as u64, s]);
                let (sch, _) = tpa_schedule(
                    0.0,
                    beta_max,
                    k,
                    d,
                    |r| ExactEnergySampler::new(&en, rng::stream(seed, &[1, r as u64])),
                    derive_seed(seed, &[2]),
                    Backend::Exact,
                )
                .unwrap();
                (sch.len() - 1) as f64
            })
            .collect();
        let (m, sd) = mean_sd(&interior);
        let target = k as f64 * ln_q / d as f64;
        let ok = (m - target).abs() <= 3.0 * sd / (n as f64).sqrt();
        schedule_ok &= ok;
        schedule_parts.push(format!("k={k},d={d}: {m:.4} vs {target:.4}"));
    }

    // Gaps between consecutive interior schedule points on the z = ln Z axis.
    let model3 = shifted_hamiltonian(IsingModel::new(3));
    let en3 = Enumeration::new(&model3, CAP).unwrap();
    let (k, d) = (4, 2);
    let mut gaps = Vec::new();
    for s in 0..500u64 {
        let seed = derive_seed(ROOT, &[3, 3, s]);
        let (sch, _) = tpa_schedule(
            0.0,
            beta_max,
            k,
            d,
            |r| ExactEnergySampler::new(&en3, rng::stream(seed, &[1, r as u64])),
            derive_seed(seed, &[2]),
            Backend::Exact,
        )
        .unwrap();
        let b = sch.betas();
        for w in b[1..b.len() - 1].windows(2) {
            gaps.push(en3.log_partition(w[0]) - en3.log_partition(w[1]));
        }
    }
    let mut tail_ok = true;
    let mut tail_parts = Vec::new();
    for eps in [0.5, 1.0, 2.0] {
        let bound = 1.0 - (1.0 - (-eps * k as f64 / d as f64).exp()).powi(d as i32);
        let frac = gaps.iter().filter(|&&g| g > eps).count() as f64 / gaps.len() as f64;
        let slack = 3.0 * (bound * (1.0 - bound) / gaps.len() as f64).sqrt();
        tail_ok &= frac <= bound + slack;
        tail_parts.push(format!("P(gap>{eps}) {frac:.4} ≤ {bound:.4}"));
    }
    outcome(
        run_ok && schedule_ok && tail_ok,
        format!(
            "run length {run_mean:.4} vs ln Q {ln_q:.4}; interior points {}; {} over {} gaps",
            schedule_parts.join(", "),
            tail_parts.join(", "),
            gaps.len()
        ),
    )
}

fn estimator_identities() -> Outcome {
    let model = shifted_hamiltonian(IsingModel::new(3));
    let en = Enumeration::new(&model, CAP).unwrap();
    let (h_min, h_max) = en.energy_range();
    let schedule = Schedule::new(vec![0.0, 0.2, 0.5, 1.0], 1, 1, Backend::Grid).unwrap();
    let tensor = TensorEstimator::new(&schedule, h_min, h_max);
    let n = 100_000;
    let mut worst_z: f64 = 0.0;
    for (i, pair) in tensor.pairs().iter().enumerate() {
        let z_mid = en.partition(pair.midpoint());
        for (side, beta, target) in [
            (0, pair.beta_lo, z_mid / en.partition(pair.beta_lo)),
            (1, pair.beta_hi, z_mid / en.partition(pair.beta_hi)),
        ] {
            let sampler = en.sampler(beta);
            let mut r = rng::stream(ROOT, &[4, i as u64, side]);
            let xs: Vec<f64> = (0..n)
                .map(|_| {
                    let h = en.energies()[sampler.sample(&mut r)];
                    if side == 0 { pair.f(h) } else { pair.g(h) }
                })
                .collect();
            let (m, sd) = mean_sd(&xs);
            worst_z = worst_z.max((m - target).abs() / (sd / (n as f64).sqrt()));
        }
    }

    // Product identity against a brute-force sum over the joint space of independent copies.
    let small = shifted_hamiltonian(IsingModel::new(2));
    let en2 = Enumeration::new(&small, CAP).unwrap();
    let (lo, hi) = en2.energy_range();
    let sched2 = Schedule::new(vec![0.0, 0.3, 0.7, 1.2], 1, 1, Backend::Grid).unwrap();
    let t2 = TensorEstimator::new(&sched2, lo, hi);
    let betas = sched2.betas();
    let law: Vec<Vec<f64>> = betas.iter().map(|&b| en2.probabilities(b)).collect();
    let energies = en2.energies();
    let s = energies.len();
    let (mut ef, mut ef2, mut eg, mut eg2) = (0.0, 0.0, 0.0, 0.0);
    for x in 0..s {
        for y in 0..s {
            for z in 0..s {
                let idx = [x, y, z];
                let hs: Vec<f64> = idx.iter().map(|&j| energies[j]).collect();
                let pf: f64 = (0..3).map(|i| law[i][idx[i]]).product();
                let pg: f64 = (0..3).map(|i| law[i + 1][idx[i]]).product();
                let f = t2.eval_f(&hs).unwrap();
                let g = t2.eval_g(&hs).unwrap();
                ef += pf * f;
                ef2 += pf * f * f;
                eg += pg * g;
                eg2 += pg * g * g;
            }
        }
    }
    let brute_f = ef2 / (ef * ef) - 1.0;
    let brute_g = eg2 / (eg * eg) - 1.0;
    let moments: Vec<_> = t2.pairs().iter().map(|p| exact_pair_moments(&en2, p)).collect();
    let prod_f = moments.iter().map(|m| m.vrel_f + 1.0).product::<f64>() - 1.0;
    let prod_g = moments.iter().map(|m| m.vrel_g + 1.0).product::<f64>() - 1.0;
    let diff = (brute_f - prod_f).abs().max((brute_g - prod_g).abs());
    outcome(
        worst_z <= 3.0 && diff <= 1e-9,
        format!("worst |z| of E[f_i], E[g_i] over 10^5 samples {worst_z:.2}; V_rel product identity diff {diff:.1e}"),
    )
}

fn mean_estimation() -> Outcome {
    let runs = 200u64;
    let (eps, delta) = (0.1, 0.1);

    let model = shifted_hamiltonian(IsingModel::new(2));
    let en = Enumeration::new(&model, CAP).unwrap();
    let (beta, width) = (0.5, 0.25);
    let (_, h_max) = en.energy_range();
    let exact = en.partition(beta + width) / en.partition(beta);
    let bounds = en.chain_bounds(beta).unwrap();
    let cfg = MeanEstConfig::new(bounds.lambda, (-width * h_max).exp(), 1.0, eps, delta).with_pi_min(bounds.pi_min);
    let f = move |c: &GibbsChain<_>| (-width * c.energy()).exp();
    let mut glauber_hits = 0;
    for run in 0..runs {
        let mut a = Observed::new(GibbsChain::from_zero(&model, beta, rng::stream(ROOT, &[5, run, 0])).unwrap(), f);
        let mut b = Observed::new(GibbsChain::from_zero(&model, beta, rng::stream(ROOT, &[5, run, 1])).unwrap(), f);
        let est = rel_mean_est(&mut a, &mut b, &cfg).unwrap();
        if (est.mean / exact - 1.0).abs() <= eps {
            glauber_hits += 1;
        }
    }

    let (p, q) = (0.05, 0.1);
    let two_exact = (q * 1.0 + p * 4.0) / (p + q);
    let two_cfg = MeanEstConfig::new(1.0 - p - q, 1.0, 4.0, eps, delta).with_pi_min(p / (p + q));
    let g = |c: &MatrixChain| if c.state() == 0 { 1.0 } else { 4.0 };
    let mut two_hits = 0;
    for run in 0..runs {
        let mut a = Observed::new(MatrixChain::two_state(p, q, 0, rng::stream(ROOT, &[5, 9, run, 0])).unwrap(), g);
        let mut b = Observed::new(MatrixChain::two_state(p, q, 1, rng::stream(ROOT, &[5, 9, run, 1])).unwrap(), g);
        let est = rel_mean_est(&mut a, &mut b, &two_cfg).unwrap();
        if (est.mean / two_exact - 1.0).abs() <= eps {
            two_hits += 1;
        }
    }

    // Unbiasedness of the paired trace-variance estimator from stationary starts.
    let tau = 4;
    let fh = |h: f64| (-width * h).exp();
    let m = en.exact_trace_variance(beta, fh, tau).unwrap();
    let exact_var = m.second_moment - m.mean * m.mean;
    let sampler = en.sampler(beta);
    let mut r = rng::stream(ROOT, &[5, 20]);
    let trace = |r: &mut rng::ChainRng, seed: u64| {
        let mut start = en.space().zero_state();
        en.space().decode(sampler.sample(r) as u64, &mut start);
        let mut c = GibbsChain::new(&model, beta, start, rng::stream(ROOT, &[5, 21, seed])).unwrap();
        let mut sum = fh(c.energy());
        for _ in 1..tau {
            c.step();
            sum += fh(c.energy());
        }
        sum / tau as f64
    };
    let n = 40_000u64;
    let pairs: Vec<(f64, f64)> = (0..n).map(|j| (trace(&mut r, 2 * j), trace(&mut r, 2 * j + 1))).collect();
    let v_hat = trace_variance_estimate(&pairs);
    let terms: Vec<f64> = pairs.iter().map(|(x, y)| (x - y) * (x - y) / 2.0).collect();
    let (_, sd) = mean_sd(&terms);
    let z = (v_hat - exact_var) / (sd / (n as f64).sqrt());

    outcome(
        glauber_hits >= 170 && two_hits >= 170 && z.abs() <= 3.0,
        format!(
            "coverage {glauber_hits}/{runs} (Glauber), {two_hits}/{runs} (two-state); trace variance {v_hat:.4e} vs exact {exact_var:.4e} (z = {z:.2})"
        ),
    )
}

fn small_oracle_chains() -> Vec<(String, Enumeration, f64)> {
    let mut out = Vec::new();
    for beta in [0.1, 0.5, 1.0] {
        let en = Enumeration::new(&shifted_hamiltonian(IsingModel::new(2)), CAP).unwrap();
        out.push((format!("ising2x2@{beta}"), en, beta));
    }
    let voting = VotingModel::new(0.6, vec![0.3, -0.7], vec![-0.2, 0.9]).unwrap();
    for beta in [0.2, 1.0] {
        out.push((format!("voting2@{beta}"), Enumeration::new(&shifted_hamiltonian(&voting), CAP).unwrap(), beta));
    }
    let table = TableModel::new(&[2, 3], vec![0.0, 1.0, 2.5, 0.5, 3.0, 1.5]).unwrap();
    for beta in [0.5, 2.0] {
        out.push((format!("table6@{beta}"), Enumeration::new(&table, CAP).unwrap(), beta));
    }
    out
}

fn variance_inequalities() -> Outcome {
    let mut checks = 0;
    let mut worst_first: f64 = 0.0;
    let mut worst_second: f64 = 0.0;
    let chains = small_oracle_chains();
    for (_, en, beta) in &chains {
        assert!(en.state_count() <= 64);
        let sp = en.spectral(*beta).unwrap();
        let base = sp.tau_rx.ceil() as usize;
        for width in [0.1, 0.5] {
            let fs: [Box<dyn Fn(f64) -> f64>; 2] = [Box::new(move |h| (-width * h).exp()), Box::new(move |h| (width * h).exp())];
            for f in &fs {
                let vrel = en.exact_trace_variance(*beta, f, 1).unwrap().reltrv;
                for tau in [1, 2, 4, 8, base] {
                    let r = en.exact_trace_variance(*beta, f, tau).unwrap().reltrv;
                    worst_first = worst_first.max(r - vrel);
                    checks += 1;
                }
                let at_base = en.exact_trace_variance(*beta, f, base).unwrap().reltrv;
                for mult in [1, 2, 4, 8] {
                    let tau = base * mult;
                    let r = en.exact_trace_variance(*beta, f, tau).unwrap().reltrv;
                    let bound = 2.0 * (base as f64 / tau as f64) * (at_base + 1.0);
                    worst_second = worst_second.max(r - bound);
                    checks += 1;
                }
            }
        }
    }
    outcome(
        worst_first <= 1e-12 && worst_second <= 1e-12,
        format!(
            "{checks} checks on {} chains; max Reltrv(τ) − V_rel {worst_first:.1e}; max excess over 2(τ_rx/τ)(Reltrv(τ_rx)+1) {worst_second:.1e}",
            chains.len()
        ),
    )
}

fn complexity_trend() -> Outcome {
    let model = VotingModel::reference();
    let bounds = BoundsProvider::new(&model, BoundsSource::Oracle).unwrap();
    let beta = 0.1;
    let seeds: Vec<u64> = (0..20).map(|s| derive_seed(ROOT, &[7, s])).collect();
    let run = |method: Method, eps: f64| -> Vec<u64> {
        seeds
            .iter()
            .map(|&seed| estimate_with(&model, &PipelineConfig::new(method, beta, eps, 0.1, seed), &bounds).unwrap().steps)
            .collect()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for method in Method::ALL {
        let ratio = median(run(method, 0.05)) / median(run(method, 0.1));
        pass &= (3.0..=5.5).contains(&ratio);
        parts.push(format!("{method} x{ratio:.2}"));
    }
    // At ε = 0.01 the baseline's fixed sample count is known before running;
    // its step count is taken from the plan rather than by executing it.
    let super_steps = median(run(Method::Super, 0.01));
    let baseline_steps = median(
        seeds
            .iter()
            .map(|&seed| {
                let cfg = PipelineConfig::new(Method::Baseline, beta, 0.01, 0.1, seed);
                let (schedule, tpa) = pipeline_schedule(&model, &cfg, &bounds, &StepMeter::new()).unwrap();
                baseline_plan(&cfg, &schedule, &bounds).unwrap().steps + tpa
            })
            .collect(),
    );
    pass &= super_steps < baseline_steps;
    outcome(
        pass,
        format!(
            "median growth 0.1 -> 0.05: {}; at ε = 0.01 superchain {super_steps} < baseline {baseline_steps}",
            parts.join(", ")
        ),
    )
}

fn offset_identity() -> Outcome {
    let mut pass = true;
    let mut compared = 0;
    let mut within = 0;
    for side in [2, 3] {
        let raw = IsingModel::new(side);
        let shifted = shifted_hamiltonian(&raw);
        let beta = 0.05;
        let exact = Enumeration::new(&raw, CAP).unwrap().partition(beta);
        let raw_bounds = BoundsProvider::new(&raw, BoundsSource::Oracle).unwrap();
        let shifted_bounds = BoundsProvider::new(&shifted, BoundsSource::Oracle).unwrap();
        for method in Method::ALL {
            for s in 0..5 {
                let cfg = PipelineConfig::new(method, beta, 0.1, 0.1, derive_seed(ROOT, &[8, side as u64, s]));
                let a = estimate_with(&raw, &cfg, &raw_bounds).unwrap();
                let b = estimate_with(&shifted, &cfg, &shifted_bounds).unwrap();
                let mapped = restore_partition(b.z_hat, beta, shifted.offset());
                pass &= a.z_hat.to_bits() == mapped.to_bits() && a.steps == b.steps;
                compared += 1;
                if (a.z_hat / exact - 1.0).abs() <= 0.1 {
                    within += 1;
                }
            }
        }
    }
    pass &= within * 100 >= 85 * compared;
    outcome(pass, format!("{compared} raw/shifted pairs bit-identical: {pass}; {within}/{compared} within 10% of the raw oracle"))
}

fn chain_correctness() -> Outcome {
    let mut rng_w = rng::stream(ROOT, &[9]);
    let random: Vec<f64> = (0..10).map(|_| 2.0 * rng::uniform01(&mut rng_w) - 1.0).collect();
    let models: Vec<Model> = vec![
        Model::Ising(IsingModel::new(2)),
        Model::Ising(IsingModel::new(3)),
        Model::Voting(VotingModel::reference()),
        Model::Voting(VotingModel::new(random[0], random[1..6].to_vec(), random[5..10].to_vec()).unwrap()),
        Model::Table(TableModel::new(&[3, 2, 2], (0..12).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap()),
    ];
    let mut worst_db: f64 = 0.0;
    let mut worst_st: f64 = 0.0;
    for m in &models {
        let en = Enumeration::new(m, CAP).unwrap();
        assert!(en.state_count() <= 4096);
        for beta in [0.0, 0.1, 0.5, 1.0] {
            let p = en.glauber_matrix(beta).unwrap();
            let pi = en.probabilities(beta);
            worst_db = worst_db.max(p.detailed_balance_residual(&pi));
            worst_st = worst_st.max(p.stationarity_residual(&pi));
        }
    }
    let mut worst_lambda: f64 = 0.0;
    for (p, q) in [(0.1, 0.2), (0.3, 0.3), (0.05, 0.6), (0.45, 0.5)] {
        let m = TransitionMatrix::from_dense(&[vec![1.0 - p, p], vec![q, 1.0 - q]]);
        let pi = [q / (p + q), p / (p + q)];
        worst_lambda = worst_lambda.max((spectral(&m, &pi).unwrap().lambda - (1.0 - p - q)).abs());
    }
    outcome(
        worst_db <= 1e-10 && worst_st <= 1e-10 && worst_lambda <= 1e-15,
        format!(
            "{} models: detailed balance {worst_db:.1e}, stationarity {worst_st:.1e}; two-state |λ − (1−p−q)| {worst_lambda:.1e}",
            models.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("multiplicative-error contract", fpras_contract),
        ("oracle exactness", oracle_exactness),
        ("TPA statistics", tpa_statistics),
        ("estimator identities", estimator_identities),
        ("adaptive mean estimation", mean_estimation),
        ("trace-variance inequalities", variance_inequalities),
        ("complexity trend", complexity_trend),
        ("offset identity", offset_identity),
        ("chain correctness", chain_correctness),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let started = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} [{:.1}s] {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
