//! TPA runs and TPA(k, d) cooling schedules.

use gibbs_partition::models::{shifted_hamiltonian, IsingModel};
use gibbs_partition::oracle::Enumeration;
use gibbs_partition::rng;
use gibbs_partition::tpa::{tpa_schedule, tpa_single_run, Backend, ExactEnergySampler};

fn main() -> gibbs_partition::Result<()> {
    let model = shifted_hamiltonian(IsingModel::new(3));
    let en = Enumeration::new(&model, 1 << 20)?;
    let beta_max = 2.0;
    let ln_q = en.log_partition(0.0) - en.log_partition(beta_max);

    let runs = 2000;
    let mut total = 0usize;
    for r in 0..runs {
        let mut sampler = ExactEnergySampler::new(&en, rng::stream(5, &[0, r]));
        total += tpa_single_run(&mut sampler, 0.0, beta_max, &mut rng::stream(5, &[1, r]))?.len();
    }
    println!("3x3 Ising, beta in [0, {beta_max}], ln Q = {ln_q:.4}");
    println!("  mean points per TPA run: {:.4}", total as f64 / runs as f64);

    for (k, d) in [(4, 1), (16, 4), (64, 16)] {
        let (schedule, _) = tpa_schedule(
            0.0,
            beta_max,
            k,
            d,
            |r| ExactEnergySampler::new(&en, rng::stream(9, &[r as u64])),
            13,
            Backend::Exact,
        )?;
        let widths: Vec<String> = schedule.deltas().iter().map(|x| format!("{x:.3}")).collect();
        println!("  k={k:<3} d={d:<3} {} intervals, widths [{}]", schedule.len(), widths.join(", "));
    }
    Ok(())
}
