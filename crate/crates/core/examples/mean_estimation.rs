//! Adaptive relative-precision mean estimation from two chain copies.

use gibbs_partition::chains::MatrixChain;
use gibbs_partition::meanest::{rel_mean_est, MeanEstConfig, Observed};
use gibbs_partition::rng;

fn main() -> gibbs_partition::Result<()> {
    let (p, q) = (0.2, 0.3);
    let lambda = 1.0 - p - q;
    let (a, b) = (1.0, 3.0);
    // Stationary law (q, p)/(p+q) on states 0 and 1.
    let exact = (q * a + p * b) / (p + q);
    let f = move |c: &MatrixChain| if c.state() == 0 { a } else { b };

    for eps in [0.2, 0.1, 0.05] {
        let cfg = MeanEstConfig::new(lambda, a, b, eps, 0.1).with_pi_min(0.4);
        let mut first = Observed::new(MatrixChain::two_state(p, q, 0, rng::stream(1, &[0]))?, f);
        let mut second = Observed::new(MatrixChain::two_state(p, q, 1, rng::stream(1, &[1]))?, f);
        let est = rel_mean_est(&mut first, &mut second, &cfg)?;
        println!(
            "eps {eps:<5} mean {:.5} (exact {exact:.5}), certified rel. error {:.4}, {} steps, {} iterations, cap hit {}",
            est.mean,
            est.rel_err,
            est.steps,
            est.iterations.len(),
            est.cap_hit
        );
    }

    let cfg = MeanEstConfig::new(lambda, a, b, 0.1, 0.1).with_pi_min(0.4);
    println!("sample schedule for eps 0.1: {:?}", cfg.sample_schedule());
    Ok(())
}
