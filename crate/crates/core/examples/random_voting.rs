//! Steps against the exact partition function for voting models with random weights.

use gibbs_partition::models::VotingModel;
use gibbs_partition::oracle::Enumeration;
use gibbs_partition::pipelines::{estimate_with, BoundsProvider, BoundsSource, Method, PipelineConfig};
use gibbs_partition::rng;
use rand::Rng;

fn main() -> gibbs_partition::Result<()> {
    let mut r = rng::stream(77, &[]);
    let n = 5;
    println!("{:>10} {:>8} {:>12} {:>10}", "beta", "Z", "rel. error", "steps");
    for trial in 0..4u64 {
        let omega = r.random_range(-1.0..=1.0);
        let omega_t: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..=1.0)).collect();
        let omega_f: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..=1.0)).collect();
        let beta = r.random_range(0.05..0.5);
        let model = VotingModel::new(omega, omega_t, omega_f)?;
        let exact = Enumeration::new(&model, 1 << 20)?.partition(beta);
        let bounds = BoundsProvider::new(&model, BoundsSource::Oracle)?;
        let rep = estimate_with(&model, &PipelineConfig::new(Method::Super, beta, 0.1, 0.1, trial), &bounds)?;
        println!("{beta:>10.4} {exact:>8.1} {:>+12.4} {:>10}", rep.z_hat / exact - 1.0, rep.steps);
    }
    Ok(())
}
