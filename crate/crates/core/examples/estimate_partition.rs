//! The three pipelines on the reference voting model, checked against enumeration.

use gibbs_partition::models::VotingModel;
use gibbs_partition::oracle::Enumeration;
use gibbs_partition::pipelines::{estimate_with, BoundsProvider, BoundsSource, Method, PipelineConfig};

fn main() -> gibbs_partition::Result<()> {
    let model = VotingModel::reference();
    let beta = 0.1;
    let exact = Enumeration::new(&model, 1 << 20)?.partition(beta);
    let bounds = BoundsProvider::new(&model, BoundsSource::Oracle)?;
    println!("exact Z({beta}) = {exact:.6}");
    for method in Method::ALL {
        let cfg = PipelineConfig::new(method, beta, 0.1, 0.1, 2024);
        let r = estimate_with(&model, &cfg, &bounds)?;
        println!(
            "{method:<9} Z_hat = {:.6}  rel. error {:+.4}  steps {:>10} (TPA {})  intervals {}",
            r.z_hat,
            r.z_hat / exact - 1.0,
            r.steps,
            r.tpa_steps,
            r.schedule.len()
        );
    }
    Ok(())
}
