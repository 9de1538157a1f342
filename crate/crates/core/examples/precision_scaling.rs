//! Markov-chain step counts as the precision tightens, with paired seeds.

use gibbs_partition::chains::StepMeter;
use gibbs_partition::models::VotingModel;
use gibbs_partition::pipelines::{baseline_plan, estimate_with, pipeline_schedule, BoundsProvider, BoundsSource, Method, PipelineConfig};

fn median(mut xs: Vec<u64>) -> f64 {
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] as f64 } else { (xs[n / 2 - 1] + xs[n / 2]) as f64 / 2.0 }
}

fn main() -> gibbs_partition::Result<()> {
    let model = VotingModel::reference();
    let bounds = BoundsProvider::new(&model, BoundsSource::Oracle)?;
    let seeds = 0..10u64;
    println!("{:<9} {:>6} {:>14}", "method", "eps", "median steps");
    for method in Method::ALL {
        for eps in [0.1, 0.05, 0.025] {
            let steps = seeds
                .clone()
                .map(|seed| {
                    let cfg = PipelineConfig::new(method, 0.1, eps, 0.1, seed);
                    if method == Method::Baseline {
                        // The fixed sample count is known up front; skip running it.
                        let (schedule, tpa) = pipeline_schedule(&model, &cfg, &bounds, &StepMeter::new())?;
                        Ok(baseline_plan(&cfg, &schedule, &bounds)?.steps + tpa)
                    } else {
                        Ok(estimate_with(&model, &cfg, &bounds)?.steps)
                    }
                })
                .collect::<gibbs_partition::Result<Vec<u64>>>()?;
            println!("{method:<9} {eps:>6} {:>14}", median(steps));
        }
    }
    Ok(())
}
