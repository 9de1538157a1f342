//! Heat-bath Glauber dynamics against exact expectations.

use gibbs_partition::chains::{GibbsChain, MarkovChain};
use gibbs_partition::models::IsingModel;
use gibbs_partition::oracle::Enumeration;
use gibbs_partition::rng;

fn main() -> gibbs_partition::Result<()> {
    let model = IsingModel::new(3);
    let en = Enumeration::new(&model, 1 << 20)?;
    let beta = 0.4;
    let bounds = en.chain_bounds(beta)?;
    let mut chain = GibbsChain::from_zero(&model, beta, rng::stream(11, &[0]))?;
    chain.advance(bounds.t_unif());

    let n = 400_000;
    let mut sum = 0.0;
    for _ in 0..n {
        chain.step();
        sum += chain.energy();
    }
    println!("3x3 Ising at beta {beta}");
    println!("  T_unif = {} steps", bounds.t_unif());
    println!("  time-averaged E[H] = {:.4}", sum / n as f64);
    println!("  exact E[H]         = {:.4}", en.exact_partition(beta).mean_energy);
    Ok(())
}
