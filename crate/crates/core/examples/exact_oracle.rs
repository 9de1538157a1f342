//! Exact partition functions and Glauber spectra by enumeration.

use gibbs_partition::models::{IsingModel, VotingModel};
use gibbs_partition::oracle::Enumeration;

fn main() -> gibbs_partition::Result<()> {
    let ising = IsingModel::new(2);
    let en = Enumeration::new(&ising, 1 << 20)?;
    println!("2x2 Ising energy histogram: {:?}", en.histogram());
    for beta in [0.0, 0.05, 0.5] {
        let s = en.exact_partition(beta);
        let closed = 2.0 * (4.0 * beta).exp() + 12.0 * (2.0 * beta).exp() + 2.0;
        println!("  beta {beta:<5} Z = {:.12}  closed form {:.12}  E[H] = {:.6}", s.z, closed, s.mean_energy);
    }

    let voting = VotingModel::reference();
    let en = Enumeration::new(&voting, 1 << 20)?;
    let beta = 0.1;
    let p = en.glauber_matrix(beta)?;
    let pi = en.probabilities(beta);
    let sp = en.spectral(beta)?;
    println!("voting model, {} states, beta {beta}", en.state_count());
    println!("  Z = {:.6}", en.partition(beta));
    println!("  detailed balance residual {:.2e}", p.detailed_balance_residual(&pi));
    println!("  stationarity residual {:.2e}", p.stationarity_residual(&pi));
    println!("  lambda = {:.6}, tau_rx = {:.3}, pi_min = {:.3e}", sp.lambda, sp.tau_rx, sp.pi_min);
    Ok(())
}
