//! The paired estimators `f_i`, `g_i` and their exact variance diagnostics.

use gibbs_partition::estimators::{exact_diagnostics, exact_pair_moments, with_trace_variances, TensorEstimator};
use gibbs_partition::models::{shifted_hamiltonian, IsingModel};
use gibbs_partition::oracle::Enumeration;
use gibbs_partition::tpa::{Backend, Schedule};

fn main() -> gibbs_partition::Result<()> {
    let model = shifted_hamiltonian(IsingModel::new(2));
    let en = Enumeration::new(&model, 1 << 20)?;
    let (h_min, h_max) = en.energy_range();
    let schedule = Schedule::new(vec![0.0, 0.1, 0.25, 0.5], 1, 1, Backend::Grid)?;
    let tensor = TensorEstimator::new(&schedule, h_min, h_max);

    for (i, pair) in tensor.pairs().iter().enumerate() {
        let m = exact_pair_moments(&en, pair);
        let mid = en.partition(pair.midpoint());
        println!(
            "interval {i}: E[f] = {:.6} (Z(mid)/Z(lo) = {:.6}), E[g] = {:.6} (Z(mid)/Z(hi) = {:.6})",
            m.mu,
            mid / en.partition(pair.beta_lo),
            m.nu,
            mid / en.partition(pair.beta_hi)
        );
    }

    let diag = with_trace_variances(&en, &schedule, exact_diagnostics(&en, &schedule), 4)?;
    println!("nu/mu = {:.9}, Z(0)/Z(0.5) = {:.9}", diag.nu / diag.mu, diag.q);
    println!("V_rel[F] = {:.3e}, V_rel[G] = {:.3e}", diag.vrel_tensor_f, diag.vrel_tensor_g);
    println!("per-interval V_rel[f_i]: {:?}", diag.vrel_f);
    println!("per-interval Reltrv(4)[f_i]: {:?}", diag.reltrv_f.unwrap_or_default());
    println!("alpha_1 = {:.6}", diag.alpha1);
    Ok(())
}
