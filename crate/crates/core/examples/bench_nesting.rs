use std::time::Instant;

use rsjam_core::channels::generate_channel_set;
use rsjam_core::config::{ScenarioConfig, Scheme};
use rsjam_core::solver::*;
use rsjam_core::thresholds::assemble_thresholds;

fn acceptance_budget(scheme: Scheme) -> SolverConfig {
    let mut sc = SolverConfig::new(scheme);
    sc.zeta = 3.0;
    sc.saa_samples = 16;
    sc.max_outer = 10;
    sc.max_inner = 25;
    sc.eps_r = 5e-3;
    sc.eps_a = 1e-3;
    sc.sdp_tol = 1e-7;
    sc.sdp_max_iter = 60;
    sc.randomization_count = 8;
    sc
}

fn main() {
    let mut base = ScenarioConfig {
        nt: 4, num_su: 2, num_au: 1, num_pu: 1,
        pu_rx_antennas: vec![2], num_subcarriers: 8,
        pilot_sets: vec![vec![1, 5]],
        total_power: 100.0, noise_power: 1.0 / 8.0,
        alpha_i: 0.6, alpha_p: 0.6, rho: 0.45, mu: 0.5, rate_floor: 0.0,
        scheme: Scheme::RSMA, delay_spread: 0.5e-6, subcarrier_spacing: 60e3, seed: 42,
    };
    let t_all = Instant::now();
    for inst in 0..4u64 {
        for rho in [0.45, 0.9] {
            base.rho = rho;
            let channels = generate_channel_set(&base, inst).unwrap();
            let thresholds = assemble_thresholds(&base, &channels).unwrap();
            let t = Instant::now();
            let mut line = format!("inst {inst} rho {rho}: ");
            let mut rates = Vec::new();
            for scheme in [Scheme::RSMA, Scheme::SDMA, Scheme::NOMA] {
                let out = ao_admm_solve(&base, &channels, &thresholds, &acceptance_budget(scheme), inst).unwrap();
                line += &format!("{scheme} {:.4} (a {:.1e}) ", out.report.r_sum, out.audit.worst);
                rates.push(out.report.r_sum);
            }
            let margin = rates[0] - rates[1].max(rates[2]);
            line += &format!(" margin {margin:+.4}  [{:?}]", t.elapsed());
            println!("{line}");
        }
    }
    println!("total {:?}", t_all.elapsed());
}
