use std::time::Instant;

use rsjam_core::channels::generate_channel_set;
use rsjam_core::config::{ScenarioConfig, Scheme};
use rsjam_core::solver::*;
use rsjam_core::thresholds::assemble_thresholds;

fn main() {
    let cfg = ScenarioConfig {
        nt: 4, num_su: 2, num_au: 1, num_pu: 1,
        pu_rx_antennas: vec![2], num_subcarriers: 8,
        pilot_sets: vec![vec![1, 5]],
        total_power: 100.0, noise_power: 1.0 / 8.0,
        alpha_i: 0.6, alpha_p: 0.6, rho: 0.45, mu: 0.5, rate_floor: 0.0,
        scheme: Scheme::RSMA, delay_spread: 0.5e-6, subcarrier_spacing: 60e3, seed: 42,
    };
    let channels = generate_channel_set(&cfg, 0).unwrap();
    let thresholds = assemble_thresholds(&cfg, &channels).unwrap();

    for zeta in [1.0, 3.0, 10.0, 30.0, 100.0] {
        let mut solver_cfg = SolverConfig::new(Scheme::RSMA);
        solver_cfg.zeta = zeta;
        solver_cfg.saa_samples = 16;
        solver_cfg.max_outer = 8;
        solver_cfg.max_inner = 40;
        solver_cfg.sdp_tol = 1e-7;
        solver_cfg.sdp_max_iter = 60;
        solver_cfg.randomization_count = 8;
        let t = Instant::now();
        let out = ao_admm_solve(&cfg, &channels, &thresholds, &solver_cfg, 0).unwrap();
        let dt = t.elapsed();
        let last = out.trace.last().unwrap();
        println!(
            "zeta {zeta:>5}: {dt:?} r_sum {:.6} inners {} conv {} flag {} last r {:.2e} q {:.2e}",
            out.report.r_sum, out.trace.len(), out.converged, out.inner_flag,
            last.primal_residual, last.dual_residual
        );
    }
}
