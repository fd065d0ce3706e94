use std::time::Instant;

use num_complex::Complex64;
use rsjam_core::channels::generate_channel_set;
use rsjam_core::config::{ScenarioConfig, Scheme};
use rsjam_core::conic::{hermitian_eig, sdp_solve, SdpProblem};
use rsjam_core::linalg::CVec;
use rsjam_core::solver::*;
use rsjam_core::thresholds::assemble_thresholds;

fn main() {
    // acceptance desk scale: Nt=4, K=2, L=1, M=1, N=8, Np=2
    let cfg = ScenarioConfig {
        nt: 4,
        num_su: 2,
        num_au: 1,
        num_pu: 1,
        pu_rx_antennas: vec![2],
        num_subcarriers: 8,
        pilot_sets: vec![vec![1, 5]],
        total_power: 100.0,
        noise_power: 1.0 / 8.0,
        alpha_i: 0.6,
        alpha_p: 0.6,
        rho: 0.45,
        mu: 0.5,
        rate_floor: 0.0,
        scheme: Scheme::RSMA,
        delay_spread: 0.5e-6,
        subcarrier_spacing: 60e3,
        seed: 42,
    };
    let channels = generate_channel_set(&cfg, 0).unwrap();
    let thresholds = assemble_thresholds(&cfg, &channels).unwrap();
    let ctx = build_problem(&cfg, &channels, &thresholds, SchemeMask::Rsma, 16).unwrap();

    let t0 = Instant::now();
    let u0 = {
        // reuse the internal init through one tiny solve step: build directly
        let mut solver_cfg = SolverConfig::new(Scheme::RSMA);
        solver_cfg.max_outer = 1;
        solver_cfg.max_inner = 1;
        solver_cfg.saa_samples = 16;
        let out = ao_admm_solve(&cfg, &channels, &thresholds, &solver_cfg, 0).unwrap();
        drop(out);
        Instant::now()
    };
    println!("one-inner-iteration solve: {:?}", u0.duration_since(t0));

    // time the raw SDP at this scale
    let weights_probe = {
        let zero = vec![CVec::zeros(ctx.layout.block_len()); 8];
        ctx.weights_and_filters(&zero).unwrap()
    };
    let program = projection_program(&ctx, &weights_probe);
    println!(
        "program: {} constraints, block dims {:?}",
        program.constraints.len(),
        program.block_dims
    );
    let mut objective = rsjam_core::conic::BlockMatrix::zeros(program.block_dims.len());
    for sc in 0..8 {
        let d = program.lifts[sc].dim;
        let t = program.lifts[sc].t();
        let mut block = rsjam_core::linalg::CMat::zeros(d, d);
        for coord in 0..ctx.layout.block_len() {
            if let Some(pos) = program.lifts[sc].position[coord] {
                block[(pos, pos)] = Complex64::new(1.0, 0.0);
                block[(pos, t)] = Complex64::new(-0.3, 0.1);
                block[(t, pos)] = Complex64::new(-0.3, -0.1);
            }
        }
        objective.set(sc, block);
    }
    let prob = SdpProblem::new_blocks(
        program.block_dims.clone(),
        objective,
        program.constraints.clone(),
    )
    .unwrap();
    let t1 = Instant::now();
    let sol = sdp_solve(&prob, 1e-8, 80).unwrap();
    let dt = t1.elapsed();
    println!(
        "sdp_solve: {:?} status {:?} iters {} gap {:.2e}",
        dt, sol.status, sol.iterations, sol.duality_gap
    );
    for sc in [0usize, 1] {
        let s = sol.s.block(sc).unwrap();
        let eig = hermitian_eig(s).unwrap();
        println!(
            "block {sc}: lam0 {:.3e} lam1 {:.3e} quality {:.3}",
            eig.values[0],
            eig.values[1],
            eig.values[0] / eig.values.iter().map(|v| v.max(0.0)).sum::<f64>()
        );
    }
}
