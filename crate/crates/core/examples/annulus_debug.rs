use num_complex::Complex64;
use rsjam_core::channels::ChannelSet;
use rsjam_core::config::{ScenarioConfig, Scheme};
use rsjam_core::conic::{hermitian_eig, sdp_solve, BlockMatrix, SdpProblem};
use rsjam_core::linalg::{CMat, CVec};
use rsjam_core::rng::{complex_gaussian, substream, StreamKind};
use rsjam_core::solver::*;
use rsjam_core::thresholds::assemble_thresholds;

fn main() {
    let cfg = ScenarioConfig {
        nt: 3, num_su: 1, num_au: 1, num_pu: 0,
        pu_rx_antennas: vec![], num_subcarriers: 1,
        pilot_sets: vec![vec![1]], total_power: 12.5, noise_power: 1.0,
        alpha_i: 0.6, alpha_p: 0.6, rho: 0.45, mu: 0.5, rate_floor: 0.0,
        scheme: Scheme::RSMA, delay_spread: 1e-9, subcarrier_spacing: 60e3, seed: 2,
    };
    let mut rng = substream(3, StreamKind::Channels, 0);
    let h = CVec::from_fn(3, |_, _| complex_gaussian(&mut rng));
    let channels = ChannelSet {
        su_true: vec![vec![h.clone()]], su_est: vec![vec![h]], sigma_ie2: 0.0,
        pu_true: vec![], pu_est: vec![], sigma_pe2: 0.0,
        au_true: vec![vec![CVec::zeros(3)]], au_cov: vec![vec![CMat::identity(3, 3)]],
    };
    let thresholds = assemble_thresholds(&cfg, &channels).unwrap();
    let ctx = build_problem(&cfg, &channels, &thresholds, SchemeMask::Rsma, 1).unwrap();
    let zero = vec![CVec::zeros(ctx.layout.block_len()); 1];
    let weights = ctx.weights_and_filters(&zero).unwrap();
    let program = projection_program(&ctx, &weights);
    println!("families: {:?}", program.families);
    for (c, fam) in program.constraints.iter().zip(program.families.iter()) {
        println!("--- {fam}: sense {:?} bound {:.4}", c.sense, c.bound);
        if let Some(b) = c.matrix.block(0) {
            println!("{:.3}", b);
        }
    }
    // objective: z = f-block e1
    let f_start = ctx.layout.jamming(0).start;
    let mut z = vec![CVec::zeros(ctx.layout.block_len()); 1];
    z[0][f_start] = Complex64::new(1.0, 0.0);
    let lift = &program.lifts[0];
    let d = lift.dim;
    let t = lift.t();
    let mut block = CMat::zeros(d, d);
    for coord in 0..ctx.layout.block_len() {
        if let Some(pos) = lift.position[coord] {
            block[(pos, pos)] = Complex64::new(1.0, 0.0);
            block[(pos, t)] = -z[0][coord];
            block[(t, pos)] = -z[0][coord].conj();
        }
    }
    let mut objective = BlockMatrix::zeros(1);
    objective.set(0, block);
    let prob = SdpProblem::new_blocks(program.block_dims.clone(), objective, program.constraints.clone()).unwrap();
    let sol = sdp_solve(&prob, 1e-9, 150).unwrap();
    println!("status {:?} iters {} obj {:.6} presid {:.2e} dresid {:.2e} gap {:.2e}",
        sol.status, sol.iterations, sol.objective_value, sol.primal_residual, sol.dual_residual, sol.duality_gap);
    let s = sol.s.block(0).unwrap();
    let eig = hermitian_eig(s).unwrap();
    println!("eigs: {:?}", &eig.values[..4.min(eig.values.len())]);
    println!("S_tt {:.6}", s[(t, t)].re);
    print!("column: ");
    for coord in 0..ctx.layout.block_len() {
        if let Some(pos) = lift.position[coord] {
            print!("{:.3}{:+.3}i  ", s[(pos, t)].re, s[(pos, t)].im);
        }
    }
    println!();
    // diag second moments
    print!("diag:   ");
    for coord in 0..ctx.layout.block_len() {
        if let Some(pos) = lift.position[coord] {
            print!("{:.4}  ", s[(pos, pos)].re);
        }
    }
    println!();
}
