use super::*;
use rand::Rng;
use crate::channels::generate_channel_set;
use crate::config::Scheme;
use crate::linalg::quad_form;
use crate::metrics::wmse_bits;
use crate::rng::{complex_gaussian, substream, StreamKind};
use crate::thresholds::assemble_thresholds;

fn desk_cfg() -> ScenarioConfig {
    ScenarioConfig {
        nt: 4,
        num_su: 2,
        num_au: 1,
        num_pu: 1,
        pu_rx_antennas: vec![2],
        num_subcarriers: 4,
        pilot_sets: vec![vec![1, 3]],
        total_power: 100.0,
        noise_power: 0.25,
        alpha_i: 0.6,
        alpha_p: 0.6,
        rho: 0.45,
        mu: 0.5,
        rate_floor: 0.0,
        scheme: Scheme::RSMA,
        delay_spread: 0.5e-6,
        subcarrier_spacing: 60e3,
        seed: 5,
    }
}

fn fast_solver(scheme: Scheme) -> SolverConfig {
    let mut sc = SolverConfig::new(scheme);
    sc.saa_samples = 4;
    sc.max_outer = 6;
    sc.max_inner = 20;
    sc.sdp_tol = 1e-7;
    sc.randomization_count = 4;
    sc
}

fn build_ctx(cfg: &ScenarioConfig, mask: SchemeMask, saa: usize) -> (ProblemContext, ChannelSet) {
    let channels = generate_channel_set(cfg, 0).unwrap();
    let thresholds = assemble_thresholds(cfg, &channels).unwrap();
    let ctx = build_problem(cfg, &channels, &thresholds, mask, saa).unwrap();
    (ctx, channels)
}

/// Hand-built flat scenario with identity AU covariance for analytic
/// projection checks: one SU, one AU, no PUs, one subcarrier.
fn annulus_ctx() -> (ProblemContext, ChannelSet) {
    let cfg = ScenarioConfig {
        nt: 3,
        num_su: 1,
        num_au: 1,
        num_pu: 0,
        pu_rx_antennas: vec![],
        num_subcarriers: 1,
        pilot_sets: vec![vec![1]],
        total_power: 12.5,
        noise_power: 1.0,
        alpha_i: 0.6,
        alpha_p: 0.6,
        rho: 0.45,
        mu: 0.5,
        rate_floor: 0.0,
        scheme: Scheme::RSMA,
        delay_spread: 1e-9,
        subcarrier_spacing: 60e3,
        seed: 2,
    };
    let mut rng = substream(3, StreamKind::Channels, 0);
    let h = CVec::from_fn(3, |_, _| complex_gaussian(&mut rng));
    let channels = ChannelSet {
        su_true: vec![vec![h.clone()]],
        su_est: vec![vec![h]],
        sigma_ie2: 0.0,
        pu_true: vec![],
        pu_est: vec![],
        sigma_pe2: 0.0,
        au_true: vec![vec![CVec::zeros(3)]],
        au_cov: vec![vec![CMat::identity(3, 3)]],
    };
    let thresholds = assemble_thresholds(&cfg, &channels).unwrap();
    // rho * Pt * sigma_max / (Np L) = 0.45 * 12.5 = 5.625
    assert!((thresholds.jamming[0][0].unwrap() - 5.625).abs() < 1e-12);
    let ctx = build_problem(&cfg, &channels, &thresholds, SchemeMask::Rsma, 1).unwrap();
    (ctx, channels)
}

#[test]
fn masks_shrink_the_variable_count_as_specified() {
    let cfg = desk_cfg();
    let (rsma, _) = build_ctx(&cfg, SchemeMask::Rsma, 2);
    let (sdma, _) = build_ctx(&cfg, SchemeMask::Sdma, 2);
    // pilot subcarrier 0 carries the jamming block
    let full = rsma.active[0].len();
    let reduced = sdma.active[0].len();
    assert_eq!(full - reduced, cfg.nt + cfg.num_su);
    // stacking formula: K + Nt (K + L + 1) complex coordinates
    assert_eq!(rsma.layout.block_len(), 2 + 4 * 4);
    assert_eq!(full, 2 + 4 * 4);
    // data subcarrier drops the jamming block
    assert_eq!(rsma.active[1].len(), full - cfg.nt);
}

#[test]
fn weights_on_zero_precoders_are_neutral() {
    let (ctx, _) = build_ctx(&desk_cfg(), SchemeMask::Rsma, 3);
    let zero = vec![CVec::zeros(ctx.layout.block_len()); ctx.layout.num_subcarriers];
    let table = ctx.weights_and_filters(&zero).unwrap();
    for per_sc in &table {
        for per_sample in per_sc {
            for e in per_sample {
                assert_eq!(e.g_common.norm(), 0.0);
                assert_eq!(e.g_private.norm(), 0.0);
                assert!((e.w_common - 1.0).abs() < 1e-12);
                assert!((e.w_private - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn optimal_weights_satisfy_the_wmse_identity() {
    let (ctx, channels) = build_ctx(&desk_cfg(), SchemeMask::Rsma, 3);
    let u0 = initial_point(&ctx, &channels).unwrap();
    let table = ctx.weights_and_filters(&u0).unwrap();
    let set = ctx.decode(&u0);
    let n0 = ctx.cfg.noise_power;
    for k in 0..ctx.layout.num_su {
        for sc in 0..ctx.layout.num_subcarriers {
            let slice = set.slice(sc);
            for (s, e) in table[k][sc].iter().enumerate() {
                let h = &ctx.samples[k][sc][s];
                let (_, eps) = crate::metrics::mmse_equalizer_and_error(
                    h,
                    &slice,
                    crate::metrics::Stream::Private { user: k },
                    n0,
                )
                .unwrap();
                let info = mutual_information_from_error(eps).unwrap();
                let xi = wmse_bits(e.w_private, eps);
                assert!((xi - (1.0 - info)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn v_update_reduces_to_anchor_for_zero_channels() {
    // zero estimates and zero error variance make every SAA draw zero
    let cfg = ScenarioConfig {
        nt: 2,
        num_su: 1,
        num_au: 0,
        num_pu: 0,
        pu_rx_antennas: vec![],
        num_subcarriers: 2,
        pilot_sets: vec![],
        total_power: 4.0,
        noise_power: 1.0,
        alpha_i: 0.6,
        alpha_p: 0.6,
        rho: 0.0,
        mu: 0.0,
        rate_floor: 0.0,
        scheme: Scheme::RSMA,
        delay_spread: 1e-9,
        subcarrier_spacing: 60e3,
        seed: 1,
    };
    let channels = ChannelSet {
        su_true: vec![vec![CVec::zeros(2), CVec::zeros(2)]],
        su_est: vec![vec![CVec::zeros(2), CVec::zeros(2)]],
        sigma_ie2: 0.0,
        pu_true: vec![],
        pu_est: vec![],
        sigma_pe2: 0.0,
        au_true: vec![],
        au_cov: vec![],
    };
    let thresholds = assemble_thresholds(&cfg, &channels).unwrap();
    let ctx = build_problem(&cfg, &channels, &thresholds, SchemeMask::Rsma, 2).unwrap();
    let weights = ctx
        .weights_and_filters(&vec![CVec::zeros(ctx.layout.block_len()); 2])
        .unwrap();
    let smooth = smooth_objective(&ctx, &weights);

    let mut rng = substream(9, StreamKind::Randomization, 0);
    let u: Vec<CVec> = (0..2)
        .map(|_| CVec::from_fn(ctx.layout.block_len(), |_, _| complex_gaussian(&mut rng)))
        .collect();
    let w: Vec<CVec> = (0..2)
        .map(|_| CVec::from_fn(ctx.layout.block_len(), |_, _| complex_gaussian(&mut rng)))
        .collect();
    let zeta = 3.0;
    let v = v_update(&ctx, &smooth, &u, &w, zeta).unwrap();
    for sc in 0..2 {
        let anchor = &u[sc] - &w[sc];
        for c in ctx.layout.precoder_coords() {
            assert!((v[sc][c] - anchor[c]).norm() < 1e-12);
        }
        let c = ctx.layout.share(0);
        assert!((v[sc][c].re - (anchor[c].re - 1.0 / zeta)).abs() < 1e-12);
    }
}

#[test]
fn v_update_with_huge_penalty_sticks_to_the_anchor() {
    let (ctx, channels) = build_ctx(&desk_cfg(), SchemeMask::Rsma, 3);
    let u0 = initial_point(&ctx, &channels).unwrap();
    let weights = ctx.weights_and_filters(&u0).unwrap();
    let smooth = smooth_objective(&ctx, &weights);
    let w = vec![CVec::zeros(ctx.layout.block_len()); ctx.layout.num_subcarriers];
    let v = v_update(&ctx, &smooth, &u0, &w, 1e9).unwrap();
    for sc in 0..ctx.layout.num_subcarriers {
        let anchor = &u0[sc];
        let denom = anchor.norm().max(1.0);
        assert!((&v[sc] - anchor).norm() / denom < 1e-6);
    }
}

#[test]
fn v_update_is_locally_optimal() {
    let (ctx, channels) = build_ctx(&desk_cfg(), SchemeMask::Rsma, 2);
    let u0 = initial_point(&ctx, &channels).unwrap();
    let weights = ctx.weights_and_filters(&u0).unwrap();
    let smooth = smooth_objective(&ctx, &weights);
    let w = vec![CVec::zeros(ctx.layout.block_len()); ctx.layout.num_subcarriers];
    let zeta = 5.0;
    let v = v_update(&ctx, &smooth, &u0, &w, zeta).unwrap();

    // objective value: smooth quadratics plus proximal term over active
    // coordinates (constants dropped)
    let objective = |x: &Vec<CVec>| -> f64 {
        let mut acc = 0.0;
        for sc in 0..ctx.layout.num_subcarriers {
            for (start, h) in &smooth.curvature[sc] {
                let sub = CVec::from_fn(ctx.layout.nt, |i, _| x[sc][start + i]);
                acc += 0.5 * quad_form(h, &sub);
            }
            for (start, q) in &smooth.linear[sc] {
                let sub = CVec::from_fn(ctx.layout.nt, |i, _| x[sc][start + i]);
                acc += (q.adjoint() * &sub)[(0, 0)].re;
            }
            for k in 0..ctx.layout.num_su {
                let c = ctx.layout.share(k);
                if ctx.active[sc].contains(&c) {
                    acc += x[sc][c].re;
                }
            }
            let anchor = &u0[sc];
            for &c in &ctx.active[sc] {
                acc += 0.5 * zeta * (x[sc][c] - anchor[c]).norm_sqr();
            }
        }
        acc
    };
    let base = objective(&v);
    let mut rng = substream(10, StreamKind::Randomization, 0);
    for _ in 0..1000 {
        let mut pert = v.clone();
        for sc in 0..ctx.layout.num_subcarriers {
            for &c in &ctx.active[sc] {
                if c < ctx.layout.num_su {
                    pert[sc][c] += Complex64::new(1e-4 * (rng.random::<f64>() - 0.5), 0.0);
                } else {
                    pert[sc][c] += complex_gaussian(&mut rng) * Complex64::new(1e-4, 0.0);
                }
            }
        }
        assert!(objective(&pert) >= base - 1e-10);
    }
}

#[test]
fn u_update_is_identity_on_feasible_targets() {
    let (ctx, channels) = annulus_ctx();
    let u0 = initial_point(&ctx, &channels).unwrap();
    let weights = ctx.weights_and_filters(&u0).unwrap();
    let program = projection_program(&ctx, &weights);
    let solver_cfg = fast_solver(Scheme::RSMA);
    let mut rng = substream(11, StreamKind::Randomization, 0);
    // the witness-based start is feasible, so projecting it changes nothing
    let u = u_update(&ctx, &program, &weights, &u0, &u0, &solver_cfg, 0.0, &mut rng).unwrap();
    for sc in 0..ctx.layout.num_subcarriers {
        assert!((&u[sc] - &u0[sc]).norm() < 1e-12);
    }
}

#[test]
fn u_update_projects_onto_the_jamming_annulus() {
    let (ctx, channels) = annulus_ctx();
    let u0 = initial_point(&ctx, &channels).unwrap();
    // weights at silence: neutral filters, so the iteration-local rows are
    // degenerate and the pure annulus geometry drives the projection
    let zero = vec![CVec::zeros(ctx.layout.block_len()); 1];
    let weights = ctx.weights_and_filters(&zero).unwrap();
    let _ = &channels;
    let program = projection_program(&ctx, &weights);
    let mut solver_cfg = fast_solver(Scheme::RSMA);
    solver_cfg.sdp_tol = 1e-9;
    solver_cfg.sdp_max_iter = 150;

    // target: f along e1 with squared norm 1, everything else zero;
    // the closest feasible point rescales f to the 5.625 floor
    let mut z = vec![CVec::zeros(ctx.layout.block_len()); 1];
    let f_start = ctx.layout.jamming(0).start;
    z[0][f_start] = Complex64::new(1.0, 0.0);
    let mut rng = substream(12, StreamKind::Randomization, 0);
    let u = u_update(&ctx, &program, &weights, &z, &u0, &solver_cfg, 0.0, &mut rng).unwrap();

    let f = CVec::from_fn(ctx.layout.nt, |i, _| u[0][f_start + i]);
    assert!(
        (f.norm_squared() - 5.625).abs() < 2e-3,
        "projected norm^2 {}",
        f.norm_squared()
    );
    // direction preserved: dominant component stays on the first coordinate
    assert!(f[0].re > 0.99 * f.norm());
    // everything else stays near zero
    for c in ctx.layout.common() {
        assert!(u[0][c].norm() < 1e-3);
    }
    for c in ctx.layout.private(0) {
        assert!(u[0][c].norm() < 1e-3);
    }
}

#[test]
fn dual_updates_and_residual_replay() {
    let (ctx, channels) = build_ctx(&desk_cfg(), SchemeMask::Rsma, 2);
    let u0 = initial_point(&ctx, &channels).unwrap();
    let n = ctx.layout.num_subcarriers;

    // v = u: residual zero, duals unchanged
    let mut w = vec![CVec::zeros(ctx.layout.block_len()); n];
    let r: Vec<CVec> = (0..n).map(|sc| &u0[sc] - &u0[sc]).collect();
    for sc in 0..n {
        w[sc] += &r[sc];
    }
    assert!(w.iter().all(|b| b.norm() == 0.0));

    // first iteration from w = 0 with v - u = delta gives w = delta
    let mut rng = substream(13, StreamKind::Randomization, 0);
    let delta: Vec<CVec> = (0..n)
        .map(|_| CVec::from_fn(ctx.layout.block_len(), |_, _| complex_gaussian(&mut rng)))
        .collect();
    let mut w = vec![CVec::zeros(ctx.layout.block_len()); n];
    for sc in 0..n {
        w[sc] += &delta[sc];
    }
    for sc in 0..n {
        assert_eq!((&w[sc] - &delta[sc]).norm(), 0.0);
    }
}

#[test]
fn full_solve_is_deterministic_and_audited() {
    let cfg = desk_cfg();
    let channels = generate_channel_set(&cfg, 0).unwrap();
    let thresholds = assemble_thresholds(&cfg, &channels).unwrap();
    let solver_cfg = fast_solver(Scheme::RSMA);
    let a = ao_admm_solve(&cfg, &channels, &thresholds, &solver_cfg, 0).unwrap();
    let b = ao_admm_solve(&cfg, &channels, &thresholds, &solver_cfg, 0).unwrap();
    assert_eq!(a.trace.len(), b.trace.len());
    for (x, y) in a.trace.iter().zip(b.trace.iter()) {
        assert_eq!(x.sum_rate.to_bits(), y.sum_rate.to_bits());
        assert_eq!(x.primal_residual.to_bits(), y.primal_residual.to_bits());
    }
    for sc in 0..cfg.num_subcarriers {
        assert_eq!((&a.precoders.common[sc] - &b.precoders.common[sc]).norm(), 0.0);
    }
    // returned solution satisfies the physical constraints
    assert!(a.audit.worst <= 1e-6, "audit {:?}", a.audit);
    a.precoders.validate(cfg.total_power).unwrap();
}

#[test]
fn zero_power_budget_returns_silence() {
    let mut cfg = desk_cfg();
    cfg.total_power = 0.0;
    let channels = generate_channel_set(&cfg, 0).unwrap();
    let thresholds = assemble_thresholds(&cfg, &channels).unwrap();
    let mut solver_cfg = fast_solver(Scheme::RSMA);
    solver_cfg.max_outer = 3;
    solver_cfg.max_inner = 5;
    let out = ao_admm_solve(&cfg, &channels, &thresholds, &solver_cfg, 0).unwrap();
    assert!(out.precoders.total_power() < 1e-9);
    assert!(out.report.r_sum < 1e-9);
}

#[test]
fn noma_order_choice_matches_exhaustive_comparison() {
    let mut cfg = desk_cfg();
    cfg.scheme = Scheme::NOMA;
    let channels = generate_channel_set(&cfg, 1).unwrap();
    let thresholds = assemble_thresholds(&cfg, &channels).unwrap();
    let solver_cfg = fast_solver(Scheme::NOMA);
    let combined = ao_admm_solve(&cfg, &channels, &thresholds, &solver_cfg, 1).unwrap();

    let mut best: Option<SolveResult> = None;
    for user in [0usize, 1] {
        let ctx = build_problem(
            &cfg,
            &channels,
            &thresholds,
            SchemeMask::Noma { common_user: user },
            solver_cfg.saa_samples,
        )
        .unwrap();
        let res = solve_context(
            &ctx,
            &channels,
            &solver_cfg,
            1 ^ ((user as u64 + 1) << 40),
            None,
        )
        .unwrap();
        if best.as_ref().map_or(true, |b| res.report.r_sum > b.report.r_sum) {
            best = Some(res);
        }
    }
    let best = best.unwrap();
    assert!((combined.report.r_sum - best.report.r_sum).abs() < 1e-9);
    assert_eq!(combined.common_user, best.common_user);
}

#[test]
fn single_user_reaches_the_matched_filter_rate() {
    // High SNR, effectively perfect CSIT: the matched-filter rate is the
    // optimum and the solver should land within a millibit.
    let cfg = ScenarioConfig {
        nt: 2,
        num_su: 1,
        num_au: 0,
        num_pu: 0,
        pu_rx_antennas: vec![],
        num_subcarriers: 1,
        pilot_sets: vec![],
        total_power: 10000.0,
        noise_power: 1.0,
        alpha_i: 1.0,
        alpha_p: 1.0,
        rho: 0.0,
        mu: 0.0,
        rate_floor: 0.0,
        scheme: Scheme::RSMA,
        delay_spread: 1e-9,
        subcarrier_spacing: 60e3,
        seed: 7,
    };
    let channels = generate_channel_set(&cfg, 0).unwrap();
    let thresholds = assemble_thresholds(&cfg, &channels).unwrap();
    let mut solver_cfg = SolverConfig::new(Scheme::RSMA);
    solver_cfg.saa_samples = 8;
    solver_cfg.eps_r = 1e-5;
    solver_cfg.eps_a = 1e-4;
    solver_cfg.max_outer = 60;
    solver_cfg.max_inner = 200;
    let out = ao_admm_solve(&cfg, &channels, &thresholds, &solver_cfg, 0).unwrap();

    // matched-filter oracle on the same SAA draws
    let ctx = build_problem(
        &cfg,
        &channels,
        &thresholds,
        SchemeMask::Rsma,
        solver_cfg.saa_samples,
    )
    .unwrap();
    let h_hat = &channels.su_est[0][0];
    let mut mrt = PrecoderSet::zeros(cfg.nt, 1, 0, 1);
    mrt.private[0][0] = h_hat * Complex64::new(cfg.total_power.sqrt() / h_hat.norm(), 0.0);
    let slice = mrt.slice(0);
    let mut oracle = 0.0;
    for h in &ctx.samples[0][0] {
        let (_, eps) = crate::metrics::mmse_equalizer_and_error(
            h,
            &slice,
            crate::metrics::Stream::Private { user: 0 },
            cfg.noise_power,
        )
        .unwrap();
        oracle += mutual_information_from_error(eps).unwrap();
    }
    oracle /= ctx.samples[0][0].len() as f64;

    assert!(
        out.report.r_sum >= oracle - 1e-3,
        "solver {} vs oracle {}",
        out.report.r_sum,
        oracle
    );
}
