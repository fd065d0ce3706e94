//! Alternating-optimization consensus solver.
//!
//! The outer loop refreshes MMSE equalizers and weights at the current
//! iterate; the inner loop runs scaled-dual consensus splitting between a
//! closed-form weighted-MSE minimization and a projection onto the
//! constraint domain, solved through a semidefinite relaxation with
//! rank-one extraction.

pub mod problem;

use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;

use crate::channels::ChannelSet;
use crate::config::{ScenarioConfig, Scheme};
use crate::conic::{
    prox_quadratic_solve, rank_one_extract, sdp_solve, BlockMatrix, ExtractionContext,
    SdpProblem, SdpStatus,
};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::metrics::{
    jamming_power, mutual_information_from_error, rate_report, PrecoderSet, RateReport,
};
use crate::rng::{substream, StreamKind};
use crate::thresholds::{joint_witness, ThresholdSet};

pub use problem::{
    audit_precoders, build_problem, domain_eval, projection_program, smooth_objective,
    AuditReport, Layout, ProblemContext, ProjectionProgram, SchemeMask, WeightTable,
};

/// Tolerances and iteration budgets of one solve.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Consensus penalty.
    pub zeta: f64,
    /// Outer sum-rate tolerance.
    pub eps_r: f64,
    /// Inner residual tolerance.
    pub eps_a: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub saa_samples: usize,
    pub scheme: Scheme,
    /// Gaussian randomizations in the rank-one extraction.
    pub randomization_count: usize,
    /// Relative tolerance handed to the projection SDP.
    pub sdp_tol: f64,
    pub sdp_max_iter: usize,
}

impl SolverConfig {
    pub fn new(scheme: Scheme) -> SolverConfig {
        SolverConfig {
            zeta: 10.0,
            eps_r: 1e-3,
            eps_a: 1e-3,
            max_outer: 100,
            max_inner: 500,
            saa_samples: 32,
            scheme,
            randomization_count: 16,
            sdp_tol: 1e-8,
            sdp_max_iter: 80,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.zeta <= 0.0 || self.eps_r <= 0.0 || self.eps_a <= 0.0 || self.sdp_tol <= 0.0 {
            return Err(Error::Config("solver tolerances must be > 0".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.saa_samples == 0 {
            return Err(Error::Config("iteration budgets must be >= 1".into()));
        }
        Ok(())
    }
}

/// Stacked consensus state of the splitting iteration.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub v: Vec<CVec>,
    pub u: Vec<CVec>,
    pub w: Vec<CVec>,
    /// Latest primal residual blocks `v - u`.
    pub r: Vec<CVec>,
    /// Latest dual-change blocks `u_new - u_old`.
    pub q: Vec<CVec>,
    pub zeta: f64,
    pub inner_iter: usize,
    pub outer_iter: usize,
}

impl AdmmState {
    fn residual_norms(&self) -> (f64, f64) {
        let r: f64 = self.r.iter().map(|b| b.norm()).sum();
        let q: f64 = self.q.iter().map(|b| b.norm()).sum();
        (r, q)
    }
}

/// One trace row per inner iteration.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub outer: usize,
    pub inner: usize,
    pub sum_rate: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Result of one solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub precoders: PrecoderSet,
    pub report: RateReport,
    pub trace: Vec<TraceRow>,
    /// Outer loop met its sum-rate guard.
    pub converged: bool,
    /// Some inner loop exhausted `max_inner` above tolerance.
    pub inner_flag: bool,
    /// Physical-constraint audit of the returned precoders.
    pub audit: AuditReport,
    /// Allocated sum rate `(1/N) sum (c_bar + I_private)` at the solution.
    pub monitor_sum_rate: f64,
    /// For the two-user superposition scheme: which user rode the common
    /// stream in the winning order.
    pub common_user: Option<usize>,
}

/// Feasible starting point: maximum-ratio private precoders, jamming
/// witnesses on the pilot subcarriers, power split uniformly and scaled
/// into the interference caps.
fn initial_point(ctx: &ProblemContext, channels: &ChannelSet) -> Result<Vec<CVec>> {
    let cfg = &ctx.cfg;
    let lay = &ctx.layout;
    let n = lay.num_subcarriers;
    let mut set = PrecoderSet::zeros(lay.nt, lay.num_su, lay.num_au, n);
    let sigma_pe = channels.sigma_pe2.sqrt();

    let mut jam_total = 0.0;
    for l in 0..lay.num_au {
        let np = cfg.num_pilots(l);
        for &sc in &cfg.pilot_set_zero_based(l) {
            let witness = if cfg.num_pu > 0 {
                joint_witness(
                    cfg.rho,
                    cfg.total_power,
                    np,
                    lay.num_au,
                    &ctx.covariances[l][sc],
                    &ctx.phi[0][sc],
                    cfg.mu,
                    sigma_pe,
                )?
            } else {
                crate::thresholds::feasibility_witness(
                    cfg.rho,
                    cfg.total_power,
                    np,
                    lay.num_au,
                    &ctx.covariances[l][sc],
                )?
            };
            jam_total += witness.norm_squared();
            set.jamming[l][sc] = witness;
        }
    }

    let remaining = (cfg.total_power - jam_total).max(0.0);
    // active data-bearing streams per subcarrier under the mask
    let mut streams = 0usize;
    for k in 0..lay.num_su {
        if ctx.active[0].contains(&lay.private(k).start) {
            streams += 1;
        }
    }
    let common_user = match ctx.mask {
        SchemeMask::Noma { common_user } => Some(common_user),
        _ => None,
    };
    let common_active = ctx.active[0].contains(&lay.common().start);
    if common_active {
        streams += 1;
    }
    if streams > 0 && remaining > 0.0 {
        let per_stream = remaining / (n as f64 * streams as f64);
        for sc in 0..n {
            for k in 0..lay.num_su {
                if !ctx.active[sc].contains(&lay.private(k).start) {
                    continue;
                }
                let h = &channels.su_est[k][sc];
                let nrm = h.norm();
                if nrm > 1e-12 {
                    set.private[k][sc] = h * Complex64::new(per_stream.sqrt() / nrm, 0.0);
                }
            }
            if common_active {
                // superposition: the designated user's channel; otherwise the
                // principal direction of the summed estimate outer products,
                // which serves every user at once
                let dir = match common_user {
                    Some(j) => {
                        let h = &channels.su_est[j][sc];
                        let nrm = h.norm();
                        if nrm > 1e-12 {
                            h * Complex64::new(1.0 / nrm, 0.0)
                        } else {
                            CVec::zeros(lay.nt)
                        }
                    }
                    None => {
                        let mut acc = CMat::zeros(lay.nt, lay.nt);
                        for k in 0..lay.num_su {
                            let h = &channels.su_est[k][sc];
                            acc += h * h.adjoint();
                        }
                        let eig = crate::conic::hermitian_eig(&acc)?;
                        crate::conic::principal_eigenvector(&eig)
                    }
                };
                set.common[sc] = dir * Complex64::new(per_stream.sqrt(), 0.0);
            }
        }
    }

    // scale the data-bearing precoders into the interference caps
    for sc in 0..n {
        let mut scale = 1.0f64;
        for m in 0..cfg.num_pu {
            let phi = &ctx.phi[m][sc];
            let mut psi_jam = 0.0;
            for l in 0..lay.num_au {
                psi_jam += crate::linalg::quad_form(phi, &set.jamming[l][sc]);
            }
            let mut psi_data = crate::linalg::quad_form(phi, &set.common[sc]);
            for k in 0..lay.num_su {
                psi_data += crate::linalg::quad_form(phi, &set.private[k][sc]);
            }
            if psi_data > 1e-300 {
                let cap = ctx.thresholds.interference[m][sc];
                let slack = (cap - psi_jam).max(0.0);
                scale = scale.min((slack / psi_data).sqrt().min(1.0));
            }
        }
        if scale < 1.0 {
            let s = Complex64::new(scale, 0.0);
            set.common[sc] *= s;
            for k in 0..lay.num_su {
                set.private[k][sc] *= s;
            }
        }
    }

    // start the rate shares at the decodability cap so the common stream
    // carries rate from the first iteration
    if common_active {
        let n0 = cfg.noise_power;
        let s_count = ctx.saa_count() as f64;
        for sc in 0..n {
            let slice = set.slice(sc);
            let mut cap = f64::INFINITY;
            for k in 0..lay.num_su {
                let mut info = 0.0;
                for h in &ctx.samples[k][sc] {
                    let (_, eps) = crate::metrics::mmse_equalizer_and_error(
                        h,
                        &slice,
                        crate::metrics::Stream::Common { user: k },
                        n0,
                    )?;
                    info += mutual_information_from_error(eps)?;
                }
                cap = cap.min(info / s_count);
            }
            if !cap.is_finite() || cap < 0.0 {
                cap = 0.0;
            }
            let active_shares: Vec<usize> = (0..lay.num_su)
                .filter(|&k| ctx.active[sc].contains(&lay.share(k)))
                .collect();
            if !active_shares.is_empty() {
                let each = cap / active_shares.len() as f64;
                for &k in &active_shares {
                    set.common_shares[k][sc] = each;
                }
            }
        }
    }

    let mut u = ctx.encode(&set);
    ctx.apply_mask(&mut u);
    Ok(u)
}

/// Closed-form minimizer of `f(v) + (zeta/2) sum ||v_n - u_n + w_n||^2`.
fn v_update(
    ctx: &ProblemContext,
    smooth: &problem::SmoothObjective,
    u: &[CVec],
    w: &[CVec],
    zeta: f64,
) -> Result<Vec<CVec>> {
    let lay = &ctx.layout;
    let nt = lay.nt;
    let mut v = Vec::with_capacity(lay.num_subcarriers);
    for sc in 0..lay.num_subcarriers {
        let anchor = &u[sc] - &w[sc];
        let mut block = CVec::zeros(lay.block_len());
        // shares: unit linear cost, proximal closed form
        for k in 0..lay.num_su {
            let c = lay.share(k);
            if ctx.active[sc].contains(&c) {
                block[c] = Complex64::new(anchor[c].re - 1.0 / zeta, 0.0);
            }
        }
        // common precoder: not in the smooth objective, pure anchor
        if ctx.active[sc].contains(&lay.common().start) {
            for c in lay.common() {
                block[c] = anchor[c];
            }
        }
        // quadratic sub-blocks
        for (start, h) in &smooth.curvature[sc] {
            let a = CVec::from_fn(nt, |i, _| anchor[start + i]);
            let q = smooth.linear[sc]
                .iter()
                .find(|(s, _)| s == start)
                .map(|(_, q)| q.clone())
                .unwrap_or_else(|| CVec::zeros(nt));
            let x = prox_quadratic_solve(h, &q, &a, zeta)?;
            for i in 0..nt {
                block[start + i] = x[i];
            }
        }
        v.push(block);
    }
    Ok(v)
}

/// Projection of `z = v + w` onto the domain via semidefinite relaxation.
fn u_update(
    ctx: &ProblemContext,
    program: &ProjectionProgram,
    weights: &WeightTable,
    z: &[CVec],
    u_prev: &[CVec],
    solver_cfg: &SolverConfig,
    residual_scale: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<CVec>> {
    let feas_tol = 1e-6;
    // inexact early projections are fine for the splitting iteration; the
    // candidate gate keeps every accepted iterate inside the domain
    let sdp_tol = if residual_scale > 1.0 {
        solver_cfg.sdp_tol.max(1e-5)
    } else if residual_scale > 1e-2 {
        solver_cfg.sdp_tol.max(1e-6)
    } else {
        solver_cfg.sdp_tol
    };
    // projection of an interior point is the point itself
    let z_eval = domain_eval(ctx, weights, z)?;
    if z_eval.worst <= 1e-9 {
        return Ok(z.to_vec());
    }

    // objective ||u - z||^2 in lifted form
    let mut objective = BlockMatrix::zeros(program.block_dims.len());
    for sc in 0..ctx.layout.num_subcarriers {
        let lift = &program.lifts[sc];
        let d = lift.dim;
        let t = lift.t();
        let mut block = CMat::zeros(d, d);
        for coord in 0..ctx.layout.block_len() {
            if let Some(pos) = lift.position[coord] {
                block[(pos, pos)] = Complex64::new(1.0, 0.0);
                block[(pos, t)] = -z[sc][coord];
                block[(t, pos)] = -z[sc][coord].conj();
            }
        }
        objective.set(sc, block);
    }

    let sdp = SdpProblem::new_blocks(
        program.block_dims.clone(),
        objective,
        program.constraints.clone(),
    )?;
    let sol = sdp_solve(&sdp, sdp_tol, solver_cfg.sdp_max_iter)?;
    if sol.status == SdpStatus::Infeasible {
        return Err(Error::Infeasible(format!(
            "projection domain is empty; most violated family at the target: {}",
            z_eval.family
        )));
    }

    // candidate 1: homogenization column (the mean of the lifted variable)
    let mut column = vec![CVec::zeros(ctx.layout.block_len()); ctx.layout.num_subcarriers];
    for sc in 0..ctx.layout.num_subcarriers {
        let lift = &program.lifts[sc];
        let t = lift.t();
        let s = sol.s.block(sc).expect("block present");
        let tt = s[(t, t)].re.max(1e-12);
        for coord in 0..ctx.layout.block_len() {
            if let Some(pos) = lift.position[coord] {
                column[sc][coord] = s[(pos, t)] / tt;
            }
        }
    }
    sanitize_shares(ctx, &mut column);

    // candidate 2: per-block rank-one extraction, de-homogenized
    let mut extracted = column.clone();
    for sc in 0..ctx.layout.num_subcarriers {
        let lift = &program.lifts[sc];
        let t = lift.t();
        let s = sol.s.block(sc).expect("block present");
        let local: Vec<(CMat, crate::conic::Sense, f64)> = program
            .constraints
            .iter()
            .zip(program.families.iter())
            .filter_map(|(c, fam)| {
                if *fam == "qos" || *fam == "power" {
                    return None;
                }
                let touched: Vec<usize> = (0..c.matrix.blocks.len())
                    .filter(|&b| c.matrix.blocks[b].is_some())
                    .collect();
                if touched == [sc] {
                    Some((c.matrix.blocks[sc].clone().unwrap(), c.sense, c.bound))
                } else {
                    None
                }
            })
            .collect();
        let extraction_ctx = ExtractionContext {
            constraints: local,
            power_cap: None,
            objective: None,
        };
        let cand = rank_one_extract(s, &extraction_ctx, solver_cfg.randomization_count, rng)?;
        let y = cand.vector;
        let yt = y[t];
        if yt.norm() > 1e-6 * y.norm().max(1e-12) {
            for coord in 0..ctx.layout.block_len() {
                if let Some(pos) = lift.position[coord] {
                    extracted[sc][coord] = y[pos] / yt;
                }
            }
        }
    }
    sanitize_shares(ctx, &mut extracted);

    let mut candidates = vec![column.clone(), extracted.clone()];
    candidates.push(repair(ctx, weights, column)?);
    candidates.push(repair(ctx, weights, extracted)?);
    candidates.push(u_prev.to_vec());

    let objective_of = |u: &[CVec]| -> f64 {
        u.iter()
            .zip(z.iter())
            .map(|(a, b)| (a - b).norm_squared())
            .sum()
    };
    let mut best: Option<(f64, usize)> = None;
    for (i, cand) in candidates.iter().enumerate() {
        let eval = domain_eval(ctx, weights, cand)?;
        if eval.worst <= feas_tol {
            let obj = objective_of(cand);
            if best.map_or(true, |(b, _)| obj < b) {
                best = Some((obj, i));
            }
        }
    }
    match best {
        Some((_, i)) => Ok(candidates.swap_remove(i)),
        None => {
            let eval = domain_eval(ctx, weights, u_prev)?;
            Err(Error::Infeasible(format!(
                "no feasible projection candidate; worst violation {:.3e} in family {}",
                eval.worst, eval.family
            )))
        }
    }
}

/// Clamp share coordinates to real values (imaginary slack belongs to the
/// relaxation, not the iterate).
fn sanitize_shares(ctx: &ProblemContext, u: &mut [CVec]) {
    for sc in 0..ctx.layout.num_subcarriers {
        for k in 0..ctx.layout.num_su {
            let c = ctx.layout.share(k);
            u[sc][c] = Complex64::new(u[sc][c].re, 0.0);
        }
    }
}

/// Feasibility repair: clamp share signs, lift shares to the decodability
/// cap, and rescale each short jamming precoder up within the remaining
/// power budget.
fn repair(ctx: &ProblemContext, weights: &WeightTable, mut u: Vec<CVec>) -> Result<Vec<CVec>> {
    let lay = &ctx.layout;

    // share sign
    for sc in 0..lay.num_subcarriers {
        for k in 0..lay.num_su {
            let c = lay.share(k);
            if u[sc][c].re > 0.0 {
                u[sc][c] = Complex64::new(0.0, 0.0);
            }
        }
    }

    // decodability: sum_k X_k,n >= max_k xi_c,k,n - 1; raise shares evenly
    if !matches!(ctx.mask, SchemeMask::Sdma) {
        let set = ctx.decode(&u);
        let n0 = ctx.cfg.noise_power;
        let s_count = ctx.saa_count() as f64;
        for sc in 0..lay.num_subcarriers {
            let slice = set.slice(sc);
            let mut need = f64::NEG_INFINITY;
            for k in 0..lay.num_su {
                let mut xi = 0.0;
                for (s, entry) in weights[k][sc].iter().enumerate() {
                    let h = &ctx.samples[k][sc][s];
                    let hp = (h.adjoint() * slice.common)[(0, 0)];
                    let mut interf = 0.0;
                    for p in &slice.private {
                        interf += (h.adjoint() * *p)[(0, 0)].norm_sqr();
                    }
                    for f in &slice.jamming {
                        interf += (h.adjoint() * *f)[(0, 0)].norm_sqr();
                    }
                    let eps = (Complex64::new(1.0, 0.0) - entry.g_common * hp).norm_sqr()
                        + entry.g_common.norm_sqr() * (interf + n0);
                    xi += crate::metrics::wmse_bits(entry.w_common, eps) / s_count;
                }
                need = need.max(xi - 1.0);
            }
            let active_shares: Vec<usize> = (0..lay.num_su)
                .map(|k| lay.share(k))
                .filter(|c| ctx.active[sc].contains(c))
                .collect();
            if active_shares.is_empty() {
                continue;
            }
            let sum: f64 = active_shares.iter().map(|&c| u[sc][c].re).sum();
            if sum < need {
                let bump = (need - sum) / active_shares.len() as f64;
                for &c in &active_shares {
                    let lifted = (u[sc][c].re + bump).min(0.0);
                    u[sc][c] = Complex64::new(lifted, 0.0);
                }
            }
        }
    }

    // jamming floors: scale the owning jamming precoder up if the budget
    // allows
    let mut set = ctx.decode(&u);
    for l in 0..lay.num_au {
        for &sc in &ctx.cfg.pilot_set_zero_based(l) {
            let j_thr = ctx.thresholds.jamming[l][sc].expect("pilot threshold");
            let r = &ctx.covariances[l][sc];
            let total = jamming_power(r, &set.slice(sc))?;
            if total >= j_thr {
                continue;
            }
            let own = crate::linalg::quad_form(r, &set.jamming[l][sc]);
            if own <= 1e-12 {
                continue;
            }
            let t2 = (j_thr - (total - own)) / own;
            if t2 > 1.0 {
                let spare = ctx.cfg.total_power - set.total_power();
                let extra = (t2 - 1.0) * set.jamming[l][sc].norm_squared();
                if extra <= spare + 1e-9 {
                    set.jamming[l][sc] *= Complex64::new(t2.sqrt(), 0.0);
                    let enc = ctx.encode(&set);
                    for i in 0..lay.num_subcarriers {
                        for coord in lay.precoder_coords() {
                            u[i][coord] = enc[i][coord];
                        }
                    }
                    set = ctx.decode(&u);
                }
            }
        }
    }
    Ok(u)
}

/// Allocated sum rate `(1/N) sum_k,n (c_bar + I_private)` at an iterate,
/// averaged over the context's SAA draws.
pub fn sum_rate_monitor(ctx: &ProblemContext, u: &[CVec]) -> Result<f64> {
    let set = ctx.decode(u);
    let lay = &ctx.layout;
    let n0 = ctx.cfg.noise_power;
    let mut total = 0.0;
    for k in 0..lay.num_su {
        for sc in 0..lay.num_subcarriers {
            let slice = set.slice(sc);
            let mut info = 0.0;
            for h in &ctx.samples[k][sc] {
                let (_, eps) = crate::metrics::mmse_equalizer_and_error(
                    h,
                    &slice,
                    crate::metrics::Stream::Private { user: k },
                    n0,
                )?;
                info += mutual_information_from_error(eps)?;
            }
            total += set.common_shares[k][sc] + info / ctx.saa_count() as f64;
        }
    }
    Ok(total / lay.num_subcarriers as f64)
}

/// Run the alternating-optimization consensus loop on a prepared context.
/// `init` overrides the default witness-based starting point.
fn solve_context(
    ctx: &ProblemContext,
    channels: &ChannelSet,
    solver_cfg: &SolverConfig,
    realization: u64,
    init: Option<Vec<CVec>>,
) -> Result<SolveResult> {
    solver_cfg.validate()?;
    let zeta = solver_cfg.zeta;
    let n = ctx.layout.num_subcarriers;

    let u0 = match init {
        Some(u) => u,
        None => initial_point(ctx, channels)?,
    };
    let mut state = AdmmState {
        v: u0.clone(),
        u: u0.clone(),
        w: vec![CVec::zeros(ctx.layout.block_len()); n],
        r: vec![CVec::zeros(ctx.layout.block_len()); n],
        q: vec![CVec::zeros(ctx.layout.block_len()); n],
        zeta,
        inner_iter: 0,
        outer_iter: 0,
    };
    let mut u_hat = u0;
    let mut trace = Vec::new();
    let mut sum_rate = sum_rate_monitor(ctx, &u_hat)?;
    let mut sum_rate_prev = f64::NAN;
    let mut inner_flag = false;
    let mut converged = false;
    let mut rand_counter: u64 = 0;

    for outer in 0..solver_cfg.max_outer {
        state.outer_iter = outer;
        if outer > 0 && (sum_rate - sum_rate_prev).abs() <= solver_cfg.eps_r {
            converged = true;
            break;
        }
        let weights = ctx.weights_and_filters(&u_hat)?;
        let program = projection_program(ctx, &weights);
        let smooth = smooth_objective(ctx, &weights);

        let mut inner = 0;
        loop {
            let v = v_update(ctx, &smooth, &state.u, &state.w, zeta)?;
            let z: Vec<CVec> = v
                .iter()
                .zip(state.w.iter())
                .map(|(vn, wn)| vn + wn)
                .collect();
            let mut rng = substream(
                ctx.cfg.seed,
                StreamKind::Randomization,
                (realization << 20) ^ rand_counter,
            );
            rand_counter += 1;
            let res_scale = {
                let (r, q) = state.residual_norms();
                if inner == 0 {
                    f64::INFINITY
                } else {
                    r + q
                }
            };
            let u_new = u_update(
                ctx,
                &program,
                &weights,
                &z,
                &state.u,
                solver_cfg,
                res_scale,
                &mut rng,
            )?;
            for sc in 0..n {
                state.r[sc] = &v[sc] - &u_new[sc];
                state.q[sc] = &u_new[sc] - &state.u[sc];
                state.w[sc] += &state.r[sc];
            }
            state.v = v;
            state.u = u_new;
            inner += 1;
            state.inner_iter = inner;
            let (r_norm, q_norm) = state.residual_norms();
            trace.push(TraceRow {
                outer,
                inner,
                sum_rate,
                primal_residual: r_norm,
                dual_residual: q_norm,
            });
            if r_norm <= solver_cfg.eps_a && q_norm <= solver_cfg.eps_a {
                break;
            }
            if inner >= solver_cfg.max_inner {
                inner_flag = true;
                break;
            }
        }
        u_hat = state.u.clone();
        sum_rate_prev = sum_rate;
        sum_rate = sum_rate_monitor(ctx, &u_hat)?;
    }

    let precoders = ctx.decode(&u_hat);
    let audit = audit_precoders(ctx, &precoders)?;
    let report = rate_report(&ctx.cfg, channels, &precoders, solver_cfg.saa_samples)?;
    Ok(SolveResult {
        precoders,
        report,
        trace,
        converged,
        inner_flag,
        audit,
        monitor_sum_rate: sum_rate,
        common_user: match ctx.mask {
            SchemeMask::Noma { common_user } => Some(common_user),
            _ => None,
        },
    })
}

/// Solve one scenario realization under the configured scheme. The
/// two-user superposition scheme solves both stream assignments and keeps
/// the better sum rate.
pub fn ao_admm_solve(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    thresholds: &ThresholdSet,
    solver_cfg: &SolverConfig,
    realization: u64,
) -> Result<SolveResult> {
    match solver_cfg.scheme {
        Scheme::RSMA => {
            let ctx = build_problem(
                cfg,
                channels,
                thresholds,
                SchemeMask::Rsma,
                solver_cfg.saa_samples,
            )?;
            solve_context(&ctx, channels, solver_cfg, realization, None)
        }
        Scheme::SDMA => {
            let ctx = build_problem(
                cfg,
                channels,
                thresholds,
                SchemeMask::Sdma,
                solver_cfg.saa_samples,
            )?;
            solve_context(&ctx, channels, solver_cfg, realization, None)
        }
        Scheme::NOMA => {
            if cfg.num_su != 2 {
                return Err(Error::Config(
                    "the superposition scheme requires exactly two users".into(),
                ));
            }
            // weaker estimated channel rides the common stream first; the
            // flipped order is solved as well and the better result kept
            let ctx0 = build_problem(
                cfg,
                channels,
                thresholds,
                SchemeMask::Noma { common_user: 0 },
                solver_cfg.saa_samples,
            )?;
            let primary = if ctx0.est_norms[0] <= ctx0.est_norms[1] {
                0
            } else {
                1
            };
            let mut results = Vec::with_capacity(2);
            for user in [primary, 1 - primary] {
                let ctx = build_problem(
                    cfg,
                    channels,
                    thresholds,
                    SchemeMask::Noma { common_user: user },
                    solver_cfg.saa_samples,
                )?;
                results.push(solve_context(
                    &ctx,
                    channels,
                    solver_cfg,
                    realization ^ ((user as u64 + 1) << 40),
                    None,
                )?);
            }
            let (a, b) = (results.remove(0), results.remove(0));
            Ok(if b.report.r_sum > a.report.r_sum { b } else { a })
        }
    }
}

/// Full-scheme solve with warm starts: baseline scheme solutions embed as
/// feasible points of the full scheme (zero common stream for the
/// private-only baseline; one-user common stream for superposition), so a
/// short refinement from the best baseline can only improve on it. Returns
/// the best of the default solve and the refinements.
pub fn ao_admm_solve_warm(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    thresholds: &ThresholdSet,
    solver_cfg: &SolverConfig,
    realization: u64,
    warm_starts: &[&PrecoderSet],
) -> Result<SolveResult> {
    if solver_cfg.scheme != Scheme::RSMA {
        return Err(Error::Config(
            "warm-started solves are defined for the full scheme only".into(),
        ));
    }
    let mut best = ao_admm_solve(cfg, channels, thresholds, solver_cfg, realization)?;
    let ctx = build_problem(
        cfg,
        channels,
        thresholds,
        SchemeMask::Rsma,
        solver_cfg.saa_samples,
    )?;
    for (i, warm) in warm_starts.iter().enumerate() {
        let mut u = ctx.encode(warm);
        ctx.apply_mask(&mut u);
        // embedded baselines are already near-stationary; a short outer
        // budget suffices to pick up whatever common-stream rate remains
        let mut refine_cfg = solver_cfg.clone();
        refine_cfg.max_outer = solver_cfg.max_outer.min(4);
        let refined = solve_context(
            &ctx,
            channels,
            &refine_cfg,
            realization ^ ((i as u64 + 1) << 52),
            Some(u),
        )?;
        if refined.report.r_sum > best.report.r_sum {
            best = refined;
        }
    }
    Ok(best)
}

/// Trace CSV: `outer_iter,inner_iter,sum_rate,primal_residual,dual_residual`.
pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("outer_iter,inner_iter,sum_rate,primal_residual,dual_residual\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{:.12e},{:.12e},{:.12e}\n",
            row.outer, row.inner, row.sum_rate, row.primal_residual, row.dual_residual
        ));
    }
    out
}

/// Binary serialization of a precoder set for link-level reuse.
pub fn precoders_to_bytes(set: &PrecoderSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"RSJPREC1");
    let dims = [
        set.num_subcarriers() as u64,
        set.num_su() as u64,
        set.num_au() as u64,
        set.common[0].len() as u64,
    ];
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    fn push_vec(v: &CVec, out: &mut Vec<u8>) {
        for z in v.iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    for sc in 0..set.num_subcarriers() {
        push_vec(&set.common[sc], &mut out);
    }
    for per_k in &set.private {
        for v in per_k {
            push_vec(v, &mut out);
        }
    }
    for per_l in &set.jamming {
        for v in per_l {
            push_vec(v, &mut out);
        }
    }
    for per_k in &set.common_shares {
        for &c in per_k {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests;
