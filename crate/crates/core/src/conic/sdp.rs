//! Dense semidefinite programming over Hermitian blocks.
//!
//! Solves `min tr(C S)` subject to `tr(A_i S) {<=,>=,=} b_i` and `S >= 0`
//! with a primal-dual path-following method (HKM direction, Mehrotra
//! predictor-corrector). The variable is block-diagonal Hermitian; problems
//! whose data only touches disjoint principal blocks can declare that
//! structure and pay per-block instead of full-dimension factorization cost.
//! Inequalities are handled through scalar slacks paired with the matrix
//! blocks in the complementarity system.

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitize, is_positive_definite, real_trace_product, require_hermitian, HermitianChol, CMat,
};

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Hermitian matrix stored per block; `None` blocks are zero.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    pub blocks: Vec<Option<CMat>>,
}

impl BlockMatrix {
    pub fn zeros(num_blocks: usize) -> Self {
        BlockMatrix {
            blocks: vec![None; num_blocks],
        }
    }

    pub fn single(m: CMat) -> Self {
        BlockMatrix {
            blocks: vec![Some(m)],
        }
    }

    pub fn set(&mut self, block: usize, m: CMat) {
        self.blocks[block] = Some(m);
    }

    pub fn block(&self, i: usize) -> Option<&CMat> {
        self.blocks[i].as_ref()
    }

    /// `Re tr(A B)` summed over blocks.
    pub fn inner(&self, other: &BlockMatrix) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.blocks.iter().zip(other.blocks.iter()) {
            if let (Some(a), Some(b)) = (a, b) {
                acc += real_trace_product(a, b);
            }
        }
        acc
    }

    pub fn frobenius(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(|m| m.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, factor: f64) {
        for b in self.blocks.iter_mut().flatten() {
            *b *= Complex64::new(factor, 0.0);
        }
    }

    fn active_blocks(&self) -> Vec<usize> {
        (0..self.blocks.len())
            .filter(|&i| self.blocks[i].is_some())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SdpConstraint {
    pub matrix: BlockMatrix,
    pub sense: Sense,
    pub bound: f64,
}

/// `min tr(C S)` over block-diagonal Hermitian `S >= 0`.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub objective: BlockMatrix,
    pub constraints: Vec<SdpConstraint>,
}

impl SdpProblem {
    /// Single dense block of dimension `d`.
    pub fn new(objective: CMat, constraints: Vec<(CMat, Sense, f64)>) -> Result<SdpProblem> {
        let d = objective.nrows();
        let mut prob = SdpProblem {
            block_dims: vec![d],
            objective: BlockMatrix::single(objective),
            constraints: constraints
                .into_iter()
                .map(|(m, sense, bound)| SdpConstraint {
                    matrix: BlockMatrix::single(m),
                    sense,
                    bound,
                })
                .collect(),
        };
        prob.validate()?;
        prob.hermitize_data();
        Ok(prob)
    }

    pub fn new_blocks(
        block_dims: Vec<usize>,
        objective: BlockMatrix,
        constraints: Vec<SdpConstraint>,
    ) -> Result<SdpProblem> {
        let mut prob = SdpProblem {
            block_dims,
            objective,
            constraints,
        };
        prob.validate()?;
        prob.hermitize_data();
        Ok(prob)
    }

    pub fn dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        if self.block_dims.is_empty() || self.dim() == 0 {
            return Err(Error::Dimension("SDP needs dimension >= 1".into()));
        }
        let check = |bm: &BlockMatrix, what: &str| -> Result<()> {
            if bm.blocks.len() != self.block_dims.len() {
                return Err(Error::Dimension(format!(
                    "{what}: expected {} blocks, got {}",
                    self.block_dims.len(),
                    bm.blocks.len()
                )));
            }
            for (i, b) in bm.blocks.iter().enumerate() {
                if let Some(m) = b {
                    if m.nrows() != self.block_dims[i] || m.ncols() != self.block_dims[i] {
                        return Err(Error::Dimension(format!(
                            "{what}: block {i} is {}x{}, expected {}",
                            m.nrows(),
                            m.ncols(),
                            self.block_dims[i]
                        )));
                    }
                    let scale = m.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
                    require_hermitian(m, 1e-12 * scale.max(1.0))?;
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            check(&c.matrix, &format!("constraint {i}"))?;
        }
        Ok(())
    }

    fn hermitize_data(&mut self) {
        for b in self.objective.blocks.iter_mut().flatten() {
            *b = hermitize(b);
        }
        for c in self.constraints.iter_mut() {
            for b in c.matrix.blocks.iter_mut().flatten() {
                *b = hermitize(b);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub s: BlockMatrix,
    pub status: SdpStatus,
    pub objective_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

impl SdpSolution {
    /// Solution matrix for single-block problems.
    pub fn matrix(&self) -> &CMat {
        self.s.blocks[0].as_ref().expect("block 0 present")
    }
}

struct DenseState {
    blocks: Vec<CMat>,
}

impl DenseState {
    fn identity(dims: &[usize], scale: f64) -> Self {
        DenseState {
            blocks: dims
                .iter()
                .map(|&d| CMat::identity(d, d) * Complex64::new(scale, 0.0))
                .collect(),
        }
    }

    fn zeros(dims: &[usize]) -> Self {
        DenseState {
            blocks: dims.iter().map(|&d| CMat::zeros(d, d)).collect(),
        }
    }

    fn inner(&self, other: &DenseState) -> f64 {
        self.blocks
            .iter()
            .zip(other.blocks.iter())
            .map(|(a, b)| real_trace_product(a, b))
            .sum()
    }

    fn inner_sparse(&self, sparse: &BlockMatrix) -> f64 {
        let mut acc = 0.0;
        for (i, b) in sparse.blocks.iter().enumerate() {
            if let Some(m) = b {
                acc += real_trace_product(&self.blocks[i], m);
            }
        }
        acc
    }

    fn frobenius(&self) -> f64 {
        self.blocks
            .iter()
            .map(|m| m.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    fn axpy_sparse(&mut self, alpha: f64, sparse: &BlockMatrix) {
        for (i, b) in sparse.blocks.iter().enumerate() {
            if let Some(m) = b {
                self.blocks[i] += m * Complex64::new(alpha, 0.0);
            }
        }
    }

    fn axpy(&mut self, alpha: f64, other: &DenseState) {
        for (dst, src) in self.blocks.iter_mut().zip(other.blocks.iter()) {
            *dst += src * Complex64::new(alpha, 0.0);
        }
    }

    fn hermitize_in_place(&mut self) {
        for b in self.blocks.iter_mut() {
            *b = hermitize(b);
        }
    }

    fn in_cone(&self) -> bool {
        self.blocks.iter().all(is_positive_definite)
    }
}

/// Largest step `alpha` in (0, 1] keeping `x + alpha dx` positive definite,
/// found by bisection on per-block Cholesky tests.
fn max_psd_step(x: &DenseState, dx: &DenseState) -> f64 {
    let trial = |alpha: f64| -> bool {
        x.blocks.iter().zip(dx.blocks.iter()).all(|(xb, db)| {
            if xb.nrows() == 0 {
                return true;
            }
            let cand = xb + db * Complex64::new(alpha, 0.0);
            is_positive_definite(&cand)
        })
    };
    if trial(1.0) {
        return 1.0;
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..25 {
        let mid = 0.5 * (lo + hi);
        if trial(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn slack_ratio_step(s: &[f64], ds: &[f64]) -> f64 {
    let mut alpha = 1.0f64;
    for (v, d) in s.iter().zip(ds.iter()) {
        if *d < 0.0 {
            alpha = alpha.min(-v / d);
        }
    }
    alpha
}

/// Solve the problem to relative tolerance `tol`.
pub fn sdp_solve(problem: &SdpProblem, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    let dims = &problem.block_dims;
    let nb = dims.len();
    let m = problem.constraints.len();

    // Normalized working copy: constraints scaled to unit Frobenius norm,
    // objective to unit norm. The solution S is scale-free.
    let obj_scale = problem.objective.frobenius().max(1.0);
    let mut c = problem.objective.clone();
    c.scale(1.0 / obj_scale);

    let mut cons: Vec<SdpConstraint> = problem.constraints.clone();
    let mut con_scales = vec![1.0f64; m];
    for (i, con) in cons.iter_mut().enumerate() {
        let s = con.matrix.frobenius().max(1e-12);
        con.matrix.scale(1.0 / s);
        con.bound /= s;
        con_scales[i] = s;
    }
    let kappa: Vec<f64> = cons
        .iter()
        .map(|c| match c.sense {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => 0.0,
        })
        .collect();
    let b: Vec<f64> = cons.iter().map(|c| c.bound).collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let c_norm = c.frobenius();

    let total_dim: usize = problem.dim() + kappa.iter().filter(|&&k| k != 0.0).count();

    // Starting point scales follow the data magnitudes.
    let bound_scale = b
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let tau_p = bound_scale.max((problem.dim() as f64).sqrt()) * 10.0;
    let tau_d = (1.0 + c_norm).max((problem.dim() as f64).sqrt()) * 10.0;

    let mut x = DenseState::identity(dims, tau_p);
    let mut z = DenseState::identity(dims, tau_d);
    let mut y = vec![0.0f64; m];
    let mut slack: Vec<f64> = kappa.iter().map(|&k| if k != 0.0 { tau_p } else { 0.0 }).collect();
    let mut zslack: Vec<f64> = kappa.iter().map(|&k| if k != 0.0 { tau_d } else { 0.0 }).collect();

    let active: Vec<Vec<usize>> = cons.iter().map(|c| c.matrix.active_blocks()).collect();

    let mut best: Option<(f64, SdpSolution)> = None;
    let mut diverge_count = 0usize;
    let mut prev_ynorm = 0.0f64;
    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0usize;

    for iter in 0..max_iter {
        iterations = iter + 1;
        // Z^{-1} per block via Cholesky.
        let mut zinv = DenseState::zeros(dims);
        for (i, zb) in z.blocks.iter().enumerate() {
            if zb.nrows() == 0 {
                continue;
            }
            let chol = match HermitianChol::new(zb) {
                Some(c) => c,
                None => {
                    // nudge back into the cone
                    let mut fixed = zb.clone();
                    let bump = 1e-12 * zb.norm().max(1.0);
                    for k in 0..fixed.nrows() {
                        fixed[(k, k)] += Complex64::new(bump, 0.0);
                    }
                    HermitianChol::new(&fixed).ok_or_else(|| {
                        Error::Numerical("dual iterate left the PSD cone".into())
                    })?
                }
            };
            zinv.blocks[i] = chol.inverse();
        }

        // Residuals.
        let mut rp = vec![0.0f64; m];
        for i in 0..m {
            rp[i] = b[i] - x.inner_sparse(&cons[i].matrix) - kappa[i] * slack[i];
        }
        let mut rd = DenseState::zeros(dims); // C - Z - sum y_i A_i
        rd.axpy_sparse(1.0, &c);
        rd.axpy(-1.0, &z);
        for i in 0..m {
            rd.axpy_sparse(-y[i], &cons[i].matrix);
        }
        let rd_slack: Vec<f64> = (0..m)
            .map(|i| {
                if kappa[i] != 0.0 {
                    -kappa[i] * y[i] - zslack[i]
                } else {
                    0.0
                }
            })
            .collect();

        let gap_matrix = x.inner(&z);
        let gap_slack: f64 = slack.iter().zip(zslack.iter()).map(|(s, zs)| s * zs).sum();
        let mu = (gap_matrix + gap_slack) / total_dim as f64;

        let pobj = c.inner_dense(&x);
        let dobj: f64 = b.iter().zip(y.iter()).map(|(bi, yi)| bi * yi).sum();
        let primal_res =
            rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + b_norm);
        let dual_res = (rd.frobenius().powi(2)
            + rd_slack.iter().map(|v| v * v).sum::<f64>())
        .sqrt()
            / (1.0 + c_norm);
        let rel_gap = (gap_matrix + gap_slack).abs() / (1.0 + pobj.abs() + dobj.abs());

        let make_solution = |status: SdpStatus| -> SdpSolution {
            let mut s = BlockMatrix::zeros(nb);
            for (i, bm) in x.blocks.iter().enumerate() {
                s.set(i, hermitize(bm));
            }
            SdpSolution {
                s,
                status,
                objective_value: pobj * obj_scale,
                primal_residual: primal_res,
                dual_residual: dual_res,
                duality_gap: rel_gap,
                iterations,
            }
        };

        let merit = primal_res + dual_res + rel_gap;
        if best.as_ref().map_or(true, |(bm, _)| merit < *bm) {
            best = Some((merit, make_solution(SdpStatus::MaxIterations)));
        }

        if primal_res <= tol && dual_res <= tol && rel_gap <= tol {
            status = SdpStatus::Optimal;
            let mut sol = make_solution(status);
            sol.status = SdpStatus::Optimal;
            return Ok(sol);
        }

        // Divergence heuristic: an unbounded dual certifies primal
        // infeasibility. Track sustained growth of y against a stalled
        // primal residual.
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ynorm > prev_ynorm * 1.0 + 1e-12 && ynorm > 1e2 && primal_res > 10.0 * tol {
            diverge_count += 1;
        } else {
            diverge_count = 0;
        }
        prev_ynorm = ynorm;
        if ynorm > 1e8 * bound_scale || diverge_count >= 50 {
            status = SdpStatus::Infeasible;
            return Ok(make_solution(status));
        }

        // Schur complement M_ij = Re tr(A_i X A_j Z^{-1}) + slack diagonal.
        // G_j is sparse over the constraint's active blocks; pairs without a
        // shared block contribute nothing.
        let mut g: Vec<Vec<Option<CMat>>> = Vec::with_capacity(m);
        for j in 0..m {
            let mut gj: Vec<Option<CMat>> = vec![None; nb];
            for &bi in &active[j] {
                let a = cons[j].matrix.blocks[bi].as_ref().unwrap();
                gj[bi] = Some(&x.blocks[bi] * a * &zinv.blocks[bi]);
            }
            g.push(gj);
        }
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for &bi in &active[i] {
                    if let Some(gb) = g[j][bi].as_ref() {
                        let a = cons[i].matrix.blocks[bi].as_ref().unwrap();
                        acc += real_trace_product(a, gb);
                    }
                }
                schur[(i, j)] = acc;
            }
            if kappa[i] != 0.0 {
                schur[(i, i)] += slack[i] / zslack[i];
            }
        }
        // symmetrize roundoff and regularize lightly
        for i in 0..m {
            for j in (i + 1)..m {
                let v = 0.5 * (schur[(i, j)] + schur[(j, i)]);
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
            schur[(i, i)] += 1e-13 * (1.0 + schur[(i, i)].abs());
        }
        let lu = LU::new(schur.clone());

        // X * Rd * Z^{-1}, dense, shared by both direction solves.
        let mut xrdzinv = DenseState::zeros(dims);
        for i in 0..nb {
            if dims[i] == 0 {
                continue;
            }
            xrdzinv.blocks[i] = &x.blocks[i] * &rd.blocks[i] * &zinv.blocks[i];
        }

        // Direction solver for complementarity residual R_c (matrix part)
        // and r_cs (slack part).
        let solve_direction = |rc: &DenseState,
                               rcs: &[f64]|
         -> Option<(DenseState, Vec<f64>, DenseState, Vec<f64>, Vec<f64>)> {
            // rhs_i = rp_i - <A_i, Rc Z^{-1}> + <A_i, X Rd Z^{-1}>
            //         - kappa_i (r_cs_i - s_i rd_i) / z_i
            let mut rczinv = DenseState::zeros(dims);
            for i in 0..nb {
                if dims[i] == 0 {
                    continue;
                }
                rczinv.blocks[i] = &rc.blocks[i] * &zinv.blocks[i];
            }
            let mut rhs = DVector::<f64>::zeros(m);
            for i in 0..m {
                let mut v = rp[i] - rczinv.inner_sparse(&cons[i].matrix)
                    + xrdzinv.inner_sparse(&cons[i].matrix);
                if kappa[i] != 0.0 {
                    v -= kappa[i] * (rcs[i] - slack[i] * rd_slack[i]) / zslack[i];
                }
                rhs[i] = v;
            }
            let dy = lu.solve(&rhs)?;

            // dZ = Rd - sum dy_j A_j ; dz_i = rd_i - kappa_i dy_i
            let mut dz = DenseState::zeros(dims);
            dz.axpy(1.0, &rd);
            for j in 0..m {
                dz.axpy_sparse(-dy[j], &cons[j].matrix);
            }
            let dzs: Vec<f64> = (0..m)
                .map(|i| {
                    if kappa[i] != 0.0 {
                        rd_slack[i] - kappa[i] * dy[i]
                    } else {
                        0.0
                    }
                })
                .collect();
            // dX = (Rc - X dZ) Z^{-1}, symmetrized; ds_i = (r_cs_i - s_i dz_i)/z_i
            let mut dx = DenseState::zeros(dims);
            for i in 0..nb {
                if dims[i] == 0 {
                    continue;
                }
                let raw = (&rc.blocks[i] - &x.blocks[i] * &dz.blocks[i]) * &zinv.blocks[i];
                dx.blocks[i] = hermitize(&raw);
            }
            let ds: Vec<f64> = (0..m)
                .map(|i| {
                    if kappa[i] != 0.0 {
                        (rcs[i] - slack[i] * dzs[i]) / zslack[i]
                    } else {
                        0.0
                    }
                })
                .collect();
            Some((dx, ds, dz, dzs, dy.iter().copied().collect()))
        };

        // Predictor: Rc = -XZ, r_cs = -s z.
        let mut rc_aff = DenseState::zeros(dims);
        for i in 0..nb {
            if dims[i] == 0 {
                continue;
            }
            rc_aff.blocks[i] = -(&x.blocks[i] * &z.blocks[i]);
        }
        let rcs_aff: Vec<f64> = (0..m).map(|i| -slack[i] * zslack[i]).collect();
        let (dx_aff, ds_aff, dz_aff, dzs_aff, _) =
            match solve_direction(&rc_aff, &rcs_aff) {
                Some(v) => v,
                None => {
                    status = SdpStatus::MaxIterations;
                    break;
                }
            };

        let ap_aff = max_psd_step(&x, &dx_aff).min(slack_ratio_step(&slack, &ds_aff));
        let ad_aff = max_psd_step(&z, &dz_aff).min(slack_ratio_step(&zslack, &dzs_aff));

        // Mehrotra centering weight.
        let mut gap_aff = 0.0;
        {
            let mut xa = DenseState::zeros(dims);
            xa.axpy(1.0, &x);
            xa.axpy(ap_aff, &dx_aff);
            let mut za = DenseState::zeros(dims);
            za.axpy(1.0, &z);
            za.axpy(ad_aff, &dz_aff);
            gap_aff += xa.inner(&za);
            for i in 0..m {
                gap_aff += (slack[i] + ap_aff * ds_aff[i]) * (zslack[i] + ad_aff * dzs_aff[i]);
            }
        }
        let mu_aff = gap_aff / total_dim as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector: Rc = sigma mu I - XZ - dX_aff dZ_aff.
        let mut rc = DenseState::zeros(dims);
        for i in 0..nb {
            let d = dims[i];
            if d == 0 {
                continue;
            }
            let mut blockmat = -(&x.blocks[i] * &z.blocks[i]);
            blockmat -= &dx_aff.blocks[i] * &dz_aff.blocks[i];
            for k in 0..d {
                blockmat[(k, k)] += Complex64::new(sigma * mu, 0.0);
            }
            rc.blocks[i] = blockmat;
        }
        let rcs: Vec<f64> = (0..m)
            .map(|i| {
                if kappa[i] != 0.0 {
                    sigma * mu - slack[i] * zslack[i] - ds_aff[i] * dzs_aff[i]
                } else {
                    0.0
                }
            })
            .collect();
        let (dx, ds, dz, dzs, dy) = match solve_direction(&rc, &rcs) {
            Some(v) => v,
            None => {
                status = SdpStatus::MaxIterations;
                break;
            }
        };

        let step_frac = 0.98;
        let ap = (step_frac * max_psd_step(&x, &dx).min(slack_ratio_step(&slack, &ds))).min(1.0);
        let ad =
            (step_frac * max_psd_step(&z, &dz).min(slack_ratio_step(&zslack, &dzs))).min(1.0);

        x.axpy(ap, &dx);
        x.hermitize_in_place();
        z.axpy(ad, &dz);
        z.hermitize_in_place();
        for i in 0..m {
            y[i] += ad * dy[i];
            if kappa[i] != 0.0 {
                slack[i] += ap * ds[i];
                zslack[i] += ad * dzs[i];
                slack[i] = slack[i].max(1e-300);
                zslack[i] = zslack[i].max(1e-300);
            }
        }
        if !x.in_cone() || !z.in_cone() {
            // Should not happen with the bisected steps; bail to best iterate.
            status = SdpStatus::MaxIterations;
            break;
        }
        let _ = con_scales; // constraint scaling is internal only
    }

    let (_, mut sol) = best.ok_or_else(|| Error::Numerical("SDP produced no iterate".into()))?;
    sol.status = status;
    sol.iterations = iterations;
    Ok(sol)
}

impl BlockMatrix {
    fn inner_dense(&self, x: &DenseState) -> f64 {
        x.inner_sparse(self)
    }
}
