//! Problem context for the consensus solver: variable stacking, scheme
//! masks, sample-average data, constraint assembly for the projection step,
//! and an independent feasibility audit.

use num_complex::Complex64;

use crate::channels::{conditional_samples, saa_stream, ChannelSet};
use crate::config::{ScenarioConfig, Scheme};
use crate::conic::{BlockMatrix, SdpConstraint, Sense};
use crate::error::{Error, Result};
use crate::linalg::{quad_form, CMat, CVec};
use crate::metrics::{
    interference_matrix, jamming_power, mmse_equalizer_and_error, wmse_bits, PrecoderSet,
    Stream,
};
use crate::thresholds::ThresholdSet;

const LN2: f64 = std::f64::consts::LN_2;

/// Per-subcarrier complex coordinate layout of the stacked variable
/// `[X_1..X_K, vec(P), vec(F)]`.
#[derive(Debug, Clone)]
pub struct Layout {
    pub nt: usize,
    pub num_su: usize,
    pub num_au: usize,
    pub num_subcarriers: usize,
}

impl Layout {
    /// Complex coordinates per subcarrier block.
    pub fn block_len(&self) -> usize {
        self.num_su + self.nt * (self.num_su + self.num_au + 1)
    }

    pub fn share(&self, k: usize) -> usize {
        k
    }

    pub fn common(&self) -> std::ops::Range<usize> {
        self.num_su..self.num_su + self.nt
    }

    pub fn private(&self, k: usize) -> std::ops::Range<usize> {
        let start = self.num_su + self.nt * (1 + k);
        start..start + self.nt
    }

    pub fn jamming(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.num_su + self.nt * (1 + self.num_su + l);
        start..start + self.nt
    }

    /// All precoder coordinates (everything but the rate shares).
    pub fn precoder_coords(&self) -> std::ops::Range<usize> {
        self.num_su..self.block_len()
    }
}

/// Which designated user rides the common stream in the two-user
/// superposition scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeMask {
    Rsma,
    Sdma,
    /// `common_user`'s message is carried entirely by the common stream;
    /// its private precoder and the other user's share are masked.
    Noma { common_user: usize },
}

/// Everything the iterative solver needs that is fixed for a whole solve.
pub struct ProblemContext {
    pub cfg: ScenarioConfig,
    pub layout: Layout,
    pub mask: SchemeMask,
    /// Active complex coordinates per subcarrier, sorted.
    pub active: Vec<Vec<usize>>,
    /// SAA channel draws `[k][n][s]`.
    pub samples: Vec<Vec<Vec<CVec>>>,
    /// Interference matrices `Phi[m][n]`.
    pub phi: Vec<Vec<CMat>>,
    /// Adversarial-user covariances `R[l][n]`.
    pub covariances: Vec<Vec<CMat>>,
    pub thresholds: ThresholdSet,
    /// Estimate norms averaged over subcarriers, one per user (used for the
    /// superposition decode-order preference).
    pub est_norms: Vec<f64>,
}

/// MMSE weights and filters for one (user, subcarrier, sample) triple.
#[derive(Debug, Clone, Copy)]
pub struct WeightEntry {
    pub g_common: Complex64,
    pub w_common: f64,
    pub g_private: Complex64,
    pub w_private: f64,
}

pub type WeightTable = Vec<Vec<Vec<WeightEntry>>>;

impl ProblemContext {
    pub fn saa_count(&self) -> usize {
        self.samples[0][0].len()
    }

    /// Decode a stacked iterate into a [`PrecoderSet`]; share slots take
    /// their real part and `c_bar = max(-X, 0)`.
    pub fn decode(&self, u: &[CVec]) -> PrecoderSet {
        let lay = &self.layout;
        let n = lay.num_subcarriers;
        let mut set = PrecoderSet::zeros(lay.nt, lay.num_su, lay.num_au, n);
        for sc in 0..n {
            let block = &u[sc];
            for (i, c) in lay.common().enumerate() {
                set.common[sc][i] = block[c];
            }
            for k in 0..lay.num_su {
                set.common_shares[k][sc] = (-block[lay.share(k)].re).max(0.0);
                for (i, c) in lay.private(k).enumerate() {
                    set.private[k][sc][i] = block[c];
                }
            }
            for l in 0..lay.num_au {
                for (i, c) in lay.jamming(l).enumerate() {
                    set.jamming[l][sc][i] = block[c];
                }
            }
        }
        set
    }

    /// Inverse of [`decode`] up to the share sign convention.
    pub fn encode(&self, set: &PrecoderSet) -> Vec<CVec> {
        let lay = &self.layout;
        (0..lay.num_subcarriers)
            .map(|sc| {
                let mut block = CVec::zeros(lay.block_len());
                for k in 0..lay.num_su {
                    block[lay.share(k)] = Complex64::new(-set.common_shares[k][sc], 0.0);
                }
                for (i, c) in lay.common().enumerate() {
                    block[c] = set.common[sc][i];
                }
                for k in 0..lay.num_su {
                    for (i, c) in lay.private(k).enumerate() {
                        block[c] = set.private[k][sc][i];
                    }
                }
                for l in 0..lay.num_au {
                    for (i, c) in lay.jamming(l).enumerate() {
                        block[c] = set.jamming[l][sc][i];
                    }
                }
                block
            })
            .collect()
    }

    /// Zero out masked coordinates in place.
    pub fn apply_mask(&self, u: &mut [CVec]) {
        let lay = &self.layout;
        for sc in 0..lay.num_subcarriers {
            let active = &self.active[sc];
            for c in 0..lay.block_len() {
                if !active.contains(&c) {
                    u[sc][c] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// MMSE filters and the matching optimal weights at the current iterate,
    /// per (user, subcarrier, sample).
    pub fn weights_and_filters(&self, u: &[CVec]) -> Result<WeightTable> {
        let set = self.decode(u);
        let n0 = self.cfg.noise_power;
        let mut table = Vec::with_capacity(self.layout.num_su);
        for k in 0..self.layout.num_su {
            let mut per_sc = Vec::with_capacity(self.layout.num_subcarriers);
            for sc in 0..self.layout.num_subcarriers {
                let slice = set.slice(sc);
                let mut per_sample = Vec::with_capacity(self.saa_count());
                for h in &self.samples[k][sc] {
                    let (gc, ec) =
                        mmse_equalizer_and_error(h, &slice, Stream::Common { user: k }, n0)?;
                    let (gp, ep) =
                        mmse_equalizer_and_error(h, &slice, Stream::Private { user: k }, n0)?;
                    per_sample.push(WeightEntry {
                        g_common: gc,
                        w_common: 1.0 / ec.max(crate::metrics::EPS_FLOOR),
                        g_private: gp,
                        w_private: 1.0 / ep.max(crate::metrics::EPS_FLOOR),
                    });
                }
                per_sc.push(per_sample);
            }
            table.push(per_sc);
        }
        Ok(table)
    }
}

/// Build the solve context: SAA draws, interference matrices, masks.
pub fn build_problem(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    thresholds: &ThresholdSet,
    mask: SchemeMask,
    saa_samples: usize,
) -> Result<ProblemContext> {
    cfg.validate()?;
    if let SchemeMask::Noma { common_user } = mask {
        if cfg.num_su != 2 {
            return Err(Error::Config(
                "the superposition scheme requires exactly two users".into(),
            ));
        }
        if common_user > 1 {
            return Err(Error::Config("common_user must be 0 or 1".into()));
        }
    }
    let layout = Layout {
        nt: cfg.nt,
        num_su: cfg.num_su,
        num_au: cfg.num_au,
        num_subcarriers: cfg.num_subcarriers,
    };

    // SAA draws per (user, subcarrier) from dedicated streams.
    let mut samples = Vec::with_capacity(cfg.num_su);
    for k in 0..cfg.num_su {
        let mut per_sc = Vec::with_capacity(cfg.num_subcarriers);
        for sc in 0..cfg.num_subcarriers {
            let mut rng = saa_stream(cfg.seed, k, sc);
            per_sc.push(conditional_samples(
                &channels.su_est[k][sc],
                channels.sigma_ie2,
                saa_samples,
                &mut rng,
            )?);
        }
        samples.push(per_sc);
    }

    let mut phi = Vec::with_capacity(cfg.num_pu);
    for m in 0..cfg.num_pu {
        let mut per_sc = Vec::with_capacity(cfg.num_subcarriers);
        for sc in 0..cfg.num_subcarriers {
            per_sc.push(interference_matrix(
                &channels.pu_est[m][sc],
                channels.sigma_pe2,
                cfg.pu_rx_antennas[m],
            )?);
        }
        phi.push(per_sc);
    }

    // Active coordinates per subcarrier under the scheme mask; jamming
    // precoders exist only on the owning user's pilot subcarriers.
    let mut active = Vec::with_capacity(cfg.num_subcarriers);
    for sc in 0..cfg.num_subcarriers {
        let mut coords = Vec::new();
        for k in 0..cfg.num_su {
            let keep = match mask {
                SchemeMask::Rsma => true,
                SchemeMask::Sdma => false,
                SchemeMask::Noma { common_user } => k == common_user,
            };
            if keep {
                coords.push(layout.share(k));
            }
        }
        if !matches!(mask, SchemeMask::Sdma) {
            coords.extend(layout.common());
        }
        for k in 0..cfg.num_su {
            let keep = match mask {
                SchemeMask::Noma { common_user } => k != common_user,
                _ => true,
            };
            if keep {
                coords.extend(layout.private(k));
            }
        }
        for l in 0..cfg.num_au {
            if cfg.pilot_set_zero_based(l).contains(&sc) {
                coords.extend(layout.jamming(l));
            }
        }
        coords.sort_unstable();
        active.push(coords);
    }

    let est_norms = (0..cfg.num_su)
        .map(|k| {
            (0..cfg.num_subcarriers)
                .map(|sc| channels.su_est[k][sc].norm())
                .sum::<f64>()
                / cfg.num_subcarriers as f64
        })
        .collect();

    Ok(ProblemContext {
        cfg: cfg.clone(),
        layout,
        mask,
        active,
        samples,
        phi,
        covariances: channels.au_cov.clone(),
        thresholds: thresholds.clone(),
        est_norms,
    })
}

/// Quadratic data of the smooth objective `f(v)` on one subcarrier:
/// per-sub-block curvature `H`, linear term `q` and the share cost.
pub struct SmoothObjective {
    /// Curvature per (subcarrier, active precoder sub-block start); the
    /// corresponding `Nt x Nt` matrix applies to that sub-block.
    pub curvature: Vec<Vec<(usize, CMat)>>,
    /// Linear term per (subcarrier, sub-block start).
    pub linear: Vec<Vec<(usize, CVec)>>,
}

/// Assemble the private-WMSE quadratics of `f(v)` for fixed weights.
///
/// For each user `k` and sample `s` the augmented WMSE contributes
/// `(w/ln2) |g|^2 |h^H x|^2` to every active precoder sub-block `x` except
/// the common one, and `-(2 w / (S ln2)) Re(g h^H p_k)` linearly to the
/// user's own private precoder.
pub fn smooth_objective(ctx: &ProblemContext, weights: &WeightTable) -> SmoothObjective {
    let lay = &ctx.layout;
    let nt = lay.nt;
    let s_count = ctx.saa_count() as f64;
    let mut curvature = Vec::with_capacity(lay.num_subcarriers);
    let mut linear = Vec::with_capacity(lay.num_subcarriers);

    for sc in 0..lay.num_subcarriers {
        // shared rank-accumulated curvature: sum over users and samples
        let mut h_acc = CMat::zeros(nt, nt);
        let mut lin: Vec<(usize, CVec)> = Vec::new();
        for k in 0..lay.num_su {
            if !ctx.active[sc].contains(&lay.private(k).start)
                && !matches!(ctx.mask, SchemeMask::Noma { common_user } if common_user != k)
            {
                // masked private precoder contributes nothing
            }
            let mut q_k = CVec::zeros(nt);
            let mut any = false;
            for (s, entry) in weights[k][sc].iter().enumerate() {
                let h = &ctx.samples[k][sc][s];
                let scale = entry.w_private * entry.g_private.norm_sqr() / (s_count * LN2);
                if scale > 0.0 {
                    h_acc += h * h.adjoint() * Complex64::new(2.0 * scale, 0.0);
                }
                let lin_scale = -2.0 * entry.w_private / (s_count * LN2);
                q_k += h * (entry.g_private.conj() * Complex64::new(lin_scale, 0.0));
                any = true;
            }
            if any && ctx.active[sc].contains(&lay.private(k).start) {
                lin.push((lay.private(k).start, q_k));
            }
        }
        // every active non-common sub-block shares the same curvature; the
        // common precoder never enters the private MSEs
        let mut curv: Vec<(usize, CMat)> = Vec::new();
        for k in 0..lay.num_su {
            let start = lay.private(k).start;
            if ctx.active[sc].contains(&start) {
                curv.push((start, h_acc.clone()));
            }
        }
        for l in 0..lay.num_au {
            let start = lay.jamming(l).start;
            if ctx.active[sc].contains(&start) {
                curv.push((start, h_acc.clone()));
            }
        }
        curvature.push(curv);
        linear.push(lin);
    }
    SmoothObjective { curvature, linear }
}

/// Index map between full block coordinates and the lifted SDP coordinates
/// of one subcarrier: active coordinates first, homogenization slot last.
pub struct Lift {
    /// `lifted_index[full_coord] = Some(position)` for active coordinates.
    pub position: Vec<Option<usize>>,
    /// Lifted dimension including the homogenization coordinate.
    pub dim: usize,
}

impl Lift {
    pub fn new(block_len: usize, active: &[usize]) -> Lift {
        let mut position = vec![None; block_len];
        for (i, &c) in active.iter().enumerate() {
            position[c] = Some(i);
        }
        Lift {
            position,
            dim: active.len() + 1,
        }
    }

    pub fn t(&self) -> usize {
        self.dim - 1
    }
}

/// The projection program: lifted constraint matrices that stay fixed for a
/// whole inner loop (they depend on weights, not on the consensus target).
pub struct ProjectionProgram {
    pub lifts: Vec<Lift>,
    pub block_dims: Vec<usize>,
    pub constraints: Vec<SdpConstraint>,
    /// Human-readable family per constraint, for infeasibility reports.
    pub families: Vec<&'static str>,
    /// Index of the total-power constraint.
    pub power_index: usize,
}

struct LiftedAccumulator<'a> {
    lifts: &'a [Lift],
    blocks: Vec<Option<CMat>>,
}

impl<'a> LiftedAccumulator<'a> {
    fn new(lifts: &'a [Lift]) -> Self {
        LiftedAccumulator {
            lifts,
            blocks: vec![None; lifts.len()],
        }
    }

    fn block_mut(&mut self, sc: usize) -> &mut CMat {
        let d = self.lifts[sc].dim;
        self.blocks[sc].get_or_insert_with(|| CMat::zeros(d, d))
    }

    /// Add `scale * h h^H` on the sub-block starting at `start`.
    fn add_quad(&mut self, sc: usize, start: usize, h: &CVec, scale: f64) {
        let lift = &self.lifts[sc];
        let nt = h.len();
        let Some(base) = lift.position[start] else {
            return;
        };
        let block = self.block_mut(sc);
        for i in 0..nt {
            for j in 0..nt {
                block[(base + i, base + j)] +=
                    h[i] * h[j].conj() * Complex64::new(scale, 0.0);
            }
        }
    }

    /// Add a full Hermitian matrix `scale * R` on the sub-block at `start`.
    fn add_matrix(&mut self, sc: usize, start: usize, r: &CMat, scale: f64) {
        let lift = &self.lifts[sc];
        let Some(base) = lift.position[start] else {
            return;
        };
        let block = self.block_mut(sc);
        for i in 0..r.nrows() {
            for j in 0..r.ncols() {
                block[(base + i, base + j)] += r[(i, j)] * Complex64::new(scale, 0.0);
            }
        }
    }

    /// Add the linear functional `Re(c^H x)` on the sub-block at `start`.
    fn add_linear(&mut self, sc: usize, start: usize, c: &CVec) {
        let lift = &self.lifts[sc];
        let Some(base) = lift.position[start] else {
            return;
        };
        let t = lift.t();
        let block = self.block_mut(sc);
        for i in 0..c.len() {
            block[(base + i, t)] += c[i] * Complex64::new(0.5, 0.0);
            block[(t, base + i)] += c[i].conj() * Complex64::new(0.5, 0.0);
        }
    }

    /// Add `coef * Re(x[coord])` as a linear functional on one coordinate.
    fn add_linear_coord(&mut self, sc: usize, coord: usize, coef: f64) {
        let lift = &self.lifts[sc];
        let Some(base) = lift.position[coord] else {
            return;
        };
        let t = lift.t();
        let block = self.block_mut(sc);
        block[(base, t)] += Complex64::new(0.5 * coef, 0.0);
        block[(t, base)] += Complex64::new(0.5 * coef, 0.0);
    }

    fn finish(self) -> BlockMatrix {
        BlockMatrix {
            blocks: self.blocks,
        }
    }
}

/// Per-sample common-stream WMSE pieces entering the decodability cap.
fn common_wmse_terms(
    acc: &mut LiftedAccumulator<'_>,
    ctx: &ProblemContext,
    weights: &WeightTable,
    k: usize,
    sc: usize,
) -> f64 {
    let lay = &ctx.layout;
    let n0 = ctx.cfg.noise_power;
    let s_count = ctx.saa_count() as f64;
    let mut constant = 0.0;
    for (s, entry) in weights[k][sc].iter().enumerate() {
        let h = &ctx.samples[k][sc][s];
        let w = entry.w_common;
        let g2 = entry.g_common.norm_sqr();
        let scale = w * g2 / (s_count * LN2);
        // quadratic on every precoder sub-block, including the common one
        acc.add_quad(sc, lay.common().start, h, scale);
        for i in 0..lay.num_su {
            acc.add_quad(sc, lay.private(i).start, h, scale);
        }
        for l in 0..lay.num_au {
            acc.add_quad(sc, lay.jamming(l).start, h, scale);
        }
        // linear part on the common precoder: -(2w/(S ln2)) Re(g h^H p_c)
        let lin = h * (entry.g_common.conj() * Complex64::new(-2.0 * w / (s_count * LN2), 0.0));
        acc.add_linear(sc, lay.common().start, &lin);
        // constants of xi: (w(1 + g2 N0) - ln w - 1)/ln2 + 1
        constant += ((w * (1.0 + g2 * n0) - w.ln() - 1.0) / LN2 + 1.0) / s_count;
    }
    constant
}

/// Private-stream WMSE pieces (used by the QoS rows).
fn private_wmse_terms(
    acc: &mut LiftedAccumulator<'_>,
    ctx: &ProblemContext,
    weights: &WeightTable,
    k: usize,
    sc: usize,
    scale_all: f64,
) -> f64 {
    let lay = &ctx.layout;
    let n0 = ctx.cfg.noise_power;
    let s_count = ctx.saa_count() as f64;
    let mut constant = 0.0;
    for (s, entry) in weights[k][sc].iter().enumerate() {
        let h = &ctx.samples[k][sc][s];
        let w = entry.w_private;
        let g2 = entry.g_private.norm_sqr();
        let scale = scale_all * w * g2 / (s_count * LN2);
        for i in 0..lay.num_su {
            acc.add_quad(sc, lay.private(i).start, h, scale);
        }
        for l in 0..lay.num_au {
            acc.add_quad(sc, lay.jamming(l).start, h, scale);
        }
        let lin = h * (entry.g_private.conj()
            * Complex64::new(-2.0 * scale_all * w / (s_count * LN2), 0.0));
        acc.add_linear(sc, lay.private(k).start, &lin);
        constant += scale_all * (((w * (1.0 + g2 * n0) - w.ln() - 1.0) / LN2) + 1.0) / s_count;
    }
    constant
}

/// Assemble the projection program for the current weights.
pub fn projection_program(ctx: &ProblemContext, weights: &WeightTable) -> ProjectionProgram {
    let lay = &ctx.layout;
    let n = lay.num_subcarriers;
    let lifts: Vec<Lift> = (0..n)
        .map(|sc| Lift::new(lay.block_len(), &ctx.active[sc]))
        .collect();
    let block_dims: Vec<usize> = lifts.iter().map(|l| l.dim).collect();
    let mut constraints = Vec::new();
    let mut families = Vec::new();

    // homogenization: S_tt = 1 per subcarrier
    for sc in 0..n {
        let mut acc = LiftedAccumulator::new(&lifts);
        let t = lifts[sc].t();
        let block = acc.block_mut(sc);
        block[(t, t)] = Complex64::new(1.0, 0.0);
        constraints.push(SdpConstraint {
            matrix: acc.finish(),
            sense: Sense::Eq,
            bound: 1.0,
        });
        families.push("homogenization");
    }

    // common-stream decodability: xi_c,k,n(p) - sum_k' X_k',n <= 1
    if !matches!(ctx.mask, SchemeMask::Sdma) {
        for sc in 0..n {
            for k in 0..lay.num_su {
                let mut acc = LiftedAccumulator::new(&lifts);
                let constant = common_wmse_terms(&mut acc, ctx, weights, k, sc);
                for k2 in 0..lay.num_su {
                    acc.add_linear_coord(sc, lay.share(k2), -1.0);
                }
                constraints.push(SdpConstraint {
                    matrix: acc.finish(),
                    sense: Sense::Le,
                    bound: 1.0 - constant,
                });
                families.push("common-rate");
            }
        }
        // share sign: X_k,n <= 0 (shares are nonnegative rate portions)
        for sc in 0..n {
            for k in 0..lay.num_su {
                if lifts[sc].position[lay.share(k)].is_none() {
                    continue;
                }
                let mut acc = LiftedAccumulator::new(&lifts);
                acc.add_linear_coord(sc, lay.share(k), 1.0);
                constraints.push(SdpConstraint {
                    matrix: acc.finish(),
                    sense: Sense::Le,
                    bound: 0.0,
                });
                families.push("share-sign");
            }
        }
    }

    // jamming floors on pilot subcarriers
    for l in 0..lay.num_au {
        for &sc in &ctx.cfg.pilot_set_zero_based(l) {
            let j_thr = ctx.thresholds.jamming[l][sc].expect("pilot threshold");
            let r = &ctx.covariances[l][sc];
            let mut acc = LiftedAccumulator::new(&lifts);
            acc.add_matrix(sc, lay.common().start, r, 1.0);
            for i in 0..lay.num_su {
                acc.add_matrix(sc, lay.private(i).start, r, 1.0);
            }
            for l2 in 0..lay.num_au {
                acc.add_matrix(sc, lay.jamming(l2).start, r, 1.0);
            }
            constraints.push(SdpConstraint {
                matrix: acc.finish(),
                sense: Sense::Ge,
                bound: j_thr,
            });
            families.push("jamming");
        }
    }

    // interference caps everywhere
    for m in 0..ctx.cfg.num_pu {
        for sc in 0..n {
            let phi = &ctx.phi[m][sc];
            let mut acc = LiftedAccumulator::new(&lifts);
            acc.add_matrix(sc, lay.common().start, phi, 1.0);
            for i in 0..lay.num_su {
                acc.add_matrix(sc, lay.private(i).start, phi, 1.0);
            }
            for l in 0..lay.num_au {
                acc.add_matrix(sc, lay.jamming(l).start, phi, 1.0);
            }
            constraints.push(SdpConstraint {
                matrix: acc.finish(),
                sense: Sense::Le,
                bound: ctx.thresholds.interference[m][sc],
            });
            families.push("interference");
        }
    }

    // total power
    let power_index = constraints.len();
    {
        let mut acc = LiftedAccumulator::new(&lifts);
        for sc in 0..n {
            let lift = &lifts[sc];
            for coord in lay.precoder_coords() {
                if let Some(pos) = lift.position[coord] {
                    acc.block_mut(sc)[(pos, pos)] = Complex64::new(1.0, 0.0);
                }
            }
            // make sure the block exists even if everything is masked
            let _ = acc.block_mut(sc);
        }
        constraints.push(SdpConstraint {
            matrix: acc.finish(),
            sense: Sense::Le,
            bound: ctx.cfg.total_power,
        });
        families.push("power");
    }

    // QoS: (1/N) sum_n (X_k,n + xi_k,n(p)) <= 1 - Rth
    for k in 0..lay.num_su {
        let mut acc = LiftedAccumulator::new(&lifts);
        let mut constant = 0.0;
        let inv_n = 1.0 / n as f64;
        for sc in 0..n {
            acc.add_linear_coord(sc, lay.share(k), inv_n);
            constant += private_wmse_terms(&mut acc, ctx, weights, k, sc, inv_n);
        }
        constraints.push(SdpConstraint {
            matrix: acc.finish(),
            sense: Sense::Le,
            bound: 1.0 - ctx.cfg.rate_floor - constant,
        });
        families.push("qos");
    }

    ProjectionProgram {
        lifts,
        block_dims,
        constraints,
        families,
        power_index,
    }
}

/// Feasibility audit of a stacked iterate against the full domain,
/// evaluated with the metrics-module primitives rather than the lifted
/// constraint data.
#[derive(Debug, Clone)]
pub struct AuditReport {
    /// Worst absolute violation and its constraint family.
    pub worst: f64,
    pub family: &'static str,
}

impl AuditReport {
    pub fn ok(&self, tol: f64) -> bool {
        self.worst <= tol
    }
}

/// Audit the domain constraints that do not depend on the iteration-local
/// weights: jamming floors, interference caps and the power budget.
pub fn audit_physical(ctx: &ProblemContext, u: &[CVec]) -> Result<AuditReport> {
    let set = ctx.decode(u);
    audit_precoders(ctx, &set)
}

/// Same audit, starting from a decoded precoder set.
pub fn audit_precoders(ctx: &ProblemContext, set: &PrecoderSet) -> Result<AuditReport> {
    let mut worst = 0.0f64;
    let mut family = "none";
    let mut push = |v: f64, fam: &'static str| {
        if v > worst {
            worst = v;
            family = fam;
        }
    };

    for l in 0..ctx.layout.num_au {
        for &sc in &ctx.cfg.pilot_set_zero_based(l) {
            let j_thr = ctx.thresholds.jamming[l][sc].expect("pilot threshold");
            let lam = jamming_power(&ctx.covariances[l][sc], &set.slice(sc))?;
            push(j_thr - lam, "jamming");
        }
    }
    for m in 0..ctx.cfg.num_pu {
        for sc in 0..ctx.layout.num_subcarriers {
            let psi = jamming_power(&ctx.phi[m][sc], &set.slice(sc))?;
            push(psi - ctx.thresholds.interference[m][sc], "interference");
        }
    }
    push(set.total_power() - ctx.cfg.total_power, "power");
    Ok(AuditReport { worst, family })
}

/// Evaluate the weighted objective `f(v)` plus the iteration-local domain
/// functions at a stacked point; used by the projection feasibility check.
pub struct DomainEval {
    /// Worst violation over common-rate, share-sign, QoS, jamming,
    /// interference, power.
    pub worst: f64,
    pub family: &'static str,
}

pub fn domain_eval(
    ctx: &ProblemContext,
    weights: &WeightTable,
    u: &[CVec],
) -> Result<DomainEval> {
    let set = ctx.decode_signed(u);
    let lay = &ctx.layout;
    let n0 = ctx.cfg.noise_power;
    let s_count = ctx.saa_count() as f64;
    let mut worst = f64::NEG_INFINITY;
    let mut family = "none";
    let mut push = |v: f64, fam: &'static str| {
        if v > worst {
            worst = v;
            family = fam;
        }
    };

    // iteration-local rows
    if !matches!(ctx.mask, SchemeMask::Sdma) {
        for sc in 0..lay.num_subcarriers {
            let slice = set.0.slice(sc);
            let share_sum: f64 = (0..lay.num_su).map(|k| set.1[k][sc]).sum();
            for k in 0..lay.num_su {
                let mut xi_c = 0.0;
                for (s, entry) in weights[k][sc].iter().enumerate() {
                    let h = &ctx.samples[k][sc][s];
                    let eps = common_eps(h, &slice, entry.g_common, n0);
                    xi_c += wmse_bits(entry.w_common, eps) / s_count;
                }
                push(xi_c - 1.0 - share_sum, "common-rate");
            }
            for k in 0..lay.num_su {
                push(set.1[k][sc], "share-sign");
            }
        }
    }
    for k in 0..lay.num_su {
        let mut qos = 0.0;
        for sc in 0..lay.num_subcarriers {
            let slice = set.0.slice(sc);
            let mut xi = 0.0;
            for (s, entry) in weights[k][sc].iter().enumerate() {
                let h = &ctx.samples[k][sc][s];
                let eps = private_eps(h, &slice, entry.g_private, k, n0);
                xi += wmse_bits(entry.w_private, eps) / s_count;
            }
            qos += (set.1[k][sc] + xi) / lay.num_subcarriers as f64;
        }
        push(qos - (1.0 - ctx.cfg.rate_floor), "qos");
    }

    // physical rows
    let phys = audit_precoders(ctx, &set.0)?;
    push(phys.worst, phys.family);
    Ok(DomainEval { worst, family })
}

/// MSE of the common stream at a non-MMSE equalizer `g`.
fn common_eps(h: &CVec, slice: &crate::metrics::PrecoderSlice<'_>, g: Complex64, n0: f64) -> f64 {
    let hp = (h.adjoint() * slice.common)[(0, 0)];
    let mut interf = 0.0;
    for p in &slice.private {
        interf += (h.adjoint() * *p)[(0, 0)].norm_sqr();
    }
    for f in &slice.jamming {
        interf += (h.adjoint() * *f)[(0, 0)].norm_sqr();
    }
    (Complex64::new(1.0, 0.0) - g * hp).norm_sqr() + g.norm_sqr() * (interf + n0)
}

/// MSE of user `k`'s private stream at a non-MMSE equalizer `g`.
fn private_eps(
    h: &CVec,
    slice: &crate::metrics::PrecoderSlice<'_>,
    g: Complex64,
    k: usize,
    n0: f64,
) -> f64 {
    let hp = (h.adjoint() * slice.private[k])[(0, 0)];
    let mut interf = 0.0;
    for (i, p) in slice.private.iter().enumerate() {
        if i != k {
            interf += (h.adjoint() * *p)[(0, 0)].norm_sqr();
        }
    }
    for f in &slice.jamming {
        interf += (h.adjoint() * *f)[(0, 0)].norm_sqr();
    }
    (Complex64::new(1.0, 0.0) - g * hp).norm_sqr() + g.norm_sqr() * (interf + n0)
}

impl ProblemContext {
    /// Decode keeping signed shares (for domain evaluation): returns the
    /// precoder set plus the raw `X` values.
    fn decode_signed(&self, u: &[CVec]) -> (PrecoderSet, Vec<Vec<f64>>) {
        let set = self.decode(u);
        let lay = &self.layout;
        let shares: Vec<Vec<f64>> = (0..lay.num_su)
            .map(|k| {
                (0..lay.num_subcarriers)
                    .map(|sc| u[sc][lay.share(k)].re)
                    .collect()
            })
            .collect();
        (set, shares)
    }
}
