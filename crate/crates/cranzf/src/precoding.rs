//! Joint zero-forcing precoders: the standard full-dimension construction and
//! the precode-and-quantize (PaQ) pipeline.
//!
//! In the standard scheme the central unit nulls each user's beam against all
//! other users' estimated stacked channels.  In PaQ, every S-RRH first
//! discards its `Q̄` weakest users and projects its local channels onto the
//! `Ñ_t = N_t − Q̄` dimensional complement of the discarded ones (the
//! front-end matrix `A_m`).  The effective channels are lower-dimensional, so
//! the same bit budget quantizes them more accurately, and every S-RRH only
//! carries the data of the `Q − Q̄` users it serves.  The central unit then
//! zero-forces in the effective space, masked to each user's serving set, and
//! each S-RRH lifts its sub-beamformer back through `A_m`.

use crate::channel::{AlphaMatrix, ChannelSet};
use crate::linalg::{
    norm, norm_sq, orthonormal_null_basis, orthonormalize, residual, CMatrix, CVector, LinalgError,
    C64, RANK_REL_TOL,
};
use crate::rvq::{quantize_direction, QuantizedCsi, RvqError, RvqMode};
use rand::Rng;
use thiserror::Error;

/// Relative threshold below which a projected desired channel is declared
/// degenerate; such a realization is resampled by the Monte Carlo driver.
const DEGENERATE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PrecodingError {
    #[error(
        "zero-forcing needs strictly more dimensions ({dim}) than interferers ({interferers})"
    )]
    InsufficientDimensions { dim: usize, interferers: usize },
    #[error("desired channel lies (numerically) in the interferers' span")]
    DegenerateProjection,
    #[error("masked zero-forcing for MS {q} needs {need} dimensions but has {have}")]
    DimensionShortfall { q: usize, need: usize, have: usize },
    #[error("discarded channels are rank deficient: complement has {got} dimensions, expected {expected}")]
    RankDeficientDiscard { expected: usize, got: usize },
    #[error("Q̄ = {q_bar} out of range (must satisfy Q̄ ≤ min(Q−1, N_t−1))")]
    QBarOutOfRange { q_bar: usize },
    #[error("symmetric policy requires Q/M and M·Q̄/Q to be integers with at least one serving S-RRH per MS")]
    InvalidSymmetricPolicy,
    #[error("MS {0} is not served by any S-RRH")]
    UnservedMs(usize),
    #[error("every S-RRH block is zero; no power constraint binds")]
    AllBlocksZero,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Rvq(#[from] RvqError),
}

// ---------------------------------------------------------------------------
// Precoder sets
// ---------------------------------------------------------------------------

/// One unit-norm beamformer per MS, stored stacked with a fixed per-S-RRH
/// block length (`N_t`, or `Ñ_t` in the PaQ effective space).
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    m_srrh: usize,
    block_len: usize,
    vectors: Vec<CVector>,
}

impl PrecoderSet {
    pub fn new(m_srrh: usize, block_len: usize, vectors: Vec<CVector>) -> Self {
        for v in &vectors {
            assert_eq!(v.len(), m_srrh * block_len);
        }
        Self {
            m_srrh,
            block_len,
            vectors,
        }
    }

    pub fn q_ms(&self) -> usize {
        self.vectors.len()
    }

    pub fn m_srrh(&self) -> usize {
        self.m_srrh
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Stacked beamformer for MS `q`.
    pub fn vector(&self, q: usize) -> &CVector {
        &self.vectors[q]
    }

    /// Sub-block `p_{q,m}`.
    pub fn block(&self, q: usize, m: usize) -> &[C64] {
        &self.vectors[q][m * self.block_len..(m + 1) * self.block_len]
    }

    pub fn block_norm_sq(&self, q: usize, m: usize) -> f64 {
        norm_sq(self.block(q, m))
    }
}

/// Beam for one user: normalized projection of the desired channel onto the
/// orthogonal complement of the interferers' span.  Equals
/// `N_q (ĥ_q† N_q)† / ‖ĥ_q† N_q‖` for any orthonormal null-space basis `N_q`.
fn zf_one(own: &CVector, interferers: &[CVector]) -> Result<CVector, PrecodingError> {
    let dim = own.len();
    if interferers.len() >= dim {
        return Err(PrecodingError::InsufficientDimensions {
            dim,
            interferers: interferers.len(),
        });
    }
    let onb = orthonormalize(interferers, RANK_REL_TOL);
    let r = residual(own, &onb);
    let n = norm(&r);
    if !(n > DEGENERATE_REL_TOL * norm(own)) {
        return Err(PrecodingError::DegenerateProjection);
    }
    Ok(r.iter().map(|x| x / n).collect())
}

/// Joint ZF precoders from (estimated or exact) stacked channels.
pub fn zf_precoders(csi: &QuantizedCsi) -> Result<PrecoderSet, PrecodingError> {
    let q_ms = csi.q_ms();
    let stacked: Vec<CVector> = (0..q_ms).map(|q| csi.stacked_estimate(q)).collect();
    let mut vectors = Vec::with_capacity(q_ms);
    for q in 0..q_ms {
        let interferers: Vec<CVector> = (0..q_ms)
            .filter(|&j| j != q)
            .map(|j| stacked[j].clone())
            .collect();
        vectors.push(zf_one(&stacked[q], &interferers)?);
    }
    Ok(PrecoderSet::new(csi.m_srrh(), csi.block_len(), vectors))
}

// ---------------------------------------------------------------------------
// MS allocation
// ---------------------------------------------------------------------------

/// Which MSs each S-RRH discards/serves.  `discarded[m]` always has exactly
/// `q_bar` entries; `serving[m]` is its complement.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    q_ms: usize,
    m_srrh: usize,
    q_bar: usize,
    discarded: Vec<Vec<usize>>,
    serving: Vec<Vec<usize>>,
}

impl Allocation {
    fn from_discarded(q_ms: usize, q_bar: usize, discarded: Vec<Vec<usize>>) -> Self {
        let m_srrh = discarded.len();
        let serving = discarded
            .iter()
            .map(|d| (0..q_ms).filter(|q| !d.contains(q)).collect())
            .collect();
        Self {
            q_ms,
            m_srrh,
            q_bar,
            discarded,
            serving,
        }
    }

    pub fn q_ms(&self) -> usize {
        self.q_ms
    }

    pub fn m_srrh(&self) -> usize {
        self.m_srrh
    }

    pub fn q_bar(&self) -> usize {
        self.q_bar
    }

    pub fn discarded(&self, m: usize) -> &[usize] {
        &self.discarded[m]
    }

    pub fn serving(&self, m: usize) -> &[usize] {
        &self.serving[m]
    }

    pub fn serves(&self, m: usize, q: usize) -> bool {
        self.serving[m].binary_search(&q).is_ok()
    }
}

/// Attenuation-driven allocation: each S-RRH discards its `q_bar` weakest
/// links (`α_{q,m} ≤ α_{q',m}` for every discarded `q` and kept `q'`), ties
/// broken by lowest MS index.  The policy is local per S-RRH, so an MS may
/// end up discarded everywhere; see [`reallocate_unserved`].
pub fn paq_allocate(alpha: &AlphaMatrix, q_bar: usize) -> Result<Allocation, PrecodingError> {
    let q_ms = alpha.q_ms();
    let m_srrh = alpha.m_srrh();
    if q_bar >= q_ms && q_bar != 0 {
        return Err(PrecodingError::QBarOutOfRange { q_bar });
    }
    let mut discarded: Vec<Vec<usize>> = Vec::with_capacity(m_srrh);
    for m in 0..m_srrh {
        let mut order: Vec<usize> = (0..q_ms).collect();
        let col = alpha.column(m);
        order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap().then(a.cmp(&b)));
        let mut drop: Vec<usize> = order[..q_bar].to_vec();
        drop.sort_unstable();
        discarded.push(drop);
    }
    Ok(Allocation::from_discarded(q_ms, q_bar, discarded))
}

/// Reallocates MSs that no S-RRH serves, at the expense of the most-served
/// MSs: the unserved MS joins, among the S-RRHs currently serving a
/// maximally-served MS, the one with the largest `α_{q,m}` (ties by lowest
/// index), and that S-RRH evicts its weakest maximally-served MS.  Repeats
/// until everyone is served, or until no MS is served twice (then no
/// eviction can help and the remainder stays unserved).
pub fn reallocate_unserved(alloc: Allocation, alpha: &AlphaMatrix) -> Allocation {
    let q_ms = alloc.q_ms();
    let m_srrh = alloc.m_srrh();
    let q_bar = alloc.q_bar();
    let mut serving: Vec<Vec<usize>> = (0..m_srrh).map(|m| alloc.serving(m).to_vec()).collect();

    loop {
        let mut count = vec![0usize; q_ms];
        for s in &serving {
            for &q in s {
                count[q] += 1;
            }
        }
        let Some(unserved) = (0..q_ms).find(|&q| count[q] == 0) else {
            break;
        };
        let cmax = *count.iter().max().unwrap();
        if cmax <= 1 {
            break; // nothing can be evicted without unserving it
        }
        // candidate hosts: S-RRHs serving at least one maximally-served MS
        let mut m_star = None;
        let mut best_alpha = f64::NEG_INFINITY;
        for (m, served) in serving.iter().enumerate() {
            if served.iter().any(|&q| count[q] == cmax) && alpha.get(unserved, m) > best_alpha {
                best_alpha = alpha.get(unserved, m);
                m_star = Some(m);
            }
        }
        let m_star = m_star.expect("cmax ≥ 2 implies a candidate host exists");
        // evict the weakest maximally-served MS at the host
        let victim = *serving[m_star]
            .iter()
            .filter(|&&q| count[q] == cmax)
            .min_by(|&&a, &&b| {
                alpha
                    .get(a, m_star)
                    .partial_cmp(&alpha.get(b, m_star))
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .unwrap();
        serving[m_star].retain(|&q| q != victim);
        serving[m_star].push(unserved);
        serving[m_star].sort_unstable();
    }

    let discarded = serving
        .iter()
        .map(|s| (0..q_ms).filter(|q| !s.contains(q)).collect())
        .collect();
    Allocation::from_discarded(q_ms, q_bar, discarded)
}

/// Symmetric selection policy: for `Q/M ∈ ℕ` and `M·Q̄/Q ∈ ℕ`, partition the
/// MSs into `M` consecutive groups of `Q/M` and let S-RRH `m` discard the
/// `M·Q̄/Q` groups that follow its own, cyclically.  Every MS ends up served
/// by exactly `(1 − Q̄/Q)·M` S-RRHs.
pub fn symmetric_allocation(
    m_srrh: usize,
    q_ms: usize,
    q_bar: usize,
) -> Result<Allocation, PrecodingError> {
    if m_srrh == 0
        || q_ms == 0
        || !q_ms.is_multiple_of(m_srrh)
        || !(m_srrh * q_bar).is_multiple_of(q_ms)
    {
        return Err(PrecodingError::InvalidSymmetricPolicy);
    }
    let groups_discarded = m_srrh * q_bar / q_ms;
    if groups_discarded >= m_srrh {
        return Err(PrecodingError::InvalidSymmetricPolicy);
    }
    let group_size = q_ms / m_srrh;
    let mut discarded = Vec::with_capacity(m_srrh);
    for m in 0..m_srrh {
        let mut d = Vec::with_capacity(q_bar);
        for i in 1..=groups_discarded {
            let g = (m + i) % m_srrh;
            d.extend(g * group_size..(g + 1) * group_size);
        }
        d.sort_unstable();
        discarded.push(d);
    }
    Ok(Allocation::from_discarded(q_ms, q_bar, discarded))
}

// ---------------------------------------------------------------------------
// Serving statistics
// ---------------------------------------------------------------------------

/// Per-MS serving statistics derived from an allocation: the 0/1 serving
/// masks `v_q`, serving counts `M_q`, pairwise shared-server counts
/// `M_{q,j} = |ℳ_q ∩ ℳ_j|`, and the coupled-MS counts
/// `Q̃_q = Q − #{j ≠ q : M_{q,j} = 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServingStats {
    pub v_masks: Vec<Vec<bool>>,
    pub m_q: Vec<usize>,
    pub m_qj: Vec<Vec<usize>>,
    pub q_tilde: Vec<usize>,
}

pub fn serving_stats(alloc: &Allocation) -> ServingStats {
    let (q_ms, m_srrh) = (alloc.q_ms(), alloc.m_srrh());
    let v_masks: Vec<Vec<bool>> = (0..q_ms)
        .map(|q| (0..m_srrh).map(|m| alloc.serves(m, q)).collect())
        .collect();
    let m_q: Vec<usize> = v_masks
        .iter()
        .map(|v| v.iter().filter(|&&b| b).count())
        .collect();
    let m_qj: Vec<Vec<usize>> = (0..q_ms)
        .map(|q| {
            (0..q_ms)
                .map(|j| {
                    (0..m_srrh)
                        .filter(|&m| v_masks[q][m] && v_masks[j][m])
                        .count()
                })
                .collect()
        })
        .collect();
    let q_tilde: Vec<usize> = (0..q_ms)
        .map(|q| q_ms - (0..q_ms).filter(|&j| j != q && m_qj[q][j] == 0).count())
        .collect();
    ServingStats {
        v_masks,
        m_q,
        m_qj,
        q_tilde,
    }
}

// ---------------------------------------------------------------------------
// Front-end matrices and effective channels
// ---------------------------------------------------------------------------

/// Front-end matrix `A_m`: an orthonormal basis for the orthogonal complement
/// of the discarded users' local channels.  `N_t × (N_t − Q̄)`.
pub fn front_end_matrix(
    discarded_channels: &[CVector],
    n_t: usize,
) -> Result<CMatrix, PrecodingError> {
    if discarded_channels.len() >= n_t {
        return Err(PrecodingError::QBarOutOfRange {
            q_bar: discarded_channels.len(),
        });
    }
    let basis = orthonormal_null_basis(discarded_channels, n_t)?;
    let expected = n_t - discarded_channels.len();
    if basis.ncols() != expected {
        return Err(PrecodingError::RankDeficientDiscard {
            expected,
            got: basis.ncols(),
        });
    }
    Ok(basis)
}

/// An allocation bound to one channel realization: front-end matrices plus
/// the derived serving statistics.
#[derive(Debug, Clone)]
pub struct PaqPlan {
    pub allocation: Allocation,
    pub stats: ServingStats,
    pub front_ends: Vec<CMatrix>,
    pub n_t: usize,
    pub n_t_eff: usize,
}

impl PaqPlan {
    pub fn build(alloc: &Allocation, channels: &ChannelSet) -> Result<Self, PrecodingError> {
        let n_t = channels.n_t();
        let q_bar = alloc.q_bar();
        if q_bar >= n_t {
            return Err(PrecodingError::QBarOutOfRange { q_bar });
        }
        let mut front_ends = Vec::with_capacity(alloc.m_srrh());
        for m in 0..alloc.m_srrh() {
            let dropped: Vec<CVector> = alloc
                .discarded(m)
                .iter()
                .map(|&q| channels.link(q, m).clone())
                .collect();
            front_ends.push(front_end_matrix(&dropped, n_t)?);
        }
        Ok(Self {
            allocation: alloc.clone(),
            stats: serving_stats(alloc),
            front_ends,
            n_t,
            n_t_eff: n_t - q_bar,
        })
    }
}

/// Effective low-dimensional channels `h̃_{q,m} = A_m† h_{q,m}` for served
/// links; exact zeros for discarded ones.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannelSet {
    q_ms: usize,
    m_srrh: usize,
    n_eff: usize,
    per_link: Vec<Vec<CVector>>,
}

impl EffectiveChannelSet {
    pub fn q_ms(&self) -> usize {
        self.q_ms
    }

    pub fn m_srrh(&self) -> usize {
        self.m_srrh
    }

    pub fn n_eff(&self) -> usize {
        self.n_eff
    }

    pub fn link(&self, q: usize, m: usize) -> &CVector {
        &self.per_link[q][m]
    }

    /// Stacked `h̃_q ∈ ℂ^{M·Ñ_t}`.
    pub fn stacked(&self, q: usize) -> CVector {
        let mut v = Vec::with_capacity(self.m_srrh * self.n_eff);
        for m in 0..self.m_srrh {
            v.extend_from_slice(&self.per_link[q][m]);
        }
        v
    }
}

pub fn effective_channels(channels: &ChannelSet, plan: &PaqPlan) -> EffectiveChannelSet {
    let (q_ms, m_srrh) = (channels.q_ms(), channels.m_srrh());
    let n_eff = plan.n_t_eff;
    let per_link = (0..q_ms)
        .map(|q| {
            (0..m_srrh)
                .map(|m| {
                    if plan.allocation.serves(m, q) {
                        plan.front_ends[m].adjoint_mul(channels.link(q, m))
                    } else {
                        vec![C64::ZERO; n_eff]
                    }
                })
                .collect()
        })
        .collect();
    EffectiveChannelSet {
        q_ms,
        m_srrh,
        n_eff,
        per_link,
    }
}

/// Quantizes the effective CSI: served links get their direction quantized
/// with `bits` bits (magnitude conveyed exactly), discarded links are known
/// zeros and consume neither bits nor randomness.  Links are visited in
/// `q`-outer, `m`-inner order.
pub fn quantize_effective_csi<R: Rng>(
    eff: &EffectiveChannelSet,
    plan: &PaqPlan,
    bits: u32,
    mode: RvqMode,
    rng: &mut R,
) -> Result<QuantizedCsi, PrecodingError> {
    let (q_ms, m_srrh) = (eff.q_ms(), eff.m_srrh());
    let mut magnitudes = Vec::with_capacity(q_ms);
    let mut directions = Vec::with_capacity(q_ms);
    for q in 0..q_ms {
        let mut mags = Vec::with_capacity(m_srrh);
        let mut dirs = Vec::with_capacity(m_srrh);
        for m in 0..m_srrh {
            if plan.allocation.serves(m, q) {
                let h = eff.link(q, m);
                let r = quantize_direction(h, bits, mode, rng)?;
                mags.push(norm(h));
                dirs.push(r.quantized_direction);
            } else {
                mags.push(0.0);
                dirs.push(vec![C64::ZERO; eff.n_eff()]);
            }
        }
        magnitudes.push(mags);
        directions.push(dirs);
    }
    Ok(QuantizedCsi::from_parts(magnitudes, directions))
}

// ---------------------------------------------------------------------------
// PaQ beamformers
// ---------------------------------------------------------------------------

/// Masked joint ZF in the effective space.
///
/// For each MS `q` the beam lives on the coordinates of its serving S-RRHs
/// (so S-RRHs that do not serve `q` transmit nothing for it) and is
/// orthogonal to every masked interferer `ĥ̃_j ⊙ (v_q ⊗ 1)`; interferers
/// sharing no S-RRH with `q` impose no constraint, leaving `Q̃_q − 1` active
/// ones.
pub fn paq_precoders(
    eff_csi: &QuantizedCsi,
    plan: &PaqPlan,
) -> Result<PrecoderSet, PrecodingError> {
    let q_ms = eff_csi.q_ms();
    let m_srrh = eff_csi.m_srrh();
    let n_eff = plan.n_t_eff;
    let stats = &plan.stats;
    let stacked: Vec<CVector> = (0..q_ms).map(|q| eff_csi.stacked_estimate(q)).collect();

    let mut vectors = Vec::with_capacity(q_ms);
    for q in 0..q_ms {
        let hosts: Vec<usize> = (0..m_srrh).filter(|&m| stats.v_masks[q][m]).collect();
        if hosts.is_empty() {
            return Err(PrecodingError::UnservedMs(q));
        }
        let dim_red = hosts.len() * n_eff;
        let need = stats.q_tilde[q];
        if dim_red < need {
            return Err(PrecodingError::DimensionShortfall {
                q,
                need,
                have: dim_red,
            });
        }
        let gather = |j: usize| -> CVector {
            let mut v = Vec::with_capacity(dim_red);
            for &m in &hosts {
                v.extend_from_slice(&stacked[j][m * n_eff..(m + 1) * n_eff]);
            }
            v
        };
        let interferers: Vec<CVector> = (0..q_ms)
            .filter(|&j| j != q && stats.m_qj[q][j] > 0)
            .map(gather)
            .collect();
        debug_assert_eq!(interferers.len(), need - 1);
        let own = gather(q);
        let reduced = zf_one(&own, &interferers)?;
        // scatter back; non-serving blocks stay exactly zero
        let mut full = vec![C64::ZERO; m_srrh * n_eff];
        for (k, &m) in hosts.iter().enumerate() {
            full[m * n_eff..(m + 1) * n_eff].copy_from_slice(&reduced[k * n_eff..(k + 1) * n_eff]);
        }
        vectors.push(full);
    }
    Ok(PrecoderSet::new(m_srrh, n_eff, vectors))
}

/// Lifts effective-space beamformers back to antenna space, block-wise
/// `p̂_{q,m} = A_m p̃_{q,m}`.  An isometry: norms are preserved.
pub fn lift_beamformer(precoders: &PrecoderSet, plan: &PaqPlan) -> PrecoderSet {
    let q_ms = precoders.q_ms();
    let m_srrh = precoders.m_srrh();
    let vectors = (0..q_ms)
        .map(|q| {
            let mut full = Vec::with_capacity(m_srrh * plan.n_t);
            for m in 0..m_srrh {
                full.extend(plan.front_ends[m].mul(precoders.block(q, m)));
            }
            full
        })
        .collect();
    PrecoderSet::new(m_srrh, plan.n_t, vectors)
}

/// Quantizes a precoder set for the backward (CU → S-RRH) link: per-block
/// direction via RVQ, magnitude exact.  Exactly-zero blocks are known at both
/// ends and consume neither bits nor randomness.
pub fn quantize_precoder_set<R: Rng>(
    precoders: &PrecoderSet,
    bits: u32,
    mode: RvqMode,
    rng: &mut R,
) -> Result<PrecoderSet, PrecodingError> {
    let (q_ms, m_srrh, bl) = (precoders.q_ms(), precoders.m_srrh(), precoders.block_len());
    let mut vectors = Vec::with_capacity(q_ms);
    for q in 0..q_ms {
        let mut v = Vec::with_capacity(m_srrh * bl);
        for m in 0..m_srrh {
            let block = precoders.block(q, m);
            let mag = norm(block);
            if mag == 0.0 {
                v.extend(std::iter::repeat_n(C64::ZERO, bl));
            } else {
                let r = quantize_direction(block, bits, mode, rng)?;
                v.extend(r.quantized_direction.iter().map(|x| x * mag));
            }
        }
        vectors.push(v);
    }
    Ok(PrecoderSet::new(m_srrh, bl, vectors))
}

/// Equal power-backoff factor: `γ = min_m Q_eff / Σ_q ‖p_{q,m}‖²`, so that
/// per-MS power `γ·P_max/Q_eff` drives at least one S-RRH exactly to its
/// power constraint and none beyond.  S-RRHs with all-zero blocks transmit
/// nothing and are excluded from the minimum.
pub fn power_backoff(precoders: &PrecoderSet, q_eff: usize) -> Result<f64, PrecodingError> {
    let mut gamma = f64::INFINITY;
    for m in 0..precoders.m_srrh() {
        let s: f64 = (0..precoders.q_ms())
            .map(|q| precoders.block_norm_sq(q, m))
            .sum();
        if s > 0.0 {
            gamma = gamma.min(q_eff as f64 / s);
        }
    }
    if !gamma.is_finite() {
        return Err(PrecodingError::AllBlocksZero);
    }
    Ok(gamma)
}
