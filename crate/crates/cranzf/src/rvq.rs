//! Random vector quantization of unit directions.
//!
//! A direction `v̄ ∈ ℂ^N` quantized with `b` bits against a codebook of `2^b`
//! i.i.d. uniform unit vectors decomposes as
//!
//! ```text
//! v̄ = √(1−Z)·ĥ̄ + √Z·s,    ĥ̄†s = 0, ‖s‖ = 1,
//! ```
//!
//! where `Z = sin²θ` is the quantization error, distributed as the minimum of
//! `2^b` Beta(N−1, 1) variates, and `s` is uniform on the unit sphere of the
//! complement of `ĥ̄`.
//!
//! Two interchangeable implementations are provided.  [`quantize_explicit`]
//! draws the codebook and searches it; its cost is `O(2^b)`, so it is capped
//! at [`B_MAX_EXPLICIT`] bits.  [`quantize_surrogate`] samples `Z` from its
//! exact law by inverse CDF and synthesizes the quantized direction; it costs
//! `O(N)` at any bit budget, which is what makes sweeps up to hundreds of
//! bits per S-RRH feasible.  The two agree in distribution (tested).

use crate::channel::ChannelSet;
use crate::linalg::{axpy, inner, norm, unit_coordinate, CVector, C64};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest codebook the explicit path will search (`2^22 ≈ 4.2M` words).
pub const B_MAX_EXPLICIT: u32 = 22;

/// Below this error the input is treated as exactly representable and the
/// error direction is chosen deterministically.
const Z_TINY: f64 = 1e-24;

#[derive(Debug, Error, PartialEq)]
pub enum RvqError {
    #[error("cannot quantize a zero vector")]
    ZeroVector,
    #[error("direction dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("explicit codebooks are capped at {B_MAX_EXPLICIT} bits, got {0}")]
    ExplicitBitsExceeded(u32),
}

/// Which quantizer implementation to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RvqMode {
    Explicit,
    Surrogate,
}

/// Result of quantizing one direction.
#[derive(Debug, Clone)]
pub struct RvqResult {
    /// Quantized unit direction `ĥ̄`, phase-aligned so that `ĥ̄†v̄ ≥ 0`.
    pub quantized_direction: CVector,
    /// Quantization error `Z = sin²θ ∈ [0, 1]`.
    pub z: f64,
    /// Unit error direction `s`, orthogonal to the quantized direction.
    pub error_direction: CVector,
}

fn uniform_unit_vector<R: Rng>(dim: usize, rng: &mut R) -> CVector {
    loop {
        let g: CVector = (0..dim)
            .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        let n = norm(&g);
        if n > 1e-150 {
            return g.iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform unit vector in the orthogonal complement of the unit vector `u`.
fn uniform_unit_in_complement<R: Rng>(u: &[C64], rng: &mut R) -> CVector {
    loop {
        let mut g: CVector = (0..u.len())
            .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        let c = inner(u, &g);
        axpy(&mut g, -c, u);
        let n = norm(&g);
        if n > 1e-10 {
            return g.iter().map(|x| x / n).collect();
        }
    }
}

/// Deterministic unit vector orthogonal to `u` (for the measure-zero case of
/// an exactly representable input): first coordinate vector with a
/// non-dominant overlap, Gram–Schmidt'ed against `u`.
fn deterministic_orthogonal(u: &[C64]) -> CVector {
    for j in 0..u.len() {
        let mut e = unit_coordinate(u.len(), j);
        let c = inner(u, &e);
        if c.norm() < 0.9 {
            axpy(&mut e, -c, u);
            let n = norm(&e);
            return e.iter().map(|x| x / n).collect();
        }
    }
    unreachable!("a unit vector cannot dominate every coordinate axis");
}

fn validated_direction(v: &[C64]) -> Result<CVector, RvqError> {
    if v.len() < 2 {
        return Err(RvqError::DimensionTooSmall(v.len()));
    }
    let n = norm(v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(RvqError::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Selects the codeword maximizing `|v̄†c|` (ties broken by lowest index) and
/// assembles the decomposition.  Exposed for tests that plant codewords.
pub fn quantize_against_codebook(v: &[C64], codebook: &[CVector]) -> Result<RvqResult, RvqError> {
    let v_bar = validated_direction(v)?;
    let mut best = 0usize;
    let mut best_corr = -1.0;
    for (i, c) in codebook.iter().enumerate() {
        let corr = inner(c, &v_bar).norm();
        if corr > best_corr {
            best_corr = corr;
            best = i;
        }
    }
    let c = &codebook[best];
    let w = inner(c, &v_bar); // c†v̄
    let cos = w.norm().min(1.0);
    let z = (1.0 - cos * cos).clamp(0.0, 1.0);
    // align phase so that ĥ̄†v̄ = cosθ is real nonnegative
    let quantized: CVector = if cos > 0.0 {
        let phase = w / cos;
        c.iter().map(|x| x * phase).collect()
    } else {
        c.clone()
    };
    let error_direction = if z > Z_TINY {
        let mut s = v_bar.clone();
        axpy(&mut s, C64::new(-(1.0 - z).sqrt(), 0.0), &quantized);
        let n = norm(&s);
        s.iter().map(|x| x / n).collect()
    } else {
        deterministic_orthogonal(&quantized)
    };
    Ok(RvqResult {
        quantized_direction: quantized,
        z,
        error_direction,
    })
}

/// Quantizes the direction of `v` against a freshly drawn random codebook of
/// `2^b` uniform unit vectors.
pub fn quantize_explicit<R: Rng>(v: &[C64], b: u32, rng: &mut R) -> Result<RvqResult, RvqError> {
    if b > B_MAX_EXPLICIT {
        return Err(RvqError::ExplicitBitsExceeded(b));
    }
    let v_bar = validated_direction(v)?;
    let words = 1usize << b;
    // stream the codebook; only the argmax word is kept
    let mut best_corr = -1.0;
    let mut best: CVector = Vec::new();
    for _ in 0..words {
        let c = uniform_unit_vector(v.len(), rng);
        let corr = inner(&c, &v_bar).norm();
        if corr > best_corr {
            best_corr = corr;
            best = c;
        }
    }
    quantize_against_codebook(&v_bar, &[best])
}

/// Inverse CDF of the minimum of `2^b` Beta(N−1, 1) variates:
/// `Z = (1 − (1−u)^{2^{−b}})^{1/(N−1)}`, evaluated as
/// `(−expm1(ln(1−u)/2^b))^{1/(N−1)}` so that bit budgets in the hundreds do
/// not collapse to 0 or 1.
pub fn min_beta_inverse_cdf(u: f64, dim: usize, b: u32) -> f64 {
    debug_assert!((0.0..1.0).contains(&u) && dim >= 2);
    let k = (b as f64).exp2();
    let log1mu = (-u).ln_1p();
    (-(log1mu / k).exp_m1()).powf(1.0 / (dim as f64 - 1.0))
}

/// Distribution-exact surrogate for RVQ at any bit budget.
///
/// Draws `Z` by inverse CDF, then a uniform direction `t` in the complement
/// of `v̄`, and synthesizes `ĥ̄ = √(1−Z)·v̄ + √Z·t`; the error direction
/// `s = √Z·v̄ − √(1−Z)·t` then satisfies the decomposition exactly.
pub fn quantize_surrogate<R: Rng>(v: &[C64], b: u32, rng: &mut R) -> Result<RvqResult, RvqError> {
    let v_bar = validated_direction(v)?;
    let u: f64 = rng.random();
    let z = min_beta_inverse_cdf(u, v.len(), b);
    let t = uniform_unit_in_complement(&v_bar, rng);
    let (cz, sz) = ((1.0 - z).sqrt(), z.sqrt());
    let quantized: CVector = v_bar
        .iter()
        .zip(&t)
        .map(|(a, tt)| a * cz + tt * sz)
        .collect();
    let error_direction: CVector = if z > Z_TINY {
        v_bar
            .iter()
            .zip(&t)
            .map(|(a, tt)| a * sz - tt * cz)
            .collect()
    } else {
        deterministic_orthogonal(&quantized)
    };
    Ok(RvqResult {
        quantized_direction: quantized,
        z,
        error_direction,
    })
}

/// Dispatches on the mode.
pub fn quantize_direction<R: Rng>(
    v: &[C64],
    b: u32,
    mode: RvqMode,
    rng: &mut R,
) -> Result<RvqResult, RvqError> {
    match mode {
        RvqMode::Explicit => quantize_explicit(v, b, rng),
        RvqMode::Surrogate => quantize_surrogate(v, b, rng),
    }
}

// ---------------------------------------------------------------------------
// Whole-cluster CSI quantization
// ---------------------------------------------------------------------------

/// Quantized CSI for a cluster: exact per-link magnitudes (the magnitude
/// information is conveyed losslessly) plus quantized unit directions.
#[derive(Debug, Clone)]
pub struct QuantizedCsi {
    q_ms: usize,
    m_srrh: usize,
    magnitudes: Vec<Vec<f64>>,
    directions: Vec<Vec<CVector>>,
}

impl QuantizedCsi {
    /// Assembles a quantized-CSI set from per-link magnitudes and unit (or
    /// exactly zero) directions.
    pub fn from_parts(magnitudes: Vec<Vec<f64>>, directions: Vec<Vec<CVector>>) -> Self {
        let q_ms = magnitudes.len();
        assert_eq!(directions.len(), q_ms);
        let m_srrh = magnitudes[0].len();
        for (mags, dirs) in magnitudes.iter().zip(&directions) {
            assert_eq!(mags.len(), m_srrh);
            assert_eq!(dirs.len(), m_srrh);
        }
        Self {
            q_ms,
            m_srrh,
            magnitudes,
            directions,
        }
    }

    pub fn q_ms(&self) -> usize {
        self.q_ms
    }

    pub fn m_srrh(&self) -> usize {
        self.m_srrh
    }

    /// Per-block direction dimension.
    pub fn block_len(&self) -> usize {
        self.directions[0][0].len()
    }

    pub fn magnitude(&self, q: usize, m: usize) -> f64 {
        self.magnitudes[q][m]
    }

    pub fn direction(&self, q: usize, m: usize) -> &CVector {
        &self.directions[q][m]
    }

    /// `ĥ_{q,m} = ‖h_{q,m}‖ · ĥ̄_{q,m}`.
    pub fn link_estimate(&self, q: usize, m: usize) -> CVector {
        let mag = self.magnitudes[q][m];
        self.directions[q][m].iter().map(|x| x * mag).collect()
    }

    /// Stacked estimate `ĥ_q ∈ ℂ^{M·N_t}`, blocks in S-RRH order.
    pub fn stacked_estimate(&self, q: usize) -> CVector {
        let mut v = Vec::new();
        for m in 0..self.m_srrh {
            v.extend(self.link_estimate(q, m));
        }
        v
    }
}

/// Quantizes every `(q, m)` channel direction independently with
/// `bits_per_vector` bits; magnitudes are copied exactly.  Links are visited
/// in `q`-outer, `m`-inner order, which pins the rng consumption.
pub fn quantize_csi_set<R: Rng>(
    channels: &ChannelSet,
    bits_per_vector: u32,
    mode: RvqMode,
    rng: &mut R,
) -> Result<QuantizedCsi, RvqError> {
    let (q_ms, m_srrh) = (channels.q_ms(), channels.m_srrh());
    let mut magnitudes = Vec::with_capacity(q_ms);
    let mut directions = Vec::with_capacity(q_ms);
    for q in 0..q_ms {
        let mut mags = Vec::with_capacity(m_srrh);
        let mut dirs = Vec::with_capacity(m_srrh);
        for m in 0..m_srrh {
            let h = channels.link(q, m);
            let r = quantize_direction(h, bits_per_vector, mode, rng)?;
            mags.push(norm(h));
            dirs.push(r.quantized_direction);
        }
        magnitudes.push(mags);
        directions.push(dirs);
    }
    Ok(QuantizedCsi {
        q_ms,
        m_srrh,
        magnitudes,
        directions,
    })
}

/// Perfect-CSI "quantization": exact magnitudes and directions.  Lets the
/// perfect-feedback pipeline share the precoder code path.
pub fn exact_csi(channels: &ChannelSet) -> QuantizedCsi {
    let (q_ms, m_srrh) = (channels.q_ms(), channels.m_srrh());
    let mut magnitudes = Vec::with_capacity(q_ms);
    let mut directions = Vec::with_capacity(q_ms);
    for q in 0..q_ms {
        let mut mags = Vec::with_capacity(m_srrh);
        let mut dirs = Vec::with_capacity(m_srrh);
        for m in 0..m_srrh {
            let h = channels.link(q, m);
            let n = norm(h);
            mags.push(n);
            dirs.push(if n > 0.0 {
                h.iter().map(|x| x / n).collect()
            } else {
                h.clone()
            });
        }
        magnitudes.push(mags);
        directions.push(dirs);
    }
    QuantizedCsi {
        q_ms,
        m_srrh,
        magnitudes,
        directions,
    }
}
