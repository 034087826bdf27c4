//! Closed-form upper bounds on the ergodic rate loss under quantized CSI,
//! for the standard and the PaQ feedback schemes, and the resulting rate
//! lower bounds.
//!
//! The building blocks are the RVQ error moments
//! `𝒰(x, a) = x·β(x, 1+a)` (with `E{Z^i} = 𝒰(2^b, a·i)`, `a = 1/(N−1)`),
//! the order-statistic spread `𝒱_M`, the perfect-CSI rate `φ(T, ρ)` and the
//! confluent hypergeometric `U(1/2, ·, ·)`.  All `2^{B/Q}`-type quantities
//! are formed in the log domain so that bit budgets in the hundreds stay
//! accurate.

use crate::precoding::ServingStats;
use crate::rates::{perfect_csi_rate_phi, standard_t};
use crate::special::{confluent_u, gamma_fn, log_beta, SpecialError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("moment variance came out negative beyond tolerance: {0}")]
    NegativeVariance(f64),
    #[error("reduced link dimension T̃ = {0} is below 1")]
    TTildeTooSmall(i64),
    #[error("symmetric policy requires Q/M and M·Q̄/Q integer")]
    Divisibility,
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// Parameter point for the bound evaluators.  `bits_total` is the per-S-RRH
/// bit budget `B`, real-valued so crossing searches can walk a fine grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub m_srrh: usize,
    pub q_ms: usize,
    pub n_t: usize,
    pub q_bar: usize,
    pub bits_total: f64,
    /// `P_max`, linear.
    pub p_max: f64,
}

impl BoundParams {
    pub fn standard(m: usize, q: usize, n_t: usize, bits: f64, p_max: f64) -> Self {
        Self {
            m_srrh: m,
            q_ms: q,
            n_t,
            q_bar: 0,
            bits_total: bits,
            p_max,
        }
    }

    fn check_common(&self) -> Result<(), BoundError> {
        if self.m_srrh < 1 || self.q_ms < 2 {
            return Err(BoundError::Domain("need M ≥ 1 and Q ≥ 2".into()));
        }
        if self.n_t < 2 {
            return Err(BoundError::Domain("need N_t ≥ 2".into()));
        }
        if !(self.p_max > 0.0) {
            return Err(BoundError::Domain("P_max must be positive".into()));
        }
        if self.bits_total < (self.q_ms - self.q_bar) as f64 {
            return Err(BoundError::Domain(
                "bit budget below one bit per quantized vector".into(),
            ));
        }
        Ok(())
    }

    fn check_paq(&self) -> Result<(), BoundError> {
        self.check_common()?;
        if self.q_bar + 2 > self.n_t {
            return Err(BoundError::Domain("PaQ needs Ñ_t = N_t − Q̄ ≥ 2".into()));
        }
        if self.q_bar >= self.q_ms {
            return Err(BoundError::Domain("Q̄ must be below Q".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Moment building blocks
// ---------------------------------------------------------------------------

/// `ln 𝒰(2^{log2x}, a)`.  Beyond the reach of `f64` powers the asymptotic
/// `𝒰(x, a) = Γ(1+a)·x^{−a}·(1 + O(1/x))` is exact to roundoff, so bit
/// budgets are unbounded.
fn ln_moment_u_log2(log2x: f64, a: f64) -> Result<f64, BoundError> {
    if !(log2x >= 0.0) || !log2x.is_finite() {
        return Err(BoundError::Domain(format!(
            "moment needs log2(x) ≥ 0, got {log2x}"
        )));
    }
    if !(a > 0.0) {
        return Err(BoundError::Domain(format!("moment needs a > 0, got {a}")));
    }
    if log2x > 500.0 {
        Ok(gamma_fn(1.0 + a).ln() - a * std::f64::consts::LN_2 * log2x)
    } else {
        let x = log2x.exp2();
        Ok(x.ln() + log_beta(x, 1.0 + a)?)
    }
}

fn moment_u_log2(log2x: f64, a: f64) -> Result<f64, BoundError> {
    Ok(ln_moment_u_log2(log2x, a)?.exp())
}

/// `𝒰(x, a) = x·β(x, 1+a)`, the exact `i`-th moment of the RVQ error at
/// `x = 2^b`, `a = i/(N−1)`.  Evaluated in the log domain so it survives
/// `x = 2^{1000}`.
pub fn moment_u(x: f64, a: f64) -> Result<f64, BoundError> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(BoundError::Domain(format!(
            "moment_u needs finite x ≥ 1, got {x}"
        )));
    }
    moment_u_log2(x.log2(), a)
}

fn spread_v_log2(m_sub: usize, log2x: f64, a: f64) -> Result<f64, BoundError> {
    if m_sub < 1 {
        return Err(BoundError::Domain("spread_v needs M ≥ 1".into()));
    }
    let radicand = moment_u_log2(log2x, 2.0 * a)? - moment_u_log2(log2x, a)?.powi(2);
    if radicand < -1e-12 {
        return Err(BoundError::NegativeVariance(radicand));
    }
    let m = m_sub as f64;
    Ok((m - 1.0) / (2.0 * m - 1.0).sqrt() * radicand.max(0.0).sqrt())
}

/// Order-statistic spread across `m_sub` blocks:
/// `𝒱_M(x, a) = (M−1)/√(2M−1) · √(𝒰(x, 2a) − 𝒰(x, a)²)`.
/// The radicand is the variance of one error variate; a tiny negative value
/// from roundoff is clamped, anything worse is an error.
pub fn spread_v(m_sub: usize, x: f64, a: f64) -> Result<f64, BoundError> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(BoundError::Domain(format!(
            "spread_v needs finite x ≥ 1, got {x}"
        )));
    }
    spread_v_log2(m_sub, x.log2(), a)
}

/// Asymptotic constant replacing `𝒱` in the leading-order gap terms:
/// `V_M(a) = √(Γ(2a+1) − Γ(a+1)²)·(M−1)/√(2M−1)`.
pub fn spread_v_const(m_sub: usize, a: f64) -> f64 {
    let m = m_sub as f64;
    (gamma_fn(2.0 * a + 1.0) - gamma_fn(a + 1.0).powi(2))
        .max(0.0)
        .sqrt()
        * (m - 1.0)
        / (2.0 * m - 1.0).sqrt()
}

/// The interference bracket shared by both schemes' first gap term:
/// `a·w·(2(1−u_a) + w) + (1−u_a)² − (1−u_a/2 − u_2a)⁴` with `w = x^{−a}`.
fn interference_bracket(log2x: f64, a: f64) -> Result<f64, BoundError> {
    let u_a = moment_u_log2(log2x, a)?;
    let u_2a = moment_u_log2(log2x, 2.0 * a)?;
    let w = (-a * log2x).exp2();
    Ok(a * w * (2.0 * (1.0 - u_a) + w) + (1.0 - u_a).powi(2) - (1.0 - 0.5 * u_a - u_2a).powi(4))
}

/// `π√P·N·M/√2 · U(1/2, (1−N·M)/2, 1/(2P))`: the coefficient of the
/// beam-misalignment term.
fn misalignment_coefficient(p: f64, n_dim: usize, m_eff: f64) -> Result<f64, BoundError> {
    let nm = n_dim as f64 * m_eff;
    let u = confluent_u(0.5, 0.5 * (1.0 - nm), 1.0 / (2.0 * p))?;
    Ok(std::f64::consts::PI * p.sqrt() * nm / std::f64::consts::SQRT_2 * u)
}

// ---------------------------------------------------------------------------
// Standard scheme
// ---------------------------------------------------------------------------

/// The two components of the rate-gap upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateGap {
    /// Residual-interference term.
    pub delta_r1: f64,
    /// Desired-beam degradation term.
    pub delta_r2: f64,
}

impl RateGap {
    pub fn total(&self) -> f64 {
        self.delta_r1 + self.delta_r2
    }
}

/// Rate-gap upper bound for the standard scheme at a symmetric parameter
/// point (`α_q = 1`): each of the `Q` channels and beamformers is quantized
/// with `B/Q` bits.
pub fn standard_rate_gap(p: &BoundParams) -> Result<RateGap, BoundError> {
    p.check_common()?;
    let (m, q, n_t) = (p.m_srrh as f64, p.q_ms as f64, p.n_t as f64);
    let a = 1.0 / (n_t - 1.0);
    let pw = p.p_max / q;
    let log2x = p.bits_total / q;

    let delta_r1 = (1.0 + pw * n_t * (q - 1.0) / m * interference_bracket(log2x, a)?).log2();

    let t = standard_t(p.m_srrh, p.q_ms, p.n_t);
    let r_star = perfect_csi_rate_phi(t, pw / m)?;
    let delta_r2 = 6.0 * r_star * (moment_u_log2(log2x, a)? + spread_v_log2(p.m_srrh, log2x, a)?)
        + misalignment_coefficient(pw, p.n_t, m)?
            * (moment_u_log2(log2x, 0.5 * a)? + spread_v_log2(p.m_srrh, log2x, 0.5 * a)?);
    Ok(RateGap { delta_r1, delta_r2 })
}

/// Leading-order closed form of the standard-scheme gap:
/// `2^{−B/(2Q(N_t−1))} · π√P·N_t·M/√2 · U(1/2, (1−N_tM)/2, 1/(2P)) ·
///  [V_M(a/2) + Γ(a/2+1)]`.
pub fn standard_gap_leading_term(p: &BoundParams) -> Result<f64, BoundError> {
    p.check_common()?;
    let (q, n_t) = (p.q_ms as f64, p.n_t as f64);
    let a = 1.0 / (n_t - 1.0);
    let pw = p.p_max / q;
    let decay = (-p.bits_total / (2.0 * q * (n_t - 1.0))).exp2();
    Ok(decay
        * misalignment_coefficient(pw, p.n_t, p.m_srrh as f64)?
        * (spread_v_const(p.m_srrh, 0.5 * a) + gamma_fn(0.5 * a + 1.0)))
}

// ---------------------------------------------------------------------------
// PaQ scheme
// ---------------------------------------------------------------------------

/// Per-MS gap components for the PaQ scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaqRateGap {
    pub delta_r1: f64,
    pub delta_r2: f64,
    /// Array-gain loss `φ(T, P/M) − φ(T̃, P̃/M)`: the `B`-independent price
    /// of the dimension reduction.
    pub delta_r_ag: f64,
    /// `φ(T̃, P̃/M)`: the PaQ perfect-CSI rate.
    pub r_star_reduced: f64,
    pub t_reduced: usize,
}

impl PaqRateGap {
    pub fn total(&self) -> f64 {
        self.delta_r1 + self.delta_r2 + self.delta_r_ag
    }
}

/// PaQ rate-gap upper bound per MS, from explicit serving statistics
/// (symmetric `α = 1/M` supposition).  Each of the `Q − Q̄` effective
/// channels/beamformers per S-RRH is quantized with `B/(Q−Q̄)` bits.
pub fn paq_rate_gap_per_ms(
    p: &BoundParams,
    stats: &ServingStats,
) -> Result<Vec<PaqRateGap>, BoundError> {
    p.check_paq()?;
    let (m, q) = (p.m_srrh as f64, p.q_ms as f64);
    let n_eff = p.n_t - p.q_bar;
    let a_eff = 1.0 / (n_eff as f64 - 1.0);
    let q_eff = q - p.q_bar as f64;
    let p_eff = p.p_max / q_eff;
    let log2x = p.bits_total / q_eff;
    let t = standard_t(p.m_srrh, p.q_ms, p.n_t);
    let r_star_full = perfect_csi_rate_phi(t, p.p_max / q / m)?;
    let bracket = interference_bracket(log2x, a_eff)?;

    let mut out = Vec::with_capacity(p.q_ms);
    for q_idx in 0..p.q_ms {
        let mut coupling = 0.0;
        for j in 0..p.q_ms {
            if j != q_idx && stats.m_qj[q_idx][j] > 0 {
                coupling += n_eff as f64 * stats.m_qj[q_idx][j] as f64 / (stats.m_q[j] as f64 * m);
            }
        }
        let delta_r1 = (1.0 + p_eff * coupling * bracket).log2();

        let m_q = stats.m_q[q_idx];
        let t_reduced_i = (m_q * n_eff) as i64 - (stats.q_tilde[q_idx] as i64 - 1);
        if t_reduced_i < 1 {
            return Err(BoundError::TTildeTooSmall(t_reduced_i));
        }
        let t_reduced = t_reduced_i as usize;
        let r_star_reduced = perfect_csi_rate_phi(t_reduced, p_eff / m)?;
        let delta_r2 = 6.0
            * r_star_reduced
            * (moment_u_log2(log2x, a_eff)? + spread_v_log2(m_q, log2x, a_eff)?)
            + misalignment_coefficient(p_eff, n_eff, m_q as f64)?
                * (moment_u_log2(log2x, 0.5 * a_eff)? + spread_v_log2(m_q, log2x, 0.5 * a_eff)?);
        out.push(PaqRateGap {
            delta_r1,
            delta_r2,
            delta_r_ag: r_star_full - r_star_reduced,
            r_star_reduced,
            t_reduced,
        });
    }
    Ok(out)
}

/// Reduced link dimension under the symmetric selection policy:
/// `T̃ = M(1−Q̄/Q)·Ñ_t + 1 − min(Q, (2−1/M)Q − 2Q̄)`.
pub fn symmetric_t_reduced(m: usize, q: usize, q_bar: usize, n_t: usize) -> i64 {
    let (mf, qf, qb) = (m as f64, q as f64, q_bar as f64);
    let served = mf * (1.0 - qb / qf);
    let coupled = qf.min((2.0 - 1.0 / mf) * qf - 2.0 * qb);
    (served * (n_t - q_bar) as f64 + 1.0 - coupled).round() as i64
}

/// PaQ rate-gap bound under the symmetric selection policy, where every MS
/// sees the same gap.  Requires `Q/M ∈ ℕ` and `M·Q̄/Q ∈ ℕ`.
pub fn paq_rate_gap_symmetric(p: &BoundParams) -> Result<PaqRateGap, BoundError> {
    p.check_paq()?;
    if !p.q_ms.is_multiple_of(p.m_srrh) || !(p.m_srrh * p.q_bar).is_multiple_of(p.q_ms) {
        return Err(BoundError::Divisibility);
    }
    let (m, q) = (p.m_srrh as f64, p.q_ms as f64);
    let n_eff = p.n_t - p.q_bar;
    let a_eff = 1.0 / (n_eff as f64 - 1.0);
    let q_eff = q - p.q_bar as f64;
    let p_eff = p.p_max / q_eff;
    let log2x = p.bits_total / q_eff;
    let m_served = (p.m_srrh * (p.q_ms - p.q_bar)) / p.q_ms; // (1−Q̄/Q)·M, integer

    let delta_r1 = (1.0
        + p_eff * n_eff as f64 * (q_eff - 1.0) / m * interference_bracket(log2x, a_eff)?)
    .log2();

    let t_reduced_i = symmetric_t_reduced(p.m_srrh, p.q_ms, p.q_bar, p.n_t);
    if t_reduced_i < 1 {
        return Err(BoundError::TTildeTooSmall(t_reduced_i));
    }
    let t_reduced = t_reduced_i as usize;
    let r_star_reduced = perfect_csi_rate_phi(t_reduced, p_eff / m)?;
    let delta_r2 = 6.0
        * r_star_reduced
        * (moment_u_log2(log2x, a_eff)? + spread_v_log2(m_served, log2x, a_eff)?)
        + misalignment_coefficient(p_eff, n_eff, m_served as f64)?
            * (moment_u_log2(log2x, 0.5 * a_eff)? + spread_v_log2(m_served, log2x, 0.5 * a_eff)?);

    let t = standard_t(p.m_srrh, p.q_ms, p.n_t);
    let r_star_full = perfect_csi_rate_phi(t, p.p_max / q / m)?;
    Ok(PaqRateGap {
        delta_r1,
        delta_r2,
        delta_r_ag: r_star_full - r_star_reduced,
        r_star_reduced,
        t_reduced,
    })
}

/// Which `M` enters the asymptotic spread constant of the PaQ leading term.
/// The closed form is printed with the full cluster size, although its
/// source term uses the per-MS serving count `(1−Q̄/Q)·M`; both are exposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpreadSubscript {
    #[default]
    AsPrinted,
    ServingCount,
}

/// Leading-order closed form of the PaQ gap:
/// `2^{−B/(2(Q−Q̄)(Ñ_t−1))} · π√P̃·Ñ_t(1−Q̄/Q)M/√2 ·
///  U(1/2, (1−Ñ_t(1−Q̄/Q)M)/2, 1/(2P̃)) · [V(ã/2) + Γ(ã/2+1)]`.
pub fn paq_gap_leading_term(
    p: &BoundParams,
    subscript: SpreadSubscript,
) -> Result<f64, BoundError> {
    p.check_paq()?;
    let (m, q) = (p.m_srrh as f64, p.q_ms as f64);
    let n_eff = p.n_t - p.q_bar;
    let a_eff = 1.0 / (n_eff as f64 - 1.0);
    let q_eff = q - p.q_bar as f64;
    let p_eff = p.p_max / q_eff;
    let served = m * (1.0 - p.q_bar as f64 / q);
    let decay = (-p.bits_total / (2.0 * q_eff * (n_eff as f64 - 1.0))).exp2();
    let m_sub = match subscript {
        SpreadSubscript::AsPrinted => p.m_srrh,
        SpreadSubscript::ServingCount => {
            (p.m_srrh * (p.q_ms - p.q_bar)).div_ceil(p.q_ms) // ceil, exact when divisible
        }
    };
    Ok(decay
        * misalignment_coefficient(p_eff, n_eff, served)?
        * (spread_v_const(m_sub, 0.5 * a_eff) + gamma_fn(0.5 * a_eff + 1.0)))
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Scheme selector for [`lower_bound_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundScheme {
    Standard,
    /// PaQ under the symmetric selection policy.
    PaqSymmetric,
}

/// Assembled lower bound at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub delta_r1: f64,
    pub delta_r2: f64,
    pub delta_r_ag: f64,
    /// Perfect-CSI rate `φ(T, P/M)` of the standard scheme.
    pub r_star: f64,
    /// `R* − ΔR₁ − ΔR₂ − ΔR_AG`, possibly negative (kept for crossing plots).
    pub raw_lower_bound: f64,
    /// Raw value clamped at zero: a negative rate bound is vacuous.
    pub lower_bound: f64,
}

/// Rate lower bound `R̂ ≥ R* − ΔR₁ − ΔR₂ (− ΔR_AG)` at one parameter point.
pub fn lower_bound_report(scheme: BoundScheme, p: &BoundParams) -> Result<BoundReport, BoundError> {
    let t = standard_t(p.m_srrh, p.q_ms, p.n_t);
    let r_star = perfect_csi_rate_phi(t, p.p_max / p.q_ms as f64 / p.m_srrh as f64)?;
    let (delta_r1, delta_r2, delta_r_ag) = match scheme {
        BoundScheme::Standard => {
            let g = standard_rate_gap(p)?;
            (g.delta_r1, g.delta_r2, 0.0)
        }
        BoundScheme::PaqSymmetric => {
            let g = paq_rate_gap_symmetric(p)?;
            (g.delta_r1, g.delta_r2, g.delta_r_ag)
        }
    };
    let raw = r_star - delta_r1 - delta_r2 - delta_r_ag;
    Ok(BoundReport {
        delta_r1,
        delta_r2,
        delta_r_ag,
        r_star,
        raw_lower_bound: raw,
        lower_bound: raw.max(0.0),
    })
}

/// First bit budget (1-bit grid) at which the best lower bound over the
/// given candidate set turns positive.  For the standard scheme candidates
/// are antenna counts; for PaQ they are discard counts at fixed `N_t`.
pub fn positivity_crossing(
    scheme: BoundScheme,
    m: usize,
    q: usize,
    n_t_max: usize,
    candidates: &[usize],
    p_max: f64,
    b_limit: u32,
) -> Option<u32> {
    for b in (q as u32)..=b_limit {
        for &c in candidates {
            let params = match scheme {
                BoundScheme::Standard => BoundParams::standard(m, q, c, b as f64, p_max),
                BoundScheme::PaqSymmetric => BoundParams {
                    m_srrh: m,
                    q_ms: q,
                    n_t: n_t_max,
                    q_bar: c,
                    bits_total: b as f64,
                    p_max,
                },
            };
            if let Ok(r) = lower_bound_report(scheme, &params) {
                if r.raw_lower_bound > 0.0 {
                    return Some(b);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::db_to_linear;
    use crate::linalg::C64;
    use crate::precoding::{serving_stats, symmetric_allocation};
    use crate::rvq::quantize_surrogate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn moment_u_closed_forms() {
        // 𝒰(1, a) = 1/(1+a); 𝒰(x, 1) = 1/(x+1)
        assert!((moment_u(1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!((moment_u(4.0, 1.0).unwrap() - 0.2).abs() < 1e-14);
    }

    #[test]
    fn moment_u_matches_min_of_uniforms_oracle() {
        // 𝒰(4, 1) = E{min of 4 Uniform(0,1)} = 1/5
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let m = (0..4).map(|_| rng.random::<f64>()).fold(1.0f64, f64::min);
            sum += m;
            sum_sq += m * m;
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((moment_u(4.0, 1.0).unwrap() - mean).abs() <= 4.0 * se);
    }

    #[test]
    fn moment_u_asymptotic_ratio() {
        // 𝒰(x, a) → Γ(1+a)·x^{−a} as x → ∞
        let a = 1.0 / 7.0;
        let mut prev_err = f64::INFINITY;
        for &log2x in &[4.0f64, 8.0, 16.0, 32.0, 64.0, 128.0] {
            let x = log2x.exp2();
            let ratio = moment_u(x, a).unwrap() / (gamma_fn(1.0 + a) * (-a * log2x).exp2());
            let err = (ratio - 1.0).abs();
            assert!(err < prev_err || err < 1e-12, "x=2^{log2x}: ratio {ratio}");
            prev_err = err;
        }
        assert!(prev_err < 1e-10);
    }

    #[test]
    fn moment_u_domain() {
        assert!(moment_u(0.5, 1.0).is_err());
        assert!(moment_u(2.0, 0.0).is_err());
    }

    #[test]
    fn spread_v_vanishes_for_single_block_and_grows_with_m() {
        let x = 64.0;
        let a = 1.0 / 3.0;
        assert_eq!(spread_v(1, x, a).unwrap(), 0.0);
        let mut prev = 0.0;
        for m in 1..8 {
            let v = spread_v(m, x, a).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn spread_v_radicand_is_the_error_variance() {
        // var(Z) at (N, b) = (4, 6) against the sampling oracle
        let (n_dim, b) = (4usize, 6u32);
        let a = 1.0 / (n_dim as f64 - 1.0);
        let x = (b as f64).exp2();
        let radicand = moment_u(x, 2.0 * a).unwrap() - moment_u(x, a).unwrap().powi(2);
        let mut rng = ChaCha8Rng::seed_from_u64(808);
        let v = vec![C64::ONE, C64::ZERO, C64::ZERO, C64::ZERO];
        let trials = 200_000;
        let zs: Vec<f64> = (0..trials)
            .map(|_| quantize_surrogate(&v, b, &mut rng).unwrap().z)
            .collect();
        let mean = zs.iter().sum::<f64>() / trials as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / trials as f64;
        // SE of a sample variance ≈ var·√(2/(n−1)) for roughly-normal data;
        // use the generic moment-based SE instead
        let fourth = zs.iter().map(|z| (z - mean).powi(4)).sum::<f64>() / trials as f64;
        let se = ((fourth - var * var) / trials as f64).sqrt();
        assert!(
            (radicand - var).abs() <= 4.0 * se,
            "radicand {radicand} vs sample var {var} (se {se})"
        );
    }

    #[test]
    fn standard_gap_vanishes_with_bits() {
        let p = BoundParams::standard(4, 8, 8, 1e4, db_to_linear(35.0));
        let g = standard_rate_gap(&p).unwrap();
        assert!(
            g.delta_r1.abs() < 1e-10 && g.delta_r2.abs() < 1e-10,
            "{g:?}"
        );
    }

    #[test]
    fn standard_gap_nonincreasing_in_bits() {
        let p35 = db_to_linear(35.0);
        let mut prev = f64::INFINITY;
        for b in (16..400).step_by(8) {
            let p = BoundParams::standard(4, 8, 8, b as f64, p35);
            let g = standard_rate_gap(&p).unwrap().total();
            assert!(g <= prev + 1e-12, "gap increased at B={b}");
            prev = g;
        }
    }

    #[test]
    fn standard_bound_crossing_is_in_the_expected_window() {
        // maximized over N_t ∈ {2..8}: first positive near B ≈ 75 (±30%)
        let b = positivity_crossing(
            BoundScheme::Standard,
            4,
            8,
            8,
            &[2, 3, 4, 5, 6, 7, 8],
            db_to_linear(35.0),
            400,
        )
        .unwrap();
        assert!((53..=97).contains(&b), "crossing at {b}");
    }

    #[test]
    fn paq_bound_crossing_is_in_the_expected_window() {
        // maximized over feasible Q̄ ∈ {2, 4, 6}: first positive near B ≈ 20
        let b = positivity_crossing(
            BoundScheme::PaqSymmetric,
            4,
            8,
            8,
            &[2, 4, 6],
            db_to_linear(35.0),
            400,
        )
        .unwrap();
        assert!((14..=26).contains(&b), "crossing at {b}");
    }

    #[test]
    fn leading_term_ratio_approaches_one() {
        let p_max = db_to_linear(35.0);
        let mut prev = f64::INFINITY;
        for &b in &[320.0, 640.0, 1280.0, 1600.0, 2000.0] {
            let p = BoundParams::standard(4, 8, 8, b, p_max);
            let full = standard_rate_gap(&p).unwrap().total();
            let lead = standard_gap_leading_term(&p).unwrap();
            let err = (full / lead - 1.0).abs();
            assert!(err < prev + 1e-9, "B={b}: |ratio−1| grew to {err}");
            prev = err;
        }
        assert!(prev < 0.01, "final |ratio−1| = {prev}");
    }

    #[test]
    fn leading_term_log_slope_is_exact() {
        let p_max = db_to_linear(35.0);
        let p1 = BoundParams::standard(4, 8, 8, 200.0, p_max);
        let p2 = BoundParams::standard(4, 8, 8, 312.0, p_max);
        let slope = (standard_gap_leading_term(&p2).unwrap().log2()
            - standard_gap_leading_term(&p1).unwrap().log2())
            / (312.0 - 200.0);
        let want = -1.0 / (2.0 * 8.0 * 7.0);
        assert!((slope - want).abs() < 1e-12);
    }

    #[test]
    fn leading_term_single_srrh_drops_spread() {
        let p = BoundParams::standard(1, 2, 4, 64.0, 100.0);
        let lead = standard_gap_leading_term(&p).unwrap();
        let a = 1.0 / 3.0;
        let gamma_only = (-(64.0f64) / (2.0 * 2.0 * 3.0)).exp2()
            * misalignment_coefficient(50.0, 4, 1.0).unwrap()
            * gamma_fn(0.5 * a + 1.0);
        assert!((lead / gamma_only - 1.0).abs() < 1e-12);
    }

    #[test]
    fn paq_gap_reduces_to_standard_at_zero_discards() {
        let p_max = db_to_linear(35.0);
        for &b in &[80.0, 160.0, 250.0] {
            let p = BoundParams {
                m_srrh: 4,
                q_ms: 8,
                n_t: 8,
                q_bar: 0,
                bits_total: b,
                p_max,
            };
            let std = standard_rate_gap(&p).unwrap();
            let paq = paq_rate_gap_symmetric(&p).unwrap();
            assert!((std.delta_r1 - paq.delta_r1).abs() < 1e-12);
            assert!((std.delta_r2 - paq.delta_r2).abs() < 1e-12);
            assert!(paq.delta_r_ag.abs() < 1e-12);
            // and per-MS with full stats agrees too
            let stats = serving_stats(&symmetric_allocation(4, 8, 0).unwrap());
            let per = paq_rate_gap_per_ms(&p, &stats).unwrap();
            for g in per {
                assert!((g.delta_r1 - std.delta_r1).abs() < 1e-12);
                assert!((g.delta_r2 - std.delta_r2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_closed_form_equals_per_ms_evaluation() {
        let p_max = db_to_linear(35.0);
        for &q_bar in &[2usize, 4, 6] {
            let p = BoundParams {
                m_srrh: 4,
                q_ms: 8,
                n_t: 8,
                q_bar,
                bits_total: 120.0,
                p_max,
            };
            let sym = paq_rate_gap_symmetric(&p).unwrap();
            let stats = serving_stats(&symmetric_allocation(4, 8, q_bar).unwrap());
            let per = paq_rate_gap_per_ms(&p, &stats).unwrap();
            for g in per {
                assert!((g.delta_r1 - sym.delta_r1).abs() < 1e-12, "q̄={q_bar}");
                assert!((g.delta_r2 - sym.delta_r2).abs() < 1e-12, "q̄={q_bar}");
                assert!((g.delta_r_ag - sym.delta_r_ag).abs() < 1e-12, "q̄={q_bar}");
                assert_eq!(g.t_reduced as i64, symmetric_t_reduced(4, 8, q_bar, 8));
            }
        }
    }

    #[test]
    fn paq_gap_tends_to_array_gain_loss() {
        let p = BoundParams {
            m_srrh: 4,
            q_ms: 8,
            n_t: 8,
            q_bar: 4,
            bits_total: 1e4,
            p_max: db_to_linear(35.0),
        };
        let g = paq_rate_gap_symmetric(&p).unwrap();
        assert!(g.delta_r1.abs() < 1e-10 && g.delta_r2.abs() < 1e-10);
        assert!(g.delta_r_ag > 0.0);
    }

    #[test]
    fn paq_leading_term_reduces_and_decays_faster() {
        let p_max = db_to_linear(35.0);
        let p0 = BoundParams {
            m_srrh: 4,
            q_ms: 8,
            n_t: 8,
            q_bar: 0,
            bits_total: 160.0,
            p_max,
        };
        let c1 = standard_gap_leading_term(&p0).unwrap();
        let c3 = paq_gap_leading_term(&p0, SpreadSubscript::AsPrinted).unwrap();
        assert!((c1 / c3 - 1.0).abs() < 1e-12);
        // per-bit decay exponent: PaQ is strictly faster whenever
        // (Q−Q̄)(Ñ_t−1) < Q(N_t−1)
        let p4 = BoundParams { q_bar: 4, ..p0 };
        let b2 = BoundParams {
            bits_total: 260.0,
            ..p4
        };
        let slope_paq = (paq_gap_leading_term(&b2, SpreadSubscript::AsPrinted)
            .unwrap()
            .log2()
            - paq_gap_leading_term(&p4, SpreadSubscript::AsPrinted)
                .unwrap()
                .log2())
            / 100.0;
        assert!((slope_paq - (-1.0 / (2.0 * 4.0 * 3.0))).abs() < 1e-12);
        assert!(slope_paq < -1.0 / (2.0 * 8.0 * 7.0));
    }

    #[test]
    fn paq_leading_term_ratio_with_serving_count_subscript() {
        // the effective-subscript variant is the asymptotically exact one
        let p_max = db_to_linear(35.0);
        for &b in &[480.0, 640.0] {
            let p = BoundParams {
                m_srrh: 4,
                q_ms: 8,
                n_t: 8,
                q_bar: 4,
                bits_total: b,
                p_max,
            };
            let full = paq_rate_gap_symmetric(&p).unwrap();
            let lead = paq_gap_leading_term(&p, SpreadSubscript::ServingCount).unwrap();
            let ratio = (full.delta_r1 + full.delta_r2) / lead;
            assert!((ratio - 1.0).abs() < 0.02, "B={b}: ratio {ratio}");
        }
    }

    #[test]
    fn report_clamps_and_limits() {
        let p_max = db_to_linear(35.0);
        let small = BoundParams::standard(4, 8, 8, 16.0, p_max);
        let r = lower_bound_report(BoundScheme::Standard, &small).unwrap();
        assert_eq!(r.lower_bound, 0.0);
        assert!(r.raw_lower_bound < 0.0);
        let huge = BoundParams::standard(4, 8, 8, 1e4, p_max);
        let r = lower_bound_report(BoundScheme::Standard, &huge).unwrap();
        assert!((r.lower_bound - r.r_star).abs() < 1e-9);
        let huge_paq = BoundParams { q_bar: 4, ..huge };
        let r = lower_bound_report(BoundScheme::PaqSymmetric, &huge_paq).unwrap();
        let t_red = symmetric_t_reduced(4, 8, 4, 8) as usize;
        let want = perfect_csi_rate_phi(t_red, p_max / 4.0 / 4.0).unwrap();
        assert!((r.lower_bound - want).abs() < 1e-9);
    }

    #[test]
    fn domain_errors_surface() {
        let p = BoundParams::standard(4, 8, 1, 80.0, 10.0);
        assert!(standard_rate_gap(&p).is_err());
        let p = BoundParams {
            m_srrh: 4,
            q_ms: 8,
            n_t: 8,
            q_bar: 7,
            bits_total: 80.0,
            p_max: 10.0,
        };
        assert!(paq_rate_gap_symmetric(&p).is_err());
        let p = BoundParams {
            m_srrh: 4,
            q_ms: 8,
            n_t: 8,
            q_bar: 3,
            bits_total: 80.0,
            p_max: 10.0,
        };
        assert_eq!(
            paq_rate_gap_symmetric(&p).unwrap_err(),
            BoundError::Divisibility
        );
    }
}
