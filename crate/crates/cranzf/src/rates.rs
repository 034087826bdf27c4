//! SINR, instantaneous and ergodic rates.
//!
//! The Monte Carlo engine runs the full feedback loop per coherence block:
//! draw channels, quantize the CSI toward the central unit, build the joint
//! precoder from the estimates, quantize the precoder back toward the
//! S-RRHs, then score every MS at the true channels.  Rates are
//! `log₂(1 + SINR)` in bits/s/Hz.
//!
//! Determinism contract: every trial owns a counter-addressed rng stream
//! derived from `(seed, stream_id, trial)`, and the reduction is by trial
//! index, so results are bit-identical for any worker count.

use crate::channel::{generate_channels, ClusterConfig};
use crate::linalg::{inner, norm, CVector};
use crate::precoding::{
    effective_channels, paq_precoders, power_backoff, quantize_effective_csi,
    quantize_precoder_set, symmetric_allocation, zf_precoders, Allocation, PaqPlan, PrecoderSet,
    PrecodingError,
};
use crate::rvq::{exact_csi, quantize_csi_set, RvqMode};
use crate::special::{gamma_upper_nonpos_scaled, SpecialError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RateError {
    #[error(transparent)]
    Precoding(#[from] PrecodingError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error("invalid Monte Carlo setup: {0}")]
    InvalidSetup(String),
    #[error("realization resample limit reached ({0} rejects in one trial)")]
    ResampleLimit(usize),
}

/// Feedback scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Every S-RRH quantizes its full-dimension local CSI.
    Standard,
    /// Precode-and-quantize with `q_bar` users discarded per S-RRH.
    Paq { q_bar: usize },
    /// No quantization in either direction.
    Perfect,
}

/// How the per-MS symbol power is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerPolicy {
    /// `P = P_max / Q_eff` (the bound-validation setups).
    EqualSplit,
    /// `P = γ·P_max / Q_eff` with the equal power-backoff factor computed
    /// from the realized precoder block norms.
    Backoff,
}

/// Sample mean, its standard error, and the trial count for one MS.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Per-MS estimates plus resampling diagnostics.
#[derive(Debug, Clone)]
pub struct McResult {
    pub per_ms: Vec<RateEstimate>,
    /// Channel realizations rejected as degenerate and redrawn.
    pub degenerate_resamples: usize,
    /// Standard error of the per-trial MS-averaged rate (per-MS samples
    /// within one trial are dependent, so this is not `mean(per_ms SE)`).
    aggregate_se: f64,
}

impl McResult {
    /// Network throughput: mean over MSs of the per-MS means.
    pub fn throughput(&self) -> f64 {
        self.per_ms.iter().map(|r| r.mean).sum::<f64>() / self.per_ms.len() as f64
    }

    /// Standard error of the throughput.
    pub fn throughput_se(&self) -> f64 {
        self.aggregate_se
    }
}

/// Signal-to-interference-plus-noise ratio at MS `q`: received beams scored
/// against the true channel.
pub fn sinr(
    q: usize,
    channel_q: &CVector,
    precoders: &PrecoderSet,
    per_ms_power: f64,
    noise_power: f64,
) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for j in 0..precoders.q_ms() {
        let g = inner(channel_q, precoders.vector(j)).norm_sqr();
        if j == q {
            signal = g;
        } else {
            interference += g;
        }
    }
    per_ms_power * signal / (noise_power + per_ms_power * interference)
}

/// Monte Carlo options for [`ergodic_rate_mc`].
#[derive(Debug, Clone)]
pub struct McOptions {
    pub scheme: Scheme,
    /// Total feedback bits per S-RRH per direction (`B`); ignored by
    /// `Scheme::Perfect`.
    pub bits_total: u32,
    pub mode: RvqMode,
    pub power: PowerPolicy,
    pub trials: usize,
    pub seed: u64,
    /// Distinguishes independent runs under one seed (sweep point index,
    /// candidate index, …).  Streams are `stream_id + trial`.
    pub stream_id: u64,
    /// Explicit allocation for PaQ; when `None`, the symmetric policy is
    /// used for symmetric α and the attenuation-driven policy otherwise.
    pub allocation: Option<Allocation>,
}

impl McOptions {
    pub fn new(scheme: Scheme, bits_total: u32, trials: usize, seed: u64) -> Self {
        Self {
            scheme,
            bits_total,
            mode: RvqMode::Surrogate,
            power: PowerPolicy::EqualSplit,
            trials,
            seed,
            stream_id: 0,
            allocation: None,
        }
    }
}

const MAX_RESAMPLES_PER_TRIAL: usize = 64;

fn is_symmetric_alpha(cfg: &ClusterConfig) -> bool {
    let a0 = cfg.alpha.get(0, 0);
    (0..cfg.q_ms).all(|q| (0..cfg.m_srrh).all(|m| cfg.alpha.get(q, m) == a0))
}

fn paq_allocation_for(cfg: &ClusterConfig, q_bar: usize) -> Result<Allocation, RateError> {
    if is_symmetric_alpha(cfg) {
        symmetric_allocation(cfg.m_srrh, cfg.q_ms, q_bar).map_err(Into::into)
    } else {
        let bare = crate::precoding::paq_allocate(&cfg.alpha, q_bar)?;
        Ok(crate::precoding::reallocate_unserved(bare, &cfg.alpha))
    }
}

/// One coherence block of the standard (or perfect) scheme.  Returns the
/// per-MS rates.
fn standard_trial(
    cfg: &ClusterConfig,
    bits_per_vector: u32,
    mode: RvqMode,
    perfect: bool,
    power: PowerPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, RateError> {
    let channels =
        generate_channels(cfg, rng).map_err(|e| RateError::InvalidSetup(e.to_string()))?;
    let csi = if perfect {
        exact_csi(&channels)
    } else {
        quantize_csi_set(&channels, bits_per_vector, mode, rng).map_err(PrecodingError::from)?
    };
    let designed = zf_precoders(&csi)?;
    let applied = if perfect {
        designed
    } else {
        quantize_precoder_set(&designed, bits_per_vector, mode, rng)?
    };
    let q_eff = cfg.q_ms;
    let p_ms = match power {
        PowerPolicy::EqualSplit => cfg.p_max / q_eff as f64,
        PowerPolicy::Backoff => power_backoff(&applied, q_eff)? * cfg.p_max / q_eff as f64,
    };
    Ok((0..cfg.q_ms)
        .map(|q| {
            let s = sinr(q, &channels.stacked(q), &applied, p_ms, cfg.noise_power);
            (1.0 + s).log2()
        })
        .collect())
}

/// One coherence block of the PaQ scheme.
fn paq_trial(
    cfg: &ClusterConfig,
    alloc: &Allocation,
    bits_per_vector: u32,
    mode: RvqMode,
    perfect: bool,
    power: PowerPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, RateError> {
    let channels =
        generate_channels(cfg, rng).map_err(|e| RateError::InvalidSetup(e.to_string()))?;
    let plan = PaqPlan::build(alloc, &channels)?;
    let eff = effective_channels(&channels, &plan);
    let eff_csi = if perfect {
        exact_effective_csi(&eff, &plan)
    } else {
        quantize_effective_csi(&eff, &plan, bits_per_vector, mode, rng)?
    };
    let designed = paq_precoders(&eff_csi, &plan)?;
    let applied = if perfect {
        designed
    } else {
        quantize_precoder_set(&designed, bits_per_vector, mode, rng)?
    };
    let q_eff = cfg.q_ms - alloc.q_bar();
    let p_ms = match power {
        PowerPolicy::EqualSplit => cfg.p_max / q_eff as f64,
        PowerPolicy::Backoff => power_backoff(&applied, q_eff)? * cfg.p_max / q_eff as f64,
    };
    // score in the effective space: h_q† A p̂̃ = h̃_q† p̂̃ block by block
    Ok((0..cfg.q_ms)
        .map(|q| {
            let s = sinr(q, &eff.stacked(q), &applied, p_ms, cfg.noise_power);
            (1.0 + s).log2()
        })
        .collect())
}

fn exact_effective_csi(
    eff: &crate::precoding::EffectiveChannelSet,
    plan: &PaqPlan,
) -> crate::rvq::QuantizedCsi {
    let (q_ms, m_srrh) = (eff.q_ms(), eff.m_srrh());
    let mut mags = Vec::with_capacity(q_ms);
    let mut dirs = Vec::with_capacity(q_ms);
    for q in 0..q_ms {
        let mut mrow = Vec::with_capacity(m_srrh);
        let mut drow = Vec::with_capacity(m_srrh);
        for m in 0..m_srrh {
            let h = eff.link(q, m);
            if plan.allocation.serves(m, q) {
                let n = norm(h);
                mrow.push(n);
                drow.push(h.iter().map(|x| x / n).collect());
            } else {
                mrow.push(0.0);
                drow.push(h.clone());
            }
        }
        mags.push(mrow);
        dirs.push(drow);
    }
    crate::rvq::QuantizedCsi::from_parts(mags, dirs)
}

/// Per-vector bit budget: `⌊B/Q⌋` for the standard scheme, `⌊B/(Q−Q̄)⌋` for
/// PaQ (non-integer shares are floored).
pub fn bits_per_vector(bits_total: u32, q_ms: usize, q_bar: usize) -> u32 {
    bits_total / (q_ms - q_bar) as u32
}

/// Ergodic per-MS rates by Monte Carlo over fresh channel and codebook draws.
///
/// Degenerate realizations (a desired channel numerically inside its
/// interferers' span) are redrawn from the same stream and counted.
pub fn ergodic_rate_mc(cfg: &ClusterConfig, opts: &McOptions) -> Result<McResult, RateError> {
    if opts.trials == 0 {
        return Err(RateError::InvalidSetup("trials must be at least 1".into()));
    }
    cfg.validate()
        .map_err(|e| RateError::InvalidSetup(e.to_string()))?;
    let (perfect, q_bar) = match opts.scheme {
        Scheme::Standard => (false, 0),
        Scheme::Perfect => (true, 0),
        Scheme::Paq { q_bar } => (false, q_bar),
    };
    let alloc = match opts.scheme {
        Scheme::Paq { q_bar } => Some(match &opts.allocation {
            Some(a) => a.clone(),
            None => paq_allocation_for(cfg, q_bar)?,
        }),
        _ => None,
    };
    if !perfect && opts.bits_total < (cfg.q_ms - q_bar) as u32 {
        return Err(RateError::InvalidSetup(format!(
            "bit budget {} gives no bits per vector at Q_eff = {}",
            opts.bits_total,
            cfg.q_ms - q_bar
        )));
    }
    let bits = bits_per_vector(opts.bits_total, cfg.q_ms, q_bar);

    let run_trial = |trial: usize| -> Result<(Vec<f64>, usize), RateError> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(opts.stream_id.wrapping_add(trial as u64));
        let mut resamples = 0usize;
        loop {
            let outcome = match &alloc {
                Some(a) => paq_trial(cfg, a, bits, opts.mode, perfect, opts.power, &mut rng),
                None => standard_trial(cfg, bits, opts.mode, perfect, opts.power, &mut rng),
            };
            match outcome {
                Ok(rates) => return Ok((rates, resamples)),
                Err(RateError::Precoding(PrecodingError::DegenerateProjection)) => {
                    resamples += 1;
                    if resamples > MAX_RESAMPLES_PER_TRIAL {
                        return Err(RateError::ResampleLimit(resamples));
                    }
                }
                Err(e) => return Err(e),
            }
        }
    };

    let outcomes: Result<Vec<(Vec<f64>, usize)>, RateError> =
        (0..opts.trials).into_par_iter().map(run_trial).collect();
    let outcomes = outcomes?;

    let q_ms = cfg.q_ms;
    let n = opts.trials as f64;
    let mut per_ms = Vec::with_capacity(q_ms);
    for q in 0..q_ms {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for (rates, _) in &outcomes {
            sum += rates[q];
            sum_sq += rates[q] * rates[q];
        }
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        let std_error = if opts.trials > 1 {
            (var / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        per_ms.push(RateEstimate {
            mean,
            std_error,
            trials: opts.trials,
        });
    }
    // SE of the network throughput from the per-trial MS averages
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (rates, _) in &outcomes {
        let avg = rates.iter().sum::<f64>() / q_ms as f64;
        sum += avg;
        sum_sq += avg * avg;
    }
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let aggregate_se = if opts.trials > 1 {
        (var / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let degenerate_resamples = outcomes.iter().map(|(_, r)| r).sum();

    Ok(McResult {
        per_ms,
        degenerate_resamples,
        aggregate_se,
    })
}

/// Closed-form ergodic rate of a `T`-dimensional maximum-ratio-combined
/// Rayleigh link at per-dimension SNR `ρ`:
///
/// `φ(T, ρ) = log₂e · e^{1/ρ} Σ_{k=0}^{T−1} Γ(−k, 1/ρ) ρ^{−k}`,
///
/// evaluated through the scaled incomplete gamma so that neither factor
/// overflows at extreme SNR.  This is the perfect-CSI rate with
/// `T = M·N_t − (Q−1)` and `ρ = P/M` (per-entry channel variance `1/M`).
pub fn perfect_csi_rate_phi(t: usize, rho: f64) -> Result<f64, SpecialError> {
    if t == 0 || !(rho > 0.0) {
        return Err(SpecialError::Domain(format!(
            "phi requires T ≥ 1 and rho > 0, got T={t}, rho={rho}"
        )));
    }
    let x = 1.0 / rho;
    let mut sum = 0.0;
    for k in 0..t as u32 {
        sum += gamma_upper_nonpos_scaled(k, x)?;
    }
    Ok(std::f64::consts::LOG2_E * sum)
}

/// `T` for the standard scheme: `M·N_t − (Q−1)`.
pub fn standard_t(m_srrh: usize, q_ms: usize, n_t: usize) -> usize {
    m_srrh * n_t - (q_ms - 1)
}
