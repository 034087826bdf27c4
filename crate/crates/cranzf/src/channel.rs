//! Cluster configuration, geometry, pathloss and block-fading channel draws.
//!
//! A cluster is `M` transmitters ("S-RRHs"), each with `N_t` antennas,
//! jointly serving `Q` single-antenna terminals ("MSs").  Long-term
//! attenuation is a per-link gain `α_{q,m}`; per coherence block the channel
//! `h_{q,m} ∈ ℂ^{N_t}` is drawn i.i.d. circular Gaussian with per-entry
//! variance `α_{q,m}` (so `E‖h_{q,m}‖² = N_t·α_{q,m}`).

use crate::linalg::{CVector, C64};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("invalid cluster configuration: {0}")]
    InvalidConfig(String),
    #[error("distance {0} km is below the minimum of {MIN_DISTANCE_KM} km")]
    BelowMinimumDistance(f64),
}

/// Minimum MS–S-RRH separation, in kilometers (10 m).
pub const MIN_DISTANCE_KM: f64 = 0.010;

// ---------------------------------------------------------------------------
// dB / linear conversions, centralized to avoid factor-of-two mistakes
// ---------------------------------------------------------------------------

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// dBm → watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

// ---------------------------------------------------------------------------
// Cluster configuration
// ---------------------------------------------------------------------------

/// Long-term attenuation matrix, `α_{q,m} > 0` in linear gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaMatrix {
    q_ms: usize,
    m_srrh: usize,
    /// Row-major: entry `(q, m)` at index `q * m_srrh + m`.
    entries: Vec<f64>,
}

impl AlphaMatrix {
    pub fn new(q_ms: usize, m_srrh: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), q_ms * m_srrh);
        Self {
            q_ms,
            m_srrh,
            entries,
        }
    }

    /// Constant matrix `α_{q,m} = 1/M`: the symmetric system geometry, where
    /// every MS sees every S-RRH with the same long-term gain and rows sum
    /// to one.
    pub fn symmetric(q_ms: usize, m_srrh: usize) -> Self {
        Self::new(q_ms, m_srrh, vec![1.0 / m_srrh as f64; q_ms * m_srrh])
    }

    pub fn get(&self, q: usize, m: usize) -> f64 {
        self.entries[q * self.m_srrh + m]
    }

    pub fn q_ms(&self) -> usize {
        self.q_ms
    }

    pub fn m_srrh(&self) -> usize {
        self.m_srrh
    }

    /// Column `m` over all MSs (used by the MS-allocation policy).
    pub fn column(&self, m: usize) -> Vec<f64> {
        (0..self.q_ms).map(|q| self.get(q, m)).collect()
    }
}

/// Static description of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Number of S-RRHs (`M`).
    pub m_srrh: usize,
    /// Number of MSs (`Q`).
    pub q_ms: usize,
    /// Antennas per S-RRH (`N_t`).
    pub n_t: usize,
    /// Per-S-RRH transmit power constraint, linear watts.
    pub p_max: f64,
    /// Receiver noise power `σ²`, linear watts.
    pub noise_power: f64,
    /// Long-term attenuation factors.
    pub alpha: AlphaMatrix,
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.m_srrh < 1 || self.q_ms < 1 || self.n_t < 1 {
            return Err(ChannelError::InvalidConfig(
                "M, Q and N_t must all be at least 1".into(),
            ));
        }
        if !(self.p_max > 0.0) {
            return Err(ChannelError::InvalidConfig("P_max must be positive".into()));
        }
        if !(self.noise_power > 0.0) {
            return Err(ChannelError::InvalidConfig(
                "noise power must be positive".into(),
            ));
        }
        if self.alpha.q_ms() != self.q_ms || self.alpha.m_srrh() != self.m_srrh {
            return Err(ChannelError::InvalidConfig(
                "alpha matrix shape does not match (Q, M)".into(),
            ));
        }
        if self
            .alpha
            .entries
            .iter()
            .any(|&a| !(a >= 0.0) || !a.is_finite())
        {
            return Err(ChannelError::InvalidConfig(
                "alpha entries must be nonnegative and finite".into(),
            ));
        }
        Ok(())
    }

    /// Symmetric bound-validation setup: `α = 1/M`, unit noise, `P_max`
    /// given in dB.
    pub fn symmetric(m_srrh: usize, q_ms: usize, n_t: usize, p_max_db: f64) -> Self {
        Self {
            m_srrh,
            q_ms,
            n_t,
            p_max: db_to_linear(p_max_db),
            noise_power: 1.0,
            alpha: AlphaMatrix::symmetric(q_ms, m_srrh),
        }
    }

    /// Same cluster with `n_t` antennas switched on per S-RRH.
    pub fn with_n_t(&self, n_t: usize) -> Self {
        let mut c = self.clone();
        c.n_t = n_t;
        c
    }
}

// ---------------------------------------------------------------------------
// Block-fading channels
// ---------------------------------------------------------------------------

/// One block-fading realization: all `h_{q,m}` plus the stacked `h_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    q_ms: usize,
    m_srrh: usize,
    n_t: usize,
    /// `per_link[q][m]` is `h_{q,m} ∈ ℂ^{N_t}`.
    per_link: Vec<Vec<CVector>>,
}

impl ChannelSet {
    pub fn from_links(per_link: Vec<Vec<CVector>>) -> Self {
        let q_ms = per_link.len();
        let m_srrh = per_link[0].len();
        let n_t = per_link[0][0].len();
        for row in &per_link {
            assert_eq!(row.len(), m_srrh);
            for h in row {
                assert_eq!(h.len(), n_t);
            }
        }
        Self {
            q_ms,
            m_srrh,
            n_t,
            per_link,
        }
    }

    pub fn q_ms(&self) -> usize {
        self.q_ms
    }

    pub fn m_srrh(&self) -> usize {
        self.m_srrh
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// `h_{q,m}`.
    pub fn link(&self, q: usize, m: usize) -> &CVector {
        &self.per_link[q][m]
    }

    /// Stacked `h_q = [h_{q,1}†, …, h_{q,M}†]† ∈ ℂ^{M·N_t}`, blocks in
    /// S-RRH order.
    pub fn stacked(&self, q: usize) -> CVector {
        let mut v = Vec::with_capacity(self.m_srrh * self.n_t);
        for m in 0..self.m_srrh {
            v.extend_from_slice(&self.per_link[q][m]);
        }
        v
    }
}

/// Draws one block-fading realization.  Entries are sampled in a fixed
/// order (`q` outer, `m` middle, antenna inner; real before imaginary), so a
/// given rng stream always yields the same `ChannelSet`.
pub fn generate_channels<R: Rng>(
    config: &ClusterConfig,
    rng: &mut R,
) -> Result<ChannelSet, ChannelError> {
    config.validate()?;
    let mut per_link = Vec::with_capacity(config.q_ms);
    for q in 0..config.q_ms {
        let mut row = Vec::with_capacity(config.m_srrh);
        for m in 0..config.m_srrh {
            let sigma = (config.alpha.get(q, m) / 2.0).sqrt();
            let h: CVector = (0..config.n_t)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    C64::new(re * sigma, im * sigma)
                })
                .collect();
            row.push(h);
        }
        per_link.push(row);
    }
    Ok(ChannelSet::from_links(per_link))
}

// ---------------------------------------------------------------------------
// Pathloss and placement geometry
// ---------------------------------------------------------------------------

/// 3GPP urban-area NLOS pathloss: `−128 − 37.6·log10(r)` dB at `r`
/// kilometers.  Errors below the 10 m minimum separation.
pub fn pathloss_db(r_km: f64) -> Result<f64, ChannelError> {
    if !(r_km >= MIN_DISTANCE_KM) {
        return Err(ChannelError::BelowMinimumDistance(r_km));
    }
    Ok(-128.0 - 37.6 * r_km.log10())
}

/// Region spanned by a set of equal flat-top hexagons (an S-RRH at each
/// center).  Coordinates in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HexRegion {
    /// Hexagon edge length (= circumradius), meters.
    pub edge_m: f64,
    /// Hexagon centers, meters.
    pub centers: Vec<[f64; 2]>,
}

impl HexRegion {
    /// Four adjacent hexagons of edge 100 m forming a rhombus-shaped grid,
    /// one S-RRH at each center.
    pub fn four_hex_cluster() -> Self {
        let r = 100.0;
        let s3 = 3f64.sqrt();
        Self {
            edge_m: r,
            centers: vec![
                [0.0, 0.0],
                [1.5 * r, 0.5 * s3 * r],
                [0.0, s3 * r],
                [1.5 * r, 1.5 * s3 * r],
            ],
        }
    }

    pub fn srrh_positions(&self) -> &[[f64; 2]] {
        &self.centers
    }

    /// Point-in-union test.  A flat-top hexagon of circumradius `R` centered
    /// at the origin is `{|x| ≤ R, |y| ≤ √3R/2, √3|x| + |y| ≤ √3R}`.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let r = self.edge_m;
        let s3 = 3f64.sqrt();
        self.centers.iter().any(|c| {
            let dx = (p[0] - c[0]).abs();
            let dy = (p[1] - c[1]).abs();
            dx <= r && dy <= 0.5 * s3 * r && s3 * dx + dy <= s3 * r
        })
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let r = self.edge_m;
        let s3h = 0.5 * 3f64.sqrt() * self.edge_m;
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.centers {
            lo[0] = lo[0].min(c[0] - r);
            lo[1] = lo[1].min(c[1] - s3h);
            hi[0] = hi[0].max(c[0] + r);
            hi[1] = hi[1].max(c[1] + s3h);
        }
        (lo, hi)
    }
}

/// MS positions for one placement draw, with derived distances.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub srrh_positions: Vec<[f64; 2]>,
    pub ms_positions: Vec<[f64; 2]>,
}

impl Placement {
    /// Distance from MS `q` to S-RRH `m`, kilometers.
    pub fn distance_km(&self, q: usize, m: usize) -> f64 {
        let a = self.ms_positions[q];
        let b = self.srrh_positions[m];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / 1000.0
    }

    /// Pathloss-derived attenuation matrix, linear gain.
    pub fn alpha(&self) -> Result<AlphaMatrix, ChannelError> {
        let q_ms = self.ms_positions.len();
        let m_srrh = self.srrh_positions.len();
        let mut entries = Vec::with_capacity(q_ms * m_srrh);
        for q in 0..q_ms {
            for m in 0..m_srrh {
                entries.push(db_to_linear(pathloss_db(self.distance_km(q, m))?));
            }
        }
        Ok(AlphaMatrix::new(q_ms, m_srrh, entries))
    }
}

/// Places `q_ms` points uniformly over the region, rejection-resampled until
/// every MS–S-RRH distance is at least 10 m.
pub fn place_random<R: Rng>(region: &HexRegion, q_ms: usize, rng: &mut R) -> Placement {
    let (lo, hi) = region.bounding_box();
    let srrh = region.centers.clone();
    let min_m = MIN_DISTANCE_KM * 1000.0;
    let mut ms = Vec::with_capacity(q_ms);
    while ms.len() < q_ms {
        let x = lo[0] + (hi[0] - lo[0]) * rng.random::<f64>();
        let y = lo[1] + (hi[1] - lo[1]) * rng.random::<f64>();
        let p = [x, y];
        if !region.contains(p) {
            continue;
        }
        let clear = srrh
            .iter()
            .all(|s| ((p[0] - s[0]).powi(2) + (p[1] - s[1]).powi(2)).sqrt() >= min_m);
        if clear {
            ms.push(p);
        }
    }
    Placement {
        srrh_positions: srrh,
        ms_positions: ms,
    }
}
