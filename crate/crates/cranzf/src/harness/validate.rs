//! Self-contained property suites behind the `validate` CLI subcommand.
//!
//! Everything here runs with fixed seeds in a few seconds and prints one
//! PASS/FAIL line per check, so a fresh build can be smoke-tested without
//! the full test suite.

use crate::bounds::{
    moment_u, paq_rate_gap_per_ms, paq_rate_gap_symmetric, standard_rate_gap, BoundParams,
};
use crate::channel::{db_to_linear, generate_channels, ClusterConfig};
use crate::linalg::{inner, norm};
use crate::precoding::{serving_stats, symmetric_allocation, zf_precoders};
use crate::rates::{ergodic_rate_mc, perfect_csi_rate_phi, McOptions, Scheme};
use crate::rvq::{exact_csi, quantize_explicit, quantize_surrogate};
use crate::special::gamma_upper_nonpos_scaled;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

/// Runs every check; `quick` trims the sample counts.
pub fn run_validation(quick: bool) -> Vec<CheckOutcome> {
    vec![
        check_rvq_moments(quick),
        check_rvq_explicit_surrogate_agreement(quick),
        check_rvq_error_upper_bound(quick),
        check_zf_residuals(),
        check_gamma_recurrence(),
        check_bound_reductions(),
        check_symmetric_policy_identities(),
        check_perfect_csi_rate(quick),
    ]
}

fn check_rvq_moments(quick: bool) -> CheckOutcome {
    let samples = if quick { 20_000 } else { 100_000 };
    let mut worst = f64::NEG_INFINITY;
    let mut detail = String::new();
    for &n_dim in &[2usize, 4, 8] {
        for &b in &[1u32, 4, 8] {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + n_dim as u64 * 100 + b as u64);
            let v: Vec<_> = (0..n_dim)
                .map(|i| crate::linalg::C64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0))
                .collect();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..samples {
                let z = quantize_surrogate(&v, b, &mut rng).unwrap().z;
                sum += z;
                sum_sq += z * z;
            }
            let mean = sum / samples as f64;
            let se = ((sum_sq / samples as f64 - mean * mean) / samples as f64).sqrt();
            let want = moment_u((b as f64).exp2(), 1.0 / (n_dim as f64 - 1.0)).unwrap();
            let sigmas = (mean - want).abs() / se.max(1e-300);
            if sigmas > worst {
                worst = sigmas;
                detail = format!("worst |mean−𝒰|/SE = {sigmas:.2} at (N={n_dim}, b={b})");
            }
        }
    }
    CheckOutcome::new("rvq-error-moment-identity", worst <= 4.0, detail)
}

fn check_rvq_explicit_surrogate_agreement(quick: bool) -> CheckOutcome {
    let n = if quick { 4000 } else { 10_000 };
    let v = vec![
        crate::linalg::C64::new(0.5, -0.5),
        crate::linalg::C64::new(0.1, 0.7),
        crate::linalg::C64::new(-0.3, 0.2),
        crate::linalg::C64::new(0.4, 0.0),
    ];
    let mut rng_e = ChaCha8Rng::seed_from_u64(101);
    let mut rng_s = ChaCha8Rng::seed_from_u64(202);
    let mut ze: Vec<f64> = (0..n)
        .map(|_| quantize_explicit(&v, 6, &mut rng_e).unwrap().z)
        .collect();
    let mut zs: Vec<f64> = (0..n)
        .map(|_| quantize_surrogate(&v, 6, &mut rng_s).unwrap().z)
        .collect();
    ze.sort_by(|a, b| a.partial_cmp(b).unwrap());
    zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < n && j < n {
        if ze[i] <= zs[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 - j as f64).abs() / n as f64);
    }
    let crit = 1.628 * (2.0 / n as f64).sqrt();
    CheckOutcome::new(
        "rvq-surrogate-matches-explicit",
        d < crit,
        format!("two-sample KS = {d:.4} (1% critical value {crit:.4})"),
    )
}

fn check_rvq_error_upper_bound(quick: bool) -> CheckOutcome {
    // E{sin²θ} ≤ 2^{−b/(N−1)}, with one-sided 4·SE slack
    let samples = if quick { 20_000 } else { 100_000 };
    let mut ok = true;
    let mut detail = String::new();
    for &(n_dim, b) in &[(4usize, 6u32), (8, 12)] {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + b as u64);
        let v: Vec<_> = (0..n_dim)
            .map(|i| crate::linalg::C64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0))
            .collect();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples {
            let z = quantize_surrogate(&v, b, &mut rng).unwrap().z;
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / samples as f64;
        let se = ((sum_sq / samples as f64 - mean * mean) / samples as f64).sqrt();
        let cap = (-(b as f64) / (n_dim as f64 - 1.0)).exp2();
        if mean > cap + 4.0 * se {
            ok = false;
        }
        detail = format!("mean Z = {mean:.5} vs cap {cap:.5} at (N={n_dim}, b={b})");
    }
    CheckOutcome::new("rvq-error-upper-bound", ok, detail)
}

fn check_zf_residuals() -> CheckOutcome {
    let cfg = ClusterConfig::symmetric(4, 8, 8, 35.0);
    let mut worst_res: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for seed in 0..20 {
        let ch = generate_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let csi = exact_csi(&ch);
        let p = zf_precoders(&csi).unwrap();
        for q in 0..8 {
            worst_norm = worst_norm.max((norm(p.vector(q)) - 1.0).abs());
            let hq = csi.stacked_estimate(q);
            for j in 0..8 {
                if j != q {
                    worst_res = worst_res.max(inner(&hq, p.vector(j)).norm() / norm(&hq));
                }
            }
        }
    }
    CheckOutcome::new(
        "zf-orthogonality",
        worst_res < 1e-10 && worst_norm < 1e-12,
        format!("max residual {worst_res:.2e}, max norm error {worst_norm:.2e}"),
    )
}

fn check_gamma_recurrence() -> CheckOutcome {
    // k·g_k + x·g_{k−1} = 1 in the scaled form, across the parameter box
    let mut worst: f64 = 0.0;
    for &x in &[1e-3, 0.1, 1.0, 10.0, 1e3] {
        for k in 1..=100u32 {
            let gk = gamma_upper_nonpos_scaled(k, x).unwrap();
            let gkm1 = gamma_upper_nonpos_scaled(k - 1, x).unwrap();
            worst = worst.max((k as f64 * gk + x * gkm1 - 1.0).abs());
        }
    }
    CheckOutcome::new(
        "incomplete-gamma-recurrence",
        worst < 1e-9,
        format!("max recurrence defect {worst:.2e}"),
    )
}

fn check_bound_reductions() -> CheckOutcome {
    let p_max = db_to_linear(35.0);
    let mut worst: f64 = 0.0;
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
        worst = worst
            .max((std.delta_r1 - paq.delta_r1).abs())
            .max((std.delta_r2 - paq.delta_r2).abs())
            .max(paq.delta_r_ag.abs());
        for &q_bar in &[2usize, 4] {
            let p = BoundParams { q_bar, ..p };
            let sym = paq_rate_gap_symmetric(&p).unwrap();
            let stats = serving_stats(&symmetric_allocation(4, 8, q_bar).unwrap());
            for g in paq_rate_gap_per_ms(&p, &stats).unwrap() {
                worst = worst
                    .max((g.delta_r1 - sym.delta_r1).abs())
                    .max((g.delta_r2 - sym.delta_r2).abs())
                    .max((g.delta_r_ag - sym.delta_r_ag).abs());
            }
        }
    }
    CheckOutcome::new(
        "bound-reduction-identities",
        worst < 1e-12,
        format!("max reduction defect {worst:.2e}"),
    )
}

fn check_symmetric_policy_identities() -> CheckOutcome {
    // M_q = (1−Q̄/Q)M and Σ_{j≠q} M_{q,j}/M_j = Q−Q̄−1 over the whole
    // divisibility-valid grid
    let mut ok = true;
    let mut checked = 0;
    for m in 1..=6usize {
        for q in (m..=12).filter(|q| q % m == 0) {
            for q_bar in (0..q).filter(|qb| (m * qb) % q == 0 && m * qb / q < m) {
                let stats = serving_stats(&symmetric_allocation(m, q, q_bar).unwrap());
                let want_mq = m * (q - q_bar) / q;
                if stats.m_q.iter().any(|&c| c != want_mq) {
                    ok = false;
                }
                for qi in 0..q {
                    let s: f64 = (0..q)
                        .filter(|&j| j != qi)
                        .map(|j| stats.m_qj[qi][j] as f64 / stats.m_q[j] as f64)
                        .sum();
                    if (s - (q - q_bar - 1) as f64).abs() > 1e-12 {
                        ok = false;
                    }
                }
                checked += 1;
            }
        }
    }
    CheckOutcome::new(
        "symmetric-policy-identities",
        ok,
        format!("{checked} (M, Q, Q̄) combinations checked"),
    )
}

fn check_perfect_csi_rate(quick: bool) -> CheckOutcome {
    let trials = if quick { 400 } else { 2000 };
    let cfg = ClusterConfig::symmetric(4, 8, 8, 35.0);
    let opts = McOptions::new(Scheme::Perfect, 0, trials, 0xACCE55);
    let mc = ergodic_rate_mc(&cfg, &opts).unwrap();
    let phi = perfect_csi_rate_phi(25, cfg.p_max / 8.0 / 4.0).unwrap();
    let est = &mc.per_ms[0];
    let sigmas = (est.mean - phi).abs() / est.std_error.max(1e-300);
    CheckOutcome::new(
        "perfect-csi-closed-form",
        sigmas <= 3.0,
        format!(
            "MC {:.4} ± {:.4} vs φ = {phi:.4} ({sigmas:.2}σ)",
            est.mean, est.std_error
        ),
    )
}
