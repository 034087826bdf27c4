//! Experiment orchestration: parameter sweeps over bit budgets or transmit
//! power, maximization over antenna counts (standard scheme) and discard
//! counts (PaQ), result persistence and plot emission.
//!
//! Reproducibility: every Monte Carlo trial's rng stream is addressed by
//! `(seed, point, placement, trial)` before any work is scheduled, and all
//! reductions run in index order, so a sweep's output is bit-identical for
//! any worker count.  Candidates at one sweep point share channel draws,
//! which pairs the scheme comparison and removes selection noise from the
//! maximization.

pub mod plot;
pub mod spec;
pub mod table;
pub mod validate;

use crate::bounds::{lower_bound_report, BoundParams, BoundScheme};
use crate::channel::{dbm_to_watts, place_random, AlphaMatrix, ClusterConfig, Placement};
use crate::rates::{ergodic_rate_mc, McOptions, PowerPolicy, Scheme};
use plot::{Chart, LineStyle, Series};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spec::{ExperimentSpec, SetupSpec, SweepVariable};
use std::path::{Path, PathBuf};
use table::{CandidateRow, ResultRow, ResultTable};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Spec(#[from] spec::SpecError),
    #[error(transparent)]
    Table(#[from] table::TableError),
    #[error(transparent)]
    Rate(#[from] crate::rates::RateError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no feasible candidate at sweep point {0}")]
    NoFeasibleCandidate(f64),
}

/// Everything one experiment produces.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub spec: ExperimentSpec,
    pub results: ResultTable,
    pub candidates: Vec<CandidateRow>,
    /// Skipped candidates and resampled realizations, one note each.
    pub warnings: Vec<String>,
}

/// Runs the experiment described by `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SweepOutput, HarnessError> {
    spec.validate()?;
    match &spec.setup {
        SetupSpec::Symmetric { .. } => run_symmetric_sweep(spec),
        SetupSpec::RandomPlacement { .. } => run_random_placement(spec),
    }
}

/// `(bits, power)` for one grid value.
fn point_params(spec: &ExperimentSpec, value: f64) -> (u32, f64) {
    match spec.sweep.variable {
        SweepVariable::Bits => (value.round() as u32, spec.sweep.fixed_pmax.unwrap()),
        SweepVariable::PmaxDb | SweepVariable::PmaxDbm => (spec.sweep.fixed_bits.unwrap(), value),
    }
}

fn trial_stream(point: usize, placement: usize) -> u64 {
    ((point as u64) * 4096 + placement as u64) << 32
}

// ---------------------------------------------------------------------------
// Symmetric sweep
// ---------------------------------------------------------------------------

/// Symmetric setup (`α = 1/M`, unit noise, equal power split): per point,
/// Monte Carlo rate and closed-form bound for the standard scheme maximized
/// over candidate antenna counts, and for PaQ maximized over candidate
/// discard counts at full `N_t`.
pub fn run_symmetric_sweep(spec: &ExperimentSpec) -> Result<SweepOutput, HarnessError> {
    let SetupSpec::Symmetric { m_srrh, q_ms, n_t } = spec.setup else {
        unreachable!("caller dispatches on setup");
    };
    let sweep_var = spec.sweep.variable.column_name().to_string();
    let mut results = ResultTable::default();
    let mut candidates = Vec::new();
    let mut warnings = Vec::new();

    for (pi, &value) in spec.sweep.grid.iter().enumerate() {
        let (bits, pmax_db) = point_params(spec, value);
        let p_max = crate::channel::db_to_linear(pmax_db);
        let stream = trial_stream(pi, 0);

        // standard scheme: sweep candidate antenna counts
        let mut std_cands: Vec<CandidateRow> = Vec::new();
        for &nt in &spec.candidates.n_t {
            if m_srrh * nt < q_ms || (bits as usize) < q_ms {
                warnings.push(format!(
                    "point {value}: standard N_t = {nt} infeasible, skipped"
                ));
                continue;
            }
            let cfg = ClusterConfig::symmetric(m_srrh, q_ms, nt, pmax_db);
            let params = BoundParams::standard(m_srrh, q_ms, nt, bits as f64, p_max);
            let report = lower_bound_report(BoundScheme::Standard, &params).ok();
            let mut opts = McOptions::new(Scheme::Standard, bits, spec.trials.channels, spec.seed);
            opts.mode = spec.rvq_mode;
            opts.stream_id = stream;
            let mc = ergodic_rate_mc(&cfg, &opts)?;
            if mc.degenerate_resamples > 0 {
                warnings.push(format!(
                    "point {value}: N_t = {nt} resampled {} degenerate realization(s)",
                    mc.degenerate_resamples
                ));
            }
            std_cands.push(CandidateRow {
                sweep_var: sweep_var.clone(),
                value,
                scheme: "standard".into(),
                placement: None,
                nt: Some(nt),
                qbar: None,
                rate_mean: mc.throughput(),
                rate_se: mc.throughput_se(),
                bound: report.as_ref().map(|r| r.raw_lower_bound),
                phi: report.as_ref().map(|r| r.r_star),
                chosen: false,
            });
        }
        push_symmetric_rows(&sweep_var, value, std_cands, &mut results, &mut candidates)?;

        // PaQ scheme: sweep candidate discard counts at full N_t
        let mut paq_cands: Vec<CandidateRow> = Vec::new();
        for &q_bar in &spec.candidates.q_bar {
            let feasible = q_ms % m_srrh == 0
                && (m_srrh * q_bar) % q_ms == 0
                && m_srrh * q_bar / q_ms < m_srrh
                && (q_bar == 0 || n_t - q_bar >= 2)
                && bits as usize >= q_ms - q_bar;
            if !feasible {
                warnings.push(format!(
                    "point {value}: PaQ Q̄ = {q_bar} infeasible under the symmetric policy, skipped"
                ));
                continue;
            }
            let cfg = ClusterConfig::symmetric(m_srrh, q_ms, n_t, pmax_db);
            let params = BoundParams {
                m_srrh,
                q_ms,
                n_t,
                q_bar,
                bits_total: bits as f64,
                p_max,
            };
            let report = if q_bar == 0 {
                lower_bound_report(BoundScheme::Standard, &params).ok()
            } else {
                lower_bound_report(BoundScheme::PaqSymmetric, &params).ok()
            };
            let mut opts =
                McOptions::new(Scheme::Paq { q_bar }, bits, spec.trials.channels, spec.seed);
            opts.mode = spec.rvq_mode;
            opts.stream_id = stream;
            let mc = ergodic_rate_mc(&cfg, &opts)?;
            paq_cands.push(CandidateRow {
                sweep_var: sweep_var.clone(),
                value,
                scheme: "paq".into(),
                placement: None,
                nt: None,
                qbar: Some(q_bar),
                rate_mean: mc.throughput(),
                rate_se: mc.throughput_se(),
                bound: report.as_ref().map(|r| r.raw_lower_bound),
                // the PaQ perfect-CSI ceiling is φ(T̃, P̃/M) = R* − ΔR_AG
                phi: report.as_ref().map(|r| r.r_star - r.delta_r_ag),
                chosen: false,
            });
        }
        push_symmetric_rows(&sweep_var, value, paq_cands, &mut results, &mut candidates)?;
    }

    Ok(SweepOutput {
        spec: spec.clone(),
        results,
        candidates,
        warnings,
    })
}

fn push_symmetric_rows(
    sweep_var: &str,
    value: f64,
    mut cands: Vec<CandidateRow>,
    results: &mut ResultTable,
    out_cands: &mut Vec<CandidateRow>,
) -> Result<(), HarnessError> {
    if cands.is_empty() {
        return Err(HarnessError::NoFeasibleCandidate(value));
    }
    let best = cands
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.rate_mean.partial_cmp(&b.rate_mean).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    cands[best].chosen = true;
    let best_bound = cands
        .iter()
        .filter_map(|c| c.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let best_phi = cands
        .iter()
        .filter_map(|c| c.phi)
        .fold(f64::NEG_INFINITY, f64::max);
    results.rows.push(ResultRow {
        sweep_var: sweep_var.to_string(),
        value,
        scheme: cands[best].scheme.clone(),
        chosen_nt: cands[best].nt,
        chosen_qbar: cands[best].qbar,
        rate_mean: cands[best].rate_mean,
        rate_se: cands[best].rate_se,
        bound: best_bound.is_finite().then(|| best_bound.max(0.0)),
        phi: best_phi.is_finite().then_some(best_phi),
    });
    out_cands.extend(cands);
    Ok(())
}

// ---------------------------------------------------------------------------
// Random-placement sweep
// ---------------------------------------------------------------------------

/// Random-placement setup: MSs dropped uniformly over the hexagon cluster
/// with pathloss-derived attenuation, rates averaged over placements ×
/// channels, equal power-backoff, and the rate maximization done per
/// placement (the long-term attenuation is what each scheme adapts to).
pub fn run_random_placement(spec: &ExperimentSpec) -> Result<SweepOutput, HarnessError> {
    let SetupSpec::RandomPlacement {
        q_ms,
        n_t,
        ref geometry,
        noise_dbm,
    } = spec.setup
    else {
        unreachable!("caller dispatches on setup");
    };
    let m_srrh = geometry.centers.len();
    let noise_w = dbm_to_watts(noise_dbm);
    let sweep_var = spec.sweep.variable.column_name().to_string();

    // one fixed set of placements for the whole experiment
    let placements: Vec<Placement> = (0..spec.trials.placements)
        .map(|p_idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream((1u64 << 62) + p_idx as u64);
            place_random(geometry, q_ms, &mut rng)
        })
        .collect();
    let alphas: Vec<AlphaMatrix> = placements
        .iter()
        .map(|p| p.alpha())
        .collect::<Result<_, _>>()?;

    let mut results = ResultTable::default();
    let mut candidates = Vec::new();
    let mut warnings = Vec::new();

    for (pi, &value) in spec.sweep.grid.iter().enumerate() {
        let (bits, pmax_dbm) = point_params(spec, value);
        let p_max_w = dbm_to_watts(pmax_dbm);

        for scheme_name in ["standard", "paq"] {
            let mut best_per_placement: Vec<f64> = Vec::with_capacity(alphas.len());
            let mut chosen_count: std::collections::BTreeMap<usize, usize> =
                std::collections::BTreeMap::new();
            for (p_idx, alpha) in alphas.iter().enumerate() {
                let stream = trial_stream(pi, p_idx);
                let cands: Vec<usize> = if scheme_name == "standard" {
                    spec.candidates.n_t.clone()
                } else {
                    spec.candidates.q_bar.clone()
                };
                let mut cand_rows: Vec<CandidateRow> = Vec::new();
                for &c in &cands {
                    let (cfg_nt, scheme) = if scheme_name == "standard" {
                        (c, Scheme::Standard)
                    } else {
                        (n_t, Scheme::Paq { q_bar: c })
                    };
                    let infeasible = (scheme_name == "standard"
                        && (m_srrh * cfg_nt < q_ms || (bits as usize) < q_ms))
                        || (scheme_name == "paq"
                            && ((c > 0 && n_t - c < 2) || (bits as usize) < q_ms - c));
                    if infeasible {
                        continue;
                    }
                    let cfg = ClusterConfig {
                        m_srrh,
                        q_ms,
                        n_t: cfg_nt,
                        p_max: p_max_w,
                        noise_power: noise_w,
                        alpha: alpha.clone(),
                    };
                    let mut opts = McOptions::new(scheme, bits, spec.trials.channels, spec.seed);
                    opts.mode = spec.rvq_mode;
                    opts.power = PowerPolicy::Backoff;
                    opts.stream_id = stream;
                    let mc = match ergodic_rate_mc(&cfg, &opts) {
                        Ok(mc) => mc,
                        Err(e) => {
                            warnings.push(format!(
                                "point {value}, placement {p_idx}, {scheme_name} candidate {c}: {e}"
                            ));
                            continue;
                        }
                    };
                    cand_rows.push(CandidateRow {
                        sweep_var: sweep_var.clone(),
                        value,
                        scheme: scheme_name.into(),
                        placement: Some(p_idx),
                        nt: (scheme_name == "standard").then_some(cfg_nt),
                        qbar: (scheme_name == "paq").then_some(c),
                        rate_mean: mc.throughput(),
                        rate_se: mc.throughput_se(),
                        bound: None,
                        phi: None,
                        chosen: false,
                    });
                }
                if cand_rows.is_empty() {
                    return Err(HarnessError::NoFeasibleCandidate(value));
                }
                let best = cand_rows
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| a.rate_mean.partial_cmp(&b.rate_mean).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                cand_rows[best].chosen = true;
                best_per_placement.push(cand_rows[best].rate_mean);
                let key = cand_rows[best].nt.or(cand_rows[best].qbar).unwrap_or(0);
                *chosen_count.entry(key).or_insert(0) += 1;
                candidates.extend(cand_rows);
            }
            let n = best_per_placement.len() as f64;
            let mean = best_per_placement.iter().sum::<f64>() / n;
            let se = if best_per_placement.len() > 1 {
                let var = best_per_placement
                    .iter()
                    .map(|r| (r - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            // report the modal choice across placements
            let modal = chosen_count
                .iter()
                .max_by_key(|(_, &count)| count)
                .map(|(&k, _)| k);
            results.rows.push(ResultRow {
                sweep_var: sweep_var.clone(),
                value,
                scheme: scheme_name.into(),
                chosen_nt: (scheme_name == "standard").then(|| modal.unwrap_or(n_t)),
                chosen_qbar: (scheme_name == "paq").then(|| modal.unwrap_or(0)),
                rate_mean: mean,
                rate_se: se,
                bound: None,
                phi: None,
            });
        }
    }

    Ok(SweepOutput {
        spec: spec.clone(),
        results,
        candidates,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Output emission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EmittedPaths {
    pub results_csv: PathBuf,
    pub candidates_csv: PathBuf,
    pub resolved_spec: PathBuf,
    pub plot_svg: PathBuf,
}

/// Writes the result table, the candidate audit table, the resolved spec
/// (seed included) and a static SVG plot into `dir`.
///
/// Columns of `results.csv`: `sweep_var, value, scheme, chosen_nt,
/// chosen_qbar, rate_mean, rate_se, bound, phi`, with `bound` clamped at 0;
/// `candidates.csv` keeps the raw (possibly negative) bound values.
pub fn emit_outputs(out: &SweepOutput, dir: &Path) -> Result<EmittedPaths, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let paths = EmittedPaths {
        results_csv: dir.join("results.csv"),
        candidates_csv: dir.join("candidates.csv"),
        resolved_spec: dir.join("spec.resolved.toml"),
        plot_svg: dir.join("rates.svg"),
    };
    out.results.write_file(&paths.results_csv)?;
    table::write_candidates_csv(
        &out.candidates,
        std::fs::File::create(&paths.candidates_csv)?,
    )?;
    std::fs::write(&paths.resolved_spec, out.spec.to_toml()?)?;
    std::fs::write(&paths.plot_svg, render_chart(out).to_svg())?;
    if !out.warnings.is_empty() {
        std::fs::write(dir.join("warnings.txt"), out.warnings.join("\n") + "\n")?;
    }
    Ok(paths)
}

fn render_chart(out: &SweepOutput) -> Chart {
    let x_label = out.spec.sweep.variable.column_name().to_string();
    let mut series = Vec::new();
    let palette = [("standard", "#c0392b"), ("paq", "#2980b9")];
    for (scheme, color) in palette {
        let rows = out.results.series(scheme);
        if rows.is_empty() {
            continue;
        }
        series.push(Series {
            label: format!("{scheme} (MC)"),
            color,
            style: LineStyle::Solid,
            points: rows.iter().map(|r| (r.value, r.rate_mean)).collect(),
        });
        let bound_pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.bound.map(|b| (r.value, b)))
            .collect();
        if !bound_pts.is_empty() {
            series.push(Series {
                label: format!("{scheme} (lower bound)"),
                color,
                style: LineStyle::Dashed,
                points: bound_pts,
            });
        }
    }
    let phi_pts: Vec<(f64, f64)> = out
        .results
        .series("standard")
        .iter()
        .filter_map(|r| r.phi.map(|p| (r.value, p)))
        .collect();
    if !phi_pts.is_empty() {
        series.push(Series {
            label: "perfect CSI".into(),
            color: "#555555",
            style: LineStyle::Dotted,
            points: phi_pts,
        });
    }
    Chart {
        title: out.spec.name.clone(),
        x_label,
        y_label: "rate (bits/s/Hz)".into(),
        series,
    }
}
