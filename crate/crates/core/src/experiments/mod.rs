//! Sweep harness: variance-scale sweeps, start-time sweeps at a fixed step
//! size and step-count robustness, on the Gaussian toy task or on WAV
//! triples produced by an external enhancer.
//!
//! Every row draws its data and solver noise from streams of the plan seed
//! alone, so rows that differ only in SDE or sampler settings see the same
//! draws. Rows run in parallel; their order is fixed by the configuration.

mod plan;
mod report;
mod toy;

pub use plan::{default_t_rsp_grid, SweepPlan, Task, WavPairConfig, TRSP_DT};
pub use report::{
    emit_report, render_report, round_sig6, ReportFormat, RowStatus, SweepKind, SweepReport,
    SweepRow, REPORT_CSV_COLUMNS,
};
pub use toy::{draw_toy, evaluate_toy_draw, ToyConfig, ToyDraw, ToyOutcome};

use std::cmp::Ordering;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{
    external_metric, filtered_components, gain_function, noise_attenuation, speech_quality_proxy,
    MetricAdapter, MetricRow, SEGMENT_LEN,
};
use crate::rng::stream;
use crate::sde::SdeSpec;
use crate::signal::{read_wav, Stft, StftConfig};
use crate::solvers::SamplerConfig;

/// A row is flagged when its per-coefficient residual exceeds this many
/// posterior standard deviations. An exact posterior draw sits at 1.
pub const HIGH_RESIDUAL_FACTOR: f64 = 1.25;

fn cmp_spec(a: &SdeSpec, b: &SdeSpec) -> Ordering {
    a.kind()
        .as_str()
        .cmp(b.kind().as_str())
        .then(a.c().total_cmp(&b.c()))
        .then(a.k().total_cmp(&b.k()))
        .then(a.gamma().total_cmp(&b.gamma()))
        .then(a.t_end().total_cmp(&b.t_end()))
}

fn sorted_specs(plan: &SweepPlan) -> Vec<SdeSpec> {
    let mut specs = plan.sdes.clone();
    specs.sort_by(cmp_spec);
    specs
}

fn toy_config(plan: &SweepPlan) -> Result<&ToyConfig> {
    plan.validate()?;
    match &plan.task {
        Task::GaussianToy(cfg) => Ok(cfg),
        Task::WavPair(_) => Err(Error::InvalidSpec(
            "wav_pair plans carry no score model; evaluate them with the metrics command".into(),
        )),
    }
}

fn adapter(plan: &SweepPlan) -> Result<Option<MetricAdapter>> {
    plan.metric.clone().map(MetricAdapter::new).transpose()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Runs one configuration over all draws of the toy task.
pub fn run_toy_row(
    spec: &SdeSpec,
    sampler: &SamplerConfig,
    toy: &ToyConfig,
    adapter: Option<&MetricAdapter>,
    record_timing: bool,
) -> SweepRow {
    let start = Instant::now();
    let result = (|| -> Result<Vec<ToyOutcome>> {
        let stft = Stft::new(StftConfig::default())?;
        let length = toy.length();
        (0..toy.draws as u64)
            .map(|d| {
                let draw = draw_toy(toy, &mut stream(sampler.seed, 2 * d))?;
                let mut rng = stream(sampler.seed, 2 * d + 1);
                evaluate_toy_draw(spec, sampler, &draw, length, &stft, adapter, &mut rng)
            })
            .collect()
    })();
    let wall = record_timing.then(|| round_sig6(start.elapsed().as_secs_f64()));
    let mut row = SweepRow {
        sde: *spec,
        sampler: *sampler,
        draws: toy.draws,
        na_db: None,
        proxy_db: None,
        residual: None,
        prior_mismatch: None,
        external: None,
        delta_na_db: None,
        delta_proxy_db: None,
        delta_residual: None,
        status: RowStatus::Failed,
        error: None,
        wall_time_s: wall,
    };
    match result {
        Ok(outs) => {
            let pick = |f: fn(&ToyOutcome) -> f64| mean(&outs.iter().map(f).collect::<Vec<_>>());
            row.na_db = Some(round_sig6(pick(|o| o.na_db)));
            row.proxy_db = Some(round_sig6(pick(|o| o.proxy_db)));
            row.residual = Some(round_sig6(pick(|o| o.residual)));
            row.prior_mismatch = Some(round_sig6(pick(|o| o.prior_mismatch)));
            if outs.iter().all(|o| o.external.is_some()) {
                row.external = Some(round_sig6(pick(|o| o.external.unwrap())));
            }
            let rms = pick(|o| o.residual_rms);
            row.status = if rms > HIGH_RESIDUAL_FACTOR * toy.posterior_var().sqrt() {
                RowStatus::HighResidual
            } else {
                RowStatus::Ok
            };
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn run_rows(
    plan: &SweepPlan,
    kind: SweepKind,
    configs: Vec<(SdeSpec, SamplerConfig)>,
) -> Result<SweepReport> {
    let toy = toy_config(plan)?;
    let adapter = adapter(plan)?;
    let rows: Vec<SweepRow> = configs
        .par_iter()
        .map(|(spec, sampler)| {
            run_toy_row(spec, sampler, toy, adapter.as_ref(), plan.record_timing)
        })
        .collect();
    Ok(SweepReport {
        sweep: kind,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: plan.seed,
        task: plan.task.name().to_string(),
        rows,
    })
}

fn sampler(plan: &SweepPlan, t_rsp: f64, n_steps: usize) -> SamplerConfig {
    SamplerConfig {
        t_rsp,
        n_steps,
        seed: plan.seed,
        denoise_final: plan.denoise_final,
    }
}

/// Reverse solves from `T` for every SDE (sorted by kind, then `c`) and
/// every step count of the plan.
pub fn run_variance_sweep(plan: &SweepPlan) -> Result<SweepReport> {
    toy_config(plan)?;
    let configs = sorted_specs(plan)
        .into_iter()
        .flat_map(|spec| {
            plan.n_steps
                .iter()
                .map(move |&n| (spec, sampler(plan, spec.t_end(), n)))
        })
        .collect();
    run_rows(plan, SweepKind::Variance, configs)
}

/// One row per (SDE, start time) with `N = ceil(t_rsp / dt)` steps.
pub fn run_trsp_sweep(plan: &SweepPlan) -> Result<SweepReport> {
    toy_config(plan)?;
    let mut configs = Vec::new();
    for spec in sorted_specs(plan) {
        for t in plan.t_rsp_grid(&spec)? {
            let s = SamplerConfig::with_max_step(t, plan.dt, plan.seed);
            configs.push((spec, sampler(plan, t, s.n_steps)));
        }
    }
    run_rows(plan, SweepKind::Trsp, configs)
}

/// Rows for every step count, paired with the row of the largest count of
/// the same SDE through the `delta_*` columns.
pub fn run_step_robustness(plan: &SweepPlan) -> Result<SweepReport> {
    toy_config(plan)?;
    let mut steps = plan.n_steps.clone();
    steps.sort_unstable();
    steps.dedup();
    if steps.len() < 2 {
        return Err(Error::InvalidSpec(
            "step robustness needs at least two distinct step counts".into(),
        ));
    }
    steps.reverse();
    let configs = sorted_specs(plan)
        .into_iter()
        .flat_map(|spec| {
            steps
                .iter()
                .map(move |&n| (spec, sampler(plan, spec.t_end(), n)))
        })
        .collect();
    let mut report = run_rows(plan, SweepKind::Steps, configs)?;
    for group in report.rows.chunks_mut(steps.len()) {
        let (base, rest) = group.split_first_mut().unwrap();
        let diff = |a: Option<f64>, b: Option<f64>| Some(round_sig6(a? - b?));
        base.delta_na_db = diff(base.na_db, base.na_db);
        base.delta_proxy_db = diff(base.proxy_db, base.proxy_db);
        base.delta_residual = diff(base.residual, base.residual);
        for r in rest {
            r.delta_na_db = diff(r.na_db, base.na_db);
            r.delta_proxy_db = diff(r.proxy_db, base.proxy_db);
            r.delta_residual = diff(r.residual, base.residual);
        }
    }
    Ok(report)
}

/// Metrics of an externally enhanced recording against its clean reference.
pub fn evaluate_wav_pair(
    cfg: &WavPairConfig,
    adapter: Option<&MetricAdapter>,
) -> Result<MetricRow> {
    let clean = read_wav(&cfg.clean)?;
    let noisy = read_wav(&cfg.noisy)?;
    let estimate = read_wav(&cfg.estimate)?;
    let len = clean.len();
    if noisy.len() != len || estimate.len() != len {
        return Err(Error::ShapeMismatch {
            left: (len, 1),
            right: (noisy.len().max(estimate.len()), 1),
        });
    }
    let stft = Stft::new(StftConfig::default())?;
    let s = stft.analyze(&clean)?;
    let y = stft.analyze(&noisy)?;
    let gain = gain_function(&stft.analyze(&estimate)?, &y)?;
    let parts = filtered_components(&gain, &s, &y, stft.config(), len)?;
    let noise = noisy.sub(&clean)?;
    let external = match adapter {
        Some(a) => Some(round_sig6(external_metric(a, &clean, &estimate)?)),
        None => None,
    };
    Ok(MetricRow {
        config_id: file_stem(&cfg.estimate),
        na_db: round_sig6(noise_attenuation(&noise, &parts.n_tilde, SEGMENT_LEN)?),
        proxy_db: round_sig6(speech_quality_proxy(&parts.s_tilde, &clean)?),
        external,
    })
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}
