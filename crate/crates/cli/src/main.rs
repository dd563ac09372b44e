use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use diffvar::experiments::{
    evaluate_wav_pair, render_report, run_step_robustness, run_trsp_sweep, run_variance_sweep,
    ReportFormat, SweepPlan, SweepReport, Task, WavPairConfig,
};
use diffvar::metrics::{write_metric_csv, MetricAdapter, MetricAdapterConfig};
use diffvar::rng::seeded;
use diffvar::solvers::monte_carlo_kernel_stats_at;
use diffvar::{Complex64, ComplexGrid, SdeKind, SdeSpec};

/// Diffusion-coefficient experiments for SDE-based speech enhancement.
#[derive(Parser)]
#[command(name = "diffvar", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Plan file (TOML); flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_kind)]
    sde: Option<SdeKind>,
    /// Variance scale values, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    c: Vec<f64>,
    #[arg(long, global = true)]
    k: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long = "T", global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    n_steps: Vec<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    t_rsp: Vec<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Toy draws per row.
    #[arg(long, global = true)]
    draws: Option<usize>,
    /// Record wall time per row (reports are then not reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the variance scale c at t_rsp = T.
    SweepC,
    /// Sweep the reverse start time at a fixed step size.
    SweepTrsp {
        /// Reverse step size.
        #[arg(long, default_value_t = 1.0 / 30.0)]
        dt: f64,
    },
    /// Compare step counts (default 60 against 30).
    SweepSteps,
    /// Score an externally enhanced recording against its clean reference.
    Metrics {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        noisy: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// External metric executable.
        #[arg(long)]
        metric_exe: Option<PathBuf>,
        /// Argument template with {ref} and {deg} placeholders, space separated.
        #[arg(long)]
        metric_args: Option<String>,
        #[arg(long)]
        metric_regex: Option<String>,
    },
    /// Compare simulated forward moments with the closed-form kernel.
    KernelCheck {
        /// Evaluation times, multiples of dt.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
        t: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Initial clean value as re,im.
        #[arg(long, value_parser = parse_complex, default_value = "0.4,0")]
        x0: Complex64,
        /// Mixture value as re,im.
        #[arg(long, value_parser = parse_complex, default_value = "0,0.2")]
        y: Complex64,
    },
}

fn parse_kind(s: &str) -> std::result::Result<SdeKind, String> {
    s.parse().map_err(|e: diffvar::Error| e.to_string())
}

fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| format!("expected re,im, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok(Complex64::new(p(re)?, p(im)?))
}

const DEFAULT_C_GRID: [f64; 3] = [0.01, 0.08, 0.51];

fn build_specs(g: &GlobalArgs, base: &[SdeSpec]) -> Result<Vec<SdeSpec>> {
    let overrides = g.sde.is_some()
        || !g.c.is_empty()
        || g.k.is_some()
        || g.gamma.is_some()
        || g.t_end.is_some();
    if !overrides && !base.is_empty() {
        return Ok(base.to_vec());
    }
    let kind = g
        .sde
        .or_else(|| base.first().map(|s| s.kind()))
        .unwrap_or(SdeKind::Bbed);
    let cs: Vec<f64> = if !g.c.is_empty() {
        g.c.clone()
    } else if !base.is_empty() {
        base.iter().map(|s| s.c()).collect()
    } else {
        DEFAULT_C_GRID.to_vec()
    };
    cs.into_iter()
        .map(|c| {
            let d = SdeSpec::default_for(kind, c)?;
            let spec = SdeSpec::new(
                kind,
                g.gamma.unwrap_or(d.gamma()),
                c,
                g.k.unwrap_or(d.k()),
                g.t_end.unwrap_or(d.t_end()),
            )?;
            Ok(spec)
        })
        .collect()
}

fn build_plan(g: &GlobalArgs, default_steps: &[usize]) -> Result<SweepPlan> {
    let mut plan = match &g.config {
        Some(p) => SweepPlan::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => SweepPlan {
            n_steps: default_steps.to_vec(),
            ..SweepPlan::default()
        },
    };
    plan.sdes = build_specs(g, &plan.sdes)?;
    if !g.n_steps.is_empty() {
        plan.n_steps = g.n_steps.clone();
    }
    if !g.t_rsp.is_empty() {
        plan.t_rsp = Some(g.t_rsp.clone());
    }
    if let Some(seed) = g.seed {
        plan.seed = seed;
    }
    if let Some(draws) = g.draws {
        match &mut plan.task {
            Task::GaussianToy(t) => t.draws = draws,
            Task::WavPair(_) => bail!("--draws applies to the gaussian_toy task only"),
        }
    }
    plan.record_timing |= g.timing;
    plan.validate()?;
    Ok(plan)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn emit(g: &GlobalArgs, report: &SweepReport) -> Result<()> {
    let text = render_report(report, g.format.into())?;
    write_output(g.out.as_deref(), &text)
}

fn kernel_check(
    g: &GlobalArgs,
    times: &[f64],
    paths: usize,
    dt: f64,
    x0: Complex64,
    y: Complex64,
) -> Result<()> {
    let specs = build_specs(g, &[])?;
    let x0 = ComplexGrid::scalar(x0);
    let y = ComplexGrid::scalar(y);
    let mut rng = seeded(g.seed.unwrap_or(0));
    let mut text = String::from(
        "sde,t,mean_re,mean_im,oracle_mean_re,oracle_mean_im,mean_z,var,oracle_var,var_rel_err\n",
    );
    for spec in specs {
        let stats = monte_carlo_kernel_stats_at(&spec, &x0, &y, times, paths, dt, &mut rng)?;
        for s in stats {
            let km = spec.kernel_moments(&x0, &y, s.t)?;
            let (m, o) = (s.mean.as_slice()[0], km.mean.as_slice()[0]);
            let se = s.mean_standard_error();
            let z = if se > 0.0 { (m - o).norm() / se } else { 0.0 };
            let ov = km.std * km.std;
            let rel = if ov > 0.0 { s.var / ov - 1.0 } else { 0.0 };
            text.push_str(&format!(
                "{},{},{:.5e},{:.5e},{:.5e},{:.5e},{:.5e},{:.5e},{:.5e},{:.5e}\n",
                spec.id(),
                s.t,
                m.re,
                m.im,
                o.re,
                o.im,
                z,
                s.var,
                ov,
                rel
            ));
        }
    }
    write_output(g.out.as_deref(), &text)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let g = &cli.global;
    match cli.command {
        Command::SweepC => emit(g, &run_variance_sweep(&build_plan(g, &[60])?)?),
        Command::SweepTrsp { dt } => {
            let mut plan = build_plan(g, &[60])?;
            plan.dt = dt;
            emit(g, &run_trsp_sweep(&plan)?)
        }
        Command::SweepSteps => emit(g, &run_step_robustness(&build_plan(g, &[30, 60])?)?),
        Command::Metrics {
            clean,
            noisy,
            estimate,
            metric_exe,
            metric_args,
            metric_regex,
        } => {
            let adapter = match metric_exe {
                Some(exe) => {
                    let mut cfg = MetricAdapterConfig {
                        executable: Some(exe),
                        ..Default::default()
                    };
                    if let Some(a) = metric_args {
                        cfg.args = a.split_whitespace().map(str::to_string).collect();
                    }
                    if let Some(r) = metric_regex {
                        cfg.stdout_regex = r;
                    }
                    Some(MetricAdapter::new(cfg)?)
                }
                None => None,
            };
            let row = evaluate_wav_pair(
                &WavPairConfig {
                    clean,
                    noisy,
                    estimate,
                },
                adapter.as_ref(),
            )?;
            let text = match g.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_metric_csv(std::slice::from_ref(&row), &mut buf)?;
                    String::from_utf8(buf)?
                }
                Format::Json => serde_json::to_string_pretty(&row)? + "\n",
            };
            write_output(g.out.as_deref(), &text)
        }
        Command::KernelCheck {
            t,
            paths,
            dt,
            x0,
            y,
        } => kernel_check(g, &t, paths, dt, x0, y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use diffvar::experiments::ToyConfig;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn complex_parser() {
        assert_eq!(parse_complex("0.5,-1").unwrap(), Complex64::new(0.5, -1.0));
        assert!(parse_complex("0.5").is_err());
    }

    #[test]
    fn default_plan_is_the_bbed_c_grid() {
        let cli = Cli::try_parse_from(["diffvar", "sweep-c"]).unwrap();
        let plan = build_plan(&cli.global, &[60]).unwrap();
        let cs: Vec<f64> = plan.sdes.iter().map(|s| s.c()).collect();
        assert_eq!(cs, DEFAULT_C_GRID);
        assert!(plan.sdes.iter().all(|s| s.kind() == SdeKind::Bbed));
        assert_eq!(plan.n_steps, vec![60]);
        assert!(matches!(
            plan.task,
            Task::GaussianToy(ToyConfig { draws: 8, .. })
        ));
    }

    #[test]
    fn flags_override() {
        let cli = Cli::try_parse_from([
            "diffvar",
            "sweep-steps",
            "--sde",
            "ouve",
            "--c",
            "0.1,0.73",
            "--gamma",
            "2",
            "--n-steps",
            "10,20",
            "--seed",
            "5",
        ])
        .unwrap();
        let plan = build_plan(&cli.global, &[30, 60]).unwrap();
        assert_eq!(plan.sdes.len(), 2);
        assert_eq!(plan.sdes[1].c(), 0.73);
        assert_eq!(plan.sdes[0].gamma(), 2.0);
        assert_eq!(plan.n_steps, vec![10, 20]);
        assert_eq!(plan.seed, 5);
    }
}
