use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rbffd::harness::report::{write_eigenvalues, write_json, write_solve_csv, write_sweep_csv};
use rbffd::harness::sweep::sweep_spacings;
use rbffd::harness::{
    assemble_system, cardinal_trace, discretize, run_h_sweep, run_p_sweep, run_q_sweep,
    run_solve_on, run_spectrum, voronoi_jump, ExperimentConfig, PdeKind, SweepReport,
};
use rbffd::nodes::spacing_report;

#[derive(Parser)]
#[command(
    name = "rbffd",
    version,
    about = "RBF-FD least-squares and collocation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set degree=4`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (defaults to the configured `output`, then `.`).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Single solve at the first configured spacing.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write the global matrix in coordinate text format.
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Refinement in h, with a fitted convergence rate.
    SweepH {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep over the polynomial degrees in `degrees`.
    SweepP {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep over the oversampling values in `q_values`.
    SweepQ {
        #[command(flatten)]
        common: Common,
    },
    /// Eigenvalues of the evaluation/operator product.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Oversampling values (defaults to the configured `oversampling`).
        #[arg(long, value_delimiter = ',')]
        oversampling: Vec<f64>,
    },
    /// Write the trial and evaluation node sets.
    Nodes {
        #[command(flatten)]
        common: Common,
    },
    /// 1D global cardinal function on uniform nodes.
    Cardinal {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        stencil_size: usize,
        #[arg(long, default_value_t = 3)]
        degree: u32,
        /// Node whose cardinal function is traced (defaults to the middle).
        #[arg(long)]
        node: Option<usize>,
        #[arg(long, default_value_t = 2001)]
        samples: usize,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let base = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("config: reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text).context("config")?
        }
        None => ExperimentConfig::default(),
    };
    let cfg = base.with_overrides(&common.overrides).context("config")?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out).with_context(|| format!("output: creating {}", out.display()))?;
    Ok((cfg, out))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    log::info!("writing {}", path.display());
    let f = File::create(&path).with_context(|| format!("output: creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn first_spacing(cfg: &ExperimentConfig) -> Result<f64> {
    sweep_spacings(cfg)
        .context("geometry")?
        .first()
        .copied()
        .context("config: no spacing or node count given")
}

fn solve(common: &Common, dump_matrix: bool) -> Result<()> {
    let (cfg, out) = load(common)?;
    let spacing = first_spacing(&cfg)?;
    let disc = discretize(&cfg, spacing)?;
    let report = run_solve_on(&cfg, &disc)?;
    write_solve_csv(create(&out, "solve.csv")?, &cfg, &report).context("output")?;
    write_json(
        create(&out, "summary.json")?,
        &json!({ "config": cfg, "report": report }),
    )
    .context("output")?;
    if dump_matrix {
        let sys = assemble_system(&cfg, &disc)?;
        sys.matrix
            .write_triplets(create(&out, "matrix.txt")?)
            .context("output")?;
    }
    println!(
        "{} p={} q={} h={} N={} M={} error={:.3e} stability={}",
        report.method,
        report.degree,
        report.oversampling,
        report.spacing,
        report.trial_nodes,
        report.evaluation_points,
        report.error,
        report
            .stability_norm
            .map(|s| format!("{s:.3}"))
            .unwrap_or_else(|| "-".into())
    );
    Ok(())
}

fn sweep(
    common: &Common,
    name: &str,
    run: fn(&ExperimentConfig) -> rbffd::Result<SweepReport>,
) -> Result<()> {
    let (cfg, out) = load(common)?;
    let report = run(&cfg)?;
    write_sweep_csv(create(&out, &format!("sweep_{name}.csv"))?, &cfg, &report)
        .context("output")?;
    write_json(
        create(&out, &format!("sweep_{name}.json"))?,
        &json!({ "config": cfg, "report": report }),
    )
    .context("output")?;
    for row in &report.rows {
        match (&row.report, &row.failure) {
            (Some(r), _) => println!(
                "{name}={} N={} M={} error={:.3e}",
                row.value, r.trial_nodes, r.evaluation_points, r.error
            ),
            (None, Some(f)) => println!("{name}={} failed: {f}", row.value),
            (None, None) => {}
        }
    }
    if let Some(fit) = report.fit {
        println!(
            "rate={:.3} residual={:.3} points={}",
            fit.rate, fit.residual, fit.points
        );
    }
    Ok(())
}

fn spectrum(common: &Common, values: &[f64]) -> Result<()> {
    let (cfg, out) = load(common)?;
    let spacing = first_spacing(&cfg)?;
    let operator = match cfg.pde {
        PdeKind::Poisson => "poisson",
        PdeKind::Advection => "advection",
    };
    let values = if values.is_empty() {
        vec![cfg.oversampling]
    } else {
        values.to_vec()
    };
    let mut summary = Vec::new();
    for oversampling in values {
        let c = ExperimentConfig {
            oversampling,
            ..cfg.clone()
        };
        let report = run_spectrum(&c, spacing)?;
        write_eigenvalues(
            create(&out, &format!("eigenvalues_{operator}_q{oversampling}.txt"))?,
            &report.spectrum.eigenvalues,
        )
        .context("output")?;
        println!(
            "q={oversampling} N={} M={} nullspace={} rank={} real part in [{:.3e}, {:.3e}]",
            report.trial_nodes,
            report.evaluation_points,
            report.spectrum.nullspace,
            report.spectrum.rank,
            report.min_real,
            report.max_real
        );
        summary.push(json!({
            "oversampling": oversampling,
            "trial_nodes": report.trial_nodes,
            "evaluation_points": report.evaluation_points,
            "nullspace": report.spectrum.nullspace,
            "rank": report.spectrum.rank,
            "min_real": report.min_real,
            "max_real": report.max_real,
        }));
    }
    write_json(
        create(&out, "spectrum.json")?,
        &json!({ "config": cfg, "spectra": summary }),
    )
    .context("output")?;
    Ok(())
}

fn nodes(common: &Common) -> Result<()> {
    let (cfg, out) = load(common)?;
    let spacing = first_spacing(&cfg)?;
    let disc = discretize(&cfg, spacing)?;
    disc.trial
        .write_text(create(&out, "nodes_x.txt")?)
        .context("output")?;
    disc.evaluation
        .nodes
        .write_text(create(&out, "nodes_y.txt")?)
        .context("output")?;
    let quality = spacing_report(&disc.trial, &disc.domain);
    write_json(
        create(&out, "nodes.json")?,
        &json!({
            "config": cfg,
            "h": spacing,
            "trial_nodes": disc.trial.len(),
            "evaluation_points": disc.evaluation.nodes.len(),
            "fill_distance": quality.fill_distance,
            "separation_distance": quality.separation_distance,
            "quality": quality.quality,
        }),
    )
    .context("output")?;
    println!(
        "h={spacing} N={} M={} fill={:.4} separation={:.4}",
        disc.trial.len(),
        disc.evaluation.nodes.len(),
        quality.fill_distance,
        quality.separation_distance
    );
    Ok(())
}

fn cardinal(
    count: usize,
    stencil_size: usize,
    degree: u32,
    node: Option<usize>,
    samples: usize,
    out: &Path,
) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("output: creating {}", out.display()))?;
    let node = node.unwrap_or(count / 2);
    let trace = cardinal_trace(count, stencil_size, degree, node, samples).context("cardinal")?;
    let mut w = create(out, "cardinal.txt")?;
    use std::io::Write;
    for (x, v) in &trace {
        writeln!(w, "{x:e} {v:e}").context("output")?;
    }
    let jump = if count % 2 == 0 {
        Some(voronoi_jump(count, stencil_size, degree, f64::sin).context("cardinal")?)
    } else {
        None
    };
    write_json(
        create(out, "cardinal.json")?,
        &json!({
            "count": count,
            "stencil_size": stencil_size,
            "degree": degree,
            "node": node,
            "samples": samples,
            "sine_jump_at_middle_edge": jump,
        }),
    )
    .context("output")?;
    if let Some(j) = jump {
        println!("jump of the sine interpolant at x=0.5: {j:.3e}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Solve {
            common,
            dump_matrix,
        } => solve(common, *dump_matrix),
        Command::SweepH { common } => sweep(common, "h", run_h_sweep),
        Command::SweepP { common } => sweep(common, "p", run_p_sweep),
        Command::SweepQ { common } => sweep(common, "q", run_q_sweep),
        Command::Spectrum {
            common,
            oversampling,
        } => spectrum(common, oversampling),
        Command::Nodes { common } => nodes(common),
        Command::Cardinal {
            count,
            stencil_size,
            degree,
            node,
            samples,
            out,
        } => cardinal(*count, *stencil_size, *degree, *node, *samples, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
