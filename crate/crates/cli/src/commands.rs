//! Subcommand implementations. Each one loads the shared problem data
//! from the resolved config, runs the experiment, and writes CSV output
//! plus a metadata sidecar into the output directory.

use std::path::PathBuf;

use native_critic::{grammian, pe_stats, power_function, rate_sweep, simulate};

use crate::config::RunConfig;
use crate::output::{
    fmt_f64, metadata, pe_csv, power_csv, rates_csv, rates_gnuplot, trajectory_csv, write_file,
};
use crate::CliError;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

struct Loaded {
    problem: native_critic::NamedProblem,
    kernel: native_critic::KernelSpec,
    centers: native_critic::CenterSet,
    grammian: native_critic::GrammianFactor,
}

fn load(config: &RunConfig) -> Result<Loaded, CliError> {
    let problem = config.problem_instance()?;
    let kernel = config.kernel_instance()?;
    let centers = config.centers_instance()?;
    let gf = grammian(&kernel, &centers).map_err(runtime)?;
    Ok(Loaded {
        problem,
        kernel,
        centers,
        grammian: gf,
    })
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.out_dir_path().join(name)
}

/// Integrate the critic along the plant and write the trajectory log.
pub fn cmd_simulate(config: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let loaded = load(config)?;
    let cfg = config.learning_config();
    let log = simulate(
        &cfg,
        &loaded.kernel,
        &loaded.centers,
        &loaded.grammian,
        &loaded.problem.system,
        &loaded.problem.cost,
        &loaded.problem.policy,
        &config.critic.x0,
    )
    .map_err(runtime)?;

    let csv = trajectory_csv(&log, loaded.problem.system.state_dim(), config.critic.log_weights);
    write_file(&out_path(config, "trajectory.csv"), &csv)?;
    let meta = metadata(
        config,
        &[
            ("command", "simulate".to_string()),
            ("grammian_jitter", fmt_f64(loaded.grammian.jitter())),
            ("n_centers", loaded.centers.len().to_string()),
            ("rows", log.len().to_string()),
        ],
    );
    write_file(&out_path(config, "trajectory_meta.toml"), &meta)?;
    if !quiet {
        println!(
            "simulate: {} rows -> {}",
            log.len(),
            out_path(config, "trajectory.csv").display()
        );
    }
    Ok(())
}

/// Run the center-refinement sweep and write the rate report and its
/// gnuplot script.
pub fn cmd_rates(config: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let problem = config.problem_instance()?;
    let kernel = config.kernel_instance()?;
    let cfg = config.learning_config();
    let opts = config.sweep_options();
    let report = rate_sweep(&problem, &kernel, &config.rates.grid_levels, &cfg, &opts)
        .map_err(runtime)?;

    write_file(&out_path(config, "rates.csv"), &rates_csv(&report))?;
    write_file(
        &out_path(config, "rates.gp"),
        &rates_gnuplot(&report, "rates.csv"),
    )?;
    let slope = |fit: &Option<native_critic::SlopeFit>| match fit {
        Some(f) => fmt_f64(f.slope),
        None => "insufficient-levels".to_string(),
    };
    let meta = metadata(
        config,
        &[
            ("command", "rates".to_string()),
            ("value_slope", slope(&report.value_fit)),
            ("control_slope", slope(&report.control_fit)),
            ("power_slope", slope(&report.power_fit)),
        ],
    );
    write_file(&out_path(config, "rates_meta.toml"), &meta)?;
    if !quiet {
        for l in &report.levels {
            match &l.error {
                Some(e) => println!("rates: m={} failed: {e}", l.points_per_axis),
                None => println!(
                    "rates: m={} h={} value_error={}",
                    l.points_per_axis,
                    l.fill.map(fmt_f64).unwrap_or_default(),
                    l.value_error.map(fmt_f64).unwrap_or_default()
                ),
            }
        }
        println!(
            "rates: value slope {} -> {}",
            slope(&report.value_fit),
            out_path(config, "rates.csv").display()
        );
    }
    Ok(())
}

/// Evaluate the power function over the domain grid and write the field.
pub fn cmd_power(config: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let loaded = load(config)?;
    let domain = config.domain_instance()?;
    let grid = domain.grid(config.resolution).map_err(runtime)?;
    let mut points = Vec::with_capacity(grid.len());
    for p in grid.points() {
        let v = power_function(&loaded.kernel, &loaded.centers, &loaded.grammian, &p)
            .map_err(runtime)?;
        points.push((p, v));
    }
    write_file(&out_path(config, "power.csv"), &power_csv(&points))?;
    let sup = points.iter().map(|(_, v)| *v).fold(0.0f64, f64::max);
    let meta = metadata(
        config,
        &[
            ("command", "power".to_string()),
            ("grammian_jitter", fmt_f64(loaded.grammian.jitter())),
            ("sup_power", fmt_f64(sup)),
        ],
    );
    write_file(&out_path(config, "power_meta.toml"), &meta)?;
    if !quiet {
        println!(
            "power: {} grid points, sup {} -> {}",
            points.len(),
            fmt_f64(sup),
            out_path(config, "power.csv").display()
        );
    }
    Ok(())
}

/// Run the critic with dense logging and write per-window PE levels.
pub fn cmd_pe(config: &RunConfig, quiet: bool) -> Result<(), CliError> {
    if config.pe.window > config.critic.horizon {
        return Err(CliError::Config(format!(
            "pe.window {} exceeds critic.horizon {}",
            config.pe.window, config.critic.horizon
        )));
    }
    let loaded = load(config)?;
    let mut cfg = config.learning_config();
    // PE windows need every step: the integral is assembled from samples
    cfg.sample_every = 1;
    let log = simulate(
        &cfg,
        &loaded.kernel,
        &loaded.centers,
        &loaded.grammian,
        &loaded.problem.system,
        &loaded.problem.cost,
        &loaded.problem.policy,
        &config.critic.x0,
    )
    .map_err(runtime)?;
    let stats = pe_stats(&log, &loaded.grammian, config.pe.window).map_err(runtime)?;
    write_file(&out_path(config, "pe.csv"), &pe_csv(&stats))?;
    let min_gamma1 = stats.iter().map(|w| w.gamma1).fold(f64::INFINITY, f64::min);
    let meta = metadata(
        config,
        &[
            ("command", "pe".to_string()),
            ("windows", stats.len().to_string()),
            ("min_gamma1", fmt_f64(min_gamma1)),
        ],
    );
    write_file(&out_path(config, "pe_meta.toml"), &meta)?;
    if !quiet {
        println!(
            "pe: {} windows, min gamma1 {} -> {}",
            stats.len(),
            fmt_f64(min_gamma1),
            out_path(config, "pe.csv").display()
        );
    }
    Ok(())
}
