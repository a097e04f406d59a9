//! Deterministic writers: CSV with 17-significant-digit floats, LF line
//! endings, dot decimals; gnuplot scripts; metadata sidecars that re-parse
//! as config files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use native_critic::{RateLaw, RateReport, TrajectoryLog};

use crate::config::RunConfig;
use crate::CliError;

/// 17 significant digits, scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("creating {}: {e}", parent.display())))?;
        }
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

/// Sidecar with the resolved config echo plus run facts as trailing
/// comments, so the sidecar itself re-parses as a config file.
pub fn metadata(config: &RunConfig, facts: &[(&str, String)]) -> String {
    let mut out = config.echo_toml();
    if !out.ends_with('\n') {
        out.push('\n');
    }
    for (key, value) in facts {
        let _ = writeln!(out, "# {key} = {value}");
    }
    out
}

pub fn trajectory_csv(log: &TrajectoryLog, state_dim: usize, log_weights: bool) -> String {
    let n_weights = log.weights(0).len();
    let mut out = String::new();
    out.push('t');
    for i in 1..=state_dim {
        let _ = write!(out, ",x{i}");
    }
    if log_weights {
        for i in 1..=n_weights {
            let _ = write!(out, ",w{i}");
        }
    }
    out.push_str(",y,y_hat,residual,deadzone_active\n");
    for i in 0..log.len() {
        out.push_str(&fmt_f64(log.times()[i]));
        for v in log.state(i) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        if log_weights {
            for v in log.weights(i) {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            fmt_f64(log.output(i)),
            fmt_f64(log.estimate(i)),
            fmt_f64(log.residual(i)),
            u8::from(log.deadzone_active(i))
        );
    }
    out
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn opt_f64(v: Option<f64>) -> String {
    match v {
        Some(v) => fmt_f64(v),
        None => "nan".to_string(),
    }
}

pub fn rates_csv(report: &RateReport) -> String {
    let mut out = String::from("m,n,h,sup_power,value_error,control_error,jitter,status\n");
    for l in &report.levels {
        let status = match &l.error {
            Some(e) => csv_quote(e),
            None => "\"ok\"".to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            l.points_per_axis,
            l.n_centers,
            opt_f64(l.fill),
            opt_f64(l.sup_power),
            opt_f64(l.value_error),
            opt_f64(l.control_error),
            opt_f64(l.jitter),
            status
        );
    }
    out
}

/// Gnuplot script for the log-log error plot with the theoretical slope
/// line anchored at the coarsest completed level.
pub fn rates_gnuplot(report: &RateReport, csv_name: &str) -> String {
    let mut out = String::new();
    out.push_str("set terminal pngcairo size 900,600\n");
    out.push_str("set output 'rates.png'\n");
    out.push_str("set logscale xy\n");
    out.push_str("set xlabel 'fill distance h'\n");
    out.push_str("set ylabel 'sup-norm error'\n");
    out.push_str("set key bottom right\n");
    out.push_str("set datafile separator ','\n");
    let mut plots = vec![
        format!("'{csv_name}' using 3:5 skip 1 with linespoints title 'value error'"),
        format!("'{csv_name}' using 3:6 skip 1 with linespoints title 'control error'"),
        format!("'{csv_name}' using 3:4 skip 1 with linespoints title 'sup power function'"),
    ];
    match report.rate_law {
        Some(RateLaw::Polynomial(p)) => {
            if let Some(&(h0, e0)) = report.value_points().first() {
                plots.push(format!(
                    "{} * (x / {})**{} with lines dashtype 2 title 'theoretical slope {}'",
                    fmt_f64(e0),
                    fmt_f64(h0),
                    fmt_f64(p),
                    fmt_f64(p)
                ));
            }
        }
        Some(RateLaw::SuperPolynomial) => {
            out.push_str("# theoretical rate: super-polynomial (exponential-type bound)\n");
        }
        None => {
            out.push_str("# no rate-lemma exponent for this kernel family\n");
        }
    }
    if let Some(fit) = &report.value_fit {
        let _ = writeln!(
            out,
            "# fitted value slope = {} (r^2 = {})",
            fmt_f64(fit.slope),
            fmt_f64(fit.r_squared)
        );
    }
    if let Some(fit) = &report.control_fit {
        let _ = writeln!(out, "# fitted control slope = {}", fmt_f64(fit.slope));
    }
    let _ = writeln!(out, "plot {}", plots.join(", \\\n     "));
    out
}

pub fn power_csv(points: &[(Vec<f64>, f64)]) -> String {
    let dim = points.first().map(|(p, _)| p.len()).unwrap_or(0);
    let mut out = String::new();
    for i in 1..=dim {
        if i > 1 {
            out.push(',');
        }
        let _ = write!(out, "x{i}");
    }
    out.push_str(",power\n");
    for (p, v) in points {
        for (i, c) in p.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(*c));
        }
        out.push(',');
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

pub fn pe_csv(stats: &[native_critic::PEWindowStats]) -> String {
    let mut out = String::from("window_start,window_end,gamma1,gamma2\n");
    for w in stats {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(w.start),
            fmt_f64(w.start + w.duration),
            fmt_f64(w.gamma1),
            fmt_f64(w.gamma2)
        );
    }
    out
}
