//! Run configuration: one sectioned key-value file per run, parsed as
//! TOML with unknown keys rejected, ranges validated, and defaults
//! filled in. The resolved configuration re-serializes byte-stably so a
//! run's metadata echo can reproduce it exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use native_critic::{
    lookup_problem, BoxDomain, CenterSet, Excitation, KernelSpec, LearningConfig, NamedProblem,
    SweepOptions, SweepTarget,
};

use crate::CliError;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

// ---------------------------------------------------------------------
// raw (all-optional) layer

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Option<String>,
    seed: Option<u64>,
    resolution: Option<usize>,
    out_dir: Option<String>,
    domain: Option<RawDomain>,
    kernel: Option<RawKernel>,
    centers: Option<RawCenters>,
    critic: Option<RawCritic>,
    rates: Option<RawRates>,
    pe: Option<RawPe>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    family: Option<String>,
    lengthscale: Option<f64>,
    smoothness: Option<f64>,
    shape: Option<f64>,
    beta: Option<f64>,
    support_radius: Option<f64>,
    rate_constant: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCenters {
    grid: Option<usize>,
    csv: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCritic {
    a: Option<f64>,
    dt: Option<f64>,
    horizon: Option<f64>,
    deadzone: Option<f64>,
    normalize: Option<bool>,
    x0: Option<Vec<f64>>,
    w0: Option<Vec<f64>>,
    sample_every: Option<usize>,
    log_weights: Option<bool>,
    excitation: Option<RawExcitation>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExcitation {
    mode: Option<String>,
    amplitudes: Option<Vec<f64>>,
    frequencies: Option<Vec<f64>>,
    period: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRates {
    grid_levels: Option<Vec<usize>>,
    target: Option<String>,
    manufactured_amplitude: Option<f64>,
    deadzone_power_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPe {
    window: Option<f64>,
}

// ---------------------------------------------------------------------
// resolved layer (fully defaulted, echoes byte-stably)

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub seed: u64,
    pub resolution: usize,
    pub out_dir: String,
    pub domain: DomainSection,
    pub kernel: KernelSection,
    pub centers: CentersSection,
    pub critic: CriticSection,
    pub rates: RatesSection,
    pub pe: PeSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DomainSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KernelSection {
    pub family: String,
    pub lengthscale: f64,
    pub smoothness: f64,
    pub shape: f64,
    pub beta: f64,
    pub support_radius: f64,
    pub rate_constant: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CentersSection {
    pub grid: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CriticSection {
    pub a: f64,
    pub dt: f64,
    pub horizon: f64,
    pub deadzone: f64,
    pub normalize: bool,
    pub x0: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w0: Option<Vec<f64>>,
    pub sample_every: usize,
    pub log_weights: bool,
    pub excitation: ExcitationSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExcitationSection {
    pub mode: String,
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub period: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RatesSection {
    pub grid_levels: Vec<usize>,
    pub target: String,
    pub manufactured_amplitude: f64,
    pub deadzone_power_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PeSection {
    pub window: f64,
}

/// Parse and validate a config file; fill documented defaults.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    let raw: RawConfig = toml::from_str(&text)
        .map_err(|e| config_err(format!("config {}: {e}", path.display())))?;
    resolve(raw, path.parent().unwrap_or_else(|| Path::new(".")))
}

fn resolve(raw: RawConfig, base_dir: &Path) -> Result<RunConfig, CliError> {
    let problem_name = raw.problem.unwrap_or_else(|| "benchmark2d".to_string());
    let problem = lookup_problem(&problem_name)
        .ok_or_else(|| config_err(format!("unknown problem {problem_name:?}")))?;
    let dim = problem.system.state_dim();

    let domain = match raw.domain {
        Some(d) => {
            let lower = d
                .lower
                .ok_or_else(|| config_err("domain.lower is required when [domain] is given"))?;
            let upper = d
                .upper
                .ok_or_else(|| config_err("domain.upper is required when [domain] is given"))?;
            BoxDomain::new(lower, upper).map_err(|e| config_err(e.to_string()))?
        }
        None => problem.domain.clone(),
    };
    if domain.dim() != dim {
        return Err(config_err(format!(
            "domain dimension {} does not match problem state dimension {dim}",
            domain.dim()
        )));
    }

    let k = raw.kernel.unwrap_or_default();
    let kernel = KernelSection {
        family: k.family.unwrap_or_else(|| "sobolev_matern".to_string()),
        lengthscale: k.lengthscale.unwrap_or(0.7),
        smoothness: k
            .smoothness
            .unwrap_or(dim as f64 / 2.0 + 1.5),
        shape: k.shape.unwrap_or(1.0),
        beta: k.beta.unwrap_or(-0.5),
        support_radius: k.support_radius.unwrap_or(1.0),
        rate_constant: k.rate_constant.unwrap_or(1.0),
    };

    let c = raw.centers.unwrap_or_default();
    if c.grid.is_some() && c.csv.is_some() {
        return Err(config_err("centers.grid and centers.csv are mutually exclusive"));
    }
    let csv = match c.csv {
        Some(rel) => {
            let path = base_dir.join(&rel);
            if !path.is_file() {
                return Err(config_err(format!(
                    "centers.csv file {} does not exist",
                    path.display()
                )));
            }
            Some(path.to_string_lossy().into_owned())
        }
        None => None,
    };
    let centers = CentersSection {
        grid: c.grid.unwrap_or(9),
        csv,
    };
    if centers.csv.is_none() && centers.grid < 2 {
        return Err(config_err(format!(
            "centers.grid must be at least 2, got {}",
            centers.grid
        )));
    }

    let cr = raw.critic.unwrap_or_default();
    let ex = cr.excitation.unwrap_or_default();
    let mode = ex.mode.unwrap_or_else(|| "probing".to_string());
    if !["none", "probing", "reset"].contains(&mode.as_str()) {
        return Err(config_err(format!(
            "critic.excitation.mode must be none, probing, or reset, got {mode:?}"
        )));
    }
    let excitation = ExcitationSection {
        mode,
        amplitudes: ex.amplitudes.unwrap_or_else(|| vec![0.8, 0.6]),
        frequencies: ex.frequencies.unwrap_or_else(|| vec![7.0, 11.3]),
        period: ex.period.unwrap_or(0.5),
    };
    if excitation.amplitudes.len() != excitation.frequencies.len() {
        return Err(config_err(
            "critic.excitation amplitudes and frequencies must have equal length",
        ));
    }
    if !(excitation.period > 0.0 && excitation.period.is_finite()) {
        return Err(config_err(format!(
            "critic.excitation.period must be positive, got {}",
            excitation.period
        )));
    }

    let default_x0: Vec<f64> = (0..dim).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let critic = CriticSection {
        a: cr.a.unwrap_or(50.0),
        dt: cr.dt.unwrap_or(1e-3),
        horizon: cr.horizon.unwrap_or(10.0),
        deadzone: cr.deadzone.unwrap_or(0.0),
        normalize: cr.normalize.unwrap_or(false),
        x0: cr.x0.unwrap_or(default_x0),
        w0: cr.w0,
        sample_every: cr.sample_every.unwrap_or(10),
        log_weights: cr.log_weights.unwrap_or(false),
        excitation,
    };
    if !(critic.a > 0.0 && critic.a.is_finite()) {
        return Err(config_err(format!("critic.a must be positive, got {}", critic.a)));
    }
    if !(critic.dt > 0.0 && critic.dt.is_finite()) {
        return Err(config_err(format!("critic.dt must be positive, got {}", critic.dt)));
    }
    if !(critic.horizon >= 0.0 && critic.horizon.is_finite()) {
        return Err(config_err(format!(
            "critic.horizon must be nonnegative, got {}",
            critic.horizon
        )));
    }
    if !(critic.deadzone >= 0.0 && critic.deadzone.is_finite()) {
        return Err(config_err(format!(
            "critic.deadzone must be nonnegative, got {}",
            critic.deadzone
        )));
    }
    if critic.sample_every == 0 {
        return Err(config_err("critic.sample_every must be at least 1"));
    }
    if critic.x0.len() != dim {
        return Err(config_err(format!(
            "critic.x0 has length {}, problem state dimension is {dim}",
            critic.x0.len()
        )));
    }

    let r = raw.rates.unwrap_or_default();
    let rates = RatesSection {
        grid_levels: r.grid_levels.unwrap_or_else(|| vec![5, 7, 9, 13, 17]),
        target: r.target.unwrap_or_else(|| "analytic".to_string()),
        manufactured_amplitude: r.manufactured_amplitude.unwrap_or(1.0),
        deadzone_power_scale: r.deadzone_power_scale.unwrap_or(0.0),
    };
    if rates.grid_levels.is_empty() {
        return Err(config_err("rates.grid_levels must not be empty"));
    }
    if rates.grid_levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err("rates.grid_levels must be strictly increasing"));
    }
    if !["analytic", "manufactured"].contains(&rates.target.as_str()) {
        return Err(config_err(format!(
            "rates.target must be analytic or manufactured, got {:?}",
            rates.target
        )));
    }
    if !(rates.deadzone_power_scale >= 0.0 && rates.deadzone_power_scale.is_finite()) {
        return Err(config_err("rates.deadzone_power_scale must be nonnegative"));
    }

    let pe = PeSection {
        window: raw.pe.unwrap_or_default().window.unwrap_or(2.0),
    };
    if !(pe.window > 0.0 && pe.window.is_finite()) {
        return Err(config_err(format!("pe.window must be positive, got {}", pe.window)));
    }

    let resolution = raw.resolution.unwrap_or(101);
    if resolution < 2 {
        return Err(config_err(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }

    Ok(RunConfig {
        problem: problem_name,
        seed: raw.seed.unwrap_or(0),
        resolution,
        out_dir: raw.out_dir.unwrap_or_else(|| ".".to_string()),
        domain: DomainSection {
            lower: domain.lower().to_vec(),
            upper: domain.upper().to_vec(),
        },
        kernel,
        centers,
        critic,
        rates,
        pe,
    })
}

impl RunConfig {
    pub fn out_dir_path(&self) -> PathBuf {
        PathBuf::from(&self.out_dir)
    }

    /// Byte-stable TOML echo of the resolved configuration.
    pub fn echo_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serializes")
    }

    pub fn problem_instance(&self) -> Result<NamedProblem, CliError> {
        lookup_problem(&self.problem)
            .ok_or_else(|| config_err(format!("unknown problem {:?}", self.problem)))
    }

    pub fn domain_instance(&self) -> Result<BoxDomain, CliError> {
        BoxDomain::new(self.domain.lower.clone(), self.domain.upper.clone())
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn kernel_instance(&self) -> Result<KernelSpec, CliError> {
        let dim = self.domain.lower.len();
        let k = &self.kernel;
        let spec = match k.family.as_str() {
            "gaussian" => KernelSpec::gaussian(dim, k.lengthscale),
            "exponential" => KernelSpec::exponential(dim, k.lengthscale),
            "inverse_multiquadric" => {
                KernelSpec::inverse_multiquadric(dim, k.lengthscale, k.shape, k.beta)
            }
            "wendland" => {
                if k.smoothness.fract() != 0.0 || k.smoothness < 0.0 {
                    return Err(config_err(format!(
                        "kernel.smoothness must be an integer 0..=2 for wendland, got {}",
                        k.smoothness
                    )));
                }
                KernelSpec::wendland(dim, k.smoothness as u32, k.lengthscale, k.support_radius)
            }
            "sobolev_matern" => KernelSpec::sobolev_matern(dim, k.smoothness, k.lengthscale),
            other => return Err(config_err(format!("unknown kernel family {other:?}"))),
        };
        spec.and_then(|s| s.with_rate_constant(k.rate_constant))
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn centers_instance(&self) -> Result<CenterSet, CliError> {
        let domain = self.domain_instance()?;
        match &self.centers.csv {
            Some(path) => CenterSet::from_csv_path(Path::new(path), domain)
                .map_err(|e| config_err(e.to_string())),
            None => CenterSet::uniform_grid(&domain, self.centers.grid)
                .map_err(|e| config_err(e.to_string())),
        }
    }

    pub fn learning_config(&self) -> LearningConfig {
        let c = &self.critic;
        let excitation = match c.excitation.mode.as_str() {
            "none" => Excitation::None,
            "reset" => Excitation::Reset {
                period: c.excitation.period,
                seed: self.seed,
            },
            _ => Excitation::Probing {
                amplitudes: c.excitation.amplitudes.clone(),
                frequencies: c.excitation.frequencies.clone(),
            },
        };
        LearningConfig {
            learning_rate: c.a,
            dt: c.dt,
            horizon: c.horizon,
            deadzone: c.deadzone,
            normalize: c.normalize,
            excitation,
            w0: c
                .w0
                .as_ref()
                .map(|w| nalgebra::DVector::from_column_slice(w)),
            sample_every: c.sample_every,
        }
    }

    pub fn sweep_options(&self) -> SweepOptions {
        let target = match self.rates.target.as_str() {
            "manufactured" => SweepTarget::Manufactured {
                seed: self.seed,
                amplitude: self.rates.manufactured_amplitude,
            },
            _ => SweepTarget::Analytic,
        };
        SweepOptions {
            resolution: self.resolution,
            x0: self.critic.x0.clone(),
            target,
            deadzone_power_scale: self.rates.deadzone_power_scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str) -> Result<RunConfig, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        resolve(raw, Path::new("."))
    }

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let cfg = parse_str("").unwrap();
        assert_eq!(cfg.problem, "benchmark2d");
        assert_eq!(cfg.resolution, 101);
        assert_eq!(cfg.kernel.family, "sobolev_matern");
        assert_eq!(cfg.kernel.smoothness, 2.5);
        assert_eq!(cfg.centers.grid, 9);
        assert_eq!(cfg.critic.a, 50.0);
        assert_eq!(cfg.critic.dt, 1e-3);
        assert_eq!(cfg.critic.x0, vec![1.0, -1.0]);
        assert_eq!(cfg.critic.excitation.mode, "probing");
        assert_eq!(cfg.rates.grid_levels, vec![5, 7, 9, 13, 17]);
        assert_eq!(cfg.pe.window, 2.0);
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = parse_str("[kernal]\nfamily = \"gaussian\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kernal"), "{msg}");
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let err = parse_str("[critic]\na = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("critic.a"));
        let err = parse_str("[critic]\ndt = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("critic.dt"));
        let err = parse_str("resolution = 1\n").unwrap_err();
        assert!(err.to_string().contains("resolution"));
        let err = parse_str("[rates]\ngrid_levels = [5, 5]\n").unwrap_err();
        assert!(err.to_string().contains("strictly increasing"));
    }

    #[test]
    fn missing_centers_csv_fails_at_parse_time() {
        let err = parse_str("[centers]\ncsv = \"no_such_file.csv\"\n").unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse_str("problem = \"sweep1d\"\nseed = 9\n[critic]\nhorizon = 1.5\n").unwrap();
        let echo = cfg.echo_toml();
        let raw: RawConfig = toml::from_str(&echo).unwrap();
        let again = resolve(raw, Path::new(".")).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(echo, again.echo_toml());
    }

    #[test]
    fn kernel_instances_from_config() {
        let cfg = parse_str(
            "[kernel]\nfamily = \"wendland\"\nsmoothness = 1.0\nlengthscale = 0.5\nsupport_radius = 2.0\n",
        )
        .unwrap();
        let k = cfg.kernel_instance().unwrap();
        assert_eq!(format!("{}", k.family()), "wendland");
        let bad = parse_str("[kernel]\nfamily = \"metric\"\n").unwrap();
        assert!(bad.kernel_instance().is_err());
    }

    #[test]
    fn x0_dimension_checked() {
        let err = parse_str("[critic]\nx0 = [1.0]\n").unwrap_err();
        assert!(err.to_string().contains("x0"));
    }
}
