//! Run configuration, report assembly and the file outputs behind the CLI.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{self, Class, EntanglementIndicators, IdentitySuite, Verdict, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::grid::{make_grid, DiffScheme, GridAxis, GridSpec, PhysicsParams, RealField};
use crate::kinematics::{self, Numerics};
use crate::state::{build_state, StateSpec, WaveFunction};
use crate::weak;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Position,
    Momentum,
    Both,
}

impl Default for Representation {
    fn default() -> Self {
        Representation::Position
    }
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_eps_rel() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnalysisOptions {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_eps_rel")]
    pub eps_rel: f64,
    #[serde(default)]
    pub scheme: DiffScheme,
    #[serde(default)]
    pub representation: Representation,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            tau: default_tau(),
            eps_rel: default_eps_rel(),
            scheme: DiffScheme::default(),
            representation: Representation::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Name of the numeric field of the state spec to vary.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub physics: PhysicsParams,
    pub state: StateSpec,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("malformed config {}: {e}", path.display())))?;
    cfg.grid.validate()?;
    cfg.physics.validate()?;
    if !(cfg.analysis.tau > 0.0) {
        return Err(Error::Config(format!(
            "tau must be positive, got {}",
            cfg.analysis.tau
        )));
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn numerics(&self) -> Numerics {
        Numerics {
            scheme: self.analysis.scheme,
            eps_rel: self.analysis.eps_rel,
        }
    }

    pub fn build(&self) -> Result<WaveFunction> {
        let grid = make_grid(self.grid)?;
        build_state(&self.state, &grid, self.physics)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub n1: usize,
    pub n2: usize,
    pub scheme: DiffScheme,
    pub eps_rel: f64,
    pub mask_fraction: f64,
    pub mask_mass: f64,
    pub renormalized: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentSummary {
    pub p1: kinematics::MomentumExpectation,
    pub p2: kinematics::MomentumExpectation,
    pub sigma2_p1: f64,
    pub sigma2_p2: f64,
    pub corr_p1p2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugateSummary {
    pub mean_re: f64,
    pub mean_im: f64,
    pub sup_re: f64,
    pub sup_im: f64,
    pub u_scale: f64,
    pub parseval_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub provenance: Provenance,
    pub indicators: EntanglementIndicators,
    pub verdict: Verdict,
    pub moments: MomentSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conjugate: Option<ConjugateSummary>,
    pub identities: IdentitySuite,
}

/// Tolerance relaxation used on grids coarser than the default.
pub fn relax_for(grid: &GridSpec) -> f64 {
    if grid.n1.min(grid.n2) < 256 {
        20.0
    } else {
        1.0
    }
}

pub fn analyze(cfg: &RunConfig) -> Result<Report> {
    let wf = cfg.build()?;
    let num = cfg.numerics();
    let ind = detector::indicators(&wf, &num)?;
    let verdict = detector::classify(&ind, cfg.analysis.tau);
    let identities = detector::identity_suite(&wf, &num, relax_for(&cfg.grid))?;
    let mask = crate::grid::build_mask(&wf.rho, num.eps_rel)?;
    let p1 = kinematics::momentum_expectation_unchecked(&wf, &num, GridAxis::X1)?;
    let p2 = kinematics::momentum_expectation_unchecked(&wf, &num, GridAxis::X2)?;
    let d1 = kinematics::momentum_dispersion_unchecked(&wf, &num, GridAxis::X1)?;
    let d2 = kinematics::momentum_dispersion_unchecked(&wf, &num, GridAxis::X2)?;
    let corr = kinematics::momentum_correlation_unchecked(&wf, &num)?;
    let conjugate = match cfg.analysis.representation {
        Representation::Position => None,
        Representation::Momentum | Representation::Both => {
            let c = weak::conjugate_pair_weak_correlation(&wf, &num)?;
            Some(ConjugateSummary {
                mean_re: c.stats.mean.re,
                mean_im: c.stats.mean.im,
                sup_re: c.stats.sup_re,
                sup_im: c.stats.sup_im,
                u_scale: c.stats.u_scale,
                parseval_error: c.parseval_error,
            })
        }
    };
    Ok(Report {
        config: cfg.clone(),
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION"),
            n1: cfg.grid.n1,
            n2: cfg.grid.n2,
            scheme: cfg.analysis.scheme,
            eps_rel: cfg.analysis.eps_rel,
            mask_fraction: mask.fraction,
            mask_mass: mask.mass,
            renormalized: false,
        },
        indicators: ind,
        verdict,
        moments: MomentSummary {
            p1,
            p2,
            sigma2_p1: d1.sigma2_p,
            sigma2_p2: d2.sigma2_p,
            corr_p1p2: corr.direct,
        },
        conjugate,
        identities,
    })
}

fn write_field_csv(path: &Path, field: &RealField, mask: &crate::grid::Mask) -> Result<()> {
    use std::fmt::Write as _;
    let grid = &field.grid;
    let (n1, n2) = grid.shape();
    let mut body = String::with_capacity(n1 * n2 * 32);
    body.push_str("i,j,x1,x2,value\n");
    for i in 0..n1 {
        for j in 0..n2 {
            if mask.keep[[i, j]] {
                writeln!(
                    body,
                    "{},{},{:?},{:?},{:?}",
                    i, j, grid.x1[i], grid.x2[j], field.values[[i, j]]
                )
                .expect("string write");
            } else {
                // masked points keep their coordinates but carry no value
                writeln!(body, "{},{},{:?},{:?},", i, j, grid.x1[i], grid.x2[j])
                    .expect("string write");
            }
        }
    }
    std::fs::write(path, body)?;
    Ok(())
}

/// Writes the velocity, quantum-potential and weak-correlation fields of the
/// configured state as CSV files plus a JSON sidecar describing the run.
pub fn write_fields(cfg: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let wf = cfg.build()?;
    let num = cfg.numerics();
    let vf = kinematics::velocity_fields(&wf, &num)?;
    let vq = kinematics::quantum_potential_unchecked(&wf, &num)?;
    let cw = weak::weak_correlation_unchecked(&wf, &num)?;
    let mask = &vf.mask;
    write_field_csv(&dir.join("u1.csv"), &vf.u1, mask)?;
    write_field_csv(&dir.join("u2.csv"), &vf.u2, mask)?;
    write_field_csv(&dir.join("v1.csv"), &vf.v1, mask)?;
    write_field_csv(&dir.join("v2.csv"), &vf.v2, mask)?;
    write_field_csv(&dir.join("vq.csv"), &vq.vq_total, mask)?;
    write_field_csv(&dir.join("re_cw.csv"), &cw.cw.re(), mask)?;
    write_field_csv(&dir.join("im_cw.csv"), &cw.cw.im(), mask)?;
    #[derive(Serialize)]
    struct Sidecar<'a> {
        version: &'static str,
        config: &'a RunConfig,
        mask_fraction: f64,
        files: [&'static str; 7],
    }
    let sidecar = Sidecar {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        mask_fraction: mask.fraction,
        files: [
            "u1.csv", "u2.csv", "v1.csv", "v2.csv", "vq.csv", "re_cw.csv", "im_cw.csv",
        ],
    };
    std::fs::write(
        dir.join("fields.json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

/// The five-state verification battery run on the configured grid/physics.
pub const VERIFY_BATTERY: [(&str, StateSpec); 5] = [
    (
        "product_gaussian",
        StateSpec::ProductGaussian {
            sigma1: 1.0,
            sigma2: 1.0,
        },
    ),
    (
        "correlated_gaussian",
        StateSpec::CorrelatedGaussian { a: 0.5, b: 0.2 },
    ),
    (
        "phase_gaussian",
        StateSpec::PhaseGaussian {
            sigma: 1.0,
            lambda: 0.3,
        },
    ),
    (
        "general_gaussian",
        StateSpec::GeneralGaussian {
            a: 0.5,
            b: 0.2,
            lambda: 0.3,
        },
    ),
    ("cat", StateSpec::Cat { c: 2.0, sigma: 0.5 }),
];

#[derive(Debug, Clone, Serialize)]
pub struct VerifyLine {
    pub state: &'static str,
    pub class: Class,
    pub identities_passed: usize,
    pub identities_total: usize,
    pub worst: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub lines: Vec<VerifyLine>,
    pub all_pass: bool,
}

pub fn run_verify(cfg: &RunConfig) -> Result<VerifyOutcome> {
    let grid = make_grid(cfg.grid)?;
    let num = cfg.numerics();
    let relax = relax_for(&cfg.grid);
    let mut lines = Vec::new();
    for (name, spec) in VERIFY_BATTERY {
        let wf = build_state(&spec, &grid, cfg.physics)?;
        let suite = detector::identity_suite(&wf, &num, relax)?;
        let ind = detector::indicators(&wf, &num)?;
        let verdict = detector::classify(&ind, cfg.analysis.tau);
        let passed = suite.entries.iter().filter(|e| e.pass).count();
        let worst = suite
            .entries
            .iter()
            .max_by(|a, b| {
                (a.residual / a.tolerance)
                    .total_cmp(&(b.residual / b.tolerance))
            })
            .map(|e| format!("{} ({:.3e})", e.name, e.residual));
        lines.push(VerifyLine {
            state: name,
            class: verdict.class,
            identities_passed: passed,
            identities_total: suite.entries.len(),
            worst,
            pass: suite.all_pass,
        });
    }
    let all_pass = lines.iter().all(|l| l.pass);
    Ok(VerifyOutcome { lines, all_pass })
}

/// Runs the sweep described in the config and renders one CSV row per value.
pub fn run_sweep(cfg: &RunConfig) -> Result<String> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Usage("config has no sweep section".into()))?;
    if sweep.values.is_empty() {
        return Err(Error::Usage("sweep has no values".into()));
    }
    let grid = make_grid(cfg.grid)?;
    let num = cfg.numerics();
    let mut out = String::from("parameter,value,i_a_mean,i_a_sup,i_p_mean,i_p_sup,class\n");
    for &value in &sweep.values {
        let spec = override_parameter(&cfg.state, &sweep.parameter, value)?;
        let wf = build_state(&spec, &grid, cfg.physics)?;
        let ind = detector::indicators(&wf, &num)?;
        let verdict = detector::classify(&ind, cfg.analysis.tau);
        use std::fmt::Write as _;
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?},{}",
            sweep.parameter, value, ind.i_a_mean, ind.i_a_sup, ind.i_p_mean, ind.i_p_sup,
            verdict.class
        )
        .expect("string write");
    }
    Ok(out)
}

/// Returns a copy of the state spec with one named numeric parameter
/// replaced, addressed by its JSON field name.
fn override_parameter(spec: &StateSpec, parameter: &str, value: f64) -> Result<StateSpec> {
    let mut json = serde_json::to_value(spec)?;
    let obj = json
        .as_object_mut()
        .expect("state spec serializes to an object");
    if !obj.contains_key(parameter) {
        return Err(Error::Usage(format!(
            "state has no sweepable parameter {parameter:?}; available: {}",
            obj.keys()
                .filter(|k| *k != "kind")
                .cloned()
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    obj.insert(parameter.to_string(), serde_json::Value::from(value));
    let spec: StateSpec = serde_json::from_value(json)?;
    Ok(spec)
}
