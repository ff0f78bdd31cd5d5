//! Normalized two-particle wavefunctions: the analytic Gaussian family,
//! cat states, and file-backed states.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{make_grid, ComplexField, Grid, GridSpec, PhysicsParams, RealField};

/// Relative amplitude the state may still carry on the domain edge before it
/// is considered truncated.
pub const BOUNDARY_DECAY_REL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    ProductGaussian { sigma1: f64, sigma2: f64 },
    CorrelatedGaussian { a: f64, b: f64 },
    PhaseGaussian { sigma: f64, lambda: f64 },
    GeneralGaussian { a: f64, b: f64, lambda: f64 },
    Cat { c: f64, sigma: f64 },
    File { path: PathBuf },
}

/// Closed-form description of a factory state, kept alongside the sampled
/// field so exact point evaluation (weak probe, refined oracles) stays
/// available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticState {
    /// psi ∝ exp(-(a1 x1^2 + a2 x2^2 + 2 b x1 x2)/2 + i lambda x1 x2)
    Quadratic { a1: f64, a2: f64, b: f64, lambda: f64 },
    /// psi ∝ g(x1-c) g(x2-c) + g(x1+c) g(x2+c) with g a Gaussian of width sigma
    Cat { c: f64, sigma: f64 },
}

impl AnalyticState {
    /// Unnormalized amplitude at a point.
    pub fn psi(&self, x1: f64, x2: f64) -> Complex64 {
        match *self {
            AnalyticState::Quadratic { a1, a2, b, lambda } => {
                let q = 0.5 * (a1 * x1 * x1 + a2 * x2 * x2 + 2.0 * b * x1 * x2);
                Complex64::from_polar((-q).exp(), lambda * x1 * x2)
            }
            AnalyticState::Cat { c, sigma } => {
                let g = |z: f64, c0: f64| (-(z - c0) * (z - c0) / (4.0 * sigma * sigma)).exp();
                Complex64::new(g(x1, c) * g(x2, c) + g(x1, -c) * g(x2, -c), 0.0)
            }
        }
    }

    /// Unnormalized density at a point.
    pub fn rho(&self, x1: f64, x2: f64) -> f64 {
        self.psi(x1, x2).norm_sqr()
    }

    /// Exact gradient (d/dx1, d/dx2) of the unnormalized amplitude.
    pub fn dpsi(&self, x1: f64, x2: f64) -> (Complex64, Complex64) {
        match *self {
            AnalyticState::Quadratic { a1, a2, b, lambda } => {
                let p = self.psi(x1, x2);
                let q1 = Complex64::new(-(a1 * x1 + b * x2), lambda * x2);
                let q2 = Complex64::new(-(a2 * x2 + b * x1), lambda * x1);
                (q1 * p, q2 * p)
            }
            AnalyticState::Cat { c, sigma } => {
                let g = |z: f64, c0: f64| (-(z - c0) * (z - c0) / (4.0 * sigma * sigma)).exp();
                let dg = |z: f64, c0: f64| -(z - c0) / (2.0 * sigma * sigma) * g(z, c0);
                let d1 = dg(x1, c) * g(x2, c) + dg(x1, -c) * g(x2, -c);
                let d2 = g(x1, c) * dg(x2, c) + g(x1, -c) * dg(x2, -c);
                (Complex64::new(d1, 0.0), Complex64::new(d2, 0.0))
            }
        }
    }

    /// Exact mixed second derivative d^2/dx1 dx2 of the unnormalized amplitude.
    pub fn d12psi(&self, x1: f64, x2: f64) -> Complex64 {
        match *self {
            AnalyticState::Quadratic { a1, a2, b, lambda } => {
                let p = self.psi(x1, x2);
                let q1 = Complex64::new(-(a1 * x1 + b * x2), lambda * x2);
                let q2 = Complex64::new(-(a2 * x2 + b * x1), lambda * x1);
                (Complex64::new(-b, lambda) + q1 * q2) * p
            }
            AnalyticState::Cat { c, sigma } => {
                let g = |z: f64, c0: f64| (-(z - c0) * (z - c0) / (4.0 * sigma * sigma)).exp();
                let dg = |z: f64, c0: f64| -(z - c0) / (2.0 * sigma * sigma) * g(z, c0);
                Complex64::new(dg(x1, c) * dg(x2, c) + dg(x1, -c) * dg(x2, -c), 0.0)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct WaveFunction {
    pub psi: ComplexField,
    pub rho: RealField,
    pub physics: PhysicsParams,
    pub boundary_decay_ok: bool,
    pub analytic: Option<AnalyticState>,
}

impl WaveFunction {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.psi.grid
    }

    /// Returns a copy with the phase multiplied by exp(i theta) globally.
    pub fn with_global_phase(&self, theta: f64) -> WaveFunction {
        let ph = Complex64::from_polar(1.0, theta);
        let mut out = self.clone();
        out.psi.values.mapv_inplace(|z| z * ph);
        out.analytic = None;
        out
    }

    /// Returns a copy boosted by exp(i k x1) (plane phase on particle 1).
    pub fn with_boost(&self, k: f64) -> WaveFunction {
        let mut out = self.clone();
        let g = self.psi.grid.clone();
        for ((i, _j), v) in out.psi.values.indexed_iter_mut() {
            *v *= Complex64::from_polar(1.0, k * g.x1[i]);
        }
        out.analytic = None;
        out
    }

    /// Swaps the two particles (transpose of the field).
    pub fn transposed(&self) -> Result<WaveFunction> {
        let spec = self.psi.grid.spec;
        let swapped = GridSpec {
            n1: spec.n2,
            n2: spec.n1,
            x1_min: spec.x2_min,
            x1_max: spec.x2_max,
            x2_min: spec.x1_min,
            x2_max: spec.x1_max,
        };
        let grid = make_grid(swapped)?;
        let psi = ComplexField {
            grid: grid.clone(),
            values: self.psi.values.t().to_owned(),
        };
        let physics = PhysicsParams {
            hbar: self.physics.hbar,
            m1: self.physics.m2,
            m2: self.physics.m1,
        };
        from_samples(psi, physics, None).map(|(wf, _)| wf)
    }
}

/// Normalizes a sampled amplitude into a WaveFunction. Returns the state and
/// whether a renormalization beyond 1e-6 was applied.
pub fn from_samples(
    mut psi: ComplexField,
    physics: PhysicsParams,
    analytic: Option<AnalyticState>,
) -> Result<(WaveFunction, bool)> {
    physics.validate()?;
    let norm2 = ComplexField {
        grid: psi.grid.clone(),
        values: psi.values.mapv(|z| Complex64::new(z.norm_sqr(), 0.0)),
    }
    .integrate()?
    .re;
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::Input(format!("state norm^2 is {norm2}")));
    }
    let renorm = (norm2.sqrt() - 1.0).abs() > 1e-6;
    // Leave already-normalized samples untouched so save/load round-trips
    // are bit-exact.
    if (norm2.sqrt() - 1.0).abs() > 1e-12 {
        let scale = 1.0 / norm2.sqrt();
        psi.values.mapv_inplace(|z| z * scale);
    }
    let rho = RealField {
        grid: psi.grid.clone(),
        values: psi.values.mapv(|z| z.norm_sqr()),
    };
    let boundary_decay_ok = boundary_decay_ok(&psi);
    Ok((
        WaveFunction {
            psi,
            rho,
            physics,
            boundary_decay_ok,
            analytic,
        },
        renorm,
    ))
}

fn boundary_decay_ok(psi: &ComplexField) -> bool {
    let (n1, n2) = psi.grid.shape();
    let sup = psi
        .values
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    let mut edge = 0.0f64;
    for j in 0..n2 {
        edge = edge.max(psi.values[[0, j]].norm());
        edge = edge.max(psi.values[[n1 - 1, j]].norm());
    }
    for i in 0..n1 {
        edge = edge.max(psi.values[[i, 0]].norm());
        edge = edge.max(psi.values[[i, n2 - 1]].norm());
    }
    edge <= BOUNDARY_DECAY_REL * sup
}

fn build_analytic(
    grid: &Arc<Grid>,
    physics: PhysicsParams,
    analytic: AnalyticState,
) -> Result<WaveFunction> {
    let psi = ComplexField::from_fn(grid, |x1, x2| analytic.psi(x1, x2));
    let (wf, _) = from_samples(psi, physics, Some(analytic))?;
    if !wf.boundary_decay_ok {
        return Err(Error::Config(
            "state does not decay at the domain boundary; enlarge the grid".into(),
        ));
    }
    Ok(wf)
}

pub fn product_gaussian(
    grid: &Arc<Grid>,
    physics: PhysicsParams,
    sigma1: f64,
    sigma2: f64,
) -> Result<WaveFunction> {
    if sigma1 <= 0.0 || sigma2 <= 0.0 {
        return Err(Error::Config("sigma must be positive".into()));
    }
    build_analytic(
        grid,
        physics,
        AnalyticState::Quadratic {
            a1: 1.0 / (2.0 * sigma1 * sigma1),
            a2: 1.0 / (2.0 * sigma2 * sigma2),
            b: 0.0,
            lambda: 0.0,
        },
    )
}

pub fn correlated_gaussian(
    grid: &Arc<Grid>,
    physics: PhysicsParams,
    a: f64,
    b: f64,
) -> Result<WaveFunction> {
    if !(a > b.abs()) {
        return Err(Error::Config(format!(
            "correlated Gaussian needs a > |b| for normalizability (a={a}, b={b})"
        )));
    }
    build_analytic(
        grid,
        physics,
        AnalyticState::Quadratic {
            a1: a,
            a2: a,
            b,
            lambda: 0.0,
        },
    )
}

pub fn phase_gaussian(
    grid: &Arc<Grid>,
    physics: PhysicsParams,
    sigma: f64,
    lambda: f64,
) -> Result<WaveFunction> {
    if sigma <= 0.0 {
        return Err(Error::Config("sigma must be positive".into()));
    }
    let a = 1.0 / (2.0 * sigma * sigma);
    build_analytic(
        grid,
        physics,
        AnalyticState::Quadratic {
            a1: a,
            a2: a,
            b: 0.0,
            lambda,
        },
    )
}

pub fn general_gaussian(
    grid: &Arc<Grid>,
    physics: PhysicsParams,
    a: f64,
    b: f64,
    lambda: f64,
) -> Result<WaveFunction> {
    if !(a > b.abs()) {
        return Err(Error::Config(format!(
            "general Gaussian needs a > |b| (a={a}, b={b})"
        )));
    }
    build_analytic(
        grid,
        physics,
        AnalyticState::Quadratic {
            a1: a,
            a2: a,
            b,
            lambda,
        },
    )
}

pub fn cat_state(grid: &Arc<Grid>, physics: PhysicsParams, c: f64, sigma: f64) -> Result<WaveFunction> {
    if c <= 0.0 || sigma <= 0.0 {
        return Err(Error::Config("cat state needs c > 0 and sigma > 0".into()));
    }
    build_analytic(grid, physics, AnalyticState::Cat { c, sigma })
}

/// Builds any StateSpec on the given grid.
pub fn build_state(
    spec: &StateSpec,
    grid: &Arc<Grid>,
    physics: PhysicsParams,
) -> Result<WaveFunction> {
    match spec {
        StateSpec::ProductGaussian { sigma1, sigma2 } => {
            product_gaussian(grid, physics, *sigma1, *sigma2)
        }
        StateSpec::CorrelatedGaussian { a, b } => correlated_gaussian(grid, physics, *a, *b),
        StateSpec::PhaseGaussian { sigma, lambda } => phase_gaussian(grid, physics, *sigma, *lambda),
        StateSpec::GeneralGaussian { a, b, lambda } => {
            general_gaussian(grid, physics, *a, *b, *lambda)
        }
        StateSpec::Cat { c, sigma } => cat_state(grid, physics, *c, *sigma),
        StateSpec::File { path } => load_wavefunction(path).map(|(wf, _)| wf),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FileHeader {
    n1: usize,
    n2: usize,
    x1_min: f64,
    x1_max: f64,
    x2_min: f64,
    x2_max: f64,
    hbar: f64,
    m1: f64,
    m2: f64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `<path>` as a CSV body ("i,j,re,im", row-major in i) and a JSON
/// header sidecar at `<path with .json extension>`.
pub fn save_wavefunction(wf: &WaveFunction, path: &Path) -> Result<()> {
    let spec = wf.grid().spec;
    let header = FileHeader {
        n1: spec.n1,
        n2: spec.n2,
        x1_min: spec.x1_min,
        x1_max: spec.x1_max,
        x2_min: spec.x2_min,
        x2_max: spec.x2_max,
        hbar: wf.physics.hbar,
        m1: wf.physics.m1,
        m2: wf.physics.m2,
    };
    std::fs::write(
        sidecar_path(path),
        serde_json::to_string_pretty(&header)?,
    )?;
    let mut body = String::with_capacity(spec.n1 * spec.n2 * 32);
    for i in 0..spec.n1 {
        for j in 0..spec.n2 {
            let z = wf.psi.values[[i, j]];
            // shortest round-trip float formatting keeps the file bit-exact
            writeln!(body, "{},{},{:?},{:?}", i, j, z.re, z.im).expect("string write");
        }
    }
    std::fs::write(path, body)?;
    Ok(())
}

/// Loads a wavefunction written by `save_wavefunction`. Returns the state and
/// whether a renormalization warning applies.
pub fn load_wavefunction(path: &Path) -> Result<(WaveFunction, bool)> {
    let sidecar = sidecar_path(path);
    let header_text = std::fs::read_to_string(&sidecar)
        .map_err(|e| Error::Input(format!("cannot read header {}: {e}", sidecar.display())))?;
    let header: FileHeader = serde_json::from_str(&header_text)
        .map_err(|e| Error::Input(format!("malformed header {}: {e}", sidecar.display())))?;
    let grid = make_grid(GridSpec {
        n1: header.n1,
        n2: header.n2,
        x1_min: header.x1_min,
        x1_max: header.x1_max,
        x2_min: header.x2_min,
        x2_max: header.x2_max,
    })?;
    let physics = PhysicsParams {
        hbar: header.hbar,
        m1: header.m1,
        m2: header.m2,
    };
    let body = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut psi = ComplexField::zeros(&grid);
    let mut seen = vec![false; header.n1 * header.n2];
    for (lineno, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Input(format!(
                "{}:{}: expected 4 comma-separated fields",
                path.display(),
                lineno + 1
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| {
                Error::Input(format!(
                    "{}:{}: bad {what} value {s:?}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        let i = parts[0].trim().parse::<usize>().map_err(|_| {
            Error::Input(format!("{}:{}: bad row index", path.display(), lineno + 1))
        })?;
        let j = parts[1].trim().parse::<usize>().map_err(|_| {
            Error::Input(format!("{}:{}: bad column index", path.display(), lineno + 1))
        })?;
        if i >= header.n1 || j >= header.n2 {
            return Err(Error::Input(format!(
                "{}:{}: index ({i}, {j}) outside {}x{} grid",
                path.display(),
                lineno + 1,
                header.n1,
                header.n2
            )));
        }
        let re = parse(parts[2], "re")?;
        let im = parse(parts[3], "im")?;
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Input(format!(
                "{}: non-finite amplitude at index ({i}, {j})",
                path.display()
            )));
        }
        psi.values[[i, j]] = Complex64::new(re, im);
        seen[i * header.n2 + j] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Input(format!(
            "{}: missing entry for index ({}, {})",
            path.display(),
            missing / header.n2,
            missing % header.n2
        )));
    }
    from_samples(psi, physics, None)
}
