//! Discretized two-particle configuration space: axes, quadrature,
//! differentiation and low-density masking.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayViewMut1, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Mode};

/// One spatial axis of the joint (x1, x2) grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAxis {
    X1,
    X2,
}

impl GridAxis {
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(GridAxis::X1),
            2 => Ok(GridAxis::X2),
            _ => Err(Error::Usage(format!("axis must be 1 or 2, got {i}"))),
        }
    }

    /// ndarray axis along which the lane runs.
    pub(crate) fn lane_axis(self) -> Axis {
        match self {
            GridAxis::X1 => Axis(0),
            GridAxis::X2 => Axis(1),
        }
    }

    pub fn other(self) -> Self {
        match self {
            GridAxis::X1 => GridAxis::X2,
            GridAxis::X2 => GridAxis::X1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
}

impl GridSpec {
    pub fn square(n: usize, min: f64, max: f64) -> Self {
        GridSpec {
            n1: n,
            n2: n,
            x1_min: min,
            x1_max: max,
            x2_min: min,
            x2_max: max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 < 16 || self.n2 < 16 {
            return Err(Error::Config(format!(
                "grid needs at least 16 points per axis, got {}x{}",
                self.n1, self.n2
            )));
        }
        for (lo, hi, name) in [
            (self.x1_min, self.x1_max, "x1"),
            (self.x2_min, self.x2_max, "x2"),
        ] {
            if !lo.is_finite() || !hi.is_finite() || hi <= lo {
                return Err(Error::Config(format!(
                    "invalid {name} bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::square(256, -8.0, 8.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    pub hbar: f64,
    pub m1: f64,
    pub m2: f64,
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        if self.hbar > 0.0 && self.m1 > 0.0 && self.m2 > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "hbar and masses must be strictly positive: {self:?}"
            )))
        }
    }

    pub fn mass(&self, axis: GridAxis) -> f64 {
        match axis {
            GridAxis::X1 => self.m1,
            GridAxis::X2 => self.m2,
        }
    }
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams {
            hbar: 1.0,
            m1: 1.0,
            m2: 1.0,
        }
    }
}

/// Grid with cached axes and spacings.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub h1: f64,
    pub h2: f64,
}

pub fn make_grid(spec: GridSpec) -> Result<Arc<Grid>> {
    spec.validate()?;
    let h1 = (spec.x1_max - spec.x1_min) / (spec.n1 - 1) as f64;
    let h2 = (spec.x2_max - spec.x2_min) / (spec.n2 - 1) as f64;
    let x1 = (0..spec.n1).map(|i| spec.x1_min + i as f64 * h1).collect();
    let x2 = (0..spec.n2).map(|j| spec.x2_min + j as f64 * h2).collect();
    Ok(Arc::new(Grid {
        spec,
        x1,
        x2,
        h1,
        h2,
    }))
}

impl Grid {
    pub fn spacing(&self, axis: GridAxis) -> f64 {
        match axis {
            GridAxis::X1 => self.h1,
            GridAxis::X2 => self.h2,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.spec.n1, self.spec.n2)
    }

    /// Trapezoidal quadrature weight of point (i, j).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let w1 = if i == 0 || i == self.spec.n1 - 1 {
            0.5
        } else {
            1.0
        };
        let w2 = if j == 0 || j == self.spec.n2 - 1 {
            0.5
        } else {
            1.0
        };
        w1 * w2 * self.h1 * self.h2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffScheme {
    Fd4,
    Spectral,
}

impl Default for DiffScheme {
    fn default() -> Self {
        DiffScheme::Fd4
    }
}

/// Scalar element of a grid field.
pub trait Element:
    Copy
    + Default
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + std::ops::AddAssign
{
    fn is_finite_el(&self) -> bool;
    fn zero() -> Self {
        Self::default()
    }
}

impl Element for f64 {
    fn is_finite_el(&self) -> bool {
        self.is_finite()
    }
}

impl Element for Complex64 {
    fn is_finite_el(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Scalar field over a grid.
#[derive(Debug, Clone)]
pub struct Field<T: Element> {
    pub grid: Arc<Grid>,
    pub values: Array2<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Element> Field<T> {
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> T + Sync) -> Self {
        let (n1, n2) = grid.shape();
        let g = grid.clone();
        let values = exec::build(n1, n2, Mode::Auto, |i, j| f(g.x1[i], g.x2[j]));
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        let (n1, n2) = grid.shape();
        Field {
            grid: grid.clone(),
            values: Array2::default((n1, n2)),
        }
    }

    /// Trapezoidal integral over the full domain.
    pub fn integrate(&self) -> Result<T> {
        let (n1, n2) = self.grid.shape();
        let mut acc = T::zero();
        for i in 0..n1 {
            for j in 0..n2 {
                let v = self.values[[i, j]];
                if !v.is_finite_el() {
                    return Err(Error::Numerics(format!(
                        "non-finite field value at ({i}, {j})"
                    )));
                }
                acc += v * self.grid.weight(i, j);
            }
        }
        Ok(acc)
    }

    /// Integral with masked points contributing zero.
    pub fn integrate_masked(&self, mask: &Mask) -> Result<T> {
        let (n1, n2) = self.grid.shape();
        let mut acc = T::zero();
        for i in 0..n1 {
            for j in 0..n2 {
                if !mask.keep[[i, j]] {
                    continue;
                }
                let v = self.values[[i, j]];
                if !v.is_finite_el() {
                    return Err(Error::Numerics(format!(
                        "non-finite unmasked field value at ({i}, {j})"
                    )));
                }
                acc += v * self.grid.weight(i, j);
            }
        }
        Ok(acc)
    }

    /// Partial derivative along a grid axis with a 4th-order central stencil
    /// (one-sided 4th-order at the four boundary points).
    pub fn fd4_derivative(&self, axis: GridAxis) -> Self {
        let h = self.grid.spacing(axis);
        let values = exec::map_lanes(&self.values, axis.lane_axis(), Mode::Auto, |s, d| {
            fd4_lane(s, d, h)
        });
        Field {
            grid: self.grid.clone(),
            values,
        }
    }
}

impl ComplexField {
    /// DFT-based derivative assuming periodic extension over n*h.
    pub fn spectral_derivative(&self, axis: GridAxis) -> Self {
        let h = self.grid.spacing(axis);
        let n = match axis {
            GridAxis::X1 => self.grid.spec.n1,
            GridAxis::X2 => self.grid.spec.n2,
        };
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let ik = spectral_wavenumbers(n, h);
        let values = exec::map_lanes(&self.values, axis.lane_axis(), Mode::Auto, |s, mut d| {
            let mut buf: Vec<Complex64> = s.to_vec();
            fft.process(&mut buf);
            for (b, k) in buf.iter_mut().zip(ik.iter()) {
                *b *= Complex64::new(0.0, *k);
            }
            ifft.process(&mut buf);
            let scale = 1.0 / n as f64;
            for (o, b) in d.iter_mut().zip(buf.iter()) {
                *o = b * scale;
            }
        });
        Field {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn derivative(&self, axis: GridAxis, scheme: DiffScheme) -> Self {
        match scheme {
            DiffScheme::Fd4 => self.fd4_derivative(axis),
            DiffScheme::Spectral => self.spectral_derivative(axis),
        }
    }

    pub fn re(&self) -> RealField {
        Field {
            grid: self.grid.clone(),
            values: self.values.mapv(|z| z.re),
        }
    }

    pub fn im(&self) -> RealField {
        Field {
            grid: self.grid.clone(),
            values: self.values.mapv(|z| z.im),
        }
    }
}

impl RealField {
    pub fn spectral_derivative(&self, axis: GridAxis) -> Self {
        let c = ComplexField {
            grid: self.grid.clone(),
            values: self.values.mapv(|v| Complex64::new(v, 0.0)),
        };
        c.spectral_derivative(axis).re()
    }

    pub fn derivative(&self, axis: GridAxis, scheme: DiffScheme) -> Self {
        match scheme {
            DiffScheme::Fd4 => self.fd4_derivative(axis),
            DiffScheme::Spectral => self.spectral_derivative(axis),
        }
    }
}

fn spectral_wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * h);
    (0..n)
        .map(|m| {
            if 2 * m < n {
                m as f64 * dk
            } else if 2 * m == n {
                0.0 // Nyquist mode carries no usable derivative information
            } else {
                (m as f64 - n as f64) * dk
            }
        })
        .collect()
}

fn fd4_lane<T: Element>(f: ArrayView1<T>, mut d: ArrayViewMut1<T>, h: f64) {
    let n = f.len();
    debug_assert!(n >= 5);
    let c = 1.0 / (12.0 * h);
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - f[i + 2] + (f[i + 1] - f[i - 1]) * 8.0) * c;
    }
    d[0] = (f[0] * -25.0 + f[1] * 48.0 + f[2] * -36.0 + f[3] * 16.0 + f[4] * -3.0) * c;
    d[1] = (f[0] * -3.0 + f[1] * -10.0 + f[2] * 18.0 + f[3] * -6.0 + f[4]) * c;
    d[n - 2] = (f[n - 1] * 3.0 + f[n - 2] * 10.0 + f[n - 3] * -18.0 + f[n - 4] * 6.0
        + f[n - 5] * -1.0)
        * c;
    d[n - 1] = (f[n - 1] * 25.0 + f[n - 2] * -48.0 + f[n - 3] * 36.0 + f[n - 4] * -16.0
        + f[n - 5] * 3.0)
        * c;
}

/// Points where the density is large enough for quotient fields to be
/// numerically trustworthy.
#[derive(Debug, Clone)]
pub struct Mask {
    pub keep: Array2<bool>,
    pub kept: usize,
    /// Fraction of grid points unmasked.
    pub fraction: f64,
    /// Fraction of probability mass on unmasked points.
    pub mass: f64,
}

/// Unmasks a point iff rho >= eps_rel * max(rho). A state whose mask drops
/// more than half of the probability mass is rejected as degenerate.
pub fn build_mask(rho: &RealField, eps_rel: f64) -> Result<Mask> {
    if !(eps_rel > 0.0 && eps_rel <= 1e-2) {
        return Err(Error::Config(format!(
            "eps_rel must be in (0, 1e-2], got {eps_rel}"
        )));
    }
    let max = rho.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Input(format!("density has invalid maximum {max}")));
    }
    let thr = eps_rel * max;
    let keep = rho.values.mapv(|r| r >= thr);
    let kept = keep.iter().filter(|&&k| k).count();
    if kept == 0 {
        return Err(Error::Invariant("all grid points masked".into()));
    }
    let (n1, n2) = rho.grid.shape();
    let mut total = 0.0;
    let mut kept_mass = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            let w = rho.grid.weight(i, j) * rho.values[[i, j]];
            total += w;
            if keep[[i, j]] {
                kept_mass += w;
            }
        }
    }
    let mass = kept_mass / total;
    if mass < 0.5 {
        return Err(Error::Invariant(format!(
            "mask keeps only {:.1}% of the probability mass; state is degenerate on this grid",
            mass * 100.0
        )));
    }
    Ok(Mask {
        fraction: kept as f64 / (n1 * n2) as f64,
        keep,
        kept,
        mass,
    })
}

impl Mask {
    /// Zeroes masked points of a field in place.
    pub fn apply<T: Element>(&self, field: &mut Field<T>) {
        ndarray::Zip::from(&mut field.values)
            .and(&self.keep)
            .for_each(|v, &k| {
                if !k {
                    *v = T::zero();
                }
            });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spacing_and_axes() {
        // n=16 is the smallest legal grid; check the arithmetic on a
        // slightly larger one where the spacing is round.
        let g = make_grid(GridSpec::square(17, 0.0, 16.0)).unwrap();
        assert_relative_eq!(g.h1, 1.0);
        assert_relative_eq!(g.x1[3], 3.0);
        let g = make_grid(GridSpec::square(256, -8.0, 8.0)).unwrap();
        assert_relative_eq!(g.h1, 16.0 / 255.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(make_grid(GridSpec::square(8, 0.0, 1.0)).is_err());
        let mut s = GridSpec::square(32, 0.0, 1.0);
        s.x2_min = 2.0;
        s.x2_max = 1.0;
        assert!(make_grid(s).is_err());
        let mut s = GridSpec::square(32, 0.0, 1.0);
        s.x1_max = f64::INFINITY;
        assert!(make_grid(s).is_err());
    }

    #[test]
    fn integrate_constant_and_gaussian() {
        let g = make_grid(GridSpec::square(64, 0.0, 1.0)).unwrap();
        let one = RealField::from_fn(&g, |_, _| 1.0);
        assert_relative_eq!(one.integrate().unwrap(), 1.0, epsilon = 1e-12);

        let g = make_grid(GridSpec::default()).unwrap();
        let rho = RealField::from_fn(&g, |x1, x2| {
            (-(x1 * x1 + x2 * x2) / 2.0).exp() / (2.0 * std::f64::consts::PI)
        });
        assert_relative_eq!(rho.integrate().unwrap(), 1.0, epsilon = 1e-10);
        // odd integrand on a symmetric domain
        let odd = RealField::from_fn(&g, |x1, x2| {
            x1 * (-(x1 * x1 + x2 * x2) / 2.0).exp()
        });
        assert!(odd.integrate().unwrap().abs() < 1e-10);
    }

    #[test]
    fn integrate_rejects_nan() {
        let g = make_grid(GridSpec::square(16, 0.0, 1.0)).unwrap();
        let mut f = RealField::from_fn(&g, |_, _| 1.0);
        f.values[[3, 7]] = f64::NAN;
        assert!(f.integrate().is_err());
    }

    #[test]
    fn fd4_exact_on_quadratic() {
        let g = make_grid(GridSpec::square(32, -2.0, 2.0)).unwrap();
        let f = RealField::from_fn(&g, |x1, _| x1 * x1);
        let d = f.fd4_derivative(GridAxis::X1);
        for i in 0..32 {
            for j in 0..32 {
                assert_relative_eq!(d.values[[i, j]], 2.0 * g.x1[i], epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn spectral_exact_on_sine() {
        // periodic grid: point spacing chosen so that x_n = -pi is identified
        // with pi, i.e. the lane length times h spans one full period
        let n = 64;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let spec = GridSpec::square(n, -std::f64::consts::PI, std::f64::consts::PI - h);
        let g = make_grid(spec).unwrap();
        let f = ComplexField::from_fn(&g, |x1, _| Complex64::new(x1.sin(), 0.0));
        let d = f.spectral_derivative(GridAxis::X1);
        for i in 0..n {
            assert_relative_eq!(d.values[[i, 3]].re, g.x1[i].cos(), epsilon = 1e-12);
            assert!(d.values[[i, 3]].im.abs() < 1e-12);
        }
    }

    #[test]
    fn fd4_richardson_order() {
        // halving h should shrink the max FD error ~16x on a smooth field
        let err = |n: usize| {
            let g = make_grid(GridSpec::square(n, -8.0, 8.0)).unwrap();
            let f = RealField::from_fn(&g, |x1, _| (-x1 * x1 / 2.0).exp());
            let d = f.fd4_derivative(GridAxis::X1);
            let mut worst = 0.0f64;
            for i in 0..n {
                let exact = -g.x1[i] * (-g.x1[i] * g.x1[i] / 2.0).exp();
                let e = (d.values[[i, 0]] - exact).abs();
                worst = worst.max(e);
            }
            worst
        };
        let e1 = err(129);
        let e2 = err(257);
        let ratio = e1 / e2;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "convergence ratio {ratio} outside [12, 20]"
        );
    }

    #[test]
    fn derivative_linearity() {
        let g = make_grid(GridSpec::square(32, -4.0, 4.0)).unwrap();
        let f = RealField::from_fn(&g, |x1, x2| (x1 * 0.7).sin() * (-x2 * x2).exp());
        let h = RealField::from_fn(&g, |x1, x2| x1 * x2 + x2 * x2);
        let combo = Field {
            grid: g.clone(),
            values: &f.values * 2.5 + &h.values * -1.25,
        };
        let lhs = combo.fd4_derivative(GridAxis::X2);
        let df = f.fd4_derivative(GridAxis::X2);
        let dh = h.fd4_derivative(GridAxis::X2);
        for ((i, j), v) in lhs.values.indexed_iter() {
            let rhs = 2.5 * df.values[[i, j]] - 1.25 * dh.values[[i, j]];
            assert_relative_eq!(*v, rhs, epsilon = 1e-10, max_relative = 1e-12);
        }
    }

    #[test]
    fn integration_by_parts_discrete() {
        let g = make_grid(GridSpec::default()).unwrap();
        let f = RealField::from_fn(&g, |x1, x2| (-(x1 * x1 + x2 * x2) / 2.0).exp());
        let gg = RealField::from_fn(&g, |x1, x2| x1 * (-(x1 * x1 + x2 * x2) / 3.0).exp());
        let df = f.fd4_derivative(GridAxis::X1);
        let dg = gg.fd4_derivative(GridAxis::X1);
        let lhs = Field {
            grid: g.clone(),
            values: &df.values * &gg.values,
        }
        .integrate()
        .unwrap();
        let rhs = -Field {
            grid: g.clone(),
            values: &f.values * &dg.values,
        }
        .integrate()
        .unwrap();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-8);
    }

    #[test]
    fn mask_gaussian_keeps_mass() {
        let g = make_grid(GridSpec::default()).unwrap();
        let rho = RealField::from_fn(&g, |x1, x2| {
            (-(x1 * x1 + x2 * x2) / 2.0).exp() / (2.0 * std::f64::consts::PI)
        });
        let m = build_mask(&rho, 1e-8).unwrap();
        assert!(m.mass > 0.99, "unmasked mass {}", m.mass);
        assert!(m.fraction < 1.0);
    }

    #[test]
    fn mask_uniform_keeps_everything() {
        let g = make_grid(GridSpec::square(32, 0.0, 1.0)).unwrap();
        let rho = RealField::from_fn(&g, |_, _| 1.0);
        let m = build_mask(&rho, 1e-8).unwrap();
        assert_eq!(m.kept, 32 * 32);
    }

    #[test]
    fn mask_rejects_bad_eps() {
        let g = make_grid(GridSpec::square(32, 0.0, 1.0)).unwrap();
        let rho = RealField::from_fn(&g, |_, _| 1.0);
        assert!(build_mask(&rho, 0.5).is_err());
        assert!(build_mask(&rho, 0.0).is_err());
    }
}
