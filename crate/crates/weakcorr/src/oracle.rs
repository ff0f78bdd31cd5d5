//! Independent truth routes used to pin down every number the tests and the
//! verify command rely on.
//!
//! Nothing here shares machinery with the main pipeline: closed-form Gaussian
//! moment algebra, plain-loop trapezoid quadrature over exact analytic
//! fields, and a naive direct-sum DFT for momentum amplitudes.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridAxis, PhysicsParams};
use crate::state::{AnalyticState, StateSpec};

/// Closed-form expectation values for the quadratic (Gaussian) family
/// psi ∝ exp(-(a1 x1^2 + a2 x2^2 + 2 b x1 x2)/2 + i lambda x1 x2).
#[derive(Debug, Clone, Copy)]
pub struct GaussianClosedForms {
    pub mean_u1u2: f64,
    pub mean_u1v2: f64,
    pub mean_u2v1: f64,
    pub mean_u1_sq: f64,
    pub mean_u2_sq: f64,
    pub mean_v1_sq: f64,
    pub mean_v2_sq: f64,
    pub sigma2_p1: f64,
    pub sigma2_p2: f64,
    /// Quantum momentum correlation <p1 p2> - <p1><p2>.
    pub corr_p1p2: f64,
    /// The weak correlation is spatially constant for this family.
    pub re_cw: f64,
    pub im_cw: f64,
    /// Total quantum potential at the origin.
    pub vq_origin: f64,
    pub mean_x1u1: f64,
    pub mean_x2u2: f64,
}

fn quadratic_params(spec: &StateSpec) -> Option<(f64, f64, f64, f64)> {
    match *spec {
        StateSpec::ProductGaussian { sigma1, sigma2 } => Some((
            1.0 / (2.0 * sigma1 * sigma1),
            1.0 / (2.0 * sigma2 * sigma2),
            0.0,
            0.0,
        )),
        StateSpec::CorrelatedGaussian { a, b } => Some((a, a, b, 0.0)),
        StateSpec::PhaseGaussian { sigma, lambda } => {
            let a = 1.0 / (2.0 * sigma * sigma);
            Some((a, a, 0.0, lambda))
        }
        StateSpec::GeneralGaussian { a, b, lambda } => Some((a, a, b, lambda)),
        StateSpec::Cat { .. } | StateSpec::File { .. } => None,
    }
}

/// Closed-form truth for Gaussian-family specs; None for other states.
///
/// Derivation: rho ∝ exp(-x^T M x) with M = [[a1, b], [b, a2]] has covariance
/// Sigma = M^{-1}/2, and the fields are linear,
/// u_i = -(hbar/m_i)(a_i x_i + b x_j), v_1 = (hbar/m_1) lambda x_2 (and 1<->2),
/// so every moment below is a two-line contraction against Sigma.
pub fn gaussian_truth(spec: &StateSpec, ph: &PhysicsParams) -> Option<GaussianClosedForms> {
    let (a1, a2, b, lambda) = quadratic_params(spec)?;
    let det = a1 * a2 - b * b;
    let h2 = ph.hbar * ph.hbar;
    let (m1, m2) = (ph.m1, ph.m2);
    let mean_u1u2 = h2 * b / (2.0 * m1 * m2);
    let mean_u1v2 = -h2 * lambda / (2.0 * m1 * m2);
    let mean_u2v1 = mean_u1v2;
    let mean_u1_sq = h2 * a1 / (2.0 * m1 * m1);
    let mean_u2_sq = h2 * a2 / (2.0 * m2 * m2);
    // <x2^2> = a1/(2 det), <x1^2> = a2/(2 det), <x1 x2> = -b/(2 det)
    let mean_v1_sq = h2 * lambda * lambda / (m1 * m1) * a1 / (2.0 * det);
    let mean_v2_sq = h2 * lambda * lambda / (m2 * m2) * a2 / (2.0 * det);
    let sigma2_p1 = m1 * m1 * mean_v1_sq + m1 * m1 * mean_u1_sq;
    let sigma2_p2 = m2 * m2 * mean_v2_sq + m2 * m2 * mean_u2_sq;
    let corr_p1p2 = -h2 * lambda * lambda * b / (2.0 * det) + h2 * b / 2.0;
    Some(GaussianClosedForms {
        mean_u1u2,
        mean_u1v2,
        mean_u2v1,
        mean_u1_sq,
        mean_u2_sq,
        mean_v1_sq,
        mean_v2_sq,
        sigma2_p1,
        sigma2_p2,
        corr_p1p2,
        re_cw: h2 * b,
        im_cw: -h2 * lambda,
        vq_origin: h2 * a1 / (2.0 * m1) + h2 * a2 / (2.0 * m2),
        mean_x1u1: -ph.hbar / (2.0 * m1),
        mean_x2u2: -ph.hbar / (2.0 * m2),
    })
}

/// Exact velocity fields and weak correlation of an analytic state at a point.
#[derive(Debug, Clone, Copy)]
pub struct ExactFields {
    pub u1: f64,
    pub u2: f64,
    pub v1: f64,
    pub v2: f64,
    /// C^w = -i hbar d1 wp2 with wp2 = -i hbar (d2 psi)/psi.
    pub cw: Complex64,
}

pub fn exact_fields(st: &AnalyticState, ph: &PhysicsParams, x1: f64, x2: f64) -> ExactFields {
    let psi = st.psi(x1, x2);
    let (d1, d2) = st.dpsi(x1, x2);
    let q1 = d1 / psi;
    let q2 = d2 / psi;
    // wp_i = -i hbar q_i = m_i (v_i - i u_i)
    let wp1 = Complex64::new(0.0, -ph.hbar) * q1;
    let wp2 = Complex64::new(0.0, -ph.hbar) * q2;
    // d1 wp2 = -i hbar (d12 psi / psi - q1 q2)
    let d1wp2 = Complex64::new(0.0, -ph.hbar) * (st.d12psi(x1, x2) / psi - q1 * q2);
    ExactFields {
        u1: -wp1.im / ph.m1,
        u2: -wp2.im / ph.m2,
        v1: wp1.re / ph.m1,
        v2: wp2.re / ph.m2,
        cw: Complex64::new(0.0, -ph.hbar) * d1wp2,
    }
}

/// Integration window for the brute-force quadratures. Trapezoid sums over a
/// window where the integrand decays to machine zero converge superalgebraically,
/// so this is effectively exact for the states at hand.
pub const QUAD_HALF_WIDTH: f64 = 10.0;
pub const QUAD_POINTS: usize = 601;

/// rho-weighted mean of f(x1, x2, fields) under the normalized density.
pub fn quad_mean(
    st: &AnalyticState,
    ph: &PhysicsParams,
    f: impl Fn(f64, f64, &ExactFields) -> f64,
) -> f64 {
    let n = QUAD_POINTS;
    let l = QUAD_HALF_WIDTH;
    let h = 2.0 * l / (n - 1) as f64;
    let mut norm = 0.0;
    let mut acc = 0.0;
    for i in 0..n {
        let x1 = -l + i as f64 * h;
        for j in 0..n {
            let x2 = -l + j as f64 * h;
            let rho = st.rho(x1, x2);
            if rho < 1e-280 {
                continue;
            }
            norm += rho;
            acc += rho * f(x1, x2, &exact_fields(st, ph, x1, x2));
        }
    }
    acc / norm
}

/// <p_i> via hbar Im \int psi* d_i psi with exact derivatives.
pub fn quad_mean_p(st: &AnalyticState, ph: &PhysicsParams, axis: GridAxis) -> f64 {
    let n = QUAD_POINTS;
    let l = QUAD_HALF_WIDTH;
    let h = 2.0 * l / (n - 1) as f64;
    let mut norm = 0.0;
    let mut acc = 0.0;
    for i in 0..n {
        let x1 = -l + i as f64 * h;
        for j in 0..n {
            let x2 = -l + j as f64 * h;
            let psi = st.psi(x1, x2);
            norm += psi.norm_sqr();
            let (d1, d2) = st.dpsi(x1, x2);
            let d = match axis {
                GridAxis::X1 => d1,
                GridAxis::X2 => d2,
            };
            acc += (psi.conj() * d).im;
        }
    }
    ph.hbar * acc / norm
}

/// Momentum dispersion via the exact-gradient identity
/// <p_i^2> = hbar^2 \int |d_i psi|^2 (valid for decaying states).
pub fn quad_sigma2_p(st: &AnalyticState, ph: &PhysicsParams, axis: GridAxis) -> f64 {
    let n = QUAD_POINTS;
    let l = QUAD_HALF_WIDTH;
    let h = 2.0 * l / (n - 1) as f64;
    let mut norm = 0.0;
    let mut acc = 0.0;
    for i in 0..n {
        let x1 = -l + i as f64 * h;
        for j in 0..n {
            let x2 = -l + j as f64 * h;
            let psi = st.psi(x1, x2);
            norm += psi.norm_sqr();
            let (d1, d2) = st.dpsi(x1, x2);
            let d = match axis {
                GridAxis::X1 => d1,
                GridAxis::X2 => d2,
            };
            acc += d.norm_sqr();
        }
    }
    let p2 = ph.hbar * ph.hbar * acc / norm;
    let p = quad_mean_p(st, ph, axis);
    p2 - p * p
}

/// Naive direct-sum DFT of a sampled amplitude into the momentum
/// representation, on the standard FFT momentum grid
/// p_k = (2 pi hbar / (n h)) (k - n/2).
///
/// O(n^3) on purpose: this is the independent check for the FFT route.
pub fn momentum_dft(
    values: &Array2<Complex64>,
    grid: &Grid,
    hbar: f64,
) -> Result<(Array2<Complex64>, Vec<f64>, Vec<f64>)> {
    let (n1, n2) = grid.shape();
    if n1 != values.nrows() || n2 != values.ncols() {
        return Err(Error::Input("sample shape does not match grid".into()));
    }
    let p_axis = |n: usize, h: f64| -> Vec<f64> {
        let dp = 2.0 * std::f64::consts::PI * hbar / (n as f64 * h);
        (0..n).map(|k| dp * (k as f64 - (n / 2) as f64)).collect()
    };
    let p1 = p_axis(n1, grid.h1);
    let p2 = p_axis(n2, grid.h2);
    let scale1 = grid.h1 / (2.0 * std::f64::consts::PI * hbar).sqrt();
    let scale2 = grid.h2 / (2.0 * std::f64::consts::PI * hbar).sqrt();
    // transform axis 1 then axis 2
    let mut mid = Array2::<Complex64>::default((n1, n2));
    for k in 0..n1 {
        for j in 0..n2 {
            let mut acc = Complex64::default();
            for i in 0..n1 {
                let phase = -p1[k] * grid.x1[i] / hbar;
                acc += values[[i, j]] * Complex64::from_polar(1.0, phase);
            }
            mid[[k, j]] = acc * scale1;
        }
    }
    let mut out = Array2::<Complex64>::default((n1, n2));
    for k in 0..n1 {
        for l in 0..n2 {
            let mut acc = Complex64::default();
            for j in 0..n2 {
                let phase = -p2[l] * grid.x2[j] / hbar;
                acc += mid[[k, j]] * Complex64::from_polar(1.0, phase);
            }
            out[[k, l]] = acc * scale2;
        }
    }
    Ok((out, p1, p2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ph() -> PhysicsParams {
        PhysicsParams::default()
    }

    #[test]
    fn closed_forms_for_battery_states() {
        // correlated Gaussian a=0.5, b=0.2
        let t = gaussian_truth(&StateSpec::CorrelatedGaussian { a: 0.5, b: 0.2 }, &ph()).unwrap();
        assert_relative_eq!(t.mean_u1u2, 0.1, epsilon = 1e-15);
        assert_relative_eq!(t.re_cw, 0.2, epsilon = 1e-15);
        assert_relative_eq!(t.im_cw, 0.0, epsilon = 1e-15);
        assert_relative_eq!(t.corr_p1p2, 0.1, epsilon = 1e-15);
        assert_relative_eq!(t.sigma2_p1, 0.25, epsilon = 1e-15);
        assert_relative_eq!(t.mean_x1u1, -0.5, epsilon = 1e-15);

        // phase Gaussian sigma=1, lambda=0.3
        let t = gaussian_truth(
            &StateSpec::PhaseGaussian {
                sigma: 1.0,
                lambda: 0.3,
            },
            &ph(),
        )
        .unwrap();
        assert_relative_eq!(t.mean_u1v2, -0.15, epsilon = 1e-15);
        assert_relative_eq!(t.im_cw, -0.3, epsilon = 1e-15);
        assert_relative_eq!(t.re_cw, 0.0, epsilon = 1e-15);
        // sigma2_p = lambda^2 a/(2 a^2) + a/2 with a = 0.5
        assert_relative_eq!(t.sigma2_p1, 0.09 + 0.25, epsilon = 1e-15);

        // general Gaussian a=0.5, b=0.2, lambda=0.3
        let t = gaussian_truth(
            &StateSpec::GeneralGaussian {
                a: 0.5,
                b: 0.2,
                lambda: 0.3,
            },
            &ph(),
        )
        .unwrap();
        assert_relative_eq!(t.re_cw, 0.2, epsilon = 1e-15);
        assert_relative_eq!(t.im_cw, -0.3, epsilon = 1e-15);
        assert_relative_eq!(t.vq_origin, 0.5, epsilon = 1e-15);
        // det = 0.25 - 0.04 = 0.21
        assert_relative_eq!(t.sigma2_p1, 0.09 * 0.5 / 0.42 + 0.25, epsilon = 1e-14);
        assert_relative_eq!(t.corr_p1p2, 0.1 - 0.09 * 0.2 / 0.42, epsilon = 1e-14);

        // product state: everything entangling vanishes
        let t = gaussian_truth(
            &StateSpec::ProductGaussian {
                sigma1: 1.0,
                sigma2: 1.0,
            },
            &ph(),
        )
        .unwrap();
        assert_relative_eq!(t.mean_u1u2, 0.0, epsilon = 1e-15);
        assert_relative_eq!(t.re_cw, 0.0, epsilon = 1e-15);
        assert_relative_eq!(t.im_cw, 0.0, epsilon = 1e-15);
        assert_relative_eq!(t.sigma2_p1, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_agrees_with_closed_forms() {
        let spec = StateSpec::GeneralGaussian {
            a: 0.5,
            b: 0.2,
            lambda: 0.3,
        };
        let t = gaussian_truth(&spec, &ph()).unwrap();
        let st = AnalyticState::Quadratic {
            a1: 0.5,
            a2: 0.5,
            b: 0.2,
            lambda: 0.3,
        };
        let uu = quad_mean(&st, &ph(), |_, _, f| f.u1 * f.u2);
        assert_relative_eq!(uu, t.mean_u1u2, epsilon = 1e-12);
        let uv = quad_mean(&st, &ph(), |_, _, f| f.u1 * f.v2);
        assert_relative_eq!(uv, t.mean_u1v2, epsilon = 1e-12);
        let u1sq = quad_mean(&st, &ph(), |_, _, f| f.u1 * f.u1);
        assert_relative_eq!(u1sq, t.mean_u1_sq, epsilon = 1e-12);
        let re_cw = quad_mean(&st, &ph(), |_, _, f| f.cw.re);
        assert_relative_eq!(re_cw, t.re_cw, epsilon = 1e-12);
        let im_cw = quad_mean(&st, &ph(), |_, _, f| f.cw.im);
        assert_relative_eq!(im_cw, t.im_cw, epsilon = 1e-12);
        let s2 = quad_sigma2_p(&st, &ph(), GridAxis::X1);
        assert_relative_eq!(s2, t.sigma2_p1, epsilon = 1e-12);
        let x1u1 = quad_mean(&st, &ph(), |x1, _, f| x1 * f.u1);
        assert_relative_eq!(x1u1, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn cat_state_truth_is_frozen() {
        // Values pinned from the quadrature oracle; the main pipeline is
        // tested against these elsewhere.
        let st = AnalyticState::Cat { c: 2.0, sigma: 0.5 };
        let uu = quad_mean(&st, &ph(), |_, _, f| f.u1 * f.u2);
        let re_cw_mean = quad_mean(&st, &ph(), |_, _, f| f.cw.re);
        let im_sup = quad_mean(&st, &ph(), |_, _, f| f.cw.im.abs());
        // The blobs are near-product locally, so the mean correlation is
        // exponentially small -- only the pointwise weak correlation sees
        // the entanglement of this state.
        assert_relative_eq!(uu, CAT_MEAN_U1U2, epsilon = 1e-10, max_relative = 1e-6);
        // <Re C^w> = 2 m1 m2 <u1 u2> exactly (integration by parts)
        assert_relative_eq!(re_cw_mean, 2.0 * uu, epsilon = 1e-12);
        // real state: Im C^w vanishes identically
        assert!(im_sup < 1e-12);
        // at the origin the cross-blob interference makes C^w large:
        // Re C^w(0,0) = -2 hbar^2 (c/(2 sigma^2))^2 / 2 = -16 here
        let f0 = exact_fields(&st, &ph(), 0.0, 0.0);
        assert_relative_eq!(f0.cw.re, -16.0, epsilon = 1e-12);
        assert_relative_eq!(f0.cw.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cat_dispersion_is_frozen() {
        let st = AnalyticState::Cat { c: 2.0, sigma: 0.5 };
        let s2 = quad_sigma2_p(&st, &ph(), GridAxis::X1);
        assert_relative_eq!(s2, CAT_SIGMA2_P1, epsilon = 1e-10);
        // symmetric state
        assert_relative_eq!(
            quad_sigma2_p(&st, &ph(), GridAxis::X2),
            s2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn naive_dft_satisfies_parseval() {
        use crate::grid::{make_grid, GridSpec};
        let grid = make_grid(GridSpec::square(64, -8.0, 8.0)).unwrap();
        let st = AnalyticState::Quadratic {
            a1: 0.5,
            a2: 0.5,
            b: 0.2,
            lambda: 0.0,
        };
        let mut values = Array2::<Complex64>::default((64, 64));
        let mut norm = 0.0;
        for ((i, j), v) in values.indexed_iter_mut() {
            *v = st.psi(grid.x1[i], grid.x2[j]);
            norm += v.norm_sqr();
        }
        let scale = (norm * grid.h1 * grid.h2).sqrt();
        values.mapv_inplace(|z| z / scale);
        let (phi, p1, p2) = momentum_dft(&values, &grid, 1.0).unwrap();
        let dp1 = p1[1] - p1[0];
        let dp2 = p2[1] - p2[0];
        let pnorm: f64 = phi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dp1 * dp2;
        assert_relative_eq!(pnorm, 1.0, epsilon = 1e-9);
    }
}

/// Frozen cat-state (c=2, sigma=0.5) truths from the quadrature oracle.
pub const CAT_MEAN_U1U2: f64 = -1.800562592888172e-6;
pub const CAT_SIGMA2_P1: f64 = 0.9999981994373975;
