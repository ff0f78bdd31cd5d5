//! Momentum weak values and the weak correlation function, in position and
//! momentum representation.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    build_mask, make_grid, ComplexField, DiffScheme, GridAxis, GridSpec, Mask, RealField,
};
use crate::kinematics::{mean_masked, raw_fields, weighted_sup_c, weighted_sup_r, Numerics};
use crate::state::{from_samples, WaveFunction};

/// Weak momentum fields wp_i = -i hbar (d_i psi)/psi, masked.
#[derive(Debug, Clone)]
pub struct WeakFields {
    pub wp1: ComplexField,
    pub wp2: ComplexField,
    pub mask: Mask,
    /// Complex rho-weighted means; Re is <p_i>, Im is -m_i <u_i> (~ 0).
    pub mean_wp1: Complex64,
    pub mean_wp2: Complex64,
}

pub fn weak_momentum(wf: &WaveFunction, num: &Numerics) -> Result<WeakFields> {
    let raw = raw_fields(wf, num)?;
    let grid = wf.grid().clone();
    let mean = |a: &Array2<Complex64>| {
        Complex64::new(
            mean_masked(wf, &raw.mask, |i, j| a[[i, j]].re),
            mean_masked(wf, &raw.mask, |i, j| a[[i, j]].im),
        )
    };
    let mean_wp1 = mean(&raw.wp1);
    let mean_wp2 = mean(&raw.wp2);
    let mut wp1 = ComplexField {
        grid: grid.clone(),
        values: raw.wp1.clone(),
    };
    let mut wp2 = ComplexField {
        grid,
        values: raw.wp2.clone(),
    };
    raw.mask.apply(&mut wp1);
    raw.mask.apply(&mut wp2);
    Ok(WeakFields {
        wp1,
        wp2,
        mask: raw.mask,
        mean_wp1,
        mean_wp2,
    })
}

/// Weak value of the momentum product, (p1 p2)_w = -hbar^2 (d1 d2 psi)/psi.
#[derive(Debug, Clone)]
pub struct WeakProduct {
    pub field: ComplexField,
    /// rho-weighted mean; equals <p1 p2> up to quadrature error.
    pub mean: Complex64,
    /// Operator route Re \int psi* (-hbar^2 d1 d2 psi).
    pub operator: f64,
    pub residual: f64,
}

pub(crate) fn weak_momentum_product_unchecked(
    wf: &WaveFunction,
    num: &Numerics,
) -> Result<WeakProduct> {
    let mask = build_mask(&wf.rho, num.eps_rel)?;
    let d2 = wf.psi.derivative(GridAxis::X2, num.scheme);
    let d12 = d2.derivative(GridAxis::X1, num.scheme);
    let h2 = wf.physics.hbar * wf.physics.hbar;
    let grid = wf.grid().clone();
    let (n1, n2) = grid.shape();
    let mut op = Complex64::default();
    let mut values = Array2::<Complex64>::default((n1, n2));
    for i in 0..n1 {
        for j in 0..n2 {
            let p = wf.psi.values[[i, j]];
            op += p.conj() * d12.values[[i, j]] * (-h2) * grid.weight(i, j);
            if mask.keep[[i, j]] && p.norm_sqr() > 0.0 {
                values[[i, j]] = -h2 * d12.values[[i, j]] / p;
            }
        }
    }
    let mean = Complex64::new(
        mean_masked(wf, &mask, |i, j| values[[i, j]].re),
        mean_masked(wf, &mask, |i, j| values[[i, j]].im),
    );
    let residual = (mean.re - op.re).abs() / (op.re.abs() + h2);
    Ok(WeakProduct {
        field: ComplexField { grid, values },
        mean,
        operator: op.re,
        residual,
    })
}

pub fn weak_momentum_product(wf: &WaveFunction, num: &Numerics) -> Result<WeakProduct> {
    let r = weak_momentum_product_unchecked(wf, num)?;
    if r.residual > 1e-6 {
        return Err(Error::Numerics(format!(
            "weak product mean {} disagrees with operator route {} (residual {:.3e})",
            r.mean.re, r.operator, r.residual
        )));
    }
    Ok(r)
}

/// The weak correlation function and its summary statistics.
#[derive(Debug, Clone)]
pub struct WeakCorrelation {
    /// Route A field (gradient of the weak momentum), masked.
    pub cw: ComplexField,
    pub mean: Complex64,
    pub sup_re: f64,
    pub sup_im: f64,
    /// rho-weighted standard deviations of Re/Im over unmasked points.
    pub std_re: f64,
    pub std_im: f64,
    /// Dimensional normalization m1 m2 u~1 u~2 used by the indicators.
    pub u_scale: f64,
    /// Amplitude-weighted sup residual between the gradient route and the
    /// mixed-second-derivative route.
    pub route_residual: f64,
    /// Same between d1 wp2 and d2 wp1.
    pub exchange_residual: f64,
}

/// Shared core: computes the weak correlation c * d1 wp2 with
/// wp_i = c (d_i psi)/psi. In position representation c = -i hbar; in
/// momentum representation the conjugate operators give c = +i hbar.
pub(crate) fn weak_correlation_core(
    psi: &ComplexField,
    rho: &RealField,
    mask: &Mask,
    c: Complex64,
    scheme: DiffScheme,
) -> WeakCorrelation {
    let grid = psi.grid.clone();
    let d1 = psi.derivative(GridAxis::X1, scheme);
    let d2 = psi.derivative(GridAxis::X2, scheme);
    let d12 = d2.derivative(GridAxis::X1, scheme);
    let quot = |d: &ComplexField| {
        let mut out = Array2::<Complex64>::default(d.values.raw_dim());
        ndarray::Zip::from(&mut out)
            .and(&d.values)
            .and(&psi.values)
            .for_each(|o, dv, pv| {
                if pv.norm_sqr() > 0.0 {
                    *o = c * dv / pv;
                }
            });
        out
    };
    let wp1 = quot(&d1);
    let wp2 = quot(&d2);
    // route A: FD gradient of the quotient field (always the local stencil)
    let fd = |a: &Array2<Complex64>, axis: GridAxis| {
        ComplexField {
            grid: grid.clone(),
            values: a.clone(),
        }
        .fd4_derivative(axis)
        .values
    };
    let a = fd(&wp2, GridAxis::X1).mapv(|z| c * z);
    let exch = fd(&wp1, GridAxis::X2).mapv(|z| c * z);
    // route B: c^2 [(d1 d2 psi)/psi - (d1 psi)(d2 psi)/psi^2]
    let c2 = c * c;
    let mut b = Array2::<Complex64>::default(a.raw_dim());
    ndarray::Zip::from(&mut b)
        .and(&d12.values)
        .and(&d1.values)
        .and(&d2.values)
        .and(&psi.values)
        .for_each(|o, m12, v1, v2, pv| {
            if pv.norm_sqr() > 0.0 {
                *o = c2 * (m12 / pv - v1 * v2 / (pv * pv));
            }
        });

    // rho-weighted statistics over unmasked points
    let wmean = |f: &dyn Fn(usize, usize) -> f64| -> f64 {
        let (n1, n2) = grid.shape();
        let mut acc = 0.0;
        let mut w_tot = 0.0;
        for i in 0..n1 {
            for j in 0..n2 {
                if mask.keep[[i, j]] {
                    let w = grid.weight(i, j) * rho.values[[i, j]];
                    acc += w * f(i, j);
                    w_tot += w;
                }
            }
        }
        acc / w_tot
    };
    let mean = Complex64::new(
        wmean(&|i, j| a[[i, j]].re),
        wmean(&|i, j| a[[i, j]].im),
    );
    let var_re = wmean(&|i, j| (a[[i, j]].re - mean.re).powi(2));
    let var_im = wmean(&|i, j| (a[[i, j]].im - mean.im).powi(2));
    let mut sup_re = 0.0f64;
    let mut sup_im = 0.0f64;
    ndarray::Zip::indexed(&mask.keep).for_each(|(i, j), &k| {
        if k {
            sup_re = sup_re.max(a[[i, j]].re.abs());
            sup_im = sup_im.max(a[[i, j]].im.abs());
        }
    });
    // |Im wp_i| = m_i |u_i| in position representation; the same construction
    // gives the natural scale in any representation
    let im1_sq = wmean(&|i, j| wp1[[i, j]].im.powi(2));
    let im2_sq = wmean(&|i, j| wp2[[i, j]].im.powi(2));
    let u_scale = (im1_sq * im2_sq).sqrt();

    let (sup_ab, sup_b) = weighted_sup_c(&a, &b, rho, mask);
    let route_residual = sup_ab / (sup_b + u_scale);
    let (sup_ax, sup_x) = weighted_sup_c(&a, &exch, rho, mask);
    let exchange_residual = sup_ax / (sup_x + u_scale);

    let mut cw = ComplexField {
        grid: grid.clone(),
        values: a,
    };
    mask.apply(&mut cw);
    WeakCorrelation {
        cw,
        mean,
        sup_re,
        sup_im,
        std_re: var_re.max(0.0).sqrt(),
        std_im: var_im.max(0.0).sqrt(),
        u_scale,
        route_residual,
        exchange_residual,
    }
}

/// Like [`weak_correlation`] but without the route-agreement contract, for
/// convergence studies on deliberately coarse grids.
pub fn weak_correlation_unchecked(
    wf: &WaveFunction,
    num: &Numerics,
) -> Result<WeakCorrelation> {
    let mask = build_mask(&wf.rho, num.eps_rel)?;
    let c = Complex64::new(0.0, -wf.physics.hbar);
    Ok(weak_correlation_core(
        &wf.psi, &wf.rho, &mask, c, num.scheme,
    ))
}

pub fn weak_correlation(wf: &WaveFunction, num: &Numerics) -> Result<WeakCorrelation> {
    let r = weak_correlation_unchecked(wf, num)?;
    if r.route_residual > 1e-5 || r.exchange_residual > 1e-5 {
        return Err(Error::Numerics(format!(
            "weak correlation routes disagree (route {:.3e}, exchange {:.3e})",
            r.route_residual, r.exchange_residual
        )));
    }
    Ok(r)
}

/// Closure relating the quantum momentum correlation to weak-value
/// covariances: C_q = C_{Re,Re} - C_{Im,Im} + Re <C^w>.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrelationDecomposition {
    pub corr_q: f64,
    pub c_re_re: f64,
    pub c_im_im: f64,
    pub re_mean_cw: f64,
    pub residual: f64,
}

/// Like [`correlation_decomposition`] but without the closure contract, for
/// residual studies on coarse grids.
pub fn correlation_decomposition_unchecked(
    wf: &WaveFunction,
    num: &Numerics,
) -> Result<CorrelationDecomposition> {
    let raw = raw_fields(wf, num)?;
    let corr_q = crate::kinematics::momentum_correlation_from_raw(wf, num, &raw).direct;
    let cov = |a: &Array2<Complex64>, b: &Array2<Complex64>, re: bool| {
        let part = |z: &Complex64| if re { z.re } else { z.im };
        let ma = mean_masked(wf, &raw.mask, |i, j| part(&a[[i, j]]));
        let mb = mean_masked(wf, &raw.mask, |i, j| part(&b[[i, j]]));
        let mab = mean_masked(wf, &raw.mask, |i, j| part(&a[[i, j]]) * part(&b[[i, j]]));
        mab - ma * mb
    };
    let c_re_re = cov(&raw.wp1, &raw.wp2, true);
    let c_im_im = cov(&raw.wp1, &raw.wp2, false);
    let cwr = weak_correlation_unchecked(wf, num)?;
    let re_mean_cw = cwr.mean.re;
    let closed = c_re_re - c_im_im + re_mean_cw;
    let h2 = wf.physics.hbar * wf.physics.hbar;
    Ok(CorrelationDecomposition {
        corr_q,
        c_re_re,
        c_im_im,
        re_mean_cw,
        residual: (corr_q - closed).abs() / (corr_q.abs() + h2),
    })
}

pub fn correlation_decomposition(
    wf: &WaveFunction,
    num: &Numerics,
) -> Result<CorrelationDecomposition> {
    let r = correlation_decomposition_unchecked(wf, num)?;
    if r.residual > 1e-6 {
        return Err(Error::Numerics(format!(
            "weak-value closure fails: C_q {} vs {} + {} + {} (residual {:.3e})",
            r.corr_q, r.c_re_re, -r.c_im_im, r.re_mean_cw, r.residual
        )));
    }
    Ok(r)
}

/// Pointwise check that the real part of the weak kinetic energy equals the
/// classical kinetic term plus the quantum potential.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeakKinetic {
    pub residual1: f64,
    pub residual2: f64,
}

pub(crate) fn weak_kinetic_energy_unchecked(
    wf: &WaveFunction,
    num: &Numerics,
) -> Result<WeakKinetic> {
    let raw = raw_fields(wf, num)?;
    let ph = &wf.physics;
    let grid = wf.grid().clone();
    let resid = |axis: GridAxis, m: f64| {
        let d1 = match axis {
            GridAxis::X1 => &raw.dpsi1,
            GridAxis::X2 => &raw.dpsi2,
        };
        let d2 = d1.derivative(axis, num.scheme);
        let mut lhs = Array2::<f64>::default(d2.values.raw_dim());
        ndarray::Zip::from(&mut lhs)
            .and(&d2.values)
            .and(&wf.psi.values)
            .for_each(|o, dd, pv| {
                if pv.norm_sqr() > 0.0 {
                    *o = (-ph.hbar * ph.hbar / (2.0 * m) * dd / pv).re;
                }
            });
        let u = RealField {
            grid: grid.clone(),
            values: raw.u(axis, m),
        };
        let v = raw.v(axis, m);
        let du = u.fd4_derivative(axis);
        let mut rhs = Array2::<f64>::default(lhs.raw_dim());
        ndarray::Zip::indexed(&mut rhs).for_each(|(i, j), o| {
            let uu = u.values[[i, j]];
            let vv = v[[i, j]];
            *o = 0.5 * m * vv * vv - 0.5 * (m * uu * uu + ph.hbar * du.values[[i, j]]);
        });
        let mean_u2 = mean_masked(wf, &raw.mask, |i, j| u.values[[i, j]].powi(2));
        let (sup_diff, sup_b) = weighted_sup_r(&lhs, &rhs, &wf.rho, &raw.mask);
        sup_diff / (sup_b + m * mean_u2)
    };
    Ok(WeakKinetic {
        residual1: resid(GridAxis::X1, ph.m1),
        residual2: resid(GridAxis::X2, ph.m2),
    })
}

pub fn weak_kinetic_energy(wf: &WaveFunction, num: &Numerics) -> Result<WeakKinetic> {
    let r = weak_kinetic_energy_unchecked(wf, num)?;
    if r.residual1 > 1e-5 || r.residual2 > 1e-5 {
        return Err(Error::Numerics(format!(
            "weak kinetic energy identity fails (residuals {:.3e}, {:.3e})",
            r.residual1, r.residual2
        )));
    }
    Ok(r)
}

/// Half-width of the central window over which the weak probe is checked.
pub const PROBE_WINDOW: f64 = 2.0;

/// Post-selected weak probe: the density ratio after the exact shift
/// exp(-i alpha p_i) must match 1 - 2 alpha m_i u_i to first order in alpha.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeakProbe {
    pub alpha: f64,
    pub sup_residual: f64,
    pub tolerance: f64,
    pub points: usize,
}

pub(crate) fn weak_probe_unchecked(
    wf: &WaveFunction,
    num: &Numerics,
    axis: GridAxis,
    alpha: f64,
) -> Result<WeakProbe> {
    if !(alpha > 0.0 && alpha <= 1e-2) {
        return Err(Error::Usage(format!(
            "probe strength alpha must be in (0, 1e-2], got {alpha}"
        )));
    }
    let raw = raw_fields(wf, num)?;
    let ph = &wf.physics;
    let m = ph.mass(axis);
    let shift = alpha * ph.hbar;
    let grid = wf.grid().clone();
    let u = raw.u(axis, m);
    let (n1, n2) = grid.shape();
    let mut sup = 0.0f64;
    let mut kappa = 0.0f64;
    let mut points = 0usize;
    for i in 0..n1 {
        for j in 0..n2 {
            let (x1, x2) = (grid.x1[i], grid.x2[j]);
            if x1.abs() > PROBE_WINDOW || x2.abs() > PROBE_WINDOW || !raw.mask.keep[[i, j]] {
                continue;
            }
            points += 1;
            let rho_here = wf.rho.values[[i, j]];
            let rho_shifted = match &wf.analytic {
                Some(st) => {
                    // normalization cancels in the ratio
                    let scale = rho_here / st.rho(x1, x2);
                    match axis {
                        GridAxis::X1 => st.rho(x1 - shift, x2) * scale,
                        GridAxis::X2 => st.rho(x1, x2 - shift) * scale,
                    }
                }
                None => interpolate_shifted(&wf.rho, axis, i, j, shift),
            };
            let ratio = rho_shifted / rho_here;
            let predicted = 1.0 - 2.0 * alpha * m * u[[i, j]];
            sup = sup.max((ratio - predicted).abs());
            kappa = kappa.max(2.0 * m * u[[i, j]].abs() / ph.hbar);
        }
    }
    if points == 0 {
        return Err(Error::Invariant(
            "no unmasked grid points inside the probe window".into(),
        ));
    }
    let tolerance = 20.0 * (alpha * ph.hbar * (kappa + 1.0)).powi(2) + 1e-10;
    Ok(WeakProbe {
        alpha,
        sup_residual: sup,
        tolerance,
        points,
    })
}

/// Evaluates rho at a point shifted off the grid along one axis by 5-point
/// Lagrange interpolation of the samples.
fn interpolate_shifted(rho: &RealField, axis: GridAxis, i: usize, j: usize, shift: f64) -> f64 {
    let grid = &rho.grid;
    let (n, idx, xs): (usize, usize, &Vec<f64>) = match axis {
        GridAxis::X1 => (grid.spec.n1, i, &grid.x1),
        GridAxis::X2 => (grid.spec.n2, j, &grid.x2),
    };
    let t = xs[idx] - shift;
    let base = idx.saturating_sub(2).min(n - 5);
    let mut acc = 0.0;
    for k in 0..5 {
        let xk = xs[base + k];
        let mut l = 1.0;
        for m in 0..5 {
            if m != k {
                l *= (t - xs[base + m]) / (xk - xs[base + m]);
            }
        }
        let val = match axis {
            GridAxis::X1 => rho.values[[base + k, j]],
            GridAxis::X2 => rho.values[[i, base + k]],
        };
        acc += l * val;
    }
    acc
}

pub fn weak_probe(
    wf: &WaveFunction,
    num: &Numerics,
    axis: GridAxis,
    alpha: f64,
) -> Result<WeakProbe> {
    let r = weak_probe_unchecked(wf, num, axis, alpha)?;
    if r.sup_residual > r.tolerance {
        return Err(Error::Numerics(format!(
            "weak probe mismatch: sup residual {:.3e} exceeds {:.3e} at alpha {}",
            r.sup_residual, r.tolerance, r.alpha
        )));
    }
    Ok(r)
}

/// The state transformed to momentum representation on the FFT grid
/// p_k = (2 pi hbar/(n h)) (k - n/2).
#[derive(Debug, Clone)]
pub struct MomentumRepresentation {
    pub phi: ComplexField,
    pub parseval_error: f64,
}

pub fn momentum_representation(wf: &WaveFunction) -> Result<MomentumRepresentation> {
    use rustfft::FftPlanner;
    let grid = wf.grid().clone();
    let (n1, n2) = grid.shape();
    let hbar = wf.physics.hbar;
    let tau = 2.0 * std::f64::consts::PI;
    let p_axis = |n: usize, h: f64| -> Vec<f64> {
        let dp = tau * hbar / (n as f64 * h);
        (0..n).map(|k| dp * (k as f64 - (n / 2) as f64)).collect()
    };
    let p1 = p_axis(n1, grid.h1);
    let p2 = p_axis(n2, grid.h2);

    let mut planner = FftPlanner::<f64>::new();
    let mut values = wf.psi.values.clone();
    // axis 1 then axis 2: phi_k = scale * e^{-i p_k x_min/hbar} FFT[psi_j (-1)^j]_k
    for (axis, n, h, x_min, p) in [
        (GridAxis::X1, n1, grid.h1, grid.spec.x1_min, &p1),
        (GridAxis::X2, n2, grid.h2, grid.spec.x2_min, &p2),
    ] {
        let fft = planner.plan_fft_forward(n);
        let scale = h / (tau * hbar).sqrt();
        let out = crate::exec::map_lanes(
            &values,
            axis.lane_axis(),
            crate::exec::Mode::Auto,
            |s, mut d| {
                let mut buf: Vec<Complex64> = s
                    .iter()
                    .enumerate()
                    .map(|(j, z)| if j % 2 == 0 { *z } else { -*z })
                    .collect();
                fft.process(&mut buf);
                for ((o, b), pk) in d.iter_mut().zip(buf.iter()).zip(p.iter()) {
                    *o = b * scale * Complex64::from_polar(1.0, -pk * x_min / hbar);
                }
            },
        );
        values = out;
    }

    let dp1 = p1[1] - p1[0];
    let dp2 = p2[1] - p2[0];
    // plain Riemann sums: the DFT preserves these exactly
    let pos_norm: f64 = wf.psi.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.h1 * grid.h2;
    let mom_norm: f64 = values.iter().map(|z| z.norm_sqr()).sum::<f64>() * dp1 * dp2;
    let parseval_error = (pos_norm - mom_norm).abs();
    if parseval_error > 1e-12 {
        return Err(Error::Numerics(format!(
            "Parseval violated by momentum transform: |{pos_norm} - {mom_norm}| = {parseval_error:.3e}"
        )));
    }
    let p_grid = make_grid(GridSpec {
        n1,
        n2,
        x1_min: p1[0],
        x1_max: p1[n1 - 1],
        x2_min: p2[0],
        x2_max: p2[n2 - 1],
    })?;
    Ok(MomentumRepresentation {
        phi: ComplexField {
            grid: p_grid,
            values,
        },
        parseval_error,
    })
}

/// Weak correlation of the conjugate pair (x1, x2) evaluated in momentum
/// representation, where the position operators act as +i hbar d/dp.
#[derive(Debug, Clone)]
pub struct ConjugateWeakCorrelation {
    pub stats: WeakCorrelation,
    pub parseval_error: f64,
}

pub fn conjugate_pair_weak_correlation(
    wf: &WaveFunction,
    num: &Numerics,
) -> Result<ConjugateWeakCorrelation> {
    let mrep = momentum_representation(wf)?;
    let (phi_wf, _) = from_samples(mrep.phi.clone(), wf.physics, None)?;
    let mask = build_mask(&phi_wf.rho, num.eps_rel)?;
    // x_i = +i hbar d/dp_i: the sign of c flips relative to position space
    let c = Complex64::new(0.0, wf.physics.hbar);
    // quotient fields on the FFT output are differentiated locally
    let stats = weak_correlation_core(&phi_wf.psi, &phi_wf.rho, &mask, c, DiffScheme::Fd4);
    Ok(ConjugateWeakCorrelation {
        stats,
        parseval_error: mrep.parseval_error,
    })
}
