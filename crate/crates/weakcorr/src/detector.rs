//! Entanglement indicators, classification, and the self-consistency
//! identity suite.

use serde::Serialize;

use crate::error::Result;
use crate::grid::GridAxis;
use crate::kinematics::{
    self, mean_masked, raw_fields, Numerics,
};
use crate::state::WaveFunction;
use crate::weak;

/// Default decision threshold for all indicators.
pub const DEFAULT_TAU: f64 = 1e-3;

/// Dimensionless entanglement indicators. `a` refers to amplitude
/// entanglement (osmotic correlations, Re C^w), `p` to phase entanglement
/// (flow-osmotic cross correlations, Im C^w).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EntanglementIndicators {
    pub i_a_mean: f64,
    pub i_p_mean: f64,
    pub i_a_sup: f64,
    pub i_p_sup: f64,
    pub mean_u1u2: f64,
    pub mean_re_cw: f64,
    pub mean_im_cw: f64,
    pub sup_re_cw: f64,
    pub sup_im_cw: f64,
    pub u_scale: f64,
}

pub fn indicators(wf: &WaveFunction, num: &Numerics) -> Result<EntanglementIndicators> {
    let raw = raw_fields(wf, num)?;
    let ph = &wf.physics;
    let u1 = raw.u(GridAxis::X1, ph.m1);
    let u2 = raw.u(GridAxis::X2, ph.m2);
    let v1 = raw.v(GridAxis::X1, ph.m1);
    let v2 = raw.v(GridAxis::X2, ph.m2);
    let mean_u1u2 = mean_masked(wf, &raw.mask, |i, j| u1[[i, j]] * u2[[i, j]]);
    let u1_sq = mean_masked(wf, &raw.mask, |i, j| u1[[i, j]] * u1[[i, j]]);
    let u2_sq = mean_masked(wf, &raw.mask, |i, j| u2[[i, j]] * u2[[i, j]]);
    let v1_sq = mean_masked(wf, &raw.mask, |i, j| v1[[i, j]] * v1[[i, j]]);
    let v2_sq = mean_masked(wf, &raw.mask, |i, j| v2[[i, j]] * v2[[i, j]]);
    let u1v2 = mean_masked(wf, &raw.mask, |i, j| u1[[i, j]] * v2[[i, j]]);
    let u2v1 = mean_masked(wf, &raw.mask, |i, j| u2[[i, j]] * v1[[i, j]]);

    let i_a_mean = mean_u1u2.abs() / (u1_sq * u2_sq).sqrt();
    // A phase-free state has v = 0; the floor keeps the normalization from
    // amplifying pure noise into an indicator.
    let ip = |uv: f64, u_sq: f64, v_sq: f64, other_u_sq: f64| {
        uv.abs() / (u_sq * (v_sq + 1e-6 * other_u_sq)).sqrt()
    };
    let i_p_mean = ip(u1v2, u1_sq, v2_sq, u2_sq).max(ip(u2v1, u2_sq, v1_sq, u1_sq));

    let cw = weak::weak_correlation_unchecked(wf, num)?;
    let i_a_sup = cw.sup_re / cw.u_scale;
    let i_p_sup = cw.sup_im / cw.u_scale;
    Ok(EntanglementIndicators {
        i_a_mean,
        i_p_mean,
        i_a_sup,
        i_p_sup,
        mean_u1u2,
        mean_re_cw: cw.mean.re,
        mean_im_cw: cw.mean.im,
        sup_re_cw: cw.sup_re,
        sup_im_cw: cw.sup_im,
        u_scale: cw.u_scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Class {
    Product,
    AOnly,
    POnly,
    Ap,
}

impl std::fmt::Display for Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Class::Product => "PRODUCT",
            Class::AOnly => "A_ONLY",
            Class::POnly => "P_ONLY",
            Class::Ap => "AP",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Verdict {
    pub class: Class,
    pub tau: f64,
    pub a_entangled: bool,
    pub p_entangled: bool,
    /// For one-dimensional particles a nonvanishing Im C^w is equivalent to
    /// phase entanglement, so the P flag is an iff, not just a witness.
    pub p_flag_is_iff: bool,
}

pub fn classify(ind: &EntanglementIndicators, tau: f64) -> Verdict {
    let a_entangled = ind.i_a_sup > tau || ind.i_a_mean > tau;
    let p_entangled = ind.i_p_sup > tau || ind.i_p_mean > tau;
    let class = match (a_entangled, p_entangled) {
        (false, false) => Class::Product,
        (true, false) => Class::AOnly,
        (false, true) => Class::POnly,
        (true, true) => Class::Ap,
    };
    Verdict {
        class,
        tau,
        a_entangled,
        p_entangled,
        p_flag_is_iff: true,
    }
}

/// One checked identity: a named residual against its tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityEntry {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentitySuite {
    pub entries: Vec<IdentityEntry>,
    pub all_pass: bool,
}

impl IdentitySuite {
    pub fn failed(&self) -> Vec<&IdentityEntry> {
        self.entries.iter().filter(|e| !e.pass).collect()
    }
}

/// Runs every built-in consistency identity and reports residuals instead of
/// bailing on the first violation. `relax` scales all tolerances (use > 1 on
/// coarse grids).
pub fn identity_suite(wf: &WaveFunction, num: &Numerics, relax: f64) -> Result<IdentitySuite> {
    let mut entries = Vec::new();
    let mut push = |name: &'static str, residual: f64, tol: f64| {
        let tolerance = tol * relax;
        entries.push(IdentityEntry {
            name,
            residual,
            tolerance,
            pass: residual.is_finite() && residual <= tolerance,
        });
    };

    // <u_i> = 0 via the bounded product (hbar/2m) d_i rho
    push(
        "mean_u_1",
        kinematics::mean_u(wf, num, GridAxis::X1)?.abs(),
        1e-8,
    );
    push(
        "mean_u_2",
        kinematics::mean_u(wf, num, GridAxis::X2)?.abs(),
        1e-8,
    );

    let p1 = kinematics::momentum_expectation_unchecked(wf, num, GridAxis::X1)?;
    let p2 = kinematics::momentum_expectation_unchecked(wf, num, GridAxis::X2)?;
    push("momentum_routes_1", p1.residual, 1e-8);
    push("momentum_routes_2", p2.residual, 1e-8);

    // <wp_i> = <p_i> (complex mean of the weak momentum field)
    let wfields = weak::weak_momentum(wf, num)?;
    let hbar = wf.physics.hbar;
    push(
        "wp_mean_1",
        (wfields.mean_wp1.re - p1.operator).hypot(wfields.mean_wp1.im)
            / (p1.operator.abs() + hbar),
        1e-6,
    );
    push(
        "wp_mean_2",
        (wfields.mean_wp2.re - p2.operator).hypot(wfields.mean_wp2.im)
            / (p2.operator.abs() + hbar),
        1e-6,
    );

    let ibp = kinematics::integration_by_parts_check(wf, num)?;
    push("ibp_uu_12", ibp.uu_12.residual, 1e-6);
    push("ibp_uu_21", ibp.uu_21.residual, 1e-6);
    push("ibp_uv_12", ibp.uv_12.residual, 1e-6);
    push("ibp_uv_21", ibp.uv_21.residual, 1e-6);

    push(
        "c22_routes",
        kinematics::momentum_correlation_unchecked(wf, num)?.residual,
        1e-6,
    );
    push(
        "dispersion_split_1",
        kinematics::momentum_dispersion_unchecked(wf, num, GridAxis::X1)?.residual,
        1e-6,
    );
    push(
        "dispersion_split_2",
        kinematics::momentum_dispersion_unchecked(wf, num, GridAxis::X2)?.residual,
        1e-6,
    );

    let vq = kinematics::quantum_potential_unchecked(wf, num)?;
    push("vq_routes", vq.residual, 1e-5);
    // sigma_p^2 = m^2 sigma_v^2 + 2 m <V_Q> (since <V_Qi> = m <u_i^2>/2)
    let d1 = kinematics::momentum_dispersion_unchecked(wf, num, GridAxis::X1)?;
    let d2 = kinematics::momentum_dispersion_unchecked(wf, num, GridAxis::X2)?;
    let h2 = hbar * hbar;
    push(
        "dispersion_vq_1",
        (d1.sigma2_p - d1.m2_sigma2_v - 2.0 * wf.physics.m1 * vq.mean_vq1).abs()
            / (d1.sigma2_p.abs() + h2),
        5e-5,
    );
    push(
        "dispersion_vq_2",
        (d2.sigma2_p - d2.m2_sigma2_v - 2.0 * wf.physics.m2 * vq.mean_vq2).abs()
            / (d2.sigma2_p.abs() + h2),
        5e-5,
    );

    let pi = kinematics::pi_terms(wf, num)?;
    let cw = weak::weak_correlation_unchecked(wf, num)?;
    let pi_scale = cw.u_scale + h2;
    push(
        "pi_uu_mean",
        (pi.mean_pi_uu - wf.physics.m1 * wf.physics.m2 * pi.mean_u1u2).abs() / pi_scale,
        1e-6,
    );
    push("pi_uv_mean", pi.mean_pi_uv.abs() / pi_scale, 1e-6);

    push(
        "commutator_1",
        kinematics::commutator_check_unchecked(wf, num, GridAxis::X1)?.residual,
        1e-4,
    );
    push(
        "commutator_2",
        kinematics::commutator_check_unchecked(wf, num, GridAxis::X2)?.residual,
        1e-4,
    );

    push("corrw_routes", cw.route_residual, 1e-5);
    push("corrw_exchange", cw.exchange_residual, 1e-5);
    push(
        "qvsw_closure",
        weak::correlation_decomposition_unchecked(wf, num)?.residual,
        1e-6,
    );

    let wk = weak::weak_kinetic_energy_unchecked(wf, num)?;
    push("weak_kinetic_1", wk.residual1, 1e-5);
    push("weak_kinetic_2", wk.residual2, 1e-5);

    push(
        "wpp_mean",
        weak::weak_momentum_product_unchecked(wf, num)?.residual,
        1e-6,
    );

    let ex = kinematics::exchange_symmetry(wf, num)?;
    push("exch_u", ex.resid_u, 1e-5);
    push("exch_v", ex.resid_v, 1e-5);

    let all_pass = entries.iter().all(|e| e.pass);
    Ok(IdentitySuite { entries, all_pass })
}
