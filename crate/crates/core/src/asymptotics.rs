//! Asymptotic covariance and influence functions of the minimum-LSD
//! estimator.
//!
//! Notation, with `f = f_theta`, `u` its score and `u'` the score derivative:
//!
//! * `Af = sum f^(1+beta) u`, `Bf = sum f^(1+beta)`, `w = Bf u - Af`;
//! * `M(delta) = delta^A - 1` with `delta = g / f`;
//! * the estimating equation is `H(theta) = sum M(delta) f^(1+beta) w = 0`.
//!
//! Scalar parameters only; matrix-valued fields are stored as `1 x 1`.

use serde::Serialize;

use crate::divergence::{DiscreteDensity, TiltParams, BOUNDARY_TOL};
use crate::error::{LsdError, Result};
use crate::estimation::{minimize_lsd, SearchConfig};
use crate::family::{moments_c_d, ParametricFamily};

/// Smallest `|J|` accepted as invertible.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticSummary {
    pub j: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    /// `J^-1 K J^-1`, the asymptotic covariance of `sqrt(n) (theta_hat - theta)`.
    pub sandwich: Vec<Vec<f64>>,
}

impl AsymptoticSummary {
    fn scalar(j: f64, k: f64, xi: f64) -> Result<Self> {
        if !j.is_finite() || j.abs() <= SINGULAR_TOL {
            return Err(LsdError::Singular(format!("J = {j:e} is not invertible")));
        }
        Ok(Self {
            j: vec![vec![j]],
            k: vec![vec![k]],
            xi: vec![xi],
            sandwich: vec![vec![k / (j * j)]],
        })
    }

    pub fn j_scalar(&self) -> f64 {
        self.j[0][0]
    }

    pub fn k_scalar(&self) -> f64 {
        self.k[0][0]
    }

    pub fn xi_scalar(&self) -> f64 {
        self.xi[0]
    }

    pub fn sandwich_scalar(&self) -> f64 {
        self.sandwich[0][0]
    }
}

/// Per-cell model quantities on a window.
struct ModelCells {
    log_f: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    /// `f^(1+beta)`
    tilt: Vec<f64>,
    af: f64,
    bf: f64,
}

impl ModelCells {
    fn on(family: &dyn ParametricFamily, theta: f64, beta: f64, lo: i64, hi: i64) -> Self {
        let log_f = family.log_density_window(theta, lo, (hi - lo) as usize);
        let u: Vec<f64> = (lo..hi).map(|x| family.score(theta, x)).collect();
        let du = (lo..hi)
            .map(|x| family.score_derivative(theta, x))
            .collect();
        let tilt: Vec<f64> = log_f.iter().map(|lf| ((1.0 + beta) * lf).exp()).collect();
        let af = tilt.iter().zip(&u).map(|(t, u)| t * u).sum();
        let bf = tilt.iter().sum();
        Self {
            log_f,
            u,
            du,
            tilt,
            af,
            bf,
        }
    }

    fn model(family: &dyn ParametricFamily, theta: f64, beta: f64, eps_tail: f64) -> Result<Self> {
        let (offset, len) = family.support_window(theta, eps_tail)?;
        Ok(Self::on(family, theta, beta, offset, offset + len as i64))
    }

    fn w(&self, i: usize) -> f64 {
        self.bf * self.u[i] - self.af
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(LsdError::Domain(format!("beta must be >= 0, got {beta}")))
    }
}

/// `J`, `K` and `xi` at the model; these depend on `beta` only.
pub fn model_jkxi(
    family: &dyn ParametricFamily,
    theta: f64,
    beta: f64,
    eps_tail: f64,
) -> Result<AsymptoticSummary> {
    check_beta(beta)?;
    let cells = ModelCells::model(family, theta, beta, eps_tail)?;
    let mut j = 0.0;
    let mut k = 0.0;
    let mut xi = 0.0;
    for i in 0..cells.u.len() {
        let w = cells.w(i);
        j += w * cells.u[i] * cells.tilt[i];
        xi += w * cells.tilt[i];
        k += w * w * ((1.0 + 2.0 * beta) * cells.log_f[i]).exp();
    }
    AsymptoticSummary::scalar(j, k - xi * xi, xi)
}

/// `J_g` and `K_g` for a general true density `g` at its best-fitting
/// parameter `theta`.
///
/// `J_g = -dH/dtheta` and `K_g = Var_g[M'(delta) f^beta w]`. At `g = f_theta`
/// these equal `A J` and `A^2 K`, so the sandwich matches [`model_jkxi`].
/// `xi` holds `E_g[M'(delta) f^beta w]`.
pub fn general_jk(
    g: &DiscreteDensity,
    family: &dyn ParametricFamily,
    theta: f64,
    p: &TiltParams,
    eps_tail: f64,
) -> Result<AsymptoticSummary> {
    let a = p.exp_a();
    let b = p.exp_b();
    let k1 = p.one_plus_beta();
    if a <= BOUNDARY_TOL {
        return Err(LsdError::Domain(format!("J_g requires A > 0, got A = {a}")));
    }
    let (mlo, mlen) = family.support_window(theta, eps_tail)?;
    let lo = mlo.min(g.offset());
    let hi = (mlo + mlen as i64).max(g.end());
    let cells = ModelCells::on(family, theta, p.beta(), lo, hi);
    let log_g = g.log_mass_on(lo, hi);

    // d/dtheta of Af and Bf
    let mut daf = 0.0;
    for i in 0..cells.u.len() {
        daf += cells.tilt[i] * (k1 * cells.u[i] * cells.u[i] + cells.du[i]);
    }
    let dbf = k1 * cells.af;

    let mut lead = 0.0; // E_g[M' f^beta w u]
    let mut m_dw = 0.0; // sum M f^(1+beta) dw
    let mut m_wu = 0.0; // sum M f^(1+beta) w u
    let mut ez = 0.0;
    let mut ez2 = 0.0;
    for (i, &lg) in log_g.iter().enumerate() {
        let lf = cells.log_f[i];
        if cells.tilt[i] == 0.0 && lg == f64::NEG_INFINITY {
            continue;
        }
        let w = cells.w(i);
        let u = cells.u[i];
        let dw = dbf * u + cells.bf * cells.du[i] - daf;
        let m = if lg == f64::NEG_INFINITY {
            -1.0
        } else {
            (a * (lg - lf)).exp_m1()
        };
        m_dw += m * cells.tilt[i] * dw;
        m_wu += m * cells.tilt[i] * w * u;
        if lg > f64::NEG_INFINITY {
            // g M'(delta) f^beta = A g^A f^B
            let gz = a * (a * lg + b * lf).exp() * w;
            lead += gz * u;
            ez += gz;
            // g Z^2 = A^2 g^(2A-1) f^(2B) w^2
            ez2 += a * a * ((2.0 * a - 1.0) * lg + 2.0 * b * lf).exp() * w * w;
        }
    }
    let j = lead - m_dw - k1 * m_wu;
    AsymptoticSummary::scalar(j, ez2 - ez * ez, ez)
}

/// The distribution at which an influence function is evaluated.
#[derive(Clone, Copy, Debug)]
pub enum BaseLaw<'a> {
    /// The model `f_theta` itself.
    Model,
    /// A general density whose best-fitting parameter is `theta`.
    Density(&'a DiscreteDensity),
}

/// First-order influence function `IF(y)` of the minimum-LSD functional.
///
/// At the model it is `J^-1 f^beta(y) (u(y) Bf - Af)`, free of `gamma`.
/// Otherwise it is `A J_g^-1 b` with
/// `b = Af I - Bf I_u + f^B(y) g^(A-1)(y) (Bf u(y) - Af)`, where
/// `I = sum f^B g^A` and `I_u = sum f^B g^A u`.
pub fn if_first_order(
    y: i64,
    base: BaseLaw<'_>,
    family: &dyn ParametricFamily,
    theta: f64,
    p: &TiltParams,
    eps_tail: f64,
) -> Result<f64> {
    match base {
        BaseLaw::Model => model_if(y, family, theta, p.beta(), eps_tail),
        BaseLaw::Density(g) => {
            let a = p.exp_a();
            let b = p.exp_b();
            let jg = general_jk(g, family, theta, p, eps_tail)?.j_scalar();
            let (mlo, mlen) = family.support_window(theta, eps_tail)?;
            let lo = mlo.min(g.offset());
            let hi = (mlo + mlen as i64).max(g.end());
            let cells = ModelCells::on(family, theta, p.beta(), lo, hi);
            let log_g = g.log_mass_on(lo, hi);
            let mut i0 = 0.0;
            let mut iu = 0.0;
            for (i, &lg) in log_g.iter().enumerate() {
                if lg > f64::NEG_INFINITY {
                    let t = (a * lg + b * cells.log_f[i]).exp();
                    i0 += t;
                    iu += t * cells.u[i];
                }
            }
            let gy = g.at(y);
            if gy == 0.0 && a < 1.0 {
                return Err(LsdError::InfiniteDivergence(format!(
                    "g({y}) = 0 with A = {a} < 1 makes g^(A-1)(y) infinite"
                )));
            }
            let point = if gy == 0.0 {
                if a == 1.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                ((a - 1.0) * gy.ln()).exp()
            };
            let fy = family.log_density(theta, y);
            let wy = cells.bf * family.score(theta, y) - cells.af;
            let bvec = cells.af * i0 - cells.bf * iu + (b * fy).exp() * point * wy;
            Ok(a * bvec / jg)
        }
    }
}

fn model_if(
    y: i64,
    family: &dyn ParametricFamily,
    theta: f64,
    beta: f64,
    eps_tail: f64,
) -> Result<f64> {
    check_beta(beta)?;
    let m = moments_c_d(family, theta, beta, eps_tail)?;
    let (c0, c1, c2) = (m.c[0], m.c[1], m.c[2]);
    let d0 = c2 * c0 - c1 * c1;
    if d0.abs() <= SINGULAR_TOL {
        return Err(LsdError::Singular(format!("J = {d0:e} is not invertible")));
    }
    let f_beta = (beta * family.log_density(theta, y)).exp();
    Ok(f_beta * (family.score(theta, y) * c0 - c1) / d0)
}

/// Second-order influence function `T''(y)` at the model.
///
/// With `T' = N0 / D0`, `N0 = f^beta(y) (u(y) c0 - c1)` and
/// `D0 = c0 c2 - c1^2`, implicit differentiation of the contaminated
/// estimating equation twice in `eps` gives
/// `T'' = (N0' D0 - N0 D0') / D0^2`, where `N0' = -(H_ee + H_et T')` and
/// `D0' = H_et + H_tt T'` collect the second derivatives of the equation
/// (scaled by `1 / A`) in `eps` and `theta`.
pub fn if_second_order(
    y: i64,
    family: &dyn ParametricFamily,
    theta: f64,
    p: &TiltParams,
    eps_tail: f64,
) -> Result<f64> {
    let beta = p.beta();
    let a = p.exp_a();
    let b = p.exp_b();
    let k1 = p.one_plus_beta();
    check_beta(beta)?;
    let m = moments_c_d(family, theta, beta, eps_tail)?;
    let [c0, c1, c2, c3] = m.c;
    let [d0, d1, _, _] = m.d;
    let den = c2 * c0 - c1 * c1;
    if den.abs() <= SINGULAR_TOL {
        return Err(LsdError::Singular(format!(
            "D0 = {den:e} is not invertible"
        )));
    }
    let lf = family.log_density(theta, y);
    let fb = (beta * lf).exp();
    let fbm1 = ((beta - 1.0) * lf).exp();
    let u = family.score(theta, y);
    let du = family.score_derivative(theta, y);

    let num = fb * u * c0 - fb * c1;
    let t1 = num / den;

    let h_ee = (a - 1.0) * (c1 * fbm1 - 2.0 * c1 * fb - c0 * fbm1 * u + 2.0 * c0 * fb * u);
    let h_et = (k1 * c2 + d0) * (fb - c0) + b * c1 * (fb * u - c1)
        - k1 * c1 * (fb * u - c1)
        - c0 * (fb * (b * u * u + du) - b * c2 - d0);
    let h_tt = (a + 2.0 * b) * (c3 * c0 - c2 * c1) + 3.0 * (d1 * c0 - d0 * c1);

    let num_p = -(h_ee + h_et * t1);
    let den_p = h_et + h_tt * t1;
    Ok((num_p * den - num * den_p) / (den * den))
}

/// First- and second-order approximations to the bias
/// `T(G_eps) - T(F_theta)` under point contamination at `y`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BiasCurve {
    pub y: i64,
    pub t1: f64,
    pub t2: f64,
    pub eps_grid: Vec<f64>,
    /// `eps T'(y)`
    pub first_order: Vec<f64>,
    /// `eps T'(y) + eps^2 / 2 T''(y)`
    pub second_order: Vec<f64>,
    /// `1 + (T'' / T') eps / 2`
    pub adequacy_ratio: Vec<f64>,
}

impl BiasCurve {
    pub const CSV_HEADER: &'static str = "eps,first_order,second_order,adequacy";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for i in 0..self.eps_grid.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.eps_grid[i], self.first_order[i], self.second_order[i], self.adequacy_ratio[i]
            ));
        }
        out
    }
}

pub fn bias_curves(
    y: i64,
    family: &dyn ParametricFamily,
    theta: f64,
    p: &TiltParams,
    eps_grid: &[f64],
    eps_tail: f64,
) -> Result<BiasCurve> {
    if let Some(e) = eps_grid.iter().find(|e| !(0.0..=0.2).contains(*e)) {
        return Err(LsdError::Usage(format!(
            "contamination proportions must lie in [0, 0.2], got {e}"
        )));
    }
    let t1 = if_first_order(y, BaseLaw::Model, family, theta, p, eps_tail)?;
    let t2 = if_second_order(y, family, theta, p, eps_tail)?;
    if t1 == 0.0 {
        return Err(LsdError::Singular(format!(
            "T'({y}) = 0, adequacy ratio undefined"
        )));
    }
    let first_order = eps_grid.iter().map(|e| e * t1).collect();
    let second_order = eps_grid.iter().map(|e| e * t1 + 0.5 * e * e * t2).collect();
    let adequacy_ratio = eps_grid.iter().map(|e| 1.0 + t2 / t1 * e / 2.0).collect();
    Ok(BiasCurve {
        y,
        t1,
        t2,
        eps_grid: eps_grid.to_vec(),
        first_order,
        second_order,
        adequacy_ratio,
    })
}

/// Exact bias `T(G_eps) - theta` of the functional under
/// `G_eps = (1 - eps) f_theta + eps delta_y`, found by minimizing the
/// divergence to the contaminated population.
pub fn contaminated_bias(
    y: i64,
    family: &dyn ParametricFamily,
    theta: f64,
    p: &TiltParams,
    eps: f64,
    eps_tail: f64,
) -> Result<f64> {
    let g = crate::family::density_vector(family, theta, eps_tail)?.contaminate(eps, y)?;
    let search = SearchConfig {
        eps_tail,
        ..SearchConfig::default()
    };
    let fit = minimize_lsd(&g, family, p, &search)?;
    if !fit.converged {
        return Err(LsdError::Numerical(format!(
            "contaminated fit did not converge at eps = {eps}"
        )));
    }
    Ok(fit.theta_hat - theta)
}
