//! The generalized S-divergence family on discrete densities.
//!
//! For tilt parameters `beta >= 0` and `gamma` the exponents are
//! `A = 1 + gamma (1 - beta)` and `B = beta - gamma (1 - beta)`, so that
//! `A + B = 1 + beta`. With `S_f = sum f^(1+beta)`, `S_g = sum g^(1+beta)` and
//! `I = sum f^B g^A`:
//!
//! | link       | value                                                  |
//! |------------|--------------------------------------------------------|
//! | `Log`      | `(1/A) ln S_f - (1+beta)/(AB) ln I + (1/B) ln S_g` (LSD) |
//! | `Identity` | `(1/A) S_f - (1+beta)/(AB) I + (1/B) S_g` (S-divergence) |
//!
//! Both forms are singular at `A = 0` and `B = 0`; within [`BOUNDARY_TOL`] of
//! either the continuity limit is returned instead. All integrals are
//! accumulated in log space so far-tail model cells cannot overflow or
//! underflow the exponent-weighted terms.

use serde::{Deserialize, Serialize};

use crate::error::{LsdError, Result};

/// Default truncation for model densities: mass outside the stored window.
pub const DEFAULT_EPS_TAIL: f64 = 1e-12;

/// Below this magnitude an exponent is treated as zero and the analytic
/// limit is used.
pub const BOUNDARY_TOL: f64 = 1e-8;

/// Numerical slack for nonnegativity of the divergence.
pub const EPS_DIV: f64 = 1e-10;

/// Link function applied to each integral term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Psi {
    /// `psi(x) = x`: the S-divergence.
    Identity,
    /// `psi(x) = ln x`: the logarithmic super divergence.
    Log,
}

/// The `(beta, gamma)` pair together with the derived exponents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TiltParams {
    beta: f64,
    gamma: f64,
    exp_a: f64,
    exp_b: f64,
    psi: Psi,
}

/// Returns `(A, B) = (1 + gamma (1 - beta), beta - gamma (1 - beta))`.
pub fn derive_exponents(beta: f64, gamma: f64) -> Result<(f64, f64)> {
    if !beta.is_finite() || !gamma.is_finite() {
        return Err(LsdError::Domain(format!(
            "tilt parameters must be finite (beta={beta}, gamma={gamma})"
        )));
    }
    if beta < 0.0 {
        return Err(LsdError::Domain(format!("beta must be >= 0, got {beta}")));
    }
    let tilt = gamma * (1.0 - beta);
    Ok((1.0 + tilt, beta - tilt))
}

impl TiltParams {
    /// LSD parameters (`psi = Log`).
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        Self::with_psi(beta, gamma, Psi::Log)
    }

    pub fn with_psi(beta: f64, gamma: f64, psi: Psi) -> Result<Self> {
        let (exp_a, exp_b) = derive_exponents(beta, gamma)?;
        Ok(Self {
            beta,
            gamma,
            exp_a,
            exp_b,
            psi,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The exponent `A` on `g`.
    pub fn exp_a(&self) -> f64 {
        self.exp_a
    }

    /// The exponent `B` on `f`.
    pub fn exp_b(&self) -> f64 {
        self.exp_b
    }

    pub fn psi(&self) -> Psi {
        self.psi
    }

    /// `1 + beta`, which also equals `A + B`.
    pub fn one_plus_beta(&self) -> f64 {
        1.0 + self.beta
    }
}

/// A nonnegative mass vector on the integer window `offset .. offset + len`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDensity {
    offset: i64,
    mass: Vec<f64>,
    tail_bound: f64,
}

const NORMALIZATION_SLACK: f64 = 1e-9;

impl DiscreteDensity {
    /// Validates that every entry is finite and nonnegative and that the
    /// total lies in `[1 - tail_bound, 1]` up to rounding.
    pub fn new(offset: i64, mass: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if mass.is_empty() {
            return Err(LsdError::Usage("density has an empty window".into()));
        }
        if !(tail_bound.is_finite() && (0.0..1.0).contains(&tail_bound)) {
            return Err(LsdError::Usage(format!(
                "tail bound must lie in [0, 1), got {tail_bound}"
            )));
        }
        if let Some((i, m)) = mass
            .iter()
            .enumerate()
            .find(|(_, m)| !m.is_finite() || **m < 0.0)
        {
            return Err(LsdError::Usage(format!(
                "mass at x={} is {m}; entries must be finite and >= 0",
                offset + i as i64
            )));
        }
        let total: f64 = mass.iter().sum();
        if total > 1.0 + NORMALIZATION_SLACK || total < 1.0 - tail_bound - NORMALIZATION_SLACK {
            return Err(LsdError::Usage(format!(
                "total mass {total} outside [1 - {tail_bound}, 1]"
            )));
        }
        Ok(Self {
            offset,
            mass,
            tail_bound,
        })
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// One past the last support point of the window.
    pub fn end(&self) -> i64 {
        self.offset + self.mass.len() as i64
    }

    /// Mass at `x`, zero outside the window.
    pub fn at(&self, x: i64) -> f64 {
        if x < self.offset || x >= self.end() {
            0.0
        } else {
            self.mass[(x - self.offset) as usize]
        }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Support points `offset .. end`.
    pub fn support(&self) -> impl Iterator<Item = i64> {
        self.offset..self.end()
    }

    /// `(1 - eps) * self + eps * point_mass(y)`, widened to cover `y`.
    pub fn contaminate(&self, eps: f64, y: i64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(LsdError::Usage(format!(
                "contamination proportion must lie in [0, 1], got {eps}"
            )));
        }
        let lo = self.offset.min(y);
        let hi = self.end().max(y + 1);
        let mass = (lo..hi)
            .map(|x| (1.0 - eps) * self.at(x) + if x == y { eps } else { 0.0 })
            .collect();
        Self::new(lo, mass, self.tail_bound)
    }

    /// Natural log of the masses on `lo .. hi`, `-inf` for empty cells.
    pub fn log_mass_on(&self, lo: i64, hi: i64) -> Vec<f64> {
        (lo..hi).map(|x| self.at(x).ln()).collect()
    }
}

/// Union of the two windows as `(lo, hi)`.
pub fn union_window(g: &DiscreteDensity, f: &DiscreteDensity) -> (i64, i64) {
    (g.offset.min(f.offset), g.end().max(f.end()))
}

/// `ln sum exp(v)` over the finite entries, `-inf` if there are none.
pub(crate) fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64> + Clone,
{
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Log-domain integrals shared by both links.
struct Integrals {
    log_sf: f64,
    log_sg: f64,
}

fn power_integrals(log_g: &[f64], log_f: &[f64], p: &TiltParams) -> Integrals {
    let k = p.one_plus_beta();
    Integrals {
        log_sf: log_sum_exp(log_f.iter().map(|&lf| k * lf)),
        log_sg: log_sum_exp(log_g.iter().map(|&lg| k * lg)),
    }
}

/// `ln sum f^B g^A`, rejecting cells that make the integral infinite.
fn log_cross_integral(log_g: &[f64], log_f: &[f64], p: &TiltParams) -> Result<f64> {
    let (a, b) = (p.exp_a(), p.exp_b());
    for (i, (&lg, &lf)) in log_g.iter().zip(log_f).enumerate() {
        if lg == f64::NEG_INFINITY && lf == f64::NEG_INFINITY {
            continue;
        }
        if lg == f64::NEG_INFINITY && a < 0.0 {
            return Err(LsdError::InfiniteDivergence(format!(
                "g has zero mass at window cell {i} while A = {a} < 0"
            )));
        }
        if lf == f64::NEG_INFINITY && b < 0.0 {
            return Err(LsdError::InfiniteDivergence(format!(
                "f has zero mass at window cell {i} while B = {b} < 0"
            )));
        }
    }
    let terms = log_g.iter().zip(log_f).map(|(&lg, &lf)| {
        if lg == f64::NEG_INFINITY || lf == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            a * lg + b * lf
        }
    });
    let log_i = log_sum_exp(terms);
    if log_i == f64::NEG_INFINITY {
        return Err(LsdError::InfiniteDivergence(
            "g and f have disjoint supports".into(),
        ));
    }
    Ok(log_i)
}

/// `sum_{w > 0} w^(1+beta) (ln v - ln w) / sum w^(1+beta)`, the derivative
/// of the cross integral at the boundary. Requires `v > 0` wherever `w > 0`.
fn boundary_tilt(
    log_w: &[f64],
    log_v: &[f64],
    log_sw: f64,
    p: &TiltParams,
    which: &str,
) -> Result<f64> {
    let k = p.one_plus_beta();
    let mut acc = 0.0;
    for (i, (&lw, &lv)) in log_w.iter().zip(log_v).enumerate() {
        if lw == f64::NEG_INFINITY {
            continue;
        }
        if lv == f64::NEG_INFINITY {
            return Err(LsdError::InfiniteDivergence(format!(
                "{which} limit: zero mass at window cell {i} where the other density is positive"
            )));
        }
        acc += (k * lw - log_sw).exp() * (lv - lw);
    }
    Ok(acc)
}

/// Evaluates the family on aligned log-mass vectors.
pub(crate) fn gsd_logs(log_g: &[f64], log_f: &[f64], p: &TiltParams) -> Result<f64> {
    debug_assert_eq!(log_g.len(), log_f.len());
    let ints = power_integrals(log_g, log_f, p);
    if ints.log_sf == f64::NEG_INFINITY || ints.log_sg == f64::NEG_INFINITY {
        return Err(LsdError::Usage("density with zero total mass".into()));
    }
    let k = p.one_plus_beta();
    let (a, b) = (p.exp_a(), p.exp_b());

    if b.abs() < BOUNDARY_TOL {
        let tilt = boundary_tilt(log_g, log_f, ints.log_sg, p, "B -> 0")?;
        return Ok(match p.psi() {
            Psi::Log => (ints.log_sf - ints.log_sg) / k - tilt,
            Psi::Identity => (ints.log_sf.exp() - ints.log_sg.exp()) / k - ints.log_sg.exp() * tilt,
        });
    }
    if a.abs() < BOUNDARY_TOL {
        let tilt = boundary_tilt(log_f, log_g, ints.log_sf, p, "A -> 0")?;
        return Ok(match p.psi() {
            Psi::Log => (ints.log_sg - ints.log_sf) / k - tilt,
            Psi::Identity => (ints.log_sg.exp() - ints.log_sf.exp()) / k - ints.log_sf.exp() * tilt,
        });
    }

    let log_i = log_cross_integral(log_g, log_f, p)?;
    // (1+beta)/(AB) = 1/A + 1/B, so each bracket is a log ratio.
    Ok(match p.psi() {
        Psi::Log => (ints.log_sf - log_i) / a + (ints.log_sg - log_i) / b,
        Psi::Identity => {
            let i = log_i.exp();
            (ints.log_sf.exp() - i) / a + (ints.log_sg.exp() - i) / b
        }
    })
}

fn aligned_logs(g: &DiscreteDensity, f: &DiscreteDensity) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = union_window(g, f);
    (g.log_mass_on(lo, hi), f.log_mass_on(lo, hi))
}

/// The logarithmic super divergence `LSD(g, f)` (ignores `p.psi()`).
pub fn lsd(g: &DiscreteDensity, f: &DiscreteDensity, p: &TiltParams) -> Result<f64> {
    let p = TiltParams {
        psi: Psi::Log,
        ..*p
    };
    let (lg, lf) = aligned_logs(g, f);
    gsd_logs(&lg, &lf, &p)
}

/// The generalized divergence with the link chosen by `p.psi()`.
pub fn gsd(g: &DiscreteDensity, f: &DiscreteDensity, p: &TiltParams) -> Result<f64> {
    let (lg, lf) = aligned_logs(g, f);
    gsd_logs(&lg, &lf, p)
}

/// Named members of the family, evaluated from their own closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param")]
pub enum SpecialCase {
    /// Logarithmic power divergence with parameter `gamma`.
    Lpd(f64),
    /// Logarithmic density power divergence with parameter `beta`.
    Ldpd(f64),
    /// Likelihood disparity `sum g ln(g/f)`.
    Ld,
}

/// Evaluates a named special case directly on the masses.
pub fn named_special(g: &DiscreteDensity, f: &DiscreteDensity, kind: SpecialCase) -> Result<f64> {
    let (lo, hi) = union_window(g, f);
    let cells: Vec<(f64, f64)> = (lo..hi).map(|x| (g.at(x), f.at(x))).collect();
    let infinite = |what: &str| Err(LsdError::InfiniteDivergence(what.to_string()));
    match kind {
        SpecialCase::Ld => {
            let mut acc = 0.0;
            for &(gx, fx) in &cells {
                if gx == 0.0 {
                    continue;
                }
                if fx == 0.0 {
                    return infinite("f vanishes where g is positive");
                }
                acc += gx * (gx / fx).ln();
            }
            Ok(acc)
        }
        SpecialCase::Lpd(gamma) => {
            if gamma == 0.0 || gamma == -1.0 || !gamma.is_finite() {
                return Err(LsdError::Domain(format!(
                    "LPD coefficient 1/(gamma(gamma+1)) undefined at gamma={gamma}"
                )));
            }
            let mut acc = 0.0;
            for &(gx, fx) in &cells {
                if gx == 0.0 {
                    if 1.0 + gamma > 0.0 {
                        continue;
                    }
                    return infinite("g vanishes while 1 + gamma <= 0");
                }
                if fx == 0.0 {
                    if gamma > 0.0 {
                        return infinite("f vanishes where g is positive");
                    }
                    continue;
                }
                acc += gx.powf(1.0 + gamma) * fx.powf(-gamma);
            }
            Ok(acc.ln() / (gamma * (gamma + 1.0)))
        }
        SpecialCase::Ldpd(beta) => {
            if !(beta.is_finite() && beta >= 0.0) {
                return Err(LsdError::Domain(format!(
                    "LDPD requires beta >= 0, got {beta}"
                )));
            }
            if beta == 0.0 {
                // continuity limit at beta = 0
                return named_special(g, f, SpecialCase::Ld);
            }
            let sf: f64 = cells.iter().map(|&(_, fx)| fx.powf(1.0 + beta)).sum();
            let sg: f64 = cells.iter().map(|&(gx, _)| gx.powf(1.0 + beta)).sum();
            let cross: f64 = cells.iter().map(|&(gx, fx)| fx.powf(beta) * gx).sum();
            if cross == 0.0 {
                return infinite("g and f have disjoint supports");
            }
            Ok(sf.ln() - (1.0 + 1.0 / beta) * cross.ln() + sg.ln() / beta)
        }
    }
}
