//! Minimum-LSD estimation of a scalar parameter from count data.
//!
//! The estimate minimizes `theta -> LSD(r_n, f_theta)` where `r_n` is the
//! vector of relative frequencies. The search is a coarse scan of the
//! bracket to locate the lowest basin, golden-section refinement inside that
//! basin, and a final bisection on the estimating-equation residual when it
//! changes sign across the golden bracket.

use serde::{Deserialize, Serialize};

use crate::divergence::{
    gsd_logs, DiscreteDensity, Psi, TiltParams, BOUNDARY_TOL, DEFAULT_EPS_TAIL,
};
use crate::error::{LsdError, Result};
use crate::family::{joint_window, ParametricFamily};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Knobs for [`minimize_lsd`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Maximum estimating-equation imbalance for a converged fit.
    pub tol_ee: f64,
    /// Final bracket width.
    pub tol_theta: f64,
    pub max_iter: usize,
    pub eps_tail: f64,
    /// Evaluation points of the initial scan.
    pub scan_points: usize,
    /// Explicit search interval; defaults to `[max(1e-3, mean/5), 5 mean + 5]`.
    pub bracket: Option<(f64, f64)>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            tol_ee: 1e-6,
            tol_theta: 1e-8,
            max_iter: 200,
            eps_tail: DEFAULT_EPS_TAIL,
            scan_points: 64,
            bracket: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub theta_hat: f64,
    /// LSD at the optimum.
    pub objective: f64,
    /// Estimating-equation imbalance at `theta_hat`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final golden-section bracket.
    pub bracket: (f64, f64),
}

/// Relative frequencies of a count sample on `0 ..= max(sample)`.
pub fn empirical_frequencies(sample: &[i64]) -> Result<DiscreteDensity> {
    if sample.is_empty() {
        return Err(LsdError::Usage("empty sample".into()));
    }
    if let Some(x) = sample.iter().find(|&&x| x < 0) {
        return Err(LsdError::Usage(format!("negative count {x} in sample")));
    }
    let max = *sample.iter().max().expect("non-empty") as usize;
    let mut counts = vec![0usize; max + 1];
    for &x in sample {
        counts[x as usize] += 1;
    }
    let n = sample.len() as f64;
    let mut mass: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    // Push the rounding residue into the largest cell so the total is exactly one.
    let total: f64 = mass.iter().sum();
    if total != 1.0 {
        let (imax, _) =
            mass.iter()
                .enumerate()
                .fold((0, f64::MIN), |b, (i, &m)| if m > b.1 { (i, m) } else { b });
        mass[imax] += 1.0 - total;
    }
    DiscreteDensity::new(0, mass, 0.0)
}

/// Mean of a density on its window.
pub fn density_mean(g: &DiscreteDensity) -> f64 {
    g.support().map(|x| x as f64 * g.at(x)).sum::<f64>() / g.total()
}

/// Fixed-window evaluator of the objective and estimating equation.
struct FitProblem<'a> {
    family: &'a dyn ParametricFamily,
    p: TiltParams,
    lo: i64,
    len: usize,
    log_g: Vec<f64>,
}

impl<'a> FitProblem<'a> {
    fn new(
        g: &DiscreteDensity,
        family: &'a dyn ParametricFamily,
        p: &TiltParams,
        thetas: &[f64],
        eps_tail: f64,
    ) -> Result<Self> {
        let (mlo, mhi) = joint_window(family, thetas, eps_tail)?;
        let lo = mlo.min(g.offset());
        let hi = mhi.max(g.end());
        Ok(Self {
            family,
            p: TiltParams::with_psi(p.beta(), p.gamma(), Psi::Log)?,
            lo,
            len: (hi - lo) as usize,
            log_g: g.log_mass_on(lo, hi),
        })
    }

    fn has_empty_cell(&self) -> bool {
        self.log_g.contains(&f64::NEG_INFINITY)
    }

    fn objective(&self, theta: f64) -> Result<f64> {
        self.family.validate(theta)?;
        let log_f = self.family.log_density_window(theta, self.lo, self.len);
        gsd_logs(&self.log_g, &log_f, &self.p)
    }

    /// `sum (delta^A - 1) f^(1+beta) (Bf u - Af)` with `delta = g / f`.
    fn residual(&self, theta: f64) -> Result<f64> {
        self.family.validate(theta)?;
        let a = self.p.exp_a();
        let k = self.p.one_plus_beta();
        if a.abs() < BOUNDARY_TOL {
            return Err(LsdError::Domain(
                "estimating equation degenerates at A = 0".into(),
            ));
        }
        if a < 0.0 && self.has_empty_cell() {
            return Err(LsdError::InfiniteDivergence(
                "delta^A is infinite at empty cells when A < 0".into(),
            ));
        }
        let log_f = self.family.log_density_window(theta, self.lo, self.len);
        let mut af = 0.0;
        let mut bf = 0.0;
        let mut tilted = Vec::with_capacity(self.len);
        for (x, &lf) in (self.lo..).zip(&log_f) {
            let w = (k * lf).exp();
            let u = self.family.score(theta, x);
            af += w * u;
            bf += w;
            tilted.push((w, u));
        }
        let mut acc = 0.0;
        for ((&lg, &lf), &(w, u)) in self.log_g.iter().zip(&log_f).zip(&tilted) {
            if w == 0.0 {
                continue;
            }
            let m = if lg == f64::NEG_INFINITY {
                -1.0
            } else {
                (a * (lg - lf)).exp_m1()
            };
            acc += m * w * (bf * u - af);
        }
        Ok(acc)
    }
}

fn default_bracket(g: &DiscreteDensity) -> (f64, f64) {
    let mean = density_mean(g);
    ((mean / 5.0).max(1e-3), 5.0 * mean + 5.0)
}

fn check_tilt_for_data(problem: &FitProblem<'_>) -> Result<()> {
    if problem.p.exp_a() <= BOUNDARY_TOL && problem.has_empty_cell() {
        return Err(LsdError::InfiniteDivergence(format!(
            "A = {} <= 0 with empty cells in the model window",
            problem.p.exp_a()
        )));
    }
    Ok(())
}

/// Estimating-equation residual at `theta`; zero at an interior optimum,
/// positive where the objective is decreasing.
pub fn estimating_equation_residual(
    theta: f64,
    r_n: &DiscreteDensity,
    family: &dyn ParametricFamily,
    p: &TiltParams,
) -> Result<f64> {
    let problem = FitProblem::new(r_n, family, p, &[theta], DEFAULT_EPS_TAIL)?;
    problem.residual(theta)
}

/// The objective `LSD(r_n, f_theta)` on the union of the data window and the
/// model's tail window.
pub fn lsd_objective(
    theta: f64,
    r_n: &DiscreteDensity,
    family: &dyn ParametricFamily,
    p: &TiltParams,
    eps_tail: f64,
) -> Result<f64> {
    FitProblem::new(r_n, family, p, &[theta], eps_tail)?.objective(theta)
}

/// Minimum-LSD estimate of `theta` for the frequency vector `r_n`.
pub fn minimize_lsd(
    r_n: &DiscreteDensity,
    family: &dyn ParametricFamily,
    p: &TiltParams,
    search: &SearchConfig,
) -> Result<EstimatorResult> {
    let (lo, hi) = search.bracket.unwrap_or_else(|| default_bracket(r_n));
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(LsdError::Usage(format!(
            "invalid search interval [{lo}, {hi}]"
        )));
    }
    family.validate(lo)?;
    let problem = FitProblem::new(r_n, family, p, &[lo, hi], search.eps_tail)?;
    check_tilt_for_data(&problem)?;

    // Coarse scan; the first minimum wins so ties go to the smaller theta.
    let npts = search.scan_points.max(3);
    let step = (hi - lo) / (npts - 1) as f64;
    let grid: Vec<f64> = (0..npts)
        .map(|i| {
            if i == npts - 1 {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect();
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, &t) in grid.iter().enumerate() {
        let v = problem.objective(t)?;
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(npts - 1)];

    // Golden section inside the selected basin.
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = problem.objective(c)?;
    let mut fd = problem.objective(d)?;
    let mut iterations = 0;
    while b - a > search.tol_theta && iterations < search.max_iter {
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = problem.objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = problem.objective(d)?;
        }
    }
    let golden_bracket = (a, b);
    let mut theta_hat = if fc <= fd { c } else { d };

    // Residual refinement: bisection when the sign changes across the bracket.
    let ra = problem.residual(a)?;
    let rb = problem.residual(b)?;
    if ra != 0.0 && rb != 0.0 && ra.signum() != rb.signum() {
        let (mut left, mut right, mut r_left) = (a, b, ra);
        for _ in 0..search.max_iter {
            let mid = 0.5 * (left + right);
            if mid <= left || mid >= right {
                break;
            }
            let rm = problem.residual(mid)?;
            iterations += 1;
            if rm == 0.0 {
                left = mid;
                right = mid;
                break;
            }
            if rm.signum() == r_left.signum() {
                left = mid;
                r_left = rm;
            } else {
                right = mid;
            }
        }
        theta_hat = 0.5 * (left + right);
    }

    // Near the optimum the objective is flat to rounding; keep the reported
    // point no worse than either bracket end.
    let mut objective = problem.objective(theta_hat)?;
    for end in [golden_bracket.0, golden_bracket.1] {
        let v = problem.objective(end)?;
        if v < objective {
            objective = v;
            theta_hat = end;
        }
    }
    let residual = problem.residual(theta_hat)?;
    let at_boundary = (theta_hat - lo) <= search.tol_theta || (hi - theta_hat) <= search.tol_theta;
    let converged = !at_boundary
        && residual.abs() <= search.tol_ee
        && golden_bracket.1 - golden_bracket.0 <= search.tol_theta;
    Ok(EstimatorResult {
        theta_hat,
        objective,
        residual,
        iterations,
        converged,
        bracket: golden_bracket,
    })
}

/// Exhaustive grid minimization of the objective; the smallest grid point
/// wins ties.
pub fn oracle_grid_minimize(
    r_n: &DiscreteDensity,
    family: &dyn ParametricFamily,
    p: &TiltParams,
    lo: f64,
    hi: f64,
    pitch: f64,
) -> Result<f64> {
    if !(lo < hi && pitch > 0.0) {
        return Err(LsdError::Usage(format!(
            "invalid grid [{lo}, {hi}] with pitch {pitch}"
        )));
    }
    let problem = FitProblem::new(r_n, family, p, &[lo, hi], DEFAULT_EPS_TAIL)?;
    let steps = ((hi - lo) / pitch).floor() as usize;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=steps {
        let t = lo + pitch * i as f64;
        let v = problem.objective(t)?;
        if v < best.1 {
            best = (t, v);
        }
    }
    Ok(best.0)
}
