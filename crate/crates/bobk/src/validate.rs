//! Numerical verification of the gradient formulas, the canonical
//! relations under the Gardner bracket, and the symmetry identities,
//! plus the named suites the command line exposes.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{forward_map, forward_map_from_spectrum, ANGLE_FLOOR};
use crate::fourier::Potential;
use crate::spectrum::{compute_spectrum, LaxSpectrum};

/// Functional whose gradient enters a bracket evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// Eigenvalue lambda_n, n >= 0. Gradient is -|f_n|^2, analytic.
    Lambda(usize),
    /// Gap gamma_n, n >= 1. Gradient is -|f_n|^2 + |f_(n-1)|^2, analytic.
    Gamma(usize),
    /// Coordinate zeta_n, n >= 1. Gradient by central differences.
    Zeta(usize),
    /// Conjugate coordinate, gradient derived from Zeta's.
    ZetaConj(usize),
    /// Angle arg zeta_n; finite differences of the argument with wrap
    /// correction. Defined only where gamma_n > 0.
    Phi(usize),
    /// First eigenfunction component <1|f_n>, by central differences.
    OneF(usize),
}

impl Observable {
    fn index(&self) -> usize {
        match *self {
            Observable::Lambda(n) => n,
            Observable::Gamma(n)
            | Observable::Zeta(n)
            | Observable::ZetaConj(n)
            | Observable::Phi(n)
            | Observable::OneF(n) => n,
        }
    }
}

/// Evaluation parameters for gradients and brackets.
#[derive(Debug, Clone)]
pub struct BracketConfig {
    /// Gradients are resolved on harmonics |k| <= k_trunc.
    pub k_trunc: usize,
    /// Central-difference step for the finite-difference gradients.
    pub fd_step: f64,
    /// Eigensolver tolerance.
    pub tol: f64,
}

impl Default for BracketConfig {
    fn default() -> Self {
        Self {
            k_trunc: 16,
            fd_step: 1e-4,
            tol: 1e-10,
        }
    }
}

/// Two-sided Fourier coefficients of an L^2 gradient, |k| <= k_trunc.
/// The k = 0 entry plays no role in the bracket (the pairing carries a
/// factor ik) and is left at zero for the finite-difference paths.
#[derive(Debug, Clone)]
pub struct GradientCoeffs {
    k_trunc: usize,
    g: Vec<C64>,
}

impl GradientCoeffs {
    pub fn k_trunc(&self) -> usize {
        self.k_trunc
    }

    pub fn coeff(&self, k: i64) -> C64 {
        if k.unsigned_abs() as usize > self.k_trunc {
            return C64::new(0.0, 0.0);
        }
        self.g[(k + self.k_trunc as i64) as usize]
    }

    /// Assemble from the pairings with the direction set
    /// {cos kx, sin kx}: with gc = <g, cos kx> and gs = <g, sin kx> the
    /// two-sided coefficients are g(k) = gc - i gs and g(-k) = gc + i gs.
    fn from_pairings(pairings: &[(C64, C64)]) -> Self {
        let k_trunc = pairings.len();
        let mut g = vec![C64::new(0.0, 0.0); 2 * k_trunc + 1];
        for (i, (gc, gs)) in pairings.iter().enumerate() {
            let k = i + 1;
            g[k_trunc + k] = gc - C64::new(0.0, 1.0) * gs;
            g[k_trunc - k] = gc + C64::new(0.0, 1.0) * gs;
        }
        Self { k_trunc, g }
    }

    /// Gradient of the complex conjugate functional.
    pub fn conjugated(&self) -> Self {
        let n = self.g.len();
        let g = (0..n).map(|i| self.g[n - 1 - i].conj()).collect();
        Self {
            k_trunc: self.k_trunc,
            g,
        }
    }

    /// Directional pairing <g, v> for a real direction cos kx / sin kx.
    pub fn pair_cos(&self, k: usize) -> C64 {
        (self.coeff(k as i64) + self.coeff(-(k as i64))) * 0.5
    }

    pub fn pair_sin(&self, k: usize) -> C64 {
        (self.coeff(-(k as i64)) - self.coeff(k as i64)) * C64::new(0.0, -0.5)
    }
}

/// Gardner pairing of two gradients:
/// {F, G} = (1/2pi) int (d/dx grad F) grad G dx = sum_k ik gF(k) gG(-k).
pub fn bracket_from_gradients(gf: &GradientCoeffs, gg: &GradientCoeffs) -> C64 {
    let k_max = gf.k_trunc.max(gg.k_trunc) as i64;
    let mut acc = C64::new(0.0, 0.0);
    for k in -k_max..=k_max {
        acc += C64::new(0.0, k as f64) * gf.coeff(k) * gg.coeff(-k);
    }
    acc
}

fn eigen_gradient_coeffs(spec: &LaxSpectrum, n: usize, k_trunc: usize) -> GradientCoeffs {
    // grad lambda_n = -|f_n|^2: coefficient k is -sum_m a_(m+k) conj(a_m)
    let rows = spec.eigvecs().nrows();
    let mut g = vec![C64::new(0.0, 0.0); 2 * k_trunc + 1];
    for k in -(k_trunc as i64)..=k_trunc as i64 {
        let mut s = C64::new(0.0, 0.0);
        for m in 0..rows as i64 {
            let shifted = m + k;
            if shifted >= 0 && shifted < rows as i64 {
                s += spec.eigvecs()[(shifted as usize, n)] * spec.eigvecs()[(m as usize, n)].conj();
            }
        }
        g[(k + k_trunc as i64) as usize] = -s;
    }
    GradientCoeffs { k_trunc, g }
}

fn direction(k: usize, sine: bool) -> Potential {
    let mut coeffs = vec![C64::new(0.0, 0.0); k];
    coeffs[k - 1] = if sine {
        C64::new(0.0, -0.5)
    } else {
        C64::new(0.5, 0.0)
    };
    Potential::new(0.0, coeffs)
}

fn wrap_angle(d: f64) -> f64 {
    let mut d = d % TWO_PI_F;
    if d > std::f64::consts::PI {
        d -= TWO_PI_F;
    } else if d < -std::f64::consts::PI {
        d += TWO_PI_F;
    }
    d
}

const TWO_PI_F: f64 = 2.0 * std::f64::consts::PI;

/// L^2 gradient of an observable at `u`, resolved on |k| <= cfg.k_trunc.
pub fn observable_gradient(
    u: &Potential,
    obs: Observable,
    cfg: &BracketConfig,
) -> Result<GradientCoeffs> {
    let n = obs.index();
    match obs {
        Observable::Lambda(_) | Observable::Gamma(_) => {
            let spec = compute_spectrum(u, n, cfg.tol)?;
            Ok(match obs {
                Observable::Lambda(_) => eigen_gradient_coeffs(&spec, n, cfg.k_trunc),
                _ => {
                    let gn = eigen_gradient_coeffs(&spec, n, cfg.k_trunc);
                    let gp = eigen_gradient_coeffs(&spec, n - 1, cfg.k_trunc);
                    let g = gn
                        .g
                        .iter()
                        .zip(&gp.g)
                        .map(|(a, b)| a - b)
                        .collect();
                    GradientCoeffs {
                        k_trunc: cfg.k_trunc,
                        g,
                    }
                }
            })
        }
        Observable::ZetaConj(_) => {
            let gz = observable_gradient(u, Observable::Zeta(n), cfg)?;
            Ok(gz.conjugated())
        }
        Observable::Zeta(_) | Observable::Phi(_) | Observable::OneF(_) => {
            if matches!(obs, Observable::Phi(_)) {
                let z = forward_map(u, n)?;
                if z.gamma(n) < ANGLE_FLOOR {
                    return Err(Error::UndefinedAngle {
                        n,
                        gamma: z.gamma(n),
                    });
                }
            }
            let h = cfg.fd_step;
            let pairings: Result<Vec<(C64, C64)>> = (1..=cfg.k_trunc)
                .into_par_iter()
                .map(|k| -> Result<(C64, C64)> {
                    let mut out = [C64::new(0.0, 0.0); 2];
                    for (slot, sine) in [(0usize, false), (1usize, true)] {
                        let v = direction(k, sine);
                        let plus = eval_complex(&u.add_scaled(&v, h), obs, cfg)?;
                        let minus = eval_complex(&u.add_scaled(&v, -h), obs, cfg)?;
                        out[slot] = match obs {
                            Observable::Phi(_) => {
                                let d = wrap_angle(plus.re - minus.re);
                                C64::new(d / (2.0 * h), 0.0)
                            }
                            _ => (plus - minus) / (2.0 * h),
                        };
                    }
                    Ok((out[0], out[1]))
                })
                .collect();
            Ok(GradientCoeffs::from_pairings(&pairings?))
        }
    }
}

/// Evaluate the observable as a complex number (angles are stored in the
/// real part).
fn eval_complex(u: &Potential, obs: Observable, cfg: &BracketConfig) -> Result<C64> {
    let n = obs.index();
    match obs {
        Observable::Lambda(_) => {
            let spec = compute_spectrum(u, n, cfg.tol)?;
            Ok(C64::new(spec.lambda(n), 0.0))
        }
        Observable::Gamma(_) => {
            let spec = compute_spectrum(u, n, cfg.tol)?;
            Ok(C64::new(spec.gamma(n), 0.0))
        }
        Observable::Zeta(_) => Ok(forward_map(u, n)?.zeta(n)),
        Observable::ZetaConj(_) => Ok(forward_map(u, n)?.zeta(n).conj()),
        Observable::Phi(_) => {
            let z = forward_map(u, n)?.zeta(n);
            Ok(C64::new(z.arg(), 0.0))
        }
        Observable::OneF(_) => {
            let spec = compute_spectrum(u, n, cfg.tol)?;
            Ok(spec.one_f(n))
        }
    }
}

/// Gardner bracket {F, G}(u) of two observables.
pub fn poisson_bracket(f: Observable, g: Observable, u: &Potential) -> Result<C64> {
    poisson_bracket_with(f, g, u, &BracketConfig::default())
}

pub fn poisson_bracket_with(
    f: Observable,
    g: Observable,
    u: &Potential,
    cfg: &BracketConfig,
) -> Result<C64> {
    let gf = observable_gradient(u, f, cfg)?;
    let gg = observable_gradient(u, g, cfg)?;
    Ok(bracket_from_gradients(&gf, &gg))
}

/// Outcome of comparing the analytic gradient formulas against central
/// finite differences over the direction set {cos kx, sin kx}.
#[derive(Debug, Clone, Serialize)]
pub struct GradientCheck {
    /// Worst scaled mismatch for the eigenvalue gradient.
    pub lambda_residual: f64,
    /// Worst scaled mismatch for the gap gradient.
    pub gamma_residual: f64,
    /// Mismatch of the coordinate gradient at the origin; present only
    /// when the check runs at u = 0.
    pub zeta_origin_residual: Option<f64>,
}

/// Compare the analytic gradients of lambda_n and gamma_n against central
/// differences with step `h_step`, on directions k <= max(3, K).
/// Mismatches are scaled by 1 + |analytic value|.
pub fn gradient_check(u: &Potential, n: usize, h_step: f64) -> Result<GradientCheck> {
    if !(1e-7..=1e-2).contains(&h_step) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step {} outside [1e-7, 1e-2]",
            h_step
        )));
    }
    let k_test = u.k_max().clamp(3, 6);
    let cfg = BracketConfig {
        k_trunc: k_test,
        fd_step: h_step,
        tol: 1e-11,
    };
    let n_spec = n.max(1);
    let spec = compute_spectrum(u, n_spec, cfg.tol)?;
    let g_lam = eigen_gradient_coeffs(&spec, n, k_test);
    let g_gam = if n >= 1 {
        Some(observable_gradient(u, Observable::Gamma(n), &cfg)?)
    } else {
        None
    };

    let mut worst_lambda = 0.0f64;
    let mut worst_gamma = 0.0f64;
    for k in 1..=k_test {
        for sine in [false, true] {
            let v = direction(k, sine);
            let sp = compute_spectrum(&u.add_scaled(&v, h_step), n_spec, cfg.tol)?;
            let sm = compute_spectrum(&u.add_scaled(&v, -h_step), n_spec, cfg.tol)?;
            let fd_l = (sp.lambda(n) - sm.lambda(n)) / (2.0 * h_step);
            let an_l = if sine { g_lam.pair_sin(k) } else { g_lam.pair_cos(k) }.re;
            worst_lambda = worst_lambda.max((fd_l - an_l).abs() / (1.0 + an_l.abs()));
            if let Some(gg) = &g_gam {
                let fd_g = (sp.gamma(n) - sm.gamma(n)) / (2.0 * h_step);
                let an_g = if sine { gg.pair_sin(k) } else { gg.pair_cos(k) }.re;
                worst_gamma = worst_gamma.max((fd_g - an_g).abs() / (1.0 + an_g.abs()));
            }
        }
    }

    // at the origin the coordinate gradient is -e^{-inx}/sqrt(n)
    let zeta_origin_residual = if u.norm() == 0.0 && n >= 1 {
        let mut worst = 0.0f64;
        for (k, sine) in [(n, false), (n, true), (n + 1, false)] {
            if k == 0 {
                continue;
            }
            let v = direction(k, sine);
            let zp = forward_map(&u.add_scaled(&v, h_step), n)?.zeta(n);
            let zm = forward_map(&u.add_scaled(&v, -h_step), n)?.zeta(n);
            let fd = (zp - zm) / (2.0 * h_step);
            // pairing of -e^{-inx}/sqrt(n) with the direction
            let scale = 0.5 / (n as f64).sqrt();
            let want = if k != n {
                C64::new(0.0, 0.0)
            } else if sine {
                C64::new(0.0, scale)
            } else {
                C64::new(-scale, 0.0)
            };
            worst = worst.max((fd - want).norm());
        }
        Some(worst)
    } else {
        None
    };

    Ok(GradientCheck {
        lambda_residual: worst_lambda,
        gamma_residual: worst_gamma,
        zeta_origin_residual,
    })
}

/// One verified identity inside a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub label: String,
    /// The identity being measured, written as a formula.
    pub identity: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn new(label: &str, identity: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            label: label.to_string(),
            identity: identity.to_string(),
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

/// Environment a report was produced under.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunEnv {
    pub truncation: usize,
    pub grid: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub suite: String,
    pub checks: Vec<CheckResult>,
    pub env: RunEnv,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn sorted(mut self) -> Self {
        self.checks.sort_by(|a, b| a.label.cmp(&b.label));
        self
    }
}

/// Symmetry identities of the coordinate map evaluated on `u`:
/// translation covariance, reflection conjugation, closed gaps of
/// periodic sub-lattices, and the action bracket of <1|f_n>.
pub fn symmetry_suite(u: &Potential) -> Result<ValidationReport> {
    let n_max = 4usize;
    let tol_sym = 1e-8;
    let tol_bracket = 1e-4;
    let spec = compute_spectrum(u, n_max, 1e-11)?;
    let z = forward_map_from_spectrum(u, &spec, n_max)?;
    let mut checks = Vec::new();

    // translation covariance
    let tau = 0.7;
    let zt = forward_map(&u.translate(tau), n_max)?;
    let mut worst = 0.0f64;
    for n in 1..=n_max {
        let want = z.zeta(n) * C64::from_polar(1.0, n as f64 * tau);
        worst = worst.max((zt.zeta(n) - want).norm());
    }
    checks.push(CheckResult::new(
        "translation",
        "zeta_n(u(. + tau)) = e^{i n tau} zeta_n(u)",
        worst,
        tol_sym,
    ));

    // reflection sends coordinates to their conjugates
    let zr = forward_map(&u.reflect(), n_max)?;
    let mut worst = 0.0f64;
    for n in 1..=n_max {
        worst = worst.max((zr.zeta(n) - z.zeta(n).conj()).norm());
    }
    checks.push(CheckResult::new(
        "reflection",
        "zeta_n(u(-.)) = conj(zeta_n(u))",
        worst,
        tol_sym,
    ));

    // an even potential has real coordinates
    let is_even = u.coeffs().iter().all(|c| c.im.abs() < 1e-14);
    if is_even {
        let worst = (1..=n_max).map(|n| z.zeta(n).im.abs()).fold(0.0, f64::max);
        checks.push(CheckResult::new(
            "even-real",
            "u even => zeta_n real",
            worst,
            tol_sym,
        ));
    }

    // sub-lattice periodicity closes the other gaps
    let period = harmonic_gcd(u);
    if period >= 2 {
        let worst = (1..=n_max)
            .filter(|n| n % period != 0)
            .map(|n| z.zeta(n).norm())
            .fold(0.0, f64::max);
        checks.push(CheckResult::new(
            "sub-periodicity",
            "u is (2pi/K)-periodic => zeta_m = 0 for K not dividing m",
            worst,
            tol_sym,
        ));
    }

    // {gamma_p, <1|f_n>} = i <1|f_n> delta_pn
    let cfg = BracketConfig::default();
    let mut worst = 0.0f64;
    for p in 1..=2usize {
        let gp = observable_gradient(u, Observable::Gamma(p), &cfg)?;
        for n in 1..=2usize {
            let gf = observable_gradient(u, Observable::OneF(n), &cfg)?;
            let br = bracket_from_gradients(&gp, &gf);
            let want = if p == n {
                C64::new(0.0, 1.0) * spec.one_f(n)
            } else {
                C64::new(0.0, 0.0)
            };
            worst = worst.max((br - want).norm());
        }
    }
    checks.push(CheckResult::new(
        "action-onef-bracket",
        "{gamma_p, <1|f_n>} = i <1|f_n> delta_pn",
        worst,
        tol_bracket,
    ));

    Ok(ValidationReport {
        suite: "symmetry".to_string(),
        checks,
        env: RunEnv {
            truncation: spec.m(),
            grid: 0,
            seed: 0,
        },
    }
    .sorted())
}

/// Largest K >= 1 dividing every harmonic carrying mass.
fn harmonic_gcd(u: &Potential) -> usize {
    let mut g = 0usize;
    for (i, c) in u.coeffs().iter().enumerate() {
        if c.norm() > 1e-14 {
            g = gcd(g, i + 1);
        }
    }
    g.max(1)
}

fn gcd(a: usize, b: usize) -> usize {
    if a == 0 {
        b
    } else {
        gcd(b % a, a)
    }
}
