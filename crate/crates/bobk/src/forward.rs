//! Forward half of the coordinate map: product weights kappa_n and mu_n,
//! the coordinates zeta_n themselves, the generating function in its two
//! representations, and the trace-formula residuals.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fourier::{lax_matrix, Potential};
use crate::spectrum::{compute_spectrum, LaxSpectrum};

/// Actions below this floor leave the angle undefined.
pub const ANGLE_FLOOR: f64 = 1e-12;

/// Minimum distance from a pole accepted by the generating function.
pub const POLE_DIST_FLOOR: f64 = 1e-6;

/// Finite sequence of coordinates zeta_1..zeta_N; the tail is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffCoords {
    zeta: Vec<C64>,
}

impl BirkhoffCoords {
    pub fn new(zeta: Vec<C64>) -> Self {
        Self { zeta }
    }

    pub fn empty() -> Self {
        Self { zeta: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    /// zeta_n, 1-based; zero beyond the stored tail.
    pub fn zeta(&self, n: usize) -> C64 {
        assert!(n >= 1);
        self.zeta.get(n - 1).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn zetas(&self) -> &[C64] {
        &self.zeta
    }

    /// Action gamma_n = |zeta_n|^2.
    pub fn gamma(&self, n: usize) -> f64 {
        self.zeta(n).norm_sqr()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.zeta.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Angle arg(zeta_n); undefined on the zero set of the action.
    pub fn angle(&self, n: usize) -> Option<f64> {
        let z = self.zeta(n);
        if z.norm_sqr() < ANGLE_FLOOR {
            None
        } else {
            Some(z.arg())
        }
    }

    /// Weighted tail norm sum_n n |zeta_n|^2; twice this equals |u|^2.
    pub fn weighted_norm_sq(&self) -> f64 {
        self.zeta
            .iter()
            .enumerate()
            .map(|(i, z)| (i + 1) as f64 * z.norm_sqr())
            .sum()
    }

    /// Distance in the weighted metric, the surrogate used by the
    /// recurrence probe: sqrt(2 sum n |a_n - b_n|^2).
    pub fn weighted_distance(&self, other: &BirkhoffCoords) -> f64 {
        let n = self.len().max(other.len());
        let mut s = 0.0;
        for i in 1..=n {
            s += 2.0 * i as f64 * (self.zeta(i) - other.zeta(i)).norm_sqr();
        }
        s.sqrt()
    }

    /// Drop a trailing run of coordinates with |zeta_n| <= floor.
    pub fn trim(mut self, floor: f64) -> Self {
        while let Some(z) = self.zeta.last() {
            if z.norm() <= floor {
                self.zeta.pop();
            } else {
                break;
            }
        }
        self
    }
}

/// Product weights kappa_0..kappa_n and mu_1..mu_n with the tail of the
/// products treated as closed gaps.
#[derive(Debug, Clone)]
pub struct KappaWeights {
    /// kappa_n for 0 <= n <= n_max.
    pub kappa: Vec<f64>,
    /// mu_n for 1 <= n <= n_max, stored at index n - 1.
    pub mu: Vec<f64>,
    /// Estimated contribution of the truncated product tail.
    pub tail_bound: f64,
}

/// Evaluate the spectral products
///   kappa_0 = prod_p (1 - gamma_p / (lambda_p - lambda_0)),
///   kappa_n = (lambda_n - lambda_0)^-1 prod_{p != n} (1 - gamma_p / (lambda_p - lambda_n)),
///   mu_n    = (1 - gamma_n/(lambda_n - lambda_0))
///             prod_{p != n} (1 - gamma_p/(lambda_p - lambda_n)) / (1 - gamma_p/(lambda_p - lambda_(n-1) - 1)).
///
/// `lambdas[n]` holds lambda_n and `gammas[n-1]` holds gamma_n; the product
/// cut is the length of `gammas`, and gaps beyond it count as zero (exact
/// for finite-gap data).
pub fn kappa_weights(lambdas: &[f64], gammas: &[f64], n_max: usize) -> Result<KappaWeights> {
    let p_cut = gammas.len();
    if lambdas.len() < p_cut + 1 || lambdas.len() < n_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "need lambda_0..lambda_{}, got {}",
            p_cut.max(n_max),
            lambdas.len()
        )));
    }
    for n in 1..lambdas.len() {
        if lambdas[n] - lambdas[n - 1] <= 0.0 {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalues not strictly increasing at n = {}",
                n
            )));
        }
    }

    let mut kappa = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut prod = 1.0f64;
        for p in 1..=p_cut {
            if p == n {
                continue;
            }
            let denom = lambdas[p] - lambdas[n];
            if denom == 0.0 {
                return Err(Error::InvalidSpectrum(format!(
                    "coincident eigenvalues lambda_{} = lambda_{}",
                    p, n
                )));
            }
            prod *= 1.0 - gammas[p - 1] / denom;
        }
        let k = if n == 0 {
            prod
        } else {
            prod / (lambdas[n] - lambdas[0])
        };
        if k <= 0.0 {
            return Err(Error::InvalidSpectrum(format!(
                "kappa_{} = {:.3e} not positive",
                n, k
            )));
        }
        kappa.push(k);
    }

    let mut mu = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut prod = 1.0 - gammas[n - 1] / (lambdas[n] - lambdas[0]);
        for p in 1..=p_cut {
            if p == n {
                continue;
            }
            let gp = gammas[p - 1];
            if gp == 0.0 {
                continue;
            }
            let num = 1.0 - gp / (lambdas[p] - lambdas[n]);
            let den = 1.0 - gp / (lambdas[p] - lambdas[n - 1] - 1.0);
            prod *= num / den;
        }
        mu.push(prod);
    }

    // Mass unaccounted for by the finite products, estimated from the
    // mean trace formula (mean-zero convention) over the separation to
    // the first dropped eigenvalue.
    let kept: f64 = gammas.iter().sum();
    let tail_mass = (-lambdas[0] - kept).max(0.0);
    let dist = ((p_cut + 1) as f64 - lambdas[n_max]).max(1.0);
    let tail_bound = tail_mass / dist;

    Ok(KappaWeights {
        kappa,
        mu,
        tail_bound,
    })
}

/// Map a mean-zero potential to its coordinates zeta_n = <1|f_n>/sqrt(kappa_n)
/// for 1 <= n <= n_max.
pub fn forward_map(u: &Potential, n_max: usize) -> Result<BirkhoffCoords> {
    let spec = compute_spectrum(u, n_max, 1e-10)?;
    forward_map_from_spectrum(u, &spec, n_max)
}

/// Same as `forward_map` but reusing an already computed spectrum.
pub fn forward_map_from_spectrum(
    u: &Potential,
    spec: &LaxSpectrum,
    n_max: usize,
) -> Result<BirkhoffCoords> {
    if u.mean().abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "coordinates are defined for mean-zero potentials, mean = {:.3e}",
            u.mean()
        )));
    }
    if spec.trusted_count() < n_max + 1 {
        return Err(Error::InvalidSpectrum(format!(
            "spectrum trusts only {} eigenpairs, need {}",
            spec.trusted_count(),
            n_max + 1
        )));
    }
    let p_cut = spec.trusted_count() - 1;
    let weights = kappa_weights(spec.lambdas(), &spec.gammas()[..p_cut], n_max)?;
    let zeta = (1..=n_max)
        .map(|n| spec.one_f(n) / C64::new(weights.kappa[n].sqrt(), 0.0))
        .collect();
    Ok(BirkhoffCoords::new(zeta))
}

/// Generating-function value computed the two independent ways.
#[derive(Debug, Clone, Copy)]
pub struct GeneratingValue {
    /// <(L + lambda)^-1 1 | 1> from a dense linear solve.
    pub resolvent: f64,
    /// (lambda_0 + lambda)^-1 prod_n (1 - gamma_n / (lambda_n + lambda)).
    pub product: f64,
}

impl GeneratingValue {
    pub fn abs_diff(&self) -> f64 {
        (self.resolvent - self.product).abs()
    }
}

/// Evaluate the generating function at a real spectral parameter, both as a
/// resolvent matrix element and as the gap product; their difference is a
/// truncation diagnostic.
pub fn generating_function(
    u: &Potential,
    spec: &LaxSpectrum,
    lambda: f64,
) -> Result<GeneratingValue> {
    let trusted = spec.trusted_count();
    for n in 0..trusted {
        let dist = (lambda + spec.lambda(n)).abs();
        if dist < POLE_DIST_FLOOR {
            return Err(Error::PoleProximity { lambda, n, dist });
        }
    }

    let m = spec.m();
    let l = lax_matrix(u, m)?;
    let shifted = &l + nalgebra::DMatrix::<C64>::identity(m + 1, m + 1) * C64::new(lambda, 0.0);
    let mut rhs = nalgebra::DVector::<C64>::zeros(m + 1);
    rhs[0] = C64::new(1.0, 0.0);
    let sol = shifted
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidSpectrum("resolvent solve failed".to_string()))?;
    let resolvent = sol[0].re;

    let mut product = 1.0 / (spec.lambda(0) + lambda);
    for n in 1..trusted {
        product *= 1.0 - spec.gamma(n) / (spec.lambda(n) + lambda);
    }

    Ok(GeneratingValue { resolvent, product })
}

/// Residuals of the two trace identities relating the potential to its
/// gap sequence.
#[derive(Debug, Clone, Copy)]
pub struct TraceResiduals {
    /// | |u|^2 - <u|1>^2 - 2 sum n gamma_n |
    pub norm_residual: f64,
    /// | <u|1> + lambda_0 + sum gamma_n |
    pub mean_residual: f64,
}

pub fn trace_residuals(u: &Potential, spec: &LaxSpectrum) -> TraceResiduals {
    let p = spec.trusted_count().saturating_sub(1);
    let weighted: f64 = spec.gammas()[..p]
        .iter()
        .enumerate()
        .map(|(i, g)| (i + 1) as f64 * g)
        .sum();
    let total: f64 = spec.gammas()[..p].iter().sum();
    TraceResiduals {
        norm_residual: (u.norm_sq() - u.mean() * u.mean() - 2.0 * weighted).abs(),
        mean_residual: (u.mean() + spec.lambda(0) + total).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geometric_potential(q: f64, k: usize) -> Potential {
        Potential::new(0.0, (1..=k).map(|j| C64::new(q.powi(j as i32), 0.0)).collect())
    }

    #[test]
    fn kappa_for_the_free_operator() {
        let lambdas: Vec<f64> = (0..=10).map(|n| n as f64).collect();
        let gammas = vec![0.0; 8];
        let w = kappa_weights(&lambdas, &gammas, 5).unwrap();
        assert_abs_diff_eq!(w.kappa[0], 1.0, epsilon = 1e-15);
        for n in 1..=5 {
            assert_abs_diff_eq!(w.kappa[n], 1.0 / n as f64, epsilon = 1e-15);
            assert_abs_diff_eq!(w.mu[n - 1], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn kappa_for_the_single_gap() {
        // lambda = (-1/3, 1, 2, ...), gamma_1 = 1/3: kappa_0 = kappa_1 = 3/4.
        let mut lambdas: Vec<f64> = (0..=8).map(|n| n as f64).collect();
        lambdas[0] = -1.0 / 3.0;
        let mut gammas = vec![0.0; 6];
        gammas[0] = 1.0 / 3.0;
        let w = kappa_weights(&lambdas, &gammas, 3).unwrap();
        assert_abs_diff_eq!(w.kappa[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(w.kappa[1], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(w.mu[0], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn kappa_consistency_with_eigenvectors() {
        // |<1|f_n>|^2 = gamma_n kappa_n against the eigensolver.
        let u = Potential::new(
            0.0,
            vec![C64::new(0.42, 0.13), C64::new(-0.11, 0.21), C64::new(0.05, -0.02)],
        );
        let spec = compute_spectrum(&u, 5, 1e-10).unwrap();
        let p = spec.trusted_count() - 1;
        let w = kappa_weights(spec.lambdas(), &spec.gammas()[..p], 5).unwrap();
        assert_abs_diff_eq!(spec.one_f(0).norm_sqr(), w.kappa[0], epsilon = 1e-9);
        for n in 1..=5 {
            assert_abs_diff_eq!(
                spec.one_f(n).norm_sqr(),
                spec.gamma(n) * w.kappa[n],
                epsilon = 1e-9
            );
            // <f_(n+1)|S f_n> = sqrt(mu_(n+1)) for n+1 <= 5
            if n < 5 {
                let s = spec.f_shift_f(n);
                assert_abs_diff_eq!(s.re, w.mu[n].sqrt(), epsilon = 1e-8);
                assert_abs_diff_eq!(s.im, 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn forward_map_of_zero_vanishes() {
        let z = forward_map(&Potential::zero(), 4).unwrap();
        for n in 1..=4 {
            assert_abs_diff_eq!(z.zeta(n).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_map_of_single_gap() {
        let u = geometric_potential(0.5, 52);
        let z = forward_map(&u, 3).unwrap();
        assert_abs_diff_eq!(z.zeta(1).re, -1.0 / 3f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(z.zeta(1).im, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(z.gamma(1), 1.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(z.zeta(2).norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn forward_map_translation_phase() {
        let u = geometric_potential(0.5, 52);
        let tau = 0.9;
        let z0 = forward_map(&u, 2).unwrap();
        let zt = forward_map(&u.translate(tau), 2).unwrap();
        let want = z0.zeta(1) * C64::from_polar(1.0, tau);
        assert_abs_diff_eq!((zt.zeta(1) - want).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn forward_map_rejects_nonzero_mean() {
        let u = Potential::new(0.5, vec![C64::new(0.1, 0.0)]);
        assert!(matches!(
            forward_map(&u, 2),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn angles_undefined_on_closed_gaps() {
        let z = BirkhoffCoords::new(vec![C64::new(0.0, 0.0), C64::new(0.3, 0.4)]);
        assert!(z.angle(1).is_none());
        assert_abs_diff_eq!(z.angle(2).unwrap(), 0.4f64.atan2(0.3), epsilon = 1e-15);
    }

    #[test]
    fn generating_function_free_case() {
        let u = Potential::zero();
        let spec = compute_spectrum(&u, 4, 1e-10).unwrap();
        let v = generating_function(&u, &spec, 2.0).unwrap();
        assert_abs_diff_eq!(v.resolvent, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v.product, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn generating_function_single_gap_value() {
        let u = geometric_potential(0.5, 52);
        let spec = compute_spectrum(&u, 6, 1e-10).unwrap();
        let v = generating_function(&u, &spec, 1.0).unwrap();
        assert_abs_diff_eq!(v.resolvent, 1.25, epsilon = 1e-9);
        assert_abs_diff_eq!(v.product, 1.25, epsilon = 1e-9);
    }

    #[test]
    fn generating_function_rejects_pole_proximity() {
        let u = Potential::zero();
        let spec = compute_spectrum(&u, 3, 1e-10).unwrap();
        assert!(matches!(
            generating_function(&u, &spec, -2.0 + 1e-9),
            Err(Error::PoleProximity { .. })
        ));
    }

    #[test]
    fn trace_residuals_vanish_for_zero() {
        let u = Potential::zero();
        let spec = compute_spectrum(&u, 3, 1e-10).unwrap();
        let r = trace_residuals(&u, &spec);
        assert_abs_diff_eq!(r.norm_residual, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.mean_residual, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_residuals_single_gap() {
        // |u|^2 = 2 sum 4^-k = 2/3 matches 2 * 1 * gamma_1.
        let u = geometric_potential(0.5, 52);
        let spec = compute_spectrum(&u, 4, 1e-10).unwrap();
        let r = trace_residuals(&u, &spec);
        assert!(r.norm_residual < 1e-8, "norm residual {}", r.norm_residual);
        assert!(r.mean_residual < 1e-8, "mean residual {}", r.mean_residual);
    }

    #[test]
    fn parseval_for_random_band_limited() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let coeffs: Vec<C64> = (1..=8)
            .map(|k| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    * 0.5f64.powi(k)
            })
            .collect();
        let u = Potential::new(0.0, coeffs);
        let spec = compute_spectrum(&u, 12, 1e-10).unwrap();
        let n_big = spec.trusted_count() - 1;
        let z = forward_map_from_spectrum(&u, &spec, n_big).unwrap();
        let lhs = 2.0 * z.weighted_norm_sq();
        assert!(
            (lhs - u.norm_sq()).abs() <= 1e-8 * (1.0 + u.norm_sq()),
            "parseval defect {}",
            (lhs - u.norm_sq()).abs()
        );
    }

    #[test]
    fn even_potential_has_real_coordinates() {
        let u = Potential::new(0.0, vec![C64::new(0.4, 0.0), C64::new(-0.15, 0.0)]);
        let z = forward_map(&u, 4).unwrap();
        for n in 1..=4 {
            assert!(z.zeta(n).im.abs() < 1e-9, "Im zeta_{} = {}", n, z.zeta(n).im);
        }
    }

    #[test]
    fn period_halving_closes_odd_gaps() {
        // pi-periodic potential: only even harmonics present.
        let u = Potential::new(
            0.0,
            vec![C64::new(0.0, 0.0), C64::new(0.3, 0.1), C64::new(0.0, 0.0), C64::new(0.05, -0.02)],
        );
        let z = forward_map(&u, 6).unwrap();
        for n in [1usize, 3, 5] {
            assert!(z.zeta(n).norm() < 1e-9, "zeta_{} = {}", n, z.zeta(n).norm());
        }
        assert!(z.zeta(2).norm() > 1e-3);
    }
}
