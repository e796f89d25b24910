//! Closed-form finite-gap potentials from pole data, and the exact
//! single-gap family used as an oracle throughout the test suites.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::evolution::frequencies;
use crate::fourier::{HardyCoeffs, Potential};
use crate::inverse::potential_from_power_sums;

/// Target trailing mass of the auto-chosen coefficient cut.
pub const COEFF_FLOOR: f64 = 1e-14;

/// N poles q_j strictly inside the punctured unit disc; the associated
/// polynomial prod (1 - q_j z) has no roots on the closed disc.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGapSpec {
    poles: Vec<C64>,
}

impl FiniteGapSpec {
    pub fn new(poles: Vec<C64>) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::InvalidParameter(
                "pole list must not be empty".to_string(),
            ));
        }
        for q in &poles {
            let r = q.norm();
            if r <= 0.0 || r >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "pole modulus {} outside (0, 1)",
                    r
                )));
            }
        }
        Ok(Self { poles })
    }

    pub fn poles(&self) -> &[C64] {
        &self.poles
    }

    pub fn n(&self) -> usize {
        self.poles.len()
    }

    /// Largest pole modulus; controls the coefficient decay.
    pub fn spectral_radius(&self) -> f64 {
        self.poles.iter().map(|q| q.norm()).fold(0.0, f64::max)
    }
}

/// Potential with coefficients uhat(k) = sum_j q_j^k for 1 <= k <= K.
/// The cut K must be deep enough that the dropped tail is below the
/// coefficient floor. Coincident poles are allowed; they merge gaps.
pub fn from_poles(spec: &FiniteGapSpec, k_max: usize) -> Result<Potential> {
    let rho = spec.spectral_radius();
    let tail = spec.n() as f64 * rho.powi(k_max as i32 + 1) / (1.0 - rho * rho).sqrt();
    if tail > COEFF_FLOOR {
        return Err(Error::InvalidParameter(format!(
            "cut K = {} leaves tail mass {:.3e} above the floor {:.1e}",
            k_max, tail, COEFF_FLOOR
        )));
    }
    let mut powers: Vec<C64> = spec.poles.to_vec();
    let mut coeffs = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        coeffs.push(powers.iter().sum());
        for (p, q) in powers.iter_mut().zip(&spec.poles) {
            *p *= q;
        }
    }
    Ok(Potential::new(0.0, coeffs))
}

/// `from_poles` with the cut chosen so the dropped tail mass is below the
/// coefficient floor.
pub fn from_poles_auto(spec: &FiniteGapSpec) -> Potential {
    potential_from_power_sums(spec.poles())
}

/// Potential evaluated through its Poisson-kernel form
/// sum_j (P_(r_j)(x + alpha_j) - 1) with q_j = r_j e^{i alpha_j}.
pub fn poisson_kernel_eval(spec: &FiniteGapSpec, x: f64) -> f64 {
    spec.poles
        .iter()
        .map(|q| {
            let (r, alpha) = (q.norm(), q.arg());
            let y = x + alpha;
            (1.0 - r * r) / (1.0 - 2.0 * r * y.cos() + r * r) - 1.0
        })
        .sum()
}

/// The exact single-open-gap family: all spectral data in closed form.
#[derive(Debug, Clone)]
pub struct OneGap {
    n: usize,
    w: C64,
    gamma: f64,
}

/// Family member with gap at index N and modulus parameter w,
/// u(x) = N w e^{iNx} / (1 - w e^{iNx}) + conjugate.
pub fn one_gap_closed_form(n: usize, w: C64) -> Result<OneGap> {
    if n < 1 {
        return Err(Error::InvalidParameter("gap index must be >= 1".into()));
    }
    let r = w.norm();
    if r <= 0.0 || r >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "|w| = {} outside (0, 1)",
            r
        )));
    }
    let gamma = n as f64 * r * r / (1.0 - r * r);
    Ok(OneGap { n, w, gamma })
}

impl OneGap {
    pub fn gap_index(&self) -> usize {
        self.n
    }

    pub fn w(&self) -> C64 {
        self.w
    }

    /// The single open gap gamma_N = N |w|^2 / (1 - |w|^2).
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// lambda_n = n - gamma_N below the gap, n at and above it.
    pub fn lambda(&self, n: usize) -> f64 {
        if n < self.n {
            n as f64 - self.gamma
        } else {
            n as f64
        }
    }

    /// Coordinates: the single nonzero entry is
    /// zeta_N = -sqrt(N + gamma_N) w.
    pub fn zeta(&self) -> C64 {
        -self.w * (self.n as f64 + self.gamma).sqrt()
    }

    /// Coefficients uhat(k): N w^j at k = jN, zero elsewhere.
    pub fn potential(&self) -> Potential {
        let r = self.w.norm();
        let mut j_max = 1usize;
        while self.n as f64 * r.powi(j_max as i32 + 1) > 1e-17 && j_max < 4096 {
            j_max += 1;
        }
        let mut coeffs = vec![C64::new(0.0, 0.0); self.n * j_max];
        let mut wj = self.w;
        for j in 1..=j_max {
            coeffs[self.n * j - 1] = wj * self.n as f64;
            wj *= self.w;
        }
        Potential::new(0.0, coeffs).trim(0.0)
    }

    /// Eigenfunction coefficient sequence of f_n, truncated at index m_max:
    /// below the gap index, e^{inx} sqrt(1-|w|^2)/(1 - w e^{iNx}); at and
    /// above it, e^{i(n-N)x} ((1-|w|^2) e^{iNx}/(1 - w e^{iNx}) - conj(w)).
    pub fn eigenfunction(&self, n: usize, m_max: usize) -> HardyCoeffs {
        let mut a = vec![C64::new(0.0, 0.0); m_max + 1];
        let nn = self.n;
        let one_minus = 1.0 - self.w.norm_sqr();
        if n < nn {
            let scale = one_minus.sqrt();
            let mut wj = C64::new(1.0, 0.0);
            let mut idx = n;
            while idx <= m_max {
                a[idx] = wj * scale;
                wj *= self.w;
                idx += nn;
            }
        } else {
            let base = n - nn;
            if base <= m_max {
                a[base] = -self.w.conj();
            }
            let mut wj = C64::new(1.0, 0.0);
            let mut idx = base + nn;
            while idx <= m_max {
                a[idx] = wj * one_minus;
                wj *= self.w;
                idx += nn;
            }
        }
        HardyCoeffs::new(a)
    }
}

/// Phase speed of the associated traveling wave, c = omega_N / N evaluated
/// on the single-gap action vector.
pub fn traveling_wave_speed(n: usize, w: C64) -> Result<f64> {
    let og = one_gap_closed_form(n, w)?;
    let mut gammas = vec![0.0; n];
    gammas[n - 1] = og.gamma();
    let omega = frequencies(&gammas);
    Ok(omega.omega(n) / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::fourier::synthesize;
    use crate::spectrum::compute_spectrum;

    #[test]
    fn geometric_coefficients_from_single_pole() {
        let spec = FiniteGapSpec::new(vec![C64::new(0.5, 0.0)]).unwrap();
        let u = from_poles(&spec, 52).unwrap();
        for k in 1..=10 {
            assert_abs_diff_eq!(u.coeff(k).re, 0.5f64.powi(k as i32), epsilon = 1e-16);
        }
    }

    #[test]
    fn opposite_poles_make_a_half_period() {
        let spec = FiniteGapSpec::new(vec![C64::new(0.3, 0.0), C64::new(-0.3, 0.0)]).unwrap();
        let u = from_poles_auto(&spec);
        for k in (1..=9).step_by(2) {
            assert_abs_diff_eq!(u.coeff(k).norm(), 0.0, epsilon = 1e-16);
        }
        assert_abs_diff_eq!(u.coeff(2).re, 2.0 * 0.09, epsilon = 1e-15);
    }

    #[test]
    fn poisson_kernel_form_agrees_on_the_grid() {
        let spec =
            FiniteGapSpec::new(vec![C64::from_polar(0.4, 1.1), C64::from_polar(0.25, -0.3)])
                .unwrap();
        let u = from_poles_auto(&spec);
        let gf = synthesize(&u, 256).unwrap();
        for j in (0..256).step_by(7) {
            let x = gf.x(j);
            assert_abs_diff_eq!(
                gf.values()[j].re,
                poisson_kernel_eval(&spec, x),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn pole_validation() {
        assert!(FiniteGapSpec::new(vec![C64::new(1.0, 0.0)]).is_err());
        assert!(FiniteGapSpec::new(vec![C64::new(0.0, 0.0)]).is_err());
        assert!(FiniteGapSpec::new(vec![]).is_err());
        let spec = FiniteGapSpec::new(vec![C64::new(0.9, 0.0)]).unwrap();
        assert!(from_poles(&spec, 10).is_err()); // cut too shallow
    }

    #[test]
    fn one_gap_family_values() {
        let og = one_gap_closed_form(1, C64::new(0.5, 0.0)).unwrap();
        assert_abs_diff_eq!(og.gamma(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(og.lambda(0), -1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(og.lambda(1), 1.0, epsilon = 1e-15);

        let og = one_gap_closed_form(2, C64::new(0.6, 0.0)).unwrap();
        assert_abs_diff_eq!(og.gamma(), 2.0 * 0.36 / 0.64, epsilon = 1e-15);
        assert_abs_diff_eq!(og.lambda(0), -og.gamma(), epsilon = 1e-15);
        assert_abs_diff_eq!(og.lambda(1), 1.0 - og.gamma(), epsilon = 1e-15);
        assert_abs_diff_eq!(og.lambda(2), 2.0, epsilon = 1e-15);

        assert!(one_gap_closed_form(1, C64::new(1.0, 0.0)).is_err());
        assert!(one_gap_closed_form(0, C64::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn eigensolver_reproduces_the_closed_form() {
        let og = one_gap_closed_form(1, C64::new(0.5, 0.0)).unwrap();
        let spec = compute_spectrum(&og.potential(), 4, 1e-11).unwrap();
        for n in 0..=4 {
            assert_abs_diff_eq!(spec.lambda(n), og.lambda(n), epsilon = 1e-10);
        }
        // closed-gap chain: <1|f_n> = 0 exactly when gamma_n = 0
        for n in 1..=4 {
            let inner = spec.one_f(n).norm();
            if spec.gamma(n) < 1e-10 {
                assert!(inner < 1e-8, "<1|f_{}> = {}", n, inner);
            } else {
                assert!(inner > 1e-3);
            }
        }
    }

    #[test]
    fn closed_form_eigenfunctions_are_orthonormal_eigenvectors() {
        use crate::fourier::lax_matrix;
        let og = one_gap_closed_form(2, C64::from_polar(0.45, 0.7)).unwrap();
        let u = og.potential();
        let m = 160;
        let l = lax_matrix(&u, m).unwrap();
        for n in 0..5 {
            let f = og.eigenfunction(n, m);
            let v = nalgebra::DVector::<C64>::from_column_slice(f.coeffs());
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-10);
            let r = &l * &v - &v * C64::new(og.lambda(n), 0.0);
            // tail truncation dominates the residual
            assert!(r.norm() < 1e-9, "eigen residual {} at n={}", r.norm(), n);
        }
        let f0 = og.eigenfunction(0, m);
        let f1 = og.eigenfunction(1, m);
        assert!(f0.inner(&f1).norm() < 1e-12);
    }

    #[test]
    fn traveling_speed_values() {
        let c = traveling_wave_speed(1, C64::new(0.5, 0.0)).unwrap();
        assert_abs_diff_eq!(c, 1.0 / 3.0, epsilon = 1e-14);
        // zero-amplitude limit approaches the linear phase speed N
        let c = traveling_wave_speed(3, C64::new(1e-8, 0.0)).unwrap();
        assert_abs_diff_eq!(c, 3.0, epsilon = 1e-12);
    }
}
