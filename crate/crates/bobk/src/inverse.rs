//! Inverse half of the coordinate map: rebuild the spectral data from the
//! coordinates alone, then recover the potential either through the
//! characteristic polynomial of the truncated shift matrix or through
//! resolvent sampling inside the unit disc.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::forward::{kappa_weights, BirkhoffCoords};
use crate::fourier::Potential;

/// Reconstruction poles must stay inside the disc by this margin.
pub const ROOT_FLOOR: f64 = 1e-6;

/// Sampling radius of the resolvent path.
const SAMPLE_RADIUS: f64 = 0.5;

/// Largest harmonic the resolvent path will read back; the r^-k rescaling
/// exhausts double precision near this index.
const RESOLVENT_K_CAP: usize = 50;

/// Trailing coordinates below this are treated as an exact zero tail.
const TAIL_FLOOR: f64 = 1e-13;

/// Spectral data of a finite-gap potential rebuilt from its coordinates:
/// eigenvalues, gaps, product weights, the first eigenfunction components
/// and the shift operator expressed in the eigenbasis.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// lambda_0..lambda_N.
    pub lambdas: Vec<f64>,
    /// gamma_1..gamma_N at index n-1.
    pub gammas: Vec<f64>,
    /// kappa_0..kappa_N.
    pub kappas: Vec<f64>,
    /// mu_1..mu_N at index n-1.
    pub mus: Vec<f64>,
    /// <1|f_n> for 0 <= n <= N.
    pub one_fn: Vec<C64>,
    /// (N+1) x (N+1) block of the shift operator in the eigenbasis.
    /// Rows 0..N-1 hold all their mass inside the block; row N belongs to
    /// the pure-shift tail and is zero within the truncation.
    pub mmat: DMatrix<C64>,
}

/// Rebuild all spectral data from a finite coordinate sequence.
///
/// Entries: gamma_n = |zeta_n|^2, lambda_n = n - sum_{k>n} gamma_k, the
/// product weights from `kappa_weights`, and the shift-matrix rows
///   M_np = delta_{p,n+1}                                    (zeta_(n+1) = 0)
///   M_np = sqrt(mu_(n+1)) gamma_(n+1) <f_p|1> / ((lambda_p - lambda_n - 1) <f_(n+1)|1>)
/// otherwise.
pub fn spectral_data_from_zeta(z: &BirkhoffCoords) -> Result<SpectralData> {
    let n_gaps = z.len();
    let gammas: Vec<f64> = z.gammas();
    let total: f64 = gammas.iter().sum();

    let mut lambdas = Vec::with_capacity(n_gaps + 1);
    let mut tail = total;
    for n in 0..=n_gaps {
        lambdas.push(n as f64 - tail);
        if n < n_gaps {
            tail -= gammas[n];
        }
    }

    let weights = kappa_weights(&lambdas, &gammas, n_gaps)?;

    let mut one_fn = Vec::with_capacity(n_gaps + 1);
    one_fn.push(C64::new(weights.kappa[0].sqrt(), 0.0));
    for n in 1..=n_gaps {
        one_fn.push(C64::new(weights.kappa[n].sqrt(), 0.0) * z.zeta(n));
    }

    let size = n_gaps + 1;
    let mut mmat = DMatrix::<C64>::zeros(size, size);
    for n in 0..n_gaps {
        if z.zeta(n + 1).norm() == 0.0 {
            mmat[(n, n + 1)] = C64::new(1.0, 0.0);
            continue;
        }
        let scale = C64::new(weights.mu[n].sqrt() * gammas[n], 0.0) / one_fn[n + 1].conj();
        for p in 0..size {
            let f_p = one_fn[p].conj();
            if f_p.norm() == 0.0 {
                continue;
            }
            mmat[(n, p)] = scale * f_p / C64::new(lambdas[p] - lambdas[n] - 1.0, 0.0);
        }
    }

    Ok(SpectralData {
        lambdas,
        gammas,
        kappas: weights.kappa,
        mus: weights.mu,
        one_fn,
        mmat,
    })
}

/// Poles q_j of the reconstructed potential: the eigenvalues of the leading
/// N x N block of the shift matrix, computed from its power sums. Errors
/// when a pole reaches the unit circle.
pub fn disc_poles(sd: &SpectralData) -> Result<Vec<C64>> {
    let n = sd.lambdas.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let block = sd.mmat.view((0, 0), (n, n)).clone_owned();

    // power sums p_k = tr(block^k), then Newton's identities for the
    // elementary symmetric functions of the poles
    let mut power = DMatrix::<C64>::identity(n, n);
    let mut psums = Vec::with_capacity(n);
    for _ in 0..n {
        power = &power * &block;
        psums.push(power.trace());
    }
    let mut elem = vec![C64::new(1.0, 0.0)];
    for k in 1..=n {
        let mut acc = C64::new(0.0, 0.0);
        let mut sign = 1.0;
        for i in 1..=k {
            acc += C64::new(sign, 0.0) * elem[k - i] * psums[i - 1];
            sign = -sign;
        }
        elem.push(acc / C64::new(k as f64, 0.0));
    }

    // roots of the monic polynomial w^N - e1 w^(N-1) + e2 w^(N-2) - ...,
    // leading coefficient first
    let coeffs: Vec<C64> = (0..=n)
        .map(|k| elem[k] * C64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
        .collect();
    let roots = durand_kerner(&coeffs)?;

    for q in &roots {
        if q.norm() >= 1.0 / (1.0 + ROOT_FLOOR) {
            return Err(Error::InconsistentCoordinates { abs_q: q.norm() });
        }
    }
    Ok(roots)
}

/// Roots of a monic polynomial given by coefficients of w^N, ..., w^0.
fn durand_kerner(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    let eval = |w: C64| -> C64 {
        let mut v = C64::new(0.0, 0.0);
        for c in coeffs {
            v = v * w + c;
        }
        v
    };
    let mut roots: Vec<C64> = (0..n)
        .map(|j| C64::from_polar(0.7, 0.3 + crate::fourier::TWO_PI * j as f64 / n as f64))
        .collect();
    for _ in 0..400 {
        let mut moved = 0.0f64;
        for j in 0..n {
            let mut denom = C64::new(1.0, 0.0);
            for i in 0..n {
                if i != j {
                    denom *= roots[j] - roots[i];
                }
            }
            if denom.norm() == 0.0 {
                // coincident iterates: nudge apart
                roots[j] += C64::new(1e-8, 1e-8);
                continue;
            }
            let delta = eval(roots[j]) / denom;
            roots[j] -= delta;
            moved = moved.max(delta.norm());
        }
        if moved < 1e-13 {
            return Ok(roots);
        }
    }
    Err(Error::InvalidSpectrum(
        "polynomial root iteration did not settle".to_string(),
    ))
}

/// Exact finite-gap inversion through the characteristic polynomial of the
/// truncated shift block: the potential's coefficients are the power sums
/// of its eigenvalues, uhat(k) = sum_j q_j^k.
pub fn reconstruct_finite_gap(z: &BirkhoffCoords) -> Result<Potential> {
    let z = z.clone().trim(TAIL_FLOOR);
    if z.is_empty() {
        return Ok(Potential::zero());
    }
    let sd = spectral_data_from_zeta(&z)?;
    let poles = disc_poles(&sd)?;
    Ok(potential_from_power_sums(&poles))
}

pub(crate) fn potential_from_power_sums(poles: &[C64]) -> Potential {
    if poles.is_empty() {
        return Potential::zero();
    }
    let rho = poles.iter().map(|q| q.norm()).fold(0.0f64, f64::max);
    let n = poles.len() as f64;
    let mut k_max = 8usize;
    while n * rho.powi(k_max as i32 + 1) / (1.0 - rho * rho).sqrt() > 5e-15 && k_max < 4096 {
        k_max += 1;
    }
    let mut powers: Vec<C64> = poles.to_vec();
    let mut coeffs = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        coeffs.push(powers.iter().sum());
        for (p, q) in powers.iter_mut().zip(poles) {
            *p *= q;
        }
    }
    Potential::new(0.0, coeffs).trim(0.0)
}

/// Independent inversion path: sample the disc extension of the projected
/// potential at |z| = 1/2 through linear solves with the rebuilt shift
/// matrix, then read the coefficients off a discrete Fourier transform with
/// the r^-k rescaling. Coefficients below the sampling noise floor are
/// dropped; the usable range ends near k = 50 in double precision.
pub fn reconstruct_resolvent(z: &BirkhoffCoords) -> Result<Potential> {
    let z = z.clone().trim(TAIL_FLOOR);
    if z.is_empty() {
        return Ok(Potential::zero());
    }
    let sd = spectral_data_from_zeta(&z)?;
    let n = z.len();
    let size = n + 1;

    let x = DVector::<C64>::from_iterator(
        size,
        (0..size).map(|p| -C64::new(sd.lambdas[p], 0.0) * sd.one_fn[p]),
    );

    let n_samples = (4 * n + 16).max(32);
    let mut vals = vec![C64::new(0.0, 0.0); n_samples];
    let id = DMatrix::<C64>::identity(size, size);
    for (j, val) in vals.iter_mut().enumerate() {
        let zc = C64::from_polar(SAMPLE_RADIUS, crate::fourier::TWO_PI * j as f64 / n_samples as f64);
        let a = &id - &sd.mmat * zc;
        let sol = a.clone().lu().solve(&x).ok_or(Error::IllConditioned {
            radius: SAMPLE_RADIUS,
            residual: f64::INFINITY,
        })?;
        let resid = (&a * &sol - &x).norm() / (1.0 + x.norm());
        if resid > 1e-8 {
            return Err(Error::IllConditioned {
                radius: SAMPLE_RADIUS,
                residual: resid,
            });
        }
        *val = sol
            .iter()
            .zip(sd.one_fn.iter())
            .map(|(xi, y)| xi * y.conj())
            .sum();
    }

    let scale = vals.iter().map(|v| v.norm()).fold(1.0f64, f64::max);
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n_samples).process(&mut vals);
    let floor = 64.0 * f64::EPSILON * scale;
    let mut coeffs = Vec::new();
    for k in 1..=RESOLVENT_K_CAP.min(n_samples - 1) {
        let ck = vals[k] / n_samples as f64;
        if ck.norm() < floor {
            break;
        }
        coeffs.push(ck / C64::new(SAMPLE_RADIUS.powi(k as i32), 0.0));
    }
    Ok(Potential::new(0.0, coeffs))
}
