//! Truncated eigenproblem for the Lax operator: ordering, convergence
//! control by doubling, phase normalization and band reports.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fourier::{lax_matrix, Potential};

/// Unit-magnitude rotations below this floor abort phase normalization.
pub const PHASE_FLOOR: f64 = 1e-8;

/// Eigenvalues, gaps and phase-normalized eigenvectors of the truncated
/// Lax matrix, together with convergence metadata.
#[derive(Debug, Clone)]
pub struct LaxSpectrum {
    m: usize,
    lambdas: Vec<f64>,
    gaps: Vec<f64>,
    eigvecs: DMatrix<C64>,
    trusted: usize,
    residuals: Vec<f64>,
}

impl LaxSpectrum {
    /// Truncation of the reported solve.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lambda(&self, n: usize) -> f64 {
        self.lambdas[n]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// gamma_n = lambda_n - lambda_(n-1) - 1 for n >= 1.
    pub fn gamma(&self, n: usize) -> f64 {
        assert!(n >= 1);
        self.gaps[n - 1]
    }

    /// Slice of gamma_1..gamma_m (index n-1).
    pub fn gammas(&self) -> &[f64] {
        &self.gaps
    }

    /// Index below which eigenpairs passed both the doubling and the
    /// residual test.
    pub fn trusted_count(&self) -> usize {
        self.trusted
    }

    pub fn residual(&self, n: usize) -> f64 {
        self.residuals[n]
    }

    /// Eigenvector coefficients of f_n in the e^{imx} basis.
    pub fn eigvec(&self, n: usize) -> Vec<C64> {
        self.eigvecs.column(n).iter().copied().collect()
    }

    pub fn eigvecs(&self) -> &DMatrix<C64> {
        &self.eigvecs
    }

    /// <1|f_n>, the conjugate of the constant coefficient of f_n.
    pub fn one_f(&self, n: usize) -> C64 {
        self.eigvecs[(0, n)].conj()
    }

    /// <f_(n+1)|S f_n> = sum_{m>=1} a^(n+1)_m conj(a^n_(m-1)).
    pub fn f_shift_f(&self, n: usize) -> C64 {
        let rows = self.eigvecs.nrows();
        (1..rows)
            .map(|m| self.eigvecs[(m, n + 1)] * self.eigvecs[(m - 1, n)].conj())
            .sum()
    }
}

/// Convergence policy for `compute_spectrum_with`.
#[derive(Debug, Clone)]
pub struct SpectrumConfig {
    /// Doubling target |lambda_n(M) - lambda_n(2M)| < tol for n <= n_max.
    pub tol: f64,
    pub max_doublings: usize,
    /// Starting truncation; defaults to max(4K, 2 n_max + 16).
    pub m_init: Option<usize>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_doublings: 6,
            m_init: None,
        }
    }
}

fn sorted_eigen(l: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let ee = l.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..ee.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| ee.eigenvalues[a].partial_cmp(&ee.eigenvalues[b]).unwrap());
    let lambdas: Vec<f64> = idx.iter().map(|&i| ee.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<C64>::zeros(ee.eigenvectors.nrows(), ee.eigenvectors.ncols());
    for (j, &i) in idx.iter().enumerate() {
        vecs.set_column(j, &ee.eigenvectors.column(i));
    }
    (lambdas, vecs)
}

/// Residual |(L - lambda) v| against the semi-infinite operator; exact for
/// vectors supported on the truncated range since u is band-limited.
fn exact_residual(u: &Potential, lambda: f64, v: &[C64]) -> f64 {
    let m = v.len() - 1;
    let k = u.k_max();
    let mut s = 0.0;
    for row in 0..=m + k {
        let mut acc = C64::new(0.0, 0.0);
        let lo = row.saturating_sub(k);
        let hi = (row + k).min(m);
        for col in lo..=hi {
            let diag = if row == col { row as f64 } else { 0.0 };
            let entry = C64::new(diag, 0.0) - u.coeff(row as i64 - col as i64);
            acc += entry * v[col];
        }
        if row <= m {
            acc -= C64::new(lambda, 0.0) * v[row];
        }
        s += acc.norm_sqr();
    }
    s.sqrt()
}

/// Rotate eigenvector columns to the canonical phases: <1|f_0> real
/// positive, then inductively <f_(n+1)|S f_n> real positive. Idempotent.
/// Degeneracies are only reported inside the trusted range.
pub fn normalize_phases(mut spec: LaxSpectrum) -> Result<LaxSpectrum> {
    let cols = spec.eigvecs.ncols();
    let a0 = spec.eigvecs[(0, 0)];
    if a0.norm() < PHASE_FLOOR && spec.trusted > 0 {
        return Err(Error::PhaseDegeneracy {
            n: 0,
            value: a0.norm(),
            floor: PHASE_FLOOR,
        });
    }
    rotate_col(&mut spec.eigvecs, 0, -a0.arg());
    for n in 0..cols - 1 {
        let s = spec.f_shift_f(n);
        if s.norm() < PHASE_FLOOR {
            if n + 1 <= spec.trusted {
                return Err(Error::PhaseDegeneracy {
                    n: n + 1,
                    value: s.norm(),
                    floor: PHASE_FLOOR,
                });
            }
            continue; // untrusted tail, leave as-is
        }
        rotate_col(&mut spec.eigvecs, n + 1, -s.arg());
    }
    Ok(spec)
}

fn rotate_col(m: &mut DMatrix<C64>, j: usize, theta: f64) {
    let w = C64::from_polar(1.0, theta);
    for i in 0..m.nrows() {
        m[(i, j)] *= w;
    }
}

pub fn compute_spectrum(u: &Potential, n_max: usize, tol: f64) -> Result<LaxSpectrum> {
    compute_spectrum_with(
        u,
        n_max,
        &SpectrumConfig {
            tol,
            ..SpectrumConfig::default()
        },
    )
}

/// Solve the truncated eigenproblem, doubling M until eigenvalues up to
/// n_max settle below tol, then grade the whole prefix of eigenpairs by the
/// doubling and residual tests.
pub fn compute_spectrum_with(
    u: &Potential,
    n_max: usize,
    cfg: &SpectrumConfig,
) -> Result<LaxSpectrum> {
    if cfg.tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let m0 = cfg
        .m_init
        .unwrap_or_else(|| (4 * u.k_max()).max(2 * n_max + 16))
        .max(n_max + 2)
        .max(2);

    let mut m = m0;
    let (mut lam_coarse, mut vec_coarse) = sorted_eigen(&lax_matrix(u, m)?);
    for attempt in 0..=cfg.max_doublings {
        let m_fine = 2 * m;
        let (lam_fine, vec_fine) = sorted_eigen(&lax_matrix(u, m_fine)?);
        let worst = (0..=n_max)
            .map(|n| (lam_coarse[n] - lam_fine[n]).abs())
            .fold(0.0f64, f64::max);
        if worst < cfg.tol {
            return finish(u, n_max, cfg.tol, m_fine, lam_coarse, lam_fine, vec_fine);
        }
        if attempt == cfg.max_doublings {
            return Err(Error::ConvergenceFailure {
                m: m_fine,
                doublings: cfg.max_doublings,
                worst_delta: worst,
                tol: cfg.tol,
                lambdas_coarse: lam_coarse[..=n_max].to_vec(),
                lambdas_fine: lam_fine[..=n_max].to_vec(),
            });
        }
        m = m_fine;
        lam_coarse = lam_fine;
        vec_coarse = vec_fine;
    }
    let _ = vec_coarse;
    unreachable!("doubling loop returns or errors");
}

fn finish(
    u: &Potential,
    n_max: usize,
    tol: f64,
    m_fine: usize,
    lam_coarse: Vec<f64>,
    lam_fine: Vec<f64>,
    vecs: DMatrix<C64>,
) -> Result<LaxSpectrum> {
    let residuals: Vec<f64> = (0..lam_fine.len())
        .map(|n| {
            let v: Vec<C64> = vecs.column(n).iter().copied().collect();
            exact_residual(u, lam_fine[n], &v)
        })
        .collect();

    // Grade the prefix: an eigenpair is trusted when both the doubling
    // delta (where available) and the exact residual are small.
    let mut trusted = 0usize;
    for n in 0..lam_fine.len() {
        let scale = 1.0 + lam_fine[n].abs();
        let doubling_ok = n < lam_coarse.len() && (lam_coarse[n] - lam_fine[n]).abs() <= tol * scale;
        let residual_ok = residuals[n] <= 10.0 * tol * scale;
        if doubling_ok && residual_ok {
            trusted = n + 1;
        } else {
            break;
        }
    }
    if trusted < n_max + 1 {
        return Err(Error::InvalidSpectrum(format!(
            "trusted prefix {} shorter than requested n_max {}",
            trusted, n_max
        )));
    }

    let mut gaps = Vec::with_capacity(lam_fine.len() - 1);
    for n in 1..lam_fine.len() {
        let raw = lam_fine[n] - lam_fine[n - 1] - 1.0;
        let floor = 1e-12 * (1.0 + lam_fine[n].abs());
        if raw < -floor && n <= trusted {
            return Err(Error::InvalidSpectrum(format!(
                "gap gamma_{} = {:.3e} is negative beyond tolerance",
                n, raw
            )));
        }
        gaps.push(raw.max(0.0));
    }

    let spec = LaxSpectrum {
        m: m_fine,
        lambdas: lam_fine,
        gaps,
        eigvecs: vecs,
        trusted,
        residuals,
    };
    normalize_phases(spec)
}

/// Spectral band [lambda_n, lambda_n + 1] with the gap that follows it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    /// Length of the spectral gap separating this band from the next;
    /// zero when they touch. Zero after the last reported band.
    pub gap_after: f64,
}

/// Bands [lambda_n, lambda_n + 1] for n up to the trusted range.
pub fn band_report(spec: &LaxSpectrum) -> Vec<Band> {
    let count = spec.trusted_count().min(spec.lambdas().len());
    (0..count)
        .map(|n| Band {
            lo: spec.lambda(n),
            hi: spec.lambda(n) + 1.0,
            gap_after: if n + 1 < count { spec.gamma(n + 1) } else { 0.0 },
        })
        .collect()
}
