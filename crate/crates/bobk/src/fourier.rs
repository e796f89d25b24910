//! Periodic functions on the torus, the Hardy-space calculus and the
//! truncated Lax matrix.
//!
//! A real 2pi-periodic function is stored one-sided: the mean together with
//! the Fourier coefficients c_k = uhat(k) for k >= 1, where
//! uhat(k) = (1/2pi) int u(x) e^{-ikx} dx. Negative coefficients are never
//! stored, so realness cannot be broken by construction. All inner products
//! follow <f|g> = (1/2pi) int f conj(g) dx, hence |e^{ikx}| = 1.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Real, 2pi-periodic function held as mean plus positive-frequency
/// Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    mean: f64,
    coeffs: Vec<C64>,
}

impl Potential {
    pub fn new(mean: f64, coeffs: Vec<C64>) -> Self {
        Self { mean, coeffs }
    }

    pub fn zero() -> Self {
        Self {
            mean: 0.0,
            coeffs: Vec::new(),
        }
    }

    /// a * cos(kx), stored as c_k = a/2.
    pub fn cosine(k: usize, amplitude: f64) -> Self {
        assert!(k >= 1);
        let mut coeffs = vec![C64::new(0.0, 0.0); k];
        coeffs[k - 1] = C64::new(amplitude / 2.0, 0.0);
        Self { mean: 0.0, coeffs }
    }

    /// Highest stored harmonic K.
    pub fn k_max(&self) -> usize {
        self.coeffs.len()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Two-sided coefficient uhat(k); conjugate symmetry is structural.
    pub fn coeff(&self, k: i64) -> C64 {
        if k == 0 {
            return C64::new(self.mean, 0.0);
        }
        let a = k.unsigned_abs() as usize;
        if a > self.coeffs.len() {
            return C64::new(0.0, 0.0);
        }
        let c = self.coeffs[a - 1];
        if k > 0 {
            c
        } else {
            c.conj()
        }
    }

    /// |u|^2 = mean^2 + 2 sum_k |c_k|^2.
    pub fn norm_sq(&self) -> f64 {
        self.mean * self.mean + 2.0 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// u(x + tau); coefficient k picks up the phase e^{ik tau}.
    pub fn translate(&self, tau: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * C64::from_polar(1.0, (i + 1) as f64 * tau))
            .collect();
        Self {
            mean: self.mean,
            coeffs,
        }
    }

    /// u(-x); coefficients are conjugated.
    pub fn reflect(&self) -> Self {
        Self {
            mean: self.mean,
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.mean;
        for (i, c) in self.coeffs.iter().enumerate() {
            v += 2.0 * (c * C64::from_polar(1.0, (i + 1) as f64 * x)).re;
        }
        v
    }

    /// u + a * v, used for finite-difference probes.
    pub fn add_scaled(&self, other: &Potential, a: f64) -> Self {
        let k = self.k_max().max(other.k_max());
        let mut coeffs = vec![C64::new(0.0, 0.0); k];
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c = self.coeff(i as i64 + 1) + other.coeff(i as i64 + 1) * a;
        }
        Self {
            mean: self.mean + a * other.mean,
            coeffs,
        }
    }

    /// L^2 distance.
    pub fn distance(&self, other: &Potential) -> f64 {
        let k = self.k_max().max(other.k_max());
        let dm = self.mean - other.mean;
        let mut s = dm * dm;
        for i in 1..=k as i64 {
            s += 2.0 * (self.coeff(i) - other.coeff(i)).norm_sqr();
        }
        s.sqrt()
    }

    /// Drop a trailing run of negligible coefficients.
    pub fn trim(mut self, floor: f64) -> Self {
        while let Some(c) = self.coeffs.last() {
            if c.norm() <= floor {
                self.coeffs.pop();
            } else {
                break;
            }
        }
        self
    }
}

/// Element of the Hardy space: coefficients a_0..a_M of e^{inx}, n >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct HardyCoeffs {
    a: Vec<C64>,
}

impl HardyCoeffs {
    pub fn new(a: Vec<C64>) -> Self {
        Self { a }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.a
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.a.iter().map(|z| z.norm_sqr()).sum()
    }

    /// <self|other> = sum_n a_n conj(b_n).
    pub fn inner(&self, other: &HardyCoeffs) -> C64 {
        self.a
            .iter()
            .zip(other.a.iter())
            .map(|(x, y)| x * y.conj())
            .sum()
    }

    /// S h = e^{ix} h: indices shift up.
    pub fn shift_up(&self) -> HardyCoeffs {
        let mut a = Vec::with_capacity(self.a.len() + 1);
        a.push(C64::new(0.0, 0.0));
        a.extend_from_slice(&self.a);
        HardyCoeffs { a }
    }

    /// S* h: indices shift down, a_0 dropped.
    pub fn shift_down(&self) -> HardyCoeffs {
        HardyCoeffs {
            a: self.a.iter().skip(1).copied().collect(),
        }
    }
}

/// Szego projection of a two-sided coefficient slice ordered -K..K:
/// the nonnegative modes survive unchanged.
pub fn hardy_project(two_sided: &[C64]) -> Result<HardyCoeffs> {
    if two_sided.len() % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "two-sided coefficient slice must have odd length 2K+1, got {}",
            two_sided.len()
        )));
    }
    let k = two_sided.len() / 2;
    Ok(HardyCoeffs {
        a: two_sided[k..].to_vec(),
    })
}

/// Multiplier -i sign(k) on coefficient k; the mean maps to zero.
pub fn hilbert_transform(u: &Potential) -> Potential {
    let coeffs = u
        .coeffs()
        .iter()
        .map(|c| c * C64::new(0.0, -1.0))
        .collect();
    Potential::new(0.0, coeffs)
}

/// Truncated Lax matrix: entry (n, m) = n delta_{nm} - uhat(n - m) for
/// 0 <= n, m <= M. Hermitian because u is real.
pub fn lax_matrix(u: &Potential, m: usize) -> Result<DMatrix<C64>> {
    if m < 1 {
        return Err(Error::InvalidTruncation(
            "lax matrix needs M >= 1".to_string(),
        ));
    }
    let size = m + 1;
    let mut l = DMatrix::<C64>::zeros(size, size);
    for n in 0..size {
        for p in 0..size {
            let diag = if n == p { n as f64 } else { 0.0 };
            l[(n, p)] = C64::new(diag, 0.0) - u.coeff(n as i64 - p as i64);
        }
    }
    Ok(l)
}

/// Equispaced samples on [0, 2pi); the length is a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<C64>,
}

impl GridFunction {
    pub fn new(values: Vec<C64>) -> Result<Self> {
        if !values.len().is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid size {} is not a power of two",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn x(&self, j: usize) -> f64 {
        TWO_PI * j as f64 / self.values.len() as f64
    }
}

/// Samples of u on a grid of G points; requires G >= 2K + 2.
pub fn synthesize(u: &Potential, g: usize) -> Result<GridFunction> {
    let need = 2 * u.k_max() + 2;
    if g < need {
        return Err(Error::Aliasing {
            grid: g,
            k_max: u.k_max(),
            need,
        });
    }
    let mut spec = vec![C64::new(0.0, 0.0); g];
    spec[0] = C64::new(u.mean(), 0.0);
    for k in 1..=u.k_max() {
        spec[k] = u.coeff(k as i64);
        spec[g - k] = u.coeff(-(k as i64));
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(g).process(&mut spec);
    // unnormalized inverse: samples u(x_j) = sum_k spec[k] e^{+i k x_j}
    GridFunction::new(spec)
}

/// Discrete Fourier analysis back to one-sided coefficients, symmetrizing
/// the two sides so exact realness is restored.
pub fn analyze(gf: &GridFunction, k_max: usize) -> Result<Potential> {
    let g = gf.len();
    if g < 2 * k_max + 2 {
        return Err(Error::Aliasing {
            grid: g,
            k_max,
            need: 2 * k_max + 2,
        });
    }
    let mut spec = gf.values().to_vec();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(g).process(&mut spec);
    let scale = 1.0 / g as f64;
    let mean = spec[0].re * scale;
    let coeffs = (1..=k_max)
        .map(|k| (spec[k] + spec[g - k].conj()) * (0.5 * scale))
        .collect();
    Ok(Potential::new(mean, coeffs))
}

/// Pointwise product u*v computed on a 2x zero-padded grid so that the
/// quadratic convolution is exact up to k <= k_out.
pub fn pointwise_product(u: &Potential, v: &Potential, k_out: usize) -> Result<Potential> {
    let k_in = u.k_max().max(v.k_max());
    let mut g = 2usize;
    while g < 2 * (2 * k_in.max(k_out) + 2) {
        g *= 2;
    }
    let gu = synthesize(u, g)?;
    let gv = synthesize(v, g)?;
    let vals: Vec<C64> = gu
        .values()
        .iter()
        .zip(gv.values())
        .map(|(a, b)| a * b)
        .collect();
    analyze(&GridFunction::new(vals)?, k_out)
}
