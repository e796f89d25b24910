//! Time evolution, two independent ways: exact quadrature in coordinates
//! (phase rotation at the action-dependent frequencies) and a de-aliased
//! integrating-factor RK4 pseudo-spectral solver, plus the commutator
//! residual of the underlying operator identity and a recurrence probe.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::forward::BirkhoffCoords;
use crate::fourier::{pointwise_product, Potential, TWO_PI};

/// Frequencies omega_1..omega_N of the coordinate flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector {
    omega: Vec<f64>,
}

impl FrequencyVector {
    /// omega_n, 1-based.
    pub fn omega(&self, n: usize) -> f64 {
        self.omega[n - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// omega_n = n^2 - 2 sum_k min(k, n) gamma_k, exact finite sums.
/// `gammas[k-1]` holds gamma_k.
pub fn frequencies(gammas: &[f64]) -> FrequencyVector {
    let n_max = gammas.len();
    let omega = (1..=n_max)
        .map(|n| {
            let correction: f64 = gammas
                .iter()
                .enumerate()
                .map(|(i, g)| (i + 1).min(n) as f64 * g)
                .sum();
            (n * n) as f64 - 2.0 * correction
        })
        .collect();
    FrequencyVector { omega }
}

/// Energy as a function of the actions:
/// sum n^2 gamma_n - sum_n (sum_{k>=n} gamma_k)^2.
pub fn hamiltonian_actions(gammas: &[f64]) -> f64 {
    let quadratic: f64 = gammas
        .iter()
        .enumerate()
        .map(|(i, g)| ((i + 1) * (i + 1)) as f64 * g)
        .sum();
    let mut tail = 0.0;
    let mut tails_sq = 0.0;
    for g in gammas.iter().rev() {
        tail += g;
        tails_sq += tail * tail;
    }
    quadratic - tails_sq
}

/// Energy evaluated directly on the potential:
/// (1/2)<|D|u | u> - (1/3)(1/2pi) int u^3 dx, the cubic term by exact
/// de-aliased quadrature.
pub fn hamiltonian_direct(u: &Potential) -> Result<f64> {
    let quadratic: f64 = u
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| (i + 1) as f64 * c.norm_sqr())
        .sum();
    // mean of u^3 = uhat^2 paired with uhat across zero frequency
    let squared = pointwise_product(u, u, u.k_max())?;
    let mut cubic_mean = squared.mean() * u.mean();
    for k in 1..=u.k_max() as i64 {
        cubic_mean += 2.0 * (squared.coeff(k) * u.coeff(-k)).re;
    }
    Ok(quadratic - cubic_mean / 3.0)
}

/// Pointwise phase rotation zeta_n -> zeta_n e^{i omega_n t}; every action
/// is conserved exactly.
pub fn evolve_quadrature(z0: &BirkhoffCoords, t: f64) -> BirkhoffCoords {
    let omega = frequencies(&z0.gammas());
    let zeta = z0
        .zetas()
        .iter()
        .enumerate()
        .map(|(i, z)| z * C64::from_polar(1.0, omega.omega(i + 1) * t))
        .collect();
    BirkhoffCoords::new(zeta)
}

/// De-aliasing rule for the quadratic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dealias {
    /// Zero padding to twice the grid; exact for a quadratic nonlinearity.
    ZeroPad,
    /// Classical two-thirds truncation on the same grid.
    TwoThirds,
}

#[derive(Debug, Clone)]
pub struct EvolveConfig {
    pub dt: f64,
    /// Number of grid points; modes 1..G/2-1 are evolved.
    pub grid: usize,
    pub dealias: Dealias,
    /// Number of recorded states along the way (ends always included).
    pub checkpoints: usize,
    /// Reject a step whose relative |u|^2 drift exceeds this guard.
    pub norm_drift_guard: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            grid: 256,
            dealias: Dealias::ZeroPad,
            checkpoints: 16,
            norm_drift_guard: 1e-6,
        }
    }
}

impl EvolveConfig {
    /// Default step for a given grid.
    pub fn default_dt(grid: usize) -> f64 {
        (1e-3f64).min(0.5 / grid as f64)
    }
}

/// Conservation diagnostics recorded at every checkpoint.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub norm_sq: Vec<f64>,
    pub mean: Vec<f64>,
    pub hamiltonian: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub states: Vec<Potential>,
    pub config: EvolveConfig,
    pub diagnostics: Diagnostics,
}

impl EvolutionTrace {
    pub fn final_state(&self) -> &Potential {
        self.states.last().expect("trace holds at least the start")
    }
}

struct ModeWorkspace {
    g_pad: usize,
    k_keep: usize,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl ModeWorkspace {
    fn new(k_modes: usize, dealias: Dealias, grid: usize) -> Self {
        let g_pad = match dealias {
            Dealias::ZeroPad => 2 * grid,
            Dealias::TwoThirds => grid,
        };
        let k_keep = match dealias {
            Dealias::ZeroPad => k_modes,
            Dealias::TwoThirds => (2 * (grid / 2)) / 3,
        };
        let mut planner = FftPlanner::<f64>::new();
        Self {
            g_pad,
            k_keep,
            fwd: planner.plan_fft_forward(g_pad),
            inv: planner.plan_fft_inverse(g_pad),
        }
    }

    /// -i k (u^2)_k on the retained modes, computed on the de-aliased grid.
    fn nonlinear(&self, mean: f64, v: &[C64], out: &mut [C64]) {
        let g = self.g_pad;
        let kept = v.len().min(self.k_keep);
        let mut buf = vec![C64::new(0.0, 0.0); g];
        buf[0] = C64::new(mean, 0.0);
        for (i, z) in v.iter().take(kept).enumerate() {
            buf[i + 1] = *z;
            buf[g - 1 - i] = z.conj();
        }
        self.inv.process(&mut buf);
        for z in buf.iter_mut() {
            *z = *z * *z;
        }
        self.fwd.process(&mut buf);
        let scale = 1.0 / g as f64;
        for (i, o) in out.iter_mut().enumerate() {
            let k = (i + 1) as f64;
            let ck = buf[i + 1] * scale;
            *o = C64::new(0.0, -k) * ck;
        }
    }
}

/// Integrating-factor RK4 on the Fourier modes. The dispersive symbol
/// (plus the mean's advection) is integrated exactly; only the quadratic
/// term is stepped. The mean mode has zero right-hand side and is carried
/// through unchanged.
pub fn evolve_direct(u0: &Potential, t_final: f64, cfg: &EvolveConfig) -> Result<EvolutionTrace> {
    if cfg.grid < 8 || !cfg.grid.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "grid {} must be a power of two >= 8",
            cfg.grid
        )));
    }
    let k_modes = cfg.grid / 2 - 1;
    if u0.k_max() > k_modes {
        return Err(Error::Aliasing {
            grid: cfg.grid,
            k_max: u0.k_max(),
            need: 2 * u0.k_max() + 2,
        });
    }
    if cfg.dt <= 0.0 || t_final < 0.0 {
        return Err(Error::InvalidParameter(
            "need dt > 0 and t_final >= 0".to_string(),
        ));
    }

    let n_steps = (t_final / cfg.dt).ceil().max(1.0) as usize;
    let dt = t_final / n_steps as f64;
    let mean = u0.mean();

    let mut v: Vec<C64> = (1..=k_modes).map(|k| u0.coeff(k as i64)).collect();
    let ws = ModeWorkspace::new(k_modes, cfg.dealias, cfg.grid);

    // linear symbol i k (k - 2 mean); half- and full-step propagators
    let e_half: Vec<C64> = (1..=k_modes)
        .map(|k| {
            let k = k as f64;
            C64::from_polar(1.0, k * (k - 2.0 * mean) * dt / 2.0)
        })
        .collect();
    let e_full: Vec<C64> = e_half.iter().map(|e| e * e).collect();

    let checkpoint_stride = (n_steps / cfg.checkpoints.max(1)).max(1);
    let mut trace = EvolutionTrace {
        times: Vec::new(),
        states: Vec::new(),
        config: cfg.clone(),
        diagnostics: Diagnostics::default(),
    };
    let record =
        |trace: &mut EvolutionTrace, t: f64, v: &[C64]| -> Result<()> {
            let u = Potential::new(mean, v.to_vec()).trim(1e-16);
            trace.times.push(t);
            trace.diagnostics.norm_sq.push(u.norm_sq());
            trace.diagnostics.mean.push(u.mean());
            trace.diagnostics.hamiltonian.push(hamiltonian_direct(&u)?);
            trace.states.push(u);
            Ok(())
        };
    record(&mut trace, 0.0, &v)?;

    let mut a = vec![C64::new(0.0, 0.0); k_modes];
    let mut b = vec![C64::new(0.0, 0.0); k_modes];
    let mut c = vec![C64::new(0.0, 0.0); k_modes];
    let mut d = vec![C64::new(0.0, 0.0); k_modes];
    let mut stage = vec![C64::new(0.0, 0.0); k_modes];

    let mut norm_prev: f64 = 2.0 * v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    for step in 0..n_steps {
        ws.nonlinear(mean, &v, &mut a);
        for i in 0..k_modes {
            stage[i] = e_half[i] * (v[i] + a[i] * (dt / 2.0));
        }
        ws.nonlinear(mean, &stage, &mut b);
        for i in 0..k_modes {
            stage[i] = e_half[i] * v[i] + b[i] * (dt / 2.0);
        }
        ws.nonlinear(mean, &stage, &mut c);
        for i in 0..k_modes {
            stage[i] = e_full[i] * v[i] + e_half[i] * c[i] * dt;
        }
        ws.nonlinear(mean, &stage, &mut d);
        for i in 0..k_modes {
            v[i] = e_full[i] * v[i]
                + (e_full[i] * a[i] + (b[i] + c[i]) * e_half[i] * 2.0 + d[i]) * (dt / 6.0);
        }

        let norm_now: f64 = 2.0 * v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let drift = (norm_now - norm_prev).abs() / (1.0 + norm_now);
        if drift > cfg.norm_drift_guard {
            return Err(Error::StepRejected {
                t: (step + 1) as f64 * dt,
                drift,
                guard: cfg.norm_drift_guard,
            });
        }
        norm_prev = norm_now;

        let done = step + 1 == n_steps;
        if done || (step + 1) % checkpoint_stride == 0 {
            record(&mut trace, (step + 1) as f64 * dt, &v)?;
        }
    }
    Ok(trace)
}

/// Operator-norm residual of the commutator identity on the interior block
/// (indices up to M - 2K), where the truncated Toeplitz products are exact:
/// with du/dt formed from the equation's right-hand side, the derivative of
/// the Lax matrix must equal the commutator with i(T_{|D|u} - T_u^2).
pub fn lax_residual(u: &Potential, m: usize) -> Result<f64> {
    let k = u.k_max();
    if m < 2 * k + 2 {
        return Err(Error::InvalidTruncation(format!(
            "interior block empty: M = {} with bandwidth K = {}",
            m, k
        )));
    }

    // du/dt has bandwidth 2K
    let squared = pointwise_product(u, u, 2 * k)?;
    let dt_coeffs: Vec<C64> = (1..=2 * k as i64)
        .map(|kk| {
            let kf = kk as f64;
            C64::new(0.0, kf * kf) * u.coeff(kk) - C64::new(0.0, kf) * squared.coeff(kk)
        })
        .collect();
    let du_dt = Potential::new(0.0, dt_coeffs);

    let dl_dt = toeplitz(&du_dt, m).map(|t| -t)?;
    let abs_d_u = Potential::new(
        0.0,
        u.coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| c * (i + 1) as f64)
            .collect(),
    );
    let t_u = toeplitz(u, m)?;
    let b_op = (toeplitz(&abs_d_u, m)? - &t_u * &t_u) * C64::new(0.0, 1.0);
    let l = crate::fourier::lax_matrix(u, m)?;
    let commutator = &b_op * &l - &l * &b_op;
    let full = dl_dt - commutator;

    let interior = m - 2 * k;
    let block = full.view((0, 0), (interior + 1, interior + 1)).clone_owned();
    Ok(operator_norm(&block))
}

fn toeplitz(v: &Potential, m: usize) -> Result<DMatrix<C64>> {
    let size = m + 1;
    let mut t = DMatrix::<C64>::zeros(size, size);
    for n in 0..size {
        for p in 0..size {
            t[(n, p)] = v.coeff(n as i64 - p as i64);
        }
    }
    Ok(t)
}

fn operator_norm(a: &DMatrix<C64>) -> f64 {
    let gram = a.adjoint() * a;
    let eigs = gram.symmetric_eigen().eigenvalues;
    eigs.iter().fold(0.0f64, |acc, &x| acc.max(x.max(0.0))).sqrt()
}

/// Scan the quadrature flow of `z0` on (0, t_max] for returns to the
/// initial point: local minima of the weighted coordinate distance below
/// `threshold`, refined by golden-section search and confirmed in L^2 on
/// the reconstructed potentials.
pub fn recurrence_probe(z0: &BirkhoffCoords, t_max: f64, threshold: f64) -> Result<Vec<f64>> {
    if z0.is_empty() || t_max <= 0.0 {
        return Ok(Vec::new());
    }
    let omega = frequencies(&z0.gammas());
    let dist = |t: f64| evolve_quadrature(z0, t).weighted_distance(z0);

    // sample densely enough to separate the fastest phase
    let omega_max = omega
        .as_slice()
        .iter()
        .fold(1.0f64, |acc, w| acc.max(w.abs()));
    let n_scan = ((t_max * omega_max * 8.0).ceil() as usize).clamp(256, 1 << 20);
    let dt = t_max / n_scan as f64;

    let u0 = crate::inverse::reconstruct_finite_gap(z0)?;
    let mut hits = Vec::new();
    let mut prev = dist(dt);
    let mut prev_prev = dist(f64::MIN_POSITIVE);
    for i in 2..=n_scan {
        let cur = dist(i as f64 * dt);
        if prev <= prev_prev && prev <= cur {
            // bracket a local minimum around (i-1) dt
            let t_star = golden_section(&dist, (i - 2) as f64 * dt, i as f64 * dt);
            if dist(t_star) < threshold {
                let ut = crate::inverse::reconstruct_finite_gap(&evolve_quadrature(z0, t_star))?;
                if u0.distance(&ut) < threshold {
                    hits.push(t_star);
                }
            }
        }
        prev_prev = prev;
        prev = cur;
    }
    Ok(hits)
}

fn golden_section(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 * (1.0 + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn free_frequencies_are_squares() {
        let om = frequencies(&[0.0, 0.0, 0.0]);
        for n in 1..=3 {
            assert_abs_diff_eq!(om.omega(n), (n * n) as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_gap_frequencies() {
        let om = frequencies(&[1.0 / 3.0, 0.0, 0.0]);
        assert_abs_diff_eq!(om.omega(1), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(om.omega(2), 10.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(om.omega(3), 25.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn frequencies_are_action_gradients_of_the_energy() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let gammas: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..0.4)).collect();
        let om = frequencies(&gammas);
        let h = 1e-6;
        for n in 1..=5 {
            let mut up = gammas.clone();
            let mut dn = gammas.clone();
            up[n - 1] += h;
            dn[n - 1] -= h;
            let fd = (hamiltonian_actions(&up) - hamiltonian_actions(&dn)) / (2.0 * h);
            assert_abs_diff_eq!(om.omega(n), fd, epsilon = 1e-9);
        }
    }

    #[test]
    fn energy_in_actions_examples() {
        assert_abs_diff_eq!(hamiltonian_actions(&[]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            hamiltonian_actions(&[1.0 / 3.0]),
            2.0 / 9.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn energy_direct_matches_actions_for_single_gap() {
        let og = crate::finite_gap::one_gap_closed_form(1, C64::new(0.5, 0.0)).unwrap();
        let direct = hamiltonian_direct(&og.potential()).unwrap();
        assert_abs_diff_eq!(direct, 2.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_rotates_phases_only() {
        let z0 = BirkhoffCoords::new(vec![C64::new(0.3, -0.2), C64::new(0.0, 0.15)]);
        let zt = evolve_quadrature(&z0, 0.83);
        for n in 1..=2 {
            assert_abs_diff_eq!(zt.gamma(n), z0.gamma(n), epsilon = 1e-15);
        }
        assert_eq!(evolve_quadrature(&BirkhoffCoords::empty(), 3.0).len(), 0);
    }

    #[test]
    fn single_gap_period() {
        // omega_1 = 1/3: the state returns exactly after t = 6 pi.
        let z0 = BirkhoffCoords::new(vec![C64::new(-1.0 / 3f64.sqrt(), 0.0)]);
        let zt = evolve_quadrature(&z0, 6.0 * std::f64::consts::PI);
        assert_abs_diff_eq!((zt.zeta(1) - z0.zeta(1)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn direct_solver_keeps_zero_at_zero() {
        let trace = evolve_direct(&Potential::zero(), 0.5, &EvolveConfig::default()).unwrap();
        assert_abs_diff_eq!(trace.final_state().norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn direct_solver_conserves_mean_and_norm() {
        let u0 = Potential::new(0.0, vec![C64::new(0.25, 0.1), C64::new(0.05, -0.1)]);
        let cfg = EvolveConfig {
            grid: 64,
            dt: 1e-3,
            ..EvolveConfig::default()
        };
        let trace = evolve_direct(&u0, 0.5, &cfg).unwrap();
        for (m, n2) in trace
            .diagnostics
            .mean
            .iter()
            .zip(&trace.diagnostics.norm_sq)
        {
            assert_abs_diff_eq!(*m, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(*n2, u0.norm_sq(), epsilon = 1e-10);
        }
    }

    #[test]
    fn two_thirds_rule_also_integrates() {
        let u0 = Potential::new(0.0, vec![C64::new(0.25, 0.1)]);
        let cfg = EvolveConfig {
            grid: 64,
            dt: 1e-3,
            dealias: Dealias::TwoThirds,
            ..EvolveConfig::default()
        };
        let a = evolve_direct(&u0, 0.3, &cfg).unwrap();
        let b = evolve_direct(
            &u0,
            0.3,
            &EvolveConfig {
                grid: 64,
                dt: 1e-3,
                ..EvolveConfig::default()
            },
        )
        .unwrap();
        assert!(a.final_state().distance(b.final_state()) < 1e-7);
    }

    #[test]
    fn traveling_wave_moves_at_the_closed_form_speed() {
        let og = crate::finite_gap::one_gap_closed_form(1, C64::new(0.5, 0.0)).unwrap();
        let u0 = og.potential();
        let cfg = EvolveConfig {
            grid: 128,
            dt: 2e-3,
            ..EvolveConfig::default()
        };
        let t = 1.0;
        let trace = evolve_direct(&u0, t, &cfg).unwrap();
        let expected = u0.translate(t / 3.0);
        let err = trace.final_state().distance(&expected);
        assert!(err < 1e-4, "shape error {}", err);
    }

    #[test]
    fn commutator_residual_vanishing() {
        assert_abs_diff_eq!(lax_residual(&Potential::zero(), 16).unwrap(), 0.0, epsilon = 1e-14);
        let u = Potential::cosine(1, 2.0);
        let r = lax_residual(&u, 64).unwrap();
        assert!(r < 1e-10, "interior residual {}", r);
        // residual does not grow when the truncation doubles
        let r2 = lax_residual(&u, 128).unwrap();
        assert!(r2 < 1e-10);
        assert!(matches!(
            lax_residual(&u, 3),
            Err(Error::InvalidTruncation(_))
        ));
    }

    #[test]
    fn recurrence_of_the_single_gap() {
        let z0 = BirkhoffCoords::new(vec![C64::new(-1.0 / 3f64.sqrt(), 0.0)]);
        let period = 6.0 * std::f64::consts::PI;
        let hits = recurrence_probe(&z0, 2.5 * period, 1e-8).unwrap();
        assert_eq!(hits.len(), 2);
        assert_abs_diff_eq!(hits[0], period, epsilon = 1e-6);
        assert_abs_diff_eq!(hits[1], 2.0 * period, epsilon = 1e-6);
        // zero threshold returns nothing
        let none = recurrence_probe(&z0, 2.5 * period, 0.0).unwrap();
        assert!(none.is_empty());
    }
}
