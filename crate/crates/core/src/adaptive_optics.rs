//! Adaptive-optics residual phase statistics and single-mode-fiber coupling.
//!
//! The turbulent phase is described on a wide Zernike space (40 radial
//! orders by default). An AO loop correcting the first `n_r` radial orders
//! leaves a residual budget with three terms:
//!
//! * fitting error — full Kolmogorov variance of every uncorrected mode;
//! * aliasing error — a fixed fraction of the fitting error folded back
//!   into the corrected modes by the wavefront sensor;
//! * temporal (servo-lag) error — (2π f_G · τ)^(5/3) with τ the loop delay,
//!   distributed over the corrected modes in proportion to their Kolmogorov
//!   variances.
//!
//! [`estimate_p_ao`] draws random residual-phase realizations from that
//! budget, evaluates the overlap integral with the fiber mode for each one,
//! and returns the empirical distribution of the coupling efficiency.
//! Draws use independent per-draw RNG substreams and are aggregated in draw
//! order, so results do not depend on thread scheduling.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::dist::{log_histogram, DistError, Pdf};
use crate::exec::{map_indexed, map_indexed_seq};
use crate::math::{ln_gamma, splitmix64};
use crate::turbulence::IntegratedTurbulence;
use crate::zernike::ZernikeBasis;

/// Minimum pupil sampling accepted by the coupling integral.
pub const MIN_COUPLING_GRID: usize = 128;
/// Minimum Monte-Carlo draw count for [`estimate_p_ao`].
pub const MIN_DRAWS: usize = 1000;

#[derive(Debug, Error)]
pub enum AoError {
    #[error("D/r0 must be positive, got {0}")]
    NonPositiveDOverR0(f64),
    #[error("pupil grid too coarse: {got} samples per diameter, need >= {min}")]
    GridTooCoarse { got: usize, min: usize },
    #[error("coefficient count {got} does not match basis mode count {want}")]
    CoefficientCount { got: usize, want: usize },
    #[error("invalid AO config: {0}")]
    InvalidConfig(String),
    #[error("need at least {min} Monte-Carlo draws, got {got}")]
    TooFewDraws { got: usize, min: usize },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// AO loop configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AoConfig {
    /// Radial orders corrected by the loop; 0 disables correction entirely.
    pub corrected_radial_orders: u32,
    pub loop_frequency_hz: f64,
    pub frame_delay_frames: u32,
    /// Aliasing error as a fraction of the fitting error.
    pub aliasing_coefficient: f64,
    /// Fiber mode waist in units of λ·F# of the coupling optics.
    pub fiber_mode_ratio: f64,
}

impl AoConfig {
    /// Standard loop (5 kHz, two-frame delay, 0.3 aliasing fraction,
    /// fiber ratio 0.71) correcting `n_r` radial orders.
    pub fn for_orders(n_r: u32) -> Self {
        Self {
            corrected_radial_orders: n_r,
            loop_frequency_hz: 5000.0,
            frame_delay_frames: 2,
            aliasing_coefficient: 0.3,
            fiber_mode_ratio: 0.71,
        }
    }

    pub fn validate(&self, basis: &ZernikeBasis) -> Result<(), AoError> {
        if self.corrected_radial_orders > basis.max_radial_order() {
            return Err(AoError::InvalidConfig(format!(
                "corrected orders {} exceed basis max {}",
                self.corrected_radial_orders,
                basis.max_radial_order()
            )));
        }
        if !(self.loop_frequency_hz > 0.0) {
            return Err(AoError::InvalidConfig("loop frequency must be > 0".into()));
        }
        if self.frame_delay_frames < 1 {
            return Err(AoError::InvalidConfig("frame delay must be >= 1".into()));
        }
        if !(self.aliasing_coefficient >= 0.0) {
            return Err(AoError::InvalidConfig("aliasing coefficient must be >= 0".into()));
        }
        if !(self.fiber_mode_ratio > 0.0) {
            return Err(AoError::InvalidConfig("fiber mode ratio must be > 0".into()));
        }
        Ok(())
    }
}

/// Residual variance budget after AO correction, rad².
#[derive(Debug, Clone)]
pub struct ResidualBudget {
    /// Residual variance per basis mode.
    pub per_mode: Vec<f64>,
    /// Σ Kolmogorov variance of uncorrected modes.
    pub fitting_var: f64,
    pub aliasing_var: f64,
    pub temporal_var: f64,
}

impl ResidualBudget {
    /// Total residual variance carried by the modes.
    pub fn total_variance(&self) -> f64 {
        self.per_mode.iter().sum()
    }
}

/// Per-mode Kolmogorov variances (rad²) at the given D/r0.
///
/// Noll's closed form: ⟨a²⟩ = C (n+1) Γ(n − 5/6) / Γ(n + 23/6) · (D/r0)^(5/3)
/// with C assembled from the Kolmogorov spectrum normalization. Within a
/// radial order every azimuthal mode carries the same variance.
pub fn kolmogorov_mode_variances(
    basis: &ZernikeBasis,
    d_over_r0: f64,
) -> Result<Vec<f64>, AoError> {
    if !(d_over_r0 > 0.0) {
        return Err(AoError::NonPositiveDOverR0(d_over_r0));
    }
    let scale = d_over_r0.powf(5.0 / 3.0);
    let c = noll_variance_constant();
    Ok(basis
        .modes()
        .iter()
        .map(|m| {
            let n = f64::from(m.radial_order);
            c * (n + 1.0) * (ln_gamma(n - 5.0 / 6.0) - ln_gamma(n + 23.0 / 6.0)).exp() * scale
        })
        .collect())
}

/// C = Γ(14/3) (24/5 Γ(6/5))^(5/6) Γ(11/6)² / (2^(8/3) π Γ(17/6)²) ≈ 0.7554
fn noll_variance_constant() -> f64 {
    let g = |x: f64| ln_gamma(x).exp();
    g(14.0 / 3.0) * (24.0 / 5.0 * g(6.0 / 5.0)).powf(5.0 / 6.0) * g(11.0 / 6.0).powi(2)
        / (2.0_f64.powf(8.0 / 3.0) * std::f64::consts::PI * g(17.0 / 6.0).powi(2))
}

/// Builds the three-term residual budget for one line of sight.
///
/// Uncorrected modes keep their full Kolmogorov variance; corrected modes
/// share the aliasing and servo-lag variances in proportion to their
/// Kolmogorov weights. With no corrected modes the loop terms have no
/// carrier and the phase statistics are pure Kolmogorov.
pub fn residual_budget(
    basis: &ZernikeBasis,
    config: &AoConfig,
    turb: &IntegratedTurbulence,
    aperture_diameter_m: f64,
) -> Result<ResidualBudget, AoError> {
    config.validate(basis)?;
    if !(aperture_diameter_m > 0.0) {
        return Err(AoError::InvalidConfig("aperture diameter must be > 0".into()));
    }
    let kolmo = if turb.r0_m.is_finite() {
        kolmogorov_mode_variances(basis, aperture_diameter_m / turb.r0_m)?
    } else {
        vec![0.0; basis.mode_count()]
    };

    let n_r = config.corrected_radial_orders;
    let corrected: Vec<bool> = basis
        .modes()
        .iter()
        .map(|m| m.radial_order <= n_r)
        .collect();
    let fitting_var: f64 = kolmo
        .iter()
        .zip(&corrected)
        .filter(|(_, &c)| !c)
        .map(|(v, _)| v)
        .sum();
    let aliasing_var = config.aliasing_coefficient * fitting_var;
    let delay_s = f64::from(config.frame_delay_frames) / config.loop_frequency_hz;
    let temporal_var =
        (2.0 * std::f64::consts::PI * turb.greenwood_hz * delay_s).powf(5.0 / 3.0);

    let corrected_weight: f64 = kolmo
        .iter()
        .zip(&corrected)
        .filter(|(_, &c)| c)
        .map(|(v, _)| v)
        .sum();
    let loop_var = aliasing_var + temporal_var;
    let per_mode: Vec<f64> = kolmo
        .iter()
        .zip(&corrected)
        .map(|(&v, &c)| {
            if !c {
                v
            } else if corrected_weight > 0.0 {
                loop_var * v / corrected_weight
            } else {
                0.0
            }
        })
        .collect();

    Ok(ResidualBudget { per_mode, fitting_var, aliasing_var, temporal_var })
}

/// One residual-phase realization: independent zero-mean Gaussians with the
/// budget's per-mode variances.
pub fn draw_residual_phase<R: Rng>(budget: &ResidualBudget, rng: &mut R) -> Vec<f64> {
    budget
        .per_mode
        .iter()
        .map(|&v| {
            if v > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                v.sqrt() * z
            } else {
                0.0
            }
        })
        .collect()
}

/// Coupling of the aberrated pupil field into the fiber mode:
/// η = |∫ P e^{iφ} M|² / (∫|P|² ∫|M|²).
pub fn coupling_efficiency(
    basis: &ZernikeBasis,
    coeffs: &[f64],
    fiber_mode_ratio: f64,
) -> Result<f64, AoError> {
    if coeffs.len() != basis.mode_count() {
        return Err(AoError::CoefficientCount { got: coeffs.len(), want: basis.mode_count() });
    }
    let phase = basis.synthesize_phase(coeffs);
    coupling_from_phase(basis, &phase, fiber_mode_ratio)
}

/// Coupling for an explicit phase map on the basis pixels.
pub fn coupling_from_phase(
    basis: &ZernikeBasis,
    phase: &[f64],
    fiber_mode_ratio: f64,
) -> Result<f64, AoError> {
    let fiber = FiberMode::new(basis, fiber_mode_ratio)?;
    let (mut re, mut im) = (0.0_f64, 0.0_f64);
    for (g, &p) in fiber.weights.iter().zip(phase) {
        let (s, c) = p.sin_cos();
        re += g * c;
        im += g * s;
    }
    Ok((re * re + im * im) * fiber.norm_factor)
}

/// Coupling of a perfectly flat wavefront (the Maréchal reference η_max).
pub fn flat_wavefront_coupling(
    basis: &ZernikeBasis,
    fiber_mode_ratio: f64,
) -> Result<f64, AoError> {
    let fiber = FiberMode::new(basis, fiber_mode_ratio)?;
    let re: f64 = fiber.weights.iter().sum();
    Ok(re * re * fiber.norm_factor)
}

/// Pupil-plane fiber mode, premultiplied by the pupil coverage weights.
struct FiberMode {
    /// w_k · M(r_k) per pixel.
    weights: Vec<f64>,
    /// ΔA² / (∫|P|² ∫|M|²).
    norm_factor: f64,
}

impl FiberMode {
    fn new(basis: &ZernikeBasis, fiber_mode_ratio: f64) -> Result<Self, AoError> {
        if basis.samples_per_diameter() < MIN_COUPLING_GRID {
            return Err(AoError::GridTooCoarse {
                got: basis.samples_per_diameter(),
                min: MIN_COUPLING_GRID,
            });
        }
        if !(fiber_mode_ratio > 0.0) {
            return Err(AoError::InvalidConfig("fiber mode ratio must be > 0".into()));
        }
        // Backpropagated mode: field exp(-(r/w_p)²) with w_p = 2/(π·ratio)
        // pupil radii; ∫|M|² over the plane is π w_p²/2.
        let w_p = 2.0 / (std::f64::consts::PI * fiber_mode_ratio);
        let inv_w2 = 1.0 / (w_p * w_p);
        let weights: Vec<f64> = basis
            .weights()
            .iter()
            .zip(basis.radius_sq())
            .map(|(&w, &r2)| w * (-r2 * inv_w2).exp())
            .collect();
        let mode_norm = std::f64::consts::PI * w_p * w_p / 2.0;
        let da = basis.area_element();
        let norm_factor = da * da / (basis.pupil_area() * mode_norm);
        Ok(Self { weights, norm_factor })
    }
}

/// Empirical distribution of the SMF coupling efficiency.
#[derive(Debug, Clone)]
pub struct CouplingDistribution {
    samples: Vec<f64>,
    mean: f64,
    std: f64,
    /// Flat-wavefront coupling at the configured fiber ratio.
    max_theoretical: f64,
}

impl CouplingDistribution {
    fn from_samples(samples: Vec<f64>, max_theoretical: f64) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        Self { samples, mean, std: var.sqrt(), max_theoretical }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn max_theoretical(&self) -> f64 {
        self.max_theoretical
    }

    /// Histogram density over geometric bins.
    pub fn to_pdf(&self, n_bins: usize) -> Result<Pdf, DistError> {
        log_histogram(&self.samples, n_bins)
    }

    /// Writes `bin_center,probability_density` CSV rows.
    pub fn write_histogram_csv<W: std::io::Write>(
        &self,
        mut w: W,
        n_bins: usize,
    ) -> std::io::Result<()> {
        writeln!(w, "bin_center,probability_density")?;
        match self.to_pdf(n_bins) {
            Ok(Pdf::Grid(g)) => {
                for (x, p) in g.xs().iter().zip(g.ps()) {
                    writeln!(w, "{x},{p}")?;
                }
            }
            Ok(Pdf::Point(v)) => writeln!(w, "{v},inf")?,
            Err(_) => {}
        }
        Ok(())
    }
}

/// Monte-Carlo estimate of the coupling-efficiency distribution P_AO.
///
/// Per-draw RNG substreams are derived from `seed` and the draw index, so the
/// result is reproducible and identical between the parallel and sequential
/// execution paths.
pub fn estimate_p_ao(
    basis: &ZernikeBasis,
    config: &AoConfig,
    turb: &IntegratedTurbulence,
    aperture_diameter_m: f64,
    n_draws: usize,
    seed: u64,
) -> Result<CouplingDistribution, AoError> {
    estimate_p_ao_impl(basis, config, turb, aperture_diameter_m, n_draws, seed, true)
}

/// Sequential twin of [`estimate_p_ao`]; exists so benchmarks and
/// scheduling-independence tests can compare both paths in one binary.
#[doc(hidden)]
pub fn estimate_p_ao_sequential(
    basis: &ZernikeBasis,
    config: &AoConfig,
    turb: &IntegratedTurbulence,
    aperture_diameter_m: f64,
    n_draws: usize,
    seed: u64,
) -> Result<CouplingDistribution, AoError> {
    estimate_p_ao_impl(basis, config, turb, aperture_diameter_m, n_draws, seed, false)
}

/// Draws per GEMM chunk in the Monte-Carlo loop.
const DRAW_CHUNK: usize = 128;
/// Modes whose residual variance is below this fraction of the total are
/// dropped from phase synthesis; the discarded variance is ≤ n_modes times
/// the cutoff.
const MODE_VARIANCE_CUTOFF: f64 = 1e-8;

fn estimate_p_ao_impl(
    basis: &ZernikeBasis,
    config: &AoConfig,
    turb: &IntegratedTurbulence,
    aperture_diameter_m: f64,
    n_draws: usize,
    seed: u64,
    parallel: bool,
) -> Result<CouplingDistribution, AoError> {
    if n_draws < MIN_DRAWS {
        return Err(AoError::TooFewDraws { got: n_draws, min: MIN_DRAWS });
    }
    let budget = residual_budget(basis, config, turb, aperture_diameter_m)?;
    let fiber = FiberMode::new(basis, config.fiber_mode_ratio)?;
    let max_theoretical = flat_wavefront_coupling(basis, config.fiber_mode_ratio)?;

    // Active modes: those carrying a non-negligible share of the variance.
    let total_var = budget.total_variance();
    let active: Vec<usize> = if total_var > 0.0 {
        (0..budget.per_mode.len())
            .filter(|&i| budget.per_mode[i] > MODE_VARIANCE_CUTOFF * total_var)
            .collect()
    } else {
        Vec::new()
    };

    if active.is_empty() {
        // Degenerate budget: every draw couples like a flat wavefront.
        return Ok(CouplingDistribution::from_samples(
            vec![max_theoretical; n_draws],
            max_theoretical,
        ));
    }

    let stds: Vec<f64> = active.iter().map(|&i| budget.per_mode[i].sqrt()).collect();
    let n_px = basis.pixel_count();
    let mut active_matrix = Array2::<f32>::zeros((active.len(), n_px));
    for (row, &i) in active.iter().enumerate() {
        active_matrix.row_mut(row).assign(&basis.matrix().row(i));
    }

    let n_chunks = n_draws.div_ceil(DRAW_CHUNK);
    let eval_chunk = |chunk_idx: usize| -> Vec<f64> {
        let start = chunk_idx * DRAW_CHUNK;
        let count = DRAW_CHUNK.min(n_draws - start);
        let mut coeffs = Array2::<f32>::zeros((count, active.len()));
        for d in 0..count {
            let mut rng = draw_rng(seed, start + d);
            for (j, &s) in stds.iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                coeffs[(d, j)] = (s * z) as f32;
            }
        }
        let phases = coeffs.dot(&active_matrix);
        (0..count)
            .map(|d| {
                let row = phases.row(d);
                let (mut re, mut im) = (0.0_f64, 0.0_f64);
                for (g, &p) in fiber.weights.iter().zip(row.iter()) {
                    let (s, c) = p.sin_cos();
                    re += g * f64::from(c);
                    im += g * f64::from(s);
                }
                (re * re + im * im) * fiber.norm_factor
            })
            .collect()
    };

    let chunks: Vec<Vec<f64>> = if parallel {
        map_indexed(n_chunks, eval_chunk)
    } else {
        map_indexed_seq(n_chunks, eval_chunk)
    };
    let samples: Vec<f64> = chunks.into_iter().flatten().collect();
    Ok(CouplingDistribution::from_samples(samples, max_theoretical))
}

/// Independent RNG substream for one draw.
fn draw_rng(seed: u64, draw_index: usize) -> ChaCha8Rng {
    let mixed = splitmix64(seed ^ (draw_index as u64).wrapping_mul(0xA24BAED4963EE407));
    ChaCha8Rng::seed_from_u64(mixed)
}
