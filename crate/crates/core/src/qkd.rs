//! BBM92 coincidence statistics, QBER, and secret key rates.
//!
//! Per coincidence window Δt:
//!
//!   y0 = 1 − exp(−d·Δt)            dark/background click probability
//!   p0 = exp(−µ·Δt)                no pair emitted in the window
//!   Y1 = (y0a + η_a y1a)(y0b + η_b y1b),  η = τ·η_d,  y1 = 1 − y0
//!   Y0 = y0a·y0b                    coincidence of two noise events
//!   R_c = (p0 Y0 + (1−p0) Y1) / Δt
//!
//! The QBER closes the named error terms: background clicks are random
//! (e_0 = 1/2), true pair detections err with probability e_d, so
//! error mass = p0 Y0 e0 + (1−p0)[e0 Y1 − (e0 − e_d) η_a η_b y1a y1b].
//!
//! Key rates: K_A = ½ R_c (1 − f_ec h2(e) − h2(e)) in the asymptotic
//! regime; the finite-size rate inflates the error by the statistical
//! deviation sqrt((C_T+1) log2(1/ε_sec)/(4 C_T²)) and pays a constant
//! log2(2/(ε_corr ε_sec²)) penalty. Both are clamped at zero.

use thiserror::Error;

use crate::channel::TransmittanceDistribution;
use crate::orbit::TrajectoryPoint;

#[derive(Debug, Error)]
pub enum QkdError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid QKD parameters: {0}")]
    InvalidParams(String),
    #[error("QBER undefined: coincidence mass is zero")]
    UndefinedQber,
}

/// Source, detector, and post-processing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QkdParams {
    /// Entangled pair generation rate µ, pairs/s.
    pub pair_rate_hz: f64,
    /// Coincidence window Δt, seconds.
    pub coincidence_window_s: f64,
    pub dark_rate_a_cps: f64,
    pub dark_rate_b_cps: f64,
    pub detector_efficiency_a: f64,
    pub detector_efficiency_b: f64,
    /// Error-correction inefficiency f_ec.
    pub error_correction_inefficiency: f64,
    /// Probability e_d that a true pair lands on the wrong detector.
    pub intrinsic_pair_error: f64,
    /// Error probability e_0 of a background click (polarization-random: ½).
    pub noise_error: f64,
    pub epsilon_sec: f64,
    pub epsilon_corr: f64,
}

impl Default for QkdParams {
    /// State-of-the-art downlink parameter set: µ = 11.4e6 pairs/s,
    /// Δt = 500 ps, d = 4.2e4 cps, η_d = 0.85, f_ec = 1.16, ε = 1e-10.
    /// e_d = 0.01 is a source-visibility assumption, not a measured value.
    fn default() -> Self {
        Self {
            pair_rate_hz: 11.4e6,
            coincidence_window_s: 500e-12,
            dark_rate_a_cps: 4.2e4,
            dark_rate_b_cps: 4.2e4,
            detector_efficiency_a: 0.85,
            detector_efficiency_b: 0.85,
            error_correction_inefficiency: 1.16,
            intrinsic_pair_error: 0.01,
            noise_error: 0.5,
            epsilon_sec: 1e-10,
            epsilon_corr: 1e-10,
        }
    }
}

impl QkdParams {
    pub fn validate(&self) -> Result<(), QkdError> {
        let nonneg = [
            ("pair_rate_hz", self.pair_rate_hz),
            ("dark_rate_a_cps", self.dark_rate_a_cps),
            ("dark_rate_b_cps", self.dark_rate_b_cps),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return Err(QkdError::InvalidParams(format!("{name} must be >= 0")));
            }
        }
        if !(self.coincidence_window_s > 0.0) {
            return Err(QkdError::InvalidParams("coincidence window must be > 0".into()));
        }
        let unit = [
            ("detector_efficiency_a", self.detector_efficiency_a),
            ("detector_efficiency_b", self.detector_efficiency_b),
            ("intrinsic_pair_error", self.intrinsic_pair_error),
            ("noise_error", self.noise_error),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(QkdError::InvalidParams(format!("{name} must be in [0, 1]")));
            }
        }
        if !(self.error_correction_inefficiency >= 1.0) {
            return Err(QkdError::InvalidParams("f_ec must be >= 1".into()));
        }
        for (name, v) in [("epsilon_sec", self.epsilon_sec), ("epsilon_corr", self.epsilon_corr)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(QkdError::InvalidParams(format!("{name} must be in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Binary entropy h2(x) = −x log2 x − (1−x) log2(1−x), zero at the endpoints.
pub fn binary_entropy(x: f64) -> Result<f64, QkdError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(QkdError::Domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Detection probabilities for one coincidence window at fixed channel
/// transmissions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkInstant {
    pub eta_a: f64,
    pub eta_b: f64,
    pub y0a: f64,
    pub y0b: f64,
    pub y1a: f64,
    pub y1b: f64,
    /// Y_0 = y0a·y0b.
    pub noise_coincidence: f64,
    /// Y_1 per the coincidence product formula.
    pub pair_coincidence: f64,
    /// p_0 = exp(−µΔt).
    pub no_pair_probability: f64,
}

/// Builds the per-window probabilities from the channel transmissions.
pub fn coincidence_probabilities(
    params: &QkdParams,
    tau_a: f64,
    tau_b: f64,
) -> Result<LinkInstant, QkdError> {
    params.validate()?;
    for (name, v) in [("tau_a", tau_a), ("tau_b", tau_b)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(QkdError::Domain(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let dt = params.coincidence_window_s;
    let y0a = 1.0 - (-params.dark_rate_a_cps * dt).exp();
    let y0b = 1.0 - (-params.dark_rate_b_cps * dt).exp();
    let (y1a, y1b) = (1.0 - y0a, 1.0 - y0b);
    let eta_a = tau_a * params.detector_efficiency_a;
    let eta_b = tau_b * params.detector_efficiency_b;
    Ok(LinkInstant {
        eta_a,
        eta_b,
        y0a,
        y0b,
        y1a,
        y1b,
        noise_coincidence: y0a * y0b,
        pair_coincidence: (y0a + eta_a * y1a) * (y0b + eta_b * y1b),
        no_pair_probability: (-params.pair_rate_hz * dt).exp(),
    })
}

impl LinkInstant {
    /// p0 Y0 + (1−p0) Y1, the per-window coincidence probability.
    pub fn coincidence_mass(&self) -> f64 {
        self.no_pair_probability * self.noise_coincidence
            + (1.0 - self.no_pair_probability) * self.pair_coincidence
    }

    /// Erroneous share of the coincidence mass.
    pub fn error_mass(&self, params: &QkdParams) -> f64 {
        let e0 = params.noise_error;
        let ed = params.intrinsic_pair_error;
        let signal = self.eta_a * self.eta_b * self.y1a * self.y1b;
        self.no_pair_probability * self.noise_coincidence * e0
            + (1.0 - self.no_pair_probability) * (e0 * self.pair_coincidence - (e0 - ed) * signal)
    }
}

/// Coincidence rate R_c in coincidences per second.
pub fn coincidence_rate(instant: &LinkInstant, params: &QkdParams) -> f64 {
    instant.coincidence_mass() / params.coincidence_window_s
}

/// Quantum bit error rate at one instant.
pub fn qber(instant: &LinkInstant, params: &QkdParams) -> Result<f64, QkdError> {
    let mass = instant.coincidence_mass();
    if mass <= 0.0 {
        return Err(QkdError::UndefinedQber);
    }
    Ok(instant.error_mass(params) / mass)
}

/// Secret fraction 1 − f_ec h2(e) − h2(e); negative values mean no key.
pub fn secret_fraction(e: f64, f_ec: f64) -> Result<f64, QkdError> {
    let h = binary_entropy(e)?;
    Ok(1.0 - f_ec * h - h)
}

/// Asymptotic secret key rate K_A = max(0, ½ R_c (1 − f_ec h2(e) − h2(e))).
pub fn asymptotic_key_rate(
    coincidence_rate_cps: f64,
    e: f64,
    params: &QkdParams,
) -> Result<f64, QkdError> {
    let frac = secret_fraction(e, params.error_correction_inefficiency)?;
    Ok((0.5 * coincidence_rate_cps * frac).max(0.0))
}

/// Finite-size key rate with its saturation flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteSizeRate {
    pub rate_bps: f64,
    /// True when C_T = 0 or the deviation-inflated error reached ½.
    pub saturated: bool,
}

/// Constant penalty log2(2/(ε_corr ε_sec²)) in bits.
pub fn finite_size_penalty_bits(params: &QkdParams) -> f64 {
    (2.0 / (params.epsilon_corr * params.epsilon_sec * params.epsilon_sec)).log2()
}

/// Finite-size secret key rate over one pass.
pub fn finite_size_key_rate(
    total_coincidences: f64,
    e: f64,
    visibility_time_s: f64,
    params: &QkdParams,
) -> Result<FiniteSizeRate, QkdError> {
    if !(visibility_time_s > 0.0) {
        return Err(QkdError::Domain("visibility time must be > 0".into()));
    }
    if !(total_coincidences >= 0.0) {
        return Err(QkdError::Domain("total coincidences must be >= 0".into()));
    }
    if total_coincidences == 0.0 {
        return Ok(FiniteSizeRate { rate_bps: 0.0, saturated: true });
    }
    let c_t = total_coincidences;
    let deviation =
        ((c_t + 1.0) * (1.0 / params.epsilon_sec).log2() / (4.0 * c_t * c_t)).sqrt();
    let mut saturated = false;
    let mut arg = e + deviation;
    if arg >= 0.5 {
        arg = 0.5;
        saturated = true;
    }
    let value = (c_t
        - c_t * binary_entropy(arg)?
        - c_t * params.error_correction_inefficiency * binary_entropy(e)?
        - finite_size_penalty_bits(params))
        / visibility_time_s;
    Ok(FiniteSizeRate { rate_bps: value.max(0.0), saturated })
}

/// One masked trajectory point with its per-station transmission
/// distributions.
#[derive(Debug, Clone)]
pub struct PassPoint {
    pub point: TrajectoryPoint,
    pub pdte_a: TransmittanceDistribution,
    pub pdte_b: TransmittanceDistribution,
}

/// Per-point link observables.
#[derive(Debug, Clone, Copy)]
pub struct PointBudget {
    pub t_s: f64,
    pub coincidence_rate_cps: f64,
    /// NaN when the coincidence mass vanishes at this point.
    pub qber: f64,
    pub asymptotic_rate_bps: f64,
}

/// Pass-level totals and key rates.
#[derive(Debug, Clone)]
pub struct QkdLinkBudget {
    pub points: Vec<PointBudget>,
    /// C_T, expected coincidences over the pass.
    pub total_coincidences: f64,
    /// T_v, seconds of masked visibility.
    pub visibility_time_s: f64,
    /// Coincidence-weighted average QBER.
    pub average_qber: f64,
    /// K_A from the pass-average rate and QBER.
    pub asymptotic_rate_bps: f64,
    pub finite_size: FiniteSizeRate,
}

/// Expected per-window quantities with (τ_a, τ_b) independently distributed.
///
/// The coincidence product is affine in each τ separately, so the joint
/// expectation factorizes into per-channel integrals over the PDTE grids.
fn expected_masses(
    params: &QkdParams,
    pdte_a: &TransmittanceDistribution,
    pdte_b: &TransmittanceDistribution,
) -> Result<(f64, f64), QkdError> {
    let base = coincidence_probabilities(params, 0.0, 0.0)?;
    let mean_a = pdte_a.pdf().expectation(|t| t);
    let mean_b = pdte_b.pdf().expectation(|t| t);
    let arm_a = pdte_a
        .pdf()
        .expectation(|t| base.y0a + params.detector_efficiency_a * t * base.y1a);
    let arm_b = pdte_b
        .pdf()
        .expectation(|t| base.y0b + params.detector_efficiency_b * t * base.y1b);
    let pair = arm_a * arm_b;
    let p0 = base.no_pair_probability;
    let coincidence = p0 * base.noise_coincidence + (1.0 - p0) * pair;
    let e0 = params.noise_error;
    let ed = params.intrinsic_pair_error;
    let signal = params.detector_efficiency_a
        * params.detector_efficiency_b
        * mean_a
        * mean_b
        * base.y1a
        * base.y1b;
    let error = p0 * base.noise_coincidence * e0
        + (1.0 - p0) * (e0 * pair - (e0 - ed) * signal);
    Ok((coincidence, error))
}

/// Aggregates per-point expectations into pass totals and key rates.
///
/// Time steps come from the point spacing (the last point reuses the
/// preceding step; a single point counts as one second).
pub fn pass_budget(points: &[PassPoint], params: &QkdParams) -> Result<QkdLinkBudget, QkdError> {
    if points.is_empty() {
        return Err(QkdError::Domain("pass must contain at least one point".into()));
    }
    params.validate()?;
    let dt = params.coincidence_window_s;

    let mut steps = Vec::with_capacity(points.len());
    for w in points.windows(2) {
        steps.push(w[1].point.t_s - w[0].point.t_s);
    }
    steps.push(steps.last().copied().unwrap_or(1.0));

    let mut budgets = Vec::with_capacity(points.len());
    let mut total_coincidences = 0.0;
    let mut total_errors = 0.0;
    let mut visibility = 0.0;
    let mut any_defined = false;
    for (p, &step) in points.iter().zip(&steps) {
        let (c_mass, e_mass) = expected_masses(params, &p.pdte_a, &p.pdte_b)?;
        let rate = c_mass / dt;
        let (point_qber, ka) = if c_mass > 0.0 {
            any_defined = true;
            let e = e_mass / c_mass;
            (e, asymptotic_key_rate(rate, e.clamp(0.0, 1.0), params)?)
        } else {
            (f64::NAN, 0.0)
        };
        budgets.push(PointBudget {
            t_s: p.point.t_s,
            coincidence_rate_cps: rate,
            qber: point_qber,
            asymptotic_rate_bps: ka,
        });
        total_coincidences += rate * step;
        total_errors += (e_mass / dt) * step;
        visibility += step;
    }
    if !any_defined {
        return Err(QkdError::UndefinedQber);
    }
    let average_qber = (total_errors / total_coincidences).clamp(0.0, 1.0);
    let mean_rate = total_coincidences / visibility;
    let asymptotic_rate_bps = asymptotic_key_rate(mean_rate, average_qber, params)?;
    let finite_size =
        finite_size_key_rate(total_coincidences, average_qber, visibility, params)?;
    Ok(QkdLinkBudget {
        points: budgets,
        total_coincidences,
        visibility_time_s: visibility,
        average_qber,
        asymptotic_rate_bps,
        finite_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{GridDensity, Pdf};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn table_params() -> QkdParams {
        QkdParams::default()
    }

    #[test]
    fn binary_entropy_reference_points() {
        assert_relative_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // the ~11% BBM92 threshold
        assert_relative_eq!(binary_entropy(0.11).unwrap(), 0.4999, max_relative = 1e-3);
        assert!(binary_entropy(-0.01).is_err());
        assert!(binary_entropy(1.01).is_err());
    }

    #[test]
    fn window_probabilities_from_table_values() {
        let p = table_params();
        let inst = coincidence_probabilities(&p, 0.0, 0.0).unwrap();
        // d·Δt = 2.1e-5
        assert_relative_eq!(inst.y0a, 2.09998e-5, max_relative = 1e-5);
        assert_relative_eq!(inst.no_pair_probability, 0.994316, epsilon = 1e-6);
    }

    #[test]
    fn lossless_noiseless_limit() {
        let mut p = table_params();
        p.dark_rate_a_cps = 0.0;
        p.dark_rate_b_cps = 0.0;
        p.detector_efficiency_a = 1.0;
        p.detector_efficiency_b = 1.0;
        let inst = coincidence_probabilities(&p, 1.0, 1.0).unwrap();
        assert_relative_eq!(inst.pair_coincidence, 1.0, epsilon = 1e-15);
        assert_eq!(inst.noise_coincidence, 0.0);
        // R_c = (1 − p0)/Δt ≈ µ in the small-µΔt limit
        let rc = coincidence_rate(&inst, &p);
        assert_relative_eq!(rc, p.pair_rate_hz, max_relative = 3e-3);
    }

    #[test]
    fn coincidence_rate_noise_floor() {
        let p = table_params();
        let inst = coincidence_probabilities(&p, 0.0, 0.0).unwrap();
        // y0a·y0b/Δt ≈ 0.88 coincidences/s with Table values
        assert_relative_eq!(coincidence_rate(&inst, &p), 0.882, max_relative = 1e-2);
        let zero = LinkInstant {
            noise_coincidence: 0.0,
            pair_coincidence: 0.0,
            ..inst
        };
        assert_eq!(coincidence_rate(&zero, &p), 0.0);
    }

    #[test]
    fn qber_limits() {
        let p = table_params();
        // Noise only: random outcomes.
        let inst = coincidence_probabilities(&p, 0.0, 0.0).unwrap();
        assert_relative_eq!(qber(&inst, &p).unwrap(), 0.5, epsilon = 1e-12);
        // Signal only: intrinsic pair error.
        let mut clean = table_params();
        clean.dark_rate_a_cps = 0.0;
        clean.dark_rate_b_cps = 0.0;
        clean.detector_efficiency_a = 1.0;
        clean.detector_efficiency_b = 1.0;
        let inst = coincidence_probabilities(&clean, 1.0, 1.0).unwrap();
        assert_relative_eq!(qber(&inst, &clean).unwrap(), clean.intrinsic_pair_error, epsilon = 1e-12);
        // Zero coincidence mass: undefined.
        let inst = coincidence_probabilities(&clean, 0.0, 0.0).unwrap();
        assert!(matches!(qber(&inst, &clean), Err(QkdError::UndefinedQber)));
    }

    #[test]
    fn qber_equal_signal_and_accidental_masses() {
        // With e_d = 0, QBER is 0.5 · accidental/(accidental + signal); at
        // equal masses it is exactly 0.25. Bisect τ to equalize the masses.
        let mut p = table_params();
        p.intrinsic_pair_error = 0.0;
        let masses = |tau: f64| {
            let inst = coincidence_probabilities(&p, tau, tau).unwrap();
            let total = inst.coincidence_mass();
            let signal = (1.0 - inst.no_pair_probability)
                * inst.eta_a
                * inst.eta_b
                * inst.y1a
                * inst.y1b;
            (signal, total - signal)
        };
        let (mut lo, mut hi) = (1e-8, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let (s, a) = masses(mid);
            if s < a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        let inst = coincidence_probabilities(&p, tau, tau).unwrap();
        assert_relative_eq!(qber(&inst, &p).unwrap(), 0.25, max_relative = 1e-6);
    }

    #[test]
    fn asymptotic_rate_reference_points() {
        let p = table_params();
        assert_relative_eq!(
            asymptotic_key_rate(1000.0, 0.0, &p).unwrap(),
            500.0,
            epsilon = 1e-9
        );
        assert_eq!(asymptotic_key_rate(1000.0, 0.5, &p).unwrap(), 0.0);
        // f_ec = 1.16, e = 0.05: K_A ≈ 0.1907 R_c
        assert_relative_eq!(
            asymptotic_key_rate(1.0, 0.05, &p).unwrap(),
            0.1907,
            max_relative = 1e-3
        );
    }

    #[test]
    fn finite_size_zero_and_penalty() {
        let p = table_params();
        let r = finite_size_key_rate(0.0, 0.1, 100.0, &p).unwrap();
        assert_eq!(r.rate_bps, 0.0);
        assert!(r.saturated);
        // log2(2/(1e-10 · 1e-20)) = 1 + 30·log2(10) ≈ 100.66
        assert_relative_eq!(finite_size_penalty_bits(&p), 100.66, epsilon = 1e-2);
    }

    #[test]
    fn finite_size_approaches_asymptotic_bracket() {
        let p = table_params();
        let c_t = 1e12;
        let e = 0.05;
        let r = finite_size_key_rate(c_t, e, 1.0, &p).unwrap();
        let per_coincidence = r.rate_bps / c_t;
        let bracket = 1.0
            - (1.0 + p.error_correction_inefficiency) * binary_entropy(e).unwrap();
        assert!((per_coincidence - bracket).abs() < 1e-3);
        assert!(!r.saturated);
    }

    #[test]
    fn finite_size_deviation_shrinks_with_counts() {
        let p = table_params();
        let dev = |c_t: f64| {
            ((c_t + 1.0) * (1.0 / p.epsilon_sec).log2() / (4.0 * c_t * c_t)).sqrt()
        };
        let mut prev = f64::INFINITY;
        for c_t in [1e2, 1e4, 1e6, 1e8] {
            let d = dev(c_t);
            assert!(d > 0.0 && d < prev);
            prev = d;
        }
    }

    fn delta_dist(v: f64) -> TransmittanceDistribution {
        TransmittanceDistribution::from_pdf(Pdf::Point(v)).unwrap()
    }

    fn pass_point(t: f64, tau_a: f64, tau_b: f64) -> PassPoint {
        PassPoint {
            point: TrajectoryPoint {
                t_s: t,
                range_a_m: 1e6,
                elev_a_rad: 0.5,
                range_b_m: 1e6,
                elev_b_rad: 0.5,
            },
            pdte_a: delta_dist(tau_a),
            pdte_b: delta_dist(tau_b),
        }
    }

    #[test]
    fn single_point_pass_matches_scalar_pipeline() {
        let p = table_params();
        let budget = pass_budget(&[pass_point(0.0, 0.01, 0.02)], &p).unwrap();
        let inst = coincidence_probabilities(&p, 0.01, 0.02).unwrap();
        assert_relative_eq!(
            budget.points[0].coincidence_rate_cps,
            coincidence_rate(&inst, &p),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            budget.points[0].qber,
            qber(&inst, &p).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(budget.visibility_time_s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pass_totals_converge_with_time_resolution() {
        let p = table_params();
        let tau_of_t = |t: f64| 0.004 + 0.002 * (t / 100.0);
        let coarse: Vec<PassPoint> =
            (0..=100).map(|i| pass_point(i as f64, tau_of_t(i as f64), 0.005)).collect();
        let fine: Vec<PassPoint> = (0..=200)
            .map(|i| pass_point(i as f64 * 0.5, tau_of_t(i as f64 * 0.5), 0.005))
            .collect();
        let a = pass_budget(&coarse, &p).unwrap();
        let b = pass_budget(&fine, &p).unwrap();
        assert_relative_eq!(
            a.total_coincidences / a.visibility_time_s,
            b.total_coincidences / b.visibility_time_s,
            max_relative = 1e-3
        );
    }

    #[test]
    fn all_dark_pass_yields_no_key() {
        let p = table_params();
        let pts: Vec<PassPoint> = (0..10).map(|i| pass_point(i as f64, 0.0, 0.0)).collect();
        let budget = pass_budget(&pts, &p).unwrap();
        for pb in &budget.points {
            assert_relative_eq!(pb.qber, 0.5, epsilon = 1e-12);
        }
        assert_eq!(budget.asymptotic_rate_bps, 0.0);
        assert_eq!(budget.finite_size.rate_bps, 0.0);
    }

    #[test]
    fn station_labels_are_symmetric() {
        let p = table_params();
        let fwd = pass_budget(&[pass_point(0.0, 0.01, 0.05)], &p).unwrap();
        let rev = pass_budget(&[pass_point(0.0, 0.05, 0.01)], &p).unwrap();
        assert_relative_eq!(
            fwd.total_coincidences,
            rev.total_coincidences,
            max_relative = 1e-12
        );
        assert_relative_eq!(fwd.average_qber, rev.average_qber, max_relative = 1e-12);
        assert_relative_eq!(
            fwd.asymptotic_rate_bps,
            rev.asymptotic_rate_bps,
            max_relative = 1e-12
        );
    }

    #[test]
    fn expectation_equals_mean_product_for_bilinear_coincidence() {
        // The coincidence mass is bilinear in (τ_a, τ_b); with independent
        // channels the full grid expectation must match plugging in the
        // means (the "< 1% for small efficiencies" bound holds trivially).
        let p = table_params();
        let xs: Vec<f64> = (0..501).map(|i| 1e-4 + 9e-3 * i as f64 / 500.0).collect();
        let ps: Vec<f64> = xs.iter().map(|x| 1.0 + 20.0 * x).collect();
        let g = TransmittanceDistribution::from_pdf(Pdf::Grid(
            GridDensity::normalized(xs, ps).unwrap(),
        ))
        .unwrap();
        let (c_full, _) = expected_masses(&p, &g, &g).unwrap();

        // Double-grid quadrature oracle.
        let (gx, gp) = match g.pdf() {
            Pdf::Grid(d) => (d.xs().to_vec(), d.ps().to_vec()),
            _ => unreachable!(),
        };
        let mut oracle = 0.0;
        let mut mass = 0.0;
        for i in 1..gx.len() {
            let wa = 0.5 * (gp[i - 1] + gp[i]) * (gx[i] - gx[i - 1]);
            let ta = 0.5 * (gx[i - 1] + gx[i]);
            for j in 1..gx.len() {
                let wb = 0.5 * (gp[j - 1] + gp[j]) * (gx[j] - gx[j - 1]);
                let tb = 0.5 * (gx[j - 1] + gx[j]);
                let inst = coincidence_probabilities(&p, ta, tb).unwrap();
                oracle += wa * wb * inst.coincidence_mass();
                mass += wa * wb;
            }
        }
        oracle /= mass;
        assert_relative_eq!(c_full, oracle, max_relative = 1e-5);

        // Mean-product route.
        let inst = coincidence_probabilities(&p, g.mean(), g.mean()).unwrap();
        let diff = (c_full - inst.coincidence_mass()).abs() / inst.coincidence_mass();
        assert!(diff < 0.01, "nonlinear vs linearized mismatch {diff}");
    }

    proptest! {
        #[test]
        fn entropy_is_symmetric(x in 0.0_f64..=1.0) {
            let a = binary_entropy(x).unwrap();
            let b = binary_entropy(1.0 - x).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn asymptotic_rate_monotonicity(
            rc in 0.0_f64..1e6,
            bump in 0.0_f64..1e5,
            e in 0.0_f64..0.5,
            de in 0.0_f64..0.2,
        ) {
            let p = QkdParams::default();
            let base = asymptotic_key_rate(rc, e, &p).unwrap();
            // Nondecreasing in R_c at fixed e.
            prop_assert!(asymptotic_key_rate(rc + bump, e, &p).unwrap() >= base - 1e-12);
            // Nonincreasing in e at fixed R_c (e <= 0.5).
            let e2 = (e + de).min(0.5);
            prop_assert!(asymptotic_key_rate(rc, e2, &p).unwrap() <= base + 1e-12);
        }

        #[test]
        fn qber_stays_between_intrinsic_and_noise_error(
            tau_a in 1e-6_f64..1.0,
            tau_b in 1e-6_f64..1.0,
        ) {
            let p = QkdParams::default();
            let inst = coincidence_probabilities(&p, tau_a, tau_b).unwrap();
            let e = qber(&inst, &p).unwrap();
            prop_assert!(e >= p.intrinsic_pair_error - 1e-12);
            prop_assert!(e <= p.noise_error + 1e-12);
        }
    }
}
