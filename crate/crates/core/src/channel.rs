//! Free-space channel model: geometric loss with pointing-jitter beam
//! wandering, parametric atmospheric absorption, and the per-point
//! probability distribution of transmission efficiency (PDTE).
//!
//! The beam displacement from the receiver center follows a Weibull law
//! (shape 2 = isotropic Gaussian jitter, scale θ_p·R). The transmitted
//! fraction at displacement r uses the far-field parameterization
//! τ(r) = η₀ exp(−(r/R_s)^λ) of a truncated Gaussian beam over a circular
//! aperture, with (η₀, λ, R_s) in closed form from modified Bessel
//! functions. The PDTE is the Mellin product of the beam-wander and fiber
//! coupling distributions, times a deterministic absorption/optics factor.

use thiserror::Error;

use crate::adaptive_optics::CouplingDistribution;
use crate::dist::{mellin_product, DistError, GridDensity, Pdf};
use crate::math::{bessel_i0, bessel_i1};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid beam geometry: {0}")]
    InvalidGeometry(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("distribution not normalized (mass {0})")]
    NotNormalized(f64),
    #[error("transmittance support [{0}, {1}] outside [0, 1]")]
    SupportOutOfRange(f64, f64),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Downlink beam and receiver geometry at one trajectory point.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamGeometry {
    /// Full 1/e² divergence half-angle θ_d, radians.
    pub divergence_rad: f64,
    /// Satellite–station distance R, meters.
    pub range_m: f64,
    /// Receiver aperture diameter D_Rx, meters.
    pub receiver_diameter_m: f64,
    /// Pointing jitter standard deviation θ_p, radians.
    pub pointing_jitter_rad: f64,
    /// Weibull shape of the radial displacement (2 = Rayleigh).
    pub weibull_shape: f64,
}

impl BeamGeometry {
    pub fn new(
        divergence_rad: f64,
        range_m: f64,
        receiver_diameter_m: f64,
        pointing_jitter_rad: f64,
    ) -> Result<Self, ChannelError> {
        let g = Self {
            divergence_rad,
            range_m,
            receiver_diameter_m,
            pointing_jitter_rad,
            weibull_shape: 2.0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_weibull_shape(mut self, shape: f64) -> Result<Self, ChannelError> {
        self.weibull_shape = shape;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ChannelError> {
        if !(self.divergence_rad > 0.0) {
            return Err(ChannelError::InvalidGeometry("divergence must be > 0".into()));
        }
        if !(self.range_m > 0.0) {
            return Err(ChannelError::InvalidGeometry("range must be > 0".into()));
        }
        if !(self.receiver_diameter_m > 0.0) {
            return Err(ChannelError::InvalidGeometry("receiver diameter must be > 0".into()));
        }
        if !(self.pointing_jitter_rad >= 0.0) {
            return Err(ChannelError::InvalidGeometry("pointing jitter must be >= 0".into()));
        }
        if !(self.weibull_shape > 0.0) {
            return Err(ChannelError::InvalidGeometry("weibull shape must be > 0".into()));
        }
        Ok(())
    }

    /// Beam waist on ground, w = θ_d · R.
    pub fn beam_waist_m(&self) -> f64 {
        self.divergence_rad * self.range_m
    }

    pub fn aperture_radius_m(&self) -> f64 {
        self.receiver_diameter_m / 2.0
    }
}

/// Parameters of τ(r) = η₀ exp(−(r/R_s)^λ) for a Gaussian beam over a
/// circular aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldParams {
    /// Centered-beam transmittance η₀ = 1 − exp(−2a²/w²).
    pub peak_transmittance: f64,
    /// Falloff exponent λ.
    pub falloff_exponent: f64,
    /// Falloff radius R_s, meters.
    pub falloff_radius_m: f64,
}

/// Closed-form (η₀, λ, R_s) from the beam waist and aperture radius.
pub fn far_field_params(geom: &BeamGeometry) -> FarFieldParams {
    let a = geom.aperture_radius_m();
    let w = geom.beam_waist_m();
    let x = 4.0 * a * a / (w * w);
    let eta0 = 1.0 - (-x / 2.0).exp();
    let t = 1.0 - (-x).exp() * bessel_i0(x);
    let log_term = (2.0 * eta0 / t).ln();
    let lambda = 2.0 * x * ((-x).exp() * bessel_i1(x) / t) / log_term;
    let r_s = a * log_term.powf(-1.0 / lambda);
    FarFieldParams {
        peak_transmittance: eta0,
        falloff_exponent: lambda,
        falloff_radius_m: r_s,
    }
}

/// Transmittance at beam displacement r from the aperture center.
pub fn displaced_transmittance(p: &FarFieldParams, r_m: f64) -> f64 {
    p.peak_transmittance * (-(r_m / p.falloff_radius_m).powf(p.falloff_exponent)).exp()
}

/// A transmission distribution with support inside [0, 1].
#[derive(Debug, Clone)]
pub struct TransmittanceDistribution {
    pdf: Pdf,
}

impl TransmittanceDistribution {
    pub fn from_pdf(pdf: Pdf) -> Result<Self, ChannelError> {
        let (lo, hi) = pdf.support();
        if lo < -1e-12 || hi > 1.0 + 1e-9 {
            return Err(ChannelError::SupportOutOfRange(lo, hi));
        }
        if let Pdf::Grid(_) = &pdf {
            let mass = pdf.total_mass();
            if (mass - 1.0).abs() > 1e-6 {
                return Err(ChannelError::NotNormalized(mass));
            }
        }
        Ok(Self { pdf })
    }

    /// Histogram form of a Monte-Carlo coupling distribution.
    pub fn from_coupling(
        coupling: &CouplingDistribution,
        n_bins: usize,
    ) -> Result<Self, ChannelError> {
        Self::from_pdf(coupling.to_pdf(n_bins)?)
    }

    pub fn pdf(&self) -> &Pdf {
        &self.pdf
    }

    pub fn mean(&self) -> f64 {
        self.pdf.mean()
    }

    pub fn support(&self) -> (f64, f64) {
        self.pdf.support()
    }

    /// Writes `tau,density` CSV rows (a point mass prints one row).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau,density")?;
        match &self.pdf {
            Pdf::Point(v) => writeln!(w, "{v},inf")?,
            Pdf::Grid(g) => {
                for (x, p) in g.xs().iter().zip(g.ps()) {
                    writeln!(w, "{x},{p}")?;
                }
            }
        }
        Ok(())
    }
}

/// Weibull tail probability kept out of the transmission grid.
const WANDER_TAIL: f64 = 1e-12;
/// Smallest transmission resolved relative to η₀; deeper fades are lumped
/// into the lowest grid cell.
const WANDER_FLOOR: f64 = 1e-15;

/// Distribution of the transmitted fraction under pointing-jitter beam
/// wandering (P_BW).
pub fn beam_wander_distribution(
    geom: &BeamGeometry,
    n_grid: usize,
) -> Result<TransmittanceDistribution, ChannelError> {
    geom.validate()?;
    assert!(n_grid >= 16, "beam wander grid too small");
    let p = far_field_params(geom);
    let eta0 = p.peak_transmittance;
    let scale = geom.pointing_jitter_rad * geom.range_m;
    if scale == 0.0 {
        return TransmittanceDistribution::from_pdf(Pdf::Point(eta0));
    }
    let k = geom.weibull_shape;
    let lambda = p.falloff_exponent;
    let r_s = p.falloff_radius_m;

    // Work in u = ln(η₀/τ) = (r/R_s)^λ, a uniform grid with a half-step
    // offset at the top so the (integrable) edge behavior stays bounded.
    let r_tail = scale * (-f64::ln(WANDER_TAIL)).powf(1.0 / k);
    let u_cap = (r_tail / r_s).powf(lambda).min(-f64::ln(WANDER_FLOOR));
    if u_cap < 1e-10 {
        // Jitter far too small to move the beam off the aperture.
        return TransmittanceDistribution::from_pdf(Pdf::Point(eta0));
    }
    let du = u_cap / n_grid as f64;
    let weibull_pdf = |r: f64| {
        (k / scale) * (r / scale).powf(k - 1.0) * (-(r / scale).powf(k)).exp()
    };
    // Descending in τ (ascending in u), then reversed.
    let mut taus = Vec::with_capacity(n_grid);
    let mut ps = Vec::with_capacity(n_grid);
    for i in 0..n_grid {
        let u = du / 2.0 + du * i as f64;
        let tau = eta0 * (-u).exp();
        let r = r_s * u.powf(1.0 / lambda);
        // f_τ(τ) = f_W(r) · |dr/dτ| with dr/dτ = (R_s/λ) u^(1/λ-1) / τ
        let drdtau = (r_s / lambda) * u.powf(1.0 / lambda - 1.0) / tau;
        taus.push(tau);
        ps.push(weibull_pdf(r) * drdtau);
    }
    taus.reverse();
    ps.reverse();
    // Fades deeper than the floor carry real probability; lump them into the
    // lowest cell so the distribution stays honest about near-zero mass.
    let r_cap = r_s * u_cap.powf(1.0 / lambda);
    let tail_mass = (-(r_cap / scale).powf(k)).exp();
    if tail_mass > 0.0 && taus.len() >= 2 {
        let cell = taus[1] - taus[0];
        ps[0] += tail_mass / cell;
    }
    let density = GridDensity::normalized(taus, ps)?;
    TransmittanceDistribution::from_pdf(Pdf::Grid(density))
}

/// Plane-parallel absorption: T(elev) = T_zenith^(1/sin elev).
pub fn atmospheric_transmittance(
    elevation_rad: f64,
    zenith_transmittance: f64,
) -> Result<f64, ChannelError> {
    if !(elevation_rad > 0.0) {
        return Err(ChannelError::Domain(format!(
            "elevation must be > 0, got {elevation_rad}"
        )));
    }
    if !(zenith_transmittance > 0.0 && zenith_transmittance <= 1.0) {
        return Err(ChannelError::Domain(
            "zenith transmittance must be in (0, 1]".into(),
        ));
    }
    Ok(zenith_transmittance.powf(1.0 / elevation_rad.sin()))
}

/// Probability distribution of the channel transmission efficiency:
/// Mellin product of P_BW and P_AO, scaled by the deterministic
/// absorption/optics factor.
pub fn pdte(
    p_bw: &TransmittanceDistribution,
    p_ao: &TransmittanceDistribution,
    deterministic_factor: f64,
    n_grid: usize,
) -> Result<TransmittanceDistribution, ChannelError> {
    if !(deterministic_factor > 0.0 && deterministic_factor <= 1.0) {
        return Err(ChannelError::Domain(
            "deterministic factor must be in (0, 1]".into(),
        ));
    }
    for d in [p_bw, p_ao] {
        let mass = d.pdf().total_mass();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(ChannelError::NotNormalized(mass));
        }
    }
    let product = mellin_product(p_bw.pdf(), p_ao.pdf(), deterministic_factor, n_grid)?;
    TransmittanceDistribution::from_pdf(product)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{ks_distance, PdfSampler};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn paper_geometry(jitter: f64) -> BeamGeometry {
        // θ_d = 10 µrad, R = 500 km, D_Rx = 1.5 m
        BeamGeometry::new(10e-6, 500e3, 1.5, jitter).unwrap()
    }

    /// 2-D quadrature of the offset Gaussian beam over the aperture disk.
    fn oracle_transmittance(geom: &BeamGeometry, r: f64) -> f64 {
        let a = geom.aperture_radius_m();
        let w = geom.beam_waist_m();
        let n = 400;
        let h_rho = a / n as f64;
        let h_phi = 2.0 * std::f64::consts::PI / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let rho = (i as f64 + 0.5) * h_rho;
            for j in 0..n {
                let phi = (j as f64 + 0.5) * h_phi;
                let d2 = rho * rho + r * r - 2.0 * rho * r * phi.cos();
                sum += rho * (-2.0 * d2 / (w * w)).exp();
            }
        }
        sum * h_rho * h_phi * 2.0 / (std::f64::consts::PI * w * w)
    }

    #[test]
    fn centered_transmittance_matches_closed_form_and_oracle() {
        let geom = paper_geometry(0.0);
        let p = far_field_params(&geom);
        // w = 5 m, a = 0.75 m: η₀ = 1 - exp(-2·0.75²/25) ≈ 0.0440
        assert_relative_eq!(p.peak_transmittance, 0.0440, max_relative = 2e-3);
        assert_relative_eq!(
            p.peak_transmittance,
            oracle_transmittance(&geom, 0.0),
            max_relative = 1e-3
        );
        // Near-quadratic falloff for w >> a.
        assert_relative_eq!(p.falloff_exponent, 2.0, max_relative = 5e-3);
    }

    #[test]
    fn displaced_transmittance_matches_2d_oracle() {
        let geom = paper_geometry(1e-6);
        let p = far_field_params(&geom);
        for &r in &[0.25, 0.5, 1.0, 1.5, 2.5] {
            let approx_tau = displaced_transmittance(&p, r);
            let exact = oracle_transmittance(&geom, r);
            assert_relative_eq!(approx_tau, exact, max_relative = 0.02);
        }
    }

    #[test]
    fn zero_jitter_gives_point_mass_at_eta0() {
        let d = beam_wander_distribution(&paper_geometry(0.0), 1024).unwrap();
        match d.pdf() {
            Pdf::Point(v) => {
                assert_relative_eq!(*v, 1.0 - (-2.0 * 0.5625 / 25.0_f64).exp(), epsilon = 1e-12)
            }
            _ => panic!("expected point mass"),
        }
    }

    #[test]
    fn beam_wander_mean_matches_weibull_quadrature() {
        let geom = paper_geometry(1e-6);
        let d = beam_wander_distribution(&geom, 4096).unwrap();
        // E[τ(r)] by direct quadrature over the Weibull density.
        let p = far_field_params(&geom);
        let s = geom.pointing_jitter_rad * geom.range_m;
        let n = 200_000;
        let r_hi = 8.0 * s;
        let h = r_hi / n as f64;
        let mut want = 0.0;
        for i in 0..n {
            let r = (i as f64 + 0.5) * h;
            let pdf = (2.0 * r / (s * s)) * (-(r / s) * (r / s)).exp();
            want += pdf * displaced_transmittance(&p, r) * h;
        }
        assert_relative_eq!(d.mean(), want, max_relative = 1e-4);
        assert_relative_eq!(d.pdf().total_mass(), 1.0, epsilon = 1e-9);
        let (lo, hi) = d.support();
        assert!(lo > 0.0 && hi <= p.peak_transmittance * (1.0 + 1e-12));
    }

    #[test]
    fn strong_jitter_keeps_deep_fade_mass() {
        // Jitter scale well beyond the falloff radius: most of the mass sits
        // in deep fades near zero transmission.
        let geom = BeamGeometry::new(10e-6, 500e3, 1.5, 20e-6).unwrap();
        let d = beam_wander_distribution(&geom, 4096).unwrap();
        assert_relative_eq!(d.pdf().total_mass(), 1.0, epsilon = 1e-9);
        let p = far_field_params(&geom);
        let s = geom.pointing_jitter_rad * geom.range_m;
        // Oracle mean via quadrature.
        let n = 400_000;
        let h = 8.0 * s / n as f64;
        let mut want = 0.0;
        for i in 0..n {
            let r = (i as f64 + 0.5) * h;
            let pdf = (2.0 * r / (s * s)) * (-(r / s) * (r / s)).exp();
            want += pdf * displaced_transmittance(&p, r) * h;
        }
        assert_relative_eq!(d.mean(), want, max_relative = 2e-3);
    }

    #[test]
    fn atmospheric_transmittance_air_mass_law() {
        assert_relative_eq!(
            atmospheric_transmittance(std::f64::consts::FRAC_PI_2, 0.9).unwrap(),
            0.9,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            atmospheric_transmittance(f64::to_radians(30.0), 0.9).unwrap(),
            0.81,
            max_relative = 1e-12
        );
        for el in [0.4, 0.9, 1.5] {
            assert_relative_eq!(atmospheric_transmittance(el, 1.0).unwrap(), 1.0, epsilon = 1e-12);
        }
        assert!(atmospheric_transmittance(0.0, 0.9).is_err());
        assert!(atmospheric_transmittance(0.5, 1.5).is_err());
    }

    fn uniform01(n: usize) -> TransmittanceDistribution {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        TransmittanceDistribution::from_pdf(Pdf::Grid(
            GridDensity::normalized(xs, vec![1.0; n]).unwrap(),
        ))
        .unwrap()
    }

    #[test]
    fn pdte_point_masses_multiply() {
        let a = TransmittanceDistribution::from_pdf(Pdf::Point(0.5)).unwrap();
        let b = TransmittanceDistribution::from_pdf(Pdf::Point(0.4)).unwrap();
        let p = pdte(&a, &b, 1.0, 64).unwrap();
        match p.pdf() {
            Pdf::Point(v) => assert_relative_eq!(*v, 0.2, epsilon = 1e-15),
            _ => panic!("expected point"),
        }
    }

    #[test]
    fn pdte_identity_element() {
        let geom = paper_geometry(1e-6);
        let bw = beam_wander_distribution(&geom, 2048).unwrap();
        let unit = TransmittanceDistribution::from_pdf(Pdf::Point(1.0)).unwrap();
        let p = pdte(&bw, &unit, 1.0, 2048).unwrap();
        match (bw.pdf(), p.pdf()) {
            (Pdf::Grid(a), Pdf::Grid(b)) => {
                for (x, y) in a.xs().iter().zip(b.xs()) {
                    assert_relative_eq!(x, y, epsilon = 1e-15);
                }
                for (x, y) in a.ps().iter().zip(b.ps()) {
                    assert_relative_eq!(x, y, epsilon = 1e-15);
                }
            }
            _ => panic!("expected grids"),
        }
    }

    #[test]
    fn pdte_uniforms_give_log_density() {
        let u = uniform01(2001);
        let p = pdte(&u, &u, 1.0, 4096).unwrap();
        if let Pdf::Grid(g) = p.pdf() {
            for &tau in &[0.05, 0.1, 0.3, 0.6, 0.9] {
                assert!((g.density_at(tau) + tau.ln()).abs() < 1e-2);
            }
        } else {
            panic!("expected grid");
        }
    }

    #[test]
    fn pdte_mean_product_law_with_factor() {
        let geom = paper_geometry(1e-6);
        let bw = beam_wander_distribution(&geom, 2048).unwrap();
        let u = uniform01(2001);
        let factor = 0.63;
        let p = pdte(&bw, &u, factor, 4096).unwrap();
        assert_relative_eq!(
            p.mean(),
            bw.mean() * u.mean() * factor,
            max_relative = 1e-3
        );
        let (lo, hi) = p.support();
        assert!(lo >= 0.0 && hi <= 1.0);
        assert_relative_eq!(p.pdf().total_mass(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn pdte_agrees_with_monte_carlo_product_sampling() {
        let geom = paper_geometry(1e-6);
        let bw = beam_wander_distribution(&geom, 2048).unwrap();
        let u = uniform01(2001);
        let factor = 0.8;
        let p = pdte(&bw, &u, factor, 4096).unwrap();

        let sx = PdfSampler::new(bw.pdf());
        let sy = PdfSampler::new(u.pdf());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let mut samples: Vec<f64> = (0..100_000)
            .map(|_| sx.draw(rng.random::<f64>()) * sy.draw(rng.random::<f64>()) * factor)
            .collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ks = ks_distance(&samples, p.pdf());
        assert!(ks < 0.01, "KS distance {ks} >= 0.01");
    }

    #[test]
    fn pdte_rejects_unnormalized_input() {
        let xs: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let double = TransmittanceDistribution {
            pdf: Pdf::Grid(GridDensity::new(xs, vec![2.0; 101]).unwrap()),
        };
        let u = uniform01(101);
        assert!(matches!(
            pdte(&double, &u, 1.0, 256),
            Err(ChannelError::NotNormalized(_))
        ));
    }

    #[test]
    fn transmittance_support_validation() {
        assert!(TransmittanceDistribution::from_pdf(Pdf::Point(1.2)).is_err());
        assert!(TransmittanceDistribution::from_pdf(Pdf::Point(0.3)).is_ok());
    }
}
