//! One-dimensional probability densities on a grid.
//!
//! Channel transmissions and coupling efficiencies are carried around as
//! either a degenerate point mass or a piecewise-linear density on a strictly
//! increasing support grid. The Mellin product [`mellin_product`] builds the
//! distribution of a product of independent variables, which is how the
//! beam-wandering and fiber-coupling distributions combine into the overall
//! transmission-efficiency distribution.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DistError {
    #[error("support must contain at least 2 strictly increasing finite points")]
    InvalidSupport,
    #[error("density values must be finite and nonnegative")]
    InvalidDensity,
    #[error("distribution has zero total mass")]
    ZeroMass,
    #[error("distribution not normalized: total mass {0}")]
    NotNormalized(f64),
}

/// Piecewise-linear density on a strictly increasing grid.
#[derive(Debug, Clone)]
pub struct GridDensity {
    xs: Vec<f64>,
    ps: Vec<f64>,
}

impl GridDensity {
    pub fn new(xs: Vec<f64>, ps: Vec<f64>) -> Result<Self, DistError> {
        if xs.len() < 2 || xs.len() != ps.len() || xs.iter().any(|x| !x.is_finite()) {
            return Err(DistError::InvalidSupport);
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DistError::InvalidSupport);
        }
        if ps.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(DistError::InvalidDensity);
        }
        Ok(Self { xs, ps })
    }

    /// Builds and normalizes in one step.
    pub fn normalized(xs: Vec<f64>, ps: Vec<f64>) -> Result<Self, DistError> {
        let mut d = Self::new(xs, ps)?;
        d.normalize()?;
        Ok(d)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ps(&self) -> &[f64] {
        &self.ps
    }

    /// Trapezoid mass of the density.
    pub fn total_mass(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ps.windows(2))
            .map(|(x, p)| 0.5 * (p[0] + p[1]) * (x[1] - x[0]))
            .sum()
    }

    /// Rescales the density to unit mass.
    pub fn normalize(&mut self) -> Result<(), DistError> {
        let m = self.total_mass();
        if m <= 0.0 || !m.is_finite() {
            return Err(DistError::ZeroMass);
        }
        for p in &mut self.ps {
            *p /= m;
        }
        Ok(())
    }

    /// E[f(X)] by trapezoid quadrature on the support grid.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ps.windows(2))
            .map(|(x, p)| 0.5 * (f(x[0]) * p[0] + f(x[1]) * p[1]) * (x[1] - x[0]))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|x| x)
    }

    /// Linear interpolation; zero outside the support.
    pub fn density_at(&self, x: f64) -> f64 {
        if x < self.xs[0] || x > *self.xs.last().unwrap() {
            return 0.0;
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.ps[i],
            Err(i) => i,
        };
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let t = (x - x0) / (x1 - x0);
        self.ps[i - 1] * (1.0 - t) + self.ps[i] * t
    }

    /// Cumulative trapezoid integral at each support point.
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.xs.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..self.xs.len() {
            acc += 0.5 * (self.ps[i - 1] + self.ps[i]) * (self.xs[i] - self.xs[i - 1]);
            out.push(acc);
        }
        out
    }
}

/// A distribution that is either a point mass or a grid density.
#[derive(Debug, Clone)]
pub enum Pdf {
    /// Degenerate distribution concentrated at a single value.
    Point(f64),
    Grid(GridDensity),
}

impl Pdf {
    pub fn mean(&self) -> f64 {
        match self {
            Pdf::Point(v) => *v,
            Pdf::Grid(g) => g.mean(),
        }
    }

    /// (lowest, highest) point of the support.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Pdf::Point(v) => (*v, *v),
            Pdf::Grid(g) => (g.xs[0], *g.xs.last().unwrap()),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Pdf::Point(_) => 1.0,
            Pdf::Grid(g) => g.total_mass(),
        }
    }

    /// E[f(X)].
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match self {
            Pdf::Point(v) => f(*v),
            Pdf::Grid(g) => g.expectation(f),
        }
    }
}

/// Inverse-CDF sampler over a [`Pdf`].
pub struct PdfSampler<'a> {
    pdf: &'a Pdf,
    cdf: Vec<f64>,
}

impl<'a> PdfSampler<'a> {
    pub fn new(pdf: &'a Pdf) -> Self {
        let cdf = match pdf {
            Pdf::Point(_) => Vec::new(),
            Pdf::Grid(g) => {
                let mut c = g.cdf();
                let m = *c.last().unwrap();
                if m > 0.0 {
                    for v in &mut c {
                        *v /= m;
                    }
                }
                c
            }
        };
        Self { pdf, cdf }
    }

    /// Maps a uniform variate in [0, 1) through the inverse CDF.
    pub fn draw(&self, u: f64) -> f64 {
        match self.pdf {
            Pdf::Point(v) => *v,
            Pdf::Grid(g) => {
                let i = match self
                    .cdf
                    .binary_search_by(|v| v.partial_cmp(&u).unwrap())
                {
                    Ok(i) => i,
                    Err(i) => i.clamp(1, g.xs.len() - 1),
                };
                if i == 0 {
                    return g.xs[0];
                }
                let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
                if c1 <= c0 {
                    return g.xs[i];
                }
                let t = (u - c0) / (c1 - c0);
                g.xs[i - 1] + t * (g.xs[i] - g.xs[i - 1])
            }
        }
    }
}

/// Log-spaced grid of `n` points on [lo, hi], lo > 0.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (la, lb) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Histogram density over geometric bins, for sample-based distributions.
///
/// Bins span [min, max] of the samples; the returned density integrates to 1.
pub fn log_histogram(samples: &[f64], n_bins: usize) -> Result<Pdf, DistError> {
    assert!(n_bins >= 2);
    if samples.is_empty() {
        return Err(DistError::ZeroMass);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &s in samples {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    // All mass at one spot (within float noise): degenerate distribution.
    if hi - lo < 1e-12 * hi.abs().max(1e-300) {
        return Ok(Pdf::Point(0.5 * (lo + hi)));
    }
    let lo = lo.max(hi * 1e-12);
    let edges = log_grid(lo, hi, n_bins + 1);
    let mut counts = vec![0.0_f64; n_bins];
    let (lla, llb) = (lo.ln(), hi.ln());
    for &s in samples {
        let s = s.clamp(lo, hi);
        let f = (s.ln() - lla) / (llb - lla);
        let idx = ((f * n_bins as f64) as usize).min(n_bins - 1);
        counts[idx] += 1.0;
    }
    let n = samples.len() as f64;
    // Bin centers (geometric mean of edges) carry the per-bin density.
    let mut xs = Vec::with_capacity(n_bins);
    let mut ps = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        xs.push((edges[i] * edges[i + 1]).sqrt());
        ps.push(counts[i] / (n * (edges[i + 1] - edges[i])));
    }
    Ok(Pdf::Grid(GridDensity::normalized(xs, ps)?))
}

/// Density of `scale * X * Y` for independent `X ~ f`, `Y ~ g`.
///
/// h(τ) = ∫ f(x) g(τ/(s·x)) / (s·x) dx, evaluated on a log-spaced output
/// grid of `n_grid` points; the result is renormalized to unit mass. The
/// inner integral runs a trapezoid over the knots of the wider input grid,
/// so sharply peaked piecewise-linear inputs are integrated faithfully.
pub fn mellin_product(f: &Pdf, g: &Pdf, scale: f64, n_grid: usize) -> Result<Pdf, DistError> {
    assert!(scale > 0.0, "scale factor must be positive");
    match (f, g) {
        (Pdf::Point(a), Pdf::Point(b)) => Ok(Pdf::Point(a * b * scale)),
        (Pdf::Point(a), Pdf::Grid(_)) => scale_support(g, a * scale),
        (Pdf::Grid(_), Pdf::Point(b)) => scale_support(f, b * scale),
        (Pdf::Grid(fg), Pdf::Grid(gg)) => {
            // Integrate over the finer-gridded factor's variable.
            let (outer, inner) = if fg.xs.len() >= gg.xs.len() { (fg, gg) } else { (gg, fg) };
            let (xl, xh) = (outer.xs[0], *outer.xs.last().unwrap());
            let (yl, yh) = (inner.xs[0], *inner.xs.last().unwrap());
            let hi = xh * yh * scale;
            if hi <= 0.0 {
                return Err(DistError::ZeroMass);
            }
            let lo = (xl * yl * scale).max(hi * 1e-12);
            let taus = log_grid(lo, hi, n_grid);
            let ps: Vec<f64> = taus
                .iter()
                .map(|&tau| {
                    // x range where both densities are in support
                    let a = xl.max(tau / (scale * yh));
                    let b = xh.min(tau / (scale * yl));
                    if b <= a {
                        return 0.0;
                    }
                    let integrand = |x: f64| {
                        outer.density_at(x) * inner.density_at(tau / (scale * x)) / (scale * x)
                    };
                    trapezoid_over_knots(&outer.xs, a, b, integrand)
                })
                .collect();
            let mut out = GridDensity::new(taus, ps)?;
            out.normalize()?;
            Ok(Pdf::Grid(out))
        }
    }
}

/// Trapezoid of `integrand` over [a, b], with nodes at every grid knot
/// inside the interval plus the clipped endpoints. Knot intervals spanning
/// more than ~10% in x are log-subdivided so the 1/x factor of the Mellin
/// integrand cannot defeat the trapezoid.
fn trapezoid_over_knots<F: Fn(f64) -> f64>(knots: &[f64], a: f64, b: f64, integrand: F) -> f64 {
    let segment = |x0: f64, v0: f64, x1: f64, v1: f64| -> f64 {
        let ratio = x1 / x0;
        if ratio <= 1.1 {
            return 0.5 * (v0 + v1) * (x1 - x0);
        }
        let m = (ratio.ln() / 0.1).ceil() as usize;
        let step = ratio.ln() / m as f64;
        let mut sum = 0.0;
        let mut xp = x0;
        let mut vp = v0;
        for k in 1..=m {
            let x = if k == m { x1 } else { x0 * (step * k as f64).exp() };
            let v = if k == m { v1 } else { integrand(x) };
            sum += 0.5 * (vp + v) * (x - xp);
            xp = x;
            vp = v;
        }
        sum
    };
    let i0 = knots.partition_point(|&x| x <= a);
    let i1 = knots.partition_point(|&x| x < b);
    let mut sum = 0.0;
    let mut x_prev = a;
    let mut v_prev = integrand(a);
    for &x in &knots[i0..i1] {
        let v = integrand(x);
        sum += segment(x_prev, v_prev, x, v);
        x_prev = x;
        v_prev = v;
    }
    let v_b = integrand(b);
    sum += segment(x_prev, v_prev, b, v_b);
    sum
}

/// Pushes a grid density through τ → c·τ (support scaling).
fn scale_support(pdf: &Pdf, c: f64) -> Result<Pdf, DistError> {
    match pdf {
        Pdf::Point(v) => Ok(Pdf::Point(v * c)),
        Pdf::Grid(g) => {
            let xs: Vec<f64> = g.xs.iter().map(|x| x * c).collect();
            let ps: Vec<f64> = g.ps.iter().map(|p| p / c).collect();
            Ok(Pdf::Grid(GridDensity::new(xs, ps)?))
        }
    }
}

/// Kolmogorov–Smirnov distance between sorted samples and a grid CDF.
pub fn ks_distance(sorted_samples: &[f64], pdf: &Pdf) -> f64 {
    let (xs, cdf) = match pdf {
        Pdf::Point(v) => {
            // ECDF jump against a step function at v.
            let below = sorted_samples.partition_point(|s| s < v) as f64;
            let n = sorted_samples.len() as f64;
            return (below / n).max(1.0 - below / n).min(1.0);
        }
        Pdf::Grid(g) => {
            let mut c = g.cdf();
            let m = *c.last().unwrap();
            for v in &mut c {
                *v /= m;
            }
            (g.xs.clone(), c)
        }
    };
    let n = sorted_samples.len() as f64;
    let mut worst = 0.0_f64;
    for (i, &s) in sorted_samples.iter().enumerate() {
        let model = interp_cdf(&xs, &cdf, s);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        worst = worst.max((model - lo).abs()).max((model - hi).abs());
    }
    worst
}

fn interp_cdf(xs: &[f64], cdf: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return 0.0;
    }
    if x >= *xs.last().unwrap() {
        return 1.0;
    }
    let i = xs.partition_point(|v| *v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    cdf[i - 1] * (1.0 - t) + cdf[i] * t
}
