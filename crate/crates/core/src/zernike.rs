//! Noll-ordered Zernike modes sampled on a pupil grid.
//!
//! Piston is excluded: the basis starts at Noll j = 2 (tip) and covers every
//! mode up to a maximum radial order, `n_mod = n_r (n_r + 3) / 2` modes for
//! `n_r` radial orders. Modes carry the Noll normalization, orthonormal under
//! (1/π) ∫_disk Z_i Z_j dA.
//!
//! The grid uses pixel centers with coverage weights on rim pixels
//! (subsampled 8×8), and the sampled mode matrix is cached in f32 so that
//! Monte-Carlo phase synthesis can run as a dense matrix product.

use ndarray::Array2;

use crate::exec::map_indexed;

/// Azimuthal dependence of a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Angular {
    /// m = 0, no azimuthal term.
    Axial,
    Cos,
    Sin,
}

/// One Zernike mode identified by Noll index and (n, m) orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZernikeMode {
    pub noll_j: u32,
    pub radial_order: u32,
    pub azimuthal_order: u32,
    pub angular: Angular,
}

/// Number of non-piston modes up to and including radial order `n_r`.
pub fn mode_count_for_order(n_r: u32) -> usize {
    (n_r * (n_r + 3) / 2) as usize
}

/// Noll mode list (j = 2 onwards) for radial orders 1..=max_order.
pub fn noll_modes(max_order: u32) -> Vec<ZernikeMode> {
    let mut modes = Vec::with_capacity(mode_count_for_order(max_order));
    let mut j = 2_u32;
    for n in 1..=max_order {
        let m0 = n % 2;
        let mut m = m0;
        while m <= n {
            if m == 0 {
                modes.push(ZernikeMode {
                    noll_j: j,
                    radial_order: n,
                    azimuthal_order: 0,
                    angular: Angular::Axial,
                });
                j += 1;
            } else {
                // Even Noll index carries the cosine term.
                let (first, second) = if j % 2 == 0 {
                    (Angular::Cos, Angular::Sin)
                } else {
                    (Angular::Sin, Angular::Cos)
                };
                modes.push(ZernikeMode {
                    noll_j: j,
                    radial_order: n,
                    azimuthal_order: m,
                    angular: first,
                });
                modes.push(ZernikeMode {
                    noll_j: j + 1,
                    radial_order: n,
                    azimuthal_order: m,
                    angular: second,
                });
                j += 2;
            }
            m += 2;
        }
    }
    modes
}

/// Covered fraction and covered-region centroid of a rim pixel, by 32×32
/// subsampling against the unit disk.
fn rim_coverage(x: f64, y: f64, h: f64) -> (f64, f64, f64) {
    const S: usize = 32;
    let mut inside = 0u32;
    let (mut cx, mut cy) = (0.0, 0.0);
    for sy in 0..S {
        for sx in 0..S {
            let px = x + ((sx as f64 + 0.5) / S as f64 - 0.5) * h;
            let py = y + ((sy as f64 + 0.5) / S as f64 - 0.5) * h;
            if px.hypot(py) <= 1.0 {
                inside += 1;
                cx += px;
                cy += py;
            }
        }
    }
    if inside == 0 {
        return (0.0, x, y);
    }
    let n = f64::from(inside);
    (n / (S * S) as f64, cx / n, cy / n)
}

/// Radial polynomial coefficients of R_n^m, highest power first as
/// (power, coefficient) pairs.
fn radial_coefficients(n: u32, m: u32, fact: &[f64; 41]) -> Vec<(i32, f64)> {
    let half = ((n - m) / 2) as usize;
    (0..=half)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let c = sign * fact[(n as usize) - k]
                / (fact[k]
                    * fact[((n + m) / 2) as usize - k]
                    * fact[((n - m) / 2) as usize - k]);
            ((n as i32) - 2 * (k as i32), c)
        })
        .collect()
}

fn factorials() -> [f64; 41] {
    let mut f = [1.0_f64; 41];
    for i in 1..41 {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// Zernike mode value at polar coordinates (r, θ), Noll normalization.
pub fn mode_value(mode: &ZernikeMode, r: f64, theta: f64) -> f64 {
    let fact = factorials();
    let radial: f64 = radial_coefficients(mode.radial_order, mode.azimuthal_order, &fact)
        .iter()
        .map(|&(p, c)| c * r.powi(p))
        .sum();
    let n1 = (mode.radial_order + 1) as f64;
    match mode.angular {
        Angular::Axial => n1.sqrt() * radial,
        Angular::Cos => (2.0 * n1).sqrt() * radial * (mode.azimuthal_order as f64 * theta).cos(),
        Angular::Sin => (2.0 * n1).sqrt() * radial * (mode.azimuthal_order as f64 * theta).sin(),
    }
}

/// Zernike basis sampled on a square pupil grid.
pub struct ZernikeBasis {
    max_radial_order: u32,
    samples_per_diameter: usize,
    modes: Vec<ZernikeMode>,
    /// Coverage weight per retained pixel (rim pixels are fractional).
    weights: Vec<f64>,
    /// Squared radius per retained pixel, pupil radius = 1.
    radius_sq: Vec<f64>,
    /// Pixel area in pupil-radius units.
    area_element: f64,
    /// Σ w ΔA, the discretized pupil area (≈ π).
    pupil_area: f64,
    /// Mode values, shape (n_modes, n_pixels).
    matrix: Array2<f32>,
}

impl ZernikeBasis {
    /// Builds the basis. `samples_per_diameter` is the pupil grid resolution.
    pub fn new(max_radial_order: u32, samples_per_diameter: usize) -> Self {
        assert!(max_radial_order >= 1, "need at least one radial order");
        assert!(samples_per_diameter >= 16, "pupil grid too coarse");
        let n = samples_per_diameter;
        let h = 2.0 / n as f64;
        let half_diag = h * std::f64::consts::SQRT_2 / 2.0;

        // Pixel centers with coverage weights; rim pixels subsampled 8x8.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut weights = Vec::new();
        for iy in 0..n {
            let y = -1.0 + (iy as f64 + 0.5) * h;
            for ix in 0..n {
                let x = -1.0 + (ix as f64 + 0.5) * h;
                let r = x.hypot(y);
                // Rim pixels carry their covered fraction and are evaluated
                // at the covered-region centroid.
                let (w, ex, ey) = if r <= 1.0 - half_diag {
                    (1.0, x, y)
                } else if r >= 1.0 + half_diag {
                    (0.0, x, y)
                } else {
                    rim_coverage(x, y, h)
                };
                if w > 0.0 {
                    xs.push(ex);
                    ys.push(ey);
                    weights.push(w);
                }
            }
        }
        let n_px = xs.len();
        let area_element = h * h;
        let pupil_area = weights.iter().sum::<f64>() * area_element;

        // Per-pixel tables: powers of r and cos/sin(mθ) up to the max order.
        let ord = max_radial_order as usize;
        let polar: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = map_indexed(n_px, |i| {
            let r = xs[i].hypot(ys[i]);
            let theta = ys[i].atan2(xs[i]);
            let mut rp = Vec::with_capacity(ord + 1);
            let mut acc = 1.0;
            for _ in 0..=ord {
                rp.push(acc);
                acc *= r;
            }
            // Chebyshev recurrence for cos(mθ), sin(mθ)
            let (s1, c1) = theta.sin_cos();
            let mut cs = Vec::with_capacity(ord + 1);
            let mut sn = Vec::with_capacity(ord + 1);
            cs.push(1.0);
            sn.push(0.0);
            if ord >= 1 {
                cs.push(c1);
                sn.push(s1);
                for m in 2..=ord {
                    cs.push(2.0 * c1 * cs[m - 1] - cs[m - 2]);
                    sn.push(2.0 * c1 * sn[m - 1] - sn[m - 2]);
                }
            }
            (rp, cs, sn)
        });

        let modes = noll_modes(max_radial_order);
        let fact = factorials();
        let rows: Vec<Vec<f32>> = map_indexed(modes.len(), |mi| {
            let mode = &modes[mi];
            let coeffs = radial_coefficients(mode.radial_order, mode.azimuthal_order, &fact);
            let n1 = (mode.radial_order + 1) as f64;
            let norm = match mode.angular {
                Angular::Axial => n1.sqrt(),
                _ => (2.0 * n1).sqrt(),
            };
            (0..n_px)
                .map(|pi| {
                    let (rp, cs, sn) = &polar[pi];
                    let radial: f64 = coeffs.iter().map(|&(p, c)| c * rp[p as usize]).sum();
                    let ang = match mode.angular {
                        Angular::Axial => 1.0,
                        Angular::Cos => cs[mode.azimuthal_order as usize],
                        Angular::Sin => sn[mode.azimuthal_order as usize],
                    };
                    (norm * radial * ang) as f32
                })
                .collect()
        });
        let mut matrix = Array2::<f32>::zeros((modes.len(), n_px));
        for (mi, row) in rows.into_iter().enumerate() {
            for (pi, v) in row.into_iter().enumerate() {
                matrix[(mi, pi)] = v;
            }
        }

        let radius_sq = xs.iter().zip(&ys).map(|(x, y)| x * x + y * y).collect();
        Self {
            max_radial_order,
            samples_per_diameter,
            modes,
            weights,
            radius_sq,
            area_element,
            pupil_area,
            matrix,
        }
    }

    pub fn max_radial_order(&self) -> u32 {
        self.max_radial_order
    }

    pub fn samples_per_diameter(&self) -> usize {
        self.samples_per_diameter
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[ZernikeMode] {
        &self.modes
    }

    pub fn pixel_count(&self) -> usize {
        self.weights.len()
    }

    pub(crate) fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn radius_sq(&self) -> &[f64] {
        &self.radius_sq
    }

    pub(crate) fn area_element(&self) -> f64 {
        self.area_element
    }

    pub(crate) fn pupil_area(&self) -> f64 {
        self.pupil_area
    }

    pub(crate) fn matrix(&self) -> &Array2<f32> {
        &self.matrix
    }

    /// Phase map Σ_j a_j Z_j on the retained pixels.
    pub fn synthesize_phase(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.mode_count(), "coefficient vector length");
        let n_px = self.pixel_count();
        let mut phase = vec![0.0_f64; n_px];
        for (mi, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = self.matrix.row(mi);
            for (p, &z) in phase.iter_mut().zip(row.iter()) {
                *p += c * f64::from(z);
            }
        }
        phase
    }

    /// Gram entries (1/π) Σ w Z_i Z_j ΔA for the selected modes, accumulated
    /// in f64 from the stored grid values.
    pub fn gram(&self, mode_indices: &[usize]) -> Vec<Vec<f64>> {
        let k = mode_indices.len();
        let mut g = vec![vec![0.0_f64; k]; k];
        for (a, &i) in mode_indices.iter().enumerate() {
            for (b, &j) in mode_indices.iter().enumerate().skip(a) {
                let ri = self.matrix.row(i);
                let rj = self.matrix.row(j);
                let mut acc = 0.0_f64;
                for ((&w, &x), &y) in self.weights.iter().zip(ri.iter()).zip(rj.iter()) {
                    acc += w * f64::from(x) * f64::from(y);
                }
                let v = acc * self.area_element / std::f64::consts::PI;
                g[a][b] = v;
                g[b][a] = v;
            }
        }
        g
    }
}
