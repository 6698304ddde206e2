//! Uniform periodic grids on `[-L, L)ⁿ` with spectral wavenumbers and
//! n-dimensional FFTs.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::parallel;

/// Uniform periodic grid. Cheap to clone; plans and wavenumber tables are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    dim: usize,
    n: usize,
    half_width: f64,
    dx: f64,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
    ksq: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.inner.dim)
            .field("points_per_axis", &self.inner.n)
            .field("half_width", &self.inner.half_width)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.n == other.inner.n
                && self.inner.half_width.to_bits() == other.inner.half_width.to_bits())
    }
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3 (got {dim})")));
        }
        if points_per_axis < 4 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 4 (got {points_per_axis})"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half width must be > 0 (got {half_width})")));
        }
        let n = points_per_axis;
        let dx = 2.0 * half_width / n as f64;
        let coords = (0..n).map(|j| -half_width + j as f64 * dx).collect();
        let dk = PI / half_width;
        let wavenumbers: Vec<f64> = (0..n)
            .map(|m| {
                if m < n / 2 {
                    m as f64 * dk
                } else {
                    (m as f64 - n as f64) * dk
                }
            })
            .collect();
        let total = n.pow(dim as u32);
        let mut ksq = vec![0.0; total];
        for (idx, v) in ksq.iter_mut().enumerate() {
            let mut rest = idx;
            let mut s = 0.0;
            for _ in 0..dim {
                let k = wavenumbers[rest % n];
                s += k * k;
                rest /= n;
            }
            *v = s;
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                dim,
                n,
                half_width,
                dx,
                coords,
                wavenumbers,
                ksq,
                forward,
                inverse,
            }),
        })
    }

    /// Box half-width `20/√min(ω₁, ω₂, 1)`, enough for the exponential tails of
    /// the standing waves to fall below ~1e-8 at the boundary.
    pub fn default_half_width(params: &SystemParams) -> f64 {
        20.0 / params.omega1.min(params.omega2).min(1.0).sqrt()
    }

    pub fn for_params(dim: usize, points_per_axis: usize, params: &SystemParams) -> Result<Self> {
        Self::new(dim, points_per_axis, Self::default_half_width(params))
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.inner.n
    }

    pub fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.inner.dx
    }

    /// Quadrature weight `dxⁿ`.
    pub fn cell_volume(&self) -> f64 {
        self.inner.dx.powi(self.inner.dim as i32)
    }

    /// Total number of grid points `Nⁿ`.
    pub fn len(&self) -> usize {
        self.inner.ksq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Axis coordinates `x_j = -L + j dx`.
    pub fn coords(&self) -> &[f64] {
        &self.inner.coords
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    /// `|k|²` per flattened Fourier index.
    pub fn ksq(&self) -> &[f64] {
        &self.inner.ksq
    }

    /// Largest resolved wavenumber `π/dx`.
    pub fn k_max(&self) -> f64 {
        PI / self.inner.dx
    }

    /// Splits a flattened index into per-axis indices (axis 0 slowest).
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.inner.n;
        let d = self.inner.dim;
        let mut out = [0; 3];
        let mut rest = idx;
        for a in (0..d).rev() {
            out[a] = rest % n;
            rest /= n;
        }
        out
    }

    pub fn ravel(&self, ix: &[usize]) -> usize {
        ix.iter().fold(0, |acc, &i| acc * self.inner.n + i)
    }

    /// Physical position of a flattened index (unused axes are zero).
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let ix = self.unravel(idx);
        let mut x = [0.0; 3];
        for a in 0..self.inner.dim {
            x[a] = self.inner.coords[ix[a]];
        }
        x
    }

    /// `|x|²` measured from the box centre.
    pub fn radius_sq(&self, idx: usize) -> f64 {
        self.position(idx).iter().map(|v| v * v).sum()
    }

    /// True when the point lies on a face of the box (first or last index on some axis).
    pub fn on_boundary(&self, idx: usize) -> bool {
        let ix = self.unravel(idx);
        let last = self.inner.n - 1;
        ix[..self.inner.dim].iter().any(|&i| i == 0 || i == last)
    }

    pub fn fft_forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.forward);
    }

    /// Inverse FFT including the `1/Nⁿ` normalisation.
    pub fn fft_inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.inverse);
        let scale = 1.0 / self.len() as f64;
        parallel::for_each_indexed(data, |_, z| *z *= scale);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        let n = self.inner.n;
        let dim = self.inner.dim;
        // Contiguous axis: lines are consecutive blocks.
        let lines_per_block = (parallel::CHUNK / n).max(1);
        parallel::for_each_block(data, n * lines_per_block, |_, block| plan.process(block));
        if dim == 1 {
            return;
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); data.len()];
        for axis in 0..dim - 1 {
            let stride = n.pow((dim - 1 - axis) as u32);
            let src: &[Complex64] = data;
            parallel::for_each_indexed(&mut buf, |b, z| {
                let line = b / n;
                let j = b % n;
                let outer = line / stride;
                let inner = line % stride;
                *z = src[outer * n * stride + j * stride + inner];
            });
            parallel::for_each_block(&mut buf, n * lines_per_block, |_, block| {
                plan.process(block)
            });
            let gathered: &[Complex64] = &buf;
            parallel::for_each_indexed(data, |idx, z| {
                let outer = idx / (n * stride);
                let rem = idx % (n * stride);
                let j = rem / stride;
                let inner = rem % stride;
                *z = gathered[(outer * stride + inner) * n + j];
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_are_symmetric_up_to_nyquist() {
        let g = Grid::new(1, 16, 3.0).unwrap();
        let k = g.wavenumbers();
        assert_eq!(k.len(), 16);
        assert_eq!(k[0], 0.0);
        for m in 1..8 {
            assert!((k[m] + k[16 - m]).abs() < 1e-14);
        }
        assert!((k[8] + PI / 3.0 * 8.0).abs() < 1e-12);
        assert!((g.spacing() - 6.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid::new(1, 100, 1.0).is_err());
        assert!(Grid::new(4, 16, 1.0).is_err());
        assert!(Grid::new(1, 16, 0.0).is_err());
    }

    #[test]
    fn nd_fft_round_trip_and_plane_wave() {
        for dim in 1..=3 {
            let g = Grid::new(dim, 8, PI).unwrap();
            let mut f: Vec<Complex64> = (0..g.len())
                .map(|i| Complex64::new((i as f64 * 0.3).sin(), (i as f64 * 0.11).cos()))
                .collect();
            let orig = f.clone();
            g.fft_forward(&mut f);
            g.fft_inverse(&mut f);
            for (a, b) in f.iter().zip(&orig) {
                assert!((a - b).norm() < 1e-12);
            }
            // e^{i x_0} with x measured from -L maps to the single mode m = 1 on axis 0
            let mut w: Vec<Complex64> = (0..g.len())
                .map(|i| {
                    let x = g.position(i)[0] + PI;
                    Complex64::from_polar(1.0, x)
                })
                .collect();
            g.fft_forward(&mut w);
            let mut target = [0usize; 3];
            target[0] = 1;
            let hot = g.ravel(&target[..dim]);
            for (i, z) in w.iter().enumerate() {
                let expect = if i == hot { g.len() as f64 } else { 0.0 };
                assert!((z.re - expect).abs() < 1e-9 && z.im.abs() < 1e-9, "dim {dim} idx {i}");
            }
        }
    }
}
