//! Two-component complex grid functions and their norms.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::SystemParams;
use crate::parallel;

pub type C64 = Complex64;

/// Relative boundary amplitude below which a field counts as decayed.
pub const BOUNDARY_DECAY_TOL: f64 = 1e-8;

/// State `U = (u₁, u₂)` sampled on a periodic grid.
#[derive(Clone, Debug)]
pub struct FieldPair {
    grid: Grid,
    c1: Vec<C64>,
    c2: Vec<C64>,
}

impl FieldPair {
    pub fn new(grid: &Grid, c1: Vec<C64>, c2: Vec<C64>) -> Result<Self> {
        if c1.len() != grid.len() || c2.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "component lengths ({}, {}) do not match grid size {}",
                c1.len(),
                c2.len(),
                grid.len()
            )));
        }
        if !c1.iter().chain(&c2).all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidParams("field contains non-finite entries".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            c1,
            c2,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            c1: vec![C64::new(0.0, 0.0); grid.len()],
            c2: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Builds a pair from real profiles.
    pub fn from_real(grid: &Grid, u1: &[f64], u2: &[f64]) -> Result<Self> {
        Self::new(
            grid,
            u1.iter().map(|&v| C64::new(v, 0.0)).collect(),
            u2.iter().map(|&v| C64::new(v, 0.0)).collect(),
        )
    }

    /// Samples `(f₁(x), f₂(x))` at every grid point.
    pub fn from_fn<F>(grid: &Grid, f: F) -> Self
    where
        F: Fn(&[f64]) -> (C64, C64) + Sync + Send,
    {
        let dim = grid.dim();
        let mut out = Self::zeros(grid);
        let vals: Vec<(C64, C64)> = {
            let mut v = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); grid.len()];
            parallel::for_each_indexed(&mut v, |i, z| {
                let x = grid.position(i);
                *z = f(&x[..dim]);
            });
            v
        };
        for (i, (a, b)) in vals.into_iter().enumerate() {
            out.c1[i] = a;
            out.c2[i] = b;
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn c1(&self) -> &[C64] {
        &self.c1
    }

    pub fn c2(&self) -> &[C64] {
        &self.c2
    }

    pub fn component(&self, j: usize) -> &[C64] {
        match j {
            0 => &self.c1,
            _ => &self.c2,
        }
    }

    pub fn component_mut(&mut self, j: usize) -> &mut [C64] {
        match j {
            0 => &mut self.c1,
            _ => &mut self.c2,
        }
    }

    pub fn components_mut(&mut self) -> (&mut [C64], &mut [C64]) {
        (&mut self.c1, &mut self.c2)
    }

    pub fn into_components(self) -> (Vec<C64>, Vec<C64>) {
        (self.c1, self.c2)
    }

    pub fn is_finite(&self) -> bool {
        self.c1
            .iter()
            .chain(&self.c2)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn ensure_same_grid(&self, other: &FieldPair) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// `‖u_j‖₂²`.
    pub fn mass(&self, j: usize) -> f64 {
        l2_sum(self.component(j)) * self.grid.cell_volume()
    }

    /// `ω₁‖u₁‖₂² + ω₂‖u₂‖₂²`.
    pub fn weighted_l2_norm_sq(&self, params: &SystemParams) -> f64 {
        params.omega1 * self.mass(0) + params.omega2 * self.mass(1)
    }

    /// `‖∇u_j‖₂²` by Parseval.
    pub fn component_gradient_norm_sq(&self, j: usize) -> f64 {
        gradient_norm_sq_component(&self.grid, self.component(j))
    }

    /// `‖∇u₁‖₂² + ‖∇u₂‖₂²`.
    pub fn gradient_norm_sq(&self) -> f64 {
        self.component_gradient_norm_sq(0) + self.component_gradient_norm_sq(1)
    }

    /// `‖U‖²_ℍ = ‖∇U‖₂² + ‖U‖²_{2,ω}`.
    pub fn h1_norm_sq(&self, params: &SystemParams) -> f64 {
        self.gradient_norm_sq() + self.weighted_l2_norm_sq(params)
    }

    /// Pointwise `a·U + b·V`.
    pub fn lin_comb(&self, a: f64, other: &FieldPair, b: f64) -> Result<FieldPair> {
        self.ensure_same_grid(other)?;
        let mut out = self.clone();
        for j in 0..2 {
            let o = other.component(j);
            parallel::for_each_indexed(out.component_mut(j), |i, z| *z = *z * a + o[i] * b);
        }
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> FieldPair {
        let mut out = self.clone();
        for j in 0..2 {
            parallel::for_each_indexed(out.component_mut(j), |_, z| *z *= a);
        }
        out
    }

    /// Multiplies the components by `e^{iθ₁}` and `e^{iθ₂}`.
    pub fn with_phases(&self, theta1: f64, theta2: f64) -> FieldPair {
        let mut out = self.clone();
        let r = [C64::from_polar(1.0, theta1), C64::from_polar(1.0, theta2)];
        for (j, rot) in r.iter().enumerate() {
            parallel::for_each_indexed(out.component_mut(j), |_, z| *z *= rot);
        }
        out
    }

    /// `U(· - y)` via the Fourier shift theorem.
    pub fn translated(&self, y: &[f64]) -> FieldPair {
        let mut out = self.clone();
        for j in 0..2 {
            translate_component(&self.grid, out.component_mut(j), y);
        }
        out
    }

    /// Shift by whole grid cells, exact on the periodic lattice.
    pub fn rolled(&self, cells: &[isize]) -> FieldPair {
        let g = &self.grid;
        let n = g.points_per_axis() as isize;
        let mut out = self.clone();
        for j in 0..2 {
            let src = self.component(j);
            parallel::for_each_indexed(out.component_mut(j), |i, z| {
                let ix = g.unravel(i);
                let mut from = [0usize; 3];
                for a in 0..g.dim() {
                    from[a] = (ix[a] as isize - cells.get(a).copied().unwrap_or(0)).rem_euclid(n)
                        as usize;
                }
                *z = src[g.ravel(&from[..g.dim()])];
            });
        }
        out
    }

    /// Largest boundary modulus divided by the largest modulus (0 for the zero field).
    pub fn boundary_ratio(&self) -> f64 {
        let mut max_all: f64 = 0.0;
        let mut max_bnd: f64 = 0.0;
        for i in 0..self.grid.len() {
            let m = self.c1[i].norm().max(self.c2[i].norm());
            max_all = max_all.max(m);
            if self.grid.on_boundary(i) {
                max_bnd = max_bnd.max(m);
            }
        }
        if max_all == 0.0 {
            0.0
        } else {
            max_bnd / max_all
        }
    }

    pub fn check_decay(&self, tol: f64) -> Result<()> {
        let ratio = self.boundary_ratio();
        if ratio > tol {
            return Err(Error::BoundaryDecay { ratio, tol });
        }
        Ok(())
    }

    /// Pointwise moduli `(|u₁|, |u₂|)`.
    pub fn moduli(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.c1.iter().map(|z| z.norm()).collect(),
            self.c2.iter().map(|z| z.norm()).collect(),
        )
    }
}

fn l2_sum(f: &[C64]) -> f64 {
    parallel::sum_indexed(f, |_, z| z.norm_sqr())
}

/// `Σ|f|² dxⁿ` for a single grid function.
pub fn l2_norm_sq(grid: &Grid, f: &[C64]) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "field length {} does not match grid size {}",
            f.len(),
            grid.len()
        )));
    }
    Ok(l2_sum(f) * grid.cell_volume())
}

/// `‖∇f‖₂²` computed with spectral multipliers.
pub fn gradient_norm_sq_component(grid: &Grid, f: &[C64]) -> f64 {
    let hat = to_fourier(grid, f);
    let ksq = grid.ksq();
    parallel::sum_indexed(&hat, |i, z| ksq[i] * z.norm_sqr()) * grid.cell_volume()
        / grid.len() as f64
}

/// Weighted-H¹ distance `‖U - V‖_ℍ`.
pub fn h1_distance(u: &FieldPair, v: &FieldPair, params: &SystemParams) -> Result<f64> {
    let d = u.lin_comb(1.0, v, -1.0)?;
    Ok(d.h1_norm_sq(params).max(0.0).sqrt())
}

pub fn to_fourier(grid: &Grid, f: &[C64]) -> Vec<C64> {
    let mut hat = f.to_vec();
    grid.fft_forward(&mut hat);
    hat
}

pub fn from_fourier(grid: &Grid, mut hat: Vec<C64>) -> Vec<C64> {
    grid.fft_inverse(&mut hat);
    hat
}

/// Applies the Fourier multiplier `m(i, |k|²)` in place.
pub fn apply_multiplier<M>(grid: &Grid, f: &mut [C64], m: M)
where
    M: Fn(usize, f64) -> C64 + Sync + Send,
{
    grid.fft_forward(f);
    let ksq = grid.ksq();
    parallel::for_each_indexed(f, |i, z| *z *= m(i, ksq[i]));
    grid.fft_inverse(f);
}

/// `f(· - y)` in place.
pub fn translate_component(grid: &Grid, f: &mut [C64], y: &[f64]) {
    let k = grid.wavenumbers();
    apply_multiplier(grid, f, |i, _| {
        let ix = grid.unravel(i);
        let phase: f64 = (0..grid.dim())
            .map(|a| -k[ix[a]] * y.get(a).copied().unwrap_or(0.0))
            .sum();
        C64::from_polar(1.0, phase)
    });
}

/// `-Δf` spectrally.
pub fn neg_laplacian(grid: &Grid, f: &[C64]) -> Vec<C64> {
    let mut out = f.to_vec();
    apply_multiplier(grid, &mut out, |_, k2| C64::new(k2, 0.0));
    out
}

/// Spectral partial derivative along `axis`.
pub fn partial_derivative(grid: &Grid, f: &[C64], axis: usize) -> Vec<C64> {
    let k = grid.wavenumbers();
    let n = grid.points_per_axis();
    let mut out = f.to_vec();
    apply_multiplier(grid, &mut out, |i, _| {
        let m = grid.unravel(i)[axis];
        // Odd derivatives drop the unpaired Nyquist mode.
        if m == n / 2 {
            C64::new(0.0, 0.0)
        } else {
            C64::new(0.0, k[m])
        }
    });
    out
}

/// Real `L²` inner product `Re ∫ f ḡ`.
pub fn real_inner(grid: &Grid, f: &[C64], g: &[C64]) -> f64 {
    parallel::sum_zip(f, g, |_, a, b| (a * b.conj()).re) * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn soliton_grid() -> Grid {
        Grid::new(1, 1024, 20.0).unwrap()
    }

    fn sech_pair(g: &Grid) -> FieldPair {
        FieldPair::from_fn(g, |x| (C64::new(2f64.sqrt() * sech(x[0]), 0.0), C64::new(0.0, 0.0)))
    }

    #[test]
    fn zero_field_norms_vanish() {
        let g = soliton_grid();
        let z = FieldPair::zeros(&g);
        assert_eq!(l2_norm_sq(&g, z.c1()).unwrap(), 0.0);
        assert_eq!(z.weighted_l2_norm_sq(&SystemParams::default()), 0.0);
        assert_eq!(z.gradient_norm_sq(), 0.0);
    }

    #[test]
    fn sech_mass_matches_closed_form() {
        // ∫ 2 sech² = 4
        let g = soliton_grid();
        let u = sech_pair(&g);
        assert!((l2_norm_sq(&g, u.c1()).unwrap() - 4.0).abs() < 1e-8);
    }

    #[test]
    fn mismatched_length_is_an_error() {
        let g = soliton_grid();
        assert!(l2_norm_sq(&g, &[C64::new(1.0, 0.0); 3]).is_err());
        assert!(FieldPair::new(&g, vec![], vec![]).is_err());
    }

    #[test]
    fn weighted_norm_uses_frequencies() {
        let g = soliton_grid();
        let u = FieldPair::from_fn(&g, |x| {
            let v = C64::new(2f64.sqrt() * sech(x[0]), 0.0);
            (v, v)
        });
        let p = SystemParams::new(2.0, 0.0, 2.0, 3.0).unwrap();
        assert!((u.weighted_l2_norm_sq(&p) - 20.0).abs() < 1e-7);
        let unit = SystemParams::default();
        assert!((u.weighted_l2_norm_sq(&unit) - (u.mass(0) + u.mass(1))).abs() < 1e-14);
    }

    #[test]
    fn sech_gradient_matches_closed_form() {
        // ∫ 2 sech² tanh² = 4/3
        let g = soliton_grid();
        let u = sech_pair(&g);
        assert!((u.gradient_norm_sq() - 4.0 / 3.0).abs() < 1e-6);
        let c = FieldPair::from_fn(&g, |_| (C64::new(0.7, 0.2), C64::new(-1.0, 0.0)));
        assert!(c.gradient_norm_sq().abs() < 1e-12);
    }

    #[test]
    fn gradient_invariant_under_grid_shift() {
        let g = soliton_grid();
        let u = sech_pair(&g);
        let shifted = u.rolled(&[37]);
        assert!((u.gradient_norm_sq() - shifted.gradient_norm_sq()).abs() < 1e-10);
    }

    #[test]
    fn spectral_gradient_agrees_with_finite_differences() {
        let g = Grid::new(1, 2048, 20.0).unwrap();
        let u = FieldPair::from_fn(&g, |x| {
            (C64::new((-x[0] * x[0]).exp(), 0.3 * (-(x[0] - 1.0).powi(2)).exp()), C64::new(0.0, 0.0))
        });
        let dx = g.spacing();
        let n = g.len();
        let fd: f64 = (0..n)
            .map(|i| {
                let d = (u.c1()[(i + 1) % n] - u.c1()[(i + n - 1) % n]) / (2.0 * dx);
                d.norm_sqr()
            })
            .sum::<f64>()
            * dx;
        let spec = u.gradient_norm_sq();
        // central differences are O(dx²)
        assert!((fd - spec).abs() < 5.0 * dx * dx * spec, "fd {fd} spec {spec}");
    }

    #[test]
    fn h1_distance_basics() {
        let g = soliton_grid();
        let u = sech_pair(&g);
        let p = SystemParams::default();
        assert_eq!(h1_distance(&u, &u, &p).unwrap(), 0.0);
        let z = FieldPair::zeros(&g);
        let d = h1_distance(&u, &z, &p).unwrap();
        assert!((d - (u.gradient_norm_sq() + u.weighted_l2_norm_sq(&p)).sqrt()).abs() < 1e-13);
        let other = Grid::new(1, 512, 20.0).unwrap();
        assert!(h1_distance(&u, &FieldPair::zeros(&other), &p).is_err());
    }

    #[test]
    fn norms_invariant_under_phase_rotation() {
        let g = soliton_grid();
        let u = sech_pair(&g).lin_comb(1.0, &sech_pair(&g).translated(&[1.5]).with_phases(0.0, 0.0), 0.5).unwrap();
        let v = u.with_phases(0.9, -2.1);
        let p = SystemParams::new(2.0, 1.0, 1.3, 0.7).unwrap();
        assert!((u.weighted_l2_norm_sq(&p) - v.weighted_l2_norm_sq(&p)).abs() < 1e-12);
        assert!((u.gradient_norm_sq() - v.gradient_norm_sq()).abs() < 1e-12);
        assert!((l2_norm_sq(&g, u.c1()).unwrap() - l2_norm_sq(&g, v.c1()).unwrap()).abs() < 1e-12);
    }

    fn bump(g: &Grid, a: f64, c: f64, w: f64, phase: f64) -> FieldPair {
        FieldPair::from_fn(g, move |x| {
            let v = a * (-(x[0] - c).powi(2) / (w * w)).exp();
            (C64::from_polar(v, phase), C64::from_polar(0.5 * v, -phase))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn triangle_inequality(
            a in proptest::array::uniform3(-2.0f64..2.0),
            c in proptest::array::uniform3(-5.0f64..5.0),
            w in proptest::array::uniform3(0.5f64..3.0),
        ) {
            let g = Grid::new(1, 256, 20.0).unwrap();
            let p = SystemParams::new(2.0, 0.5, 1.0, 2.0).unwrap();
            let u = bump(&g, a[0], c[0], w[0], 0.3);
            let v = bump(&g, a[1], c[1], w[1], -1.1);
            let x = bump(&g, a[2], c[2], w[2], 2.0);
            let uv = h1_distance(&u, &v, &p).unwrap();
            let vx = h1_distance(&v, &x, &p).unwrap();
            let ux = h1_distance(&u, &x, &p).unwrap();
            prop_assert!(ux <= uv + vx + 1e-12);
            prop_assert!((uv - h1_distance(&v, &u, &p).unwrap()).abs() < 1e-12);
        }
    }
}
