//! Soliton profiles of the single equation, the solution families built from
//! them, and the `μu(λx)` scaling machinery that links the Nehari and sphere
//! problems.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, FieldPair, BOUNDARY_DECAY_TOL, C64};
use crate::functionals::{pow_nonneg, Integrals};
use crate::grid::Grid;
use crate::minimize::{self, ConstraintSpec, MinimizeOptions};
use crate::params::{Criticality, SystemParams};
use crate::parallel;

/// Relative Nehari pairing tolerated by [`nehari_to_sphere`].
pub const NEHARI_TOL: f64 = 1e-6;

/// `x ↦ p^{1/(2(p-1))} sech^{1/(p-1)}((p-1)x)`, the positive solution of
/// `-u'' + u = u^{2p-1}` on the line.
pub fn base_profile_1d(p: f64) -> impl Fn(f64) -> f64 + Copy + Send + Sync {
    let amp = p.powf(0.5 / (p - 1.0));
    let e = 1.0 / (p - 1.0);
    move |x: f64| amp * (1.0 / ((p - 1.0) * x).cosh()).powf(e)
}

/// Base profile sampled on a one-dimensional grid.
pub fn sample_base_profile_1d(p: f64, grid: &Grid) -> Result<Vec<f64>> {
    if grid.dim() != 1 {
        return Err(Error::InvalidGrid("closed-form profile needs a 1D grid".into()));
    }
    let z = base_profile_1d(p);
    Ok(grid.coords().iter().map(|&x| z(x)).collect())
}

/// Sup norm of `-Δu + ωu - c|u|^{2p-2}u` for a real profile.
pub fn profile_residual(grid: &Grid, u: &[f64], omega: f64, coeff: f64, p: f64) -> f64 {
    let c: Vec<C64> = u.iter().map(|&v| C64::new(v, 0.0)).collect();
    let lap = field::neg_laplacian(grid, &c);
    lap.iter()
        .zip(u)
        .map(|(l, &v)| (l.re + omega * v - coeff * pow_nonneg(v.abs(), 2.0 * p - 2.0) * v).abs())
        .fold(0.0, f64::max)
}

/// Numerically computed radial base profile for `n ≥ 2`.
#[derive(Debug, Clone)]
pub struct BaseProfile {
    pub values: Vec<f64>,
    pub mass: f64,
    pub nehari_residual: f64,
    pub gradient_residual: f64,
    pub iterations: usize,
}

/// Radial positive solution of `-Δu + u = u^{2p-1}` on the grid, obtained by
/// minimizing the scalar action on the Nehari manifold.
pub fn base_profile_nd(p: f64, grid: &Grid) -> Result<BaseProfile> {
    let dim = grid.dim();
    let params = SystemParams::new(p, 0.0, 1.0, 1.0)?;
    params.validate_for_dim(dim)?;
    let init = FieldPair::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (C64::new((-r2 / 2.0).exp(), 0.0), C64::new(0.0, 0.0))
    });
    let opts = MinimizeOptions {
        tol: 1e-10,
        ..MinimizeOptions::default()
    };
    let res = minimize::minimize_on(&ConstraintSpec::NehariManifold, &params, grid, Some(&init), &opts)?;
    let u = &res.minimizer;
    let values: Vec<f64> = u.c1().iter().map(|z| z.norm()).collect();
    let pairing = crate::functionals::nehari_pairing(u, &params);
    Ok(BaseProfile {
        mass: u.mass(0),
        nehari_residual: pairing.abs() / u.h1_norm_sq(&params),
        gradient_residual: res.residual,
        iterations: res.iterations,
        values,
    })
}

type CacheKey = (usize, usize, u64, u64);

fn base_cache() -> &'static Mutex<HashMap<CacheKey, Arc<Vec<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<Vec<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `z¹₀(√ω x)` sampled on `grid`. Closed form in 1D; otherwise the numerical
/// profile is computed on the grid stretched by `√ω`, so no interpolation is needed.
fn base_on_grid(p: f64, omega: f64, grid: &Grid) -> Result<Arc<Vec<f64>>> {
    if grid.dim() == 1 {
        let z = base_profile_1d(p);
        let s = omega.sqrt();
        return Ok(Arc::new(grid.coords().iter().map(|&x| z(s * x)).collect()));
    }
    let wide = grid.half_width() * omega.sqrt();
    let key = (grid.dim(), grid.points_per_axis(), wide.to_bits(), p.to_bits());
    if let Some(v) = base_cache().lock().unwrap().get(&key) {
        return Ok(v.clone());
    }
    let stretched = Grid::new(grid.dim(), grid.points_per_axis(), wide)?;
    let prof = Arc::new(base_profile_nd(p, &stretched)?.values);
    base_cache().lock().unwrap().insert(key, prof.clone());
    Ok(prof)
}

/// `z_β^ω(x) = (ω/(1+β))^{1/(2(p-1))} z¹₀(√ω x)`, solving `-Δu + ωu = (1+β)u^{2p-1}`.
pub fn z_beta_omega(omega: f64, beta: f64, p: f64, grid: &Grid) -> Result<Vec<f64>> {
    if !(omega > 0.0 && beta >= 0.0 && p > 1.0) {
        return Err(Error::InvalidParams(format!(
            "profile needs omega > 0, beta >= 0, p > 1 (got {omega}, {beta}, {p})"
        )));
    }
    let amp = (omega / (1.0 + beta)).powf(0.5 / (p - 1.0));
    Ok(base_on_grid(p, omega, grid)?.iter().map(|v| amp * v).collect())
}

/// `δ(ω) = ω^{1/(p-1) - n/2} (1+β)^{-1/(p-1)} ‖z¹₀‖₂²`.
pub fn delta_of_omega(omega: f64, beta: f64, p: f64, dim: usize, base_mass: f64) -> f64 {
    omega.powf(1.0 / (p - 1.0) - dim as f64 / 2.0) * (1.0 + beta).powf(-1.0 / (p - 1.0)) * base_mass
}

/// `‖z¹₀‖₂²` on the given grid geometry.
pub fn base_mass(p: f64, grid: &Grid) -> Result<f64> {
    let z = base_on_grid(p, 1.0, grid)?;
    Ok(z.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// `(z^{ω₁}₀, 0)`
    ScalarFirst,
    /// `(0, z^{ω₂}₀)`
    ScalarSecond,
    /// `(z_β^ω, z_β^ω)`, only for `ω₁ = ω₂`
    VectorB,
}

/// A member of one of the explicit families, up to phases and translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonSpec {
    pub family: Family,
    pub theta1: f64,
    pub theta2: f64,
    pub shift: Vec<f64>,
}

impl SolitonSpec {
    pub fn canonical(family: Family) -> Self {
        Self {
            family,
            theta1: 0.0,
            theta2: 0.0,
            shift: Vec::new(),
        }
    }
}

/// Real profiles `(v₁, v₂)` of the canonical member of a family.
pub fn family_profiles(family: Family, params: &SystemParams, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = params.p;
    let zeros = vec![0.0; grid.len()];
    match family {
        Family::ScalarFirst => Ok((z_beta_omega(params.omega1, 0.0, p, grid)?, zeros)),
        Family::ScalarSecond => Ok((zeros, z_beta_omega(params.omega2, 0.0, p, grid)?)),
        Family::VectorB => {
            if !params.equal_frequencies() {
                return Err(Error::Refused(format!(
                    "the vector family is only characterized for omega1 = omega2 (got {} and {}); \
                     the unequal-frequency case is open",
                    params.omega1, params.omega2
                )));
            }
            let z = z_beta_omega(params.omega1, params.beta, p, grid)?;
            Ok((z.clone(), z))
        }
    }
}

pub fn make_member(spec: &SolitonSpec, params: &SystemParams, grid: &Grid) -> Result<FieldPair> {
    params.validate_for_dim(grid.dim())?;
    let (v1, v2) = family_profiles(spec.family, params, grid)?;
    let mut u = FieldPair::from_real(grid, &v1, &v2)?.with_phases(spec.theta1, spec.theta2);
    if spec.shift.iter().any(|&y| y != 0.0) {
        if spec.shift.len() != grid.dim() {
            return Err(Error::InvalidParams(format!(
                "shift has {} entries for a {}-dimensional grid",
                spec.shift.len(),
                grid.dim()
            )));
        }
        u = u.translated(&spec.shift);
    }
    Ok(u)
}

/// `u^{μ,λ}(x) = μ u(λx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub mu: f64,
    pub lambda: f64,
}

impl ScalingParams {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && lambda > 0.0 && mu.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "scaling needs mu, lambda > 0 (got {mu}, {lambda})"
            )));
        }
        Ok(Self { mu, lambda })
    }

    /// Mass-preserving dilation `μ = λ^{n/2}`.
    pub fn dilation(lambda: f64, dim: usize) -> Result<Self> {
        Self::new(lambda.powf(dim as f64 / 2.0), lambda)
    }

    pub fn inverse(&self) -> Self {
        Self {
            mu: 1.0 / self.mu,
            lambda: 1.0 / self.lambda,
        }
    }
}

/// Trigonometric interpolation weight of node `m` at offset `t = (x - x_m)/dx`.
#[inline]
fn periodic_sinc(t: f64, n: usize) -> f64 {
    if t.abs() < 1e-9 {
        return 1.0;
    }
    (PI * t).sin() / (n as f64 * (PI * t / n as f64).tan())
}

/// Evaluates `μ u(λx)` on the grid by separable trigonometric interpolation.
/// Target points whose preimage leaves the box are set to zero; the result is
/// rejected when it no longer decays at the boundary.
pub fn scale(grid: &Grid, u: &[C64], s: ScalingParams) -> Result<Vec<C64>> {
    let out = scale_unchecked(grid, u, s)?;
    let probe = FieldPair::new(grid, out.clone(), vec![C64::new(0.0, 0.0); grid.len()])?;
    probe.check_decay(BOUNDARY_DECAY_TOL)?;
    Ok(out)
}

fn scale_unchecked(grid: &Grid, u: &[C64], s: ScalingParams) -> Result<Vec<C64>> {
    if u.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "field of length {} on grid of {} points",
            u.len(),
            grid.len()
        )));
    }
    let out: Vec<C64> = if s.lambda == 1.0 {
        u.iter().map(|z| z * s.mu).collect()
    } else {
        let n = grid.points_per_axis();
        let h = grid.spacing();
        let l = grid.half_width();
        // offsets a_j = (λx_j + L)/h of each target point, in node units
        let offsets: Vec<Option<f64>> = grid
            .coords()
            .iter()
            .map(|&x| {
                let y = s.lambda * x;
                (y >= -l && y < l).then(|| (y + l) / h)
            })
            .collect();
        let mut cur = u.to_vec();
        for axis in 0..grid.dim() {
            let stride = n.pow((grid.dim() - 1 - axis) as u32);
            let src = cur.clone();
            parallel::for_each_indexed(&mut cur, |idx, z| {
                let j = (idx / stride) % n;
                let base = idx - j * stride;
                *z = match offsets[j] {
                    None => C64::new(0.0, 0.0),
                    Some(a) => (0..n)
                        .map(|m| src[base + m * stride] * periodic_sinc(a - m as f64, n))
                        .sum(),
                };
            });
        }
        cur.iter().map(|z| z * s.mu).collect()
    };
    Ok(out)
}

pub fn scale_pair(u: &FieldPair, s: ScalingParams) -> Result<FieldPair> {
    let g = u.grid();
    if u.mass(1) == 0.0 {
        let c1 = scale(g, u.c1(), s)?;
        return FieldPair::new(g, c1, u.c2().to_vec());
    }
    if u.mass(0) == 0.0 {
        let c2 = scale(g, u.c2(), s)?;
        return FieldPair::new(g, u.c1().to_vec(), c2);
    }
    FieldPair::new(g, scale(g, u.c1(), s)?, scale(g, u.c2(), s)?)
}

/// `U^{λ^{n/2},λ}`: keeps both masses and multiplies `‖∇U‖₂²` by `λ²`.
pub fn dilate(u: &FieldPair, lambda: f64) -> Result<FieldPair> {
    scale_pair(u, ScalingParams::dilation(lambda, u.grid().dim())?)
}

/// [`dilate`] without the boundary-decay check, for intermediate iterates.
pub(crate) fn dilate_unchecked(u: &FieldPair, lambda: f64) -> Result<FieldPair> {
    let g = u.grid();
    let s = ScalingParams::dilation(lambda, g.dim())?;
    FieldPair::new(g, scale_unchecked(g, u.c1(), s)?, scale_unchecked(g, u.c2(), s)?)
}

fn require_subcritical(params: &SystemParams, dim: usize) -> Result<()> {
    if params.criticality(dim) != Criticality::Subcritical {
        return Err(Error::Refused(format!(
            "needs subcritical p < 1 + 2/n = {} (got p = {})",
            SystemParams::critical_exponent(dim),
            params.p
        )));
    }
    Ok(())
}

/// Energy level on `M_γ` of the rescaled Nehari critical point at action level `m`:
/// `-a·[γ/(2p'-n)]^e·m^{1-e}` with `a = 1/(p-1) - n/2`, `e = (2p'-n)/(2/(p-1)-n)`.
pub fn critical_value_map_t(m: f64, gamma: f64, params: &SystemParams, dim: usize) -> Result<f64> {
    require_subcritical(params, dim)?;
    if !(m > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidParams(format!("needs m, gamma > 0 (got {m}, {gamma})")));
    }
    let p = params.p;
    let n = dim as f64;
    let a = 1.0 / (p - 1.0) - n / 2.0;
    let q = 2.0 * params.conjugate() - n;
    let e = q / (2.0 / (p - 1.0) - n);
    Ok(-a * (gamma / q).powf(e) * (1.0 / m).powf(e - 1.0))
}

/// `γ₀ = m(2p/(p-1) - n)`, the weighted mass carried by a critical point at level `m`.
pub fn gamma_zero(m: f64, params: &SystemParams, dim: usize) -> f64 {
    m * (2.0 * params.conjugate() - dim as f64)
}

/// Scaling parameters `(μ, λ) = (ν^{1/(2(p-1))}, ν^{1/2})` attached to a multiplier `ν`.
pub fn multiplier_scaling(nu: f64, params: &SystemParams) -> Result<ScalingParams> {
    ScalingParams::new(nu.powf(0.5 / (params.p - 1.0)), nu.sqrt())
}

/// Maps a Nehari critical point `U` onto `M_γ`, returning the image and the
/// multiplier `ν` with `ν^{1/(p-1)-n/2} = γ/‖U‖²_{2,ω}`.
pub fn nehari_to_sphere(u: &FieldPair, gamma: f64, params: &SystemParams) -> Result<(FieldPair, f64)> {
    let dim = u.grid().dim();
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!("gamma must be > 0 (got {gamma})")));
    }
    let a = 1.0 / (params.p - 1.0) - dim as f64 / 2.0;
    if a == 0.0 {
        return Err(Error::Refused("the sphere scaling degenerates at the critical exponent".into()));
    }
    let it = Integrals::of(u, params);
    let h = it.grad_total() + it.weighted_mass(params);
    let rel = it.nehari(params).abs() / h;
    if !(rel < NEHARI_TOL) {
        return Err(Error::Refused(format!(
            "input is not on the Nehari manifold (relative pairing {rel:.3e})"
        )));
    }
    let nu = (gamma / it.weighted_mass(params)).powf(1.0 / a);
    let image = scale_pair(u, multiplier_scaling(nu, params)?)?;
    Ok((image, nu))
}

/// Inverse of [`nehari_to_sphere`] for a sphere point with multiplier `ν`.
pub fn sphere_to_nehari(v: &FieldPair, nu: f64, params: &SystemParams) -> Result<FieldPair> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParams(format!("multiplier must be > 0 (got {nu})")));
    }
    scale_pair(v, multiplier_scaling(nu, params)?.inverse())
}

/// `λ*(U) = [‖∇U‖₂²/(n(p-1)F(U))]^{1/(n(p-1)-2)}`, the maximum point of `g`.
pub fn lambda_star(u: &FieldPair, params: &SystemParams) -> Result<f64> {
    let dim = u.grid().dim();
    if params.criticality(dim) != Criticality::Supercritical {
        return Err(Error::Refused(format!(
            "lambda* needs supercritical p > 1 + 2/n = {} (got p = {})",
            SystemParams::critical_exponent(dim),
            params.p
        )));
    }
    lambda_star_from(&Integrals::of(u, params), params, dim)
}

pub(crate) fn lambda_star_from(it: &Integrals, params: &SystemParams, dim: usize) -> Result<f64> {
    let f = it.coupling(params);
    if !(f > 0.0) {
        return Err(Error::InvalidParams("coupling functional vanishes".into()));
    }
    let k = dim as f64 * (params.p - 1.0);
    Ok((it.grad_total() / (k * f)).powf(1.0 / (k - 2.0)))
}

/// `g(λ) = I(U^{λ^{n/2},λ}) = λ²/2‖∇U‖₂² + ½‖U‖²_{2,ω} - λ^{n(p-1)}F(U)`.
pub fn g_lambda(u: &FieldPair, params: &SystemParams, lambda: f64) -> f64 {
    g_lambda_from(&Integrals::of(u, params), params, u.grid().dim(), lambda)
}

pub(crate) fn g_lambda_from(it: &Integrals, params: &SystemParams, dim: usize, lambda: f64) -> f64 {
    let k = dim as f64 * (params.p - 1.0);
    0.5 * lambda * lambda * it.grad_total() + 0.5 * it.weighted_mass(params)
        - lambda.powf(k) * it.coupling(params)
}
