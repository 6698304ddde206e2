//! Scalar functionals of the coupled system: coupling term `F`, energy `E`,
//! action `I`, virial functional `R`, Nehari pairings, Pohozaev residuals and
//! the variance `‖|x|Φ‖₂²`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldPair, BOUNDARY_DECAY_TOL};
use crate::params::SystemParams;
use crate::parallel;

/// `a^e` for `a >= 0`, with integer fast path.
#[inline]
pub(crate) fn pow_nonneg(a: f64, e: f64) -> f64 {
    if a == 0.0 {
        return if e == 0.0 { 1.0 } else { 0.0 };
    }
    if e.fract() == 0.0 && e.abs() < 64.0 {
        a.powi(e as i32)
    } else {
        a.powf(e)
    }
}

/// The integrals every functional is assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrals {
    /// `‖∇u_j‖₂²`
    pub grad: [f64; 2],
    /// `‖u_j‖₂²`
    pub mass: [f64; 2],
    /// `‖u_j‖_{2p}^{2p}`
    pub power: [f64; 2],
    /// `‖u₁u₂‖_p^p`
    pub cross: f64,
}

impl Integrals {
    pub fn of(u: &FieldPair, params: &SystemParams) -> Self {
        let p = params.p;
        let g = u.grid();
        let vol = g.cell_volume();
        let c2 = u.c2();
        let power1 = parallel::sum_indexed(u.c1(), |_, z| pow_nonneg(z.norm_sqr(), p)) * vol;
        let power2 = parallel::sum_indexed(c2, |_, z| pow_nonneg(z.norm_sqr(), p)) * vol;
        let cross = if params.beta == 0.0 {
            0.0
        } else {
            parallel::sum_zip(u.c1(), c2, |_, a, b| {
                pow_nonneg(a.norm_sqr() * b.norm_sqr(), 0.5 * p)
            }) * vol
        };
        Self {
            grad: [u.component_gradient_norm_sq(0), u.component_gradient_norm_sq(1)],
            mass: [u.mass(0), u.mass(1)],
            power: [power1, power2],
            cross,
        }
    }

    pub fn grad_total(&self) -> f64 {
        self.grad[0] + self.grad[1]
    }

    pub fn weighted_mass(&self, params: &SystemParams) -> f64 {
        params.omega1 * self.mass[0] + params.omega2 * self.mass[1]
    }

    pub fn coupling(&self, params: &SystemParams) -> f64 {
        (self.power[0] + self.power[1] + 2.0 * params.beta * self.cross) / (2.0 * params.p)
    }

    pub fn energy(&self, params: &SystemParams) -> f64 {
        0.5 * self.grad_total() - self.coupling(params)
    }

    pub fn action(&self, params: &SystemParams) -> f64 {
        self.energy(params) + 0.5 * self.weighted_mass(params)
    }

    pub fn virial(&self, params: &SystemParams, dim: usize) -> f64 {
        self.grad_total() - dim as f64 * (params.p - 1.0) * self.coupling(params)
    }

    pub fn nehari(&self, params: &SystemParams) -> f64 {
        self.grad_total() + self.weighted_mass(params) - 2.0 * params.p * self.coupling(params)
    }

    /// `(⟨∂₁I(U),u₁⟩, ⟨∂₂I(U),u₂⟩)`; the coupling integral enters both.
    pub fn partial_pairings(&self, params: &SystemParams) -> (f64, f64) {
        let pair = |j: usize| {
            self.grad[j] + params.omega(j) * self.mass[j] - self.power[j] - params.beta * self.cross
        };
        (pair(0), pair(1))
    }
}

/// `F(U) = (1/2p)(‖u₁‖_{2p}^{2p} + ‖u₂‖_{2p}^{2p} + 2β‖u₁u₂‖_p^p)`.
pub fn coupling_f(u: &FieldPair, params: &SystemParams) -> f64 {
    Integrals::of(u, params).coupling(params)
}

/// `E(U) = ½‖∇U‖₂² - F(U)`.
pub fn energy(u: &FieldPair, params: &SystemParams) -> f64 {
    Integrals::of(u, params).energy(params)
}

/// `I(U) = E(U) + ½‖U‖²_{2,ω}`.
pub fn action(u: &FieldPair, params: &SystemParams) -> f64 {
    Integrals::of(u, params).action(params)
}

/// `R(U) = ‖∇U‖₂² - n(p-1)F(U)`.
pub fn virial_r(u: &FieldPair, params: &SystemParams) -> f64 {
    Integrals::of(u, params).virial(params, u.grid().dim())
}

/// `⟨I'(U),U⟩ = ‖U‖²_ℍ - 2pF(U)`.
pub fn nehari_pairing(u: &FieldPair, params: &SystemParams) -> f64 {
    Integrals::of(u, params).nehari(params)
}

pub fn partial_pairings(u: &FieldPair, params: &SystemParams) -> (f64, f64) {
    Integrals::of(u, params).partial_pairings(params)
}

/// `|lhs - rhs| / |rhs|`, falling back to the absolute residual for tiny references.
pub fn relative_residual(lhs: f64, rhs: f64) -> f64 {
    let diff = (lhs - rhs).abs();
    if rhs.abs() < 1e-10 {
        diff
    } else {
        diff / rhs.abs().max(1e-300)
    }
}

/// Relative residuals of the three Pohozaev relations at level `m`:
/// `‖∇U‖² = nm`, `F(U) = m/(p-1)`, `‖U‖²_{2,ω} = (2p/(p-1) - n)m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevResiduals {
    pub gradient: f64,
    pub coupling: f64,
    pub weighted_mass: f64,
}

impl PohozaevResiduals {
    pub fn max(&self) -> f64 {
        self.gradient.max(self.coupling).max(self.weighted_mass)
    }
}

pub fn pohozaev_check(u: &FieldPair, params: &SystemParams, m: f64) -> Result<PohozaevResiduals> {
    if !(m > 0.0) {
        return Err(Error::InvalidParams(format!(
            "critical values of the action are positive; got level m = {m}"
        )));
    }
    let n = u.grid().dim() as f64;
    let p = params.p;
    let it = Integrals::of(u, params);
    Ok(PohozaevResiduals {
        gradient: relative_residual(it.grad_total(), n * m),
        coupling: relative_residual(it.coupling(params), m / (p - 1.0)),
        weighted_mass: relative_residual(it.weighted_mass(params), (2.0 * p / (p - 1.0) - n) * m),
    })
}

/// `V = Σ|x|²(|φ₁|² + |φ₂|²) dxⁿ`, with `x` measured from the box centre.
/// Refuses fields that do not decay at the boundary.
pub fn variance(phi: &FieldPair) -> Result<f64> {
    phi.check_decay(BOUNDARY_DECAY_TOL)?;
    Ok(variance_unchecked(phi))
}

pub(crate) fn variance_unchecked(phi: &FieldPair) -> f64 {
    let g = phi.grid();
    parallel::sum_zip(phi.c1(), phi.c2(), |i, a, b| {
        g.radius_sq(i) * (a.norm_sqr() + b.norm_sqr())
    }) * g.cell_volume()
}

/// All scalar functionals of a state at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub mass1: f64,
    pub mass2: f64,
    pub weighted_mass: f64,
    pub nehari_pairing: f64,
    pub partial_pairing1: f64,
    pub partial_pairing2: f64,
}

/// Header of the CSV produced by [`write_reports_csv`].
pub const REPORT_CSV_HEADER: &str =
    "F,E,I,R,mass1,mass2,weighted_mass,nehari_pairing,partial_pairing1,partial_pairing2";

impl FunctionalReport {
    pub fn compute(u: &FieldPair, params: &SystemParams) -> Self {
        let it = Integrals::of(u, params);
        let (q1, q2) = it.partial_pairings(params);
        Self {
            f: it.coupling(params),
            e: it.energy(params),
            i: it.action(params),
            r: it.virial(params, u.grid().dim()),
            mass1: it.mass[0],
            mass2: it.mass[1],
            weighted_mass: it.weighted_mass(params),
            nehari_pairing: it.nehari(params),
            partial_pairing1: q1,
            partial_pairing2: q2,
        }
    }

    pub fn partial_pairings(&self) -> (f64, f64) {
        (self.partial_pairing1, self.partial_pairing2)
    }
}

pub fn write_reports_csv<W: Write>(w: W, reports: &[FunctionalReport]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in reports {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::C64;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn grid() -> Grid {
        Grid::new(1, 1024, 20.0).unwrap()
    }

    fn soliton(g: &Grid) -> FieldPair {
        FieldPair::from_fn(g, |x| (C64::new(2f64.sqrt() * sech(x[0]), 0.0), C64::new(0.0, 0.0)))
    }

    fn p2(beta: f64) -> SystemParams {
        SystemParams::new(2.0, beta, 1.0, 1.0).unwrap()
    }

    fn generic(g: &Grid) -> FieldPair {
        FieldPair::from_fn(g, |x| {
            let a = (-(x[0] - 0.5).powi(2) / 2.0).exp();
            let b = 0.7 * (-(x[0] + 1.0).powi(2) / 3.0).exp();
            (C64::from_polar(a, 0.3 * x[0]), C64::from_polar(b, -0.2))
        })
    }

    #[test]
    fn zero_field() {
        let g = grid();
        let z = FieldPair::zeros(&g);
        let p = p2(1.0);
        assert_eq!(coupling_f(&z, &p), 0.0);
        assert_eq!(energy(&z, &p), 0.0);
        assert_eq!(action(&z, &p), 0.0);
        assert_eq!(virial_r(&z, &p), 0.0);
    }

    #[test]
    fn soliton_values_match_sech_integrals() {
        // ∫4 sech⁴ = 16/3, ∫2 sech² tanh² = 4/3, ∫2 sech² = 4
        let g = grid();
        let u = soliton(&g);
        let p = p2(0.0);
        assert!((coupling_f(&u, &p) - 4.0 / 3.0).abs() < 1e-6);
        assert!((energy(&u, &p) + 2.0 / 3.0).abs() < 1e-6);
        assert!((action(&u, &p) - 4.0 / 3.0).abs() < 1e-6);
        assert!(nehari_pairing(&u, &p).abs() < 1e-6);
    }

    #[test]
    fn swap_symmetry_and_phase_invariance() {
        let g = grid();
        let u = generic(&g);
        let swapped = FieldPair::new(&g, u.c2().to_vec(), u.c1().to_vec()).unwrap();
        let p = p2(1.7);
        assert!((coupling_f(&u, &p) - coupling_f(&swapped, &p)).abs() < 1e-14);
        let rot = u.with_phases(1.1, -0.4);
        for f in [coupling_f, energy, action, virial_r] {
            assert!((f(&u, &p) - f(&rot, &p)).abs() < 1e-12);
        }
        let moved = u.rolled(&[23]);
        for f in [coupling_f, energy, action, virial_r] {
            assert!((f(&u, &p) - f(&moved, &p)).abs() < 1e-12);
        }
    }

    #[test]
    fn action_minus_energy_is_half_weighted_mass() {
        let g = grid();
        let u = generic(&g);
        let p = SystemParams::new(2.5, 0.8, 1.3, 0.6).unwrap();
        let diff = action(&u, &p) - energy(&u, &p);
        assert!((diff - 0.5 * u.weighted_l2_norm_sq(&p)).abs() < 1e-14);
    }

    #[test]
    fn pairing_splits_into_partials() {
        let g = grid();
        let u = generic(&g);
        let p = SystemParams::new(3.0, 2.0, 1.0, 2.0).unwrap();
        let (a, b) = partial_pairings(&u, &p);
        assert!((a + b - nehari_pairing(&u, &p)).abs() < 1e-13);
    }

    #[test]
    fn doubled_soliton_has_negative_pairing() {
        let g = grid();
        let u = soliton(&g).scaled(2.0);
        assert!(nehari_pairing(&u, &p2(0.0)) < 0.0);
    }

    #[test]
    fn action_identity_on_critical_level() {
        // I(U) - (1/2p)⟨I'(U),U⟩ = ½(1 - 1/p)‖U‖²_ℍ for any U
        let g = grid();
        let u = generic(&g);
        let p = SystemParams::new(2.5, 0.8, 1.3, 0.6).unwrap();
        let lhs = action(&u, &p) - nehari_pairing(&u, &p) / (2.0 * p.p);
        let rhs = 0.5 * (1.0 - 1.0 / p.p) * u.h1_norm_sq(&p);
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn coupling_is_2p_homogeneous() {
        // ⟨F'(V),V⟩ = d/dt F((1+t)V)|₀ = 2pF(V), central difference
        let g = grid();
        let v = generic(&g);
        let p = SystemParams::new(2.5, 1.5, 1.0, 1.0).unwrap();
        let h = 1e-5;
        let fd = (coupling_f(&v.scaled(1.0 + h), &p) - coupling_f(&v.scaled(1.0 - h), &p)) / (2.0 * h);
        assert!((fd - 2.0 * p.p * coupling_f(&v, &p)).abs() < 1e-8);
    }

    #[test]
    fn pohozaev_residuals() {
        let g = grid();
        let p = p2(0.0);
        let res = pohozaev_check(&soliton(&g), &p, 4.0 / 3.0).unwrap();
        assert!(res.max() < 1e-6, "{res:?}");
        assert!(pohozaev_check(&soliton(&g), &p, 0.0).is_err());
        let bad = pohozaev_check(&generic(&g), &p, 1.0).unwrap();
        assert!(bad.max() > 0.1);
        // vector profile (z, z) with z = √(2/(1+β)) sech, m = 2·(4/3)/(1+β)
        let beta: f64 = 3.0;
        let amp = (2.0 / (1.0 + beta)).sqrt();
        let b = FieldPair::from_fn(&g, |x| {
            let v = C64::new(amp * sech(x[0]), 0.0);
            (v, v)
        });
        let res = pohozaev_check(&b, &p2(beta), 8.0 / 3.0 / (1.0 + beta)).unwrap();
        assert!(res.max() < 1e-6, "{res:?}");
    }

    #[test]
    fn soliton_variance() {
        // ∫x² sech² = π²/6, so the √2-amplitude profile gives π²/3
        let g = grid();
        let v = variance(&soliton(&g)).unwrap();
        assert!((v - PI * PI / 3.0).abs() < 1e-5, "{v}");
    }

    #[test]
    fn variance_of_translate_by_direct_sum() {
        let g = grid();
        let u = generic(&g);
        let shift = 40isize;
        let y = shift as f64 * g.spacing();
        let moved = u.rolled(&[shift]);
        let mass = u.mass(0) + u.mass(1);
        let first_moment: f64 = (0..g.len())
            .map(|i| g.position(i)[0] * (u.c1()[i].norm_sqr() + u.c2()[i].norm_sqr()))
            .sum::<f64>()
            * g.cell_volume();
        let expected = variance(&u).unwrap() + 2.0 * y * first_moment + y * y * mass;
        assert!((variance(&moved).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn variance_of_concentrated_field_is_small() {
        let g = grid();
        let d = FieldPair::from_fn(&g, |x| (C64::new((-(x[0] / 0.05).powi(2)).exp(), 0.0), C64::new(0.0, 0.0)));
        assert!(variance(&d).unwrap() < 1e-4);
    }

    #[test]
    fn variance_refuses_wrapped_fields() {
        let g = grid();
        let u = FieldPair::from_fn(&g, |x| (C64::new((-(x[0] / 8.0).powi(2)).exp(), 0.0), C64::new(0.0, 0.0)));
        assert!(matches!(variance(&u), Err(Error::BoundaryDecay { .. })));
    }

    #[test]
    fn report_csv_has_header() {
        let g = grid();
        let r = FunctionalReport::compute(&soliton(&g), &p2(0.0));
        assert!((r.i - r.e - 0.5 * r.weighted_mass).abs() < 1e-14);
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), REPORT_CSV_HEADER);
        assert_eq!(text.lines().count(), 2);
    }
}
