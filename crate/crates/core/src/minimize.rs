//! Constrained minimization of `E` and `I` on spheres, the Nehari manifold and
//! set, and the Pohozaev set.
//!
//! Every problem is solved by the same preconditioned projected gradient
//! descent. Gradients are measured in the metric of `P = -Δ + ω_j` (the ℍ inner
//! product), so the step is diagonal in Fourier space and a fixed point is an
//! exact constrained critical point for any step size. After each step the
//! iterate is pulled back onto the constraint: a common rescaling for `M_γ`,
//! per-component rescaling for product spheres, a ray (or two-ray) rescaling
//! for the Nehari constraints and a mass-preserving dilation for `P`.
//!
//! For the Nehari and Pohozaev problems the pulled-back functional
//! `J(U) = max_t I(tU)` (respectively `max_λ I(U^{λ^{n/2},λ})`) has the same
//! gradient as `I` at the maximizing point, so descending `J` along `-P⁻¹I'`
//! minimizes `I` on the constraint without any multiplier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, FieldPair, C64};
use crate::functionals::{pow_nonneg, Integrals};
use crate::grid::Grid;
use crate::params::{Criticality, SystemParams};
use crate::parallel;
use crate::profiles;

/// Which manifold to minimize on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ConstraintSpec {
    /// `ω₁‖u₁‖₂² + ω₂‖u₂‖₂² = γ`, minimizing `E`.
    WeightedSphere { gamma: f64 },
    /// `‖u₁‖₂² = δ₁`, `‖u₂‖₂² = δ₂`, minimizing `E`. `δ₂ = 0` is the scalar problem.
    ProductSpheres { delta1: f64, delta2: f64 },
    /// `‖u₁‖₂² = ‖u₂‖₂² = δ`, minimizing `E`.
    EqualSpheres { delta: f64 },
    /// `⟨I'(U),U⟩ = 0`, minimizing `I`.
    NehariManifold,
    /// Both partial pairings vanish and both components are nontrivial, minimizing `I`.
    NehariSet,
    /// `R(U) = 0`, minimizing `I`. Supercritical exponents only.
    PohozaevSet,
}

impl ConstraintSpec {
    pub fn minimizes_energy(&self) -> bool {
        matches!(
            self,
            Self::WeightedSphere { .. } | Self::ProductSpheres { .. } | Self::EqualSpheres { .. }
        )
    }

    fn product_levels(&self) -> Option<(f64, f64)> {
        match *self {
            Self::ProductSpheres { delta1, delta2 } => Some((delta1, delta2)),
            Self::EqualSpheres { delta } => Some((delta, delta)),
            _ => None,
        }
    }

    pub fn validate(&self, params: &SystemParams, dim: usize) -> Result<()> {
        params.validate_for_dim(dim)?;
        let crit = params.criticality(dim);
        if self.minimizes_energy() && crit != Criticality::Subcritical {
            return Err(Error::Refused(format!(
                "energy is unbounded below on spheres unless p < 1 + 2/n = {} (got p = {})",
                SystemParams::critical_exponent(dim),
                params.p
            )));
        }
        match *self {
            Self::WeightedSphere { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::InvalidParams(format!("gamma must be > 0 (got {gamma})")))
            }
            Self::ProductSpheres { delta1, delta2 }
                if !(delta1 > 0.0 && delta1.is_finite() && delta2 >= 0.0 && delta2.is_finite()) =>
            {
                Err(Error::InvalidParams(format!(
                    "sphere levels must satisfy delta1 > 0, delta2 >= 0 (got {delta1}, {delta2})"
                )))
            }
            Self::EqualSpheres { delta } if !(delta > 0.0 && delta.is_finite()) => {
                Err(Error::InvalidParams(format!("delta must be > 0 (got {delta})")))
            }
            Self::PohozaevSet if crit != Criticality::Supercritical => Err(Error::Refused(format!(
                "the Pohozaev set is a natural constraint only for p > 1 + 2/n = {} (got p = {})",
                SystemParams::critical_exponent(dim),
                params.p
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    /// Target for `‖P⁻¹∇J‖_ℍ / ‖U‖_ℍ`.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    pub max_step: f64,
    pub seed: u64,
    /// Record every k-th iterate in the history (0 disables).
    pub history_stride: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            initial_step: 0.5,
            max_step: 1.0,
            seed: 0,
            history_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub value: f64,
    pub residual: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub constraint: ConstraintSpec,
    pub minimizer: FieldPair,
    /// `E` for sphere constraints, `I` otherwise.
    pub value: f64,
    /// Lagrange multipliers from the flow: `[ν]` for `M_γ`, `[ν₁, ν₂]` for product spheres.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<HistoryEntry>,
    /// Label of the initial guess that produced this result.
    pub start: String,
}

/// Relative roundoff slack for the monotonicity test.
const VALUE_SLACK: f64 = 1e-13;
const MAX_RELATIVE_UPDATE: f64 = 0.25;

/// Pointwise `∂F/∂ū_j`: `|u_j|^{2p-2}u_j + β|u_k|^p|u_j|^{p-2}u_j`.
pub(crate) fn nonlinearity(u: &FieldPair, params: &SystemParams) -> (Vec<C64>, Vec<C64>) {
    let p = params.p;
    let beta = params.beta;
    let (a, b) = (u.c1(), u.c2());
    let term = |x: C64, y: C64| -> C64 {
        let s = x.norm_sqr();
        if s == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let mut f = pow_nonneg(s, p - 1.0);
        if beta != 0.0 {
            f += beta * pow_nonneg(y.norm_sqr(), 0.5 * p) * pow_nonneg(s, 0.5 * p - 1.0);
        }
        x * f
    };
    let mut n1 = vec![C64::new(0.0, 0.0); a.len()];
    let mut n2 = n1.clone();
    parallel::for_each_indexed(&mut n1, |i, z| *z = term(a[i], b[i]));
    parallel::for_each_indexed(&mut n2, |i, z| *z = term(b[i], a[i]));
    (n1, n2)
}

/// Iterate together with everything the step and the acceptance test need.
struct State {
    u: FieldPair,
    value: f64,
    /// Search direction `P⁻¹(∇J)` in Fourier space, per component.
    dir_hat: [Vec<C64>; 2],
    residual: f64,
    multipliers: Vec<f64>,
    lambda_star: f64,
}

struct Flow<'a> {
    constraint: ConstraintSpec,
    params: &'a SystemParams,
    grid: &'a Grid,
}

impl<'a> Flow<'a> {
    fn omega(&self, j: usize) -> f64 {
        self.params.omega(j)
    }

    /// Parseval weight turning `Σ f̂ ḡ` into `∫ f ḡ`.
    fn parseval(&self) -> f64 {
        self.grid.cell_volume() / self.grid.len() as f64
    }

    fn inner_hat(&self, a: &[C64], b: &[C64]) -> f64 {
        parallel::sum_zip(a, b, |_, x, y| (x * y.conj()).re) * self.parseval()
    }

    fn p_norm_sq_hat(&self, a: &[C64], j: usize) -> f64 {
        let w = self.omega(j);
        let ksq = self.grid.ksq();
        parallel::sum_indexed(a, |i, x| (ksq[i] + w) * x.norm_sqr()) * self.parseval()
    }

    fn integrals(&self, u: &FieldPair, uh: &[Vec<C64>; 2]) -> Integrals {
        let ksq = self.grid.ksq();
        let c = self.parseval();
        let grad = [0, 1].map(|j| parallel::sum_indexed(&uh[j], |i, x| ksq[i] * x.norm_sqr()) * c);
        let mut it = Integrals::of_pointwise(u, self.params);
        it.grad = grad;
        it
    }

    /// Evaluates `J`, its constrained gradient and the search direction with
    /// preconditioner `P_j = -Δ + shift_j`.
    fn evaluate(&self, u: FieldPair, shift: [f64; 2]) -> State {
        let g = self.grid;
        let ksq = g.ksq();
        let uh = [field::to_fourier(g, u.c1()), field::to_fourier(g, u.c2())];
        let (n1, n2) = nonlinearity(&u, self.params);
        let nh = [field::to_fourier(g, &n1), field::to_fourier(g, &n2)];
        let it = self.integrals(&u, &uh);
        let dim = g.dim();
        let mut multipliers = Vec::new();
        let mut lambda_star = 1.0;

        // pg_j = P⁻¹(∇J)_j before any multiplier correction
        let mut value = it.action(self.params);
        let mut coef = [(1.0, 1.0); 2]; // (kinetic weight, nonlinear weight)
        let mut mass_term = [true; 2];
        match self.constraint {
            ConstraintSpec::PohozaevSet => {
                let ls = profiles::lambda_star_from(&it, self.params, dim).unwrap_or(1.0);
                lambda_star = ls;
                value = profiles::g_lambda_from(&it, self.params, dim, ls);
                let k = dim as f64 * (self.params.p - 1.0);
                coef = [(ls * ls, ls.powf(k)); 2];
            }
            c if c.minimizes_energy() => {
                value = it.energy(self.params);
                mass_term = [false; 2];
            }
            _ => {}
        }
        let mut pg: [Vec<C64>; 2] = [0, 1].map(|j| {
            let s = shift[j];
            let (ck, cn) = coef[j];
            let wm = if mass_term[j] { self.omega(j) } else { 0.0 };
            uh[j]
                .iter()
                .zip(&nh[j])
                .zip(ksq)
                .map(|((&a, &b), &k2)| ((ck * k2 + wm) * a - cn * b) / (k2 + s))
                .collect()
        });

        match self.constraint {
            ConstraintSpec::WeightedSphere { .. } => {
                let normal: [Vec<C64>; 2] = [0, 1].map(|j| uh[j].iter().map(|&a| a * self.omega(j)).collect());
                let pn: [Vec<C64>; 2] = [0, 1].map(|j| {
                    let s = shift[j];
                    normal[j].iter().zip(ksq).map(|(&a, &k2)| a / (k2 + s)).collect()
                });
                let num: f64 = (0..2).map(|j| self.inner_hat(&pg[j], &normal[j])).sum();
                let den: f64 = (0..2).map(|j| self.inner_hat(&pn[j], &normal[j])).sum();
                let nu = -num / den;
                for j in 0..2 {
                    for (a, b) in pg[j].iter_mut().zip(&pn[j]) {
                        *a += nu * b;
                    }
                }
                multipliers.push(nu);
            }
            c @ (ConstraintSpec::ProductSpheres { .. } | ConstraintSpec::EqualSpheres { .. }) => {
                let (_, d2) = c.product_levels().unwrap();
                for j in 0..2 {
                    if j == 1 && d2 == 0.0 {
                        pg[1].iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                        multipliers.push(0.0);
                        continue;
                    }
                    let s = shift[j];
                    let pn: Vec<C64> = uh[j].iter().zip(ksq).map(|(&a, &k2)| a / (k2 + s)).collect();
                    let nu = -self.inner_hat(&pg[j], &uh[j]) / self.inner_hat(&pn, &uh[j]);
                    for (a, b) in pg[j].iter_mut().zip(&pn) {
                        *a += nu * b;
                    }
                    multipliers.push(nu);
                }
            }
            _ => {}
        }

        // residual in the dual ℍ norm: Σ|ĝ|²/(k²+ω) with ĝ = (k²+shift)·pg
        let res_sq: f64 = (0..2)
            .map(|j| {
                let (s, w) = (shift[j], self.omega(j));
                parallel::sum_indexed(&pg[j], |i, x| (ksq[i] + s).powi(2) / (ksq[i] + w) * x.norm_sqr())
                    * self.parseval()
            })
            .sum();
        let h_sq: f64 = (0..2).map(|j| self.p_norm_sq_hat(&uh[j], j)).sum();
        State {
            u,
            value,
            dir_hat: pg,
            residual: (res_sq.max(0.0) / h_sq).sqrt(),
            multipliers,
            lambda_star,
        }
    }

    /// Preconditioner shifts matched to the current multipliers, so that the
    /// preconditioned Hessian has spectrum in `(0, 1]` near a minimizer.
    fn shift_for(&self, multipliers: &[f64]) -> [f64; 2] {
        let w = [self.omega(0), self.omega(1)];
        match self.constraint {
            ConstraintSpec::WeightedSphere { .. } => {
                let nu = multipliers.first().copied().unwrap_or(1.0);
                w.map(|wj| nu.max(0.05) * wj)
            }
            ConstraintSpec::ProductSpheres { .. } | ConstraintSpec::EqualSpheres { .. } => {
                [0, 1].map(|j| multipliers.get(j).copied().unwrap_or(w[j]).max(0.05 * w[j]))
            }
            _ => w,
        }
    }

    fn step(&self, st: &State, tau: f64) -> Result<FieldPair> {
        let g = self.grid;
        let comps: Vec<Vec<C64>> = (0..2)
            .map(|j| {
                let d = field::from_fourier(g, st.dir_hat[j].clone());
                st.u.component(j).iter().zip(&d).map(|(a, b)| a - tau * b).collect()
            })
            .collect();
        let mut it = comps.into_iter();
        FieldPair::new(g, it.next().unwrap(), it.next().unwrap())
    }

    fn retract(&self, u: FieldPair) -> Result<FieldPair> {
        let params = self.params;
        match self.constraint {
            ConstraintSpec::WeightedSphere { gamma } => {
                let m = u.weighted_l2_norm_sq(params);
                if !(m > 0.0) {
                    return Err(Error::InvalidParams("zero field cannot be normalized".into()));
                }
                Ok(u.scaled((gamma / m).sqrt()))
            }
            c @ (ConstraintSpec::ProductSpheres { .. } | ConstraintSpec::EqualSpheres { .. }) => {
                let (d1, d2) = c.product_levels().unwrap();
                let g = u.grid().clone();
                let (mut c1, mut c2) = u.into_components();
                for (comp, d) in [(&mut c1, d1), (&mut c2, d2)] {
                    let m = field::l2_norm_sq(&g, comp)?;
                    if d == 0.0 {
                        comp.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                    } else if m > 0.0 {
                        let s = (d / m).sqrt();
                        comp.iter_mut().for_each(|z| *z *= s);
                    } else {
                        return Err(Error::InvalidParams(
                            "a component constrained to positive mass vanishes".into(),
                        ));
                    }
                }
                FieldPair::new(&g, c1, c2)
            }
            ConstraintSpec::NehariManifold => nehari_project(&u, params),
            ConstraintSpec::NehariSet => nehari_set_project(&u, params),
            ConstraintSpec::PohozaevSet => {
                let ls = profiles::lambda_star_from(&Integrals::of(&u, params), params, u.grid().dim())?;
                if (ls - 1.0).abs() > 0.05 {
                    profiles::dilate_unchecked(&u, ls)
                } else {
                    Ok(u)
                }
            }
        }
    }
}

impl Integrals {
    /// Pointwise integrals only; the gradient terms are left at zero.
    pub(crate) fn of_pointwise(u: &FieldPair, params: &SystemParams) -> Self {
        let p = params.p;
        let vol = u.grid().cell_volume();
        let power = [u.c1(), u.c2()].map(|c| parallel::sum_indexed(c, |_, z| pow_nonneg(z.norm_sqr(), p)) * vol);
        let cross = if params.beta == 0.0 {
            0.0
        } else {
            parallel::sum_zip(u.c1(), u.c2(), |_, a, b| pow_nonneg(a.norm_sqr() * b.norm_sqr(), 0.5 * p)) * vol
        };
        Self {
            grad: [0.0; 2],
            mass: [u.mass(0), u.mass(1)],
            power,
            cross,
        }
    }
}

/// Rescales `U` along its ray so that `⟨I'(tU),tU⟩ = 0`:
/// `t^{2p-2} = ‖U‖²_ℍ/(2pF(U))`.
pub fn nehari_project(u: &FieldPair, params: &SystemParams) -> Result<FieldPair> {
    let it = Integrals::of(u, params);
    let f = it.coupling(params);
    if !(f > 0.0) {
        return Err(Error::InvalidParams("coupling functional vanishes; no Nehari point on this ray".into()));
    }
    let h = it.grad_total() + it.weighted_mass(params);
    let t = (h / (2.0 * params.p * f)).powf(1.0 / (2.0 * params.p - 2.0));
    Ok(u.scaled(t))
}

/// Rescales each component separately so that both partial pairings vanish.
/// Solved in `(ln t₁, ln t₂)` by damped Gauss-Newton; the damping handles
/// `β = 1` with proportional moduli, where the two equations coincide.
pub fn nehari_set_project(u: &FieldPair, params: &SystemParams) -> Result<FieldPair> {
    let it = Integrals::of(u, params);
    let p = params.p;
    let beta = params.beta;
    let a = [0, 1].map(|j| it.grad[j] + params.omega(j) * it.mass[j]);
    let b = it.power;
    let c = it.cross;
    if a.iter().chain(b.iter()).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParams("the Nehari set needs two nontrivial components".into()));
    }
    let mut s = [0, 1].map(|j| (a[j] / b[j]).ln() / (2.0 * p - 2.0));
    let resid = |s: &[f64; 2]| -> [f64; 2] {
        [0, 1].map(|j| {
            let k = 1 - j;
            1.0 - (b[j] * ((2.0 * p - 2.0) * s[j]).exp() + beta * c * ((p - 2.0) * s[j] + p * s[k]).exp()) / a[j]
        })
    };
    let norm = |f: &[f64; 2]| f[0].abs().max(f[1].abs());
    let mut damping = 1e-12;
    let mut ok = false;
    for _ in 0..200 {
        let f = resid(&s);
        if norm(&f) < 1e-14 {
            ok = true;
            break;
        }
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let k = 1 - j;
            let e_self = b[j] * ((2.0 * p - 2.0) * s[j]).exp() / a[j];
            let e_cross = beta * c * ((p - 2.0) * s[j] + p * s[k]).exp() / a[j];
            jac[j][j] = -(2.0 * p - 2.0) * e_self - (p - 2.0) * e_cross;
            jac[j][k] = -p * e_cross;
        }
        // normal equations (JᵀJ + μ)ds = -Jᵀf
        let jtj = [0, 1].map(|r| [0, 1].map(|q| jac[0][r] * jac[0][q] + jac[1][r] * jac[1][q]));
        let jtf = [0, 1].map(|r| jac[0][r] * f[0] + jac[1][r] * f[1]);
        let scale = jtj[0][0] + jtj[1][1];
        let mut accepted = false;
        while damping < 1e6 {
            let mu = damping * scale;
            let m = [[jtj[0][0] + mu, jtj[0][1]], [jtj[1][0], jtj[1][1] + mu]];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if !(det > 0.0 && det.is_finite()) {
                damping *= 10.0;
                continue;
            }
            let mut ds = [
                -(m[1][1] * jtf[0] - m[0][1] * jtf[1]) / det,
                -(-m[1][0] * jtf[0] + m[0][0] * jtf[1]) / det,
            ];
            let big = ds[0].abs().max(ds[1].abs());
            if big > 0.5 {
                ds = ds.map(|v| v * 0.5 / big);
            }
            let trial = [s[0] + ds[0], s[1] + ds[1]];
            if norm(&resid(&trial)) < norm(&f) {
                s = trial;
                damping = (damping * 0.1).max(1e-15);
                accepted = true;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    if !ok {
        return Err(Error::NonConvergence {
            iterations: 200,
            residual: resid(&s)[0].abs().max(resid(&s)[1].abs()),
            target: 1e-14,
        });
    }
    let g = u.grid();
    let (t1, t2) = (s[0].exp(), s[1].exp());
    FieldPair::new(g, u.c1().iter().map(|z| z * t1).collect(), u.c2().iter().map(|z| z * t2).collect())
}

fn run_flow(
    constraint: ConstraintSpec,
    params: &SystemParams,
    grid: &Grid,
    init: &FieldPair,
    opts: &MinimizeOptions,
    label: &str,
) -> Result<MinimizeResult> {
    let flow = Flow {
        constraint,
        params,
        grid,
    };
    if init.mass(0) + init.mass(1) == 0.0 {
        return Err(Error::InvalidParams("zero initializer".into()));
    }
    let start = flow.retract(init.clone())?;
    let probe = flow.evaluate(start.clone(), flow.shift_for(&[]));
    let mut shift = flow.shift_for(&probe.multipliers);
    let mut st = flow.evaluate(start, shift);
    let mut tau = opts.initial_step;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        if opts.history_stride > 0 && iterations % opts.history_stride == 0 {
            history.push(HistoryEntry {
                iteration: iterations,
                value: st.value,
                residual: st.residual,
                step: tau,
            });
        }
        if st.residual < opts.tol {
            converged = true;
            break;
        }
        if !st.value.is_finite() {
            break;
        }
        let slack = VALUE_SLACK * st.value.abs() + 1e-300;
        let accepted = loop {
            // relative update size is about tau * residual; capping it keeps far-from-minimum
            // starts out of the grid-scale collapse basin of supercritical problems
            let tau_eff = tau.min(MAX_RELATIVE_UPDATE / st.residual);
            let trial = flow.step(&st, tau_eff).and_then(|u| flow.retract(u)).map(|u| flow.evaluate(u, shift));
            if let Ok(trial) = trial {
                let drop = st.value - trial.value;
                if trial.value.is_finite()
                    && drop >= -slack
                    && (trial.residual <= st.residual || drop > 10.0 * slack)
                {
                    break Some(trial);
                }
            }
            tau *= 0.5;
            if tau < 1e-14 {
                break None;
            }
        };
        match accepted {
            Some(trial) => {
                let next = flow.shift_for(&trial.multipliers);
                let moved = (0..2).any(|j| (next[j] - shift[j]).abs() > 0.05 * shift[j]);
                st = if moved {
                    shift = next;
                    flow.evaluate(trial.u, shift)
                } else {
                    trial
                };
                tau = (2.0 * tau).min(opts.max_step);
                iterations += 1;
            }
            None => break,
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            residual: st.residual,
            target: opts.tol,
        });
    }
    if constraint == ConstraintSpec::PohozaevSet && st.lambda_star != 1.0 {
        st = flow.evaluate(profiles::dilate(&st.u, st.lambda_star)?, shift);
    }
    Ok(MinimizeResult {
        constraint,
        minimizer: st.u,
        value: st.value,
        multipliers: st.multipliers,
        iterations,
        residual: st.residual,
        history,
        start: label.to_string(),
    })
}

fn gaussian(grid: &Grid, width: f64) -> Vec<C64> {
    (0..grid.len())
        .map(|i| C64::new((-grid.radius_sq(i) / (2.0 * width * width)).exp(), 0.0))
        .collect()
}

/// Deterministic initial guesses for the automatic multi-start.
pub fn initial_guesses(
    constraint: &ConstraintSpec,
    params: &SystemParams,
    grid: &Grid,
    seed: u64,
) -> Vec<(String, FieldPair)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = || 1.0 + 0.2 * (rng.gen::<f64>() - 0.5);
    let (j1, j2, jv, ja, jb) = (jitter(), jitter(), jitter(), jitter(), jitter());
    let zero = vec![C64::new(0.0, 0.0); grid.len()];
    let pair = |a: Vec<C64>, b: Vec<C64>| FieldPair::new(grid, a, b).expect("grid-shaped initializer");
    let (w1, w2) = (j1 / params.omega1.sqrt(), j2 / params.omega2.sqrt());
    let jitter = jv;
    let (wa, wb) = (ja / params.omega1.sqrt(), 1.5 * jb / params.omega2.sqrt());
    match *constraint {
        ConstraintSpec::ProductSpheres { delta2: 0.0, .. } => {
            vec![("scalar-first".into(), pair(gaussian(grid, w1), zero))]
        }
        ConstraintSpec::ProductSpheres { .. } | ConstraintSpec::EqualSpheres { .. } | ConstraintSpec::NehariSet => {
            let mut starts = vec![("two-component".into(), pair(gaussian(grid, wa), gaussian(grid, wb)))];
            // at β = 1 the minimizers form a continuum and asymmetric starts slide
            // off to its scalar end; the swap symmetry keeps this one on u₁ = u₂
            if params.equal_frequencies() && !matches!(constraint, ConstraintSpec::ProductSpheres { .. }) {
                starts.push(("synchronized".into(), pair(gaussian(grid, wa), gaussian(grid, wa))));
            }
            starts
        }
        _ => vec![
            ("scalar-first".into(), pair(gaussian(grid, w1), zero.clone())),
            ("scalar-second".into(), pair(zero, gaussian(grid, w2))),
            (
                "vector".into(),
                pair(
                    gaussian(grid, jitter / params.omega1.sqrt()),
                    gaussian(grid, jitter / params.omega2.sqrt()),
                ),
            ),
        ],
    }
}

/// Outcome of one start of a multi-start run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartOutcome {
    pub label: String,
    pub value: Option<f64>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub kind: Option<StateKind>,
    pub error: Option<String>,
}

/// Minimizes on `constraint`. With `init = None` every automatic start is run in
/// parallel and the lowest value is returned; ties keep the earlier start.
pub fn minimize_on(
    constraint: &ConstraintSpec,
    params: &SystemParams,
    grid: &Grid,
    init: Option<&FieldPair>,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    constraint.validate(params, grid.dim())?;
    match init {
        Some(u) => {
            if u.grid() != grid {
                return Err(Error::GridMismatch("initializer lives on a different grid".into()));
            }
            run_flow(*constraint, params, grid, u, opts, "user")
        }
        None => multi_start(constraint, params, grid, opts).map(|(r, _)| r),
    }
}

fn multi_start(
    constraint: &ConstraintSpec,
    params: &SystemParams,
    grid: &Grid,
    opts: &MinimizeOptions,
) -> Result<(MinimizeResult, Vec<StartOutcome>)> {
    let starts = initial_guesses(constraint, params, grid, opts.seed);
    let runs = parallel::map_jobs(starts, |(label, u)| {
        let r = run_flow(*constraint, params, grid, &u, opts, &label);
        (label, r)
    });
    let mut outcomes = Vec::new();
    let mut best: Option<MinimizeResult> = None;
    let mut last_err = None;
    for (label, r) in runs {
        match r {
            Ok(res) => {
                outcomes.push(StartOutcome {
                    label,
                    value: Some(res.value),
                    residual: Some(res.residual),
                    iterations: Some(res.iterations),
                    kind: Some(classify(&res.minimizer)),
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some(b) => res.value < b.value - 1e-9 * b.value.abs(),
                };
                if better {
                    best = Some(res);
                }
            }
            Err(e) => {
                outcomes.push(StartOutcome {
                    label,
                    value: None,
                    residual: None,
                    iterations: None,
                    kind: None,
                    error: Some(e.to_string()),
                });
                last_err = Some(e);
            }
        }
    }
    match best {
        Some(b) => Ok((b, outcomes)),
        None => Err(last_err.unwrap_or_else(|| Error::Construction("no initial guesses".into()))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateKind {
    ScalarLike,
    VectorLike,
}

/// Scalar-like when the smaller component mass is below `1e-6` of the larger.
pub fn classify(u: &FieldPair) -> StateKind {
    let (a, b) = (u.mass(0), u.mass(1));
    if a.min(b) < 1e-6 * a.max(b) {
        StateKind::ScalarLike
    } else {
        StateKind::VectorLike
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub result: MinimizeResult,
    pub kind: StateKind,
    pub starts: Vec<StartOutcome>,
}

impl GroundState {
    /// The ground-state level `m_N`.
    pub fn level(&self) -> f64 {
        self.result.value
    }
}

/// Minimizes `I` on the Nehari manifold from scalar-type and vector-type starts
/// and keeps the smaller action.
pub fn ground_state(params: &SystemParams, grid: &Grid, opts: &MinimizeOptions) -> Result<GroundState> {
    let c = ConstraintSpec::NehariManifold;
    c.validate(params, grid.dim())?;
    let (result, starts) = multi_start(&c, params, grid, opts)?;
    Ok(GroundState {
        kind: classify(&result.minimizer),
        result,
        starts,
    })
}

/// Multipliers from the pairing identity `⟨∂_jE(V),v_j⟩ = -ν_j δ_j` (or
/// `⟨E'(V),V⟩ = -νγ`), cross-checked against the flow's own estimate.
pub fn multiplier_extract(result: &MinimizeResult, params: &SystemParams) -> Result<Vec<f64>> {
    let v = &result.minimizer;
    let it = Integrals::of(v, params);
    let pairing: Vec<f64> = match result.constraint {
        ConstraintSpec::WeightedSphere { gamma } => {
            let e_pair = it.grad_total() - 2.0 * params.p * it.coupling(params);
            vec![-e_pair / gamma]
        }
        c @ (ConstraintSpec::ProductSpheres { .. } | ConstraintSpec::EqualSpheres { .. }) => {
            let (d1, d2) = c.product_levels().unwrap();
            (0..2)
                .map(|j| {
                    let d = if j == 0 { d1 } else { d2 };
                    if d == 0.0 {
                        0.0
                    } else {
                        -(it.grad[j] - it.power[j] - params.beta * it.cross) / d
                    }
                })
                .collect()
        }
        _ => {
            return Err(Error::Refused(
                "multipliers are only defined for sphere constraints".into(),
            ))
        }
    };
    for (&a, &b) in pairing.iter().zip(&result.multipliers) {
        if (a - b).abs() > 1e-6 * a.abs().max(1.0) {
            return Err(Error::InconsistentMultiplier { pairing: a, flow: b });
        }
    }
    Ok(pairing)
}
