//! Numerical stability and instability experiments: orbit distances, perturbation
//! sweeps around soliton families, blow-up runs and an audit of the level
//! identities between the variational problems.
//!
//! Stability is certified only in a finite sense: the sup over a fixed horizon of
//! the orbit distance, divided by the initial perturbation size, must stay below
//! a threshold. Both the horizon and the threshold are policy, not theory.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, evolve_with, virial_series, EvolveConfig, Outcome, VirialReport};
use crate::error::{Error, Result};
use crate::field::{self, FieldPair, C64};
use crate::functionals::{action, energy, relative_residual, Integrals};
use crate::grid::Grid;
use crate::minimize::{ground_state, minimize_on, ConstraintSpec, MinimizeOptions};
use crate::params::{Criticality, SystemParams};
use crate::parallel;
use crate::profiles::{self, make_member, Family, SolitonSpec};

/// Excursion-ratio threshold `K`.
pub const DEFAULT_RATIO_THRESHOLD: f64 = 10.0;
/// Horizon for the stability sweeps.
pub const DEFAULT_HORIZON: f64 = 50.0;
/// Tolerance of the identity audit.
pub const AUDIT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitDistanceResult {
    pub distance: f64,
    pub best_shift: Vec<f64>,
    pub best_phases: (f64, f64),
    /// Index of the closest orbit when the target has several.
    pub orbit: usize,
}

/// `Σ_q a_q e^{ik_q·y}` with its gradient and Hessian in `y`.
struct Correlation {
    value: C64,
    grad: [C64; 3],
    hess: [[C64; 3]; 3],
}

fn correlation_at(grid: &Grid, a: &[C64], y: &[f64]) -> Correlation {
    let dim = grid.dim();
    let k = grid.wavenumbers();
    let mut out = Correlation {
        value: C64::new(0.0, 0.0),
        grad: [C64::new(0.0, 0.0); 3],
        hess: [[C64::new(0.0, 0.0); 3]; 3],
    };
    for (q, &aq) in a.iter().enumerate() {
        if aq == C64::new(0.0, 0.0) {
            continue;
        }
        let ix = grid.unravel(q);
        let mut kv = [0.0; 3];
        let mut phase = 0.0;
        for d in 0..dim {
            kv[d] = k[ix[d]];
            phase += kv[d] * y[d];
        }
        let t = aq * C64::from_polar(1.0, phase);
        out.value += t;
        for d in 0..dim {
            out.grad[d] += C64::new(0.0, kv[d]) * t;
            for e in 0..dim {
                out.hess[d][e] -= kv[d] * kv[e] * t;
            }
        }
    }
    out
}

/// `S(y) = Σ_j |C_j(y)|` with gradient and Hessian.
fn score_derivatives(grid: &Grid, coeffs: &[Vec<C64>; 2], y: &[f64]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let dim = grid.dim();
    let mut s = 0.0;
    let mut g = [0.0; 3];
    let mut h = [[0.0; 3]; 3];
    for a in coeffs {
        let c = correlation_at(grid, a, y);
        let m = c.value.norm();
        if m == 0.0 {
            continue;
        }
        s += m;
        let re = |u: C64, v: C64| (u.conj() * v).re;
        for d in 0..dim {
            g[d] += re(c.value, c.grad[d]) / m;
            for e in 0..dim {
                h[d][e] += (re(c.grad[e], c.grad[d]) + re(c.value, c.hess[d][e])) / m
                    - re(c.value, c.grad[d]) * re(c.value, c.grad[e]) / (m * m * m);
            }
        }
    }
    (s, g, h)
}

/// Solves `H x = b` for `dim ≤ 3` by Gaussian elimination with partial pivoting.
fn solve_small(dim: usize, mut h: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..dim {
        let piv = (c..dim).max_by(|&i, &j| h[i][c].abs().total_cmp(&h[j][c].abs()))?;
        if h[piv][c].abs() < 1e-300 {
            return None;
        }
        h.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..dim {
            let f = h[r][c] / h[c][c];
            for k in c..dim {
                h[r][k] -= f * h[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..dim).rev() {
        let mut acc = b[r];
        for k in r + 1..dim {
            acc -= h[r][k] * x[k];
        }
        x[r] = acc / h[r][r];
    }
    Some(x)
}

fn signed_shift(i: usize, n: usize) -> isize {
    if i < n / 2 {
        i as isize
    } else {
        i as isize - n as isize
    }
}

/// `inf_{θ₁,θ₂,y} ‖Ψ − (e^{iθ₁}v₁(·−y), e^{iθ₂}v₂(·−y))‖_ℍ` against a single orbit.
///
/// Every whole-cell shift is scored at once by an FFT cross-correlation, the best
/// one is refined by a quadratic fit and then Newton steps on the correlation
/// score, and the distance is finally evaluated directly at the optimum.
pub fn orbit_distance(psi: &FieldPair, member: &FieldPair, params: &SystemParams) -> Result<OrbitDistanceResult> {
    psi.ensure_same_grid(member)?;
    let g = psi.grid();
    let dim = g.dim();
    let n = g.points_per_axis();
    let c = g.cell_volume() / g.len() as f64;
    let ksq = g.ksq();
    let coeffs: [Vec<C64>; 2] = [0, 1].map(|j| {
        let ph = field::to_fourier(g, psi.component(j));
        let vh = field::to_fourier(g, member.component(j));
        let w = params.omega(j);
        ph.iter()
            .zip(&vh)
            .zip(ksq)
            .map(|((&a, &b), &k2)| a * b.conj() * ((k2 + w) * c))
            .collect()
    });

    // C_j at whole-cell shifts: C_j(m·dx) = Nⁿ · IFFT(a_j)[m]
    let scale = g.len() as f64;
    let corr: [Vec<C64>; 2] = [0, 1].map(|j| field::from_fourier(g, coeffs[j].clone()));
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    let mut best_norm = usize::MAX;
    for i in 0..g.len() {
        let s = (corr[0][i].norm() + corr[1][i].norm()) * scale;
        let ix = g.unravel(i);
        let norm: usize = (0..dim).map(|d| signed_shift(ix[d], n).unsigned_abs().pow(2)).sum();
        let tie = (s - best_score).abs() <= 1e-12 * s.abs();
        if (s > best_score && !tie) || (tie && norm < best_norm) {
            best = i;
            best_score = s;
            best_norm = norm;
        }
    }
    let dx = g.spacing();
    let bix = g.unravel(best);
    let mut y = vec![0.0; dim];
    for d in 0..dim {
        y[d] = signed_shift(bix[d], n) as f64 * dx;
    }

    // sub-cell start from a parabola through the peak and its two neighbours
    let at = |d: usize, off: isize| -> f64 {
        let mut ix = bix;
        ix[d] = (ix[d] as isize + off).rem_euclid(n as isize) as usize;
        let i = g.ravel(&ix[..dim]);
        (corr[0][i].norm() + corr[1][i].norm()) * scale
    };
    let mut y_fit = y.clone();
    for d in 0..dim {
        let (l, m, r) = (at(d, -1), at(d, 0), at(d, 1));
        let den = l - 2.0 * m + r;
        if den < 0.0 {
            y_fit[d] += (0.5 * (l - r) / den).clamp(-0.5, 0.5) * dx;
        }
    }
    let (mut s_cur, _, _) = score_derivatives(g, &coeffs, &y_fit);
    if s_cur >= best_score {
        y = y_fit;
    } else {
        s_cur = best_score;
    }
    for _ in 0..30 {
        let (_, grad, hess) = score_derivatives(g, &coeffs, &y);
        let neg: [f64; 3] = [-grad[0], -grad[1], -grad[2]];
        let Some(step) = solve_small(dim, hess, neg) else { break };
        let len: f64 = step[..dim].iter().map(|s| s * s).sum::<f64>().sqrt();
        if !len.is_finite() || len > dx {
            break;
        }
        let trial: Vec<f64> = (0..dim).map(|d| y[d] + step[d]).collect();
        let (s_new, _, _) = score_derivatives(g, &coeffs, &trial);
        if s_new < s_cur {
            break;
        }
        y = trial;
        s_cur = s_new;
        if len < 1e-13 * g.half_width() {
            break;
        }
    }

    let theta = |j: usize| {
        let c = correlation_at(g, &coeffs[j], &y).value;
        if c.norm() == 0.0 {
            0.0
        } else {
            c.arg()
        }
    };
    let phases = (theta(0), theta(1));
    let shifted = if y.iter().all(|&v| v == 0.0) { member.clone() } else { member.translated(&y) };
    let fitted = shifted.with_phases(phases.0, phases.1);
    let optimized = field::h1_distance(psi, &fitted, params)?;
    let plain = field::h1_distance(psi, member, params)?;
    Ok(if plain <= optimized {
        OrbitDistanceResult {
            distance: plain,
            best_shift: vec![0.0; dim],
            best_phases: (0.0, 0.0),
            orbit: 0,
        }
    } else {
        OrbitDistanceResult {
            distance: optimized,
            best_shift: y,
            best_phases: phases,
            orbit: 0,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    /// ground states
    G,
    /// scalar solutions, either component
    S,
    /// vector bound states, `ω₁ = ω₂` only
    B,
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A set of solitons, given by one representative per orbit.
#[derive(Debug, Clone)]
pub struct StabilityTarget {
    pub label: String,
    pub orbits: Vec<FieldPair>,
    /// Set when no known stability result covers the set, e.g. minimizers with unequal masses.
    pub exploratory: bool,
}

impl StabilityTarget {
    pub fn for_family(kind: FamilyKind, params: &SystemParams, grid: &Grid, opts: &MinimizeOptions) -> Result<Self> {
        let member = |f: Family| make_member(&SolitonSpec::canonical(f), params, grid);
        let orbits = match kind {
            FamilyKind::S => vec![member(Family::ScalarFirst)?, member(Family::ScalarSecond)?],
            FamilyKind::B => vec![member(Family::VectorB)?],
            FamilyKind::G => {
                let gs = ground_state(params, grid, opts)?;
                let m = gs.level();
                // closed-form members at the ground level are more accurate than the flow output
                let mut fams = vec![Family::ScalarFirst, Family::ScalarSecond];
                if params.equal_frequencies() {
                    fams.push(Family::VectorB);
                }
                let exact: Vec<FieldPair> = fams
                    .into_iter()
                    .filter_map(|f| member(f).ok())
                    .filter(|u| (action(u, params) - m).abs() <= 1e-6 * m)
                    .collect();
                if exact.is_empty() {
                    vec![gs.result.minimizer]
                } else {
                    exact
                }
            }
        };
        Ok(Self {
            label: kind.to_string(),
            orbits,
            exploratory: false,
        })
    }

    /// Minimizer of `E` on `M_(δ₁,δ₂)`; stability of this set is not covered by
    /// any known stability result when `δ₁ ≠ δ₂`.
    pub fn product_minimizer(
        delta1: f64,
        delta2: f64,
        params: &SystemParams,
        grid: &Grid,
        opts: &MinimizeOptions,
    ) -> Result<Self> {
        let c = ConstraintSpec::ProductSpheres { delta1, delta2 };
        let r = minimize_on(&c, params, grid, None, opts)?;
        Ok(Self {
            label: format!("product({delta1},{delta2})"),
            orbits: vec![r.minimizer],
            exploratory: delta1 != delta2,
        })
    }

    pub fn distance(&self, psi: &FieldPair, params: &SystemParams) -> Result<OrbitDistanceResult> {
        let mut best: Option<OrbitDistanceResult> = None;
        for (i, v) in self.orbits.iter().enumerate() {
            let mut r = orbit_distance(psi, v, params)?;
            r.orbit = i;
            if best.as_ref().is_none_or(|b| r.distance < b.distance) {
                best = Some(r);
            }
        }
        best.ok_or_else(|| Error::Construction("empty stability target".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Perturbation {
    /// Bump added to every component that is nonzero in the member.
    InComponent,
    /// Bump added to the second component only.
    CrossComponent,
}

/// Real Gaussian bump centred at `0.5` on the first axis, scaled so that the
/// perturbation pair has `ℍ`-norm `eps`.
pub fn perturbation(member: &FieldPair, shape: Perturbation, eps: f64, params: &SystemParams) -> Result<FieldPair> {
    let g = member.grid();
    let bump: Vec<C64> = (0..g.len())
        .map(|i| {
            let x = g.position(i);
            let r2: f64 = (0..g.dim()).map(|d| if d == 0 { (x[0] - 0.5).powi(2) } else { x[d] * x[d] }).sum();
            C64::new((-0.5 * r2).exp(), 0.0)
        })
        .collect();
    let zero = vec![C64::new(0.0, 0.0); g.len()];
    let on = match shape {
        Perturbation::InComponent => [member.mass(0) > 0.0, member.mass(1) > 0.0],
        Perturbation::CrossComponent => [false, true],
    };
    let pick = |j: usize| if on[j] { bump.clone() } else { zero.clone() };
    let b = FieldPair::new(g, pick(0), pick(1))?;
    let norm = b.h1_norm_sq(params).sqrt();
    if norm == 0.0 {
        return Err(Error::Construction("perturbation vanishes".into()));
    }
    Ok(b.scaled(eps / norm))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    /// Steps between orbit-distance evaluations.
    pub sample_stride: usize,
    pub ratio_threshold: f64,
    pub perturbation: Perturbation,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-3, 1e-2],
            t_end: DEFAULT_HORIZON,
            dt: 1e-3,
            sample_stride: 100,
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
            perturbation: Perturbation::InComponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Classification {
    StableWithinTolerance,
    ExcursionGrowth,
    BlowUp { time: f64 },
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::StableWithinTolerance => write!(f, "StableWithinTolerance"),
            Self::ExcursionGrowth => write!(f, "ExcursionGrowth"),
            Self::BlowUp { time } => write!(f, "BlowUp(t*={time})"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRun {
    pub eps: f64,
    pub max_excursion: f64,
    pub ratio: f64,
    pub mass_drift: [f64; 2],
    pub energy_drift: f64,
    /// Largest second-component mass seen along the run.
    pub max_mass2: f64,
    pub blowup_time: Option<f64>,
    /// `(t, orbit distance)` samples.
    pub excursion: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub family: String,
    pub epsilons: Vec<f64>,
    pub max_excursions: Vec<f64>,
    pub ratios: Vec<f64>,
    pub classification: Classification,
    /// Excursion does not grow as `ε` decreases.
    pub monotone: bool,
    pub exploratory: bool,
    pub runs: Vec<SweepRun>,
}

impl StabilityVerdict {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["family", "eps", "max_excursion", "ratio", "mass_drift1", "mass_drift2", "energy_drift", "max_mass2", "blowup_time"])?;
        for r in &self.runs {
            wtr.write_record([
                self.family.clone(),
                r.eps.to_string(),
                r.max_excursion.to_string(),
                r.ratio.to_string(),
                r.mass_drift[0].to_string(),
                r.mass_drift[1].to_string(),
                r.energy_drift.to_string(),
                r.max_mass2.to_string(),
                r.blowup_time.map(|t| t.to_string()).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!("family {}: {}", self.family, self.classification);
        if self.exploratory {
            s.push_str(" [exploratory: no known stability result covers this set]");
        }
        for r in &self.runs {
            s.push_str(&format!("\n  eps {:.3e}: max excursion {:.3e}, ratio {:.3}", r.eps, r.max_excursion, r.ratio));
        }
        s
    }
}

/// Perturbs the first orbit representative by each `ε`, evolves, and records
/// the sup over sampled times of the distance to the target set.
pub fn stability_sweep(target: &StabilityTarget, params: &SystemParams, cfg: &SweepConfig) -> Result<StabilityVerdict> {
    let member = target.orbits.first().ok_or_else(|| Error::Construction("empty stability target".into()))?;
    let dim = member.grid().dim();
    if params.criticality(dim) != Criticality::Subcritical {
        return Err(Error::Refused(format!(
            "stability sweeps need subcritical p < 1 + 2/n = {} (got p = {})",
            SystemParams::critical_exponent(dim),
            params.p
        )));
    }
    if cfg.epsilons.is_empty() || cfg.epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidParams("epsilons must be positive and non-empty".into()));
    }
    let ecfg = EvolveConfig {
        dt: cfg.dt,
        t_end: cfg.t_end,
        conservation_check_stride: cfg.sample_stride,
        ..Default::default()
    };
    let runs = parallel::map_jobs(cfg.epsilons.clone(), |eps| -> Result<SweepRun> {
        let datum = member.lin_comb(1.0, &perturbation(member, cfg.perturbation, eps, params)?, 1.0)?;
        let mut excursion = Vec::new();
        let mut failure = None;
        let log = evolve_with(&datum, &ecfg, params, |t, u| match target.distance(u, params) {
            Ok(d) => excursion.push((t, d.distance)),
            Err(e) => failure = Some(e),
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let max_excursion = excursion.iter().fold(0.0, |a: f64, &(_, d)| a.max(d));
        Ok(SweepRun {
            eps,
            max_excursion,
            ratio: max_excursion / eps,
            mass_drift: log.mass_drift(),
            energy_drift: log.energy_drift(),
            max_mass2: log.mass2.iter().fold(0.0, |a: f64, &m| a.max(m)),
            blowup_time: log.blowup_time(),
            excursion,
        })
    });
    let runs: Vec<SweepRun> = runs.into_iter().collect::<Result<_>>()?;
    let classification = if let Some(t) = runs.iter().filter_map(|r| r.blowup_time).reduce(f64::min) {
        Classification::BlowUp { time: t }
    } else if runs.iter().all(|r| r.ratio <= cfg.ratio_threshold) {
        Classification::StableWithinTolerance
    } else {
        Classification::ExcursionGrowth
    };
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[a].eps.total_cmp(&runs[b].eps));
    let monotone = order.windows(2).all(|w| runs[w[0]].max_excursion <= runs[w[1]].max_excursion);
    Ok(StabilityVerdict {
        family: target.label.clone(),
        epsilons: runs.iter().map(|r| r.eps).collect(),
        max_excursions: runs.iter().map(|r| r.max_excursion).collect(),
        ratios: runs.iter().map(|r| r.ratio).collect(),
        classification,
        monotone,
        exploratory: target.exploratory,
        runs,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BlowupConfig {
    pub dt: f64,
    pub t_end: f64,
    pub sample_stride: usize,
    pub blowup_guard: f64,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_end: 20.0,
            sample_stride: 10,
            blowup_guard: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlowupRegime {
    /// dilation `U^{s^{n/2},s}` of a member, `p > 1 + 2/n`
    Dilation,
    /// amplification `λU` of a member, `p = 1 + 2/n`
    Amplification,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupReport {
    pub family: FamilyKind,
    pub regime: BlowupRegime,
    pub factor: f64,
    pub datum_virial: f64,
    pub datum_action: f64,
    pub datum_energy: f64,
    /// Ground level `m_N`, supercritical runs only.
    pub ground_level: Option<f64>,
    /// Action of the undeformed member.
    pub family_level: f64,
    /// `family_level − I(datum)`; the virial bound `V″ ≤ −8σ` is checked with it.
    pub sigma: Option<f64>,
    /// `R ≤ I − m_N`, supercritical runs only.
    pub action_gap_bound_holds: Option<bool>,
    pub classification: Classification,
    pub valid_samples: usize,
    pub concave: bool,
    pub virial_bound_holds: Option<bool>,
    pub virial: VirialReport,
}

impl BlowupReport {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "family {} ({:?}, factor {}): {}\n  R(datum) = {:.6e}, I(datum) = {:.6e}",
            self.family, self.regime, self.factor, self.classification, self.datum_virial, self.datum_action
        );
        if let Some(m) = self.ground_level {
            s.push_str(&format!(", m_N = {m:.6e}"));
        }
        if let Some(sig) = self.sigma {
            s.push_str(&format!(", sigma = {sig:.6e}"));
        }
        s.push_str(&format!(
            "\n  variance concave over {} samples: {}; virial residual {:.3e}",
            self.valid_samples, self.concave, self.virial.max_relative_residual
        ));
        if let Some(t) = match self.classification {
            Classification::BlowUp { time } => Some(time),
            _ => None,
        } {
            s.push_str(&format!("\n  t* >= {t}"));
        }
        s
    }
}

/// Builds the unstable datum from a family member, evolves it and checks the
/// virial picture. Supercritical `p` dilates by `factor`, critical `p`
/// amplifies by `factor`.
pub fn blowup_experiment(
    family: FamilyKind,
    params: &SystemParams,
    factor: f64,
    grid: &Grid,
    cfg: &BlowupConfig,
    opts: &MinimizeOptions,
) -> Result<BlowupReport> {
    let dim = grid.dim();
    let regime = match params.criticality(dim) {
        Criticality::Supercritical => BlowupRegime::Dilation,
        Criticality::Critical => BlowupRegime::Amplification,
        Criticality::Subcritical => {
            return Err(Error::Refused(format!(
                "blow-up experiments need p >= 1 + 2/n = {} (got p = {})",
                SystemParams::critical_exponent(dim),
                params.p
            )))
        }
    };
    if !(factor > 1.0) {
        return Err(Error::Construction(format!("the deformation factor must exceed 1 (got {factor})")));
    }
    let target = StabilityTarget::for_family(family, params, grid, opts)?;
    let member = &target.orbits[0];
    let datum = match regime {
        BlowupRegime::Dilation => profiles::dilate(member, factor)?,
        BlowupRegime::Amplification => member.scaled(factor),
    };
    let it = Integrals::of(&datum, params);
    let r = it.virial(params, dim);
    if !(r < 0.0) {
        return Err(Error::Construction(format!("R(datum) = {r:.6e} is not negative")));
    }
    let i_datum = it.action(params);
    let family_level = action(member, params);
    let (ground_level, sigma, gap_bound) = match regime {
        BlowupRegime::Dilation => {
            let m_n = ground_state(params, grid, opts)?.level();
            let sigma = family_level - i_datum;
            (Some(m_n), Some(sigma), Some(r <= i_datum - m_n + 1e-6))
        }
        BlowupRegime::Amplification => (None, None, None),
    };
    let ecfg = EvolveConfig {
        dt: cfg.dt,
        t_end: cfg.t_end,
        conservation_check_stride: cfg.sample_stride,
        blowup_guard: cfg.blowup_guard,
        ..Default::default()
    };
    let log = evolve(&datum, &ecfg, params)?;
    let classification = match log.outcome {
        Outcome::BlowupSuspected { time, .. } => Classification::BlowUp { time },
        Outcome::Completed => Classification::StableWithinTolerance,
    };
    let virial = virial_series(&log, params)?;
    let scale = virial.eight_r.iter().fold(0.0, |a: f64, x| a.max(x.abs()));
    let concave = virial.second_difference.iter().all(|&v| v <= 1e-6 * scale);
    let virial_bound_holds =
        sigma.map(|s| virial.second_difference.iter().all(|&v| v <= -8.0 * s + 1e-6 * scale));
    Ok(BlowupReport {
        family,
        regime,
        factor,
        datum_virial: r,
        datum_action: i_datum,
        datum_energy: energy(&datum, params),
        ground_level,
        family_level,
        sigma,
        action_gap_bound_holds: gap_bound,
        classification,
        valid_samples: virial.second_difference.len() + 2,
        concave,
        virial_bound_holds,
        virial,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRow {
    pub identity: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    pub tol: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.rows.iter().filter(|r| !r.pass).map(|r| r.identity.as_str()).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&format!(
                "{} {}: {:.9} vs {:.9} (rel {:.2e})\n",
                if r.pass { "PASS" } else { "FAIL" },
                r.identity,
                r.lhs,
                r.rhs,
                r.relative_error
            ));
        }
        s
    }

    /// [`Error::Construction`] naming every violated identity.
    pub fn ensure_passed(&self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::Construction(format!("audit failed: {}", self.failures().join(", "))))
        }
    }
}

/// Zero-pads `u` into a box of twice the half-width at the same spacing.
fn embed_doubled(u: &FieldPair) -> Result<FieldPair> {
    let g = u.grid();
    let n = g.points_per_axis();
    let big = Grid::new(g.dim(), 2 * n, 2.0 * g.half_width())?;
    let mut out = FieldPair::zeros(&big);
    for j in 0..2 {
        let src = u.component(j);
        let dst = out.component_mut(j);
        for (i, z) in src.iter().enumerate() {
            let ix = g.unravel(i);
            let mut to = [0usize; 3];
            for a in 0..g.dim() {
                to[a] = ix[a] + n / 2;
            }
            dst[big.ravel(&to[..g.dim()])] = *z;
        }
    }
    Ok(out)
}

/// Recomputes the level identities that apply to `params` with independent
/// solver runs.
pub fn identity_audit(params: &SystemParams, grid: &Grid, opts: &MinimizeOptions) -> Result<AuditReport> {
    let dim = grid.dim();
    let p = params.p;
    let tol = AUDIT_TOL;
    let mut rows = Vec::new();
    let mut push = |identity: &str, lhs: f64, rhs: f64| {
        let relative_error = relative_residual(lhs, rhs);
        rows.push(AuditRow {
            identity: identity.into(),
            lhs,
            rhs,
            relative_error,
            pass: relative_error <= tol,
        });
    };
    let gs = ground_state(params, grid, opts)?;
    let m_n = gs.level();
    let gamma0 = profiles::gamma_zero(m_n, params, dim);
    push(
        "weighted mass of ground state = gamma0",
        gs.result.minimizer.weighted_l2_norm_sq(params),
        gamma0,
    );
    match params.criticality(dim) {
        Criticality::Subcritical => {
            let sphere = minimize_on(&ConstraintSpec::WeightedSphere { gamma: gamma0 }, params, grid, None, opts)?;
            push("m_N = m_gamma0", m_n, sphere.value + 0.5 * gamma0);
            // the γ₀/2 image is twice as wide as the ground state
            let wide = embed_doubled(&gs.result.minimizer)?;
            for (label, f) in [("0.5", 0.5), ("1", 1.0), ("2", 2.0)] {
                let gamma = f * gamma0;
                let (v, _) = profiles::nehari_to_sphere(&wide, gamma, params)?;
                let t = profiles::critical_value_map_t(m_n, gamma, params, dim)?;
                push(&format!("E(sphere image) = T(m_N) at gamma = {label} gamma0"), energy(&v, params), t);
            }
        }
        Criticality::Supercritical => {
            let pz = minimize_on(&ConstraintSpec::PohozaevSet, params, grid, None, opts)?;
            push("m_P = m_N", pz.value, m_n);
        }
        Criticality::Critical => {}
    }
    if params.equal_frequencies() {
        let m2 = minimize_on(&ConstraintSpec::NehariSet, params, grid, None, opts)?.value;
        // the single equation with coefficient 1 + β rescales the uncoupled level
        let uncoupled = SystemParams { beta: 0.0, ..*params };
        let m_scalar = ground_state(&uncoupled, grid, opts)?.level();
        let m1 = m_scalar * (1.0 + params.beta).powf(-1.0 / (p - 1.0));
        push("m_2 = 2 m_1", m2, 2.0 * m1);
        if p == 2.0 && dim == 1 {
            let closed = (8.0 / 3.0) * params.omega1.powf(1.5) / (1.0 + params.beta);
            push("m_2 = (8/3) omega^(3/2) / (1 + beta)", m2, closed);
        }
    }
    Ok(AuditReport { rows, tol })
}

/// `sup_t dist(Φ(t), orbit)` for the unperturbed member, a scheme-level check.
pub fn standing_wave_excursion(member: &FieldPair, params: &SystemParams, cfg: &EvolveConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut failure = None;
    evolve_with(member, cfg, params, |_, u| match orbit_distance(u, member, params) {
        Ok(d) => worst = worst.max(d.distance),
        Err(e) => failure = Some(e),
    })?
    .ensure_completed()?;
    match failure {
        Some(e) => Err(e),
        None => Ok(worst),
    }
}
