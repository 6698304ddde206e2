//! Time integration of `i∂ₜφⱼ + Δφⱼ + Nⱼ(Φ) = 0` by Strang splitting.
//!
//! The kinetic substeps are exact Fourier multipliers. The nonlinear substep is
//! exact too: the coefficients of the nonlinear flow are real, so both moduli are
//! frozen and the flow is a pointwise phase rotation. Discrete masses are
//! therefore conserved up to roundoff.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldPair, BOUNDARY_DECAY_TOL, C64};
use crate::functionals::{pow_nonneg, variance_unchecked, Integrals};
use crate::grid::Grid;
use crate::params::SystemParams;
use crate::parallel;

/// Share of the resolution limit `k_max·‖Φ‖₂` at which the guard trips
/// regardless of `blowup_guard`.
pub const RESOLUTION_GUARD_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between stored snapshots; only used when `keep_snapshots` is set.
    pub snapshot_stride: usize,
    /// Steps between logged samples.
    pub conservation_check_stride: usize,
    /// Abort once `‖∇Φ‖₂` exceeds this multiple of its initial value.
    pub blowup_guard: f64,
    pub keep_snapshots: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 10.0,
            snapshot_stride: 1000,
            conservation_check_stride: 10,
            blowup_guard: 1e6,
            keep_snapshots: false,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive (got {})", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParams(format!("t_end must be positive (got {})", self.t_end)));
        }
        if self.snapshot_stride == 0 || self.conservation_check_stride == 0 {
            return Err(Error::InvalidParams("strides must be at least 1".into()));
        }
        if !(self.blowup_guard > 1.0) {
            return Err(Error::InvalidParams(format!(
                "blowup_guard must exceed 1 (got {})",
                self.blowup_guard
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum Outcome {
    Completed,
    /// The guard tripped at `time`; this is a lower bound for the blow-up time.
    BlowupSuspected { time: f64, gradnorm: f64, reason: String },
}

#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    pub dim: usize,
    pub times: Vec<f64>,
    pub mass1: Vec<f64>,
    pub mass2: Vec<f64>,
    pub energy: Vec<f64>,
    /// `NaN` once the field no longer decays at the boundary.
    pub variance: Vec<f64>,
    pub gradnorm: Vec<f64>,
    pub snapshots: Vec<(f64, FieldPair)>,
    pub outcome: Outcome,
    pub final_state: FieldPair,
}

#[derive(Serialize)]
struct Row {
    t: f64,
    mass1: f64,
    mass2: f64,
    energy: f64,
    variance: f64,
    gradnorm: f64,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn blowup_time(&self) -> Option<f64> {
        match self.outcome {
            Outcome::BlowupSuspected { time, .. } => Some(time),
            Outcome::Completed => None,
        }
    }

    /// Turns a guard trip into [`Error::BlowupSuspected`].
    pub fn ensure_completed(&self) -> Result<()> {
        match &self.outcome {
            Outcome::Completed => Ok(()),
            Outcome::BlowupSuspected { time, .. } => Err(Error::BlowupSuspected { time: *time }),
        }
    }

    /// Largest relative drift of `‖φⱼ(t)‖₂²` against the first sample.
    pub fn mass_drift(&self) -> [f64; 2] {
        [&self.mass1, &self.mass2].map(|m| {
            let m0 = m[0];
            if m0 == 0.0 {
                m.iter().fold(0.0, |a: f64, &v| a.max(v.abs()))
            } else {
                m.iter().fold(0.0, |a: f64, &v| a.max((v - m0).abs() / m0))
            }
        })
    }

    /// Largest `|E(t) − E(0)|`, relative when `|E(0)| ≥ 1`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        let scale = e0.abs().max(1.0);
        self.energy.iter().fold(0.0, |a: f64, &e| a.max((e - e0).abs() / scale))
    }

    /// `R(Φ(t))` recovered from the logged energy and gradient norm.
    pub fn virial(&self, params: &SystemParams) -> Vec<f64> {
        let k = self.dim as f64 * (params.p - 1.0);
        self.gradnorm
            .iter()
            .zip(&self.energy)
            .map(|(g, e)| {
                let g2 = g * g;
                let f = 0.5 * g2 - e;
                g2 - k * f
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for i in 0..self.len() {
            wtr.serialize(Row {
                t: self.times[i],
                mass1: self.mass1[i],
                mass2: self.mass2[i],
                energy: self.energy[i],
                variance: self.variance[i],
                gradnorm: self.gradnorm[i],
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Precomputed `e^{−i|k|²h}` for one kinetic substep of length `h`.
struct Kinetic {
    factor: Vec<C64>,
}

impl Kinetic {
    fn new(grid: &Grid, h: f64) -> Self {
        Self {
            factor: grid
                .ksq()
                .iter()
                .map(|&k2| {
                    let f = C64::from_polar(1.0, -k2 * h);
                    f / f.norm()
                })
                .collect(),
        }
    }

    fn apply(&self, grid: &Grid, u: &mut FieldPair) {
        let f = &self.factor;
        for j in 0..2 {
            let c = u.component_mut(j);
            grid.fft_forward(c);
            parallel::for_each_indexed(c, |i, z| *z *= f[i]);
            grid.fft_inverse(c);
        }
    }
}

/// Exact nonlinear flow over time `h`.
fn nonlinear_rotation(u: &mut FieldPair, h: f64, params: &SystemParams) {
    let p = params.p;
    let beta = params.beta;
    let (c1, c2) = u.components_mut();
    let rotate = |a: &mut C64, b: &mut C64| {
        let (ra, rb) = (a.norm_sqr(), b.norm_sqr());
        let cross = if beta == 0.0 { 0.0 } else { beta * pow_nonneg(ra * rb, 0.5 * p) };
        // |a|^{2p-2} + β|b|^p|a|^{p-2}, written to stay finite where a = 0
        let wa = pow_nonneg(ra, p - 1.0) + if ra > 0.0 { cross / ra } else { 0.0 };
        let wb = pow_nonneg(rb, p - 1.0) + if rb > 0.0 { cross / rb } else { 0.0 };
        *a *= C64::from_polar(1.0, h * wa);
        *b *= C64::from_polar(1.0, h * wb);
    };
    let chunk = parallel::CHUNK;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        c1.par_chunks_mut(chunk).zip(c2.par_chunks_mut(chunk)).for_each(|(x, y)| {
            x.iter_mut().zip(y.iter_mut()).for_each(|(a, b)| rotate(a, b));
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = chunk;
        c1.iter_mut().zip(c2.iter_mut()).for_each(|(a, b)| rotate(a, b));
    }
}

/// One Strang step: half kinetic, full nonlinear, half kinetic.
pub fn step_strang(phi: &FieldPair, dt: f64, params: &SystemParams) -> Result<FieldPair> {
    if !phi.is_finite() {
        return Err(Error::InvalidParams("non-finite field".into()));
    }
    let g = phi.grid().clone();
    let half = Kinetic::new(&g, 0.5 * dt);
    let mut u = phi.clone();
    half.apply(&g, &mut u);
    nonlinear_rotation(&mut u, dt, params);
    half.apply(&g, &mut u);
    Ok(u)
}

/// Only the nonlinear substep, exposed for checks of its modulus preservation.
pub fn nonlinear_substep(phi: &FieldPair, dt: f64, params: &SystemParams) -> FieldPair {
    let mut u = phi.clone();
    nonlinear_rotation(&mut u, dt, params);
    u
}

pub fn evolve(phi0: &FieldPair, cfg: &EvolveConfig, params: &SystemParams) -> Result<TrajectoryLog> {
    evolve_with(phi0, cfg, params, |_, _| {})
}

/// [`evolve`] that also hands every logged sample to `observe`.
pub fn evolve_with<F>(
    phi0: &FieldPair,
    cfg: &EvolveConfig,
    params: &SystemParams,
    mut observe: F,
) -> Result<TrajectoryLog>
where
    F: FnMut(f64, &FieldPair),
{
    cfg.validate()?;
    params.validate()?;
    if !phi0.is_finite() {
        return Err(Error::InvalidParams("initial field is not finite".into()));
    }
    let g = phi0.grid().clone();
    let mut log = TrajectoryLog {
        dim: g.dim(),
        times: Vec::new(),
        mass1: Vec::new(),
        mass2: Vec::new(),
        energy: Vec::new(),
        variance: Vec::new(),
        gradnorm: Vec::new(),
        snapshots: Vec::new(),
        outcome: Outcome::Completed,
        final_state: phi0.clone(),
    };
    let mut record = |log: &mut TrajectoryLog, t: f64, u: &FieldPair| -> f64 {
        let it = Integrals::of(u, params);
        let gn = it.grad_total().max(0.0).sqrt();
        log.times.push(t);
        log.mass1.push(it.mass[0]);
        log.mass2.push(it.mass[1]);
        log.energy.push(it.energy(params));
        log.variance.push(if u.boundary_ratio() <= BOUNDARY_DECAY_TOL {
            variance_unchecked(u)
        } else {
            f64::NAN
        });
        log.gradnorm.push(gn);
        observe(t, u);
        gn
    };

    let g0 = record(&mut log, 0.0, phi0);
    let total_mass = phi0.mass(0) + phi0.mass(1);
    let guard = (cfg.blowup_guard * g0).min(RESOLUTION_GUARD_FRACTION * g.k_max() * total_mass.sqrt());

    let full_steps = (cfg.t_end / cfg.dt * (1.0 + 1e-12)).floor() as usize;
    let tail = cfg.t_end - full_steps as f64 * cfg.dt;
    let tail = if tail > 1e-9 * cfg.dt { Some(tail) } else { None };
    let total = full_steps + tail.is_some() as usize;
    let half = Kinetic::new(&g, 0.5 * cfg.dt);
    let full = Kinetic::new(&g, cfg.dt);
    let mut u = phi0.clone();
    if cfg.keep_snapshots {
        log.snapshots.push((0.0, u.clone()));
    }
    // Between samples the closing half kick of one step and the opening half
    // kick of the next are fused into a single full kick.
    let mut open = false;
    for s in 1..=total {
        let is_tail = s > full_steps;
        if is_tail {
            let h = tail.unwrap();
            let k = Kinetic::new(&g, 0.5 * h);
            k.apply(&g, &mut u);
            nonlinear_rotation(&mut u, h, params);
            k.apply(&g, &mut u);
        } else {
            if open {
                full.apply(&g, &mut u);
            } else {
                half.apply(&g, &mut u);
            }
            nonlinear_rotation(&mut u, cfg.dt, params);
            open = true;
        }
        let t = if is_tail { cfg.t_end } else { s as f64 * cfg.dt };
        let sample = s % cfg.conservation_check_stride == 0 || s == total;
        let snapshot = cfg.keep_snapshots && s % cfg.snapshot_stride == 0;
        if !(sample || snapshot || s == full_steps) {
            continue;
        }
        if open {
            half.apply(&g, &mut u);
            open = false;
        }
        if !u.is_finite() {
            log.outcome = Outcome::BlowupSuspected {
                time: t,
                gradnorm: f64::NAN,
                reason: "non-finite field".into(),
            };
            break;
        }
        if snapshot {
            log.snapshots.push((t, u.clone()));
        }
        if sample {
            let gn = record(&mut log, t, &u);
            if gn > guard {
                log.outcome = Outcome::BlowupSuspected {
                    time: t,
                    gradnorm: gn,
                    reason: format!("gradient norm {gn:.3e} exceeds guard {guard:.3e}"),
                };
                break;
            }
        }
    }
    log.final_state = u;
    Ok(log)
}

/// Finite-difference `V″` against `8R(Φ(t))` over the window where the
/// variance is valid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VirialReport {
    pub times: Vec<f64>,
    pub second_difference: Vec<f64>,
    pub eight_r: Vec<f64>,
    /// `max|V″ − 8R| / max|8R|` over the window.
    pub max_relative_residual: f64,
    pub max_abs_residual: f64,
}

/// Needs at least three consecutive valid, equally spaced variance samples.
pub fn virial_series(log: &TrajectoryLog, params: &SystemParams) -> Result<VirialReport> {
    let valid = log.variance.iter().take_while(|v| v.is_finite()).count();
    // the final sample may sit after a shorter tail step
    let mut end = valid;
    if end >= 3 {
        let h = log.times[1] - log.times[0];
        while end >= 3 && ((log.times[end - 1] - log.times[end - 2]) - h).abs() > 1e-9 * h {
            end -= 1;
        }
    }
    if end < 3 {
        return Err(Error::WindowTooShort(end));
    }
    let h = log.times[1] - log.times[0];
    let r = log.virial(params);
    let mut report = VirialReport {
        times: Vec::new(),
        second_difference: Vec::new(),
        eight_r: Vec::new(),
        max_relative_residual: 0.0,
        max_abs_residual: 0.0,
    };
    let v = &log.variance;
    for i in 1..end - 1 {
        let fd = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        report.times.push(log.times[i]);
        report.second_difference.push(fd);
        report.eight_r.push(8.0 * r[i]);
    }
    let scale = report.eight_r.iter().fold(0.0, |a: f64, x| a.max(x.abs()));
    report.max_abs_residual = report
        .second_difference
        .iter()
        .zip(&report.eight_r)
        .fold(0.0, |a: f64, (x, y)| a.max((x - y).abs()));
    report.max_relative_residual = if scale > 0.0 { report.max_abs_residual / scale } else { 0.0 };
    Ok(report)
}
