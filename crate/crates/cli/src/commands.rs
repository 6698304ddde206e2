use std::fmt::Write as _;

use cnls::dynamics::evolve_with;
use cnls::functionals::{pohozaev_check, write_reports_csv, FunctionalReport, PohozaevResiduals};
use cnls::minimize::{ground_state, minimize_on, multiplier_extract, HistoryEntry, MinimizeResult, StartOutcome, StateKind};
use cnls::profiles::{base_profile_nd, make_member, SolitonSpec};
use cnls::stability::{blowup_experiment, identity_audit, stability_sweep, StabilityTarget};
use cnls::{snapshot, FieldPair, Grid};
use serde::Serialize;

use crate::config::{InitialData, RunConfig};
use crate::error::{CliError, Result};
use crate::output::OutDir;

#[derive(Serialize)]
struct MinimizeSidecar<'a> {
    constraint: &'a cnls::minimize::ConstraintSpec,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    m_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<StateKind>,
    iterations: usize,
    residual: f64,
    multipliers: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    multipliers_from_pairing: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pohozaev: Option<PohozaevResiduals>,
    functionals: FunctionalReport,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    starts: &'a [StartOutcome],
}

fn write_history(out: &OutDir, history: &[HistoryEntry]) -> Result<()> {
    out.csv("history.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        for h in history {
            wtr.serialize(h)?;
        }
        wtr.flush()?;
        Ok(())
    })
}

#[derive(Serialize)]
struct PohozaevRow {
    level: f64,
    gradient: f64,
    coupling: f64,
    weighted_mass: f64,
}

#[derive(Serialize)]
struct VirialRow {
    t: f64,
    second_difference: f64,
    eight_r: f64,
}

fn write_rows<T: Serialize>(out: &OutDir, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
    out.csv(name, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        for r in rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    })
}

fn finish_minimize(
    out: &OutDir,
    cfg: &RunConfig,
    result: &MinimizeResult,
    kind: Option<StateKind>,
    starts: &[StartOutcome],
    snapshot_name: &str,
) -> Result<()> {
    let params = &cfg.params;
    let u = &result.minimizer;
    let energy_route = result.constraint.minimizes_energy();
    let m_n = (!energy_route).then_some(result.value);
    let pohozaev = match m_n {
        Some(m) if result.constraint != cnls::minimize::ConstraintSpec::NehariSet => Some(pohozaev_check(u, params, m)?),
        _ => None,
    };
    let report = FunctionalReport::compute(u, params);
    let sidecar = MinimizeSidecar {
        constraint: &result.constraint,
        value: result.value,
        m_n,
        kind,
        iterations: result.iterations,
        residual: result.residual,
        multipliers: &result.multipliers,
        multipliers_from_pairing: if energy_route { Some(multiplier_extract(result, params)?) } else { None },
        pohozaev,
        functionals: report,
        starts,
    };
    out.snapshot(snapshot_name, u, params)?;
    out.json("result.json", &sidecar)?;
    write_history(out, &result.history)?;
    out.csv("functionals.csv", |w| write_reports_csv(w, &[report]))?;
    if let Some(p) = pohozaev {
        let row = PohozaevRow {
            level: result.value,
            gradient: p.gradient,
            coupling: p.coupling,
            weighted_mass: p.weighted_mass,
        };
        write_rows(out, "pohozaev.csv", [row])?;
    }
    Ok(())
}

pub fn ground(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let grid = cfg.grid()?;
    let gs = ground_state(&cfg.params, &grid, &cfg.minimize)?;
    finish_minimize(out, cfg, &gs.result, Some(gs.kind), &gs.starts, "ground_state.snap")?;
    Ok(format!(
        "ground state: m_N = {:.12} ({:?}, {} iterations, residual {:.2e})",
        gs.level(),
        gs.kind,
        gs.result.iterations,
        gs.result.residual
    ))
}

pub fn minimize(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let constraint = cfg
        .constraint
        .ok_or_else(|| CliError::Config("the minimize command needs a [constraint] table".into()))?;
    let grid = cfg.grid()?;
    let r = minimize_on(&constraint, &cfg.params, &grid, None, &cfg.minimize)?;
    finish_minimize(out, cfg, &r, None, &[], "minimizer.snap")?;
    Ok(format!(
        "{:?}: value {:.12} ({} iterations, residual {:.2e})",
        constraint, r.value, r.iterations, r.residual
    ))
}

fn initial_datum(cfg: &RunConfig, grid: &Grid) -> Result<FieldPair> {
    match &cfg.evolve.initial {
        InitialData::Member {
            family,
            theta1,
            theta2,
            shift,
            amplitude1,
            amplitude2,
        } => {
            let spec = SolitonSpec {
                family: *family,
                theta1: *theta1,
                theta2: *theta2,
                shift: shift.clone(),
            };
            let u = make_member(&spec, &cfg.params, grid)?;
            let (c1, c2) = u.into_components();
            Ok(FieldPair::new(
                grid,
                c1.into_iter().map(|z| z * *amplitude1).collect(),
                c2.into_iter().map(|z| z * *amplitude2).collect(),
            )?)
        }
        InitialData::GroundState => Ok(ground_state(&cfg.params, grid, &cfg.minimize)?.result.minimizer),
        InitialData::Snapshot { path } => {
            let (u, _) = snapshot::load(path)?;
            let g = u.grid();
            if g.dim() != grid.dim() || g.points_per_axis() != grid.points_per_axis() || g.half_width() != grid.half_width() {
                return Err(CliError::Config(format!(
                    "snapshot {} was written on a different grid than [grid]",
                    path.display()
                )));
            }
            Ok(u)
        }
    }
}

#[derive(Serialize)]
struct EvolveSidecar {
    steps_logged: usize,
    mass_drift: [f64; 2],
    energy_drift: f64,
    outcome: cnls::dynamics::Outcome,
    snapshots: Vec<String>,
}

pub fn evolve(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let grid = cfg.grid()?;
    let params = &cfg.params;
    let phi0 = initial_datum(cfg, &grid)?;
    let mut log = evolve_with(&phi0, &cfg.evolve.run, params, |_, _| {})?;
    let mut names = Vec::new();
    for (k, (t, snap)) in log.snapshots.iter().enumerate() {
        let name = format!("snapshots/snap_{k:05}.snap");
        out.snapshot(&name, snap, params)?;
        names.push(format!("{name} t={t}"));
    }
    log.snapshots.clear();
    out.snapshot("final.snap", &log.final_state, params)?;
    out.csv("conservation.csv", |w| log.write_csv(w))?;
    let sidecar = EvolveSidecar {
        steps_logged: log.len(),
        mass_drift: log.mass_drift(),
        energy_drift: log.energy_drift(),
        outcome: log.outcome.clone(),
        snapshots: names,
    };
    out.json("summary.json", &sidecar)?;
    let mut s = format!(
        "evolved to t = {}: mass drift ({:.2e}, {:.2e}), energy drift {:.2e}",
        log.times.last().copied().unwrap_or(0.0),
        sidecar.mass_drift[0],
        sidecar.mass_drift[1],
        sidecar.energy_drift
    );
    if let Some(t) = log.blowup_time() {
        let _ = write!(s, "; blow-up suspected at t = {t}");
    }
    out.text("summary.txt", &format!("{s}\n"))?;
    Ok(s)
}

pub fn sweep(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let grid = cfg.grid()?;
    let target = StabilityTarget::for_family(cfg.sweep.family, &cfg.params, &grid, &cfg.minimize)?;
    let verdict = stability_sweep(&target, &cfg.params, &cfg.sweep.run)?;
    out.csv("verdict.csv", |w| verdict.write_csv(w))?;
    out.json("verdict.json", &verdict)?;
    let s = verdict.summary();
    out.text("summary.txt", &format!("{s}\n"))?;
    Ok(s)
}

pub fn blowup(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let grid = cfg.grid()?;
    let b = &cfg.blowup;
    let report = blowup_experiment(b.family, &cfg.params, b.factor, &grid, &b.run, &cfg.minimize)?;
    let v = &report.virial;
    let rows = (0..v.times.len()).map(|i| VirialRow {
        t: v.times[i],
        second_difference: v.second_difference[i],
        eight_r: v.eight_r[i],
    });
    write_rows(out, "virial.csv", rows)?;
    out.json("report.json", &report)?;
    let s = report.summary();
    out.text("summary.txt", &format!("{s}\n"))?;
    Ok(s)
}

pub fn audit(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let grid = cfg.grid()?;
    let report = identity_audit(&cfg.params, &grid, &cfg.minimize)?;
    out.csv("audit.csv", |w| report.write_csv(w))?;
    out.json("audit.json", &report)?;
    let s = report.summary();
    out.text("summary.txt", &format!("{s}\n"))?;
    if !report.passed() {
        return Err(CliError::AuditFailed(report.failures().join("; ")));
    }
    Ok(s)
}

#[derive(Serialize)]
struct ProfileSidecar {
    p: f64,
    dim: usize,
    mass: f64,
    nehari_residual: f64,
    gradient_residual: f64,
    iterations: usize,
}

pub fn profile(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let grid = cfg.grid()?;
    let p = cfg.params.p;
    let b = base_profile_nd(p, &grid)?;
    let dim = grid.dim();
    out.csv("profile.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = ["x", "y", "z"][..dim].to_vec();
        header.push("u");
        wtr.write_record(&header)?;
        for (i, v) in b.values.iter().enumerate() {
            let x = grid.position(i);
            let mut rec: Vec<String> = x[..dim].iter().map(|c| c.to_string()).collect();
            rec.push(v.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    let zeros = vec![0.0; grid.len()];
    out.snapshot("profile.snap", &FieldPair::from_real(&grid, &b.values, &zeros)?, &cfg.params)?;
    out.json(
        "profile.json",
        &ProfileSidecar {
            p,
            dim,
            mass: b.mass,
            nehari_residual: b.nehari_residual,
            gradient_residual: b.gradient_residual,
            iterations: b.iterations,
        },
    )?;
    Ok(format!("base profile p = {p}, n = {dim}: mass {:.10}", b.mass))
}
