//! 1D source-free Maxwell evolution of `(Ex, Hy)` with explicit Euler in time
//! and compact-scheme spatial derivatives supplied by an [`InverseBackend`].
//!
//! Every run carries a classical trajectory advanced with the same scheme and
//! step, so the recorded error isolates the linear-solve approximation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendContext, BackendRegistry, InverseBackend};
use crate::error::{Error, Result};
use crate::matkit::CVector;
use crate::pade::{build_pade_system, classical_maxwell_step, Grid, PadeSystem};
use crate::phasekit::{load_schedule, PhaseSchedule};
use crate::qsvt_op::block_encode;

pub const PULSE_CENTER: f64 = 0.5;
pub const PULSE_WIDTH: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub ex: CVector,
    pub hy: CVector,
    pub t: f64,
}

impl FieldState {
    pub fn max_imag(&self) -> f64 {
        self.ex.max_imag().max(self.hy.max_imag())
    }
}

/// Permittivity and permeability of a homogeneous medium.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub eps: f64,
    pub mu: f64,
}

impl Default for Medium {
    fn default() -> Self {
        Medium { eps: 1.0, mu: 1.0 }
    }
}

/// How the per-step error is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Compare unit-normalized fields.
    #[default]
    Normalized,
    /// Compare the fields as they are.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxwellConfig {
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub eps: f64,
    pub mu: f64,
    pub backend: String,
    pub schedule_path: Option<PathBuf>,
    pub metric: Metric,
    /// Record a field snapshot every this many steps; the last step is always kept.
    pub snapshot_every: Option<usize>,
}

impl Default for MaxwellConfig {
    fn default() -> Self {
        MaxwellConfig {
            n: 128,
            dt: 0.01,
            t_final: 0.5,
            eps: 1.0,
            mu: 1.0,
            backend: "operator".into(),
            schedule_path: None,
            metric: Metric::Normalized,
            snapshot_every: None,
        }
    }
}

impl MaxwellConfig {
    pub fn medium(&self) -> Medium {
        Medium { eps: self.eps, mu: self.mu }
    }

    pub fn validate(&self) -> Result<()> {
        Grid::new(self.n)?;
        let bad = |what: &str, v: f64| Error::InvalidArgument(format!("{what} must be positive and finite, got {v}"));
        for (what, v) in [("dt", self.dt), ("eps", self.eps), ("mu", self.mu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(what, v));
            }
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return Err(Error::InvalidArgument(format!(
                "t_final ({}) must be at least dt ({})",
                self.t_final, self.dt
            )));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidArgument("snapshot_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Steps taken before `t` exceeds `t_final`, counting `k * dt` that lands
    /// on `t_final` up to rounding as inside.
    pub fn steps(&self) -> usize {
        let ratio = self.t_final / self.dt;
        (ratio + 1e-9 * ratio.max(1.0)).floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub z: Vec<f64>,
    pub ex_quantum: CVector,
    pub ex_classical: CVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub n: usize,
    pub backend: String,
    pub times: Vec<f64>,
    pub l2_rel_err: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// Largest imaginary component over both fields at each step.
    pub max_imag: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// See [`courant_number`].
    pub courant: f64,
    pub final_quantum: FieldState,
    pub final_classical: FieldState,
}

impl RunRecord {
    pub fn steps(&self) -> usize {
        self.times.len()
    }

    pub fn final_error(&self) -> f64 {
        self.l2_rel_err.last().copied().unwrap_or(0.0)
    }

    pub fn final_fidelity(&self) -> f64 {
        self.fidelity.last().copied().unwrap_or(1.0)
    }

    /// Least-squares slope of the error against time.
    pub fn error_slope(&self) -> f64 {
        least_squares_slope(&self.times, &self.l2_rel_err)
    }
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
    }
    sxy / sxx
}

/// Gaussian `Ex` pulse centred on the domain, zero `Hy`.
pub fn initial_condition(n: usize) -> Result<FieldState> {
    let grid = Grid::new(n)?;
    let ex: Vec<f64> =
        grid.z.iter().map(|z| (-(z - PULSE_CENTER).powi(2) / (2.0 * PULSE_WIDTH * PULSE_WIDTH)).exp()).collect();
    Ok(FieldState { ex: CVector::from_real(&ex), hy: CVector::zeros(n), t: 0.0 })
}

/// `dt * max|k'| / sqrt(eps * mu)`. The Ex-then-Hy Euler update keeps every
/// mode bounded only while this is at most 2.
pub fn courant_number(sys: &PadeSystem, dt: f64, medium: Medium) -> f64 {
    dt * sys.max_modified_wavenumber() / (medium.eps * medium.mu).sqrt()
}

fn derivative(sys: &PadeSystem, inv: &dyn InverseBackend, f: &CVector) -> Result<CVector> {
    let b = sys.apply_rhs(f)?;
    if b.norm() == 0.0 {
        return Ok(CVector::zeros(f.len()));
    }
    inv.solve(&b)
}

/// One Euler step with derivatives from `inv`: `Ex` first, then `Hy` from the new `Ex`.
pub fn quantum_step(
    state: &FieldState,
    sys: &PadeSystem,
    inv: &dyn InverseBackend,
    dt: f64,
    medium: Medium,
) -> Result<FieldState> {
    if state.ex.len() != sys.n() || state.hy.len() != sys.n() {
        return Err(Error::DimensionMismatch {
            op: "quantum_step",
            left: (sys.n(), 1),
            right: (state.ex.len(), state.hy.len()),
        });
    }
    let dhy = derivative(sys, inv, &state.hy)?;
    let ex = state.ex.axpy(-dt / medium.eps, &dhy);
    let dex = derivative(sys, inv, &ex)?;
    let hy = state.hy.axpy(-dt / medium.mu, &dex);
    Ok(FieldState { ex, hy, t: state.t + dt })
}

fn nonzero_unit(v: &CVector, what: &str) -> Result<CVector> {
    v.normalized().ok_or_else(|| Error::InvalidArgument(format!("{what} field has zero norm")))
}

/// `||q^ - c^|| / ||c^||` with both sides scaled to unit norm.
pub fn l2_relative_error(q: &CVector, c: &CVector) -> Result<f64> {
    let c_hat = nonzero_unit(c, "classical")?;
    let q_hat = nonzero_unit(q, "quantum")?;
    Ok(q_hat.sub(&c_hat).norm())
}

/// `||q - c|| / ||c||` without normalization.
pub fn l2_relative_error_raw(q: &CVector, c: &CVector) -> Result<f64> {
    let cn = c.norm();
    if cn == 0.0 {
        return Err(Error::InvalidArgument("classical field has zero norm".into()));
    }
    Ok(q.sub(c).norm() / cn)
}

/// `|<q^, c^>|`.
pub fn fidelity(q: &CVector, c: &CVector) -> Result<f64> {
    let q_hat = nonzero_unit(q, "quantum")?;
    let c_hat = nonzero_unit(c, "classical")?;
    Ok(q_hat.dot(&c_hat).norm().min(1.0))
}

/// Load the schedule and grid named in `config`, then evolve.
pub fn run(config: &MaxwellConfig) -> Result<RunRecord> {
    config.validate()?;
    let schedule = match &config.schedule_path {
        Some(p) => Some(Arc::new(load_schedule(p)?)),
        None => None,
    };
    run_with(config, schedule, &BackendRegistry::with_defaults())
}

/// [`run`] with the schedule and registry supplied by the caller.
pub fn run_with(
    config: &MaxwellConfig,
    schedule: Option<Arc<PhaseSchedule>>,
    registry: &BackendRegistry,
) -> Result<RunRecord> {
    config.validate()?;
    let sys = build_pade_system(config.n)?;
    let encoding = Arc::new(block_encode(&sys.a, schedule.as_ref().map_or(f64::INFINITY, |s| s.kappa))?);
    if let Some(s) = &schedule {
        if encoding.condition_number() > s.kappa * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "grid matrix has condition number {:.6}, outside the schedule's kappa = {}",
                encoding.condition_number(),
                s.kappa
            )));
        }
    }
    let backend = registry.build(&config.backend, &BackendContext { encoding, schedule })?;
    evolve(config, &sys, backend.as_ref())
}

/// Time loop against a classical trajectory on the same grid.
pub fn evolve(config: &MaxwellConfig, sys: &PadeSystem, inv: &dyn InverseBackend) -> Result<RunRecord> {
    config.validate()?;
    if sys.n() != config.n {
        return Err(Error::InvalidArgument(format!("system has {} cells, config asks for {}", sys.n(), config.n)));
    }
    let medium = config.medium();
    let steps = config.steps();
    let mut quantum = initial_condition(config.n)?;
    let mut classical = quantum.clone();

    let cap = steps;
    let mut rec = RunRecord {
        n: config.n,
        backend: inv.name().to_string(),
        times: Vec::with_capacity(cap),
        l2_rel_err: Vec::with_capacity(cap),
        fidelity: Vec::with_capacity(cap),
        max_imag: Vec::with_capacity(cap),
        snapshots: Vec::new(),
        courant: courant_number(sys, config.dt, medium),
        final_quantum: quantum.clone(),
        final_classical: classical.clone(),
    };

    for step in 1..=steps {
        let (q, c) = rayon::join(
            || quantum_step(&quantum, sys, inv, config.dt, medium),
            || classical_maxwell_step(sys, &classical, config.dt, medium),
        );
        quantum = q?;
        classical = c?;
        // times from the step count, not accumulated sums
        let t = step as f64 * config.dt;
        quantum.t = t;
        classical.t = t;

        let err = match config.metric {
            Metric::Normalized => l2_relative_error(&quantum.ex, &classical.ex)?,
            Metric::Raw => l2_relative_error_raw(&quantum.ex, &classical.ex)?,
        };
        if !err.is_finite() {
            return Err(Error::Diverged { iteration: step });
        }
        rec.times.push(t);
        rec.l2_rel_err.push(err);
        rec.fidelity.push(fidelity(&quantum.ex, &classical.ex)?);
        rec.max_imag.push(quantum.max_imag().max(classical.max_imag()));

        let wanted = config.snapshot_every.is_some_and(|k| step % k == 0);
        if wanted || step == steps {
            rec.snapshots.push(Snapshot {
                step,
                t,
                z: sys.grid.z.clone(),
                ex_quantum: quantum.ex.clone(),
                ex_classical: classical.ex.clone(),
            });
        }
    }
    rec.final_quantum = quantum;
    rec.final_classical = classical;
    Ok(rec)
}

pub fn run_csv(rec: &RunRecord) -> String {
    let mut out = String::from("step,t,l2_rel_err,fidelity\n");
    for (i, ((t, e), f)) in rec.times.iter().zip(&rec.l2_rel_err).zip(&rec.fidelity).enumerate() {
        let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e}", i + 1, t, e, f);
    }
    out
}

pub fn snapshot_csv(snap: &Snapshot) -> String {
    let mut out = String::from("z,ex_quantum,ex_classical,abs_error\n");
    for ((z, q), c) in snap.z.iter().zip(snap.ex_quantum.iter()).zip(snap.ex_classical.iter()) {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", z, q.re, c.re, (q - c).norm());
    }
    out
}

pub fn write_run_csv(rec: &RunRecord, path: &Path) -> Result<()> {
    std::fs::write(path, run_csv(rec))?;
    Ok(())
}

pub fn write_snapshot_csv(snap: &Snapshot, path: &Path) -> Result<()> {
    std::fs::write(path, snapshot_csv(snap))?;
    Ok(())
}
