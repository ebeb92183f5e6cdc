//! Scalar quantum signal processing: evaluate the parity-definite
//! polynomials produced by a phase sequence, fit phases to the scaled
//! reciprocal `s / x` on `[1/kappa, 1]` with Adagrad, and persist the result.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::value::RawValue;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::matkit::CMatrix;

pub const DEFAULT_KAPPA: f64 = 4.0;
pub const DEFAULT_S: f64 = 0.10145775;
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_LR: f64 = 0.1;
pub const DEFAULT_ITERS: usize = 100;
pub const ADAGRAD_EPS: f64 = 1e-8;
pub const FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_degree(d: usize) -> Parity {
        if d.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Signal operator `[[x, sqrt(1-x^2)], [sqrt(1-x^2), -x]]`, Hermitian and unitary.
pub fn scalar_u(x: f64) -> Result<CMatrix> {
    check_signal(x)?;
    let r = Complex64::new((1.0 - x * x).max(0.0).sqrt(), 0.0);
    let x = Complex64::new(x, 0.0);
    CMatrix::from_row_major(2, 2, vec![x, r, r, -x])
}

fn check_signal(x: f64) -> Result<()> {
    if !(x.abs() <= 1.0) {
        return Err(Error::InvalidArgument(format!("signal value {x} outside [-1, 1]")));
    }
    Ok(())
}

fn check_parity(len: usize, parity: Parity) -> Result<()> {
    if len == 0 || Parity::of_degree(len - 1) != parity {
        return Err(Error::InvalidArgument(format!(
            "{len} phases give degree {} which is not {parity:?}",
            len.wrapping_sub(1) as isize
        )));
    }
    Ok(())
}

/// Top-left entry of `Pi(p_0) W_1 Pi(p_1) ... W_d Pi(p_d)`, where the
/// signal operators alternate `U`, `U^dagger` ending with `U` on the right.
///
/// Rows of the 2x2 running product are tracked directly: only the first row
/// is needed for the top-left entry.
pub fn eval_qsvt_scalar(phis: &[f64], parity: Parity, x: f64) -> Result<Complex64> {
    check_parity(phis.len(), parity)?;
    check_signal(x)?;
    Ok(qsp_top_left(phis, x))
}

/// Unchecked evaluation. `U(x)` is real symmetric so `U^dagger = U` here.
fn qsp_top_left(phis: &[f64], x: f64) -> Complex64 {
    let r = (1.0 - x * x).max(0.0).sqrt();
    let e0 = Complex64::from_polar(1.0, phis[0]);
    // first row of the running product
    let mut a = e0;
    let mut b = Complex64::new(0.0, 0.0);
    for &phi in &phis[1..] {
        let na = a * x + b * r;
        let nb = a * r - b * x;
        let e = Complex64::from_polar(1.0, phi);
        a = na * e;
        b = nb * e.conj();
    }
    a
}

/// Trained even and odd phase sequences for the target `s / x` on `[1/kappa, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSchedule {
    pub d_even: usize,
    pub d_odd: usize,
    pub kappa: f64,
    pub s: f64,
    pub seed: u64,
    pub phis_even: Vec<f64>,
    pub phis_odd: Vec<f64>,
    pub final_loss: f64,
    /// Loss before each update, one entry per iteration.
    pub loss_trace: Vec<f64>,
}

impl PhaseSchedule {
    /// Schedule from explicit phases, with the loss fields left empty.
    pub fn from_phases(phis_even: Vec<f64>, phis_odd: Vec<f64>, kappa: f64, s: f64) -> Result<Self> {
        let sched = PhaseSchedule {
            d_even: phis_even.len().saturating_sub(1),
            d_odd: phis_odd.len().saturating_sub(1),
            kappa,
            s,
            seed: 0,
            phis_even,
            phis_odd,
            final_loss: f64::NAN,
            loss_trace: Vec::new(),
        };
        sched.validate()?;
        Ok(sched)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |field: &str, msg: String| Error::Schedule { field: field.into(), msg };
        if !self.d_even.is_multiple_of(2) {
            return Err(field("d_even", format!("{} is not even", self.d_even)));
        }
        if self.d_odd % 2 != 1 {
            return Err(field("d_odd", format!("{} is not odd", self.d_odd)));
        }
        if self.phis_even.len() != self.d_even + 1 {
            return Err(field(
                "phis_even",
                format!("expected {} phases, found {}", self.d_even + 1, self.phis_even.len()),
            ));
        }
        if self.phis_odd.len() != self.d_odd + 1 {
            return Err(field(
                "phis_odd",
                format!("expected {} phases, found {}", self.d_odd + 1, self.phis_odd.len()),
            ));
        }
        if let Some(p) = self.phis_even.iter().chain(&self.phis_odd).find(|p| !p.is_finite()) {
            return Err(field("phis", format!("non-finite phase {p}")));
        }
        if !(self.kappa > 1.0) || !self.kappa.is_finite() {
            return Err(field("kappa", format!("{} must exceed 1", self.kappa)));
        }
        if !(self.s > 0.0) || self.s * self.kappa > 1.0 {
            return Err(field("s", format!("{} must satisfy 0 < s <= 1/kappa", self.s)));
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.d_even + self.d_odd
    }

    pub fn eval_even(&self, x: f64) -> Result<Complex64> {
        eval_qsvt_scalar(&self.phis_even, Parity::Even, x)
    }

    pub fn eval_odd(&self, x: f64) -> Result<Complex64> {
        eval_qsvt_scalar(&self.phis_odd, Parity::Odd, x)
    }

    pub fn target(&self, x: f64) -> f64 {
        self.s / x
    }
}

/// `Re(P_even(x) + P_odd(x))`
pub fn eval_p_real(sched: &PhaseSchedule, x: f64) -> Result<f64> {
    Ok((sched.eval_even(x)? + sched.eval_odd(x)?).re)
}

/// `M` uniformly spaced points on `[1/kappa, 1]`, endpoints included.
pub fn sample_points(kappa: f64, m: usize) -> Vec<f64> {
    let lo = 1.0 / kappa;
    match m {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..m).map(|i| lo + (1.0 - lo) * i as f64 / (m - 1) as f64).collect(),
    }
}

/// Mean squared deviation of `Re P_tot` from `s / x` over the samples.
pub fn loss(sched: &PhaseSchedule, samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("loss needs at least one sample".into()));
    }
    let lo = 1.0 / sched.kappa;
    if let Some(x) = samples.iter().find(|&&x| !(x >= lo - 1e-12 && x <= 1.0)) {
        return Err(Error::InvalidArgument(format!("sample {x} outside [{lo}, 1]")));
    }
    let mut acc = 0.0;
    for &x in samples {
        let e = eval_p_real(sched, x)? - sched.target(x);
        acc += e * e;
    }
    Ok(acc / samples.len() as f64)
}

fn split_loss(theta: &[f64], n_even: usize, samples: &[f64], s: f64) -> f64 {
    let (even, odd) = theta.split_at(n_even);
    samples
        .iter()
        .map(|&x| {
            let e = (qsp_top_left(even, x) + qsp_top_left(odd, x)).re - s / x;
            e * e
        })
        .sum::<f64>()
        / samples.len() as f64
}

/// Relative L2 error `||p - t|| / ||t||` between sampled curves.
pub fn relative_l2(approx: &[f64], target: &[f64]) -> f64 {
    let num: f64 = approx.iter().zip(target).map(|(a, t)| (a - t) * (a - t)).sum();
    let den: f64 = target.iter().map(|t| t * t).sum();
    (num / den).sqrt()
}

/// Relative L2 error of `Re P_tot` against `s / x` on `m` uniform points.
pub fn poly_l2_error(sched: &PhaseSchedule, m: usize) -> Result<f64> {
    let xs = sample_points(sched.kappa, m);
    let approx = xs.iter().map(|&x| eval_p_real(sched, x)).collect::<Result<Vec<_>>>()?;
    let target: Vec<f64> = xs.iter().map(|&x| sched.target(x)).collect();
    Ok(relative_l2(&approx, &target))
}

/// Split an odd total degree into `(d_even, d_odd)` consecutive degrees.
pub fn split_degree(total: usize) -> Result<(usize, usize)> {
    if total < 3 || total.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("total degree must be odd and at least 3, got {total}")));
    }
    let lo = total / 2;
    Ok(if lo.is_multiple_of(2) { (lo, lo + 1) } else { (lo + 1, lo) })
}

/// Distribution of the initial phases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhaseInit {
    /// Uniform on `(-pi, pi]`.
    FullCircle,
    /// Uniform on `[0, 1)`.
    UnitInterval,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub d_even: usize,
    pub d_odd: usize,
    pub kappa: f64,
    pub s: f64,
    pub iters: usize,
    pub lr: f64,
    pub seed: u64,
    pub samples: usize,
    pub init: PhaseInit,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d_even: 10,
            d_odd: 11,
            kappa: DEFAULT_KAPPA,
            s: DEFAULT_S,
            iters: DEFAULT_ITERS,
            lr: DEFAULT_LR,
            seed: 0,
            samples: DEFAULT_SAMPLES,
            init: PhaseInit::UnitInterval,
        }
    }
}

impl TrainConfig {
    pub fn with_degree(total: usize) -> Result<Self> {
        let (d_even, d_odd) = split_degree(total)?;
        Ok(TrainConfig { d_even, d_odd, ..Default::default() })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.d_even.is_multiple_of(2) || self.d_odd % 2 != 1 {
            return Err(Error::InvalidArgument(format!(
                "degrees ({}, {}) must be (even, odd)",
                self.d_even, self.d_odd
            )));
        }
        if self.iters == 0 {
            return Err(Error::InvalidArgument("iters must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidArgument("need at least one sample point".into()));
        }
        if !(self.kappa > 1.0) || !(self.s > 0.0) || self.s * self.kappa > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "need kappa > 1 and 0 < s <= 1/kappa, got kappa = {}, s = {}",
                self.kappa, self.s
            )));
        }
        Ok(())
    }

    /// Initial phases, even branch first.
    pub fn initial_phases(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.d_even + self.d_odd + 2;
        (0..n)
            .map(|_| match self.init {
                PhaseInit::FullCircle => PI - rng.gen_range(0.0..2.0 * PI),
                PhaseInit::UnitInterval => rng.gen_range(0.0..1.0),
            })
            .collect()
    }
}

/// Progress record handed to a training observer.
#[derive(Clone, Debug)]
pub struct LossReport<'a> {
    pub iteration: usize,
    pub loss: f64,
    pub samples: &'a [f64],
}

pub fn train_phases(cfg: &TrainConfig) -> Result<PhaseSchedule> {
    train_phases_observed(cfg, |_| {})
}

/// Adagrad on central finite-difference gradients. The observer sees the
/// loss before every update.
pub fn train_phases_observed(cfg: &TrainConfig, mut observe: impl FnMut(&LossReport<'_>)) -> Result<PhaseSchedule> {
    cfg.validate()?;
    let samples = sample_points(cfg.kappa, cfg.samples);
    let n_even = cfg.d_even + 1;
    let mut theta = cfg.initial_phases();
    let mut accum = vec![0.0; theta.len()];
    let mut trace = Vec::with_capacity(cfg.iters);
    let objective = |t: &[f64]| split_loss(t, n_even, &samples, cfg.s);

    for iteration in 0..cfg.iters {
        let current = objective(&theta);
        if !current.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        trace.push(current);
        observe(&LossReport { iteration, loss: current, samples: &samples });

        let grad = fd_gradient(&objective, &theta, FD_STEP);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { iteration });
        }
        for ((t, g2), g) in theta.iter_mut().zip(accum.iter_mut()).zip(&grad) {
            *g2 += g * g;
            *t -= cfg.lr * g / (g2.sqrt() + ADAGRAD_EPS);
        }
    }
    let final_loss = objective(&theta);
    if !final_loss.is_finite() {
        return Err(Error::Diverged { iteration: cfg.iters });
    }
    let phis_odd = theta.split_off(n_even);
    Ok(PhaseSchedule {
        d_even: cfg.d_even,
        d_odd: cfg.d_odd,
        kappa: cfg.kappa,
        s: cfg.s,
        seed: cfg.seed,
        phis_even: theta,
        phis_odd,
        final_loss,
        loss_trace: trace,
    })
}

/// Central differences, one parameter per task.
pub fn fd_gradient(f: &(impl Fn(&[f64]) -> f64 + Sync), theta: &[f64], step: f64) -> Vec<f64> {
    (0..theta.len())
        .into_par_iter()
        .map(|j| {
            let mut probe = theta.to_vec();
            probe[j] = theta[j] + step;
            let up = f(&probe);
            probe[j] = theta[j] - step;
            let down = f(&probe);
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Gradient of [`loss`] with respect to the concatenated phases.
pub fn loss_gradient(sched: &PhaseSchedule, samples: &[f64], step: f64) -> Vec<f64> {
    let theta: Vec<f64> = sched.phis_even.iter().chain(&sched.phis_odd).copied().collect();
    let n_even = sched.phis_even.len();
    fd_gradient(&|t: &[f64]| split_loss(t, n_even, samples, sched.s), &theta, step)
}

fn raw_number(x: f64) -> Box<RawValue> {
    // 17 significant digits
    RawValue::from_string(format!("{x:.16e}")).expect("formatted float is valid JSON")
}

#[derive(Serialize)]
struct ScheduleFile {
    d_even: usize,
    d_odd: usize,
    kappa: Box<RawValue>,
    s: Box<RawValue>,
    seed: u64,
    phis_even: Vec<Box<RawValue>>,
    phis_odd: Vec<Box<RawValue>>,
    final_loss: Option<Box<RawValue>>,
    loss_trace: Vec<Box<RawValue>>,
}

pub fn schedule_to_json(sched: &PhaseSchedule) -> String {
    let num = |x: f64| x.is_finite().then(|| raw_number(x));
    let file = ScheduleFile {
        d_even: sched.d_even,
        d_odd: sched.d_odd,
        kappa: raw_number(sched.kappa),
        s: raw_number(sched.s),
        seed: sched.seed,
        phis_even: sched.phis_even.iter().map(|&p| raw_number(p)).collect(),
        phis_odd: sched.phis_odd.iter().map(|&p| raw_number(p)).collect(),
        final_loss: num(sched.final_loss),
        loss_trace: sched.loss_trace.iter().filter_map(|&l| num(l)).collect(),
    };
    serde_json::to_string_pretty(&file).expect("schedule serializes")
}

pub fn schedule_from_json(text: &str) -> Result<PhaseSchedule> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::Schedule { field: "<document>".into(), msg: e.to_string() })?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Schedule { field: "<document>".into(), msg: "expected a JSON object".into() })?;

    let sched = PhaseSchedule {
        d_even: get_uint(obj, "d_even")? as usize,
        d_odd: get_uint(obj, "d_odd")? as usize,
        kappa: get_f64(obj, "kappa")?,
        s: get_f64(obj, "s")?,
        seed: get_uint(obj, "seed")?,
        phis_even: get_f64_list(obj, "phis_even")?,
        phis_odd: get_f64_list(obj, "phis_odd")?,
        final_loss: match obj.get("final_loss") {
            None | Some(Value::Null) => f64::NAN,
            Some(_) => get_f64(obj, "final_loss")?,
        },
        loss_trace: match obj.get("loss_trace") {
            None => Vec::new(),
            Some(_) => get_f64_list(obj, "loss_trace")?,
        },
    };
    sched.validate()?;
    Ok(sched)
}

fn field_err(field: &str, msg: &str) -> Error {
    Error::Schedule { field: field.into(), msg: msg.into() }
}

fn get_field<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a Value> {
    obj.get(field).ok_or_else(|| field_err(field, "missing"))
}

fn get_f64(obj: &Map<String, Value>, field: &str) -> Result<f64> {
    get_field(obj, field)?.as_f64().ok_or_else(|| field_err(field, "expected a number"))
}

fn get_uint(obj: &Map<String, Value>, field: &str) -> Result<u64> {
    get_field(obj, field)?.as_u64().ok_or_else(|| field_err(field, "expected a nonnegative integer"))
}

fn get_f64_list(obj: &Map<String, Value>, field: &str) -> Result<Vec<f64>> {
    get_field(obj, field)?
        .as_array()
        .ok_or_else(|| field_err(field, "expected an array"))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| field_err(field, "expected numbers")))
        .collect()
}

pub fn save_schedule(sched: &PhaseSchedule, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, schedule_to_json(sched) + "\n")?;
    Ok(())
}

pub fn load_schedule(path: impl AsRef<Path>) -> Result<PhaseSchedule> {
    schedule_from_json(&fs::read_to_string(path)?)
}
