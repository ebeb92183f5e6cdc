//! Interchangeable linear-solve strategies for `A x = b`, registered by name.
//!
//! The Maxwell driver only sees [`InverseBackend`]; which one runs is picked
//! at runtime through [`BackendRegistry`].

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matkit::{solve_dense, CVector};
use crate::phasekit::PhaseSchedule;
use crate::qcsim::{run_lcu_qsvt, CircuitLayout};
use crate::qsvt_op::{BlockEncoding, InverseOperator};

pub trait InverseBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Approximate `A^-1 b`. Callers never pass the zero vector.
    fn solve(&self, b: &CVector) -> Result<CVector>;
}

/// What a factory may draw on when constructing a backend.
#[derive(Clone)]
pub struct BackendContext {
    pub encoding: Arc<BlockEncoding>,
    pub schedule: Option<Arc<PhaseSchedule>>,
}

impl BackendContext {
    fn schedule(&self, backend: &str) -> Result<&PhaseSchedule> {
        self.schedule
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("backend `{backend}` needs a phase schedule")))
    }
}

pub type BackendFactory = fn(&BackendContext) -> Result<Box<dyn InverseBackend>>;

/// Polynomial inverse precomputed once as a dense matrix.
pub struct OperatorBackend {
    op: InverseOperator,
}

impl OperatorBackend {
    pub fn new(ctx: &BackendContext) -> Result<Self> {
        Ok(OperatorBackend { op: InverseOperator::from_schedule(&ctx.encoding, ctx.schedule("operator")?)? })
    }

    pub fn operator(&self) -> &InverseOperator {
        &self.op
    }
}

impl InverseBackend for OperatorBackend {
    fn name(&self) -> &'static str {
        "operator"
    }

    fn solve(&self, b: &CVector) -> Result<CVector> {
        Ok(self.op.apply(b)?.x)
    }
}

/// Runs the LCU circuit on a statevector for every solve.
pub struct StatevectorBackend {
    encoding: Arc<BlockEncoding>,
    schedule: Arc<PhaseSchedule>,
    layout: CircuitLayout,
}

impl StatevectorBackend {
    pub fn new(ctx: &BackendContext) -> Result<Self> {
        let schedule = ctx
            .schedule
            .clone()
            .ok_or_else(|| Error::InvalidArgument("backend `statevector` needs a phase schedule".into()))?;
        // same admissibility checks as the operator route
        if !ctx.encoding.is_hermitian_positive_definite() {
            return Err(Error::InvalidArgument(
                "polynomial inversion needs a Hermitian positive definite matrix".into(),
            ));
        }
        if ctx.encoding.condition_number() > schedule.kappa * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "matrix condition number {:.6} exceeds the schedule's kappa {}",
                ctx.encoding.condition_number(),
                schedule.kappa
            )));
        }
        let layout = CircuitLayout::for_len(ctx.encoding.dim())?;
        Ok(StatevectorBackend { encoding: ctx.encoding.clone(), schedule, layout })
    }
}

impl InverseBackend for StatevectorBackend {
    fn name(&self) -> &'static str {
        "statevector"
    }

    fn solve(&self, b: &CVector) -> Result<CVector> {
        let out = run_lcu_qsvt(&self.encoding, &self.schedule, b, &self.layout)?;
        let gamma = b.norm() * self.encoding.scale / self.schedule.s;
        Ok(out.x.scale_real(gamma))
    }
}

/// `s / sigma` on the exact singular values, rescaled like the polynomial route.
pub struct ExactBackend {
    op: InverseOperator,
}

impl ExactBackend {
    pub fn new(ctx: &BackendContext) -> Result<Self> {
        let s = ctx.schedule.as_ref().map_or(crate::phasekit::DEFAULT_S, |sch| sch.s);
        Ok(ExactBackend { op: InverseOperator::exact(&ctx.encoding, s)? })
    }
}

impl InverseBackend for ExactBackend {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn solve(&self, b: &CVector) -> Result<CVector> {
        Ok(self.op.apply(b)?.x)
    }
}

/// Dense LU on the unscaled matrix.
pub struct ClassicalBackend {
    encoding: Arc<BlockEncoding>,
}

impl InverseBackend for ClassicalBackend {
    fn name(&self) -> &'static str {
        "classical"
    }

    fn solve(&self, b: &CVector) -> Result<CVector> {
        solve_dense(&self.encoding.a_orig, b)
    }
}

pub struct BackendRegistry {
    factories: BTreeMap<&'static str, BackendFactory>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry { factories: BTreeMap::new() }
    }

    pub fn with_defaults() -> Self {
        let mut reg = Self::empty();
        reg.register("operator", |ctx| Ok(Box::new(OperatorBackend::new(ctx)?)));
        reg.register("statevector", |ctx| Ok(Box::new(StatevectorBackend::new(ctx)?)));
        reg.register("exact", |ctx| Ok(Box::new(ExactBackend::new(ctx)?)));
        reg.register("classical", |ctx| Ok(Box::new(ClassicalBackend { encoding: ctx.encoding.clone() })));
        reg
    }

    /// Replaces any factory already registered under `name`.
    pub fn register(&mut self, name: &'static str, factory: BackendFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn build(&self, name: &str, ctx: &BackendContext) -> Result<Box<dyn InverseBackend>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownBackend(name.to_string()))?;
        factory(ctx)
    }
}
