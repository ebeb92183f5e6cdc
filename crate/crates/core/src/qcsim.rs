//! Dense statevector simulation of the two-ancilla LCU circuit that sums the
//! even and odd QSVT sequences and extracts the real part.
//!
//! Qubit order, least significant first: `n_sys` system qubits, the encode
//! qubit (|0> marks the block-encoded subspace), the real/imaginary ancilla
//! `a1`, and the parity ancilla `a2`. For fixed ancilla values the encode and
//! system qubits therefore occupy a contiguous run of `2N` amplitudes whose
//! first half is the encoded block.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matkit::{CMatrix, CVector};
use crate::phasekit::PhaseSchedule;
use crate::qsvt_op::{BlockEncoding, Subspace};

/// Product of the two `1/2` factors from the ancilla splits.
pub const LCU_PREFACTOR: f64 = 0.5;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CircuitLayout {
    pub n_sys: usize,
    pub encode_qubit: usize,
    pub a1: usize,
    pub a2: usize,
}

impl CircuitLayout {
    pub fn new(n_sys: usize) -> Self {
        CircuitLayout { n_sys, encode_qubit: n_sys, a1: n_sys + 1, a2: n_sys + 2 }
    }

    /// Layout for a system register holding `len` amplitudes.
    pub fn for_len(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("system size {len} is not a power of two")));
        }
        Ok(Self::new(len.trailing_zeros() as usize))
    }

    pub fn total_qubits(&self) -> usize {
        self.n_sys + 3
    }

    pub fn sys_dim(&self) -> usize {
        1 << self.n_sys
    }

    /// Offset of the `2N` block for the given ancilla values.
    fn branch_offset(&self, a1: usize, a2: usize) -> usize {
        ((a1 << (self.a1 - self.encode_qubit)) | (a2 << (self.a2 - self.encode_qubit))) * self.sys_dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub n_qubits: usize,
    pub amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero_state(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { n_qubits, amps }
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hadamard(&mut self, qubit: usize) {
        let bit = 1 << qubit;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = (a + b) * FRAC_1_SQRT_2;
                self.amps[i | bit] = (a - b) * FRAC_1_SQRT_2;
            }
        }
    }
}

/// Load `b / ||b||` into the system register with every other qubit in |0>.
pub fn state_prep(b: &CVector, layout: &CircuitLayout) -> Result<StateVector> {
    if b.len() != layout.sys_dim() {
        return Err(Error::InvalidArgument(format!(
            "state of length {} does not fit {} system qubits",
            b.len(),
            layout.n_sys
        )));
    }
    let unit = b.normalized().ok_or_else(|| Error::InvalidArgument("cannot prepare the zero vector".into()))?;
    let mut sv = StateVector::zero_state(layout.total_qubits());
    sv.amps[..b.len()].copy_from_slice(unit.as_slice());
    Ok(sv)
}

/// Ancilla condition for a controlled gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Branch {
    pub a1: usize,
    pub a2: usize,
}

/// `e^{+i phi}` on encode = |0>, `e^{-i phi}` on encode = |1>.
pub fn apply_projector_phase(sv: &mut StateVector, phi: f64, layout: &CircuitLayout, side: Subspace) {
    let _ = side;
    let plus = Complex64::from_polar(1.0, phi);
    let enc = 1 << layout.encode_qubit;
    for (i, a) in sv.amps.iter_mut().enumerate() {
        *a *= if i & enc == 0 { plus } else { plus.conj() };
    }
}

fn controlled_projector_phase(sv: &mut StateVector, phi: f64, layout: &CircuitLayout, ctrl: Branch) {
    let n = layout.sys_dim();
    let off = layout.branch_offset(ctrl.a1, ctrl.a2);
    let plus = Complex64::from_polar(1.0, phi);
    for a in &mut sv.amps[off..off + n] {
        *a *= plus;
    }
    for a in &mut sv.amps[off + n..off + 2 * n] {
        *a *= plus.conj();
    }
}

fn controlled_unitary(sv: &mut StateVector, u: &CMatrix, layout: &CircuitLayout, ctrl: Branch) -> Result<()> {
    let off = layout.branch_offset(ctrl.a1, ctrl.a2);
    let dim = 2 * layout.sys_dim();
    let block = CVector::new(sv.amps[off..off + dim].to_vec());
    let out = u.matvec(&block)?;
    sv.amps[off..off + dim].copy_from_slice(out.as_slice());
    Ok(())
}

#[derive(Clone, Debug)]
pub struct LcuOutcome {
    /// Post-selected system vector divided by [`LCU_PREFACTOR`].
    pub x: CVector,
    /// Norm of the post-selected branch before rescaling.
    pub success_amplitude: f64,
    /// Global norm after every gate.
    pub gate_norms: Vec<f64>,
}

impl LcuOutcome {
    pub fn success_probability(&self) -> f64 {
        self.success_amplitude * self.success_amplitude
    }
}

/// The signal operators used by one ancilla branch.
struct BranchOps<'a> {
    u: &'a CMatrix,
    u_adj: &'a CMatrix,
    phis: &'a [f64],
    conjugate: bool,
}

/// Hadamards on both ancillas, the four controlled sequences (even/odd on
/// `a2`, plain/conjugated on `a1`), Hadamards again, then post-selection of
/// `a1 = a2 = encode = 0`.
pub fn run_lcu_qsvt(
    be: &BlockEncoding,
    sched: &PhaseSchedule,
    b: &CVector,
    layout: &CircuitLayout,
) -> Result<LcuOutcome> {
    if be.dim() != layout.sys_dim() {
        return Err(Error::InvalidArgument(format!(
            "encoded matrix has dimension {} but the register holds {}",
            be.dim(),
            layout.sys_dim()
        )));
    }
    sched.validate()?;
    let u_adj = be.u.adjoint();
    let u_bar = be.u.conj();
    let u_bar_adj = be.u.transpose();

    let mut sv = state_prep(b, layout)?;
    let mut norms = vec![sv.norm()];
    sv.hadamard(layout.a1);
    norms.push(sv.norm());
    sv.hadamard(layout.a2);
    norms.push(sv.norm());

    for a2 in 0..2 {
        for a1 in 0..2 {
            let ops = BranchOps {
                u: if a1 == 0 { &be.u } else { &u_bar },
                u_adj: if a1 == 0 { &u_adj } else { &u_bar_adj },
                phis: if a2 == 0 { &sched.phis_even } else { &sched.phis_odd },
                conjugate: a1 == 1,
            };
            apply_branch(&mut sv, &ops, layout, Branch { a1, a2 }, &mut norms)?;
        }
    }

    sv.hadamard(layout.a1);
    norms.push(sv.norm());
    sv.hadamard(layout.a2);
    norms.push(sv.norm());

    let kept = CVector::new(sv.amps[..layout.sys_dim()].to_vec());
    let success_amplitude = kept.norm();
    if success_amplitude < 1e-12 {
        return Err(Error::DegeneratePostSelection(success_amplitude));
    }
    Ok(LcuOutcome { x: kept.scale_real(1.0 / LCU_PREFACTOR), success_amplitude, gate_norms: norms })
}

/// Gates in time order: `Pi(p_d)` first, `Pi(p_0)` last.
fn apply_branch(
    sv: &mut StateVector,
    ops: &BranchOps<'_>,
    layout: &CircuitLayout,
    ctrl: Branch,
    norms: &mut Vec<f64>,
) -> Result<()> {
    let sign = if ops.conjugate { -1.0 } else { 1.0 };
    let d = ops.phis.len() - 1;
    controlled_projector_phase(sv, sign * ops.phis[d], layout, ctrl);
    norms.push(sv.norm());
    for j in (1..=d).rev() {
        let w = if (d - j).is_multiple_of(2) { ops.u } else { ops.u_adj };
        controlled_unitary(sv, w, layout, ctrl)?;
        norms.push(sv.norm());
        controlled_projector_phase(sv, sign * ops.phis[j - 1], layout, ctrl);
        norms.push(sv.norm());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pade::build_pade_system;
    use crate::phasekit::{train_phases, TrainConfig, DEFAULT_S};
    use crate::qsvt_op::{block_encode, p_real_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;
    use std::f64::consts::FRAC_PI_4;

    fn random_b(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
        let q = crate::matkit::svd(&g).unwrap().left_vectors;
        let eig: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(0.3..1.0), 0.0)).collect();
        crate::matkit::outer_sum(&q, &eig, &q)
    }

    #[test]
    fn layout_indices() {
        let l = CircuitLayout::new(7);
        assert_eq!(l.total_qubits(), 10);
        assert_eq!((l.encode_qubit, l.a1, l.a2), (7, 8, 9));
        assert_eq!(l.branch_offset(1, 1), 3 * 256);
        assert!(CircuitLayout::for_len(12).is_err());
    }

    #[test]
    fn prep_basis_and_superposition() {
        let sv = state_prep(&CVector::basis(4, 0), &CircuitLayout::new(2)).unwrap();
        assert_eq!(sv.amps[0], Complex64::new(1.0, 0.0));
        assert_eq!(sv.amps.len(), 32);

        let sv = state_prep(&CVector::from_real(&[1.0, 1.0]), &CircuitLayout::new(1)).unwrap();
        assert!((sv.amps[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((sv.amps[1].re - FRAC_1_SQRT_2).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let sv = state_prep(&random_b(&mut rng, 8), &CircuitLayout::new(3)).unwrap();
        assert!((sv.norm() - 1.0).abs() <= 1e-12);

        assert!(state_prep(&CVector::zeros(4), &CircuitLayout::new(2)).is_err());
        assert!(state_prep(&CVector::zeros(3), &CircuitLayout::new(2)).is_err());
    }

    #[test]
    fn projector_phase_actions() {
        let layout = CircuitLayout::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let orig = state_prep(&random_b(&mut rng, 4), &layout).unwrap();

        let mut sv = orig.clone();
        apply_projector_phase(&mut sv, 0.0, &layout, Subspace::Row);
        assert_eq!(sv, orig);

        let mut sv = StateVector::zero_state(layout.total_qubits());
        apply_projector_phase(&mut sv, FRAC_PI_2, &layout, Subspace::Row);
        assert!((sv.amps[0] - Complex64::new(0.0, 1.0)).norm() < 1e-15);

        let mut sv = orig.clone();
        apply_projector_phase(&mut sv, 0.9, &layout, Subspace::Column);
        apply_projector_phase(&mut sv, -0.9, &layout, Subspace::Column);
        let err = sv.amps.iter().zip(&orig.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-15);
    }

    #[test]
    fn matches_operator_backend() {
        let sched = train_phases(&TrainConfig { iters: 20, seed: 2, ..Default::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n_sys in 2..=4 {
            let layout = CircuitLayout::new(n_sys);
            let be = block_encode(&random_spd(&mut rng, 1 << n_sys), 4.0).unwrap();
            let p = p_real_matrix(&be, &sched).unwrap();
            for _ in 0..3 {
                let b = random_b(&mut rng, 1 << n_sys);
                let out = run_lcu_qsvt(&be, &sched, &b, &layout).unwrap();
                let want = p.matvec(&b.normalized().unwrap()).unwrap();
                assert!(out.x.max_abs_diff(&want) <= 1e-8, "n_sys = {n_sys}");
                let prob = want.norm().powi(2) * LCU_PREFACTOR * LCU_PREFACTOR;
                assert!((out.success_probability() - prob).abs() <= 1e-10);
                assert!(out.gate_norms.iter().all(|g| (g - 1.0).abs() <= 1e-10));
            }
        }
    }

    #[test]
    fn trivial_schedule_returns_input_direction() {
        // even branch 1, odd branch i x with vanishing real part
        let sched = PhaseSchedule::from_phases(vec![0.0; 3], vec![FRAC_PI_4, FRAC_PI_4], 4.0, DEFAULT_S).unwrap();
        let sys = build_pade_system(8).unwrap();
        let be = block_encode(&sys.a, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let b = random_b(&mut rng, 8);
        let out = run_lcu_qsvt(&be, &sched, &b, &CircuitLayout::new(3)).unwrap();
        assert!(out.x.max_abs_diff(&b.normalized().unwrap()) <= 1e-12);
    }

    #[test]
    fn post_selection_is_linear() {
        let sched = train_phases(&TrainConfig { iters: 10, ..Default::default() }).unwrap();
        let sys = build_pade_system(8).unwrap();
        let be = block_encode(&sys.a, 4.0).unwrap();
        let layout = CircuitLayout::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let (b1, b2) = (random_b(&mut rng, 8), random_b(&mut rng, 8));
        // undo the per-call normalization before comparing
        let solve = |b: &CVector| run_lcu_qsvt(&be, &sched, b, &layout).unwrap().x.scale_real(b.norm());
        let sum = solve(&b1.add(&b2));
        assert!(sum.max_abs_diff(&solve(&b1).add(&solve(&b2))) <= 1e-10);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let sched = PhaseSchedule::from_phases(vec![0.0], vec![0.0, 0.0], 4.0, DEFAULT_S).unwrap();
        let be = block_encode(&CMatrix::identity(4), 4.0).unwrap();
        assert!(run_lcu_qsvt(&be, &sched, &CVector::basis(8, 0), &CircuitLayout::new(3)).is_err());
    }
}
