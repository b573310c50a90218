//! Exact truncated Fock-space reference.
//!
//! State vectors on |0..n_cut-1| (or a two-mode product basis), Schroedinger
//! propagation, exact operator moments, and two pure-state QFI routes: the
//! generator variance 4 Var(G) and the overlap form
//! 8 (1 - |<psi(w - d/2)|psi(w + d/2)>|) / d^2. This module never touches the
//! trajectory machinery, so it can validate it independently.
//!
//! Propagation uses the exact phase map for diagonal Hamiltonians and RK4
//! with a conservatively small substep otherwise; either way the norm must
//! stay within 1e-9 and the top three levels of every mode must stay below
//! 1e-8 population, or the run is rejected.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::EncodingKind;

/// Allowed norm drift per run.
pub const NORM_TOL: f64 = 1e-9;
/// Allowed population in the top three levels of any mode.
pub const TAIL_TOL: f64 = 1e-8;
/// Tail mass allowed when constructing a coherent state.
pub const COHERENT_TAIL_TOL: f64 = 1e-10;
/// Largest single-mode truncation.
pub const MAX_SINGLE_MODE_DIM: usize = 200;
/// Largest two-mode product dimension.
pub const MAX_PRODUCT_DIM: usize = 1024;

type C64 = Complex64;

/// Poisson tail mass sum_{n >= n_cut} e^{-lam} lam^n / n! for lam = |alpha0|^2,
/// i.e. the coherent-state population beyond the truncation.
pub fn coherent_tail(alpha0_sq: f64, n_cut: usize) -> f64 {
    let lam = alpha0_sq;
    let mut term = (-lam).exp();
    let mut head = 0.0;
    for n in 0..n_cut {
        head += term;
        term *= lam / (n + 1) as f64;
    }
    (1.0 - head).max(0.0)
}

/// Pure state on a truncated Fock basis; one or two modes.
#[derive(Debug, Clone)]
pub struct FockState {
    amps: DVector<C64>,
    dims: Vec<usize>,
}

impl FockState {
    pub fn new(amps: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.is_empty() || dims.len() > 2 || total != amps.len() {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: amps.len(),
            });
        }
        let state = Self {
            amps: DVector::from_vec(amps),
            dims,
        };
        state.check_valid()?;
        Ok(state)
    }

    /// Coherent state |alpha0> truncated at `n_cut`, renormalised after the
    /// tail check.
    pub fn coherent(alpha0: C64, n_cut: usize) -> Result<Self> {
        if n_cut == 0 || n_cut > MAX_SINGLE_MODE_DIM {
            return Err(Error::Config(format!(
                "n_cut must be in 1..={MAX_SINGLE_MODE_DIM}, got {n_cut}"
            )));
        }
        let tail = coherent_tail(alpha0.norm_sqr(), n_cut);
        if tail > COHERENT_TAIL_TOL {
            return Err(Error::TruncationTail {
                mode: 0,
                found: tail,
                limit: COHERENT_TAIL_TOL,
            });
        }
        let mut amps = DVector::zeros(n_cut);
        let mut c = C64::new((-alpha0.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..n_cut {
            amps[n] = c;
            c *= alpha0 / ((n + 1) as f64).sqrt();
        }
        let norm = amps.norm();
        amps /= C64::new(norm, 0.0);
        let state = Self {
            amps,
            dims: vec![n_cut],
        };
        state.check_valid()?;
        Ok(state)
    }

    /// Two-mode product of single-mode states.
    pub fn product(a: &FockState, b: &FockState) -> Result<Self> {
        if a.dims.len() != 1 || b.dims.len() != 1 {
            return Err(Error::Config("product needs two single-mode states".into()));
        }
        let (na, nb) = (a.dims[0], b.dims[0]);
        if na * nb > MAX_PRODUCT_DIM {
            return Err(Error::Config(format!(
                "product dimension {} exceeds {MAX_PRODUCT_DIM}",
                na * nb
            )));
        }
        let mut amps = DVector::zeros(na * nb);
        for ia in 0..na {
            for ib in 0..nb {
                amps[ia * nb + ib] = a.amps[ia] * b.amps[ib];
            }
        }
        Ok(Self {
            amps,
            dims: vec![na, nb],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn modes(&self) -> usize {
        self.dims.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn overlap(&self, other: &FockState) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.amps.len(),
                found: other.amps.len(),
            });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    /// Population of the top three levels of one mode (marginal).
    pub fn tail_population(&self, mode: usize) -> f64 {
        let n_mode = self.dims[mode];
        let floor = n_mode.saturating_sub(3);
        let mut tail = 0.0;
        for (index, amp) in self.amps.iter().enumerate() {
            let level = self.level_of(index, mode);
            if level >= floor {
                tail += amp.norm_sqr();
            }
        }
        tail
    }

    fn level_of(&self, index: usize, mode: usize) -> usize {
        match (self.dims.len(), mode) {
            (1, 0) => index,
            (2, 0) => index / self.dims[1],
            (2, 1) => index % self.dims[1],
            _ => unreachable!("modes() <= 2"),
        }
    }

    fn check_valid(&self) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NormDrift((norm - 1.0).abs(), NORM_TOL));
        }
        for mode in 0..self.modes() {
            let tail = self.tail_population(mode);
            if tail > TAIL_TOL {
                return Err(Error::TruncationTail {
                    mode,
                    found: tail,
                    limit: TAIL_TOL,
                });
            }
        }
        Ok(())
    }

    fn renormalized(mut self) -> Self {
        let norm = self.amps.norm();
        if norm > 0.0 {
            self.amps /= C64::new(norm, 0.0);
        }
        self
    }

    /// Apply the annihilation operator of one mode (truncated).
    fn annihilate(&self, mode: usize) -> DVector<C64> {
        let mut out = DVector::zeros(self.amps.len());
        match (self.dims.len(), mode) {
            (1, 0) => {
                let n_cut = self.dims[0];
                for n in 0..n_cut - 1 {
                    out[n] = ((n + 1) as f64).sqrt() * self.amps[n + 1];
                }
            }
            (2, m) => {
                let (na, nb) = (self.dims[0], self.dims[1]);
                for ia in 0..na {
                    for ib in 0..nb {
                        let idx = ia * nb + ib;
                        let (level, stride, max) = if m == 0 { (ia, nb, na) } else { (ib, 1, nb) };
                        if level + 1 < max {
                            out[idx] = ((level + 1) as f64).sqrt() * self.amps[idx + stride];
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        out
    }

    /// Apply the creation operator of one mode (truncated: the top level
    /// overflows into nothing, matching the truncated matrix adjoint).
    fn create(&self, mode: usize) -> DVector<C64> {
        let mut out = DVector::zeros(self.amps.len());
        match (self.dims.len(), mode) {
            (1, 0) => {
                let n_cut = self.dims[0];
                for n in 1..n_cut {
                    out[n] = (n as f64).sqrt() * self.amps[n - 1];
                }
            }
            (2, m) => {
                let (na, nb) = (self.dims[0], self.dims[1]);
                for ia in 0..na {
                    for ib in 0..nb {
                        let idx = ia * nb + ib;
                        let (level, stride) = if m == 0 { (ia, nb) } else { (ib, 1) };
                        if level >= 1 {
                            out[idx] = (level as f64).sqrt() * self.amps[idx - stride];
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        out
    }
}

/// Operators whose exact moments the oracle reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeOperator {
    Number,
    NumberSquared,
    QuadratureX,
    /// Y = i (a - a^dag) / sqrt(2); its sign convention does not affect
    /// variances.
    QuadratureY,
}

/// <psi| O |psi> for one mode of a valid state.
pub fn exact_moment(state: &FockState, operator: ModeOperator, mode: usize) -> Result<f64> {
    if mode >= state.modes() {
        return Err(Error::DimensionMismatch {
            expected: state.modes(),
            found: mode,
        });
    }
    let value = match operator {
        ModeOperator::Number | ModeOperator::NumberSquared => {
            let mut total = 0.0;
            for (index, amp) in state.amps.iter().enumerate() {
                let n = state.level_of(index, mode) as f64;
                let weight = if operator == ModeOperator::Number {
                    n
                } else {
                    n * n
                };
                total += weight * amp.norm_sqr();
            }
            total
        }
        ModeOperator::QuadratureX | ModeOperator::QuadratureY => {
            let w = apply_quadrature(state, operator, mode);
            state.amps.dotc(&w).re
        }
    };
    Ok(value)
}

fn apply_quadrature(state: &FockState, operator: ModeOperator, mode: usize) -> DVector<C64> {
    let lower = state.annihilate(mode);
    let raise = state.create(mode);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    match operator {
        ModeOperator::QuadratureX => (lower + raise) * C64::new(inv_sqrt2, 0.0),
        ModeOperator::QuadratureY => (lower - raise) * C64::new(0.0, inv_sqrt2),
        _ => unreachable!(),
    }
}

/// Exact variance of an operator on one mode.
pub fn exact_variance(state: &FockState, operator: ModeOperator, mode: usize) -> Result<f64> {
    match operator {
        ModeOperator::Number => {
            let mean = exact_moment(state, ModeOperator::Number, mode)?;
            let second = exact_moment(state, ModeOperator::NumberSquared, mode)?;
            Ok(second - mean * mean)
        }
        ModeOperator::QuadratureX | ModeOperator::QuadratureY => {
            let w = apply_quadrature(state, operator, mode);
            let mean = state.amps.dotc(&w).re;
            Ok(w.norm_squared() - mean * mean)
        }
        ModeOperator::NumberSquared => {
            let mut second = 0.0;
            let mut fourth = 0.0;
            for (index, amp) in state.amps.iter().enumerate() {
                let n = state.level_of(index, mode) as f64;
                let p = amp.norm_sqr();
                second += n * n * p;
                fourth += n * n * n * n * p;
            }
            Ok(fourth - second * second)
        }
    }
}

/// Pure-state QFI of a unitary encoding generated by `G`: 4 (<G^2> - <G>^2).
pub fn qfi_unitary_generator(
    state: &FockState,
    generator: ModeOperator,
    mode: usize,
) -> Result<f64> {
    Ok(4.0 * exact_variance(state, generator, mode)?)
}

/// Dense Hermitian Hamiltonian on a truncated basis.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    matrix: DMatrix<C64>,
    dims: Vec<usize>,
}

fn ladder_matrix(n_cut: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n_cut, n_cut, |row, col| {
        if col == row + 1 {
            C64::new((col as f64).sqrt(), 0.0)
        } else {
            C64::ZERO
        }
    })
}

impl Hamiltonian {
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn single(matrix: DMatrix<C64>, n_cut: usize) -> Result<Self> {
        if n_cut == 0 || n_cut > MAX_SINGLE_MODE_DIM {
            return Err(Error::Config(format!(
                "n_cut must be in 1..={MAX_SINGLE_MODE_DIM}, got {n_cut}"
            )));
        }
        Ok(Self {
            matrix,
            dims: vec![n_cut],
        })
    }

    /// omega * n on a single mode.
    pub fn phase(omega: f64, n_cut: usize) -> Result<Self> {
        let m = DMatrix::from_fn(n_cut, n_cut, |r, c| {
            if r == c {
                C64::new(omega * r as f64, 0.0)
            } else {
                C64::ZERO
            }
        });
        Self::single(m, n_cut)
    }

    /// v0 * Y with Y = i (a - a^dag) / sqrt(2).
    pub fn displacement(v0: f64, n_cut: usize) -> Result<Self> {
        let a = ladder_matrix(n_cut);
        let m = (&a - a.adjoint()) * C64::new(0.0, v0 * std::f64::consts::FRAC_1_SQRT_2);
        Self::single(m, n_cut)
    }

    /// (g/2) (a^dag a^dag e^{i theta} + a a e^{-i theta}).
    pub fn opo(g: f64, theta: f64, n_cut: usize) -> Result<Self> {
        let a = ladder_matrix(n_cut);
        let aa = &a * &a;
        let phase = C64::from_polar(1.0, theta);
        let m = (aa.adjoint() * phase + &aa * phase.conj()) * C64::new(0.5 * g, 0.0);
        Self::single(m, n_cut)
    }

    /// (chi/2) n (n - 1) - omega0 n; diagonal in the Fock basis.
    pub fn kerr(chi: f64, omega0: f64, n_cut: usize) -> Result<Self> {
        let m = DMatrix::from_fn(n_cut, n_cut, |r, c| {
            if r == c {
                let n = r as f64;
                C64::new(0.5 * chi * n * (n - 1.0) - omega0 * n, 0.0)
            } else {
                C64::ZERO
            }
        });
        Self::single(m, n_cut)
    }

    /// Two-mode cavity/pump coupling
    /// (chi/2) (a^dag a^dag b e^{i theta} + b^dag a a e^{-i theta}).
    pub fn depletion(chi: f64, theta: f64, n_cut_a: usize, n_cut_b: usize) -> Result<Self> {
        let total = n_cut_a * n_cut_b;
        if total > MAX_PRODUCT_DIM {
            return Err(Error::Config(format!(
                "product dimension {total} exceeds {MAX_PRODUCT_DIM}"
            )));
        }
        let a = ladder_matrix(n_cut_a).kronecker(&DMatrix::<C64>::identity(n_cut_b, n_cut_b));
        let b = DMatrix::<C64>::identity(n_cut_a, n_cut_a).kronecker(&ladder_matrix(n_cut_b));
        let aa = &a * &a;
        let phase = C64::from_polar(1.0, theta);
        let m = (aa.adjoint() * &b * phase + b.adjoint() * &aa * phase.conj())
            * C64::new(0.5 * chi, 0.0);
        Ok(Self {
            matrix: m,
            dims: vec![n_cut_a, n_cut_b],
        })
    }

    /// omega * n acting on one mode of a two-mode basis.
    pub fn phase_on_mode(omega: f64, dims: &[usize], mode: usize) -> Result<Self> {
        if dims.len() == 1 {
            return Self::phase(omega, dims[0]);
        }
        if dims.len() != 2 || mode >= 2 {
            return Err(Error::Config("phase_on_mode expects one or two modes".into()));
        }
        let (na, nb) = (dims[0], dims[1]);
        let m = DMatrix::from_fn(na * nb, na * nb, |r, c| {
            if r == c {
                let level = if mode == 0 { r / nb } else { r % nb };
                C64::new(omega * level as f64, 0.0)
            } else {
                C64::ZERO
            }
        });
        Ok(Self {
            matrix: m,
            dims: dims.to_vec(),
        })
    }

    /// The same Hamiltonian scaled by a real factor.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrix: &self.matrix * C64::new(factor, 0.0),
            dims: self.dims.clone(),
        }
    }

    fn hermiticity_defect(&self) -> f64 {
        let adj = self.matrix.adjoint();
        (&self.matrix - adj)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    fn is_diagonal(&self) -> bool {
        let n = self.matrix.nrows();
        for r in 0..n {
            for c in 0..n {
                if r != c && self.matrix[(r, c)] != C64::ZERO {
                    return false;
                }
            }
        }
        true
    }

    /// Max row sum of magnitudes; an upper bound on the spectral norm.
    fn inf_norm(&self) -> f64 {
        let n = self.matrix.nrows();
        (0..n)
            .map(|r| (0..n).map(|c| self.matrix[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Propagate i d|psi>/dt = H |psi| for `duration`. Diagonal Hamiltonians use
/// the exact phase map; otherwise RK4 with substeps no larger than `step`
/// (and small enough that the norm stays within tolerance). The result must
/// pass the norm and tail checks.
pub fn evolve_exact(
    hamiltonian: &Hamiltonian,
    state: &FockState,
    duration: f64,
    step: f64,
) -> Result<FockState> {
    if hamiltonian.dims != state.dims {
        return Err(Error::DimensionMismatch {
            expected: hamiltonian.matrix.nrows(),
            found: state.amps.len(),
        });
    }
    let scale = hamiltonian
        .matrix
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1.0);
    let defect = hamiltonian.hermiticity_defect();
    if defect > 1e-12 * scale {
        return Err(Error::NotHermitian(defect));
    }
    if duration == 0.0 {
        return Ok(state.clone());
    }
    let mut out = state.clone();
    if hamiltonian.is_diagonal() {
        for (i, amp) in out.amps.iter_mut().enumerate() {
            let energy = hamiltonian.matrix[(i, i)].re;
            *amp *= C64::from_polar(1.0, -energy * duration);
        }
    } else {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidStep(step));
        }
        // keep |H| h small enough that RK4's norm drift stays below tolerance
        let h_max = (0.005 / hamiltonian.inf_norm()).min(step);
        let n_steps = (duration.abs() / h_max).ceil() as usize;
        let h = duration / n_steps as f64;
        let minus_i_h = &hamiltonian.matrix * C64::new(0.0, -1.0);
        let mut k1;
        let mut k2;
        let mut k3;
        let mut k4;
        for _ in 0..n_steps {
            k1 = &minus_i_h * &out.amps;
            k2 = &minus_i_h * &(&out.amps + &k1 * C64::new(0.5 * h, 0.0));
            k3 = &minus_i_h * &(&out.amps + &k2 * C64::new(0.5 * h, 0.0));
            k4 = &minus_i_h * &(&out.amps + &k3 * C64::new(h, 0.0));
            out.amps += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4)
                * C64::new(h / 6.0, 0.0);
        }
    }
    out.check_valid()?;
    Ok(out)
}

/// Preparation + one-parameter encoding, mirrored into Fock space.
#[derive(Debug, Clone)]
pub struct FockProtocol {
    pub preparation: Hamiltonian,
    pub t1: f64,
    pub prep_step: f64,
    generator: Hamiltonian,
    pub operating_value: f64,
    pub dt: f64,
    pub enc_step: f64,
}

impl FockProtocol {
    pub fn new(
        preparation: Hamiltonian,
        t1: f64,
        prep_step: f64,
        encoding: EncodingKind,
        mode: usize,
        operating_value: f64,
        dt: f64,
        enc_step: f64,
    ) -> Result<Self> {
        let dims = preparation.dims.clone();
        let generator = match encoding {
            EncodingKind::PhaseRotation => Hamiltonian::phase_on_mode(1.0, &dims, mode)?,
            EncodingKind::QuadratureDisplacement => {
                if dims.len() != 1 {
                    return Err(Error::Config(
                        "displacement encoding is single-mode only".into(),
                    ));
                }
                Hamiltonian::displacement(1.0, dims[0])?
            }
        };
        Ok(Self {
            preparation,
            t1,
            prep_step,
            generator,
            operating_value,
            dt,
            enc_step,
        })
    }

    /// Prepare, then encode with the parameter bound to `value`.
    pub fn run(&self, psi0: &FockState, value: f64) -> Result<FockState> {
        let prepared = evolve_exact(&self.preparation, psi0, self.t1, self.prep_step)?;
        evolve_exact(&self.generator.scaled(value), &prepared, self.dt, self.enc_step)
    }

    /// Overlap form of the pure-state QFI at the operating point:
    /// 8 (1 - |<psi(w - d/2)|psi(w + d/2)>|) / d^2, with both perturbed
    /// states renormalised.
    pub fn qfi_fidelity(&self, psi0: &FockState, delta: f64) -> Result<f64> {
        if !(delta > 1e-8) || !delta.is_finite() {
            return Err(Error::StepBelowRoundoff(delta));
        }
        let prepared = evolve_exact(&self.preparation, psi0, self.t1, self.prep_step)?;
        let encode = |value: f64| -> Result<FockState> {
            Ok(
                evolve_exact(&self.generator.scaled(value), &prepared, self.dt, self.enc_step)?
                    .renormalized(),
            )
        };
        let plus = encode(self.operating_value + 0.5 * delta)?;
        let minus = encode(self.operating_value - 0.5 * delta)?;
        let fidelity = minus.overlap(&plus)?.norm();
        Ok(8.0 * (1.0 - fidelity) / (delta * delta))
    }
}
