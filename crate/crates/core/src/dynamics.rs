//! Model contract, fixed-step integrator, and the forward/rewind protocol
//! runner.
//!
//! A [`Model`] supplies the deterministic phase-space drift obtained from the
//! Weyl symbol of its Hamiltonian; evolution is the symplectic flow
//! alpha' = -i dW_H/d(alpha*), or equivalently X' = dW_H/dY, Y' = -dW_H/dX in
//! quadratures. Integration is classical fourth-order Runge-Kutta with a
//! fixed step and an exactly shortened final step, so forward and backward
//! passes traverse mirrored step sequences and the flow map stays
//! deterministic. Adaptive stepping is deliberately not offered.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::phase_space::{ModeLayout, PhaseSpacePoint};

/// Deterministic drift of a truncated-Wigner trajectory.
pub trait Model {
    /// Number of bosonic modes the drift acts on.
    fn modes(&self) -> usize;

    /// Write dx/dt into `dxdt` for the quadratures `x` at time `t`.
    fn drift(&self, t: f64, x: &[f64], dxdt: &mut [f64]);

    /// Weyl symbol of the generating Hamiltonian, when available.
    fn weyl_hamiltonian(&self, x: &[f64]) -> Option<f64> {
        let _ = x;
        None
    }
}

/// A model family exposing exactly one bound scalar parameter.
pub trait ParametricModel {
    type Bound: Model;

    fn modes(&self) -> usize;

    /// Fix the scalar parameter, yielding an integrable model.
    fn bind(&self, value: f64) -> Self::Bound;
}

/// Reusable Runge-Kutta work buffers.
pub(crate) struct Integrator {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    xt: Vec<f64>,
}

impl Integrator {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            xt: vec![0.0; dim],
        }
    }

    /// One RK4 step of signed size `h`, in place.
    pub(crate) fn step<M: Model + ?Sized>(
        &mut self,
        model: &M,
        t: f64,
        h: f64,
        x: &mut [f64],
    ) -> Result<()> {
        let dim = x.len();
        let Integrator { k1, k2, k3, k4, xt } = self;
        let (k1, k2) = (&mut k1[..dim], &mut k2[..dim]);
        let (k3, k4) = (&mut k3[..dim], &mut k4[..dim]);
        let xt = &mut xt[..dim];
        model.drift(t, x, k1);
        for i in 0..dim {
            xt[i] = x[i] + 0.5 * h * k1[i];
        }
        model.drift(t + 0.5 * h, xt, k2);
        for i in 0..dim {
            xt[i] = x[i] + 0.5 * h * k2[i];
        }
        model.drift(t + 0.5 * h, xt, k3);
        for i in 0..dim {
            xt[i] = x[i] + h * k3[i];
        }
        model.drift(t + h, xt, k4);
        let sixth = h / 6.0;
        let mut finite = true;
        for i in 0..dim {
            x[i] += sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            finite &= x[i].is_finite();
        }
        if !finite {
            return Err(Error::NonFiniteState {
                t,
                state: x.to_vec(),
            });
        }
        Ok(())
    }

    /// Compose RK4 steps from `t0` to `t1` exactly, shortening the last step.
    pub(crate) fn evolve<M: Model + ?Sized>(
        &mut self,
        model: &M,
        x: &mut [f64],
        t0: f64,
        t1: f64,
        h: f64,
    ) -> Result<()> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidStep(h));
        }
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let full_steps = (span.abs() / h).floor() as u64;
        let mut t = t0;
        for i in 0..full_steps {
            self.step(model, t, dir * h, x)?;
            t = t0 + (i + 1) as f64 * dir * h;
        }
        let rem = t1 - t;
        if rem.abs() > span.abs() * 1e-12 {
            self.step(model, t, rem, x)?;
        }
        Ok(())
    }
}

fn ensure_model_fits<M: Model + ?Sized>(model: &M, x: &PhaseSpacePoint) -> Result<()> {
    if model.modes() != x.layout().modes() {
        return Err(Error::DimensionMismatch {
            expected: 2 * model.modes(),
            found: x.dim(),
        });
    }
    Ok(())
}

/// One classical RK4 step; negative `h` steps backward in time.
pub fn step_rk4<M: Model + ?Sized>(
    model: &M,
    x: &PhaseSpacePoint,
    t: f64,
    h: f64,
) -> Result<PhaseSpacePoint> {
    if h == 0.0 || !h.is_finite() {
        return Err(Error::InvalidStep(h));
    }
    ensure_model_fits(model, x)?;
    let mut out = x.clone();
    Integrator::new(x.dim()).step(model, t, h, out.coords_mut())?;
    Ok(out)
}

/// Integrate from `t0` to `t1` with step magnitude `h`; the direction is
/// inferred from sign(t1 - t0) and the final step is shortened to land on
/// `t1` exactly.
pub fn evolve<M: Model + ?Sized>(
    model: &M,
    x0: &PhaseSpacePoint,
    t0: f64,
    t1: f64,
    h: f64,
) -> Result<PhaseSpacePoint> {
    ensure_model_fits(model, x0)?;
    let mut out = x0.clone();
    Integrator::new(x0.dim()).evolve(model, out.coords_mut(), t0, t1, h)?;
    Ok(out)
}

/// Compare a model's drift against the symplectic flow of its Weyl
/// Hamiltonian, X' = dW_H/dY, Y' = -dW_H/dX, evaluated by central finite
/// differences. Returns the max mismatch relative to the drift scale.
pub fn check_drift_consistency<M: Model + ?Sized>(model: &M, x: &PhaseSpacePoint) -> Result<f64> {
    ensure_model_fits(model, x)?;
    const FD_STEP: f64 = 1e-6;
    let dim = x.dim();
    let mut drift = vec![0.0; dim];
    model.drift(0.0, x.coords(), &mut drift);
    let wh = |coords: &[f64]| -> Result<f64> {
        model
            .weyl_hamiltonian(coords)
            .ok_or_else(|| Error::Config("model does not supply a Weyl Hamiltonian".into()))
    };
    let mut buf = x.coords().to_vec();
    let mut partial = vec![0.0; dim];
    for i in 0..dim {
        let orig = buf[i];
        buf[i] = orig + FD_STEP;
        let hi = wh(&buf)?;
        buf[i] = orig - FD_STEP;
        let lo = wh(&buf)?;
        buf[i] = orig;
        partial[i] = (hi - lo) / (2.0 * FD_STEP);
    }
    let scale = drift.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for mode in 0..model.modes() {
        let ix = 2 * mode;
        let iy = ix + 1;
        worst = worst.max((drift[ix] - partial[iy]).abs() / scale);
        worst = worst.max((drift[iy] + partial[ix]).abs() / scale);
    }
    Ok(worst)
}

/// A model integrated for a fixed duration with a fixed step.
#[derive(Debug, Clone)]
pub struct Stage<M> {
    pub model: M,
    pub duration: f64,
    pub step: f64,
}

impl<M> Stage<M> {
    pub fn new(model: M, duration: f64, step: f64) -> Self {
        Self {
            model,
            duration,
            step,
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !self.duration.is_finite() || self.duration < 0.0 {
            return Err(Error::InvalidStage(format!(
                "{what} duration must be finite and >= 0, got {}",
                self.duration
            )));
        }
        if self.duration > 0.0 {
            if !(self.step > 0.0) || !self.step.is_finite() {
                return Err(Error::InvalidStage(format!(
                    "{what} step must be positive, got {}",
                    self.step
                )));
            }
            if self.step > self.duration {
                return Err(Error::InvalidStage(format!(
                    "{what} step {} exceeds duration {}",
                    self.step, self.duration
                )));
            }
        }
        Ok(())
    }
}

/// Preparation stage followed by a parameter-encoding stage.
///
/// Forward runs may perturb the encoding parameter; the rewind always
/// re-traverses the encoding at the operating value and never sees the
/// perturbed one.
#[derive(Debug, Clone)]
pub struct Protocol<P: Model, E: ParametricModel> {
    layout: Arc<ModeLayout>,
    pub preparation: Stage<P>,
    pub encoding: Stage<E>,
    pub operating_value: f64,
}

impl<P: Model, E: ParametricModel> Protocol<P, E> {
    pub fn new(
        layout: Arc<ModeLayout>,
        preparation: Stage<P>,
        encoding: Stage<E>,
        operating_value: f64,
    ) -> Result<Self> {
        preparation.validate("preparation")?;
        encoding.validate("encoding")?;
        if preparation.model.modes() != layout.modes() || encoding.model.modes() != layout.modes()
        {
            return Err(Error::InvalidStage(
                "stage models do not match the protocol layout".into(),
            ));
        }
        if !operating_value.is_finite() {
            return Err(Error::NonFinite {
                what: "operating value",
                value: operating_value,
            });
        }
        Ok(Self {
            layout,
            preparation,
            encoding,
            operating_value,
        })
    }

    pub fn layout(&self) -> &Arc<ModeLayout> {
        &self.layout
    }

    /// End of the preparation stage.
    pub fn t1(&self) -> f64 {
        self.preparation.duration
    }

    /// End of the encoding stage.
    pub fn t2(&self) -> f64 {
        self.preparation.duration + self.encoding.duration
    }

    fn ensure_point(&self, x: &PhaseSpacePoint) -> Result<()> {
        self.layout.ensure_matches(x.layout())
    }

    /// Evolve through the preparation stage only, returning x(t1).
    pub fn run_preparation(&self, x0: &PhaseSpacePoint) -> Result<PhaseSpacePoint> {
        self.ensure_point(x0)?;
        let mut out = x0.clone();
        let mut work = Integrator::new(x0.dim());
        work.evolve(
            &self.preparation.model,
            out.coords_mut(),
            0.0,
            self.preparation.duration,
            self.preparation.step,
        )?;
        Ok(out)
    }

    /// Full forward run: preparation, then encoding with the parameter bound
    /// to `value`. Returns x(t2).
    pub fn run(&self, x0: &PhaseSpacePoint, value: f64) -> Result<PhaseSpacePoint> {
        self.ensure_point(x0)?;
        let mut out = x0.clone();
        let mut work = Integrator::new(x0.dim());
        work.evolve(
            &self.preparation.model,
            out.coords_mut(),
            0.0,
            self.preparation.duration,
            self.preparation.step,
        )?;
        let bound = self.encoding.model.bind(value);
        work.evolve(
            &bound,
            out.coords_mut(),
            self.t1(),
            self.t2(),
            self.encoding.step,
        )?;
        Ok(out)
    }

    /// Encode a prepared point x(t1) with the parameter bound to `value`,
    /// then pull it back to t = 0 as [`Self::rewind`] would. Equivalent to
    /// `rewind(run(x0, value))` when `prepared = run_preparation(x0)`, but
    /// lets callers reuse the parameter-independent preparation leg.
    pub fn encode_then_rewind(
        &self,
        prepared: &PhaseSpacePoint,
        value: f64,
    ) -> Result<PhaseSpacePoint> {
        self.ensure_point(prepared)?;
        let mut out = prepared.clone();
        let mut work = Integrator::new(prepared.dim());
        let bound = self.encoding.model.bind(value);
        work.evolve(
            &bound,
            out.coords_mut(),
            self.t1(),
            self.t2(),
            self.encoding.step,
        )?;
        let operating = self.encoding.model.bind(self.operating_value);
        work.evolve(
            &operating,
            out.coords_mut(),
            self.t2(),
            self.t1(),
            self.encoding.step,
        )?;
        work.evolve(
            &self.preparation.model,
            out.coords_mut(),
            self.t1(),
            0.0,
            self.preparation.step,
        )?;
        Ok(out)
    }

    /// Map x(t2) back to its t = 0 preimage: backward through the encoding at
    /// the operating value, then backward through the preparation.
    pub fn rewind(&self, x_end: &PhaseSpacePoint) -> Result<PhaseSpacePoint> {
        self.ensure_point(x_end)?;
        let mut out = x_end.clone();
        let mut work = Integrator::new(x_end.dim());
        let bound = self.encoding.model.bind(self.operating_value);
        work.evolve(
            &bound,
            out.coords_mut(),
            self.t2(),
            self.t1(),
            self.encoding.step,
        )?;
        work.evolve(
            &self.preparation.model,
            out.coords_mut(),
            self.t1(),
            0.0,
            self.preparation.step,
        )?;
        Ok(out)
    }
}
