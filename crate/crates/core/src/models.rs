//! Concrete drifts, closed forms, and analytic references.
//!
//! Three preparation models (single-mode parametric amplifier in the
//! undepleted-pump approximation, its two-mode pump-depletion extension, and
//! the Kerr oscillator) plus two parameter encodings (number-generated phase
//! rotation and a quadrature displacement). Drifts are the symplectic flow
//! of each model's Weyl Hamiltonian; the phase conventions follow
//! alpha' = -i dW_H/d(alpha*).

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;

use crate::dynamics::{Model, ParametricModel};
use crate::error::{Error, Result};
use crate::phase_space::{ModeLayout, PhaseSpacePoint};

fn ensure_finite(what: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { what, value: v })
    }
}

/// Undepleted parametric amplifier: i alpha' = g e^{i theta} alpha*.
#[derive(Debug, Clone, Copy)]
pub struct OpoParams {
    g: f64,
    theta: f64,
    cos_theta: f64,
    sin_theta: f64,
}

impl OpoParams {
    pub fn new(g: f64, theta: f64) -> Result<Self> {
        ensure_finite("g", g)?;
        ensure_finite("theta", theta)?;
        if g < 0.0 {
            return Err(Error::Config(format!("g must be >= 0, got {g}")));
        }
        Ok(Self {
            g,
            theta,
            cos_theta: theta.cos(),
            sin_theta: theta.sin(),
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Two-mode cavity/pump model: i alpha' = chi e^{i theta} beta alpha*,
/// i beta' = (chi/2) e^{-i theta} alpha^2. Mode 0 is the cavity (alpha),
/// mode 1 the pump (beta).
#[derive(Debug, Clone, Copy)]
pub struct DepletionParams {
    chi: f64,
    theta: f64,
    cos_theta: f64,
    sin_theta: f64,
}

impl DepletionParams {
    pub fn new(chi: f64, theta: f64) -> Result<Self> {
        ensure_finite("chi", chi)?;
        ensure_finite("theta", theta)?;
        if chi < 0.0 {
            return Err(Error::Config(format!("chi must be >= 0, got {chi}")));
        }
        Ok(Self {
            chi,
            theta,
            cos_theta: theta.cos(),
            sin_theta: theta.sin(),
        })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Kerr oscillator: i alpha' = (chi (|alpha|^2 - 1) - omega0) alpha.
/// `omega0` removes the bulk rotation; see [`KerrParams::frozen_frame_omega0`].
#[derive(Debug, Clone, Copy)]
pub struct KerrParams {
    pub chi: f64,
    pub omega0: f64,
}

impl KerrParams {
    pub fn new(chi: f64, omega0: f64) -> Result<Self> {
        ensure_finite("chi", chi)?;
        ensure_finite("omega0", omega0)?;
        Ok(Self { chi, omega0 })
    }

    /// omega0 that freezes the rotation of the exact mean amplitude of a
    /// coherent state |alpha0>: d<a>/dt is generated by chi <a^dag a a>,
    /// which is chi |alpha0|^2 <a> for a coherent state.
    pub fn frozen_frame_omega0(chi: f64, alpha0_sq: f64) -> f64 {
        chi * alpha0_sq
    }
}

/// Preparation-stage drift.
#[derive(Debug, Clone, Copy)]
pub enum Preparation {
    /// No dynamics; useful for encoding-only protocols.
    Idle { modes: usize },
    Opo(OpoParams),
    Depletion(DepletionParams),
    Kerr(KerrParams),
}

impl Model for Preparation {
    fn modes(&self) -> usize {
        match self {
            Preparation::Idle { modes } => *modes,
            Preparation::Opo(_) | Preparation::Kerr(_) => 1,
            Preparation::Depletion(_) => 2,
        }
    }

    fn drift(&self, _t: f64, x: &[f64], dxdt: &mut [f64]) {
        match self {
            Preparation::Idle { .. } => dxdt.fill(0.0),
            Preparation::Opo(p) => {
                let (c, s) = (p.cos_theta, p.sin_theta);
                dxdt[0] = p.g * (s * x[0] - c * x[1]);
                dxdt[1] = -p.g * (c * x[0] + s * x[1]);
            }
            Preparation::Depletion(p) => {
                let (c, s) = (p.cos_theta, p.sin_theta);
                let (xa, ya, xb, yb) = (x[0], x[1], x[2], x[3]);
                // beta alpha* and alpha^2 in halved quadrature products
                let pr = 0.5 * (xa * xb + ya * yb);
                let pi = 0.5 * (xa * yb - ya * xb);
                let ur = 0.5 * (xa * xa - ya * ya);
                let ui = xa * ya;
                dxdt[0] = SQRT_2 * p.chi * (s * pr + c * pi);
                dxdt[1] = -SQRT_2 * p.chi * (c * pr - s * pi);
                dxdt[2] = SQRT_2 * 0.5 * p.chi * (c * ui - s * ur);
                dxdt[3] = -SQRT_2 * 0.5 * p.chi * (c * ur + s * ui);
            }
            Preparation::Kerr(p) => {
                let occupancy = 0.5 * (x[0] * x[0] + x[1] * x[1]);
                let rate = p.chi * (occupancy - 1.0) - p.omega0;
                dxdt[0] = rate * x[1];
                dxdt[1] = -rate * x[0];
            }
        }
    }

    fn weyl_hamiltonian(&self, x: &[f64]) -> Option<f64> {
        match self {
            Preparation::Idle { .. } => Some(0.0),
            Preparation::Opo(p) => {
                let ur = 0.5 * (x[0] * x[0] - x[1] * x[1]);
                let ui = x[0] * x[1];
                Some(p.g * (p.cos_theta * ur + p.sin_theta * ui))
            }
            Preparation::Depletion(p) => {
                let alpha = Complex64::new(x[0], x[1]) / SQRT_2;
                let beta = Complex64::new(x[2], x[3]) / SQRT_2;
                let phase = Complex64::new(p.cos_theta, p.sin_theta);
                Some(p.chi * (alpha.conj() * alpha.conj() * beta * phase).re)
            }
            Preparation::Kerr(p) => {
                let n = 0.5 * (x[0] * x[0] + x[1] * x[1]);
                Some(0.5 * p.chi * (n * n - 2.0 * n + 0.5) - p.omega0 * (n - 0.5))
            }
        }
    }
}

/// The two supported parameter encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingKind {
    /// i alpha' = omega alpha: rotation generated by the mode occupancy.
    PhaseRotation,
    /// X' = -v0: displacement along X generated by the Y quadrature.
    QuadratureDisplacement,
}

/// Encoding family acting on one mode of a layout; binds a single scalar
/// parameter (the rotation rate omega, or the displacement rate v0).
#[derive(Debug, Clone, Copy)]
pub struct Encoding {
    kind: EncodingKind,
    mode: usize,
    modes: usize,
}

impl Encoding {
    pub fn new(kind: EncodingKind, mode: usize, modes: usize) -> Result<Self> {
        if mode >= modes {
            return Err(Error::Config(format!(
                "encoded mode {mode} out of range for {modes} modes"
            )));
        }
        Ok(Self { kind, mode, modes })
    }

    /// Single-mode encoding on mode 0.
    pub fn single(kind: EncodingKind) -> Self {
        Self {
            kind,
            mode: 0,
            modes: 1,
        }
    }

    pub fn kind(&self) -> EncodingKind {
        self.kind
    }

    pub fn mode(&self) -> usize {
        self.mode
    }
}

impl ParametricModel for Encoding {
    type Bound = BoundEncoding;

    fn modes(&self) -> usize {
        self.modes
    }

    fn bind(&self, value: f64) -> BoundEncoding {
        BoundEncoding {
            kind: self.kind,
            mode: self.mode,
            modes: self.modes,
            value,
        }
    }
}

/// An encoding with its scalar parameter fixed.
#[derive(Debug, Clone, Copy)]
pub struct BoundEncoding {
    kind: EncodingKind,
    mode: usize,
    modes: usize,
    value: f64,
}

impl Model for BoundEncoding {
    fn modes(&self) -> usize {
        self.modes
    }

    fn drift(&self, _t: f64, x: &[f64], dxdt: &mut [f64]) {
        dxdt.fill(0.0);
        let ix = 2 * self.mode;
        match self.kind {
            EncodingKind::PhaseRotation => {
                dxdt[ix] = self.value * x[ix + 1];
                dxdt[ix + 1] = -self.value * x[ix];
            }
            EncodingKind::QuadratureDisplacement => {
                dxdt[ix] = -self.value;
            }
        }
    }

    fn weyl_hamiltonian(&self, x: &[f64]) -> Option<f64> {
        let ix = 2 * self.mode;
        match self.kind {
            EncodingKind::PhaseRotation => {
                let n = 0.5 * (x[ix] * x[ix] + x[ix + 1] * x[ix + 1]);
                Some(self.value * (n - 0.5))
            }
            EncodingKind::QuadratureDisplacement => Some(-self.value * x[ix + 1]),
        }
    }
}

/// alpha(t) = cosh(g t) alpha(0) - i e^{i theta} sinh(g t) alpha*(0).
pub fn opo_closed_form(x0: &PhaseSpacePoint, params: &OpoParams, t: f64) -> PhaseSpacePoint {
    let a0 = x0.amplitude(0);
    let gt = params.g * t;
    let phase = Complex64::new(params.cos_theta, params.sin_theta);
    let a = gt.cosh() * a0 - Complex64::i() * phase * gt.sinh() * a0.conj();
    PhaseSpacePoint::from_amplitudes(x0.layout().clone(), &[a])
        .expect("closed form preserves the layout")
}

/// QFI per squared encoding duration for a coherent state
/// |alpha0| e^{i vartheta} amplified for t1 and then phase-encoded:
/// (4|a0|^2 + 1) cosh(4 g t1) - 4|a0|^2 sin(2 vartheta - theta) sinh(4 g t1) - 1.
pub fn opo_qfi_analytic(alpha0_mag: f64, vartheta: f64, params: &OpoParams, t1: f64) -> f64 {
    let a2 = alpha0_mag * alpha0_mag;
    let four_gt = 4.0 * params.g * t1;
    (4.0 * a2 + 1.0) * four_gt.cosh()
        - 4.0 * a2 * (2.0 * vartheta - params.theta).sin() * four_gt.sinh()
        - 1.0
}

/// Exact encoding map on one mode: phase rotation alpha -> alpha e^{-i w dt},
/// or displacement X -> X - v0 dt.
pub fn encoding_closed_form(
    x: &PhaseSpacePoint,
    kind: EncodingKind,
    mode: usize,
    parameter: f64,
    dt: f64,
) -> PhaseSpacePoint {
    let mut out = x.clone();
    let ix = 2 * mode;
    match kind {
        EncodingKind::PhaseRotation => {
            let angle = parameter * dt;
            let (c, s) = (angle.cos(), angle.sin());
            let (px, py) = (out.coords()[ix], out.coords()[ix + 1]);
            out.coords_mut()[ix] = c * px + s * py;
            out.coords_mut()[ix + 1] = -s * px + c * py;
        }
        EncodingKind::QuadratureDisplacement => {
            out.coords_mut()[ix] -= parameter * dt;
        }
    }
    out
}

/// Coherent cavity + coherent pump initial spec for the depletion model.
pub fn cavity_pump_coherent(
    layout: Arc<ModeLayout>,
    alpha0: Complex64,
    beta0: Complex64,
) -> Result<crate::phase_space::GaussianWignerSpec> {
    crate::phase_space::GaussianWignerSpec::coherent(layout, &[alpha0, beta0])
}
