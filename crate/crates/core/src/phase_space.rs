//! Phase-space points and Gaussian initial Wigner distributions.
//!
//! A point carries the 2k real quadratures of k bosonic modes, ordered
//! (X_1, Y_1, X_2, Y_2, ...) with X = sqrt(2) Re(alpha), Y = sqrt(2) Im(alpha).
//! Under this convention the vacuum and coherent states have covariance-shape
//! matrix M equal to the identity, the sample covariance of the quadratures is
//! M / 2, and the distribution
//!
//!   W0(x) = pi^(-k) det(M)^(-1/2) exp(-(x - mu)^T M^(-1) (x - mu))
//!
//! integrates to one over all quadratures.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Symmetry tolerance for the covariance-shape matrix.
const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues at or below this are treated as degenerate.
const DEGENERACY_FLOOR: f64 = 1e-12;
/// Purity gate: |det M - 1| must not exceed this for QFI runs.
pub const PURITY_TOL: f64 = 1e-9;

/// Number and labelling of the bosonic modes a quadrature vector describes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeLayout {
    modes: usize,
    names: Vec<String>,
}

impl ModeLayout {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config("a layout needs at least one mode".into()));
        }
        Ok(Self {
            modes: names.len(),
            names,
        })
    }

    pub fn single_mode() -> Arc<Self> {
        Arc::new(Self {
            modes: 1,
            names: vec!["alpha".into()],
        })
    }

    /// Cavity + pump layout used by the two-mode models.
    pub fn cavity_pump() -> Arc<Self> {
        Arc::new(Self {
            modes: 2,
            names: vec!["alpha".into(), "beta".into()],
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Length of a quadrature vector on this layout.
    pub fn dim(&self) -> usize {
        2 * self.modes
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ensure_matches(&self, other: &ModeLayout) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(format!(
                "{:?} vs {:?}",
                self.names, other.names
            )))
        }
    }
}

/// One trajectory's quadratures: 2k finite reals on a shared layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpacePoint {
    x: Vec<f64>,
    layout: Arc<ModeLayout>,
}

impl PhaseSpacePoint {
    pub fn new(layout: Arc<ModeLayout>, x: Vec<f64>) -> Result<Self> {
        if x.len() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                found: x.len(),
            });
        }
        if let Some(&bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "quadrature",
                value: bad,
            });
        }
        Ok(Self { x, layout })
    }

    /// Origin of phase space on the given layout.
    pub fn origin(layout: Arc<ModeLayout>) -> Self {
        let dim = layout.dim();
        Self {
            x: vec![0.0; dim],
            layout,
        }
    }

    /// Build from complex mode amplitudes: X = sqrt(2) Re(alpha), Y = sqrt(2) Im(alpha).
    pub fn from_amplitudes(layout: Arc<ModeLayout>, alphas: &[Complex64]) -> Result<Self> {
        if alphas.len() != layout.modes() {
            return Err(Error::DimensionMismatch {
                expected: layout.modes(),
                found: alphas.len(),
            });
        }
        let mut x = Vec::with_capacity(layout.dim());
        for a in alphas {
            x.push(a.re * SQRT_2);
            x.push(a.im * SQRT_2);
        }
        Self::new(layout, x)
    }

    /// Complex amplitude of one mode: alpha = (X + iY) / sqrt(2).
    pub fn amplitude(&self, mode: usize) -> Complex64 {
        Complex64::new(self.x[2 * mode] / SQRT_2, self.x[2 * mode + 1] / SQRT_2)
    }

    /// All mode amplitudes.
    pub fn amplitudes(&self) -> Vec<Complex64> {
        (0..self.layout.modes()).map(|m| self.amplitude(m)).collect()
    }

    pub fn coords(&self) -> &[f64] {
        &self.x
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn layout(&self) -> &Arc<ModeLayout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Max-norm distance to another point.
    pub fn distance_inf(&self, other: &PhaseSpacePoint) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Gaussian initial Wigner distribution: mean quadratures `mu` and
/// symmetric positive-definite covariance-shape matrix `M` (the sample
/// covariance of the quadratures is M / 2).
#[derive(Debug, Clone)]
pub struct GaussianWignerSpec {
    layout: Arc<ModeLayout>,
    mu: DVector<f64>,
    shape: DMatrix<f64>,
    inv_shape: DMatrix<f64>,
    /// Lower Cholesky factor of M / 2, used for sampling.
    sampler: DMatrix<f64>,
    det_shape: f64,
    norm_const: f64,
}

impl GaussianWignerSpec {
    pub fn new(layout: Arc<ModeLayout>, mu: Vec<f64>, shape_rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = layout.dim();
        if mu.len() != dim || shape_rows.len() != dim || shape_rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: mu.len(),
            });
        }
        let mu = DVector::from_vec(mu);
        let shape = DMatrix::from_fn(dim, dim, |i, j| shape_rows[i][j]);
        Self::from_parts(layout, mu, shape)
    }

    fn from_parts(layout: Arc<ModeLayout>, mu: DVector<f64>, shape: DMatrix<f64>) -> Result<Self> {
        let dim = layout.dim();
        if mu.len() != dim || shape.nrows() != dim || shape.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: mu.len(),
            });
        }
        if mu.iter().any(|v| !v.is_finite()) || shape.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "Wigner spec entry",
                value: f64::NAN,
            });
        }
        let asym = (&shape - shape.transpose()).abs().max();
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        let eigenvalues = shape.clone().symmetric_eigenvalues();
        let min_eig = eigenvalues.min();
        if min_eig <= DEGENERACY_FLOOR {
            return Err(Error::NotPositiveDefinite(min_eig));
        }
        let det_shape: f64 = eigenvalues.iter().product();
        let chol = nalgebra::Cholesky::new(shape.clone())
            .ok_or(Error::NotPositiveDefinite(min_eig))?;
        let inv_shape = chol.inverse();
        let sampler = nalgebra::Cholesky::new(shape.scale(0.5))
            .ok_or(Error::NotPositiveDefinite(min_eig))?
            .unpack();
        let k = layout.modes() as i32;
        let norm_const = PI.powi(-k) / det_shape.sqrt();
        Ok(Self {
            layout,
            mu,
            shape,
            inv_shape,
            sampler,
            det_shape,
            norm_const,
        })
    }

    /// Vacuum state: mu = 0, M = identity.
    pub fn vacuum(layout: Arc<ModeLayout>) -> Self {
        let dim = layout.dim();
        Self::from_parts(layout, DVector::zeros(dim), DMatrix::identity(dim, dim))
            .expect("identity shape is always valid")
    }

    /// Coherent state with one amplitude per mode: M = identity,
    /// mu = (sqrt(2) Re a, sqrt(2) Im a, ...).
    pub fn coherent(layout: Arc<ModeLayout>, alphas: &[Complex64]) -> Result<Self> {
        let point = PhaseSpacePoint::from_amplitudes(layout.clone(), alphas)?;
        let dim = layout.dim();
        Self::from_parts(
            layout,
            DVector::from_column_slice(point.coords()),
            DMatrix::identity(dim, dim),
        )
    }

    pub fn layout(&self) -> &Arc<ModeLayout> {
        &self.layout
    }

    pub fn mean(&self) -> &[f64] {
        self.mu.as_slice()
    }

    pub fn shape_matrix(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn det_shape(&self) -> f64 {
        self.det_shape
    }

    /// |det M - 1|; zero for pure Gaussian states.
    pub fn purity_defect(&self) -> f64 {
        (self.det_shape - 1.0).abs()
    }

    /// Reject specs that violate the pure-state condition det M = 1.
    pub fn ensure_pure(&self) -> Result<()> {
        let defect = self.purity_defect();
        if defect > PURITY_TOL {
            Err(Error::ImpureState(defect))
        } else {
            Ok(())
        }
    }

    fn ensure_layout(&self, x: &PhaseSpacePoint) -> Result<()> {
        self.layout.ensure_matches(x.layout())
    }

    /// W0(x) = pi^(-k) det(M)^(-1/2) exp(-(x - mu)^T M^(-1) (x - mu)).
    pub fn density(&self, x: &PhaseSpacePoint) -> Result<f64> {
        self.ensure_layout(x)?;
        let r = DVector::from_column_slice(x.coords()) - &self.mu;
        let q = r.dot(&(&self.inv_shape * &r));
        Ok(self.norm_const * (-q).exp())
    }

    /// Exact gradient of `density`: -2 M^(-1) (x - mu) W0(x).
    pub fn gradient(&self, x: &PhaseSpacePoint) -> Result<Vec<f64>> {
        self.ensure_layout(x)?;
        let r = DVector::from_column_slice(x.coords()) - &self.mu;
        let v = &self.inv_shape * &r;
        let w = self.norm_const * (-r.dot(&v)).exp();
        Ok(v.iter().map(|vi| -2.0 * vi * w).collect())
    }

    /// M^(-1) (x - mu), the precision-weighted residual entering both the
    /// gradient and the per-trajectory QFI contribution.
    pub fn precision_residual(&self, x: &PhaseSpacePoint) -> Result<Vec<f64>> {
        self.ensure_layout(x)?;
        let r = DVector::from_column_slice(x.coords()) - &self.mu;
        Ok((&self.inv_shape * r).as_slice().to_vec())
    }

    /// Draw one sample x = mu + L n with L L^T = M / 2 and n standard normal.
    /// The 2k normals are consumed in a fixed order, so a given stream yields
    /// a reproducible sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhaseSpacePoint {
        let dim = self.layout.dim();
        let n = DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = &self.mu + &self.sampler * n;
        PhaseSpacePoint {
            x: x.as_slice().to_vec(),
            layout: self.layout.clone(),
        }
    }
}
