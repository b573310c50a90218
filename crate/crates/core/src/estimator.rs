//! Monte Carlo QFI estimation from trajectory parametric derivatives.
//!
//! Each trajectory starts from one sample of the initial Wigner
//! distribution. The sample is pushed through the full protocol at the two
//! perturbed encoding values omega_op +- dw/2, both endpoints are rewound at
//! the operating value, and the central difference of the rewound points is
//! the parametric derivative of the trajectory at t = 0 (common random
//! numbers: both runs share the sample, so sampling noise cancels in the
//! difference). Projecting that derivative onto the precision-weighted
//! residual M^(-1)(x0 - mu) of the initial distribution gives the
//! per-trajectory contribution
//!
//!   c = W0(x0) * (d_omega x . M^(-1) (x0 - mu))^2,
//!
//! and the QFI estimate is 8 (2 pi)^k E[c]. The constant carries the
//! quadrature-measure and gradient bookkeeping in one place; it is pinned
//! empirically by the coherent-state calibration: a coherent state under
//! phase encoding must give 4 |alpha0|^2 dt^2.
//!
//! Trajectories run concurrently on disjoint seeded substreams, are written
//! to an index-ordered buffer, and are reduced by pairwise summation, so an
//! estimate is bitwise reproducible for a fixed (seed, N) at any worker
//! count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{Model, ParametricModel, Protocol};
use crate::error::{Error, Result};
use crate::numeric;
use crate::phase_space::{GaussianWignerSpec, PhaseSpacePoint};

/// Default escape threshold for the max quadrature magnitude.
pub const DEFAULT_ESCAPE_THRESHOLD: f64 = 1e8;
/// Fraction of flagged trajectories above which a run aborts.
pub const MAX_FLAGGED_FRACTION: f64 = 1e-3;

/// Normative estimator prefactor 8 (2 pi)^k for k modes.
pub fn estimator_prefactor(modes: usize) -> f64 {
    8.0 * (2.0 * std::f64::consts::PI).powi(modes as i32)
}

/// Independent random stream for one trajectory. Streams are indexed by
/// trajectory number, so results do not depend on worker scheduling.
pub fn substream(master_seed: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trajectory);
    rng
}

/// Subset of modes whose derivative components enter the contribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModeMask {
    included: Vec<bool>,
}

impl ModeMask {
    pub fn new(included: Vec<bool>) -> Result<Self> {
        if included.is_empty() {
            return Err(Error::Config(
                "mode mask must cover at least one mode".into(),
            ));
        }
        Ok(Self { included })
    }

    pub fn all(modes: usize) -> Self {
        Self {
            included: vec![true; modes],
        }
    }

    pub fn single(modes: usize, mode: usize) -> Result<Self> {
        if mode >= modes {
            return Err(Error::Config(format!(
                "masked mode {mode} out of range for {modes} modes"
            )));
        }
        let mut included = vec![false; modes];
        included[mode] = true;
        Ok(Self { included })
    }

    pub fn modes(&self) -> usize {
        self.included.len()
    }

    pub fn includes(&self, mode: usize) -> bool {
        self.included[mode]
    }
}

/// One initial sample, its two perturbed-and-rewound endpoints, and the
/// central-difference parametric derivative at t = 0.
#[derive(Debug, Clone)]
pub struct TrajectoryBundle {
    pub initial: PhaseSpacePoint,
    pub rewound_plus: PhaseSpacePoint,
    pub rewound_minus: PhaseSpacePoint,
    pub derivative: Vec<f64>,
    /// W0(x0) s^2; zero until `per_trajectory_contribution` fills it in.
    pub contribution: f64,
}

/// Monte Carlo QFI estimate with its standard error.
#[derive(Debug, Clone, Serialize)]
pub struct QfiEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Trajectories that contributed (finite, not escaped).
    pub n_trajectories: usize,
    /// Trajectories excluded as non-finite or escaped.
    pub n_flagged: usize,
    pub delta_omega: f64,
    pub mask: Option<ModeMask>,
    /// Human-readable echo of the run configuration.
    pub config_echo: String,
}

/// Settings for one estimator run.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub trajectories: usize,
    pub delta_omega: f64,
    pub seed: u64,
    pub mask: Option<ModeMask>,
    pub escape_threshold: f64,
    pub descriptor: String,
}

impl EstimatorConfig {
    pub fn new(trajectories: usize, delta_omega: f64, seed: u64) -> Self {
        Self {
            trajectories,
            delta_omega,
            seed,
            mask: None,
            escape_threshold: DEFAULT_ESCAPE_THRESHOLD,
            descriptor: String::new(),
        }
    }

    pub fn with_mask(mut self, mask: ModeMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_descriptor(mut self, descriptor: impl Into<String>) -> Self {
        self.descriptor = descriptor.into();
        self
    }
}

fn max_abs(coords: &[f64]) -> f64 {
    coords.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Run the protocol at omega_op +- dw/2 from one shared initial sample,
/// rewind both endpoints at the operating value, and form the central
/// difference. Integration failures carry the offending parameter value.
pub fn parametric_derivative<P: Model, E: ParametricModel>(
    protocol: &Protocol<P, E>,
    x0: &PhaseSpacePoint,
    delta_omega: f64,
) -> Result<TrajectoryBundle> {
    if !(delta_omega > 0.0) || !delta_omega.is_finite() {
        return Err(Error::Config(format!(
            "delta_omega must be positive and finite, got {delta_omega}"
        )));
    }
    // the preparation leg does not depend on the encoded parameter, so both
    // perturbed branches share it
    let prepared = protocol.run_preparation(x0)?;
    let pull_back = |omega: f64| -> Result<PhaseSpacePoint> {
        protocol
            .encode_then_rewind(&prepared, omega)
            .map_err(|e| e.at_omega(omega))
    };
    let omega_op = protocol.operating_value;
    let rewound_plus = pull_back(omega_op + 0.5 * delta_omega)?;
    let rewound_minus = pull_back(omega_op - 0.5 * delta_omega)?;
    let derivative = rewound_plus
        .coords()
        .iter()
        .zip(rewound_minus.coords())
        .map(|(p, m)| (p - m) / delta_omega)
        .collect();
    Ok(TrajectoryBundle {
        initial: x0.clone(),
        rewound_plus,
        rewound_minus,
        derivative,
        contribution: 0.0,
    })
}

/// Per-trajectory data sufficient to evaluate any mode-mask contraction:
/// the initial density and the per-mode terms of the projected derivative.
/// A NaN density marks a flagged (non-finite or escaped) trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryProjection {
    pub density: f64,
    pub mode_terms: Vec<f64>,
}

impl TrajectoryProjection {
    fn flagged() -> Self {
        Self {
            density: f64::NAN,
            mode_terms: Vec::new(),
        }
    }

    /// W0(x0) s^2 for the masked projection, times `prefactor`.
    fn contribution(&self, mask: Option<&ModeMask>, prefactor: f64) -> f64 {
        if self.density.is_nan() {
            return f64::NAN;
        }
        let mut s = 0.0;
        for (mode, term) in self.mode_terms.iter().enumerate() {
            if mask.map_or(true, |m| m.includes(mode)) {
                s += term;
            }
        }
        prefactor * self.density * s * s
    }
}

fn bundle_projection(
    spec: &GaussianWignerSpec,
    bundle: &TrajectoryBundle,
) -> Result<TrajectoryProjection> {
    let residual = spec.precision_residual(&bundle.initial)?;
    let density = spec.density(&bundle.initial)?;
    let mode_terms = (0..spec.layout().modes())
        .map(|mode| {
            let ix = 2 * mode;
            bundle.derivative[ix] * residual[ix] + bundle.derivative[ix + 1] * residual[ix + 1]
        })
        .collect();
    Ok(TrajectoryProjection {
        density,
        mode_terms,
    })
}

/// The projected derivative s = d_omega x . M^(-1) (x0 - mu), with masked-out
/// modes' derivative components zeroed. Additive over disjoint masks.
pub fn projected_derivative(
    spec: &GaussianWignerSpec,
    bundle: &TrajectoryBundle,
    mask: Option<&ModeMask>,
) -> Result<f64> {
    if let Some(m) = mask {
        if m.modes() != spec.layout().modes() {
            return Err(Error::DimensionMismatch {
                expected: spec.layout().modes(),
                found: m.modes(),
            });
        }
    }
    let projection = bundle_projection(spec, bundle)?;
    let mut s = 0.0;
    for (mode, term) in projection.mode_terms.iter().enumerate() {
        if mask.map_or(true, |m| m.includes(mode)) {
            s += term;
        }
    }
    Ok(s)
}

/// Per-trajectory contribution W0(x0) s^2, stored into the bundle.
pub fn per_trajectory_contribution(
    spec: &GaussianWignerSpec,
    bundle: &mut TrajectoryBundle,
    mask: Option<&ModeMask>,
) -> Result<f64> {
    let s = projected_derivative(spec, bundle, mask)?;
    let density = spec.density(&bundle.initial)?;
    bundle.contribution = density * s * s;
    Ok(bundle.contribution)
}

fn validate_run<P: Model, E: ParametricModel>(
    spec: &GaussianWignerSpec,
    protocol: &Protocol<P, E>,
    cfg: &EstimatorConfig,
) -> Result<()> {
    spec.ensure_pure()?;
    spec.layout().ensure_matches(protocol.layout())?;
    if cfg.trajectories < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: cfg.trajectories,
        });
    }
    if !(cfg.delta_omega > 0.0) || !cfg.delta_omega.is_finite() {
        return Err(Error::Config(format!(
            "delta_omega must be positive and finite, got {}",
            cfg.delta_omega
        )));
    }
    if let Some(mask) = &cfg.mask {
        if mask.modes() != spec.layout().modes() {
            return Err(Error::DimensionMismatch {
                expected: spec.layout().modes(),
                found: mask.modes(),
            });
        }
    }
    Ok(())
}

/// Per-trajectory projections in trajectory-index order.
///
/// Runs the trajectories once; any number of mode masks can then be
/// contracted against the result without re-integrating.
pub fn collect_projections<P, E>(
    spec: &GaussianWignerSpec,
    protocol: &Protocol<P, E>,
    cfg: &EstimatorConfig,
) -> Result<Vec<TrajectoryProjection>>
where
    P: Model + Sync,
    E: ParametricModel + Sync,
{
    validate_run(spec, protocol, cfg)?;
    Ok((0..cfg.trajectories as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = substream(cfg.seed, index);
            let x0 = spec.sample(&mut rng);
            let bundle = match parametric_derivative(protocol, &x0, cfg.delta_omega) {
                Ok(b) => b,
                Err(_) => return TrajectoryProjection::flagged(),
            };
            if max_abs(bundle.rewound_plus.coords()) > cfg.escape_threshold
                || max_abs(bundle.rewound_minus.coords()) > cfg.escape_threshold
            {
                return TrajectoryProjection::flagged();
            }
            bundle_projection(spec, &bundle).unwrap_or_else(|_| TrajectoryProjection::flagged())
        })
        .collect())
}

/// Contract stored projections against one mode mask.
pub fn estimate_from_projections(
    projections: &[TrajectoryProjection],
    modes: usize,
    cfg: &EstimatorConfig,
    mask: Option<&ModeMask>,
) -> Result<QfiEstimate> {
    if let Some(m) = mask {
        if m.modes() != modes {
            return Err(Error::DimensionMismatch {
                expected: modes,
                found: m.modes(),
            });
        }
    }
    let prefactor = estimator_prefactor(modes);
    let contributions: Vec<f64> = projections
        .iter()
        .map(|p| p.contribution(mask, prefactor))
        .collect();
    let mask_cfg = EstimatorConfig {
        mask: mask.cloned(),
        ..cfg.clone()
    };
    summarize(&contributions, &mask_cfg, config_echo(&mask_cfg))
}

fn summarize(contributions: &[f64], cfg: &EstimatorConfig, echo: String) -> Result<QfiEstimate> {
    let total = contributions.len();
    let kept: Vec<f64> = contributions
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .collect();
    let flagged = total - kept.len();
    if flagged as f64 > MAX_FLAGGED_FRACTION * total as f64 {
        return Err(Error::TooManyEscapes {
            flagged,
            total,
            limit: (MAX_FLAGGED_FRACTION * total as f64) as usize,
        });
    }
    if kept.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: kept.len(),
        });
    }
    let value = numeric::mean(&kept);
    let std_error = numeric::standard_error(&kept);
    Ok(QfiEstimate {
        value,
        std_error,
        n_trajectories: kept.len(),
        n_flagged: flagged,
        delta_omega: cfg.delta_omega,
        mask: cfg.mask.clone(),
        config_echo: echo,
    })
}

fn config_echo(cfg: &EstimatorConfig) -> String {
    let mask = match &cfg.mask {
        None => "all".to_string(),
        Some(m) => (0..m.modes())
            .map(|i| if m.includes(i) { '1' } else { '0' })
            .collect(),
    };
    format!(
        "{}; N={}, delta_omega={:.6e}, seed={}, mask={}",
        cfg.descriptor, cfg.trajectories, cfg.delta_omega, cfg.seed, mask
    )
}

/// Estimate the QFI of the protocol at its operating point.
pub fn estimate_qfi<P, E>(
    spec: &GaussianWignerSpec,
    protocol: &Protocol<P, E>,
    cfg: &EstimatorConfig,
) -> Result<QfiEstimate>
where
    P: Model + Sync,
    E: ParametricModel + Sync,
{
    let projections = collect_projections(spec, protocol, cfg)?;
    estimate_from_projections(
        &projections,
        spec.layout().modes(),
        cfg,
        cfg.mask.as_ref(),
    )
}

/// As [`estimate_qfi`], additionally returning the scaled per-trajectory
/// contributions in trajectory-index order (NaN where flagged).
pub fn estimate_qfi_detailed<P, E>(
    spec: &GaussianWignerSpec,
    protocol: &Protocol<P, E>,
    cfg: &EstimatorConfig,
) -> Result<(QfiEstimate, Vec<f64>)>
where
    P: Model + Sync,
    E: ParametricModel + Sync,
{
    let projections = collect_projections(spec, protocol, cfg)?;
    let prefactor = estimator_prefactor(spec.layout().modes());
    let contributions: Vec<f64> = projections
        .iter()
        .map(|p| p.contribution(cfg.mask.as_ref(), prefactor))
        .collect();
    let estimate = summarize(&contributions, cfg, config_echo(cfg))?;
    Ok((estimate, contributions))
}

/// One row of a finite-difference convergence scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub delta_omega: f64,
    pub value: f64,
    pub std_error: f64,
}

/// Rerun the estimator with a shared seed over a descending list of
/// finite-difference steps; used to pick delta_omega in the plateau region.
pub fn fd_convergence_scan<P, E>(
    spec: &GaussianWignerSpec,
    protocol: &Protocol<P, E>,
    cfg: &EstimatorConfig,
    deltas: &[f64],
) -> Result<Vec<ScanPoint>>
where
    P: Model + Sync,
    E: ParametricModel + Sync,
{
    if deltas.is_empty() {
        return Err(Error::Config("delta_omega scan list is empty".into()));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "delta_omega scan list must be strictly descending".into(),
        ));
    }
    deltas
        .iter()
        .map(|&delta_omega| {
            let point_cfg = EstimatorConfig {
                delta_omega,
                ..cfg.clone()
            };
            let estimate = estimate_qfi(spec, protocol, &point_cfg)?;
            Ok(ScanPoint {
                delta_omega,
                value: estimate.value,
                std_error: estimate.std_error,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Stage;
    use crate::models::{Encoding, EncodingKind, OpoParams, Preparation};
    use crate::phase_space::ModeLayout;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn phase_protocol(dt: f64, omega_op: f64) -> Protocol<Preparation, Encoding> {
        Protocol::new(
            ModeLayout::single_mode(),
            Stage::new(Preparation::Idle { modes: 1 }, 0.0, 1.0),
            Stage::new(
                Encoding::single(EncodingKind::PhaseRotation),
                dt,
                dt / 1000.0,
            ),
            omega_op,
        )
        .unwrap()
    }

    fn point1(x: f64, y: f64) -> PhaseSpacePoint {
        PhaseSpacePoint::new(ModeLayout::single_mode(), vec![x, y]).unwrap()
    }

    #[test]
    fn derivative_of_pure_rotation_is_tangential() {
        let protocol = phase_protocol(1.0, 0.0);
        let bundle = parametric_derivative(&protocol, &point1(1.0, 0.0), 1e-4).unwrap();
        // d/d omega of the rotation at omega = 0 is dt * (Y, -X)
        assert_relative_eq!(bundle.derivative[0], 0.0, epsilon = 1e-8);
        assert_relative_eq!(bundle.derivative[1], -1.0, max_relative = 1e-8);
    }

    #[test]
    fn rotation_derivative_is_perpendicular_to_the_sample() {
        let spec = GaussianWignerSpec::vacuum(ModeLayout::single_mode());
        let protocol = phase_protocol(1.0, 0.0);
        let mut rng = substream(9, 0);
        for _ in 0..20 {
            let x0 = spec.sample(&mut rng);
            let bundle = parametric_derivative(&protocol, &x0, 1e-4).unwrap();
            let dot: f64 = bundle
                .derivative
                .iter()
                .zip(x0.coords())
                .map(|(d, x)| d * x)
                .sum();
            assert!(dot.abs() < 1e-10, "tangential flow violated: {dot:.3e}");
        }
    }

    #[test]
    fn central_difference_error_is_second_order() {
        // Large steps so the O(dw^2) term dominates roundoff; the Richardson
        // ratio of successive refinements approaches 4.
        let protocol = phase_protocol(1.0, 0.0);
        let x0 = point1(1.0, 0.0);
        let d = |dw: f64| {
            parametric_derivative(&protocol, &x0, dw)
                .unwrap()
                .derivative
        };
        let (d1, d2, d3) = (d(0.4), d(0.2), d(0.1));
        let diff = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let ratio = diff(&d1, &d2) / diff(&d2, &d3);
        assert!((ratio - 4.0).abs() < 0.8, "Richardson ratio {ratio:.3}");
    }

    #[test]
    fn zero_derivative_contributes_nothing() {
        let spec = GaussianWignerSpec::vacuum(ModeLayout::single_mode());
        let mut bundle = TrajectoryBundle {
            initial: point1(0.7, -0.2),
            rewound_plus: point1(0.7, -0.2),
            rewound_minus: point1(0.7, -0.2),
            derivative: vec![0.0, 0.0],
            contribution: 0.0,
        };
        let c = per_trajectory_contribution(&spec, &mut bundle, None).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn projected_derivative_is_additive_over_mode_masks() {
        let layout = ModeLayout::cavity_pump();
        let spec = GaussianWignerSpec::coherent(
            layout.clone(),
            &[Complex64::new(1.0, 0.5), Complex64::new(-0.3, 2.0)],
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..25 {
            let x0 = spec.sample(&mut rng);
            let bundle = TrajectoryBundle {
                initial: x0.clone(),
                rewound_plus: x0.clone(),
                rewound_minus: x0.clone(),
                derivative: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                contribution: 0.0,
            };
            let full = projected_derivative(&spec, &bundle, None).unwrap();
            let s_alpha =
                projected_derivative(&spec, &bundle, Some(&ModeMask::single(2, 0).unwrap()))
                    .unwrap();
            let s_beta =
                projected_derivative(&spec, &bundle, Some(&ModeMask::single(2, 1).unwrap()))
                    .unwrap();
            assert_relative_eq!(full, s_alpha + s_beta, max_relative = 1e-12, epsilon = 1e-14);

            // the all-modes mask reproduces the unmasked value exactly
            let all = projected_derivative(&spec, &bundle, Some(&ModeMask::all(2))).unwrap();
            assert_eq!(full.to_bits(), all.to_bits());
        }
    }

    #[test]
    fn coherent_state_phase_encoding_calibrates_the_prefactor() {
        let layout = ModeLayout::single_mode();
        let alpha0 = 4.0;
        let spec = GaussianWignerSpec::coherent(layout, &[Complex64::new(alpha0, 0.0)]).unwrap();
        let protocol = phase_protocol(1.0, 0.0);
        let cfg = EstimatorConfig::new(20_000, 1e-4, 17);
        let estimate = estimate_qfi(&spec, &protocol, &cfg).unwrap();
        let expected = 4.0 * alpha0 * alpha0;
        assert!(
            (estimate.value - expected).abs() < 3.0 * estimate.std_error,
            "value {} +- {} vs {}",
            estimate.value,
            estimate.std_error,
            expected
        );
        assert!(estimate.std_error < 0.02 * expected);
        assert_eq!(estimate.n_flagged, 0);
    }

    #[test]
    fn vacuum_phase_encoding_contributions_vanish_per_trajectory() {
        let spec = GaussianWignerSpec::vacuum(ModeLayout::single_mode());
        let protocol = phase_protocol(1.0, 0.0);
        let cfg = EstimatorConfig::new(2_000, 1e-4, 3);
        let (estimate, contributions) = estimate_qfi_detailed(&spec, &protocol, &cfg).unwrap();
        for c in &contributions {
            assert!(*c < 1e-10, "per-trajectory contribution {c:.3e}");
        }
        assert!(estimate.value < 1e-10);
    }

    #[test]
    fn impure_spec_is_rejected() {
        let layout = ModeLayout::single_mode();
        let spec = GaussianWignerSpec::new(
            layout,
            vec![0.0, 0.0],
            vec![vec![2.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let protocol = phase_protocol(1.0, 0.0);
        let cfg = EstimatorConfig::new(100, 1e-4, 0);
        assert!(matches!(
            estimate_qfi(&spec, &protocol, &cfg),
            Err(Error::ImpureState(_))
        ));
    }

    #[test]
    fn estimate_is_bitwise_identical_across_worker_counts() {
        let layout = ModeLayout::single_mode();
        let spec = GaussianWignerSpec::coherent(layout, &[Complex64::new(2.0, 1.0)]).unwrap();
        let params = OpoParams::new(1.0, 0.0).unwrap();
        let protocol = Protocol::new(
            ModeLayout::single_mode(),
            Stage::new(Preparation::Opo(params), 0.2, 0.2 / 200.0),
            Stage::new(Encoding::single(EncodingKind::PhaseRotation), 1.0, 1e-2),
            0.0,
        )
        .unwrap();
        let cfg = EstimatorConfig::new(2_000, 1e-4, 42);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| estimate_qfi(&spec, &protocol, &cfg).unwrap())
        };
        let (one, four, sixteen) = (run(1), run(4), run(16));
        assert_eq!(one.value.to_bits(), four.value.to_bits());
        assert_eq!(one.value.to_bits(), sixteen.value.to_bits());
        assert_eq!(one.std_error.to_bits(), four.std_error.to_bits());
        assert_eq!(one.std_error.to_bits(), sixteen.std_error.to_bits());
    }

    #[test]
    fn standard_error_halves_when_n_quadruples() {
        let layout = ModeLayout::single_mode();
        let spec = GaussianWignerSpec::coherent(layout, &[Complex64::new(3.0, 0.0)]).unwrap();
        let protocol = phase_protocol(1.0, 0.0);
        let small = estimate_qfi(&spec, &protocol, &EstimatorConfig::new(4_000, 1e-4, 5)).unwrap();
        let large = estimate_qfi(&spec, &protocol, &EstimatorConfig::new(16_000, 1e-4, 5)).unwrap();
        let ratio = small.std_error / large.std_error;
        assert!((ratio - 2.0).abs() < 0.4, "scaling ratio {ratio:.3}");
    }

    #[test]
    fn scan_requires_descending_steps() {
        let spec = GaussianWignerSpec::vacuum(ModeLayout::single_mode());
        let protocol = phase_protocol(1.0, 0.0);
        let cfg = EstimatorConfig::new(10, 1e-4, 0);
        assert!(fd_convergence_scan(&spec, &protocol, &cfg, &[1e-5, 1e-4]).is_err());
    }

    #[test]
    fn scan_is_flat_for_an_exactly_linear_encoding() {
        let layout = ModeLayout::single_mode();
        let spec = GaussianWignerSpec::coherent(layout, &[Complex64::new(2.0, 0.0)]).unwrap();
        let protocol = phase_protocol(1.0, 0.0);
        let cfg = EstimatorConfig::new(500, 1e-4, 8);
        let scan = fd_convergence_scan(&spec, &protocol, &cfg, &[1e-3, 1e-4, 1e-5]).unwrap();
        let base = scan[0].value;
        for point in &scan {
            assert_relative_eq!(point.value, base, max_relative = 1e-6);
        }
    }

    #[test]
    fn roundoff_floor_step_is_visibly_off_plateau() {
        // At dw = 1e-13 the central difference amplifies roundoff; the scan
        // must show it as a non-plateau point.
        let layout = ModeLayout::single_mode();
        let spec = GaussianWignerSpec::vacuum(layout.clone());
        let params = OpoParams::new(1.0, 0.0).unwrap();
        let protocol = Protocol::new(
            layout,
            Stage::new(Preparation::Opo(params), 0.25, 0.25 / 200.0),
            Stage::new(Encoding::single(EncodingKind::PhaseRotation), 1.0, 1e-2),
            0.0,
        )
        .unwrap();
        let cfg = EstimatorConfig::new(2_000, 1e-4, 21);
        let scan = fd_convergence_scan(&spec, &protocol, &cfg, &[1e-4, 1e-13]).unwrap();
        let clean = &scan[0];
        let noisy = &scan[1];
        let deviated = (noisy.value - clean.value).abs() / clean.value > 1e-3;
        let inflated = noisy.std_error > 2.0 * clean.std_error;
        assert!(
            deviated || inflated,
            "roundoff-floor step unexpectedly clean: {clean:?} vs {noisy:?}"
        );
    }
}
