//! Per-scenario execution: grids, estimator runs, moment passes, and the
//! exact-reference (`oracle`) variants.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{evolve, Model, Protocol, Stage};
use crate::error::{Error, Result};
use crate::estimator::{
    collect_projections, estimate_from_projections, parametric_derivative, substream,
    EstimatorConfig, ModeMask,
};
use crate::fock::{
    evolve_exact, exact_moment, exact_variance, qfi_unitary_generator, FockProtocol, FockState,
    Hamiltonian, ModeOperator,
};
use crate::models::{
    opo_qfi_analytic, DepletionParams, Encoding, EncodingKind, KerrParams, OpoParams, Preparation,
};
use crate::numeric;
use crate::observables::number_moments;
use crate::phase_space::{GaussianWignerSpec, ModeLayout, PhaseSpacePoint};

use super::config::{ScenarioConfig, ScenarioKind};
use super::table::Table;

pub(crate) struct ScenarioResult {
    pub table: Table,
    pub non_finite: usize,
}

/// Finite-difference step used by the oracle's overlap-form QFI.
const ORACLE_FIDELITY_DELTA: f64 = 1e-3;

pub(crate) fn dispatch(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    match cfg.scenario {
        ScenarioKind::FlowField => run_flow_field(cfg),
        ScenarioKind::OpoUndepleted => run_opo(cfg),
        ScenarioKind::PumpDepletion => run_depletion(cfg),
        ScenarioKind::Kerr => run_kerr(cfg),
    }
}

pub(crate) fn dispatch_oracle(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    match cfg.scenario {
        ScenarioKind::FlowField => Err(Error::Config(
            "flow-field has no exact reference; use `run`".into(),
        )),
        ScenarioKind::OpoUndepleted => oracle_opo(cfg),
        ScenarioKind::PumpDepletion => oracle_depletion(cfg),
        ScenarioKind::Kerr => oracle_kerr(cfg),
    }
}

fn estimator_config(cfg: &ScenarioConfig, descriptor: String) -> EstimatorConfig {
    let mut est = EstimatorConfig::new(
        cfg.numerics.trajectories,
        cfg.delta_omega(),
        cfg.numerics.seed,
    );
    est.escape_threshold = cfg.escape_threshold();
    est.descriptor = descriptor;
    est
}

fn alpha_amplitude(cfg: &ScenarioConfig) -> Complex64 {
    let mag = cfg.model.alpha0.unwrap_or(0.0);
    let vartheta = cfg.model.vartheta.unwrap_or(0.0);
    Complex64::from_polar(mag, vartheta)
}

/// Evolve one initial sample per substream through the preparation stage;
/// the samples coincide with the QFI estimator's for the same seed.
fn prepared_ensemble<P: Model + Sync>(
    spec: &GaussianWignerSpec,
    preparation: &P,
    duration: f64,
    step: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<PhaseSpacePoint>> {
    (0..n as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = substream(seed, index);
            let x0 = spec.sample(&mut rng);
            if duration == 0.0 {
                Ok(x0)
            } else {
                evolve(preparation, &x0, 0.0, duration, step)
            }
        })
        .collect()
}

fn run_opo(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let g = cfg.model.g.expect("validated");
    let theta = cfg.model.theta.expect("validated");
    let alpha0 = cfg.model.alpha0.expect("validated");
    let vartheta = cfg.model.vartheta.unwrap_or(0.0);
    let params = OpoParams::new(g, theta)?;
    let layout = ModeLayout::single_mode();
    let spec = GaussianWignerSpec::coherent(layout.clone(), &[alpha_amplitude(cfg)])?;
    let dt = cfg.protocol.delta_t;
    let per_dt2 = 1.0 / (dt * dt);

    let mut table = Table::new(vec![
        "source",
        "gt1",
        "qfi_tw",
        "qfi_tw_stderr",
        "qfi_variance_method",
        "qfi_variance_method_stderr",
        "qfi_oracle",
        "mean_n",
        "mean_n_stderr",
    ]);
    let mut non_finite = 0;
    for &t1 in &cfg.protocol.t1_grid {
        let grid = g * t1;
        let protocol = Protocol::new(
            layout.clone(),
            Stage::new(Preparation::Opo(params), t1, cfg.stage_step(t1)),
            Stage::new(
                Encoding::single(EncodingKind::PhaseRotation),
                dt,
                cfg.stage_step(dt),
            ),
            cfg.protocol.omega_op,
        )?;
        let est_cfg = estimator_config(cfg, format!("opo-undepleted gt1={grid}"));
        let estimate = crate::estimator::estimate_qfi(&spec, &protocol, &est_cfg)
            .map_err(|e| e.at_grid_point(grid))?;
        non_finite += estimate.n_flagged;
        let samples = prepared_ensemble(
            &spec,
            &Preparation::Opo(params),
            t1,
            cfg.stage_step(t1),
            cfg.numerics.trajectories,
            cfg.numerics.seed,
        )
        .map_err(|e| e.at_grid_point(grid))?;
        let occupancy = number_moments(&samples, 0)?;
        table.push(vec![
            Table::text("tw"),
            Table::number(grid),
            Table::number(estimate.value * per_dt2),
            Table::number(estimate.std_error * per_dt2),
            Table::number(4.0 * occupancy.variance),
            Table::number(4.0 * occupancy.variance_stderr),
            Table::number(opo_qfi_analytic(alpha0, vartheta, &params, t1)),
            Table::number(occupancy.mean),
            Table::number(occupancy.mean_stderr),
        ]);
    }
    Ok(ScenarioResult { table, non_finite })
}

fn oracle_opo(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let g = cfg.model.g.expect("validated");
    let params = OpoParams::new(g, cfg.model.theta.expect("validated"))?;
    let alpha0 = cfg.model.alpha0.expect("validated");
    let vartheta = cfg.model.vartheta.unwrap_or(0.0);
    let mut table = Table::new(vec!["source", "gt1", "qfi_oracle"]);
    for &t1 in &cfg.protocol.t1_grid {
        table.push(vec![
            Table::text("oracle"),
            Table::number(g * t1),
            Table::number(opo_qfi_analytic(alpha0, vartheta, &params, t1)),
        ]);
    }
    Ok(ScenarioResult {
        table,
        non_finite: 0,
    })
}

fn run_depletion(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let chi = cfg.model.chi.expect("validated");
    let theta = cfg.model.theta.expect("validated");
    let beta0 = cfg.model.beta0.expect("validated");
    let params = DepletionParams::new(chi, theta)?;
    let layout = ModeLayout::cavity_pump();
    let spec = GaussianWignerSpec::coherent(
        layout.clone(),
        &[alpha_amplitude(cfg), Complex64::new(beta0, 0.0)],
    )?;
    let dt = cfg.protocol.delta_t;
    let per_dt2 = 1.0 / (dt * dt);
    let mask_alpha = ModeMask::single(2, 0)?;
    let mask_beta = ModeMask::single(2, 1)?;

    let mut table = Table::new(vec![
        "source",
        "chit",
        "qfi_tw",
        "qfi_tw_stderr",
        "qfi_variance_method",
        "qfi_variance_method_stderr",
        "qfi_partial_alpha",
        "qfi_partial_alpha_stderr",
        "qfi_partial_beta",
        "qfi_partial_beta_stderr",
        "mean_n_alpha",
        "mean_n_alpha_stderr",
        "mean_n_beta",
        "mean_n_beta_stderr",
        "conserved_sum",
    ]);
    let mut non_finite = 0;
    for &t1 in &cfg.protocol.t1_grid {
        let grid = chi * t1;
        let protocol = Protocol::new(
            layout.clone(),
            Stage::new(Preparation::Depletion(params), t1, cfg.stage_step(t1)),
            Stage::new(
                Encoding::new(EncodingKind::PhaseRotation, 0, 2)?,
                dt,
                cfg.stage_step(dt),
            ),
            cfg.protocol.omega_op,
        )?;
        let est_cfg = estimator_config(cfg, format!("pump-depletion chit={grid}"));
        let projections = collect_projections(&spec, &protocol, &est_cfg)
            .map_err(|e| e.at_grid_point(grid))?;
        let full = estimate_from_projections(&projections, 2, &est_cfg, None)
            .map_err(|e| e.at_grid_point(grid))?;
        let partial_alpha = estimate_from_projections(&projections, 2, &est_cfg, Some(&mask_alpha))
            .map_err(|e| e.at_grid_point(grid))?;
        let partial_beta = estimate_from_projections(&projections, 2, &est_cfg, Some(&mask_beta))
            .map_err(|e| e.at_grid_point(grid))?;
        non_finite += full.n_flagged;

        let samples = prepared_ensemble(
            &spec,
            &Preparation::Depletion(params),
            t1,
            cfg.stage_step(t1),
            cfg.numerics.trajectories,
            cfg.numerics.seed,
        )
        .map_err(|e| e.at_grid_point(grid))?;
        let cavity = number_moments(&samples, 0)?;
        let pump = number_moments(&samples, 1)?;
        // raw symbol |alpha|^2 + 2 |beta|^2 is conserved trajectory by
        // trajectory, so its ensemble mean is grid-independent
        let conserved: Vec<f64> = samples
            .iter()
            .map(|p| p.amplitude(0).norm_sqr() + 2.0 * p.amplitude(1).norm_sqr())
            .collect();
        table.push(vec![
            Table::text("tw"),
            Table::number(grid),
            Table::number(full.value * per_dt2),
            Table::number(full.std_error * per_dt2),
            Table::number(4.0 * cavity.variance),
            Table::number(4.0 * cavity.variance_stderr),
            Table::number(partial_alpha.value * per_dt2),
            Table::number(partial_alpha.std_error * per_dt2),
            Table::number(partial_beta.value * per_dt2),
            Table::number(partial_beta.std_error * per_dt2),
            Table::number(cavity.mean),
            Table::number(cavity.mean_stderr),
            Table::number(pump.mean),
            Table::number(pump.mean_stderr),
            Table::number(numeric::mean(&conserved)),
        ]);
    }
    Ok(ScenarioResult { table, non_finite })
}

fn oracle_depletion(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let chi = cfg.model.chi.expect("validated");
    let theta = cfg.model.theta.expect("validated");
    let alpha0 = alpha_amplitude(cfg);
    let beta0 = cfg.model.beta0.expect("validated");
    let n_cut_a = cfg.n_cut_for(alpha0.norm());
    let n_cut_b = cfg.n_cut_for(beta0.abs());
    if n_cut_a * n_cut_b > crate::fock::MAX_PRODUCT_DIM {
        return Err(Error::Config(format!(
            "two-mode exact reference needs {n_cut_a} x {n_cut_b} levels; it is \
             only feasible for small occupations (product of truncations <= {})",
            crate::fock::MAX_PRODUCT_DIM
        )));
    }
    let psi_a = FockState::coherent(alpha0, n_cut_a)?;
    let psi_b = FockState::coherent(Complex64::new(beta0, 0.0), n_cut_b)?;
    let psi0 = FockState::product(&psi_a, &psi_b)?;
    let coupling = Hamiltonian::depletion(chi, theta, n_cut_a, n_cut_b)?;
    let dt = cfg.protocol.delta_t;
    let per_dt2 = 1.0 / (dt * dt);

    let mut table = Table::new(vec![
        "source",
        "chit",
        "qfi_oracle",
        "mean_n_alpha",
        "mean_n_beta",
        "conserved_sum",
    ]);
    for &t1 in &cfg.protocol.t1_grid {
        let grid = chi * t1;
        let protocol = FockProtocol::new(
            coupling.clone(),
            t1,
            cfg.stage_step(t1),
            EncodingKind::PhaseRotation,
            0,
            cfg.protocol.omega_op,
            dt,
            cfg.stage_step(dt),
        )?;
        let qfi = protocol
            .qfi_fidelity(&psi0, ORACLE_FIDELITY_DELTA)
            .map_err(|e| e.at_grid_point(grid))?;
        let prepared = evolve_exact(&coupling, &psi0, t1, cfg.stage_step(t1))
            .map_err(|e| e.at_grid_point(grid))?;
        let n_a = exact_moment(&prepared, ModeOperator::Number, 0)?;
        let n_b = exact_moment(&prepared, ModeOperator::Number, 1)?;
        table.push(vec![
            Table::text("oracle"),
            Table::number(grid),
            Table::number(qfi * per_dt2),
            Table::number(n_a),
            Table::number(n_b),
            Table::number(n_a + 2.0 * n_b),
        ]);
    }
    Ok(ScenarioResult {
        table,
        non_finite: 0,
    })
}

fn kerr_params(cfg: &ScenarioConfig) -> Result<KerrParams> {
    let chi = cfg.model.chi.expect("validated");
    let alpha0 = cfg.model.alpha0.expect("validated");
    let omega0 = cfg
        .model
        .omega0
        .unwrap_or_else(|| KerrParams::frozen_frame_omega0(chi, alpha0 * alpha0));
    KerrParams::new(chi, omega0)
}

fn run_kerr(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let params = kerr_params(cfg)?;
    let alpha0 = alpha_amplitude(cfg);
    let layout = ModeLayout::single_mode();
    let spec = GaussianWignerSpec::coherent(layout.clone(), &[alpha0])?;
    let n_cut = cfg.n_cut_for(alpha0.norm());
    let psi0 = FockState::coherent(alpha0, n_cut)?;
    let exact_h = Hamiltonian::kerr(params.chi, params.omega0, n_cut)?;
    let dt = cfg.protocol.delta_t;
    let per_dt2 = 1.0 / (dt * dt);

    let mut table = Table::new(vec![
        "source",
        "chit",
        "qfi_tw",
        "qfi_tw_stderr",
        "qfi_oracle",
        "mom_inverse_varX",
        "mean_n",
        "mean_n_stderr",
    ]);
    let mut non_finite = 0;
    for &t1 in &cfg.protocol.t1_grid {
        let grid = params.chi * t1;
        let protocol = Protocol::new(
            layout.clone(),
            Stage::new(Preparation::Kerr(params), t1, cfg.stage_step(t1)),
            Stage::new(
                Encoding::single(EncodingKind::QuadratureDisplacement),
                dt,
                cfg.stage_step(dt),
            ),
            cfg.protocol.omega_op,
        )?;
        let est_cfg = estimator_config(cfg, format!("kerr chit={grid}"));
        let estimate = crate::estimator::estimate_qfi(&spec, &protocol, &est_cfg)
            .map_err(|e| e.at_grid_point(grid))?;
        non_finite += estimate.n_flagged;

        let evolved =
            evolve_exact(&exact_h, &psi0, t1, cfg.stage_step(t1)).map_err(|e| e.at_grid_point(grid))?;
        let qfi_oracle = qfi_unitary_generator(&evolved, ModeOperator::QuadratureY, 0)?;
        let var_x = exact_variance(&evolved, ModeOperator::QuadratureX, 0)?;

        let samples = prepared_ensemble(
            &spec,
            &Preparation::Kerr(params),
            t1,
            cfg.stage_step(t1),
            cfg.numerics.trajectories,
            cfg.numerics.seed,
        )
        .map_err(|e| e.at_grid_point(grid))?;
        let occupancy = number_moments(&samples, 0)?;
        table.push(vec![
            Table::text("tw"),
            Table::number(grid),
            Table::number(estimate.value * per_dt2),
            Table::number(estimate.std_error * per_dt2),
            Table::number(qfi_oracle),
            Table::number(1.0 / var_x),
            Table::number(occupancy.mean),
            Table::number(occupancy.mean_stderr),
        ]);
    }
    Ok(ScenarioResult { table, non_finite })
}

fn oracle_kerr(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let params = kerr_params(cfg)?;
    let alpha0 = alpha_amplitude(cfg);
    let n_cut = cfg.n_cut_for(alpha0.norm());
    let psi0 = FockState::coherent(alpha0, n_cut)?;
    let exact_h = Hamiltonian::kerr(params.chi, params.omega0, n_cut)?;

    let mut table = Table::new(vec![
        "source",
        "chit",
        "qfi_oracle",
        "mom_inverse_varX",
        "mean_n",
    ]);
    for &t1 in &cfg.protocol.t1_grid {
        let grid = params.chi * t1;
        let evolved = evolve_exact(&exact_h, &psi0, t1, cfg.stage_step(t1))
            .map_err(|e| e.at_grid_point(grid))?;
        table.push(vec![
            Table::text("oracle"),
            Table::number(grid),
            Table::number(qfi_unitary_generator(&evolved, ModeOperator::QuadratureY, 0)?),
            Table::number(1.0 / exact_variance(&evolved, ModeOperator::QuadratureX, 0)?),
            Table::number(exact_moment(&evolved, ModeOperator::Number, 0)?),
        ]);
    }
    Ok(ScenarioResult {
        table,
        non_finite: 0,
    })
}

fn run_flow_field(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let params = OpoParams::new(
        cfg.model.g.expect("validated"),
        cfg.model.theta.expect("validated"),
    )?;
    let layout = ModeLayout::single_mode();
    let spec = GaussianWignerSpec::coherent(layout.clone(), &[alpha_amplitude(cfg)])?;
    let t1 = cfg.protocol.t1_grid[0];
    let dt = cfg.protocol.delta_t;
    let dw = cfg.delta_omega();
    let full = Protocol::new(
        layout.clone(),
        Stage::new(Preparation::Opo(params), t1, cfg.stage_step(t1)),
        Stage::new(
            Encoding::single(EncodingKind::PhaseRotation),
            dt,
            cfg.stage_step(dt),
        ),
        cfg.protocol.omega_op,
    )?;
    // encoding-only protocol: arrows at a fixed point in the flow
    let encode_only = Protocol::new(
        layout.clone(),
        Stage::new(Preparation::Idle { modes: 1 }, 0.0, 1.0),
        Stage::new(
            Encoding::single(EncodingKind::PhaseRotation),
            dt,
            cfg.stage_step(dt),
        ),
        cfg.protocol.omega_op,
    )?;

    struct FlowRow {
        initial: (PhaseSpacePoint, Vec<f64>),
        prepared: (PhaseSpacePoint, Vec<f64>),
        rewound: (PhaseSpacePoint, Vec<f64>),
    }

    let rows: Vec<FlowRow> = (0..cfg.numerics.trajectories as u64)
        .into_par_iter()
        .map(|index| -> Result<FlowRow> {
            let mut rng = substream(cfg.numerics.seed, index);
            let x0 = spec.sample(&mut rng);
            let at_origin = parametric_derivative(&encode_only, &x0, dw)?;
            let x1 = full.run_preparation(&x0)?;
            let at_prepared = parametric_derivative(&encode_only, &x1, dw)?;
            let pulled = parametric_derivative(&full, &x0, dw)?;
            let rewound_point = full.rewind(&full.run(&x0, cfg.protocol.omega_op)?)?;
            Ok(FlowRow {
                initial: (x0, at_origin.derivative),
                prepared: (x1, at_prepared.derivative),
                rewound: (rewound_point, pulled.derivative),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(vec![
        "source",
        "stage",
        "trajectory",
        "x",
        "y",
        "dx_domega",
        "dy_domega",
    ]);
    let stages: [(&str, fn(&FlowRow) -> &(PhaseSpacePoint, Vec<f64>)); 3] = [
        ("initial", |r| &r.initial),
        ("prepared", |r| &r.prepared),
        ("rewound", |r| &r.rewound),
    ];
    for (stage, pick) in stages {
        for (index, row) in rows.iter().enumerate() {
            let (point, arrow) = pick(row);
            table.push(vec![
                Table::text("tw"),
                Table::text(stage),
                index.to_string(),
                Table::number(point.coords()[0]),
                Table::number(point.coords()[1]),
                Table::number(arrow[0]),
                Table::number(arrow[1]),
            ]);
        }
    }
    Ok(ScenarioResult {
        table,
        non_finite: 0,
    })
}
