//! The adaptive loop: train, estimate, mark, enhance, repeat.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::DualSettings;
use crate::enhancement::{
    enhance, init_uniform, solve_dual_output_weights, solve_output_weights, EnhanceOptions, EnhanceReport,
    InitLayout, NewWeightInit, OutputSolveReport,
};
use crate::error::{AneError, Result};
use crate::estimators::{
    ls_indicators, recover_flux, recovery_indicators, EstimatorKind, FluxWeight, IndicatorReport, Marking,
};
use crate::functionals::{relative_errors, relative_flux_error, DualEnergy, EnergyBreakdown, PrimalEnergy, RelativeErrors};
use crate::linalg::SolveInfo;
use crate::partition::{merge_small_cells, physical_partition, DirectionMode};
use crate::problem::PdeProblem;
use crate::quadrature::{build_mesh, Domain, MeshResolution};
use crate::spline_net::NetworkSnapshot;
use crate::trainer::{train, StopReason, TrainConfig, TrainReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AneConfig {
    /// Stop once the relative estimator drops below this value.
    pub tolerance: f64,
    pub marking: Marking,
    pub estimator: EstimatorKind,
    pub flux_weight: FluxWeight,
    pub start_neurons: usize,
    pub max_stages: usize,
    pub max_neurons: usize,
    pub degree: u32,
    pub train: TrainConfig,
    pub flux_train: TrainConfig,
    pub resolution: MeshResolution,
    /// Reference mesh for reported errors is the training mesh refined by this factor.
    pub reference_refinement: usize,
    pub seed: u64,
    /// Random shift of the initial hyperplanes, as a fraction of their spacing.
    pub init_jitter: f64,
    pub init_layout: InitLayout,
    pub direction: DirectionMode,
    pub new_weights: NewWeightInit,
    /// Solve output weights in the local nodal basis for one-dimensional problems.
    pub nodal_1d: bool,
    /// Cells with fewer points are merged into a neighbour before marking.
    pub min_cell_points: usize,
    /// Points per direction of the plotting grid.
    pub plot_grid: usize,
}

impl Default for AneConfig {
    fn default() -> Self {
        AneConfig {
            tolerance: 0.1,
            marking: Marking::Average,
            estimator: EstimatorKind::Recovery,
            flux_weight: FluxWeight::Identity,
            start_neurons: 10,
            max_stages: 10,
            max_neurons: 512,
            degree: 1,
            train: TrainConfig::default(),
            flux_train: Self::default_flux_train(),
            resolution: MeshResolution::Interval { m: 1000 },
            reference_refinement: 2,
            seed: 0,
            init_jitter: 0.1,
            init_layout: InitLayout::Uniform,
            direction: DirectionMode::MinVariance,
            new_weights: NewWeightInit::Resolve,
            nodal_1d: true,
            min_cell_points: 3,
            plot_grid: 101,
        }
    }
}

impl AneConfig {
    /// Flux recovery starts from a least-squares fit, so it gets a smaller cap.
    pub fn default_flux_train() -> TrainConfig {
        TrainConfig::default().with_max_iter(20_000)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AneError::InvalidArgument(m.into()));
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.max_stages == 0 {
            return bad("max_stages must be at least 1");
        }
        if self.start_neurons == 0 || self.start_neurons > self.max_neurons {
            return bad("start_neurons must lie in [1, max_neurons]");
        }
        if self.degree == 0 {
            return bad("degree must be at least 1");
        }
        if self.reference_refinement == 0 {
            return bad("reference_refinement must be at least 1");
        }
        if !(0.0..1.0).contains(&self.init_jitter) {
            return bad("init_jitter must lie in [0, 1)");
        }
        if self.plot_grid < 2 {
            return bad("plot_grid must be at least 2");
        }
        self.marking.validate()?;
        self.train.validate()?;
        self.flux_train.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStop {
    ToleranceMet,
    MaxStages,
    MaxNeurons,
    /// Training produced a non-finite loss; the report holds the stages before it.
    Diverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Adaptive,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxSummary {
    pub weight: FluxWeight,
    pub initial_loss: f64,
    pub loss: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub neurons: usize,
    /// `(d + 1) n + 1`.
    pub params: usize,
    /// Energy right after the output-weight solve, before training.
    pub initial_loss: f64,
    pub initial_errors: Option<RelativeErrors>,
    pub output_solve: Option<OutputSolveReport>,
    pub loss: f64,
    pub energy: EnergyBreakdown,
    pub train: TrainReport,
    pub flux: FluxSummary,
    /// Cells before and after merging small ones.
    pub raw_cells: usize,
    pub cells: usize,
    pub indicators: IndicatorReport,
    pub errors: Option<RelativeErrors>,
    /// `‖u_𝒯‖_a` on the training mesh.
    pub solution_energy_norm: f64,
    /// `ξ / ‖u_𝒯‖_a`.
    pub estimator_over_energy_norm: f64,
    /// Neurons added after this stage, if any.
    pub enhancement: Option<EnhanceReport>,
    pub wall_time_secs: f64,
    pub network: NetworkSnapshot,
    pub flux_network: NetworkSnapshot,
    pub network_path: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub case: String,
    pub mode: RunMode,
    pub config: AneConfig,
    pub domain: Domain,
    pub stages: Vec<StageReport>,
    pub stop_reason: RunStop,
    pub error: Option<String>,
    pub plateau_rule: String,
    pub parallel: bool,
    pub wall_time_secs: f64,
}

impl RunReport {
    pub fn final_stage(&self) -> Option<&StageReport> {
        self.stages.last()
    }

    pub fn neuron_counts(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.neurons).collect()
    }
}

/// Run the adaptive method on `problem`.
pub fn ane_run(case: &str, problem: &PdeProblem, cfg: &AneConfig) -> Result<RunReport> {
    ane_run_with(case, problem, cfg, RunMode::Adaptive, &mut |_| {})
}

/// One stage with `n` uniformly placed neurons.
pub fn fixed_run(case: &str, problem: &PdeProblem, n: usize, cfg: &AneConfig) -> Result<RunReport> {
    let cfg = AneConfig {
        start_neurons: n,
        max_stages: 1,
        max_neurons: cfg.max_neurons.max(n),
        ..cfg.clone()
    };
    ane_run_with(case, problem, &cfg, RunMode::Fixed, &mut |_| {})
}

/// Like [`ane_run`], calling `on_stage` after every completed stage.
pub fn ane_run_with(
    case: &str,
    problem: &PdeProblem,
    cfg: &AneConfig,
    mode: RunMode,
    on_stage: &mut dyn FnMut(&StageReport),
) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mesh = build_mesh(&problem.domain, cfg.resolution)?;
    let reference = build_mesh(&problem.domain, cfg.resolution.refined(cfg.reference_refinement))?;
    let primal = PrimalEnergy::new(problem, &mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = init_uniform(
        &problem.domain,
        cfg.start_neurons,
        cfg.degree,
        cfg.init_layout,
        cfg.init_jitter,
        &mut rng,
    )?;
    let (mut net, solve) = solve_output_weights(problem, &mesh, &init, cfg.nodal_1d)?;
    let mut pending_solve = Some(solve);
    let opts = EnhanceOptions {
        direction: cfg.direction,
        weights: cfg.new_weights,
        nodal_1d: cfg.nodal_1d,
    };

    let mut report = RunReport {
        case: case.to_string(),
        mode,
        config: cfg.clone(),
        domain: problem.domain.clone(),
        stages: Vec::new(),
        stop_reason: RunStop::MaxStages,
        error: None,
        plateau_rule: String::new(),
        parallel: crate::par::is_parallel(),
        wall_time_secs: 0.0,
    };
    let exact = problem.exact.is_some() && problem.exact_grad.is_some();

    for stage in 1..=cfg.max_stages {
        let t0 = Instant::now();
        let initial_loss = primal.evaluate(&net, false).0.total;
        let initial_errors = if exact { Some(relative_errors(problem, &reference, &net)?) } else { None };
        let trained = train(&net, &primal, &cfg.train).and_then(|(n, tr)| {
            let flux = recover_flux(problem, &mesh, &n, cfg.flux_weight, &cfg.flux_train)?;
            Ok((n, tr, flux))
        });
        let (trained, train_report, flux) = match trained {
            Ok(v) => v,
            Err(e @ AneError::NonFiniteLoss { .. }) => {
                report.stop_reason = RunStop::Diverged;
                report.error = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        net = trained;
        report.plateau_rule = train_report.plateau_rule.clone();
        let energy = primal.evaluate(&net, false).0;
        let raw = physical_partition(&net, &mesh)?;
        let partition = merge_small_cells(&raw, &net, &mesh, cfg.min_cell_points);
        let mut indicators = match cfg.estimator {
            EstimatorKind::Recovery => recovery_indicators(problem, &mesh, &partition, &net, &flux)?,
            EstimatorKind::LeastSquares => ls_indicators(problem, &mesh, &partition, &net, &flux)?,
        };
        let errors = if exact { Some(relative_errors(problem, &reference, &net)?) } else { None };
        let norm_a = primal.quadratic_form(&net).sqrt();

        let converged = indicators.relative < cfg.tolerance;
        let mut stop = None;
        let mut enhancement = None;
        let mut next = None;
        if converged {
            stop = Some(RunStop::ToleranceMet);
        } else if stage == cfg.max_stages {
            stop = Some(RunStop::MaxStages);
        } else {
            indicators.mark(cfg.marking);
            if indicators.marked.is_empty() {
                stop = Some(RunStop::MaxStages);
            } else if net.neurons() + indicators.marked.len() > cfg.max_neurons {
                stop = Some(RunStop::MaxNeurons);
            } else {
                let (grown, rep) = enhance(&net, &partition, &indicators.marked, problem, &mesh, &opts)?;
                next = Some(grown);
                enhancement = Some(rep);
            }
        }

        let stage_report = StageReport {
            stage,
            neurons: net.neurons(),
            params: net.param_count(),
            initial_loss,
            initial_errors,
            output_solve: pending_solve.take(),
            loss: train_report.final_loss,
            energy,
            flux: FluxSummary {
                weight: flux.weight,
                initial_loss: flux.initial_loss,
                loss: flux.loss,
                iterations: flux.train.iterations,
                stop_reason: flux.train.stop_reason,
            },
            train: train_report,
            raw_cells: raw.len(),
            cells: partition.len(),
            estimator_over_energy_norm: indicators.estimator / norm_a,
            indicators,
            errors,
            solution_energy_norm: norm_a,
            enhancement: enhancement.clone(),
            wall_time_secs: t0.elapsed().as_secs_f64(),
            network: net.snapshot(),
            flux_network: flux.net.snapshot(),
            network_path: None,
        };
        on_stage(&stage_report);
        report.stages.push(stage_report);
        if let Some(s) = stop {
            report.stop_reason = s;
            break;
        }
        if let Some(grown) = next {
            net = grown;
            pending_solve = enhancement.and_then(|e| e.solve);
        }
    }
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub neurons: usize,
    pub degree: u32,
    pub solve: SolveInfo,
    /// `J*_𝒯` after the output-weight solve.
    pub initial_energy: EnergyBreakdown,
    pub energy: EnergyBreakdown,
    pub train: TrainReport,
    /// `‖σ − σ_𝒯‖_{a*} / ‖σ‖_{a*}` on the reference mesh, before and after training.
    pub initial_rel_flux_error: Option<f64>,
    pub rel_flux_error: Option<f64>,
    pub network: NetworkSnapshot,
}

/// Minimize the complementary functional over flux networks with
/// uniformly placed hyperplanes.
pub fn dual_run(problem: &PdeProblem, settings: &DualSettings, cfg: &AneConfig) -> Result<DualReport> {
    cfg.validate()?;
    let mesh = build_mesh(&problem.domain, cfg.resolution)?;
    let reference = build_mesh(&problem.domain, cfg.resolution.refined(cfg.reference_refinement))?;
    let dual = DualEnergy::new(problem, &mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let layout = init_uniform(
        &problem.domain,
        settings.neurons,
        settings.degree,
        cfg.init_layout,
        cfg.init_jitter,
        &mut rng,
    )?
    .with_out_dim(problem.dim())?;
    let (init, solve) = solve_dual_output_weights(problem, &mesh, &layout)?;
    let initial_energy = dual.evaluate(&init, false).0;
    let train_cfg = cfg.train.clone().with_learning_rate(settings.learning_rate);
    let (net, train_report) = train(&init, &dual, &train_cfg)?;
    let energy = dual.evaluate(&net, false).0;
    let exact = problem.exact.is_some() && problem.exact_grad.is_some();
    let (initial_rel_flux_error, rel_flux_error) = if exact {
        (
            Some(relative_flux_error(problem, &reference, &init)?),
            Some(relative_flux_error(problem, &reference, &net)?),
        )
    } else {
        (None, None)
    };
    Ok(DualReport {
        neurons: net.neurons(),
        degree: net.degree(),
        solve,
        initial_energy,
        energy,
        train: train_report,
        initial_rel_flux_error,
        rel_flux_error,
        network: net.snapshot(),
    })
}
