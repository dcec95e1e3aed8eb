//! Experiment configs and runs: build a CT problem, solve it, write the
//! trace, the image and a summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ct::{default_phantom, make_problem, output, CtProblem, NoiseSpec, ProblemKind, ProblemSpec, Shape};
use crate::error::{Error, Result};
use crate::scaling::{build_scaling, Metric, ScalingOp};
use crate::solvers::{
    solve_lbfgsb, solve_spg, solve_tron, CauchyParams, CgSettings, LbfgsParams, SolveResult, SolveStatus,
    SolverConfig, SolverTrace, SpgParams, TrustRegionParams, WolfeParams, TRACE_HEADER,
};

/// Side length of the cartesian raster written to `image.pgm`.
pub const IMAGE_SIZE: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    #[serde(default = "default_n_r")]
    pub n_r: usize,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    #[serde(default = "default_n_det")]
    pub n_det: usize,
    /// Defaults to 1e-2 for the quadratic problem and 1e-4 for reconstruction.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Adds Gaussian noise to the data when set.
    #[serde(default)]
    pub noise_seed: Option<u64>,
    /// Noise standard deviation relative to the largest datum.
    #[serde(default = "default_noise_level")]
    pub noise_level: f64,
    #[serde(default)]
    pub phantom: Option<Vec<Shape>>,
}

fn default_n_r() -> usize {
    32
}
fn default_n_theta() -> usize {
    64
}
fn default_n_det() -> usize {
    48
}
fn default_delta() -> f64 {
    0.1
}
fn default_noise_level() -> f64 {
    0.01
}

impl ProblemSection {
    pub fn new(kind: ProblemKind) -> Self {
        Self {
            kind,
            n_r: default_n_r(),
            n_theta: default_n_theta(),
            n_det: default_n_det(),
            lambda: None,
            delta: default_delta(),
            noise_seed: None,
            noise_level: default_noise_level(),
            phantom: None,
        }
    }

    pub fn to_spec(&self) -> ProblemSpec {
        let desk = ProblemSpec::desk(self.kind);
        ProblemSpec {
            kind: self.kind,
            n_r: self.n_r,
            n_theta: self.n_theta,
            n_det: self.n_det,
            lambda: self.lambda.unwrap_or(desk.lambda),
            delta: self.delta,
            noise: self.noise_seed.map(|seed| NoiseSpec {
                seed,
                sigma_rel: self.noise_level,
            }),
            phantom: self.phantom.clone().unwrap_or_else(default_phantom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverName {
    Lbfgsb,
    Tron,
    Spg,
}

impl SolverName {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverName::Lbfgsb => "lbfgsb",
            SolverName::Tron => "tron",
            SolverName::Spg => "spg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub name: SolverName,
    #[serde(default)]
    pub scaled: bool,
    /// Name used in `compare.csv`; defaults to `name` or `name-scaled`.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub max_time: Option<f64>,
    /// Defaults to 1e-5 for the quadratic problem and 1e-7 for reconstruction.
    #[serde(default)]
    pub pg_rtol: Option<f64>,
    #[serde(default)]
    pub cg: CgSettings,
    #[serde(default)]
    pub cauchy: CauchyParams,
    #[serde(default)]
    pub wolfe: WolfeParams,
    #[serde(default)]
    pub tr: TrustRegionParams,
    #[serde(default)]
    pub spg: SpgParams,
    #[serde(default)]
    pub lbfgs: LbfgsParams,
}

impl SolverSection {
    pub fn new(name: SolverName, scaled: bool) -> Self {
        Self {
            name,
            scaled,
            label: None,
            max_iter: None,
            max_time: None,
            pg_rtol: None,
            cg: CgSettings::default(),
            cauchy: CauchyParams::default(),
            wolfe: WolfeParams::default(),
            tr: TrustRegionParams::default(),
            spg: SpgParams::default(),
            lbfgs: LbfgsParams::default(),
        }
    }

    pub fn label(&self) -> String {
        match &self.label {
            Some(l) => l.clone(),
            None if self.scaled => format!("{}-scaled", self.name.as_str()),
            None => self.name.as_str().to_string(),
        }
    }

    pub fn solver_config(&self, kind: ProblemKind) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            max_time: self.max_time,
            pg_rtol: self.pg_rtol.unwrap_or(match kind {
                ProblemKind::Quadratic => 1e-5,
                ProblemKind::Recon => 1e-7,
            }),
            cg: self.cg,
            cauchy: self.cauchy,
            wolfe: self.wolfe,
            tr: self.tr,
            spg: self.spg,
            lbfgs: self.lbfgs,
        }
    }
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_time: Option<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.solver_config().validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(out) = &ov.out {
            self.output_dir = Some(out.clone());
        }
        if let Some(seed) = ov.seed {
            self.problem.noise_seed = Some(seed);
        }
        if let Some(t) = ov.max_time {
            self.solver.max_time = Some(t);
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.solver_config(self.problem.kind)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub label: String,
    pub solver: String,
    pub scaled: bool,
    pub status: SolveStatus,
    pub iterations: usize,
    pub final_f: f64,
    pub pg_ratio: f64,
    pub cg_total: usize,
    pub wall_time: f64,
}

pub struct RunOutput {
    pub summary: Summary,
    pub result: SolveResult,
}

impl RunOutput {
    /// 0 when converged, 2 when stopped by a budget or a stall.
    pub fn exit_code(&self) -> i32 {
        if self.result.status.is_converged() {
            0
        } else {
            2
        }
    }
}

/// The scaling built from the block-circulant Hessian approximation.
pub fn problem_scaling(problem: &CtProblem) -> Result<ScalingOp> {
    build_scaling(&problem.model.hessian_approx_bc()?)
}

/// Solve an already built problem with the given solver section.
pub fn solve_problem(
    problem: &CtProblem,
    solver: &SolverSection,
    cfg: &SolverConfig,
    scaling: Option<&ScalingOp>,
) -> Result<RunOutput> {
    let start = Instant::now();
    let metric: Option<&dyn Metric> = if solver.scaled {
        Some(scaling.ok_or_else(|| Error::Config("scaled run without a scaling operator".into()))?)
    } else {
        None
    };
    let model = &problem.model;
    let result = match solver.name {
        SolverName::Lbfgsb => solve_lbfgsb(model, &problem.x0, cfg, metric)?,
        SolverName::Tron => solve_tron(model, &problem.x0, cfg, metric)?,
        SolverName::Spg => solve_spg(model, &problem.x0, cfg, metric)?,
    };
    let summary = Summary {
        label: solver.label(),
        solver: solver.name.as_str().to_string(),
        scaled: solver.scaled,
        status: result.status,
        iterations: result.iterations,
        final_f: result.f,
        pg_ratio: result.pg_ratio(),
        cg_total: result.cg_total,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { summary, result })
}

/// Build the problem, solve it and write `trace.csv`, `image.pgm` and
/// `summary.json` to the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let solver_cfg = cfg.solver_config();
    solver_cfg.validate()?;
    let problem = make_problem(&cfg.problem.to_spec())?;
    let scaling = if cfg.solver.scaled {
        Some(problem_scaling(&problem)?)
    } else {
        None
    };
    let out = solve_problem(&problem, &cfg.solver, &solver_cfg, scaling.as_ref())?;
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    out.result.trace.write_csv(fs::File::create(dir.join("trace.csv"))?, None)?;
    output::save_image_pgm(&problem.grid, &out.result.x, IMAGE_SIZE, dir.join("image.pgm"))?;
    write_summary(&dir.join("summary.json"), &out.summary)?;
    Ok(out)
}

fn write_summary(path: &Path, summary: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Run several solvers on one problem and write a long-format `compare.csv`
/// (a `label` column followed by the trace columns) and `summary.json`.
///
/// Output goes to the first config's output directory.
pub fn compare(cfgs: &[ExperimentConfig]) -> Result<Vec<RunOutput>> {
    if cfgs.len() < 2 {
        return Err(Error::Config(format!("compare needs at least two configs, got {}", cfgs.len())));
    }
    let problem_section = &cfgs[0].problem;
    if let Some(i) = cfgs.iter().position(|c| &c.problem != problem_section) {
        return Err(Error::Config(format!("config {} has a different [problem] section than config 1", i + 1)));
    }
    let labels: Vec<String> = cfgs.iter().map(|c| c.solver.label()).collect();
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::Config(format!("duplicate solver label {l:?}; set solver.label")));
        }
    }
    let solver_cfgs: Vec<SolverConfig> = cfgs.iter().map(|c| c.solver_config()).collect();
    for c in &solver_cfgs {
        c.validate()?;
    }

    let problem = make_problem(&problem_section.to_spec())?;
    let scaling = if cfgs.iter().any(|c| c.solver.scaled) {
        Some(problem_scaling(&problem)?)
    } else {
        None
    };
    let outputs: Vec<Result<RunOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfgs
            .iter()
            .zip(&solver_cfgs)
            .map(|(c, sc)| {
                let problem = &problem;
                let scaling = scaling.as_ref();
                scope.spawn(move || solve_problem(problem, &c.solver, sc, scaling))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Internal("solver thread panicked".into()))))
            .collect()
    });
    let outputs: Vec<RunOutput> = outputs.into_iter().collect::<Result<_>>()?;

    let dir = cfgs[0].output_dir();
    fs::create_dir_all(&dir)?;
    let traces: Vec<(&str, &SolverTrace)> = outputs
        .iter()
        .map(|o| (o.summary.label.as_str(), &o.result.trace))
        .collect();
    write_compare_csv(fs::File::create(dir.join("compare.csv"))?, &traces)?;
    let summaries: Vec<&Summary> = outputs.iter().map(|o| &o.summary).collect();
    write_summary(&dir.join("summary.json"), &summaries)?;
    Ok(outputs)
}

pub fn write_compare_csv(w: impl std::io::Write, traces: &[(&str, &SolverTrace)]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    wr.write_field("label").map_err(fmt)?;
    wr.write_record(TRACE_HEADER).map_err(fmt)?;
    for (label, trace) in traces {
        trace.write_rows(&mut wr, Some(label))?;
    }
    wr.flush()?;
    Ok(())
}
