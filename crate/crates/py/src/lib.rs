//! Python bindings for the footstep planner: environment episodes, the noise
//! schedule, trained denoiser and value-net checkpoints, the planning step,
//! evaluation and the 1-D toy experiment.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use viaplan::ddpm::{self, NoiseSchedule, SampleOptions};
use viaplan::footworld::{self, episode_status, execute_step, Capability, EpisodeStatus, ScenarioSpec, TaskKind, WorldState};
use viaplan::harness::{self, Arm, ArtifactPaths, EvalConfig};
use viaplan::planner::{self, PlannerConfig};
use viaplan::procgen::{gen_trajectory, ProcGenParams};
use viaplan::rng::{self, Rng};
use viaplan::toy::{toy_experiment, ToyConfig};
use viaplan::{vf, Error, Plan};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Usage(_) | Error::Format(_) | Error::SchemaMismatch { .. } | Error::Dataset(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn task(name: &str) -> PyResult<TaskKind> {
    name.parse().map_err(to_py)
}

fn plan(v: &[f64]) -> PyResult<Plan> {
    Plan::from_slice(v).map_err(to_py)
}

/// Scenario description: `task` plus optional difficulty overrides.
#[pyclass(name = "Scenario", module = "viaplan_py")]
struct PyScenario {
    spec: ScenarioSpec,
}

#[pymethods]
impl PyScenario {
    /// `Scenario("obstacle", level=1.0)`; `task` may also be `"mixed"`.
    #[new]
    #[pyo3(signature = (task, level=None))]
    fn new(task: &str, level: Option<f64>) -> PyResult<Self> {
        let mut text = format!("task = {task}\n");
        if let Some(l) = level {
            text.push_str(&format!("level = {l}\n"));
        }
        Ok(Self { spec: ScenarioSpec::parse(&text).map_err(to_py)? })
    }

    /// Parses the `key = value` scenario file format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { spec: ScenarioSpec::parse(text).map_err(to_py)? })
    }

    #[getter]
    fn level(&self) -> f64 {
        self.spec.level()
    }

    #[getter]
    fn budget(&self) -> usize {
        self.spec.effective_budget()
    }

    /// Lays out one randomized episode; environment noise is drawn from `seed`.
    fn build(&self, seed: u64) -> PyResult<PyEpisode> {
        let s = self.spec.build(&mut rng::stream(seed, 2)).map_err(to_py)?;
        Ok(PyEpisode {
            budget: s.budget,
            tasks: harness::scenario_tasks(self.spec.kind),
            scene: s.scene,
            world: s.start,
            capability: Capability::default(),
            rng: rng::stream(seed, 3),
        })
    }

    fn to_text(&self) -> String {
        self.spec.to_text()
    }

    fn __repr__(&self) -> String {
        format!("Scenario({}, level={})", self.spec.kind, self.spec.level())
    }
}

/// A live episode in the stochastic footstep environment.
#[pyclass(name = "Episode", module = "viaplan_py")]
struct PyEpisode {
    scene: footworld::Scene,
    world: WorldState,
    capability: Capability,
    budget: usize,
    /// Tasks whose filters apply to this episode.
    tasks: Vec<TaskKind>,
    rng: Rng,
}

#[pymethods]
impl PyEpisode {
    #[getter]
    fn stance(&self) -> [f64; 3] {
        self.world.stance
    }

    #[getter]
    fn heading(&self) -> f64 {
        self.world.heading
    }

    #[getter]
    fn steps(&self) -> usize {
        self.world.steps
    }

    #[getter]
    fn alive(&self) -> bool {
        self.world.alive
    }

    #[getter]
    fn budget(&self) -> usize {
        self.budget
    }

    #[getter]
    fn waypoints(&self) -> Vec<[f64; 3]> {
        self.world.waypoints.iter().copied().collect()
    }

    /// `"running"`, `"success"` or `"failure"` (budget exhausted counts as failure).
    #[getter]
    fn status(&self) -> &'static str {
        match episode_status(&self.world, self.budget) {
            EpisodeStatus::Running => "running",
            EpisodeStatus::Success => "success",
            EpisodeStatus::Failure => "failure",
        }
    }

    /// Terrain height at a world position.
    fn height_at(&self, x: f64, y: f64) -> f64 {
        self.scene.height_at(x, y)
    }

    /// Diffusion conditioning vector for the current state.
    fn conditioning(&self) -> Vec<f64> {
        footworld::conditioning(&self.world, &self.scene)
    }

    /// Value-filter state vector for task `task`.
    fn vf_state(&self, task: &str) -> PyResult<Vec<f64>> {
        footworld::vf_state(&self.world, &self.scene, self::task(task)?).map_err(to_py)
    }

    /// Maps a character-frame point to world coordinates.
    fn to_world(&self, local: [f64; 3]) -> [f64; 3] {
        self.world.to_world(local)
    }

    /// Executes one footstep towards a character-frame target and returns
    /// `(reward, terminated, cause)`.
    fn step(&mut self, target: [f64; 3]) -> PyResult<(f64, bool, Option<String>)> {
        let (next, out) =
            execute_step(&self.world, &self.scene, &self.capability, target, &mut self.rng).map_err(to_py)?;
        self.world = next;
        Ok((out.reward, out.terminated, out.cause.map(|c| format!("{c:?}"))))
    }
}

/// Denoiser checkpoint (`<stem>.vpnn` + `<stem>.json`).
#[pyclass(name = "Denoiser", module = "viaplan_py")]
struct PyDenoiser {
    inner: ddpm::Denoiser,
}

#[pymethods]
impl PyDenoiser {
    #[staticmethod]
    fn load(stem: &str) -> PyResult<Self> {
        Ok(Self { inner: ddpm::checkpoint::load(stem).map_err(to_py)? })
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.spec.steps
    }

    /// Draws `count` 12-dimensional plans for `cond`; `clip` bounds the
    /// predicted clean sample at every reverse step.
    #[pyo3(signature = (cond, count, seed, clip=true))]
    fn sample_plans(&self, py: Python<'_>, cond: Vec<f64>, count: usize, seed: u64, clip: bool) -> PyResult<Vec<Vec<f64>>> {
        let opts = if clip { SampleOptions::clipped() } else { SampleOptions::default() };
        let plans = py.detach(|| self.inner.sample_plans(&cond, count, seed, &opts)).map_err(to_py)?;
        Ok(plans.iter().map(Plan::to_vec).collect())
    }
}

/// Value-filter checkpoint for one task.
#[pyclass(name = "ValueNet", module = "viaplan_py")]
struct PyValueNet {
    inner: vf::ValueNet,
}

#[pymethods]
impl PyValueNet {
    #[staticmethod]
    fn load(stem: &str, task: &str) -> PyResult<Self> {
        Ok(Self { inner: vf::load(stem, self::task(task)?.schema_id()).map_err(to_py)? })
    }

    #[getter]
    fn q_max(&self) -> f64 {
        self.inner.q_max()
    }

    fn eval(&self, state: Vec<f64>, plan: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&state, &self::plan(&plan)?).map_err(to_py)
    }

    fn eval_many(&self, state: Vec<f64>, plans: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let plans = plans.iter().map(|p| self::plan(p)).collect::<PyResult<Vec<_>>>()?;
        self.inner.eval_many(&state, &plans).map_err(to_py)
    }
}

/// Trained artifact set: denoiser plus offline and online filters per task.
#[pyclass(name = "Artifacts", module = "viaplan_py")]
struct PyArtifacts {
    inner: harness::Artifacts,
}

#[pymethods]
impl PyArtifacts {
    #[staticmethod]
    fn load(dir: &str) -> PyResult<Self> {
        Ok(Self { inner: harness::Artifacts::load(&ArtifactPaths::new(dir)).map_err(to_py)? })
    }

    /// One planning decision for `episode` with the filters of `arm`.
    /// Returns `(plan, score)`.
    #[pyo3(signature = (episode, arm, seed, samples=planner::DEFAULT_SAMPLES))]
    fn plan_step(
        &self,
        py: Python<'_>,
        episode: &PyEpisode,
        arm: &str,
        seed: u64,
        samples: usize,
    ) -> PyResult<(Vec<f64>, Option<f64>)> {
        let arm: Arm = arm.parse().map_err(to_py)?;
        let (filters, cfg) = match arm {
            Arm::VfOffline | Arm::VfOnline => {
                let filters = episode
                    .tasks
                    .iter()
                    .map(|&k| {
                        let net = if arm == Arm::VfOnline { self.inner.online(k)? } else { self.inner.offline(k)? };
                        planner::Filter::learned(net.clone(), k)
                    })
                    .collect::<viaplan::Result<Vec<_>>>()
                    .map_err(to_py)?;
                (filters, PlannerConfig { samples, ..PlannerConfig::default() })
            }
            Arm::Diffusion => (vec![], PlannerConfig { samples: 1, ..PlannerConfig::default() }),
            _ => return Err(PyValueError::new_err(format!("plan_step supports diffusion and vf arms, not {arm}"))),
        };
        let d = py
            .detach(|| planner::plan_step(&episode.world, &episode.scene, &self.inner.diffusion, &filters, &cfg, seed))
            .map_err(to_py)?;
        Ok((d.plan.to_vec(), d.score))
    }

    /// Paired evaluation of `arm` on `scenario`; returns a dict with the mean
    /// and standard deviation of per-trial success rates.
    #[pyo3(signature = (arm, scenario, trials=5, episodes=20, samples=100, seed=1))]
    #[allow(clippy::too_many_arguments)]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        arm: &str,
        scenario: &PyScenario,
        trials: usize,
        episodes: usize,
        samples: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let arm: Arm = arm.parse().map_err(to_py)?;
        let cfg = EvalConfig { seed, trials, episodes, samples, ..EvalConfig::default() };
        let (row, _) =
            py.detach(|| harness::evaluate_arm(arm, &scenario.spec, &self.inner, &cfg, "python")).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("arm", row.arm)?;
        out.set_item("task", row.task)?;
        out.set_item("level", row.level)?;
        out.set_item("samples", row.samples)?;
        out.set_item("mean_success", row.mean_success)?;
        out.set_item("std_success", row.std_success)?;
        Ok(out)
    }
}

/// Cosine noise schedule as `(betas, alphas, alpha_bars)`, index 0 being the
/// clean level.
#[pyfunction]
fn noise_schedule(steps: usize) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let s = NoiseSchedule::cosine(steps).map_err(to_py)?;
    Ok((s.betas, s.alphas, s.alpha_bars))
}

/// Procedural footstep trajectory as `(x, y, heading, leg)` tuples.
#[pyfunction]
#[pyo3(signature = (seed, length=50))]
fn procedural_trajectory(seed: u64, length: usize) -> PyResult<Vec<(f64, f64, f64, String)>> {
    let params = ProcGenParams { length, ..ProcGenParams::default() };
    let t = gen_trajectory(&params, &mut rng::seeded(seed)).map_err(to_py)?;
    Ok(t.steps.iter().map(|s| (s.position[0], s.position[1], s.heading, format!("{:?}", s.leg))).collect())
}

/// Elementwise product of per-filter score lists.
#[pyfunction]
fn compose_scores(scores: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    vf::product_scores(&scores).map_err(to_py)
}

/// Difficulty levels evaluated for `task`.
#[pyfunction]
fn task_levels(task: &str) -> PyResult<Vec<f64>> {
    Ok(harness::task_levels(self::task(task)?))
}

/// Trains the 1-D toy model on noisily accepted proposals and reports how
/// much of its output leaks outside the constraint set.
#[pyfunction]
#[pyo3(signature = (sigma, seed, iterations=None, proposals=None))]
fn toy<'py>(
    py: Python<'py>,
    sigma: f64,
    seed: u64,
    iterations: Option<usize>,
    proposals: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let base = ToyConfig::default();
    let cfg = ToyConfig {
        sigma,
        iterations: iterations.unwrap_or(base.iterations),
        proposals: proposals.unwrap_or(base.proposals),
        ..base
    };
    let r = py.detach(|| toy_experiment(&cfg, seed)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("sigma", r.sigma)?;
    out.set_item("acceptance_rate", r.acceptance_rate)?;
    out.set_item("data_outside", r.data_outside)?;
    out.set_item("leakage", r.leakage)?;
    out.set_item("sample_mean", r.sample_mean)?;
    out.set_item("final_loss", r.final_loss)?;
    out.set_item("samples", r.samples)?;
    Ok(out)
}

#[pymodule]
fn viaplan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyEpisode>()?;
    m.add_class::<PyDenoiser>()?;
    m.add_class::<PyValueNet>()?;
    m.add_class::<PyArtifacts>()?;
    m.add_function(wrap_pyfunction!(noise_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(procedural_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(compose_scores, m)?)?;
    m.add_function(wrap_pyfunction!(task_levels, m)?)?;
    m.add_function(wrap_pyfunction!(toy, m)?)?;
    Ok(())
}
