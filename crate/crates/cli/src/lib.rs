//! Command implementations behind the `softgate` binary.
//!
//! Four commands: `curves` samples gate values and derivatives onto a CSV
//! grid, `check` writes an admissibility report as JSON, `train` runs the
//! toy simulator and writes a metrics CSV plus a summary JSON, and
//! `compare` repeats a training run over a gate/seed matrix.
//!
//! All floating-point output uses shortest-roundtrip decimal formatting,
//! so files are diffable and parse back to the exact bit pattern.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context as _};

use softgate::admissibility::{check_admissibility, check_gate, AdmissibilityReport, ProbeGrid};
use softgate::gates::{gate_derivative, gate_value, GateKind, GateSpec, Temperature};
use softgate::math::erf;
use softgate::parallel;
use softgate::toysim::{parse_config, run_training_streaming, StepMetrics, TrainConfig};

/// Command failure with its process exit status: validation and usage
/// problems exit 2, runtime failures (I/O, divergence) exit 1.
#[derive(Debug)]
pub enum CmdError {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Validation(_) => 2,
            CmdError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CmdError::Validation(e) | CmdError::Runtime(e) => format!("{e:#}"),
        }
    }
}

fn validation(err: impl Into<anyhow::Error>) -> CmdError {
    CmdError::Validation(err.into())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CmdError> {
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(CmdError::Runtime)
}

/// Header of the curve CSV.
pub const CURVES_HEADER: &str = "x,gate,tau,value,derivative";

/// Header of the per-step metrics CSV.
pub const METRICS_HEADER: &str =
    "step,mean_reward,policy_entropy,ratio_mean,ratio_var,ratio_max_dev,suppression_rate,degenerate_group_rate";

/// Header of the gate comparison CSV.
pub const COMPARE_HEADER: &str =
    "gate,final_reward_mean,final_reward_std,final_entropy_mean,final_entropy_std,suppression_rate_mean";

/// A gate/temperature curve sweep over an x grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRequest {
    pub gates: Vec<GateKind>,
    pub taus: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl Default for CurveRequest {
    fn default() -> Self {
        Self {
            gates: GateKind::ALL.to_vec(),
            taus: vec![1.0, 5.0, 10.0],
            x_min: 0.0,
            x_max: 3.0,
            points: 301,
        }
    }
}

impl CurveRequest {
    fn validate(&self) -> Result<(), CmdError> {
        if self.gates.is_empty() || self.taus.is_empty() {
            return Err(validation(anyhow!("gates and taus must be nonempty")));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite()) || self.x_min < 0.0 {
            return Err(validation(anyhow!(
                "x range must be finite with x_min >= 0, got [{}, {}]",
                self.x_min,
                self.x_max
            )));
        }
        // A single point collapses the grid; then and only then the ends
        // may coincide.
        match self.points {
            0 => return Err(validation(anyhow!("points must be at least 1"))),
            1 if self.x_min != self.x_max => {
                return Err(validation(anyhow!("points = 1 requires x_min == x_max")))
            }
            _ if self.points >= 2 && self.x_min >= self.x_max => {
                return Err(validation(anyhow!(
                    "x_min must be below x_max, got [{}, {}]",
                    self.x_min,
                    self.x_max
                )))
            }
            _ => {}
        }
        for &tau in &self.taus {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(validation(anyhow!("tau must be positive, got {tau}")));
            }
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.x_min];
        }
        let step = (self.x_max - self.x_min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.x_min + i as f64 * step)
            .collect()
    }
}

/// One output row of the curve sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub gate: GateKind,
    pub tau: f64,
    pub value: f64,
    pub derivative: f64,
}

/// Evaluate the sweep. Smooth gates report f and f'; hard clip reports the
/// positive-advantage clipped surrogate min(x, 1 + epsilon) and its
/// piecewise-constant subgradient.
pub fn curve_rows(request: &CurveRequest, clip_epsilon: f64) -> Result<Vec<CurveRow>, CmdError> {
    request.validate()?;
    if request.gates.contains(&GateKind::HardClip)
        && !(clip_epsilon.is_finite() && clip_epsilon > 0.0 && clip_epsilon < 1.0)
    {
        return Err(validation(anyhow!(
            "clip epsilon must lie in (0, 1), got {clip_epsilon}"
        )));
    }
    let mut rows = Vec::with_capacity(request.points * request.gates.len() * request.taus.len());
    for &x in &request.grid() {
        for &gate in &request.gates {
            for &tau in &request.taus {
                let (value, derivative) = match gate {
                    GateKind::HardClip => {
                        let cap = 1.0 + clip_epsilon;
                        (x.min(cap), if x < cap { 1.0 } else { 0.0 })
                    }
                    _ => (
                        gate_value(gate, tau, x).map_err(validation)?,
                        gate_derivative(gate, tau, x).map_err(validation)?,
                    ),
                };
                rows.push(CurveRow {
                    x,
                    gate,
                    tau,
                    value,
                    derivative,
                });
            }
        }
    }
    Ok(rows)
}

/// `curves`: write the sweep as CSV. Returns the number of data rows.
pub fn cmd_curves(
    request: &CurveRequest,
    clip_epsilon: f64,
    output: &Path,
) -> Result<usize, CmdError> {
    let rows = curve_rows(request, clip_epsilon)?;
    let mut csv = String::with_capacity(rows.len() * 32);
    csv.push_str(CURVES_HEADER);
    csv.push('\n');
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            row.x, row.gate, row.tau, row.value, row.derivative
        )
        .expect("string write");
    }
    write_file(output, &csv)?;
    Ok(rows.len())
}

/// Built-in counterexample value functions for `check --custom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CustomCheck {
    /// f(x) = x: smooth with unit derivative, but x * f'(x) diverges.
    Identity,
    /// The clipped surrogate as a value function: kinked at 1 +/- epsilon.
    Clip,
    /// A Gaussian-derivative gate centered at 1.5 instead of 1.
    ShiftedPeak,
    /// An arctan gate scaled so the derivative peaks at 0.5.
    RescaledPeak,
}

impl std::str::FromStr for CustomCheck {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(CustomCheck::Identity),
            "clip" => Ok(CustomCheck::Clip),
            "shifted-peak" => Ok(CustomCheck::ShiftedPeak),
            "rescaled-peak" => Ok(CustomCheck::RescaledPeak),
            other => Err(anyhow!(
                "unknown custom check {other:?} (expected identity, clip, shifted-peak, rescaled-peak)"
            )),
        }
    }
}

/// What `check` should verify: a built-in gate or a counterexample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckTarget {
    Gate { kind: GateKind, tau: f64 },
    Custom { which: CustomCheck, epsilon: f64 },
}

/// Run the admissibility checker and return its report.
pub fn run_check(target: CheckTarget, grid: &ProbeGrid) -> Result<AdmissibilityReport, CmdError> {
    match target {
        CheckTarget::Gate { kind, tau } => check_gate(kind, tau, grid).map_err(validation),
        CheckTarget::Custom { which, epsilon } => {
            if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 1.0) {
                return Err(validation(anyhow!(
                    "clip epsilon must lie in (0, 1), got {epsilon}"
                )));
            }
            Ok(match which {
                CustomCheck::Identity => check_admissibility(|x| x, Some(|_x: f64| 1.0), grid),
                CustomCheck::Clip => check_admissibility(
                    move |x: f64| x.clamp(1.0 - epsilon, 1.0 + epsilon),
                    None::<fn(f64) -> f64>,
                    grid,
                ),
                CustomCheck::ShiftedPeak => {
                    let tau = 2.0_f64;
                    let scale = (std::f64::consts::PI / 2.0).sqrt() / tau;
                    check_admissibility(
                        move |x: f64| 1.0 + scale * erf(tau * (x - 1.5) / std::f64::consts::SQRT_2),
                        Some(move |x: f64| (-0.5 * tau * tau * (x - 1.5) * (x - 1.5)).exp()),
                        grid,
                    )
                }
                CustomCheck::RescaledPeak => check_admissibility(
                    |x: f64| 0.5 * (1.0 + (x - 1.0).atan()),
                    Some(|x: f64| 0.5 / (1.0 + (x - 1.0) * (x - 1.0))),
                    grid,
                ),
            })
        }
    }
}

/// `check`: write the JSON report; the boolean is the all-pass verdict.
pub fn cmd_check(target: CheckTarget, grid: &ProbeGrid, output: &Path) -> Result<bool, CmdError> {
    let report = run_check(target, grid)?;
    write_file(output, &report.to_json())?;
    Ok(report.is_admissible())
}

fn metrics_csv_row(m: &StepMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        m.step,
        m.mean_reward,
        m.policy_entropy,
        m.ratio_mean,
        m.ratio_var,
        m.ratio_max_dev,
        m.suppression_rate,
        m.degenerate_group_rate
    )
}

fn summary_json(config: &TrainConfig, metrics: &[StepMetrics], diverged: bool) -> String {
    let last = metrics.last();
    let value = serde_json::json!({
        "gate": config.gate.kind().name(),
        "steps_completed": metrics.len(),
        "final_mean_reward": last.map(|m| m.mean_reward),
        "final_policy_entropy": last.map(|m| m.policy_entropy),
        "diverged": diverged,
    });
    let mut s = serde_json::to_string_pretty(&value).expect("summary serializes");
    s.push('\n');
    s
}

/// Outcome of a training command.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub metrics: Vec<StepMetrics>,
    pub diverged: bool,
}

/// `train`: run the configured simulation, writing `metrics.csv` and
/// `summary.json` into the output directory. A divergence abort still
/// writes both files (flagging it) and reports `diverged = true`.
pub fn cmd_train(config_path: &Path, output_dir: &Path) -> Result<TrainOutcome, CmdError> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("cannot read {}", config_path.display()))
        .map_err(CmdError::Runtime)?;
    let config = parse_config(&text).map_err(validation)?;
    fs::create_dir_all(output_dir)
        .with_context(|| format!("cannot create {}", output_dir.display()))
        .map_err(CmdError::Runtime)?;

    let mut metrics = Vec::with_capacity(config.steps);
    let result = run_training_streaming(&config, |m| metrics.push(m.clone()));
    let diverged = match result {
        Ok(()) => false,
        Err(softgate::toysim::SimError::Diverged { .. }) => true,
        Err(other) => return Err(CmdError::Runtime(anyhow!(other))),
    };

    let mut csv = String::new();
    csv.push_str(METRICS_HEADER);
    csv.push('\n');
    for m in &metrics {
        csv.push_str(&metrics_csv_row(m));
        csv.push('\n');
    }
    write_file(&output_dir.join("metrics.csv"), &csv)?;
    write_file(
        &output_dir.join("summary.json"),
        &summary_json(&config, &metrics, diverged),
    )?;
    Ok(TrainOutcome { metrics, diverged })
}

/// One aggregated row of the comparison CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub gate: GateKind,
    pub final_reward_mean: f64,
    pub final_reward_std: f64,
    pub final_entropy_mean: f64,
    pub final_entropy_std: f64,
    pub suppression_rate_mean: f64,
}

fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Run the configuration once per (gate, seed) and aggregate per gate.
pub fn compare_rows(
    base: &TrainConfig,
    gates: &[GateKind],
    seeds: &[u64],
) -> Result<Vec<CompareRow>, CmdError> {
    if gates.is_empty() || seeds.is_empty() {
        return Err(validation(anyhow!("gates and seeds must be nonempty")));
    }
    if base.steps == 0 {
        return Err(validation(anyhow!(
            "compare needs steps >= 1 to have final metrics"
        )));
    }
    let mut specs = Vec::with_capacity(gates.len());
    for &kind in gates {
        let spec = match kind {
            GateKind::HardClip => match base.gate.clip_epsilon() {
                Some(eps) => GateSpec::hard_clip(eps)
                    .map_err(validation)?
                    .with_temperature(base.gate.temperature()),
                None => {
                    return Err(validation(anyhow!(
                        "comparing hard_clip requires a hard_clip base config with epsilon"
                    )))
                }
            },
            kind => GateSpec::smooth(kind, base.gate.temperature()).map_err(validation)?,
        };
        specs.push(spec);
    }

    // One job per (gate, seed); order is fixed so results line up.
    let jobs: Vec<(usize, u64)> = (0..specs.len())
        .flat_map(|g| seeds.iter().map(move |&s| (g, s)))
        .collect();
    let runs = parallel::map_collect(&jobs, |&(g, seed)| {
        let config = base.with_gate(specs[g]).with_seed(seed);
        softgate::toysim::run_training(&config)
    });

    let mut rows = Vec::with_capacity(specs.len());
    for (g, &kind) in gates.iter().enumerate() {
        let mut finals = Vec::new();
        let mut entropies = Vec::new();
        let mut suppressions = Vec::new();
        for (job, run) in jobs.iter().zip(&runs) {
            if job.0 != g {
                continue;
            }
            let metrics = match run {
                Ok(m) => m,
                Err(e) => return Err(CmdError::Runtime(anyhow!(e.clone()))),
            };
            let last = metrics.last().expect("steps >= 1");
            finals.push(last.mean_reward);
            entropies.push(last.policy_entropy);
            suppressions.push(
                metrics.iter().map(|m| m.suppression_rate).sum::<f64>() / metrics.len() as f64,
            );
        }
        let (reward_mean, reward_std) = mean_and_population_std(&finals);
        let (entropy_mean, entropy_std) = mean_and_population_std(&entropies);
        rows.push(CompareRow {
            gate: kind,
            final_reward_mean: reward_mean,
            final_reward_std: reward_std,
            final_entropy_mean: entropy_mean,
            final_entropy_std: entropy_std,
            suppression_rate_mean: suppressions.iter().sum::<f64>() / suppressions.len() as f64,
        });
    }
    rows.sort_by(|a, b| a.gate.name().cmp(b.gate.name()));
    Ok(rows)
}

/// `compare`: write the per-gate aggregate CSV.
pub fn cmd_compare(
    config_path: &Path,
    gates: &[GateKind],
    seeds: &[u64],
    output: &Path,
) -> Result<(), CmdError> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("cannot read {}", config_path.display()))
        .map_err(CmdError::Runtime)?;
    let base = parse_config(&text).map_err(validation)?;
    let rows = compare_rows(&base, gates, seeds)?;
    let mut csv = String::new();
    csv.push_str(COMPARE_HEADER);
    csv.push('\n');
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.gate,
            row.final_reward_mean,
            row.final_reward_std,
            row.final_entropy_mean,
            row.final_entropy_std,
            row.suppression_rate_mean
        )
        .expect("string write");
    }
    write_file(output, &csv)
}

/// Parse a comma-separated gate list; `all` means every family.
pub fn parse_gate_list(text: &str) -> Result<Vec<GateKind>, CmdError> {
    if text == "all" {
        return Ok(GateKind::ALL.to_vec());
    }
    if text == "smooth" {
        return Ok(GateKind::SMOOTH.to_vec());
    }
    text.split(',')
        .map(|s| s.trim().parse::<GateKind>().map_err(validation))
        .collect()
}

/// Build a smooth gate spec for ad-hoc use (panics on invalid kind).
pub fn smooth_spec(kind: GateKind, tau: f64) -> GateSpec {
    GateSpec::smooth(kind, Temperature::symmetric(tau).expect("positive tau")).expect("smooth kind")
}
