//! Numerical verification that a candidate gate behaves like one.
//!
//! A gate value function f is admissible when (i) it is continuously
//! differentiable, (ii) f' attains its global maximum of 1 at x = 1,
//! (iii) f' decays monotonically away from 1, and (iv) x * f'(x) vanishes
//! as x grows. A true limit cannot be tested, so (iv) uses a finite proxy:
//! x * f'(x) at the tail probe must sit below an absolute ceiling of 0.05
//! and below its value at half the probe (an exact zero at the probe, e.g.
//! from a Gaussian tail underflowing, counts as vanished). All four checks
//! run on one uniform grid over [0, tail_probe] and are deterministic for
//! a fixed grid.

use serde::{Deserialize, Serialize};

use crate::gates::{gate_derivative, gate_value, GateError, GateKind};
use crate::parallel;

/// Step size for substitute central differences when no analytic
/// derivative is supplied.
const FD_STEP: f64 = 1e-6;

/// Ceiling for x * f'(x) at the tail probe.
const TAIL_CEILING: f64 = 0.05;

/// Per-step slack absorbing floating-point noise in flat regions.
const MONOTONE_SLACK: f64 = 1e-9;

/// Probe grid for the checker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    /// Uniform spacing of probe points; at most 0.01.
    pub grid_step: f64,
    /// Right end of the probe interval; at least 100.
    pub tail_probe: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            grid_step: 0.01,
            tail_probe: 1000.0,
        }
    }
}

impl ProbeGrid {
    pub fn new(grid_step: f64, tail_probe: f64) -> Result<Self, GateError> {
        if !(grid_step.is_finite() && grid_step > 0.0 && grid_step <= 0.01) {
            return Err(GateError::InvalidArgument(grid_step));
        }
        if !(tail_probe.is_finite() && tail_probe >= 100.0) {
            return Err(GateError::InvalidArgument(tail_probe));
        }
        Ok(Self {
            grid_step,
            tail_probe,
        })
    }
}

/// Which derivative fed the checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

/// Verdicts and measured margins for the four admissibility properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// (i) the derivative is continuous across the grid.
    pub smooth_ok: bool,
    /// (ii) the derivative peaks at the grid point nearest 1 with value 1.
    pub peak_ok: bool,
    /// Measured f'(1).
    pub peak_value: f64,
    /// (iii) the derivative decays monotonically away from 1.
    pub monotone_ok: bool,
    /// Worst monotonicity violation observed (0 when none).
    pub monotone_worst: f64,
    /// (iv) x * f'(x) vanishes along the probe tail.
    pub tail_ok: bool,
    /// Measured max of x * f'(x) on [tail_probe / 2, tail_probe].
    pub tail_value: f64,
    pub grid_step: f64,
    pub tail_probe: f64,
    pub derivative_mode: DerivativeMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl AdmissibilityReport {
    /// True when all four properties hold.
    pub fn is_admissible(&self) -> bool {
        self.smooth_ok && self.peak_ok && self.monotone_ok && self.tail_ok
    }

    /// Serialize with the fixed field names of the report schema.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Run the four admissibility checks for `value_fn` on the given grid.
///
/// When `derivative_fn` is `None`, central differences of `value_fn`
/// substitute (forward at the left domain edge) and the report records the
/// mode. Any non-finite value or derivative on the grid fails every check
/// with a diagnostic.
///
/// ```
/// use softgate::admissibility::{check_admissibility, ProbeGrid};
///
/// let grid = ProbeGrid::new(0.01, 100.0)?;
/// // The identity is smooth with a well-placed unit derivative, but its
/// // tail never vanishes.
/// let report = check_admissibility(|x| x, Some(|_x: f64| 1.0), &grid);
/// assert!(report.smooth_ok && report.peak_ok && report.monotone_ok);
/// assert!(!report.tail_ok);
/// assert!(!report.is_admissible());
/// # Ok::<(), softgate::GateError>(())
/// ```
pub fn check_admissibility<F, D>(
    value_fn: F,
    derivative_fn: Option<D>,
    grid: &ProbeGrid,
) -> AdmissibilityReport
where
    F: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    let mode = if derivative_fn.is_some() {
        DerivativeMode::Analytic
    } else {
        DerivativeMode::FiniteDifference
    };
    let deriv_at = |x: f64| -> f64 {
        match &derivative_fn {
            Some(df) => df(x),
            None => {
                if x >= FD_STEP {
                    (value_fn(x + FD_STEP) - value_fn(x - FD_STEP)) / (2.0 * FD_STEP)
                } else {
                    (value_fn(x + FD_STEP) - value_fn(x)) / FD_STEP
                }
            }
        }
    };

    let n = (grid.tail_probe / grid.grid_step).round() as usize;
    let probes = parallel::map_range(n + 1, |k| {
        let x = k as f64 * grid.grid_step;
        (x, value_fn(x), deriv_at(x))
    });

    if let Some((x, v, d)) = probes
        .iter()
        .find(|(_, v, d)| !v.is_finite() || !d.is_finite())
    {
        return AdmissibilityReport {
            smooth_ok: false,
            peak_ok: false,
            peak_value: 0.0,
            monotone_ok: false,
            monotone_worst: 0.0,
            tail_ok: false,
            tail_value: 0.0,
            grid_step: grid.grid_step,
            tail_probe: grid.tail_probe,
            derivative_mode: mode,
            diagnostic: Some(format!(
                "non-finite probe at x = {x}: value = {v}, derivative = {d}"
            )),
        };
    }

    // (i) Continuity of f': a jump between adjacent probes must not dwarf
    // the jumps two intervals away on either side. For a smooth function
    // consecutive first differences agree to O(step), so the 10x margin
    // holds with room; at a kink the local jump is O(1) while the probes
    // two intervals out stay O(step). Comparing against the immediate
    // neighbors would be fooled when the kink lands on a grid point and
    // splits its jump across two intervals.
    let jumps: Vec<f64> = probes.windows(2).map(|w| (w[1].2 - w[0].2).abs()).collect();
    let mut smooth_ok = true;
    for k in 0..jumps.len() {
        let before = if k >= 2 { jumps[k - 2] } else { 0.0 };
        let after = if k + 2 < jumps.len() {
            jumps[k + 2]
        } else {
            0.0
        };
        let allowed = 10.0 * before.max(after) + 1e-8 * (1.0 + probes[k].2.abs());
        if jumps[k] > allowed {
            smooth_ok = false;
            break;
        }
    }

    // (ii) Peak location and height.
    let near_one = (1.0 / grid.grid_step).round() as usize;
    let near_one = near_one.min(n);
    let max_d = probes.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    let peak_value = deriv_at(1.0);
    let peak_ok = probes[near_one].2 >= max_d - 1e-12 * max_d.abs().max(1.0)
        && (peak_value - 1.0).abs() < 1e-6;

    // (iii) Non-decreasing left of 1, non-increasing right of it; the
    // interval straddling 1 is unconstrained.
    let mut monotone_worst = 0.0_f64;
    for w in probes.windows(2) {
        let (x0, _, d0) = w[0];
        let (x1, _, d1) = w[1];
        if x1 <= 1.0 + 1e-12 {
            monotone_worst = monotone_worst.max(d0 - d1);
        } else if x0 >= 1.0 - 1e-12 {
            monotone_worst = monotone_worst.max(d1 - d0);
        }
    }
    let monotone_ok = monotone_worst <= MONOTONE_SLACK;

    // (iv) Vanishing tail, finite proxy.
    let g_tail = grid.tail_probe * deriv_at(grid.tail_probe);
    let g_half = (grid.tail_probe / 2.0) * deriv_at(grid.tail_probe / 2.0);
    let tail_ok = g_tail < TAIL_CEILING && (g_tail < g_half || g_tail == 0.0);
    let tail_value = probes
        .iter()
        .filter(|p| p.0 >= grid.tail_probe / 2.0)
        .map(|p| p.0 * p.2)
        .fold(g_tail.max(g_half), f64::max);

    AdmissibilityReport {
        smooth_ok,
        peak_ok,
        peak_value,
        monotone_ok,
        monotone_worst,
        tail_ok,
        tail_value,
        grid_step: grid.grid_step,
        tail_probe: grid.tail_probe,
        derivative_mode: mode,
        diagnostic: None,
    }
}

/// Check one of the built-in smooth gates at temperature `tau`, feeding the
/// checker the analytic derivative.
pub fn check_gate(
    kind: GateKind,
    tau: f64,
    grid: &ProbeGrid,
) -> Result<AdmissibilityReport, GateError> {
    if !kind.is_smooth() {
        return Err(GateError::HardClipUnsupported);
    }
    // Validate eagerly so closure panics cannot occur on the grid.
    gate_value(kind, tau, 0.0)?;
    Ok(check_admissibility(
        move |x| gate_value(kind, tau, x).expect("validated gate arguments"),
        Some(move |x| gate_derivative(kind, tau, x).expect("validated gate arguments")),
        grid,
    ))
}
