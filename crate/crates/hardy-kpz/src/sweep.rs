//! Parameter sweeps over `(p, λ, μ, α)` and exponent tables.
//!
//! A sweep assembles one operator, classifies every cell of a (at most
//! two-dimensional) parameter grid with the solver, and records the analytic
//! exponents along the swept axes. Cells are independent and run on the
//! rayon pool; output is ordered by cell index, so bytes do not depend on
//! completion order. Finished cells are appended to a JSON-lines checkpoint
//! and skipped when the sweep is resumed.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{config_hash, fmt17};
use crate::radialop::{assemble_operator_with, build_grid, AssemblyOptions, OperatorMatrix};
use crate::solver::{self, SolveStatus, SolverControls, Source};
use crate::specfun::{self, ProblemParams};

/// Relative distance to `p₊` below which a cell is Inconclusive by policy.
pub const P_PLUS_POLICY_TOLERANCE: f64 = 1e-12;

/// A swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    P,
    Lambda,
    Mu,
    AlphaDamp,
}

impl SweepParam {
    /// Column name in CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::P => "p",
            SweepParam::Lambda => "lambda",
            SweepParam::Mu => "mu",
            SweepParam::AlphaDamp => "alpha_damp",
        }
    }
}

/// How axis values are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AxisScale {
    /// Values are used as given.
    #[default]
    Absolute,
    /// Values are multiples of `p₊(λ, s)` at the cell's `λ` (only for `p`).
    PPlus,
    /// Values are multiples of `Λ_{N,s}` (only for `λ`).
    HardyConstant,
}

/// One sweep axis with `steps` equally spaced values from `start` to `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub param: SweepParam,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    #[serde(default)]
    pub scale: AxisScale,
}

impl AxisSpec {
    /// Raw axis values (before scaling).
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.start],
            k => (0..k)
                .map(|i| {
                    if i == k - 1 {
                        self.stop
                    } else {
                        self.start + (self.stop - self.start) * i as f64 / (k - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

/// Grid parameters `(R, M, g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "R")]
    pub r_max: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub g: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            r_max: DESK_RADIUS,
            m: 200,
            g: 2.0,
        }
    }
}

/// Radius of the desk-scale configuration.
pub const DESK_RADIUS: f64 = 0.5;

/// A sweep over at most two parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    /// Fixed parameters; swept entries are overwritten per cell.
    pub problem: ProblemParams,
    /// Damping exponent; when set (or swept) cells use the damped solver.
    #[serde(default)]
    pub alpha_damp: Option<f64>,
    pub axes: Vec<AxisSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub assembly: AssemblyOptions,
    #[serde(default)]
    pub controls: SolverControls,
    pub source: Source,
    /// Whether each cell is classified against the nearest admissible
    /// power supersolution.
    #[serde(default = "default_true")]
    pub use_supersolution: bool,
    /// Maximum number of cells.
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_true() -> bool {
    true
}

fn default_budget() -> usize {
    10_000
}

impl SweepPlan {
    /// The desk-scale `p` sweep: `N = 3`, `s = 0.75`, `λ = Λ/2`, `μ = 1e−3`,
    /// `f = |x|^{−2s}`, `p = p₊ · (0.9, 0.925, …, 1.1)`.
    pub fn desk_p_sweep() -> Result<Self> {
        let (n, s) = (3, 0.75);
        let lambda = 0.5 * specfun::hardy_constant(n, s)?;
        let e = specfun::exponents(n, s, lambda)?;
        Ok(SweepPlan {
            problem: ProblemParams {
                n,
                s,
                lambda,
                p: e.p_plus,
                mu: 1e-3,
            },
            alpha_damp: None,
            axes: vec![AxisSpec {
                param: SweepParam::P,
                start: 0.9,
                stop: 1.1,
                steps: 9,
                scale: AxisScale::PPlus,
            }],
            grid: GridConfig::default(),
            assembly: AssemblyOptions::default(),
            controls: SolverControls::default(),
            source: Source::Power {
                exponent: 2.0 * s,
                constant: 1.0,
            },
            use_supersolution: true,
            budget: default_budget(),
        })
    }

    /// Number of cells.
    pub fn cell_count(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|a| a.steps).product()
        }
    }

    /// Structural and analytic-domain checks on the plan.
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::Config(format!(
                "axes: need 1 or 2 axes, got {}",
                self.axes.len()
            )));
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(Error::Config(
                "axes: the two axes must sweep different parameters".to_string(),
            ));
        }
        for (k, a) in self.axes.iter().enumerate() {
            if !(a.start.is_finite() && a.stop.is_finite()) {
                return Err(Error::Config(format!("axes[{k}]: range must be finite")));
            }
            let ok = match a.scale {
                AxisScale::Absolute => true,
                AxisScale::PPlus => a.param == SweepParam::P,
                AxisScale::HardyConstant => a.param == SweepParam::Lambda,
            };
            if !ok {
                return Err(Error::Config(format!(
                    "axes[{k}].scale: {:?} does not apply to {}",
                    a.scale,
                    a.param.name()
                )));
            }
        }
        if self.cell_count() > self.budget {
            return Err(Error::Config(format!(
                "budget: plan has {} cells, budget is {}",
                self.cell_count(),
                self.budget
            )));
        }
        self.controls.validate()?;
        build_grid(self.grid.r_max, self.grid.m, self.grid.g)?;
        for index in 0..self.cell_count() {
            let cell = self.cell_params(index)?;
            cell.params.validate().map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("cell {index}: {msg}")),
                other => other,
            })?;
            if let Some(a) = cell.alpha_damp {
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(Error::Domain(format!(
                        "cell {index}: alpha_damp must be nonnegative"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Axis coordinates of cell `index` (first axis varies slowest).
    fn coords(&self, index: usize) -> Vec<f64> {
        let mut rest = index;
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            let i = rest % axis.steps;
            rest /= axis.steps;
            out[k] = axis.values()[i];
        }
        out
    }

    /// Parameters of cell `index`.
    fn cell_params(&self, index: usize) -> Result<CellParams> {
        let coords = self.coords(index);
        let mut params = self.problem;
        let mut alpha_damp = self.alpha_damp;
        let mut p_factor = None;
        for (axis, &v) in self.axes.iter().zip(&coords) {
            match (axis.param, axis.scale) {
                (SweepParam::Lambda, AxisScale::HardyConstant) => {
                    params.lambda = v * specfun::hardy_constant(params.n, params.s)?
                }
                (SweepParam::Lambda, _) => params.lambda = v,
                (SweepParam::P, AxisScale::PPlus) => p_factor = Some(v),
                (SweepParam::P, _) => params.p = v,
                (SweepParam::Mu, _) => params.mu = v,
                (SweepParam::AlphaDamp, _) => alpha_damp = Some(v),
            }
        }
        if let Some(f) = p_factor {
            params.p = f * specfun::exponents(params.n, params.s, params.lambda)?.p_plus;
        }
        Ok(CellParams {
            coords,
            params,
            alpha_damp,
        })
    }
}

struct CellParams {
    coords: Vec<f64>,
    params: ProblemParams,
    alpha_damp: Option<f64>,
}

/// Classification of a sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellStatus {
    Converged,
    BlowUp,
    MaxIterations,
    Inconclusive,
}

impl CellStatus {
    /// Name used in CSV output.
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::Converged => "Converged",
            CellStatus::BlowUp => "BlowUp",
            CellStatus::MaxIterations => "MaxIterations",
            CellStatus::Inconclusive => "Inconclusive",
        }
    }
}

impl From<SolveStatus> for CellStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Converged => CellStatus::Converged,
            SolveStatus::BlowUp => CellStatus::BlowUp,
            SolveStatus::MaxIterations => CellStatus::MaxIterations,
        }
    }
}

/// One classified cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    /// Raw axis values.
    pub coords: Vec<f64>,
    pub p: f64,
    pub lambda: f64,
    pub mu: f64,
    pub alpha_damp: Option<f64>,
    pub status: CellStatus,
    pub sup_norm: Option<f64>,
    /// Total inner iterations over all levels.
    pub iterations: usize,
    pub note: Option<String>,
}

/// Analytic exponents at one `λ` value of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub lambda: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    pub p_star: f64,
    pub two_s: f64,
}

/// Converged→BlowUp transition along a one-dimensional `p` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionBand {
    /// Largest converged `p` below the first blow-up.
    pub last_converged: f64,
    /// Smallest `p` classified as blow-up.
    pub first_blowup: f64,
    pub width: f64,
    pub p_plus: f64,
    pub contains_p_plus: bool,
}

/// Classified cells plus analytic overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub axes: Vec<AxisSpec>,
    pub cells: Vec<Cell>,
    pub overlay: Vec<OverlayRow>,
    pub band: Option<TransitionBand>,
    pub config_hash: String,
    /// Cells still missing when the run limit stopped the sweep.
    pub pending: usize,
}

impl RegionMap {
    /// One row per cell: axis values, parameters, status, sup norm, iterations.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index");
        for a in &self.axes {
            out.push_str(&format!(",axis_{}", a.param.name()));
        }
        out.push_str(",p,lambda,mu,alpha_damp,status,sup_norm,iters\n");
        for c in &self.cells {
            out.push_str(&c.index.to_string());
            for v in &c.coords {
                out.push(',');
                out.push_str(&fmt17(*v));
            }
            out.push_str(&format!(
                ",{},{},{},{},{},{},{}\n",
                fmt17(c.p),
                fmt17(c.lambda),
                fmt17(c.mu),
                c.alpha_damp.map(fmt17).unwrap_or_default(),
                c.status.as_str(),
                c.sup_norm.map(fmt17).unwrap_or_default(),
                c.iterations
            ));
        }
        out
    }

    /// JSON sidecar: overlay, band, hash and pending count.
    pub fn sidecar(&self) -> Sidecar<'_> {
        Sidecar {
            config_hash: &self.config_hash,
            overlay: &self.overlay,
            band: self.band.as_ref(),
            cells: self.cells.len(),
            pending: self.pending,
        }
    }
}

/// Serializable sidecar of a region map.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub config_hash: &'a str,
    pub overlay: &'a [OverlayRow],
    pub band: Option<&'a TransitionBand>,
    pub cells: usize,
    pub pending: usize,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    plan_hash: String,
}

fn read_checkpoint(path: &Path, hash: &str) -> Result<BTreeMap<usize, Cell>> {
    let mut done = BTreeMap::new();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut lines = text.lines();
    if let Some(first) = lines.next() {
        let header: CheckpointHeader = serde_json::from_str(first)?;
        if header.plan_hash != hash {
            return Err(Error::Config(format!(
                "checkpoint {} belongs to a different plan (hash {})",
                path.display(),
                header.plan_hash
            )));
        }
    }
    for line in lines.filter(|l| !l.trim().is_empty()) {
        // A torn final line from an interrupted run is ignored.
        if let Ok(cell) = serde_json::from_str::<Cell>(line) {
            done.insert(cell.index, cell);
        }
    }
    Ok(done)
}

fn write_checkpoint(path: &Path, hash: &str, cells: &BTreeMap<usize, Cell>) -> Result<()> {
    let mut out = serde_json::to_string(&CheckpointHeader {
        plan_hash: hash.to_string(),
    })?;
    out.push('\n');
    for cell in cells.values() {
        out.push_str(&serde_json::to_string(cell)?);
        out.push('\n');
    }
    crate::io::write_text(path, &out)
}

/// Runs `plan`. With a checkpoint path, finished cells are read from and
/// appended to it; `run_limit` caps the number of new cells computed in this
/// call (the rest are reported as pending).
pub fn run_sweep(
    plan: &SweepPlan,
    checkpoint: Option<&Path>,
    run_limit: Option<usize>,
) -> Result<RegionMap> {
    if plan.axes.iter().any(|a| a.steps == 0) {
        return Ok(RegionMap {
            axes: plan.axes.clone(),
            cells: Vec::new(),
            overlay: Vec::new(),
            band: None,
            config_hash: config_hash(plan)?,
            pending: 0,
        });
    }
    plan.validate()?;
    let hash = config_hash(plan)?;
    let mut done = match checkpoint {
        Some(path) => read_checkpoint(path, &hash)?,
        None => BTreeMap::new(),
    };
    let todo: Vec<usize> = (0..plan.cell_count())
        .filter(|i| !done.contains_key(i))
        .take(run_limit.unwrap_or(usize::MAX))
        .collect();

    if !todo.is_empty() {
        let grid = build_grid(plan.grid.r_max, plan.grid.m, plan.grid.g)?;
        let op = assemble_operator_with(&grid, plan.problem.n, plan.problem.s, &plan.assembly)?;
        if let Some(path) = checkpoint {
            write_checkpoint(path, &hash, &done)?;
        }
        let sink = match checkpoint {
            Some(path) => Some(Mutex::new(
                std::fs::OpenOptions::new()
                    .append(true)
                    .open(path)
                    .map_err(|e| Error::io(path, e))?,
            )),
            None => None,
        };
        let fresh: Vec<Cell> = todo
            .par_iter()
            .map(|&index| -> Result<Cell> {
                let cell = run_cell(plan, &op, index)?;
                if let (Some(sink), Some(path)) = (&sink, checkpoint) {
                    let line = serde_json::to_string(&cell)? + "\n";
                    let mut file = sink
                        .lock()
                        .map_err(|_| Error::Internal("checkpoint lock poisoned".into()))?;
                    file.write_all(line.as_bytes())
                        .map_err(|e| Error::io(path, e))?;
                }
                Ok(cell)
            })
            .collect::<Result<_>>()?;
        for cell in fresh {
            done.insert(cell.index, cell);
        }
        if let Some(path) = checkpoint {
            write_checkpoint(path, &hash, &done)?;
        }
    }

    let pending = plan.cell_count() - done.len();
    let cells: Vec<Cell> = done.into_values().collect();
    let overlay = overlay(plan, &cells)?;
    let band = if pending == 0 {
        transition_band(plan, &cells)?
    } else {
        None
    };
    Ok(RegionMap {
        axes: plan.axes.clone(),
        cells,
        overlay,
        band,
        config_hash: hash,
        pending,
    })
}

fn run_cell(plan: &SweepPlan, op: &OperatorMatrix, index: usize) -> Result<Cell> {
    let CellParams {
        coords,
        params,
        alpha_damp,
    } = plan.cell_params(index)?;
    let mut cell = Cell {
        index,
        coords,
        p: params.p,
        lambda: params.lambda,
        mu: params.mu,
        alpha_damp,
        status: CellStatus::Inconclusive,
        sup_norm: None,
        iterations: 0,
        note: None,
    };
    let e = specfun::critical_exponents(&params)?;
    if (params.p - e.p_plus).abs() <= P_PLUS_POLICY_TOLERANCE * e.p_plus && alpha_damp.is_none() {
        cell.note = Some("p = p+ is reported Inconclusive by policy".to_string());
        return Ok(cell);
    }
    let outcome = (|| {
        let spec = if plan.use_supersolution && alpha_damp.is_none() {
            solver::reference_supersolution(&params, &plan.source, plan.grid.r_max)?
        } else {
            None
        };
        match alpha_damp {
            Some(a) => {
                solver::solve_damped(&params, a, &plan.source, op, &plan.controls, spec.as_ref())
            }
            None => solver::solve_kpz(&params, &plan.source, op, &plan.controls, spec.as_ref()),
        }
    })();
    match outcome {
        Ok(report) => {
            cell.status = report.status.into();
            cell.sup_norm = Some(report.field.sup_norm());
            cell.iterations = report.trace.iter().map(|t| t.inner_iterations).sum();
            cell.note = report.reason;
        }
        Err(err) => cell.note = Some(err.to_string()),
    }
    Ok(cell)
}

fn overlay(plan: &SweepPlan, cells: &[Cell]) -> Result<Vec<OverlayRow>> {
    let (n, s) = (plan.problem.n, plan.problem.s);
    let mut lambdas: Vec<f64> = cells.iter().map(|c| c.lambda).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    lambdas
        .into_iter()
        .map(|lambda| {
            let e = specfun::exponents(n, s, lambda)?;
            Ok(OverlayRow {
                lambda,
                p_minus: e.p_minus,
                p_plus: e.p_plus,
                p_star: e.p_star,
                two_s: 2.0 * s,
            })
        })
        .collect()
}

/// Band for a one-dimensional `p` sweep: first blow-up and the last
/// converged cell below it.
fn transition_band(plan: &SweepPlan, cells: &[Cell]) -> Result<Option<TransitionBand>> {
    if plan.axes.len() != 1 || plan.axes[0].param != SweepParam::P {
        return Ok(None);
    }
    let mut sorted: Vec<&Cell> = cells.iter().collect();
    sorted.sort_by(|a, b| a.p.total_cmp(&b.p));
    let Some(first) = sorted.iter().find(|c| c.status == CellStatus::BlowUp) else {
        return Ok(None);
    };
    let Some(last) = sorted
        .iter()
        .rev()
        .find(|c| c.status == CellStatus::Converged && c.p < first.p)
    else {
        return Ok(None);
    };
    let p_plus = specfun::exponents(plan.problem.n, plan.problem.s, first.lambda)?.p_plus;
    Ok(Some(TransitionBand {
        last_converged: last.p,
        first_blowup: first.p,
        width: first.p - last.p,
        p_plus,
        contains_p_plus: last.p <= p_plus && p_plus <= first.p,
    }))
}

/// One row of the exponent table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub lambda: f64,
    pub valid: bool,
    pub alpha_lambda: f64,
    pub mu_lambda: f64,
    pub mubar_lambda: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    /// Whether `p* < p₋ ≤ (N+2s)/(N−2s+2) ≤ p₊ < 2s` holds (equalities
    /// only at `λ = Λ_{N,s}`).
    pub chain_ok: bool,
}

/// Exponents for each `λ`; out-of-range entries are kept as invalid rows.
pub fn exponent_table(n: u32, s: f64, lambda_grid: &[f64]) -> Result<Vec<ExponentRow>> {
    specfun::hardy_constant(n, s)?;
    Ok(lambda_grid
        .iter()
        .map(|&lambda| match specfun::exponents(n, s, lambda) {
            Ok(e) => {
                let chain_ok = if e.alpha_lambda == 0.0 {
                    let mid = e.p_mid();
                    e.p_star < e.p_minus
                        && (e.p_minus - mid).abs() <= 1e-12 * mid
                        && (e.p_plus - mid).abs() <= 1e-12 * mid
                        && e.p_plus < 2.0 * s
                } else {
                    e.chain_holds()
                };
                ExponentRow {
                    lambda,
                    valid: true,
                    alpha_lambda: e.alpha_lambda,
                    mu_lambda: e.mu_lambda,
                    mubar_lambda: e.mubar_lambda,
                    p_minus: e.p_minus,
                    p_plus: e.p_plus,
                    chain_ok,
                }
            }
            Err(_) => ExponentRow {
                lambda,
                valid: false,
                alpha_lambda: f64::NAN,
                mu_lambda: f64::NAN,
                mubar_lambda: f64::NAN,
                p_minus: f64::NAN,
                p_plus: f64::NAN,
                chain_ok: false,
            },
        })
        .collect())
}

/// CSV of an exponent table; invalid rows have empty numeric fields.
pub fn exponent_table_csv(rows: &[ExponentRow]) -> String {
    let mut out =
        String::from("lambda,valid,alpha_lambda,mu_lambda,mubar_lambda,p_minus,p_plus,chain_ok\n");
    for r in rows {
        let num = |x: f64| if r.valid { fmt17(x) } else { String::new() };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt17(r.lambda),
            r.valid,
            num(r.alpha_lambda),
            num(r.mu_lambda),
            num(r.mubar_lambda),
            num(r.p_minus),
            num(r.p_plus),
            r.chain_ok
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values_hit_endpoints() {
        let a = AxisSpec {
            param: SweepParam::P,
            start: 0.9,
            stop: 1.1,
            steps: 9,
            scale: AxisScale::PPlus,
        };
        let v = a.values();
        assert_eq!(v.len(), 9);
        assert_eq!(v[0], 0.9);
        assert_eq!(v[4], 1.0);
        assert_eq!(v[8], 1.1);
    }

    #[test]
    fn two_axis_ordering() {
        let mut plan = SweepPlan::desk_p_sweep().unwrap();
        plan.axes = vec![
            AxisSpec {
                param: SweepParam::Lambda,
                start: 0.2,
                stop: 0.8,
                steps: 2,
                scale: AxisScale::HardyConstant,
            },
            AxisSpec {
                param: SweepParam::P,
                start: 0.9,
                stop: 1.1,
                steps: 3,
                scale: AxisScale::PPlus,
            },
        ];
        assert_eq!(plan.cell_count(), 6);
        assert_eq!(plan.coords(0), vec![0.2, 0.9]);
        assert_eq!(plan.coords(4), vec![0.8, 1.0]);
        plan.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_plans() {
        let mut plan = SweepPlan::desk_p_sweep().unwrap();
        plan.budget = 3;
        assert!(matches!(plan.validate(), Err(Error::Config(_))));
        let mut plan = SweepPlan::desk_p_sweep().unwrap();
        plan.axes[0].scale = AxisScale::HardyConstant;
        assert!(matches!(plan.validate(), Err(Error::Config(_))));
        let mut plan = SweepPlan::desk_p_sweep().unwrap();
        plan.axes = vec![AxisSpec {
            param: SweepParam::Lambda,
            start: 0.1,
            stop: 1.0,
            steps: 3,
            scale: AxisScale::Absolute,
        }];
        assert!(matches!(plan.validate(), Err(Error::Domain(_))));
    }

    #[test]
    fn exponent_table_rows() {
        let (n, s) = (3, 0.75);
        let big = specfun::hardy_constant(n, s).unwrap();
        let grid: Vec<f64> = (1..=10)
            .map(|k| big * f64::from(k) / 10.0)
            .chain([1.5 * big, -1.0])
            .collect();
        let rows = exponent_table(n, s, &grid).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rows[..10].iter().all(|r| r.valid && r.chain_ok));
        assert!(!rows[10].valid && !rows[11].valid);
        assert!(rows[..10]
            .windows(2)
            .all(|w| w[1].p_plus < w[0].p_plus && w[1].p_minus > w[0].p_minus));
        let last = rows[9];
        assert!((last.p_plus - last.p_minus).abs() < 1e-12);
        let csv = exponent_table_csv(&rows);
        assert_eq!(csv.lines().count(), 13);
        assert!(csv
            .lines()
            .last()
            .unwrap()
            .starts_with("-1.0000000000000000e0,false,,"));
    }
}
