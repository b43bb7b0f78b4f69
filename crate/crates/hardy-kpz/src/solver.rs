//! Monotone approximation scheme for the truncated problems
//!
//! ```text
//! L u_n = λ T(u_n)/|x|^{2s} + G_n(u_n) + μ f,   G_n = |∇u|ᵖ / ((1 + |∇u|ᵖ/n)(1+u)^α),
//! ```
//!
//! with `T(u) = u/(1+u/n)`, solved by damped Picard iteration for each level
//! `n` of an increasing schedule, starting from `u ≡ 0`.

use nalgebra::{DVector, LU};
use serde::{Deserialize, Serialize};

use crate::construct::{self, PowerSource, SupersolutionSpec};
use crate::error::{ensure_domain, Error, Result};
use crate::radialop::{gradient, OperatorMatrix, RadialField, RadialGrid};
use crate::specfun::{self, ProblemParams};

/// Source term `f ≥ 0`, either nodal or an analytic power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", deny_unknown_fields)]
pub enum Source {
    /// `f = constant · |x|^{−exponent}`.
    Power { exponent: f64, constant: f64 },
    /// Nodal values on the solver grid.
    Nodal { values: Vec<f64> },
}

impl Source {
    /// The analytic descriptor, when there is one.
    pub fn as_power(&self) -> Option<PowerSource> {
        match *self {
            Source::Power { exponent, constant } => Some(PowerSource { exponent, constant }),
            Source::Nodal { .. } => None,
        }
    }

    /// `f` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Source {
        match self {
            Source::Power { exponent, constant } => Source::Power {
                exponent: *exponent,
                constant: constant * factor,
            },
            Source::Nodal { values } => Source::Nodal {
                values: values.iter().map(|v| v * factor).collect(),
            },
        }
    }

    /// Nodal samples on `grid`; rejects negative or non-finite values.
    pub fn sample(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        let values = match self {
            Source::Power { exponent, constant } => grid
                .nodes()
                .iter()
                .map(|r| constant * r.powf(-exponent))
                .collect(),
            Source::Nodal { values } => {
                if values.len() != grid.len() {
                    return Err(Error::Usage(format!(
                        "nodal source has {} values but the grid has {} nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                values.clone()
            }
        };
        ensure_domain(
            values.iter().all(|v: &f64| v.is_finite() && *v >= 0.0),
            || "source must be finite and nonnegative at every node".to_string(),
        )?;
        Ok(values)
    }
}

impl From<PowerSource> for Source {
    fn from(p: PowerSource) -> Self {
        Source::Power {
            exponent: p.exponent,
            constant: p.constant,
        }
    }
}

/// Iteration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverControls {
    /// Increasing truncation levels `n`.
    pub n_schedule: Vec<f64>,
    /// Relative sup-norm tolerance of the inner fixed point.
    pub picard_tol: f64,
    /// Inner iteration cap per level.
    pub picard_max: usize,
    /// Multiple of the supersolution sup bound that classifies blow-up.
    pub blowup_factor: f64,
    /// Picard under-relaxation `ω ∈ (0, 1]`.
    pub damping: f64,
    /// Number of consecutive outer steps with positive, non-decreasing
    /// sup-norm increments that classifies blow-up.
    pub growth_window: usize,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls {
            n_schedule: (0..=12).map(|j| f64::from(1u32 << j)).collect(),
            picard_tol: 1e-8,
            picard_max: 500,
            blowup_factor: 10.0,
            damping: 0.7,
            growth_window: 5,
        }
    }
}

impl SolverControls {
    /// Checks positivity and ordering constraints.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_schedule.is_empty() {
            return bad("n_schedule must not be empty".to_string());
        }
        if !self.n_schedule.iter().all(|n| n.is_finite() && *n > 0.0) {
            return bad("n_schedule entries must be positive".to_string());
        }
        if !self.n_schedule.windows(2).all(|w| w[0] < w[1]) {
            return bad("n_schedule must be strictly increasing".to_string());
        }
        if !(self.picard_tol > 0.0) {
            return bad(format!(
                "picard_tol must be positive, got {}",
                self.picard_tol
            ));
        }
        if self.picard_max == 0 {
            return bad("picard_max must be positive".to_string());
        }
        if !(self.blowup_factor > 1.0) {
            return bad(format!(
                "blowup_factor must exceed 1, got {}",
                self.blowup_factor
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if self.growth_window < 2 {
            return bad(format!(
                "growth_window must be at least 2, got {}",
                self.growth_window
            ));
        }
        Ok(())
    }
}

/// Classification of a solver run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    BlowUp,
    MaxIterations,
}

impl SolveStatus {
    /// Name used in CSV output.
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::BlowUp => "BlowUp",
            SolveStatus::MaxIterations => "MaxIterations",
        }
    }
}

/// One outer step of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: f64,
    pub inner_iterations: usize,
    /// Last relative Picard increment.
    pub residual: f64,
    pub sup_norm: f64,
    /// `min_i (w_i − u_i)` against the supersolution, when one is given.
    pub margin: Option<f64>,
}

/// Outcome of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolveStatus,
    /// Why a run was classified `BlowUp`.
    pub reason: Option<String>,
    pub field: RadialField,
    pub trace: Vec<TraceRow>,
    /// Nodes and steps where `u_{n+1} < u_n − tol·sup u`.
    pub monotonicity_violations: usize,
    /// `‖L u − RHS(u)‖_∞ / ‖RHS(u)‖_∞` at the last level.
    pub fixed_point_residual: f64,
    /// `∫ |∇u|ᵖ dx` on convergence.
    pub gradient_integral: Option<f64>,
    /// `∫ u/|x|^{2s} dx` on convergence.
    pub hardy_integral: Option<f64>,
    /// Sup bound `w(r_1)` of the supersolution used for classification.
    pub supersolution_bound: Option<f64>,
    /// Whether `u ≤ w` held at every node of the final field.
    pub below_supersolution: Option<bool>,
}

impl SolverReport {
    /// Trace as CSV with columns `outer_n,inner_iters,residual,sup_norm,margin`.
    pub fn trace_csv(&self) -> String {
        use crate::io::fmt17;
        let mut out = String::from("outer_n,inner_iters,residual,sup_norm,margin\n");
        for row in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt17(row.n),
                row.inner_iterations,
                fmt17(row.residual),
                fmt17(row.sup_norm),
                row.margin.map(fmt17).unwrap_or_default()
            ));
        }
        out
    }
}

/// Solves the KPZ approximating problems.
pub fn solve_kpz(
    params: &ProblemParams,
    source: &Source,
    op: &OperatorMatrix,
    controls: &SolverControls,
    supersolution: Option<&SupersolutionSpec>,
) -> Result<SolverReport> {
    params.validate()?;
    run(params, 0.0, source, op, controls, supersolution)
}

/// Solves the damped approximating problems with gradient term divided by
/// `(1+u)^α`; `params.mu` plays the role of the source scale `c`.
pub fn solve_damped(
    params: &ProblemParams,
    alpha_damp: f64,
    source: &Source,
    op: &OperatorMatrix,
    controls: &SolverControls,
    supersolution: Option<&SupersolutionSpec>,
) -> Result<SolverReport> {
    params.validate()?;
    ensure_domain(alpha_damp >= 0.0 && alpha_damp.is_finite(), || {
        format!("damping exponent must be nonnegative, got {alpha_damp}")
    })?;
    run(params, alpha_damp, source, op, controls, supersolution)
}

struct Problem<'a> {
    params: &'a ProblemParams,
    alpha: f64,
    f: Vec<f64>,
    hardy_weight: Vec<f64>,
}

impl Problem<'_> {
    fn rhs(&self, u: &RadialField, level: f64) -> Vec<f64> {
        let p = self.params.p;
        let grad = gradient(u);
        let m = u.values().len();
        let mut out: Vec<f64> = (0..m)
            .map(|i| {
                let ui = u.values()[i];
                let g = grad.values()[i].powf(p);
                let damp = if self.alpha == 0.0 {
                    1.0
                } else {
                    (1.0 + ui).powf(self.alpha)
                };
                self.params.lambda * (ui / (1.0 + ui / level)) * self.hardy_weight[i]
                    + g / ((1.0 + g / level) * damp)
                    + self.params.mu * self.f[i]
            })
            .collect();
        out[m - 1] = 0.0;
        out
    }
}

fn run(
    params: &ProblemParams,
    alpha: f64,
    source: &Source,
    op: &OperatorMatrix,
    controls: &SolverControls,
    supersolution: Option<&SupersolutionSpec>,
) -> Result<SolverReport> {
    controls.validate()?;
    let meta = op.meta();
    if meta.n != params.n || meta.s != params.s {
        return Err(Error::Usage(format!(
            "operator was assembled for N = {}, s = {} but the problem has N = {}, s = {}",
            meta.n, meta.s, params.n, params.s
        )));
    }
    let grid = op.grid().clone();
    let problem = Problem {
        params,
        alpha,
        f: source.sample(&grid)?,
        hardy_weight: grid
            .nodes()
            .iter()
            .map(|r| r.powf(-2.0 * params.s))
            .collect(),
    };
    let lu = LU::new(op.matrix().clone());
    if !lu.is_invertible() {
        return Err(Error::Internal("operator matrix is singular".to_string()));
    }
    let w = supersolution.map(|spec| spec.field(&grid)).transpose()?;
    let bound = supersolution.map(|spec| spec.sup_bound(&grid));
    let omega = controls.damping;

    let mut u = RadialField::zeros(&grid);
    let mut trace = Vec::with_capacity(controls.n_schedule.len());
    let mut violations = 0;
    let mut status = SolveStatus::Converged;
    let mut reason = None;
    let mut increments: Vec<f64> = Vec::new();
    let mut last_level = controls.n_schedule[0];

    'outer: for &level in &controls.n_schedule {
        last_level = level;
        let previous = u.clone();
        let mut inner = 0;
        let mut step = f64::INFINITY;
        let mut converged = false;
        while inner < controls.picard_max {
            inner += 1;
            let rhs = problem.rhs(&u, level);
            let solved = lu
                .solve(&DVector::from_vec(rhs))
                .ok_or_else(|| Error::Internal("LU solve failed".to_string()))?;
            let next: Vec<f64> = u
                .values()
                .iter()
                .zip(solved.iter())
                .map(|(a, b)| (1.0 - omega) * a + omega * b)
                .collect();
            if let Some(i) = next.iter().position(|v| !v.is_finite()) {
                return Err(Error::NumericalDivergence(format!(
                    "iterate is not finite at node {i} (level n = {level}, inner step {inner})"
                )));
            }
            let diff = next
                .iter()
                .zip(u.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            u = RadialField::new(grid.clone(), next)?;
            let sup = u.sup_norm();
            step = if sup > 0.0 { diff / sup } else { diff };
            if let Some(b) = bound {
                if sup > controls.blowup_factor * b {
                    status = SolveStatus::BlowUp;
                    reason = Some(format!(
                        "sup norm {sup:e} exceeds {} x supersolution bound {b:e} at n = {level}",
                        controls.blowup_factor
                    ));
                }
            }
            if diff <= controls.picard_tol * sup || diff == 0.0 {
                converged = true;
                break;
            }
            if status == SolveStatus::BlowUp {
                break;
            }
        }
        let sup = u.sup_norm();
        let tol = controls.picard_tol * sup;
        violations += u
            .values()
            .iter()
            .zip(previous.values())
            .filter(|(a, b)| **a < **b - tol)
            .count();
        let margin = w.as_ref().map(|w| {
            w.values()
                .iter()
                .zip(u.values())
                .fold(f64::INFINITY, |m, (wi, ui)| m.min(wi - ui))
        });
        trace.push(TraceRow {
            n: level,
            inner_iterations: inner,
            residual: step,
            sup_norm: sup,
            margin,
        });
        if status == SolveStatus::BlowUp {
            break 'outer;
        }
        if !converged {
            status = SolveStatus::MaxIterations;
            break 'outer;
        }
        increments.push(sup - previous.sup_norm());
        let k = controls.growth_window;
        if increments.len() >= k {
            let tail = &increments[increments.len() - k..];
            if tail.iter().all(|d| *d > 0.0) && tail.windows(2).all(|d| d[1] >= d[0]) {
                status = SolveStatus::BlowUp;
                reason = Some(format!(
                    "sup norm increments grew over {k} consecutive levels (last n = {level})"
                ));
                break 'outer;
            }
        }
    }

    let rhs = problem.rhs(&u, last_level);
    let lu_u = op.apply(&u)?;
    let res = lu_u
        .values()
        .iter()
        .zip(&rhs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fixed_point_residual = if scale > 0.0 { res / scale } else { res };
    let (gradient_integral, hardy_integral) = if status == SolveStatus::Converged {
        let g = gradient(&u);
        let gi = g.integrate(params.n, |_, v| v.powf(params.p));
        let hi = u.integrate(params.n, |r, v| v * r.powf(-2.0 * params.s));
        (Some(gi), Some(hi))
    } else {
        (None, None)
    };
    let below = w
        .as_ref()
        .map(|w| w.values().iter().zip(u.values()).all(|(wi, ui)| ui <= wi));
    Ok(SolverReport {
        status,
        reason,
        field: u,
        trace,
        monotonicity_violations: violations,
        fixed_point_residual,
        gradient_integral,
        hardy_integral,
        supersolution_bound: bound,
        below_supersolution: below,
    })
}

/// Relative offset below `p₊` used for the nearest admissible supersolution.
pub const NEAREST_ADMISSIBLE_OFFSET: f64 = 0.01;

/// Supersolution used to classify a run: the Dirichlet spec at `params`
/// when it exists, otherwise the spec at `p = (1 − 0.01) p₊`. Returns `None`
/// when no power supersolution can be built (for instance, a nodal source or
/// a source scale beyond every margin).
pub fn reference_supersolution(
    params: &ProblemParams,
    source: &Source,
    r_max: f64,
) -> Result<Option<SupersolutionSpec>> {
    let Some(power) = source.as_power() else {
        return Ok(None);
    };
    let e = specfun::critical_exponents(params)?;
    let nearest = ProblemParams {
        p: params.p.min((1.0 - NEAREST_ADMISSIBLE_OFFSET) * e.p_plus),
        ..*params
    };
    match construct::dirichlet_supersolution(&nearest, &power, r_max) {
        Ok(spec) => Ok(Some(spec)),
        Err(Error::Construction(_)) | Err(Error::Domain(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Outcome of the source-threshold probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Whether a Converged/BlowUp bracket was found.
    pub bracketed: bool,
    /// Largest `μ` seen to converge.
    pub mu_lo: Option<f64>,
    /// Smallest `μ` seen not to converge.
    pub mu_hi: Option<f64>,
    /// Geometric midpoint of the bracket.
    pub estimate: Option<f64>,
    /// `(μ, status)` for every solver run, in order.
    pub evaluations: Vec<(f64, SolveStatus)>,
    pub note: Option<String>,
}

/// Lower and upper limits of the probed `μ` range.
pub const PROBE_RANGE: (f64, f64) = (1e-8, 1e8);
/// Relative bracket width at which bisection stops.
pub const PROBE_WIDTH: f64 = 0.05;

/// Brackets the source scale `μ*` separating convergence from blow-up by
/// decade stepping from `params.mu` (or `1e−3` when zero) and bisection in
/// `ln μ`. Runs that do not converge count as the upper side.
pub fn mu_threshold_probe(
    params: &ProblemParams,
    source: &Source,
    op: &OperatorMatrix,
    controls: &SolverControls,
) -> Result<ProbeResult> {
    params.validate()?;
    let mut evaluations = Vec::new();
    let mut classify = |mu: f64| -> Result<bool> {
        let p = ProblemParams { mu, ..*params };
        let status = solve_kpz(&p, source, op, controls, None)?.status;
        evaluations.push((mu, status));
        Ok(status == SolveStatus::Converged)
    };
    let (lo_lim, hi_lim) = PROBE_RANGE;
    let start = if params.mu > 0.0 {
        params.mu.clamp(lo_lim, hi_lim)
    } else {
        1e-3
    };
    let mut lo = None;
    let mut hi = None;
    if classify(start)? {
        lo = Some(start);
        let mut mu = start;
        while mu < hi_lim {
            mu = (mu * 10.0).min(hi_lim);
            if classify(mu)? {
                lo = Some(mu);
            } else {
                hi = Some(mu);
                break;
            }
        }
    } else {
        hi = Some(start);
        let mut mu = start;
        while mu > lo_lim {
            mu = (mu / 10.0).max(lo_lim);
            if classify(mu)? {
                lo = Some(mu);
                break;
            } else {
                hi = Some(mu);
            }
        }
    }
    let (Some(mut a), Some(mut b)) = (lo, hi) else {
        let note = if lo.is_some() {
            "every probed source scale converged; no upper bracket".to_string()
        } else {
            "no probed source scale converged; no lower bracket".to_string()
        };
        return Ok(ProbeResult {
            bracketed: false,
            mu_lo: lo,
            mu_hi: hi,
            estimate: None,
            evaluations,
            note: Some(note),
        });
    };
    while (b - a) / a > PROBE_WIDTH {
        let mid = (a * b).sqrt();
        if classify(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(ProbeResult {
        bracketed: true,
        mu_lo: Some(a),
        mu_hi: Some(b),
        estimate: Some((a * b).sqrt()),
        evaluations,
        note: None,
    })
}
