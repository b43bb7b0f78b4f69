//! Closed-form radial solutions and power-law supersolutions `w = A|x|^{−θ}`.
//!
//! For a power `w = A r^{−θ}` on the whole space,
//! `(−Δ)ˢw − λ w/|x|^{2s} = (γ(θ) − λ) A r^{−θ−2s}` with `γ(θ)` the power
//! multiplier and `|∇w| = Aθ r^{−θ−1}`. Every inequality below is therefore a
//! scalar inequality between coefficients of powers of `r`, checked exactly on
//! `B_R` and then, optionally, against the discrete operator.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_domain, Error, Result};
use crate::radialop::{OperatorMatrix, RadialField, RadialGrid, ORACLE_TOLERANCE};
use crate::specfun::{self, ProblemParams};

/// Relative offset of `θ` from `μ(λ)` as a fraction of the window width.
pub const WINDOW_FRACTION: f64 = 0.1;
/// Floor for the offset of `θ` from `μ(λ)`.
pub const WINDOW_FLOOR: f64 = 1e-4;
/// Number of equal parts of the window scanned for `θ` when the default
/// offset leaves no positive margin.
const THETA_SCAN: i32 = 20;
/// Exponent range `k` of the amplitude sweep `A = 2^k A_ref`.
const AMPLITUDE_SWEEP: std::ops::RangeInclusive<i32> = -64..=32;
/// Fraction of outer nodes excluded from the grid check.
pub const BOUNDARY_EXCLUSION: f64 = 0.05;

/// Which construction produced a spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupersolutionKind {
    /// `A|x|^{−θ₀}` solving the whole-space equation with `μ = 0` exactly.
    ExactHomogeneous,
    /// Supersolution of the Dirichlet problem on `B_R`.
    DirichletSupersolution,
    /// Supersolution of the problem with damped gradient term `|∇u|ᵖ/u^α`.
    DampedSupersolution,
}

/// A power-law source `f = constant · |x|^{−exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSource {
    pub exponent: f64,
    pub constant: f64,
}

impl PowerSource {
    /// The profile `|x|^{−2s}`.
    pub fn hardy_profile(s: f64) -> Self {
        PowerSource {
            exponent: 2.0 * s,
            constant: 1.0,
        }
    }

    /// `f(r)`.
    pub fn value(&self, r: f64) -> f64 {
        self.constant * r.powf(-self.exponent)
    }

    /// Smallest `C` with `f ≤ C|x|^{−q}` on `B_R`, or `None` when `f` is more
    /// singular than `|x|^{−q}`.
    pub fn bound_constant(&self, q: f64, r_max: f64) -> Option<f64> {
        if self.constant <= 0.0 {
            Some(0.0)
        } else if self.exponent <= q {
            Some(self.constant * r_max.powf(q - self.exponent))
        } else {
            None
        }
    }
}

/// `w = A|x|^{−θ}` together with the window it was checked against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionSpec {
    pub theta: f64,
    #[serde(rename = "A")]
    pub amplitude: f64,
    /// Admissible exponent window `(θ_low, θ_high)`.
    pub window: (f64, f64),
    pub kind: SupersolutionKind,
    /// Coefficient slack `(γ−λ)A − sup_{B_R}(gradient term) − μ C_f`, in
    /// units of `r^{−θ−2s}`; zero for the exact solution.
    pub margin: f64,
    /// Radius of the ball the margin refers to (`None` for whole-space specs).
    #[serde(rename = "R")]
    pub r_max: Option<f64>,
    /// Largest source scale the damped spec tolerates for `f ≤ |x|^{−(θ+2s)}`;
    /// `None` on a damped spec means no upper limit.
    pub c_star: Option<f64>,
    /// Damping exponent of a damped spec.
    pub alpha_damp: Option<f64>,
}

impl SupersolutionSpec {
    /// `w(r)`.
    pub fn value(&self, r: f64) -> f64 {
        self.amplitude * r.powf(-self.theta)
    }

    /// Nodal samples of `w`.
    pub fn field(&self, grid: &RadialGrid) -> Result<RadialField> {
        RadialField::from_fn(grid, |r| self.value(r))
    }

    /// `sup_{grid} w = w(r_1)`.
    pub fn sup_bound(&self, grid: &RadialGrid) -> f64 {
        self.value(grid.nodes()[0])
    }
}

/// Homogeneous whole-space solution `A|x|^{−θ₀}`, `θ₀ = (2s−p)/(p−1)`,
/// with `γ(θ₀) − λ = A^{p−1} θ₀^p`. Requires `p₋ < p < p₊`.
pub fn exact_radial_solution(params: &ProblemParams) -> Result<SupersolutionSpec> {
    let e = specfun::critical_exponents(params)?;
    let (n, s, lambda, p) = (params.n, params.s, params.lambda, params.p);
    let th = specfun::theta0(p, s);
    let excess = specfun::power_multiplier(th, n, s).map(|g| g - lambda);
    let ok = p > e.p_minus && p < e.p_plus;
    let excess = match (ok, excess) {
        (true, Ok(x)) if x > 0.0 => x,
        (_, Ok(x)) => {
            return Err(Error::Domain(format!(
                "p = {p} lies outside (p-, p+) = ({}, {}); gamma - lambda = {x:e} admits no positive amplitude",
                e.p_minus, e.p_plus
            )))
        }
        (_, Err(_)) => {
            return Err(Error::Domain(format!(
                "p = {p} lies outside (p-, p+) = ({}, {}); theta0 = {th} is outside (0, N-2s)",
                e.p_minus, e.p_plus
            )))
        }
    };
    let amplitude = (excess / th.powf(p)).powf(1.0 / (p - 1.0));
    Ok(SupersolutionSpec {
        theta: th,
        amplitude,
        window: (e.mu_lambda, e.mubar_lambda.min(th)),
        kind: SupersolutionKind::ExactHomogeneous,
        margin: 0.0,
        r_max: None,
        c_star: None,
        alpha_damp: None,
    })
}

/// `γ(θ) − λ − A^{p−1}θ^p` for a spec and parameter point.
pub fn exact_residual(spec: &SupersolutionSpec, params: &ProblemParams) -> Result<f64> {
    let g = specfun::power_multiplier(spec.theta, params.n, params.s)?;
    Ok(g - params.lambda - spec.amplitude.powf(params.p - 1.0) * spec.theta.powf(params.p))
}

/// `μ + ε` with `ε = max(0.1·(high−μ), 1e−4)`, or `0.1·(high−μ)` when the
/// floor would leave the window.
fn exponent_near_mu(mu: f64, high: f64) -> f64 {
    let width = high - mu;
    let eps = (WINDOW_FRACTION * width).max(WINDOW_FLOOR);
    if eps < width {
        mu + eps
    } else {
        mu + WINDOW_FRACTION * width
    }
}

/// Best amplitude of the sweep `2^k a_ref` for the concave coefficient
/// margin `a ↦ gain·a − cost·a^q`; returns `(a, gain·a − cost·a^q)`.
fn sweep_amplitude(a_ref: f64, gain: f64, cost: f64, q: f64) -> (f64, f64) {
    let mut best = (a_ref, f64::NEG_INFINITY);
    for k in AMPLITUDE_SWEEP {
        let a = a_ref * 2f64.powi(k);
        let m = gain * a - cost * a.powf(q);
        if m.is_finite() && m > best.1 {
            best = (a, m);
        }
    }
    best
}

/// Supersolution `A|x|^{−θ}` of the Dirichlet problem on `B_R` with
/// `θ ∈ (μ(λ), min(μ̄(λ), θ₀(p)))` close to `μ(λ)`.
///
/// The source must satisfy `f ≤ C_f |x|^{−(θ+2s)}` on `B_R`; the margin is
/// `(γ(θ)−λ)A − A^pθ^p R^{θ+2s−(θ+1)p} − μ C_f`. The default exponent is
/// `μ(λ) + ε` with `ε` a tenth of the window width (at least `1e−4`); when
/// that leaves no positive margin, the window is scanned in twentieths and
/// the exponent with the largest margin is used.
pub fn dirichlet_supersolution(
    params: &ProblemParams,
    source: &PowerSource,
    r_max: f64,
) -> Result<SupersolutionSpec> {
    let e = specfun::critical_exponents(params)?;
    ensure_domain(r_max > 0.0 && r_max.is_finite(), || {
        format!("radius must be positive, got {r_max}")
    })?;
    let (n, s, lambda, p) = (params.n, params.s, params.lambda, params.p);
    let th0 = specfun::theta0(p, s);
    let high = e.mubar_lambda.min(th0);
    ensure_domain(p < e.p_plus && high > e.mu_lambda, || {
        format!(
            "exponent window (mu, min(mubar, theta0)) = ({}, {high}) is empty for p = {p} >= p+ = {}",
            e.mu_lambda, e.p_plus
        )
    })?;
    let bound = |theta: f64| {
        source
            .bound_constant(theta + 2.0 * s, r_max)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "source exponent {} exceeds theta + 2s = {}",
                    source.exponent,
                    theta + 2.0 * s
                ))
            })
    };
    let attempt = |theta: f64| -> Result<(f64, f64, f64, f64)> {
        let c_f = bound(theta)?;
        let gain = specfun::power_multiplier(theta, n, s)? - lambda;
        let decay = theta + 2.0 * s - (theta + 1.0) * p;
        let cost = theta.powf(p) * r_max.powf(decay);
        let a_ref = (gain / theta.powf(p)).powf(1.0 / (p - 1.0));
        let (amplitude, homogeneous) = sweep_amplitude(a_ref, gain, cost, p);
        Ok((theta, amplitude, homogeneous - params.mu * c_f, homogeneous))
    };
    let mut best = attempt(exponent_near_mu(e.mu_lambda, high))?;
    if !(best.2 > 0.0) {
        for k in 1..THETA_SCAN {
            let theta = e.mu_lambda + (high - e.mu_lambda) * f64::from(k) / f64::from(THETA_SCAN);
            if let Ok(candidate) = attempt(theta) {
                if candidate.2 > best.2 {
                    best = candidate;
                }
            }
        }
    }
    let (theta, amplitude, margin, homogeneous) = best;
    if !(margin > 0.0) {
        return Err(Error::Construction(format!(
            "no exponent in the window and no amplitude gives a positive margin: \
             best {margin:e} at theta = {theta}, A = {amplitude:e} (homogeneous slack {homogeneous:e}, \
             source term {:e})",
            homogeneous - margin
        )));
    }
    Ok(SupersolutionSpec {
        theta,
        amplitude,
        window: (e.mu_lambda, high),
        kind: SupersolutionKind::DirichletSupersolution,
        margin,
        r_max: Some(r_max),
        c_star: None,
        alpha_damp: None,
    })
}

/// Transfers a Dirichlet spec from `B_r` to `B_R` through `ŵ(x) = C w(rx/R)`
/// with `C = (r/R)^{θ₀}`, i.e. amplitude `A (r/R)^{θ₀−θ}`. The homogeneous
/// slack scales by the same factor as `A`, so positivity carries over; the
/// returned margin includes the source term on the new ball.
pub fn rescale_supersolution(
    spec: &SupersolutionSpec,
    params: &ProblemParams,
    source: &PowerSource,
    r_to: f64,
) -> Result<SupersolutionSpec> {
    let r_from = spec
        .r_max
        .ok_or_else(|| Error::Usage("only specs built on a ball can be rescaled".to_string()))?;
    ensure_domain(r_to > 0.0 && r_to.is_finite(), || {
        format!("radius must be positive, got {r_to}")
    })?;
    let (n, s, lambda, p) = (params.n, params.s, params.lambda, params.p);
    let th = spec.theta;
    let factor = (r_from / r_to).powf(specfun::theta0(p, s) - th);
    let amplitude = spec.amplitude * factor;
    let gain = specfun::power_multiplier(th, n, s)? - lambda;
    let decay = th + 2.0 * s - (th + 1.0) * p;
    let homogeneous = gain * amplitude - amplitude.powf(p) * th.powf(p) * r_to.powf(decay);
    let c_f = source.bound_constant(th + 2.0 * s, r_to).ok_or_else(|| {
        Error::Domain(format!(
            "source exponent {} exceeds theta + 2s",
            source.exponent
        ))
    })?;
    Ok(SupersolutionSpec {
        amplitude,
        margin: homogeneous - params.mu * c_f,
        r_max: Some(r_to),
        ..*spec
    })
}

/// Supersolution `A|x|^{−β}` for the damped problem
/// `(−Δ)ˢv ≥ λv/|x|^{2s} + |∇v|ᵖ/v^α + c f` on `B_R` with
/// `f ≤ |x|^{−(β+2s)}`. Needs `α > 2s−1` and `p < 2s`, which make
/// `(β(α+1)+2s)/(β+1) > 2s > p` for every `β > 0`.
///
/// The slack is `(γ(β)−λ)A − A^{p−α}β^p R^{β+2s−(β+1)p+αβ}`. Since
/// `p − α < 1` it is unbounded in `A`, so every source scale `c` is
/// admissible and `c*` is reported as `None` (no upper limit).
pub fn damped_supersolution(
    n: u32,
    s: f64,
    lambda: f64,
    p: f64,
    alpha_damp: f64,
    r_max: f64,
) -> Result<SupersolutionSpec> {
    ensure_domain(alpha_damp > 2.0 * s - 1.0, || {
        format!(
            "damping exponent must exceed 2s - 1 = {}, got {alpha_damp}",
            2.0 * s - 1.0
        )
    })?;
    ensure_domain(p > 1.0 && p < 2.0 * s, || {
        format!("need 1 < p < 2s = {}, got {p}", 2.0 * s)
    })?;
    ensure_domain(r_max > 0.0 && r_max.is_finite(), || {
        format!("radius must be positive, got {r_max}")
    })?;
    ProblemParams {
        n,
        s,
        lambda,
        p,
        mu: 0.0,
    }
    .validate()?;
    let e = specfun::exponents(n, s, lambda)?;
    let beta = exponent_near_mu(e.mu_lambda, e.mubar_lambda);
    if (beta * (alpha_damp + 1.0) + 2.0 * s) / (beta + 1.0) <= p {
        return Err(Error::Construction(format!(
            "beta = {beta} violates (beta(alpha+1)+2s)/(beta+1) > p"
        )));
    }
    let gain = specfun::power_multiplier(beta, n, s)? - lambda;
    let decay = beta + 2.0 * s - (beta + 1.0) * p + alpha_damp * beta;
    let cost = beta.powf(p) * r_max.powf(decay);
    // p < 2s < 1 + α, so the gradient term grows sublinearly in A and the
    // slack is unbounded: take the amplitude at which it uses half the gain.
    let q = p - alpha_damp;
    let amplitude = (2.0 * cost / gain).powf(1.0 / (1.0 - q));
    let margin = 0.5 * gain * amplitude;
    if !(margin > 0.0) {
        return Err(Error::Construction(format!(
            "no amplitude gives a positive margin for beta = {beta} (best {margin:e})"
        )));
    }
    Ok(SupersolutionSpec {
        theta: beta,
        amplitude,
        window: (e.mu_lambda, e.mubar_lambda),
        kind: SupersolutionKind::DampedSupersolution,
        margin,
        r_max: Some(r_max),
        c_star: None,
        alpha_damp: Some(alpha_damp),
    })
}

/// Whether some `β > 0` satisfies `(β(α+1)+2s)/(β+1) > 2s`, i.e. `α > 2s−1`.
pub fn damped_admissible(s: f64, alpha_damp: f64) -> bool {
    alpha_damp > 2.0 * s - 1.0
}

/// Condition `2s−1 < α < p+1−p/s` for the absorption variant with `1/u^α`
/// in place of the damped gradient term. Recorded only; no construction
/// uses it.
pub fn absorption_condition(s: f64, p: f64, alpha: f64) -> bool {
    2.0 * s - 1.0 < alpha && alpha < p + 1.0 - p / s
}

/// `T_k(σ) = max(−k, min(k, σ))`.
pub fn truncate(sigma: f64, k: f64) -> Result<f64> {
    ensure_domain(k > 0.0, || {
        format!("truncation level must be positive, got {k}")
    })?;
    Ok(sigma.clamp(-k, k))
}

/// Result of checking a spec against the discrete operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    /// `min_i (LHS − RHS)_i r_i^{θ+2s}` over checked nodes.
    pub min_margin: f64,
    pub worst_node: usize,
    pub nodes_checked: usize,
    /// `ORACLE_TOLERANCE · γ(θ) · A`: the operator error budget in the same units.
    pub operator_tolerance: f64,
}

impl GridCheck {
    /// Whether the discrete slack stays above the recorded margin minus the
    /// operator tolerance.
    pub fn passes(&self, spec: &SupersolutionSpec) -> bool {
        self.min_margin >= spec.margin.min(0.0) - self.operator_tolerance
    }
}

/// Evaluates `(−Δ)ˢw − λw/|x|^{2s} − |∇w|ᵖ − μf` with the discrete operator
/// (exterior part of `w` restored analytically) at all nodes except the
/// outer 5%, in units of `r^{−θ−2s}`.
pub fn check_on_grid(
    spec: &SupersolutionSpec,
    params: &ProblemParams,
    source: &PowerSource,
    op: &OperatorMatrix,
) -> Result<GridCheck> {
    let grid = op.grid();
    let (s, lambda, p) = (params.s, params.lambda, params.p);
    let th = spec.theta;
    let w = spec.field(grid)?;
    let lw = op.apply(&w)?;
    let m = grid.len();
    let last = ((1.0 - BOUNDARY_EXCLUSION) * m as f64).floor() as usize;
    let mut out = GridCheck {
        min_margin: f64::INFINITY,
        worst_node: 0,
        nodes_checked: last,
        operator_tolerance: ORACLE_TOLERANCE
            * specfun::power_multiplier(th, params.n, s)?
            * spec.amplitude,
    };
    for i in 0..last {
        let r = grid.nodes()[i];
        let frac = lw.values()[i] - spec.amplitude * op.exterior_power_term(i, th)?;
        let wi = spec.value(r);
        let grad = spec.amplitude * th * r.powf(-th - 1.0);
        let slack =
            frac - lambda * wi * r.powf(-2.0 * s) - grad.powf(p) - params.mu * source.value(r);
        let scaled = slack * r.powf(th + 2.0 * s);
        if scaled < out.min_margin {
            out.min_margin = scaled;
            out.worst_node = i;
        }
    }
    Ok(out)
}
