//! Graded radial grids, radial fields, the discrete radial fractional
//! Laplacian with exterior-zero condition, and the Hardy–Rayleigh quotient.
//!
//! For a radial `u` vanishing outside `B_R`,
//!
//! ```text
//! (−Δ)ˢu(r) = C ∫₀^R (u(r) − u(ρ)) K(r, ρ) ρ^{N−1} dρ + C κ(r) u(r),
//! K(r, ρ)   = ∫_{S^{N−1}} |r e₁ − ρ ω|^{−N−2s} dω,
//! κ(r)      = ∫_R^∞ K(r, ρ) ρ^{N−1} dρ,
//! ```
//!
//! with `C = 2 a_{N,s}` the single-difference principal-value constant.
//!
//! # Discretization
//!
//! Nodes are `r_i = R (i/M)^g`, `i = 1..M`. In the variable `ξ = ln ρ` the
//! trial function is `ρ^{−θ_ref} v(ρ)` with `v` piecewise linear between
//! nodes and constant on `[0, r_1]`; `θ_ref = 0` by default. Each row splits
//! the integral into
//!
//! * a symmetric window `[r − h, r + h]`, where `v` is replaced by the
//!   quadratic through the three neighbouring nodes and the two one-sided
//!   differences are integrated together (second-difference form) after the
//!   substitution `t = h v^{1/(2−2s)}`, which removes the `t^{1−2s}` endpoint
//!   behaviour;
//! * far cells integrated with 12-point Gauss–Legendre rules on panels whose
//!   length equals their distance to `r`;
//! * the exterior term `κ(r)`, integrated on panels up to a cutoff radius and
//!   closed by the hypergeometric tail series.
//!
//! With `θ_ref = 0` every far weight is nonnegative and each row sums to
//! `C κ(r) > 0`, so the matrix is a Z-matrix with a discrete maximum
//! principle. The last node `r_M = R` carries a boundary row whose only entry
//! is the diagonal of its neighbour.
//!
//! The kernel is evaluated by the hypergeometric series when
//! `min(r, ρ)/max(r, ρ) ≤ 1/2`, by the closed form for `N = 3`, and by
//! composite Gauss–Legendre quadrature in the polar angle otherwise. Angular
//! quadrature compares a 16-point and a 32-point rule on every panel and
//! fails assembly when they disagree by more than `1e-8` relative.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_domain, Error, Result};
use crate::quadrature::{geometric_panels, gl12, gl16, gl24, gl32};
use crate::specfun::{self, log_gamma};

/// Relative tolerance for the angular quadrature error estimate.
pub const ANGULAR_TOLERANCE: f64 = 1e-8;
/// Default far-field cutoff radius, as a multiple of `R`.
pub const DEFAULT_FAR_CUTOFF: f64 = 40.0;
/// Default relative tolerance of the power-function oracle.
pub const ORACLE_TOLERANCE: f64 = 0.02;
/// Multiplier below which the oracle switches to an absolute criterion.
pub const ORACLE_ABSOLUTE_SWITCH: f64 = 0.05;
/// Absolute tolerance (in multiplier units) used near `θ = 0`.
pub const ORACLE_ABSOLUTE_TOLERANCE: f64 = 1e-3;
/// Documented discretization slack of the discrete Hardy inequality.
pub const HARDY_SLACK: f64 = 0.05;
/// Maximum number of window halvings used to keep a row monotone.
const MAX_WINDOW_HALVINGS: usize = 12;
/// Order of the larger angular Gauss–Legendre rule.
pub const ANGULAR_ORDER: usize = 32;

/// Surface area `|S^{d}| = 2π^{(d+1)/2} / Γ((d+1)/2)` of the unit `d`-sphere.
pub fn sphere_area(d: u32) -> f64 {
    let half = f64::from(d + 1) / 2.0;
    2.0 * (half * PI.ln() - log_gamma(half).expect("positive argument")).exp()
}

/// Volume of the `N`-dimensional ball of radius `R`.
pub fn ball_volume(n: u32, r: f64) -> f64 {
    sphere_area(n - 1) * r.powi(n as i32) / f64::from(n)
}

// ---------------------------------------------------------------------------
// Grid and fields
// ---------------------------------------------------------------------------

/// Graded nodes `r_i = R (i/M)^g`, `i = 1..M`, on `(0, R]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    r_max: f64,
    m: usize,
    grading: f64,
    nodes: Vec<f64>,
}

/// Builds a graded radial grid on `(0, R]`.
pub fn build_grid(r_max: f64, m: usize, grading: f64) -> Result<RadialGrid> {
    if m < 16 {
        return Err(Error::Config(format!(
            "grid needs at least 16 nodes, got M = {m}"
        )));
    }
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::Config(format!(
            "grid radius R must be positive, got {r_max}"
        )));
    }
    if !(grading >= 1.0 && grading.is_finite()) {
        return Err(Error::Config(format!(
            "grading exponent g must be at least 1, got {grading}"
        )));
    }
    let nodes = (1..=m)
        .map(|i| r_max * (i as f64 / m as f64).powf(grading))
        .collect();
    Ok(RadialGrid {
        r_max,
        m,
        grading,
        nodes,
    })
}

impl RadialGrid {
    /// Domain radius `R`.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Node count `M`.
    pub fn len(&self) -> usize {
        self.m
    }

    /// Always false: grids hold at least 16 nodes.
    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Grading exponent `g`.
    pub fn grading(&self) -> f64 {
        self.grading
    }

    /// Node radii `r_1 < … < r_M = R`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Whether two grids are identical node for node.
    pub fn same_as(&self, other: &RadialGrid) -> bool {
        self.m == other.m
            && self.r_max.to_bits() == other.r_max.to_bits()
            && self.grading.to_bits() == other.grading.to_bits()
    }

    /// Quadrature weights for `∫_{B_R} u dx` in dimension `N`: exact integrals
    /// of the piecewise-linear (in `r`) nodal interpolant times `|S^{N−1}| r^{N−1}`,
    /// with `u ≡ u_1` on `[0, r_1]`. They reproduce `|B_R|` exactly.
    pub fn weights(&self, n: u32) -> Vec<f64> {
        let area = sphere_area(n - 1);
        let nm1 = (n - 1) as i32;
        let mut w = vec![0.0; self.m];
        w[0] += area * self.nodes[0].powi(n as i32) / f64::from(n);
        let rule = gl12();
        for c in 1..self.m {
            let (a, b) = (self.nodes[c - 1], self.nodes[c]);
            let len = b - a;
            w[c - 1] += area * rule.integrate(a, b, |x| (b - x) / len * x.powi(nm1));
            w[c] += area * rule.integrate(a, b, |x| (x - a) / len * x.powi(nm1));
        }
        w
    }

    /// Index of the last node with `r ≤ radius`, if any.
    pub fn last_index_at_most(&self, radius: f64) -> Option<usize> {
        self.nodes.iter().rposition(|&r| r <= radius)
    }
}

/// Nodal values of a radial function on a grid; `u ≡ 0` outside `B_R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialField {
    /// Wraps nodal values; rejects length mismatch and non-finite entries.
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "field value at node {i} is not finite"
            )));
        }
        Ok(RadialField { grid, values })
    }

    /// Samples `f(r)` at the nodes.
    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes.iter().map(|&r| f(r)).collect();
        RadialField::new(grid.clone(), values)
    }

    /// The zero field.
    pub fn zeros(grid: &RadialGrid) -> Self {
        RadialField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    /// The grid the values live on.
    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// Nodal values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Consumes the field and returns its values.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Whether every nodal value is nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Maximum absolute nodal value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Grid quadrature of `∫_{B_R} g(r, u(r)) dx` in dimension `N`.
    pub fn integrate(&self, n: u32, g: impl Fn(f64, f64) -> f64) -> f64 {
        let w = self.grid.weights(n);
        self.grid
            .nodes
            .iter()
            .zip(&self.values)
            .zip(&w)
            .map(|((&r, &u), &wi)| wi * g(r, u))
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Kernel
// ---------------------------------------------------------------------------

/// How kernel values with `min(r,ρ)/max(r,ρ) > 1/2` are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMethod {
    /// Closed form for `N = 3`, angular quadrature otherwise.
    #[default]
    Auto,
    /// Angular quadrature in every dimension.
    Angular,
}

/// Angular average kernel `K(r, ρ)` without the constant `C`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel {
    n: u32,
    s: f64,
    exponent: f64,
    sphere_nm1: f64,
    sphere_nm2: f64,
    closed_form: bool,
}

impl Kernel {
    pub(crate) fn new(n: u32, s: f64, method: KernelMethod) -> Self {
        Kernel {
            n,
            s,
            exponent: (f64::from(n) + 2.0 * s) / 2.0,
            sphere_nm1: sphere_area(n - 1),
            sphere_nm2: if n >= 2 { sphere_area(n - 2) } else { 0.0 },
            closed_form: n == 3 && method == KernelMethod::Auto,
        }
    }

    /// `K(r, r + d)` for `r > 0`, `d ≠ 0`, `r + d > 0`.
    pub(crate) fn eval(&self, r: f64, d: f64) -> Result<f64> {
        let rho = r + d;
        let (lo, hi) = if rho < r { (rho, r) } else { (r, rho) };
        let ratio = lo / hi;
        if ratio <= 0.5 {
            return Ok(self.sphere_nm1
                * hi.powf(-2.0 * self.exponent)
                * self.series(ratio * ratio));
        }
        if self.closed_form {
            let e = -1.0 - 2.0 * self.s;
            return Ok(
                2.0 * PI * (d.abs().powf(e) - (r + rho).powf(e)) / ((1.0 + 2.0 * self.s) * r * rho)
            );
        }
        Ok(r.powf(-2.0 * self.exponent) * self.angular(d / r)?)
    }

    /// `₂F₁((N+2s)/2, s+1; N/2; z)` for `0 ≤ z ≤ 1/4`.
    fn series(&self, z: f64) -> f64 {
        let (a, b, c) = (self.exponent, self.s + 1.0, f64::from(self.n) / 2.0);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..400 {
            let kf = f64::from(k);
            term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
            sum += term;
            if term.abs() <= 1e-17 * sum {
                break;
            }
        }
        sum
    }

    /// `K(1, 1 + δ)` by composite Gauss–Legendre quadrature in the polar
    /// angle on panels that double in width away from `φ = 0`.
    fn angular(&self, delta: f64) -> Result<f64> {
        let t = 1.0 + delta;
        let sin_power = (self.n - 2) as i32;
        let integrand = |phi: f64| {
            let half = (0.5 * phi).sin();
            let base = delta * delta + 4.0 * t * half * half;
            base.powf(-self.exponent) * phi.sin().powi(sin_power)
        };
        let mut width = (delta.abs() / t.sqrt()).min(PI);
        let (mut lo, mut coarse, mut fine) = (0.0_f64, 0.0, 0.0);
        while lo < PI {
            let hi = (lo + width).min(PI);
            coarse += gl16().integrate(lo, hi, integrand);
            fine += gl32().integrate(lo, hi, integrand);
            lo = hi;
            width = hi;
        }
        let err = ((fine - coarse) / fine).abs();
        if !(err <= ANGULAR_TOLERANCE) {
            return Err(Error::Assembly(format!(
                "angular quadrature did not converge at rho/r = {t}: estimated relative error {err:e}"
            )));
        }
        Ok(self.sphere_nm2 * fine)
    }

    /// `∫_{ρ_c}^∞ K(r, ρ) ρ^{N−1−θ} dρ` for `r ≤ ρ_c / 2` from the series.
    fn tail(&self, r: f64, rho_c: f64, theta: f64) -> f64 {
        let (a, b, c) = (self.exponent, self.s + 1.0, f64::from(self.n) / 2.0);
        let z = (r / rho_c).powi(2);
        let base = 2.0 * self.s + theta;
        let mut coeff = 1.0;
        let mut zk = 1.0;
        let mut sum = 1.0 / base;
        for k in 0..400 {
            let kf = f64::from(k);
            coeff *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0));
            zk *= z;
            let term = coeff * zk / (base + 2.0 * (kf + 1.0));
            sum += term;
            if term.abs() <= 1e-17 * sum {
                break;
            }
        }
        self.sphere_nm1 * rho_c.powf(-base) * sum
    }

    /// `∫_R^∞ K(r, ρ) ρ^{N−1−θ} dρ`, panels up to `cutoff` plus series tail.
    fn exterior(&self, r: f64, r_max: f64, cutoff: f64, theta: f64) -> Result<f64> {
        let p = f64::from(self.n) - 1.0 - theta;
        let mut total = 0.0;
        for (a, b) in geometric_panels(r_max, cutoff, r) {
            let rule = gl12();
            let len = b - a;
            for (&x, &w) in rule.x.iter().zip(&rule.w) {
                let rho = a + len * x;
                total += w * len * self.eval(r, rho - r)? * rho.powf(p);
            }
        }
        Ok(total + self.tail(r, cutoff, theta))
    }
}

/// `K(r, ρ)` (without the operator constant) for diagnostics and tests.
pub fn kernel_value(n: u32, s: f64, r: f64, rho: f64, method: KernelMethod) -> Result<f64> {
    ensure_domain(r > 0.0 && rho > 0.0 && r != rho, || {
        format!("kernel needs distinct positive radii, got r = {r}, rho = {rho}")
    })?;
    Kernel::new(n, s, method).eval(r, rho - r)
}

// ---------------------------------------------------------------------------
// Operator
// ---------------------------------------------------------------------------

/// Options controlling operator assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblyOptions {
    /// Far-field cutoff as a multiple of `R`; the series tail covers the rest.
    pub far_cutoff: f64,
    /// Exponent `θ_ref` of the weighted trial space `ρ^{−θ_ref} v(ρ)`.
    /// Zero gives the monotone operator; a positive value reproduces
    /// `|x|^{−θ_ref}` exactly but gives up the maximum principle.
    pub singular_exponent: f64,
    /// Kernel evaluation method.
    pub kernel: KernelMethod,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            far_cutoff: DEFAULT_FAR_CUTOFF,
            singular_exponent: 0.0,
            kernel: KernelMethod::Auto,
        }
    }
}

/// Metadata recorded with an assembled operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorMeta {
    #[serde(rename = "N")]
    pub n: u32,
    pub s: f64,
    #[serde(rename = "R")]
    pub r_max: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub g: f64,
    /// Operator constant `C = 2 a_{N,s}` multiplying the kernel.
    pub pv_constant: f64,
    /// Order of the larger angular rule (unused for `N = 3` closed form).
    pub angular_order: usize,
    pub kernel: KernelMethod,
    /// Absolute far-field truncation radius.
    pub far_field_radius: f64,
    pub singular_exponent: f64,
    /// `min_i (L_ii + Σ_{j≠i} min(L_ij, 0)) / L_ii` over interior rows.
    pub max_principle_margin: f64,
    /// Smallest row sum over interior rows (`= C κ(r_i)` for the monotone operator).
    pub min_row_sum: f64,
}

/// Dense `M × M` discretization of `(−Δ)ˢ` on radial fields with exterior zero.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    meta: OperatorMeta,
    grid: RadialGrid,
    matrix: DMatrix<f64>,
    kernel: Kernel,
}

/// Assembles the monotone operator with default options.
pub fn assemble_operator(grid: &RadialGrid, n: u32, s: f64) -> Result<OperatorMatrix> {
    assemble_operator_with(grid, n, s, &AssemblyOptions::default())
}

/// Assembles the operator with explicit options.
pub fn assemble_operator_with(
    grid: &RadialGrid,
    n: u32,
    s: f64,
    opts: &AssemblyOptions,
) -> Result<OperatorMatrix> {
    ensure_domain(n >= 2, || format!("dimension must be at least 2, got {n}"))?;
    ensure_domain(s > 0.0 && s < 1.0 && f64::from(n) > 2.0 * s, || {
        format!("need 0 < s < 1 and N > 2s, got N = {n}, s = {s}")
    })?;
    if !(opts.far_cutoff >= 2.0 && opts.far_cutoff.is_finite()) {
        return Err(Error::Config(format!(
            "far_cutoff must be at least 2 (multiples of R), got {}",
            opts.far_cutoff
        )));
    }
    let th = opts.singular_exponent;
    ensure_domain(th >= 0.0 && th < f64::from(n) - 2.0 * s, || {
        format!("singular_exponent must lie in [0, N-2s), got {th}")
    })?;
    let kernel = Kernel::new(n, s, opts.kernel);
    let c = specfun::pv_constant(n, s)?;
    let m = grid.len();
    let cutoff = opts.far_cutoff * grid.r_max;
    let assembler = RowAssembler {
        grid,
        kernel,
        th,
        cutoff,
    };
    let rows: Vec<Vec<f64>> = (0..m - 1)
        .into_par_iter()
        .map(|i| assembler.row(i))
        .collect::<Result<_>>()?;
    let mut matrix = DMatrix::zeros(m, m);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            matrix[(i, j)] = c * v;
        }
    }
    matrix[(m - 1, m - 1)] = matrix[(m - 2, m - 2)];

    let mut margin = f64::INFINITY;
    let mut min_row_sum = f64::INFINITY;
    for i in 0..m - 1 {
        let diag = matrix[(i, i)];
        let mut neg = 0.0;
        let mut sum = 0.0;
        for j in 0..m {
            let v = matrix[(i, j)];
            sum += v;
            if j != i && v < 0.0 {
                neg += v;
            }
        }
        margin = margin.min((diag + neg) / diag);
        min_row_sum = min_row_sum.min(sum);
    }
    if th == 0.0 && margin < -1e-12 {
        return Err(Error::Assembly(format!(
            "monotone operator violates the maximum principle (margin {margin:e})"
        )));
    }
    let meta = OperatorMeta {
        n,
        s,
        r_max: grid.r_max,
        m,
        g: grid.grading,
        pv_constant: c,
        angular_order: ANGULAR_ORDER,
        kernel: opts.kernel,
        far_field_radius: cutoff,
        singular_exponent: th,
        max_principle_margin: margin,
        min_row_sum,
    };
    Ok(OperatorMatrix {
        meta,
        grid: grid.clone(),
        matrix,
        kernel,
    })
}

struct RowAssembler<'a> {
    grid: &'a RadialGrid,
    kernel: Kernel,
    th: f64,
    cutoff: f64,
}

impl RowAssembler<'_> {
    /// Weighted trial function factor `(ρ/r_j)^{−θ_ref}`.
    fn weight(&self, rho: f64, rj: f64) -> f64 {
        if self.th == 0.0 {
            1.0
        } else {
            (rho / rj).powf(-self.th)
        }
    }

    /// Kernel row `i` (before multiplication by `C`).
    fn row(&self, i: usize) -> Result<Vec<f64>> {
        let nodes = &self.grid.nodes;
        let r = nodes[i];

        // Symmetric window around r.
        let h = if i == 0 {
            0.5 * r.min(nodes[1] - r)
        } else {
            (r - nodes[i - 1]).min(nodes[i + 1] - r)
        };
        // Wide windows at strongly graded nodes in high dimension make the
        // (r ± t)^{N−1} weights so asymmetric that the first-order part of the
        // quadratic stencil produces a positive off-diagonal entry or a negative
        // row sum. Such rows are re-assembled with a narrower window.
        let mut h = h;
        for _ in 0..MAX_WINDOW_HALVINGS {
            let row = self.row_with_window(i, h)?;
            let monotone = row.iter().enumerate().all(|(j, &v)| j == i || v <= 0.0)
                && row.iter().sum::<f64>() >= 0.0;
            if monotone || self.th != 0.0 {
                return Ok(row);
            }
            h *= 0.5;
        }
        self.row_with_window(i, h)
    }

    /// Kernel row `i` with P.V. window half-width `h`.
    fn row_with_window(&self, i: usize, h: f64) -> Result<Vec<f64>> {
        let nodes = &self.grid.nodes;
        let m = nodes.len();
        let nf = f64::from(self.kernel.n);
        let s = self.kernel.s;
        let th = self.th;
        let r = nodes[i];
        let mut row = vec![0.0; m];
        let xi = |j: usize| nodes[j].ln();

        let power = 1.0 / (2.0 - 2.0 * s);
        let rule = gl24();
        for (&v, &w) in rule.x.iter().zip(&rule.w) {
            let t = h * v.powf(power);
            let wt = h * power * v.powf(power - 1.0) * w;
            let w_plus = self.kernel.eval(r, t)? * (r + t).powf(nf - 1.0) * wt;
            let w_minus = self.kernel.eval(r, -t)? * (r - t).powf(nf - 1.0) * wt;
            let e_plus = (t / r).ln_1p();
            let e_minus = (-t / r).ln_1p();
            let x_plus = (-th * e_plus).exp_m1();
            let x_minus = (-th * e_minus).exp_m1();
            if i == 0 {
                // Constant to the left, zero-slope quadratic to the right.
                let d = xi(1) - xi(0);
                let q = (e_plus / d).powi(2);
                row[0] += (-x_plus + (1.0 + x_plus) * q) * w_plus - x_minus * w_minus;
                row[1] += -(1.0 + x_plus) * q * self.weight(r, nodes[1]) * w_plus;
            } else {
                let idx = [i - 1, i, i + 1];
                let xs = [xi(i - 1), xi(i), xi(i + 1)];
                for k in 0..3 {
                    let (o0, o1) = match k {
                        0 => (1, 2),
                        1 => (0, 2),
                        _ => (0, 1),
                    };
                    let den = (xs[k] - xs[o0]) * (xs[k] - xs[o1]);
                    let l0 = if k == 1 { 1.0 } else { 0.0 };
                    let d1 = ((xs[1] - xs[o0]) + (xs[1] - xs[o1])) / den;
                    let d2 = 2.0 / den;
                    let f = self.weight(r, nodes[idx[k]]);
                    // ψ(r) − ψ(r e^e) for ψ = (ρ/r_j)^{−θ} ℓ(ln ρ).
                    let diff = |e: f64, x: f64| {
                        let dl = d1 * e + 0.5 * d2 * e * e;
                        f * (-dl - x * (l0 + dl))
                    };
                    row[idx[k]] += diff(e_plus, x_plus) * w_plus + diff(e_minus, x_minus) * w_minus;
                }
            }
        }

        // Far cells: [0, r_1] carries the constant trial function, [r_{c-1}, r_c]
        // the linear-in-ξ hats.
        let (lo_win, hi_win) = (r - h, r + h);
        let far = gl12();
        for c in 0..m {
            let a = if c == 0 { 0.0 } else { nodes[c - 1] };
            let b = nodes[c];
            let mut segments = Vec::with_capacity(2);
            if b.min(lo_win) > a {
                segments.push((a, b.min(lo_win)));
            }
            if b > a.max(hi_win) {
                segments.push((a.max(hi_win), b));
            }
            for (sa, sb) in segments {
                for (pa, pb) in geometric_panels(sa, sb, r) {
                    let len = pb - pa;
                    for (&x, &w) in far.x.iter().zip(&far.w) {
                        let rho = pa + len * x;
                        let kw = self.kernel.eval(r, rho - r)? * rho.powf(nf - 1.0) * w * len;
                        row[i] += kw;
                        if c == 0 {
                            row[0] -= kw * self.weight(rho, nodes[0]);
                        } else {
                            let (j0, j1) = (c - 1, c);
                            let lam = (rho.ln() - xi(j0)) / (xi(j1) - xi(j0));
                            row[j0] -= kw * self.weight(rho, nodes[j0]) * (1.0 - lam);
                            row[j1] -= kw * self.weight(rho, nodes[j1]) * lam;
                        }
                    }
                }
            }
        }

        row[i] += self.kernel.exterior(r, self.grid.r_max, self.cutoff, 0.0)?;
        Ok(row)
    }
}

/// Outcome of the power-function oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub theta: f64,
    /// Exact multiplier `γ` with `(−Δ)ˢ|x|^{−θ} = γ |x|^{−θ−2s}`.
    pub multiplier: f64,
    /// Largest `|discrete/exact − 1|` over checked nodes.
    pub max_rel_error: f64,
    /// Largest `|discrete·r^{θ+2s} − γ|` over checked nodes.
    pub max_abs_error: f64,
    /// Node (0-based) where the relative error peaks.
    pub worst_node: usize,
    pub nodes_checked: usize,
    /// True when the absolute criterion applies (`γ < 0.05`).
    pub absolute_criterion: bool,
}

impl OracleReport {
    /// The error compared against the tolerance: relative, or absolute in
    /// multiplier units when the multiplier is small.
    pub fn error(&self) -> f64 {
        if self.absolute_criterion {
            self.max_abs_error
        } else {
            self.max_rel_error
        }
    }

    /// Pass/fail with the relative tolerance `tol` (absolute near `θ = 0`).
    pub fn passes(&self, tol: f64) -> bool {
        if self.absolute_criterion {
            self.max_abs_error <= ORACLE_ABSOLUTE_TOLERANCE
        } else {
            self.max_rel_error <= tol
        }
    }
}

/// Oracle error at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeError {
    pub r: f64,
    /// `|discrete/exact − 1|`.
    pub rel_error: f64,
    /// `|discrete·r^{θ+2s} − γ|`.
    pub abs_error: f64,
}

/// Oracle errors on a grid and its refinement, compared at common nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub theta: f64,
    pub coarse_m: usize,
    pub fine_m: usize,
    /// Largest error over the coarse nodes `r ≤ r_max_check`.
    pub coarse_error: f64,
    /// Largest error of the refined operator at the same physical nodes.
    pub fine_error: f64,
    /// `coarse_error / fine_error`.
    pub ratio: f64,
    /// Largest error over all refined nodes `r ≤ r_max_check`.
    pub fine_error_all_nodes: f64,
    pub absolute_criterion: bool,
}

/// Assembles the operator on `(R, M, g)` and `(R, 2M, g)` and compares the
/// oracle errors for `θ` at the coarse nodes, which are every other node of
/// the refined grid. Errors are relative, or absolute when the multiplier is
/// below the absolute switch.
pub fn oracle_refinement(
    grid: &RadialGrid,
    n: u32,
    s: f64,
    opts: &AssemblyOptions,
    theta: f64,
    r_max_check: f64,
) -> Result<RefinementReport> {
    let fine_grid = build_grid(grid.r_max, 2 * grid.m, grid.grading)?;
    let coarse =
        assemble_operator_with(grid, n, s, opts)?.oracle_node_errors(theta, r_max_check)?;
    let fine =
        assemble_operator_with(&fine_grid, n, s, opts)?.oracle_node_errors(theta, r_max_check)?;
    let absolute = specfun::power_multiplier(theta, n, s)? < ORACLE_ABSOLUTE_SWITCH;
    let pick = |e: &NodeError| if absolute { e.abs_error } else { e.rel_error };
    let coarse_error = coarse.iter().map(pick).fold(0.0, f64::max);
    let fine_error = (0..coarse.len())
        .filter_map(|i| fine.get(2 * i + 1))
        .map(pick)
        .fold(0.0, f64::max);
    Ok(RefinementReport {
        theta,
        coarse_m: grid.m,
        fine_m: fine_grid.m,
        coarse_error,
        fine_error,
        ratio: coarse_error / fine_error,
        fine_error_all_nodes: fine.iter().map(pick).fold(0.0, f64::max),
        absolute_criterion: absolute,
    })
}

impl OperatorMatrix {
    /// Assembly metadata.
    pub fn meta(&self) -> &OperatorMeta {
        &self.meta
    }

    /// The grid the operator acts on.
    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// The dense matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `C ∫_R^∞ K(r_i, ρ) ρ^{N−1−θ} dρ`: the exterior contribution of the
    /// untruncated power `|x|^{−θ}` at node `i`.
    pub fn exterior_power_term(&self, i: usize, theta: f64) -> Result<f64> {
        Ok(self.meta.pv_constant
            * self.kernel.exterior(
                self.grid.nodes[i],
                self.grid.r_max,
                self.meta.far_field_radius,
                theta,
            )?)
    }

    fn check_grid(&self, field: &RadialField) -> Result<()> {
        if self.grid.same_as(&field.grid) {
            Ok(())
        } else {
            Err(Error::Usage(
                "field and operator live on different grids".to_string(),
            ))
        }
    }

    /// Matrix-vector product `L u`.
    pub fn apply(&self, field: &RadialField) -> Result<RadialField> {
        self.check_grid(field)?;
        let out = &self.matrix * DVector::from_column_slice(&field.values);
        Ok(RadialField {
            grid: self.grid.clone(),
            values: out.as_slice().to_vec(),
        })
    }

    /// Compares `L|x|^{−θ}` (interior-truncated, exterior part restored
    /// analytically) with `γ r^{−θ−2s}` at interior nodes `r ≤ r_max_check`.
    pub fn oracle_power_test(&self, theta: f64, r_max_check: f64) -> Result<OracleReport> {
        let gamma = specfun::power_multiplier(theta, self.meta.n, self.meta.s)?;
        let errors = self.oracle_node_errors(theta, r_max_check)?;
        let mut report = OracleReport {
            theta,
            multiplier: gamma,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_node: 0,
            nodes_checked: errors.len(),
            absolute_criterion: gamma < ORACLE_ABSOLUTE_SWITCH,
        };
        for (i, e) in errors.iter().enumerate() {
            if e.rel_error > report.max_rel_error {
                report.max_rel_error = e.rel_error;
                report.worst_node = i;
            }
            report.max_abs_error = report.max_abs_error.max(e.abs_error);
        }
        Ok(report)
    }

    /// Per-node oracle errors at interior nodes `r ≤ r_max_check`.
    pub fn oracle_node_errors(&self, theta: f64, r_max_check: f64) -> Result<Vec<NodeError>> {
        let (n, s) = (self.meta.n, self.meta.s);
        let gamma = specfun::power_multiplier(theta, n, s)?;
        let nodes = &self.grid.nodes;
        let last = self
            .grid
            .last_index_at_most(r_max_check)
            .map(|i| i.min(nodes.len() - 2))
            .ok_or_else(|| {
                Error::Domain(format!(
                    "no grid node lies below r_max_check = {r_max_check}"
                ))
            })?;
        let u = RadialField::from_fn(&self.grid, |r| r.powf(-theta))?;
        let lu = self.apply(&u)?;
        (0..=last)
            .map(|i| {
                let r = nodes[i];
                let full = lu.values[i] - self.exterior_power_term(i, theta)?;
                let abs_error = (full * r.powf(theta + 2.0 * s) - gamma).abs();
                Ok(NodeError {
                    r,
                    rel_error: abs_error / gamma,
                    abs_error,
                })
            })
            .collect()
    }

    /// Discrete Hardy–Rayleigh quotient `⟨Lu, u⟩ / ∫ u²/|x|^{2s}` with the
    /// grid quadrature weights.
    pub fn rayleigh_quotient(&self, field: &RadialField) -> Result<f64> {
        self.check_grid(field)?;
        ensure_domain(field.values.iter().any(|&v| v != 0.0), || {
            "Rayleigh quotient of the zero field is undefined".to_string()
        })?;
        let w = self.grid.weights(self.meta.n);
        let lu = self.apply(field)?;
        let two_s = 2.0 * self.meta.s;
        let mut num = 0.0;
        let mut den = 0.0;
        for (((&wi, &u), &lui), &r) in w
            .iter()
            .zip(&field.values)
            .zip(&lu.values)
            .zip(&self.grid.nodes)
        {
            num += wi * lui * u;
            den += wi * u * u * r.powf(-two_s);
        }
        Ok(num / den)
    }

    /// Row-major CSV dump preceded by a `# N,s,R,M,g` header.
    pub fn to_csv(&self) -> String {
        let mut out = crate::io::header_line(self.meta.n, self.meta.s, &self.grid);
        for i in 0..self.grid.m {
            let row: Vec<String> = (0..self.grid.m)
                .map(|j| crate::io::fmt17(self.matrix[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `|du/dr|` from three-point differences in `ξ = ln r`: centered at interior
/// nodes, one-sided at `r_1`, and the jump to the exterior zero at `r_M`.
pub fn gradient(field: &RadialField) -> RadialField {
    let nodes = &field.grid.nodes;
    let u = &field.values;
    let m = nodes.len();
    let mut g = vec![0.0; m];
    let xi: Vec<f64> = nodes.iter().map(|r| r.ln()).collect();
    for i in 1..m - 1 {
        let (a, b, c) = (xi[i - 1], xi[i], xi[i + 1]);
        let d = -(c - b) / ((b - a) * (c - a)) * u[i - 1]
            + ((c - b) - (b - a)) / ((b - a) * (c - b)) * u[i]
            + (b - a) / ((c - b) * (c - a)) * u[i + 1];
        g[i] = d.abs() / nodes[i];
    }
    let (a, b, c) = (xi[0], xi[1], xi[2]);
    let d = -(1.0 / (b - a) + 1.0 / (c - a)) * u[0] + (c - a) / ((b - a) * (c - b)) * u[1]
        - (b - a) / ((c - a) * (c - b)) * u[2];
    g[0] = d.abs() / nodes[0];
    g[m - 1] = u[m - 1].abs() / (nodes[m - 1] - nodes[m - 2]);
    RadialField {
        grid: field.grid.clone(),
        values: g,
    }
}

/// CSV dump of a field (`r,u` rows) preceded by a `# N,s,R,M,g` header.
pub fn field_to_csv(field: &RadialField, n: u32, s: f64) -> String {
    let mut out = crate::io::header_line(n, s, &field.grid);
    out.push_str("r,u\n");
    for (r, u) in field.grid.nodes.iter().zip(&field.values) {
        out.push_str(&format!(
            "{},{}\n",
            crate::io::fmt17(*r),
            crate::io::fmt17(*u)
        ));
    }
    out
}
