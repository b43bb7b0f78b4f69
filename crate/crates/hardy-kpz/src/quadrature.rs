//! Cached Gauss–Legendre rules mapped to the unit interval.

use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
#[derive(Debug)]
pub(crate) struct UnitRule {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl UnitRule {
    fn new(order: usize) -> Self {
        let rule = GaussLegendre::new(order).expect("Gauss-Legendre order must be at least 2");
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        UnitRule {
            x: pairs.iter().map(|&(x, _)| 0.5 * (x + 1.0)).collect(),
            w: pairs.iter().map(|&(_, w)| 0.5 * w).collect(),
        }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        self.x
            .iter()
            .zip(&self.w)
            .map(|(&x, &w)| w * f(a + len * x))
            .sum::<f64>()
            * len
    }
}

macro_rules! cached_rule {
    ($name:ident, $order:expr) => {
        pub(crate) fn $name() -> &'static UnitRule {
            static RULE: OnceLock<UnitRule> = OnceLock::new();
            RULE.get_or_init(|| UnitRule::new($order))
        }
    };
}

cached_rule!(gl12, 12);
cached_rule!(gl16, 16);
cached_rule!(gl24, 24);
cached_rule!(gl32, 32);

/// Splits `[a, b]` (not containing `center` in its interior) into panels whose
/// length equals their distance to `center`, so that a fixed-order rule
/// resolves the algebraic singularity at `center` uniformly.
pub(crate) fn geometric_panels(a: f64, b: f64, center: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if b <= center {
        let mut x = b;
        loop {
            let next = x - (center - x);
            if next <= a + 1e-15 * center {
                out.push((a, x));
                break;
            }
            out.push((next, x));
            x = next;
        }
        out.reverse();
    } else {
        let mut x = a;
        loop {
            let next = x + (x - center);
            if next >= b {
                out.push((x, b));
                break;
            }
            out.push((x, next));
            x = next;
        }
    }
    out
}
