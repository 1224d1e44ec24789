//! One-dimensional adaptive quadrature and the breakpoint machinery used to
//! integrate piecewise-smooth functions built from univariate mixtures.

use crate::model::Mixture;

/// Half-width of the integration window around each component, in standard
/// deviations.
pub const WINDOW_SIGMAS: f64 = 12.0;

/// Grid points laid over each component's window before crossing search.
const POINTS_PER_COMPONENT: usize = 161;

const MAX_DEPTH: u32 = 48;

#[derive(Clone, Copy, Debug, Default)]
pub struct QuadResult {
    pub value: f64,
    /// Sum of local Richardson error estimates.
    pub error: f64,
    pub evals: usize,
}

impl std::ops::AddAssign for QuadResult {
    fn add_assign(&mut self, rhs: Self) {
        self.value += rhs.value;
        self.error += rhs.error;
        self.evals += rhs.evals;
    }
}

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol`. The tolerance
/// is split evenly between the halves of every bisection, i.e. in proportion
/// to their length.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> QuadResult {
    if !(b > a) {
        return QuadResult::default();
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut out = QuadResult { evals: 3, ..Default::default() };
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    out: &mut QuadResult,
) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    out.evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // the last clause stops refinement once the correction is below rounding
    let settled = delta.abs() <= 15.0 * tol || delta.abs() <= 1e-15 * (left + right).abs();
    if depth == 0 || settled || lm <= a || rm >= b {
        out.value += left + right + delta / 15.0;
        out.error += delta.abs() / 15.0;
        return;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, out);
    simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, out);
}

/// Sorted, deduplicated grid covering every component window of every
/// mixture. Narrow components get their own fine grid, so no feature is
/// smaller than one cell.
pub fn breakpoints(mixtures: &[&Mixture]) -> Vec<f64> {
    let mut pts = Vec::new();
    for m in mixtures {
        for c in m.components() {
            let (mu, s) = (c.params.mean()[0], c.params.std_dev());
            let steps = POINTS_PER_COMPONENT - 1;
            for i in 0..=steps {
                let t = -WINDOW_SIGMAS + 2.0 * WINDOW_SIGMAS * i as f64 / steps as f64;
                pts.push(mu + t * s);
            }
        }
    }
    pts.retain(|x| x.is_finite());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Adds the roots of `h` (located by bisection) to a sorted grid wherever `h`
/// changes sign between neighbours. `NaN` values count as zero.
pub fn insert_sign_changes<H: Fn(f64) -> f64>(grid: &[f64], h: H) -> Vec<f64> {
    let sign = |x: f64| {
        let v = h(x);
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut out = Vec::with_capacity(grid.len() + 8);
    let Some(&first) = grid.first() else {
        return out;
    };
    out.push(first);
    let mut prev_sign = sign(first);
    for w in grid.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let s_hi = sign(hi);
        if prev_sign * s_hi < 0 {
            let s_lo = prev_sign;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let sm = sign(mid);
                if sm == 0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if sm == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            if root > w[0] && root < w[1] {
                out.push(root);
            }
        }
        out.push(w[1]);
        prev_sign = s_hi;
    }
    out
}

/// Smallest `σ/|μ|` at which a component's window is finely resolved by
/// `f64` points; narrower components are integrated through their CDF.
const MIN_RELATIVE_WIDTH: f64 = 1e-9;

/// Whether every component is wide enough for density-sampling quadrature.
pub fn resolvable(mixtures: &[&Mixture]) -> bool {
    mixtures.iter().flat_map(|m| m.components()).all(|c| {
        let (mu, s) = (c.params.mean()[0], c.params.std_dev());
        s >= MIN_RELATIVE_WIDTH * mu.abs()
    })
}

/// `Φ(zb) − Φ(za)` for `za ≤ zb`, taken from the nearer tail so that far-tail
/// cells keep their relative precision.
fn normal_mass(za: f64, zb: f64) -> f64 {
    let q = |z: f64| 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
    if za >= 0.0 {
        q(za) - q(zb)
    } else if zb <= 0.0 {
        q(-zb) - q(-za)
    } else {
        1.0 - q(-za) - q(zb)
    }
}

/// Mass a univariate mixture puts on `[a, b]`.
pub fn cell_mass(m: &Mixture, a: f64, b: f64) -> f64 {
    m.components()
        .iter()
        .map(|c| {
            let (mu, s) = (c.params.mean()[0], c.params.std_dev());
            c.weight * normal_mass((a - mu) / s, (b - mu) / s)
        })
        .sum()
}

/// Upper bound on the mass a mixture places outside its components'
/// `±WINDOW_SIGMAS` windows (Mills-ratio Gaussian tail bound, both sides).
pub fn window_tail_bound() -> f64 {
    let t = WINDOW_SIGMAS;
    2.0 * (-0.5 * t * t).exp() / ((2.0 * std::f64::consts::PI).sqrt() * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let r = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-10);
        assert!((r.value - 2.0).abs() < 1e-9);
        let r = adaptive_simpson(|x| (-x * x).exp(), -10.0, 10.0, 1e-12);
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(adaptive_simpson(|_| 1.0, 1.0, 1.0, 1e-6).value, 0.0);
    }

    #[test]
    fn sign_changes_are_located() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let pts = insert_sign_changes(&grid, |x| (x - 2.5) * (x - 7.25));
        assert!(pts.iter().any(|&x| (x - 2.5).abs() < 1e-12));
        assert!(pts.iter().any(|&x| (x - 7.25).abs() < 1e-12));
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cell_mass_matches_simpson() {
        let m = Mixture::univariate(&[(0.4, -1.0, 0.5), (0.6, 2.0, 3.0)]).unwrap();
        for (a, b) in [(-3.0, 0.0), (0.0, 4.0), (10.0, 20.0), (-40.0, -5.0)] {
            let q = adaptive_simpson(|x| m.log_density(&[x]).exp(), a, b, 1e-12).value;
            let c = cell_mass(&m, a, b);
            assert!((q - c).abs() <= 1e-10 + 1e-8 * q, "{a} {b}: {q} vs {c}");
        }
    }

    #[test]
    fn sub_ulp_components_are_flagged() {
        let narrow = Mixture::univariate(&[(1.0, -3e8, 5e-17)]).unwrap();
        let wide = Mixture::univariate(&[(1.0, -3e8, 1.0)]).unwrap();
        assert!(!resolvable(&[&narrow]));
        assert!(resolvable(&[&wide]));
        assert!((cell_mass(&narrow, -3.1e8, -2.9e8) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_bound_is_tiny() {
        assert!(window_tail_bound() < 1e-30);
    }
}
