//! Lambert W function, branch -1, on the real interval [-1/e, 0).
//!
//! This branch inverts `w * exp(w) = x` for `w <= -1` and is what the
//! inverse-CDF sampler of the planar Laplace mechanism needs. Accuracy target
//! is 1e-9 relative error, achieved with a branch-point series near `-1/e`
//! and safeguarded Newton iteration on the log-transformed equation
//! elsewhere.

/// `W_{-1}(x)` for `x` in `[-1/e, 0)`. Returns `None` outside the domain.
pub fn lambert_w_m1(x: f64) -> Option<f64> {
    let branch = -(-1.0f64).exp(); // -1/e
    if !(x < 0.0) || x < branch - 1e-15 {
        return None;
    }
    // 2(1 + e*x) is the squared series variable at the branch point.
    let q = 2.0 * (1.0 + std::f64::consts::E * x);
    if q <= 0.0 {
        return Some(-1.0);
    }
    if q < 1e-6 {
        // Series around the branch point with p < 0 for the -1 branch:
        // W = -1 + p - p^2/3 + 11 p^3/72 - 43 p^4/540
        let p = -q.sqrt();
        return Some(-1.0 + p - p * p / 3.0 + 11.0 * p.powi(3) / 72.0 - 43.0 * p.powi(4) / 540.0);
    }

    // Solve g(w) = ln(-w) + w - ln(-x) = 0, monotone increasing on w < -1,
    // with Newton steps clipped to a shrinking bracket.
    let target = (-x).ln();
    let mut lo = -746.0; // g(lo) < 0 for every x >= f64::MIN_POSITIVE
    let mut hi = -1.0; // g(-1) = -1 - ln(-x) >= 0 on the domain
    let g = |w: f64| (-w).ln() + w - target;
    let mut w = {
        // Asymptotic first guess: ln(-x) - ln(-ln(-x)).
        let l = target;
        if -l > 1.0 {
            l - (-l).ln()
        } else {
            -2.0
        }
    };
    if !(lo..hi).contains(&w) {
        w = -2.0;
    }
    for _ in 0..100 {
        let gw = g(w);
        if gw > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let deriv = 1.0 + 1.0 / w;
        let mut next = w - gw / deriv;
        if !(lo..=hi).contains(&next) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-13 * w.abs() {
            return Some(next);
        }
        w = next;
    }
    Some(w)
}
