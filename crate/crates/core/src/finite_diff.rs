//! Finite differences and quadrature on uniform grids.

/// Centered derivative of `order` 2, 4 or 6. Points too close to an edge for
/// the requested stencil fall back to the widest centered stencil that fits,
/// and the two endpoints use second-order one-sided formulas.
pub fn derivative(values: &[f64], dt: f64, order: usize) -> Vec<f64> {
    assert!(matches!(order, 2 | 4 | 6), "order must be 2, 4 or 6");
    let n = values.len();
    let mut out = vec![f64::NAN; n];
    if n < 3 {
        if n == 2 {
            let d = (values[1] - values[0]) / dt;
            out = vec![d, d];
        }
        return out;
    }
    let f = values;
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt);
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dt);
    for i in 1..n - 1 {
        let reach = i.min(n - 1 - i);
        out[i] = if order >= 6 && reach >= 3 {
            (-f[i - 3] + 9.0 * f[i - 2] - 45.0 * f[i - 1] + 45.0 * f[i + 1] - 9.0 * f[i + 2] + f[i + 3]) / (60.0 * dt)
        } else if order >= 4 && reach >= 2 {
            (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * dt)
        } else {
            (f[i + 1] - f[i - 1]) / (2.0 * dt)
        };
    }
    out
}

/// Indices where the full centered stencil of `order` applies.
pub fn interior(n: usize, order: usize) -> std::ops::Range<usize> {
    let half = order / 2;
    if n <= 2 * half {
        0..0
    } else {
        half..n - half
    }
}

/// Composite trapezoid rule.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dt * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Composite Simpson rule; falls back to trapezoid on the last panel when
/// the number of intervals is odd.
pub fn simpson(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    if n < 3 {
        return trapezoid(values, dt);
    }
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut s = values[0] + values[even];
    for (k, v) in values.iter().enumerate().take(even).skip(1) {
        s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = s * dt / 3.0;
    if even < intervals {
        total += 0.5 * dt * (values[n - 2] + values[n - 1]);
    }
    total
}
