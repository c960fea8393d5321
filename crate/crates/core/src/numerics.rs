//! Small shared numeric helpers: finite-difference jets, trapezoid rules.

use crate::autodiff::InputJet;

/// Central finite-difference jet of an arbitrary scalar field `f(x, t)`.
///
/// Intended as an independent oracle for residual and derivative checks, not
/// for training. `h` is the absolute step per coordinate.
pub fn fd_jet<F>(f: F, x: &[f64], t: f64, h: f64) -> InputJet
where
    F: Fn(&[f64], f64) -> f64,
{
    let d = x.len();
    let n = d + 1;
    let eval = |dx: &[f64], dt: f64| {
        let shifted: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + b).collect();
        f(&shifted, t + dt)
    };
    let mut delta = vec![0.0; d];
    let base = eval(&delta, 0.0);

    let mut grad = vec![0.0; n];
    for i in 0..n {
        let (mut dp, mut dm) = (vec![0.0; d], vec![0.0; d]);
        let (mut tp, mut tm) = (0.0, 0.0);
        if i < d {
            dp[i] = h;
            dm[i] = -h;
        } else {
            tp = h;
            tm = -h;
        }
        grad[i] = (eval(&dp, tp) - eval(&dm, tm)) / (2.0 * h);
    }

    let mut hess = vec![0.0; n * n];
    let shift = |i: usize, s: f64, dx: &mut Vec<f64>, dt: &mut f64| {
        if i < d {
            dx[i] += s;
        } else {
            *dt += s;
        }
    };
    for i in 0..n {
        for j in 0..=i {
            let v = if i == j {
                let mut dp = vec![0.0; d];
                let mut dm = vec![0.0; d];
                let (mut tp, mut tm) = (0.0, 0.0);
                shift(i, h, &mut dp, &mut tp);
                shift(i, -h, &mut dm, &mut tm);
                (eval(&dp, tp) - 2.0 * base + eval(&dm, tm)) / (h * h)
            } else {
                let mut acc = 0.0;
                for (si, sj, sign) in
                    [(h, h, 1.0), (h, -h, -1.0), (-h, h, -1.0), (-h, -h, 1.0)]
                {
                    delta.iter_mut().for_each(|v| *v = 0.0);
                    let mut dx = vec![0.0; d];
                    let mut dt = 0.0;
                    shift(i, si, &mut dx, &mut dt);
                    shift(j, sj, &mut dx, &mut dt);
                    acc += sign * eval(&dx, dt);
                }
                acc / (4.0 * h * h)
            };
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
    InputJet::new(base, grad, hess)
}

/// Composite trapezoid weights for `n` equally spaced nodes spanning `len`.
pub fn trapezoid_weights(n: usize, len: f64) -> Vec<f64> {
    assert!(n >= 2);
    let h = len / (n - 1) as f64;
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// Tensor-product trapezoid integral of `f` over a 2D box.
pub fn trapezoid_2d<F>(lo: [f64; 2], hi: [f64; 2], n_per_axis: usize, f: F) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let wx = trapezoid_weights(n_per_axis, hi[0] - lo[0]);
    let wy = trapezoid_weights(n_per_axis, hi[1] - lo[1]);
    let step = |i: usize, axis: usize| {
        lo[axis] + (hi[axis] - lo[axis]) * i as f64 / (n_per_axis - 1) as f64
    };
    let mut total = 0.0;
    for i in 0..n_per_axis {
        let x = step(i, 0);
        let mut row = 0.0;
        for j in 0..n_per_axis {
            row += wy[j] * f(x, step(j, 1));
        }
        total += wx[i] * row;
    }
    total
}

/// Piecewise-linear interpolation of tabulated values at sorted knots.
///
/// Clamps outside the knot range.
pub fn lerp_table(knots: &[f64], values: &[f64], x: f64) -> f64 {
    debug_assert_eq!(knots.len(), values.len());
    if x <= knots[0] {
        return values[0];
    }
    if x >= knots[knots.len() - 1] {
        return values[values.len() - 1];
    }
    let k = knots.partition_point(|&k| k <= x) - 1;
    let w = (x - knots[k]) / (knots[k + 1] - knots[k]);
    values[k] * (1.0 - w) + values[k + 1] * w
}
