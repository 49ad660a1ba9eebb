//! Euclidean projection onto the scaled simplex and projected (super)gradient
//! ascent over it.

/// Projects `v` onto `{x >= 0, sum(x) = total}`.
pub fn project_onto_simplex(v: &[f64], total: f64) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - total) / (k + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|&vi| (vi - tau).max(0.0)).collect()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AscentConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub armijo: f64,
    pub shrink: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig { max_iter: 100_000, tol: 1e-9, armijo: 1e-4, shrink: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AscentResult {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    pub iterations: usize,
}

/// Largest gradient entry minus the smallest one on the support, divided by
/// `scale`. Zero exactly at KKT points of a concave maximization on the simplex.
pub(crate) fn stationarity_gap(x: &[f64], g: &[f64], scale: f64) -> f64 {
    let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let smin = x
        .iter()
        .zip(g)
        .filter(|(xj, _)| **xj > 0.0)
        .map(|(_, gj)| *gj)
        .fold(f64::INFINITY, f64::min);
    if !smin.is_finite() {
        return f64::INFINITY;
    }
    let gap = (gmax - smin).max(0.0);
    if scale > 0.0 {
        gap / scale
    } else {
        gap
    }
}

fn shifted_dot(g: &[f64], shift: f64, d: &[f64]) -> f64 {
    g.iter().zip(d).map(|(gj, dj)| (gj - shift) * dj).sum()
}

/// Projected gradient ascent with Armijo backtracking along the projection arc.
///
/// `eval` returns value and gradient; `scale` maps a gradient to the
/// normalizer of its stationarity gap. Once function differences fall to
/// rounding level, a step is also accepted when the directional derivative at
/// its end point is still nonnegative, which for a concave objective implies
/// ascent along the whole step.
pub(crate) fn projected_ascent<F, S>(
    x0: Vec<f64>,
    total: f64,
    cfg: AscentConfig,
    mut eval: F,
    scale: S,
) -> AscentResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    S: Fn(&[f64]) -> f64,
{
    let mut x = project_onto_simplex(&x0, total);
    let (mut h, mut g) = eval(&x);
    let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut t = if gnorm > 0.0 { total / gnorm } else { 1.0 };
    let mut iterations = 0;
    loop {
        let residual = stationarity_gap(&x, &g, scale(&g));
        if residual <= cfg.tol || iterations >= cfg.max_iter {
            return AscentResult { x, grad: g, iterations };
        }
        iterations += 1;
        let mut accepted = false;
        // Shifting the gradient by a constant leaves the projection unchanged
        // and keeps the rounding error of sum(d) out of the directional derivatives.
        let shift = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..80 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xj, gj)| xj + t * (gj - shift)).collect();
            let y = project_onto_simplex(&trial, total);
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            if d.iter().all(|v| *v == 0.0) {
                break;
            }
            let gd = shifted_dot(&g, shift, &d);
            let (hy, gy) = eval(&y);
            if hy >= h + cfg.armijo * gd || shifted_dot(&gy, shift, &d) >= 0.0 {
                x = y;
                h = hy;
                g = gy;
                accepted = true;
                break;
            }
            t *= cfg.shrink;
        }
        if !accepted {
            return AscentResult { x, grad: g, iterations };
        }
        t *= 2.0;
    }
}

/// Projected supergradient ascent with steps `total / (|g| sqrt(k+1))`,
/// returning the best iterate seen. For nonsmooth concave objectives.
pub(crate) fn projected_supergradient<F>(x0: Vec<f64>, total: f64, iterations: usize, mut eval: F) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = project_onto_simplex(&x0, total);
    let (mut h, mut g) = eval(&x);
    let mut best = (x.clone(), h);
    for k in 0..iterations {
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let step = total / (norm * ((k + 1) as f64).sqrt());
        let trial: Vec<f64> = x.iter().zip(&g).map(|(xj, gj)| xj + step * gj).collect();
        x = project_onto_simplex(&trial, total);
        (h, g) = eval(&x);
        if h > best.1 {
            best = (x.clone(), h);
        }
    }
    best
}
