//! Primal epsilon-insensitive support vector regression trained by averaged
//! subgradient descent.

/// Objective: ||w||^2 / (2 C n) + mean epsilon-insensitive loss. The ridge
/// term shrinks as C grows, matching the usual C-parameterised trade-off.
pub fn svr_objective(
    x: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    b: f64,
    c: f64,
    eps: f64,
) -> f64 {
    let n = x.len() as f64;
    let norm_sq: f64 = w.iter().map(|v| v * v).sum();
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let r = dot(w, row) + b - yi;
            (r.abs() - eps).max(0.0)
        })
        .sum();
    norm_sq / (2.0 * c * n) + loss / n
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub struct SvrFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Objective value of the averaged iterate after each epoch.
    pub objective_trace: Vec<f64>,
}

/// Full-batch subgradient descent with step `step0 / sqrt(t)`, returning the
/// running average of the iterates. Stops once the averaged objective
/// improves by less than `tol`.
pub fn svr_fit(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    eps: f64,
    step0: f64,
    max_epochs: usize,
    tol: f64,
) -> SvrFit {
    let n = x.len();
    let p = x[0].len();
    let mut w = vec![0.0f64; p];
    let mut b = y.iter().sum::<f64>() / n as f64;

    let mut w_avg = w.clone();
    let mut b_avg = b;
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    let mut best = (w_avg.clone(), b_avg, f64::INFINITY);

    let mut grad = vec![0.0f64; p];
    for t in 1..=max_epochs {
        for (g, wv) in grad.iter_mut().zip(&w) {
            *g = wv / (c * n as f64);
        }
        let mut gb = 0.0;
        for (row, &yi) in x.iter().zip(y) {
            let r = dot(&w, row) + b - yi;
            if r.abs() > eps {
                let sign = r.signum() / n as f64;
                for (g, v) in grad.iter_mut().zip(row) {
                    *g += sign * v;
                }
                gb += sign;
            }
        }
        let step = step0 / (t as f64).sqrt();
        for (wv, g) in w.iter_mut().zip(&grad) {
            *wv -= step * g;
        }
        b -= step * gb;

        // Running average of iterates.
        let tf = t as f64;
        for (a, v) in w_avg.iter_mut().zip(&w) {
            *a += (v - *a) / tf;
        }
        b_avg += (b - b_avg) / tf;

        let obj = svr_objective(x, y, &w_avg, b_avg, c, eps);
        trace.push(obj);
        if obj < best.2 {
            best = (w_avg.clone(), b_avg, obj);
        }
        if (prev - obj).abs() < tol {
            break;
        }
        prev = obj;
    }
    SvrFit {
        weights: best.0,
        intercept: best.1,
        objective_trace: trace,
    }
}
