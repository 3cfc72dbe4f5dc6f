//! Dense forward/backward primitives.
//!
//! Each primitive returns a [`GradPair`]: the forward value together with a
//! pullback mapping an output gradient to input gradient(s). Pipelines are
//! built by composing pullbacks by hand; there is no tape.

mod check;
mod matrix;

use std::cell::Cell;

pub use check::grad_check;
pub use matrix::Matrix;

use crate::error::{Error, Result};

/// Rows whose L2 norm is at or below this are rejected by [`l2_normalize`].
pub const EPS_NORM: f64 = 1e-12;

type Pullback<G> = Box<dyn Fn(&Matrix) -> G + Send + Sync>;

/// Forward value plus its pullback.
pub struct GradPair<G = Matrix> {
    pub value: Matrix,
    pullback: Pullback<G>,
}

impl<G> GradPair<G> {
    pub fn new(value: Matrix, pullback: impl Fn(&Matrix) -> G + Send + Sync + 'static) -> Self {
        Self {
            value,
            pullback: Box::new(pullback),
        }
    }

    /// Maps an output gradient (same shape as `value`) to input gradient(s).
    pub fn pullback(&self, grad_out: &Matrix) -> G {
        assert_eq!(
            grad_out.shape(),
            self.value.shape(),
            "pullback gradient shape"
        );
        (self.pullback)(grad_out)
    }

    pub fn into_parts(self) -> (Matrix, Pullback<G>) {
        (self.value, self.pullback)
    }
}

impl<G> std::fmt::Debug for GradPair<G> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GradPair").field("value", &self.value).finish()
    }
}

thread_local! {
    static PAIR_EVALS: Cell<u64> = const { Cell::new(0) };
}

/// Number of point-to-point distance (or similarity) evaluations performed on
/// this thread since the last [`reset_pair_evaluations`].
pub fn pair_evaluations() -> u64 {
    PAIR_EVALS.with(Cell::get)
}

pub fn reset_pair_evaluations() {
    PAIR_EVALS.with(|c| c.set(0));
}

pub(crate) fn count_pair_evaluations(n: u64) {
    PAIR_EVALS.with(|c| c.set(c.get() + n));
}

fn finite(m: Matrix, op: &'static str) -> Result<Matrix> {
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::NonFinite(op))
    }
}

fn plain_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = Matrix::zeros(n, m);
    for i in 0..n {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (p, &av) in arow.iter().enumerate().take(k) {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(b.row(p)) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a · b`; pullback returns `(g·bᵀ, aᵀ·g)`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<GradPair<(Matrix, Matrix)>> {
    if a.cols() != b.rows() {
        return Err(Error::Shape {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let value = finite(plain_matmul(a, b), "matmul")?;
    let at = a.transpose();
    let bt = b.transpose();
    Ok(GradPair::new(value, move |g| {
        (plain_matmul(g, &bt), plain_matmul(&at, g))
    }))
}

/// Adds the `1×c` row `bias` to every row of `x`.
pub fn add_row_bias(x: &Matrix, bias: &Matrix) -> Result<GradPair<(Matrix, Matrix)>> {
    if bias.rows() != 1 || bias.cols() != x.cols() {
        return Err(Error::Shape {
            op: "add_row_bias",
            left: x.shape(),
            right: bias.shape(),
        });
    }
    let value = Matrix::from_fn(x.rows(), x.cols(), |r, c| x[(r, c)] + bias[(0, c)]);
    let value = finite(value, "add_row_bias")?;
    Ok(GradPair::new(value, |g| {
        let mut gb = Matrix::zeros(1, g.cols());
        for r in g.iter_rows() {
            for (acc, v) in gb.row_mut(0).iter_mut().zip(r) {
                *acc += v;
            }
        }
        (g.clone(), gb)
    }))
}

/// Elementwise `max(x, 0)`; the subgradient at 0 is 0.
pub fn relu(x: &Matrix) -> GradPair {
    let value = x.map(|v| v.max(0.0));
    let mask = x.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    GradPair::new(value, move |g| g.zip_map(&mask, |a, m| a * m))
}

/// Scales every row to unit L2 norm.
pub fn l2_normalize(x: &Matrix) -> Result<GradPair> {
    let mut norms = Vec::with_capacity(x.rows());
    let mut value = x.clone();
    for r in 0..x.rows() {
        let norm = x.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > EPS_NORM) {
            return Err(Error::Degenerate {
                op: "l2_normalize",
                row: r,
                norm,
            });
        }
        value.row_mut(r).iter_mut().for_each(|v| *v /= norm);
        norms.push(norm);
    }
    let unit = value.clone();
    Ok(GradPair::new(value, move |g| {
        // (I - u uᵀ) g / ‖x‖ per row
        let mut out = g.clone();
        for (r, &norm) in norms.iter().enumerate() {
            let u = unit.row(r);
            let dot: f64 = u.iter().zip(g.row(r)).map(|(a, b)| a * b).sum();
            for (o, &uv) in out.row_mut(r).iter_mut().zip(u) {
                *o = (*o - dot * uv) / norm;
            }
        }
        out
    }))
}

/// Affine-free layer normalization with biased variance.
pub fn layer_norm(x: &Matrix, epsilon: f64) -> Result<GradPair> {
    if x.cols() < 2 {
        return Err(Error::param("layer_norm needs at least 2 columns"));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::param("layer_norm epsilon must be >= 0"));
    }
    let n = x.cols() as f64;
    let mut value = x.clone();
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = value.row_mut(r);
        let mean = row.iter().sum::<f64>() / n;
        row.iter_mut().for_each(|v| *v -= mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / n;
        let s = 1.0 / (var + epsilon).sqrt();
        row.iter_mut().for_each(|v| *v *= s);
        inv_std.push(s);
    }
    let value = finite(value, "layer_norm")?;
    let normed = value.clone();
    Ok(GradPair::new(value, move |g| {
        // dx = s * (g - mean(g) - y * mean(g ⊙ y))
        let mut out = g.clone();
        for (r, &s) in inv_std.iter().enumerate() {
            let y = normed.row(r);
            let gr = g.row(r);
            let gmean = gr.iter().sum::<f64>() / n;
            let gy = gr.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n;
            for ((o, &gv), &yv) in out.row_mut(r).iter_mut().zip(gr).zip(y) {
                *o = s * (gv - gmean - yv * gy);
            }
        }
        out
    }))
}

/// `D[i][j] = ‖a_i − b_j‖²`, computed from explicit differences.
pub fn pairwise_sqdist(a: &Matrix, b: &Matrix) -> Result<GradPair<(Matrix, Matrix)>> {
    if a.cols() != b.cols() {
        return Err(Error::Shape {
            op: "pairwise_sqdist",
            left: a.shape(),
            right: b.shape(),
        });
    }
    count_pair_evaluations((a.rows() * b.rows()) as u64);
    let value = Matrix::from_fn(a.rows(), b.rows(), |i, j| {
        a.row(i)
            .iter()
            .zip(b.row(j))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    });
    let value = finite(value, "pairwise_sqdist")?;
    let (a, b) = (a.clone(), b.clone());
    Ok(GradPair::new(value, move |g| {
        let mut ga = Matrix::zeros(a.rows(), a.cols());
        let mut gb = Matrix::zeros(b.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.rows() {
                let w = 2.0 * g[(i, j)];
                if w == 0.0 {
                    continue;
                }
                for c in 0..a.cols() {
                    let d = w * (a[(i, c)] - b[(j, c)]);
                    ga[(i, c)] += d;
                    gb[(j, c)] -= d;
                }
            }
        }
        (ga, gb)
    }))
}

/// Log of `logsumexp` with the max shift, for one row.
pub(crate) fn logsumexp(row: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = row.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + row.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Row-wise `x/T − logsumexp(x/T)`.
pub fn log_softmax_rows(x: &Matrix, temperature: f64) -> Result<GradPair> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::param(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let mut value = x.scale(1.0 / temperature);
    for r in 0..value.rows() {
        let row = value.row_mut(r);
        let lse = logsumexp(row.iter().copied());
        row.iter_mut().for_each(|v| *v -= lse);
    }
    let value = finite(value, "log_softmax_rows")?;
    let probs = value.map(f64::exp);
    Ok(GradPair::new(value, move |g| {
        let mut out = g.clone();
        for r in 0..g.rows() {
            let total: f64 = g.row(r).iter().sum();
            for (o, &p) in out.row_mut(r).iter_mut().zip(probs.row(r)) {
                *o = (*o - p * total) / temperature;
            }
        }
        out
    }))
}
