//! Dense f64 linear algebra, activations, loss, the momentum step, and a
//! finite-difference gradient oracle.
//!
//! Everything here is a pure function of its inputs and bit-deterministic.
//! Dimension mismatches are programmer errors and panic with both shapes in
//! the message; no silent broadcasting.

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from explicit rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows: {} vs {}", row.len(), c);
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// W^T * y, the transpose product used when backpropagating through W.
    pub fn transpose_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(
            y.len(),
            self.rows,
            "transpose_vec: matrix is {}x{}, vector has length {}",
            self.rows,
            self.cols,
            y.len()
        );
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let yr = y[r];
            if yr == 0.0 {
                continue;
            }
            let row = self.row(r);
            for c in 0..self.cols {
                out[c] += row[c] * yr;
            }
        }
        out
    }

    /// Rank-1 accumulate: W += y * x^T. Used for weight gradients.
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        assert_eq!(
            (y.len(), x.len()),
            (self.rows, self.cols),
            "add_outer: matrix is {}x{}, outer product is {}x{}",
            self.rows,
            self.cols,
            y.len(),
            x.len()
        );
        for r in 0..self.rows {
            let yr = y[r];
            if yr == 0.0 {
                continue;
            }
            let row = self.row_mut(r);
            for (w, &xv) in row.iter_mut().zip(x) {
                *w += yr * xv;
            }
        }
    }
}

/// W*x + b with explicit shape checks.
pub fn affine(w: &Matrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(
        x.len(),
        w.cols(),
        "affine: matrix is {}x{}, input vector has length {}",
        w.rows(),
        w.cols(),
        x.len()
    );
    assert_eq!(
        b.len(),
        w.rows(),
        "affine: matrix is {}x{}, bias vector has length {}",
        w.rows(),
        w.cols(),
        b.len()
    );
    let mut out = b.to_vec();
    for r in 0..w.rows() {
        let row = w.row(r);
        let mut acc = 0.0;
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        out[r] += acc;
    }
    out
}

/// Accumulate W*x into an existing vector (no bias).
pub fn add_matvec(out: &mut [f64], w: &Matrix, x: &[f64]) {
    assert_eq!(
        (out.len(), x.len()),
        (w.rows(), w.cols()),
        "add_matvec: matrix is {}x{}, out/in lengths are {}/{}",
        w.rows(),
        w.cols(),
        out.len(),
        x.len()
    );
    for r in 0..w.rows() {
        let row = w.row(r);
        let mut acc = 0.0;
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        out[r] += acc;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Shift-invariant softmax: subtracts the max logit before exponentiation.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    assert!(!logits.is_empty(), "softmax: empty logits");
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// -ln(probs[target]), with the probability clamped to >= 1e-300 so a
/// collapsed distribution yields a large finite loss rather than infinity.
pub fn cross_entropy(probs: &[f64], target: usize) -> f64 {
    assert!(
        target < probs.len(),
        "cross_entropy: target {} out of range for distribution of length {}",
        target,
        probs.len()
    );
    -probs[target].max(1e-300).ln()
}

/// Classical momentum: v <- mu*v - lr*g; theta <- theta + v.
///
/// With `momentum == 0` this is exactly plain SGD. `lr == 0` is allowed
/// (the step is then a no-op on zero velocity), which the training smoke
/// tests rely on.
pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
) {
    assert_eq!(
        params.len(),
        grads.len(),
        "sgd_momentum_step: params/grads lengths differ: {} vs {}",
        params.len(),
        grads.len()
    );
    assert_eq!(
        params.len(),
        velocity.len(),
        "sgd_momentum_step: params/velocity lengths differ: {} vs {}",
        params.len(),
        velocity.len()
    );
    assert!(lr >= 0.0 && lr.is_finite(), "learning rate must be finite and >= 0");
    assert!(
        (0.0..1.0).contains(&momentum),
        "momentum must be in [0,1), got {momentum}"
    );
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
}

/// Central-difference gradient of `loss` at `params`.
///
/// This is the verification oracle for the analytic backward pass; it never
/// shares code with it. Panics if the loss is non-finite at a probe point,
/// identifying the coordinate.
pub fn finite_diff_grad<F>(mut loss: F, params: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(eps > 0.0, "finite_diff_grad: eps must be positive");
    let mut probe = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let up = loss(&probe);
        probe[i] = orig - eps;
        let down = loss(&probe);
        probe[i] = orig;
        assert!(
            up.is_finite() && down.is_finite(),
            "finite_diff_grad: non-finite loss probing coordinate {i} (f(+eps)={up}, f(-eps)={down})"
        );
        grad[i] = (up - down) / (2.0 * eps);
    }
    grad
}

/// Gradient-check discrepancy, compared against a 1e-4 threshold everywhere
/// in the crate. The 1e-2 scale floor makes the threshold mean "within 1e-4
/// relative error, or within 1e-6 absolutely for near-zero entries", which
/// keeps central-difference roundoff (~1e-10 absolute at eps = 1e-5) from
/// drowning coordinates whose true gradient is tiny.
pub fn grad_rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-2);
    (analytic - numeric).abs() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_identity() {
        let w = Matrix::identity(2);
        let out = affine(&w, &[3.0, 4.0], &[0.0, 0.0]);
        assert_eq!(out, vec![3.0, 4.0]);
    }

    #[test]
    fn affine_zero_matrix_returns_bias() {
        let w = Matrix::zeros(2, 2);
        let out = affine(&w, &[7.0, -1.0], &[1.0, 2.0]);
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn affine_hand_multiply() {
        // [[1,2],[3,4]] * (1,1) + (1,0) = (4,7), multiplied out by hand.
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let out = affine(&w, &[1.0, 1.0], &[1.0, 0.0]);
        assert_eq!(out, vec![4.0, 7.0]);
    }

    #[test]
    #[should_panic(expected = "affine")]
    fn affine_rejects_mismatched_input() {
        let w = Matrix::zeros(2, 3);
        affine(&w, &[1.0, 2.0], &[0.0, 0.0]);
    }

    #[test]
    fn softmax_symmetry() {
        let p = softmax(&[0.0, 0.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_shift_invariance() {
        for c in [-100.0, 0.0, 3.5, 1e6] {
            let p = softmax(&[c, c, c, c]);
            for v in p {
                assert!((v - 0.25).abs() < 1e-12);
            }
        }
        let a = softmax(&[0.3, -1.2, 2.0]);
        let b = softmax(&[0.3 + 7.0, -1.2 + 7.0, 2.0 + 7.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_two_logits_by_hand() {
        // (1, 0): e/(e+1) = 0.731058..., 1/(e+1) = 0.268941...
        let p = softmax(&[1.0, 0.0]);
        assert!((p[0] - 0.73106).abs() < 1e-5);
        assert!((p[1] - 0.26894).abs() < 1e-5);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[2.0, -3.0, 0.1, 9.0, -20.0]);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    #[should_panic(expected = "empty")]
    fn softmax_rejects_empty() {
        softmax(&[]);
    }

    #[test]
    fn cross_entropy_certain_prediction_is_zero() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0], 1), 0.0);
    }

    #[test]
    fn cross_entropy_uniform_is_ln4() {
        let loss = cross_entropy(&[0.25; 4], 2);
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
        assert!((loss - 1.38629).abs() < 1e-5);
    }

    #[test]
    fn cross_entropy_hand_value() {
        // -ln 0.26894 = 1.31326...
        let loss = cross_entropy(&[0.73106, 0.26894], 1);
        assert!((loss - 1.31326).abs() < 1e-4);
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let loss = cross_entropy(&[1.0, 0.0], 1);
        assert!(loss.is_finite());
        assert!(loss > 600.0);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn cross_entropy_rejects_bad_target() {
        cross_entropy(&[0.5, 0.5], 2);
    }

    #[test]
    fn momentum_zero_reduces_to_sgd() {
        let mut p = [1.0];
        let mut v = [0.0];
        sgd_momentum_step(&mut p, &[1.0], &mut v, 0.1, 0.0);
        assert_eq!(p, [0.9]);
        assert_eq!(v, [-0.1]);
    }

    #[test]
    fn momentum_zero_gradient_is_noop() {
        let mut p = [3.0];
        let mut v = [0.0];
        sgd_momentum_step(&mut p, &[0.0], &mut v, 0.1, 0.95);
        assert_eq!(p, [3.0]);
        assert_eq!(v, [0.0]);
    }

    #[test]
    fn momentum_recurrence_unrolled_by_hand() {
        // mu=0.95, lr=0.1, g=1 twice:
        //   step 1: v = -0.1,   theta = -0.1
        //   step 2: v = 0.95*(-0.1) - 0.1 = -0.195, theta = -0.295
        let mut p = [0.0];
        let mut v = [0.0];
        sgd_momentum_step(&mut p, &[1.0], &mut v, 0.1, 0.95);
        assert!((v[0] + 0.1).abs() < 1e-15);
        assert!((p[0] + 0.1).abs() < 1e-15);
        sgd_momentum_step(&mut p, &[1.0], &mut v, 0.1, 0.95);
        assert!((v[0] + 0.195).abs() < 1e-15);
        assert!((p[0] + 0.295).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "lengths differ")]
    fn momentum_rejects_shape_mismatch() {
        let mut p = [0.0, 0.0];
        let mut v = [0.0, 0.0];
        sgd_momentum_step(&mut p, &[1.0], &mut v, 0.1, 0.9);
    }

    #[test]
    fn momentum_step_at_zero_lr_is_identity() {
        let mut p = [1.0, -2.0];
        let mut v = [0.0, 0.0];
        sgd_momentum_step(&mut p, &[5.0, -3.0], &mut v, 0.0, 0.95);
        assert_eq!(p, [1.0, -2.0]);
    }

    #[test]
    fn finite_diff_of_square() {
        // d/dx x^2 at 3 is 6.
        let g = finite_diff_grad(|p| p[0] * p[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_of_constant_is_zero() {
        let g = finite_diff_grad(|_| 42.0, &[1.0, -2.0, 0.5], 1e-5);
        for v in g {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn finite_diff_matches_analytic_softmax_ce_gradient() {
        // loss(W) = cross_entropy(softmax(W*x), t) on a 3x3 instance.
        // Analytic gradient is (p - onehot(t)) x^T.
        let x = [0.3, -0.7, 1.1];
        let target = 1usize;
        let w0 = [0.1, 0.2, -0.3, 0.4, -0.5, 0.6, 0.7, 0.05, -0.9];
        let loss = |w: &[f64]| {
            let mut logits = [0.0; 3];
            for r in 0..3 {
                for c in 0..3 {
                    logits[r] += w[r * 3 + c] * x[c];
                }
            }
            cross_entropy(&softmax(&logits), target)
        };
        let numeric = finite_diff_grad(loss, &w0, 1e-5);

        let mut logits = [0.0; 3];
        for r in 0..3 {
            for c in 0..3 {
                logits[r] += w0[r * 3 + c] * x[c];
            }
        }
        let p = softmax(&logits);
        for r in 0..3 {
            let d = p[r] - if r == target { 1.0 } else { 0.0 };
            for c in 0..3 {
                let analytic = d * x[c];
                assert!(
                    (analytic - numeric[r * 3 + c]).abs() < 1e-7,
                    "grad mismatch at ({r},{c}): analytic {analytic} vs numeric {}",
                    numeric[r * 3 + c]
                );
            }
        }
    }

    #[test]
    fn finite_diff_of_quadratic_form_matches_analytic() {
        // f(x) = x^T A x with A symmetric; grad = 2 A x.
        let a = Matrix::from_rows(&[
            vec![2.0, 0.5, -1.0],
            vec![0.5, 3.0, 0.25],
            vec![-1.0, 0.25, 1.5],
        ]);
        let x0 = [0.7, -1.3, 0.4];
        let f = |x: &[f64]| {
            let ax = affine(&a, x, &[0.0; 3]);
            x.iter().zip(&ax).map(|(xi, axi)| xi * axi).sum::<f64>()
        };
        let numeric = finite_diff_grad(f, &x0, 1e-5);
        let ax = affine(&a, &x0, &[0.0; 3]);
        for i in 0..3 {
            let analytic = 2.0 * ax[i];
            let rel = (analytic - numeric[i]).abs() / analytic.abs().max(1e-12);
            assert!(rel < 1e-6, "coordinate {i}: {analytic} vs {}", numeric[i]);
        }
    }

    #[test]
    #[should_panic(expected = "non-finite loss probing coordinate 1")]
    fn finite_diff_reports_bad_coordinate() {
        finite_diff_grad(
            |p| if p[1] > 0.5 { f64::NAN } else { 0.0 },
            &[0.0, 0.5],
            1e-1,
        );
    }

    #[test]
    fn transpose_vec_and_outer_agree_with_hand_values() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let y = [1.0, 0.0, -1.0];
        assert_eq!(w.transpose_vec(&y), vec![1.0 - 5.0, 2.0 - 6.0]);

        let mut g = Matrix::zeros(2, 3);
        g.add_outer(&[1.0, 2.0], &[3.0, 4.0, 5.0]);
        assert_eq!(g.row(0), &[3.0, 4.0, 5.0]);
        assert_eq!(g.row(1), &[6.0, 8.0, 10.0]);
    }
}
