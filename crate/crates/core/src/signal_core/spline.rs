//! Cubic spline interpolation over strictly increasing knots.

/// Boundary condition used when solving for knot curvatures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndCondition {
    /// Zero second derivative at both ends.
    Natural,
    /// Third derivative continuous across the second and penultimate knots.
    /// Falls back to `Natural` with fewer than four knots.
    NotAKnot,
}

#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Returns `None` when fewer than two knots are given, the lengths differ
    /// or the abscissae are not strictly increasing.
    pub fn new(x: Vec<f64>, y: Vec<f64>, end: EndCondition) -> Option<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        let m = match end {
            EndCondition::NotAKnot if n >= 4 => not_a_knot_curvatures(&x, &y),
            _ => natural_curvatures(&x, &y),
        };
        Some(Self { x, y, m })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.interval(t);
        self.eval_in(i, t)
    }

    /// Evaluates at the integer positions `0..len`, walking the knot
    /// intervals once.
    pub fn eval_grid(&self, len: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        let mut i = 0usize;
        let last = self.x.len() - 2;
        for k in 0..len {
            let t = k as f64;
            while i < last && t > self.x[i + 1] {
                i += 1;
            }
            out.push(self.eval_in(i, t));
        }
        out
    }

    fn interval(&self, t: f64) -> usize {
        let last = self.x.len() - 2;
        match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p => (p - 1).min(last),
        }
    }

    #[inline]
    fn eval_in(&self, i: usize, t: f64) -> f64 {
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let a = x1 - t;
        let b = t - x0;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        (m0 * a * a * a + m1 * b * b * b) / (6.0 * h)
            + (self.y[i] / h - m0 * h / 6.0) * a
            + (self.y[i + 1] / h - m1 * h / 6.0) * b
    }
}

/// Thomas algorithm; `sub[0]` and `sup[n-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut out = vec![0.0; n];
    out[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
    out
}

fn slopes(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = y
        .windows(2)
        .zip(&h)
        .map(|(w, hi)| (w[1] - w[0]) / hi)
        .collect();
    (h, d)
}

fn natural_curvatures(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let (h, d) = slopes(x, y);
    let k = n - 2;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        sub[j] = h[i - 1];
        diag[j] = 2.0 * (h[i - 1] + h[i]);
        sup[j] = h[i];
        rhs[j] = 6.0 * (d[i] - d[i - 1]);
    }
    let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs);
    m[1..n - 1].copy_from_slice(&inner);
    m
}

fn not_a_knot_curvatures(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let (h, d) = slopes(x, y);
    let k = n - 2;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        sub[j] = h[i - 1];
        diag[j] = 2.0 * (h[i - 1] + h[i]);
        sup[j] = h[i];
        rhs[j] = 6.0 * (d[i] - d[i - 1]);
    }
    // Eliminate m[0] = m[1] + h0/h1 (m[1] - m[2]) from the first row.
    let (h0, h1) = (h[0], h[1]);
    diag[0] += h0 + h0 * h0 / h1;
    sup[0] -= h0 * h0 / h1;
    // Likewise m[n-1] = m[n-2] + hl/hp (m[n-2] - m[n-3]) from the last row.
    let (hp, hl) = (h[n - 3], h[n - 2]);
    diag[k - 1] += hl + hl * hl / hp;
    sub[k - 1] -= hl * hl / hp;
    let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs);
    let mut m = vec![0.0; n];
    m[1..n - 1].copy_from_slice(&inner);
    m[0] = m[1] + h0 / h1 * (m[1] - m[2]);
    m[n - 1] = m[n - 2] + hl / hp * (m[n - 2] - m[n - 3]);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_knots() {
        let x = vec![0.0, 1.0, 2.5, 4.0, 5.0];
        let y = vec![1.0, -2.0, 0.5, 3.0, 2.0];
        for end in [EndCondition::Natural, EndCondition::NotAKnot] {
            let s = CubicSpline::new(x.clone(), y.clone(), end).unwrap();
            for (xi, yi) in x.iter().zip(&y) {
                assert!((s.eval(*xi) - yi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn not_a_knot_reproduces_cubics() {
        let f = |t: f64| 0.5 * t * t * t - 2.0 * t * t + t - 3.0;
        let x: Vec<f64> = vec![0.0, 0.7, 1.5, 2.0, 3.1, 4.0];
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let s = CubicSpline::new(x, y, EndCondition::NotAKnot).unwrap();
        for k in 0..=40 {
            let t = k as f64 * 0.1;
            assert!((s.eval(t) - f(t)).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn natural_reproduces_lines_and_two_points() {
        let s = CubicSpline::new(vec![0.0, 2.0], vec![1.0, 5.0], EndCondition::Natural).unwrap();
        assert!((s.eval(1.0) - 3.0).abs() < 1e-12);
        assert!((s.eval(3.0) - 7.0).abs() < 1e-12);
        let grid = s.eval_grid(3);
        assert_eq!(grid, vec![1.0, 3.0, 5.0]);
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(CubicSpline::new(vec![0.0, 0.0], vec![1.0, 2.0], EndCondition::Natural).is_none());
        assert!(CubicSpline::new(vec![0.0], vec![1.0], EndCondition::Natural).is_none());
    }
}
