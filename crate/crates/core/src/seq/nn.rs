//! Minimal dense-matrix and gated-recurrent-cell primitives with explicit
//! backward passes. No autodiff: every gradient here is hand-derived and
//! verified against central finite differences by the release-gate check in
//! the parent module.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Glorot-uniform initialization.
    pub fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Mat { rows, cols, data }
    }

    /// y = M x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            y[r] = row.iter().zip(x).map(|(m, v)| m * v).sum();
        }
    }

    /// y += M^T x
    pub fn matvec_t_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let xr = x[r];
            for (yc, m) in y.iter_mut().zip(row) {
                *yc += m * xr;
            }
        }
    }

    /// M += dy (outer) x
    pub fn outer_acc(&mut self, dy: &[f64], x: &[f64]) {
        debug_assert_eq!(dy.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for r in 0..self.rows {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            let d = dy[r];
            for (m, v) in row.iter_mut().zip(x) {
                *m += d * v;
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One gated recurrent cell (reset gate r, update gate u, candidate n):
///
/// ```text
/// r = sigmoid(Wr x + Ur h + br)
/// u = sigmoid(Wu x + Uu h + bu)
/// n = tanh(Wn x + Un (r * h) + bn)
/// h' = (1 - u) * n + u * h
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub w_r: Mat,
    pub u_r: Mat,
    pub b_r: Vec<f64>,
    pub w_u: Mat,
    pub u_u: Mat,
    pub b_u: Vec<f64>,
    pub w_n: Mat,
    pub u_n: Mat,
    pub b_n: Vec<f64>,
}

/// Values captured by a forward step, needed to run it backward.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub n: Vec<f64>,
}

impl GruCell {
    pub fn glorot(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        GruCell {
            w_r: Mat::glorot(hidden_dim, input_dim, rng),
            u_r: Mat::glorot(hidden_dim, hidden_dim, rng),
            b_r: vec![0.0; hidden_dim],
            w_u: Mat::glorot(hidden_dim, input_dim, rng),
            u_u: Mat::glorot(hidden_dim, hidden_dim, rng),
            b_u: vec![0.0; hidden_dim],
            w_n: Mat::glorot(hidden_dim, input_dim, rng),
            u_n: Mat::glorot(hidden_dim, hidden_dim, rng),
            b_n: vec![0.0; hidden_dim],
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        GruCell {
            w_r: Mat::zeros(hidden_dim, input_dim),
            u_r: Mat::zeros(hidden_dim, hidden_dim),
            b_r: vec![0.0; hidden_dim],
            w_u: Mat::zeros(hidden_dim, input_dim),
            u_u: Mat::zeros(hidden_dim, hidden_dim),
            b_u: vec![0.0; hidden_dim],
            w_n: Mat::zeros(hidden_dim, input_dim),
            u_n: Mat::zeros(hidden_dim, hidden_dim),
            b_n: vec![0.0; hidden_dim],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.b_r.len()
    }

    pub fn forward(&self, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, GruCache) {
        let hd = self.hidden_dim();
        let mut r = vec![0.0; hd];
        let mut u = vec![0.0; hd];
        let mut n = vec![0.0; hd];
        let mut tmp = vec![0.0; hd];

        self.w_r.matvec(x, &mut r);
        self.u_r.matvec(h_prev, &mut tmp);
        for i in 0..hd {
            r[i] = sigmoid(r[i] + tmp[i] + self.b_r[i]);
        }
        self.w_u.matvec(x, &mut u);
        self.u_u.matvec(h_prev, &mut tmp);
        for i in 0..hd {
            u[i] = sigmoid(u[i] + tmp[i] + self.b_u[i]);
        }
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(ri, hi)| ri * hi).collect();
        self.w_n.matvec(x, &mut n);
        self.u_n.matvec(&rh, &mut tmp);
        for i in 0..hd {
            n[i] = (n[i] + tmp[i] + self.b_n[i]).tanh();
        }
        let h_new: Vec<f64> = (0..hd)
            .map(|i| (1.0 - u[i]) * n[i] + u[i] * h_prev[i])
            .collect();
        let cache = GruCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            r,
            u,
            n,
        };
        (h_new, cache)
    }

    /// Backward one step: accumulates parameter gradients into `grads` and
    /// returns `(d h_prev, d x)`.
    pub fn backward(
        &self,
        cache: &GruCache,
        dh_new: &[f64],
        grads: &mut GruCell,
    ) -> (Vec<f64>, Vec<f64>) {
        let hd = self.hidden_dim();
        let xd = cache.x.len();
        let (r, u, n, h) = (&cache.r, &cache.u, &cache.n, &cache.h_prev);

        let mut dh = vec![0.0; hd];
        let mut dan = vec![0.0; hd];
        let mut dau = vec![0.0; hd];
        for i in 0..hd {
            let dn = dh_new[i] * (1.0 - u[i]);
            let du = dh_new[i] * (h[i] - n[i]);
            dh[i] = dh_new[i] * u[i];
            dan[i] = dn * (1.0 - n[i] * n[i]);
            dau[i] = du * u[i] * (1.0 - u[i]);
        }

        let rh: Vec<f64> = r.iter().zip(h).map(|(ri, hi)| ri * hi).collect();
        grads.w_n.outer_acc(&dan, &cache.x);
        grads.u_n.outer_acc(&dan, &rh);
        for i in 0..hd {
            grads.b_n[i] += dan[i];
        }

        let mut drh = vec![0.0; hd];
        self.u_n.matvec_t_acc(&dan, &mut drh);
        let mut dar = vec![0.0; hd];
        for i in 0..hd {
            let dr = drh[i] * h[i];
            dh[i] += drh[i] * r[i];
            dar[i] = dr * r[i] * (1.0 - r[i]);
        }

        grads.w_r.outer_acc(&dar, &cache.x);
        grads.u_r.outer_acc(&dar, h);
        grads.w_u.outer_acc(&dau, &cache.x);
        grads.u_u.outer_acc(&dau, h);
        for i in 0..hd {
            grads.b_r[i] += dar[i];
            grads.b_u[i] += dau[i];
        }
        self.u_r.matvec_t_acc(&dar, &mut dh);
        self.u_u.matvec_t_acc(&dau, &mut dh);

        let mut dx = vec![0.0; xd];
        self.w_r.matvec_t_acc(&dar, &mut dx);
        self.w_u.matvec_t_acc(&dau, &mut dx);
        self.w_n.matvec_t_acc(&dan, &mut dx);
        (dh, dx)
    }
}
