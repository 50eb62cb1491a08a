//! Complex vector helpers and the small dense inverse behind the precoders.

use num_complex::Complex64;

pub type CVec = Vec<Complex64>;

/// `a^* b` (conjugate-linear in the first argument).
#[inline]
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// `a / ‖a‖`; `None` for the zero vector.
pub fn normalized(a: &[Complex64]) -> Option<CVec> {
    let n = norm_sqr(a).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return None;
    }
    Some(a.iter().map(|z| z / n).collect())
}

/// Dense row-major square complex matrix, sized for U ≤ 8.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    /// Gram matrix `G[u][v] = rows[u]^* rows[v]`, i.e. `H H^*` for `H` whose
    /// u-th row is `rows[u]^*`.
    pub fn gram(rows: &[CVec]) -> Self {
        let n = rows.len();
        let mut g = Self::zeros(n);
        for u in 0..n {
            for v in u..n {
                let x = inner(&rows[u], &rows[v]);
                g[(u, v)] = x;
                g[(v, u)] = x.conj();
            }
        }
        g
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.n {
            self[(i, i)] += value;
        }
    }

    /// Induced 1-norm (max column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Gauss–Jordan inverse with partial pivoting; `None` if a pivot vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::zeros(n);
        for i in 0..n {
            inv[(i, i)] = Complex64::new(1.0, 0.0);
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[(r, col)].norm().total_cmp(&a[(s, col)].norm()))
                .expect("non-empty pivot range");
            if !(a[(pivot, col)].norm() > 0.0) {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                    inv.data.swap(pivot * n + j, col * n + j);
                }
            }
            let p = a[(col, col)].inv();
            for j in 0..n {
                a[(col, j)] *= p;
                inv[(col, j)] *= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[(r, col)];
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let (ac, ic) = (a[(col, j)], inv[(col, j)]);
                    a[(r, j)] -= factor * ac;
                    inv[(r, j)] -= factor * ic;
                }
            }
        }
        Some(inv)
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}
