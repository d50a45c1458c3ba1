//! Small dense tensors for the chart engine.  Dimensions are desk scale
//! (n ≤ 8), so flat `Vec` storage with inline index arithmetic is all
//! that is needed.

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    pub n: usize,
    a: Vec<S>,
}

impl<S: Real> Mat<S> {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            a: vec![S::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn norm(&self) -> S {
        self.a
            .iter()
            .fold(S::zero(), |acc, x| acc + *x * *x)
            .sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.a.iter().fold(S::zero(), |acc, x| acc.max(x.abs()))
    }

    pub fn add_scaled(&mut self, o: &Mat<S>, c: S) {
        for (a, b) in self.a.iter_mut().zip(&o.a) {
            *a = *a + c * *b;
        }
    }

    pub fn scale(&mut self, c: S) {
        for a in self.a.iter_mut() {
            *a = *a * c;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|x| x.is_finite())
    }

    /// Inverse by Gauss-Jordan with partial pivoting; `None` when singular.
    pub fn inverse(&self) -> Option<Mat<S>> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let mut piv = col;
            for row in (col + 1)..n {
                if a[(row, col)].abs() > a[(piv, col)].abs() {
                    piv = row;
                }
            }
            if a[(piv, col)] == S::zero() {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.a.swap(col * n + j, piv * n + j);
                    inv.a.swap(col * n + j, piv * n + j);
                }
            }
            let d = a[(col, col)].recip();
            for j in 0..n {
                a[(col, j)] = a[(col, j)] * d;
                inv[(col, j)] = inv[(col, j)] * d;
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let f = a[(row, col)];
                if f == S::zero() {
                    continue;
                }
                for j in 0..n {
                    a[(row, j)] = a[(row, j)] - f * a[(col, j)];
                    inv[(row, j)] = inv[(row, j)] - f * inv[(col, j)];
                }
            }
        }
        Some(inv)
    }

    /// Positive definiteness via Cholesky (the matrix is assumed symmetric).
    pub fn is_positive_definite(&self) -> bool {
        let n = self.n;
        let mut l = vec![S::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self[(i, j)];
                for k in 0..j {
                    sum = sum - l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= S::zero() {
                        return false;
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        true
    }
}

impl<S> std::ops::Index<(usize, usize)> for Mat<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.a[i * self.n + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Mat<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.a[i * self.n + j]
    }
}

#[derive(Clone, Debug)]
pub struct Ten3<S> {
    pub n: usize,
    a: Vec<S>,
}

impl<S: Real> Ten3<S> {
    pub fn zeros(n: usize) -> Self {
        Ten3 {
            n,
            a: vec![S::zero(); n * n * n],
        }
    }

    pub fn norm(&self) -> S {
        self.a
            .iter()
            .fold(S::zero(), |acc, x| acc + *x * *x)
            .sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.a.iter().fold(S::zero(), |acc, x| acc.max(x.abs()))
    }

    pub fn add_scaled(&mut self, o: &Ten3<S>, c: S) {
        for (a, b) in self.a.iter_mut().zip(&o.a) {
            *a = *a + c * *b;
        }
    }
}

impl<S> std::ops::Index<(usize, usize, usize)> for Ten3<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &S {
        &self.a[(i * self.n + j) * self.n + k]
    }
}

impl<S> std::ops::IndexMut<(usize, usize, usize)> for Ten3<S> {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut S {
        &mut self.a[(i * self.n + j) * self.n + k]
    }
}

#[derive(Clone, Debug)]
pub struct Ten4<S> {
    pub n: usize,
    a: Vec<S>,
}

impl<S: Real> Ten4<S> {
    pub fn zeros(n: usize) -> Self {
        Ten4 {
            n,
            a: vec![S::zero(); n * n * n * n],
        }
    }

    pub fn norm(&self) -> S {
        self.a
            .iter()
            .fold(S::zero(), |acc, x| acc + *x * *x)
            .sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.a.iter().fold(S::zero(), |acc, x| acc.max(x.abs()))
    }

    pub fn add_scaled(&mut self, o: &Ten4<S>, c: S) {
        for (a, b) in self.a.iter_mut().zip(&o.a) {
            *a = *a + c * *b;
        }
    }
}

impl<S> std::ops::Index<(usize, usize, usize, usize)> for Ten4<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j, k, l): (usize, usize, usize, usize)) -> &S {
        &self.a[((i * self.n + j) * self.n + k) * self.n + l]
    }
}

impl<S> std::ops::IndexMut<(usize, usize, usize, usize)> for Ten4<S> {
    #[inline]
    fn index_mut(&mut self, (i, j, k, l): (usize, usize, usize, usize)) -> &mut S {
        &mut self.a[((i * self.n + j) * self.n + k) * self.n + l]
    }
}
