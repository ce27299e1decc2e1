//! Banded LU with partial pivoting, plus a cyclic variant whose corner
//! entries are folded in through a low-rank (Woodbury) correction.

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Each row keeps `kl` extra columns to the right for pivoting fill-in.
#[derive(Clone, Debug)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            T::zero()
        }
    }

    /// Adds `v` at `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.slot(i, j);
        self.data[k] = self.data[k] + v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn factor(mut self) -> Result<BandLu<T>> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut pivots = vec![0usize; n];
        let mut scale = T::zero();
        for v in &self.data {
            scale = scale.max(v.abs());
        }
        let tiny = scale * T::epsilon() * T::lit(n as f64);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::SingularMatrix);
            }
            pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for i in k + 1..=last_row {
                let s = self.slot(i, k);
                let l = self.data[s] / pivot;
                self.data[s] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=last_col {
                    let (a, b) = (self.slot(i, j), self.slot(k, j));
                    self.data[a] = self.data[a] - l * self.data[b];
                }
            }
        }
        Ok(BandLu { a: self, pivots })
    }
}

/// Factors of a [`BandMatrix`]; row interchanges are applied in sequence.
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    a: BandMatrix<T>,
    pivots: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    pub fn solve_in_place(&self, b: &mut [T]) {
        let a = &self.a;
        let n = a.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            b.swap(k, p);
            let bk = b[k];
            if bk != T::zero() {
                for i in k + 1..=(k + a.kl).min(n - 1) {
                    b[i] = b[i] - a.data[a.slot(i, k)] * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + a.ku + a.kl).min(n - 1) {
                s = s - a.data[a.slot(i, j)] * b[j];
            }
            b[i] = s / a.data[a.slot(i, i)];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Band matrix with periodic wrap-around: entry `(i, j)` is stored when the
/// cyclic distance from the diagonal is at most `q`.
#[derive(Clone, Debug)]
pub struct CyclicBandMatrix<T> {
    band: BandMatrix<T>,
    q: usize,
    /// Rows `0..q` and `n−q..n`, dense over their wrapped columns.
    corners: Vec<(usize, usize, T)>,
}

impl<T: Scalar> CyclicBandMatrix<T> {
    pub fn zeros(n: usize, q: usize) -> Self {
        assert!(n > 4 * q, "cyclic band needs n > 4q");
        Self {
            band: BandMatrix::zeros(n, q, q),
            q,
            corners: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.band.n
    }

    pub fn is_empty(&self) -> bool {
        self.band.n == 0
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        if self.band.in_band(i, j) {
            self.band.add(i, j, v);
            return;
        }
        let n = self.band.n;
        let d = (j + n - i) % n;
        assert!(d <= self.q || n - d <= self.q, "({i}, {j}) outside cyclic band");
        match self.corners.iter_mut().find(|c| c.0 == i && c.1 == j) {
            Some(c) => c.2 = c.2 + v,
            None => self.corners.push((i, j, v)),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = self.band.mul_vec(x);
        for &(i, j, v) in &self.corners {
            y[i] = y[i] + v * x[j];
        }
        y
    }

    pub fn factor(self) -> Result<CyclicLu<T>> {
        let n = self.band.n;
        let q = self.q;
        let rows: Vec<usize> = (0..q).chain(n - q..n).collect();
        let k = rows.len();
        let lu = self.band.factor()?;
        // A = B + U W with U = [e_r for r in rows], W holding the corner entries.
        let mut z = Vec::with_capacity(k);
        for &r in &rows {
            let mut e = vec![T::zero(); n];
            e[r] = T::one();
            lu.solve_in_place(&mut e);
            z.push(e);
        }
        let w_rows: Vec<Vec<(usize, T)>> = rows
            .iter()
            .map(|&r| {
                self.corners
                    .iter()
                    .filter(|c| c.0 == r)
                    .map(|c| (c.1, c.2))
                    .collect()
            })
            .collect();
        let mut cap = vec![T::zero(); k * k];
        for a in 0..k {
            for b in 0..k {
                let wz: T = w_rows[a].iter().map(|&(j, v)| v * z[b][j]).sum();
                cap[a * k + b] = wz + if a == b { T::one() } else { T::zero() };
            }
        }
        let cap = DenseLu::new(cap, k)?;
        Ok(CyclicLu { lu, z, w_rows, cap })
    }
}

#[derive(Clone, Debug)]
pub struct CyclicLu<T> {
    lu: BandLu<T>,
    z: Vec<Vec<T>>,
    w_rows: Vec<Vec<(usize, T)>>,
    cap: DenseLu<T>,
}

impl<T: Scalar> CyclicLu<T> {
    pub fn solve_in_place(&self, b: &mut [T]) {
        self.lu.solve_in_place(b);
        let mut t: Vec<T> = self
            .w_rows
            .iter()
            .map(|row| row.iter().map(|&(j, v)| v * b[j]).sum())
            .collect();
        self.cap.solve_in_place(&mut t);
        for (zc, &tc) in self.z.iter().zip(&t) {
            for (bi, &zi) in b.iter_mut().zip(zc) {
                *bi = *bi - zi * tc;
            }
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Small dense LU with partial pivoting for the capacitance matrix.
#[derive(Clone, Debug)]
struct DenseLu<T> {
    a: Vec<T>,
    k: usize,
    pivots: Vec<usize>,
}

impl<T: Scalar> DenseLu<T> {
    fn new(mut a: Vec<T>, k: usize) -> Result<Self> {
        let mut pivots = vec![0; k];
        for c in 0..k {
            let p = (c..k)
                .max_by(|&x, &y| a[x * k + c].abs().partial_cmp(&a[y * k + c].abs()).unwrap())
                .unwrap();
            if a[p * k + c] == T::zero() || !a[p * k + c].is_finite() {
                return Err(Error::SingularMatrix);
            }
            pivots[c] = p;
            if p != c {
                for j in 0..k {
                    a.swap(c * k + j, p * k + j);
                }
            }
            for r in c + 1..k {
                let l = a[r * k + c] / a[c * k + c];
                a[r * k + c] = l;
                for j in c + 1..k {
                    a[r * k + j] = a[r * k + j] - l * a[c * k + j];
                }
            }
        }
        Ok(Self { a, k, pivots })
    }

    fn solve_in_place(&self, b: &mut [T]) {
        let k = self.k;
        for c in 0..k {
            b.swap(c, self.pivots[c]);
            for r in c + 1..k {
                b[r] = b[r] - self.a[r * k + c] * b[c];
            }
        }
        for r in (0..k).rev() {
            let mut s = b[r];
            for j in r + 1..k {
                s = s - self.a[r * k + j] * b[j];
            }
            b[r] = s / self.a[r * k + r];
        }
    }
}
