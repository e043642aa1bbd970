//! Multiprecision complex matrices.
//!
//! The subnormal chain recurrence amplifies rounding error geometrically,
//! so the seed and the chain run on binary floats of configurable precision.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_complex::Complex64;

use super::CMatrix;

pub type MpReal = FBig<HalfEven, 2>;

pub fn real(x: f64, bits: usize) -> MpReal {
    MpReal::try_from(x)
        .expect("finite f64")
        .with_precision(bits)
        .value()
}

pub fn to_f64(x: &MpReal) -> f64 {
    x.to_f64().value()
}

#[derive(Clone, Debug)]
pub struct MpComplex {
    pub re: MpReal,
    pub im: MpReal,
}

impl MpComplex {
    pub fn zero(bits: usize) -> Self {
        Self::from_c64(Complex64::new(0.0, 0.0), bits)
    }

    pub fn one(bits: usize) -> Self {
        Self::from_c64(Complex64::new(1.0, 0.0), bits)
    }

    pub fn from_c64(z: Complex64, bits: usize) -> Self {
        Self {
            re: real(z.re, bits),
            im: real(z.im, bits),
        }
    }

    pub fn from_real(re: MpReal, bits: usize) -> Self {
        Self {
            re,
            im: real(0.0, bits),
        }
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(to_f64(&self.re), to_f64(&self.im))
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    pub fn scale(&self, s: &MpReal) -> Self {
        Self {
            re: &self.re * s,
            im: &self.im * s,
        }
    }

    pub fn div(&self, o: &Self) -> Self {
        let den = o.norm_sqr();
        Self {
            re: (&self.re * &o.re + &self.im * &o.im) / &den,
            im: (&self.im * &o.re - &self.re * &o.im) / &den,
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn norm_sqr(&self) -> MpReal {
        &self.re * &self.re + &self.im * &self.im
    }
}

/// Dense row-major matrix of [`MpComplex`].
#[derive(Clone, Debug)]
pub struct MpMatrix {
    rows: usize,
    cols: usize,
    bits: usize,
    data: Vec<MpComplex>,
}

impl MpMatrix {
    pub fn zeros(rows: usize, cols: usize, bits: usize) -> Self {
        Self {
            rows,
            cols,
            bits,
            data: vec![MpComplex::zero(bits); rows * cols],
        }
    }

    pub fn identity(n: usize, bits: usize) -> Self {
        let mut m = Self::zeros(n, n, bits);
        for i in 0..n {
            m.set(i, i, MpComplex::one(bits));
        }
        m
    }

    pub fn from_cmatrix(m: &CMatrix, bits: usize) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols(), bits);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, MpComplex::from_c64(m[(i, j)], bits));
            }
        }
        out
    }

    pub fn to_cmatrix(&self) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).to_c64())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn get(&self, i: usize, j: usize) -> &MpComplex {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: MpComplex) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<MpComplex> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows, self.bits);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows);
        let mut out = Self::zeros(self.rows, o.cols, self.bits);
        for i in 0..self.rows {
            for j in 0..o.cols {
                let mut acc = MpComplex::zero(self.bits);
                for k in 0..self.cols {
                    acc = acc.add(&self.get(i, k).mul(o.get(k, j)));
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, MpComplex::add)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, MpComplex::sub)
    }

    fn zip(&self, o: &Self, f: impl Fn(&MpComplex, &MpComplex) -> MpComplex) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits,
            data: self.data.iter().zip(&o.data).map(|(a, b)| f(a, b)).collect(),
        }
    }

    /// Upper-triangular `r` with `self = r* r`, or the index of the first
    /// non-positive pivot.
    pub fn cholesky_upper(&self) -> Result<Self, usize> {
        let n = self.rows;
        let mut r = Self::zeros(n, n, self.bits);
        for j in 0..n {
            let mut d = self.get(j, j).re.clone();
            for k in 0..j {
                d -= r.get(k, j).norm_sqr();
            }
            if d <= real(0.0, self.bits) {
                return Err(j);
            }
            let djj = d.sqrt();
            for i in j + 1..n {
                // r[j][i] = (a[j][i] - sum_k conj(r[k][j]) r[k][i]) / r[j][j]
                let mut s = self.get(j, i).clone();
                for k in 0..j {
                    s = s.sub(&r.get(k, j).conj().mul(r.get(k, i)));
                }
                r.set(j, i, s.scale(&(real(1.0, self.bits) / &djj)));
            }
            r.set(j, j, MpComplex::from_real(djj, self.bits));
        }
        Ok(r)
    }

    /// Solves `l x = b` for lower-triangular `l` (columnwise on `b`).
    pub fn solve_lower(&self, b: &Self) -> Self {
        let n = self.rows;
        let mut x = Self::zeros(n, b.cols, self.bits);
        for c in 0..b.cols {
            for i in 0..n {
                let mut s = b.get(i, c).clone();
                for k in 0..i {
                    s = s.sub(&self.get(i, k).mul(x.get(k, c)));
                }
                x.set(i, c, s.div(self.get(i, i)));
            }
        }
        x
    }

    /// Solves `u x = b` for upper-triangular `u`.
    pub fn solve_upper(&self, b: &Self) -> Self {
        let n = self.rows;
        let mut x = Self::zeros(n, b.cols, self.bits);
        for c in 0..b.cols {
            for i in (0..n).rev() {
                let mut s = b.get(i, c).clone();
                for k in i + 1..n {
                    s = s.sub(&self.get(i, k).mul(x.get(k, c)));
                }
                x.set(i, c, s.div(self.get(i, i)));
            }
        }
        x
    }

    /// Pivoted outer-product Cholesky of a hermitian PSD matrix.
    ///
    /// Returns `v` with `rank` rows such that `self = v* v`. Elimination stops
    /// once the largest remaining diagonal drops below `rel_tol` times the
    /// largest initial diagonal.
    pub fn pivoted_cholesky(&self, rel_tol: f64) -> Self {
        let n = self.rows;
        let mut s = self.clone();
        let max_diag = (0..n)
            .map(|i| to_f64(&self.get(i, i).re))
            .fold(0.0f64, f64::max);
        let mut rows: Vec<Vec<MpComplex>> = Vec::new();
        let mut used = vec![false; n];
        for _ in 0..n {
            let mut best: Option<(usize, f64)> = None;
            for (p, &u) in used.iter().enumerate() {
                if u {
                    continue;
                }
                let dp = to_f64(&s.get(p, p).re);
                if best.is_none_or(|(_, b)| dp > b) {
                    best = Some((p, dp));
                }
            }
            let Some((p, dp)) = best else { break };
            if dp <= rel_tol * max_diag || dp <= 0.0 {
                break;
            }
            used[p] = true;
            let piv = s.get(p, p).re.sqrt();
            let inv = real(1.0, self.bits) / &piv;
            let row: Vec<MpComplex> = (0..n)
                .map(|j| {
                    if j == p {
                        MpComplex::from_real(piv.clone(), self.bits)
                    } else if used[j] {
                        MpComplex::zero(self.bits)
                    } else {
                        s.get(p, j).scale(&inv)
                    }
                })
                .collect();
            for j in 0..n {
                for k in 0..n {
                    let upd = row[j].conj().mul(&row[k]);
                    let cur = s.get(j, k).sub(&upd);
                    s.set(j, k, cur);
                }
            }
            rows.push(row);
        }
        let mut v = Self::zeros(rows.len(), n, self.bits);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, x) in row.into_iter().enumerate() {
                v.set(i, j, x);
            }
        }
        v
    }
}
