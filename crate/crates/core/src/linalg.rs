//! Dense exact matrices over ℚ.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::{abs_value, padic_valuation, Rat};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat {
    n: usize,
    m: usize,
    data: Vec<Rat>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for j in 0..self.m {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(i, j)])?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = Rat;
    fn index(&self, (i, j): (usize, usize)) -> &Rat {
        &self.data[i * self.m + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rat {
        &mut self.data[i * self.m + j]
    }
}

impl Mat {
    pub fn zeros(n: usize, m: usize) -> Mat {
        Mat {
            n,
            m,
            data: vec![Rat::zero(); n * m],
        }
    }

    pub fn identity(n: usize) -> Mat {
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = Rat::one();
        }
        a
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Result<Mat> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Invalid("ragged matrix rows".into()));
        }
        Ok(Mat {
            n,
            m,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_i64(rows: &[&[i64]]) -> Mat {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&x| Rat::from_integer(x.into())).collect())
            .collect();
        Mat::from_rows(rows).expect("rectangular literal")
    }

    pub fn diag(entries: &[Rat]) -> Mat {
        let mut a = Mat::zeros(entries.len(), entries.len());
        for (i, e) in entries.iter().enumerate() {
            a[(i, i)] = e.clone();
        }
        a
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn is_square(&self) -> bool {
        self.n == self.m
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn col(&self, j: usize) -> Vec<Rat> {
        (0..self.n).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn entries(&self) -> &[Rat] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<Rat>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.m, self.n);
        for i in 0..self.n {
            for j in 0..self.m {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.m, other.n, "matrix product shape");
        let mut c = Mat::zeros(self.n, other.m);
        for i in 0..self.n {
            for k in 0..self.m {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.m {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        c[(i, j)] += a * b;
                    }
                }
            }
        }
        c
    }

    pub fn mul_vec(&self, v: &[Rat]) -> Vec<Rat> {
        assert_eq!(self.m, v.len(), "matrix-vector shape");
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Rat::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    pub fn scale(&self, s: &Rat) -> Mat {
        Mat {
            n: self.n,
            m: self.m,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        Mat {
            n: self.n,
            m: self.m,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Mat {
        let mut result = Mat::identity(self.n);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub fn det(&self) -> Rat {
        assert!(self.is_square());
        let mut a = self.clone();
        let n = self.n;
        let mut det = Rat::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&r| !a[(r, c)].is_zero()) else {
                return Rat::zero();
            };
            if p != c {
                a.swap_rows(p, c);
                det = -det;
            }
            let pivot = a[(c, c)].clone();
            det *= &pivot;
            for r in c + 1..n {
                if a[(r, c)].is_zero() {
                    continue;
                }
                let f = &a[(r, c)] / &pivot;
                for k in c..n {
                    let t = &f * &a[(c, k)];
                    a[(r, k)] -= t;
                }
            }
        }
        det
    }

    pub fn inverse(&self) -> Result<Mat> {
        assert!(self.is_square());
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for c in 0..n {
            let p = (c..n)
                .find(|&r| !a[(r, c)].is_zero())
                .ok_or(Error::Singular)?;
            a.swap_rows(p, c);
            inv.swap_rows(p, c);
            let pivot = a[(c, c)].clone();
            for k in 0..n {
                a[(c, k)] /= &pivot;
                inv[(c, k)] /= &pivot;
            }
            for r in 0..n {
                if r == c || a[(r, c)].is_zero() {
                    continue;
                }
                let f = a[(r, c)].clone();
                for k in 0..n {
                    let t = &f * &a[(c, k)];
                    a[(r, k)] -= t;
                    let t = &f * &inv[(c, k)];
                    inv[(r, k)] -= t;
                }
            }
        }
        Ok(inv)
    }

    pub fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for k in 0..self.m {
            self.data.swap(i * self.m + k, j * self.m + k);
        }
    }

    pub fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for r in 0..self.n {
            self.data.swap(r * self.m + i, r * self.m + j);
        }
    }

    /// Second exterior power: entries are the 2×2 minors indexed by
    /// lexicographically ordered pairs `i < j`.
    pub fn compound2(&self) -> Mat {
        let pairs = index_pairs(self.n);
        let cols = index_pairs(self.m);
        let mut c = Mat::zeros(pairs.len(), cols.len());
        for (r, &(i, j)) in pairs.iter().enumerate() {
            for (s, &(k, l)) in cols.iter().enumerate() {
                c[(r, s)] = &self[(i, k)] * &self[(j, l)] - &self[(i, l)] * &self[(j, k)];
            }
        }
        c
    }

    pub fn frobenius_sq(&self) -> Rat {
        self.data.iter().fold(Rat::zero(), |acc, x| acc + x * x)
    }

    /// `‖A‖` for the max norm over a non-archimedean place: the largest
    /// absolute value of an entry.
    pub fn max_abs(&self, place: crate::scalar::Place) -> Rat {
        self.data
            .iter()
            .map(|x| abs_value(x, place))
            .max()
            .unwrap_or_else(Rat::zero)
    }

    /// Equality in PGL: `self = λ·other` for some nonzero `λ`.
    pub fn proportional(&self, other: &Mat) -> bool {
        if self.n != other.n || self.m != other.m {
            return false;
        }
        let Some(k) = self.data.iter().position(|x| !x.is_zero()) else {
            return other.data.iter().all(Zero::is_zero);
        };
        if other.data[k].is_zero() {
            return false;
        }
        let lambda = &other.data[k] / &self.data[k];
        self.data
            .iter()
            .zip(&other.data)
            .all(|(a, b)| &(a * &lambda) == b)
    }

    pub fn is_scalar(&self) -> bool {
        self.proportional(&Mat::identity(self.n))
    }

    /// Scales to a primitive integer matrix with a positive first nonzero entry.
    pub fn primitive_integer(&self) -> IntMat {
        let lcm = self
            .data
            .iter()
            .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let mut ints: Vec<BigInt> = self
            .data
            .iter()
            .map(|x| (x * Rat::from_integer(lcm.clone())).to_integer())
            .collect();
        let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
        if !g.is_zero() {
            let sign_flip = ints
                .iter()
                .find(|x| !x.is_zero())
                .is_some_and(|x| x.is_negative());
            for x in ints.iter_mut() {
                *x = &*x / &g;
                if sign_flip {
                    *x = -&*x;
                }
            }
        }
        IntMat {
            n: self.n,
            data: ints,
        }
    }
}

pub fn index_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((i, j));
        }
    }
    out
}

/// A square integer matrix used for fast projective word evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntMat {
    pub n: usize,
    pub data: Vec<BigInt>,
}

impl IntMat {
    pub fn identity(n: usize) -> IntMat {
        let mut data = vec![BigInt::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = BigInt::one();
        }
        IntMat { n, data }
    }

    pub fn mul(&self, other: &IntMat) -> IntMat {
        let n = self.n;
        let mut data = vec![BigInt::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = &self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * &other.data[k * n + j];
                }
            }
        }
        IntMat { n, data }.reduced()
    }

    fn reduced(mut self) -> IntMat {
        let g = self.data.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
        if !g.is_zero() && !g.is_one() {
            for x in self.data.iter_mut() {
                *x = &*x / &g;
            }
        }
        self
    }

    pub fn is_scalar(&self) -> bool {
        let n = self.n;
        let d = &self.data[0];
        (0..n).all(|i| {
            (0..n).all(|j| {
                let x = &self.data[i * n + j];
                if i == j {
                    x == d
                } else {
                    x.is_zero()
                }
            })
        })
    }
}

/// Semidefiniteness of a symmetric rational matrix by exact symmetric
/// elimination with diagonal pivots.
pub fn is_psd(a: &Mat) -> bool {
    let n = a.rows();
    let mut a = a.clone();
    for c in 0..n {
        let pivot = a[(c, c)].clone();
        if pivot.is_negative() {
            return false;
        }
        if pivot.is_zero() {
            if (c + 1..n).any(|r| !a[(r, c)].is_zero()) {
                return false;
            }
            continue;
        }
        for r in c + 1..n {
            if a[(r, c)].is_zero() {
                continue;
            }
            let f = &a[(r, c)] / &pivot;
            for k in c..n {
                let t = &f * &a[(c, k)];
                a[(r, k)] -= t;
            }
        }
    }
    true
}

/// Positive definiteness: every pivot of the symmetric elimination is positive.
pub fn is_pd(a: &Mat) -> bool {
    let n = a.rows();
    let mut a = a.clone();
    for c in 0..n {
        let pivot = a[(c, c)].clone();
        if !pivot.is_positive() {
            return false;
        }
        for r in c + 1..n {
            if a[(r, c)].is_zero() {
                continue;
            }
            let f = &a[(r, c)] / &pivot;
            for k in c..n {
                let t = &f * &a[(c, k)];
                a[(r, k)] -= t;
            }
        }
    }
    true
}

/// Coefficients (constant term first) of `det(x·I − A)`, by the
/// Faddeev–LeVerrier recursion.
pub fn char_poly(a: &Mat) -> Vec<Rat> {
    let n = a.rows();
    let mut coeffs = vec![Rat::zero(); n + 1];
    coeffs[n] = Rat::one();
    let mut m = Mat::zeros(n, n);
    for k in 1..=n {
        // M_k = A·M_{k-1} + c_{n-k+1}·I
        let mut next = a.mul(&m);
        for i in 0..n {
            next[(i, i)] += &coeffs[n - k + 1];
        }
        m = next;
        let am = a.mul(&m);
        let trace = (0..n).fold(Rat::zero(), |acc, i| acc + &am[(i, i)]);
        coeffs[n - k] = -trace / Rat::from_integer(BigInt::from(k));
    }
    coeffs
}

/// `g = left · diag · right` with `left`, `right` invertible over ℤ localized
/// at `p` and `diag` diagonal with valuations sorted ascending.
#[derive(Clone, Debug)]
pub struct LocalSmith {
    pub left: Mat,
    pub diag: Vec<Rat>,
    pub right: Mat,
    pub valuations: Vec<i64>,
}

pub fn local_smith(g: &Mat, p: u64) -> Result<LocalSmith> {
    smith(g, p, true)
}

/// The sorted valuations of the local Smith form, skipping the transforms.
pub fn local_smith_valuations(g: &Mat, p: u64) -> Result<Vec<i64>> {
    let mut v = smith(g, p, false)?.valuations;
    v.sort_unstable();
    Ok(v)
}

fn smith(g: &Mat, p: u64, track: bool) -> Result<LocalSmith> {
    let n = g.rows();
    let mut a = g.clone();
    // a = left_inv · g · right_inv maintained through elementary operations;
    // we track left and right so that g = left · a · right.
    let mut left = Mat::identity(n);
    let mut right = Mat::identity(n);
    for c in 0..n {
        let mut best: Option<(i64, usize, usize)> = None;
        for i in c..n {
            for j in c..n {
                if a[(i, j)].is_zero() {
                    continue;
                }
                let v = padic_valuation(&a[(i, j)], p)?;
                if best.map_or(true, |(bv, _, _)| v < bv) {
                    best = Some((v, i, j));
                }
            }
        }
        let (_, bi, bj) = best.ok_or(Error::Singular)?;
        // Row swap on a ⇔ column swap on left; column swap on a ⇔ row swap on right.
        a.swap_rows(c, bi);
        a.swap_cols(c, bj);
        if track {
            left.swap_cols(c, bi);
            right.swap_rows(c, bj);
        }
        let pivot = a[(c, c)].clone();
        for r in c + 1..n {
            if a[(r, c)].is_zero() {
                continue;
            }
            // row_r -= f·row_c on a ⇔ col_c += f·col_r on left
            let f = &a[(r, c)] / &pivot;
            for k in c..n {
                let t = &f * &a[(c, k)];
                a[(r, k)] -= t;
            }
            for k in (0..n).filter(|_| track) {
                let t = &f * &left[(k, r)];
                left[(k, c)] += t;
            }
        }
        for s in c + 1..n {
            if a[(c, s)].is_zero() {
                continue;
            }
            // col_s -= f·col_c on a ⇔ row_c += f·row_s on right
            let f = &a[(c, s)] / &pivot;
            for k in c..n {
                let t = &f * &a[(k, c)];
                a[(k, s)] -= t;
            }
            for k in (0..n).filter(|_| track) {
                let t = &f * &right[(s, k)];
                right[(c, k)] += t;
            }
        }
    }
    let diag: Vec<Rat> = (0..n).map(|i| a[(i, i)].clone()).collect();
    let valuations = diag
        .iter()
        .map(|d| padic_valuation(d, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalSmith {
        left,
        diag,
        right,
        valuations,
    })
}

/// A basis of the right null space of `a`.
pub fn kernel(a: &Mat) -> Vec<Vec<Rat>> {
    let (n, m) = (a.rows(), a.cols());
    let mut a = a.clone();
    let mut pivots = Vec::new();
    let mut row = 0;
    for c in 0..m {
        if row == n {
            break;
        }
        let Some(p) = (row..n).find(|&r| !a[(r, c)].is_zero()) else {
            continue;
        };
        a.swap_rows(p, row);
        let pivot = a[(row, c)].clone();
        for k in 0..m {
            a[(row, k)] /= &pivot;
        }
        for r in 0..n {
            if r == row || a[(r, c)].is_zero() {
                continue;
            }
            let f = a[(r, c)].clone();
            for k in 0..m {
                let t = &f * &a[(row, k)];
                a[(r, k)] -= t;
            }
        }
        pivots.push(c);
        row += 1;
    }
    let free: Vec<usize> = (0..m).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![Rat::zero(); m];
            v[fc] = Rat::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[(r, fc)].clone();
            }
            v
        })
        .collect()
}

pub fn vec_is_zero(v: &[Rat]) -> bool {
    v.iter().all(Zero::is_zero)
}

impl serde::Serialize for Mat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = (0..self.n)
            .map(|i| self.row(i).iter().map(crate::scalar::fmt_rat).collect())
            .collect();
        serde::Serialize::serialize(&rows, s)
    }
}

impl<'de> serde::Deserialize<'de> for Mat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Mat, D::Error> {
        use serde::de::Error as _;
        let rows: Vec<Vec<String>> = serde::Deserialize::deserialize(d)?;
        let rows = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|x| crate::scalar::parse_rat(x))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Mat::from_rows(rows).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat, Place};

    #[test]
    fn det_and_inverse() {
        let a = Mat::from_i64(&[&[2, 1], &[1, 1]]);
        assert_eq!(a.det(), int(1));
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv), Mat::identity(2));
        assert_eq!(
            Mat::from_i64(&[&[1, 2], &[2, 4]]).inverse(),
            Err(Error::Singular)
        );
    }

    #[test]
    fn char_poly_of_companion() {
        // x² − 3x + 1 for [[2,1],[1,1]]
        let a = Mat::from_i64(&[&[2, 1], &[1, 1]]);
        assert_eq!(char_poly(&a), vec![int(1), int(-3), int(1)]);
        let d = Mat::diag(&[int(2), int(3), int(5)]);
        assert_eq!(char_poly(&d), vec![int(-30), int(31), int(-10), int(1)]);
    }

    #[test]
    fn definiteness() {
        assert!(is_psd(&Mat::from_i64(&[&[1, 1], &[1, 1]])));
        assert!(!is_pd(&Mat::from_i64(&[&[1, 1], &[1, 1]])));
        assert!(is_pd(&Mat::from_i64(&[&[2, 1], &[1, 2]])));
        assert!(!is_psd(&Mat::from_i64(&[&[0, 1], &[1, 0]])));
        assert!(is_psd(&Mat::zeros(3, 3)));
    }

    #[test]
    fn compound_of_diagonal() {
        let d = Mat::diag(&[int(2), int(3), int(5)]);
        assert_eq!(d.compound2(), Mat::diag(&[int(6), int(10), int(15)]));
    }

    #[test]
    fn local_smith_reconstructs() {
        let g = Mat::from_i64(&[&[2, 4, 1], &[6, 3, 0], &[1, -1, 5]]);
        for p in [2, 3, 5] {
            let s = local_smith(&g, p).unwrap();
            let rebuilt = s.left.mul(&Mat::diag(&s.diag)).mul(&s.right);
            assert_eq!(rebuilt, g);
            for m in [&s.left, &s.right] {
                assert_eq!(m.max_abs(Place::PAdic(p)), int(1));
                assert_eq!(abs_value(&m.det(), Place::PAdic(p)), int(1));
            }
            assert!(s.valuations.windows(2).all(|w| w[0] <= w[1]));
        }
        let s = local_smith(&Mat::diag(&[int(5), int(1)]), 5).unwrap();
        assert_eq!(s.valuations, vec![0, 1]);
        let s = local_smith(&Mat::diag(&[rat(1, 5), int(1)]), 5).unwrap();
        assert_eq!(s.valuations, vec![-1, 0]);
    }

    #[test]
    fn null_space() {
        let a = Mat::from_i64(&[&[1, 0, 1], &[0, 1, 1]]);
        let k = kernel(&a);
        assert_eq!(k.len(), 1);
        assert!(vec_is_zero(&a.mul_vec(&k[0])));
        assert!(kernel(&Mat::identity(3)).is_empty());
    }

    #[test]
    fn proportional_matrices() {
        let a = Mat::from_i64(&[&[1, 2], &[3, 4]]);
        assert!(a.proportional(&a.scale(&rat(-7, 3))));
        assert!(!a.proportional(&Mat::identity(2)));
        assert!(Mat::identity(3).scale(&int(4)).is_scalar());
    }
}
