//! Univariate rational polynomials and exact real-root isolation.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::scalar::Rat;

/// Coefficients, constant term first, without trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly(Vec<Rat>);

impl Poly {
    pub fn new(mut coeffs: Vec<Rat>) -> Poly {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Poly(coeffs)
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree, with the zero polynomial reported as `None`.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn lead(&self) -> Rat {
        self.0.last().cloned().unwrap_or_else(Rat::zero)
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        self.0.iter().rev().fold(Rat::zero(), |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * Rat::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let l = self.lead();
        Poly::new(self.0.iter().map(|c| c / &l).collect())
    }

    /// The polynomial of degree `< xs.len()` through the given points.
    pub fn interpolate(xs: &[Rat], ys: &[Rat]) -> Poly {
        assert_eq!(xs.len(), ys.len());
        let n = xs.len();
        // Newton divided differences.
        let mut coef = ys.to_vec();
        for j in 1..n {
            for i in (j..n).rev() {
                coef[i] = (&coef[i] - &coef[i - 1]) / (&xs[i] - &xs[i - j]);
            }
        }
        let mut acc = Poly::new(vec![coef[n - 1].clone()]);
        for i in (0..n - 1).rev() {
            // acc = acc·(x − xs[i]) + coef[i]
            let mut next = vec![Rat::zero(); acc.0.len() + 1];
            for (k, c) in acc.0.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * &xs[i];
            }
            next[0] += &coef[i];
            acc = Poly::new(next);
        }
        acc
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly::new(
            (0..n)
                .map(|i| {
                    let a = self.0.get(i).cloned().unwrap_or_else(Rat::zero);
                    let b = other.0.get(i).cloned().unwrap_or_else(Rat::zero);
                    a - b
                })
                .collect(),
        )
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    /// Quotient and remainder.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let dd = d.0.len() - 1;
        let mut r = self.0.clone();
        if r.len() < d.0.len() {
            return (Poly(Vec::new()), self.clone());
        }
        let mut q = vec![Rat::zero(); r.len() - dd];
        let lead = d.lead();
        for i in (dd..r.len()).rev() {
            if r[i].is_zero() {
                continue;
            }
            let f = &r[i] / &lead;
            for (j, c) in d.0.iter().enumerate() {
                let t = &f * c;
                r[i - dd + j] -= t;
            }
            q[i - dd] = f;
        }
        r.truncate(dd);
        (Poly::new(q), Poly::new(r))
    }

    pub fn gcd(&self, other: &Poly) -> Poly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r.monic();
        }
        a.monic()
    }

    /// Product of the distinct irreducible factors.
    pub fn squarefree(&self) -> Poly {
        let g = self.gcd(&self.derivative());
        if g.degree().unwrap_or(0) == 0 {
            return self.monic();
        }
        self.div_rem(&g).0.monic()
    }

    /// Multiplicity of a root `x` of `self`.
    pub fn multiplicity(&self, x: &Rat) -> usize {
        let mut p = self.clone();
        let mut k = 0;
        while !p.is_zero() && p.eval(x).is_zero() {
            k += 1;
            p = p.derivative();
        }
        k
    }

    fn sign_at(&self, x: &Rat) -> i8 {
        sign(&self.eval(x))
    }
}

fn sign(x: &Rat) -> i8 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

/// Sturm chain of a squarefree polynomial.
pub struct Sturm {
    chain: Vec<Poly>,
}

impl Sturm {
    pub fn new(p: &Poly) -> Sturm {
        let mut chain = vec![p.clone(), p.derivative()];
        loop {
            let n = chain.len();
            if chain[n - 1].is_zero() {
                chain.pop();
                break;
            }
            let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
            if r.is_zero() {
                break;
            }
            chain.push(r.neg());
        }
        Sturm { chain }
    }

    fn variations(&self, x: &Rat) -> usize {
        let mut last = 0i8;
        let mut v = 0;
        for p in &self.chain {
            let s = p.sign_at(x);
            if s == 0 {
                continue;
            }
            if last != 0 && s != last {
                v += 1;
            }
            last = s;
        }
        v
    }

    /// Number of distinct roots in the half-open interval `(a, b]`.
    pub fn count(&self, a: &Rat, b: &Rat) -> usize {
        self.variations(a) - self.variations(b)
    }
}

/// An isolating interval `(lo, hi]` holding exactly one root, or a point
/// when the root is rational and detected exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootInterval {
    pub lo: Rat,
    pub hi: Rat,
}

impl RootInterval {
    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }
}

/// Cauchy bound on the absolute value of every root.
pub fn root_bound(p: &Poly) -> Rat {
    let l = p.lead().abs();
    let m = p.0[..p.0.len() - 1]
        .iter()
        .map(|c| c.abs() / &l)
        .max()
        .unwrap_or_else(Rat::zero);
    Rat::one() + m
}

/// Isolates the distinct real roots of `p` in ascending order and refines each
/// until `hi − lo ≤ rel · max(|lo|, |hi|)` (or until it lands exactly on a
/// rational root).
pub fn real_roots(p: &Poly, rel: &Rat) -> Vec<RootInterval> {
    let Some(deg) = p.degree() else {
        return Vec::new();
    };
    if deg == 0 {
        return Vec::new();
    }
    let sq = p.squarefree();
    let sturm = Sturm::new(&sq);
    let b = root_bound(&sq);
    let mut out = Vec::new();
    let mut stack = vec![(-b.clone(), b)];
    while let Some((lo, hi)) = stack.pop() {
        let c = sturm.count(&lo, &hi);
        if c == 0 {
            continue;
        }
        if c == 1 {
            out.push(refine(&sq, lo, hi, rel));
            continue;
        }
        let mid = (&lo + &hi) / Rat::from_integer(2.into());
        stack.push((lo, mid.clone()));
        stack.push((mid, hi));
    }
    out.sort_by(|a, b| a.lo.cmp(&b.lo));
    out
}

/// Bisection on a squarefree polynomial with one root in `(lo, hi]`.
pub fn refine(p: &Poly, mut lo: Rat, mut hi: Rat, rel: &Rat) -> RootInterval {
    if p.eval(&hi).is_zero() {
        return RootInterval { lo: hi.clone(), hi };
    }
    let two = Rat::from_integer(2.into());
    let slo = p.sign_at(&hi) * -1;
    loop {
        let scale = lo.abs().max(hi.abs());
        if &hi - &lo <= rel * &scale {
            break;
        }
        let mid = (&lo + &hi) / &two;
        let sm = p.sign_at(&mid);
        if sm == 0 {
            return RootInterval {
                lo: mid.clone(),
                hi: mid,
            };
        }
        if sm == slo {
            lo = mid;
        } else {
            hi = mid;
        }
        if lo.is_zero() && hi.is_zero() {
            break;
        }
    }
    let s = simplest_between(&lo, &hi);
    if p.eval(&s).is_zero() {
        return RootInterval {
            lo: s.clone(),
            hi: s,
        };
    }
    RootInterval { lo, hi }
}

/// The rational with the smallest denominator (then numerator) in `[lo, hi]`.
pub fn simplest_between(lo: &Rat, hi: &Rat) -> Rat {
    assert!(lo <= hi);
    if lo.is_negative() && hi.is_positive() || lo.is_zero() || hi.is_zero() {
        return Rat::zero();
    }
    if hi.is_negative() {
        return -simplest_between(&-hi, &-lo);
    }
    let fl = lo.floor();
    if fl == *lo || fl < hi.floor() || hi.is_integer() {
        // An integer lies in the interval.
        return if lo.is_integer() {
            lo.clone()
        } else {
            lo.ceil()
        };
    }
    // lo, hi share the integer part and lo is not an integer.
    let frac_lo = lo - &fl;
    let frac_hi = hi - &fl;
    let inner = simplest_between(&frac_hi.recip(), &frac_lo.recip());
    fl + inner.recip()
}

/// Roots that bisection or the simplest-rational probe pinned down exactly.
pub fn rational_roots(p: &Poly) -> Vec<Rat> {
    real_roots(p, &Rat::new(1.into(), BigInt::one() << 64))
        .into_iter()
        .filter(RootInterval::is_exact)
        .map(|r| r.lo)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    fn poly(c: &[i64]) -> Poly {
        Poly::new(c.iter().map(|&x| int(x)).collect())
    }

    #[test]
    fn division_and_gcd() {
        let p = poly(&[-1, 0, 1]); // x² − 1
        let (q, r) = p.div_rem(&poly(&[-1, 1]));
        assert_eq!(q, poly(&[1, 1]));
        assert!(r.is_zero());
        let g = poly(&[1, 2, 1]).gcd(&poly(&[-1, 0, 1]));
        assert_eq!(g, poly(&[1, 1]));
    }

    #[test]
    fn squarefree_and_multiplicity() {
        // (x−1)²(x+2)
        let p = poly(&[2, -3, 0, 1]);
        assert_eq!(p.squarefree(), poly(&[-2, 1, 1]));
        assert_eq!(p.multiplicity(&int(1)), 2);
        assert_eq!(p.multiplicity(&int(-2)), 1);
    }

    #[test]
    fn isolates_golden_ratio() {
        // x² − 3x + 1 has roots (3 ± √5)/2
        let p = poly(&[1, -3, 1]);
        let roots = real_roots(&p, &rat(1, 1 << 30));
        assert_eq!(roots.len(), 2);
        let phi2 = 2.618_033_988_749_895_f64;
        let hi = &roots[1];
        let lo_f = hi.lo.numer().to_string().parse::<f64>().unwrap()
            / hi.lo.denom().to_string().parse::<f64>().unwrap();
        assert!((lo_f - phi2).abs() < 1e-8);
        assert!(p.eval(&hi.lo) * p.eval(&hi.hi) < int(0));
    }

    #[test]
    fn exact_rational_roots() {
        // (x − 16)(x − 1)
        let p = poly(&[16, -17, 1]);
        let roots = real_roots(&p, &rat(1, 1 << 30));
        assert_eq!(
            roots,
            vec![
                RootInterval {
                    lo: int(1),
                    hi: int(1)
                },
                RootInterval {
                    lo: int(16),
                    hi: int(16)
                }
            ]
        );
        assert_eq!(rational_roots(&poly(&[-2, 0, 1])), Vec::<Rat>::new());
    }

    #[test]
    fn interpolation_recovers_polynomial() {
        let p = poly(&[3, -1, 0, 2]);
        let xs: Vec<Rat> = (0..4).map(int).collect();
        let ys: Vec<Rat> = xs.iter().map(|x| p.eval(x)).collect();
        assert_eq!(Poly::interpolate(&xs, &ys), p);
    }

    #[test]
    fn simplest_rational() {
        assert_eq!(simplest_between(&rat(1, 3), &rat(2, 3)), rat(1, 2));
        assert_eq!(simplest_between(&rat(3, 10), &rat(4, 10)), rat(1, 3));
        assert_eq!(simplest_between(&rat(7, 2), &rat(9, 2)), int(4));
        assert_eq!(simplest_between(&rat(-2, 3), &rat(-1, 3)), rat(-1, 2));
        assert_eq!(simplest_between(&rat(5, 7), &rat(5, 7)), rat(5, 7));
    }
}
