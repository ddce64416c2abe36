//! Double-double arithmetic: an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`,
//! about 106 bits of precision. Used to re-evaluate quantities whose `f64`
//! value is dominated by cancellation or by rounding at a sharp bound.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn renorm(hi: f64, lo: f64) -> Dd {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    /// Exact difference of two doubles.
    pub fn diff(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_sum(a, -b);
        Dd { hi, lo }
    }

    /// Exact product of two doubles.
    pub fn prod(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Zero for nonpositive input.
    pub fn sqrt(self) -> Dd {
        if !(self.hi > 0.0) {
            return Dd::ZERO;
        }
        let s = self.hi.sqrt();
        let r = self - Dd::prod(s, s);
        Dd::renorm(s, r.hi / (2.0 * s))
    }

    pub fn powi(self, mut n: u32) -> Dd {
        let mut base = self;
        let mut acc = Dd::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    /// `self^e` for `self >= 0`. Integer and half-integer exponents are
    /// evaluated in full precision; other exponents fall back to `f64` `powf`
    /// with a first-order correction for the low word.
    pub fn powf(self, e: f64) -> Dd {
        if e == 0.0 {
            return Dd::ONE;
        }
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let twice = 2.0 * e;
        if twice.fract() == 0.0 && twice.abs() <= 256.0 {
            let k = twice.abs() as u32;
            let base = if k % 2 == 1 { self.sqrt() } else { self };
            let p = if k % 2 == 1 { base.powi(k) } else { base.powi(k / 2) };
            return if e < 0.0 { Dd::ONE / p } else { p };
        }
        let h = self.hi.powf(e);
        Dd::renorm(h, h * e * (self.lo / self.hi))
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::renorm(s, e + f)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        Dd::renorm(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from(q2);
        let q3 = r.hi / o.hi;
        Dd::renorm(q1, q2) + Dd::from(q3)
    }
}

impl std::iter::Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::ZERO, |a, b| a + b)
    }
}
