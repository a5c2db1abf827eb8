//! Double-double reference scalar.
//!
//! `TwoFloat` supplies exact two-sum/two-product addition, subtraction and
//! multiplication, but its division skips the fused multiply-add in the
//! residual and its `exp`/`ln`/`tanh` are only f64-accurate. [`Dd`] keeps the
//! former and replaces the latter, giving ~1e-30 relative accuracy on every
//! operation the models use.

use std::cmp::Ordering;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign};
use std::sync::OnceLock;

use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use twofloat::TwoFloat;

#[derive(Clone, Copy, Debug, Default)]
pub struct Dd(pub TwoFloat);

impl PartialEq for Dd {
    fn eq(&self, o: &Dd) -> bool {
        self.0.hi() == o.0.hi() && self.0.lo() == o.0.lo()
    }
}

/// Lexicographic on `(hi, lo)`. `TwoFloat`'s own ordering subtracts and so
/// misorders infinities.
impl PartialOrd for Dd {
    fn partial_cmp(&self, o: &Dd) -> Option<Ordering> {
        match self.0.hi().partial_cmp(&o.0.hi())? {
            Ordering::Equal if self.0.hi().is_finite() => self.0.lo().partial_cmp(&o.0.lo()),
            ord => Some(ord),
        }
    }
}

impl Dd {
    pub fn hi(self) -> f64 {
        self.0.hi()
    }

    fn f(x: f64) -> Self {
        Dd(<TwoFloat as From<f64>>::from(x))
    }

    fn ln2() -> Self {
        Dd(TwoFloat::new_add(std::f64::consts::LN_2, 2.3190468138462996e-17))
    }
}

const TAYLOR_TERMS: usize = 18;

/// `1/n!` for `n = 0..=TAYLOR_TERMS`.
fn inverse_factorials() -> &'static [Dd; TAYLOR_TERMS + 1] {
    static TABLE: OnceLock<[Dd; TAYLOR_TERMS + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [Dd::one(); TAYLOR_TERMS + 1];
        for n in 1..=TAYLOR_TERMS {
            t[n] = t[n - 1] / Dd::f(n as f64);
        }
        t
    })
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::f(x)
    }
}

impl From<Dd> for f64 {
    fn from(x: Dd) -> f64 {
        <f64 as From<TwoFloat>>::from(x.0)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        Dd(self.0 + o.0)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        Dd(self.0 - o.0)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        Dd(self.0 * o.0)
    }
}

impl Div for Dd {
    type Output = Dd;
    /// Quotient plus one residual correction.
    fn div(self, o: Dd) -> Dd {
        let q = self.0 / o.0;
        if !q.is_valid() || q.hi() == 0.0 || o.0.hi().is_infinite() {
            return Dd(q);
        }
        let r = self.0 - q * o.0;
        Dd(q + <TwoFloat as From<f64>>::from(r.hi() / o.0.hi()))
    }
}

impl Rem for Dd {
    type Output = Dd;
    fn rem(self, o: Dd) -> Dd {
        Dd(self.0 % o.0)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd(-self.0)
    }
}

macro_rules! assign {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr for Dd {
            fn $f(&mut self, o: Dd) {
                *self = *self $op o;
            }
        }
    };
}
assign!(AddAssign, add_assign, +);
assign!(SubAssign, sub_assign, -);
assign!(MulAssign, mul_assign, *);
assign!(DivAssign, div_assign, /);

impl Zero for Dd {
    fn zero() -> Self {
        Dd::f(0.0)
    }
    fn is_zero(&self) -> bool {
        self.hi() == 0.0
    }
}

impl One for Dd {
    fn one() -> Self {
        Dd::f(1.0)
    }
}

impl Num for Dd {
    type FromStrRadixErr = num_traits::ParseFloatError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Dd::f)
    }
}

impl ToPrimitive for Dd {
    fn to_i64(&self) -> Option<i64> {
        self.0.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(<f64 as From<TwoFloat>>::from(self.0))
    }
}

impl FromPrimitive for Dd {
    fn from_i64(n: i64) -> Option<Self> {
        TwoFloat::from_i64(n).map(Dd)
    }
    fn from_u64(n: u64) -> Option<Self> {
        TwoFloat::from_u64(n).map(Dd)
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Dd::f(n))
    }
}

impl NumCast for Dd {
    fn from<T: ToPrimitive>(n: T) -> Option<Self> {
        n.to_f64().map(Dd::f)
    }
}

macro_rules! delegate {
    ($($f:ident),*) => {
        $(fn $f(self) -> Self { Dd(Float::$f(self.0)) })*
    };
}

macro_rules! delegate_bool {
    ($($f:ident),*) => {
        $(fn $f(self) -> bool { Float::$f(self.0) })*
    };
}

impl Float for Dd {
    fn nan() -> Self {
        Dd::f(f64::NAN)
    }
    fn infinity() -> Self {
        Dd::f(f64::INFINITY)
    }
    fn neg_infinity() -> Self {
        Dd::f(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Dd::f(-0.0)
    }
    fn min_value() -> Self {
        Dd(TwoFloat::min_value())
    }
    fn min_positive_value() -> Self {
        Dd(TwoFloat::min_positive_value())
    }
    fn max_value() -> Self {
        Dd(TwoFloat::max_value())
    }
    fn epsilon() -> Self {
        Dd::f(1e-31)
    }

    delegate_bool!(
        is_nan,
        is_infinite,
        is_finite,
        is_normal,
        is_sign_positive,
        is_sign_negative
    );
    delegate!(
        floor, ceil, round, trunc, fract, abs, signum, cbrt, sin, cos, tan, asin, acos, atan, sinh, cosh, asinh, acosh,
        atanh, exp2, log2, log10, ln_1p
    );

    fn classify(self) -> FpCategory {
        Float::classify(self.0)
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        Dd::one() / self
    }
    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { self.recip() } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Dd::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
    fn powf(self, n: Self) -> Self {
        (self.ln() * n).exp()
    }
    /// f64 root plus one Newton correction.
    fn sqrt(self) -> Self {
        let h = self.hi();
        if !(h > 0.0) || h.is_infinite() {
            return Dd::f(h.sqrt());
        }
        let s = Dd::f(h.sqrt());
        s + (self - s * s) / (s + s)
    }
    /// Range reduction `x = k ln2 + r`, Horner-form Taylor series on `r / 32`, then
    /// five squarings.
    fn exp(self) -> Self {
        let h = self.hi();
        if h.is_nan() {
            return self;
        }
        if h > 709.0 {
            return Dd::infinity();
        }
        if h < -745.0 {
            return Dd::zero();
        }
        let k = (h / std::f64::consts::LN_2).round();
        let r = (self - Dd::ln2() * Dd::f(k)) * Dd::f(1.0 / 32.0);
        let inv = inverse_factorials();
        let mut sum = inv[TAYLOR_TERMS];
        for c in inv[..TAYLOR_TERMS].iter().rev() {
            sum = sum * r + *c;
        }
        for _ in 0..5 {
            sum = sum * sum;
        }
        let k = k as i32;
        let half = k / 2;
        sum * Dd::f(2f64.powi(half)) * Dd::f(2f64.powi(k - half))
    }
    fn exp_m1(self) -> Self {
        self.exp() - Dd::one()
    }
    /// One Newton step on `exp(y) = x` from the f64 logarithm.
    fn ln(self) -> Self {
        let h = self.hi();
        if !(h > 0.0) || h.is_infinite() {
            return Dd::f(h.ln());
        }
        let y = Dd::f(h.ln());
        y + self * (-y).exp() - Dd::one()
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    /// `sign(x) (1 - e) / (1 + e)` with `e = exp(-2|x|)`.
    fn tanh(self) -> Self {
        let h = self.hi();
        if h == 0.0 || h.is_nan() {
            return self;
        }
        let a = self.abs();
        let e = (-(a + a)).exp();
        let t = (Dd::one() - e) / (Dd::one() + e);
        if h < 0.0 {
            -t
        } else {
            t
        }
    }
    fn max(self, o: Self) -> Self {
        match self.partial_cmp(&o) {
            Some(Ordering::Less) => o,
            None if self.is_nan() => o,
            _ => self,
        }
    }
    fn min(self, o: Self) -> Self {
        match self.partial_cmp(&o) {
            Some(Ordering::Greater) => o,
            None if self.is_nan() => o,
            _ => self,
        }
    }
    fn abs_sub(self, o: Self) -> Self {
        if self > o {
            self - o
        } else {
            Dd::zero()
        }
    }
    fn hypot(self, o: Self) -> Self {
        (self * self + o * o).sqrt()
    }
    fn atan2(self, o: Self) -> Self {
        Dd(Float::atan2(self.0, o.0))
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        Float::integer_decode(self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: Dd) -> f64 {
        x.hi() + x.0.lo()
    }

    fn close(a: Dd, b: Dd, tol: f64) -> bool {
        v(a - b).abs() <= tol * v(b).abs().max(1e-300)
    }

    #[test]
    fn division_and_roots_are_double_double() {
        for (a, b) in [(0.3, 3.0), (1.0, 7.0), (-2.5, 1e-3), (1e-12, 0.9)] {
            let (a, b) = (Dd::f(a), Dd::f(b));
            let q = a / b;
            assert!(close(q * b, a, 1e-30));
        }
        for x in [2.0, 0.3, 1e-20, 123456.789] {
            let s = Dd::f(x).sqrt();
            assert!(close(s * s, Dd::f(x), 1e-30));
        }
        // sqrt(2) to 32 digits.
        let r2 = Dd(TwoFloat::new_add(1.4142135623730951, -9.667293313452913e-17));
        assert!(close(Dd::f(2.0).sqrt(), r2, 1e-31));
    }

    #[test]
    fn transcendentals_are_double_double() {
        // e and ln 2 split into hi/lo with mpmath.
        let e = Dd(TwoFloat::new_add(2.718281828459045, 1.4456468917292502e-16));
        assert!(close(Dd::one().exp(), e, 1e-30));
        assert!(Dd::neg_infinity() < Dd::f(0.3) && Dd::neg_infinity().max(Dd::f(0.3)) == Dd::f(0.3));
        assert!(close(Dd::f(2.0).ln(), Dd::ln2(), 1e-30));
        for x in [0.3, -0.11, 0.0071, 5.5, -20.0, 1e-9] {
            let t = Dd::f(x);
            assert!(close(t.exp() * (-t).exp(), Dd::one(), 1e-29), "{x}");
            assert!(v(t.exp().ln() - t).abs() < 1e-29 * x.abs().max(1.0), "{x}");
            let (ep, em) = (t.exp(), (-t).exp());
            assert!(v(t.tanh() - (ep - em) / (ep + em)).abs() < 1e-30, "{x}");
            assert!((v(t.exp()) - x.exp()).abs() <= 2e-16 * x.exp());
        }
        assert_eq!(v(Dd::f(800.0).exp()), f64::INFINITY);
        assert_eq!(v(Dd::f(-800.0).exp()), 0.0);
        assert!(Dd::f(-1.0).ln().is_nan());
    }

    #[test]
    fn conversions_are_exact() {
        for x in [0.37, -1e-12, 1.0 / 3.0] {
            assert_eq!(Dd::from_f64(x).unwrap().to_f64(), Some(x));
        }
    }
}
