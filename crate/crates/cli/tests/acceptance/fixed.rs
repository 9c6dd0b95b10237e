//! Binary fixed-point reals with 256 fractional bits. Conversions from f64
//! are exact, so every error below comes from the code under test.

use num_bigint::BigInt;
use num_traits::{Float, Signed, Zero};

const FRAC: u32 = 256;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fx(BigInt);

impl Fx {
    pub fn zero() -> Self {
        Fx(BigInt::zero())
    }

    pub fn int(v: u64) -> Self {
        Fx(BigInt::from(v) << FRAC)
    }

    pub fn of(x: f64) -> Self {
        assert!(x.is_finite());
        let (mantissa, exp, sign) = Float::integer_decode(x);
        let shift = i64::from(exp) + i64::from(FRAC);
        let mag = BigInt::from(mantissa);
        let mag = if shift >= 0 { mag << shift as u32 } else { mag >> (-shift) as u32 };
        Fx(if sign < 0 { -mag } else { mag })
    }

    pub fn add(&self, o: &Fx) -> Fx {
        Fx(&self.0 + &o.0)
    }

    pub fn sub(&self, o: &Fx) -> Fx {
        Fx(&self.0 - &o.0)
    }

    pub fn mul(&self, o: &Fx) -> Fx {
        Fx((&self.0 * &o.0) >> FRAC)
    }

    pub fn div(&self, o: &Fx) -> Fx {
        Fx((&self.0 << FRAC) / &o.0)
    }

    pub fn sqrt(&self) -> Fx {
        assert!(!self.0.is_negative());
        Fx((&self.0 << FRAC).sqrt())
    }

    pub fn max0(self) -> Fx {
        if self.0.is_negative() {
            Fx::zero()
        } else {
            self
        }
    }

    /// 2 * (x + x^3/3 + x^5/5 + ...), for |x| well below 1.
    fn two_atanh(x: &Fx) -> Fx {
        let x2 = x.mul(x);
        let mut pow = x.clone();
        let mut sum = Fx::zero();
        let mut k = 1u64;
        loop {
            let term = Fx(&pow.0 / BigInt::from(k));
            if term.0.is_zero() {
                break;
            }
            sum = sum.add(&term);
            pow = pow.mul(&x2);
            k += 2;
        }
        sum.add(&sum)
    }

    /// Natural log of a positive integer: n = 2^k * m with m in [1, 2).
    pub fn ln_int(n: u64) -> Fx {
        assert!(n > 0);
        let k = 63 - n.leading_zeros();
        let m = Fx((BigInt::from(n) << FRAC) >> k);
        let one = Fx::int(1);
        let ln_m = Fx::two_atanh(&m.sub(&one).div(&m.add(&one)));
        let ln2 = Fx::two_atanh(&Fx::int(1).div(&Fx::int(3)));
        ln_m.add(&Fx(&ln2.0 * BigInt::from(k)))
    }

    /// Whether `got` is within relative error `tol` of `self`; an exact zero
    /// must be matched exactly.
    pub fn close(&self, got: f64, tol_inverse: u64) -> bool {
        if !got.is_finite() {
            return false;
        }
        let err = (&Fx::of(got).0 - &self.0).abs();
        if self.0.is_zero() {
            return err.is_zero();
        }
        err * BigInt::from(tol_inverse) <= self.0.abs()
    }
}
