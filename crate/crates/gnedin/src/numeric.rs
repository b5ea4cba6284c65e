//! Dual numeric representations: exact big rationals for small-instance
//! equality checks, signed log-domain doubles for large-scale evaluation.

use crate::error::{Error, Result};
use num::bigint::{BigInt, Sign};
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use std::f64::consts::LN_2;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Which arithmetic backend an operation should use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Arbitrary-precision rationals; results are exact.
    Exact,
    /// Sign plus natural log of the magnitude in `f64`.
    Log,
}

/// A real number stored as a sign and the log of its absolute value.
/// `sign == 0` encodes exact zero; `log_abs` is then negative infinity so
/// that a naive `exp` still produces `0.0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    pub sign: i8,
    pub log_abs: f64,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// ln(1 - e^d) for d < 0, stable near both ends.
fn ln_one_minus_exp(d: f64) -> f64 {
    debug_assert!(d < 0.0);
    if d > -LN_2 {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}

impl SignedLog {
    pub fn zero() -> Self {
        SignedLog {
            sign: 0,
            log_abs: f64::NEG_INFINITY,
        }
    }

    pub fn one() -> Self {
        SignedLog {
            sign: 1,
            log_abs: 0.0,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::zero()
        } else {
            SignedLog {
                sign: if x > 0.0 { 1 } else { -1 },
                log_abs: x.abs().ln(),
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(&self) -> f64 {
        f64::from(self.sign) * self.log_abs.exp()
    }

}

impl Mul for SignedLog {
    type Output = SignedLog;
    fn mul(self, o: SignedLog) -> SignedLog {
        if self.sign == 0 || o.sign == 0 {
            return SignedLog::zero();
        }
        SignedLog {
            sign: self.sign * o.sign,
            log_abs: self.log_abs + o.log_abs,
        }
    }
}

impl Div for SignedLog {
    type Output = SignedLog;
    fn div(self, o: SignedLog) -> SignedLog {
        assert!(o.sign != 0, "log-domain division by zero");
        if self.sign == 0 {
            return SignedLog::zero();
        }
        SignedLog {
            sign: self.sign * o.sign,
            log_abs: self.log_abs - o.log_abs,
        }
    }
}

impl Add for SignedLog {
    type Output = SignedLog;
    fn add(self, o: SignedLog) -> SignedLog {
        if self.sign == 0 {
            return o;
        }
        if o.sign == 0 {
            return self;
        }
        if self.sign == o.sign {
            return SignedLog {
                sign: self.sign,
                log_abs: log_add_exp(self.log_abs, o.log_abs),
            };
        }
        if self.log_abs == o.log_abs {
            return SignedLog::zero();
        }
        let (big, small) = if self.log_abs > o.log_abs {
            (self, o)
        } else {
            (o, self)
        };
        SignedLog {
            sign: big.sign,
            log_abs: big.log_abs + ln_one_minus_exp(small.log_abs - big.log_abs),
        }
    }
}

impl Sub for SignedLog {
    type Output = SignedLog;
    fn sub(self, o: SignedLog) -> SignedLog {
        self + (-o)
    }
}

impl Neg for SignedLog {
    type Output = SignedLog;
    fn neg(self) -> SignedLog {
        SignedLog {
            sign: -self.sign,
            log_abs: self.log_abs,
        }
    }
}

/// A number in one of the two backends. Arithmetic between mixed backends is
/// a programming error and panics.
#[derive(Clone, Debug)]
pub enum Value {
    Exact(BigRational),
    Log(SignedLog),
}

impl Value {
    pub fn mode(&self) -> Mode {
        match self {
            Value::Exact(_) => Mode::Exact,
            Value::Log(_) => Mode::Log,
        }
    }

    pub fn zero(mode: Mode) -> Value {
        match mode {
            Mode::Exact => Value::Exact(BigRational::zero()),
            Mode::Log => Value::Log(SignedLog::zero()),
        }
    }

    pub fn one(mode: Mode) -> Value {
        match mode {
            Mode::Exact => Value::Exact(BigRational::one()),
            Mode::Log => Value::Log(SignedLog::one()),
        }
    }

    pub fn from_int(i: i64, mode: Mode) -> Value {
        match mode {
            Mode::Exact => Value::Exact(BigRational::from_integer(BigInt::from(i))),
            Mode::Log => Value::Log(SignedLog::from_f64(i as f64)),
        }
    }

    pub fn from_usize(u: usize, mode: Mode) -> Value {
        match mode {
            Mode::Exact => Value::Exact(BigRational::from_integer(BigInt::from(u))),
            Mode::Log => Value::Log(SignedLog::from_f64(u as f64)),
        }
    }

    pub fn from_ratio(num: i64, den: i64, mode: Mode) -> Value {
        assert!(den != 0);
        match mode {
            Mode::Exact => Value::Exact(BigRational::new(BigInt::from(num), BigInt::from(den))),
            Mode::Log => Value::Log(SignedLog::from_f64(num as f64 / den as f64)),
        }
    }

    pub fn from_rational(r: &BigRational, mode: Mode) -> Value {
        match mode {
            Mode::Exact => Value::Exact(r.clone()),
            Mode::Log => Value::Log(rational_to_signed_log(r)),
        }
    }

    pub fn from_bigint(i: &BigInt, mode: Mode) -> Value {
        match mode {
            Mode::Exact => Value::Exact(BigRational::from_integer(i.clone())),
            Mode::Log => Value::Log(rational_to_signed_log(&BigRational::from_integer(i.clone()))),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Exact(r) => r.is_zero(),
            Value::Log(s) => s.is_zero(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => rational_to_f64(r),
            Value::Log(s) => s.to_f64(),
        }
    }

    /// The value as a signed-log pair, converting exactly-represented
    /// rationals through their big-integer parts.
    pub fn signed_log(&self) -> SignedLog {
        match self {
            Value::Exact(r) => rational_to_signed_log(r),
            Value::Log(s) => *s,
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Value::Exact(r) => Some(r),
            Value::Log(_) => None,
        }
    }

    pub fn expect_rational(&self) -> &BigRational {
        self.as_rational()
            .expect("operation requires the exact backend")
    }

    pub fn recip(&self) -> Value {
        match self {
            Value::Exact(r) => Value::Exact(r.recip()),
            Value::Log(s) => Value::Log(SignedLog::one() / *s),
        }
    }

    pub fn abs(&self) -> Value {
        match self {
            Value::Exact(r) => Value::Exact(r.abs()),
            Value::Log(s) => Value::Log(SignedLog {
                sign: s.sign.abs(),
                log_abs: s.log_abs,
            }),
        }
    }

    /// |a - b| / max(|a|, |b|, 1e-300) in double precision.
    pub fn rel_diff(&self, other: &Value) -> f64 {
        let a = self.to_f64();
        let b = other.to_f64();
        let scale = a.abs().max(b.abs()).max(1e-300);
        (a - b).abs() / scale
    }
}

macro_rules! value_binop {
    ($trait:ident, $method:ident, $exact:expr, $log:expr) => {
        impl $trait for &Value {
            type Output = Value;
            fn $method(self, rhs: &Value) -> Value {
                match (self, rhs) {
                    (Value::Exact(a), Value::Exact(b)) => {
                        Value::Exact($exact(a, b))
                    }
                    (Value::Log(a), Value::Log(b)) => Value::Log($log(*a, *b)),
                    _ => panic!("mixed numeric backends in one expression"),
                }
            }
        }
        impl $trait for Value {
            type Output = Value;
            fn $method(self, rhs: Value) -> Value {
                (&self).$method(&rhs)
            }
        }
    };
}

value_binop!(Add, add, |a: &BigRational, b: &BigRational| a + b, |a: SignedLog, b: SignedLog| a + b);
value_binop!(Sub, sub, |a: &BigRational, b: &BigRational| a - b, |a: SignedLog, b: SignedLog| a - b);
value_binop!(Mul, mul, |a: &BigRational, b: &BigRational| a * b, |a: SignedLog, b: SignedLog| a * b);
value_binop!(Div, div, |a: &BigRational, b: &BigRational| a / b, |a: SignedLog, b: SignedLog| a / b);

impl Neg for &Value {
    type Output = Value;
    fn neg(self) -> Value {
        match self {
            Value::Exact(r) => Value::Exact(-r),
            Value::Log(s) => Value::Log(-*s),
        }
    }
}

impl Neg for Value {
    type Output = Value;
    fn neg(self) -> Value {
        -&self
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => a == b,
            (Value::Log(a), Value::Log(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(r) => write!(f, "{r}"),
            Value::Log(s) => write!(f, "{}", s.to_f64()),
        }
    }
}

/// ln |x| for a big integer, good to double precision even far outside the
/// `f64` range. Returns `-inf` for zero.
pub fn ln_abs_bigint(x: &BigInt) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let mag = x.magnitude();
    let bits = mag.bits();
    if bits <= 63 {
        (mag.to_u64().unwrap() as f64).ln()
    } else {
        let shift = bits - 63;
        let top = (mag >> shift).to_u64().unwrap();
        (top as f64).ln() + shift as f64 * LN_2
    }
}

pub fn rational_to_signed_log(r: &BigRational) -> SignedLog {
    if r.is_zero() {
        return SignedLog::zero();
    }
    let sign = match r.numer().sign() {
        Sign::Plus => 1,
        Sign::Minus => -1,
        Sign::NoSign => 0,
    };
    SignedLog {
        sign,
        log_abs: ln_abs_bigint(r.numer()) - ln_abs_bigint(r.denom()),
    }
}

/// Lossy conversion to `f64`, falling back to the log route when the plain
/// numerator/denominator conversion over- or underflows.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(x) = r.to_f64() {
        if x.is_finite() && !(x == 0.0 && !r.is_zero()) {
            return x;
        }
    }
    rational_to_signed_log(r).to_f64()
}

/// Parses a plain decimal string ("0.3", "-12", "1.25") into the exact
/// rational it denotes. This keeps user-supplied parameters exact instead of
/// inheriting binary rounding from `f64`.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let bad = || Error::InvalidArgument(format!("not a decimal number: {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    let (sign, digits) = match t.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let joined = format!("{int_part}{frac_part}");
    let numer: BigInt = joined.parse().map_err(|_| bad())?;
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(BigRational::new(BigInt::from(sign) * numer, denom))
}
