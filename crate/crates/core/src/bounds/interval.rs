use std::fmt;

use crate::expr::OpKind;

/// A closed interval `[lo, hi]`; infinite endpoints allowed. The empty set
/// is [`Interval::EMPTY`] (`lo > hi`).
///
/// Arithmetic results are widened outward by one ulp so that rounding never
/// makes an enclosure too narrow.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            f.write_str("[empty]")
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

fn widen(lo: f64, hi: f64) -> Interval {
    if lo.is_nan() || hi.is_nan() {
        return Interval::ENTIRE;
    }
    Interval {
        lo: if lo.is_finite() { lo.next_down() } else { lo },
        hi: if hi.is_finite() { hi.next_up() } else { hi },
    }
}

/// Product for enclosure purposes: `0 * inf` is 0.
fn mul_ext(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

fn min_max(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Interval {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            Interval::EMPTY
        } else {
            Interval { lo, hi }
        }
    }

    pub fn point(v: f64) -> Interval {
        Interval::new(v, v)
    }

    /// `[-r, r]`.
    pub fn symmetric(r: f64) -> Interval {
        Interval::new(-r, r)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.is_empty() || (self.lo <= other.lo && other.hi <= self.hi)
    }

    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn midpoint(&self) -> f64 {
        if self.lo.is_finite() && self.hi.is_finite() {
            self.lo + 0.5 * (self.hi - self.lo)
        } else {
            0.0
        }
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            *other
        } else if other.is_empty() {
            *self
        } else {
            Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
        }
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Intersection with `[-bound, bound]`.
    pub fn clip(&self, bound: f64) -> Interval {
        self.intersect(&Interval::symmetric(bound))
    }

    pub fn split(&self) -> (Interval, Interval) {
        let m = self.midpoint();
        (Interval::new(self.lo, m), Interval::new(m, self.hi))
    }

    pub fn add(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        widen(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        widen(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        let (lo, hi) = min_max([
            mul_ext(self.lo, o.lo),
            mul_ext(self.lo, o.hi),
            mul_ext(self.hi, o.lo),
            mul_ext(self.hi, o.hi),
        ]);
        widen(lo, hi)
    }

    /// Division; a divisor straddling zero contributes both unbounded
    /// branches, a divisor that is exactly zero gives the empty set.
    pub fn div(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() || (o.lo == 0.0 && o.hi == 0.0) {
            return Interval::EMPTY;
        }
        let recip = if o.lo > 0.0 || o.hi < 0.0 {
            Interval::new(1.0 / o.hi, 1.0 / o.lo)
        } else if o.lo == 0.0 {
            Interval::new(1.0 / o.hi, f64::INFINITY)
        } else if o.hi == 0.0 {
            Interval::new(f64::NEG_INFINITY, 1.0 / o.lo)
        } else {
            Interval::ENTIRE
        };
        let recip = widen(recip.lo, recip.hi);
        self.mul(&recip)
    }

    /// Square root of the nonnegative part.
    pub fn sqrt(&self) -> Interval {
        if self.is_empty() || self.hi < 0.0 {
            return Interval::EMPTY;
        }
        let lo = self.lo.max(0.0).sqrt();
        let w = widen(lo, self.hi.sqrt());
        Interval::new(w.lo.max(0.0), w.hi)
    }

    pub fn cbrt(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        widen(self.lo.cbrt(), self.hi.cbrt())
    }

    /// `a^b` over the real-defined part: nonnegative bases with any
    /// exponent, negative bases with integral exponents.
    pub fn pow(&self, b: &Interval) -> Interval {
        if self.is_empty() || b.is_empty() {
            return Interval::EMPTY;
        }
        let mut out = Interval::EMPTY;
        let nonneg = self.intersect(&Interval::new(0.0, f64::INFINITY));
        if !nonneg.is_empty() {
            out = pow_nonneg(&nonneg, b);
        }
        let has_integer = b.lo.is_finite() && b.lo.ceil() <= b.hi
            || b.lo.is_infinite() && !b.is_empty();
        if self.lo < 0.0 && has_integer {
            let magnitude = Interval::new((-self.hi).max(0.0), -self.lo);
            let m = pow_nonneg(&magnitude, b).hi;
            out = out.hull(&Interval::symmetric(m));
        }
        if out.is_empty() {
            return out;
        }
        widen(out.lo, out.hi)
    }

    pub fn apply1(&self, op: OpKind) -> Interval {
        match op {
            OpKind::Sqrt => self.sqrt(),
            OpKind::Cbrt => self.cbrt(),
            _ => Interval::ENTIRE,
        }
    }

    pub fn apply2(&self, op: OpKind, o: &Interval) -> Interval {
        match op {
            OpKind::Add => self.add(o),
            OpKind::Sub => self.sub(o),
            OpKind::Mul => self.mul(o),
            OpKind::Div => self.div(o),
            OpKind::Pow => self.pow(o),
            _ => Interval::ENTIRE,
        }
    }
}

/// `a^b` for `a >= 0`. Splitting at `a = 1` and `b = 0` leaves boxes on which
/// the power is monotone in each argument, so corners bound it.
fn pow_nonneg(a: &Interval, b: &Interval) -> Interval {
    let a_parts = split_at(a, 1.0);
    let b_parts = split_at(b, 0.0);
    let mut out = Interval::EMPTY;
    for ap in a_parts.iter().filter(|i| !i.is_empty()) {
        for bp in b_parts.iter().filter(|i| !i.is_empty()) {
            let corners = [
                pow_corner(ap.lo, bp.lo),
                pow_corner(ap.lo, bp.hi),
                pow_corner(ap.hi, bp.lo),
                pow_corner(ap.hi, bp.hi),
            ];
            let (lo, hi) = min_max(corners);
            out = out.hull(&Interval::new(lo, hi));
        }
    }
    out
}

fn pow_corner(a: f64, b: f64) -> f64 {
    if a == 0.0 && b < 0.0 {
        f64::INFINITY
    } else if a == 0.0 {
        0.0
    } else {
        let v = a.powf(b);
        if v.is_nan() {
            1.0
        } else {
            v
        }
    }
}

fn split_at(i: &Interval, at: f64) -> [Interval; 2] {
    if i.lo < at && at < i.hi {
        [Interval::new(i.lo, at), Interval::new(at, i.hi)]
    } else {
        [*i, Interval::EMPTY]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    #[test]
    fn multiplication_example() {
        let r = iv(-1.0, 2.0).mul(&iv(3.0, 4.0));
        assert!(r.contains_interval(&iv(-4.0, 8.0)));
        assert!(iv(-4.0 - 1e-12, 8.0 + 1e-12).contains_interval(&r));
    }

    #[test]
    fn domains() {
        assert!(iv(-4.0, -1.0).sqrt().is_empty());
        let s = iv(-3.0, 4.0).sqrt();
        assert!(s.contains(0.0) && s.contains(2.0) && s.lo >= 0.0);
        assert!(iv(1.0, 2.0).div(&iv(0.0, 0.0)).is_empty());
        let d = iv(1.0, 2.0).div(&iv(-1.0, 1.0));
        assert_eq!(d, Interval::ENTIRE);
        let d = iv(1.0, 2.0).div(&iv(0.0, 2.0));
        assert!(d.contains(0.5) && d.hi.is_infinite());
        assert!(iv(-3.0, -2.0).pow(&iv(0.5, 0.6)).is_empty());
        assert!(iv(-3.0, -2.0).pow(&iv(2.0, 2.0)).contains(9.0));
        assert!(iv(-3.0, -2.0).pow(&iv(3.0, 3.0)).contains(-27.0));
    }

    #[test]
    fn empty_propagates() {
        let e = Interval::EMPTY;
        assert!(e.add(&iv(0.0, 1.0)).is_empty());
        assert!(iv(0.0, 1.0).mul(&e).is_empty());
        assert!(e.cbrt().is_empty());
        assert_eq!(e.hull(&iv(1.0, 2.0)), iv(1.0, 2.0));
        assert!(iv(0.0, 1.0).clip(-1.0).is_empty());
    }

    fn arb_interval() -> impl Strategy<Value = Interval> {
        (-50.0f64..50.0, 0.0f64..20.0).prop_map(|(lo, w)| iv(lo, lo + w))
    }

    fn sample(i: &Interval, t: f64) -> f64 {
        (i.lo + t * (i.hi - i.lo)).clamp(i.lo, i.hi)
    }

    proptest! {
        #[test]
        fn binary_ops_enclose_samples(a in arb_interval(), b in arb_interval(), s in 0.0f64..=1.0, t in 0.0f64..=1.0) {
            let (x, y) = (sample(&a, s), sample(&b, t));
            for op in [OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div, OpKind::Pow] {
                if let Some(v) = op.apply2(x, y) {
                    if v.is_finite() {
                        prop_assert!(a.apply2(op, &b).contains(v), "{op} {a:?} {b:?} at {x},{y} -> {v}");
                    }
                }
            }
            for op in [OpKind::Sqrt, OpKind::Cbrt] {
                if let Some(v) = op.apply1(x) {
                    prop_assert!(a.apply1(op).contains(v));
                }
            }
        }

        #[test]
        fn narrower_inputs_never_widen(a in arb_interval(), b in arb_interval(), s in 0.0f64..=1.0) {
            let inner = iv(a.lo, sample(&a, s));
            for op in [OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div] {
                prop_assert!(a.apply2(op, &b).contains_interval(&inner.apply2(op, &b)));
            }
            for op in [OpKind::Sqrt, OpKind::Cbrt] {
                prop_assert!(a.apply1(op).contains_interval(&inner.apply1(op)));
            }
        }
    }
}
