//! The auxiliary profile φ: non-decreasing, C¹, equal to 1 below −2, affine on
//! [−1, 0], equal to 1 + c above 1, and ε-close to chords on the two blends.
//!
//! Each blend has a piecewise-linear derivative (ramp, plateau, ramp), so φ
//! is piecewise quadratic there and its values are exact closed forms.

use crate::error::{Error, Result};

/// C¹ transition on [start, start + 1] with prescribed end slopes and rise.
#[derive(Debug, Clone, PartialEq)]
struct Blend {
    start: f64,
    base: f64,
    /// (local abscissa in [0, 1], derivative value)
    knots: Vec<(f64, f64)>,
}

impl Blend {
    fn new(start: f64, base: f64, rise: f64, s0: f64, s1: f64, w: f64) -> Self {
        let plateau = (rise - 0.5 * (s0 + s1) * w) / (1.0 - w);
        Blend { start, base, knots: vec![(0.0, s0), (w, plateau), (1.0 - w, plateau), (1.0, s1)] }
    }

    fn deriv(&self, s: f64) -> f64 {
        let u = (s - self.start).clamp(0.0, 1.0);
        for pair in self.knots.windows(2) {
            let ((u0, d0), (u1, d1)) = (pair[0], pair[1]);
            if u <= u1 {
                return if u1 > u0 { d0 + (d1 - d0) * (u - u0) / (u1 - u0) } else { d1 };
            }
        }
        self.knots.last().unwrap().1
    }

    fn value(&self, s: f64) -> f64 {
        let u = (s - self.start).clamp(0.0, 1.0);
        let mut acc = self.base;
        for pair in self.knots.windows(2) {
            let ((u0, d0), (u1, d1)) = (pair[0], pair[1]);
            if u <= u0 {
                break;
            }
            let hi = u.min(u1);
            let dh = if u1 > u0 { d0 + (d1 - d0) * (hi - u0) / (u1 - u0) } else { d1 };
            acc += 0.5 * (hi - u0) * (d0 + dh);
        }
        acc
    }

    fn max_slope(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::NEG_INFINITY, f64::max)
    }

    fn min_slope(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min)
    }

    /// Interior knot abscissae (in global coordinates) where φ changes formula.
    fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(move |k| self.start + k.0)
    }
}

/// The profile φ together with its band constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiFunction {
    a: f64,
    b: f64,
    c: f64,
    eps: f64,
    left: Blend,
    right: Blend,
}

/// Largest deviation from the chord and slope statistics of one blend, from a dense scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendReport {
    pub max_band_deviation: f64,
    pub max_slope: f64,
    pub min_slope: f64,
}

impl PhiFunction {
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn value(&self, s: f64) -> f64 {
        if s <= -2.0 {
            1.0
        } else if s < -1.0 {
            self.left.value(s)
        } else if s <= 0.0 {
            1.0 + self.b + s * (self.b - self.a)
        } else if s < 1.0 {
            self.right.value(s)
        } else {
            1.0 + self.c
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        if s <= -2.0 || s >= 1.0 {
            0.0
        } else if s < -1.0 {
            self.left.deriv(s)
        } else if s <= 0.0 {
            self.b - self.a
        } else {
            self.right.deriv(s)
        }
    }

    /// Points where the formula of φ changes, in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.left.breakpoints().chain(self.right.breakpoints()).collect();
        v.sort_by(|p, q| p.total_cmp(q));
        v.dedup();
        v
    }

    /// sup φ' on [−2, −1].
    pub fn left_max_slope(&self) -> f64 {
        self.left.max_slope()
    }

    /// sup φ' on [0, 1]. Continuity of φ' forces this to be at least b − a.
    pub fn right_max_slope(&self) -> f64 {
        self.right.max_slope()
    }

    /// Whether both slope bounds sup φ' ≤ a + ε and ≤ c − b + ε hold.
    pub fn satisfies_slope_bounds(&self) -> bool {
        self.left_max_slope() <= self.a + self.eps && self.right_max_slope() <= self.c - self.b + self.eps
    }

    /// Dense-scan report for the left and right blends.
    pub fn scan(&self, points: usize) -> (BlendReport, BlendReport) {
        let report = |lo: f64, v0: f64, rise: f64| {
            let mut dev: f64 = 0.0;
            let mut smax = f64::NEG_INFINITY;
            let mut smin = f64::INFINITY;
            for k in 0..=points {
                let u = k as f64 / points as f64;
                let s = lo + u;
                dev = dev.max((self.value(s) - (v0 + rise * u)).abs());
                let d = self.deriv(s);
                smax = smax.max(d);
                smin = smin.min(d);
            }
            BlendReport { max_band_deviation: dev, max_slope: smax, min_slope: smin }
        };
        (report(-2.0, 1.0, self.a), report(0.0, 1.0 + self.b, self.c - self.b))
    }
}

/// Builds φ for band constants 0 ≤ c − b ≤ b − a ≤ a and slack ε ∈ (0, 1].
///
/// The left blend runs from slope 0 to slope b − a with rise a, the right
/// blend from slope b − a to 0 with rise c − b. Ramp widths start from a
/// first-order estimate and are halved until the band and monotonicity
/// checks pass on a 10⁴-point scan.
pub fn build_phi(a: f64, b: f64, c: f64, eps: f64) -> Result<PhiFunction> {
    let (ba, cb) = (b - a, c - b);
    if !(a > 0.0) || !(ba >= 0.0) || !(cb > 0.0) || cb > ba + 1e-15 || ba > a + 1e-15 {
        return Err(Error::PhiConstruction(format!(
            "need 0 < c−b ≤ b−a ≤ a, got a={a}, b−a={ba}, c−b={cb}"
        )));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::PhiConstruction(format!("slack must lie in (0, 1], got {eps}")));
    }
    let initial = |rise: f64, s0: f64, s1: f64| {
        let gap = (rise - 0.5 * (s0 + s1)).abs() + s0.max(s1) + rise;
        (0.25f64).min(0.5 * eps / (eps + gap))
    };
    let mut wl = initial(a, 0.0, ba);
    let mut wr = initial(cb, ba, 0.0);
    for _ in 0..60 {
        let phi = PhiFunction {
            a,
            b,
            c,
            eps,
            left: Blend::new(-2.0, 1.0, a, 0.0, ba, wl),
            right: Blend::new(0.0, 1.0 + b, cb, ba, 0.0, wr),
        };
        let (l, r) = phi.scan(10_000);
        let left_ok = l.max_band_deviation <= eps && phi.left.min_slope() >= 0.0 && l.max_slope <= a + eps;
        // the right slope bound can only fail at the junction with the affine branch
        let right_cap = (cb + eps).max(ba);
        let right_ok = r.max_band_deviation <= eps && phi.right.min_slope() >= 0.0 && phi.right.max_slope() <= right_cap;
        if left_ok && right_ok {
            return Ok(phi);
        }
        if !left_ok {
            wl *= 0.5;
        }
        if !right_ok {
            wr *= 0.5;
        }
    }
    Err(Error::PhiConstruction("band constraints could not be met".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn examples() -> Vec<(f64, f64, f64, f64)> {
        vec![
            (1.0, 17.0 / 16.0, 17.0 / 16.0 + 1.0 / 24.0, 1.0 / 640.0),
            (1.0, 4.0 / 3.0, 4.0 / 3.0 + 1.0 / 60.0, 1.0 / 60.0),
            (0.5, 0.7, 0.8, 0.05),
            (0.3, 0.4, 0.5, 1.0),
        ]
    }

    #[test]
    fn exact_branches() {
        for (a, b, c, e) in examples() {
            let phi = build_phi(a, b, c, e).unwrap();
            assert_eq!(phi.value(-2.0), 1.0);
            assert_eq!(phi.value(-7.0), 1.0);
            assert_eq!(phi.value(0.0), 1.0 + b);
            assert_eq!(phi.value(1.0), 1.0 + c);
            assert_eq!(phi.value(-0.5), 1.0 + b - 0.5 * (b - a));
            assert!((phi.value(-1.0 - 1e-12) - (1.0 + a)).abs() < 1e-9);
            assert!((phi.value(1.0 - 1e-12) - (1.0 + c)).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_c1_and_in_band() {
        for (a, b, c, e) in examples() {
            let phi = build_phi(a, b, c, e).unwrap();
            let n = 10_000;
            let mut prev = phi.value(-3.0);
            for k in 0..=n {
                let s = -3.0 + 5.0 * k as f64 / n as f64;
                let v = phi.value(s);
                assert!(v >= prev - 1e-15);
                prev = v;
            }
            let (l, r) = phi.scan(n);
            assert!(l.max_band_deviation <= e);
            assert!(r.max_band_deviation <= e);
            assert!(l.max_slope <= a + e);
            // derivative continuity at every junction
            for &s in &[-2.0, -1.0, 0.0, 1.0] {
                let h = 1e-13;
                assert!((phi.deriv(s - h) - phi.deriv(s + h)).abs() < 1e-6, "jump at {s}");
            }
            // value continuity
            for &s in &[-2.0, -1.0, 0.0, 1.0] {
                assert!((phi.value(s - 1e-12) - phi.value(s + 1e-12)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn derivative_matches_value_differences() {
        let phi = build_phi(0.5, 0.7, 0.8, 0.05).unwrap();
        for k in 1..300 {
            let s = -2.5 + 4.0 * k as f64 / 300.0;
            let h = 1e-7;
            let fd = (phi.value(s + h) - phi.value(s - h)) / (2.0 * h);
            assert!((fd - phi.deriv(s)).abs() < 1e-5, "s={s}");
        }
    }

    #[test]
    fn right_slope_bound_reflects_junction() {
        // b − a = 1/16 exceeds c − b + ε = 1/24 + 1/640, so the bound is unattainable for a C¹ φ
        let phi = build_phi(1.0, 17.0 / 16.0, 17.0 / 16.0 + 1.0 / 24.0, 1.0 / 640.0).unwrap();
        assert!(!phi.satisfies_slope_bounds());
        assert!((phi.right_max_slope() - 1.0 / 16.0).abs() < 1e-15);
        let ok = build_phi(0.3, 0.4, 0.5, 1.0).unwrap();
        assert!(ok.satisfies_slope_bounds());
    }

    #[test]
    fn rejects_bad_ordering() {
        assert!(build_phi(1.0, 1.1, 1.5, 0.1).is_err());
        assert!(build_phi(1.0, 1.1, 1.1, 0.1).is_err());
        assert!(build_phi(1.0, 1.1, 1.15, 0.0).is_err());
    }
}
