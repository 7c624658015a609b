//! Smoothed sawtooth shear profile.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

/// The 2π-periodic sawtooth with parabolic caps of width `epsilon` at ±π/2.
///
/// Linear with slope one on `[0, π/2 − ε]`, odd about zero and even about π/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SawtoothProfile {
    epsilon: f64,
}

/// Reduce `x` to `[0, π/2]`, returning the folded point and the overall sign
/// and slope orientation picked up by the symmetries.
#[inline]
fn fold(x: f64) -> (f64, f64, f64) {
    let mut z = x.rem_euclid(TAU);
    if z >= PI {
        z -= TAU;
    }
    let (mut z, sign) = if z < 0.0 { (-z, -1.0) } else { (z, 1.0) };
    // slope orientation flips on the descending half
    let mut orient = 1.0;
    if z > FRAC_PI_2 {
        z = PI - z;
        orient = -1.0;
    }
    (z, sign, orient)
}

impl SawtoothProfile {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < FRAC_PI_2) {
            return Err(Error::Config(format!(
                "sawtooth width must lie in (0, pi/2), got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// S_ε(x).
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let (z, sign, _) = fold(x);
        let e = self.epsilon;
        let edge = FRAC_PI_2 - e;
        let v = if z <= edge {
            z
        } else {
            let d = z - edge;
            z - d * d / (2.0 * e)
        };
        sign * v
    }

    /// S_ε′(x).
    #[inline]
    pub fn eval_d1(&self, x: f64) -> f64 {
        let (z, _, orient) = fold(x);
        let e = self.epsilon;
        let edge = FRAC_PI_2 - e;
        // the odd reflection keeps the derivative even, so only `orient` matters
        let v = if z <= edge { 1.0 } else { 1.0 - (z - edge) / e };
        orient * v
    }

    /// The a.e. second derivative; left limits at the kinks.
    #[inline]
    pub fn eval_d2(&self, x: f64) -> f64 {
        let (z, sign, _) = fold(x);
        let edge = FRAC_PI_2 - self.epsilon;
        if z <= edge {
            0.0
        } else {
            -sign / self.epsilon
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let p = SawtoothProfile::new(0.1).unwrap();
        assert_eq!(p.eval(0.0), 0.0);
        assert!((p.eval(FRAC_PI_2) - (FRAC_PI_2 - 0.05)).abs() < 1e-15);
        assert_eq!(p.eval(1.0), 1.0);
        assert!((p.eval(PI - 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(p.eval_d1(0.5), 1.0);
        assert!(p.eval_d1(FRAC_PI_2).abs() < 1e-15);
        assert_eq!(p.eval_d2(0.5), 0.0);
        assert!((p.eval_d2(FRAC_PI_2 - 0.05) + 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_width() {
        assert!(SawtoothProfile::new(0.0).is_err());
        assert!(SawtoothProfile::new(FRAC_PI_2).is_err());
        assert!(SawtoothProfile::new(-1.0).is_err());
    }

    #[test]
    fn derivative_matches_central_difference() {
        let p = SawtoothProfile::new(0.1).unwrap();
        let h = 1e-4;
        for i in 0..10 {
            let x = -3.0 + 0.61 * i as f64 + 0.0137;
            let fd = (p.eval(x + h) - p.eval(x - h)) / (2.0 * h);
            assert!((fd - p.eval_d1(x)).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn second_derivative_matches_difference_of_first() {
        let p = SawtoothProfile::new(0.3).unwrap();
        let h = 1e-6;
        for &x in &[1.4, 1.7, -1.45, 2.0, 4.6, -4.7] {
            let fd = (p.eval_d1(x + h) - p.eval_d1(x - h)) / (2.0 * h);
            assert!(
                (fd - p.eval_d2(x)).abs() < 1e-6,
                "x={x}: {fd} vs {}",
                p.eval_d2(x)
            );
        }
    }

    #[test]
    fn dense_grid_bounds() {
        let p = SawtoothProfile::new(0.2).unwrap();
        let n = 100_000;
        let mut bad = 0usize;
        for i in 0..n {
            let x = TAU * i as f64 / n as f64;
            assert!(p.eval(x).abs() <= FRAC_PI_2);
            assert!(p.eval_d1(x).abs() <= 1.0);
            assert!(p.eval_d2(x).abs() <= 1.0 / 0.2 + 1e-12);
            if p.eval_d1(x).abs() < 1.0 {
                bad += 1;
            }
        }
        let measure = TAU * bad as f64 / n as f64;
        assert!(measure <= 4.0 * 0.2 + 1e-3, "measure {measure}");
    }

    #[test]
    fn continuity_at_cap_edge() {
        let p = SawtoothProfile::new(0.1).unwrap();
        let a = FRAC_PI_2 - 0.1;
        let d = 1e-8;
        assert!((p.eval(a + d) - p.eval(a - d)).abs() < 1e-7);
    }
}
