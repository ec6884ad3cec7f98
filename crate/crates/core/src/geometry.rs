//! Angle arithmetic and sensor/target relations.
//!
//! All angles are in degrees and normalized into the half-open interval
//! (-180, 180]. Orientation grows with the `Right` primitive action.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position and orientation of a sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    delta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, delta: f64) -> Result<Self> {
        Ok(Self {
            x,
            y,
            delta: normalize_angle(delta)?,
        })
    }

    /// Orientation in (-180, 180].
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn set_delta(&mut self, delta: f64) -> Result<()> {
        self.delta = normalize_angle(delta)?;
        Ok(())
    }

    pub fn rotate(&mut self, by: f64) -> Result<()> {
        self.set_delta(self.delta + by)
    }
}

/// Distance and relative bearing of a target as seen from a sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarRelation {
    pub rho: f64,
    pub alpha: f64,
}

/// Maps `angle` onto its representative in (-180, 180].
pub fn normalize_angle(angle: f64) -> Result<f64> {
    if !angle.is_finite() {
        return Err(Error::invalid(format!("non-finite angle {angle}")));
    }
    let r = angle.rem_euclid(360.0);
    Ok(if r > 180.0 { r - 360.0 } else { r })
}

/// Signed shortest rotation taking `from` onto `to`.
pub fn angle_diff(to: f64, from: f64) -> f64 {
    let r = (to - from).rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Absolute bearing of `(dx, dy)` in degrees.
pub fn bearing(dx: f64, dy: f64) -> f64 {
    dy.atan2(dx).to_degrees()
}

/// Polar coordinates of `target` in the frame of `sensor`.
///
/// A target sitting exactly on the sensor gets `alpha = 0`.
pub fn relative_polar(sensor: &Pose, target: (f64, f64)) -> Result<PolarRelation> {
    let (tx, ty) = target;
    if !(tx.is_finite() && ty.is_finite() && sensor.x.is_finite() && sensor.y.is_finite()) {
        return Err(Error::invalid("non-finite coordinates"));
    }
    let dx = tx - sensor.x;
    let dy = ty - sensor.y;
    let rho = dx.hypot(dy);
    if rho == 0.0 {
        return Ok(PolarRelation { rho, alpha: 0.0 });
    }
    let alpha = normalize_angle(bearing(dx, dy) - sensor.delta)?;
    Ok(PolarRelation { rho, alpha })
}

/// Strict wedge membership: `rho < rho_max` and `|alpha| < alpha_max`.
pub fn is_covered(rel: &PolarRelation, rho_max: f64, alpha_max: f64) -> bool {
    rel.rho < rho_max && rel.alpha.abs() < alpha_max
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_angle(0.0).unwrap(), 0.0);
        assert_eq!(normalize_angle(540.0).unwrap(), 180.0);
        assert_eq!(normalize_angle(-190.0).unwrap(), 170.0);
        assert_eq!(normalize_angle(-180.0).unwrap(), 180.0);
        assert_eq!(normalize_angle(180.0).unwrap(), 180.0);
    }

    #[test]
    fn normalize_rejects_non_finite() {
        assert!(matches!(normalize_angle(f64::NAN), Err(Error::InvalidArgument(_))));
        assert!(normalize_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn polar_examples() {
        let s = Pose::new(0.0, 0.0, 0.0).unwrap();
        let r = relative_polar(&s, (50.0, 0.0)).unwrap();
        assert_eq!((r.rho, r.alpha), (50.0, 0.0));

        let s = Pose::new(0.0, 0.0, 90.0).unwrap();
        let r = relative_polar(&s, (0.0, 100.0)).unwrap();
        assert_eq!(r.rho, 100.0);
        assert!(r.alpha.abs() < 1e-12);

        let s = Pose::new(0.0, 0.0, 0.0).unwrap();
        let r = relative_polar(&s, (0.0, -30.0)).unwrap();
        assert_eq!(r.rho, 30.0);
        assert!((r.alpha + 90.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_target() {
        let s = Pose::new(3.0, 4.0, 77.0).unwrap();
        let r = relative_polar(&s, (3.0, 4.0)).unwrap();
        assert_eq!((r.rho, r.alpha), (0.0, 0.0));
        assert!(is_covered(&r, 1.0, 45.0));
    }

    #[test]
    fn coverage_examples() {
        let rel = |rho, alpha| PolarRelation { rho, alpha };
        assert!(is_covered(&rel(50.0, 0.0), 100.0, 45.0));
        assert!(!is_covered(&rel(200.0, 0.0), 100.0, 45.0));
        assert!(!is_covered(&rel(50.0, 45.0), 100.0, 45.0));
        assert!(!is_covered(&rel(100.0, 0.0), 100.0, 45.0));
    }

    proptest! {
        #[test]
        fn normalize_is_congruent(a in -1e6f64..1e6) {
            let n = normalize_angle(a).unwrap();
            prop_assert!(n > -180.0 && n <= 180.0);
            let k = (n - a) / 360.0;
            prop_assert!((k - k.round()).abs() < 1e-6);
        }

        #[test]
        fn rotation_consistency(
            delta in -180.0f64..180.0, theta in -720.0f64..720.0,
            tx in -500.0f64..500.0, ty in -500.0f64..500.0,
        ) {
            prop_assume!(tx.hypot(ty) > 1e-6);
            let s = Pose::new(0.0, 0.0, delta).unwrap();
            let mut r = s;
            r.rotate(theta).unwrap();
            let a = relative_polar(&s, (tx, ty)).unwrap().alpha;
            let b = relative_polar(&r, (tx, ty)).unwrap().alpha;
            prop_assert!(angle_diff(b, a - theta).abs() < 1e-7);
        }

        #[test]
        fn coverage_monotone(rho in 0.0f64..500.0, alpha in -180.0f64..180.0, s in 0.0f64..1.0) {
            let outer = PolarRelation { rho, alpha };
            let inner = PolarRelation { rho: rho * s, alpha: alpha * s };
            if is_covered(&outer, 400.0, 45.0) {
                prop_assert!(is_covered(&inner, 400.0, 45.0));
            }
        }
    }
}
