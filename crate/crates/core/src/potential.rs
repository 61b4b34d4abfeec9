//! Free-energy densities for the bulk (`F`, `f = F'`) and the surface (`G`, `g = G'`).

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A scalar free-energy density with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    /// `1/4 (x^2 - 1)^2`.
    DoubleWell,
    /// Double well on `[-1, 1]` with quadratic tails `(x -+ 1)^2`.
    ModifiedDoubleWell,
    /// `(gamma/2) cos(theta_s) sin(pi x / 2)`.
    ContactLine { gamma: f64, cos_theta: f64 },
    /// Flory-Huggins mixing energy with quadratic regularization outside `[zeta, 1 - zeta]`.
    FloryHuggins { theta: f64, zeta: f64 },
}

impl Density {
    /// Energy density value.
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Density::DoubleWell => 0.25 * (x * x - 1.0).powi(2),
            Density::ModifiedDoubleWell => {
                if x > 1.0 {
                    (x - 1.0).powi(2)
                } else if x < -1.0 {
                    (x + 1.0).powi(2)
                } else {
                    0.25 * (x * x - 1.0).powi(2)
                }
            }
            Density::ContactLine { gamma, cos_theta } => 0.5 * gamma * cos_theta * (0.5 * PI * x).sin(),
            Density::FloryHuggins { theta, zeta } => {
                let mix = theta * x * (1.0 - x);
                if x > 1.0 - zeta {
                    x * x.ln() + (1.0 - x).powi(2) / (2.0 * zeta) + (1.0 - x) * zeta.ln() - 0.5 * zeta + mix
                } else if x < zeta {
                    (1.0 - x) * (1.0 - x).ln() + x * x / (2.0 * zeta) + x * zeta.ln() - 0.5 * zeta + mix
                } else {
                    x * x.ln() + (1.0 - x) * (1.0 - x).ln() + mix
                }
            }
        }
    }

    /// First derivative (the chemical-potential nonlinearity `f` or `g`).
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Density::DoubleWell => x * x * x - x,
            Density::ModifiedDoubleWell => {
                if x > 1.0 {
                    2.0 * (x - 1.0)
                } else if x < -1.0 {
                    2.0 * (x + 1.0)
                } else {
                    x * x * x - x
                }
            }
            Density::ContactLine { gamma, cos_theta } => 0.25 * gamma * PI * cos_theta * (0.5 * PI * x).cos(),
            Density::FloryHuggins { theta, zeta } => {
                let mix = theta * (1.0 - 2.0 * x);
                if x > 1.0 - zeta {
                    x.ln() + 1.0 - (1.0 - x) / zeta - zeta.ln() + mix
                } else if x < zeta {
                    -(1.0 - x).ln() - 1.0 + x / zeta + zeta.ln() + mix
                } else {
                    x.ln() - (1.0 - x).ln() + mix
                }
            }
        }
    }

    /// Second derivative (`f'` or `g'`).
    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            Density::DoubleWell => 3.0 * x * x - 1.0,
            Density::ModifiedDoubleWell => {
                if x.abs() > 1.0 {
                    2.0
                } else {
                    3.0 * x * x - 1.0
                }
            }
            Density::ContactLine { gamma, cos_theta } => {
                -gamma * PI * PI / 8.0 * cos_theta * (0.5 * PI * x).sin()
            }
            Density::FloryHuggins { theta, zeta } => {
                if x > 1.0 - zeta {
                    1.0 / x + 1.0 / zeta - 2.0 * theta
                } else if x < zeta {
                    1.0 / (1.0 - x) + 1.0 / zeta - 2.0 * theta
                } else {
                    1.0 / x + 1.0 / (1.0 - x) - 2.0 * theta
                }
            }
        }
    }

    /// Declared bound `L` on `sup |F''|`, `None` when unbounded.
    pub fn curvature_bound(&self) -> Option<f64> {
        match *self {
            Density::DoubleWell => None,
            Density::ModifiedDoubleWell => Some(2.0),
            Density::ContactLine { gamma, cos_theta } => Some(gamma * PI * PI / 8.0 * cos_theta.abs()),
            Density::FloryHuggins { theta, zeta } => {
                // F'' is largest at the knots and tends to 1/zeta - 2 theta in the tails;
                // its minimum over the core sits at x = 1/2.
                let knot = 1.0 / zeta + 1.0 / (1.0 - zeta) - 2.0 * theta;
                let tail = 1.0 / zeta - 2.0 * theta;
                let center = 4.0 - 2.0 * theta;
                Some(knot.abs().max(tail.abs()).max(center.abs()))
            }
        }
    }

    /// Declared Lipschitz constant `K` of `F''`, `None` when unbounded.
    pub fn curvature_lipschitz(&self) -> Option<f64> {
        match *self {
            Density::DoubleWell => None,
            Density::ModifiedDoubleWell => Some(6.0),
            Density::ContactLine { gamma, cos_theta } => Some(gamma * PI.powi(3) / 16.0 * cos_theta.abs()),
            Density::FloryHuggins { zeta, .. } => Some(1.0 / (zeta * zeta)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Density::DoubleWell => "double-well",
            Density::ModifiedDoubleWell => "modified-double-well",
            Density::ContactLine { .. } => "contact-line",
            Density::FloryHuggins { .. } => "flory-huggins",
        }
    }
}

/// Bulk and surface densities used together by the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    pub bulk: Density,
    pub surface: Density,
}

impl Potential {
    pub fn new(bulk: Density, surface: Density) -> Self {
        Potential { bulk, surface }
    }

    pub fn double_well() -> Self {
        Potential::new(Density::DoubleWell, Density::DoubleWell)
    }

    pub fn modified_double_well() -> Self {
        Potential::new(Density::ModifiedDoubleWell, Density::ModifiedDoubleWell)
    }

    pub fn flory_huggins_regularized(theta: f64, zeta: f64) -> Result<Self> {
        let d = flory_huggins_density(theta, zeta)?;
        Ok(Potential::new(d, d))
    }

    /// `L1`, the declared bound on `|f'|`.
    pub fn l1(&self) -> Option<f64> {
        self.bulk.curvature_bound()
    }

    /// `L2`, the declared bound on `|g'|`.
    pub fn l2(&self) -> Option<f64> {
        self.surface.curvature_bound()
    }

    pub fn k1(&self) -> Option<f64> {
        self.bulk.curvature_lipschitz()
    }

    pub fn k2(&self) -> Option<f64> {
        self.surface.curvature_lipschitz()
    }
}

/// Moving-contact-line surface density for a static contact angle `theta_s` (radians).
pub fn contact_line_surface(theta_s: f64, gamma: f64) -> Result<Density> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param("potential.gamma", "must be positive"));
    }
    if !theta_s.is_finite() {
        return Err(Error::param("potential.contact_angle", "must be finite"));
    }
    Ok(Density::ContactLine { gamma, cos_theta: theta_s.cos() })
}

pub fn flory_huggins_density(theta: f64, zeta: f64) -> Result<Density> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::param("potential.theta", "must be positive"));
    }
    if !(zeta > 0.0 && zeta < 0.5) {
        return Err(Error::param("potential.zeta", "must lie in (0, 1/2)"));
    }
    Ok(Density::FloryHuggins { theta, zeta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let e = 1e-5;
        (f(x + e) - f(x - e)) / (2.0 * e)
    }

    #[test]
    fn double_well_values() {
        let d = Density::DoubleWell;
        assert_eq!(d.derivative(1.0), 0.0);
        assert_eq!(d.derivative(-1.0), 0.0);
        assert_eq!(d.derivative(0.0), 0.0);
        assert_eq!(d.value(0.0), 0.25);
        assert_eq!(d.second_derivative(2.0), 11.0);
        assert!(d.curvature_bound().is_none());
    }

    #[test]
    fn modified_double_well_values() {
        let d = Density::ModifiedDoubleWell;
        assert_eq!(d.value(1.0), 0.0);
        assert_eq!(d.derivative(1.0), 0.0);
        assert_abs_diff_eq!(d.derivative(1.0 - 1e-12), 0.0, epsilon = 1e-11);
        assert_abs_diff_eq!(d.derivative(1.0 + 1e-12), 0.0, epsilon = 1e-11);
        assert_eq!(d.value(2.0), 1.0);
        let sup = (0..=6000)
            .map(|i| -3.0 + i as f64 * 1e-3)
            .map(|x| d.second_derivative(x).abs())
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(sup, 2.0, epsilon = 1e-12);
        assert_eq!(d.curvature_bound(), Some(2.0));
    }

    #[test]
    fn contact_line_values() {
        let neutral = contact_line_surface(PI / 2.0, 2f64.sqrt()).unwrap();
        for x in [-1.3, 0.0, 0.4, 2.0] {
            assert!(neutral.value(x).abs() < 1e-15);
            assert!(neutral.derivative(x).abs() < 1e-15);
        }
        let d = Density::ContactLine { gamma: 2f64.sqrt(), cos_theta: 0.5 };
        assert_abs_diff_eq!(d.derivative(1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.derivative(-1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.value(1.0), 0.353_553_390_593_273_8, epsilon = 1e-12);
        assert!(contact_line_surface(1.0, 0.0).is_err());
    }

    #[test]
    fn flory_huggins_branches_join() {
        let d = flory_huggins_density(2.5, 0.005).unwrap();
        for knot in [0.005, 0.995] {
            let below = d.value(knot - 1e-13);
            let above = d.value(knot + 1e-13);
            assert_abs_diff_eq!(below, above, epsilon = 1e-10);
            assert_abs_diff_eq!(d.derivative(knot - 1e-13), d.derivative(knot + 1e-13), epsilon = 1e-8);
        }
        assert_abs_diff_eq!(d.value(0.5), -0.068_147_180_559_945_3, epsilon = 1e-12);
        let x = 0.002;
        assert_abs_diff_eq!(d.derivative(x), fd(|t| d.value(t), x), epsilon = 1e-6);
        for x in [-1e6, -3.0, 0.0, 1.0, 7.0, 1e6] {
            assert!(d.value(x).is_finite(), "F({x}) not finite");
            assert!(d.derivative(x).is_finite());
        }
    }

    #[test]
    fn flory_huggins_rejects_bad_zeta() {
        assert!(flory_huggins_density(2.5, 0.0).is_err());
        assert!(flory_huggins_density(2.5, 0.5).is_err());
        assert!(flory_huggins_density(0.0, 0.1).is_err());
    }
}
