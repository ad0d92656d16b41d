//! Smoothing kernels: poly6 for density, spiky for gradients.

use std::f64::consts::PI;

use crate::error::FluidError;
use crate::math::Vec3;

/// Precomputed kernel constants for a fixed smoothing length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    h: f64,
    h2: f64,
    poly6: f64,
    spiky: f64,
}

impl Kernel {
    pub fn new(h: f64) -> Result<Self, FluidError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(FluidError::Parameter {
                name: "h",
                message: format!("smoothing length must be positive, got {h}"),
            });
        }
        Ok(Self {
            h,
            h2: h * h,
            poly6: 315.0 / (64.0 * PI * h.powi(9)),
            spiky: -45.0 / (PI * h.powi(6)),
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Poly6 value from a squared distance.
    #[inline]
    pub fn w_r2(&self, r2: f64) -> f64 {
        if r2 >= self.h2 {
            return 0.0;
        }
        let d = self.h2 - r2;
        self.poly6 * d * d * d
    }

    #[inline]
    pub fn w(&self, r: &Vec3) -> f64 {
        self.w_r2(r.norm_squared())
    }

    pub fn w_zero(&self) -> f64 {
        self.poly6 * self.h2 * self.h2 * self.h2
    }

    /// Spiky gradient with respect to the first particle, `r = x_i - x_j`.
    #[inline]
    pub fn grad_r2(&self, r: &Vec3, r2: f64) -> Vec3 {
        if r2 >= self.h2 || r2 <= 1e-24 {
            return Vec3::zeros();
        }
        let len = r2.sqrt();
        let d = self.h - len;
        r * (self.spiky * d * d / len)
    }

    #[inline]
    pub fn grad(&self, r: &Vec3) -> Vec3 {
        self.grad_r2(r, r.norm_squared())
    }
}

/// Density kernel W(r, h), 1/m³.
pub fn kernel_w(r: &Vec3, h: f64) -> Result<f64, FluidError> {
    Ok(Kernel::new(h)?.w(r))
}

/// Kernel gradient ∇W(r, h), 1/m⁴.
pub fn kernel_grad_w(r: &Vec3, h: f64) -> Result<Vec3, FluidError> {
    Ok(Kernel::new(h)?.grad(r))
}
