//! Rigid rotations of the Riemann sphere and spherical areas of disks.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::domains::DiskSpec;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            Self::Finite(z) => Some(z),
            Self::Infinity => None,
        }
    }

    /// `-1/z̄`, the antipode under stereographic projection.
    pub fn antipode(self) -> Self {
        match self {
            Self::Infinity => Self::Finite(Complex64::new(0.0, 0.0)),
            Self::Finite(z) if z == Complex64::new(0.0, 0.0) => Self::Infinity,
            Self::Finite(z) => Self::Finite(-1.0 / z.conj()),
        }
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        Self::Finite(z)
    }
}

/// `z ↦ (az + b)/(-b̄z + ā)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MobiusTransform {
    pub a: Complex64,
    pub b: Complex64,
}

impl MobiusTransform {
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        crate::error::ensure_finite(a, "a")?;
        crate::error::ensure_finite(b, "b")?;
        if a.norm_sqr() + b.norm_sqr() == 0.0 {
            return Err(Error::InvalidInput("rotation coefficients are both zero".into()));
        }
        Ok(Self { a, b })
    }

    pub fn identity() -> Self {
        Self { a: Complex64::new(1.0, 0.0), b: Complex64::new(0.0, 0.0) }
    }

    /// `z ↦ e^{iφ} z`.
    pub fn rotation(phi: f64) -> Self {
        Self { a: Complex64::from_polar(1.0, phi / 2.0), b: Complex64::new(0.0, 0.0) }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            a: self.a * other.a - self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.a.conj(), b: -self.b }
    }

    pub fn apply(&self, p: SpherePoint) -> SpherePoint {
        match p {
            SpherePoint::Infinity => {
                if self.b == Complex64::new(0.0, 0.0) {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::Finite(-self.a / self.b.conj())
                }
            }
            SpherePoint::Finite(z) => {
                let bz = self.b.conj() * z;
                let den = self.a.conj() - bz;
                if den.norm() <= 4.0 * f64::EPSILON * (bz.norm() + self.a.norm()) {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::Finite((self.a * z + self.b) / den)
                }
            }
        }
    }

    pub fn apply_finite(&self, z: Complex64) -> SpherePoint {
        self.apply(SpherePoint::Finite(z))
    }
}

pub fn mobius_apply(m: &MobiusTransform, p: SpherePoint) -> SpherePoint {
    m.apply(p)
}

/// `w = (z + i)/(z - i)`.
pub fn w_map() -> MobiusTransform {
    let c = Complex64::from_polar(1.0, FRAC_PI_4);
    MobiusTransform { a: c, b: Complex64::new(0.0, 1.0) * c }
}

/// `u = (z - (√2-1))/((√2-1)z + 1)`.
pub fn u_map() -> MobiusTransform {
    MobiusTransform { a: Complex64::new(1.0, 0.0), b: Complex64::new(-(SQRT_2 - 1.0), 0.0) }
}

/// Euclidean distance between the points on the unit-diameter-2 sphere, in `[0, 2]`.
pub fn chordal_distance(p: SpherePoint, q: SpherePoint) -> f64 {
    match (p, q) {
        (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
        (SpherePoint::Finite(z), SpherePoint::Infinity) | (SpherePoint::Infinity, SpherePoint::Finite(z)) => {
            2.0 / (1.0 + z.norm_sqr()).sqrt()
        }
        (SpherePoint::Finite(z), SpherePoint::Finite(w)) => {
            2.0 * (z - w).norm() / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SphericalAreaReport {
    pub region: String,
    pub closed_form: f64,
    pub numeric: f64,
    pub abs_error: f64,
    /// Radius of the centered disk after the rigid move.
    pub moved_radius: f64,
    /// The rigid move sends the disk to the outside of `D(0, moved_radius)`.
    pub complement: bool,
}

pub fn centered_disk_area(r: f64) -> f64 {
    4.0 * PI * r * r / (1.0 + r * r)
}

/// Rigid move sending `d` to a disk centered at the origin or its complement.
pub fn centering_move(d: &DiskSpec) -> MobiusTransform {
    let alpha = d.center.norm();
    let rot = MobiusTransform::rotation(-d.center.arg());
    if alpha == 0.0 {
        return rot;
    }
    let r = d.radius;
    // α c² - (α² - 1 - r²) c - α = 0; the roots multiply to -1.
    let p = alpha * alpha - 1.0 - r * r;
    let disc = (p * p + 4.0 * alpha * alpha).sqrt();
    let c = if p >= 0.0 { -2.0 * alpha / (p + disc) } else { 2.0 * alpha / (disc - p) };
    let s = 1.0 / (1.0 + c * c).sqrt();
    let mv = MobiusTransform { a: Complex64::new(s, 0.0), b: Complex64::new(-c * s, 0.0) };
    mv.compose(&rot)
}

fn closed_area(d: &DiskSpec) -> (f64, f64, bool) {
    let m = centering_move(d);
    let boundary = [0.0, TAU / 3.0, 2.0 * TAU / 3.0]
        .map(|th| m.apply_finite(d.center + Complex64::from_polar(d.radius, th)));
    let rho = boundary
        .iter()
        .map(|p| p.finite().map_or(f64::INFINITY, |z| z.norm()))
        .sum::<f64>()
        / 3.0;
    let complement = match m.apply_finite(d.center) {
        SpherePoint::Infinity => true,
        SpherePoint::Finite(z) => z.norm() > rho,
    };
    let inside = centered_disk_area(rho);
    (if complement { 4.0 * PI - inside } else { inside }, rho, complement)
}

/// `∫∫_d 4 dx dy / (1 + |z|²)²` in polar coordinates about the center.
pub fn numeric_area(d: &DiskSpec, n: usize) -> f64 {
    let m = n + n % 2;
    let hs = d.radius / m as f64;
    let ht = TAU / m as f64;
    let rows: f64 = (0..m)
        .into_par_iter()
        .map(|k| {
            let dir = Complex64::from_polar(1.0, k as f64 * ht);
            (0..=m)
                .map(|j| {
                    let s = j as f64 * hs;
                    let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
                    let q = 1.0 + (d.center + dir * s).norm_sqr();
                    w * 4.0 * s / (q * q)
                })
                .sum::<f64>()
        })
        .sum();
    rows * hs / 3.0 * ht
}

pub fn spherical_area(d: &DiskSpec, n: usize) -> Result<SphericalAreaReport> {
    if n < 512 {
        return Err(Error::TooFewPoints { need: 512, got: n });
    }
    let (closed_form, moved_radius, complement) = closed_area(d);
    let numeric = numeric_area(d, n);
    Ok(SphericalAreaReport {
        region: format!("D({}{:+}i, {})", d.center.re, d.center.im, d.radius),
        closed_form,
        numeric,
        abs_error: (closed_form - numeric).abs(),
        moved_radius,
        complement,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HalfplaneReport {
    pub samples: usize,
    /// Largest `|Re w - Im w| / max(1, |w|²)` over the image of `∂D(1,√2)`.
    pub line_residual_right: f64,
    /// Largest `|Re w + Im w| / max(1, |w|²)` over the image of `∂D(-1,√2)`.
    pub line_residual_left: f64,
    pub area_right: SphericalAreaReport,
    pub area_left: SphericalAreaReport,
    pub area_sum_closed: f64,
    pub area_sum_numeric: f64,
    pub area_sum_error: f64,
    /// `||(√2-1) + 1| - √2|`.
    pub geodesic_center_residual: f64,
    /// `u(√2-1) = 0` and `u(-1-√2) = ∞`.
    pub u_map_pair_ok: bool,
}

impl HalfplaneReport {
    pub fn passed(&self) -> bool {
        self.line_residual_right <= 1e-10
            && self.line_residual_left <= 1e-10
            && self.area_sum_error <= 1e-6
            && (self.area_sum_numeric - 4.0 * PI).abs() <= 1e-6
            && self.geodesic_center_residual <= 1e-12
            && self.u_map_pair_ok
    }
}

fn line_residual(w: SpherePoint, sign: f64) -> f64 {
    match w {
        SpherePoint::Infinity => 0.0,
        SpherePoint::Finite(w) => (w.re + sign * w.im).abs() / w.norm_sqr().max(1.0),
    }
}

pub fn orthogonal_halfplane_check(n: usize) -> Result<HalfplaneReport> {
    if n < 100 {
        return Err(Error::TooFewPoints { need: 100, got: n });
    }
    let right = DiskSpec::new(Complex64::new(1.0, 0.0), SQRT_2)?;
    let left = DiskSpec::new(Complex64::new(-1.0, 0.0), SQRT_2)?;
    let wm = w_map();
    let residual = |d: &DiskSpec, sign: f64| {
        (0..n)
            .map(|k| {
                let z = d.center + Complex64::from_polar(d.radius, TAU * (k as f64 + 0.5) / n as f64);
                line_residual(wm.apply_finite(z), sign)
            })
            .fold(0.0, f64::max)
    };
    let grid = n.max(512) * 4;
    let area_right = spherical_area(&right, grid)?;
    let area_left = spherical_area(&left, grid)?;
    let area_sum_closed = area_right.closed_form + area_left.closed_form;
    let area_sum_numeric = area_right.numeric + area_left.numeric;
    let um = u_map();
    let g = SQRT_2 - 1.0;
    let u_ok = matches!(um.apply_finite(Complex64::new(g, 0.0)), SpherePoint::Finite(z) if z.norm() < 1e-15)
        && um.apply_finite(Complex64::new(-1.0 - SQRT_2, 0.0)) == SpherePoint::Infinity;
    Ok(HalfplaneReport {
        samples: n,
        line_residual_right: residual(&right, -1.0),
        line_residual_left: residual(&left, 1.0),
        area_sum_error: (area_sum_closed - 4.0 * PI).abs(),
        area_right,
        area_left,
        area_sum_closed,
        area_sum_numeric,
        geodesic_center_residual: ((g + 1.0).abs() - SQRT_2).abs(),
        u_map_pair_ok: u_ok,
    })
}
