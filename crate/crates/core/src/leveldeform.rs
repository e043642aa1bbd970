//! Level sets `Ω(t) = {Q < t}` of `Q = |z|⁴ - 4|z|² - z² - z̄² + 1`,
//! their integer densities and the Schwarz function of the boundary.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_X_MAX: f64 = 2.6;
pub const MIN_GRID: usize = 256;
const CUT_GAP: f64 = 1e-6;

pub fn eval_q(z: Complex64) -> f64 {
    let r2 = z.norm_sqr();
    r2 * r2 - 4.0 * r2 - 2.0 * (z * z).re + 1.0
}

/// Largest real `x` with `Q(x) = t`.
pub fn outer_extent(t: f64) -> f64 {
    (3.0 + (8.0 + t).sqrt()).sqrt()
}

/// `g_t` sampled at cell centers: 1 in `Ω(t)`, 2 in the hole, 0 elsewhere.
#[derive(Clone, Debug)]
pub struct DensityField {
    pub t: f64,
    pub n: usize,
    pub x_max: f64,
    /// Set when `t` lies outside `[0, 1]`.
    pub unsupported: bool,
    values: Vec<u8>,
}

impl DensityField {
    pub fn spacing(&self) -> f64 {
        2.0 * self.x_max / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing().powi(2)
    }

    /// Center of cell `(i, j)`; `i` indexes `x`, `j` indexes `y`.
    pub fn center(&self, i: usize, j: usize) -> Complex64 {
        let h = self.spacing();
        Complex64::new(-self.x_max + (i as f64 + 0.5) * h, -self.x_max + (j as f64 + 0.5) * h)
    }

    pub fn value(&self, i: usize, j: usize) -> u8 {
        self.values[j * self.n + i]
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn hole_cells(&self) -> usize {
        self.values.iter().filter(|&&v| v == 2).count()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() * self.cell_area()
    }

    /// Midpoint rule for `∫ h g_t dx dy`.
    pub fn integrate<F: Fn(Complex64) -> Complex64 + Sync>(&self, h: F) -> Complex64 {
        let n = self.n;
        let sum: Complex64 = (0..n)
            .into_par_iter()
            .map(|j| {
                (0..n)
                    .filter(|&i| self.value(i, j) != 0)
                    .map(|i| h(self.center(i, j)) * self.value(i, j) as f64)
                    .sum::<Complex64>()
            })
            .sum();
        sum * self.cell_area()
    }

    /// Rows `x,y,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,value")?;
        for j in 0..self.n {
            for i in 0..self.n {
                let c = self.center(i, j);
                writeln!(out, "{},{},{}", c.re, c.im, self.value(i, j))?;
            }
        }
        Ok(())
    }
}

pub fn density_field(t: f64, n: usize, x_max: f64) -> Result<DensityField> {
    if n < MIN_GRID {
        return Err(Error::TooFewPoints { need: MIN_GRID, got: n });
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("t"));
    }
    let unsupported = !(0.0..=1.0).contains(&t);
    let need = if unsupported { 1.0 + 2f64.sqrt() } else { outer_extent(t) };
    if x_max.is_nan() || x_max < need {
        return Err(Error::InvalidInput(format!(
            "x_max = {x_max} does not contain the level set (need >= {need:.6})"
        )));
    }
    let mut field = DensityField { t, n, x_max, unsupported, values: vec![0; n * n] };
    let rows: Vec<Vec<u8>> = (0..n)
        .into_par_iter()
        .map(|j| (0..n).map(|i| u8::from(eval_q(field.center(i, j)) < t)).collect())
        .collect();
    for (j, row) in rows.into_iter().enumerate() {
        field.values[j * n..(j + 1) * n].copy_from_slice(&row);
    }
    fill_hole(&mut field);
    Ok(field)
}

/// Marks the `{Q > t}` component of the central cell with 2, unless it reaches the border.
fn fill_hole(field: &mut DensityField) {
    let n = field.n;
    let start = (n / 2, n / 2);
    if eval_q(field.center(start.0, start.1)) <= field.t {
        return;
    }
    let mut seen = vec![false; n * n];
    let mut comp = Vec::new();
    let mut queue = VecDeque::from([start]);
    seen[start.1 * n + start.0] = true;
    while let Some((i, j)) = queue.pop_front() {
        if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
            return;
        }
        comp.push(j * n + i);
        for (a, b) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
            let k = b * n + a;
            if !seen[k] && field.values[k] == 0 && eval_q(field.center(a, b)) > field.t {
                seen[k] = true;
                queue.push_back((a, b));
            }
        }
    }
    for k in comp {
        field.values[k] = 2;
    }
}

/// `±iA` and `±iB`, the zeros of `z⁴ + (2+t)z² + 1 - t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchPoints {
    pub t: f64,
    pub inner: f64,
    pub outer: f64,
    /// `t` outside `(0, 1)`: the pairs have fused and the values are limits.
    pub fused: bool,
}

impl BranchPoints {
    pub fn points(&self) -> [Complex64; 4] {
        let (a, b) = (self.inner, self.outer);
        [Complex64::new(0.0, a), Complex64::new(0.0, -a), Complex64::new(0.0, b), Complex64::new(0.0, -b)]
    }
}

pub fn discriminant(t: f64, z: Complex64) -> Complex64 {
    let z2 = z * z;
    z2 * z2 + (2.0 + t) * z2 + (1.0 - t)
}

pub fn branch_points(t: f64) -> BranchPoints {
    let fused = !(t > 0.0 && t < 1.0);
    let tc = t.clamp(0.0, 1.0);
    let root = (tc * (tc + 8.0)).sqrt();
    let a2 = ((2.0 + tc - root) / 2.0).max(0.0);
    let b2 = (2.0 + tc + root) / 2.0;
    BranchPoints { t, inner: a2.sqrt(), outer: b2.sqrt(), fused }
}

/// Branch values `S = (2z ± √Δ)/(z² - 1)` of the Schwarz function.
///
/// `√Δ = z·√(1 + A²/z²)·√(z² + B²)` with principal roots, cut along
/// `[-iA, iA]` and `|Im z| ≥ B` on the imaginary axis. The first value
/// tends to `+1` at infinity, the second to `-1`.
pub fn schwarz_branches(t: f64, z: Complex64) -> Result<(Complex64, Complex64)> {
    crate::error::ensure_finite(z, "z")?;
    let one = Complex64::new(1.0, 0.0);
    let den = z * z - one;
    if (z - one).norm() < CUT_GAP || (z + one).norm() < CUT_GAP {
        return Err(Error::Pole(z));
    }
    let bp = branch_points(t);
    let (a, b) = (bp.inner, bp.outer);
    if z.re.abs() < CUT_GAP && (z.im.abs() <= a + CUT_GAP || z.im.abs() >= b - CUT_GAP) {
        return Err(Error::BranchCut(z));
    }
    let root = z * (one + a * a / (z * z)).sqrt() * (z * z + b * b).sqrt();
    let two_z = 2.0 * z;
    Ok(((two_z + root) / den, (two_z - root) / den))
}

/// Point of `∂Ω(t)` at angle `θ`; `outer` selects the outer boundary.
pub fn gamma_point(t: f64, theta: f64, outer: bool) -> Option<Complex64> {
    let c = 4.0 + 2.0 * (2.0 * theta).cos();
    let disc = c * c - 4.0 * (1.0 - t);
    if disc < 0.0 {
        return None;
    }
    let rho2 = if outer { (c + disc.sqrt()) / 2.0 } else { (c - disc.sqrt()) / 2.0 };
    (rho2 > 0.0).then(|| Complex64::from_polar(rho2.sqrt(), theta))
}

/// Harmonic test functions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TestFunction {
    One,
    Z,
    Z2,
    Z3,
    ReZ2,
    ImZ2,
    /// `Σ c_k z^k`.
    Poly(Vec<Complex64>),
}

impl TestFunction {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            Self::One => Complex64::new(1.0, 0.0),
            Self::Z => z,
            Self::Z2 => z * z,
            Self::Z3 => z * z * z,
            Self::ReZ2 => Complex64::new((z * z).re, 0.0),
            Self::ImZ2 => Complex64::new((z * z).im, 0.0),
            Self::Poly(c) => crate::domains::horner(c, z),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Self::One => "1".into(),
            Self::Z => "z".into(),
            Self::Z2 => "z2".into(),
            Self::Z3 => "z3".into(),
            Self::ReZ2 => "rez2".into(),
            Self::ImZ2 => "imz2".into(),
            Self::Poly(c) => {
                let parts: Vec<String> = c
                    .iter()
                    .map(|x| if x.im == 0.0 { format!("{}", x.re) } else { format!("{}{:+}i", x.re, x.im) })
                    .collect();
                format!("poly:{}", parts.join(","))
            }
        }
    }
}

fn parse_coeff(s: &str) -> Option<Complex64> {
    let s = s.trim();
    if let Ok(x) = s.parse::<f64>() {
        return Some(Complex64::new(x, 0.0));
    }
    let body = s.strip_suffix('i')?;
    let split = body.rfind(['+', '-']).filter(|&k| k > 0)?;
    let re = body[..split].parse().ok()?;
    let im = match &body[split..] {
        "+" => 1.0,
        "-" => -1.0,
        x => x.parse().ok()?,
    };
    Some(Complex64::new(re, im))
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace(['^', ' '], "");
        Ok(match t.as_str() {
            "1" | "one" => Self::One,
            "z" => Self::Z,
            "z2" => Self::Z2,
            "z3" => Self::Z3,
            "rez2" => Self::ReZ2,
            "imz2" => Self::ImZ2,
            _ => {
                let body = t.strip_prefix("poly:").ok_or_else(|| Error::NonHarmonic(s.to_string()))?;
                let c: Option<Vec<_>> = body.split(',').map(parse_coeff).collect();
                match c {
                    Some(c) if !c.is_empty() => Self::Poly(c),
                    _ => return Err(Error::InvalidInput(format!("bad polynomial coefficients in {s:?}"))),
                }
            }
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureCheckReport {
    pub t: f64,
    pub h: String,
    pub n: usize,
    pub x_max: f64,
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub abs_error: f64,
    /// Error relative to `4π`, the total mass.
    pub rel_error: f64,
    pub unsupported: bool,
}

pub fn quadrature_identity_check(t: f64, h: &TestFunction, n: usize, x_max: f64) -> Result<QuadratureCheckReport> {
    let field = density_field(t, n, x_max)?;
    Ok(check_on_field(&field, h))
}

pub fn check_on_field(field: &DensityField, h: &TestFunction) -> QuadratureCheckReport {
    let lhs = field.integrate(|z| h.eval(z));
    let one = Complex64::new(1.0, 0.0);
    let rhs = TAU * (h.eval(-one) + h.eval(one));
    let abs_error = (lhs - rhs).norm();
    QuadratureCheckReport {
        t: field.t,
        h: h.tag(),
        n: field.n,
        x_max: field.x_max,
        lhs_re: lhs.re,
        lhs_im: lhs.im,
        rhs_re: rhs.re,
        rhs_im: rhs.im,
        abs_error,
        rel_error: abs_error / (4.0 * PI),
        unsupported: field.unsupported,
    }
}
