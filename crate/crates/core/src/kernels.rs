//! Exponential transform `E`, the four-point kernel `L` and relatives.
//!
//! Every evaluation goes through a table of divided differences of
//! `E(x, ζ)` on the point pairs `x ∈ {v, w}` and `ζ ∈ {z̄, ū}`. Each disk
//! factor has closed-form divided differences that stay valid when the
//! points coincide, and products are combined with the Leibniz rule, so the
//! confluent limits of `L` come out without cancellation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domains::{ArchipelagoSpec, DiskSpec, DomainInput, QuadratureData};
use crate::error::{ensure_finite, Error, Result};

pub const DEFAULT_GUARD: f64 = 1.05;

const SWITCHOVER: f64 = 1e-6;
const ZERO_E: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointQuad {
    pub w: Complex64,
    pub z: Complex64,
    pub u: Complex64,
    pub v: Complex64,
}

impl PointQuad {
    pub fn new(w: Complex64, z: Complex64, u: Complex64, v: Complex64) -> Self {
        Self { w, z, u, v }
    }

    pub fn real(w: f64, z: f64, u: f64, v: f64) -> Self {
        let c = |x| Complex64::new(x, 0.0);
        Self::new(c(w), c(z), c(u), c(v))
    }

    /// The quadruple `(u, v, w, z)` whose kernel value is the conjugate.
    pub fn swapped(&self) -> Self {
        Self::new(self.u, self.v, self.w, self.z)
    }

    fn points(&self) -> [Complex64; 4] {
        [self.w, self.z, self.u, self.v]
    }
}

/// Divided differences of `F(x, ζ)` on `x ∈ {v, w}`, `ζ ∈ {ζ1, ζ2}`.
///
/// `dx1 = F([v,w], ζ1)`, `dz_v = F(v, [ζ1,ζ2])`, `dxz = F([v,w], [ζ1,ζ2])`.
#[derive(Clone, Copy, Debug)]
struct DiffTable {
    f_v1: Complex64,
    f_v2: Complex64,
    f_w1: Complex64,
    f_w2: Complex64,
    dx1: Complex64,
    dx2: Complex64,
    dz_v: Complex64,
    dz_w: Complex64,
    dxz: Complex64,
}

impl DiffTable {
    fn one() -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Self {
            f_v1: o,
            f_v2: o,
            f_w1: o,
            f_w2: o,
            dx1: z,
            dx2: z,
            dz_v: z,
            dz_w: z,
            dxz: z,
        }
    }

    fn x_only(at_v: Complex64, at_w: Complex64, dd: Complex64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            f_v1: at_v,
            f_v2: at_v,
            f_w1: at_w,
            f_w2: at_w,
            dx1: dd,
            dx2: dd,
            dz_v: z,
            dz_w: z,
            dxz: z,
        }
    }

    fn zeta_only(at_1: Complex64, at_2: Complex64, dd: Complex64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            f_v1: at_1,
            f_v2: at_2,
            f_w1: at_1,
            f_w2: at_2,
            dx1: z,
            dx2: z,
            dz_v: dd,
            dz_w: dd,
            dxz: z,
        }
    }

    fn times(&self, g: &Self) -> Self {
        let f = self;
        Self {
            f_v1: f.f_v1 * g.f_v1,
            f_v2: f.f_v2 * g.f_v2,
            f_w1: f.f_w1 * g.f_w1,
            f_w2: f.f_w2 * g.f_w2,
            dx1: f.dx1 * g.f_w1 + f.f_v1 * g.dx1,
            dx2: f.dx2 * g.f_w2 + f.f_v2 * g.dx2,
            dz_v: f.dz_v * g.f_v2 + f.f_v1 * g.dz_v,
            dz_w: f.dz_w * g.f_w2 + f.f_w1 * g.dz_w,
            dxz: f.dxz * g.f_w2 + f.dz_v * g.dx2 + f.dx1 * g.dz_w + f.f_v1 * g.dxz,
        }
    }

    fn disk(d: &DiskSpec, v: Complex64, w: Complex64, z1: Complex64, z2: Complex64) -> Self {
        let s = d.radius * d.radius;
        let a = d.center;
        let (av, aw) = (1.0 / (v - a), 1.0 / (w - a));
        let (b1, b2) = (1.0 / (z1 - a.conj()), 1.0 / (z2 - a.conj()));
        let one = Complex64::new(1.0, 0.0);
        Self {
            f_v1: one - s * av * b1,
            f_v2: one - s * av * b2,
            f_w1: one - s * aw * b1,
            f_w2: one - s * aw * b2,
            dx1: s * av * aw * b1,
            dx2: s * av * aw * b2,
            dz_v: s * av * b1 * b2,
            dz_w: s * aw * b1 * b2,
            dxz: -s * av * aw * b1 * b2,
        }
    }

    fn rational(q: &QuadratureData, v: Complex64, w: Complex64, z1: Complex64, z2: Complex64) -> Self {
        let p = q.p.full_coeffs();
        let pbar: Vec<Complex64> = p.iter().map(|c| c.conj()).collect();
        let (pv, pw, pdd) = univariate(&p, v, w);
        let (p1, p2, pdd_z) = univariate(&pbar, z1, z2);
        let inv_p = Self::x_only(1.0 / pv, 1.0 / pw, -pdd / (pv * pw));
        let inv_pbar = Self::zeta_only(1.0 / p1, 1.0 / p2, -pdd_z / (p1 * p2));
        qtable(q, v, w, z1, z2).times(&inv_p).times(&inv_pbar)
    }
}

/// `(f(v), f(w), f[v,w])` for the polynomial with coefficients `c`.
fn univariate(c: &[Complex64], v: Complex64, w: Complex64) -> (Complex64, Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    let (mut sv, mut sw, mut dd) = (zero, zero, zero);
    for &ck in c.iter().rev() {
        dd = dd * v + sw;
        sv = sv * v + ck;
        sw = sw * w + ck;
    }
    (sv, sw, dd)
}

fn qtable(q: &QuadratureData, v: Complex64, w: Complex64, z1: Complex64, z2: Complex64) -> DiffTable {
    let c = q.q.coeffs();
    let n = c.nrows();
    let mut ch_v = Vec::with_capacity(n);
    let mut ch_w = Vec::with_capacity(n);
    let mut ch_d = Vec::with_capacity(n);
    for k in 0..n {
        let col: Vec<Complex64> = (0..n).map(|j| c[(j, k)]).collect();
        let (a, b, d) = univariate(&col, v, w);
        ch_v.push(a);
        ch_w.push(b);
        ch_d.push(d);
    }
    let (f_v1, f_v2, dz_v) = univariate(&ch_v, z1, z2);
    let (f_w1, f_w2, dz_w) = univariate(&ch_w, z1, z2);
    let (dx1, dx2, dxz) = univariate(&ch_d, z1, z2);
    DiffTable {
        f_v1,
        f_v2,
        f_w1,
        f_w2,
        dx1,
        dx2,
        dz_v,
        dz_w,
        dxz,
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Factor {
    Disk(DiskSpec),
    Rational(QuadratureData),
}

/// Evaluates `E` and derived kernels outside a guarded disk `|x| ≥ guard·R₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelEvaluator {
    factors: Vec<Factor>,
    bounding_radius: f64,
    guard: f64,
}

/// Both evaluation paths of `L`.
#[derive(Clone, Copy, Debug)]
pub struct LPaths {
    pub quotient: Option<Complex64>,
    pub divided: Complex64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityResiduals {
    pub merging_1: f64,
    pub merging_3: f64,
    pub merging_5: f64,
    /// `1 + N = (1 + N₁)(1 + N₂)` with `N = 1/E - 1`.
    pub n_product: f64,
    /// `1 - M = (1 - M₁)(1 - M₂)` with `M = 1 - E`.
    pub m_product: f64,
    /// `|E(w,z)|² - E(w,w) E(z,z)` for the union.
    pub reverse_cauchy_schwarz: f64,
}

impl IdentityResiduals {
    pub fn max_merging(&self) -> f64 {
        self.merging_1
            .max(self.merging_3)
            .max(self.merging_5)
            .max(self.n_product)
            .max(self.m_product)
    }
}

impl KernelEvaluator {
    pub fn new(arch: &ArchipelagoSpec) -> Self {
        Self {
            factors: arch.disks().iter().copied().map(Factor::Disk).collect(),
            bounding_radius: arch.bounding_radius(),
            guard: DEFAULT_GUARD,
        }
    }

    pub fn from_quadrature(data: QuadratureData) -> Self {
        Self {
            bounding_radius: data.bounding_radius(),
            factors: vec![Factor::Rational(data)],
            guard: DEFAULT_GUARD,
        }
    }

    pub fn from_input(input: &DomainInput) -> Self {
        match input {
            DomainInput::Disks(a) => Self::new(a),
            DomainInput::Raw(q) => Self::from_quadrature(q.clone()),
        }
    }

    /// No islands: `E ≡ 1`, `L ≡ 0`.
    pub fn empty() -> Self {
        Self {
            factors: Vec::new(),
            bounding_radius: 0.0,
            guard: DEFAULT_GUARD,
        }
    }

    pub fn with_guard(mut self, guard: f64) -> Result<Self> {
        if guard.is_nan() || guard < DEFAULT_GUARD || !guard.is_finite() {
            return Err(Error::InvalidInput(format!(
                "guard factor must be finite and >= {DEFAULT_GUARD}, got {guard}"
            )));
        }
        self.guard = guard;
        Ok(self)
    }

    /// Evaluator for the union, `E = E₁ E₂`.
    pub fn union(&self, other: &Self) -> Self {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Self {
            factors,
            bounding_radius: self.bounding_radius.max(other.bounding_radius),
            guard: self.guard.max(other.guard),
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    pub fn guard(&self) -> f64 {
        self.guard
    }

    pub fn guard_radius(&self) -> f64 {
        self.guard * self.bounding_radius
    }

    /// Disks of the evaluator when it is built from disks only.
    pub fn disks(&self) -> Option<Vec<DiskSpec>> {
        self.factors
            .iter()
            .map(|f| match f {
                Factor::Disk(d) => Some(*d),
                Factor::Rational(_) => None,
            })
            .collect()
    }

    pub fn check_point(&self, x: Complex64) -> Result<()> {
        ensure_finite(x, "kernel argument")?;
        let radius = self.guard_radius();
        if x.norm() < radius {
            return Err(Error::GuardViolation { point: x, radius });
        }
        Ok(())
    }

    fn check_quad(&self, q: &PointQuad) -> Result<()> {
        q.points().iter().try_for_each(|&x| self.check_point(x))
    }

    fn table(&self, v: Complex64, w: Complex64, z1: Complex64, z2: Complex64) -> DiffTable {
        self.factors.iter().fold(DiffTable::one(), |acc, f| {
            let t = match f {
                Factor::Disk(d) => DiffTable::disk(d, v, w, z1, z2),
                Factor::Rational(q) => DiffTable::rational(q, v, w, z1, z2),
            };
            acc.times(&t)
        })
    }

    fn quad_table(&self, q: &PointQuad) -> DiffTable {
        self.table(q.v, q.w, q.z.conj(), q.u.conj())
    }

    fn e_raw(&self, w: Complex64, z: Complex64) -> Complex64 {
        let zeta = z.conj();
        self.factors.iter().fold(Complex64::new(1.0, 0.0), |acc, f| {
            acc * match f {
                Factor::Disk(d) => {
                    1.0 - d.radius * d.radius / ((w - d.center) * (zeta - d.center.conj()))
                }
                Factor::Rational(q) => q.q.eval_wz(w, zeta) / (q.p.eval(w) * q.p.eval_conj(zeta)),
            }
        })
    }

    pub fn exp_transform(&self, w: Complex64, z: Complex64) -> Result<Complex64> {
        self.check_point(w)?;
        self.check_point(z)?;
        Ok(self.e_raw(w, z))
    }

    /// Value of `L` from both paths; the quotient is omitted when
    /// `v ≈ w` or `ū ≈ z̄` makes it 0/0.
    pub fn kernel_l_paths(&self, q: &PointQuad) -> Result<LPaths> {
        self.check_quad(q)?;
        let t = self.quad_table(q);
        if t.f_w2.norm() < ZERO_E {
            return Err(Error::ZeroDenominator("E(w,u)"));
        }
        let divided = -(t.dxz * t.f_w2 - t.dz_w * t.dx2) / t.f_w2;
        let dvw = q.v - q.w;
        let dzu = q.u.conj() - q.z.conj();
        let scale_x = 1f64.max(q.v.norm()).max(q.w.norm());
        let scale_z = 1f64.max(q.u.norm()).max(q.z.norm());
        let quotient = if dvw.norm() < SWITCHOVER * scale_x || dzu.norm() < SWITCHOVER * scale_z {
            None
        } else {
            Some((t.f_v1 * t.f_w2 - t.f_w1 * t.f_v2) / (dvw * dzu * t.f_w2))
        };
        Ok(LPaths { quotient, divided })
    }

    pub fn kernel_l(&self, q: &PointQuad) -> Result<Complex64> {
        let p = self.kernel_l_paths(q)?;
        Ok(p.quotient.unwrap_or(p.divided))
    }

    /// `L(w,z;z,w)` from the logarithmic derivative of each factor.
    pub fn antidiagonal_l(&self, w: Complex64, z: Complex64) -> Result<Complex64> {
        self.check_point(w)?;
        self.check_point(z)?;
        let zeta = z.conj();
        let mut e = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for f in &self.factors {
            match f {
                Factor::Disk(d) => {
                    let s = d.radius * d.radius;
                    let x = (w - d.center) * (zeta - d.center.conj());
                    e *= 1.0 - s / x;
                    sum += s / ((x - s) * (x - s));
                }
                Factor::Rational(data) => {
                    let c = data.q.coeffs();
                    let n = c.nrows();
                    let zero = Complex64::new(0.0, 0.0);
                    let (mut q0, mut qw, mut qz, mut qwz) = (zero, zero, zero, zero);
                    for j in 0..n {
                        for k in 0..n {
                            let cjk = c[(j, k)];
                            q0 += cjk * w.powu(j as u32) * zeta.powu(k as u32);
                            if j > 0 {
                                qw += cjk * j as f64 * w.powu(j as u32 - 1) * zeta.powu(k as u32);
                            }
                            if k > 0 {
                                qz += cjk * k as f64 * w.powu(j as u32) * zeta.powu(k as u32 - 1);
                            }
                            if j > 0 && k > 0 {
                                qwz += cjk
                                    * (j * k) as f64
                                    * w.powu(j as u32 - 1)
                                    * zeta.powu(k as u32 - 1);
                            }
                        }
                    }
                    let pp = data.p.eval(w) * data.p.eval_conj(zeta);
                    e *= q0 / pp;
                    sum -= (qwz * q0 - qw * qz) / (q0 * q0);
                }
            }
        }
        Ok(e * sum)
    }

    /// `(M, N) = (1 - E, 1/E - 1)`.
    pub fn kernel_m_n(&self, w: Complex64, z: Complex64) -> Result<(Complex64, Complex64)> {
        let e = self.exp_transform(w, z)?;
        if e.norm() < ZERO_E {
            return Err(Error::ZeroDenominator("E(w,z)"));
        }
        Ok((1.0 - e, 1.0 / e - 1.0))
    }

    /// Double finite difference of `wū·L` at infinity:
    /// `F(w,u) - F(∞,u) - F(w,∞) + F(∞,∞)` with `F = wū·L(w,z;u,v)`.
    pub fn kernel_b(&self, q: &PointQuad) -> Result<Complex64> {
        let l = self.kernel_l(q)?;
        let t = self.quad_table(q);
        let ub = q.u.conj();
        Ok(q.w * ub * l - ub * t.dz_v - q.w * t.dx1 + 1.0 - t.f_v1)
    }

    /// `L([λ,w], z; [λ,u], v)`: divided differences in the first and third slots.
    pub fn kernel_point_eval(&self, lambda: Complex64, q: &PointQuad) -> Result<Complex64> {
        self.check_point(lambda)?;
        let dw = lambda - q.w;
        let du = (lambda - q.u).conj();
        if dw.norm() < 1e-8 || du.norm() < 1e-8 {
            return Err(Error::InvalidInput("lambda collides with a sample point".into()));
        }
        let l = |w: Complex64, u: Complex64| self.kernel_l(&PointQuad::new(w, q.z, u, q.v));
        let num = l(lambda, lambda)? - l(q.w, lambda)? - l(lambda, q.u)? + l(q.w, q.u)?;
        Ok(num / (dw * du))
    }

    /// Algebraic identities between `self`, `other` and their union at `q`.
    pub fn identity_suite(&self, other: &Self, q: &PointQuad) -> Result<IdentityResiduals> {
        let uni = self.union(other);
        uni.check_quad(q)?;
        let (w, z, u, v) = (q.w, q.z, q.u, q.v);
        let l = uni.kernel_l(q)?;
        let l1 = self.kernel_l(q)?;
        let l2 = other.kernel_l(q)?;
        let e1 = |a, b| self.e_raw(a, b);
        let e2 = |a, b| other.e_raw(a, b);
        let e = |a, b| uni.e_raw(a, b);
        let cross = (v - w) * (u.conj() - z.conj());

        let m1 = l1 * e2(v, z) + l2 * e1(v, z) - cross * l1 * l2;
        let m3 = l1 * e2(v, z) + e1(w, z) * e1(v, u) / e1(w, u) * l2;
        let m5 = (l1 * e1(w, u)) * e2(v, z) * e2(w, u) + (l2 * e2(w, u)) * e1(w, z) * e1(v, u);

        let (ez, e1z, e2z) = (e(w, z), e1(w, z), e2(w, z));
        let n_of = |x: Complex64| 1.0 / x - 1.0;
        let m_of = |x: Complex64| 1.0 - x;
        let n_res = n_of(ez) - (n_of(e1z) + n_of(e2z) + n_of(e1z) * n_of(e2z));
        let m_res = m_of(ez) - (m_of(e1z) + m_of(e2z) - m_of(e1z) * m_of(e2z));

        Ok(IdentityResiduals {
            merging_1: (l - m1).norm(),
            merging_3: (l - m3).norm(),
            merging_5: (l * e(w, u) - m5).norm(),
            n_product: n_res.norm(),
            m_product: m_res.norm(),
            reverse_cauchy_schwarz: ez.norm_sqr() - (e(w, w) * e(z, z)).re,
        })
    }
}

/// `L` for a single disk in closed form.
pub fn kernel_l_disk_closed(d: &DiskSpec, q: &PointQuad) -> Result<Complex64> {
    for x in q.points() {
        ensure_finite(x, "kernel argument")?;
        if (x - d.center).norm() <= d.radius {
            return Err(Error::InvalidInput(format!("{x} lies in the closed disk")));
        }
    }
    let s = d.radius * d.radius;
    let a = d.center;
    let ab = a.conj();
    let xw = q.w - a;
    let xu = q.u.conj() - ab;
    let den = xw * xu - s;
    if den.norm() <= 1e-14 * (xw * xu).norm() {
        return Err(Error::Pole(q.w));
    }
    Ok(s / ((q.z.conj() - ab) * (q.v - a)) / den)
}
