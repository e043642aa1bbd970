//! Disks, archipelagos and their defining polynomials.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::numcore::CMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskSpec {
    pub center: Complex64,
    pub radius: f64,
}

impl DiskSpec {
    pub fn new(center: Complex64, radius: f64) -> Result<Self> {
        ensure_finite(center, "disk center")?;
        if !radius.is_finite() {
            return Err(Error::NonFinite("disk radius"));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "disk radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchipelagoSpec {
    disks: Vec<DiskSpec>,
    bounding_radius: f64,
}

impl ArchipelagoSpec {
    pub fn disks(&self) -> &[DiskSpec] {
        &self.disks
    }

    /// `max |a_j| + r_j`.
    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    pub fn degree(&self) -> usize {
        self.disks.len()
    }

    /// `Σ r_j²`, the area over π counted with multiplicity.
    pub fn area_over_pi(&self) -> f64 {
        self.disks.iter().map(|d| d.radius * d.radius).sum()
    }
}

pub fn make_archipelago(disks: &[(Complex64, f64)]) -> Result<ArchipelagoSpec> {
    if disks.is_empty() {
        return Err(Error::InvalidInput("archipelago needs at least one disk".into()));
    }
    let disks = disks
        .iter()
        .map(|&(c, r)| DiskSpec::new(c, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ArchipelagoSpec::from_disks(disks))
}

impl ArchipelagoSpec {
    pub(crate) fn from_disks(disks: Vec<DiskSpec>) -> Self {
        let bounding_radius = disks
            .iter()
            .map(|d| d.center.norm() + d.radius)
            .fold(0.0f64, f64::max);
        Self {
            disks,
            bounding_radius,
        }
    }
}

/// Monic polynomial `p_0 + p_1 z + ... + p_{d-1} z^{d-1} + z^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodePolynomial {
    coeffs: Vec<Complex64>,
}

impl NodePolynomial {
    /// `coeffs` holds `p_0..p_{d-1}`; the leading 1 is implicit.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("node polynomial needs degree >= 1".into()));
        }
        for &c in &coeffs {
            ensure_finite(c, "node polynomial coefficient")?;
        }
        Ok(Self { coeffs })
    }

    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut full = vec![Complex64::new(1.0, 0.0)];
        for &a in roots {
            full = convolve(&full, &[-a, Complex64::new(1.0, 0.0)]);
        }
        full.pop();
        Self { coeffs: full }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// All coefficients including the leading 1.
    pub fn full_coeffs(&self) -> Vec<Complex64> {
        let mut c = self.coeffs.clone();
        c.push(Complex64::new(1.0, 0.0));
        c
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        horner(&self.full_coeffs(), z)
    }

    /// Polynomial with conjugated coefficients, evaluated at `z`.
    pub fn eval_conj(&self, z: Complex64) -> Complex64 {
        let c: Vec<Complex64> = self.full_coeffs().iter().map(|c| c.conj()).collect();
        horner(&c, z)
    }

    pub fn roots(&self) -> Vec<Complex64> {
        poly_roots(&self.full_coeffs())
    }
}

pub(crate) fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &x| acc * z + x)
}

fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Roots of `c_0 + c_1 z + ... + c_n z^n` by Durand–Kerner iteration.
pub fn poly_roots(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let monic: Vec<Complex64> = c.iter().map(|&x| x / lead).collect();
    let bound = 1.0 + monic[..n].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * bound * 0.5).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                den = Complex64::new(1e-300, 0.0);
            }
            let step = horner(&monic, z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * bound {
            break;
        }
    }
    z
}

/// Coefficients `c_{jk}` of `Q(w,z) = Σ c_{jk} w^j z̄^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianPolynomialKernel {
    coeffs: CMatrix,
}

impl HermitianPolynomialKernel {
    pub fn new(coeffs: CMatrix) -> Result<Self> {
        if coeffs.nrows() == 0 || coeffs.nrows() != coeffs.ncols() {
            return Err(Error::DimensionMismatch("kernel coefficients must be square".into()));
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("kernel coefficient"));
        }
        let n = coeffs.nrows();
        let scale = coeffs.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        for j in 0..n {
            for k in 0..n {
                if (coeffs[(j, k)] - coeffs[(k, j)].conj()).norm() > 1e-12 * scale {
                    return Err(Error::InvalidInput(format!(
                        "kernel coefficients are not hermitian at ({j},{k})"
                    )));
                }
            }
        }
        Ok(Self { coeffs })
    }

    pub fn size(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn coeffs(&self) -> &CMatrix {
        &self.coeffs
    }

    /// `Q(w,z)`, analytic in `w` and in `z̄`.
    pub fn eval(&self, w: Complex64, z: Complex64) -> Complex64 {
        self.eval_wz(w, z.conj())
    }

    /// `Σ c_{jk} w^j ζ^k` with `ζ` standing for `z̄`.
    pub fn eval_wz(&self, w: Complex64, zeta: Complex64) -> Complex64 {
        let n = self.size();
        let mut acc = Complex64::new(0.0, 0.0);
        for k in (0..n).rev() {
            let mut row = Complex64::new(0.0, 0.0);
            for j in (0..n).rev() {
                row = row * w + self.coeffs[(j, k)];
            }
            acc = acc * zeta + row;
        }
        acc
    }

    /// `Q(z,z)`, real up to round-off.
    pub fn eval_diag(&self, z: Complex64) -> f64 {
        self.eval(z, z).re
    }
}

/// Expands `P(w) = Π (w - a_j)` and `Q(w,z) = Π ((w - a_j)(z̄ - ā_j) - r_j²)`
/// in input order.
pub fn defining_data(arch: &ArchipelagoSpec) -> (NodePolynomial, HermitianPolynomialKernel) {
    let centers: Vec<Complex64> = arch.disks.iter().map(|d| d.center).collect();
    let p = NodePolynomial::from_roots(&centers);
    let mut q = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for d in &arch.disks {
        let a = d.center;
        let f = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(a.norm_sqr() - d.radius * d.radius, 0.0),
                -a,
                -a.conj(),
                Complex64::new(1.0, 0.0),
            ],
        );
        let n = q.nrows();
        let mut next = CMatrix::zeros(n + 1, n + 1);
        for j in 0..n {
            for k in 0..n {
                for (fj, fk) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    next[(j + fj, k + fk)] += q[(j, k)] * f[(fj, fk)];
                }
            }
        }
        q = next;
    }
    (p, HermitianPolynomialKernel { coeffs: q })
}

/// `S(z) = ā + r²/(z - a)`.
pub fn schwarz_disk(d: &DiskSpec, z: Complex64) -> Result<Complex64> {
    let dz = z - d.center;
    if dz.norm() == 0.0 {
        return Err(Error::Pole(z));
    }
    Ok(d.center.conj() + d.radius * d.radius / dz)
}

/// Raw quadrature-domain data `(P, Q)` with `E = Q(w,z)/(P(w) conj(P(z)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureData {
    pub p: NodePolynomial,
    pub q: HermitianPolynomialKernel,
    bounding_radius: f64,
}

impl QuadratureData {
    pub fn new(p: NodePolynomial, q: HermitianPolynomialKernel) -> Result<Self> {
        let d = p.degree();
        if q.size() != d + 1 {
            return Err(Error::DimensionMismatch(format!(
                "P has degree {d} but Q has size {}",
                q.size()
            )));
        }
        if (q.coeffs()[(d, d)] - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::InvalidInput("Q must have top coefficient 1".into()));
        }
        let bounding_radius = estimate_support_radius(&p, &q);
        Ok(Self {
            p,
            q,
            bounding_radius,
        })
    }

    pub fn from_archipelago(arch: &ArchipelagoSpec) -> Self {
        let (p, q) = defining_data(arch);
        Self {
            p,
            q,
            bounding_radius: arch.bounding_radius(),
        }
    }

    pub fn degree(&self) -> usize {
        self.p.degree()
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }
}

/// Radius enclosing both the roots of `P` and the sublevel set `Q(z,z) <= 0`,
/// located by a polar scan inside the a-priori bound `1 + Σ|c_{jk}|`.
fn estimate_support_radius(p: &NodePolynomial, q: &HermitianPolynomialKernel) -> f64 {
    let root_radius = p.roots().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let bound = 1.0 + q.coeffs().iter().map(|c| c.norm()).sum::<f64>();
    let (n_ang, n_rad) = (720, 4000);
    let mut reach = 0.0f64;
    for i in 0..n_ang {
        let dir = Complex64::from_polar(1.0, std::f64::consts::TAU * i as f64 / n_ang as f64);
        for j in (1..=n_rad).rev() {
            let rho = bound * j as f64 / n_rad as f64;
            if rho <= reach {
                break;
            }
            if q.eval_diag(dir * rho) <= 0.0 {
                reach = rho + bound / n_rad as f64;
                break;
            }
        }
    }
    root_radius.max(reach)
}

/// Input schemas accepted by the command line and the C interface.
#[derive(Clone, Debug)]
pub enum DomainInput {
    Disks(ArchipelagoSpec),
    Raw(QuadratureData),
}

#[derive(Deserialize)]
struct DiskJson {
    cx: f64,
    cy: f64,
    r: f64,
}

#[derive(Deserialize)]
struct DomainJson {
    disks: Option<Vec<DiskJson>>,
    #[serde(rename = "P")]
    p: Option<Vec<[f64; 2]>>,
    #[serde(rename = "Q")]
    q: Option<Vec<Vec<[f64; 2]>>>,
}

impl DomainInput {
    /// Parses `{"disks":[{"cx","cy","r"}...]}` or `{"P":[...],"Q":[[...]...]}`.
    ///
    /// `P` lists `p_0..p_{d-1}`, or all `d+1` coefficients when the last one is 1.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: DomainJson = serde_json::from_str(text)?;
        match (raw.disks, raw.p, raw.q) {
            (Some(disks), None, None) => {
                let list: Vec<(Complex64, f64)> = disks
                    .iter()
                    .map(|d| (Complex64::new(d.cx, d.cy), d.r))
                    .collect();
                Ok(Self::Disks(make_archipelago(&list)?))
            }
            (None, Some(p), Some(q)) => {
                let n = q.len();
                if n < 2 || q.iter().any(|row| row.len() != n) {
                    return Err(Error::DimensionMismatch("Q must be a square (d+1)x(d+1) array".into()));
                }
                let mut pc: Vec<Complex64> = p.iter().map(|c| Complex64::new(c[0], c[1])).collect();
                if pc.len() == n {
                    let top = pc.pop().unwrap_or_default();
                    if (top - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
                        return Err(Error::InvalidInput("P must be monic".into()));
                    }
                }
                if pc.len() != n - 1 {
                    return Err(Error::DimensionMismatch("P and Q degrees disagree".into()));
                }
                let qm = CMatrix::from_fn(n, n, |j, k| Complex64::new(q[j][k][0], q[j][k][1]));
                let data = QuadratureData::new(
                    NodePolynomial::new(pc)?,
                    HermitianPolynomialKernel::new(qm)?,
                )?;
                Ok(Self::Raw(data))
            }
            _ => Err(Error::InvalidInput(
                "expected either \"disks\" or both \"P\" and \"Q\"".into(),
            )),
        }
    }

    /// Parses `[[cx, cy, r], ...]`.
    pub fn from_triples(text: &str) -> Result<ArchipelagoSpec> {
        let triples: Vec<[f64; 3]> = serde_json::from_str(text)?;
        let list: Vec<(Complex64, f64)> = triples
            .iter()
            .map(|t| (Complex64::new(t[0], t[1]), t[2]))
            .collect();
        make_archipelago(&list)
    }

    pub fn bounding_radius(&self) -> f64 {
        match self {
            Self::Disks(a) => a.bounding_radius(),
            Self::Raw(q) => q.bounding_radius(),
        }
    }

    pub fn quadrature_data(&self) -> QuadratureData {
        match self {
            Self::Disks(a) => QuadratureData::from_archipelago(a),
            Self::Raw(q) => q.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_3, SQRT_2};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pair() -> ArchipelagoSpec {
        make_archipelago(&[(c(-1.0, 0.0), SQRT_2), (c(1.0, 0.0), SQRT_2)]).unwrap()
    }

    #[test]
    fn archipelago_examples() {
        assert!((pair().bounding_radius() - (1.0 + SQRT_2)).abs() < 1e-15);
        let unit = make_archipelago(&[(c(0.0, 0.0), 1.0)]).unwrap();
        assert_eq!(unit.bounding_radius(), 1.0);
        assert!(make_archipelago(&[(c(0.0, 0.0), -1.0)]).is_err());
        assert!(make_archipelago(&[]).is_err());
        assert!(make_archipelago(&[(c(f64::NAN, 0.0), 1.0)]).is_err());
    }

    #[test]
    fn unit_disk_polynomials() {
        let unit = make_archipelago(&[(c(0.0, 0.0), 1.0)]).unwrap();
        let (p, q) = defining_data(&unit);
        assert_eq!(p.coeffs(), &[c(0.0, 0.0)]);
        let want = CMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(q.coeffs(), &want);
    }

    #[test]
    fn pair_polynomial_matches_printed_form() {
        let (_, q) = defining_data(&pair());
        for z in [c(0.3, -0.7), c(2.0, 1.0), c(-1.5, 0.25)] {
            let zb = z.conj();
            let printed = z * z * zb * zb - 4.0 * z * zb - z * z - zb * zb + 1.0;
            assert!((q.eval(z, z) - printed).norm() < 1e-12);
        }
        assert!((q.eval_diag(c(0.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((q.eval_diag(c(3f64.sqrt(), 0.0)) + 8.0).abs() < 1e-12);
    }

    #[test]
    fn schwarz_examples() {
        let unit = DiskSpec::new(c(0.0, 0.0), 1.0).unwrap();
        let z = Complex64::from_polar(1.0, FRAC_PI_3);
        assert!((schwarz_disk(&unit, z).unwrap() - z.conj()).norm() < 1e-15);
        assert!((schwarz_disk(&unit, c(2.0, 0.0)).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
        let d = DiskSpec::new(c(1.0, 0.0), SQRT_2).unwrap();
        let z = c(1.0 + SQRT_2, 0.0);
        assert!((schwarz_disk(&d, z).unwrap() - z).norm() < 1e-15);
        assert!(matches!(schwarz_disk(&d, c(1.0, 0.0)), Err(Error::Pole(_))));
    }

    #[test]
    fn raw_input_round_trip() {
        let json = r#"{"P":[[0,0]],"Q":[[[-1,0],[0,0]],[[0,0],[1,0]]]}"#;
        let DomainInput::Raw(data) = DomainInput::from_json(json).unwrap() else {
            panic!("expected raw input")
        };
        assert!((data.bounding_radius() - 1.0).abs() < 2e-3);
        let bad = r#"{"P":[[0,0]],"Q":[[[-1,0],[0,1]],[[0,0],[1,0]]]}"#;
        assert!(DomainInput::from_json(bad).is_err());
        let disks = r#"{"disks":[{"cx":0,"cy":0,"r":1},{"cx":3,"cy":0,"r":1}]}"#;
        assert!(matches!(DomainInput::from_json(disks).unwrap(), DomainInput::Disks(_)));
        assert!(DomainInput::from_json("{").is_err());
    }

    #[test]
    fn roots_recovered() {
        let centers = [c(1.0, 2.0), c(-0.5, 0.1), c(3.0, -1.0)];
        let p = NodePolynomial::from_roots(&centers);
        let roots = p.roots();
        for a in centers {
            let best = roots.iter().map(|r| (r - a).norm()).fold(f64::MAX, f64::min);
            assert!(best < 1e-9);
        }
    }
}
