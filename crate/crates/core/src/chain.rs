//! Subnormal block-matrix model: seed factorization, the `A_k`/`D_k`
//! recurrence, the truncated operator and operator-side kernels.
//!
//! The recurrence `A_k² = A_{k-1}² - [D_k*, D_k]`, `D_{k+1} = A_k⁻¹ D_k A_k`
//! is forward unstable in double precision: a perturbation of the seed grows
//! by an order of magnitude per step. Seed and chain therefore run in
//! multiprecision, in the gauge where `A_k` is the upper Cholesky factor of
//! `A_k*A_k`. The finished history is rotated to the gauge with hermitian
//! positive `A_k` and stored in `f64`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domains::{make_archipelago, ArchipelagoSpec, DiskSpec, QuadratureData};
use crate::error::{Error, Result};
use crate::kernels::{KernelEvaluator, PointQuad};
use crate::numcore::mp::{self, MpComplex, MpMatrix};
use crate::numcore::{herm_min_eig, spectral_norm, CMatrix, CVector, HermitianMatrix};
use crate::positivity::{GramReport, KernelTag, SamplePlan};

const SEED_RANK_TOL: f64 = 1e-10;
const SINGULAR_COND: f64 = 1e-12;

/// Working precision in bits for a chain of `k` steps.
pub fn precision_for_steps(k: usize) -> usize {
    512 + 48 * k
}

pub fn default_norm_cap(bounding_radius: f64) -> f64 {
    4.0 * (bounding_radius + 1.0)
}

/// Factorization `P(w)P̄(z)(1 - E(w,z)) = ⟨(D₀* - z̄)⁻¹ξ, (D₀* - w̄)⁻¹ξ⟩ P(w)P̄(z)`.
#[derive(Clone, Debug)]
pub struct SeedData {
    pub d: usize,
    /// Coefficients `c_{jk}` of `w^j z̄^k` in `P(w)P̄(z) - Q(w,z)`, `d×d`.
    pub coeffs: CMatrix,
    /// Smallest eigenvalue of `coeffs`.
    pub coeff_min_eig: f64,
    pub rank: usize,
    pub d0: CMatrix,
    pub xi: CVector,
    /// Columns `v_k` with `coeffs = V* V`.
    pub v: CMatrix,
    /// Monic node polynomial coefficients `p_0..p_d`.
    pub p: Vec<Complex64>,
    /// Coefficients of `Q`, `(d+1)×(d+1)`.
    pub q: CMatrix,
    pub bounding_radius: f64,
    bits: usize,
    d0_mp: MpMatrix,
    xi_mp: MpMatrix,
}

impl SeedData {
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn xi_norm_sqr(&self) -> f64 {
        self.xi.norm_squared()
    }
}

struct MpPoly {
    p: Vec<MpComplex>,
    q: Vec<Vec<MpComplex>>,
}

fn mp_poly_from_f64(data: &QuadratureData, bits: usize) -> MpPoly {
    let p = data
        .p
        .full_coeffs()
        .iter()
        .map(|&c| MpComplex::from_c64(c, bits))
        .collect();
    let c = data.q.coeffs();
    let n = c.nrows();
    let q = (0..n)
        .map(|j| (0..n).map(|k| MpComplex::from_c64(c[(j, k)], bits)).collect())
        .collect();
    MpPoly { p, q }
}

/// Exact expansion of the disk products at the working precision.
fn mp_poly_from_disks(disks: &[DiskSpec], bits: usize) -> MpPoly {
    let mut p = vec![MpComplex::one(bits)];
    let mut q = vec![vec![MpComplex::one(bits)]];
    for d in disks {
        let a = MpComplex::from_c64(d.center, bits);
        let mut np = vec![MpComplex::zero(bits); p.len() + 1];
        for (i, pi) in p.iter().enumerate() {
            np[i + 1] = np[i + 1].add(pi);
            np[i] = np[i].sub(&pi.mul(&a));
        }
        p = np;

        let r = mp::real(d.radius, bits);
        let c00 = a.mul(&a.conj()).sub(&MpComplex::from_real(&r * &r, bits));
        let f = [
            [c00, a.neg()],
            [a.conj().neg(), MpComplex::one(bits)],
        ];
        // f[j][k] multiplies w^j ζ^k; f[0][1] is the ζ coefficient -a.
        let n = q.len();
        let mut nq = vec![vec![MpComplex::zero(bits); n + 1]; n + 1];
        for j in 0..n {
            for k in 0..n {
                for (fj, row) in f.iter().enumerate() {
                    for (fk, x) in row.iter().enumerate() {
                        nq[j + fj][k + fk] = nq[j + fj][k + fk].add(&q[j][k].mul(x));
                    }
                }
            }
        }
        q = nq;
    }
    MpPoly { p, q }
}

fn seed_from_mp(poly: MpPoly, bounding_radius: f64, bits: usize) -> Result<SeedData> {
    let d = poly.p.len() - 1;
    let n = d + 1;
    let mut c = MpMatrix::zeros(n, n, bits);
    for j in 0..n {
        for k in 0..n {
            c.set(j, k, poly.p[j].mul(&poly.p[k].conj()).sub(&poly.q[j][k]));
        }
    }
    let cf = c.to_cmatrix();
    let scale = cf.iter().fold(1.0f64, |a, z| a.max(z.norm()));
    for k in 0..n {
        if cf[(d, k)].norm() > 1e-12 * scale || cf[(k, d)].norm() > 1e-12 * scale {
            return Err(Error::InvalidInput(
                "P(w)P̄(z) - Q(w,z) must have degree below d in each variable".into(),
            ));
        }
    }
    let mut cd = MpMatrix::zeros(d, d, bits);
    for j in 0..d {
        for k in 0..d {
            cd.set(j, k, c.get(j, k).clone());
        }
    }
    let coeffs = cd.to_cmatrix();
    let eig = herm_min_eig(&HermitianMatrix::from_upper(coeffs.clone())?, SEED_RANK_TOL)?;
    if !eig.psd {
        return Err(Error::NotPsd { min_eig: eig.min_eig });
    }

    let r = cd.pivoted_cholesky(SEED_RANK_TOL);
    let rank = r.rows();
    if rank == 0 {
        return Err(Error::DegenerateSeed { residual: 0.0 });
    }
    // V = -R, so ξ = -v_{d-1} is the last column of R.
    let mut v = r.clone();
    for i in 0..rank {
        for j in 0..d {
            v.set(i, j, r.get(i, j).neg());
        }
    }
    let mut xi = MpMatrix::zeros(rank, 1, bits);
    for i in 0..rank {
        xi.set(i, 0, r.get(i, d - 1).clone());
    }
    let mut wm = MpMatrix::zeros(rank, d, bits);
    for k in 0..d {
        let pk = poly.p[k].conj();
        for i in 0..rank {
            let mut x = xi.get(i, 0).mul(&pk);
            if k > 0 {
                x = x.add(v.get(i, k - 1));
            }
            wm.set(i, k, x);
        }
    }
    // D₀* V = W  ⇒  (V V*) D₀ = V W*.
    let g = v.mul(&v.adjoint());
    let rg = g
        .cholesky_upper()
        .map_err(|_| Error::DegenerateSeed { residual: f64::INFINITY })?;
    let rhs = v.mul(&wm.adjoint());
    let d0 = rg.solve_upper(&rg.adjoint().solve_lower(&rhs));
    let residual = d0.adjoint().mul(&v).sub(&wm).to_cmatrix();
    let res = residual.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let wscale = 1.0 + wm.to_cmatrix().iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if res > 1e-8 * wscale {
        return Err(Error::DegenerateSeed { residual: res });
    }

    let q = CMatrix::from_fn(n, n, |j, k| poly.q[j][k].to_c64());
    Ok(SeedData {
        d,
        coeffs,
        coeff_min_eig: eig.min_eig,
        rank,
        d0: d0.to_cmatrix(),
        xi: CVector::from_iterator(rank, (0..rank).map(|i| xi.get(i, 0).to_c64())),
        v: v.to_cmatrix(),
        p: poly.p.iter().map(MpComplex::to_c64).collect(),
        q,
        bounding_radius,
        bits,
        d0_mp: d0,
        xi_mp: xi,
    })
}

/// Seed from raw `(P, Q)`; coefficients are taken as exact.
pub fn sos_seed(data: &QuadratureData, bits: usize) -> Result<SeedData> {
    seed_from_mp(mp_poly_from_f64(data, bits), data.bounding_radius(), bits)
}

/// Seed for a disk union, with the products expanded at full precision.
pub fn sos_seed_disks(arch: &ArchipelagoSpec, bits: usize) -> Result<SeedData> {
    seed_from_mp(mp_poly_from_disks(arch.disks(), bits), arch.bounding_radius(), bits)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChainFailure {
    ASquaredNotPsd,
    ASingular,
    NormBlowup,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChainVerdict {
    CertifiedUpToK { k: usize },
    FailedAt { step: usize, mode: ChainFailure },
}

impl std::fmt::Display for ChainVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::CertifiedUpToK { k } => write!(f, "CERTIFIED_UP_TO_K({k})"),
            Self::FailedAt { step, mode } => {
                let m = match mode {
                    ChainFailure::ASquaredNotPsd => "A_SQUARED_NOT_PSD",
                    ChainFailure::ASingular => "A_SINGULAR",
                    ChainFailure::NormBlowup => "NORM_BLOWUP",
                };
                write!(f, "FAILED_AT({step},{m})")
            }
        }
    }
}

/// Per-step record: `A_k²` spectrum summary and `‖D_k‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub min_eig_a2: f64,
    pub trace_a2: f64,
    pub norm_d: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub verdict: ChainVerdict,
    pub trace: Vec<StepTrace>,
    /// `A_k²` of the failing step.
    #[serde(skip)]
    pub witness: Option<CMatrix>,
    pub tol: f64,
    pub norm_cap: f64,
    pub bits: usize,
}

impl ChainReport {
    pub fn certified(&self) -> bool {
        matches!(self.verdict, ChainVerdict::CertifiedUpToK { .. })
    }

    /// Trace CSV: `step,min_eig_A2,trace_A2,norm_D,verdict`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,min_eig_A2,trace_A2,norm_D,verdict\n");
        let fail = match self.verdict {
            ChainVerdict::FailedAt { step, .. } => Some(step),
            _ => None,
        };
        for t in &self.trace {
            let v = if fail == Some(t.step + 1) {
                self.verdict.to_string()
            } else {
                "OK".to_string()
            };
            out.push_str(&format!(
                "{},{:e},{:.15},{:.15},{}\n",
                t.step, t.min_eig_a2, t.trace_a2, t.norm_d, v
            ));
        }
        out
    }
}

/// Chain blocks in the gauge with hermitian positive `A_k`.
///
/// `d` holds `D_0..D_m` and `a` holds `A_0..A_{m-1}`.
#[derive(Clone, Debug)]
pub struct ChainHistory {
    pub xi: CVector,
    pub d: Vec<CMatrix>,
    pub a: Vec<CMatrix>,
    pub a2: Vec<CMatrix>,
}

impl ChainHistory {
    pub fn steps(&self) -> usize {
        self.a.len()
    }

    pub fn block_dim(&self) -> usize {
        self.xi.len()
    }

    pub fn max_norm_d(&self) -> f64 {
        self.d.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    pub fn max_norm_a(&self) -> f64 {
        self.a.iter().map(spectral_norm).fold(0.0, f64::max)
    }
}

pub fn chain_run(seed: &SeedData, k: usize, tol: f64, norm_cap: f64) -> (ChainReport, ChainHistory) {
    let (report, chol) = run_mp(seed, k, tol, norm_cap);
    (report, to_hermitian_gauge(seed, &chol))
}

struct CholeskyChain {
    d: Vec<MpMatrix>,
    r: Vec<MpMatrix>,
    x: Vec<CMatrix>,
}

fn run_mp(seed: &SeedData, k: usize, tol: f64, norm_cap: f64) -> (ChainReport, CholeskyChain) {
    let mut prev = seed.xi_mp.mul(&seed.xi_mp.adjoint());
    let mut d = seed.d0_mp.clone();
    let mut chain = CholeskyChain {
        d: vec![d.clone()],
        r: Vec::new(),
        x: Vec::new(),
    };
    let mut trace = Vec::new();
    let report = |verdict, witness, trace| ChainReport {
        verdict,
        trace,
        witness,
        tol,
        norm_cap,
        bits: seed.bits,
    };
    for step in 0..k {
        let dh = d.adjoint();
        let comm = dh.mul(&d).sub(&d.mul(&dh));
        let x = prev.sub(&comm);
        let xf = x.to_cmatrix();
        let eig = match HermitianMatrix::from_upper(xf.clone()).and_then(|h| herm_min_eig(&h, tol)) {
            Ok(e) => e,
            Err(_) => {
                let v = ChainVerdict::FailedAt { step: step + 1, mode: ChainFailure::NormBlowup };
                return (report(v, Some(xf), trace), chain);
            }
        };
        let max = eig.eigenvalues[eig.eigenvalues.len() - 1];
        trace.push(StepTrace {
            step,
            min_eig_a2: eig.min_eig,
            trace_a2: eig.eigenvalues.iter().sum(),
            norm_d: spectral_norm(&d.to_cmatrix()),
        });
        if !eig.psd {
            let v = ChainVerdict::FailedAt { step: step + 1, mode: ChainFailure::ASquaredNotPsd };
            return (report(v, Some(xf), trace), chain);
        }
        let singular = ChainVerdict::FailedAt { step: step + 1, mode: ChainFailure::ASingular };
        if eig.min_eig <= 0.0 || eig.min_eig < SINGULAR_COND * max {
            return (report(singular, Some(xf), trace), chain);
        }
        let Ok(r) = x.cholesky_upper() else {
            return (report(singular, Some(xf), trace), chain);
        };
        // D_{k+1} = R^{-*} D_k R*.
        let rh = r.adjoint();
        let next = rh.solve_lower(&d.mul(&rh));
        prev = r.mul(&rh);
        chain.x.push(xf);
        chain.r.push(r);
        chain.d.push(next.clone());
        d = next;
        if spectral_norm(&d.to_cmatrix()) > norm_cap {
            let v = ChainVerdict::FailedAt { step: step + 1, mode: ChainFailure::NormBlowup };
            let w = chain.x.last().cloned();
            return (report(v, w, trace), chain);
        }
    }
    (report(ChainVerdict::CertifiedUpToK { k }, None, trace), chain)
}

/// Rotates each block so that `A_k` becomes hermitian positive.
fn to_hermitian_gauge(seed: &SeedData, chain: &CholeskyChain) -> ChainHistory {
    let n = seed.rank;
    let mut u = CMatrix::identity(n, n);
    let mut hist = ChainHistory {
        xi: seed.xi.clone(),
        d: Vec::new(),
        a: Vec::new(),
        a2: Vec::new(),
    };
    for (i, dk) in chain.d.iter().enumerate() {
        let df = dk.to_cmatrix();
        hist.d.push(&u * df * u.adjoint());
        if i < chain.r.len() {
            let m = chain.r[i].to_cmatrix() * u.adjoint();
            let svd = m.clone().svd(true, true);
            let (x, y_adj) = (svd.u.expect("left vectors"), svd.v_t.expect("right vectors"));
            let next_u = y_adj.adjoint() * x.adjoint();
            let a = &next_u * &m;
            hist.a.push((&a + a.adjoint()) * Complex64::new(0.5, 0.0));
            let a2 = &u * &chain.x[i] * u.adjoint();
            hist.a2.push((&a2 + a2.adjoint()) * Complex64::new(0.5, 0.0));
            u = next_u;
        }
    }
    hist
}

fn two_disk_arch(a: f64) -> ArchipelagoSpec {
    make_archipelago(&[(Complex64::new(-a, 0.0), 1.0), (Complex64::new(a, 0.0), 1.0)])
        .expect("unit radii")
}

/// Whether the unit disks at `±a` keep `A_0², ..., A_{k-1}²` positive definite.
fn survives(a: f64, k: usize) -> bool {
    let arch = two_disk_arch(a);
    let Ok(seed) = sos_seed_disks(&arch, precision_for_steps(k)) else {
        return false;
    };
    if k == 0 {
        return seed.coeff_min_eig >= 0.0;
    }
    let (report, _) = run_mp(&seed, k, 0.0, f64::INFINITY);
    report.certified()
}

/// Smallest `a` for which unit disks at `±a` survive step `k`, for `k = 0..=k_max`.
pub fn two_disk_threshold_table(k_max: usize) -> Vec<f64> {
    (0..=k_max)
        .map(|k| {
            let (mut lo, mut hi) = (0.5f64, 1.0f64);
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                if survives(mid, k) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        })
        .collect()
}

/// Lower block-bidiagonal truncation with `D_0..D_K` and `A_0..A_{K-1}`.
#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    pub k: usize,
    pub block: usize,
    pub t: CMatrix,
    pub xi: CVector,
}

impl TruncatedOperator {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn norm(&self) -> f64 {
        spectral_norm(&self.t)
    }

    /// `[T*, T] - ξξ*`.
    pub fn commutator_defect(&self) -> CMatrix {
        let th = self.t.adjoint();
        &th * &self.t - &self.t * &th - &self.xi * self.xi.adjoint()
    }

    fn solve(&self, adjoint: bool, x: Complex64, rhs: &CVector) -> Result<CVector> {
        let base = if adjoint { self.t.adjoint() } else { self.t.clone() };
        let n = self.dim();
        let m = base - CMatrix::identity(n, n) * x;
        m.lu().solve(rhs).ok_or(Error::ZeroDenominator("resolvent"))
    }

    /// `(T - x)⁻¹ ξ`.
    pub fn resolvent_xi(&self, x: Complex64) -> Result<CVector> {
        self.solve(false, x, &self.xi)
    }
}

pub fn assemble_truncated(hist: &ChainHistory, k: usize) -> Result<TruncatedOperator> {
    if hist.steps() < k {
        return Err(Error::InsufficientHistory { have: hist.steps(), need: k });
    }
    let b = hist.block_dim();
    let n = (k + 1) * b;
    let mut t = CMatrix::zeros(n, n);
    for i in 0..=k {
        t.view_mut((i * b, i * b), (b, b)).copy_from(&hist.d[i]);
        if i < k {
            t.view_mut(((i + 1) * b, i * b), (b, b)).copy_from(&hist.a[i]);
        }
    }
    let mut xi = CVector::zeros(n);
    xi.rows_mut(0, b).copy_from(&hist.xi);
    Ok(TruncatedOperator { k, block: b, t, xi })
}

/// `⟨(T - w)⁻¹(T* - z̄)⁻¹ξ, (T - u)⁻¹(T* - v̄)⁻¹ξ⟩`.
pub fn operator_l(op: &TruncatedOperator, q: &PointQuad) -> Result<Complex64> {
    let guard = 1.5 * op.norm();
    for x in [q.w, q.z, q.u, q.v] {
        if x.norm() < guard {
            return Err(Error::GuardViolation { point: x, radius: guard });
        }
    }
    let left = op.solve(false, q.w, &op.solve(true, q.z.conj(), &op.xi)?)?;
    let right = op.solve(false, q.u, &op.solve(true, q.v.conj(), &op.xi)?)?;
    Ok(right.dotc(&left))
}

/// `⟨T(T - w)⁻¹ ... ⟩` style Gram entry for the bounded certificate:
/// `⟨Tρ(w,z), Tρ(u,v)⟩` with `ρ(w,z) = (T - w)⁻¹(T* - z̄)⁻¹ξ`.
pub fn operator_b(op: &TruncatedOperator, q: &PointQuad) -> Result<Complex64> {
    let rho = |w: Complex64, z: Complex64| -> Result<CVector> {
        Ok(&op.t * op.solve(false, w, &op.solve(true, z.conj(), &op.xi)?)?)
    };
    Ok(rho(q.u, q.v)?.dotc(&rho(q.w, q.z)?))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NeumannValue {
    pub value: Complex64,
    pub tail_estimate: f64,
}

/// Partial sum `Σ_{k=0}^{K} ⟨f_k(w,z), f_k(u,v)⟩`.
pub fn neumann_l(hist: &ChainHistory, q: &PointQuad, k: usize) -> Result<NeumannValue> {
    if hist.steps() < k {
        return Err(Error::InsufficientHistory { have: hist.steps(), need: k });
    }
    let nd = hist.d[..=k].iter().map(spectral_norm).fold(0.0, f64::max);
    let na = hist.a[..k].iter().map(spectral_norm).fold(0.0, f64::max);
    let radius = nd + na;
    for x in [q.w, q.z, q.u, q.v] {
        if x.norm() <= radius {
            return Err(Error::SeriesRadius { point: x, radius });
        }
    }
    let b = hist.block_dim();
    let id = CMatrix::identity(b, b);
    let solve = |m: CMatrix, rhs: &CVector| -> Result<CVector> {
        m.lu().solve(rhs).ok_or(Error::ZeroDenominator("block resolvent"))
    };
    let f0 = |w: Complex64, z: Complex64| -> Result<CVector> {
        let y = solve(hist.d[0].adjoint() - &id * z.conj(), &hist.xi)?;
        solve(&hist.d[0] - &id * w, &y)
    };
    let mut fl = f0(q.w, q.z)?;
    let mut fr = f0(q.u, q.v)?;
    let mut sum = fr.dotc(&fl);
    for i in 0..k {
        fl = solve(&hist.d[i + 1] - &id * q.w, &(&hist.a[i] * &fl))?;
        fr = solve(&hist.d[i + 1] - &id * q.u, &(&hist.a[i] * &fr))?;
        sum += fr.dotc(&fl);
    }
    let ratio = (na / (q.w.norm() - nd)) * (na / (q.u.norm() - nd));
    let tail = if ratio < 1.0 {
        fl.norm() * fr.norm() * ratio / (1.0 - ratio)
    } else {
        f64::INFINITY
    };
    Ok(NeumannValue { value: sum, tail_estimate: tail })
}

/// Coefficients of the numerator polynomial of `P(v)P̄(z)·L·Q(w,u)`.
///
/// Index order is `(w^α, z̄^j, ū^β, v^l)` with every exponent below `d`.
#[derive(Clone, Debug)]
pub struct PadeNumerator {
    pub d: usize,
    coeffs: Vec<Complex64>,
}

impl PadeNumerator {
    pub fn get(&self, alpha: usize, j: usize, beta: usize, l: usize) -> Complex64 {
        let d = self.d;
        self.coeffs[((alpha * d + j) * d + beta) * d + l]
    }

    fn at_mut(&mut self, alpha: usize, j: usize, beta: usize, l: usize) -> &mut Complex64 {
        let d = self.d;
        &mut self.coeffs[((alpha * d + j) * d + beta) * d + l]
    }

    pub fn eval(&self, q: &PointQuad) -> Complex64 {
        let d = self.d;
        let (w, zb, ub, v) = (q.w, q.z.conj(), q.u.conj(), q.v);
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..d {
            for j in 0..d {
                for b in 0..d {
                    for l in 0..d {
                        acc += self.get(a, j, b, l)
                            * w.powu(a as u32)
                            * zb.powu(j as u32)
                            * ub.powu(b as u32)
                            * v.powu(l as u32);
                    }
                }
            }
        }
        acc
    }
}

/// Polynomial part in `w`, `ū` of `Q(w,u) Σ_{k<d} ⟨g_k(w,z), g_k(u,v)⟩`.
pub fn pade_numerator(seed: &SeedData, hist: &ChainHistory) -> Result<PadeNumerator> {
    let d = seed.d;
    if hist.steps() + 1 < d {
        return Err(Error::InsufficientHistory { have: hist.steps(), need: d - 1 });
    }
    let b = hist.block_dim();
    // Series in 1/w: series[m-1] is the coefficient of w^{-m}, m = 1..=d.
    let resolvent = |dk: &CMatrix| -> Vec<CMatrix> {
        let mut out = Vec::with_capacity(d);
        let mut pw = CMatrix::identity(b, b);
        for _ in 0..d {
            out.push(-&pw);
            pw = dk * pw;
        }
        out
    };
    let mut g = resolvent(&hist.d[0]);
    let mut out = PadeNumerator { d, coeffs: vec![Complex64::new(0.0, 0.0); d.pow(4)] };
    for k in 0..d {
        if k > 0 {
            let r = resolvent(&hist.d[k]);
            let ag: Vec<CMatrix> = g.iter().map(|m| &hist.a[k - 1] * m).collect();
            let mut next = vec![CMatrix::zeros(b, b); d];
            for (i, ri) in r.iter().enumerate() {
                for (m, gm) in ag.iter().enumerate() {
                    let p = i + 1 + m + 1;
                    if p <= d {
                        next[p - 1] += ri * gm;
                    }
                }
            }
            g = next;
        }
        for (mi, gm) in g.iter().enumerate() {
            for (ni, gn) in g.iter().enumerate() {
                let (m, n) = (mi + 1, ni + 1);
                let core = gn.adjoint() * gm;
                for j in 0..d {
                    let left = &core * seed.v.column(j);
                    for l in 0..d {
                        let val = seed.v.column(l).dotc(&left);
                        for a in m..=d {
                            for bb in n..=d {
                                *out.at_mut(a - m, j, bb - n, l) += seed.q[(a, bb)] * val;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gram of `c(v,z) = ⟨T y(z), T y(v)⟩ - ‖ξ‖²⟨y(z), y(v)⟩`, `y(z) = (T* - z̄)⁻¹ξ`,
/// for the truncated ellipse model `T = rS* + S - r - 1`.
pub fn ellipse_negativity_probe(r: f64, n: usize, plan: &SamplePlan) -> Result<GramReport> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::InvalidInput(format!("ellipse parameter must lie in [0,1), got {r}")));
    }
    if n < 32 {
        return Err(Error::InvalidInput(format!("truncation size must be >= 32, got {n}")));
    }
    let bound = 2.5 * (1.0 + r);
    let pts: Vec<Complex64> = plan.points().iter().map(|p| p.0).collect();
    if let Some(&p) = pts.iter().find(|p| p.norm() < bound) {
        return Err(Error::GuardViolation { point: p, radius: bound });
    }
    let mut t = CMatrix::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = Complex64::new(-r - 1.0, 0.0);
        if i + 1 < n {
            t[(i + 1, i)] = Complex64::new(1.0, 0.0);
            t[(i, i + 1)] = Complex64::new(r, 0.0);
        }
    }
    let mut xi = CVector::zeros(n);
    xi[0] = Complex64::new((1.0 - r * r).sqrt(), 0.0);
    let xi2 = xi.norm_squared();
    let th = t.adjoint();
    let mut ys = Vec::with_capacity(pts.len());
    for &z in &pts {
        let m = &th - CMatrix::identity(n, n) * z.conj();
        ys.push(m.lu().solve(&xi).ok_or(Error::ZeroDenominator("ellipse resolvent"))?);
    }
    let xs: Vec<CVector> = ys.iter().map(|y| &t * y).collect();
    let k = pts.len();
    let g = CMatrix::from_fn(k, k, |a, b| xs[b].dotc(&xs[a]) - ys[b].dotc(&ys[a]) * xi2);
    GramReport::from_matrix(KernelTag::EllipseCoefficient, g, plan.tol())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MergingResidual {
    /// `N = N₁ + N₂ + N₁N₂`, `N = 1/E - 1`.
    pub closed_form_n: f64,
    /// `M = M₁ + M₂ - M₁M₂`, `M = 1 - E`.
    pub closed_form_m: f64,
    /// Gram identity for `η(z) = (T - z)⁻¹ξ` on truncated operators.
    pub operator: f64,
}

/// Checks the union identities of two disjoint disks at all pairs of `points`.
pub fn merging_gram_residual(
    d1: &DiskSpec,
    d2: &DiskSpec,
    n: usize,
    points: &[Complex64],
) -> Result<MergingResidual> {
    if !crate::positivity::two_disk_closed_form(d1, d2) {
        return Err(Error::InvalidInput("disks overlap".into()));
    }
    let single = |d: &DiskSpec| ArchipelagoSpec::from_disks(vec![*d]);
    let a1 = single(d1);
    let a2 = single(d2);
    let au = ArchipelagoSpec::from_disks(vec![*d1, *d2]);
    let (e1, e2, eu) = (KernelEvaluator::new(&a1), KernelEvaluator::new(&a2), KernelEvaluator::new(&au));

    let op = |arch: &ArchipelagoSpec| -> Result<TruncatedOperator> {
        let seed = sos_seed_disks(arch, precision_for_steps(n))?;
        let (rep, hist) = chain_run(&seed, n, 1e-10, default_norm_cap(arch.bounding_radius()));
        if !rep.certified() {
            return Err(Error::InvalidInput(format!("chain failed: {}", rep.verdict)));
        }
        assemble_truncated(&hist, n)
    };
    let (t1, t2, tu) = (op(&a1)?, op(&a2)?, op(&au)?);
    let etas = |t: &TruncatedOperator| -> Result<Vec<CVector>> {
        points.iter().map(|&z| t.resolvent_xi(z)).collect()
    };
    let (h1, h2, hu) = (etas(&t1)?, etas(&t2)?, etas(&tu)?);

    let mut out = MergingResidual { closed_form_n: 0.0, closed_form_m: 0.0, operator: 0.0 };
    for (i, &w) in points.iter().enumerate() {
        for (j, &z) in points.iter().enumerate() {
            let (m1, n1) = e1.kernel_m_n(w, z)?;
            let (m2, n2) = e2.kernel_m_n(w, z)?;
            let (m, nn) = eu.kernel_m_n(w, z)?;
            out.closed_form_n = out.closed_form_n.max((nn - (n1 + n2 + n1 * n2)).norm());
            out.closed_form_m = out.closed_form_m.max((m - (m1 + m2 - m1 * m2)).norm());
            let g = |h: &[CVector]| h[j].dotc(&h[i]);
            let (g1, g2) = (g(&h1), g(&h2));
            out.operator = out.operator.max((g(&hu) - (g1 + g2 + g1 * g2)).norm());
        }
    }
    Ok(out)
}
