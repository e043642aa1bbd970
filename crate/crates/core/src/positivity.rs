//! Sampled Gram certificates and the overlap decision.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{self, ChainFailure, ChainVerdict};
use crate::domains::{ArchipelagoSpec, DiskSpec, DomainInput};
use crate::error::{Error, Result};
use crate::kernels::{KernelEvaluator, PointQuad};
use crate::numcore::{generalized_scale_bound, herm_min_eig, spectral_norm, CMatrix, HermitianMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;
/// Sampled violations count as overlap only beyond this multiple of the tolerance.
pub const VIOLATION_FACTOR: f64 = 10.0;
const COLLISION: f64 = 1e-8;
const MIN_SAMPLES: usize = 8;

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const SILVER: f64 = std::f64::consts::SQRT_2 - 1.0;
const ROOT3: f64 = 0.732_050_807_568_877_2;
const ROOT5: f64 = 0.236_067_977_499_789_7;

/// Pairs `(w_k, z_k)` in the annulus `r_lo ≤ |·| ≤ r_hi`.
///
/// Angles and radii follow Kronecker sequences with a small seeded jitter, so plans with the same seed share their leading points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplePlan {
    pub n: usize,
    pub r_lo: f64,
    pub r_hi: f64,
    pub seed: u64,
    pub tol: f64,
    #[serde(skip)]
    points: Vec<(Complex64, Complex64)>,
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

impl SamplePlan {
    pub fn new(n: usize, r_lo: f64, r_hi: f64, seed: u64) -> Result<Self> {
        if n < MIN_SAMPLES {
            return Err(Error::TooFewPoints { need: MIN_SAMPLES, got: n });
        }
        if !(r_lo > 0.0 && r_lo <= r_hi && r_hi.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid band [{r_lo}, {r_hi}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jit = 1.0 / (8 * MIN_SAMPLES) as f64;
        let points = (0..n)
            .map(|k| {
                let j: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() * jit);
                let i = (k + 1) as f64;
                let tw = frac(i * GOLDEN + j[0]) * TAU;
                let tz = frac(i * SILVER + j[1]) * TAU;
                let rw = r_lo + frac(i * ROOT3 + j[2]) * (r_hi - r_lo);
                let rz = r_lo + frac(i * ROOT5 + j[3]) * (r_hi - r_lo);
                (Complex64::from_polar(rw, tw), Complex64::from_polar(rz, tz))
            })
            .collect();
        Ok(Self { n, r_lo, r_hi, seed, tol: DEFAULT_TOL, points })
    }

    /// Plan with the band `[1.05·R₀, 2·R₀]`.
    pub fn default_band(n: usize, bounding_radius: f64, seed: u64) -> Result<Self> {
        let r0 = if bounding_radius > 0.0 { bounding_radius } else { 1.0 };
        Self::new(n, 1.05 * r0, 2.0 * r0, seed)
    }

    /// Explicit pairs, bypassing the size floor; used for small or degenerate samples.
    pub fn from_points(points: Vec<(Complex64, Complex64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::TooFewPoints { need: 1, got: 0 });
        }
        let radii = points.iter().flat_map(|p| [p.0.norm(), p.1.norm()]);
        let (lo, hi) = radii.fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r), b.max(r)));
        Ok(Self { n: points.len(), r_lo: lo, r_hi: hi, seed: 0, tol: DEFAULT_TOL, points })
    }

    /// Single points `λ_k`, paired with themselves.
    pub fn from_lambdas(lambdas: &[Complex64]) -> Result<Self> {
        Self::from_points(lambdas.iter().map(|&l| (l, l)).collect())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn points(&self) -> &[(Complex64, Complex64)] {
        &self.points
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    fn reseeded(&self, seed: u64) -> Result<Self> {
        Ok(Self::new(self.n, self.r_lo, self.r_hi, seed)?.with_tol(self.tol))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Psd,
    NotPsd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelTag {
    /// `L(w_k,z_k; w_l,z_l)`.
    L,
    /// `1 - E(λ_k, λ_l)`.
    OneMinusE,
    /// `1/E(λ_k, λ_l) - 1`.
    ResolventN,
    /// `L(w_k,z_k; w_l,z_l)·E(w_k, w_l)`.
    LTimesE,
    /// `L(λ_k,λ_l; λ_l,λ_k)`.
    Antidiagonal,
    /// Double finite difference of `wū·L` at infinity.
    B,
    /// `L([λ,w_k],z_k; [λ,w_l],z_l)`.
    PointEval,
    /// `E(λ_k, λ_l)` on sum-zero weights.
    CndE,
    EllipseCoefficient,
}

#[derive(Clone, Debug, Serialize)]
pub struct GramReport {
    pub kernel: KernelTag,
    pub n: usize,
    pub min_eig: f64,
    pub verdict: Verdict,
    /// Largest quadratic form on sum-zero weights (conditional negativity checks only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_projected_form: Option<f64>,
    #[serde(skip)]
    pub gram: CMatrix,
}

impl GramReport {
    pub fn from_matrix(kernel: KernelTag, gram: CMatrix, tol: f64) -> Result<Self> {
        let h = HermitianMatrix::from_upper(gram)?;
        let eig = herm_min_eig(&h, tol)?;
        Ok(Self {
            kernel,
            n: h.dim(),
            min_eig: eig.min_eig,
            verdict: if eig.psd { Verdict::Psd } else { Verdict::NotPsd },
            max_projected_form: None,
            gram: h.into_matrix(),
        })
    }

    pub fn is_psd(&self) -> bool {
        self.verdict == Verdict::Psd
    }

    /// Whether the negative part exceeds `factor·tol·max(1, ‖G‖)`.
    pub fn violation_beyond(&self, factor: f64, tol: f64) -> bool {
        let scale = spectral_norm(&self.gram).max(1.0);
        self.min_eig < -factor * tol * scale
    }
}

/// Upper triangle in parallel, mirrored below.
fn assemble<F>(n: usize, f: F) -> Result<CMatrix>
where
    F: Fn(usize, usize) -> Result<Complex64> + Sync,
{
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|k| (k..n).map(|l| f(k, l)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut g = CMatrix::zeros(n, n);
    for (k, row) in rows.into_iter().enumerate() {
        for (off, x) in row.into_iter().enumerate() {
            g[(k, k + off)] = x;
            g[(k + off, k)] = x.conj();
        }
    }
    Ok(g)
}

fn kernel_gram(ev: &KernelEvaluator, tag: KernelTag, plan: &SamplePlan, lambda: Complex64) -> Result<CMatrix> {
    let pts = plan.points();
    let quad = |k: usize, l: usize| PointQuad::new(pts[k].0, pts[k].1, pts[l].0, pts[l].1);
    let n = pts.len();
    match tag {
        KernelTag::L => assemble(n, |k, l| ev.kernel_l(&quad(k, l))),
        KernelTag::B => assemble(n, |k, l| ev.kernel_b(&quad(k, l))),
        KernelTag::LTimesE => assemble(n, |k, l| {
            Ok(ev.kernel_l(&quad(k, l))? * ev.exp_transform(pts[k].0, pts[l].0)?)
        }),
        KernelTag::PointEval => assemble(n, |k, l| ev.kernel_point_eval(lambda, &quad(k, l))),
        KernelTag::OneMinusE => assemble(n, |k, l| Ok(ev.kernel_m_n(pts[k].0, pts[l].0)?.0)),
        KernelTag::ResolventN => assemble(n, |k, l| Ok(ev.kernel_m_n(pts[k].0, pts[l].0)?.1)),
        KernelTag::Antidiagonal => assemble(n, |k, l| ev.antidiagonal_l(pts[k].0, pts[l].0)),
        KernelTag::CndE => assemble(n, |k, l| ev.exp_transform(pts[k].0, pts[l].0)),
        KernelTag::EllipseCoefficient => Err(Error::InvalidInput(
            "the ellipse coefficient kernel is built by the chain module".into(),
        )),
    }
}

pub fn gram_psd(ev: &KernelEvaluator, tag: KernelTag, plan: &SamplePlan) -> Result<GramReport> {
    let g = kernel_gram(ev, tag, plan, Complex64::new(0.0, 0.0))?;
    GramReport::from_matrix(tag, g, plan.tol())
}

/// Orthonormal basis of the sum-zero hyperplane (Helmert columns), `n × (n-1)`.
fn sum_zero_basis(n: usize) -> CMatrix {
    let mut h = CMatrix::zeros(n, n - 1);
    for j in 1..n {
        let s = 1.0 / ((j * (j + 1)) as f64).sqrt();
        for i in 0..j {
            h[(i, j - 1)] = Complex64::new(s, 0.0);
        }
        h[(j, j - 1)] = Complex64::new(-(j as f64) * s, 0.0);
    }
    h
}

/// `Σ c_j c̄_k E(λ_j, λ_k)`.
pub fn e_quadratic_form(ev: &KernelEvaluator, lambdas: &[Complex64], c: &[Complex64]) -> Result<f64> {
    if lambdas.len() != c.len() {
        return Err(Error::DimensionMismatch(format!("{} points, {} weights", lambdas.len(), c.len())));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, &lj) in lambdas.iter().enumerate() {
        for (k, &lk) in lambdas.iter().enumerate() {
            acc += c[j] * c[k].conj() * ev.exp_transform(lj, lk)?;
        }
    }
    Ok(acc.re)
}

/// Conditional negativity of `E`: the reported `min_eig` is that of `-H*GH`.
pub fn cnd_check_e(ev: &KernelEvaluator, plan: &SamplePlan) -> Result<GramReport> {
    let n = plan.points().len();
    if n < 2 {
        return Err(Error::TooFewPoints { need: 2, got: n });
    }
    let g = kernel_gram(ev, KernelTag::CndE, plan, Complex64::new(0.0, 0.0))?;
    let h = sum_zero_basis(n);
    let f = -(h.adjoint() * &g * &h);
    let mut rep = GramReport::from_matrix(KernelTag::CndE, f, plan.tol())?;
    rep.max_projected_form = Some(-rep.min_eig);
    rep.gram = g;
    rep.n = n;
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundedCertificate {
    pub bounded_ok: bool,
    pub c_bound: Option<f64>,
    pub min_eig_l: f64,
    pub min_eig_b: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointEvalCertificate {
    pub pointeval_ok: bool,
    pub c_point: Option<f64>,
    pub lambda: Complex64,
    pub min_eig_g1: f64,
    /// Seed actually used after collision resampling.
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub bounded: BoundedCertificate,
    pub point_eval: PointEvalCertificate,
    pub plan: SamplePlan,
}

impl CertificateReport {
    pub fn ok(&self) -> bool {
        self.bounded.bounded_ok && self.point_eval.pointeval_ok
    }
}

fn scale_tol(g: &CMatrix, tol: f64) -> f64 {
    tol * spectral_norm(g).max(1.0)
}

pub fn certificate_bounded(ev: &KernelEvaluator, plan: &SamplePlan) -> Result<BoundedCertificate> {
    let tol = plan.tol();
    let gl = GramReport::from_matrix(KernelTag::L, kernel_gram(ev, KernelTag::L, plan, Complex64::default())?, tol)?;
    let gb = GramReport::from_matrix(KernelTag::B, kernel_gram(ev, KernelTag::B, plan, Complex64::default())?, tol)?;
    let c_bound = generalized_scale_bound(
        &HermitianMatrix::from_upper(gb.gram.clone())?,
        &HermitianMatrix::from_upper(gl.gram.clone())?,
        scale_tol(&gl.gram, tol),
    )?;
    Ok(BoundedCertificate {
        bounded_ok: gl.is_psd() && gb.is_psd() && c_bound.is_some(),
        c_bound,
        min_eig_l: gl.min_eig,
        min_eig_b: gb.min_eig,
    })
}

/// Default `λ` for the point-evaluation certificate, beyond the sample band.
pub fn default_lambda(plan: &SamplePlan) -> Complex64 {
    Complex64::new(1.25 * plan.r_hi, 0.0)
}

pub fn certificate_point_eval(
    ev: &KernelEvaluator,
    lambda: Complex64,
    plan: &SamplePlan,
) -> Result<PointEvalCertificate> {
    ev.check_point(lambda)?;
    let collides = |p: &SamplePlan| p.points().iter().any(|q| (q.0 - lambda).norm() < COLLISION);
    let mut plan = plan.clone();
    let mut tries = 0;
    while collides(&plan) {
        if plan.seed == 0 && plan.points().len() < MIN_SAMPLES || tries == 16 {
            return Err(Error::InvalidInput("lambda collides with the sample points".into()));
        }
        plan = plan.reseeded(plan.seed + 1)?;
        tries += 1;
    }
    let tol = plan.tol();
    let g1 = GramReport::from_matrix(KernelTag::PointEval, kernel_gram(ev, KernelTag::PointEval, &plan, lambda)?, tol)?;
    let g2 = kernel_gram(ev, KernelTag::L, &plan, lambda)?;
    let c_point = generalized_scale_bound(
        &HermitianMatrix::from_upper(g2)?,
        &HermitianMatrix::from_upper(g1.gram.clone())?,
        scale_tol(&g1.gram, tol),
    )?;
    Ok(PointEvalCertificate {
        pointeval_ok: g1.is_psd() && c_point.is_some_and(|c| c > 0.0),
        c_point,
        lambda,
        min_eig_g1: g1.min_eig,
        seed: plan.seed,
    })
}

pub fn certificates(ev: &KernelEvaluator, lambda: Complex64, plan: &SamplePlan) -> Result<CertificateReport> {
    Ok(CertificateReport {
        bounded: certificate_bounded(ev, plan)?,
        point_eval: certificate_point_eval(ev, lambda, plan)?,
        plan: plan.clone(),
    })
}

/// `r₁² + r₂² ≤ |a₁ - a₂|²`, equality included.
pub fn two_disk_closed_form(d1: &DiskSpec, d2: &DiskSpec) -> bool {
    let lhs = d1.radius * d1.radius + d2.radius * d2.radius;
    let rhs = (d1.center - d2.center).norm_sqr();
    lhs <= rhs + 1e-12 * lhs.max(rhs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OverlapVerdict {
    DisjointCertified,
    OverlapDetected,
    Inconclusive { k: usize },
}

impl std::fmt::Display for OverlapVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::DisjointCertified => write!(f, "DISJOINT_CERTIFIED"),
            Self::OverlapDetected => write!(f, "OVERLAP_DETECTED"),
            Self::Inconclusive { k } => write!(f, "INCONCLUSIVE({k})"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub outcome: String,
    pub min_eig: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub n: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Thresholds {
    pub psd_tol: f64,
    pub violation_factor: f64,
    pub chain_tol: f64,
    pub norm_cap: f64,
    pub lambda_collision: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OverlapConfig {
    pub samples: usize,
    pub band: [f64; 2],
    pub seed: u64,
    pub max_iter: usize,
    pub lambda: Complex64,
    pub bounding_radius: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OverlapReport {
    pub verdict: OverlapVerdict,
    pub stages: Vec<StageRecord>,
    pub thresholds: Thresholds,
    pub config: OverlapConfig,
}

pub fn decide_overlap(arch: &ArchipelagoSpec, plan: &SamplePlan, k: usize) -> OverlapReport {
    decide_overlap_input(&DomainInput::Disks(arch.clone()), plan, k)
}

/// Closed forms, then sampled certificates, then the chain.
pub fn decide_overlap_input(input: &DomainInput, plan: &SamplePlan, k: usize) -> OverlapReport {
    let r0 = input.bounding_radius();
    let lambda = default_lambda(plan);
    let mut report = OverlapReport {
        verdict: OverlapVerdict::Inconclusive { k },
        stages: Vec::new(),
        thresholds: Thresholds {
            psd_tol: plan.tol(),
            violation_factor: VIOLATION_FACTOR,
            chain_tol: plan.tol(),
            norm_cap: chain::default_norm_cap(r0),
            lambda_collision: COLLISION,
        },
        config: OverlapConfig {
            samples: plan.n,
            band: [plan.r_lo, plan.r_hi],
            seed: plan.seed,
            max_iter: k,
            lambda,
            bounding_radius: r0,
        },
    };
    let stage = |name: &str, outcome: &str, min_eig, c, n| StageRecord {
        name: name.into(),
        outcome: outcome.into(),
        min_eig,
        c,
        n,
        seed: plan.seed,
    };

    // (i) closed form
    if let DomainInput::Disks(arch) = input {
        let disks = arch.disks();
        let mut worst = f64::INFINITY;
        let mut ok = true;
        for i in 0..disks.len() {
            for j in i + 1..disks.len() {
                let (a, b) = (&disks[i], &disks[j]);
                let margin = (a.center - b.center).norm_sqr() - a.radius.powi(2) - b.radius.powi(2);
                worst = worst.min(margin);
                ok &= two_disk_closed_form(a, b);
            }
        }
        let m = worst.is_finite().then_some(worst);
        report.stages.push(stage("closed_form", if ok { "pass" } else { "fail" }, m, None, disks.len()));
        if !ok {
            report.verdict = OverlapVerdict::OverlapDetected;
            return report;
        }
    }

    // (ii) sampled certificates
    let ev = KernelEvaluator::from_input(input);
    match certificates(&ev, lambda, plan) {
        Ok(cert) => {
            let b = &cert.bounded;
            let p = &cert.point_eval;
            let tol = plan.tol();
            let beyond = |x: f64| x < -VIOLATION_FACTOR * tol;
            let strong = beyond(b.min_eig_l) || beyond(b.min_eig_b) || beyond(p.min_eig_g1);
            let bmin = b.min_eig_l.min(b.min_eig_b);
            report.stages.push(stage(
                "certificate_bounded",
                if b.bounded_ok { "pass" } else { "fail" },
                Some(bmin),
                b.c_bound,
                plan.n,
            ));
            report.stages.push(stage(
                "certificate_point_eval",
                if p.pointeval_ok { "pass" } else { "fail" },
                Some(p.min_eig_g1),
                p.c_point,
                plan.n,
            ));
            if strong {
                report.verdict = OverlapVerdict::OverlapDetected;
                return report;
            }
        }
        Err(e) => report.stages.push(stage("certificates", &format!("error: {e}"), None, None, plan.n)),
    }

    // (iii) chain
    let bits = chain::precision_for_steps(k);
    let seed = match input {
        DomainInput::Disks(arch) => chain::sos_seed_disks(arch, bits),
        DomainInput::Raw(data) => chain::sos_seed(data, bits),
    };
    let seed = match seed {
        Ok(s) => s,
        Err(Error::NotPsd { min_eig }) => {
            report.stages.push(stage("chain_seed", "NOT_PSD", Some(min_eig), None, 0));
            report.verdict = OverlapVerdict::OverlapDetected;
            return report;
        }
        Err(e) => {
            report.stages.push(stage("chain_seed", &format!("error: {e}"), None, None, 0));
            return report;
        }
    };
    let (rep, hist) = chain::chain_run(&seed, k, plan.tol(), report.thresholds.norm_cap);
    let last_min = rep.trace.last().map(|t| t.min_eig_a2);
    report.stages.push(stage("chain", &rep.verdict.to_string(), last_min, None, seed.d));
    match rep.verdict {
        ChainVerdict::FailedAt { mode: ChainFailure::NormBlowup, .. } => {}
        ChainVerdict::FailedAt { .. } => report.verdict = OverlapVerdict::OverlapDetected,
        ChainVerdict::CertifiedUpToK { .. } => {
            let confirmed = match input {
                DomainInput::Disks(arch) => {
                    let d = arch.disks();
                    (0..d.len()).all(|i| {
                        (i + 1..d.len()).all(|j| {
                            let gap = (d[i].center - d[j].center).norm();
                            gap >= (d[i].radius + d[j].radius) * (1.0 - 1e-12)
                        })
                    })
                }
                DomainInput::Raw(_) => {
                    let dk = &hist.d[hist.d.len() - 1];
                    let nd = spectral_norm(dk);
                    let comm = crate::numcore::commutator(&dk.adjoint(), dk);
                    spectral_norm(&comm) <= 1e-10 * (1.0 + nd * nd)
                }
            };
            report.stages.push(stage(
                "confirmation",
                if confirmed { "pass" } else { "unconfirmed" },
                None,
                None,
                seed.d,
            ));
            if confirmed {
                report.verdict = OverlapVerdict::DisjointCertified;
            }
        }
    }
    report
}
