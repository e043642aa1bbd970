//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

mod common;

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::time::{Duration, Instant};

use common::*;
use num_complex::Complex64;
use qdpack::chain::{
    assemble_truncated, chain_run, default_norm_cap, ellipse_negativity_probe, merging_gram_residual,
    neumann_l, operator_l, precision_for_steps, sos_seed_disks, two_disk_threshold_table, ChainFailure,
    ChainVerdict,
};
use qdpack::domains::{ArchipelagoSpec, DiskSpec};
use qdpack::kernels::{KernelEvaluator, PointQuad};
use qdpack::leveldeform::{branch_points, check_on_field, density_field, TestFunction, DEFAULT_X_MAX};
use qdpack::positivity::{cnd_check_e, gram_psd, KernelTag, SamplePlan, Verdict, DEFAULT_TOL};
use qdpack::spherical::{orthogonal_halfplane_check, spherical_area};

// Tolerances.
const THRESHOLD_TOL: f64 = 1e-7;
const TRACE_TOL: f64 = 1e-9;
const NORM_D_BOUND: f64 = 5.0;
const OPERATOR_PATH_TOL: f64 = 1e-6;
const NEUMANN_PATH_TOL: f64 = 1e-10;
const QUADRATURE_REL_TOL: f64 = 0.005;
const BRANCH_TOL: f64 = 1e-6;
const AREA_TOL: f64 = 1e-6;
const LINE_TOL: f64 = 1e-10;
const MERGING_CLOSED_TOL: f64 = 1e-12;
const MERGING_OPERATOR_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-10;
const ISOSPECTRAL_TOL: f64 = 1e-8;
const INTERTWINING_TOL: f64 = 1e-10;

// Published branch-point values at t = 1/2.
const BRANCH_A_LITERAL: f64 = 0.4682148;
const BRANCH_B_LITERAL: f64 = 1.5102246;

/// Criteria whose literal target is off from the exact value by more than
/// its tolerance. They are run and reported, and must keep failing.
const KNOWN_UNATTAINABLE: &[usize] = &[6];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Writes past the test harness capture so the lines show in plain `cargo test` output.
fn report(line: std::fmt::Arguments) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn run(n: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let took = start.elapsed();
    let tag = if o.pass { "PASS" } else { "FAIL" };
    let slow = if took > budget { format!(" (over budget {budget:?})") } else { String::new() };
    report(format_args!("{tag} [{n:>2}] {name}: {} [{:.2}s]{slow}", o.detail, took.as_secs_f64()));
    o.pass
}

fn threshold_reproduction() -> Outcome {
    let t = two_disk_threshold_table(2);
    let want = [1.0 / SQRT_2, 3f64.sqrt() / 2.0, ((2.0 + SQRT_2) / 4.0).sqrt()];
    let err = t.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(
        err <= THRESHOLD_TOL,
        format!("table {:.7} {:.7} {:.7}, max err {err:.1e}", t[0], t[1], t[2]),
    )
}

fn run_chain(arch: &ArchipelagoSpec, k: usize) -> (qdpack::chain::ChainReport, qdpack::chain::ChainHistory) {
    let seed = sos_seed_disks(arch, precision_for_steps(k)).unwrap();
    chain_run(&seed, k, DEFAULT_TOL, default_norm_cap(arch.bounding_radius()))
}

fn tangency_survival() -> Outcome {
    let (rep, _) = run_chain(&two_disks(1.0, 1.0), 50);
    let certified = rep.verdict == ChainVerdict::CertifiedUpToK { k: 50 };
    let trace_err = rep.trace.iter().map(|t| (t.trace_a2 - 2.0).abs()).fold(0.0, f64::max);
    let norm_d = rep.trace.iter().map(|t| t.norm_d).fold(0.0, f64::max);
    let (r8, _) = run_chain(&two_disks(0.8, 1.0), 10);
    let (r9, _) = run_chain(&two_disks(0.9, 1.0), 10);
    let fail8 = r8.verdict == ChainVerdict::FailedAt { step: 1, mode: ChainFailure::ASquaredNotPsd };
    let fail9 = r9.verdict == ChainVerdict::FailedAt { step: 2, mode: ChainFailure::ASquaredNotPsd };
    outcome(
        certified && trace_err <= TRACE_TOL && norm_d <= NORM_D_BOUND && fail8 && fail9,
        format!(
            "a=1 {}, trace err {trace_err:.1e}, max |D| {norm_d:.3}; a=0.8 {}; a=0.9 {}",
            rep.verdict, r8.verdict, r9.verdict
        ),
    )
}

fn kernel_paths() -> Outcome {
    let q = PointQuad::real(2.0, 2.0, 2.0, 2.0);
    let exact = Complex64::new(1.0 / 12.0, 0.0);
    let ev = KernelEvaluator::new(&unit_disk());
    let rational = ev.kernel_l(&q).unwrap();
    let (_, hist) = run_chain(&unit_disk(), 40);
    let op = operator_l(&assemble_truncated(&hist, 30).unwrap(), &q).unwrap();
    let series = neumann_l(&hist, &q, 40).unwrap().value;
    let (e_op, e_series, e_exact) = ((rational - op).norm(), (rational - series).norm(), (rational - exact).norm());
    outcome(
        e_op <= OPERATOR_PATH_TOL && e_series <= NEUMANN_PATH_TOL && e_exact <= 1e-14,
        format!("|L-op| {e_op:.1e}, |L-series| {e_series:.1e}, |L-1/12| {e_exact:.1e}"),
    )
}

fn positivity_boundary() -> Outcome {
    let radii: Vec<f64> = (0..=11).map(|i| 1.30 + 0.02 * i as f64).collect();
    let mut ok = true;
    let mut last_psd = Vec::new();
    for seed in 1..=3 {
        let verdicts: Vec<Verdict> = radii
            .iter()
            .map(|&r| {
                let arch = two_disks(1.0, r);
                let ev = KernelEvaluator::new(&arch);
                let plan = SamplePlan::default_band(40, arch.bounding_radius(), seed).unwrap();
                gram_psd(&ev, KernelTag::OneMinusE, &plan).unwrap().verdict
            })
            .collect();
        // Single switch from PSD to NOT_PSD.
        let switch = verdicts.iter().position(|v| *v == Verdict::NotPsd).unwrap_or(radii.len());
        let monotone = verdicts[switch..].iter().all(|v| *v == Verdict::NotPsd);
        let bracket = switch > 0
            && switch < radii.len()
            && radii[switch - 1] >= SQRT_2 - 0.02 - 1e-12
            && radii[switch] <= SQRT_2 + 0.02 + 1e-12;
        ok &= monotone && bracket;
        last_psd.push(if switch > 0 { radii[switch - 1] } else { f64::NAN });
    }
    outcome(ok, format!("last PSD radius per seed {last_psd:.2?}, sqrt2 = {SQRT_2:.4}"))
}

fn quadrature_identity() -> Outcome {
    let hs = [TestFunction::One, TestFunction::Z, TestFunction::Z2, TestFunction::Z3];
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let field = density_field(t, 2000, DEFAULT_X_MAX).unwrap();
        for h in &hs {
            worst = worst.max(check_on_field(&field, h).rel_error);
        }
    }
    outcome(worst <= QUADRATURE_REL_TOL, format!("worst |lhs-rhs|/4pi {worst:.2e} over 20 checks"))
}

/// Roots of `y⁴ - (2+t)y² + (1-t)` by bisection, independent of the radical.
fn branch_oracle(t: f64) -> (f64, f64) {
    let f = |y: f64| y.powi(4) - (2.0 + t) * y * y + (1.0 - t);
    let bisect = |mut lo: f64, mut hi: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    (bisect(0.0, 1.0), bisect(1.0, 2.0))
}

fn branch_points_check() -> Outcome {
    let bp = branch_points(0.5);
    let (a, b) = branch_oracle(0.5);
    let oracle_ok = (bp.inner - a).abs() <= 1e-12 && (bp.outer - b).abs() <= 1e-12;
    let (da, db) = ((bp.inner - BRANCH_A_LITERAL).abs(), (bp.outer - BRANCH_B_LITERAL).abs());
    let literal_ok = da <= BRANCH_TOL && db <= BRANCH_TOL;
    outcome(
        oracle_ok && literal_ok,
        format!(
            "A {:.7} B {:.7}; oracle {}; literal diff A {da:.1e} B {db:.1e} {}",
            bp.inner,
            bp.outer,
            if oracle_ok { "agrees" } else { "DISAGREES" },
            if literal_ok { "within 1e-6" } else { "exceeds 1e-6" }
        ),
    )
}

fn spherical_geometry() -> Outcome {
    let d = DiskSpec::new(Complex64::new(1.0, 0.0), SQRT_2).unwrap();
    let rep = spherical_area(&d, 2048).unwrap();
    let area_ok = (rep.closed_form - 2.0 * PI).abs() <= AREA_TOL && (rep.numeric - 2.0 * PI).abs() <= AREA_TOL;
    let hp = orthogonal_halfplane_check(1000).unwrap();
    let line = hp.line_residual_right.max(hp.line_residual_left);
    let sum_err = (hp.area_sum_closed - 4.0 * PI).abs().max((hp.area_sum_numeric - 4.0 * PI).abs());
    outcome(
        area_ok && line <= LINE_TOL && sum_err <= AREA_TOL,
        format!(
            "area closed {:.9} numeric {:.9}; line residual {line:.1e}; area sum err {sum_err:.1e}",
            rep.closed_form, rep.numeric
        ),
    )
}

fn ellipse_counterexample() -> Outcome {
    let plan = SamplePlan::new(24, 2.5 * 1.5, 5.0 * 1.5, 11).unwrap();
    let a = ellipse_negativity_probe(0.5, 64, &plan).unwrap();
    let b = ellipse_negativity_probe(0.5, 128, &plan).unwrap();
    outcome(
        a.min_eig < 0.0 && b.min_eig < 0.0,
        format!("min eig N=64 {:.3e}, N=128 {:.3e}", a.min_eig, b.min_eig),
    )
}

fn merging_identities() -> Outcome {
    let d1 = DiskSpec::new(Complex64::new(0.0, 0.0), 1.0).unwrap();
    let d2 = DiskSpec::new(Complex64::new(4.0, 0.0), 1.0).unwrap();
    let e1 = KernelEvaluator::new(&qdpack::domains::make_archipelago(&[(d1.center, d1.radius)]).unwrap());
    let e2 = KernelEvaluator::new(&qdpack::domains::make_archipelago(&[(d2.center, d2.radius)]).unwrap());
    let union = e1.union(&e2);
    let mut closed: f64 = 0.0;
    for q in guarded_quads(&union, 20, 7) {
        closed = closed.max(e1.identity_suite(&e2, &q).unwrap().max_merging());
    }
    let pts: Vec<Complex64> = (0..6).map(|k| Complex64::from_polar(6.0, 1.05 * k as f64)).collect();
    let r = merging_gram_residual(&d1, &d2, 40, &pts).unwrap();
    closed = closed.max(r.closed_form_m).max(r.closed_form_n);
    outcome(
        closed <= MERGING_CLOSED_TOL && r.operator <= MERGING_OPERATOR_TOL,
        format!("closed-form max {closed:.1e}, operator Gram {:.1e}", r.operator),
    )
}

fn property_suites() -> Outcome {
    let mut worst_sym: f64 = 0.0;
    let mut worst_diag: f64 = 0.0;
    let mut worst_rcs: f64 = 0.0;
    let mut cnd_ok = true;
    let mut worst_trace: f64 = 0.0;
    let mut worst_iso: f64 = 0.0;
    let mut worst_int: f64 = 0.0;
    let mut chains_ok = true;
    for seed in 1..=10u64 {
        let arch = random_archipelago(seed);
        let ev = KernelEvaluator::new(&arch);
        for q in guarded_quads(&ev, 10, seed) {
            let l = ev.kernel_l(&q).unwrap();
            let ls = ev.kernel_l(&q.swapped()).unwrap();
            worst_sym = worst_sym.max((l - ls.conj()).norm() / (1.0 + l.norm()));
            let dq = PointQuad::new(q.w, q.z, q.w, q.z);
            let ld = ev.kernel_l(&dq).unwrap();
            worst_diag = worst_diag.max(-ld.re).max(ld.im.abs() - SYMMETRY_TOL * (1.0 + ld.re.abs()));
            let (w, z) = (q.w, q.z);
            let ewz = ev.exp_transform(w, z).unwrap();
            let eww = ev.exp_transform(w, w).unwrap();
            let ezz = ev.exp_transform(z, z).unwrap();
            worst_rcs = worst_rcs.max(eww.re * ezz.re - ewz.norm_sqr());
        }
        let plan = SamplePlan::default_band(16, arch.bounding_radius(), seed).unwrap();
        cnd_ok &= cnd_check_e(&ev, &plan).unwrap().is_psd();

        let (rep, hist) = run_chain(&arch, 20);
        chains_ok &= rep.certified();
        let area: f64 = arch.disks().iter().map(|d| d.radius * d.radius).sum();
        for t in &rep.trace {
            worst_trace = worst_trace.max((t.trace_a2 - area).abs());
        }
        for k in 0..hist.steps() {
            let (d, dn, a) = (&hist.d[k], &hist.d[k + 1], &hist.a[k]);
            worst_iso = worst_iso.max(spectral_distance(&eigenvalues(d), &eigenvalues(dn)));
            let scale = 1.0 + qdpack::numcore::spectral_norm(d);
            worst_int = worst_int.max((a * dn - d * a).norm() / scale);
        }
    }
    let pass = worst_sym <= SYMMETRY_TOL
        && worst_diag <= 0.0
        && worst_rcs <= DEFAULT_TOL
        && cnd_ok
        && chains_ok
        && worst_trace <= TRACE_TOL
        && worst_iso <= ISOSPECTRAL_TOL
        && worst_int <= INTERTWINING_TOL;
    outcome(
        pass,
        format!(
            "sym {worst_sym:.1e}, diag {worst_diag:.1e}, rcs {worst_rcs:.1e}, cnd {cnd_ok}, \
             chains {chains_ok}, trace {worst_trace:.1e}, iso {worst_iso:.1e}, intertwining {worst_int:.1e}"
        ),
    )
}

#[test]
fn acceptance() {
    let s = Duration::from_secs;
    let results = [
        run(1, "two-disk thresholds", s(5), threshold_reproduction),
        run(2, "chain survival at tangency", s(2), tangency_survival),
        run(3, "kernel cross-path agreement", s(1), kernel_paths),
        run(4, "positivity boundary of 1-E", s(10), positivity_boundary),
        run(5, "level-set quadrature identity", s(60), quadrature_identity),
        run(6, "branch points at t=1/2", s(1), branch_points_check),
        run(7, "spherical geometry", s(5), spherical_geometry),
        run(8, "ellipse counterexample", s(5), ellipse_counterexample),
        run(9, "merging identities", s(5), merging_identities),
        run(10, "property suites", s(30), property_suites),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    report(format_args!("{passed}/{} criteria pass; known unattainable: {KNOWN_UNATTAINABLE:?}", results.len()));
    for (i, &p) in results.iter().enumerate() {
        let n = i + 1;
        if KNOWN_UNATTAINABLE.contains(&n) {
            assert!(!p, "criterion {n} now passes; drop it from KNOWN_UNATTAINABLE");
        } else {
            assert!(p, "criterion {n} failed");
        }
    }
}

/// The literal published inner branch point. Differs from the exact root by 1.6e-6.
#[test]
#[ignore = "published inner branch point is off by 1.6e-6 against a 1e-6 tolerance"]
fn branch_points_match_published_literals() {
    let bp = branch_points(0.5);
    assert!((bp.inner - BRANCH_A_LITERAL).abs() <= BRANCH_TOL, "{}", bp.inner);
    assert!((bp.outer - BRANCH_B_LITERAL).abs() <= BRANCH_TOL, "{}", bp.outer);
}

#[test]
fn branch_points_match_exact_roots() {
    let bp = branch_points(0.5);
    let (a, b) = branch_oracle(0.5);
    assert!((bp.inner - a).abs() <= 1e-12 && (bp.outer - b).abs() <= 1e-12);
    assert!((bp.outer - BRANCH_B_LITERAL).abs() <= BRANCH_TOL);
}
