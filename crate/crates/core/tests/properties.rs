mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use qdpack::chain::{chain_run, default_norm_cap, precision_for_steps, sos_seed_disks};
use qdpack::kernels::{KernelEvaluator, PointQuad};
use qdpack::leveldeform::{density_field, schwarz_branches};
use qdpack::numcore::spectral_norm;
use qdpack::positivity::{cnd_check_e, gram_psd, KernelTag, SamplePlan, DEFAULT_TOL};
use qdpack::spherical::{chordal_distance, MobiusTransform, SpherePoint};

fn complex(lo: f64, hi: f64) -> impl Strategy<Value = Complex64> {
    (lo..hi, lo..hi).prop_map(|(re, im)| Complex64::new(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn l_is_hermitian(arch_seed in 1u64..500, q_seed in any::<u64>()) {
        let ev = KernelEvaluator::new(&random_archipelago(arch_seed));
        for q in guarded_quads(&ev, 4, q_seed) {
            let a = ev.kernel_l(&q).unwrap();
            let b = ev.kernel_l(&q.swapped()).unwrap();
            prop_assert!((a - b.conj()).norm() <= 1e-10 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn l_diagonal_is_nonnegative(arch_seed in 1u64..500, q_seed in any::<u64>()) {
        let ev = KernelEvaluator::new(&random_archipelago(arch_seed));
        for q in guarded_quads(&ev, 4, q_seed) {
            let l = ev.kernel_l(&PointQuad::new(q.w, q.z, q.w, q.z)).unwrap();
            prop_assert!(l.re >= 0.0);
            prop_assert!(l.im.abs() <= 1e-10 * (1.0 + l.re));
        }
    }

    #[test]
    fn reverse_cauchy_schwarz(arch_seed in 1u64..500, q_seed in any::<u64>()) {
        let ev = KernelEvaluator::new(&random_archipelago(arch_seed));
        for q in guarded_quads(&ev, 4, q_seed) {
            let ewz = ev.exp_transform(q.w, q.z).unwrap();
            let eww = ev.exp_transform(q.w, q.w).unwrap().re;
            let ezz = ev.exp_transform(q.z, q.z).unwrap().re;
            prop_assert!(ewz.norm_sqr() >= eww * ezz - DEFAULT_TOL);
        }
    }

    #[test]
    fn e_is_conditionally_negative(arch_seed in 1u64..500, plan_seed in 1u64..10_000) {
        let arch = random_archipelago(arch_seed);
        let ev = KernelEvaluator::new(&arch);
        let plan = SamplePlan::default_band(12, arch.bounding_radius(), plan_seed).unwrap();
        let rep = cnd_check_e(&ev, &plan).unwrap();
        prop_assert!(rep.is_psd(), "min eig {}", rep.min_eig);
    }

    #[test]
    fn sample_plans_are_deterministic_and_nested(seed in any::<u64>(), n in 8usize..40, extra in 1usize..20) {
        let a = SamplePlan::new(n, 2.0, 4.0, seed).unwrap();
        let b = SamplePlan::new(n, 2.0, 4.0, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let big = SamplePlan::new(n + extra, 2.0, 4.0, seed).unwrap();
        prop_assert_eq!(&big.points()[..n], a.points());
    }

    #[test]
    fn nested_plans_have_smaller_min_eig(seed in 1u64..10_000, n in 8usize..20) {
        let arch = two_disks(2.0, 1.0);
        let ev = KernelEvaluator::new(&arch);
        let small = SamplePlan::default_band(n, arch.bounding_radius(), seed).unwrap();
        let big = SamplePlan::default_band(n + 8, arch.bounding_radius(), seed).unwrap();
        let a = gram_psd(&ev, KernelTag::L, &small).unwrap().min_eig;
        let b = gram_psd(&ev, KernelTag::L, &big).unwrap().min_eig;
        prop_assert!(b <= a + 1e-12, "{b} > {a}");
    }

    #[test]
    fn schwarz_branches_satisfy_vieta(t in 0.0f64..1.0, z in complex(-3.0, 3.0)) {
        prop_assume!(z.re.abs() > 1e-3 && (z * z - 1.0).norm() > 1e-2);
        let (s1, s2) = schwarz_branches(t, z).unwrap();
        let den = z * z - 1.0;
        let scale = 1.0 + (4.0 * z / den).norm() + ((1.0 - t - z * z) / den).norm();
        prop_assert!((s1 + s2 - 4.0 * z / den).norm() <= 1e-10 * scale);
        prop_assert!((s1 * s2 - (1.0 - t - z * z) / den).norm() <= 1e-10 * scale);
        for s in [s1, s2] {
            let q = z * z * s * s - 4.0 * z * s - z * z - s * s + 1.0;
            prop_assert!((q - t).norm() <= 1e-9 * (1.0 + (z * s).norm_sqr()));
        }
    }

    #[test]
    fn mobius_rotations_are_rigid(a in complex(-2.0, 2.0), b in complex(-2.0, 2.0),
                                  p in complex(-5.0, 5.0), q in complex(-5.0, 5.0)) {
        prop_assume!(a.norm_sqr() + b.norm_sqr() > 1e-3);
        let m = MobiusTransform::new(a, b).unwrap();
        let (p, q) = (SpherePoint::Finite(p), SpherePoint::Finite(q));
        let before = chordal_distance(p, q);
        let after = chordal_distance(m.apply(p), m.apply(q));
        prop_assert!((before - after).abs() <= 1e-10);
        let lhs = m.apply(p.antipode());
        let rhs = m.apply(p).antipode();
        prop_assert!(chordal_distance(lhs, rhs) <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn chain_invariants(arch_seed in 1u64..1000) {
        let arch = random_archipelago(arch_seed);
        let k = 12;
        let seed = sos_seed_disks(&arch, precision_for_steps(k)).unwrap();
        let (rep, hist) = chain_run(&seed, k, DEFAULT_TOL, default_norm_cap(arch.bounding_radius()));
        prop_assert!(rep.certified(), "{}", rep.verdict);
        let area: f64 = arch.disks().iter().map(|d| d.radius * d.radius).sum();
        for t in &rep.trace {
            prop_assert!((t.trace_a2 - area).abs() <= 1e-9, "trace {} vs {area}", t.trace_a2);
        }
        for j in 0..hist.steps() {
            let (d, dn, a) = (&hist.d[j], &hist.d[j + 1], &hist.a[j]);
            prop_assert!(spectral_distance(&eigenvalues(d), &eigenvalues(dn)) <= 1e-8);
            prop_assert!((a * dn - d * a).norm() <= 1e-10 * (1.0 + spectral_norm(d)));
        }
    }

    #[test]
    fn hole_shrinks_with_t(t1 in 0.0f64..1.0, dt in 0.01f64..0.5) {
        let t2 = (t1 + dt).min(1.0);
        let a = density_field(t1, 256, 2.6).unwrap();
        let b = density_field(t2, 256, 2.6).unwrap();
        prop_assert!(b.hole_cells() <= a.hole_cells());
    }
}
