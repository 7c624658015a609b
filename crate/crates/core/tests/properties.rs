use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use shearlab::inviscid::{backward_map_jacobian, sample_grid};
use shearlab::viscous::run;
use shearlab::{
    Direction, HarmonicData, InitialData, Layout, SawtoothProfile, SolverConfig, SpectralField,
    StageSchedule,
};

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::Horizontal), Just(Direction::Vertical)]
}

fn custom_schedule() -> impl Strategy<Value = StageSchedule> {
    prop::collection::vec(
        (direction(), 0u32..5, 0.05f64..0.5, 0.01f64..1.5, 0u8..2),
        1..5,
    )
    .prop_map(|specs| {
        let specs: Vec<_> = specs
            .into_iter()
            .map(|(d, k, t, e, s)| (d, 1u64 << k, t, e, s))
            .collect();
        StageSchedule::custom(&specs).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profile_symmetries(eps in 1e-6f64..1.5, x in -20.0f64..20.0) {
        let p = SawtoothProfile::new(eps).unwrap();
        prop_assert!((p.eval(-x) + p.eval(x)).abs() <= 1e-12);
        prop_assert!((p.eval(PI - x) - p.eval(x)).abs() <= 1e-12);
        prop_assert!((p.eval(x + TAU) - p.eval(x)).abs() <= 1e-11);
        prop_assert!(p.eval_d1(x).abs() <= 1.0 + 1e-12);
        prop_assert!(p.eval_d2(x).abs() <= 1.0 / eps + 1e-9);
        prop_assert!(p.eval(x).abs() <= FRAC_PI_2);
    }

    #[test]
    fn profile_derivative_matches_difference(eps in 0.05f64..1.5, x in -4.0f64..4.0) {
        let p = SawtoothProfile::new(eps).unwrap();
        let h = 1e-5;
        let fd = (p.eval(x + h) - p.eval(x - h)) / (2.0 * h);
        prop_assert!((fd - p.eval_d1(x)).abs() <= 1e-4);
    }

    #[test]
    fn schedule_text_round_trip(s in custom_schedule()) {
        let text = s.to_text();
        let back = StageSchedule::from_text(&text).unwrap();
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn composed_map_preserves_area(s in custom_schedule(), x in 0.0f64..TAU, y in 0.0f64..TAU) {
        let j = s.stages.last().unwrap().j;
        let (_, m) = backward_map_jacobian(&s, j, x, y);
        prop_assert!((m[0][0] * m[1][1] - m[0][1] * m[1][0] - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn dump_round_trip(coeffs in prop::collection::vec((-8i64..8, -8i64..8, -1.0f64..1.0, -1.0f64..1.0), 1..12)) {
        let modes: Vec<_> = coeffs.iter().map(|&(a, b, re, im)| (a, b, Complex64::new(re, im))).collect();
        let f = SpectralField::from_modes(Layout::plain(32, 32).unwrap(), &modes).unwrap();
        let g = SpectralField::from_bytes(&f.to_bytes()).unwrap();
        prop_assert_eq!(g.to_bytes(), f.to_bytes());
    }

    #[test]
    fn interpolation_inequality(m in 1u32..6, l in 1u32..6, m2 in 1u32..6, l2 in 1u32..6, a in 0.1f64..2.0) {
        let th = InitialData::sum(&[
            InitialData::Harmonic(HarmonicData::sinsin(m, l)),
            InitialData::Harmonic(HarmonicData::new(shearlab::HarmonicKind::CosCos, m2, l2, a).unwrap()),
        ]);
        let f = th.to_field(Layout::plain(32, 32).unwrap()).unwrap();
        let (h0, h1, h2, hm) = (f.l2(), f.sobolev(1.0).unwrap(), f.sobolev(2.0).unwrap(), f.sobolev(-1.0).unwrap());
        prop_assert!(h1 * h1 <= h0 * h2 * (1.0 + 1e-12));
        prop_assert!(h0 * h0 <= hm * h1 * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pullback_keeps_l2(m in 1u32..4, l in 1u32..4, jmax in 3u32..5) {
        let th = InitialData::Harmonic(HarmonicData::sinsin(m, l));
        let s = StageSchedule::build_universal(0.5, jmax).unwrap();
        let modes: Vec<(i64, i64)> = th.modes().iter().map(|m| (m.0, m.1)).collect();
        let lay = Layout::for_program(1024, 1024, &s, modes).unwrap();
        let f = sample_grid(&th, &s, jmax, lay, false).unwrap().field;
        prop_assert!((f.l2() / th.l2() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn viscous_energy_never_grows(kappa in 1e-4f64..1e-2) {
        let th = InitialData::Harmonic(HarmonicData::sinsin(1, 1));
        let s = StageSchedule::build_universal(0.5, 3).unwrap();
        let modes: Vec<(i64, i64)> = th.modes().iter().map(|m| (m.0, m.1)).collect();
        let lay = Layout::for_program(256, 256, &s, modes).unwrap();
        let out = run(&th.to_field(lay).unwrap(), &s, &SolverConfig::new(kappa, 32, 256, 256)).unwrap();
        let mut last = f64::INFINITY;
        for e in &out.ledger.entries {
            prop_assert!(e.l2 <= last * (1.0 + 1e-12));
            last = e.l2;
        }
    }
}
