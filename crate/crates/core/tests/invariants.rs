use num_complex::Complex64;
use proptest::prelude::*;
use starksim_core::engine::{propagate_pulse, rotation, QubitState, VoltageMode, VoltageWaveform};
use starksim_core::output::{tables_from_csv, tables_to_csv, Table};
use starksim_core::stark::{sample_donor, EnsembleDistribution};
use starksim_core::tomography::{cardinal_states, process_fidelity, process_matrix};

fn bloch() -> impl Strategy<Value = [f64; 3]> {
    (
        0.0..1.0f64,
        0.0..std::f64::consts::PI,
        0.0..std::f64::consts::TAU,
    )
        .prop_map(|(r, th, ph)| {
            [
                r * th.sin() * ph.cos(),
                r * th.sin() * ph.sin(),
                r * th.cos(),
            ]
        })
}

proptest! {
    #[test]
    fn rotations_are_unitary(
        d in -1e6..1e6f64, f1 in 0.0..1e6f64, phi in -7.0..7.0f64, tau in 0.0..1e-3f64,
    ) {
        let u = rotation(d, f1, phi, tau);
        let err = (u.adjoint() * u - nalgebra::Matrix2::<Complex64>::identity()).norm();
        prop_assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn pulses_keep_states_physical(
        b in bloch(), d in -1e5..1e5f64, f1 in 0.0..1e5f64, phi in -7.0..7.0f64, tau in 0.0..1e-3f64,
    ) {
        let rho = QubitState::from_bloch(b);
        let out = propagate_pulse(&rho, d, f1, phi, tau);
        prop_assert!(out.is_physical(1e-12));
        let norm = |v: [f64; 3]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm(out.bloch()) - norm(b)).abs() < 1e-12);
    }

    #[test]
    fn square_wave_segments_tile(freq in 10.0..1e5f64, tau in 1e-6..1e-2f64) {
        let segs = VoltageWaveform::new(1.0, VoltageMode::SquareWave(freq)).segments(tau);
        let total: f64 = segs.iter().map(|s| s.1).sum();
        prop_assert!((total - tau).abs() <= 1e-12 * tau);
        prop_assert!(segs.iter().all(|s| s.1 > 0.0 && s.1 <= 0.5 / freq * (1.0 + 1e-9)));
        prop_assert!(segs.windows(2).all(|w| w[0].0 == -w[1].0));
    }

    #[test]
    fn donors_depend_only_on_seed_and_index(seed in any::<u64>(), index in 0..1_000_000u64) {
        let dist = EnsembleDistribution {
            magnetic_fwhm: 500.0,
            field_scale_fwhm: 0.05,
            linear_stark_std: 1e4,
        };
        let a = sample_donor(&dist, seed, index);
        prop_assert_eq!(a, sample_donor(&dist, seed, index));
        prop_assert!(a.field_scale > 0.0);
    }

    #[test]
    fn unitary_channel_is_self_faithful(d in -2.0..2.0f64, phi in -3.2..3.2f64, tau in 0.0..2.0f64) {
        let u = rotation(d, 1.0, phi, tau);
        let ins = cardinal_states();
        let outs: Vec<QubitState> = ins.iter().map(|r| r.transform(&u)).collect();
        let chi = process_matrix(&ins, &outs).unwrap();
        let f = process_fidelity(&chi, &chi);
        prop_assert!((f - 1.0).abs() < 1e-9, "{f}");
    }

    #[test]
    fn csv_sections_round_trip(rows in proptest::collection::vec(proptest::collection::vec(-1e9..1e9f64, 3), 0..20)) {
        let mut a = Table::new("a", &["x", "y", "z"]);
        for r in rows {
            a.push(r);
        }
        let mut b = Table::new("b", &["w"]);
        b.push(vec![f64::NAN]);
        let back = tables_from_csv(&tables_to_csv(&[a.clone(), b])).unwrap();
        prop_assert_eq!(&back[0], &a);
        prop_assert!(back[1].rows[0][0].is_nan());
    }
}
