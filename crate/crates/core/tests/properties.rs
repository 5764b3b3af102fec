use num_complex::Complex64;
use proptest::prelude::*;
use risofdm::closedform::{self, RateModel};
use risofdm::model::tap_power_profile;
use risofdm::optimizer::{soft_min, wrap_phase};
use risofdm::txchain::{add_cyclic_prefix, cyclic_convolve, dft, idft, remove_cyclic_prefix};
use risofdm::{Bits, Geometry, PhaseVector, SystemConfig};

fn config(angles: &[f64], k_u: f64, k_b: f64, bits: u32) -> SystemConfig {
    SystemConfig {
        n_bs_antennas: 16,
        n_ris_elements: 9,
        n_users: 3,
        n_subcarriers: 16,
        cp_length: 6,
        taps_user_ris: 4,
        taps_ris_bs: 4,
        rician_user: vec![k_u, 0.5 * k_u, 2.0 * k_u],
        rician_bs: k_b,
        tap_power_user: vec![tap_power_profile(4, 2.5); 3],
        tap_power_bs: tap_power_profile(4, 5.0),
        pathloss_user: vec![1.0, 0.5, 0.8],
        pathloss_bs: 0.9,
        tx_power: vec![1.0, 2.0, 0.5],
        noise_power: 0.3,
        adc_bits: Bits::Finite(bits),
        geometry: Geometry {
            user_az: angles[0..3].to_vec(),
            user_el: angles[3..6].to_vec(),
            ris_depart_az: angles[6],
            ris_depart_el: angles[7],
            bs_arrive_az: angles[8],
            bs_arrive_el: angles[9],
        },
        element_spacing_over_wavelength: 0.5,
    }
}

fn angles() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..std::f64::consts::TAU, 10)
}

fn thetas() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..std::f64::consts::TAU, 9)
}

fn cvec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b)), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_is_invariant_to_a_common_phase(a in angles(), th in thetas(), c in 0.0..6.0f64, k in 0.0..5.0f64) {
        let cfg = config(&a, k, 2.0 * k, 3);
        let m = RateModel::new(&cfg).unwrap();
        let p1 = PhaseVector::new(&cfg, th.clone()).unwrap();
        let p2 = PhaseVector::new(&cfg, th.iter().map(|t| t + c).collect()).unwrap();
        for n in 0..3 {
            let (r1, r2) = (m.rate(&p1, n).unwrap(), m.rate(&p2, n).unwrap());
            prop_assert!((r1 - r2).abs() <= 1e-12 * r1.max(1.0));
        }
    }

    #[test]
    fn rate_is_homogeneous_in_power_and_noise(a in angles(), th in thetas(), s in -4.0..4.0f64) {
        let cfg = config(&a, 1.5, 4.0, 2);
        let scale = 10f64.powf(s);
        let mut scaled = cfg.clone();
        scaled.tx_power.iter_mut().for_each(|p| *p *= scale);
        scaled.noise_power *= scale;
        let ph = PhaseVector::new(&cfg, th).unwrap();
        for n in 0..3 {
            let r1 = closedform::rate_closed_form(&cfg, &ph, n).unwrap();
            let r2 = closedform::rate_closed_form(&scaled, &ph, n).unwrap();
            prop_assert!((r1 - r2).abs() <= 1e-12 * r1.max(1.0));
        }
    }

    #[test]
    fn moments_are_positive(a in angles(), th in thetas(), k in 0.0..8.0f64) {
        let cfg = config(&a, k, k, 1);
        let m = RateModel::new(&cfg).unwrap();
        let ph = PhaseVector::new(&cfg, th).unwrap();
        for n in 0..3 {
            let aux = m.aux_terms(&ph, n).unwrap();
            prop_assert!(aux.varpi > 0.0 && aux.xi > 0.0 && aux.eps > 0.0);
            let eta_ok = aux.eta.iter().enumerate().all(|(u, &e)| (u == n && e == 0.0) || (u != n && e > 0.0));
            prop_assert!(eta_ok);
            // E[X^2] >= E[X]^2 for X = |v_n|^2.
            prop_assert!(aux.varpi >= aux.eps * aux.eps * (1.0 - 1e-12));
        }
    }

    #[test]
    fn periodic_identities_hold(
        su in prop::collection::vec(0.01..1.0f64, 1..7),
        sb in prop::collection::vec(0.01..1.0f64, 1..7),
        t in 0usize..32,
    ) {
        let closed = closedform::periodic_sums_closed(&su, &sb);
        let brute = closedform::periodic_sums_brute_force(&su, &sb, 32, t);
        for (c, b) in closed.iter().zip(&brute) {
            prop_assert!((b - c * 32.0).norm() < 1e-9);
        }
    }

    #[test]
    fn soft_min_is_bounded_by_the_minimum(x in prop::collection::vec(0.0..100.0f64, 1..8), mu in 0.01..50.0f64) {
        let f = soft_min(&x, mu);
        let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let slack = (x.len() as f64).ln() / mu;
        prop_assert!(f <= min + 1e-9);
        prop_assert!(f >= min - slack - 1e-9);
    }

    #[test]
    fn wrapped_phase_is_in_range(x in -1e3..1e3f64) {
        let w = wrap_phase(x);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&w));
        prop_assert!((w.cos() - x.cos()).abs() < 1e-9 && (w.sin() - x.sin()).abs() < 1e-9);
    }

    #[test]
    fn dft_round_trip(x in cvec(16)) {
        let y = idft(&dft(&x));
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).norm() < 1e-12);
        }
        let e1: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let e2: f64 = dft(&x).iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((e1 - e2).abs() < 1e-10 * e1.max(1.0));
    }

    #[test]
    fn prefix_makes_linear_convolution_circular(h in cvec(4), s in cvec(12)) {
        let block = add_cyclic_prefix(&s, 3).unwrap();
        let mut lin = vec![Complex64::new(0.0, 0.0); block.len()];
        for (l, hl) in h.iter().enumerate() {
            for m in l..block.len() {
                lin[m] += hl * block[m - l];
            }
        }
        let got = remove_cyclic_prefix(&lin, 3);
        let mut padded = h.clone();
        padded.resize(s.len(), Complex64::new(0.0, 0.0));
        let want = cyclic_convolve(&padded, &s).unwrap();
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn bits_round_trip_through_text(b in 1u32..40) {
        let bits = Bits::Finite(b);
        prop_assert_eq!(bits.to_string().parse::<Bits>().unwrap(), bits);
    }
}
