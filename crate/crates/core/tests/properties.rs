use std::f64::consts::PI;

use billiard_core::bounds::{alpha_large, alpha_small, b_values, rho, to_f64};
use billiard_core::discretize::{CacheHeader, EigenCache, EigenPair, Spectrum};
use billiard_core::export::fmt15;
use billiard_core::onedim::green_g;
use billiard_core::resonance::{choose_c0, nu, step_ratio};
use billiard_core::BilliardProfile;
use num_rational::Ratio;
use proptest::prelude::*;

fn gamma_eps() -> impl Strategy<Value = (Ratio<i64>, Ratio<i64>)> {
    (3i64..=24, 1i64..=4, 0i64..=8).prop_map(|(n, d, e)| {
        let g = Ratio::new(n, d).max(Ratio::new(3, 2));
        (g, Ratio::new(e, 16))
    })
}

fn lattice_distance(e: f64, l0: f64, b0: f64) -> f64 {
    let mut best = f64::INFINITY;
    let kmax = (e.sqrt() * l0 / PI) as u64 + 3;
    let lmax = (e.sqrt() * b0 / PI) as u64 + 3;
    for k in 1..=kmax {
        for l in 1..=lmax {
            let lev = (k * k) as f64 * PI * PI / (l0 * l0) + (l * l) as f64 * PI * PI / (b0 * b0);
            best = best.min((e - lev).abs());
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rho_is_the_midpoint_identity((g, e) in gamma_eps()) {
        let one = Ratio::from_integer(1);
        let two = Ratio::from_integer(2);
        prop_assert_eq!(alpha_large(g).unwrap(), one / (two * g - one));
        let a = alpha_small(g, e).unwrap();
        prop_assert!(a >= alpha_large(g).unwrap());
        prop_assert_eq!(rho(g, e).unwrap(), (one + two * e + a) / two);
    }

    #[test]
    fn b_values_undo_the_power(energy in 10.0f64..1e5, ml in 0.1f64..4.0, ms in 0.1f64..4.0) {
        let (g, e) = (Ratio::new(2, 1), Ratio::new(1, 16));
        let (bl, bs) = b_values(energy, g, e, ml, ms).unwrap();
        let al = to_f64(alpha_large(g).unwrap());
        let as_ = to_f64(alpha_small(g, e).unwrap());
        prop_assert!((bl * energy.powf(al) / ml - 1.0).abs() < 1e-12);
        prop_assert!((bs * energy.powf(as_) / ms - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nu_is_the_lattice_distance(e in 1.0f64..5000.0, l0 in 0.5f64..2.0, b0 in 0.5f64..3.0) {
        let n = nu(e, l0, b0).unwrap();
        prop_assert!(n.value >= 0.0);
        prop_assert_eq!(n.value, lattice_distance(e, l0, b0));
        let lev = (n.k * n.k) as f64 * PI * PI / (l0 * l0) + (n.l * n.l) as f64 * PI * PI / (b0 * b0);
        prop_assert_eq!((e - lev).abs(), n.value);
    }

    #[test]
    fn c0_keeps_the_requested_share(nus in prop::collection::vec(0.001f64..50.0, 1..200), fraction in 0.05f64..1.0) {
        let c0 = choose_c0(&nus, fraction).unwrap();
        let kept = nus.iter().filter(|&&v| v >= c0).count();
        prop_assert!(kept as f64 >= fraction * nus.len() as f64);
        if let Some(next) = nus.iter().copied().filter(|&v| v > c0).reduce(f64::min) {
            let fewer = nus.iter().filter(|&&v| v >= next).count();
            prop_assert!((fewer as f64) < fraction * nus.len() as f64);
        }
    }

    #[test]
    fn nearest_multiple_is_within_half_a_step(lambda in 1e-3f64..1e3, alpha in 0.1f64..10.0) {
        let f = step_ratio(lambda, alpha).unwrap();
        let l = (f - 1.0) * lambda / alpha;
        prop_assert!((l - l.round()).abs() < 1e-6);
        prop_assert!((lambda - l.round() * alpha).abs() <= alpha / 2.0 + 1e-9);
        prop_assert!(f >= 1.0);
    }

    #[test]
    fn fmt15_has_fifteen_digits(x in prop::num::f64::NORMAL) {
        let s = fmt15(x);
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
        prop_assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 15);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-14 * x.abs());
    }

    #[test]
    fn green_function_is_continuous(z in -400.0f64..50.0, b0 in 0.2f64..3.0, b in 0.01f64..0.4) {
        let g = green_g(z, b0, b).unwrap();
        let (l, r) = (g.eval(-1e-300), g.eval(0.0));
        prop_assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()).max(1e-300));
        prop_assert!(g.eval(-b0).abs() <= 1e-12 * r.abs().max(1.0));
        prop_assert!(g.eval(b).abs() <= 1e-12 * r.abs().max(1.0));
    }

    #[test]
    fn stadium_width_is_flat_then_decreasing(frac in 0.51f64..0.99, b0 in 0.5f64..3.0, xs in prop::collection::vec(0.0f64..1.0, 2)) {
        let p = BilliardProfile::truncated_quarter_stadium(1.0, b0, frac).unwrap();
        prop_assert_eq!(p.width(-b0 * xs[0]), 1.0);
        let (a, c) = (xs[0].min(xs[1]) * p.b1, xs[0].max(xs[1]) * p.b1);
        prop_assert!(p.width(a) >= p.width(c));
        prop_assert!((p.width(c) - (1.0 - c * c).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cache_round_trip_is_bit_exact(energies in prop::collection::vec(1.0f64..1e4, 1..6), seed in any::<u64>()) {
        let dofs = 5;
        let pairs: Vec<EigenPair> = energies
            .iter()
            .enumerate()
            .map(|(i, &e)| EigenPair {
                index: i,
                energy: e,
                residual: e.fract() * 1e-9,
                vector: (0..dofs).map(|j| ((seed ^ (i * 31 + j) as u64) as f64).sin()).collect(),
            })
            .collect();
        let spectrum = Spectrum { pairs, below: 0, window: (0.5, 2e4), clusters: vec![], factorizations: 0 };
        let header = CacheHeader {
            profile: vec![("kind".into(), "constant-rectangle".into())],
            ns: 8, nt: 8, dofs, residual_tol: 1e-8, ritz_tol: 1e-12, seed,
        };
        let mut c = EigenCache::new(header);
        let shifts: Vec<Option<f64>> = energies.iter().map(|e| (e.fract() > 0.5).then_some(e / 7.0)).collect();
        c.insert(&spectrum, &shifts);
        let back = EigenCache::from_bytes(&c.to_bytes()).unwrap();
        for (a, b) in c.pairs().zip(back.pairs()) {
            prop_assert_eq!(a.pair.energy.to_bits(), b.pair.energy.to_bits());
            prop_assert_eq!(a.pair.residual.to_bits(), b.pair.residual.to_bits());
            prop_assert_eq!(a.shift.map(f64::to_bits), b.shift.map(f64::to_bits));
            prop_assert_eq!(&a.pair.vector, &b.pair.vector);
        }
        prop_assert_eq!(back.to_bytes(), c.to_bytes());
    }
}
