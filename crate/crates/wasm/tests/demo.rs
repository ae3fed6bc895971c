use std::f64::consts::PI;

use billiard_core::BilliardProfile;
use billiard_wasm::{diverging, exponents, green_curve, nu_curve, ModeSet};

#[test]
fn rectangle_ground_state_is_the_product_of_sines() {
    let p = BilliardProfile::constant_rectangle(1.0, 1.0, 1.0).unwrap();
    let m = ModeSet::solve(p, 2, 48, 24).unwrap();
    assert_eq!(m.len(), 2);
    let exact = PI * PI * 1.25;
    assert!((m.energies()[0] - exact).abs() / exact < 0.01);

    let centre = m.value(0, 0.0, 0.5).unwrap();
    for (x, y) in [(-0.5, 0.25), (0.3, 0.8), (0.9, 0.1), (-0.95, 0.5)] {
        let want = ((x + 1.0) * PI / 2.0).sin() * (PI * y).sin();
        let got = m.value(0, x, y).unwrap() / centre;
        assert!((got - want).abs() < 1e-2, "({x}, {y}): {got} vs {want}");
    }
    assert!(m.value(0, 1.2, 0.5).is_none());
    assert!(m.value(0, 0.0, 1.1).is_none());
}

#[test]
fn stadium_image_masks_outside_the_wing() {
    let m = ModeSet::stadium(1.0, 2.0, 0.95, 3, 60, 20).unwrap();
    assert!(m.energies().windows(2).all(|w| w[0] <= w[1]));
    let w = 120;
    let h = m.height_for(w);
    assert_eq!(h, 41);
    let img = m.image(1, w);
    assert_eq!(img.len(), 4 * w * h);
    let alpha = |row: usize, col: usize| img[4 * (row * w + col) + 3];
    // Top right corner lies above the circular arc, bottom left inside the rectangle.
    assert_eq!(alpha(0, w - 1), 0);
    assert_eq!(alpha(h - 1, 0), 255);
    assert!(img.chunks(4).any(|p| p[3] == 255 && p[0] == 255 && p[1] < 128));
    assert!(img.chunks(4).any(|p| p[3] == 255 && p[2] == 255 && p[0] < 128));
}

#[test]
fn colour_map_is_symmetric() {
    assert_eq!(diverging(0.0), [255, 255, 255, 255]);
    assert_eq!(diverging(1.0), [255, 0, 0, 255]);
    assert_eq!(diverging(-1.0), [0, 0, 255, 255]);
    assert_eq!(diverging(7.0), diverging(1.0));
}

#[test]
fn green_curve_vanishes_at_the_ends_and_kinks_at_zero() {
    for z in [-25.0, -1.0, 0.0, 4.0] {
        let (b0, b) = (1.0, 0.2);
        let n = 24001;
        let (xs, ys, jump) = green_curve(z, b0, b, n).unwrap();
        assert!(ys[0].abs() < 1e-12 && ys[n - 1].abs() < 1e-12);
        let h = xs[1] - xs[0];
        let zero = xs.iter().position(|x| x.abs() < h / 2.0).unwrap();
        let left = (ys[zero] - ys[zero - 1]) / h;
        let right = (ys[zero + 1] - ys[zero]) / h;
        assert!(((right - left) - jump).abs() < 1e-2 * jump.abs().max(1.0), "z = {z}");
        // Closed form of the jump: minus sin(sqrt(z)(B0 + b))/sqrt(z), continued analytically.
        let l = b0 + b;
        let want = if z > 0.0 {
            -(z.sqrt() * l).sin() / z.sqrt()
        } else if z < 0.0 {
            -((-z).sqrt() * l).sinh() / (-z).sqrt()
        } else {
            -l
        };
        assert!((jump - want).abs() < 1e-12 * want.abs());
    }
    assert!(green_curve(1000.0, 1.0, 0.2, 10).is_err());
}

#[test]
fn exponents_are_exact_fractions() {
    let e = exponents(2.0, 0.0).unwrap();
    assert_eq!((e.alpha_large.as_str(), e.alpha_small.as_str(), e.rho.as_str()), ("1/3", "2/3", "5/6"));
    assert_eq!(exponents(2.0, 0.125).unwrap().rho, "1");
    assert_eq!(exponents(1.5, 0.0).unwrap().alpha_small, "1");
    assert!(exponents(1.2, 0.0).is_err());
}

#[test]
fn nu_curve_matches_a_lattice_scan() {
    let (l0, b0) = (1.0, 2.0);
    let c = nu_curve(l0, b0, 50.0, 800.0, 61, 0.0, 0.3).unwrap();
    assert_eq!(c.energies.len(), 61);
    for (e, nu) in c.energies.iter().zip(&c.nu) {
        let mut best = f64::INFINITY;
        for k in 1..60 {
            for l in 1..120 {
                let level = PI * PI * ((k * k) as f64 / (l0 * l0) + (l * l) as f64 / (b0 * b0));
                best = best.min((e - level).abs());
            }
        }
        assert!((nu - best).abs() <= 1e-12 * e, "E = {e}: {nu} vs {best}");
    }
    let inside = c.nu.iter().zip(&c.threshold).filter(|(n, t)| n >= t).count();
    assert!(inside as f64 >= 0.3 * 61.0);
    assert!(c.threshold.iter().all(|&t| t == c.c0));
    assert!(nu_curve(l0, b0, 10.0, 5.0, 10, 0.0, 0.3).is_err());
}
