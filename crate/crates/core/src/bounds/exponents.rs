//! Exact exponent arithmetic for the wing-to-billiard mass bound.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{param, Error, Result};

pub type Exponent = Ratio<i64>;

fn r(n: i64, d: i64) -> Exponent {
    Ratio::new(n, d)
}

/// Rational form of a profile exponent such as `2.0` or `1.5`.
pub fn exponent_from_f64(x: f64) -> Result<Exponent> {
    let q = Ratio::<i64>::approximate_float(x).ok_or_else(|| Error::Parameter(format!("{x} has no rational form")))?;
    if (q.to_f64().unwrap_or(f64::NAN) - x).abs() > 1e-12 * x.abs().max(1.0) {
        return param(format!("{x} is not a short rational"));
    }
    Ok(q)
}

pub fn to_f64(q: Exponent) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn check_gamma(gamma: Exponent) -> Result<()> {
    if gamma < r(3, 2) {
        return param(format!("gamma = {gamma} is below 3/2"));
    }
    Ok(())
}

fn check_eps(eps: Exponent) -> Result<()> {
    if eps < Exponent::zero() {
        return param(format!("eps = {eps} is negative"));
    }
    Ok(())
}

/// `1 / (2 gamma - 1)`.
pub fn alpha_large(gamma: Exponent) -> Result<Exponent> {
    check_gamma(gamma)?;
    Ok((gamma * 2 - 1).recip())
}

/// `max((3 + 2 eps)/(2 gamma + 1), (2 + 2 eps)/(2 gamma - 1))`.
pub fn alpha_small(gamma: Exponent, eps: Exponent) -> Result<Exponent> {
    check_gamma(gamma)?;
    check_eps(eps)?;
    let a = (eps * 2 + 3) / (gamma * 2 + 1);
    let b = (eps * 2 + 2) / (gamma * 2 - 1);
    Ok(a.max(b))
}

/// `max((2 + gamma + 2(gamma + 1) eps)/(2 gamma + 1), (1 + 2 gamma + 4 gamma eps)/(4 gamma - 2))`,
/// cross-checked against `(1 + 2 eps + alpha_small) / 2`.
pub fn rho(gamma: Exponent, eps: Exponent) -> Result<Exponent> {
    let small = alpha_small(gamma, eps)?;
    let a = (gamma + 2 + (gamma + 1) * eps * 2) / (gamma * 2 + 1);
    let b = (gamma * 2 + 1 + gamma * eps * 4) / (gamma * 4 - 2);
    let rho = a.max(b);
    let via_alpha = (eps * 2 + 1 + small) / 2;
    if rho != via_alpha {
        return Err(Error::Consistency(format!("rho = {rho} but (1 + 2 eps + alpha_small)/2 = {via_alpha}")));
    }
    // the small-mode exponent always dominates the large-mode one
    if eps * 2 + 1 + small <= alpha_large(gamma)? {
        return Err(Error::Consistency(format!("small-mode exponent does not dominate at gamma = {gamma}")));
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        assert_eq!(alpha_large(r(2, 1)).unwrap(), r(1, 3));
        assert_eq!(alpha_large(r(3, 2)).unwrap(), r(1, 2));
        assert_eq!(alpha_large(r(3, 1)).unwrap(), r(1, 5));
        assert_eq!(alpha_small(r(2, 1), r(0, 1)).unwrap(), r(2, 3));
        assert_eq!(alpha_small(r(2, 1), r(1, 8)).unwrap(), r(3, 4));
        assert_eq!(alpha_small(r(3, 2), r(0, 1)).unwrap(), r(1, 1));
        assert_eq!(rho(r(2, 1), r(0, 1)).unwrap(), r(5, 6));
        assert_eq!(rho(r(2, 1), r(1, 8)).unwrap(), r(1, 1));
        assert_eq!(rho(r(3, 2), r(0, 1)).unwrap(), r(1, 1));
    }

    #[test]
    fn stadium_exponent_is_linear_in_eps() {
        for eps in [r(0, 1), r(1, 16), r(1, 8)] {
            assert_eq!(rho(r(2, 1), eps).unwrap(), (eps * 8 + 5) / 6);
        }
    }

    #[test]
    fn monotone_on_the_lattice() {
        let gammas = [r(3, 2), r(2, 1), r(3, 1)];
        let epss = [r(0, 1), r(1, 16), r(1, 8)];
        for g in gammas {
            for w in epss.windows(2) {
                assert!(rho(g, w[0]).unwrap() <= rho(g, w[1]).unwrap());
            }
        }
        for e in epss {
            for w in gammas.windows(2) {
                assert!(rho(w[0], e).unwrap() >= rho(w[1], e).unwrap());
            }
        }
    }

    #[test]
    fn preconditions_and_conversion() {
        assert!(alpha_large(r(7, 5)).is_err());
        assert!(alpha_small(r(2, 1), r(-1, 8)).is_err());
        assert_eq!(exponent_from_f64(2.0).unwrap(), r(2, 1));
        assert_eq!(exponent_from_f64(1.5).unwrap(), r(3, 2));
        assert_eq!(exponent_from_f64(0.0625).unwrap(), r(1, 16));
    }
}
