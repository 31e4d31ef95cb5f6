//! Normal-approximation confidence intervals on the original, log, and
//! square-root scales.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which standard error backs the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    Delta,
    DeltaPlus,
    Jab,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Naive, Method::Delta, Method::DeltaPlus, Method::Jab];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Naive => "naive",
            Method::Delta => "delta",
            Method::DeltaPlus => "delta_plus",
            Method::Jab => "jab",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Method::Naive),
            "delta" => Ok(Method::Delta),
            "delta_plus" => Ok(Method::DeltaPlus),
            "jab" => Ok(Method::Jab),
            _ => Err(Error::Input(format!(
                "unknown method {s:?}; expected naive, delta, delta_plus, or jab"
            ))),
        }
    }
}

/// Monotone rescaling applied before the normal interval is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Log,
    Sqrt,
}

impl Transform {
    pub const ALL: [Transform; 3] = [Transform::Identity, Transform::Log, Transform::Sqrt];
}

impl std::fmt::Display for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Transform::Identity => "identity",
            Transform::Log => "log",
            Transform::Sqrt => "sqrt",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Transform::Identity),
            "log" => Ok(Transform::Log),
            "sqrt" => Ok(Transform::Sqrt),
            _ => Err(Error::Input(format!(
                "unknown transform {s:?}; expected identity, log, or sqrt"
            ))),
        }
    }
}

/// A two-sided interval for the generalization error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConfidenceInterval<F> {
    pub lo: F,
    pub hi: F,
    pub alpha: F,
    pub method: Method,
    pub transform: Transform,
}

impl<F: Real> ConfidenceInterval<F> {
    pub fn width(&self) -> F {
        self.hi - self.lo
    }

    pub fn covers(&self, truth: F) -> bool {
        self.lo <= truth && truth <= self.hi
    }
}

/// Inverse standard normal CDF.
///
/// Wichura's rational approximations (the PPND16 scheme): three regimes
/// split on |q - 1/2| and sqrt(-log(min(q, 1-q))), each a degree-7 rational.
/// Absolute error is far below the 1e-8 the interval contract asks for, and
/// the function is self-contained so golden tests are bit-stable across
/// platforms.
pub fn normal_quantile<F: Real>(q: F) -> Result<F> {
    let qf = q.to_f64().ok_or_else(|| Error::Input("quantile not representable".into()))?;
    if !(0.0 < qf && qf < 1.0) {
        return Err(Error::Input(format!(
            "normal quantile needs q in (0, 1), got {qf}"
        )));
    }
    Ok(F::from_f64_lossy(ppnd16(qf)))
}

fn ppnd16(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.3871328727963666080e0,
        1.3314166789178437745e2,
        1.9715909503065514427e3,
        1.3731693765509461125e4,
        4.5921953931549871457e4,
        6.7265770927008700853e4,
        3.3430575583588128105e4,
        2.5090809287301226727e3,
    ];
    const B: [f64; 7] = [
        4.2313330701600911252e1,
        6.8718700749205790830e2,
        5.3941960214247511077e3,
        2.1213794301586595867e4,
        3.9307895800092710610e4,
        2.8729085735721942674e4,
        5.2264952788528545610e3,
    ];
    const C: [f64; 8] = [
        1.42343711074968357734e0,
        4.63033784615654529590e0,
        5.76949722146069140550e0,
        3.64784832476320460504e0,
        1.27045825245236838258e0,
        2.41780725177450611770e-1,
        2.27238449892691845833e-2,
        7.74545014278341407640e-4,
    ];
    const D: [f64; 7] = [
        2.05319162663775882187e0,
        1.67638483018380384940e0,
        6.89767334985100004550e-1,
        1.48103976427480074590e-1,
        1.51986665636164571966e-2,
        5.47593808499534494600e-4,
        1.05075007164441684324e-9,
    ];
    const E: [f64; 8] = [
        6.65790464350110377720e0,
        5.46378491116411436990e0,
        1.78482653991729133580e0,
        2.96560571828504891230e-1,
        2.65321895265761230930e-2,
        1.24266094738807843860e-3,
        2.71155556874348757815e-5,
        2.01033439929228813265e-7,
    ];
    const F_: [f64; 7] = [
        5.99832206555887937690e-1,
        1.36929880922735805310e-1,
        1.48753612908506148525e-2,
        7.86869131145613259100e-4,
        1.84631831751005468180e-5,
        1.42151175831644588870e-7,
        2.04426310338993978564e-15,
    ];

    let rational = |num: &[f64; 8], den: &[f64; 7], r: f64| -> f64 {
        let n = num
            .iter()
            .rev()
            .fold(0.0, |acc, &coef| acc * r + coef);
        let d = den.iter().rev().fold(0.0, |acc, &coef| acc * r + coef);
        n / (d * r + 1.0)
    };

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * rational(&A, &B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        rational(&C, &D, r)
    } else {
        r -= 5.0;
        rational(&E, &F_, r)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Build a normal interval for the error on the requested scale.
///
/// Identity: err -/+ z se. Log: exp(log(err) -/+ z se / err). Sqrt:
/// (sqrt(err) -/+ z se / (2 sqrt(err)))^2, with the lower pre-square
/// endpoint clamped at 0 so the interval cannot fold back over itself.
/// z is the (1 - alpha/2) normal quantile.
pub fn build_interval<F: Real>(
    err: F,
    se: F,
    alpha: F,
    method: Method,
    transform: Transform,
) -> Result<ConfidenceInterval<F>> {
    if se < F::zero() || !se.is_finite() {
        return Err(Error::Input(format!("standard error must be >= 0, got {se}")));
    }
    if err < F::zero() || !err.is_finite() {
        return Err(Error::Input(format!("error estimate must be >= 0, got {err}")));
    }
    let two = F::from_f64_lossy(2.0);
    let z = normal_quantile(F::one() - alpha / two)?;
    let (lo, hi) = match transform {
        Transform::Identity => (err - z * se, err + z * se),
        Transform::Log => {
            if err <= F::zero() {
                return Err(Error::Transform(
                    "log-scale interval needs a strictly positive error estimate".into(),
                ));
            }
            let shift = z * se / err;
            ((err.ln() - shift).exp(), (err.ln() + shift).exp())
        }
        Transform::Sqrt => {
            if err == F::zero() && se > F::zero() {
                return Err(Error::Transform(
                    "sqrt-scale interval needs a positive error estimate when se > 0".into(),
                ));
            }
            if err == F::zero() {
                (F::zero(), F::zero())
            } else {
                let root = err.sqrt();
                let shift = z * se / (two * root);
                let lo_root = (root - shift).max(F::zero());
                let hi_root = root + shift;
                (lo_root * lo_root, hi_root * hi_root)
            }
        }
    };
    Ok(ConfidenceInterval {
        lo,
        hi,
        alpha,
        method,
        transform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference values computed with a 40-digit erfinv evaluation.
    const PPF_ORACLE: &[(f64, f64)] = &[
        (1e-9, -5.997807015007686871562),
        (1e-6, -4.753424308822898948194),
        (0.001, -3.09023230616781354154),
        (0.01, -2.326347874040841100886),
        (0.025, -1.959963984540054235525),
        (0.05, -1.644853626951472714864),
        (0.1, -1.281551565544600466965),
        (0.25, -0.6744897501960817432022),
        (0.4, -0.2533471031357997987982),
        (0.5, 0.0),
        (0.6, 0.2533471031357997987982),
        (0.75, 0.6744897501960817432022),
        (0.9, 1.281551565544600466965),
        (0.95, 1.644853626951472714864),
        (0.975, 1.959963984540054235525),
        (0.99, 2.326347874040841100886),
        (0.999, 3.09023230616781354154),
        (0.999999, 4.753424308822898948194),
        (0.999999999, 5.997807015007686871562),
    ];

    #[test]
    fn quantile_matches_the_oracle_table() {
        for &(q, expected) in PPF_ORACLE {
            let got: f64 = normal_quantile(q).unwrap();
            assert!(
                (got - expected).abs() <= 1e-8,
                "q={q}: got {got}, oracle {expected}"
            );
        }
        assert_eq!(normal_quantile(0.5f64).unwrap(), 0.0);
        assert!((normal_quantile(0.95f64).unwrap() - 1.6449).abs() < 1e-4);
        assert!((normal_quantile(0.975f64).unwrap() - 1.9600).abs() < 1e-4);
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        for bad in [0.0f64, 1.0, -0.1, 1.1] {
            assert!(normal_quantile(bad).is_err());
        }
    }

    #[test]
    fn zero_se_degenerates_to_a_point() {
        for transform in Transform::ALL {
            let ci = build_interval(2.0f64, 0.0, 0.1, Method::Naive, transform).unwrap();
            assert!((ci.lo - 2.0).abs() < 1e-12);
            assert!((ci.hi - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_interval_hand_case() {
        let ci = build_interval(10.0f64, 1.0, 0.10, Method::Naive, Transform::Identity).unwrap();
        assert!((ci.lo - 8.355).abs() < 1e-3);
        assert!((ci.hi - 11.645).abs() < 1e-3);
    }

    #[test]
    fn log_interval_hand_case() {
        let ci = build_interval(1.0f64, 0.5, 0.10, Method::Delta, Transform::Log).unwrap();
        assert!((ci.lo - 0.4394).abs() < 1e-3, "lo = {}", ci.lo);
        assert!((ci.hi - 2.2762).abs() < 1e-3, "hi = {}", ci.hi);
        // Log-scale symmetry around err = 1.
        assert!((ci.lo * ci.hi - 1.0).abs() < 1e-10);
    }

    #[test]
    fn log_needs_positive_err() {
        assert!(matches!(
            build_interval(0.0f64, 1.0, 0.1, Method::Naive, Transform::Log),
            Err(Error::Transform(_))
        ));
    }

    #[test]
    fn negative_se_is_rejected() {
        assert!(matches!(
            build_interval(1.0f64, -0.5, 0.1, Method::Naive, Transform::Identity),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn sqrt_lower_endpoint_clamps_at_zero() {
        // Large se relative to err: the pre-square endpoint would go
        // negative; it is clamped so the interval is [0, hi].
        let ci = build_interval(0.01f64, 10.0, 0.10, Method::Jab, Transform::Sqrt).unwrap();
        assert_eq!(ci.lo, 0.0);
        assert!(ci.hi > 0.01);
    }

    #[test]
    fn transformed_intervals_contain_the_estimate() {
        for transform in Transform::ALL {
            for (err, se) in [(0.5f64, 0.1), (2.0, 1.5), (10.0, 0.01)] {
                let ci = build_interval(err, se, 0.1, Method::Delta, transform).unwrap();
                assert!(ci.lo <= err && err <= ci.hi, "{transform}: {ci:?}");
            }
        }
    }

    #[test]
    fn widths_agree_to_first_order_as_se_vanishes() {
        let err = 3.0f64;
        let z = normal_quantile(0.95f64).unwrap();
        for transform in Transform::ALL {
            let se = 1e-7;
            let ci = build_interval(err, se, 0.10, Method::Naive, transform).unwrap();
            let ratio = ci.width() / (2.0 * z * se);
            assert!(
                (ratio - 1.0).abs() < 1e-5,
                "{transform}: first-order width ratio {ratio}"
            );
        }
    }

    #[test]
    fn intervals_nest_in_alpha() {
        for transform in Transform::ALL {
            let wide = build_interval(5.0f64, 1.0, 0.05, Method::Naive, transform).unwrap();
            let narrow = build_interval(5.0f64, 1.0, 0.20, Method::Naive, transform).unwrap();
            assert!(wide.lo <= narrow.lo && narrow.hi <= wide.hi);
        }
    }
}
