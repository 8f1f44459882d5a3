//! Univariate and bivariate normal probabilities.
#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

use crate::error::{MosaicError, Result};

const TWO_PI: f64 = 2.0 * PI;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
#[inline]
pub fn phi_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `log Phi(x)`, accurate far into the lower tail.
pub fn log_phi_cdf(x: f64) -> f64 {
    if x > -30.0 {
        let v = phi_cdf(x);
        if x > 5.0 {
            // ln(1 - Q) with Q tiny
            return (-phi_cdf(-x)).ln_1p();
        }
        return v.ln();
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    // Asymptotic Mills-ratio expansion.
    let z2 = 1.0 / (x * x);
    let series = 1.0 - z2 + 3.0 * z2 * z2 - 15.0 * z2 * z2 * z2 + 105.0 * z2.powi(4);
    -0.5 * x * x - (-x).ln() - LN_SQRT_2PI + series.ln()
}

/// `log(Phi(b) - Phi(a))` for `a < b`, computed on whichever tail keeps the
/// difference well conditioned.
pub fn log_phi_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return f64::NEG_INFINITY;
    }
    // Reflect so the interval sits in the lower half.
    let (a, b) = if a + b > 0.0 { (-b, -a) } else { (a, b) };
    let lb = log_phi_cdf(b);
    if a == f64::NEG_INFINITY {
        return lb;
    }
    let la = log_phi_cdf(a);
    lb + (-(la - lb).exp()).ln_1p()
}

// Gauss-Legendre half-rules on (-1, 0) used by the Drezner-Wesolowsky/Genz
// method: (weight, node).
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705e+00, -0.9324695142031522e+00),
    (0.3607615730481384e+00, -0.6612093864662647e+00),
    (0.4679139345726904e+00, -0.2386191860831970e+00),
];

const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, -0.9815606342467191e+00),
    (0.1069393259953183e+00, -0.9041172563704750e+00),
    (0.1600783285433464e+00, -0.7699026741943050e+00),
    (0.2031674267230659e+00, -0.5873179542866171e+00),
    (0.2334925365383547e+00, -0.3678314989981802e+00),
    (0.2491470458134029e+00, -0.1252334085114692e+00),
];

const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

/// Upper orthant probability `P(X > h, Y > k)` for a standard bivariate normal
/// with correlation `r`, following Genz's double-precision refinement of the
/// Drezner-Wesolowsky method. Finite `h`, `k` and `|r| <= 1`.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for &(w, x) in rule {
            for sign in [-1.0, 1.0] {
                let sn = (asr * (sign * x + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (2.0 * TWO_PI) + phi_cdf(-h) * phi_cdf(-k);
        return bvn;
    }

    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(b_s / a_s + hk) / 2.0).exp()
            * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        if hk > -160.0 {
            let b = b_s.sqrt();
            bvn -= (-hk / 2.0).exp()
                * TWO_PI.sqrt()
                * phi_cdf(-b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a /= 2.0;
        for &(w, x) in rule {
            for sign in [-1.0, 1.0] {
                let xs = (a * (sign * x + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let asr = -(b_s / xs + hk) / 2.0;
                if asr > -100.0 {
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * xs / (2.0 * (1.0 + rs).powi(2))).exp() / rs
                            - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / TWO_PI;
    }
    if r > 0.0 {
        bvn += phi_cdf(-h.max(k));
    } else {
        bvn = -bvn;
        if k > h {
            if h < 0.0 {
                bvn += phi_cdf(k) - phi_cdf(h);
            } else {
                bvn += phi_cdf(-h) - phi_cdf(-k);
            }
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// `P(X <= x, Y <= y)` for a standard bivariate normal, infinite limits
/// allowed.
pub fn bvn_cdf(x: f64, y: f64, r: f64) -> f64 {
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return phi_cdf(y);
    }
    if y == f64::INFINITY {
        return phi_cdf(x);
    }
    bvn_upper(-x, -y, r)
}

/// Probability that a bivariate normal vector falls in the rectangle
/// `[lower, upper]`.
pub fn bvn_rect(lower: [f64; 2], upper: [f64; 2], mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<f64> {
    let (v1, v2) = (cov[0][0], cov[1][1]);
    if !(v1 > 0.0 && v2 > 0.0) || cov[0][1] != cov[1][0] {
        return Err(MosaicError::InvalidInput(
            "covariance must be symmetric with positive variances".into(),
        ));
    }
    let (sd1, sd2) = (v1.sqrt(), v2.sqrt());
    let r = cov[0][1] / (sd1 * sd2);
    if !(r.abs() < 1.0 - 1e-12) {
        return Err(MosaicError::DegenerateCovariance(r));
    }
    let a = [(lower[0] - mean[0]) / sd1, (lower[1] - mean[1]) / sd2];
    let b = [(upper[0] - mean[0]) / sd1, (upper[1] - mean[1]) / sd2];
    Ok(std_bvn_rect(a, b, r))
}

/// Rectangle probability for a standardized pair with correlation `r`.
///
/// Each axis is reflected, if needed, so its interval lies mostly below zero;
/// the four CDF terms are then small and the inclusion-exclusion keeps its
/// absolute accuracy without cancelling near one.
pub fn std_bvn_rect(mut a: [f64; 2], mut b: [f64; 2], mut r: f64) -> f64 {
    for i in 0..2 {
        if a[i] >= b[i] {
            return 0.0;
        }
        if a[i] + b[i] > 0.0 {
            let (na, nb) = (-b[i], -a[i]);
            a[i] = na;
            b[i] = nb;
            r = -r;
        }
    }
    let p = bvn_cdf(b[0], b[1], r) - bvn_cdf(a[0], b[1], r) - bvn_cdf(b[0], a[1], r)
        + bvn_cdf(a[0], a[1], r);
    p.clamp(0.0, 1.0)
}
