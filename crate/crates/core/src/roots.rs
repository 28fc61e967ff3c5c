//! Bracketed scalar root finding.

/// Outcome of a bracketed search: the final bracket and the better endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    /// Endpoint on the side of the original `a` (where `f` has the sign of `f(a)`).
    pub lo: f64,
    /// Endpoint on the side of the original `b`.
    pub hi: f64,
    /// Endpoint with the smaller residual.
    pub root: f64,
    pub residual: f64,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        libm::fabs(self.hi - self.lo)
    }
}

/// Brent's method on `[a, b]` given `fa = f(a)`, `fb = f(b)` of opposite sign.
///
/// Stops when the bracket is narrower than `xtol` or `|f| ≤ ftol`. The
/// returned bracket keeps track of which end carries the sign of `fa`, so
/// callers can pick the point just before a sign change.
pub fn brent<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, xtol: f64, ftol: f64) -> Bracket
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(fa * fb <= 0.0, "brent needs a sign change");
    let sign_a = fa > 0.0;
    if fa == 0.0 {
        return Bracket { lo: a, hi: a, root: a, residual: 0.0 };
    }
    if fb == 0.0 {
        return Bracket { lo: b, hi: b, root: b, residual: 0.0 };
    }

    // Classic formulation: b is the best estimate, [b, c] brackets the root.
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if libm::fabs(fc) < libm::fabs(fb) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * libm::fabs(b) + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if libm::fabs(m) <= tol || fb == 0.0 || libm::fabs(fb) <= ftol {
            break;
        }
        if libm::fabs(e) >= tol && libm::fabs(fa) > libm::fabs(fb) {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                // secant
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                // inverse quadratic interpolation
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < libm::fmin(3.0 * m * q - libm::fabs(tol * q), libm::fabs(e * q)) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if libm::fabs(d) > tol {
            d
        } else if m > 0.0 {
            tol
        } else {
            -tol
        };
        fb = f(b);
    }

    let (lo, hi) = if fb == 0.0 {
        (b, b)
    } else if (fb > 0.0) == sign_a {
        (b, c)
    } else {
        (c, b)
    };
    Bracket { lo, hi, root: b, residual: fb }
}
