//! Scalar minimization of Chernoff-type objectives over `h >= 0`.

/// Golden ratio conjugate, `(sqrt 5 - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;
/// Largest `h` considered; objectives that keep decreasing are cut here.
pub const H_CAP: f64 = 1e12;
/// Target width of the final bracket, relative to `max(1, h)`.
pub const H_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 32;

/// Minimizes `f` on `[0, inf)` starting from the bracket `[0, h_init]`.
///
/// The bracket is doubled until `f(hi) > f(hi / 2)`, scanned coarsely, and
/// the best coarse cell refined by golden-section search. Returns
/// `(h, f(h))`; the reported value is never worse than `f(0)`.
pub fn minimize_nonneg<F: Fn(f64) -> f64>(f: F, h_init: f64) -> (f64, f64) {
    let mut hi = if h_init.is_finite() {
        h_init.clamp(1e-3, H_CAP)
    } else {
        H_CAP
    };
    let mut f_hi = f(hi);
    while hi < H_CAP {
        let f_half = f(0.5 * hi);
        if f_hi > f_half {
            break;
        }
        hi = (2.0 * hi).min(H_CAP);
        f_hi = f(hi);
    }

    let mut best = (0.0, f(0.0));
    let mut best_idx = 0;
    for i in 1..=SCAN_POINTS {
        let x = hi * i as f64 / SCAN_POINTS as f64;
        let fx = if i == SCAN_POINTS { f_hi } else { f(x) };
        if fx < best.1 {
            best = (x, fx);
            best_idx = i;
        }
    }
    let step = hi / SCAN_POINTS as f64;
    let lo = step * best_idx.saturating_sub(1) as f64;
    let up = (step * (best_idx + 1) as f64).min(hi);

    let refined = golden_section(&f, lo, up);
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if (b - a) <= H_TOL * b.abs().max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
