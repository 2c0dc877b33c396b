//! Small numeric utilities shared across estimators: quadrature, root
//! finding, quantiles, rank correlation, dense solves for tiny systems, and
//! seed derivation for reproducible substreams.

use std::sync::OnceLock;

use crate::{Error, Result};

// ── Quadrature ──────────────────────────────────────────────────────────────

/// Nodes and weights of the 64-point Gauss-Legendre rule on [-1, 1].
///
/// Computed once by Newton iteration on the Legendre recurrence; accurate to
/// machine precision for polynomial degree up to 127.
pub fn gauss_legendre_64() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| gauss_legendre_nodes(64))
}

fn gauss_legendre_nodes(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre polynomial P_n(x) and derivative by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((-x, w));
    }
    // Mirror to the full symmetric rule.
    for i in (0..n - m).rev() {
        let (x, w) = out[i];
        out.push((-x, w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Integrate `f` over `[a, b]` with the fixed 64-point Gauss-Legendre rule.
pub fn integrate_gl64(mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut sum = 0.0;
    for &(x, w) in gauss_legendre_64() {
        sum += w * f(c + h * x);
    }
    sum * h
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
///
/// Fails with a diagnostic if the recursion depth is exhausted before the
/// error estimate drops below tolerance.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::NonConvergence(format!(
            "adaptive quadrature failed on [{a}, {b}]: residual {:.3e} above tolerance {:.3e}",
            delta.abs() / 15.0,
            tol
        )));
    }
    let lv = simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let rv = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(lv + rv)
}

// ── Root finding ────────────────────────────────────────────────────────────

/// Bisection for a root of monotone `f` bracketed by `[lo, hi]`.
///
/// Stops when `|f(x)| < f_tol` or the bracket width shrinks below `x_tol`.
pub fn bisect(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    f_tol: f64,
    x_tol: f64,
) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Estimation(format!(
            "root not bracketed by [{lo}, {hi}]: f(lo)={flo:.3e}, f(hi)={fhi:.3e}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid.abs() < f_tol || hi - lo < x_tol {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ── Order statistics ────────────────────────────────────────────────────────

/// Quantile by linear interpolation between order statistics.
///
/// For `p` in [0, 1] on `n` sorted values the rank is `(n-1)p`; fractional
/// ranks interpolate linearly (the common "type 7" definition).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&p), "quantile level outside [0, 1]");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Quantile of an unsorted slice; see [`quantile_sorted`].
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Mean of a slice.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n-1 denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    (values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

// ── Rank correlation ────────────────────────────────────────────────────────

/// Sample Kendall's tau between two continuous sequences.
///
/// Computed as `1 - 4 D / (n (n-1))` where `D` is the number of discordant
/// pairs, counted in O(n log n) by merge-sort inversion counting after
/// ordering by the first sequence. Ties (measure zero for continuous data)
/// count toward neither side.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    assert!(n >= 2, "kendall_tau needs at least two points");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(ys[a].total_cmp(&ys[b])));
    let mut seq: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let mut buf = vec![0.0; n];
    let inversions = merge_count(&mut seq, &mut buf);
    1.0 - 4.0 * inversions as f64 / (n as f64 * (n - 1) as f64)
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n <= 1 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = v.split_at_mut(mid);
    let mut inv = merge_count(left, &mut buf[..mid]) + merge_count(right, &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            buf[k] = left[i];
            i += 1;
        } else {
            buf[k] = right[j];
            inv += (left.len() - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + left.len() - i].copy_from_slice(&left[i..]);
    buf[k + left.len() - i..n].copy_from_slice(&right[j..]);
    v.copy_from_slice(&buf[..n]);
    inv
}

// ── Tiny dense linear algebra ───────────────────────────────────────────────

/// Solve `A x = b` for a small row-major `n x n` system with partial pivoting.
pub fn solve_linear(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let pivot_floor = (scale * 1e-13).max(f64::MIN_POSITIVE);
    let mut aug = vec![0.0; n * (n + 1)];
    for i in 0..n {
        aug[i * (n + 1)..i * (n + 1) + n].copy_from_slice(&a[i * n..(i + 1) * n]);
        aug[i * (n + 1) + n] = b[i];
    }
    let cols = n + 1;
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = aug[col * cols + col].abs();
        for row in col + 1..n {
            let v = aug[row * cols + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val < pivot_floor {
            return Err(Error::Estimation(
                "singular matrix in linear solve".to_string(),
            ));
        }
        if pivot_row != col {
            for j in 0..cols {
                aug.swap(col * cols + j, pivot_row * cols + j);
            }
        }
        let pivot = aug[col * cols + col];
        for row in col + 1..n {
            let factor = aug[row * cols + col] / pivot;
            for j in col..cols {
                let upper = aug[col * cols + j];
                aug[row * cols + j] -= factor * upper;
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = aug[i * cols + n];
        for j in i + 1..n {
            sum -= aug[i * cols + j] * x[j];
        }
        x[i] = sum / aug[i * cols + i];
    }
    Ok(x)
}

/// Invert a small row-major `n x n` matrix with partial pivoting.
pub fn invert(a: &[f64], n: usize) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let pivot_floor = (scale * 1e-13).max(f64::MIN_POSITIVE);
    let cols = 2 * n;
    let mut aug = vec![0.0; n * cols];
    for i in 0..n {
        aug[i * cols..i * cols + n].copy_from_slice(&a[i * n..(i + 1) * n]);
        aug[i * cols + n + i] = 1.0;
    }
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = aug[col * cols + col].abs();
        for row in col + 1..n {
            let v = aug[row * cols + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val < pivot_floor {
            return Err(Error::Estimation(
                "singular matrix in inverse".to_string(),
            ));
        }
        if pivot_row != col {
            for j in 0..cols {
                aug.swap(col * cols + j, pivot_row * cols + j);
            }
        }
        let pivot = aug[col * cols + col];
        for j in 0..cols {
            aug[col * cols + j] /= pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = aug[row * cols + col];
            for j in 0..cols {
                let upper = aug[col * cols + j];
                aug[row * cols + j] -= factor * upper;
            }
        }
    }
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n..(i + 1) * n].copy_from_slice(&aug[i * cols + n..i * cols + 2 * n]);
    }
    Ok(inv)
}

// ── Seed derivation ─────────────────────────────────────────────────────────

/// Derive a child seed from a master seed, a context tag, and an index.
///
/// Two splitmix64 rounds over the mixed inputs; collisions across
/// (tag, index) pairs are astronomically unlikely, and the result is a pure
/// function of its arguments so parallel schedules cannot change it.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut z = master ^ tag.rotate_left(17) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for _ in 0..2 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
