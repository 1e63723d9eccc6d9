//! Dense eigendecomposition of general complex matrices.
//!
//! Pipeline: diagonal balancing, Householder reduction to upper Hessenberg
//! form, shifted QR iteration to complex Schur form `T = Q^H B Q`, then
//! right eigenvectors of `T` by back substitution, mapped back through `Q`
//! and the balancing scale.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{vec_norm, ComplexMatrix};

/// Default relative residual bound for [`eigendecompose`].
pub const DEFAULT_EIG_TOL: f64 = 1e-9;
/// Default relative gap for [`degeneracy_groups`].
pub const DEFAULT_GAP_TOL: f64 = 1e-7;

const MAX_SWEEPS_PER_EIGENVALUE: usize = 30;

/// Eigenvalues with right eigenvectors, sorted by `(arg E in [0, 2pi), |E|)`.
///
/// Every vector is scaled so its largest-magnitude entry is exactly `1+0i`.
/// `residuals[k] = ||H v_k - E_k v_k||_2 / ||H||_F`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSystem {
    pub eigenvalues: Vec<Complex64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn worst_residual(&self) -> f64 {
        self.residuals
            .iter()
            .copied()
            .fold(0.0, |acc, r| if r.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(r) })
    }
}

#[inline]
fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Full eigendecomposition with every residual bounded by `tol`.
pub fn eigendecompose(h: &ComplexMatrix, tol: f64) -> Result<EigenSystem> {
    h.check_finite()?;
    let n = h.dim();
    if n == 0 {
        return Err(Error::InvalidSpec("cannot decompose a 0x0 matrix".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidSpec(format!("eigensolver tolerance must be positive, got {tol}")));
    }

    let mut a = h.as_slice().to_vec();
    let scale = balance(&mut a, n);
    let mut q = identity(n);
    hessenberg(&mut a, &mut q, n);
    schur(&mut a, &mut q, n)?;
    let ys = triangular_eigenvectors(&a, n);

    let hnorm = h.frobenius_norm();
    let mut pairs: Vec<(Complex64, Vec<Complex64>, f64)> = Vec::with_capacity(n);
    for (k, y) in ys.iter().enumerate() {
        let lambda = a[k * n + k];
        let mut v: Vec<Complex64> = (0..n)
            .map(|i| {
                let s: Complex64 = (0..=k).map(|j| q[i * n + j] * y[j]).sum();
                s * scale[i]
            })
            .collect();
        normalize_max_entry(&mut v);
        let r = residual(h, hnorm, lambda, &v)?;
        pairs.push((lambda, v, r));
    }

    pairs.sort_by(|x, y| sort_key_cmp(x.0, y.0));
    let system = EigenSystem {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        residuals: pairs.iter().map(|p| p.2).collect(),
        vectors: pairs.into_iter().map(|p| p.1).collect(),
    };
    let worst = system.worst_residual();
    if !(worst <= tol) {
        return Err(Error::NoConvergence { worst_residual: worst });
    }
    Ok(system)
}

/// Largest `||H v - E v||_2 / ||H||_F` over all pairs of `system`.
pub fn residual_check(h: &ComplexMatrix, system: &EigenSystem) -> Result<f64> {
    if system.vectors.len() != system.eigenvalues.len() {
        return Err(Error::DimensionMismatch {
            expected: system.eigenvalues.len(),
            actual: system.vectors.len(),
        });
    }
    let hnorm = h.frobenius_norm();
    let mut worst: f64 = 0.0;
    for (lambda, v) in system.eigenvalues.iter().zip(&system.vectors) {
        worst = worst.max(residual(h, hnorm, *lambda, v)?);
    }
    Ok(worst)
}

/// Groups eigenvalue indices whose pairwise distance is within
/// `gap_tol * diameter` (transitively). Groups are ordered by first index.
pub fn degeneracy_groups(system: &EigenSystem, gap_tol: f64) -> Vec<Vec<usize>> {
    let e = &system.eigenvalues;
    let n = e.len();
    let mut diameter: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            diameter = diameter.max((e[i] - e[j]).norm());
        }
    }
    let threshold = gap_tol * diameter;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (e[i] - e[j]).norm() <= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Per-index flag: true when the eigenvalue shares a degeneracy group.
pub fn degenerate_mask(system: &EigenSystem, gap_tol: f64) -> Vec<bool> {
    let mut mask = vec![false; system.dim()];
    for g in degeneracy_groups(system, gap_tol) {
        if g.len() > 1 {
            for i in g {
                mask[i] = true;
            }
        }
    }
    mask
}

/// Angle of `z` in `[0, 2pi)`; angles within 1e-12 of `2pi` wrap to 0.
pub fn sort_angle(z: Complex64) -> f64 {
    if z.norm() == 0.0 {
        return 0.0;
    }
    let mut a = z.im.atan2(z.re);
    if a < 0.0 {
        a += TAU;
    }
    if TAU - a < 1e-12 {
        0.0
    } else {
        a
    }
}

fn sort_key_cmp(x: Complex64, y: Complex64) -> Ordering {
    sort_angle(x)
        .total_cmp(&sort_angle(y))
        .then(x.norm().total_cmp(&y.norm()))
}

fn residual(h: &ComplexMatrix, hnorm: f64, lambda: Complex64, v: &[Complex64]) -> Result<f64> {
    let hv = h.mul_vec(v)?;
    let r: f64 = hv
        .iter()
        .zip(v)
        .map(|(a, b)| (a - lambda * b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(if hnorm > 0.0 { r / hnorm } else { r })
}

fn normalize_max_entry(v: &mut [Complex64]) {
    let (imax, vmax) = v
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bm), (i, z)| if z.norm() > bm { (i, z.norm()) } else { (bi, bm) });
    if vmax == 0.0 {
        return;
    }
    let pivot = v[imax];
    for z in v.iter_mut() {
        *z /= pivot;
    }
    v[imax] = Complex64::new(1.0, 0.0);
}

fn identity(n: usize) -> Vec<Complex64> {
    let mut q = vec![c0(); n * n];
    for i in 0..n {
        q[i * n + i] = Complex64::new(1.0, 0.0);
    }
    q
}

/// Power-of-two diagonal similarity `D^-1 A D` equalizing row and column
/// norms. Returns the diagonal of `D`.
fn balance(a: &mut [Complex64], n: usize) -> Vec<f64> {
    const RADIX: f64 = 2.0;
    let mut d = vec![1.0; n];
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].norm();
                    r += a[i * n + j].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    a[i * n + j] /= f;
                    a[j * n + i] *= f;
                }
            }
        }
    }
    d
}

/// Householder reduction to upper Hessenberg form, accumulating into `q`.
fn hessenberg(a: &mut [Complex64], q: &mut [Complex64], n: usize) {
    if n < 3 {
        return;
    }
    let mut v = vec![c0(); n];
    for k in 0..n - 2 {
        let alpha_norm = (k + 1..n).map(|i| a[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * alpha_norm;
        for i in k + 1..n {
            v[i] = a[i * n + k];
        }
        v[k + 1] -= alpha;
        let vnorm = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in &mut v[k + 1..n] {
            *z /= vnorm;
        }
        // A <- (I - 2 v v^H) A on rows k+1..n
        for j in k..n {
            let s: Complex64 = (k + 1..n).map(|i| v[i].conj() * a[i * n + j]).sum();
            let s2 = s * 2.0;
            for i in k + 1..n {
                a[i * n + j] -= v[i] * s2;
            }
        }
        // A <- A (I - 2 v v^H) on columns k+1..n
        for i in 0..n {
            let s: Complex64 = (k + 1..n).map(|j| a[i * n + j] * v[j]).sum();
            let s2 = s * 2.0;
            for j in k + 1..n {
                a[i * n + j] -= s2 * v[j].conj();
            }
        }
        for i in 0..n {
            let s: Complex64 = (k + 1..n).map(|j| q[i * n + j] * v[j]).sum();
            let s2 = s * 2.0;
            for j in k + 1..n {
                q[i * n + j] -= s2 * v[j].conj();
            }
        }
        a[(k + 1) * n + k] = alpha;
        for i in k + 2..n {
            a[i * n + k] = c0();
        }
    }
}

/// Givens rotation `[c s; -conj(s) c]` (c real) mapping `(f, g)` to `(r, 0)`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let gn = g.norm();
    if gn == 0.0 {
        return (1.0, c0());
    }
    let fnorm = f.norm();
    if fnorm == 0.0 {
        return (0.0, g.conj() / gn);
    }
    let r = fnorm.hypot(gn);
    let c = fnorm / r;
    let s = (f / fnorm) * g.conj() / r;
    (c, s)
}

/// Shifted QR iteration on an upper Hessenberg matrix, reducing it to upper
/// triangular (complex Schur) form and accumulating the rotations into `q`.
fn schur(h: &mut [Complex64], q: &mut [Complex64], n: usize) -> Result<()> {
    let eps = f64::EPSILON;
    let norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(());
    }
    let small = f64::MIN_POSITIVE * (n as f64) / eps;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let max_total = MAX_SWEEPS_PER_EIGENVALUE * n.max(10);
    let mut rot: Vec<(f64, Complex64)> = Vec::with_capacity(n);

    while hi > 0 {
        // locate the active block [lo, hi]; a block that keeps stalling on a
        // repeated eigenvalue is split at the backward-stable threshold
        let floor = if iter >= 10 { eps * norm } else { small };
        let mut lo = hi;
        while lo > 0 {
            if deflatable(h, n, lo, hi, floor) {
                h[lo * n + lo - 1] = c0();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_total {
            let worst = (1..n).map(|i| h[i * n + i - 1].norm()).fold(0.0, f64::max);
            return Err(Error::NoConvergence {
                worst_residual: worst / norm,
            });
        }

        let mu = if iter.is_multiple_of(10) {
            // exceptional shift
            h[hi * n + hi] + Complex64::new(0.75 * h[hi * n + hi - 1].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1) * n + hi - 1],
                h[(hi - 1) * n + hi],
                h[hi * n + hi - 1],
                h[hi * n + hi],
            )
        };

        for i in lo..=hi {
            h[i * n + i] -= mu;
        }
        rot.clear();
        for k in lo..hi {
            let (c, s) = givens(h[k * n + k], h[(k + 1) * n + k]);
            rot.push((c, s));
            for j in k..n {
                let x = h[k * n + j];
                let y = h[(k + 1) * n + j];
                h[k * n + j] = x * c + s * y;
                h[(k + 1) * n + j] = -s.conj() * x + y * c;
            }
            h[(k + 1) * n + k] = c0();
        }
        for (idx, &(c, s)) in rot.iter().enumerate() {
            let k = lo + idx;
            let rows = (k + 2).min(hi) + 1;
            for i in 0..rows {
                let x = h[i * n + k];
                let y = h[i * n + k + 1];
                h[i * n + k] = x * c + y * s.conj();
                h[i * n + k + 1] = -s * x + y * c;
            }
            for i in 0..n {
                let x = q[i * n + k];
                let y = q[i * n + k + 1];
                q[i * n + k] = x * c + y * s.conj();
                q[i * n + k + 1] = -s * x + y * c;
            }
        }
        for i in lo..=hi {
            h[i * n + i] += mu;
        }
    }
    Ok(())
}

fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Whether subdiagonal `h[k][k-1]` of the active block ending at `hi` is
/// negligible. Zero diagonal pairs borrow their neighbours' scale.
fn deflatable(h: &[Complex64], n: usize, k: usize, hi: usize, floor: f64) -> bool {
    let sub = cabs1(h[k * n + k - 1]);
    if sub <= floor {
        return true;
    }
    let mut tst = cabs1(h[(k - 1) * n + k - 1]) + cabs1(h[k * n + k]);
    if tst == 0.0 {
        if k >= 2 {
            tst += cabs1(h[(k - 1) * n + k - 2]);
        }
        if k < hi {
            tst += cabs1(h[(k + 1) * n + k]);
        }
    }
    sub <= f64::EPSILON * tst
}

/// Eigenvalue of `[a b; c d]` closest to `d`.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Right eigenvectors of upper triangular `t`; vector `k` has support `0..=k`.
fn triangular_eigenvectors(t: &[Complex64], n: usize) -> Vec<Vec<Complex64>> {
    let norm = t.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // floor keeps |d|^2 representable inside complex division
    let smin = (f64::EPSILON * norm).max(1e-150);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[k * n + k];
        let mut y = vec![c0(); k + 1];
        y[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let s: Complex64 = (i + 1..=k).map(|j| t[i * n + j] * y[j]).sum();
            let mut d = t[i * n + i] - lambda;
            if d.norm() < smin {
                d = Complex64::new(smin, 0.0);
            }
            y[i] = -s / d;
            let big = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if big > 1e100 {
                for z in y.iter_mut() {
                    *z /= big;
                }
            }
        }
        let nrm = vec_norm(&y);
        if nrm > 0.0 {
            for z in y.iter_mut() {
                *z /= nrm;
            }
        }
        out.push(y);
    }
    out
}
