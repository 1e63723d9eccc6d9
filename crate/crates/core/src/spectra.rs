//! Closed-form ring spectra, spectral matching and loop diagnostics.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigensolve::eigendecompose;
use crate::error::{Error, Result};
use crate::gbz::obc_momentum;
use crate::lattice::{build_obc_chain, build_ring, Direction, ModelSpec, ObcChainSpec, RingSpec, SegmentedRingSpec};

/// Imaginary extent below which a loop counts as collapsed to a line.
pub const COLLAPSE_TOL: f64 = 1e-9;
/// Minimum spacing of 2D Minkowski points below which loops count as overlapping.
pub const OVERLAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Numeric,
    Analytic,
    Obc,
    Minkowski,
}

impl fmt::Display for SpectrumSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Numeric => "numeric",
            Self::Analytic => "analytic",
            Self::Obc => "obc",
            Self::Minkowski => "minkowski",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSet {
    pub values: Vec<Complex64>,
    pub source: SpectrumSource,
}

impl SpectrumSet {
    pub fn new(values: Vec<Complex64>, source: SpectrumSource) -> Result<Self> {
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidSpec(format!("spectrum value {i} is not finite")));
        }
        Ok(Self { values, source })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Ellipse coefficients `(A, B) = (t_r^(N/G), t_r^(M/G))` with `G = N + M`.
pub fn ellipse_coefficients(n: usize, m: usize, t_r: f64) -> (f64, f64) {
    let g = (n + m) as f64;
    (t_r.powf(n as f64 / g), t_r.powf(m as f64 / g))
}

fn ellipse_points(n: usize, m: usize, t_r: f64) -> Result<SpectrumSet> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidSpec("both chain lengths must be at least 1".into()));
    }
    if !(t_r > 0.0 && t_r.is_finite()) {
        return Err(Error::InvalidSpec(format!("t_r must be positive, got {t_r}")));
    }
    let (a, b) = ellipse_coefficients(n, m, t_r);
    let g = n + m;
    let values = (0..g)
        .map(|k| {
            let theta = TAU * k as f64 / g as f64;
            Complex64::from_polar(a, theta) + Complex64::from_polar(b, -theta)
        })
        .collect();
    SpectrumSet::new(values, SpectrumSource::Analytic)
}

/// `E_k = A e^(i theta_k) + B e^(-i theta_k)`, `theta_k = 2 pi k / (N + M)`.
pub fn analytic_ring_spectrum(n: usize, m: usize, t_r: f64) -> Result<SpectrumSet> {
    ellipse_points(n, m, t_r)
}

/// Same ellipse with `N, M` replaced by the chain-A and chain-B totals.
pub fn analytic_segmented_spectrum(spec: &SegmentedRingSpec) -> Result<SpectrumSet> {
    spec.validate()?;
    ellipse_points(spec.total(Direction::A), spec.total(Direction::B), spec.t_r())
}

/// `E_k = e^(i theta_k) + t_r e^(-i theta_k)` for a ring with every bond forward.
pub fn analytic_uniform_ring_spectrum(sites: usize, t_r: f64) -> Result<SpectrumSet> {
    if sites == 0 {
        return Err(Error::InvalidSpec("ring needs at least one site".into()));
    }
    let values = (0..sites)
        .map(|k| {
            let theta = TAU * k as f64 / sites as f64;
            Complex64::from_polar(1.0, theta) + Complex64::from_polar(t_r, -theta)
        })
        .collect();
    SpectrumSet::new(values, SpectrumSource::Analytic)
}

/// `{a + b}` over all pairs, index `i * len(b) + j`.
pub fn minkowski_sum(a: &[Complex64], b: &[Complex64]) -> SpectrumSet {
    let values = a.iter().flat_map(|x| b.iter().map(move |y| x + y)).collect();
    SpectrumSet {
        values,
        source: SpectrumSource::Minkowski,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumMatch {
    /// `(index in a, index in b, distance)`, sorted by index in `a`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub max_distance: f64,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

impl SpectrumMatch {
    /// Every value on both sides matched.
    pub fn is_complete(&self) -> bool {
        self.unmatched_a.is_empty() && self.unmatched_b.is_empty()
    }
}

/// Greedy nearest-first bijective matching; pairs farther than `tol` are
/// left unmatched.
pub fn match_spectra(a: &[Complex64], b: &[Complex64], tol: f64) -> SpectrumMatch {
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let d = (x - y).norm();
            if d <= tol {
                cand.push((d, i, j));
            }
        }
    }
    cand.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (d, i, j) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j, d));
        }
    }
    pairs.sort_by_key(|p| p.0);
    SpectrumMatch {
        max_distance: pairs.iter().map(|p| p.2).fold(0.0, f64::max),
        pairs,
        unmatched_a: (0..a.len()).filter(|&i| !used_a[i]).collect(),
        unmatched_b: (0..b.len()).filter(|&j| !used_b[j]).collect(),
    }
}

/// `max |Im E|`; 0 for an empty set.
pub fn reality_gap(values: &[Complex64]) -> f64 {
    values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

/// `max_k |Im E_k|` of the closed-form ring spectrum:
/// `|A - B| max_k |sin(2 pi k / (N + M))|`. Equals the imaginary semi-axis
/// `|A - B|` only when `4` divides `N + M`.
pub fn analytic_reality_gap(n: usize, m: usize, t_r: f64) -> f64 {
    let (a, b) = ellipse_coefficients(n, m, t_r);
    let g = n + m;
    let s = (0..g)
        .map(|k| {
            // exact quarter turns give sin = 1 without rounding
            if 4 * k == g || 4 * k == 3 * g {
                1.0
            } else {
                (TAU * k as f64 / g as f64).sin().abs()
            }
        })
        .fold(0.0, f64::max);
    (a - b).abs() * s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObcOverlap {
    pub gamma1: usize,
    pub gamma2: usize,
    pub t_r: f64,
    pub ring: SpectrumSet,
    pub obc: SpectrumSet,
    /// `Z + t_r / Z` for `k = 1..=Gamma2`.
    pub momentum_energies: Vec<Complex64>,
    /// Open-chain values against the ring spectrum.
    pub ring_match: SpectrumMatch,
    /// Momentum energies against the open-chain spectrum.
    pub momentum_match: SpectrumMatch,
}

impl ObcOverlap {
    pub fn all_matched(&self) -> bool {
        self.ring_match.unmatched_a.is_empty() && self.momentum_match.is_complete()
    }
}

/// Compares an `N = M` ring of `Gamma1 = 2 Gamma2 + 2` sites to the open
/// chain of `Gamma2` sites.
pub fn obc_overlap(ring: &RingSpec, gamma2: usize, eig_tol: f64, match_tol: f64) -> Result<ObcOverlap> {
    ring.validate()?;
    let gamma1 = ring.sites();
    if ring.n != ring.m {
        return Err(Error::InvalidSpec(format!(
            "open-chain comparison needs N = M, got N={}, M={}",
            ring.n, ring.m
        )));
    }
    if 2 * gamma2 + 2 != gamma1 {
        return Err(Error::InvalidSpec(format!(
            "open-chain comparison needs 2*Gamma2 + 2 = Gamma1, got Gamma2={gamma2}, Gamma1={gamma1}"
        )));
    }
    let t_r = ring.t_r();
    let ring_sys = eigendecompose(&build_ring(ring)?, eig_tol)?;
    let obc_spec = ObcChainSpec::new(gamma2, t_r)?;
    let obc_sys = eigendecompose(&build_obc_chain(&obc_spec)?, eig_tol)?;
    let momentum_energies = (1..=gamma2 as i64)
        .map(|k| obc_momentum(gamma2, t_r, k).map(|(z, _)| z + t_r / z))
        .collect::<Result<Vec<_>>>()?;
    let ring_match = match_spectra(&obc_sys.eigenvalues, &ring_sys.eigenvalues, match_tol);
    let momentum_match = match_spectra(&momentum_energies, &obc_sys.eigenvalues, match_tol);
    Ok(ObcOverlap {
        gamma1,
        gamma2,
        t_r,
        ring: SpectrumSet::new(ring_sys.eigenvalues, SpectrumSource::Numeric)?,
        obc: SpectrumSet::new(obc_sys.eigenvalues, SpectrumSource::Obc)?,
        momentum_energies,
        ring_match,
        momentum_match,
    })
}

/// Loop shape of one axis spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisLoop {
    pub kind: String,
    pub count: usize,
    /// `(A + B, |A - B|)` when the axis is a two-direction ring.
    pub semi_axes: Option<(f64, f64)>,
    pub collapsed: bool,
    /// Every bond points the same way, so the axis carries Bloch-like
    /// (unit-ratio) states.
    pub edge_regime: bool,
    pub spectrum: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Loops2D {
    pub x: AxisLoop,
    pub y: AxisLoop,
    pub minkowski: SpectrumMatch,
    pub product_structure: bool,
    pub min_spacing: f64,
    pub overlap: bool,
    pub collapse: bool,
}

impl Loops2D {
    pub fn is_minkowski_sum(&self) -> bool {
        self.minkowski.is_complete()
    }
}

fn axis_loop(spec: &ModelSpec, eig_tol: f64) -> Result<AxisLoop> {
    let sys = eigendecompose(&spec.build()?, eig_tol)?;
    let (semi_axes, collapsed, edge_regime) = match spec {
        ModelSpec::Ring(r) => {
            let (a, b) = ellipse_coefficients(r.n, r.m, r.t_r());
            (Some((a + b, (a - b).abs())), (a - b).abs() < COLLAPSE_TOL, false)
        }
        ModelSpec::SegmentedRing(s) => {
            let (a, b) = ellipse_coefficients(s.total(Direction::A), s.total(Direction::B), s.t_r());
            (Some((a + b, (a - b).abs())), (a - b).abs() < COLLAPSE_TOL, false)
        }
        ModelSpec::UniformRing(u) => (None, (u.t_r() - 1.0).abs() < COLLAPSE_TOL, true),
        _ => (None, reality_gap(&sys.eigenvalues) < COLLAPSE_TOL, false),
    };
    Ok(AxisLoop {
        kind: spec.kind().to_string(),
        count: sys.dim(),
        semi_axes,
        collapsed,
        edge_regime,
        spectrum: sys.eigenvalues,
    })
}

/// Checks a 2D spectrum against the Minkowski sum of the axis spectra and
/// reports the loop structure.
pub fn loops_2d(spectrum: &[Complex64], x: &ModelSpec, y: &ModelSpec, eig_tol: f64, match_tol: f64) -> Result<Loops2D> {
    let xl = axis_loop(x, eig_tol)?;
    let yl = axis_loop(y, eig_tol)?;
    let sum = minkowski_sum(&xl.spectrum, &yl.spectrum);
    let minkowski = match_spectra(&sum.values, spectrum, match_tol);
    let mut min_spacing = f64::INFINITY;
    for i in 0..sum.values.len() {
        for j in i + 1..sum.values.len() {
            min_spacing = min_spacing.min((sum.values[i] - sum.values[j]).norm());
        }
    }
    let collapse = xl.collapsed || yl.collapsed;
    Ok(Loops2D {
        product_structure: spectrum.len() == xl.count * yl.count,
        overlap: min_spacing < OVERLAP_TOL,
        collapse,
        min_spacing,
        minkowski,
        x: xl,
        y: yl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn balanced_ring_is_real() {
        let s = analytic_ring_spectrum(5, 5, 2.0).unwrap();
        assert_eq!(s.len(), 10);
        for (k, e) in s.values.iter().enumerate() {
            let want = 2.0 * 2f64.sqrt() * (TAU * k as f64 / 10.0).cos();
            assert!((e - c(want, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn ellipse_equation() {
        let (a, b) = ellipse_coefficients(3, 7, 2.0);
        for e in analytic_ring_spectrum(3, 7, 2.0).unwrap().values {
            let lhs = (e.re / (a + b)).powi(2) + (e.im / (a - b)).powi(2);
            assert!((lhs - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn analytic_rejects_bad_input() {
        assert!(analytic_ring_spectrum(0, 3, 2.0).is_err());
        assert!(analytic_ring_spectrum(2, 3, -1.0).is_err());
    }

    #[test]
    fn matching_identical_and_disjoint() {
        let a = vec![c(0.0, 0.0), c(1.0, 1.0), c(1.0, 1.0)];
        let m = match_spectra(&a, &a, 1e-12);
        assert!(m.is_complete());
        assert_eq!(m.max_distance, 0.0);
        let b = vec![c(10.0, 0.0), c(11.0, 0.0), c(12.0, 0.0)];
        let m = match_spectra(&a, &b, 1e-3);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_a, vec![0, 1, 2]);
    }

    #[test]
    fn matching_is_bijective() {
        let a = vec![c(0.0, 0.0), c(0.0, 0.0)];
        let b = vec![c(0.0, 0.0)];
        let m = match_spectra(&a, &b, 1.0);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.unmatched_a, vec![1]);
    }

    #[test]
    fn gap_of_four_six() {
        // ten points never reach theta = pi/2; the widest are at 2pi*2/10
        let s = analytic_ring_spectrum(4, 6, 2.0).unwrap();
        let semi = (2f64.powf(0.4) - 2f64.powf(0.6)).abs();
        let want = semi * (TAU * 2.0 / 10.0).sin();
        assert!((reality_gap(&s.values) - want).abs() < 1e-14);
        assert!((analytic_reality_gap(4, 6, 2.0) - want).abs() < 1e-15);
        assert!((analytic_reality_gap(2, 6, 2.0) - (2f64.powf(0.25) - 2f64.powf(0.75)).abs()).abs() < 1e-15);
    }

    #[test]
    fn overlap_preconditions() {
        let ring = RingSpec::new(5, 5, 2.0).unwrap();
        assert!(obc_overlap(&ring, 3, 1e-9, 1e-8).is_err());
        let ring = RingSpec::new(4, 6, 2.0).unwrap();
        assert!(obc_overlap(&ring, 4, 1e-9, 1e-8).is_err());
    }

    #[test]
    fn minkowski_layout() {
        let s = minkowski_sum(&[c(1.0, 0.0), c(2.0, 0.0)], &[c(0.0, 1.0), c(0.0, 2.0), c(0.0, 3.0)]);
        assert_eq!(s.len(), 6);
        assert_eq!(s.values[4], c(2.0, 2.0));
    }
}
