//! Pure-skin-effect diagnostics.
//!
//! A state is a pure skin mode when the bond ratio `v[i+1] / v[i]` is
//! constant along every run of same-direction bonds. `D = 1 / |mean ratio|`
//! over chain-A bonds and `G = |mean ratio|` over chain-B bonds; for a
//! two-direction ring `|log_t D| + |log_t G| = 1`.

use num_complex::Complex64;
use serde::Serialize;

use crate::eigensolve::{degenerate_mask, EigenSystem};
use crate::error::{Error, Result};
use crate::lattice::{Direction, SegmentedRingSpec};

pub const DEFAULT_PURITY_TOL: f64 = 1e-8;
pub const DEFAULT_RATIO_FLOOR: f64 = 1e-12;
pub const DEFAULT_RANK1_TOL: f64 = 1e-6;

/// A maximal run of same-direction bonds. Bond `i` joins site `i` to site
/// `(i + 1) mod sites`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BondRun {
    pub direction: Direction,
    pub bonds: Vec<usize>,
}

/// Partition of a model's bonds into directed runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segmentation {
    pub sites: usize,
    /// Whether bond `sites - 1` (closing the loop) exists.
    pub closed: bool,
    pub runs: Vec<BondRun>,
}

impl Segmentation {
    /// Two-segment ring: bonds `0..n` are chain A, `n..n+m` chain B.
    pub fn ring(n: usize, m: usize) -> Self {
        Self {
            sites: n + m,
            closed: true,
            runs: vec![
                BondRun {
                    direction: Direction::A,
                    bonds: (0..n).collect(),
                },
                BondRun {
                    direction: Direction::B,
                    bonds: (n..n + m).collect(),
                },
            ],
        }
    }

    /// Consecutive same-direction segments, including a run that wraps past
    /// the closing bond, are merged.
    pub fn segmented_ring(spec: &SegmentedRingSpec) -> Self {
        let dirs = spec.bond_directions();
        let sites = dirs.len();
        let mut runs: Vec<BondRun> = Vec::new();
        for (i, &d) in dirs.iter().enumerate() {
            match runs.last_mut() {
                Some(r) if r.direction == d => r.bonds.push(i),
                _ => runs.push(BondRun {
                    direction: d,
                    bonds: vec![i],
                }),
            }
        }
        if runs.len() > 1 && runs[0].direction == runs[runs.len() - 1].direction {
            let last = runs.pop().expect("len > 1");
            let mut bonds = last.bonds;
            bonds.extend_from_slice(&runs[0].bonds);
            runs[0].bonds = bonds;
        }
        Self {
            sites,
            closed: true,
            runs,
        }
    }

    /// Open chain with all `sites - 1` bonds pointing forward.
    pub fn open_chain(sites: usize) -> Self {
        Self {
            sites,
            closed: false,
            runs: vec![BondRun {
                direction: Direction::A,
                bonds: (0..sites.saturating_sub(1)).collect(),
            }],
        }
    }

    pub fn uniform_ring(sites: usize) -> Self {
        Self {
            sites,
            closed: true,
            runs: vec![BondRun {
                direction: Direction::A,
                bonds: (0..sites).collect(),
            }],
        }
    }

    pub fn has(&self, dir: Direction) -> bool {
        self.runs.iter().any(|r| r.direction == dir && !r.bonds.is_empty())
    }
}

/// Cyclic bond ratios `v[(i+1) mod n] / v[i]`.
///
/// Fails when some `|v[i]|` is below `floor * max |v|`.
pub fn bond_ratios(v: &[Complex64], floor: f64) -> Result<Vec<Complex64>> {
    let n = v.len();
    let vmax = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (site, z) in v.iter().enumerate() {
        let rel = if vmax > 0.0 { z.norm() / vmax } else { 0.0 };
        if rel < floor || z.norm() == 0.0 {
            return Err(Error::AmplitudeUnderflow { site, magnitude: rel });
        }
    }
    Ok((0..n).map(|i| v[(i + 1) % n] / v[i]).collect())
}

/// Mean ratio and worst relative deviation on one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunStats {
    pub direction: Direction,
    pub mean: Complex64,
    pub max_rel_dev: f64,
}

pub fn run_stats(v: &[Complex64], seg: &Segmentation) -> Result<Vec<RunStats>> {
    if v.len() != seg.sites {
        return Err(Error::DimensionMismatch {
            expected: seg.sites,
            actual: v.len(),
        });
    }
    let rho = bond_ratios(v, DEFAULT_RATIO_FLOOR)?;
    Ok(seg
        .runs
        .iter()
        .filter(|r| !r.bonds.is_empty())
        .map(|r| {
            let mean: Complex64 =
                r.bonds.iter().map(|&b| rho[b]).sum::<Complex64>() / r.bonds.len() as f64;
            let max_rel_dev = r
                .bonds
                .iter()
                .map(|&b| (rho[b] - mean).norm() / mean.norm())
                .fold(0.0, f64::max);
            RunStats {
                direction: r.direction,
                mean,
                max_rel_dev,
            }
        })
        .collect())
}

/// Largest relative deviation of any bond ratio from its run mean.
/// Zero for a state that is exactly exponential on every run.
pub fn purity(v: &[Complex64], seg: &Segmentation) -> Result<f64> {
    Ok(run_stats(v, seg)?
        .iter()
        .map(|s| s.max_rel_dev)
        .fold(0.0, f64::max))
}

fn aggregate(stats: &[RunStats], dir: Direction) -> Option<f64> {
    let mags: Vec<f64> = stats
        .iter()
        .filter(|s| s.direction == dir)
        .map(|s| s.mean.norm())
        .collect();
    if mags.is_empty() {
        None
    } else {
        Some(mags.iter().sum::<f64>() / mags.len() as f64)
    }
}

/// `(D, G)` from run means; both directions must be present.
pub fn decay_constants(v: &[Complex64], seg: &Segmentation) -> Result<(f64, f64)> {
    let stats = run_stats(v, seg)?;
    let a = aggregate(&stats, Direction::A).ok_or(Error::MissingDirection('A'))?;
    let b = aggregate(&stats, Direction::B).ok_or(Error::MissingDirection('B'))?;
    Ok((1.0 / a, b))
}

/// Decay constants of a pure state on a ring with `n_a` chain-A and `n_b`
/// chain-B bonds: `(D, G) = (t_r^(-n_b/G), t_r^(-n_a/G))` with `G = n_a + n_b`.
pub fn expected_decay(n_a: usize, n_b: usize, t_r: f64) -> (f64, f64) {
    let g = (n_a + n_b) as f64;
    (t_r.powf(-(n_b as f64) / g), t_r.powf(-(n_a as f64) / g))
}

/// `|log_t D| + |log_t G|`.
pub fn partition_sum(d: f64, g: f64, t_r: f64) -> Result<f64> {
    if !(t_r > 0.0) || t_r == 1.0 {
        return Err(Error::Undefined(format!(
            "partition sum needs t_r > 0 and t_r != 1, got {t_r}"
        )));
    }
    if !(d > 0.0 && g > 0.0) {
        return Err(Error::Undefined(format!(
            "decay constants must be positive, got D={d}, G={g}"
        )));
    }
    let lt = t_r.ln();
    Ok((d.ln() / lt).abs() + (g.ln() / lt).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateReport {
    pub state: usize,
    pub energy: Complex64,
    pub run_means: Vec<Complex64>,
    pub purity: f64,
    pub d: Option<f64>,
    pub g: Option<f64>,
    pub partition_sum: Option<f64>,
    pub degenerate: bool,
    /// Set when the ratios could not be formed (vanishing amplitude).
    pub error: Option<String>,
}

impl StateReport {
    pub fn is_pure(&self, tol: f64) -> bool {
        self.error.is_none() && self.purity < tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurityReport {
    pub t_r: f64,
    pub states: Vec<StateReport>,
}

impl PurityReport {
    /// States outside degeneracy groups.
    pub fn non_degenerate(&self) -> impl Iterator<Item = &StateReport> {
        self.states.iter().filter(|s| !s.degenerate)
    }

    pub fn worst_purity(&self) -> f64 {
        self.non_degenerate().map(|s| s.purity).fold(0.0, f64::max)
    }
}

/// Purity, decay constants and partition sum for every eigenstate.
pub fn analyze(system: &EigenSystem, seg: &Segmentation, t_r: f64, gap_tol: f64) -> PurityReport {
    let mask = degenerate_mask(system, gap_tol);
    let states = system
        .eigenvalues
        .iter()
        .zip(&system.vectors)
        .enumerate()
        .map(|(k, (&energy, v))| match run_stats(v, seg) {
            Ok(stats) => {
                let purity = stats.iter().map(|s| s.max_rel_dev).fold(0.0, f64::max);
                let d = aggregate(&stats, Direction::A).map(|a| 1.0 / a);
                let g = aggregate(&stats, Direction::B);
                let partition_sum = match (d, g) {
                    (Some(d), Some(g)) => partition_sum(d, g, t_r).ok(),
                    _ => None,
                };
                StateReport {
                    state: k,
                    energy,
                    run_means: stats.iter().map(|s| s.mean).collect(),
                    purity,
                    d,
                    g,
                    partition_sum,
                    degenerate: mask[k],
                    error: None,
                }
            }
            Err(e) => StateReport {
                state: k,
                energy,
                run_means: Vec::new(),
                purity: f64::INFINITY,
                d: None,
                g: None,
                partition_sum: None,
                degenerate: mask[k],
                error: Some(e.to_string()),
            },
        })
        .collect();
    PurityReport { t_r, states }
}

/// Best rank-one approximation `sigma u v^H` of a `rows x cols` grid.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub sigma: f64,
    /// `||G - sigma u v^H||_F / ||G||_F`.
    pub residual: f64,
}

pub fn rank_one(grid: &[Complex64], rows: usize, cols: usize) -> Result<RankOne> {
    if grid.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            actual: grid.len(),
        });
    }
    let gnorm = grid.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if gnorm == 0.0 {
        return Err(Error::Undefined("rank-one test of a zero grid".into()));
    }
    // start from the row holding the largest entry
    let kmax = (0..grid.len())
        .max_by(|&a, &b| grid[a].norm().total_cmp(&grid[b].norm()))
        .expect("non-empty");
    let r0 = kmax / cols;
    let mut v: Vec<Complex64> = (0..cols).map(|j| grid[r0 * cols + j].conj()).collect();
    let mut u = vec![Complex64::new(0.0, 0.0); rows];
    let mut sigma = 0.0;
    for _ in 0..500 {
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= vn);
        for i in 0..rows {
            u[i] = (0..cols).map(|j| grid[i * cols + j] * v[j]).sum();
        }
        let un = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        u.iter_mut().for_each(|z| *z /= un);
        let next: Vec<Complex64> = (0..cols)
            .map(|j| (0..rows).map(|i| grid[i * cols + j].conj() * u[i]).sum())
            .collect();
        let s = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let done = (s - sigma).abs() <= 1e-15 * s;
        sigma = s;
        v = next;
        if done {
            break;
        }
    }
    let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= vn);
    let mut r2 = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            r2 += (grid[i * cols + j] - u[i] * v[j].conj() * sigma).norm_sqr();
        }
    }
    Ok(RankOne {
        u,
        v,
        sigma,
        residual: r2.sqrt() / gnorm,
    })
}

/// Decay readout along one axis of a factorized 2D state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisDecay {
    pub purity: f64,
    pub d: Option<f64>,
    pub g: Option<f64>,
    pub partition_sum: Option<f64>,
    /// `|v[i+1] / v[i]|` over the axis bonds.
    pub ratio_magnitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decay2D {
    pub rank1_residual: f64,
    pub factorizable: bool,
    pub x: Option<AxisDecay>,
    pub y: Option<AxisDecay>,
}

fn axis_decay(factor: &[Complex64], seg: &Segmentation, t_r: f64) -> Result<AxisDecay> {
    let stats = run_stats(factor, seg)?;
    let rho = bond_ratios(factor, DEFAULT_RATIO_FLOOR)?;
    let bonds: Vec<usize> = seg.runs.iter().flat_map(|r| r.bonds.iter().copied()).collect();
    let d = aggregate(&stats, Direction::A).map(|a| 1.0 / a);
    let g = aggregate(&stats, Direction::B);
    let partition_sum = match (d, g) {
        (Some(d), Some(g)) => partition_sum(d, g, t_r).ok(),
        _ => None,
    };
    Ok(AxisDecay {
        purity: stats.iter().map(|s| s.max_rel_dev).fold(0.0, f64::max),
        d,
        g,
        partition_sum,
        ratio_magnitudes: bonds.iter().map(|&b| rho[b].norm()).collect(),
    })
}

/// Per-axis decay constants of a state on an `nx x ny` lattice indexed
/// `x * ny + y`. Constants are omitted when the amplitude grid is not
/// rank one within `rank1_tol`.
#[allow(clippy::too_many_arguments)]
pub fn axis_decay_2d(
    v: &[Complex64],
    dims: (usize, usize),
    seg_x: &Segmentation,
    seg_y: &Segmentation,
    t_rx: f64,
    t_ry: f64,
    rank1_tol: f64,
) -> Result<Decay2D> {
    let (nx, ny) = dims;
    let r1 = rank_one(v, nx, ny)?;
    let factorizable = r1.residual <= rank1_tol;
    if !factorizable {
        return Ok(Decay2D {
            rank1_residual: r1.residual,
            factorizable,
            x: None,
            y: None,
        });
    }
    let vy: Vec<Complex64> = r1.v.iter().map(|z| z.conj()).collect();
    Ok(Decay2D {
        rank1_residual: r1.residual,
        factorizable,
        x: Some(axis_decay(&r1.u, seg_x, t_rx)?),
        y: Some(axis_decay(&vy, seg_y, t_ry)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn geometric(alpha: Complex64, n: usize) -> Vec<Complex64> {
        (0..n).map(|k| alpha.powu(k as u32)).collect()
    }

    #[test]
    fn ratios_of_geometric_sequence() {
        let alpha = Complex64::from_polar(2f64.powf(0.3), PI / 5.0);
        let v = geometric(alpha, 8);
        let rho = bond_ratios(&v, DEFAULT_RATIO_FLOOR).unwrap();
        for r in &rho[..7] {
            assert!((r - alpha).norm() < 1e-14);
        }
        assert!(purity(&v, &Segmentation::open_chain(8)).unwrap() < 1e-14);
    }

    #[test]
    fn bloch_wave_has_unit_ratios() {
        let k = 2.0 * PI * 3.0 / 10.0;
        let v: Vec<Complex64> = (0..10).map(|n| Complex64::from_polar(1.0, k * n as f64)).collect();
        let rho = bond_ratios(&v, DEFAULT_RATIO_FLOOR).unwrap();
        assert!(rho.iter().all(|r| (r.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn zero_entry_is_reported() {
        let mut v = vec![Complex64::new(1.0, 0.0); 5];
        v[3] = Complex64::new(0.0, 0.0);
        match bond_ratios(&v, DEFAULT_RATIO_FLOOR) {
            Err(Error::AmplitudeUnderflow { site, .. }) => assert_eq!(site, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn segmented_runs_merge() {
        let spec = SegmentedRingSpec::new(
            &[(Direction::A, 2), (Direction::A, 1), (Direction::B, 3), (Direction::A, 1)],
            2.0,
        )
        .unwrap();
        let seg = Segmentation::segmented_ring(&spec);
        assert_eq!(seg.runs.len(), 2);
        assert_eq!(seg.runs[0].bonds, vec![6, 0, 1, 2]);
        assert_eq!(seg.runs[1].bonds, vec![3, 4, 5]);
    }

    #[test]
    fn partition_sum_cases() {
        let t: f64 = 2.0;
        assert!((partition_sum(t.powf(-0.3), t.powf(-0.7), t).unwrap() - 1.0).abs() < 1e-15);
        let s = 5f64;
        assert!((partition_sum(s.powf(-0.5), s.powf(-0.5), s).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(partition_sum(1.0, 1.0, 3.0).unwrap(), 0.0);
        assert!(partition_sum(0.5, 0.5, 1.0).is_err());
        assert!(partition_sum(0.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn decay_constants_need_both_directions() {
        let v = geometric(Complex64::new(1.1, 0.0), 6);
        assert!(matches!(
            decay_constants(&v, &Segmentation::uniform_ring(6)),
            Err(Error::MissingDirection('B'))
        ));
    }

    #[test]
    fn rank_one_of_tensor_product() {
        let a = geometric(Complex64::from_polar(1.3, 0.4), 5);
        let b = geometric(Complex64::from_polar(0.7, -1.1), 4);
        let grid: Vec<Complex64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
        let r = rank_one(&grid, 5, 4).unwrap();
        assert!(r.residual < 1e-14);

        let seg_x = Segmentation::open_chain(5);
        let seg_y = Segmentation::open_chain(4);
        let out = axis_decay_2d(&grid, (5, 4), &seg_x, &seg_y, 2.0, 3.0, DEFAULT_RANK1_TOL).unwrap();
        let x = out.x.unwrap();
        assert!((x.d.unwrap() - 1.0 / 1.3).abs() < 1e-13);
        let y = out.y.unwrap();
        assert!((y.d.unwrap() - 1.0 / 0.7).abs() < 1e-13);
    }

    #[test]
    fn non_factorizable_grid_is_flagged() {
        let grid = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let seg = Segmentation::open_chain(2);
        let out = axis_decay_2d(&grid, (2, 2), &seg, &seg, 2.0, 2.0, DEFAULT_RANK1_TOL).unwrap();
        assert!(!out.factorizable);
        assert!(out.x.is_none() && out.y.is_none());
        assert!((out.rank1_residual - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
