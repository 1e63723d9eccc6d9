//! Model specifications and Hamiltonian builders.
//!
//! Every bond is a directed arrow `from -> to`. An arrow contributes
//! `H[to][from] = t_r` (strong hop along the arrow) and `H[from][to] = 1`
//! (weak hop against it), with the normalization `t2 = 1`, `t1 = t_r`.
//! With this orientation an amplitude `v[s+1] = rho * v[s]` on a chain of
//! arrows `s -> s+1` obeys `t_r v[s-1] - E v[s] + v[s+1] = 0`.
//!
//! Ring sites are numbered `0..N+M` around the loop. Bond `i` joins site `i`
//! and site `(i + 1) mod (N+M)`. Chain-A bonds (`i < N`) point forward,
//! chain-B bonds point backward. Site 0 and site N are the junctions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::pse::Segmentation;

/// Default cap on the number of sites of any built model.
pub const DEFAULT_MAX_SITES: usize = 4096;

fn one() -> f64 {
    1.0
}

/// Non-reciprocal hopping pair. Only the ratio `t1 / t2` enters the
/// Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoppingRatio {
    #[serde(alias = "t_r")]
    pub t1: f64,
    #[serde(default = "one")]
    pub t2: f64,
}

impl HoppingRatio {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let h = Self { t1, t2 };
        h.validate()?;
        Ok(h)
    }

    /// `t1 = t_r`, `t2 = 1`.
    pub fn from_ratio(t_r: f64) -> Result<Self> {
        Self::new(t_r, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t1", self.t1), ("t2", self.t2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "hopping {name} must be a positive finite number, got {v}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn ratio(&self) -> f64 {
        self.t1 / self.t2
    }

    /// `t_r == 1`: Hermitian, no skin effect.
    pub fn is_reciprocal(&self) -> bool {
        self.ratio() == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    A,
    B,
}

impl Direction {
    pub fn letter(self) -> char {
        match self {
            Direction::A => 'A',
            Direction::B => 'B',
        }
    }
}

/// Two-segment ring: `n` chain-A arrows followed by `m` chain-B arrows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub n: usize,
    pub m: usize,
    pub hopping: HoppingRatio,
}

impl RingSpec {
    pub fn new(n: usize, m: usize, t_r: f64) -> Result<Self> {
        let spec = Self {
            n,
            m,
            hopping: HoppingRatio::from_ratio(t_r)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.hopping.validate()?;
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidSpec(format!(
                "ring needs n >= 1 and m >= 1 (got n={}, m={}); \
                 use a uniform_ring model for a single-direction ring",
                self.n, self.m
            )));
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.n + self.m
    }

    pub fn t_r(&self) -> f64 {
        self.hopping.ratio()
    }

    pub fn as_segmented(&self) -> SegmentedRingSpec {
        SegmentedRingSpec {
            segments: vec![
                ChainSegment {
                    direction: Direction::A,
                    length: self.n,
                },
                ChainSegment {
                    direction: Direction::B,
                    length: self.m,
                },
            ],
            hopping: self.hopping,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSegment {
    pub direction: Direction,
    pub length: usize,
}

/// Ring made of any sequence of chain-A and chain-B runs, closed by the
/// final bond back to site 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedRingSpec {
    pub segments: Vec<ChainSegment>,
    pub hopping: HoppingRatio,
}

impl SegmentedRingSpec {
    pub fn new(segments: &[(Direction, usize)], t_r: f64) -> Result<Self> {
        let spec = Self {
            segments: segments
                .iter()
                .map(|&(direction, length)| ChainSegment { direction, length })
                .collect(),
            hopping: HoppingRatio::from_ratio(t_r)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.hopping.validate()?;
        if self.segments.is_empty() {
            return Err(Error::InvalidSpec("segmented ring has no segments".into()));
        }
        if let Some(k) = self.segments.iter().position(|s| s.length == 0) {
            return Err(Error::InvalidSpec(format!("segment {k} has zero length")));
        }
        for dir in [Direction::A, Direction::B] {
            if !self.segments.iter().any(|s| s.direction == dir) {
                return Err(Error::InvalidSpec(format!(
                    "segmented ring needs at least one chain-{} segment",
                    dir.letter()
                )));
            }
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Total arrow count in the given direction.
    pub fn total(&self, dir: Direction) -> usize {
        self.segments
            .iter()
            .filter(|s| s.direction == dir)
            .map(|s| s.length)
            .sum()
    }

    pub fn t_r(&self) -> f64 {
        self.hopping.ratio()
    }

    /// Direction of every bond, in bond order.
    pub fn bond_directions(&self) -> Vec<Direction> {
        self.segments
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.direction, s.length))
            .collect()
    }
}

/// Directed chart: a Toeplitz pattern of `run_t1` arrows followed by
/// `run_zero` gaps, repeated along every row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub sites: usize,
    pub run_t1: usize,
    pub run_zero: usize,
    /// Channel count, carried as metadata only.
    pub channels: usize,
    pub hopping: HoppingRatio,
}

impl ChartSpec {
    pub fn new(sites: usize, run_t1: usize, run_zero: usize, channels: usize, t_r: f64) -> Result<Self> {
        let spec = Self {
            sites,
            run_t1,
            run_zero,
            channels,
            hopping: HoppingRatio::from_ratio(t_r)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.hopping.validate()?;
        if self.sites < 2 {
            return Err(Error::InvalidSpec(format!(
                "chart needs at least 2 sites, got {}",
                self.sites
            )));
        }
        if self.run_t1 == 0 {
            return Err(Error::InvalidSpec(
                "chart with run_t1 = 0 has all-zero rows (disconnected graph)".into(),
            ));
        }
        if self.channels == 0 {
            return Err(Error::InvalidSpec("chart channel count must be positive".into()));
        }
        let period = self.run_t1 + self.run_zero;
        let span = self.sites - 1;
        if span < self.run_t1 || !(span - self.run_t1).is_multiple_of(period) {
            return Err(Error::InvalidSpec(format!(
                "chart pattern ({} arrows, {} gaps) does not tile a row of {} off-diagonal entries; \
                 need sites - 1 = run_t1 + k * (run_t1 + run_zero)",
                self.run_t1, self.run_zero, span
            )));
        }
        Ok(())
    }

    /// Whether sites `i < j` are joined by an arrow `i -> j`.
    pub fn linked(&self, i: usize, j: usize) -> bool {
        j > i && (j - i - 1) % (self.run_t1 + self.run_zero) < self.run_t1
    }

    pub fn t_r(&self) -> f64 {
        self.hopping.ratio()
    }
}

/// Open chain of `sites` sites with all arrows pointing forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObcChainSpec {
    pub sites: usize,
    pub hopping: HoppingRatio,
}

impl ObcChainSpec {
    pub fn new(sites: usize, t_r: f64) -> Result<Self> {
        let spec = Self {
            sites,
            hopping: HoppingRatio::from_ratio(t_r)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.hopping.validate()?;
        if self.sites < 2 {
            return Err(Error::InvalidSpec(format!(
                "open chain needs at least 2 sites, got {}",
                self.sites
            )));
        }
        Ok(())
    }

    pub fn t_r(&self) -> f64 {
        self.hopping.ratio()
    }
}

/// Translation-invariant ring with every arrow pointing forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRingSpec {
    pub sites: usize,
    pub hopping: HoppingRatio,
}

impl UniformRingSpec {
    pub fn new(sites: usize, t_r: f64) -> Result<Self> {
        let spec = Self {
            sites,
            hopping: HoppingRatio::from_ratio(t_r)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.hopping.validate()?;
        if self.sites < 2 {
            return Err(Error::InvalidSpec(format!(
                "uniform ring needs at least 2 sites, got {}",
                self.sites
            )));
        }
        Ok(())
    }

    pub fn t_r(&self) -> f64 {
        self.hopping.ratio()
    }
}

/// Orthogonal cascade of two 1D models. Site index is `x * sites(y) + y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice2DSpec {
    pub x: Box<ModelSpec>,
    pub y: Box<ModelSpec>,
}

impl Lattice2DSpec {
    pub fn new(x: ModelSpec, y: ModelSpec) -> Result<Self> {
        let spec = Self {
            x: Box::new(x),
            y: Box::new(y),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (axis, m) in [("x", &self.x), ("y", &self.y)] {
            match m.as_ref() {
                ModelSpec::Lattice2d(_) | ModelSpec::ObcChain(_) => {
                    return Err(Error::InvalidSpec(format!(
                        "{axis} axis must be a ring, segmented ring, chart or uniform ring"
                    )))
                }
                other => other.validate()?,
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.sites(), self.y.sites())
    }
}

/// Any buildable model, tagged by `kind` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Ring(RingSpec),
    SegmentedRing(SegmentedRingSpec),
    Chart(ChartSpec),
    ObcChain(ObcChainSpec),
    UniformRing(UniformRingSpec),
    Lattice2d(Lattice2DSpec),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Ring(s) => s.validate(),
            ModelSpec::SegmentedRing(s) => s.validate(),
            ModelSpec::Chart(s) => s.validate(),
            ModelSpec::ObcChain(s) => s.validate(),
            ModelSpec::UniformRing(s) => s.validate(),
            ModelSpec::Lattice2d(s) => s.validate(),
        }
    }

    pub fn sites(&self) -> usize {
        match self {
            ModelSpec::Ring(s) => s.sites(),
            ModelSpec::SegmentedRing(s) => s.sites(),
            ModelSpec::Chart(s) => s.sites,
            ModelSpec::ObcChain(s) => s.sites,
            ModelSpec::UniformRing(s) => s.sites,
            ModelSpec::Lattice2d(s) => s.x.sites().saturating_mul(s.y.sites()),
        }
    }

    /// Hopping ratio of a 1D model.
    pub fn t_r(&self) -> Option<f64> {
        match self {
            ModelSpec::Ring(s) => Some(s.t_r()),
            ModelSpec::SegmentedRing(s) => Some(s.t_r()),
            ModelSpec::Chart(s) => Some(s.t_r()),
            ModelSpec::ObcChain(s) => Some(s.t_r()),
            ModelSpec::UniformRing(s) => Some(s.t_r()),
            ModelSpec::Lattice2d(_) => None,
        }
    }

    /// Bond segmentation of a 1D model; `None` for 2D lattices.
    pub fn segmentation(&self) -> Option<Segmentation> {
        match self {
            ModelSpec::Ring(s) => Some(Segmentation::ring(s.n, s.m)),
            ModelSpec::SegmentedRing(s) => Some(Segmentation::segmented_ring(s)),
            ModelSpec::Chart(s) => Some(Segmentation::open_chain(s.sites)),
            ModelSpec::ObcChain(s) => Some(Segmentation::open_chain(s.sites)),
            ModelSpec::UniformRing(s) => Some(Segmentation::uniform_ring(s.sites)),
            ModelSpec::Lattice2d(_) => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Ring(_) => "ring",
            ModelSpec::SegmentedRing(_) => "segmented_ring",
            ModelSpec::Chart(_) => "chart",
            ModelSpec::ObcChain(_) => "obc_chain",
            ModelSpec::UniformRing(_) => "uniform_ring",
            ModelSpec::Lattice2d(_) => "lattice2d",
        }
    }

    pub fn build(&self) -> Result<ComplexMatrix> {
        self.build_with_cap(DEFAULT_MAX_SITES)
    }

    pub fn build_with_cap(&self, max_sites: usize) -> Result<ComplexMatrix> {
        self.validate()?;
        let sites = self.sites();
        if sites > max_sites {
            return Err(Error::DimensionCap { sites, cap: max_sites });
        }
        match self {
            ModelSpec::Ring(s) => build_ring(s),
            ModelSpec::SegmentedRing(s) => build_segmented_ring(s),
            ModelSpec::Chart(s) => build_chart(s),
            ModelSpec::ObcChain(s) => build_obc_chain(s),
            ModelSpec::UniformRing(s) => build_uniform_ring(s),
            ModelSpec::Lattice2d(s) => build_lattice2d_capped(s, max_sites),
        }
    }
}

fn add_arrow(h: &mut ComplexMatrix, from: usize, to: usize, t_r: f64) {
    h[(to, from)] += Complex64::new(t_r, 0.0);
    h[(from, to)] += Complex64::new(1.0, 0.0);
}

fn ring_from_directions(dirs: &[Direction], t_r: f64) -> ComplexMatrix {
    let sites = dirs.len();
    let mut h = ComplexMatrix::zeros(sites);
    for (i, dir) in dirs.iter().enumerate() {
        let j = (i + 1) % sites;
        match dir {
            Direction::A => add_arrow(&mut h, i, j, t_r),
            Direction::B => add_arrow(&mut h, j, i, t_r),
        }
    }
    h
}

pub fn build_ring(spec: &RingSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    let dirs: Vec<Direction> = (0..spec.sites())
        .map(|i| if i < spec.n { Direction::A } else { Direction::B })
        .collect();
    Ok(ring_from_directions(&dirs, spec.t_r()))
}

pub fn build_segmented_ring(spec: &SegmentedRingSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    Ok(ring_from_directions(&spec.bond_directions(), spec.t_r()))
}

pub fn build_chart(spec: &ChartSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    let mut h = ComplexMatrix::zeros(spec.sites);
    for i in 0..spec.sites {
        for j in i + 1..spec.sites {
            if spec.linked(i, j) {
                add_arrow(&mut h, i, j, spec.t_r());
            }
        }
    }
    Ok(h)
}

pub fn build_obc_chain(spec: &ObcChainSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    let mut h = ComplexMatrix::zeros(spec.sites);
    for i in 0..spec.sites - 1 {
        add_arrow(&mut h, i, i + 1, spec.t_r());
    }
    Ok(h)
}

pub fn build_uniform_ring(spec: &UniformRingSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    Ok(ring_from_directions(&vec![Direction::A; spec.sites], spec.t_r()))
}

pub fn build_lattice2d(spec: &Lattice2DSpec) -> Result<ComplexMatrix> {
    build_lattice2d_capped(spec, DEFAULT_MAX_SITES)
}

/// `H_x ⊗ I_y + I_x ⊗ H_y`, refusing lattices above `max_sites` sites.
pub fn build_lattice2d_capped(spec: &Lattice2DSpec, max_sites: usize) -> Result<ComplexMatrix> {
    spec.validate()?;
    let (nx, ny) = spec.dims();
    let sites = nx.saturating_mul(ny);
    if sites > max_sites {
        return Err(Error::DimensionCap { sites, cap: max_sites });
    }
    let hx = spec.x.build_with_cap(max_sites)?;
    let hy = spec.y.build_with_cap(max_sites)?;
    Ok(ComplexMatrix::kron_sum(&hx, &hy))
}
