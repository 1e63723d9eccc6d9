//! Config-driven pipelines: build, decompose, analyze, verify, export.
//!
//! Exit codes: 0 success, 1 invalid config, 2 numerical or I/O failure,
//! 3 a verification assertion failed.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{degenerate_mask, eigendecompose, EigenSystem};
use crate::error::{Error, Result};
use crate::export;
use crate::gbz::{obc_momentum, verify_gbz, CoefficientPairing};
use crate::lattice::{Direction, ModelSpec, RingSpec, DEFAULT_MAX_SITES};
use crate::pse::{analyze, axis_decay_2d, expected_decay, AxisDecay, PurityReport};
use crate::spectra::{
    analytic_ring_spectrum, analytic_segmented_spectrum, analytic_uniform_ring_spectrum, loops_2d, match_spectra,
    minkowski_sum, obc_overlap, reality_gap, SpectrumSet, SpectrumSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Pse,
    Gbz,
    Spectra,
    ObcCompare,
    Loops2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub eig: f64,
    pub purity: f64,
    pub det: f64,
    #[serde(rename = "match")]
    pub match_: f64,
    /// Decay constants and partition sums.
    pub decay: f64,
    pub gap: f64,
    pub rank1: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eig: crate::eigensolve::DEFAULT_EIG_TOL,
            purity: crate::pse::DEFAULT_PURITY_TOL,
            det: crate::gbz::DEFAULT_DET_TOL,
            match_: crate::gbz::DEFAULT_MATCH_TOL,
            decay: 1e-8,
            gap: crate::eigensolve::DEFAULT_GAP_TOL,
            rank1: crate::pse::DEFAULT_RANK1_TOL,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eig", self.eig),
            ("purity", self.purity),
            ("det", self.det),
            ("match", self.match_),
            ("decay", self.decay),
            ("gap", self.gap),
            ("rank1", self.rank1),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSpec(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Grid of two-segment rings. `totals` expands to every `(N, total - N)`
/// with `N = 1..total`; `pairs` are taken as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub totals: Vec<usize>,
    #[serde(default)]
    pub pairs: Vec<(usize, usize)>,
    pub t_r: Vec<f64>,
}

impl SweepSpec {
    /// Distinct grid points sorted by `(N, M, t_r)`.
    pub fn points(&self) -> Vec<(usize, usize, f64)> {
        let mut nm: Vec<(usize, usize)> = self.pairs.clone();
        for &total in &self.totals {
            nm.extend((1..total).map(|n| (n, total - n)));
        }
        let mut pts: Vec<(usize, usize, f64)> =
            nm.iter().flat_map(|&(n, m)| self.t_r.iter().map(move |&t| (n, m, t))).collect();
        pts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
        pts.dedup();
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self, max_sites: usize) -> Result<()> {
        self.tolerances.validate()?;
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::InvalidSpec(format!("config name {:?} is not a plain file name", self.name)));
        }
        match (&self.model, &self.sweep) {
            (Some(model), None) => {
                model.validate()?;
                let sites = model.sites();
                if sites > max_sites {
                    return Err(Error::DimensionCap { sites, cap: max_sites });
                }
                if self.analyses.is_empty() {
                    return Err(Error::InvalidSpec("analyses must not be empty".into()));
                }
                for a in &self.analyses {
                    check_analysis(*a, model)?;
                }
                Ok(())
            }
            (None, Some(sweep)) => {
                let pts = sweep.points();
                if pts.is_empty() {
                    return Err(Error::InvalidSpec("sweep grid is empty".into()));
                }
                for &(n, m, t) in &pts {
                    let spec = RingSpec::new(n, m, t)?;
                    if spec.sites() > max_sites {
                        return Err(Error::DimensionCap {
                            sites: spec.sites(),
                            cap: max_sites,
                        });
                    }
                }
                for a in &self.analyses {
                    if !matches!(a, Analysis::Pse | Analysis::Spectra | Analysis::Gbz) {
                        return Err(Error::InvalidSpec(format!("analysis {a:?} is not available in sweeps")));
                    }
                }
                Ok(())
            }
            _ => Err(Error::InvalidSpec("config needs exactly one of `model` or `sweep`".into())),
        }
    }
}

fn check_analysis(a: Analysis, model: &ModelSpec) -> Result<()> {
    let ok = match a {
        Analysis::Pse | Analysis::Spectra => true,
        Analysis::Gbz => matches!(model, ModelSpec::Ring(_)),
        Analysis::ObcCompare => matches!(model, ModelSpec::Ring(r) if r.n == r.m),
        Analysis::Loops2d => matches!(model, ModelSpec::Lattice2d(_)),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "analysis {a:?} does not apply to a {} model",
            model.kind()
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySummary {
    pub name: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Ok,
    InvalidConfig,
    RuntimeFailure,
    VerificationFailure,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            Self::Ok => 0,
            Self::InvalidConfig => 1,
            Self::RuntimeFailure => 2,
            Self::VerificationFailure => 3,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub out_dir: PathBuf,
    pub summary: Option<VerifySummary>,
    pub message: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Overrides `output_dir` from the config.
    pub out_dir: Option<PathBuf>,
    pub max_sites: usize,
    /// Only write the Hamiltonian.
    pub build_only: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: None,
            max_sites: DEFAULT_MAX_SITES,
            build_only: false,
        }
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidSpec(_) | Error::DimensionCap { .. } | Error::Parse(_) | Error::OutOfRange { .. }
    )
}

/// Runs a config and writes its artifacts.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> RunOutcome {
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&config.name));
    let fail = |status, e: Error| RunOutcome {
        status,
        out_dir: out_dir.clone(),
        summary: None,
        message: Some(e.to_string()),
    };
    let validation = if opts.build_only {
        match &config.model {
            Some(m) => m.validate().and_then(|_| {
                if m.sites() > opts.max_sites {
                    Err(Error::DimensionCap {
                        sites: m.sites(),
                        cap: opts.max_sites,
                    })
                } else {
                    Ok(())
                }
            }),
            None => Err(Error::InvalidSpec("build needs a `model`".into())),
        }
    } else {
        config.validate(opts.max_sites)
    };
    if let Err(e) = validation {
        return fail(ExitStatus::InvalidConfig, e);
    }
    if let Err(e) = fs::create_dir_all(&out_dir) {
        return fail(ExitStatus::RuntimeFailure, e.into());
    }
    let result = if opts.build_only {
        build_only(config.model.as_ref().expect("validated"), &out_dir, opts.max_sites).map(|_| Vec::new())
    } else if let Some(model) = &config.model {
        run_model(config, model, &out_dir, opts.max_sites)
    } else {
        run_sweep(config, config.sweep.as_ref().expect("validated"), &out_dir)
    };
    let assertions = match result {
        Ok(a) => a,
        Err(e) if is_config_error(&e) => return fail(ExitStatus::InvalidConfig, e),
        Err(e) => return fail(ExitStatus::RuntimeFailure, e),
    };
    let summary = VerifySummary {
        name: config.name.clone(),
        passed: assertions.iter().all(|a| a.passed),
        assertions,
    };
    if !opts.build_only {
        if let Err(e) = write_file(&out_dir.join("verify.json"), |w| export::write_json(w, &summary)) {
            return fail(ExitStatus::RuntimeFailure, e);
        }
    }
    RunOutcome {
        status: if summary.passed {
            ExitStatus::Ok
        } else {
            ExitStatus::VerificationFailure
        },
        out_dir,
        summary: Some(summary),
        message: None,
    }
}

fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

fn build_only(model: &ModelSpec, dir: &Path, cap: usize) -> Result<()> {
    let h = model.build_with_cap(cap)?;
    fs::write(dir.join("hamiltonian.txt"), h.to_text())?;
    Ok(())
}

fn fmt_sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn run_model(config: &ExperimentConfig, model: &ModelSpec, dir: &Path, cap: usize) -> Result<Vec<Assertion>> {
    let tol = &config.tolerances;
    let h = model.build_with_cap(cap)?;
    fs::write(dir.join("hamiltonian.txt"), h.to_text())?;
    let sys = eigendecompose(&h, tol.eig)?;
    write_file(&dir.join("eigen.csv"), |w| export::write_eigen_csv(w, &sys))?;
    write_file(&dir.join("amplitudes.csv"), |w| export::write_amplitudes_csv(w, &sys))?;

    let mut out = vec![Assertion::new(
        "eigensolve.residual",
        sys.worst_residual() < tol.eig,
        format!("worst residual {}", fmt_sci(sys.worst_residual())),
    )];
    for a in &config.analyses {
        match a {
            Analysis::Pse => out.extend(pse_assertions(model, &sys, tol, dir)?),
            Analysis::Gbz => {
                let ModelSpec::Ring(spec) = model else { unreachable!("validated") };
                out.extend(gbz_assertions(spec, &sys, tol, dir)?);
            }
            Analysis::Spectra => out.extend(spectra_assertions(model, &sys, tol, dir)?),
            Analysis::ObcCompare => {
                let ModelSpec::Ring(spec) = model else { unreachable!("validated") };
                let gamma2 = (spec.sites() - 2) / 2;
                let rep = obc_overlap(spec, gamma2, tol.eig, tol.match_)?;
                write_file(&dir.join("obc_compare.csv"), |w| {
                    export::write_spectrum_csv(w, &[&rep.ring, &rep.obc])
                })?;
                write_file(&dir.join("obc_compare.json"), |w| export::write_json(w, &rep))?;
                out.push(Assertion::new(
                    "obc.overlap",
                    rep.ring_match.unmatched_a.is_empty(),
                    format!(
                        "{} of {} open-chain values found in the ring spectrum, max distance {}",
                        rep.ring_match.pairs.len(),
                        rep.obc.len(),
                        fmt_sci(rep.ring_match.max_distance)
                    ),
                ));
                out.push(Assertion::new(
                    "obc.momentum",
                    rep.momentum_match.is_complete(),
                    format!("max |Z + t_r/Z - E| {}", fmt_sci(rep.momentum_match.max_distance)),
                ));
            }
            Analysis::Loops2d => {
                let ModelSpec::Lattice2d(spec) = model else { unreachable!("validated") };
                let rep = loops_2d(&sys.eigenvalues, &spec.x, &spec.y, tol.eig, tol.match_)?;
                write_file(&dir.join("loops2d.json"), |w| export::write_json(w, &rep))?;
                out.push(Assertion::new(
                    "loops2d.minkowski",
                    rep.is_minkowski_sum(),
                    format!(
                        "{} of {} values matched, max distance {}",
                        rep.minkowski.pairs.len(),
                        sys.dim(),
                        fmt_sci(rep.minkowski.max_distance)
                    ),
                ));
                out.push(Assertion::new(
                    "loops2d.product",
                    rep.product_structure,
                    format!(
                        "{} x {} loops, collapse={}, overlap={}, edge_x={}, edge_y={}",
                        rep.x.count, rep.y.count, rep.collapse, rep.overlap, rep.x.edge_regime, rep.y.edge_regime
                    ),
                ));
            }
        }
    }
    Ok(out)
}

/// Expected `(D, G)` for models whose bonds split into chain A and chain B.
fn model_expected_decay(model: &ModelSpec) -> Option<(f64, f64)> {
    match model {
        ModelSpec::Ring(r) => Some(expected_decay(r.n, r.m, r.t_r())),
        ModelSpec::SegmentedRing(s) => Some(expected_decay(s.total(Direction::A), s.total(Direction::B), s.t_r())),
        _ => None,
    }
}

fn decay_assertions(
    prefix: &str,
    rows: &[(Option<f64>, Option<f64>, Option<f64>)],
    expected: Option<(f64, f64)>,
    reciprocal: bool,
    tol: f64,
) -> Vec<Assertion> {
    let mut out = Vec::new();
    if let Some((de, ge)) = expected {
        let worst = rows
            .iter()
            .map(|(d, g, _)| match (d, g) {
                (Some(d), Some(g)) => (d - de).abs().max((g - ge).abs()),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max);
        out.push(Assertion::new(
            &format!("{prefix}.decay"),
            worst <= tol,
            format!("expected D={de}, G={ge}; worst deviation {}", fmt_sci(worst)),
        ));
    }
    if expected.is_some() && !reciprocal {
        let worst = rows
            .iter()
            .map(|(_, _, p)| p.map(|p| (p - 1.0).abs()).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        out.push(Assertion::new(
            &format!("{prefix}.partition"),
            worst <= tol,
            format!("worst |partition_sum - 1| {}", fmt_sci(worst)),
        ));
    }
    out
}

fn pse_assertions(model: &ModelSpec, sys: &EigenSystem, tol: &crate::experiment::Tolerances, dir: &Path) -> Result<Vec<Assertion>> {
    if let ModelSpec::Lattice2d(spec) = model {
        return pse_2d_assertions(spec, sys, tol, dir);
    }
    let seg = model.segmentation().expect("1D model");
    let t_r = model.t_r().expect("1D model");
    let report: PurityReport = analyze(sys, &seg, t_r, tol.gap);
    write_file(&dir.join("purity.csv"), |w| export::write_purity_csv(w, &report))?;
    let checked = report.non_degenerate().count();
    let mut out = Vec::new();
    // Open chains hold standing waves; their profiles are exported only.
    if matches!(model, ModelSpec::ObcChain(_)) {
        return Ok(out);
    }
    let worst = report.worst_purity();
    out.push(Assertion::new(
        "pse.purity",
        worst < tol.purity,
        format!("{checked} non-degenerate states, worst purity {}", fmt_sci(worst)),
    ));
    let rows: Vec<_> = report.non_degenerate().map(|s| (s.d, s.g, s.partition_sum)).collect();
    out.extend(decay_assertions("pse", &rows, model_expected_decay(model), t_r == 1.0, tol.decay));
    Ok(out)
}

fn axis_rows(
    decays: &[Option<AxisDecay>],
) -> Vec<(Option<f64>, Option<f64>, Option<f64>)> {
    decays
        .iter()
        .map(|a| match a {
            Some(a) => (a.d, a.g, a.partition_sum),
            None => (None, None, None),
        })
        .collect()
}

fn pse_2d_assertions(
    spec: &crate::lattice::Lattice2DSpec,
    sys: &EigenSystem,
    tol: &Tolerances,
    dir: &Path,
) -> Result<Vec<Assertion>> {
    let (nx, ny) = spec.dims();
    let seg_x = spec.x.segmentation().expect("1D axis");
    let seg_y = spec.y.segmentation().expect("1D axis");
    let (tx, ty) = (spec.x.t_r().expect("1D axis"), spec.y.t_r().expect("1D axis"));
    let mask = degenerate_mask(sys, tol.gap);
    let rows: Vec<_> = sys
        .eigenvalues
        .par_iter()
        .zip(&sys.vectors)
        .enumerate()
        .map(|(k, (e, v))| {
            axis_decay_2d(v, (nx, ny), &seg_x, &seg_y, tx, ty, tol.rank1).map(|d| (k, *e, mask[k], d))
        })
        .collect::<Result<_>>()?;
    write_file(&dir.join("decay2d.csv"), |w| export::write_decay2d_csv(w, &rows))?;

    let nd: Vec<_> = rows.iter().filter(|r| !r.2).collect();
    let worst_rank1 = nd.iter().map(|r| r.3.rank1_residual).fold(0.0, f64::max);
    let mut out = vec![Assertion::new(
        "pse2d.rank1",
        worst_rank1 < tol.rank1,
        format!("{} non-degenerate states, worst rank-1 residual {}", nd.len(), fmt_sci(worst_rank1)),
    )];
    for (axis, model, t, pick) in [
        ("x", &*spec.x, tx, 0usize),
        ("y", &*spec.y, ty, 1usize),
    ] {
        let decays: Vec<Option<AxisDecay>> = nd
            .iter()
            .map(|r| if pick == 0 { r.3.x.clone() } else { r.3.y.clone() })
            .collect();
        let prefix = format!("pse2d.{axis}");
        if let ModelSpec::UniformRing(_) = model {
            let worst = decays
                .iter()
                .map(|a| match a {
                    Some(a) => a.ratio_magnitudes.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max),
                    None => f64::INFINITY,
                })
                .fold(0.0, f64::max);
            out.push(Assertion::new(
                &format!("{prefix}.unit_ratios"),
                worst <= tol.decay,
                format!("worst ||ratio| - 1| {}", fmt_sci(worst)),
            ));
        } else {
            let worst = decays
                .iter()
                .map(|a| a.as_ref().map(|a| a.purity).unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max);
            out.push(Assertion::new(
                &format!("{prefix}.purity"),
                worst < tol.purity,
                format!("worst axis purity {}", fmt_sci(worst)),
            ));
            out.extend(decay_assertions(&prefix, &axis_rows(&decays), model_expected_decay(model), t == 1.0, tol.decay));
        }
    }
    Ok(out)
}

fn gbz_assertions(spec: &RingSpec, sys: &EigenSystem, tol: &Tolerances, dir: &Path) -> Result<Vec<Assertion>> {
    let rep = verify_gbz(sys, spec, tol.det, tol.match_)?;
    write_file(&dir.join("gbz.csv"), |w| export::write_gbz_csv(w, &rep))?;
    let worst_det = rep.states.iter().map(|s| s.det_magnitude).fold(0.0, f64::max);
    let nd: Vec<_> = rep.states.iter().filter(|s| !s.degenerate).collect();
    let matched = nd.iter().filter(|s| s.matched).count();
    let bad_pairing = nd
        .iter()
        .filter(|s| !matches!(s.pairing, Some(CoefficientPairing::C2C3) | Some(CoefficientPairing::C1C4)))
        .count();
    let worst_phase = nd
        .iter()
        .map(|s| s.phase_mismatch.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    Ok(vec![
        Assertion::new(
            "gbz.det",
            rep.all_det_below_tol(),
            format!("worst scaled det {}", fmt_sci(worst_det)),
        ),
        Assertion::new(
            "gbz.match",
            matched == nd.len(),
            format!("{matched} of {} non-degenerate states matched a closed-form root", nd.len()),
        ),
        Assertion::new(
            "gbz.pairing",
            bad_pairing == 0,
            format!("{bad_pairing} non-degenerate states without a (C2,C3) or (C1,C4) zero pair"),
        ),
        Assertion::new(
            "gbz.phase",
            worst_phase < 1e-8,
            format!("worst chain A/B phase mismatch {}", fmt_sci(worst_phase)),
        ),
    ])
}

/// Closed-form spectrum of a model, when one exists.
pub fn analytic_spectrum(model: &ModelSpec) -> Result<Option<SpectrumSet>> {
    Ok(match model {
        ModelSpec::Ring(r) => Some(analytic_ring_spectrum(r.n, r.m, r.t_r())?),
        ModelSpec::SegmentedRing(s) => Some(analytic_segmented_spectrum(s)?),
        ModelSpec::UniformRing(u) => Some(analytic_uniform_ring_spectrum(u.sites, u.t_r())?),
        ModelSpec::ObcChain(o) => {
            let vals = (1..=o.sites as i64)
                .map(|k| obc_momentum(o.sites, o.t_r(), k).map(|(z, _)| z + o.t_r() / z))
                .collect::<Result<Vec<_>>>()?;
            Some(SpectrumSet::new(vals, SpectrumSource::Analytic)?)
        }
        ModelSpec::Lattice2d(s) => {
            let (Some(x), Some(y)) = (analytic_spectrum(&s.x)?, analytic_spectrum(&s.y)?) else {
                return Ok(None);
            };
            Some(minkowski_sum(&x.values, &y.values))
        }
        ModelSpec::Chart(_) => None,
    })
}

fn spectra_assertions(model: &ModelSpec, sys: &EigenSystem, tol: &Tolerances, dir: &Path) -> Result<Vec<Assertion>> {
    let numeric = SpectrumSet::new(sys.eigenvalues.clone(), SpectrumSource::Numeric)?;
    let analytic = analytic_spectrum(model)?;
    let mut sets = vec![&numeric];
    if let Some(a) = &analytic {
        sets.push(a);
    }
    write_file(&dir.join("spectrum.csv"), |w| export::write_spectrum_csv(w, &sets))?;
    let mut out = Vec::new();
    if let Some(a) = &analytic {
        let m = match_spectra(&numeric.values, &a.values, tol.match_);
        out.push(Assertion::new(
            "spectra.closed_form",
            m.is_complete(),
            format!(
                "{} of {} values matched, max distance {}, max |Im E| {}",
                m.pairs.len(),
                numeric.len(),
                fmt_sci(m.max_distance),
                fmt_sci(reality_gap(&numeric.values))
            ),
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub m: usize,
    pub t_r: f64,
    pub state: usize,
    pub energy_re: f64,
    pub energy_im: f64,
    pub purity: f64,
    pub d: Option<f64>,
    pub g: Option<f64>,
    pub partition_sum: Option<f64>,
    pub det_mag: Option<f64>,
    pub degenerate: bool,
    pub passed: bool,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub n: usize,
    pub m: usize,
    pub t_r: f64,
    pub spectrum_file: String,
    pub states: usize,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub rows: Vec<SweepRow>,
    pub manifest: ManifestEntry,
    pub numeric: Option<SpectrumSet>,
    pub analytic: Option<SpectrumSet>,
}

/// Evaluates one ring of a sweep. Failures are recorded, not returned.
pub fn sweep_point(n: usize, m: usize, t_r: f64, analyses: &[Analysis], tol: &Tolerances) -> SweepPoint {
    let file = format!("spectra/ring_N{n}_M{m}_t{t_r}.csv");
    let failed = |e: Error| SweepPoint {
        rows: vec![SweepRow {
            n,
            m,
            t_r,
            state: 0,
            energy_re: f64::NAN,
            energy_im: f64::NAN,
            purity: f64::NAN,
            d: None,
            g: None,
            partition_sum: None,
            det_mag: None,
            degenerate: false,
            passed: false,
            error: e.to_string(),
        }],
        manifest: ManifestEntry {
            n,
            m,
            t_r,
            spectrum_file: file.clone(),
            states: 0,
            passed: false,
            error: Some(e.to_string()),
        },
        numeric: None,
        analytic: None,
    };
    let spec = match RingSpec::new(n, m, t_r) {
        Ok(s) => s,
        Err(e) => return failed(e),
    };
    let sys = match crate::lattice::build_ring(&spec).and_then(|h| eigendecompose(&h, tol.eig)) {
        Ok(s) => s,
        Err(e) => return failed(e),
    };
    let report = analyze(&sys, &crate::pse::Segmentation::ring(n, m), t_r, tol.gap);
    let (de, ge) = expected_decay(n, m, t_r);
    let want_gbz = analyses.contains(&Analysis::Gbz);
    let dets: Vec<Option<f64>> = sys
        .eigenvalues
        .iter()
        .map(|&e| {
            want_gbz
                .then(|| crate::gbz::roots_from_energy(e, t_r).map(|r| crate::gbz::scaled_boundary_det(&r, n, m, t_r)).ok())
                .flatten()
        })
        .collect();
    let rows: Vec<SweepRow> = report
        .states
        .iter()
        .map(|s| {
            let mut passed = s.error.is_none();
            if !s.degenerate {
                passed &= s.purity < tol.purity;
                passed &= matches!((s.d, s.g), (Some(d), Some(g)) if (d - de).abs() <= tol.decay && (g - ge).abs() <= tol.decay);
                if t_r != 1.0 {
                    passed &= matches!(s.partition_sum, Some(p) if (p - 1.0).abs() <= tol.decay);
                }
            }
            if let Some(d) = dets[s.state] {
                passed &= d < tol.det;
            }
            SweepRow {
                n,
                m,
                t_r,
                state: s.state,
                energy_re: s.energy.re,
                energy_im: s.energy.im,
                purity: s.purity,
                d: s.d,
                g: s.g,
                partition_sum: s.partition_sum,
                det_mag: dets[s.state],
                degenerate: s.degenerate,
                passed,
                error: s.error.clone().unwrap_or_default(),
            }
        })
        .collect();
    let analytic = analytic_ring_spectrum(n, m, t_r).ok();
    let spectrum_ok = analytic
        .as_ref()
        .map(|a| match_spectra(&sys.eigenvalues, &a.values, tol.match_).is_complete())
        .unwrap_or(false);
    let passed = rows.iter().all(|r| r.passed) && (spectrum_ok || !analyses.contains(&Analysis::Spectra));
    SweepPoint {
        manifest: ManifestEntry {
            n,
            m,
            t_r,
            spectrum_file: file,
            states: rows.len(),
            passed,
            error: None,
        },
        rows,
        numeric: SpectrumSet::new(sys.eigenvalues, SpectrumSource::Numeric).ok(),
        analytic,
    }
}

fn run_sweep(config: &ExperimentConfig, sweep: &SweepSpec, dir: &Path) -> Result<Vec<Assertion>> {
    let tol = &config.tolerances;
    let mut points: Vec<SweepPoint> = sweep
        .points()
        .par_iter()
        .map(|&(n, m, t)| sweep_point(n, m, t, &config.analyses, tol))
        .collect();
    points.sort_by(|a, b| {
        let (x, y) = (&a.manifest, &b.manifest);
        x.n.cmp(&y.n).then(x.m.cmp(&y.m)).then(x.t_r.total_cmp(&y.t_r))
    });

    write_file(&dir.join("sweep.csv"), |w| {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record([
            "N", "M", "t_r", "state", "E_re", "E_im", "purity", "D", "G", "partition_sum", "det_mag", "degenerate",
            "passed", "error",
        ])?;
        let o = |x: Option<f64>| x.map(export::num).unwrap_or_default();
        for p in &points {
            for r in &p.rows {
                out.write_record([
                    r.n.to_string(),
                    r.m.to_string(),
                    export::num(r.t_r),
                    r.state.to_string(),
                    export::num(r.energy_re),
                    export::num(r.energy_im),
                    export::num(r.purity),
                    o(r.d),
                    o(r.g),
                    o(r.partition_sum),
                    o(r.det_mag),
                    r.degenerate.to_string(),
                    r.passed.to_string(),
                    r.error.clone(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    })?;
    for p in &points {
        let mut sets = Vec::new();
        if let Some(s) = &p.numeric {
            sets.push(s);
        }
        if let Some(s) = &p.analytic {
            sets.push(s);
        }
        write_file(&dir.join(&p.manifest.spectrum_file), |w| export::write_spectrum_csv(w, &sets))?;
    }
    let manifest: Vec<&ManifestEntry> = points.iter().map(|p| &p.manifest).collect();
    write_file(&dir.join("manifest.json"), |w| export::write_json(w, &manifest))?;

    let rows: Vec<&SweepRow> = points.iter().flat_map(|p| &p.rows).collect();
    let failed_rows = rows.iter().filter(|r| !r.passed).count();
    let degenerate = rows.iter().filter(|r| r.degenerate).count();
    let failed_points = points.iter().filter(|p| !p.manifest.passed).count();
    Ok(vec![
        Assertion::new(
            "sweep.rows",
            failed_rows == 0,
            format!("{} rows, {failed_rows} failed, {degenerate} degenerate (not checked)", rows.len()),
        ),
        Assertion::new(
            "sweep.points",
            failed_points == 0,
            format!("{} grid points, {failed_points} failed", points.len()),
        ),
    ])
}
