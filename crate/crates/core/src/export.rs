//! CSV and JSON writers. Floats use Rust's shortest round-trip formatting,
//! so identical inputs give byte-identical files.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::eigensolve::EigenSystem;
use crate::error::Result;
use crate::gbz::GbzReport;
use crate::pse::{Decay2D, PurityReport};
use crate::spectra::SpectrumSet;

/// Shortest round-trip float text, switching to exponent form for very
/// small or large magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// `index,re_E,im_E,residual`
pub fn write_eigen_csv<W: Write>(w: W, system: &EigenSystem) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["index", "re_E", "im_E", "residual"])?;
    for (k, (e, r)) in system.eigenvalues.iter().zip(&system.residuals).enumerate() {
        out.write_record([k.to_string(), num(e.re), num(e.im), num(*r)])?;
    }
    out.flush()?;
    Ok(())
}

/// `state_index,site,re,im,abs`
pub fn write_amplitudes_csv<W: Write>(w: W, system: &EigenSystem) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["state_index", "site", "re", "im", "abs"])?;
    for (k, v) in system.vectors.iter().enumerate() {
        for (s, z) in v.iter().enumerate() {
            out.write_record([k.to_string(), s.to_string(), num(z.re), num(z.im), num(z.norm())])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `state,E_re,E_im,purity,D,G,partition_sum,degenerate`
pub fn write_purity_csv<W: Write>(w: W, report: &PurityReport) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["state", "E_re", "E_im", "purity", "D", "G", "partition_sum", "degenerate"])?;
    for s in &report.states {
        out.write_record([
            s.state.to_string(),
            num(s.energy.re),
            num(s.energy.im),
            num(s.purity),
            opt(s.d),
            opt(s.g),
            opt(s.partition_sum),
            s.degenerate.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `state,E_re,E_im,det_mag,alpha1_re,alpha1_im,analytic_index,matched`
///
/// `alpha1` is the measured chain-A root on the branch that was compared.
pub fn write_gbz_csv<W: Write>(w: W, report: &GbzReport) -> Result<()> {
    let mut out = writer(w);
    out.write_record([
        "state",
        "E_re",
        "E_im",
        "det_mag",
        "alpha1_re",
        "alpha1_im",
        "analytic_index",
        "matched",
    ])?;
    for s in &report.states {
        out.write_record([
            s.state.to_string(),
            num(s.energy.re),
            num(s.energy.im),
            num(s.det_magnitude),
            opt(s.measured_alpha.map(|a| a.re)),
            opt(s.measured_alpha.map(|a| a.im)),
            s.analytic_index.map(|i| i.to_string()).unwrap_or_default(),
            s.matched.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `index,re,im,source`, one block per set.
pub fn write_spectrum_csv<W: Write>(w: W, sets: &[&SpectrumSet]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["index", "re", "im", "source"])?;
    for set in sets {
        for (k, e) in set.values.iter().enumerate() {
            out.write_record([k.to_string(), num(e.re), num(e.im), set.source.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `state,E_re,E_im,rank1_residual,factorizable,Dx,Gx,partition_x,Dy,Gy,partition_y,max_abs_log_ratio_x,degenerate`
pub fn write_decay2d_csv<W: Write>(w: W, rows: &[(usize, Complex64, bool, Decay2D)]) -> Result<()> {
    let mut out = writer(w);
    out.write_record([
        "state",
        "E_re",
        "E_im",
        "rank1_residual",
        "factorizable",
        "Dx",
        "Gx",
        "partition_x",
        "Dy",
        "Gy",
        "partition_y",
        "max_abs_log_ratio_x",
        "degenerate",
    ])?;
    for (k, e, degenerate, d) in rows {
        let x = d.x.as_ref();
        let y = d.y.as_ref();
        let xlog = x.map(|a| a.ratio_magnitudes.iter().map(|r| r.ln().abs()).fold(0.0, f64::max));
        out.write_record([
            k.to_string(),
            num(e.re),
            num(e.im),
            num(d.rank1_residual),
            d.factorizable.to_string(),
            opt(x.and_then(|a| a.d)),
            opt(x.and_then(|a| a.g)),
            opt(x.and_then(|a| a.partition_sum)),
            opt(y.and_then(|a| a.d)),
            opt(y.and_then(|a| a.g)),
            opt(y.and_then(|a| a.partition_sum)),
            opt(xlog),
            degenerate.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}
