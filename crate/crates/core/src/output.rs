//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! identical runs produce byte-identical files.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::classical::AuxiliaryTrajectory;
use crate::expansion::ExpansionSpectrum;
use crate::packet::PacketState;
use crate::pde::GridWavefunction;

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> io::Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Writes a header row and one comma-separated line per row.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io::Error::other)?;
    writeln!(w)?;
    w.flush()
}

pub const TRAJECTORY_HEADER: [&str; 7] = ["tau", "re_u", "im_u", "re_du", "im_du", "mass", "abel_drift"];

pub fn write_trajectory(path: &Path, traj: &AuxiliaryTrajectory) -> io::Result<()> {
    let drift = traj.abel_drift();
    write_csv(
        path,
        &TRAJECTORY_HEADER,
        (0..traj.len()).map(|i| {
            let tau = traj.tau[i];
            [
                tau,
                traj.u[i].re,
                traj.u[i].im,
                traj.du[i].re,
                traj.du[i].im,
                traj.model.mass(tau),
                drift[i],
            ]
            .map(fmt)
            .to_vec()
        }),
    )
}

pub const PACKET_HEADER: [&str; 9] = [
    "tau",
    "re_omega",
    "im_omega",
    "re_b",
    "im_b",
    "width",
    "lambda",
    "lambda_rel_err",
    "norm_error",
];

/// |λ − λ₀|/λ₀, or the absolute difference when λ₀ = 0.
pub fn lambda_error(lambda: f64, lambda0: f64) -> f64 {
    let d = (lambda - lambda0).abs();
    if lambda0 != 0.0 {
        d / lambda0
    } else {
        d
    }
}

pub fn write_packet(path: &Path, states: &[PacketState], lambda0: f64) -> io::Result<()> {
    write_csv(
        path,
        &PACKET_HEADER,
        states.iter().map(|s| {
            [
                s.tau,
                s.omega.re,
                s.omega.im,
                s.b.re,
                s.b.im,
                s.width,
                s.lambda,
                lambda_error(s.lambda, lambda0),
                (s.quadrature_norm() - 1.0).abs(),
            ]
            .map(fmt)
            .to_vec()
        }),
    )
}

pub const SPECTRUM_HEADER: [&str; 6] = ["n", "re_c", "im_c", "prob", "poisson_ref", "abs_err"];

pub fn write_spectrum(path: &Path, spectrum: &ExpansionSpectrum) -> io::Result<()> {
    write_csv(
        path,
        &SPECTRUM_HEADER,
        spectrum
            .coefficients
            .iter()
            .zip(&spectrum.poisson_ref)
            .enumerate()
            .map(|(n, (c, &r))| {
                let p = c.norm_sqr();
                let mut row = vec![n.to_string()];
                row.extend([c.re, c.im, p, r, (p - r).abs()].map(fmt));
                row
            }),
    )
}

pub const SNAPSHOT_HEADER: [&str; 4] = ["x", "re_psi", "im_psi", "density"];

pub fn write_snapshot(path: &Path, wf: &GridWavefunction) -> io::Result<()> {
    write_csv(
        path,
        &SNAPSHOT_HEADER,
        wf.psi
            .iter()
            .enumerate()
            .map(|(j, z)| [wf.grid.x(j), z.re, z.im, z.norm_sqr()].map(fmt).to_vec()),
    )
}

/// File-name-safe time tag, e.g. 1.5 → "t1.500000".
pub fn time_tag(t: f64) -> String {
    format!("t{t:.6}")
}
