use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{LatticeTorus, SimSnapshot, SimTrajectory};

/// Sidecar metadata for a dense binary snapshot dump.
#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    d: usize,
    n: usize,
    t: f64,
    dtype: &'a str,
    layout: &'a str,
}

/// CSV export with columns `t, x1..xd, eta`, one row per site per snapshot.
pub fn write_trajectory_csv(path: &Path, traj: &SimTrajectory) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv_header(&mut w, traj.torus.dim(), "eta")?;
    for snap in &traj.snapshots {
        for (x, &k) in snap.eta.iter().enumerate() {
            write_site_row(&mut w, &traj.torus, snap.t, x, &k.to_string())?;
        }
    }
    Ok(())
}

/// Dense binary dump (u64 little-endian, row-major in the flat site index)
/// plus a JSON sidecar holding `(d, N, t)`.
pub fn write_snapshot_binary(base: &Path, torus: &LatticeTorus, snap: &SimSnapshot) -> std::io::Result<()> {
    let mut bin = BufWriter::new(File::create(base.with_extension("bin"))?);
    for &k in &snap.eta {
        bin.write_all(&k.to_le_bytes())?;
    }
    bin.flush()?;
    let sidecar = Sidecar {
        d: torus.dim(),
        n: torus.side(),
        t: snap.t,
        dtype: "u64le",
        layout: "row-major",
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serialization");
    std::fs::write(base.with_extension("json"), json)
}

pub(crate) fn write_csv_header<W: Write>(w: &mut W, d: usize, value_name: &str) -> std::io::Result<()> {
    write!(w, "t")?;
    for i in 1..=d {
        write!(w, ",x{i}")?;
    }
    writeln!(w, ",{value_name}")
}

pub(crate) fn write_site_row<W: Write>(
    w: &mut W,
    torus: &LatticeTorus,
    t: f64,
    x: usize,
    value: &str,
) -> std::io::Result<()> {
    let c = torus.coords(x);
    write!(w, "{t}")?;
    for &ci in c.iter().take(torus.dim()) {
        write!(w, ",{ci}")?;
    }
    writeln!(w, ",{value}")
}
