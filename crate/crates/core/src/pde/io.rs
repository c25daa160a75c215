use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{FieldSnapshot, FieldTrajectory};
use crate::sim::LatticeTorus;

/// CSV export with columns `t, x1..xd, u`; same layout as particle
/// snapshots with a real-valued column.
pub fn write_field_trajectory_csv(path: &Path, traj: &FieldTrajectory) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    crate::sim::io_csv_header(&mut w, traj.torus.dim(), "u")?;
    for snap in &traj.snapshots {
        for (x, &v) in snap.u.iter().enumerate() {
            crate::sim::io_site_row(&mut w, &traj.torus, snap.t, x, &format!("{v}"))?;
        }
    }
    Ok(())
}

/// Dense binary dump (f64 little-endian, row-major) plus a JSON sidecar.
pub fn write_field_snapshot_binary(
    base: &Path,
    torus: &LatticeTorus,
    snap: &FieldSnapshot,
) -> std::io::Result<()> {
    let mut bin = BufWriter::new(File::create(base.with_extension("bin"))?);
    for &v in &snap.u {
        bin.write_all(&v.to_le_bytes())?;
    }
    bin.flush()?;
    let sidecar = serde_json::json!({
        "d": torus.dim(),
        "n": torus.side(),
        "t": snap.t,
        "dtype": "f64le",
        "layout": "row-major",
    });
    std::fs::write(
        base.with_extension("json"),
        serde_json::to_string_pretty(&sidecar).expect("sidecar serialization"),
    )
}
