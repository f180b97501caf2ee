//! Writes a random field as a snapshot, reads it back and confirms the bytes
//! and values survive.

use choquard::grid::SpatialGrid;
use choquard::model::ModelParams;
use choquard::random::{random_smooth_field, Lcg64, PacketSpec};
use choquard::snapshot;

fn main() -> choquard::Result<()> {
    let grid = SpatialGrid::new(3, 12.0, 16)?;
    let u = random_smooth_field(grid, &PacketSpec::default(), &mut Lcg64::new(7));
    let path = std::env::temp_dir().join("choquard_example.chqs");
    snapshot::write(&path, &u, 0.25, &ModelParams::reference())?;
    let back = snapshot::read(&path)?;
    let same = back.field.values() == u.values();
    println!("{} bytes, t = {}, params {}, identical = {same}", std::fs::metadata(&path)?.len(), back.time, back.params);
    Ok(())
}
