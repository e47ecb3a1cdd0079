//! Writing a disc as JSON and CSV and reading it back.

use jdisc::grid::make_grid;
use jdisc::io::{disc_from_csv, disc_to_csv, read_disc_json, write_disc_json};
use jdisc::DiscMap;

fn main() -> jdisc::Result<()> {
    let g = make_grid(6, 12)?;
    let f = DiscMap::from_fn(&g, 2, |z| vec![z.exp() * 0.5, z * z.conj()]);
    let dir = std::env::temp_dir().join("jdisc-export");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("disc.json");
    write_disc_json(&f, &path)?;
    assert_eq!(read_disc_json(&path)?, f);
    let csv = disc_to_csv(&f);
    assert_eq!(disc_from_csv(&csv, 6, 12)?, f);
    println!("wrote {}", path.display());
    for line in csv.lines().take(4) {
        println!("{line}");
    }
    Ok(())
}
