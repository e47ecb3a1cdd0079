//! The `converge` table built from an in-memory configuration.

use jdisc::cli::{converge_csv, converge_rows};
use jdisc::config::Config;

fn main() -> jdisc::Result<()> {
    let cfg = Config::from_json(
        r#"{
            "grid": {"n_radial": 8, "n_angular": 16, "refinements": [[8, 16], [12, 24], [16, 32]]},
            "structure": {"name": "pullback_poly", "params": [0.05, 2]},
            "disc": {"coefficients": [[[0, 0], [0.5, 0]], [[0.1, 0], [0, 0], [0.2, 0]]], "kind": "pullback_image"}
        }"#,
    )?;
    print!("{}", converge_csv(&converge_rows(&cfg, 0)?));
    Ok(())
}
