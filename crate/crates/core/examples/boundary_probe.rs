//! The boundary probe on the unit ball: discs pushed outward along an arc
//! while staying inside the domain.

use std::f64::consts::PI;

use jdisc::extremal::{domain_zoo, run_probe, ProbeConfig};
use jdisc::grid::make_grid;
use jdisc::solver::NewtonConfig;
use jdisc::structure::{to_beltrami, StructureField};
use jdisc::{DiscMap, C64};

fn main() -> jdisc::Result<()> {
    let g = make_grid(24, 96)?;
    let j = StructureField::standard(2);
    let a = to_beltrami(&j);
    let dom = domain_zoo("ball", &[1.0, 2.0])?;
    let f = DiscMap::from_fn(&g, 2, |z| vec![z * 0.5, C64::new(0.0, 0.0)]);
    let cfg = ProbeConfig {
        arc_p: [0.5, 2.0 * PI - 0.5],
        arc_p1: [1.5, 2.0 * PI - 1.5],
        plateau_r: 3.0,
        r_values: vec![0.5, 0.75, 1.0],
        t_grid: vec![0.0, 0.02, 0.04, 0.08],
        compact_margin: 0.01,
        holomorphic_tol: 1e-8,
        enforce_t_hat: false,
    };
    let d = run_probe(&a, &j, &dom, &f, &cfg, &NewtonConfig { epsilon_ball: 1e3, ..Default::default() })?;
    println!("plateau length {:.3}, Re phi(0) = {:.4} >= lR/2pi = {:.4}", d.plateau_length, d.phi0, d.bump_lower_bound);
    println!("{:>6} {:>6} {:>10} {:>10} {:>9}", "r", "t", "lambda", "max rho", "inside");
    for c in &d.cells {
        println!(
            "{:>6} {:>6} {:>10.5} {:>10.4} {:>9}",
            c.r,
            c.t,
            c.lambda.unwrap_or(f64::NAN),
            c.max_rho.unwrap_or(f64::NAN),
            c.contained
        );
    }
    println!("{}", d.verdict.summary);
    Ok(())
}
