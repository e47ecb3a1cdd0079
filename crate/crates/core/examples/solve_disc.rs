//! Newton inversion of F̃ for a pullback structure, where the exact disc is known.

use jdisc::grid::make_grid;
use jdisc::operator::residual_c1;
use jdisc::solver::{holomorphic_data, solve_disc, NewtonConfig};
use jdisc::structure::{structure_zoo, to_beltrami};
use jdisc::{DiscMap, C64};

fn main() -> jdisc::Result<()> {
    let g = make_grid(12, 24)?;
    let j = structure_zoo("pullback_poly", &[0.05])?;
    let a = to_beltrami(&j);
    let phi = *j.diffeo().expect("pullback");

    let p = DiscMap::from_fn(&g, 2, |z| vec![z * 0.4 + C64::new(0.1, 0.1), z * z * 0.3 - 0.2]);
    let truth = phi.inverse_map(&p);
    let h = holomorphic_data(&a, &truth)?;

    let cfg = NewtonConfig { tol: 1e-12, ..Default::default() };
    let sol = solve_disc(&a, &h, &p, &cfg)?;
    for (i, r) in sol.newton.history.iter().enumerate() {
        println!("newton {i}: |F(g) - h| = {r:.3e}");
    }
    println!("CR residual     {:.3e}", sol.cr_residual);
    println!("C1 residual     {:.3e}", residual_c1(&a, &sol.disc)?);
    println!("error vs truth  {:.3e}", sol.disc.sub(&truth)?.sup_norm());
    println!("estimated C     {:.3}", sol.operator.inv_norm_estimate);
    Ok(())
}
