//! The Cauchy–Green transform on closed forms, and a refinement study.

use jdisc::cauchy::{cauchy_green, cauchy_green_normalized};
use jdisc::grid::{differentiate, make_grid, value_at_origin, zeta_derivative_at_origin};
use jdisc::{DiscMap, C64};

fn sup_err(f: &DiscMap, exact: impl Fn(C64) -> C64) -> f64 {
    let g = f.grid();
    (0..g.node_count())
        .map(|n| (f.node(n)[0] - exact(g.node_point(n))).norm())
        .fold(0.0, f64::max)
}

fn main() -> jdisc::Result<()> {
    let g = make_grid(16, 32)?;
    let one = cauchy_green(&DiscMap::scalar_fn(&g, |_| C64::new(1.0, 0.0)));
    println!("T(1) - conj(z):      {:.3e}", sup_err(&one, |z| z.conj()));
    let t = cauchy_green(&DiscMap::scalar_fn(&g, |z| z));
    println!("T(z) - (|z|^2 - 1):  {:.3e}", sup_err(&t, |z| C64::new(z.norm_sqr() - 1.0, 0.0)));

    let u = DiscMap::scalar_fn(&g, |z| z.exp() * z.conj());
    let (_, dzb) = differentiate(&cauchy_green(&u));
    println!("dbar T(u) - u:       {:.3e}", dzb.sub(&u)?.sup_norm());
    let t0 = cauchy_green_normalized(&u);
    println!(
        "T0(u)(0), d T0(u)(0): {:.1e}, {:.1e}",
        value_at_origin(&t0)[0].norm(),
        zeta_derivative_at_origin(&t0)[0].norm()
    );

    println!("\nT(|z|^3) against (2/5)|z|^3 conj(z):");
    let mut prev: Option<(usize, f64)> = None;
    for (nr, na) in [(8, 16), (12, 24), (16, 32), (24, 48)] {
        let g = make_grid(nr, na)?;
        let t = cauchy_green(&DiscMap::scalar_fn(&g, |z| C64::new(z.norm().powi(3), 0.0)));
        let e = sup_err(&t, |z| z.conj() * 0.4 * z.norm().powi(3));
        let order = prev.map(|(m, p)| (p / e).ln() / (na as f64 / m as f64).ln());
        println!("  ({nr:>2},{na:>2})  error {e:.3e}  order {}", order.map_or("-".into(), |o| format!("{o:.2}")));
        prev = Some((na, e));
    }
    Ok(())
}
