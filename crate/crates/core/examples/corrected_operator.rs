//! Kernel, cokernel and finite-rank correction of a linearization with a
//! known two-dimensional kernel.

use jdisc::grid::make_grid;
use jdisc::operator::{
    apply_adjoint_df, apply_df, build_from_linearization, discrete_cokernel, generalized_analytic_residual,
    solve_df, BuildOptions, Linearization,
};
use jdisc::structure::CMat;
use jdisc::{DiscMap, C64};

fn main() -> jdisc::Result<()> {
    let g = make_grid(8, 16)?;
    let n = g.node_count();
    let zero = vec![CMat::zeros(2, 2); n];
    // V = (conj z, |z|^2 - 1) solves V + T(B1 V) = 0 for this B1.
    let b1 = (0..n)
        .map(|k| {
            let z = g.node_point(k);
            CMat::from_row_slice(2, 2, &[-z, C64::new(1.0, 0.0), -z * z, z])
        })
        .collect();
    let lin = Linearization::from_coefficients(&g, 2, zero.clone(), b1, zero)?;

    let cokernel = discrete_cokernel(&lin, false, 1e-8);
    println!("cokernel dimension {}", cokernel.len());
    for v in &cokernel {
        println!("  generalized-analytic residual {:.2e}", generalized_analytic_residual(&lin, v)?);
    }

    let op = build_from_linearization(lin, &DiscMap::zeros(&g, 2), false, &BuildOptions::default())?;
    println!("kernel dimension {}", op.kernel_dim());
    println!("sigma_max {:.3e}, threshold {:.1e}", op.singular_values[0], op.kernel_threshold);
    println!("corrected 1/sigma_min = C = {:.3}", op.inv_norm_estimate);

    let u = DiscMap::from_fn(&g, 2, |z| vec![z.exp(), z.conj() * z]);
    let w = DiscMap::from_fn(&g, 2, |z| vec![z.conj() + 0.3, (z * 2.0).cos()]);
    let duality = apply_df(&op, &u)?.inner(&w)? - u.inner(&apply_adjoint_df(&op, &w)?)?;
    println!("duality defect {duality:.2e}");

    let sol = solve_df(&op, &w)?;
    println!(
        "solve: {} iterations, residual {:.2e}, Hoelder slack {:.3}",
        sol.iterations,
        apply_df(&op, &sol.solution)?.sub(&w)?.sup_norm(),
        sol.slack
    );
    Ok(())
}
