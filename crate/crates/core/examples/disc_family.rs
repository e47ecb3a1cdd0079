//! A family of discs along V = φ·f', its derivative at t = 0 and, with the
//! normalized transform, the pinned center.

use jdisc::grid::{make_grid, value_at_origin, zeta_derivative_at_origin};
use jdisc::operator::build_corrected;
use jdisc::solver::{make_family, make_family_normalized, NewtonConfig};
use jdisc::structure::{structure_zoo, to_beltrami};
use jdisc::variation::{check_derivative_realization, phi_times_fprime_from, variational_residual_real, Multiplier};
use jdisc::{DiscMap, C64};

fn main() -> jdisc::Result<()> {
    let g = make_grid(12, 24)?;
    let j = structure_zoo("pullback_poly", &[0.05])?;
    let a = to_beltrami(&j);
    let f = j
        .diffeo()
        .expect("pullback")
        .inverse_map(&DiscMap::from_fn(&g, 2, |z| vec![z * 0.5, C64::new(0.1, 0.0) + z * z * 0.2]));
    let phi = Multiplier::Coefficients(vec![C64::new(0.0, 0.0), C64::new(0.3, 0.1), C64::new(0.0, -0.2)]);
    let v = phi_times_fprime_from(&j, &f, &phi)?;
    println!("variational residual of V: {:.2e}", variational_residual_real(&j, &f, &v)?);

    let ts = [-0.04, -0.02, -0.01, -0.005, 0.005, 0.01, 0.02, 0.04];
    let cfg = NewtonConfig { tol: 1e-13, ..Default::default() };
    let op = build_corrected(&a, &f, false)?;
    let fam = make_family(&op, &f, &v, &ts, &cfg)?;
    println!("t_hat {:.3e}, t_max {:.3e}", fam.t_hat, fam.t_max);
    let rep = check_derivative_realization(&fam)?;
    for e in &rep.entries {
        println!("  t = {:<6} |(f_t - f_-t)/2t - V| = {:.3e}", e.t, e.defect);
    }
    println!("observed order {:.3}", rep.observed_order);

    let op0 = build_corrected(&a, &f, true)?;
    let pinned = make_family_normalized(&op0, &f, &v, &ts, &cfg)?;
    let f0 = value_at_origin(&f)[0];
    let (d0, dv) = (zeta_derivative_at_origin(&f)[0], zeta_derivative_at_origin(&v)[0]);
    for s in &pinned.samples {
        println!(
            "  t = {:<6} |f_t(0) - f(0)| = {:.1e}  |f_t'(0) - f'(0) - t V'(0)| = {:.1e}",
            s.t,
            (value_at_origin(&s.disc)[0] - f0).norm(),
            (zeta_derivative_at_origin(&s.disc)[0] - d0 - dv * s.t).norm()
        );
    }
    Ok(())
}
