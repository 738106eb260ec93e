//! Closed-form separation designs for polynomial means.
//!
//! When a degree-m polynomial mean is set against the polynomials of lower
//! degree, the best-approximation residual is a scaled Chebyshev polynomial
//! and everything is explicit: the optimal design sits on the alternation
//! points cos(k pi / m) with weights given by the bordered interpolation
//! system. The run solves two classic cases through the closed-form route
//! and checks them against the known values.

use discrimdes::design::DesignSpace;
use discrimdes::models::{Basis, Family, FixedMean};
use discrimdes::solvers::{solve_t_chebyshev, verify_t_optimal};

fn print_design(label: &str, design: &discrimdes::Design) {
    print!("{label}:");
    for (x, w) in design.iter() {
        print!("  {x:7.4} ({w:.4})");
    }
    println!();
}

fn main() -> discrimdes::Result<()> {
    let space = DesignSpace::new(-1.0, 1.0, 1001)?;

    // Cubic against quadratics: residual proportional to cos(3 arccos x),
    // support at (-1, -1/2, 1/2, 1), weights (1/6, 1/3, 1/3, 1/6).
    let cubic = FixedMean::Polynomial(vec![0.0, 0.0, 0.0, 1.0]);
    let quadratics = Basis::monomials(3)?;
    let design = solve_t_chebyshev(&cubic, &quadratics, &space)?;
    print_design("x^3 vs {1, x, x^2}", &design);
    let report = verify_t_optimal(
        &design,
        &cubic,
        &Family::linear(quadratics.clone()),
        &space,
        1e-8,
    )?;
    println!(
        "  separation {:.6} (closed form 1/16 = {:.6}), max violation {:+.1e}",
        report.value,
        1.0 / 16.0,
        report.max_violation
    );

    // Quartic against cubics: support at the five points cos(k pi / 4),
    // weights (1/8, 1/4, 1/4, 1/4, 1/8).
    let quartic = FixedMean::Polynomial(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    let cubics = Basis::monomials(4)?;
    let design = solve_t_chebyshev(&quartic, &cubics, &space)?;
    print_design("\nx^4 vs {1, x, x^2, x^3}", &design);
    let report = verify_t_optimal(&design, &quartic, &Family::linear(cubics), &space, 1e-8)?;
    println!(
        "  separation {:.8} (closed form 1/64 = {:.8}), max violation {:+.1e}",
        report.value,
        1.0 / 64.0,
        report.max_violation
    );
    println!("  expected support: -1, -0.7071, 0, 0.7071, 1 with weights 1/8, 1/4, 1/4, 1/4, 1/8");

    // The same machinery copes with a full lower-degree part: adding any
    // polynomial the rival can match exactly leaves the design unchanged.
    let shifted = FixedMean::Polynomial(vec![3.0, -2.0, 1.5, 0.0, 1.0]);
    let cubics = Basis::monomials(4)?;
    let shifted_design = solve_t_chebyshev(&shifted, &cubics, &space)?;
    print_design("\n(x^4 + 1.5x^2 - 2x + 3) vs cubics", &shifted_design);
    println!("  the rival absorbs everything below x^4, so the design is the one above");
    Ok(())
}
