//! Best uniform approximation of a fixed mean by a rival linear family.
//!
//! The separation a design can achieve between a true mean and a rival
//! family is capped by how well the family approximates the mean in the
//! sup norm, so the exchange iteration below is the analytic core of every
//! T-optimal design in this crate. The run prints each iteration of the
//! reference exchange, the final coefficients, and the extremal set where
//! the residual alternates; a second pass solves the same problem under a
//! precision weight that fades toward the interval ends.

use discrimdes::approx::{extremal_set, remes_exchange, weighted_problem};
use discrimdes::design::DesignSpace;
use discrimdes::models::{Basis, Family, FixedMean, Precision};

fn main() -> discrimdes::Result<()> {
    let space = DesignSpace::new(-1.0, 1.0, 1001)?;
    let target = FixedMean::Polynomial(vec![1.0, 1.0, 0.0, 1.0]);
    let basis = Basis::monomials(2)?;

    println!("target 1 + x + x^3, approximated by span(1, x) on [-1, 1]\n");
    let ba = remes_exchange(&target, &basis, &space, 1e-11, 100)?;
    println!(" iter  coefficients      level    reference");
    for (i, step) in ba.trace.iter().enumerate() {
        let theta: Vec<String> = step.theta.iter().map(|c| format!("{c:7.4}")).collect();
        let refs: Vec<String> = step.reference.iter().map(|x| format!("{x:7.4}")).collect();
        println!(
            "{:>5}  {}   {:7.4}   {}",
            i + 1,
            theta.join(" "),
            step.level,
            refs.join(" ")
        );
    }
    println!("\ncoefficients  {:.6} + {:.6} x", ba.theta_bar[0], ba.theta_bar[1]);
    println!("sup error     {:.8}", ba.sup_error);
    println!("iterations    {}", ba.iterations);

    // The residual x^3 - 0.75x alternates on four points even though the
    // basis has dimension two; that degeneracy is exactly what makes the
    // optimal design non-unique (see the optimal_design_family example).
    let ext = extremal_set(
        &target,
        &Family::linear(basis.clone()),
        &ba.theta_bar,
        &space,
        1e-8,
    )?;
    print!(
        "extremal set  {} points for a {}-dimensional basis:",
        ext.points.len(),
        basis.len()
    );
    for (x, sign) in ext.points.iter().zip(&ba.residual_signs) {
        print!("  {x:.4} ({})", if *sign > 0 { "+" } else { "-" });
    }
    println!("\n");

    // Heteroscedastic variant: observations near the ends carry precision
    // 1 - x^2, so the approximation problem picks up a weight and its
    // extremal points move inward.
    let precision = Precision::one_minus_x2(1.0)?;
    let (weighted_target, weighted_basis) = weighted_problem(&target, &basis, &precision);
    let wba = remes_exchange(&weighted_target, &weighted_basis, &space, 1e-11, 100)?;
    println!("with precision weight 1 - x^2:");
    println!(
        "coefficients  {:.6} + {:.6} x",
        wba.theta_bar[0], wba.theta_bar[1]
    );
    println!("sup error     {:.8}", wba.sup_error);
    let pts: Vec<String> = wba.extremal_points.iter().map(|x| format!("{x:.4}")).collect();
    println!("extremal set  {}", pts.join("  "));
    Ok(())
}
