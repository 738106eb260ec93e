//! Power of the F-test for a cubic departure under competing designs.
//!
//! A line is fitted where the truth may be a full cubic; the F-test of the
//! two extension coefficients runs at level 5% on n = 50 observations. The
//! study compares three designs: the patched vertex design that maximizes
//! separation, the interior member of the same optimal family, and the
//! determinant design for the tested coefficients. For nested linear
//! models the simulated rates can be checked against the exact
//! noncentral-F distribution, so the run prints both.

use discrimdes::criteria::schur_noncentrality;
use discrimdes::design::DesignSpace;
use discrimdes::models::{Basis, FixedMean, NestedPair};
use discrimdes::simulate::{f_quantile, noncentral_f_tail, simulate_power, SimConfig};
use discrimdes::solvers::{enumerate_t_optimal, modify_design};
use discrimdes::Design;
use nalgebra::DVector;

/// Exact rejection probability of the nested-linear F-test under the
/// rounded allocation.
fn analytic_power(
    design: &Design,
    pair: &NestedPair,
    cfg: &SimConfig,
    space: &DesignSpace,
) -> discrimdes::Result<f64> {
    let rounded = design.round_to(cfg.n)?.as_design(space)?;
    let (m0, m1) = (pair.s(), pair.m1());
    let lambda = cfg.n as f64 * schur_noncentrality(&rounded, pair)? / cfg.sigma2;
    let crit = f_quantile(m0, cfg.n - m1, 1.0 - cfg.alpha)?;
    Ok(noncentral_f_tail(m0, cfg.n - m1, lambda, crit))
}

fn main() -> discrimdes::Result<()> {
    let space = DesignSpace::new(-1.0, 1.0, 1001)?;
    let cfg = SimConfig::new(50, 0.1, 1000, 20_240_814, 0.05)?;

    // Designs under comparison. The separation-optimal family comes from
    // the cubic-vs-line enumeration; its vertex lacks one endpoint and is
    // patched with 2% mass exactly like a practitioner would.
    let eta_shape = FixedMean::Polynomial(vec![1.0, 1.0, 0.0, 1.0]);
    let rival_basis = Basis::monomials(2)?;
    let poly = enumerate_t_optimal(
        &eta_shape,
        &discrimdes::models::Family::linear(rival_basis.clone()),
        &space,
    )?;
    let vertex = poly.vertex_design(0, &space)?;
    let patched = modify_design(&vertex, -1.0, 0.02, &space)?;
    let interior = poly.mixture(&[0.5, 0.5], &space)?;
    let s6 = 1.0 / 6.0_f64.sqrt();
    let determinant = Design::new(&[-1.0, -s6, s6, 1.0], &[0.2, 0.3, 0.3, 0.2], &space)?;

    // The unpatched vertex has three support points and cannot estimate
    // four cubic coefficients once rounded to runs.
    let pair0 = NestedPair::linear(
        Basis::monomials(4)?,
        2,
        DVector::from_column_slice(&[0.0, 1.0]),
    )?;
    match simulate_power(&vertex, &FixedMean::Polynomial(vec![1.0, 1.0, 0.0, 1.0]), &pair0, &cfg) {
        Err(e) => println!("vertex design unpatched: {e}\n"),
        Ok(_) => println!("vertex design unpatched: unexpectedly estimable\n"),
    }

    println!(
        "power of the 5% F-test for (c, d) = (0, 0), n = {}, sigma^2 = {}, {} replications",
        cfg.n, cfg.sigma2, cfg.reps
    );
    println!("truth: 1 + x + d x^3, d swept; 'exact' is the noncentral-F value\n");
    let designs = [
        ("patched vertex ", &patched),
        ("interior member", &interior),
        ("determinant    ", &determinant),
    ];
    println!("      d | {:^24} | {:^24} | {:^24}", designs[0].0, designs[1].0, designs[2].0);
    println!("        | {:^24} | {:^24} | {:^24}", "rate (se)    exact", "rate (se)    exact", "rate (se)    exact");
    for d in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let truth = FixedMean::Polynomial(vec![1.0, 1.0, 0.0, d]);
        let pair = NestedPair::linear(
            Basis::monomials(4)?,
            2,
            DVector::from_column_slice(&[0.0, d]),
        )?;
        print!("  {d:5.2} |");
        for (_, design) in &designs {
            let sim = simulate_power(design, &truth, &pair, &cfg)?;
            let exact = analytic_power(design, &pair, &cfg, &space)?;
            print!(
                " {:.3} ({:.3})      {:.3} |",
                sim.estimates[0], sim.std_errors[0], exact
            );
        }
        println!();
    }
    println!("\nevery column tracks the exact noncentral-F rate within Monte Carlo");
    println!("error; along this single swept direction the separation family leads,");
    println!("while the determinant design balances its power over both tested");
    println!("coefficients instead of concentrating on one");
    Ok(())
}
