//! Acceptance gate: one test per criterion, labeled A1-A11.
//!
//! Reference values come from closed-form minimax solutions, exact weight
//! identities, frozen independent solves, and analytic distribution
//! oracles; every tolerance is pinned next to its check. Each test prints
//! one `A<k> PASS:` / `A<k> FAIL:` line with the measured quantities
//! (visible under `--nocapture`, and always on failure).
//!
//! A9-LR is expected to fail: the chi-square reference for the
//! likelihood-ratio test is genuinely anticonservative when the tested
//! exponential term vanishes under the null, because the second rate is
//! then unidentified. The test records the measured levels instead of
//! papering over them.

use discrimdes::approx::{extremal_set, remes_exchange};
use discrimdes::criteria::{gram_ratio, info_matrices, kl_value, schur_noncentrality, t_value};
use discrimdes::design::{Design, DesignSpace};
use discrimdes::Error;
use discrimdes::models::{
    Basis, ExpSumModel, Family, FixedMean, GaussianObsModel, NestedPair, Precision,
};
use discrimdes::simulate::{simulate_mse, simulate_power, SimConfig};
use discrimdes::solvers::{
    enumerate_kl_optimal, enumerate_t_optimal, modify_design, run_ds, run_t_exchange,
    solve_kl_exchange, solve_t_chebyshev, support_bound_check, verify_t_optimal, ExchangeOpts,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space() -> DesignSpace {
    DesignSpace::new(-1.0, 1.0, 1001).unwrap()
}

fn opts() -> ExchangeOpts {
    ExchangeOpts {
        tol: 1e-7,
        ..ExchangeOpts::default()
    }
}

/// Print the per-criterion verdict line, then enforce it.
fn report(id: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("{id} {verdict}: {detail}");
    assert!(ok, "{id} {verdict}: {detail}");
}

/// Largest componentwise gap; infinite when the lengths differ.
fn max_gap(got: &[f64], want: &[f64]) -> f64 {
    if got.len() != want.len() {
        return f64::INFINITY;
    }
    got.iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Largest gap between a design and a reference support/weight pair.
fn design_gap(design: &Design, pts: &[f64], ws: &[f64]) -> f64 {
    max_gap(design.points(), pts).max(max_gap(design.weights(), ws))
}

fn show(design: &Design) -> String {
    design
        .iter()
        .map(|(x, w)| format!("{x:.4}({w:.4})"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cubic() -> FixedMean {
    FixedMean::polynomial(vec![1.0, 1.0, 0.0, 1.0])
}

fn line_basis() -> Basis {
    Basis::monomials(2).unwrap()
}

fn line_family() -> Family {
    Family::linear(line_basis())
}

#[test]
fn a01_minimax_line_fit_to_the_cubic_equioscillates() {
    let sp = space();
    let ba = remes_exchange(&cubic(), &line_basis(), &sp, 1e-11, 100).unwrap();
    let coeff_gap = (ba.theta_bar[0] - 1.0)
        .abs()
        .max((ba.theta_bar[1] - 1.75).abs());
    let ref_gap = max_gap(&ba.extremal_points, &[-1.0, -0.5, 0.5, 1.0]);
    let sup_gap = (ba.sup_error - 0.25).abs();
    let ok = coeff_gap <= 1e-6 && ref_gap <= 1e-4 && sup_gap <= 1e-8 && ba.iterations <= 10;
    report(
        "A1",
        ok,
        &format!(
            "coefficients ({:.8}, {:.8}), reference gap {:.1e}, sup error {:.10}, {} iterations",
            ba.theta_bar[0], ba.theta_bar[1], ref_gap, ba.sup_error, ba.iterations
        ),
    );
}

#[test]
fn a02_extremal_points_and_largest_separation() {
    let sp = space();
    let eta = cubic();
    let rival = line_family();
    let ba = remes_exchange(&eta, &line_basis(), &sp, 1e-11, 100).unwrap();
    let ext = extremal_set(&eta, &rival, &ba.theta_bar, &sp, 1e-6).unwrap();
    let a_gap = max_gap(&ext.points, &[-1.0, -0.5, 0.5, 1.0]);
    let run = run_t_exchange(&eta, &rival, &sp, &opts()).unwrap();
    let val_gap = (run.report.value - 0.0625).abs();
    let ok = !ext.degenerate && a_gap <= 1e-6 && val_gap <= 1e-6;
    report(
        "A2",
        ok,
        &format!(
            "extremal-set gap {:.1e}, exchange value {:.8} (target 0.0625)",
            a_gap, run.report.value
        ),
    );
}

#[test]
fn a03_every_member_of_the_optimal_family_verifies() {
    let sp = space();
    let eta = cubic();
    let rival = line_family();
    let fam = enumerate_t_optimal(&eta, &rival, &sp).unwrap();
    let support_gap = max_gap(&fam.support, &[-1.0, -0.5, 0.5, 1.0]);
    let mut vs = fam.vertices.clone();
    vs.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let vertex_gap = if vs.len() == 2 {
        let sixth = 1.0 / 6.0;
        let third = 1.0 / 3.0;
        max_gap(&vs[0], &[0.0, sixth, 0.5, third]).max(max_gap(&vs[1], &[third, 0.5, sixth, 0.0]))
    } else {
        f64::INFINITY
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut verified = 0;
    for _ in 0..5 {
        let t: f64 = rng.gen_range(0.05..0.95);
        let d = fam.mixture(&[t, 1.0 - t], &sp).unwrap();
        if verify_t_optimal(&d, &eta, &rival, &sp, 1e-8)
            .unwrap()
            .is_optimal()
        {
            verified += 1;
        }
    }
    let ok = fam.free_dimension == 1 && support_gap <= 1e-6 && vertex_gap <= 1e-8 && verified == 5;
    report(
        "A3",
        ok,
        &format!(
            "free dimension {}, vertex gap {:.1e}, {verified}/5 interior mixtures verified at 1e-8",
            fam.free_dimension, vertex_gap
        ),
    );
}

/// Reference designs for a cubic truth 1 + x + c x^2 + d x^3 against the
/// line span. Scaling (c, d) by -1 negates the deviation and leaves the
/// design unchanged, so each row is solved at both signs.
///
/// Rows whose reference values are exact fractions are held to 5e-3; the
/// |c| != |d| rows were recorded from a numeric run and carry up to 2e-2
/// of their own error (for (1, 2) the true interior points are the roots
/// -3/4 and 5/12 of 6x^2 + 2x - 15/8, so the recorded -0.77 sits exactly
/// 0.02 from the optimum and the check needs a hair of slack).
struct CubicRow {
    c: f64,
    d: f64,
    pts: [f64; 3],
    ws: [f64; 3],
    tol: f64,
}

const ROUNDING_SLACK: f64 = 1e-4;

const CUBIC_ROWS: [CubicRow; 7] = [
    CubicRow {
        c: 1.0,
        d: 0.0,
        pts: [-1.0, 0.0, 1.0],
        ws: [0.25, 0.5, 0.25],
        tol: 5e-3,
    },
    CubicRow {
        c: 1.0,
        d: 1.0,
        pts: [-1.0, 0.33, 1.0],
        ws: [1.0 / 6.0, 0.5, 1.0 / 3.0],
        tol: 5e-3,
    },
    CubicRow {
        c: 1.0,
        d: -1.0,
        pts: [-1.0, -0.33, 1.0],
        ws: [1.0 / 3.0, 0.5, 1.0 / 6.0],
        tol: 5e-3,
    },
    CubicRow {
        c: 2.0,
        d: 1.0,
        pts: [-1.0, 0.2, 1.0],
        ws: [0.2, 0.5, 0.3],
        tol: 2e-2,
    },
    CubicRow {
        c: 1.0,
        d: 2.0,
        pts: [-0.77, 0.411, 1.0],
        ws: [1.0 / 6.0, 0.5, 1.0 / 3.0],
        tol: 2e-2,
    },
    CubicRow {
        c: -2.0,
        d: 1.0,
        pts: [-1.0, -0.2, 1.0],
        ws: [0.3, 0.5, 0.2],
        tol: 2e-2,
    },
    CubicRow {
        c: 1.0,
        d: -2.0,
        pts: [-1.0, -0.411, 0.77],
        ws: [1.0 / 3.0, 0.5, 1.0 / 6.0],
        tol: 2e-2,
    },
];

#[test]
fn a04_cubic_vs_line_reference_designs() {
    let sp = space();
    let basis = line_basis();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut all_within = true;
    for row in &CUBIC_ROWS {
        for sign in [1.0, -1.0] {
            let eta = FixedMean::polynomial(vec![1.0, 1.0, sign * row.c, sign * row.d]);
            let design = solve_t_chebyshev(&eta, &basis, &sp).unwrap();
            let gap = design_gap(&design, &row.pts, &row.ws);
            if gap > row.tol + ROUNDING_SLACK {
                all_within = false;
                println!(
                    "A4 row ({}, {}) x {sign}: gap {gap:.2e} exceeds {:.0e}, solved {}",
                    row.c,
                    row.d,
                    row.tol,
                    show(&design)
                );
            }
            worst_excess = worst_excess.max(gap - row.tol);
        }
    }
    // (c, d) = (0, z): the optimum is a one-parameter family and a solver
    // may return any member; the reference design is the family vertex
    // that drops the left endpoint, checked by membership instead.
    let mut vertex_member = true;
    for sign in [1.0, -1.0] {
        let eta = FixedMean::polynomial(vec![1.0, 1.0, 0.0, sign]);
        let fam = enumerate_t_optimal(&eta, &line_family(), &sp).unwrap();
        let printed = Design::new(&[-0.5, 0.5, 1.0], &[1.0 / 6.0, 0.5, 1.0 / 3.0], &sp).unwrap();
        vertex_member &= fam.contains(&printed, 1e-6, 1e-8);
    }
    let ok = all_within && vertex_member;
    report(
        "A4",
        ok,
        &format!(
            "14 alternation-point solves within their per-row tolerances \
             (worst slack used {worst_excess:.1e}); pure-cubic reference design \
             is a family member: {vertex_member}"
        ),
    );
}

/// Frozen reference designs for two-term exponential truths against a
/// one-term rival, rates listed as (a1, b1, a2, b2) with mean
/// a1 e^(-b1 x) + a2 e^(-b2 x).
struct ExpRow {
    theta: [f64; 4],
    pts: [f64; 3],
    ws: [f64; 3],
}

const EXP_T_ROWS: [ExpRow; 5] = [
    ExpRow {
        theta: [1.0, 2.0, 1.0, 4.0],
        pts: [-1.0, -0.8, -0.02],
        ws: [0.088, 0.22, 0.692],
    },
    ExpRow {
        theta: [1.0, -1.0, 1.0, -2.0],
        pts: [-1.0, 0.6, 1.0],
        ws: [0.645, 0.246, 0.109],
    },
    ExpRow {
        theta: [1.0, -1.0, 1.0, 2.0],
        pts: [-1.0, -0.272, 1.0],
        ws: [0.168, 0.437, 0.395],
    },
    ExpRow {
        theta: [-1.0, 1.0, -1.0, 2.0],
        pts: [-1.0, -0.59, 1.0],
        ws: [0.109, 0.252, 0.639],
    },
    ExpRow {
        theta: [-1.0, -1.0, -1.0, -0.5],
        pts: [-1.0, 0.35, 1.0],
        ws: [0.394, 0.425, 0.181],
    },
];

#[test]
fn a05_exponential_separation_designs() {
    let sp = space();
    let rival = Family::exp_sum(1).unwrap();
    let mut worst = 0.0_f64;
    let mut all_verify = true;
    let mut all_bounded = true;
    for row in &EXP_T_ROWS {
        let truth = FixedMean::exp_sum(
            ExpSumModel::new(vec![
                (row.theta[0], row.theta[1]),
                (row.theta[2], row.theta[3]),
            ])
            .unwrap(),
        );
        let run = run_t_exchange(&truth, &rival, &sp, &opts()).unwrap();
        worst = worst.max(design_gap(&run.design, &row.pts, &row.ws));
        all_verify &= verify_t_optimal(&run.design, &truth, &rival, &sp, 1e-3)
            .unwrap()
            .is_optimal();
        all_bounded &= support_bound_check(&run.design, &truth, &rival, &sp).unwrap();
    }
    let ok = worst <= 2e-2 && all_verify && all_bounded;
    report(
        "A5",
        ok,
        &format!(
            "5 exchange solves within {worst:.1e} of the reference rows, \
             all verified at 1e-3, support counts within the rival-dimension bound"
        ),
    );
}

/// Frozen reference designs for the determinant-ratio criteria on the same
/// exponential pairs; s = 1 tests the second amplitude alone, s = 2 the
/// full second term. The second weight of the (-1, -1, -1, -0.5), s = 1
/// row is restored from the sum-to-one constraint (0.361; the raw 0.631
/// cannot be a weight alongside the other three).
struct DsRow {
    theta: [f64; 4],
    s: usize,
    pts: [f64; 4],
    ws: [f64; 4],
}

const EXP_DS_ROWS: [DsRow; 10] = [
    DsRow {
        theta: [1.0, 2.0, 1.0, 4.0],
        s: 1,
        pts: [-1.0, -0.859, -0.394, 0.717],
        ws: [0.087, 0.197, 0.257, 0.459],
    },
    DsRow {
        theta: [1.0, 2.0, 1.0, 4.0],
        s: 2,
        pts: [-1.0, -0.838, -0.404, 0.52],
        ws: [0.144, 0.258, 0.206, 0.392],
    },
    DsRow {
        theta: [1.0, -1.0, 1.0, -2.0],
        s: 1,
        pts: [-1.0, -0.03, 0.758, 1.0],
        ws: [0.293, 0.346, 0.249, 0.112],
    },
    DsRow {
        theta: [1.0, -1.0, 1.0, -2.0],
        s: 2,
        pts: [-1.0, 0.03, 0.697, 1.0],
        ws: [0.308, 0.253, 0.281, 0.158],
    },
    DsRow {
        theta: [1.0, -1.0, 1.0, 2.0],
        s: 1,
        pts: [-1.0, -0.636, 0.394, 1.0],
        ws: [0.142, 0.444, 0.311, 0.103],
    },
    DsRow {
        theta: [1.0, -1.0, 1.0, 2.0],
        s: 2,
        pts: [-1.0, -0.616, 0.313, 1.0],
        ws: [0.341, 0.309, 0.268, 0.082],
    },
    DsRow {
        theta: [-1.0, 1.0, -1.0, 2.0],
        s: 1,
        pts: [-1.0, -0.758, 0.03, 1.0],
        ws: [0.112, 0.249, 0.346, 0.293],
    },
    DsRow {
        theta: [-1.0, 1.0, -1.0, 2.0],
        s: 2,
        pts: [-1.0, -0.697, -0.03, 1.0],
        ws: [0.158, 0.281, 0.253, 0.308],
    },
    DsRow {
        theta: [-1.0, -1.0, -1.0, -0.5],
        s: 1,
        pts: [-1.0, -0.273, 0.657, 1.0],
        ws: [0.215, 0.361, 0.29, 0.134],
    },
    DsRow {
        theta: [-1.0, -1.0, -1.0, -0.5],
        s: 2,
        pts: [-1.0, -0.242, 0.576, 1.0],
        ws: [0.324, 0.271, 0.275, 0.13],
    },
];

#[test]
fn a06_determinant_ratio_reference_designs() {
    let sp = space();
    let family = Family::exp_sum(2).unwrap();
    let mut worst = 0.0_f64;
    for row in &EXP_DS_ROWS {
        let theta = DVector::from_column_slice(&row.theta);
        let tested = if row.s == 1 { vec![2] } else { vec![2, 3] };
        let pair = NestedPair::local(family.clone(), theta, tested).unwrap();
        let run = run_ds(&pair, &sp, row.s, &opts()).unwrap();
        worst = worst.max(design_gap(&run.design, &row.pts, &row.ws));
    }
    // linear benchmark: cubic against line, both extension coefficients
    let pair = NestedPair::linear(
        Basis::monomials(4).unwrap(),
        2,
        DVector::from_column_slice(&[0.0, 1.0]),
    )
    .unwrap();
    let run = run_ds(&pair, &sp, 2, &opts()).unwrap();
    let cubic_gap = design_gap(
        &run.design,
        &[-1.0, -0.408, 0.408, 1.0],
        &[0.2, 0.3, 0.3, 0.2],
    );
    let ok = worst <= 2e-2 && cubic_gap <= 5e-3;
    report(
        "A6",
        ok,
        &format!(
            "10 exponential solves within {worst:.1e} of the reference rows; \
             cubic-vs-line benchmark within {cubic_gap:.1e}"
        ),
    );
}

#[test]
fn a07_heteroscedastic_design_and_its_family() {
    let sp = space();
    let obs = GaussianObsModel::new(
        FixedMean::polynomial(vec![0.0, 0.0, 0.0, 8.0]),
        Precision::OneMinusX2 { scale: 1.0 },
    );
    let rival = line_family();
    let design = solve_kl_exchange(&obs, &rival, &sp, &opts()).unwrap();
    let s2 = 2.0_f64.sqrt();
    let outer = (2.0 + s2).sqrt() / 2.0;
    let inner = (2.0 - s2).sqrt() / 2.0;
    let support_gap = max_gap(design.points(), &[-outer, -inner, inner, outer]);
    let value = kl_value(&design, &obs, &rival, &sp).unwrap().value;
    // the optimal weights form a one-parameter family over the same four
    // points; its endpoints put half the mass on one outer point
    let fam = enumerate_kl_optimal(&obs, &rival, &sp).unwrap();
    let fam_support_gap = max_gap(&fam.support, &[-outer, -inner, inner, outer]);
    let mut vs = fam.vertices.clone();
    vs.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let lo = (2.0 - s2) / 4.0;
    let hi = s2 / 4.0;
    let vertex_gap = if vs.len() == 2 {
        max_gap(&vs[0], &[0.0, lo, hi, 0.5]).max(max_gap(&vs[1], &[0.5, hi, lo, 0.0]))
    } else {
        f64::INFINITY
    };
    let ok = support_gap <= 1e-3
        && (value - 1.0).abs() <= 1e-6
        && fam_support_gap <= 1e-6
        && vertex_gap <= 1e-6;
    report(
        "A7",
        ok,
        &format!(
            "support gap {:.1e}, criterion value {:.8} (target 1), family vertex gap {:.1e}; \
             design {}",
            support_gap,
            value,
            vertex_gap,
            show(&design)
        ),
    );
}

/// Random design on 4 to 8 well-separated points with positive weights.
fn random_design(rng: &mut ChaCha8Rng, sp: &DesignSpace) -> Design {
    loop {
        let k = rng.gen_range(4..=8);
        let mut pts: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        pts.sort_by(f64::total_cmp);
        if pts.windows(2).any(|w| w[1] - w[0] < 5e-2) {
            continue;
        }
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let ws: Vec<f64> = raw.iter().map(|w| w / total).collect();
        return Design::new(&pts, &ws, sp).unwrap();
    }
}

/// Random cubic with extension coefficients bounded away from zero so the
/// relative comparison stays meaningful.
fn random_cubic(rng: &mut ChaCha8Rng) -> (FixedMean, f64, f64) {
    let mut draw = |lo: f64, hi: f64| {
        let m: f64 = rng.gen_range(lo..hi);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    };
    let a = draw(0.0, 2.0);
    let b = draw(0.0, 2.0);
    let c = draw(0.3, 2.0);
    let d = draw(0.3, 2.0);
    (FixedMean::polynomial(vec![a, b, c, d]), c, d)
}

#[test]
fn a08_criterion_identities_on_random_designs() {
    let sp = space();
    let rival = line_family();
    let basis = line_basis();
    let full = Basis::monomials(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_gram = 0.0_f64;
    let mut worst_schur = 0.0_f64;
    let mut worst_kl = 0.0_f64;
    for _ in 0..100 {
        let d = random_design(&mut rng, &sp);
        let (eta, c, dd) = random_cubic(&mut rng);
        let t = t_value(&d, &eta, &rival, &sp).unwrap().value;
        let g = gram_ratio(&d, &eta, &basis).unwrap();
        worst_gram = worst_gram.max((t - g).abs() / t.abs().max(1e-12));
        let pair =
            NestedPair::linear(full.clone(), 2, DVector::from_column_slice(&[c, dd])).unwrap();
        let s = schur_noncentrality(&d, &pair).unwrap();
        worst_schur = worst_schur.max((t - s).abs() / t.abs().max(1e-12));
    }
    for _ in 0..50 {
        let d = random_design(&mut rng, &sp);
        let (eta, _, _) = random_cubic(&mut rng);
        let t = t_value(&d, &eta, &rival, &sp).unwrap().value;
        let obs = GaussianObsModel::new(eta, Precision::constant(1.0).unwrap());
        let k = kl_value(&d, &obs, &rival, &sp).unwrap().value;
        worst_kl = worst_kl.max((t - k).abs() / t.abs().max(1e-12));
    }
    let ok = worst_gram <= 1e-10 && worst_schur <= 1e-10 && worst_kl <= 1e-10;
    report(
        "A8",
        ok,
        &format!(
            "relative gaps over random designs: determinant ratio {worst_gram:.1e}, \
             noncentrality form {worst_schur:.1e}, unit-precision value {worst_kl:.1e}"
        ),
    );
}

fn determinant_design(sp: &DesignSpace) -> Design {
    Design::new(&[-1.0, -0.408, 0.408, 1.0], &[0.2, 0.3, 0.3, 0.2], sp).unwrap()
}

fn three_point_design(sp: &DesignSpace) -> Design {
    Design::new(&[-0.5, 0.5, 1.0], &[1.0 / 6.0, 0.5, 1.0 / 3.0], sp).unwrap()
}

fn four_point_design(sp: &DesignSpace) -> Design {
    let sixth = 1.0 / 6.0;
    let third = 1.0 / 3.0;
    Design::new(
        &[-1.0, -0.5, 0.5, 1.0],
        &[sixth, third, third, sixth],
        sp,
    )
    .unwrap()
}

#[test]
fn a09_f_test_holds_its_level() {
    let sp = space();
    let truth = FixedMean::polynomial(vec![1.0, 1.0, 0.0, 0.0]);
    let pair = NestedPair::linear(
        Basis::monomials(4).unwrap(),
        2,
        DVector::from_column_slice(&[0.0, 0.0]),
    )
    .unwrap();
    let cfg = SimConfig::new(50, 0.1, 1000, 90_210, 0.05).unwrap();
    let designs = [
        determinant_design(&sp),
        modify_design(&three_point_design(&sp), -1.0, 0.02, &sp).unwrap(),
        four_point_design(&sp),
    ];
    let rates: Vec<f64> = designs
        .iter()
        .map(|d| {
            simulate_power(d, &truth, &pair, &cfg)
                .unwrap()
                .rejection_rate()
        })
        .collect();
    let ok = rates.iter().all(|&r| (0.03..=0.07).contains(&r));
    report(
        "A9-F",
        ok,
        &format!(
            "null rejection rates {rates:.3?} under the three discrimination designs, \
             nominal band [0.03, 0.07]"
        ),
    );
}

#[test]
fn a09_lr_test_holds_its_level() {
    let sp = space();
    // truth has a single exponential term: the tested amplitude is zero
    // and the second rate is unidentified
    let truth = FixedMean::exp_sum(ExpSumModel::new(vec![(1.0, -1.0)]).unwrap());
    let pair = NestedPair::local(
        Family::exp_sum(2).unwrap(),
        DVector::from_column_slice(&[1.0, -1.0, 1.0, -2.0]),
        vec![2],
    )
    .unwrap();
    let cfg = SimConfig::new(50, 0.05, 1000, 4_242, 0.05).unwrap();
    let sep = Design::new(&[-1.0, 0.6, 1.0], &[0.645, 0.246, 0.109], &sp).unwrap();
    let designs = [
        modify_design(&sep, -0.2, 0.02, &sp).unwrap(),
        Design::new(
            &[-1.0, 0.03, 0.697, 1.0],
            &[0.308, 0.253, 0.281, 0.158],
            &sp,
        )
        .unwrap(),
    ];
    let rates: Vec<f64> = designs
        .iter()
        .map(|d| {
            simulate_power(d, &truth, &pair, &cfg)
                .unwrap()
                .rejection_rate()
        })
        .collect();
    let ok = rates.iter().all(|&r| (0.03..=0.07).contains(&r));
    report(
        "A9-LR",
        ok,
        &format!(
            "null rejection rates {rates:.3?}, nominal band [0.03, 0.07]; the chi-square \
             reference understates the statistic's null spread because the second rate \
             is unidentified when its amplitude vanishes, so the likelihood-ratio test \
             over-rejects at these sample sizes"
        ),
    );
}

#[test]
fn a10_estimation_error_against_covariance_oracle() {
    let sp = space();
    let truth = cubic();
    let full = Family::linear(Basis::monomials(4).unwrap());
    let pair = NestedPair::linear(
        Basis::monomials(4).unwrap(),
        2,
        DVector::from_column_slice(&[0.0, 1.0]),
    )
    .unwrap();
    let cfg = SimConfig::new(50, 0.1, 1000, 11_088, 0.05).unwrap();
    let designs = [
        determinant_design(&sp),
        modify_design(&three_point_design(&sp), -1.0, 0.02, &sp).unwrap(),
        four_point_design(&sp),
    ];
    // frozen reference errors per design (rows) and coefficient (columns)
    let reference: [[f64; 4]; 3] = [
        [0.0050, 0.0290, 0.0120, 0.0360],
        [0.0103, 0.0324, 0.0545, 0.0766],
        [0.0060, 0.0220, 0.0160, 0.0320],
    ];
    let mut worst_rel = 0.0_f64;
    let mut worst_sigma = 0.0_f64;
    let mut mses = Vec::new();
    for (design, refs) in designs.iter().zip(&reference) {
        let rep = simulate_mse(design, &truth, &full, &cfg).unwrap();
        // oracle at the rounded allocation actually simulated
        let rounded = design.round_to(cfg.n).unwrap().as_design(&sp).unwrap();
        let info = info_matrices(&rounded, &pair).unwrap();
        let minv = info
            .m_full
            .clone()
            .try_inverse()
            .expect("rounded designs keep four identifiable coefficients");
        for j in 0..4 {
            worst_rel = worst_rel.max((rep.estimates[j] - refs[j]).abs() / refs[j]);
            let oracle = cfg.sigma2 / cfg.n as f64 * minv[(j, j)];
            worst_sigma =
                worst_sigma.max((rep.estimates[j] - oracle).abs() / rep.std_errors[j]);
        }
        mses.push(rep.estimates.clone());
    }
    let ordered = mses[1][2] > mses[2][2] && mses[1][3] > mses[2][3];
    let ok = worst_rel <= 0.25 && worst_sigma <= 3.0 && ordered;
    report(
        "A10",
        ok,
        &format!(
            "12 mean-squared errors within {:.0}% of the frozen references and {:.2} \
             replicate standard errors of the covariance oracle; patched three-point \
             design inflates both extension-coefficient errors: {ordered}",
            100.0 * worst_rel,
            worst_sigma
        ),
    );
}

#[test]
fn a11_three_point_design_cannot_estimate_four_coefficients() {
    let sp = space();
    let design = three_point_design(&sp);
    let truth = cubic();
    let cfg = SimConfig::new(50, 0.1, 100, 1, 0.05).unwrap();
    let mse = simulate_mse(
        &design,
        &truth,
        &Family::linear(Basis::monomials(4).unwrap()),
        &cfg,
    );
    let pair = NestedPair::linear(
        Basis::monomials(4).unwrap(),
        2,
        DVector::from_column_slice(&[0.0, 1.0]),
    )
    .unwrap();
    let power = simulate_power(&design, &truth, &pair, &cfg);
    let ok = matches!(mse, Err(Error::DegenerateDesign { .. }))
        && matches!(power, Err(Error::DegenerateDesign { .. }));
    report(
        "A11",
        ok,
        &format!(
            "three-point design rejected for the four-coefficient fit: \
             error study -> {:?}, power study -> {:?}",
            mse.err().map(|e| e.to_string()),
            power.err().map(|e| e.to_string())
        ),
    );
}
