//! Desk-scale stability behavior pinned at the sizes the campaigns use.

use tilefact::stability::{
    backward_error_solution, campaign_random, gepp, getwp, iterative_refinement, Factorization,
    ReportOptions,
};
use tilefact::tilemat::gen_random;

/// Refined tiled-pivoting solutions land within an order of magnitude of the
/// unrefined partial-pivoting error.
#[test]
fn refinement_catches_up_with_partial_pivoting() {
    let n = 512usize;
    let b = 16usize;
    let a = gen_random(n, n, 31415);
    let y = gen_random(n, 1, 27182).values;

    let pp = Factorization::PartialPivot(gepp(&a));
    let x_pp = pp.solve(&y).unwrap();
    let be_pp = backward_error_solution(&a, &x_pp, &y);

    let wp = Factorization::Tiled(getwp(&a, b).unwrap());
    let refined = iterative_refinement(&wp, &a, &y, 3, f64::EPSILON).unwrap();
    assert!(
        refined.backward_error <= 10.0 * be_pp,
        "refined tiled error {:.3e} vs unrefined partial pivoting {:.3e}",
        refined.backward_error,
        be_pp
    );
}

/// Solution backward error grows with the tile count but stays far below
/// anything worrying at this scale, and the factorization error respects
/// the reconstruction bound.
#[test]
fn solution_error_grows_but_stays_bounded() {
    let n = 512usize;
    let rows = campaign_random(n, &[1, 8, 32], 3, 90210, &ReportOptions::default());
    for row in &rows {
        assert_eq!(row.samples, 3);
        assert!(
            row.mean_be_soln < 1e-10,
            "p={}: solution backward error {:.3e}",
            row.p,
            row.mean_be_soln
        );
        let bound = 1e3 * n as f64 * f64::EPSILON;
        assert!(
            row.mean_be_fact <= bound,
            "p={}: reconstruction error {:.3e} above {bound:.3e}",
            row.p,
            row.mean_be_fact
        );
    }
    assert!(
        rows.last().unwrap().mean_be_soln >= rows[0].mean_be_soln / 3.0,
        "solution error should not collapse as tiles shrink"
    );
}

/// Element growth in the upper factor stays below the order for random
/// matrices, for both pivoting strategies.
#[test]
fn upper_factor_growth_stays_below_n() {
    let n = 256usize;
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for seed in 0..4u64 {
        let a = gen_random(n, n, 4400 + seed);
        let a_max = max_abs(&a.values);
        let pp = gepp(&a);
        let rho_pp = max_abs(&pp.u.values) / a_max;
        assert!(rho_pp < n as f64, "partial pivoting growth {rho_pp}");
        let wp = getwp(&a, 16).unwrap();
        let rho_wp = max_abs(&wp.u.values) / a_max;
        assert!(rho_wp < n as f64, "tiled pairwise growth {rho_wp}");
    }
}
