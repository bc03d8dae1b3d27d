use carfollow_ident::expr::parse;
use carfollow_ident::models::{builtin_model, EquilibriumGap, ModelSpec, BUILTIN_MODELS};
use carfollow_ident::structural::{
    augment, build_oi, default_max_order, generic_rank, numeric_rank, AugmentedSystem, IcMode, OIMatrix, OutputMode,
    Pin, RankOptions, GAP_RANGE, INPUT_RATE_RANGE, SPEED_RANGE,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rank by Gaussian elimination with complete pivoting; pivots below
/// `tol` times the largest entry count as zero.
fn elimination_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return 0;
    }
    let mut rank = 0;
    while rank < rows.min(cols) {
        let mut best = (rank, rank, 0.0f64);
        for i in rank..rows {
            for j in rank..cols {
                if a[(i, j)].abs() > best.2 {
                    best = (i, j, a[(i, j)].abs());
                }
            }
        }
        if best.2 <= tol * scale {
            break;
        }
        a.swap_rows(rank, best.0);
        a.swap_columns(rank, best.1);
        for i in rank + 1..rows {
            let f = a[(i, rank)] / a[(rank, rank)];
            for j in rank..cols {
                a[(i, j)] -= f * a[(rank, j)];
            }
        }
        rank += 1;
    }
    rank
}

fn without_column(m: &DMatrix<f64>, col: usize) -> DMatrix<f64> {
    m.clone().remove_column(col)
}

fn system(name: &str, output: OutputMode, extra: usize) -> (ModelSpec, AugmentedSystem, OIMatrix) {
    let m = builtin_model(name).unwrap();
    let sys = augment(&m, output, default_max_order(&m, 3))
        .unwrap()
        .with_extra_lie(extra)
        .unwrap();
    let oi = build_oi(&sys).unwrap();
    (m, sys, oi)
}

/// A point `[s, v, theta, u, u_1, ...]` drawn independently of the library
/// sampler.
fn draw(m: &ModelSpec, oi: &OIMatrix, equilibrium: bool, degree: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let theta: Vec<f64> = m.params().iter().map(|p| rng.random_range(p.lower..p.upper)).collect();
        let u = rng.random_range(SPEED_RANGE.0..SPEED_RANGE.1);
        let (s, v) = if equilibrium {
            let free = match m.equilibrium_gap() {
                EquilibriumGap::Free => Some(rng.random_range(GAP_RANGE.0..GAP_RANGE.1)),
                EquilibriumGap::Closed(_) => None,
            };
            match m.equilibrium_ic(u, &theta, free) {
                Ok(x) => (x.s, x.v),
                Err(_) => continue,
            }
        } else {
            (
                rng.random_range(GAP_RANGE.0..GAP_RANGE.1),
                rng.random_range(SPEED_RANGE.0..SPEED_RANGE.1),
            )
        };
        let mut point = vec![s, v];
        point.extend(theta);
        point.push(u);
        for j in 1..oi.symbols().len() - point.len() + 1 {
            point.push(if j <= degree {
                rng.random_range(INPUT_RATE_RANGE.0..INPUT_RATE_RANGE.1)
            } else {
                0.0
            });
        }
        if let Ok(mat) = oi.evaluate(&point) {
            if mat.iter().all(|x| x.is_finite()) {
                return point;
            }
        }
    }
}

fn report(sys: &AugmentedSystem, oi: &OIMatrix, mode: IcMode, degree: usize) -> (usize, Vec<String>) {
    let opts = RankOptions {
        mode,
        degree,
        ..Default::default()
    };
    let r = generic_rank(sys, oi, &opts).unwrap();
    (r.generic_rank, r.unidentifiable)
}

#[test]
fn svd_rank_agrees_with_elimination_on_observability_matrices() {
    // Pivot ratios and singular values only bound each other, so points
    // whose elimination rank depends on the threshold are skipped.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut skipped) = (0, 0);
    for name in BUILTIN_MODELS {
        for output in [OutputMode::GapOnly, OutputMode::GapAndSpeed] {
            let (m, _, oi) = system(name, output, 0);
            for equilibrium in [false, true] {
                for degree in 0..=2 {
                    for _ in 0..5 {
                        let p = draw(&m, &oi, equilibrium, degree, &mut rng);
                        let mat = oi.evaluate(&p).unwrap();
                        let (loose, strict) = (elimination_rank(&mat, 1e-6), elimination_rank(&mat, 1e-12));
                        if loose != strict {
                            skipped += 1;
                            continue;
                        }
                        checked += 1;
                        assert_eq!(
                            numeric_rank(&mat, 1e-9),
                            loose,
                            "{name} {output:?} equilibrium={equilibrium} degree={degree}"
                        );
                    }
                }
            }
        }
    }
    assert!(checked >= 4 * skipped, "{checked} checked, {skipped} skipped");
}

#[test]
fn generic_ranks_match_independent_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for name in BUILTIN_MODELS {
        let (m, sys, oi) = system(name, OutputMode::GapOnly, 0);
        for (equilibrium, mode) in [(false, IcMode::Generic), (true, IcMode::Equilibrium)] {
            for degree in 0..=2 {
                let (rank, _) = report(&sys, &oi, mode.clone(), degree);
                let oracle = (0..20)
                    .map(|_| elimination_rank(&oi.evaluate(&draw(&m, &oi, equilibrium, degree, &mut rng)).unwrap(), 1e-9))
                    .max()
                    .unwrap();
                assert_eq!(rank, oracle, "{name} equilibrium={equilibrium} degree={degree}");
            }
        }
    }
}

#[test]
fn flagged_columns_are_exactly_the_removable_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for name in BUILTIN_MODELS {
        let (m, sys, oi) = system(name, OutputMode::GapOnly, 0);
        for degree in 0..=1 {
            let (rank, flagged) = report(&sys, &oi, IcMode::Equilibrium, degree);
            if rank == sys.n_aug() {
                assert!(flagged.is_empty());
                continue;
            }
            let mats: Vec<_> = (0..20)
                .map(|_| oi.evaluate(&draw(&m, &oi, true, degree, &mut rng)).unwrap())
                .collect();
            for (col, column) in sys.augmented_names().iter().enumerate() {
                let removable = mats
                    .iter()
                    .map(|mat| elimination_rank(&without_column(mat, col), 1e-9))
                    .max()
                    .unwrap()
                    == rank;
                assert_eq!(
                    flagged.contains(column),
                    removable,
                    "{name} degree {degree}: column {column}, flagged {flagged:?}"
                );
            }
        }
    }
}

#[test]
fn one_extra_gap_row_matches_gap_and_speed() {
    for name in BUILTIN_MODELS {
        let (_, gap, gap_oi) = system(name, OutputMode::GapOnly, 1);
        let (_, both, both_oi) = system(name, OutputMode::GapAndSpeed, 0);
        for mode in [IcMode::Generic, IcMode::Equilibrium] {
            for degree in 0..=2 {
                assert_eq!(
                    report(&gap, &gap_oi, mode.clone(), degree),
                    report(&both, &both_oi, mode.clone(), degree),
                    "{name} {mode:?} degree {degree}"
                );
            }
        }
    }
}

#[test]
fn standard_rows_match_gap_and_speed_except_ov_at_equilibrium() {
    for name in BUILTIN_MODELS {
        let (_, gap, gap_oi) = system(name, OutputMode::GapOnly, 0);
        let (_, both, both_oi) = system(name, OutputMode::GapAndSpeed, 0);
        for mode in [IcMode::Generic, IcMode::Equilibrium] {
            for degree in 0..=2 {
                let a = report(&gap, &gap_oi, mode.clone(), degree).0;
                let b = report(&both, &both_oi, mode.clone(), degree).0;
                if name == "OV" && mode == IcMode::Equilibrium && degree >= 1 {
                    assert_eq!((a, b), (5, 6), "OV equilibrium degree {degree}");
                } else {
                    assert_eq!(a, b, "{name} {mode:?} degree {degree}");
                }
            }
        }
    }
}

#[test]
fn ftl_at_equilibrium_is_deficient_through_degree_three() {
    let (_, sys, oi) = system("FTL", OutputMode::GapAndSpeed, 0);
    for degree in 0..=3 {
        let (rank, _) = report(&sys, &oi, IcMode::Equilibrium, degree);
        assert!(rank < sys.n_aug(), "degree {degree}: rank {rank}");
    }
}

#[test]
fn fixed_point_mode_uses_given_values() {
    let (_, sys, oi) = system("CTH-RV", OutputMode::GapOnly, 0);
    // On the invariant set the k1 column vanishes whatever the input.
    let mode = IcMode::FixedPoint {
        s0: 72.7,
        v0: 32.5,
        theta: vec![0.3, 32.5 / 72.7, 72.7 / 32.5],
    };
    let (rank, flagged) = report(&sys, &oi, mode, 2);
    assert_eq!(rank, 4);
    assert_eq!(flagged, ["k1"]);
}

#[test]
fn pins_reach_the_invariant_set() {
    let (_, sys, oi) = system("CTH-RV", OutputMode::GapAndSpeed, 0);
    let pins = vec![
        Pin {
            symbol: "tau".into(),
            value: parse("s/v", sys.table()).unwrap(),
        },
        Pin {
            symbol: "k2".into(),
            value: parse("v/s", sys.table()).unwrap(),
        },
    ];
    let opts = RankOptions {
        degree: 1,
        pins,
        ..Default::default()
    };
    let r = generic_rank(&sys, &oi, &opts).unwrap();
    assert_eq!((r.generic_rank, r.unidentifiable.as_slice()), (4, ["k1".to_string()].as_slice()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn low_rank_products_have_their_rank(
        rows in 1usize..8,
        cols in 1usize..8,
        inner in 1usize..8,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(rows, inner, |_, _| rng.random_range(-1.0..1.0));
        let c = DMatrix::from_fn(inner, cols, |_, _| rng.random_range(-1.0..1.0));
        let a = &b * &c;
        let want = inner.min(rows).min(cols);
        prop_assert_eq!(numeric_rank(&a, 1e-9), want);
        prop_assert_eq!(elimination_rank(&a, 1e-9), want);
    }

    #[test]
    fn rank_is_monotone_in_input_degree(seed in any::<u64>(), which in 0usize..4) {
        let name = BUILTIN_MODELS[which];
        let (_, sys, oi) = system(name, OutputMode::GapOnly, 0);
        for mode in [IcMode::Generic, IcMode::Equilibrium] {
            let ranks: Vec<usize> = (0..=3)
                .map(|degree| {
                    let opts = RankOptions { mode: mode.clone(), degree, trials: 4, seed, ..Default::default() };
                    generic_rank(&sys, &oi, &opts).unwrap().generic_rank
                })
                .collect();
            prop_assert!(ranks.windows(2).all(|w| w[1] >= w[0]), "{} {:?}: {:?}", name, mode, ranks);
        }
    }
}
