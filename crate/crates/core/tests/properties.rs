use proptest::prelude::*;

use cndr::constraints::{check_m, project_to_m, ConstraintParams};
use cndr::data::{parse_labeled, DataFormat};
use cndr::spectral::{kyfan_r, top_r_index_set, SpectralBundle, DEFAULT_RANK_TOL};
use cndr::trainer::project_capped_simplex;

fn diagonal_bundle(values: Vec<Vec<f64>>) -> SpectralBundle {
    let m = values[0].len();
    let basis: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let spectra = values
        .into_iter()
        .map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            (v, basis.clone())
        })
        .collect();
    SpectralBundle::from_spectra(m, DEFAULT_RANK_TOL, spectra).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_lands_in_m(
        values in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 4), 2..=3),
        start in prop::collection::vec(0.0f64..2.0, 3),
        r in 1usize..=3,
        slack in 1.0f64..3.0,
    ) {
        let p = values.len();
        let bundle = diagonal_bundle(values);
        let uniform = vec![1.0 / p as f64; p];
        let params = ConstraintParams {
            r,
            lambda_r: kyfan_r(&bundle, &uniform, r).unwrap() * slack,
            nu: 2.0 * (p * p) as f64,
            delta: 0.05,
        };
        let mu = project_to_m(&start[..p], &params, &bundle).unwrap();
        prop_assert!(check_m(&mu, &params, &bundle).unwrap().feasible());
        let again = project_to_m(&mu, &params, &bundle).unwrap();
        for (a, b) in mu.iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn top_r_composition_is_a_prefix(
        values in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 1..=3),
        mu in prop::collection::vec(0.01f64..1.0, 3),
        r in 1usize..=5,
    ) {
        let p = values.len();
        let bundle = diagonal_bundle(values);
        prop_assume!(r <= bundle.total_rank());
        let set = top_r_index_set(&bundle, &mu[..p], r).unwrap();
        let counts = set.composition(p);
        prop_assert_eq!(counts.iter().sum::<usize>(), r);
        for pair in set.pairs() {
            prop_assert!(pair.index < counts[pair.kernel]);
        }
    }

    #[test]
    fn capped_simplex_projection_is_feasible(y in prop::collection::vec(-3.0f64..3.0, 1..12), frac in 0.0f64..1.0) {
        let r = (frac * y.len() as f64).max(0.0);
        let xi = project_capped_simplex(&y, r);
        prop_assert!(xi.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        prop_assert!((xi.iter().sum::<f64>() - r).abs() < 1e-8);
    }

    #[test]
    fn csv_rows_round_trip(rows in prop::collection::vec((any::<bool>(), prop::collection::vec(-1e3f64..1e3, 3)), 1..10)) {
        let text: String = rows
            .iter()
            .map(|(pos, x)| format!("{},{},{},{}\n", if *pos { "+1" } else { "-1" }, x[0], x[1], x[2]))
            .collect();
        let (points, labels) = parse_labeled(&text, DataFormat::Csv, Some(3)).unwrap();
        for ((pos, x), (p, l)) in rows.iter().zip(points.iter().zip(&labels)) {
            prop_assert_eq!(p, x);
            prop_assert_eq!(*l, if *pos { 1 } else { -1 });
        }
    }
}
