use proptest::prelude::*;
use shalekit::data::{preprocess, Category, FactorSpec, PreprocessConfig, WellTable};

fn schema(m: usize) -> Vec<FactorSpec> {
    let mut specs: Vec<FactorSpec> =
        (0..m).map(|i| FactorSpec::new(&format!("f{i}"), "m", Category::Geologic, false)).collect();
    specs.push(FactorSpec::new("eur", "10⁸m³", Category::Production, false));
    specs
}

fn table_strategy() -> impl Strategy<Value = WellTable> {
    (2usize..6, 8usize..40).prop_flat_map(|(m, n)| {
        let cell = prop_oneof![
            12 => (-3.0f64..3.0).prop_map(Some),
            1 => Just(None),
            1 => (50.0f64..100.0).prop_map(Some),
        ];
        proptest::collection::vec(proptest::collection::vec(cell, m + 1), n)
            .prop_map(move |rows| WellTable::new(schema(m), rows).unwrap())
    })
}

fn brute_pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
    let sa = (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sb = (b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (sa > 0.0 && sb > 0.0).then(|| cov / (sa * sb))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn preprocess_invariants(table in table_strategy()) {
        let config = PreprocessConfig { outlier_z: 2.5, ..PreprocessConfig::default() };
        let result = preprocess(&table, &config);
        prop_assume!(result.is_ok());
        let (clean, report) = result.unwrap();
        prop_assert_eq!(clean.n_rows() + report.dropped_rows.len(), table.n_rows());
        prop_assert_eq!(clean.n_columns() + report.dropped_features.len(), table.n_columns());
        prop_assert_eq!(clean.missing_count(), 0);

        let cols: Vec<Vec<f64>> = (0..clean.n_columns())
            .map(|c| clean.column(c).into_iter().map(Option::unwrap).collect())
            .collect();
        for i in 0..cols.len() {
            for j in 0..cols.len() {
                let got = report.pearson_matrix[i][j];
                let want = if i == j { Some(1.0) } else { brute_pearson(&cols[i], &cols[j]) };
                match (got, want) {
                    (Some(g), Some(w)) => prop_assert!((g - w).abs() <= 1e-12, "{} vs {}", g, w),
                    (g, w) => prop_assert_eq!(g.is_none(), w.is_none()),
                }
            }
        }

        let (again, second) = preprocess(&clean, &config).unwrap();
        prop_assert_eq!(&again, &clean);
        prop_assert!(second.is_empty());
    }
}
