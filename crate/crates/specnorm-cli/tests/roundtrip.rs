use proptest::prelude::*;
use specnorm_cli::files::{from_json, to_json, Dims, HFile, InstanceFile, PointFile, INSTANCE_FORMAT, VECTORIZATION};

fn finite() -> impl Strategy<Value = f64> {
    any::<f64>().prop_filter("finite", |x| x.is_finite())
}

fn rows(r: usize, c: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(finite(), c), r)
}

fn document() -> impl Strategy<Value = InstanceFile> {
    (1usize..=3, 1usize..=3, 1usize..=4, 0usize..=3).prop_flat_map(|(m, n, d, l)| {
        (
            rows(d, m * n),
            rows(l, m * n),
            rows(m, n),
            proptest::collection::vec(finite(), l),
            proptest::collection::vec(prop_oneof!["nonneg", "zero", "free"], l),
            rows(d, d),
            proptest::collection::vec(finite(), d),
            proptest::option::of((rows(m, n), proptest::collection::vec(finite(), l), rows(m, n), proptest::collection::vec(finite(), d))),
            any::<Option<u64>>(),
        )
            .prop_map(move |(qop, bop, c, b, cone, hm, hq, planted, seed)| InstanceFile {
                format: INSTANCE_FORMAT.into(),
                version: "0.1.0".into(),
                vectorization: VECTORIZATION.into(),
                dims: Dims { m, n, d, l },
                qop,
                bop,
                c,
                b,
                cone,
                h: HFile { m: hm, q: hq },
                seed,
                planted: planted.map(|(x, y, s, w)| PointFile { x, y, s, w }),
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn instance_documents_round_trip(doc in document()) {
        let text = to_json(&doc);
        let back: InstanceFile = from_json(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(to_json(&back), text);
        for (a, b) in back.qop.iter().flatten().zip(doc.qop.iter().flatten()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
