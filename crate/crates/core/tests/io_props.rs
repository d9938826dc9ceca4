//! Text formats: write-then-parse round trips and robustness on arbitrary input.

mod common;

use common::*;
use lanczos_net::graph::Labels;
use lanczos_net::io::*;
use lanczos_net::lanczos::{LanczosOptions, StartVector};
use lanczos_net::nn::{Model, ModelConfig, ScaleConfig, Variant};
use lanczos_net::train::Split;
use lanczos_net::{build_operator, lanczos_decompose, Graph, LaplacianKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, any::<f64>().prop_filter("finite", |x| x.is_finite())]
}

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (1usize..20).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, 0.01..10.0f64), 0..40).prop_map(move |edges| Graph::new(n, edges).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_round_trip(g in graph_strategy()) {
        prop_assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
    }

    #[test]
    fn matrix_csv_round_trip(r in 1usize..8, c in 1usize..8, seed in any::<u64>(), x in finite()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = gaussian_matrix(r, c, &mut rng);
        m[(0, 0)] = x;
        prop_assert_eq!(parse_matrix_csv(&write_matrix_csv(&m)).unwrap(), m);
    }

    #[test]
    fn labels_round_trip(classes in prop::collection::vec(0usize..50, 1..30),
                         targets in prop::collection::vec(finite(), 1..30)) {
        let l = Labels::Classes(classes);
        prop_assert_eq!(parse_labels(&write_labels(&l)).unwrap(), l);
        // A target list that happens to be all integers reads back as classes, so make one fractional.
        let mut t = targets;
        t[0] = 0.5;
        let l = Labels::Targets(t);
        prop_assert_eq!(parse_labels(&write_labels(&l)).unwrap(), l);
    }

    #[test]
    fn split_round_trip(perm in Just((0..30usize).collect::<Vec<_>>()).prop_shuffle(), a in 1usize..10, b in 0usize..10) {
        let split = Split::new(perm[..a].to_vec(), perm[a..a + b].to_vec(), perm[a + b..].to_vec(), 30).unwrap();
        prop_assert_eq!(parse_split(&write_split(&split)).unwrap(), split);
    }

    #[test]
    fn decomposition_round_trip(seed in any::<u64>(), n in 2usize..20, k in 1usize..10, reorth in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(n, 0.3, &mut rng);
        let s = build_operator(&g, LaplacianKind::affinity(true)).unwrap();
        let opts = LanczosOptions::new(k).reorthogonalized(reorth).with_start(StartVector::SeededRandomUnit(seed));
        let d = lanczos_decompose(&s, &opts).unwrap();
        prop_assert_eq!(parse_decomposition(&write_decomposition(&d)).unwrap(), d);
    }

    #[test]
    fn checkpoint_round_trip(seed in any::<u64>(), ada in any::<bool>()) {
        let mut config: ModelConfig = serde_json::from_str(
            r#"{"variant":"lanczos_net","input_dim":3,"output_dim":2,"scales":{"short":[0,1],"long":[2,4]},"lanczos_k":4,"hidden_dims":[5],"filter_hidden":[6]}"#,
        ).unwrap();
        if ada {
            config.variant = Variant::AdaLanczosNet;
        }
        config.scales = ScaleConfig::new(vec![0, 1], vec![2, 4]).unwrap();
        let m = Model::new(config, seed).unwrap();
        let back = parse_checkpoint(&write_checkpoint(&m)).unwrap();
        prop_assert_eq!(back.named_params(), m.named_params());
        prop_assert_eq!(back.config, m.config);
    }

    #[test]
    fn graph_set_round_trip(seed in any::<u64>(), count in 1usize..5, p in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records: Vec<GraphRecord> = (0..count).map(|i| {
            let n = 2 + i;
            let g = random_connected_graph(n, 0.4, &mut rng).with_features(gaussian_matrix(n, 2, &mut rng)).unwrap();
            GraphRecord { graph: g, target: gaussian_matrix(1, p, &mut rng).as_slice().to_vec() }
        }).collect();
        prop_assert_eq!(parse_graph_set(&write_graph_set(&records)).unwrap(), records);
    }

    #[test]
    fn parsers_never_panic(text in "\\PC{0,400}") {
        let _ = parse_graph(&text);
        let _ = parse_matrix_csv(&text);
        let _ = parse_labels(&text);
        let _ = parse_split(&text);
        let _ = parse_decomposition(&text);
        let _ = parse_checkpoint(&text);
        let _ = parse_graph_set(&text);
    }

    #[test]
    fn structured_garbage_never_panics(lines in prop::collection::vec(
        prop_oneof![
            Just("N 3".to_string()), Just("N 99999999999".to_string()), Just("0 1 2".to_string()),
            Just("graph 2 1".to_string()), Just("x 1".to_string()), Just("e 0 1".to_string()), Just("y 1".to_string()),
            Just("lanczos-decomposition v1".to_string()), Just("lanczosnet-checkpoint v1".to_string()),
            Just("Q 3 2".to_string()), Just("param a 1000000 1000000".to_string()), Just("train 0 1".to_string()),
            "[-0-9a-z .,eE]{0,20}",
        ], 0..20)) {
        let text = lines.join("\n");
        let _ = parse_graph(&text);
        let _ = parse_decomposition(&text);
        let _ = parse_checkpoint(&text);
        let _ = parse_graph_set(&text);
        let _ = parse_split(&text);
    }
}

#[test]
fn rejects_non_finite_and_bad_headers() {
    assert!(parse_graph("N 2\n0 1 NaN\n").is_err());
    assert!(parse_graph("N 0\n").is_err());
    assert!(parse_graph("N 2\n0 5\n").is_err());
    assert!(parse_matrix_csv("1,2\n3\n").is_err());
    assert!(parse_decomposition("garbage\n").is_err());
    assert!(parse_checkpoint("lanczosnet-checkpoint v2\n").is_err());
}
