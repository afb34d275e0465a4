mod checks;
mod oracles;

use clickrep::losses::{multiset_loss, EmbeddedSet, LossConfig};
use proptest::prelude::*;

#[test]
fn analytic_gradients_match_central_differences() {
    for (loss, err) in checks::gradient_errors(7, 25) {
        assert!(err < 1e-4, "{loss}: relative gradient error {err:e}");
    }
}

#[test]
fn multiset_matches_looped_oracle_on_every_shape() {
    let (shapes, err) = checks::multiset_oracle_error(11);
    assert_eq!(shapes, 4 * 4 + 4 * 4 * 4 + 4 * 4 * 4 * 4);
    assert!(err < 1e-9, "worst difference {err:e}");
}

#[test]
fn losses_ignore_embedding_scale() {
    let (errs, _) = checks::scale_invariance_errors(3, 50, 7.3);
    for (loss, err) in errs {
        assert!(err < 1e-9, "{loss} moved by {err:e}");
    }
}

fn sets_strategy() -> impl Strategy<Value = Vec<(Vec<Vec<f64>>, Vec<f64>)>> {
    (2usize..=8).prop_flat_map(|d| {
        prop::collection::vec(
            (2usize..=5).prop_flat_map(move |n| {
                (
                    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), n),
                    prop::collection::vec(0.1f64..1.0, n),
                )
            }),
            2..=4,
        )
    })
}

proptest! {
    #[test]
    fn multiset_agrees_with_oracle(raw in sets_strategy(), loo in any::<bool>()) {
        prop_assume!(raw.iter().all(|(e, _)| e.iter().all(|v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)));
        let sets: Vec<oracles::Set> = raw.iter().map(|(e, w)| oracles::Set { emb: e.clone(), w: w.clone() }).collect();
        // a centroid near the origin makes every cosine ill-conditioned
        prop_assume!(sets.iter().all(|s| oracles::dot(&oracles::mean(&s.emb), &oracles::mean(&s.emb)) > 1e-6));
        let cfg = LossConfig { leave_one_out: loo, ..LossConfig::default() };
        let lib: Vec<EmbeddedSet<f64>> = checks::to_lib(&sets);
        let got = multiset_loss(&lib, &cfg).unwrap().value;
        let want = oracles::multiset(&sets, cfg.epsilon, cfg.cosine_clamp, loo).multiset;
        prop_assert!(checks::scaled_gap(got, want) < 1e-9, "{got} vs {want}");
    }
}
