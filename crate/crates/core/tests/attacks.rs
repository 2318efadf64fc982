use proptest::prelude::*;
use vidsme::attacks::*;
use vidsme::entropy::{EntropyParams, ProbDist};
use vidsme::synthbench::oracle::oracle_mod_renyi;

const VOCAB: usize = 12;

fn dist() -> impl Strategy<Value = ProbDist> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 8 => 1e-4..1.0f64], VOCAB)
        .prop_filter("needs some mass", |w| w.iter().any(|&x| x > 0.0))
        .prop_map(|w| {
            let total: f64 = w.iter().sum();
            ProbDist::new(w.iter().map(|x| x / total).collect()).unwrap()
        })
}

fn slices(max_len: usize) -> impl Strategy<Value = Vec<ProbDist>> {
    prop::collection::vec(dist(), 1..=max_len)
}

fn with_targets(max_len: usize) -> impl Strategy<Value = (Vec<ProbDist>, Vec<usize>)> {
    slices(max_len).prop_flat_map(|s| {
        let n = s.len();
        (Just(s), prop::collection::vec(0..VOCAB, n))
    })
}

fn k_value() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(5.0), Just(30.0), Just(60.0), Just(90.0), Just(100.0), 0.0..=100.0f64]
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean of the largest `max(1, floor(K·n/100))` values, from a full sort.
fn largest_k_mean_oracle(values: &[f64], k: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n = ((k * values.len() as f64 / 100.0).floor() as usize).max(1);
    mean(&sorted[..n])
}

fn permuted<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut out = items.to_vec();
    out.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    out
}

proptest! {
    #[test]
    fn swapping_runs_negates_delta(
        nat in slices(40),
        rev in slices(40),
        q in 0.2..3.0f64,
        r in 0.2..3.0f64,
        k in k_value(),
    ) {
        let m = nat.len().min(rev.len());
        let (nat, rev) = (&nat[..m], &rev[..m]);
        let params = EntropyParams::new(q, r).unwrap();
        let s_nat = entropy_sequence(nat, &params).unwrap();
        let s_rev = entropy_sequence(rev, &params).unwrap();
        let forward = delta_entropy(&s_nat, &s_rev).unwrap();
        let swapped = delta_entropy(&s_rev, &s_nat).unwrap();
        for (a, b) in forward.iter().zip(&swapped) {
            prop_assert_eq!(*a, -*b);
        }
        prop_assert_eq!(vid_sme_score(&swapped, 100.0).unwrap(), -vid_sme_score(&forward, 100.0).unwrap());
        let (got, want) = (vid_sme_score(&swapped, k).unwrap(), -largest_k_mean_oracle(&forward, k));
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn full_selection_is_the_mean(delta in prop::collection::vec(-5.0..5.0f64, 1..200)) {
        prop_assert!((vid_sme_score(&delta, 100.0).unwrap() - mean(&delta)).abs() <= 1e-12);
    }

    #[test]
    fn perplexity_is_at_least_one((s, t) in with_targets(30)) {
        let ppl = perplexity_score(&s, Some(&t)).unwrap();
        prop_assert!(ppl >= 1.0, "{ppl}");
        let certain = s.iter().zip(&t).all(|(p, &y)| p.probs()[y] == 1.0);
        prop_assert_eq!(ppl == 1.0, certain);
    }

    #[test]
    fn perplexity_of_certain_targets_is_one(ys in prop::collection::vec(0..VOCAB, 1..30)) {
        let s: Vec<ProbDist> = ys.iter().map(|&y| ProbDist::one_hot(VOCAB, y)).collect();
        prop_assert_eq!(perplexity_score(&s, Some(&ys)).unwrap(), 1.0);
    }

    #[test]
    fn probability_gap_is_a_probability(s in slices(30)) {
        let gap = max_prob_gap_score(&s).unwrap();
        prop_assert!((0.0..=1.0).contains(&gap), "{gap}");
    }

    #[test]
    fn full_k_scores_ignore_position_order((s, t) in with_targets(30), seed in any::<u64>(), q in 0.2..3.0f64) {
        let order = permuted(&(0..s.len()).collect::<Vec<_>>(), seed);
        let ps: Vec<ProbDist> = order.iter().map(|&i| s[i].clone()).collect();
        let pt: Vec<usize> = order.iter().map(|&i| t[i]).collect();
        let params = EntropyParams::new(q, 1.05).unwrap();
        let delta = entropy_sequence(&s, &params).unwrap();
        let pdelta: Vec<f64> = order.iter().map(|&i| delta[i]).collect();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        prop_assert!(close(vid_sme_score(&delta, 100.0).unwrap(), vid_sme_score(&pdelta, 100.0).unwrap()));
        prop_assert!(close(perplexity_score(&s, Some(&t)).unwrap(), perplexity_score(&ps, Some(&pt)).unwrap()));
        prop_assert!(close(min_k_prob_score(&s, Some(&t), 100.0).unwrap(), min_k_prob_score(&ps, Some(&pt), 100.0).unwrap()));
        prop_assert!(close(max_prob_gap_score(&s).unwrap(), max_prob_gap_score(&ps).unwrap()));
        for alpha in [0.5, 2.0, f64::INFINITY] {
            prop_assert!(close(max_renyi_score(&s, alpha, 100.0).unwrap(), max_renyi_score(&ps, alpha, 100.0).unwrap()));
        }
        for alpha in [0.5, 1.0, 2.0] {
            prop_assert!(close(mod_renyi_score(&s, Some(&t), alpha).unwrap(), mod_renyi_score(&ps, Some(&pt), alpha).unwrap()));
        }
    }

    #[test]
    fn mod_renyi_matches_high_precision_oracle(
        p in dist(),
        y in 0..VOCAB,
        alpha in prop_oneof![Just(2.0), Just(0.5), 0.05..0.95f64, 1.05..5.0f64],
    ) {
        let got = mod_renyi_position(&p, y, alpha);
        let want = oracle_mod_renyi(p.probs(), y, alpha);
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn mod_renyi_approaches_modified_entropy(p in dist(), y in 0..VOCAB) {
        let limit = mod_renyi_position(&p, y, 1.0);
        let near = mod_renyi_position(&p, y, 1.0 + 1e-7);
        prop_assert!((limit - near).abs() <= 1e-4 * limit.abs().max(1.0), "{limit} vs {near}");
    }
}

#[test]
fn spec_list_round_trips_through_names() {
    for spec in default_specs() {
        let method: Method = spec.method.name().parse().unwrap();
        let variant: Variant = spec.variant.to_string().parse().unwrap();
        assert_eq!(AttackSpec::new(method, variant).unwrap(), spec);
    }
}
