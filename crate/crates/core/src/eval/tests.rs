use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

const TOL: f64 = 1e-9;

fn set(xs: &[&'static str]) -> BTreeSet<&'static str> {
    xs.iter().copied().collect()
}

/// Exhaustive (item, label) counting oracle, returning the nine numbers in
/// micro, macro, weighted order.
fn oracle(gold: &[Vec<bool>], pred: &[Vec<bool>], labels: usize) -> [f64; 9] {
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let f = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let (mut all_tp, mut all_fp, mut all_fn) = (0.0, 0.0, 0.0);
    let mut rows = Vec::new();
    for l in 0..labels {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for i in 0..gold.len() {
            match (gold[i][l], pred[i][l]) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                (false, false) => {}
            }
        }
        all_tp += tp;
        all_fp += fp;
        all_fn += fn_;
        let (p, r) = (div(tp, tp + fp), div(tp, tp + fn_));
        rows.push((p, r, f(p, r), tp + fn_));
    }
    let (mp, mr) = (div(all_tp, all_tp + all_fp), div(all_tp, all_tp + all_fn));
    let n = labels as f64;
    let support: f64 = rows.iter().map(|r| r.3).sum();
    let mut out = [mp, mr, f(mp, mr), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    for r in &rows {
        out[3] += r.0 / n;
        out[4] += r.1 / n;
        out[5] += r.2 / n;
        out[6] += div(r.0 * r.3, support);
        out[7] += div(r.1 * r.3, support);
        out[8] += div(r.2 * r.3, support);
    }
    out
}

fn close(a: &[f64; 9], b: &[f64; 9]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= TOL)
}

fn random_multilabel(rng: &mut ChaCha8Rng) -> (Vec<BTreeSet<u8>>, Vec<BTreeSet<u8>>, Vec<u8>) {
    let labels = rng.gen_range(1..=10u8);
    let items = rng.gen_range(1..=50);
    let density = rng.gen_range(0.0..0.8);
    let draw = |rng: &mut ChaCha8Rng| -> BTreeSet<u8> { (0..labels).filter(|_| rng.gen_bool(density)).collect() };
    let gold: Vec<_> = (0..items).map(|_| draw(rng)).collect();
    let pred: Vec<_> = (0..items).map(|_| draw(rng)).collect();
    (gold, pred, (0..labels).collect())
}

fn as_bools(sets: &[BTreeSet<u8>], labels: usize) -> Vec<Vec<bool>> {
    sets.iter().map(|s| (0..labels).map(|l| s.contains(&(l as u8))).collect()).collect()
}

#[test]
fn multilabel_matches_counting_oracle_on_1000_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..1000 {
        let (gold, pred, universe) = random_multilabel(&mut rng);
        let got = prf_multilabel(&gold, &pred, &universe).unwrap().averages.values();
        let want = oracle(&as_bools(&gold, universe.len()), &as_bools(&pred, universe.len()), universe.len());
        assert!(close(&got, &want), "trial {trial}: {got:?} vs {want:?}");
    }
}

#[test]
fn multiclass_matches_counting_oracle_on_1000_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..1000 {
        let labels = rng.gen_range(1..=10u8);
        let items = rng.gen_range(1..=50);
        let gold: Vec<u8> = (0..items).map(|_| rng.gen_range(0..labels)).collect();
        let pred: Vec<u8> = (0..items).map(|_| rng.gen_range(0..labels)).collect();
        let universe: Vec<u8> = (0..labels).collect();
        let got = prf_multiclass(&gold, &pred, &universe).unwrap().averages.values();
        let one_hot = |xs: &[u8]| -> Vec<Vec<bool>> {
            xs.iter().map(|&x| (0..labels).map(|l| l == x).collect()).collect()
        };
        let want = oracle(&one_hot(&gold), &one_hot(&pred), labels as usize);
        assert!(close(&got, &want), "trial {trial}: {got:?} vs {want:?}");
    }
}

#[test]
fn identity_scores_one() {
    let g = ["N", "G", "O", "G"];
    let s = prf_multiclass(&g, &g, &["N", "G", "O"]).unwrap();
    assert_eq!(s.averages.values(), [1.0; 9]);
    let ml = vec![set(&["A", "B"]), set(&["C"])];
    assert_eq!(prf_multilabel(&ml, &ml, &["A", "B", "C"]).unwrap().averages.values(), [1.0; 9]);
}

#[test]
fn multiclass_worked_example() {
    let s = prf_multiclass(&["N", "N", "G", "O"], &["N", "G", "G", "O"], &["N", "G", "O"]).unwrap();
    let m = s.averages.micro;
    assert!((m.precision - 0.75).abs() < TOL && (m.recall - 0.75).abs() < TOL && (m.f1 - 0.75).abs() < TOL);
    let cm = s.confusion.unwrap();
    assert_eq!(cm.counts, vec![vec![1, 1, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    assert_eq!(cm.row_sums(), [2, 1, 1]);
    assert_eq!(cm.column_sums(), [1, 2, 1]);
    assert_eq!(cm.total(), 4);
}

#[test]
fn single_class_universe() {
    let s = prf_multiclass(&["N", "N"], &["N", "N"], &["N"]).unwrap();
    assert_eq!(s.averages.macro_avg, MetricTriple::perfect());
}

#[test]
fn multilabel_worked_example() {
    let gold = vec![set(&["A", "B"]), set(&["C"])];
    let pred = vec![set(&["A"]), set(&["B", "C"])];
    let m = prf_multilabel(&gold, &pred, &["A", "B", "C"]).unwrap().averages.micro;
    for v in m.values() {
        assert!((v - 2.0 / 3.0).abs() < TOL);
    }
}

#[test]
fn empty_predictions_score_zero_precision() {
    let gold = vec![set(&["A"]), set(&["B"])];
    let pred = vec![set(&[]), set(&[])];
    let s = prf_multilabel(&gold, &pred, &["A", "B"]).unwrap();
    assert_eq!(s.averages.micro, MetricTriple::default());
    assert_eq!(s.averages.weighted, MetricTriple::default());
}

#[test]
fn both_empty_items_contribute_nothing() {
    let gold = vec![set(&["A"]), set(&[])];
    let pred = vec![set(&["A"]), set(&[])];
    let s = prf_multilabel(&gold, &pred, &["A", "B"]).unwrap();
    assert_eq!(s.averages.micro, MetricTriple::perfect());
    // B has no support and no predictions, so it scores 0 and halves the macro.
    assert_eq!(s.averages.macro_avg.f1, 0.5);
    assert_eq!(s.averages.weighted.f1, 1.0);
}

#[test]
fn input_errors() {
    assert_eq!(
        prf_multiclass(&["N"], &["N", "G"], &["N", "G"]).unwrap_err(),
        EvalError::LengthMismatch { gold: 1, pred: 2 }
    );
    assert_eq!(prf_multiclass::<&str>(&[], &[], &["N"]).unwrap_err(), EvalError::Empty);
    assert_eq!(prf_multiclass(&["X"], &["N"], &["N"]).unwrap_err(), EvalError::OutOfUniverse("X".into()));
    assert_eq!(prf_multiclass(&["N"], &["N"], &[] as &[&str]).unwrap_err(), EvalError::EmptyUniverse);
    assert_eq!(
        prf_multilabel(&[set(&["Z"])], &[set(&[])], &["A"]).unwrap_err(),
        EvalError::OutOfUniverse("Z".into())
    );
    assert_eq!(prf_multiclass(&["N"], &["N"], &["N", "N"]).unwrap_err(), EvalError::DuplicateLabel("N".into()));
}

fn multilabel_case() -> impl Strategy<Value = (Vec<(BTreeSet<u8>, BTreeSet<u8>)>, u8)> {
    (1u8..=6).prop_flat_map(|k| {
        let s = proptest::collection::btree_set(0..k, 0..=k as usize);
        (proptest::collection::vec((s.clone(), s), 1..30), Just(k))
    })
}

proptest! {
    #[test]
    fn permutation_invariance((pairs, k) in multilabel_case(), seed in any::<u64>()) {
        let universe: Vec<u8> = (0..k).collect();
        let (g, p): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let base = prf_multilabel(&g, &p, &universe).unwrap().averages.values();
        let mut shuffled = pairs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        let (g2, p2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
        let again = prf_multilabel(&g2, &p2, &universe).unwrap().averages.values();
        prop_assert!(close(&base, &again));
        prop_assert!(base.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn micro_equals_accuracy_and_marginals_hold(
        rows in proptest::collection::vec((0u8..5, 0u8..5), 1..60)
    ) {
        let universe: Vec<u8> = (0..5).collect();
        let (g, p): (Vec<u8>, Vec<u8>) = rows.iter().copied().unzip();
        let s = prf_multiclass(&g, &p, &universe).unwrap();
        let acc = rows.iter().filter(|(a, b)| a == b).count() as f64 / rows.len() as f64;
        let m = s.averages.micro;
        prop_assert!((m.precision - acc).abs() < TOL && (m.recall - acc).abs() < TOL && (m.f1 - acc).abs() < TOL);
        let cm = s.confusion.unwrap();
        for l in 0..5u8 {
            prop_assert_eq!(cm.row_sums()[l as usize], g.iter().filter(|&&x| x == l).count());
            prop_assert_eq!(cm.column_sums()[l as usize], p.iter().filter(|&&x| x == l).count());
        }
        prop_assert_eq!(cm.total(), rows.len());
        for row in &s.per_class {
            let f = if row.precision + row.recall > 0.0 {
                2.0 * row.precision * row.recall / (row.precision + row.recall)
            } else {
                0.0
            };
            prop_assert!((row.f1 - f).abs() < TOL);
        }
    }
}

// Agreement.

/// Direct-formula Fleiss oracle computed item by item in floating point.
fn fleiss_oracle(m: &[Vec<usize>]) -> f64 {
    let n_items = m.len() as f64;
    let n = m[0].iter().sum::<usize>() as f64;
    let p_i: Vec<f64> = m
        .iter()
        .map(|r| (r.iter().map(|&c| (c * c) as f64).sum::<f64>() - n) / (n * (n - 1.0)))
        .collect();
    let p_bar = p_i.iter().sum::<f64>() / n_items;
    let p_e: f64 = (0..m[0].len())
        .map(|j| {
            let pj = m.iter().map(|r| r[j] as f64).sum::<f64>() / (n_items * n);
            pj * pj
        })
        .sum();
    (p_bar - p_e) / (1.0 - p_e)
}

/// Planted 3-rater, 4-item bias fixture over (Pro-Govt, Pro-Opp, Neutral).
fn planted_bias() -> Vec<Vec<usize>> {
    vec![vec![3, 0, 0], vec![2, 1, 0], vec![0, 1, 2], vec![1, 1, 1]]
}

#[test]
fn fleiss_planted_matches_oracle() {
    let k = fleiss_kappa(&planted_bias()).unwrap();
    assert!((k - fleiss_oracle(&planted_bias())).abs() < TOL);
    assert!((k - 1.0 / 15.0).abs() < TOL);
}

#[test]
fn fleiss_unanimity_is_exactly_one() {
    let m = vec![vec![4, 0, 0], vec![0, 4, 0], vec![0, 0, 4], vec![4, 0, 0]];
    assert_eq!(fleiss_kappa(&m).unwrap(), 1.0);
}

#[test]
fn fleiss_errors() {
    assert_eq!(fleiss_kappa(&[vec![3, 0], vec![3, 0]]).unwrap_err(), AgreementError::Undefined);
    assert!(matches!(
        fleiss_kappa(&[vec![3, 0], vec![2, 0]]).unwrap_err(),
        AgreementError::UnequalRows { item: 1, .. }
    ));
    assert_eq!(fleiss_kappa(&[vec![3]]).unwrap_err(), AgreementError::TooFewCategories(1));
    assert_eq!(fleiss_kappa(&[vec![1, 0]]).unwrap_err(), AgreementError::TooFewRaters(1));
    assert_eq!(fleiss_kappa(&[]).unwrap_err(), AgreementError::NoItems);
}

/// Planted 3-rater multi-label fixture over labels A..D; D is never used.
fn planted_labels() -> Vec<Vec<BTreeSet<&'static str>>> {
    vec![
        vec![set(&["A", "B"]), set(&["A"]), set(&["A", "B"])],
        vec![set(&["C"]), set(&["C"]), set(&[])],
        vec![set(&[]), set(&[]), set(&[])],
        vec![set(&["B"]), set(&["B", "C"]), set(&["A", "B"])],
    ]
}

#[test]
fn mean_label_kappa_planted() {
    let ann = planted_labels();
    let universe = ["A", "B", "C", "D"];
    let got = mean_label_fleiss(&ann, &universe).unwrap();
    let mut oracle_values = Vec::new();
    for l in ["A", "B", "C"] {
        let m: Vec<Vec<usize>> = ann
            .iter()
            .map(|item| {
                let c = item.iter().filter(|s| s.contains(l)).count();
                vec![c, 3 - c]
            })
            .collect();
        let want = fleiss_oracle(&m);
        assert!((got.per_label[l] - want).abs() < TOL, "{l}");
        oracle_values.push(want);
    }
    assert!((got.per_label["A"] - 5.0 / 8.0).abs() < TOL);
    assert!((got.per_label["B"] - 23.0 / 35.0).abs() < TOL);
    assert!((got.per_label["C"] - 1.0 / 9.0).abs() < TOL);
    assert_eq!(got.excluded, ["D"]);
    let mean = oracle_values.iter().sum::<f64>() / 3.0;
    assert!((got.mean - mean).abs() < TOL);
    assert!((got.mean - 3511.0 / 7560.0).abs() < TOL);
}

#[test]
fn mean_label_kappa_identical_sets() {
    let ann = vec![
        vec![set(&["A"]), set(&["A"])],
        vec![set(&["B"]), set(&["B"])],
        vec![set(&["A", "B"]), set(&["A", "B"])],
        vec![set(&[]), set(&[])],
    ];
    let got = mean_label_fleiss(&ann, &["A", "B"]).unwrap();
    assert_eq!(got.mean, 1.0);
}

#[test]
fn mean_label_kappa_errors() {
    let never = vec![vec![set(&[]), set(&[])]];
    assert_eq!(mean_label_fleiss(&never, &["A"]).unwrap_err(), AgreementError::NoDefinedLabel);
    let single = vec![vec![set(&["A"])]];
    assert_eq!(mean_label_fleiss(&single, &["A"]).unwrap_err(), AgreementError::TooFewRaters(1));
    let outside = vec![vec![set(&["Q"]), set(&[])]];
    assert_eq!(mean_label_fleiss(&outside, &["A"]).unwrap_err(), AgreementError::OutOfUniverse("Q".into()));
}

#[test]
fn pairwise_jaccard() {
    let one = vec![vec![set(&["a", "b"]), set(&["b", "c"])]];
    assert!((mean_pairwise_jaccard(&one).unwrap() - 1.0 / 3.0).abs() < TOL);
    let empty = vec![vec![set(&[]), set(&[])]];
    assert_eq!(mean_pairwise_jaccard(&empty).unwrap(), 1.0);
    let same = vec![vec![set(&["a"]), set(&["a"]), set(&["a"])]; 3];
    assert_eq!(mean_pairwise_jaccard(&same).unwrap(), 1.0);
    assert!((mean_pairwise_jaccard(&planted_labels()).unwrap() - 11.0 / 18.0).abs() < TOL);
    assert!(mean_pairwise_jaccard(&[vec![set(&["a"])]]).is_err());
}

// Reports.

fn sample_report() -> MetricsReport {
    let s = prf_multiclass(&["Pro-Govt", "Neutral", "Pro-Opp"], &["Pro-Govt", "Pro-Opp", "Pro-Opp"], &["Pro-Govt", "Pro-Opp", "Neutral"])
        .unwrap();
    MetricsReport {
        task: Task::Bias,
        run: RunMetadata {
            setting: "fanta".into(),
            backend: Some("replay".into()),
            ..Default::default()
        },
        events: vec![EventMetrics::from_scores(
            "CAA",
            s,
            vec![SkippedItem {
                article_id: "x".into(),
                reason: "pipeline failure".into(),
            }],
        )],
    }
}

#[test]
fn markdown_has_nine_metric_columns() {
    let md = render_report(&sample_report(), ReportFormat::Markdown).unwrap();
    assert!(md.contains("| Prompt Settings | Pre | Rec | F1 | Pre | Rec | F1 | Pre | Rec | F1 |"));
    assert!(md.contains("Micro (Pre, Rec, F1) | Macro (Pre, Rec, F1) | Weighted (Pre, Rec, F1)"));
    let row = md.lines().find(|l| l.starts_with("| fanta |")).unwrap();
    assert_eq!(row.matches('|').count(), 11);
    assert!(md.contains("| gold \\ pred | Pro-Govt | Pro-Opp | Neutral |"));
    assert!(md.contains("- x: pipeline failure"));
}

#[test]
fn empty_per_class_is_an_error() {
    let mut r = sample_report();
    r.events[0].per_class.clear();
    assert_eq!(render_report(&r, ReportFormat::Markdown).unwrap_err(), EvalError::EmptyUniverse);
    assert_eq!(render_report(&r, ReportFormat::Json).unwrap_err(), EvalError::EmptyUniverse);
}

#[test]
fn json_round_trips() {
    let r = sample_report();
    let text = render_report(&r, ReportFormat::Json).unwrap();
    let back: MetricsReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
}

#[test]
fn combined_reports_share_a_table() {
    let a = sample_report();
    let mut b = sample_report();
    b.run.setting = "zero-shot-bias".into();
    let md = render_reports(&[a, b.clone()]).unwrap();
    assert_eq!(md.matches("| Prompt Settings |").count(), 1);
    assert!(md.contains("| zero-shot-bias |"));
    b.task = Task::Technique;
    assert!(matches!(render_reports(&[sample_report(), b]), Err(EvalError::MixedTasks(..))));
}
