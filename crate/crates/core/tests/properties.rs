use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::sample::subsequence;

use provclass::backend::{
    build_finetune_record, classify_paragraph, parse_model_output, AnnotatedSentence, Backend, ChatMessage,
    OutputRecord, PromptMode, PromptTemplate,
};
use provclass::corpus::{self, Corpus, CorpusRecord, Split};
use provclass::evalstat::{cohen_kappa, vargha_delaney_a12, wilcoxon_rank_sum, RankSumMethod};
use provclass::keywords::{classify_keywords, KeywordTable};
use provclass::{Concept, Jurisdiction, LabelSet, Provision};

fn label_set() -> impl Strategy<Value = LabelSet> {
    subsequence(Concept::ALL.to_vec(), 0..=13).prop_map(|cs| cs.into_iter().collect())
}

fn scarce() -> Vec<Concept> {
    Concept::ALL.into_iter().filter(|c| c.is_scarce()).collect()
}

// ---- taxonomy ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closure_idempotent_superset_overall(s in label_set()) {
        let c = s.closed();
        prop_assert_eq!(c.closed(), c);
        prop_assert!(c.is_superset(&s.difference(LabelSet::from_iter([Concept::Overall]))));
        let content = s.difference(LabelSet::from_iter([Concept::Overall]));
        prop_assert_eq!(c.contains(Concept::Overall), !content.is_empty());
        for concept in c.iter() {
            if let Some(parent) = concept.parent() {
                prop_assert!(c.contains(parent));
            }
        }
    }

    #[test]
    fn closure_keep_overall_only_adds(s in label_set()) {
        let c = s.closed_keep_overall();
        prop_assert!(c.is_superset(&s));
        prop_assert_eq!(c.closed_keep_overall(), c);
    }
}

// ---- keywords ----

/// Every occurrence of every phrase, checked for alphanumeric neighbours.
fn naive_keywords(text: &str, table: &BTreeMap<Concept, Vec<String>>) -> LabelSet {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut out = LabelSet::new();
    for (concept, phrases) in table {
        for phrase in phrases {
            let p: Vec<char> = phrase.to_lowercase().chars().collect();
            if p.len() > chars.len() {
                continue;
            }
            for i in 0..=chars.len() - p.len() {
                if chars[i..i + p.len()] != p[..] {
                    continue;
                }
                let glued_left = i > 0 && chars[i - 1].is_alphanumeric() && p[0].is_alphanumeric();
                let end = i + p.len();
                let glued_right =
                    end < chars.len() && chars[end].is_alphanumeric() && p[p.len() - 1].is_alphanumeric();
                if !glued_left && !glued_right {
                    out.insert(*concept);
                }
            }
        }
    }
    out
}

fn phrase() -> impl Strategy<Value = String> {
    "[a-cA-C][a-c. é]{0,4}[a-c]?".prop_filter("non-blank", |s| !s.trim().is_empty())
}

fn keyword_rows() -> impl Strategy<Value = Vec<(Concept, String)>> {
    prop::collection::vec((prop::sample::select(scarce()), phrase()), 1..8).prop_map(|rows| {
        let mut seen = BTreeSet::new();
        rows.into_iter()
            .map(|(c, p)| (c, p.trim().to_string()))
            .filter(|(c, p)| seen.insert((*c, p.to_lowercase())))
            .collect()
    })
}

fn haystack() -> impl Strategy<Value = String> {
    "[a-cA-C .,é1-]{0,40}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn keywords_match_naive_oracle(rows in keyword_rows(), text in haystack()) {
        let table = KeywordTable::new(rows).unwrap();
        prop_assert_eq!(classify_keywords(&text, &table), naive_keywords(&text, table.entries()));
    }

    #[test]
    fn keywords_case_insensitive_and_scarce_only(rows in keyword_rows(), text in haystack()) {
        let table = KeywordTable::new(rows).unwrap();
        let found = classify_keywords(&text, &table);
        prop_assert_eq!(found, classify_keywords(&text.to_uppercase(), &table));
        prop_assert!(found.iter().all(|c| c.is_scarce()));
    }

    #[test]
    fn keywords_monotone(rows in keyword_rows(), extra in (prop::sample::select(scarce()), phrase()), text in haystack()) {
        let table = KeywordTable::new(rows).unwrap();
        let before = classify_keywords(&text, &table);
        let dup = table.entries().get(&extra.0).is_some_and(|ps| {
            ps.iter().any(|p| p.to_lowercase() == extra.1.trim().to_lowercase())
        });
        prop_assume!(!dup);
        let bigger = table.with_phrase(extra.0, &extra.1).unwrap();
        prop_assert!(classify_keywords(&text, &bigger).is_superset(&before));
    }

    #[test]
    fn builtin_keywords_match_oracle(text in "[A-Za-z .]{0,30}( E\\. coli| moisture| firmness| colour| listeria)?[A-Za-z .]{0,10}") {
        let table = KeywordTable::builtin();
        prop_assert_eq!(classify_keywords(&text, &table), naive_keywords(&text, table.entries()));
    }
}

// ---- statistics ----

/// Pairwise-count U: pairs with a > b, ties counting half.
fn pairwise_u(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }))
        .sum()
}

/// Two-sided exact p by enumerating every assignment of the pooled values.
fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let observed = pairwise_u(a, b);
    let (mut total, mut lower, mut upper) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let xs: Vec<f64> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pooled[i]).collect();
        let ys: Vec<f64> = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| pooled[i]).collect();
        let u = pairwise_u(&xs, &ys);
        total += 1;
        lower += u64::from(u <= observed);
        upper += u64::from(u >= observed);
    }
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

#[test]
fn exact_rank_sum_matches_enumeration_up_to_ten() {
    for n in 2..=10usize {
        for n1 in 1..n {
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != n1 {
                    continue;
                }
                let a: Vec<f64> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i as f64).collect();
                let b: Vec<f64> = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| i as f64).collect();
                let r = wilcoxon_rank_sum(&a, &b).unwrap();
                assert_eq!(r.method, RankSumMethod::Exact);
                assert_eq!(r.u, pairwise_u(&a, &b));
                let want = enumerated_p(&a, &b);
                assert!((r.p_value - want).abs() <= 1e-12, "{a:?} {b:?}: {} vs {want}", r.p_value);
            }
        }
    }
}

#[test]
fn normal_path_close_to_exact_at_six_six() {
    let mut worst: f64 = 0.0;
    for mask in 0u32..(1 << 12) {
        if mask.count_ones() != 6 {
            continue;
        }
        let a: Vec<f64> = (0..12).filter(|i| mask & (1 << i) != 0).map(f64::from).collect();
        let b: Vec<f64> = (0..12).filter(|i| mask & (1 << i) == 0).map(f64::from).collect();
        let exact = provclass::evalstat::rank_sum_exact(&a, &b).unwrap().p_value;
        let approx = provclass::evalstat::rank_sum_normal(&a, &b).unwrap().p_value;
        worst = worst.max((exact - approx).abs());
    }
    assert!(worst <= 0.02, "max deviation {worst}");
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..20).prop_map(|v| f64::from(v) / 4.0), 1..25)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn a12_matches_pairwise_count_and_is_symmetric(a in sample(), b in sample()) {
        let (ab, _) = vargha_delaney_a12(&a, &b).unwrap();
        let (ba, _) = vargha_delaney_a12(&b, &a).unwrap();
        prop_assert_eq!(ab, pairwise_u(&a, &b) / (a.len() * b.len()) as f64);
        prop_assert!((ab + ba - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn a12_invariant_under_monotone_transform(a in sample(), b in sample()) {
        let f = |v: &f64| (v * 3.0 + 1.0).exp();
        let ta: Vec<f64> = a.iter().map(f).collect();
        let tb: Vec<f64> = b.iter().map(f).collect();
        prop_assert_eq!(vargha_delaney_a12(&a, &b).unwrap().0, vargha_delaney_a12(&ta, &tb).unwrap().0);
    }

    #[test]
    fn rank_sum_p_in_unit_interval_and_symmetric(a in sample(), b in sample()) {
        let ab = wilcoxon_rank_sum(&a, &b).unwrap();
        let ba = wilcoxon_rank_sum(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
        prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
        prop_assert_eq!(ab.u + ba.u, (a.len() * b.len()) as f64);
    }
}

fn direct_kappa(a: &[bool], b: &[bool]) -> f64 {
    let n = a.len() as f64;
    let mut cells = [[0.0f64; 2]; 2];
    for (x, y) in a.iter().zip(b) {
        cells[usize::from(*x)][usize::from(*y)] += 1.0;
    }
    let po = (cells[0][0] + cells[1][1]) / n;
    let a1 = (cells[1][0] + cells[1][1]) / n;
    let b1 = (cells[0][1] + cells[1][1]) / n;
    let pe = a1 * b1 + (1.0 - a1) * (1.0 - b1);
    if pe == 1.0 {
        1.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn kappa_matches_direct_formula(pairs in prop::collection::vec(any::<(bool, bool)>(), 1..60)) {
        let (a, b): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let k = cohen_kappa(&a, &b).unwrap();
        prop_assert!((k - direct_kappa(&a, &b)).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&k));
        prop_assert!((cohen_kappa(&b, &a).unwrap() - k).abs() <= 1e-12);
    }
}

#[test]
fn kappa_fixed_cases() {
    let a = [true, false, true, true];
    assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
    assert_eq!(cohen_kappa(&[true; 6], &[false; 6]).unwrap(), 0.0);
    // 20 items, 19 agreements, 5 vs 4 positives.
    let a: Vec<bool> = (0..20).map(|i| i < 5).collect();
    let b: Vec<bool> = (0..20).map(|i| i < 4).collect();
    let k = cohen_kappa(&a, &b).unwrap();
    assert!((k - direct_kappa(&a, &b)).abs() <= 1e-12);
    // po = 0.95, pe = 0.25 * 0.2 + 0.75 * 0.8 = 0.65
    assert!((k - 6.0 / 7.0).abs() <= 1e-12);
}

// ---- prompts ----

fn sentence() -> impl Strategy<Value = String> {
    "[A-Z][a-z0-9 ,;:()°%.-]{0,40}[a-z.;]".prop_map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn finetune_record_round_trips(annotated in prop::collection::vec((sentence(), label_set()), 1..8)) {
        let annotated: Vec<AnnotatedSentence> =
            annotated.into_iter().map(|(s, l)| AnnotatedSentence::new(s, l)).collect();
        let paragraph = annotated.iter().map(|a| a.sentence.as_str()).collect::<Vec<_>>().join("\n");
        let tpl = PromptTemplate::builtin(PromptMode::FinetuneTrain);
        let msgs = build_finetune_record(&tpl, &paragraph, &annotated).unwrap();
        prop_assert_eq!(msgs.len(), 3);
        let parsed = parse_model_output(&msgs[2].content).unwrap();
        let want: Vec<OutputRecord> =
            annotated.iter().map(|a| OutputRecord::from_labels(&a.sentence, a.labels)).collect();
        prop_assert_eq!(&parsed, &want);
        let back: Vec<AnnotatedSentence> = parsed
            .iter()
            .map(|r| AnnotatedSentence::new(&r.sentence, r.labels.iter().map(|l| Concept::lookup(l).unwrap()).collect()))
            .collect();
        prop_assert_eq!(back, annotated);
        let fenced = format!("```\n{}\n```\n", msgs[2].content);
        prop_assert_eq!(parse_model_output(&fenced).unwrap(), want);
    }
}

// ---- corpus ----

fn record() -> impl Strategy<Value = (String, bool, bool, String, LabelSet)> {
    ("d[0-3]", any::<bool>(), any::<bool>(), "[A-Za-z ]{1,20}[a-z]", label_set())
}

fn build_corpus(raw: Vec<(String, bool, bool, String, LabelSet)>) -> Corpus {
    let records = raw
        .into_iter()
        .enumerate()
        .map(|(i, (doc, us, t, text, gold))| CorpusRecord {
            provision_id: format!("p{i}"),
            doc_id: doc,
            jurisdiction: if us { Jurisdiction::US } else { Jurisdiction::CA },
            split: if t { Split::T } else { Split::F },
            text,
            gold: gold.closed(),
            annotators: None,
        })
        .collect();
    Corpus { records }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn corpus_jsonl_round_trip(raw in prop::collection::vec(record(), 1..30)) {
        let corpus = build_corpus(raw);
        let (back, report) = Corpus::parse(&corpus.to_jsonl().unwrap(), "mem").unwrap();
        prop_assert!(report.normalized.is_empty());
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn distribution_ignores_record_order(raw in prop::collection::vec(record(), 1..30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let corpus = build_corpus(raw);
        let mut shuffled = corpus.clone();
        shuffled.records.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(corpus::distribution(&corpus), corpus::distribution(&shuffled));
    }

    #[test]
    fn batches_cover_ids_and_share_exactly(n in 4usize..200, k in 2usize..5, pct in 0u32..40, seed in any::<u64>()) {
        let overlap = f64::from(pct) / 100.0;
        let ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
        prop_assume!(n - corpus::shared_size(n, k, overlap).min(n) >= k);
        let b = corpus::make_annotation_batches(&ids, k, overlap, seed).unwrap();
        let union: BTreeSet<&String> = b.per_annotator.iter().flatten().collect();
        prop_assert_eq!(union, ids.iter().collect::<BTreeSet<_>>());
        let shared: BTreeSet<&String> = b.shared.iter().collect();
        for i in 0..k {
            let own: BTreeSet<&String> = b.per_annotator[i].iter().collect();
            prop_assert_eq!(own.len(), b.per_annotator[i].len());
            for j in i + 1..k {
                let other: BTreeSet<&String> = b.per_annotator[j].iter().collect();
                prop_assert_eq!(own.intersection(&other).copied().collect::<BTreeSet<_>>(), shared.clone());
            }
        }
        if !b.shared.is_empty() {
            let sizes: BTreeSet<usize> = b.per_annotator.iter().map(Vec::len).collect();
            prop_assert_eq!(sizes.len(), 1);
        }
    }
}

// ---- backend alignment ----

/// Returns a fixed reply regardless of the prompt.
struct Canned(String);

impl Backend for Canned {
    fn id(&self) -> String {
        "canned".into()
    }

    fn complete(&self, _messages: &[ChatMessage]) -> provclass::Result<String> {
        Ok(self.0.clone())
    }
}

fn provisions(texts: &[String]) -> Vec<Provision> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| Provision {
            provision_id: Provision::make_id("doc", i),
            doc_id: "doc".into(),
            index: i,
            block: 0,
            text: t.clone(),
            prefix_applied: false,
            prefix: Vec::new(),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn classify_paragraph_one_entry_per_provision(
        texts in prop::collection::vec(sentence(), 1..8),
        reply in prop::collection::vec((sentence(), label_set()), 0..10),
    ) {
        let body = reply
            .iter()
            .map(|(s, l)| provclass::backend::format_record(&OutputRecord::from_labels(s, *l)))
            .collect::<Vec<_>>()
            .join("\n");
        let ps = provisions(&texts);
        let tpl = PromptTemplate::builtin(PromptMode::FinetuneInfer);
        let out = classify_paragraph(&Canned(body), &tpl, &ps).unwrap();
        prop_assert_eq!(out.labels.len(), ps.len());
        for (entry, p) in out.labels.iter().zip(&ps) {
            prop_assert_eq!(&entry.0, &p.provision_id);
        }
    }

    #[test]
    fn shuffled_reply_keeps_labels_on_their_sentences(
        rows in prop::collection::btree_map(sentence(), label_set(), 1..8),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let texts: Vec<String> = rows.keys().cloned().collect();
        let mut order: Vec<(&String, &LabelSet)> = rows.iter().collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let body = order
            .iter()
            .map(|(s, l)| provclass::backend::format_record(&OutputRecord::from_labels(s, **l)))
            .collect::<Vec<_>>()
            .join("\n");
        let ps = provisions(&texts);
        let tpl = PromptTemplate::builtin(PromptMode::FinetuneInfer);
        let out = classify_paragraph(&Canned(body), &tpl, &ps).unwrap();
        for (id, labels) in &out.labels {
            let idx = ps.iter().position(|p| &p.provision_id == id).unwrap();
            prop_assert_eq!(*labels, rows[&texts[idx]]);
        }
        prop_assert!(out.warnings.is_empty());
    }
}
