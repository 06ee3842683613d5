mod common;

use common::job;
use proptest::prelude::*;
use regex::Regex;
use scale_core::prompt::{build_fewshot_prompt, build_scale_prompt, parse_chatml, serialize_chatml};
use scale_core::{ChatMessage, DemonstrationTriplet, Draft, DraftSet, Mode, TokenProb};

fn text() -> impl Strategy<Value = String> {
    "[a-zà-ÿ]{1,8}( [a-zà-ÿ]{1,8}){0,5}"
}

fn draft(marker: &str, words: &str, probs: &[f64]) -> Draft {
    let tokens: Vec<TokenProb> = words
        .split(' ')
        .chain(std::iter::once(marker))
        .zip(probs.iter().cycle())
        .map(|(w, &p)| TokenProb::new(w, p))
        .collect();
    Draft::from_tokens(format!("{words} {marker}"), tokens)
}

/// Draft sets whose texts carry a unique marker so occurrences can be counted.
fn draft_set(tag: &'static str, max_paths: usize) -> impl Strategy<Value = DraftSet> {
    (prop::collection::vec(text(), 1..=max_paths), prop::collection::vec(0.01f64..1.0, 1..4)).prop_map(move |(ws, probs)| {
        let mut drafts: Vec<Draft> =
            ws.iter().enumerate().map(|(i, w)| draft(&format!("{tag}{i}x"), w, &probs)).collect();
        drafts.sort_by(|a, b| b.seq_logprob.total_cmp(&a.seq_logprob));
        DraftSet::new(drafts, "stm", 1.0).unwrap()
    })
}

fn demos() -> impl Strategy<Value = Vec<DemonstrationTriplet>> {
    prop::collection::vec((text(), draft_set("DEMO", 3), text()), 0..6).prop_map(|v| {
        v.into_iter()
            .map(|(s, d, t)| DemonstrationTriplet::new(s, d, t).unwrap())
            .collect()
    })
}

fn confidence_pattern() -> Regex {
    Regex::new(r"\(\d\.\d\d\)").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scale_prompt_invariants(
        source in text(),
        demos in demos(),
        test in draft_set("TEST", 4),
        shots in 0usize..8,
        confidence in any::<bool>(),
        pivot in any::<bool>(),
    ) {
        let mut j = job("p", &source, Mode::Refine);
        j.shots = shots;
        j.include_confidence = confidence;
        if pivot {
            j.mode = Mode::Pivot;
            j.pivot_lang = Some(common::tag("fra_Latn"));
        }
        let a = build_scale_prompt(&j, &demos, &test).unwrap();
        let b = build_scale_prompt(&j, &demos, &test).unwrap();
        prop_assert_eq!(&a, &b);

        let k = shots.min(demos.len());
        prop_assert_eq!(a.shots_used, k);
        prop_assert_eq!(a.paths_used, test.len());
        prop_assert_eq!(a.chatml.matches("\nTarget: ").count(), k);
        for (i, d) in test.drafts.iter().enumerate() {
            let line = format!("Potentially useful reference answer {}: ", i + 1);
            prop_assert_eq!(a.chatml.matches(&line).count(), k + 1);
            if !confidence {
                prop_assert_eq!(a.chatml.matches(d.text.as_str()).count(), 1);
            }
        }
        prop_assert_eq!(confidence_pattern().is_match(&a.chatml), confidence);
        prop_assert!(a.chatml.ends_with("<|im_start|>assistant\nTarget:"));
        prop_assert_eq!(parse_chatml(&a.chatml).unwrap(), a.messages);
    }

    #[test]
    fn fewshot_prompt_invariants(
        source in text(),
        pairs in prop::collection::vec((text(), text()), 0..12),
        shots in 0usize..12,
    ) {
        let mut j = job("d", &source, Mode::Direct);
        j.shots = shots;
        let bundle = build_fewshot_prompt(&j, &pairs).unwrap();
        let k = shots.min(pairs.len());
        prop_assert_eq!(bundle.chatml.matches("\nTarget: ").count(), k);
        prop_assert!(!bundle.chatml.contains("reference answer"));
        prop_assert!(!confidence_pattern().is_match(&bundle.chatml));
        prop_assert_eq!(bundle, build_fewshot_prompt(&j, &pairs).unwrap());
    }

    #[test]
    fn chatml_round_trip(
        system in text(),
        turns in prop::collection::vec((text(), text()), 0..4),
        user in "[a-z\n :]{1,40}",
        open_slot in any::<bool>(),
    ) {
        let mut messages = vec![ChatMessage::system(system)];
        for (u, a) in turns {
            messages.push(ChatMessage::user(u));
            messages.push(ChatMessage::assistant(a));
        }
        messages.push(ChatMessage::user(user));
        if open_slot {
            messages.push(ChatMessage::assistant("Target:"));
        }
        prop_assert_eq!(parse_chatml(&serialize_chatml(&messages)).unwrap(), messages);
    }
}
