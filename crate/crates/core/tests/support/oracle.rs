//! Brute-force n-gram counters for chrF++ and corpus BLEU. They share no code
//! with the library: grams are materialized as strings and clipped matches are
//! found by pairing each hypothesis gram with an unused identical reference gram.
#![allow(dead_code)]

use proptest::prelude::*;

/// Punctuation the random generators draw from; every entry is Unicode category P*.
pub const PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '(', ')', '"', '\'', '-', '«', '»', '¿', '¡', '。', '、', '؟', '।'];

pub fn is_punct(c: char) -> bool {
    PUNCT.contains(&c)
}

pub fn oracle_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut lo = 0;
        while lo < chars.len() && is_punct(chars[lo]) {
            lo += 1;
        }
        let mut hi = chars.len();
        while hi > lo && is_punct(chars[hi - 1]) {
            hi -= 1;
        }
        for c in &chars[..lo] {
            out.push(c.to_string());
        }
        if hi > lo {
            out.push(chars[lo..hi].iter().collect());
        }
        for c in &chars[hi..] {
            out.push(c.to_string());
        }
    }
    out
}

fn grams(units: &[String], n: usize) -> Vec<String> {
    if units.len() < n {
        return Vec::new();
    }
    (0..=units.len() - n).map(|k| units[k..k + n].join("\u{1}")).collect()
}

/// (matches, hyp total, ref total) by exhaustive pairing.
fn clipped(hyp: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let h = grams(hyp, n);
    let r = grams(reference, n);
    let mut used = vec![false; r.len()];
    let mut matches = 0;
    for g in &h {
        if let Some(k) = (0..r.len()).find(|&k| !used[k] && r[k] == *g) {
            used[k] = true;
            matches += 1;
        }
    }
    (matches, h.len(), r.len())
}

pub fn oracle_chrf(hyp: &str, reference: &str) -> f64 {
    let chars = |s: &str| s.chars().filter(|c| !c.is_whitespace()).map(String::from).collect::<Vec<_>>();
    let (hc, rc) = (chars(hyp), chars(reference));
    let (hw, rw) = (oracle_words(hyp), oracle_words(reference));
    let mut ps = Vec::new();
    let mut rs = Vec::new();
    let orders = (1..=6).map(|n| (&hc, &rc, n)).chain((1..=2).map(|n| (&hw, &rw, n)));
    for (h, r, n) in orders {
        let (m, th, tr) = clipped(h, r, n);
        if th == 0 && tr == 0 {
            continue;
        }
        ps.push(if th == 0 { 0.0 } else { m as f64 / th as f64 });
        rs.push(if tr == 0 { 0.0 } else { m as f64 / tr as f64 });
    }
    if ps.is_empty() {
        return 0.0;
    }
    let p = ps.iter().sum::<f64>() / ps.len() as f64;
    let r = rs.iter().sum::<f64>() / rs.len() as f64;
    if p + r == 0.0 {
        return 0.0;
    }
    100.0 * 5.0 * p * r / (4.0 * p + r)
}

pub fn oracle_bleu(hyps: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
    let mut m = [0usize; 4];
    let mut t = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in hyps.iter().zip(refs) {
        c += h.len();
        r += rf.len();
        for n in 1..=4 {
            let (mm, th, _) = clipped(h, rf, n);
            m[n - 1] += mm;
            t[n - 1] += th;
        }
    }
    if (0..4).any(|k| m[k] == 0 || t[k] == 0) {
        return 0.0;
    }
    let log_p: f64 = (0..4).map(|k| (m[k] as f64 / t[k] as f64).ln()).sum::<f64>() / 4.0;
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * log_p.exp()
}

/// Word pools per script for the randomized generators.
pub const VOCAB: &[&[&str]] = &[
    &["the", "cat", "sat", "on", "a", "mat", "dog"],
    &["кот", "сидит", "на", "ковре", "собака"],
    &["猫", "坐在", "垫子", "上", "狗"],
    &["बिल्ली", "चटाई", "पर", "बैठी", "कुत्ता"],
    &["القط", "على", "الحصيرة", "كلب"],
    &["ὁ", "γάτος", "κάθεται", "ἐπί"],
];

pub fn word() -> impl Strategy<Value = String> {
    (0..VOCAB.len(), any::<prop::sample::Index>(), 0..PUNCT.len(), 0u8..6).prop_map(|(s, i, p, decor)| {
        let w = i.get(VOCAB[s]).to_string();
        let mark = PUNCT[p];
        match decor {
            0 => format!("{mark}{w}"),
            1 => format!("{w}{mark}"),
            _ => w,
        }
    })
}

/// 1 to 12 words drawn across all scripts.
pub fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..=12).prop_map(|ws| ws.join(" "))
}

/// (hypothesis, reference): either independent, or a reference prefix
/// followed by up to two foreign words, capped at 12 words.
pub fn pair() -> impl Strategy<Value = (String, String)> {
    (sentence(), sentence(), any::<bool>(), any::<prop::sample::Index>()).prop_map(|(r, other, edit, cut)| {
        if edit {
            let ws: Vec<&str> = r.split(' ').collect();
            let k = cut.index(ws.len() + 1).min(10);
            let mut h: Vec<&str> = ws[..k].to_vec();
            h.extend(other.split(' ').take(2));
            (h.join(" "), r)
        } else {
            (other, r)
        }
    })
}
