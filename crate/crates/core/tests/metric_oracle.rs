#[path = "support/oracle.rs"]
mod oracle;

use chatmt_core::metrics::{bleu, chrf, BleuConfig, ChrfConfig, Smoothing, Tokenizer};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const VOCAB: [&str; 12] = ["the", "cat", "sat", "on", "mat", "a", "dog", "is", "here", "password", "reset", "email"];

fn sentence(rng: &mut StdRng) -> Vec<String> {
    let len = rng.gen_range(1..=30);
    (0..len).map(|_| VOCAB[rng.gen_range(0..VOCAB.len())].to_string()).collect()
}

fn random_pairs(seed: u64, count: usize) -> Vec<(Vec<String>, Vec<String>)> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count).map(|_| (sentence(&mut rng), sentence(&mut rng))).collect()
}

fn whitespace_config() -> BleuConfig {
    BleuConfig { max_ngram_order: 4, smoothing: Smoothing::None, tokenizer: Tokenizer::Whitespace }
}

#[test]
fn bleu_matches_oracle_per_pair_and_per_corpus() {
    let pairs = random_pairs(7, 200);
    for (h, r) in &pairs {
        let ours = bleu(&[h.join(" ")], &[r.join(" ")], &whitespace_config()).unwrap();
        let theirs = oracle::bleu(&[(h.clone(), r.clone())], 4);
        assert!((ours - theirs).abs() < 1e-9, "{h:?} / {r:?}: {ours} vs {theirs}");
    }
    let hyps: Vec<String> = pairs.iter().map(|p| p.0.join(" ")).collect();
    let refs: Vec<String> = pairs.iter().map(|p| p.1.join(" ")).collect();
    let ours = bleu(&hyps, &refs, &whitespace_config()).unwrap();
    assert!((ours - oracle::bleu(&pairs, 4)).abs() < 1e-9);
}

#[test]
fn chrf_matches_oracle_per_pair_and_per_corpus() {
    let pairs: Vec<(String, String)> = random_pairs(11, 200).into_iter().map(|(h, r)| (h.join(" "), r.join(" "))).collect();
    let config = ChrfConfig::default();
    for (h, r) in &pairs {
        let ours = chrf(&[h], &[r], &config).unwrap();
        let theirs = oracle::chrf(&[(h.clone(), r.clone())], 6, 2.0);
        assert!((ours - theirs).abs() < 1e-9, "{h} / {r}: {ours} vs {theirs}");
    }
    let hyps: Vec<&String> = pairs.iter().map(|p| &p.0).collect();
    let refs: Vec<&String> = pairs.iter().map(|p| &p.1).collect();
    let ours = chrf(&hyps, &refs, &config).unwrap();
    assert!((ours - oracle::chrf(&pairs, 6, 2.0)).abs() < 1e-9);
}

#[test]
fn korean_character_bleu_matches_oracle() {
    let mut rng = StdRng::seed_from_u64(3);
    let syllables: Vec<char> = "비밀번호재설정메일이도착하지않습니다".chars().collect();
    for _ in 0..50 {
        let make = |rng: &mut StdRng| -> String {
            (0..rng.gen_range(1..=20)).map(|_| syllables[rng.gen_range(0..syllables.len())]).collect()
        };
        let h = make(&mut rng);
        let r = make(&mut rng);
        let config = BleuConfig { tokenizer: Tokenizer::CharForKorean, ..whitespace_config() };
        let ours = bleu(&[&h], &[&r], &config).unwrap();
        let split = |s: &str| s.chars().map(String::from).collect::<Vec<_>>();
        let theirs = oracle::bleu(&[(split(&h), split(&r))], 4);
        assert!((ours - theirs).abs() < 1e-9, "{h} / {r}");
    }
}

#[test]
fn worked_examples() {
    let config = whitespace_config();
    let order1 = BleuConfig { max_ngram_order: 1, ..config };
    let v = bleu(&["the the the"], &["the cat"], &order1).unwrap();
    assert!((v - 100.0 / 3.0).abs() < 1e-9);
    assert!((oracle::bleu(&[(vec!["the".into(); 3], vec!["the".into(), "cat".into()])], 1) - v).abs() < 1e-9);

    let two = ChrfConfig { max_char_order: 2, ..ChrfConfig::default() };
    let v = chrf(&["abc"], &["abd"], &two).unwrap();
    assert!((v - 700.0 / 12.0).abs() < 1e-9);

    assert_eq!(chrf(&["abcd"], &["abcd"], &ChrfConfig::default()).unwrap(), 100.0);
    let cat = bleu(&["the cat sat on the mat"], &["the cat is on the mat"], &config).unwrap();
    assert_eq!(cat, 0.0);
    let split = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
    assert_eq!(oracle::bleu(&[(split("the cat sat on the mat"), split("the cat is on the mat"))], 4), 0.0);

    assert_eq!(bleu(&["no shared words here"], &["entirely different tokens appear"], &config).unwrap(), 0.0);
}
