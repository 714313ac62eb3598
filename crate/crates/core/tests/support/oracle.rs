//! Brute-force reference implementations of BLEU and chrF.
//!
//! Written without hash maps: n-grams are compared element by element so
//! that nothing is shared with the library's counting code.

#![allow(dead_code)]

fn windows<T: Clone>(items: &[T], n: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start + n <= items.len() {
        out.push(items[start..start + n].to_vec());
        start += 1;
    }
    out
}

fn occurrences<T: PartialEq>(haystack: &[Vec<T>], needle: &[T]) -> u64 {
    haystack.iter().filter(|g| g.as_slice() == needle).count() as u64
}

/// Sum over distinct hypothesis n-grams of min(count in hyp, count in ref).
fn clipped_matches<T: PartialEq + Clone>(hyp: &[Vec<T>], reference: &[Vec<T>]) -> u64 {
    let mut seen: Vec<Vec<T>> = Vec::new();
    let mut total = 0;
    for g in hyp {
        if seen.iter().any(|s| s == g) {
            continue;
        }
        seen.push(g.clone());
        total += occurrences(hyp, g).min(occurrences(reference, g));
    }
    total
}

/// Corpus BLEU over pre-tokenized pairs. Orders with no hypothesis n-grams
/// are left out of the geometric mean; any zero precision gives 0.
pub fn bleu(pairs: &[(Vec<String>, Vec<String>)], max_order: usize) -> f64 {
    let mut matches = vec![0u64; max_order];
    let mut totals = vec![0u64; max_order];
    let (mut c, mut r) = (0u64, 0u64);
    for (hyp, reference) in pairs {
        c += hyp.len() as u64;
        r += reference.len() as u64;
        for n in 1..=max_order {
            let hg = windows(hyp, n);
            let rg = windows(reference, n);
            matches[n - 1] += clipped_matches(&hg, &rg);
            totals[n - 1] += hg.len() as u64;
        }
    }
    if c == 0 {
        return 0.0;
    }
    let mut logs = Vec::new();
    for n in 0..max_order {
        if totals[n] == 0 {
            continue;
        }
        if matches[n] == 0 {
            return 0.0;
        }
        logs.push((matches[n] as f64 / totals[n] as f64).ln());
    }
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * mean.exp()
}

/// Corpus chrF with whitespace removed before n-gram extraction.
pub fn chrf(pairs: &[(String, String)], max_order: usize, beta: f64) -> f64 {
    let mut stats = vec![(0u64, 0u64, 0u64); max_order];
    for (hyp, reference) in pairs {
        let h: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
        let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
        for n in 1..=max_order {
            let hg = windows(&h, n);
            let rg = windows(&r, n);
            let s = &mut stats[n - 1];
            s.0 += hg.len() as u64;
            s.1 += rg.len() as u64;
            s.2 += clipped_matches(&hg, &rg);
        }
    }
    let usable: Vec<_> = stats.iter().filter(|s| s.0 > 0 && s.1 > 0).collect();
    if usable.is_empty() {
        return 0.0;
    }
    let p = usable.iter().map(|s| s.2 as f64 / s.0 as f64).sum::<f64>() / usable.len() as f64;
    let rec = usable.iter().map(|s| s.2 as f64 / s.1 as f64).sum::<f64>() / usable.len() as f64;
    if p + rec == 0.0 {
        return 0.0;
    }
    let b2 = beta * beta;
    100.0 * (1.0 + b2) * p * rec / (b2 * p + rec)
}
