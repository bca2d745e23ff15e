//! Brute-force metric references, written without the library's helpers.

/// Clipped n-gram matches by explicit pairing: each candidate n-gram claims
/// the first unclaimed equal n-gram of the reference.
fn clipped_matches(candidate: &[String], reference: &[String], n: usize) -> usize {
    if candidate.len() < n || reference.len() < n {
        return 0;
    }
    let mut claimed = vec![false; reference.len() - n + 1];
    let mut matches = 0;
    for i in 0..=candidate.len() - n {
        for j in 0..=reference.len() - n {
            if !claimed[j] && candidate[i..i + n] == reference[j..j + n] {
                claimed[j] = true;
                matches += 1;
                break;
            }
        }
    }
    matches
}

/// BLEU-4, orders truncated to the candidate length, zero counts replaced
/// by one half, brevity penalty min(1, exp(1 - r/c)). Empty side → 0.
pub fn bleu(candidate: &[String], reference: &[String]) -> f64 {
    let c = candidate.len();
    let r = reference.len();
    if c == 0 || r == 0 {
        return 0.0;
    }
    let orders = c.min(4);
    let mut product = 1.0f64;
    for n in 1..=orders {
        let m = clipped_matches(candidate, reference, n);
        let total = (c + 1 - n) as f64;
        let p = if m == 0 { 0.5 / total } else { m as f64 / total };
        product *= p;
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * product.powf(1.0 / orders as f64)
}

/// Longest common subsequence by trying every subsequence of `a`
/// (exponential; meant for at most 12 tokens).
pub fn lcs(a: &[String], b: &[String]) -> usize {
    assert!(a.len() <= 16, "exhaustive LCS is exponential");
    let is_subsequence = |mask: u32| {
        let mut j = 0;
        for (i, tok) in a.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            while j < b.len() && &b[j] != tok {
                j += 1;
            }
            if j == b.len() {
                return false;
            }
            j += 1;
        }
        true
    };
    (0u32..(1 << a.len()))
        .filter(|&m| is_subsequence(m))
        .map(|m| m.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

pub fn rouge_l(candidate: &[String], reference: &[String]) -> f64 {
    let l = lcs(candidate, reference) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / candidate.len() as f64;
    let r = l / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// Token lists of length 0..=12 over a small vocabulary so overlaps are
/// frequent.
pub fn random_pair(rng: &mut impl rand::Rng) -> (Vec<String>, Vec<String>) {
    const VOCAB: [&str; 6] = ["<", ">", "/", "Wander", "Sequence", "="];
    let list = |rng: &mut dyn rand::RngCore| {
        let len = rand::Rng::random_range(rng, 0..=12usize);
        (0..len)
            .map(|_| VOCAB[rand::Rng::random_range(rng, 0..VOCAB.len())].to_string())
            .collect::<Vec<_>>()
    };
    let a = list(rng);
    let b = list(rng);
    (a, b)
}

#[derive(Debug, Default)]
pub struct OracleSummary {
    pub pairs: usize,
    pub max_bleu_error: f64,
    pub max_rouge_error: f64,
    pub identity_failures: usize,
}

/// Compares library metrics with the references on `pairs` random pairs and
/// checks identity on `identity` random non-empty lists.
pub fn compare(seed: u64, pairs: usize, identity: usize) -> OracleSummary {
    use rand::SeedableRng;
    use swarmcommand_core::eval;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s = OracleSummary::default();
    for _ in 0..pairs {
        let (a, b) = random_pair(&mut rng);
        s.pairs += 1;
        s.max_bleu_error = s.max_bleu_error.max((eval::bleu(&a, &b).score - bleu(&a, &b)).abs());
        s.max_rouge_error = s.max_rouge_error.max((eval::rouge_l(&a, &b) - rouge_l(&a, &b)).abs());
    }
    let mut done = 0;
    while done < identity {
        let (a, _) = random_pair(&mut rng);
        if a.is_empty() {
            continue;
        }
        done += 1;
        if eval::bleu(&a, &a).score != 1.0 || eval::rouge_l(&a, &a) != 1.0 {
            s.identity_failures += 1;
        }
    }
    s
}
