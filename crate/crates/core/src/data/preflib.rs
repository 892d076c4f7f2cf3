//! PrefLib SOC ingestion (strict complete orders) and a synthetic
//! preference generator in the same file format.
//!
//! Two SOC dialects are accepted: the classic header
//! (`<n>` / `<id>,<name>` lines / `<total>,<sum>,<unique>` / `<mult>,<order>`)
//! and the newer metadata style (`# NUMBER ALTERNATIVES: <n>` with
//! `<mult>: <order>` vote lines).

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{shuffled_splits, DataError, DataRow, Dataset};

/// Sushi item ids whose relative order forms the 36-bit feature matrix.
pub const FEATURE_ITEMS: [u32; 6] = [1, 2, 3, 5, 7, 8];
/// Sushi item ids whose relative order forms the 16-bit label matrix.
pub const LABEL_ITEMS: [u32; 4] = [4, 6, 9, 10];

/// Parses SOC text into complete strict rankings (most preferred first).
pub fn parse_soc(text: &str) -> Result<Vec<Vec<u32>>, DataError> {
    let numbered: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if numbered.is_empty() {
        return Err(schema(1, "empty file"));
    }
    if numbered[0].1.starts_with('#') {
        parse_soc_metadata(&numbered)
    } else {
        parse_soc_classic(&numbered)
    }
}

fn parse_soc_classic(lines: &[(usize, &str)]) -> Result<Vec<Vec<u32>>, DataError> {
    let (lineno, first) = lines[0];
    let n: usize = first
        .parse()
        .map_err(|_| schema(lineno, "expected the alternative count"))?;
    if lines.len() < n + 2 {
        return Err(schema(lineno, "file ends before the vote count line"));
    }
    for &(ln, alt) in &lines[1..=n] {
        let id: u32 = alt
            .split(',')
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| schema(ln, "bad alternative line"))?;
        if id == 0 || id as usize > n {
            return Err(schema(ln, "alternative id out of range"));
        }
    }
    // The count line is `<total>,<sum>,<unique>`; only sanity-checked.
    let (count_ln, count_line) = lines[n + 1];
    let counts: Vec<usize> = count_line
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| schema(count_ln, "bad count line"))?;
    if counts.len() != 3 {
        return Err(schema(count_ln, "count line needs three fields"));
    }
    let mut rankings = Vec::new();
    for &(ln, vote) in &lines[n + 2..] {
        let mut fields = vote.split(',').map(str::trim);
        let mult: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| schema(ln, "vote line missing multiplicity"))?;
        let order = parse_order(fields, n, ln)?;
        for _ in 0..mult {
            rankings.push(order.clone());
        }
    }
    if rankings.len() != counts[0] {
        return Err(schema(
            count_ln,
            &format!("header declares {} voters, found {}", counts[0], rankings.len()),
        ));
    }
    Ok(rankings)
}

fn parse_soc_metadata(lines: &[(usize, &str)]) -> Result<Vec<Vec<u32>>, DataError> {
    let mut n: Option<usize> = None;
    let mut rankings = Vec::new();
    for &(ln, line) in lines {
        if let Some(meta) = line.strip_prefix('#') {
            if let Some(value) = meta.trim().strip_prefix("NUMBER ALTERNATIVES:") {
                n = value.trim().parse().ok();
            }
            continue;
        }
        let n = n.ok_or_else(|| schema(ln, "vote line before NUMBER ALTERNATIVES"))?;
        let (mult_str, order_str) = line
            .split_once(':')
            .ok_or_else(|| schema(ln, "expected `<mult>: <order>`"))?;
        let mult: usize = mult_str
            .trim()
            .parse()
            .map_err(|_| schema(ln, "bad multiplicity"))?;
        let order = parse_order(order_str.split(',').map(str::trim), n, ln)?;
        for _ in 0..mult {
            rankings.push(order.clone());
        }
    }
    Ok(rankings)
}

fn parse_order<'a>(
    fields: impl Iterator<Item = &'a str>,
    n: usize,
    ln: usize,
) -> Result<Vec<u32>, DataError> {
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for f in fields {
        let id: u32 = f
            .parse()
            .map_err(|_| schema(ln, &format!("bad item id {f:?}")))?;
        if id == 0 || id as usize > n {
            return Err(schema(ln, &format!("unknown item id {id}")));
        }
        if seen[id as usize - 1] {
            return Err(schema(ln, &format!("item {id} ranked twice")));
        }
        seen[id as usize - 1] = true;
        order.push(id);
    }
    if order.len() != n {
        return Err(schema(ln, "incomplete order (SOC requires all items)"));
    }
    Ok(order)
}

/// Flattens the relative order of `items` within `ranking` into a row-major
/// permutation matrix: bit `i * k + j` is set when `items[i]` holds relative
/// position `j`.
pub fn restriction_matrix(ranking: &[u32], items: &[u32]) -> Vec<bool> {
    let k = items.len();
    let mut bits = vec![false; k * k];
    let restricted: Vec<u32> =
        ranking.iter().copied().filter(|id| items.contains(id)).collect();
    for (j, id) in restricted.iter().enumerate() {
        let i = items.iter().position(|x| x == id).expect("filtered above");
        bits[i * k + j] = true;
    }
    bits
}

/// Builds the preference dataset: 6x6 feature matrices over
/// [`FEATURE_ITEMS`], 4x4 label matrices over [`LABEL_ITEMS`], and a
/// seeded-shuffle 60/20/20 split.
pub fn sushi_dataset(rankings: &[Vec<u32>], seed: u64) -> Result<Dataset, DataError> {
    for (i, r) in rankings.iter().enumerate() {
        if r.len() != 10 {
            return Err(schema(i + 1, "sushi rankings must cover 10 items"));
        }
    }
    let provenance = format!("generator=preference individuals={} split_seed={seed}", rankings.len());
    let mut ds = Dataset::new(36, 16, Some(provenance));
    let splits = shuffled_splits(rankings.len(), seed);
    for (ranking, &split) in rankings.iter().zip(&splits) {
        let features = restriction_matrix(ranking, &FEATURE_ITEMS)
            .into_iter()
            .map(|b| if b { 1.0 } else { 0.0 })
            .collect();
        let labels = restriction_matrix(ranking, &LABEL_ITEMS);
        ds.push(DataRow { features, labels, split, labeled: true });
    }
    Ok(ds)
}

/// Loads a SOC file straight into the preference dataset.
pub fn load_preflib_soc(path: &std::path::Path, seed: u64) -> Result<Dataset, DataError> {
    let text = std::fs::read_to_string(path)?;
    sushi_dataset(&parse_soc(&text)?, seed)
}

/// Hex SHA-256 of a byte buffer, for download verification.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Synthetic stand-in for the sushi preference data, written in classic SOC
/// format so it exercises the full ingestion path.
///
/// Each individual copies one of `archetypes` random base rankings and
/// applies a few random adjacent swaps, giving a population with learnable
/// cluster structure plus realistic noise.
pub fn gen_synthetic_preferences_soc(
    seed: u64,
    individuals: usize,
    archetypes: usize,
    max_swaps: usize,
) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bases = Vec::with_capacity(archetypes);
    for _ in 0..archetypes {
        let mut perm: Vec<u32> = (1..=10).collect();
        perm.shuffle(&mut rng);
        bases.push(perm);
    }
    let mut tally: HashMap<Vec<u32>, usize> = HashMap::new();
    for _ in 0..individuals {
        let mut ranking = bases[rng.gen_range(0..bases.len())].clone();
        let swaps = rng.gen_range(0..=max_swaps);
        for _ in 0..swaps {
            let i = rng.gen_range(0..9);
            ranking.swap(i, i + 1);
        }
        *tally.entry(ranking).or_insert(0) += 1;
    }
    let mut groups: Vec<(Vec<u32>, usize)> = tally.into_iter().collect();
    groups.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut out = String::new();
    out.push_str("10\n");
    for i in 1..=10 {
        out.push_str(&format!("{i},Item {i}\n"));
    }
    out.push_str(&format!("{individuals},{individuals},{}\n", groups.len()));
    for (ranking, mult) in groups {
        let order: Vec<String> = ranking.iter().map(u32::to_string).collect();
        out.push_str(&format!("{mult},{}\n", order.join(",")));
    }
    out
}

fn schema(line: usize, msg: &str) -> DataError {
    DataError::Schema { line, msg: msg.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;
    use crate::encoders::total_order;
    use crate::logic::State;

    const TWO_VOTERS: &str = "\
10
1,ebi
2,anago
3,maguro
4,ika
5,uni
6,sake
7,tamago
8,toro
9,tekka-maki
10,kappa-maki
2,2,2
1,1,2,3,4,5,6,7,8,9,10
1,10,9,8,7,6,5,4,3,2,1
";

    #[test]
    fn classic_fixture_produces_exact_matrices() {
        let rankings = parse_soc(TWO_VOTERS).unwrap();
        assert_eq!(rankings.len(), 2);
        let ds = sushi_dataset(&rankings, 0).unwrap();
        assert_eq!(ds.n_features(), 36);
        assert_eq!(ds.n_labels(), 16);

        // Voter 1 ranks 1,2,3,...  restricted to [1,2,3,5,7,8] the relative
        // order is the identity, so the feature matrix is the identity.
        let row = &ds.rows()[0];
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(row.features[i * 6 + j] == 1.0, i == j);
            }
        }
        // Restricted to [4,6,9,10] the identity holds for the labels too.
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(row.labels[i * 4 + j], i == j);
            }
        }
        // Voter 2 ranks 10,9,...,1: both restrictions are the reversal.
        let row = &ds.rows()[1];
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(row.features[i * 6 + j] == 1.0, j == 5 - i);
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(row.labels[i * 4 + j], j == 3 - i);
            }
        }
    }

    #[test]
    fn metadata_dialect_parses() {
        let text = "\
# FILE NAME: sample.soc
# NUMBER ALTERNATIVES: 4
# NUMBER VOTERS: 3
1: 1,2,3,4
2: 4,3,2,1
";
        let rankings = parse_soc(text).unwrap();
        assert_eq!(rankings.len(), 3);
        assert_eq!(rankings[0], vec![1, 2, 3, 4]);
        assert_eq!(rankings[2], vec![4, 3, 2, 1]);
    }

    #[test]
    fn rejects_incomplete_and_duplicate_orders() {
        let incomplete = "3\n1,a\n2,b\n3,c\n1,1,1\n1,1,2\n";
        assert!(parse_soc(incomplete).is_err());
        let duplicate = "3\n1,a\n2,b\n3,c\n1,1,1\n1,1,2,2\n";
        assert!(parse_soc(duplicate).is_err());
        let unknown = "3\n1,a\n2,b\n3,c\n1,1,1\n1,1,2,5\n";
        assert!(parse_soc(unknown).is_err());
    }

    #[test]
    fn rejects_voter_count_mismatch() {
        let text = "2\n1,a\n2,b\n3,3,1\n1,1,2\n";
        assert!(parse_soc(text).is_err());
    }

    #[test]
    fn synthetic_preferences_roundtrip_and_satisfy_the_constraint() {
        let soc = gen_synthetic_preferences_soc(5, 200, 6, 3);
        let rankings = parse_soc(&soc).unwrap();
        assert_eq!(rankings.len(), 200);
        let ds = sushi_dataset(&rankings, 5).unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.split_len(Split::Train), 120);
        let constraint = total_order(4).unwrap();
        for row in ds.rows() {
            assert!(constraint.eval_state(&State::new(row.labels.clone())).unwrap());
        }
    }

    #[test]
    fn synthetic_generation_is_deterministic() {
        let a = gen_synthetic_preferences_soc(9, 100, 4, 2);
        let b = gen_synthetic_preferences_soc(9, 100, 4, 2);
        assert_eq!(a, b);
    }

    #[test]
    fn sha256_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
