mod common;

use std::sync::OnceLock;

use common::{corpus, random_molecule, random_permutation};
use moltok::chem::{canonical_form, molecules_equal, parse_smiles, write_smiles, MolGraph};
use moltok::metrics::{morgan_fingerprint, path_fingerprint, tanimoto};
use moltok::motif::{detokenize_with_report, tokenize, Motif, TokenSequence, TraversalOrder};
use moltok::training::{span_corrupt, ImportanceWeights};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus_mols() -> &'static [(String, MolGraph)] {
    static CORPUS: OnceLock<Vec<(String, MolGraph)>> = OnceLock::new();
    CORPUS.get_or_init(corpus)
}

fn sorted_keys(seq: &TokenSequence) -> Vec<String> {
    let mut k: Vec<String> = seq.keys().map(String::from).collect();
    k.sort();
    k
}

fn check_round_trip(mol: &MolGraph) -> Result<(), TestCaseError> {
    for order in [TraversalOrder::Dfs, TraversalOrder::Bfs] {
        let seq = tokenize(mol, order).unwrap();
        prop_assert!(seq.len() <= mol.atom_count());
        let (back, report) = detokenize_with_report(&seq).unwrap();
        prop_assert!(report.is_clean(), "{:?}", report);
        prop_assert!(molecules_equal(&back, mol), "{} -> {}", canonical_form(mol), canonical_form(&back));
        let text = seq.to_text();
        prop_assert_eq!(TokenSequence::from_text(&text, order).unwrap().to_text(), text);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn random_molecules_round_trip(seed in any::<u64>()) {
        check_round_trip(&random_molecule(seed, 18))?;
    }

    #[test]
    fn canonical_form_reparses_to_same_molecule(seed in any::<u64>()) {
        let mol = random_molecule(seed, 18);
        let canon = canonical_form(&mol);
        let back = parse_smiles(&canon).unwrap();
        prop_assert!(molecules_equal(&back, &mol));
        prop_assert_eq!(canonical_form(&back), canon);
        prop_assert!(molecules_equal(&parse_smiles(&write_smiles(&mol)).unwrap(), &mol));
    }

    #[test]
    fn canonical_form_ignores_atom_order(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let mol = random_molecule(seed, 18);
        let perm = random_permutation(mol.atom_count(), &mut ChaCha8Rng::seed_from_u64(perm_seed));
        let shuffled = mol.permuted(&perm);
        prop_assert_eq!(canonical_form(&shuffled), canonical_form(&mol));
    }

    #[test]
    fn tokens_ignore_atom_order(idx in 0usize..2115, perm_seed in any::<u64>()) {
        let (_, mol) = &corpus_mols()[idx % corpus_mols().len()];
        let perm = random_permutation(mol.atom_count(), &mut ChaCha8Rng::seed_from_u64(perm_seed));
        let shuffled = mol.permuted(&perm);
        for order in [TraversalOrder::Dfs, TraversalOrder::Bfs] {
            prop_assert_eq!(tokenize(&shuffled, order).unwrap().to_text(), tokenize(mol, order).unwrap().to_text());
        }
    }

    #[test]
    fn random_molecule_tokens_ignore_atom_order(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let mol = random_molecule(seed, 14);
        let perm = random_permutation(mol.atom_count(), &mut ChaCha8Rng::seed_from_u64(perm_seed));
        let a = tokenize(&mol, TraversalOrder::Dfs).unwrap();
        let b = tokenize(&mol.permuted(&perm), TraversalOrder::Dfs).unwrap();
        prop_assert_eq!(sorted_keys(&a), sorted_keys(&b));
    }

    #[test]
    fn traversal_orders_share_tokens(seed in any::<u64>()) {
        let mol = random_molecule(seed, 18);
        let dfs = tokenize(&mol, TraversalOrder::Dfs).unwrap();
        let bfs = tokenize(&mol, TraversalOrder::Bfs).unwrap();
        prop_assert_eq!(sorted_keys(&dfs), sorted_keys(&bfs));
    }

    #[test]
    fn motif_keys_are_fixpoints(seed in any::<u64>()) {
        let mol = random_molecule(seed, 18);
        for m in &tokenize(&mol, TraversalOrder::Dfs).unwrap().tokens {
            let rebuilt = Motif::from_key(m.key()).unwrap();
            prop_assert_eq!(rebuilt.key(), m.key());
        }
    }

    #[test]
    fn fingerprints_ignore_atom_order(idx in 0usize..2115, perm_seed in any::<u64>()) {
        let (_, mol) = &corpus_mols()[idx % corpus_mols().len()];
        let perm = random_permutation(mol.atom_count(), &mut ChaCha8Rng::seed_from_u64(perm_seed));
        let shuffled = mol.permuted(&perm);
        prop_assert_eq!(morgan_fingerprint(mol, 2, 2048).unwrap(), morgan_fingerprint(&shuffled, 2, 2048).unwrap());
        prop_assert_eq!(path_fingerprint(mol, 7, 2048).unwrap(), path_fingerprint(&shuffled, 7, 2048).unwrap());
    }

    #[test]
    fn tanimoto_is_symmetric_and_bounded(a in 0usize..2115, b in 0usize..2115) {
        let mols = corpus_mols();
        let (x, y) = (&mols[a % mols.len()].1, &mols[b % mols.len()].1);
        let (fx, fy) = (morgan_fingerprint(x, 2, 1024).unwrap(), morgan_fingerprint(y, 2, 1024).unwrap());
        let t = tanimoto(&fx, &fy).unwrap();
        prop_assert!((0.0..=1.0).contains(&t));
        prop_assert_eq!(t, tanimoto(&fy, &fx).unwrap());
        prop_assert_eq!(tanimoto(&fx, &fx).unwrap(), 1.0);
    }

    #[test]
    fn weights_are_a_distribution(counts in prop::collection::vec(0usize..60, 1..200)) {
        let w = ImportanceWeights::from_atom_counts(&counts).unwrap();
        let sum: f64 = w.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        for (i, j) in (0..counts.len()).zip(1..counts.len()) {
            if counts[i] > counts[j] {
                prop_assert!(w.as_slice()[i] > w.as_slice()[j]);
            }
        }
    }

    #[test]
    fn span_corruption_reconstructs(ids in prop::collection::vec(103u32..2000, 1..120), seed in any::<u64>(),
                                    rate in 0.05f64..0.6, mean in 1.0f64..6.0) {
        let pair = span_corrupt(&ids, seed, rate, mean).unwrap();
        prop_assert_eq!(pair.reconstruct(), ids.clone());
        prop_assert_eq!(span_corrupt(&ids, seed, rate, mean).unwrap(), pair.clone());
        let masked: usize = pair.spans.iter().map(|s| s.1).sum();
        prop_assert!(masked >= 1);
        if ids.len() > 1 {
            prop_assert!(masked < ids.len());
        }
    }
}
