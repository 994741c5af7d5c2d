use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use diffsat::frontend::{parse_ground_asp, Program};
use diffsat::model::AtomKind;
use diffsat::oracle::enumerate_models;
use diffsat::sampler::enumerate_all;
use diffsat::stability::is_stable;
use diffsat::transform::compile;

fn random_program(seed: u64, allow_constraints: bool) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=8);
    let mut text = String::new();
    for i in 1..=n {
        if rng.gen_bool(0.25) {
            text.push_str(&format!("{{a{i}}}.\n"));
        }
    }
    for _ in 0..rng.gen_range(1..=10) {
        let pos: Vec<String> = (0..rng.gen_range(0..=2)).map(|_| format!("a{}", rng.gen_range(1..=n))).collect();
        let neg: Vec<String> = (0..rng.gen_range(0..=2)).map(|_| format!("not a{}", rng.gen_range(1..=n))).collect();
        let body: Vec<String> = pos.into_iter().chain(neg).collect();
        let head = if allow_constraints && !body.is_empty() && rng.gen_bool(0.1) {
            String::new()
        } else {
            format!("a{}", rng.gen_range(1..=n))
        };
        match body.is_empty() {
            true => text.push_str(&format!("{head}.\n")),
            false => text.push_str(&format!("{head} :- {}.\n", body.join(", "))),
        }
    }
    text
}

/// Naive reduct check: drop rules whose negative body meets `m`, keep
/// choices of atoms in `m` as facts, and compare the least model, computed
/// by plain fixpoint iteration, with `m`.
fn definitional(program: &Program, m: &BTreeSet<String>) -> bool {
    let name = |a| program.name(a).to_string();
    let mut least: BTreeSet<String> = program.choices.iter().map(|&a| name(a)).filter(|a| m.contains(a)).collect();
    loop {
        let before = least.len();
        for r in &program.rules {
            let Some(h) = r.head else { continue };
            if r.neg.iter().any(|&a| m.contains(&name(a))) {
                continue;
            }
            if r.pos.iter().all(|&a| least.contains(&name(a))) {
                least.insert(name(h));
            }
        }
        if least.len() == before {
            return least == *m;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn is_stable_matches_definition(seed in any::<u64>(), pick in any::<u32>()) {
        let (p, _) = parse_ground_asp(&random_program(seed, false)).unwrap();
        let c = compile(&p);
        let originals: Vec<_> = p.symbols.atoms().collect();
        let m: BTreeSet<String> = originals
            .iter()
            .enumerate()
            .filter(|(i, _)| pick >> (i % 32) & 1 == 1)
            .map(|(_, &a)| p.name(a).to_string())
            .collect();
        let mut values = vec![false; c.num_atoms()];
        for slot in 0..c.num_atoms() {
            let a = diffsat::model::Atom::from_slot(slot);
            let name = c.symbols.name(a);
            values[slot] = match c.kind(a) {
                AtomKind::Original => m.contains(name),
                AtomKind::ChoiceAux => !m.contains(name.trim_start_matches("_not_")),
                _ => false,
            };
        }
        prop_assert_eq!(is_stable(&c, &values).0, definitional(&p, &m));
    }

    #[test]
    fn loop_nogoods_keep_every_stable_model(seed in any::<u64>()) {
        let (p, _) = parse_ground_asp(&random_program(seed, true)).unwrap();
        let expected = enumerate_models(&p).unwrap();
        let found = enumerate_all(&compile(&p), &Default::default());
        prop_assert_eq!(found, expected);
    }
}
