//! Shared helpers for the integration tests: the seeded corpus and the
//! table property checks.
#![allow(dead_code)]

use std::collections::BTreeSet;

use covercfg::random::{random_grammar, RandomParams};
use covercfg::{Cfg, ObservationTable, Teacher, Tree};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const CORPUS_SIZE: u64 = 100;
pub const ELLS: [usize; 3] = [2, 3, 4];

/// Even seeds use the full profile, odd seeds a small one (two terminals,
/// right-hand sides of length at most two) so that the corpus contains
/// targets within reach of the brute-force minimality check.
pub fn corpus_params(seed: u64) -> RandomParams {
    if seed.is_multiple_of(2) {
        RandomParams::default()
    } else {
        RandomParams {
            max_terminals: 2,
            max_rhs: 2,
            ..RandomParams::default()
        }
    }
}

pub fn corpus_grammar(seed: u64) -> Cfg {
    random_grammar(seed, &corpus_params(seed)).expect("corpus grammar")
}

pub fn corpus() -> Vec<(u64, Cfg)> {
    (0..CORPUS_SIZE).map(|s| (s, corpus_grammar(s))).collect()
}

/// Elements of `S ∪ X(S)_[ℓ]`.
pub fn stored(table: &ObservationTable) -> Vec<Tree> {
    table
        .sorted_rows()
        .chain(table.x_of_depth_le_ell())
        .cloned()
        .collect()
}

/// Counts of table states for which each property was actually exercised.
#[derive(Debug, Default, Clone, Copy)]
pub struct TableTally {
    pub states: usize,
    pub closed: usize,
    pub closed_consistent: usize,
}

/// Checks the similarity, representative and automaton properties that
/// apply to `table` in its current state. Returns the first failure.
pub fn check_table(table: &ObservationTable, tally: &mut TableTally) -> Result<(), String> {
    let ell = table.bound().expect("cover table");
    let xs = stored(table);
    tally.states += 1;
    table.audit()?;

    // restricted transitivity; rows sorted by depth so that "depth at most
    // d" is a prefix, and neighbourhoods kept as bitsets
    let mut by_depth = xs.clone();
    by_depth.sort_by_key(Tree::depth);
    let n = by_depth.len();
    let words = n.div_ceil(64);
    for k in 1..=ell {
        let mut near = vec![vec![0u64; words]; n];
        for i in 0..n {
            for j in 0..n {
                if table.similar_k(&by_depth[i], &by_depth[j], k) {
                    near[i][j / 64] |= 1 << (j % 64);
                }
            }
        }
        for s in 0..n {
            for t in 0..n {
                if near[s][t / 64] >> (t % 64) & 1 == 1 {
                    continue;
                }
                let cap = by_depth[s].depth().max(by_depth[t].depth());
                let end = by_depth.partition_point(|x| x.depth() <= cap);
                let witness = (0..end.div_ceil(64)).find_map(|w| {
                    let mask = if (w + 1) * 64 <= end { !0 } else { (1u64 << (end % 64)) - 1 };
                    let both = near[s][w] & near[t][w] & mask;
                    (both != 0).then(|| w * 64 + both.trailing_zeros() as usize)
                });
                if let Some(x) = witness {
                    return Err(format!(
                        "transitivity fails at k={k}: {:?} ~ {:?} ~ {:?}",
                        by_depth[s], by_depth[x], by_depth[t]
                    ));
                }
            }
        }
    }

    if !table.is_closed() {
        return Ok(());
    }
    tally.closed += 1;
    let rows: Vec<Tree> = table.sorted_rows().cloned().collect();
    let mut reps = BTreeSet::new();
    for x in &xs {
        let r = table
            .representative(x)
            .map_err(|e| format!("closed table without representative: {e}"))?;
        if r.depth() > x.depth() {
            return Err(format!("r({x:?}) = {r:?} is deeper"));
        }
        reps.insert(r);
    }
    let rep_list: Vec<&Tree> = reps.iter().collect();
    for (i, r1) in rep_list.iter().enumerate() {
        for r2 in &rep_list[i + 1..] {
            if table.similar(r1, r2) {
                return Err(format!("representatives {r1:?} and {r2:?} are similar"));
            }
        }
        if table.representative(r1).as_ref() != Ok(*r1) {
            return Err(format!("r(r) != r for {r1:?}"));
        }
    }
    let row_reps: BTreeSet<Tree> = rows
        .iter()
        .map(|s| table.representative(s).unwrap())
        .collect();
    for x in &xs {
        let rx = table.representative(x).unwrap();
        for c1 in table.sigma_hole() {
            let y = c1.plug(&rx);
            let ry = table
                .representative(&y)
                .map_err(|e| format!("C1[r(x)] without representative: {e}"))?;
            if !row_reps.contains(&ry) {
                return Err(format!("r({y:?}) = {ry:?} is not the representative of a row"));
            }
        }
    }

    if !table.is_consistent() {
        return Ok(());
    }
    tally.closed_consistent += 1;
    let (automaton, states) = table.build_automaton().map_err(|e| e.to_string())?;
    for x in &xs {
        let q = automaton.run(x).ok_or("table automaton is not total")?;
        let dx = &states[q];
        if !table.similar(dx, x) || dx.depth() > x.depth() {
            return Err(format!("delta*({x:?}) = {dx:?}"));
        }
    }
    for (q, r) in states.iter().enumerate() {
        if automaton.run(r) != Some(q) {
            return Err(format!("delta*(r) != r for {r:?}"));
        }
    }
    let bad = table.theorem_violations(&automaton);
    if let Some((x, c)) = bad.first() {
        return Err(format!("automaton disagrees with T at {x:?} under {c:?}"));
    }
    Ok(())
}

/// The rows `σ(a,…,a)` of least arity, one per terminal: a small
/// subterm-closed start.
pub fn seed_rows(table: &mut ObservationTable, teacher: &mut Teacher) {
    let alpha = table.alphabet().clone();
    let m = *alpha.arities().first().expect("some arity");
    for leaf in alpha.leaves() {
        table.add_row(teacher, &Tree::node(vec![leaf; m])).expect("seed row");
    }
}

/// Mutates `table` by a random step: usually the learner's own fix when
/// one applies, otherwise a random row from `X(S)_[ℓ]` or a random
/// admissible column. Returns `false` when nothing could be added.
pub fn random_step(table: &mut ObservationTable, teacher: &mut Teacher, rng: &mut ChaCha8Rng) -> bool {
    let ell = table.bound().expect("cover table");
    if rng.gen_bool(0.5) {
        if let Some(inc) = table.find_inconsistency() {
            return table.add_column(teacher, &inc.new_column()).expect("fix column");
        }
        if let Some(x) = table.find_unclosed() {
            return table.add_row(teacher, &x).expect("fix row");
        }
    }
    if rng.gen_bool(0.6) {
        let ext: Vec<Tree> = table.x_of_depth_le_ell().iter().cloned().collect();
        if let Some(x) = ext.choose(rng) {
            return table.add_row(teacher, x).expect("random row");
        }
    }
    let columns = table.columns().to_vec();
    let sigma: Vec<_> = table.sigma_hole().iter().cloned().collect();
    for _ in 0..20 {
        let (Some(outer), Some(inner)) = (columns.choose(rng), sigma.choose(rng)) else {
            return false;
        };
        let c = outer.compose(inner);
        if c.hole_depth() < ell && c.depth() <= ell && !columns.contains(&c) {
            return table.add_column(teacher, &c).expect("random column");
        }
    }
    false
}
