//! Exhaustive truth-table checks of the engine against brute-force
//! evaluation of small boolean functions.

use iomon_bdd::{BddManager, BddRef, BoolOp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assignment(bits: u32, index: u32) -> Vec<bool> {
    (0..bits).map(|v| (index >> (bits - 1 - v)) & 1 == 1).collect()
}

/// Builds a function as a disjunction of minterms.
fn from_table(m: &mut BddManager, bits: u32, table: &[bool]) -> BddRef {
    let mut f = BddRef::FALSE;
    for (i, &on) in table.iter().enumerate() {
        if on {
            let lits: Vec<(u32, bool)> = assignment(bits, i as u32)
                .into_iter()
                .enumerate()
                .map(|(v, b)| (v as u32, b))
                .collect();
            let c = m.cube(&lits);
            f = m.or(f, c);
        }
    }
    f
}

/// Builds the same function by Shannon expansion, bottom variable first.
fn shannon(m: &mut BddManager, bits: u32, table: &[bool], var: u32, offset: usize) -> BddRef {
    if var == bits {
        return m.constant(table[offset]);
    }
    let half = 1usize << (bits - var - 1);
    let lo = shannon(m, bits, table, var + 1, offset);
    let hi = shannon(m, bits, table, var + 1, offset + half);
    let x = m.var(var);
    let nx = m.not(x);
    let a = m.and(nx, lo);
    let b = m.and(x, hi);
    m.or(a, b)
}

fn table_of(m: &BddManager, bits: u32, f: BddRef) -> Vec<bool> {
    (0..1u32 << bits).map(|i| m.eval(f, &assignment(bits, i))).collect()
}

fn random_table(rng: &mut ChaCha8Rng, bits: u32) -> Vec<bool> {
    let density: f64 = rng.gen_range(0.05..0.95);
    (0..1usize << bits).map(|_| rng.gen_bool(density)).collect()
}

#[test]
fn apply_matches_pointwise_tables_on_8_vars() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let mut m = BddManager::new(8);
        let tf = random_table(&mut rng, 8);
        let tg = random_table(&mut rng, 8);
        let f = from_table(&mut m, 8, &tf);
        let g = from_table(&mut m, 8, &tg);
        for op in [BoolOp::And, BoolOp::Or, BoolOp::Xor] {
            let h = m.apply(op, f, g);
            let expect: Vec<bool> = tf.iter().zip(&tg).map(|(&a, &b)| op.eval(a, b)).collect();
            assert_eq!(table_of(&m, 8, h), expect, "{op:?}");
            assert!(m.node_count(h) <= m.node_count(f) * m.node_count(g));
        }
        let nf = m.not(f);
        let expect: Vec<bool> = tf.iter().map(|b| !b).collect();
        assert_eq!(table_of(&m, 8, nf), expect);
        m.check_invariants().unwrap();
    }
}

#[test]
fn canonicity_up_to_12_vars() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for bits in [1u32, 4, 9, 12] {
        let mut m = BddManager::new(bits);
        let t = random_table(&mut rng, bits);
        let a = from_table(&mut m, bits, &t);
        let b = shannon(&mut m, bits, &t, 0, 0);
        assert_eq!(a, b, "bits={bits}");
        assert_eq!(table_of(&m, bits, a), t);
        m.check_invariants().unwrap();
    }
}

#[test]
fn sat_all_matches_table_on_10_vars() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let vars: Vec<u32> = (0..10).collect();
    for _ in 0..10 {
        let mut m = BddManager::new(10);
        let t = random_table(&mut rng, 10);
        let f = from_table(&mut m, 10, &t);
        let got: Vec<Vec<bool>> = m.sat_all(f, &vars).collect();
        let expect: Vec<Vec<bool>> = (0..1u32 << 10)
            .filter(|&i| t[i as usize])
            .map(|i| assignment(10, i))
            .collect();
        // lexicographic order means exactly the ascending index order
        assert_eq!(got, expect);
        assert_eq!(m.sat_count(f), expect.len() as u128);
    }
}

#[test]
fn sat_all_over_superset_of_support() {
    let mut m = BddManager::new(6);
    let f = m.cube(&[(1, true), (4, false)]);
    let got: Vec<Vec<bool>> = m.sat_all(f, &[1, 2, 4]).collect();
    assert_eq!(
        got,
        vec![vec![true, false, false], vec![true, true, false]]
    );
    assert_eq!(m.support(f), vec![1, 4]);
}

#[test]
fn restrict_agrees_with_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut m = BddManager::new(6);
    let t = random_table(&mut rng, 6);
    let f = from_table(&mut m, 6, &t);
    for var in 0..6u32 {
        for value in [false, true] {
            let r = m.restrict(f, var, value);
            for i in 0..64u32 {
                let mut a = assignment(6, i);
                let got = m.eval(r, &a);
                a[var as usize] = value;
                assert_eq!(got, m.eval(f, &a));
            }
        }
    }
}
