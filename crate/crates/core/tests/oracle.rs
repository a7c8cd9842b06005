mod common;

use markov_llt::chain::{reverse_phi_exact, validate_assumptions, Backward};
use markov_llt::llt::{char_function_at, exact_moments, lattice_distribution, Lattice};
use markov_llt::transfer::TwistedCocycle;

const TOL: f64 = 1e-10;
const TS: [f64; 4] = [0.3, 1.1, 2.5, 4.0];

#[test]
fn dp_characteristic_function_matches_enumeration() {
    for seed in 0..25 {
        let inst = common::random_instance(seed, false);
        for n in [1, inst.f.len() / 2, inst.f.len()] {
            let got = char_function_at(&inst.chain, &inst.f, &TS, n).unwrap();
            for (&t, g) in TS.iter().zip(&got) {
                let want = common::char_function(&inst.chain, &inst.f, n, t);
                assert!((g - want).norm() <= TOL, "seed {seed} n {n} t {t}: {g} vs {want}");
            }
        }
    }
}

#[test]
fn cocycle_characteristic_function_matches_enumeration() {
    let mut checked = 0;
    for seed in 0..40 {
        let inst = common::random_instance(seed, false);
        if inst.p > 0 {
            continue;
        }
        let bw = Backward::new(&inst.chain).unwrap();
        for &t in &TS {
            let c = TwistedCocycle::at_frequency(&inst.chain, &bw, &inst.f, t).unwrap();
            let n = inst.chain.horizon() + 1 - c.width();
            let got = c.char_function(&inst.chain, &bw.marginals, n).unwrap();
            let want = common::char_function(&inst.chain, &inst.f, n, t);
            assert!((got - want).norm() <= TOL, "seed {seed} t {t}");
        }
        checked += 1;
    }
    assert!(checked >= 10);
}

#[test]
fn moments_match_enumeration() {
    for seed in 100..125 {
        let inst = common::random_instance(seed, false);
        let n = inst.f.len();
        let m = exact_moments(&inst.chain, &inst.f, &[n]).unwrap().points[0];
        let (mean, var, third) = common::moments(&inst.chain, &inst.f, n);
        assert!((m.mean - mean).abs() <= TOL);
        assert!((m.var - var).abs() <= TOL);
        assert!((m.third - third).abs() <= TOL);
    }
}

#[test]
fn lattice_atoms_match_enumeration() {
    for seed in 200..225 {
        let inst = common::random_instance(seed, true);
        let n = inst.f.len();
        let d = lattice_distribution(&inst.chain, &inst.f, n, Lattice::Integer, 1 << 20).unwrap();
        let want = common::integer_atoms(&inst.chain, &inst.f, n);
        assert!((d.total() - 1.0).abs() <= TOL);
        for (v, p) in &d.atoms {
            let q = want.get(&(v.round() as i64)).copied().unwrap_or(0.0);
            assert!((p - q).abs() <= TOL, "seed {seed} atom {v}");
        }
        let mass: f64 = want.values().sum();
        assert!((mass - 1.0).abs() <= TOL);
    }
}

#[test]
fn reverse_phi_bounded_by_delta_power() {
    for seed in 300..325 {
        let inst = common::random_instance(seed, false);
        let rep = validate_assumptions(&inst.chain).unwrap();
        if !rep.contraction_pass {
            continue;
        }
        for n in 1..=6.min(inst.chain.horizon()) {
            let phi = common::reverse_phi(&inst.chain, n);
            assert!(phi <= rep.delta.powi(n as i32) + 1e-12, "seed {seed} n {n}");
            assert!((phi - reverse_phi_exact(&inst.chain, n).unwrap()).abs() <= 1e-12);
        }
    }
}
