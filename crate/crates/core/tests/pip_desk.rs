//! Edge and bulk diagnostics of the lattice `p + ip` ground state at desk scale.

mod common;

use std::f64::consts::PI;

use common::*;
use conformal_ruler::crossratio::{
    build_table, circle_embed, complement_check, constant_c_check, decomposition_check,
    decomposition_from_values, verify_embedding, EmbedOptions,
};
use conformal_ruler::lattice::validate_ruler;
use conformal_ruler::ruler::*;

#[test]
fn desk_rulers_are_valid() {
    let l = &desk().lattice;
    for r in [test1_ruler(l), test2_ruler(l), abcd_ruler(l, [0, 1, 2, 3]), abcd_ruler(l, [0, 2, 3, 4])] {
        assert!(validate_ruler(l, &r).all_passed(), "{:?}", validate_ruler(l, &r).failed());
    }
}

#[test]
fn bulk_commutator_gives_half() {
    let d = desk();
    let (a, b, c) = bulk_disk(&d.lattice, 4);
    let j = modular_commutator(&d.backend, &a, &b, &c).unwrap();
    let j_rev = modular_commutator(&d.backend, &c, &b, &a).unwrap();
    assert!((j + j_rev).abs() < 1e-10);
    let c_minus = 3.0 * j / PI;
    assert!((0.45..=0.55).contains(&c_minus), "c_minus = {c_minus}");
}

#[test]
fn bulk_a1_residual_decays_with_ring_width() {
    let d = desk();
    let res: Vec<f64> = (2..=4)
        .map(|ring| {
            let (b, c, dd) = a1_blocks(&d.lattice, 4, ring);
            bulk_a1_residual(&d.backend, &b, &c, &dd).unwrap().delta
        })
        .collect();
    assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
    assert!(res[2] < 1e-2 && res[2] >= -1e-8, "{res:?}");
}

#[test]
fn two_rulers_agree_on_c_and_eta() {
    let d = desk();
    let mut cs = Vec::new();
    for ruler in [test1_ruler(&d.lattice), test2_ruler(&d.lattice)] {
        let rep = run_ruler(&d.backend, &ruler, &RulerOptions::default()).unwrap();
        let eta = rep.eta.unwrap();
        assert!((0.45..=0.55).contains(&rep.c_tot), "{rep:?}");
        assert!((eta - rep.eta_j.unwrap()).abs() < 5e-3, "{rep:?}");
        assert!((eta - rep.eta_k.unwrap()).abs() < 5e-3, "{rep:?}");
        assert!(rep.sigma_at_eta.unwrap() < 0.05, "{rep:?}");
        assert!(!rep.nonchiral);
        cs.push(rep.c_tot);
    }
    assert!((cs[0] - cs[1]).abs() < 0.02, "{cs:?}");
}

#[test]
fn sigma_squared_is_quadratic_with_interior_minimum() {
    let d = desk();
    let ruler = test2_ruler(&d.lattice);
    let ek = find_eta_k(&d.backend, &ruler, &EtaKOptions::default()).unwrap();
    assert!(ek.fit_residual < 1e-8, "{}", ek.fit_residual);
    assert!(!ek.flat);
    let v = ek.vertex.unwrap();
    assert!(v > 0.0 && v < 1.0);
    assert!((v - ek.eta_k).abs() < 1e-6, "vertex {v} vs eta_K {}", ek.eta_k);
}

#[test]
fn edge_and_bulk_chirality_agree() {
    let d = desk();
    // Edge intervals run right to left so the edge shares the bulk disk's orientation.
    let ej = eta_j_pair(&d.backend, &test2_ruler(&d.lattice).reversed()).unwrap();
    let (a, b, c) = bulk_disk(&d.lattice, 4);
    let j_bulk = modular_commutator(&d.backend, &a, &b, &c).unwrap();
    assert!(((ej.j_outer - ej.j_inner) - j_bulk).abs() < 5e-3 * PI / 3.0, "{ej:?} vs {j_bulk}");
    assert!(ej.c_minus > 0.45);
}

#[test]
fn genericity_holds_on_the_edge() {
    let d = desk();
    let r1 = abcd_ruler(&d.lattice, [0, 1, 2, 3]);
    let r2 = abcd_ruler(&d.lattice, [1, 2, 3, 4]);
    let e1 = run_ruler(&d.backend, &r1, &RulerOptions::default()).unwrap();
    let e2 = run_ruler(&d.backend, &r2, &RulerOptions::default()).unwrap();
    let g = genericity_gram(
        &d.backend,
        &r1,
        &r2,
        e1.c_minus.unwrap(),
        e1.eta.unwrap(),
        e2.eta.unwrap(),
    )
    .unwrap();
    assert!(g.gram_det > 1e-4, "{g:?}");
    assert!((g.commutator - g.predicted).abs() < 0.1 * g.predicted.abs(), "{g:?}");
}

#[test]
fn bottom_edge_decomposition_relations() {
    let d = desk();
    let eta = |e: [usize; 4]| {
        let ruler = abcd_ruler(&d.lattice, e);
        let ent = entropy_combinations(&d.backend, &ruler, TOL_SSA).unwrap();
        solve_c_eta(ent.delta, ent.i).unwrap().eta.unwrap()
    };
    let rep = decomposition_from_values(
        eta([0, 1, 2, 3]),
        eta([1, 2, 3, 4]),
        [eta([0, 2, 3, 4]), eta([0, 1, 2, 4]), eta([0, 1, 3, 4])],
    )
    .unwrap();
    assert!(rep.max_dev < 1e-3, "{rep:?}");
}

#[test]
fn deformations_change_little() {
    let d = desk();
    let ruler = test2_ruler(&d.lattice);
    let (b, c, dd) = a1_blocks(&d.lattice, 4, 4);
    let a1 = bulk_a1_residual(&d.backend, &b, &c, &dd).unwrap().delta;
    for (name, mv) in deformation_moves(&d.lattice) {
        let r = deformation_residual(&d.backend, &d.lattice, &ruler, &mv).unwrap();
        let worst = r.d_delta.max(r.d_i);
        assert!(worst < 5e-3 && worst < 5.0 * a1, "{name}: {r:?} (A1 {a1:e})");
    }
}

#[test]
fn frame_table_is_a_cross_ratio_table() {
    let d = desk();
    let part = frame_partition(&d.lattice);
    let table = build_table(&d.backend, &part, &part.all_triples(), TOL_SSA).unwrap();
    let spread = constant_c_check(&table);
    assert!((spread.min - 0.5).abs() < 0.02 && (spread.max - 0.5).abs() < 0.02, "{spread:?}");
    let n = part.n_endpoints();
    for i in 0..n {
        let e: Vec<usize> = (0..5).map(|k| (i + k) % n).collect();
        let comp = complement_check(&table, [e[0], e[1], e[2], e[3]]).unwrap();
        assert!(comp.max_eta_dev < 1e-3, "{comp:?}");
        let dec = decomposition_check(&table, [e[0], e[1], e[2], e[3], e[4]]).unwrap();
        assert!(dec.max_dev < 1e-3, "{dec:?}");
    }
    let opts = EmbedOptions {
        closure_tol: 1e-2,
        ..EmbedOptions::default()
    };
    let emb = circle_embed(&table, &opts).unwrap();
    assert!(verify_embedding(&table, &emb) < 1e-2);
    // The default closure tolerance is for exact tables and rejects this one.
    assert!(circle_embed(&table, &EmbedOptions::default()).is_err());
}
