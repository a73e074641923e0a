//! The exact CFT circle: every table identity holds to roundoff, and the
//! embedding recovers the endpoints up to a circle-preserving Mobius map.

use std::f64::consts::TAU;

use conformal_ruler::cftmodel::{casini_huerta_estimate, CftBackend, CftCircle};
use conformal_ruler::crossratio::{
    build_table, circle_embed, complement_check, constant_c_check, decomposition_check,
    geometric_cross_ratio, mobius_circle, unwrap_angles, verify_embedding, EdgePartition,
    EmbedOptions, EtaTable,
};
use conformal_ruler::ruler::TOL_SSA;
use itertools::Itertools;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sorted angles in `[0, 2 pi)` with gaps of at least `0.2 (2 pi / n)`.
fn random_circle(rng: &mut ChaCha8Rng, n: usize) -> CftCircle {
    let gaps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = gaps.iter().sum();
    let start = rng.gen_range(0.0..TAU / n as f64);
    let angles = gaps
        .iter()
        .scan(start, |t, g| {
            let out = *t;
            *t += TAU * g / total;
            Some(out)
        })
        .collect();
    let c = rng.gen_range(0.25..4.0);
    let eps = 10f64.powf(rng.gen_range(-4.0..-1.0));
    CftCircle::new(c, eps, angles).unwrap()
}

fn table_of(model: &CftCircle) -> EtaTable {
    let part = EdgePartition::circle(model.n_arcs());
    let backend = CftBackend { model: model.clone() };
    build_table(&backend, &part, &part.all_triples(), TOL_SSA).unwrap()
}

#[test]
fn table_matches_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [8, 11, 16] {
        let model = random_circle(&mut rng, n);
        let table = table_of(&model);
        for k in table.keys() {
            let e = table.get(&k).unwrap();
            assert!((e.c_tot - model.c).abs() < 1e-12, "{k:?}: {}", e.c_tot);
            let eta_g = geometric_cross_ratio(&model.angles, &k);
            assert!((e.eta.unwrap() - eta_g).abs() < 1e-12, "{k:?}");
        }
        assert!(constant_c_check(&table).spread < 1e-12);
    }
}

#[test]
fn all_identities_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = random_circle(&mut rng, 10);
    let table = table_of(&model);
    for e in (0..10).combinations(4) {
        let r = complement_check(&table, [e[0], e[1], e[2], e[3]]).unwrap();
        assert!(r.max_eta_dev < 1e-9 && r.max_c_dev < 1e-9, "{e:?}: {r:?}");
    }
    for e in (0..10).combinations(5) {
        let r = decomposition_check(&table, [e[0], e[1], e[2], e[3], e[4]]).unwrap();
        assert!(r.max_dev < 1e-9, "{e:?}: {r:?}");
    }
}

#[test]
fn embedding_is_unique_up_to_mobius() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = random_circle(&mut rng, 12);
    let table = table_of(&model);
    let gauges = [
        EmbedOptions::default(),
        EmbedOptions {
            anchors: [-1.0, 0.3, 2.0],
            ..EmbedOptions::default()
        },
    ];
    let embs: Vec<_> = gauges.iter().map(|g| circle_embed(&table, g).unwrap()).collect();
    for emb in &embs {
        assert!(verify_embedding(&table, emb) < 1e-10);
    }
    // A Mobius image of the true endpoints gives the same table.
    let moved: Vec<f64> = model
        .angles
        .iter()
        .map(|&t| mobius_circle(t, Complex64::new(1.2, 0.3), Complex64::new(0.4, -0.5)))
        .collect();
    let image = CftCircle::new(model.c, model.epsilon, unwrap_angles(&moved)).unwrap();
    let moved_table = table_of(&image);
    for k in table.keys() {
        let (a, b) = (table.eta(&k).unwrap(), moved_table.eta(&k).unwrap());
        assert!((a - b).abs() < 1e-10, "{k:?}: {a} vs {b}");
    }
}

#[test]
fn casini_huerta_limit() {
    for c in [1.0, 2.0] {
        let s = |r: f64| c / 6.0 * r.ln();
        for dr in [1e-2, 1e-3, 1e-4] {
            let est = casini_huerta_estimate(s, 1.0, dr).unwrap();
            assert!((est - c).abs() < 10.0 * dr, "c = {c}, dr = {dr}: {est}");
        }
    }
    assert!(casini_huerta_estimate(|r| r, 1.0, 2.0).is_err());
}
