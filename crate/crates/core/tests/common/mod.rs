//! Desk-scale `p + ip` fixture shared by the integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use conformal_ruler::crossratio::EdgePartition;
use conformal_ruler::gaussian::{pip_ground_state, GaussianBackend, PipParams};
use conformal_ruler::lattice::{BulkMove, ConformalRuler, Lattice, MoveKind, Region, RulerPart};

pub const WIDTH: usize = 24;
pub const HEIGHT: usize = 16;
/// Thickness of edge strips; about three correlation lengths at `mu = 1.3`.
pub const DEPTH: usize = 4;
/// Frame thickness for the full-boundary cross-ratio table.
pub const FRAME_DEPTH: usize = 3;
pub const FRAME_ARCS: usize = 8;

pub struct Desk {
    pub lattice: Lattice,
    pub backend: GaussianBackend,
}

pub fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let lattice = Lattice::new(WIDTH, HEIGHT).unwrap();
        let cov = pip_ground_state(&lattice, &PipParams::default()).unwrap();
        Desk {
            lattice,
            backend: GaussianBackend::new(cov),
        }
    })
}

/// `(A, D, B, C, {})` on the bottom edge; `D` covers `A`, `B` and two columns of `C`.
pub fn test1_ruler(l: &Lattice) -> ConformalRuler {
    let d = DEPTH;
    ConformalRuler::new(
        l.rect(3, 9, 0, d).unwrap(),
        l.rect(3, 17, d, 2 * d).unwrap(),
        l.rect(9, 15, 0, d).unwrap(),
        l.rect(15, 19, 0, d).unwrap(),
        Region::empty(),
    )
    .with_labels(["a1", "b1", "c1"])
}

/// `(A, A', B, C, C')` on the bottom edge; `A'` and `C'` meet above the middle of `B`.
pub fn test2_ruler(l: &Lattice) -> ConformalRuler {
    let d = DEPTH;
    ConformalRuler::new(
        l.rect(4, 9, 0, d).unwrap(),
        l.rect(4, 11, d, 2 * d).unwrap(),
        l.rect(9, 13, 0, d).unwrap(),
        l.rect(13, 18, 0, d).unwrap(),
        l.rect(11, 18, d, 2 * d).unwrap(),
    )
    .with_labels(["a2", "b2", "c2"])
}

/// Bottom-edge ruler on the four width-5 intervals `a, b, c, d` starting at
/// `x = 2`. Endpoint `e` sits at `x = 2 + 5 e`; the ruler takes `A = (e0, e1)`,
/// `B = (e1, e2)`, `C = (e2, e3)`, with `A'` and `C'` meeting above the middle of `B`.
pub fn abcd_ruler(l: &Lattice, e: [usize; 4]) -> ConformalRuler {
    let (d, w, x0) = (DEPTH, 5, 2);
    let x = |k: usize| x0 + k * w;
    let strip = |i: usize, j: usize| l.rect(x(i), x(j), 0, d).unwrap();
    let mid = (x(e[1]) + x(e[2])) / 2;
    ConformalRuler::new(
        strip(e[0], e[1]),
        l.rect(x(0), mid, d, 2 * d).unwrap(),
        strip(e[1], e[2]),
        strip(e[2], e[3]),
        l.rect(mid, x(4), d, 2 * d).unwrap(),
    )
}

/// Bulk disk of radius `r` split into `A` (upper half), `B` (lower right) and
/// `C` (lower left): clockwise with `y` pointing up.
pub fn bulk_disk(l: &Lattice, r: usize) -> (Region, Region, Region) {
    let (cx, cy) = (WIDTH / 2, HEIGHT / 2);
    (
        l.rect(cx - r, cx + r, cy, cy + r).unwrap(),
        l.rect(cx, cx + r, cy - r, cy).unwrap(),
        l.rect(cx - r, cx, cy - r, cy).unwrap(),
    )
}

/// `(B, C, D)`: `C` a `side x side` block at the centre, `B` and `D` the upper
/// and lower halves of the surrounding ring of width `ring`.
pub fn a1_blocks(l: &Lattice, side: usize, ring: usize) -> (Region, Region, Region) {
    let (cx, cy) = (WIDTH / 2, HEIGHT / 2);
    let h = side / 2;
    let c = l.rect(cx - h, cx - h + side, cy - h, cy - h + side).unwrap();
    let outer = l
        .rect(cx - h - ring, cx - h + side + ring, cy - h - ring, cy - h + side + ring)
        .unwrap()
        .difference(&c);
    let upper = l.rect(0, WIDTH, cy, HEIGHT).unwrap();
    (outer.intersection(&upper), c, outer.difference(&upper))
}

/// Frame partition cut at `FRAME_ARCS` roughly equal boundary positions.
pub fn frame_partition(l: &Lattice) -> EdgePartition {
    let p = l.perimeter();
    let cuts: Vec<usize> = (0..FRAME_ARCS).map(|k| k * p / FRAME_ARCS + 3).collect();
    EdgePartition::lattice_frame(l, FRAME_DEPTH, &cuts).unwrap()
}

/// One move of each class on [`test2_ruler`].
pub fn deformation_moves(l: &Lattice) -> Vec<(&'static str, BulkMove)> {
    let d = DEPTH;
    let site = |x, y| Region::new(vec![l.index(x, y)]);
    vec![
        (
            "transfer A' -> C'",
            BulkMove {
                kind: MoveKind::Transfer {
                    from: RulerPart::APrime,
                    to: RulerPart::CPrime,
                },
                moved: site(10, 2 * d - 1),
            },
        ),
        (
            "transfer A -> A'",
            BulkMove {
                kind: MoveKind::Transfer {
                    from: RulerPart::A,
                    to: RulerPart::APrime,
                },
                moved: site(5, d - 1),
            },
        ),
        (
            "grow A'",
            BulkMove {
                kind: MoveKind::Grow {
                    target: RulerPart::APrime,
                },
                moved: l.rect(4, 11, 2 * d, 2 * d + 1).unwrap(),
            },
        ),
        (
            "shrink C'",
            BulkMove {
                kind: MoveKind::Shrink {
                    source: RulerPart::CPrime,
                },
                moved: site(17, 2 * d - 1),
            },
        ),
        (
            "shrink C",
            BulkMove {
                kind: MoveKind::Shrink {
                    source: RulerPart::C,
                },
                moved: site(17, d - 1),
            },
        ),
    ]
}
