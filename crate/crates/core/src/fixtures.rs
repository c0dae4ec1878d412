//! Bundled codebooks, graphs and the worked 6x4 detection example.
//!
//! `table1` and `table2` are the published 6x4 designs. The 8x4 and 9x6
//! systems have no published codebooks; the bundled ones are regular
//! constructions built from the same scaled layers (see [`construct_8x4`] and
//! [`construct_9x6`]) and are not reference data.

use num_complex::Complex64;

use crate::channel::{n0_from_ebn0, NoiseSample};
use crate::codebook::CodebookSet;
use crate::design::{assemble_codebooks, paired_indicator, rotate, UserConstellation};
use crate::factor_graph::FactorGraph;

pub const TABLE1_TEXT: &str = include_str!("../fixtures/table1.cbk");
pub const TABLE2_TEXT: &str = include_str!("../fixtures/table2.cbk");
pub const SCMA_8X4_TEXT: &str = include_str!("../fixtures/scma_8x4.cbk");
pub const SCMA_9X6_TEXT: &str = include_str!("../fixtures/scma_9x6.cbk");

/// Unscaled designed 6x4 codebooks.
pub fn table1() -> CodebookSet {
    CodebookSet::parse(TABLE1_TEXT).expect("bundled table1 parses")
}

/// Scaled 6x4 codebooks of the worked detection example.
pub fn table2() -> CodebookSet {
    CodebookSet::parse(TABLE2_TEXT).expect("bundled table2 parses")
}

pub fn scma_8x4() -> CodebookSet {
    CodebookSet::parse(SCMA_8X4_TEXT).expect("bundled 8x4 parses")
}

pub fn scma_9x6() -> CodebookSet {
    CodebookSet::parse(SCMA_9X6_TEXT).expect("bundled 9x6 parses")
}

pub const F_6X4: [[u8; 6]; 4] = [
    [1, 0, 1, 0, 1, 0],
    [0, 1, 1, 0, 0, 1],
    [1, 0, 0, 1, 0, 1],
    [0, 1, 0, 1, 1, 0],
];

/// All six resource pairs plus {1,2} and {3,4} again; `d_f = 4`.
pub const F_8X4: [[u8; 8]; 4] = [
    [1, 1, 1, 0, 0, 0, 1, 0],
    [1, 0, 0, 1, 1, 0, 1, 0],
    [0, 1, 0, 1, 0, 1, 0, 1],
    [0, 0, 1, 0, 1, 1, 0, 1],
];

/// User `(a, b)` occupies resource `a` in 1..=3 and resource `b` in 4..=6; `d_f = 3`.
pub const F_9X6: [[u8; 9]; 6] = [
    [1, 1, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 1, 1, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 1, 1],
    [1, 0, 0, 1, 0, 0, 1, 0, 0],
    [0, 1, 0, 0, 1, 0, 0, 1, 0],
    [0, 0, 1, 0, 0, 1, 0, 0, 1],
];

fn graph<const J: usize>(f: &[[u8; J]]) -> FactorGraph {
    let rows: Vec<Vec<u8>> = f.iter().map(|r| r.to_vec()).collect();
    FactorGraph::from_matrix(&rows).expect("bundled graph is valid")
}

pub fn graph_6x4() -> FactorGraph {
    graph(&F_6X4)
}

pub fn graph_8x4() -> FactorGraph {
    graph(&F_8X4)
}

pub fn graph_9x6() -> FactorGraph {
    graph(&F_9X6)
}

/// The three layers of the scaled 6x4 tables.
pub fn table2_layers() -> [UserConstellation; 3] {
    let c = Complex64::new;
    [
        UserConstellation::new(
            1,
            vec![c(-1.2078, 0.0), c(-0.4022, 0.0), c(0.4022, 0.0), c(1.2078, 0.0)],
        ),
        UserConstellation::new(
            2,
            vec![
                c(-0.1339, -0.3623),
                c(0.7247, 1.2078),
                c(-0.7247, -1.2078),
                c(0.1339, 0.3623),
            ],
        ),
        UserConstellation::new(
            3,
            vec![
                c(0.3623, -0.3623),
                c(-0.7247, 1.2078),
                c(0.7247, -1.2078),
                c(-0.3623, 0.3623),
            ],
        ),
    ]
}

/// 8x4 construction: four layers, the scaled PAM layer rotated by 0, 45, 90
/// and 135 degrees (rounded to 4 decimals), placed so each resource carries
/// all four. Each user's second layer is reordered by
/// [`best_pairing`](crate::design::best_pairing).
pub fn construct_8x4() -> CodebookSet {
    let [u1, _, _] = table2_layers();
    let layers: Vec<UserConstellation> = (0..4)
        .map(|i| rotate(&u1, (45.0 * i as f64).to_radians()).rounded(4).with_label(i + 1))
        .collect();
    let labels = [
        vec![1, 2, 3, 0, 0, 0, 4, 0],
        vec![2, 0, 0, 1, 4, 0, 3, 0],
        vec![0, 1, 0, 2, 0, 3, 0, 4],
        vec![0, 0, 4, 0, 3, 1, 0, 2],
    ];
    let ind = paired_indicator(&labels, &layers).expect("valid indicator");
    assemble_codebooks(&layers, &ind).expect("valid construction")
}

/// 9x6 construction: the three scaled 6x4 layers on the graph [`F_9X6`],
/// user `(a, b)` taking layer `(a + b) mod 3` on `a` and `(a + b + 2) mod 3` on `b`,
/// the second reordered by [`best_pairing`](crate::design::best_pairing).
pub fn construct_9x6() -> CodebookSet {
    let mut labels = vec![vec![0usize; 9]; 6];
    for a in 0..3 {
        for b in 0..3 {
            let user = 3 * a + b;
            labels[a][user] = (a + b) % 3 + 1;
            labels[3 + b][user] = (a + b + 2) % 3 + 1;
        }
    }
    let layers = table2_layers();
    let ind = paired_indicator(&labels, &layers).expect("valid indicator");
    assemble_codebooks(&layers, &ind).expect("valid construction")
}

/// Data symbols of the worked example, 0-based (printed as 2, 2, 1, 1, 3, 4).
pub const EXAMPLE_SYMBOLS: [usize; 6] = [1, 1, 0, 0, 2, 3];

/// Noise vector of the worked example.
pub fn example_noise() -> NoiseSample {
    let c = Complex64::new;
    NoiseSample(vec![
        c(0.0018, -1.2008),
        c(1.2143, 0.4227),
        c(0.3323, 0.4232),
        c(0.1488, -0.6993),
    ])
}

/// Received vector of the worked example, as printed.
pub fn example_received() -> Vec<Complex64> {
    let c = Complex64::new;
    vec![
        c(-0.4004, -3.6164),
        c(3.5091, 1.2681),
        c(-0.5132, 1.9933),
        c(0.2428, -0.6993),
    ]
}

/// `N0` at 3 dB.
pub fn example_n0() -> f64 {
    n0_from_ebn0(3.0)
}
