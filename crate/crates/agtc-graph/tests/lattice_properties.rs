//! Structural properties of the lattice construction.

use agtc_graph::{build_adjacency, montages::BCICIV2A_22, montages::EEGMMIDB_64, parse_label};
use proptest::prelude::*;

/// Permuting the label order permutes rows/columns of A identically.
fn permutation_consistent(labels: &[&str], perm: &[usize]) {
    let base = build_adjacency(labels).unwrap();
    let shuffled: Vec<&str> = perm.iter().map(|&i| labels[i]).collect();
    let permuted = build_adjacency(&shuffled).unwrap();
    for (pi, &i) in perm.iter().enumerate() {
        for (pj, &j) in perm.iter().enumerate() {
            assert_eq!(
                base.has_edge(i, j),
                permuted.has_edge(pi, pj),
                "edge ({i},{j}) not preserved under permutation"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn permuting_labels_permutes_adjacency(seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..BCICIV2A_22.len()).collect();
        let mut state = seed;
        for i in (1..perm.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            perm.swap(i, j);
        }
        permutation_consistent(&BCICIV2A_22, &perm);
    }
}

#[test]
fn every_edge_shares_row_or_column() {
    for labels in [&BCICIV2A_22[..], &EEGMMIDB_64[..]] {
        let g = build_adjacency(labels).unwrap();
        for (i, j) in g.edges() {
            let a = parse_label(&g.labels()[i].raw).unwrap();
            let b = parse_label(&g.labels()[j].raw).unwrap();
            assert!(
                a.row == b.row || a.lateral_index == b.lateral_index,
                "edge {}-{} shares neither row nor column",
                a.raw,
                b.raw
            );
        }
    }
}

#[test]
fn holes_only_remove_incident_edges() {
    // full 3x3 lattice has 12 edges; removing the center keeps 8 of the
    // remaining nodes' edges and rewires nothing else (consecutive rule
    // bridges across the hole: C1-C2 and Fz-Pz become consecutive)
    let full = ["F1", "Fz", "F2", "C1", "Cz", "C2", "P1", "Pz", "P2"];
    let holed = ["F1", "Fz", "F2", "C1", "C2", "P1", "Pz", "P2"];
    let g_full = build_adjacency(&full).unwrap();
    let g_holed = build_adjacency(&holed).unwrap();
    assert_eq!(g_full.edges().len(), 12);
    // 12 - 4 incident + 2 bridges
    assert_eq!(g_holed.edges().len(), 10);
}
