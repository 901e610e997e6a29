mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use pwfit::formulation::CycleInequality;
use pwfit::grid::{EdgeLabeling, GridGraph};
use pwfit::separation::{check_feasibility, cycle_target, find_cycles, separate, CutPool, SearchConfig, SearchMode};

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for e in start..n {
            if n - e < k - cur.len() {
                break;
            }
            cur.push(e);
            go(e + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn brute_chordless(m: usize, n: usize, len: usize) -> BTreeSet<Vec<usize>> {
    let e = common::grid_edges(m, n).len();
    subsets(e, len).into_iter().filter(|s| common::is_chordless_cycle(m, n, s)).collect()
}

fn sorted_edges(cycles: &[pwfit::grid::Cycle]) -> BTreeSet<Vec<usize>> {
    cycles
        .iter()
        .map(|c| {
            let mut e = c.edges.clone();
            e.sort_unstable();
            e
        })
        .collect()
}

#[test]
fn four_cycles_match_brute_force() {
    for (m, n) in [(2, 2), (2, 3), (3, 3), (3, 4)] {
        let g = GridGraph::new(m, n).unwrap();
        let got = g.enumerate_4cycles();
        assert_eq!(got.len(), (m - 1) * (n - 1));
        assert_eq!(sorted_edges(&got), brute_chordless(m, n, 4), "{m}x{n}");
    }
}

#[test]
fn eight_cycles_match_brute_force() {
    for (m, n) in [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4)] {
        let g = GridGraph::new(m, n).unwrap();
        let got = g.enumerate_8cycles();
        assert!(got.iter().all(|c| c.chordless && c.edges.len() == 8));
        assert_eq!(sorted_edges(&got), brute_chordless(m, n, 8), "{m}x{n}");
    }
}

#[test]
fn long_ladder_cycles() {
    // all rungs but the last are active, so the only dormant route around
    // the first rung runs along both rails
    for (n, len) in [(5, 10), (6, 12)] {
        let g = GridGraph::new(2, n).unwrap();
        let mut x = EdgeLabeling::all_dormant(g.num_edges());
        for j in 0..n - 1 {
            x.set(g.col_edge(0, j), true);
        }
        let cycles = find_cycles(&g, &x, g.col_edge(0, 0), &SearchConfig::default()).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].edges.len(), len);
    }
}

fn feasible_3x3() -> Vec<Vec<bool>> {
    let edges = common::grid_edges(3, 3);
    (0u64..1 << edges.len()).map(|m| common::mask_to_bools(m, edges.len())).filter(|a| common::is_multicut(9, &edges, a)).collect()
}

fn holds(cut: &CycleInequality, active: &[bool]) -> bool {
    cut.cycle.iter().filter(|&&e| e != cut.target && active[e]).count() >= active[cut.target] as usize
}

#[test]
fn separation_on_every_infeasible_3x3_labeling() {
    let g = GridGraph::new(3, 3).unwrap();
    let edges = common::grid_edges(3, 3);
    let feasible = feasible_3x3();
    let mut infeasible = 0;
    for mask in 0u64..1 << edges.len() {
        let bits = common::mask_to_bools(mask, edges.len());
        let x = EdgeLabeling::from_bools(bits.clone());
        let expect = common::is_multicut(9, &edges, &bits);
        assert_eq!(check_feasibility(&g, &x).feasible, expect, "{bits:?}");
        if expect {
            continue;
        }
        infeasible += 1;
        for mode in [SearchMode::Plain, SearchMode::FacetDefining] {
            let cfg = SearchConfig { mode, ..SearchConfig::default() };
            let mut pool = CutPool::new();
            let out = separate(&g, &x, &cfg, 1000, &mut pool).unwrap();
            assert!(!out.feasible && !out.new_cuts.is_empty());
            for cut in &out.new_cuts {
                assert!(cut.is_violated_by(&x));
                if mode == SearchMode::FacetDefining {
                    assert!(common::is_chordless_cycle(3, 3, &cut.cycle), "{cut:?}");
                }
                assert!(feasible.iter().all(|a| holds(cut, a)), "{cut:?} cuts off a multicut");
            }
        }
    }
    assert_eq!(feasible.len() + infeasible, 4096);
}

#[test]
fn figure_four_square_is_found() {
    let g = GridGraph::new(3, 5).unwrap();
    let mut x = EdgeLabeling::all_dormant(g.num_edges());
    x.set(g.row_edge(0, 1), true);
    x.set(g.row_edge(1, 2), true);
    x.set(g.row_edge(2, 2), true);
    let out = check_feasibility(&g, &x);
    assert_eq!(out.violated_edges, vec![g.row_edge(0, 1), g.row_edge(1, 2), g.row_edge(2, 2)]);
    let square: BTreeSet<usize> = [g.row_edge(0, 1), g.row_edge(1, 1), g.col_edge(0, 1), g.col_edge(0, 2)].into();
    let cfg = SearchConfig { mode: SearchMode::FacetDefining, ..SearchConfig::default() };
    let cycles = find_cycles(&g, &x, g.row_edge(0, 1), &cfg).unwrap();
    assert!(cycles.iter().any(|c| c.edges.iter().copied().collect::<BTreeSet<_>>() == square));
    assert!(cycles.iter().all(|c| cycle_target(&x, c) == Some(g.row_edge(0, 1))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn components_match_reference(m in 1usize..5, n in 2usize..5, seed in any::<u64>()) {
        let g = GridGraph::new(m, n).unwrap();
        let edges = common::grid_edges(m, n);
        let bits: Vec<bool> = (0..edges.len()).map(|k| (seed.rotate_left(k as u32 * 7) ^ seed >> (k % 13)) & 1 == 1).collect();
        let x = EdgeLabeling::from_bools(bits.clone());
        let got = g.connected_components(&x);
        let want = common::dormant_components(m * n, &edges, &bits);
        for a in 0..m * n {
            for b in 0..m * n {
                prop_assert_eq!(got[a] == got[b], want[a] == want[b]);
            }
        }
        prop_assert_eq!(check_feasibility(&g, &x).feasible, common::is_multicut(m * n, &edges, &bits));
    }

    #[test]
    fn facet_cycles_are_chordless(m in 2usize..6, n in 2usize..7, density in 0.05f64..0.6, seed in any::<u64>()) {
        use rand::Rng;
        let g = GridGraph::new(m, n).unwrap();
        let mut rng = common::rng(seed);
        let x = EdgeLabeling::from_bools((0..g.num_edges()).map(|_| rng.gen::<f64>() < density).collect());
        let cfg = SearchConfig { mode: SearchMode::FacetDefining, ..SearchConfig::default() };
        for &e in &check_feasibility(&g, &x).violated_edges {
            for c in find_cycles(&g, &x, e, &cfg).unwrap() {
                prop_assert!(common::is_chordless_cycle(m, n, &c.edges));
                // chord reduction may hand the cycle to a different active edge
                prop_assert!(cycle_target(&x, &c).is_some());
            }
        }
    }
}
