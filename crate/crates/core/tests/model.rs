mod common;

use proptest::prelude::*;
use pwfit::formulation::{build_1d_model, build_2d_model, compute_lambda, GridInstance, Params};
use pwfit::grid::EdgeLabeling;
use pwfit::heuristic::{region_fusion, Schedule};
use pwfit::io::{generate_synthetic, Generator};
use pwfit::separation::{check_feasibility, cutting_plane_solve, Variant, WarmStart};
use pwfit::solver::{backend_from_env, evaluate_labeling, load_model, SolveLimits, SolveStatus};

fn limits() -> SolveLimits {
    SolveLimits::new(60.0, 0.0).unwrap()
}

fn chain(y: &[f64], lambda: f64) -> (GridInstance, Params) {
    let inst = GridInstance::chain(y.to_vec()).unwrap();
    let p = Params::uniform(inst.graph(), lambda).unwrap();
    (inst, p)
}

#[test]
fn collinear_chain_costs_nothing() {
    let (inst, p) = chain(&[0.0, 0.25, 0.5, 0.75], 0.3);
    let s = cutting_plane_solve(&inst, &p, &Variant::Mp.config(), &limits()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    assert!(s.objective.abs() < 1e-9);
    assert_eq!(s.x.count_active(), 0);
    assert!(s.w.iter().zip(inst.values()).all(|(a, b)| (a - b).abs() < 1e-9));
    assert_eq!(s.separation_rounds(), 0);
}

#[test]
fn step_between_two_lines() {
    let y = [0.0, 1.0, 2.0, 10.0, 11.0, 12.0].map(|v| v / 12.0);
    let lambda = 0.01;
    let (inst, p) = chain(&y, lambda);
    let s = cutting_plane_solve(&inst, &p, &Variant::Mp.config(), &limits()).unwrap();
    assert!((s.objective - lambda).abs() < 1e-7);
    assert_eq!(s.x.active_edges().collect::<Vec<_>>(), vec![2]);
    assert!((common::chain_optimum(&y, lambda) - lambda).abs() < 1e-12);
}

#[test]
fn outlier_is_cut_out_on_both_sides() {
    let mut y: Vec<f64> = (0..9).map(|i| 0.05 * i as f64).collect();
    y[4] = 0.95;
    let (inst, p) = chain(&y, 0.05);
    let s = cutting_plane_solve(&inst, &p, &Variant::Mp.config(), &limits()).unwrap();
    assert!(s.x.is_active(3) && s.x.is_active(4));
    assert_eq!(s.x.count_active(), 2);
    let segments = s.x.count_active() + 1;
    assert_eq!(segments, 3);
}

#[test]
fn constant_image_is_one_segment() {
    let inst = GridInstance::new(4, 5, vec![0.4; 20]).unwrap();
    let p = Params::uniform(inst.graph(), 0.2).unwrap();
    for v in [Variant::Mp, Variant::Mph4] {
        let s = cutting_plane_solve(&inst, &p, &v.config(), &limits()).unwrap();
        assert_eq!(s.x.count_active(), 0);
        assert!(s.objective.abs() < 1e-9);
    }
}

#[test]
fn figure_four_needs_cuts() {
    let row = [4.0, 3.0, 2.0, 3.0, 4.0].map(|v| v / 4.0);
    let inst = GridInstance::new(3, 5, row.repeat(3)).unwrap();
    let g = *inst.graph();
    let p = Params::uniform(&g, 0.1).unwrap();
    let mut witness = EdgeLabeling::all_dormant(g.num_edges());
    witness.set(g.row_edge(0, 1), true);
    witness.set(g.row_edge(1, 2), true);
    witness.set(g.row_edge(2, 2), true);

    let backend = backend_from_env().unwrap();
    let model = build_2d_model(&inst, &p, &[]).unwrap();
    let mut h = load_model(backend.as_ref(), &model).unwrap();
    let relaxed = h.solve(&limits()).unwrap();
    let value = evaluate_labeling(backend.as_ref(), &model, &witness).unwrap().objective;
    assert!((value - relaxed.objective).abs() < 1e-7);
    assert!(!check_feasibility(&g, &witness).feasible);

    let mut cfg = Variant::Mp.config();
    cfg.warm_start = WarmStart::Labeling(witness);
    let s = cutting_plane_solve(&inst, &p, &cfg, &limits()).unwrap();
    assert!(s.separation_rounds() >= 1);
    assert!(check_feasibility(&g, &s.x).feasible);
    assert!((s.objective - value).abs() < 1e-7);
}

#[test]
fn all_active_warm_start_is_accepted() {
    let data = generate_synthetic(&Generator::Stripes.spec(6, 8, 0.0, 1)).unwrap();
    let p = compute_lambda(&data.instance, 0.5).unwrap();
    let mut cfg = Variant::Mp.config();
    cfg.warm_start = WarmStart::Labeling(EdgeLabeling::all_active(data.instance.graph().num_edges()));
    let s = cutting_plane_solve(&data.instance, &p, &cfg, &limits()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    let reg: f64 = (0..data.instance.graph().num_edges()).map(|e| p.edge_weight(data.instance.graph(), e)).sum();
    assert!((s.heuristic_objective.unwrap() - reg).abs() < 1e-7);
    assert!(s.first_incumbent.unwrap() <= reg + 1e-7);
}

#[test]
fn heuristic_start_bounds_first_incumbent() {
    let data = generate_synthetic(&Generator::Stripes.spec(10, 12, 0.0, 3)).unwrap();
    let p = compute_lambda(&data.instance, 0.5).unwrap();
    let (_, x0) = region_fusion(&data.instance, &p, &Schedule::default()).unwrap();
    let backend = backend_from_env().unwrap();
    let model = build_2d_model(&data.instance, &p, &[]).unwrap();
    let lp = evaluate_labeling(backend.as_ref(), &model, &x0).unwrap().objective;
    let s = cutting_plane_solve(&data.instance, &p, &Variant::Mph.config(), &limits()).unwrap();
    assert!((s.heuristic_objective.unwrap() - lp).abs() < 1e-7);
    assert!(s.first_incumbent.unwrap() <= lp + 1e-7);
    assert!(s.objective <= lp + 1e-7);
}

#[test]
fn tiny_limit_does_not_crash() {
    let data = generate_synthetic(&Generator::Diagonals.spec(30, 40, 0.005, 9)).unwrap();
    let p = compute_lambda(&data.instance, 0.5).unwrap();
    for v in [Variant::Mp, Variant::Mph] {
        let s = cutting_plane_solve(&data.instance, &p, &v.config(), &SolveLimits::new(0.05, 0.0).unwrap()).unwrap();
        assert!(matches!(s.status, SolveStatus::NoSolution | SolveStatus::FeasibleLimit | SolveStatus::Optimal), "{}", s.status);
        if s.has_incumbent() {
            assert!(check_feasibility(data.instance.graph(), &s.x).feasible);
        }
    }
}

#[test]
fn one_d_model_counts() {
    let (inst, p) = chain(&[0.1, 0.5, 0.2, 0.9], 0.1);
    let st = build_1d_model(&inst, &p).unwrap().statistics();
    assert_eq!(st.binaries, 3);
    assert_eq!(st.second_derivative_pairs(), 2);
}

#[test]
fn labeling_values_match_reference_lp() {
    let backend = backend_from_env().unwrap();
    let mut rng = common::rng(5);
    for (m, n) in [(2, 3), (3, 3), (3, 4), (1, 6)] {
        let y = common::uniform_vec(&mut rng, m * n);
        let inst = GridInstance::new(m, n, y.clone()).unwrap();
        let p = compute_lambda(&inst, 1.0).unwrap();
        let model = build_2d_model(&inst, &p, &[]).unwrap();
        let e = inst.graph().num_edges();
        for mask in (0u64..1 << e).step_by(((1u64 << e) / 64).max(1) as usize) {
            let bits = common::mask_to_bools(mask, e);
            let got = evaluate_labeling(backend.as_ref(), &model, &EdgeLabeling::from_bools(bits.clone())).unwrap().objective;
            let reg: f64 = (0..e).filter(|&k| bits[k]).map(|k| p.edge_weight(inst.graph(), k)).sum();
            let want = reg + common::labeling_fit_lp(m, n, &y, &bits);
            assert!((got - want).abs() < 1e-7, "{m}x{n} mask {mask:b}: {got} vs {want}");
        }
    }
}

#[test]
fn two_by_three_matches_enumeration() {
    let mut rng = common::rng(8);
    for _ in 0..10 {
        let y = common::uniform_vec(&mut rng, 6);
        let inst = GridInstance::new(2, 3, y.clone()).unwrap();
        let p = Params::uniform(inst.graph(), 0.05).unwrap();
        let weights: Vec<f64> = (0..7).map(|e| p.edge_weight(inst.graph(), e)).collect();
        let oracle = common::grid_oracle(2, 3, &y, &weights);
        let s = cutting_plane_solve(&inst, &p, &Variant::Mph4F.config(), &limits()).unwrap();
        assert!((s.objective - oracle.optimum).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // scaling y and lambda together scales the optimum
    #[test]
    fn objective_scales_with_data(y in prop::collection::vec(0.0f64..1.0, 3..7), lambda in 0.01f64..0.5, c in 0.1f64..1.0) {
        let (a, pa) = chain(&y, lambda);
        let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
        let (b, pb) = chain(&scaled, lambda * c);
        let sa = cutting_plane_solve(&a, &pa, &Variant::Mp.config(), &limits()).unwrap();
        let sb = cutting_plane_solve(&b, &pb, &Variant::Mp.config(), &limits()).unwrap();
        prop_assert!((sb.objective - c * sa.objective).abs() < 1e-5);
        let lb = compute_lambda(&b, 0.5).unwrap();
        let la = compute_lambda(&a, 0.5).unwrap();
        prop_assert!((lb.lambda_row[0] - c * la.lambda_row[0]).abs() < 1e-12);
    }
}
