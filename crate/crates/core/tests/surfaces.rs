use regime_stop::gsurface::{g_constant_direct, g_mc, g_surface};
use regime_stop::vsurface::{v_mc_step, v_surface, Solver};
use regime_stop::{QuadratureSpec, RegimeModel, SolverGrid};

fn constant_case() -> RegimeModel {
    RegimeModel::constant(0.2, 0.5, 1.0).unwrap()
}

fn two_state() -> RegimeModel {
    RegimeModel::new(vec![0.2, -0.2], vec![0.5, 0.3], vec![vec![-2.5, 2.5], vec![2.0, -2.0]], 0.5).unwrap()
}

fn sup_error_at(model: &RegimeModel, n: usize, k_frac: f64) -> f64 {
    let spec = QuadratureSpec::default();
    let grid = SolverGrid::for_model(model, n, 200).unwrap();
    let g = g_surface(model, &grid, &spec).unwrap();
    let k = (k_frac * n as f64).round() as usize;
    let (mu, sigma) = (model.mu()[0], model.sigma()[0]);
    let lambda = mu / sigma - sigma / 2.0;
    (0..grid.a_points())
        .map(|i| {
            let exact = g_constant_direct(lambda, sigma, grid.time(k), grid.a_node(i), model.horizon(), &spec).unwrap();
            (g.value(k, 0, i) - exact).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn constant_g_matches_direct_integral() {
    let m = constant_case();
    for n in [25, 50] {
        assert!(sup_error_at(&m, n, 0.0) < 5e-3);
        assert!(sup_error_at(&m, n, 0.5) < 5e-3);
    }
}

fn sup_change(a: &regime_stop::GSurface, b: &regime_stop::GSurface) -> f64 {
    (0..a.num_states())
        .flat_map(|j| (0..a.grid().a_points()).map(move |i| (j, i)))
        .map(|(j, i)| (a.value(0, j, i) - b.value(0, j, i)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn two_state_g_converges_in_n() {
    let m = two_state();
    let spec = QuadratureSpec::default();
    let g: Vec<_> = [25, 50, 100]
        .iter()
        .map(|&n| g_surface(&m, &SolverGrid::for_model(&m, n, 200).unwrap(), &spec).unwrap())
        .collect();
    let (d1, d2) = (sup_change(&g[0], &g[1]), sup_change(&g[1], &g[2]));
    assert!(d2 <= 0.5 * d1, "{d2} vs {d1}");
}

#[test]
fn direct_integral_matches_monte_carlo() {
    let m = constant_case();
    let spec = QuadratureSpec::default();
    for &(t, a) in &[(0.0, 1.0), (0.4, 1.3), (0.9, 2.0)] {
        let exact = g_constant_direct(0.15, 0.5, t, a, 1.0, &spec).unwrap();
        let e = g_mc(&m, t, a, 0, 100_000, 1, 3).unwrap();
        assert!((e.mean - exact).abs() < 4.0 * e.se + 1e-5, "t={t} a={a}: {exact} vs {e:?}");
    }
}

#[test]
fn two_state_g_matches_monte_carlo() {
    let m = two_state();
    let grid = SolverGrid::for_model(&m, 100, 200).unwrap();
    let g = g_surface(&m, &grid, &QuadratureSpec::default()).unwrap();
    for j in 0..2 {
        for &(k, a) in &[(0usize, 1.0), (40, 1.25)] {
            let solver = g.at(k, j, a).unwrap();
            let e = g_mc(&m, grid.time(k), a, j, 100_000, 4, 17 + j as u64).unwrap();
            assert!((solver - e.mean).abs() < 4.0 * e.se + 1e-3, "k={k} j={j}: {solver} vs {e:?}");
        }
    }
}

#[test]
fn continuation_matches_one_step_monte_carlo() {
    let m = two_state();
    let grid = SolverGrid::for_model(&m, 50, 200).unwrap();
    let (v, _) = v_surface(&m, &grid, &QuadratureSpec::default()).unwrap();
    let mut agree = 0;
    let mut probes = 0;
    for &k in &[1usize, 10, 25, 40, 50] {
        for j in 0..2 {
            for &a in &[1.0, 1.4] {
                let solver = v.continuation(k - 1).interpolate(j, f64::ln(a)).unwrap();
                let e = v_mc_step(&m, grid.time(k - 1), a, j, grid.delta(), v.layer(k), 40_000, probes).unwrap();
                probes += 1;
                if (solver - e.mean).abs() <= 3.0 * e.se + 1e-6 {
                    agree += 1;
                }
            }
        }
    }
    assert_eq!(probes, 20);
    assert!(agree >= 18, "{agree}/20 probes within 3 SE");
}

#[test]
fn surface_invariants_hold() {
    for m in [constant_case(), two_state(), RegimeModel::constant(-0.2, 0.5, 1.0).unwrap()] {
        let grid = SolverGrid::for_model(&m, 40, 200).unwrap();
        let s = Solver::new(&m, &grid, &QuadratureSpec::default()).unwrap().solve();
        for k in 0..=40 {
            for j in 0..m.num_states() {
                for i in 0..200 {
                    let (v, g) = (s.v.value(k, j, i), s.g.value(k, j, i));
                    assert!(v <= g + 1e-12);
                    assert!(v >= 1.0 - 1e-9);
                    assert!(g >= grid.a_node(i) * (1.0 - 1e-8));
                    if i > 0 {
                        assert!(v >= s.v.value(k, j, i - 1) - 1e-9);
                        assert!(g >= s.g.value(k, j, i - 1) - 1e-9);
                    }
                    if k > 0 {
                        assert!(g <= s.g.value(k - 1, j, i) * (1.0 + 1e-9), "k={k} j={j} i={i}: {g} vs {}", s.g.value(k - 1, j, i));
                    }
                }
            }
        }
    }
}
