use regime_stop::density::{build_rule, max_density_marginal_check, phi_density};
use regime_stop::QuadratureSpec;
use statrs::distribution::{ContinuousCDF, Normal};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

/// Reflection principle: `P(B_r <= x, M_r <= y) = Phi(x/sqrt r) - Phi((x - 2y)/sqrt r)`.
fn joint_cdf(r: f64, x: f64, y: f64) -> f64 {
    let n = std_normal();
    let x = x.min(y);
    n.cdf(x / r.sqrt()) - n.cdf((x - 2.0 * y) / r.sqrt())
}

/// Midpoint sum of the density over `[x0, x1] x [y0, y1]`.
fn box_mass(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let k = 400;
    let (dx, dy) = ((x1 - x0) / k as f64, (y1 - y0) / k as f64);
    let mut s = 0.0;
    for i in 0..k {
        for j in 0..k {
            let x = x0 + (i as f64 + 0.5) * dx;
            let y = y0 + (j as f64 + 0.5) * dy;
            s += phi_density(r, x, y).unwrap();
        }
    }
    s * dx * dy
}

#[test]
fn density_box_masses_match_reflection_principle() {
    for &(r, x0, x1, y0, y1) in
        &[(1.0, -1.0, 0.5, 0.0, 1.0), (0.25, -0.5, 0.2, 0.3, 0.9), (0.02, -0.1, 0.05, 0.0, 0.1)]
    {
        let exact =
            joint_cdf(r, x1, y1) - joint_cdf(r, x0, y1) - joint_cdf(r, x1, y0) + joint_cdf(r, x0, y0);
        let got = box_mass(r, x0, x1, y0, y1);
        assert!((got - exact).abs() < 2e-4 * exact.max(1e-3), "r={r}: {got} vs {exact}");
    }
}

#[test]
fn marginal_tail_matches_normal_cdf() {
    let n = std_normal();
    for &(r, y) in &[(1.0, 1.0), (0.5, 0.7), (0.02, 0.05), (2.0, 0.3)] {
        let exact = 2.0 * n.cdf(-y / f64::sqrt(r));
        let got = max_density_marginal_check(r, y).unwrap();
        assert!((got - exact).abs() < 1e-8, "r={r} y={y}: {got} vs {exact}");
    }
    assert!((max_density_marginal_check(1.0, 1.0).unwrap() - 0.317310507862914).abs() < 1e-8);
}

#[test]
fn rule_moments_match_closed_forms() {
    let spec = QuadratureSpec::default();
    for &r in &[0.005, 0.02, 0.5, 1.0] {
        let rule = build_rule(&spec, r).unwrap();
        assert!((rule.total_weight() - 1.0).abs() < 1e-6);
        let ey = rule.integrate(|_, y| y);
        assert!((ey - (2.0 * r / std::f64::consts::PI).sqrt()).abs() < 1e-6 * r.sqrt().max(1e-3));
        let ex2 = rule.integrate(|x, _| x * x);
        assert!((ex2 - r).abs() < 1e-6 * r);
        // E[exp(s B_r)] = exp(s^2 r / 2)
        let s = 0.8;
        let mgf = rule.integrate(|x, _| (s * x).exp());
        assert!((mgf - (s * s * r / 2.0).exp()).abs() < 1e-6);
    }
}

#[test]
fn truncation_at_two_sd_loses_mass() {
    let spec = QuadratureSpec { trunc_sd: 2.0, ..QuadratureSpec::default() };
    let rule = build_rule(&spec, 0.02).unwrap();
    assert!(1.0 - rule.total_weight() > 1e-3);
}
