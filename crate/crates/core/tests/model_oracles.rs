use shelab::shape::Shape;
use shelab::special::integrate_adaptive;
use shelab::{Field, GridSpec};

fn unit() -> Field {
    Shape::unit_gaussian().sample(GridSpec::default())
}

#[test]
fn gaussian_mass_is_one() {
    let m = unit().integrate();
    assert!((m - 1.0).abs() <= 1e-6, "{m}");
}

#[test]
fn lp_norm_matches_quadrature() {
    let f = unit();
    let shape = Shape::unit_gaussian();
    for p in [1.0, 1.3, 1.5, 2.0] {
        let exact = integrate_adaptive(|x| shape.value(x).powf(p), -10.0, 10.0, 1e-13);
        let got = f.lp_norm_pow(p);
        assert!((got - exact).abs() <= 1e-9 * exact, "p={p}: {got} vs {exact}");
    }
}

#[test]
fn pairing_of_unit_gaussians() {
    // int p_1(x)^2 dx = 1 / (2 sqrt(pi))
    let f = unit();
    let v = f.pairing(&f).unwrap();
    approx::assert_relative_eq!(v, 0.5 / std::f64::consts::PI.sqrt(), max_relative = 1e-9);
    assert!((v - 0.282095).abs() < 1e-6);
}

#[test]
fn pairing_rejects_other_grids() {
    let a = unit();
    let b = Field::zeros(GridSpec::new(-5.0, 5.0, 100).unwrap());
    assert!(a.pairing(&b).is_err());
}

#[test]
fn deposit_adds_mass_in_one_cell() {
    let mut f = Field::zeros(GridSpec::default());
    assert!(f.deposit(0.3, 2.0));
    approx::assert_relative_eq!(f.integrate(), 2.0, max_relative = 1e-14);
    assert_eq!(f.values().iter().filter(|v| **v > 0.0).count(), 1);
    assert!(!f.deposit(50.0, 1.0));
}
