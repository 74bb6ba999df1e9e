mod common;

use common::dot;
use efp::grid::{make_grid, random_field, Field, GridKind};
use efp::metrics::{mean_std, relative_l2_error};
use efp::operators::{burgers_operator, heat_operator, laplacian_2d, normal_operator, LinearOperator};
use efp::problems::{make_burgers, make_heat, make_poisson};
use efp::solver::{enforce_boundary, gaussian_kernel, gaussian_smooth};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = GridKind> {
    prop_oneof![Just(GridKind::Spatial2D), Just(GridKind::SpaceTime1Dp1)]
}

fn combo(a: &Field, b: &Field, x: f64, y: f64) -> Field {
    Field::from_values(
        a.grid(),
        a.values().iter().zip(b.values()).map(|(p, q)| x * p + y * q).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn index_and_node_invert(k in kind(), nx in 3usize..40, ny in 3usize..40) {
        let g = make_grid(k, nx, ny, 1.0).unwrap();
        for idx in 0..g.len() {
            let (i, j) = g.node(idx);
            prop_assert_eq!(g.index(i, j), idx);
        }
    }

    #[test]
    fn boundary_counts(k in kind(), nx in 3usize..40, ny in 3usize..40, y in 0.1f64..5.0) {
        let g = make_grid(k, nx, ny, y).unwrap();
        let expect = match k {
            GridKind::Spatial2D => 2 * nx + 2 * ny - 4,
            GridKind::SpaceTime1Dp1 => nx + 2 * (ny - 1),
        };
        prop_assert_eq!(g.boundary_count(), expect);
        prop_assert_eq!(g.boundary_count() + g.interior_count(), nx * ny);
        prop_assert!((g.hx() * (nx - 1) as f64 - 1.0).abs() < 1e-12);
        prop_assert!((g.hy() * (ny - 1) as f64 - y).abs() < 1e-12 * y);
    }

    #[test]
    fn operators_are_linear(n in 4usize..20, m in 4usize..20, a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let gs = make_grid(GridKind::SpaceTime1Dp1, n, m, 1.0).unwrap();
        let u = random_field(&gs, 1.0, seed).unwrap();
        let v = random_field(&gs, 1.0, seed + 1).unwrap();
        let heat = heat_operator(&gs, 0.1).unwrap();
        let jac = burgers_operator(&gs, 0.05).unwrap()
            .jacobian_at(&random_field(&gs, 1.0, seed + 2).unwrap()).unwrap();
        let ops: [&dyn LinearOperator; 2] = [&heat, &jac];
        for op in ops {
            for adjoint in [false, true] {
                let ap = |f: &Field| if adjoint { op.apply_adjoint(f).unwrap() } else { op.apply(f).unwrap() };
                let lhs = ap(&combo(&u, &v, a, b));
                let rhs = combo(&ap(&u), &ap(&v), a, b);
                let scale = ap(&u).norm().max(ap(&v).norm()) * (a.abs() + b.abs()).max(1.0);
                let gap = combo(&lhs, &rhs, 1.0, -1.0).norm();
                prop_assert!(gap <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn adjoint_identity_any_shape(n in 3usize..24, m in 3usize..24, seed in 0u64..1000) {
        let g2 = make_grid(GridKind::Spatial2D, n, n, 1.0).unwrap();
        let gs = make_grid(GridKind::SpaceTime1Dp1, n, m, 1.5).unwrap();
        let lap = laplacian_2d(&g2).unwrap();
        let heat = heat_operator(&gs, 0.3).unwrap();
        let jac = burgers_operator(&gs, 0.02).unwrap()
            .jacobian_at(&random_field(&gs, 2.0, seed).unwrap()).unwrap();
        let ops: [&dyn LinearOperator; 3] = [&lap, &heat, &jac];
        for op in ops {
            let g = op.grid();
            let v = random_field(g, 1.0, seed + 7).unwrap();
            let w = random_field(g, 1.0, seed + 9).unwrap();
            let av = op.apply(&v).unwrap();
            let gap = (dot(av.values(), w.values()) - dot(v.values(), op.apply_adjoint(&w).unwrap().values())).abs();
            prop_assert!(gap <= 1e-12 * av.norm() * w.norm());
        }
    }

    #[test]
    fn normal_operator_energy_identity(n in 4usize..20, dtau in 1e-3f64..10.0, seed in 0u64..1000) {
        let g = make_grid(GridKind::Spatial2D, n, n, 1.0).unwrap();
        let lap = laplacian_2d(&g).unwrap();
        let m = normal_operator(&lap, dtau).unwrap();
        let v = random_field(&g, 1.0, seed).unwrap();
        let lhs = v.dot(&m.apply(&v).unwrap()) - v.dot(&v);
        let av = lap.apply(&v).unwrap();
        let rhs = dtau * av.dot(&av);
        prop_assert!(lhs >= 0.0);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
    }

    #[test]
    fn smoothing_is_a_convex_average(k in kind(), n in 3usize..20, m in 3usize..20, sigma in 0.0f64..4.0, seed in 0u64..1000) {
        let g = make_grid(k, n, m, 1.0).unwrap();
        let u = random_field(&g, 1.0, seed).unwrap();
        let s = gaussian_smooth(&u, sigma);
        let lo = u.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for &x in s.values() {
            prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
        }
        let c = Field::from_values(&g, vec![2.5; g.len()]).unwrap();
        for &x in gaussian_smooth(&c, sigma).values() {
            prop_assert!((x - 2.5).abs() <= 1e-13);
        }
        let w = gaussian_kernel(sigma);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        prop_assert!(w.len() % 2 == 1);
    }

    #[test]
    fn boundary_projection_is_idempotent_and_exact(n in 3usize..24, which in 0usize..3, seed in 0u64..1000) {
        let p = match which {
            0 => make_poisson(&make_grid(GridKind::Spatial2D, n, n, 1.0).unwrap()).unwrap(),
            1 => make_heat(&make_grid(GridKind::SpaceTime1Dp1, n, n, 1.0).unwrap(), 0.1).unwrap(),
            _ => make_burgers(&make_grid(GridKind::SpaceTime1Dp1, n, n, 1.0).unwrap(), 0.05).unwrap(),
        };
        let u = random_field(p.grid(), 1.0, seed).unwrap();
        let once = enforce_boundary(&u, p.system()).unwrap();
        let twice = enforce_boundary(&once, p.system()).unwrap();
        prop_assert_eq!(once.values(), twice.values());
        for k in 0..p.grid().len() {
            if p.grid().is_boundary(k) {
                prop_assert_eq!(once.values()[k].to_bits(), p.system().boundary().values()[k].to_bits());
                prop_assert_eq!(p.exact().values()[k].to_bits(), p.system().boundary().values()[k].to_bits());
            } else {
                prop_assert_eq!(once.values()[k].to_bits(), u.values()[k].to_bits());
            }
        }
    }

    #[test]
    fn csv_round_trip(k in kind(), n in 3usize..12, m in 3usize..12, sigma in 0.0f64..1e6, seed in 0u64..1000) {
        let g = make_grid(k, n, m, 1.0).unwrap();
        let u = random_field(&g, sigma, seed).unwrap();
        let back = Field::from_csv_str(&g, &u.to_csv_string()).unwrap();
        prop_assert_eq!(back.values(), u.values());
    }

    #[test]
    fn relative_error_is_scale_free(n in 3usize..12, c in 0.01f64..100.0, seed in 0u64..1000) {
        let g = make_grid(GridKind::Spatial2D, n, n, 1.0).unwrap();
        let u = random_field(&g, 1.0, seed).unwrap();
        let r = random_field(&g, 1.0, seed + 1).unwrap();
        let e1 = relative_l2_error(&u, &r).unwrap();
        let e2 = relative_l2_error(&combo(&u, &u, c, 0.0), &combo(&r, &r, c, 0.0)).unwrap();
        prop_assert!((e1 - e2).abs() <= 1e-12 * e1.max(1.0));
        prop_assert!(e1 >= 0.0);
    }

    #[test]
    fn mean_std_bounds(xs in prop::collection::vec(-1e3f64..1e3, 1..30)) {
        let (mean, std) = mean_std(&xs);
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(mean >= lo - 1e-9 && mean <= hi + 1e-9);
        prop_assert!(std >= 0.0);
        prop_assert!(std <= (hi - lo) + 1e-9);
    }
}
