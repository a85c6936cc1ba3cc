use std::sync::OnceLock;

use num_complex::Complex64 as c64;
use proptest::prelude::*;

use steklov::eigensolver::{cluster, sector_census, LinearPencil};
use steklov::materials::{lp_diff_norm, perturb_field, scalar_tensor, FieldKind, MaterialField, PerturbationSpec};
use steklov::mesh::{generate_ball_mesh, generate_cube_mesh, refine_uniform, BoundaryShape, Mesh};
use steklov::problem::{AnyPencil, Problem, ProblemKind};
use steklov::sparse::dot_h;
use steklov::stability::fit_rate;

fn cube() -> &'static Mesh {
    static MESH: OnceLock<Mesh> = OnceLock::new();
    MESH.get_or_init(|| generate_cube_mesh(3).unwrap())
}

fn pencils() -> &'static [(Problem, AnyPencil)] {
    static P: OnceLock<Vec<(Problem, AnyPencil)>> = OnceLock::new();
    P.get_or_init(|| {
        let mesh = generate_cube_mesh(2).unwrap();
        let mu = MaterialField::uniform(&mesh, FieldKind::MuInv, scalar_tensor(c64::new(1.0, 0.0)));
        let eps = MaterialField::uniform(&mesh, FieldKind::Eps, scalar_tensor(c64::new(3.0, 1.0)));
        [ProblemKind::Scalar, ProblemKind::Maxwell]
            .into_iter()
            .map(|k| {
                let pr = Problem::new(mesh.clone(), k, 1.0).unwrap();
                let p = pr.assemble(&mu, &eps).unwrap();
                (pr, p)
            })
            .collect()
    })
}

/// Random piecewise-constant field on the unit cube (total volume one).
fn field(values: &[f64]) -> MaterialField {
    let mesh = cube();
    let t: Vec<_> = (0..mesh.num_tets())
        .map(|i| scalar_tensor(c64::new(values[i % values.len()], 0.0)))
        .collect();
    MaterialField::from_values(FieldKind::Eps, t, mesh.volumes().to_vec()).unwrap()
}

fn zero() -> MaterialField {
    MaterialField::uniform(cube(), FieldKind::Eps, scalar_tensor(c64::new(0.0, 0.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lp_norm_is_monotone_in_p_on_unit_volume(
        v in prop::collection::vec(-5.0f64..5.0, 1..20),
        p in 1.0f64..10.0,
        dp in 0.0f64..10.0,
    ) {
        let f = field(&v);
        let a = lp_diff_norm(&f, &zero(), p).unwrap();
        let b = lp_diff_norm(&f, &zero(), p + dp).unwrap();
        let c = lp_diff_norm(&f, &zero(), f64::INFINITY).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12) + 1e-300);
        prop_assert!(b <= c * (1.0 + 1e-12));
    }

    #[test]
    fn lp_norm_satisfies_interpolation(
        v in prop::collection::vec(-5.0f64..5.0, 1..20),
        p in 1.0f64..4.0,
        r in 4.0f64..16.0,
        theta in 0.0f64..1.0,
    ) {
        let f = field(&v);
        let q = 1.0 / (theta / p + (1.0 - theta) / r);
        let np = lp_diff_norm(&f, &zero(), p).unwrap();
        let nq = lp_diff_norm(&f, &zero(), q).unwrap();
        let nr = lp_diff_norm(&f, &zero(), r).unwrap();
        prop_assert!(nq <= np.powf(theta) * nr.powf(1.0 - theta) * (1.0 + 1e-10) + 1e-300);
    }

    #[test]
    fn lp_norm_doubling_holder(
        v in prop::collection::vec(-5.0f64..5.0, 1..20),
        p in 1.0f64..8.0,
    ) {
        let f = field(&v);
        let n2p = lp_diff_norm(&f, &zero(), 2.0 * p).unwrap();
        let np = lp_diff_norm(&f, &zero(), p).unwrap();
        let ninf = lp_diff_norm(&f, &zero(), f64::INFINITY).unwrap();
        prop_assert!(n2p * n2p <= np * ninf * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn ball_perturbation_norm_matches_volume(
        cx in 0.0f64..1.0, cy in 0.0f64..1.0, cz in 0.0f64..1.0,
        radius in 0.05f64..1.0,
        dre in -1.0f64..1.0, dim in -1.0f64..1.0,
        p in 1.0f64..12.0,
    ) {
        let mesh = cube();
        let base = MaterialField::uniform(mesh, FieldKind::Eps, scalar_tensor(c64::new(2.0, 0.5)));
        let spec = PerturbationSpec { center: [cx, cy, cz], radius, delta: c64::new(dre, dim), target: FieldKind::Eps };
        let f = perturb_field(mesh, &base, &[spec]).unwrap();
        let vol: f64 = (0..mesh.num_tets())
            .filter(|&t| spec.contains(mesh.tet_centroid(t)))
            .map(|t| mesh.volumes()[t])
            .sum();
        let n = lp_diff_norm(&f, &base, p).unwrap();
        let expect = if vol > 0.0 { spec.delta.norm() * vol.powf(1.0 / p) } else { 0.0 };
        prop_assert!((n - expect).abs() <= 1e-12 * (1.0 + expect));
    }

    #[test]
    fn boundary_operator_is_positive_semidefinite(
        seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
    ) {
        for (_, p) in pencils() {
            let x: Vec<c64> = (0..p.dim()).map(|i| {
                let (a, b) = seed[i % seed.len()];
                c64::new(a + (i as f64 * 0.37).sin(), b * (i as f64 * 0.11).cos())
            }).collect();
            let q = dot_h(&x, &p.apply_b(&x));
            let scale = dot_h(&x, &x).re;
            prop_assert!(q.re >= -1e-12 * scale);
            prop_assert!(q.im.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn clustering_partitions_and_separates(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..30),
        reltol in 0.001f64..0.3,
    ) {
        let values: Vec<c64> = pts.iter().map(|&(a, b)| c64::new(a, b)).collect();
        let (ids, clusters) = cluster(&values, reltol);
        let tol = reltol * values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert_eq!(clusters.iter().map(|c| c.size()).sum::<usize>(), values.len());
        for (i, c) in clusters.iter().enumerate() {
            prop_assert!(c.members.iter().all(|&m| ids[m] == i));
        }
        for i in 0..values.len() {
            for j in 0..values.len() {
                if ids[i] != ids[j] {
                    prop_assert!((values[i] - values[j]).norm() > tol);
                }
            }
        }
    }

    #[test]
    fn sector_census_counts_and_symmetry(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 0..30),
        angle in 0.1f64..3.0,
        radius in 0.1f64..5.0,
    ) {
        let values: Vec<c64> = pts.iter().map(|&(a, b)| c64::new(a, b)).collect();
        let c = sector_census(&values, angle, radius).unwrap();
        prop_assert_eq!(c.inside + c.outside, values.iter().filter(|v| v.norm() <= radius).count());
        let conj: Vec<c64> = values.iter().map(|v| v.conj()).collect();
        let d = sector_census(&conj, angle, radius).unwrap();
        prop_assert!(c.inside.abs_diff(d.inside) <= values.iter().filter(|v| v.im == 0.0).count());
    }

    #[test]
    fn fitted_slope_recovers_power_law(
        slope in 0.5f64..4.0,
        scale in 1e-6f64..1e2,
        start in 0.01f64..1.0,
    ) {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| {
            let x = start * 0.6f64.powi(i);
            (x, scale * x.powf(slope))
        }).collect();
        let fit = fit_rate(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!(fit.residual < 1e-9);
    }
}

#[test]
fn refinement_preserves_mesh_invariants() {
    for mesh in [generate_cube_mesh(2).unwrap(), generate_ball_mesh(0).unwrap()] {
        let fine = refine_uniform(&mesh).unwrap();
        fine.check_invariants().unwrap();
        assert_eq!(fine.num_tets(), 8 * mesh.num_tets());
        assert_eq!(fine.boundary_faces().len(), 4 * mesh.boundary_faces().len());
        assert_eq!(fine.boundary_euler_characteristic(), 2);
        assert!(fine.volumes().iter().all(|&v| v > 0.0));
        // cube refinement keeps the domain; ball refinement moves toward the sphere
        let target = if mesh.shape() != BoundaryShape::UnitSphere {
            1.0
        } else {
            4.0 * std::f64::consts::PI / 3.0
        };
        let (before, after) = (
            (mesh.total_volume() - target).abs(),
            (fine.total_volume() - target).abs(),
        );
        assert!(after < before || after < 1e-12, "{before} -> {after}");
    }
}
