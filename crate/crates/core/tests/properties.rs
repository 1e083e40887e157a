use emloc::field::{make_point_dipole, ComplexField, RealField};
use emloc::forward::{simulate_boundary_data, BoundaryData};
use emloc::geometry::{make_sphere_mesh, FrequencySet, Medium, Vec3, VoxelGrid};
use emloc::greens::{dyadic_green_ee, re_green_ee};
use emloc::imaging::{phase_conj_single, trapezoid_weights};
use emloc::inverse::{green_operator, prox_group_l1, prox_l1, soft_threshold, KernelPath};
use emloc::io::container::{format_f64, read_real_field, write_real_field};
use emloc::io::ArrayFormat;
use num_complex::Complex64;
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn small_grid() -> VoxelGrid {
    VoxelGrid::centered([0.0; 3], 0.3, [3, 2, 2]).unwrap()
}

fn field_on(grid: VoxelGrid) -> impl Strategy<Value = RealField> {
    prop::collection::vec(-2.0..2.0f64, 3 * grid.len())
        .prop_map(move |d| RealField::from_data(grid, d).unwrap())
}

fn max_rel(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_is_symmetric_and_even(v in vec3(), kappa in 0.2..20.0f64) {
        prop_assume!(v.norm() > 1e-3);
        let m = Medium::default();
        let g = dyadic_green_ee(&v, kappa, &m).unwrap();
        let gm = dyadic_green_ee(&(-v), kappa, &m).unwrap();
        prop_assert_eq!(g, g.transpose());
        prop_assert_eq!(g, gm);
        prop_assert_eq!(re_green_ee(&v, kappa, &m).unwrap(), re_green_ee(&(-v), kappa, &m).unwrap());
        prop_assert!(g.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
    }

    #[test]
    fn real_part_matches_full_kernel(v in vec3(), kappa in 0.2..20.0f64) {
        prop_assume!(v.norm() > 0.05);
        let m = Medium::default();
        let g = dyadic_green_ee(&v, kappa, &m).unwrap().map(|c| c.re);
        let r = re_green_ee(&v, kappa, &m).unwrap();
        prop_assert!((g - r).norm() <= 1e-10 * g.norm().max(kappa * kappa));
    }

    #[test]
    fn forward_map_is_linear(a in field_on(small_grid()), b in field_on(small_grid()), alpha in -3.0..3.0f64) {
        let m = Medium::default();
        let mesh = make_sphere_mesh([0.0; 3], 3.0, 12).unwrap();
        let f = FrequencySet::new(vec![2.0, 5.0]).unwrap();
        let combo = &a + &(&b * alpha);
        let lhs = simulate_boundary_data(&combo, &mesh, &f, &m).unwrap();
        let da = simulate_boundary_data(&a, &mesh, &f, &m).unwrap();
        let db = simulate_boundary_data(&b, &mesh, &f, &m).unwrap();
        let rhs: Vec<Complex64> = da.values.iter().zip(&db.values).map(|(x, y)| x + y * alpha).collect();
        prop_assert!(max_rel(&lhs.values, &rhs) < 1e-12);
    }

    #[test]
    fn imaging_is_conjugate_linear_and_phase_blind(re in -2.0..2.0f64, im in -2.0..2.0f64, theta in 0.0..6.3f64) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let m = Medium::default();
        let g = small_grid();
        let src = make_point_dipole(&g, [0.0; 3], [0.3, -0.2, 1.0]).unwrap();
        let mesh = make_sphere_mesh([0.0; 3], 3.0, 40).unwrap();
        let f = FrequencySet::new(vec![4.0]).unwrap();
        let d = simulate_boundary_data(&src, &mesh, &f, &m).unwrap();
        let alpha = Complex64::new(re, im);
        let base = phase_conj_single(&d, 0, &g, &m).unwrap();
        let scaled = phase_conj_single(&d.scaled(alpha), 0, &g, &m).unwrap();
        let expect: Vec<Complex64> = base.data.iter().map(|c| c * alpha.conj()).collect();
        prop_assert!(max_rel(&scaled.data, &expect) < 1e-12);
        let rotated = phase_conj_single(&d.scaled(Complex64::from_polar(1.0, theta)), 0, &g, &m).unwrap();
        let peak = base.magnitudes().into_iter().fold(0.0, f64::max);
        for (a, b) in rotated.magnitudes().iter().zip(base.magnitudes()) {
            prop_assert!((a - b).abs() <= 1e-12 * peak);
        }
    }

    #[test]
    fn green_operators_are_self_adjoint(u in field_on(small_grid()), v in field_on(small_grid()), kappa in 1.0..15.0f64) {
        let g = small_grid();
        for path in [KernelPath::Direct, KernelPath::Fft] {
            let op = green_operator(&g, kappa, &Medium::default(), path).unwrap();
            let mut au = vec![0.0; u.data.len()];
            let mut av = vec![0.0; v.data.len()];
            op.apply(&u.data, &mut au);
            op.apply(&v.data, &mut av);
            let lhs: f64 = au.iter().zip(&v.data).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.data.iter().zip(&av).map(|(a, b)| a * b).sum();
            let scale: f64 = au.iter().map(|a| a.abs()).sum::<f64>() * 2.0 + 1e-300;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn soft_threshold_is_shrinking_and_nonexpansive(a in -5.0..5.0f64, b in -5.0..5.0f64, t in 0.0..3.0f64) {
        let (sa, sb) = (soft_threshold(a, t), soft_threshold(b, t));
        prop_assert!(sa.abs() <= a.abs());
        prop_assert!(sa == 0.0 || sa.signum() == a.signum());
        prop_assert!((sa - sb).abs() <= (a - b).abs() + 1e-15);
        prop_assert!((sa == 0.0) == (a.abs() <= t));
    }

    #[test]
    fn prox_minimizes_its_objective(f in field_on(small_grid()), t in 0.01..1.5f64, delta in field_on(small_grid())) {
        // prox_t(v) = argmin_x 0.5 |x - v|^2 + t |x|_1, per scalar or per voxel
        let objective = |x: &RealField, group: bool| {
            let pen = if group { x.group_l1_norm() } else { x.l1_norm() };
            0.5 * (x - &f).norm_sq() + t * pen
        };
        let h3 = f.grid.voxel_volume();
        for group in [false, true] {
            let p = if group { prox_group_l1(&f, t).unwrap() } else { prox_l1(&f, t).unwrap() };
            let base = objective(&p, group);
            for eps in [1e-3, 1e-1] {
                let q = &p + &(&delta * eps);
                prop_assert!(objective(&q, group) >= base - 1e-12 * h3);
            }
        }
    }

    #[test]
    fn containers_round_trip_bit_exactly(f in field_on(small_grid())) {
        let dir = tempfile::tempdir().unwrap();
        for format in [ArrayFormat::Csv, ArrayFormat::Bin] {
            let stem = format!("f_{}", format.extension());
            let p = write_real_field(dir.path(), &stem, &f, format).unwrap();
            let back = read_real_field(&p).unwrap();
            prop_assert!(back.data.iter().zip(&f.data).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(back.grid, f.grid);
        }
    }

    #[test]
    fn csv_cells_round_trip(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        prop_assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn trapezoid_weights_integrate_linear_functions(mut xs in prop::collection::vec(0.0..10.0f64, 2..20), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let w = trapezoid_weights(&xs);
        let (lo, hi) = (xs[0], *xs.last().unwrap());
        let exact = a * (hi - lo) + 0.5 * b * (hi * hi - lo * lo);
        let quad: f64 = w.iter().zip(&xs).map(|(wi, x)| wi * (a + b * x)).sum();
        prop_assert!((quad - exact).abs() <= 1e-10 * (1.0 + exact.abs()));
    }

    #[test]
    fn voxel_index_round_trips(nx in 1usize..6, ny in 1usize..6, nz in 1usize..6, seed in any::<usize>()) {
        let g = VoxelGrid::new([0.0; 3], 1.0, [nx, ny, nz]).unwrap();
        let v = seed % g.len();
        let [i, j, k] = g.ijk(v);
        prop_assert_eq!(g.index(i, j, k), v);
        prop_assert_eq!(v, i + nx * (j + ny * k));
    }

    #[test]
    fn band_spans_its_endpoints(kmin in 0.5..10.0f64, width in 0.1..20.0f64, count in 2usize..40) {
        let m = Medium::default();
        let f = FrequencySet::band(kmin, kmin + width, count, &m).unwrap();
        prop_assert_eq!(f.len(), count);
        prop_assert!((f.omegas()[0] - kmin).abs() < 1e-12 * kmin);
        prop_assert!((f.omegas()[count - 1] - kmin - width).abs() < 1e-12 * (kmin + width));
    }
}

#[test]
fn zero_data_images_to_zero() {
    let g = small_grid();
    let mesh = make_sphere_mesh([0.0; 3], 3.0, 30).unwrap();
    let d = BoundaryData::zeros(mesh, FrequencySet::new(vec![1.0, 2.0]).unwrap());
    let img = phase_conj_single(&d, 1, &g, &Medium::default()).unwrap();
    assert_eq!(img, ComplexField::zeros(g));
}
