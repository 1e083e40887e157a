use std::f64::consts::PI;

use emloc::field::{make_point_dipole, RealField};
use emloc::forward::simulate_boundary_data;
use emloc::geometry::{make_sphere_mesh, FrequencySet, Medium, VoxelGrid};
use emloc::greens::{convention_sign, re_green_ee};
use emloc::imaging::{broadband_from_stack, phase_conj_single, phase_conj_stack};
use num_complex::Complex64;

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}

/// `s eps0/(2 pi) sum_y h^3 Re G(x - y) J(y)`, summed directly.
fn smoothed_source(src: &RealField, omega: f64, m: &Medium) -> RealField {
    let g = src.grid;
    let scale = convention_sign() * m.epsilon0 / (2.0 * PI) * g.voxel_volume();
    let mut out = RealField::zeros(g);
    for x in 0..g.len() {
        let mut acc = nalgebra::Vector3::zeros();
        for y in 0..g.len() {
            let j = src.get(y);
            if j.norm() == 0.0 {
                continue;
            }
            acc += re_green_ee(&(g.center(x) - g.center(y)), omega, m).unwrap() * j;
        }
        out.set(x, acc * scale);
    }
    out
}

#[test]
fn single_frequency_image_matches_the_real_kernel_smoothing() {
    let m = Medium::default();
    let omega = 2.0 * PI; // wavelength 1
    let grid = VoxelGrid::centered([0.0; 3], 0.1, [5, 5, 5]).unwrap();
    let src = make_point_dipole(&grid, [0.1, 0.0, -0.1], [0.3, -0.5, 1.0]).unwrap();
    let mesh = make_sphere_mesh([0.0; 3], 20.0, 4000).unwrap();
    let freqs = FrequencySet::new(vec![omega]).unwrap();
    let data = simulate_boundary_data(&src, &mesh, &freqs, &m).unwrap();
    let img = phase_conj_single(&data, 0, &grid, &m).unwrap();
    let expect = smoothed_source(&src, omega, &m);
    let err = (&img.re() - &expect).norm() / expect.norm();
    assert!(err < 0.10, "relative error {err}");
    assert!(img.im().norm() < 0.10 * expect.norm());
}

#[test]
fn peak_location_ignores_complex_data_scaling() {
    let m = Medium::default();
    let grid = VoxelGrid::centered([0.0; 3], 0.1, [7, 7, 7]).unwrap();
    let src = make_point_dipole(&grid, [0.2, -0.1, 0.0], [0.0, 1.0, 0.0]).unwrap();
    let mesh = make_sphere_mesh([0.0; 3], 3.0, 1500).unwrap();
    let freqs = FrequencySet::band(10.0, 20.0, 4, &m).unwrap();
    let data = simulate_boundary_data(&src, &mesh, &freqs, &m).unwrap();
    let base = phase_conj_stack(&data, &grid, &m).unwrap();
    let peak = argmax(&base.magnitude_sum());
    assert_eq!(grid.ijk(peak), [5, 2, 3]);
    for alpha in [Complex64::new(1e-3, 0.0), Complex64::new(-2.0, 5.0), Complex64::from_polar(7.0, 2.2)] {
        let scaled = phase_conj_stack(&data.scaled(alpha), &grid, &m).unwrap();
        assert_eq!(argmax(&scaled.magnitude_sum()), peak);
        let bb = broadband_from_stack(&scaled).unwrap();
        assert_eq!(argmax(&bb.magnitudes()), argmax(&broadband_from_stack(&base).unwrap().magnitudes()));
    }
}

#[test]
fn image_moves_with_the_source() {
    let m = Medium::default();
    let mesh = make_sphere_mesh([0.0; 3], 4.0, 2000).unwrap();
    let freqs = FrequencySet::new(vec![12.0]).unwrap();
    let shift = [0.3, -0.2, 0.1];
    let image = |offset: [f64; 3]| {
        let grid = VoxelGrid::centered(offset, 0.1, [5, 5, 5]).unwrap();
        let src = make_point_dipole(&grid, offset, [1.0, 0.0, 1.0]).unwrap();
        let data = simulate_boundary_data(&src, &mesh, &freqs, &m).unwrap();
        phase_conj_single(&data, 0, &grid, &m).unwrap().magnitudes()
    };
    let a = image([0.0; 3]);
    let b = image(shift);
    let peak = a.iter().cloned().fold(0.0, f64::max);
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05 * peak, "worst {worst} vs peak {peak}");
}
