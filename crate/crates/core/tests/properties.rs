use efie2d::assembly::{
    assemble_g, assemble_n, assemble_rhs, assemble_s, read_ef2d, solve_system, Assembler, CMatrix, CVector, ExcitationSpec,
    OperatorMatrix, Polarization,
};
use efie2d::experiment::{run_spectrum, OperatorKind, SpectrumConfig};
use efie2d::geometry::{build_mesh, ParametricCurve};
use efie2d::kernels::KernelSpec;
use efie2d::oracle::{circle_symbol_dynamic, CircleOperator};
use efie2d::parallel::Execution;
use efie2d::spectral::{build_lb_basis, calderon_product, circle_angular_index, full_svd_spectrum, order_by_lb_modes};
use nalgebra::{Cholesky, DVector, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

fn circle(a: f64, n: usize) -> efie2d::geometry::CurveMesh {
    build_mesh(&ParametricCurve::circle(a).unwrap(), n).unwrap()
}

fn all_specs(k: f64) -> Vec<KernelSpec> {
    vec![
        KernelSpec::static_unfiltered(),
        KernelSpec::dynamic(k).unwrap(),
        KernelSpec::static_filtered(3.0 * k).unwrap(),
        KernelSpec::fourier_filtered(k, 3.0 * k).unwrap(),
        KernelSpec::ms_filtered(k, 3.0 * k).unwrap(),
    ]
}

#[test]
fn operators_are_symmetric_for_every_kernel() {
    let mesh = build_mesh(&ParametricCurve::kite(1.0).unwrap(), 32).unwrap();
    for spec in all_specs(2.0) {
        let pair = Assembler::new(&mesh, spec).unwrap().both();
        assert!(pair.s.symmetry_defect() < 1e-10, "{spec:?}");
        assert!(pair.n.symmetry_defect() < 1e-10, "{spec:?}");
        assert!(pair.s.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    }
}

#[test]
fn gram_spd_and_symmetry_across_mesh_sizes() {
    let curve = ParametricCurve::ellipse(1.0, 0.6).unwrap();
    for n in [16, 32, 64, 128] {
        let mesh = build_mesh(&curve, n).unwrap();
        let g = assemble_g(&mesh);
        let eig = SymmetricEigen::new(g.entries.clone());
        assert!(eig.eigenvalues.min() > 0.0);
        let s = assemble_s(&mesh, KernelSpec::dynamic(1.5).unwrap()).unwrap();
        assert!(s.symmetry_defect() < 1e-10);
    }
}

#[test]
fn filtered_matrices_converge_as_alpha_grows() {
    let mesh = circle(1.0, 64);
    let k = 2.0;
    let s_dyn = assemble_s(&mesh, KernelSpec::dynamic(k).unwrap()).unwrap();
    let s_static = assemble_s(&mesh, KernelSpec::static_unfiltered()).unwrap();
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for q in [2.0, 4.0, 8.0, 16.0] {
        let f = assemble_s(&mesh, KernelSpec::fourier_filtered(k, q * k).unwrap()).unwrap();
        let st = assemble_s(&mesh, KernelSpec::static_filtered(q * k).unwrap()).unwrap();
        let d = (
            (&f.entries - &s_dyn.entries).norm() / s_dyn.entries.norm(),
            (&st.entries - &s_static.entries).norm() / s_static.entries.norm(),
        );
        assert!(d.0 < prev.0 && d.1 < prev.1, "alpha = {q}k: {d:?} after {prev:?}");
        prev = d;
    }
}

#[test]
fn static_solve_recovers_constructed_solution() {
    let mesh = circle(0.8, 64);
    let s = assemble_s(&mesh, KernelSpec::static_unfiltered()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let e = CVector::from_fn(64, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let sol = solve_system(&s, &(&s.entries * &e)).unwrap();
    assert!((&sol.x - &e).norm() <= 1e-8 * e.norm());
    assert!(sol.relative_residual <= 1e-10);
}

#[test]
fn tm_rhs_scales_with_impedance() {
    let mesh = circle(1.0, 32);
    let a = assemble_rhs(&mesh, &ExcitationSpec::from_angle(Polarization::Tm, 0.4, 2.0, 1.0).unwrap());
    let b = assemble_rhs(&mesh, &ExcitationSpec::from_angle(Polarization::Tm, 0.4, 2.0, 4.0).unwrap());
    assert!((&a - &b * Complex64::from(4.0)).norm() < 1e-14 * a.norm());
    assert!(ExcitationSpec::from_angle(Polarization::Tm, 0.0, 0.0, 1.0).is_err());
}

fn mode_response(a: &CMatrix, g: &nalgebra::DMatrix<f64>, u: &DVector<f64>) -> f64 {
    let au = a * u.map(Complex64::from);
    let chol = Cholesky::new(g.clone()).unwrap();
    let x_re = chol.solve(&au.map(|z| z.re));
    let x_im = chol.solve(&au.map(|z| z.im));
    let num: f64 = au.iter().zip(x_re.iter().zip(x_im.iter())).map(|(y, (r, i))| y.re * r + y.im * i).sum();
    (num / u.dot(&(g * u))).sqrt()
}

#[test]
fn degenerate_pair_responses_are_rotation_invariant() {
    let mesh = circle(1.0, 48);
    let s = assemble_s(&mesh, KernelSpec::dynamic(3.0).unwrap()).unwrap();
    let g = assemble_g(&mesh).entries;
    let basis = build_lb_basis(&mesh).unwrap();
    let u = basis.eigenvectors();
    for first in [1usize, 5, 11] {
        let (p, q) = (u.column(first).into_owned(), u.column(first + 1).into_owned());
        let mut base = [mode_response(&s.entries, &g, &p), mode_response(&s.entries, &g, &q)];
        base.sort_by(f64::total_cmp);
        for theta in [0.3f64, 1.1, 2.5] {
            let r1 = &p * theta.cos() + &q * theta.sin();
            let r2 = &q * theta.cos() - &p * theta.sin();
            let mut rot = [mode_response(&s.entries, &g, &r1), mode_response(&s.entries, &g, &r2)];
            rot.sort_by(f64::total_cmp);
            assert!((rot[0] - base[0]).abs() < 1e-10 && (rot[1] - base[1]).abs() < 1e-10);
        }
    }
}

#[test]
fn svd_of_transpose_agrees() {
    let mesh = build_mesh(&ParametricCurve::kite(1.0).unwrap(), 40).unwrap();
    let n = assemble_n(&mesh, KernelSpec::dynamic(2.0).unwrap()).unwrap();
    let g = assemble_g(&mesh);
    let s = assemble_s(&mesh, KernelSpec::dynamic(2.0).unwrap()).unwrap();
    let p = calderon_product(&s, &n, &g).unwrap();
    let t = OperatorMatrix::new(p.entries.transpose(), "PT", None, "");
    let a = full_svd_spectrum(&p).unwrap();
    let b = full_svd_spectrum(&t).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-10 * a[0]);
    }
    let eig = SymmetricEigen::new(g.entries.clone());
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    let sg = full_svd_spectrum(&OperatorMatrix::new(g.to_complex(), "G", None, "")).unwrap();
    for (x, y) in sg.iter().zip(&ev) {
        assert!((x - y).abs() < 1e-14);
    }
}

#[test]
fn calderon_modes_match_symbol_products() {
    let (a, k, n) = (1.0, 2.0, 128);
    let mesh = circle(a, n);
    let g = assemble_g(&mesh);
    let basis = build_lb_basis(&mesh).unwrap();
    let pair = Assembler::new(&mesh, KernelSpec::dynamic(k).unwrap()).unwrap().both();
    let prod = order_by_lb_modes(&calderon_product(&pair.s, &pair.n, &g).unwrap(), &basis, &g).unwrap();
    let rs = order_by_lb_modes(&pair.s, &basis, &g).unwrap();
    let rn = order_by_lb_modes(&pair.n, &basis, &g).unwrap();
    for i in 0..21 {
        let m = circle_angular_index(i) as u32;
        let product_of_responses = rs.rows[i].sigma * rn.rows[i].sigma;
        assert!((prod.rows[i].sigma - product_of_responses).abs() < 0.02 * product_of_responses, "mode {i}");
        let symbols = (circle_symbol_dynamic(a, m, k, CircleOperator::S).unwrap()
            * circle_symbol_dynamic(a, m, k, CircleOperator::N).unwrap())
        .norm();
        assert!((prod.rows[i].sigma - symbols).abs() < 0.02 * symbols, "mode {i}");
    }
}

#[test]
fn sequential_and_parallel_assembly_agree_bitwise() {
    let mesh = circle(1.0, 48);
    for spec in all_specs(4.0) {
        let seq = Assembler::with_options(&mesh, spec, Default::default(), Execution::Sequential).unwrap().both();
        let par = Assembler::with_options(&mesh, spec, Default::default(), Execution::Parallel).unwrap().both();
        assert_eq!(seq.s.entries, par.s.entries);
        assert_eq!(seq.n.entries, par.n.entries);
    }
}

#[test]
fn spectrum_csv_embeds_config() {
    let spec = KernelSpec::static_filtered(8.0).unwrap();
    let cfg = SpectrumConfig::new(ParametricCurve::circle(1.0).unwrap(), 32, spec, OperatorKind::S);
    let mut extra = BTreeMap::new();
    extra.insert("threads".to_string(), "1".to_string());
    let art = run_spectrum(&cfg, &extra).unwrap();
    let csv = String::from_utf8(art.primary_csv().unwrap()).unwrap();
    for needle in ["# curve=circle:1", "# N=32", "# alpha=8", "# kernel=static-filtered", "# op=S", "# threads=1"] {
        assert!(csv.contains(needle), "missing {needle}");
    }
    let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "n,mu_n,sqrt_mu_n,sigma_n,operator,kernel_family,k,alpha");
    assert_eq!(data.len(), 33);
    let reference = String::from_utf8(art.reference_csv().unwrap().unwrap()).unwrap();
    assert!(reference.lines().nth_back(0).unwrap().contains(",static,"));
    let json: serde_json::Value = serde_json::from_str(&art.primary.to_json().unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 32);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ef2d_roundtrip(n in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3)));
        let op = OperatorMatrix::new(m.clone(), "X", None, "");
        let mut buf = Vec::new();
        op.write_ef2d(&mut buf).unwrap();
        prop_assert_eq!(buf.len(), 12 + 16 * n * n);
        prop_assert_eq!(read_ef2d(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn gram_rows_integrate_hats(sides in 3u32..7, amp in 0.0f64..0.2, n in 8usize..40) {
        let mesh = build_mesh(&ParametricCurve::polygon_smooth(sides, 1.0, amp).unwrap(), n).unwrap();
        let g = assemble_g(&mesh);
        for i in 0..n {
            let support = mesh.h(i) + mesh.h((i + n - 1) % n);
            prop_assert!((g.entries.row(i).sum() - support / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn static_n_annihilates_constants(scale in 0.3f64..3.0, n in 8usize..48) {
        let mesh = build_mesh(&ParametricCurve::kite(scale).unwrap(), n).unwrap();
        let a = assemble_n(&mesh, KernelSpec::static_unfiltered()).unwrap();
        let ones = CVector::from_element(n, Complex64::from(1.0));
        prop_assert!((&a.entries * ones).norm() / a.entries.norm() < 1e-10);
    }
}
