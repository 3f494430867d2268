//! Small instances with values from 30-digit direct summation.

use latgauss::exact::int_from_i64;
use latgauss::verify::*;
use latgauss::*;

const PI: f64 = std::f64::consts::PI;

fn z(n: usize) -> Lattice {
    Lattice::integer(n)
}

fn s(v: f64) -> GaussianParam64 {
    GaussianParam::scalar(v).unwrap()
}

fn coset(l: Lattice, x: &[f64]) -> Coset64 {
    Coset::new(l, x.to_vec()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

#[test]
fn point_weights() {
    close(rho_point(&[1.0], &s(1.0)).unwrap(), 0.043213918263772250, 1e-17);
    let sig = GaussianParam::matrix(vec![vec![1.0, 0.0], vec![0.0, 4.0]]).unwrap();
    close(rho_point(&[1.0, 1.0], &sig).unwrap(), (-1.25 * PI).exp(), 1e-17);
}

#[test]
fn masses_and_their_dual_forms() {
    let half = mass(&coset(z(1), &[0.5]), &s(1.0), 1e-13).unwrap();
    assert!(half.err <= 1e-13);
    close(half.value, 0.91357913815611682, 1e-12);
    close(mass(&coset(z(1), &[0.0]), &s(1.0), 1e-13).unwrap().value, 1.0864348112133080, 1e-12);
    let two = Lattice::from_i64(&[vec![2]]).unwrap();
    close(mass(&coset(two, &[0.5]), &s(1.0), 1e-13).unwrap().value, 0.45678956907805841, 1e-12);
    let d = dual_mass(&coset(z(2), &[0.5, 0.5]), &s(1.0), 1e-13).unwrap();
    close(d.value, 0.91357913815611682f64.powi(2), 2e-12);
}

#[test]
fn periodic_gaussian_values() {
    let f = periodic_gaussian(&z(2), &s(1.3), &[0.0, 0.0], 1e-12).unwrap();
    assert_eq!((f.value, f.err), (1.0, 0.0));
    close(periodic_gaussian(&z(1), &s(1.0), &[0.5], 1e-12).unwrap().value, 0.84089641525371454, 1e-10);
    close(periodic_gaussian(&z(1), &s(2.0), &[0.5], 1e-12).unwrap().value, 0.99998605072786715, 1e-10);
}

#[test]
fn cosine_moments_on_the_integers() {
    let c = cosine_moments(&z(1), &[0.5], &[0.5], &s(1.0), 1e-12).unwrap();
    close(c.cos_x.value, 0.84089641525371454, 1e-10);
    close(c.sin_sin.value, 0.0, 1e-12);
    let c = cosine_moments(&z(2), &[0.0, 0.0], &[0.0, 0.0], &s(1.0), 1e-12).unwrap();
    for (v, want) in [(c.cos_x.value, 1.0), (c.cos_y.value, 1.0), (c.cos_cos.value, 1.0), (c.sin_sin.value, 0.0)] {
        close(v, want, 1e-12);
    }
}

#[test]
fn coset_split_terms() {
    let r = theta_split_identity(&z(1), &[0.0], &[0.0], &s(1.0), 1e-12).unwrap();
    assert!(r.consistent());
    close(r.lhs.value, 1.0864348112133080f64.powi(2), 1e-11);
    let mut sq: Vec<f64> = r.terms.iter().map(|(a, b)| a.value * b.value).collect();
    sq.sort_by(f64::total_cmp);
    close(sq[0], 0.17285687867101152, 1e-11);
    close(sq[1], 1.0074837203450847, 1e-11);
    let r = theta_split_identity(&z(1), &[0.25], &[0.25], &s(1.0), 1e-12).unwrap();
    assert!(r.consistent());
    close(r.lhs.value, 0.99998605067922139, 1e-10);
}

#[test]
fn moments_and_derivatives() {
    let m = moment_report(&coset(z(1), &[0.25]), &s(1.0), 1e-13).unwrap();
    close(m.mean[0], 0.086428439335505760, 1e-12);
    close(m.second[0][0], 0.15918284202533127, 1e-12);
    let m = moment_report(&coset(z(1), &[0.5]), &s(1.0), 1e-13).unwrap();
    close(m.mean[0], 0.0, 1e-13);
    let d = derivative_report(&z(1), &s(1.0), &[0.25], 1e-12).unwrap();
    close(d.grad[0], -0.49983865297441621, 1e-11);
    close(d.hess[0][0], 0.0010137728021732307, 1e-11);
    let d = derivative_report(&z(2), &s(1.2), &[1.0, -2.0], 1e-12).unwrap();
    assert!(d.grad.iter().zip(&d.grad_err).all(|(g, e)| g.abs() <= *e + 1e-15));
}

#[test]
fn hessian_of_a_product_matches_differences() {
    let l = Lattice::from_i64(&[vec![2, 1], vec![0, 3]]).unwrap();
    let (pa, pb) = (s(1.1), s(1.7));
    let x = [0.3, -0.45];
    let a = derivative_report(&l, &pa, &x, 1e-13).unwrap();
    let b = derivative_report(&l, &pb, &x, 1e-13).unwrap();
    let (h, e) = hessian_of_product(&a, &b);
    let fg = |y: &[f64]| {
        periodic_gaussian(&l, &pa, y, 1e-16).unwrap().value * periodic_gaussian(&l, &pb, y, 1e-16).unwrap().value
    };
    let step = 1e-4;
    for i in 0..2 {
        for j in 0..2 {
            let at = |di: f64, dj: f64| {
                let mut y = x.to_vec();
                y[i] += di;
                y[j] += dj;
                fg(&y)
            };
            let fd = (at(step, step) - at(step, -step) - at(-step, step) + at(-step, -step)) / (4.0 * step * step);
            assert!((fd - h[i][j]).abs() <= 1e-5 + e[i][j], "{i}{j}: {fd} vs {}", h[i][j]);
        }
    }
}

#[test]
fn fourth_moment_values() {
    let (lhs, rhs) = fourth_moment_form(&z(1), &[1.0], &[1.0], &s(1.0), 1e-13).unwrap();
    close(lhs.value, 0.079654509110801221, 1e-12);
    close(rhs.value, 3.0 * (1.0 / (4.0 * PI)).powi(2), 1e-12);
    let (lhs, rhs) = fourth_moment_form(&z(2), &[1.0, 0.0], &[0.0, 1.0], &s(1.0), 1e-13).unwrap();
    close(lhs.value, rhs.value, lhs.err + rhs.err);
}

#[test]
fn sampler_table_probabilities() {
    let t = SamplerTable::new(&coset(z(1), &[0.0]), &s(1.0), 1e-9).unwrap();
    let pr = |w: f64| t.points.iter().position(|p| p[0] == w).map(|i| t.probabilities[i]).unwrap();
    close(pr(0.0), 0.92044178783559098, 1e-12);
    close(pr(1.0), 0.039775896186087627, 1e-12);
    close(pr(-1.0), 0.039775896186087627, 1e-12);
    let t = SamplerTable::new(&coset(z(1), &[0.5]), &s(1.0), 1e-9).unwrap();
    let pr = |w: f64| t.points.iter().position(|p| p[0] == w).map(|i| t.probabilities[i]).unwrap();
    close(pr(0.5), 0.49906801581110899, 1e-12);
    close(pr(-0.5), 0.49906801581110899, 1e-12);
}

#[test]
fn sampler_is_deterministic_and_round_trips() {
    let c = coset(Lattice::from_i64(&[vec![1, 1], vec![1, -1]]).unwrap(), &[0.25, 0.0]);
    let a = sample(&c, &s(1.5), 500, 11, 1e-9).unwrap();
    let b = sample(&c, &s(1.5), 500, 11, 1e-9).unwrap();
    assert_eq!(a.samples, b.samples);
    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    let back = SampleBatch::<f64>::read_csv(&buf[..]).unwrap();
    assert_eq!(back.samples, a.samples);
    assert_eq!(back.coeffs, a.coeffs);
    let e = empirical_moments(&a).unwrap();
    assert_eq!(e.dim(), 2);
}

#[test]
fn sublattice_constructions() {
    let m = sublattice(&z(2), &int_from_i64(&[vec![1, 0], vec![0, 3]])).unwrap();
    assert_eq!(m.index_u64(), Some(3));
    let a = sublattice(&z(2), &int_from_i64(&[vec![1, 0], vec![0, 2]])).unwrap();
    let b = sublattice(&z(2), &int_from_i64(&[vec![2, 0], vec![0, 1]])).unwrap();
    assert_eq!(intersect(&a, &b).unwrap().index_u64(), Some(4));
    let r = quotient_reps(&z(2), &sublattice(&z(2), &int_from_i64(&[vec![2, 0], vec![0, 2]])).unwrap()).unwrap();
    assert_eq!(r.coeffs.len(), 4);
}

#[test]
fn verdicts_on_worked_instances() {
    let v = check_main_inequality(&z(1), &[0.25], &[0.25], &s(1.0), 1e-10).unwrap();
    assert!(v.holds());
    close(v.lhs.mid(), 0.92043536804432470f64.powi(4), 1e-9);
    for v in check_corollaries(&z(1), &[0.5], &[0.5], &s(1.0), 1e-10).unwrap() {
        assert!(v.holds(), "{}", v.name);
    }
    assert!(check_covariance_domination(&z(1), &[0.25], &s(1.0), 1e-10).unwrap().holds());
    assert!(check_hessian_domination(&z(2), &[0.25, 0.0], &s(1.0), 1e-10).unwrap().holds());
    assert!(check_fourth_moment(&z(1), &[1.0], &[1.0], &s(1.0), 1e-10).unwrap().holds());
    let v = check_monotone_s(&z(1), &[0.5], &[1.0, 2.0], 1e-10).unwrap();
    assert!(v.holds());
    let v = check_monotone_sigma(
        &z(2),
        &[0.5, 0.0],
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        &[vec![4.0, 0.0], vec![0.0, 1.0]],
        1e-10,
    )
    .unwrap();
    assert!(v.holds());
    let two = Lattice::from_i64(&[vec![2]]).unwrap();
    let v = check_sublattice_monotone(&z(1), &two, &[0.5], &s(1.0), 1e-10).unwrap();
    assert!(v.holds());
    close(v.lhs.mid(), 0.45678956907805841 / 1.0000069746847124, 1e-9);
}

#[test]
fn campaigns_are_reproducible() {
    let e = InstanceEnsemble::default_campaign(3);
    let checks = [CheckKind::Main, CheckKind::Covariance];
    let a = run_campaign(&e, 20, &checks, 1e-10).unwrap();
    let b = run_campaign(&e, 20, &checks, 1e-10).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.passed);
}
