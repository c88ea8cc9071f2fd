use christoffel::christoffel::ChristoffelEvaluator;
use christoffel::prelude::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn evaluator(cloud: &PointCloud, d: usize) -> ChristoffelEvaluator {
    let basis = GradedBasis::chebyshev(cloud.dim(), d, cloud.default_scale_box()).unwrap();
    let factor = DesignFactor::new(cloud, &basis, Execution::Parallel).unwrap();
    let sp = factor.spectral(d, Normalization::MeanOverN, Threshold::default()).unwrap();
    ChristoffelEvaluator::new(basis, sp).unwrap()
}

fn rotation(a: f64, b: f64) -> [[f64; 3]; 3] {
    let (ca, sa) = (a.cos(), a.sin());
    let (cb, sb) = (b.cos(), b.sin());
    // Rz(a) · Rx(b)
    [[ca, -sa * cb, sa * sb], [sa, ca * cb, -ca * sb], [0.0, sb, cb]]
}

fn apply(r: &[[f64; 3]; 3], x: &[f64]) -> Vec<f64> {
    (0..3).map(|i| (0..3).map(|j| r[i][j] * x[j]).sum()).collect()
}

#[test]
fn rotating_the_sample_rotates_the_christoffel_function() {
    let cloud = sample(&SurfaceSpec::Sphere { p: 3 }, 4000, 12).unwrap();
    let rot = rotation(0.7, -1.1);
    let rotated = cloud.map_points(|x| apply(&rot, x)).unwrap();
    let a = evaluator(&cloud, 4);
    let b = evaluator(&rotated, 4);
    for z in [[0.0, 0.0, 1.0], [0.6, 0.8, 0.0], [0.48, -0.6, 0.64], [0.3, -0.2, 0.5], [1.2, 0.0, 0.1]] {
        let la = a.lambda(&z).unwrap();
        let lb = b.lambda(&apply(&rot, &z)).unwrap();
        // off the sphere only the vanishing value is basis independent
        assert!((la.value - lb.value).abs() <= 1e-9 * la.value.max(1e-12), "{z:?}");
        assert_eq!(la.on_support(DEFAULT_KERNEL_TOL), lb.on_support(DEFAULT_KERNEL_TOL));
    }
}

#[test]
fn basis_choice_does_not_change_lambda() {
    let cloud = sample(&SurfaceSpec::Circle, 3000, 5).unwrap();
    let cheb = evaluator(&cloud, 5);
    let mono_basis = GradedBasis::monomial(2, 5).unwrap();
    let m = MomentMatrix::from_cloud(&cloud, &mono_basis, Normalization::MeanOverN, Execution::Parallel).unwrap();
    let mono = ChristoffelEvaluator::from_moments(&m, Threshold::default()).unwrap();
    for i in 0..40 {
        let t = 0.157 * i as f64;
        let z = [t.cos(), t.sin()];
        let a = cheb.lambda(&z).unwrap().value;
        let b = mono.lambda(&z).unwrap().value;
        assert!((a - b).abs() <= 1e-8 * a, "θ={t}: {a} vs {b}");
    }
}

#[test]
fn uniform_sphere_reference_improves_with_sample_size() {
    let spec = SurfaceSpec::Sphere { p: 3 };
    let grid = make_grid(&spec, (36, 18)).unwrap();
    let worst = |n: usize| {
        let mut total = 0.0;
        for seed in 1..=3 {
            let cloud = sample(&spec, n, seed).unwrap();
            let est = estimate_density(&cloud, &spec, 4, &grid, &DensityOptions::default()).unwrap();
            total += est.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        }
        total / 3.0
    };
    let small = worst(1_000);
    let large = worst(50_000);
    assert!(large < small, "{large} !< {small}");
    assert!(large < 0.1, "{large}");
}

#[test]
fn density_embedding_round_trip() {
    // angles on the bi-torus give the same estimate as pre-embedded points
    let cloud = sample(&SurfaceSpec::BiTorus, 4000, 6).unwrap();
    let angles: Vec<Vec<f64>> = cloud.points().map(|x| vec![x[1].atan2(x[0]), x[3].atan2(x[2])]).collect();
    let embedded = embed_angles(&angles, AngleEmbedding::BiTorus).unwrap();
    let grid = make_grid(&SurfaceSpec::BiTorus, (12, 12)).unwrap();
    let a = estimate_density(&cloud, &SurfaceSpec::BiTorus, 3, &grid, &DensityOptions::default()).unwrap();
    let b = estimate_density(&embedded, &SurfaceSpec::BiTorus, 3, &grid, &DensityOptions::default()).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn needle_polynomial_grid_bounds() {
    for (d, delta) in [(5usize, 0.5), (20, 0.3), (60, 0.15)] {
        let q = needle(d, delta).unwrap();
        assert_eq!(q.degree(), 2 * d);
        assert!((needle_eval(&q, &[0.0, 0.0]) - 1.0).abs() < 1e-12);
        for i in 0..=2000 {
            let t = i as f64 / 2000.0;
            let v = needle_eval(&q, &[t * 0.6, t * 0.8]).abs();
            assert!(v <= 1.0 + 1e-12);
            if t >= delta {
                assert!(v <= q.tail_bound() + 1e-12, "d={d} t={t}: {v}");
            }
        }
    }
}

/// Random PSD matrix `U diag(λ) Uᵀ` with `rank` non-zero eigenvalues in
/// `[0.1, 1]`, and a vector that is either in the range or has a kernel part.
fn instance(s: usize, rank: usize, entries: &[f64], in_kernel: bool) -> (DMatrix<f64>, DVector<f64>) {
    let g = DMatrix::from_fn(s, s, |i, j| entries[(i * s + j) % entries.len()] + if i == j { 3.0 } else { 0.0 });
    let u = g.qr().q();
    let lambdas = DVector::from_fn(s, |j, _| if j < rank { 0.1 + 0.9 * (j as f64 + 1.0) / s as f64 } else { 0.0 });
    let m = &u * DMatrix::from_diagonal(&lambdas) * u.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let mut v = u.columns(0, rank) * DVector::from_fn(rank, |j, _| 1.0 + entries[j % entries.len()]);
    if in_kernel && rank < s {
        v += u.column(rank) * v.norm();
    }
    (m, v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pseudo_inverse_matches_variational_oracle(
        s in 2usize..16,
        rank_frac in 0.1f64..1.0,
        in_kernel in any::<bool>(),
        entries in prop::collection::vec(-1.0f64..1.0, 32),
    ) {
        let rank = ((s as f64 * rank_frac).ceil() as usize).clamp(1, s);
        let (m, v) = instance(s, rank, &entries, in_kernel);
        let basis = GradedBasis::monomial(1, s - 1).unwrap();
        let mm = MomentMatrix::from_entries(m.clone(), basis, 1, Normalization::MeanOverN).unwrap();
        let ev = ChristoffelEvaluator::from_moments(&mm, Threshold::default()).unwrap();
        let ours = ev.lambda_of_vector(&v);
        let oracle = lambda_variational_oracle(&m, &v).unwrap();
        if in_kernel && rank < s {
            prop_assert_eq!(ours.value, 0.0);
            prop_assert!(oracle < 1e-9, "oracle {}", oracle);
        } else {
            prop_assert!((ours.value - oracle).abs() < 1e-6, "{} vs {}", ours.value, oracle);
        }
    }
}
