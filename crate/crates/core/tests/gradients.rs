use rand::Rng;
use splitsgd::objectives::make_default_spec;
use splitsgd::{
    Bench, Family, GradientOracle, ParamVec, ParamVector, Problem, Regression32, RngStream,
};

fn bench(family: Family) -> Bench {
    Bench::new(make_default_spec(family)).unwrap()
}

fn random_theta(d: usize, stream: &RngStream) -> ParamVec {
    let mut rng = stream.rng();
    ParamVector::from_fn(d, |_| rng.random_range(-5.0..5.0)).unwrap()
}

fn finite_difference(problem: &Problem<f64>, theta: &ParamVec, h: f64) -> ParamVec {
    ParamVector::from_fn(theta.dim(), |j| {
        let mut plus = theta.clone().into_vec();
        let mut minus = plus.clone();
        plus[j] += h;
        minus[j] -= h;
        let fp = problem.full_loss(&ParamVector::new(plus).unwrap()).unwrap();
        let fm = problem
            .full_loss(&ParamVector::new(minus).unwrap())
            .unwrap();
        (fp - fm) / (2.0 * h)
    })
    .unwrap()
}

fn relative_error(a: &ParamVec, b: &ParamVec) -> f64 {
    let diff = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    diff / b.max_abs().max(1e-12)
}

#[test]
fn full_gradient_matches_central_differences() {
    for family in [Family::Linear, Family::Logistic] {
        let b = bench(family);
        let mut worst: f64 = 0.0;
        for k in 0..100 {
            let theta = random_theta(20, &RngStream::new(11, k));
            let fd = finite_difference(&b.problem, &theta, 1e-6);
            let g = b.problem.full_gradient(&theta).unwrap();
            worst = worst.max(relative_error(&fd, &g));
        }
        assert!(worst <= 1e-6, "{family}: relative error {worst:e}");
    }
}

#[test]
fn per_datum_gradients_average_to_full_gradient() {
    for family in [Family::Linear, Family::Logistic] {
        let b = bench(family);
        let n = b.problem.dataset().n();
        for k in 0..10 {
            let theta = random_theta(20, &RngStream::new(12, k));
            let mut mean = [0.0; 20];
            for i in 0..n {
                let g = b.problem.datum_gradient(i, &theta).unwrap();
                for (m, x) in mean.iter_mut().zip(g.iter()) {
                    *m += x;
                }
            }
            let mean = ParamVector::from_fn(20, |j| mean[j] / n as f64).unwrap();
            let full = b.problem.full_gradient(&theta).unwrap();
            let err = relative_error(&mean, &full);
            assert!(err <= 1e-12, "{family}: relative error {err:e}");
        }
    }
}

#[test]
fn stochastic_draws_are_datum_gradients() {
    let b = bench(Family::Logistic);
    let theta = random_theta(20, &RngStream::new(13, 0));
    let mut rng = RngStream::new(13, 1).rng();
    for _ in 0..50 {
        let g = b.problem.stochastic_gradient(&theta, &mut rng).unwrap();
        let n = b.problem.dataset().n();
        assert!((0..n).any(|i| b.problem.datum_gradient(i, &theta).unwrap() == g.gradient));
    }
}

#[test]
fn single_precision_problem_tracks_double() {
    let spec64 = make_default_spec::<f64>(Family::Linear);
    let data64 = splitsgd::objectives::generate(&spec64).unwrap();
    let features: Vec<f32> = (0..data64.n())
        .flat_map(|i| data64.row(i).iter().map(|&x| x as f32))
        .collect();
    let targets: Vec<f32> = data64.targets().iter().map(|&y| y as f32).collect();
    let data32 = splitsgd::Dataset::new(data64.n(), data64.d(), features, targets).unwrap();
    let p32 = Regression32::new(data32, Family::Linear).unwrap();
    let p64 = Problem::new(data64, Family::Linear).unwrap();
    let theta64 = random_theta(20, &RngStream::new(14, 0));
    let theta32 = ParamVector::from_fn(20, |j| theta64[j] as f32).unwrap();
    let g64 = p64.full_gradient(&theta64).unwrap();
    let g32 = p32.full_gradient(&theta32).unwrap().to_f64();
    assert!(relative_error(&g32, &g64) < 1e-4);
}
