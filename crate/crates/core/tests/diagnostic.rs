use std::sync::atomic::{AtomicU64, Ordering};

use splitsgd::diagnostic::SplitThreads;
use splitsgd::objectives::make_default_spec;
use splitsgd::rng::StreamRng;
use splitsgd::{
    decide, run_diagnostic, Bench, DiagConfig, Family, GradientOracle, Kernel, ParamVec,
    ParamVector, Result, RngStream, Sample, StartPoint,
};

fn bench() -> Bench {
    Bench::new(make_default_spec(Family::Linear)).unwrap()
}

/// Counts oracle calls and forwards them.
struct Counting<'a, O> {
    inner: &'a O,
    calls: AtomicU64,
}

impl<O: GradientOracle<f64>> GradientOracle<f64> for Counting<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn draw(&self, theta: &ParamVec, rng: &mut StreamRng, out: &mut Sample) -> Result<()> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.draw(theta, rng, out)
    }
}

/// Multiplies every gradient by a constant.
struct Scaled<'a, O> {
    inner: &'a O,
    factor: f64,
}

impl<O: GradientOracle<f64>> GradientOracle<f64> for Scaled<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn draw(&self, theta: &ParamVec, rng: &mut StreamRng, out: &mut Sample) -> Result<()> {
        self.inner.draw(theta, rng, out)?;
        out.gradient = ParamVector::from_fn(out.gradient.dim(), |j| self.factor * out.gradient[j])?;
        Ok(())
    }
}

/// The stationarity rule written out term by term.
fn literal_rule(signs: &[i8], q: f64) -> (bool, f64) {
    let mut count = 0.0;
    for &s in signs {
        count += (1.0 - s as f64) / 2.0;
    }
    (count >= q * signs.len() as f64, count)
}

#[test]
fn decide_agrees_with_literal_rule_on_all_sign_patterns() {
    let values = [-0.7, 0.0, 2.3];
    for w in 1..=6u32 {
        for code in 0..3usize.pow(w) {
            let mut c = code;
            let mut signs = Vec::new();
            let mut coherences = Vec::new();
            for _ in 0..w {
                signs.push((c % 3) as i8 - 1);
                coherences.push(values[c % 3]);
                c /= 3;
            }
            for q in [0.0, 0.25, 0.4, 0.5, 1.0] {
                assert_eq!(
                    decide(&coherences, q),
                    literal_rule(&signs, q),
                    "w={w} code={code} q={q}"
                );
            }
        }
    }
}

#[test]
fn diagnostic_uses_exactly_two_wl_oracle_calls() {
    let b = bench();
    for (w, l) in [(20, 50), (3, 7), (1, 1)] {
        let counting = Counting {
            inner: &b.problem,
            calls: AtomicU64::new(0),
        };
        let cfg = DiagConfig {
            eta: 1e-3,
            windows: w,
            window_len: l,
            q: 0.4,
        };
        let theta = b.start(StartPoint::Reversed, &RngStream::new(1, 0));
        let res = run_diagnostic(
            &counting,
            &theta,
            cfg,
            &Kernel::plain(20),
            &RngStream::new(2, 0),
        )
        .unwrap();
        assert_eq!(counting.calls.load(Ordering::Relaxed), 2 * (w * l) as u64);
        assert_eq!(res.coherences.len(), w);
    }
}

#[test]
fn swapping_thread_streams_keeps_the_result() {
    let b = bench();
    let cfg = DiagConfig {
        eta: 1e-2,
        windows: 10,
        window_len: 20,
        q: 0.4,
    };
    let theta = b.start(StartPoint::NearOptimum, &RngStream::new(3, 0));
    let s = RngStream::new(4, 0);
    let run = |streams: [RngStream; 2]| {
        SplitThreads::with_streams(&b.problem, &theta, cfg, &Kernel::plain(20), streams)
            .unwrap()
            .finish()
            .unwrap()
    };
    let ab = run([s.fork(1), s.fork(2)]);
    let ba = run([s.fork(2), s.fork(1)]);
    assert_eq!(ab.coherences, ba.coherences);
    assert_eq!(ab.stationary, ba.stationary);
    assert_eq!(ab.negative_count, ba.negative_count);
    for j in 0..20 {
        assert!((ab.theta_d[j] - ba.theta_d[j]).abs() <= 1e-12 * ab.theta_d[j].abs().max(1.0));
    }
}

#[test]
fn positive_gradient_scaling_keeps_the_verdict() {
    let b = bench();
    let theta = b.start(StartPoint::NearOptimum, &RngStream::new(5, 0));
    let base = DiagConfig {
        eta: 2e-3,
        windows: 20,
        window_len: 50,
        q: 0.4,
    };
    for c in [0.25, 4.0] {
        let scaled = Scaled {
            inner: &b.problem,
            factor: c,
        };
        let cfg = DiagConfig {
            eta: base.eta / c,
            ..base
        };
        let plain = run_diagnostic(
            &b.problem,
            &theta,
            base,
            &Kernel::plain(20),
            &RngStream::new(6, 0),
        )
        .unwrap();
        let scaled = run_diagnostic(
            &scaled,
            &theta,
            cfg,
            &Kernel::plain(20),
            &RngStream::new(6, 0),
        )
        .unwrap();
        assert_eq!(plain.stationary, scaled.stationary);
        assert_eq!(plain.negative_count, scaled.negative_count);
        for (p, s) in plain.coherences.iter().zip(&scaled.coherences) {
            assert!((s - c * c * p).abs() <= 1e-9 * (c * c * p).abs().max(1e-12));
        }
    }
}

#[test]
fn noiseless_oracle_never_reports_stationarity() {
    let b = bench();
    let noiseless = b.problem.noiseless();
    let cfg = DiagConfig {
        eta: 1e-2,
        windows: 20,
        window_len: 50,
        q: 0.05,
    };
    for r in 0..5 {
        let theta = b.start(StartPoint::Reversed, &RngStream::new(7, r));
        let res = run_diagnostic(
            &noiseless,
            &theta,
            cfg,
            &Kernel::plain(20),
            &RngStream::new(8, r),
        )
        .unwrap();
        assert!(!res.stationary);
        assert!(res.coherences.iter().all(|&q| q >= 0.0));
    }
}

/// Transient regime near the optimum: the share of negative coherences stays
/// far below the fair-coin level of the stationary phase.
#[test]
fn small_rate_near_optimum_has_few_negative_coherences() {
    let b = bench();
    let cfg = DiagConfig {
        eta: 1e-4,
        windows: 20,
        window_len: 50,
        q: 0.4,
    };
    let mut fraction = 0.0;
    let reps = 500;
    for r in 0..reps {
        let theta = b.start(StartPoint::NearOptimum, &RngStream::new(9, r));
        let res = run_diagnostic(
            &b.problem,
            &theta,
            cfg,
            &Kernel::plain(20),
            &RngStream::new(10, r),
        )
        .unwrap();
        fraction += res.negative_count / 20.0;
    }
    fraction /= reps as f64;
    assert!(fraction < 0.15, "mean negative fraction {fraction}");
}
