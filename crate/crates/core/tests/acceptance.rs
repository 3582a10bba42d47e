//! Acceptance suite. Runs every criterion in sequence and prints one
//! `[PASS]` / `[FAIL]` line per criterion; exits non-zero if any fails.
//!
//! Pass criterion numbers to run a subset: `cargo test --test acceptance -- 1 4 8`.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;

use ustat::bootstrap::{quantile_rank, variance_estimators, MultiplierSource, Procedure};
use ustat::combinat::{binomial, IndexSpace};
use ustat::hajek::{self, HajekConfig};
use ustat::infer::{pairwise_independence_test, TestConfig};
use ustat::kernels::{eval_reference, permutations};
use ustat::sim::{
    copula_experiment, fit_timings, gaussian_spearman_rho, run_size_experiment, timing_bench,
    BenchSpec, BudgetRule, ExperimentSpec,
};
use ustat::ustat::{complete_ustat, incomplete_ustat, sample_design};
use ustat::{
    Dataset, Kernel, PairwiseKernel, RankKernel, RngStream, SamplingScheme, SamplingVariant,
};

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn uniform_data(rng: &mut RngStream, n: usize, p: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
        .collect();
    Dataset::from_rows(&rows).unwrap()
}

fn factor_data(rng: &mut RngStream, n: usize, p: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let z: f64 = rng.random();
            (0..p).map(|_| z + 0.5 * rng.random::<f64>()).collect()
        })
        .collect();
    Dataset::from_rows(&rows).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}

/// Full Bernoulli designs reproduce the complete statistic bit for bit.
fn criterion_1() -> Outcome {
    let mut cases = 0;
    for kind in RankKernel::ALL {
        let r = kind.order();
        let mut n = r;
        while binomial(n as u64, r as u64).unwrap() <= 10_000 {
            for seed in 0..10u64 {
                let mut rng = RngStream::new(seed).substream(kind.name(), n as u64);
                let data = uniform_data(&mut rng, n, 3);
                let kernel = PairwiseKernel::new(kind, 3).unwrap();
                let space = IndexSpace::new(n, r).unwrap();
                let scheme = SamplingScheme::bernoulli(space.cardinality() as u64);
                let design = sample_design(&space, &scheme, &mut rng).unwrap();
                let inc = incomplete_ustat(&data, &kernel, &design, false).unwrap();
                let full = complete_ustat(&data, &kernel).unwrap();
                if inc.theta_hat != full {
                    return Err(format!(
                        "{kind} n={n} seed={seed}: {:?} vs {:?}",
                        inc.theta_hat, full
                    ));
                }
                cases += 1;
            }
            n += 1;
        }
    }
    Ok(format!("{cases} (kernel, n, seed) cases identical"))
}

/// DC with one block of n-1 and the full RS design both match the jackknife.
fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for kind in [RankKernel::Kendall, RankKernel::Spearman] {
        for n in (4..=40).step_by(4) {
            let mut rng = RngStream::new(n as u64).substream(kind.name(), 0);
            let data = uniform_data(&mut rng, n, 3);
            let kernel = PairwiseKernel::new(kind, 3).unwrap();
            let r = kind.order();
            let jack = hajek::jackknife_oracle(&data, &kernel, None).unwrap();
            let dc = hajek::estimate_dc(&data, &kernel, &HajekConfig::dc().with_blocks(1, n - 1))
                .unwrap();
            let m = binomial(n as u64 - 1, r as u64 - 1).unwrap() as u64;
            let rs = hajek::estimate_rs(
                &data,
                &kernel,
                &HajekConfig::rs().with_rs_budget(m),
                &mut rng,
            )
            .unwrap();
            for other in [&dc, &rs] {
                for (a, b) in jack.g_hat.iter().zip(&other.g_hat) {
                    let err = (a - b).abs() / a.abs().max(1e-300);
                    if a != b {
                        worst = worst.max(err);
                    }
                    if !rel_close(*a, *b, 1e-12) {
                        return Err(format!("{kind} n={n}: {a} vs {b}"));
                    }
                }
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} cases, worst relative gap {worst:.2e}"))
}

fn covariance_check(src: &MultiplierSource, label: &str, seed: u64) -> Result<usize, String> {
    let d = src.dim();
    let target = src.covariance();
    let root = RngStream::new(seed);
    let reps = 10_000;
    let draws: Vec<Vec<f64>> = (0..reps)
        .map(|i| src.draw(&mut root.substream(label, i)))
        .collect();
    let means: Vec<f64> = (0..d)
        .map(|j| draws.iter().map(|v| v[j]).sum::<f64>() / reps as f64)
        .collect();
    let mut checked = 0;
    for j in 0..d {
        for k in 0..d {
            let t = target[j * d + k];
            if t.abs() <= 0.01 {
                continue;
            }
            let c = draws
                .iter()
                .map(|v| (v[j] - means[j]) * (v[k] - means[k]))
                .sum::<f64>()
                / (reps - 1) as f64;
            if (c - t).abs() > 0.1 * t.abs() {
                return Err(format!(
                    "{label} entry ({j},{k}): sample {c:.4} vs closed form {t:.4}"
                ));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Sample covariances of U_B# and U_A# match their closed forms.
fn criterion_3() -> Outcome {
    let mut rng = RngStream::new(3);
    let data = factor_data(&mut rng, 60, 4);
    let kernel = PairwiseKernel::new(RankKernel::Spearman, 4).unwrap();
    let u = ustat::ustat::estimate(
        &data,
        &kernel,
        &SamplingScheme::bernoulli(150),
        &mut rng,
        true,
    )
    .unwrap();
    let h = hajek::estimate_dc(&data, &kernel, &HajekConfig::dc()).unwrap();
    let ub = MultiplierSource::ub(&u).map_err(|e| e.to_string())?;
    let ua = MultiplierSource::ua(&h, kernel.order());
    let nb = covariance_check(&ub, "ub", 31)?;
    let na = covariance_check(&ua, "ua", 32)?;
    let sig = variance_estimators(&u, Some(&h), kernel.order(), 0.4).map_err(|e| e.to_string())?;
    let cov = ub.covariance();
    let d = ub.dim();
    let diag: Vec<f64> = (0..d).map(|j| cov[j * d + j]).collect();
    check(
        sig.sigma_b_sq.as_ref() == Some(&diag),
        format!("d = {d}, {nb} U_B# and {na} U_A# entries within 10%, sigma_B^2 equals the analytic diagonal"),
    )
}

/// Exceedance of the Bernstein envelope for N^ at t = 3.
fn criterion_4() -> Outcome {
    let space = IndexSpace::new(20, 2).unwrap();
    let scheme = SamplingScheme::bernoulli(50);
    let root = RngStream::new(4);
    let (t, n) = (3.0_f64, 50.0_f64);
    let envelope = (2.0 * t / n).sqrt() + 2.0 * t / (3.0 * n);
    let reps = 10_000;
    let exceed = (0..reps)
        .filter(|&i| {
            let d = sample_design(&space, &scheme, &mut root.substream("rep", i)).unwrap();
            (d.n_hat() as f64 / n - 1.0).abs() > envelope
        })
        .count() as f64
        / reps as f64;
    check(
        exceed <= 0.12,
        format!(
            "exceedance {exceed:.4} (limit 0.12, bound {:.4})",
            2.0 * (-3.0f64).exp()
        ),
    )
}

/// Uniform error-in-size at desk scale.
fn criterion_5() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let configs = [
        (
            RankKernel::Spearman,
            Procedure::MbNdgDc,
            30,
            BudgetRule::linear(2.0),
            0.03,
        ),
        (
            RankKernel::Spearman,
            Procedure::MbNdgRs,
            30,
            BudgetRule::linear(2.0),
            0.03,
        ),
        (
            RankKernel::BergsmaDassios,
            Procedure::MbDg,
            10,
            BudgetRule::power(1.0, 4.0 / 3.0),
            0.06,
        ),
    ];
    for (i, (kind, proc_, p, rule, limit)) in configs.into_iter().enumerate() {
        let mut spec = ExperimentSpec::new(kind, 300, p, rule, 500, 500 + i as u64);
        spec.test = spec.test.clone().with_procedure(proc_).with_replicates(200);
        let t = Instant::now();
        let rep = run_size_experiment(&spec).map_err(|e| e.to_string())?;
        ok &= rep.uniform_error <= limit;
        lines.push(format!(
            "{kind}/{proc_} p={p}: {:.4} (limit {limit}, R(0.05)={:.3}, {:.0}s)",
            rep.uniform_error,
            rep.rate(0.05).unwrap_or(f64::NAN),
            t.elapsed().as_secs_f64()
        ));
    }
    check(ok, format!("uniform error {}", lines.join("; ")))
}

/// Monte Carlo value of 12 Cov(Phi(X), Phi(Y)) for a standard Gaussian pair.
fn monte_carlo_rho(a: f64, draws: u64, seed: u64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let phi = Normal::standard();
    let mut rng = RngStream::new(seed);
    let b = (1.0 - a * a).sqrt();
    let (mut su, mut sv, mut suv) = (0.0, 0.0, 0.0);
    for _ in 0..draws {
        let x: f64 = rng.sample(rand_distr::StandardNormal);
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let (u, v) = (phi.cdf(x), phi.cdf(a * x + b * z));
        su += u;
        sv += v;
        suv += u * v;
    }
    let m = draws as f64;
    12.0 * (suv / m - (su / m) * (sv / m))
}

/// Copula point estimate and the variance ordering of the normalizations.
fn criterion_6() -> Outcome {
    let s = copula_experiment(0.9, 300, 600, 500, 6).map_err(|e| e.to_string())?;
    let theta0 = gaussian_spearman_rho(0.9);
    let mc = monte_carlo_rho(0.9, 10_000_000, 61);
    if (mc - theta0).abs() > 1e-3 {
        return Err(format!(
            "closed form {theta0:.5} disagrees with Monte Carlo {mc:.5}"
        ));
    }
    let within = (s.random.mean - theta0).abs() <= 3.0 * s.random.std_error;
    let ordered = s.deterministic.variance > s.random.variance;
    check(
        within && ordered,
        format!(
            "mean {:.5} vs {theta0:.5} (3 SE = {:.5}); var det {:.3e} > var rand {:.3e}",
            s.random.mean,
            3.0 * s.random.std_error,
            s.deterministic.variance,
            s.random.variance
        ),
    )
}

/// Log-log timing slopes.
fn criterion_7() -> Outcome {
    let synthetic =
        fit_timings(&[300, 600, 1200], 30, 3, |n| Ok(2e-8 * (n as f64).powi(2))).unwrap();
    if (synthetic.slope - 2.0).abs() > 1e-3 {
        return Err(format!("synthetic slope {}", synthetic.slope));
    }
    let ns = vec![300, 600, 1200];
    let ndg = BenchSpec {
        ns: ns.clone(),
        p: 30,
        kernel: RankKernel::Spearman,
        sampling: SamplingVariant::BernoulliRandomNorm,
        budget: BudgetRule::linear(2.0),
        test: TestConfig::default().with_procedure(Procedure::MbNdgDc),
        runs: 3,
        seed: 7,
        parallel: false,
    };
    let dg = BenchSpec {
        kernel: RankKernel::BergsmaDassios,
        budget: BudgetRule::power(1.0, 4.0 / 3.0),
        test: TestConfig::default().with_procedure(Procedure::MbDg),
        ..ndg.clone()
    };
    let a = timing_bench(&ndg).map_err(|e| e.to_string())?;
    let b = timing_bench(&dg).map_err(|e| e.to_string())?;
    let secs = |r: &ustat::sim::TimingReport| {
        r.points
            .iter()
            .map(|q| format!("{:.2}", q.seconds))
            .collect::<Vec<_>>()
            .join("/")
    };
    check(
        (1.6..=2.2).contains(&a.slope) && (1.1..=1.5).contains(&b.slope),
        format!(
            "synthetic {:.4}; MB-NDG-DC {:.3} ({}s); MB-DG {:.3} ({}s)",
            synthetic.slope,
            a.slope,
            secs(&a),
            b.slope,
            secs(&b)
        ),
    )
}

fn run_props(
    name: &str,
    cases: u32,
    test: impl Fn(&mut TestRunner) -> Result<(), String>,
) -> Result<String, String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    test(&mut runner).map_err(|e| format!("{name}: {e}"))?;
    Ok(name.to_owned())
}

/// Property suites.
fn criterion_8() -> Outcome {
    let grid = |r: usize, p: usize| {
        prop::collection::vec(prop::collection::vec((-3i32..4).prop_map(f64::from), p), r)
    };
    let kinds = prop::sample::select(RankKernel::ALL.to_vec());
    let mut done = Vec::new();

    done.push(run_props("kernel symmetry", 64, |runner| {
        runner
            .run(&(kinds.clone(), grid(5, 3)), |(kind, obs)| {
                let k = PairwiseKernel::new(kind, 3).unwrap();
                let base: Vec<&[f64]> = obs
                    .iter()
                    .take(kind.order())
                    .map(|v| v.as_slice())
                    .collect();
                let mut expect = vec![0.0; 3];
                k.eval(&base, &mut expect);
                for pi in permutations(kind.order()) {
                    let args: Vec<&[f64]> = pi.iter().map(|&i| base[i]).collect();
                    let mut out = vec![0.0; 3];
                    k.eval(&args, &mut out);
                    prop_assert_eq!(&out, &expect);
                }
                Ok(())
            })
            .map_err(|e| e.to_string())
    })?);

    done.push(run_props(
        "kernel boundedness and reference agreement",
        256,
        |runner| {
            runner
                .run(&(kinds.clone(), grid(5, 4)), |(kind, obs)| {
                    let k = PairwiseKernel::new(kind, 4).unwrap();
                    let args: Vec<&[f64]> = obs
                        .iter()
                        .take(kind.order())
                        .map(|v| v.as_slice())
                        .collect();
                    let mut out = vec![0.0; 6];
                    k.eval(&args, &mut out);
                    prop_assert!(out.iter().all(|v| v.abs() <= kind.bound()));
                    prop_assert_eq!(out, eval_reference(kind, &args).unwrap());
                    Ok(())
                })
                .map_err(|e| e.to_string())
        },
    )?);

    done.push(run_props("rank invariance", 64, |runner| {
        let obs = prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 5);
        runner
            .run(&(kinds.clone(), obs, 0usize..3), |(kind, obs, col)| {
                let k = PairwiseKernel::new(kind, 3).unwrap();
                let moved: Vec<Vec<f64>> = obs
                    .iter()
                    .map(|x| {
                        let mut y = x.clone();
                        y[col] = y[col].exp() * 3.0 + 1.0;
                        y
                    })
                    .collect();
                let a: Vec<&[f64]> = obs
                    .iter()
                    .take(kind.order())
                    .map(|v| v.as_slice())
                    .collect();
                let b: Vec<&[f64]> = moved
                    .iter()
                    .take(kind.order())
                    .map(|v| v.as_slice())
                    .collect();
                let (mut x, mut y) = (vec![0.0; 3], vec![0.0; 3]);
                k.eval(&a, &mut x);
                k.eval(&b, &mut y);
                prop_assert_eq!(x, y);
                Ok(())
            })
            .map_err(|e| e.to_string())
    })?);

    done.push(run_props("unrank bijection", 256, |runner| {
        runner
            .run(&(1usize..60, 1usize..7, any::<u64>()), |(n, r, raw)| {
                prop_assume!(r <= n);
                let s = IndexSpace::new(n, r).unwrap();
                let rank = raw as u128 % s.cardinality();
                let t = s.unrank(rank).unwrap();
                prop_assert_eq!(s.rank(t.as_slice()).unwrap(), rank);
                if rank + 1 < s.cardinality() {
                    prop_assert!(t.as_slice() < s.unrank(rank + 1).unwrap().as_slice());
                }
                Ok(())
            })
            .map_err(|e| e.to_string())
    })?);

    done.push(run_props("quantile monotonicity", 256, |runner| {
        runner
            .run(
                &(
                    prop::collection::vec(-5.0f64..5.0, 1..300),
                    0.001f64..0.999,
                    0.001f64..0.999,
                ),
                |(v, a, b)| {
                    let mut s = v.clone();
                    s.sort_by(f64::total_cmp);
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    prop_assert!(s[quantile_rank(lo, s.len())] >= s[quantile_rank(hi, s.len())]);
                    Ok(())
                },
            )
            .map_err(|e| e.to_string())
    })?);

    done.push(run_props("normalization identity", 64, |runner| {
        runner
            .run(&(any::<u64>(), 10usize..40), |(seed, n)| {
                let mut rng = RngStream::new(seed);
                let data = uniform_data(&mut rng, n, 3);
                let kernel = PairwiseKernel::new(RankKernel::Spearman, 3).unwrap();
                let space = IndexSpace::new(n, 3).unwrap();
                let budget = (2 * n) as u64;
                let scheme =
                    SamplingScheme::new(SamplingVariant::BernoulliDeterministicNorm, budget);
                let design = sample_design(&space, &scheme, &mut rng).unwrap();
                let det = incomplete_ustat(&data, &kernel, &design, false).unwrap();
                let ratio = design.n_hat() as f64 / budget as f64;
                for (d, r) in det.theta_hat.iter().zip(&det.sample_mean) {
                    prop_assert!((d - r * ratio).abs() <= 1e-13 * (1.0 + d.abs()));
                }
                Ok(())
            })
            .map_err(|e| e.to_string())
    })?);

    // Seed determinism across thread counts.
    let mut rng = RngStream::new(8);
    let data = uniform_data(&mut rng, 60, 5);
    for kind in RankKernel::ALL {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    pairwise_independence_test(
                        &data,
                        kind,
                        &SamplingScheme::bernoulli(200),
                        &TestConfig::default().with_replicates(50),
                        &RngStream::new(80),
                    )
                    .unwrap()
                })
        };
        if run(1) != run(3) {
            return Err(format!("{kind}: results differ between 1 and 3 threads"));
        }
    }
    done.push("thread-count determinism".into());
    Ok(done.join(", "))
}

fn main() {
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [Criterion; 8] = [
        (1, "oracle equivalence", criterion_1),
        (2, "jackknife equivalences", criterion_2),
        (3, "conditional covariance identities", criterion_3),
        (4, "N-hat concentration", criterion_4),
        (5, "size at desk scale", criterion_5),
        (6, "copula point estimate", criterion_6),
        (7, "timing slopes", criterion_7),
        (8, "property suites", criterion_8),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {id} ({name}, {secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {id} ({name}, {secs:.1}s): {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
