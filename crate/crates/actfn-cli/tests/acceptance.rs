//! Acceptance run: one `criterion N: PASS|FAIL` line per criterion, with the
//! failing sub-checks listed beneath. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use actfn::catalog::{default_params, value, Kind, ParamSet};
use actfn::composite::{Composite, HullKind, Leaf};
use actfn::experiments::{self, ClassificationConfig, LandscapeConfig, RegressionConfig};
use actfn::gradients;
use actfn::special::golden_min;
use actfn::stochastic::{neg_prob, neg_prob_monte_carlo, EvalContext};
use actfn::vector_ops::{maxout, softmax, softmax_jacobian, MaxoutUnit};
use actfn::Activation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sub-check results for one criterion.
#[derive(Default)]
struct Outcome {
    notes: Vec<String>,
    failures: Vec<String>,
}

impl Outcome {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if ok {
            self.notes.push(what.into());
        } else {
            self.failures.push(what.into());
        }
    }
}

fn params(kind: Kind, set: &[(&str, f64)]) -> ParamSet {
    set.iter()
        .fold(default_params(kind), |p, (n, v)| p.with(n, *v).expect("parameter exists"))
}

fn f(kind: Kind, p: &ParamSet, x: f64) -> f64 {
    value(kind, p.values(), x)
}

fn d_dx(act: &Activation, x: f64) -> f64 {
    let mut dp = vec![0.0; act.n_params()];
    act.grad(x, None, 0.0, &mut dp).1
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

fn c1() -> Outcome {
    let mut o = Outcome::default();
    let t = Instant::now();
    let reports = gradients::check_all(-5.0, 5.0, 1000, 1e-5, false);
    let secs = t.elapsed().as_secs_f64();
    let worst = reports.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    for r in reports.iter().filter(|r| !r.pass) {
        o.failures.push(format!("{} max_rel_err {:.3e} at x={} ({})", r.label, r.max_rel_err, r.worst_x, r.worst_component));
    }
    o.check(
        reports.iter().all(|r| r.pass),
        format!("{} targets, worst rel err {worst:.2e}", reports.len()),
    );
    o.check(secs < 60.0, format!("single-threaded sweep took {secs:.1} s (budget 60 s)"));
    o
}

fn c2() -> Outcome {
    let mut o = Outcome::default();
    let silu = default_params(Kind::Silu);
    let (xm, ym) = golden_min(|x| f(Kind::Silu, &silu, x), -3.0, 0.0);
    o.check((ym + 0.28).abs() <= 0.01 && (xm + 1.28).abs() <= 0.02, format!("SiLU min {ym:.5} at {xm:.5}"));

    let rs = default_params(Kind::ReSech);
    let (xmax, _) = golden_min(|x| -f(Kind::ReSech, &rs, x), 0.0, 3.0);
    let (xmin, _) = golden_min(|x| f(Kind::ReSech, &rs, x), -3.0, 0.0);
    o.check(
        (xmax - 1.19968).abs() <= 1e-3 && (xmin + 1.19968).abs() <= 1e-3,
        format!("ReSech extrema at {xmin:.5}, {xmax:.5}"),
    );

    let ds = default_params(Kind::Dsilu);
    let (xhi, yhi) = golden_min(|x| -f(Kind::Dsilu, &ds, x), 0.0, 5.0);
    let (xlo, ylo) = golden_min(|x| f(Kind::Dsilu, &ds, x), -5.0, 0.0);
    let yhi = -yhi;
    o.check(
        (yhi - 1.1).abs() <= 0.02 && (ylo + 0.1).abs() <= 0.02 && (xhi - 2.4).abs() <= 0.02 && (xlo + 2.4).abs() <= 0.02,
        format!("DSiLU max {yhi:.4} at {xhi:.4}, min {ylo:.4} at {xlo:.4}"),
    );

    let mish = default_params(Kind::Mish);
    let (xmi, ymi) = golden_min(|x| f(Kind::Mish, &mish, x), -3.0, 0.0);
    o.check((ymi + 0.31).abs() <= 0.01, format!("Mish infimum {ymi:.5} at {xmi:.4}"));

    let s = softmax(&[2.0, 1.0, 0.1]).expect("non-empty");
    let want = [0.659001, 0.242433, 0.0985659];
    let err = s.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    o.check(err <= 1e-6, format!("softmax([2, 1, 0.1]) = {s:.7?} (max err {err:.1e})"));
    o
}

fn c3() -> Outcome {
    let mut o = Outcome::default();
    let printed = [0.00, 0.00, 0.04, 0.62, 2.28, 4.78, 7.66, 10.56, 13.33, 15.87];
    let mut rng = EvalContext::train(2024);
    let mut worst = 0.0f64;
    for (i, pct) in printed.iter().enumerate() {
        let sigma = 0.1 * (i + 1) as f64;
        let exact = 100.0 * neg_prob(sigma).expect("sigma > 0");
        let mc = 100.0 * neg_prob_monte_carlo(sigma, 1_000_000, rng.rng());
        let e = (exact - pct).abs().max((mc - pct).abs());
        worst = worst.max(e);
        if e > 0.3 {
            o.failures.push(format!("sigma {sigma:.1}: exact {exact:.3}%, MC {mc:.3}%, printed {pct}%"));
        }
    }
    o.check(o.failures.is_empty(), format!("10 rows, worst deviation {worst:.3} pp"));
    o
}

fn c4() -> Outcome {
    let mut o = Outcome::default();
    // PSF: strictly increasing (positive analytic slope, non-decreasing values) and saturating.
    for m in [0.1, 1.0, 5.0, 50.0] {
        let act = Activation::with_params(Kind::Psf, params(Kind::Psf, &[("m", m)])).expect("valid m");
        let xs: Vec<f64> = grid(-50.0, 50.0, 20001).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| act.value(x)).collect();
        // Where the value itself underflows the slope cannot be positive in f64.
        let slope_ok = xs.iter().zip(&vals).all(|(&x, &v)| v < f64::MIN_POSITIVE || d_dx(&act, x) > 0.0);
        let nondecr = vals.windows(2).all(|w| w[1] >= w[0]);
        o.check(slope_ok && nondecr, format!("PSF m={m} monotone on [-50, 50]"));
        let (hi, lo) = (act.value(50.0), act.value(-50.0));
        o.check(hi > 1.0 - 1e-9, format!("PSF m={m} at 50 = {hi:.3e}"));
        o.check(lo < 1e-9, format!("PSF m={m} at -50 = {lo:.3e}"));
    }

    // LiSHT: derivative has no sign change away from the origin.
    let lisht = Activation::from(Kind::Lisht);
    let mut roots = Vec::new();
    for (a, b) in [(-10.0, -1e-6), (1e-6, 10.0)] {
        let xs: Vec<f64> = grid(a, b, 100_001).collect();
        for w in xs.windows(2) {
            let (fa, fb) = (d_dx(&lisht, w[0]), d_dx(&lisht, w[1]));
            if fa == 0.0 || fa.signum() != fb.signum() {
                let (mut l, mut r) = (w[0], w[1]);
                for _ in 0..60 {
                    let m = 0.5 * (l + r);
                    if d_dx(&lisht, l).signum() == d_dx(&lisht, m).signum() {
                        l = m;
                    } else {
                        r = m;
                    }
                }
                roots.push(0.5 * (l + r));
            }
        }
    }
    o.check(roots.is_empty(), format!("LiSHT derivative roots away from 0: {roots:?}"));
    o.check(d_dx(&lisht, 0.0) == 0.0, "LiSHT derivative vanishes at 0");

    // Softmax Jacobian against central differences.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let z: Vec<f64> = (0..5).map(|_| rng.random_range(-4.0..4.0)).collect();
        let j = softmax_jacobian(&z).expect("non-empty");
        let h = 1e-6;
        for k in 0..z.len() {
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[k] += h;
            zm[k] -= h;
            let (sp, sm) = (softmax(&zp).expect("non-empty"), softmax(&zm).expect("non-empty"));
            for i in 0..z.len() {
                worst = worst.max((j[i][k] - (sp[i] - sm[i]) / (2.0 * h)).abs());
            }
        }
    }
    o.check(worst <= 1e-6, format!("softmax Jacobian vs central differences: max err {worst:.2e}"));

    // Affine hulls of identity-like bases with coefficients summing to 1.
    let bases = [Kind::Identity, Kind::Tanh, Kind::Elu, Kind::Softsign];
    let mut bad = 0;
    for _ in 0..100 {
        let mut c: Vec<f64> = (0..bases.len() - 1).map(|_| rng.random_range(-3.0..3.0)).collect();
        c.push(1.0 - c.iter().sum::<f64>());
        let act = Activation::Composite(Composite::Hull {
            hull: HullKind::Affine,
            bases: bases.iter().map(|&k| Leaf::new(k)).collect(),
            coeffs: c,
        });
        if act.value(0.0).abs() > 1e-10 || (d_dx(&act, 0.0) - 1.0).abs() > 1e-10 {
            bad += 1;
        }
    }
    o.check(bad == 0, format!("affine hulls with f(0)=0, f'(0)=1: {} of 100", 100 - bad));
    o
}

fn c5() -> Outcome {
    let mut o = Outcome::default();
    let xs: Vec<f64> = grid(-10.0, 10.0, 2001).collect();
    let mut same = |label: &str, a: &dyn Fn(f64) -> f64, b: &dyn Fn(f64) -> f64| {
        let err = xs.iter().map(|&x| (a(x) - b(x)).abs()).fold(0.0, f64::max);
        o.check(err <= 1e-12, format!("{label} (max diff {err:.1e})"));
    };
    let relu = default_params(Kind::Relu);
    let lrelu = |a: f64| params(Kind::LeakyRelu, &[("alpha", a)]);
    let elu = default_params(Kind::Elu);

    let mp11 = params(Kind::Mpelu, &[("alpha", 1.0), ("beta", 1.0)]);
    same("MPELU(1, 1) = ELU(1)", &|x| f(Kind::Mpelu, &mp11, x), &|x| f(Kind::Elu, &elu, x));
    let mp0 = params(Kind::Mpelu, &[("alpha", 0.0)]);
    same("MPELU(alpha=0) = ReLU", &|x| f(Kind::Mpelu, &mp0, x), &|x| f(Kind::Relu, &relu, x));
    let sr = params(Kind::SShapedRelu, &[("a", 1.0), ("l", 0.0), ("b", 0.0)]);
    same("SShapedReLU(a=1, l=0, b=0) = ReLU", &|x| f(Kind::SShapedRelu, &sr, x), &|x| f(Kind::Relu, &relu, x));
    let srl = params(Kind::SShapedRelu, &[("a", 1.0), ("l", 0.0), ("b", 0.2)]);
    let lr02 = lrelu(0.2);
    same("SShapedReLU(a=1, l=0, b=0.2) = LReLU(0.2)", &|x| f(Kind::SShapedRelu, &srl, x), &|x| f(Kind::LeakyRelu, &lr02, x));
    let li = params(Kind::Lisa, &[("alpha1", 1.0), ("alpha2", 0.0)]);
    same("LiSA(1, 0) = ReLU", &|x| f(Kind::Lisa, &li, x), &|x| f(Kind::Relu, &relu, x));
    let lia = params(Kind::Lisa, &[("alpha1", 1.0), ("alpha2", 0.2)]);
    same("LiSA(1, 0.2) = LReLU(0.2)", &|x| f(Kind::Lisa, &lia, x), &|x| f(Kind::LeakyRelu, &lr02, x));
    let sg = params(Kind::SignRelu, &[("a", 0.0)]);
    same("SignReLU(a=0) = ReLU", &|x| f(Kind::SignRelu, &sg, x), &|x| f(Kind::Relu, &relu, x));
    let blu = params(Kind::Blu, &[("beta", 0.0)]);
    same("BLU(beta=0) = identity", &|x| f(Kind::Blu, &blu, x), &|x| x);
    let sw0 = params(Kind::Swish, &[("beta", 0.0)]);
    same("Swish(beta=0) = x/2", &|x| f(Kind::Swish, &sw0, x), &|x| 0.5 * x);
    let es1 = params(Kind::ESwish, &[("beta", 1.0)]);
    let sw1 = default_params(Kind::Swish);
    same("ESwish(beta=1) = Swish", &|x| f(Kind::ESwish, &es1, x), &|x| f(Kind::Swish, &sw1, x));
    let felu = default_params(Kind::Felu);
    same("FELU = ELU", &|x| f(Kind::Felu, &felu, x), &|x| f(Kind::Elu, &elu, x));
    let unit = MaxoutUnit::new(vec![vec![1.0], vec![0.0]], vec![0.0, 0.0]).expect("two pieces");
    same("Maxout(x, 0) = ReLU", &|x| maxout(&[x], &unit).expect("shape").0, &|x| f(Kind::Relu, &relu, x));
    let lr = default_params(Kind::LeakyRelu);
    let m1 = Activation::Composite(Composite::Mixed { rho: 1.0 });
    let m0 = Activation::Composite(Composite::Mixed { rho: 0.0 });
    same("Mixed(rho=1) = LReLU", &|x| m1.value(x), &|x| f(Kind::LeakyRelu, &lr, x));
    same("Mixed(rho=0) = ELU", &|x| m0.value(x), &|x| f(Kind::Elu, &elu, x));
    o
}

fn c6() -> Outcome {
    let mut o = Outcome::default();
    for k in [Kind::Tanh, Kind::Relu, Kind::GeluErf, Kind::Swish] {
        let t = Instant::now();
        match experiments::run_regression(&k.into(), &RegressionConfig::new(42)) {
            Ok(r) => {
                let secs = t.elapsed().as_secs_f64();
                o.check(
                    r.final_val_mse <= 0.045 && r.log.val_loss.len() == 50 && secs < 30.0,
                    format!("regression {}: val MSE {:.4} in {secs:.2} s", k.name(), r.final_val_mse),
                );
            }
            Err(e) => o.check(false, format!("regression {}: {e}", k.name())),
        }
    }
    for k in [Kind::Relu, Kind::Tanh, Kind::Swish] {
        let cfg = ClassificationConfig::new(42);
        match experiments::run_classification(&k.into(), &cfg) {
            Ok(r) => {
                let n_val = (cfg.n_points as f64 * cfg.val_fraction).round() as usize;
                o.check(r.final_accuracy >= 0.90, format!("classification {}: accuracy {:.3}", k.name(), r.final_accuracy));
                o.check(
                    r.confusion.iter().sum::<usize>() == n_val,
                    format!("classification {}: confusion total {} of {n_val}", k.name(), r.confusion.iter().sum::<usize>()),
                );
                if r.final_accuracy >= 0.95 {
                    o.check(
                        (r.class1_area_fraction - 0.25).abs() <= 0.08,
                        format!("classification {}: class-1 area {:.3}", k.name(), r.class1_area_fraction),
                    );
                }
            }
            Err(e) => o.check(false, format!("classification {}: {e}", k.name())),
        }
    }
    o
}

fn c7() -> Outcome {
    let mut o = Outcome::default();
    let rough = [Kind::Relu, Kind::HardTanh, Kind::HardSigmoid, Kind::HardSwishPiecewise];
    let smooth = [
        Kind::Swish,
        Kind::GeluErf,
        Kind::Mish,
        Kind::Tanh,
        Kind::Elu,
        Kind::Selu,
        Kind::Softplus,
        Kind::Logistic,
    ];
    let cfg = LandscapeConfig::default();
    let seeds: Vec<u64> = (1..=20).collect();
    let t = Instant::now();
    let pooled = |kinds: &[Kind]| -> Vec<f64> {
        kinds
            .iter()
            .flat_map(|&k| experiments::roughness_over_seeds(&k.into(), &cfg, &seeds).expect("valid landscape"))
            .collect()
    };
    let (r, s) = (experiments::median(&pooled(&rough)), experiments::median(&pooled(&smooth)));
    let secs = t.elapsed().as_secs_f64();
    o.check(r > s, format!("median roughness: piecewise-linear group {r:.4}, smooth group {s:.4}"));
    o.check(secs < 120.0, format!("{} landscapes in {secs:.1} s (budget 120 s)", 12 * seeds.len()));
    o
}

fn run_cli(args: &[&str]) -> std::io::Result<std::process::Output> {
    Command::new(env!("CARGO_BIN_EXE_actfn")).args(args).env_remove("AF_SEED").output()
}

fn c8(tmp: &Path) -> Outcome {
    let mut o = Outcome::default();
    for (task, act) in [("regression", "swish"), ("classification", "tanh"), ("regression", "rrelu")] {
        let mut bytes = Vec::new();
        for run in ["a", "b"] {
            let dir = tmp.join(format!("{task}-{act}-{run}"));
            let out = run_cli(&[
                "experiment",
                task,
                "--fn",
                act,
                "--seed",
                "7",
                "--rounds",
                "10",
                "--out",
                dir.to_str().expect("utf-8 path"),
            ]);
            let ok = out.as_ref().is_ok_and(|o| o.status.success());
            bytes.push(if ok { std::fs::read(dir.join("metrics.json")).ok() } else { None });
        }
        o.check(
            bytes[0].is_some() && bytes[0] == bytes[1],
            format!("{task} --fn {act}: metrics.json identical across reruns"),
        );
    }
    let serial = gradients::check_all(-5.0, 5.0, 200, 1e-5, false);
    let parallel = gradients::check_all(-5.0, 5.0, 200, 1e-5, true);
    o.check(serial == parallel, format!("grad-check: {} reports identical serial vs parallel", serial.len()));
    let a = run_cli(&["grad-check", "--all", "--samples", "200", "--format", "json"]);
    let b = run_cli(&["grad-check", "--all", "--samples", "200", "--format", "json", "--parallel"]);
    let same = match (a, b) {
        (Ok(a), Ok(b)) => a.status.success() && a.stdout == b.stdout && !a.stdout.is_empty(),
        _ => false,
    };
    o.check(same, "CLI grad-check --all output identical with --parallel");
    o
}

fn c9() -> Outcome {
    let mut o = Outcome::default();
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 1..=10u64 {
        match experiments::run_regression(&Kind::Logistic.into(), &RegressionConfig::new(seed)) {
            Ok(r) => {
                let g = &r.log.round_grad_rms[0];
                let (first, last) = (g[0], g[g.len() - 2]);
                if first < last {
                    wins += 1;
                }
                detail.push(format!("{first:.2e}<{last:.2e}"));
            }
            Err(e) => detail.push(format!("seed {seed}: {e}")),
        }
    }
    o.check(wins >= 8, format!("first < last hidden layer round-1 grad RMS in {wins} of 10 seeds"));
    o.notes.push(detail.join(" "));
    o
}

fn main() {
    let tmp = std::env::temp_dir().join(format!("actfn-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&tmp).expect("temp dir");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("gradient certification", Box::new(c1)),
        ("landmark values", Box::new(c2)),
        ("negative-draw probabilities", Box::new(c3)),
        ("shape properties", Box::new(c4)),
        ("reductions", Box::new(c5)),
        ("regression and classification runs", Box::new(c6)),
        ("landscape smoothness", Box::new(c7)),
        ("determinism", Box::new({
            let tmp = tmp.clone();
            move || c8(&tmp)
        })),
        ("sigmoid depth ordering", Box::new(c9)),
    ];
    let mut failed = 0;
    let mut total = Duration::ZERO;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let dt = t.elapsed();
        total += dt;
        let pass = o.failures.is_empty();
        println!(
            "criterion {}: {} {name} ({:.1} s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            dt.as_secs_f64()
        );
        for n in &o.notes {
            println!("    ok    {n}");
        }
        for f in &o.failures {
            println!("    FAIL  {f}");
        }
        if !pass {
            failed += 1;
        }
    }
    let _ = std::fs::remove_dir_all(&tmp);
    println!("{} of {} criteria passed ({:.1} s)", criteria.len() - failed, criteria.len(), total.as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
