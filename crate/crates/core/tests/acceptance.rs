//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed on a normal
//! `cargo test` run; the process exits non-zero if any criterion fails.

use std::f64::consts::{FRAC_2_PI, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pvcdr::cli::sample_ys;
use pvcdr::conjecture::{run_conjecture, trial_records, ConjectureConfig, ConjectureResult, Estimator};
use pvcdr::diagnostics::{dispersion_check, independence_check, subspace_angle};
use pvcdr::fit::{closed_form_d1, fit_model3, fit_model5, FitOptions, MeanFamily};
use pvcdr::likelihood::{
    grad_gamma_model3, grad_gamma_model5, loglik_model3, loglik_model3_at, loglik_model5, loglik_model5_at,
};
use pvcdr::models::{
    example_2_1, example_2_2, sample_model3, sample_model5, Dataset, MatrixEntry, MeanProfile, Model3Params,
    Model5Params, StiefelFrame, VarianceProfile, VectorEntry,
};
use pvcdr::numerics::{standard_normal_matrix, standard_normal_vector, SeedSpec};
use pvcdr::randcov::{CovKind, CovScheme, DEFAULT_C};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

const SEEDS: std::ops::Range<u64> = 0..10;

fn moment_runs(kind: CovKind) -> &'static Vec<(ConjectureResult, Duration)> {
    static ROT: OnceLock<Vec<(ConjectureResult, Duration)>> = OnceLock::new();
    static ENT: OnceLock<Vec<(ConjectureResult, Duration)>> = OnceLock::new();
    let cell = if kind == CovKind::Rotation { &ROT } else { &ENT };
    cell.get_or_init(|| {
        SEEDS
            .map(|seed| {
                let scheme = CovScheme::new(kind, DEFAULT_C, 2).unwrap();
                let config = ConjectureConfig::new(scheme, seed);
                let t = Instant::now();
                let r = run_conjecture(&config).unwrap();
                (r, t.elapsed())
            })
            .collect()
    })
}

fn band(kind: CovKind, lo: f64, hi: f64) -> Outcome {
    let runs = moment_runs(kind);
    let inside = runs.iter().filter(|(r, _)| (lo..=hi).contains(&r.prob_first_wins)).count();
    let slowest = runs.iter().map(|(_, t)| *t).max().unwrap();
    let probs: Vec<String> = runs.iter().map(|(r, _)| format!("{:.3}", r.prob_first_wins)).collect();
    outcome(
        inside >= 9 && within(slowest, 5.0),
        format!(
            "{inside}/10 seeds in [{lo}, {hi}] ({}); slowest run {:.2}s",
            probs.join(" "),
            slowest.as_secs_f64()
        ),
    )
}

fn criterion_1() -> Outcome {
    band(CovKind::Rotation, 0.55, 0.75)
}

fn criterion_2() -> Outcome {
    band(CovKind::Entry, 0.64, 0.83)
}

fn oracle(kind: CovKind, seed: u64) -> ConjectureResult {
    let scheme = CovScheme::new(kind, DEFAULT_C, 2).unwrap();
    let mut config = ConjectureConfig::new(scheme, seed);
    config.n_outer = 100_000;
    config.estimator = Estimator::PopulationOracle;
    run_conjecture(&config).unwrap()
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for kind in [CovKind::Rotation, CovKind::Entry] {
        let a = oracle(kind, 1001);
        let b = oracle(kind, 2002);
        let gap = (a.prob_first_wins - b.prob_first_wins).abs();
        pass &= gap <= 0.006;
        let mut worst_z: f64 = 0.0;
        for (r, _) in moment_runs(kind) {
            let se = (r.mc_stderr.powi(2) + a.mc_stderr.powi(2)).sqrt();
            worst_z = worst_z.max((r.prob_first_wins - a.prob_first_wins).abs() / se);
        }
        pass &= worst_z <= 3.0;
        notes.push(format!(
            "{kind}: oracle {:.4}/{:.4} (gap {gap:.4}), worst moment run {worst_z:.2} SE",
            a.prob_first_wins, b.prob_first_wins
        ));
        if kind == CovKind::Rotation {
            // |z₁/z₂| is half-Cauchy and λ₁/λ₂ an independent ratio of uniforms,
            // which makes the first component win with probability exactly 2/π
            let z = (a.prob_first_wins - FRAC_2_PI).abs() / a.mc_stderr;
            pass &= z <= 3.0;
            notes.push(format!("rotation oracle vs 2/π: {z:.2} SE"));
        }
    }
    let elapsed = t.elapsed();
    pass &= within(elapsed, 60.0);
    notes.push(format!("{:.1}s", elapsed.as_secs_f64()));
    outcome(pass, notes.join("; "))
}

fn criterion_4() -> Outcome {
    let scheme = CovScheme::new(CovKind::Rotation, DEFAULT_C, 2).unwrap();
    let mut config = ConjectureConfig::new(scheme, 44);
    config.n_outer = 10_000;
    config.estimator = Estimator::PopulationOracle;
    let records = trial_records(&config).unwrap();
    let worst = records
        .iter()
        .map(|r| (r.rho.iter().map(|v| v * v).sum::<f64>() - 1.0).abs())
        .fold(0.0_f64, f64::max);
    outcome(
        records.len() == 10_000 && worst <= 1e-9,
        format!("{} trials, max |ρ₁² + ρ₂² − 1| = {worst:.2e}", records.len()),
    )
}

fn e1() -> StiefelFrame {
    StiefelFrame::axes(3, &[0]).unwrap()
}

fn abs_profile() -> VarianceProfile {
    VarianceProfile::AbsDev {
        center: 0.0,
        scale: 1.0,
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[k]
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let mut cosines = Vec::new();
    let mut angles = Vec::new();
    for seed in 0..50u64 {
        let ys = sample_ys(2.0, 1.0, 100, SeedSpec::new(seed, 1)).unwrap();
        let data = sample_model3(&example_2_1(), &ys, SeedSpec::new(seed, 0)).unwrap();
        let fit = fit_model3(&data, &abs_profile(), 1, &FitOptions::with_seed(seed)).unwrap();
        cosines.push(fit.gamma_hat.as_matrix()[(0, 0)].abs());
        angles.push(subspace_angle(&e1(), &fit.gamma_hat).unwrap());
    }
    let elapsed = t.elapsed();
    let cos_med = percentile(&sorted(cosines), 0.5);
    let angle_p90 = percentile(&sorted(angles), 0.9);
    outcome(
        cos_med >= 0.95 && angle_p90 <= 0.35 && within(elapsed, 60.0),
        format!(
            "median |cos| {cos_med:.4}, 90th-percentile angle {angle_p90:.4} rad, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let mut a5 = Vec::new();
    let mut a3 = Vec::new();
    let mut better = 0;
    for seed in 0..50u64 {
        // same y and the same noise draws; only the mean term differs
        let ys = sample_ys(3.0, 1.0, 100, SeedSpec::new(seed, 1)).unwrap();
        let data5 = sample_model5(&example_2_2(), &ys, SeedSpec::new(seed, 0)).unwrap();
        let data3 = sample_model3(&example_2_1(), &ys, SeedSpec::new(seed, 0)).unwrap();
        let opts = FitOptions::with_seed(seed);
        let fit5 = fit_model5(&data5, MeanFamily::Linear, &abs_profile(), 1, 1, true, &opts).unwrap();
        let fit3 = fit_model3(&data3, &abs_profile(), 1, &opts).unwrap();
        let x5 = subspace_angle(&e1(), &fit5.gamma_hat).unwrap();
        let x3 = subspace_angle(&e1(), &fit3.gamma_hat).unwrap();
        if x5 < x3 {
            better += 1;
        }
        a5.push(x5);
        a3.push(x3);
    }
    let elapsed = t.elapsed();
    let (m5, m3) = (percentile(&sorted(a5), 0.5), percentile(&sorted(a3), 0.5));
    outcome(
        m5 <= m3 && better >= 30 && within(elapsed, 120.0),
        format!(
            "median angle model 5 {m5:.4} vs model 3 {m3:.4} rad; strictly better in {better}/50; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Random symmetric matrix with eigenvalues above −1/2, so `ν + I` stays positive definite.
fn random_nu(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = standard_normal_matrix(rng, d, d);
    let m = &a * a.transpose() - DMatrix::identity(d, d) * 0.5;
    (&m + m.transpose()) * 0.5
}

fn lookup_profile(rng: &mut ChaCha8Rng, d: usize, ys: &[f64]) -> VarianceProfile {
    VarianceProfile::Lookup {
        d,
        table: ys
            .iter()
            .map(|&y| MatrixEntry {
                y,
                value: random_nu(rng, d).as_slice().to_vec(),
            })
            .collect(),
    }
}

fn distinct_ys(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 + rng.gen::<f64>() * 0.5).collect()
}

/// Independent dense evaluation: `Σᵢ log N(xᵢ; mᵢ, Mᵢ²)` by Cholesky.
fn dense_loglik(data: &Dataset, means: &[DVector<f64>], multipliers: &[DMatrix<f64>]) -> f64 {
    let p = data.p();
    let mut total = 0.0;
    for i in 0..data.n() {
        let cov = &multipliers[i] * multipliers[i].transpose();
        let chol = cov.cholesky().expect("positive definite");
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let r = data.row(i) - &means[i];
        let quad = r.dot(&chol.solve(&r));
        total += -0.5 * (p as f64 * (2.0 * PI).ln() + logdet + quad);
    }
    total
}

fn profile_at(profile: &VarianceProfile, y: f64) -> DMatrix<f64> {
    match profile {
        VarianceProfile::Lookup { d, table } => {
            let e = table.iter().find(|e| e.y == y).unwrap();
            DMatrix::from_column_slice(*d, *d, &e.value)
        }
        _ => unreachable!("cases use lookup profiles"),
    }
}

fn multiplier(gamma: &StiefelFrame, nu: &DMatrix<f64>, sigma2: f64) -> DMatrix<f64> {
    let g = gamma.as_matrix();
    (g * nu * g.transpose() + DMatrix::identity(g.nrows(), g.nrows())) * sigma2
}

enum Case {
    Three(Model3Params, Dataset),
    Five(Model5Params, Dataset),
}

fn random_case(rng: &mut ChaCha8Rng, index: usize, n: usize) -> Case {
    let p = rng.gen_range(2..=6);
    let d = rng.gen_range(1..=3.min(p - 1));
    let sigma2 = rng.gen_range(0.3..3.0);
    let ys = distinct_ys(rng, n);
    let x = standard_normal_matrix(rng, n, p) * 2.0;
    let data = Dataset::new(x, ys.clone()).unwrap();
    if index.is_multiple_of(2) {
        let gamma = StiefelFrame::random(rng, p, d).unwrap();
        let nu = lookup_profile(rng, d, &ys);
        Case::Three(Model3Params::new(gamma, nu, sigma2).unwrap(), data)
    } else {
        let separate = p - d >= 2 && rng.gen_bool(0.5);
        let (g1, g2) = if separate {
            // columns of one random frame, so Γ₁ ⟂ Γ₂ and d1 + d2 < p
            let d2 = rng.gen_range(1..=(p - d - 1).min(3));
            let both = StiefelFrame::random(rng, p, d + d2).unwrap().into_matrix();
            (
                StiefelFrame::new(both.columns(0, d).into_owned()).unwrap(),
                StiefelFrame::new(both.columns(d, d2).into_owned()).unwrap(),
            )
        } else {
            let g = StiefelFrame::random(rng, p, d).unwrap();
            (g.clone(), g)
        };
        five_case(rng, g1, g2, sigma2, data)
    }
}

fn five_case(
    rng: &mut ChaCha8Rng,
    g1: StiefelFrame,
    g2: StiefelFrame,
    sigma2: f64,
    data: Dataset,
) -> Case {
    let p = g1.p();
    let (d1, d2) = (g1.d(), g2.d());
    let nu_mean = MeanProfile::Lookup {
        d: d1,
        table: data
            .y
            .iter()
            .map(|&y| VectorEntry {
                y,
                value: standard_normal_vector(rng, d1).as_slice().to_vec(),
            })
            .collect(),
    };
    let tau = lookup_profile(rng, d2, &data.y);
    let mu = standard_normal_vector(rng, p);
    Case::Five(Model5Params::new(mu, g1, nu_mean, g2, tau, sigma2).unwrap(), data)
}

fn mean_at(profile: &MeanProfile, y: f64) -> DVector<f64> {
    match profile {
        MeanProfile::Lookup { table, .. } => DVector::from_column_slice(&table.iter().find(|e| e.y == y).unwrap().value),
        _ => unreachable!("cases use lookup profiles"),
    }
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let mut rng = SeedSpec::new(7, 0).rng();
    let mut worst: f64 = 0.0;
    for index in 0..1000 {
        let n = rng.gen_range(1..=8);
        let (structured, dense) = match random_case(&mut rng, index, n) {
            Case::Three(params, data) => {
                let means = vec![DVector::zeros(data.p()); data.n()];
                let mults: Vec<_> =
                    data.y.iter().map(|&y| multiplier(&params.gamma, &profile_at(&params.nu, y), params.sigma2)).collect();
                (loglik_model3(&params, &data).unwrap().total, dense_loglik(&data, &means, &mults))
            }
            Case::Five(params, data) => {
                let means: Vec<_> = data
                    .y
                    .iter()
                    .map(|&y| &params.mu + params.gamma1.as_matrix() * mean_at(&params.nu, y))
                    .collect();
                let mults: Vec<_> =
                    data.y.iter().map(|&y| multiplier(&params.gamma2, &profile_at(&params.tau, y), params.sigma2)).collect();
                (loglik_model5(&params, &data).unwrap().total, dense_loglik(&data, &means, &mults))
            }
        };
        worst = worst.max((structured - dense).abs() / dense.abs().max(1.0));
    }
    let elapsed = t.elapsed();
    outcome(
        worst <= 1e-8 && within(elapsed, 10.0),
        format!("1000 cases, max relative gap {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn central_fd<F: Fn(&DMatrix<f64>) -> f64>(f: F, at: &DMatrix<f64>) -> DMatrix<f64> {
    let h = 1e-5;
    DMatrix::from_fn(at.nrows(), at.ncols(), |i, j| {
        let mut a = at.clone();
        let mut b = at.clone();
        a[(i, j)] += h;
        b[(i, j)] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

/// `‖a − b‖ / max(1, ‖b‖)`.
fn rel_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn criterion_8() -> Outcome {
    let mut rng = SeedSpec::new(8, 0).rng();
    let mut worst: f64 = 0.0;
    for index in 0..200 {
        let n = rng.gen_range(5..=30);
        match random_case(&mut rng, index, n) {
            Case::Three(params, data) => {
                let g = grad_gamma_model3(&params, &data).unwrap();
                let a = params.gamma.as_matrix().clone();
                let f = central_fd(|m| loglik_model3_at(&params, m, &data).unwrap().total, &a);
                worst = worst.max(rel_gap(&g, &f));
            }
            Case::Five(params, data) => {
                let g = grad_gamma_model5(&params, &data).unwrap();
                let a1 = params.gamma1.as_matrix().clone();
                let a2 = params.gamma2.as_matrix().clone();
                let f1 = central_fd(|m| loglik_model5_at(&params, m, &a2, &data).unwrap().total, &a1);
                let f2 = central_fd(|m| loglik_model5_at(&params, &a1, m, &data).unwrap().total, &a2);
                worst = worst.max(rel_gap(&g.gamma1, &f1)).max(rel_gap(&g.gamma2, &f2));
                if params.shared_frame() {
                    let fs = central_fd(|m| loglik_model5_at(&params, m, m, &data).unwrap().total, &a1);
                    worst = worst.max(rel_gap(&g.shared().unwrap(), &fs));
                }
            }
        }
    }
    outcome(
        worst <= 1e-5,
        format!("100 model-3 and 100 model-5 cases, max relative gap {worst:.2e}"),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = SeedSpec::new(9, 0).rng();
    let mut worst = f64::INFINITY;
    let mut widest: f64 = 0.0;
    for k in 0..100u64 {
        let p = rng.gen_range(2..=6);
        let gamma = StiefelFrame::random(&mut rng, p, 1).unwrap();
        let nu = VarianceProfile::AbsDev {
            center: rng.gen_range(-1.0..1.0),
            scale: rng.gen_range(0.5..2.0),
        };
        let params = Model3Params::new(gamma, nu.clone(), 1.0).unwrap();
        let ys = sample_ys(2.0, 1.0, 200, SeedSpec::new(k, 1)).unwrap();
        let data = sample_model3(&params, &ys, SeedSpec::new(k, 0)).unwrap();
        let fit = fit_model3(&data, &nu, 1, &FitOptions::with_seed(k)).unwrap();
        let exact = closed_form_d1(&data, &nu, 1.0).unwrap();
        let cos = fit.gamma_hat.as_matrix().column(0).dot(&exact).abs() / exact.norm();
        worst = worst.min(cos);
        let exact_frame = StiefelFrame::orthonormalized(&DMatrix::from_column_slice(p, 1, exact.as_slice())).unwrap();
        widest = widest.max(subspace_angle(&exact_frame, &fit.gamma_hat).unwrap());
    }
    outcome(
        worst >= 1.0 - 1e-6,
        format!("100 problems, min |cos| = 1 − {:.2e}, max angle {widest:.2e} rad", 1.0 - worst),
    )
}

fn criterion_10() -> Outcome {
    let t = Instant::now();
    let reps = 100u64;
    let (mut pass3, mut pass5) = (0, 0);
    let mut signal = Vec::new();
    for rep in 0..reps {
        let ys = sample_ys(2.0, 1.0, 10_000, SeedSpec::new(rep, 1)).unwrap();
        let data = sample_model3(&example_2_1(), &ys, SeedSpec::new(rep, 0)).unwrap();
        let disp = dispersion_check(&data, &e1()).unwrap();
        if independence_check(&data, &e1()).unwrap().pass && disp.pass {
            pass3 += 1;
        }
        signal.push(disp.signal_max_abs().unwrap());

        let ys = sample_ys(3.0, 1.0, 10_000, SeedSpec::new(rep, 3)).unwrap();
        let data = sample_model5(&example_2_2(), &ys, SeedSpec::new(rep, 2)).unwrap();
        if independence_check(&data, &e1()).unwrap().pass && dispersion_check(&data, &e1()).unwrap().pass {
            pass5 += 1;
        }
    }
    let min_signal = signal.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        pass3 * 100 >= 95 * reps && pass5 * 100 >= 95 * reps && min_signal > 0.3,
        format!(
            "model 3 passes {pass3}/{reps}, model 5 passes {pass5}/{reps}; Γ-side dispersion statistic min {min_signal:.3} over replications; {:.1}s",
            t.elapsed().as_secs_f64()
        ),
    )
}

fn run_bin(args: &[&str], threads: &str, cwd: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_pvcdr"))
        .args(args)
        .env("PVCDR_THREADS", threads)
        .current_dir(cwd)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let at = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let data21 = at("d21.csv");
    let data22 = at("d22.csv");
    let fit3 = at("fit3.json");
    let mut setup = run_bin(&["simulate", "--example", "2.1", "--n", "100", "--seed", "5", "--out", &data21], "2", dir.path());
    setup &= run_bin(&["simulate", "--example", "2.2", "--n", "100", "--seed", "5", "--out", &data22], "2", dir.path());
    setup &= run_bin(
        &["fit", "--model", "3", "--data", &data21, "--d", "1", "--nu", "absdev:0:1", "--seed", "5", "--out", &fit3],
        "2",
        dir.path(),
    );
    if !setup {
        return outcome(false, "setup commands failed".into());
    }

    let commands: Vec<(&str, Vec<String>)> = vec![
        ("simulate 2.1", vec!["simulate", "--example", "2.1", "--n", "100", "--seed", "9"]),
        ("simulate 2.2", vec!["simulate", "--example", "2.2", "--n", "100", "--seed", "9"]),
        (
            "fit model 3",
            vec!["fit", "--model", "3", "--data", &data21, "--d", "1", "--nu", "absdev:0:1", "--seed", "9", "--true-gamma", "x1"],
        ),
        (
            "fit model 5",
            vec!["fit", "--model", "5", "--data", &data22, "--d", "1", "--tau", "absdev:0:1", "--shared-frame", "--seed", "9"],
        ),
        ("conjecture rotation", vec!["conjecture", "--scheme", "rotation", "--seed", "7"]),
        ("conjecture entry", vec!["conjecture", "--scheme", "entry", "--seed", "7"]),
        ("diagnose", vec!["diagnose", "--data", &data21, "--gamma", &fit3]),
        ("plot", vec!["plot", "--data", &data21, "--gamma", &fit3]),
    ]
    .into_iter()
    .map(|(name, args)| (name, args.into_iter().map(String::from).collect()))
    .collect();

    let mut mismatched = Vec::new();
    for (k, (name, args)) in commands.iter().enumerate() {
        // three runs: twice on one thread count, once on another; each in its
        // own directory so the echoed `--out` path is the same string
        let outputs: Vec<Option<Vec<u8>>> = ["1", "1", "4"]
            .iter()
            .enumerate()
            .map(|(r, threads)| {
                let cwd = dir.path().join(format!("run_{k}_{r}"));
                std::fs::create_dir(&cwd).unwrap();
                let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
                full.extend(["--out", "output"]);
                run_bin(&full, threads, &cwd).then(|| std::fs::read(cwd.join("output")).ok()).flatten()
            })
            .collect();
        let same = outputs[0].is_some() && outputs.iter().all(|o| o == &outputs[0]);
        if !same {
            mismatched.push(*name);
        }
    }
    outcome(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{} commands byte-identical across reruns and thread counts", commands.len())
        } else {
            format!("differing or failed: {}", mismatched.join(", "))
        },
    )
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("conjecture, rotation scheme", criterion_1),
        ("conjecture, entry scheme", criterion_2),
        ("oracle stability", criterion_3),
        ("sum rule", criterion_4),
        ("preset 2.1 direction", criterion_5),
        ("preset 2.2 dominance", criterion_6),
        ("structured likelihood", criterion_7),
        ("gradients", criterion_8),
        ("closed-form oracle", criterion_9),
        ("reduction consequence", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            k + 1,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
