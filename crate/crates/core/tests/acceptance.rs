//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use fedsplit::accountant::{self, LocalPrivacySpec, SamplingSpec, SubsampleMode};
use fedsplit::data::Sample;
use fedsplit::engine::{self, Algorithm, CheckInProbs, ExperimentConfig, NoiseMode, SplitMode};
use fedsplit::model::{self, LossSpec, Regularizer};
use fedsplit::report;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Curves = (Vec<f64>, Vec<f64>);
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn rel_close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    let rel = ((got - want) / want).abs();
    if rel <= tol {
        Ok(())
    } else {
        Err(format!("{name}: got {got}, want {want} (rel err {rel:.2e})"))
    }
}

fn golden_values() -> Outcome {
    let spec = LocalPrivacySpec::new(1.0, 1e-4, 1.0).map_err(|e| e.to_string())?;
    let sigma2 = accountant::gaussian_sigma_squared(&spec);
    let dp = accountant::hoeffding_delta(0.25, 100);
    let round = accountant::central_round_privacy_uniform(0.5, 0.2, 1.0, 1e-4, 0.25, 100).map_err(|e| e.to_string())?;
    let cf = accountant::total_local_epsilon_closed_form(0.1, 0.5, 100, 1.0, 1e-4, 1.0).map_err(|e| e.to_string())?;
    let (comp, _) = accountant::strong_composition(0.1, 1e-6, 100, 1e-4).map_err(|e| e.to_string())?;

    let rows = [
        ("sigma^2", sigma2, 75.4679, 75.46787138632314),
        ("delta'", dp, 7.45331e-6, 7.453306344157342e-6),
        ("eps_c", round.eps_central, 0.21987, 0.21986954294861628),
        ("delta_c", round.delta_central, 1.74534e-5, 1.7453380877776305e-5),
        ("closed form", cf, 0.36825, 0.3682438775579323),
        ("composition", comp, 5.34364, 5.343641233335171),
    ];
    for (name, got, quoted, precise) in rows {
        rel_close(name, got, quoted, 1e-4)?;
        rel_close(name, got, precise, 1e-12)?;
    }
    Ok(format!(
        "sigma^2={sigma2:.6} delta'={dp:.6e} eps_c={:.6} delta_c={:.6e} eps_bar={cf:.6} eps_total={comp:.6}",
        round.eps_central, round.delta_central
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 1.0;
    let mut count = 0;
    for q in [0.05, 0.1, 0.2] {
        for p in [0.1, 0.5, 1.0] {
            for t in [10, 100, 1000] {
                for eps in [0.1, 0.5, 1.0] {
                    let cf = accountant::total_local_epsilon_closed_form(q, p, t, eps, 1e-4, 1.0)
                        .map_err(|e| e.to_string())?;
                    let num = accountant::total_local_epsilon_oracle(q, p, t, eps, 1e-4, 1.0, accountant::DEFAULT_LAMBDA_MAX)
                        .map_err(|e| e.to_string())?;
                    let ratio = num / cf;
                    if !(num >= cf && ratio <= 2.0) {
                        return Err(format!("q={q} p={p} T={t} eps={eps}: oracle {num} vs closed form {cf}"));
                    }
                    worst = worst.max(ratio);
                    count += 1;
                }
            }
        }
    }
    Ok(format!("{count} grid points, max oracle/closed-form ratio {worst:.4}"))
}

fn scaling_laws() -> Outcome {
    let f = |q: f64, p: f64, t: usize, eps: f64| {
        accountant::total_local_epsilon_closed_form(q, p, t, eps, 1e-4, 1.0).map_err(|e| e.to_string())
    };
    let mut worst: f64 = 0.0;
    for &(q, p, t, eps) in &[(0.1, 0.2, 25, 1.0), (0.05, 0.1, 100, 0.3), (0.3, 0.25, 7, 0.8)] {
        let base = f(q, p, t, eps)?;
        for (name, scaled) in [
            ("4T", f(q, p, 4 * t, eps)?),
            ("4p", f(q, 4.0 * p, t, eps)?),
            ("2eps", f(q, p, t, 2.0 * eps)?),
        ] {
            let err = (scaled / base - 2.0).abs() / 2.0;
            if err > 1e-12 {
                return Err(format!("{name} at q={q} p={p} T={t}: ratio {}", scaled / base));
            }
            worst = worst.max(err);
        }
    }
    Ok(format!("max relative deviation from 2: {worst:.1e}"))
}

fn wr_below_wor() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    for _ in 0..10_000 {
        let q_steps = rng.random_range(1..=20usize);
        let b = rng.random_range(1..=64usize);
        let size = q_steps * b + rng.random_range(0..5000usize);
        let ratio = |mode| {
            let spec = SamplingSpec::new(1.0, mode, q_steps, b, size).unwrap();
            accountant::subsampling_ratio(&spec).unwrap()
        };
        if ratio(SubsampleMode::Wr) > ratio(SubsampleMode::Wor) {
            violations += 1;
        }
    }
    if violations == 0 {
        Ok("10000 random (Q, b, |D|), 0 violations".into())
    } else {
        Err(format!("{violations} violations"))
    }
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

fn strictly_above(hi: &[f64], lo: &[f64]) -> bool {
    hi.iter().zip(lo).all(|(h, l)| h > l)
}

fn round_eps_curves() -> Outcome {
    let grid: Vec<f64> = (0..20).map(|i| 0.05 + 0.95 * i as f64 / 19.0).collect();
    let curve = |p: f64, q: f64| -> Result<Vec<f64>, String> {
        grid.iter()
            .map(|&e| {
                accountant::central_round_privacy_uniform(p, q, e, 1e-4, 0.25, 100)
                    .map(|r| r.eps_central)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let by_p = [curve(0.1, 0.1)?, curve(0.5, 0.1)?, curve(1.0, 0.1)?];
    let by_q = [curve(0.5, 0.1)?, curve(0.5, 0.3)?, curve(0.5, 0.5)?];
    for (label, family) in [("p", &by_p), ("q", &by_q)] {
        if !family.iter().all(|c| strictly_increasing(c)) {
            return Err(format!("a curve in the {label} family is not strictly increasing"));
        }
        if !family.windows(2).all(|w| strictly_above(&w[1], &w[0])) {
            return Err(format!("curves are not strictly ordered by {label}"));
        }
    }
    Ok(format!(
        "20-point grids; at eps_l=1: p->{:.4}/{:.4}/{:.4}, q->{:.4}/{:.4}/{:.4}",
        by_p[0][19], by_p[1][19], by_p[2][19], by_q[0][19], by_q[1][19], by_q[2][19]
    ))
}

fn total_eps_curves() -> Outcome {
    const SIZE: usize = 250;
    let ratio = |mode, b: usize| {
        let spec = SamplingSpec::new(1.0, mode, 5, b, SIZE).unwrap();
        accountant::subsampling_ratio(&spec).unwrap()
    };
    let rounds: Vec<usize> = (1..=500).collect();
    // Both totals: moments bound for one client and composition for the global model.
    let curves = |p: f64, q: f64| -> Result<Curves, String> {
        let round = accountant::central_round_privacy_uniform(p, q, 1.0, 1e-4, 0.25, 100).map_err(|e| e.to_string())?;
        let mut local = Vec::new();
        let mut global = Vec::new();
        for &t in &rounds {
            local.push(
                accountant::total_local_epsilon_closed_form(q, p, t, 1.0, 1e-4, 1.0).map_err(|e| e.to_string())?,
            );
            global.push(
                accountant::strong_composition(round.eps_central, round.delta_central, t, 1e-4)
                    .map_err(|e| e.to_string())?
                    .0,
            );
        }
        Ok((local, global))
    };
    let q_wor = ratio(SubsampleMode::Wor, 5);
    let families: Vec<(&str, Vec<Curves>)> = vec![
        ("p", vec![curves(0.1, q_wor)?, curves(0.5, q_wor)?, curves(1.0, q_wor)?]),
        ("q", vec![curves(0.5, 0.05)?, curves(0.5, 0.1)?, curves(0.5, 0.2)?]),
        (
            "b",
            vec![
                curves(0.5, ratio(SubsampleMode::Wor, 1))?,
                curves(0.5, ratio(SubsampleMode::Wor, 5))?,
                curves(0.5, ratio(SubsampleMode::Wor, 10))?,
            ],
        ),
    ];
    for (label, family) in &families {
        for w in family.windows(2) {
            if !strictly_above(&w[1].0, &w[0].0) || !strictly_above(&w[1].1, &w[0].1) {
                return Err(format!("total-eps curves not increasing in {label}"));
            }
        }
    }
    for b in [1, 5, 10] {
        let wr = curves(0.5, ratio(SubsampleMode::Wr, b))?;
        let wor = curves(0.5, ratio(SubsampleMode::Wor, b))?;
        let below = |a: &[f64], c: &[f64]| a.iter().zip(c).all(|(x, y)| x <= y);
        if !below(&wr.0, &wor.0) || !below(&wr.1, &wor.1) {
            return Err(format!("WR curve above WOR at b={b}"));
        }
    }
    Ok("T in 1..=500, local and global totals ordered by p, q, b; WR <= WOR".into())
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let dim = rng.random_range(1..=14usize);
        let n = rng.random_range(1..=8usize);
        let batch: Vec<Sample> = (0..n)
            .map(|_| Sample {
                features: (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect(),
                label: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            })
            .collect();
        let refs: Vec<&Sample> = batch.iter().collect();
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let regularizer = if trial % 2 == 0 { Regularizer::Norm } else { Regularizer::SquaredNorm };
        let spec = LossSpec::new(rng.random_range(0.0..0.1), dim)
            .map_err(|e| e.to_string())?
            .with_regularizer(regularizer);
        let grad = model::gradient(&w, &refs, &spec).map_err(|e| e.to_string())?;
        for k in 0..dim {
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[k] += h;
            minus[k] -= h;
            let fd = (model::loss(&plus, &refs, &spec).unwrap() - model::loss(&minus, &refs, &spec).unwrap()) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / grad[k].abs().max(fd.abs()).max(1e-3);
            if rel >= 1e-5 {
                return Err(format!("trial {trial} coordinate {k}: analytic {} vs fd {fd}", grad[k]));
            }
            worst = worst.max(rel);
        }
    }
    Ok(format!("100 random triples, max relative error {worst:.2e}"))
}

fn aggregation_unbiased() -> Outcome {
    let probs = [0.5, 0.2, 0.7, 0.4, 0.5];
    let v = [1.0, -2.0, 0.5];
    let rounds = 100_000;
    let mut sum = [0.0; 3];
    let mut sum_sq = [0.0; 3];
    for t in 0..rounds {
        let mut updates = BTreeMap::new();
        for (i, &p) in probs.iter().enumerate() {
            if engine::check_in(p, i, t, 1234) {
                updates.insert(i, v.to_vec());
            }
        }
        let w = if updates.is_empty() {
            vec![0.0; 3]
        } else {
            engine::aggregate(&updates, &probs).map_err(|e| e.to_string())?
        };
        for k in 0..3 {
            sum[k] += w[k];
            sum_sq[k] += w[k] * w[k];
        }
    }
    let n = rounds as f64;
    let mut worst_z: f64 = 0.0;
    for k in 0..3 {
        let mean = sum[k] / n;
        let var = sum_sq[k] / n - mean * mean;
        let se = (var / n).sqrt();
        let z = (mean - v[k]).abs() / se;
        if z >= 3.0 {
            return Err(format!("coordinate {k}: mean {mean} vs {} ({z:.2} SE)", v[k]));
        }
        worst_z = worst_z.max(z);
    }
    Ok(format!("1e5 rounds, max deviation {worst_z:.2} SE"))
}

fn fedavg_reduction() -> Outcome {
    let cfg = ExperimentConfig {
        num_clients: 4,
        rounds: 20,
        check_in_prob: CheckInProbs::Uniform(1.0),
        local_steps: 2,
        batch_size: 3,
        hoeffding_beta: 0.9,
        learning_rate: 0.5,
        noise: NoiseMode::None,
        split: SplitMode::PublicOnly,
        clip: 1e12,
        ..Default::default()
    };
    let samples = common::standardized(common::fixture_path());
    let reference = common::fedavg_reference(&cfg, samples.clone());
    let result = engine::run_experiment(&cfg, samples).map_err(|e| e.to_string())?;
    if result.traces.len() != reference.len() {
        return Err("round count differs".into());
    }
    for (trace, want) in result.traces.iter().zip(&reference) {
        let same = trace.global_public.len() == want.len()
            && trace.global_public.iter().zip(want).all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Err(format!("round {} differs", trace.round));
        }
    }
    Ok("20 rounds, global model identical bit for bit".into())
}

fn adult_config(p: f64, seed: u64, algorithm: Algorithm) -> ExperimentConfig {
    ExperimentConfig {
        num_clients: 100,
        rounds: 100,
        check_in_prob: CheckInProbs::Uniform(p),
        local_steps: 5,
        batch_size: 5,
        eps_local: 1.0,
        delta_local: 1e-4,
        clip: 1.0,
        hoeffding_beta: 0.25,
        master_seed: seed,
        algorithm,
        ..Default::default()
    }
}

const SEEDS: u64 = 5;
const PROBS: [f64; 3] = [0.1, 0.3, 0.7];

fn utility_trend(samples: &[Sample]) -> Outcome {
    let mean_acc = |p: f64, algorithm: Algorithm| -> Result<f64, String> {
        let mut total = 0.0;
        for seed in 0..SEEDS {
            let r = engine::run_experiment(&adult_config(p, seed, algorithm), samples.to_vec())
                .map_err(|e| e.to_string())?;
            total += r.final_accuracy();
        }
        Ok(total / SEEDS as f64)
    };
    let split: Vec<f64> = PROBS.iter().map(|&p| mean_acc(p, Algorithm::Split)).collect::<Result<_, _>>()?;
    let base: Vec<f64> = PROBS.iter().map(|&p| mean_acc(p, Algorithm::DpFedAvg)).collect::<Result<_, _>>()?;
    let detail = format!(
        "split {:.4}/{:.4}/{:.4}, dp-fedavg {:.4}/{:.4}/{:.4} at p=0.1/0.3/0.7",
        split[0], split[1], split[2], base[0], base[1], base[2]
    );
    if !split.windows(2).all(|w| w[0] <= w[1]) {
        return Err(format!("(a) accuracy not nondecreasing in p: {detail}"));
    }
    if !split.iter().zip(&base).all(|(s, b)| s >= b) {
        return Err(format!("(b) split below baseline: {detail}"));
    }
    Ok(detail)
}

fn determinism(samples: &[Sample]) -> Outcome {
    let cfg = adult_config(PROBS[0], 0, Algorithm::Split);
    let a = engine::run_experiment(&cfg, samples.to_vec()).map_err(|e| e.to_string())?;
    let b = engine::run_experiment(&cfg, samples.to_vec()).map_err(|e| e.to_string())?;
    let (ca, cb) = (report::trace_csv(&a.traces), report::trace_csv(&b.traces));
    if ca.as_bytes() == cb.as_bytes() {
        Ok(format!("{} bytes identical", ca.len()))
    } else {
        Err("CSV output differs between runs".into())
    }
}

fn main() {
    let adult_path = common::adult_path();
    let adult = adult_path.exists().then(|| common::standardized(adult_path.clone()));
    let (adult, adult_path) = (&adult, &adult_path);
    let needs_adult = |f: fn(&[Sample]) -> Outcome| -> Check {
        Box::new(move || match adult {
            Some(samples) => f(samples),
            None => Err(format!("dataset not found at {}", adult_path.display())),
        })
    };

    let criteria: Vec<(&str, Check)> = vec![
        ("formula golden values", Box::new(golden_values)),
        ("oracle vs closed form", Box::new(oracle_equivalence)),
        ("closed-form scaling laws", Box::new(scaling_laws)),
        ("WR ratio <= WOR ratio", Box::new(wr_below_wor)),
        ("per-round eps_c trends", Box::new(round_eps_curves)),
        ("total eps trends over T", Box::new(total_eps_curves)),
        ("gradient finite differences", Box::new(gradient_check)),
        ("aggregation unbiasedness", Box::new(aggregation_unbiased)),
        ("FedAvg reduction", Box::new(fedavg_reduction)),
        ("Adult utility trend", needs_adult(utility_trend)),
        ("determinism", needs_adult(determinism)),
    ];

    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{ms} ms]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} [{ms} ms]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
