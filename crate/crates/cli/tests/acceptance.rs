//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::process::Command;
use std::time::{Duration, Instant};

use oqmetro::estimation::{mle_estimate, stream_rng, CountTable, Domain, TrialConfig};
use oqmetro::fisher::{advantage, oqfi, qfi_pure};
use oqmetro::measurement::{
    bloch_povm, boundary_sharpness, build_hovm, busch_compatible, hovm_is_povm, marginality_defect,
    mutually_unbiased_pair, sequential_hovm, sequential_povm, Hovm,
};
use oqmetro::matrix::PSD_TOL;
use oqmetro::oq::{evaluate_oq, oq_with_derivatives, POSITIVITY_TOL};
use oqmetro::probe::make_state;
use oqmetro::{estimation::run_trials, ProbeParams, Target};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn unbiased(lambda: f64) -> Hovm {
    let (a, b) = mutually_unbiased_pair(lambda).unwrap();
    sequential_hovm(&a, &b).unwrap()
}

fn within_time(detail: String, elapsed: Duration, limit: Duration) -> Outcome {
    let detail = format!("{detail}; {:.3}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs());
    if elapsed <= limit {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_ball(rng: &mut impl Rng) -> [f64; 3] {
    let r: f64 = rng.random::<f64>().cbrt();
    let z: f64 = rng.random_range(-1.0..=1.0);
    let p: f64 = rng.random_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    [r * s * p.cos(), r * s * p.sin(), r * z]
}

fn qfi_constancy() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..100 {
        for j in 0..100 {
            let p = ProbeParams::new(PI * i as f64 / 99.0, 2.0 * PI * j as f64 / 100.0, Target::Polar);
            worst = worst.max((qfi_pure(&p).unwrap() - 1.0).abs());
        }
    }
    let t = 0.7 * PI;
    let q = qfi_pure(&ProbeParams::new(t, 1.0, Target::Azimuthal)).unwrap();
    let elapsed = start.elapsed();
    let detail = format!("max |I_Q - 1| = {worst:.1e}, azimuthal I_Q(7pi/10) = {q:.6}");
    if worst > 1e-12 || (q - t.sin().powi(2)).abs() > 1e-9 || (q - 0.654).abs() > 1e-3 {
        return Err(detail);
    }
    within_time(detail, elapsed, Duration::from_secs(1))
}

fn incompatibility_threshold() -> Outcome {
    let start = Instant::now();
    let hovm = boundary_sharpness([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 1e-10).unwrap().unwrap();
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if busch_compatible([0.0, 0.0, mid], [mid, 0.0, 0.0]).unwrap() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let busch = 0.5 * (lo + hi);
    let mut rng = stream_rng(2024, 0);
    let mut disagreements = 0;
    for _ in 0..500 {
        let (mu, nu) = (random_ball(&mut rng), random_ball(&mut rng));
        let w = sequential_hovm(&bloch_povm(mu).unwrap(), &bloch_povm(nu).unwrap()).unwrap();
        if busch_compatible(mu, nu).unwrap() != hovm_is_povm(&w, PSD_TOL) {
            disagreements += 1;
        }
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "HOVM threshold {hovm:.8}, Busch threshold {busch:.8}, {disagreements} disagreements on 500 pairs"
    );
    if (hovm - FRAC_1_SQRT_2).abs() > 1e-6 || (busch - hovm).abs() > 1e-6 || disagreements > 0 {
        return Err(detail);
    }
    within_time(detail, elapsed, Duration::from_secs(5))
}

fn closed_form_oqfi() -> Outcome {
    let p = ProbeParams::new(FRAC_PI_2, 0.0, Target::Polar);
    let mut worst = 0.0f64;
    for k in 1..=99 {
        let lambda = k as f64 / 100.0;
        let fi = oqfi(&p, &unbiased(lambda)).unwrap().value;
        worst = worst.max((fi - lambda * lambda / (1.0 - lambda * lambda)).abs());
    }
    let at_threshold = oqfi(&p, &unbiased(FRAC_1_SQRT_2)).unwrap().value;
    let crit = (2.0f64 / 3.0).sqrt();
    let below = advantage(&p, &unbiased(crit - 1e-6)).unwrap();
    let above = advantage(&p, &unbiased(crit + 1e-6)).unwrap();
    let detail = format!(
        "max error {worst:.1e} over 0.01..0.99, I_OQ(1/sqrt2) = {at_threshold:.12}, A just below/above sqrt(2/3): {below:.2e}/{above:.2e}"
    );
    if worst > 1e-9 || (at_threshold - 1.0).abs() > 1e-9 || below >= 0.0 || above <= 0.0 {
        return Err(detail);
    }
    Ok(detail)
}

fn compatible_information_bound() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(77, 0);
    let points: Vec<(f64, f64)> =
        (0..500).map(|_| (rng.random_range(0.0..=PI), rng.random_range(0.0..2.0 * PI))).collect();
    let (mut checked, mut violations) = (0, 0);
    for &lambda in &[0.3, 0.5, FRAC_1_SQRT_2] {
        let w = unbiased(lambda);
        for &(theta, phi) in &points {
            for target in [Target::Polar, Target::Azimuthal] {
                let p = ProbeParams::new(theta, phi, target);
                let oq = evaluate_oq(&make_state(&p).unwrap(), &w).unwrap();
                if oq.negativity > POSITIVITY_TOL {
                    continue;
                }
                checked += 1;
                let fi = oqfi(&p, &w).unwrap();
                if fi.diverged || fi.value > qfi_pure(&p).unwrap() + 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("{checked} positive points checked, {violations} violations");
    if violations > 0 || checked == 0 {
        return Err(detail);
    }
    within_time(detail, elapsed, Duration::from_secs(10))
}

fn marginality() -> Outcome {
    let mut rng = stream_rng(5, 0);
    let (mut worst_marg, mut worst_sum) = (0.0f64, 0.0f64);
    for k in 0..1000 {
        let (a, b) = (bloch_povm(random_ball(&mut rng)).unwrap(), bloch_povm(random_ball(&mut rng)).unwrap());
        // half the draws use the sequential conjunction, half an unrelated one
        let c = if k % 2 == 0 {
            sequential_povm(&a, &b).unwrap()
        } else {
            sequential_povm(&bloch_povm(random_ball(&mut rng)).unwrap(), &b).unwrap()
        };
        let w = build_hovm(&a, &b, &c).unwrap();
        worst_marg = worst_marg.max(marginality_defect(&w, &a, &b).unwrap());
        let p = ProbeParams::new(rng.random_range(0.0..=PI), rng.random_range(0.0..2.0 * PI), Target::Polar);
        let total = evaluate_oq(&make_state(&p).unwrap(), &w).unwrap().total();
        worst_sum = worst_sum.max((total - 1.0).abs());
    }
    let detail = format!("max marginality defect {worst_marg:.1e}, max |sum W - 1| {worst_sum:.1e}");
    if worst_marg > 1e-12 || worst_sum > 1e-10 {
        return Err(detail);
    }
    Ok(detail)
}

fn negativity_point() -> Outcome {
    let oq = evaluate_oq(&make_state(&ProbeParams::new(FRAC_PI_4, 0.0, Target::Polar)).unwrap(), &unbiased(1.0))
        .unwrap();
    let expected = (2f64.sqrt() - 1.0) / 2.0;
    let detail = format!("negativity {:.12} (expected {expected:.12})", oq.negativity);
    if (oq.negativity - expected).abs() > 1e-9 {
        return Err(detail);
    }
    Ok(detail)
}

fn monte_carlo_efficiency() -> Outcome {
    let params = ProbeParams::new(0.978, 2.06, Target::Azimuthal);
    let lambda = 0.99;
    let w = unbiased(lambda);
    let oq = evaluate_oq(&make_state(&params).unwrap(), &w).unwrap();
    let cfg = TrialConfig::new(params, lambda, 100_000, 200, 0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let s = pool.install(|| run_trials(&cfg)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let lep_rel = s.lep.pred_var / s.lep.emp_var - 1.0;
    let detail = format!(
        "theta0=0.978 phi0=2.06 lambda=0.99 target=phi: A={:.4}, MLE ratio (predicted variance) {:.4}, \
         MLE ratio (empirical variance) {:.4}, LEP predicted/empirical variance - 1 = {:+.3}, omission {:.3}/{:.3}",
        s.advantage, s.mle.ratio, s.mle.emp_ratio, lep_rel, s.mle.omission_rate, s.lep.omission_rate
    );
    let ok = oq.negativity <= POSITIVITY_TOL
        && (0.2..=0.6).contains(&s.advantage)
        && (s.mle.ratio - s.advantage).abs() <= 0.1
        && lep_rel.abs() <= 0.25;
    if !ok {
        return Err(detail);
    }
    within_time(detail, elapsed, Duration::from_secs(300))
}

fn derivative_hygiene() -> Outcome {
    let mut rng = stream_rng(88, 0);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let lambda: f64 = rng.random_range(0.0..=1.0);
        let w = unbiased(lambda);
        let target = if rng.random::<bool>() { Target::Polar } else { Target::Azimuthal };
        let p = ProbeParams::new(rng.random_range(0.2..PI - 0.2), rng.random_range(0.1..2.0 * PI - 0.1), target);
        let (_, derivs) = oq_with_derivatives(&make_state(&p).unwrap(), &w).unwrap();
        let at = |g: f64| oq_with_derivatives(&make_state(&p.with_value(g)).unwrap(), &w).unwrap().0;
        let (plus, minus) = (at(p.value() + h), at(p.value() - h));
        // relative to the largest slope in the table, so cells with zero slope
        // do not divide by zero
        let scale = derivs.iter().map(|d| d.abs()).fold(0.0, f64::max).max(1e-3);
        for k in 0..derivs.len() {
            worst = worst.max(((plus[k] - minus[k]) / (2.0 * h) - derivs[k]).abs() / scale);
        }
    }

    let mut worst_curv = 0.0f64;
    for &(theta, phi, lambda, target) in &[
        (0.978, 2.06, 0.99, Target::Azimuthal),
        (1.07, 1.5, 0.5, Target::Polar),
        (1.3, 1.2, 0.9, Target::Azimuthal),
        (FRAC_PI_2, 0.3, 0.8, Target::Polar),
    ] {
        let p = ProbeParams::new(theta, phi, target);
        let (a, b) = mutually_unbiased_pair(lambda).unwrap();
        let w = sequential_hovm(&a, &b).unwrap();
        let counts = CountTable::expected(&p, &a, &b, 100_000).unwrap();
        let r = mle_estimate(&counts, target, p.fixed_other(), &w, Domain::new(p.value() - 0.3, p.value() + 0.3))
            .unwrap();
        let fi = oqfi(&p, &w).unwrap().value;
        worst_curv = worst_curv.max((r.observed_fi - fi).abs() / fi);
    }
    let detail = format!(
        "max relative derivative error {worst:.1e} on 200 points, max relative curvature error {worst_curv:.1e}"
    );
    if worst > 1e-7 || worst_curv > 1e-3 {
        return Err(detail);
    }
    Ok(detail)
}

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_oqmetro"))
            .args([
                "estimate", "--target", "phi", "--theta", "0.978", "--phi", "2.0,2.06", "--lambda", "0.99", "--n",
                "100000", "--trials", "50", "--seed", "1234",
            ])
            .output()
            .expect("binary runs")
    };
    let (a, b) = (run(), run());
    let detail = format!("two runs, {} bytes each, exit codes {:?}/{:?}", a.stdout.len(), a.status.code(), b.status.code());
    if !a.status.success() || a.stdout != b.stdout || a.stdout.is_empty() {
        return Err(detail);
    }
    Ok(detail)
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("QFI constancy", qfi_constancy),
        ("incompatibility threshold", incompatibility_threshold),
        ("closed-form OQFI", closed_form_oqfi),
        ("information bound for compatible pairs", compatible_information_bound),
        ("marginality and normalization", marginality),
        ("negativity point", negativity_point),
        ("Monte-Carlo efficiency", monte_carlo_efficiency),
        ("derivative hygiene", derivative_hygiene),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
