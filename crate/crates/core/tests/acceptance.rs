//! Acceptance checks, one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ris_locate::experiments::{run_experiment, to_csv_string, ExperimentSpec, FigureId, ResultTable};
use ris_locate::geometry::Vec3;
use ris_locate::localization::{cml_position, cml_refine_distances, fim, AnchorRectangle, DistanceVector};
use ris_locate::oracle::{brute_force_cml, finite_difference_fim};
use ris_locate::par::Execution;
use ris_locate::pipeline::{CovarianceModel, Scenario, ScenarioConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Some(u) = v.normalized() {
            return u;
        }
    }
}

fn random_rectangle(rng: &mut impl Rng) -> AnchorRectangle {
    let u = random_unit(rng);
    let w = random_unit(rng);
    let v = (w - u * u.dot(w)).normalized().unwrap();
    let a = rng.random_range(0.1..2.0);
    let b = rng.random_range(0.1..2.0);
    let o = Vec3::new(
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
    );
    AnchorRectangle::new([o, o + u * a, o + u * a + v * b, o + v * b]).unwrap()
}

fn random_front_point(rng: &mut impl Rng, rect: &AnchorRectangle) -> Vec3 {
    rect.from_canonical(Vec3::new(
        rng.random_range(0.5..8.0),
        rng.random_range(-0.5..rect.a() + 0.5),
        rng.random_range(-0.5..rect.b() + 0.5),
    ))
}

fn run(figure: FigureId, sweep: &[f64], trials: usize, cfg: &ScenarioConfig) -> ResultTable {
    let mut spec = ExperimentSpec::new(figure);
    spec.sweep = sweep.to_vec();
    spec.trials = trials;
    spec.seed = 2024;
    run_experiment(&spec, cfg, Execution::Parallel).expect("experiment runs")
}

fn metric(t: &ResultTable, sweep: f64, method: &str) -> f64 {
    t.get(sweep, method)
        .unwrap_or_else(|| panic!("row {sweep} {method}"))
        .metric
}

fn cml_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let rect = random_rectangle(&mut rng);
        let p = random_front_point(&mut rng, &rect);
        let sigma = rng.random_range(1e-4..1e-2);
        let noisy: Vec<f64> = rect
            .distances(p)
            .iter()
            .map(|d| d + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let refined = cml_refine_distances(&DistanceVector::new(noisy.clone(), sigma * sigma).unwrap()).unwrap();
        let fit = brute_force_cml(noisy.try_into().unwrap(), rect.corners()).unwrap();
        for (c, b) in refined.distances.iter().zip(fit.distances) {
            worst = worst.max((c - b).abs());
        }
    }
    let took = start.elapsed();
    outcome(
        worst <= 1e-6 && took < Duration::from_secs(60),
        format!("max |closed - brute| = {worst:.2e} m over 1000 cases in {took:.1?}"),
    )
}

fn identity_on_consistent_inputs() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_j, mut worst_p): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let rect = random_rectangle(&mut rng);
        let p = random_front_point(&mut rng, &rect);
        let dv = DistanceVector::new(rect.distances(p).to_vec(), 1e-6).unwrap();
        worst_j = worst_j.max(cml_refine_distances(&dv).unwrap().objective);
        worst_p = worst_p.max((cml_position(&dv, &rect).unwrap().position - p).norm());
    }
    outcome(
        worst_j < 1e-18 && worst_p < 1e-9,
        format!("max J = {worst_j:.2e}, max position error = {worst_p:.2e} m"),
    )
}

fn fim_finite_difference() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rect = random_rectangle(&mut rng);
        let p = random_front_point(&mut rng, &rect);
        let var = 10f64.powf(rng.random_range(-8.0..-2.0));
        let closed = fim(p, &rect.corners(), var).unwrap();
        let fd = finite_difference_fim(p, &rect.corners(), var, 1e-4);
        let floor = 1e-6 * closed.abs().max();
        for (c, f) in closed.iter().zip(fd.iter()) {
            worst = worst.max((c - f).abs() / c.abs().max(floor));
        }
    }
    outcome(
        worst <= 1e-3,
        format!("max relative entry error {worst:.2e} over 100 geometries"),
    )
}

fn crlb_ordering() -> Outcome {
    let start = Instant::now();
    let sweep = [1e-7, 1e-6, 1e-5];
    let t = run(FigureId::MseVsSigma, &sweep, 10_000, &ScenarioConfig::baseline());
    let took = start.elapsed();
    let mut pass = took < Duration::from_secs(300);
    let mut parts = Vec::new();
    for s in sweep {
        let (cml, wls, bound) = (metric(&t, s, "CML"), metric(&t, s, "WLS"), metric(&t, s, "CRLB"));
        let ratio = cml / bound;
        pass &= (0.95..=2.0).contains(&ratio) && cml < wls;
        parts.push(format!("{s:e}: CML/CRLB {ratio:.3}, WLS/CML {:.3}", wls / cml));
    }
    outcome(pass, format!("{} in {took:.1?}", parts.join("; ")))
}

fn nmse_claim() -> Outcome {
    let t = run(FigureId::NmseVsSigma, &[1e-7], 1000, &ScenarioConfig::baseline());
    let v = metric(&t, 1e-7, "CML");
    outcome(v <= -13.0, format!("NMSE at 1e-7 m^2 = {v:.2} dB (limit -13 dB)"))
}

fn array_gain_claim() -> Outcome {
    let t = run(FigureId::SnrVsX, &[5.0], 1000, &ScenarioConfig::baseline());
    let gap = metric(&t, 5.0, "Optimal") - metric(&t, 5.0, "Random");
    outcome(
        (gap - 39.1).abs() <= 1.5,
        format!("optimal - random = {gap:.2} dB (target 39.1 +- 1.5)"),
    )
}

fn throughput_claim() -> Outcome {
    let t = run(FigureId::ThroughputVsX, &[5.0], 1000, &ScenarioConfig::baseline());
    let gap = metric(&t, 5.0, "Optimal") - metric(&t, 5.0, "Random");
    outcome(
        (gap - 13.0).abs() <= 1.0,
        format!("optimal - random = {gap:.2} bps/Hz (target 13 +- 1)"),
    )
}

fn estimator_ordering() -> Outcome {
    let mut cfg = ScenarioConfig::baseline();
    cfg.covariance = CovarianceModel::Genie { side: 0.1, draws: 256 };
    let dist_sweep = [0.0, 10.0, 20.0, 30.0];
    let d = run(FigureId::DistRmse, &dist_sweep, 1000, &cfg);
    let mut pass = true;
    let mut parts = Vec::new();
    for s in dist_sweep {
        let (j, m, p) = (metric(&d, s, "JMMSE"), metric(&d, s, "MMSE"), metric(&d, s, "MP"));
        pass &= j < m && j < p;
        parts.push(format!("{s} dB: JMMSE {j:.1e} MMSE {m:.1e} MP {p:.1e}"));
    }
    let loc_sweep = [20.0, 25.0, 30.0];
    let l = run(FigureId::LocRmse, &loc_sweep, 1000, &cfg);
    let worst = loc_sweep.iter().map(|&s| metric(&l, s, "JMMSE")).fold(0.0, f64::max);
    pass &= worst <= 0.05;
    outcome(
        pass,
        format!(
            "genie cube 0.1 m; {}; max loc RMSE >= 20 dB {:.2} cm",
            parts.join("; "),
            100.0 * worst
        ),
    )
}

fn pilot_accounting() -> Outcome {
    let mut cfg = ScenarioConfig::baseline();
    cfg.shared_codewords = true;
    let sc = Scenario::new(cfg).unwrap();
    let report = sc.run_trial(&mut ChaCha8Rng::seed_from_u64(9));
    outcome(
        report.pilot_slots == 20,
        format!("{} pilot slots with shared codewords", report.pilot_slots),
    )
}

fn determinism() -> Outcome {
    let cfg = ScenarioConfig::baseline();
    let mut mismatched = Vec::new();
    for figure in ris_locate::experiments::FigureId::ALL {
        let mut spec = ExperimentSpec::new(figure);
        spec.sweep.truncate(2);
        spec.trials = 8;
        spec.seed = 77;
        let a = to_csv_string(&run_experiment(&spec, &cfg, Execution::Parallel).unwrap()).unwrap();
        let b = to_csv_string(&run_experiment(&spec, &cfg, Execution::Parallel).unwrap()).unwrap();
        let c = to_csv_string(&run_experiment(&spec, &cfg, Execution::Sequential).unwrap()).unwrap();
        if a != b || a != c {
            mismatched.push(figure.name());
        }
    }
    outcome(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "all six figures byte-identical across reruns and execution modes".to_string()
        } else {
            format!("differing output: {}", mismatched.join(", "))
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("CML oracle equivalence", cml_oracle_equivalence),
        ("identity on consistent inputs", identity_on_consistent_inputs),
        ("FIM finite-difference check", fim_finite_difference),
        ("CML between CRLB and WLS", crlb_ordering),
        ("NMSE at sigma_d^2 = 1e-7", nmse_claim),
        ("array gain", array_gain_claim),
        ("throughput gap", throughput_claim),
        ("estimator ordering", estimator_ordering),
        ("pilot accounting", pilot_accounting),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!(
            "{} {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
