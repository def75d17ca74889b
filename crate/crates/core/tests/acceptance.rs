//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test -p mbdnn-core --test acceptance -- 5 6`.

use std::process::ExitCode;
use std::time::Instant;

use mbdnn_core::dataset::{build_lattice, sample_test_inputs, TrajectoryStore};
use mbdnn_core::eval::{mse, predict_trajectory, r_squared, roughness, MetricReport};
use mbdnn_core::experiment::{self, run_experiment, ExperimentConfig};
use mbdnn_core::ffn::{gradient_check, init_model, Activation, FfnModel};
use mbdnn_core::mbd::{embed_reduce, single_pendulum_rhs, solve_augmented, AugmentedSystem, CartesianPendulum};
use mbdnn_core::tuning::{grid_search, train_sfixed_suite, ConfigSource, SearchSpace};
use mbdnn_core::{Result, SystemKind, SystemSpec};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn r2_line(report: &MetricReport) -> String {
    report
        .columns
        .iter()
        .map(|c| format!("{}={:.5}", c.name, c.r2.unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Every `(name, minimum R2)` pair holds in `report`.
fn r2_at_least(report: &MetricReport, floors: &[(&str, f64)]) -> bool {
    floors
        .iter()
        .all(|&(name, lo)| report.r2(name).is_some_and(|v| v >= lo))
}

fn reproduce(cfg: &ExperimentConfig, floors: &[(&str, f64)]) -> Result<Verdict> {
    let dir = tempfile::tempdir().expect("tempdir");
    let summary = run_experiment(cfg, dir.path())?;
    let m = &summary.test_metrics;
    let pass = m.count == 1000 && r2_at_least(m, floors);
    Ok(Verdict::new(
        pass,
        format!("{} test points, R2 {}", m.count, r2_line(m)),
    ))
}

fn single_sfull() -> Result<Verdict> {
    let cfg = ExperimentConfig::preset(SystemKind::Single);
    reproduce(&cfg, &[("theta", 0.99), ("theta_dot", 0.99), ("theta_ddot", 0.98)])
}

fn slider_sfull() -> Result<Verdict> {
    let cfg = ExperimentConfig::preset(SystemKind::Slider);
    let floors = [
        ("theta", 0.995),
        ("phi", 0.995),
        ("x_b", 0.995),
        ("x_b_dot", 0.995),
        ("phi_dot", 0.98),
        ("phi_ddot", 0.98),
        ("x_b_ddot", 0.98),
    ];
    reproduce(&cfg, &floors)
}

fn double_desk_scale() -> Result<Verdict> {
    let mut cfg = ExperimentConfig::preset(SystemKind::Double).desk_scale(Some(0.4), Some(100))?;
    assert!(cfg.ranges.iter().all(|r| r.count == 5));
    cfg.test_max_time = Some(2.0);
    reproduce(&cfg, &[("theta1", 0.95), ("theta2", 0.95)])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Single pendulum on a 21-instant grid.
fn coarse_single() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(SystemKind::Single);
    cfg.t_final = 2.0;
    cfg.dt = 0.1;
    cfg
}

fn smoothness() -> Result<Verdict> {
    let cfg = coarse_single();
    let store = experiment::generate_store(&cfg)?;
    assert_eq!(store.grid.len(), 21);
    let full = experiment::train_sfull(&cfg, &store.sfull()?)?;
    let fixed = experiment::train_sfixed(&cfg, &store.sfixed()?)?;

    let spec = cfg.spec()?;
    let cases = &cfg.showcase[1..];
    assert_eq!(cases.len(), 4);
    let rough = |trained: &experiment::Trained| -> Result<Vec<f64>> {
        cases
            .iter()
            .map(|d| {
                predict_trajectory(trained.predictor(), &spec.model, &spec.ranges, d, &spec.time)?.residual_roughness(0)
            })
            .collect()
    };
    let (rf, rs) = (rough(&full)?, rough(&fixed)?);
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ");
    let detail = format!("sfull [{}], sfixed [{}]", list(&rf), list(&rs));
    let (mf, ms) = (median(rf), median(rs));
    Ok(Verdict::new(
        ms > mf,
        format!("median theta-residual roughness: sfixed {ms:.3e} vs sfull {mf:.3e} ({detail})"),
    ))
}

fn integrator_energy() -> Result<Verdict> {
    let double = SystemSpec::double_pendulum();
    let mut worst_drift = 0.0_f64;
    for design in sample_test_inputs(&double.ranges, 20, 5) {
        let p = double.model.double_params(&design).expect("double");
        let traj = double.model.simulate(&design, &double.time)?;
        let energy: Vec<f64> = traj.rows().map(|r| p.energy([r[0], r[1]], [r[2], r[3]])).collect();
        let e0 = energy[0];
        let drift = energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0.abs();
        worst_drift = worst_drift.max(drift);
    }

    // Per-step dissipation is asserted for damped designs; undamped ones are
    // conservative and only reported.
    let single = SystemSpec::single_pendulum();
    let mut designs = build_lattice(&single.ranges)?;
    designs.extend(sample_test_inputs(&single.ranges, 20, 5));
    let (mut damped_rise, mut undamped_rise, mut damped) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
    for design in &designs {
        let p = single.model.single_params(design).expect("single");
        let traj = single.model.simulate(design, &single.time)?;
        let energy: Vec<f64> = traj.rows().map(|r| p.energy(r[0], r[1])).collect();
        let rise = energy.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        if p.damping > 0.0 {
            damped += 1;
            damped_rise = damped_rise.max(rise);
        } else {
            undamped_rise = undamped_rise.max(rise);
        }
    }
    Ok(Verdict::new(
        worst_drift <= 1e-4 && damped_rise <= 1e-8,
        format!(
            "double max relative drift {worst_drift:.2e} (20 draws); damped single max per-step rise {damped_rise:.2e} \
             ({damped} trajectories; undamped c = 0 max rise {undamped_rise:.2e})"
        ),
    ))
}

/// Random SPD mass matrix, full-rank Jacobian with a known null-space basis
/// `T`, and a particular solution `r` of `Cq r = Fc`.
fn consistent_instance(rng: &mut ChaCha8Rng) -> (AugmentedSystem, DMatrix<f64>, DVector<f64>) {
    let n = rng.random_range(2..=6);
    let m = rng.random_range(1..n);
    let mut uni = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let a = uni(n, n);
    let mass = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
    let q = uni(n, n).qr().q();
    let basis = q.columns(0, n - m).into_owned();
    let jacobian = uni(m, m) + DMatrix::identity(m, m) * 2.0;
    let jacobian = jacobian * q.columns(n - m, m).transpose();
    let applied = uni(n, 1).column(0).into_owned();
    let constraint_rhs = uni(m, 1).column(0).into_owned();
    let cct = &jacobian * jacobian.transpose();
    let remainder = jacobian.transpose() * cct.lu().solve(&constraint_rhs).expect("full rank");
    (
        AugmentedSystem {
            mass,
            jacobian,
            applied,
            constraint_rhs,
        },
        basis,
        remainder,
    )
}

fn constrained_solver() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_pendulum = 0.0_f64;
    for _ in 0..100 {
        let pendulum = CartesianPendulum {
            mass: 0.3,
            g: 9.81,
            length: rng.random_range(0.1..0.2),
        };
        let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let omega = rng.random_range(-5.0..5.0);
        let params = SystemSpec::single_pendulum()
            .model
            .single_params(&[pendulum.length, 0.0, omega])
            .expect("single");
        let state = mbdnn_core::mbd::State::new(vec![theta], vec![omega], 0.0);
        let alpha = single_pendulum_rhs(&params, &state).qddot[0];
        let expected = pendulum.map_acceleration(theta, omega, alpha);
        let sys = pendulum.augmented(theta, omega);
        let aug = solve_augmented(&sys)?;
        let (t, r) = pendulum.embedding(theta, omega);
        let emb = embed_reduce(&sys, &t, &r)?;
        for (a, e) in aug.qddot.iter().zip(expected) {
            worst_pendulum = worst_pendulum.max((a - e).abs());
        }
        worst_pendulum = worst_pendulum.max((emb.qddot_ind[0] - alpha).abs());
    }
    let mut worst_random = 0.0_f64;
    for _ in 0..100 {
        let (sys, t, r) = consistent_instance(&mut rng);
        let aug = solve_augmented(&sys)?;
        let emb = embed_reduce(&sys, &t, &r)?;
        worst_random = worst_random.max((&emb.qddot - &aug.qddot).amax());
    }
    Ok(Verdict::new(
        worst_pendulum <= 1e-9 && worst_random <= 1e-9,
        format!("pendulum max deviation {worst_pendulum:.2e}; random instances max deviation {worst_random:.2e}"),
    ))
}

/// Smallest pre-activation magnitude of any hidden unit.
fn min_hidden_preactivation(model: &FfnModel, x: &Array2<f64>) -> f64 {
    let mut a = x.clone();
    let mut lo = f64::INFINITY;
    for layer in &model.layers[..model.layers.len() - 1] {
        let z = a.dot(&layer.weights) + &layer.bias;
        lo = z.iter().fold(lo, |m, v| m.min(v.abs()));
        a = z.mapv(|v| model.activation.apply(v));
    }
    lo
}

fn gradients() -> Result<Verdict> {
    let (mut worst, mut checks, mut redraws) = (0.0_f64, 0, 0);
    for layers in 1..=4 {
        for width in [8, 64] {
            for act in Activation::ALL {
                for seed in 0..20_u64 {
                    let mut dims = vec![4];
                    dims.extend(std::iter::repeat_n(width, layers));
                    dims.push(3);
                    let model = init_model(&dims, act, seed)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                    // ReLU is not differentiable at 0; keep every unit clear of
                    // the kink so central differences see one linear piece.
                    let x = loop {
                        let x = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
                        if act != Activation::Relu || min_hidden_preactivation(&model, &x) > 1e-4 {
                            break x;
                        }
                        redraws += 1;
                    };
                    let y = Array2::from_shape_fn((3, 3), |_| rng.random_range(-1.0..1.0));
                    worst = worst.max(gradient_check(&model, x.view(), y.view(), 1e-6, 1e-5)?);
                    checks += 1;
                }
            }
        }
    }
    Ok(Verdict::new(
        worst <= 1e-4,
        format!("{checks} networks, max relative error {worst:.2e} ({redraws} ReLU input redraws)"),
    ))
}

fn metric_identities() -> Result<Verdict> {
    let (y, yp) = ([1.0, 2.0, 3.0], [1.0, 2.0, 2.0]);
    let examples = r_squared(&y, &y)? == 1.0
        && r_squared(&y, &[2.0, 2.0, 2.0])? == 0.0
        && r_squared(&y, &yp)? == 0.5
        && mse(&y, &y)? == 0.0
        && mse(&y, &yp)? == 1.0 / 3.0
        && roughness(&[0.0, 1.0, 0.0])? == 4.0
        && roughness(&[1.0, 2.0, 3.0, 4.0])? == 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..200);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let yp: Vec<f64> = y.iter().map(|v| v + rng.random_range(-3.0..3.0)).collect();
        let mean = y.iter().sum::<f64>() / n as f64;
        let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        let identity = 1.0 - mse(&y, &yp)? * n as f64 / tss;
        worst = worst.max((r_squared(&y, &yp)? - identity).abs());
    }
    Ok(Verdict::new(
        examples && worst <= 1e-12,
        format!(
            "unit examples {}; cross-metric max deviation {worst:.2e} over 1000 vectors",
            if examples { "exact" } else { "MISMATCH" }
        ),
    ))
}

fn cardinalities() -> Result<Verdict> {
    let single = SystemSpec::single_pendulum();
    let store = TrajectoryStore::generate(&single.model, build_lattice(&single.ranges)?, single.time)?;
    let full = store.sfull()?;
    let fixed = store.sfixed()?;
    let n_t = store.grid.len();
    let mut exact = true;
    for r in 0..full.len() {
        let (j, i) = (r / n_t, r % n_t);
        let row = full.input_row(r);
        exact &= row[3].to_bits() == store.grid.time(i).to_bits()
            && row[..3] == *fixed[i].input_row(j)
            && full
                .label_row(r)
                .iter()
                .zip(fixed[i].label_row(j))
                .all(|(a, b)| a.to_bits() == b.to_bits());
    }
    let single_ok = full.len() == 267_531 && fixed.len() == 201 && fixed.iter().all(|d| d.len() == 1331);

    let double = SystemSpec::double_pendulum();
    let dstore = TrajectoryStore::generate(&double.model, build_lattice(&double.ranges)?, double.time)?;
    let mut double_sizes = Vec::new();
    for i in 0..dstore.grid.len() {
        double_sizes.push(dstore.sfixed_at(i)?.len());
    }
    let double_ok = double_sizes.len() == 501 && double_sizes.iter().all(|&n| n == 14_641);
    Ok(Verdict::new(
        single_ok && exact && double_ok,
        format!(
            "single sfull {} rows, {} sfixed sets of {} rows, bit-exact views: {exact}; double {} sfixed sets of {} rows",
            full.len(),
            fixed.len(),
            fixed[0].len(),
            double_sizes.len(),
            double_sizes[0]
        ),
    ))
}

fn search_cost() -> Result<Verdict> {
    let mut cfg = coarse_single();
    cfg.hyper.epochs = 10;
    let space = SearchSpace::architecture(&cfg.hyper, &[2, 3, 4], &[128, 256], &[64, 128]);
    let store = experiment::generate_store(&cfg)?;

    let start = Instant::now();
    let (train, val) = store.sfull()?.split_validation(cfg.val_fraction, cfg.seeds.data)?;
    grid_search(&space, &train, &val, cfg.seeds.train)?;
    let sfull = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let source = ConfigSource::PerModel { space: space.clone() };
    let (_, cost) = train_sfixed_suite(&store.sfixed()?, &source, cfg.val_fraction, cfg.seeds.train)?;
    let sfixed = start.elapsed().as_secs_f64();

    let ratio = sfixed / sfull;
    Ok(Verdict::new(
        ratio >= 3.0,
        format!(
            "{} configs x {} epochs: per-instant searches {sfixed:.1} s ({} trainings) vs time-as-input search {sfull:.1} s, ratio {ratio:.2}",
            space.len(),
            cfg.hyper.epochs,
            cost.trainings
        ),
    ))
}

type Criterion = (u32, &'static str, fn() -> Result<Verdict>);

const CRITERIA: [Criterion; 10] = [
    (1, "single pendulum time-as-input reproduction", single_sfull),
    (2, "slider crank time-as-input reproduction", slider_sfull),
    (3, "double pendulum desk-scale reproduction", double_desk_scale),
    (4, "time-as-input smoother than per-instant suite", smoothness),
    (5, "integrator energy behaviour", integrator_energy),
    (6, "constrained solver equivalence", constrained_solver),
    (7, "gradient correctness", gradients),
    (8, "metric identities", metric_identities),
    (9, "dataset cardinalities", cardinalities),
    (10, "per-instant search cost direction", search_cost),
];

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, check) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = check().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        let tag = if verdict.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {tag}: {name}: {} [{:.1} s]",
            verdict.detail,
            start.elapsed().as_secs_f64()
        );
        if !verdict.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
