//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p cosserat-cli --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use cosserat::cases::case_by_name;
use cosserat::compatibility::{check_compatibility, perturb_incompatible};
use cosserat::convergence::{
    run_convergence, ConvergenceReport, Order, CHECK_COMPATIBILITY, CHECK_INTEGRABILITY, CHECK_RECON_DEFORMATION,
    CHECK_RECON_ROTATION,
};
use cosserat::curvature::{linearization_gap, linearized_curvature, smooth_displacement_gradient};
use cosserat::energy::{
    clamp_tangential, gradient, korn_ratio, minimize, retract, stored_energy, total_energy, BoundarySpec,
    CosseratParams, EnergyGradient, Face, MinimizeOptions, MinimizeState,
};
use cosserat::identities::{run_identity_suite, SuiteOptions};
use cosserat::random;
use cosserat::reconstruction::{integrate_deformation, integrate_rotation, Gauge};
use cosserat::tensor::anti_mat;
use cosserat::{Grid3, GridField, Mat3, Vec3};

const ORDER: f64 = 2.0;
const ORDER_TOL: f64 = 0.3;
const SEED: u64 = 42;

type Criterion<'a> = (usize, &'static str, Box<dyn FnOnce() -> Outcome + 'a>);

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn fmt_orders(orders: &[Order]) -> String {
    orders.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn orders_ok(orders: &[Order]) -> bool {
    !orders.is_empty() && orders.iter().all(|o| o.near(ORDER, ORDER_TOL))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn study(case: &str) -> (ConvergenceReport, Duration) {
    timed(|| run_convergence(&case_by_name(case).unwrap(), 3, 17).unwrap())
}

fn identity_suite() -> Outcome {
    let (r, t) = timed(|| run_identity_suite(1000, SEED, SuiteOptions::default()));
    let worst = r.checks.iter().filter(|c| c.tolerance > 0.0).map(|c| c.max_error).fold(0.0, f64::max);
    let failed: Vec<_> = r.failures().map(|c| c.name).collect();
    Outcome::new(
        r.all_passed && t < Duration::from_secs(5),
        format!("{} identities, worst relative error {worst:.2e}, failures {failed:?}, {t:.2?}", r.checks.len()),
    )
}

fn integrability(case: &str, report: &ConvergenceReport, t: Duration, budget: Duration) -> Outcome {
    let orders = report.orders_of(CHECK_INTEGRABILITY);
    let errors: Vec<_> = report.levels.iter().map(|l| format!("{:.2e}", l.errors[CHECK_INTEGRABILITY])).collect();
    Outcome::new(
        orders_ok(orders) && t < budget,
        format!("{case}: errors [{}], orders [{}], {t:.2?}", errors.join(", "), fmt_orders(orders)),
    )
}

fn compatibility(bend: &ConvergenceReport) -> Outcome {
    let compatible = bend.orders_of(CHECK_COMPATIBILITY);
    let residuals: Vec<f64> = [17, 33, 65]
        .iter()
        .map(|&n| {
            let g = Grid3::unit_cube(n).unwrap();
            let u = case_by_name("bend").unwrap().sample_all(&g).unwrap().stretch;
            check_compatibility(&perturb_incompatible(&u, 0.1), None).unwrap().max_residual
        })
        .collect();
    let persistent = residuals.windows(2).all(|w| w[1] > 0.9 * w[0]);
    Outcome::new(
        orders_ok(compatible) && persistent,
        format!(
            "compatible orders [{}], incompatible residuals [{}]",
            fmt_orders(compatible),
            residuals.iter().map(|r| format!("{r:.4e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn gauge_equivariance_error() -> f64 {
    let g = Grid3::unit_cube(17).unwrap();
    let u = case_by_name("twist-composite").unwrap().sample_all(&g).unwrap().stretch;
    let a = cosserat::compatibility::a_field(&u).unwrap();
    let mut rng = random::seeded(SEED);
    let q = random::rotation(&mut rng);
    let shift = random::vec3(&mut rng);
    let base = [5, 11, 2];
    let plain = Gauge::identity_at(base, &g);
    let moved = Gauge { r0: q, phi0: q * plain.phi0 + shift, ..plain };
    let (r1, r2) = (integrate_rotation(&a, &plain).unwrap(), integrate_rotation(&a, &moved).unwrap());
    let (p1, p2) =
        (integrate_deformation(&r1, &u, &plain).unwrap(), integrate_deformation(&r2, &u, &moved).unwrap());
    let rot = r1.data().iter().zip(r2.data()).map(|(x, y)| (q.matrix() * x.matrix() - y.matrix()).amax());
    let def = p1.data().iter().zip(p2.data()).map(|(x, y)| (q * *x + shift - y).amax());
    rot.chain(def).fold(0.0, f64::max)
}

fn reconstruction(twist: &ConvergenceReport) -> Outcome {
    let (rot, def) = (twist.orders_of(CHECK_RECON_ROTATION), twist.orders_of(CHECK_RECON_DEFORMATION));
    let gauge = gauge_equivariance_error();
    Outcome::new(
        orders_ok(rot) && orders_ok(def) && gauge < 1e-10,
        format!("rotation orders [{}], deformation orders [{}], gauge error {gauge:.2e}", fmt_orders(rot), fmt_orders(def)),
    )
}

fn linearization() -> Outcome {
    let discrepancy = |n: usize| {
        let g = Grid3::unit_cube(n).unwrap();
        let gradu = GridField::from_positions(g, |x| smooth_displacement_gradient(x, 1.0));
        linearized_curvature(&gradu).unwrap().max_discrepancy
    };
    let d: Vec<f64> = [17, 33, 65].iter().map(|&n| discrepancy(n)).collect();
    let h_orders: Vec<Order> = d.windows(2).map(|w| Order::between(w[0], w[1])).collect();
    let g = Grid3::unit_cube(17).unwrap();
    let eps = 1e-2;
    let ratio = linearization_gap(&g, eps).unwrap() / linearization_gap(&g, eps / 2.0).unwrap();
    Outcome::new(
        orders_ok(&h_orders) && (ratio - 4.0).abs() < 0.5,
        format!("h orders [{}], eps ratio {ratio:.3} (eps {eps})", fmt_orders(&h_orders)),
    )
}

fn worst_gradient_error() -> f64 {
    let g = Grid3::new([5, 4, 6], [0.25, 0.3, 0.2], [0.0, 0.1, -0.3]).unwrap();
    let p = CosseratParams { mu: 1.0, lambda: 0.8, mu_c: 0.4, lc: 0.3, lc_hat: 0.2, q: 4.0, body_force: [0.1, -0.2, 0.3] };
    let bc = BoundarySpec::penalty(vec![Face::Xmin, Face::Zmax], 2.0);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let mut rng = random::seeded(1000 + trial);
        let s = MinimizeState::perturbed(g, 0.02, &mut rng);
        let grad = gradient(&s, &p, &bc).unwrap();
        let dphi = (0..g.len())
            .map(|n| if bc.on_dirichlet(&g, n) { Vec3::zeros() } else { random::vec3(&mut rng) })
            .collect();
        let drot = (0..g.len()).map(|_| random::vec3(&mut rng)).collect();
        let dir = EnergyGradient { dphi: GridField::new(g, dphi).unwrap(), drot: GridField::new(g, drot).unwrap() };
        // retract moves against its direction argument
        let eps = 1e-6;
        let fd = (total_energy(&retract(&s, &dir, -eps), &p, &bc).unwrap()
            - total_energy(&retract(&s, &dir, eps), &p, &bc).unwrap())
            / (2.0 * eps);
        let exact: f64 = grad.dphi.data().iter().zip(dir.dphi.data()).map(|(a, b)| a.dot(b)).sum::<f64>()
            + grad.drot.data().iter().zip(dir.drot.data()).map(|(a, b)| a.dot(b)).sum::<f64>();
        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-8));
    }
    worst
}

fn frame_indifference_error() -> f64 {
    let g = Grid3::unit_cube(9).unwrap();
    let p = CosseratParams { mu: 1.0, lambda: 0.8, mu_c: 0.4, lc: 0.3, lc_hat: 0.2, q: 4.0, body_force: [0.0; 3] };
    let mut rng = random::seeded(SEED);
    let s = MinimizeState::perturbed(g, 0.01, &mut rng);
    let q = random::rotation(&mut rng);
    let b = random::vec3(&mut rng) * 5.0;
    let moved = MinimizeState::from_fields(s.phi.map(|x| q * *x + b), &s.rotations().map(|r| q.compose(r))).unwrap();
    let (e0, e1) = (stored_energy(&s, &p).unwrap(), stored_energy(&moved, &p).unwrap());
    (e0 - e1).abs() / e0.abs().max(1.0)
}

fn energy() -> Outcome {
    let fd = worst_gradient_error();
    let frame = frame_indifference_error();
    let g = Grid3::unit_cube(9).unwrap();
    let p = CosseratParams { mu: 1.0, lambda: 1.0, mu_c: 0.0, lc: 0.1, lc_hat: 0.1, q: 4.0, body_force: [0.0; 3] };
    let bc = BoundarySpec::hard(Face::ALL.to_vec());
    let start = MinimizeState::perturbed(g, 0.05, &mut random::seeded(SEED));
    let opts = MinimizeOptions { max_iter: 5000, grad_tol: 1e-7, ..Default::default() };
    let (out, t) = timed(|| minimize(&start, &p, &bc, &opts).unwrap());
    let trace = &out.state.energy_trace;
    let last = *trace.last().unwrap();
    let monotone = trace.windows(2).all(|w| w[1] <= w[0]);
    Outcome::new(
        fd < 1e-5 && frame < 1e-10 && last < 1e-8 && out.state.iterations <= 5000 && monotone,
        format!(
            "fd rel error {fd:.2e}, frame error {frame:.2e}, zero load: E {:.2e} -> {last:.2e} in {} iterations \
             (monotone {monotone}, {t:.2?})",
            trace[0], out.state.iterations
        ),
    )
}

fn korn() -> Outcome {
    let mut mins = Vec::new();
    for n in [9, 17] {
        let g = Grid3::unit_cube(n).unwrap();
        let mut rng = random::seeded(SEED + n as u64);
        let min = (0..200)
            .map(|_| {
                let p = clamp_tangential(&random::smooth_mat3_field(&g, &mut rng));
                korn_ratio(&p.map(|m| Mat3::identity() + m)).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        mins.push((n, min));
    }
    let g = Grid3::unit_cube(9).unwrap();
    let skew = anti_mat(&Vec3::new(0.3, -0.2, 0.5));
    let counter = korn_ratio(&GridField::constant(g, Mat3::identity() + skew)).unwrap();
    Outcome::new(
        mins.iter().all(|(_, m)| *m > 0.0) && counter == 0.0,
        format!(
            "min ratio {}, constant skew ratio {counter}",
            mins.iter().map(|(n, m)| format!("{n}^3: {m:.4e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn run_twice(args: &[&str], report: &str, dir: &std::path::Path) -> bool {
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.join(format!("run{run}"));
        let status = Command::new(env!("CARGO_BIN_EXE_cosserat"))
            .args(args)
            .arg("--output")
            .arg(if report.is_empty() { out.clone() } else { out.with_extension(report) })
            .status()
            .expect("binary runs");
        if !status.success() {
            return false;
        }
        let file = if report.is_empty() { out.join("report.json") } else { out.with_extension(report) };
        outputs.push(std::fs::read(file).expect("report written"));
    }
    outputs[0] == outputs[1]
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("params.json");
    std::fs::write(
        &config,
        r#"{"mu":1,"lambda":1,"mu_c":0.5,"Lc":0.2,"Lc_hat":0.2,"f":[0,0,0.05],
            "bc":{"faces":["zmin"],"mode":"penalty","penalty_weight":1},
            "grid":{"dims":[5,5,5]},"max_iter":200,"grad_tol":1e-9,"perturbation":0.02}"#,
    )
    .unwrap();
    let cases: [(&str, Vec<&str>, &str); 3] = [
        ("identities", vec!["check-identities", "--trials", "300", "--seed", "7"], "json"),
        ("convergence", vec!["convergence", "--case", "bend", "--levels", "2", "--nodes", "9"], "csv"),
        ("minimize", vec!["minimize", "--config", config.to_str().unwrap(), "--seed", "3"], ""),
    ];
    let results: Vec<(&str, bool)> = cases
        .iter()
        .map(|(name, args, ext)| {
            let sub = dir.path().join(name);
            std::fs::create_dir_all(&sub).unwrap();
            (*name, run_twice(args, ext, &sub))
        })
        .collect();
    Outcome::new(
        results.iter().all(|r| r.1),
        results.iter().map(|(n, ok)| format!("{n} identical: {ok}")).collect::<Vec<_>>().join(", "),
    )
}

fn main() -> ExitCode {
    let (twist, t_twist) = study("twist-composite");
    let (polar, t_polar) = study("polar");
    let (bend, _) = study("bend");
    let budget = Duration::from_secs(60);

    let criteria: Vec<Criterion> = vec![
        (1, "pointwise identities", Box::new(identity_suite)),
        (2, "integrability formula", Box::new(|| integrability("twist-composite", &twist, t_twist, budget))),
        (3, "symmetric stretch", Box::new(|| integrability("polar", &polar, t_polar, budget))),
        (4, "compatibility", Box::new(|| compatibility(&bend))),
        (5, "reconstruction", Box::new(|| reconstruction(&twist))),
        (6, "linearization", Box::new(linearization)),
        (7, "energy", Box::new(energy)),
        (8, "korn ratio", Box::new(korn)),
        (9, "determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (id, name, check) in criteria {
        let o = check();
        failures += usize::from(!o.passed);
        println!("criterion {id} ({name}): {} | {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
