//! Randomized pointwise identity suite over the tensor algebra and the
//! curvature relations. Each identity reports the largest error observed over
//! all trials; exact identities must show zero error.

use rand::Rng;
use serde::Serialize;

use crate::curvature::{
    curl_from_strain_curvature, curl_from_strain_dislocation, frak_from_kbar, integrability_rhs, kbar_from_frak,
    nye_gamma_to_kbar, nye_kbar_to_gamma,
};
use crate::random;
use crate::tensor::{
    adjugate, anti, axl, big_anti, big_axl, cartan_split, dev, double_dot, mat_cross_vec, skew, sym, transpose_23,
    vol, Mat3, SkewMat3, Tensor3, Vec3, SKEW_TOL,
};

/// Relative tolerance for every non-exact identity.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Fault injection for mutation testing of the suite itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SuiteOptions {
    /// Flips the sign of the trace term in `Gamma -> K`.
    pub corrupt_nye: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<IdentityCheck>,
    pub all_passed: bool,
}

impl IdentityReport {
    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Random operands of one trial.
struct Inputs {
    a: Mat3,
    b: Mat3,
    m: Mat3,
    c: Mat3,
    s: Tensor3,
    u: Vec3,
    v: Vec3,
    w: Vec3,
    h: Vec3,
    k: Vec3,
}

impl Inputs {
    fn draw(rng: &mut impl Rng) -> Self {
        Self {
            a: random::invertible_mat3(rng),
            b: random::invertible_mat3(rng),
            m: random::mat3(rng),
            c: random::mat3(rng),
            s: Tensor3::from_slices(&[random::mat3(rng), random::mat3(rng), random::mat3(rng)]),
            u: random::vec3(rng),
            v: random::vec3(rng),
            w: random::vec3(rng),
            h: random::vec3(rng),
            k: random::vec3(rng),
        }
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

fn rel_mat(x: &Mat3, y: &Mat3) -> f64 {
    rel((x - y).norm(), x.norm().max(y.norm()))
}

fn rel_vec(x: &Vec3, y: &Vec3) -> f64 {
    rel((x - y).norm(), x.norm().max(y.norm()))
}

fn rel_scalar(x: f64, y: f64) -> f64 {
    rel((x - y).abs(), x.abs().max(y.abs()))
}

type Check = fn(&Inputs, &SuiteOptions) -> f64;

fn gamma_to_kbar(g: &Mat3, opts: &SuiteOptions) -> Mat3 {
    if opts.corrupt_nye {
        -Mat3::identity() * g.trace() - g.transpose()
    } else {
        nye_gamma_to_kbar(g)
    }
}

fn checks() -> Vec<(&'static str, f64, Check)> {
    vec![
        ("axl_anti_roundtrip", 0.0, |x, _| (axl(&anti(&x.v)) - x.v).amax()),
        ("anti_axl_roundtrip", 0.0, |x, _| {
            let s = SkewMat3::from_matrix(&skew(&x.m), 0.0).expect("skew part is skew");
            (anti(&axl(&s)).matrix() - s.matrix()).amax()
        }),
        ("anti_is_cross_product", IDENTITY_TOL, |x, _| rel_vec(&(anti(&x.v).matrix() * x.w), &x.v.cross(&x.w))),
        ("eps_colon_big_anti", IDENTITY_TOL, |x, _| {
            rel_mat(&double_dot(&Tensor3::levi_civita(), &big_anti(&x.m)), &(x.m * -2.0))
        }),
        ("big_axl_big_anti_roundtrip", IDENTITY_TOL, |x, _| {
            rel_mat(&big_axl(&big_anti(&x.m), SKEW_TOL).expect("Anti image has skew slices"), &x.m)
        }),
        ("eps_colon_eps", IDENTITY_TOL, |_, _| {
            let e = Tensor3::levi_civita();
            rel_mat(&double_dot(&e, &e), &(Mat3::identity() * 2.0))
        }),
        ("transpose_23_involution", 0.0, |x, _| transpose_23(&transpose_23(&x.s)).max_abs_diff(&x.s)),
        ("adjugate_identity", IDENTITY_TOL, |x, _| {
            rel_mat(&(x.m * adjugate(&x.m)), &(Mat3::identity() * x.m.determinant()))
        }),
        ("cartan_reassembly", IDENTITY_TOL, |x, _| rel_mat(&cartan_split(&x.m).reassemble(), &x.m)),
        ("cartan_pythagoras", IDENTITY_TOL, |x, _| {
            let p = cartan_split(&x.m);
            let parts = p.devsym.norm_squared() + p.skew.matrix().norm_squared() + p.sphere_part().norm_squared();
            rel_scalar(parts, x.m.norm_squared())
        }),
        ("nye_gamma_roundtrip", IDENTITY_TOL, |x, o| rel_mat(&nye_kbar_to_gamma(&gamma_to_kbar(&x.m, o)), &x.m)),
        ("nye_kbar_roundtrip", IDENTITY_TOL, |x, o| rel_mat(&gamma_to_kbar(&nye_kbar_to_gamma(&x.m), o), &x.m)),
        ("nye_trace", IDENTITY_TOL, |x, o| rel_scalar(gamma_to_kbar(&x.m, o).trace(), 2.0 * x.m.trace())),
        ("nye_skew", IDENTITY_TOL, |x, o| rel_mat(&skew(&gamma_to_kbar(&x.m, o)), &skew(&x.m))),
        ("nye_devsym", IDENTITY_TOL, |x, o| rel_mat(&dev(&sym(&gamma_to_kbar(&x.m, o))), &-dev(&sym(&x.m)))),
        ("frak_kbar_roundtrip", IDENTITY_TOL, |x, _| {
            rel_mat(&kbar_from_frak(&frak_from_kbar(&x.m), SKEW_TOL).expect("Anti image has skew slices"), &x.m)
        }),
        ("frak_is_anti_of_wryness", IDENTITY_TOL, |x, o| {
            let frak = frak_from_kbar(&gamma_to_kbar(&x.m, o));
            (frak - big_anti(&x.m)).norm() / x.m.norm().max(1.0)
        }),
        ("integrability_inverse", IDENTITY_TOL, |x, _| {
            let g = integrability_rhs(&x.a, &x.c).expect("fixture is invertible");
            rel_mat(&curl_from_strain_curvature(&x.a, &g).expect("fixture is invertible"), &x.c)
        }),
        ("dislocation_form_matches_wryness_form", IDENTITY_TOL, |x, o| {
            let via_gamma = curl_from_strain_curvature(&x.a, &x.m).expect("fixture is invertible");
            let via_kbar = curl_from_strain_dislocation(&x.a, &gamma_to_kbar(&x.m, o)).expect("fixture is invertible");
            rel_mat(&via_kbar, &via_gamma)
        }),
        ("commute_vector_products", IDENTITY_TOL, |x, _| {
            let (a, b) = (&x.m, &x.b);
            let lhs = (a * x.h).cross(&(b * x.k)) - (a * x.k).cross(&(b * x.h));
            let adj_b = adjugate(b);
            let b_inv = adj_b / b.determinant();
            let op = adj_b.transpose() * (a * b_inv).trace() - (adj_b * a * b_inv).transpose();
            rel_vec(&lhs, &(op * x.h.cross(&x.k)))
        }),
        ("double_cross_adjugate", IDENTITY_TOL, |x, _| {
            let a = &x.m;
            let (ah, ak) = (a * x.h, a * x.k);
            let lhs = (adjugate(a).transpose() * x.h.cross(&x.k)).cross(&x.v);
            rel_vec(&lhs, &(ah.cross(&ak.cross(&x.v)) - ak.cross(&ah.cross(&x.v))))
        }),
        ("vol_cross_product", IDENTITY_TOL, |x, _| rel_scalar(x.u.cross(&x.v).dot(&x.w), vol(&x.u, &x.v, &x.w))),
        ("vol_alternating", 0.0, |x, _| vol(&x.u, &x.u, &x.w).abs()),
        ("vol_determinant", IDENTITY_TOL, |x, _| {
            let a = &x.m;
            rel_scalar(vol(&(a * x.u), &(a * x.v), &(a * x.w)), a.determinant() * vol(&x.u, &x.v, &x.w))
        }),
        ("vol_adjugate", IDENTITY_TOL, |x, _| {
            let a = &x.m;
            rel_scalar(vol(&(a * x.u), &(a * x.v), &x.w), vol(&x.u, &x.v, &(adjugate(a) * x.w)))
        }),
        ("vol_trace", IDENTITY_TOL, |x, _| {
            let a = &x.m;
            let lhs = vol(&(a * x.u), &x.v, &x.w) + vol(&x.u, &(a * x.v), &x.w) + vol(&x.u, &x.v, &(a * x.w));
            rel_scalar(lhs, a.trace() * vol(&x.u, &x.v, &x.w))
        }),
        ("mat_cross_vec_rows", IDENTITY_TOL, |x, _| {
            let p = mat_cross_vec(&x.m, &x.v);
            (0..3)
                .map(|i| {
                    let row: Vec3 = x.m.row(i).transpose();
                    rel_vec(&p.row(i).transpose(), &row.cross(&x.v))
                })
                .fold(0.0, f64::max)
        }),
    ]
}

/// Names of all identities in report order.
pub fn identity_names() -> Vec<&'static str> {
    checks().into_iter().map(|c| c.0).collect()
}

/// Runs every identity on `trials` random operand sets drawn from `seed`.
pub fn run_identity_suite(trials: usize, seed: u64, opts: SuiteOptions) -> IdentityReport {
    let list = checks();
    let mut max_err = vec![0.0f64; list.len()];
    let mut rng = random::seeded(seed);
    for _ in 0..trials {
        let x = Inputs::draw(&mut rng);
        for (slot, (_, _, f)) in max_err.iter_mut().zip(&list) {
            let e = f(&x, &opts);
            // NaN must fail
            *slot = if e.is_nan() || slot.is_nan() { f64::NAN } else { slot.max(e) };
        }
    }
    let checks: Vec<IdentityCheck> = list
        .iter()
        .zip(max_err)
        .map(|((name, tol, _), e)| IdentityCheck { name, max_error: e, tolerance: *tol, passed: e <= *tol })
        .collect();
    let all_passed = checks.iter().all(|c| c.passed);
    IdentityReport { trials, seed, checks, all_passed }
}
