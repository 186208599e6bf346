//! Test problems with known solutions and their default run settings.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::driver::AneConfig;
use crate::estimators::{FluxWeight, Marking};
use crate::problem::PdeProblem;
use crate::quadrature::{build_mesh, Domain, MeshResolution, Point};
use crate::trainer::TrainConfig;

/// Settings for the complementary (flux) solve on a case.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSettings {
    pub neurons: usize,
    pub degree: u32,
    pub learning_rate: f64,
}

#[derive(Clone, Debug)]
pub struct BenchmarkCase {
    pub name: &'static str,
    pub problem: PdeProblem,
    pub config: AneConfig,
    pub dual: Option<DualSettings>,
}

impl BenchmarkCase {
    /// Everything except the coefficient closures, as JSON.
    pub fn describe(&self) -> serde_json::Value {
        json!({
            "name": self.name,
            "domain": self.problem.domain,
            "gamma_d": self.problem.gamma_d,
            "gamma_n": self.problem.gamma_n,
            "config": self.config,
            "dual": self.dual,
        })
    }
}

pub const CASE_NAMES: [&str; 4] = ["poisson1d", "lshape", "kellogg", "dual_manufactured"];

/// Look a case up by name; `dual` is accepted for `dual_manufactured`.
pub fn by_name(name: &str) -> Option<BenchmarkCase> {
    match name {
        "poisson1d" => Some(poisson1d()),
        "lshape" => Some(lshape()),
        "kellogg" => Some(kellogg()),
        "dual" | "dual_manufactured" => Some(dual_manufactured()),
        _ => None,
    }
}

pub fn all() -> Vec<BenchmarkCase> {
    vec![poisson1d(), lshape(), kellogg(), dual_manufactured()]
}

fn bump(x: f64) -> f64 {
    (-(x - 1.0 / 3.0).powi(2) / 0.01).exp()
}

fn tail() -> f64 {
    (-4.0 / 9.0 / 0.01f64).exp()
}

pub fn poisson1d_u(x: f64) -> f64 {
    x * (bump(x) - tail())
}

pub fn poisson1d_du(x: f64) -> f64 {
    let g = bump(x);
    g - tail() - 200.0 * x * (x - 1.0 / 3.0) * g
}

pub fn poisson1d_d2u(x: f64) -> f64 {
    let s = x - 1.0 / 3.0;
    (-400.0 * s + x * (-200.0 + 40000.0 * s * s)) * bump(x)
}

pub fn poisson1d_f(x: f64) -> f64 {
    -40000.0 * (x.powi(3) - 2.0 * x * x / 3.0 + 173.0 * x / 1800.0 + 1.0 / 300.0) * (-100.0 * (x - 1.0 / 3.0).powi(2)).exp()
}

pub fn poisson1d() -> BenchmarkCase {
    let problem = PdeProblem::new(Domain::interval(0.0, 1.0).expect("valid interval"))
        .with_source(|x| poisson1d_f(x[0]))
        .with_penalties(2000.0, 1.0)
        .with_exact(|x| poisson1d_u(x[0]), |x| [poisson1d_du(x[0]), 0.0]);
    let config = AneConfig {
        tolerance: 0.08,
        marking: Marking::Average,
        start_neurons: 10,
        train: TrainConfig::default().with_learning_rate(0.002),
        flux_train: AneConfig::default_flux_train().with_learning_rate(0.002),
        resolution: MeshResolution::Interval { m: 1000 },
        ..AneConfig::default()
    };
    BenchmarkCase {
        name: "poisson1d",
        problem,
        config,
        dual: None,
    }
}

/// Polar angle in `[lo, lo + 2π)`, snapping values within `1e-12` below
/// `lo` up to `lo`.
pub fn polar_angle(x: &Point, lo: f64) -> f64 {
    let mut t = x[1].atan2(x[0]);
    while t < lo - 1e-12 {
        t += TAU;
    }
    while t >= lo + TAU - 1e-12 {
        t -= TAU;
    }
    t.max(lo)
}

const LSHAPE_EXP: f64 = 2.0 / 3.0;

pub fn lshape_u(x: &Point) -> f64 {
    let r = x[0].hypot(x[1]);
    let t = polar_angle(x, 0.0);
    r.powf(LSHAPE_EXP) * ((2.0 * t + PI) / 3.0).sin()
}

pub fn lshape_grad(x: &Point) -> Point {
    let r = x[0].hypot(x[1]);
    let t = polar_angle(x, 0.0);
    let phase = (2.0 * t + PI) / 3.0;
    let ur = LSHAPE_EXP * r.powf(LSHAPE_EXP - 1.0) * phase.sin();
    let ut_r = LSHAPE_EXP * r.powf(LSHAPE_EXP - 1.0) * phase.cos();
    polar_to_cartesian(t, ur, ut_r)
}

/// `u_r e_r + (u_θ / r) e_θ`.
fn polar_to_cartesian(t: f64, ur: f64, ut_over_r: f64) -> Point {
    let (s, c) = t.sin_cos();
    [ur * c - ut_over_r * s, ur * s + ut_over_r * c]
}

pub fn lshape() -> BenchmarkCase {
    let domain = Domain::polar_sector(1.0, 0.0, 1.5 * PI).expect("valid sector");
    let problem = PdeProblem::new(domain)
        .with_dirichlet(lshape_u)
        .with_penalties(200.0, 1.0)
        .with_exact(lshape_u, lshape_grad);
    let config = AneConfig {
        tolerance: 0.15,
        marking: Marking::Bulk { fraction: 0.5 },
        start_neurons: 20,
        train: TrainConfig::default().with_learning_rate(0.001),
        flux_train: AneConfig::default_flux_train().with_learning_rate(0.001),
        resolution: MeshResolution::Polar { m_r: 50, m_theta: 270 },
        ..AneConfig::default()
    };
    BenchmarkCase {
        name: "lshape",
        problem,
        config,
        dual: None,
    }
}

pub const KELLOGG_R: f64 = 161.4476387975881;
pub const KELLOGG_BETA: f64 = 0.1;
pub const KELLOGG_RHO: f64 = FRAC_PI_4;
pub const KELLOGG_SIGMA: f64 = -14.92256510455152;

/// Quadrant index `0..4` of an angle in `[0, 2π)`.
fn quadrant(t: f64) -> usize {
    ((t / FRAC_PI_2) as usize).min(3)
}

/// Angular factor of the Kellogg solution on quadrant `q`, with derivative.
pub fn kellogg_mu_piece(q: usize, t: f64) -> (f64, f64) {
    let (b, rho, sigma) = (KELLOGG_BETA, KELLOGG_RHO, KELLOGG_SIGMA);
    let (amp, shift) = match q {
        0 => (((FRAC_PI_2 - sigma) * b).cos(), FRAC_PI_2 - rho),
        1 => ((rho * b).cos(), PI - sigma),
        2 => ((sigma * b).cos(), PI + rho),
        _ => (((FRAC_PI_2 - rho) * b).cos(), 1.5 * PI + sigma),
    };
    let arg = (t - shift) * b;
    (amp * arg.cos(), -amp * b * arg.sin())
}

pub fn kellogg_alpha(x: &Point) -> f64 {
    // Quadrants 1 and 3 are where x and y share a sign.
    if x[0] * x[1] > 0.0 {
        KELLOGG_R
    } else {
        1.0
    }
}

pub fn kellogg_u(x: &Point) -> f64 {
    let r = x[0].hypot(x[1]);
    let t = polar_angle(x, 0.0);
    r.powf(KELLOGG_BETA) * kellogg_mu_piece(quadrant(t), t).0
}

pub fn kellogg_grad(x: &Point) -> Point {
    let r = x[0].hypot(x[1]);
    let t = polar_angle(x, 0.0);
    let (mu, dmu) = kellogg_mu_piece(quadrant(t), t);
    let rb = r.powf(KELLOGG_BETA - 1.0);
    polar_to_cartesian(t, KELLOGG_BETA * rb * mu, rb * dmu)
}

pub fn kellogg() -> BenchmarkCase {
    let problem = PdeProblem::new(Domain::unit_disk())
        .with_scalar_diffusion(kellogg_alpha)
        .with_dirichlet(kellogg_u)
        .with_penalties(200.0, 1.0)
        .with_exact(kellogg_u, kellogg_grad);
    let config = AneConfig {
        tolerance: 0.6,
        marking: Marking::Bulk { fraction: 0.7 },
        flux_weight: FluxWeight::Identity,
        start_neurons: 20,
        train: TrainConfig::default().with_learning_rate(0.001),
        flux_train: AneConfig::default_flux_train().with_learning_rate(0.001),
        resolution: MeshResolution::Polar { m_r: 50, m_theta: 360 },
        ..AneConfig::default()
    };
    BenchmarkCase {
        name: "kellogg",
        problem,
        config,
        dual: None,
    }
}

pub fn dual_u(x: &Point) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

pub fn dual_grad(x: &Point) -> Point {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    [PI * cx * sy, PI * sx * cy]
}

pub fn dual_manufactured() -> BenchmarkCase {
    let domain = Domain::rectangle(0.0, 1.0, 0.0, 1.0).expect("valid square");
    let problem = PdeProblem::new(domain)
        .with_reaction(|_| 1.0)
        .with_source(|x| (2.0 * PI * PI + 1.0) * dual_u(x))
        .with_penalties(200.0, 1.0)
        .with_exact(dual_u, dual_grad);
    let config = AneConfig {
        tolerance: 0.2,
        marking: Marking::Bulk { fraction: 0.5 },
        start_neurons: 16,
        max_stages: 4,
        train: TrainConfig::default().with_learning_rate(0.005),
        flux_train: AneConfig::default_flux_train().with_learning_rate(0.005),
        resolution: MeshResolution::Grid { m_x: 40, m_y: 40 },
        ..AneConfig::default()
    };
    BenchmarkCase {
        name: "dual_manufactured",
        problem,
        config,
        dual: Some(DualSettings {
            neurons: 24,
            degree: 2,
            learning_rate: 0.005,
        }),
    }
}

/// Outcome of one fixture oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureCheck {
    pub case: String,
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl FixtureCheck {
    fn new(case: &str, check: &str, value: f64, tolerance: f64) -> Self {
        FixtureCheck {
            case: case.into(),
            check: check.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

/// Check each exact solution against its equation, boundary and
/// interface conditions.
pub fn validate_fixtures() -> Vec<FixtureCheck> {
    let mut out = Vec::new();

    let (mut res, mut fmax) = (0.0f64, 0.0f64);
    for j in 0..1000 {
        let x = (j as f64 + 0.5) / 1000.0;
        res = res.max((-poisson1d_d2u(x) - poisson1d_f(x)).abs());
        fmax = fmax.max(poisson1d_f(x).abs());
    }
    out.push(FixtureCheck::new("poisson1d", "relative residual of -u'' = f", res / fmax, 1e-6));
    out.push(FixtureCheck::new(
        "poisson1d",
        "boundary values",
        poisson1d_u(0.0).abs().max(poisson1d_u(1.0).abs()),
        1e-15,
    ));

    // Polar Laplacian u_rr + u_r / r + u_θθ / r² with each term analytic.
    let lam = LSHAPE_EXP;
    let mut lap = 0.0f64;
    for i in 0..40 {
        let r = (i as f64 + 0.5) / 40.0;
        for j in 0..40 {
            let t = (j as f64 + 0.5) / 40.0 * 1.5 * PI;
            let s = ((2.0 * t + PI) / 3.0).sin();
            let urr = lam * (lam - 1.0) * r.powf(lam - 2.0) * s;
            let ur = lam * r.powf(lam - 1.0) * s;
            let utt = -lam * lam * r.powf(lam) * s;
            lap = lap.max((urr + ur / r + utt / (r * r)).abs());
        }
    }
    out.push(FixtureCheck::new("lshape", "harmonicity", lap, 1e-8));
    out.push(FixtureCheck::new(
        "lshape",
        "trace on theta = 0",
        (lshape_u(&[0.7, 0.0]) - 0.7f64.powf(lam) * (PI / 3.0).sin()).abs(),
        1e-14,
    ));

    let alpha = [KELLOGG_R, 1.0, KELLOGG_R, 1.0];
    let (mut ju, mut jf) = (0.0f64, 0.0f64);
    for q in 0..4 {
        let next = (q + 1) % 4;
        let t = FRAC_PI_2 * (q + 1) as f64;
        let t_next = if next == 0 { 0.0 } else { t };
        let (m0, d0) = kellogg_mu_piece(q, t);
        let (m1, d1) = kellogg_mu_piece(next, t_next);
        for i in 1..=100 {
            let rb = (i as f64 / 100.0).powf(KELLOGG_BETA);
            ju = ju.max((rb * (m0 - m1)).abs());
            jf = jf.max((rb * (alpha[q] * d0 - alpha[next] * d1)).abs());
        }
    }
    out.push(FixtureCheck::new("kellogg", "jump of u across interfaces", ju, 1e-9));
    out.push(FixtureCheck::new("kellogg", "jump of alpha du/dtheta across interfaces", jf, 1e-9));
    out.push(FixtureCheck::new(
        "kellogg",
        "periodicity of mu",
        (kellogg_mu_piece(0, 0.0).0 - kellogg_mu_piece(3, TAU).0).abs(),
        1e-12,
    ));

    let case = dual_manufactured();
    let mesh = build_mesh(&case.problem.domain, case.config.resolution).expect("valid mesh");
    let min_c = mesh.points.iter().map(|x| (case.problem.reaction)(x)).fold(f64::INFINITY, f64::min);
    out.push(FixtureCheck::new("dual_manufactured", "min c > 0", if min_c > 0.0 { 0.0 } else { 1.0 }, 0.0));
    let fine = build_mesh(&case.problem.domain, MeshResolution::Grid { m_x: 200, m_y: 200 }).expect("valid mesh");
    let s2 = fine.integrate(|x| {
        let g = dual_grad(x);
        g[0] * g[0] + g[1] * g[1]
    });
    out.push(FixtureCheck::new(
        "dual_manufactured",
        "flux norm squared vs pi^2/2",
        (s2 - PI * PI / 2.0).abs() / (PI * PI / 2.0),
        1e-4,
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fixtures_pass() {
        for c in validate_fixtures() {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn polar_angle_snaps_to_sector() {
        assert_eq!(polar_angle(&[1.0, -1e-17], 0.0), 0.0);
        assert!((polar_angle(&[0.0, -1.0], 0.0) - 1.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn names_resolve() {
        for n in CASE_NAMES {
            assert_eq!(by_name(n).unwrap().name, n);
        }
        assert!(by_name("dual").is_some());
        assert!(by_name("nope").is_none());
    }
}
