//! Randomised checks of the multiplier identities and inequalities: observed
//! convergence order of the Morawetz and Morawetz-Ludwig residuals, the
//! Friedrichs-type inequality, and the radiating flux inequalities.

use num_complex::Complex64 as C;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::morawetz::{
    build_cutoff, c_chi, friedrichs_check, morawetz_ludwig_residual, morawetz_residual, q_param, radiating_flux_check, Cubic,
    GridField, MorawetzError, PointSources, ProfileMultiplier,
};
use crate::quasimode::bump;

use super::config::IdentitiesConfig;

/// Required observed order of the centered-difference residuals.
pub const MIN_ORDER: f64 = 1.9;
/// Largest admissible `Re int ubar u_r` and left side of the radiation
/// inequality.
pub const FLUX_TOLERANCE: f64 = 1e-8;
/// Base step of the step-halving study.
const BASE_STEP: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// Smallest observed order, largest `lhs/rhs`, or largest flux value.
    pub worst: f64,
    pub criterion: String,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.trials > 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }
}

fn random_cubic(rng: &mut StdRng) -> Cubic {
    let mut c = [C::new(0.0, 0.0); 10];
    for v in c.iter_mut() {
        *v = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    Cubic { c }
}

fn random_point(rng: &mut StdRng, r: f64) -> [f64; 2] {
    let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    [r * th.cos(), r * th.sin()]
}

/// Observed order under step halving; residuals already at roundoff level
/// count as converged.
pub fn observed_order(res: impl Fn(f64) -> f64, h: f64) -> f64 {
    let (a, b) = (res(h), res(0.5 * h));
    if a < 1e-11 && b < 1e-11 {
        return f64::INFINITY;
    }
    (a / b).log2()
}

fn morawetz_suite(rng: &mut StdRng, count: usize) -> Result<SuiteResult, MorawetzError> {
    let p = build_cutoff(1.0, 1.6, 0.08)?;
    let q = q_param(c_chi(&p))?;
    let junctions = [p.r0, p.r0 + p.eps, p.r1 - p.eps, p.r1];
    let m = ProfileMultiplier { profile: p, q };
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    let mut done = 0;
    while done < count {
        let v = random_cubic(rng);
        let r: f64 = rng.gen_range(0.3..2.0);
        // the stencil must not straddle a cutoff junction, where chi is only C^3
        if junctions.iter().any(|j| (r - j).abs() < 0.05) {
            continue;
        }
        let x = random_point(rng, r);
        let k = rng.gen_range(0.5..5.0);
        let beta = rng.gen_range(-2.0..2.0);
        let o = observed_order(|h| morawetz_residual(&v, &m, k, beta, x, h), BASE_STEP);
        worst = worst.min(o);
        failures += usize::from(!(o >= MIN_ORDER));
        done += 1;
    }
    Ok(SuiteResult {
        name: "morawetz_identity".into(),
        trials: count,
        failures,
        worst,
        criterion: format!("observed order >= {MIN_ORDER}"),
    })
}

fn ludwig_suite(rng: &mut StdRng, count: usize) -> SuiteResult {
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    for _ in 0..count {
        let v = random_cubic(rng);
        let r: f64 = rng.gen_range(0.5..2.0);
        let x = random_point(rng, r);
        let k = rng.gen_range(0.5..5.0);
        let alpha = rng.gen_range(-1.0..2.0);
        let o = observed_order(|h| morawetz_ludwig_residual(&v, k, alpha, x, h), BASE_STEP);
        worst = worst.min(o);
        failures += usize::from(!(o >= MIN_ORDER));
    }
    SuiteResult {
        name: "morawetz_ludwig_identity".into(),
        trials: count,
        failures,
        worst,
        criterion: format!("observed order >= {MIN_ORDER}"),
    }
}

fn friedrichs_suite(rng: &mut StdRng, count: usize) -> Result<SuiteResult, MorawetzError> {
    let r = 1.0;
    let reach = 13f64.sqrt() * r;
    let half = reach + 0.1;
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..count {
        // a compactly supported bump that fits inside the outer ball
        let w = rng.gen_range(0.2..1.5);
        let rc = rng.gen_range(0.0..(reach - w));
        let c = random_point(rng, rc);
        let a = rng.gen_range(0.5..2.0);
        let g = GridField::sample(|x| a * bump((x[0] - c[0]).hypot(x[1] - c[1]) / w), half, 257);
        let (lhs, rhs) = friedrichs_check(&g, r)?;
        let ratio = lhs / rhs;
        worst = worst.max(ratio);
        failures += usize::from(!(ratio <= 1.0));
    }
    Ok(SuiteResult {
        name: "friedrichs_inequality".into(),
        trials: count,
        failures,
        worst,
        criterion: "lhs / rhs <= 1".into(),
    })
}

fn flux_suite(rng: &mut StdRng, count: usize) -> Result<SuiteResult, MorawetzError> {
    let r = 3.0;
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for _ in 0..count {
        let k = rng.gen_range(1.0..15.0);
        let sources = (0..5)
            .map(|_| {
                let ry = rng.gen_range(0.0..0.48 * r);
                let y = random_point(rng, ry);
                (y, C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let f = radiating_flux_check(&PointSources { k, sources }, r)?;
        let v = f.re_flux.max(f.lhs_21);
        worst = worst.max(v);
        failures += usize::from(!(v <= FLUX_TOLERANCE));
    }
    Ok(SuiteResult {
        name: "radiating_flux_inequalities".into(),
        trials: count,
        failures,
        worst,
        criterion: format!("Re flux and radiation left side <= {FLUX_TOLERANCE:e}"),
    })
}

/// Run all four suites from one seed.
pub fn run_identities(cfg: &IdentitiesConfig) -> Result<IdentityReport, MorawetzError> {
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let suites = vec![
        morawetz_suite(&mut rng, cfg.morawetz_fields)?,
        ludwig_suite(&mut rng, cfg.morawetz_fields),
        friedrichs_suite(&mut rng, cfg.friedrichs_fields)?,
        flux_suite(&mut rng, cfg.flux_superpositions)?,
    ];
    Ok(IdentityReport { seed: cfg.seed, suites })
}
