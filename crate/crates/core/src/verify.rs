//! Numerical checks of the identities the flows are derived from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energies::{mass_potential_energy, mass_potential_forces};
use crate::error::Result;
use crate::flows::{from_parameter_frame, to_parameter_frame};
use crate::geometry::{verify_frame_evolution, MarkerCurve};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Random star-shaped counter-clockwise curve around `(50, 50)`.
pub fn random_star(rng: &mut impl Rng, n: usize) -> Result<MarkerCurve> {
    let modes: Vec<(f64, f64)> = (1..=4)
        .map(|m| (rng.random_range(-0.15..0.15) / m as f64, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    let r0 = rng.random_range(10.0..30.0);
    let points = (0..n)
        .map(|i| {
            let th = std::f64::consts::TAU * (i as f64 + rng.random_range(-0.2..0.2)) / n as f64;
            let bump: f64 = modes
                .iter()
                .enumerate()
                .map(|(m, (a, ph))| a * ((m + 1) as f64 * th + ph).cos())
                .sum();
            Vec2::new(50.0, 50.0) + Vec2::new(th.cos(), th.sin()) * (r0 * (1.0 + bump))
        })
        .collect();
    MarkerCurve::new(points)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Frame evolution `T_t = (beta_s + alpha kappa) N` on an ellipse with
/// varying speeds: the residual must shrink under joint refinement
/// (`dt ~ h^2`) and vanish for a curve at rest.
pub fn check_frame_evolution() -> Result<Check> {
    let mut residuals = Vec::new();
    for n in [128, 256, 512] {
        let c = MarkerCurve::ellipse(Vec2::new(50.0, 50.0), 20.0, 12.0, n)?;
        let th = |i: usize| std::f64::consts::TAU * i as f64 / n as f64;
        let alpha: Vec<f64> = (0..n).map(|i| 0.5 * th(i).sin()).collect();
        let beta: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * th(i).cos()).collect();
        let h = c.mean_spacing();
        residuals.push(verify_frame_evolution(&c, &alpha, &beta, 0.1 * h * h)?);
    }
    let rest = {
        let c = MarkerCurve::ellipse(Vec2::new(50.0, 50.0), 20.0, 12.0, 64)?;
        verify_frame_evolution(&c, &[0.0; 64], &[0.0; 64], 1e-3)?
    };
    let converging = residuals.windows(2).all(|w| w[1] < 0.5 * w[0]);
    Ok(Check {
        name: "frame evolution",
        passed: converging && residuals[2] < 1e-2 && rest == 0.0,
        detail: format!(
            "residuals {:.2e} {:.2e} {:.2e} under refinement, {rest:e} at rest",
            residuals[0], residuals[1], residuals[2]
        ),
    })
}

/// Gradient of the mass potential against central differences of the
/// energy on `instances` random curves and densities.
pub fn check_mass_potential_gradient(rng: &mut impl Rng, instances: usize) -> Result<Check> {
    let mut worst = 0.0_f64;
    for _ in 0..instances {
        let n = rng.random_range(8..40);
        let g = rng.random_range(0.1..2.0);
        let rho: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let curve = random_star(rng, n)?.with_rho(rho.clone());
        let forces = mass_potential_forces(&curve, g)?;
        let energy = |c: &MarkerCurve| mass_potential_energy(c, g);
        let eps = 1e-5;
        let mut fd_pos = Vec::new();
        let mut exact_pos = Vec::new();
        for j in 0..n {
            for axis in 0..2 {
                let shifted = |d: f64| {
                    let mut c = curve.clone();
                    if axis == 0 {
                        c.points[j].x += d;
                    } else {
                        c.points[j].y += d;
                    }
                    energy(&c)
                };
                fd_pos.push(-(shifted(eps)? - shifted(-eps)?) / (2.0 * eps));
                let f = forces.position_force[j];
                exact_pos.push(if axis == 0 { f.x } else { f.y });
            }
        }
        let mut fd_rho = Vec::new();
        for j in 0..n {
            let shifted = |d: f64| {
                let mut r = rho.clone();
                r[j] += d;
                energy(&curve.clone().with_rho(r))
            };
            fd_rho.push((shifted(eps)? - shifted(-eps)?) / (2.0 * eps));
        }
        let scale_pos = exact_pos.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let scale_rho = forces.d_rho.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        worst = worst
            .max(max_abs_diff(&fd_pos, &exact_pos) / scale_pos)
            .max(max_abs_diff(&fd_rho, &forces.d_rho) / scale_rho);
    }
    Ok(Check {
        name: "mass potential gradient",
        passed: worst < 1e-4,
        detail: format!("worst relative error {worst:.2e} over {instances} random instances"),
    })
}

/// The mass potential at fixed total mass `M` is smallest, `(g/2) M^2`, for
/// uniform density, whatever the curve.
pub fn check_mass_potential_minimum(rng: &mut impl Rng, instances: usize) -> Result<Check> {
    let mut worst = 0.0_f64;
    let mut below = 0;
    for _ in 0..instances {
        let n = rng.random_range(8..200);
        let g = rng.random_range(0.1..3.0);
        let curve = random_star(rng, n)?;
        let mass = rng.random_range(1.0..100.0);
        let uniform = curve.clone().with_rho(vec![mass / curve.length(); n]);
        let u = mass_potential_energy(&uniform, g)?;
        let expected = 0.5 * g * mass * mass;
        worst = worst.max((u - expected).abs() / expected);
        // any other density with the same mass costs more
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
        let perturbed = curve.clone().with_rho(raw);
        let m: f64 = perturbed.mass().unwrap_or(0.0);
        let rescaled: Vec<f64> = perturbed.rho.unwrap().iter().map(|r| r * mass / m).collect();
        if mass_potential_energy(&curve.with_rho(rescaled), g)? < expected * (1.0 - 1e-12) {
            below += 1;
        }
    }
    Ok(Check {
        name: "mass potential minimum",
        passed: worst < 1e-6 && below == 0,
        detail: format!(
            "uniform density gives (g/2)M^2 within {worst:.2e}; {below} non-uniform densities fell below it"
        ),
    })
}

/// `mu = rho |C_p|` and `xi = v / |C_p|` are inverted exactly.
pub fn check_parameter_frame_round_trip(rng: &mut impl Rng, instances: usize) -> Result<Check> {
    let mut worst = 0.0_f64;
    for _ in 0..instances {
        let n = rng.random_range(8..300);
        let rho: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let curve = random_star(rng, n)?.with_rho(rho.clone()).with_v(v.clone());
        let (mu, xi) = to_parameter_frame(&curve)?;
        let (rho2, v2) = from_parameter_frame(&curve.points, &mu, &xi);
        for (a, b) in rho.iter().zip(&rho2).chain(v.iter().zip(&v2)) {
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    Ok(Check {
        name: "parameter frame round trip",
        passed: worst <= 1e-12,
        detail: format!("worst relative error {worst:.2e}"),
    })
}

/// `mu_t - mu C_ts . C_s = rho_t |C_p|` for a curve moving with
/// `C_t = alpha T + beta N` while the density changes: the finite-difference
/// residual must fall linearly with `dt`.
pub fn check_density_substitution(rng: &mut impl Rng) -> Result<Check> {
    let n = 256;
    let curve = random_star(rng, n)?;
    let rho0: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (i as f64 * 0.1).sin()).collect();
    let rate: Vec<f64> = (0..n).map(|i| 0.3 * (i as f64 * 0.05).cos()).collect();
    let frame = crate::geometry::compute_frame(&curve)?;
    let velocity: Vec<Vec2> = (0..n)
        .map(|i| {
            let a = 0.4 * (i as f64 * 0.07).sin();
            let b = 1.0 + 0.2 * (i as f64 * 0.03).cos();
            frame.tangent[i] * a + frame.normal[i] * b
        })
        .collect();
    let residual = |dt: f64| -> Result<f64> {
        let moved = MarkerCurve {
            points: curve.points.iter().zip(&velocity).map(|(p, v)| *p + *v * dt).collect(),
            ..curve.clone()
        };
        let rho1: Vec<f64> = rho0.iter().zip(&rate).map(|(r, q)| r + q * dt).collect();
        let (mu0, _) = to_parameter_frame(&curve.clone().with_rho(rho0.clone()).with_v(vec![0.0; n]))?;
        let (mu1, _) = to_parameter_frame(&moved.clone().with_rho(rho1).with_v(vec![0.0; n]))?;
        let (ds0, ds1) = (curve.dual_lengths(), moved.dual_lengths());
        Ok((0..n)
            .map(|i| {
                let mu_t = (mu1[i] - mu0[i]) / dt;
                // C_ts . C_s is the relative stretch rate of the line element
                let stretch = (ds1[i] - ds0[i]) / (ds0[i] * dt);
                (mu_t - mu0[i] * stretch - rate[i] * ds0[i]).abs() / ds0[i]
            })
            .fold(0.0, f64::max))
    };
    let (coarse, fine) = (residual(1e-3)?, residual(1e-4)?);
    Ok(Check {
        name: "density substitution",
        passed: fine < 0.2 * coarse.max(1e-14) || fine < 1e-9,
        detail: format!("residual {coarse:.2e} at dt=1e-3, {fine:.2e} at dt=1e-4"),
    })
}

/// Runs every check with random instances drawn from `seed`.
pub fn run_verify_suite(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        check_frame_evolution()?,
        check_mass_potential_gradient(&mut rng, 100)?,
        check_mass_potential_minimum(&mut rng, 100)?,
        check_parameter_frame_round_trip(&mut rng, 100)?,
        check_density_substitution(&mut rng)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_verify_suite(7).unwrap() {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn random_stars_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.random_range(8..100);
            random_star(&mut rng, n).unwrap().validate().unwrap();
        }
    }
}
