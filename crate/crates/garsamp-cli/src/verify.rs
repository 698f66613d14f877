//! Validation suite: executes the library's structural guarantees against a
//! configuration and reports machine-readable pass/fail entries.

use serde::Serialize;

use garsamp::bounds::{
    bm1_bound, bm2_bound_model, build_minorant_line, check_minorant, convex_tangent_bound_model,
    generic_transform_bound, lp_transform_bound, quadratic_bound_model, BoundOptions, SplitRule,
};
use garsamp::envelope::gars_minorant;
use garsamp::model::ObservationModel;
use garsamp::numeric;
use garsamp::samplers::{gars_init, ExtraPointRule, RandomSource};
use garsamp::Result;

use crate::config::ModelConfig;
use crate::oracle::GridOracle;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            detail,
        });
    }

    fn attempt(&mut self, name: &str, run: impl FnOnce() -> Result<(bool, String)>) {
        match run() {
            Ok((pass, detail)) => self.push(name, pass, detail),
            Err(e) => self.push(name, false, format!("error: {e}")),
        }
    }
}

/// Runs every applicable structural check against the configuration.
pub fn verify_suite(cfg: &ModelConfig) -> VerifyReport {
    let mut report = VerifyReport::default();
    let model = match cfg.build() {
        Ok(m) => {
            report.push(
                "model-load",
                true,
                "declared metadata verified on construction grids".into(),
            );
            m
        }
        Err(e) => {
            report.push("model-load", false, format!("{e}"));
            return report;
        }
    };
    let oracle = match oracle_window(cfg, &model) {
        Ok(o) => o,
        Err(e) => {
            report.push("oracle", false, format!("{e}"));
            return report;
        }
    };

    report.attempt("p2-signs", || {
        for i in 0..model.len() {
            let p = model.potential(i);
            for &t in numeric::open_grid(-8.0, 8.0, 1000).iter() {
                if t == 0.0 || !p.eval(t).is_finite() {
                    continue;
                }
                if p.deriv(t) * t.signum() <= 0.0 {
                    return Ok((false, format!("potential {i} violates the sign law at {t}")));
                }
            }
        }
        Ok((true, "derivative signs match on 1000-point grids".into()))
    });

    report.attempt("minorant-conditions", || {
        for j in 0..model.region_count() {
            let est = model.simple_estimates(j)?;
            let Ok(interval) = est.search_interval() else {
                continue;
            };
            for i in 0..model.len() {
                let branch = model.branch_in_region(i, j)?;
                let line = build_minorant_line(
                    branch,
                    model.observations()[i],
                    interval,
                    est.estimates[i],
                )?;
                if !check_minorant(&line, branch, model.observations()[i], interval) {
                    return Ok((
                        false,
                        format!("line for observation {i} in region {j} fails"),
                    ));
                }
            }
        }
        Ok((
            true,
            "per-region minorant lines satisfy both residual conditions".into(),
        ))
    });

    let convex = (0..model.extended_len()).all(|i| model.extended_potential(i).is_convex());
    if convex {
        report.attempt("adaptive-minorants", || {
            let mut rng = RandomSource::new(11);
            let state = gars_init(&model, ExtraPointRule::Midpoint, &mut rng)?;
            for i in 0..model.extended_len() {
                let nl = model.extended_nonlinearity(i);
                let y = model.extended_observation(i);
                let r = gars_minorant(&nl, y, state.support())?;
                for &x in numeric::linspace(-50.0, 50.0, 10_000).iter() {
                    let rg = y - nl.eval(x);
                    let rr = y - r.eval(x);
                    if rr.abs() > rg.abs() + 1e-7 * (1.0 + rg.abs())
                        || rr * rg < -1e-7 * (1.0 + rg.abs())
                    {
                        return Ok((false, format!("term {i} fails at x = {x}")));
                    }
                }
            }
            Ok((
                true,
                "piecewise minorants satisfy both conditions on [-50, 50]".into(),
            ))
        });

        report.attempt("hull-domination", || {
            let mut rng = RandomSource::new(11);
            let state = gars_init(&model, ExtraPointRule::Midpoint, &mut rng)?;
            let (lo, hi) = oracle.domain();
            for &x in numeric::linspace(lo, hi, 10_000).iter() {
                let w = state.hull().eval(x);
                let v_mod = state.modified_potential(x);
                let v_true = model.system_potential(x).unwrap_or(f64::INFINITY);
                if w > v_mod + 1e-7 || v_mod > v_true + 1e-7 {
                    return Ok((false, format!("domination chain breaks at x = {x}")));
                }
            }
            Ok((
                true,
                "hull <= modified potential <= true potential on the oracle grid".into(),
            ))
        });

        report.attempt("envelope-normalization", || {
            let mut rng = RandomSource::new(11);
            let state = gars_init(&model, ExtraPointRule::Midpoint, &mut rng)?;
            let total: f64 = (0..state.density().segments().len())
                .map(|i| state.density().segment_mass(i))
                .sum();
            Ok((
                (total - 1.0).abs() <= 1e-10,
                format!("segment masses sum to {total}"),
            ))
        });

        report.attempt("segment-chi-square", || {
            let mut rng = RandomSource::new(23);
            let state = gars_init(&model, ExtraPointRule::Midpoint, &mut rng)?;
            let d = state.density();
            let n = 20_000usize;
            let mut counts = vec![0u64; d.segments().len()];
            for _ in 0..n {
                let x = d.sample(&mut rng);
                let idx = d
                    .segments()
                    .iter()
                    .position(|s| x >= s.lo && x <= s.hi)
                    .unwrap_or(0);
                counts[idx] += 1;
            }
            // Pool segments below a minimum expected count.
            let mut chi2 = 0.0;
            let mut dof = 0usize;
            let mut pooled_obs = 0.0;
            let mut pooled_exp = 0.0;
            for (i, &c) in counts.iter().enumerate() {
                let e = d.segment_mass(i) * n as f64;
                if e < 5.0 {
                    pooled_obs += c as f64;
                    pooled_exp += e;
                    continue;
                }
                chi2 += (c as f64 - e).powi(2) / e;
                dof += 1;
            }
            if pooled_exp >= 5.0 {
                chi2 += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
                dof += 1;
            }
            let dof = dof.saturating_sub(1).max(1);
            let critical = chi2_quantile_999(dof as f64);
            Ok((
                chi2 < critical,
                format!("chi2 = {chi2:.3}, dof = {dof}, critical = {critical:.3}"),
            ))
        });
    }

    report.attempt("bound-soundness", || {
        let opts = BoundOptions::default();
        let grid_min = observation_grid_min(&model, &oracle);
        let mut detail = Vec::new();
        let bm1 = bm1_bound(&model, &opts)?.gamma;
        detail.push(format!("bm1 {bm1:.4}"));
        if bm1 > grid_min + 1e-6 {
            return Ok((false, format!("bm1 {bm1} exceeds grid minimum {grid_min}")));
        }
        let mut bm2_last = f64::NEG_INFINITY;
        for k in 0..=5 {
            let g = bm2_of(&model, k, &opts)?;
            if g < bm2_last - 1e-9 {
                return Ok((false, format!("bm2 not monotone at k = {k}")));
            }
            bm2_last = g;
        }
        detail.push(format!("bm2(5) {bm2_last:.4}"));
        if bm2_last > grid_min + 1e-6 {
            return Ok((
                false,
                format!("bm2 {bm2_last} exceeds grid minimum {grid_min}"),
            ));
        }
        if (0..model.len()).all(|i| model.potential(i).is_convex()) {
            let tangent = convex_tangent_bound_model(&model, &opts)?;
            detail.push(format!("tangent {tangent:.4}"));
            if tangent > grid_min + 1e-6 {
                return Ok((
                    false,
                    format!("tangent {tangent} exceeds grid minimum {grid_min}"),
                ));
            }
        }
        // The quadratic closed form bounds the quadratic joint potential.
        let (g2, _) = quadratic_bound_model(&model, &opts)?;
        let quad_min = quadratic_grid_min(&model, &oracle);
        detail.push(format!("quadratic {g2:.4}"));
        if g2 > quad_min + 1e-6 {
            return Ok((
                false,
                format!("quadratic {g2} exceeds quadratic grid minimum {quad_min}"),
            ));
        }
        if let Some(r_inv) = cfg.r_inverse()? {
            let g = generic_transform_bound(g2, &r_inv)?;
            detail.push(format!("transform {g:.4}"));
            if g > grid_min + 1e-6 {
                return Ok((
                    false,
                    format!("transform {g} exceeds grid minimum {grid_min}"),
                ));
            }
        }
        if let Some(lp) = &cfg.lp {
            let g = lp_transform_bound(g2, lp.p, model.len())?;
            let lp_min = lp_grid_min(&model, &oracle, lp.p);
            detail.push(format!("lp {g:.4}"));
            if g > lp_min + 1e-6 {
                return Ok((false, format!("lp {g} exceeds lp grid minimum {lp_min}")));
            }
        }
        Ok((true, detail.join(", ")))
    });

    report.attempt("interval-containment", || {
        for j in 0..model.region_count() {
            let est = model.simple_estimates(j)?;
            let Ok(interval) = est.search_interval() else {
                continue;
            };
            let region = model.region(j)?;
            let (lo, hi) = region.clip(1e3);
            let (olo, ohi) = oracle.domain();
            let (lo, hi) = (lo.max(olo), hi.min(ohi));
            if !(lo < hi) {
                continue;
            }
            let mut best = (f64::INFINITY, f64::NAN);
            for &x in numeric::linspace(lo, hi, 10_000).iter() {
                let v = model.observation_potential(x).unwrap_or(f64::INFINITY);
                if v < best.0 {
                    best = (v, x);
                }
            }
            if best.0.is_finite() && !interval.contains_tol(best.1, 1e-3) {
                return Ok((
                    false,
                    format!("region {j} argmin {} outside {interval}", best.1),
                ));
            }
        }
        Ok((
            true,
            "restricted argmin lies inside the simple-estimate interval".into(),
        ))
    });

    report
}

fn oracle_window(cfg: &ModelConfig, model: &ObservationModel) -> Result<GridOracle> {
    match &cfg.oracle {
        Some(o) => GridOracle::from_model(model, o.lo, o.hi, o.resolution),
        None => GridOracle::from_model(model, -10.0, 10.0, 100_001),
    }
}

fn bm2_of(model: &ObservationModel, k: usize, opts: &BoundOptions) -> Result<f64> {
    Ok(bm2_bound_model(model, k, SplitRule::Midpoint, opts)?.gamma)
}

fn observation_grid_min(model: &ObservationModel, oracle: &GridOracle) -> f64 {
    let (lo, hi) = oracle.domain();
    numeric::linspace(lo, hi, 100_000)
        .iter()
        .map(|&x| model.observation_potential(x).unwrap_or(f64::INFINITY))
        .fold(f64::INFINITY, f64::min)
}

fn quadratic_grid_min(model: &ObservationModel, oracle: &GridOracle) -> f64 {
    let (lo, hi) = oracle.domain();
    numeric::linspace(lo, hi, 100_000)
        .iter()
        .map(|&x| {
            (0..model.len())
                .map(|i| {
                    let r = model.observations()[i] - model.nonlinearity(i).eval(x);
                    r * r
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn lp_grid_min(model: &ObservationModel, oracle: &GridOracle, p: f64) -> f64 {
    let (lo, hi) = oracle.domain();
    numeric::linspace(lo, hi, 100_000)
        .iter()
        .map(|&x| {
            (0..model.len())
                .map(|i| {
                    (model.observations()[i] - model.nonlinearity(i).eval(x))
                        .abs()
                        .powf(p)
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// The 0.999 chi-square quantile: tabulated for small degrees of freedom,
/// Wilson-Hilferty beyond the table.
fn chi2_quantile_999(dof: f64) -> f64 {
    const TABLE: [f64; 10] = [
        10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877, 29.588,
    ];
    let k = dof.round() as usize;
    if (1..=TABLE.len()).contains(&k) {
        return TABLE[k - 1];
    }
    let z = 3.090_232_306_167_813; // standard normal 0.999 quantile
    let a = 2.0 / (9.0 * dof);
    dof * (1.0 - a + z * a.sqrt()).powi(3)
}
