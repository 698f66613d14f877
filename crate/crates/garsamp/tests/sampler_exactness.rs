//! Statistical exactness of the samplers against independent grid-quadrature
//! oracles built inside the test.

use std::sync::Arc;

use garsamp::extended::{Extended, Interval};
use garsamp::model::{MarginalPotential, NonlinearBranch, Nonlinearity, ObservationModel, Prior};
use garsamp::samplers::{
    gars_run, gibbs_gars, rejection_sample_fixed, ExtraPointRule, RandomSource, TwoCoordModel,
};

fn parabola_at(c: f64) -> Nonlinearity {
    let left = NonlinearBranch::new(
        Interval::new(Extended::NegInf, Extended::Finite(c)),
        move |x| (x - c) * (x - c),
        move |x| 2.0 * (x - c),
        |_| 2.0,
        -1,
        1,
    )
    .unwrap();
    let right = NonlinearBranch::new(
        Interval::new(Extended::Finite(c), Extended::PosInf),
        move |x| (x - c) * (x - c),
        move |x| 2.0 * (x - c),
        |_| 2.0,
        1,
        1,
    )
    .unwrap();
    Nonlinearity::new(vec![left, right]).unwrap()
}

/// Bimodal target with a cosh likelihood term and a squared penalty on
/// `exp(|x|)`.
fn bimodal_model(alpha: f64) -> ObservationModel {
    let g2_left = NonlinearBranch::new(
        Interval::new(Extended::NegInf, Extended::Finite(0.0)),
        |x| (-x).exp(),
        |x| -(-x).exp(),
        |x| (-x).exp(),
        -1,
        1,
    )
    .unwrap();
    let g2_right = NonlinearBranch::new(
        Interval::new(Extended::Finite(0.0), Extended::PosInf),
        |x| x.exp(),
        |x| x.exp(),
        |x| x.exp(),
        1,
        1,
    )
    .unwrap();
    ObservationModel::new(
        vec![5.0, 10.0],
        vec![
            Arc::new(parabola_at(0.0)),
            Arc::new(Nonlinearity::new(vec![g2_left, g2_right]).unwrap()),
        ],
        vec![
            MarginalPotential::cosh().unwrap(),
            MarginalPotential::gaussian(0.5 / alpha).unwrap(),
        ],
        None,
        0.0,
    )
    .unwrap()
}

/// Trapezoid CDF table of `exp(-potential)` on a grid.
struct TrapezoidCdf {
    lo: f64,
    step: f64,
    cdf: Vec<f64>,
}

impl TrapezoidCdf {
    fn build(potential: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Self {
        let step = (hi - lo) / (n - 1) as f64;
        let vals: Vec<f64> = (0..n)
            .map(|i| (-potential(lo + step * i as f64)).exp())
            .collect();
        let mut cdf = vec![0.0];
        let mut acc = 0.0;
        for i in 1..n {
            acc += 0.5 * (vals[i - 1] + vals[i]) * step;
            cdf.push(acc);
        }
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }
        TrapezoidCdf { lo, step, cdf }
    }

    fn eval(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.step;
        if t <= 0.0 {
            return 0.0;
        }
        let i = t as usize;
        if i + 1 >= self.cdf.len() {
            return 1.0;
        }
        let frac = t - i as f64;
        self.cdf[i] * (1.0 - frac) + self.cdf[i + 1] * frac
    }
}

fn ks(samples: &[f64], cdf: &TrapezoidCdf) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut sup = 0.0_f64;
    for (i, &x) in xs.iter().enumerate() {
        let fx = cdf.eval(x);
        sup = sup.max((fx - i as f64 / n).abs());
        sup = sup.max((fx - (i + 1) as f64 / n).abs());
    }
    sup
}

#[test]
fn adaptive_sampler_matches_bimodal_oracle() {
    let model = bimodal_model(0.2);
    let oracle = TrapezoidCdf::build(
        |x| model.system_potential(x).unwrap_or(f64::INFINITY),
        -4.0,
        4.0,
        200_001,
    );
    let n = 10_000;
    let threshold = 1.63 / (n as f64).sqrt();
    let mut passing = 0;
    for seed in 0..10 {
        let mut rng = RandomSource::derive(71, seed);
        let trace = gars_run(&model, n, ExtraPointRule::UniformRandom, &mut rng).unwrap();
        if ks(&trace.samples, &oracle) < threshold {
            passing += 1;
        }
    }
    assert!(
        passing >= 9,
        "only {passing}/10 seeds passed the KS threshold"
    );
}

#[test]
fn bimodal_target_has_two_modes_and_gars_visits_both() {
    let model = bimodal_model(0.2);
    let mut rng = RandomSource::new(5);
    let trace = gars_run(&model, 4000, ExtraPointRule::UniformRandom, &mut rng).unwrap();
    let left = trace.samples.iter().filter(|&&x| x < 0.0).count();
    let frac = left as f64 / trace.samples.len() as f64;
    // Symmetric target: both modes get close to half the mass.
    assert!((frac - 0.5).abs() < 0.05, "left-mode fraction {frac}");
    let mean = trace.samples.iter().sum::<f64>() / trace.samples.len() as f64;
    assert!(mean.abs() < 0.1, "sample mean {mean}");
}

#[test]
fn fixed_rs_rate_converges_to_quadrature_prediction() {
    // Acceptance of the fixed-bound sampler equals E_prior[likelihood] / L.
    let g = Nonlinearity::single(
        NonlinearBranch::new(Interval::all(), |x| x.exp(), |x| x.exp(), |x| x.exp(), 1, 1).unwrap(),
    )
    .unwrap();
    let model = ObservationModel::new(
        vec![2.0],
        vec![Arc::new(g)],
        vec![MarginalPotential::gaussian(0.5).unwrap()],
        None,
        0.0,
    )
    .unwrap();
    let (plo, phi, pn) = (-12.0, 12.0, 400_001);
    let step = (phi - plo) / (pn - 1) as f64;
    let mut expected = 0.0;
    for i in 0..pn {
        let x = plo + step * i as f64;
        let lik = (-model.observation_potential(x).unwrap()).exp();
        let prior = (-x * x).exp() / std::f64::consts::PI.sqrt();
        let w = if i == 0 || i == pn - 1 { 0.5 } else { 1.0 };
        expected += w * lik * prior * step;
    }
    // L = 1 (trivial bound), so the rate is the integral itself.
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    for seed in 0..10 {
        let mut rng = RandomSource::derive(31, seed);
        let mut prior = |r: &mut RandomSource| r.gaussian(0.0, 0.5_f64.sqrt());
        let trace = rejection_sample_fixed(&model, &mut prior, 1.0, 2000, &mut rng).unwrap();
        accepted += trace.samples.len() as u64;
        proposed += trace.total_proposals();
    }
    let rate = accepted as f64 / proposed as f64;
    let se = (expected * (1.0 - expected) / proposed as f64).sqrt();
    assert!(
        (rate - expected).abs() <= 2.0 * se + 1e-4,
        "rate {rate} vs predicted {expected} (se {se})"
    );
}

#[test]
fn gibbs_chain_is_symmetric_under_coordinate_swap() {
    // Anchors on the diagonal make the posterior invariant under swapping
    // coordinates; mirrored bins of the chain must agree within noise.
    let template = ObservationModel::new(
        vec![0.0, 0.0],
        vec![Arc::new(parabola_at(0.0)), Arc::new(parabola_at(2.0))],
        vec![
            MarginalPotential::gaussian(0.5).unwrap(),
            MarginalPotential::gaussian(0.5).unwrap(),
        ],
        Some(Prior {
            potential: MarginalPotential::gaussian(0.5).unwrap(),
            mode: 0.0,
        }),
        0.0,
    )
    .unwrap();
    let y = [5.0, 2.0];
    let model = TwoCoordModel {
        conditional: Box::new(move |_c, v| {
            template.with_observations(vec![y[0] - v * v, y[1] - (v - 2.0) * (v - 2.0)])
        }),
        prior_sample: Box::new(|_c, rng| rng.gaussian(0.0, 0.5_f64.sqrt())),
    };
    let mut rng = RandomSource::new(12);
    let (chain, _) = gibbs_gars(&model, 20_000, ExtraPointRule::Midpoint, &mut rng).unwrap();
    // Coarse 2-D bins over the support, compared against the transpose.
    let bins = 6;
    let (lo, hi) = (-2.0, 4.0);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0f64; bins * bins];
    for p in &chain {
        if p[0] >= lo && p[0] < hi && p[1] >= lo && p[1] < hi {
            let i = ((p[0] - lo) / width) as usize;
            let j = ((p[1] - lo) / width) as usize;
            counts[i * bins + j] += 1.0;
        }
    }
    let mut chi2 = 0.0;
    for i in 0..bins {
        for j in (i + 1)..bins {
            let a = counts[i * bins + j];
            let b = counts[j * bins + i];
            if a + b >= 20.0 {
                // Under symmetry each of the pair is Binomial(a+b, 1/2).
                chi2 += (a - b) * (a - b) / (a + b);
            }
        }
    }
    // Generous threshold: the pair count is at most 15, and chi-square with
    // 15 dof stays below 37.7 at the 0.999 level.
    assert!(chi2 < 37.7, "mirror chi-square {chi2}");
}
