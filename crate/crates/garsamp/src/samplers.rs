//! Rejection samplers: fixed-bound rejection sampling from the prior,
//! adaptive rejection sampling for convex potentials, its generalization to
//! multimodal targets built from minorants of the nonlinearities, and a
//! two-coordinate Gibbs composition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::sync::Arc;

use crate::envelope::{
    build_hull, gars_minorant_with, intersection_abscissas, PiecewiseExpDensity, PiecewiseLinearFn,
    BREAKPOINT_TOL,
};
use crate::error::{Error, Result};
use crate::model::{Nonlinearity, ObservationModel, ShapeClass};
use crate::numeric;

/// Tolerance on the log acceptance ratio before a violation becomes an error.
const RATIO_TOL: f64 = 1e-9;

/// A seedable random source with reproducible uniform and Gaussian streams.
/// Identical seeds give identical streams across runs.
pub struct RandomSource {
    rng: ChaCha8Rng,
    seed: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    /// Independent stream for a replication index, derived from the base seed.
    pub fn derive(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index.wrapping_add(1));
        RandomSource { rng, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.gen();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Gaussian with the given mean and standard deviation (Box-Muller).
    pub fn gaussian(&mut self, mean: f64, std_dev: f64) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        mean + std_dev * z
    }
}

impl std::fmt::Debug for RandomSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RandomSource")
            .field("seed", &self.seed)
            .finish()
    }
}

/// How a sampler reacts to an acceptance ratio above one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ViolationPolicy {
    /// Fail with a violation error (the supplied bound or envelope is wrong).
    #[default]
    Error,
    /// Record the violation, clamp the ratio to one and continue; for
    /// investigating tolerance issues only.
    Record,
}

/// Record of one sampling run.
#[derive(Debug, Clone, Default)]
pub struct SamplerTrace {
    /// Accepted samples, in acceptance order.
    pub samples: Vec<f64>,
    /// Proposals consumed by each accepted sample (including the accept).
    pub proposals_per_sample: Vec<u64>,
    /// Support-set size after each accepted sample (adaptive samplers).
    pub support_sizes: Vec<usize>,
    /// Envelope rebuilds, one per rejection in adaptive samplers.
    pub rebuilds: u64,
    /// Ratio violations observed under [`ViolationPolicy::Record`].
    pub violations: u64,
}

impl SamplerTrace {
    pub fn total_proposals(&self) -> u64 {
        self.proposals_per_sample.iter().sum()
    }

    /// Accepted over proposed, in `[0, 1]`.
    pub fn acceptance_rate(&self) -> f64 {
        let total = self.total_proposals();
        if total == 0 {
            0.0
        } else {
            self.samples.len() as f64 / total as f64
        }
    }
}

/// Standard rejection sampler with a fixed likelihood bound `l_bound`:
/// proposals come from the prior sampler and are accepted when
/// `likelihood / l_bound > u`. Proposals outside the model support have zero
/// likelihood and are rejected outright. The likelihood here is the
/// observation part of the posterior; the prior enters as the proposal.
pub fn rejection_sample_fixed(
    model: &ObservationModel,
    prior_sampler: &mut dyn FnMut(&mut RandomSource) -> f64,
    l_bound: f64,
    n: usize,
    rng: &mut RandomSource,
) -> Result<SamplerTrace> {
    rejection_sample_fixed_with(
        model,
        prior_sampler,
        l_bound,
        n,
        rng,
        ViolationPolicy::Error,
    )
}

pub fn rejection_sample_fixed_with(
    model: &ObservationModel,
    prior_sampler: &mut dyn FnMut(&mut RandomSource) -> f64,
    l_bound: f64,
    n: usize,
    rng: &mut RandomSource,
    policy: ViolationPolicy,
) -> Result<SamplerTrace> {
    if !(l_bound > 0.0) {
        return Err(Error::Parameter(format!(
            "likelihood bound must be positive, got {l_bound}"
        )));
    }
    let log_l = l_bound.ln();
    let mut trace = SamplerTrace::default();
    while trace.samples.len() < n {
        let mut proposals = 0u64;
        loop {
            proposals += 1;
            let x = prior_sampler(rng);
            let u = rng.uniform();
            let mut log_ratio = match model.observation_potential(x) {
                Ok(v) => -v - log_l,
                Err(Error::Domain { .. }) => f64::NEG_INFINITY,
                Err(e) => return Err(e),
            };
            if log_ratio > RATIO_TOL {
                match policy {
                    ViolationPolicy::Error => {
                        return Err(Error::BoundViolation {
                            x,
                            ratio: log_ratio.exp(),
                        })
                    }
                    ViolationPolicy::Record => {
                        trace.violations += 1;
                        log_ratio = 0.0;
                    }
                }
            }
            if log_ratio > u.ln() {
                trace.samples.push(x);
                trace.proposals_per_sample.push(proposals);
                break;
            }
        }
    }
    Ok(trace)
}

/// Classic adaptive rejection sampling for a convex potential: the envelope
/// is the tangent hull at the support points and every rejected proposal
/// becomes a new support point.
pub fn ars_run(
    potential: &dyn Fn(f64) -> f64,
    s0: &[f64],
    n: usize,
    rng: &mut RandomSource,
) -> Result<SamplerTrace> {
    if s0.len() < 2 {
        return Err(Error::Contract(
            "adaptive sampler needs at least two support points".into(),
        ));
    }
    let mut support = s0.to_vec();
    support.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d_first = numeric::central_diff(potential, support[0], numeric::FD_STEP);
    let d_last = numeric::central_diff(potential, support[support.len() - 1], numeric::FD_STEP);
    if !(d_first < 0.0 && d_last > 0.0) {
        return Err(Error::Contract(format!(
            "potential slopes at the outer support points must bracket the minimum, got {d_first} and {d_last}"
        )));
    }
    let mut trace = SamplerTrace::default();
    let mut hull = build_hull(potential, &support)?;
    let mut density = PiecewiseExpDensity::from_hull(&hull)?;
    while trace.samples.len() < n {
        let mut proposals = 0u64;
        loop {
            proposals += 1;
            let x = density.sample(rng);
            let u = rng.uniform();
            let log_ratio = hull.eval(x) - potential(x);
            if log_ratio > RATIO_TOL {
                return Err(Error::EnvelopeViolation {
                    x,
                    ratio: log_ratio.exp(),
                });
            }
            if u.ln() <= log_ratio {
                trace.samples.push(x);
                trace.proposals_per_sample.push(proposals);
                trace.support_sizes.push(support.len());
                break;
            }
            insert_sorted(&mut support, x);
            hull = build_hull(potential, &support)?;
            density = PiecewiseExpDensity::from_hull(&hull)?;
            trace.rebuilds += 1;
        }
    }
    Ok(trace)
}

/// Inserts keeping ascending order; points within the breakpoint tolerance of
/// an existing one are dropped to avoid degenerate knots.
fn insert_sorted(points: &mut Vec<f64>, x: f64) {
    let pos = points.partition_point(|&p| p < x);
    let dup_prev = pos > 0 && (x - points[pos - 1]).abs() <= BREAKPOINT_TOL;
    let dup_next = pos < points.len() && (points[pos] - x).abs() <= BREAKPOINT_TOL;
    if !dup_prev && !dup_next {
        points.insert(pos, x);
    }
}

/// Rule for placing the extra support point inside a nonzero-length estimate
/// interval at initialization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ExtraPointRule {
    /// Midpoint of the interval (unit offset on half-infinite intervals).
    #[default]
    Midpoint,
    /// Uniform draw inside the interval (half-infinite intervals still use
    /// the deterministic offset).
    UniformRandom,
}

/// One term of the extended model with its simple estimates resolved once at
/// initialization; estimates do not change as the support set grows.
struct TermInfo {
    nl: Arc<Nonlinearity>,
    y: f64,
    estimates: Vec<f64>,
    shape: ShapeClass,
}

/// State of the generalized adaptive sampler: the extended model, the
/// ascending support set, and the cached minorants, hull and proposal
/// density.
pub struct GarsState {
    model: ObservationModel,
    terms: Vec<TermInfo>,
    support: Vec<f64>,
    minorants: Vec<PiecewiseLinearFn>,
    knots: Vec<f64>,
    hull: PiecewiseLinearFn,
    density: PiecewiseExpDensity,
}

impl GarsState {
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn minorants(&self) -> &[PiecewiseLinearFn] {
        &self.minorants
    }

    pub fn hull(&self) -> &PiecewiseLinearFn {
        &self.hull
    }

    pub fn density(&self) -> &PiecewiseExpDensity {
        &self.density
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// The modified potential: marginal potentials of the minorant residuals,
    /// summed over the extended terms.
    pub fn modified_potential(&self, x: f64) -> f64 {
        modified_potential_of(&self.model, &self.minorants, x)
    }
}

fn modified_potential_of(model: &ObservationModel, minorants: &[PiecewiseLinearFn], x: f64) -> f64 {
    let mut v = model.constant();
    for (i, r) in minorants.iter().enumerate() {
        let y = model.extended_observation(i);
        v += model.extended_potential(i).eval(y - r.eval(x));
    }
    v
}

/// Minorants, knots, hull and density for a support set.
fn assemble_envelope(
    model: &ObservationModel,
    terms: &[TermInfo],
    support: &[f64],
) -> Result<(
    Vec<PiecewiseLinearFn>,
    Vec<f64>,
    PiecewiseLinearFn,
    PiecewiseExpDensity,
)> {
    let mut minorants = Vec::with_capacity(terms.len());
    for t in terms {
        minorants.push(gars_minorant_with(&t.nl, t.y, &t.estimates, support)?);
    }
    // Knots: every minorant breakpoint plus the support points themselves.
    // The modified potential is convex between consecutive knots; tangents
    // anchored at the outermost simple estimates keep the tails proper.
    let refs: Vec<&PiecewiseLinearFn> = minorants.iter().collect();
    let mut knots = intersection_abscissas(&refs);
    for &s in support {
        insert_sorted(&mut knots, s);
    }
    let v_mod = |x: f64| modified_potential_of(model, &minorants, x);
    let hull = build_hull(&v_mod, &knots)?;
    let density = PiecewiseExpDensity::from_hull(&hull)?;
    Ok((minorants, knots, hull, density))
}

impl std::fmt::Debug for GarsState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GarsState")
            .field("support", &self.support)
            .field("knots", &self.knots.len())
            .finish()
    }
}

/// Initializes the generalized adaptive sampler: collects every finite
/// simple estimate of the extended model, adds one interior point per
/// nonzero-length estimate interval that lacks one, and assembles the
/// envelope. All extended marginal potentials must be convex.
pub fn gars_init(
    model: &ObservationModel,
    rule: ExtraPointRule,
    rng: &mut RandomSource,
) -> Result<GarsState> {
    for i in 0..model.extended_len() {
        if !model.extended_potential(i).is_convex() {
            return Err(Error::Contract(format!(
                "generalized adaptive sampling requires convex marginal potentials (term {i})"
            )));
        }
    }
    let mut support: Vec<f64> = Vec::new();
    let mut terms: Vec<TermInfo> = Vec::with_capacity(model.extended_len());
    for i in 0..model.extended_len() {
        let nl = model.extended_nonlinearity(i);
        let y = model.extended_observation(i);
        let estimates = nl.global_estimates(y)?;
        for &e in &estimates {
            insert_sorted(&mut support, e);
        }
        let shape = nl.shape_class()?;
        terms.push(TermInfo {
            nl,
            y,
            estimates,
            shape,
        });
    }
    // One support point inside each nonzero-length estimate interval:
    // (x1, x2) for non-monotonic terms with two estimates, the half line on
    // the unbounded side of the estimate for monotonic terms.
    for t in &terms {
        match (t.shape, t.estimates.as_slice()) {
            (ShapeClass::NonMonotonic(_), &[a, b]) if b - a > BREAKPOINT_TOL => {
                let has_interior = support
                    .iter()
                    .any(|&s| s > a + BREAKPOINT_TOL && s < b - BREAKPOINT_TOL);
                if !has_interior {
                    let s = match rule {
                        ExtraPointRule::Midpoint => 0.5 * (a + b),
                        ExtraPointRule::UniformRandom => a + rng.uniform() * (b - a),
                    };
                    insert_sorted(&mut support, s);
                }
            }
            (ShapeClass::MonotonicCaseA(_), &[a, ..]) => {
                if !support.iter().any(|&s| s < a - BREAKPOINT_TOL) {
                    insert_sorted(&mut support, a - 1.0);
                }
            }
            (ShapeClass::MonotonicCaseB(_), &[a, ..]) => {
                if !support.iter().any(|&s| s > a + BREAKPOINT_TOL) {
                    insert_sorted(&mut support, a + 1.0);
                }
            }
            _ => {}
        }
    }
    if support.len() < 2 {
        return Err(Error::Contract(format!(
            "initial support has {} point(s); the model admits no adaptive envelope",
            support.len()
        )));
    }
    let (minorants, knots, hull, density) = assemble_envelope(model, &terms, &support)?;
    Ok(GarsState {
        model: model.clone(),
        terms,
        support,
        minorants,
        knots,
        hull,
        density,
    })
}

/// Outcome of one proposal of the generalized sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Accepted(f64),
    Rejected(f64),
}

/// One proposal: draw from the piecewise-exponential envelope, test against
/// the true target, and on rejection insert the proposal as a support point
/// and rebuild the envelope.
pub fn gars_step(state: &mut GarsState, rng: &mut RandomSource) -> Result<StepOutcome> {
    gars_step_with(state, rng, ViolationPolicy::Error).map(|(o, _)| o)
}

pub fn gars_step_with(
    state: &mut GarsState,
    rng: &mut RandomSource,
    policy: ViolationPolicy,
) -> Result<(StepOutcome, u64)> {
    let x = state.density.sample(rng);
    let u = rng.uniform();
    let w = state.hull.eval(x);
    let v = match state.model.system_potential(x) {
        Ok(v) => v,
        Err(Error::Domain { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let mut log_ratio = w - v;
    let mut violations = 0;
    if log_ratio > RATIO_TOL {
        match policy {
            ViolationPolicy::Error => {
                return Err(Error::EnvelopeViolation {
                    x,
                    ratio: log_ratio.exp(),
                })
            }
            ViolationPolicy::Record => {
                violations = 1;
                log_ratio = 0.0;
            }
        }
    }
    if u.ln() <= log_ratio {
        Ok((StepOutcome::Accepted(x), violations))
    } else {
        insert_sorted(&mut state.support, x);
        let (minorants, knots, hull, density) =
            assemble_envelope(&state.model, &state.terms, &state.support)?;
        state.minorants = minorants;
        state.knots = knots;
        state.hull = hull;
        state.density = density;
        Ok((StepOutcome::Rejected(x), violations))
    }
}

/// Runs the generalized adaptive sampler until `n` samples are accepted.
pub fn gars_run(
    model: &ObservationModel,
    n: usize,
    rule: ExtraPointRule,
    rng: &mut RandomSource,
) -> Result<SamplerTrace> {
    gars_run_with(model, n, rule, rng, ViolationPolicy::Error)
}

pub fn gars_run_with(
    model: &ObservationModel,
    n: usize,
    rule: ExtraPointRule,
    rng: &mut RandomSource,
    policy: ViolationPolicy,
) -> Result<SamplerTrace> {
    let mut state = gars_init(model, rule, rng)?;
    let mut trace = SamplerTrace::default();
    while trace.samples.len() < n {
        let mut proposals = 0u64;
        loop {
            proposals += 1;
            let (outcome, violations) = gars_step_with(&mut state, rng, policy)?;
            trace.violations += violations;
            match outcome {
                StepOutcome::Accepted(x) => {
                    trace.samples.push(x);
                    trace.proposals_per_sample.push(proposals);
                    trace.support_sizes.push(state.support.len());
                    break;
                }
                StepOutcome::Rejected(_) => trace.rebuilds += 1,
            }
        }
    }
    Ok(trace)
}

/// A two-coordinate model sampled by Gibbs composition: conditionals of each
/// coordinate given the other, plus a prior sampler per coordinate.
pub struct TwoCoordModel {
    /// Builds the scalar conditional model of coordinate `coord` (0 or 1)
    /// given the other coordinate's value.
    pub conditional: Box<dyn Fn(usize, f64) -> Result<ObservationModel> + Send + Sync>,
    /// Draws coordinate `coord` from its prior.
    pub prior_sample: Box<dyn Fn(usize, &mut RandomSource) -> f64 + Send + Sync>,
}

/// Trace of a Gibbs chain: proposals consumed by each conditional draw.
#[derive(Debug, Clone, Default)]
pub struct GibbsTrace {
    pub proposals: Vec<[u64; 2]>,
}

impl GibbsTrace {
    /// Average conditional acceptance rate over both coordinates.
    pub fn acceptance_rate(&self) -> f64 {
        let total: u64 = self.proposals.iter().map(|p| p[0] + p[1]).sum();
        if total == 0 {
            0.0
        } else {
            (2 * self.proposals.len()) as f64 / total as f64
        }
    }
}

/// Gibbs sampler with generalized adaptive conditionals: initializes the
/// second coordinate from its prior, then alternates exact draws from the
/// two conditional densities. The chain targets the joint posterior.
pub fn gibbs_gars(
    model: &TwoCoordModel,
    n: usize,
    rule: ExtraPointRule,
    rng: &mut RandomSource,
) -> Result<(Vec<[f64; 2]>, GibbsTrace)> {
    gibbs_with(model, n, rng, |_, cond, rng| {
        let trace = gars_run(cond, 1, rule, rng)?;
        Ok((trace.samples[0], trace.proposals_per_sample[0]))
    })
}

/// Gibbs sampler whose conditionals are drawn by fixed-bound rejection
/// sampling from the coordinate prior; `bound_gamma` computes the potential
/// bound of each conditional model. The non-adaptive baseline.
pub fn gibbs_fixed_rs(
    model: &TwoCoordModel,
    n: usize,
    bound_gamma: &dyn Fn(&ObservationModel) -> Result<f64>,
    rng: &mut RandomSource,
) -> Result<(Vec<[f64; 2]>, GibbsTrace)> {
    gibbs_with(model, n, rng, |coord, cond, rng| {
        let gamma = bound_gamma(cond)?;
        let mut prior = |rng: &mut RandomSource| (model.prior_sample)(coord, rng);
        let trace = rejection_sample_fixed(cond, &mut prior, (-gamma).exp(), 1, rng)?;
        Ok((trace.samples[0], trace.proposals_per_sample[0]))
    })
}

fn gibbs_with(
    model: &TwoCoordModel,
    n: usize,
    rng: &mut RandomSource,
    mut draw: impl FnMut(usize, &ObservationModel, &mut RandomSource) -> Result<(f64, u64)>,
) -> Result<(Vec<[f64; 2]>, GibbsTrace)> {
    let mut chain = Vec::with_capacity(n);
    let mut trace = GibbsTrace::default();
    let mut x2 = (model.prior_sample)(1, rng);
    for _ in 0..n {
        let cond1 = (model.conditional)(0, x2)?;
        let (x1, p1) = draw(0, &cond1, rng)?;
        let cond2 = (model.conditional)(1, x1)?;
        let (next_x2, p2) = draw(1, &cond2, rng)?;
        chain.push([x1, x2]);
        trace.proposals.push([p1, p2]);
        x2 = next_x2;
    }
    Ok((chain, trace))
}


#[cfg(test)]
mod tests {
    use super::test_models::*;
    use super::*;
    use crate::model::test_models::example1;
    use crate::model::{MarginalPotential, Nonlinearity, Prior};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    #[test]
    fn random_source_reproducible() {
        let mut a = RandomSource::new(42);
        let mut b = RandomSource::new(42);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
        let mut c = RandomSource::derive(42, 0);
        let mut d = RandomSource::derive(42, 1);
        assert_ne!(c.uniform().to_bits(), d.uniform().to_bits());
    }

    #[test]
    fn gaussian_stream_moments() {
        let mut rng = RandomSource::new(5);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.gaussian(1.0, 2.0)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(mean, 1.0, epsilon = 0.02);
        assert_abs_diff_eq!(var, 4.0, epsilon = 0.08);
    }

    #[test]
    fn fixed_rs_trivial_ratio_accepts_everything() {
        // Identity observation with the bound exactly at the likelihood
        // maximum and proposals at the simple estimate: ratio is one.
        let g = Nonlinearity::identity();
        let m = crate::model::ObservationModel::new(
            vec![0.0],
            vec![Arc::new(g)],
            vec![MarginalPotential::gaussian(0.5).unwrap()],
            None,
            0.0,
        )
        .unwrap();
        let mut rng = RandomSource::new(1);
        let mut prior = |_: &mut RandomSource| 0.0;
        let trace = rejection_sample_fixed(&m, &mut prior, 1.0, 500, &mut rng).unwrap();
        assert_eq!(trace.total_proposals(), 500);
        assert_abs_diff_eq!(trace.acceptance_rate(), 1.0);
    }

    #[test]
    fn fixed_rs_diagnostic_mode_records_and_continues() {
        // Same broken bound as below, but the diagnostic policy counts the
        // violations instead of failing.
        let m = example1();
        let mut rng = RandomSource::new(2);
        let mut prior = |rng: &mut RandomSource| rng.gaussian(0.0, 2.0_f64.sqrt());
        let too_tight = (-(3.78_f64 + 1.0)).exp();
        let trace = rejection_sample_fixed_with(
            &m,
            &mut prior,
            too_tight,
            200,
            &mut rng,
            ViolationPolicy::Record,
        )
        .unwrap();
        assert_eq!(trace.samples.len(), 200);
        assert!(trace.violations > 0, "expected recorded violations");
    }

    #[test]
    fn fixed_rs_detects_bound_violation() {
        // A bound strictly below the likelihood maximum must surface as an
        // error rather than silently biasing the output.
        let m = example1();
        let mut rng = RandomSource::new(2);
        let mut prior = |rng: &mut RandomSource| rng.gaussian(0.0, 2.0_f64.sqrt());
        let too_tight = (-(3.78_f64 + 1.0)).exp();
        match rejection_sample_fixed(&m, &mut prior, too_tight, 100, &mut rng) {
            Err(Error::BoundViolation { .. }) => {}
            other => panic!("expected bound violation, got {other:?}"),
        }
    }

    #[test]
    fn fixed_rs_example1_acceptance_rate_sane() {
        // Single-seed sanity run at the optimal bound; the acceptance
        // criteria exercise the full multi-seed version.
        let m = example1();
        let grid_min = numeric::linspace(-(5.0_f64.ln()), 2.0_f64.ln(), 200_001)
            .iter()
            .map(|&x| m.observation_potential(x).unwrap())
            .fold(f64::INFINITY, f64::min);
        let mut rng = RandomSource::new(7);
        let mut prior = |rng: &mut RandomSource| rng.gaussian(0.0, 2.0_f64.sqrt());
        let trace =
            rejection_sample_fixed(&m, &mut prior, (-grid_min).exp(), 2000, &mut rng).unwrap();
        let rate = trace.acceptance_rate();
        assert!(rate > 0.30 && rate < 0.52, "acceptance rate {rate}");
    }

    fn normal_cdf(x: f64) -> f64 {
        // Abramowitz-Stegun 7.1.26 rational approximation of erf.
        let z = x / 2.0_f64.sqrt();
        let t = 1.0 / (1.0 + 0.3275911 * z.abs());
        let poly = t
            * (0.254829592
                + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        let erf = 1.0 - poly * (-z * z).exp();
        let erf = if z >= 0.0 { erf } else { -erf };
        0.5 * (1.0 + erf)
    }

    #[test]
    fn ars_gaussian_passes_ks() {
        let potential = |x: f64| 0.5 * x * x;
        let mut rng = RandomSource::new(11);
        let n = 10_000;
        let trace = ars_run(&potential, &[-1.0, 1.0], n, &mut rng).unwrap();
        let mut xs = trace.samples.clone();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks = 0.0_f64;
        for (i, &x) in xs.iter().enumerate() {
            let fx = normal_cdf(x);
            ks = ks.max((fx - i as f64 / n as f64).abs());
            ks = ks.max((fx - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 1.63 / (n as f64).sqrt(), "KS = {ks}");
    }

    #[test]
    fn ars_exact_hull_accepts_always() {
        // Piecewise-linear potential: the tangent hull reproduces it exactly,
        // so every proposal is accepted.
        let potential = |x: f64| x.abs();
        let mut rng = RandomSource::new(13);
        let trace = ars_run(&potential, &[-1.0, 0.0, 1.0], 200, &mut rng).unwrap();
        assert_eq!(trace.total_proposals(), 200);
        assert_eq!(trace.rebuilds, 0);
    }

    #[test]
    fn ars_acceptance_improves_in_aggregate() {
        // Pooled acceptance over seeded runs rises from the first block of
        // samples to the last.
        let potential = |x: f64| 0.5 * x * x;
        let runs = 300;
        let per_run = 30;
        let mut proposals = vec![0u64; per_run];
        for seed in 0..runs {
            let mut rng = RandomSource::derive(90, seed);
            let trace = ars_run(&potential, &[-1.0, 1.0], per_run, &mut rng).unwrap();
            for (i, &p) in trace.proposals_per_sample.iter().enumerate() {
                proposals[i] += p;
            }
        }
        let rate = |range: std::ops::Range<usize>| {
            let total: u64 = proposals[range.clone()].iter().sum();
            (runs as f64 * range.len() as f64) / total as f64
        };
        let early = rate(0..10);
        let late = rate(20..30);
        assert!(late > early, "early {early}, late {late}");
    }

    #[test]
    fn ars_rejects_same_sign_slopes() {
        let potential = |x: f64| 0.5 * x * x;
        let mut rng = RandomSource::new(3);
        assert!(ars_run(&potential, &[1.0, 2.0], 10, &mut rng).is_err());
    }

    #[test]
    fn gars_init_example2_support_set() {
        // Four simple estimates plus the midpoint of the inner interval.
        let m = example2(5.0, 10.0, 0.2);
        let mut rng = RandomSource::new(1);
        let state = gars_init(&m, ExtraPointRule::Midpoint, &mut rng).unwrap();
        let expect = [
            -(10.0_f64.ln()),
            -(5.0_f64.sqrt()),
            0.0,
            5.0_f64.sqrt(),
            10.0_f64.ln(),
        ];
        assert_eq!(
            state.support().len(),
            expect.len(),
            "support {:?}",
            state.support()
        );
        for (s, e) in state.support().iter().zip(expect) {
            assert_abs_diff_eq!(*s, e, epsilon = 1e-7);
        }
    }

    #[test]
    fn gars_hull_dominates_modified_and_true_potential() {
        let m = example2(5.0, 10.0, 0.2);
        let mut rng = RandomSource::new(1);
        let state = gars_init(&m, ExtraPointRule::Midpoint, &mut rng).unwrap();
        for &x in numeric::linspace(-8.0, 8.0, 4001).iter() {
            let w = state.hull().eval(x);
            let v_mod = state.modified_potential(x);
            let v_true = m.system_potential(x).unwrap();
            assert!(w <= v_mod + 1e-7, "hull above modified potential at {x}");
            assert!(
                v_mod <= v_true + 1e-7,
                "modified above true potential at {x}"
            );
        }
    }

    #[test]
    fn gars_rejection_grows_support_by_one() {
        let m = example2(5.0, 10.0, 0.2);
        let mut rng = RandomSource::new(33);
        let mut state = gars_init(&m, ExtraPointRule::Midpoint, &mut rng).unwrap();
        let mut rejections = 0;
        while rejections < 5 {
            let k_before = state.support().len();
            match gars_step(&mut state, &mut rng).unwrap() {
                StepOutcome::Rejected(x) => {
                    rejections += 1;
                    assert_eq!(state.support().len(), k_before + 1);
                    assert!(
                        state.support().contains(&x),
                        "rejected point not in support"
                    );
                }
                StepOutcome::Accepted(_) => {
                    assert_eq!(state.support().len(), k_before);
                }
            }
        }
    }

    #[test]
    fn gars_all_linear_model_accepts_always() {
        // Identity observation with Laplace-type noise and prior: the
        // modified potential equals the true one and the hull is exact.
        let g = Nonlinearity::identity();
        let m = crate::model::ObservationModel::new(
            vec![0.0],
            vec![Arc::new(g)],
            vec![MarginalPotential::lp(1.0).unwrap()],
            Some(Prior {
                potential: MarginalPotential::lp(1.0).unwrap(),
                mode: 0.0,
            }),
            0.0,
        )
        .unwrap();
        let mut rng = RandomSource::new(8);
        let trace = gars_run(&m, 300, ExtraPointRule::Midpoint, &mut rng).unwrap();
        assert_eq!(trace.total_proposals(), 300);
        assert_eq!(trace.rebuilds, 0);
    }

    #[test]
    fn hull_normalizer_shrinks_with_support() {
        // Convex potential: refining the tangent hull can only remove mass
        // from the envelope.
        let f = |x: f64| 0.5 * x * x;
        let mut support = vec![-1.0, 1.0];
        let mut last = f64::INFINITY;
        for extra in [0.5, -0.3, 1.7, 0.1, -1.9, 0.9] {
            insert_sorted(&mut support, extra);
            let hull = build_hull(&f, &support).unwrap();
            let d = PiecewiseExpDensity::from_hull(&hull).unwrap();
            let now = d.log_normalizer();
            assert!(now <= last + 1e-9, "normalizer grew: {last} -> {now}");
            last = now;
        }
    }

    #[test]
    fn gars_rebuild_is_deterministic() {
        let m = example2(5.0, 10.0, 0.2);
        let mut rng = RandomSource::new(9);
        let state = gars_init(&m, ExtraPointRule::Midpoint, &mut rng).unwrap();
        let (_, _, hull, _) = super::assemble_envelope(&m, &state.terms, state.support()).unwrap();
        assert_eq!(state.hull(), &hull);
    }

    #[test]
    fn gars_same_seed_same_samples() {
        let m = example2(5.0, 10.0, 0.5);
        let run = |seed: u64| {
            let mut rng = RandomSource::new(seed);
            gars_run(&m, 50, ExtraPointRule::UniformRandom, &mut rng)
                .unwrap()
                .samples
        };
        let a = run(77);
        let b = run(77);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn gars_rejects_nonconvex_marginals() {
        let g = Nonlinearity::identity();
        let m = crate::model::ObservationModel::new(
            vec![0.0],
            vec![Arc::new(g)],
            vec![MarginalPotential::lp(0.5).unwrap()],
            Some(Prior {
                potential: MarginalPotential::gaussian(1.0).unwrap(),
                mode: 0.0,
            }),
            0.0,
        )
        .unwrap();
        let mut rng = RandomSource::new(5);
        assert!(gars_init(&m, ExtraPointRule::Midpoint, &mut rng).is_err());
    }

    #[test]
    fn gars_init_range_conditionals() {
        // Conditional models of the planar range problem at a few pivot
        // values, including one with no estimates for the far anchor.
        let model = range_model_2d([5.0, 2.0]);
        for &v in &[0.0, 1.0, 2.5, -1.5] {
            let cond = (model.conditional)(0, v).unwrap();
            let mut rng = RandomSource::new(6);
            let state = gars_init(&cond, ExtraPointRule::Midpoint, &mut rng).unwrap();
            assert!(state.support().len() >= 2);
            let trace = gars_run(&cond, 5, ExtraPointRule::Midpoint, &mut rng).unwrap();
            assert_eq!(trace.samples.len(), 5);
        }
    }

    #[test]
    fn gibbs_chain_runs_and_mixes() {
        let model = range_model_2d([5.0, 2.0]);
        let mut rng = RandomSource::new(21);
        let (chain, trace) = gibbs_gars(&model, 300, ExtraPointRule::Midpoint, &mut rng).unwrap();
        assert_eq!(chain.len(), 300);
        let rate = trace.acceptance_rate();
        assert!(rate > 0.05 && rate <= 1.0, "acceptance {rate}");
        // Both modes of the bimodal posterior appear in a modest chain.
        let lo = chain.iter().filter(|p| p[0] < 1.0).count();
        assert!(
            lo > 0 && lo < chain.len(),
            "chain stuck: {lo} of {}",
            chain.len()
        );
    }

    #[test]
    fn gibbs_fixed_rs_matches_gars_distribution_roughly() {
        let model = range_model_2d([5.0, 2.0]);
        let bound = |cond: &ObservationModel| {
            crate::bounds::quadratic_bound_model(cond, &crate::bounds::BoundOptions::default())
                .map(|(g2, _)| g2)
        };
        let mut rng = RandomSource::new(22);
        let (chain, trace) = gibbs_fixed_rs(&model, 200, &bound, &mut rng).unwrap();
        assert_eq!(chain.len(), 200);
        assert!(
            trace.acceptance_rate() < 0.5,
            "fixed bound should accept rarely"
        );
        let mean1: f64 = chain.iter().map(|p| p[0]).sum::<f64>() / 200.0;
        assert!(mean1.abs() < 3.0);
    }
}
