use serde::{Deserialize, Serialize};

use super::quadrature::{channel_mi, gaussian_channel_mi, QUADRATURE_TOLERANCE};
use crate::error::{Error, Result};
use crate::filtering::{kalman_bucy, observation_mean, observation_table, ExactFilter};
use crate::generative::check_step_ratio;
use crate::mc::{for_each_ordered, CurveMoments};
use crate::models::{LatentScenario, Mixture, ObservationModel, ScoreModel, Statistic, Support};
use crate::sde::{euler_maruyama, purpose, sample_brownian_increments, RandomStream, SamplePath, TimeGrid};

/// How the `I(Y_0; phi)` starting value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum I0Method {
    Quadrature,
    ClosedForm,
    /// `Y_0` is fixed or `phi` is constant, so the term is exactly zero.
    Deterministic,
    /// Not computed; the curve is then a lower bound.
    Omitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct I0Term {
    pub value: Option<f64>,
    pub method: I0Method,
}

impl I0Term {
    fn zero() -> Self {
        I0Term { value: Some(0.0), method: I0Method::Deterministic }
    }
}

/// Monte-Carlo estimate of `t -> I(Y_{0:t}; phi)` in nats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MIEstimate {
    pub times: Vec<f64>,
    /// `E |<pi, H> - <pi^R, H>|^2` at every grid point.
    pub integrand: Vec<f64>,
    /// `I(Y_0; phi)` (when available) plus half the left-point integral of
    /// the integrand.
    pub cumulative: Vec<f64>,
    pub stderr: Vec<f64>,
    pub value: f64,
    pub std_error: f64,
    pub i0: I0Term,
    pub n_paths: usize,
    pub warnings: Vec<String>,
}

impl MIEstimate {
    /// `(value, stderr)` at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let i = nearest(&self.times, t);
        (self.cumulative[i], self.stderr[i])
    }

    /// First grid time at which the cumulative curve reaches `level`.
    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        self.cumulative.iter().position(|&c| c >= level).map(|i| self.times[i])
    }
}

fn nearest(times: &[f64], t: f64) -> usize {
    let i = times.partition_point(|&x| x < t);
    if i == 0 {
        0
    } else if i == times.len() || t - times[i - 1] <= times[i] - t {
        i - 1
    } else {
        i
    }
}

/// Which of the two score-gap integrands to accumulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreGapForm {
    /// `grad log p(Y_s) - grad log p(Y_s | Y_T)`.
    MarginalVsConditional,
    /// `grad_{Y_s} log p(Y_T | Y_s)`.
    BridgeScore,
}

/// A path of the measurement process under the prior: the latent is drawn
/// first and drives `dY = H(Y, V, t) dt + dW`.
#[derive(Debug, Clone)]
pub struct PriorPath {
    pub component: Option<usize>,
    pub latent: Vec<f64>,
    pub path: SamplePath,
}

/// Draws the latent (`LATENT` sub-stream), `Y_0` (`INITIAL`) and the
/// increments (`INCREMENTS`) of one path.
pub fn simulate_under_prior(
    scenario: &LatentScenario,
    obs: &ObservationModel,
    grid: &TimeGrid,
    stream: RandomStream,
) -> Result<PriorPath> {
    let mut rng = stream.derive(purpose::LATENT).rng();
    let (component, latent) = match scenario {
        LatentScenario::Mixture(m) => {
            let k = m.sample_component(&mut rng);
            (Some(k), m.rendering(k).to_vec())
        }
        LatentScenario::Gaussian(g) => (None, g.sample(&mut rng)),
    };
    let y0 = obs.initial_law(&latent).sample(&mut stream.derive(purpose::INITIAL).rng());
    let inc = sample_brownian_increments(grid, latent.len(), stream.derive(purpose::INCREMENTS));
    let path = euler_maruyama(
        |y, t, out| match obs.at(t) {
            Ok(h) => h.eval(y, &latent, out),
            Err(_) => out.fill(f64::NAN),
        },
        &y0,
        grid,
        &inc,
    )?;
    Ok(PriorPath { component, latent, path })
}

fn check_setup(scenario: &LatentScenario, obs: &ObservationModel, grid: &TimeGrid, n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be >= 1".into()));
    }
    if let Some(p) = scenario.validate().into_iter().next() {
        return Err(Error::InvalidScenario(p));
    }
    if let Some(s) = obs.schedule() {
        if (s.horizon - grid.horizon()).abs() > 1e-12 * s.horizon {
            return Err(Error::InvalidGrid(format!(
                "grid horizon {} differs from schedule horizon {}",
                grid.horizon(),
                s.horizon
            )));
        }
        check_step_ratio(s, grid)?;
    }
    Ok(())
}

fn label_support(labels: &[u32], label: u32) -> Support {
    Support::from_mask(labels.iter().map(|&l| l == label).collect())
}

/// `I(Y_0; phi)` for the initial law of `obs`.
pub fn initial_information(scenario: &LatentScenario, obs: &ObservationModel, statistic: &Statistic) -> Result<I0Term> {
    let Some(s) = obs.schedule() else {
        return Ok(I0Term::zero());
    };
    let (d, var) = (s.decay(s.horizon), s.noise_variance(s.horizon));
    match scenario {
        LatentScenario::Mixture(m) => {
            if m.labels(statistic)?.1 <= 1 {
                return Ok(I0Term::zero());
            }
            if m.dim() > 2 {
                return Ok(I0Term { value: None, method: I0Method::Omitted });
            }
            let v = channel_mi(m, statistic, d, var.sqrt(), QUADRATURE_TOLERANCE)?;
            Ok(I0Term { value: Some(v), method: I0Method::Quadrature })
        }
        LatentScenario::Gaussian(g) => match statistic {
            Statistic::Constant => Ok(I0Term::zero()),
            Statistic::FullLatent => {
                if g.variance == 0.0 {
                    return Ok(I0Term::zero());
                }
                Ok(I0Term { value: Some(gaussian_channel_mi(g.dim(), g.variance, d, var)), method: I0Method::ClosedForm })
            }
            _ => Err(gaussian_statistic_error()),
        },
    }
}

fn gaussian_statistic_error() -> Error {
    Error::InvalidArgument("a Gaussian latent supports only the constant and full-latent statistics".into())
}

/// Runs `per_path` on `n_paths` derived streams and assembles the curve.
fn estimate<F>(grid: &TimeGrid, n_paths: usize, stream: RandomStream, i0: I0Term, per_path: F) -> Result<MIEstimate>
where
    F: Fn(RandomStream) -> Result<Vec<f64>> + Sync,
{
    let len = grid.len();
    let mut q_moments = CurveMoments::new(len);
    let mut c_moments = CurveMoments::new(len);
    let mut c = vec![0.0; len];
    for_each_ordered(n_paths as u64, |i| per_path(stream.derive(i)), |_, q| {
        c[0] = 0.0;
        for i in 0..grid.steps() {
            c[i + 1] = c[i] + 0.5 * q[i] * grid.dt(i);
        }
        q_moments.push(&q);
        c_moments.push(&c);
        Ok(())
    })?;
    let base = i0.value.unwrap_or(0.0);
    let cumulative: Vec<f64> = c_moments.mean().into_iter().map(|x| base + x).collect();
    let stderr = c_moments.stderr();
    let mut warnings = Vec::new();
    if i0.method == I0Method::Omitted {
        warnings.push("I(Y_0; phi) omitted: the curve is a lower bound".to_string());
    }
    Ok(MIEstimate {
        times: grid.points().to_vec(),
        integrand: q_moments.mean(),
        value: cumulative[len - 1],
        std_error: stderr[len - 1],
        cumulative,
        stderr,
        i0,
        n_paths,
        warnings,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Filtration-gap estimator: along paths simulated under the prior, runs the
/// measurements-only and the label-enlarged exact filters on common random
/// numbers and integrates `1/2 |<pi, H> - <pi^R, H>|^2`.
///
/// Finite mixtures accept every observation model. A Gaussian latent is
/// supported with the static observation (Kalman–Bucy filter) and the linear
/// bridge (closed-form posterior mean), for the constant and full-latent
/// statistics.
pub fn mi_general(
    scenario: &LatentScenario,
    obs: &ObservationModel,
    grid: &TimeGrid,
    statistic: &Statistic,
    n_paths: usize,
    stream: RandomStream,
) -> Result<MIEstimate> {
    check_setup(scenario, obs, grid, n_paths)?;
    let i0 = initial_information(scenario, obs, statistic)?;
    match scenario {
        LatentScenario::Mixture(m) => {
            let (labels, count) = m.labels(statistic)?;
            estimate(grid, n_paths, stream, i0, |s| {
                let p = simulate_under_prior(scenario, obs, grid, s)?;
                if count <= 1 {
                    return Ok(vec![0.0; grid.len()]);
                }
                let k = p.component.expect("mixture paths carry a component");
                filtration_gap(m, obs, &p.path, &label_support(&labels, labels[k]))
            })
        }
        LatentScenario::Gaussian(g) => {
            match statistic {
                Statistic::Constant => return estimate(grid, n_paths, stream, i0, |_| Ok(vec![0.0; grid.len()])),
                Statistic::FullLatent => {}
                _ => return Err(gaussian_statistic_error()),
            }
            match obs {
                ObservationModel::Static => estimate(grid, n_paths, stream, i0, |s| {
                    let p = simulate_under_prior(scenario, obs, grid, s)?;
                    let kb = kalman_bucy(&p.path, &g.mean, g.variance)?;
                    Ok(kb.means.iter().map(|m| sq_dist(m, &p.latent)).collect())
                }),
                ObservationModel::LinearBridge(sch) => {
                    let model = ScoreModel::new(scenario.clone(), *sch);
                    estimate(grid, n_paths, stream, i0, |s| {
                        let p = simulate_under_prior(scenario, obs, grid, s)?;
                        bridge_gap(&model, &p, None)
                    })
                }
                ObservationModel::Custom(_) => Err(Error::InvalidArgument(
                    "a Gaussian latent has no exact filter under a custom observation".into(),
                )),
            }
        }
    }
}

/// `|<pi_i, H> - <pi_i^R, H>|^2` along one path, both filters sharing the
/// observation table of every step.
fn filtration_gap(m: &Mixture, obs: &ObservationModel, path: &SamplePath, support: &Support) -> Result<Vec<f64>> {
    let grid = path.grid();
    let n = path.dim();
    let y0 = path.at(0);
    let mut full = ExactFilter::with_support(m, obs, None, y0)?;
    let mut restricted = ExactFilter::with_support(m, obs, Some(support), y0)?;
    let mut table = vec![0.0; m.len() * n];
    let (mut h1, mut h2, mut dy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut q = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        observation_table(m, obs, path.at(i), grid.t(i), &mut table)?;
        observation_mean(full.posterior(), &table, &mut h1);
        observation_mean(restricted.posterior(), &table, &mut h2);
        q.push(sq_dist(&h1, &h2));
        if i < grid.steps() {
            path.increment(i, &mut dy);
            full.update(&table, &dy, grid.dt(i))?;
            restricted.update(&table, &dy, grid.dt(i))?;
        }
    }
    Ok(q)
}

/// `m(t)^2 |E[V | Y_t] - E[V | Y_t, phi]|^2`; `support == None` means the
/// latent itself is revealed.
fn bridge_gap(model: &ScoreModel, p: &PriorPath, support: Option<&Support>) -> Result<Vec<f64>> {
    let grid = p.path.grid();
    (0..grid.len())
        .map(|i| {
            let (y, t) = (p.path.at(i), grid.t(i));
            let e = model.posterior_mean(y, t, None)?;
            let er = match support {
                Some(s) => model.posterior_mean(y, t, Some(s))?,
                None => p.latent.clone(),
            };
            Ok(model.schedule().m(t)?.powi(2) * sq_dist(&e, &er))
        })
        .collect()
}

/// Linear-diffusion estimator: `1/2 E int m(s)^2 |E[V|Y_s] - E[V|Y_s, phi]|^2 ds`
/// with both conditional means in closed form, along bridge paths simulated
/// with a known latent.
pub fn mi_linear(
    model: &ScoreModel,
    grid: &TimeGrid,
    statistic: &Statistic,
    n_paths: usize,
    stream: RandomStream,
) -> Result<MIEstimate> {
    let scenario = model.scenario();
    let obs = ObservationModel::LinearBridge(*model.schedule());
    check_setup(scenario, &obs, grid, n_paths)?;
    let i0 = initial_information(scenario, &obs, statistic)?;
    match scenario {
        LatentScenario::Mixture(m) => {
            let (labels, count) = m.labels(statistic)?;
            estimate(grid, n_paths, stream, i0, |s| {
                let p = simulate_under_prior(scenario, &obs, grid, s)?;
                if count <= 1 {
                    return Ok(vec![0.0; grid.len()]);
                }
                let k = p.component.expect("mixture paths carry a component");
                bridge_gap(model, &p, Some(&label_support(&labels, labels[k])))
            })
        }
        LatentScenario::Gaussian(_) => match statistic {
            Statistic::Constant => estimate(grid, n_paths, stream, i0, |_| Ok(vec![0.0; grid.len()])),
            Statistic::FullLatent => estimate(grid, n_paths, stream, i0, |s| {
                let p = simulate_under_prior(scenario, &obs, grid, s)?;
                bridge_gap(model, &p, None)
            }),
            _ => Err(gaussian_statistic_error()),
        },
    }
}

/// Both score-gap integrands at one point: `(A, B)` with
/// `A = grad log p(y, t) - grad log p(y, t | V = v)` and
/// `B = grad_y log P(V = v | Y_t = y)`. The identity `A = -B` holds exactly.
pub fn score_gap_integrands(model: &ScoreModel, y: &[f64], t: f64, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = model.score(y, t, None)?;
    let c = model.conditional_score_given_rendering(y, t, v)?;
    let a = s.iter().zip(&c).map(|(x, y)| x - y).collect();
    Ok((a, model.terminal_log_gradient(y, t, v)?))
}

/// Score-gap estimator of `I(Y_{0:t}; V)`: `1/2 E int |form|^2 ds` along
/// bridge paths with a known latent.
pub fn mi_score_gap(
    model: &ScoreModel,
    grid: &TimeGrid,
    n_paths: usize,
    stream: RandomStream,
    form: ScoreGapForm,
) -> Result<MIEstimate> {
    let scenario = model.scenario();
    let obs = ObservationModel::LinearBridge(*model.schedule());
    check_setup(scenario, &obs, grid, n_paths)?;
    let i0 = initial_information(scenario, &obs, &Statistic::FullLatent)?;
    let mut est = estimate(grid, n_paths, stream, i0, |s| {
        let p = simulate_under_prior(scenario, &obs, grid, s)?;
        (0..grid.len())
            .map(|i| {
                let (y, t) = (p.path.at(i), grid.t(i));
                let g = match form {
                    ScoreGapForm::MarginalVsConditional => score_gap_integrands(model, y, t, &p.latent)?.0,
                    ScoreGapForm::BridgeScore => model.terminal_log_gradient(y, t, &p.latent)?,
                };
                Ok(g.iter().map(|x| x * x).sum())
            })
            .collect()
    })?;
    if let LatentScenario::Gaussian(g) = scenario {
        if g.variance > 0.0 && grid.end() > 0.9 * grid.horizon() {
            est.warnings.push(format!(
                "continuous latent: the integrand grows like 1/(T - s) near the cutoff, so the estimate at t = {} diverges as epsilon -> 0",
                grid.end()
            ));
        }
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Attribute, GaussianLatent, Schedule};
    use crate::sde::{make_grid, Spacing};

    fn binary() -> Mixture {
        Mixture::new(vec![0.5, 0.5], vec![vec![-1.0], vec![1.0]], vec![]).unwrap()
    }

    #[test]
    fn constant_statistic_is_zero() {
        let sc = LatentScenario::Mixture(binary());
        let obs = ObservationModel::LinearBridge(Schedule::brownian(1.0));
        let grid = make_grid(1.0, 100, 1e-2, Spacing::Uniform).unwrap();
        let e = mi_general(&sc, &obs, &grid, &Statistic::Constant, 50, RandomStream::new(1, 0)).unwrap();
        assert!(e.cumulative.iter().all(|&c| c == 0.0));
        assert_eq!(e.i0.method, I0Method::Deterministic);
    }

    #[test]
    fn single_component_is_zero_for_linear_estimator() {
        let m = Mixture::new(vec![1.0], vec![vec![0.3]], vec![]).unwrap();
        let model = ScoreModel::new(LatentScenario::Mixture(m), Schedule::new(1.0, 1.0).unwrap());
        let grid = make_grid(1.0, 100, 1e-2, Spacing::Uniform).unwrap();
        let e = mi_linear(&model, &grid, &Statistic::Component, 20, RandomStream::new(1, 0)).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn curve_is_monotone_and_capped() {
        let sc = LatentScenario::Mixture(binary());
        let obs = ObservationModel::LinearBridge(Schedule::brownian(1.0));
        let grid = make_grid(1.0, 400, 1e-2, Spacing::refined()).unwrap();
        let e = mi_general(&sc, &obs, &grid, &Statistic::Component, 400, RandomStream::new(2, 0)).unwrap();
        assert!(e.cumulative.windows(2).all(|w| w[1] >= w[0]));
        assert!(e.integrand.iter().all(|&q| q >= 0.0));
        for (c, s) in e.cumulative.iter().zip(&e.stderr) {
            assert!(*c <= 2f64.ln() + 4.0 * s + 1e-12);
        }
        assert!(e.value > 0.6, "{}", e.value);
    }

    #[test]
    fn static_channel_i0_is_deterministic() {
        let g = LatentScenario::Gaussian(GaussianLatent::new(vec![0.0], 1.0).unwrap());
        assert_eq!(initial_information(&g, &ObservationModel::Static, &Statistic::FullLatent).unwrap(), I0Term::zero());
    }

    #[test]
    fn high_dimensional_i0_is_tagged_omitted() {
        let m = Mixture::new(vec![0.5, 0.5], vec![vec![1.0; 3], vec![-1.0; 3]], vec![]).unwrap();
        let obs = ObservationModel::LinearBridge(Schedule::brownian(1.0));
        let t = initial_information(&LatentScenario::Mixture(m), &obs, &Statistic::Component).unwrap();
        assert_eq!(t, I0Term { value: None, method: I0Method::Omitted });
    }

    #[test]
    fn score_gap_forms_cancel() {
        let m = Mixture::new(
            vec![0.2, 0.3, 0.5],
            vec![vec![1.0, 0.0], vec![-1.0, 0.5], vec![0.0, -2.0]],
            vec![Attribute::labels("a", vec![0, 1, 1])],
        )
        .unwrap();
        let model = ScoreModel::new(LatentScenario::Mixture(m.clone()), Schedule::new(0.8, 1.0).unwrap());
        for (y, t) in [([0.3, -0.2], 0.1), ([2.0, 1.0], 0.6), ([-0.5, -1.5], 0.95)] {
            for v in m.renderings() {
                let (a, b) = score_gap_integrands(&model, &y, t, v).unwrap();
                for (x, z) in a.iter().zip(&b) {
                    assert!((x + z).abs() < 1e-8 * (1.0 + x.abs()));
                }
            }
        }
    }

    #[test]
    fn deterministic_gaussian_latent_has_no_information() {
        let model = ScoreModel::new(
            LatentScenario::Gaussian(GaussianLatent::new(vec![0.4], 0.0).unwrap()),
            Schedule::new(1.0, 1.0).unwrap(),
        );
        let grid = make_grid(1.0, 100, 1e-2, Spacing::Uniform).unwrap();
        for form in [ScoreGapForm::MarginalVsConditional, ScoreGapForm::BridgeScore] {
            let e = mi_score_gap(&model, &grid, 20, RandomStream::new(0, 0), form).unwrap();
            assert!(e.value.abs() < 1e-20, "{}", e.value);
        }
    }

    #[test]
    fn nearest_time_lookup() {
        assert_eq!(nearest(&[0.0, 0.5, 1.0], 0.74), 1);
        assert_eq!(nearest(&[0.0, 0.5, 1.0], 0.76), 2);
        assert_eq!(nearest(&[0.0, 0.5, 1.0], -3.0), 0);
        assert_eq!(nearest(&[0.0, 0.5, 1.0], 9.0), 2);
    }
}
