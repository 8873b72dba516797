use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the implicit attribute mapping each component to its own index.
pub const COMPONENT_ATTRIBUTE: &str = "component";

/// Values of a statistic `phi` on the components of a finite mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticValues {
    /// Discrete label per component.
    Labels(Vec<u32>),
    /// Real vector per component.
    Vectors(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub values: StatisticValues,
}

impl Attribute {
    pub fn labels(name: &str, labels: Vec<u32>) -> Self {
        Attribute { name: name.to_string(), values: StatisticValues::Labels(labels) }
    }
}

/// Finite mixture latent: component `k` has prior weight `w_k` and renders to
/// `v_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    weights: Vec<f64>,
    renderings: Vec<Vec<f64>>,
    #[serde(default)]
    attributes: Vec<Attribute>,
}

/// Gaussian latent: `V ~ N(mean, variance I)`. A zero variance gives a
/// deterministic rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLatent {
    pub mean: Vec<f64>,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LatentScenario {
    Mixture(Mixture),
    Gaussian(GaussianLatent),
}

/// Indicator of the components consistent with some side information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support(Vec<bool>);

impl Support {
    pub fn full(k: usize) -> Self {
        Support(vec![true; k])
    }

    pub fn single(k: usize, idx: usize) -> Self {
        let mut s = vec![false; k];
        s[idx] = true;
        Support(s)
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Support(mask)
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0[k]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn is_full(&self) -> bool {
        self.0.iter().all(|&b| b)
    }
}

/// Which random variable a mutual-information estimate is taken against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "kebab-case")]
pub enum Statistic {
    /// A label that is the same on every component.
    Constant,
    /// The component index itself (equivalently `V` for a mixture).
    Component,
    /// A named labelled attribute of the mixture.
    Attribute(String),
    /// The full latent (for Gaussian scenarios).
    FullLatent,
}

impl Mixture {
    pub fn new(weights: Vec<f64>, renderings: Vec<Vec<f64>>, attributes: Vec<Attribute>) -> Result<Self> {
        let m = Mixture { weights, renderings, attributes };
        let problems = m.problems();
        if let Some(p) = problems.into_iter().next() {
            return Err(Error::InvalidScenario(p));
        }
        Ok(m)
    }

    /// Builds without validating; callers collect [`Mixture::problems`].
    pub(crate) fn unchecked(weights: Vec<f64>, renderings: Vec<Vec<f64>>, attributes: Vec<Attribute>) -> Self {
        Mixture { weights, renderings, attributes }
    }

    /// Every violated invariant, in a stable order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let k = self.weights.len();
        if k == 0 {
            out.push("weights: at least one component is required".to_string());
        }
        if self.renderings.len() != k {
            out.push(format!("renderings: expected {k} entries, got {}", self.renderings.len()));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            out.push("weights: every weight must be positive and finite".to_string());
        }
        let total: f64 = self.weights.iter().sum();
        if k > 0 && (total - 1.0).abs() > 1e-9 {
            out.push(format!("weights: must sum to 1, got {total}"));
        }
        let dim = self.renderings.first().map_or(0, Vec::len);
        if self.renderings.iter().any(|v| v.len() != dim || dim == 0) {
            out.push("renderings: all renderings must share one positive dimension".to_string());
        }
        if self.renderings.iter().flatten().any(|x| !x.is_finite()) {
            out.push("renderings: entries must be finite".to_string());
        }
        for i in 0..self.renderings.len() {
            for j in i + 1..self.renderings.len() {
                if self.renderings[i] == self.renderings[j] {
                    out.push(format!("renderings: components {i} and {j} coincide"));
                }
            }
        }
        for a in &self.attributes {
            if a.name == COMPONENT_ATTRIBUTE {
                out.push(format!("attributes: `{COMPONENT_ATTRIBUTE}` is reserved"));
            }
            let len = match &a.values {
                StatisticValues::Labels(l) => l.len(),
                StatisticValues::Vectors(v) => v.len(),
            };
            if len != k {
                out.push(format!("attributes.{}: expected {k} values, got {len}", a.name));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.renderings[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn renderings(&self) -> &[Vec<f64>] {
        &self.renderings
    }

    pub fn rendering(&self, k: usize) -> &[f64] {
        &self.renderings[k]
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Result<&Attribute> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    /// Discrete labels of `statistic` per component, and the label count.
    pub fn labels(&self, statistic: &Statistic) -> Result<(Vec<u32>, usize)> {
        let labels = match statistic {
            Statistic::Constant => vec![0; self.len()],
            // Renderings are distinct, so V identifies the component.
            Statistic::Component | Statistic::FullLatent => (0..self.len() as u32).collect(),
            Statistic::Attribute(name) if name == COMPONENT_ATTRIBUTE => (0..self.len() as u32).collect(),
            Statistic::Attribute(name) => match &self.attribute(name)?.values {
                StatisticValues::Labels(l) => l.clone(),
                StatisticValues::Vectors(_) => {
                    return Err(Error::InvalidArgument(format!("attribute `{name}` is not discrete")))
                }
            },
        };
        let count = labels.iter().max().map_or(0, |m| *m as usize + 1);
        Ok((labels, count))
    }

    /// Components whose `attribute` equals `label`.
    pub fn support(&self, attribute: &str, label: u32) -> Result<Support> {
        let (labels, _) = self.labels(&Statistic::Attribute(attribute.to_string()))?;
        let s: Vec<bool> = labels.iter().map(|&l| l == label).collect();
        if !s.iter().any(|&b| b) {
            return Err(Error::EmptySupport { attribute: attribute.to_string(), label });
        }
        Ok(Support(s))
    }

    /// Real-valued statistic table `phi(k)`; labels are widened to scalars.
    pub fn statistic_table(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        if name == COMPONENT_ATTRIBUTE {
            return Ok((0..self.len()).map(|k| vec![k as f64]).collect());
        }
        Ok(match &self.attribute(name)?.values {
            StatisticValues::Labels(l) => l.iter().map(|&x| vec![x as f64]).collect(),
            StatisticValues::Vectors(v) => v.clone(),
        })
    }

    /// Prior weights restricted to `support` and renormalized.
    pub fn restricted_prior(&self, support: Option<&Support>) -> Vec<f64> {
        let mut w: Vec<f64> = self
            .weights
            .iter()
            .enumerate()
            .map(|(k, &w)| if support.is_none_or(|s| s.contains(k)) { w } else { 0.0 })
            .collect();
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        w
    }

    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.weights, rng)
    }

    /// Shannon entropy (nats) of the label distribution of `statistic`.
    pub fn label_entropy(&self, statistic: &Statistic) -> Result<f64> {
        let (labels, count) = self.labels(statistic)?;
        let mut p = vec![0.0; count];
        for (k, &l) in labels.iter().enumerate() {
            p[l as usize] += self.weights[k];
        }
        Ok(-p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>())
    }
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

impl GaussianLatent {
    pub fn new(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if mean.is_empty() || mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidScenario("gaussian mean must be a non-empty finite vector".into()));
        }
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::InvalidScenario(format!("gaussian variance must be >= 0, got {variance}")));
        }
        Ok(GaussianLatent { mean, variance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sd = self.variance.sqrt();
        self.mean
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + sd * z
            })
            .collect()
    }
}

impl LatentScenario {
    pub fn dim(&self) -> usize {
        match self {
            LatentScenario::Mixture(m) => m.dim(),
            LatentScenario::Gaussian(g) => g.dim(),
        }
    }

    pub fn as_mixture(&self) -> Result<&Mixture> {
        match self {
            LatentScenario::Mixture(m) => Ok(m),
            LatentScenario::Gaussian(_) => Err(Error::InvalidScenario("a finite-mixture scenario is required".into())),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        match self {
            LatentScenario::Mixture(m) => m.problems(),
            LatentScenario::Gaussian(g) => GaussianLatent::new(g.mean.clone(), g.variance)
                .err()
                .map(|e| vec![e.to_string()])
                .unwrap_or_default(),
        }
    }

    /// Draws a rendering `V` from the prior.
    pub fn sample_rendering<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            LatentScenario::Mixture(m) => m.rendering(m.sample_component(rng)).to_vec(),
            LatentScenario::Gaussian(g) => g.sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> Mixture {
        Mixture::new(
            vec![0.2, 0.3, 0.5],
            vec![vec![-1.0], vec![0.0], vec![2.0]],
            vec![Attribute::labels("sign", vec![0, 1, 1])],
        )
        .unwrap()
    }

    #[test]
    fn invariants_are_checked() {
        assert!(Mixture::new(vec![0.5, 0.6], vec![vec![0.0], vec![1.0]], vec![]).is_err());
        assert!(Mixture::new(vec![0.5, 0.5], vec![vec![1.0], vec![1.0]], vec![]).is_err());
        assert!(Mixture::new(vec![1.0, 0.0], vec![vec![0.0], vec![1.0]], vec![]).is_err());
        let bad = Mixture {
            weights: vec![0.5, 0.5],
            renderings: vec![vec![0.0]],
            attributes: vec![Attribute::labels("a", vec![0])],
        };
        assert_eq!(bad.problems().len(), 2);
    }

    #[test]
    fn supports_and_labels() {
        let m = three();
        assert_eq!(m.support("sign", 1).unwrap().as_slice(), &[false, true, true]);
        assert!(matches!(m.support("sign", 7), Err(Error::EmptySupport { .. })));
        assert!(matches!(m.support("nope", 0), Err(Error::UnknownAttribute(_))));
        assert_eq!(m.labels(&Statistic::Component).unwrap(), (vec![0, 1, 2], 3));
        let p = m.restricted_prior(Some(&m.support("sign", 1).unwrap()));
        assert!((p[1] - 0.375).abs() < 1e-15 && p[0] == 0.0);
    }

    #[test]
    fn label_entropy_of_attribute() {
        let m = three();
        let e = m.label_entropy(&Statistic::Attribute("sign".into())).unwrap();
        assert!((e - -(0.2f64 * 0.2f64.ln() + 0.8 * 0.8f64.ln())).abs() < 1e-15);
        assert_eq!(m.label_entropy(&Statistic::Constant).unwrap(), 0.0);
    }

    #[test]
    fn categorical_frequencies() {
        let m = three();
        let mut rng = crate::sde::RandomStream::new(1, 1).rng();
        let n = 50_000;
        let mut c = [0usize; 3];
        for _ in 0..n {
            c[m.sample_component(&mut rng)] += 1;
        }
        for (k, w) in m.weights().iter().enumerate() {
            let p = c[k] as f64 / n as f64;
            assert!((p - w).abs() < 4.0 * (w * (1.0 - w) / n as f64).sqrt());
        }
    }
}
