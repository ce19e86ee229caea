//! Exact information theory over dense discrete joint distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest table accepted by [`DiscreteJoint::new`].
pub const MAX_CELLS: usize = 1_000_000;

const MASS_TOL: f64 = 1e-12;

/// Dense probability table over named discrete variables. The last variable
/// varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    names: Vec<String>,
    cards: Vec<usize>,
    probs: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(names: Vec<String>, cards: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if names.is_empty() || names.len() != cards.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} names for {} cardinalities",
                names.len(),
                cards.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::InvalidDistribution(format!("duplicate variable `{name}`")));
            }
        }
        if cards.contains(&0) {
            return Err(Error::InvalidDistribution("zero cardinality".into()));
        }
        let cells = cards
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c).filter(|&n| n <= MAX_CELLS))
            .ok_or_else(|| Error::InvalidDistribution(format!("more than {MAX_CELLS} cells")))?;
        if probs.len() != cells {
            return Err(Error::InvalidDistribution(format!(
                "expected {cells} probabilities, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDistribution("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!("total mass {total} != 1")));
        }
        Ok(DiscreteJoint { names, cards, probs })
    }

    /// Builds a table from an unnormalized nonnegative weight function over
    /// cell indices.
    pub fn from_weights(
        names: &[&str],
        cards: &[usize],
        mut weight: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self> {
        let cells: usize = cards.iter().product();
        let mut idx = vec![0usize; cards.len()];
        let mut probs = Vec::with_capacity(cells);
        for flat in 0..cells {
            decode(flat, cards, &mut idx);
            probs.push(weight(&idx));
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(names.iter().map(|s| s.to_string()).collect(), cards.to_vec(), probs)
    }

    /// Symmetric Dirichlet(1) sample over all cells.
    pub fn random_dirichlet(names: &[&str], cards: &[usize], rng: &mut impl Rng) -> Result<Self> {
        Self::from_weights(names, cards, |_| rng.sample::<f64, _>(Exp1))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    fn positions(&self, vars: &[&str]) -> Result<Vec<usize>> {
        let pos = vars.iter().map(|v| self.position(v)).collect::<Result<Vec<_>>>()?;
        for (i, p) in pos.iter().enumerate() {
            if pos[..i].contains(p) {
                return Err(Error::OverlappingSubsets(self.names[*p].clone()));
            }
        }
        Ok(pos)
    }

    /// Marginal over `vars`, in the given order.
    pub fn marginal(&self, vars: &[&str]) -> Result<DiscreteJoint> {
        if vars.is_empty() {
            return Err(Error::InvalidArgument("empty variable subset".into()));
        }
        let pos = self.positions(vars)?;
        let (cards, probs) = self.marginal_table(&pos);
        Ok(DiscreteJoint {
            names: pos.iter().map(|&p| self.names[p].clone()).collect(),
            cards,
            probs,
        })
    }

    fn marginal_table(&self, pos: &[usize]) -> (Vec<usize>, Vec<f64>) {
        let cards: Vec<usize> = pos.iter().map(|&p| self.cards[p]).collect();
        let mut out = vec![0.0; cards.iter().product()];
        let mut idx = vec![0usize; self.cards.len()];
        for (flat, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            decode(flat, &self.cards, &mut idx);
            let target = pos.iter().fold(0usize, |acc, &q| acc * self.cards[q] + idx[q]);
            out[target] += p;
        }
        (cards, out)
    }

    fn entropy_at(&self, pos: &[usize]) -> f64 {
        if pos.is_empty() {
            return 0.0;
        }
        // Canonical variable order keeps entropies of the same set bit-identical.
        let mut sorted = pos.to_vec();
        sorted.sort_unstable();
        let (_, table) = self.marginal_table(&sorted);
        -table.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
    }

    /// Shannon entropy (nats) of the marginal over `vars`.
    pub fn entropy(&self, vars: &[&str]) -> Result<f64> {
        if vars.is_empty() {
            return Err(Error::InvalidArgument("empty variable subset".into()));
        }
        Ok(self.entropy_at(&self.positions(vars)?))
    }

    fn disjoint(&self, sets: &[&[&str]]) -> Result<Vec<Vec<usize>>> {
        let mut all: Vec<usize> = Vec::new();
        let mut out = Vec::with_capacity(sets.len());
        for set in sets {
            let pos = self.positions(set)?;
            for &p in &pos {
                if all.contains(&p) {
                    return Err(Error::OverlappingSubsets(self.names[p].clone()));
                }
                all.push(p);
            }
            out.push(pos);
        }
        Ok(out)
    }

    /// `I(a; b) = H(a) + H(b) − H(a, b)`.
    pub fn mutual_information(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidArgument("empty variable subset".into()));
        }
        let sets = self.disjoint(&[a, b])?;
        Ok(self.mi_at(&sets[0], &sets[1], &[]))
    }

    /// `I(a; b | c) = Σ_c p(c) I(a; b | c)`, computed as
    /// `H(a,c) + H(b,c) − H(a,b,c) − H(c)`.
    pub fn conditional_mi(&self, a: &[&str], b: &[&str], cond: &[&str]) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidArgument("empty variable subset".into()));
        }
        let sets = self.disjoint(&[a, b, cond])?;
        Ok(self.mi_at(&sets[0], &sets[1], &sets[2]))
    }

    fn mi_at(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        let cat = |parts: &[&[usize]]| parts.concat();
        self.entropy_at(&cat(&[a, c])) + self.entropy_at(&cat(&[b, c]))
            - self.entropy_at(&cat(&[a, b, c]))
            - self.entropy_at(c)
    }

    /// Signed interaction information of 3 or 4 single variables:
    /// `I(a;b;c) = I(a;b) − I(a;b|c)` and `I(a;b;c;d) = I(a;b;c) − I(a;b;c|d)`.
    pub fn interaction_information(&self, vars: &[&str]) -> Result<f64> {
        if !(3..=4).contains(&vars.len()) {
            return Err(Error::ArityError(vars.len()));
        }
        let pos = self.positions(vars)?;
        let (a, b) = (&pos[0..1], &pos[1..2]);
        let three = |cond: &[usize]| -> f64 {
            let with_c: Vec<usize> = [&pos[2..3], cond].concat();
            self.mi_at(a, b, cond) - self.mi_at(a, b, &with_c)
        };
        Ok(match pos.len() {
            3 => three(&[]),
            _ => three(&[]) - three(&pos[3..4]),
        })
    }
}

fn decode(mut flat: usize, cards: &[usize], idx: &mut [usize]) {
    for (slot, &c) in idx.iter_mut().zip(cards).rev() {
        *slot = flat % c;
        flat /= c;
    }
}

/// Thresholds of the sufficiency search over binary `(s1, s2, z1, z2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop31Thresholds {
    pub min_source_mi: f64,
    pub max_latent_mi: f64,
    pub sufficiency_tol: f64,
}

impl Default for Prop31Thresholds {
    fn default() -> Self {
        Prop31Thresholds {
            min_source_mi: 0.01,
            max_latent_mi: 1e-6,
            sufficiency_tol: 1e-6,
        }
    }
}

/// How each candidate joint was produced from a trial's random source pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateFamily {
    /// Unconstrained Dirichlet sample over all 16 cells.
    Dirichlet,
    /// `z_k` a random bijection of `s_k`, so `I(z_k; s_k) = H(s_k)`.
    SufficientCode,
    /// `z_1` a bijection of `s_1`, `z_2` independent noise: `I(z_1; z_2) = 0`.
    IndependentSecond,
    /// Mirror image of [`CandidateFamily::IndependentSecond`].
    IndependentFirst,
}

const FAMILIES: [CandidateFamily; 4] = [
    CandidateFamily::Dirichlet,
    CandidateFamily::SufficientCode,
    CandidateFamily::IndependentSecond,
    CandidateFamily::IndependentFirst,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop31Hit {
    pub trial: usize,
    pub family: CandidateFamily,
    pub source_mi: f64,
    pub latent_mi: f64,
    pub sufficiency_gap: [f64; 2],
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop31Report {
    pub trials: usize,
    pub seed: u64,
    pub relaxed: bool,
    pub thresholds: Prop31Thresholds,
    pub candidates: usize,
    pub correlated_sources: usize,
    pub independent_latents: usize,
    pub sufficient_latents: usize,
    /// Joints meeting every active condition. Without `relaxed` these are
    /// counterexamples and the list must be empty.
    pub hits: Vec<Prop31Hit>,
}

const VARS: [&str; 4] = ["s1", "s2", "z1", "z2"];

fn family_joint(
    family: CandidateFamily,
    raw: &DiscreteJoint,
    rng: &mut impl Rng,
) -> Result<DiscreteJoint> {
    if family == CandidateFamily::Dirichlet {
        return Ok(raw.clone());
    }
    let src = raw.marginal(&["s1", "s2"])?;
    let p_s = src.probs().to_vec();
    let flip1 = rng.random::<bool>() as usize;
    let flip2 = rng.random::<bool>() as usize;
    let noise: f64 = rng.random();
    DiscreteJoint::from_weights(&VARS, &[2, 2, 2, 2], |i| {
        let ps = p_s[i[0] * 2 + i[1]];
        let code1 = (i[2] == i[0] ^ flip1) as u8 as f64;
        let code2 = (i[3] == i[1] ^ flip2) as u8 as f64;
        let bern = |v: usize| if v == 1 { noise } else { 1.0 - noise };
        match family {
            CandidateFamily::SufficientCode => ps * code1 * code2,
            CandidateFamily::IndependentSecond => ps * code1 * bern(i[3]),
            CandidateFamily::IndependentFirst => ps * bern(i[2]) * code2,
            CandidateFamily::Dirichlet => unreachable!(),
        }
    })
}

/// Searches random binary joints over `(s1, s2, z1, z2)` for ones that have
/// correlated sources, independent latents and fully informative latents at
/// once. Each trial draws a Dirichlet(1) joint and three structured relatives
/// sharing its source marginal. With `relaxed`, the latent-independence
/// condition is dropped and the hits are witnesses instead of
/// counterexamples.
///
/// Trial `t` uses its own ChaCha stream `t` under `seed`, so chunks of trials
/// can be evaluated independently and merged in trial order.
pub fn prop31_search(
    trials: usize,
    seed: u64,
    relaxed: bool,
    thresholds: Prop31Thresholds,
) -> Result<Prop31Report> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut report = Prop31Report {
        trials,
        seed,
        relaxed,
        thresholds,
        candidates: 0,
        correlated_sources: 0,
        independent_latents: 0,
        sufficient_latents: 0,
        hits: Vec::new(),
    };
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let raw = DiscreteJoint::random_dirichlet(&VARS, &[2, 2, 2, 2], &mut rng)?;
        for family in FAMILIES {
            let joint = family_joint(family, &raw, &mut rng)?;
            report.candidates += 1;
            let source_mi = joint.mutual_information(&["s1"], &["s2"])?;
            let latent_mi = joint.mutual_information(&["z1"], &["z2"])?;
            let gap = [
                joint.entropy(&["s1"])? - joint.mutual_information(&["z1"], &["s1"])?,
                joint.entropy(&["s2"])? - joint.mutual_information(&["z2"], &["s2"])?,
            ];
            let correlated = source_mi > thresholds.min_source_mi;
            let independent = latent_mi < thresholds.max_latent_mi;
            let sufficient = gap.iter().all(|&g| g <= thresholds.sufficiency_tol);
            report.correlated_sources += correlated as usize;
            report.independent_latents += independent as usize;
            report.sufficient_latents += sufficient as usize;
            if correlated && sufficient && (relaxed || independent) {
                report.hits.push(Prop31Hit {
                    trial,
                    family,
                    source_mi,
                    latent_mi,
                    sufficiency_gap: gap,
                    probs: joint.probs().to_vec(),
                });
            }
        }
    }
    Ok(report)
}
