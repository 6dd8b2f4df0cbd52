//! Evaluation quantities: NMI, ARI, Cohen's kappa, estimation accuracy
//! rate, MSE and a one-sided Welch t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::agent::{AgentState, Utterance};
use crate::error::{Error, Result};
use crate::modality::Modality;

/// Nonnegative table over (row, column) pairs, normalized on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    probs: Vec<Vec<f64>>,
}

impl JointTable {
    pub fn from_counts(counts: Vec<Vec<f64>>) -> Result<Self> {
        let cols = counts.first().map_or(0, Vec::len);
        if cols == 0 || counts.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("joint table must be a non-empty rectangle"));
        }
        if counts.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid("joint table entries must be finite and nonnegative"));
        }
        let total: f64 = counts.iter().flatten().sum();
        if total <= 0.0 {
            return Err(Error::invalid("joint table has zero mass"));
        }
        let probs = counts
            .into_iter()
            .map(|r| r.into_iter().map(|x| x / total).collect())
            .collect();
        Ok(JointTable { probs })
    }

    pub fn rows(&self) -> usize {
        self.probs.len()
    }

    pub fn cols(&self) -> usize {
        self.probs[0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i][j]
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.probs.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        (0..self.cols())
            .map(|j| self.probs.iter().map(|r| r[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> JointTable {
        JointTable {
            probs: (0..self.cols())
                .map(|j| self.probs.iter().map(|r| r[j]).collect())
                .collect(),
        }
    }
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// `I(X;Y) / sqrt(H(X) H(Y))`.
pub fn nmi(joint: &JointTable) -> Result<f64> {
    let pr = joint.row_marginal();
    let pc = joint.col_marginal();
    let (hr, hc) = (entropy(&pr), entropy(&pc));
    if hr <= 0.0 || hc <= 0.0 {
        return Err(Error::Undefined("a marginal has zero entropy".into()));
    }
    let mut mi = 0.0;
    for (i, row) in joint.probs.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            if *p > 0.0 {
                mi += p * (p / (pr[i] * pc[j])).ln();
            }
        }
    }
    Ok((mi / (hr * hc).sqrt()).clamp(0.0, 1.0))
}

/// Word-by-modality joint from the agent's word distributions, each
/// category weighted by its share of the agent's observations.
pub fn build_word_modality_joint(agent: &AgentState) -> Result<JointTable> {
    let mut counts = vec![vec![0.0; Modality::ALL.len()]; agent.vocab()];
    for m in Modality::ALL {
        let occ = agent.occupancy(m);
        let total: usize = occ.iter().sum();
        for (k, n) in occ.iter().enumerate() {
            let weight = *n as f64 / total as f64;
            for (w, p) in agent.theta_row(m, k).as_slice().iter().enumerate() {
                counts[w][m.index()] += weight * p;
            }
        }
    }
    JointTable::from_counts(counts)
}

/// Word-by-modality joint from counts of words observed in each slot.
pub fn build_word_modality_joint_from_words(words: &[Utterance], vocab: usize) -> Result<JointTable> {
    let mut counts = vec![vec![0.0; Modality::ALL.len()]; vocab];
    for u in words {
        for (w, m) in u.words.iter().zip(u.order) {
            let row = counts
                .get_mut(*w)
                .ok_or_else(|| Error::invalid(format!("word {w} outside vocabulary of {vocab}")))?;
            row[m.index()] += 1.0;
        }
    }
    JointTable::from_counts(counts)
}

fn choose2(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings.
pub fn ari(x: &[usize], y: &[usize]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("label lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("ARI needs at least two labels"));
    }
    let nx = x.iter().max().unwrap() + 1;
    let ny = y.iter().max().unwrap() + 1;
    let mut table = vec![vec![0usize; ny]; nx];
    for (a, b) in x.iter().zip(y) {
        table[*a][*b] += 1;
    }
    let index: f64 = table.iter().flatten().map(|n| choose2(*n)).sum();
    let a: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let b: f64 = (0..ny)
        .map(|j| choose2(table.iter().map(|r| r[j]).sum()))
        .sum();
    let expected = a * b / choose2(x.len());
    let max = (a + b) / 2.0;
    if max == expected {
        // both partitions trivial in the same way
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Interpretation bands for Cohen's kappa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaBand {
    NoAgreement,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl KappaBand {
    pub fn of(kappa: f64) -> KappaBand {
        if kappa < 0.0 {
            KappaBand::NoAgreement
        } else if kappa <= 0.20 {
            KappaBand::Slight
        } else if kappa <= 0.40 {
            KappaBand::Fair
        } else if kappa <= 0.60 {
            KappaBand::Moderate
        } else if kappa <= 0.80 {
            KappaBand::Substantial
        } else {
            KappaBand::AlmostPerfect
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            KappaBand::NoAgreement => "no agreement",
            KappaBand::Slight => "slight",
            KappaBand::Fair => "fair",
            KappaBand::Moderate => "moderate",
            KappaBand::Substantial => "substantial",
            KappaBand::AlmostPerfect => "almost perfect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: f64,
    pub band: KappaBand,
}

/// Cohen's kappa between two aligned word sequences.
pub fn kappa(x: &[usize], y: &[usize]) -> Result<Kappa> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::invalid("kappa needs two non-empty sequences of equal length"));
    }
    let n = x.len() as f64;
    let size = x.iter().chain(y).max().unwrap() + 1;
    let (mut fx, mut fy) = (vec![0.0; size], vec![0.0; size]);
    let mut agree = 0.0;
    for (a, b) in x.iter().zip(y) {
        fx[*a] += 1.0;
        fy[*b] += 1.0;
        if a == b {
            agree += 1.0;
        }
    }
    let co = agree / n;
    let ce: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum::<f64>() / (n * n);
    kappa_from_rates(co, ce)
}

/// Kappa from observed and chance agreement rates.
pub fn kappa_from_rates(co: f64, ce: f64) -> Result<Kappa> {
    if (1.0 - ce).abs() < 1e-15 {
        return Err(Error::Undefined("chance agreement is 1".into()));
    }
    let value = (co - ce) / (1.0 - ce);
    Ok(Kappa {
        value,
        band: KappaBand::of(value),
    })
}

/// Fraction of positions where the hypothesis matches the reference.
pub fn ear(reference: &[usize], hypothesis: &[usize]) -> Result<f64> {
    if reference.is_empty() || reference.len() != hypothesis.len() {
        return Err(Error::invalid("EAR needs two non-empty sequences of equal length"));
    }
    let errors = reference.iter().zip(hypothesis).filter(|(a, b)| a != b).count();
    Ok(1.0 - errors as f64 / reference.len() as f64)
}

/// Squared Euclidean error of each prediction.
pub fn squared_errors<P: AsRef<[f64]>, T: AsRef<[f64]>>(pred: &[P], truth: &[T]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::invalid("prediction and truth sets must be non-empty and equal in size"));
    }
    pred.iter()
        .zip(truth)
        .map(|(p, t)| {
            let (p, t) = (p.as_ref(), t.as_ref());
            if p.len() != t.len() {
                return Err(Error::invalid(format!("dimension mismatch: {} vs {}", p.len(), t.len())));
            }
            Ok(p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum())
        })
        .collect()
}

/// Squared error summed over dimensions, averaged over items.
pub fn mse<P: AsRef<[f64]>, T: AsRef<[f64]>>(pred: &[P], truth: &[T]) -> Result<f64> {
    let e = squared_errors(pred, truth)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub dof: f64,
    /// P(T >= t) under the null.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// One-sided Welch test of `mean(test) > mean(train)`.
pub fn welch_t_one_sided(train: &[f64], test: &[f64]) -> Result<WelchResult> {
    if train.len() < 2 || test.len() < 2 {
        return Err(Error::invalid("Welch test needs at least two values per sample"));
    }
    let (m1, v1) = mean_var(train);
    let (m2, v2) = mean_var(test);
    let (s1, s2) = (v1 / train.len() as f64, v2 / test.len() as f64);
    let se2 = s1 + s2;
    if se2 <= 0.0 {
        return Err(Error::Undefined("both samples have zero variance".into()));
    }
    let t = (m2 - m1) / se2.sqrt();
    let dof = se2 * se2
        / (s1 * s1 / (train.len() as f64 - 1.0) + s2 * s2 / (test.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::numerical(e.to_string()))?;
    Ok(WelchResult {
        t,
        dof,
        p: dist.sf(t),
    })
}
