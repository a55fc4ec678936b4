//! Exact probability mass functions over named discrete variables, and the
//! Shannon quantities computed from them. All logarithms are base 2.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack below zero that information quantities are clamped from.
pub const INFO_SLACK: f64 = 1e-12;

/// Normalization tolerance for distributions.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: u32,
}

impl Variable {
    pub fn new(name: impl Into<String>, cardinality: u32) -> Self {
        Self {
            name: name.into(),
            cardinality,
        }
    }

    pub fn bit(name: impl Into<String>) -> Self {
        Self::new(name, 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "v")]
    pub values: Vec<u16>,
    pub p: f64,
}

/// Support-only representation: atoms are unique, sorted by value tuple,
/// and carry strictly positive probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    variables: Vec<Variable>,
    atoms: Vec<Atom>,
}

fn h_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// `h(p) = -p log₂ p - (1-p) log₂(1-p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
        });
    }
    Ok(h2(p))
}

/// Binary entropy without the range check; callers guarantee `p ∈ [0,1]`.
pub(crate) fn h2(p: f64) -> f64 {
    h_term(p) + h_term(1.0 - p)
}

fn clamp_info(v: f64) -> f64 {
    if v < 0.0 && v > -INFO_SLACK {
        0.0
    } else {
        v
    }
}

impl JointDistribution {
    /// Builds a distribution from (value tuple, probability) pairs. Repeated
    /// tuples are summed and zero-probability atoms dropped.
    pub fn new(
        variables: Vec<Variable>,
        atoms: impl IntoIterator<Item = (Vec<u16>, f64)>,
    ) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for v in &variables {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
            if v.cardinality == 0 || v.cardinality > u32::from(u16::MAX) {
                return Err(Error::Cardinality {
                    name: v.name.clone(),
                    cardinality: v.cardinality,
                    expected: 2,
                });
            }
        }
        let mut acc: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
        for (values, p) in atoms {
            if values.len() != variables.len() {
                return Err(Error::Structure(format!(
                    "atom has {} values for {} variables",
                    values.len(),
                    variables.len()
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::OutOfRange {
                    name: "probability",
                    value: p,
                });
            }
            for (val, var) in values.iter().zip(&variables) {
                if u32::from(*val) >= var.cardinality {
                    return Err(Error::Structure(format!(
                        "value {val} out of range for `{}`",
                        var.name
                    )));
                }
            }
            *acc.entry(values).or_insert(0.0) += p;
        }
        let atoms: Vec<Atom> = acc
            .into_iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(values, p)| Atom { values, p })
            .collect();
        let total: f64 = atoms.iter().map(|a| a.p).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::NotNormalized(total));
        }
        Ok(Self { variables, atoms })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn has(&self, name: &str) -> bool {
        self.variables.iter().any(|v| v.name == name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn cardinality(&self, name: &str) -> Result<u32> {
        Ok(self.variables[self.index_of(name)?].cardinality)
    }

    fn positions<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let i = self.index_of(n.as_ref())?;
            if out.contains(&i) {
                return Err(Error::DuplicateVariable(n.as_ref().to_string()));
            }
            out.push(i);
        }
        Ok(out)
    }

    /// Probability mass of the projection onto `positions`, keyed by the
    /// mixed-radix packing of the projected values.
    fn projected(&self, positions: &[usize]) -> Result<BTreeMap<u64, f64>> {
        let mut radix = Vec::with_capacity(positions.len());
        let mut span: u64 = 1;
        for &i in positions {
            radix.push(span);
            span = span
                .checked_mul(u64::from(self.variables[i].cardinality))
                .ok_or_else(|| Error::Structure("projection too wide to index".into()))?;
        }
        let mut acc = BTreeMap::new();
        for atom in &self.atoms {
            let key = positions
                .iter()
                .zip(&radix)
                .map(|(&i, r)| u64::from(atom.values[i]) * r)
                .sum::<u64>();
            *acc.entry(key).or_insert(0.0) += atom.p;
        }
        Ok(acc)
    }

    /// Sums out every variable not in `names`; the result keeps the order of
    /// `names`.
    pub fn marginal<S: AsRef<str>>(&self, names: &[S]) -> Result<JointDistribution> {
        let pos = self.positions(names)?;
        let mut acc: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
        for atom in &self.atoms {
            let key: Vec<u16> = pos.iter().map(|&i| atom.values[i]).collect();
            *acc.entry(key).or_insert(0.0) += atom.p;
        }
        let variables = pos.iter().map(|&i| self.variables[i].clone()).collect();
        let total: f64 = acc.values().sum();
        Ok(JointDistribution {
            variables,
            atoms: acc
                .into_iter()
                .map(|(values, p)| Atom {
                    values,
                    p: p / total,
                })
                .collect(),
        })
    }

    /// Joint Shannon entropy of `names`, in bits. The empty set has entropy 0.
    pub fn entropy<S: AsRef<str>>(&self, names: &[S]) -> Result<f64> {
        let pos = self.positions(names)?;
        if pos.is_empty() {
            return Ok(0.0);
        }
        Ok(self.projected(&pos)?.values().map(|&p| h_term(p)).sum())
    }

    fn check_disjoint<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<()> {
        for x in a {
            if b.iter().any(|y| y.as_ref() == x.as_ref()) {
                return Err(Error::OverlappingSets(x.as_ref().to_string()));
            }
        }
        Ok(())
    }

    /// `I(A:B) = H(A) + H(B) - H(A,B)`.
    pub fn mutual_information<S: AsRef<str>>(&self, a: &[S], b: &[S]) -> Result<f64> {
        self.conditional_mutual_information::<S>(a, b, &[])
    }

    /// `I(A:B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C)`.
    pub fn conditional_mutual_information<S: AsRef<str>>(
        &self,
        a: &[S],
        b: &[S],
        c: &[S],
    ) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySet);
        }
        Self::check_disjoint(a, b)?;
        Self::check_disjoint(a, c)?;
        Self::check_disjoint(b, c)?;
        let ac: Vec<&str> = a.iter().chain(c).map(AsRef::as_ref).collect();
        let bc: Vec<&str> = b.iter().chain(c).map(AsRef::as_ref).collect();
        let abc: Vec<&str> = a.iter().chain(b).chain(c).map(AsRef::as_ref).collect();
        let cc: Vec<&str> = c.iter().map(AsRef::as_ref).collect();
        let v = self.entropy(&ac)? + self.entropy(&bc)? - self.entropy(&abc)? - self.entropy(&cc)?;
        Ok(clamp_info(v))
    }

    /// Distribution conditioned on `name == value`, renormalized.
    pub fn condition(&self, name: &str, value: u16) -> Result<JointDistribution> {
        let i = self.index_of(name)?;
        let kept: Vec<&Atom> = self.atoms.iter().filter(|a| a.values[i] == value).collect();
        let mass: f64 = kept.iter().map(|a| a.p).sum();
        if mass <= 0.0 {
            return Err(Error::ZeroProbabilityEvent(format!("{name}={value}")));
        }
        Ok(JointDistribution {
            variables: self.variables.clone(),
            atoms: kept
                .into_iter()
                .map(|a| Atom {
                    values: a.values.clone(),
                    p: a.p / mass,
                })
                .collect(),
        })
    }

    /// Probability that `pred` holds on the values of `names`.
    pub fn event_probability<S: AsRef<str>>(
        &self,
        names: &[S],
        pred: impl Fn(&[u16]) -> bool,
    ) -> Result<f64> {
        let pos = self.positions(names)?;
        let mut buf = vec![0u16; pos.len()];
        let mut total = 0.0;
        for atom in &self.atoms {
            for (b, &i) in buf.iter_mut().zip(&pos) {
                *b = atom.values[i];
            }
            if pred(&buf) {
                total += atom.p;
            }
        }
        Ok(total)
    }

    /// Appends `new_name`, produced from `source` through the stochastic
    /// matrix `kernel[src][dst]` (rows must sum to 1).
    pub fn post_process(
        &self,
        source: &str,
        new_name: impl Into<String>,
        kernel: &[Vec<f64>],
    ) -> Result<JointDistribution> {
        let new_name = new_name.into();
        let i = self.index_of(source)?;
        if self.has(&new_name) {
            return Err(Error::DuplicateVariable(new_name));
        }
        let card = self.variables[i].cardinality as usize;
        if kernel.len() != card {
            return Err(Error::Cardinality {
                name: source.to_string(),
                cardinality: card as u32,
                expected: kernel.len() as u32,
            });
        }
        let out_card = kernel.first().map_or(0, Vec::len);
        for row in kernel {
            let s: f64 = row.iter().sum();
            if row.len() != out_card || (s - 1.0).abs() > MASS_TOL || row.iter().any(|p| *p < 0.0) {
                return Err(Error::Structure("kernel rows must be distributions".into()));
            }
        }
        let mut variables = self.variables.clone();
        variables.push(Variable::new(new_name, out_card as u32));
        let mut atoms = Vec::with_capacity(self.atoms.len() * out_card);
        for atom in &self.atoms {
            let row = &kernel[atom.values[i] as usize];
            for (dst, &q) in row.iter().enumerate() {
                if q > 0.0 {
                    let mut values = atom.values.clone();
                    values.push(dst as u16);
                    atoms.push((values, atom.p * q));
                }
            }
        }
        JointDistribution::new(variables, atoms)
    }

    /// Extends the distribution with the output of `channel` fed by the
    /// binary variable `source`.
    pub fn apply_channel(
        &self,
        source: &str,
        channel: &Channel,
        new_name: impl Into<String>,
    ) -> Result<JointDistribution> {
        let card = self.cardinality(source)?;
        if card != 2 {
            return Err(Error::Cardinality {
                name: source.to_string(),
                cardinality: card,
                expected: 2,
            });
        }
        self.post_process(source, new_name, &channel.kernel())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Memoryless binary symmetric channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "bsc")]
pub struct Channel {
    flip_probability: f64,
}

impl Channel {
    pub fn bsc(flip_probability: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&flip_probability) {
            return Err(Error::OutOfRange {
                name: "epsilon_channel",
                value: flip_probability,
            });
        }
        Ok(Self { flip_probability })
    }

    pub fn flip_probability(&self) -> f64 {
        self.flip_probability
    }

    /// `1 - h(ε)`.
    pub fn capacity(&self) -> f64 {
        1.0 - h2(self.flip_probability)
    }

    fn kernel(&self) -> Vec<Vec<f64>> {
        let e = self.flip_probability;
        vec![vec![1.0 - e, e], vec![e, 1.0 - e]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_pair() -> JointDistribution {
        JointDistribution::new(
            vec![Variable::bit("A"), Variable::bit("B")],
            (0..4u16).map(|v| (vec![v & 1, v >> 1], 0.25)),
        )
        .unwrap()
    }

    #[test]
    fn marginal_of_independent_uniform() {
        let d = uniform_pair();
        let a = d.marginal(&["A"]).unwrap();
        assert_eq!(a.atoms().len(), 2);
        assert!(a.atoms().iter().all(|x| (x.p - 0.5).abs() < 1e-15));
        assert_eq!(d.marginal(&["A", "B"]).unwrap(), d);
        assert!(matches!(d.marginal(&["Z"]), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn entropies_of_uniform_pair() {
        let d = uniform_pair();
        assert!((d.entropy(&["A", "B"]).unwrap() - 2.0).abs() < 1e-15);
        assert!(d.mutual_information(&["A"], &["B"]).unwrap().abs() < 1e-15);
        assert!(matches!(
            d.mutual_information(&["A"], &["A"]),
            Err(Error::OverlappingSets(_))
        ));
        let empty: [&str; 0] = [];
        assert!(matches!(
            d.mutual_information(&empty, &["A"]),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.3).unwrap() - binary_entropy(0.7).unwrap()).abs() < 1e-15);
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());

        // 1 - h((1+y)/2) against y²/(2 ln 2) at y = 0.3, evaluated independently.
        let y: f64 = 0.3;
        let p = (1.0 + y) / 2.0;
        let lhs = 1.0 + p * p.log2() + (1.0 - p) * (1.0 - p).log2();
        let rhs = y * y / (2.0 * std::f64::consts::LN_2);
        assert!((lhs - 0.065_9).abs() < 1e-4, "{lhs}");
        assert!((rhs - 0.064_9).abs() < 1e-4, "{rhs}");
        assert!((1.0 - binary_entropy(p).unwrap() - lhs).abs() < 1e-15);
        assert!(lhs >= rhs);
    }

    #[test]
    fn channel_capacity() {
        assert_eq!(Channel::bsc(0.0).unwrap().capacity(), 1.0);
        assert_eq!(Channel::bsc(0.5).unwrap().capacity(), 0.0);
        let c = Channel::bsc(0.11).unwrap().capacity();
        let direct = 1.0 + 0.11f64 * 0.11f64.log2() + 0.89f64 * 0.89f64.log2();
        assert!((c - direct).abs() < 1e-15);
        assert!((c - 0.500084).abs() < 1e-6);
        assert!(Channel::bsc(0.6).is_err());
    }

    #[test]
    fn noiseless_channel_duplicates() {
        let d = uniform_pair();
        let out = d.apply_channel("A", &Channel::bsc(0.0).unwrap(), "A'").unwrap();
        assert_eq!(out.atoms().len(), 4);
        assert!(out.atoms().iter().all(|a| a.values[0] == a.values[2]));
        let mi = out.mutual_information(&["A"], &["A'"]).unwrap();
        assert!((mi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn channel_rejects_non_binary() {
        let d = JointDistribution::new(
            vec![Variable::new("T", 3)],
            (0..3u16).map(|v| (vec![v], 1.0 / 3.0)),
        )
        .unwrap();
        assert!(matches!(
            d.apply_channel("T", &Channel::bsc(0.1).unwrap(), "T'"),
            Err(Error::Cardinality { .. })
        ));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            JointDistribution::new(vec![Variable::bit("A"), Variable::bit("A")], []),
            Err(Error::DuplicateVariable(_))
        ));
        assert!(matches!(
            JointDistribution::new(vec![Variable::bit("A")], [(vec![0], 0.4)]),
            Err(Error::NotNormalized(_))
        ));
        assert!(JointDistribution::new(vec![Variable::bit("A")], [(vec![2], 1.0)]).is_err());
    }

    #[test]
    fn conditioning() {
        let d = JointDistribution::new(
            vec![Variable::bit("A"), Variable::bit("B")],
            [(vec![0, 0], 0.5), (vec![1, 1], 0.5)],
        )
        .unwrap();
        let c = d.condition("A", 1).unwrap();
        assert_eq!(c.atoms().len(), 1);
        assert_eq!(c.atoms()[0].p, 1.0);
        let z = JointDistribution::new(vec![Variable::bit("A")], [(vec![0], 1.0)]).unwrap();
        assert!(matches!(
            z.condition("A", 1),
            Err(Error::ZeroProbabilityEvent(_))
        ));
    }
}
