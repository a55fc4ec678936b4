//! The XOR random-access protocol run on shared boxes, single copy and
//! concatenated, with exact joint distributions and closed-form success
//! probabilities.
//!
//! Parties `1..N-1` are senders, party `N` the receiver. Sender `k` holds
//! bits `X_1^k … X_n^k`; the receiver picks `j` and must output
//! `f_j = ⊕_k X_j^k`.
//!
//! Single copy (`n = 2`): sender `k` feeds `x_k = X_1^k ⊕ X_2^k` into its
//! side of the box, gets `a_k`, and sends `M_k = X_1^k ⊕ a_k`. The receiver
//! inputs `x_N = j` and outputs `G = ⊕_k M_k ⊕ a_N` (using the channel
//! outputs `M_k'` instead when a channel is attached).
//!
//! Concatenation (`n = 2^K`) nests the same encoding over a binary tree of
//! `2^K - 1` identical boxes. Level 1 is the root (whose messages are sent),
//! level `K` holds the leaves fed by raw input pairs. The receiver's string
//! `z_1 … z_K` walks from the root to a leaf: `z_l = 0` descends into the
//! left subtree. The selected leaf bit is therefore
//! `j = Σ_l z_l 2^{K-l}` (0-based), with `z_1` the most significant bit.
//!
//! Variable names in the joint distributions produced here:
//! `X{k}.{i}` input bits (1-based), `x{k}` box inputs, `a{k}` box outcomes,
//! `M{k}` messages, `M{k}'` channel outputs, `J` the receiver's choice
//! (0-based) and `G` the guess.

use serde::{Deserialize, Serialize};

use crate::behavior::{parity, xor_target, Behavior};
use crate::entropy::{Channel, JointDistribution, Variable};
use crate::error::{Error, Result};

/// Deepest concatenation accepted by [`concat_success_simulated`].
pub const MAX_SIMULATED_DEPTH: usize = 3;
/// Largest party count accepted by [`concat_success_simulated`].
pub const MAX_SIMULATED_PARTIES: usize = 4;

pub fn input_var(sender: usize, bit: usize) -> String {
    format!("X{sender}.{bit}")
}

pub fn box_input_var(party: usize) -> String {
    format!("x{party}")
}

pub fn outcome_var(party: usize) -> String {
    format!("a{party}")
}

pub fn message_var(sender: usize) -> String {
    format!("M{sender}")
}

pub fn received_var(sender: usize) -> String {
    format!("M{sender}'")
}

pub const CHOICE_VAR: &str = "J";
pub const GUESS_VAR: &str = "G";

#[derive(Debug, Clone, PartialEq)]
pub enum InputDistribution {
    /// Every `X_i^k` independent and uniform.
    Uniform,
    /// Arbitrary distribution over exactly the variables `X{k}.{i}`.
    Custom(JointDistribution),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub parties: usize,
    pub bits_per_sender: usize,
    pub inputs: InputDistribution,
    /// `0` for the single-copy protocol, `K ≥ 1` for a depth-`K` tree.
    pub depth: usize,
    pub channel: Option<Channel>,
}

impl ProtocolConfig {
    pub fn single_copy(parties: usize) -> Self {
        Self {
            parties,
            bits_per_sender: 2,
            inputs: InputDistribution::Uniform,
            depth: 0,
            channel: None,
        }
    }

    pub fn concatenated(parties: usize, depth: usize) -> Self {
        Self {
            parties,
            bits_per_sender: 1 << depth.min(31),
            inputs: InputDistribution::Uniform,
            depth,
            channel: None,
        }
    }

    pub fn with_channel(mut self, channel: Channel) -> Self {
        self.channel = Some(channel);
        self
    }

    pub fn with_inputs(mut self, inputs: JointDistribution) -> Self {
        self.inputs = InputDistribution::Custom(inputs);
        self
    }

    pub fn senders(&self) -> usize {
        self.parties - 1
    }

    pub fn check(&self) -> Result<()> {
        if self.parties < crate::behavior::MIN_PARTIES || self.parties > crate::behavior::MAX_PARTIES
        {
            return Err(Error::Structure(format!(
                "party count {} out of range",
                self.parties
            )));
        }
        let expected = if self.depth == 0 { 2 } else { 1usize << self.depth };
        if self.bits_per_sender != expected {
            return Err(Error::Structure(format!(
                "depth {} requires {expected} bits per sender, got {}",
                self.depth, self.bits_per_sender
            )));
        }
        if let InputDistribution::Custom(d) = &self.inputs {
            let want = self.senders() * self.bits_per_sender;
            if d.variables().len() != want {
                return Err(Error::Structure(format!(
                    "input distribution has {} variables, expected {want}",
                    d.variables().len()
                )));
            }
            for k in 1..=self.senders() {
                for i in 1..=self.bits_per_sender {
                    let name = input_var(k, i);
                    if d.cardinality(&name)? != 2 {
                        return Err(Error::Cardinality {
                            name,
                            cardinality: d.cardinality(&input_var(k, i))?,
                            expected: 2,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Input assignments as sender bit-masks with probabilities:
/// `inputs[k-1]` bit `i-1` is `X_i^k`.
fn input_assignments(cfg: &ProtocolConfig) -> Result<Vec<(Vec<u32>, f64)>> {
    let s = cfg.senders();
    let n = cfg.bits_per_sender;
    match &cfg.inputs {
        InputDistribution::Uniform => {
            let total_bits = s * n;
            let weight = 1.0 / (1u64 << total_bits) as f64;
            Ok((0..1u64 << total_bits)
                .map(|code| {
                    let masks = (0..s)
                        .map(|k| ((code >> (k * n)) & ((1 << n) - 1)) as u32)
                        .collect();
                    (masks, weight)
                })
                .collect())
        }
        InputDistribution::Custom(d) => {
            let mut pos = Vec::with_capacity(s * n);
            for k in 1..=s {
                for i in 1..=n {
                    pos.push(d.index_of(&input_var(k, i))?);
                }
            }
            Ok(d
                .atoms()
                .iter()
                .map(|atom| {
                    let masks = (0..s)
                        .map(|k| {
                            (0..n).fold(0u32, |m, i| {
                                m | u32::from(atom.values[pos[k * n + i]]) << i
                            })
                        })
                        .collect();
                    (masks, atom.p)
                })
                .collect())
        }
    }
}

/// Exact joint distribution of every variable in the single-copy protocol.
pub fn single_copy_joint(b: &Behavior, cfg: &ProtocolConfig) -> Result<JointDistribution> {
    cfg.check()?;
    if cfg.depth != 0 {
        return Err(Error::Structure(
            "single_copy_joint needs depth 0; use concat_target_joint".into(),
        ));
    }
    if b.parties() != cfg.parties {
        return Err(Error::PartyMismatch {
            expected: cfg.parties,
            found: b.parties(),
        });
    }
    let report = b.validate();
    if !report.is_valid() {
        return Err(Error::Invalid(report));
    }

    let n_parties = cfg.parties;
    let s = cfg.senders();
    let mut variables = Vec::new();
    for k in 1..=s {
        for i in 1..=2 {
            variables.push(Variable::bit(input_var(k, i)));
        }
    }
    for k in 1..=n_parties {
        variables.push(Variable::bit(box_input_var(k)));
    }
    for k in 1..=n_parties {
        variables.push(Variable::bit(outcome_var(k)));
    }
    for k in 1..=s {
        variables.push(Variable::bit(message_var(k)));
    }
    if cfg.channel.is_some() {
        for k in 1..=s {
            variables.push(Variable::bit(received_var(k)));
        }
    }
    variables.push(Variable::new(CHOICE_VAR, 2));
    variables.push(Variable::bit(GUESS_VAR));

    // Flip patterns over the senders' messages and their probabilities.
    let flips: Vec<(u32, f64)> = match cfg.channel {
        None => vec![(0, 1.0)],
        Some(ch) => {
            let e = ch.flip_probability();
            (0..1u32 << s)
                .map(|f| {
                    let ones = f.count_ones() as i32;
                    (f, e.powi(ones) * (1.0 - e).powi(s as i32 - ones))
                })
                .filter(|(_, p)| *p > 0.0)
                .collect()
        }
    };

    let mut atoms = Vec::new();
    for (masks, p_in) in input_assignments(cfg)? {
        for j in 0..2u32 {
            let mut box_in = 0u32;
            for (k, m) in masks.iter().enumerate() {
                box_in |= ((m & 1) ^ ((m >> 1) & 1)) << k;
            }
            box_in |= j << s;
            for (a, &p_a) in b.row(box_in).iter().enumerate() {
                if p_a <= 0.0 {
                    continue;
                }
                let a = a as u32;
                let messages: u32 = masks
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (k, m)| acc | (((m & 1) ^ ((a >> k) & 1)) << k));
                for &(flip, p_f) in &flips {
                    let received = messages ^ flip;
                    let guess = parity(received) ^ ((a >> s) & 1);
                    let mut values = Vec::with_capacity(variables.len());
                    for m in &masks {
                        values.push((m & 1) as u16);
                        values.push(((m >> 1) & 1) as u16);
                    }
                    for k in 0..n_parties {
                        values.push(((box_in >> k) & 1) as u16);
                    }
                    for k in 0..n_parties {
                        values.push(((a >> k) & 1) as u16);
                    }
                    for k in 0..s {
                        values.push(((messages >> k) & 1) as u16);
                    }
                    if cfg.channel.is_some() {
                        for k in 0..s {
                            values.push(((received >> k) & 1) as u16);
                        }
                    }
                    values.push(j as u16);
                    values.push(guess as u16);
                    atoms.push((values, p_in * 0.5 * p_a * p_f));
                }
            }
        }
    }
    JointDistribution::new(variables, atoms)
}

/// Success probability for each receiver choice, `p(G = ⊕_k X_j^k | J = j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessProfile {
    pub per_choice: Vec<f64>,
}

/// Reads the success profile off a single-copy joint.
pub fn success_profile(joint: &JointDistribution) -> Result<SuccessProfile> {
    let choices = joint.cardinality(CHOICE_VAR)?;
    let mut senders = 0;
    while joint.has(&input_var(senders + 1, 1)) {
        senders += 1;
    }
    let mut per_choice = Vec::with_capacity(choices as usize);
    for j in 0..choices as u16 {
        let cond = joint.condition(CHOICE_VAR, j)?;
        let mut names: Vec<String> = (1..=senders)
            .map(|k| input_var(k, j as usize + 1))
            .collect();
        names.push(GUESS_VAR.to_string());
        let p = cond.event_probability(&names, |v| {
            let (g, xs) = v.split_last().expect("guess present");
            xs.iter().fold(0u16, |acc, b| acc ^ b) == *g
        })?;
        per_choice.push(p);
    }
    Ok(SuccessProfile { per_choice })
}

/// Biases `(E_I, E_II)` with `E = 2P - 1`, where `P_I` (`P_II`) is the
/// probability that `⊕ a_k = ⊕_{k<N} x_k x_N`, averaged over uniform sender
/// inputs at receiver input 0 (1).
pub fn biases(b: &Behavior) -> (f64, f64) {
    let n = b.parties();
    let s = n - 1;
    let senders = 1u32 << s;
    let mut p = [0.0f64; 2];
    for (z, acc) in p.iter_mut().enumerate() {
        for xs in 0..senders {
            let input = xs | (z as u32) << s;
            *acc += b.parity_prob(input, xor_target(n, input));
        }
        *acc /= f64::from(senders);
    }
    (2.0 * p[0] - 1.0, 2.0 * p[1] - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Probability of an even (odd) number of failures in `s` independent
/// trials that each succeed with probability `p`: `½(1 ± (2p-1)^s)`.
pub fn q_parity(s: u32, p: f64, parity: Parity) -> f64 {
    let bias = (2.0 * p - 1.0).powi(s as i32);
    match parity {
        Parity::Even => 0.5 * (1.0 + bias),
        Parity::Odd => 0.5 * (1.0 - bias),
    }
}

fn check_depth_weight(depth: usize, ones: usize) -> Result<()> {
    if depth == 0 {
        return Err(Error::OutOfRange {
            name: "K",
            value: 0.0,
        });
    }
    if ones > depth {
        return Err(Error::OutOfRange {
            name: "r",
            value: ones as f64,
        });
    }
    Ok(())
}

/// `½(1 + E_I^{K-r} E_II^r)`.
pub fn concat_success_closed(e_one: f64, e_two: f64, depth: usize, ones: usize) -> Result<f64> {
    check_depth_weight(depth, ones)?;
    Ok(0.5 * (1.0 + e_one.powi((depth - ones) as i32) * e_two.powi(ones as i32)))
}

/// The same success probability assembled from even/odd failure counts:
/// `Q_even^{K-r}(P_I) Q_even^r(P_II) + Q_odd^{K-r}(P_I) Q_odd^r(P_II)`.
pub fn concat_success_parity_form(p_one: f64, p_two: f64, depth: usize, ones: usize) -> Result<f64> {
    check_depth_weight(depth, ones)?;
    let zeros = (depth - ones) as u32;
    let ones = ones as u32;
    Ok(q_parity(zeros, p_one, Parity::Even) * q_parity(ones, p_two, Parity::Even)
        + q_parity(zeros, p_one, Parity::Odd) * q_parity(ones, p_two, Parity::Odd))
}

/// 0-based index of the leaf bit selected by the receiver string `z`.
pub fn leaf_index(z: &[u8]) -> usize {
    z.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b & 1))
}

/// Parses a string of `0`/`1` characters.
pub fn parse_bits(text: &str) -> Result<Vec<u8>> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::Structure(format!("`{text}` is not a bit string"))),
        })
        .collect()
}

/// Message distribution leaving the root of an off-path subtree, indexed by
/// the senders' message mask. Subtrees at the same level are identical.
struct TreeSimulator<'a> {
    behavior: &'a Behavior,
    senders: usize,
    /// `sender_marginals[x]` = distribution of sender outcome masks at
    /// sender input mask `x`.
    sender_marginals: Vec<Vec<f64>>,
}

impl<'a> TreeSimulator<'a> {
    fn new(behavior: &'a Behavior) -> Self {
        let senders = behavior.parties() - 1;
        let sender_marginals = (0..1u32 << senders)
            .map(|x| behavior.sender_marginal(x))
            .collect();
        Self {
            behavior,
            senders,
            sender_marginals,
        }
    }

    fn smask(&self) -> u32 {
        (1 << self.senders) - 1
    }

    /// Distribution of the message mask sent from a subtree whose root box
    /// sits `height` levels above the leaves (`height = 0` is a leaf box).
    fn off_path(&self, height: usize) -> Vec<f64> {
        let width = 1usize << self.senders;
        let children: Vec<f64> = if height == 0 {
            vec![1.0 / width as f64; width]
        } else {
            self.off_path(height - 1)
        };
        let mut out = vec![0.0; width];
        for (left, &wl) in children.iter().enumerate() {
            for (right, &wr) in children.iter().enumerate() {
                let w = wl * wr;
                if w == 0.0 {
                    continue;
                }
                let x = (left ^ right) as u32;
                for (a, &pa) in self.sender_marginals[x as usize].iter().enumerate() {
                    if pa > 0.0 {
                        out[left ^ a] += w * pa;
                    }
                }
            }
        }
        out
    }

    /// Walks the receiver's path. Returns the joint distribution over
    /// `(root message mask, target bit mask, receiver outcome parity)`
    /// packed as `m | t << S | s << 2S`.
    fn on_path(&self, z: &[u8]) -> Vec<f64> {
        let s = self.senders;
        let smask = self.smask();
        let width = 1usize << s;
        let states = 1usize << (2 * s + 1);
        let depth = z.len();
        let leaf_z = u32::from(z[depth - 1]);

        // Leaf box on the path: the two children are raw input pairs.
        let mut state = vec![0.0; states];
        let w_in = 1.0 / (width * width) as f64;
        for left in 0..width as u32 {
            for right in 0..width as u32 {
                let target = if leaf_z == 0 { left } else { right };
                let input = (left ^ right) | leaf_z << s;
                for (a, &pa) in self.behavior.row(input).iter().enumerate() {
                    if pa <= 0.0 {
                        continue;
                    }
                    let a = a as u32;
                    let m = left ^ (a & smask);
                    let c = a >> s;
                    state[(m | target << s | c << (2 * s)) as usize] += w_in * pa;
                }
            }
        }

        // Internal path boxes, leaf-side first.
        for level in (0..depth - 1).rev() {
            let zl = u32::from(z[level]);
            let height = depth - 1 - level;
            let sibling = self.off_path(height - 1);
            let mut next = vec![0.0; states];
            for (code, &w_on) in state.iter().enumerate() {
                if w_on == 0.0 {
                    continue;
                }
                let code = code as u32;
                let m_on = code & smask;
                let rest = code >> s;
                for (m_off, &w_off) in sibling.iter().enumerate() {
                    let w = w_on * w_off;
                    if w == 0.0 {
                        continue;
                    }
                    let m_off = m_off as u32;
                    let (left, right) = if zl == 0 { (m_on, m_off) } else { (m_off, m_on) };
                    let input = (left ^ right) | zl << s;
                    for (a, &pa) in self.behavior.row(input).iter().enumerate() {
                        if pa <= 0.0 {
                            continue;
                        }
                        let a = a as u32;
                        let m = left ^ (a & smask);
                        let new_rest = rest ^ ((a >> s) << s);
                        next[(m | new_rest << s) as usize] += w * pa;
                    }
                }
            }
            state = next;
        }
        state
    }
}

fn check_simulation(b: &Behavior, depth: usize, z: &[u8]) -> Result<()> {
    if depth == 0 {
        return Err(Error::OutOfRange {
            name: "K",
            value: 0.0,
        });
    }
    if depth > MAX_SIMULATED_DEPTH {
        return Err(Error::EnumerationCap(format!(
            "depth {depth} exceeds {MAX_SIMULATED_DEPTH}"
        )));
    }
    if b.parties() > MAX_SIMULATED_PARTIES {
        return Err(Error::EnumerationCap(format!(
            "{} parties exceeds {MAX_SIMULATED_PARTIES}",
            b.parties()
        )));
    }
    if z.len() != depth || z.iter().any(|v| *v > 1) {
        return Err(Error::Structure(format!(
            "receiver string must be {depth} bits"
        )));
    }
    let report = b.validate();
    if !report.is_valid() {
        return Err(Error::Invalid(report));
    }
    Ok(())
}

/// Exact joint of the selected leaf bits `X{k}.{j}` (one per sender) and the
/// guess `G`, for the concatenated protocol with receiver string `z`.
///
/// The computation propagates exact distributions bottom-up through the box
/// tree. Subtrees off the receiver's path are independent of the targets, so
/// only their message distributions are carried.
pub fn concat_target_joint(b: &Behavior, depth: usize, z: &[u8]) -> Result<JointDistribution> {
    check_simulation(b, depth, z)?;
    let sim = TreeSimulator::new(b);
    let s = sim.senders;
    let j = leaf_index(z) + 1;
    let state = sim.on_path(z);

    let mut variables: Vec<Variable> = (1..=s).map(|k| Variable::bit(input_var(k, j))).collect();
    variables.push(Variable::bit(GUESS_VAR));
    let smask = sim.smask();
    let atoms = state.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(code, &p)| {
        let code = code as u32;
        let m = code & smask;
        let t = (code >> s) & smask;
        let c = code >> (2 * s);
        let guess = parity(m) ^ c;
        let mut values: Vec<u16> = (0..s).map(|k| ((t >> k) & 1) as u16).collect();
        values.push(guess as u16);
        (values, p)
    });
    JointDistribution::new(variables, atoms)
}

/// Exact success probability of the depth-`K` concatenated protocol for
/// receiver string `z`, averaged over uniform sender inputs.
pub fn concat_success_simulated(b: &Behavior, depth: usize, z: &[u8]) -> Result<f64> {
    let joint = concat_target_joint(b, depth, z)?;
    let names: Vec<&str> = joint.variables().iter().map(|v| v.name.as_str()).collect();
    joint.event_probability(&names, |v| {
        let (g, xs) = v.split_last().expect("guess present");
        xs.iter().fold(0u16, |acc, b| acc ^ b) == *g
    })
}

/// Success for every receiver string of length `depth`, in leaf order.
pub fn concat_success_profile(b: &Behavior, depth: usize) -> Result<SuccessProfile> {
    let per_choice = all_strings(depth)
        .iter()
        .map(|z| concat_success_simulated(b, depth, z))
        .collect::<Result<_>>()?;
    Ok(SuccessProfile { per_choice })
}

/// All bit strings of length `len`, ordered by [`leaf_index`].
pub fn all_strings(len: usize) -> Vec<Vec<u8>> {
    (0..1usize << len)
        .map(|code| (0..len).map(|l| ((code >> (len - 1 - l)) & 1) as u8).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u32, k: u32) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
    }

    fn q_binomial(s: u32, p: f64, parity: Parity) -> f64 {
        (0..=s)
            .filter(|k| (k % 2 == 0) == (parity == Parity::Even))
            .map(|k| binom(s, k) * (1.0 - p).powi(k as i32) * p.powi((s - k) as i32))
            .sum()
    }

    #[test]
    fn q_parity_matches_binomial_sums() {
        assert_eq!(q_parity(0, 0.3, Parity::Even), 1.0);
        assert_eq!(q_parity(0, 0.3, Parity::Odd), 0.0);
        assert!((q_parity(2, 0.75, Parity::Even) - 0.625).abs() < 1e-15);
        assert!((q_binomial(2, 0.75, Parity::Even) - 0.625).abs() < 1e-15);
        for p in [0.0, 0.1, 0.5, 0.77, 1.0] {
            assert!((q_parity(1, p, Parity::Odd) - (1.0 - p)).abs() < 1e-15);
            for s in 0..9 {
                let even = q_parity(s, p, Parity::Even);
                let odd = q_parity(s, p, Parity::Odd);
                assert!((even + odd - 1.0).abs() < 1e-15);
                assert!((even - q_binomial(s, p, Parity::Even)).abs() < 1e-12);
                assert!((odd - q_binomial(s, p, Parity::Odd)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_values() {
        for k in 1..5 {
            for r in 0..=k {
                assert_eq!(concat_success_closed(1.0, 1.0, k, r).unwrap(), 1.0);
                assert_eq!(concat_success_closed(0.0, 0.0, k, r).unwrap(), 0.5);
            }
        }
        let v = concat_success_closed(0.9, 0.7, 2, 1).unwrap();
        assert!((v - 0.815).abs() < 1e-12);
        let q = concat_success_parity_form(0.95, 0.85, 2, 1).unwrap();
        assert!((q - v).abs() < 1e-12);
        assert!(concat_success_closed(0.9, 0.7, 2, 3).is_err());
        assert!(concat_success_closed(0.9, 0.7, 0, 0).is_err());
    }

    #[test]
    fn bias_examples() {
        assert_eq!(biases(&Behavior::box45(3).unwrap()), (1.0, 1.0));
        let (e1, e2) = biases(&Behavior::white(3).unwrap());
        assert!(e1.abs() < 1e-15 && e2.abs() < 1e-15);
        let (e1, e2) = biases(&Behavior::isotropic(0.6, 3).unwrap());
        assert!((e1 - 0.6).abs() < 1e-12 && (e2 - 0.6).abs() < 1e-12);
        // Bipartite PR: P_I = P_II = 1.
        assert_eq!(biases(&Behavior::pr_box()), (1.0, 1.0));
    }

    #[test]
    fn leaf_indexing() {
        assert_eq!(leaf_index(&[0, 1]), 1);
        assert_eq!(leaf_index(&[1, 0]), 2);
        assert_eq!(all_strings(2), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(parse_bits("011").unwrap(), vec![0, 1, 1]);
        assert!(parse_bits("0a").is_err());
    }

    #[test]
    fn single_copy_box45_is_perfect() {
        let b = Behavior::box45(3).unwrap();
        let joint = single_copy_joint(&b, &ProtocolConfig::single_copy(3)).unwrap();
        let profile = success_profile(&joint).unwrap();
        assert_eq!(profile.per_choice.len(), 2);
        for p in profile.per_choice {
            assert!((p - 1.0).abs() < 1e-15);
        }
        let h = joint.entropy(&["M1", "M2"]).unwrap();
        assert!((h - 2.0).abs() < 1e-12);
        // The marginal on the messages is uniform on two bits.
        let m = joint.marginal(&["M1", "M2"]).unwrap();
        assert_eq!(m.atoms().len(), 4);
        assert!(m.atoms().iter().all(|a| (a.p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn single_copy_white_is_blind() {
        let joint =
            single_copy_joint(&Behavior::white(3).unwrap(), &ProtocolConfig::single_copy(3)).unwrap();
        for p in success_profile(&joint).unwrap().per_choice {
            assert!((p - 0.5).abs() < 1e-15);
        }
        let mi = joint
            .mutual_information(&["X1.1", "X1.2", "X2.1", "X2.2"], &["G"])
            .unwrap();
        assert!(mi.abs() < 1e-12);
    }

    #[test]
    fn single_copy_profile_matches_biases() {
        let slice = crate::behavior::mix(&[
            (0.5, &Behavior::box45(3).unwrap()),
            (0.2, &Behavior::deterministic_zero(3).unwrap()),
            (0.3, &Behavior::white(3).unwrap()),
        ])
        .unwrap();
        for b in [slice, Behavior::isotropic(0.4, 3).unwrap(), Behavior::isotropic(0.8, 2).unwrap()] {
            let joint = single_copy_joint(&b, &ProtocolConfig::single_copy(b.parties())).unwrap();
            let prof = success_profile(&joint).unwrap();
            let (e1, e2) = biases(&b);
            assert!((prof.per_choice[0] - 0.5 * (1.0 + e1)).abs() < 1e-12);
            assert!((prof.per_choice[1] - 0.5 * (1.0 + e2)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_copy_errors() {
        let b = Behavior::box45(3).unwrap();
        assert!(matches!(
            single_copy_joint(&b, &ProtocolConfig::single_copy(4)),
            Err(Error::PartyMismatch { .. })
        ));
        let mut bad = ProtocolConfig::single_copy(3);
        bad.bits_per_sender = 3;
        assert!(single_copy_joint(&b, &bad).is_err());
        let mut table = b.table().to_vec();
        table[0] += 0.2;
        let invalid = Behavior::from_table(3, table).unwrap();
        assert!(matches!(
            single_copy_joint(&invalid, &ProtocolConfig::single_copy(3)),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn channel_variables_present() {
        let cfg = ProtocolConfig::single_copy(3).with_channel(Channel::bsc(0.1).unwrap());
        let joint = single_copy_joint(&Behavior::box45(3).unwrap(), &cfg).unwrap();
        assert!(joint.has("M1'") && joint.has("M2'"));
        let prof = success_profile(&joint).unwrap();
        // Guess fails iff exactly one message flips.
        let want = 0.9 * 0.9 + 0.1 * 0.1;
        assert!((prof.per_choice[0] - want).abs() < 1e-12);
    }

    #[test]
    fn concat_trivial_cases() {
        let b45 = Behavior::box45(3).unwrap();
        let white = Behavior::white(3).unwrap();
        for z in all_strings(2) {
            assert!((concat_success_simulated(&b45, 2, &z).unwrap() - 1.0).abs() < 1e-12);
            assert!((concat_success_simulated(&white, 2, &z).unwrap() - 0.5).abs() < 1e-12);
        }
        let iso = Behavior::isotropic(0.7, 3).unwrap();
        let v = concat_success_simulated(&iso, 2, &[0, 1]).unwrap();
        assert!((v - 0.745).abs() < 1e-12, "{v}");
    }

    #[test]
    fn concat_depth_one_is_single_copy() {
        let b = crate::behavior::mix(&[
            (0.6, &Behavior::box45(3).unwrap()),
            (0.3, &Behavior::deterministic_zero(3).unwrap()),
            (0.1, &Behavior::white(3).unwrap()),
        ])
        .unwrap();
        let single = success_profile(
            &single_copy_joint(&b, &ProtocolConfig::single_copy(3)).unwrap(),
        )
        .unwrap();
        let concat = concat_success_profile(&b, 1).unwrap();
        for (a, c) in single.per_choice.iter().zip(&concat.per_choice) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn concat_caps() {
        let b = Behavior::box45(3).unwrap();
        assert!(matches!(
            concat_success_simulated(&b, 4, &[0, 0, 0, 0]),
            Err(Error::EnumerationCap(_))
        ));
        assert!(matches!(
            concat_success_simulated(&Behavior::box45(5).unwrap(), 1, &[0]),
            Err(Error::EnumerationCap(_))
        ));
        assert!(concat_success_simulated(&b, 2, &[0]).is_err());
    }
}
