//! Informational and quadratic criteria evaluated on behaviors or on
//! protocol joints. Every evaluator returns a [`CriterionReport`] with
//! `margin = lhs - rhs`; a criterion is violated when the margin exceeds
//! [`VIOLATION_TOL`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::{permutations, Behavior};
use crate::entropy::{h2, Channel, JointDistribution};
use crate::error::{Error, Result};
use crate::protocol::{
    self, all_strings, biases, input_var, leaf_index, message_var, received_var,
    ProtocolConfig, CHOICE_VAR, GUESS_VAR,
};

pub const VIOLATION_TOL: f64 = 1e-9;

/// Flag attached to noisy reports at `ε = ½`, where both sides vanish.
pub const INDETERMINATE_LIMIT: &str = "indeterminate-limit";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CriterionId {
    IcBipartite,
    IcBipartiteStrong,
    IcMulti,
    IcMulticopy,
    IcSuccessBound,
    Uffink2,
    Uffink3,
    IcNoisy,
}

impl CriterionId {
    pub const ALL: [CriterionId; 8] = [
        CriterionId::IcBipartite,
        CriterionId::IcBipartiteStrong,
        CriterionId::IcMulti,
        CriterionId::IcMulticopy,
        CriterionId::IcSuccessBound,
        CriterionId::Uffink2,
        CriterionId::Uffink3,
        CriterionId::IcNoisy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionId::IcBipartite => "ic-bipartite",
            CriterionId::IcBipartiteStrong => "ic-bipartite-strong",
            CriterionId::IcMulti => "ic-multi",
            CriterionId::IcMulticopy => "ic-multicopy",
            CriterionId::IcSuccessBound => "ic-success-bound",
            CriterionId::Uffink2 => "uffink-2",
            CriterionId::Uffink3 => "uffink-3",
            CriterionId::IcNoisy => "ic-noisy",
        }
    }

    /// Whether the criterion is defined for `parties` parties.
    pub fn supports(self, parties: usize) -> bool {
        match self {
            CriterionId::IcBipartite | CriterionId::IcBipartiteStrong | CriterionId::Uffink2 => {
                parties == 2
            }
            CriterionId::Uffink3 => parties == 3,
            _ => true,
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CriterionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CriterionId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownCriterion(s.to_string()))
    }
}

impl TryFrom<String> for CriterionId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CriterionId> for String {
    fn from(c: CriterionId) -> String {
        c.as_str().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: CriterionId,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub violated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
    /// Analytic lower bound on `lhs`, for `ic-success-bound`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl CriterionReport {
    pub fn new(criterion: CriterionId, lhs: f64, rhs: f64) -> Self {
        let margin = lhs - rhs;
        Self {
            criterion,
            lhs,
            rhs,
            margin,
            violated: margin > VIOLATION_TOL,
            flag: None,
            bound: None,
        }
    }
}

/// Parameters that only some criteria use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Concatenation depth `K` for `ic-success-bound`.
    pub depth: usize,
    /// Flip probability of the binary symmetric channel for `ic-noisy`.
    pub epsilon_channel: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            depth: 1,
            epsilon_channel: 0.0,
        }
    }
}

struct Layout {
    senders: usize,
    bits: usize,
}

fn layout(joint: &JointDistribution) -> Result<Layout> {
    let mut senders = 0;
    while joint.has(&message_var(senders + 1)) {
        senders += 1;
    }
    if senders == 0 {
        return Err(Error::UnknownVariable(message_var(1)));
    }
    let bits = joint.cardinality(CHOICE_VAR)? as usize;
    joint.index_of(GUESS_VAR)?;
    for k in 1..=senders {
        for i in 1..=bits {
            joint.index_of(&input_var(k, i))?;
        }
    }
    Ok(Layout { senders, bits })
}

fn choice_slices(joint: &JointDistribution, bits: usize) -> Result<Vec<JointDistribution>> {
    (0..bits as u16).map(|j| joint.condition(CHOICE_VAR, j)).collect()
}

/// `Σ_k Σ_i I(X_i^k : X_i^{others}, G_i)` with `G_i` read at `J = i-1`.
fn multi_lhs(slices: &[JointDistribution], senders: usize) -> Result<f64> {
    let mut total = 0.0;
    for (j, slice) in slices.iter().enumerate() {
        let i = j + 1;
        for k in 1..=senders {
            let mut rest: Vec<String> = (1..=senders)
                .filter(|&o| o != k)
                .map(|o| input_var(o, i))
                .collect();
            rest.push(GUESS_VAR.to_string());
            total += slice.mutual_information(&[input_var(k, i)], &rest)?;
        }
    }
    Ok(total)
}

/// `Σ_k Σ_i I(X_{i+1}^k … X_n^k : X_i^k)`; zero for independent inputs.
fn input_correlation(joint: &JointDistribution, senders: usize, bits: usize) -> Result<f64> {
    let mut total = 0.0;
    for k in 1..=senders {
        for i in 1..bits {
            let later: Vec<String> = (i + 1..=bits).map(|l| input_var(k, l)).collect();
            total += joint.mutual_information(&later, &[input_var(k, i)])?;
        }
    }
    Ok(total)
}

fn messages(senders: usize) -> Vec<String> {
    (1..=senders).map(message_var).collect()
}

/// `Σ_i I(X_i : G_i)` against `H(M)` on a two-party protocol joint.
pub fn eval_bipartite_ic(joint: &JointDistribution) -> Result<CriterionReport> {
    let l = layout(joint)?;
    if l.senders != 1 {
        return Err(Error::Unsupported {
            criterion: "ic-bipartite",
            reason: format!("needs one sender, joint has {}", l.senders),
        });
    }
    let slices = choice_slices(joint, l.bits)?;
    let lhs = multi_lhs(&slices, 1)?;
    let rhs = joint.entropy(&messages(1))?;
    Ok(CriterionReport::new(CriterionId::IcBipartite, lhs, rhs))
}

/// Strengthened bipartite criterion.
///
/// `Σ_i I(X_i : G_i, M) + Σ_{i≥2} I(X_1 : X_i | G_i, M)` against
/// `H(M) + Σ_i H(X_i) - H(X_1 … X_n)`.
pub fn eval_stronger_bipartite(joint: &JointDistribution) -> Result<CriterionReport> {
    let l = layout(joint)?;
    if l.senders != 1 {
        return Err(Error::Unsupported {
            criterion: "ic-bipartite-strong",
            reason: format!("needs one sender, joint has {}", l.senders),
        });
    }
    let m = message_var(1);
    let slices = choice_slices(joint, l.bits)?;
    let mut lhs = 0.0;
    for (j, slice) in slices.iter().enumerate() {
        let i = j + 1;
        let given = [GUESS_VAR.to_string(), m.clone()];
        lhs += slice.mutual_information(&[input_var(1, i)], &given)?;
        if i >= 2 {
            lhs += slice.conditional_mutual_information(
                &[input_var(1, 1)],
                &[input_var(1, i)],
                &given,
            )?;
        }
    }
    let xs: Vec<String> = (1..=l.bits).map(|i| input_var(1, i)).collect();
    let mut rhs = joint.entropy(&[m])? - joint.entropy(&xs)?;
    for x in &xs {
        rhs += joint.entropy(&[x])?;
    }
    Ok(CriterionReport::new(CriterionId::IcBipartiteStrong, lhs, rhs))
}

/// Multipartite criterion: `Σ_k Σ_i I(X_i^k : X_i^{others}, G_i)` against
/// `H(M_1 … M_{N-1})` plus the input-correlation term.
pub fn eval_multipartite_ic(joint: &JointDistribution) -> Result<CriterionReport> {
    let l = layout(joint)?;
    let slices = choice_slices(joint, l.bits)?;
    let lhs = multi_lhs(&slices, l.senders)?;
    let rhs = joint.entropy(&messages(l.senders))? + input_correlation(joint, l.senders, l.bits)?;
    Ok(CriterionReport::new(CriterionId::IcMulti, lhs, rhs))
}

/// Noisy-channel form of the multipartite criterion on a joint that carries
/// channel outputs `M_k'`: the message entropy is replaced by
/// `Σ_k I(M_k : M_k')`.
pub fn eval_noisy_joint(joint: &JointDistribution) -> Result<CriterionReport> {
    let l = layout(joint)?;
    let slices = choice_slices(joint, l.bits)?;
    let lhs = multi_lhs(&slices, l.senders)?;
    let mut rhs = input_correlation(joint, l.senders, l.bits)?;
    for k in 1..=l.senders {
        rhs += joint.mutual_information(&[message_var(k)], &[received_var(k)])?;
    }
    Ok(CriterionReport::new(CriterionId::IcNoisy, lhs, rhs))
}

/// Runs the single-copy protocol through a binary symmetric channel of flip
/// probability `epsilon` on each message and evaluates the noisy criterion.
pub fn eval_noisy_ic(b: &Behavior, epsilon: f64) -> Result<CriterionReport> {
    let channel = Channel::bsc(epsilon)?;
    let cfg = ProtocolConfig::single_copy(b.parties()).with_channel(channel);
    let joint = protocol::single_copy_joint(b, &cfg)?;
    let mut report = eval_noisy_joint(&joint)?;
    if epsilon == 0.5 {
        report.flag = Some(INDETERMINATE_LIMIT.to_string());
        report.violated = false;
    }
    Ok(report)
}

/// Maximum of `f` over the relabeling orbit, acting on the correlator
/// vector. Outcome flips that do not depend on the input only change the
/// overall sign of every correlator, so they are folded out: the orbit
/// visited is permutations × input flips × input-linear outcome flips.
/// `f` must be invariant under a global sign change.
pub fn correlator_orbit_max<F>(b: &Behavior, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = b.parties();
    let settings = 1u32 << n;
    let source = b.correlators();
    permutations(n)
        .par_iter()
        .map(|perm| {
            let mut buf = vec![0.0; settings as usize];
            let mut best = f64::NEG_INFINITY;
            for flips in 0..settings {
                // moved[x'] = C at the original input feeding relabeled x'.
                let moved: Vec<f64> = (0..settings)
                    .map(|xn| {
                        let x = perm.iter().enumerate().fold(0u32, |acc, (i, &orig)| {
                            acc | (((xn >> i) & 1) ^ ((flips >> i) & 1)) << orig
                        });
                        source[x as usize]
                    })
                    .collect();
                for linear in 0..settings {
                    for (xn, slot) in buf.iter_mut().enumerate() {
                        let sign = (linear & xn as u32).count_ones() & 1;
                        *slot = if sign == 0 { moved[xn] } else { -moved[xn] };
                    }
                    best = best.max(f(&buf));
                }
            }
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// `E_I² + E_II²` from correlators, with the last party as receiver.
pub fn multicopy_value_from_correlators(c: &[f64]) -> f64 {
    let n = c.len().trailing_zeros() as usize;
    let s = n - 1;
    let senders = 1usize << s;
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for xs in 0..senders {
        e1 += c[xs];
        let v = c[xs | senders];
        e2 += if (xs as u32).count_ones().is_multiple_of(2) { v } else { -v };
    }
    let e1 = e1 / senders as f64;
    let e2 = e2 / senders as f64;
    e1 * e1 + e2 * e2
}

/// `¼[(C_00 + C_10)² + (C_01 - C_11)²]`, with `C_xy` indexed by party 1's
/// input first.
pub fn uffink2_value(c: &[f64]) -> f64 {
    let cc = |x: usize, y: usize| c[x | y << 1];
    0.25 * ((cc(0, 0) + cc(1, 0)).powi(2) + (cc(0, 1) - cc(1, 1)).powi(2))
}

/// `(C_001 + C_010 + C_100 - C_111)² + (C_110 + C_101 + C_011 - C_000)²`.
pub fn uffink3_value(c: &[f64]) -> f64 {
    let cc = |x: usize, y: usize, z: usize| c[x | y << 1 | z << 2];
    (cc(0, 0, 1) + cc(0, 1, 0) + cc(1, 0, 0) - cc(1, 1, 1)).powi(2)
        + (cc(1, 1, 0) + cc(1, 0, 1) + cc(0, 1, 1) - cc(0, 0, 0)).powi(2)
}

/// Canonical multiple-copies value `E_I² + E_II²` with the last party as
/// receiver and no relabeling.
pub fn multicopy_canonical(b: &Behavior) -> f64 {
    let (e1, e2) = biases(b);
    e1 * e1 + e2 * e2
}

/// `E_I² + E_II²` against 1, maximized over the relabeling orbit.
pub fn eval_multicopy(b: &Behavior) -> CriterionReport {
    let lhs = correlator_orbit_max(b, multicopy_value_from_correlators);
    CriterionReport::new(CriterionId::IcMulticopy, lhs, 1.0)
}

/// Quadratic correlator inequality, maximized over the relabeling orbit:
/// the bipartite form against 1 or the tripartite form against 16.
pub fn eval_uffink(b: &Behavior) -> Result<CriterionReport> {
    match b.parties() {
        2 => Ok(CriterionReport::new(
            CriterionId::Uffink2,
            correlator_orbit_max(b, uffink2_value),
            1.0,
        )),
        3 => Ok(CriterionReport::new(
            CriterionId::Uffink3,
            correlator_orbit_max(b, uffink3_value),
            16.0,
        )),
        n => Err(Error::Unsupported {
            criterion: "uffink",
            reason: format!("defined for 2 or 3 parties, got {n}"),
        }),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(N-1) Σ_r C(K,r) [1 - h(½(1 + E_I^{K-r} E_II^r))]` against `N - 1`,
/// with the analytic bound `(N-1)/(2 ln 2) (E_I² + E_II²)^K` attached.
pub fn eval_success_bound(b: &Behavior, depth: usize) -> Result<CriterionReport> {
    if depth == 0 {
        return Err(Error::OutOfRange {
            name: "K",
            value: 0.0,
        });
    }
    let (e1, e2) = biases(b);
    let senders = (b.parties() - 1) as f64;
    let mut sum = 0.0;
    for r in 0..=depth {
        let p = protocol::concat_success_closed(e1, e2, depth, r)?;
        sum += binomial(depth, r) * (1.0 - h2(p));
    }
    let mut report = CriterionReport::new(CriterionId::IcSuccessBound, senders * sum, senders);
    report.bound = Some(
        senders / (2.0 * std::f64::consts::LN_2) * (e1 * e1 + e2 * e2).powi(depth as i32),
    );
    Ok(report)
}

/// The multipartite information sum `Σ_k Σ_i I(X_i^k : X_i^{others}, G_i)`
/// of the depth-`K` concatenated protocol, from exact simulation.
pub fn concat_information(b: &Behavior, depth: usize) -> Result<f64> {
    let senders = b.parties() - 1;
    let mut total = 0.0;
    for z in all_strings(depth) {
        let joint = protocol::concat_target_joint(b, depth, &z)?;
        let i = leaf_index(&z) + 1;
        for k in 1..=senders {
            let mut rest: Vec<String> = (1..=senders)
                .filter(|&o| o != k)
                .map(|o| input_var(o, i))
                .collect();
            rest.push(GUESS_VAR.to_string());
            total += joint.mutual_information(&[input_var(k, i)], &rest)?;
        }
    }
    Ok(total)
}

/// Evaluates one criterion on a behavior, building the protocol joint where
/// needed.
pub fn evaluate(b: &Behavior, id: CriterionId, opts: &EvalOptions) -> Result<CriterionReport> {
    if !id.supports(b.parties()) {
        return Err(Error::Unsupported {
            criterion: id.as_str(),
            reason: format!("not defined for {} parties", b.parties()),
        });
    }
    let single = || protocol::single_copy_joint(b, &ProtocolConfig::single_copy(b.parties()));
    match id {
        CriterionId::IcBipartite => eval_bipartite_ic(&single()?),
        CriterionId::IcBipartiteStrong => eval_stronger_bipartite(&single()?),
        CriterionId::IcMulti => eval_multipartite_ic(&single()?),
        CriterionId::IcMulticopy => Ok(eval_multicopy(b)),
        CriterionId::IcSuccessBound => eval_success_bound(b, opts.depth),
        CriterionId::Uffink2 | CriterionId::Uffink3 => eval_uffink(b),
        CriterionId::IcNoisy => eval_noisy_ic(b, opts.epsilon_channel),
    }
}
