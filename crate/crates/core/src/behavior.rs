//! N-party binary-input/binary-output behaviors `p(a₁…a_N | x₁…x_N)`.
//!
//! A behavior is stored as a dense table of `4^N` probabilities. Inputs and
//! outcomes are packed into bitmasks with party `k` (0-based) on bit `k`, and
//! the entry for `(x, a)` lives at `(x << N) | a`.
//!
//! The last party (index `N-1`) plays the receiver in every protocol of this
//! crate; the others are senders.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on normalization and non-signaling constraints.
pub const PROB_TOL: f64 = 1e-9;

/// Entries in `[-CLAMP_TOL, 0)` are treated as rounding noise and clamped to 0.
pub const CLAMP_TOL: f64 = 1e-12;

pub const MIN_PARTIES: usize = 2;
pub const MAX_PARTIES: usize = 6;

/// Parity of the set bits of `v`.
#[inline]
pub(crate) fn parity(v: u32) -> u32 {
    v.count_ones() & 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    parties: usize,
    table: Vec<f64>,
}

/// One violated constraint found by [`Behavior::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    /// `Σ_a p(a|x)` differs from 1 by `deviation`.
    Normalization { input: u32, deviation: f64 },
    /// Entry below the clamp tolerance.
    Negative { input: u32, outcome: u32, value: f64 },
    /// The marginal on `subset` (party bitmask) depends on the inputs outside
    /// it; `deviation` is the largest absolute difference observed.
    NonSignaling { subset: u32, deviation: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Normalization { input, deviation } => {
                write!(f, "normalization at x={input:b}: off by {deviation:e}")
            }
            Violation::Negative {
                input,
                outcome,
                value,
            } => write!(f, "negative entry p({outcome:b}|{input:b}) = {value:e}"),
            Violation::NonSignaling { subset, deviation } => {
                write!(f, "signaling on parties {subset:b}: deviation {deviation:e}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn normalization(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.violations.iter().filter_map(|v| match *v {
            Violation::Normalization { input, deviation } => Some((input, deviation)),
            _ => None,
        })
    }

    /// Largest non-signaling deviation over all subsets, if any was reported.
    pub fn max_signaling(&self) -> Option<f64> {
        self.violations
            .iter()
            .filter_map(|v| match *v {
                Violation::NonSignaling { deviation, .. } => Some(deviation),
                _ => None,
            })
            .reduce(f64::max)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl Behavior {
    /// Wraps a raw table without checking the probability constraints.
    ///
    /// Only the shape is checked here; entries in `[-1e-12, 0)` are clamped.
    /// Call [`Behavior::validate`] (or use [`Behavior::validated`]) before
    /// relying on normalization or non-signaling.
    pub fn from_table(parties: usize, mut table: Vec<f64>) -> Result<Self> {
        check_parties(parties)?;
        let expected = 1usize << (2 * parties);
        if table.len() != expected {
            return Err(Error::Structure(format!(
                "table for {parties} parties needs {expected} entries, got {}",
                table.len()
            )));
        }
        if let Some(v) = table.iter().find(|v| !v.is_finite()) {
            return Err(Error::Structure(format!("non-finite entry {v}")));
        }
        for v in &mut table {
            if *v < 0.0 && *v >= -CLAMP_TOL {
                *v = 0.0;
            }
        }
        Ok(Self { parties, table })
    }

    /// [`Behavior::from_table`] followed by validation.
    pub fn validated(parties: usize, table: Vec<f64>) -> Result<Self> {
        let b = Self::from_table(parties, table)?;
        let report = b.validate();
        if report.is_valid() {
            Ok(b)
        } else {
            Err(Error::Invalid(report))
        }
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    /// Number of input (and outcome) tuples, `2^N`.
    pub fn settings(&self) -> u32 {
        1 << self.parties
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    #[inline]
    pub fn index(&self, input: u32, outcome: u32) -> usize {
        ((input as usize) << self.parties) | outcome as usize
    }

    #[inline]
    pub fn prob(&self, input: u32, outcome: u32) -> f64 {
        self.table[self.index(input, outcome)]
    }

    /// Row `p(·|x)` for a fixed input tuple.
    pub fn row(&self, input: u32) -> &[f64] {
        let n = self.settings() as usize;
        let start = input as usize * n;
        &self.table[start..start + n]
    }

    pub fn validate(&self) -> ValidationReport {
        let n = self.settings();
        let mut violations = Vec::new();

        for x in 0..n {
            for a in 0..n {
                let v = self.prob(x, a);
                if v < -CLAMP_TOL {
                    violations.push(Violation::Negative {
                        input: x,
                        outcome: a,
                        value: v,
                    });
                }
            }
        }
        for x in 0..n {
            let total: f64 = self.row(x).iter().sum();
            let deviation = (total - 1.0).abs();
            if deviation > PROB_TOL {
                violations.push(Violation::Normalization {
                    input: x,
                    deviation,
                });
            }
        }

        // Every proper non-empty subset S: the marginal on S, for a fixed
        // assignment of S's inputs, must not depend on the other inputs.
        let full = n - 1;
        for subset in 1..full {
            let deviation = self.signaling_deviation(subset);
            if deviation > PROB_TOL {
                violations.push(Violation::NonSignaling { subset, deviation });
            }
        }
        ValidationReport { violations }
    }

    /// Largest change of the `subset` marginal when inputs outside `subset`
    /// vary with the inputs on `subset` held fixed.
    pub fn signaling_deviation(&self, subset: u32) -> f64 {
        let n = self.settings();
        let rest = (n - 1) & !subset;
        let mut worst = 0.0f64;
        let mut reference = vec![0.0; n as usize];
        let mut current = vec![0.0; n as usize];
        // Enumerate assignments to the inputs on `subset`.
        let mut xs = 0u32;
        loop {
            self.marginal_into(xs, subset, &mut reference);
            // Enumerate the other inputs as submasks of `rest`.
            let mut xr = rest;
            while xr != 0 {
                self.marginal_into(xs | xr, subset, &mut current);
                for (r, c) in reference.iter().zip(&current) {
                    worst = worst.max((r - c).abs());
                }
                xr = (xr - 1) & rest;
            }
            if xs == subset {
                break;
            }
            xs = (xs.wrapping_sub(subset)) & subset;
        }
        worst
    }

    /// Marginal on `subset` at input `x`, indexed by the masked outcome.
    fn marginal_into(&self, x: u32, subset: u32, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (a, p) in self.row(x).iter().enumerate() {
            out[a & subset as usize] += p;
        }
    }

    /// `C_x = Σ_a (-1)^{a₁+…+a_N} p(a|x)`.
    pub fn correlator(&self, input: u32) -> f64 {
        self.row(input)
            .iter()
            .enumerate()
            .map(|(a, p)| if parity(a as u32) == 0 { *p } else { -*p })
            .sum()
    }

    /// All `2^N` full correlators indexed by input mask.
    pub fn correlators(&self) -> Vec<f64> {
        (0..self.settings()).map(|x| self.correlator(x)).collect()
    }

    /// Probability that the outcome parity equals `target` at input `x`.
    pub fn parity_prob(&self, input: u32, target: u32) -> f64 {
        self.row(input)
            .iter()
            .enumerate()
            .filter(|(a, _)| parity(*a as u32) == target)
            .map(|(_, p)| p)
            .sum()
    }

    /// Joint distribution of the senders' outcomes (all parties but the last)
    /// at input `x`, with the receiver's outcome summed out. Indexed by the
    /// sender outcome mask.
    pub fn sender_marginal(&self, input: u32) -> Vec<f64> {
        let senders = self.parties - 1;
        let mask = (1usize << senders) - 1;
        let mut out = vec![0.0; 1 << senders];
        for (a, p) in self.row(input).iter().enumerate() {
            out[a & mask] += p;
        }
        out
    }

    /// Applies a relabeling of parties, inputs and outcomes.
    pub fn relabel(&self, r: &Relabeling) -> Behavior {
        let n = self.settings();
        let mut table = vec![0.0; self.table.len()];
        for x_new in 0..n {
            for a_new in 0..n {
                let (x, a) = r.map_back(x_new, a_new);
                table[self.index(x_new, a_new)] = self.prob(x, a);
            }
        }
        Behavior {
            parties: self.parties,
            table,
        }
    }

    pub fn max_abs_diff(&self, other: &Behavior) -> f64 {
        self.table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_parties(parties: usize) -> Result<()> {
    if !(MIN_PARTIES..=MAX_PARTIES).contains(&parties) {
        return Err(Error::Structure(format!(
            "party count {parties} outside {MIN_PARTIES}..={MAX_PARTIES}"
        )));
    }
    Ok(())
}

fn build(parties: usize, f: impl Fn(u32, u32) -> f64) -> Result<Behavior> {
    check_parties(parties)?;
    let n = 1u32 << parties;
    let mut table = Vec::with_capacity((n * n) as usize);
    for x in 0..n {
        for a in 0..n {
            table.push(f(x, a));
        }
    }
    Ok(Behavior { parties, table })
}

/// XOR target of the family `⊕_k a_k = ⊕_{k<N} x_k x_N`.
#[inline]
pub(crate) fn xor_target(parties: usize, input: u32) -> u32 {
    let receiver = (input >> (parties - 1)) & 1;
    let senders = input & ((1 << (parties - 1)) - 1);
    parity(senders) & receiver
}

impl Behavior {
    /// Popescu–Rohrlich box: `p = 1/2` when `a ⊕ b = xy`.
    pub fn pr_box() -> Behavior {
        Behavior::box45(2).expect("two parties is in range")
    }

    /// `p = 1/2^{N-1}` when `⊕ a_k = ⊕_{k<N} x_k x_N`, zero otherwise.
    /// For three parties this is the class-45 extremal box.
    pub fn box45(parties: usize) -> Result<Behavior> {
        let weight = 1.0 / (1u64 << (parties.max(1) - 1)) as f64;
        build(parties, |x, a| {
            if parity(a) == xor_target(parties, x) {
                weight
            } else {
                0.0
            }
        })
    }

    /// Uniform noise, `1/2^N` everywhere.
    pub fn white(parties: usize) -> Result<Behavior> {
        let weight = 1.0 / (1u64 << parties.min(63)) as f64;
        build(parties, |_, _| weight)
    }

    /// Every party outputs 0 regardless of input.
    pub fn deterministic_zero(parties: usize) -> Result<Behavior> {
        build(parties, |_, a| if a == 0 { 1.0 } else { 0.0 })
    }

    /// `E·box45(N) + (1-E)·white(N)`.
    ///
    /// The XOR condition of the box45 family then holds with probability
    /// `(1+E)/2` at every input. That bias condition alone admits many
    /// behaviors; this crate always means the white-noise mixture.
    pub fn isotropic(bias: f64, parties: usize) -> Result<Behavior> {
        if !(0.0..=1.0).contains(&bias) {
            return Err(Error::OutOfRange {
                name: "E",
                value: bias,
            });
        }
        mix(&[
            (bias, &Behavior::box45(parties)?),
            (1.0 - bias, &Behavior::white(parties)?),
        ])
    }

    /// Local deterministic box. `responses[k]` encodes party `k`'s response
    /// function: bit 0 is the outcome for input 0, bit 1 the outcome for input 1.
    pub fn local_deterministic(responses: &[u8]) -> Result<Behavior> {
        let parties = responses.len();
        if responses.iter().any(|r| *r > 3) {
            return Err(Error::Structure("response code must be in 0..4".into()));
        }
        build(parties, |x, a| {
            let hit = responses.iter().enumerate().all(|(k, r)| {
                let xk = (x >> k) & 1;
                let ak = (a >> k) & 1;
                u32::from((r >> xk) & 1) == ak
            });
            if hit {
                1.0
            } else {
                0.0
            }
        })
    }

    /// All `4^N` local deterministic boxes, in response-code order.
    pub fn all_local_deterministic(parties: usize) -> Result<Vec<Behavior>> {
        check_parties(parties)?;
        let count = 1usize << (2 * parties);
        (0..count)
            .map(|code| {
                let responses: Vec<u8> = (0..parties)
                    .map(|k| ((code >> (2 * k)) & 3) as u8)
                    .collect();
                Behavior::local_deterministic(&responses)
            })
            .collect()
    }
}

/// Parameters accepted by [`named_box`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxParams {
    pub parties: usize,
    pub bias: Option<f64>,
}

impl Default for BoxParams {
    fn default() -> Self {
        Self {
            parties: 3,
            bias: None,
        }
    }
}

/// Constructs a behavior by name: `pr`, `box45`, `deterministic-zero`
/// (alias `detzero`), `white`, `isotropic`.
pub fn named_box(name: &str, params: BoxParams) -> Result<Behavior> {
    match name {
        "pr" => {
            if params.parties != 2 {
                return Err(Error::PartyMismatch {
                    expected: 2,
                    found: params.parties,
                });
            }
            Ok(Behavior::pr_box())
        }
        "box45" => Behavior::box45(params.parties),
        "deterministic-zero" | "detzero" => Behavior::deterministic_zero(params.parties),
        "white" => Behavior::white(params.parties),
        "isotropic" => {
            let bias = params.bias.ok_or(Error::OutOfRange {
                name: "E",
                value: f64::NAN,
            })?;
            Behavior::isotropic(bias, params.parties)
        }
        other => Err(Error::UnknownBox(other.to_string())),
    }
}

/// Entrywise convex combination.
pub fn mix(components: &[(f64, &Behavior)]) -> Result<Behavior> {
    let first = components
        .first()
        .ok_or_else(|| Error::Structure("empty mixture".into()))?
        .1;
    let parties = first.parties;
    let mut total = 0.0;
    for (w, b) in components {
        if *w < 0.0 || !w.is_finite() {
            return Err(Error::OutOfRange {
                name: "weight",
                value: *w,
            });
        }
        if b.parties != parties {
            return Err(Error::PartyMismatch {
                expected: parties,
                found: b.parties,
            });
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::WeightSum(total));
    }
    let mut table = vec![0.0; first.table.len()];
    for (w, b) in components {
        for (t, p) in table.iter_mut().zip(&b.table) {
            *t += w * p;
        }
    }
    Ok(Behavior { parties, table })
}

/// A relabeling of an N-party scenario.
///
/// Role `i` of the relabeled behavior is played by original party
/// `perm[i]`, whose input is `x'_i ⊕ flip_i` and whose outcome is
/// `a'_i ⊕ g_i(x'_i)`, where `g_i(v)` is bit `2i + v` of `output_flips`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relabeling {
    pub perm: Vec<usize>,
    pub input_flips: u32,
    pub output_flips: u32,
}

impl Relabeling {
    pub fn identity(parties: usize) -> Self {
        Self {
            perm: (0..parties).collect(),
            input_flips: 0,
            output_flips: 0,
        }
    }

    /// Maps a relabeled `(x', a')` to the original `(x, a)`.
    #[inline]
    pub fn map_back(&self, x_new: u32, a_new: u32) -> (u32, u32) {
        let mut x = 0;
        let mut a = 0;
        for (i, &orig) in self.perm.iter().enumerate() {
            let xi = (x_new >> i) & 1;
            let ai = (a_new >> i) & 1;
            let flip_out = (self.output_flips >> (2 * i as u32 + xi)) & 1;
            x |= (xi ^ ((self.input_flips >> i) & 1)) << orig;
            a |= (ai ^ flip_out) << orig;
        }
        (x, a)
    }

    /// Original input mask and correlator sign for a relabeled input.
    /// `C'_{x'} = sign · C_x`.
    #[inline]
    pub fn correlator_source(&self, x_new: u32) -> (u32, f64) {
        let (x, _) = self.map_back(x_new, 0);
        let flips: u32 = (0..self.perm.len() as u32)
            .map(|i| (self.output_flips >> (2 * i + ((x_new >> i) & 1))) & 1)
            .sum();
        (x, if flips & 1 == 0 { 1.0 } else { -1.0 })
    }

    /// Full orbit: `N!` permutations × `2^N` input flips × `2^{2N}`
    /// input-conditioned outcome flips.
    pub fn orbit(parties: usize) -> Vec<Relabeling> {
        let perms = permutations(parties);
        let mut out = Vec::with_capacity(perms.len() << (3 * parties));
        for perm in &perms {
            for input_flips in 0..(1u32 << parties) {
                for output_flips in 0..(1u32 << (2 * parties)) {
                    out.push(Relabeling {
                        perm: perm.clone(),
                        input_flips,
                        output_flips,
                    });
                }
            }
        }
        out
    }
}

pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}
