//! Parameter sweeps over a two-dimensional slice of behaviors, boundary
//! location by bisection, and catalog classification.
//!
//! The slice is `γ·p₀ + ε·p₁ + (1 - γ - ε)·p₂` for three generator
//! behaviors; the default uses box 45, the all-zero deterministic box and
//! white noise on three parties.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::{mix, Behavior};
use crate::criteria::{self, CriterionId, CriterionReport, EvalOptions};
use crate::error::{Error, Result};
use crate::format::num;
use crate::io::{BoxCatalog, CLASS_ID_RANGE};

pub const DEFAULT_GRID_STEP: f64 = 0.01;
pub const BISECTION_TOL: f64 = 1e-6;

/// Channel noise levels for the noisy-criterion limit.
pub const NOISY_SWEEP: [f64; 3] = [0.45, 0.49, 0.499];

/// Classes violating the multiple-copies criterion in the published table.
pub const TABLE_MULTICOPY: [u32; 9] = [35, 37, 38, 40, 41, 42, 43, 44, 45];
/// Classes violating the tripartite quadratic inequality in the published table.
pub const TABLE_UFFINK3: [u32; 9] = [21, 22, 30, 34, 36, 39, 41, 44, 46];

pub const SCAN_HEADER: [&str; 7] = ["gamma", "epsilon", "criterion", "lhs", "rhs", "margin", "violated"];
pub const BOUNDARY_HEADER: [&str; 4] = ["criterion", "epsilon", "gamma_star", "bracket_width"];

#[derive(Debug, Clone)]
pub struct SliceSpec {
    /// `[p₀, p₁, p₂]`, weighted by `γ`, `ε` and the remainder.
    pub generators: [Behavior; 3],
    pub grid_step: f64,
    pub criteria: Vec<CriterionId>,
    pub options: EvalOptions,
}

impl SliceSpec {
    pub fn default_slice() -> Self {
        Self {
            generators: [
                Behavior::box45(3).expect("3 parties"),
                Behavior::deterministic_zero(3).expect("3 parties"),
                Behavior::white(3).expect("3 parties"),
            ],
            grid_step: DEFAULT_GRID_STEP,
            criteria: vec![CriterionId::IcMulti, CriterionId::IcMulticopy, CriterionId::Uffink3],
            options: EvalOptions::default(),
        }
    }

    pub fn parties(&self) -> usize {
        self.generators[0].parties()
    }

    pub fn check(&self) -> Result<()> {
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            return Err(Error::OutOfRange {
                name: "grid_step",
                value: self.grid_step,
            });
        }
        let n = self.parties();
        for g in &self.generators[1..] {
            if g.parties() != n {
                return Err(Error::PartyMismatch {
                    expected: n,
                    found: g.parties(),
                });
            }
        }
        for c in &self.criteria {
            if !c.supports(n) {
                return Err(Error::Unsupported {
                    criterion: c.as_str(),
                    reason: format!("not defined for {n} parties"),
                });
            }
        }
        Ok(())
    }

    /// The behavior at slice coordinates `(γ, ε)`.
    pub fn point(&self, gamma: f64, epsilon: f64) -> Result<Behavior> {
        if gamma < 0.0 || epsilon < 0.0 || gamma + epsilon > 1.0 + 1e-12 {
            return Err(Error::OutOfRange {
                name: "gamma+epsilon",
                value: gamma + epsilon,
            });
        }
        let rest = (1.0 - gamma - epsilon).max(0.0);
        let [a, b, c] = &self.generators;
        mix(&[(gamma, a), (epsilon, b), (rest, c)])
    }

    /// Grid values `0, h, 2h, …` up to 1.
    pub fn grid(&self) -> Vec<f64> {
        let steps = (1.0 / self.grid_step + 1e-9).floor() as usize;
        (0..=steps).map(|i| i as f64 * self.grid_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub gamma: f64,
    pub epsilon: f64,
    pub criterion: CriterionId,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub violated: bool,
}

impl ScanRow {
    fn new(gamma: f64, epsilon: f64, r: CriterionReport) -> Self {
        Self {
            gamma,
            epsilon,
            criterion: r.criterion,
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            violated: r.violated,
        }
    }
}

/// Evaluates every criterion at every grid point with `γ + ε ≤ 1`. Rows are
/// sorted by `(ε, γ, criterion)`.
pub fn scan_slice(spec: &SliceSpec) -> Result<Vec<ScanRow>> {
    spec.check()?;
    let grid = spec.grid();
    let points: Vec<(f64, f64)> = grid
        .iter()
        .flat_map(|&e| {
            grid.iter()
                .filter(move |&&g| g + e <= 1.0 + 1e-9)
                .map(move |&g| (g, e))
        })
        .collect();
    let mut rows = points
        .par_iter()
        .map(|&(g, e)| {
            let b = spec.point(g, e.min(1.0 - g).max(0.0))?;
            spec.criteria
                .iter()
                .map(|&c| Ok(ScanRow::new(g, e, criteria::evaluate(&b, c, &spec.options)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    rows.sort_by(|a, b| {
        a.epsilon
            .total_cmp(&b.epsilon)
            .then(a.gamma.total_cmp(&b.gamma))
            .then(a.criterion.cmp(&b.criterion))
    });
    Ok(rows)
}

pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCAN_HEADER)?;
    for r in rows {
        w.write_record([
            num(r.gamma),
            num(r.epsilon),
            r.criterion.to_string(),
            num(r.lhs),
            num(r.rhs),
            num(r.margin),
            r.violated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Certified bracket `[lo, hi]` of width at most `tol` with `violated(lo)`
/// false and `violated(hi)` true, or `None` when the endpoints do not
/// straddle a change.
pub fn bisect<F>(mut lo: f64, mut hi: f64, tol: f64, violated: F) -> Result<Option<(f64, f64)>>
where
    F: Fn(f64) -> Result<bool>,
{
    if violated(lo)? || !violated(hi)? {
        return Ok(None);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if violated(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some((lo, hi)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub criterion: CriterionId,
    pub epsilon: f64,
    pub gamma_star: f64,
    pub bracket_width: f64,
    /// Largest `γ` known to satisfy the criterion.
    pub lo: f64,
    /// Smallest `γ` known to violate it.
    pub hi: f64,
}

/// Critical `γ` on the ray `γ ∈ [0, 1 - ε]` at fixed `ε`.
pub fn boundary(spec: &SliceSpec, criterion: CriterionId, epsilon: f64) -> Result<BoundaryPoint> {
    spec.check()?;
    if !criterion.supports(spec.parties()) {
        return Err(Error::Unsupported {
            criterion: criterion.as_str(),
            reason: format!("not defined for {} parties", spec.parties()),
        });
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::OutOfRange {
            name: "epsilon_slice",
            value: epsilon,
        });
    }
    let violated = |g: f64| -> Result<bool> {
        let b = spec.point(g, epsilon)?;
        Ok(criteria::evaluate(&b, criterion, &spec.options)?.violated)
    };
    match bisect(0.0, 1.0 - epsilon, BISECTION_TOL, violated)? {
        Some((lo, hi)) => Ok(BoundaryPoint {
            criterion,
            epsilon,
            gamma_star: 0.5 * (lo + hi),
            bracket_width: hi - lo,
            lo,
            hi,
        }),
        None => Err(Error::NoBoundary {
            criterion: criterion.to_string(),
            epsilon,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub criterion: CriterionId,
    /// `(ε, boundary)`; `None` where the ray has no boundary.
    pub points: Vec<(f64, Option<BoundaryPoint>)>,
}

pub fn boundary_curve(
    spec: &SliceSpec,
    criterion: CriterionId,
    epsilons: &[f64],
) -> Result<BoundaryCurve> {
    let points = epsilons
        .par_iter()
        .map(|&e| match boundary(spec, criterion, e) {
            Ok(p) => Ok((e, Some(p))),
            Err(Error::NoBoundary { .. }) => Ok((e, None)),
            Err(err) => Err(err),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryCurve { criterion, points })
}

pub fn write_boundary_csv<W: Write>(curves: &[BoundaryCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUNDARY_HEADER)?;
    for c in curves {
        for (e, p) in &c.points {
            let (g, width) = match p {
                Some(p) => (num(p.gamma_star), num(p.bracket_width)),
                None => (String::new(), String::new()),
            };
            w.write_record([c.criterion.to_string(), num(*e), g, width])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Critical `E` for `isotropic(E, parties)`, or `None` if the criterion
/// does not change status on `[0, 1]`.
pub fn isotropic_threshold(
    parties: usize,
    criterion: CriterionId,
    options: &EvalOptions,
) -> Result<Option<f64>> {
    let violated = |e: f64| -> Result<bool> {
        let b = Behavior::isotropic(e, parties)?;
        Ok(criteria::evaluate(&b, criterion, options)?.violated)
    };
    Ok(bisect(0.0, 1.0, BISECTION_TOL, violated)?.map(|(lo, hi)| 0.5 * (lo + hi)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisySample {
    pub epsilon_channel: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// The noisy criterion as the channel approaches pure noise: the ratio
/// `lhs / rhs` at each sweep point and its extrapolation to `ε → ½`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyLimit {
    pub samples: Vec<NoisySample>,
    pub extrapolated_ratio: f64,
}

impl NoisyLimit {
    pub fn violated(&self) -> bool {
        self.extrapolated_ratio > 1.0 + criteria::VIOLATION_TOL
    }
}

/// Polynomial extrapolation to `t = 0` through the points `(t_i, v_i)`.
pub fn neville_at_zero(points: &[(f64, f64)]) -> f64 {
    let t: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut v: Vec<f64> = points.iter().map(|p| p.1).collect();
    let n = v.len();
    for m in 1..n {
        for i in 0..n - m {
            v[i] = (t[i + m] * v[i] - t[i] * v[i + 1]) / (t[i + m] - t[i]);
        }
    }
    v[0]
}

/// Evaluates the noisy criterion at each flip probability and extrapolates
/// the ratio in `y² = (1 - 2ε)²`.
pub fn noisy_limit(b: &Behavior, epsilons: &[f64]) -> Result<NoisyLimit> {
    if epsilons.is_empty() {
        return Err(Error::Structure("empty channel sweep".into()));
    }
    let mut samples = Vec::with_capacity(epsilons.len());
    for &e in epsilons {
        if !(0.0..0.5).contains(&e) {
            return Err(Error::OutOfRange {
                name: "epsilon_channel",
                value: e,
            });
        }
        let r = criteria::eval_noisy_ic(b, e)?;
        samples.push(NoisySample {
            epsilon_channel: e,
            lhs: r.lhs,
            rhs: r.rhs,
            ratio: r.lhs / r.rhs,
        });
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| ((1.0 - 2.0 * s.epsilon_channel).powi(2), s.ratio))
        .collect();
    Ok(NoisyLimit {
        extrapolated_ratio: neville_at_zero(&pts),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class_id: u32,
    pub reports: Vec<CriterionReport>,
}

impl ClassRow {
    pub fn violates(&self, c: CriterionId) -> bool {
        self.reports.iter().any(|r| r.criterion == c && r.violated)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub source: String,
    pub rows: Vec<ClassRow>,
}

impl Classification {
    pub fn violators(&self, c: CriterionId) -> BTreeSet<u32> {
        self.rows
            .iter()
            .filter(|r| r.violates(c))
            .map(|r| r.class_id)
            .collect()
    }

    pub fn class_ids(&self) -> BTreeSet<u32> {
        self.rows.iter().map(|r| r.class_id).collect()
    }

    /// Aligned text table, one line per class.
    pub fn to_table(&self, criteria: &[CriterionId]) -> String {
        let mut out = format!("{:>5}", "class");
        for c in criteria {
            out += &format!("  {:>14}", c.as_str());
        }
        out.push('\n');
        for r in &self.rows {
            out += &format!("{:>5}", r.class_id);
            for c in criteria {
                let cell = match r.reports.iter().find(|x| x.criterion == *c) {
                    Some(x) => format!("{}{}", num(x.lhs), if x.violated { " *" } else { "" }),
                    None => "-".into(),
                };
                out += &format!("  {cell:>14}");
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates the criteria on every catalog entry without requiring the
/// catalog to be complete.
pub fn classify_entries(catalog: &BoxCatalog, criteria: &[CriterionId]) -> Result<Classification> {
    for c in criteria {
        if !matches!(c, CriterionId::IcMulticopy | CriterionId::Uffink3) {
            return Err(Error::Unsupported {
                criterion: c.as_str(),
                reason: "catalog classification uses ic-multicopy and uffink-3".into(),
            });
        }
    }
    let opts = EvalOptions::default();
    let mut rows = catalog
        .entries
        .par_iter()
        .map(|e| {
            let reports = criteria
                .iter()
                .map(|&c| criteria::evaluate(&e.representative, c, &opts))
                .collect::<Result<Vec<_>>>()?;
            Ok(ClassRow {
                class_id: e.class_id,
                reports,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.class_id);
    Ok(Classification {
        source: catalog.source.clone(),
        rows,
    })
}

/// As [`classify_entries`], but every class id `1..=46` must be present.
pub fn classify_catalog(catalog: &BoxCatalog, criteria: &[CriterionId]) -> Result<Classification> {
    let have = catalog.class_ids();
    let missing: Vec<u32> = CLASS_ID_RANGE.filter(|c| !have.contains(c)).collect();
    if !missing.is_empty() {
        return Err(Error::MissingClasses(missing));
    }
    classify_entries(catalog, criteria)
}

/// Published violator set for a criterion, if the table has a row for it.
pub fn published_violators(c: CriterionId) -> Option<BTreeSet<u32>> {
    match c {
        CriterionId::IcMulticopy => Some(TABLE_MULTICOPY.into_iter().collect()),
        CriterionId::Uffink3 => Some(TABLE_UFFINK3.into_iter().collect()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDiff {
    pub criterion: CriterionId,
    /// Published violators that the classification did not flag.
    pub missing: Vec<u32>,
    /// Flagged classes absent from the published row.
    pub unexpected: Vec<u32>,
    /// Published violators with no catalog entry to check.
    pub unchecked: Vec<u32>,
}

/// Comparison of a classification against the published table rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDiff {
    pub rows: Vec<RowDiff>,
}

impl TableDiff {
    pub fn matches(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.missing.is_empty() && r.unexpected.is_empty() && r.unchecked.is_empty())
    }
}

impl fmt::Display for TableDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            if r.missing.is_empty() && r.unexpected.is_empty() && r.unchecked.is_empty() {
                writeln!(f, "{}: matches published row", r.criterion)?;
                continue;
            }
            writeln!(f, "{}: differs from published row", r.criterion)?;
            if !r.missing.is_empty() {
                writeln!(f, "  - published but not violated: {:?}", r.missing)?;
            }
            if !r.unexpected.is_empty() {
                writeln!(f, "  + violated but not published: {:?}", r.unexpected)?;
            }
            if !r.unchecked.is_empty() {
                writeln!(f, "  ? published, no catalog entry: {:?}", r.unchecked)?;
            }
        }
        Ok(())
    }
}

pub fn table_diff(classification: &Classification, criteria: &[CriterionId]) -> TableDiff {
    let present = classification.class_ids();
    let rows = criteria
        .iter()
        .filter_map(|&c| {
            let published = published_violators(c)?;
            let found = classification.violators(c);
            let checked: BTreeSet<u32> = published.intersection(&present).copied().collect();
            Some(RowDiff {
                criterion: c,
                missing: checked.difference(&found).copied().collect(),
                unexpected: found.difference(&published).copied().collect(),
                unchecked: published.difference(&present).copied().collect(),
            })
        })
        .collect();
    TableDiff { rows }
}

/// Summary counts used by the CLI text output.
pub fn violation_counts(rows: &[ScanRow]) -> BTreeMap<CriterionId, usize> {
    let mut out = BTreeMap::new();
    for r in rows {
        *out.entry(r.criterion).or_insert(0) += usize::from(r.violated);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::CatalogEntry;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn spec(step: f64, criteria: Vec<CriterionId>) -> SliceSpec {
        SliceSpec {
            grid_step: step,
            criteria,
            ..SliceSpec::default_slice()
        }
    }

    #[test]
    fn point_weights() {
        let s = SliceSpec::default_slice();
        let b = s.point(0.4, 0.3).unwrap();
        assert!((b.prob(0, 0) - 0.4375).abs() < 1e-15);
        assert!(s.point(0.7, 0.4).is_err());
        assert_eq!(s.grid().len(), 101);
    }

    #[test]
    fn scan_rows() {
        let s = spec(0.2, vec![CriterionId::IcMulti, CriterionId::IcMulticopy]);
        let rows = scan_slice(&s).unwrap();
        assert_eq!(rows.len(), 21 * 2);
        let find = |g: f64, e: f64, c| {
            rows.iter()
                .find(|r| (r.gamma - g).abs() < 1e-9 && (r.epsilon - e).abs() < 1e-9 && r.criterion == c)
                .unwrap()
        };
        assert!((find(1.0, 0.0, CriterionId::IcMulti).margin - 2.0).abs() < 1e-12);
        let m = find(0.8, 0.0, CriterionId::IcMulticopy);
        assert!((m.lhs - 1.28).abs() < 1e-12 && m.violated);
        assert!(rows
            .iter()
            .filter(|r| r.gamma == 0.0 && r.epsilon == 0.0)
            .all(|r| r.margin <= 0.0));
        for w in rows.windows(2) {
            let key = |r: &ScanRow| (r.epsilon, r.gamma);
            assert!(key(&w[0]) <= key(&w[1]));
        }
        let mut buf = Vec::new();
        write_scan_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("gamma,epsilon,criterion,lhs,rhs,margin,violated\n"));
    }

    #[test]
    fn multicopy_edge_boundary() {
        let s = spec(0.01, vec![CriterionId::IcMulticopy]);
        let p = boundary(&s, CriterionId::IcMulticopy, 0.0).unwrap();
        assert!((p.gamma_star - FRAC_1_SQRT_2).abs() < 1e-6);
        assert!(p.bracket_width <= BISECTION_TOL);
    }

    #[test]
    fn single_copy_edge_boundary() {
        let s = spec(0.01, vec![CriterionId::IcMulti]);
        let p = boundary(&s, CriterionId::IcMulti, 0.0).unwrap();
        // 4[1 - h(½(1 + γ))] = 2.
        let want = 0.779944;
        assert!((p.gamma_star - want).abs() < 2e-6, "{}", p.gamma_star);
        assert!(p.gamma_star > FRAC_1_SQRT_2);
    }

    #[test]
    fn uffink_has_no_edge_boundary() {
        let s = spec(0.01, vec![CriterionId::Uffink3]);
        assert!(matches!(
            boundary(&s, CriterionId::Uffink3, 0.0),
            Err(Error::NoBoundary { .. })
        ));
    }

    #[test]
    fn neville() {
        let pts = [(0.1, 1.0 + 2.0 * 0.1 + 0.1 * 0.1), (0.2, 1.0 + 0.4 + 0.04), (0.4, 1.0 + 0.8 + 0.16)];
        assert!((neville_at_zero(&pts) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bipartite_noisy_limit() {
        let b = Behavior::isotropic(0.8, 2).unwrap();
        let lim = noisy_limit(&b, &NOISY_SWEEP).unwrap();
        assert!((lim.extrapolated_ratio - 1.28).abs() < 1e-5);
        assert!(lim.violated());
    }

    #[test]
    fn thresholds() {
        let e = isotropic_threshold(3, CriterionId::IcMulticopy, &EvalOptions::default())
            .unwrap()
            .unwrap();
        assert!((e - FRAC_1_SQRT_2).abs() < 1e-6);
        let opts = EvalOptions {
            epsilon_channel: 0.499,
            ..EvalOptions::default()
        };
        let e = isotropic_threshold(2, CriterionId::IcNoisy, &opts).unwrap().unwrap();
        assert!((e - FRAC_1_SQRT_2).abs() < 1e-3);
    }

    #[test]
    fn catalog_diff() {
        let cat = BoxCatalog {
            entries: vec![CatalogEntry {
                class_id: 45,
                representative: Behavior::box45(3).unwrap(),
            }],
            source: "test".into(),
        };
        let crit = [CriterionId::IcMulticopy, CriterionId::Uffink3];
        assert!(matches!(classify_catalog(&cat, &crit), Err(Error::MissingClasses(m)) if m.len() == 45));
        let c = classify_entries(&cat, &crit).unwrap();
        assert!(c.rows[0].violates(CriterionId::IcMulticopy));
        assert!(!c.rows[0].violates(CriterionId::Uffink3));
        let diff = table_diff(&c, &crit);
        assert!(!diff.matches());
        assert!(diff.rows.iter().all(|r| r.missing.is_empty() && r.unexpected.is_empty()));
        assert_eq!(diff.rows[0].unchecked.len(), 8);
        let text = diff.to_string();
        assert!(text.contains("no catalog entry"));
        assert!(c.to_table(&crit).contains("45"));
        assert!(classify_entries(&cat, &[CriterionId::IcMulti]).is_err());
    }
}
