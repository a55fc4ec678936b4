//! Command-line front end. [`run`] parses arguments, executes one command
//! and returns the process exit code.
//!
//! Exit codes: 0 on success, 1 when `--fail-on-violation` is set and some
//! criterion is violated, 2 on usage or input errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::behavior::{named_box, Behavior, BoxParams};
use crate::criteria::{self, CriterionId, CriterionReport, EvalOptions};
use crate::entropy::Channel;
use crate::error::{Error, Result};
use crate::format::num;
use crate::io::{self, BehaviorFile};
use crate::protocol::{self, ProtocolConfig};
use crate::scan::{self, BoundaryCurve, SliceSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "nsbox", version, about = "Non-signaling boxes and information-causality criteria")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON file providing defaults for any flag; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Behavior URI: builtin:box45[:N], builtin:isotropic:E[:N], builtin:pr,
    /// builtin:white[:N], builtin:detzero[:N] or file:PATH.
    #[arg(long = "box", global = true, value_name = "URI")]
    pub box_uri: Option<String>,

    /// Number of parties (checked against the loaded behavior).
    #[arg(long, global = true)]
    pub parties: Option<usize>,

    /// Criterion ids, comma separated, or `all`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub criterion: Vec<String>,

    /// Concatenation depth K.
    #[arg(long, global = true)]
    pub depth: Option<usize>,

    /// Receiver bit string for the concatenated protocol.
    #[arg(long, global = true)]
    pub z: Option<String>,

    /// Flip probability of the binary symmetric channel.
    #[arg(long, global = true)]
    pub epsilon_channel: Option<f64>,

    /// Slice weights of the deterministic generator, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub epsilon_slice: Vec<f64>,

    /// Grid step for scans and default boundary rays.
    #[arg(long, global = true)]
    pub grid_step: Option<f64>,

    /// Slice to scan; only `default` is built in.
    #[arg(long, global = true)]
    pub slice: Option<String>,

    /// Output file (default stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Box catalog file for `classify`.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Exit with status 1 if any reported criterion is violated.
    #[arg(long, global = true)]
    pub fail_on_violation: bool,

    /// Print the behavior (or protocol joint) as JSON instead of a summary.
    #[arg(long, global = true)]
    pub emit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check normalization, positivity and non-signaling.
    Validate,
    /// Summarize or emit a behavior.
    Box,
    /// Run the protocol and report success probabilities.
    Protocol,
    /// Evaluate criteria on a behavior.
    Eval,
    /// Success probability of the concatenated protocol.
    Concat,
    /// Evaluate criteria over the slice grid (CSV).
    Scan,
    /// Locate criterion boundaries on the slice.
    Boundary,
    /// Classify a box catalog and compare with the published table.
    Classify,
}

/// Defaults read from `--config`. Keys match the long flag names.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Config {
    #[serde(rename = "box")]
    pub box_uri: Option<String>,
    pub parties: Option<usize>,
    pub criterion: Option<Vec<String>>,
    pub depth: Option<usize>,
    pub z: Option<String>,
    pub epsilon_channel: Option<f64>,
    pub epsilon_slice: Option<Vec<f64>>,
    pub grid_step: Option<f64>,
    pub slice: Option<String>,
    pub out: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub format: Option<Format>,
    pub fail_on_violation: Option<bool>,
    pub emit: Option<bool>,
}

impl Cli {
    /// Fills unset flags from the config file.
    fn merged(mut self) -> Result<Self> {
        let Some(path) = &self.config else {
            return Ok(self);
        };
        let cfg: Config = serde_json::from_str(&fs::read_to_string(path)?)?;
        self.box_uri = self.box_uri.or(cfg.box_uri);
        self.parties = self.parties.or(cfg.parties);
        if self.criterion.is_empty() {
            self.criterion = cfg.criterion.unwrap_or_default();
        }
        self.depth = self.depth.or(cfg.depth);
        self.z = self.z.or(cfg.z);
        self.epsilon_channel = self.epsilon_channel.or(cfg.epsilon_channel);
        if self.epsilon_slice.is_empty() {
            self.epsilon_slice = cfg.epsilon_slice.unwrap_or_default();
        }
        self.grid_step = self.grid_step.or(cfg.grid_step);
        self.slice = self.slice.or(cfg.slice);
        self.out = self.out.or(cfg.out);
        self.catalog = self.catalog.or(cfg.catalog);
        self.format = self.format.or(cfg.format);
        self.fail_on_violation |= cfg.fail_on_violation.unwrap_or(false);
        self.emit |= cfg.emit.unwrap_or(false);
        Ok(self)
    }

    fn format(&self) -> Format {
        self.format.unwrap_or(Format::Text)
    }

    fn options(&self) -> EvalOptions {
        let d = EvalOptions::default();
        EvalOptions {
            depth: self.depth.unwrap_or(d.depth),
            epsilon_channel: self.epsilon_channel.unwrap_or(d.epsilon_channel),
        }
    }

    fn criteria(&self, parties: usize, default: &[CriterionId]) -> Result<Vec<CriterionId>> {
        if self.criterion.is_empty() {
            return Ok(default.to_vec());
        }
        if self.criterion.iter().any(|c| c == "all") {
            return Ok(CriterionId::ALL
                .into_iter()
                .filter(|c| c.supports(parties))
                .collect());
        }
        self.criterion.iter().map(|c| c.parse()).collect()
    }
}

fn parse_f64(text: &str, name: &'static str) -> Result<f64> {
    text.parse()
        .map_err(|_| Error::Structure(format!("`{text}` is not a number for {name}")))
}

fn parse_parties(text: Option<&str>, flag: Option<usize>) -> Result<usize> {
    match text {
        Some(t) => t
            .parse()
            .map_err(|_| Error::Structure(format!("`{t}` is not a party count"))),
        None => Ok(flag.unwrap_or(3)),
    }
}

/// Resolves a behavior URI. `file:` behaviors are validated unless
/// `checked` is false.
pub fn resolve_box(uri: &str, parties: Option<usize>, checked: bool) -> Result<Behavior> {
    let b = if let Some(path) = uri.strip_prefix("file:") {
        let file: BehaviorFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        if checked {
            file.to_behavior()?
        } else {
            file.to_unchecked()?
        }
    } else if let Some(spec) = uri.strip_prefix("builtin:") {
        let parts: Vec<&str> = spec.split(':').collect();
        match parts.as_slice() {
            ["pr"] => Behavior::pr_box(),
            ["isotropic", e] | ["isotropic", e, _] => {
                let n = parse_parties(parts.get(2).copied(), parties)?;
                Behavior::isotropic(parse_f64(e, "isotropic bias")?, n)?
            }
            [name] | [name, _] => {
                let n = parse_parties(parts.get(1).copied(), parties)?;
                named_box(name, BoxParams { parties: n, bias: None })?
            }
            _ => return Err(Error::UnknownBox(uri.to_string())),
        }
    } else {
        return Err(Error::UnknownBox(uri.to_string()));
    };
    if let Some(n) = parties {
        if n != b.parties() {
            return Err(Error::PartyMismatch {
                expected: n,
                found: b.parties(),
            });
        }
    }
    Ok(b)
}

fn require_box(cli: &Cli, checked: bool) -> Result<Behavior> {
    let uri = cli
        .box_uri
        .as_deref()
        .ok_or_else(|| Error::Structure("--box is required".into()))?;
    resolve_box(uri, cli.parties, checked)
}

fn slice_spec(cli: &Cli, criteria: Vec<CriterionId>) -> Result<SliceSpec> {
    match cli.slice.as_deref().unwrap_or("default") {
        "default" => {}
        other => return Err(Error::Structure(format!("unknown slice `{other}`"))),
    }
    let mut spec = SliceSpec::default_slice();
    spec.criteria = criteria;
    spec.options = cli.options();
    if let Some(step) = cli.grid_step {
        spec.grid_step = step;
    }
    spec.check()?;
    Ok(spec)
}

/// Output text plus whether any reported criterion was violated.
struct Outcome {
    text: String,
    violated: bool,
    invalid: bool,
}

impl Outcome {
    fn plain(text: String) -> Self {
        Self {
            text,
            violated: false,
            invalid: false,
        }
    }
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_string<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}

fn report_line(r: &CriterionReport) -> String {
    let mut line = format!(
        "{} lhs={} rhs={} margin={} violated={}",
        r.criterion,
        num(r.lhs),
        num(r.rhs),
        num(r.margin),
        r.violated
    );
    if let Some(b) = r.bound {
        let _ = write!(line, " bound={}", num(b));
    }
    if let Some(f) = &r.flag {
        let _ = write!(line, " flag={f}");
    }
    line
}

fn cmd_validate(cli: &Cli) -> Result<Outcome> {
    let b = require_box(cli, false)?;
    let report = b.validate();
    let text = match cli.format() {
        Format::Json => json_string(&serde_json::json!({
            "valid": report.is_valid(),
            "report": report.to_string(),
        })),
        _ if report.is_valid() => "valid\n".to_string(),
        _ => format!("invalid\n{report}\n"),
    };
    Ok(Outcome {
        text,
        violated: false,
        invalid: !report.is_valid(),
    })
}

fn cmd_box(cli: &Cli) -> Result<Outcome> {
    let b = require_box(cli, true)?;
    if cli.emit || cli.format() == Format::Json {
        return Ok(Outcome::plain(io::behavior_to_json(&b) + "\n"));
    }
    let (e1, e2) = protocol::biases(&b);
    let correlators: Vec<String> = b.correlators().into_iter().map(num).collect();
    let text = match cli.format() {
        Format::Csv => csv_string(
            &["parties", "e_one", "e_two", "correlators"],
            &[vec![
                b.parties().to_string(),
                num(e1),
                num(e2),
                correlators.join(" "),
            ]],
        )?,
        _ => format!(
            "parties={}\nE_I={}\nE_II={}\ncorrelators={}\n",
            b.parties(),
            num(e1),
            num(e2),
            correlators.join(" ")
        ),
    };
    Ok(Outcome::plain(text))
}

fn cmd_protocol(cli: &Cli) -> Result<Outcome> {
    let b = require_box(cli, true)?;
    let depth = cli.depth.unwrap_or(0);
    if depth > 0 {
        let profile = protocol::concat_success_profile(&b, depth)?;
        if cli.format() == Format::Json || cli.emit {
            return Ok(Outcome::plain(json_string(&profile)));
        }
        let rows: Vec<Vec<String>> = profile
            .per_choice
            .iter()
            .enumerate()
            .map(|(j, p)| vec![(j + 1).to_string(), num(*p)])
            .collect();
        return Ok(Outcome::plain(render_pairs(cli.format(), &["choice", "success"], &rows)?));
    }
    let mut cfg = ProtocolConfig::single_copy(b.parties());
    if let Some(e) = cli.epsilon_channel {
        cfg = cfg.with_channel(Channel::bsc(e)?);
    }
    let joint = protocol::single_copy_joint(&b, &cfg)?;
    if cli.emit {
        return Ok(Outcome::plain(joint.to_json() + "\n"));
    }
    let profile = protocol::success_profile(&joint)?;
    if cli.format() == Format::Json {
        return Ok(Outcome::plain(json_string(&profile)));
    }
    let rows: Vec<Vec<String>> = profile
        .per_choice
        .iter()
        .enumerate()
        .map(|(j, p)| vec![(j + 1).to_string(), num(*p)])
        .collect();
    let mut text = render_pairs(cli.format(), &["choice", "success"], &rows)?;
    if cli.format() == Format::Text {
        let ms: Vec<String> = (1..b.parties()).map(protocol::message_var).collect();
        let _ = writeln!(text, "H(messages)={}", num(joint.entropy(&ms)?));
    }
    Ok(Outcome::plain(text))
}

fn render_pairs(format: Format, header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    match format {
        Format::Csv => csv_string(header, rows),
        _ => Ok(rows
            .iter()
            .map(|r| {
                header
                    .iter()
                    .zip(r)
                    .map(|(h, v)| format!("{h}={v}"))
                    .collect::<Vec<_>>()
                    .join(" ")
                    + "\n"
            })
            .collect()),
    }
}

fn cmd_eval(cli: &Cli) -> Result<Outcome> {
    let b = require_box(cli, true)?;
    let all: Vec<CriterionId> = CriterionId::ALL
        .into_iter()
        .filter(|c| c.supports(b.parties()))
        .collect();
    let ids = cli.criteria(b.parties(), &all)?;
    let opts = cli.options();
    let reports = ids
        .iter()
        .map(|&c| criteria::evaluate(&b, c, &opts))
        .collect::<Result<Vec<_>>>()?;
    let violated = reports.iter().any(|r| r.violated);
    let text = match cli.format() {
        Format::Text => reports.iter().map(|r| report_line(r) + "\n").collect(),
        Format::Json => json_string(&reports),
        Format::Csv => csv_string(
            &["criterion", "lhs", "rhs", "margin", "violated", "flag"],
            &reports
                .iter()
                .map(|r| {
                    vec![
                        r.criterion.to_string(),
                        num(r.lhs),
                        num(r.rhs),
                        num(r.margin),
                        r.violated.to_string(),
                        r.flag.clone().unwrap_or_default(),
                    ]
                })
                .collect::<Vec<_>>(),
        )?,
    };
    Ok(Outcome {
        text,
        violated,
        invalid: false,
    })
}

#[derive(Serialize)]
struct ConcatRow {
    z: String,
    r: usize,
    simulated: f64,
    closed: f64,
}

fn cmd_concat(cli: &Cli) -> Result<Outcome> {
    let b = require_box(cli, true)?;
    let depth = cli
        .depth
        .ok_or_else(|| Error::Structure("--depth is required".into()))?;
    let strings = match &cli.z {
        Some(z) => vec![protocol::parse_bits(z)?],
        None => protocol::all_strings(depth),
    };
    let (e1, e2) = protocol::biases(&b);
    let rows = strings
        .iter()
        .map(|z| {
            let r = z.iter().filter(|&&v| v == 1).count();
            Ok(ConcatRow {
                z: z.iter().map(|v| char::from(b'0' + v)).collect(),
                r,
                simulated: protocol::concat_success_simulated(&b, depth, z)?,
                closed: protocol::concat_success_closed(e1, e2, depth, r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if cli.format() == Format::Json {
        return Ok(Outcome::plain(json_string(&rows)));
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.z.clone(), r.r.to_string(), num(r.simulated), num(r.closed)])
        .collect();
    Ok(Outcome::plain(render_pairs(
        cli.format(),
        &["z", "r", "simulated", "closed"],
        &table,
    )?))
}

fn cmd_scan(cli: &Cli) -> Result<Outcome> {
    let defaults = SliceSpec::default_slice().criteria;
    let spec = slice_spec(cli, cli.criteria(3, &defaults)?)?;
    let rows = scan::scan_slice(&spec)?;
    let violated = rows.iter().any(|r| r.violated);
    let text = if cli.format() == Format::Json {
        json_string(&rows)
    } else {
        let mut buf = Vec::new();
        scan::write_scan_csv(&rows, &mut buf)?;
        String::from_utf8(buf).expect("csv output is utf-8")
    };
    Ok(Outcome {
        text,
        violated,
        invalid: false,
    })
}

fn cmd_boundary(cli: &Cli) -> Result<Outcome> {
    let ids = cli.criteria(3, &[CriterionId::IcMulti, CriterionId::IcMulticopy])?;
    let base = slice_spec(cli, ids.clone())?;
    let epsilons = if cli.epsilon_slice.is_empty() {
        base.grid()
    } else {
        cli.epsilon_slice.clone()
    };
    let mut labeled: Vec<(String, BoundaryCurve)> = Vec::new();
    for &c in &ids {
        if c == CriterionId::IcNoisy && cli.epsilon_channel.is_none() {
            for e in scan::NOISY_SWEEP {
                let mut spec = base.clone();
                spec.options.epsilon_channel = e;
                labeled.push((format!("{c}@{}", num(e)), scan::boundary_curve(&spec, c, &epsilons)?));
            }
        } else {
            labeled.push((c.to_string(), scan::boundary_curve(&base, c, &epsilons)?));
        }
    }
    let text = match cli.format() {
        Format::Json => json_string(
            &labeled
                .iter()
                .map(|(l, c)| serde_json::json!({ "label": l, "curve": c }))
                .collect::<Vec<_>>(),
        ),
        Format::Csv => {
            let mut rows = Vec::new();
            for (label, c) in &labeled {
                for (e, p) in &c.points {
                    let (g, w) = match p {
                        Some(p) => (num(p.gamma_star), num(p.bracket_width)),
                        None => (String::new(), String::new()),
                    };
                    rows.push(vec![label.clone(), num(*e), g, w]);
                }
            }
            csv_string(&scan::BOUNDARY_HEADER, &rows)?
        }
        Format::Text => {
            let mut out = String::new();
            for (label, c) in &labeled {
                for (e, p) in &c.points {
                    match p {
                        Some(p) => writeln!(
                            out,
                            "{label} epsilon={} gamma_star={} bracket_width={}",
                            num(*e),
                            num(p.gamma_star),
                            num(p.bracket_width)
                        ),
                        None => writeln!(out, "{label} epsilon={} no boundary on ray", num(*e)),
                    }
                    .expect("writing to a string");
                }
            }
            out
        }
    };
    Ok(Outcome::plain(text))
}

fn cmd_classify(cli: &Cli) -> Result<Outcome> {
    let path = cli
        .catalog
        .as_ref()
        .ok_or_else(|| Error::Structure("--catalog is required".into()))?;
    let catalog = io::load_catalog(path)?;
    let ids = cli.criteria(3, &[CriterionId::IcMulticopy, CriterionId::Uffink3])?;
    let classification = scan::classify_entries(&catalog, &ids)?;
    let diff = scan::table_diff(&classification, &ids);
    let violated = classification.rows.iter().any(|r| r.reports.iter().any(|x| x.violated));
    let text = match cli.format() {
        Format::Json => json_string(&serde_json::json!({
            "classification": classification,
            "diff": diff,
            "matches": diff.matches(),
        })),
        Format::Csv => {
            let mut rows = Vec::new();
            for r in &classification.rows {
                for x in &r.reports {
                    rows.push(vec![
                        r.class_id.to_string(),
                        x.criterion.to_string(),
                        num(x.lhs),
                        num(x.rhs),
                        x.violated.to_string(),
                    ]);
                }
            }
            csv_string(&["class", "criterion", "lhs", "rhs", "violated"], &rows)?
        }
        Format::Text => format!("{}\n{diff}", classification.to_table(&ids)),
    };
    Ok(Outcome {
        text,
        violated,
        invalid: false,
    })
}

fn execute(cli: &Cli) -> Result<Outcome> {
    match cli.command {
        Command::Validate => cmd_validate(cli),
        Command::Box => cmd_box(cli),
        Command::Protocol => cmd_protocol(cli),
        Command::Eval => cmd_eval(cli),
        Command::Concat => cmd_concat(cli),
        Command::Scan => cmd_scan(cli),
        Command::Boundary => cmd_boundary(cli),
        Command::Classify => cmd_classify(cli),
    }
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let result = cli.merged().and_then(|cli| {
        let outcome = execute(&cli)?;
        write_output(cli.out.as_deref(), &outcome.text, stdout)?;
        Ok((outcome, cli.fail_on_violation))
    });
    match result {
        Ok((o, _)) if o.invalid => EXIT_INPUT,
        Ok((o, true)) if o.violated => EXIT_VIOLATION,
        Ok(_) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_uris() {
        assert_eq!(resolve_box("builtin:box45", None, true).unwrap().parties(), 3);
        assert_eq!(resolve_box("builtin:box45:4", None, true).unwrap().parties(), 4);
        assert_eq!(resolve_box("builtin:box45", Some(4), true).unwrap().parties(), 4);
        assert_eq!(resolve_box("builtin:pr", None, true).unwrap(), Behavior::pr_box());
        let iso = resolve_box("builtin:isotropic:0.5:3", None, true).unwrap();
        assert_eq!(iso, Behavior::isotropic(0.5, 3).unwrap());
        assert!(resolve_box("builtin:white:2", Some(3), true).is_err());
        assert!(resolve_box("builtin:nope", None, true).is_err());
        assert!(resolve_box("http://x", None, true).is_err());
        assert!(resolve_box("builtin:isotropic:x:3", None, true).is_err());
    }
}
