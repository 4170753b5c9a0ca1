//! Command-line front end: configuration, commands and report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::contact::ContactModel;
use crate::cr::{tw_closed_form_n1, CRFrame};
use crate::error::{Error, Result};
use crate::forms::ChartPoint;
use crate::sampling;
use crate::spectral::{self, TestFunction};
use crate::suites::{self, Check, SuiteOptions, SuiteReport};
use crate::symmetry::LieAction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Everything a run depends on. Identical configs give identical reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: String,
    pub action: Option<String>,
    pub seed: u64,
    pub sample_count: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub quad_order: usize,
    pub truncation: u32,
    pub weights: (i64, i64),
    pub k_max: i64,
    pub td_debug_one: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: "s3_hopf".into(),
            action: None,
            seed: 7,
            sample_count: 30,
            tolerances: BTreeMap::new(),
            quad_order: 8,
            truncation: 14,
            weights: (-12, 12),
            k_max: 12,
            td_debug_one: false,
            out: None,
            format: Format::Text,
        }
    }
}

pub fn parse_weights(s: &str) -> Result<(i64, i64)> {
    let (a, b) = s.split_once("..").ok_or_else(|| Error::Config(format!("weight range '{s}' is not A..B")))?;
    let p = |x: &str| x.trim().parse::<i64>().map_err(|_| Error::Config(format!("bad weight '{x}'")));
    Ok((p(a)?, p(b)?))
}

/// `KEY=VAL` sets one tolerance; a bare value sets all of them.
pub fn parse_tolerance(s: &str) -> Result<(String, f64)> {
    let (k, v) = match s.split_once('=') {
        Some((k, v)) => (k.trim().to_string(), v.trim()),
        None => ("all".to_string(), s.trim()),
    };
    let v: f64 = v.parse().map_err(|_| Error::Config(format!("bad tolerance '{s}'")))?;
    if !(v > 0.0) {
        return Err(Error::Config(format!("tolerance for '{k}' must be positive")));
    }
    Ok((k, v))
}

impl RunConfig {
    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("bad value '{value}' for '{key}'"));
        match key {
            "model" => self.model = value.into(),
            "action" => self.action = Some(value.into()),
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "samples" | "sample_count" => self.sample_count = value.parse().map_err(|_| bad())?,
            "quad_order" => self.quad_order = value.parse().map_err(|_| bad())?,
            "N" | "truncation" => self.truncation = value.parse().map_err(|_| bad())?,
            "weights" => self.weights = parse_weights(value)?,
            "k_max" => self.k_max = value.parse().map_err(|_| bad())?,
            "td_debug_one" => self.td_debug_one = value.parse().map_err(|_| bad())?,
            "out" => self.out = Some(value.into()),
            "format" => self.format = Format::from_str(value, true).map_err(|_| bad())?,
            k if k.starts_with("tol.") => {
                let (_, v) = parse_tolerance(value)?;
                self.tolerances.insert(k[4..].to_string(), v);
            }
            "tol" => {
                let (k, v) = parse_tolerance(value)?;
                self.tolerances.insert(k, v);
            }
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn suite_options(&self) -> SuiteOptions {
        SuiteOptions { seed: self.seed, samples: self.sample_count, tolerances: self.tolerances.clone() }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub tool_version: String,
}

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Report {
    pub command: String,
    pub config: RunConfig,
    pub provenance: Provenance,
    pub suites: Vec<SuiteReport>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl Report {
    fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            provenance: Provenance {
                seed: config.seed,
                config_hash: config.hash(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
            },
            suites: vec![],
            tables: vec![],
            notes: vec![],
            pass: true,
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.suites.iter().all(|s| s.pass());
        self
    }

    pub fn failures(&self) -> Vec<(&str, &Check)> {
        self.suites
            .iter()
            .flat_map(|s| s.checks.iter().filter(|c| !c.pass).map(move |c| (s.suite.as_str(), c)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Tables as CSV, separated by a blank line; the provenance is a comment line.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# seed={} config_hash={} version={}\n",
            self.provenance.seed, self.provenance.config_hash, self.provenance.tool_version
        );
        let mut first = true;
        for t in &self.tables {
            if !first {
                s.push('\n');
            }
            first = false;
            s.push_str(&t.to_csv());
        }
        if self.tables.is_empty() {
            s.push_str(&suite_table(&self.suites).to_csv());
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} (seed {}, config {}, version {})",
            self.command,
            self.provenance.seed,
            &self.provenance.config_hash[..12],
            self.provenance.tool_version
        );
        for suite in &self.suites {
            let _ = writeln!(s, "[{}] {} on {}", if suite.pass() { "PASS" } else { "FAIL" }, suite.suite, suite.model);
            for c in &suite.checks {
                let rel = if c.lower_bound { ">=" } else { "<=" };
                let _ = writeln!(
                    s,
                    "  {:<4} {:<36} {:>12.3e} {rel} {:.1e}  (n={})",
                    if c.pass { "ok" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance,
                    c.samples
                );
            }
            for n in &suite.notices {
                let _ = writeln!(s, "  note: {n}");
            }
        }
        for t in &self.tables {
            let _ = writeln!(s, "{}:", t.name);
            let widths: Vec<usize> = (0..t.header.len())
                .map(|j| t.rows.iter().map(|r| r[j].len()).chain([t.header[j].len()]).max().unwrap_or(0))
                .collect();
            let line = |cells: &[String]| {
                cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
            };
            let _ = writeln!(s, "  {}", line(&t.header));
            for r in &t.rows {
                let _ = writeln!(s, "  {}", line(r));
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "result: {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
            Format::Text => self.to_text(),
        }
    }
}

fn suite_table(suites: &[SuiteReport]) -> Table {
    let mut t = Table::new("checks", &["suite", "model", "check", "value", "tolerance", "pass"]);
    for s in suites {
        for c in &s.checks {
            t.rows.push(vec![
                s.suite.clone(),
                s.model.clone(),
                c.name.clone(),
                format!("{:.6e}", c.value),
                format!("{:.1e}", c.tolerance),
                c.pass.to_string(),
            ]);
        }
    }
    t
}

fn e(x: f64) -> String {
    format!("{x:.9e}")
}

fn sample_points(model: &ContactModel, cfg: &RunConfig, count: usize) -> Vec<ChartPoint> {
    sampling::points(&mut sampling::rng(cfg.seed), &model.chart, count)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Report> {
    let model = ContactModel::by_name(&cfg.model)?;
    if let Some(a) = &cfg.action {
        LieAction::by_name(&model, a)?;
    }
    let mut rep = Report::new("verify", cfg);
    rep.suites = suites::verify_model(&model, &cfg.suite_options())?;
    Ok(rep.finish())
}

pub fn cmd_reeb(cfg: &RunConfig) -> Result<Report> {
    let model = ContactModel::by_name(&cfg.model)?;
    let mut rep = Report::new("reeb", cfg);
    let mut t = Table::new("reeb_field", &["point", "xi", "condition"]);
    for p in sample_points(&model, cfg, cfg.sample_count.min(10)) {
        let xi = model.reeb_field(&p)?;
        let cond = model.condition(&p);
        t.rows.push(vec![fmt_vec(&p.coords), fmt_vec(&xi), e(cond)]);
    }
    rep.tables.push(t);
    rep.suites.push(suites::contact_core(&model, &cfg.suite_options())?);
    Ok(rep.finish())
}

fn fmt_vec(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:.9e}")).collect::<Vec<_>>().join(" "))
}

pub fn cmd_bracket(cfg: &RunConfig) -> Result<Report> {
    let model = ContactModel::by_name(&cfg.model)?;
    let mut rep = Report::new("bracket", cfg);
    let mut rng = sampling::rng(cfg.seed);
    let dim = model.dim();
    let f = sampling::field(&mut rng, dim);
    let g = sampling::field(&mut rng, dim);
    let mut t = Table::new("jacobi_bracket", &["point", "bracket", "item1", "item2", "item3", "item4"]);
    for p in sample_points(&model, cfg, cfg.sample_count.min(10)) {
        let b = model.jacobi_bracket(&f, &g, &p)?;
        let r = model.hamiltonian_identities(&f, &g, &p)?;
        t.rows.push(vec![fmt_vec(&p.coords), e(b), e(r[0]), e(r[1]), e(r[2]), e(r[3])]);
    }
    rep.tables.push(t);
    rep.suites.push(suites::contact_core(&model, &cfg.suite_options())?);
    Ok(rep.finish())
}

pub fn cmd_momentum(cfg: &RunConfig) -> Result<Report> {
    let model = ContactModel::by_name(&cfg.model)?;
    let names: Vec<String> = match &cfg.action {
        Some(a) => vec![a.clone()],
        None => LieAction::names_for(&model).iter().map(|s| s.to_string()).collect(),
    };
    let mut rep = Report::new("momentum", cfg);
    let mut t = Table::new("momentum", &["action", "generator", "point", "phi"]);
    let pts = sample_points(&model, cfg, cfg.sample_count.min(5));
    for name in &names {
        let a = LieAction::by_name(&model, name)?;
        for i in 0..a.rank() {
            let phi = a.momentum(&model, i);
            for p in &pts {
                t.rows.push(vec![name.clone(), i.to_string(), fmt_vec(&p.coords), e(phi.eval(&p.coords))]);
            }
        }
    }
    rep.tables.push(t);
    rep.suites.push(suites::symmetry_momentum(&model, &cfg.suite_options())?);
    Ok(rep.finish())
}

pub fn cmd_tw(cfg: &RunConfig) -> Result<Report> {
    let model = ContactModel::by_name(&cfg.model)?;
    let mut rep = Report::new("tw", cfg);
    if let Ok(frame) = CRFrame::for_model(&model) {
        let mut t = Table::new("connection_form", &["point", "omega(Z)", "omega(Zbar)", "omega(xi)"]);
        for p in sample_points(&model, cfg, cfg.sample_count.min(5)) {
            let w = tw_closed_form_n1(&frame.at(&p)?);
            let c = |z: num_complex::Complex64| format!("{:.9e}{:+.9e}i", z.re, z.im);
            t.rows.push(vec![fmt_vec(&p.coords), c(w[0]), c(w[1]), c(w[2])]);
        }
        rep.tables.push(t);
    }
    rep.suites.push(suites::cr_structure(&model, &cfg.suite_options())?);
    Ok(rep.finish())
}

fn require_s3(cfg: &RunConfig) -> Result<()> {
    if ContactModel::by_name(&cfg.model)?.name != "s3_hopf" {
        return Err(Error::Config(format!("spectral commands need model s3_hopf, got {}", cfg.model)));
    }
    Ok(())
}

fn weight_list(cfg: &RunConfig) -> Vec<i64> {
    (cfg.weights.0..=cfg.weights.1).collect()
}

fn margin(m: Option<f64>) -> String {
    match m {
        Some(v) if v.is_infinite() => "inf".into(),
        Some(v) => format!("{v:.3e}"),
        None => "none".into(),
    }
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Report> {
    require_s3(cfg)?;
    let mut rep = Report::new("spectrum", cfg);
    let ch = spectral::character(cfg.truncation, cfg.weights.0, cfg.weights.1);
    let mut t = Table::new("spectrum", &["weight", "N", "dim_h00", "dim_h01", "m", "stable", "singular_value_margin"]);
    for w in &ch.entries {
        t.rows.push(vec![
            w.weight.to_string(),
            w.degree_cap.to_string(),
            w.dim_h00.to_string(),
            w.dim_h01.to_string(),
            w.m.map_or("".into(), |m| m.to_string()),
            w.stable.to_string(),
            margin(w.singular_value_margin),
        ]);
    }
    rep.tables.push(t);
    let gaps = ch.gaps();
    if !gaps.is_empty() {
        rep.notes.push(format!("unstable weights at N={} vs N+2: {gaps:?}", cfg.truncation));
    }
    for n in weight_list(cfg) {
        let kr = spectral::kohn_rossi_multiplicities(cfg.truncation, n);
        if !kr.near_threshold.is_empty() {
            rep.notes.push(format!("weight {n}: singular values near threshold {:?}", kr.near_threshold));
        }
    }
    rep.notes.push(format!("rank threshold {:.0e} relative to the largest singular value", spectral::RANK_THRESHOLD));
    let weights = weight_list(cfg);
    if !weights.is_empty() {
        rep.suites.push(suites::spectral_invariants(cfg.truncation, &weights, &cfg.suite_options())?);
    }
    Ok(rep.finish())
}

pub fn cmd_character(cfg: &RunConfig) -> Result<Report> {
    require_s3(cfg)?;
    let mut rep = Report::new("character", cfg);
    let ch = spectral::character(cfg.truncation, cfg.weights.0, cfg.weights.1);
    let mut t = Table::new("character", &["weight", "m"]);
    for w in &ch.entries {
        if let Some(m) = w.m {
            t.rows.push(vec![w.weight.to_string(), m.to_string()]);
        }
    }
    rep.tables.push(t);
    // Fitted pattern, reported without assertion.
    let fits = ch.entries.iter().filter(|w| w.m == Some(w.weight + 1)).count();
    let stable = ch.entries.iter().filter(|w| w.m.is_some()).count();
    rep.notes.push(format!("m_n = n + 1 holds at {fits} of {stable} stable weights"));
    let gaps = ch.gaps();
    if !gaps.is_empty() {
        rep.notes.push(format!("gaps (unstable weights): {gaps:?}"));
    }
    Ok(rep.finish())
}

pub fn cmd_index_pair(cfg: &RunConfig) -> Result<Report> {
    require_s3(cfg)?;
    let mut rep = Report::new("index-pair", cfg);
    let opts = cfg.suite_options();
    let ch = spectral::character(cfg.truncation, -cfg.k_max, cfg.k_max);
    let gaps = ch.gaps();
    if !gaps.is_empty() {
        rep.notes.push(format!("character has unstable weights {gaps:?}; they are left out of the sum"));
    }
    let mut suite = SuiteReport { suite: "index_pairing".into(), model: "s3_hopf".into(), checks: vec![], notices: vec![] };
    let mut t = Table::new(
        "pairings",
        &["bump", "spectral_re", "spectral_im", "formula_re", "formula_im", "gap_abs", "gap_rel", "monotone"],
    );
    let mut conv = Table::new("convergence", &["bump", "K", "gap"]);
    let mut log = vec![];
    for (i, phi) in TestFunction::builtin().iter().enumerate() {
        let r = spectral::index_pairing(&ch, phi, cfg.k_max, cfg.td_debug_one, cfg.quad_order)?;
        t.rows.push(vec![
            i.to_string(),
            e(r.spectral.re),
            e(r.spectral.im),
            e(r.formula.re),
            e(r.formula.im),
            e(r.gap_abs),
            e(r.gap_rel),
            r.monotone.to_string(),
        ]);
        for (k, g) in &r.convergence {
            conv.rows.push(vec![i.to_string(), k.to_string(), e(*g)]);
        }
        if cfg.td_debug_one {
            let oracle = spectral::delta_prime_oracle(phi);
            let tol = opts.tol("td_one_oracle", 1e-10);
            let v = (r.formula - oracle).norm();
            suite.checks.push(Check {
                name: format!("td_one_oracle_bump{i}"),
                value: v,
                tolerance: tol,
                lower_bound: false,
                samples: 1,
                pass: v <= tol,
            });
        } else {
            let tol = opts.tol("pairing_gap", 1e-2);
            suite.checks.push(Check {
                name: format!("pairing_gap_bump{i}"),
                value: r.gap_rel,
                tolerance: tol,
                lower_bound: false,
                samples: 1,
                pass: r.gap_rel <= tol,
            });
            suite.checks.push(Check {
                name: format!("convergence_monotone_bump{i}"),
                value: if r.monotone { 0.0 } else { 1.0 },
                tolerance: 0.5,
                lower_bound: false,
                samples: r.convergence.len(),
                pass: r.monotone,
            });
        }
        log = r.convention_log;
    }
    if cfg.td_debug_one {
        suite.notices.push("Td == 1 debug mode: formula side compared with the analytic delta-prime pairing".into());
    }
    rep.suites.push(suite);
    rep.tables.push(t);
    rep.tables.push(conv);

    // Support sweep: reported, not asserted.
    let mut sweep = Table::new("support_sweep", &["support", "gap_abs", "gap_rel"]);
    for support in [3.0, 2.0, 1.5, 1.0, 0.75] {
        let phi = TestFunction::builtin()[0].with_support(support);
        let r = spectral::index_pairing(&ch, &phi, cfg.k_max, cfg.td_debug_one, cfg.quad_order)?;
        sweep.rows.push(vec![format!("{support}"), e(r.gap_abs), e(r.gap_rel)]);
    }
    rep.tables.push(sweep);
    rep.notes.extend(log);
    Ok(rep.finish())
}

#[derive(Parser, Debug)]
#[command(name = "contactq", version, about = "Contact, CR and index computations on model manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Run every property suite applicable to the model.
    Verify,
    /// Reeb field at sample points.
    Reeb,
    /// Jacobi bracket and Hamiltonian identities.
    Bracket,
    /// Momentum map of registered actions.
    Momentum,
    /// Tanaka-Webster connection.
    Tw,
    /// Kohn-Rossi multiplicities per weight on S³.
    Spectrum,
    /// Weighted character table on S³.
    Character,
    /// Spectral and formula pairings against the built-in bumps.
    IndexPair,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Config file with `key = value` lines; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub action: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// `KEY=VAL`, or a bare value applied to every check.
    #[arg(long, global = true)]
    pub tol: Vec<String>,
    /// Degree truncation of the polynomial basis.
    #[arg(short = 'N', global = true)]
    pub truncation: Option<u32>,
    /// Weight range `A..B`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub weights: Option<String>,
    #[arg(long, global = true)]
    pub k_max: Option<i64>,
    #[arg(long, global = true)]
    pub quad_order: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Replace the Todd form by 1 on the formula side.
    #[arg(long, global = true)]
    pub td_debug_one: bool,
}

impl Flags {
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file_text(&std::fs::read_to_string(path)?)?;
        }
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        if let Some(a) = &self.action {
            cfg.action = Some(a.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.samples {
            cfg.sample_count = s;
        }
        for t in &self.tol {
            let (k, v) = parse_tolerance(t)?;
            cfg.tolerances.insert(k, v);
        }
        if let Some(n) = self.truncation {
            cfg.truncation = n;
        }
        if let Some(w) = &self.weights {
            cfg.weights = parse_weights(w)?;
        }
        if let Some(k) = self.k_max {
            cfg.k_max = k;
        }
        if let Some(q) = self.quad_order {
            cfg.quad_order = q;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if self.td_debug_one {
            cfg.td_debug_one = true;
        }
        Ok(cfg)
    }
}

pub fn run_command(command: Command, cfg: &RunConfig) -> Result<Report> {
    match command {
        Command::Verify => cmd_verify(cfg),
        Command::Reeb => cmd_reeb(cfg),
        Command::Bracket => cmd_bracket(cfg),
        Command::Momentum => cmd_momentum(cfg),
        Command::Tw => cmd_tw(cfg),
        Command::Spectrum => cmd_spectrum(cfg),
        Command::Character => cmd_character(cfg),
        Command::IndexPair => cmd_index_pair(cfg),
    }
}

/// Run and emit; returns the process exit code (0 pass, 1 failed checks, 2 usage error).
pub fn main_with(cli: Cli) -> i32 {
    let cfg = match cli.opts.to_config() {
        Ok(c) => c,
        Err(err) => {
            eprintln!("error: {err}");
            return 2;
        }
    };
    let report = match run_command(cli.command, &cfg) {
        Ok(r) => r,
        Err(err) => {
            eprintln!("error: {err}");
            return 2;
        }
    };
    match &cfg.out {
        Some(path) => {
            if let Err(err) = std::fs::write(path, report.render(cfg.format)) {
                eprintln!("error: cannot write {}: {err}", path.display());
                return 2;
            }
            print!("{}", report.to_text());
        }
        None => print!("{}", report.render(cfg.format)),
    }
    if report.pass {
        0
    } else {
        for (suite, c) in report.failures() {
            eprintln!("failed: {suite}/{} value {:.3e} tolerance {:.1e}", c.name, c.value, c.tolerance);
        }
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(model: &str) -> RunConfig {
        RunConfig { model: model.into(), sample_count: 4, ..RunConfig::default() }
    }

    #[test]
    fn config_file_and_overrides() {
        let mut c = RunConfig::default();
        c.apply_file_text("model = heisenberg # comment\nseed = 11\ntol.d_squared = 1e-9\nweights = -3..4\n").unwrap();
        assert_eq!(c.model, "heisenberg");
        assert_eq!(c.seed, 11);
        assert_eq!(c.weights, (-3, 4));
        assert_eq!(c.tolerances["d_squared"], 1e-9);
        assert!(c.apply_file_text("tol.x = -1").is_err());
        assert!(c.apply_file_text("nonsense = 1").is_err());
        assert_eq!(parse_tolerance("1e-30").unwrap(), ("all".into(), 1e-30));
    }

    #[test]
    fn reports_are_deterministic() {
        let a = cmd_verify(&cfg("heisenberg")).unwrap();
        let b = cmd_verify(&cfg("heisenberg")).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.pass);
        assert!(a.to_json().contains(&a.provenance.config_hash));
    }

    #[test]
    fn unknown_model_is_an_error() {
        assert!(cmd_verify(&cfg("klein_bottle")).is_err());
    }

    #[test]
    fn empty_weight_range_gives_header_only() {
        let mut c = cfg("s3_hopf");
        c.weights = (1, 0);
        let r = cmd_spectrum(&c).unwrap();
        assert!(r.pass);
        let csv = r.tables[0].to_csv();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("weight,N,dim_h00"));
    }

    #[test]
    fn truncation_too_small_is_flagged() {
        let mut c = cfg("s3_hopf");
        c.truncation = 4;
        c.weights = (5, 5);
        let r = cmd_spectrum(&c).unwrap();
        assert_eq!(r.tables[0].rows[0][5], "false");
        assert!(r.notes.iter().any(|n| n.contains("unstable")));
    }

    #[test]
    fn spectrum_values() {
        let mut c = cfg("s3_hopf");
        c.truncation = 12;
        c.weights = (-6, 6);
        let r = cmd_spectrum(&c).unwrap();
        let ms: Vec<&str> = r.tables[0].rows.iter().map(|row| row[4].as_str()).collect();
        assert_eq!(&ms[6..12], &["1", "2", "3", "4", "5", "6"]);
        assert!(r.pass);
    }
}
