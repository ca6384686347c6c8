//! Command-line surface and CSV emitters.
//!
//! Sweep commands write CSV to `--out`, to `$WEAK_TELEPORT_OUT_DIR/<command>.csv`
//! when that variable is set, or to stdout otherwise. Report commands always
//! print to stdout and additionally write CSV when a destination is given.

use std::env;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::povm::{validate, PovmFamily, PovmKind};
use crate::protocol::{run_round, run_round_mc, CorrectionSet};
use crate::recycle::{mrn, mrn_generic, BoundaryScanner, ScanVariable, Strictness};
use crate::states::{bell_state, materialize, ResourceSpec};

pub const OUT_DIR_ENV: &str = "WEAK_TELEPORT_OUT_DIR";

const VERSION: &str = env!("CARGO_PKG_VERSION");
const MC_SIGMAS: f64 = 3.0;
const COMPLETENESS_TOL: f64 = 1e-13;
const PSD_TOL: f64 = 1e-12;
/// Fine enough that 4-decimal rounding of every boundary is unambiguous.
const TABLE_TOL: f64 = 1e-9;

#[derive(Debug, Parser, Serialize)]
#[command(name = "weak-teleport", version, about = "Resource reuse in teleportation with unsharp Bell measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// CSV destination file.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,

    /// Round CSV values to 4 decimals for table-style output.
    #[arg(long, global = true)]
    pub round4: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Werner,
    PureChi,
    XState,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ResourceArgs {
    #[arg(long, value_enum, default_value = "werner")]
    pub family: Family,
    /// Werner mixing probability.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Schmidt weight of the pure component.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// X-state mixing probability.
    #[arg(long)]
    pub q: Option<f64>,
}

impl ResourceArgs {
    pub fn spec(&self) -> Result<ResourceSpec> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Domain(format!("--{name} is required for this family")))
        };
        match self.family {
            Family::Werner => ResourceSpec::werner(self.p),
            Family::PureChi => ResourceSpec::pure_chi(need(self.alpha, "alpha")?),
            Family::XState => ResourceSpec::x_state(need(self.alpha, "alpha")?, need(self.q, "q")?),
        }
    }
}

fn parse_povm(s: &str) -> std::result::Result<PovmKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_strictness(s: &str) -> std::result::Result<Strictness, String> {
    match s {
        "strict" => Ok(Strictness::Strict),
        "at-least" => Ok(Strictness::AtLeast),
        _ => Err(format!("unknown strictness '{s}' (expected strict or at-least)")),
    }
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Run one round and report fidelity and the effective resource.
    Round {
        #[command(flatten)]
        resource: ResourceArgs,
        #[arg(long, value_parser = parse_povm, default_value = "depolarized")]
        povm: PovmKind,
        #[arg(long)]
        lambda: f64,
    },
    /// Trace repeated rounds at a fixed fidelity target.
    Mrn {
        #[command(flatten)]
        resource: ResourceArgs,
        #[arg(long)]
        target_f: f64,
        #[arg(long, value_parser = parse_strictness, default_value = "strict")]
        strictness: Strictness,
        /// Use the full round engine instead of closed forms.
        #[arg(long)]
        generic: bool,
    },
    /// MRN ranges over the per-round fidelity for a Bell resource.
    Table1 {
        #[arg(long, default_value_t = TABLE_TOL)]
        tol: f64,
    },
    /// MRN ranges over the Schmidt weight at fidelity 2/3.
    Table2 {
        #[arg(long, default_value_t = TABLE_TOL)]
        tol: f64,
    },
    /// Concurrence after one round on a Bell resource versus sharpness.
    FigEnt {
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// MRN versus the per-round fidelity target.
    FigMrnF {
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// MRN versus the Schmidt weight of a pure resource.
    FigMrnAlpha {
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = 2.0 / 3.0)]
        target_f: f64,
    },
    /// Check completeness, positivity and the projective limit.
    ValidatePovm {
        /// Family to check; all families when omitted.
        #[arg(long, value_parser = parse_povm)]
        povm: Option<PovmKind>,
        /// Sharpness to check; 0.05, 0.10, ..., 1.0 when omitted.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Compare the exact fidelity with a Haar Monte-Carlo estimate.
    McCheck {
        #[command(flatten)]
        resource: ResourceArgs,
        #[arg(long, value_parser = parse_povm, default_value = "depolarized")]
        povm: PovmKind,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Round { .. } => "round",
            Command::Mrn { .. } => "mrn",
            Command::Table1 { .. } => "table1",
            Command::Table2 { .. } => "table2",
            Command::FigEnt { .. } => "fig-ent",
            Command::FigMrnF { .. } => "fig-mrn-f",
            Command::FigMrnAlpha { .. } => "fig-mrn-alpha",
            Command::ValidatePovm { .. } => "validate-povm",
            Command::McCheck { .. } => "mc-check",
        }
    }
}

/// First 16 hex digits of the SHA-256 of the serialized command.
pub fn config_hash(cli: &Cli) -> String {
    let json = serde_json::to_string(cli).expect("config serializes");
    Sha256::digest(json.as_bytes())
        .iter()
        .take(8)
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Formats with 12 significant digits and no trailing zeros.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Which end of a reported interval a value is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// Lower end of an interior interval, rounded up.
    Lower,
    /// Upper end of an interior interval, rounded down.
    Upper,
    /// End of the scan domain, rounded down.
    Domain,
    /// Plain value, rounded to nearest.
    Nearest,
}

/// Rounds to 4 decimals so that reported intervals stay inside the exact
/// ones. Values within 1e-8 of a 4-decimal grid point snap to it.
pub fn fmt_round4(x: f64, bound: Bound) -> String {
    let scaled = x * 1e4;
    let near = scaled.round();
    let r = if (scaled - near).abs() < 1e-4 {
        near
    } else {
        match bound {
            Bound::Lower => scaled.ceil(),
            Bound::Upper | Bound::Domain => scaled.floor(),
            Bound::Nearest => near,
        }
    };
    let s = format!("{:.4}", r / 1e4);
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

struct CsvWriter {
    round4: bool,
    text: String,
}

impl CsvWriter {
    fn new(cli: &Cli) -> Self {
        let mut text = String::new();
        let _ = writeln!(
            text,
            "# weak-teleport v{VERSION} config={}",
            config_hash(cli)
        );
        let _ = writeln!(text, "# command={}", cli.command.name());
        Self {
            round4: cli.round4,
            text,
        }
    }

    fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    fn header(&mut self, cols: &[&str]) {
        let _ = writeln!(self.text, "{}", cols.join(","));
    }

    fn num(&self, x: f64, bound: Bound) -> String {
        if self.round4 {
            fmt_round4(x, bound)
        } else {
            fmt_sig(x)
        }
    }

    fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }
}

fn destination(cli: &Cli) -> Option<PathBuf> {
    cli.out.clone().or_else(|| {
        env::var_os(OUT_DIR_ENV).map(|dir| PathBuf::from(dir).join(format!("{}.csv", cli.command.name())))
    })
}

fn emit(cli: &Cli, csv: CsvWriter, stdout: &mut dyn Write, fallback_stdout: bool) -> Result<()> {
    match destination(cli) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, csv.text)?;
            writeln!(stdout, "wrote {}", path.display())?;
        }
        None if fallback_stdout => stdout.write_all(csv.text.as_bytes())?,
        None => {}
    }
    Ok(())
}

/// Runs a parsed command. Returns `Ok(false)` when a check fails.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<bool> {
    match &cli.command {
        Command::Round {
            resource,
            povm,
            lambda,
        } => cmd_round(cli, resource, *povm, *lambda, stdout),
        Command::Mrn {
            resource,
            target_f,
            strictness,
            generic,
        } => cmd_mrn(cli, resource, *target_f, *strictness, *generic, stdout),
        Command::Table1 { tol } => cmd_table1(cli, *tol, stdout),
        Command::Table2 { tol } => cmd_table2(cli, *tol, stdout),
        Command::FigEnt { points } => cmd_fig_ent(cli, *points, stdout),
        Command::FigMrnF { points, p } => cmd_fig_mrn_f(cli, *points, *p, stdout),
        Command::FigMrnAlpha { points, target_f } => cmd_fig_mrn_alpha(cli, *points, *target_f, stdout),
        Command::ValidatePovm { povm, lambda } => cmd_validate(cli, *povm, *lambda, stdout),
        Command::McCheck {
            resource,
            povm,
            lambda,
            samples,
            seed,
        } => cmd_mc_check(cli, resource, *povm, *lambda, *samples, *seed, stdout),
    }
}

fn cmd_round(
    cli: &Cli,
    resource: &ResourceArgs,
    povm: PovmKind,
    lambda: f64,
    out: &mut dyn Write,
) -> Result<bool> {
    let spec = resource.spec()?;
    let rho = materialize(&spec)?;
    let fam = PovmFamily::build(povm, lambda)?;
    let r = run_round(&rho, &fam, &CorrectionSet::standard())?;

    writeln!(out, "resource      {spec:?}")?;
    writeln!(out, "povm          {povm} lambda={}", fmt_sig(lambda))?;
    for (i, p) in r.probs.iter().enumerate() {
        writeln!(out, "P(B{})         {}", i + 1, fmt_sig(*p))?;
    }
    writeln!(out, "fidelity      {}", fmt_sig(r.fidelity))?;
    writeln!(out, "concurrence   {}", fmt_sig(r.effective_concurrence))?;
    writeln!(out, "effective state")?;
    let m = r.effective_state.matrix();
    for i in 0..4 {
        let cells: Vec<String> = (0..4)
            .map(|j| format!("{:+.6}{:+.6}i", m[(i, j)].re, m[(i, j)].im))
            .collect();
        writeln!(out, "  {}", cells.join("  "))?;
    }

    let mut csv = CsvWriter::new(cli);
    csv.header(&["lambda", "fidelity", "concurrence", "p1", "p2", "p3", "p4"]);
    let mut fields = vec![
        csv.num(lambda, Bound::Nearest),
        csv.num(r.fidelity, Bound::Nearest),
        csv.num(r.effective_concurrence, Bound::Nearest),
    ];
    fields.extend(r.probs.iter().map(|&p| csv.num(p, Bound::Nearest)));
    csv.row(&fields);
    emit(cli, csv, out, false)?;
    Ok(true)
}

fn cmd_mrn(
    cli: &Cli,
    resource: &ResourceArgs,
    target_f: f64,
    strictness: Strictness,
    generic: bool,
    out: &mut dyn Write,
) -> Result<bool> {
    let spec = resource.spec()?;
    let trace = if generic {
        mrn_generic(&spec, target_f, strictness)?
    } else {
        mrn(&spec, target_f, strictness)?
    };

    writeln!(out, "resource      {spec:?}")?;
    writeln!(out, "target f      {}", fmt_sig(target_f))?;
    for (i, r) in trace.rounds.iter().enumerate() {
        writeln!(
            out,
            "round {:<3}     lambda={}  fidelity={}  concurrence={}",
            i + 1,
            fmt_sig(r.sharpness),
            fmt_sig(r.fidelity),
            fmt_sig(r.concurrence)
        )?;
    }
    writeln!(out, "mrn           {}", trace.mrn)?;
    writeln!(
        out,
        "next state    entangled={} concurrence={}",
        trace.next_state_entangled,
        fmt_sig(trace.next_state_concurrence)
    )?;
    writeln!(out, "stopped       {}", trace.terminal_reason)?;

    let mut csv = CsvWriter::new(cli);
    csv.comment(&format!("mrn={} terminal={}", trace.mrn, trace.terminal_reason));
    csv.header(&["round", "lambda", "fidelity", "concurrence"]);
    for (i, r) in trace.rounds.iter().enumerate() {
        let fields = vec![
            (i + 1).to_string(),
            csv.num(r.sharpness, Bound::Nearest),
            csv.num(r.fidelity, Bound::Nearest),
            csv.num(r.concurrence, Bound::Nearest),
        ];
        csv.row(&fields);
    }
    emit(cli, csv, out, false)?;
    Ok(true)
}

fn bound_of(x: f64, scan: ScanVariable, interior: Bound) -> Bound {
    let (lo, hi) = scan.domain();
    if x == lo || x == hi {
        Bound::Domain
    } else {
        interior
    }
}

/// One table row: MRN range and its entangled-next-state sub-range.
struct TableRow {
    mrn: usize,
    range: (f64, f64),
    entangled: Option<(f64, f64)>,
}

fn table_rows(scan: ScanVariable, tol: f64) -> Result<Vec<TableRow>> {
    let scanner = BoundaryScanner::new(scan, tol)?;
    (1..=6)
        .rev()
        .map(|v| {
            Ok(TableRow {
                mrn: v,
                range: scanner.mrn_range(v)?,
                entangled: scanner.entangled_range(v)?,
            })
        })
        .collect()
}

/// Interval cells in increasing (`ascending`) or decreasing order.
fn interval_cells(csv: &CsvWriter, iv: Option<(f64, f64)>, scan: ScanVariable, ascending: bool) -> [String; 2] {
    match iv {
        None => [String::new(), String::new()],
        Some((lo, hi)) => {
            let lo = csv.num(lo, bound_of(lo, scan, Bound::Lower));
            let hi = csv.num(hi, bound_of(hi, scan, Bound::Upper));
            if ascending {
                [lo, hi]
            } else {
                [hi, lo]
            }
        }
    }
}

fn cmd_table1(cli: &Cli, tol: f64, out: &mut dyn Write) -> Result<bool> {
    let scan = ScanVariable::Fidelity { werner_p: 1.0 };
    let rows = table_rows(scan, tol)?;
    let mut csv = CsvWriter::new(cli);
    csv.comment("resource=werner(1) strictness=strict");
    csv.comment("mrn=6 f_low is the open bound 2/3 (targets must exceed it), printed as 0.6666 under --round4");
    csv.comment("f_ent: next-round state entangled but below the target; empty when no such range exists");
    csv.header(&["mrn", "f_low", "f_high", "f_ent_low", "f_ent_high"]);
    for r in &rows {
        let mut fields = vec![r.mrn.to_string()];
        fields.extend(interval_cells(&csv, Some(r.range), scan, true));
        fields.extend(interval_cells(&csv, r.entangled, scan, true));
        csv.row(&fields);
    }
    emit(cli, csv, out, true)?;
    Ok(true)
}

fn cmd_table2(cli: &Cli, tol: f64, out: &mut dyn Write) -> Result<bool> {
    let scan = ScanVariable::Alpha { target_f: 2.0 / 3.0 };
    let rows = table_rows(scan, tol)?;
    let mut csv = CsvWriter::new(cli);
    csv.comment("resource=pure-chi(alpha) target_f=2/3 strictness=strict");
    csv.comment("alpha decreasing along each row; alpha_ent: next-round state entangled but below the target");
    csv.header(&["mrn", "alpha_high", "alpha_low", "alpha_ent_high", "alpha_ent_low"]);
    for r in &rows {
        let mut fields = vec![r.mrn.to_string()];
        fields.extend(interval_cells(&csv, Some(r.range), scan, false));
        fields.extend(interval_cells(&csv, r.entangled, scan, false));
        csv.row(&fields);
    }
    emit(cli, csv, out, true)?;
    Ok(true)
}

fn require_points(points: usize) -> Result<()> {
    if points < 2 {
        return Err(Error::Domain(format!("--points must be at least 2, got {points}")));
    }
    Ok(())
}

fn cmd_fig_ent(cli: &Cli, points: usize, out: &mut dyn Write) -> Result<bool> {
    require_points(points)?;
    let bell = bell_state(1)?;
    let corr = CorrectionSet::standard();
    let mut csv = CsvWriter::new(cli);
    csv.comment("concurrence of the effective state after one round on |B1>");
    csv.header(&["lambda", "c_depolarized", "c_ortho_support"]);
    for k in 1..=points {
        let lambda = k as f64 / points as f64;
        let c = |kind| -> Result<f64> {
            Ok(run_round(&bell, &PovmFamily::build(kind, lambda)?, &corr)?.effective_concurrence)
        };
        let fields = vec![
            csv.num(lambda, Bound::Nearest),
            csv.num(c(PovmKind::Depolarized)?, Bound::Nearest),
            csv.num(c(PovmKind::OrthoSupport)?, Bound::Nearest),
        ];
        csv.row(&fields);
    }
    emit(cli, csv, out, true)?;
    Ok(true)
}

fn scan_csv(cli: &Cli, scan: ScanVariable, points: usize, column: &str, comment: &str, out: &mut dyn Write) -> Result<bool> {
    require_points(points)?;
    let (lo, hi) = scan.domain();
    let mut csv = CsvWriter::new(cli);
    csv.comment(comment);
    csv.header(&[column, "mrn", "next_entangled"]);
    for k in 0..points {
        let x = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        let t = scan.trace_at(x)?;
        let fields = vec![
            csv.num(x, Bound::Nearest),
            t.mrn.to_string(),
            t.next_state_entangled.to_string(),
        ];
        csv.row(&fields);
    }
    emit(cli, csv, out, true)?;
    Ok(true)
}

fn cmd_fig_mrn_f(cli: &Cli, points: usize, p: f64, out: &mut dyn Write) -> Result<bool> {
    ResourceSpec::werner(p)?;
    let comment = format!("resource=werner({}) strictness=strict", fmt_sig(p));
    scan_csv(cli, ScanVariable::Fidelity { werner_p: p }, points, "f", &comment, out)
}

fn cmd_fig_mrn_alpha(cli: &Cli, points: usize, target_f: f64, out: &mut dyn Write) -> Result<bool> {
    if !(target_f > 0.5 && target_f <= 1.0) {
        return Err(Error::Domain(format!("target fidelity {target_f} is outside (1/2, 1]")));
    }
    let comment = format!("resource=pure-chi(alpha) target_f={} strictness=strict", fmt_sig(target_f));
    scan_csv(cli, ScanVariable::Alpha { target_f }, points, "alpha", &comment, out)
}

fn cmd_validate(cli: &Cli, povm: Option<PovmKind>, lambda: Option<f64>, out: &mut dyn Write) -> Result<bool> {
    let kinds: Vec<PovmKind> = povm.map_or(PovmKind::ALL.to_vec(), |k| vec![k]);
    let lambdas: Vec<f64> = lambda.map_or((1..=20).map(|k| k as f64 / 20.0).collect(), |l| vec![l]);
    let mut csv = CsvWriter::new(cli);
    csv.header(&[
        "family",
        "lambda",
        "completeness",
        "hermiticity",
        "min_eigenvalue",
        "projective_limit",
        "valid",
    ]);
    let mut all_valid = true;
    for &kind in &kinds {
        for &l in &lambdas {
            let report = validate(&PovmFamily::build(kind, l)?);
            let ok = report.is_valid(COMPLETENESS_TOL, PSD_TOL);
            all_valid &= ok;
            writeln!(out, "{report}")?;
            writeln!(out, "valid                {ok}\n")?;
            let fields = vec![
                kind.to_string(),
                csv.num(l, Bound::Nearest),
                format!("{:.3e}", report.completeness_residual),
                format!("{:.3e}", report.hermiticity_residual),
                format!("{:.3e}", report.min_eigenvalue()),
                format!("{:.3e}", report.projective_limit_residual),
                ok.to_string(),
            ];
            csv.row(&fields);
        }
    }
    emit(cli, csv, out, false)?;
    Ok(all_valid)
}

fn cmd_mc_check(
    cli: &Cli,
    resource: &ResourceArgs,
    povm: PovmKind,
    lambda: f64,
    samples: usize,
    seed: u64,
    out: &mut dyn Write,
) -> Result<bool> {
    let rho = materialize(&resource.spec()?)?;
    let fam = PovmFamily::build(povm, lambda)?;
    let corr = CorrectionSet::standard();
    let exact = run_round(&rho, &fam, &corr)?.fidelity;
    let mc = run_round_mc(&rho, &fam, &corr, samples, seed)?;
    let ok = mc.agrees_with(exact, MC_SIGMAS);

    writeln!(out, "exact         {}", fmt_sig(exact))?;
    writeln!(out, "monte carlo   {} ± {:.3e} ({} samples, seed {seed})", fmt_sig(mc.mean), mc.std_error, mc.n_samples)?;
    let z = if mc.std_error > 0.0 {
        (exact - mc.mean).abs() / mc.std_error
    } else {
        0.0
    };
    writeln!(out, "deviation     {:.3} sigma", z)?;
    writeln!(out, "within 3σ     {ok}")?;

    let mut csv = CsvWriter::new(cli);
    csv.header(&["exact", "mean", "std_error", "samples", "seed", "within_3sigma"]);
    let fields = vec![
        csv.num(exact, Bound::Nearest),
        csv.num(mc.mean, Bound::Nearest),
        csv.num(mc.std_error, Bound::Nearest),
        samples.to_string(),
        seed.to_string(),
        ok.to_string(),
    ];
    csv.row(&fields);
    emit(cli, csv, out, false)?;
    Ok(ok)
}
