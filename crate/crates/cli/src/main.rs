//! Command-line scenario runner.
//!
//! Exit codes: 0 on success, 1 when a run fails or a verification check
//! fails, 2 when the config or command line is invalid. Errors go to stderr
//! as a single JSON object.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use circumnav::analysis::analyze;
use circumnav::config::parse_override;
use circumnav::output::{report_text, write_csv, write_plot_data};
use circumnav::verify::verify;
use circumnav::{simulate, Error, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "circumnav",
    version,
    about = "Range-only localization and circumnavigation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write the trajectory CSV, report and plot data.
    Run(Common),
    /// Simulate one scenario and print the invariant-suite table.
    Verify(Common),
    /// Run every cell of a parameter grid in parallel, one report per cell.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Grid axis as `key=v1,v2,...`; repeat for a Cartesian product.
        #[arg(long = "grid", value_name = "KEY=V1,V2")]
        grid: Vec<String>,
    },
    /// Print A(t) sampled over one period, one row per time.
    ScheduleDump {
        #[command(flatten)]
        common: Common,
        /// Number of intervals over the period.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Config file; the baseline scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

enum Failure {
    Usage(Error),
    Runtime(String, String),
    Checks,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ConfigInvalid(_)
            | Error::ZeroRate
            | Error::RhoOutOfRange { .. }
            | Error::NonPositiveGain { .. }
            | Error::DimensionMismatch { .. } => Failure::Usage(e),
            other => Failure::Runtime(other.kind().into(), other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime("io".into(), e.to_string())
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn report_error(kind: &str, message: &str) {
    eprintln!(
        "{{\"error\":{},\"message\":{}}}",
        json_string(kind),
        json_string(message)
    );
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, Error> {
        let mut all = self
            .set
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(seed) = self.seed {
            all.push(("seed".into(), seed.to_string()));
        }
        if let Some(out) = &self.out {
            all.push(("output.dir".into(), out.display().to_string()));
        }
        Ok(all)
    }

    fn text(&self) -> Result<String, Error> {
        match &self.config {
            Some(path) => fs::read_to_string(path)
                .map_err(|e| Error::ConfigInvalid(format!("cannot read {}: {e}", path.display()))),
            None => Ok(String::new()),
        }
    }

    fn load(&self, extra: &[(String, String)]) -> Result<ScenarioConfig, Error> {
        let mut overrides = self.overrides()?;
        overrides.extend_from_slice(extra);
        ScenarioConfig::parse(&self.text()?, &overrides)
    }
}

fn write_run(cfg: &ScenarioConfig, dir: &Path) -> Result<String, Failure> {
    let traj = simulate(cfg)?;
    let report = analyze(&traj);
    fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(fs::File::create(dir.join(&cfg.output.csv))?);
    write_csv(&traj, &mut csv)?;
    let text = report_text(&traj, &report);
    fs::write(dir.join(&cfg.output.report), &text)?;
    if cfg.output.plots {
        write_plot_data(&traj, dir)?;
    }
    Ok(text)
}

fn run(common: &Common) -> Result<(), Failure> {
    let cfg = common.load(&[])?;
    let dir = PathBuf::from(&cfg.output.dir);
    let text = write_run(&cfg, &dir)?;
    if !common.quiet {
        print!("{text}");
        println!("output_dir = {}", dir.display());
    }
    Ok(())
}

fn verify_cmd(common: &Common) -> Result<(), Failure> {
    let cfg = common.load(&[])?;
    let report = verify(&cfg)?;
    if !common.quiet {
        print!("{}", report.table());
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn grid_cells(grid: &[String]) -> Result<Vec<Vec<(String, String)>>, Error> {
    let mut cells = vec![Vec::new()];
    for axis in grid {
        let (key, values) = parse_override(axis)?;
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::ConfigInvalid(format!("grid axis '{key}' has no values")));
        }
        let mut next = Vec::with_capacity(cells.len() * values.len());
        for cell in &cells {
            for v in &values {
                let mut c = cell.clone();
                c.push((key.clone(), v.to_string()));
                next.push(c);
            }
        }
        cells = next;
    }
    Ok(cells)
}

fn sweep(common: &Common, grid: &[String]) -> Result<(), Failure> {
    let cells = grid_cells(grid)?;
    // validate every cell before anything is written
    let configs = cells
        .iter()
        .map(|cell| common.load(cell))
        .collect::<Result<Vec<_>, _>>()?;
    let root = PathBuf::from(&configs[0].output.dir);
    let results: Vec<Result<String, Failure>> = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| write_run(cfg, &root.join(format!("cell_{i:03}"))))
        .collect();

    let mut summary = String::from("cell\tassignment\tstatus\tfinal_dist_error\tfinal_xtilde\n");
    let mut failed = false;
    for (i, (cell, result)) in cells.iter().zip(&results).enumerate() {
        let assignment: Vec<String> = cell.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let assignment = if assignment.is_empty() {
            "-".into()
        } else {
            assignment.join(" ")
        };
        let (status, dist, xt) = match result {
            Ok(text) => {
                let field = |key: &str| {
                    text.lines()
                        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
                        .unwrap_or("none")
                        .to_string()
                };
                ("ok".to_string(), field("final_dist_error"), field("final_xtilde"))
            }
            Err(Failure::Runtime(kind, _)) => {
                failed = true;
                (kind.clone(), "none".into(), "none".into())
            }
            Err(_) => {
                failed = true;
                ("error".into(), "none".into(), "none".into())
            }
        };
        summary.push_str(&format!("{i:03}\t{assignment}\t{status}\t{dist}\t{xt}\n"));
    }
    fs::create_dir_all(&root)?;
    fs::write(root.join("summary.tsv"), &summary)?;
    if !common.quiet {
        print!("{summary}");
    }
    if failed {
        Err(Failure::Checks)
    } else {
        Ok(())
    }
}

fn schedule_dump(common: &Common, samples: usize) -> Result<(), Failure> {
    let cfg = common.load(&[])?;
    let schedule = cfg.schedule.build()?;
    let n = schedule.dimension();
    let samples = samples.max(1);
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        for j in 1..=n {
            header.push(format!("a{i}{j}"));
        }
    }
    writeln!(w, "# period = {:?}", schedule.period())?;
    writeln!(w, "# {}", header.join(" "))?;
    for k in 0..=samples {
        let t = schedule.period() * k as f64 / samples as f64;
        let a = schedule.eval(t);
        let mut row = vec![format!("{t:?}")];
        for i in 0..n {
            for j in 0..n {
                // adding 0.0 maps -0.0 to 0.0
                row.push(format!("{:?}", a[(i, j)] + 0.0));
            }
        }
        writeln!(w, "{}", row.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Verify(c) => verify_cmd(c),
        Command::Sweep { common, grid } => sweep(common, grid),
        Command::ScheduleDump { common, samples } => schedule_dump(common, *samples),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::from(2)
        }
        Err(Failure::Runtime(kind, msg)) => {
            report_error(&kind, &msg);
            ExitCode::from(1)
        }
        Err(Failure::Checks) => ExitCode::from(1),
    }
}
