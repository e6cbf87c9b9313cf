use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use forcing_lab::explorer::suites::run_suite;
use forcing_lab::explorer::{
    cmd_amalgamate, cmd_antichain, cmd_check, cmd_compat_graph, cmd_decompose, cmd_gen, cmd_generic, Document,
    ExplorerError, Kind, Mode, Params, PosetHandle, ANTICHAIN_EXHAUSTIVE_LIMIT, COVER_EXHAUSTIVE_LIMIT, GEN_ATTEMPTS,
};
use forcing_lab::ordinal::Ordinal;

const SEED_VAR: &str = "FORCING_LAB_SEED";

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Gen,
    Check,
    Compat,
    Antichain,
    Amalgamate,
    Decompose,
    Generic,
    Verify,
}

#[derive(Debug, Parser)]
#[command(
    name = "forcing-lab",
    about = "Generate, check and compare conditions of finite forcing posets",
    after_help = help_footer()
)]
struct Cli {
    command: Command,
    /// knaster, p1, p1star, qeta, p2, p3, p4, hechler, qint, qstar, homog0 or homog1.
    #[arg(long)]
    poset: Option<String>,
    /// Falls back to the config file, then to FORCING_LAB_SEED, then to 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Written as DOT when the name ends in `.dot`, JSON otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    precision: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// An ordinal such as `w^(2)`.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    /// Conditions to generate when no input is given.
    #[arg(long)]
    count: Option<usize>,
    /// Antichain size to look for.
    #[arg(long)]
    size: Option<usize>,
    /// Search bound for knaster compatibility.
    #[arg(long)]
    bound: Option<usize>,
    /// Property suite for `verify`, or `all`.
    #[arg(long)]
    suite: Option<String>,
    /// key=value file; flags win over it.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn help_footer() -> String {
    format!(
        "Fixed thresholds:\n  antichain search is exhaustive up to {ANTICHAIN_EXHAUSTIVE_LIMIT} vertices, greedy beyond\n  \
         clique covers are minimum up to {COVER_EXHAUSTIVE_LIMIT} vertices, greedy beyond\n  \
         generation gives up after {GEN_ATTEMPTS} draws per condition"
    )
}

type Config = BTreeMap<String, String>;

fn read_config(path: &Path) -> Result<Config, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Config::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), n + 1))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

struct Settings {
    cli: Cli,
    config: Config,
}

impl Settings {
    fn text(&self, flag: Option<&String>, key: &str) -> Option<String> {
        flag.cloned().or_else(|| self.config.get(key).cloned())
    }

    fn number<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self
                .config
                .get(key)
                .map(|v| v.parse().map_err(|_| format!("config key `{key}` is not a number")))
                .transpose(),
        }
    }

    fn seed(&self) -> Result<Option<u64>, String> {
        if let Some(s) = self.number(self.cli.seed, "seed")? {
            return Ok(Some(s));
        }
        match std::env::var(SEED_VAR) {
            Ok(v) => v.parse().map(Some).map_err(|_| format!("{SEED_VAR} is not a number")),
            Err(_) => Ok(None),
        }
    }

    /// Fills the explicitly given settings into `params`.
    fn apply(&self, params: &mut Params) -> Result<(), String> {
        if let Some(s) = self.seed()? {
            params.seed = s;
        }
        if let Some(p) = self.number(self.cli.precision, "precision")? {
            params.precision = p;
        }
        if let Some(d) = self.number(self.cli.depth, "depth")? {
            params.depth = d;
        }
        if let Some(b) = self.number(self.cli.bound, "bound")? {
            params.bound = b;
        }
        if let Some(d) = self.text(self.cli.delta.as_ref(), "delta") {
            params.delta = d.parse::<Ordinal>().map_err(|e| e.to_string())?;
        }
        if let Some(m) = self.text(self.cli.mode.as_ref(), "mode") {
            params.mode = m.parse::<Mode>().map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    fn kind(&self) -> Result<Option<Kind>, String> {
        self.text(self.cli.poset.as_ref(), "poset")
            .map(|p| p.parse::<Kind>().map_err(|e| e.to_string()))
            .transpose()
    }

    fn path(&self, flag: Option<&PathBuf>, key: &str) -> Option<PathBuf> {
        flag.cloned().or_else(|| self.config.get(key).map(PathBuf::from))
    }

    /// The input document, or a freshly generated one when no input is given.
    fn document(&self) -> Result<Document, String> {
        let kind = self.kind()?;
        match self.path(self.cli.input.as_ref(), "in") {
            Some(path) => {
                let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let mut doc: Document = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                if let Some(k) = kind.filter(|k| *k != doc.kind) {
                    return Err(ExplorerError::KindMismatch {
                        expected: k,
                        found: doc.kind,
                    }
                    .to_string());
                }
                self.apply(&mut doc.params)?;
                Ok(doc)
            }
            None => {
                let kind = kind.ok_or("--poset or --in is required")?;
                let count = self.number(self.cli.count, "count")?.unwrap_or(8);
                cmd_gen(&self.handle(kind)?, count).map_err(|e| e.to_string())
            }
        }
    }

    fn handle(&self, kind: Kind) -> Result<PosetHandle, String> {
        let mut params = Params::default();
        self.apply(&mut params)?;
        let handle = PosetHandle::new(kind, params);
        handle.validate().map_err(|e| e.to_string())?;
        Ok(handle)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| e.to_string())
}

fn run(settings: &Settings) -> Result<bool, String> {
    let out = settings.path(settings.cli.out.as_ref(), "out");
    let out = out.as_deref();
    let err = |e: ExplorerError| e.to_string();
    match settings.cli.command {
        Command::Gen => {
            let kind = settings.kind()?.ok_or("--poset is required")?;
            let count = settings.number(settings.cli.count, "count")?.unwrap_or(8);
            emit(out, &json(&cmd_gen(&settings.handle(kind)?, count).map_err(err)?)?)?;
        }
        Command::Check => {
            let verdicts = cmd_check(&settings.document()?).map_err(err)?;
            emit(out, &json(&verdicts)?)?;
            return Ok(verdicts.iter().all(|v| v.ok));
        }
        Command::Compat => {
            let graph = cmd_compat_graph(&settings.document()?).map_err(err)?;
            let dot = out.is_some_and(|p| p.extension().is_some_and(|e| e == "dot"));
            emit(out, &if dot { graph.to_dot() } else { json(&graph)? })?;
        }
        Command::Antichain => {
            let size = settings.number(settings.cli.size, "size")?.unwrap_or(3);
            emit(out, &json(&cmd_antichain(&settings.document()?, size).map_err(err)?)?)?;
        }
        Command::Amalgamate => emit(out, &json(&cmd_amalgamate(&settings.document()?).map_err(err)?)?)?,
        Command::Decompose => emit(out, &json(&cmd_decompose(&settings.document()?).map_err(err)?)?)?,
        Command::Generic => emit(out, &json(&cmd_generic(&settings.document()?).map_err(err)?)?)?,
        Command::Verify => {
            let suite = settings
                .text(settings.cli.suite.as_ref(), "suite")
                .unwrap_or_else(|| "all".into());
            let report = run_suite(&suite, settings.seed()?.unwrap_or(0)).map_err(err)?;
            emit(out, &json(&report)?)?;
            for r in &report.results {
                let status = if r.passed { "PASS" } else { "FAIL" };
                eprintln!("{status} {} / {} ({} cases)", r.suite, r.property, r.checked);
            }
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.config.as_deref().map(read_config).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&Settings { cli, config }) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
