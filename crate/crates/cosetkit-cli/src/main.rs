use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cosetkit::constructions::conjugate_elimination;
use cosetkit::gog::compare_fundamental;
use cosetkit::incidence::{Budget, CosetIncidenceSystem};
use cosetkit::io::{build_from_descriptor, parse_graph, parse_system, write_system, IoError};
use cosetkit::report::{budget_header, build_report, Prop};
use cosetkit::structured::GroupHandle;

/// Check, build and export coset incidence systems.
#[derive(Parser, Debug)]
#[command(name = "cosetkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Limits {
    /// Coset enumeration cap.
    #[arg(long, default_value_t = 200_000)]
    max_cosets: usize,
    /// Word-length bound for bounded evidence on infinite groups.
    #[arg(long, default_value_t = 8)]
    max_word_len: usize,
    /// Number of random samples for bounded evidence.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 20250101)]
    seed: u64,
}

impl Limits {
    fn budget(&self) -> Budget {
        Budget { max_cosets: self.max_cosets, max_word_len: self.max_word_len, samples: self.samples, seed: self.seed, ..Budget::default() }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check properties of system files; exit 0 all hold, 1 something fails, 2 something unknown.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Comma-separated: ft,rc,firm,thin,thick,finite,chambers,flag_complex,hypertope.
        #[arg(long, default_value = "ft,rc,thin")]
        props: String,
        #[command(flatten)]
        limits: Limits,
    },
    /// Print every property of each system; exits 0 unless a file fails to load.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        limits: Limits,
    },
    /// Build a system from a construction descriptor.
    Build {
        descriptor: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        #[command(flatten)]
        limits: Limits,
    },
    /// Export the incidence graph (DOT) or the facets of the coset complex.
    Export {
        system: PathBuf,
        #[arg(long, default_value = "dot")]
        format: String,
        /// Ball radius for infinite groups.
        #[arg(long, default_value_t = 4)]
        limit: usize,
        /// Print the maximal simplices instead of the graph.
        #[arg(long)]
        complex: bool,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        #[command(flatten)]
        limits: Limits,
    },
    /// Fundamental system of a graph of systems over a spanning tree.
    Fundamental {
        graph: PathBuf,
        /// Comma-separated edge ids of the spanning tree (default: the file's `tree` line).
        #[arg(long)]
        tree: Option<String>,
        /// Comma-separated edge ids choosing orientations of non-tree pairs.
        #[arg(long)]
        orient: Option<String>,
        /// Compare with the fundamental system over this other tree.
        #[arg(long)]
        compare: Option<String>,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        #[command(flatten)]
        limits: Limits,
    },
}

/// Failure that maps to exit code 3.
struct Usage(String);

impl From<IoError> for Usage {
    fn from(e: IoError) -> Self {
        Usage(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::Read { path: path.display().to_string(), msg: e.to_string() })
}

fn resolver(base: &Path) -> impl Fn(&str) -> Result<String, IoError> + '_ {
    move |name: &str| read(&base.parent().unwrap_or(Path::new(".")).join(name))
}

fn load(path: &Path, limits: &Limits) -> Result<CosetIncidenceSystem, Usage> {
    let text = read(path)?;
    parse_system(&text, limits.max_cosets).map_err(|e| Usage(format!("{}: {e}", path.display())))
}

fn emit(text: &str, output: &Option<PathBuf>) -> Result<(), Usage> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn ids(list: &str) -> Vec<String> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn reports(files: &[PathBuf], props: &[Prop], limits: &Limits) -> Result<(String, i32), Usage> {
    let budget = limits.budget();
    let mut out = format!("# cosetkit report\n{}\n", budget_header(&budget));
    let mut code = 0;
    for (k, f) in files.iter().enumerate() {
        let sys = load(f, limits)?;
        let r = build_report(&sys, props, &budget);
        if k > 0 {
            out.push('\n');
        }
        out.push_str(&r.to_string());
        code = match (code, r.exit_code()) {
            (1, _) | (_, 1) => 1,
            (2, _) | (_, 2) => 2,
            _ => 0,
        };
    }
    Ok((out, code))
}

fn run(cli: Cli) -> Result<i32, Usage> {
    match cli.command {
        Command::Check { files, props, limits } => {
            let props = Prop::parse_list(&props).map_err(Usage)?;
            let (text, code) = reports(&files, &props, &limits)?;
            print!("{text}");
            Ok(code)
        }
        Command::Report { files, limits } => {
            let props = [Prop::Ft, Prop::Rc, Prop::Firm, Prop::Finite, Prop::Chambers, Prop::FlagComplex, Prop::Hypertope];
            let (text, _) = reports(&files, &props, &limits)?;
            print!("{text}");
            Ok(0)
        }
        Command::Build { descriptor, output, limits } => {
            let text = read(&descriptor)?;
            let sys = build_from_descriptor(&text, &resolver(&descriptor), limits.max_cosets)
                .map_err(|e| Usage(format!("{}: {e}", descriptor.display())))?;
            let mut body = write_system(&sys)?;
            if let GroupHandle::SemiDirect(sd) = &sys.group {
                if let (p, Some(d)) = conjugate_elimination(sd) {
                    let mut note = format!("# after eliminating conjugate generators, the group is the diagram group on {}:\n", p.generators.join(" "));
                    for line in d.to_text().lines() {
                        note.push_str(&format!("#   {line}\n"));
                    }
                    body = note + &body;
                }
            }
            emit(&body, &output)?;
            Ok(0)
        }
        Command::Export { system, format, limit, complex, output, limits } => {
            if format != "dot" {
                return Err(Usage(format!("unsupported format `{format}` (only dot)")));
            }
            let sys = load(&system, &limits)?;
            let graph = sys.incidence_graph(limit, &limits.budget()).map_err(|e| Usage(e.to_string()))?;
            emit(&if complex { graph.facets_text() } else { graph.to_dot() }, &output)?;
            Ok(0)
        }
        Command::Fundamental { graph, tree, orient, compare, output, limits } => {
            let text = read(&graph)?;
            let (g, file_orient) = parse_graph(&text, &resolver(&graph), limits.max_cosets)?;
            let orientation = orient.map(|o| ids(&o)).unwrap_or(file_orient);
            let tree = tree.map(|t| ids(&t)).unwrap_or_else(|| g.tree.clone());
            let validation = g.validate().map_err(|e| Usage(e.to_string()))?;
            let sys = g.fundamental_system(&tree, &orientation).map_err(|e| Usage(e.to_string()))?;
            if let Some(other) = compare {
                let other = g.fundamental_system(&ids(&other), &orientation).map_err(|e| Usage(e.to_string()))?;
                let report = compare_fundamental(&sys, &other).map_err(|e| Usage(e.to_string()))?;
                emit(&format!("# {} vs {}\n{}", sys.name, other.name, report.to_text()), &output)?;
                return Ok(if report.equal() { 0 } else { 1 });
            }
            let mut body: String = validation.lines.iter().map(|l| format!("# {l}\n")).collect();
            body.push_str(&write_system(&sys)?);
            emit(&body, &output)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
