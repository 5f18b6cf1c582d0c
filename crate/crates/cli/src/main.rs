use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::rc::Rc;

use bbv_core::analysis::{analyze, apply_analysis_program, dump_analysis};
use bbv_core::bbv::MaxVers;
use bbv_core::exec::{parse_limit, Config, Mode, Vm};
use bbv_core::frontend::compile_source;
use bbv_core::ir::text::print_program;
use bbv_harness::report::{emit_report, render, row_to_json, Format};
use bbv_harness::suite::{hash_result, run_suite, ExperimentConfig, Row};
use bbv_harness::corpus;
use clap::{Parser, Subcommand};

const EXIT_RUNTIME: u8 = 1;
const EXIT_COMPILE: u8 = 2;

#[derive(Parser)]
#[command(name = "bbv", version, about = "MiniDyn VM with lazy basic block versioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile and run a program.
    Run {
        file: PathBuf,
        #[arg(long, default_value = "bbv-lazy", value_parser = parse_mode)]
        mode: Mode,
        /// Versions per block: a number, or `inf`.
        #[arg(long, default_value = "5", value_parser = parse_limit)]
        maxvers: MaxVers,
        /// After the top-level code, call this global function.
        #[arg(long)]
        entry: Option<String>,
        /// Write the run's counters as JSON.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Print the IR the executor runs, before running.
        #[arg(long)]
        dump_ir: bool,
        /// Print the type sets inferred on every edge, before running.
        #[arg(long)]
        dump_analysis: bool,
        /// Print the generated code after running.
        #[arg(long)]
        dump_code: bool,
        /// Stop after this many executed ops.
        #[arg(long)]
        fuel: Option<u64>,
    },
    /// Run a benchmark suite across modes and version limits.
    Bench {
        /// Directory of `.js` programs; the built-in corpus if omitted.
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "baseline,analysis,bbv-lazy,bbv-eager", value_parser = parse_mode)]
        modes: Vec<Mode>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,5,inf", value_parser = parse_limit)]
        limits: Vec<MaxVers>,
        #[arg(long, default_value_t = 1)]
        warmup: u32,
        #[arg(long, default_value_t = 1)]
        iters: u32,
        /// Function called for each iteration.
        #[arg(long, default_value = "bench")]
        entry: String,
        /// Report files; the format follows the extension (json, csv, md).
        /// Without one, a markdown table is printed.
        #[arg(long)]
        out: Vec<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { file, mode, maxvers, entry, stats, dump_ir, dump_analysis, dump_code, fuel } => {
            let opts = RunOpts { mode, maxvers, entry, stats, dump_ir, dump_analysis, dump_code, fuel };
            run(&file, &opts)
        }
        Command::Bench { suite, modes, limits, warmup, iters, entry, out } => {
            let cfg = ExperimentConfig { modes, limits, warmup, iters, entry, ..ExperimentConfig::default() };
            bench(suite, &cfg, &out)
        }
    }
}

struct RunOpts {
    mode: Mode,
    maxvers: MaxVers,
    entry: Option<String>,
    stats: Option<PathBuf>,
    dump_ir: bool,
    dump_analysis: bool,
    dump_code: bool,
    fuel: Option<u64>,
}

fn run(file: &PathBuf, o: &RunOpts) -> ExitCode {
    let source = match fs::read_to_string(file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(EXIT_COMPILE);
        }
    };
    let program = match compile_source(&source) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}: {e}", file.display());
            return ExitCode::from(EXIT_COMPILE);
        }
    };
    let mut stdout = io::stdout().lock();
    if o.dump_ir {
        let shown = if o.mode == Mode::Analysis { apply_analysis_program(&program) } else { program.clone() };
        let _ = write!(stdout, "{}", print_program(&shown));
    }
    if o.dump_analysis {
        for f in &program.functions {
            let _ = write!(stdout, "{}", dump_analysis(f, &analyze(f)));
        }
    }
    let mut vm = Vm::new(Rc::new(program), Config { mode: o.mode, maxvers: o.maxvers, fuel: o.fuel });
    let mut outcome = vm.run_main();
    if let (Ok(_), Some(e)) = (&outcome, &o.entry) {
        outcome = vm.call_global(e, &[]);
    }
    for line in vm.take_output() {
        let _ = writeln!(stdout, "{line}");
    }
    if let (Ok(v), Some(_)) = (&outcome, &o.entry) {
        let _ = writeln!(stdout, "{}", vm.heap().render(*v));
    }
    if o.dump_code {
        let _ = write!(stdout, "{}", vm.dump_code());
    }
    let result = outcome.map(|v| vm.heap().render(v)).map_err(|e| e.code().to_string());
    if let Some(path) = &o.stats {
        let row = Row {
            benchmark: file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            mode: o.mode,
            maxvers: o.maxvers,
            result_hash: hash_result(&result),
            result: result.clone().ok(),
            error: result.clone().err(),
            counters: vm.counters(),
            max_specialized: vm.max_specialized_versions(),
            layout: vm.check_layout(),
            ratio_tests: None,
            ratio_ops_emitted: None,
        };
        if let Err(e) = fs::write(path, row_to_json(&row)) {
            eprintln!("error: cannot write {}: {e}", path.display());
        }
    }
    match outcome {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("runtime error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn bench(suite: Option<PathBuf>, cfg: &ExperimentConfig, out: &[PathBuf]) -> ExitCode {
    let benchmarks = match &suite {
        Some(dir) => match corpus::load_dir(dir) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("error: cannot read suite {}: {e}", dir.display());
                return ExitCode::from(EXIT_COMPILE);
            }
        },
        None => corpus::builtin(),
    };
    let report = match run_suite(&benchmarks, cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_COMPILE);
        }
    };
    if out.is_empty() {
        print!("{}", render(&report, Format::Markdown));
    }
    for path in out {
        let Some(format) = Format::from_path(path) else {
            eprintln!("error: cannot tell the report format of {}", path.display());
            return ExitCode::from(EXIT_COMPILE);
        };
        if let Err(e) = emit_report(&report, format, path) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_COMPILE);
        }
    }
    let failed: Vec<&str> = report.rows.iter().filter(|r| r.error.is_some()).map(|r| r.benchmark.as_str()).collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        let mut names = failed.clone();
        names.dedup();
        eprintln!("failed benchmarks: {}", names.join(", "));
        ExitCode::from(EXIT_RUNTIME)
    }
}
