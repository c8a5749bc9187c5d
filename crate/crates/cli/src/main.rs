use cavity_core::fem_core::{AssembledOperator, Discretization, BLOCK_NAMES};
use cavity_core::geometry::{mesh_measures, save_mesh};
use cavity_core::rigid_body::liquid_inertia;
use clap::{Args, Parser, Subcommand};
use spinning_cavity::config::{ConfigError, ExperimentConfig, ExperimentKind, RawConfig};
use spinning_cavity::experiment::{
    build_mesh, published_attainability, run_experiment, Failure, EXIT_CONFIG, EXIT_IO, EXIT_OK,
};
use spinning_cavity::presets::preset;
use spinning_cavity::report::{fmt_vec, Report};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "spinning-cavity",
    version,
    about = "Rigid body with a liquid-filled cavity: simulations and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (`section.key = value` lines)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "paper-91", group = "preset")]
    paper_91: bool,
    #[arg(long = "paper-92a", group = "preset")]
    paper_92a: bool,
    #[arg(long = "paper-92b", group = "preset")]
    paper_92b: bool,
    #[arg(long = "paper-93", group = "preset")]
    paper_93: bool,
    /// Mesh refinement level (overrides mesh.refinement)
    #[arg(long)]
    refine: Option<u32>,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` assignment, applied last; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the cavity mesh and print its measures
    Mesh {
        #[command(flatten)]
        common: Common,
        /// Write the mesh to this file
        #[arg(long)]
        mesh_out: Option<PathBuf>,
        /// Write every assembled block as `row col value` text into this directory
        #[arg(long)]
        dump_blocks: Option<PathBuf>,
    },
    /// Run the experiment named by experiment.kind (a single run by default)
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// One run per viscosity: t_c table and power-law exponent
    SweepNu {
        #[command(flatten)]
        common: Common,
        /// Comma-separated viscosities (overrides experiment.nu_values)
        #[arg(long)]
        values: Option<String>,
    },
    /// Attainability conditions for the configured initial data
    Attainability {
        #[command(flatten)]
        common: Common,
        /// Report the published attainability inputs instead
        #[arg(long = "paper-92")]
        paper_92: bool,
    },
    /// Perturbed permanent rotation about e3: margin, predicted and simulated limit
    Stability {
        #[command(flatten)]
        common: Common,
        /// Evaluate the prediction only
        #[arg(long)]
        no_run: bool,
    },
    /// Final spin orientation, per viscosity
    FlipOver {
        #[command(flatten)]
        common: Common,
        /// Comma-separated viscosities (overrides experiment.nu_values)
        #[arg(long)]
        values: Option<String>,
    },
    /// Check a configuration and print it with defaults filled in
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common, extra: &[(&str, String)]) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = RawConfig::default();
    let preset_name = [
        (common.paper_91, "paper-91"),
        (common.paper_92a, "paper-92a"),
        (common.paper_92b, "paper-92b"),
        (common.paper_93, "paper-93"),
    ]
    .into_iter()
    .find(|(on, _)| *on)
    .map(|(_, n)| n);
    if let Some(name) = preset_name {
        raw.merge(preset(name)?);
    }
    if let Some(path) = &common.config {
        raw.merge(RawConfig::load(path)?);
    }
    for a in &common.set {
        raw.set_assignment(a)?;
    }
    for (k, v) in extra {
        raw.set(k, v)?;
    }
    if let Some(k) = common.refine {
        raw.set("mesh.refinement", &k.to_string())?;
    }
    if let Some(out) = &common.out {
        raw.set("output.dir", &out.display().to_string())?;
    }
    ExperimentConfig::from_raw(&raw)
}

fn print_report(report: &Report) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(report.render().as_bytes());
    let _ = out.flush();
}

fn mesh_command(cfg: &ExperimentConfig, mesh_out: Option<&Path>, dump: Option<&Path>) -> Result<i32, Failure> {
    let mesh = build_mesh(cfg)?;
    let m = mesh_measures(&mesh);
    let mut report = Report::new();
    report.push("vertices", mesh.num_vertices());
    report.push("tets", mesh.num_tets());
    report.push("boundary_facets", mesh.boundary_facets().len());
    report.push("volume", m.volume);
    report.push("centroid", fmt_vec(m.centroid.as_slice()));
    report.push("min_tet_volume", m.min_tet_volume);
    report.push("max_tet_volume", m.max_tet_volume);
    report.push("boundary_area", m.boundary_area);
    let liquid = liquid_inertia(&mesh, cfg.solver.rho)
        .map_err(|e| Failure::Config(format!("liquid inertia: {e}")))?;
    report.push("liquid_inertia_eigenvalues", fmt_vec(&liquid.eigenvalues()));
    if let Some(path) = mesh_out {
        save_mesh(&mesh, path).map_err(|e| Failure::Config(e.to_string()))?;
        report.push("mesh_file", path.display());
    }
    if let Some(dir) = dump {
        let disc = Discretization::with_pressure(mesh, cfg.solver.pressure);
        let op = AssembledOperator::assemble(
            &disc.spaces,
            &disc.mesh,
            cfg.solver.rho,
            cfg.solver.mu(),
            cfg.solver.convection,
            None,
        )
        .map_err(|e| Failure::Solver(e.to_string()))?;
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Failure::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for name in BLOCK_NAMES {
            let path = dir.join(format!("{name}.txt"));
            let mut file = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io(&path))?);
            op.dump_block(name, &mut file)
                .and_then(|_| file.flush())
                .map_err(io(&path))?;
        }
        report.push("blocks_dir", dir.display());
        report.push("unknowns", disc.spaces.num_unknowns());
    }
    print_report(&report);
    Ok(EXIT_OK)
}

fn execute(command: Command) -> i32 {
    let (common, extra, action): (Common, Vec<(&str, String)>, Action) = match command {
        Command::Mesh {
            common,
            mesh_out,
            dump_blocks,
        } => (common, vec![], Action::Mesh(mesh_out, dump_blocks)),
        Command::Run { common } => (common, vec![], Action::Experiment(None)),
        Command::SweepNu { common, values } => (
            common,
            values.map(|v| ("experiment.nu_values", v)).into_iter().collect(),
            Action::Experiment(Some(ExperimentKind::SweepNu)),
        ),
        Command::FlipOver { common, values } => (
            common,
            values.map(|v| ("experiment.nu_values", v)).into_iter().collect(),
            Action::Experiment(Some(ExperimentKind::FlipOver)),
        ),
        Command::Attainability { common, paper_92 } => (
            common,
            vec![],
            if paper_92 {
                Action::Published
            } else {
                Action::Experiment(Some(ExperimentKind::Attainability))
            },
        ),
        Command::Stability { common, no_run } => (
            common,
            vec![],
            Action::Stability { run: !no_run },
        ),
        Command::Validate { common } => (common, vec![], Action::Validate),
    };
    if let Action::Published = action {
        let outcome = published_attainability();
        print_report(&outcome.report);
        return outcome.exit_code;
    }
    let cfg = match load(&common, &extra) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = match action {
        Action::Validate => {
            print!("{}", cfg.echo());
            Ok(EXIT_OK)
        }
        Action::Mesh(out, dump) => mesh_command(&cfg, out.as_deref(), dump.as_deref()),
        Action::Experiment(kind) => {
            run_experiment(&cfg, kind.unwrap_or(cfg.kind), true).map(|o| {
                print_report(&o.report);
                o.exit_code
            })
        }
        Action::Stability { run } => {
            run_experiment(&cfg, ExperimentKind::Stability, run).map(|o| {
                print_report(&o.report);
                o.exit_code
            })
        }
        Action::Published => unreachable!("handled before loading"),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            if let Failure::Io { .. } = f {
                EXIT_IO
            } else {
                f.exit_code()
            }
        }
    }
}

enum Action {
    Mesh(Option<PathBuf>, Option<PathBuf>),
    Experiment(Option<ExperimentKind>),
    Published,
    Stability { run: bool },
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(execute(cli.command) as u8)
}
