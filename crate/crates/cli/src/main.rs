//! `seedgrow`: batch segmentation, property checks, phantoms and gradients.
//!
//! Exit codes: 0 success, 1 `check` found a violated property, 2 bad
//! arguments, 3 invalid configuration (seed out of bounds, incompatible
//! neighborhood, ...), 4 malformed input data, 5 file system error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use seedgrow_core::io::{self, SampleFormat};
use seedgrow_core::{
    check_properties, compute_gradient_with, generate_phantom, CriterionConfig, Engine, Error,
    GradientOperator, GridDims, Neighborhood, PhantomKind, PhantomSpec, RegionPredicate, SeedSet,
    Site,
};

#[derive(Parser)]
#[command(
    name = "seedgrow",
    version,
    about = "Seeded region growing on PGM images and raw volumes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow regions from seeds and write the label mask.
    Grow {
        /// Input image (.pgm) or raw volume with a .desc sidecar.
        input: PathBuf,
        /// Output mask; labels are stored verbatim (0 = unallocated).
        output: PathBuf,
        #[arg(long, value_parser = parse_engine)]
        engine: Engine,
        /// Criterion for the stack engine, e.g. `gn:k=0.25` or `and(gm:tm=0.8,int:t=12)`.
        #[arg(long, value_parser = parse_criterion)]
        criterion: Option<CriterionConfig>,
        /// Seed as x,y or x,y,z; repeat for more regions (the n-th seed is region n).
        #[arg(long = "seed", value_parser = parse_site, required = true)]
        seeds: Vec<Site>,
        /// n4 or n8 (2D), n6 (3D). Defaults: classic n8, stack n4; n6 for volumes.
        #[arg(long, value_parser = parse_neighborhood)]
        neighborhood: Option<Neighborhood>,
        /// Write the report and per-region statistics as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write a viewable PGM with one gray level per region.
        #[arg(long)]
        render: Option<PathBuf>,
    },
    /// Check the segmentation properties of a label mask.
    Check {
        input: PathBuf,
        labels: PathBuf,
        /// `dev:t=<max deviation>` or `grad:k=<fraction of Gmax>`.
        #[arg(long, value_parser = parse_predicate)]
        predicate: RegionPredicate,
        #[arg(long, value_parser = parse_neighborhood)]
        neighborhood: Option<Neighborhood>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic image and its ground-truth mask.
    Phantom {
        grid: PathBuf,
        truth: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: PhantomKind,
        /// WxH or WxHxD.
        #[arg(long, value_parser = parse_dims)]
        dims: GridDims,
        #[arg(long, default_value_t = 200.0)]
        fg: f64,
        #[arg(long, default_value_t = 20.0)]
        bg: f64,
        #[arg(long, default_value_t = 3)]
        bridge_width: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed_rng: u64,
    },
    /// Write the gradient magnitude, scaled to the output's range.
    Gradient {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_parser = parse_operator, default_value = "sobel")]
        operator: GradientOperator,
    },
    /// Run the HTTP API used by the seed studio.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn parse_engine(s: &str) -> Result<Engine, Error> {
    s.parse()
}

fn parse_criterion(s: &str) -> Result<CriterionConfig, Error> {
    s.parse()
}

fn parse_neighborhood(s: &str) -> Result<Neighborhood, Error> {
    s.parse()
}

fn parse_predicate(s: &str) -> Result<RegionPredicate, Error> {
    s.parse()
}

fn parse_kind(s: &str) -> Result<PhantomKind, Error> {
    s.parse()
}

fn parse_operator(s: &str) -> Result<GradientOperator, Error> {
    s.parse()
}

fn parse_site(s: &str) -> Result<Site, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let coord = |p: &str| {
        p.parse::<usize>()
            .map_err(|_| format!("`{p}` is not a non-negative integer coordinate"))
    };
    match parts[..] {
        [x, y] => Ok(Site::xy(coord(x)?, coord(y)?)),
        [x, y, z] => Ok(Site::new(coord(x)?, coord(y)?, coord(z)?)),
        _ => Err("expected x,y or x,y,z".into()),
    }
}

fn parse_dims(s: &str) -> Result<GridDims, String> {
    let parts: Vec<usize> = s
        .split(['x', 'X'])
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{p}` is not an extent"))
        })
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [w, h] => GridDims::new_2d(w, h),
        [w, h, d] => GridDims::new(w, h, d),
        _ => return Err("expected WxH or WxHxD".into()),
    }
    .map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn arg(name: &str, e: impl std::fmt::Display) -> Self {
        Failure {
            code: 2,
            message: format!("{name}: {e}"),
        }
    }

    fn from_core(context: &str, e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::OutOfBounds { .. } | Error::InvalidSeed { .. } => 3,
            Error::Data(_) | Error::Parse { .. } | Error::SizeMismatch { .. } => 4,
            Error::Io { .. } => 5,
        };
        let message = match e {
            // already names the path
            Error::Io { .. } => e.to_string(),
            _ => format!("{context}: {e}"),
        };
        Failure { code, message }
    }
}

fn at(context: impl AsRef<Path>) -> impl FnOnce(Error) -> Failure {
    let context = context.as_ref().display().to_string();
    move |e| Failure::from_core(&context, e)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure {
        code: 5,
        message: format!("{}: {e}", path.display()),
    })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Grow {
            input,
            output,
            engine,
            criterion,
            seeds,
            neighborhood,
            report,
            render,
        } => {
            let grid = io::load_grid(&input).map_err(at(&input))?;
            let dims = grid.dims();
            let nb = neighborhood.unwrap_or(match engine {
                Engine::Classic => Neighborhood::classic_default(dims),
                Engine::Stack => Neighborhood::stack_default(dims),
            });
            nb.check(dims)
                .map_err(|e| Failure::from_core("--neighborhood", e))?;
            let seeds = SeedSet::new(seeds).map_err(|e| Failure::from_core("--seed", e))?;
            seeds
                .check(dims)
                .map_err(|e| Failure::from_core("--seed", e))?;
            if engine == Engine::Stack && criterion.is_none() {
                return Err(Failure::arg("--criterion", "required by the stack engine"));
            }
            if engine == Engine::Classic && criterion.is_some() {
                return Err(Failure::arg(
                    "--criterion",
                    "not used by the classic engine",
                ));
            }
            let (labels, rep) =
                seedgrow_core::grow(&grid, None, &seeds, engine, nb, criterion.as_ref())
                    .map_err(|e| Failure::from_core("grow", e))?;
            io::save_mask(&labels, &output).map_err(at(&output))?;
            if let Some(path) = render {
                let shaded = io::render_labels(&labels).map_err(at(&path))?;
                io::save_grid(&shaded, &path).map_err(at(&path))?;
            }
            if let Some(path) = report {
                let doc = serde_json::json!({ "report": rep, "regions": labels.summaries() });
                let text = serde_json::to_string_pretty(&doc).expect("serializable report") + "\n";
                write(&path, text.as_bytes())?;
            }
            println!(
                "{} regions, {} of {} sites labeled, {} examined ({})",
                seeds.region_count(),
                rep.sites_accepted,
                dims.len(),
                rep.sites_examined,
                serde_json::to_value(rep.termination)
                    .expect("serializable")
                    .as_str()
                    .unwrap_or_default()
            );
            Ok(0)
        }
        Command::Check {
            input,
            labels,
            predicate,
            neighborhood,
            format,
            out,
        } => {
            let grid = io::load_grid(&input).map_err(at(&input))?;
            let map = io::load_mask(&grid, &labels).map_err(at(&labels))?;
            let nb = neighborhood.unwrap_or(Neighborhood::stack_default(grid.dims()));
            let report = check_properties(&grid, &map, predicate, nb)
                .map_err(|e| Failure::from_core("check", e))?;
            let text = match format {
                Format::Text => report.to_text(),
                Format::Json => report.to_json(),
            };
            match out {
                Some(path) => write(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
            Ok(if report.all_hold() { 0 } else { 1 })
        }
        Command::Phantom {
            grid,
            truth,
            kind,
            dims,
            fg,
            bg,
            bridge_width,
            sigma,
            seed_rng,
        } => {
            let spec = PhantomSpec {
                kind,
                dims,
                fg_intensity: fg,
                bg_intensity: bg,
                bridge_width,
                noise_sigma: sigma,
                rng_seed: seed_rng,
            };
            let (image, gt) =
                generate_phantom(&spec).map_err(|e| Failure::from_core("phantom", e))?;
            io::save_grid(&image, &grid).map_err(at(&grid))?;
            io::save_mask(&gt, &truth).map_err(at(&truth))?;
            Ok(0)
        }
        Command::Gradient {
            input,
            output,
            operator,
        } => {
            let grid = io::load_grid(&input).map_err(at(&input))?;
            let field = compute_gradient_with(&grid, operator);
            if grid.dims().is_2d() && is_pgm(&output) {
                io::write_pgm(&field.normalized(255), &output).map_err(at(&output))?;
            } else {
                io::write_volume(&field.normalized(u16::MAX), &output, SampleFormat::U16Le)
                    .map_err(at(&output))?;
            }
            println!("gmax {}", field.gmax());
            println!("gmin {}", field.gmin());
            Ok(0)
        }
        Command::Serve { addr } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure {
                code: 5,
                message: e.to_string(),
            })?;
            eprintln!("listening on http://{addr} (sessions are kept in memory only)");
            rt.block_on(seedgrow_server::serve(&addr))
                .map_err(|e| Failure {
                    code: 5,
                    message: format!("--addr {addr}: {e}"),
                })?;
            Ok(0)
        }
    }
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("seedgrow: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
