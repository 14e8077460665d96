//! Command-line front end: `envelope`, `check`, `construct`, `energy`,
//! `dict` and `validate`.
//!
//! Structured outputs are JSON (matrices row-major arrays of arrays),
//! tabular ones CSV. With `--out DIR` files are written there; otherwise the
//! main JSON document goes to stdout. Human-readable summaries go to stderr.
//! Exit codes: 0 success, 1 error, 2 a checker found a violation.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checkers::{self, CheckSettings, TestKind};
use crate::constructions::{self, Construction};
use crate::density::{self, Density};
use crate::envelope;
use crate::fields::{self, PartitionField};
use crate::linalg::{self, Matrix};
use crate::tolerances::QUAD_TOL;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATED: i32 = 2;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "SURFENV_CONFIG";

/// Largest relative homogeneity defect accepted on input densities.
const HOMOGENEITY_GATE: f64 = 1e-6;

/// Defaults for flags, read from a JSON file. Flags given on the command
/// line take precedence.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Used when a density file omits `dimension`.
    pub dimension: Option<usize>,
    pub resolution: Option<usize>,
    pub refine_iters: Option<usize>,
    pub quad_tol: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))?;
        let cfg: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::new("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(t) = self.quad_tol {
            if !(t > 0.0) {
                return Err(CliError::new("config.quad_tol", "must be > 0"));
            }
        }
        if self.dimension == Some(0) {
            return Err(CliError::new("config.dimension", "must be ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct CliError {
    pub field: String,
    pub message: String,
}

impl CliError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Parser, Debug)]
#[command(name = "surfenv", version, about = "Elliptic envelopes of interfacial energy densities")]
pub struct Cli {
    /// JSON config with flag defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rank-one envelope Φ_f(F) by linear programming plus refinement.
    Envelope {
        #[arg(short = 'd', long)]
        density: PathBuf,
        /// Matrix as a JSON array of rows.
        #[arg(short = 'F', long = "matrix")]
        matrix: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        refine_iters: Option<usize>,
        /// Symmetric constraints (F must be symmetric).
        #[arg(long)]
        symmetric: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Necessary-condition and envelope tests.
    Check {
        #[arg(short = 'd', long)]
        density: PathBuf,
        /// subadd, eta-convex, bd-sym, bv, bd, constructions or all.
        #[arg(long, default_value = "all")]
        test: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        refine_iters: Option<usize>,
        /// k values for the construction test.
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
        k: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds a competitor family: closed-form table and field.
    Construct {
        /// single_jump, subadditivity_strip, eta_convexity_triangles,
        /// symmetry_triangles or silhavy_lattice.
        #[arg(long)]
        family: String,
        /// Parameter JSON (lambda, eta, xi, eta1, eta2, atoms).
        #[arg(short = 'p', long)]
        params: PathBuf,
        #[arg(short = 'd', long)]
        density: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
        k: Vec<usize>,
        /// k of the emitted field (defaults to the first admissible k).
        #[arg(long)]
        field_k: Option<usize>,
        /// Also write a k-vs-energy CSV including field energies.
        #[arg(long)]
        plot: bool,
        #[arg(long)]
        quad_tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Jump energy of a partition field.
    Energy {
        #[arg(short = 'd', long)]
        density: PathBuf,
        #[arg(short = 'u', long)]
        field: PathBuf,
        #[arg(long)]
        quad_tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Samples and writes the atom dictionary.
    Dict {
        #[arg(short = 'd', long)]
        density: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sampled checks of the standing assumptions on a density.
    Validate {
        #[arg(short = 'd', long)]
        density: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const DEFAULT_RESOLUTION: usize = 64;
const DEFAULT_REFINE_ITERS: usize = 20;
const DEFAULT_SAMPLES: usize = 200;

fn read_json(path: &Path, field: &str) -> Result<Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(field, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::new(field, format!("invalid JSON: {e}")))
}

fn load_density(path: &Path, cfg: &Config) -> Result<Density, CliError> {
    let mut v = read_json(path, "density")?;
    if let (Some(obj), Some(n)) = (v.as_object_mut(), cfg.dimension) {
        obj.entry("dimension").or_insert(Value::from(n));
    }
    Density::from_json(&v).map_err(|e| CliError::new("density", e.to_string()))
}

/// Rejects densities that are not positively 1-homogeneous in λ.
fn homogeneous_density(path: &Path, cfg: &Config) -> Result<Density, CliError> {
    let d = load_density(path, cfg)?;
    let rep = density::validate(&d, 200, 0);
    if rep.homogeneity.value > HOMOGENEITY_GATE || rep.homogeneity.value.is_nan() {
        return Err(CliError::new(
            "density",
            format!(
                "not positively 1-homogeneous (defect {:e} at λ = {:?}, η = {:?})",
                rep.homogeneity.value, rep.homogeneity.lambda, rep.homogeneity.eta
            ),
        ));
    }
    Ok(d)
}

fn parse_matrix(v: &Value, field: &str) -> Result<Matrix, CliError> {
    let rows = v
        .as_array()
        .ok_or_else(|| CliError::new(field, "expected an array of rows"))?;
    let rows: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| vector(r, &format!("{field}[{i}]")))
        .collect::<Result<_, _>>()?;
    linalg::from_rows(&rows).ok_or_else(|| CliError::new(field, "rows must be non-empty and of equal length"))
}

fn vector(v: &Value, field: &str) -> Result<Vec<f64>, CliError> {
    v.as_array()
        .ok_or_else(|| CliError::new(field, "expected an array of numbers"))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| CliError::new(field, "expected numbers")))
        .collect()
}

fn param(obj: &Value, key: &str) -> Result<Vec<f64>, CliError> {
    let field = format!("params.{key}");
    let v = obj
        .get(key)
        .ok_or_else(|| CliError::new(field.clone(), "missing"))?;
    vector(v, &field)
}

fn need_seed(flag: Option<u64>, cfg: &Config) -> Result<u64, CliError> {
    flag.or(cfg.seed)
        .ok_or_else(|| CliError::new("seed", "required (pass --seed or set it in the config)"))
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn new(flag: Option<PathBuf>, cfg: &Config) -> Result<Output, CliError> {
        let dir = flag.or_else(|| cfg.out.clone());
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| CliError::new("out", format!("{}: {e}", d.display())))?;
        }
        Ok(Output { dir })
    }

    /// Writes `name` into the output directory, or the primary document to
    /// stdout when there is none.
    fn write(&self, name: &str, contents: &str, primary: bool) -> Result<(), CliError> {
        match &self.dir {
            Some(d) => {
                let p = d.join(name);
                fs::write(&p, contents).map_err(|e| CliError::new("out", format!("{}: {e}", p.display())))
            }
            None => {
                if primary {
                    print!("{contents}");
                }
                Ok(())
            }
        }
    }
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Envelope {
            density,
            matrix,
            resolution,
            refine_iters,
            symmetric,
            seed,
            out,
        } => {
            let d = homogeneous_density(&density, &cfg)?;
            let f = parse_matrix(&read_json(&matrix, "matrix")?, "matrix")?;
            if f.nrows() != d.dimension || f.ncols() != d.dimension {
                return Err(CliError::new(
                    "matrix",
                    format!("expected {0}×{0}, got {1}×{2}", d.dimension, f.nrows(), f.ncols()),
                ));
            }
            let seed = need_seed(seed, &cfg)?;
            let res = resolution.or(cfg.resolution).unwrap_or(DEFAULT_RESOLUTION);
            let iters = refine_iters.or(cfg.refine_iters).unwrap_or(DEFAULT_REFINE_ITERS);
            let dict = envelope::sample_dictionary(&d, res, seed)
                .map_err(|e| CliError::new("resolution", e.to_string()))?;
            let r = if symmetric {
                envelope::envelope_refined_symmetric(&d, &f, &dict, iters)
            } else {
                envelope::envelope_refined_full(&d, &f, &dict, iters)
            }
            .map_err(|e| CliError::new("matrix", e.to_string()))?;
            let o = Output::new(out, &cfg)?;
            o.write("envelope.json", &pretty(&r), true)?;
            eprintln!(
                "envelope {:.10} (gap {:.3e}, {} terms)",
                r.value,
                r.gap,
                r.decomposition.terms.len()
            );
            Ok(EXIT_OK)
        }
        Command::Check {
            density,
            test,
            samples,
            seed,
            resolution,
            refine_iters,
            k,
            out,
        } => {
            let d = homogeneous_density(&density, &cfg)?;
            let tests: Vec<TestKind> = if test == "all" {
                vec![
                    TestKind::Subadd,
                    TestKind::EtaConvex,
                    TestKind::BdSym,
                    TestKind::Bv,
                    TestKind::Bd,
                    TestKind::Constructions,
                ]
            } else {
                vec![TestKind::parse(&test).ok_or_else(|| {
                    CliError::new(
                        "test",
                        format!("unknown test `{test}` (subadd, eta-convex, bd-sym, bv, bd, constructions, all)"),
                    )
                })?]
            };
            let seed = need_seed(seed, &cfg)?;
            let samples = samples.or(cfg.samples).unwrap_or(DEFAULT_SAMPLES);
            let needs_dict = tests.iter().any(|t| matches!(t, TestKind::Bv | TestKind::Bd));
            let dict = if needs_dict {
                let res = resolution.or(cfg.resolution).unwrap_or(DEFAULT_RESOLUTION);
                Some(
                    envelope::sample_dictionary(&d, res, seed)
                        .map_err(|e| CliError::new("resolution", e.to_string()))?,
                )
            } else {
                None
            };
            let settings = CheckSettings {
                samples,
                seed,
                dict: dict.as_ref(),
                refine_iters: refine_iters.or(cfg.refine_iters).unwrap_or(DEFAULT_REFINE_ITERS),
                ks: k,
            };
            let mut reports = Vec::new();
            for t in tests {
                let r = checkers::run_check(&d, t, &settings)
                    .map_err(|e| CliError::new(t.name(), e.to_string()))?;
                eprintln!("{}", r.message);
                reports.push(r);
            }
            let o = Output::new(out, &cfg)?;
            o.write("report.json", &pretty(&reports), true)?;
            Ok(if reports.iter().any(|r| r.violated()) {
                EXIT_VIOLATED
            } else {
                EXIT_OK
            })
        }
        Command::Construct {
            family,
            params,
            density,
            k,
            field_k,
            plot,
            quad_tol,
            out,
        } => {
            let d = homogeneous_density(&density, &cfg)?;
            let p = read_json(&params, "params")?;
            let first = match k.iter().copied().find(|&kk| build(&family, &p, kk).is_ok()) {
                Some(kk) => kk,
                None => {
                    build(&family, &p, k.first().copied().unwrap_or(0))?;
                    return Err(CliError::new("k", "no admissible k in the list"));
                }
            };
            let c = build(&family, &p, field_k.unwrap_or(first))?;
            if c.eta_dimension() != d.dimension {
                return Err(CliError::new("params", "dimension differs from the density"));
            }
            let tol = quad_tol.or(cfg.quad_tol).unwrap_or(QUAD_TOL);
            if !(tol > 0.0) {
                return Err(CliError::new("quad_tol", "must be > 0"));
            }
            let o = Output::new(out, &cfg)?;
            let limit = c.limit(&d);
            let mut rows = Vec::new();
            let mut plot_rows = Vec::new();
            for &kk in &k {
                let ck = match c.with_k(kk) {
                    Ok(ck) => ck,
                    Err(e) => {
                        eprintln!("skipping k = {kk}: {e}");
                        continue;
                    }
                };
                let cf = ck.closed_form(&d);
                rows.push(vec![kk.to_string(), cf.to_string(), limit.to_string()]);
                if plot {
                    let field = if ck.field_cells_estimate() <= checkers::FIELD_CELL_CAP {
                        ck.field()
                            .ok()
                            .and_then(|f| fields::total_energy(&d, &f, tol).ok())
                            .map(|e| (e.total * ck.field_scale()).to_string())
                            .unwrap_or_default()
                    } else {
                        String::new()
                    };
                    plot_rows.push(vec![
                        kk.to_string(),
                        cf.to_string(),
                        ck.valid_bound_at(&d, kk).to_string(),
                        limit.to_string(),
                        ck.reference(&d).to_string(),
                        field,
                    ]);
                }
            }
            let table = csv_string(&["k", "closed_form", "limit"], &rows);
            let field_json = match c.field() {
                Ok(f) => Some(f.to_json()),
                Err(e) => {
                    eprintln!("no field at k = {}: {e}", c.k);
                    None
                }
            };
            let doc = serde_json::json!({
                "construction": c,
                "bound": c.bound_kind(),
                "limit": limit,
                "reference": c.reference(&d),
                "rate_constant": c.rate_constant(&d),
                "field": field_json,
            });
            o.write("construction.json", &pretty(&doc), true)?;
            o.write("closed_forms.csv", &table, false)?;
            if let Some(f) = &field_json {
                o.write("field.json", &pretty(f), false)?;
            }
            if plot {
                let csv = csv_string(
                    &["k", "closed_form", "valid_bound", "limit", "reference", "field_energy"],
                    &plot_rows,
                );
                o.write(&format!("plot_{}.csv", c.name()), &csv, false)?;
            }
            eprintln!("{} at k = {}: limit {limit:.10}", c.name(), c.k);
            Ok(EXIT_OK)
        }
        Command::Energy {
            density,
            field,
            quad_tol,
            out,
        } => {
            let d = homogeneous_density(&density, &cfg)?;
            if d.dimension != 2 {
                return Err(CliError::new("density.dimension", "fields are two-dimensional"));
            }
            let u = PartitionField::from_json(&read_json(&field, "field")?)
                .map_err(|e| CliError::new("field", e.to_string()))?;
            let tol = quad_tol.or(cfg.quad_tol).unwrap_or(QUAD_TOL);
            if !(tol > 0.0) {
                return Err(CliError::new("quad_tol", "must be > 0"));
            }
            let edges = fields::extract_jump_edges(&u);
            let e = fields::energy_of_edges(&d, &edges, tol)
                .map_err(|e| CliError::new("field", e.to_string()))?;
            let o = Output::new(out, &cfg)?;
            let doc = serde_json::json!({
                "total": e.total,
                "quadrature_error_bound": e.quadrature_error_bound,
                "edges": edges.len(),
                "admissible": u.admissible,
                "per_edge": e.per_edge,
            });
            o.write("energy.json", &pretty(&doc), true)?;
            let rows: Vec<Vec<String>> = edges
                .iter()
                .zip(&e.per_edge)
                .map(|(ed, (i, v))| {
                    vec![
                        i.to_string(),
                        ed.p[0].to_string(),
                        ed.p[1].to_string(),
                        ed.q[0].to_string(),
                        ed.q[1].to_string(),
                        ed.normal[0].to_string(),
                        ed.normal[1].to_string(),
                        ed.length().to_string(),
                        v.to_string(),
                    ]
                })
                .collect();
            let header = ["edge", "px", "py", "qx", "qy", "nx", "ny", "length", "energy"];
            o.write("edges.csv", &csv_string(&header, &rows), false)?;
            eprintln!("energy {:.12} over {} edges", e.total, edges.len());
            Ok(EXIT_OK)
        }
        Command::Dict {
            density,
            resolution,
            seed,
            out,
        } => {
            let d = homogeneous_density(&density, &cfg)?;
            let seed = need_seed(seed, &cfg)?;
            let res = resolution.or(cfg.resolution).unwrap_or(DEFAULT_RESOLUTION);
            let dict = envelope::sample_dictionary(&d, res, seed)
                .map_err(|e| CliError::new("resolution", e.to_string()))?;
            let o = Output::new(out, &cfg)?;
            o.write("dictionary.json", &pretty(&dict), true)?;
            eprintln!("{} atoms", dict.atoms.len());
            Ok(EXIT_OK)
        }
        Command::Validate {
            density,
            samples,
            seed,
            out,
        } => {
            let d = load_density(&density, &cfg)?;
            let seed = need_seed(seed, &cfg)?;
            let samples = samples.or(cfg.samples).unwrap_or(DEFAULT_SAMPLES);
            let rep = density::validate(&d, samples, seed);
            let o = Output::new(out, &cfg)?;
            o.write("validation.json", &pretty(&rep), true)?;
            eprintln!("max violation {:e}", rep.max_violation());
            Ok(EXIT_OK)
        }
    }
}

/// Builds a construction from its family name and parameter JSON.
pub fn build(family: &str, p: &Value, k: usize) -> Result<Construction, CliError> {
    let err = |e: constructions::ConstructionError| CliError::new("params", e.to_string());
    match family {
        "single_jump" => constructions::single_jump(&param(p, "lambda")?, &param(p, "eta")?).map_err(err),
        "subadditivity_strip" => constructions::subadditivity_strip(
            &param(p, "lambda")?,
            &param(p, "xi")?,
            &param(p, "eta")?,
            k,
        )
        .map_err(err),
        "eta_convexity_triangles" => constructions::eta_convexity_triangles(
            &param(p, "lambda")?,
            &param(p, "eta1")?,
            &param(p, "eta2")?,
            k,
        )
        .map_err(err),
        "symmetry_triangles" => {
            constructions::symmetry_triangles(&param(p, "lambda")?, &param(p, "eta")?, k).map_err(err)
        }
        "silhavy_lattice" => {
            let lambda = param(p, "lambda")?;
            let eta = param(p, "eta")?;
            let atoms = match p.get("atoms") {
                None | Some(Value::Null) => constructions::symmetrized_atoms(&lambda, &eta),
                Some(Value::Array(list)) => list
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        let l = a
                            .get("lambda")
                            .ok_or_else(|| CliError::new(format!("params.atoms[{i}].lambda"), "missing"))?;
                        let e = a
                            .get("eta")
                            .ok_or_else(|| CliError::new(format!("params.atoms[{i}].eta"), "missing"))?;
                        Ok((
                            vector(l, &format!("params.atoms[{i}].lambda"))?,
                            vector(e, &format!("params.atoms[{i}].eta"))?,
                        ))
                    })
                    .collect::<Result<_, CliError>>()?,
                Some(_) => return Err(CliError::new("params.atoms", "expected an array")),
            };
            constructions::silhavy_lattice(&lambda, &eta, &atoms, k).map_err(err)
        }
        other => Err(CliError::new("family", format!("unknown family `{other}`"))),
    }
}
