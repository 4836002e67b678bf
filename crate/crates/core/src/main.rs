//! Command-line surface: every figure/table-style result as CSV or JSON,
//! with a flat key-value config file and reproducible defaults. Identical
//! configuration (including seed) yields byte-identical output files.
//!
//! `GRIDFISHER_THREADS` caps the worker-thread count.

use clap::{Args, Parser, Subcommand};
use gridfisher::config::{parse_vector, KeyValues, Resolver};
use gridfisher::fisher::{fisher_functional, FiringField};
use gridfisher::landscape::{
    self, ChartPoint, FieldNd, RefineOptions, ScanGrid2D, SweepRecord, GRAD_STEP_DEFAULT,
    HESS_STEP_DEFAULT,
};
use gridfisher::lattice::{
    is_strongly_eutactic, named_lattice, LatticeNd, LatticeParams2D, LatticeParams3D,
    NamedLattice,
};
use gridfisher::output::{Artifact, Format, Table, Value};
use gridfisher::quadrature::QuadSpec;
use gridfisher::spike::{
    aggregate_phases, analytic_fisher_trace, empirical_fisher_trace, ml_decode, DecodeOptions,
    ModuleConfig,
};
use gridfisher::theta::{q_value, theta_translated, ThetaParams};
use gridfisher::{Error, Result};
use nalgebra::SVector;
use std::f64::consts::PI;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "gridfisher",
    version,
    about = "Fisher information of lattice-periodic Poisson population codes",
    after_help = "Numeric parameters accept plain decimals; alpha also accepts '<n>/pi'.\n\
                  A config file (flat 'key = value' lines, or a previous JSON artifact)\n\
                  supplies defaults; command-line flags override it."
)]
struct Cli {
    /// Config file: flat `key = value` lines or a previous JSON artifact.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output path; `-` writes to stdout.
    #[arg(long, global = true, default_value = "-", value_name = "PATH")]
    output: String,

    /// Output format: csv (default) or json.
    #[arg(long, global = true, value_name = "FMT")]
    format: Option<String>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Translated theta sum and analytic gradient at one point.
    Theta(ThetaArgs),
    /// Per-point Fisher density Q on a square grid around the origin.
    Qfield(QfieldArgs),
    /// Angular profile g_r(theta) = Q_Z2 - Q_A2 on the circle of radius r.
    GrProfile(GrProfileArgs),
    /// Fisher functional of one lattice over a ball field.
    Fisher(FisherArgs),
    /// F over the 2D fundamental-domain window, with argmax metadata.
    Scan2d(Scan2dArgs),
    /// F per lattice as the field radius sweeps, with difference column.
    SweepR(SweepRArgs),
    /// F per lattice as alpha sweeps at fixed radius.
    SweepAlpha(SweepAlphaArgs),
    /// F for D3, D3* and Z3 at one radius over a list of alphas.
    Compare3d(Compare3dArgs),
    /// Finite-difference chart Hessian of F, eigenvalues and classification.
    Hessian(HessianArgs),
    /// Strong-eutaxy report for the shells of a named lattice.
    Eutaxy(EutaxyArgs),
    /// Chart gradient of F across scales (volume stationarity).
    Stationarity(StationarityArgs),
    /// F along the degenerate orthorhombic family against F(A2).
    Degenerate(DegenerateArgs),
    /// Poisson spiking Monte Carlo: empirical vs analytic Fisher trace.
    Simulate(SimulateArgs),
    /// Maximum-likelihood decoding error against the Cramer-Rao bound.
    Decode(DecodeArgs),
}

#[derive(Args)]
struct ThetaArgs {
    /// A2 | Z2 | Z3 | D3 | D3star | params2d:x,y | params3d:u,v,x,y,z
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Translation point, comma-separated.
    #[arg(long)]
    y: Option<String>,
    #[arg(long = "tail-eps")]
    tail_eps: Option<String>,
    #[arg(long = "max-shell-radius")]
    max_shell_radius: Option<String>,
}

#[derive(Args)]
struct QfieldArgs {
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Half-width of the tabulated square.
    #[arg(long)]
    extent: Option<String>,
    /// Nodes per axis.
    #[arg(long)]
    n: Option<String>,
}

#[derive(Args)]
struct GrProfileArgs {
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    ntheta: Option<String>,
}

#[derive(Args)]
struct FisherArgs {
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    /// uniform | gaussian (the kernel rho(r^2) = exp(-r^2)).
    #[arg(long)]
    density: Option<String>,
    #[arg(long)]
    normalize: Option<String>,
    #[arg(long)]
    nr: Option<String>,
    #[arg(long)]
    nang: Option<String>,
    #[arg(long)]
    npolar: Option<String>,
}

#[derive(Args)]
struct Scan2dArgs {
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    ny: Option<String>,
    #[arg(long)]
    ymin: Option<String>,
    #[arg(long)]
    ymax: Option<String>,
    /// Polish the argmax by local ascent and record it in the footer.
    #[arg(long)]
    refine: Option<String>,
    #[arg(long)]
    nr: Option<String>,
    #[arg(long)]
    nang: Option<String>,
}

#[derive(Args)]
struct SweepRArgs {
    #[arg(long)]
    alpha: Option<String>,
    /// Explicit comma-separated radii (overrides rmin/rmax/rstep).
    #[arg(long)]
    radii: Option<String>,
    #[arg(long)]
    rmin: Option<String>,
    #[arg(long)]
    rmax: Option<String>,
    #[arg(long)]
    rstep: Option<String>,
    /// Comma-separated named 2D lattices.
    #[arg(long)]
    lattices: Option<String>,
    #[arg(long)]
    nr: Option<String>,
    #[arg(long)]
    nang: Option<String>,
}

#[derive(Args)]
struct SweepAlphaArgs {
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    lattices: Option<String>,
    #[arg(long)]
    nr: Option<String>,
    #[arg(long)]
    nang: Option<String>,
}

#[derive(Args)]
struct Compare3dArgs {
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    nr: Option<String>,
    #[arg(long)]
    nang: Option<String>,
    #[arg(long)]
    npolar: Option<String>,
}

#[derive(Args)]
struct HessianArgs {
    /// Named lattice or chart point (params2d:/params3d:).
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    step: Option<String>,
    #[arg(long)]
    nr: Option<String>,
    #[arg(long)]
    nang: Option<String>,
    #[arg(long)]
    npolar: Option<String>,
}

#[derive(Args)]
struct EutaxyArgs {
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    shells: Option<String>,
    #[arg(long)]
    tol: Option<String>,
}

#[derive(Args)]
struct StationarityArgs {
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    lambdas: Option<String>,
    #[arg(long)]
    step: Option<String>,
    #[arg(long)]
    nr: Option<String>,
    #[arg(long)]
    nang: Option<String>,
    #[arg(long)]
    npolar: Option<String>,
}

#[derive(Args)]
struct DegenerateArgs {
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    /// Comma-separated t values (t >= 1) of the family L_t = chart(0, t).
    #[arg(long)]
    tvalues: Option<String>,
    #[arg(long)]
    nr: Option<String>,
    #[arg(long)]
    nang: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    nphases: Option<String>,
    #[arg(long)]
    nneurons: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Position x at which the trace is estimated.
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    nr: Option<String>,
    #[arg(long)]
    nang: Option<String>,
    #[arg(long)]
    npolar: Option<String>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    nphases: Option<String>,
    #[arg(long)]
    nneurons: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "true-x")]
    true_x: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
}

fn parse_lattice_nd(s: &str) -> Result<(String, LatticeNd)> {
    if let Some(rest) = s.strip_prefix("params2d:") {
        let v = parse_vector(rest, 2, "params2d")?;
        let p = LatticeParams2D::new(v[0], v[1])?;
        return Ok((s.to_string(), LatticeNd::Two(p.to_lattice())));
    }
    if let Some(rest) = s.strip_prefix("params3d:") {
        let v = parse_vector(rest, 5, "params3d")?;
        let p = LatticeParams3D::new(v[0], v[1], v[2], v[3], v[4])?;
        return Ok((s.to_string(), LatticeNd::Three(p.to_lattice())));
    }
    let name = NamedLattice::parse(s)?;
    Ok((name.name().to_string(), named_lattice(name)))
}

fn parse_chart_point(s: &str) -> Result<(String, ChartPoint)> {
    if let Some(rest) = s.strip_prefix("params2d:") {
        let v = parse_vector(rest, 2, "params2d")?;
        return Ok((s.to_string(), ChartPoint::P2(LatticeParams2D::new(v[0], v[1])?)));
    }
    if let Some(rest) = s.strip_prefix("params3d:") {
        let v = parse_vector(rest, 5, "params3d")?;
        return Ok((
            s.to_string(),
            ChartPoint::P3(LatticeParams3D::new(v[0], v[1], v[2], v[3], v[4])?),
        ));
    }
    let name = NamedLattice::parse(s)?;
    Ok((name.name().to_string(), ChartPoint::for_named(name)))
}

fn theta_params(alpha: f64, tail: f64, cap: f64) -> Result<ThetaParams> {
    ThetaParams::new(alpha)?
        .with_tail_epsilon(tail)?
        .with_max_shell_radius(cap)
}

fn field_for(density: &str, radius: f64, normalize: bool) -> Result<FieldParts> {
    Ok(match density {
        "uniform" => FieldParts {
            two: FiringField::<2>::uniform(radius)?.with_normalize(normalize),
            three: FiringField::<3>::uniform(radius)?.with_normalize(normalize),
        },
        "gaussian" => FieldParts {
            two: FiringField::<2>::gaussian_kernel(radius)?.with_normalize(normalize),
            three: FiringField::<3>::gaussian_kernel(radius)?.with_normalize(normalize),
        },
        other => {
            return Err(Error::Config(format!(
                "unknown density '{other}' (expected uniform or gaussian)"
            )))
        }
    })
}

struct FieldParts {
    two: FiringField<2>,
    three: FiringField<3>,
}

fn sweep_table(rec: &SweepRecord) -> Table {
    let mut columns = vec![rec.parameter.name().to_string()];
    columns.extend(rec.lattice_names.iter().map(|n| format!("F_{n}")));
    let diff = rec.difference_column();
    if diff.is_some() {
        columns.push("diff".to_string());
    }
    let rows = rec
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![Value::F(r.value)];
            row.extend(r.f.iter().map(|v| Value::F(*v)));
            if let Some(d) = &diff {
                row.push(Value::F(d[i]));
            }
            row
        })
        .collect();
    Table {
        columns,
        rows,
        footer: Vec::new(),
    }
}

fn named_2d_list(s: &str) -> Result<Vec<(String, gridfisher::lattice::Lattice<2>)>> {
    s.split(',')
        .map(|tok| {
            let name = NamedLattice::parse(tok)?;
            match named_lattice(name) {
                LatticeNd::Two(l) => Ok((name.name().to_string(), l)),
                LatticeNd::Three(_) => Err(Error::Config(format!(
                    "{} is not a 2D lattice",
                    name.name()
                ))),
            }
        })
        .collect()
}

fn run(cli: &Cli) -> Result<Artifact> {
    let file = match &cli.config {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::default(),
    };
    let version = gridfisher::VERSION;
    match &cli.command {
        Cmd::Theta(a) => {
            let mut r = Resolver::new("theta", &file)?;
            let (_, lat) = parse_lattice_nd(&r.str_value("lattice", a.lattice.as_deref(), "Z2"))?;
            let alpha = r.alpha("alpha", a.alpha.as_deref(), "10/pi")?;
            let tail = r.f64_value("tail_epsilon", a.tail_eps.as_deref(), 1e-14)?;
            let cap = r.f64_value("max_shell_radius", a.max_shell_radius.as_deref(), 40.0)?;
            let y_str = r.str_value("y", a.y.as_deref(), "0,0");
            let p = theta_params(alpha, tail, cap)?;
            let mut columns = vec!["value".to_string()];
            let mut row = Vec::new();
            match &lat {
                LatticeNd::Two(l) => {
                    let y = parse_vector(&y_str, 2, "y")?;
                    let t = theta_translated(l, &SVector::<f64, 2>::new(y[0], y[1]), &p)?;
                    row.push(Value::F(t.value));
                    for i in 0..2 {
                        columns.push(format!("grad_{}", i + 1));
                        row.push(Value::F(t.gradient[i]));
                    }
                    columns.push("truncation_radius".to_string());
                    row.push(Value::F(t.truncation_radius));
                }
                LatticeNd::Three(l) => {
                    let y = parse_vector(&y_str, 3, "y")?;
                    let t = theta_translated(l, &SVector::<f64, 3>::new(y[0], y[1], y[2]), &p)?;
                    row.push(Value::F(t.value));
                    for i in 0..3 {
                        columns.push(format!("grad_{}", i + 1));
                        row.push(Value::F(t.gradient[i]));
                    }
                    columns.push("truncation_radius".to_string());
                    row.push(Value::F(t.truncation_radius));
                }
            }
            Ok(Artifact {
                config: r.finish(version)?,
                table: Table {
                    columns,
                    rows: vec![row],
                    footer: Vec::new(),
                },
            })
        }
        Cmd::Qfield(a) => {
            let mut r = Resolver::new("qfield", &file)?;
            let lat_str = r.str_value("lattice", a.lattice.as_deref(), "A2");
            let alpha = r.alpha("alpha", a.alpha.as_deref(), "10/pi")?;
            let extent = r.f64_value("extent", a.extent.as_deref(), 1.0)?;
            let n = r.usize_value("n", a.n.as_deref(), 65)?;
            if n < 2 || !(extent > 0.0) {
                return Err(Error::Config("qfield needs n >= 2 and extent > 0".into()));
            }
            let (_, lat) = parse_lattice_nd(&lat_str)?;
            let l = match lat {
                LatticeNd::Two(l) => l,
                LatticeNd::Three(_) => {
                    return Err(Error::Config("qfield tabulates 2D lattices only".into()))
                }
            };
            let p = ThetaParams::new(alpha)?;
            let mut rows = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let y1 = -extent + 2.0 * extent * i as f64 / (n - 1) as f64;
                    let y2 = -extent + 2.0 * extent * j as f64 / (n - 1) as f64;
                    let q = q_value(&l, &SVector::<f64, 2>::new(y1, y2), &p)?;
                    rows.push(vec![Value::F(y1), Value::F(y2), Value::F(q)]);
                }
            }
            Ok(Artifact {
                config: r.finish(version)?,
                table: Table {
                    columns: vec!["y1".into(), "y2".into(), "Q".into()],
                    rows,
                    footer: Vec::new(),
                },
            })
        }
        Cmd::GrProfile(a) => {
            let mut r = Resolver::new("gr-profile", &file)?;
            let radius = r.f64_value("radius", a.radius.as_deref(), 0.1)?;
            let alpha = r.alpha("alpha", a.alpha.as_deref(), "10/pi")?;
            let ntheta = r.usize_value("ntheta", a.ntheta.as_deref(), 256)?;
            let p = ThetaParams::new(alpha)?;
            let (z2, a2) = (gridfisher::lattice::z2(), gridfisher::lattice::a2());
            let mut rows = Vec::with_capacity(ntheta);
            let mut negative = true;
            for k in 0..ntheta {
                let t = 2.0 * PI * k as f64 / ntheta as f64;
                let y = SVector::<f64, 2>::new(radius * t.cos(), radius * t.sin());
                let g = q_value(&z2, &y, &p)? - q_value(&a2, &y, &p)?;
                negative &= g < 0.0;
                rows.push(vec![Value::F(t), Value::F(g)]);
            }
            Ok(Artifact {
                config: r.finish(version)?,
                table: Table {
                    columns: vec!["theta".into(), "g_r".into()],
                    rows,
                    footer: vec![("all_negative".into(), Value::B(negative))],
                },
            })
        }
        Cmd::Fisher(a) => {
            let mut r = Resolver::new("fisher", &file)?;
            let lat_str = r.str_value("lattice", a.lattice.as_deref(), "A2");
            let alpha = r.alpha("alpha", a.alpha.as_deref(), "10/pi")?;
            let radius = r.f64_value("radius", a.radius.as_deref(), 0.5)?;
            let density = r.str_value("density", a.density.as_deref(), "uniform");
            let normalize = r.bool_value("normalize", a.normalize.as_deref(), false)?;
            let nr = r.usize_value("nr", a.nr.as_deref(), 64)?;
            let nang = r.usize_value("nang", a.nang.as_deref(), 128)?;
            let npolar = r.usize_value("npolar", a.npolar.as_deref(), 32)?;
            let (_, lat) = parse_lattice_nd(&lat_str)?;
            let p = ThetaParams::new(alpha)?;
            let spec = QuadSpec {
                radial: nr,
                angular: nang,
                polar: npolar,
            };
            let fields = field_for(&density, radius, normalize)?;
            let f = match &lat {
                LatticeNd::Two(l) => {
                    let quad = fields.two.quadrature(&spec)?;
                    fisher_functional(l, &fields.two, &p, &quad)?
                }
                LatticeNd::Three(l) => {
                    let spec3 = QuadSpec {
                        angular: if a.nang.is_none() { 64 } else { nang },
                        ..spec
                    };
                    let quad = fields.three.quadrature(&spec3)?;
                    fisher_functional(l, &fields.three, &p, &quad)?
                }
            };
            Ok(Artifact {
                config: r.finish(version)?,
                table: Table {
                    columns: vec!["F".into()],
                    rows: vec![vec![Value::F(f)]],
                    footer: Vec::new(),
                },
            })
        }
        Cmd::Scan2d(a) => {
            let mut r = Resolver::new("scan2d", &file)?;
            let alpha = r.alpha("alpha", a.alpha.as_deref(), "10/pi")?;
            let radius = r.f64_value("radius", a.radius.as_deref(), 0.5)?;
            let nx = r.usize_value("nx", a.nx.as_deref(), 33)?;
            let ny = r.usize_value("ny", a.ny.as_deref(), 33)?;
            let ymin = r.f64_value("ymin", a.ymin.as_deref(), 0.8)?;
            let ymax = r.f64_value("ymax", a.ymax.as_deref(), 1.4)?;
            let refine = r.bool_value("refine", a.refine.as_deref(), false)?;
            let nr = r.usize_value("nr", a.nr.as_deref(), 64)?;
            let nang = r.usize_value("nang", a.nang.as_deref(), 128)?;
            let p = ThetaParams::new(alpha)?;
            let field = FiringField::<2>::uniform(radius)?;
            let grid = ScanGrid2D::new(nx, ny, ymin, ymax)?;
            let spec = QuadSpec {
                radial: nr,
                angular: nang,
                polar: 32,
            };
            let scan = landscape::scan_2d(&field, &p, &grid, &spec)?;
            let mut rows = Vec::with_capacity(nx * ny);
            for (k, v) in scan.values.iter().enumerate() {
                let x = scan.grid.xs[k / ny];
                let y = scan.grid.ys[k % ny];
                rows.push(vec![
                    Value::F(x),
                    Value::F(y),
                    Value::B(!v.is_nan()),
                    Value::F(*v),
                ]);
            }
            let mut footer = vec![
                ("argmax_x".to_string(), Value::F(scan.argmax.x)),
                ("argmax_y".to_string(), Value::F(scan.argmax.y)),
                ("argmax_F".to_string(), Value::F(scan.argmax.value)),
                ("argmin_x".to_string(), Value::F(scan.argmin.x)),
                ("argmin_y".to_string(), Value::F(scan.argmin.y)),
                ("argmin_F".to_string(), Value::F(scan.argmin.value)),
            ];
            if refine {
                let start = LatticeParams2D::new(scan.argmax.x, scan.argmax.y)?;
                let out =
                    landscape::refine_local(&start, &field, &p, &spec, &RefineOptions::default())?;
                footer.push(("refined_x".to_string(), Value::F(out.params.x)));
                footer.push(("refined_y".to_string(), Value::F(out.params.y)));
                footer.push(("refined_F".to_string(), Value::F(out.value)));
                footer.push(("refined_converged".to_string(), Value::B(out.converged)));
            }
            Ok(Artifact {
                config: r.finish(version)?,
                table: Table {
                    columns: vec!["x".into(), "y".into(), "in_domain".into(), "F".into()],
                    rows,
                    footer,
                },
            })
        }
        Cmd::SweepR(a) => {
            let mut r = Resolver::new("sweep-r", &file)?;
            let alpha = r.alpha("alpha", a.alpha.as_deref(), "10/pi")?;
            let lat_str = r.str_value("lattices", a.lattices.as_deref(), "A2,Z2");
            let nr = r.usize_value("nr", a.nr.as_deref(), 64)?;
            let nang = r.usize_value("nang", a.nang.as_deref(), 128)?;
            let radii = if a.radii.is_some() || file.get("radii").is_some() {
                r.f64_list("radii", a.radii.as_deref(), "0.1")?
            } else {
                let rmin = r.f64_value("rmin", a.rmin.as_deref(), 0.1)?;
                let rmax = r.f64_value("rmax", a.rmax.as_deref(), 0.7)?;
                let rstep = r.f64_value("rstep", a.rstep.as_deref(), 0.01)?;
                if !(rstep > 0.0 && rmax >= rmin) {
                    return Err(Error::Config("need rstep > 0 and rmax >= rmin".into()));
                }
                let n = ((rmax - rmin) / rstep + 1.5) as usize;
                (0..n).map(|i| rmin + rstep * i as f64).collect()
            };
            let lattices = named_2d_list(&lat_str)?;
            let p = ThetaParams::new(alpha)?;
            let spec = QuadSpec {
                radial: nr,
                angular: nang,
                polar: 32,
            };
            let rec = landscape::sweep_radius(&lattices, &radii, &p, &spec)?;
            Ok(Artifact {
                config: r.finish(version)?,
                table: sweep_table(&rec),
            })
        }
        Cmd::SweepAlpha(a) => {
            let mut r = Resolver::new("sweep-alpha", &file)?;
            let radius = r.f64_value("radius", a.radius.as_deref(), 0.16)?;
            let alphas = r.alpha_list("alphas", a.alphas.as_deref(), "1.3,3,5")?;
            let lat_str = r.str_value("lattices", a.lattices.as_deref(), "A2,Z2");
            let nr = r.usize_value("nr", a.nr.as_deref(), 64)?;
            let nang = r.usize_value("nang", a.nang.as_deref(), 128)?;
            let lattices = named_2d_list(&lat_str)?;
            let p = ThetaParams::new(1.0)?;
            let spec = QuadSpec {
                radial: nr,
                angular: nang,
                polar: 32,
            };
            let rec = landscape::sweep_alpha(&lattices, &alphas, radius, &p, &spec)?;
            Ok(Artifact {
                config: r.finish(version)?,
                table: sweep_table(&rec),
            })
        }
        Cmd::Compare3d(a) => {
            let mut r = Resolver::new("compare3d", &file)?;
            let radius = r.f64_value("radius", a.radius.as_deref(), 0.3)?;
            let alphas = r.alpha_list("alphas", a.alphas.as_deref(), "10/pi")?;
            let nr = r.usize_value("nr", a.nr.as_deref(), 64)?;
            let nang = r.usize_value("nang", a.nang.as_deref(), 64)?;
            let npolar = r.usize_value("npolar", a.npolar.as_deref(), 32)?;
            let field = FiringField::<3>::uniform(radius)?;
            let spec = QuadSpec {
                radial: nr,
                angular: nang,
                polar: npolar,
            };
            let mut table: Option<Table> = None;
            for &alpha in &alphas {
                let rec = landscape::compare_3d(&field, &ThetaParams::new(alpha)?, &spec)?;
                let t = sweep_table(&rec);
                match &mut table {
                    None => table = Some(t),
                    Some(acc) => acc.rows.extend(t.rows),
                }
            }
            Ok(Artifact {
                config: r.finish(version)?,
                table: table.expect("nonempty alpha list"),
            })
        }
        Cmd::Hessian(a) => {
            let mut r = Resolver::new("hessian", &file)?;
            let lat_str = r.str_value("lattice", a.lattice.as_deref(), "A2");
            let alpha = r.alpha("alpha", a.alpha.as_deref(), "10/pi")?;
            let radius = r.f64_value("radius", a.radius.as_deref(), 0.3)?;
            let step = r.f64_value("step", a.step.as_deref(), HESS_STEP_DEFAULT)?;
            let nr = r.usize_value("nr", a.nr.as_deref(), 64)?;
            let npolar = r.usize_value("npolar", a.npolar.as_deref(), 32)?;
            let (_, point) = parse_chart_point(&lat_str)?;
            let nang = r.usize_value(
                "nang",
                a.nang.as_deref(),
                if point.dim() == 2 { 128 } else { 64 },
            )?;
            let field = if point.dim() == 2 {
                FieldNd::Two(FiringField::<2>::uniform(radius)?)
            } else {
                FieldNd::Three(FiringField::<3>::uniform(radius)?)
            };
            let spec = QuadSpec {
                radial: nr,
                angular: nang,
                polar: npolar,
            };
            let rep = landscape::hessian_at(&point, &field, &ThetaParams::new(alpha)?, &spec, step)?;
            let k = rep.point.len();
            let mut rows = Vec::new();
            for i in 0..k {
                for j in 0..k {
                    rows.push(vec![
                        Value::S("H".into()),
                        Value::I(i as i64),
                        Value::I(j as i64),
                        Value::F(rep.matrix[(i, j)]),
                    ]);
                }
            }
            for (i, e) in rep.eigenvalues.iter().enumerate() {
                rows.push(vec![
                    Value::S("eig".into()),
                    Value::I(i as i64),
                    Value::I(0),
                    Value::F(*e),
                ]);
            }
            let footer = vec![
                (
                    "classification".to_string(),
                    Value::S(rep.classification.name().to_string()),
                ),
                ("asymmetry".to_string(), Value::F(rep.asymmetry)),
                ("step".to_string(), Value::F(rep.step)),
                (
                    "sign_convention".to_string(),
                    Value::S(
                        "eigenvalues are those of the Hessian of F itself; a local maximizer \
                         of F is negative definite here (positive definite only for -F)"
                            .to_string(),
                    ),
                ),
            ];
            Ok(Artifact {
                config: r.finish(version)?,
                table: Table {
                    columns: vec!["entry".into(), "i".into(), "j".into(), "value".into()],
                    rows,
                    footer,
                },
            })
        }
        Cmd::Eutaxy(a) => {
            let mut r = Resolver::new("eutaxy", &file)?;
            let lat_str = r.str_value("lattice", a.lattice.as_deref(), "A2");
            let shells = r.usize_value("shells", a.shells.as_deref(), 3)?;
            let tol = r.f64_value("tol", a.tol.as_deref(), 1e-9)?;
            let (_, lat) = parse_lattice_nd(&lat_str)?;
            let mut rows = Vec::new();
            let mut all = true;
            macro_rules! fill {
                ($l:expr) => {{
                    for (i, s) in $l.shells(shells)?.iter().enumerate() {
                        let dev = gridfisher::lattice::eutaxy_deviation(s);
                        let ok = is_strongly_eutactic(s, tol);
                        all &= ok;
                        rows.push(vec![
                            Value::I(i as i64 + 1),
                            Value::F(s.radius),
                            Value::I(s.count() as i64),
                            Value::F(dev),
                            Value::B(ok),
                        ]);
                    }
                }};
            }
            match &lat {
                LatticeNd::Two(l) => fill!(l),
                LatticeNd::Three(l) => fill!(l),
            }
            Ok(Artifact {
                config: r.finish(version)?,
                table: Table {
                    columns: vec![
                        "shell".into(),
                        "radius".into(),
                        "count".into(),
                        "max_deviation".into(),
                        "strongly_eutactic".into(),
                    ],
                    rows,
                    footer: vec![("all_strongly_eutactic".into(), Value::B(all))],
                },
            })
        }
        Cmd::Stationarity(a) => {
            let mut r = Resolver::new("stationarity", &file)?;
            let lat_str = r.str_value("lattice", a.lattice.as_deref(), "A2");
            let alpha = r.alpha("alpha", a.alpha.as_deref(), "10/pi")?;
            let radius = r.f64_value("radius", a.radius.as_deref(), 0.3)?;
            let lambdas = r.f64_list("lambdas", a.lambdas.as_deref(), "0.7,1,1.5")?;
            let step = r.f64_value("step", a.step.as_deref(), GRAD_STEP_DEFAULT)?;
            let nr = r.usize_value("nr", a.nr.as_deref(), 64)?;
            let npolar = r.usize_value("npolar", a.npolar.as_deref(), 32)?;
            let (label, point) = parse_chart_point(&lat_str)?;
            let nang = r.usize_value(
                "nang",
                a.nang.as_deref(),
                if point.dim() == 2 { 128 } else { 64 },
            )?;
            let field = if point.dim() == 2 {
                FieldNd::Two(FiringField::<2>::uniform(radius)?)
            } else {
                FieldNd::Three(FiringField::<3>::uniform(radius)?)
            };
            let spec = QuadSpec {
                radial: nr,
                angular: nang,
                polar: npolar,
            };
            let rep = landscape::stationarity_at(
                &label,
                &point,
                &field,
                &ThetaParams::new(alpha)?,
                &spec,
                &lambdas,
                step,
            )?;
            let k = rep.point.len();
            let mut columns = vec!["lambda".to_string()];
            columns.extend((1..=k).map(|i| format!("grad_{i}")));
            columns.push("max_abs".to_string());
            let rows = rep
                .rows
                .iter()
                .map(|row| {
                    let mut out = vec![Value::F(row.lambda)];
                    out.extend(row.gradient.iter().map(|g| Value::F(*g)));
                    out.push(Value::F(row.max_abs));
                    out
                })
                .collect();
            Ok(Artifact {
                config: r.finish(version)?,
                table: Table {
                    columns,
                    rows,
                    footer: vec![("max_abs_overall".into(), Value::F(rep.max_abs))],
                },
            })
        }
        Cmd::Degenerate(a) => {
            let mut r = Resolver::new("degenerate", &file)?;
            let alpha = r.alpha("alpha", a.alpha.as_deref(), "2/pi")?;
            let radius = r.f64_value("radius", a.radius.as_deref(), 0.1)?;
            let tvalues = r.f64_list(
                "tvalues",
                a.tvalues.as_deref(),
                "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16",
            )?;
            let nr = r.usize_value("nr", a.nr.as_deref(), 64)?;
            let nang = r.usize_value("nang", a.nang.as_deref(), 128)?;
            let field = FiringField::<2>::uniform(radius)?;
            let spec = QuadSpec {
                radial: nr,
                angular: nang,
                polar: 32,
            };
            let rec =
                landscape::degenerate_family_probe(&field, &ThetaParams::new(alpha)?, &tvalues, &spec)?;
            let mut table = sweep_table(&rec);
            table.columns = vec!["t".into(), "F_t".into(), "F_A2".into(), "diff".into()];
            let first_exceed = rec.rows.iter().find(|row| row.f[0] > row.f[1]);
            table.footer = vec![
                (
                    "exceeds_A2".to_string(),
                    Value::B(first_exceed.is_some()),
                ),
                (
                    "first_exceeding_t".to_string(),
                    first_exceed
                        .map(|row| Value::F(row.value))
                        .unwrap_or(Value::S("none".into())),
                ),
            ];
            Ok(Artifact {
                config: r.finish(version)?,
                table,
            })
        }
        Cmd::Simulate(a) => {
            let mut r = Resolver::new("simulate", &file)?;
            let lat_str = r.str_value("lattice", a.lattice.as_deref(), "A2");
            let alpha = r.alpha("alpha", a.alpha.as_deref(), "10/pi")?;
            let radius = r.f64_value("radius", a.radius.as_deref(), 0.3)?;
            let nphases = r.usize_value("nphases", a.nphases.as_deref(), 1000)?;
            let nneurons = r.usize_value("nneurons", a.nneurons.as_deref(), 3)?;
            let trials = r.usize_value("trials", a.trials.as_deref(), 20_000)?;
            let seed = r.u64_value("seed", a.seed.as_deref(), 1)?;
            let nr = r.usize_value("nr", a.nr.as_deref(), 64)?;
            let npolar = r.usize_value("npolar", a.npolar.as_deref(), 32)?;
            let (_, lat) = parse_lattice_nd(&lat_str)?;
            let nang = r.usize_value(
                "nang",
                a.nang.as_deref(),
                if lat.dim() == 2 { 128 } else { 64 },
            )?;
            let x_str = r.str_value("x", a.x.as_deref(), if lat.dim() == 2 { "0,0" } else { "0,0,0" });
            let p = ThetaParams::new(alpha)?;
            let spec = QuadSpec {
                radial: nr,
                angular: nang,
                polar: npolar,
            };
            macro_rules! simulate {
                ($l:expr, $d:literal) => {{
                    let xv = parse_vector(&x_str, $d, "x")?;
                    let x = SVector::<f64, $d>::from_iterator(xv.iter().copied());
                    let cfg = ModuleConfig::with_uniform_phases(
                        $l.clone(),
                        nphases,
                        radius,
                        nneurons,
                        p,
                        seed,
                    )?;
                    let est = empirical_fisher_trace(&cfg, &x, trials)?;
                    let analytic = analytic_fisher_trace(&cfg, &x)?;
                    let agg = aggregate_phases(&cfg)?;
                    let field = FiringField::<$d>::uniform(radius)?.with_normalize(true);
                    let quad = field.quadrature(&spec)?;
                    let f_norm = fisher_functional(&$l, &field, &p, &quad)?;
                    (est, analytic, agg, f_norm)
                }};
            }
            let (est, analytic, agg, f_norm) = match &lat {
                LatticeNd::Two(l) => simulate!(l, 2),
                LatticeNd::Three(l) => simulate!(l, 3),
            };
            let dev_se = if est.standard_error > 0.0 {
                (est.mean - analytic).abs() / est.standard_error
            } else {
                0.0
            };
            let rows = vec![
                ("empirical_trace", est.mean),
                ("trace_standard_error", est.standard_error),
                ("analytic_trace", analytic),
                ("trace_deviation_in_se", dev_se),
                ("aggregate_q_mean", agg),
                ("fisher_normalized", f_norm),
                (
                    "aggregate_relative_deviation",
                    (agg - f_norm).abs() / f_norm,
                ),
            ];
            Ok(Artifact {
                config: r.finish(version)?,
                table: Table {
                    columns: vec!["quantity".into(), "value".into()],
                    rows: rows
                        .into_iter()
                        .map(|(k, v)| vec![Value::S(k.into()), Value::F(v)])
                        .collect(),
                    footer: Vec::new(),
                },
            })
        }
        Cmd::Decode(a) => {
            let mut r = Resolver::new("decode", &file)?;
            let lat_str = r.str_value("lattice", a.lattice.as_deref(), "A2");
            let alpha = r.alpha("alpha", a.alpha.as_deref(), "10/pi")?;
            let radius = r.f64_value("radius", a.radius.as_deref(), 0.3)?;
            let nphases = r.usize_value("nphases", a.nphases.as_deref(), 50)?;
            let nneurons = r.usize_value("nneurons", a.nneurons.as_deref(), 5)?;
            let trials = r.usize_value("trials", a.trials.as_deref(), 2000)?;
            let seed = r.u64_value("seed", a.seed.as_deref(), 1)?;
            let x_str = r.str_value("true_x", a.true_x.as_deref(), "0,0");
            let window = r.f64_value("window", a.window.as_deref(), 0.25)?;
            let nodes = r.usize_value("nodes", a.nodes.as_deref(), 101)?;
            let (_, lat) = parse_lattice_nd(&lat_str)?;
            let l = match lat {
                LatticeNd::Two(l) => l,
                LatticeNd::Three(_) => {
                    return Err(Error::Config(
                        "decode operates on planar (2D) modules".into(),
                    ))
                }
            };
            let xv = parse_vector(&x_str, 2, "true_x")?;
            let cfg = ModuleConfig::with_uniform_phases(
                l,
                nphases,
                radius,
                nneurons,
                ThetaParams::new(alpha)?,
                seed,
            )?;
            let rep = ml_decode(
                &cfg,
                &SVector::<f64, 2>::new(xv[0], xv[1]),
                trials,
                &DecodeOptions {
                    window_half_width: window,
                    nodes_per_axis: nodes,
                },
            )?;
            let rows = vec![
                ("mse", rep.mse),
                ("crlb", rep.crlb),
                ("mse_over_crlb", rep.mse / rep.crlb),
                ("trials", rep.trials as f64),
            ];
            Ok(Artifact {
                config: r.finish(version)?,
                table: Table {
                    columns: vec!["quantity".into(), "value".into()],
                    rows: rows
                        .into_iter()
                        .map(|(k, v)| vec![Value::S(k.into()), Value::F(v)])
                        .collect(),
                    footer: Vec::new(),
                },
            })
        }
    }
}

fn main() {
    if let Ok(threads) = std::env::var("GRIDFISHER_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let format = match cli
        .format
        .as_deref()
        .map(Format::parse)
        .unwrap_or(Ok(Format::Csv))
    {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    };
    match run(&cli) {
        Ok(artifact) => {
            if let Err(e) = artifact.write(&cli.output, format) {
                eprintln!("error: {e}");
                std::process::exit(e.exit_code());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
