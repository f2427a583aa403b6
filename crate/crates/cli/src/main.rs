//! `kfree`: command-line access to k-free lattice point computations.
//!
//! Exit codes: 0 success, 1 a check that ran but failed (`verify`,
//! `check-admissible`), 2 invalid input, 3 resource budget exceeded.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod format;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use kfree_core::diffraction::{
    empirical_amplitude, enumerate_spectrum, figure2_dataset, intensity, SpectrumWindow,
};
use kfree_core::dynamics::{proximality_witness, verify_proximality, ProximalityWitness};
use kfree_core::kfree::{
    count_in_ball, find_hole, generate, is_admissible, verify_hole, Configuration, HoleCertificate,
    KFreeParams,
};
use kfree_core::lattice::{ball_volume, LatticeSpec};
use kfree_core::patches::{census, entropy_estimate, frequency_empirical, FrequencyEngine};
use kfree_core::{Execution, Lattice};

use format::{emit, encode_points, parse_point, parse_points, sig12};

#[derive(Parser, Debug)]
#[command(
    name = "kfree",
    version,
    about = "k-free lattice points: generation, frequencies, diffraction, certificates"
)]
struct Cli {
    /// Worker threads (default: all available cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct LatticeArgs {
    /// `Z2`, `Z3`, ..., `Zn` together with --n, or a path to a lattice JSON
    /// file `{"n": 2, "basis": [[1,0],[1,1]]}`.
    #[arg(long, default_value = "Z2")]
    lattice: String,

    /// Dimension, required with `--lattice Zn`.
    #[arg(long)]
    n: Option<usize>,

    /// Power k: points whose coordinate gcd is k-free.
    #[arg(long, default_value_t = 1)]
    k: u32,
}

#[derive(Args, Debug, Clone)]
struct OutArgs {
    /// Artifact path; relative paths go under $KFREE_OUT_DIR when set.
    /// Without it the artifact is written to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump V ∩ B_R(0) as CSV of lattice coordinates.
    Generate {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long)]
        radius: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Count-in-ball density against 1/zeta(nk).
    Density {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, default_value_t = 500.0)]
        radius: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// CRT hole certificate for a hole of inradius r.
    Holes {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Patch census of V as JSON.
    Patches {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, default_value_t = 1.1)]
        rho: f64,
        #[arg(long, default_value_t = 500.0)]
        scan: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Empirical and exact frequency for every patch of the census.
    Freq {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, default_value_t = 1.1)]
        rho: f64,
        #[arg(long, default_value_t = 500.0)]
        scan: f64,
        /// Target certified error of each exact frequency.
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Patch-counting entropy estimates at one radius.
    Entropy {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, default_value_t = 2.0)]
        rho: f64,
        #[arg(long, default_value_t = 500.0)]
        scan: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Plot data of the diffraction: y, q, intensity, I(y)/I(0).
    Diffraction {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Lower corner then upper corner, e.g. 0,0,2,2.
        #[arg(long = "box", default_value = "0,0,2,2")]
        window: String,
        /// Relative intensity floor I(y)/I(0).
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Exact spectrum points as JSON, optionally with finite-volume amplitudes.
    Spectrum {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long = "box", default_value = "0,0,1,1")]
        window: String,
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
        /// Also compute |a_R(y)|^2 at this radius for the strongest points.
        #[arg(long)]
        amplitude_radius: Option<f64>,
        /// How many points get an empirical amplitude.
        #[arg(long, default_value_t = 5)]
        amplitude_count: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Proximality witness for the pair V, V + s.
    Proximality {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Shift s, e.g. 1,0.
        #[arg(long, allow_hyphen_values = true)]
        shift: String,
        #[arg(long, default_value_t = 2.0)]
        rho: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Exit 0 iff the configuration misses a coset mod p^k Lambda for every p.
    CheckAdmissible {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Points `a,b;c,d;...`.
        #[arg(long, allow_hyphen_values = true)]
        points: String,
    },
    /// Exit 0 iff a hole or proximality certificate checks out.
    Verify {
        #[arg(long)]
        certificate: PathBuf,
    },
}

/// A certificate with everything needed to re-check it. Typed throughout:
/// centres can exceed the 64-bit range of a generic JSON value.
#[derive(Serialize, Deserialize, Debug)]
struct Envelope<C> {
    kind: String,
    lattice: LatticeSpec,
    k: u32,
    certificate: C,
}

/// Outcome of a check that completed normally.
enum Outcome {
    Done,
    CheckFailed,
}

fn setup(args: &LatticeArgs) -> Result<(KFreeParams, Lattice)> {
    let spec = if let Some(rest) = args
        .lattice
        .strip_prefix('Z')
        .filter(|r| !r.contains(['/', '.']))
    {
        let n = if rest == "n" {
            args.n.context("--lattice Zn needs --n")?
        } else {
            rest.parse::<usize>().with_context(|| {
                format!(
                    "unknown lattice {:?}; use Z2, Zn or a JSON path",
                    args.lattice
                )
            })?
        };
        LatticeSpec {
            n,
            basis: None,
            min_norm: None,
        }
    } else {
        let text = std::fs::read_to_string(&args.lattice)
            .with_context(|| format!("cannot read lattice file {}", args.lattice))?;
        serde_json::from_str(&text)
            .with_context(|| format!("malformed lattice JSON in {}", args.lattice))?
    };
    if let Some(n) = args.n {
        if n != spec.n {
            bail!("--n {n} disagrees with the lattice dimension {}", spec.n);
        }
    }
    let lat = Lattice::from_spec(&spec)?;
    let params = KFreeParams::new(spec.n, args.k)?;
    Ok((params, lat))
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn report(path: Option<PathBuf>, summary: &str) {
    match path {
        Some(p) => println!("{summary} -> {}", p.display()),
        None => eprintln!("{summary}"),
    }
}

fn parse_box(s: &str, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("malformed box {s:?}; expected lower then upper corner"))?;
    if v.len() != 2 * n {
        bail!("box {s:?} needs {} numbers for dimension {n}", 2 * n);
    }
    Ok((v[..n].to_vec(), v[n..].to_vec()))
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Generate {
            lattice,
            radius,
            out,
        } => {
            let (params, lat) = setup(&lattice)?;
            let cfg = generate(&params, &lat, radius)?;
            let n = params.n();
            let mut body = (1..=n)
                .map(|i| format!("z{i}"))
                .collect::<Vec<_>>()
                .join(",");
            body.push('\n');
            for p in cfg.points() {
                let row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
                writeln!(body, "{}", row.join(","))?;
            }
            let path = emit(out.out.as_deref(), &body)?;
            report(
                path,
                &format!(
                    "{} points of V in the open ball of radius {radius}",
                    cfg.len()
                ),
            );
        }
        Command::Density {
            lattice,
            radius,
            out,
        } => {
            let (params, lat) = setup(&lattice)?;
            if !(radius > 0.0) {
                bail!("radius must be positive");
            }
            let count = count_in_ball(&params, &lat, radius, Execution::default())?;
            let estimate = count as f64 / ball_volume(params.n(), radius);
            #[derive(Serialize)]
            struct DensityReport {
                n: usize,
                k: u32,
                radius: f64,
                count: u64,
                estimate: f64,
                limit: f64,
                difference: f64,
            }
            let r = DensityReport {
                n: params.n(),
                k: params.k(),
                radius,
                count,
                estimate,
                limit: params.density(),
                difference: estimate - params.density(),
            };
            let path = emit(out.out.as_deref(), &json(&r)?)?;
            report(
                path,
                &format!(
                    "density {} (1/zeta({}) = {})",
                    sig12(estimate),
                    params.exponent(),
                    sig12(r.limit)
                ),
            );
        }
        Command::Holes {
            lattice,
            radius,
            out,
        } => {
            let (params, lat) = setup(&lattice)?;
            let cert = find_hole(&params, &lat, radius)?;
            let ok = verify_hole(&cert, &params, &lat);
            let env = Envelope {
                kind: "hole".into(),
                lattice: lat.to_spec(),
                k: params.k(),
                certificate: cert.clone(),
            };
            let path = emit(out.out.as_deref(), &json(&env)?)?;
            report(
                path,
                &format!(
                    "hole of radius {radius}: {} primes, modulus {}, verified {ok}",
                    cert.assignment.len(),
                    cert.modulus
                ),
            );
            if !ok {
                return Ok(Outcome::CheckFailed);
            }
        }
        Command::Patches {
            lattice,
            rho,
            scan,
            out,
        } => {
            let (params, lat) = setup(&lattice)?;
            let c = census(&params, &lat, rho, scan)?;
            let path = emit(out.out.as_deref(), &json(&c)?)?;
            report(
                path,
                &format!(
                    "{} distinct patches over {} translates",
                    c.distinct(),
                    c.translates
                ),
            );
        }
        Command::Freq {
            lattice,
            rho,
            scan,
            tolerance,
            out,
        } => {
            let (params, lat) = setup(&lattice)?;
            let c = census(&params, &lat, rho, scan)?;
            let engine = FrequencyEngine::new(&params, &lat, rho)?;
            let mut body = String::from("id,size,points,count,empirical,exact,truncation_error\n");
            let mut worst: f64 = 0.0;
            for (id, patch) in c.iter_patches().enumerate() {
                let exact = engine.evaluate(&patch, tolerance)?;
                let emp = frequency_empirical(&c, &patch)?;
                worst = worst.max((emp - exact.value).abs());
                writeln!(
                    body,
                    "{id},{},{},{},{},{},{}",
                    patch.len(),
                    encode_points(patch.points()),
                    c.count_of(&patch),
                    sig12(emp),
                    sig12(exact.value),
                    sig12(exact.truncation_error)
                )?;
            }
            let path = emit(out.out.as_deref(), &body)?;
            report(
                path,
                &format!(
                    "{} patches, max |empirical - exact| = {}",
                    c.distinct(),
                    sig12(worst)
                ),
            );
        }
        Command::Entropy {
            lattice,
            rho,
            scan,
            out,
        } => {
            let (params, lat) = setup(&lattice)?;
            let e = entropy_estimate(&params, &lat, rho, scan)?;
            let path = emit(out.out.as_deref(), &json(&e)?)?;
            report(
                path,
                &format!(
                    "N({rho}) = {}, empirical {}, interpolation bound {}, limit {}",
                    e.distinct_patches,
                    sig12(e.empirical),
                    sig12(e.interpolation_lower),
                    sig12(e.limit)
                ),
            );
        }
        Command::Diffraction {
            lattice,
            window,
            threshold,
            out,
        } => {
            let (params, lat) = setup(&lattice)?;
            let (lo, hi) = parse_box(&window, params.n())?;
            let window = SpectrumWindow::new(lo, hi, threshold)?;
            let rows = figure2_dataset(&params, &lat, &window)?;
            let n = params.n();
            let mut body = (1..=n)
                .map(|i| format!("y{i}"))
                .collect::<Vec<_>>()
                .join(",");
            body.push_str(",q,intensity,ratio\n");
            for r in &rows {
                let ys: Vec<String> = r.y.iter().map(|&v| sig12(v)).collect();
                writeln!(
                    body,
                    "{},{},{},{}",
                    ys.join(","),
                    r.q,
                    sig12(r.intensity),
                    sig12(r.ratio)
                )?;
            }
            let path = emit(out.out.as_deref(), &body)?;
            let mut qs: Vec<u64> = rows.iter().map(|r| r.q).collect();
            qs.sort_unstable();
            qs.dedup();
            report(
                path,
                &format!("{} spectrum points, denominators {qs:?}", rows.len()),
            );
        }
        Command::Spectrum {
            lattice,
            window,
            threshold,
            amplitude_radius,
            amplitude_count,
            out,
        } => {
            let (params, lat) = setup(&lattice)?;
            let (lo, hi) = parse_box(&window, params.n())?;
            let points =
                enumerate_spectrum(&SpectrumWindow::new(lo, hi, threshold)?, &params, &lat)?;
            #[derive(Serialize)]
            struct Entry {
                #[serde(flatten)]
                point: kfree_core::SpectrumPoint,
                #[serde(skip_serializing_if = "Option::is_none")]
                empirical_intensity: Option<f64>,
            }
            let mut entries = Vec::with_capacity(points.len());
            for (i, point) in points.into_iter().enumerate() {
                let empirical_intensity = match amplitude_radius {
                    Some(r) if i < amplitude_count => {
                        Some(empirical_amplitude(&point.y, &params, &lat, r)?.norm_sqr())
                    }
                    _ => None,
                };
                entries.push(Entry {
                    point,
                    empirical_intensity,
                });
            }
            let path = emit(out.out.as_deref(), &json(&entries)?)?;
            report(
                path,
                &format!(
                    "{} spectrum points, I(0) = {}",
                    entries.len(),
                    sig12(intensity(1, &params)?)
                ),
            );
        }
        Command::Proximality {
            lattice,
            shift,
            rho,
            out,
        } => {
            let (params, lat) = setup(&lattice)?;
            let s = parse_point(&shift)?;
            let w = proximality_witness(&s, rho, &params, &lat)?;
            let ok = verify_proximality(&w, &params, &lat);
            let env = Envelope {
                kind: "proximality".into(),
                lattice: lat.to_spec(),
                k: params.k(),
                certificate: w.clone(),
            };
            let path = emit(out.out.as_deref(), &json(&env)?)?;
            report(
                path,
                &format!(
                    "t = {:?}: empty {rho}-patches for V and V + s, d <= {}, verified {ok}",
                    w.t.coords(),
                    sig12(w.distance_bound())
                ),
            );
            if !ok {
                return Ok(Outcome::CheckFailed);
            }
        }
        Command::CheckAdmissible { lattice, points } => {
            let (params, lat) = setup(&lattice)?;
            let cfg = Configuration::new(parse_points(&points)?, None);
            cfg.validate(&lat)?;
            let ok = is_admissible(&cfg, &params);
            println!("{}", if ok { "admissible" } else { "not admissible" });
            if !ok {
                return Ok(Outcome::CheckFailed);
            }
        }
        Command::Verify { certificate } => {
            return verify(&certificate);
        }
    }
    Ok(Outcome::Done)
}

fn verify(path: &Path) -> Result<Outcome> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read certificate {}", path.display()))?;
    let head: Envelope<serde::de::IgnoredAny> = serde_json::from_str(&text)
        .with_context(|| format!("malformed certificate JSON in {}", path.display()))?;
    let lat = Lattice::from_spec(&head.lattice)?;
    let params = KFreeParams::new(head.lattice.n, head.k)?;
    let ok = match head.kind.as_str() {
        "hole" => {
            let env: Envelope<HoleCertificate> =
                serde_json::from_str(&text).context("malformed hole certificate")?;
            verify_hole(&env.certificate, &params, &lat)
        }
        "proximality" => {
            let env: Envelope<ProximalityWitness> =
                serde_json::from_str(&text).context("malformed proximality certificate")?;
            verify_proximality(&env.certificate, &params, &lat)
        }
        other => bail!("unknown certificate kind {other:?}; expected hole or proximality"),
    };
    println!(
        "{} certificate: {}",
        head.kind,
        if ok { "valid" } else { "INVALID" }
    );
    Ok(if ok {
        Outcome::Done
    } else {
        Outcome::CheckFailed
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let budget = e
                .chain()
                .filter_map(|c| c.downcast_ref::<kfree_core::Error>())
                .any(kfree_core::Error::is_budget);
            ExitCode::from(if budget { 3 } else { 2 })
        }
    }
}
