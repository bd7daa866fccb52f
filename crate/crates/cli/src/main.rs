//! `tlq`: reduce netlists, trace pole loci, invert the transfer matrix and
//! compare the reduced model against the ladder oracle.
//!
//! Exit codes: 0 success, 2 input error, 3 model invariant violation,
//! 4 numerical precondition violation.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tlq_core::dynamics::{
    assemble_rhs, integrate, ladder_oracle, IntegrateOptions, LadderOptions, LadderSystem, ReducedState,
};
use tlq_core::inversion::{
    invert_ifft, invert_partial_fractions, normalize_max_abs, write_impulse_csv, IfftOptions, PartialFractions,
};
use tlq_core::netlist::{derive_reduced_model, CircuitTopology, ReducedModel};
use tlq_core::quantum::{propagator_of, CanonicalSystem, ResidualReport};
use tlq_core::spectral::{pole_locus, Entry, LcExampleParams, LocusRow, PoleLocus};
use tlq_core::tline::{thevenin_source, LineInitialState, LineParams, SampledProfile};
use tlq_core::{Error, OutOfDomain, Signal, TimeGrid};

/// Largest invariant residual accepted by `reduce`.
const INVARIANT_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "tlq", version, about = "Transmission line coupled to a lumped circuit")]
struct Cli {
    /// Output directory (created if missing).
    #[arg(long, global = true, env = "TLQ_OUT_DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a netlist to the one-port model and check its identities.
    Reduce(ReduceArgs),
    /// Branch-tracked poles of the LC example over a g grid.
    Poles(PolesArgs),
    /// Impulse-response matrix of the LC example (IFFT and residues).
    Impulse(ImpulseArgs),
    /// Reduced model against the LC-ladder oracle.
    Simulate(SimulateArgs),
    /// Symplectic residual of a linear propagator.
    Symplectic(SymplecticArgs),
}

#[derive(Args, Clone, Copy)]
struct Units {
    /// Work with ω_r = 1 (the default).
    #[arg(long, conflicts_with = "omega_r")]
    normalized: bool,
    /// Resonance frequency ω_r in physical units.
    #[arg(long)]
    omega_r: Option<f64>,
}

impl Units {
    fn omega(&self) -> f64 {
        if self.normalized {
            1.0
        } else {
            self.omega_r.unwrap_or(1.0)
        }
    }
}

#[derive(Args)]
struct ReduceArgs {
    netlist: PathBuf,
    /// Characteristic impedance of the line.
    #[arg(long, default_value_t = 1.0)]
    zc: f64,
}

#[derive(Args)]
struct PolesArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0], allow_negative_numbers = true)]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = 0.001)]
    g_min: f64,
    #[arg(long, default_value_t = 0.999)]
    g_max: f64,
    #[arg(long, default_value_t = 0.001)]
    g_step: f64,
    #[command(flatten)]
    units: Units,
}

#[derive(Args)]
struct ImpulseArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.8], allow_negative_numbers = true)]
    g: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [2.0], allow_negative_numbers = true)]
    alpha: Vec<f64>,
    /// Horizon in resonance periods T_r.
    #[arg(long, default_value_t = 10.0)]
    periods: f64,
    /// Absolute horizon; overrides --periods.
    #[arg(long)]
    t_max: Option<f64>,
    /// FFT length (rounded up to a power of two).
    #[arg(long, default_value_t = 65_536)]
    n: usize,
    /// Bromwich abscissa (physical units).
    #[arg(long)]
    sigma: Option<f64>,
    /// Also write each entry divided by its largest absolute value.
    #[arg(long)]
    normalize_output: bool,
    #[command(flatten)]
    units: Units,
}

#[derive(Args)]
struct CircuitArgs {
    /// Netlist file; without it the LC example given by --g and --alpha is used.
    #[arg(long)]
    netlist: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    g: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Line impedance (netlist mode only; the LC example uses Z_c = α Z_r).
    #[arg(long)]
    zc: Option<f64>,
    /// Phase velocity of the line.
    #[arg(long, default_value_t = 1.0)]
    vp: f64,
    #[command(flatten)]
    units: Units,
}

struct Circuit {
    topology: CircuitTopology,
    model: ReducedModel,
    line: LineParams,
    /// Resonance period when the LC example is used.
    period: Option<f64>,
}

impl CircuitArgs {
    fn build(&self) -> Result<Circuit, Failure> {
        if let Some(path) = &self.netlist {
            let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let topology: CircuitTopology = text.parse()?;
            let zc = self.zc.ok_or_else(|| Failure::input("--zc is required with --netlist"))?;
            let model = derive_reduced_model(&topology, zc)?;
            let line = LineParams::from_impedance(zc, self.vp)?;
            Ok(Circuit { topology, model, line, period: None })
        } else {
            let p = LcExampleParams::from_dimensionless(self.g, self.alpha, self.units.omega())?;
            let line = LineParams::from_impedance(p.z_c, self.vp)?;
            Ok(Circuit { topology: p.topology()?, model: p.reduced_model()?, line, period: Some(p.period()) })
        }
    }

    fn horizon(&self, circuit: &Circuit, t_max: Option<f64>, periods: f64) -> Result<f64, Failure> {
        match (t_max, circuit.period) {
            (Some(t), _) => Ok(t),
            (None, Some(tr)) => Ok(periods * tr),
            (None, None) => Err(Failure::input("--t-max is required with --netlist")),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    circuit: CircuitArgs,
    /// Initial node fluxes, comma separated (default: Φ₁ = 1, others 0).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    phi: Vec<f64>,
    /// Initial node charges, comma separated (default 0).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    q: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    q0: f64,
    /// Initial line flux profile, CSV `x,phi` (requires --line-q).
    #[arg(long, requires = "line_q")]
    line_phi: Option<PathBuf>,
    /// Initial line charge-density profile, CSV `x,q` (requires --line-phi).
    #[arg(long, requires = "line_phi")]
    line_q: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    periods: f64,
    #[arg(long)]
    t_max: Option<f64>,
    /// Output samples.
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 4000)]
    sections: usize,
    /// Ladder length; defaults to just beyond the echo window.
    #[arg(long)]
    length: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SystemKind {
    Ladder,
    Reduced,
    Lumped,
}

#[derive(Args)]
struct SymplecticArgs {
    #[command(flatten)]
    circuit: CircuitArgs,
    #[arg(long, value_enum, default_value_t = SystemKind::Ladder)]
    system: SystemKind,
    #[arg(long, default_value_t = 5.0)]
    periods: f64,
    #[arg(long)]
    t_max: Option<f64>,
    /// Leapfrog step; defaults to T_r/1000.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 100)]
    sections: usize,
    #[arg(long)]
    length: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Invariant(String),
    Numerical(String),
}

impl Failure {
    fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Invariant(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Invariant(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InactiveNode { .. } | Error::Singular(_) => Failure::Invariant(msg),
            Error::AtPole { .. }
            | Error::ContourCrossesPole { .. }
            | Error::RepeatedPoles { .. }
            | Error::NonFinite { .. }
            | Error::EchoWindow { .. }
            | Error::Unstable { .. }
            | Error::Nonlinear => Failure::Numerical(msg),
            _ => Failure::Input(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn out_dir(cli_out: &Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = cli_out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn complex_pairs(zs: &[(f64, f64)]) -> Value {
    Value::Array(zs.iter().map(|z| json!([z.0, z.1])).collect())
}

fn cmd_reduce(args: &ReduceArgs, out: &Option<PathBuf>) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.netlist)
        .map_err(|e| Failure::input(format!("{}: {e}", args.netlist.display())))?;
    let topology: CircuitTopology = text.parse()?;
    let model = derive_reduced_model(&topology, args.zc)?;
    let report = model.invariants();
    let doc = json!({
        "model": serde_json::from_str::<Value>(&model.to_json()?)?,
        "invariants": report,
        "warnings": model.warnings,
    });
    let rendered = serde_json::to_string_pretty(&doc)?;
    println!("{rendered}");
    if out.is_some() {
        write_json(&out_dir(out)?.join("reduced_model.json"), &doc)?;
    }
    if report.worst() > INVARIANT_TOL {
        return Err(Failure::Invariant(format!(
            "model identities violated: worst relative residual {:e} > {INVARIANT_TOL:e}",
            report.worst()
        )));
    }
    Ok(())
}

fn cmd_poles(args: &PolesArgs, out: &Option<PathBuf>) -> Result<(), Failure> {
    if !(args.g_step > 0.0) || !(args.g_min > 0.0) || !(args.g_max < 1.0) || args.g_min > args.g_max {
        return Err(Failure::input("g grid must satisfy 0 < g_min <= g_max < 1 with g_step > 0"));
    }
    if let Some(a) = args.alpha.iter().find(|a| !(**a > 0.0)) {
        return Err(Failure::input(format!("alpha must be positive (got {a})")));
    }
    let count = ((args.g_max - args.g_min) / args.g_step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|k| args.g_min + k as f64 * args.g_step).collect();
    let dir = out_dir(out)?;
    let w = args.units.omega();
    for &alpha in &args.alpha {
        let locus = pole_locus(alpha, &grid)?;
        let scaled = PoleLocus {
            alpha,
            rows: locus.rows.iter().map(|r| LocusRow { g: r.g, poles: r.poles.map(|z| z * w) }).collect(),
            transitions: locus.transitions.clone(),
        };
        let path = dir.join(format!("poles_alpha_{alpha}.csv"));
        scaled.write_csv(create(&path)?)?;
        let summary = json!({ "alpha": alpha, "omega_r": w, "rows": scaled.rows.len(), "transitions": locus.transitions, "csv": path });
        println!("{summary}");
    }
    Ok(())
}

fn cmd_impulse(args: &ImpulseArgs, out: &Option<PathBuf>) -> Result<(), Failure> {
    let mut warnings = Vec::new();
    let mut n = args.n;
    if !n.is_power_of_two() {
        n = n.next_power_of_two();
        let msg = format!("n = {} is not a power of two; using {n}", args.n);
        eprintln!("warning: {msg}");
        warnings.push(msg);
    }
    let dir = out_dir(out)?;
    let w = args.units.omega();
    for &g in &args.g {
        for &alpha in &args.alpha {
            let params = LcExampleParams::from_dimensionless(g, alpha, w)?;
            let spec = params.transfer_matrix()?;
            let t_max = args.t_max.unwrap_or(args.periods * params.period());
            let opts = IfftOptions { n_samples: n, sigma: args.sigma };
            let mut ifft = Vec::new();
            let mut alias = 0.0_f64;
            let mut imag = 0.0_f64;
            let mut meta = None;
            for e in Entry::ALL {
                let r = invert_ifft(&spec, e, t_max, opts)?;
                alias = alias.max(r.alias_bound);
                imag = imag.max(r.imag_residue);
                meta = Some((r.sigma, r.period));
                ifft.push(r.signal);
            }
            let grid = *ifft[0].grid();
            let mut pf = Vec::new();
            let mut residues = serde_json::Map::new();
            for e in Entry::ALL {
                pf.push(invert_partial_fractions(&spec, e, grid)?);
                let fr = PartialFractions::new(spec.normalized(e))?;
                // residues of H(s) in physical units: R = ω_r^{e+1} R_norm
                let scale = spec.scale(e) * w;
                let rs: Vec<_> = fr.residues.iter().map(|r| (r.re * scale, r.im * scale)).collect();
                residues.insert(e.name().to_string(), complex_pairs(&rs));
            }
            let mut disc = 0.0_f64;
            let mut rel = 0.0_f64;
            for (a, b) in ifft.iter().zip(&pf) {
                let d = a.samples().iter().zip(b.samples()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
                disc = disc.max(d);
                rel = rel.max(d / b.max_abs().0);
            }
            let poles = spec.poles()?;
            let scaled = poles.scaled();
            let slowest = scaled.iter().copied().max_by(|a, b| a.re.total_cmp(&b.re)).expect("three poles");
            let stem = format!("impulse_g{g}_a{alpha}");
            let to_array = |v: Vec<Signal>| -> [Signal; 4] { v.try_into().expect("four entries") };
            let ifft = to_array(ifft);
            let pf = to_array(pf);
            write_impulse_csv(create(&dir.join(format!("{stem}.csv")))?, &ifft)?;
            write_impulse_csv(create(&dir.join(format!("{stem}_pf.csv")))?, &pf)?;
            if args.normalize_output {
                let norm: Vec<Signal> = ifft.iter().map(normalize_max_abs).collect::<Result<_, _>>()?;
                let divisors: Vec<f64> = norm.iter().map(|s| s.normalization.map_or(1.0, |n| n.divisor)).collect();
                write_impulse_csv(create(&dir.join(format!("{stem}_norm.csv")))?, &to_array(norm))?;
                residues.insert("normalization_divisors".into(), json!(divisors));
            }
            let (sigma, period) = meta.expect("four entries");
            let pole_list: Vec<_> = scaled.iter().map(|z| (z.re, z.im)).collect();
            let sidecar = json!({
                "g": g,
                "alpha": alpha,
                "omega_r": w,
                "t_max": t_max,
                "dt": grid.dt(),
                "samples": grid.len(),
                "n_samples": n,
                "sigma": sigma,
                "period": period,
                "alias_bound": alias,
                "imag_residue": imag,
                "max_discrepancy": disc,
                "max_relative_discrepancy": rel,
                "poles": complex_pairs(&pole_list),
                "slowest_pole": [slowest.re, slowest.im],
                "slowest_is_real": slowest.im == 0.0,
                "residues": Value::Object(residues),
                "warnings": warnings,
            });
            write_json(&dir.join(format!("{stem}.json")), &sidecar)?;
            println!("{}", json!({ "g": g, "alpha": alpha, "max_discrepancy": disc, "csv": dir.join(format!("{stem}.csv")) }));
        }
    }
    Ok(())
}

fn read_profile(path: &Path) -> Result<SampledProfile, Failure> {
    let f = File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(SampledProfile::read_csv(f)?)
}

fn initial_state(n: usize, phi: &[f64], q: &[f64], q0: f64) -> Result<ReducedState, Failure> {
    let mut s = ReducedState::zeros(n);
    if phi.is_empty() {
        s.phi[0] = 1.0;
    } else if phi.len() == n {
        for (i, v) in phi.iter().enumerate() {
            s.phi[i] = *v;
        }
    } else {
        return Err(Failure::input(format!("--phi needs {n} values (got {})", phi.len())));
    }
    if !q.is_empty() {
        if q.len() != n {
            return Err(Failure::input(format!("--q needs {n} values (got {})", q.len())));
        }
        for (i, v) in q.iter().enumerate() {
            s.q[i] = *v;
        }
    }
    s.q0 = q0;
    Ok(s)
}

fn cmd_simulate(args: &SimulateArgs, out: &Option<PathBuf>) -> Result<(), Failure> {
    let c = args.circuit.build()?;
    let t_max = args.circuit.horizon(&c, args.t_max, args.periods)?;
    let grid = TimeGrid::span(t_max, args.steps)?;
    let n = c.topology.node_count();
    let init = initial_state(n, &args.phi, &args.q, args.q0)?;
    let line_init = match (&args.line_phi, &args.line_q) {
        (Some(p), Some(q)) => Some(LineInitialState::new(read_profile(p)?, read_profile(q)?)),
        _ => None,
    };
    let min_length = 0.5 * c.line.v_p * t_max;
    let length = args.length.unwrap_or(1.05 * min_length);
    if length <= min_length {
        return Err(Failure::Numerical(format!(
            "echo window violated: t_max = {t_max} needs line length > {min_length}; rerun with --length {}",
            1.05 * min_length
        )));
    }
    let e0 = match &line_init {
        Some(li) => Some(thevenin_source(li, &c.line, grid, OutOfDomain::Error)?),
        None => None,
    };
    let rhs = assemble_rhs(&c.model, &c.topology, e0.as_ref())?;
    let reduced = integrate(&rhs, &init, grid, IntegrateOptions::default())?;
    let ladder = ladder_oracle(
        c.line,
        args.sections,
        length,
        &c.topology,
        &init,
        line_init.as_ref(),
        grid,
        LadderOptions::default(),
    )?;
    let mut disc = Vec::new();
    for node in 1..=n {
        let a = reduced.flux(node)?;
        let b = ladder.trajectory.flux(node)?;
        let num: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = a.samples().iter().map(|x| x * x).sum();
        disc.push(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() });
    }
    let dir = out_dir(out)?;
    reduced.write_csv(create(&dir.join("reduced.csv"))?, &c.model)?;
    ladder.trajectory.write_csv(create(&dir.join("ladder.csv"))?, &c.model)?;
    let mut warnings = reduced.warnings.clone();
    warnings.extend(c.model.warnings.iter().cloned());
    let doc = json!({
        "t_max": t_max,
        "samples": grid.len(),
        "sections": args.sections,
        "length": length,
        "ladder_dt": ladder.dt,
        "energy_drift": ladder.energy_drift,
        "reduced_integrator": reduced.integrator,
        "l2_discrepancy": disc,
        "max_l2_discrepancy": disc.iter().cloned().fold(0.0, f64::max),
        "warnings": warnings,
    });
    write_json(&dir.join("simulate.json"), &doc)?;
    println!("{doc}");
    Ok(())
}

fn cmd_symplectic(args: &SymplecticArgs, out: &Option<PathBuf>) -> Result<(), Failure> {
    let c = args.circuit.build()?;
    let t = args.circuit.horizon(&c, args.t_max, args.periods)?;
    let prop = match args.system {
        SystemKind::Lumped => propagator_of(CanonicalSystem::Lumped(&c.topology), t)?,
        SystemKind::Reduced => propagator_of(CanonicalSystem::Reduced { model: &c.model, topology: &c.topology }, t)?,
        SystemKind::Ladder => {
            let dt = match (args.dt, c.period) {
                (Some(dt), _) => dt,
                (None, Some(tr)) => tr / 1000.0,
                (None, None) => return Err(Failure::input("--dt is required with --netlist")),
            };
            let steps = (t / dt).round().max(1.0);
            let dt = t / steps;
            let length = args.length.unwrap_or(0.5 * c.line.v_p * t + 1.0);
            let sys = LadderSystem::new(c.line, args.sections, length, &c.topology)?;
            propagator_of(CanonicalSystem::Ladder { system: &sys, dt }, t)?
        }
    };
    let report = ResidualReport::of(&prop)?;
    let doc = serde_json::to_value(&report)?;
    write_json(&out_dir(out)?.join("symplectic.json"), &doc)?;
    println!("{doc}");
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.cmd {
        Command::Reduce(a) => cmd_reduce(a, &cli.out),
        Command::Poles(a) => cmd_poles(a, &cli.out),
        Command::Impulse(a) => cmd_impulse(a, &cli.out),
        Command::Simulate(a) => cmd_simulate(a, &cli.out),
        Command::Symplectic(a) => cmd_symplectic(a, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
