use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use coupled_resonators::circuit::{cooperativity, Circuit};
use coupled_resonators::fitting::{
    fit_avoided_crossing, fit_crossing_trace, fit_lorentzian, fit_power_laws, fit_resonance,
};
use coupled_resonators::io::{self, read_json, read_trace, write_json, write_trace, write_trace_json};
use coupled_resonators::pipelines::{
    crossing_traces, flux_sweep_trace, run_pipeline, upconversion_trace, PipelineConfig, PipelineId,
    PipelineReport,
};
use coupled_resonators::spectra::SpectrumTrace;
use coupled_resonators::units::{to_angular, to_hz};
use coupled_resonators::{DeviceParams, Error, Result};

#[derive(Parser)]
#[command(name = "crsim", version, about = "Synthesize and fit spectra of longitudinally coupled resonators")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Device parameter file (JSON, SI units); defaults to the bundled device.
    #[arg(long, global = true)]
    device: Option<PathBuf>,
    /// Pipeline and fit configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Noise seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Record wall-clock durations in reports (makes them non-reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic traces.
    Simulate {
        #[arg(value_enum)]
        kind: SimulateKind,
    },
    /// Fit a model to trace or table files.
    Fit {
        #[arg(value_enum)]
        model: FitModel,
        /// Input files; several crossing traces are fitted jointly.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
    },
    /// Run an end-to-end experiment and write its report.
    Pipeline {
        #[arg(value_enum)]
        which: PipelineChoice,
    },
    /// Quantities derived from the device file.
    Device {
        #[arg(value_enum)]
        action: DeviceAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SimulateKind {
    FluxSweep,
    Crossing,
    Upconversion,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModel {
    Resonance,
    Lorentzian,
    Crossing,
    PowerLaws,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineChoice {
    Fig2a,
    Fig2c,
    Fig3,
    Fig4,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeviceAction {
    Derive,
}

struct Context {
    device: DeviceParams,
    config: PipelineConfig,
    out: PathBuf,
    format: Format,
    timing: bool,
}

impl Context {
    fn load(c: &Common) -> Result<Self> {
        let device = match &c.device {
            Some(p) => DeviceParams::from_path(p)?,
            None => DeviceParams::reference(),
        };
        let mut config: PipelineConfig = match &c.config {
            Some(p) => read_json(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = c.seed {
            config.sweep.seed = seed;
        }
        config.validate().map_err(|e| match (&c.config, e) {
            (Some(p), Error::Domain(m)) => Error::Parse {
                path: p.clone(),
                message: m,
            },
            (_, e) => e,
        })?;
        Ok(Self {
            device,
            config,
            out: c.out.clone(),
            format: c.format,
            timing: c.timing,
        })
    }

    fn write_trace(&self, trace: &SpectrumTrace, stem: &str) -> Result<PathBuf> {
        let path = match self.format {
            Format::Csv => self.out.join(format!("{stem}.csv")),
            Format::Json => self.out.join(format!("{stem}.json")),
        };
        match self.format {
            Format::Csv => write_trace(trace, &path)?,
            Format::Json => write_trace_json(trace, &path)?,
        }
        Ok(path)
    }
}

/// Prints a flat record set as JSON or as a `name,value,std_error,unit` table.
fn emit<T: Serialize>(format: Format, json: &T, rows: &[(String, f64, Option<f64>, String)]) -> Result<()> {
    match format {
        Format::Json => print!("{}", io::to_json_string(json)?),
        Format::Csv => {
            println!("name,value,std_error,unit");
            for (name, value, se, unit) in rows {
                let se = se.map(|s| s.to_string()).unwrap_or_default();
                println!("{name},{value},{se},{unit}");
            }
        }
    }
    Ok(())
}

fn simulate(ctx: &Context, kind: SimulateKind) -> Result<()> {
    let cfg = &ctx.config;
    let mut written = Vec::new();
    match kind {
        SimulateKind::FluxSweep => {
            let circuit = Circuit::new(ctx.device);
            for (k, &flux) in cfg.sweep.flux_grid.iter().enumerate() {
                let trace = flux_sweep_trace(&circuit, cfg, k, flux)?;
                written.push(ctx.write_trace(&trace, &format!("flux_{k:03}"))?);
            }
        }
        SimulateKind::Crossing => {
            for (k, trace) in crossing_traces(cfg)?.iter().enumerate() {
                written.push(ctx.write_trace(trace, &format!("crossing_{k:03}"))?);
            }
        }
        SimulateKind::Upconversion => {
            written.push(ctx.write_trace(&upconversion_trace(cfg)?.0, "upconversion")?);
        }
    }
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn fit(ctx: &Context, model: FitModel, inputs: &[PathBuf]) -> Result<()> {
    let cfg = &ctx.config.fit;
    let single = |what: &str| -> Result<&Path> {
        match inputs {
            [one] => Ok(one.as_path()),
            _ => Err(Error::Domain(format!("{what} fit takes exactly one --input"))),
        }
    };
    let result = match model {
        FitModel::Resonance => fit_resonance(&read_trace(single("resonance")?)?, cfg)?,
        FitModel::Lorentzian => fit_lorentzian(&read_trace(single("Lorentzian")?)?, cfg)?,
        FitModel::Crossing => {
            let traces = inputs.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>>>()?;
            if traces.len() == 1 {
                fit_crossing_trace(&traces[0], cfg)?
            } else {
                fit_avoided_crossing(&traces, cfg)?
            }
        }
        FitModel::PowerLaws => {
            let points = io::read_power_law_points(single("power-law")?)?;
            let laws = fit_power_laws(&points)?;
            #[derive(Serialize)]
            struct Laws {
                g0_hz: f64,
                g0_std_hz: f64,
                kerr_hz: f64,
                kerr_std_hz: f64,
            }
            let json = Laws {
                g0_hz: to_hz(laws.g0),
                g0_std_hz: to_hz(laws.g0_std),
                kerr_hz: to_hz(laws.kerr),
                kerr_std_hz: to_hz(laws.kerr_std),
            };
            let rows = [
                ("g0".to_string(), json.g0_hz, Some(json.g0_std_hz), "Hz".to_string()),
                ("kerr".to_string(), json.kerr_hz, Some(json.kerr_std_hz), "Hz".to_string()),
            ];
            return emit(ctx.format, &json, &rows);
        }
    };
    let file = result.to_file();
    let rows: Vec<_> = file
        .params
        .iter()
        .map(|p| (p.name.clone(), p.value, p.std_error, p.unit.clone()))
        .collect();
    emit(ctx.format, &file, &rows)?;
    if !result.converged {
        eprintln!("warning: fit did not converge in {} iterations", result.iterations);
    }
    Ok(())
}

fn pipeline(ctx: &Context, which: PipelineChoice) -> Result<bool> {
    let ids: Vec<PipelineId> = match which {
        PipelineChoice::Fig2a => vec![PipelineId::Fig2a],
        PipelineChoice::Fig2c => vec![PipelineId::Fig2c],
        PipelineChoice::Fig3 => vec![PipelineId::Fig3],
        PipelineChoice::Fig4 => vec![PipelineId::Fig4],
        PipelineChoice::All => PipelineId::ALL.to_vec(),
    };
    let reports: Vec<PipelineReport> = {
        use rayon::prelude::*;
        ids.par_iter()
            .map(|&id| {
                let start = Instant::now();
                let mut r = run_pipeline(id, &ctx.device, &ctx.config)?;
                if ctx.timing {
                    r.duration_s = Some(start.elapsed().as_secs_f64());
                }
                Ok(r)
            })
            .collect::<Result<_>>()?
    };
    let mut all_pass = true;
    for r in &reports {
        let path = ctx.out.join(format!("{}_report.json", r.pipeline.name()));
        write_json(&path, r)?;
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        println!("{} {verdict} ({:?}) {}", r.pipeline.name(), r.status, path.display());
        for q in r.quantities.iter().filter(|q| !q.pass) {
            println!("  {} = {} {} (target {})", q.name, q.value_hz, q.unit, q.target);
        }
        all_pass &= r.passed();
    }
    Ok(all_pass)
}

fn device_derive(ctx: &Context) -> Result<()> {
    let circuit = Circuit::new(ctx.device);
    let exp = &ctx.config.experiment;
    let phi0 = circuit.flux_quantum();
    let i_zpf = circuit.zero_point_current()?;
    let phi_zpf = circuit.zero_point_flux()?;
    let bias = circuit.bias_for_frequency(to_angular(exp.bias_hz))?;
    let g0 = circuit.bare_coupling(&bias)?;
    let g0_reference = phi_zpf * to_angular(1.7e9) / phi0;
    let kappa = to_angular(exp.kappa_int_hz + exp.kappa_ext_hz);
    let coop = cooperativity(to_angular(exp.crossing_g_hz), kappa, to_angular(exp.gamma_hz))?;

    #[derive(Serialize)]
    struct Derived {
        i_zpf_a: f64,
        phi_zpf_wb: f64,
        phi_zpf_phi0: f64,
        omega_a_max_hz: f64,
        bias_hz: f64,
        bias_flux_phi0: f64,
        gradient_hz_per_phi0: f64,
        g0_hz: f64,
        g0_at_1p7_ghz_per_phi0_hz: f64,
        kerr_hz: f64,
        cooperativity: f64,
    }
    let d = Derived {
        i_zpf_a: i_zpf,
        phi_zpf_wb: phi_zpf,
        phi_zpf_phi0: phi_zpf / phi0,
        omega_a_max_hz: to_hz(circuit.resonator_frequency(0.0)?.omega_a),
        bias_hz: to_hz(bias.omega_a),
        bias_flux_phi0: bias.phi_ext / phi0,
        gradient_hz_per_phi0: to_hz(bias.gradient) * phi0,
        g0_hz: to_hz(g0),
        g0_at_1p7_ghz_per_phi0_hz: to_hz(g0_reference),
        kerr_hz: to_hz(bias.kerr),
        cooperativity: coop,
    };
    let row = |n: &str, v: f64, u: &str| (n.to_string(), v, None, u.to_string());
    let rows = [
        row("i_zpf", d.i_zpf_a, "A"),
        row("phi_zpf", d.phi_zpf_wb, "Wb"),
        row("phi_zpf", d.phi_zpf_phi0, "Phi0"),
        row("omega_a_max", d.omega_a_max_hz, "Hz"),
        row("bias", d.bias_hz, "Hz"),
        row("bias_flux", d.bias_flux_phi0, "Phi0"),
        row("gradient", d.gradient_hz_per_phi0, "Hz/Phi0"),
        row("g0", d.g0_hz, "Hz"),
        row("g0_at_1.7GHz_per_Phi0", d.g0_at_1p7_ghz_per_phi0_hz, "Hz"),
        row("kerr", d.kerr_hz, "Hz"),
        row("cooperativity", d.cooperativity, "1"),
    ];
    emit(ctx.format, &d, &rows)
}

fn run(cli: Cli) -> Result<bool> {
    let ctx = Context::load(&cli.common)?;
    match cli.command {
        Command::Simulate { kind } => simulate(&ctx, kind).map(|_| true),
        Command::Fit { model, input } => fit(&ctx, model, &input).map(|_| true),
        Command::Pipeline { which } => pipeline(&ctx, which),
        Command::Device { action: DeviceAction::Derive } => device_derive(&ctx).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::FitRejected(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
