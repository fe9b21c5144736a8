use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mll::evolve::evolve_profile;
use mll::io::{harmonic_fields, save_snapshot, write_diagnostics_csv, write_fields_csv};
use mll::lab::{read_sweep_csv, render_report, run_sweep, write_sweep, ExperimentConfig, LabError};
use mll::profile::ProfileFft;
use mll::spectral::{char_variety_sample, write_dispersion_csv};
use mll::transparency::transparency_scan;
use mll::wkb::{initial_data, EnvelopeState, Line, NlsSolver, WkbModel};

#[derive(Parser)]
#[command(name = "mll", about = "Maxwell-Landau-Lifshitz profile laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. --set grid.ny=128
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory (overrides the config's `out`)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, LabError> {
        let mut c = ExperimentConfig::load(self.config.as_deref(), &self.sets)?;
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        std::fs::create_dir_all(&c.out)?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Characteristic variety samples as CSV
    Dispersion {
        #[arg(long, default_value_t = 5.0)]
        xi_max: f64,
        #[arg(long, default_value_t = 501)]
        n: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Strong-transparency scan as JSON
    Transparency {
        #[arg(long, default_value_t = 20.0)]
        xi_max: f64,
        #[arg(long, default_value_t = 201)]
        n: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Envelope-only NLS run up to tau = T
    Nls(Common),
    /// Single exact profile run at the first eps of the config
    Evolve(Common),
    /// Build the WKB profile at t = 0 and check its residuals
    Wkb(Common),
    /// Full eps sweep
    Sweep(Common),
    /// Summarize a sweep.csv
    Report {
        /// sweep.csv, or a directory containing it
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn num_err(e: impl std::fmt::Display) -> LabError {
    LabError::Io(e.to_string())
}

fn dispersion(xi_max: f64, n: usize, out: &Path) -> Result<(), LabError> {
    if n < 2 || !(xi_max > 0.0) {
        return Err(LabError::Config("dispersion needs n >= 2 and xi_max > 0".into()));
    }
    std::fs::create_dir_all(out)?;
    let xs: Vec<f64> = (0..n).map(|i| -xi_max + 2.0 * xi_max * i as f64 / (n - 1) as f64).collect();
    write_dispersion_csv(&char_variety_sample(&xs), File::create(out.join("dispersion.csv"))?)?;
    println!("wrote {}", out.join("dispersion.csv").display());
    Ok(())
}

fn transparency(xi_max: f64, n: usize, out: &Path) -> Result<(), LabError> {
    if n < 2 || !(xi_max > 0.0) {
        return Err(LabError::Config("transparency needs n >= 2 and xi_max > 0".into()));
    }
    std::fs::create_dir_all(out)?;
    let rep = transparency_scan(xi_max, n);
    std::fs::write(out.join("transparency.json"), serde_json::to_string_pretty(&rep).map_err(num_err)? + "\n")?;
    println!("max ratio {:.6e} at {:?}", rep.max_ratio, rep.worst_point);
    println!("closed-form max error {:.3e}", rep.closed_form_max_err);
    Ok(())
}

fn nls(cfg: &ExperimentConfig) -> Result<(), LabError> {
    let phase = cfg.phase.resolve()?;
    let model = WkbModel::new(&phase)?;
    let line = Line::new(cfg.grid.ny, cfg.grid.ly);
    let s0 = EnvelopeState {
        g1: cfg.envelope.sample(&line),
        tau: 0.0,
    };
    let solver = NlsSolver::new(line.clone(), model.nls(), cfg.nls_config(), &s0);
    let mut rows = vec![(0.0, s0.mass(line.ly), s0.sup())];
    let mut s = s0.clone();
    let n = cfg.snapshots + 1;
    for i in 1..=n {
        s = solver.advance_to(&s, cfg.t_horizon * i as f64 / n as f64, cfg.nls_dtau)?;
        rows.push((s.tau, s.mass(line.ly), s.sup()));
    }
    let mut w = csv::Writer::from_path(cfg.out.join("nls.csv"))?;
    w.write_record(["tau", "mass", "sup"])?;
    for r in &rows {
        w.write_record([r.0, r.1, r.2].iter().map(|x| format!("{x:.17e}")))?;
    }
    w.flush()?;
    let y: Vec<f64> = (0..line.n).map(|j| line.y(j)).collect();
    write_fields_csv(
        File::create(cfg.out.join("envelope.csv"))?,
        &y,
        &[("g0".to_string(), s0.g1.clone()), ("g1".to_string(), s.g1.clone())],
    )?;
    println!(
        "nu1 = {:.9}, cubic = {:.9}; mass drift {:.3e}",
        model.coeffs.nu1,
        model.coeffs.cubic,
        (s.mass(line.ly) - s0.mass(line.ly)).abs()
    );
    Ok(())
}

fn evolve(cfg: &ExperimentConfig) -> Result<(), LabError> {
    let phase = cfg.phase.resolve()?;
    let model = WkbModel::new(&phase)?;
    let grid = cfg.grid();
    let fft = ProfileFft::new(grid);
    let line = Line::new(grid.ny, grid.ly);
    let eps = cfg.eps_list[0];
    let data = initial_data(&cfg.envelope.sample(&line), &cfg.preparation.preparation(), eps, &model, &fft)?;
    let t_end = cfg.t_end(eps);
    let traj = evolve_profile(&data.exact, t_end, cfg.dt, &phase, &cfg.evolve_options())?;
    write_diagnostics_csv(File::create(cfg.out.join("diagnostics.csv"))?, &traj.diagnostics())?;
    let last = traj.snapshots.last().ok_or_else(|| num_err("empty trajectory"))?;
    save_snapshot(&cfg.out.join("final.snap"), &last.profile, last.t)?;
    println!("eps = {eps}, t_end = {t_end}: final sup {:.6e}", last.diagnostics.linf_total);
    Ok(())
}

fn wkb(cfg: &ExperimentConfig) -> Result<(), LabError> {
    let phase = cfg.phase.resolve()?;
    let model = WkbModel::new(&phase)?;
    let grid = cfg.grid();
    let fft = ProfileFft::new(grid);
    let line = Line::new(grid.ny, grid.ly);
    let mut report = Vec::new();
    for &eps in &cfg.eps_list {
        let data = initial_data(&cfg.envelope.sample(&line), &cfg.preparation.preparation(), eps, &model, &fft)?;
        let w = &data.wkb;
        let full = w.full_residual(&fft);
        let pred = w.predicted_residual(&fft);
        let r = w.remainder(&fft);
        report.push(serde_json::json!({
            "eps": eps,
            "res_pi0": fft.sup_norm(&full.pi0()),
            "res_pis": fft.sup_norm(&full.pis()),
            "identity_defect": fft.sup_norm(&full.sub(&pred)),
            "cascade": w.cascade_residuals(&fft),
            "remainder_pi0": fft.sup_norm(&r.pi0()),
            "remainder_pis": fft.sup_norm(&r.pis()),
            "b_pis": fft.sup_norm(&data.b.pis()),
        }));
        if eps == cfg.eps_list[0] {
            let y: Vec<f64> = (0..line.n).map(|j| line.y(j)).collect();
            let mut fields = harmonic_fields(&fft, &w.v0, 1, &[1, 2, 4, 5, 7, 8]);
            fields.extend(harmonic_fields(&fft, &w.v1, 0, &[3, 6]));
            fields.extend(harmonic_fields(&fft, &w.v1, 1, &[1, 2, 4, 5, 7, 8]));
            fields.extend(harmonic_fields(&fft, &w.v2, 1, &[1, 2, 7, 8]));
            write_fields_csv(File::create(cfg.out.join("layers.csv"))?, &y, &fields)?;
        }
    }
    let doc = serde_json::json!({"coefficients": model.coeffs, "k0": model.k0, "residuals": report});
    let text = serde_json::to_string_pretty(&doc).map_err(num_err)?;
    std::fs::write(cfg.out.join("wkb.json"), text.clone() + "\n")?;
    println!("{text}");
    Ok(())
}

fn sweep(cfg: &ExperimentConfig) -> Result<(), LabError> {
    let res = run_sweep(cfg)?;
    write_sweep(&cfg.out, &res)?;
    print!("{}", render_report(&res.rows));
    for f in &res.failed {
        println!("eps = {} failed: {}", f.eps, f.error);
    }
    Ok(())
}

fn report(input: &Path, out: Option<&Path>) -> Result<(), LabError> {
    let path = if input.is_dir() {
        input.join("sweep.csv")
    } else {
        input.to_path_buf()
    };
    let rows = read_sweep_csv(&path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
    let text = render_report(&rows);
    if let Some(o) = out {
        std::fs::create_dir_all(o)?;
        std::fs::write(o.join("report.md"), &text)?;
    }
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), LabError> {
    match cli.cmd {
        Cmd::Dispersion { xi_max, n, out } => dispersion(xi_max, n, &out),
        Cmd::Transparency { xi_max, n, out } => transparency(xi_max, n, &out),
        Cmd::Nls(c) => nls(&c.load()?),
        Cmd::Evolve(c) => evolve(&c.load()?),
        Cmd::Wkb(c) => wkb(&c.load()?),
        Cmd::Sweep(c) => sweep(&c.load()?),
        Cmd::Report { input, out } => report(&input, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
