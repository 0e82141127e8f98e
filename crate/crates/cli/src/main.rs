use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rgp_core::baseline::baseline_curve_name;
use rgp_core::{
    assess, calibrate, Accountant, AccountingQuery64, Assessment, Error, GpGuarantee64, MechanismKind,
    MechanismSpec64, OrderChoice, RenyiOrder64, Result, RgpGuarantee64, Target,
};
use rgp_core::sweep::SweepSpec;

// println! panics when stdout is closed early (e.g. piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {
        if writeln!(std::io::stdout(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    };
}

/// Group-privacy accounting for subsampled noise mechanisms.
#[derive(Parser)]
#[command(name = "rgp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Account one mechanism and print its RGP and GP guarantees.
    Account {
        #[command(flatten)]
        mech: MechArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[command(flatten)]
        order: OrderArgs,
        #[arg(long, default_value = "ours", value_parser = parse_accountant)]
        accountant: Accountant,
    },
    /// Find the least noise that meets a target guarantee.
    Calibrate {
        #[command(flatten)]
        mech: MechArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        /// RGP target τ; needs --alpha.
        #[arg(long, conflicts_with = "target_eps", required_unless_present = "target_eps")]
        target_tau: Option<f64>,
        /// GP target ε at --delta, best order of 2..=100.
        #[arg(long)]
        target_eps: Option<f64>,
        #[command(flatten)]
        order: OrderArgs,
        #[arg(long, default_value = "ours", value_parser = parse_accountant)]
        accountant: Accountant,
    },
    /// Run a sweep file and write CSV.
    Sweep {
        spec: PathBuf,
        /// Overrides the spec's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ours, baseline and lower bound side by side.
    Compare {
        #[command(flatten)]
        mech: MechArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[command(flatten)]
        order: OrderArgs,
    },
}

#[derive(Args)]
struct MechArgs {
    /// gaussian, laplace, skellam or rr.
    #[arg(long, value_parser = parse_mechanism)]
    mech: MechanismKind,
    /// Skellam sensitivity bound C.
    #[arg(long = "sens-c", default_value_t = 1)]
    sens_c: u32,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Randomized-response keep probability.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args)]
struct SamplingArgs {
    #[arg(long)]
    q: f64,
    #[arg(long = "T", default_value_t = 1)]
    iterations: u64,
    #[arg(long, default_value_t = 1)]
    m: u64,
}

#[derive(Args)]
struct OrderArgs {
    /// Fixed Rényi order; without it the best of 2..=100 is used.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
}

fn parse_mechanism(s: &str) -> std::result::Result<MechanismKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_accountant(s: &str) -> std::result::Result<Accountant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl NoiseArgs {
    fn value_for(&self, kind: MechanismKind) -> Result<f64> {
        let given = [
            (MechanismKind::Gaussian, "--sigma", self.sigma),
            (MechanismKind::Laplace, "--b", self.b),
            (MechanismKind::Skellam, "--mu", self.mu),
            (MechanismKind::RandomizedResponse, "--p", self.p),
        ];
        let mut value = None;
        for (k, flag, v) in given {
            match (k == kind, v) {
                (true, Some(v)) => value = Some(v),
                (true, None) => return Err(Error::Usage(format!("{kind} needs {flag}"))),
                (false, Some(_)) => return Err(Error::Usage(format!("{flag} does not apply to {kind}"))),
                (false, None) => {}
            }
        }
        Ok(value.expect("one flag matches every kind"))
    }
}

fn build_query(mech: &MechArgs, noise: f64, sampling: &SamplingArgs, delta: f64) -> Result<AccountingQuery64> {
    let spec = MechanismSpec64::from_kind(mech.mech, noise, mech.sens_c)?;
    AccountingQuery64::new(spec, sampling.q, sampling.iterations, sampling.m)?.with_delta(delta)
}

fn order_choice(order: &OrderArgs) -> Result<OrderChoice<f64>> {
    Ok(match order.alpha {
        Some(a) => OrderChoice::Fixed(RenyiOrder64::new(a)?),
        None => OrderChoice::Best,
    })
}

fn describe(spec: &MechanismSpec64) -> String {
    let kind = spec.kind();
    let mut s = format!("{kind} ({} = {})", kind.noise_name(), spec.noise());
    if kind == MechanismKind::Skellam {
        s.push_str(&format!(", C = {}", spec.sensitivity_c()));
    }
    s
}

fn field(key: &str, value: impl std::fmt::Display) {
    out!("{key:<12}{value}");
}

fn print_assessment(a: &Assessment<f64>) {
    field("group size", a.rgp.m);
    field("alpha", a.rgp.alpha);
    field("tau", a.rgp.tau);
    field("epsilon", a.gp.epsilon);
    field("delta", a.gp.delta);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Account { mech, noise, sampling, order, accountant } => {
            let query = build_query(&mech, noise.value_for(mech.mech)?, &sampling, order.delta)?;
            let a = assess(accountant, &query, order_choice(&order)?)?;
            field("mechanism", describe(&query.mechanism));
            field("accountant", accountant);
            field("q", query.q);
            field("T", query.iterations);
            print_assessment(&a);
            if a.rgp.m != query.m {
                field("note", format!("group size rounded up from {}", query.m));
            }
        }
        Command::Calibrate { mech, sampling, target_tau, target_eps, order, accountant } => {
            let placeholder = if mech.mech == MechanismKind::RandomizedResponse { 0.75 } else { 1.0 };
            let template = build_query(&mech, placeholder, &sampling, order.delta)?;
            let target = match (target_tau, target_eps) {
                (Some(tau), None) => {
                    let alpha = order
                        .alpha
                        .ok_or_else(|| Error::Usage("--target-tau needs --alpha".into()))?;
                    Target::Rgp(RgpGuarantee64::new(sampling.m, RenyiOrder64::new(alpha)?, tau)?)
                }
                (None, Some(eps)) => {
                    if order.alpha.is_some() {
                        return Err(Error::Usage("--target-eps searches the order grid; drop --alpha".into()));
                    }
                    Target::Gp(GpGuarantee64::new(sampling.m, eps, order.delta)?)
                }
                _ => return Err(Error::Usage("give exactly one of --target-tau or --target-eps".into())),
            };
            let cal = calibrate(&template, target, accountant)?;
            let tuned = AccountingQuery64 { mechanism: template.mechanism.with_noise(cal.noise)?, ..template };
            let check = assess(accountant, &tuned, OrderChoice::Fixed(cal.alpha_used))?;
            field(mech.mech.noise_name(), cal.noise);
            field("mechanism", describe(&tuned.mechanism));
            field("accountant", accountant);
            field("q", tuned.q);
            field("T", tuned.iterations);
            print_assessment(&check);
        }
        Command::Sweep { spec, out } => {
            let sweep = SweepSpec::from_path(&spec)?;
            let path = sweep.execute(out.as_deref())?;
            let rows = sweep.values.len() * sweep.accountants.len();
            out!("wrote {rows} rows to {}", path.display());
        }
        Command::Compare { mech, noise, sampling, order } => {
            let query = build_query(&mech, noise.value_for(mech.mech)?, &sampling, order.delta)?;
            let choice = order_choice(&order)?;
            field("mechanism", describe(&query.mechanism));
            field("q", query.q);
            field("T", query.iterations);
            field("m", query.m);
            field("delta", query.delta);
            out!();
            out!("{:<12} {:>8} {:>8} {:>14} {:>14}", "accountant", "eff_m", "alpha", "tau", "epsilon");
            for acc in Accountant::ALL {
                let a = assess(acc, &query, choice)?;
                out!(
                    "{:<12} {:>8} {:>8} {:>14.6e} {:>14.6}",
                    acc.name(),
                    a.rgp.m,
                    a.rgp.alpha.to_string(),
                    a.rgp.tau,
                    a.gp.epsilon
                );
            }
            out!();
            field("baseline", baseline_curve_name(query.mechanism.kind()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
