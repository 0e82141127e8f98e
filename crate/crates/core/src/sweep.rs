//! Parameter sweeps written as CSV.
//!
//! A sweep file is plain `key = value` lines; `#` starts a comment.
//!
//! ```text
//! mechanism   = gaussian        # gaussian | laplace | skellam | rr
//! swept       = m               # m | tau | epsilon | q | T
//! values      = 16, 32, 64, 128, 256
//! q           = 0.001
//! T           = 500
//! alpha       = 4               # with tau: fixed-order target
//! tau         = 1               # or: epsilon = 4 (best order, uses delta)
//! delta       = 1e-5
//! accountants = ours, baseline, lower_bound
//! output      = noise_vs_m.csv
//! ```
//!
//! With a `tau` or `epsilon` target each row holds the calibrated noise.
//! Giving `noise = <value>` instead accounts a fixed mechanism. Keys that are
//! swept may be omitted; `m` defaults to 1, `sens_c` to 1, `delta` to 1e-5.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::baseline::baseline_curve_name;
use crate::calibration::{assess, calibrate, Accountant, OrderChoice, Target};
use crate::mechanisms::{MechanismKind, MechanismSpec, RenyiOrder};
use crate::rgp::{AccountingQuery, GpGuarantee, RgpGuarantee, DEFAULT_DELTA};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweptVariable {
    M,
    Tau,
    Epsilon,
    Q,
    T,
}

impl SweptVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweptVariable::M => "m",
            SweptVariable::Tau => "tau",
            SweptVariable::Epsilon => "epsilon",
            SweptVariable::Q => "q",
            SweptVariable::T => "T",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, SweptVariable::M | SweptVariable::T)
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(SweptVariable::M),
            "tau" => Ok(SweptVariable::Tau),
            "epsilon" | "eps" => Ok(SweptVariable::Epsilon),
            "q" => Ok(SweptVariable::Q),
            "T" | "iterations" => Ok(SweptVariable::T),
            other => Err(Error::usage(format!("cannot sweep '{other}' (expected m, tau, epsilon, q or T)"))),
        }
    }
}

/// What each row computes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    /// Calibrate to `τ` at a fixed order.
    Tau { alpha: f64, tau: f64 },
    /// Calibrate to `ε` at the spec's δ, best order.
    Epsilon { epsilon: f64 },
    /// Account a fixed noise value, at `alpha` or at the best order.
    Account { noise: f64, alpha: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub mechanism: MechanismKind,
    pub sensitivity_c: u32,
    pub swept: SweptVariable,
    pub values: Vec<f64>,
    pub q: f64,
    pub iterations: u64,
    pub m: u64,
    pub mode: SweepMode,
    pub delta: f64,
    /// Deduplicated, in the fixed order ours, baseline, lower_bound.
    pub accountants: Vec<Accountant>,
    pub output: Option<PathBuf>,
}

const KEYS: [&str; 14] = [
    "mechanism", "swept", "values", "q", "T", "m", "alpha", "tau", "epsilon", "delta", "noise",
    "sens_c", "accountants", "output",
];

fn canonical_key(key: &str) -> &str {
    match key {
        "mech" => "mechanism",
        "iterations" => "T",
        "eps" => "epsilon",
        "sens-c" => "sens_c",
        "accountant" => "accountants",
        "out" => "output",
        other => other,
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::usage(format!("{key}: '{raw}' is not a finite number")))
}

fn parse_count(key: &str, raw: &str) -> Result<u64> {
    let v = raw
        .parse::<u64>()
        .or_else(|_| {
            // Accept integral floats such as "1e3".
            let f = parse_f64(key, raw)?;
            if f.fract() == 0.0 && f >= 0.0 && f < u64::MAX as f64 {
                Ok(f as u64)
            } else {
                Err(Error::usage(format!("{key}: '{raw}' is not a whole number")))
            }
        })?;
    if v == 0 {
        return Err(Error::usage(format!("{key} must be >= 1")));
    }
    Ok(v)
}

fn split_list(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty())
}

impl SweepSpec {
    pub fn from_path(path: &Path) -> Result<Self> {
        SweepSpec::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::usage(format!("line {}: expected 'key = value'", n + 1)))?;
            let key = canonical_key(key.trim());
            if !KEYS.contains(&key) {
                return Err(Error::usage(format!("line {}: unknown key '{key}'", n + 1)));
            }
            if kv.insert(key, value.trim()).is_some() {
                return Err(Error::usage(format!("line {}: '{key}' given twice", n + 1)));
            }
        }
        let get = |key: &str| kv.get(key).copied();
        let need = |key: &str| get(key).ok_or_else(|| Error::usage(format!("missing key '{key}'")));

        let mechanism: MechanismKind = need("mechanism")?.parse()?;
        let swept = SweptVariable::parse(need("swept")?)?;
        let values = split_list(need("values")?)
            .map(|v| {
                if swept.is_integer() {
                    parse_count("values", v).map(|c| c as f64)
                } else {
                    parse_f64("values", v)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::usage("values must not be empty"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::usage("values must be strictly increasing"));
        }

        let swept_default = |key: &str, var: SweptVariable| -> Option<&str> {
            if swept == var {
                None
            } else {
                get(key)
            }
        };
        let q = match swept_default("q", SweptVariable::Q) {
            Some(raw) => parse_f64("q", raw)?,
            None if swept == SweptVariable::Q => values[0],
            None => return Err(Error::usage("missing key 'q'")),
        };
        let iterations = match swept_default("T", SweptVariable::T) {
            Some(raw) => parse_count("T", raw)?,
            None if swept == SweptVariable::T => values[0] as u64,
            None => return Err(Error::usage("missing key 'T'")),
        };
        let m = match swept_default("m", SweptVariable::M) {
            Some(raw) => parse_count("m", raw)?,
            None if swept == SweptVariable::M => values[0] as u64,
            None => 1,
        };
        let sensitivity_c = match get("sens_c") {
            Some(raw) => u32::try_from(parse_count("sens_c", raw)?)
                .map_err(|_| Error::usage("sens_c is too large"))?,
            None => 1,
        };
        let delta = get("delta").map(|r| parse_f64("delta", r)).transpose()?.unwrap_or(DEFAULT_DELTA);
        let alpha = get("alpha").map(|r| parse_f64("alpha", r)).transpose()?;
        let tau = get("tau").map(|r| parse_f64("tau", r)).transpose()?;
        let epsilon = get("epsilon").map(|r| parse_f64("epsilon", r)).transpose()?;
        let noise = get("noise").map(|r| parse_f64("noise", r)).transpose()?;

        let wants_tau = tau.is_some() || swept == SweptVariable::Tau;
        let wants_eps = epsilon.is_some() || swept == SweptVariable::Epsilon;
        let mode = match (wants_tau, wants_eps, noise) {
            (true, false, None) => SweepMode::Tau {
                alpha: alpha.ok_or_else(|| Error::usage("a tau target needs 'alpha'"))?,
                tau: if swept == SweptVariable::Tau { values[0] } else { tau.unwrap() },
            },
            (false, true, None) => {
                if alpha.is_some() {
                    return Err(Error::usage("'alpha' applies to tau targets; epsilon targets search the order grid"));
                }
                SweepMode::Epsilon {
                    epsilon: if swept == SweptVariable::Epsilon { values[0] } else { epsilon.unwrap() },
                }
            }
            (false, false, Some(noise)) => SweepMode::Account { noise, alpha },
            _ => {
                return Err(Error::usage(
                    "give exactly one of: tau (with alpha), epsilon, or a fixed noise",
                ))
            }
        };

        let mut accountants = Vec::new();
        for name in split_list(get("accountants").unwrap_or("ours")) {
            let acc: Accountant = name.parse()?;
            if !accountants.contains(&acc) {
                accountants.push(acc);
            }
        }
        if accountants.is_empty() {
            return Err(Error::usage("accountant list must not be empty"));
        }
        accountants.sort_by_key(|a| Accountant::ALL.iter().position(|b| b == a));

        let spec = SweepSpec {
            mechanism,
            sensitivity_c,
            swept,
            values,
            q,
            iterations,
            m,
            mode,
            delta,
            accountants,
            output: get("output").map(PathBuf::from),
        };
        // Surface parameter errors before any work is scheduled.
        for &v in &spec.values {
            spec.point(v)?;
        }
        Ok(spec)
    }

    fn point(&self, value: f64) -> Result<Point> {
        let mut q = self.q;
        let mut iterations = self.iterations;
        let mut m = self.m;
        let mut mode = self.mode;
        match (self.swept, &mut mode) {
            (SweptVariable::Q, _) => q = value,
            (SweptVariable::T, _) => iterations = value as u64,
            (SweptVariable::M, _) => m = value as u64,
            (SweptVariable::Tau, SweepMode::Tau { tau, .. }) => *tau = value,
            (SweptVariable::Epsilon, SweepMode::Epsilon { epsilon }) => *epsilon = value,
            _ => unreachable!("parser pairs swept targets with their mode"),
        }
        let placeholder = match mode {
            SweepMode::Account { noise, .. } => noise,
            _ if self.mechanism == MechanismKind::RandomizedResponse => 0.75,
            _ => 1.0,
        };
        let mech = MechanismSpec::from_kind(self.mechanism, placeholder, self.sensitivity_c)?;
        let query = AccountingQuery::new(mech, q, iterations, m)?.with_delta(self.delta)?;
        let mode = match mode {
            SweepMode::Tau { alpha, tau } => {
                PointMode::Calibrate(Target::Rgp(RgpGuarantee::new(m, RenyiOrder::new(alpha)?, tau)?))
            }
            SweepMode::Epsilon { epsilon } => {
                PointMode::Calibrate(Target::Gp(GpGuarantee::new(m, epsilon, self.delta)?))
            }
            SweepMode::Account { alpha, .. } => PointMode::Account(match alpha {
                Some(a) => OrderChoice::Fixed(RenyiOrder::new(a)?),
                None => OrderChoice::Best,
            }),
        };
        Ok(Point { query, mode })
    }

    /// Evaluates every (value, accountant) pair; rows come back value-major.
    pub fn run(&self) -> Result<Vec<SweepRow>> {
        let jobs: Vec<(f64, Accountant)> = self
            .values
            .iter()
            .flat_map(|&v| self.accountants.iter().map(move |&a| (v, a)))
            .collect();
        jobs.par_iter().map(|&(v, acc)| self.row(v, acc)).collect()
    }

    fn row(&self, value: f64, accountant: Accountant) -> Result<SweepRow> {
        let Point { query, mode } = self.point(value)?;
        let (query, choice) = match mode {
            PointMode::Calibrate(target) => {
                let cal = calibrate(&query, target, accountant)?;
                let choice = match target {
                    Target::Rgp(g) => OrderChoice::Fixed(g.alpha),
                    Target::Gp(_) => OrderChoice::Fixed(cal.alpha_used),
                };
                let query = AccountingQuery { mechanism: query.mechanism.with_noise(cal.noise)?, ..query };
                (query, choice)
            }
            PointMode::Account(choice) => (query, choice),
        };
        let a = assess(accountant, &query, choice)?;
        log::debug!("{} = {value} [{accountant}]: {a:?}", self.swept.name());
        Ok(SweepRow {
            swept_name: self.swept.name(),
            swept_value: if self.swept.is_integer() { format!("{}", value as u64) } else { format!("{value}") },
            effective_m: a.rgp.m,
            accountant: accountant.name(),
            noise_param: query.mechanism.noise(),
            alpha_used: a.rgp.alpha.get(),
            tau: a.rgp.tau,
            epsilon: a.gp.epsilon,
            delta: a.gp.delta,
        })
    }

    /// Writes the `#` header and the rows as CSV.
    pub fn write_csv<W: Write>(&self, rows: &[SweepRow], mut out: W) -> Result<()> {
        writeln!(out, "# rgp-core {} sweep", env!("CARGO_PKG_VERSION"))?;
        for line in self.to_string().lines() {
            writeln!(out, "# {line}")?;
        }
        if self.accountants.contains(&Accountant::Baseline) {
            writeln!(out, "# baseline rdp curve: {}", baseline_curve_name(self.mechanism))?;
            writeln!(out, "# baseline group sizes are rounded up to a power of two (see effective_m)")?;
        }
        let mut csv = csv::Writer::from_writer(out);
        for row in rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Runs the sweep and writes it to `path`, or to the spec's `output`.
    pub fn execute(&self, path: Option<&Path>) -> Result<PathBuf> {
        let path = path
            .map(Path::to_path_buf)
            .or_else(|| self.output.clone())
            .ok_or_else(|| Error::usage("no output path: set 'output' in the spec or pass one explicitly"))?;
        let rows = self.run()?;
        let file = File::create(&path)?;
        let mut writer = BufWriter::new(file);
        self.write_csv(&rows, &mut writer)?;
        writer.flush()?;
        Ok(path)
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

/// Canonical sweep-file text; parses back to the same spec.
impl fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mechanism = {}", self.mechanism)?;
        if self.mechanism == MechanismKind::Skellam {
            writeln!(f, "sens_c = {}", self.sensitivity_c)?;
        }
        writeln!(f, "swept = {}", self.swept.name())?;
        writeln!(f, "values = {}", join(&self.values))?;
        if self.swept != SweptVariable::Q {
            writeln!(f, "q = {}", self.q)?;
        }
        if self.swept != SweptVariable::T {
            writeln!(f, "T = {}", self.iterations)?;
        }
        if self.swept != SweptVariable::M {
            writeln!(f, "m = {}", self.m)?;
        }
        match self.mode {
            SweepMode::Tau { alpha, tau } => {
                writeln!(f, "alpha = {alpha}")?;
                if self.swept != SweptVariable::Tau {
                    writeln!(f, "tau = {tau}")?;
                }
            }
            SweepMode::Epsilon { epsilon } => {
                if self.swept != SweptVariable::Epsilon {
                    writeln!(f, "epsilon = {epsilon}")?;
                }
            }
            SweepMode::Account { noise, alpha } => {
                writeln!(f, "noise = {noise}")?;
                if let Some(a) = alpha {
                    writeln!(f, "alpha = {a}")?;
                }
            }
        }
        writeln!(f, "delta = {}", self.delta)?;
        writeln!(f, "accountants = {}", join(&self.accountants))?;
        if let Some(out) = &self.output {
            writeln!(f, "output = {}", out.display())?;
        }
        Ok(())
    }
}

struct Point {
    query: AccountingQuery<f64>,
    mode: PointMode,
}

enum PointMode {
    Calibrate(Target<f64>),
    Account(OrderChoice<f64>),
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub swept_name: &'static str,
    pub swept_value: String,
    pub effective_m: u64,
    pub accountant: &'static str,
    pub noise_param: f64,
    pub alpha_used: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub delta: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "
        # noise against group size
        mechanism = gaussian
        swept = m
        values = 64, 128
        q = 0.05
        T = 1
        alpha = 4
        tau = 1
        accountants = lower, ours, baseline
    ";

    #[test]
    fn parses_and_orders_accountants() {
        let spec = SweepSpec::parse(SMALL).unwrap();
        assert_eq!(spec.accountants, Accountant::ALL.to_vec());
        assert_eq!(spec.mode, SweepMode::Tau { alpha: 4.0, tau: 1.0 });
        assert_eq!(spec.m, 64);
        assert_eq!(spec.delta, DEFAULT_DELTA);
    }

    #[test]
    fn display_round_trips() {
        let spec = SweepSpec::parse(SMALL).unwrap();
        assert_eq!(SweepSpec::parse(&spec.to_string()).unwrap(), spec);
        let eps = SweepSpec::parse(
            "mech = skellam\nsens_c = 2\nswept = epsilon\nvalues = 2 4 8\nq = 0.01\nT = 1e2\nm = 3\ndelta = 1e-6\noutput = x.csv",
        )
        .unwrap();
        assert_eq!(eps.iterations, 100);
        assert_eq!(SweepSpec::parse(&eps.to_string()).unwrap(), eps);
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = [
            "mechanism = gaussian\nswept = m\nvalues = 4\nq = 0.05\nT = 1\nalpha = 4\ntau = 1\naccountants = ",
            "mechanism = gaussian\nswept = m\nvalues = 8, 4\nq = 0.05\nT = 1\nalpha = 4\ntau = 1",
            "mechanism = gaussian\nswept = m\nvalues = \nq = 0.05\nT = 1\nalpha = 4\ntau = 1",
            "mechanism = gaussian\nswept = m\nvalues = 4\nq = 0.05\nT = 1\ntau = 1",
            "mechanism = gaussian\nswept = m\nvalues = 4\nq = 0.05\nT = 1\nalpha = 4\ntau = 1\nepsilon = 2",
            "mechanism = gaussian\nswept = m\nvalues = 4.5\nq = 0.05\nT = 1\nalpha = 4\ntau = 1",
            "mechanism = gaussian\nswept = m\nvalues = 4\nq = 1.0\nT = 1\nalpha = 4\ntau = 1",
            "mechanism = gaussian\nswept = sigma\nvalues = 4\nq = 0.05\nT = 1\nalpha = 4\ntau = 1",
            "mechanism = gaussian\nswept = m\nvalues = 4\nq = 0.05\nT = 1\nalpha = 4\ntau = 1\ncolour = red",
            "mechanism = gaussian\nmechanism = laplace",
            "mechanism = gaussian\nswept = m\nvalues = 4\nq = 0.05\nalpha = 4\ntau = 1",
        ];
        for text in bad {
            assert!(matches!(SweepSpec::parse(text), Err(Error::Usage(_))), "{text}");
        }
    }

    #[test]
    fn rows_are_value_major_and_sandwiched() {
        let spec = SweepSpec::parse(SMALL).unwrap();
        let rows = spec.run().unwrap();
        assert_eq!(rows.len(), 6);
        let names: Vec<_> = rows.iter().map(|r| (r.swept_value.as_str(), r.accountant)).collect();
        assert_eq!(
            names,
            [
                ("64", "ours"),
                ("64", "baseline"),
                ("64", "lower_bound"),
                ("128", "ours"),
                ("128", "baseline"),
                ("128", "lower_bound"),
            ]
        );
        for chunk in rows.chunks(3) {
            let (ours, base, lower) = (&chunk[0], &chunk[1], &chunk[2]);
            assert!(lower.noise_param <= ours.noise_param * (1.0 + 1e-6));
            assert!(ours.noise_param <= base.noise_param);
            assert!(chunk.iter().all(|r| r.tau <= 1.0 && r.alpha_used == 4.0));
        }
    }

    #[test]
    fn fixed_noise_mode() {
        let spec = SweepSpec::parse("mechanism = rr\nswept = q\nvalues = 0.01, 0.1\nT = 1\nm = 5\nnoise = 0.75\nalpha = 2").unwrap();
        let rows = spec.run().unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].tau > rows[0].tau);
        assert!(rows.iter().all(|r| r.noise_param == 0.75));
    }

    #[test]
    fn csv_is_reproducible() {
        let spec = SweepSpec::parse(SMALL).unwrap();
        let render = || {
            let mut buf = Vec::new();
            spec.write_csv(&spec.run().unwrap(), &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let first = render();
        assert_eq!(first, render());
        assert!(first.contains("swept_name,swept_value,effective_m,accountant,noise_param,alpha_used,tau,epsilon,delta"));
        assert!(first.lines().take_while(|l| l.starts_with('#')).count() > 5);
    }
}
