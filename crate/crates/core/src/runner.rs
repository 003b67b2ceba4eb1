//! Experiment runner: typed key/value configuration with defaults, CSV
//! outputs with a JSON run record, and seeded parameter sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::double_well::{basin_map, bath_outcome_experiment, DecisionRule, DoubleWellSystem, WellLabel};
use crate::ensembles::{
    baker_attractor, box_counting_dimension, evolve_ensemble, fit_diffusion, gaussian_cloud, grid_entropy,
    occupied_cells, RotorInit, RotorMap,
};
use crate::error::{Error, Result};
use crate::maps::{baker_step, bernoulli_step, gamma_from_nu, NoiseKind};
use crate::open_rotor::{
    band_fraction, classical_band_fraction, compare_with_noisy_map, evolve_open, evolve_to_stationarity,
    zaslavsky_backbone, DissipatorForm, MeasurementMode, RotorDensity,
};
use crate::qbaker::{build_quantum_baker, eigenphases, return_probability, BakerConvention};
use crate::rotor::{
    classical_reference_energy, default_l_max, evolve as evolve_qkr, hbar_from_fraction, localization_length,
    HbarConvention, RotationPhase, GOLDEN,
};
use crate::seeding::split_seed;
use crate::spin_boson::{
    evolve_escalating, initial_state, product_boson_state, random_boson_coeffs, Integrator, SpinBosonSystem,
};
use crate::symbolic::{
    baker_recurrence_period, bernoulli_perm, decode_binary, encode_binary, recurrence_period, shift_step,
    DiscreteDensity, ShiftDirection,
};
use crate::seeding::stream;

/// Environment variable naming the output root.
pub const OUT_ENV: &str = "QCHAOS_OUT";
pub const DEFAULT_OUT_ROOT: &str = "qchaos-out";

pub const COMMANDS: [&str; 11] = [
    "bernoulli",
    "baker",
    "standard-map",
    "discrete",
    "qbaker",
    "qkr",
    "qkr-measured",
    "qkr-dissipative",
    "spin-boson",
    "double-well",
    "sweep",
];

/// Keys accepted by a subcommand with their defaults.
pub fn defaults(command: &str) -> Result<&'static [(&'static str, &'static str)]> {
    Ok(match command {
        "bernoulli" => &[("x0", "0.3"), ("steps", "40"), ("digits", "52")],
        "baker" => &[
            ("points", "200000"),
            ("steps", "5"),
            ("sigma", "0.15"),
            ("grid", "64"),
            ("a", "0.5"),
            ("attractor-points", "100000"),
        ],
        "standard-map" => &[
            ("K", "10"),
            ("steps", "100"),
            ("trajectories", "100000"),
            ("lambda", "0"),
            ("noise", "none"),
            ("nu", "0"),
            ("variance", "0"),
            ("fit-start", "20"),
        ],
        "discrete" => &[("J", "16"), ("map", "baker")],
        "qbaker" => &[("J", "8"), ("convention", "symmetric"), ("n-max", "500"), ("threshold", "0.3")],
        "qkr" => &[
            ("K", "10"),
            ("hbar-frac", "0.15"),
            ("hbar-convention", "angular"),
            ("golden", "true"),
            ("steps", "1000"),
            ("l-max", "0"),
            ("literal-rotation", "false"),
            ("classical-trajectories", "10000"),
        ],
        "qkr-measured" => &[
            ("K", "5"),
            ("hbar-frac", "0.1"),
            ("hbar-convention", "angular"),
            ("golden", "true"),
            ("nu", "0.5"),
            ("gamma", "-1"),
            ("mode", "full"),
            ("steps", "512"),
            ("l-max", "512"),
            ("literal-rotation", "false"),
            ("entropy-every", "0"),
            ("classical-trajectories", "100000"),
        ],
        "qkr-dissipative" => &[
            ("K", "5"),
            ("lambda", "0.3"),
            ("hbar-frac", "0.02"),
            ("hbar-convention", "angular"),
            ("golden", "false"),
            ("l-max", "160"),
            ("dissipator", "jump"),
            ("min-steps", "60"),
            ("max-steps", "400"),
            ("tol", "1e-3"),
            ("n-theta", "256"),
            ("band", "3"),
            ("classical-trajectories", "20000"),
        ],
        "spin-boson" => &[
            ("N", "1"),
            ("nmax", "40"),
            ("g", "0.2"),
            ("omega0", "1"),
            ("omega1", "1"),
            ("T", "200"),
            ("dt", "0.01"),
            ("sign", "1"),
            ("boson", "vacuum"),
            ("every", "10"),
        ],
        "double-well" => &[
            ("a", "0.25"),
            ("b", "0.01"),
            ("lambda", "0.04"),
            ("basin-grid", "256"),
            ("x-range", "10"),
            ("p-range", "2"),
            ("T", "2000"),
            ("dt", "0.05"),
            ("bath-modes", "32"),
            ("temperature", "0.05"),
            ("draws", "0"),
        ],
        "sweep" => &[("command", "qkr-measured"), ("key", "nu"), ("values", "")],
        other => return Err(Error::Config(format!("unknown subcommand `{other}`"))),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: String,
    /// Every accepted key with its effective value.
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Output root: `$QCHAOS_OUT` if set, else `qchaos-out`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
}

/// Parses `key = value` lines; `#` starts a comment. The keys `seed` and
/// `out` are reserved.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Defaults for `command`, overridden in order by `overrides`. Unknown
    /// keys are rejected by name.
    pub fn build(command: &str, overrides: &[(String, String)], seed: Option<u64>, out_dir: Option<PathBuf>) -> Result<Self> {
        let table = defaults(command)?;
        let mut params: BTreeMap<String, String> =
            table.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let mut seed = seed;
        let mut out = out_dir;
        for (k, v) in overrides {
            match k.as_str() {
                "seed" if seed.is_none() => {
                    seed = Some(v.parse().map_err(|_| Error::Config(format!("`seed`: cannot parse `{v}`")))?)
                }
                "seed" => {}
                "out" if out.is_none() => out = Some(PathBuf::from(v)),
                "out" => {}
                _ if params.contains_key(k) => {
                    params.insert(k.clone(), v.clone());
                }
                _ => return Err(Error::Config(format!("unknown key `{k}` for `{command}`"))),
            }
        }
        let seed = seed.unwrap_or(1);
        let out_dir = out.unwrap_or_else(|| output_root().join(format!("{command}_seed{seed}")));
        let cfg = Self {
            command: command.to_string(),
            params,
            seed,
            out_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file then applies flag overrides on top.
    pub fn from_file_and_flags(
        command: &str,
        file: Option<&Path>,
        flags: &[(String, String)],
        seed: Option<u64>,
        out_dir: Option<PathBuf>,
    ) -> Result<Self> {
        let mut all = match file {
            Some(p) => parse_config_text(&fs::read_to_string(p)?)?,
            None => Vec::new(),
        };
        let (mut seed, mut out_dir) = (seed, out_dir);
        for (k, v) in flags {
            match k.as_str() {
                "seed" => seed = Some(v.parse().map_err(|_| Error::Config(format!("`seed`: cannot parse `{v}`")))?),
                "out" => out_dir = Some(PathBuf::from(v)),
                _ => all.push((k.clone(), v.clone())),
            }
        }
        Self::build(command, &all, seed, out_dir)
    }

    /// `key = value` text that `parse_config_text` reads back into the same config.
    pub fn echo(&self) -> String {
        let mut s = format!("seed = {}\nout = {}\n", self.seed, self.out_dir.display());
        for (k, v) in &self.params {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.params
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.raw(key)?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Config(format!("`{key}`: expected a real, got `{v}`")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| Error::Config(format!("`{key}`: expected a non-negative integer, got `{v}`")))
    }

    pub fn i64(&self, key: &str) -> Result<i64> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| Error::Config(format!("`{key}`: expected an integer, got `{v}`")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.raw(key)? {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(Error::Config(format!("`{key}`: expected true/false, got `{v}`"))),
        }
    }

    pub fn choice<'a>(&'a self, key: &str, allowed: &[&str]) -> Result<&'a str> {
        let v = self.raw(key)?;
        if allowed.contains(&v) {
            Ok(v)
        } else {
            Err(Error::Config(format!("`{key}`: `{v}` not one of {allowed:?}")))
        }
    }

    /// Checks that every value parses as its default's type.
    pub fn validate(&self) -> Result<()> {
        for (k, def) in defaults(&self.command)? {
            if def.parse::<f64>().is_ok() {
                self.f64(k)?;
            } else if *def == "true" || *def == "false" {
                self.bool(k)?;
            }
        }
        Ok(())
    }

    fn hbar(&self) -> Result<f64> {
        let conv = match self.choice("hbar-convention", &["angular", "literal"])? {
            "angular" => HbarConvention::Angular,
            _ => HbarConvention::Literal,
        };
        let mut r = self.f64("hbar-frac")?;
        if self.bool("golden")? {
            r /= GOLDEN;
        }
        Ok(hbar_from_fraction(r, conv))
    }

    fn rotation(&self) -> Result<RotationPhase> {
        Ok(if self.bool("literal-rotation")? {
            RotationPhase::Literal
        } else {
            RotationPhase::Half
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    /// The config as `key = value` text.
    pub config_echo: String,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputFile>,
    /// Headline diagnostics of the run.
    pub summary: BTreeMap<String, f64>,
}

struct Sink {
    dir: PathBuf,
    outputs: Vec<OutputFile>,
    summary: BTreeMap<String, f64>,
}

impl Sink {
    fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
        let mut n = 0;
        for r in rows {
            w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
            n += 1;
        }
        w.flush()?;
        self.outputs.push(OutputFile {
            path: name.to_string(),
            rows: n,
        });
        Ok(())
    }

    fn note(&mut self, key: &str, v: f64) {
        self.summary.insert(key.to_string(), v);
    }
}

fn f(x: f64) -> String {
    format!("{x}")
}

/// Runs one experiment, writing CSVs and `run.json` into `config.out_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    if config.command == "sweep" {
        return Err(Error::Config("use `sweep` for sweep configs".into()));
    }
    fs::create_dir_all(&config.out_dir)?;
    let t0 = Instant::now();
    let mut sink = Sink {
        dir: config.out_dir.clone(),
        outputs: Vec::new(),
        summary: BTreeMap::new(),
    };
    match config.command.as_str() {
        "bernoulli" => run_bernoulli(config, &mut sink)?,
        "baker" => run_baker(config, &mut sink)?,
        "standard-map" => run_standard_map(config, &mut sink)?,
        "discrete" => run_discrete(config, &mut sink)?,
        "qbaker" => run_qbaker(config, &mut sink)?,
        "qkr" => run_qkr(config, &mut sink)?,
        "qkr-measured" => run_qkr_measured(config, &mut sink)?,
        "qkr-dissipative" => run_qkr_dissipative(config, &mut sink)?,
        "spin-boson" => run_spin_boson(config, &mut sink)?,
        "double-well" => run_double_well(config, &mut sink)?,
        other => return Err(Error::Config(format!("unknown subcommand `{other}`"))),
    }
    let record = RunRecord {
        config: config.clone(),
        config_echo: config.echo(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: t0.elapsed().as_secs_f64(),
        outputs: sink.outputs,
        summary: sink.summary,
    };
    let json = serde_json::to_string_pretty(&record).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(config.out_dir.join("run.json"), json)?;
    Ok(record)
}

fn run_bernoulli(c: &ExperimentConfig, s: &mut Sink) -> Result<()> {
    let (x0, steps, digits) = (c.f64("x0")?, c.usize("steps")?, c.usize("digits")? as u32);
    let mut x = x0;
    let mut code = encode_binary(x0, digits)?;
    let mut rows = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        rows.push(vec![n.to_string(), f(x), f(decode_binary(&code)), code.to_string()]);
        x = bernoulli_step(x)?;
        code = shift_step(code, ShiftDirection::Up, 0).0;
    }
    s.csv("bernoulli.csv", &["n", "x", "x_from_code", "bits"], rows)
}

fn run_baker(c: &ExperimentConfig, s: &mut Sink) -> Result<()> {
    let (n, steps, sigma, grid, a) = (c.usize("points")?, c.usize("steps")?, c.f64("sigma")?, c.usize("grid")?, c.f64("a")?);
    let mut cloud = gaussian_cloud(n, (0.5, 0.5), sigma, c.seed);
    let mut rows = Vec::new();
    for step in 0..=steps {
        rows.push(vec![
            step.to_string(),
            f(grid_entropy(&cloud, grid, 1.0)),
            occupied_cells(&cloud, grid).to_string(),
        ]);
        for p in cloud.iter_mut() {
            *p = baker_step(*p)?;
        }
    }
    s.csv("baker_entropy.csv", &["n", "entropy", "occupied"], rows)?;
    if a < 1.0 {
        let m = c.usize("attractor-points")?;
        let seeds = crate::ensembles::uniform_cloud(m, split_seed(c.seed, 1));
        let pts = baker_attractor(&seeds, a, 40, 1)?;
        let scales: Vec<f64> = (1..=10).map(|k| 0.5f64.powi(k)).collect();
        let bc = box_counting_dimension(&pts, &scales)?;
        s.note("box_dimension", bc.dimension);
        s.csv(
            "baker_boxcount.csv",
            &["eps", "count"],
            bc.counts.iter().map(|(e, k)| vec![f(*e), k.to_string()]),
        )?;
    }
    Ok(())
}

fn run_standard_map(c: &ExperimentConfig, s: &mut Sink) -> Result<()> {
    let (k, steps, traj, lambda) = (c.f64("K")?, c.usize("steps")?, c.usize("trajectories")?, c.f64("lambda")?);
    let noise = match c.choice("noise", &["none", "gaussian", "reset"])? {
        "none" => NoiseKind::None,
        "gaussian" => NoiseKind::Gaussian { variance: c.f64("variance")? },
        _ => NoiseKind::Reset { nu: c.f64("nu")? },
    };
    let map = if noise == NoiseKind::None && lambda == 0.0 {
        RotorMap::Standard { k }
    } else if noise == NoiseKind::None {
        RotorMap::Zaslavsky { k, lambda }
    } else {
        RotorMap::Noisy { k, noise, lambda }
    };
    let run = evolve_ensemble(&map, &RotorInit::Line { p0: 0.0 }, steps, traj, c.seed, &[])?;
    let start = c.usize("fit-start")?.min(steps.saturating_sub(2));
    let fit = fit_diffusion(&run.variance, start, steps)?;
    s.note("diffusion", fit.slope);
    s.note("diffusion_over_K2_half", fit.slope / (k * k / 2.0));
    s.csv(
        "standard_map.csv",
        &["n", "mean_p", "var_p", "energy"],
        (0..=steps).map(|n| vec![n.to_string(), f(run.mean[n]), f(run.variance[n]), f(run.energy[n])]),
    )
}

fn run_discrete(c: &ExperimentConfig, s: &mut Sink) -> Result<()> {
    let j = c.usize("J")?;
    let b = bernoulli_perm(j)?;
    let period = match c.choice("map", &["bernoulli", "baker"])? {
        "bernoulli" => recurrence_period(j)? as usize,
        _ => {
            let mut data: Vec<f64> = (0..j * j).map(|i| (i as f64 * 0.618_034).fract()).collect();
            let total: f64 = data.iter().sum();
            data.iter_mut().for_each(|v| *v /= total);
            baker_recurrence_period(&DiscreteDensity::matrix(j, data)?, &b, 4 * j)?
                .ok_or_else(|| Error::Numerical("no recurrence found".into()))?
        }
    };
    s.note("period", period as f64);
    s.csv(
        "permutation.csv",
        &["row", "column"],
        b.perm().iter().enumerate().map(|(r, &col)| vec![r.to_string(), col.to_string()]),
    )
}

fn run_qbaker(c: &ExperimentConfig, s: &mut Sink) -> Result<()> {
    let j = c.usize("J")?;
    let conv = match c.choice("convention", &["symmetric", "plain"])? {
        "symmetric" => BakerConvention::Symmetric,
        _ => BakerConvention::Plain,
    };
    let qb = build_quantum_baker(j, conv)?;
    let n_max = c.usize("n-max")? as u64;
    let norm = (j * j) as f64;
    let series: Vec<f64> = (0..=n_max).map(|n| return_probability(&qb, n) / norm).collect();
    let (best_n, best) = series
        .iter()
        .enumerate()
        .skip(1)
        .fold((0, 0.0), |acc, (n, &p)| if p > acc.1 { (n, p) } else { acc });
    s.note("best_revival_n", best_n as f64);
    s.note("best_revival_p", best);
    s.note("threshold_met", (best >= c.f64("threshold")?) as u8 as f64);
    s.csv(
        "return_probability.csv",
        &["n", "p_over_J2"],
        series.iter().enumerate().map(|(n, p)| vec![n.to_string(), f(*p)]),
    )?;
    s.csv(
        "eigenphases.csv",
        &["k", "phase"],
        eigenphases(&qb).iter().enumerate().map(|(k, e)| vec![k.to_string(), f(*e)]),
    )
}

fn run_qkr(c: &ExperimentConfig, s: &mut Sink) -> Result<()> {
    let (kc, steps) = (c.f64("K")?, c.usize("steps")?);
    let hbar = c.hbar()?;
    let k = kc / hbar;
    let l_max = match c.usize("l-max")? {
        0 => default_l_max(k),
        l => l,
    };
    let run = evolve_qkr(l_max, 0, hbar, k, c.rotation()?, steps)?;
    let classical = classical_reference_energy(kc, steps, c.usize("classical-trajectories")?, c.seed)?;
    let l = run.l_values();
    let fit = localization_length(&run.final_p, &l)?;
    s.note("hbar", hbar);
    s.note("l_max", run.l_max as f64);
    s.note("localization_length", fit.length);
    s.note("localization_r2", fit.r_squared);
    s.csv(
        "energy.csv",
        &["n", "E_quantum", "E_classical_ref"],
        (0..=steps).map(|n| vec![n.to_string(), f(run.energy[n]), f(classical[n])]),
    )?;
    s.csv(
        "p_l.csv",
        &["l", "P_l"],
        l.iter().zip(&run.final_p).map(|(l, p)| vec![l.to_string(), f(*p)]),
    )
}

fn run_qkr_measured(c: &ExperimentConfig, s: &mut Sink) -> Result<()> {
    let (kc, steps, l_max) = (c.f64("K")?, c.usize("steps")?, c.usize("l-max")?);
    let hbar = c.hbar()?;
    let mode = match c.choice("mode", &["full", "mean"])? {
        "full" => MeasurementMode::FullPl,
        _ => MeasurementMode::MeanL,
    };
    let gamma = match c.f64("gamma")? {
        g if g >= 0.0 => g,
        _ => gamma_from_nu(c.f64("nu")?),
    };
    let state = RotorDensity::momentum_eigenstate(l_max, 0, hbar, kc / hbar)?
        .with_measurement(gamma, mode)?
        .with_phase(c.rotation()?);
    let run = evolve_open(state, steps, DissipatorForm::Jump, c.usize("entropy-every")?)?;
    let noise = match mode {
        MeasurementMode::FullPl => NoiseKind::full_distribution_measurement(gamma),
        MeasurementMode::MeanL => NoiseKind::mean_l_measurement(hbar, gamma),
    };
    let classical = evolve_ensemble(
        &RotorMap::Noisy { k: kc, noise, lambda: 0.0 },
        &RotorInit::Line { p0: 0.0 },
        steps,
        c.usize("classical-trajectories")?,
        c.seed,
        &[],
    )?;
    let momenta: Vec<f64> = classical.cloud.iter().map(|r| r.p).collect();
    let p = run.state.probabilities();
    let cmp = compare_with_noisy_map(&p, hbar, &momenta)?;
    s.note("tv_distance", cmp.tv);
    s.note("energy_rel_diff", cmp.energy_rel_diff);
    s.note("final_energy", run.energy[steps]);
    let entropy: BTreeMap<usize, f64> = run.entropy.iter().copied().collect();
    s.csv(
        "energy.csv",
        &["n", "E", "E_classical", "S_vN"],
        (0..=steps).map(|n| {
            vec![
                n.to_string(),
                f(run.energy[n]),
                f(classical.energy[n]),
                entropy.get(&n).map(|v| f(*v)).unwrap_or_default(),
            ]
        }),
    )?;
    let lm = l_max as i64;
    s.csv(
        "p_l.csv",
        &["l", "P_l"],
        p.iter().enumerate().map(|(i, v)| vec![(i as i64 - lm).to_string(), f(*v)]),
    )
}

fn run_qkr_dissipative(c: &ExperimentConfig, s: &mut Sink) -> Result<()> {
    let (kc, lambda, l_max) = (c.f64("K")?, c.f64("lambda")?, c.usize("l-max")?);
    let hbar = c.hbar()?;
    let form = match c.choice("dissipator", &["jump", "literal"])? {
        "jump" => DissipatorForm::Jump,
        _ => DissipatorForm::Literal,
    };
    let state = RotorDensity::momentum_eigenstate(l_max, 0, hbar, kc / hbar)?.with_friction(lambda)?;
    let (st, periods, converged) =
        evolve_to_stationarity(state, form, c.f64("tol")?, c.usize("min-steps")?, c.usize("max-steps")?)?;
    let w = st.wigner(c.usize("n-theta")?)?;
    let half = c.f64("band")? * hbar;
    let backbone = |th: f64| zaslavsky_backbone(th, kc, lambda);
    let frac = band_fraction(&w, hbar, backbone, half);
    let classical = evolve_ensemble(
        &RotorMap::Zaslavsky { k: kc, lambda },
        &RotorInit::Uniform { p_min: -5.0, p_max: 5.0 },
        300,
        c.usize("classical-trajectories")?,
        c.seed,
        &[],
    )?;
    let pts: Vec<(f64, f64)> = classical.cloud.iter().map(|r| (r.theta, r.p)).collect();
    s.note("periods", periods as f64);
    s.note("converged", converged as u8 as f64);
    s.note("band_fraction", frac);
    s.note("classical_band_fraction", classical_band_fraction(&pts, backbone, half));
    s.note("energy", st.energy());
    let nt = w.thetas.len();
    s.csv(
        "wigner.csv",
        &["theta", "p", "W"],
        w.p_half.iter().enumerate().flat_map(|(r, ph)| {
            let w = &w;
            (0..nt).map(move |col| vec![f(w.thetas[col]), f(hbar * ph), f(w.values[r * nt + col])])
        }),
    )?;
    s.csv(
        "classical_attractor.csv",
        &["theta", "p"],
        pts.iter().map(|(t, p)| vec![f(*t), f(*p)]),
    )
}

fn run_spin_boson(c: &ExperimentConfig, s: &mut Sink) -> Result<()> {
    let (n, nmax, g) = (c.usize("N")?, c.usize("nmax")?, c.f64("g")?);
    let sys = if n == 1 {
        SpinBosonSystem::single_mode(c.f64("omega0")?, c.f64("omega1")?, g, nmax)?
    } else {
        SpinBosonSystem::ladder(c.f64("omega0")?, c.f64("omega1")?, g, n, nmax)?
    };
    let per_mode: Vec<Vec<crate::quantum::C64>> = (0..n)
        .map(|k| match c.choice("boson", &["vacuum", "random"]) {
            Ok("vacuum") => {
                let mut v = vec![crate::quantum::C64::new(0.0, 0.0); nmax + 1];
                v[0] = crate::quantum::C64::new(1.0, 0.0);
                Ok(v)
            }
            Ok(_) => Ok(random_boson_coeffs(nmax, nmax.min(10), 3.0, &mut stream(c.seed, k as u64))),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let cvec = product_boson_state(&sys, &per_mode)?;
    let sign = c.i64("sign")?;
    let psi = initial_state(&sys, sign.signum() as i8, &cvec)?;
    let run = evolve_escalating(&sys, &psi, c.f64("dt")?, c.f64("T")?, c.usize("every")?, Integrator::Auto)?;
    s.note("n_max_used", run.n_max as f64);
    let p0 = run.samples[0].parity;
    let drift = run.samples.iter().map(|x| (x.parity - p0).abs()).fold(0.0, f64::max);
    s.note("parity_drift", drift);
    s.csv(
        "spin.csv",
        &["t", "a_x", "a_y", "a_z", "purity", "S_vN", "parity_expect"],
        run.samples.iter().map(|x| {
            vec![f(x.t), f(x.bloch[0]), f(x.bloch[1]), f(x.bloch[2]), f(x.purity), f(x.entropy), f(x.parity)]
        }),
    )
}

fn run_double_well(c: &ExperimentConfig, s: &mut Sink) -> Result<()> {
    let sys = DoubleWellSystem::new(c.f64("a")?, c.f64("b")?, 1.0)?.with_friction(c.f64("lambda")?)?;
    let (dt, t_end) = (c.f64("dt")?, c.f64("T")?);
    let grid = c.usize("basin-grid")?;
    if grid > 0 {
        let m = basin_map(&sys, grid, c.f64("x-range")?, c.f64("p-range")?, dt, t_end)?;
        s.note("antisymmetry_violations", m.antisymmetry_violations() as f64);
        s.note("undecided_cells", m.undecided() as f64);
        let np = m.ps.len();
        s.csv(
            "basin.csv",
            &["x", "p", "label"],
            m.labels
                .iter()
                .enumerate()
                .map(|(i, l)| vec![f(m.xs[i / np]), f(m.ps[i % np]), l.sign().to_string()]),
        )?;
    }
    let draws = c.usize("draws")?;
    if draws > 0 {
        let bath = sys.clone().with_ohmic_bath(c.usize("bath-modes")?, 0.3, 2.0, sys.lambda)?;
        let rule = DecisionRule { dt, t_max: t_end, ..Default::default() };
        let e = bath_outcome_experiment(&bath, draws, c.f64("temperature")?, c.seed, rule)?;
        s.note("right_fraction", e.right_fraction());
        s.note("undecided", e.undecided as f64);
        s.csv(
            "bath_outcomes.csv",
            &["draw", "label", "decision_time"],
            e.labels.iter().zip(&e.decision_times).enumerate().map(|(i, (l, t))| {
                vec![i.to_string(), (*l as WellLabel).sign().to_string(), f(*t)]
            }),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub value: String,
    pub seed: u64,
    pub dir: PathBuf,
    pub record: Option<RunRecord>,
    pub error: Option<String>,
}

/// Runs `template` once per axis value in `dir/point_<i>`, seeding point `i`
/// with `split_seed(template.seed, i)`. Failures are recorded and the sweep
/// continues. Writes `summary.csv`.
pub fn sweep(template: &ExperimentConfig, key: &str, values: &[String], dir: &Path) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Config("sweep axis is empty".into()));
    }
    if !template.params.contains_key(key) {
        return Err(Error::Config(format!("unknown key `{key}` for `{}`", template.command)));
    }
    fs::create_dir_all(dir)?;
    let points: Vec<SweepPoint> = values
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let mut cfg = template.clone();
            cfg.params.insert(key.to_string(), v.clone());
            cfg.seed = split_seed(template.seed, i as u64);
            cfg.out_dir = dir.join(format!("point_{i}"));
            let res = cfg.validate().and_then(|_| run(&cfg));
            SweepPoint {
                index: i,
                value: v.clone(),
                seed: cfg.seed,
                dir: cfg.out_dir.clone(),
                record: res.as_ref().ok().cloned(),
                error: res.err().map(|e| e.to_string()),
            }
        })
        .collect();
    let mut keys: Vec<String> = points
        .iter()
        .filter_map(|p| p.record.as_ref())
        .flat_map(|r| r.summary.keys().cloned())
        .collect();
    keys.sort();
    keys.dedup();
    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(|e| Error::Io(e.to_string()))?;
    let mut header = vec!["index".to_string(), key.to_string(), "seed".to_string(), "status".to_string()];
    header.extend(keys.iter().cloned());
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for p in &points {
        let mut row = vec![
            p.index.to_string(),
            p.value.clone(),
            p.seed.to_string(),
            p.error.clone().unwrap_or_else(|| "ok".into()),
        ];
        for k in &keys {
            row.push(
                p.record
                    .as_ref()
                    .and_then(|r| r.summary.get(k))
                    .map(|v| f(*v))
                    .unwrap_or_default(),
            );
        }
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(points)
}
