use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use qchaos::runner::{defaults, output_root, run, sweep, ExperimentConfig, COMMANDS, OUT_ENV};

fn common(cmd: Command) -> Command {
    cmd.arg(Arg::new("config").long("config").value_name("FILE").help("key = value file"))
        .arg(Arg::new("seed").long("seed").value_parser(clap::value_parser!(u64)))
        .arg(Arg::new("out").long("out").value_name("DIR"))
}

fn cli() -> Command {
    let mut root = Command::new("qchaos")
        .about("Classical and quantum chaos experiments")
        .after_help(format!("Output goes to ${OUT_ENV}/<command>_seed<seed> unless --out is given."))
        .subcommand_required(true);
    for name in COMMANDS {
        let mut sub = common(Command::new(name));
        if name == "sweep" {
            sub = sub
                .arg(Arg::new("command").long("command").required(true))
                .arg(Arg::new("key").long("key").required(true))
                .arg(Arg::new("values").long("values").required(true).help("comma-separated axis values"))
                .arg(Arg::new("set").long("set").action(ArgAction::Append).value_name("KEY=VALUE"));
        } else {
            for (key, def) in defaults(name).expect("known command") {
                sub = sub.arg(Arg::new(*key).long(*key).help(format!("default {def}")));
            }
        }
        root = root.subcommand(sub);
    }
    root
}

fn flags(name: &str, m: &ArgMatches) -> Vec<(String, String)> {
    defaults(name)
        .expect("known command")
        .iter()
        .filter_map(|(k, _)| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect()
}

fn main_inner() -> qchaos::Result<()> {
    let m = cli().get_matches();
    let (name, sub) = m.subcommand().expect("subcommand required");
    let file = sub.get_one::<String>("config").map(PathBuf::from);
    let seed = sub.get_one::<u64>("seed").copied();
    let out = sub.get_one::<String>("out").map(PathBuf::from);
    if name == "sweep" {
        let target = sub.get_one::<String>("command").unwrap();
        let mut sets = Vec::new();
        for s in sub.get_many::<String>("set").into_iter().flatten() {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| qchaos::Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            sets.push((k.trim().to_string(), v.trim().to_string()));
        }
        let template = ExperimentConfig::from_file_and_flags(target, file.as_deref(), &sets, seed, None)?;
        let values: Vec<String> = sub
            .get_one::<String>("values")
            .unwrap()
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let key = sub.get_one::<String>("key").unwrap();
        let dir = out.unwrap_or_else(|| output_root().join(format!("sweep_{target}_{key}_seed{}", template.seed)));
        let points = sweep(&template, key, &values, &dir)?;
        let failed = points.iter().filter(|p| p.error.is_some()).count();
        println!("{} points, {} failed -> {}", points.len(), failed, dir.join("summary.csv").display());
        return Ok(());
    }
    let cfg = ExperimentConfig::from_file_and_flags(name, file.as_deref(), &flags(name, sub), seed, out)?;
    let rec = run(&cfg)?;
    for (k, v) in &rec.summary {
        println!("{k} = {v}");
    }
    println!("wrote {} files to {} in {:.2}s", rec.outputs.len() + 1, cfg.out_dir.display(), rec.wall_time_s);
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
