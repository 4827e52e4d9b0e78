use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command as ClapCommand};

use se2diffuse::app;
use se2diffuse::config::{Command, RunConfig, KEYS};
use se2diffuse::Result;

fn cli() -> ClapCommand {
    let mut root = ClapCommand::new("se2diffuse")
        .about("Sub-Riemannian diffusion for image inpainting and enhancement")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for cmd in Command::ALL {
        let mut sub = ClapCommand::new(cmd.name()).about(cmd.about()).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("key=value file; flags take precedence"),
        );
        for (key, help) in KEYS {
            let mut arg = Arg::new(*key).long(key.replace('_', "-")).help(*help);
            match *key {
                "input" => arg = arg.short('i'),
                "output" => arg = arg.short('o'),
                "mask" => arg = arg.short('m'),
                _ => {}
            }
            sub = sub.arg(arg);
        }
        root = root.subcommand(sub);
    }
    root
}

fn build_config(name: &str, matches: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(name.parse()?);
    if let Some(path) = matches.get_one::<PathBuf>("config") {
        cfg.apply_file(path)?;
    }
    for (key, _) in KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            cfg.set(key, value)?;
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let result = build_config(name, sub).and_then(|cfg| app::run(&cfg));
    match result {
        Ok(entries) => {
            if name == "metrics" {
                for (k, v) in entries.iter().skip_while(|(k, _)| k != "psnr") {
                    println!("{k}={v}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("se2diffuse: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
