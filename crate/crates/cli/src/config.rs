//! Flag resolution: command line, then `AFVA_*` environment variables, then
//! a `key=value` config file, then built-in defaults.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context};
use clap::parser::ValueSource;
use clap::{ArgMatches, Command};

pub const ENV_PREFIX: &str = "AFVA_";
const SKIP: [&str; 3] = ["config", "help", "version"];

pub fn env_name(long: &str) -> String {
    format!("{ENV_PREFIX}{}", long.to_ascii_uppercase().replace('-', "_"))
}

fn configurable(cmd: &Command) -> impl Iterator<Item = &clap::Arg> {
    cmd.get_arguments()
        .filter(|a| a.get_long().is_some() && !SKIP.contains(&a.get_id().as_str()))
}

/// Attaches an `AFVA_<FLAG>` environment fallback to every long flag.
pub fn with_env(mut cmd: Command) -> Command {
    let subs: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in subs {
        cmd = cmd.mut_subcommand(name, |mut sub| {
            let nested: Vec<String> = sub.get_subcommands().map(|s| s.get_name().to_string()).collect();
            for n in nested {
                sub = sub.mut_subcommand(n, attach_env);
            }
            attach_env(sub)
        });
    }
    cmd
}

fn attach_env(mut cmd: Command) -> Command {
    let args: Vec<(String, String)> = configurable(&cmd)
        .map(|a| (a.get_id().to_string(), a.get_long().unwrap().to_string()))
        .collect();
    for (id, long) in args {
        let var: &'static str = Box::leak(env_name(&long).into_boxed_str());
        cmd = cmd.mut_arg(id, |a| a.env(var));
    }
    cmd
}

fn known_keys(cmd: &Command, out: &mut BTreeSet<String>) {
    out.extend(configurable(cmd).map(|a| a.get_long().unwrap().to_string()));
    for sub in cmd.get_subcommands() {
        known_keys(sub, out);
    }
}

/// Finds `--config PATH` / `--config=PATH` in raw arguments, or `AFVA_CONFIG`.
pub fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    std::env::var_os(format!("{ENV_PREFIX}CONFIG"))
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// keys are flag names, with `_` accepted for `-`.
pub fn parse_config(text: &str, cmd: &Command) -> anyhow::Result<Vec<(String, String)>> {
    let mut known = BTreeSet::new();
    known_keys(cmd, &mut known);
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value", no + 1);
        };
        let key = key.trim().replace('_', "-");
        if !known.contains(&key) {
            bail!("config line {}: unknown key {key:?}", no + 1);
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Exposes config-file values as environment fallbacks, leaving variables
/// that are already set untouched.
pub fn apply_config_file(path: &Path, cmd: &Command) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    for (key, value) in parse_config(&text, cmd)? {
        let var = env_name(&key);
        if std::env::var_os(&var).is_none() {
            std::env::set_var(var, value);
        }
    }
    Ok(())
}

/// `key=value (source)` lines for every resolved flag of the leaf subcommand.
pub fn resolved(matches: &ArgMatches) -> Vec<String> {
    let mut path = Vec::new();
    let mut m = matches;
    while let Some((name, sub)) = m.subcommand() {
        path.push(name.to_string());
        m = sub;
    }
    let mut lines = vec![format!("command={}", path.join(" "))];
    let mut ids: Vec<&str> = m.ids().map(|id| id.as_str())        .filter(|id| !SKIP.contains(id))
        // flattened argument groups are named after their struct
        .filter(|id| !id.starts_with(|c: char| c.is_ascii_uppercase()))
        .collect();
    ids.sort_unstable();
    for id in ids {
        let Ok(Some(raw)) = m.try_get_raw(id) else { continue };
        let value: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        let source = match m.value_source(id) {
            Some(ValueSource::CommandLine) => "flag",
            Some(ValueSource::EnvVariable) => "env",
            Some(ValueSource::DefaultValue) => "default",
            _ => "unknown",
        };
        lines.push(format!("{}={} ({source})", id.replace('_', "-"), value.join(",")));
    }
    lines
}
