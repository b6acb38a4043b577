//! `--config` files and the config record written under each table.

use std::ffi::OsString;
use std::fs;

use clap::{ArgMatches, Command};

const SUBCOMMANDS: [&str; 6] = [
    "quadrature",
    "transfer",
    "alpha",
    "precondition",
    "couple-fv",
    "amr-coarsen",
];

fn config_path(args: &[OsString]) -> Result<Option<String>, String> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return match it.next() {
                Some(p) => Ok(Some(p.to_string_lossy().into_owned())),
                None => Err("--config needs a file path".into()),
            };
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some(p.to_string()));
        }
    }
    Ok(None)
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_file(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(format!("config line {}: invalid key '{}'", i + 1, k.trim()));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Inserts the config file's entries as flags right after the subcommand so
/// that flags given on the command line, which come later, win.
pub fn merge(mut args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let entries = parse_file(&text)?;
    let at = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map_or(args.len(), |i| i + 1);
    let flags = entries
        .into_iter()
        .map(|(k, v)| OsString::from(format!("--{k}={v}")));
    args.splice(at..at, flags);
    Ok(args)
}

/// Every argument of the invoked subcommand, in declaration order, with its
/// effective value (empty when unset).
pub fn record(command: &Command, matches: &ArgMatches) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let Some((name, sub)) = matches.subcommand() else {
        return out;
    };
    out.push(("command".to_string(), name.to_string()));
    let Some(def) = command.find_subcommand(name) else {
        return out;
    };
    let globals = command.get_arguments().filter(|a| a.is_global_set());
    for arg in def.get_arguments().chain(globals) {
        let id = arg.get_id().as_str();
        if id == "help" || id == "version" {
            continue;
        }
        let value = match sub.try_get_raw(id) {
            Ok(Some(vals)) => vals
                .map(|v| v.to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join(","),
            _ => String::new(),
        };
        out.push((id.replace('_', "-"), value));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let e = parse_file("# header\np = 3\nlor_n=4 # trailing\n\n").unwrap();
        assert_eq!(e, vec![("p".into(), "3".into()), ("lor-n".into(), "4".into())]);
        assert!(parse_file("nonsense").is_err());
    }
}
