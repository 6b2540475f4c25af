//! Layering of `--config` TOML tables under command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Error;

/// Finds `--config`, and if present inserts the flags from the file's
/// `[<subcommand>]` table right after the subcommand name, skipping any
/// flag the user already passed.
pub(super) fn apply(args: Vec<String>) -> Result<(Vec<String>, Option<PathBuf>), Error> {
    let Some((config_path, consumed)) = find_config(&args) else {
        return Ok((args, None));
    };
    let Some(sub_at) =
        (1..args.len()).find(|&i| !consumed.contains(&i) && !args[i].starts_with('-'))
    else {
        return Ok((args, Some(config_path)));
    };
    let text = fs::read_to_string(&config_path).map_err(|source| Error::Input {
        path: config_path.clone(),
        source,
    })?;
    let table: toml::Table = text.parse().map_err(|source| Error::Toml {
        path: config_path.clone(),
        source,
    })?;
    let injected = match table.get(&args[sub_at]) {
        None => Vec::new(),
        Some(toml::Value::Table(t)) => table_to_flags(&config_path, t, &args[sub_at + 1..])?,
        Some(_) => {
            return Err(Error::Invalid {
                path: config_path,
                reason: format!("`{}` must be a table", args[sub_at]),
            })
        }
    };
    let mut out = args[..=sub_at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[sub_at + 1..]);
    Ok((out, Some(config_path)))
}

/// Path given to `--config` and the argument positions it occupies.
fn find_config(args: &[String]) -> Option<(PathBuf, Vec<usize>)> {
    for (i, a) in args.iter().enumerate().skip(1) {
        if a == "--" {
            return None;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some((PathBuf::from(v), vec![i]));
        }
        if a == "--config" {
            return args.get(i + 1).map(|v| (PathBuf::from(v), vec![i, i + 1]));
        }
    }
    None
}

fn user_has_flag(user: &[String], flag: &str) -> bool {
    user.iter().any(|a| {
        a == flag
            || a.strip_prefix(flag)
                .is_some_and(|rest| rest.starts_with('='))
    })
}

fn scalar(path: &Path, key: &str, v: &toml::Value) -> Result<String, Error> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        _ => Err(Error::Invalid {
            path: path.to_path_buf(),
            reason: format!("`{key}` must be a string, number, boolean or array of those"),
        }),
    }
}

fn table_to_flags(path: &Path, table: &toml::Table, user: &[String]) -> Result<Vec<String>, Error> {
    let mut flags = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        if user_has_flag(user, &flag) {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => flags.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                for item in items {
                    flags.push(flag.clone());
                    flags.push(scalar(path, key, item)?);
                }
            }
            other => {
                flags.push(flag);
                flags.push(scalar(path, key, other)?);
            }
        }
    }
    Ok(flags)
}
