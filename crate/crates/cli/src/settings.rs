//! `--config FILE` support: file values become flags placed before the
//! user's own, so anything given on the command line wins.

use std::ffi::OsString;
use std::fs;

use rasphylo::io::parse_config;

use crate::commands::CliError;

const SUBCOMMANDS: [&str; 3] = ["simulate", "pipeline", "eval"];

pub fn expand_config(raw: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut args = Vec::with_capacity(raw.len());
    let mut config_path = None;
    let mut iter = raw.into_iter();
    while let Some(arg) = iter.next() {
        match arg.to_str() {
            Some("--config") => {
                let path = iter
                    .next()
                    .ok_or_else(|| CliError::Usage("--config needs a file path".into()))?;
                config_path = Some(path);
            }
            Some(s) if s.starts_with("--config=") => config_path = Some(OsString::from(&s["--config=".len()..])),
            _ => args.push(arg),
        }
    }
    let Some(path) = config_path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|source| CliError::Io {
        path: path.to_string_lossy().into_owned(),
        source,
    })?;
    let values = parse_config(&text).map_err(|e| CliError::Usage(format!("config file: {e}")))?;

    let mut injected = Vec::new();
    for (key, value) in values {
        let flag = format!("--{}", key.replace('_', "-"));
        match value.as_str() {
            "true" => injected.push(OsString::from(flag)),
            "false" => {}
            _ => {
                injected.push(OsString::from(flag));
                injected.push(OsString::from(value));
            }
        }
    }
    let at = insertion_point(&args);
    args.splice(at..at, injected);
    Ok(args)
}

/// Index just past the subcommand path (`simulate`, `eval rf`, ...).
fn insertion_point(args: &[OsString]) -> usize {
    let Some(pos) = args
        .iter()
        .skip(1)
        .position(|a| a.to_str().is_some_and(|s| SUBCOMMANDS.contains(&s)))
    else {
        return args.len();
    };
    let pos = pos + 1;
    if args[pos] == "eval" && args.get(pos + 1).is_some_and(|a| a == "rf" || a == "tv") {
        pos + 2
    } else {
        pos + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn insertion_after_subcommand() {
        assert_eq!(
            insertion_point(&os(&["bin", "--threads", "2", "pipeline", "--f", "1"])),
            4
        );
        assert_eq!(insertion_point(&os(&["bin", "eval", "tv", "a", "b"])), 3);
        assert_eq!(insertion_point(&os(&["bin"])), 1);
    }

    #[test]
    fn file_values_precede_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "# run\nbig_m = 1.5\nstats_only = true\ndebug = false\n").unwrap();
        let out = expand_config(os(&[
            "bin",
            "pipeline",
            "--config",
            path.to_str().unwrap(),
            "--big-m",
            "2",
        ]))
        .unwrap();
        assert_eq!(
            out,
            os(&["bin", "pipeline", "--big-m", "1.5", "--stats-only", "--big-m", "2"])
        );
    }
}
