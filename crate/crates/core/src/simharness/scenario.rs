//! Scenario files: one trajectory per line.
//!
//! ```text
//! # name      kind          parameters
//! converged   saturating    asymptote=0.8 rate=0.15
//! fallback    saturating    asymptote=0.5 noise=0.01 seed=3
//! plateau5    plateau       level=0.6 at=5
//! drift       noisy-linear  start=0.2 slope=0.01 noise=0.02 seed=1
//! script      scripted      values=0.1,0.2,0.3
//! ```
//!
//! `rate` defaults to 0.15; `noise` and `seed` default to 0.

use std::collections::{BTreeMap, BTreeSet};

use super::{SimError, TrajectoryKind, TrajectorySpec};

const DEFAULT_RATE: f64 = 0.15;

pub fn parse_scenarios(text: &str) -> Result<Vec<TrajectorySpec>, SimError> {
    let mut specs = Vec::new();
    let mut names = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let spec = parse_line(line).map_err(|reason| SimError::Scenario { line: i + 1, reason })?;
        if !names.insert(spec.name.clone()) {
            return Err(SimError::Scenario {
                line: i + 1,
                reason: format!("duplicate scenario name `{}`", spec.name),
            });
        }
        spec.validate().map_err(|e| SimError::Scenario {
            line: i + 1,
            reason: e.to_string(),
        })?;
        specs.push(spec);
    }
    Ok(specs)
}

fn parse_line(line: &str) -> Result<TrajectorySpec, String> {
    let mut tokens = line.split_whitespace();
    let name = tokens.next().ok_or("missing scenario name")?;
    let kind = tokens.next().ok_or("missing trajectory kind")?;
    let mut params = BTreeMap::new();
    for tok in tokens {
        let (k, v) = tok.split_once('=').ok_or_else(|| format!("expected key=value, got `{tok}`"))?;
        if params.insert(k, v).is_some() {
            return Err(format!("parameter `{k}` given twice"));
        }
    }
    let mut p = Params { map: params };
    let kind = match kind {
        "saturating" => TrajectoryKind::Saturating {
            asymptote: p.num("asymptote")?,
            rate: p.num_or("rate", DEFAULT_RATE)?,
            noise: p.num_or("noise", 0.0)?,
            seed: p.int_or("seed", 0)?,
        },
        "plateau" => TrajectoryKind::Plateau {
            level: p.num("level")?,
            at: u32::try_from(p.int("at")?).map_err(|_| "`at` is too large".to_string())?,
        },
        "noisy-linear" => TrajectoryKind::NoisyLinear {
            start: p.num("start")?,
            slope: p.num("slope")?,
            noise: p.num_or("noise", 0.0)?,
            seed: p.int_or("seed", 0)?,
        },
        "scripted" => {
            let raw = p.take("values")?;
            let values = raw
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number")))
                .collect::<Result<Vec<_>, _>>()?;
            TrajectoryKind::Scripted { values }
        }
        other => return Err(format!("unknown trajectory kind `{other}`")),
    };
    if let Some(extra) = p.map.keys().next() {
        return Err(format!("unknown parameter `{extra}`"));
    }
    Ok(TrajectorySpec::new(name, kind))
}

struct Params<'a> {
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Params<'a> {
    fn take(&mut self, key: &str) -> Result<&'a str, String> {
        self.map.remove(key).ok_or_else(|| format!("missing parameter `{key}`"))
    }

    fn num(&mut self, key: &str) -> Result<f64, String> {
        let v = self.take(key)?;
        v.parse().map_err(|_| format!("`{key}={v}` is not a number"))
    }

    fn num_or(&mut self, key: &str, default: f64) -> Result<f64, String> {
        if self.map.contains_key(key) {
            self.num(key)
        } else {
            Ok(default)
        }
    }

    fn int(&mut self, key: &str) -> Result<u64, String> {
        let v = self.take(key)?;
        v.parse().map_err(|_| format!("`{key}={v}` is not a non-negative integer"))
    }

    fn int_or(&mut self, key: &str, default: u64) -> Result<u64, String> {
        if self.map.contains_key(key) {
            self.int(key)
        } else {
            Ok(default)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_kind() {
        let text = "# demo\n\
            a saturating asymptote=0.8\n\
            \n\
            b plateau level=0.6 at=5   # trailing\n\
            c noisy-linear start=0.2 slope=0.01 noise=0.02 seed=4\n\
            d scripted values=0.1,0.2,0.3\n";
        let specs = parse_scenarios(text).unwrap();
        assert_eq!(specs.len(), 4);
        assert_eq!(
            specs[0].kind,
            TrajectoryKind::Saturating {
                asymptote: 0.8,
                rate: 0.15,
                noise: 0.0,
                seed: 0
            }
        );
        assert_eq!(specs[1].kind, TrajectoryKind::Plateau { level: 0.6, at: 5 });
        assert_eq!(
            specs[3].kind,
            TrajectoryKind::Scripted {
                values: vec![0.1, 0.2, 0.3]
            }
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("a saturating\n", 1),
            ("\n\nb wobbly x=1\n", 3),
            ("a plateau level=0.5 at=2 extra=1\n", 1),
            ("a scripted values=0.1,zz\n", 1),
            ("a saturating asymptote=0.5\na plateau level=0.2 at=1\n", 2),
            ("a saturating asymptote=1.5\n", 1),
            ("a saturating asymptote\n", 1),
        ];
        for (text, line) in cases {
            match parse_scenarios(text) {
                Err(SimError::Scenario { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }
}
