//! Built-in schemes and the plain-text scheme catalog format.
//!
//! One record per line, `#` starts a comment:
//!
//! ```text
//! rk_chain          rk2   1 1/2
//! adams_bashforth   ab2   3/2 -1/2
//! explicit_tableau  rk4   a = 1 ; 1 0 ; 1 0 0 ; 1 0 0 0  b = 1/2 ; 0 1/2 ; 0 0 1 ; 1/6 1/3 1/3 1/6
//! multiplier_matrix plf   m = 1,1/2,1 0,1/2 ; 1 0
//! ```
//!
//! Tableau and matrix rows are separated by `;`. Matrix entries are
//! polynomials in `ζ` with ascending coefficients joined by `,`. Numbers are
//! decimals or exact ratios `p/q`.

use crate::error::{Error, Result};
use crate::scheme_algebra::{SchemeKind, SchemeSpec};
use crate::scheme_constructor;

pub const BUILTIN_NAMES: &[&str] = &[
    "euler",
    "rk2",
    "rk3",
    "rk4",
    "rk5cm92",
    "ab2",
    "ab3",
    "ab4",
    "absch3",
    "absch4",
    "chain3",
    "chain4",
    "chain5",
    "chain6",
    "chain7",
    "scheme5",
    "pseudo-leap-frog",
];

/// Looks up a built-in scheme. `rk1` is accepted for `euler`, `scheme3` and
/// `scheme4` for `chain3` and `chain4`.
pub fn builtin(name: &str) -> Result<SchemeSpec> {
    let third = 1.0 / 3.0;
    match name {
        "euler" | "rk1" => SchemeSpec::rk_chain(name, vec![1.0]),
        "rk2" => SchemeSpec::rk_chain(name, vec![1.0, 0.5]),
        "rk3" => SchemeSpec::tableau(
            name,
            vec![vec![1.0], vec![0.75, 0.25], vec![third, 0.0, 2.0 * third]],
            vec![vec![1.0], vec![0.0, 0.25], vec![0.0, 0.0, 2.0 * third]],
        ),
        "rk4" => SchemeSpec::tableau(
            name,
            vec![vec![1.0], vec![1.0, 0.0], vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]],
            vec![
                vec![0.5],
                vec![0.0, 0.5],
                vec![0.0, 0.0, 1.0],
                vec![1.0 / 6.0, third, third, 1.0 / 6.0],
            ],
        ),
        // β = (1, 1, 1/2, 1/6, 1/24, 1/120, 1/1280)
        "rk5cm92" => SchemeSpec::rk_chain(name, vec![1.0, 0.5, third, 0.25, 0.2, 3.0 / 32.0]),
        "ab2" => SchemeSpec::adams_bashforth(name, vec![1.5, -0.5]),
        "ab3" => SchemeSpec::adams_bashforth(name, vec![23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0]),
        "ab4" => SchemeSpec::adams_bashforth(
            name,
            vec![55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0],
        ),
        "absch3" => SchemeSpec::adams_bashforth(name, vec![5.0 / 3.0, -5.0 / 6.0, 1.0 / 6.0]),
        "absch4" => SchemeSpec::adams_bashforth(
            name,
            vec![7.0 / 4.0, -21.0 / 20.0, 7.0 / 20.0, -1.0 / 20.0],
        ),
        "chain3" | "chain4" | "chain5" | "chain6" | "chain7" | "scheme3" | "scheme4" => {
            let m = name.chars().last().and_then(|c| c.to_digit(10)).expect("digit suffix") as usize;
            let mut scheme = scheme_constructor::build_rk_chain(m)?.scheme;
            scheme.name = name.to_string();
            Ok(scheme)
        }
        // β = (1, 1, 1/2, 1/6, 1/24, 1/144)
        "scheme5" => SchemeSpec::rk_chain(name, vec![1.0, 0.5, third, 0.25, 1.0 / 6.0]),
        // u_{n+1} = u_n + δt L((u_n + u_{n-1})/2 + δt L u_n) for a linear operator L
        "pseudo-leap-frog" => SchemeSpec::multiplier_matrix(
            name,
            vec![vec![vec![1.0, 0.5, 1.0], vec![0.0, 0.5]], vec![vec![1.0], vec![]]],
        ),
        _ => Err(Error::InvalidScheme(format!(
            "unknown scheme `{name}` (built-ins: {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// Parses a decimal or `p/q` number.
pub fn parse_number(text: &str) -> Option<f64> {
    let value = match text.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().ok()?;
            let q: f64 = q.trim().parse().ok()?;
            if q == 0.0 {
                return None;
            }
            p / q
        }
        None => text.trim().parse().ok()?,
    };
    value.is_finite().then_some(value)
}

fn numbers(tokens: &[&str], line: usize) -> Result<Vec<f64>> {
    tokens
        .iter()
        .map(|t| {
            parse_number(t).ok_or_else(|| Error::Parse {
                line,
                message: format!("`{t}` is not a number"),
            })
        })
        .collect()
}

fn rows<'a>(tokens: &[&'a str]) -> Vec<Vec<&'a str>> {
    tokens
        .split(|t| *t == ";")
        .map(|r| r.to_vec())
        .collect()
}

fn parse_record(line_no: usize, line: &str) -> Result<SchemeSpec> {
    let parse_err = |message: String| Error::Parse { line: line_no, message };
    // make `;` and `=` separate tokens even without surrounding spaces
    let spaced = line.replace(';', " ; ").replace('=', " = ");
    let tokens: Vec<&str> = spaced.split_whitespace().collect();
    if tokens.len() < 3 {
        return Err(parse_err("expected `<kind> <name> <coefficients>`".into()));
    }
    let (kind, name, rest) = (tokens[0], tokens[1], &tokens[2..]);
    let scheme = match kind {
        "rk_chain" => SchemeSpec::rk_chain(name, numbers(rest, line_no)?),
        "adams_bashforth" => SchemeSpec::adams_bashforth(name, numbers(rest, line_no)?),
        "explicit_tableau" => {
            let a_at = rest.iter().position(|t| *t == "a");
            let b_at = rest.iter().position(|t| *t == "b");
            let (a_at, b_at) = match (a_at, b_at) {
                (Some(a), Some(b)) if a < b && rest.get(a + 1) == Some(&"=") && rest.get(b + 1) == Some(&"=") => (a, b),
                _ => return Err(parse_err("explicit_tableau needs `a = rows b = rows`".into())),
            };
            if a_at != 0 {
                return Err(parse_err(format!("unexpected `{}` before `a =`", rest[0])));
            }
            let parse_rows = |toks: &[&str]| -> Result<Vec<Vec<f64>>> {
                rows(toks).iter().map(|r| numbers(r, line_no)).collect()
            };
            let a = parse_rows(&rest[a_at + 2..b_at])?;
            let b = parse_rows(&rest[b_at + 2..])?;
            SchemeSpec::tableau(name, a, b)
        }
        "multiplier_matrix" => {
            if rest.len() < 3 || rest[0] != "m" || rest[1] != "=" {
                return Err(parse_err("multiplier_matrix needs `m = rows`".into()));
            }
            let entries = rows(&rest[2..])
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|entry| {
                            let parts: Vec<&str> = entry.split(',').collect();
                            numbers(&parts, line_no)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            SchemeSpec::multiplier_matrix(name, entries)
        }
        other => return Err(parse_err(format!("unknown scheme kind `{other}`"))),
    };
    scheme.map_err(|e| parse_err(e.to_string()))
}

/// Parses every record of a catalog file.
pub fn parse_catalog(text: &str) -> Result<Vec<SchemeSpec>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_record(idx + 1, line)?);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "catalog contains no scheme records".into(),
        });
    }
    Ok(out)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

/// One catalog record; parses back to the same scheme.
pub fn format_scheme(scheme: &SchemeSpec) -> String {
    let name = &scheme.name;
    match &scheme.kind {
        SchemeKind::RkChain { alphas } => format!("rk_chain {name} {}", join(alphas)),
        SchemeKind::AdamsBashforth { alphas } => format!("adams_bashforth {name} {}", join(alphas)),
        SchemeKind::Tableau { a, b } => {
            let table = |t: &Vec<Vec<f64>>| t.iter().map(|r| join(r)).collect::<Vec<_>>().join(" ; ");
            format!("explicit_tableau {name} a = {} b = {}", table(a), table(b))
        }
        SchemeKind::MultiplierMatrix { entries } => {
            let rows: Vec<String> = entries
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|p| {
                            if p.is_empty() {
                                "0".to_string()
                            } else {
                                p.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
                            }
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            format!("multiplier_matrix {name} m = {}", rows.join(" ; "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme_algebra::amplification;

    #[test]
    fn every_builtin_resolves() {
        for name in BUILTIN_NAMES {
            let s = builtin(name).unwrap();
            assert_eq!(&s.name, name);
        }
        assert!(builtin("rk9").is_err());
    }

    #[test]
    fn numbers_and_ratios() {
        assert_eq!(parse_number("1/2"), Some(0.5));
        assert_eq!(parse_number("-21/20"), Some(-1.05));
        assert_eq!(parse_number("0.25"), Some(0.25));
        assert_eq!(parse_number("1/0"), None);
        assert_eq!(parse_number("x"), None);
    }

    #[test]
    fn parse_all_kinds() {
        let text = "\
# comment line
rk_chain rk2 1 1/2
adams_bashforth ab2 3/2 -1/2   # trailing comment
explicit_tableau rk4 a = 1 ; 1 0 ; 1 0 0 ; 1 0 0 0 b = 1/2 ; 0 1/2 ; 0 0 1 ; 1/6 1/3 1/3 1/6
multiplier_matrix plf m = 1,1/2,1 0,1/2 ; 1 0
";
        let schemes = parse_catalog(text).unwrap();
        assert_eq!(schemes.len(), 4);
        assert_eq!(schemes[0], builtin("rk2").unwrap());
        let beta = amplification(&schemes[2]).unwrap();
        let rk4 = amplification(&builtin("rk4").unwrap()).unwrap();
        for (x, y) in beta.betas.iter().zip(&rk4.betas) {
            assert!((x - y).abs() < 1e-15);
        }
        match &schemes[3].kind {
            SchemeKind::MultiplierMatrix { entries } => assert_eq!(entries[0][0], vec![1.0, 0.5, 1.0]),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_catalog("rk_chain ok 1\nrk_chain bad 1 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_catalog("leapfrog x 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_catalog("explicit_tableau t a = 1 1 b = 1 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(parse_catalog("# nothing\n").is_err());
    }

    #[test]
    fn format_round_trip() {
        for name in ["euler", "rk3", "rk4", "ab4", "chain4", "pseudo-leap-frog"] {
            let s = builtin(name).unwrap();
            let back = parse_catalog(&format_scheme(&s)).unwrap();
            assert_eq!(back[0], s, "{name}");
        }
    }
}
