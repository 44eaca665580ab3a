//! System descriptor grammar:
//!
//! ```text
//! badic:b=<int>                        full base-b digit system
//! cantor:b=<int>,digits=<d1>|<d2>|...  base-b system restricted to digits
//! cf:amax=<int>                        digit branches 1/(1+x) .. 1/(amax+x)
//! affine:[(a1,c1),(a2,c2),...]         explicit affine branches a x + c
//! ```

use super::{BranchSpec, IfsSystem};
use crate::error::{Error, Result};

/// Parses a descriptor and builds the validated system.
pub fn build_system(descriptor: &str) -> Result<IfsSystem> {
    let desc = descriptor.trim();
    let (head, rest) = desc
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("missing ':' in descriptor '{desc}'")))?;
    let branches = match head {
        "badic" => {
            let b = parse_u32_field(rest, "b")?;
            if b < 2 {
                return Err(Error::Parse(format!("badic base must be >= 2, got {b}")));
            }
            (0..b)
                .map(|k| BranchSpec::Affine {
                    slope: 1.0 / b as f64,
                    offset: k as f64 / b as f64,
                })
                .collect()
        }
        "cantor" => {
            let (b_part, digits_part) = rest.split_once(',').ok_or_else(|| {
                Error::Parse("cantor descriptor needs 'b=<int>,digits=<d1>|<d2>'".into())
            })?;
            let b = parse_u32_field(b_part, "b")?;
            if b < 2 {
                return Err(Error::Parse(format!("cantor base must be >= 2, got {b}")));
            }
            let digits_str = digits_part
                .strip_prefix("digits=")
                .ok_or_else(|| Error::Parse(format!("expected 'digits=', got '{digits_part}'")))?;
            let mut digits = Vec::new();
            for d in digits_str.split('|') {
                let d: u32 = d
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad digit '{d}'")))?;
                if d >= b {
                    return Err(Error::Parse(format!("digit {d} not below base {b}")));
                }
                if digits.contains(&d) {
                    return Err(Error::Parse(format!("repeated digit {d}")));
                }
                digits.push(d);
            }
            digits
                .iter()
                .map(|&k| BranchSpec::Affine {
                    slope: 1.0 / b as f64,
                    offset: k as f64 / b as f64,
                })
                .collect()
        }
        "cf" => {
            let amax = parse_u32_field(rest, "amax")?;
            if amax == 0 {
                return Err(Error::Parse("cf truncation amax must be >= 1".into()));
            }
            (1..=amax).map(|d| BranchSpec::Moebius { digit: d }).collect()
        }
        "affine" => parse_affine_list(rest)?,
        other => {
            return Err(Error::Parse(format!(
                "unknown system family '{other}' (expected badic | cantor | cf | affine)"
            )))
        }
    };
    IfsSystem::new(branches, desc.to_string())
}

fn parse_u32_field(s: &str, name: &str) -> Result<u32> {
    let s = s.trim();
    let value = s
        .strip_prefix(name)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::Parse(format!("expected '{name}=<int>', got '{s}'")))?;
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad integer '{value}' for {name}")))
}

fn parse_affine_list(s: &str) -> Result<Vec<BranchSpec>> {
    let s = s.trim();
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("expected '[(a,c),...]', got '{s}'")))?;
    let mut branches = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let close = rest
            .find(')')
            .ok_or_else(|| Error::Parse(format!("unbalanced parenthesis in '{s}'")))?;
        let pair = rest[..close]
            .trim()
            .strip_prefix('(')
            .ok_or_else(|| Error::Parse(format!("expected '(a,c)' in '{s}'")))?;
        let (a, c) = pair
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("expected 'a,c' in '({pair})'")))?;
        let slope: f64 = a
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad slope '{a}'")))?;
        let offset: f64 = c
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad offset '{c}'")))?;
        branches.push(BranchSpec::Affine { slope, offset });
        rest = rest[close + 1..].trim().trim_start_matches(',').trim();
    }
    if branches.is_empty() {
        return Err(Error::Parse("empty affine branch list".into()));
    }
    Ok(branches)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_families() {
        assert_eq!(build_system("badic:b=2").unwrap().alphabet_len(), 2);
        assert_eq!(
            build_system("cantor:b=3,digits=0|2").unwrap().alphabet_len(),
            2
        );
        assert_eq!(build_system("cf:amax=3").unwrap().alphabet_len(), 3);
        let sys = build_system("affine:[(0.5,0),(0.25,0.75)]").unwrap();
        assert_eq!(sys.alphabet_len(), 2);
        assert_eq!(sys.rho(), 0.5);
    }

    #[test]
    fn rejects_malformed_descriptors() {
        assert!(build_system("badic").is_err());
        assert!(build_system("badic:b=1").is_err());
        assert!(build_system("cantor:b=3,digits=0|3").is_err());
        assert!(build_system("cantor:b=3,digits=0|0").is_err());
        assert!(build_system("cf:amax=0").is_err());
        assert!(build_system("affine:[(1.5,0)]").is_err());
        assert!(build_system("fourier:n=2").is_err());
    }

    #[test]
    fn negative_slopes_are_allowed_when_contracting() {
        let sys = build_system("affine:[(-0.5,0.5),(0.5,0.5)]").unwrap();
        assert_eq!(sys.rho(), 0.5);
        assert_eq!(sys.distortion(), 1.0);
    }
}
