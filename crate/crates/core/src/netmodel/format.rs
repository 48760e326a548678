//! Line-oriented network files.
//!
//! ```text
//! # comment
//! SERVERS
//! s1 40 1/10        # id rate latency
//! LINKS
//! s1 s2
//! FLOWS
//! f1 2.5 0.1 s1 s2  # id rate burst path...
//! FOI
//! f1
//! ```
//!
//! Numbers are rationals written as `p/q`, integers or decimals. The
//! serializer writes reduced `p` or `p/q` and no comments, so serializing a
//! parsed canonical file gives back the same bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use super::{Flow, Server, ServerGraph};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

pub fn parse_rational(s: &str) -> Option<Rational> {
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p).ok()?;
        let q = BigInt::from_str(q).ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(Rational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let mut numer = BigInt::from_str(&digits).ok()?;
        if negative {
            numer = -numer;
        }
        let denom = num_traits::pow(BigInt::from(10), frac.len());
        return Some(Rational::new(numer, denom));
    }
    BigInt::from_str(s).ok().map(|n| Rational::new(n, BigInt::one()))
}

pub fn format_rational(r: &Rational) -> String {
    r.to_string()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Servers,
    Links,
    Flows,
    Foi,
}

pub fn parse_network(text: &str) -> Result<ServerGraph, FormatError> {
    let mut net = ServerGraph::default();
    let mut section = Section::None;
    let mut pending_flows: Vec<(usize, String, Rational, Rational, Vec<String>)> = Vec::new();
    let mut pending_links: Vec<(usize, String, String)> = Vec::new();
    let mut foi_name: Option<(usize, String)> = None;
    let err = |line: usize, message: String| FormatError { line, message };
    let num = |line: usize, s: &str| parse_rational(s).ok_or_else(|| err(line, format!("bad number {s:?}")));

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "SERVERS" => section = Section::Servers,
            "LINKS" => section = Section::Links,
            "FLOWS" => section = Section::Flows,
            "FOI" => section = Section::Foi,
            _ => {
                let fields: Vec<&str> = line.split_whitespace().collect();
                match section {
                    Section::None => return Err(err(line_no, "content before any section".into())),
                    Section::Servers => {
                        let [id, rate, latency] = fields[..] else {
                            return Err(err(line_no, "expected: id rate latency".into()));
                        };
                        net.servers.push(Server {
                            id: id.into(),
                            rate: num(line_no, rate)?,
                            latency: num(line_no, latency)?,
                        });
                    }
                    Section::Links => {
                        let [a, b] = fields[..] else {
                            return Err(err(line_no, "expected: src dst".into()));
                        };
                        pending_links.push((line_no, a.into(), b.into()));
                    }
                    Section::Flows => {
                        if fields.len() < 4 {
                            return Err(err(line_no, "expected: id rate burst path...".into()));
                        }
                        pending_flows.push((
                            line_no,
                            fields[0].into(),
                            num(line_no, fields[1])?,
                            num(line_no, fields[2])?,
                            fields[3..].iter().map(|s| s.to_string()).collect(),
                        ));
                    }
                    Section::Foi => {
                        let [id] = fields[..] else {
                            return Err(err(line_no, "expected: flow id".into()));
                        };
                        if foi_name.is_some() {
                            return Err(err(line_no, "more than one flow of interest".into()));
                        }
                        foi_name = Some((line_no, id.into()));
                    }
                }
            }
        }
    }

    let server = |net: &ServerGraph, line: usize, id: &str| {
        net.server_index(id)
            .ok_or_else(|| err(line, format!("unknown server {id}")))
    };
    for (line, a, b) in pending_links {
        let link = (server(&net, line, &a)?, server(&net, line, &b)?);
        net.links.push(link);
    }
    for (line, id, rate, burst, path) in pending_flows {
        let path = path
            .iter()
            .map(|s| server(&net, line, s))
            .collect::<Result<Vec<_>, _>>()?;
        net.flows.push(Flow { id, rate, burst, path });
    }
    if let Some((line, id)) = foi_name {
        net.foi = Some(
            net.flow_index(&id)
                .ok_or_else(|| err(line, format!("unknown flow {id}")))?,
        );
    }
    Ok(net)
}

pub fn serialize_network(net: &ServerGraph) -> String {
    let mut out = String::new();
    out.push_str("SERVERS\n");
    for s in &net.servers {
        let _ = writeln!(out, "{} {} {}", s.id, format_rational(&s.rate), format_rational(&s.latency));
    }
    out.push_str("LINKS\n");
    for &(a, b) in &net.links {
        let _ = writeln!(out, "{} {}", net.servers[a].id, net.servers[b].id);
    }
    out.push_str("FLOWS\n");
    for f in &net.flows {
        let _ = write!(out, "{} {} {}", f.id, format_rational(&f.rate), format_rational(&f.burst));
        for &s in &f.path {
            let _ = write!(out, " {}", net.servers[s].id);
        }
        out.push('\n');
    }
    if let Some(foi) = net.foi {
        out.push_str("FOI\n");
        let _ = writeln!(out, "{}", net.flows[foi].id);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::tests::five_server_default;
    use crate::rat;

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("3/6"), Some(rat(1, 2)));
        assert_eq!(parse_rational("0.125"), Some(rat(1, 8)));
        assert_eq!(parse_rational("-1.5"), Some(rat(-3, 2)));
        assert_eq!(parse_rational("40"), Some(rat(40, 1)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
        assert_eq!(format_rational(&rat(4, 2)), "2");
        assert_eq!(format_rational(&rat(-1, 3)), "-1/3");
    }

    #[test]
    fn round_trip() {
        let net = five_server_default();
        let text = serialize_network(&net);
        let back = parse_network(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(serialize_network(&back), text);
    }

    #[test]
    fn comments_and_decimals() {
        let text = "# demo\nSERVERS\na 1 0.5 # fast\nb 2/3 0\nLINKS\na b\nFLOWS\nf 0.25 1 a b\nFOI\nf\n";
        let net = parse_network(text).unwrap();
        assert_eq!(net.servers[0].latency, rat(1, 2));
        assert_eq!(net.flows[0].path, vec![0, 1]);
        assert_eq!(net.foi, Some(0));
        assert_eq!(
            serialize_network(&net),
            "SERVERS\na 1 1/2\nb 2/3 0\nLINKS\na b\nFLOWS\nf 1/4 1 a b\nFOI\nf\n"
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_network("SERVERS\na 1\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_network("SERVERS\na 1 0\nFLOWS\nf 1 1 zz\n").unwrap_err();
        assert!(e.message.contains("unknown server"));
    }
}
