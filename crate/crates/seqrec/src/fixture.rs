//! Snapshot fixture files.
//!
//! A fixture captures one database instant as text:
//!
//! ```text
//! # optional comments
//! 5,10,8                      <- d, s, n
//! 1,2:6;3:7;4:8;5:9,NA        <- user 1: item:value pairs, target or NA
//! 2,1:3;3:10;5:5,7
//! ...
//! 0,2:3;3:3;4:4;5:5,NA        <- the new user (id 0), target always NA
//! ```
//!
//! Item indices are 1-based. User lines must appear in order 1..n, with the
//! new user last. Writing a snapshot back projects each user onto their
//! corated items (the snapshot no longer knows ratings the new user cannot
//! see); penalties and masked rows survive the round trip unchanged.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{DatabaseSnapshot, RatingScale};

fn fixture_err(line: usize, message: impl Into<String>) -> Error {
    Error::Fixture {
        line,
        message: message.into(),
    }
}

fn parse_items(field: &str, line: usize) -> Result<BTreeMap<usize, f64>> {
    let mut items = BTreeMap::new();
    for pair in field.split(';') {
        let pair = pair.trim();
        if pair.is_empty() {
            continue;
        }
        let (j, v) = pair
            .split_once(':')
            .ok_or_else(|| fixture_err(line, format!("expected item:value, got `{pair}`")))?;
        let j: usize = j
            .trim()
            .parse()
            .map_err(|_| fixture_err(line, format!("bad item index `{j}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| fixture_err(line, format!("bad rating `{v}`")))?;
        if items.insert(j, v).is_some() {
            return Err(fixture_err(line, format!("item {j} listed twice")));
        }
    }
    Ok(items)
}

/// Parses fixture text into a snapshot.
pub fn parse_fixture_str(text: &str) -> Result<DatabaseSnapshot> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(idx, line)| (idx + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with('#'))
        .collect();
    let (&(header_line, header), rest) = lines
        .split_first()
        .ok_or_else(|| fixture_err(1, "empty fixture"))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 3 {
        return Err(fixture_err(header_line, "header must be `d,s,n`"));
    }
    let d: usize = fields[0]
        .trim()
        .parse()
        .map_err(|_| fixture_err(header_line, format!("bad d `{}`", fields[0])))?;
    let s: f64 = fields[1]
        .trim()
        .parse()
        .map_err(|_| fixture_err(header_line, format!("bad s `{}`", fields[1])))?;
    let n: usize = fields[2]
        .trim()
        .parse()
        .map_err(|_| fixture_err(header_line, format!("bad n `{}`", fields[2])))?;
    let scale = RatingScale::new(d, s).map_err(|e| fixture_err(header_line, e.to_string()))?;

    if rest.len() != n + 1 {
        return Err(fixture_err(
            rest.last().map(|&(l, _)| l).unwrap_or(header_line),
            format!(
                "expected {n} user lines plus the new-user line, got {}",
                rest.len()
            ),
        ));
    }
    let mut users = Vec::with_capacity(n);
    let mut new_user: Option<BTreeMap<usize, f64>> = None;
    for (pos, &(lineno, line)) in rest.iter().enumerate() {
        let mut parts = line.splitn(3, ',');
        let id_field = parts.next().unwrap_or_default();
        let items_field = parts
            .next()
            .ok_or_else(|| fixture_err(lineno, "expected `id,items,target`"))?;
        let target_field = parts
            .next()
            .ok_or_else(|| fixture_err(lineno, "expected `id,items,target`"))?
            .trim();
        let id: usize = id_field
            .trim()
            .parse()
            .map_err(|_| fixture_err(lineno, format!("bad user id `{id_field}`")))?;
        let items = parse_items(items_field, lineno)?;
        if pos < n {
            if id != pos + 1 {
                return Err(fixture_err(
                    lineno,
                    format!("expected user {} here, found id {id}", pos + 1),
                ));
            }
            let target = match target_field {
                "NA" => None,
                raw => Some(raw.parse::<f64>().map_err(|_| {
                    fixture_err(lineno, format!("bad target `{raw}` (number or NA)"))
                })?),
            };
            users.push((items, target));
        } else {
            if id != 0 {
                return Err(fixture_err(
                    lineno,
                    format!("last line must be the new user (id 0), found id {id}"),
                ));
            }
            if target_field != "NA" {
                return Err(fixture_err(lineno, "the new user's target must be NA"));
            }
            new_user = Some(items);
        }
    }
    let new_user = new_user.expect("checked above");
    DatabaseSnapshot::from_rated_rows(&scale, &users, &new_user)
}

/// Reads and parses a fixture file.
pub fn parse_fixture(path: impl AsRef<Path>) -> Result<DatabaseSnapshot> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    parse_fixture_str(&text)
}

fn items_field(entries: &[f64]) -> String {
    entries
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(idx, v)| format!("{}:{v}", idx + 1))
        .collect::<Vec<_>>()
        .join(";")
}

/// Serializes a snapshot as fixture text (corated-items projection).
pub fn write_fixture_str(snapshot: &DatabaseSnapshot) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{},{},{}\n",
        snapshot.d(),
        snapshot.scale().s(),
        snapshot.n()
    ));
    for i in 1..=snapshot.n() {
        let target = snapshot
            .target(i)
            .map(|y| y.to_string())
            .unwrap_or_else(|| "NA".into());
        out.push_str(&format!(
            "{i},{},{target}\n",
            items_field(snapshot.row(i).as_slice())
        ));
    }
    out.push_str(&format!(
        "0,{},NA\n",
        items_field(snapshot.query().as_slice())
    ));
    out
}

/// The worked example database: eight users, five rated movies, a new user
/// asking about the sixth.
pub const TABLE1: &str = "\
# Movie ratings on a 1..10 scale; NA = not rated.
# Items: 1 Armageddon, 2 Platoon, 3 Rambo, 4 Rio Bravo, 5 Star Wars; target: Titanic.
5,10,8
1,2:6;3:7;4:8;5:9,NA
2,1:3;3:10;5:5,7
3,1:7;3:1;5:6,NA
4,2:7;3:1;5:5,6
5,2:7;5:3,1
6,1:3;2:10;3:2;4:7,4
7,2:7;5:1,NA
8,1:4;2:5;4:8;5:3,9
0,2:3;3:3;4:4;5:5,NA
";
