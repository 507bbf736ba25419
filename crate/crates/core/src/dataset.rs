//! Plain-text dataset format.
//!
//! Users file:
//!
//! ```text
//! <n_users> <n_items>
//! <user_id>|<group_id>|<item> <item> ...
//! ```
//!
//! Items sidecar, one line per item: `<item_id> <category_id>`.
//! Users and items appear in index order; item lists are ascending.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{InteractionMatrix, Labeling};

pub fn users_to_string(m: &InteractionMatrix, labels: &Labeling) -> Result<String> {
    labels.check_matrix(m)?;
    let mut out = format!("{} {}\n", m.n_users(), m.n_items());
    for (u, row) in m.rows().iter().enumerate() {
        write!(out, "{}|{}|", u, labels.group_of(u)).unwrap();
        for (j, item) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{item}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn items_to_string(labels: &Labeling) -> String {
    let mut out = String::new();
    for (i, c) in labels.item_categories().iter().enumerate() {
        writeln!(out, "{i} {c}").unwrap();
    }
    out
}

fn malformed(source_name: &str, line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedLine {
        source_name: source_name.to_string(),
        line,
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, source_name: &str, line: usize, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| malformed(source_name, line, format!("bad {what} `{s}`")))
}

pub fn parse(users: &str, items: &str) -> Result<(InteractionMatrix, Labeling)> {
    const U: &str = "users file";
    const I: &str = "items file";
    let mut lines = users.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| malformed(U, 1, "missing header"))?;
    let dims: Vec<&str> = header.split(' ').collect();
    let [n_users, n_items] = dims[..] else {
        return Err(malformed(U, 1, "header must be `n_users n_items`"));
    };
    let n_users: usize = parse_num(n_users, U, 1, "user count")?;
    let n_items: usize = parse_num(n_items, U, 1, "item count")?;

    let mut groups = Vec::with_capacity(n_users);
    let mut rows = Vec::with_capacity(n_users);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('|').collect();
        let [user, group, items] = fields[..] else {
            return Err(malformed(U, lineno, "expected `user|group|items`"));
        };
        let user: usize = parse_num(user, U, lineno, "user id")?;
        if user != rows.len() {
            return Err(malformed(U, lineno, format!("expected user {}, found {user}", rows.len())));
        }
        groups.push(parse_num::<u32>(group, U, lineno, "group id")?);
        let row = if items.is_empty() {
            Vec::new()
        } else {
            items
                .split(' ')
                .map(|t| parse_num::<u32>(t, U, lineno, "item id"))
                .collect::<Result<Vec<_>>>()?
        };
        rows.push(row);
    }
    if rows.len() != n_users {
        return Err(malformed(U, users.lines().count(), format!("header declares {n_users} users, found {}", rows.len())));
    }

    let mut categories = Vec::with_capacity(n_items);
    for (idx, line) in items.lines().enumerate() {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(' ').collect();
        let [item, category] = fields[..] else {
            return Err(malformed(I, lineno, "expected `item category`"));
        };
        let item: usize = parse_num(item, I, lineno, "item id")?;
        if item != categories.len() {
            return Err(malformed(I, lineno, format!("expected item {}, found {item}", categories.len())));
        }
        categories.push(parse_num::<u32>(category, I, lineno, "category id")?);
    }
    if categories.len() != n_items {
        return Err(malformed(I, categories.len(), format!("expected {n_items} items, found {}", categories.len())));
    }

    Ok((InteractionMatrix::from_rows(n_items, rows)?, Labeling::new(groups, categories)?))
}

pub fn write(m: &InteractionMatrix, labels: &Labeling, users_path: &Path, items_path: &Path) -> Result<()> {
    fs::write(users_path, users_to_string(m, labels)?).map_err(|e| Error::io(users_path, e))?;
    fs::write(items_path, items_to_string(labels)).map_err(|e| Error::io(items_path, e))?;
    Ok(())
}

pub fn read(users_path: &Path, items_path: &Path) -> Result<(InteractionMatrix, Labeling)> {
    let users = fs::read_to_string(users_path).map_err(|e| Error::io(users_path, e))?;
    let items = fs::read_to_string(items_path).map_err(|e| Error::io(items_path, e))?;
    parse(&users, &items)
}
