//! SDPA sparse (`.dat-s`) exchange.
//!
//! A problem `min <C, X>  s.t. <A_r, X> = b_r` is written in the SDPA dual
//! form `max <F_0, Y>  s.t. <F_r, Y> = c_r` with `F_0 = -C`, `F_r = A_r` and
//! `c = b`. Free variables become a diagonal block of split pairs
//! `(x+, x-)`; `<=` rows receive a slack in a second diagonal block. Two
//! comment lines record which blocks those are so the import is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::problem::{BlockEntry, Constraint, Objective, Relation, SdpProblem};
use crate::error::{Error, Result};

const FREE_TAG: &str = "* gamecert free-split block";
const SLACK_TAG: &str = "* gamecert slack block";

type Key = (usize, usize, usize, usize);

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders `problem` in SDPA sparse format.
pub fn to_sdpa_string(problem: &SdpProblem) -> Result<String> {
    problem.validate()?;
    let m = problem.constraints.len();
    let le_rows: Vec<usize> = (0..m)
        .filter(|&r| problem.constraints[r].relation == Relation::Le)
        .collect();
    let mut block_struct: Vec<i64> = problem.block_dims.iter().map(|&d| d as i64).collect();
    let free_block = (problem.n_free > 0).then(|| {
        block_struct.push(-2 * problem.n_free as i64);
        block_struct.len()
    });
    let slack_block = (!le_rows.is_empty()).then(|| {
        block_struct.push(-(le_rows.len() as i64));
        block_struct.len()
    });

    // (matno, blkno, i, j), 1-based, summed
    let mut body: BTreeMap<Key, f64> = BTreeMap::new();
    let push_entries =
        |body: &mut BTreeMap<Key, f64>, matno: usize, entries: &[BlockEntry], sign: f64| {
            for e in entries {
                *body
                    .entry((matno, e.block + 1, e.i + 1, e.j + 1))
                    .or_default() += sign * e.value;
            }
        };
    let push_free =
        |body: &mut BTreeMap<Key, f64>, matno: usize, free: &[(usize, f64)], sign: f64| {
            if let Some(blk) = free_block {
                for &(k, v) in free {
                    *body.entry((matno, blk, 2 * k + 1, 2 * k + 1)).or_default() += sign * v;
                    *body.entry((matno, blk, 2 * k + 2, 2 * k + 2)).or_default() -= sign * v;
                }
            }
        };
    push_entries(&mut body, 0, &problem.objective.entries, -1.0);
    push_free(&mut body, 0, &problem.objective.free, -1.0);
    for (r, con) in problem.constraints.iter().enumerate() {
        push_entries(&mut body, r + 1, &con.entries, 1.0);
        push_free(&mut body, r + 1, &con.free, 1.0);
    }
    if let Some(blk) = slack_block {
        for (k, &r) in le_rows.iter().enumerate() {
            body.insert((r + 1, blk, k + 1, k + 1), 1.0);
        }
    }

    let mut out = String::new();
    if let Some(blk) = free_block {
        writeln!(out, "{FREE_TAG} {blk} count {}", problem.n_free).unwrap();
    }
    if let Some(blk) = slack_block {
        let rows: Vec<String> = le_rows.iter().map(|r| (r + 1).to_string()).collect();
        writeln!(out, "{SLACK_TAG} {blk} rows {}", rows.join(" ")).unwrap();
    }
    writeln!(out, "{m}").unwrap();
    writeln!(out, "{}", block_struct.len()).unwrap();
    let dims: Vec<String> = block_struct.iter().map(i64::to_string).collect();
    writeln!(out, "{}", dims.join(" ")).unwrap();
    let rhs: Vec<String> = problem
        .constraints
        .iter()
        .map(|c| fmt_value(c.rhs))
        .collect();
    writeln!(out, "{}", rhs.join(" ")).unwrap();
    for ((matno, blk, i, j), v) in body {
        if v != 0.0 {
            writeln!(out, "{matno} {blk} {i} {j} {}", fmt_value(v)).unwrap();
        }
    }
    Ok(out)
}

pub fn export_sdpa(problem: &SdpProblem, path: &Path) -> Result<()> {
    std::fs::write(path, to_sdpa_string(problem)?)?;
    Ok(())
}

pub fn import_sdpa(path: &Path) -> Result<SdpProblem> {
    parse_sdpa(&std::fs::read_to_string(path)?)
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::SdpaParse {
        line,
        msg: msg.into(),
    }
}

/// Splits a header line into numeric tokens, ignoring SDPA's optional
/// punctuation `{ } ( ) ,`.
fn tokens(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c.is_whitespace() || "{}(),".contains(c))
        .filter(|t| !t.is_empty())
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| perr(line, format!("expected {what}, found '{tok}'")))
}

enum Target {
    Block(usize),
    /// Diagonal block expanded into consecutive 1x1 blocks starting here.
    Diagonal(usize),
    Free,
    Slack,
}

pub fn parse_sdpa(text: &str) -> Result<SdpProblem> {
    let mut free_tag: Option<(usize, usize)> = None;
    let mut slack_tag: Option<(usize, Vec<usize>)> = None;
    // header tokens are collected across lines until the rhs vector is complete
    let mut header: Vec<(usize, String)> = Vec::new();
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l)).peekable();
    while let Some(&(no, line)) = lines.peek() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix(FREE_TAG) {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 || parts[1] != "count" {
                return Err(perr(no, "malformed free-split marker"));
            }
            free_tag = Some((
                parse_num(parts[0], no, "block number")?,
                parse_num(parts[2], no, "count")?,
            ));
        } else if let Some(rest) = t.strip_prefix(SLACK_TAG) {
            let mut parts = rest.split_whitespace();
            let blk = parse_num(parts.next().unwrap_or(""), no, "block number")?;
            if parts.next() != Some("rows") {
                return Err(perr(no, "malformed slack marker"));
            }
            let rows = parts
                .map(|p| parse_num(p, no, "row number"))
                .collect::<Result<Vec<usize>>>()?;
            slack_tag = Some((blk, rows));
        } else if !(t.starts_with('*') || t.starts_with('"') || t.is_empty()) {
            break;
        }
        lines.next();
    }

    let mut next_header =
        |what: &str, header: &mut Vec<(usize, String)>| -> Result<(usize, String)> {
            loop {
                if !header.is_empty() {
                    return Ok(header.remove(0));
                }
                let (no, line) = lines.next().ok_or_else(|| {
                    perr(
                        text.lines().count(),
                        format!("unexpected end of file reading {what}"),
                    )
                })?;
                header.extend(tokens(line).map(|t| (no, t.to_string())));
            }
        };
    let (no, tok) = next_header("constraint count", &mut header)?;
    let m: usize = parse_num(&tok, no, "constraint count")?;
    let (no, tok) = next_header("block count", &mut header)?;
    let nblocks: usize = parse_num(&tok, no, "block count")?;
    let mut structure = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let (no, tok) = next_header("block sizes", &mut header)?;
        let d: i64 = parse_num(&tok, no, "block size")?;
        if d == 0 {
            return Err(perr(no, "block size 0"));
        }
        structure.push(d);
    }
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        let (no, tok) = next_header("right-hand side", &mut header)?;
        rhs.push(parse_num::<f64>(&tok, no, "right-hand side value")?);
    }
    if let Some((no, tok)) = header.first() {
        return Err(perr(*no, format!("unexpected token '{tok}' after header")));
    }

    let mut block_dims = Vec::new();
    let mut targets = Vec::with_capacity(nblocks);
    let mut n_free = 0;
    let mut slack_rows = Vec::new();
    for (k, &d) in structure.iter().enumerate() {
        let blkno = k + 1;
        if free_tag.map(|f| f.0) == Some(blkno) {
            let count = free_tag.unwrap().1;
            if d != -2 * count as i64 {
                return Err(perr(
                    0,
                    format!(
                        "free-split block {blkno} has size {d}, expected {}",
                        -2 * count as i64
                    ),
                ));
            }
            n_free = count;
            targets.push(Target::Free);
        } else if slack_tag.as_ref().map(|s| s.0) == Some(blkno) {
            let rows = &slack_tag.as_ref().unwrap().1;
            if d != -(rows.len() as i64) {
                return Err(perr(
                    0,
                    format!(
                        "slack block {blkno} has size {d}, expected {}",
                        -(rows.len() as i64)
                    ),
                ));
            }
            slack_rows = rows.clone();
            targets.push(Target::Slack);
        } else if d > 0 {
            targets.push(Target::Block(block_dims.len()));
            block_dims.push(d as usize);
        } else {
            targets.push(Target::Diagonal(block_dims.len()));
            block_dims.extend(std::iter::repeat(1).take((-d) as usize));
        }
    }

    let mut objective: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut obj_free: BTreeMap<usize, f64> = BTreeMap::new();
    let mut rows: Vec<BTreeMap<(usize, usize, usize), f64>> = vec![BTreeMap::new(); m];
    let mut rows_free: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); m];
    let mut minus_parts: BTreeMap<(usize, usize), (usize, f64)> = BTreeMap::new();
    for (no, line) in lines {
        let t = line.trim();
        if t.is_empty() || t.starts_with('*') || t.starts_with('"') {
            continue;
        }
        let parts: Vec<&str> = tokens(t).collect();
        if parts.len() != 5 {
            return Err(perr(
                no,
                format!("expected 5 fields, found {}", parts.len()),
            ));
        }
        let matno: usize = parse_num(parts[0], no, "matrix number")?;
        let blkno: usize = parse_num(parts[1], no, "block number")?;
        let mut i: usize = parse_num(parts[2], no, "row index")?;
        let mut j: usize = parse_num(parts[3], no, "column index")?;
        let v: f64 = parse_num(parts[4], no, "value")?;
        if !v.is_finite() {
            return Err(perr(no, "non-finite value"));
        }
        if matno > m {
            return Err(perr(no, format!("matrix number {matno} exceeds {m}")));
        }
        if blkno == 0 || blkno > nblocks {
            return Err(perr(no, format!("block number {blkno} out of range")));
        }
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        let size = structure[blkno - 1].unsigned_abs() as usize;
        if i == 0 || j > size {
            return Err(perr(
                no,
                format!("index ({i}, {j}) outside block {blkno} of size {size}"),
            ));
        }
        let diagonal = structure[blkno - 1] < 0;
        if diagonal && i != j {
            return Err(perr(no, "off-diagonal entry in a diagonal block"));
        }
        // objective is stored negated
        let sign = if matno == 0 { -1.0 } else { 1.0 };
        match targets[blkno - 1] {
            Target::Block(b) => {
                let dest = if matno == 0 {
                    &mut objective
                } else {
                    &mut rows[matno - 1]
                };
                *dest.entry((b, i - 1, j - 1)).or_default() += sign * v;
            }
            Target::Diagonal(first) => {
                let dest = if matno == 0 {
                    &mut objective
                } else {
                    &mut rows[matno - 1]
                };
                *dest.entry((first + i - 1, 0, 0)).or_default() += sign * v;
            }
            Target::Free => {
                let k = (i - 1) / 2;
                if (i - 1) % 2 == 0 {
                    let dest = if matno == 0 {
                        &mut obj_free
                    } else {
                        &mut rows_free[matno - 1]
                    };
                    *dest.entry(k).or_default() += sign * v;
                } else {
                    let e = minus_parts.entry((matno, k)).or_insert((no, 0.0));
                    e.1 += sign * v;
                }
            }
            Target::Slack => {
                let expected = slack_rows.get(i - 1).copied();
                if expected != Some(matno) || v != 1.0 {
                    return Err(perr(no, "slack entry does not match the slack marker"));
                }
            }
        }
    }
    // each split pair must carry opposite coefficients
    for (&(matno, k), &(no, minus)) in &minus_parts {
        let plus = if matno == 0 {
            obj_free.get(&k)
        } else {
            rows_free[matno - 1].get(&k)
        }
        .copied()
        .unwrap_or(0.0);
        if plus != -minus {
            return Err(perr(
                no,
                format!("free variable {} split pair is not antisymmetric", k + 1),
            ));
        }
    }

    let to_entries = |map: BTreeMap<(usize, usize, usize), f64>| -> Vec<BlockEntry> {
        map.into_iter()
            .filter(|&(_, v)| v != 0.0)
            .map(|((block, i, j), value)| BlockEntry { block, i, j, value })
            .collect()
    };
    let to_free = |map: BTreeMap<usize, f64>| -> Vec<(usize, f64)> {
        map.into_iter().filter(|&(_, v)| v != 0.0).collect()
    };
    let constraints = rows
        .into_iter()
        .zip(rows_free)
        .zip(rhs)
        .enumerate()
        .map(|(r, ((ents, free), rhs))| Constraint {
            entries: to_entries(ents),
            free: to_free(free),
            rhs,
            relation: if slack_rows.contains(&(r + 1)) {
                Relation::Le
            } else {
                Relation::Eq
            },
        })
        .collect();
    let problem = SdpProblem {
        block_dims,
        n_free,
        objective: Objective {
            entries: to_entries(objective),
            free: to_free(obj_free),
        },
        constraints,
    };
    problem.validate()?;
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(block: usize, i: usize, j: usize, value: f64) -> BlockEntry {
        BlockEntry { block, i, j, value }
    }

    fn min_eig_problem() -> SdpProblem {
        let mut p = SdpProblem::new(vec![2], 0);
        p.objective.entries = vec![e(0, 0, 0, 1.0), e(0, 1, 1, 2.0)];
        p.constraints.push(Constraint::eq(
            vec![e(0, 0, 0, 1.0), e(0, 1, 1, 1.0)],
            vec![],
            1.0,
        ));
        p
    }

    #[test]
    fn min_eigenvalue_export() {
        let p = min_eig_problem();
        let s = to_sdpa_string(&p).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(&lines[..4], &["1", "1", "2", "1.0000000000000000e0"]);
        assert_eq!(
            &lines[4..],
            &[
                "0 1 1 1 -1.0000000000000000e0",
                "0 1 2 2 -2.0000000000000000e0",
                "1 1 1 1 1.0000000000000000e0",
                "1 1 2 2 1.0000000000000000e0",
            ]
        );
        assert_eq!(parse_sdpa(&s).unwrap(), p.canonical());
    }

    #[test]
    fn empty_problem_is_header_only() {
        let p = SdpProblem::new(vec![3], 0);
        let s = to_sdpa_string(&p).unwrap();
        assert_eq!(s, "0\n1\n3\n\n");
        assert_eq!(parse_sdpa(&s).unwrap(), p);
    }

    #[test]
    fn free_and_slack_round_trip() {
        let mut p = SdpProblem::new(vec![2, 1], 2);
        p.objective.free = vec![(0, 1.0), (1, -0.1)];
        p.objective.entries = vec![e(0, 0, 1, 0.25)];
        p.constraints
            .push(Constraint::eq(vec![e(0, 0, 0, 1.0)], vec![(0, -1.0)], 0.3));
        p.constraints.push(Constraint::le(
            vec![e(1, 0, 0, 2.0)],
            vec![(1, 1.0 / 3.0)],
            4.0,
        ));
        p.constraints
            .push(Constraint::le(vec![e(0, 1, 1, -1.0)], vec![], -0.5));
        let s = to_sdpa_string(&p).unwrap();
        assert!(s.starts_with(
            "* gamecert free-split block 3 count 2\n* gamecert slack block 4 rows 2 3\n"
        ));
        let q = parse_sdpa(&s).unwrap();
        assert_eq!(q, p.canonical());
        assert_eq!(to_sdpa_string(&q).unwrap(), s);
    }

    #[test]
    fn plain_sdpa_with_punctuation_and_diagonal_block() {
        let text = "\"a comment\n2\n2\n{2, -2}\n{1.0, 2.0}\n0 1 1 2 -0.5\n1 1 1 1 1\n2 2 2 2 3\n";
        let p = parse_sdpa(text).unwrap();
        assert_eq!(p.block_dims, vec![2, 1, 1]);
        assert_eq!(p.objective.entries, vec![e(0, 0, 1, 0.5)]);
        assert_eq!(p.constraints[1].entries, vec![e(2, 0, 0, 3.0)]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "1\n1\n2\n1.0\n1 1 1 x 1.0\n";
        match parse_sdpa(bad) {
            Err(Error::SdpaParse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        match parse_sdpa("1\n1\n2\n1.0\n1 1 1 3 1.0\n") {
            Err(Error::SdpaParse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_sdpa("1\n"), Err(Error::SdpaParse { .. })));
    }

    #[test]
    fn unwritable_path_errors() {
        let p = min_eig_problem();
        assert!(export_sdpa(&p, Path::new("/nonexistent-dir/x.dat-s")).is_err());
    }
}
