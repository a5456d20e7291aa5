//! Line-oriented text format for grid maps.
//!
//! ```text
//! # comment
//! grid <width> <height> p=<p_success>
//! <height rows of <width> cell codes from S D B X U H>
//! mask <cell-index> <subset of NESW, or - for none>
//! start <cell-index>
//! ```
//!
//! Cells without a mask line get [`GridMap::default_mask`]. The `start`
//! directive is only used when the start cell is also the destination.

use std::fmt::Write as _;

use crate::error::MapError;
use crate::grid::{CellKind, GridMap, MotionNoise, MoveAction, MoveSet};

/// The bundled reference map.
pub const REFERENCE_MAP: &str = include_str!("../maps/reference.map");

pub fn reference_map() -> GridMap {
    parse_map(REFERENCE_MAP).expect("bundled reference map parses")
}

struct Token<'a> {
    column: usize,
    text: &'a str,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push(Token {
                    column: line[..s].chars().count() + 1,
                    text: &line[s..i],
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            column: line[..s].chars().count() + 1,
            text: &line[s..],
        });
    }
    out
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(code, _)| code)
}

fn parse_usize(lineno: usize, tok: &Token<'_>, what: &str) -> Result<usize, MapError> {
    tok.text
        .parse()
        .map_err(|_| MapError::syntax(lineno, tok.column, format!("expected {what}, found `{}`", tok.text)))
}

fn parse_header(lineno: usize, toks: &[Token<'_>]) -> Result<(usize, usize, f64), MapError> {
    let first = toks.first().expect("non-empty line");
    if first.text != "grid" {
        return Err(MapError::syntax(
            lineno,
            first.column,
            format!("expected header `grid <width> <height> p=<p>`, found `{}`", first.text),
        ));
    }
    if toks.len() != 4 {
        let column = toks.get(4).map_or(first.column, |t| t.column);
        return Err(MapError::syntax(
            lineno,
            column,
            "header must read `grid <width> <height> p=<p>`",
        ));
    }
    let width = parse_usize(lineno, &toks[1], "width")?;
    let height = parse_usize(lineno, &toks[2], "height")?;
    let p = toks[3]
        .text
        .strip_prefix("p=")
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| MapError::syntax(lineno, toks[3].column, "expected `p=<probability>`"))?;
    if width == 0 || height == 0 {
        return Err(MapError::syntax(lineno, toks[1].column, "width and height must be positive"));
    }
    Ok((width, height, p))
}

fn parse_row(lineno: usize, toks: &[Token<'_>], width: usize) -> Result<Vec<CellKind>, MapError> {
    // A single run of codes ("SUUD") is accepted as well as spaced codes.
    let codes: Vec<(usize, char)> = if toks.len() == 1 && width > 1 {
        toks[0]
            .text
            .chars()
            .enumerate()
            .map(|(i, c)| (toks[0].column + i, c))
            .collect()
    } else {
        let mut codes = Vec::with_capacity(toks.len());
        for t in toks {
            let mut chars = t.text.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => codes.push((t.column, c)),
                _ => {
                    return Err(MapError::syntax(
                        lineno,
                        t.column,
                        format!("expected a single cell code, found `{}`", t.text),
                    ))
                }
            }
        }
        codes
    };
    if codes.len() != width {
        let column = codes.get(width).map_or(1, |(c, _)| *c);
        return Err(MapError::syntax(
            lineno,
            column,
            format!("expected {width} cells, found {}", codes.len()),
        ));
    }
    codes
        .into_iter()
        .map(|(column, c)| {
            CellKind::from_code(c).ok_or_else(|| {
                MapError::syntax(lineno, column, format!("unknown cell code `{c}` (expected one of S D B X U H)"))
            })
        })
        .collect()
}

fn parse_moves(lineno: usize, tok: &Token<'_>) -> Result<MoveSet, MapError> {
    if tok.text == "-" {
        return Ok(MoveSet::EMPTY);
    }
    let mut set = MoveSet::EMPTY;
    for (i, c) in tok.text.chars().enumerate() {
        let m = MoveAction::from_letter(c).ok_or_else(|| {
            MapError::syntax(lineno, tok.column + i, format!("unknown move `{c}` (expected N, E, S, W or -)"))
        })?;
        set.insert(m);
    }
    Ok(set)
}

/// Parses a map and checks all of its invariants.
pub fn parse_map(text: &str) -> Result<GridMap, MapError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, tokens(strip_comment(l))))
        .filter(|(_, t)| !t.is_empty());

    let Some((lineno, header)) = lines.next() else {
        return Err(MapError::syntax(1, 1, "empty map file"));
    };
    let (width, height, p) = parse_header(lineno, &header)?;

    let mut cells = Vec::with_capacity(width * height);
    for row in 0..height {
        let Some((lineno, toks)) = lines.next() else {
            let last = text.lines().count().max(1);
            return Err(MapError::syntax(last, 1, format!("expected {height} grid rows, found {row}")));
        };
        cells.extend(parse_row(lineno, &toks, width)?);
    }

    let mut explicit: Vec<Option<MoveSet>> = vec![None; width * height];
    let mut start_directive = None;
    for (lineno, toks) in lines {
        let head = &toks[0];
        match head.text {
            "mask" => {
                if toks.len() != 3 {
                    return Err(MapError::syntax(lineno, head.column, "expected `mask <cell-index> <moves>`"));
                }
                let idx = parse_usize(lineno, &toks[1], "cell index")?;
                if idx >= width * height {
                    return Err(MapError::syntax(lineno, toks[1].column, format!("cell index {idx} outside the grid")));
                }
                if explicit[idx].is_some() {
                    return Err(MapError::semantic(format!("cell {idx} has more than one mask line")));
                }
                explicit[idx] = Some(parse_moves(lineno, &toks[2])?);
            }
            "start" => {
                if toks.len() != 2 {
                    return Err(MapError::syntax(lineno, head.column, "expected `start <cell-index>`"));
                }
                if start_directive.is_some() {
                    return Err(MapError::semantic("more than one start directive"));
                }
                start_directive = Some(parse_usize(lineno, &toks[1], "cell index")?);
            }
            other => {
                return Err(MapError::syntax(
                    lineno,
                    head.column,
                    format!("expected `mask` or `start`, found `{other}`"),
                ))
            }
        }
    }

    let start_cell = cells.iter().position(|c| *c == CellKind::Start);
    let start = match (start_cell, start_directive) {
        (Some(_), Some(_)) => {
            return Err(MapError::semantic("start directive given although the map has a start cell"))
        }
        (Some(s), None) | (None, Some(s)) => s,
        (None, None) => return Err(MapError::semantic("no start cell")),
    };
    if start_directive.is_some() && cells.get(start) != Some(&CellKind::Destination) {
        return Err(MapError::semantic("start directive must name the destination cell"));
    }

    let mut map = GridMap {
        width,
        height,
        cells,
        masks: vec![MoveSet::EMPTY; width * height],
        noise: MotionNoise::new(p)?,
        start,
    };
    let masks = explicit
        .iter()
        .enumerate()
        .map(|(idx, m)| m.unwrap_or_else(|| map.default_mask(idx)))
        .collect();
    map.masks = masks;
    map.validate()?;
    Ok(map)
}

/// Writes a map in the text format; mask lines are emitted only where the
/// mask differs from the default.
pub fn serialize_map(map: &GridMap) -> String {
    let mut out = String::new();
    writeln!(out, "grid {} {} p={}", map.width, map.height, map.noise.p_success).unwrap();
    for row in map.cells.chunks(map.width) {
        let line: Vec<String> = row.iter().map(|c| c.code().to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    for idx in 0..map.len() {
        if map.masks[idx] != map.default_mask(idx) {
            writeln!(out, "mask {idx} {}", map.masks[idx].letters()).unwrap();
        }
    }
    if map.cells.get(map.start) == Some(&CellKind::Destination) {
        writeln!(out, "start {}", map.start).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_map() {
        let map = parse_map("grid 2 1 p=0.9\nS D\nmask 0 E\n").unwrap();
        assert_eq!(map.cells, vec![CellKind::Start, CellKind::Destination]);
        assert_eq!(map.masks[0].letters(), "E");
        assert_eq!(map.start, 0);
    }

    #[test]
    fn compact_rows_and_comments() {
        let map = parse_map("# tiny\ngrid 3 1 p=1 # header\nSUD\n").unwrap();
        assert_eq!(map.cells[1], CellKind::UrbanRoad);
    }

    #[test]
    fn mask_into_building_is_semantic_error() {
        let err = parse_map("grid 3 1 p=1\nS B D\nmask 0 E\n").unwrap_err();
        assert!(matches!(err, MapError::Semantic(ref m) if m.contains("building")), "{err}");
    }

    #[test]
    fn two_starts_is_semantic_error() {
        let err = parse_map("grid 3 1 p=1\nS S D\n").unwrap_err();
        assert!(matches!(err, MapError::Semantic(ref m) if m.contains("start")), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_map("grid 3 1 p=1\nS Q D\n").unwrap_err();
        assert_eq!(err, MapError::syntax(2, 3, "unknown cell code `Q` (expected one of S D B X U H)"));

        let err = parse_map("grid 3 x p=1\n").unwrap_err();
        assert!(matches!(err, MapError::Syntax { line: 1, column: 8, .. }), "{err}");

        let err = parse_map("grid 2 1 p=1\nS D\nmask 0 EQ\n").unwrap_err();
        assert!(matches!(err, MapError::Syntax { line: 3, column: 9, .. }), "{err}");

        let err = parse_map("grid 2 2 p=1\nS D\n").unwrap_err();
        assert!(matches!(err, MapError::Syntax { .. }), "{err}");
    }

    #[test]
    fn mask_off_grid_rejected() {
        assert!(parse_map("grid 2 1 p=1\nS D\nmask 0 N\n").is_err());
    }

    #[test]
    fn destination_must_be_absorbing() {
        assert!(parse_map("grid 2 1 p=1\nS D\nmask 1 W\n").is_err());
    }

    #[test]
    fn noise_out_of_range_rejected() {
        assert!(parse_map("grid 2 1 p=0\nS D\n").is_err());
        assert!(parse_map("grid 2 1 p=1.5\nS D\n").is_err());
    }

    #[test]
    fn start_directive_on_destination() {
        let map = parse_map("grid 1 1 p=1\nD\nstart 0\n").unwrap();
        assert_eq!(map.start, 0);
        assert_eq!(parse_map(&serialize_map(&map)).unwrap(), map);
        assert!(parse_map("grid 2 1 p=1\nU D\nstart 0\n").is_err());
    }

    #[test]
    fn reference_map_round_trips() {
        let map = reference_map();
        assert_eq!((map.width, map.height), (5, 5));
        assert_eq!(parse_map(&serialize_map(&map)).unwrap(), map);
    }
}
