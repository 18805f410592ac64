use std::collections::{BTreeMap, HashSet};

use super::bound::parse_bound;
use super::{
    BoundExpr, DirectiveKind, DirectiveSpec, Kernel, LineSpan, LoopHeader, ParseError,
    ParseErrorKind,
};

fn err(line: usize, col: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, col, kind }
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    err(line, col, ParseErrorKind::Syntax(msg.into()))
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// 1-based column of the first non-blank character.
fn indent_col(raw: &str) -> usize {
    raw.len() - raw.trim_start().len() + 1
}

/// Drops a trailing `! comment` from a statement line.
fn strip_comment(s: &str) -> &str {
    match s.find('!') {
        Some(i) => s[..i].trim_end(),
        None => s,
    }
}

fn describe(d: &DirectiveSpec) -> String {
    format!(
        "{} region (lines {}-{})",
        d.kind, d.region.start, d.region.end
    )
}

/// Checks that directive regions form a forest: any two regions are either
/// disjoint or one contains the other.
pub fn validate_region_nesting(directives: &[DirectiveSpec]) -> Result<(), ParseError> {
    for (i, a) in directives.iter().enumerate() {
        for b in &directives[i + 1..] {
            if a.region.disjoint(&b.region)
                || a.region.contains(&b.region)
                || b.region.contains(&a.region)
            {
                continue;
            }
            let (first, second) = if a.region.start <= b.region.start {
                (a, b)
            } else {
                (b, a)
            };
            return Err(err(
                second.region.start,
                1,
                ParseErrorKind::OverlappingRegions {
                    first: describe(first),
                    second: describe(second),
                },
            ));
        }
    }
    Ok(())
}

#[derive(Debug)]
enum OatLine {
    Start(DirectiveKind, Vec<usize>),
    End(DirectiveKind),
}

fn parse_oat(line_no: usize, raw: &str) -> Result<OatLine, ParseError> {
    let col = indent_col(raw);
    let text = raw.trim();
    let rest = text[5..].trim_start();
    let lower = rest.to_ascii_lowercase();
    let Some(after_install) = lower.strip_prefix("install") else {
        return Err(syntax(line_no, col, "expected 'install' after '!oat$'"));
    };
    let after_install = after_install.trim_start();
    let (kind, after_kind) = if let Some(r) = after_install.strip_prefix("exchange") {
        (DirectiveKind::Exchange, r)
    } else if let Some(r) = after_install.strip_prefix("loopfusion") {
        (DirectiveKind::LoopFusion, r)
    } else {
        return Err(err(
            line_no,
            col,
            ParseErrorKind::InvalidDirective(format!(
                "unknown construct in '{}' (expected Exchange or LoopFusion)",
                text
            )),
        ));
    };
    let mut after_kind = after_kind.trim_start();
    let mut depths = Vec::new();
    if let Some(inner) = after_kind.strip_prefix('(') {
        let Some(close) = inner.find(')') else {
            return Err(syntax(line_no, col, "unclosed depth list"));
        };
        let list = &inner[..close];
        if kind == DirectiveKind::LoopFusion && !list.trim().is_empty() {
            return Err(err(
                line_no,
                col,
                ParseErrorKind::InvalidDirective("LoopFusion takes no depth list".into()),
            ));
        }
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let depth: usize = item.parse().map_err(|_| {
                err(
                    line_no,
                    col,
                    ParseErrorKind::InvalidDirective(format!("'{item}' is not a loop depth")),
                )
            })?;
            if depth == 0 {
                return Err(err(
                    line_no,
                    col,
                    ParseErrorKind::InvalidDirective("loop depths start at 1".into()),
                ));
            }
            if depths.contains(&depth) {
                return Err(err(
                    line_no,
                    col,
                    ParseErrorKind::InvalidDirective(format!("depth {depth} listed twice")),
                ));
            }
            depths.push(depth);
        }
        after_kind = inner[close + 1..].trim_start();
    }
    let words: Vec<&str> = after_kind.split_whitespace().collect();
    match words.as_slice() {
        ["region", "start"] => Ok(OatLine::Start(kind, depths)),
        ["region", "end"] => Ok(OatLine::End(kind)),
        _ => Err(syntax(
            line_no,
            col,
            "expected 'region start' or 'region end'",
        )),
    }
}

#[derive(Debug, PartialEq)]
enum OmpLine {
    ParallelDo,
    EndParallelDo,
}

fn parse_omp(line_no: usize, raw: &str) -> Result<OmpLine, ParseError> {
    let lower = raw.trim()[5..].trim().to_ascii_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| c.is_whitespace() || c == '(')
        .filter(|w| !w.is_empty())
        .collect();
    match words.as_slice() {
        ["parallel", "do", ..] => Ok(OmpLine::ParallelDo),
        ["end", "parallel", "do"] => Ok(OmpLine::EndParallelDo),
        _ => Err(err(
            line_no,
            indent_col(raw),
            ParseErrorKind::InvalidDirective(format!(
                "only '!$omp parallel do' is supported, found '{}'",
                raw.trim()
            )),
        )),
    }
}

struct OpenRegion {
    kind: DirectiveKind,
    depths: Vec<usize>,
    start: usize,
}

struct HeaderSrc {
    line: usize,
    col: usize,
    header: LoopHeader,
}

fn parse_do(line_no: usize, raw: &str, depth: usize) -> Result<HeaderSrc, ParseError> {
    let col = indent_col(raw);
    let stmt = strip_comment(raw.trim());
    // "do" already matched case-insensitively by the caller
    let rest = stmt[2..].trim_start();
    let Some(eq) = rest.find('=') else {
        return Err(syntax(line_no, col, "expected '=' in do statement"));
    };
    let index = rest[..eq].trim().to_ascii_lowercase();
    if !is_ident(&index) {
        return Err(syntax(
            line_no,
            col,
            format!("invalid loop index '{index}'"),
        ));
    }
    let range = &rest[eq + 1..];
    let parts: Vec<&str> = split_top_level_commas(range);
    if parts.len() != 2 {
        return Err(syntax(
            line_no,
            col,
            "expected 'do <index> = <lower>, <upper>' (steps are not supported)",
        ));
    }
    let range_col = col + (stmt.len() - range.len());
    let lower = parse_bound(parts[0]).map_err(|e| syntax(line_no, range_col + e.col, e.message))?;
    let upper = parse_bound(parts[1])
        .map_err(|e| syntax(line_no, range_col + parts[0].len() + 1 + e.col, e.message))?;
    Ok(HeaderSrc {
        line: line_no,
        col,
        header: LoopHeader {
            index,
            lower,
            upper,
            depth,
        },
    })
}

fn split_top_level_commas(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// Counts `enddo` / `end do` closers on a line; `None` if the line is not
/// made only of closers.
fn count_enddos(stmt: &str) -> Option<usize> {
    let lower = stmt.to_ascii_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let mut i = 0;
    let mut n = 0;
    while i < words.len() {
        if words[i] == "enddo" {
            i += 1;
        } else if words[i] == "end" && words.get(i + 1) == Some(&"do") {
            i += 2;
        } else {
            return None;
        }
        n += 1;
    }
    (n > 0).then_some(n)
}

fn dedent(lines: &[String]) -> Vec<String> {
    let common = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    lines
        .iter()
        .map(|l| {
            if l.trim().is_empty() {
                String::new()
            } else {
                l[common..].trim_end().to_string()
            }
        })
        .collect()
}

fn starts_with_word(s: &str, word: &str) -> bool {
    s.len() >= word.len()
        && s[..word.len()].eq_ignore_ascii_case(word)
        && s[word.len()..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_ascii_alphanumeric() && c != '_')
}

/// Parses a kernel file into a validated [`Kernel`].
pub fn parse_kernel(source: &str) -> Result<Kernel, ParseError> {
    let lines: Vec<&str> = source.lines().collect();
    let mut i = 0;

    let mut name: Option<String> = None;
    let mut params: Vec<(String, i64)> = Vec::new();
    let mut reads: Vec<String> = Vec::new();
    let mut writes: Vec<String> = Vec::new();

    // preamble
    while i < lines.len() {
        let raw = lines[i];
        let line_no = i + 1;
        let t = raw.trim();
        let col = indent_col(raw);
        if t.is_empty() || (t.starts_with('!') && !is_directive(t)) {
            i += 1;
            continue;
        }
        let stmt = strip_comment(t);
        let mut words = stmt.split_whitespace();
        let head = words.next().unwrap_or("").to_ascii_lowercase();
        match head.as_str() {
            "kernel" => {
                if name.is_some() {
                    return Err(syntax(line_no, col, "duplicate 'kernel' line"));
                }
                let n = words
                    .next()
                    .map(str::to_ascii_lowercase)
                    .unwrap_or_default();
                if !is_ident(&n) || words.next().is_some() {
                    return Err(syntax(line_no, col, "expected 'kernel <name>'"));
                }
                name = Some(n);
            }
            "param" | "body_arrays" | "body_reads" | "body_writes" if name.is_none() => {
                return Err(syntax(
                    line_no,
                    col,
                    "the first line must be 'kernel <name>'",
                ));
            }
            "param" => {
                let rest = stmt[5..].trim();
                let Some((lhs, rhs)) = rest.split_once('=') else {
                    return Err(syntax(line_no, col, "expected 'param <ident> = <int>'"));
                };
                let ident = lhs.trim().to_ascii_lowercase();
                if !is_ident(&ident) {
                    return Err(syntax(
                        line_no,
                        col,
                        format!("invalid parameter name '{ident}'"),
                    ));
                }
                let value: i64 = rhs.trim().parse().map_err(|_| {
                    syntax(
                        line_no,
                        col,
                        format!("parameter value '{}' is not an integer", rhs.trim()),
                    )
                })?;
                if params.iter().any(|(p, _)| *p == ident) {
                    return Err(syntax(
                        line_no,
                        col,
                        format!("parameter '{ident}' bound twice"),
                    ));
                }
                params.push((ident, value));
            }
            "body_arrays" | "body_reads" | "body_writes" => {
                let names: Vec<String> = words.map(str::to_ascii_lowercase).collect();
                if let Some(bad) = names.iter().find(|n| !is_ident(n)) {
                    return Err(syntax(line_no, col, format!("invalid array name '{bad}'")));
                }
                let targets: &mut [&mut Vec<String>] = match head.as_str() {
                    "body_arrays" => &mut [&mut reads, &mut writes],
                    "body_reads" => &mut [&mut reads],
                    _ => &mut [&mut writes],
                };
                for t in targets.iter_mut() {
                    for n in &names {
                        if !t.contains(n) {
                            t.push(n.clone());
                        }
                    }
                }
            }
            _ => {
                if name.is_none() {
                    return Err(syntax(
                        line_no,
                        col,
                        "the first line must be 'kernel <name>'",
                    ));
                }
                break;
            }
        }
        i += 1;
    }
    let Some(name) = name else {
        return Err(syntax(
            lines.len().max(1),
            1,
            "missing 'kernel <name>' line",
        ));
    };

    // nest
    let mut headers: Vec<HeaderSrc> = Vec::new();
    let mut open_depth = 0usize;
    let mut body: Option<Vec<String>> = None;
    let mut open_regions: Vec<OpenRegion> = Vec::new();
    let mut directives: Vec<DirectiveSpec> = Vec::new();
    let mut omp_pending: Option<usize> = None;
    let mut parallel_depth: Option<usize> = None;
    let mut omp_open = false;
    let mut omp_line = 0usize;
    let mut last_line = 0usize;
    let mut nest_done = false;

    while i < lines.len() {
        let raw = lines[i];
        let line_no = i + 1;
        let t = raw.trim();
        let col = indent_col(raw);
        i += 1;
        if t.is_empty() {
            continue;
        }
        last_line = line_no;
        let lower = t.to_ascii_lowercase();
        if lower.starts_with("!oat$") {
            match parse_oat(line_no, raw)? {
                OatLine::Start(kind, depths) => {
                    if !headers.is_empty() {
                        return Err(err(
                            line_no,
                            col,
                            ParseErrorKind::InvalidDirective(
                                "directive regions must enclose the whole loop nest".into(),
                            ),
                        ));
                    }
                    if open_regions.iter().any(|r| r.kind == kind)
                        || directives.iter().any(|d| d.kind == kind)
                    {
                        return Err(err(
                            line_no,
                            col,
                            ParseErrorKind::InvalidDirective(format!(
                                "more than one {kind} region"
                            )),
                        ));
                    }
                    open_regions.push(OpenRegion {
                        kind,
                        depths,
                        start: line_no,
                    });
                }
                OatLine::End(kind) => {
                    let Some(pos) = open_regions.iter().rposition(|r| r.kind == kind) else {
                        return Err(syntax(
                            line_no,
                            col,
                            format!("{kind} region end without matching start"),
                        ));
                    };
                    if !nest_done {
                        return Err(err(
                            line_no,
                            col,
                            ParseErrorKind::InvalidDirective(
                                "directive regions must enclose the whole loop nest".into(),
                            ),
                        ));
                    }
                    let r = open_regions.remove(pos);
                    directives.push(DirectiveSpec {
                        kind: r.kind,
                        depths: r.depths,
                        region: LineSpan {
                            start: r.start,
                            end: line_no,
                        },
                        loops: (1, 0),
                    });
                }
            }
            continue;
        }
        if lower.starts_with("!$omp") {
            match parse_omp(line_no, raw)? {
                OmpLine::ParallelDo => {
                    if parallel_depth.is_some() || omp_pending.is_some() {
                        return Err(err(
                            line_no,
                            col,
                            ParseErrorKind::InvalidDirective(
                                "only one OpenMP directive is accepted inside the tuned loop"
                                    .into(),
                            ),
                        ));
                    }
                    if body.is_some() {
                        return Err(err(
                            line_no,
                            col,
                            ParseErrorKind::InvalidDirective(
                                "'!$omp parallel do' must precede a do statement".into(),
                            ),
                        ));
                    }
                    omp_pending = Some(line_no);
                    omp_line = line_no;
                }
                OmpLine::EndParallelDo => {
                    let ok = omp_open && parallel_depth == Some(open_depth + 1) && body.is_some();
                    if !ok {
                        return Err(err(
                            line_no,
                            col,
                            ParseErrorKind::InvalidDirective(
                                "'!$omp end parallel do' must directly follow the enddo of the parallel loop"
                                    .into(),
                            ),
                        ));
                    }
                    omp_open = false;
                }
            }
            continue;
        }
        if t.starts_with('!') {
            continue;
        }
        if nest_done {
            return Err(err(
                line_no,
                col,
                ParseErrorKind::ImperfectNest("statement after the loop nest was closed".into()),
            ));
        }
        let stmt = strip_comment(t);
        if lower == "begin body" {
            if headers.is_empty() || open_depth != headers.len() {
                return Err(err(
                    line_no,
                    col,
                    ParseErrorKind::ImperfectNest("body must sit inside the innermost loop".into()),
                ));
            }
            if body.is_some() {
                return Err(err(
                    line_no,
                    col,
                    ParseErrorKind::ImperfectNest("more than one body".into()),
                ));
            }
            let mut collected = Vec::new();
            loop {
                if i >= lines.len() {
                    return Err(syntax(line_no, col, "'begin body' without 'end body'"));
                }
                let l = lines[i];
                i += 1;
                if l.trim().eq_ignore_ascii_case("end body") {
                    last_line = i;
                    break;
                }
                collected.push(l.to_string());
            }
            body = Some(dedent(&collected));
            continue;
        }
        if starts_with_word(stmt, "do") {
            if body.is_some() {
                return Err(err(
                    line_no,
                    col,
                    ParseErrorKind::ImperfectNest(
                        "loop after the body; every level must hold exactly one loop or the body"
                            .into(),
                    ),
                ));
            }
            if open_depth != headers.len() {
                return Err(err(
                    line_no,
                    col,
                    ParseErrorKind::ImperfectNest("sibling loops are not allowed".into()),
                ));
            }
            let h = parse_do(line_no, raw, open_depth + 1)?;
            if let Some(prev) = headers.iter().find(|p| p.header.index == h.header.index) {
                return Err(err(
                    line_no,
                    col,
                    ParseErrorKind::DuplicateIndex(format!(
                        "{} (first declared on line {})",
                        h.header.index, prev.line
                    )),
                ));
            }
            if omp_pending.take().is_some() {
                parallel_depth = Some(open_depth + 1);
                omp_open = true;
            }
            headers.push(h);
            open_depth += 1;
            continue;
        }
        if omp_pending.is_some() {
            return Err(err(
                omp_line,
                1,
                ParseErrorKind::InvalidDirective(
                    "'!$omp parallel do' must precede a do statement".into(),
                ),
            ));
        }
        if let Some(n) = count_enddos(stmt) {
            if n > open_depth {
                return Err(syntax(line_no, col, "enddo without matching do"));
            }
            if body.is_none() {
                return Err(err(
                    line_no,
                    col,
                    ParseErrorKind::ImperfectNest("loop closed before any body".into()),
                ));
            }
            for _ in 0..n {
                open_depth -= 1;
                // once the parallel loop is closed, its end directive must come next
                if omp_open && parallel_depth.is_some_and(|p| open_depth + 1 < p) {
                    return Err(err(
                        line_no,
                        col,
                        ParseErrorKind::InvalidDirective(
                            "'!$omp end parallel do' must directly follow the enddo of the parallel loop"
                                .into(),
                        ),
                    ));
                }
            }
            if open_depth == 0 {
                nest_done = true;
            }
            continue;
        }
        return Err(syntax(
            line_no,
            col,
            format!("unexpected statement '{stmt}' outside the body"),
        ));
    }

    let end_line = last_line.max(1);
    if headers.is_empty() {
        return Err(syntax(end_line, 1, "no loop nest found"));
    }
    if body.is_none() {
        return Err(err(
            end_line,
            1,
            ParseErrorKind::ImperfectNest("missing 'begin body' / 'end body' block".into()),
        ));
    }
    if open_depth != 0 {
        return Err(syntax(
            end_line,
            1,
            format!("{open_depth} loop(s) not closed"),
        ));
    }
    if omp_open {
        return Err(syntax(
            end_line,
            1,
            "'!$omp parallel do' without '!$omp end parallel do'",
        ));
    }
    if let Some(r) = open_regions.first() {
        return Err(syntax(
            r.start,
            1,
            format!("{} region start without matching end", r.kind),
        ));
    }

    let depth = headers.len();
    let param_map: BTreeMap<String, i64> = params.iter().cloned().collect();
    let indices: HashSet<&str> = headers.iter().map(|h| h.header.index.as_str()).collect();
    for h in &headers {
        if param_map.contains_key(&h.header.index) {
            return Err(err(
                h.line,
                h.col,
                ParseErrorKind::DuplicateIndex(format!(
                    "{} (also bound as a parameter)",
                    h.header.index
                )),
            ));
        }
        for b in [&h.header.lower, &h.header.upper] {
            check_bound(b, h, &indices, &param_map)?;
        }
    }

    for d in &mut directives {
        d.loops = (1, depth);
        if let Some(&bad) = d.depths.iter().find(|&&x| x > depth) {
            return Err(err(
                d.region.start,
                1,
                ParseErrorKind::InvalidDirective(format!(
                    "Exchange depth {bad} exceeds nest depth {depth}"
                )),
            ));
        }
    }
    directives.sort_by_key(|d| (d.region.start, std::cmp::Reverse(d.region.end)));
    validate_region_nesting(&directives)?;

    Ok(Kernel {
        name,
        params,
        nest: headers.into_iter().map(|h| h.header).collect(),
        body: body.unwrap_or_default(),
        body_reads: reads,
        body_writes: writes,
        directives,
        parallel_depth,
    })
}

fn check_bound(
    b: &BoundExpr,
    h: &HeaderSrc,
    indices: &HashSet<&str>,
    params: &BTreeMap<String, i64>,
) -> Result<(), ParseError> {
    let Some(sym) = b.symbol_name() else {
        return Ok(());
    };
    if indices.contains(sym) {
        return Err(err(
            h.line,
            h.col,
            ParseErrorKind::NonRectangular {
                index: h.header.index.clone(),
                referenced: sym.to_string(),
            },
        ));
    }
    if !params.contains_key(sym) {
        return Err(err(
            h.line,
            h.col,
            ParseErrorKind::UnboundParameter(sym.to_string()),
        ));
    }
    if b.eval(params).is_none() {
        return Err(syntax(h.line, h.col, "bound value overflows"));
    }
    Ok(())
}

fn is_directive(t: &str) -> bool {
    let l = t.to_ascii_lowercase();
    l.starts_with("!oat$") || l.starts_with("!$omp")
}
