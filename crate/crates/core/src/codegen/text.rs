//! Line wrapping and normalization of emitted Fortran text.

/// Maximum emitted line width, continuation marker included.
pub const LINE_WIDTH: usize = 72;

/// Splits `line` into free-form continuation lines no wider than
/// [`LINE_WIDTH`]. Breaks are placed after `*`, `,` or a space.
pub fn wrap_line(line: &str) -> Vec<String> {
    if line.len() <= LINE_WIDTH {
        return vec![line.to_string()];
    }
    let indent_len = line.len() - line.trim_start().len();
    let indent = &line[..indent_len];
    let directive = line.trim_start().starts_with("!$OMP");
    let cont_prefix = if directive {
        format!("{indent}!$OMP& ")
    } else {
        format!("{indent}    &")
    };
    let mut out = Vec::new();
    let mut rest = line.to_string();
    let mut first = true;
    loop {
        let prefix_len = if first { 0 } else { cont_prefix.len() };
        if prefix_len + rest.len() <= LINE_WIDTH {
            out.push(if first {
                rest
            } else {
                format!("{cont_prefix}{rest}")
            });
            break;
        }
        // room for the content plus " &"
        let budget = LINE_WIDTH - 2 - prefix_len;
        let search = &rest[..budget.min(rest.len())];
        let min_break = if first { indent_len + 8 } else { 8 };
        let cut = search
            .char_indices()
            .rev()
            .find(|&(i, c)| i >= min_break && matches!(c, '*' | ',' | ' '))
            .map(|(i, _)| i + 1)
            .unwrap_or(budget);
        let (head, tail) = rest.split_at(cut);
        let head = head.trim_end();
        out.push(if first {
            format!("{head} &")
        } else {
            format!("{cont_prefix}{head} &")
        });
        rest = tail.trim_start().to_string();
        first = false;
    }
    out
}

/// Joins continuation lines, drops all whitespace and lowercases, so that
/// two Fortran texts compare equal regardless of layout.
pub fn normalize_source(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut pending: Option<String> = None;
    for raw in text.lines() {
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let mut piece = t.to_ascii_lowercase();
        if pending.is_some() {
            for p in ["!$omp&", "&"] {
                if let Some(s) = piece.strip_prefix(p) {
                    piece = s.trim_start().to_string();
                    break;
                }
            }
        }
        let continued = piece.ends_with('&');
        if continued {
            piece.pop();
        }
        let joined = match pending.take() {
            Some(mut acc) => {
                acc.push_str(&piece);
                acc
            }
            None => piece,
        };
        if continued {
            pending = Some(joined);
        } else {
            out.push(joined.chars().filter(|c| !c.is_whitespace()).collect());
        }
    }
    if let Some(acc) = pending {
        out.push(acc.chars().filter(|c| !c.is_whitespace()).collect());
    }
    out
}
