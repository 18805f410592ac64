use std::fmt::{self, Write as _};

use super::{DirectiveKind, DirectiveSpec, Kernel};

fn directive_line(d: &DirectiveSpec, edge: &str) -> String {
    match d.kind {
        DirectiveKind::LoopFusion => format!("!oat$ install LoopFusion region {edge}"),
        DirectiveKind::Exchange if d.depths.is_empty() => {
            format!("!oat$ install Exchange region {edge}")
        }
        DirectiveKind::Exchange => {
            let list: Vec<String> = d.depths.iter().map(|x| x.to_string()).collect();
            format!("!oat$ install Exchange ({}) region {edge}", list.join(", "))
        }
    }
}

/// Renders the kernel back into the kernel file format.
impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        writeln!(out, "kernel {}", self.name)?;
        for (p, v) in &self.params {
            writeln!(out, "param {p} = {v}")?;
        }
        if self.body_reads == self.body_writes {
            if !self.body_reads.is_empty() {
                writeln!(out, "body_arrays {}", self.body_reads.join(" "))?;
            }
        } else {
            if !self.body_reads.is_empty() {
                writeln!(out, "body_reads {}", self.body_reads.join(" "))?;
            }
            if !self.body_writes.is_empty() {
                writeln!(out, "body_writes {}", self.body_writes.join(" "))?;
            }
        }
        out.push('\n');

        let mut regions: Vec<&DirectiveSpec> = self.directives.iter().collect();
        regions.sort_by_key(|d| (d.region.start, std::cmp::Reverse(d.region.end)));
        for d in &regions {
            writeln!(out, "{}", directive_line(d, "start"))?;
        }
        for h in &self.nest {
            let pad = "  ".repeat(h.depth - 1);
            if self.parallel_depth == Some(h.depth) {
                writeln!(out, "{pad}!$omp parallel do")?;
            }
            writeln!(out, "{pad}do {} = {}, {}", h.index, h.lower.atom(), h.upper)?;
        }
        let inner = "  ".repeat(self.nest.len());
        writeln!(out, "{inner}begin body")?;
        for l in &self.body {
            if l.is_empty() {
                out.push('\n');
            } else {
                writeln!(out, "{inner}  {l}")?;
            }
        }
        writeln!(out, "{inner}end body")?;
        for h in self.nest.iter().rev() {
            let pad = "  ".repeat(h.depth - 1);
            writeln!(out, "{pad}enddo")?;
            if self.parallel_depth == Some(h.depth) {
                writeln!(out, "{pad}!$omp end parallel do")?;
            }
        }
        for d in regions.iter().rev() {
            writeln!(out, "{}", directive_line(d, "end"))?;
        }
        f.write_str(&out)
    }
}
