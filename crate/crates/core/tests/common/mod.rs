#![allow(dead_code)]

use rand::Rng;

const NAMES: [&str; 4] = ["ia", "ib", "ic", "id"];

/// A generated rectangular nest together with the extents it was built from.
#[derive(Debug, Clone)]
pub struct RandomNest {
    pub lowers: Vec<i64>,
    pub lengths: Vec<i64>,
    pub source: String,
}

/// Builds kernel text for a nest of the given depth. Bounds mix literals,
/// parameters and negated parameters; directives and the source pragma
/// position are drawn at random.
pub fn random_nest(rng: &mut impl Rng, depth: usize, max_len: i64) -> RandomNest {
    let mut params = Vec::new();
    let mut lowers = Vec::new();
    let mut lengths = Vec::new();
    let mut headers = Vec::new();
    for (l, name) in NAMES.iter().take(depth).enumerate() {
        let len = rng.gen_range(1..=max_len);
        let (lo_text, hi_text, lo) = match rng.gen_range(0..3) {
            0 => {
                let lo = rng.gen_range(-3..=3);
                (lo.to_string(), (lo + len - 1).to_string(), lo)
            }
            1 => {
                let v = rng.gen_range(-2..=5);
                let p = format!("p{l}");
                params.push((p.clone(), v));
                let hi = match len - 1 {
                    0 => p.clone(),
                    k => format!("{p}+{k}"),
                };
                (p, hi, v)
            }
            _ => {
                let v = rng.gen_range(0..=4);
                let p = format!("q{l}");
                params.push((p.clone(), v));
                (format!("(-{p})"), (-v + len - 1).to_string(), -v)
            }
        };
        lowers.push(lo);
        lengths.push(len);
        headers.push(format!("do {name} = {lo_text}, {hi_text}"));
    }

    let fusion = rng.gen_bool(0.8);
    let exchange: Option<String> = match rng.gen_range(0..5) {
        0 => None,
        1 => {
            let k = rng.gen_range(1..=depth);
            Some(format!("({k})"))
        }
        _ => Some(String::new()),
    };
    let pragma = if rng.gen_bool(0.85) {
        Some(rng.gen_range(1..=depth))
    } else {
        None
    };

    let mut s = String::from("kernel rnd\n");
    for (p, v) in &params {
        s.push_str(&format!("param {p} = {v}\n"));
    }
    s.push_str("body_arrays w\n");
    if fusion {
        s.push_str("!oat$ install LoopFusion region start\n");
    }
    if let Some(list) = &exchange {
        s.push_str(&format!("!oat$ install Exchange {list} region start\n"));
    }
    for (l, h) in headers.iter().enumerate() {
        if pragma == Some(l + 1) {
            s.push_str("!$omp parallel do\n");
        }
        s.push_str(h);
        s.push('\n');
    }
    s.push_str("begin body\n  w(1) = w(1) + 1\nend body\n");
    for l in (1..=depth).rev() {
        s.push_str("enddo\n");
        if pragma == Some(l) {
            s.push_str("!$omp end parallel do\n");
        }
    }
    if exchange.is_some() {
        s.push_str("!oat$ install Exchange region end\n");
    }
    if fusion {
        s.push_str("!oat$ install LoopFusion region end\n");
    }
    RandomNest {
        lowers,
        lengths,
        source: s,
    }
}

/// All index tuples of the nest in lexicographic order, by direct counting.
pub fn oracle_tuples(lowers: &[i64], lengths: &[i64]) -> Vec<Vec<i64>> {
    let total: i64 = lengths.iter().product();
    let mut out = Vec::with_capacity(total as usize);
    let mut cur: Vec<i64> = lowers.to_vec();
    for _ in 0..total {
        out.push(cur.clone());
        for j in (0..cur.len()).rev() {
            cur[j] += 1;
            if cur[j] < lowers[j] + lengths[j] {
                break;
            }
            cur[j] = lowers[j];
        }
    }
    out
}
