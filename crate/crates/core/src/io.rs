//! Plain-text formats for graphs, node data, splits, decompositions and checkpoints.
//!
//! Every parser reports errors with 1-based line numbers. Floats are written with
//! Rust's shortest round-trip formatting, so reading back a written file is bit-exact.
//!
//! Graph file:
//! ```text
//! # comment
//! N 4
//! 0 1 1.0
//! 1 2        # weight defaults to 1
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{Graph, Labels};
use crate::lanczos::LanczosDecomposition;
use crate::matrix::Matrix;
use crate::nn::{Model, ModelConfig};
use crate::train::Split;

/// Upper bound on node counts accepted from text, guarding against absurd allocations.
pub const MAX_NODES: usize = 1 << 24;

const DECOMPOSITION_MAGIC: &str = "lanczos-decomposition v1";
const CHECKPOINT_MAGIC: &str = "lanczosnet-checkpoint v1";

/// Non-blank lines with `#` comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(k, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((k + 1, line))
    })
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let x: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("expected a number, found {tok:?}")))?;
    if !x.is_finite() {
        return Err(Error::parse(line, format!("non-finite value {tok:?}")));
    }
    Ok(x)
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("expected a non-negative integer, found {tok:?}")))
}

fn parse_floats<'a>(toks: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec<f64>> {
    toks.map(|t| parse_f64(t, line)).collect()
}

fn check_node_count(n: usize, line: usize) -> Result<()> {
    if n == 0 || n > MAX_NODES {
        return Err(Error::parse(line, format!("node count {n} outside 1..={MAX_NODES}")));
    }
    Ok(())
}

fn relabel(e: Error, line: usize) -> Error {
    match e {
        Error::Parse { .. } => e,
        other => Error::parse(line, other.to_string()),
    }
}

pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing `N <nodes>` header"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("N") {
        return Err(Error::parse(hline, "expected `N <nodes>` header"));
    }
    let n = parse_usize(
        toks.next().ok_or_else(|| Error::parse(hline, "missing node count"))?,
        hline,
    )?;
    if toks.next().is_some() {
        return Err(Error::parse(hline, "trailing tokens after node count"));
    }
    check_node_count(n, hline)?;
    let mut edges = Vec::new();
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&toks.len()) {
            return Err(Error::parse(ln, "expected `i j [w]`"));
        }
        let i = parse_usize(toks[0], ln)?;
        let j = parse_usize(toks[1], ln)?;
        let w = match toks.get(2) {
            Some(t) => parse_f64(t, ln)?,
            None => 1.0,
        };
        Graph::new(n, [(i, j, w)]).map_err(|e| relabel(e, ln))?;
        edges.push((i, j, w));
    }
    Graph::new(n, edges)
}

pub fn write_graph(g: &Graph) -> String {
    let mut s = format!("N {}\n", g.num_nodes());
    for e in g.edges() {
        let _ = writeln!(s, "{} {} {:e}", e.i, e.j, e.w);
    }
    s
}

/// Comma-separated rows of equal length.
pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in content_lines(text) {
        let row = parse_floats(line.split(',').map(str::trim), ln)?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    ln,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(1, "no rows"));
    }
    Ok(Matrix::from_rows(&rows))
}

pub fn write_matrix_csv(m: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:e}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// One value per line: all integers give class labels, otherwise real targets.
pub fn parse_labels(text: &str) -> Result<Labels> {
    let mut toks = Vec::new();
    for (ln, line) in content_lines(text) {
        if line.split_whitespace().count() != 1 {
            return Err(Error::parse(ln, "expected one value per line"));
        }
        toks.push((ln, line));
    }
    if toks.is_empty() {
        return Err(Error::parse(1, "no labels"));
    }
    if toks.iter().all(|(_, t)| t.parse::<usize>().is_ok()) {
        Ok(Labels::Classes(
            toks.iter().map(|(_, t)| t.parse().expect("checked")).collect(),
        ))
    } else {
        Ok(Labels::Targets(
            toks.iter().map(|&(ln, t)| parse_f64(t, ln)).collect::<Result<_>>()?,
        ))
    }
}

pub fn write_labels(labels: &Labels) -> String {
    let mut s = String::new();
    match labels {
        Labels::Classes(c) => c.iter().for_each(|x| {
            let _ = writeln!(s, "{x}");
        }),
        Labels::Targets(t) => t.iter().for_each(|x| {
            let _ = writeln!(s, "{x:e}");
        }),
    }
    s
}

/// Lines `train i j ...`, `val ...`, `test ...`; each key at most once, `train` required.
/// Disjointness is checked against the population later by [`Split::validate`].
pub fn parse_split(text: &str) -> Result<Split> {
    let mut sets: [Option<Vec<usize>>; 3] = [None, None, None];
    for (ln, line) in content_lines(text) {
        let mut toks = line.split_whitespace();
        let key = toks.next().expect("non-empty line");
        let slot = match key {
            "train" => 0,
            "val" => 1,
            "test" => 2,
            other => return Err(Error::parse(ln, format!("unknown split key {other:?}"))),
        };
        if sets[slot].is_some() {
            return Err(Error::parse(ln, format!("duplicate `{key}` line")));
        }
        sets[slot] = Some(toks.map(|t| parse_usize(t, ln)).collect::<Result<_>>()?);
    }
    let [train, val, test] = sets;
    let train = train.ok_or_else(|| Error::parse(1, "missing `train` line"))?;
    Ok(Split {
        train,
        val: val.unwrap_or_default(),
        test: test.unwrap_or_default(),
    })
}

pub fn write_split(split: &Split) -> String {
    let join = |v: &[usize]| v.iter().map(|i| format!(" {i}")).collect::<String>();
    format!(
        "train{}\nval{}\ntest{}\n",
        join(&split.train),
        join(&split.val),
        join(&split.test)
    )
}

fn float_line(key: &str, v: &[f64]) -> String {
    let mut s = key.to_string();
    for x in v {
        let _ = write!(s, " {x:e}");
    }
    s.push('\n');
    s
}

fn matrix_block(s: &mut String, key: &str, m: &Matrix) {
    let _ = writeln!(s, "{key} {} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:e}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
}

pub fn write_decomposition(d: &LanczosDecomposition) -> String {
    let mut s = format!("{DECOMPOSITION_MAGIC}\n");
    let seed = d.seed.map_or("none".to_string(), |x| x.to_string());
    let _ = writeln!(
        s,
        "n {} steps {} requested {} seed {} breakdown {} clamp {}",
        d.dim(),
        d.steps_completed,
        d.requested_steps,
        seed,
        d.breakdown as u8,
        d.clamp_ritz as u8
    );
    s.push_str(&float_line("gamma", &d.diagonal));
    s.push_str(&float_line("beta", &d.off_diagonal));
    s.push_str(&float_line("ritz", &d.ritz_values));
    matrix_block(&mut s, "Q", &d.lanczos_vectors);
    matrix_block(&mut s, "V", &d.ritz_vectors);
    s
}

/// Sequential reader over raw lines (no comment stripping) for the structured formats.
struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            Some((k, l)) => {
                self.last = k + 1;
                Ok((k + 1, l.trim_end()))
            }
            None => Err(Error::parse(
                self.last + 1,
                format!("unexpected end of input, expected {what}"),
            )),
        }
    }

    /// A line `key v1 v2 ...` with exactly `count` floats.
    fn floats(&mut self, key: &str, count: usize) -> Result<Vec<f64>> {
        let (ln, line) = self.next(key)?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(Error::parse(ln, format!("expected `{key}` line")));
        }
        let v = parse_floats(toks, ln)?;
        if v.len() != count {
            return Err(Error::parse(ln, format!("expected {count} values, found {}", v.len())));
        }
        Ok(v)
    }

    /// A `key rows cols` header followed by `rows` lines of `cols` floats.
    fn matrix(&mut self, key: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let (ln, line) = self.next(key)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != key {
            return Err(Error::parse(ln, format!("expected `{key} <rows> <cols>`")));
        }
        let (r, c) = (parse_usize(toks[1], ln)?, parse_usize(toks[2], ln)?);
        if (r, c) != (rows, cols) {
            return Err(Error::parse(ln, format!("expected shape {rows}x{cols}, found {r}x{c}")));
        }
        let mut data = Vec::new();
        for _ in 0..rows {
            let (ln, line) = self.next("matrix row")?;
            let row = parse_floats(line.split_whitespace(), ln)?;
            if row.len() != cols {
                return Err(Error::parse(ln, format!("expected {cols} values, found {}", row.len())));
            }
            data.extend(row);
        }
        Ok(Matrix::from_vec(rows, cols, data))
    }

    fn finish(&mut self) -> Result<()> {
        for (k, l) in self.lines.by_ref() {
            if !l.trim().is_empty() {
                return Err(Error::parse(k + 1, "unexpected trailing content"));
            }
        }
        Ok(())
    }
}

fn parse_flag(tok: &str, line: usize) -> Result<bool> {
    match tok {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::parse(line, format!("expected 0 or 1, found {tok:?}"))),
    }
}

pub fn parse_decomposition(text: &str) -> Result<LanczosDecomposition> {
    let mut r = Reader::new(text);
    let (ln, magic) = r.next("header")?;
    if magic != DECOMPOSITION_MAGIC {
        return Err(Error::parse(ln, format!("expected `{DECOMPOSITION_MAGIC}`")));
    }
    let (ln, line) = r.next("dimensions")?;
    let toks: Vec<&str> = line.split_whitespace().collect();
    let keys = ["n", "steps", "requested", "seed", "breakdown", "clamp"];
    if toks.len() != 12 || toks.iter().step_by(2).zip(keys).any(|(a, b)| *a != b) {
        return Err(Error::parse(
            ln,
            "expected `n <n> steps <k> requested <k> seed <s|none> breakdown <0|1> clamp <0|1>`",
        ));
    }
    let n = parse_usize(toks[1], ln)?;
    check_node_count(n, ln)?;
    let steps = parse_usize(toks[3], ln)?;
    if steps == 0 || steps > n {
        return Err(Error::parse(ln, format!("steps {steps} outside 1..={n}")));
    }
    let requested = parse_usize(toks[5], ln)?;
    if requested < steps {
        return Err(Error::parse(ln, "requested steps below completed steps"));
    }
    let seed = match toks[7] {
        "none" => None,
        t => Some(t.parse().map_err(|_| Error::parse(ln, format!("invalid seed {t:?}")))?),
    };
    let breakdown = parse_flag(toks[9], ln)?;
    let clamp_ritz = parse_flag(toks[11], ln)?;
    let diagonal = r.floats("gamma", steps)?;
    let off_diagonal = r.floats("beta", steps - 1)?;
    let ritz_values = r.floats("ritz", steps)?;
    let lanczos_vectors = r.matrix("Q", n, steps)?;
    let ritz_vectors = r.matrix("V", n, steps)?;
    r.finish()?;
    Ok(LanczosDecomposition {
        lanczos_vectors,
        diagonal,
        off_diagonal,
        ritz_vectors,
        ritz_values,
        requested_steps: requested,
        steps_completed: steps,
        breakdown,
        seed,
        clamp_ritz,
    })
}

/// Header, seed, one-line JSON config, then each parameter as
/// `param <name> <rows> <cols>` followed by one line of row-major values.
pub fn write_checkpoint(model: &Model) -> String {
    let mut s = format!("{CHECKPOINT_MAGIC}\nseed {}\n", model.seed);
    let config = serde_json::to_string(&model.config).expect("config serializes");
    let _ = writeln!(s, "config {config}");
    for (name, p) in model.named_params() {
        let _ = writeln!(s, "param {name} {} {}", p.rows(), p.cols());
        let vals: Vec<String> = p.as_slice().iter().map(|x| format!("{x:e}")).collect();
        s.push_str(&vals.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_checkpoint(text: &str) -> Result<Model> {
    let mut r = Reader::new(text);
    let (ln, magic) = r.next("header")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::parse(ln, format!("expected `{CHECKPOINT_MAGIC}`")));
    }
    let (ln, line) = r.next("seed")?;
    let seed = line
        .strip_prefix("seed ")
        .and_then(|t| t.trim().parse::<u64>().ok())
        .ok_or_else(|| Error::parse(ln, "expected `seed <u64>`"))?;
    let (ln, line) = r.next("config")?;
    let json = line
        .strip_prefix("config ")
        .ok_or_else(|| Error::parse(ln, "expected `config <json>`"))?;
    let config: ModelConfig = serde_json::from_str(json).map_err(|e| Error::parse(ln, format!("config: {e}")))?;
    // Shapes come from the config; cap sizes before allocating.
    let total: usize = config
        .conv_widths()
        .iter()
        .map(|&(a, b)| a.saturating_mul(b))
        .fold(0usize, |acc, x| acc.saturating_add(x));
    if total > text.len() || config.filter_widths().iter().any(|&w| w > text.len()) {
        return Err(Error::parse(ln, "config describes more parameters than the file holds"));
    }
    if let Some(e) = &config.embedding {
        if e.num_nodes.saturating_mul(e.dim) > text.len() {
            return Err(Error::parse(ln, "embedding larger than the file holds"));
        }
    }
    let mut model = Model::new(config, seed).map_err(|e| relabel(e, ln))?;
    let expected: Vec<(String, (usize, usize))> = model
        .named_params()
        .iter()
        .map(|(n, p)| (n.clone(), p.shape()))
        .collect();
    let mut values = Vec::with_capacity(expected.len());
    for (name, (rows, cols)) in expected {
        let (ln, line) = r.next("param header")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "param" {
            return Err(Error::parse(ln, "expected `param <name> <rows> <cols>`"));
        }
        if toks[1] != name {
            return Err(Error::parse(
                ln,
                format!("expected parameter {name}, found {}", toks[1]),
            ));
        }
        let shape = (parse_usize(toks[2], ln)?, parse_usize(toks[3], ln)?);
        if shape != (rows, cols) {
            return Err(Error::parse(
                ln,
                format!("{name}: expected shape {rows}x{cols}, found {}x{}", shape.0, shape.1),
            ));
        }
        let (ln, line) = r.next("param values")?;
        let v = parse_floats(line.split_whitespace(), ln)?;
        if v.len() != rows * cols {
            return Err(Error::parse(
                ln,
                format!("{name}: expected {} values, found {}", rows * cols, v.len()),
            ));
        }
        values.push(Matrix::from_vec(rows, cols, v));
    }
    r.finish()?;
    model.set_params(values)?;
    Ok(model)
}

/// One graph of a regression set.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphRecord {
    pub graph: Graph,
    pub target: Vec<f64>,
}

/// Graph set for graph-level regression:
/// ```text
/// graph <nodes> <feature_dim>
/// x <feature_dim values>      (one line per node)
/// e <i> <j> [w]               (any number of edges)
/// y <target values>
/// ```
pub fn parse_graph_set(text: &str) -> Result<Vec<GraphRecord>> {
    let mut out = Vec::new();
    let mut lines = content_lines(text).peekable();
    let mut target_dim: Option<usize> = None;
    while let Some((ln, header)) = lines.next() {
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != "graph" {
            return Err(Error::parse(ln, "expected `graph <nodes> <feature_dim>`"));
        }
        let n = parse_usize(toks[1], ln)?;
        check_node_count(n, ln)?;
        let f = parse_usize(toks[2], ln)?;
        if f > MAX_NODES {
            return Err(Error::parse(ln, "feature dimension too large"));
        }
        let mut feats = Vec::new();
        let mut edges = Vec::new();
        let mut target = None;
        while let Some(&(ln, line)) = lines.peek() {
            let mut t = line.split_whitespace();
            match t.next() {
                Some("x") => {
                    let row = parse_floats(t, ln)?;
                    if row.len() != f {
                        return Err(Error::parse(
                            ln,
                            format!("expected {f} feature values, found {}", row.len()),
                        ));
                    }
                    if feats.len() == n {
                        return Err(Error::parse(ln, format!("more than {n} feature rows")));
                    }
                    feats.push(row);
                }
                Some("e") => {
                    let rest: Vec<&str> = t.collect();
                    if !(2..=3).contains(&rest.len()) {
                        return Err(Error::parse(ln, "expected `e i j [w]`"));
                    }
                    let (i, j) = (parse_usize(rest[0], ln)?, parse_usize(rest[1], ln)?);
                    let w = rest.get(2).map_or(Ok(1.0), |x| parse_f64(x, ln))?;
                    Graph::new(n, [(i, j, w)]).map_err(|e| relabel(e, ln))?;
                    edges.push((i, j, w));
                }
                Some("y") => {
                    let y = parse_floats(t, ln)?;
                    if y.is_empty() {
                        return Err(Error::parse(ln, "empty target"));
                    }
                    match target_dim {
                        Some(p) if p != y.len() => {
                            return Err(Error::parse(
                                ln,
                                format!("expected {p} target values, found {}", y.len()),
                            ))
                        }
                        _ => target_dim = Some(y.len()),
                    }
                    target = Some(y);
                    lines.next();
                    break;
                }
                _ => break,
            }
            lines.next();
        }
        let target = target.ok_or_else(|| Error::parse(ln, "graph block without a `y` line"))?;
        if feats.len() != n {
            return Err(Error::parse(
                ln,
                format!("expected {n} feature rows, found {}", feats.len()),
            ));
        }
        let mut graph = Graph::new(n, edges)?;
        if f > 0 {
            graph = graph.with_features(Matrix::from_rows(&feats))?;
        }
        out.push(GraphRecord { graph, target });
    }
    if out.is_empty() {
        return Err(Error::parse(1, "no graphs"));
    }
    Ok(out)
}

pub fn write_graph_set(records: &[GraphRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let f = r.graph.features.as_ref().map_or(0, |m| m.cols());
        let _ = writeln!(s, "graph {} {}", r.graph.num_nodes(), f);
        if let Some(m) = &r.graph.features {
            for i in 0..m.rows() {
                s.push_str(&float_line("x", m.row(i)));
            }
        }
        for e in r.graph.edges() {
            let _ = writeln!(s, "e {} {} {:e}", e.i, e.j, e.w);
        }
        s.push_str(&float_line("y", &r.target));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build_operator;
    use crate::graph::LaplacianKind;
    use crate::lanczos::{lanczos_decompose, LanczosOptions};
    use crate::nn::{Activation, Readout, ScaleConfig, Variant};

    #[test]
    fn graph_round_trip_and_defaults() {
        let g = parse_graph("# ring\nN 3\n0 1 2.5\n1 2\n\n2 0 0.5 # last\n").unwrap();
        assert_eq!(g.num_edges(), 3);
        assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
    }

    #[test]
    fn graph_errors_carry_line_numbers() {
        let err = parse_graph("N 3\n0 1\n0 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_graph("N 3\n0 1\n\n0 7\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
        assert!(matches!(parse_graph("3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_graph("N 0\n").is_err());
        assert!(parse_graph("N 2\n0 1 nan\n").is_err());
        assert!(parse_graph("N 2\n0 1 -1\n").is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let m = Matrix::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        assert_eq!(parse_matrix_csv(&write_matrix_csv(&m)).unwrap(), m);
        assert!(matches!(
            parse_matrix_csv("1,2\n3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn labels_classes_or_targets() {
        assert_eq!(parse_labels("0\n2\n1\n").unwrap(), Labels::Classes(vec![0, 2, 1]));
        assert_eq!(parse_labels("0\n2.5\n").unwrap(), Labels::Targets(vec![0.0, 2.5]));
        assert!(parse_labels("1 2\n").is_err());
        let l = Labels::Targets(vec![0.1, -3e-7]);
        assert_eq!(parse_labels(&write_labels(&l)).unwrap(), l);
    }

    #[test]
    fn split_format() {
        let s = parse_split("train 0 1\nval 2\ntest 3 4\n").unwrap();
        assert_eq!(s.test, vec![3, 4]);
        assert_eq!(parse_split(&write_split(&s)).unwrap(), s);
        assert!(parse_split("train 0\ntrain 1\n").is_err());
        assert!(parse_split("val 0\n").is_err());
        assert!(parse_split("train 0\nvalid 1\n").is_err());
    }

    #[test]
    fn decomposition_round_trip_is_bit_exact() {
        let g = Graph::new(7, (0..7).map(|i| (i, (i + 1) % 7, 1.0 + i as f64 / 3.0))).unwrap();
        let s = build_operator(&g, LaplacianKind::affinity(true)).unwrap();
        let d = lanczos_decompose(&s, &LanczosOptions::new(5)).unwrap();
        let back = parse_decomposition(&write_decomposition(&d)).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn decomposition_rejects_truncation() {
        let g = Graph::new(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let s = build_operator(&g, LaplacianKind::affinity(false)).unwrap();
        let d = lanczos_decompose(&s, &LanczosOptions::new(3)).unwrap();
        let text = write_decomposition(&d);
        let cut: String = text.lines().take(7).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_decomposition(&cut), Err(Error::Parse { .. })));
    }

    fn config() -> ModelConfig {
        ModelConfig {
            variant: Variant::LanczosNet,
            input_dim: 2,
            hidden_dims: vec![3],
            output_dim: 2,
            scales: ScaleConfig::new(vec![0, 1], vec![2]).unwrap(),
            lanczos_k: 3,
            lanczos_epsilon: 1e-6,
            reorthogonalize: false,
            operator: LaplacianKind::affinity(true),
            filter_hidden: vec![4],
            filter_non_negative: true,
            dropout: 0.5,
            activation: Activation::Relu,
            embedding: None,
            kernel: None,
            readout: Readout::Node,
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let m = Model::new(config(), 42).unwrap();
        let back = parse_checkpoint(&write_checkpoint(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn checkpoint_rejects_wrong_shape() {
        let m = Model::new(config(), 1).unwrap();
        let text = write_checkpoint(&m).replacen("param layer0.weight 6 3", "param layer0.weight 3 6", 1);
        assert!(matches!(parse_checkpoint(&text), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn graph_set_round_trip() {
        let g = Graph::new(3, [(0, 1, 1.0), (1, 2, 2.0)])
            .unwrap()
            .with_features(Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64 * 0.5))
            .unwrap();
        let recs = vec![
            GraphRecord {
                graph: g.clone(),
                target: vec![1.5, -2.0],
            },
            GraphRecord {
                graph: g,
                target: vec![0.0, 3.0],
            },
        ];
        assert_eq!(parse_graph_set(&write_graph_set(&recs)).unwrap(), recs);
        assert!(parse_graph_set("graph 2 1\nx 1\nx 2\n").is_err());
        assert!(parse_graph_set("graph 2 1\nx 1\ny 1\n").is_err());
    }
}
