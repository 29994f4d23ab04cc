//! ARPA back-off model text format.
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, padded to at least six decimals, so a written model scores
//! identically after reading. Discounts, when known, are stored as `#`
//! comments ahead of the `\data\` section.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rustc_hash::FxHashMap;

use crate::corpus::{BOS, EOS, UNK};
use crate::error::{Error, Result};
use crate::ngram::kn::{Discount, DiscountSet};
use crate::ngram::model::{BackoffModel, NgramEntry, NgramTable, TokenId, Vocab, LOG_ZERO, MAX_ORDER};

pub(crate) fn format_value(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('e') || s.contains("inf") || s.contains("NaN") {
        return format!("{v:.17}");
    }
    let decimals = s.split_once('.').map(|(_, d)| d.len()).unwrap_or(0);
    if decimals >= 6 {
        s
    } else {
        format!("{v:.6}")
    }
}

fn sorted_entries<'a>(model: &'a BackoffModel, n: usize) -> Vec<(Vec<&'a str>, &'a NgramEntry)> {
    let vocab = model.vocab();
    let mut rows: Vec<(Vec<&str>, &NgramEntry)> = model
        .table(n)
        .iter()
        .map(|(k, e)| (k.iter().map(|&id| vocab.token(id)).collect(), e))
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    rows
}

pub fn to_arpa_string(model: &BackoffModel) -> String {
    let mut out = String::new();
    if let Some(ds) = model.discounts() {
        for (i, d) in ds.per_order.iter().enumerate() {
            let _ = writeln!(
                out,
                "# discount order={} d1={} d2={} d3+={} fallback={}",
                i + 1,
                format_value(d.d1),
                format_value(d.d2),
                format_value(d.d3plus),
                d.fallback
            );
        }
        out.push('\n');
    }
    out.push_str("\\data\\\n");
    for n in 1..=model.order() {
        let _ = writeln!(out, "ngram {n}={}", model.entry_count(n));
    }
    for n in 1..=model.order() {
        let _ = write!(out, "\n\\{n}-grams:\n");
        for (toks, e) in sorted_entries(model, n) {
            out.push_str(&format_value(e.logprob));
            out.push('\t');
            out.push_str(&toks.join(" "));
            if n < model.order() && e.backoff != 0.0 {
                out.push('\t');
                out.push_str(&format_value(e.backoff));
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

pub fn write_arpa(model: &BackoffModel, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(to_arpa_string(model).as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_arpa(path: &Path) -> Result<BackoffModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| {
        let upto = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        Error::InvalidUtf8 {
            line: upto.iter().filter(|&&b| b == b'\n').count() + 1,
        }
    })?;
    parse_arpa(&text)
}

fn arpa_err(line: usize, message: impl Into<String>) -> Error {
    Error::Arpa {
        line,
        message: message.into(),
    }
}

fn parse_float(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| arpa_err(line, format!("bad number '{s}'")))?;
    if v.is_nan() {
        return Err(arpa_err(line, "NaN value"));
    }
    Ok(v)
}

fn parse_discount(rest: &str, line: usize) -> Result<(usize, Discount)> {
    let mut order = None;
    let mut d = Discount {
        d1: 0.0,
        d2: 0.0,
        d3plus: 0.0,
        fallback: false,
    };
    for field in rest.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| arpa_err(line, format!("bad discount field '{field}'")))?;
        match k {
            "order" => order = Some(v.parse().map_err(|_| arpa_err(line, "bad discount order"))?),
            "d1" => d.d1 = parse_float(v, line)?,
            "d2" => d.d2 = parse_float(v, line)?,
            "d3+" => d.d3plus = parse_float(v, line)?,
            "fallback" => d.fallback = v == "true",
            _ => return Err(arpa_err(line, format!("unknown discount field '{k}'"))),
        }
    }
    Ok((order.ok_or_else(|| arpa_err(line, "discount without order"))?, d))
}

pub fn parse_arpa(text: &str) -> Result<BackoffModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut discounts: Vec<(usize, Discount)> = Vec::new();

    // Preamble up to \data\.
    loop {
        let Some((no, l)) = lines.next() else {
            return Err(arpa_err(0, "missing \\data\\ section"));
        };
        let t = l.trim();
        if t == "\\data\\" {
            break;
        }
        if let Some(rest) = t.strip_prefix("# discount ") {
            discounts.push(parse_discount(rest, no)?);
        }
    }

    let mut declared: Vec<usize> = Vec::new();
    let mut pending = None;
    for (no, l) in lines.by_ref() {
        let t = l.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix("ngram ") {
            let (n, c) = rest
                .split_once('=')
                .ok_or_else(|| arpa_err(no, "malformed ngram count line"))?;
            let n: usize = n.trim().parse().map_err(|_| arpa_err(no, "bad order"))?;
            let c: usize = c.trim().parse().map_err(|_| arpa_err(no, "bad count"))?;
            if n != declared.len() + 1 {
                return Err(arpa_err(no, format!("expected ngram {} count", declared.len() + 1)));
            }
            declared.push(c);
        } else {
            pending = Some((no, t.to_string()));
            break;
        }
    }
    let order = declared.len();
    if order == 0 || order > MAX_ORDER {
        return Err(arpa_err(0, format!("model order must be in 1..={MAX_ORDER}")));
    }

    let mut vocab = Vocab::default();
    let mut raw: Vec<Vec<(Vec<TokenId>, NgramEntry)>> = vec![Vec::new(); order];
    let mut current: Option<usize> = None;
    let mut ended = false;
    let rest = pending.into_iter().chain(lines.map(|(n, l)| (n, l.trim().to_string())));
    for (no, t) in rest {
        if t.is_empty() {
            continue;
        }
        if ended {
            return Err(arpa_err(no, "content after \\end\\"));
        }
        if t == "\\end\\" {
            ended = true;
            continue;
        }
        if let Some(h) = t.strip_prefix('\\').and_then(|s| s.strip_suffix("-grams:")) {
            let n: usize = h.parse().map_err(|_| arpa_err(no, "bad section header"))?;
            if n != current.map_or(1, |c| c + 1) || n > order {
                return Err(arpa_err(no, format!("unexpected section \\{n}-grams:")));
            }
            current = Some(n);
            continue;
        }
        let n = current.ok_or_else(|| arpa_err(no, "entry outside an n-gram section"))?;
        let fields: Vec<&str> = t.split_whitespace().collect();
        let backoff = match fields.len() {
            l if l == n + 1 => 0.0,
            l if l == n + 2 && n < order => parse_float(fields[n + 1], no)?,
            _ => return Err(arpa_err(no, format!("expected {n} tokens in a {n}-gram entry"))),
        };
        let logprob = parse_float(fields[0], no)?;
        if logprob > 1e-9 {
            return Err(arpa_err(no, "positive log probability"));
        }
        let key: Vec<TokenId> = if n == 1 {
            vec![vocab.insert(fields[1])]
        } else {
            fields[1..=n]
                .iter()
                .map(|t| {
                    vocab
                        .id(t)
                        .ok_or_else(|| arpa_err(no, format!("token '{t}' missing from the unigrams")))
                })
                .collect::<Result<_>>()?
        };
        raw[n - 1].push((key, NgramEntry { logprob, backoff }));
    }
    if !ended {
        return Err(arpa_err(0, "missing \\end\\"));
    }

    let mut tables: Vec<NgramTable<NgramEntry>> = Vec::with_capacity(order);
    for (i, rows) in raw.into_iter().enumerate() {
        if rows.len() != declared[i] {
            return Err(arpa_err(
                0,
                format!("{}-gram count {} does not match declared {}", i + 1, rows.len(), declared[i]),
            ));
        }
        let mut t: NgramTable<NgramEntry> = FxHashMap::default();
        for (k, e) in rows {
            if t.insert(k.into(), e).is_some() {
                return Err(arpa_err(0, format!("duplicate {}-gram", i + 1)));
            }
        }
        tables.push(t);
    }
    for special in [BOS, EOS, UNK] {
        let id = vocab.insert(special);
        tables[0].entry(Box::new([id])).or_insert(NgramEntry::new(LOG_ZERO));
    }

    let mut model = BackoffModel::from_parts(order, vocab, tables)?;
    if !discounts.is_empty() {
        discounts.sort_by_key(|(o, _)| *o);
        if discounts.iter().map(|(o, _)| *o).eq(1..=order) {
            model = model.with_discounts(DiscountSet {
                per_order: discounts.into_iter().map(|(_, d)| d).collect(),
            });
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_round_trip_exactly() {
        for v in [-0.1, -1.0 / 3.0, -99.0, 0.0, -1e-12, -2.345678901234] {
            let s = format_value(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            assert!(s.split_once('.').unwrap().1.len() >= 6, "{s}");
        }
    }

    #[test]
    fn rejects_count_mismatch() {
        let text = "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.5\ta\n\n\\end\\\n";
        assert!(matches!(parse_arpa(text), Err(Error::Arpa { .. })));
    }

    #[test]
    fn rejects_unknown_history_token() {
        let text = "\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-0.5\ta\n\n\\2-grams:\n-0.1\ta b\n\n\\end\\\n";
        let err = parse_arpa(text).unwrap_err();
        assert!(matches!(err, Error::Arpa { line: 9, .. }), "{err:?}");
    }

    #[test]
    fn adds_missing_specials() {
        let text = "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\ta\n\n\\end\\\n";
        let m = parse_arpa(text).unwrap();
        assert_eq!(m.entry_count(1), 4);
        assert_eq!(m.entry(&[m.vocab().id(UNK).unwrap()]).unwrap().logprob, LOG_ZERO);
    }
}
