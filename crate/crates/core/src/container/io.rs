//! `.ttz` archives: a zip of `meta.xml`, `content.xml` and `changes.xml`.
//!
//! Output is canonical: fixed entry order, fixed attribute order, fixed entry
//! timestamps and canonical number text, so equal documents give equal bytes.

use std::collections::HashSet;
use std::io::{Cursor, Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipArchive, ZipWriter};

use super::address::{CellAddress, CellRange};
use super::chain::verify_chain;
use super::model::{implied_cache, Cell, CellContent, ChangeKind, ChangeRecord, Document, Meta, Sheet};
use super::{number, ContainerError};

pub const META_ENTRY: &str = "meta.xml";
pub const CONTENT_ENTRY: &str = "content.xml";
pub const CHANGES_ENTRY: &str = "changes.xml";

const XML_DECL: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";

/// A loaded document plus non-fatal findings (unknown attributes, chain breaks).
#[derive(Debug, Clone)]
pub struct Loaded {
    pub document: Document,
    pub warnings: Vec<String>,
}

pub fn render_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.with_timezone(&Utc))
}

// ---------------------------------------------------------------------------
// writing

fn escape_into(out: &mut String, value: &str) {
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}

fn attr(out: &mut String, name: &str, value: &str) {
    out.push(' ');
    out.push_str(name);
    out.push_str("=\"");
    escape_into(out, value);
    out.push('"');
}

fn content_attrs(out: &mut String, content: &CellContent, cached: Option<f64>) {
    match content {
        CellContent::Empty => {}
        CellContent::Number(x) => attr(out, "number", &number::render(*x)),
        CellContent::Text(s) => attr(out, "text", s),
        CellContent::Formula(src) => {
            attr(out, "formula", src);
            if let Some(v) = cached {
                attr(out, "value", &number::render(v));
            }
        }
    }
}

fn write_meta(meta: &Meta) -> String {
    let mut out = String::from(XML_DECL);
    out.push_str("<meta");
    attr(&mut out, "creator", &meta.creator);
    attr(&mut out, "created", &render_timestamp(&meta.created));
    out.push_str("/>\n");
    out
}

fn write_content(doc: &Document) -> String {
    let mut out = String::from(XML_DECL);
    out.push_str("<document>\n");
    for sheet in doc.sheets() {
        out.push_str("<sheet");
        attr(&mut out, "name", sheet.name());
        out.push_str(">\n");
        for (addr, cell) in sheet.cells() {
            out.push_str("<cell");
            attr(&mut out, "addr", &addr.to_string());
            content_attrs(&mut out, &cell.content, cell.cached_value);
            out.push_str("/>\n");
        }
        out.push_str("</sheet>\n");
    }
    out.push_str("</document>\n");
    out
}

fn write_changes(doc: &Document) -> String {
    let mut out = String::from(XML_DECL);
    out.push_str("<changes>\n");
    for r in doc.changes() {
        out.push_str("<change");
        attr(&mut out, "id", &r.id.to_string());
        attr(&mut out, "author", &r.author);
        attr(&mut out, "date", &render_timestamp(&r.timestamp));
        attr(&mut out, "kind", r.kind.name());
        let sheet_attr = |out: &mut String| {
            if r.sheet != 0 {
                attr(out, "sheet", doc.sheets()[r.sheet].name());
            }
        };
        match r.kind {
            ChangeKind::Content { addr } => attr(&mut out, "addr", &doc.qualified(r.sheet, addr)),
            ChangeKind::Move { from, to } => {
                attr(&mut out, "from", &doc.qualified(r.sheet, from));
                attr(&mut out, "to", &doc.qualified(r.sheet, to));
            }
            ChangeKind::BlockMove { from, to } => {
                attr(&mut out, "from", &doc.qualified(r.sheet, from));
                attr(&mut out, "to", &doc.qualified(r.sheet, to));
            }
            ChangeKind::RowInsert(i)
            | ChangeKind::RowDelete(i)
            | ChangeKind::ColInsert(i)
            | ChangeKind::ColDelete(i) => {
                sheet_attr(&mut out);
                attr(&mut out, "index", &i.to_string());
            }
        }
        if r.kind.is_structural() {
            out.push_str("/>\n");
            continue;
        }
        out.push_str(">\n<previous");
        content_attrs(&mut out, &r.previous, r.prev_cached_value);
        out.push_str("/>\n<new");
        content_attrs(&mut out, &r.new, None);
        out.push_str("/>\n</change>\n");
    }
    out.push_str("</changes>\n");
    out
}

/// Checks every invariant a stored document must satisfy.
pub fn check_document(doc: &Document) -> Result<(), ContainerError> {
    doc.check_sheets()?;
    let bad = |m: String| ContainerError::InvariantViolation(m);
    super::model::check_xml_text(&doc.meta.creator)?;
    for sheet in doc.sheets() {
        for (addr, cell) in sheet.cells() {
            cell.content.validate()?;
            if cell.content.is_empty() {
                return Err(bad(format!("empty cell stored at {addr}")));
            }
            let ok = match (&cell.content, cell.cached_value) {
                (CellContent::Number(x), Some(v)) => x.to_bits() == v.to_bits(),
                (CellContent::Formula(_), Some(v)) => v.is_finite(),
                (CellContent::Formula(_), None) => true,
                (CellContent::Text(_), None) => true,
                _ => false,
            };
            if !ok {
                return Err(bad(format!("inconsistent cached value at {addr}")));
            }
        }
    }
    let mut last_ts: Option<DateTime<Utc>> = None;
    for (i, r) in doc.changes().iter().enumerate() {
        if r.id != i as u64 + 1 {
            return Err(bad(format!("record ids are not 1..n at position {}", i + 1)));
        }
        r.validate().map_err(|m| bad(format!("record {}: {m}", r.id)))?;
        super::model::check_xml_text(&r.author)?;
        if r.sheet >= doc.sheets().len() {
            return Err(bad(format!("record {} names a missing sheet", r.id)));
        }
        if last_ts.is_some_and(|t| r.timestamp < t) {
            return Err(bad(format!("record {} timestamp regresses", r.id)));
        }
        if implied_cache(&r.previous, r.prev_cached_value).map(f64::to_bits) != r.prev_cached_value.map(f64::to_bits) {
            return Err(bad(format!("record {} cached value does not fit its content", r.id)));
        }
        last_ts = Some(r.timestamp);
    }
    Ok(())
}

/// Serializes a document to canonical `.ttz` bytes.
pub fn save_document(doc: &Document) -> Result<Vec<u8>, ContainerError> {
    check_document(doc)?;
    let entries = [
        (META_ENTRY, write_meta(doc.meta())),
        (CONTENT_ENTRY, write_content(doc)),
        (CHANGES_ENTRY, write_changes(doc)),
    ];
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default());
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let io = |e: std::io::Error| ContainerError::Io(e.to_string());
    for (name, body) in entries {
        zip.start_file(name, options)
            .map_err(|e| ContainerError::Io(e.to_string()))?;
        zip.write_all(body.as_bytes()).map_err(io)?;
    }
    let cursor = zip.finish().map_err(|e| ContainerError::Io(e.to_string()))?;
    Ok(cursor.into_inner())
}

// ---------------------------------------------------------------------------
// reading

#[derive(Debug)]
struct Node {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    line: usize,
}

impl Node {
    fn get(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn line_at(text: &str, pos: usize) -> usize {
    text.as_bytes()[..pos.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

fn parse_tree(entry: &str, text: &str) -> Result<Node, ContainerError> {
    let malformed = |pos: usize, message: String| ContainerError::MalformedXml {
        entry: entry.to_string(),
        line: line_at(text, pos),
        message,
    };
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut stack: Vec<Node> = Vec::new();
    let mut root: Option<Node> = None;

    let open = |e: &BytesStart, pos: usize| -> Result<Node, ContainerError> {
        let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let mut attrs = Vec::new();
        for a in e.attributes() {
            let a = a.map_err(|err| malformed(pos, err.to_string()))?;
            let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
            let value = a
                .unescape_value()
                .map_err(|err| malformed(pos, err.to_string()))?
                .into_owned();
            if attrs.iter().any(|(k, _)| *k == key) {
                return Err(malformed(pos, format!("duplicate attribute `{key}`")));
            }
            attrs.push((key, value));
        }
        Ok(Node {
            name,
            attrs,
            children: Vec::new(),
            line: line_at(text, pos),
        })
    };

    loop {
        let pos = reader.buffer_position() as usize;
        // the event starts at the next tag, past any skipped whitespace
        let pos = text[pos..].find('<').map_or(pos, |o| pos + o);
        let event = reader
            .read_event()
            .map_err(|e| malformed(reader.error_position() as usize, e.to_string()))?;
        match event {
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
            Event::Start(e) => stack.push(open(&e, pos)?),
            Event::Empty(e) => {
                let node = open(&e, pos)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None if root.is_none() => root = Some(node),
                    None => return Err(malformed(pos, "multiple root elements".into())),
                }
            }
            Event::End(_) => {
                let node = stack.pop().ok_or_else(|| malformed(pos, "unbalanced end tag".into()))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None if root.is_none() => root = Some(node),
                    None => return Err(malformed(pos, "multiple root elements".into())),
                }
            }
            Event::Text(t) => {
                if !t.iter().all(u8::is_ascii_whitespace) {
                    return Err(malformed(pos, "unexpected text content".into()));
                }
            }
            Event::CData(_) => return Err(malformed(pos, "unexpected CDATA".into())),
            Event::Eof => break,
        }
    }
    if !stack.is_empty() {
        return Err(malformed(text.len(), "unclosed element".into()));
    }
    root.ok_or_else(|| malformed(0, "no root element".into()))
}

struct EntryReader<'a> {
    entry: &'static str,
    warnings: &'a mut Vec<String>,
}

impl EntryReader<'_> {
    fn malformed(&self, node: &Node, message: impl Into<String>) -> ContainerError {
        ContainerError::MalformedXml {
            entry: self.entry.to_string(),
            line: node.line,
            message: message.into(),
        }
    }

    fn expect_name(&self, node: &Node, name: &str) -> Result<(), ContainerError> {
        if node.name == name {
            Ok(())
        } else {
            Err(self.malformed(node, format!("expected <{name}>, found <{}>", node.name)))
        }
    }

    fn warn_unknown(&mut self, node: &Node, known: &[&str]) {
        for (k, _) in &node.attrs {
            if !known.contains(&k.as_str()) {
                self.warnings.push(format!(
                    "{} line {}: ignored unknown attribute `{}` on <{}>",
                    self.entry, node.line, k, node.name
                ));
            }
        }
    }

    fn required<'n>(&self, node: &'n Node, key: &str) -> Result<&'n str, ContainerError> {
        node.get(key)
            .ok_or_else(|| self.malformed(node, format!("<{}> lacks `{key}`", node.name)))
    }

    fn number(&self, node: &Node, key: &str) -> Result<Option<f64>, ContainerError> {
        node.get(key)
            .map(|v| {
                number::parse(v).ok_or_else(|| self.malformed(node, format!("`{key}` is not a finite number: {v}")))
            })
            .transpose()
    }

    /// Reads `formula|number|text` plus optional `value`.
    fn content(&self, node: &Node) -> Result<(CellContent, Option<f64>), ContainerError> {
        let present: Vec<_> = ["formula", "number", "text"]
            .into_iter()
            .filter(|k| node.get(k).is_some())
            .collect();
        if present.len() > 1 {
            return Err(self.malformed(node, "more than one of formula|number|text"));
        }
        let cached = self.number(node, "value")?;
        let content = match present.first() {
            None => CellContent::Empty,
            Some(&"number") => CellContent::Number(self.number(node, "number")?.expect("present")),
            Some(&"text") => CellContent::Text(node.get("text").expect("present").to_string()),
            Some(_) => CellContent::Formula(node.get("formula").expect("present").to_string()),
        };
        if cached.is_some() && !content.is_formula() {
            return Err(self.malformed(node, "`value` is only allowed with `formula`"));
        }
        content.validate().map_err(|e| self.malformed(node, e.to_string()))?;
        Ok((content, cached))
    }
}

fn read_entry(archive: &mut ZipArchive<Cursor<&[u8]>>, name: &str) -> Result<String, ContainerError> {
    let mut file = archive
        .by_name(name)
        .map_err(|_| ContainerError::MissingEntry(name.to_string()))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)
        .map_err(|e| ContainerError::Io(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| ContainerError::MalformedXml {
        entry: name.to_string(),
        line: 0,
        message: format!("not UTF-8: {e}"),
    })
}

/// Resolves `Sheet.A1` or `A1` (first sheet) into a sheet index and address.
fn split_qualified<'s>(sheets: &[Sheet], text: &'s str) -> Option<(usize, &'s str)> {
    match text.rsplit_once('.') {
        Some((name, rest)) => sheets.iter().position(|s| s.name() == name).map(|i| (i, rest)),
        None => Some((0, text)),
    }
}

/// Parses `.ttz` bytes.
pub fn load_document(bytes: &[u8]) -> Result<Loaded, ContainerError> {
    let mut archive = ZipArchive::new(Cursor::new(bytes)).map_err(|e| ContainerError::NotZip(e.to_string()))?;
    let meta_text = read_entry(&mut archive, META_ENTRY)?;
    let content_text = read_entry(&mut archive, CONTENT_ENTRY)?;
    let changes_text = read_entry(&mut archive, CHANGES_ENTRY)?;
    let mut warnings = Vec::new();

    // meta.xml
    let root = parse_tree(META_ENTRY, &meta_text)?;
    let mut rd = EntryReader {
        entry: META_ENTRY,
        warnings: &mut warnings,
    };
    rd.expect_name(&root, "meta")?;
    rd.warn_unknown(&root, &["creator", "created"]);
    let created_text = rd.required(&root, "created")?;
    let meta = Meta {
        creator: rd.required(&root, "creator")?.to_string(),
        created: parse_timestamp(created_text)
            .ok_or_else(|| rd.malformed(&root, format!("bad timestamp `{created_text}`")))?,
    };

    // content.xml
    let root = parse_tree(CONTENT_ENTRY, &content_text)?;
    let mut rd = EntryReader {
        entry: CONTENT_ENTRY,
        warnings: &mut warnings,
    };
    rd.expect_name(&root, "document")?;
    rd.warn_unknown(&root, &[]);
    let mut sheets = Vec::new();
    for sheet_node in &root.children {
        rd.expect_name(sheet_node, "sheet")?;
        rd.warn_unknown(sheet_node, &["name"]);
        let mut sheet = Sheet::new(rd.required(sheet_node, "name")?);
        let mut seen = HashSet::new();
        for cell_node in &sheet_node.children {
            rd.expect_name(cell_node, "cell")?;
            rd.warn_unknown(cell_node, &["addr", "formula", "number", "text", "value"]);
            let addr_text = rd.required(cell_node, "addr")?;
            let addr = CellAddress::parse(addr_text)
                .map_err(|e| rd.malformed(cell_node, e.to_string()))?
                .unanchored();
            if !seen.insert(addr) {
                return Err(rd.malformed(cell_node, format!("duplicate cell {addr}")));
            }
            let (content, cached) = rd.content(cell_node)?;
            if content.is_empty() {
                return Err(rd.malformed(cell_node, "cell without content"));
            }
            sheet.insert_cell(
                addr,
                Cell {
                    cached_value: implied_cache(&content, cached),
                    content,
                },
            );
        }
        sheets.push(sheet);
    }
    let mut document = Document::with_sheets(meta, sheets).map_err(|e| ContainerError::MalformedXml {
        entry: CONTENT_ENTRY.to_string(),
        line: root.line,
        message: e.to_string(),
    })?;

    // changes.xml
    let root = parse_tree(CHANGES_ENTRY, &changes_text)?;
    let mut rd = EntryReader {
        entry: CHANGES_ENTRY,
        warnings: &mut warnings,
    };
    rd.expect_name(&root, "changes")?;
    rd.warn_unknown(&root, &[]);
    let mut last_ts: Option<DateTime<Utc>> = None;
    for node in &root.children {
        rd.expect_name(node, "change")?;
        let id_text = rd.required(node, "id")?;
        let id: u64 = id_text
            .parse()
            .map_err(|_| rd.malformed(node, format!("bad id `{id_text}`")))?;
        let invalid = |reason: &str| ContainerError::InvalidRecord {
            id,
            reason: reason.to_string(),
        };
        let expected = document.last_change_id() + 1;
        if id != expected {
            return Err(invalid(if id > expected {
                "gap in id sequence"
            } else {
                "id sequence not ascending"
            }));
        }
        let author = rd.required(node, "author")?.to_string();
        let timestamp = parse_timestamp(rd.required(node, "date")?).ok_or_else(|| invalid("bad date"))?;
        if last_ts.is_some_and(|t| timestamp < t) {
            return Err(invalid("timestamp regression"));
        }
        last_ts = Some(timestamp);

        let sheets = document.sheets();
        let addr_of = |key: &str| -> Result<(usize, CellAddress), ContainerError> {
            let text = node.get(key).ok_or_else(|| invalid(&format!("missing `{key}`")))?;
            let (sheet, rest) = split_qualified(sheets, text).ok_or_else(|| invalid("unknown sheet"))?;
            let addr = CellAddress::parse(rest).map_err(|e| invalid(&e.to_string()))?;
            Ok((sheet, addr.unanchored()))
        };
        let index = || -> Result<u32, ContainerError> {
            node.get("index")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| invalid("missing or bad `index`"))
        };
        let sheet_attr = || -> Result<usize, ContainerError> {
            match node.get("sheet") {
                None => Ok(0),
                Some(name) => sheets
                    .iter()
                    .position(|s| s.name() == name)
                    .ok_or_else(|| invalid("unknown sheet")),
            }
        };
        let kind_name = rd.required(node, "kind")?;
        let (sheet, kind, known): (usize, ChangeKind, &[&str]) = match kind_name {
            "content" => {
                let (sheet, addr) = addr_of("addr")?;
                (sheet, ChangeKind::Content { addr }, &["addr"])
            }
            "move" => {
                let (sheet, from) = addr_of("from")?;
                let (to_sheet, to) = addr_of("to")?;
                if sheet != to_sheet {
                    return Err(invalid("move across sheets"));
                }
                (sheet, ChangeKind::Move { from, to }, &["from", "to"])
            }
            "block-move" => {
                let text = node.get("from").ok_or_else(|| invalid("missing `from`"))?;
                let (sheet, rest) = split_qualified(sheets, text).ok_or_else(|| invalid("unknown sheet"))?;
                let range = CellRange::parse(rest).map_err(|e| invalid(&e.to_string()))?;
                let from = CellRange::new(range.start.unanchored(), range.end.unanchored());
                let (to_sheet, to) = addr_of("to")?;
                if sheet != to_sheet {
                    return Err(invalid("move across sheets"));
                }
                (sheet, ChangeKind::BlockMove { from, to }, &["from", "to"])
            }
            "row-insert" => (sheet_attr()?, ChangeKind::RowInsert(index()?), &["index", "sheet"]),
            "row-delete" => (sheet_attr()?, ChangeKind::RowDelete(index()?), &["index", "sheet"]),
            "col-insert" => (sheet_attr()?, ChangeKind::ColInsert(index()?), &["index", "sheet"]),
            "col-delete" => (sheet_attr()?, ChangeKind::ColDelete(index()?), &["index", "sheet"]),
            other => return Err(invalid(&format!("unknown kind `{other}`"))),
        };
        let mut known_attrs = vec!["id", "author", "date", "kind"];
        known_attrs.extend_from_slice(known);
        rd.warn_unknown(node, &known_attrs);

        let (previous, new, prev_cached_value) = if kind.is_structural() {
            if !node.children.is_empty() {
                return Err(invalid("structural record with content children"));
            }
            (CellContent::Empty, CellContent::Empty, None)
        } else {
            let [prev_node, new_node] = node.children.as_slice() else {
                return Err(invalid("expected <previous/> and <new/>"));
            };
            rd.expect_name(prev_node, "previous")?;
            rd.expect_name(new_node, "new")?;
            rd.warn_unknown(prev_node, &["formula", "number", "text", "value"]);
            rd.warn_unknown(new_node, &["formula", "number", "text"]);
            let (previous, cached) = rd.content(prev_node)?;
            let (new, new_cached) = rd.content(new_node)?;
            if new_cached.is_some() {
                return Err(invalid("`value` is only recorded for the previous content"));
            }
            let cached = implied_cache(&previous, cached);
            (previous, new, cached)
        };
        let record = ChangeRecord {
            id,
            author,
            timestamp,
            sheet,
            kind,
            previous,
            new,
            prev_cached_value,
        };
        record.validate().map_err(|reason| invalid(&reason))?;
        document.changes.push(record);
    }

    for v in verify_chain(&document) {
        warnings.push(format!("chain violation: {v}"));
    }
    Ok(Loaded { document, warnings })
}
