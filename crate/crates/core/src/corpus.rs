//! cQA thread data model and its two on-disk forms.
//!
//! The XML reader accepts the SemEval CQA-QL layouts: the 2015 shape
//! (`<Question>` elements with nested `<Comment>` children) and the 2016
//! shape (`<Thread>` holding a `<RelQuestion>` followed by sibling
//! `<RelComment>` elements), plus a plain lowercase variant
//! (`<question id=.. category=.. date=.. author=..>` / `<comment ..
//! relevance=..>` with `<subject>` and `<body>` children). Element and
//! attribute names are matched case-insensitively. Attributes and child
//! elements the reader does not interpret are kept in [`Attrs`].
//!
//! The record format is one JSON object per line:
//!
//! ```text
//! {"question":{"id":..,"subject":..,"body":..,"category":..,"author_id":..,"date":..},
//!  "comments":[{"id":..,"author_id":..,"date":..,"body":..,"gold_label":"Good"}]}
//! ```
//!
//! An optional `attrs` object on either level carries the preserved extras.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque attribute bag; keys keep their original spelling.
pub type Attrs = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GoldLabel {
    Good,
    PotentiallyUseful,
    Bad,
}

impl GoldLabel {
    pub fn binary(self) -> BinaryLabel {
        match self {
            GoldLabel::Good => BinaryLabel::Good,
            GoldLabel::PotentiallyUseful | GoldLabel::Bad => BinaryLabel::Bad,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GoldLabel::Good => "Good",
            GoldLabel::PotentiallyUseful => "PotentiallyUseful",
            GoldLabel::Bad => "Bad",
        }
    }
}

impl FromStr for GoldLabel {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "good" => Ok(GoldLabel::Good),
            // "Potential" is the 2015 spelling of the same class.
            "potentiallyuseful" | "potential" => Ok(GoldLabel::PotentiallyUseful),
            "bad" => Ok(GoldLabel::Bad),
            _ => Err(()),
        }
    }
}

impl fmt::Display for GoldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryLabel {
    Good,
    Bad,
}

impl BinaryLabel {
    pub fn is_good(self) -> bool {
        self == BinaryLabel::Good
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Question {
    pub id: String,
    pub subject: String,
    pub body: String,
    pub category: String,
    pub author_id: String,
    pub date: String,
    pub attrs: Attrs,
}

impl Question {
    /// Subject and body joined by a single space, skipping an empty subject.
    pub fn full_text(&self) -> String {
        if self.subject.trim().is_empty() {
            self.body.clone()
        } else {
            format!("{} {}", self.subject, self.body)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comment {
    pub id: String,
    /// 1-based index in document order.
    pub position: usize,
    pub author_id: String,
    pub date: String,
    pub body: String,
    pub gold_label: GoldLabel,
    pub attrs: Attrs,
}

impl Comment {
    pub fn binary_label(&self) -> BinaryLabel {
        self.gold_label.binary()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thread {
    pub question: Question,
    pub comments: Vec<Comment>,
}

impl Thread {
    /// Builds a thread, assigning positions 1..n in the given order.
    pub fn new(question: Question, mut comments: Vec<Comment>) -> Result<Self> {
        if question.id.trim().is_empty() {
            return Err(Error::InvalidQuestion {
                id: question.id,
                reason: "empty id".into(),
            });
        }
        if question.body.trim().is_empty() && question.subject.trim().is_empty() {
            return Err(Error::InvalidQuestion {
                id: question.id,
                reason: "empty subject and body".into(),
            });
        }
        if comments.is_empty() {
            return Err(Error::EmptyThread(question.id));
        }
        for (i, c) in comments.iter_mut().enumerate() {
            c.position = i + 1;
        }
        Ok(Thread { question, comments })
    }

    pub fn id(&self) -> &str {
        &self.question.id
    }

    pub fn good_count(&self) -> usize {
        self.comments
            .iter()
            .filter(|c| c.binary_label().is_good())
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitName {
    TrainPart1,
    TrainPart2,
    Dev,
    Test,
    Custom(String),
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub threads: Vec<Thread>,
}

impl DatasetSplit {
    pub fn new(name: SplitName, threads: Vec<Thread>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &threads {
            if !seen.insert(t.id()) {
                return Err(Error::Data(format!(
                    "duplicate question id {} in split",
                    t.id()
                )));
            }
        }
        Ok(DatasetSplit { name, threads })
    }
}

// ---------------------------------------------------------------------------
// XML

fn is_thread_elem(name: &str) -> bool {
    name == "thread"
}

fn is_question_elem(name: &str) -> bool {
    matches!(name, "question" | "relquestion")
}

fn is_comment_elem(name: &str) -> bool {
    matches!(name, "comment" | "relcomment")
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Field {
    QSubject,
    QBody,
    CBody,
    Extra,
}

fn question_child(name: &str) -> Field {
    match name {
        "subject" | "qsubject" | "relqsubject" => Field::QSubject,
        "body" | "qbody" | "relqbody" => Field::QBody,
        _ => Field::Extra,
    }
}

fn comment_child(name: &str) -> Field {
    match name {
        "body" | "text" | "cbody" | "relctext" => Field::CBody,
        _ => Field::Extra,
    }
}

#[derive(Default)]
struct PendingComment {
    id: String,
    author_id: String,
    date: String,
    body: String,
    relevance: Option<String>,
    attrs: Attrs,
}

struct PendingThread {
    /// Depth of the element that closes the thread.
    depth: usize,
    question: Question,
    thread_attrs: Attrs,
    comments: Vec<Comment>,
}

struct Capture {
    field: Field,
    key: String,
    depth: usize,
    buf: String,
}

struct XmlState {
    depth: usize,
    thread: Option<PendingThread>,
    in_question: Option<usize>,
    comment: Option<(usize, PendingComment)>,
    capture: Option<Capture>,
    out: Vec<Thread>,
}

fn local_lower(e: &BytesStart<'_>) -> String {
    let name = e.name();
    let raw: &str = name.as_ref();
    let local = raw.rsplit(':').next().unwrap_or(raw);
    local.to_ascii_lowercase()
}

fn read_attrs(e: &BytesStart<'_>) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for a in e.attributes() {
        let a = a.map_err(|err| err.to_string())?;
        let key: &str = a.key.as_ref();
        let value = a
            .normalized_value(quick_xml::XmlVersion::Implicit1_0)
            .map_err(|err| err.to_string())?;
        out.push((key.to_string(), value.into_owned()));
    }
    Ok(out)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}

impl XmlState {
    fn start(&mut self, e: &BytesStart<'_>, empty: bool) -> std::result::Result<(), String> {
        self.depth += 1;
        let depth = self.depth;
        if self.capture.is_some() {
            // Nested markup inside a captured field contributes its text only.
            if empty {
                self.depth -= 1;
            }
            return Ok(());
        }
        let name = local_lower(e);
        if is_thread_elem(&name) && self.thread.is_none() {
            let mut thread_attrs = Attrs::new();
            for (k, v) in read_attrs(e)? {
                thread_attrs.insert(format!("thread.{k}"), v);
            }
            self.thread = Some(PendingThread {
                depth,
                question: Question::default(),
                thread_attrs,
                comments: Vec::new(),
            });
        } else if is_question_elem(&name) && self.in_question.is_none() && self.comment.is_none()
        {
            let thread = self.thread.get_or_insert_with(|| PendingThread {
                depth,
                question: Question::default(),
                thread_attrs: Attrs::new(),
                comments: Vec::new(),
            });
            let q = &mut thread.question;
            for (k, v) in read_attrs(e)? {
                match k.to_ascii_lowercase().as_str() {
                    "id" | "qid" | "relq_id" => q.id = v,
                    "category" | "qcategory" | "relq_category" => q.category = v,
                    "date" | "qdate" | "relq_date" => q.date = v,
                    "author" | "author_id" | "userid" | "quserid" | "relq_userid" => {
                        q.author_id = v
                    }
                    _ => {
                        q.attrs.insert(k, v);
                    }
                }
            }
            self.in_question = Some(depth);
        } else if is_comment_elem(&name) && self.comment.is_none() {
            if self.thread.is_none() {
                return Err("comment element outside of a question".into());
            }
            let mut c = PendingComment::default();
            for (k, v) in read_attrs(e)? {
                match k.to_ascii_lowercase().as_str() {
                    "id" | "cid" | "relc_id" => c.id = v,
                    "date" | "cdate" | "relc_date" => c.date = v,
                    "author" | "author_id" | "userid" | "cuserid" | "relc_userid" => {
                        c.author_id = v
                    }
                    "relevance" | "cgold" | "relc_relevance2relq" => c.relevance = Some(v),
                    _ => {
                        c.attrs.insert(k, v);
                    }
                }
            }
            self.comment = Some((depth, c));
        } else if self.comment.is_some() || self.in_question.is_some() {
            let field = if self.comment.is_some() {
                comment_child(&name)
            } else {
                question_child(&name)
            };
            let qname = e.name();
            let key: &str = qname.as_ref();
            self.capture = Some(Capture {
                field,
                key: key.to_string(),
                depth,
                buf: String::new(),
            });
        }
        if empty {
            self.end().map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    fn text(&mut self, s: &str) {
        if let Some(cap) = &mut self.capture {
            cap.buf.push_str(s);
        }
    }

    fn end(&mut self) -> Result<()> {
        let depth = self.depth;
        self.depth = self.depth.saturating_sub(1);

        if let Some(cap) = &self.capture {
            if cap.depth != depth {
                return Ok(());
            }
            let cap = self.capture.take().expect("capture present");
            let value = cap.buf.trim().to_string();
            if let Some((_, c)) = &mut self.comment {
                match cap.field {
                    Field::CBody => c.body = value,
                    _ => {
                        c.attrs.insert(format!("/{}", cap.key), value);
                    }
                }
            } else if let Some(t) = &mut self.thread {
                let q = &mut t.question;
                match cap.field {
                    Field::QSubject => q.subject = value,
                    Field::QBody => q.body = value,
                    _ => {
                        q.attrs.insert(format!("/{}", cap.key), value);
                    }
                }
            }
            return Ok(());
        }

        if matches!(&self.comment, Some((d, _)) if *d == depth) {
            let (_, c) = self.comment.take().expect("comment present");
            let raw = c.relevance.clone().unwrap_or_default();
            let gold_label = raw.parse::<GoldLabel>().map_err(|_| Error::UnknownLabel {
                comment_id: c.id.clone(),
                value: raw,
            })?;
            let thread = self.thread.as_mut().expect("comment inside thread");
            thread.comments.push(Comment {
                id: c.id,
                position: 0,
                author_id: c.author_id,
                date: c.date,
                body: c.body,
                gold_label,
                attrs: c.attrs,
            });
        }
        if self.in_question == Some(depth) {
            self.in_question = None;
        }
        if matches!(&self.thread, Some(t) if t.depth == depth) {
            let t = self.thread.take().expect("thread present");
            let mut question = t.question;
            question.attrs.extend(t.thread_attrs);
            self.out.push(Thread::new(question, t.comments)?);
        }
        Ok(())
    }
}

/// Parses SemEval-style XML into threads, in document order.
pub fn parse_xml<R: Read>(mut input: R) -> Result<Vec<Thread>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|e| {
        let (line, column) = line_col(
            &String::from_utf8_lossy(e.as_bytes()),
            e.utf8_error().valid_up_to(),
        );
        Error::Xml {
            line,
            column,
            message: "invalid UTF-8".into(),
        }
    })?;
    parse_xml_str(&text)
}

pub fn parse_xml_str(text: &str) -> Result<Vec<Thread>> {
    let mut reader = Reader::from_str(text);
    let mut state = XmlState {
        depth: 0,
        thread: None,
        in_question: None,
        comment: None,
        capture: None,
        out: Vec::new(),
    };
    let xml_err = |reader: &Reader<&[u8]>, message: String| {
        let (line, column) = line_col(text, reader.error_position() as usize);
        Error::Xml {
            line,
            column,
            message,
        }
    };
    loop {
        let event = reader
            .read_event()
            .map_err(|e| xml_err(&reader, e.to_string()))?;
        let res: std::result::Result<(), String> = match event {
            Event::Start(e) => state.start(&e, false),
            Event::Empty(e) => state.start(&e, true),
            Event::End(_) => {
                state.end()?;
                Ok(())
            }
            Event::Text(t) => {
                state.text(&t.xml10_content());
                Ok(())
            }
            Event::CData(t) => {
                state.text(&t.into_inner());
                Ok(())
            }
            Event::GeneralRef(r) => match r.resolve_char_ref() {
                Ok(Some(ch)) => {
                    state.text(ch.encode_utf8(&mut [0; 4]));
                    Ok(())
                }
                Ok(None) => {
                    let name = r.into_inner();
                    match quick_xml::escape::resolve_predefined_entity(&name) {
                        Some(s) => {
                            state.text(s);
                            Ok(())
                        }
                        None => Err(format!("unknown entity &{name};")),
                    }
                }
                Err(e) => Err(e.to_string()),
            },
            Event::Eof => break,
            _ => Ok(()),
        };
        if let Err(message) = res {
            let (line, column) = line_col(text, reader.buffer_position() as usize);
            return Err(Error::Xml {
                line,
                column,
                message,
            });
        }
    }
    if state.thread.is_some() || state.depth != 0 {
        let (line, column) = line_col(text, text.len());
        return Err(Error::Xml {
            line,
            column,
            message: "unexpected end of input".into(),
        });
    }
    Ok(state.out)
}

// ---------------------------------------------------------------------------
// Records

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuestionRecord {
    id: String,
    subject: String,
    body: String,
    category: String,
    author_id: String,
    date: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    attrs: Attrs,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommentRecord {
    id: String,
    author_id: String,
    date: String,
    body: String,
    gold_label: GoldLabel,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    attrs: Attrs,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThreadRecord {
    question: QuestionRecord,
    comments: Vec<CommentRecord>,
}

/// Reads one thread per line. Blank lines are skipped.
pub fn parse_records<R: BufRead>(input: R) -> Result<Vec<Thread>> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ThreadRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        let record_err = |message: String| Error::Record {
            line: line_no,
            message,
        };
        let mut ids = HashSet::new();
        for c in &rec.comments {
            if !ids.insert(c.id.as_str()) {
                return Err(record_err(format!("duplicate comment id {}", c.id)));
            }
        }
        let q = rec.question;
        let question = Question {
            id: q.id,
            subject: q.subject,
            body: q.body,
            category: q.category,
            author_id: q.author_id,
            date: q.date,
            attrs: q.attrs,
        };
        let comments = rec
            .comments
            .into_iter()
            .map(|c| Comment {
                id: c.id,
                position: 0,
                author_id: c.author_id,
                date: c.date,
                body: c.body,
                gold_label: c.gold_label,
                attrs: c.attrs,
            })
            .collect();
        out.push(Thread::new(question, comments).map_err(|e| record_err(e.to_string()))?);
    }
    Ok(out)
}

pub fn write_records<W: Write>(threads: &[Thread], mut out: W) -> Result<()> {
    for t in threads {
        let q = &t.question;
        let rec = ThreadRecord {
            question: QuestionRecord {
                id: q.id.clone(),
                subject: q.subject.clone(),
                body: q.body.clone(),
                category: q.category.clone(),
                author_id: q.author_id.clone(),
                date: q.date.clone(),
                attrs: q.attrs.clone(),
            },
            comments: t
                .comments
                .iter()
                .map(|c| CommentRecord {
                    id: c.id.clone(),
                    author_id: c.author_id.clone(),
                    date: c.date.clone(),
                    body: c.body.clone(),
                    gold_label: c.gold_label,
                    attrs: c.attrs.clone(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn records_to_bytes(threads: &[Thread]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_records(threads, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Loads threads from a path, choosing the reader by content: XML when the
/// first non-blank byte is `<`, records otherwise.
pub fn load_threads(path: &std::path::Path) -> Result<Vec<Thread>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    let wrap = |e: Error| match e {
        Error::Io { .. } => e,
        other => Error::Data(format!("{}: {other}", path.display())),
    };
    if first == Some(&b'<') {
        parse_xml(bytes.as_slice()).map_err(wrap)
    } else {
        parse_records(bytes.as_slice()).map_err(wrap)
    }
}
