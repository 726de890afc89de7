//! ISO 10303-21 ("Part 21") exchange files: an entity graph with typed
//! argument trees, a parser, and a writer.
//!
//! Parsing keeps numeric literals as source text alongside their value so a
//! parse/serialize round trip reproduces every number exactly. Strings are
//! opaque: only the `''` quote escape is decoded, control directives such as
//! `\X2\...\X0\` are kept verbatim.

mod lexer;
mod parser;
mod writer;

use std::fmt;
use std::ops::Range;

use indexmap::IndexMap;
use thiserror::Error;

pub use parser::parse_step;
pub use writer::{format_real, serialize_step};

/// Instance identifier, the `n` in `#n`.
pub type EntityId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("syntax error at line {line}, byte {offset}: {message}")]
    Syntax {
        offset: usize,
        line: usize,
        message: String,
    },
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error("duplicate entity id #{0}")]
    DuplicateId(EntityId),
}

/// One node of an argument list.
#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Integer { text: String, value: i64 },
    Real { text: String, value: f64 },
    /// Decoded string content (`''` already collapsed to `'`).
    String(String),
    /// Hex digits of a `"..."` binary literal.
    Binary(String),
    /// `.TOKEN.`, stored without the dots.
    Enum(String),
    Ref(EntityId),
    /// `*`: derived attribute.
    Star,
    /// `$`: unset attribute.
    Dollar,
    List(Vec<Arg>),
    /// Typed parameter such as `LENGTH_MEASURE(1.E-07)`.
    Typed { keyword: String, arg: Box<Arg> },
}

impl Arg {
    pub fn integer(value: i64) -> Self {
        Arg::Integer {
            text: value.to_string(),
            value,
        }
    }

    pub fn real(value: f64) -> Self {
        Arg::Real {
            text: format_real(value),
            value,
        }
    }

    pub fn string(s: impl Into<String>) -> Self {
        Arg::String(s.into())
    }

    pub fn enumeration(s: impl Into<String>) -> Self {
        Arg::Enum(s.into())
    }

    pub fn as_ref_id(&self) -> Option<EntityId> {
        match self {
            Arg::Ref(id) => Some(*id),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Arg]> {
        match self {
            Arg::List(items) => Some(items),
            _ => None,
        }
    }

    /// `.T.` / `.F.` as a boolean.
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Arg::Enum(e) if e == "T" => Some(true),
            Arg::Enum(e) if e == "F" => Some(false),
            _ => None,
        }
    }

    /// Calls `f` for every entity reference in this subtree, depth first.
    pub fn visit_refs(&self, f: &mut impl FnMut(EntityId)) {
        match self {
            Arg::Ref(id) => f(*id),
            Arg::List(items) => items.iter().for_each(|a| a.visit_refs(f)),
            Arg::Typed { arg, .. } => arg.visit_refs(f),
            _ => {}
        }
    }

    /// Rewrites every entity reference in this subtree.
    pub fn map_refs(&mut self, f: &mut impl FnMut(EntityId) -> EntityId) {
        match self {
            Arg::Ref(id) => *id = f(*id),
            Arg::List(items) => items.iter_mut().for_each(|a| a.map_refs(f)),
            Arg::Typed { arg, .. } => arg.map_refs(f),
            _ => {}
        }
    }
}

/// A keyword applied to an argument list. Used for simple entities, the
/// parts of complex entities, and header records.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub keyword: String,
    pub args: Vec<Arg>,
}

impl Record {
    pub fn new(keyword: impl Into<String>, args: Vec<Arg>) -> Self {
        Record {
            keyword: keyword.into(),
            args,
        }
    }

    /// First top-level argument that is an entity reference.
    pub fn first_ref(&self) -> Option<EntityId> {
        self.args.iter().find_map(Arg::as_ref_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EntityBody {
    Simple(Record),
    /// External-mapping form `(KW1(...) KW2(...) ...)`, parts in source order.
    Complex(Vec<Record>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: EntityId,
    pub body: EntityBody,
    /// Byte range of the `#n=...;` instance in the source text. Empty for
    /// entities built in memory.
    pub span: Range<usize>,
}

impl Entity {
    pub fn simple(id: EntityId, keyword: impl Into<String>, args: Vec<Arg>) -> Self {
        Entity {
            id,
            body: EntityBody::Simple(Record::new(keyword, args)),
            span: 0..0,
        }
    }

    pub fn complex(id: EntityId, parts: Vec<Record>) -> Self {
        Entity {
            id,
            body: EntityBody::Complex(parts),
            span: 0..0,
        }
    }

    pub fn records(&self) -> &[Record] {
        match &self.body {
            EntityBody::Simple(r) => std::slice::from_ref(r),
            EntityBody::Complex(parts) => parts,
        }
    }

    pub fn records_mut(&mut self) -> &mut [Record] {
        match &mut self.body {
            EntityBody::Simple(r) => std::slice::from_mut(r),
            EntityBody::Complex(parts) => parts,
        }
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.records().iter().map(|r| r.keyword.as_str())
    }

    pub fn has_keyword(&self, keyword: &str) -> bool {
        self.keywords().any(|k| k == keyword)
    }

    /// The record carrying `keyword`, if this entity has it.
    pub fn record(&self, keyword: &str) -> Option<&Record> {
        self.records().iter().find(|r| r.keyword == keyword)
    }

    /// For simple entities, the keyword; for complex ones, `None`.
    pub fn simple_keyword(&self) -> Option<&str> {
        match &self.body {
            EntityBody::Simple(r) => Some(&r.keyword),
            EntityBody::Complex(_) => None,
        }
    }

    pub fn visit_refs(&self, f: &mut impl FnMut(EntityId)) {
        for r in self.records() {
            r.args.iter().for_each(|a| a.visit_refs(f));
        }
    }

    pub fn refs(&self) -> Vec<EntityId> {
        let mut out = Vec::new();
        self.visit_refs(&mut |id| out.push(id));
        out
    }
}

/// Id-keyed DATA section, iterated in source order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityGraph {
    entities: IndexMap<EntityId, Entity>,
}

impl EntityGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entity: Entity) -> Result<(), StepError> {
        if self.entities.contains_key(&entity.id) {
            return Err(StepError::DuplicateId(entity.id));
        }
        self.entities.insert(entity.id, entity);
        Ok(())
    }

    pub fn get(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn get_mut(&mut self, id: EntityId) -> Option<&mut Entity> {
        self.entities.get_mut(&id)
    }

    pub fn contains(&self, id: EntityId) -> bool {
        self.entities.contains_key(&id)
    }

    /// Removes an entity, keeping the order of the rest.
    pub fn remove(&mut self, id: EntityId) -> Option<Entity> {
        self.entities.shift_remove(&id)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Entity> {
        self.entities.values_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.entities.keys().copied()
    }

    /// Entities having `keyword` as their keyword or as one complex part.
    pub fn with_keyword<'a>(&'a self, keyword: &'a str) -> impl Iterator<Item = &'a Entity> + 'a {
        self.iter().filter(move |e| e.has_keyword(keyword))
    }

    /// Same ids and bodies, ignoring source spans and entity order.
    pub fn structurally_eq(&self, other: &EntityGraph) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .all(|e| other.get(e.id).is_some_and(|o| o.body == e.body))
    }
}

impl FromIterator<Entity> for EntityGraph {
    /// Later duplicates replace earlier ones; use [`EntityGraph::insert`] to
    /// detect them.
    fn from_iter<T: IntoIterator<Item = Entity>>(iter: T) -> Self {
        EntityGraph {
            entities: iter.into_iter().map(|e| (e.id, e)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepFile {
    pub header: Vec<Record>,
    pub data: EntityGraph,
    /// Non-blank lines of the whole source text.
    pub line_count: usize,
}

impl StepFile {
    /// Builds a file from a graph; `line_count` is taken from its serialized
    /// form.
    pub fn from_graph(header: Vec<Record>, data: EntityGraph) -> Self {
        let mut file = StepFile {
            header,
            data,
            line_count: 0,
        };
        file.line_count = count_content_lines(&serialize_step(&file));
        file
    }

    pub fn structurally_eq(&self, other: &StepFile) -> bool {
        self.header == other.header && self.data.structurally_eq(&other.data)
    }
}

/// Number of lines that contain something other than whitespace.
pub fn count_content_lines(text: &str) -> usize {
    text.lines().filter(|l| !l.trim().is_empty()).count()
}

/// Every `(referencing id, missing id)` pair whose target is absent from
/// the graph, in source order.
pub fn resolve_refs(file: &StepFile) -> Vec<(EntityId, EntityId)> {
    let graph = &file.data;
    let mut missing = Vec::new();
    for entity in graph.iter() {
        entity.visit_refs(&mut |target| {
            if !graph.contains(target) {
                missing.push((entity.id, target));
            }
        });
    }
    missing
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writer::write_arg(f, self)
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writer::write_record(f, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> StepFile {
        let text = "ISO-10303-21;\nHEADER;\nENDSEC;\nDATA;\n\
                    #1=CARTESIAN_POINT('',(0.,0.,0.));\n\
                    #2=VERTEX_POINT('',#1);\n\
                    ENDSEC;\nEND-ISO-10303-21;\n";
        parse_step(text).unwrap()
    }

    #[test]
    fn resolved_graph_has_no_missing_refs() {
        assert!(resolve_refs(&tiny()).is_empty());
    }

    #[test]
    fn dangling_ref_is_reported() {
        let mut file = tiny();
        file.data
            .insert(Entity::simple(3, "VERTEX_POINT", vec![Arg::string(""), Arg::Ref(99)]))
            .unwrap();
        assert_eq!(resolve_refs(&file), vec![(3, 99)]);
    }

    #[test]
    fn duplicate_insert_is_rejected() {
        let mut g = EntityGraph::new();
        g.insert(Entity::simple(1, "A", vec![])).unwrap();
        assert_eq!(
            g.insert(Entity::simple(1, "B", vec![])),
            Err(StepError::DuplicateId(1))
        );
    }

    #[test]
    fn structural_equality_ignores_order_and_spans() {
        let a: EntityGraph = [
            Entity::simple(1, "A", vec![Arg::integer(1)]),
            Entity::simple(2, "B", vec![Arg::Ref(1)]),
        ]
        .into_iter()
        .collect();
        let mut b: EntityGraph = [
            Entity::simple(2, "B", vec![Arg::Ref(1)]),
            Entity::simple(1, "A", vec![Arg::integer(1)]),
        ]
        .into_iter()
        .collect();
        b.get_mut(1).unwrap().span = 10..20;
        assert!(a.structurally_eq(&b));
        b.get_mut(1).unwrap().records_mut()[0].keyword = "C".into();
        assert!(!a.structurally_eq(&b));
    }

    #[test]
    fn content_lines_skip_blank_and_whitespace_lines() {
        assert_eq!(count_content_lines("a\n\n  \n\tb\r\nc"), 3);
        assert_eq!(count_content_lines(""), 0);
    }
}
