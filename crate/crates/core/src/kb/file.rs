//! Line-oriented JSON KB file format.
//!
//! ```text
//! {"kind":"manifest","entities":2,"predicates":1,"statements":1}
//! {"kind":"entity","id":"Q1","label":"Alpha","description":"optional"}
//! {"kind":"class","id":"C1","label":"Thing"}
//! {"kind":"predicate","id":"knows","label":"knows"}
//! {"kind":"statement","s":"Q1","p":"knows","o":{"node":"Q2"},"qualifiers":[{"p":"since","o":{"literal":"1990","kind":"year"}}]}
//! ```
//!
//! The manifest must be the first record. `entities` counts entity records
//! only; an optional `classes` field is validated when present.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KbBuilder, KbError, KnowledgeBase, Literal, LiteralKind, NodeId, PredicateId, Statement, TermValue};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Manifest {
        entities: usize,
        predicates: usize,
        statements: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        classes: Option<usize>,
    },
    Entity {
        id: String,
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        description: Option<String>,
    },
    Class {
        id: String,
        label: String,
    },
    Predicate {
        id: String,
        label: String,
    },
    Statement {
        s: String,
        p: String,
        o: ObjectRecord,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        qualifiers: Vec<QualifierRecord>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    literal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QualifierRecord {
    p: String,
    o: ObjectRecord,
}

impl ObjectRecord {
    fn to_term(&self, line: usize) -> Result<TermValue, KbError> {
        let err = |message: String| KbError::Parse { line, message };
        match (&self.node, &self.literal) {
            (Some(id), None) if self.kind.is_none() => Ok(TermValue::Node(NodeId::new(id.as_str()))),
            (None, Some(lex)) => {
                let kind = match self.kind.as_deref() {
                    None => LiteralKind::String,
                    Some(k) => LiteralKind::from_name(k).ok_or_else(|| err(format!("unknown literal kind {k:?}")))?,
                };
                Literal::new(kind, lex).map(TermValue::Literal).map_err(|e| err(e.to_string()))
            }
            _ => Err(err("object must have exactly one of \"node\" or \"literal\"".into())),
        }
    }

    fn from_term(term: &TermValue) -> Self {
        match term {
            TermValue::Node(id) => Self { node: Some(id.0.clone()), literal: None, kind: None },
            TermValue::Literal(lit) => Self {
                node: None,
                literal: Some(lit.lexical().to_owned()),
                kind: (lit.kind() != LiteralKind::String).then(|| lit.kind().name().to_owned()),
            },
        }
    }
}

pub fn load_kb(path: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
    parse_kb(&fs::read_to_string(path)?)
}

/// Parses KB file contents; blank lines are ignored.
pub fn parse_kb(text: &str) -> Result<KnowledgeBase, KbError> {
    let mut builder = KbBuilder::new();
    let mut manifest = None;
    let mut counts = (0usize, 0usize, 0usize, 0usize);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(raw).map_err(|e| KbError::Parse { line, message: e.to_string() })?;
        if manifest.is_none() && !matches!(record, Record::Manifest { .. }) {
            return Err(KbError::MissingManifest);
        }
        match record {
            Record::Manifest { entities, predicates, statements, classes } => {
                if manifest.is_some() {
                    return Err(KbError::Parse { line, message: "duplicate manifest record".into() });
                }
                manifest = Some((entities, predicates, statements, classes));
            }
            Record::Entity { id, label, description } => {
                builder.add_node(&id, &label, description.as_deref(), false, line)?;
                counts.0 += 1;
            }
            Record::Class { id, label } => {
                builder.add_node(&id, &label, None, true, line)?;
                counts.3 += 1;
            }
            Record::Predicate { id, label } => {
                builder.add_predicate(&id, &label, line)?;
                counts.1 += 1;
            }
            Record::Statement { s, p, o, qualifiers } => {
                let object = o.to_term(line)?;
                let qualifiers = qualifiers
                    .iter()
                    .map(|q| Ok((PredicateId::new(q.p.as_str()), q.o.to_term(line)?)))
                    .collect::<Result<Vec<_>, KbError>>()?;
                builder.add_statement(
                    Statement { subject: NodeId::new(s), predicate: PredicateId::new(p), object, qualifiers },
                    line,
                )?;
                counts.2 += 1;
            }
        }
    }
    let (entities, predicates, statements, classes) = manifest.ok_or(KbError::MissingManifest)?;
    let check = |field, declared, actual| {
        if declared == actual {
            Ok(())
        } else {
            Err(KbError::ManifestMismatch { field, declared, actual })
        }
    };
    check("entities", entities, counts.0)?;
    check("predicates", predicates, counts.1)?;
    check("statements", statements, counts.2)?;
    if let Some(classes) = classes {
        check("classes", classes, counts.3)?;
    }
    Ok(builder.build())
}

/// Serializes a KB in the same format [`parse_kb`] reads.
pub fn write_kb(kb: &KnowledgeBase, mut out: impl Write) -> std::io::Result<()> {
    let mut emit = |r: &Record| -> std::io::Result<()> {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")
    };
    emit(&Record::Manifest {
        entities: kb.entity_count(),
        predicates: kb.predicates().len(),
        statements: kb.statements().len(),
        classes: Some(kb.class_count()),
    })?;
    for n in kb.nodes() {
        let r = if n.is_class {
            Record::Class { id: n.id.0.clone(), label: n.label.clone() }
        } else {
            Record::Entity { id: n.id.0.clone(), label: n.label.clone(), description: n.description.clone() }
        };
        emit(&r)?;
    }
    for p in kb.predicates() {
        emit(&Record::Predicate { id: p.id.0.clone(), label: p.label.clone() })?;
    }
    for st in kb.statements() {
        emit(&Record::Statement {
            s: st.subject.0.clone(),
            p: st.predicate.0.clone(),
            o: ObjectRecord::from_term(&st.object),
            qualifiers: st
                .qualifiers
                .iter()
                .map(|(p, o)| QualifierRecord { p: p.0.clone(), o: ObjectRecord::from_term(o) })
                .collect(),
        })?;
    }
    Ok(())
}
