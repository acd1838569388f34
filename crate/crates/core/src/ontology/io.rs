use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use log::warn;

use super::{AnnotationTable, Branch, OntologyDag};
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn read_ontology_tsv(path: &Path) -> Result<OntologyDag> {
    parse_ontology_tsv(open(path)?, path)
}

/// Parses `term<TAB>parent<TAB>branch` rows; roots have an empty parent.
pub fn parse_ontology_tsv<R: BufRead>(reader: R, path: &Path) -> Result<OntologyDag> {
    let mut branches: BTreeMap<String, Branch> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut first = true;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(
                path,
                lineno,
                "expected term, parent and branch columns",
            ));
        }
        let (term, parent) = (fields[0].trim(), fields[1].trim());
        let branch = match fields[2].parse::<Branch>() {
            Ok(b) => b,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(e) => return Err(Error::parse(path, lineno, e.to_string())),
        };
        first = false;
        if term.is_empty() {
            return Err(Error::parse(path, lineno, "empty term identifier"));
        }
        match branches.get(term) {
            Some(&b) if b != branch => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("term {term} listed with branches {b} and {branch}"),
                ))
            }
            Some(_) => {}
            None => {
                branches.insert(term.to_owned(), branch);
                order.push(term.to_owned());
            }
        }
        if !parent.is_empty() {
            edges.push((term.to_owned(), parent.to_owned()));
        }
    }
    let terms = order
        .into_iter()
        .map(|t| {
            let b = branches[&t];
            (t, b)
        })
        .collect();
    OntologyDag::new(terms, &edges)
}

pub fn read_obo(path: &Path, part_of_as_parent: bool) -> Result<OntologyDag> {
    parse_obo(open(path)?, path, part_of_as_parent)
}

#[derive(Default)]
struct Stanza {
    id: Option<String>,
    namespace: Option<String>,
    parents: Vec<String>,
    obsolete: bool,
}

/// Reads `[Term]` stanzas using `id:`, `namespace:`, `is_a:` and, when
/// enabled, `relationship: part_of`. Obsolete terms and terms outside the
/// three branches are skipped, as are edges pointing at them.
pub fn parse_obo<R: BufRead>(
    reader: R,
    path: &Path,
    part_of_as_parent: bool,
) -> Result<OntologyDag> {
    let mut stanzas: Vec<Stanza> = Vec::new();
    let mut current: Option<Stanza> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.starts_with('[') {
            stanzas.extend(current.take());
            if line == "[Term]" {
                current = Some(Stanza::default());
            }
            continue;
        }
        let Some(stanza) = current.as_mut() else {
            continue;
        };
        let Some((tag, value)) = line.split_once(':') else {
            continue;
        };
        // Trailing `! name` comments are not part of the value.
        let value = value.split('!').next().unwrap_or("").trim();
        match tag.trim() {
            "id" => stanza.id = Some(value.to_owned()),
            "namespace" => stanza.namespace = Some(value.to_owned()),
            "is_a" => stanza.parents.push(first_token(value, path, lineno + 1)?),
            "relationship" if part_of_as_parent => {
                let mut parts = value.split_whitespace();
                if parts.next() == Some("part_of") {
                    if let Some(target) = parts.next() {
                        stanza.parents.push(target.to_owned());
                    }
                }
            }
            "is_obsolete" => stanza.obsolete = value == "true",
            _ => {}
        }
    }
    stanzas.extend(current);

    let mut terms: Vec<(String, Branch)> = Vec::new();
    let mut known: BTreeMap<String, Branch> = BTreeMap::new();
    let mut skipped = 0usize;
    for s in &stanzas {
        let (Some(id), false) = (&s.id, s.obsolete) else {
            skipped += 1;
            continue;
        };
        match s.namespace.as_deref().map(str::parse::<Branch>) {
            Some(Ok(b)) => {
                if known.insert(id.clone(), b).is_none() {
                    terms.push((id.clone(), b));
                }
            }
            _ => skipped += 1,
        }
    }
    let mut edges = Vec::new();
    let mut dangling = 0usize;
    for s in &stanzas {
        let Some(id) = &s.id else { continue };
        if !known.contains_key(id) || s.obsolete {
            continue;
        }
        for p in &s.parents {
            if known.contains_key(p) {
                edges.push((id.clone(), p.clone()));
            } else {
                dangling += 1;
            }
        }
    }
    if skipped > 0 {
        warn!("skipped {skipped} obsolete or out-of-branch OBO stanza(s)");
    }
    if dangling > 0 {
        warn!("dropped {dangling} OBO parent link(s) to unknown terms");
    }
    OntologyDag::new(terms, &edges)
}

fn first_token(value: &str, path: &Path, line: usize) -> Result<String> {
    value
        .split_whitespace()
        .next()
        .map(str::to_owned)
        .ok_or_else(|| Error::parse(path, line, "empty is_a value"))
}

pub fn read_annotations(path: &Path) -> Result<AnnotationTable> {
    parse_annotations(open(path)?, path)
}

/// Parses `protein<TAB>term` rows. A leading `protein<TAB>term` header is skipped.
pub fn parse_annotations<R: BufRead>(reader: R, path: &Path) -> Result<AnnotationTable> {
    let mut pairs = Vec::new();
    let mut first = true;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(protein), Some(term)) = (fields.next(), fields.next()) else {
            return Err(Error::parse(
                path,
                lineno + 1,
                "expected protein and term columns",
            ));
        };
        let (protein, term) = (protein.trim(), term.trim());
        if first && protein.eq_ignore_ascii_case("protein") && term.eq_ignore_ascii_case("term") {
            first = false;
            continue;
        }
        first = false;
        if protein.is_empty() || term.is_empty() {
            return Err(Error::parse(path, lineno + 1, "empty protein or term"));
        }
        pairs.push((protein.to_owned(), term.to_owned()));
    }
    Ok(AnnotationTable::from_pairs(pairs))
}

/// Writes one `term<TAB>parent<TAB>branch` row per edge, and one row with an
/// empty parent for each root.
pub fn write_ontology_tsv<W: Write>(mut w: W, d: &OntologyDag) -> std::io::Result<()> {
    writeln!(w, "term\tparent\tbranch")?;
    for k in 0..d.len() {
        if d.parents(k).is_empty() {
            writeln!(w, "{}\t\t{}", d.term(k), d.branch(k))?;
        }
        for &p in d.parents(k) {
            writeln!(w, "{}\t{}\t{}", d.term(k), d.term(p), d.branch(k))?;
        }
    }
    Ok(())
}

pub fn write_annotations<W: Write>(mut w: W, a: &AnnotationTable) -> std::io::Result<()> {
    writeln!(w, "protein\tterm")?;
    for (i, protein) in a.proteins().iter().enumerate() {
        for &k in a.terms_of(i) {
            writeln!(w, "{}\t{}", protein, a.terms()[k])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_with_header_and_roots() {
        let text =
            "term\tparent\tbranch\nGO:1\t\tBP\nGO:2\tGO:1\tBP\nGO:3\tGO:1\tBP\nGO:3\tGO:2\tBP\n";
        let d = parse_ontology_tsv(text.as_bytes(), Path::new("o.tsv")).unwrap();
        assert_eq!(d.len(), 3);
        let k = d.index_of("GO:3").unwrap();
        assert_eq!(d.parents(k).len(), 2);
        assert_eq!(d.ancestors(k), &[0, 1]);
    }

    #[test]
    fn tsv_bad_branch_reports_line() {
        let text = "GO:1\t\tBP\nGO:2\tGO:1\tXX\n";
        let err = parse_ontology_tsv(text.as_bytes(), Path::new("o.tsv")).unwrap_err();
        assert!(err.to_string().starts_with("o.tsv:2:"), "{err}");
    }

    #[test]
    fn obo_stanzas() {
        let text = "format-version: 1.2\n\n[Term]\nid: GO:0000001\nname: root\nnamespace: biological_process\n\n\
[Term]\nid: GO:0000002\nnamespace: biological_process\nis_a: GO:0000001 ! root\n\n\
[Term]\nid: GO:0000003\nnamespace: biological_process\nrelationship: part_of GO:0000002 ! x\n\n\
[Term]\nid: GO:0000004\nnamespace: biological_process\nis_obsolete: true\n\n\
[Typedef]\nid: part_of\n";
        let d = parse_obo(text.as_bytes(), Path::new("go.obo"), false).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.parents(2).is_empty());
        let d = parse_obo(text.as_bytes(), Path::new("go.obo"), true).unwrap();
        assert_eq!(d.parents(2), &[1]);
        assert_eq!(d.ancestors(2), &[0, 1]);
    }

    #[test]
    fn writers_round_trip() {
        let text = "GO:1\t\tMF\nGO:2\tGO:1\tMF\nGO:3\tGO:1\tMF\nGO:3\tGO:2\tMF\n";
        let d = parse_ontology_tsv(text.as_bytes(), Path::new("o.tsv")).unwrap();
        let mut buf = Vec::new();
        write_ontology_tsv(&mut buf, &d).unwrap();
        let back = parse_ontology_tsv(buf.as_slice(), Path::new("o.tsv")).unwrap();
        assert_eq!(back.terms(), d.terms());
        for k in 0..d.len() {
            assert_eq!(back.parents(k), d.parents(k));
            assert_eq!(back.branch(k), d.branch(k));
        }

        let a = AnnotationTable::from_pairs([("p2", "GO:2"), ("p1", "GO:3"), ("p1", "GO:1")]);
        let mut buf = Vec::new();
        write_annotations(&mut buf, &a).unwrap();
        assert_eq!(
            parse_annotations(buf.as_slice(), Path::new("a.tsv")).unwrap(),
            a
        );
    }

    #[test]
    fn annotation_header_skipped() {
        let text = "protein\tterm\np1\tGO:1\np1\tGO:1\np2\tGO:2\n";
        let a = parse_annotations(text.as_bytes(), Path::new("a.tsv")).unwrap();
        assert_eq!(a.proteins(), ["p1", "p2"]);
        assert_eq!(a.len(), 2);
    }
}
