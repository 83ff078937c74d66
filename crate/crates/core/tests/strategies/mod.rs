//! Generators shared with the acceptance target.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use reqlens_core::{Kind, Level, Requirement, RequirementSet};

// Quoting edge cases for RFC 4180: separators, quotes, line breaks, and
// non-ASCII text.
pub fn text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[A-Za-z0-9 ]{1,12}",
        Just(",".to_string()),
        Just("\"".to_string()),
        Just("\"\"".to_string()),
        Just("\n".to_string()),
        Just("\r\n".to_string()),
        Just(";".to_string()),
        Just("≤ 2 s".to_string()),
        Just("Größe".to_string()),
    ];
    prop::collection::vec(piece, 1..8)
        .prop_map(|parts| parts.concat().trim().to_string())
        .prop_filter("non-empty after trim", |s| !s.is_empty())
}

pub fn requirement(id: String) -> impl Strategy<Value = Requirement> {
    (
        text(),
        prop::bool::ANY,
        prop::option::of(prop::bool::ANY),
        prop::collection::vec("[a-z][a-z0-9 ,\"-]{0,8}[a-z0-9]", 0..3),
        prop::option::of("[A-Za-z0-9 §.,\"]{1,16}"),
    )
        .prop_map(move |(text, stakeholder, hint, tags, source)| {
            let level = if stakeholder { Level::Stakeholder } else { Level::System };
            let mut r = Requirement::new(id.clone(), level, text);
            r.kind_hint = hint.map(|f| if f { Kind::Functional } else { Kind::NonFunctional });
            r.tags = tags;
            r.source = source.map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
            r
        })
}

pub fn corpus() -> impl Strategy<Value = RequirementSet> {
    prop::collection::btree_set("[A-Z]{2,3}-[0-9]{1,3}", 0..12).prop_flat_map(|ids: BTreeSet<String>| {
        let reqs: Vec<_> = ids.into_iter().map(requirement).collect();
        reqs.prop_map(|requirements| RequirementSet::new("roundtrip", requirements))
    })
}
