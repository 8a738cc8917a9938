//! Definition bundles of the exam admission service.

use std::collections::BTreeMap;

use edoc_core::bundle::{BundleMeta, DefinitionBundle, StateSpec, ValidityPaths};
use edoc_core::edoc::{ManualField, ProcessingRules, Rule, TransitionTable};
use edoc_core::wysiwys::{DisplayEntry, DisplayMapping, Format};
use edoc_core::xml::{ElementSpec, TypeDef};

pub const EEAC: &str = "eEAC";
pub const EET: &str = "eEET";
pub const TRANSCRIPT: &str = "eTranscript";

pub const PENDING: &str = "pending";
pub const PROCESSED: &str = "processed";
pub const ISSUED: &str = "issued";
pub const REVOKED: &str = "revoked";

/// Length of an exam session.
pub const VALIDITY_DAYS: i64 = 42;

pub const STUDENT_ID: &str = "s[0-9]{6}";
pub const EXAM_CODE: &str = "[0-9]{2}[A-Z]{3}";
const TIMESTAMP: &str = r"[0-9]{4}-[0-9]{2}-[0-9]{2}T[0-9]{2}:[0-9]{2}:[0-9]{2}Z";
const DAY: &str = r"[0-9]{4}-[0-9]{2}-[0-9]{2}";
const MARK: &str = "1[89]|2[0-9]|30";

/// Labels of the fields the professor fills in.
pub const LABEL_DATE: &str = "Exam date";
pub const LABEL_MARK: &str = "Mark";
pub const LABEL_QUESTIONS: &str = "Questions";

pub const EET_DATE: &str = "/eEET/exam/date";
pub const EET_MARK: &str = "/eEET/exam/mark";
pub const EET_QUESTIONS: &str = "/eEET/exam/questions";

fn leaf(pattern: &str) -> ElementSpec {
    ElementSpec::leaf(Some(pattern)).expect("valid pattern")
}

fn text() -> ElementSpec {
    ElementSpec::leaf(None).expect("no pattern")
}

fn mapping(entries: &[(&str, &str, Format)]) -> DisplayMapping {
    DisplayMapping {
        entries: entries
            .iter()
            .map(|(p, l, f)| DisplayEntry {
                path: p.to_string(),
                label: l.to_string(),
                format: *f,
            })
            .collect(),
    }
}

fn state(name: &str, initial: bool, valid: bool) -> StateSpec {
    StateSpec {
        name: name.into(),
        initial,
        valid,
    }
}

/// Student, faculty, exam and validity blocks shared by both documents.
fn common_fields(d: &mut TypeDef, root: &str) {
    let p = |s: &str| format!("/{root}/{s}");
    d.add(&p("student"), ElementSpec::container()).unwrap();
    d.add(&p("student/id"), leaf(STUDENT_ID)).unwrap();
    d.add(&p("student/name"), text()).unwrap();
    d.add(&p("student/placeOfBirth"), text()).unwrap();
    d.add(&p("faculty"), ElementSpec::container()).unwrap();
    d.add(&p("faculty/name"), text()).unwrap();
    d.add(&p("exam"), ElementSpec::container()).unwrap();
    d.add(&p("exam/code"), leaf(EXAM_CODE)).unwrap();
    d.add(&p("exam/name"), text()).unwrap();
}

fn validity_fields(d: &mut TypeDef, root: &str) {
    d.add(&format!("/{root}/validity"), ElementSpec::container()).unwrap();
    d.add(&format!("/{root}/validity/notBefore"), leaf(TIMESTAMP)).unwrap();
    d.add(&format!("/{root}/validity/notAfter"), leaf(TIMESTAMP)).unwrap();
}

fn common_display(root: &str) -> Vec<(String, &'static str, Format)> {
    [
        ("student/id", "Student ID", Format::Text),
        ("student/name", "Student name", Format::Text),
        ("student/placeOfBirth", "Place of birth", Format::Text),
        ("faculty/name", "Faculty", Format::Text),
        ("exam/code", "Exam code", Format::Text),
        ("exam/name", "Exam", Format::Text),
    ]
    .into_iter()
    .map(|(p, l, f)| (format!("/{root}/{p}"), l, f))
    .collect()
}

/// Exam admission card, issued by the student office.
pub fn eeac_bundle() -> DefinitionBundle {
    let mut d = TypeDef::new(EEAC, 1, EEAC).unwrap();
    common_fields(&mut d, EEAC);
    validity_fields(&mut d, EEAC);
    let mut display = common_display(EEAC);
    display.push(("/eEAC/validity/notBefore".into(), "Valid from", Format::Date));
    display.push(("/eEAC/validity/notAfter".into(), "Valid until", Format::Date));
    let display: Vec<_> = display.iter().map(|(p, l, f)| (p.as_str(), *l, *f)).collect();
    let meta = BundleMeta {
        states: vec![state(PENDING, true, true), state(PROCESSED, false, false), state(REVOKED, false, false)],
        transitions: TransitionTable::new([(PENDING, PROCESSED), (PENDING, REVOKED)]).unwrap(),
        validity: Some(ValidityPaths {
            not_before: "/eEAC/validity/notBefore".into(),
            not_after: "/eEAC/validity/notAfter".into(),
        }),
        static_attrs: BTreeMap::from([("issuer".to_string(), "Student Secretariat".to_string())]),
        dynamic_attrs: BTreeMap::new(),
        summary: vec![
            "/eEAC/student/id".into(),
            "/eEAC/student/name".into(),
            "/eEAC/exam/code".into(),
        ],
    };
    DefinitionBundle::new(d, mapping(&display), None, meta).expect("consistent eEAC bundle")
}

pub fn eet_rules() -> ProcessingRules {
    let copy = |s: &str| Rule::Copy {
        from: format!("/{EEAC}/{s}"),
        to: format!("/{EET}/{s}"),
    };
    let manual = |to: &str, label: &str| {
        Rule::Manual(ManualField {
            to: to.into(),
            label: label.into(),
        })
    };
    ProcessingRules {
        input_type: EEAC.into(),
        output_type: EET.into(),
        rules: vec![
            copy("student/id"),
            copy("student/name"),
            copy("student/placeOfBirth"),
            copy("faculty/name"),
            copy("exam/code"),
            copy("exam/name"),
            copy("validity/notBefore"),
            copy("validity/notAfter"),
            manual(EET_DATE, LABEL_DATE),
            manual(EET_MARK, LABEL_MARK),
            manual(EET_QUESTIONS, LABEL_QUESTIONS),
        ],
    }
}

/// Exam evaluation ticket, derived from an admission card by the professor.
pub fn eet_bundle() -> DefinitionBundle {
    let mut d = TypeDef::new(EET, 1, EET).unwrap();
    common_fields(&mut d, EET);
    d.add(EET_DATE, leaf(DAY)).unwrap();
    d.add(EET_MARK, leaf(MARK)).unwrap();
    d.add(EET_QUESTIONS, text()).unwrap();
    validity_fields(&mut d, EET);
    let mut display = common_display(EET);
    display.push((EET_DATE.into(), LABEL_DATE, Format::Date));
    display.push((EET_MARK.into(), LABEL_MARK, Format::Number));
    display.push((EET_QUESTIONS.into(), LABEL_QUESTIONS, Format::Text));
    display.push(("/eEET/validity/notBefore".into(), "Admission valid from", Format::Date));
    display.push(("/eEET/validity/notAfter".into(), "Admission valid until", Format::Date));
    let display: Vec<_> = display.iter().map(|(p, l, f)| (p.as_str(), *l, *f)).collect();
    let meta = BundleMeta {
        states: vec![state(ISSUED, true, true), state(REVOKED, false, false)],
        transitions: TransitionTable::new([(ISSUED, REVOKED)]).unwrap(),
        validity: None,
        static_attrs: BTreeMap::new(),
        dynamic_attrs: BTreeMap::new(),
        summary: vec![
            "/eEET/student/id".into(),
            "/eEET/exam/code".into(),
            EET_MARK.into(),
        ],
    };
    DefinitionBundle::new(d, mapping(&display), Some(eet_rules()), meta).expect("consistent eEET bundle")
}

/// A third type, handled by the student office only.
pub fn transcript_bundle() -> DefinitionBundle {
    let mut d = TypeDef::new(TRANSCRIPT, 1, TRANSCRIPT).unwrap();
    d.add("/eTranscript/student", ElementSpec::container()).unwrap();
    d.add("/eTranscript/student/id", leaf(STUDENT_ID)).unwrap();
    d.add("/eTranscript/student/name", text()).unwrap();
    d.add("/eTranscript/issuedOn", leaf(DAY)).unwrap();
    let display = mapping(&[
        ("/eTranscript/student/id", "Student ID", Format::Text),
        ("/eTranscript/student/name", "Student name", Format::Text),
        ("/eTranscript/issuedOn", "Issued on", Format::Date),
    ]);
    let meta = BundleMeta {
        states: vec![state(ISSUED, true, true), state(REVOKED, false, false)],
        transitions: TransitionTable::new([(ISSUED, REVOKED)]).unwrap(),
        validity: None,
        static_attrs: BTreeMap::new(),
        dynamic_attrs: BTreeMap::new(),
        summary: vec!["/eTranscript/student/id".into()],
    };
    DefinitionBundle::new(d, display, None, meta).expect("consistent transcript bundle")
}

pub fn all_bundles() -> Vec<DefinitionBundle> {
    vec![eeac_bundle(), eet_bundle(), transcript_bundle()]
}
