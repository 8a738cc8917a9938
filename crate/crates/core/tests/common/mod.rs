#![allow(dead_code)]

use std::collections::BTreeMap;

use edoc_core::bundle::{BundleMeta, DefinitionBundle, DefinitionSet, StateSpec, ValidityPaths};
use edoc_core::edoc::{Draft, EDoc, EDocHeader, ManualField, ProcessingRules, Rule, TransitionTable};
use edoc_core::sig::{issue_cert, keygen, self_signed, CertTemplate, Purpose, SigAlg, Signer, TrustStore};
use edoc_core::time::{self, Timestamp};
use edoc_core::wysiwys::{render_to_sign, sign_rendered, DisplayEntry, DisplayMapping, Format};
use edoc_core::xml::{Element, ElementSpec, TypeDef};

pub fn ts(s: &str) -> Timestamp {
    time::parse(s).unwrap()
}

pub struct Pki {
    pub trust: TrustStore,
    pub clerk: Signer,
    pub clerk_auth: Signer,
    pub inspector: Signer,
    pub platform: Signer,
}

pub fn pki() -> Pki {
    let nb = ts("2020-01-01T00:00:00Z");
    let na = ts("2099-01-01T00:00:00Z");
    let (rk, rpk) = keygen(SigAlg::Ed25519);
    let root = self_signed(CertTemplate::new("Test Root", rpk, [Purpose::Issuer], nb, na, 1), &rk).unwrap();
    let mut trust = TrustStore::new();
    trust.add_anchor(root.clone()).unwrap();
    let mut serial = 1;
    let mut mk = |subject: &str, p: Purpose| {
        serial += 1;
        let (k, pk) = keygen(SigAlg::Ed25519);
        let c = issue_cert(CertTemplate::new(subject, pk, [p], nb, na, serial), &rk, &root, &nb).unwrap();
        Signer::new(k, c).unwrap()
    };
    Pki {
        clerk: mk("Permit Office", Purpose::Sign),
        clerk_auth: mk("Permit Office", Purpose::Auth),
        inspector: mk("Inspector Rossi", Purpose::Sign),
        platform: mk("Platform", Purpose::Platform),
        trust,
    }
}

fn leaf(p: &str) -> ElementSpec {
    ElementSpec::leaf(Some(p)).unwrap()
}

fn text() -> ElementSpec {
    ElementSpec::leaf(None).unwrap()
}

const DATE: &str = r"[0-9]{4}-[0-9]{2}-[0-9]{2}T[0-9]{2}:[0-9]{2}:[0-9]{2}Z";

pub fn permit_def() -> TypeDef {
    let mut d = TypeDef::new("permit", 1, "permit").unwrap();
    d.add("/permit/holder", ElementSpec::container()).unwrap();
    d.add("/permit/holder/id", leaf("h[0-9]{4}")).unwrap();
    d.add("/permit/holder/name", text()).unwrap();
    d.add("/permit/site", text()).unwrap();
    d.add("/permit/remark", text().optional()).unwrap();
    d.add("/permit/validity", ElementSpec::container()).unwrap();
    d.add("/permit/validity/notBefore", leaf(DATE)).unwrap();
    d.add("/permit/validity/notAfter", leaf(DATE)).unwrap();
    d
}

pub fn report_def() -> TypeDef {
    let mut d = TypeDef::new("report", 1, "report").unwrap();
    d.add("/report/holder", ElementSpec::container()).unwrap();
    d.add("/report/holder/id", leaf("h[0-9]{4}")).unwrap();
    d.add("/report/holder/name", text()).unwrap();
    d.add("/report/site", text()).unwrap();
    d.add("/report/office", text()).unwrap();
    d.add("/report/outcome", leaf("pass|fail")).unwrap();
    d.add("/report/score", leaf("[0-9]{1,3}")).unwrap();
    d.add("/report/note", text().optional()).unwrap();
    d
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

pub fn permit_bundle() -> DefinitionBundle {
    let display = mapping(&[
        ("/permit/holder/id", "Holder ID", Format::Text),
        ("/permit/holder/name", "Holder name", Format::Text),
        ("/permit/site", "Site", Format::Text),
        ("/permit/remark", "Remark", Format::Text),
        ("/permit/validity/notBefore", "Valid from", Format::Date),
        ("/permit/validity/notAfter", "Valid until", Format::Date),
    ]);
    let meta = BundleMeta {
        states: vec![
            StateSpec { name: "pending".into(), initial: true, valid: true },
            StateSpec { name: "processed".into(), initial: false, valid: false },
            StateSpec { name: "revoked".into(), initial: false, valid: false },
        ],
        transitions: TransitionTable::new([("pending", "processed"), ("pending", "revoked")]).unwrap(),
        validity: Some(ValidityPaths {
            not_before: "/permit/validity/notBefore".into(),
            not_after: "/permit/validity/notAfter".into(),
        }),
        static_attrs: BTreeMap::from([("partition".to_string(), "input".to_string())]),
        dynamic_attrs: BTreeMap::new(),
        summary: vec!["/permit/holder/id".into(), "/permit/site".into()],
    };
    DefinitionBundle::new(permit_def(), display, None, meta).unwrap()
}

pub fn report_rules() -> ProcessingRules {
    let copy = |f: &str, t: &str| Rule::Copy { from: f.into(), to: t.into() };
    let manual = |t: &str, l: &str| Rule::Manual(ManualField { to: t.into(), label: l.into() });
    ProcessingRules {
        input_type: "permit".into(),
        output_type: "report".into(),
        rules: vec![
            copy("/permit/holder/id", "/report/holder/id"),
            copy("/permit/holder/name", "/report/holder/name"),
            copy("/permit/site", "/report/site"),
            Rule::Const { to: "/report/office".into(), value: "North".into() },
            manual("/report/outcome", "Outcome"),
            manual("/report/score", "Score"),
        ],
    }
}

pub fn report_bundle() -> DefinitionBundle {
    let display = mapping(&[
        ("/report/holder/id", "Holder ID", Format::Text),
        ("/report/holder/name", "Holder name", Format::Text),
        ("/report/site", "Site", Format::Text),
        ("/report/office", "Office", Format::Text),
        ("/report/outcome", "Outcome", Format::Text),
        ("/report/score", "Score", Format::Number),
        ("/report/note", "Note", Format::Text),
    ]);
    let meta = BundleMeta {
        states: vec![
            StateSpec { name: "issued".into(), initial: true, valid: true },
            StateSpec { name: "revoked".into(), initial: false, valid: false },
        ],
        transitions: TransitionTable::new([("issued", "revoked")]).unwrap(),
        validity: None,
        static_attrs: BTreeMap::from([("partition".to_string(), "output".to_string())]),
        dynamic_attrs: BTreeMap::new(),
        summary: vec!["/report/holder/id".into()],
    };
    DefinitionBundle::new(report_def(), display, Some(report_rules()), meta).unwrap()
}

pub fn defs() -> DefinitionSet {
    let mut s = DefinitionSet::new();
    s.insert(permit_bundle());
    s.insert(report_bundle());
    s
}

pub fn permit_values(id: &str, issued: &str, until: &str) -> BTreeMap<String, String> {
    [
        ("holder/id", id),
        ("holder/name", "Maria Bianchi"),
        ("site", "Quay 4 & \"Dock\""),
        ("validity/notBefore", issued),
        ("validity/notAfter", until),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

pub fn header(bundle: &DefinitionBundle, at: Timestamp) -> EDocHeader {
    EDocHeader {
        type_id: bundle.type_id().to_string(),
        version: bundle.version(),
        def_digest: bundle.digest(),
        created_at: at,
    }
}

pub fn draft(bundle: &DefinitionBundle, content: Element, at: Timestamp) -> Draft {
    Draft {
        header: header(bundle, at),
        content,
    }
}

/// A permit issued at `issued`, valid for 42 days, signed by the clerk.
pub fn signed_permit(pki: &Pki, issued: &str) -> EDoc {
    let b = permit_bundle();
    let at = ts(issued);
    let until = time::format(&(at + chrono::Duration::days(42)));
    let content = edoc_core::edoc::assemble(&b.typedef, &permit_values("h0042", issued, &until)).unwrap();
    let rendered = render_to_sign(&draft(&b, content, at), &b).unwrap();
    sign_rendered(&rendered, &pki.clerk, at).unwrap()
}
