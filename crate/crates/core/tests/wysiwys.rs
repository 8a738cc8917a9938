mod common;

use common::*;
use edoc_core::digest::DigestAlg;
use edoc_core::wysiwys::{
    build_display, prepare_signing, render_to_sign, sign_rendered, verify_and_render, DisplayForm, WysiwysError,
};
use edoc_core::xml::{a_canon, a_canon_string, parse_str, Element, XNode};
use proptest::prelude::*;

fn permit_content() -> Element {
    edoc_core::edoc::assemble(
        &permit_def(),
        &permit_values("h0042", "2026-03-01T09:00:00Z", "2026-04-12T09:00:00Z"),
    )
    .unwrap()
}

fn draft_bytes(content: &str) -> Vec<u8> {
    let b = permit_bundle();
    format!(
        "<edoc><header typeId=\"permit\" version=\"1\" defDigest=\"{}\" createdAt=\"2026-03-01T09:00:00Z\"></header><content>{content}</content></edoc>",
        b.digest()
    )
    .into_bytes()
}

const GOOD: &str = "<permit><holder><id>h0042</id><name>Maria</name></holder><site>Quay</site>\
<validity><notBefore>2026-03-01T09:00:00Z</notBefore><notAfter>2026-04-12T09:00:00Z</notAfter></validity></permit>";

#[test]
fn form_lists_every_value_in_mapping_order() {
    let b = permit_bundle();
    let form = build_display(&permit_content(), &b.typedef, &b.display).unwrap();
    assert_eq!(
        form.serialize(),
        "Document type: permit\nDefinition version: 1\n\nHolder ID: h0042\nHolder name: Maria Bianchi\n\
Site: Quay 4 & \"Dock\"\nValid from: 2026-03-01T09:00:00Z\nValid until: 2026-04-12T09:00:00Z\n"
    );
    let again = DisplayForm::from_xml(&form.to_xml()).unwrap();
    assert_eq!(again.render_digest(), form.render_digest());
}

#[test]
fn refuses_hidden_and_illegal_content() {
    let b = permit_bundle();
    let defs = defs();
    let cases: Vec<(String, &str)> = vec![
        (GOOD.replace("<site>Quay</site>", "<site>Quay<!--x--></site>"), "ForbiddenConstruct"),
        (GOOD.replace("<site>", "<?pi x?><site>"), "ForbiddenConstruct"),
        (GOOD.replace("<site>Quay</site>", "<site>Qu\u{200B}ay</site>"), "ForbiddenChar"),
        (GOOD.replace("<site>Quay</site>", "<site>Qu\u{202E}ay</site>"), "ForbiddenChar"),
        (GOOD.replace("<site>Quay</site>", "<site>Quay</site><secret>s</secret>"), "Unmapped"),
        (GOOD.replace("<site>Quay</site>", "<site>Quay</site><secret></secret>"), "StructureInvalid"),
        (GOOD.replace("<site>", "<site note=\"x\">"), "Unmapped"),
        (GOOD.replace("<site>Quay</site>", "<site>Quay\nline</site>"), "ForbiddenChar"),
        (GOOD.replace("2026-03-01T09:00:00Z</notBefore>", "soon</notBefore>"), "StructureInvalid"),
    ];
    for (content, family) in cases {
        let err = prepare_signing(&draft_bytes(&content), &defs).unwrap_err();
        assert_eq!(err.family(), family, "{content}: {err}");
    }
    assert!(prepare_signing(&draft_bytes(GOOD), &defs).is_ok());

    let stale = String::from_utf8(draft_bytes(GOOD)).unwrap().replace(&b.digest(), &"ab".repeat(32));
    assert_eq!(prepare_signing(stale.as_bytes(), &defs).unwrap_err().family(), "DefinitionMismatch");
    let unknown = String::from_utf8(draft_bytes(GOOD)).unwrap().replace("version=\"1\"", "version=\"9\"");
    assert_eq!(prepare_signing(unknown.as_bytes(), &defs).unwrap_err().family(), "UnknownType");
}

#[test]
fn mapping_coverage_is_per_document() {
    let b = permit_bundle();
    let mut display = b.display.clone();
    display.entries.retain(|e| e.path != "/permit/remark");
    let content = permit_content();
    assert!(build_display(&content, &b.typedef, &display).is_ok());
    let mut with_remark = content.clone();
    with_remark.push(Element::with_text("remark", "late"));
    assert_eq!(
        build_display(&with_remark, &b.typedef, &display),
        Err(WysiwysError::Unmapped("/permit/remark".into()))
    );
}

#[test]
fn format_checks_never_rewrite() {
    let out = report_bundle();
    let content = parse_str(
        "<report><holder><id>h0001</id><name>A</name></holder><site>S</site><office>N</office>\
<outcome>pass</outcome><score>007</score></report>",
    )
    .unwrap();
    let form = build_display(&content, &out.typedef, &out.display).unwrap();
    assert!(form.body.contains(&("Score".to_string(), "007".to_string())));
}

#[test]
fn signed_bytes_are_the_rendered_bytes() {
    let pki = pki();
    let b = permit_bundle();
    let at = ts("2026-03-01T09:00:00Z");
    let rendered = render_to_sign(&draft(&b, permit_content(), at), &b).unwrap();
    assert_eq!(rendered.bytes(), a_canon(&permit_content()).as_slice());
    let doc = sign_rendered(&rendered, &pki.clerk, at).unwrap();
    assert_eq!(doc.signature().digest_value, DigestAlg::Sha256.digest(rendered.bytes()));
    assert!(sign_rendered(&rendered, &pki.clerk_auth, at).is_err());

    let (form, report) = verify_and_render(&doc, &b, &pki.trust, &at).unwrap();
    assert!(report.is_valid());
    assert_eq!(form.header[0], ("Verification".into(), "VALID".into()));
    assert!(form.header.contains(&("Signer".into(), "Permit Office".into())));
    assert_eq!(form.body, rendered.form().body);

    let mut tampered = doc.clone();
    tampered.signed.content.first_mut("site").unwrap().children = vec![XNode::Text("Quay 5".into())];
    let (form, report) = verify_and_render(&tampered, &b, &pki.trust, &at).unwrap();
    assert!(!report.signature_valid());
    assert_eq!(form.header[0].1, "INVALID");

    let mut rebound = doc.clone();
    rebound.header.def_digest = report_bundle().digest();
    assert!(matches!(
        verify_and_render(&rebound, &b, &pki.trust, &at),
        Err(WysiwysError::DefinitionMismatch(_))
    ));
}

fn arb_text() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 &<>\"'éß€.,-]{1,16}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Accepted forms show exactly the content's text values, and rendering
    /// is deterministic.
    #[test]
    fn display_is_complete_and_deterministic(
        name in arb_text(),
        site in arb_text(),
        remark in proptest::option::of(arb_text()),
    ) {
        let b = permit_bundle();
        let mut values = permit_values("h1234", "2026-03-01T09:00:00Z", "2026-04-12T09:00:00Z");
        values.insert("holder/name".into(), name);
        values.insert("site".into(), site);
        if let Some(r) = remark {
            values.insert("remark".into(), r);
        }
        let content = edoc_core::edoc::assemble(&b.typedef, &values).unwrap();
        let form = build_display(&content, &b.typedef, &b.display).unwrap();
        let mut shown: Vec<&str> = form.body_values().collect();
        let mut texts = Vec::new();
        content.walk(&mut |_, e| {
            if !e.has_element_children() && !e.text().is_empty() {
                texts.push(e.text());
            }
        });
        let mut texts: Vec<&str> = texts.iter().map(String::as_str).collect();
        shown.sort();
        texts.sort();
        prop_assert_eq!(shown, texts);
        let twin = build_display(&parse_str(&a_canon_string(&content)).unwrap(), &b.typedef, &b.display).unwrap();
        prop_assert_eq!(twin.serialize(), form.serialize());
    }
}
