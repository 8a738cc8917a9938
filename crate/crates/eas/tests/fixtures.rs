use std::fs;

use edoc_core::bundle::DefinitionSet;
use edoc_core::digest::sha256_hex;
use edoc_core::edoc::EDoc;
use edoc_core::sig::keystore;
use edoc_core::time;
use edoc_core::wysiwys::{prepare_signing, verify_and_render};
use edoc_eas::defs;
use edoc_eas::fixtures::{self, fixture_dir, list_files, FIXTURE_DRAFT, FIXTURE_EEAC};
use edoc_eas::identities::{self as id, passphrase};
use edoc_eas::FixturePki;

/// `sha256sum crates/eas/fixtures/eeac-fixture.xml`
const EEAC_FIXTURE_SHA256: &str = "329bfb894335dd377ff9ecc2608c50aa70fd91c6a14ade030dedb7cef536bce2";

fn definitions() -> DefinitionSet {
    let mut d = DefinitionSet::new();
    for b in defs::all_bundles() {
        d.insert(b);
    }
    d
}

#[test]
fn committed_fixture_digest_is_frozen() {
    let bytes = fs::read(fixture_dir().join(FIXTURE_EEAC)).unwrap();
    assert_eq!(sha256_hex(&bytes), EEAC_FIXTURE_SHA256);
}

#[test]
fn regeneration_reproduces_committed_fixtures() {
    let pki = FixturePki::generate();
    let tmp = tempfile::tempdir().unwrap();
    fixtures::write_fixtures(tmp.path(), &pki, 1_000).unwrap();
    let committed = fixture_dir();
    let mut fresh = list_files(tmp.path()).unwrap();
    fresh.insert("README.md".into());
    assert_eq!(list_files(&committed).unwrap(), fresh);
    for rel in list_files(tmp.path()).unwrap() {
        let (a, b) = (fs::read(committed.join(&rel)).unwrap(), fs::read(tmp.path().join(&rel)).unwrap());
        if rel.starts_with("keys") {
            let name = rel.file_stem().unwrap().to_str().unwrap();
            let key = keystore::open(&a, &passphrase(name)).unwrap();
            assert_eq!(key.secret_bytes(), pki.keys[name].secret_bytes(), "{name}");
        } else {
            assert!(a == b, "{} differs from a fresh generation", rel.display());
        }
    }
}

#[test]
fn loaded_pki_matches_generated() {
    let loaded = FixturePki::load(&fixture_dir()).unwrap();
    let fresh = FixturePki::generate();
    assert_eq!(loaded.certs, fresh.certs);
    assert_eq!(loaded.signer(id::SSO_SIGN).key_id(), fresh.signer(id::SSO_SIGN).key_id());
}

#[test]
fn fixture_card_verifies_and_renders() {
    let pki = FixturePki::generate();
    let doc = EDoc::from_bytes(&fs::read(fixture_dir().join(FIXTURE_EEAC)).unwrap()).unwrap();
    let at = time::parse("2026-01-20T12:00:00Z").unwrap();
    let (form, report) = verify_and_render(&doc, &defs::eeac_bundle(), &pki.doc_trust(), &at).unwrap();
    assert!(report.is_valid());
    assert_eq!(form.header[0], ("Verification".into(), "VALID".into()));
    let body: Vec<&str> = form.body_values().collect();
    assert!(body.contains(&"Ana Horvat") && body.contains(&"01ABC"));
    assert_eq!(form.body.len(), 8);
}

#[test]
fn draft_signs_and_every_attack_is_refused() {
    let defs = definitions();
    let draft = fs::read(fixture_dir().join(FIXTURE_DRAFT)).unwrap();
    assert!(prepare_signing(&draft, &defs).is_ok());
    let attacks = fixtures::attacks();
    assert!(attacks.len() >= 8);
    for a in attacks {
        let bytes = fs::read(fixture_dir().join("attacks").join(format!("attack-{}.xml", a.name))).unwrap();
        assert_eq!(bytes, a.bytes);
        match prepare_signing(&bytes, &defs) {
            Ok(_) => panic!("attack {} was accepted", a.name),
            Err(e) => assert_eq!(e.family(), a.family, "attack {}: {e}", a.name),
        }
    }
}
