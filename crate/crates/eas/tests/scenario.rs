mod common;

use std::collections::BTreeMap;
use std::fs;

use common::World;
use edoc_core::edoc::{Check, EDoc, STATUS};
use edoc_core::sig::{issue_cert, CertTemplate, PrivateKey, Purpose, SigAlg, Signer};
use edoc_core::time;
use edoc_eas::defs::{EEAC, EET, PENDING, PROCESSED, VALIDITY_DAYS};
use edoc_eas::fixtures::{self, SERVICE_PORT};
use edoc_eas::identities as id;
use edoc_eas::scenario::marks;
use edoc_eas::{login, AdmissionQuery, EasError, Refusal};
use edoc_platform::RoleMap;
use edoc_protocol::commands::{self, Predicate};
use edoc_protocol::codes;

fn days(n: i64) -> chrono::Duration {
    chrono::Duration::days(n)
}

fn refusals(r: Result<edoc_eas::scenario::Admission, EasError>) -> Vec<Refusal> {
    match r {
        Err(EasError::Refused(v)) => v,
        other => panic!("expected a refusal, got {other:?}"),
    }
}

fn platform_status<T: std::fmt::Debug>(r: Result<T, EasError>) -> String {
    match r {
        Err(EasError::Platform { status, .. }) => status,
        other => panic!("expected a platform error, got {other:?}"),
    }
}

fn results(students: &[(&str, &str)]) -> BTreeMap<String, BTreeMap<String, String>> {
    students
        .iter()
        .map(|(s, m)| (s.to_string(), marks("2026-03-20", m, "two-phase commit")))
        .collect()
}

#[test]
fn admission_is_issued_once_with_a_42_day_window() {
    let w = World::new();
    let mut sso = w.sso();
    let a = w.eas.request_admission(&mut sso, &w.student("s100001"), "01ABC").unwrap();
    assert!(a.created);
    assert!(a.receipt.as_ref().unwrap().binds(&a.doc, &w.pki.doc_trust(), &w.now()));
    let c = a.doc.content();
    let nb = time::parse(&c.select_text("/eEAC/validity/notBefore").unwrap()).unwrap();
    let na = time::parse(&c.select_text("/eEAC/validity/notAfter").unwrap()).unwrap();
    assert_eq!(nb, w.now());
    assert_eq!(na - nb, days(VALIDITY_DAYS));
    assert_eq!(c.select_text("/eEAC/student/name").as_deref(), Some("Ana Horvat"));
    assert_eq!(a.doc.signature().signer.subject, "Student Secretariat Office");
    assert_eq!(sso.get(EEAC, &a.doc_id).unwrap().attrs.status(), Some(PENDING));

    w.clock.advance(chrono::Duration::minutes(3));
    let again = w.eas.request_admission(&mut sso, &w.student("s100001"), "01ABC").unwrap();
    assert!(!again.created);
    assert_eq!(again.doc_id, a.doc_id);
    assert_eq!(w.platform.document_count(), 1);

    // A second exam is a separate card.
    let other = w.eas.request_admission(&mut sso, &w.student("s100001"), "02DEF").unwrap();
    assert!(other.created && other.doc_id != a.doc_id);
}

#[test]
fn registry_refusals_are_reported_individually() {
    let w = World::new();
    let mut sso = w.sso();
    let mut ask = |s: &str, exam: &str| refusals(w.eas.request_admission(&mut sso, &w.student(s), exam));
    assert_eq!(ask("s100004", "01ABC"), [Refusal::PaymentDue]);
    assert_eq!(ask("s100005", "01ABC"), [Refusal::NotEnrolled]);
    assert_eq!(ask("s100006", "01ABC"), [Refusal::NoExamRights]);
    assert_eq!(ask("s100001", "99XYZ"), [Refusal::UnknownExam, Refusal::NoExamRights]);
    assert_eq!(ask("s100005", "02DEF"), [Refusal::NotEnrolled, Refusal::NoExamRights]);
    assert_eq!(
        EasError::Refused(vec![Refusal::NotEnrolled, Refusal::NoExamRights]).code(),
        "NOT_ENROLLED, NO_EXAM_RIGHTS"
    );
    assert_eq!(w.platform.document_count(), 0);
}

#[test]
fn logins_are_checked() {
    let w = World::new();
    let mut sso = w.sso();
    // Stale statement.
    let old = login(&w.pki.signer(&id::student_auth("s100001")), w.now() - chrono::Duration::minutes(6)).unwrap();
    assert!(matches!(w.eas.request_admission(&mut sso, &old, "01ABC"), Err(EasError::AuthFailed(_))));
    // Signing key instead of an authentication key.
    let wrong = w.pki.signer(id::ROSSI_SIGN).sign(
        &edoc_core::xml::Element::new("login").attr("timestamp", time::format(&w.now())),
        Purpose::Sign,
        w.now(),
        BTreeMap::new(),
    );
    assert!(wrong.is_ok());
    assert!(matches!(
        w.eas.request_admission(&mut sso, &wrong.unwrap(), "01ABC"),
        Err(EasError::AuthFailed(_))
    ));
    // Valid certificate that nobody mapped.
    let key = PrivateKey::from_seed(SigAlg::Ed25519, [7; 32]);
    let nb = time::parse(id::NOT_BEFORE).unwrap();
    let cert = issue_cert(
        CertTemplate::new("Stray", key.public_key(), [Purpose::Auth], nb, time::parse(id::NOT_AFTER).unwrap(), 99),
        &w.pki.keys[id::ROOT],
        w.pki.cert(id::ROOT),
        &nb,
    )
    .unwrap();
    let stray = login(&Signer::new(key, cert).unwrap(), w.now()).unwrap();
    assert!(matches!(w.eas.request_admission(&mut sso, &stray, "01ABC"), Err(EasError::UnknownIdentity)));
    // Tampered statement.
    let mut t = w.student("s100001");
    t.content.set_attr("timestamp", time::format(&(w.now() + chrono::Duration::seconds(1))));
    assert!(matches!(w.eas.request_admission(&mut sso, &t, "01ABC"), Err(EasError::AuthFailed(_))));
}

#[test]
fn processing_isolates_each_card_and_conserves_documents() {
    let w = World::new();
    let mut sso = w.sso();
    let mut eacs = BTreeMap::new();
    for s in ["s100001", "s100002", "s100003"] {
        eacs.insert(s, w.eas.request_admission(&mut sso, &w.student(s), "01ABC").unwrap());
    }
    let other = w.eas.request_admission(&mut sso, &w.student("s100002"), "02DEF").unwrap();
    w.clock.advance(chrono::Duration::hours(2));

    let mut rossi = w.rossi();
    let mut res = results(&[("s100001", "27"), ("s100003", "30")]);
    // s100002 has no mark; s100003 gets one outside the pattern.
    let mut no_mark = marks("2026-03-20", "", "two-phase commit");
    no_mark.remove(edoc_eas::defs::EET_MARK);
    res.insert("s100002".into(), no_mark);
    res.get_mut("s100003").unwrap().insert(edoc_eas::defs::EET_MARK.into(), "31".into());
    let first = w.eas.process_exam(&mut rossi, &w.login(id::ROSSI_AUTH), "01ABC", &res).unwrap();
    assert_eq!(first.issued.len(), 1);
    assert_eq!(first.issued[0].student_id, "s100001");
    let skipped: BTreeMap<&str, String> = first.skipped.iter().map(|(_, s, e)| (s.as_str(), e.code())).collect();
    assert_eq!(skipped["s100002"], codes::MANUAL_FIELD_MISSING);
    assert!(first.skipped.iter().any(|(_, _, e)| e.to_string().contains("Mark")));
    assert_eq!(skipped["s100003"], codes::PATTERN_VIOLATION);

    let status = |rossi: &mut edoc_eas::Desk, id: &str| rossi.get(EEAC, id).unwrap().attrs.status().unwrap().to_string();
    assert_eq!(status(&mut rossi, &eacs["s100001"].doc_id), PROCESSED);
    assert_eq!(status(&mut rossi, &eacs["s100002"].doc_id), PENDING);
    assert_eq!(status(&mut rossi, &eacs["s100003"].doc_id), PENDING);
    assert_eq!(status(&mut rossi, &other.doc_id), PENDING);

    let second = w
        .eas
        .process_exam(&mut rossi, &w.login(id::ROSSI_AUTH), "01ABC", &results(&[("s100002", "18"), ("s100003", "30")]))
        .unwrap();
    assert_eq!(second.issued.len(), 2);
    assert!(second.skipped.is_empty());
    let third = w.eas.process_exam(&mut rossi, &w.login(id::ROSSI_AUTH), "01ABC", &res).unwrap();
    assert!(third.issued.is_empty() && third.skipped.is_empty());

    // Conservation: every 01ABC card is processed and has exactly one ticket.
    let eets = rossi.search(EET, &[Predicate::Field("/eEET/exam/code".into(), "01ABC".into())]).unwrap();
    assert_eq!(eets.len(), 3);
    let processed = rossi
        .search(EEAC, &[Predicate::Attr(STATUS.into(), PROCESSED.into())])
        .unwrap();
    assert_eq!(processed.len(), 3);
    assert_eq!(w.platform.document_count(), 4 + 3);

    // Provenance: each ticket copies its card and carries the professor's signature.
    for issued in first.issued.iter().chain(&second.issued) {
        let eet = rossi.get(EET, &issued.eet_id).unwrap();
        let eac = rossi.get(EEAC, &issued.eac_id).unwrap();
        for f in ["student/id", "student/name", "student/placeOfBirth", "faculty/name", "exam/code", "exam/name", "validity/notBefore", "validity/notAfter"] {
            assert_eq!(
                eet.doc.content().select_text(&format!("/eEET/{f}")),
                eac.doc.content().select_text(&format!("/eEAC/{f}")),
                "{f}"
            );
        }
        assert_eq!(eet.doc.signature().signer.subject, "Prof. Elena Rossi");
        assert!(eet.receipt.unwrap().binds(&eet.doc, &w.pki.doc_trust(), &w.now()));
        let out = fs::read(w.dir.path().join("outbox").join(format!("{}.xml", issued.eet_id))).unwrap();
        assert_eq!(EDoc::from_bytes(&out).unwrap().doc_id(), issued.eet_id);
    }
}

#[test]
fn professors_only_process_their_own_exams() {
    let w = World::new();
    let mut sso = w.sso();
    w.eas.request_admission(&mut sso, &w.student("s100001"), "01ABC").unwrap();
    let mut bianchi = w.desk_on(fixtures::SCENARIO_PORT, id::PROFESSOR_ROLE, id::BIANCHI_SIGN);
    let r = w.eas.process_exam(&mut bianchi, &w.login(id::BIANCHI_AUTH), "01ABC", &results(&[("s100001", "20")]));
    assert_eq!(r.unwrap_err().code(), "NOT_YOUR_EXAM");
    // Students are not professors either.
    let r = w.eas.process_exam(&mut bianchi, &w.student("s100001"), "01ABC", &BTreeMap::new());
    assert_eq!(r.unwrap_err().code(), "NOT_YOUR_EXAM");
    assert_eq!(w.platform.document_count(), 1);
}

#[test]
fn professor_role_without_eeac_is_denied_by_the_platform() {
    let w = World::new();
    let mut sso = w.sso();
    w.eas.request_admission(&mut sso, &w.student("s100001"), "01ABC").unwrap();
    let mut map: RoleMap = fixtures::rolemap(&w.pki);
    let prof_key = w.pki.cert(id::PROFESSOR_ROLE).key.key_id();
    map.entries.get_mut(&prof_key).unwrap().edoc_types.remove(EEAC);
    w.admin().call(commands::set_role_map(map.to_xml())).unwrap();

    let mut rossi = w.rossi();
    let r = w.eas.process_exam(&mut rossi, &w.login(id::ROSSI_AUTH), "01ABC", &results(&[("s100001", "25")]));
    assert_eq!(r.unwrap_err().code(), codes::DENIED_DOCTYPE);
    assert_eq!(w.platform.document_count(), 1);
}

#[test]
fn professor_cannot_touch_configuration() {
    let w = World::new();
    let mut rossi = w.rossi();
    let map = fixtures::rolemap(&w.pki).to_xml();
    for cmd in [
        commands::set_role_map(map),
        commands::put_definition(&edoc_eas::defs::eet_bundle()),
        commands::port_control("scenario", "stop"),
        commands::get_log(0, None),
        commands::revoke(EEAC, &"0".repeat(64), "no"),
        commands::counter_sign(EEAC, &"0".repeat(64), "sha256"),
    ] {
        assert_eq!(platform_status(rossi.call(cmd)), codes::DENIED_COMMAND);
    }
    // Even through the admin port.
    let mut on_admin = w.desk_on(edoc_platform::ADMIN_PORT, id::PROFESSOR_ROLE, id::ROSSI_SIGN);
    assert_eq!(
        platform_status(on_admin.call(commands::set_role_map(fixtures::rolemap(&w.pki).to_xml()))),
        codes::DENIED_COMMAND
    );
}

#[test]
fn admission_checks_agree_across_lookup_paths() {
    let w = World::new();
    let mut sso = w.sso();
    let a = w.eas.request_admission(&mut sso, &w.student("s100002"), "01ABC").unwrap();
    w.clock.advance(days(3));
    let mut desk = w.desk_on(SERVICE_PORT, id::PROFESSOR_ROLE, id::ROSSI_SIGN);
    let lookup = || AdmissionQuery::Lookup {
        student_id: "s100002".into(),
        exam_code: "01ABC".into(),
    };
    let by_file = w.eas.check_admission(&mut desk, AdmissionQuery::File(Box::new(a.doc.clone())), None).unwrap();
    let by_id = w.eas.check_admission(&mut desk, lookup(), None).unwrap();
    assert_eq!(by_file.report, by_id.report);
    assert_eq!(by_file.form, by_id.form);
    assert!(by_id.report.is_valid());
    assert_eq!(by_id.form.header[0].1, "VALID");

    // Expired at +43 days, on both paths.
    let late = Some(w.now() - days(3) + days(VALIDITY_DAYS + 1));
    let f = w.eas.check_admission(&mut desk, AdmissionQuery::File(Box::new(a.doc.clone())), late).unwrap();
    let l = w.eas.check_admission(&mut desk, lookup(), late).unwrap();
    assert_eq!(f.report, l.report);
    assert!(matches!(l.report.within_validity_period, Check::Fail(_)));
    assert!(l.report.signatures.passed() && l.report.status.passed());

    // Processed cards fail the status check.
    let mut rossi = w.rossi();
    w.eas
        .process_exam(&mut rossi, &w.login(id::ROSSI_AUTH), "01ABC", &results(&[("s100002", "24")]))
        .unwrap();
    let after = w.eas.check_admission(&mut desk, lookup(), None).unwrap();
    assert!(matches!(after.report.status, Check::Fail(_)));
    assert!(after.report.within_validity_period.passed());

    // A card that was never stored is validated inline.
    let foreign = fixtures::fixture_eeac(&w.pki);
    let r = w.eas.check_admission(&mut desk, AdmissionQuery::File(Box::new(foreign)), None).unwrap();
    assert!(matches!(r.report.status, Check::NotApplicable(_)));
    assert!(matches!(r.report.within_validity_period, Check::Fail(_)));
    assert!(r.report.signatures.passed());

    let none = w.eas.check_admission(
        &mut desk,
        AdmissionQuery::Lookup {
            student_id: "s100006".into(),
            exam_code: "01ABC".into(),
        },
        None,
    );
    assert!(matches!(none, Err(EasError::NotFound(_))));
}
