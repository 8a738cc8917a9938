//! End-to-end run of the admission service on a live platform.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use edoc_core::edoc::{Check, STATUS};
use edoc_core::time;
use edoc_core::xml::parse;
use edoc_platform::{Platform, Server, SystemClock};
use edoc_protocol::client::Clock;
use edoc_protocol::{Client, Endpoint, Gateway};

use crate::defs::{EEAC, EET, PENDING, PROCESSED, VALIDITY_DAYS};
use crate::fixtures::{copy_tree, REGISTRY_FILE, SCENARIO_PORT, SERVICE_PORT};
use crate::identities::{self as id, FixturePki};
use crate::registry::RegistryStub;
use crate::scenario::{login, marks, AdmissionQuery, Desk, Eas, EasError};

/// Students admitted to 01ABC in the demo.
pub const DEMO_STUDENTS: [&str; 3] = ["s100001", "s100002", "s100003"];
pub const DEMO_EXAM: &str = "01ABC";

#[derive(Debug, Default)]
pub struct DemoReport {
    pub issued: usize,
    pub all_pending_42_days: bool,
    pub duplicate_idempotent: bool,
    pub refusals: Vec<(String, String)>,
    pub foreign_professor: String,
    pub eets: usize,
    pub eacs_processed: usize,
    pub outbox_files: usize,
    pub receipts_ok: bool,
    pub processed_check_fails_status: bool,
    pub expired_check_fails: bool,
    pub integrity_ok: bool,
    pub elapsed: Duration,
}

impl DemoReport {
    pub fn passed(&self) -> bool {
        self.issued == 3
            && self.all_pending_42_days
            && self.duplicate_idempotent
            && self.foreign_professor == "NOT_YOUR_EXAM"
            && self.eets == 3
            && self.eacs_processed == 3
            && self.outbox_files == 3
            && self.receipts_ok
            && self.processed_check_fails_status
            && self.expired_check_fails
            && self.integrity_ok
    }
}

fn fixture_err(e: impl std::fmt::Display) -> EasError {
    EasError::Fixture(e.to_string())
}

/// Copies the fixture data root into `work`, serves it, and walks the
/// admission workflow from request to evaluation.
pub fn run_demo(fixtures: &Path, work: &Path, out: &mut dyn Write) -> Result<DemoReport, EasError> {
    let started = Instant::now();
    let mut rep = DemoReport::default();
    let pki = FixturePki::load(fixtures)?;
    let data = work.join("data");
    copy_tree(&fixtures.join("data"), &data)?;
    let registry = RegistryStub::from_xml(&parse(&fs::read(fixtures.join(REGISTRY_FILE))?).map_err(fixture_err)?)
        .map_err(fixture_err)?;

    let platform = Platform::open(&data, pki.signer(id::PLATFORM), Arc::new(SystemClock)).map_err(fixture_err)?;
    let server = Server::start(platform.clone())?;
    let scenario_addr = server.addr(SCENARIO_PORT).ok_or_else(|| fixture_err("no scenario port"))?;
    let service_addr = server.addr(SERVICE_PORT).ok_or_else(|| fixture_err("no service port"))?;
    let gateway = Gateway::start("127.0.0.1:0", &scenario_addr.to_string())?;
    writeln!(out, "platform: scenario {scenario_addr}, service {service_addr}, gateway {}", gateway.url())?;

    let clock: Clock = Arc::new(time::now);
    let trust = pki.doc_trust();
    let desk = |ep: Endpoint, role: &str, sign: &str| {
        Desk::new(Client::new(ep, pki.signer(role), trust.clone()), pki.signer(sign), clock.clone())
    };
    let mut sso = desk(Endpoint::Tcp(scenario_addr.to_string()), id::SSO_ROLE, id::SSO_SIGN);
    let mut rossi = desk(Endpoint::Gateway(gateway.url()), id::PROFESSOR_ROLE, id::ROSSI_SIGN);
    let mut bianchi = desk(Endpoint::Gateway(gateway.url()), id::PROFESSOR_ROLE, id::BIANCHI_SIGN);
    let mut exam_desk = desk(Endpoint::Tcp(service_addr.to_string()), id::PROFESSOR_ROLE, id::ROSSI_SIGN);
    let eas = Eas::new(
        registry,
        platform.usermap().clone(),
        trust.clone(),
        work.join("outbox"),
        clock.clone(),
    );
    let login_as = |name: &str| login(&pki.signer(name), time::now());

    writeln!(out, "\n== admission requests ({DEMO_EXAM})")?;
    let mut eac_ids = Vec::new();
    rep.all_pending_42_days = true;
    for s in DEMO_STUDENTS {
        let a = eas.request_admission(&mut sso, &login_as(&id::student_auth(s))?, DEMO_EXAM)?;
        let c = a.doc.content();
        let nb = c.select_text("/eEAC/validity/notBefore").and_then(|v| time::parse(&v));
        let na = c.select_text("/eEAC/validity/notAfter").and_then(|v| time::parse(&v));
        let span_ok = matches!((nb, na), (Some(b), Some(e)) if e - b == chrono::Duration::days(VALIDITY_DAYS));
        let status = sso.get(EEAC, &a.doc_id)?.attrs.status().map(str::to_string);
        rep.all_pending_42_days &= span_ok && status.as_deref() == Some(PENDING) && a.created;
        writeln!(
            out,
            "issued e-EAC {} for {s}: status {}, valid {} .. {}",
            &a.doc_id[..16],
            status.unwrap_or_default(),
            nb.map(|t| time::format(&t)).unwrap_or_default(),
            na.map(|t| time::format(&t)).unwrap_or_default()
        )?;
        eac_ids.push(a.doc_id);
    }
    rep.issued = eac_ids.len();
    let again = eas.request_admission(&mut sso, &login_as(&id::student_auth("s100001"))?, DEMO_EXAM)?;
    rep.duplicate_idempotent = !again.created && again.doc_id == eac_ids[0];
    writeln!(out, "repeated request for s100001 returns {} (new: {})", &again.doc_id[..16], again.created)?;
    for (s, exam) in [("s100004", DEMO_EXAM), ("s100005", DEMO_EXAM), ("s100006", DEMO_EXAM), ("s100001", "99XYZ")] {
        let code = match eas.request_admission(&mut sso, &login_as(&id::student_auth(s))?, exam) {
            Ok(_) => "ADMITTED".to_string(),
            Err(e) => e.code(),
        };
        writeln!(out, "request {s}/{exam}: {code}")?;
        rep.refusals.push((format!("{s}/{exam}"), code));
    }

    writeln!(out, "\n== exam processing")?;
    rep.foreign_professor = match eas.process_exam(&mut bianchi, &login_as(id::BIANCHI_AUTH)?, DEMO_EXAM, &BTreeMap::new()) {
        Ok(_) => "ACCEPTED".into(),
        Err(e) => e.code(),
    };
    writeln!(out, "p002 processing {DEMO_EXAM}: {}", rep.foreign_professor)?;
    let results: BTreeMap<String, BTreeMap<String, String>> = [("s100001", "28"), ("s100002", "30"), ("s100003", "19")]
        .into_iter()
        .map(|(s, m)| (s.to_string(), marks("2026-02-10", m, "Consensus; clock drift; quorum reads")))
        .collect();
    let processed = eas.process_exam(&mut rossi, &login_as(id::ROSSI_AUTH)?, DEMO_EXAM, &results)?;
    for i in &processed.issued {
        writeln!(out, "issued e-EET {} for {} (render {})", &i.eet_id[..16], i.student_id, &i.render_digest[..16])?;
    }
    for (eac, s, e) in &processed.skipped {
        writeln!(out, "left pending {} for {s}: {}", &eac[..16], e.code())?;
    }
    rep.eets = processed.issued.len();

    writeln!(out, "\n== verification")?;
    rep.receipts_ok = true;
    for i in &processed.issued {
        let eet = rossi.get(EET, &i.eet_id)?;
        let ok = eet.receipt.as_ref().is_some_and(|r| r.binds(&eet.doc, &trust, &time::now()));
        rep.receipts_ok &= ok;
        let eac = rossi.get(EEAC, &i.eac_id)?;
        if eac.attrs.status() == Some(PROCESSED) {
            rep.eacs_processed += 1;
        }
        writeln!(
            out,
            "{}: receipt {}, e-EAC {} {}",
            &i.eet_id[..16],
            if ok { "binds" } else { "BROKEN" },
            &i.eac_id[..16],
            eac.attrs.get(STATUS).unwrap_or("?")
        )?;
    }
    rep.outbox_files = fs::read_dir(work.join("outbox")).map(|d| d.count()).unwrap_or(0);
    writeln!(out, "outbox: {} files", rep.outbox_files)?;

    let check = eas.check_admission(
        &mut exam_desk,
        AdmissionQuery::Lookup {
            student_id: "s100001".into(),
            exam_code: DEMO_EXAM.into(),
        },
        None,
    )?;
    rep.processed_check_fails_status = matches!(check.report.status, Check::Fail(_));
    writeln!(out, "check s100001/{DEMO_EXAM} now: status {}", check.report.status)?;
    let eac0 = exam_desk.get(EEAC, &eac_ids[0])?.doc;
    let later = time::now() + chrono::Duration::days(VALIDITY_DAYS + 1);
    let expired = exam_desk.validate_inline(&eac0, Some(later))?;
    rep.expired_check_fails = matches!(expired.within_validity_period, Check::Fail(_));
    writeln!(out, "check at +{} days: withinValidityPeriod {}", VALIDITY_DAYS + 1, expired.within_validity_period)?;

    writeln!(out, "\n== restart")?;
    server.shutdown();
    gateway.shutdown();
    drop(server);
    drop(platform);
    let reopened = Platform::open(&data, pki.signer(id::PLATFORM), Arc::new(SystemClock)).map_err(fixture_err)?;
    let integrity = reopened.integrity().clone();
    rep.integrity_ok = integrity.is_ok() && integrity.documents == 6;
    writeln!(out, "{integrity}")?;

    rep.elapsed = started.elapsed();
    writeln!(
        out,
        "\ndemo {} in {:.2} s",
        if rep.passed() { "PASSED" } else { "FAILED" },
        rep.elapsed.as_secs_f64()
    )?;
    Ok(rep)
}

