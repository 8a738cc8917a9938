//! The service application: admission requests, exam processing and
//! admission checks, driven through platform desks.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use edoc_core::bundle::DefinitionBundle;
use edoc_core::edoc::{Draft, EDoc, Receipt, ValidityReport, STATUS};
use edoc_core::sig::{verify_envelope, Purpose, SigError, SignedDoc, Signer, TrustStore};
use edoc_core::time::{self, Timestamp};
use edoc_core::wysiwys::{render_to_sign, sign_rendered, verify_and_render, DisplayForm, WysiwysError};
use edoc_core::xml::{a_canon, Element};
use edoc_platform::UserMap;
use edoc_protocol::client::Clock;
use edoc_protocol::commands::{self, hits_from_xml, DocRecordView, Link, Predicate, SearchHit, Stored};
use edoc_protocol::{codes, Client, ClientError, Command, Response};
use thiserror::Error;

use crate::defs::{self, EEAC, EET, PENDING, PROCESSED};
use crate::fixtures::eeac_fields;
use crate::registry::{Refusal, RegistryStub};

/// How far a login timestamp may be from the service clock.
pub const LOGIN_WINDOW_SECS: i64 = 300;

#[derive(Debug, Error)]
pub enum EasError {
    #[error("admission refused: {}", codes_of(.0))]
    Refused(Vec<Refusal>),
    #[error("authentication key is not mapped to a user")]
    UnknownIdentity,
    #[error("login rejected: {0}")]
    AuthFailed(String),
    #[error("exam {0} is not assigned to this professor")]
    NotYourExam(String),
    #[error("{command} failed: {status} {detail}")]
    Platform { command: String, status: String, detail: String },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("render refused: {0}")]
    Render(#[from] WysiwysError),
    #[error(transparent)]
    Sig(#[from] SigError),
    #[error("unexpected platform payload: {0}")]
    Payload(String),
    #[error("receipt does not bind document {0}")]
    BadReceipt(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("fixture: {0}")]
    Fixture(String),
    #[error("outbox: {0}")]
    Io(#[from] std::io::Error),
}

fn codes_of(r: &[Refusal]) -> String {
    r.iter().map(|x| x.code()).collect::<Vec<_>>().join(", ")
}

impl From<edoc_core::edoc::EdocError> for EasError {
    fn from(e: edoc_core::edoc::EdocError) -> Self {
        EasError::Payload(e.to_string())
    }
}

impl EasError {
    /// Stable code for reports and wire payloads.
    pub fn code(&self) -> String {
        match self {
            EasError::Refused(r) => codes_of(r),
            EasError::UnknownIdentity => "UNKNOWN_IDENTITY".into(),
            EasError::AuthFailed(_) => "AUTH_FAILED".into(),
            EasError::NotYourExam(_) => "NOT_YOUR_EXAM".into(),
            EasError::Platform { status, .. } => status.clone(),
            EasError::Client(_) => "TRANSPORT".into(),
            EasError::Render(e) => e.family().into(),
            EasError::Sig(_) => "SIGNATURE".into(),
            EasError::Payload(_) => "BAD_PAYLOAD".into(),
            EasError::BadReceipt(_) => "BAD_RECEIPT".into(),
            EasError::NotFound(_) => codes::NOT_FOUND.into(),
            EasError::Fixture(_) => "FIXTURE".into(),
            EasError::Io(_) => "IO".into(),
        }
    }
}

/// A signed `<login>` statement made with an authentication key.
pub fn login(auth: &Signer, at: Timestamp) -> Result<SignedDoc, SigError> {
    let content = Element::new("login").attr("timestamp", time::format(&at));
    auth.sign(&content, Purpose::Auth, at, BTreeMap::new())
}

/// A platform connection plus the personal signing key used at it.
pub struct Desk {
    client: Client,
    signer: Signer,
    clock: Clock,
}

fn payload<'a>(resp: &'a Response, name: &str) -> Result<&'a Element, EasError> {
    resp.first(name)
        .ok_or_else(|| EasError::Payload(format!("response lacks <{name}>")))
}

impl Desk {
    pub fn new(client: Client, signer: Signer, clock: Clock) -> Self {
        Desk { client, signer, clock }
    }

    pub fn client(&mut self) -> &mut Client {
        &mut self.client
    }

    pub fn now(&self) -> Timestamp {
        (self.clock)()
    }

    /// Sends a command; any status other than OK becomes an error.
    pub fn call(&mut self, cmd: Command) -> Result<Response, EasError> {
        let name = cmd.name.clone();
        let resp = self.client.call(cmd)?;
        if resp.is_ok() {
            Ok(resp)
        } else {
            Err(EasError::Platform {
                command: name,
                status: resp.status.clone(),
                detail: resp.detail(),
            })
        }
    }

    pub fn create(&mut self, cmd: Command) -> Result<Draft, EasError> {
        let resp = self.call(cmd)?;
        Ok(Draft::from_xml(payload(&resp, "edoc")?)?)
    }

    pub fn definition(&mut self, type_id: &str, version: u32) -> Result<DefinitionBundle, EasError> {
        let resp = self.call(commands::get_definition(type_id, Some(version)))?;
        DefinitionBundle::from_xml(payload(&resp, "bundle")?).map_err(|e| EasError::Payload(e.to_string()))
    }

    /// Renders the draft against its definition and signs what was rendered.
    pub fn sign_draft(&mut self, draft: &Draft) -> Result<(EDoc, DisplayForm), EasError> {
        let bundle = self.definition(&draft.header.type_id, draft.header.version)?;
        let rendered = render_to_sign(draft, &bundle)?;
        let doc = sign_rendered(&rendered, &self.signer, self.now())?;
        Ok((doc, rendered.form().clone()))
    }

    pub fn store(&mut self, doc: &EDoc, link: Option<&Link>) -> Result<Stored, EasError> {
        let resp = self.call(commands::store(doc, link))?;
        Stored::from_xml(payload(&resp, "stored")?).ok_or_else(|| EasError::Payload("bad <stored>".into()))
    }

    pub fn get(&mut self, type_id: &str, doc_id: &str) -> Result<DocRecordView, EasError> {
        let resp = self.call(commands::get(type_id, doc_id))?;
        DocRecordView::from_xml(payload(&resp, "record")?).ok_or_else(|| EasError::Payload("bad <record>".into()))
    }

    pub fn search(&mut self, type_id: &str, preds: &[Predicate]) -> Result<Vec<SearchHit>, EasError> {
        let resp = self.call(commands::search(type_id, preds))?;
        hits_from_xml(payload(&resp, "results")?).ok_or_else(|| EasError::Payload("bad <results>".into()))
    }

    fn report(&mut self, cmd: Command) -> Result<ValidityReport, EasError> {
        let resp = self.call(cmd)?;
        Ok(ValidityReport::from_xml(payload(&resp, "ValidityReport")?)?)
    }

    pub fn validate_stored(&mut self, type_id: &str, doc_id: &str, at: Option<Timestamp>) -> Result<ValidityReport, EasError> {
        self.report(commands::validate_stored(type_id, doc_id, at))
    }

    pub fn validate_inline(&mut self, doc: &EDoc, at: Option<Timestamp>) -> Result<ValidityReport, EasError> {
        self.report(commands::validate_inline(doc, at))
    }
}

/// Result of an admission request.
#[derive(Debug, Clone)]
pub struct Admission {
    pub doc_id: String,
    pub doc: EDoc,
    pub receipt: Option<Receipt>,
    /// False when an existing pending card was returned.
    pub created: bool,
}

#[derive(Debug, Clone)]
pub struct IssuedEet {
    pub eac_id: String,
    pub eet_id: String,
    pub student_id: String,
    pub render_digest: String,
}

/// Outcome of processing one exam: every pending card ends up in exactly
/// one of the two lists.
#[derive(Debug, Default)]
pub struct ProcessReport {
    pub issued: Vec<IssuedEet>,
    pub skipped: Vec<(String, String, EasError)>,
}

pub enum AdmissionQuery {
    File(Box<EDoc>),
    Lookup { student_id: String, exam_code: String },
}

#[derive(Debug, Clone)]
pub struct AdmissionCheck {
    pub doc_id: String,
    pub report: ValidityReport,
    pub form: DisplayForm,
}

/// Manual fields of one exam result, keyed by e-EET path.
pub fn marks(date: &str, mark: &str, questions: &str) -> BTreeMap<String, String> {
    BTreeMap::from([
        (defs::EET_DATE.to_string(), date.to_string()),
        (defs::EET_MARK.to_string(), mark.to_string()),
        (defs::EET_QUESTIONS.to_string(), questions.to_string()),
    ])
}

pub struct Eas {
    pub registry: RegistryStub,
    pub usermap: UserMap,
    pub doc_trust: TrustStore,
    pub outbox: PathBuf,
    clock: Clock,
}

impl Eas {
    pub fn new(registry: RegistryStub, usermap: UserMap, doc_trust: TrustStore, outbox: PathBuf, clock: Clock) -> Self {
        Eas {
            registry,
            usermap,
            doc_trust,
            outbox,
            clock,
        }
    }

    pub fn now(&self) -> Timestamp {
        (self.clock)()
    }

    /// Checks a login statement and maps its key to a registry id.
    pub fn authenticate(&self, login: &SignedDoc) -> Result<String, EasError> {
        let now = self.now();
        if login.content.name != "login" {
            return Err(EasError::AuthFailed("not a login statement".into()));
        }
        let report = verify_envelope(login, &self.doc_trust, &now);
        if !report.is_valid() {
            return Err(EasError::AuthFailed("signature does not verify".into()));
        }
        let cert = &login.signature.signer;
        if login.signature.purpose != Purpose::Auth || !cert.has_purpose(Purpose::Auth) {
            return Err(EasError::AuthFailed("not an authentication key".into()));
        }
        let stated = login
            .content
            .get_attr("timestamp")
            .and_then(time::parse)
            .ok_or_else(|| EasError::AuthFailed("bad timestamp".into()))?;
        if (now - stated).num_seconds().abs() > LOGIN_WINDOW_SECS {
            return Err(EasError::AuthFailed("login is stale".into()));
        }
        self.usermap
            .lookup(&cert.key.key_id())
            .map(str::to_string)
            .ok_or(EasError::UnknownIdentity)
    }

    fn pending_eeacs(&self, desk: &mut Desk, student_id: Option<&str>, exam_code: &str) -> Result<Vec<SearchHit>, EasError> {
        let mut preds = vec![
            Predicate::Field(format!("/{EEAC}/exam/code"), exam_code.into()),
            Predicate::Attr(STATUS.into(), PENDING.into()),
        ];
        if let Some(s) = student_id {
            preds.push(Predicate::Field(format!("/{EEAC}/student/id"), s.into()));
        }
        desk.search(EEAC, &preds)
    }

    /// Issues a pending admission card for the logged-in student. Asking
    /// twice returns the card already pending.
    pub fn request_admission(&self, desk: &mut Desk, login: &SignedDoc, exam_code: &str) -> Result<Admission, EasError> {
        let student_id = self.authenticate(login)?;
        let refusals = self.registry.check(&student_id, exam_code);
        if !refusals.is_empty() {
            return Err(EasError::Refused(refusals));
        }
        if let Some(hit) = self.pending_eeacs(desk, Some(&student_id), exam_code)?.into_iter().next() {
            let rec = desk.get(EEAC, &hit.doc_id)?;
            return Ok(Admission {
                doc_id: hit.doc_id,
                doc: rec.doc,
                receipt: rec.receipt,
                created: false,
            });
        }
        let fields = eeac_fields(&self.registry, &student_id, exam_code, self.now())
            .ok_or_else(|| EasError::NotFound(format!("{student_id}/{exam_code}")))?;
        let draft = desk.create(commands::create_from_fields(EEAC, &fields))?;
        let (doc, _) = desk.sign_draft(&draft)?;
        let stored = desk.store(&doc, None)?;
        if !stored.receipt.binds(&doc, &self.doc_trust, &self.now()) {
            return Err(EasError::BadReceipt(stored.doc_id));
        }
        Ok(Admission {
            doc_id: stored.doc_id,
            doc,
            receipt: Some(stored.receipt),
            created: true,
        })
    }

    /// Turns each pending card of the exam into an evaluation ticket. A
    /// failure on one card leaves that card pending and moves on.
    pub fn process_exam(
        &self,
        desk: &mut Desk,
        login: &SignedDoc,
        exam_code: &str,
        results: &BTreeMap<String, BTreeMap<String, String>>,
    ) -> Result<ProcessReport, EasError> {
        let professor = self.authenticate(login)?;
        let exam = self
            .registry
            .exams
            .get(exam_code)
            .ok_or(EasError::Refused(vec![Refusal::UnknownExam]))?;
        if exam.professor_id != professor {
            return Err(EasError::NotYourExam(exam_code.into()));
        }
        let mut report = ProcessReport::default();
        for hit in self.pending_eeacs(desk, None, exam_code)? {
            let student = hit.field(&format!("/{EEAC}/student/id")).unwrap_or_default().to_string();
            let empty = BTreeMap::new();
            let manual = results.get(&student).unwrap_or(&empty);
            match self.process_one(desk, &hit.doc_id, manual) {
                Ok((eet_id, render_digest)) => report.issued.push(IssuedEet {
                    eac_id: hit.doc_id,
                    eet_id,
                    student_id: student,
                    render_digest,
                }),
                Err(e) => {
                    log::info!("{} left pending: {e}", hit.doc_id);
                    report.skipped.push((hit.doc_id, student, e));
                }
            }
        }
        Ok(report)
    }

    fn process_one(&self, desk: &mut Desk, eac_id: &str, manual: &BTreeMap<String, String>) -> Result<(String, String), EasError> {
        let draft = desk.create(commands::create_from_input(EET, eac_id, manual))?;
        let (doc, form) = desk.sign_draft(&draft)?;
        let link = Link {
            doc_id: eac_id.into(),
            to: PROCESSED.into(),
            expect: Some(PENDING.into()),
        };
        let stored = desk.store(&doc, Some(&link))?;
        if !stored.receipt.binds(&doc, &self.doc_trust, &self.now()) {
            return Err(EasError::BadReceipt(stored.doc_id));
        }
        fs::create_dir_all(&self.outbox)?;
        fs::write(self.outbox.join(format!("{}.xml", stored.doc_id)), a_canon(&doc.to_xml()))?;
        Ok((stored.doc_id, form.render_digest()))
    }

    /// Validity report and verified rendering of an admission card, given
    /// either the card itself or the student and exam.
    pub fn check_admission(&self, desk: &mut Desk, query: AdmissionQuery, at: Option<Timestamp>) -> Result<AdmissionCheck, EasError> {
        let (doc, report) = match query {
            AdmissionQuery::File(doc) => {
                let doc = *doc;
                let id = doc.doc_id();
                let report = match desk.validate_stored(&doc.header.type_id, &id, at) {
                    Err(EasError::Platform { status, .. }) if status == codes::NOT_FOUND => desk.validate_inline(&doc, at)?,
                    other => other?,
                };
                (doc, report)
            }
            AdmissionQuery::Lookup { student_id, exam_code } => {
                let preds = [
                    Predicate::Field(format!("/{EEAC}/student/id"), student_id.clone()),
                    Predicate::Field(format!("/{EEAC}/exam/code"), exam_code.clone()),
                ];
                let hits = desk.search(EEAC, &preds)?;
                let hit = hits
                    .iter()
                    .find(|h| h.attrs.status() == Some(PENDING))
                    .or_else(|| hits.first())
                    .ok_or_else(|| EasError::NotFound(format!("no admission card for {student_id}/{exam_code}")))?;
                let doc = desk.get(EEAC, &hit.doc_id)?.doc;
                let report = desk.validate_stored(EEAC, &hit.doc_id, at)?;
                (doc, report)
            }
        };
        let bundle = desk.definition(&doc.header.type_id, doc.header.version)?;
        let (form, _) = verify_and_render(&doc, &bundle, &self.doc_trust, &at.unwrap_or_else(|| self.now()))?;
        Ok(AdmissionCheck {
            doc_id: doc.doc_id(),
            report,
            form,
        })
    }
}
