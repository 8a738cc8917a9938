use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, Weak};

use edoc_core::bundle::{DefinitionBundle, DefinitionSet, Definitions};
use edoc_core::digest::DigestAlg;
use edoc_core::edoc::{
    apply_rules, assemble, transition_status, validate_edoc, AttributeSet, Draft, EDoc, EDocHeader, EdocError,
    Receipt, RevocationRecord, ValidationContext, STATUS,
};
use edoc_core::sig::{counter_sign, Purpose, Signer, TrustStore};
use edoc_core::time::{self, Timestamp};
use edoc_core::wysiwys::build_display;
use edoc_core::xml::{a_canon, parse, Element};
use edoc_protocol::commands::{hits_to_xml, DocRecordView, Predicate, SearchHit, Stored};
use edoc_protocol::frame::decode_payload;
use edoc_protocol::{codes, AMessage, Command, CommandName, MsgHeader, ProtocolError, Response};
use thiserror::Error;

use crate::clock::Clock;
use crate::log::{AuditLog, LogEntry};
use crate::ports::PortsConfig;
use crate::rolemap::{authenticate, RoleMap};
use crate::store::{write_atomic, DocStore, PendingLink};
use crate::usermap::UserMap;

/// Commands whose timestamp differs from the platform clock by more than
/// this are refused.
pub const REPLAY_WINDOW_SECS: i64 = 300;

pub const DOC_TRUST_FILE: &str = "trust.xml";
pub const ROLE_TRUST_FILE: &str = "roletrust.xml";
pub const ROLEMAP_FILE: &str = "rolemap.xml";
pub const USERMAP_FILE: &str = "usermap.xml";
pub const PORTS_FILE: &str = "ports.xml";
pub const DEFS_DIR: &str = "defs";
pub const DOCS_DIR: &str = "docs";
pub const LOG_FILE: &str = "log.txt";

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{file}: {message}")]
    Config { file: String, message: String },
}

/// Runtime control of the listening ports, provided by the server.
pub trait PortController: Send + Sync {
    fn control(&self, name: &str, action: &str) -> Result<Element, (&'static str, String)>;
}

/// Result of the checks run when the data root is opened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegrityReport {
    pub documents: usize,
    pub mismatches: Vec<String>,
    pub links_rolled_forward: usize,
    pub log_entries: usize,
    pub log_gapless: bool,
}

impl IntegrityReport {
    pub fn is_ok(&self) -> bool {
        self.mismatches.is_empty() && self.log_gapless
    }
}

impl fmt::Display for IntegrityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "documents: {}", self.documents)?;
        writeln!(f, "digest mismatches: {}", self.mismatches.len())?;
        for m in &self.mismatches {
            writeln!(f, "  {m}")?;
        }
        writeln!(f, "links rolled forward: {}", self.links_rolled_forward)?;
        writeln!(f, "log entries: {}", self.log_entries)?;
        write!(f, "log gapless: {}", self.log_gapless)
    }
}

/// Everything needed to initialise a data root.
pub struct DataRootConfig<'a> {
    pub doc_trust: &'a TrustStore,
    pub role_trust: &'a TrustStore,
    pub rolemap: &'a RoleMap,
    pub usermap: &'a UserMap,
    pub ports: &'a PortsConfig,
    pub bundles: &'a [DefinitionBundle],
}

/// Writes the configuration files of a fresh data root.
pub fn init_data_root(root: &Path, cfg: &DataRootConfig<'_>) -> io::Result<()> {
    fs::create_dir_all(root.join(DEFS_DIR))?;
    fs::create_dir_all(root.join(DOCS_DIR))?;
    write_atomic(&root.join(DOC_TRUST_FILE), &a_canon(&cfg.doc_trust.to_xml()))?;
    write_atomic(&root.join(ROLE_TRUST_FILE), &a_canon(&cfg.role_trust.to_xml()))?;
    write_atomic(&root.join(ROLEMAP_FILE), &a_canon(&cfg.rolemap.to_xml()))?;
    write_atomic(&root.join(USERMAP_FILE), &a_canon(&cfg.usermap.to_xml()))?;
    write_atomic(&root.join(PORTS_FILE), &a_canon(&cfg.ports.to_xml()))?;
    for b in cfg.bundles {
        b.write_dir(&bundle_dir(root, b.type_id(), b.version()))?;
    }
    Ok(())
}

fn bundle_dir(root: &Path, type_id: &str, version: u32) -> PathBuf {
    root.join(DEFS_DIR).join(type_id).join(version.to_string())
}

fn read_config<T>(root: &Path, file: &str, conv: impl FnOnce(&Element) -> Result<T, String>) -> Result<Option<T>, PlatformError> {
    let path = root.join(file);
    if !path.exists() {
        return Ok(None);
    }
    let err = |message: String| PlatformError::Config {
        file: file.to_string(),
        message,
    };
    let e = parse(&fs::read(&path)?).map_err(|e| err(e.to_string()))?;
    conv(&e).map(Some).map_err(err)
}

fn load_definitions(root: &Path) -> Result<DefinitionSet, PlatformError> {
    let mut set = DefinitionSet::new();
    let dir = root.join(DEFS_DIR);
    if !dir.exists() {
        return Ok(set);
    }
    let mut dirs = Vec::new();
    for t in fs::read_dir(&dir)? {
        let t = t?.path();
        if t.is_dir() {
            for v in fs::read_dir(&t)? {
                let v = v?.path();
                if v.is_dir() {
                    dirs.push(v);
                }
            }
        }
    }
    dirs.sort();
    for d in dirs {
        let b = DefinitionBundle::load_dir(&d).map_err(|e| PlatformError::Config {
            file: d.display().to_string(),
            message: e.to_string(),
        })?;
        if bundle_dir(root, b.type_id(), b.version()) != d {
            return Err(PlatformError::Config {
                file: d.display().to_string(),
                message: "directory does not match the bundle's type and version".into(),
            });
        }
        set.insert(b);
    }
    Ok(set)
}

struct State {
    store: DocStore,
    defs: DefinitionSet,
    rolemap: RoleMap,
    nonces: HashMap<String, Timestamp>,
    log: AuditLog,
}

/// The e-doc platform: authorization, the command catalog, the document
/// directory and the audit log behind one lock.
pub struct Platform {
    root: PathBuf,
    signer: Signer,
    clock: Arc<dyn Clock>,
    doc_trust: TrustStore,
    role_trust: TrustStore,
    usermap: UserMap,
    ports: PortsConfig,
    integrity: IntegrityReport,
    state: Mutex<State>,
    port_ctl: Mutex<Option<Weak<dyn PortController>>>,
}

/// Error outcome of a command: status code and detail.
struct Fail(&'static str, String);

fn fail<T>(code: &'static str, detail: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(code, detail.into()))
}

fn internal(e: impl fmt::Display) -> Fail {
    Fail(codes::INTERNAL, e.to_string())
}

fn edoc_fail(e: EdocError) -> Fail {
    let code = match &e {
        EdocError::MissingField(_) => codes::MISSING_FIELD,
        EdocError::PatternViolation(_) => codes::PATTERN_VIOLATION,
        EdocError::UnknownField(_) => codes::UNKNOWN_FIELD,
        EdocError::ManualFieldMissing(_) => codes::MANUAL_FIELD_MISSING,
        EdocError::UnexpectedManualField(_) => codes::UNEXPECTED_MANUAL_FIELD,
        EdocError::InputTypeMismatch { .. } => codes::INPUT_TYPE_MISMATCH,
        EdocError::IllegalTransition { .. } => codes::ILLEGAL_TRANSITION,
        _ => codes::INVALID_ARGUMENT,
    };
    Fail(code, e.to_string())
}

type Outcome = Result<(Vec<Element>, Option<String>), Fail>;

fn arg<'a>(cmd: &'a Command, name: &str) -> Result<&'a Element, Fail> {
    cmd.arg(name)
        .ok_or_else(|| Fail(codes::INVALID_ARGUMENT, format!("missing <{name}> argument")))
}

fn attr<'a>(e: &'a Element, name: &str) -> Result<&'a str, Fail> {
    e.get_attr(name)
        .ok_or_else(|| Fail(codes::INVALID_ARGUMENT, format!("<{}> lacks `{name}`", e.name)))
}

fn first_doc_id(cmd: &Command) -> Option<String> {
    cmd.args.iter().find_map(|a| a.get_attr("docId")).map(str::to_string)
}

fn malformed_header(at: Timestamp) -> MsgHeader {
    MsgHeader {
        msg_id: "malformed".into(),
        nonce: "0".repeat(32),
        timestamp: at,
        direction: edoc_protocol::Direction::Command,
    }
}

impl Platform {
    /// Opens a data root, runs the integrity check and loads the
    /// configuration. `signer` must hold a platform-purpose certificate.
    pub fn open(root: &Path, signer: Signer, clock: Arc<dyn Clock>) -> Result<Arc<Platform>, PlatformError> {
        if !signer.cert().has_purpose(Purpose::Platform) {
            return Err(PlatformError::Config {
                file: "platform key".into(),
                message: "certificate lacks the platform purpose".into(),
            });
        }
        let trust = |file| -> Result<TrustStore, PlatformError> {
            Ok(read_config(root, file, |e| TrustStore::from_xml(e).map_err(|e| e.to_string()))?.unwrap_or_default())
        };
        let doc_trust = trust(DOC_TRUST_FILE)?;
        let role_trust = trust(ROLE_TRUST_FILE)?;
        let rolemap = read_config(root, ROLEMAP_FILE, RoleMap::from_xml)?.unwrap_or_default();
        let usermap = read_config(root, USERMAP_FILE, UserMap::from_xml)?.unwrap_or_default();
        let ports = read_config(root, PORTS_FILE, PortsConfig::from_xml)?.unwrap_or_default();
        let defs = load_definitions(root)?;
        let (store, store_check) = DocStore::open(&root.join(DOCS_DIR))?;
        let (log, log_check) = AuditLog::open(&root.join(LOG_FILE))?;
        let integrity = IntegrityReport {
            documents: store_check.documents,
            mismatches: store_check.mismatches,
            links_rolled_forward: store_check.links_rolled_forward,
            log_entries: log_check.entries,
            log_gapless: log_check.gapless,
        };
        Ok(Arc::new(Platform {
            root: root.to_path_buf(),
            signer,
            clock,
            doc_trust,
            role_trust,
            usermap,
            ports,
            integrity,
            state: Mutex::new(State {
                store,
                defs,
                rolemap,
                nonces: HashMap::new(),
                log,
            }),
            port_ctl: Mutex::new(None),
        }))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn integrity(&self) -> &IntegrityReport {
        &self.integrity
    }

    pub fn ports(&self) -> &PortsConfig {
        &self.ports
    }

    pub fn usermap(&self) -> &UserMap {
        &self.usermap
    }

    pub fn doc_trust(&self) -> &TrustStore {
        &self.doc_trust
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn set_port_controller(&self, ctl: Weak<dyn PortController>) {
        *self.port_ctl.lock().unwrap() = Some(ctl);
    }

    pub fn log_entries(&self) -> Vec<LogEntry> {
        self.state.lock().unwrap().log.entries().to_vec()
    }

    pub fn document_count(&self) -> usize {
        self.state.lock().unwrap().store.len()
    }

    /// Handles one frame payload received on `port` and returns the payload
    /// of the response frame.
    pub fn handle_payload(&self, port: &str, payload: &[u8]) -> Vec<u8> {
        self.handle_decoded(port, decode_payload(payload))
    }

    pub fn handle_message(&self, port: &str, msg: &AMessage) -> Vec<u8> {
        self.handle_decoded(port, Ok(msg.clone()))
    }

    fn handle_decoded(&self, port: &str, decoded: Result<AMessage, ProtocolError>) -> Vec<u8> {
        let now = self.clock.now();
        let mut state = self.state.lock().unwrap();
        let (header, resp, role, command, doc_id) = match decoded {
            Err(e) => {
                let code = match e {
                    ProtocolError::SchemaViolation(_) => codes::SCHEMA_VIOLATION,
                    _ => codes::MALFORMED,
                };
                (malformed_header(now), Response::error(code, e.to_string()), None, "-".to_string(), None)
            }
            Ok(msg) => {
                let (resp, role, doc_id) = self.process(&mut state, port, &msg, now);
                let command = msg.as_command().map_or("-".to_string(), |c| c.name.clone());
                (msg.header, resp, role, command, doc_id)
            }
        };
        let entry = LogEntry {
            seq: 0,
            timestamp: now,
            role: role.unwrap_or_else(|| "-".into()),
            command,
            doc_id,
            outcome: resp.status.clone(),
        };
        if let Err(e) = state.log.append(entry) {
            log::error!("audit log append failed: {e}");
        }
        drop(state);
        AMessage::response(&header, resp, &self.signer, now)
            .expect("platform certificate carries the platform purpose")
            .canonical_bytes()
    }

    fn process(
        &self,
        state: &mut State,
        port: &str,
        msg: &AMessage,
        now: Timestamp,
    ) -> (Response, Option<String>, Option<String>) {
        let Some(cmd) = msg.as_command() else {
            return (Response::error(codes::SCHEMA_VIOLATION, "expected a command"), None, None);
        };
        let deny = |code: &str, detail: String, role: Option<String>| {
            (Response::error(code, detail), role, first_doc_id(cmd))
        };
        let skew = (msg.header.timestamp - now).num_seconds().abs();
        if skew > REPLAY_WINDOW_SECS {
            return deny(codes::REPLAY_SUSPECT, format!("timestamp is {skew} s off"), None);
        }
        let role = match authenticate(msg, &self.role_trust, &now) {
            Ok(r) => r,
            Err(d) => return deny(d.code(), d.detail(), None),
        };
        let Ok(name) = cmd.name.parse::<CommandName>() else {
            return deny(codes::UNKNOWN_COMMAND, format!("unknown command `{}`", cmd.name), Some(role));
        };
        if let Err(d) = state.rolemap.permits(&role, &cmd.name, cmd.doc_type.as_deref()) {
            return deny(d.code(), d.detail(), Some(role));
        }
        match self.ports.get(port) {
            Some(p) if p.accepts(name) => {}
            _ => {
                return deny(codes::DENIED_PORT, format!("{} is not accepted on port `{port}`", cmd.name), Some(role))
            }
        }
        let window = chrono::Duration::seconds(2 * REPLAY_WINDOW_SECS);
        state.nonces.retain(|_, t| *t > now - window);
        if state.nonces.contains_key(&msg.header.nonce) {
            return deny(codes::REPLAY, "nonce already seen".into(), Some(role));
        }
        state.nonces.insert(msg.header.nonce.clone(), msg.header.timestamp);

        let doc_type = cmd.doc_type.clone().unwrap_or_default();
        match self.dispatch(state, &role, name, &doc_type, cmd, now) {
            Ok((payload, doc_id)) => (Response::ok(payload), Some(role), doc_id.or_else(|| first_doc_id(cmd))),
            Err(Fail(code, detail)) => deny(code, detail, Some(role)),
        }
    }

    fn dispatch(
        &self,
        state: &mut State,
        role: &str,
        name: CommandName,
        doc_type: &str,
        cmd: &Command,
        now: Timestamp,
    ) -> Outcome {
        match name {
            CommandName::CreateEdoc => self.create(state, role, doc_type, cmd, now),
            CommandName::StoreEdoc => self.store(state, role, doc_type, cmd, now),
            CommandName::GetEdoc => {
                let id = attr(arg(cmd, "doc")?, "docId")?;
                let rec = lookup(state, doc_type, id)?;
                let view = DocRecordView {
                    doc: rec.doc.clone(),
                    attrs: rec.attrs.clone(),
                    receipt: rec.receipt.clone(),
                    revocation: rec.revocation.clone(),
                };
                Ok((vec![view.to_xml()], None))
            }
            CommandName::SearchEdocs => search(state, doc_type, cmd),
            CommandName::SetAttribute => set_attribute(state, doc_type, cmd),
            CommandName::RevokeEdoc => self.revoke(state, doc_type, cmd, now),
            CommandName::ValidateEdoc => self.validate(state, doc_type, cmd, now),
            CommandName::CounterSign => self.counter_sign(state, doc_type, cmd, now),
            CommandName::GetDefinition => {
                let def = arg(cmd, "definition")?;
                let b = match def.get_attr("version") {
                    Some(v) => {
                        let v: u32 = v.parse().map_err(|_| Fail(codes::INVALID_ARGUMENT, "bad version".into()))?;
                        state.defs.bundle(doc_type, v)
                    }
                    None => state.defs.latest(doc_type),
                };
                let b = b.ok_or_else(|| Fail(codes::UNKNOWN_TYPE, format!("no definition for {doc_type}")))?;
                Ok((vec![b.to_xml()], None))
            }
            CommandName::Acknowledge => {
                let id = attr(arg(cmd, "ack")?, "docId")?;
                let rec = lookup(state, doc_type, id)?;
                let r = rec.receipt.as_ref().ok_or_else(|| Fail(codes::NOT_FOUND, "no receipt".into()))?;
                Ok((vec![r.to_xml()], None))
            }
            CommandName::PutDefinition => self.put_definition(state, doc_type, cmd),
            CommandName::SetRoleMap => {
                let map = RoleMap::from_xml(arg(cmd, "rolemap")?).map_err(|e| Fail(codes::INVALID_ARGUMENT, e))?;
                write_atomic(&self.root.join(ROLEMAP_FILE), &a_canon(&map.to_xml())).map_err(internal)?;
                state.rolemap = map;
                Ok((vec![state.rolemap.to_xml()], None))
            }
            CommandName::PortControl => {
                let p = arg(cmd, "port")?;
                let (port, action) = (attr(p, "name")?, attr(p, "action")?);
                let ctl = self.port_ctl.lock().unwrap().as_ref().and_then(Weak::upgrade);
                let ctl = ctl.ok_or_else(|| Fail(codes::INTERNAL, "no port runtime attached".into()))?;
                ctl.control(port, action).map(|e| (vec![e], None)).map_err(|(c, d)| Fail(c, d))
            }
            CommandName::GetLog => {
                let r = arg(cmd, "range")?;
                let num = |s: &str| s.parse::<u64>().map_err(|_| Fail(codes::INVALID_ARGUMENT, "bad range".into()));
                let from = num(attr(r, "from")?)?;
                let to = r.get_attr("to").map(num).transpose()?;
                let mut out = Element::new("log");
                for e in state.log.range(from, to) {
                    out.push(e.to_xml());
                }
                Ok((vec![out], None))
            }
        }
    }

    fn create(&self, state: &mut State, role: &str, doc_type: &str, cmd: &Command, now: Timestamp) -> Outcome {
        let bundle = state
            .defs
            .latest(doc_type)
            .ok_or_else(|| Fail(codes::UNKNOWN_TYPE, format!("no definition for {doc_type}")))?;
        let values = |tag: &str| -> Result<BTreeMap<String, String>, Fail> {
            cmd.args
                .iter()
                .filter(|a| a.name == tag)
                .map(|a| Ok((attr(a, "path")?.to_string(), a.text())))
                .collect()
        };
        let content = match cmd.arg("input") {
            Some(input) => {
                let rules = bundle
                    .rules
                    .as_ref()
                    .ok_or_else(|| Fail(codes::INVALID_ARGUMENT, format!("{doc_type} has no processing rules")))?;
                if state.rolemap.permits(role, CommandName::GetEdoc.as_str(), Some(&rules.input_type)).is_err() {
                    return fail(codes::DENIED_DOCTYPE, format!("role may not read {}", rules.input_type));
                }
                let id = attr(input, "docId")?;
                let rec = state
                    .store
                    .get(id)
                    .ok_or_else(|| Fail(codes::NOT_FOUND, format!("no document {id}")))?;
                apply_rules(rules, &bundle.typedef, &rec.doc, &values("manual")?).map_err(edoc_fail)?
            }
            None => assemble(&bundle.typedef, &values("field")?).map_err(edoc_fail)?,
        };
        let draft = Draft {
            header: EDocHeader {
                type_id: doc_type.to_string(),
                version: bundle.version(),
                def_digest: bundle.digest(),
                created_at: now,
            },
            content,
        };
        Ok((vec![draft.to_xml()], None))
    }

    fn store(&self, state: &mut State, role: &str, doc_type: &str, cmd: &Command, now: Timestamp) -> Outcome {
        let doc = EDoc::from_xml(arg(cmd, "edoc")?).map_err(|e| Fail(codes::INVALID_DOC, e.to_string()))?;
        if doc.header.type_id != doc_type {
            return fail(codes::INVALID_ARGUMENT, "docType does not match the e-doc header");
        }
        if state.defs.latest(doc_type).is_none() {
            return fail(codes::UNKNOWN_TYPE, format!("no definition for {doc_type}"));
        }
        let doc_id = doc.doc_id();
        if state.store.contains(&doc_id) {
            return fail(codes::DUPLICATE, format!("{doc_id} is already stored"));
        }
        let report = validate_edoc(
            &doc,
            &ValidationContext {
                trust: &self.doc_trust,
                definitions: &state.defs,
                revocation: None,
                attributes: None,
                at: now,
            },
        );
        if !report.is_valid() {
            let failed: Vec<String> = report
                .checks()
                .iter()
                .filter(|(_, c)| !c.passed())
                .map(|(n, c)| format!("{n}: {c}"))
                .collect();
            return fail(codes::INVALID_DOC, failed.join("; "));
        }
        let bundle = state
            .defs
            .bundle(doc_type, doc.header.version)
            .ok_or_else(|| Fail(codes::INVALID_DOC, "unknown definition version".into()))?;
        build_display(doc.content(), &bundle.typedef, &bundle.display)
            .map_err(|e| Fail(codes::INVALID_DOC, format!("not displayable: {e}")))?;

        let link = match cmd.arg("link") {
            Some(l) => {
                let target_id = attr(l, "docId")?;
                let to = attr(l, "to")?;
                let target = state
                    .store
                    .get(target_id)
                    .ok_or_else(|| Fail(codes::NOT_FOUND, format!("no document {target_id}")))?;
                let target_type = target.doc.header.type_id.clone();
                if let Err(d) = state
                    .rolemap
                    .permits(role, CommandName::SetAttribute.as_str(), Some(&target_type))
                {
                    return fail(d.code(), format!("linked change: {}", d.detail()));
                }
                if let Some(x) = l.get_attr("expect") {
                    if target.attrs.status() != Some(x) {
                        return fail(codes::CONFLICT, format!("status of {target_id} is not {x}"));
                    }
                }
                let tb = bundle_of(state, &target.doc)?;
                let attrs = transition_status(&target.attrs, to, &tb.meta.transitions).map_err(edoc_fail)?;
                Some(PendingLink {
                    doc_id: target_id.to_string(),
                    attrs,
                })
            }
            None => None,
        };
        let attrs = bundle.meta.initial_attributes();
        let receipt = Receipt::issue(&doc_id, &doc.content_digest(), now, &self.signer).map_err(internal)?;
        let linked = link.as_ref().map(|l| (l.doc_id.clone(), l.attrs.clone()));
        state
            .store
            .insert(doc, attrs.clone(), receipt.clone(), link)
            .map_err(internal)?;
        let stored = Stored {
            doc_id: doc_id.clone(),
            receipt,
            attrs,
            linked,
        };
        Ok((vec![stored.to_xml()], Some(doc_id)))
    }

    fn revoke(&self, state: &mut State, doc_type: &str, cmd: &Command, now: Timestamp) -> Outcome {
        let r = arg(cmd, "revoke")?;
        let id = attr(r, "docId")?.to_string();
        let rec = lookup(state, doc_type, &id)?;
        if let Some(existing) = &rec.revocation {
            return Ok((vec![existing.to_xml(), rec.attrs.to_xml()], None));
        }
        let bundle = bundle_of(state, &rec.doc)?;
        let attrs = transition_status(&rec.attrs, "revoked", &bundle.meta.transitions).ok();
        let record = RevocationRecord::issue(&id, &r.text(), now, &self.signer).map_err(internal)?;
        state.store.set_revocation(&id, record.clone()).map_err(internal)?;
        if let Some(a) = attrs {
            state.store.set_attrs(&id, a).map_err(internal)?;
        }
        let attrs = lookup(state, doc_type, &id)?.attrs.to_xml();
        Ok((vec![record.to_xml(), attrs], None))
    }

    fn validate(&self, state: &mut State, doc_type: &str, cmd: &Command, now: Timestamp) -> Outcome {
        let v = arg(cmd, "validate")?;
        let at = match v.get_attr("at") {
            Some(s) => time::parse(s).ok_or_else(|| Fail(codes::INVALID_ARGUMENT, "bad `at`".into()))?,
            None => now,
        };
        let report = match v.first("edoc") {
            Some(e) => {
                let doc = EDoc::from_xml(e).map_err(|e| Fail(codes::INVALID_DOC, e.to_string()))?;
                if doc.header.type_id != doc_type {
                    return fail(codes::INVALID_ARGUMENT, "docType does not match the e-doc header");
                }
                validate_edoc(
                    &doc,
                    &ValidationContext {
                        trust: &self.doc_trust,
                        definitions: &state.defs,
                        revocation: None,
                        attributes: None,
                        at,
                    },
                )
            }
            None => {
                let rec = lookup(state, doc_type, attr(v, "docId")?)?;
                validate_edoc(
                    &rec.doc,
                    &ValidationContext {
                        trust: &self.doc_trust,
                        definitions: &state.defs,
                        revocation: rec.revocation.as_ref(),
                        attributes: Some(&rec.attrs),
                        at,
                    },
                )
            }
        };
        Ok((vec![report.to_xml()], None))
    }

    fn counter_sign(&self, state: &mut State, doc_type: &str, cmd: &Command, now: Timestamp) -> Outcome {
        let c = arg(cmd, "countersign")?;
        let id = attr(c, "docId")?.to_string();
        let alg: DigestAlg = c
            .get_attr("digestAlg")
            .unwrap_or("sha256")
            .parse()
            .map_err(|e: String| Fail(codes::INVALID_ARGUMENT, e))?;
        let rec = lookup(state, doc_type, &id)?;
        let base = rec.countersigned.clone().unwrap_or_else(|| rec.doc.clone());
        let signed = counter_sign(&base.signed, &self.signer, Purpose::Platform, alg, now)
            .map_err(|e| Fail(codes::INVALID_DOC, e.to_string()))?;
        let out = EDoc {
            header: base.header,
            signed,
        };
        state.store.set_countersigned(&id, out.clone()).map_err(internal)?;
        Ok((vec![out.to_xml()], None))
    }

    fn put_definition(&self, state: &mut State, doc_type: &str, cmd: &Command) -> Outcome {
        let b = DefinitionBundle::from_xml(arg(cmd, "bundle")?)
            .map_err(|e| Fail(codes::INVALID_DEFINITION, e.to_string()))?;
        if b.type_id() != doc_type {
            return fail(codes::INVALID_ARGUMENT, "docType does not match the bundle");
        }
        if state.defs.bundle(b.type_id(), b.version()).is_some() {
            return fail(codes::VERSION_EXISTS, format!("{} v{} already exists", b.type_id(), b.version()));
        }
        if let Some(rules) = &b.rules {
            let input = state
                .defs
                .latest(&rules.input_type)
                .ok_or_else(|| Fail(codes::INVALID_DEFINITION, format!("unknown input type {}", rules.input_type)))?;
            rules
                .check_input(&input.typedef)
                .map_err(|e| Fail(codes::INVALID_DEFINITION, e.to_string()))?;
        }
        b.write_dir(&bundle_dir(&self.root, b.type_id(), b.version()))
            .map_err(internal)?;
        let summary = Element::new("definition")
            .attr("typeId", b.type_id())
            .attr("version", b.version().to_string())
            .attr("digest", b.digest());
        state.defs.insert(b);
        Ok((vec![summary], None))
    }
}

fn lookup<'a>(state: &'a State, doc_type: &str, id: &str) -> Result<&'a crate::store::DocRecord, Fail> {
    match state.store.get(id) {
        Some(r) if r.doc.header.type_id == doc_type => Ok(r),
        _ => fail(codes::NOT_FOUND, format!("no {doc_type} document {id}")),
    }
}

fn bundle_of(state: &State, doc: &EDoc) -> Result<Arc<DefinitionBundle>, Fail> {
    state
        .defs
        .bundle(&doc.header.type_id, doc.header.version)
        .ok_or_else(|| Fail(codes::UNKNOWN_TYPE, "definition of a stored document is missing".into()))
}

fn search(state: &State, doc_type: &str, cmd: &Command) -> Outcome {
    let latest = state
        .defs
        .latest(doc_type)
        .ok_or_else(|| Fail(codes::UNKNOWN_TYPE, format!("no definition for {doc_type}")))?;
    let mut preds = Vec::new();
    for a in &cmd.args {
        let p = (a.name == "where")
            .then(|| Predicate::from_xml(a))
            .flatten()
            .ok_or_else(|| Fail(codes::INVALID_ARGUMENT, "bad search predicate".into()))?;
        preds.push(match p {
            Predicate::Attr(n, v) => {
                if !latest.meta.is_attribute(&n) {
                    return fail(codes::UNKNOWN_ATTRIBUTE, format!("{doc_type} has no attribute {n}"));
                }
                Predicate::Attr(n, v)
            }
            Predicate::Field(p, v) => {
                let abs = latest.typedef.absolute(&p);
                if !latest.typedef.text_paths().any(|t| t == abs) {
                    return fail(codes::UNKNOWN_FIELD, format!("{doc_type} has no field {p}"));
                }
                Predicate::Field(abs, v)
            }
        });
    }
    let mut hits = Vec::new();
    for (id, rec) in state.store.iter() {
        if rec.doc.header.type_id != doc_type {
            continue;
        }
        let matches = preds.iter().all(|p| match p {
            Predicate::Attr(n, v) => rec.attrs.get(n) == Some(v.as_str()),
            Predicate::Field(path, v) => rec.doc.content().select(path).iter().any(|e| e.text() == *v),
        });
        if !matches {
            continue;
        }
        let bundle = bundle_of(state, &rec.doc)?;
        let fields = bundle
            .meta
            .summary
            .iter()
            .filter_map(|p| rec.doc.content().select_text(p).map(|v| (p.clone(), v)))
            .collect();
        hits.push(SearchHit {
            doc_id: id.clone(),
            fields,
            attrs: rec.attrs.clone(),
        });
    }
    Ok((vec![hits_to_xml(&hits)], None))
}

fn set_attribute(state: &mut State, doc_type: &str, cmd: &Command) -> Outcome {
    let s = arg(cmd, "set")?;
    let id = attr(s, "docId")?.to_string();
    let name = attr(s, "name")?;
    let value = s.text();
    let rec = lookup(state, doc_type, &id)?;
    let bundle = bundle_of(state, &rec.doc)?;
    if let Some(x) = s.get_attr("expect") {
        if rec.attrs.get(name) != Some(x) {
            return fail(codes::CONFLICT, format!("{name} of {id} is not {x}"));
        }
    }
    let attrs: AttributeSet = if name == STATUS {
        transition_status(&rec.attrs, &value, &bundle.meta.transitions).map_err(edoc_fail)?
    } else if rec.attrs.static_attrs.contains_key(name) || bundle.meta.static_attrs.contains_key(name) {
        return fail(codes::STATIC_ATTRIBUTE, format!("{name} is static"));
    } else if bundle.meta.dynamic_attrs.contains_key(name) {
        let mut a = rec.attrs.clone();
        a.dynamic.insert(name.to_string(), value);
        a
    } else {
        return fail(codes::UNKNOWN_ATTRIBUTE, format!("{doc_type} has no attribute {name}"));
    };
    state.store.set_attrs(&id, attrs.clone()).map_err(internal)?;
    Ok((vec![attrs.to_xml()], None))
}
