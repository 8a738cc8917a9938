//! Local signing agent: a loopback HTTP service through which a desktop UI
//! lists work, previews drafts and asks for signatures. Every signature
//! goes through the trusted renderer here; the UI never sees a key.
//!
//! All bodies are canonical XML. Requests carry the session token in
//! `X-Edoc-Token`.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::net::{SocketAddr, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use edoc_core::bundle::{DefinitionBundle, DefinitionSet};
use edoc_core::edoc::{Draft, STATUS};
use edoc_core::sig::{Signer, TrustStore};
use edoc_core::time;
use edoc_core::wysiwys::{prepare_signing, render_to_sign, sign_rendered, verify_and_render, SignableContent};
use edoc_core::xml::{a_canon, is_forbidden_char, parse, Element};
use edoc_eas::Desk;
use edoc_protocol::client::Clock;
use edoc_protocol::commands::{self, hits_to_xml, Link, Predicate, SearchHit};
use edoc_protocol::{Client, Endpoint};
use rand::RngCore;
use tiny_http::{Header, Method, Request, Response, Server};

use crate::error::CliError;
use crate::profile::Profile;

pub const API_VERSION: &str = "1";
pub const TOKEN_HEADER: &str = "X-Edoc-Token";
/// Largest request body accepted.
pub const MAX_BODY: usize = 1 << 20;
const WORKERS: usize = 4;

/// Everything the agent needs to act for one person.
pub struct AgentConfig {
    pub listen: String,
    /// Fixed session token; a random one when absent.
    pub token: Option<String>,
    pub client: Client,
    pub signer: Signer,
    pub doc_trust: TrustStore,
    pub clock: Clock,
}

impl AgentConfig {
    pub fn from_profile(listen: &str, token: Option<String>, profile: &Profile) -> Result<Self, CliError> {
        Ok(AgentConfig {
            listen: listen.to_string(),
            token,
            client: profile.client()?,
            signer: profile.sign_signer()?,
            doc_trust: profile.trust_store()?,
            clock: Arc::new(time::now),
        })
    }
}

struct Pending {
    draft: Draft,
    /// Input document the draft was derived from.
    input: Option<String>,
}

struct State {
    token: String,
    identity: String,
    role: String,
    endpoint: String,
    doc_trust: TrustStore,
    /// One desk: platform calls and signatures are serialized.
    desk: Mutex<Desk>,
    signer: Signer,
    drafts: Mutex<HashMap<String, Pending>>,
    signatures: AtomicU64,
}

pub struct Agent {
    server: Arc<Server>,
    addr: SocketAddr,
    state: Arc<State>,
    workers: Vec<JoinHandle<()>>,
}

fn random_hex(n: usize) -> String {
    let mut b = vec![0u8; n];
    rand::thread_rng().fill_bytes(&mut b);
    hex::encode(b)
}

impl Agent {
    /// Binds a loopback address and starts serving. Non-loopback listen
    /// addresses are refused.
    pub fn start(cfg: AgentConfig) -> Result<Agent, CliError> {
        let addr = cfg
            .listen
            .to_socket_addrs()
            .map_err(|e| CliError::input(format!("listen `{}`: {e}", cfg.listen)))?
            .next()
            .ok_or_else(|| CliError::input("listen address does not resolve"))?;
        if !addr.ip().is_loopback() {
            return Err(CliError::input("the agent listens on loopback addresses only"));
        }
        let server = Server::http(addr).map_err(|e| CliError::Transport(e.to_string()))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| CliError::Transport("agent is not bound to an IP address".into()))?;
        let server = Arc::new(server);
        let state = Arc::new(State {
            token: cfg.token.unwrap_or_else(|| random_hex(16)),
            identity: cfg.signer.cert().subject.clone(),
            role: cfg.client.signer().cert().subject.clone(),
            endpoint: match cfg.client.endpoint() {
                Endpoint::Tcp(a) => format!("tcp://{a}"),
                Endpoint::Gateway(u) => u.clone(),
            },
            doc_trust: cfg.doc_trust,
            desk: Mutex::new(Desk::new(cfg.client, cfg.signer.clone(), cfg.clock)),
            signer: cfg.signer,
            drafts: Mutex::new(HashMap::new()),
            signatures: AtomicU64::new(0),
        });
        let workers = (0..WORKERS)
            .map(|_| {
                let server = server.clone();
                let state = state.clone();
                std::thread::spawn(move || {
                    while let Ok(req) = server.recv() {
                        handle(&state, req);
                    }
                })
            })
            .collect();
        Ok(Agent {
            server,
            addr,
            state,
            workers,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn token(&self) -> &str {
        &self.state.token
    }

    /// Signatures produced since start.
    pub fn signatures(&self) -> u64 {
        self.state.signatures.load(Ordering::SeqCst)
    }

    pub fn shutdown(mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

/// Error answer: an HTTP status and an `<error family>` body.
#[derive(Debug)]
pub struct ApiError {
    pub http: u16,
    pub body: Element,
}

impl ApiError {
    fn new(http: u16, family: &str, message: impl Into<String>) -> Self {
        ApiError {
            http,
            body: Element::with_text("error", message.into()).attr("family", family),
        }
    }

    fn with(mut self, name: &str, value: &str) -> Self {
        self.body.set_attr(name, value);
        self
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        let http = match &e {
            CliError::Refused { .. } | CliError::Invalid(_) => 422,
            CliError::Platform { status, .. } if status.starts_with("DENIED") => 403,
            CliError::Platform { status, .. } if status == "NOT_FOUND" => 404,
            CliError::Platform { .. } => 422,
            CliError::Transport(_) => 502,
            CliError::Key(_) => 500,
            CliError::Input(_) => 400,
        };
        ApiError { http, body: e.to_xml() }
    }
}

impl From<edoc_eas::EasError> for ApiError {
    fn from(e: edoc_eas::EasError) -> Self {
        CliError::from(e).into()
    }
}

type ApiResult = Result<Element, ApiError>;

fn same(a: &str, b: &str) -> bool {
    a.len() == b.len() && a.bytes().zip(b.bytes()).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn handle(state: &State, mut req: Request) {
    let loopback = req.remote_addr().is_some_and(|a| a.ip().is_loopback());
    let result = if !loopback {
        Err(ApiError::new(403, "Forbidden", "loopback clients only"))
    } else {
        let token = req
            .headers()
            .iter()
            .find(|h| h.field.equiv(TOKEN_HEADER))
            .map(|h| h.value.as_str().to_string());
        if !token.as_deref().is_some_and(|t| same(t, &state.token)) {
            Err(ApiError::new(401, "Unauthorized", "missing or wrong session token"))
        } else {
            let mut body = Vec::new();
            match req.as_reader().take(MAX_BODY as u64 + 1).read_to_end(&mut body) {
                Err(e) => Err(ApiError::new(400, "Input", e.to_string())),
                Ok(_) if body.len() > MAX_BODY => Err(ApiError::new(413, "Input", "request body too large")),
                Ok(_) => route(state, req.method(), req.url(), &body),
            }
        }
    };
    let (code, el) = match result {
        Ok(e) => (200, e),
        Err(e) => (e.http, e.body),
    };
    let ctype = Header::from_bytes("Content-Type", "application/xml; charset=utf-8").expect("static header");
    let resp = Response::from_data(a_canon(&el)).with_status_code(code).with_header(ctype);
    if let Err(e) = req.respond(resp) {
        log::debug!("agent response: {e}");
    }
}

fn split_url(url: &str) -> (&str, BTreeMap<String, String>) {
    let (path, query) = url.split_once('?').unwrap_or((url, ""));
    let q = query
        .split('&')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').unwrap_or((kv, ""));
            (decode(k), decode(v))
        })
        .collect();
    (path, q)
}

fn decode(s: &str) -> String {
    let b = s.as_bytes();
    let mut out = Vec::with_capacity(b.len());
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'+' => out.push(b' '),
            b'%' if i + 2 < b.len() => match std::str::from_utf8(&b[i + 1..i + 3]).ok().and_then(|h| u8::from_str_radix(h, 16).ok()) {
                Some(v) => {
                    out.push(v);
                    i += 2;
                }
                None => out.push(b'%'),
            },
            c => out.push(c),
        }
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

fn route(state: &State, method: &Method, url: &str, body: &[u8]) -> ApiResult {
    let (path, q) = split_url(url);
    let segs: Vec<&str> = path.trim_matches('/').split('/').collect();
    match (method, segs.as_slice()) {
        (Method::Get, ["v1", "session"]) => Ok(session(state)),
        (Method::Get, ["v1", "work"]) => work(state, &q),
        (Method::Get, ["v1", "manual-fields"]) => manual_fields(state, &q),
        (Method::Get, ["v1", "docs", id]) => document(state, id, &q),
        (Method::Post, ["v1", "search"]) => search(state, &xml_body(body)?),
        (Method::Post, ["v1", "rules-apply"]) => rules_apply(state, &xml_body(body)?),
        (Method::Post, ["v1", "drafts"]) => submit_draft(state, body),
        (Method::Post, ["v1", "sign"]) => sign(state, body),
        (_, ["v1", ..]) => Err(ApiError::new(404, "NotFound", format!("no route {method} {path}"))),
        _ => Err(ApiError::new(404, "NotFound", "unknown API version")),
    }
}

fn xml_body(body: &[u8]) -> Result<Element, ApiError> {
    parse(body).map_err(|e| CliError::from(e).into())
}

fn need<'a>(q: &'a BTreeMap<String, String>, k: &str) -> Result<&'a str, ApiError> {
    q.get(k)
        .map(String::as_str)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| ApiError::new(400, "Input", format!("missing `{k}`")))
}

fn attr<'a>(e: &'a Element, k: &str) -> Result<&'a str, ApiError> {
    e.get_attr(k)
        .ok_or_else(|| ApiError::new(400, "Input", format!("<{}> lacks `{k}`", e.name)))
}

fn session(state: &State) -> Element {
    Element::new("session")
        .attr("api", API_VERSION)
        .attr("identity", &state.identity)
        .attr("role", &state.role)
        .attr("endpoint", &state.endpoint)
        .attr("signatures", state.signatures.load(Ordering::SeqCst).to_string())
}

fn latest_bundle(desk: &mut Desk, type_id: &str) -> Result<DefinitionBundle, ApiError> {
    let resp = desk.call(commands::get_definition(type_id, None))?;
    let b = resp
        .first("bundle")
        .ok_or_else(|| ApiError::new(502, "Transport", "response lacks <bundle>"))?;
    DefinitionBundle::from_xml(b).map_err(|e| ApiError::new(502, "Transport", e.to_string()))
}

fn hit_item(h: &SearchHit) -> Element {
    let values: Vec<&str> = h.fields.iter().map(|(_, v)| v.as_str()).collect();
    let mut e = Element::new("item")
        .attr("docId", &h.doc_id)
        .attr("status", h.attrs.status().unwrap_or(""))
        .attr("line", values.join(" | "));
    for (p, v) in &h.fields {
        e.push(Element::with_text("field", v.as_str()).attr("path", p));
    }
    e
}

/// Pending documents of one exam, one item per document.
fn work(state: &State, q: &BTreeMap<String, String>) -> ApiResult {
    let exam = need(q, "exam")?;
    let type_id = q.get("type").map(String::as_str).unwrap_or("eEAC");
    let status = q.get("status").map(String::as_str).unwrap_or("pending");
    let preds = [
        Predicate::Field(format!("/{type_id}/exam/code"), exam.to_string()),
        Predicate::Attr(STATUS.into(), status.to_string()),
    ];
    let hits = state.desk.lock().unwrap().search(type_id, &preds)?;
    let mut e = Element::new("work")
        .attr("type", type_id)
        .attr("exam", exam)
        .attr("count", hits.len().to_string());
    for h in &hits {
        e.push(hit_item(h));
    }
    Ok(e)
}

/// The fields a signer fills in for a derived type, in rule order.
fn manual_fields(state: &State, q: &BTreeMap<String, String>) -> ApiResult {
    let type_id = need(q, "type")?;
    let bundle = latest_bundle(&mut state.desk.lock().unwrap(), type_id)?;
    let mut e = Element::new("manualFields")
        .attr("type", type_id)
        .attr("version", bundle.version().to_string());
    if let Some(r) = &bundle.rules {
        e.set_attr("inputType", &r.input_type);
        for m in r.manual_fields() {
            e.push(Element::new("field").attr("path", &m.to).attr("label", &m.label));
        }
    }
    Ok(e)
}

fn document(state: &State, id: &str, q: &BTreeMap<String, String>) -> ApiResult {
    let type_id = need(q, "type")?;
    let mut desk = state.desk.lock().unwrap();
    let rec = desk.get(type_id, id)?;
    let bundle = desk.definition(&rec.doc.header.type_id, rec.doc.header.version)?;
    let at = desk.now();
    drop(desk);
    let (form, _) = verify_and_render(&rec.doc, &bundle, &state.doc_trust, &at).map_err(CliError::from)?;
    Ok(Element::new("document")
        .attr("docId", id)
        .attr("type", type_id)
        .child(rec.attrs.to_xml())
        .child(form.to_xml()))
}

fn search(state: &State, e: &Element) -> ApiResult {
    if e.name != "search" {
        return Err(ApiError::new(400, "Input", "expected <search>"));
    }
    let type_id = attr(e, "type")?;
    let mut preds = Vec::new();
    for w in e.elements_named("where") {
        match (w.get_attr("attr"), w.get_attr("path")) {
            (Some(a), None) => preds.push(Predicate::Attr(a.into(), w.text())),
            (None, Some(p)) => preds.push(Predicate::Field(p.into(), w.text())),
            _ => return Err(ApiError::new(400, "Input", "<where> needs exactly one of attr and path")),
        }
    }
    let hits = state.desk.lock().unwrap().search(type_id, &preds)?;
    Ok(hits_to_xml(&hits))
}

fn preview(state: &State, rendered: &SignableContent, draft: Draft, input: Option<String>) -> Element {
    let id = random_hex(12);
    let digest = rendered.render_digest();
    state.drafts.lock().unwrap().insert(id.clone(), Pending { draft, input });
    Element::new("preview")
        .attr("draftId", id)
        .attr("renderDigest", digest)
        .child(rendered.form().to_xml())
}

/// Derives a draft from an input document. Manual fields are checked here
/// first so the UI gets the label of the first missing one.
fn rules_apply(state: &State, e: &Element) -> ApiResult {
    if e.name != "apply" {
        return Err(ApiError::new(400, "Input", "expected <apply>"));
    }
    let type_id = attr(e, "type")?;
    let input = attr(e, "input")?;
    let mut manual = BTreeMap::new();
    for m in e.elements_named("manual") {
        let path = attr(m, "path")?;
        let value = m.text();
        if let Some(c) = value.chars().find(|c| is_forbidden_char(*c)) {
            return Err(ApiError::new(422, "ForbiddenChar", format!("U+{:04X} in {path}", c as u32)).with("path", path));
        }
        manual.insert(path.to_string(), value);
    }
    let mut desk = state.desk.lock().unwrap();
    let bundle = latest_bundle(&mut desk, type_id)?;
    let rules = bundle
        .rules
        .as_ref()
        .ok_or_else(|| ApiError::new(422, "NoRules", format!("{type_id} is not derived from another type")))?;
    for m in rules.manual_fields() {
        if manual.get(&m.to).is_none_or(|v| v.trim().is_empty()) {
            return Err(ApiError::new(422, "ManualFieldMissing", format!("{} is required", m.label))
                .with("label", &m.label)
                .with("path", &m.to));
        }
    }
    let draft = desk.create(commands::create_from_input(type_id, input, &manual))?;
    drop(desk);
    let rendered = render_to_sign(&draft, &bundle).map_err(CliError::from)?;
    Ok(preview(state, &rendered, draft, Some(input.to_string())))
}

fn definitions_for(state: &State, bytes: &[u8]) -> Result<DefinitionSet, ApiError> {
    let draft = Draft::from_bytes(bytes).map_err(CliError::from)?;
    let mut set = DefinitionSet::new();
    let (t, v) = (&draft.header.type_id, draft.header.version);
    match state.desk.lock().unwrap().definition(t, v) {
        Ok(b) => set.insert(b),
        Err(edoc_eas::EasError::Platform { status, .. }) => {
            return Err(CliError::Refused {
                family: "UnknownType".into(),
                message: format!("no definition of {t} v{v} available ({status})"),
            }
            .into())
        }
        Err(e) => return Err(e.into()),
    };
    Ok(set)
}

fn draft_of(r: &SignableContent) -> Draft {
    Draft {
        header: r.header().clone(),
        content: r.content().clone(),
    }
}

/// A complete draft supplied by the UI. It is rendered exactly as it would
/// be signed; anything the renderer refuses never reaches the draft table.
fn submit_draft(state: &State, body: &[u8]) -> ApiResult {
    let set = definitions_for(state, body)?;
    let rendered = prepare_signing(body, &set).map_err(CliError::from)?;
    let draft = draft_of(&rendered);
    Ok(preview(state, &rendered, draft, None))
}

/// Signs a previewed draft. The draft is rendered again and the result must
/// match the digest the user confirmed.
fn sign(state: &State, body: &[u8]) -> ApiResult {
    let req = xml_body(body)?;
    if req.name != "sign" {
        return Err(ApiError::new(400, "Input", "expected <sign>"));
    }
    let confirmed = attr(&req, "renderDigest")?;
    let (draft, input, draft_id) = match (req.get_attr("draftId"), req.first("edoc")) {
        (Some(id), None) => {
            let p = state.drafts.lock().unwrap().remove(id);
            let p = p.ok_or_else(|| ApiError::new(404, "UnknownDraft", format!("no draft {id}")).with("draftId", id))?;
            (p.draft, p.input, Some(id.to_string()))
        }
        (None, Some(inline)) => {
            let bytes = a_canon(inline);
            let set = definitions_for(state, &bytes)?;
            let rendered = prepare_signing(&bytes, &set).map_err(CliError::from)?;
            (draft_of(&rendered), None, None)
        }
        _ => return Err(ApiError::new(400, "Input", "give either draftId or an inline <edoc>")),
    };
    let link = match req.get_attr("linkTo") {
        None => None,
        Some(to) => Some(Link {
            doc_id: input
                .clone()
                .ok_or_else(|| ApiError::new(400, "Input", "linkTo needs a draft derived from an input document"))?,
            to: to.to_string(),
            expect: req.get_attr("linkExpect").map(str::to_string),
        }),
    };

    let mut desk = state.desk.lock().unwrap();
    let restore = |draft: Draft| {
        if let Some(id) = &draft_id {
            state.drafts.lock().unwrap().insert(id.clone(), Pending { draft, input: input.clone() });
        }
    };
    let bundle = desk.definition(&draft.header.type_id, draft.header.version)?;
    let rendered = match render_to_sign(&draft, &bundle) {
        Ok(r) => r,
        Err(e) => return Err(CliError::from(e).into()),
    };
    let digest = rendered.render_digest();
    if digest != confirmed {
        restore(draft);
        return Err(ApiError::new(409, "RenderMismatch", "the document no longer renders as confirmed").with("renderDigest", &digest));
    }
    let doc = sign_rendered(&rendered, &state.signer, desk.now()).map_err(CliError::from)?;
    state.signatures.fetch_add(1, Ordering::SeqCst);
    let stored = desk.store(&doc, link.as_ref())?;
    if !stored.receipt.binds(&doc, &state.doc_trust, &desk.now()) {
        return Err(ApiError::new(502, "BadReceipt", "storage receipt does not bind the document"));
    }
    Ok(Element::new("signed")
        .attr("docId", &stored.doc_id)
        .attr("renderDigest", digest)
        .child(stored.to_xml()))
}
