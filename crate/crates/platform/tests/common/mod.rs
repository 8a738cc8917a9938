#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use edoc_core::bundle::{BundleMeta, DefinitionBundle, StateSpec, ValidityPaths};
use edoc_core::edoc::{Draft, EDoc, ManualField, ProcessingRules, Rule, TransitionTable};
use edoc_core::sig::{issue_cert, keygen, self_signed, CertTemplate, Purpose, SigAlg, Signer, TrustStore};
use edoc_core::time::{self, Timestamp};
use edoc_core::wysiwys::{render_to_sign, sign_rendered, DisplayEntry, DisplayMapping, Format};
use edoc_core::xml::{ElementSpec, TypeDef};
use edoc_platform::{init_data_root, DataRootConfig, FixedClock, Platform, PortsConfig, RoleEntry, RoleMap, UserMap};
use edoc_protocol::frame::decode_payload;
use edoc_protocol::{AMessage, Command, CommandName, Response};
use tempfile::TempDir;

pub const T0: &str = "2026-03-01T10:00:00Z";

pub fn ts(s: &str) -> Timestamp {
    time::parse(s).unwrap()
}

pub struct Pki {
    pub doc_trust: TrustStore,
    pub role_trust: TrustStore,
    pub clerk_sign: Signer,
    pub platform: Signer,
    pub clerk_role: Signer,
    pub viewer_role: Signer,
    pub admin_role: Signer,
    pub stranger_role: Signer,
    /// Role key issued by the document CA, not the role CA.
    pub rogue_role: Signer,
}

fn ca(name: &str) -> (edoc_core::sig::PrivateKey, edoc_core::sig::MiniCert, TrustStore) {
    let (k, pk) = keygen(SigAlg::Ed25519);
    let c = self_signed(
        CertTemplate::new(name, pk, [Purpose::Issuer], ts("2020-01-01T00:00:00Z"), ts("2099-01-01T00:00:00Z"), 1),
        &k,
    )
    .unwrap();
    let mut t = TrustStore::new();
    t.add_anchor(c.clone()).unwrap();
    (k, c, t)
}

pub fn pki() -> Pki {
    let nb = ts("2020-01-01T00:00:00Z");
    let na = ts("2099-01-01T00:00:00Z");
    let (dk, dc, doc_trust) = ca("Doc Root");
    let (rk, rc, role_trust) = ca("Role Root");
    let mut serial = 10;
    let mut mk = |subject: &str, p: Purpose, key: &edoc_core::sig::PrivateKey, issuer: &edoc_core::sig::MiniCert| {
        serial += 1;
        let (k, pk) = keygen(SigAlg::Ed25519);
        let c = issue_cert(CertTemplate::new(subject, pk, [p], nb, na, serial), key, issuer, &nb).unwrap();
        Signer::new(k, c).unwrap()
    };
    Pki {
        clerk_sign: mk("Permit Office", Purpose::Sign, &dk, &dc),
        platform: mk("Platform", Purpose::Platform, &dk, &dc),
        clerk_role: mk("clerk", Purpose::Role, &rk, &rc),
        viewer_role: mk("viewer", Purpose::Role, &rk, &rc),
        admin_role: mk("admin", Purpose::Role, &rk, &rc),
        stranger_role: mk("stranger", Purpose::Role, &rk, &rc),
        rogue_role: mk("rogue", Purpose::Role, &dk, &dc),
        doc_trust,
        role_trust,
    }
}

pub fn entry(name: &str, commands: &[CommandName], types: &[&str]) -> RoleEntry {
    RoleEntry {
        name: name.into(),
        commands: commands.iter().map(|c| c.as_str().to_string()).collect(),
        edoc_types: types.iter().map(|t| t.to_string()).collect::<BTreeSet<_>>(),
    }
}

pub fn rolemap(p: &Pki) -> RoleMap {
    use CommandName::*;
    let mut m = RoleMap::default();
    let non_admin: Vec<_> = CommandName::ALL.into_iter().filter(|c| !c.is_admin()).collect();
    m.insert(&p.clerk_role.key_id(), entry("clerk", &non_admin, &["permit", "report"]));
    m.insert(&p.viewer_role.key_id(), entry("viewer", &[GetEdoc, SearchEdocs, ValidateEdoc], &["permit"]));
    m.insert(&p.admin_role.key_id(), entry("admin", &CommandName::ALL, &["permit", "report"]));
    m
}

const DATE: &str = r"[0-9]{4}-[0-9]{2}-[0-9]{2}T[0-9]{2}:[0-9]{2}:[0-9]{2}Z";

fn mapping(entries: &[(&str, &str, Format)]) -> DisplayMapping {
    DisplayMapping {
        entries: entries
            .iter()
            .map(|(p, l, f)| DisplayEntry { path: p.to_string(), label: l.to_string(), format: *f })
            .collect(),
    }
}

fn state(name: &str, initial: bool, valid: bool) -> StateSpec {
    StateSpec { name: name.into(), initial, valid }
}

pub fn permit_bundle(version: u32) -> DefinitionBundle {
    let leaf = |p: &str| ElementSpec::leaf(Some(p)).unwrap();
    let text = || ElementSpec::leaf(None).unwrap();
    let mut d = TypeDef::new("permit", version, "permit").unwrap();
    d.add("/permit/holder", ElementSpec::container()).unwrap();
    d.add("/permit/holder/id", leaf("h[0-9]{4}")).unwrap();
    d.add("/permit/holder/name", text()).unwrap();
    d.add("/permit/site", text()).unwrap();
    d.add("/permit/validity", ElementSpec::container()).unwrap();
    d.add("/permit/validity/notBefore", leaf(DATE)).unwrap();
    d.add("/permit/validity/notAfter", leaf(DATE)).unwrap();
    let display = mapping(&[
        ("/permit/holder/id", "Holder ID", Format::Text),
        ("/permit/holder/name", "Holder name", Format::Text),
        ("/permit/site", "Site", Format::Text),
        ("/permit/validity/notBefore", "Valid from", Format::Date),
        ("/permit/validity/notAfter", "Valid until", Format::Date),
    ]);
    let meta = BundleMeta {
        states: vec![state("pending", true, true), state("processed", false, false), state("revoked", false, false)],
        transitions: TransitionTable::new([("pending", "processed"), ("pending", "revoked")]).unwrap(),
        validity: Some(ValidityPaths {
            not_before: "/permit/validity/notBefore".into(),
            not_after: "/permit/validity/notAfter".into(),
        }),
        static_attrs: BTreeMap::from([("partition".to_string(), "input".to_string())]),
        dynamic_attrs: BTreeMap::from([("note".to_string(), String::new())]),
        summary: vec!["/permit/holder/id".into(), "/permit/site".into()],
    };
    DefinitionBundle::new(d, display, None, meta).unwrap()
}

pub fn report_bundle() -> DefinitionBundle {
    let leaf = |p: &str| ElementSpec::leaf(Some(p)).unwrap();
    let text = || ElementSpec::leaf(None).unwrap();
    let mut d = TypeDef::new("report", 1, "report").unwrap();
    d.add("/report/holder", leaf("h[0-9]{4}")).unwrap();
    d.add("/report/site", text()).unwrap();
    d.add("/report/outcome", leaf("pass|fail")).unwrap();
    let display = mapping(&[
        ("/report/holder", "Holder ID", Format::Text),
        ("/report/site", "Site", Format::Text),
        ("/report/outcome", "Outcome", Format::Text),
    ]);
    let rules = ProcessingRules {
        input_type: "permit".into(),
        output_type: "report".into(),
        rules: vec![
            Rule::Copy { from: "/permit/holder/id".into(), to: "/report/holder".into() },
            Rule::Copy { from: "/permit/site".into(), to: "/report/site".into() },
            Rule::Manual(ManualField { to: "/report/outcome".into(), label: "Outcome".into() }),
        ],
    };
    let meta = BundleMeta {
        states: vec![state("issued", true, true), state("revoked", false, false)],
        transitions: TransitionTable::new([("issued", "revoked")]).unwrap(),
        validity: None,
        static_attrs: BTreeMap::new(),
        dynamic_attrs: BTreeMap::new(),
        summary: vec!["/report/holder".into()],
    };
    DefinitionBundle::new(d, display, Some(rules), meta).unwrap()
}

pub fn init_root(root: &Path, p: &Pki, ports: &PortsConfig) {
    init_data_root(
        root,
        &DataRootConfig {
            doc_trust: &p.doc_trust,
            role_trust: &p.role_trust,
            rolemap: &rolemap(p),
            usermap: &UserMap::default(),
            ports,
            bundles: &[permit_bundle(1), report_bundle()],
        },
    )
    .unwrap();
}

pub struct Env {
    pub dir: TempDir,
    pub pki: Pki,
    pub clock: Arc<FixedClock>,
    pub platform: Arc<Platform>,
}

impl Env {
    pub fn new() -> Env {
        let dir = tempfile::tempdir().unwrap();
        let pki = pki();
        init_root(dir.path(), &pki, &PortsConfig::default());
        let clock = Arc::new(FixedClock::new(ts(T0)));
        let platform = Platform::open(dir.path(), pki.platform.clone(), clock.clone()).unwrap();
        Env { dir, pki, clock, platform }
    }

    /// Drops the platform and opens the same data root again.
    pub fn reopen(&mut self) {
        self.platform = Platform::open(self.dir.path(), self.pki.platform.clone(), self.clock.clone()).unwrap();
    }

    pub fn now(&self) -> Timestamp {
        self.platform.now()
    }

    pub fn msg(&self, role: &Signer, cmd: Command) -> AMessage {
        AMessage::command(cmd, role, self.now()).unwrap()
    }

    pub fn send(&self, port: &str, msg: &AMessage) -> Response {
        let bytes = self.platform.handle_message(port, msg);
        let resp = decode_payload(&bytes).unwrap();
        assert!(resp.verify(&self.pki.doc_trust, &self.now()).is_valid());
        assert_eq!(resp.header.msg_id, msg.header.msg_id);
        resp.as_response().unwrap().clone()
    }

    pub fn call_on(&self, port: &str, role: &Signer, cmd: Command) -> Response {
        self.send(port, &self.msg(role, cmd))
    }

    pub fn call(&self, role: &Signer, cmd: Command) -> Response {
        self.call_on("scenario", role, cmd)
    }

    pub fn admin(&self, cmd: Command) -> Response {
        self.call_on("admin", &self.pki.admin_role, cmd)
    }

    /// Create, render, sign. The draft comes from the platform.
    pub fn signed_permit(&self, holder: &str) -> EDoc {
        let until = time::format(&(self.now() + chrono_days(42)));
        let fields = permit_fields(holder, &time::format(&self.now()), &until);
        let r = self.call(&self.pki.clerk_role, edoc_protocol::commands::create_from_fields("permit", &fields));
        assert!(r.is_ok(), "{}", r.detail());
        let draft = Draft::from_xml(r.first("edoc").unwrap()).unwrap();
        let rendered = render_to_sign(&draft, &permit_bundle(1)).unwrap();
        sign_rendered(&rendered, &self.pki.clerk_sign, self.now()).unwrap()
    }
}

pub fn chrono_days(n: i64) -> chrono::Duration {
    chrono::Duration::days(n)
}

pub fn permit_fields(holder: &str, from: &str, until: &str) -> BTreeMap<String, String> {
    [
        ("holder/id", holder),
        ("holder/name", "Ana Horvat"),
        ("site", "Quay 4"),
        ("validity/notBefore", from),
        ("validity/notAfter", until),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}
