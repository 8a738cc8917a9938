//! Deterministic fixture set: registry, platform configuration, the signed
//! admission card and the attack corpus. `write_fixtures` regenerates the
//! committed `fixtures/` directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use edoc_core::edoc::{assemble, Draft, EDoc, EDocHeader};
use edoc_core::sig::keystore;
use edoc_core::time::{self, Timestamp};
use edoc_core::wysiwys::{render_to_sign, sign_rendered};
use edoc_core::xml::{a_canon, a_canon_string};
use edoc_platform::{init_data_root, DataRootConfig, PortSpec, PortsConfig, RoleEntry, RoleMap, UserMap, Visibility, ADMIN_PORT};
use edoc_protocol::CommandName;

use crate::defs::{self, EEAC, EET, TRANSCRIPT};
use crate::identities::{self as id, FixturePki};
use crate::registry::{ExamRecord, RegistryStub, StudentRecord};

/// The committed fixture directory of this crate.
pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub const SCENARIO_PORT: &str = "scenario";
/// Read-only port for admission checks at the exam desk.
pub const SERVICE_PORT: &str = "service";

pub const FIXTURE_CREATED: &str = "2026-01-12T09:00:00Z";
pub const FIXTURE_STUDENT: &str = "s100001";
pub const FIXTURE_EXAM: &str = "01ABC";

pub const REGISTRY_FILE: &str = "registry.xml";
pub const FIXTURE_EEAC: &str = "eeac-fixture.xml";
pub const FIXTURE_DRAFT: &str = "eeac-fixture.draft.xml";

pub fn registry() -> RegistryStub {
    let student = |name: &str, place: &str, enrolled: bool, rights: &[&str], paid: bool| StudentRecord {
        name: name.into(),
        place_of_birth: place.into(),
        enrolled,
        exam_rights: rights.iter().map(|s| s.to_string()).collect(),
        payments_ok: paid,
    };
    let exam = |name: &str, faculty: &str, prof: &str| ExamRecord {
        name: name.into(),
        faculty: faculty.into(),
        professor_id: prof.into(),
    };
    RegistryStub {
        students: BTreeMap::from([
            ("s100001".into(), student("Ana Horvat", "Zagreb", true, &["01ABC", "02DEF"], true)),
            ("s100002".into(), student("Luca Ferri", "Trieste", true, &["01ABC", "02DEF"], true)),
            ("s100003".into(), student("Mei Tanaka", "Osaka", true, &["01ABC", "02DEF"], true)),
            ("s100004".into(), student("Jonas Berg", "Bergen", true, &["01ABC", "02DEF"], false)),
            ("s100005".into(), student("Sara Novak", "Ljubljana", false, &["01ABC"], true)),
            ("s100006".into(), student("Omar Haddad", "Amman", true, &["02DEF"], true)),
        ]),
        exams: BTreeMap::from([
            ("01ABC".into(), exam("Distributed Systems", "Faculty of Engineering", "p001")),
            ("02DEF".into(), exam("Applied Cryptography", "Faculty of Engineering", "p002")),
        ]),
    }
}

fn entry(name: &str, commands: &[CommandName], types: &[&str]) -> RoleEntry {
    RoleEntry {
        name: name.into(),
        commands: commands.iter().map(|c| c.as_str().to_string()).collect(),
        edoc_types: types.iter().map(|t| t.to_string()).collect(),
    }
}

/// Role name and role-certificate identity of the four fixture roles.
pub const ROLES: [(&str, &str); 4] = [
    ("admin", id::ADMIN_ROLE),
    ("sso", id::SSO_ROLE),
    ("professor", id::PROFESSOR_ROLE),
    ("auditor", id::AUDITOR_ROLE),
];

pub fn rolemap(pki: &FixturePki) -> RoleMap {
    use CommandName::*;
    let key = |name: &str| pki.cert(name).key.key_id();
    let mut m = RoleMap::default();
    m.insert(&key(id::ADMIN_ROLE), entry("admin", &CommandName::ALL, &[EEAC, EET, TRANSCRIPT]));
    m.insert(
        &key(id::SSO_ROLE),
        entry(
            "sso",
            &[CreateEdoc, StoreEdoc, GetEdoc, SearchEdocs, SetAttribute, RevokeEdoc, ValidateEdoc, Acknowledge, GetDefinition],
            &[EEAC, TRANSCRIPT],
        ),
    );
    m.insert(
        &key(id::PROFESSOR_ROLE),
        entry(
            "professor",
            &[CreateEdoc, StoreEdoc, GetEdoc, SearchEdocs, SetAttribute, ValidateEdoc, Acknowledge, GetDefinition],
            &[EEAC, EET],
        ),
    );
    m.insert(
        &key(id::AUDITOR_ROLE),
        entry("auditor", &[GetEdoc, SearchEdocs, ValidateEdoc, CounterSign, GetLog], &[EEAC, EET, TRANSCRIPT]),
    );
    m
}

/// Authentication keys of professors and students to their registry ids.
pub fn usermap(pki: &FixturePki) -> UserMap {
    let mut m = UserMap::default();
    let mut add = |name: &str, org: &str| {
        m.users.insert(pki.cert(name).key.key_id(), org.to_string());
    };
    add(id::ROSSI_AUTH, "p001");
    add(id::BIANCHI_AUTH, "p002");
    for s in id::STUDENTS {
        add(&id::student_auth(s), s);
    }
    m
}

pub fn ports() -> PortsConfig {
    use CommandName::*;
    PortsConfig {
        ports: vec![
            PortSpec::new(ADMIN_PORT, 0, Visibility::Loopback),
            PortSpec::new(SCENARIO_PORT, 0, Visibility::Loopback),
            PortSpec::new(SERVICE_PORT, 0, Visibility::Loopback)
                .restricted([GetEdoc, SearchEdocs, ValidateEdoc, Acknowledge, GetDefinition]),
        ],
    }
}

/// Writes a fresh platform data root for the fixture identities.
pub fn init_data(root: &Path, pki: &FixturePki) -> io::Result<()> {
    init_data_root(
        root,
        &DataRootConfig {
            doc_trust: &pki.doc_trust(),
            role_trust: &pki.role_trust(),
            rolemap: &rolemap(pki),
            usermap: &usermap(pki),
            ports: &ports(),
            bundles: &defs::all_bundles(),
        },
    )
}

/// Field values of an admission card.
pub fn eeac_fields(reg: &RegistryStub, student_id: &str, exam_code: &str, from: Timestamp) -> Option<BTreeMap<String, String>> {
    let s = reg.students.get(student_id)?;
    let x = reg.exams.get(exam_code)?;
    let until = from + chrono::Duration::days(defs::VALIDITY_DAYS);
    let p = |s: &str| format!("/{EEAC}/{s}");
    Some(BTreeMap::from([
        (p("student/id"), student_id.to_string()),
        (p("student/name"), s.name.clone()),
        (p("student/placeOfBirth"), s.place_of_birth.clone()),
        (p("faculty/name"), x.faculty.clone()),
        (p("exam/code"), exam_code.to_string()),
        (p("exam/name"), x.name.clone()),
        (p("validity/notBefore"), time::format(&from)),
        (p("validity/notAfter"), time::format(&until)),
    ]))
}

pub fn fixture_draft() -> Draft {
    let bundle = defs::eeac_bundle();
    let at = time::parse(FIXTURE_CREATED).unwrap();
    let fields = eeac_fields(&registry(), FIXTURE_STUDENT, FIXTURE_EXAM, at).unwrap();
    Draft {
        header: EDocHeader {
            type_id: EEAC.into(),
            version: bundle.version(),
            def_digest: bundle.digest(),
            created_at: at,
        },
        content: assemble(&bundle.typedef, &fields).expect("fixture fields assemble"),
    }
}

/// The admission card of Ana Horvat for 01ABC, signed by the student office.
pub fn fixture_eeac(pki: &FixturePki) -> EDoc {
    let rendered = render_to_sign(&fixture_draft(), &defs::eeac_bundle()).expect("fixture renders");
    sign_rendered(&rendered, &pki.signer(id::SSO_SIGN), time::parse(FIXTURE_CREATED).unwrap()).expect("fixture signs")
}

/// One document of the attack corpus and the refusal it must produce.
pub struct Attack {
    pub name: &'static str,
    pub family: &'static str,
    pub bytes: Vec<u8>,
}

fn replaced(base: &str, from: &str, to: &str) -> Vec<u8> {
    assert!(base.contains(from), "attack anchor `{from}` not found");
    base.replacen(from, to, 1).into_bytes()
}

/// Drafts that must never be signed. Each one differs from the fixture
/// draft by a single construct.
pub fn attacks() -> Vec<Attack> {
    let base = a_canon_string(&fixture_draft().to_xml());
    let foreign_digest = defs::eet_bundle().digest();
    let own_digest = defs::eeac_bundle().digest();
    let mk = |name, family, bytes| Attack { name, family, bytes };
    vec![
        mk("comment", "ForbiddenConstruct", replaced(&base, "<code>01ABC</code>", "<code>01ABC<!-- 02DEF --></code>")),
        mk("pi", "ForbiddenConstruct", replaced(&base, "<exam>", "<exam><?render hide-next?>")),
        mk(
            "doctype",
            "ForbiddenConstruct",
            [b"<!DOCTYPE edoc [<!ENTITY who \"Mallory\">]>".as_slice(), base.as_bytes()].concat(),
        ),
        mk("unknown-element", "StructureInvalid", replaced(&base, "<exam>", "<exam><retake></retake>")),
        mk("unmapped-text", "Unmapped", replaced(&base, "<student>", "<student>fee waived")),
        mk("zero-width", "ForbiddenChar", replaced(&base, "Ana Horvat", "Ana\u{200B} Horvat")),
        mk("bidi-override", "ForbiddenChar", replaced(&base, "Distributed Systems", "\u{202E}smetsyS detubirtsiD")),
        mk("defdigest-mismatch", "DefinitionMismatch", replaced(&base, &own_digest, &foreign_digest)),
        mk("cdata", "ForbiddenConstruct", replaced(&base, "Zagreb", "<![CDATA[Zagreb]]>")),
        mk("control-char-ref", "ForbiddenChar", replaced(&base, "Zagreb", "Zagreb&#x7;")),
        mk("namespace", "ForbiddenConstruct", replaced(&base, "<exam>", "<exam xmlns=\"urn:x-exam\">")),
        mk("not-nfc", "NotNfc", replaced(&base, "Zagreb", "Zagre\u{0301}b")),
        mk("unknown-type", "UnknownType", replaced(&base, "typeId=\"eEAC\"", "typeId=\"eXYZ\"")),
    ]
}

/// Regenerates the fixture directory. Key stores are sealed with fresh
/// salts, so only their contents are reproducible.
pub fn write_fixtures(dir: &Path, pki: &FixturePki, iterations: u32) -> io::Result<()> {
    let certs = dir.join("certs");
    let keys = dir.join("keys");
    let attacks_dir = dir.join("attacks");
    for d in [&certs, &keys, &attacks_dir] {
        fs::create_dir_all(d)?;
    }
    for s in id::specs() {
        fs::write(certs.join(format!("{}.xml", s.name)), pki.cert_bytes(&s.name))?;
        let sealed = keystore::seal(&pki.keys[&s.name], &id::passphrase(&s.name), iterations)
            .map_err(|e| io::Error::other(e.to_string()))?;
        fs::write(keys.join(format!("{}.key", s.name)), sealed)?;
    }
    let data = dir.join("data");
    if data.exists() {
        fs::remove_dir_all(&data)?;
    }
    init_data(&data, pki)?;
    fs::write(dir.join(REGISTRY_FILE), a_canon(&registry().to_xml()))?;
    fs::write(dir.join(FIXTURE_DRAFT), a_canon(&fixture_draft().to_xml()))?;
    fs::write(dir.join(FIXTURE_EEAC), fixture_eeac(pki).canonical_bytes())?;
    for a in attacks() {
        fs::write(attacks_dir.join(format!("attack-{}.xml", a.name)), &a.bytes)?;
    }
    Ok(())
}

/// Files under `dir`, relative, sorted. Used to compare fixture trees.
pub fn list_files(dir: &Path) -> io::Result<BTreeSet<PathBuf>> {
    fn go(base: &Path, d: &Path, out: &mut BTreeSet<PathBuf>) -> io::Result<()> {
        for e in fs::read_dir(d)? {
            let p = e?.path();
            if p.is_dir() {
                go(base, &p, out)?;
            } else {
                out.insert(p.strip_prefix(base).unwrap().to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = BTreeSet::new();
    go(dir, dir, &mut out)?;
    Ok(out)
}

/// Copies a directory tree.
pub fn copy_tree(from: &Path, to: &Path) -> io::Result<()> {
    for rel in list_files(from)? {
        let dst = to.join(&rel);
        if let Some(parent) = dst.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::copy(from.join(&rel), dst)?;
    }
    fs::create_dir_all(to)
}

