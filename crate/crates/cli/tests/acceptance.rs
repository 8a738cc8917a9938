//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{fixture, key, cert, Net};
use edoc_cli::agent::{Agent, AgentConfig, TOKEN_HEADER};
use edoc_core::bundle::{DefinitionSet, Definitions};
use edoc_core::digest::DigestAlg;
use edoc_core::edoc::{validate_edoc, EDoc, ValidationContext};
use edoc_core::sig::{counter_sign, keygen, self_signed, verify_envelope, CertTemplate, Purpose, SigAlg, Signer, TrustStore};
use edoc_core::time::{self, Timestamp};
use edoc_core::wysiwys::{prepare_signing, render_to_sign, sign_rendered, verify_and_render};
use edoc_core::xml::{a_canon, parse, Element, XNode};
use edoc_eas::defs::{all_bundles, transcript_bundle, EEAC, EET, TRANSCRIPT};
use edoc_eas::fixtures::{self, FIXTURE_EEAC, SCENARIO_PORT};
use edoc_eas::identities as id;
use edoc_eas::FixturePki;
use edoc_platform::{authorize, Clock, Denial, FixedClock, Platform, Server, SystemClock, ADMIN_PORT};
use edoc_protocol::commands::{self, Predicate};
use edoc_protocol::{codes, encode, AMessage, Client, Command, CommandName, Endpoint, Gateway};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};

// Pinned tolerances.
const CANON_CASES: u32 = 1000;
const CANON_BUDGET: Duration = Duration::from_secs(10);
const ROUND_TRIPS: usize = 200;
const BIT_FLIPS: usize = 200;
const FLIP_SEED: u64 = 0x5eed_f11b;
const MIN_ATTACKS: usize = 8;
const REPLAYED: usize = 50;
const DEMO_BUDGET: Duration = Duration::from_secs(30);
const AT_VALID: &str = "2026-01-20T00:00:00Z";

type Verdict = Result<String, String>;
type Criterion = (&'static str, Box<dyn FnOnce() -> Verdict>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ts(s: &str) -> Timestamp {
    time::parse(s).unwrap()
}

fn defs() -> DefinitionSet {
    let mut set = DefinitionSet::new();
    for b in all_bundles() {
        set.insert(b);
    }
    set
}

// ---- 1. canonicalization

fn name() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_.-]{0,6}"
}

fn text() -> impl Strategy<Value = String> {
    "[ -~\u{e9}\u{df}\u{20ac}\t\n]{0,12}"
}

fn attrs() -> impl Strategy<Value = Vec<(String, String)>> {
    proptest::collection::btree_map(name(), text(), 0..4).prop_map(|m| m.into_iter().collect())
}

fn element() -> impl Strategy<Value = Element> {
    let leaf = (name(), attrs(), text()).prop_map(|(n, a, t)| {
        let mut e = Element::new(n);
        e.attrs = a;
        e.push_text(t);
        e
    });
    leaf.prop_recursive(4, 32, 4, |inner| {
        (name(), attrs(), proptest::collection::vec(inner, 1..4)).prop_map(|(n, a, kids)| {
            let mut e = Element::new(n);
            e.attrs = a;
            for k in kids {
                e.push(k);
            }
            e
        })
    })
}

fn escape(s: &str, quote: bool) -> String {
    let s = s.replace('&', "&amp;").replace('<', "&lt;");
    if quote {
        s.replace('"', "&quot;")
    } else {
        s.replace('>', "&gt;")
    }
}

/// Serializes with attributes in stored order, not canonical order.
fn serialize_raw(e: &Element, out: &mut String) {
    out.push('<');
    out.push_str(&e.name);
    for (n, v) in &e.attrs {
        out.push_str(&format!(" {n}=\"{}\"", escape(v, true)));
    }
    out.push('>');
    for c in &e.children {
        match c {
            XNode::Element(k) => serialize_raw(k, out),
            XNode::Text(t) => out.push_str(&escape(t, false)),
        }
    }
    out.push_str(&format!("</{}>", e.name));
}

fn shuffle_attrs(e: &mut Element, seed: u64) {
    let n = e.attrs.len();
    if n > 1 {
        e.attrs.rotate_left((seed as usize) % n);
        if seed & 1 == 1 {
            e.attrs.reverse();
        }
    }
    for (i, c) in e.children.iter_mut().enumerate() {
        if let XNode::Element(k) = c {
            shuffle_attrs(k, seed.rotate_left(i as u32 + 1));
        }
    }
}

fn canonicalization() -> Verdict {
    let started = Instant::now();
    let mut runner = TestRunner::new(Config {
        cases: CANON_CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let mut n = 0u32;
    let counter = std::cell::Cell::new(0u32);
    runner
        .run(&(element(), any::<u64>()), |(e, seed)| {
            counter.set(counter.get() + 1);
            let c = a_canon(&e);
            let again = a_canon(&parse(&c).map_err(|x| TestCaseError::fail(x.to_string()))?);
            prop_assert_eq!(&again, &c, "not idempotent");
            let mut shuffled = e.clone();
            shuffle_attrs(&mut shuffled, seed);
            let mut raw = String::new();
            serialize_raw(&shuffled, &mut raw);
            let reparsed = parse(raw.as_bytes()).map_err(|x| TestCaseError::fail(x.to_string()))?;
            prop_assert_eq!(a_canon(&reparsed), c, "attribute order changed the canonical form");
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    n += counter.get();
    let took = started.elapsed();
    check(n >= CANON_CASES, || format!("only {n} cases ran"))?;
    check(took < CANON_BUDGET, || format!("{n} documents took {took:.2?}"))?;
    Ok(format!("{n} documents, idempotent and order-insensitive, {took:.2?}"))
}

// ---- 2. signatures

fn signatures() -> Verdict {
    let set = defs();
    let draft = fixtures::fixture_draft();
    let bundle = set.bundle(EEAC, draft.header.version).ok_or("no eEAC definition")?;
    let at = ts(AT_VALID);
    let nb = ts("2026-01-01T00:00:00Z");
    let na = ts("2027-01-01T00:00:00Z");

    let mut ok = 0;
    for i in 0..ROUND_TRIPS {
        let (k, p) = keygen(SigAlg::Ed25519);
        let c = self_signed(CertTemplate::new(&format!("Signer {i}"), p, vec![Purpose::Sign], nb, na, i as u64 + 1), &k)
            .map_err(|e| e.to_string())?;
        let mut trust = TrustStore::new();
        trust.add_anchor(c.clone()).map_err(|e| e.to_string())?;
        let signer = Signer::new(k, c).map_err(|e| e.to_string())?;
        let rendered = render_to_sign(&draft, &bundle).map_err(|e| e.to_string())?;
        let doc = sign_rendered(&rendered, &signer, at).map_err(|e| e.to_string())?;
        let back = EDoc::from_bytes(&doc.canonical_bytes()).map_err(|e| e.to_string())?;
        let (form, env) = verify_and_render(&back, &bundle, &trust, &at).map_err(|e| e.to_string())?;
        check(env.is_valid() && form.header[0].1 == "VALID", || format!("round trip {i}: {:?}", form.header))?;
        check(form.body == rendered.form().body, || format!("round trip {i}: verified body differs from the signed one"))?;
        ok += 1;
    }
    check(ok == ROUND_TRIPS, || format!("{ok}/{ROUND_TRIPS} round trips verified"))?;

    // Single-bit flips of the committed fixture. Detected: the bytes are
    // refused, or the document no longer validates.
    let pki = FixturePki::generate();
    let trust = pki.doc_trust();
    let bytes = fs::read(fixture(FIXTURE_EEAC)).map_err(|e| e.to_string())?;
    let valid = |b: &[u8]| -> bool {
        let Ok(doc) = EDoc::from_bytes(b) else { return false };
        let ctx = ValidationContext {
            trust: &trust,
            definitions: &set,
            revocation: None,
            attributes: None,
            at,
        };
        validate_edoc(&doc, &ctx).is_valid()
    };
    check(valid(&bytes), || "untampered fixture does not validate".into())?;
    let mut rng = rand::rngs::StdRng::seed_from_u64(FLIP_SEED);
    let mut missed = Vec::new();
    for _ in 0..BIT_FLIPS {
        let mut t = bytes.clone();
        let pos = rng.gen_range(0..t.len());
        let bit = rng.gen_range(0..8);
        t[pos] ^= 1 << bit;
        if valid(&t) {
            missed.push(format!("byte {pos} bit {bit}"));
        }
    }
    check(missed.is_empty(), || format!("{} of {BIT_FLIPS} flips undetected: {:?}", missed.len(), missed))?;

    // Counter-signatures keep the original verifiable.
    let doc = EDoc::from_bytes(&bytes).map_err(|e| e.to_string())?;
    let platform = pki.signer(id::PLATFORM);
    let once = counter_sign(&doc.signed, &platform, Purpose::Platform, DigestAlg::Sha256, at).map_err(|e| e.to_string())?;
    let twice = counter_sign(&once, &platform, Purpose::Platform, DigestAlg::Sha512, at).map_err(|e| e.to_string())?;
    for (n, s) in [(1, &once), (2, &twice)] {
        let r = verify_envelope(s, &trust, &at);
        check(r.primary.signature_valid && r.primary.chain.is_ok() && r.is_valid(), || {
            format!("after {n} counter-signature(s) the envelope does not verify")
        })?;
        let cs = EDoc {
            header: doc.header.clone(),
            signed: s.clone(),
        };
        check(cs.content() == doc.content(), || "counter-signing changed the content".into())?;
    }
    Ok(format!(
        "{ROUND_TRIPS} round trips, {BIT_FLIPS}/{BIT_FLIPS} flips detected, counter-signed (sha256, sha512) fixture verifies"
    ))
}

// ---- 3. attack corpus

fn attack_corpus() -> Verdict {
    let attacks = fixtures::attacks();
    check(attacks.len() >= MIN_ATTACKS, || format!("only {} attacks", attacks.len()))?;
    let required = ["comment", "pi", "doctype", "unknown-element", "unmapped-text", "zero-width", "bidi-override", "defdigest-mismatch"];
    let names: BTreeSet<&str> = attacks.iter().map(|a| a.name).collect();
    for r in required {
        check(names.contains(r), || format!("corpus lacks {r}"))?;
    }
    let set = defs();

    // Library.
    for a in &attacks {
        match prepare_signing(&a.bytes, &set) {
            Ok(_) => return Err(format!("library accepted {}", a.name)),
            Err(e) => check(e.family() == a.family, || format!("library: {} gave {}, expected {}", a.name, e.family(), a.family))?,
        }
    }

    // CLI.
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    for a in &attacks {
        let file = tmp.path().join(format!("{}.xml", a.name));
        fs::write(&file, &a.bytes).map_err(|e| e.to_string())?;
        let out = tmp.path().join(format!("{}.signed.xml", a.name));
        let o = Process::new(env!("CARGO_BIN_EXE_edoc"))
            .args(["doc-sign", file.to_str().unwrap(), "--defs"])
            .arg(fixture("data"))
            .arg("--out")
            .arg(&out)
            .arg("--sign-key")
            .arg(key(id::SSO_SIGN))
            .arg("--sign-cert")
            .arg(cert(id::SSO_SIGN))
            .env("EDOC_SIGN_PASS", id::passphrase(id::SSO_SIGN))
            .output()
            .map_err(|e| e.to_string())?;
        let err = String::from_utf8_lossy(&o.stderr);
        check(!o.status.success(), || format!("cli accepted {}", a.name))?;
        check(err.starts_with(&format!("error: {}:", a.family)), || format!("cli: {} said {err}", a.name))?;
        check(!out.exists(), || format!("cli wrote a signature for {}", a.name))?;
    }

    // Agent.
    let net = Net::new();
    let agent = Agent::start(AgentConfig {
        listen: "127.0.0.1:0".into(),
        token: None,
        client: net.client(SCENARIO_PORT, id::SSO_ROLE),
        signer: net.pki.signer(id::SSO_SIGN),
        doc_trust: net.pki.doc_trust(),
        clock: Arc::new(time::now),
    })
    .map_err(|e| e.to_string())?;
    let post = |path: &str, body: &[u8]| -> (u16, String) {
        let r = ureq::post(&format!("{}{path}", agent.url())).set(TOKEN_HEADER, agent.token()).send_bytes(body);
        match r {
            Ok(r) => (r.status(), r.into_string().unwrap_or_default()),
            Err(ureq::Error::Status(c, r)) => (c, r.into_string().unwrap_or_default()),
            Err(e) => (0, e.to_string()),
        }
    };
    for a in &attacks {
        let (code, body) = post("/v1/drafts", &a.bytes);
        check(code == 422 && body.contains(&format!("family=\"{}\"", a.family)), || {
            format!("agent drafts: {} gave {code} {body}", a.name)
        })?;
        let mut inline = b"<sign renderDigest=\"0\">".to_vec();
        inline.extend_from_slice(&a.bytes);
        inline.extend_from_slice(b"</sign>");
        let (code, body) = post("/v1/sign", &inline);
        check(code >= 400, || format!("agent sign accepted {}: {body}", a.name))?;
    }
    let signed = agent.signatures();
    agent.shutdown();
    check(signed == 0, || format!("agent produced {signed} signatures"))?;
    check(net.platform.document_count() == 0, || "a document reached the platform".into())?;
    Ok(format!("{} attacks rejected by library, CLI and agent with the expected family; 0 signatures", attacks.len()))
}

// ---- 4. authorization matrix

/// Reference role table, written out independently of the fixture code.
fn oracle_table() -> BTreeMap<&'static str, (Vec<&'static str>, Vec<&'static str>)> {
    let all = vec![
        "CreateEdoc", "StoreEdoc", "GetEdoc", "SearchEdocs", "SetAttribute", "RevokeEdoc", "ValidateEdoc", "CounterSign",
        "Acknowledge", "GetDefinition", "PutDefinition", "SetRoleMap", "PortControl", "GetLog",
    ];
    BTreeMap::from([
        (id::ADMIN_ROLE, (all, vec!["eEAC", "eEET", "eTranscript"])),
        (
            id::SSO_ROLE,
            (
                vec!["CreateEdoc", "StoreEdoc", "GetEdoc", "SearchEdocs", "SetAttribute", "RevokeEdoc", "ValidateEdoc", "Acknowledge", "GetDefinition"],
                vec!["eEAC", "eTranscript"],
            ),
        ),
        (
            id::PROFESSOR_ROLE,
            (
                vec!["CreateEdoc", "StoreEdoc", "GetEdoc", "SearchEdocs", "SetAttribute", "ValidateEdoc", "Acknowledge", "GetDefinition"],
                vec!["eEAC", "eEET"],
            ),
        ),
        (
            id::AUDITOR_ROLE,
            (vec!["GetEdoc", "SearchEdocs", "ValidateEdoc", "CounterSign", "GetLog"], vec!["eEAC", "eEET", "eTranscript"]),
        ),
    ])
}

const UNTYPED: [&str; 3] = ["SetRoleMap", "PortControl", "GetLog"];

fn authorization() -> Verdict {
    let pki = FixturePki::generate();
    let map = fixtures::rolemap(&pki);
    let trust = pki.role_trust();
    let at = ts("2026-03-02T08:00:00Z");
    let table = oracle_table();
    let mut n = 0;
    let mut allowed = 0;
    for (role, (cmds, types)) in &table {
        let signer = pki.signer(role);
        for cmd in CommandName::ALL {
            for t in [EEAC, EET, TRANSCRIPT] {
                let msg = AMessage::command(Command::new(cmd.as_str(), Some(t), vec![]), &signer, at).map_err(|e| e.to_string())?;
                let got = authorize(&msg, &map, &trust, &at);
                let expect = if !cmds.contains(&cmd.as_str()) {
                    Err(Denial::DeniedCommand)
                } else if !UNTYPED.contains(&cmd.as_str()) && !types.contains(&t) {
                    Err(Denial::DeniedDoctype)
                } else {
                    Ok(())
                };
                check(got.as_ref().map(|_| ()).map_err(Clone::clone) == expect, || {
                    format!("{role} {cmd} {t}: got {got:?}, oracle {expect:?}")
                })?;
                allowed += usize::from(expect.is_ok());
                n += 1;
            }
        }
    }
    check(n == 168, || format!("{n} triples"))?;
    Ok(format!("{n} triples match the oracle ({allowed} allowed)"))
}

// ---- 5. replay

fn replay() -> Verdict {
    let net = Net::new();
    let ids = net.admit(&["s100001", "s100002"], "01ABC");
    let mut client = net.client(SCENARIO_PORT, id::SSO_ROLE);
    let signer = net.pki.signer(id::SSO_ROLE);
    let kinds = |i: usize| -> Command {
        match i % 5 {
            0 => commands::search(EEAC, &[Predicate::Attr("status".into(), "pending".into())]),
            1 => commands::get(EEAC, &ids[i % 2]),
            2 => commands::validate_stored(EEAC, &ids[i % 2], None),
            3 => commands::get_definition(EEAC, None),
            _ => commands::acknowledge(EEAC, &ids[i % 2]),
        }
    };
    let status = |c: &mut Client, m: &AMessage| -> Result<String, String> {
        let r = c.call_message(m).map_err(|e| e.to_string())?;
        Ok(r.as_response().ok_or("not a response")?.status.clone())
    };
    let captured: Vec<AMessage> = (0..REPLAYED)
        .map(|i| AMessage::command(kinds(i), &signer, time::now()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    for (i, m) in captured.iter().enumerate() {
        let s = status(&mut client, m)?;
        check(s == codes::OK, || format!("first send of #{i}: {s}"))?;
    }
    let mut rejected = 0;
    for (i, m) in captured.iter().enumerate() {
        let s = status(&mut client, m)?;
        check(s == codes::REPLAY, || format!("resend of #{i}: {s}"))?;
        rejected += 1;
    }
    let mut fresh = 0;
    for i in 0..REPLAYED {
        let m = AMessage::command(kinds(i), &signer, time::now()).map_err(|e| e.to_string())?;
        let s = status(&mut client, &m)?;
        check(s == codes::OK, || format!("fresh re-issue of #{i}: {s}"))?;
        fresh += 1;
    }
    Ok(format!("{rejected}/{REPLAYED} resends rejected as REPLAY, {fresh}/{REPLAYED} fresh re-issues accepted"))
}

// ---- 6. gateway transparency

fn copy_tree(from: &Path, to: &Path) -> Result<(), String> {
    fixtures::copy_tree(from, to).map_err(|e| e.to_string())
}

fn gateway() -> Verdict {
    let pki = FixturePki::generate();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a_root, b_root) = (dir.path().join("a"), dir.path().join("b"));
    fixtures::init_data(&a_root, &pki).map_err(|e| e.to_string())?;
    copy_tree(&a_root, &b_root)?;
    // Inside the fixture card's validity window.
    let clock = Arc::new(FixedClock::new(ts("2026-01-20T08:00:00Z")));
    let open = |root: &Path| Platform::open(root, pki.signer(id::PLATFORM), clock.clone()).map_err(|e| e.to_string());
    let (a, b) = (Server::start(open(&a_root)?).map_err(|e| e.to_string())?, Server::start(open(&b_root)?).map_err(|e| e.to_string())?);
    let addr = |s: &Server, p: &str| s.addr(p).map(|x| x.to_string()).ok_or(format!("no port {p}"));
    let gw_main = Gateway::start("127.0.0.1:0", &addr(&b, SCENARIO_PORT)?).map_err(|e| e.to_string())?;
    let gw_admin = Gateway::start("127.0.0.1:0", &addr(&b, ADMIN_PORT)?).map_err(|e| e.to_string())?;
    let trust = pki.doc_trust();
    let direct = |port: &str, role: &str| -> Result<Client, String> {
        Ok(Client::new(Endpoint::Tcp(addr(&a, port)?), pki.signer(role), trust.clone()))
    };
    let tunnel = |url: String, role: &str| Client::new(Endpoint::Gateway(url), pki.signer(role), trust.clone());

    // A catalog that exercises all 14 commands.
    let eac = fixtures::fixture_eeac(&pki);
    let eac_id = eac.doc_id();
    let fields = fixtures::eeac_fields(&fixtures::registry(), "s100002", "01ABC", clock.now()).ok_or("no fields")?;
    let mut v2 = transcript_bundle();
    v2.typedef.version = 2;
    let steps: Vec<(&str, &str, Command)> = vec![
        (SCENARIO_PORT, id::SSO_ROLE, commands::create_from_fields(EEAC, &fields)),
        (SCENARIO_PORT, id::SSO_ROLE, commands::store(&eac, None)),
        (SCENARIO_PORT, id::SSO_ROLE, commands::store(&eac, None)),
        (SCENARIO_PORT, id::SSO_ROLE, commands::get(EEAC, &eac_id)),
        (SCENARIO_PORT, id::SSO_ROLE, commands::search(EEAC, &[Predicate::Field("/eEAC/exam/code".into(), "01ABC".into())])),
        (SCENARIO_PORT, id::SSO_ROLE, commands::validate_stored(EEAC, &eac_id, None)),
        (SCENARIO_PORT, id::SSO_ROLE, commands::acknowledge(EEAC, &eac_id)),
        (SCENARIO_PORT, id::SSO_ROLE, commands::get_definition(TRANSCRIPT, Some(1))),
        (SCENARIO_PORT, id::AUDITOR_ROLE, commands::counter_sign(EEAC, &eac_id, "sha256")),
        (SCENARIO_PORT, id::SSO_ROLE, commands::set_attribute(EEAC, &eac_id, "status", "processed", Some("pending"))),
        (SCENARIO_PORT, id::SSO_ROLE, commands::set_attribute(EEAC, &eac_id, "status", "pending", Some("processed"))),
        (SCENARIO_PORT, id::SSO_ROLE, commands::revoke(EEAC, &eac_id, "issued in error")),
        (SCENARIO_PORT, id::PROFESSOR_ROLE, commands::get_log(1, None)),
        (ADMIN_PORT, id::ADMIN_ROLE, commands::put_definition(&v2)),
        (ADMIN_PORT, id::ADMIN_ROLE, commands::set_role_map(fixtures::rolemap(&pki).to_xml())),
        // A stopped port reports no address; a running one reports its
        // ephemeral address, which necessarily differs between the twins.
        (ADMIN_PORT, id::ADMIN_ROLE, commands::port_control("service", "stop")),
        (ADMIN_PORT, id::ADMIN_ROLE, commands::get_log(1, None)),
    ];
    let mut seen = BTreeSet::new();
    let mut statuses = BTreeMap::<String, usize>::new();
    for (i, (port, role, cmd)) in steps.into_iter().enumerate() {
        seen.insert(cmd.name.clone());
        let msg = AMessage::command(cmd, &pki.signer(role), clock.now()).map_err(|e| e.to_string())?;
        let frame = encode(&msg);
        let x = direct(port, role)?.send_frame(&frame).map_err(|e| format!("direct #{i}: {e}"))?;
        let url = if port == ADMIN_PORT { gw_admin.url() } else { gw_main.url() };
        let y = tunnel(url, role).send_frame(&frame).map_err(|e| format!("tunnel #{i}: {e}"))?;
        check(x == y, || format!("step {i} differs between direct and tunnel"))?;
        let r = edoc_protocol::decode(&x, edoc_protocol::MAX_FRAME).map_err(|e| e.to_string())?;
        *statuses.entry(r.as_response().ok_or("not a response")?.status.clone()).or_default() += 1;
        clock.advance(chrono_secs(1));
    }
    gw_main.shutdown();
    gw_admin.shutdown();
    a.shutdown();
    b.shutdown();
    check(seen.len() == CommandName::ALL.len(), || format!("catalog covers {} commands", seen.len()))?;
    let summary: Vec<String> = statuses.iter().map(|(k, v)| format!("{k}x{v}")).collect();
    Ok(format!("{} commands, byte-identical response frames ({})", seen.len(), summary.join(" ")))
}

fn chrono_secs(n: i64) -> chrono::Duration {
    chrono::Duration::seconds(n)
}

// ---- 7/8. demo and restart

fn demo(work: &Path) -> Verdict {
    let started = Instant::now();
    let o = Process::new(env!("CARGO_BIN_EXE_edoc"))
        .arg("demo")
        .arg("--work")
        .arg(work)
        .output()
        .map_err(|e| e.to_string())?;
    let took = started.elapsed();
    let out = String::from_utf8_lossy(&o.stdout);
    check(o.status.success(), || format!("exit {:?}: {}{}", o.status.code(), out, String::from_utf8_lossy(&o.stderr)))?;
    check(out.contains("demo PASSED"), || "demo did not report success".into())?;
    check(took < DEMO_BUDGET, || format!("took {took:.2?}"))?;
    Ok(format!("3 e-EACs issued and processed, receipts verify, +43 d check fails; {took:.2?} including process start"))
}

fn restart(work: &Path) -> Verdict {
    let data = work.join("data");
    let pki = FixturePki::load(&fixtures::fixture_dir()).map_err(|e| e.to_string())?;
    let platform = Platform::open(&data, pki.signer(id::PLATFORM), Arc::new(SystemClock)).map_err(|e| e.to_string())?;
    let report = platform.integrity().clone();
    check(report.is_ok(), || format!("integrity: {report}"))?;
    let trust = pki.doc_trust();
    let mut n = 0;
    for e in fs::read_dir(data.join("docs")).map_err(|e| e.to_string())? {
        let dir: PathBuf = e.map_err(|e| e.to_string())?.path();
        let name = dir.file_name().unwrap().to_string_lossy().to_string();
        if name.starts_with('.') {
            continue;
        }
        let bytes = fs::read(dir.join("doc.xml")).map_err(|e| e.to_string())?;
        let digest = hex::encode(Sha256::digest(&bytes));
        check(digest == name, || format!("{name}: stored bytes hash to {digest}"))?;
        let doc = EDoc::from_bytes(&bytes).map_err(|e| e.to_string())?;
        check(verify_envelope(&doc.signed, &trust, &time::now()).primary.signature_valid, || {
            format!("{name}: signature does not verify")
        })?;
        n += 1;
    }
    check(n == 6 && n == platform.document_count(), || format!("{n} documents on disk, {} loaded", platform.document_count()))?;
    let seqs: Vec<u64> = platform.log_entries().iter().map(|e| e.seq).collect();
    check(seqs.iter().copied().eq(1..=seqs.len() as u64), || "log sequence has gaps".into())?;
    Ok(format!("{n} docIds re-verified from stored bytes, log 1..{} gapless", seqs.len()))
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let demo_dir = work.path().to_path_buf();
    let suite: Vec<Criterion> = vec![
        ("canonicalization", Box::new(canonicalization)),
        ("signatures", Box::new(signatures)),
        ("wysiwys attack corpus", Box::new(attack_corpus)),
        ("authorization matrix", Box::new(authorization)),
        ("replay", Box::new(replay)),
        ("gateway transparency", Box::new(gateway)),
        ("end-to-end demo", Box::new({
            let d = demo_dir.clone();
            move || demo(&d)
        })),
        ("crash-restart integrity", Box::new(move || restart(&demo_dir))),
    ];
    let prev = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in suite {
        let started = Instant::now();
        let r = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        match r {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2?}]", started.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{:.2?}]", started.elapsed());
            }
        }
    }
    std::panic::set_hook(prev);
    drop(work);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
