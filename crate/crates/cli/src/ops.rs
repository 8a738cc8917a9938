//! Subcommand implementations. Each returns an [`Output`] carrying both the
//! canonical XML form and the human-readable text.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use edoc_core::bundle::{DefinitionBundle, DefinitionSet, Definitions};
use edoc_core::edoc::{validate_edoc, Draft, EDoc, ValidationContext, ValidityReport, STATUS};
use edoc_core::sig::{issue_cert, keygen, keystore, self_signed, CertTemplate, MiniCert, Purpose, SigAlg, TrustStore};
use edoc_core::time::{self, Timestamp};
use edoc_core::wysiwys::{prepare_signing, render_to_sign, sign_rendered, verify_and_render, DisplayForm, SignableContent};
use edoc_core::xml::{a_canon, a_canon_string, Element};
use edoc_protocol::commands::{self, hits_from_xml, Link, Predicate, Stored};
use edoc_protocol::{Command, Response};

use crate::defs::load_definitions;
use crate::error::CliError;
use crate::profile::{read_xml, Profile};

pub struct Output {
    pub xml: Element,
    pub human: String,
    pub exit_code: i32,
}

impl Output {
    pub fn ok(xml: Element, human: impl Into<String>) -> Self {
        Output {
            xml,
            human: human.into(),
            exit_code: 0,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn parse_time(s: &str) -> Result<Timestamp, CliError> {
    time::parse(s).ok_or_else(|| CliError::input(format!("bad timestamp `{s}`, expected YYYY-MM-DDThh:mm:ssZ")))
}

/// `key=value` pairs from repeated flags.
pub fn pairs(items: &[String]) -> Result<BTreeMap<String, String>, CliError> {
    items
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| CliError::input(format!("expected key=value, got `{s}`")))
        })
        .collect()
}

fn form_output(form: &DisplayForm, extra: Element, trailer: &str) -> Output {
    let mut xml = extra;
    xml.push(form.to_xml());
    let mut human = form.serialize();
    if !trailer.is_empty() {
        human.push('\n');
        human.push_str(trailer);
    }
    Output::ok(xml, human)
}

// ---- keys and certificates

pub struct KeygenArgs<'a> {
    pub out: &'a Path,
    pub public_out: Option<&'a Path>,
    pub alg: &'a str,
    pub passphrase: &'a str,
    pub distinct_from: &'a [PathBuf],
    pub iterations: u32,
}

/// Writes a new key store. Refuses a passphrase that also opens any of the
/// `distinct_from` key stores, so authentication and signing keys of one
/// person never share a secret.
pub fn keygen_cmd(a: KeygenArgs<'_>) -> Result<Output, CliError> {
    let alg: SigAlg = a.alg.parse()?;
    for other in a.distinct_from {
        if keystore::open(&read(other)?, a.passphrase).is_ok() {
            return Err(CliError::Key(format!(
                "passphrase must differ from the one protecting {}",
                other.display()
            )));
        }
    }
    if a.out.exists() {
        return Err(CliError::input(format!("{} already exists", a.out.display())));
    }
    let (key, public) = keygen(alg);
    write(a.out, &keystore::seal(&key, a.passphrase, a.iterations)?)?;
    let xml = public_key_xml(&public);
    if let Some(p) = a.public_out {
        write(p, &a_canon(&xml))?;
    }
    let human = format!("key store: {}\nalgorithm: {}\nkey id: {}\n", a.out.display(), alg, public.key_id());
    Ok(Output::ok(xml, human))
}

fn public_key_xml(k: &edoc_core::sig::PublicKey) -> Element {
    Element::with_text("publicKey", hex::encode(&k.bytes))
        .attr("alg", k.alg.tag())
        .attr("keyId", k.key_id())
}

fn public_key_from_xml(e: &Element) -> Result<edoc_core::sig::PublicKey, CliError> {
    if e.name != "publicKey" {
        return Err(CliError::input("expected <publicKey>"));
    }
    Ok(edoc_core::sig::PublicKey {
        alg: e.get_attr("alg").unwrap_or("").parse()?,
        bytes: hex::decode(e.text().trim()).map_err(|_| CliError::input("bad public key hex"))?,
    })
}

pub struct CertArgs<'a> {
    pub subject: &'a str,
    pub purposes: &'a [String],
    /// `<publicKey>` file of the subject; absent for a self-signed anchor.
    pub public: Option<&'a Path>,
    pub issuer_key: &'a Path,
    pub issuer_pass: &'a str,
    pub issuer_cert: Option<&'a Path>,
    pub not_before: Timestamp,
    pub not_after: Timestamp,
    pub serial: u64,
    pub out: &'a Path,
}

pub fn cert_issue_cmd(a: CertArgs<'_>) -> Result<Output, CliError> {
    let purposes = a
        .purposes
        .iter()
        .map(|p| p.parse::<Purpose>())
        .collect::<Result<Vec<_>, _>>()?;
    let issuer_key = keystore::open(&read(a.issuer_key)?, a.issuer_pass)?;
    let cert = match a.issuer_cert {
        None => {
            let tpl = CertTemplate::new(a.subject, issuer_key.public_key(), purposes, a.not_before, a.not_after, a.serial);
            self_signed(tpl, &issuer_key)?
        }
        Some(ic) => {
            let public = a.public.ok_or_else(|| CliError::input("--public is required with --issuer-cert"))?;
            let key = public_key_from_xml(&read_xml(public)?)?;
            let issuer = MiniCert::from_xml(&read_xml(ic)?)?;
            let tpl = CertTemplate::new(a.subject, key, purposes, a.not_before, a.not_after, a.serial);
            issue_cert(tpl, &issuer_key, &issuer, &time::now())?
        }
    };
    let xml = cert.to_xml();
    write(a.out, &a_canon(&xml))?;
    let p: Vec<&str> = cert.purposes.iter().map(|p| p.tag()).collect();
    let human = format!(
        "subject: {}\nissuer: {}\npurposes: {}\nvalid: {} .. {}\nkey id: {}\nwritten: {}\n",
        cert.subject,
        cert.issuer,
        p.join(" "),
        time::format(&cert.not_before),
        time::format(&cert.not_after),
        cert.key.key_id(),
        a.out.display()
    );
    Ok(Output::ok(xml, human))
}

// ---- documents

/// Definitions from a local directory, or fetched from the platform for
/// the document's own type and version.
pub fn definitions(defs: Option<&Path>, profile: &Profile, bytes: &[u8]) -> Result<DefinitionSet, CliError> {
    if let Some(d) = defs {
        return load_definitions(d);
    }
    if profile.endpoint.is_none() {
        return Err(CliError::input("--defs or --endpoint is required to find the definition"));
    }
    let header = match Draft::from_bytes(bytes) {
        Ok(d) => d.header,
        Err(_) => EDoc::from_bytes(bytes)?.header,
    };
    let mut desk = profile.desk()?;
    let mut set = DefinitionSet::new();
    let (t, v) = (&header.type_id, header.version);
    match desk.definition(t, v) {
        Ok(b) => set.insert(b),
        Err(edoc_eas::EasError::Platform { status, .. }) => {
            return Err(CliError::Refused {
                family: "UnknownType".into(),
                message: format!("no definition of {t} v{v} available ({status})"),
            })
        }
        Err(e) => return Err(e.into()),
    };
    Ok(set)
}

fn bundle_for(defs: &DefinitionSet, type_id: &str, version: u32) -> Result<std::sync::Arc<DefinitionBundle>, CliError> {
    defs.bundle(type_id, version).ok_or_else(|| CliError::Refused {
        family: "UnknownType".into(),
        message: format!("unknown document type {type_id} v{version}"),
    })
}

fn is_signed(bytes: &[u8]) -> bool {
    edoc_core::xml::parse(bytes)
        .map(|e| e.first("Signature").is_some())
        .unwrap_or(false)
}

/// Renders a draft as it would be signed, or a signed document with its
/// verification verdict.
pub fn doc_view(file: &Path, defs: Option<&Path>, profile: &Profile, at: Option<Timestamp>) -> Result<Output, CliError> {
    let bytes = read(file)?;
    let set = definitions(defs, profile, &bytes)?;
    if is_signed(&bytes) {
        return doc_verify_bytes(&bytes, &set, &profile.trust_store()?, at);
    }
    let rendered = prepare_signing(&bytes, &set)?;
    let digest = rendered.render_digest();
    Ok(form_output(
        rendered.form(),
        Element::new("view").attr("renderDigest", &digest),
        &format!("Render digest: {digest}\n"),
    ))
}

/// The only CLI path to a signature: parse, render, then sign the rendered
/// bytes.
pub fn doc_sign(file: &Path, defs: Option<&Path>, profile: &Profile, out: &Path) -> Result<Output, CliError> {
    let bytes = read(file)?;
    let set = definitions(defs, profile, &bytes)?;
    let rendered: SignableContent = prepare_signing(&bytes, &set)?;
    let signer = profile.sign_signer()?;
    let doc = sign_rendered(&rendered, &signer, time::now())?;
    write(out, &doc.canonical_bytes())?;
    let digest = rendered.render_digest();
    Ok(form_output(
        rendered.form(),
        Element::new("signed")
            .attr("docId", doc.doc_id())
            .attr("renderDigest", &digest)
            .attr("file", out.display().to_string()),
        &format!("Render digest: {digest}\nSigned by: {}\nDoc id: {}\nWritten: {}\n", signer.cert().subject, doc.doc_id(), out.display()),
    ))
}

fn doc_verify_bytes(bytes: &[u8], set: &DefinitionSet, trust: &TrustStore, at: Option<Timestamp>) -> Result<Output, CliError> {
    let doc = EDoc::from_bytes(bytes)?;
    let bundle = bundle_for(set, &doc.header.type_id, doc.header.version)?;
    let at = at.unwrap_or_else(time::now);
    let (form, _) = verify_and_render(&doc, &bundle, trust, &at)?;
    // Offline checks only: status and revocation live on the platform.
    let report = validate_edoc(
        &doc,
        &ValidationContext {
            trust,
            definitions: set,
            revocation: None,
            attributes: None,
            at,
        },
    );
    let valid = form.header.first().is_some_and(|(_, v)| v == "VALID") && report.is_valid();
    let mut out = form_output(
        &form,
        Element::new("verified")
            .attr("docId", doc.doc_id())
            .attr("valid", valid.to_string())
            .attr("at", time::format(&at))
            .child(report.to_xml()),
        &format!("\n{report}"),
    );
    if !valid {
        out.exit_code = CliError::Invalid(String::new()).exit_code();
    }
    Ok(out)
}

pub fn doc_verify(file: &Path, defs: Option<&Path>, profile: &Profile, at: Option<Timestamp>) -> Result<Output, CliError> {
    let bytes = read(file)?;
    let set = definitions(defs, profile, &bytes)?;
    doc_verify_bytes(&bytes, &set, &profile.trust_store()?, at)
}

// ---- platform commands

fn call(profile: &Profile, cmd: Command) -> Result<Response, CliError> {
    let mut client = profile.client()?;
    let resp = client.call(cmd)?;
    if resp.is_ok() {
        Ok(resp)
    } else {
        Err(CliError::Platform {
            status: resp.status.clone(),
            detail: resp.detail(),
        })
    }
}

fn payload_output(resp: &Response) -> Output {
    let mut xml = Element::new("response").attr("status", &resp.status);
    let mut human = String::new();
    for p in &resp.payload {
        xml.push(p.clone());
        human.push_str(&a_canon_string(p));
        human.push('\n');
    }
    Output::ok(xml, human)
}

pub fn create(profile: &Profile, type_id: &str, fields: &[String], input: Option<&str>, manual: &[String], out: &Path) -> Result<Output, CliError> {
    let cmd = match input {
        Some(id) => commands::create_from_input(type_id, id, &pairs(manual)?),
        None => commands::create_from_fields(type_id, &pairs(fields)?),
    };
    let mut desk = profile.desk()?;
    let draft = desk.create(cmd)?;
    let bundle = desk.definition(&draft.header.type_id, draft.header.version)?;
    let rendered = render_to_sign(&draft, &bundle)?;
    write(out, &a_canon(&draft.to_xml()))?;
    Ok(form_output(
        rendered.form(),
        Element::new("draft").attr("file", out.display().to_string()).attr("renderDigest", rendered.render_digest()),
        &format!("Draft written: {}\n", out.display()),
    ))
}

pub fn submit(profile: &Profile, file: &Path, link: Option<Link>) -> Result<Output, CliError> {
    let doc = EDoc::from_bytes(&read(file)?)?;
    let mut desk = profile.desk_for_submit()?;
    let stored: Stored = desk.store(&doc, link.as_ref())?;
    let binds = stored.receipt.binds(&doc, &profile.trust_store()?, &time::now());
    let mut human = format!(
        "stored: {}\nstatus: {}\nreceipt: {}\n",
        stored.doc_id,
        stored.attrs.status().unwrap_or("-"),
        if binds { "verified" } else { "DOES NOT VERIFY" }
    );
    if let Some((id, a)) = &stored.linked {
        human.push_str(&format!("linked: {id} -> {}\n", a.status().unwrap_or("-")));
    }
    let mut out = Output::ok(stored.to_xml(), human);
    if !binds {
        out.exit_code = CliError::Invalid(String::new()).exit_code();
    }
    Ok(out)
}

pub fn search(profile: &Profile, type_id: &str, attrs: &[String], fields: &[String]) -> Result<Output, CliError> {
    let mut preds: Vec<Predicate> = pairs(attrs)?.into_iter().map(|(k, v)| Predicate::Attr(k, v)).collect();
    preds.extend(pairs(fields)?.into_iter().map(|(k, v)| Predicate::Field(k, v)));
    let resp = call(profile, commands::search(type_id, &preds))?;
    let results = resp
        .first("results")
        .cloned()
        .ok_or_else(|| CliError::Transport("response lacks <results>".into()))?;
    let hits = hits_from_xml(&results).ok_or_else(|| CliError::Transport("bad <results>".into()))?;
    let mut human = String::new();
    for h in &hits {
        let values: Vec<&str> = h.fields.iter().map(|(_, v)| v.as_str()).collect();
        human.push_str(&format!("{} {} {}\n", h.doc_id, h.attrs.get(STATUS).unwrap_or("-"), values.join(" | ")));
    }
    Ok(Output::ok(results, human))
}

pub fn set_status(profile: &Profile, type_id: &str, doc_id: &str, to: &str, expect: Option<&str>) -> Result<Output, CliError> {
    let resp = call(profile, commands::set_attribute(type_id, doc_id, STATUS, to, expect))?;
    let mut out = payload_output(&resp);
    out.human = format!("{doc_id} -> {to}\n");
    Ok(out)
}

pub fn revoke(profile: &Profile, type_id: &str, doc_id: &str, reason: &str) -> Result<Output, CliError> {
    let resp = call(profile, commands::revoke(type_id, doc_id, reason))?;
    let mut out = payload_output(&resp);
    out.human = format!("{doc_id} revoked: {reason}\n");
    Ok(out)
}

pub fn validate(profile: &Profile, type_id: &str, doc_id: Option<&str>, file: Option<&Path>, at: Option<Timestamp>) -> Result<Output, CliError> {
    let cmd = match (doc_id, file) {
        (Some(id), None) => commands::validate_stored(type_id, id, at),
        (None, Some(f)) => commands::validate_inline(&EDoc::from_bytes(&read(f)?)?, at),
        _ => return Err(CliError::input("give exactly one of --doc and --file")),
    };
    let resp = call(profile, cmd)?;
    let e = resp
        .first("ValidityReport")
        .ok_or_else(|| CliError::Transport("response lacks <ValidityReport>".into()))?;
    let report = ValidityReport::from_xml(e)?;
    let mut out = Output::ok(report.to_xml(), report.to_string());
    if !report.is_valid() {
        out.exit_code = CliError::Invalid(String::new()).exit_code();
    }
    Ok(out)
}

pub fn admin(profile: &Profile, cmd: Command) -> Result<Output, CliError> {
    Ok(payload_output(&call(profile, cmd)?))
}

pub fn put_definition_cmd(dir: &Path) -> Result<Command, CliError> {
    let b = DefinitionBundle::load_dir(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    Ok(commands::put_definition(&b))
}

impl Profile {
    /// Submitting needs no signing key; a placeholder desk signer is the
    /// role key itself, which is never used to sign documents here.
    fn desk_for_submit(&self) -> Result<edoc_eas::Desk, CliError> {
        let client = self.client()?;
        let role = client.signer().clone();
        Ok(edoc_eas::Desk::new(client, role, std::sync::Arc::new(time::now)))
    }
}
