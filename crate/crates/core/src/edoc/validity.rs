use std::fmt;

use super::{AttributeSet, EDoc, EdocError, RevocationRecord};
use crate::bundle::Definitions;
use crate::sig::{verify_envelope, Purpose, TrustStore};
use crate::time::{self, Timestamp};
use crate::xml::Element;

/// Outcome of one validity dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Check {
    Pass,
    Fail(String),
    NotApplicable(String),
}

impl Check {
    pub fn passed(&self) -> bool {
        !matches!(self, Check::Fail(_))
    }

    fn tag(&self) -> &'static str {
        match self {
            Check::Pass => "pass",
            Check::Fail(_) => "fail",
            Check::NotApplicable(_) => "n/a",
        }
    }

    fn detail(&self) -> &str {
        match self {
            Check::Pass => "",
            Check::Fail(d) | Check::NotApplicable(d) => d,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Check::Pass => f.write_str("pass"),
            _ => write!(f, "{} ({})", self.tag(), self.detail()),
        }
    }
}

pub struct ValidationContext<'a> {
    pub trust: &'a TrustStore,
    pub definitions: &'a dyn Definitions,
    pub revocation: Option<&'a RevocationRecord>,
    /// Absent for documents that were never stored.
    pub attributes: Option<&'a AttributeSet>,
    pub at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityReport {
    pub doc_id: String,
    pub at: Timestamp,
    pub structure: Check,
    pub def_binding: Check,
    pub signatures: Check,
    pub status: Check,
    pub revocation: Check,
    pub within_validity_period: Check,
}

impl ValidityReport {
    pub fn checks(&self) -> [(&'static str, &Check); 6] {
        [
            ("structure", &self.structure),
            ("defBinding", &self.def_binding),
            ("signatures", &self.signatures),
            ("status", &self.status),
            ("revocation", &self.revocation),
            ("withinValidityPeriod", &self.within_validity_period),
        ]
    }

    pub fn is_valid(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.passed())
    }

    pub fn is_revoked(&self) -> bool {
        !self.revocation.passed()
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("ValidityReport")
            .attr("docId", &self.doc_id)
            .attr("at", time::format(&self.at))
            .attr("valid", self.is_valid().to_string());
        for (name, c) in self.checks() {
            let mut ce = Element::new("check").attr("name", name).attr("result", c.tag());
            if !c.detail().is_empty() {
                ce.set_attr("detail", c.detail());
            }
            e.push(ce);
        }
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, EdocError> {
        let bad = |m: &str| EdocError::Malformed(m.to_string());
        if e.name != "ValidityReport" {
            return Err(bad("expected <ValidityReport>"));
        }
        let check = |name: &str| -> Result<Check, EdocError> {
            let c = e
                .elements_named("check")
                .find(|c| c.get_attr("name") == Some(name))
                .ok_or_else(|| EdocError::Malformed(format!("report lacks check {name}")))?;
            let detail = c.get_attr("detail").unwrap_or("").to_string();
            match c.get_attr("result") {
                Some("pass") => Ok(Check::Pass),
                Some("fail") => Ok(Check::Fail(detail)),
                Some("n/a") => Ok(Check::NotApplicable(detail)),
                _ => Err(bad("bad check result")),
            }
        };
        Ok(ValidityReport {
            doc_id: e.get_attr("docId").unwrap_or("").to_string(),
            at: time::parse(e.get_attr("at").unwrap_or("")).ok_or_else(|| bad("bad `at`"))?,
            structure: check("structure")?,
            def_binding: check("defBinding")?,
            signatures: check("signatures")?,
            status: check("status")?,
            revocation: check("revocation")?,
            within_validity_period: check("withinValidityPeriod")?,
        })
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Validity: {}", if self.is_valid() { "VALID" } else { "INVALID" })?;
        for (name, c) in self.checks() {
            writeln!(f, "{name}: {c}")?;
        }
        Ok(())
    }
}

/// Evaluates every validity dimension of `doc` independently.
pub fn validate_edoc(doc: &EDoc, ctx: &ValidationContext<'_>) -> ValidityReport {
    let bundle = ctx.definitions.bundle(&doc.header.type_id, doc.header.version);
    let missing = || Check::Fail(format!("no definition for {} v{}", doc.header.type_id, doc.header.version));

    let structure = match &bundle {
        None => missing(),
        Some(b) => {
            let r = b.typedef.validate_structure(doc.content());
            if r.is_ok() {
                Check::Pass
            } else {
                Check::Fail(r.to_string())
            }
        }
    };

    let def_binding = match &bundle {
        None => missing(),
        Some(b) if b.digest() != doc.header.def_digest => Check::Fail("defDigest does not match the registered definition".into()),
        Some(_) if !doc.header_is_signed() => Check::Fail("header is not covered by the signature".into()),
        Some(_) => Check::Pass,
    };

    let env = verify_envelope(&doc.signed, ctx.trust, &ctx.at);
    let signatures = if !env.primary.signature_valid {
        Check::Fail("signature does not verify".into())
    } else if let Err(e) = &env.primary.chain {
        Check::Fail(format!("signer chain: {}", e.code()))
    } else if env.primary.purpose != Purpose::Sign {
        Check::Fail(format!("signed with a {} key", env.primary.purpose))
    } else if !env.is_valid() {
        Check::Fail("a counter-signature does not verify".into())
    } else {
        Check::Pass
    };

    let status = match (ctx.attributes, &bundle) {
        (None, _) => Check::NotApplicable("document is not stored".into()),
        (Some(_), None) => missing(),
        (Some(a), Some(b)) => match a.status() {
            None => Check::Fail("no status".into()),
            Some(s) => match b.meta.state(s) {
                Some(st) if st.valid => Check::Pass,
                Some(_) => Check::Fail(format!("status is {s}")),
                None => Check::Fail(format!("unknown status {s}")),
            },
        },
    };

    let revocation = match ctx.revocation {
        Some(r) => Check::Fail(format!("revoked at {}: {}", time::format(&r.revoked_at), r.reason)),
        None => Check::Pass,
    };

    let within_validity_period = match bundle.as_ref().and_then(|b| b.meta.validity.clone()) {
        None if bundle.is_none() => missing(),
        None => Check::NotApplicable("type declares no validity period".into()),
        Some(v) => {
            let read = |p: &str| doc.content().select_text(p).and_then(|s| time::parse(&s));
            match (read(&v.not_before), read(&v.not_after)) {
                (Some(nb), Some(na)) if nb <= ctx.at && ctx.at <= na => Check::Pass,
                (Some(nb), Some(na)) => Check::Fail(format!(
                    "outside {} .. {}",
                    time::format(&nb),
                    time::format(&na)
                )),
                _ => Check::Fail("validity period missing or unreadable".into()),
            }
        }
    };

    ValidityReport {
        doc_id: doc.doc_id(),
        at: ctx.at,
        structure,
        def_binding,
        signatures,
        status,
        revocation,
        within_validity_period,
    }
}
