//! On-disk document directory.
//!
//! ```text
//! docs/<docId>/doc.xml            canonical signed e-doc, docId = sha256(bytes)
//!              attrs.xml          current attribute set
//!              receipt.xml        platform receipt
//!              revocation.xml     revocation record, if revoked
//!              countersigned.xml  latest platform counter-signed copy
//!              link.xml           pending status change of another document
//! ```
//!
//! Every file is written to a temporary name and renamed. A new document
//! directory is built under `.tmp-<docId>` and renamed as a whole, so it
//! either exists completely or not at all. A linked status change is
//! recorded in `link.xml` inside the new directory before the rename and
//! finished (or rolled forward on the next open) afterwards.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use edoc_core::digest::sha256_hex;
use edoc_core::edoc::{AttributeSet, EDoc, Receipt, RevocationRecord};
use edoc_core::xml::{a_canon, parse, Element};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocRecord {
    pub doc: EDoc,
    pub attrs: AttributeSet,
    pub receipt: Option<Receipt>,
    pub revocation: Option<RevocationRecord>,
    pub countersigned: Option<EDoc>,
}

/// Pending attribute change of another document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingLink {
    pub doc_id: String,
    pub attrs: AttributeSet,
}

impl PendingLink {
    fn to_xml(&self) -> Element {
        Element::new("link").attr("docId", &self.doc_id).child(self.attrs.to_xml())
    }

    fn from_xml(e: &Element) -> Option<Self> {
        Some(PendingLink {
            doc_id: e.get_attr("docId")?.to_string(),
            attrs: AttributeSet::from_xml(e.first("attrs")?).ok()?,
        })
    }
}

/// Findings of the integrity check run on open.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreCheck {
    pub documents: usize,
    /// Directories whose name is not the digest of a canonical `doc.xml`,
    /// or whose files do not parse.
    pub mismatches: Vec<String>,
    pub links_rolled_forward: usize,
}

pub struct DocStore {
    dir: PathBuf,
    records: BTreeMap<String, DocRecord>,
}

const DOC: &str = "doc.xml";
const ATTRS: &str = "attrs.xml";
const RECEIPT: &str = "receipt.xml";
const REVOCATION: &str = "revocation.xml";
const COUNTERSIGNED: &str = "countersigned.xml";
const LINK: &str = "link.xml";
const TMP_PREFIX: &str = ".tmp-";

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::File::open(&tmp)?.sync_all()?;
    fs::rename(&tmp, path)
}

fn read_xml(path: &Path) -> Result<Option<Element>, String> {
    match fs::read(path) {
        Ok(b) => parse(&b).map(Some).map_err(|e| format!("{}: {e}", path.display())),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(format!("{}: {e}", path.display())),
    }
}

fn load_record(dir: &Path, doc_id: &str) -> Result<(DocRecord, Option<PendingLink>), String> {
    let bytes = fs::read(dir.join(DOC)).map_err(|e| e.to_string())?;
    if sha256_hex(&bytes) != doc_id {
        return Err("docId does not match doc.xml".into());
    }
    let doc = EDoc::from_bytes(&bytes).map_err(|e| e.to_string())?;
    if doc.canonical_bytes() != bytes {
        return Err("doc.xml is not canonical".into());
    }
    let attrs = read_xml(&dir.join(ATTRS))?.ok_or("attrs.xml missing")?;
    let attrs = AttributeSet::from_xml(&attrs).map_err(|e| e.to_string())?;
    let receipt = read_xml(&dir.join(RECEIPT))?
        .map(|e| Receipt::from_xml(&e))
        .transpose()
        .map_err(|e| e.to_string())?;
    let revocation = read_xml(&dir.join(REVOCATION))?
        .map(|e| RevocationRecord::from_xml(&e))
        .transpose()
        .map_err(|e| e.to_string())?;
    let countersigned = read_xml(&dir.join(COUNTERSIGNED))?
        .map(|e| EDoc::from_xml(&e))
        .transpose()
        .map_err(|e| e.to_string())?;
    let link = match read_xml(&dir.join(LINK))? {
        Some(e) => Some(PendingLink::from_xml(&e).ok_or("bad link.xml")?),
        None => None,
    };
    Ok((
        DocRecord {
            doc,
            attrs,
            receipt,
            revocation,
            countersigned,
        },
        link,
    ))
}

impl DocStore {
    pub fn open(dir: &Path) -> io::Result<(Self, StoreCheck)> {
        fs::create_dir_all(dir)?;
        let mut store = DocStore {
            dir: dir.to_path_buf(),
            records: BTreeMap::new(),
        };
        let mut check = StoreCheck::default();
        let mut pending = Vec::new();
        let mut names: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for name in names {
            let path = dir.join(&name);
            if name.starts_with(TMP_PREFIX) {
                fs::remove_dir_all(&path)?;
                continue;
            }
            match load_record(&path, &name) {
                Ok((rec, link)) => {
                    if let Some(l) = link {
                        pending.push((name.clone(), l));
                    }
                    store.records.insert(name, rec);
                }
                Err(e) => {
                    log::warn!("document {name}: {e}");
                    check.mismatches.push(name);
                }
            }
        }
        for (owner, link) in pending {
            if store.records.contains_key(&link.doc_id) {
                store.set_attrs(&link.doc_id, link.attrs)?;
            }
            fs::remove_file(dir.join(&owner).join(LINK))?;
            check.links_rolled_forward += 1;
        }
        check.documents = store.records.len();
        Ok((store, check))
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.records.contains_key(doc_id)
    }

    pub fn get(&self, doc_id: &str) -> Option<&DocRecord> {
        self.records.get(doc_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &DocRecord)> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Stores a new document; with `link`, also replaces the attributes of
    /// another stored document as one unit.
    pub fn insert(
        &mut self,
        doc: EDoc,
        attrs: AttributeSet,
        receipt: Receipt,
        link: Option<PendingLink>,
    ) -> io::Result<String> {
        let doc_id = doc.doc_id();
        let tmp = self.dir.join(format!("{TMP_PREFIX}{doc_id}"));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir(&tmp)?;
        write_atomic(&tmp.join(DOC), &doc.canonical_bytes())?;
        write_atomic(&tmp.join(ATTRS), &a_canon(&attrs.to_xml()))?;
        write_atomic(&tmp.join(RECEIPT), &a_canon(&receipt.to_xml()))?;
        if let Some(l) = &link {
            write_atomic(&tmp.join(LINK), &a_canon(&l.to_xml()))?;
        }
        let final_dir = self.dir.join(&doc_id);
        fs::rename(&tmp, &final_dir)?;
        self.records.insert(
            doc_id.clone(),
            DocRecord {
                doc,
                attrs,
                receipt: Some(receipt),
                revocation: None,
                countersigned: None,
            },
        );
        if let Some(l) = link {
            self.set_attrs(&l.doc_id, l.attrs)?;
            fs::remove_file(final_dir.join(LINK))?;
        }
        Ok(doc_id)
    }

    pub fn set_attrs(&mut self, doc_id: &str, attrs: AttributeSet) -> io::Result<()> {
        write_atomic(&self.dir.join(doc_id).join(ATTRS), &a_canon(&attrs.to_xml()))?;
        if let Some(r) = self.records.get_mut(doc_id) {
            r.attrs = attrs;
        }
        Ok(())
    }

    pub fn set_revocation(&mut self, doc_id: &str, rec: RevocationRecord) -> io::Result<()> {
        write_atomic(&self.dir.join(doc_id).join(REVOCATION), &a_canon(&rec.to_xml()))?;
        if let Some(r) = self.records.get_mut(doc_id) {
            r.revocation = Some(rec);
        }
        Ok(())
    }

    pub fn set_countersigned(&mut self, doc_id: &str, doc: EDoc) -> io::Result<()> {
        write_atomic(&self.dir.join(doc_id).join(COUNTERSIGNED), &doc.canonical_bytes())?;
        if let Some(r) = self.records.get_mut(doc_id) {
            r.countersigned = Some(doc);
        }
        Ok(())
    }
}
