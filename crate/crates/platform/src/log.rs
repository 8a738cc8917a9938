use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use edoc_core::time::{self, Timestamp};
use edoc_core::xml::{a_canon_string, parse_str, Element};

/// One line of the audit log. Every received message produces exactly one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub seq: u64,
    pub timestamp: Timestamp,
    /// Role key, or `-` when the sender was not authenticated.
    pub role: String,
    pub command: String,
    pub doc_id: Option<String>,
    pub outcome: String,
}

impl LogEntry {
    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("entry")
            .attr("seq", self.seq.to_string())
            .attr("timestamp", time::format(&self.timestamp))
            .attr("role", &self.role)
            .attr("command", &self.command)
            .attr("outcome", &self.outcome);
        if let Some(d) = &self.doc_id {
            e.set_attr("docId", d);
        }
        e
    }

    pub fn from_xml(e: &Element) -> Option<Self> {
        if e.name != "entry" {
            return None;
        }
        Some(LogEntry {
            seq: e.get_attr("seq")?.parse().ok()?,
            timestamp: time::parse(e.get_attr("timestamp")?)?,
            role: e.get_attr("role")?.to_string(),
            command: e.get_attr("command")?.to_string(),
            doc_id: e.get_attr("docId").map(str::to_string),
            outcome: e.get_attr("outcome")?.to_string(),
        })
    }
}

/// Append-only log, one canonical `<entry/>` per line.
pub struct AuditLog {
    file: File,
    entries: Vec<LogEntry>,
}

/// Result of reading an existing log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogCheck {
    pub entries: usize,
    /// Sequence numbers run 1, 2, 3, .. without gaps and every line parses.
    pub gapless: bool,
}

impl AuditLog {
    pub fn open(path: &Path) -> io::Result<(Self, LogCheck)> {
        let mut entries = Vec::new();
        let mut gapless = true;
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                match parse_str(&line).ok().as_ref().and_then(LogEntry::from_xml) {
                    Some(e) => {
                        if e.seq != entries.len() as u64 + 1 {
                            gapless = false;
                        }
                        entries.push(e);
                    }
                    None => gapless = false,
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let check = LogCheck {
            entries: entries.len(),
            gapless,
        };
        Ok((AuditLog { file, entries }, check))
    }

    pub fn next_seq(&self) -> u64 {
        self.entries.last().map_or(1, |e| e.seq + 1)
    }

    pub fn append(&mut self, mut entry: LogEntry) -> io::Result<u64> {
        entry.seq = self.next_seq();
        let mut line = a_canon_string(&entry.to_xml());
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        let seq = entry.seq;
        self.entries.push(entry);
        Ok(seq)
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    /// Entries with `from <= seq <= to`.
    pub fn range(&self, from: u64, to: Option<u64>) -> impl Iterator<Item = &LogEntry> {
        self.entries
            .iter()
            .filter(move |e| e.seq >= from && to.is_none_or(|t| e.seq <= t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(cmd: &str) -> LogEntry {
        LogEntry {
            seq: 0,
            timestamp: time::parse("2026-01-01T00:00:00Z").unwrap(),
            role: "-".into(),
            command: cmd.into(),
            doc_id: None,
            outcome: "OK".into(),
        }
    }

    #[test]
    fn append_reopen_and_gap_detection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.txt");
        {
            let (mut log, check) = AuditLog::open(&path).unwrap();
            assert_eq!(check, LogCheck { entries: 0, gapless: true });
            assert_eq!(log.append(entry("GetEdoc")).unwrap(), 1);
            assert_eq!(log.append(entry("SearchEdocs")).unwrap(), 2);
        }
        let (log, check) = AuditLog::open(&path).unwrap();
        assert_eq!(check, LogCheck { entries: 2, gapless: true });
        assert_eq!(log.range(2, None).count(), 1);

        let text = std::fs::read_to_string(&path).unwrap();
        let first_line_len = text.find('\n').unwrap() + 1;
        std::fs::write(&path, &text[first_line_len..]).unwrap();
        drop(log);
        let (_, check) = AuditLog::open(&path).unwrap();
        assert!(!check.gapless);
    }
}
