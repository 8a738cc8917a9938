use unicode_normalization::is_nfc;

use super::{
    is_forbidden_char, is_valid_name, is_whitespace_only, is_xml_whitespace, Construct, Element,
    XNode, XmlError,
};

const MAX_DEPTH: usize = 128;

/// Parses UTF-8 bytes in the strict subset into the root element.
pub fn parse(bytes: &[u8]) -> Result<Element, XmlError> {
    let s = std::str::from_utf8(bytes).map_err(|e| XmlError::MalformedXml {
        offset: e.valid_up_to(),
        message: "invalid UTF-8".into(),
    })?;
    parse_str(s)
}

pub fn parse_str(s: &str) -> Result<Element, XmlError> {
    if let Some((offset, ch)) = s.char_indices().find(|(_, c)| is_forbidden_char(*c)) {
        return Err(XmlError::ForbiddenChar { ch, offset });
    }
    if !is_nfc(s) {
        return Err(XmlError::NotNfc);
    }
    let mut p = Parser { src: s, pos: 0 };
    p.skip_ws();
    p.check_markup()?;
    let root = p.element(0)?;
    p.skip_ws();
    if p.pos < s.len() {
        p.check_markup()?;
        return Err(p.malformed("content after the root element"));
    }
    Ok(root)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn malformed(&self, message: impl Into<String>) -> XmlError {
        XmlError::MalformedXml {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        let trimmed = rest.trim_start_matches(is_xml_whitespace);
        self.pos += rest.len() - trimmed.len();
    }

    /// Rejects `<!--`, `<?`, `<![CDATA[` and `<!DOCTYPE` (or any other `<!`).
    fn check_markup(&self) -> Result<(), XmlError> {
        let rest = self.rest();
        let construct = if rest.starts_with("<!--") {
            Construct::Comment
        } else if rest.starts_with("<?") {
            Construct::ProcessingInstruction
        } else if rest.starts_with("<![CDATA[") {
            Construct::CData
        } else if rest.starts_with("<!") {
            Construct::Doctype
        } else {
            return Ok(());
        };
        Err(XmlError::ForbiddenConstruct {
            construct,
            offset: self.pos,
        })
    }

    fn expect(&mut self, token: &str) -> Result<(), XmlError> {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.malformed(format!("expected `{token}`")))
        }
    }

    fn name(&mut self) -> Result<&'a str, XmlError> {
        let rest = self.rest();
        let end = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | ':')))
            .unwrap_or(rest.len());
        let name = &rest[..end];
        if name.contains(':') {
            return Err(XmlError::ForbiddenConstruct {
                construct: Construct::Namespace,
                offset: self.pos,
            });
        }
        if !is_valid_name(name) {
            return Err(self.malformed("invalid name"));
        }
        self.pos += end;
        Ok(name)
    }

    fn element(&mut self, depth: usize) -> Result<Element, XmlError> {
        if depth > MAX_DEPTH {
            return Err(self.malformed("nesting too deep"));
        }
        self.expect("<")?;
        let name = self.name()?;
        let mut element = Element::new(name);
        loop {
            let before = self.pos;
            self.skip_ws();
            let rest = self.rest();
            if rest.starts_with("/>") {
                self.pos += 2;
                return Ok(element);
            }
            if rest.starts_with('>') {
                self.pos += 1;
                break;
            }
            if self.pos == before {
                return Err(self.malformed("expected whitespace before attribute"));
            }
            let attr_offset = self.pos;
            let attr = self.name()?;
            if attr == "xmlns" || attr.starts_with("xmlns.") {
                return Err(XmlError::ForbiddenConstruct {
                    construct: Construct::Namespace,
                    offset: attr_offset,
                });
            }
            self.skip_ws();
            self.expect("=")?;
            self.skip_ws();
            let value = self.attr_value()?;
            if element.get_attr(attr).is_some() {
                return Err(XmlError::MalformedXml {
                    offset: attr_offset,
                    message: format!("duplicate attribute `{attr}`"),
                });
            }
            element.attrs.push((attr.to_string(), value));
        }

        let mut text = String::new();
        loop {
            let rest = self.rest();
            if rest.is_empty() {
                return Err(self.malformed(format!("unclosed element `{name}`")));
            }
            if rest.starts_with("</") {
                flush_text(&mut element, &mut text);
                self.pos += 2;
                let close = self.name()?;
                if close != name {
                    return Err(self.malformed(format!(
                        "mismatched end tag `{close}`, expected `{name}`"
                    )));
                }
                self.skip_ws();
                self.expect(">")?;
                break;
            }
            if rest.starts_with('<') {
                self.check_markup()?;
                flush_text(&mut element, &mut text);
                let child = self.element(depth + 1)?;
                element.children.push(XNode::Element(child));
                continue;
            }
            if rest.starts_with('&') {
                text.push(self.entity()?);
                continue;
            }
            let end = rest.find(['<', '&']).unwrap_or(rest.len());
            text.push_str(&rest[..end]);
            self.pos += end;
        }
        if element.has_element_children() {
            element
                .children
                .retain(|c| !matches!(c, XNode::Text(t) if is_whitespace_only(t)));
        }
        Ok(element)
    }

    fn attr_value(&mut self) -> Result<String, XmlError> {
        let quote = match self.rest().chars().next() {
            Some(q @ ('"' | '\'')) => q,
            _ => return Err(self.malformed("expected quoted attribute value")),
        };
        self.pos += 1;
        let mut value = String::new();
        loop {
            let rest = self.rest();
            match rest.chars().next() {
                None => return Err(self.malformed("unterminated attribute value")),
                Some(c) if c == quote => {
                    self.pos += 1;
                    return Ok(value);
                }
                Some('<') => return Err(self.malformed("`<` in attribute value")),
                Some('&') => value.push(self.entity()?),
                Some(_) => {
                    let end = rest.find([quote, '<', '&']).unwrap_or(rest.len());
                    value.push_str(&rest[..end]);
                    self.pos += end;
                }
            }
        }
    }

    fn entity(&mut self) -> Result<char, XmlError> {
        let start = self.pos;
        let rest = self.rest();
        let end = rest
            .find(';')
            .filter(|&i| i <= 12)
            .ok_or_else(|| self.malformed("unterminated entity reference"))?;
        let body = &rest[1..end];
        let ch = match body {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" => '\'',
            _ => {
                let code = if let Some(hex) = body.strip_prefix("#x") {
                    u32::from_str_radix(hex, 16).ok()
                } else if let Some(dec) = body.strip_prefix('#') {
                    dec.parse::<u32>().ok()
                } else {
                    None
                };
                code.and_then(char::from_u32)
                    .ok_or_else(|| self.malformed(format!("unknown entity `&{body};`")))?
            }
        };
        if is_forbidden_char(ch) {
            return Err(XmlError::ForbiddenChar { ch, offset: start });
        }
        self.pos += end + 1;
        Ok(ch)
    }
}

fn flush_text(element: &mut Element, text: &mut String) {
    if !text.is_empty() {
        element.children.push(XNode::Text(std::mem::take(text)));
    }
}

/// Checks a value built outside the parser against the same character rules.
pub(crate) fn check_value(s: &str) -> Result<(), XmlError> {
    if let Some((offset, ch)) = s.char_indices().find(|(_, c)| is_forbidden_char(*c)) {
        return Err(XmlError::ForbiddenChar { ch, offset });
    }
    if !is_nfc(s) {
        return Err(XmlError::NotNfc);
    }
    Ok(())
}

/// Verifies that a programmatically built tree satisfies the node invariants.
pub fn check_tree(e: &Element) -> Result<(), XmlError> {
    let bad_name = |name: &str| XmlError::MalformedXml {
        offset: 0,
        message: format!("invalid name `{name}`"),
    };
    if !is_valid_name(&e.name) {
        return Err(bad_name(&e.name));
    }
    for (i, (name, value)) in e.attrs.iter().enumerate() {
        if !is_valid_name(name) {
            return Err(bad_name(name));
        }
        if e.attrs[..i].iter().any(|(n, _)| n == name) {
            return Err(XmlError::MalformedXml {
                offset: 0,
                message: format!("duplicate attribute `{name}`"),
            });
        }
        check_value(value)?;
    }
    for c in &e.children {
        match c {
            XNode::Element(child) => check_tree(child)?,
            XNode::Text(t) => check_value(t)?,
        }
    }
    Ok(())
}
