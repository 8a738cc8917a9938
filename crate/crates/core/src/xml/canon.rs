use super::{is_whitespace_only, Element, XNode};

/// Canonical serialization.
///
/// Attributes are sorted by code point, whitespace-only text among element
/// siblings is dropped, `&<>"` are escaped, empty elements are written as a
/// start/end pair and there is no XML declaration.
pub fn a_canon(node: &Element) -> Vec<u8> {
    a_canon_string(node).into_bytes()
}

pub fn a_canon_string(node: &Element) -> String {
    let mut out = String::new();
    write_element(node, &mut out);
    out
}

fn write_element(e: &Element, out: &mut String) {
    out.push('<');
    out.push_str(&e.name);
    let mut attrs: Vec<&(String, String)> = e.attrs.iter().collect();
    attrs.sort_by(|a, b| a.0.cmp(&b.0));
    for (name, value) in attrs {
        out.push(' ');
        out.push_str(name);
        out.push_str("=\"");
        escape_into(value, out);
        out.push('"');
    }
    out.push('>');
    let element_content = e.has_element_children();
    for child in &e.children {
        match child {
            XNode::Element(c) => write_element(c, out),
            XNode::Text(t) => {
                if element_content && is_whitespace_only(t) {
                    continue;
                }
                escape_into(t, out);
            }
        }
    }
    out.push_str("</");
    out.push_str(&e.name);
    out.push('>');
}

fn escape_into(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}
