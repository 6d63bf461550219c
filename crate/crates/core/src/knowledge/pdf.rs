use std::io::Read;

use flate2::read::ZlibDecoder;

use super::KnowledgeError;

/// Turns PDF bytes into plain text.
pub trait PdfExtractor: Send + Sync {
    fn extract(&self, bytes: &[u8]) -> Result<String, KnowledgeError>;
}

/// Minimal extractor: inflates content streams and collects the strings shown
/// by `Tj`, `TJ`, `'` and `"`. Handles simple single-byte-font documents;
/// CID fonts, encryption and object streams are out of reach.
#[derive(Debug, Clone, Copy, Default)]
pub struct BasicPdfExtractor;

impl PdfExtractor for BasicPdfExtractor {
    fn extract(&self, bytes: &[u8]) -> Result<String, KnowledgeError> {
        if !bytes.starts_with(b"%PDF") {
            return Err(KnowledgeError::PdfExtractionFailed("missing %PDF header".into()));
        }
        let mut text = String::new();
        for (dict, raw) in streams(bytes) {
            if is_binary_payload(dict) {
                continue;
            }
            let data = if contains(dict, b"/FlateDecode") {
                let mut out = Vec::new();
                if ZlibDecoder::new(raw).read_to_end(&mut out).is_err() {
                    continue;
                }
                out
            } else {
                raw.to_vec()
            };
            show_text(&data, &mut text);
        }
        let text = text.trim().to_string();
        if text.is_empty() {
            return Err(KnowledgeError::PdfExtractionFailed("no text found".into()));
        }
        Ok(text)
    }
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    find(hay, needle, 0).is_some()
}

fn find(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= hay.len() {
        return None;
    }
    hay[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

fn is_binary_payload(dict: &[u8]) -> bool {
    [&b"/Image"[..], b"/FontFile", b"/Length1", b"/XRef", b"/ObjStm"]
        .iter()
        .any(|k| contains(dict, k))
}

/// `(dictionary, raw stream bytes)` for every stream object.
fn streams(bytes: &[u8]) -> Vec<(&[u8], &[u8])> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(kw) = find(bytes, b"stream", pos) {
        // skip the "stream" inside "endstream"
        if kw >= 3 && &bytes[kw - 3..kw] == b"end" {
            pos = kw + 6;
            continue;
        }
        let mut start = kw + 6;
        if bytes.get(start) == Some(&b'\r') {
            start += 1;
        }
        if bytes.get(start) == Some(&b'\n') {
            start += 1;
        }
        let Some(end) = find(bytes, b"endstream", start) else { break };
        let dict_start = bytes[..kw]
            .windows(3)
            .rposition(|w| w == b"obj")
            .unwrap_or(0);
        let mut raw_end = end;
        while raw_end > start && matches!(bytes[raw_end - 1], b'\r' | b'\n') {
            raw_end -= 1;
        }
        out.push((&bytes[dict_start..kw], &bytes[start..raw_end]));
        pos = end + 9;
    }
    out
}

enum Token {
    Str(Vec<u8>),
    Num(f64),
    ArrayStart,
    ArrayEnd,
    Op(String),
}

fn tokens(data: &[u8]) -> Vec<Token> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < data.len() {
        let c = data[i];
        match c {
            b'(' => {
                let (s, next) = literal(data, i + 1);
                out.push(Token::Str(s));
                i = next;
            }
            b'<' if data.get(i + 1) == Some(&b'<') => i += 2,
            b'>' if data.get(i + 1) == Some(&b'>') => i += 2,
            b'<' => {
                let end = find(data, b">", i).unwrap_or(data.len());
                out.push(Token::Str(hex(&data[i + 1..end])));
                i = end + 1;
            }
            b'[' => {
                out.push(Token::ArrayStart);
                i += 1;
            }
            b']' => {
                out.push(Token::ArrayEnd);
                i += 1;
            }
            b'%' => {
                while i < data.len() && data[i] != b'\n' && data[i] != b'\r' {
                    i += 1;
                }
            }
            _ if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < data.len()
                    && !data[i].is_ascii_whitespace()
                    && !b"()<>[]{}/%".contains(&data[i])
                {
                    i += 1;
                }
                if i == start {
                    // a name or brace: skip the delimiter and the name body
                    i += 1;
                    while i < data.len()
                        && !data[i].is_ascii_whitespace()
                        && !b"()<>[]{}/%".contains(&data[i])
                    {
                        i += 1;
                    }
                    continue;
                }
                let word = String::from_utf8_lossy(&data[start..i]).into_owned();
                match word.parse::<f64>() {
                    Ok(n) => out.push(Token::Num(n)),
                    Err(_) => out.push(Token::Op(word)),
                }
            }
        }
    }
    out
}

fn literal(data: &[u8], mut i: usize) -> (Vec<u8>, usize) {
    let mut out = Vec::new();
    let mut depth = 1;
    while i < data.len() {
        let c = data[i];
        i += 1;
        match c {
            b'\\' => {
                let Some(&e) = data.get(i) else { break };
                i += 1;
                match e {
                    b'n' => out.push(b'\n'),
                    b'r' => out.push(b'\r'),
                    b't' => out.push(b'\t'),
                    b'b' => out.push(8),
                    b'f' => out.push(12),
                    b'\r' | b'\n' => {
                        if e == b'\r' && data.get(i) == Some(&b'\n') {
                            i += 1;
                        }
                    }
                    b'0'..=b'7' => {
                        let mut v = u32::from(e - b'0');
                        for _ in 0..2 {
                            match data.get(i) {
                                Some(&d @ b'0'..=b'7') => {
                                    v = v * 8 + u32::from(d - b'0');
                                    i += 1;
                                }
                                _ => break,
                            }
                        }
                        out.push((v & 0xff) as u8);
                    }
                    other => out.push(other),
                }
            }
            b'(' => {
                depth += 1;
                out.push(c);
            }
            b')' => {
                depth -= 1;
                if depth == 0 {
                    break;
                }
                out.push(c);
            }
            _ => out.push(c),
        }
    }
    (out, i)
}

fn hex(digits: &[u8]) -> Vec<u8> {
    let nibbles: Vec<u8> = digits
        .iter()
        .filter_map(|&d| (d as char).to_digit(16).map(|v| v as u8))
        .collect();
    nibbles
        .chunks(2)
        .map(|p| p[0] << 4 | p.get(1).copied().unwrap_or(0))
        .collect()
}

fn push_bytes(out: &mut String, bytes: &[u8]) {
    // single-byte fonts: treat codes as Latin-1
    out.extend(bytes.iter().map(|&b| b as char));
}

fn show_text(data: &[u8], out: &mut String) {
    let mut operands: Vec<Token> = Vec::new();
    let mut array: Option<Vec<Token>> = None;
    let newline = |out: &mut String| {
        if !out.is_empty() && !out.ends_with('\n') {
            out.push('\n');
        }
    };
    for tok in tokens(data) {
        match tok {
            Token::ArrayStart => array = Some(Vec::new()),
            Token::ArrayEnd => {
                if let Some(items) = array.take() {
                    operands.push(Token::Op(String::new()));
                    operands.extend(items);
                }
            }
            t if array.is_some() => array.as_mut().expect("array open").push(t),
            Token::Op(op) => {
                match op.as_str() {
                    "Tj" | "'" | "\"" => {
                        if op != "Tj" {
                            newline(out);
                        }
                        if let Some(Token::Str(s)) = operands.iter().rev().find(|t| matches!(t, Token::Str(_))) {
                            push_bytes(out, s);
                        }
                    }
                    "TJ" => {
                        for t in &operands {
                            match t {
                                Token::Str(s) => push_bytes(out, s),
                                Token::Num(n) if *n < -200.0 && !out.ends_with(' ') => out.push(' '),
                                _ => {}
                            }
                        }
                    }
                    "Td" | "TD" | "T*" | "Tm" | "ET" => newline(out),
                    _ => {}
                }
                operands.clear();
            }
            other => operands.push(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::ZlibEncoder;
    use flate2::Compression;
    use std::io::Write;

    fn pdf_with(content: &[u8], compress: bool) -> Vec<u8> {
        let (data, filter) = if compress {
            let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
            enc.write_all(content).unwrap();
            (enc.finish().unwrap(), " /Filter /FlateDecode")
        } else {
            (content.to_vec(), "")
        };
        let mut out = b"%PDF-1.4\n1 0 obj\n<< /Type /Catalog >>\nendobj\n4 0 obj\n".to_vec();
        out.extend(format!("<< /Length {}{} >>\nstream\n", data.len(), filter).bytes());
        out.extend(&data);
        out.extend(b"\nendstream\nendobj\n%%EOF\n");
        out
    }

    #[test]
    fn plain_and_compressed_streams() {
        let content = b"BT /F1 12 Tf 72 720 Td (Hello \\(PDF\\) world) Tj 0 -14 Td [(Pov) 10 (erty) -300 (line)] TJ ET";
        for compress in [false, true] {
            let text = BasicPdfExtractor.extract(&pdf_with(content, compress)).unwrap();
            assert_eq!(text, "Hello (PDF) world\nPoverty line");
        }
    }

    #[test]
    fn hex_and_octal_strings() {
        let content = b"BT <48692021> Tj T* (caf\\351) Tj ET";
        let text = BasicPdfExtractor.extract(&pdf_with(content, false)).unwrap();
        assert_eq!(text, "Hi !\ncaf\u{e9}");
    }

    #[test]
    fn fixture_file() {
        let bytes = include_bytes!("../../fixtures/poverty.pdf");
        let text = BasicPdfExtractor.extract(bytes).unwrap();
        assert!(text.contains("poverty"), "{text}");
        assert!(text.contains("Poverty in a rising Africa."));
    }

    #[test]
    fn failures() {
        assert!(matches!(
            BasicPdfExtractor.extract(b"not a pdf"),
            Err(KnowledgeError::PdfExtractionFailed(_))
        ));
        let empty = pdf_with(b"0 0 m 10 10 l S", false);
        assert!(matches!(
            BasicPdfExtractor.extract(&empty),
            Err(KnowledgeError::PdfExtractionFailed(_))
        ));
    }
}
