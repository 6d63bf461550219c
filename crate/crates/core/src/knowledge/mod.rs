//! Grounding documents: ingestion, persistence and sentence segmentation.

mod pdf;
mod segment;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pdf::{BasicPdfExtractor, PdfExtractor};
pub use segment::{segment, segment_text, MAX_SEGMENT_CHARS};
pub use store::{KnowledgeStore, DATA_DIR_ENV};

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("file is empty")]
    EmptyFile,
    #[error("pdf text extraction failed: {0}")]
    PdfExtractionFailed(String),
    #[error("unsupported document format: {0}")]
    UnsupportedFormat(String),
    #[error("unknown document: {0}")]
    UnknownDocument(String),
    #[error("document store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt document index: {0}")]
    Index(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocFormat {
    Txt,
    Pdf,
}

impl DocFormat {
    pub fn extension(self) -> &'static str {
        match self {
            DocFormat::Txt => "txt",
            DocFormat::Pdf => "pdf",
        }
    }

    /// Guess from a file name's extension.
    pub fn from_path(path: &std::path::Path) -> Result<Self, KnowledgeError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default();
        ext.parse()
    }
}

impl FromStr for DocFormat {
    type Err = KnowledgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "txt" | "text" | "text/plain" => Ok(DocFormat::Txt),
            "pdf" | "application/pdf" => Ok(DocFormat::Pdf),
            other => Err(KnowledgeError::UnsupportedFormat(other.to_string())),
        }
    }
}

impl fmt::Display for DocFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

/// Listing entry: everything but the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMeta {
    /// Content hash of the uploaded bytes.
    pub id: String,
    pub title: String,
    pub format: DocFormat,
    pub byte_size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeDocument {
    pub id: String,
    pub title: String,
    pub format: DocFormat,
    pub text: String,
    pub byte_size: u64,
}

impl KnowledgeDocument {
    pub fn meta(&self) -> DocumentMeta {
        DocumentMeta {
            id: self.id.clone(),
            title: self.title.clone(),
            format: self.format,
            byte_size: self.byte_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSegment {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
    /// Byte offsets `[start, end)` into the document text; always on char
    /// boundaries, so `&doc.text[start..end] == text`.
    pub char_span: (usize, usize),
}

/// Stable identifier for a byte payload.
pub fn content_id(bytes: &[u8]) -> String {
    crate::hash::sha256_hex(bytes)[..16].to_string()
}

/// Extract plain text from an upload.
pub fn extract_text(
    bytes: &[u8],
    format: DocFormat,
    pdf: &dyn PdfExtractor,
) -> Result<String, KnowledgeError> {
    if bytes.is_empty() {
        return Err(KnowledgeError::EmptyFile);
    }
    let text = match format {
        DocFormat::Txt => String::from_utf8_lossy(bytes).into_owned(),
        DocFormat::Pdf => pdf.extract(bytes)?,
    };
    if text.trim().is_empty() {
        return Err(match format {
            DocFormat::Txt => KnowledgeError::EmptyFile,
            DocFormat::Pdf => KnowledgeError::PdfExtractionFailed("no text found".into()),
        });
    }
    Ok(text)
}

/// Cut `text` to at most `budget` chars. Returns whether anything was cut.
pub fn truncate_chars(text: &str, budget: usize) -> (&str, bool) {
    match text.char_indices().nth(budget) {
        Some((byte, _)) => (&text[..byte], true),
        None => (text, false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        assert_eq!("TXT".parse::<DocFormat>().unwrap(), DocFormat::Txt);
        assert_eq!("pdf".parse::<DocFormat>().unwrap(), DocFormat::Pdf);
        assert!(matches!(
            "docx".parse::<DocFormat>(),
            Err(KnowledgeError::UnsupportedFormat(_))
        ));
        assert_eq!(
            DocFormat::from_path(std::path::Path::new("a/b/001.txt")).unwrap(),
            DocFormat::Txt
        );
    }

    #[test]
    fn txt_extraction_is_lossy_utf8() {
        let pdf = BasicPdfExtractor;
        assert_eq!(extract_text(b"hello world", DocFormat::Txt, &pdf).unwrap(), "hello world");
        let t = extract_text(b"caf\xff!", DocFormat::Txt, &pdf).unwrap();
        assert_eq!(t, "caf\u{fffd}!");
        assert!(matches!(
            extract_text(b"", DocFormat::Txt, &pdf),
            Err(KnowledgeError::EmptyFile)
        ));
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_chars("héllo", 10), ("héllo", false));
        assert_eq!(truncate_chars("héllo", 2), ("hé", true));
        assert_eq!(truncate_chars("abc", 3), ("abc", false));
    }
}
