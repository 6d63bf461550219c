use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::{
    content_id, extract_text, BasicPdfExtractor, DocFormat, DocumentMeta, KnowledgeDocument,
    KnowledgeError, PdfExtractor,
};

/// Env var naming the data directory.
pub const DATA_DIR_ENV: &str = "PRAGMACHAT_DATA";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexEntry {
    id: String,
    title: String,
    format: DocFormat,
    /// Relative to the docs directory.
    path: String,
    byte_size: u64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    documents: Vec<IndexEntry>,
}

/// File-backed document store: `<data>/docs/<id>.<ext>` plus
/// `<data>/docs/index.json`.
pub struct KnowledgeStore {
    dir: PathBuf,
    pdf: Arc<dyn PdfExtractor>,
    index: RwLock<Vec<IndexEntry>>,
    texts: RwLock<HashMap<String, String>>,
}

impl std::fmt::Debug for KnowledgeStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnowledgeStore").field("dir", &self.dir).finish()
    }
}

impl KnowledgeStore {
    pub fn open(data_dir: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        Self::with_extractor(data_dir, Arc::new(BasicPdfExtractor))
    }

    pub fn with_extractor(
        data_dir: impl AsRef<Path>,
        pdf: Arc<dyn PdfExtractor>,
    ) -> Result<Self, KnowledgeError> {
        let dir = data_dir.as_ref().join("docs");
        fs::create_dir_all(&dir)?;
        let index_path = dir.join("index.json");
        let index: Index = if index_path.exists() {
            serde_json::from_slice(&fs::read(&index_path)?)?
        } else {
            Index::default()
        };
        Ok(KnowledgeStore {
            dir,
            pdf,
            index: RwLock::new(index.documents),
            texts: RwLock::new(HashMap::new()),
        })
    }

    pub fn docs_dir(&self) -> &Path {
        &self.dir
    }

    /// Store an upload. Identical bytes map to the same id and are not
    /// stored twice.
    pub fn ingest(
        &self,
        bytes: &[u8],
        format: DocFormat,
        title: &str,
    ) -> Result<KnowledgeDocument, KnowledgeError> {
        let text = extract_text(bytes, format, self.pdf.as_ref())?;
        let id = content_id(bytes);
        let mut index = self.index.write().expect("index lock poisoned");
        if let Some(existing) = index.iter().find(|e| e.id == id) {
            let doc = KnowledgeDocument {
                id: existing.id.clone(),
                title: existing.title.clone(),
                format: existing.format,
                text,
                byte_size: existing.byte_size,
            };
            self.cache(&doc);
            return Ok(doc);
        }
        let file = format!("{id}.{}", format.extension());
        fs::write(self.dir.join(&file), bytes)?;
        index.push(IndexEntry {
            id: id.clone(),
            title: title.to_string(),
            format,
            path: file,
            byte_size: bytes.len() as u64,
        });
        self.write_index(&index)?;
        let doc = KnowledgeDocument {
            id,
            title: title.to_string(),
            format,
            text,
            byte_size: bytes.len() as u64,
        };
        self.cache(&doc);
        Ok(doc)
    }

    fn cache(&self, doc: &KnowledgeDocument) {
        self.texts
            .write()
            .expect("text cache poisoned")
            .insert(doc.id.clone(), doc.text.clone());
    }

    fn write_index(&self, entries: &[IndexEntry]) -> Result<(), KnowledgeError> {
        let tmp = self.dir.join("index.json.tmp");
        let index = Index {
            documents: entries.to_vec(),
        };
        fs::write(&tmp, serde_json::to_vec_pretty(&index)?)?;
        fs::rename(tmp, self.dir.join("index.json"))?;
        Ok(())
    }

    /// Metadata of every document, ordered by title (then id).
    pub fn list_documents(&self) -> Vec<DocumentMeta> {
        let index = self.index.read().expect("index lock poisoned");
        let mut metas: Vec<DocumentMeta> = index
            .iter()
            .map(|e| DocumentMeta {
                id: e.id.clone(),
                title: e.title.clone(),
                format: e.format,
                byte_size: e.byte_size,
            })
            .collect();
        metas.sort_by(|a, b| a.title.cmp(&b.title).then_with(|| a.id.cmp(&b.id)));
        metas
    }

    pub fn get_document(&self, id: &str) -> Result<KnowledgeDocument, KnowledgeError> {
        let entry = {
            let index = self.index.read().expect("index lock poisoned");
            index
                .iter()
                .find(|e| e.id == id)
                .cloned()
                .ok_or_else(|| KnowledgeError::UnknownDocument(id.to_string()))?
        };
        let cached = self
            .texts
            .read()
            .expect("text cache poisoned")
            .get(id)
            .cloned();
        let text = match cached {
            Some(t) => t,
            None => {
                let bytes = fs::read(self.dir.join(&entry.path))?;
                let text = extract_text(&bytes, entry.format, self.pdf.as_ref())?;
                self.texts
                    .write()
                    .expect("text cache poisoned")
                    .insert(id.to_string(), text.clone());
                text
            }
        };
        Ok(KnowledgeDocument {
            id: entry.id,
            title: entry.title,
            format: entry.format,
            text,
            byte_size: entry.byte_size,
        })
    }

    /// Look a document up by id, falling back to an exact title match.
    pub fn resolve(&self, id_or_title: &str) -> Result<KnowledgeDocument, KnowledgeError> {
        match self.get_document(id_or_title) {
            Err(KnowledgeError::UnknownDocument(_)) => {
                let id = self
                    .list_documents()
                    .into_iter()
                    .find(|m| m.title == id_or_title)
                    .map(|m| m.id)
                    .ok_or_else(|| KnowledgeError::UnknownDocument(id_or_title.to_string()))?;
                self.get_document(&id)
            }
            other => other,
        }
    }
}
