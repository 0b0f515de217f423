//! Line-delimited JSON persistence for raw records and processed corpora.
//!
//! Both file kinds start with a self-describing header line; the processed
//! corpus header carries the label vocabulary so that the per-token label ids
//! in the document lines stay meaningful. Serialization is deterministic and
//! round-trips byte-exactly.

use super::{Document, LabelVocabulary, RawRecord};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const RECORDS_FORMAT: &str = "medtok-records";
const CORPUS_FORMAT: &str = "medtok-corpus";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct RecordsHeader {
    format: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusHeader {
    format: String,
    version: u32,
    labels: Vec<String>,
}

/// A processed corpus: documents plus the vocabulary their label ids index.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFile {
    pub vocab: LabelVocabulary,
    pub documents: Vec<Document>,
}

pub fn write_raw_records<W: Write>(writer: W, records: &[RawRecord]) -> Result<()> {
    let mut writer = BufWriter::new(writer);
    let header = RecordsHeader {
        format: RECORDS_FORMAT.to_string(),
        version: VERSION,
    };
    serde_json::to_writer(&mut writer, &header).map_err(store_err)?;
    writer.write_all(b"\n")?;
    for record in records {
        serde_json::to_writer(&mut writer, record).map_err(store_err)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_raw_records<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut lines = BufReader::new(reader).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Store("missing header line".into()))??;
    let header: RecordsHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::Store(format!("bad records header: {e}")))?;
    if header.format != RECORDS_FORMAT || header.version != VERSION {
        return Err(Error::Store(format!(
            "expected {RECORDS_FORMAT} v{VERSION}, found {} v{}",
            header.format, header.version
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Store(format!("record line {}: {e}", i + 2)))?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_documents<W: Write>(writer: W, corpus: &CorpusFile) -> Result<()> {
    let mut writer = BufWriter::new(writer);
    let header = CorpusHeader {
        format: CORPUS_FORMAT.to_string(),
        version: VERSION,
        labels: corpus.vocab.names().to_vec(),
    };
    serde_json::to_writer(&mut writer, &header).map_err(store_err)?;
    writer.write_all(b"\n")?;
    for doc in &corpus.documents {
        serde_json::to_writer(&mut writer, doc).map_err(store_err)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_documents<R: Read>(reader: R) -> Result<CorpusFile> {
    let mut lines = BufReader::new(reader).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Store("missing header line".into()))??;
    let header: CorpusHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::Store(format!("bad corpus header: {e}")))?;
    if header.format != CORPUS_FORMAT || header.version != VERSION {
        return Err(Error::Store(format!(
            "expected {CORPUS_FORMAT} v{VERSION}, found {} v{}",
            header.format, header.version
        )));
    }
    let vocab = LabelVocabulary::from_names(header.labels)?;
    let mut documents = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::Store(format!("document line {}: {e}", i + 2)))?;
        doc.validate(vocab.len())?;
        documents.push(doc);
    }
    Ok(CorpusFile { vocab, documents })
}

/// Convenience wrappers over file paths.
pub fn write_documents_to(path: &Path, corpus: &CorpusFile) -> Result<()> {
    write_documents(std::fs::File::create(path)?, corpus)
}

pub fn read_documents_from(path: &Path) -> Result<CorpusFile> {
    read_documents(std::fs::File::open(path)?)
}

fn store_err(e: serde_json::Error) -> Error {
    Error::Store(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabelId;

    fn sample_corpus() -> CorpusFile {
        let mut vocab = LabelVocabulary::new();
        let pa = vocab.intern("Pulmonary Artery").unwrap();
        CorpusFile {
            vocab,
            documents: vec![
                Document {
                    source_id: 0,
                    tokens: vec!["Her".into(), "PA".into(), "pressures".into()],
                    token_labels: vec![LabelId::NA_WORD, pa, LabelId::NA_WORD],
                    abbrev_mask: vec![false, true, false],
                },
                Document {
                    source_id: 1,
                    tokens: vec!["PA".into()],
                    token_labels: vec![pa],
                    abbrev_mask: vec![true],
                },
            ],
        }
    }

    #[test]
    fn corpus_roundtrip_is_byte_exact() {
        let corpus = sample_corpus();
        let mut first = Vec::new();
        write_documents(&mut first, &corpus).unwrap();
        let reread = read_documents(first.as_slice()).unwrap();
        assert_eq!(reread, corpus);
        let mut second = Vec::new();
        write_documents(&mut second, &reread).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn records_roundtrip() {
        let records = vec![RawRecord {
            source_id: 3,
            text: "Her PA pressures".into(),
            locations: vec![1],
            labels: vec!["Pulmonary Artery".into()],
        }];
        let mut buf = Vec::new();
        write_raw_records(&mut buf, &records).unwrap();
        let reread = read_raw_records(buf.as_slice()).unwrap();
        assert_eq!(reread, records);
    }

    #[test]
    fn corpus_with_invalid_document_is_rejected() {
        let corpus = sample_corpus();
        let mut buf = Vec::new();
        write_documents(&mut buf, &corpus).unwrap();
        // Corrupt a label id beyond the vocabulary.
        let text = String::from_utf8(buf).unwrap().replace("[0,1,0]", "[0,9,0]");
        assert!(read_documents(text.as_bytes()).is_err());
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = read_documents("{\"format\":\"other\",\"version\":1,\"labels\":[\"NA_word\"]}\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, Error::Store(_)));
    }
}
