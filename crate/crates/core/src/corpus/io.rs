//! Flat-file corpus exchange: one CSV row or JSONL object per exchange, with
//! the user's static traits repeated on every row.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BigFive, Corpus, Dialog, Exchange, Gender, ProactiveAct, UserProfile, UserRecord};
use crate::error::{Error, Result};

/// Column order of the corpus file schema.
pub const CORPUS_COLUMNS: [&str; 24] = [
    "user_id",
    "age",
    "gender",
    "technical_affinity",
    "trust_propensity",
    "domain_expertise",
    "openness",
    "conscientiousness",
    "extraversion",
    "agreeableness",
    "neuroticism",
    "dialog_id",
    "step",
    "complexity",
    "proactive_act",
    "game_score",
    "help_request",
    "suggestion_request",
    "duration",
    "difficulty",
    "trust",
    "competence",
    "reliability",
    "predictability",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guesses the format from a file extension; anything but `.jsonl`/`.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Csv,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CorpusFormat::Csv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusRow {
    user_id: String,
    age: u32,
    gender: Gender,
    technical_affinity: f64,
    trust_propensity: f64,
    domain_expertise: f64,
    openness: f64,
    conscientiousness: f64,
    extraversion: f64,
    agreeableness: f64,
    neuroticism: f64,
    dialog_id: String,
    step: u8,
    complexity: u8,
    proactive_act: ProactiveAct,
    game_score: f64,
    help_request: bool,
    suggestion_request: bool,
    duration: f64,
    difficulty: u8,
    trust: u8,
    competence: u8,
    reliability: u8,
    predictability: u8,
}

impl CorpusRow {
    fn new(user: &UserRecord, ex: &Exchange) -> Self {
        let p = &user.profile;
        CorpusRow {
            user_id: user.user_id.clone(),
            age: p.age,
            gender: p.gender,
            technical_affinity: p.technical_affinity,
            trust_propensity: p.trust_propensity,
            domain_expertise: p.domain_expertise,
            openness: p.big5.openness,
            conscientiousness: p.big5.conscientiousness,
            extraversion: p.big5.extraversion,
            agreeableness: p.big5.agreeableness,
            neuroticism: p.big5.neuroticism,
            dialog_id: ex.dialog_id.clone(),
            step: ex.step,
            complexity: ex.complexity,
            proactive_act: ex.proactive_act,
            game_score: ex.game_score,
            help_request: ex.help_request,
            suggestion_request: ex.suggestion_request,
            duration: ex.duration,
            difficulty: ex.difficulty,
            trust: ex.trust,
            competence: ex.competence,
            reliability: ex.reliability,
            predictability: ex.predictability,
        }
    }

    fn split(self) -> (UserRecord, Exchange) {
        let user = UserRecord {
            user_id: self.user_id,
            profile: UserProfile {
                age: self.age,
                gender: self.gender,
                technical_affinity: self.technical_affinity,
                trust_propensity: self.trust_propensity,
                domain_expertise: self.domain_expertise,
                big5: BigFive {
                    openness: self.openness,
                    conscientiousness: self.conscientiousness,
                    extraversion: self.extraversion,
                    agreeableness: self.agreeableness,
                    neuroticism: self.neuroticism,
                },
            },
        };
        let ex = Exchange {
            dialog_id: self.dialog_id,
            step: self.step,
            complexity: self.complexity,
            proactive_act: self.proactive_act,
            game_score: self.game_score,
            help_request: self.help_request,
            suggestion_request: self.suggestion_request,
            duration: self.duration,
            difficulty: self.difficulty,
            trust: self.trust,
            competence: self.competence,
            reliability: self.reliability,
            predictability: self.predictability,
        };
        (user, ex)
    }
}

/// Reads and validates a corpus file.
///
/// Rows may appear in any order; they are grouped by `user_id` (first
/// appearance order) and sorted by step within each dialog.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let rows = match format {
        CorpusFormat::Csv => read_csv_rows(path)?,
        CorpusFormat::Jsonl => read_jsonl_rows(path)?,
    };
    assemble(rows)
}

fn read_csv_rows(path: &Path) -> Result<Vec<CorpusRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    for col in CORPUS_COLUMNS {
        if !headers.iter().any(|h| h.trim() == col) {
            return Err(Error::MissingColumn(col.into()));
        }
    }
    reader
        .deserialize::<CorpusRow>()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Malformed {
                row: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}

fn read_jsonl_rows(path: &Path) -> Result<Vec<CorpusRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = rows.len() + 1;
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            row,
            detail: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::Malformed {
            row,
            detail: "expected a JSON object".into(),
        })?;
        if let Some(col) = CORPUS_COLUMNS.iter().find(|c| !obj.contains_key(**c)) {
            return Err(Error::MissingColumn((*col).into()));
        }
        rows.push(serde_json::from_value(value).map_err(|e| Error::Malformed {
            row,
            detail: e.to_string(),
        })?);
    }
    Ok(rows)
}

fn assemble(rows: Vec<CorpusRow>) -> Result<Corpus> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut dialogs: Vec<Dialog> = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        let row_no = i + 1;
        let (user, ex) = row.split();
        user.profile.validate(row_no)?;
        ex.validate(row_no)?;
        match index.get(&user.user_id) {
            Some(&d) => {
                let existing = &dialogs[d].user.profile;
                if let Some(field) = first_difference(existing, &user.profile) {
                    return Err(Error::InconsistentUser {
                        user_id: user.user_id,
                        field: field.into(),
                    });
                }
                dialogs[d].exchanges.push(ex);
            }
            None => {
                index.insert(user.user_id.clone(), dialogs.len());
                dialogs.push(Dialog {
                    user,
                    exchanges: vec![ex],
                });
            }
        }
    }
    for d in &mut dialogs {
        d.exchanges.sort_by_key(|e| e.step);
    }
    Corpus::new(dialogs)
}

fn first_difference(a: &UserProfile, b: &UserProfile) -> Option<&'static str> {
    if a.age != b.age {
        return Some("age");
    }
    if a.gender != b.gender {
        return Some("gender");
    }
    if a.technical_affinity != b.technical_affinity {
        return Some("technical_affinity");
    }
    if a.trust_propensity != b.trust_propensity {
        return Some("trust_propensity");
    }
    if a.domain_expertise != b.domain_expertise {
        return Some("domain_expertise");
    }
    BigFive::NAMES
        .into_iter()
        .zip(a.big5.to_array().into_iter().zip(b.big5.to_array()))
        .find(|(_, (x, y))| x != y)
        .map(|(name, _)| name)
}

/// Writes a corpus in the flat schema. Output is byte-deterministic.
pub fn save_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    let rows = corpus.exchanges().map(|(u, e)| CorpusRow::new(u, e));
    match format {
        CorpusFormat::Csv => {
            let mut writer = csv::Writer::from_path(path)?;
            for row in rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
        }
        CorpusFormat::Jsonl => {
            let mut out = BufWriter::new(File::create(path)?);
            for row in rows {
                serde_json::to_writer(&mut out, &row)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}
