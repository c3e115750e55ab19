use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Label;
use crate::error::{Error, Result};

/// One line of a dataset protocol file:
/// `speaker utt_id placeholder attack-or-dash key`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolEntry {
    pub speaker_id: String,
    pub utt_id: String,
    pub attack_id: Option<String>,
    pub label: Label,
}

pub fn parse_protocol<R: BufRead>(reader: R) -> Result<Vec<ProtocolEntry>> {
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("field count: expected 5, found {}", fields.len()),
            });
        }
        let label = match fields[4] {
            "bonafide" => Label::Bonafide,
            "spoof" => Label::Spoof,
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unknown key {other:?}"),
                })
            }
        };
        let attack_id = match fields[3] {
            "-" => None,
            a => Some(a.to_string()),
        };
        if attack_id.is_none() != (label == Label::Bonafide) {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "attack field {:?} inconsistent with key {:?}",
                    fields[3], fields[4]
                ),
            });
        }
        entries.push(ProtocolEntry {
            speaker_id: fields[0].to_string(),
            utt_id: fields[1].to_string(),
            attack_id,
            label,
        });
    }
    Ok(entries)
}

pub fn parse_protocol_file(path: &Path) -> Result<Vec<ProtocolEntry>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput {
            path: path.to_path_buf(),
        },
        _ => Error::Io(e),
    })?;
    parse_protocol(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<ProtocolEntry>> {
        parse_protocol(text.as_bytes())
    }

    #[test]
    fn bonafide_line() {
        let e = parse("LA_0079 LA_T_1138215 - - bonafide").unwrap();
        assert_eq!(
            e,
            vec![ProtocolEntry {
                speaker_id: "LA_0079".into(),
                utt_id: "LA_T_1138215".into(),
                attack_id: None,
                label: Label::Bonafide,
            }]
        );
    }

    #[test]
    fn spoof_line() {
        let e = parse("LA_0081 LA_T_1007571 - A01 spoof").unwrap();
        assert_eq!(e[0].utt_id, "LA_T_1007571");
        assert_eq!(e[0].attack_id.as_deref(), Some("A01"));
        assert_eq!(e[0].label, Label::Spoof);
    }

    #[test]
    fn wrong_field_count() {
        match parse("LA_0081 LA_T_1007571 spoof") {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 1);
                assert!(message.contains("field count"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line_number() {
        let text = "LA_0079 LA_T_1 - - bonafide\n\nLA_0079 LA_T_2 - A02 fake\n";
        match parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn spoof_without_attack_is_rejected() {
        assert!(parse("LA_0079 LA_T_1 - - spoof").is_err());
        assert!(parse("LA_0079 LA_T_1 - A03 bonafide").is_err());
    }

    #[test]
    fn blank_lines_skipped() {
        let e = parse("\nLA_0079 LA_T_1 - - bonafide\n   \nLA_0080 LA_T_2 - A04 spoof\n").unwrap();
        assert_eq!(e.len(), 2);
    }
}
