//! `SPANDICT v1` text format.
//!
//! ```text
//! SPANDICT v1 max_n=5 min_count=10
//! 1234\tof the
//! 987\tin the
//! ```
//!
//! Entries are written by descending count, then ascending key, with LF
//! line endings and no trailing whitespace.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::NgramDictionary;
use crate::error::{Error, Result};
use crate::text::normalize_token;

const MAGIC: &str = "SPANDICT";
const VERSION: &str = "v1";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(header: &str) -> Result<(usize, u64)> {
    let mut parts = header.split(' ');
    if parts.next() != Some(MAGIC) || parts.next() != Some(VERSION) {
        return Err(Error::Version {
            line: 1,
            found: header.chars().take(40).collect(),
        });
    }
    let mut field = |name: &str| -> Result<u64> {
        let part = parts
            .next()
            .ok_or_else(|| parse_err(1, format!("missing header field {name}")))?;
        part.strip_prefix(name)
            .and_then(|v| v.strip_prefix('='))
            .and_then(|v| v.parse::<u64>().ok())
            .ok_or_else(|| {
                parse_err(
                    1,
                    format!("bad header field {part:?}, expected {name}=<int>"),
                )
            })
    };
    let max_n = field("max_n")? as usize;
    let min_count = field("min_count")?;
    if parts.next().is_some() {
        return Err(parse_err(1, "trailing header fields"));
    }
    if max_n < 2 {
        return Err(parse_err(
            1,
            format!("max_n must be at least 2, got {max_n}"),
        ));
    }
    Ok((max_n, min_count))
}

impl NgramDictionary {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{MAGIC} {VERSION} max_n={} min_count={}",
            self.max_n, self.min_count
        )?;
        for (key, count) in self.sorted_entries() {
            writeln!(w, "{count}\t{key}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("dictionary text is UTF-8")
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(parse_err(1, "missing header")),
        };
        let (max_n, min_count) = parse_header(&header)?;
        let mut dict = NgramDictionary::empty(max_n, min_count);
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            let (count, key) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(line_no, "expected <count>\\t<n-gram>"))?;
            let count: u64 = count
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad count field {count:?}")))?;
            if count < min_count.max(1) {
                return Err(parse_err(
                    line_no,
                    format!("count {count} below min_count {min_count}"),
                ));
            }
            let tokens: Vec<&str> = key.split(' ').collect();
            if tokens.len() < 2 || tokens.len() > max_n {
                return Err(parse_err(
                    line_no,
                    format!("n-gram length {} outside [2, {max_n}]", tokens.len()),
                ));
            }
            if tokens.iter().any(|t| {
                t.is_empty() || t.contains(char::is_whitespace) || normalize_token(t) != *t
            }) {
                return Err(parse_err(
                    line_no,
                    format!("n-gram {key:?} is not normalized"),
                ));
            }
            if !dict.insert_raw(key.to_owned(), count) {
                return Err(parse_err(line_no, format!("duplicate n-gram {key:?}")));
            }
        }
        Ok(dict)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
        self.write_to(BufWriter::new(file))
            .map_err(|e| e.in_file(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        let dict = Self::read_from(BufReader::new(file)).map_err(|e| e.in_file(path))?;
        Ok(dict.with_fingerprint(format!("file:{}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_canonical_order() {
        let d =
            NgramDictionary::from_entries(3, 2, [("b c", 3), ("a b", 3), ("x y z", 9)]).unwrap();
        assert_eq!(
            d.to_text(),
            "SPANDICT v1 max_n=3 min_count=2\n9\tx y z\n3\ta b\n3\tb c\n"
        );
    }

    #[test]
    fn reads_hand_written_file() {
        let text = "SPANDICT v1 max_n=5 min_count=10\n40\tnew york\n12\tof the\n";
        let d = NgramDictionary::read_from(text.as_bytes()).unwrap();
        assert_eq!(d.size(), 2);
        assert_eq!(d.count(&["new", "york"]), Some(40));
        assert_eq!(d.count(&["of", "the"]), Some(12));
        assert_eq!(d.to_text(), text);
    }

    #[test]
    fn bad_count_names_line() {
        let text = "SPANDICT v1 max_n=5 min_count=1\n4\ta b\nfour\tc d\n";
        let err = NgramDictionary::read_from(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn version_mismatch() {
        let err =
            NgramDictionary::read_from("SPANDICT v2 max_n=5 min_count=1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Version { .. }));
        assert!(err.to_string().contains("version"));
        let err = NgramDictionary::read_from("hello\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Version { .. }));
    }

    #[test]
    fn rejects_invalid_entries() {
        for body in [
            "5\ta\n",
            "5\ta  b\n",
            "5\tA b\n",
            "5\ta b\n5\ta b\n",
            "0\ta b\n",
            "5 a b\n",
            "5\ta b \n",
        ] {
            let text = format!("SPANDICT v1 max_n=3 min_count=1\n{body}");
            assert!(
                NgramDictionary::read_from(text.as_bytes()).is_err(),
                "{body:?}"
            );
        }
    }

    #[test]
    fn empty_dictionary_roundtrip() {
        let d = NgramDictionary::empty(5, 10);
        let back = NgramDictionary::read_from(d.to_text().as_bytes()).unwrap();
        assert_eq!(back, d);
    }
}
