//! Inside/outside sidecar: one `<image-id> <0|1>` line per sample,
//! 1 = looking at something inside the frame.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::AttentionSample;
use crate::error::{Error, Result};

pub fn write_inout_annotations(samples: &[AttentionSample], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        let inside = s
            .inside
            .ok_or_else(|| Error::Input(format!("sample {} has no inside label", s.id)))?;
        writeln!(w, "{} {}", s.id, u8::from(inside)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_inout_annotations(path: &Path) -> Result<Vec<(String, bool)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(id), Some(flag), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(path, i + 1, format!("expected `<image-id> <0|1>`, got `{line}`")));
        };
        let inside = match flag {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(path, i + 1, format!("label must be 0 or 1, got `{other}`"))),
        };
        out.push((id.to_string(), inside));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_corpus, Domain, GeneratorConfig};

    #[test]
    fn line_format_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = GeneratorConfig::for_domain(Domain::GazeFollowLike, 4, 30);
        cfg.canvas_side = 16;
        let mut samples = generate_corpus(&cfg).unwrap();
        samples[0].id = "img_00042".into();
        samples[0].inside = Some(false);
        let p = dir.path().join("inout.txt");
        write_inout_annotations(&samples, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next(), Some("img_00042 0"));
        let back = read_inout_annotations(&p).unwrap();
        let want: Vec<(String, bool)> = samples.iter().map(|s| (s.id.clone(), s.inside.unwrap())).collect();
        assert_eq!(back, want);
    }

    #[test]
    fn malformed_lines_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("inout.txt");
        std::fs::write(&p, "a 1\nb 2\n").unwrap();
        assert!(matches!(read_inout_annotations(&p), Err(Error::Parse { line: 2, .. })));
        std::fs::write(&p, "a 1 extra\n").unwrap();
        assert!(matches!(read_inout_annotations(&p), Err(Error::Parse { line: 1, .. })));
    }
}
