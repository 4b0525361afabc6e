use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::{Recording, SessionError};

/// CSV with `#`-prefixed metadata lines, then
/// `index,t_s,<montage labels>,marker`. Values use the shortest f32
/// representation so they parse back to the stored floats exactly.
pub fn write_csv<W: Write>(rec: &Recording, mut out: W) -> Result<(), SessionError> {
    let m = &rec.metadata;
    let io = |source| SessionError::Write {
        path: "<csv>".into(),
        source,
    };
    writeln!(out, "# session_id: {}", m.session_id).map_err(io)?;
    writeln!(out, "# started_at: {}", m.started_at.to_rfc3339()).map_err(io)?;
    writeln!(out, "# sample_rate: {}", m.config.sample_rate).map_err(io)?;
    writeln!(out, "# gain: {}", m.config.gain).map_err(io)?;
    writeln!(out, "# montage: {}", m.montage.labels().join(" ")).map_err(io)?;
    writeln!(out, "# electrode_type: {}", m.electrode_type).map_err(io)?;
    writeln!(
        out,
        "# operator_note: {}",
        m.operator_note.replace('\n', " ")
    )
    .map_err(io)?;
    writeln!(out, "# source: {}", m.source).map_err(io)?;

    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string(), "t_s".to_string()];
    header.extend(m.montage.labels().iter().cloned());
    header.push("marker".into());
    w.write_record(&header)?;

    let mut marks: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    for mk in &rec.markers {
        let label = if mk.text.is_empty() {
            mk.kind.as_str().to_string()
        } else {
            format!("{}:{}", mk.kind.as_str(), mk.text)
        };
        marks.entry(mk.sample).or_default().push(label);
    }
    let s = &rec.samples;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..s.len() {
        let index = s.start + i as u64;
        row.clear();
        row.push(index.to_string());
        row.push(format!("{:.6}", i as f64 / s.fs));
        for ch in &s.data {
            row.push((ch[i] as f32).to_string());
        }
        row.push(marks.get(&index).map(|v| v.join(";")).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn export_csv(rec: &Recording, path: impl AsRef<Path>) -> Result<(), SessionError> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|source| SessionError::Write {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(rec, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::DeviceConfig;
    use crate::session::SessionMetadata;
    use crate::signal::{Marker, MarkerKind, SignalChunk};

    #[test]
    fn layout() {
        let data = (0..8)
            .map(|ch| vec![ch as f64 + 0.5, -1.25, 1e-3])
            .collect();
        let rec = Recording {
            metadata: SessionMetadata::new(DeviceConfig::default()),
            samples: SignalChunk::from_channels(100, 250.0, data),
            markers: vec![Marker::new(101, MarkerKind::Blink, "")],
            damage: None,
        };
        let mut buf = Vec::new();
        write_csv(&rec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines[0], "index,t_s,F7,Fz,F8,C3,C4,T5,Pz,T6,marker");
        assert_eq!(lines[1], "100,0.000000,0.5,1.5,2.5,3.5,4.5,5.5,6.5,7.5,");
        assert_eq!(
            lines[2],
            "101,0.004000,-1.25,-1.25,-1.25,-1.25,-1.25,-1.25,-1.25,-1.25,blink"
        );
        assert_eq!(lines.len(), 4);
    }
}
