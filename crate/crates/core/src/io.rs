//! CSV readers and writers for frames and reference spectra.

use std::io::{Read, Write};

use crate::spectra::{ChannelMap, ReferenceSpectrum, SpectraError, SpectralFrame, NUM_CHANNELS};

fn csv_err(e: csv::Error) -> SpectraError {
    SpectraError::Parse(e.to_string())
}

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64, SpectraError> {
    field
        .trim()
        .parse()
        .map_err(|_| SpectraError::Parse(format!("line {line}, column {column}: {field:?}")))
}

fn parse_i64(field: &str, line: u64) -> Result<i64, SpectraError> {
    field
        .trim()
        .parse()
        .map_err(|_| SpectraError::Parse(format!("line {line}, column timestamp_ms: {field:?}")))
}

/// Header row of the frame CSV format.
pub fn frame_header(map: &ChannelMap) -> Vec<String> {
    std::iter::once("timestamp_ms".to_string())
        .chain((0..NUM_CHANNELS).map(|c| map.column_name(c)))
        .collect()
}

/// Writes `timestamp_ms,ch410,...,ch940` with a header row.
pub fn write_frames_csv<W: Write>(
    writer: W,
    frames: &[SpectralFrame],
    map: &ChannelMap,
) -> Result<(), SpectraError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(frame_header(map)).map_err(csv_err)?;
    let mut record = Vec::with_capacity(NUM_CHANNELS + 1);
    for f in frames {
        record.clear();
        record.push(f.timestamp_ms.to_string());
        record.extend(f.channels.iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| SpectraError::Parse(e.to_string()))
}

/// Streaming frame reader; the header must match `map` exactly.
pub struct FrameReader<R: Read> {
    inner: csv::Reader<R>,
    record: csv::StringRecord,
}

impl<R: Read> FrameReader<R> {
    pub fn new(reader: R, map: &ChannelMap) -> Result<Self, SpectraError> {
        let mut inner = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = inner.headers().map_err(csv_err)?;
        let expected = frame_header(map);
        if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
            let missing: Vec<&str> = expected
                .iter()
                .map(String::as_str)
                .filter(|e| !header.iter().any(|h| h == *e))
                .collect();
            return Err(SpectraError::ShapeMismatch(if missing.is_empty() {
                format!("frame header must be {}", expected.join(","))
            } else {
                format!("frame CSV is missing columns {}", missing.join(","))
            }));
        }
        Ok(Self {
            inner,
            record: csv::StringRecord::new(),
        })
    }

    /// Next frame, or `None` at end of input.
    pub fn next_frame(&mut self) -> Result<Option<SpectralFrame>, SpectraError> {
        if !self.inner.read_record(&mut self.record).map_err(csv_err)? {
            return Ok(None);
        }
        let line = self.record.position().map_or(0, |p| p.line());
        if self.record.len() != NUM_CHANNELS + 1 {
            return Err(SpectraError::ShapeMismatch(format!(
                "line {line}: expected {} fields, found {}",
                NUM_CHANNELS + 1,
                self.record.len()
            )));
        }
        let ts = parse_i64(&self.record[0], line)?;
        let mut channels = [0.0; NUM_CHANNELS];
        for (c, v) in channels.iter_mut().enumerate() {
            *v = parse_f64(&self.record[c + 1], line, &format!("{}", c + 1))?;
        }
        SpectralFrame::new(ts, channels).map(Some)
    }
}

/// Reads a whole frame CSV and checks strictly increasing timestamps.
pub fn read_frames_csv<R: Read>(reader: R, map: &ChannelMap) -> Result<Vec<SpectralFrame>, SpectraError> {
    let mut r = FrameReader::new(reader, map)?;
    let mut out: Vec<SpectralFrame> = Vec::new();
    while let Some(f) = r.next_frame()? {
        if out.last().is_some_and(|p| p.timestamp_ms >= f.timestamp_ms) {
            return Err(SpectraError::NonIncreasingTimestamps { index: out.len() });
        }
        out.push(f);
    }
    Ok(out)
}

/// Reference CSV: `timestamp_ms,<wavelength>,<wavelength>,...` with the
/// wavelengths in nanometres as header fields.
pub fn write_reference_csv<W: Write>(writer: W, reference: &ReferenceSpectrum) -> Result<(), SpectraError> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = std::iter::once("timestamp_ms".to_string())
        .chain(reference.wavelengths_nm.iter().map(|v| v.to_string()))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for (t, row) in reference.timestamps_ms.iter().zip(&reference.absorbance) {
        let record: Vec<String> = std::iter::once(t.to_string())
            .chain(row.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| SpectraError::Parse(e.to_string()))
}

pub fn read_reference_csv<R: Read>(reader: R) -> Result<ReferenceSpectrum, SpectraError> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.len() < 3 || &header[0] != "timestamp_ms" {
        return Err(SpectraError::ShapeMismatch(
            "reference header must be timestamp_ms followed by wavelengths".into(),
        ));
    }
    let wavelengths_nm = header
        .iter()
        .skip(1)
        .map(|h| parse_f64(h, 1, h))
        .collect::<Result<Vec<_>, _>>()?;
    let mut timestamps_ms = Vec::new();
    let mut absorbance = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        timestamps_ms.push(parse_i64(&rec[0], line)?);
        absorbance.push(
            rec.iter()
                .skip(1)
                .zip(&header.iter().skip(1).collect::<Vec<_>>())
                .map(|(v, h)| parse_f64(v, line, h))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    if timestamps_ms.is_empty() {
        return Err(SpectraError::EmptySeries);
    }
    Ok(ReferenceSpectrum {
        timestamps_ms,
        wavelengths_nm,
        absorbance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let frames: Vec<SpectralFrame> = (0..5)
            .map(|i| SpectralFrame::new(i * 1000, std::array::from_fn(|c| 0.1 + (i as f64) * 7.3 + c as f64 / 3.0)).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_frames_csv(&mut buf, &frames, &ChannelMap::default()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp_ms,ch410,ch435,ch460,"));
        assert!(text.lines().next().unwrap().ends_with(",ch900,ch940"));
        let back = read_frames_csv(buf.as_slice(), &ChannelMap::default()).unwrap();
        assert_eq!(back, frames);
    }

    #[test]
    fn missing_column_is_shape_mismatch() {
        let header = frame_header(&ChannelMap::default());
        let text = format!("{}\n", header[..NUM_CHANNELS].join(","));
        match read_frames_csv(text.as_bytes(), &ChannelMap::default()) {
            Err(SpectraError::ShapeMismatch(msg)) => assert!(msg.contains("ch940")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_rows() {
        let header = frame_header(&ChannelMap::default()).join(",");
        let ones = vec!["1"; NUM_CHANNELS].join(",");
        let text = format!("{header}\n0,{ones}\n0,{ones}\n");
        assert!(matches!(
            read_frames_csv(text.as_bytes(), &ChannelMap::default()),
            Err(SpectraError::NonIncreasingTimestamps { index: 1 })
        ));
        let text = format!("{header}\n0,x{ones}\n");
        assert!(matches!(
            read_frames_csv(text.as_bytes(), &ChannelMap::default()),
            Err(SpectraError::Parse(_))
        ));
        let neg = format!("-1,{}", vec!["1"; NUM_CHANNELS - 1].join(","));
        let text = format!("{header}\n0,{neg}\n");
        assert!(matches!(
            read_frames_csv(text.as_bytes(), &ChannelMap::default()),
            Err(SpectraError::InvalidIntensity { .. })
        ));
    }

    #[test]
    fn reference_round_trip() {
        let reference = ReferenceSpectrum {
            timestamps_ms: vec![0, 1000],
            wavelengths_nm: vec![400.0, 402.5, 950.0],
            absorbance: vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]],
        };
        let mut buf = Vec::new();
        write_reference_csv(&mut buf, &reference).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("timestamp_ms,400,402.5,950\n"));
        assert_eq!(read_reference_csv(buf.as_slice()).unwrap(), reference);
    }
}
