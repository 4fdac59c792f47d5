//! Video container I/O: the "BVR1" raw grayscale format, portable-graymap
//! sequence import, and clip slicing.
//!
//! BVR1 layout: magic "BVR1" | width u32 LE | height u32 LE | frame_count
//! u32 LE | bit_depth u8 (8 or 16) | fps f32 LE | 3 reserved zero bytes;
//! payload is frames in order, row-major, 16-bit samples stored LE. The
//! format is lossless: PPG amplitudes are a fraction of a percent of DC and
//! would not survive lossy coding.

use crate::error::{Error, Result};
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"BVR1";
const HEADER_LEN: usize = 24;

/// Sample depth of a frame. 16-bit exists for headroom on low-amplitude
/// pulsatility even though synthetic data is typically 8-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u8 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::Eight => u8::MAX as u16,
            BitDepth::Sixteen => u16::MAX,
        }
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            8 => Some(BitDepth::Eight),
            16 => Some(BitDepth::Sixteen),
            _ => None,
        }
    }
}

/// A single grayscale frame, row-major intensities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    bit_depth: BitDepth,
    pixels: Vec<u16>,
}

impl Frame {
    pub fn new(width: u32, height: u32, bit_depth: BitDepth, pixels: Vec<u16>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::Config(format!(
                "frame pixel count {} does not match {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        if bit_depth == BitDepth::Eight {
            if let Some(p) = pixels.iter().find(|&&p| p > 0xFF) {
                return Err(Error::Config(format!(
                    "pixel value {p} exceeds 8-bit range"
                )));
            }
        }
        Ok(Frame {
            width,
            height,
            bit_depth,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    /// Pixels as a real-valued plane for DSP stages.
    pub fn to_plane(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Quantize a real-valued plane back to a frame: round-to-nearest with
    /// clamping to the depth's range. Quantization happens exactly once per
    /// processing chain so sub-LSB amplitudes survive intermediate math.
    pub fn from_plane(width: u32, height: u32, bit_depth: BitDepth, plane: &[f64]) -> Result<Self> {
        let max = bit_depth.max_value() as f64;
        let pixels = plane
            .iter()
            .map(|&v| v.round().clamp(0.0, max) as u16)
            .collect();
        Frame::new(width, height, bit_depth, pixels)
    }
}

/// An ordered frame sequence with a sample rate and a free-form condition
/// tag. The tag is carried in corpus manifests, not in the container bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    pub frames: Vec<Frame>,
    pub fps: f32,
    pub label: String,
}

impl VideoClip {
    pub fn new(frames: Vec<Frame>, fps: f32, label: impl Into<String>) -> Result<Self> {
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(Error::Config(format!("fps must be positive, got {fps}")));
        }
        if let Some(first) = frames.first() {
            for (i, f) in frames.iter().enumerate() {
                if f.width != first.width || f.height != first.height {
                    return Err(Error::Config(format!(
                        "frame {} is {}x{}, expected {}x{}",
                        i, f.width, f.height, first.width, first.height
                    )));
                }
                if f.bit_depth != first.bit_depth {
                    return Err(Error::Config(format!(
                        "frame {} bit depth {} differs from {}",
                        i,
                        f.bit_depth.bits(),
                        first.bit_depth.bits()
                    )));
                }
            }
        }
        Ok(VideoClip {
            frames,
            fps,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.frames.first().map_or(0, |f| f.width)
    }

    pub fn height(&self) -> u32 {
        self.frames.first().map_or(0, |f| f.height)
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.frames.first().map_or(BitDepth::Eight, |f| f.bit_depth)
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps as f64
    }
}

/// Copy a frame range out of a clip; fps is preserved, the label carries over.
pub fn slice(clip: &VideoClip, start_frame: usize, len: usize) -> Result<VideoClip> {
    let end = start_frame
        .checked_add(len)
        .ok_or_else(|| Error::Bounds("slice range overflows".into()))?;
    if end > clip.frames.len() {
        return Err(Error::Bounds(format!(
            "slice [{start_frame}, {end}) exceeds clip length {}",
            clip.frames.len()
        )));
    }
    Ok(VideoClip {
        frames: clip.frames[start_frame..end].to_vec(),
        fps: clip.fps,
        label: clip.label.clone(),
    })
}

/// Write a clip in the BVR1 container. Bytes are deterministic for identical
/// input; the file appears atomically (temp + rename).
pub fn write_clip(clip: &VideoClip, path: &Path) -> Result<()> {
    // Re-validate invariants before touching the filesystem.
    let validated = VideoClip::new(clip.frames.clone(), clip.fps, clip.label.clone())?;
    if validated.frames.len() > u32::MAX as usize {
        return Err(Error::Config("too many frames for container".into()));
    }

    let tmp = temp_sibling(path);
    let result = (|| -> Result<()> {
        let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(&tmp, e);

        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&validated.width().to_le_bytes()).map_err(io)?;
        w.write_all(&validated.height().to_le_bytes()).map_err(io)?;
        w.write_all(&(validated.frames.len() as u32).to_le_bytes())
            .map_err(io)?;
        w.write_all(&[validated.bit_depth().bits()]).map_err(io)?;
        w.write_all(&validated.fps.to_le_bytes()).map_err(io)?;
        w.write_all(&[0u8; 3]).map_err(io)?;

        match validated.bit_depth() {
            BitDepth::Eight => {
                for frame in &validated.frames {
                    let bytes: Vec<u8> = frame.pixels.iter().map(|&p| p as u8).collect();
                    w.write_all(&bytes).map_err(io)?;
                }
            }
            BitDepth::Sixteen => {
                for frame in &validated.frames {
                    let mut bytes = Vec::with_capacity(frame.pixels.len() * 2);
                    for &p in &frame.pixels {
                        bytes.extend_from_slice(&p.to_le_bytes());
                    }
                    w.write_all(&bytes).map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)?;
        Ok(())
    })();

    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Read a BVR1 clip. The label is not part of the container and comes back
/// empty.
pub fn read_clip(path: &Path) -> Result<VideoClip> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header).map_err(|_| Error::Format {
        path: path.to_path_buf(),
        detail: "file shorter than header".into(),
    })?;

    if &header[0..4] != MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("bad magic {:02x?}", &header[0..4]),
        });
    }
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let frame_count = u32::from_le_bytes(header[12..16].try_into().unwrap());
    let bit_depth = BitDepth::from_bits(header[16]).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        detail: format!("bit depth {} not in {{8, 16}}", header[16]),
    })?;
    let fps = f32::from_le_bytes(header[17..21].try_into().unwrap());
    if header[21..24] != [0, 0, 0] {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: "reserved header bytes not zero".into(),
        });
    }
    if !(fps > 0.0) || !fps.is_finite() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("fps {fps} not positive"),
        });
    }
    if width == 0 || height == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("degenerate dimensions {width}x{height}"),
        });
    }

    let n_pixels = width as usize * height as usize;
    let bytes_per_frame = match bit_depth {
        BitDepth::Eight => n_pixels,
        BitDepth::Sixteen => n_pixels * 2,
    };

    let mut frames = Vec::with_capacity(frame_count as usize);
    let mut buf = vec![0u8; bytes_per_frame];
    for idx in 0..frame_count {
        r.read_exact(&mut buf).map_err(|_| Error::Truncated {
            path: path.to_path_buf(),
            frame: idx,
            expected: frame_count,
        })?;
        let pixels: Vec<u16> = match bit_depth {
            BitDepth::Eight => buf.iter().map(|&b| b as u16).collect(),
            BitDepth::Sixteen => buf
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        };
        frames.push(Frame::new(width, height, bit_depth, pixels)?);
    }

    VideoClip::new(frames, fps, "")
}

/// Import a directory of binary portable graymaps (P5) as one clip. Files
/// are ordered by the last run of digits in the file stem, so `frame_2.pgm`
/// sorts before `frame_10.pgm`.
pub fn read_pgm_dir(dir: &Path, fps: f32) -> Result<VideoClip> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(Option<u64>, String, std::path::PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        files.push((trailing_number(&stem), stem, path));
    }
    if files.is_empty() {
        return Err(Error::Format {
            path: dir.to_path_buf(),
            detail: "no .pgm files in directory".into(),
        });
    }
    files.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let mut frames = Vec::with_capacity(files.len());
    for (_, _, path) in &files {
        frames.push(read_pgm(path)?);
    }
    VideoClip::new(frames, fps, "")
}

/// Next whitespace-delimited header token, skipping '#' comment lines.
fn pgm_token(data: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return None;
    }
    Some(String::from_utf8_lossy(&data[start..*pos]).into_owned())
}

fn trailing_number(stem: &str) -> Option<u64> {
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.chars().rev().collect::<String>().parse().ok()
}

/// Read one binary PGM (P5). Samples above 255 maxval are big-endian u16
/// per the netpbm convention.
pub fn read_pgm(path: &Path) -> Result<Frame> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |detail: String| Error::Format {
        path: path.to_path_buf(),
        detail,
    };

    let mut pos = 0usize;

    if pgm_token(&data, &mut pos).ok_or_else(|| fmt("unexpected end of header".into()))? != "P5" {
        return Err(fmt("not a binary graymap (P5)".into()));
    }
    let mut field = |name: &str| -> Result<u32> {
        pgm_token(&data, &mut pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| fmt(format!("bad {name}")))
    };
    let width = field("width")?;
    let height = field("height")?;
    let maxval = field("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(fmt(format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates header from raster
    pos += 1;

    let n = width as usize * height as usize;
    let (depth, need) = if maxval < 256 {
        (BitDepth::Eight, n)
    } else {
        (BitDepth::Sixteen, n * 2)
    };
    let raster = data
        .get(pos..pos + need)
        .ok_or_else(|| fmt("raster shorter than declared dimensions".into()))?;
    let pixels: Vec<u16> = match depth {
        BitDepth::Eight => raster.iter().map(|&b| b as u16).collect(),
        BitDepth::Sixteen => raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect(),
    };
    Frame::new(width, height, depth, pixels)
}

/// Temp-file path next to the target so the final rename stays on one
/// filesystem.
pub(crate) fn temp_sibling(path: &Path) -> std::path::PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "out".into());
    name.push(&format!(".tmp.{}", std::process::id()));
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip_2x2(depth: BitDepth) -> VideoClip {
        let f = Frame::new(2, 2, depth, vec![0, 1, 2, 3]).unwrap();
        VideoClip::new(vec![f], 20.0, "").unwrap()
    }

    #[test]
    fn minimal_container_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bvr");
        let clip = clip_2x2(BitDepth::Eight);
        write_clip(&clip, &path).unwrap();
        let back = read_clip(&path).unwrap();
        assert_eq!(back.frames[0].pixels(), &[0, 1, 2, 3]);
        assert_eq!(back, clip);
    }

    #[test]
    fn one_frame_8bit_2x2_is_header_plus_4_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bvr");
        write_clip(&clip_2x2(BitDepth::Eight), &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), HEADER_LEN as u64 + 4);
    }

    #[test]
    fn write_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bvr");
        let b = dir.path().join("b.bvr");
        let clip = clip_2x2(BitDepth::Sixteen);
        write_clip(&clip, &a).unwrap();
        write_clip(&clip, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn mixed_frame_sizes_rejected_before_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bvr");
        let f1 = Frame::new(2, 2, BitDepth::Eight, vec![0; 4]).unwrap();
        let f2 = Frame::new(3, 2, BitDepth::Eight, vec![0; 6]).unwrap();
        let bad = VideoClip {
            frames: vec![f1, f2],
            fps: 20.0,
            label: String::new(),
        };
        assert!(matches!(write_clip(&bad, &path), Err(Error::Config(_))));
        assert!(!path.exists());
    }

    #[test]
    fn truncated_payload_names_missing_frame() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bvr");
        let frames: Vec<Frame> = (0..10)
            .map(|i| Frame::new(2, 2, BitDepth::Eight, vec![i; 4]).unwrap())
            .collect();
        write_clip(&VideoClip::new(frames, 20.0, "").unwrap(), &path).unwrap();
        // drop the last frame's bytes
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        match read_clip(&path) {
            Err(Error::Truncated {
                frame, expected, ..
            }) => {
                assert_eq!(frame, 9);
                assert_eq!(expected, 10);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bvr");
        write_clip(&clip_2x2(BitDepth::Eight), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_clip(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn slice_identity_empty_and_bounds() {
        let frames: Vec<Frame> = (0..6)
            .map(|i| Frame::new(2, 2, BitDepth::Eight, vec![i; 4]).unwrap())
            .collect();
        let clip = VideoClip::new(frames, 25.0, "tag").unwrap();

        let all = slice(&clip, 0, clip.len()).unwrap();
        assert_eq!(all, clip);

        let empty = slice(&clip, 5, 0).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.fps, 25.0);

        assert!(matches!(
            slice(&clip, clip.len() - 1, 2),
            Err(Error::Bounds(_))
        ));
    }

    #[test]
    fn eight_bit_range_enforced() {
        assert!(Frame::new(1, 1, BitDepth::Eight, vec![256]).is_err());
        assert!(Frame::new(1, 1, BitDepth::Sixteen, vec![65535]).is_ok());
    }

    #[test]
    fn pgm_roundtrip_8_and_16() {
        let dir = tempfile::tempdir().unwrap();
        // 8-bit with a comment line
        let p8 = dir.path().join("img_1.pgm");
        fs::write(&p8, b"P5\n# test\n2 2\n255\n\x00\x01\x02\x03").unwrap();
        let f8 = read_pgm(&p8).unwrap();
        assert_eq!(f8.pixels(), &[0, 1, 2, 3]);
        assert_eq!(f8.bit_depth(), BitDepth::Eight);
        // 16-bit big-endian
        let p16 = dir.path().join("img_2.pgm");
        fs::write(&p16, b"P5\n2 1\n65535\n\x01\x00\x00\xff").unwrap();
        let f16 = read_pgm(&p16).unwrap();
        assert_eq!(f16.pixels(), &[256, 255]);
        assert_eq!(f16.bit_depth(), BitDepth::Sixteen);
    }

    #[test]
    fn pgm_dir_orders_numerically() {
        let dir = tempfile::tempdir().unwrap();
        for (i, name) in [(2u8, "f_2.pgm"), (10, "f_10.pgm"), (1, "f_1.pgm")] {
            fs::write(dir.path().join(name), [b"P5\n1 1\n255\n".as_ref(), &[i]].concat()).unwrap();
        }
        let clip = read_pgm_dir(dir.path(), 20.0).unwrap();
        let order: Vec<u16> = clip.frames.iter().map(|f| f.pixels()[0]).collect();
        assert_eq!(order, vec![1, 2, 10]);
    }
}
