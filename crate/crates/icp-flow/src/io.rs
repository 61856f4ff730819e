//! Bit-exact file formats: binary scans / flows / labels, text poses, and
//! the evaluation report in both table and key-value form.
//!
//! Binary layouts are little-endian. Scans ("ICPF", version 1) and flows
//! ("ICFF", version 1) share one layout: 4 magic bytes, u32 version,
//! u64 count, f64 timestamp, then count × 3 IEEE-754 f32 values row-major.
//! Labels ("ICLB", version 1) carry one byte per point, 0 = background,
//! 1 = foreground.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix4, Point3, Vector3};

use crate::error::{Error, Result};
use crate::eval::{CategoryMetrics, CategoryReport, EvalReport, CATEGORIES};
use crate::flow::FlowField;
use crate::geometry::{PointCloud, RigidTransform};
use crate::synth::SceneSample;

const SCAN_MAGIC: &[u8; 4] = b"ICPF";
const FLOW_MAGIC: &[u8; 4] = b"ICFF";
const LABEL_MAGIC: &[u8; 4] = b"ICLB";
const VERSION: u32 = 1;

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedFile {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn encode_triples(magic: &[u8; 4], timestamp: f64, triples: &[[f32; 3]]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(4 + 4 + 8 + 8 + triples.len() * 12);
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(triples.len() as u64).to_le_bytes());
    buf.extend_from_slice(&timestamp.to_le_bytes());
    for t in triples {
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

fn decode_triples(path: &Path, magic: &[u8; 4], data: &[u8]) -> Result<(f64, Vec<[f32; 3]>)> {
    if data.len() < 24 {
        return Err(malformed(path, "truncated header"));
    }
    if &data[0..4] != magic {
        return Err(malformed(
            path,
            format!("bad magic, expected {:?}", std::str::from_utf8(magic).unwrap()),
        ));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(malformed(path, format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(data[8..16].try_into().unwrap()) as usize;
    let timestamp = f64::from_le_bytes(data[16..24].try_into().unwrap());
    if !timestamp.is_finite() {
        return Err(malformed(path, "non-finite timestamp"));
    }
    let expected = 24 + count * 12;
    if data.len() != expected {
        return Err(malformed(
            path,
            format!("expected {expected} bytes for {count} points, got {}", data.len()),
        ));
    }
    let mut triples = Vec::with_capacity(count);
    for i in 0..count {
        let off = 24 + i * 12;
        let mut t = [0.0f32; 3];
        for (d, v) in t.iter_mut().enumerate() {
            *v = f32::from_le_bytes(data[off + d * 4..off + d * 4 + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(malformed(path, format!("non-finite value at point {i}")));
            }
        }
        triples.push(t);
    }
    Ok((timestamp, triples))
}

pub fn write_scan(path: &Path, scan: &PointCloud) -> Result<()> {
    let triples: Vec<[f32; 3]> = scan
        .iter()
        .map(|p| [p.x as f32, p.y as f32, p.z as f32])
        .collect();
    fs::write(path, encode_triples(SCAN_MAGIC, scan.timestamp, &triples))?;
    Ok(())
}

pub fn read_scan(path: &Path) -> Result<PointCloud> {
    let data = fs::read(path)?;
    let (timestamp, triples) = decode_triples(path, SCAN_MAGIC, &data)?;
    Ok(PointCloud::new(
        triples
            .iter()
            .map(|t| Point3::new(t[0] as f64, t[1] as f64, t[2] as f64))
            .collect(),
        timestamp,
    ))
}

pub fn write_flow(path: &Path, flow: &FlowField, timestamp: f64) -> Result<()> {
    let triples: Vec<[f32; 3]> = flow
        .iter()
        .map(|f| [f.x as f32, f.y as f32, f.z as f32])
        .collect();
    fs::write(path, encode_triples(FLOW_MAGIC, timestamp, &triples))?;
    Ok(())
}

pub fn read_flow(path: &Path) -> Result<(FlowField, f64)> {
    let data = fs::read(path)?;
    let (timestamp, triples) = decode_triples(path, FLOW_MAGIC, &data)?;
    Ok((
        FlowField::new(
            triples
                .iter()
                .map(|t| Vector3::new(t[0] as f64, t[1] as f64, t[2] as f64))
                .collect(),
        ),
        timestamp,
    ))
}

pub fn write_labels(path: &Path, fg_mask: &[bool]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + fg_mask.len());
    buf.extend_from_slice(LABEL_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(fg_mask.len() as u64).to_le_bytes());
    buf.extend(fg_mask.iter().map(|&fg| fg as u8));
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<bool>> {
    let data = fs::read(path)?;
    if data.len() < 16 {
        return Err(malformed(path, "truncated header"));
    }
    if &data[0..4] != LABEL_MAGIC {
        return Err(malformed(path, "bad magic, expected \"ICLB\""));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(malformed(path, format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(data[8..16].try_into().unwrap()) as usize;
    if data.len() != 16 + count {
        return Err(malformed(
            path,
            format!("expected {} bytes for {count} labels, got {}", 16 + count, data.len()),
        ));
    }
    data[16..]
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(malformed(path, format!("label byte {other} is not 0 or 1"))),
        })
        .collect()
}

/// Poses are UTF-8 text: 16 whitespace-separated decimal floats forming a
/// row-major 4×4 homogeneous sensor-to-world matrix. Written floats use the
/// shortest round-trip representation, so write ∘ read ∘ write is
/// byte-identical.
pub fn write_pose(path: &Path, pose: &RigidTransform) -> Result<()> {
    let m = pose.to_homogeneous();
    let mut out = String::new();
    for r in 0..4 {
        let row: Vec<String> = (0..4).map(|c| format!("{}", m[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_pose(path: &Path) -> Result<RigidTransform> {
    let text = fs::read_to_string(path)?;
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| malformed(path, format!("not a decimal float: {tok:?}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != 16 {
        return Err(malformed(
            path,
            format!("expected 16 floats, got {}", values.len()),
        ));
    }
    let m = Matrix4::from_row_slice(&values);
    RigidTransform::from_homogeneous(&m)
        .map_err(|e| malformed(path, format!("not a rigid pose: {e}")))
}

/// Fixed-layout table, one row per category, metrics at 6 decimals.
pub fn report_table(report: &EvalReport) -> String {
    let mut out = String::from(
        "category     points      EPE(m)      Acc-S(%)    Acc-R(%)\n",
    );
    for cat in CATEGORIES {
        let r = report.category(cat);
        match r.metrics {
            Some(m) => out.push_str(&format!(
                "{:<12} {:<11} {:<11.6} {:<11.6} {:<11.6}\n",
                cat.key(),
                r.count,
                m.epe,
                m.acc_s,
                m.acc_r
            )),
            None => out.push_str(&format!("{:<12} {:<11} -\n", cat.key(), 0)),
        }
    }
    out
}

/// Flat machine-readable key-value form, `category.metric=value` per line;
/// metrics omitted for empty categories.
pub fn report_kv(report: &EvalReport) -> String {
    let mut out = String::new();
    for cat in CATEGORIES {
        let r = report.category(cat);
        out.push_str(&format!("{}.count={}\n", cat.key(), r.count));
        if let Some(m) = r.metrics {
            out.push_str(&format!("{}.epe={:.6}\n", cat.key(), m.epe));
            out.push_str(&format!("{}.acc_s={:.6}\n", cat.key(), m.acc_s));
            out.push_str(&format!("{}.acc_r={:.6}\n", cat.key(), m.acc_r));
        }
    }
    out
}

pub fn parse_report_kv(path: &Path, text: &str) -> Result<EvalReport> {
    let mut counts = [None::<usize>; 3];
    let mut metrics = [[None::<f64>; 3]; 3];
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| malformed(path, format!("expected key=value, got {line:?}")))?;
        let (cat_key, metric) = key
            .split_once('.')
            .ok_or_else(|| malformed(path, format!("expected category.metric, got {key:?}")))?;
        let ci = CATEGORIES
            .iter()
            .position(|c| c.key() == cat_key)
            .ok_or_else(|| malformed(path, format!("unknown category {cat_key:?}")))?;
        match metric {
            "count" => {
                counts[ci] = Some(
                    value
                        .parse()
                        .map_err(|_| malformed(path, format!("bad count {value:?}")))?,
                )
            }
            "epe" | "acc_s" | "acc_r" => {
                let mi = match metric {
                    "epe" => 0,
                    "acc_s" => 1,
                    _ => 2,
                };
                metrics[ci][mi] = Some(
                    value
                        .parse()
                        .map_err(|_| malformed(path, format!("bad value {value:?}")))?,
                );
            }
            other => return Err(malformed(path, format!("unknown metric {other:?}"))),
        }
    }

    let mut cats = Vec::with_capacity(3);
    for ci in 0..3 {
        let count =
            counts[ci].ok_or_else(|| malformed(path, format!("missing {}.count", CATEGORIES[ci].key())))?;
        let m = match (metrics[ci][0], metrics[ci][1], metrics[ci][2]) {
            (Some(epe), Some(acc_s), Some(acc_r)) => Some(CategoryMetrics { epe, acc_s, acc_r }),
            (None, None, None) if count == 0 => None,
            _ => {
                return Err(malformed(
                    path,
                    format!("incomplete metrics for {}", CATEGORIES[ci].key()),
                ))
            }
        };
        cats.push(CategoryReport { count, metrics: m });
    }
    Ok(EvalReport {
        dynamic_fg: cats[0],
        static_fg: cats[1],
        static_bg: cats[2],
    })
}

pub fn write_report_kv(path: &Path, report: &EvalReport) -> Result<()> {
    fs::write(path, report_kv(report))?;
    Ok(())
}

pub fn read_report_kv(path: &Path) -> Result<EvalReport> {
    let mut text = String::new();
    fs::File::open(path)?.read_to_string(&mut text)?;
    parse_report_kv(path, &text)
}

pub fn write_report_table(path: &Path, report: &EvalReport) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(report_table(report).as_bytes())?;
    Ok(())
}

fn scan_name(k: usize) -> String {
    format!("scan_{k:03}.icpf")
}
fn pose_name(k: usize) -> String {
    format!("pose_{k:03}.txt")
}
fn label_name(k: usize) -> String {
    format!("labels_{k:03}.iclb")
}
pub fn flow_name(k: usize) -> String {
    format!("flow_000_to_{k:03}.icff")
}

/// Writes a generated sample as scans, poses, ground-truth flows, and
/// foreground labels into `dir`.
pub fn write_scene_sample(dir: &Path, sample: &SceneSample) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, scan) in sample.scans.iter().enumerate() {
        write_scan(&dir.join(scan_name(k)), scan)?;
        write_pose(&dir.join(pose_name(k)), &sample.poses[k])?;
        write_labels(&dir.join(label_name(k)), &sample.fg_masks[k])?;
    }
    for (i, flow) in sample.flows.iter().enumerate() {
        write_flow(&dir.join(flow_name(i + 1)), flow, sample.scans[0].timestamp)?;
    }
    Ok(())
}

/// Reloads a sample directory written by [`write_scene_sample`]. The
/// reloaded sample carries no generator truth; verification falls back to
/// geometric checks.
pub fn read_scene_sample(dir: &Path) -> Result<SceneSample> {
    let mut scans = Vec::new();
    let mut poses = Vec::new();
    let mut fg_masks = Vec::new();
    let mut k = 0usize;
    loop {
        let scan_path = dir.join(scan_name(k));
        if !scan_path.exists() {
            break;
        }
        scans.push(read_scan(&scan_path)?);
        poses.push(read_pose(&dir.join(pose_name(k)))?);
        fg_masks.push(read_labels(&dir.join(label_name(k)))?);
        k += 1;
    }
    if scans.is_empty() {
        return Err(malformed(dir, "no scan_000.icpf found"));
    }
    let mut flows = Vec::new();
    for i in 1..scans.len() {
        flows.push(read_flow(&dir.join(flow_name(i)))?.0);
    }
    Ok(SceneSample {
        scans,
        poses,
        flows,
        fg_masks,
        truth: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{CategoryMetrics, CategoryReport};
    use nalgebra::Vector3;
    use proptest::prelude::*;

    #[test]
    fn scan_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.icpf");
        let scan = PointCloud::new(
            vec![Point3::new(1.5, -2.25, 0.125), Point3::new(0.0, 3.0, -1.0)],
            0.7,
        );
        write_scan(&path, &scan).unwrap();
        let bytes1 = fs::read(&path).unwrap();
        let back = read_scan(&path).unwrap();
        write_scan(&path, &back).unwrap();
        let bytes2 = fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2);
        assert_eq!(back.timestamp, 0.7);
        assert_eq!(back.points, scan.points);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.icpf");

        fs::write(&path, b"XXXX").unwrap();
        assert!(matches!(read_scan(&path), Err(Error::MalformedFile { .. })));

        // Good magic, truncated payload.
        let scan = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0)], 0.0);
        write_scan(&path, &scan).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_scan(&path), Err(Error::MalformedFile { .. })));

        // Wrong version.
        write_scan(&path, &scan).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = 9;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_scan(&path), Err(Error::MalformedFile { .. })));

        // Non-finite coordinate.
        write_scan(&path, &scan).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[24..28].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_scan(&path), Err(Error::MalformedFile { .. })));

        // Flow magic on a scan reader and vice versa.
        let flow = FlowField::new(vec![Vector3::new(0.5, 0.0, 0.0)]);
        let fpath = dir.path().join("f.icff");
        write_flow(&fpath, &flow, 0.0).unwrap();
        assert!(matches!(read_scan(&fpath), Err(Error::MalformedFile { .. })));
    }

    #[test]
    fn label_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.iclb");
        let mask = vec![true, false, false, true, true];
        write_labels(&path, &mask).unwrap();
        assert_eq!(read_labels(&path).unwrap(), mask);

        let mut bytes = fs::read(&path).unwrap();
        bytes[16] = 7;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_labels(&path), Err(Error::MalformedFile { .. })));
    }

    #[test]
    fn pose_round_trip_and_bottom_row_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        let pose = RigidTransform::rotation_z(0.3)
            .compose(&RigidTransform::from_translation(Vector3::new(4.0, -1.5, 0.25)));
        write_pose(&path, &pose).unwrap();
        let text1 = fs::read_to_string(&path).unwrap();
        let back = read_pose(&path).unwrap();
        write_pose(&path, &back).unwrap();
        assert_eq!(text1, fs::read_to_string(&path).unwrap());

        fs::write(&path, "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0.5 1\n").unwrap();
        assert!(matches!(read_pose(&path), Err(Error::MalformedFile { .. })));

        fs::write(&path, "1 0 0\n").unwrap();
        assert!(matches!(read_pose(&path), Err(Error::MalformedFile { .. })));
    }

    #[test]
    fn report_kv_round_trip() {
        let report = EvalReport {
            dynamic_fg: CategoryReport {
                count: 120,
                metrics: Some(CategoryMetrics {
                    epe: 0.012345,
                    acc_s: 98.5,
                    acc_r: 99.875,
                }),
            },
            static_fg: CategoryReport {
                count: 0,
                metrics: None,
            },
            static_bg: CategoryReport {
                count: 4210,
                metrics: Some(CategoryMetrics {
                    epe: 0.000001,
                    acc_s: 100.0,
                    acc_r: 100.0,
                }),
            },
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.kv");
        write_report_kv(&path, &report).unwrap();
        let parsed = read_report_kv(&path).unwrap();
        assert_eq!(parsed.dynamic_fg.count, 120);
        assert_eq!(parsed.static_fg.count, 0);
        assert!(parsed.static_fg.metrics.is_none());
        let m = parsed.dynamic_fg.metrics.unwrap();
        assert!((m.epe - 0.012345).abs() < 1e-9);
        // Reserialize equals first serialization after one parse cycle.
        let text1 = report_kv(&report);
        let text2 = report_kv(&parsed);
        assert_eq!(text1, text2);
    }

    #[test]
    fn scene_sample_round_trip_verifies() {
        let spec = crate::synth::SceneSpec {
            seed: 60,
            n_objects: 2,
            n_frames: 3,
            ground_half_extent: 15.0,
            ground_density: 1.0,
            ..crate::synth::SceneSpec::default()
        };
        let sample = crate::synth::generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_scene_sample(dir.path(), &sample).unwrap();
        let reloaded = read_scene_sample(dir.path()).unwrap();
        assert_eq!(reloaded.scans.len(), 3);
        assert_eq!(reloaded.flows.len(), 2);
        assert!(crate::synth::verify_sample(&reloaded));
    }

    proptest! {
        #[test]
        fn flow_round_trip_preserves_f32_payload(
            values in proptest::collection::vec((-100.0f32..100.0, -100.0f32..100.0, -5.0f32..5.0), 0..50),
            timestamp in 0.0f64..1000.0,
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("f.icff");
            let flow = FlowField::new(
                values.iter().map(|(x, y, z)| Vector3::new(*x as f64, *y as f64, *z as f64)).collect(),
            );
            write_flow(&path, &flow, timestamp).unwrap();
            let bytes1 = fs::read(&path).unwrap();
            let (back, ts) = read_flow(&path).unwrap();
            prop_assert_eq!(ts, timestamp);
            write_flow(&path, &back, ts).unwrap();
            prop_assert_eq!(bytes1, fs::read(&path).unwrap());
        }
    }
}
