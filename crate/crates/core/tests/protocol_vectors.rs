//! Conformance against the shared binary vectors in `protocol-vectors/`.

use std::fs;
use std::path::PathBuf;

use pnppds_core::protocol::{read_frame, serve, Frame};
use pnppds_core::{Error, ImageBuffer, Shape};
use serde_json::Value;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../protocol-vectors")
}

fn manifest() -> Value {
    serde_json::from_str(&fs::read_to_string(dir().join("manifest.json")).unwrap()).unwrap()
}

fn bytes(entry: &Value) -> Vec<u8> {
    fs::read(dir().join(entry["file"].as_str().unwrap())).unwrap()
}

fn shape(entry: &Value) -> Shape {
    let s: Vec<usize> = entry["shape"].as_array().unwrap().iter().map(|d| d.as_u64().unwrap() as usize).collect();
    Shape::new(s[0], s[1], s[2])
}

fn image(entry: &Value) -> ImageBuffer<f32> {
    let values = entry["f32_bits"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| f32::from_bits(u32::from_str_radix(b.as_str().unwrap(), 16).unwrap()))
        .collect();
    ImageBuffer::new(shape(entry), values).unwrap()
}

#[test]
fn valid_image_frames_decode_and_reencode_bit_exactly() {
    let m = manifest();
    for entry in m["valid"].as_array().unwrap() {
        let raw = bytes(entry);
        let frame = Frame::decode(&raw).unwrap();
        let expected = match entry["opcode"].as_u64().unwrap() {
            0x01 => Frame::Denoise(image(entry)),
            0x81 => Frame::Ok(image(entry)),
            other => panic!("opcode {other}"),
        };
        // compare bit patterns so -0.0 and subnormals count
        let got: Vec<u32> = match &frame {
            Frame::Denoise(x) | Frame::Ok(x) => x.as_slice().iter().map(|v| v.to_bits()).collect(),
            _ => panic!("{}", entry["file"]),
        };
        let want: Vec<u32> = match &expected {
            Frame::Denoise(x) | Frame::Ok(x) => x.as_slice().iter().map(|v| v.to_bits()).collect(),
            _ => unreachable!(),
        };
        assert_eq!(got, want, "{}", entry["file"]);
        assert_eq!(frame.shape(), expected.shape());
        assert_eq!(expected.encode(), raw, "{}", entry["file"]);
        assert_eq!(expected.encoded_len(), raw.len());
    }
}

#[test]
fn error_frames_decode_and_reencode_bit_exactly() {
    let m = manifest();
    for entry in m["error"].as_array().unwrap() {
        let raw = bytes(entry);
        let expected = Frame::Error {
            shape: shape(entry),
            message: entry["message"].as_str().unwrap().to_string(),
        };
        assert_eq!(Frame::decode(&raw).unwrap(), expected, "{}", entry["file"]);
        assert_eq!(expected.encode(), raw);
    }
}

#[test]
fn invalid_frames_are_rejected() {
    let m = manifest();
    for entry in m["invalid"].as_array().unwrap() {
        let raw = bytes(entry);
        match Frame::decode(&raw) {
            Err(Error::Protocol(_)) => {}
            other => panic!("{}: {other:?}", entry["file"]),
        }
    }
}

#[test]
fn concatenated_stream_reads_frame_by_frame() {
    let m = manifest();
    let entries: Vec<&Value> = m["valid"].as_array().unwrap().iter().chain(m["error"].as_array().unwrap()).collect();
    let stream: Vec<u8> = entries.iter().flat_map(|e| bytes(e)).collect();
    let mut cursor = stream.as_slice();
    for e in &entries {
        assert_eq!(read_frame(&mut cursor).unwrap().encode(), bytes(e));
    }
    assert!(matches!(read_frame(&mut cursor), Err(Error::PeerClosed)));
}

#[test]
fn echo_server_answers_requests_with_the_ok_vectors() {
    let m = manifest();
    let find = |name: &str| {
        m["valid"].as_array().unwrap().iter().find(|e| e["file"] == name).map(bytes).unwrap()
    };
    let mut requests = find("denoise_1x1x1.bin");
    requests.extend(find("denoise_3x2x2.bin"));
    let mut replies = Vec::new();
    let served = serve(requests.as_slice(), &mut replies, Ok).unwrap();
    assert_eq!(served, 2);
    let mut expected = find("ok_1x1x1.bin");
    expected.extend(find("ok_3x2x2.bin"));
    assert_eq!(replies, expected);
}
