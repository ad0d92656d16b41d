#![no_main]

use libfuzzer_sys::fuzz_target;
use seals::fluid::dump::decode_frames;

// Decoded frames re-encode to the exact input bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(frames) = decode_frames(data) {
        let mut out = Vec::new();
        for f in &frames {
            out.extend_from_slice(&f.time.to_le_bytes());
            out.extend_from_slice(&(f.positions.len() as u32).to_le_bytes());
            for p in &f.positions {
                for c in p {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        assert_eq!(out, data);
    }
});
