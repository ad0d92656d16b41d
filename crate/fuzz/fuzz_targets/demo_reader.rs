#![no_main]

use libfuzzer_sys::fuzz_target;
use seals::envserver::demo::{read_demo, write_demo};

// Anything the reader accepts must survive a write and a second read unchanged.
fuzz_target!(|data: &[u8]| {
    if let Ok(demo) = read_demo(data) {
        let mut out = Vec::new();
        write_demo(&mut out, &demo).expect("write accepted demo");
        let again = read_demo(out.as_slice()).expect("reread written demo");
        assert_eq!(again, demo);
    }
});
