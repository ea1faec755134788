//! The checked-in C header matches what cbindgen generates from the source.
//! Regenerate with `UIHPQ_BLESS=1 cargo test -p uihpq-ffi --test header`.

use std::path::PathBuf;

#[test]
fn header_is_current() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let config = cbindgen::Config::from_file(dir.join("cbindgen.toml")).unwrap();
    let mut generated = Vec::new();
    cbindgen::Builder::new()
        .with_crate(&dir)
        .with_config(config)
        .generate()
        .expect("cbindgen runs")
        .write(&mut generated);
    let path = dir.join("include/uihpq.h");
    if std::env::var("UIHPQ_BLESS").is_ok_and(|v| v == "1") {
        std::fs::write(&path, &generated).unwrap();
    }
    let current = std::fs::read(&path).expect("include/uihpq.h exists");
    assert!(current == generated, "include/uihpq.h is stale; rerun with UIHPQ_BLESS=1");
}
