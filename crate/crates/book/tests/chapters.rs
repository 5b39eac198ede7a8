use std::path::Path;

/// Every chapter linked from SUMMARY.md is compiled into the doc-test crate.
#[test]
fn summary_and_doc_crate_agree() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../book/src");
    let summary = std::fs::read_to_string(root.join("SUMMARY.md")).unwrap();
    let lib = include_str!("../src/lib.rs");
    let mut n = 0;
    for file in summary.split("](").skip(1).map(|s| &s[..s.find(')').unwrap()]) {
        assert!(root.join(file).is_file(), "{file} listed but missing");
        assert!(lib.contains(&format!("book/src/{file}")), "{file} not included in the doc-test crate");
        n += 1;
    }
    let on_disk = std::fs::read_dir(&root).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "md")).count();
    assert_eq!(n + 1, on_disk, "chapters on disk not listed in SUMMARY.md");
}
