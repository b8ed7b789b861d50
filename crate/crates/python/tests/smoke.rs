use std::path::{Path, PathBuf};
use std::process::Command;

// The cdylib cargo builds next to this test binary, so the smoke test always
// exercises the current sources rather than whatever wheel is installed.
fn built_extension() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    [deps, deps.parent().unwrap()]
        .iter()
        .map(|d| d.join("libequivar_py.so"))
        .find(|p| p.exists())
        .expect("libequivar_py.so not built")
}

#[test]
fn python_smoke_test() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(built_extension(), dir.path().join("equivar.so")).unwrap();
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../python/smoke_test.py");
    let out = Command::new("python3")
        .arg(script)
        .env("PYTHONPATH", dir.path())
        .output()
        .expect("python3 not available");
    let stdout = String::from_utf8_lossy(&out.stdout);
    println!("{stdout}{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.status.success());
    assert!(stdout.contains("python smoke test ok"));
}
