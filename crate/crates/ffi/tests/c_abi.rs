//! Compiles a C program against the generated header and runs it against
//! the shared library.

use std::path::PathBuf;
use std::process::Command;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("robin_coupling.h").exists(), "header not generated");

    // `cargo test` only builds the rlib, so build the shared library explicitly;
    // it lands next to this test's deps directory
    let built = Command::new(env!("CARGO"))
        .args(["build", "-p", "robin-coupling-ffi", "--lib"])
        .current_dir(&manifest)
        .status()
        .unwrap();
    assert!(built.success(), "cargo build of the shared library failed");
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    assert!(
        lib_dir.join("librobin_coupling_ffi.so").exists() || lib_dir.join("librobin_coupling_ffi.dylib").exists(),
        "shared library not found in {}",
        lib_dir.display()
    );

    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("rc_smoke");
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg(manifest.join("tests").join("smoke.c"))
        .arg("-I")
        .arg(&header_dir)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lrobin_coupling_ffi")
        .arg("-o")
        .arg(&out)
        .status()
        .expect("a C compiler is required for this test");
    assert!(status.success(), "C compilation failed");

    let run = Command::new(&out)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .env("DYLD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(run.status.success(), "smoke program exited with {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("e_u="));
}
