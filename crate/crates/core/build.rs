// Links the system libwebp. Distributions often ship only the versioned
// runtime object (libwebp.so.7) without the dev symlink, so fall back to
// linking that file verbatim. DETCONS_WEBP_LIB_DIR adds a search path.

use std::path::{Path, PathBuf};

fn main() {
    println!("cargo:rerun-if-env-changed=DETCONS_WEBP_LIB_DIR");
    let mut dirs: Vec<PathBuf> = Vec::new();
    if let Some(d) = std::env::var_os("DETCONS_WEBP_LIB_DIR") {
        dirs.push(d.into());
    }
    dirs.extend(
        [
            "/usr/lib/x86_64-linux-gnu",
            "/usr/lib/aarch64-linux-gnu",
            "/usr/lib64",
            "/usr/lib",
            "/usr/local/lib",
            "/opt/homebrew/lib",
        ]
        .map(PathBuf::from),
    );
    for dir in &dirs {
        println!("cargo:rustc-link-search=native={}", dir.display());
    }
    let has = |name: &str| dirs.iter().any(|d| Path::new(d).join(name).exists());
    if has("libwebp.so") || has("libwebp.dylib") || has("libwebp.a") {
        println!("cargo:rustc-link-lib=webp");
    } else if has("libwebp.so.7") {
        println!("cargo:rustc-link-lib=dylib:+verbatim=libwebp.so.7");
    } else {
        println!("cargo:warning=libwebp not found; set DETCONS_WEBP_LIB_DIR");
        println!("cargo:rustc-link-lib=webp");
    }
}
