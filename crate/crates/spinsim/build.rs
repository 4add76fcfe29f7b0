fn main() {
    // ndarray-linalg is pulled in without a bundled BLAS provider; resolve its
    // LAPACK symbols against the system reference libraries instead.
    println!("cargo:rustc-link-lib=dylib=lapack");
    println!("cargo:rustc-link-lib=dylib=blas");
}
