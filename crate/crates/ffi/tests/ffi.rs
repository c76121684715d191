use std::ffi::{c_char, CStr, CString};
use std::process::Command;
use std::ptr;

use packshift_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    ps_string_free(s);
    out
}

unsafe fn last_error() -> String {
    let p = ps_last_error();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

unsafe fn vector_runner() -> *mut PsRunner {
    let mut runner = ptr::null_mut();
    let config = cstr(r#"{"epsilon":"1/100","online":{"name":"vector-first-fit","d":2},"check":true}"#);
    assert_eq!(ps_runner_new(config.as_ptr(), &mut runner), PsStatus::Ok);
    assert!(ps_last_error().is_null());
    runner
}

#[test]
fn two_vectors_need_two_bins() {
    unsafe {
        let runner = vector_runner();
        let mut out = ptr::null_mut();
        let events = [
            r#"{"t":1,"op":"insert","id":"a","kind":"vector","components":["3/5","1/5"]}"#,
            r#"{"t":2,"op":"insert","id":"b","kind":"vector","components":["1/2","1/2"]}"#,
        ];
        for e in events {
            let line = cstr(e);
            assert_eq!(ps_runner_step(runner, line.as_ptr(), &mut out), PsStatus::Ok, "{}", last_error());
            let diag: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
            assert!(diag["t"].is_u64());
        }
        assert_eq!(ps_runner_cost(runner, &mut out), PsStatus::Ok);
        assert_eq!(take(out), "2/1");
        assert_eq!(ps_runner_solution(runner, &mut out), PsStatus::Ok);
        let sol: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(sol["placements"].as_array().unwrap().len(), 2);
        let mut n = 99;
        assert_eq!(ps_runner_violations(runner, &mut n), PsStatus::Ok);
        assert_eq!(n, 0);
        ps_runner_free(runner);
    }
}

#[test]
fn errors_have_codes_and_messages() {
    unsafe {
        let mut runner = ptr::null_mut();
        let bad_json = cstr("{");
        assert_eq!(ps_runner_new(bad_json.as_ptr(), &mut runner), PsStatus::Parse);
        assert!(runner.is_null());
        let bad_eps = cstr(r#"{"epsilon":"2/1","online":{"name":"shelf-2d"}}"#);
        assert_eq!(ps_runner_new(bad_eps.as_ptr(), &mut runner), PsStatus::Config);
        assert!(last_error().contains("epsilon"));
        assert_eq!(ps_runner_new(ptr::null(), &mut runner), PsStatus::NullPointer);

        let runner = vector_runner();
        let mut out = ptr::null_mut();
        let depart = cstr(r#"{"t":1,"op":"depart","id":"ghost"}"#);
        assert_eq!(ps_runner_step(runner, depart.as_ptr(), &mut out), PsStatus::Input);
        let garbage = cstr("not json");
        assert_eq!(ps_runner_step(runner, garbage.as_ptr(), &mut out), PsStatus::Parse);
        let rect = cstr(r#"{"t":2,"op":"insert","id":"r","kind":"rect2d","w":"1/2","h":"1/2"}"#);
        assert_eq!(ps_runner_step(runner, rect.as_ptr(), &mut out), PsStatus::Input);
        assert_eq!(ps_runner_cost(ptr::null(), &mut out), PsStatus::NullPointer);
        ps_runner_free(runner);
        ps_runner_free(ptr::null_mut());
        ps_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(ps_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/packshift.h")).unwrap();
    for name in [
        "ps_runner_new",
        "ps_runner_step",
        "ps_runner_cost",
        "ps_runner_solution",
        "ps_runner_free",
        "ps_string_free",
        "ps_last_error",
        "PS_STATUS_OK",
        "typedef struct PsRunner PsRunner",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let Ok(cc) = which_cc() else { return };
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"packshift.h\"\nint main(void) { PsRunner *r = 0; return ps_runner_new(\"{}\", &r) == PS_STATUS_OK; }\n",
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(format!("{dir}/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "clang", "gcc"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
