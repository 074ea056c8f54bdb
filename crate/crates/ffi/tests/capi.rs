use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use stacklab_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { stacklab_string_free(s) };
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(stacklab_last_error()) }
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn scenario_catalog_round_trip() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(stacklab_scenario_generate(3, 0, &mut s), StacklabStatus::Ok);
        let mut k = 0;
        assert_eq!(stacklab_scenario_box_count(s, &mut k), StacklabStatus::Ok);
        assert!((3..=6).contains(&k));

        let mut json = ptr::null_mut();
        assert_eq!(stacklab_scenario_to_json(s, &mut json), StacklabStatus::Ok);
        let json = take(json);
        let expected = stacklab::scenario::sample_scenario(
            &stacklab::scenario::GenConfig {
                master_seed: 3,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(json, expected.to_json());

        let c_json = CString::new(json).unwrap();
        let mut s2 = ptr::null_mut();
        assert_eq!(
            stacklab_scenario_from_json(c_json.as_ptr(), &mut s2),
            StacklabStatus::Ok
        );

        let mut cat = ptr::null_mut();
        assert_eq!(stacklab_catalog_enumerate(s2, &mut cat), StacklabStatus::Ok);
        let mut n = 0;
        assert_eq!(
            stacklab_catalog_completed_count(cat, &mut n),
            StacklabStatus::Ok
        );
        let direct =
            stacklab::sim::enumerate_stacks(&expected, &stacklab::PhysParams::default()).unwrap();
        assert_eq!(n, direct.completed.len());

        let mut stack = ptr::null_mut();
        let mut score = -1.0;
        assert_eq!(
            stacklab_catalog_best(cat, c"weight".as_ptr(), &mut stack, &mut score),
            StacklabStatus::Ok
        );
        let (best, best_score) = stacklab::preference::best_achievable(
            &direct,
            &stacklab::PreferenceSet::single(stacklab::PreferenceKind::Weight),
        )
        .unwrap();
        assert_eq!(take(stack), best.join(","));
        assert_eq!(score, best_score);

        stacklab_catalog_free(cat);
        stacklab_scenario_free(s2);
        stacklab_scenario_free(s);
        stacklab_scenario_free(ptr::null_mut());
        stacklab_catalog_free(ptr::null_mut());
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(
            stacklab_scenario_from_json(c"{".as_ptr(), &mut s),
            StacklabStatus::InvalidInput
        );
        assert!(s.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(
            stacklab_scenario_from_json(ptr::null(), &mut s),
            StacklabStatus::NullPointer
        );
        assert_eq!(
            stacklab_scenario_generate(0, 0, ptr::null_mut()),
            StacklabStatus::NullPointer
        );

        let bad = [0xffu8, 0];
        let mut out = ptr::null_mut();
        assert_eq!(
            stacklab_parse_plan(bad.as_ptr().cast(), &mut out),
            StacklabStatus::InvalidUtf8
        );
        assert_eq!(
            stacklab_parse_plan(c"I think box5 goes last".as_ptr(), &mut out),
            StacklabStatus::Parse
        );
        assert!(last_error().contains("at byte 0"), "{}", last_error());

        let mut gen = ptr::null_mut();
        stacklab_scenario_generate(0, 0, &mut gen);
        let mut cat = ptr::null_mut();
        stacklab_catalog_enumerate(gen, &mut cat);
        let mut st = ptr::null_mut();
        let mut score = 0.0;
        assert_eq!(
            stacklab_catalog_best(cat, c"mass".as_ptr(), &mut st, &mut score),
            StacklabStatus::InvalidInput
        );
        stacklab_catalog_free(cat);
        stacklab_scenario_free(gen);
    }
}

#[test]
fn plans_and_distances() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            stacklab_parse_plan(c"stack box2, stack box1".as_ptr(), &mut out),
            StacklabStatus::Ok
        );
        assert_eq!(take(out), "stack box2; stack box1");
        assert_eq!(
            stacklab_parse_plan(c"WAIT".as_ptr(), &mut out),
            StacklabStatus::Ok
        );
        assert_eq!(take(out), "wait");

        let mut d = 0;
        assert_eq!(
            stacklab_levenshtein(c"a,b,c".as_ptr(), c"c,b,a".as_ptr(), &mut d),
            StacklabStatus::Ok
        );
        assert_eq!(d, 2);
        assert_eq!(
            stacklab_levenshtein(c"".as_ptr(), c"a,b".as_ptr(), &mut d),
            StacklabStatus::Ok
        );
        assert_eq!(d, 2);
        let v = CStr::from_ptr(stacklab_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/stacklab.h")
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header()).unwrap();
    let src =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|r| r.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 13, "{exports:?}");
    for f in exports {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct StacklabScenario StacklabScenario;"));
    assert!(h.contains("STACKLAB_STATUS_INTERNAL = 7"));
}

fn static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/capi-<hash> → target/<profile>
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libstacklab_ffi.a");
    lib.exists().then_some(lib)
}

const C_SMOKE: &str = r#"
#include <stdio.h>
#include <string.h>
#include "stacklab.h"

int main(void) {
    StacklabScenario *s = NULL;
    if (stacklab_scenario_generate(1, 0, &s) != STACKLAB_STATUS_OK) return 1;
    StacklabCatalog *c = NULL;
    if (stacklab_catalog_enumerate(s, &c) != STACKLAB_STATUS_OK) return 2;
    char *stack = NULL;
    double score = 0;
    if (stacklab_catalog_best(c, "weight", &stack, &score) != STACKLAB_STATUS_OK) return 3;
    printf("%s %.6f\n", stack, score);
    stacklab_string_free(stack);
    char *plan = NULL;
    if (stacklab_parse_plan("box5 last", &plan) != STACKLAB_STATUS_PARSE) return 4;
    if (strlen(stacklab_last_error()) == 0) return 5;
    stacklab_catalog_free(c);
    stacklab_scenario_free(s);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = static_lib() else {
        eprintln!("static library not built; skipping C link check");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping C link check");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_SMOKE).unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);

    let direct = stacklab::sim::enumerate_stacks(
        &stacklab::scenario::sample_scenario(
            &stacklab::scenario::GenConfig {
                master_seed: 1,
                ..Default::default()
            },
            0,
        )
        .unwrap(),
        &stacklab::PhysParams::default(),
    )
    .unwrap();
    let (best, score) = stacklab::preference::best_achievable(
        &direct,
        &stacklab::PreferenceSet::single(stacklab::PreferenceKind::Weight),
    )
    .unwrap();
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        format!("{} {score:.6}\n", best.join(","))
    );
}
