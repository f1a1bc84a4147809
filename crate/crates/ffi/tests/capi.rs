//! Exercises the C surface the way a foreign binding would: JSON in, opaque
//! handles, buffer copies, status codes and the thread-local error message.

use std::ffi::{CStr, CString};
use std::ptr;

use waterladder_ffi::*;

const SAMPLE: &str = r#"{
  "version": "waterladder/1",
  "sense": "le",
  "terms": [
    {"kind": "scaled_exp", "params": {"w": 2.0}},
    {"kind": "scaled_exp", "params": {"w": 5.0}},
    {"kind": "scaled_exp", "params": {"w": 8.0}},
    {"kind": "scaled_exp", "params": {"w": 0.5}}
  ],
  "lower": ["-inf", "-inf", "-inf", "-inf"],
  "upper": [0.4, -1.2, 2.0, -1.8],
  "constraints": [
    {"j": 1, "rho": 0.2}, {"j": 2, "rho": -2.0},
    {"j": 3, "rho": 1.1}, {"j": 4, "rho": -1.9}
  ]
}"#;

fn parse(json: &str) -> *mut wl_problem {
    let c = CString::new(json).unwrap();
    let mut handle: *mut wl_problem = ptr::null_mut();
    let status = unsafe { wl_problem_from_json(c.as_ptr(), &mut handle) };
    assert_eq!(status, wl_status::WL_OK);
    assert!(!handle.is_null());
    handle
}

#[test]
fn solve_and_read_back_through_the_c_surface() {
    unsafe {
        let problem = parse(SAMPLE);
        assert_eq!(wl_problem_len(problem), 4);

        let mut solution: *mut wl_solution = ptr::null_mut();
        let status = wl_solve(problem, ptr::null(), &mut solution);
        assert_eq!(status, wl_status::WL_OK);
        assert_eq!(wl_solution_len(solution), 4);

        let mut x = [0.0f64; 4];
        assert_eq!(wl_solution_x(solution, x.as_mut_ptr(), x.len()), wl_status::WL_OK);
        let expect = [-0.8, -1.2, 1.9, -1.8];
        for i in 0..4 {
            assert!((x[i] - expect[i]).abs() < 1e-3, "x[{i}] = {}", x[i]);
        }

        let mut sigma = [0.0f64; 4];
        assert_eq!(wl_solution_sigma(solution, sigma.as_mut_ptr(), 4), wl_status::WL_OK);
        assert!((sigma[0] - 4.4511).abs() < 1e-3);

        assert_eq!(wl_solution_iterations(solution), 2);
        assert_eq!(wl_solution_trace_len(solution), 2);
        let mut mus = [0.0f64; 2];
        let mut ks = [0usize; 2];
        assert_eq!(
            wl_solution_trace(solution, mus.as_mut_ptr(), ks.as_mut_ptr(), 2),
            wl_status::WL_OK
        );
        assert_eq!(ks, [2, 4]);

        let mut report = wl_kkt_report {
            stationarity_residual: 0.0,
            monotone_violation: 0.0,
            primal_violation: 0.0,
            comp_slack_constraints: 0.0,
            comp_slack_boxes: 0.0,
            pass: 0,
        };
        assert_eq!(wl_kkt_check(problem, solution, 1e-6, &mut report), wl_status::WL_OK);
        assert_eq!(report.pass, 1, "report: {report:?}");
        assert_eq!(wl_solution_kkt(solution, 1e-6, &mut report), wl_status::WL_OK);
        assert_eq!(report.pass, 1);

        let mut json: *mut std::ffi::c_char = ptr::null_mut();
        assert_eq!(wl_solution_to_json(solution, &mut json), wl_status::WL_OK);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        wl_string_free(json);
        assert!(text.contains("\"trace\""), "serialized solution: {text}");
        assert!(text.contains("\"iterations\":2"));

        wl_solution_free(solution);
        wl_problem_free(problem);
    }
}

#[test]
fn infeasible_json_maps_to_the_infeasible_status() {
    let json = r#"{
      "version": "waterladder/1",
      "sense": "le",
      "terms": [{"kind": "scaled_exp", "params": {"w": 1.0}},
                {"kind": "scaled_exp", "params": {"w": 1.0}}],
      "lower": [0.0, 0.0],
      "upper": [1.0, 1.0],
      "constraints": [{"j": 2, "rho": -1.0}]
    }"#;
    unsafe {
        let problem = parse(json);
        let mut solution: *mut wl_solution = ptr::null_mut();
        assert_eq!(wl_solve(problem, ptr::null(), &mut solution), wl_status::WL_INFEASIBLE);
        assert!(solution.is_null());
        let msg = wl_last_error_message();
        assert!(!msg.is_null());
        let text = CStr::from_ptr(msg).to_str().unwrap().to_owned();
        wl_string_free(msg);
        assert!(text.contains("2"), "message should name the constraint: {text}");
        wl_problem_free(problem);
    }
}

#[test]
fn bad_json_reports_invalid_input_with_a_message() {
    let c = CString::new("{ nonsense").unwrap();
    let mut handle: *mut wl_problem = ptr::null_mut();
    let status = unsafe { wl_problem_from_json(c.as_ptr(), &mut handle) };
    assert_eq!(status, wl_status::WL_INVALID_INPUT);
    assert!(handle.is_null());
    let msg = wl_last_error_message();
    assert!(!msg.is_null());
    unsafe { wl_string_free(msg) };
}

#[test]
fn null_arguments_are_rejected_not_dereferenced() {
    unsafe {
        let mut out: *mut wl_problem = ptr::null_mut();
        assert_eq!(wl_problem_from_json(ptr::null(), &mut out), wl_status::WL_NULL_POINTER);
        assert_eq!(wl_solve(ptr::null(), ptr::null(), ptr::null_mut()), wl_status::WL_NULL_POINTER);
        assert_eq!(wl_solution_x(ptr::null(), ptr::null_mut(), 0), wl_status::WL_NULL_POINTER);
        wl_problem_free(ptr::null_mut());
        wl_solution_free(ptr::null_mut());
        wl_string_free(ptr::null_mut());
    }
}

#[test]
fn undersized_buffers_are_detected() {
    unsafe {
        let problem = parse(SAMPLE);
        let mut solution: *mut wl_solution = ptr::null_mut();
        assert_eq!(wl_solve(problem, ptr::null(), &mut solution), wl_status::WL_OK);
        let mut small = [0.0f64; 2];
        assert_eq!(
            wl_solution_x(solution, small.as_mut_ptr(), small.len()),
            wl_status::WL_BUFFER_TOO_SMALL
        );
        wl_solution_free(solution);
        wl_problem_free(problem);
    }
}

#[test]
fn options_struct_round_trips_defaults() {
    let opts = wl_solver_options_default();
    assert_eq!(opts.skip_rule, 1);
    assert_eq!(opts.final_shortcut, 0);
    assert!(opts.eps_root > 0.0 && opts.eps_tie > 0.0);
    unsafe {
        let problem = parse(SAMPLE);
        let mut solution: *mut wl_solution = ptr::null_mut();
        assert_eq!(wl_solve(problem, &opts, &mut solution), wl_status::WL_OK);
        wl_solution_free(solution);
        wl_problem_free(problem);
    }
}
