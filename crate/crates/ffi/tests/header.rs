const HEADER: &str = include_str!("../include/fomdp.h");

#[test]
fn header_declares_the_api() {
    for name in [
        "fomdp_last_error",
        "fomdp_model_parse",
        "fomdp_model_free",
        "fomdp_model_num_templates",
        "fomdp_instance_parse",
        "fomdp_instance_free",
        "fomdp_solve",
        "fomdp_solution_free",
        "fomdp_solution_num_bases",
        "fomdp_solution_weight",
        "fomdp_solution_converged",
        "fomdp_solution_value",
        "fomdp_solution_dump",
        "fomdp_string_free",
        "fomdp_loss_bound",
    ] {
        assert!(HEADER.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(HEADER.contains("typedef struct FomdpModelHandle FomdpModelHandle;"));
    assert!(HEADER.contains("FOMDP_STATUS_OK = 0"));
}
