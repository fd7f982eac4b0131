use btlab_core::netsim::{all_presets, preset, report, run};

#[test]
fn every_preset_meets_its_expectations() {
    for s in all_presets() {
        let out = run(&s).unwrap();
        let r = report(&s, &out).unwrap();
        println!("{}", r.summary());
        assert!(r.all_expectations_met, "{}", r.summary());
    }
}

#[test]
fn unknown_preset_is_an_error() {
    assert!(preset("nope").is_err());
}
