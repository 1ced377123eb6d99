#![no_main]

use imuqp::bench::BenchConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(cfg) = BenchConfig::from_toml_str(text) else {
        return;
    };
    let back = BenchConfig::from_toml_str(&cfg.to_toml_string()).expect("written config parses");
    assert_eq!(back, cfg);
});
