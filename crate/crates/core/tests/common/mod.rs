#![allow(dead_code)]

use serde_json::json;
use ssv_core::data::synth::{generate, Distribution};
use ssv_core::grammar::parse_spec;
use ssv_core::pipeline::{prepare, Prepared};

/// Circle marks over the synthetic x/y/z columns with every measure type.
pub fn spec_json(budget: u64, theta: Option<f64>, levels: Option<u32>) -> serde_json::Value {
    let mut j = json!({
        "marks": {
            "cluster": {
                "mode": "circle",
                "aggregate": {
                    "dimensions": [],
                    "measures": [
                        { "function": "count" },
                        { "function": "sum", "field": "z" },
                        { "function": "min", "field": "z" },
                        { "function": "max", "field": "z" },
                        { "function": "sqrsum", "field": "z" }
                    ]
                }
            },
            "hover": { "ranklist": { "topk": 3 }, "boundary": "convexhull" }
        },
        "layout": {
            "x": { "field": "x" },
            "y": { "field": "y" },
            "z": { "field": "z", "order": "descending" }
        },
        "data": { "source": "synthetic.csv", "columns": [
            { "name": "x", "type": "float" },
            { "name": "y", "type": "float" },
            { "name": "z", "type": "float" }
        ] },
        "config": { "densityBudget": budget }
    });
    if let Some(t) = theta {
        j["layout"]["theta"] = json!(t);
    }
    if let Some(l) = levels {
        j["config"]["numLevels"] = json!(l);
    }
    j
}

pub fn prepared(dist: Distribution, n: usize, seed: u64, spec: &serde_json::Value) -> Prepared {
    let spec = parse_spec(&spec.to_string()).expect("valid spec");
    let ds = generate(dist, n, seed);
    prepare(&spec, &ds).expect("prepare")
}
