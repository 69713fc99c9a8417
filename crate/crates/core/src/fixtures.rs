//! Scenario files shipped with the crate, addressable by name.

pub const NAMES: &[&str] = &[
    "example2-plant",
    "zero-controller",
    "sec4.2-initial",
    "sec4.2-coupling",
    "sec4.2-squeezers",
    "sec4.2-final",
    "sec4.3",
    "sec4.4",
    "example2-baseline",
];

pub fn get(name: &str) -> Option<&'static str> {
    Some(match name {
        "example2-plant" => include_str!("../fixtures/example2-plant.json"),
        "zero-controller" => include_str!("../fixtures/zero-controller.json"),
        "sec4.2-initial" => include_str!("../fixtures/sec4.2-initial.json"),
        "sec4.2-coupling" => include_str!("../fixtures/sec4.2-coupling.json"),
        "sec4.2-squeezers" => include_str!("../fixtures/sec4.2-squeezers.json"),
        "sec4.2-final" => include_str!("../fixtures/sec4.2-final.json"),
        "sec4.3" => include_str!("../fixtures/sec4.3.json"),
        "sec4.4" => include_str!("../fixtures/sec4.4.json"),
        "example2-baseline" => include_str!("../fixtures/example2-baseline.json"),
        _ => return None,
    })
}

pub fn load(name: &str) -> crate::Result<crate::scenario::Scenario> {
    let text = get(name).ok_or_else(|| crate::Error::Config(format!("unknown fixture '{name}'")))?;
    crate::scenario::Scenario::from_json(text)
}
