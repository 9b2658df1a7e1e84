//! Browser demo bindings (filled in once the core engine is stable).

pub fn placeholder() {}
