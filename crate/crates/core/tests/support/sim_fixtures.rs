//! Regression fixtures pinned from the first seed-42 runs.

/// (scenario id, ticks until the root resolved, final state hash).
pub const SCENARIO_PINS: [(u8, u64, &str); 5] = [
    (1, 72, "7d88b7ce1b9b5e7d427581b7bef838f9"),
    (2, 293, "460aeaf5b7a231dafe489d4895f472cc"),
    (3, 131, "528fd941016e8425e611cb9546b66d60"),
    (4, 445, "bf0e3dd46f1f84f6431421d79be7dbc9"),
    (5, 290, "1ad22fbe57548f324f2fd1b6e3aaa903"),
];

/// Default swarm after 100 `Wander` steps.
pub const WANDER_100_HASH: &str = "85830a44a28a48df9f7704d265a9e50e";
