//! Leaf-name histogram of `datagen --n 2063 --seed 7` with the bundled bank
//! and uniform weights.

pub const HISTOGRAM_2063_SEED_7: [(&str, usize); 13] = [
    ("AlignWithSwarm", 170),
    ("ApproachTarget", 311),
    ("AvoidObstacle", 164),
    ("ChangeColor", 799),
    ("FindGoal", 296),
    ("FormLine", 250),
    ("FreezeMovement", 394),
    ("GoalFound", 215),
    ("ObstacleDetected", 427),
    ("PathClear", 247),
    ("TargetDetected", 380),
    ("TargetReached", 294),
    ("Wander", 621),
];

/// Largest |observed share - configured share| over all weighted behaviors,
/// in percentage points. Counts the `behavior` field of each JSONL line.
pub fn max_frequency_gap(lines: &[serde_json::Value], weights: &[(String, f64)]) -> f64 {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let n = lines.len() as f64;
    weights
        .iter()
        .map(|(name, w)| {
            let hits = lines.iter().filter(|l| l["behavior"] == name.as_str()).count() as f64;
            (100.0 * (hits / n - w / total)).abs()
        })
        .fold(0.0, f64::max)
}
