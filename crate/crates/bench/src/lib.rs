//! Shared inputs for the criterion benches.

use swarmcommand_core::eval::tokenize_xml;
use swarmcommand_core::swarm_sim::{load_scenario, SCENARIO_IDS};

/// Reference XML of every bundled scenario.
pub fn reference_documents() -> Vec<String> {
    SCENARIO_IDS
        .iter()
        .map(|&id| load_scenario(id).expect("bundled scenario").reference_xml.to_string())
        .collect()
}

/// Token streams for a candidate/reference pair that differ in a few leaves.
pub fn token_pair() -> (Vec<String>, Vec<String>) {
    let reference = load_scenario(5).expect("bundled scenario").reference_xml.to_string();
    let candidate = reference.replacen("Wander", "AlignWithSwarm", 1).replacen("FormLine", "Wander", 1);
    (tokenize_xml(&candidate), tokenize_xml(&reference))
}
