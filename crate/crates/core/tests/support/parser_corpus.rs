//! Hand-labeled documents for the parser gate. `None` means Accepted.

use swarmcommand_core::FailureCategory::{self, *};

fn doc(tree: &str, model: &str) -> String {
    format!(
        "<root main_tree_to_execute=\"MainTree\">\n  <BehaviorTree ID=\"MainTree\">\n    {tree}\n  </BehaviorTree>\n  <TreeNodesModel>\n    {model}\n  </TreeNodesModel>\n</root>\n"
    )
}

const CANONICAL: &str = r#"<root main_tree_to_execute="MainTree">
  <BehaviorTree ID="MainTree">
    <Sequence>
      <ObstacleDetected/>
      <AvoidObstacle/>
      <ChangeColor color="green"/>
    </Sequence>
  </BehaviorTree>
  <TreeNodesModel>
    <Condition ID="ObstacleDetected"/>
    <Action ID="AvoidObstacle"/>
    <Action ID="ChangeColor"/>
  </TreeNodesModel>
</root>
"#;

const WANDER_DECL: &str = r#"<Action ID="Wander"/>"#;

fn nested(depth: usize) -> String {
    let open = "<Sequence>".repeat(depth);
    let close = "</Sequence>".repeat(depth);
    format!("{open}<Wander/>{close}")
}

pub fn corpus() -> Vec<(&'static str, Option<FailureCategory>, String)> {
    let s1_tree = "<Fallback><Sequence><ObstacleDetected/><AvoidObstacle/><ChangeColor color=\"green\"/></Sequence><Wander/></Fallback>";
    let s1_model = "<Condition ID=\"ObstacleDetected\"/><Action ID=\"AvoidObstacle\"/><Action ID=\"ChangeColor\"/><Action ID=\"Wander\"/>";
    vec![
        // Accepted
        ("canonical", None, CANONICAL.to_string()),
        ("single leaf", None, doc("<Wander/>", WANDER_DECL)),
        ("xml declaration", None, format!("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n{CANONICAL}")),
        ("comments", None, doc("<!-- roam --><Wander/><!-- done -->", &format!("<!-- model -->{WANDER_DECL}"))),
        ("fallback over sequence", None, doc(s1_tree, s1_model)),
        ("duplicate consistent declaration", None, doc("<Wander/>", &format!("{WANDER_DECL}{WANDER_DECL}"))),
        ("btcpp format attribute", None, format!("<root BTCPP_format=\"4\"{}", &doc("<Fallback><TargetReached/><ChangeColor color=\"white\"/></Fallback>", "<Condition ID=\"TargetReached\"/><Action ID=\"ChangeColor\"/>")[5..])),
        ("bare skeleton", None, "<root><BehaviorTree><FormLine/></BehaviorTree><TreeNodesModel><Action ID=\"FormLine\"/></TreeNodesModel></root>".into()),
        ("nested five deep", None, doc(&nested(5), WANDER_DECL)),
        ("surrounding whitespace", None, format!("\n\n   {CANONICAL}   \n\t")),
        ("all conditions", None, doc(
            "<Fallback><PathClear/><GoalFound/><TargetDetected/><FindGoal/></Fallback>",
            "<Condition ID=\"PathClear\"/><Condition ID=\"GoalFound\"/><Condition ID=\"TargetDetected\"/><Action ID=\"FindGoal\"/>",
        )),
        // NonXml
        ("empty", Some(NonXml), String::new()),
        ("whitespace only", Some(NonXml), "  \n\t ".into()),
        ("leading prose", Some(NonXml), format!("Sure! Here is your tree: {CANONICAL}")),
        ("trailing prose", Some(NonXml), format!("{CANONICAL}\nHope this helps!")),
        ("code fence", Some(NonXml), format!("```xml\n{CANONICAL}```")),
        ("refusal", Some(NonXml), "I cannot generate that behavior tree.".into()),
        ("json", Some(NonXml), r#"{"tree": "Wander"}"#.into()),
        ("arrow notation", Some(NonXml), "Wander -> AvoidObstacle -> ChangeColor(green)".into()),
        ("comment only", Some(NonXml), "<!-- nothing to see -->".into()),
        ("prose then leaf", Some(NonXml), "Here: <Wander/>".into()),
        ("declaration only", Some(NonXml), "<?xml version=\"1.0\"?>".into()),
        // MalformedXml
        ("unclosed", Some(MalformedXml), "<root><BehaviorTree>".into()),
        ("mismatched close", Some(MalformedXml), "<root><BehaviorTree ID=\"MainTree\"><Sequence><Wander/></Fallback></BehaviorTree></root>".into()),
        ("unquoted attribute", Some(MalformedXml), CANONICAL.replace("\"MainTree\">", "MainTree>")),
        ("two roots", Some(MalformedXml), format!("{CANONICAL}{CANONICAL}")),
        ("undefined entity", Some(MalformedXml), doc("<ChangeColor color=\"&bogus;\"/>", "<Action ID=\"ChangeColor\"/>")),
        ("duplicate attribute", Some(MalformedXml), doc("<ChangeColor color=\"red\" color=\"green\"/>", "<Action ID=\"ChangeColor\"/>")),
        ("lt in attribute", Some(MalformedXml), doc("<ChangeColor color=\"a<b\"/>", "<Action ID=\"ChangeColor\"/>")),
        ("too deep", Some(MalformedXml), doc(&nested(200), WANDER_DECL)),
        ("case mismatch", Some(MalformedXml), "<root>\n  <Wander/>\n</ROOT>".into()),
        ("bad element name", Some(MalformedXml), "<root><1Wander/></root>".into()),
        ("junk element after root", Some(MalformedXml), format!("{}<extra>", CANONICAL.trim_end())),
        // IncompleteStructure
        ("missing model", Some(IncompleteStructure), "<root main_tree_to_execute=\"MainTree\"><BehaviorTree ID=\"MainTree\"><Wander/></BehaviorTree></root>".into()),
        ("wrong root", Some(IncompleteStructure), "<BehaviorTree ID=\"MainTree\"><Wander/></BehaviorTree>".into()),
        ("two trees", Some(IncompleteStructure), "<root><BehaviorTree><Wander/></BehaviorTree><BehaviorTree><Wander/></BehaviorTree><TreeNodesModel><Action ID=\"Wander\"/></TreeNodesModel></root>".into()),
        ("empty tree", Some(IncompleteStructure), doc("", WANDER_DECL)),
        ("two top-level nodes", Some(IncompleteStructure), doc("<Wander/><FormLine/>", "<Action ID=\"Wander\"/><Action ID=\"FormLine\"/>")),
        ("empty sequence", Some(IncompleteStructure), doc("<Sequence/>", WANDER_DECL)),
        ("conflicting declarations", Some(IncompleteStructure), doc("<Wander/>", "<Action ID=\"Wander\"/><Condition ID=\"Wander\"/>")),
        ("main tree mismatch", Some(IncompleteStructure), doc("<Wander/>", WANDER_DECL).replace("main_tree_to_execute=\"MainTree\"", "main_tree_to_execute=\"Other\"")),
        ("stray text", Some(IncompleteStructure), doc("<Wander/>", WANDER_DECL).replace("<TreeNodesModel>", "hello <TreeNodesModel>")),
        ("two models", Some(IncompleteStructure), "<root><BehaviorTree><Wander/></BehaviorTree><TreeNodesModel><Action ID=\"Wander\"/></TreeNodesModel><TreeNodesModel/></root>".into()),
        ("declaration without id", Some(IncompleteStructure), doc("<Wander/>", "<Action ID=\"Wander\"/><Action/>")),
        ("empty root", Some(IncompleteStructure), "<root/>".into()),
        // UnsupportedNode
        ("unknown leaf", Some(UnsupportedNode), doc("<LaunchRocket/>", "<Action ID=\"LaunchRocket\"/>")),
        ("missing param", Some(UnsupportedNode), doc("<ChangeColor/>", "<Action ID=\"ChangeColor\"/>")),
        ("illegal param value", Some(UnsupportedNode), doc("<ChangeColor color=\"purple\"/>", "<Action ID=\"ChangeColor\"/>")),
        ("undeclared leaf", Some(UnsupportedNode), doc("<Sequence><Wander/><FormLine/></Sequence>", WANDER_DECL)),
        ("wrong declared kind", Some(UnsupportedNode), doc("<Wander/>", "<Condition ID=\"Wander\"/>")),
        ("unknown param", Some(UnsupportedNode), doc("<Wander speed=\"3\"/>", WANDER_DECL)),
        ("parallel node", Some(UnsupportedNode), doc("<Parallel><Wander/></Parallel>", WANDER_DECL)),
        ("attribute on control", Some(UnsupportedNode), doc("<Sequence name=\"main\"><Wander/></Sequence>", WANDER_DECL)),
        ("unknown declaration", Some(UnsupportedNode), doc("<Wander/>", "<Action ID=\"Wander\"/><Action ID=\"SelfDestruct\"/>")),
        ("lowercase leaf", Some(UnsupportedNode), doc("<wander/>", "<Action ID=\"wander\"/>")),
        ("decorator", Some(UnsupportedNode), doc("<Inverter><Wander/></Inverter>", WANDER_DECL)),
    ]
}
