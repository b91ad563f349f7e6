use finegrain::instances::*;
use finegrain::matrix::Matrix;

fn params(pairs: &[&str]) -> GenParams {
    GenParams::from_pairs(pairs).unwrap()
}

fn shapes() -> Vec<(&'static str, GenParams)> {
    vec![
        ("3sum", params(&["n=6", "m=4"])),
        ("3sum", params(&["n=5", "planted=true"])),
        ("minplus", params(&["n=5", "d=3", "inf_rate=0.2"])),
        ("exacttri", params(&["n=4", "planted=true"])),
        ("ov", params(&["n=6", "f=4", "planted=true"])),
        ("sparse", params(&["n=9"])),
        ("sparse", params(&["n=9", "variant=tripartite"])),
        ("sparse-bundle", params(&["n=6", "count=3"])),
        ("mono", params(&["n=3", "planted=true"])),
        ("mono", params(&["n=5", "variant=multi"])),
        ("cbmm", params(&["n=3", "colors=3"])),
        ("trico", params(&["variant=general"])),
        ("trico", params(&["variant=tripartite"])),
        ("trico", params(&["variant=light", "p=1"])),
        ("trico", params(&["variant=light", "p=3"])),
        ("trico", params(&["variant=star2", "p=3"])),
        ("setdisj", params(&[])),
        ("strings", params(&[])),
        ("digraph", params(&["n=6"])),
    ]
}

#[test]
fn every_generator_output_validates() {
    for (kind, p) in shapes() {
        for seed in 0..100 {
            let inst = generate(kind, &p, seed).unwrap();
            assert_eq!(validate(&inst), Ok(()), "{kind} seed {seed}");
        }
    }
    for kind in KINDS {
        assert!(shapes().iter().any(|(k, _)| k == kind), "no generator shape for {kind}");
    }
}

#[test]
fn round_trip_is_identity() {
    for (kind, p) in shapes() {
        for seed in 0..5 {
            let inst = generate(kind, &p, seed).unwrap();
            let prov = Provenance { pipeline: Some("test".into()), seed: Some(seed), ..Default::default() };
            let text = serialize(&inst, &prov);
            let (back, prov_back) = deserialize(&text).unwrap();
            assert_eq!(back, inst, "{kind}");
            assert_eq!(prov_back, prov);
            assert_eq!(serialize(&back, &prov_back), text);
        }
    }
}

#[test]
fn rationals_and_infinity_survive() {
    let a = Matrix::from_rows(vec![vec![Real::ratio(-3, 7).unwrap(), Real::infinity()]]).unwrap();
    let b = Matrix::from_rows(vec![vec![Real::int(2)], vec![Real::ratio(5, 2).unwrap()]]).unwrap();
    let inst = Instance::MinPlus(MinPlusInstance { a, b });
    let text = serialize(&inst, &Provenance::default());
    assert!(text.contains("\"-3/7\"") && text.contains("\"inf\"") && text.contains("\"5/2\""));
    assert_eq!(deserialize(&text).unwrap().0, inst);
}

#[test]
fn truncated_file_is_parse_error() {
    let inst = generate("3sum", &params(&["n=4"]), 3).unwrap();
    let text = serialize(&inst, &Provenance::default());
    let cut = &text[..text.len() / 2];
    match deserialize(cut) {
        Err(InstanceError::ParseError { line, .. }) => assert!(line >= 1),
        other => panic!("expected ParseError, got {other:?}"),
    }
    let bad = text.replace("\"a\"", "\"a_wrong\"");
    assert!(matches!(deserialize(&bad), Err(InstanceError::ParseError { .. })));
    let unknown = text.replace("\"kind\": \"3sum\"", "\"kind\": \"nope\"");
    assert!(matches!(deserialize(&unknown), Err(InstanceError::UnknownKind(_))));
}

#[test]
fn generation_is_deterministic() {
    let p = params(&["n=4", "m=2"]);
    let x = generate("3sum", &p, 7).unwrap();
    let y = generate("3sum", &p, 7).unwrap();
    assert_eq!(x, y);
    let Instance::ThreeSum(t) = &x else { panic!() };
    assert_eq!((t.a.len(), t.b.len(), t.c.len()), (4, 4, 2));
    assert_ne!(generate("3sum", &p, 8).unwrap(), x);
}

#[test]
fn planted_ov_has_orthogonal_pair() {
    for seed in 0..50 {
        let Instance::Ov(ov) = generate("ov", &params(&["n=2", "f=2", "planted=true"]), seed).unwrap() else {
            panic!()
        };
        let dot = ov.vectors[0].iter().zip(&ov.vectors[1]).filter(|(a, b)| **a && **b).count();
        assert_eq!(dot, 0, "seed {seed}");
    }
}

#[test]
fn bad_params_are_rejected() {
    assert!(matches!(generate("3sum", &params(&["n=0"]), 0), Err(InstanceError::BadParams(_))));
    assert!(matches!(generate("wat", &params(&[]), 0), Err(InstanceError::UnknownKind(_))));
    assert!(GenParams::from_pairs(&["n"]).is_err());
    assert!(GenParams::from_pairs(&["zz=1"]).is_err());
    assert!(matches!(generate("ov", &params(&["n=1", "planted=true"]), 0), Err(InstanceError::BadParams(_))));
}

#[test]
fn light_color_multiplicity_violation() {
    let inst = TriCoInstance {
        variant: TriCoVariant::Light { p: 2 },
        colors: vec![0, 0, 0, 1, 2],
        edges: vec![],
        parts: Some(vec![0, 0, 0, 1, 2]),
        components: None,
    };
    assert_eq!(validate(&Instance::TriCo(inst)).unwrap_err().rule, "color multiplicity");
}

#[test]
fn intra_part_edge_violation() {
    let inst = TriCoInstance {
        variant: TriCoVariant::Tripartite,
        colors: vec![0, 1, 2, 3],
        edges: vec![(0, 1)],
        parts: Some(vec![0, 0, 1, 2]),
        components: None,
    };
    let v = validate(&Instance::TriCo(inst)).unwrap_err();
    assert_eq!(v.rule, "intra-part edge");
    assert_eq!(v.location, "edge 0");
}

#[test]
fn star2_checks() {
    let mut inst = TriCoInstance {
        variant: TriCoVariant::Star2 { t: 2 },
        colors: vec![0, 1, 2, 0, 1, 2],
        edges: vec![(0, 1), (3, 4)],
        parts: Some(vec![0, 1, 2, 0, 1, 2]),
        components: Some(vec![0, 0, 0, 1, 1, 1]),
    };
    assert_eq!(validate(&Instance::TriCo(inst.clone())), Ok(()));
    inst.edges.push((0, 4));
    assert_eq!(validate(&Instance::TriCo(inst.clone())).unwrap_err().rule, "cross-component edge");
    inst.edges.pop();
    inst.components = Some(vec![0, 0, 0, 0, 1, 1]);
    inst.edges = vec![];
    assert_eq!(validate(&Instance::TriCo(inst)).unwrap_err().rule, "color repeated within component");
}

#[test]
fn sparse_graph_violations() {
    let g = |edges: Vec<(u32, u32)>| Instance::Sparse(SparseGraph { node_count: 3, edges, parts: None, queries: None });
    assert_eq!(validate(&g(vec![(0, 0)])).unwrap_err().rule, "self-loop");
    assert_eq!(validate(&g(vec![(0, 1), (1, 0)])).unwrap_err().rule, "duplicate edge");
    assert_eq!(validate(&g(vec![(0, 5)])).unwrap_err().rule, "edge endpoint out of range");
    let multi = EdgeColoredMultigraph { node_count: 2, edges: vec![(0, 1, 0), (0, 1, 1)], parts: None };
    assert_eq!(validate(&Instance::Mono(multi)), Ok(()));
    let dup = EdgeColoredMultigraph { node_count: 2, edges: vec![(0, 1, 0), (1, 0, 0)], parts: None };
    assert_eq!(validate(&Instance::Mono(dup)).unwrap_err().rule, "duplicate colored edge");
}
