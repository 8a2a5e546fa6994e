// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use super::*;

fn cfg(m: usize, n: usize, b: usize) -> ArrayConfig {
    ArrayConfig::derive_geometry(m, n, b).unwrap()
}

fn um(nm: i64) -> f64 {
    nm as f64 / 1000.0
}

#[test]
fn default_pitch_reproduces_macro_size() {
    let t = default_template();
    assert_eq!(128.0 * t.width_um(), 642.41);
    assert_eq!(128.0 * t.height_um(), 294.42);
    assert!(t.width_nm() > t.height_nm());
    assert_eq!(t.footprint(), (5019, 2301));
    assert_eq!(t.shapes().len(), 4);
    for kind in LineKind::ALL {
        assert!(t.shapes().contains(t.port(kind)));
    }
}

#[test]
fn full_array_bbox_is_exact() {
    let db = tile_array(&cfg(128, 128, 8), &default_template());
    let bb = db.bbox().unwrap();
    assert_eq!((bb.x0, bb.y0), (0, 0));
    assert_eq!((bb.width(), bb.height()), (642_410, 294_420));
}

#[test]
fn bbox_within_one_nm_of_nominal() {
    let t = default_template();
    for (m, n) in [(1, 1), (2, 4), (8, 16), (16, 2), (32, 64)] {
        let bb = tile_array(&cfg(m, n, 1), &t).bbox().unwrap();
        assert!((bb.width() as f64 - n as f64 * t.width_nm()).abs() < 1.0);
        assert!((bb.height() as f64 - m as f64 * t.height_nm()).abs() < 1.0);
    }
    let bb = tile_array(&cfg(1, 1, 1), &t).bbox().unwrap();
    assert_eq!((bb.width(), bb.height()), t.footprint());
}

#[test]
fn hierarchy_reference_counts() {
    let db = tile_array(&cfg(4, 4, 1), &default_template());
    let names: Vec<_> = db.structures().iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, [CELL_NAME, ROW_NAME, ARRAY_NAME]);
    let top = db.top().unwrap();
    assert_eq!(top.elements.len(), 4);
    assert!(top
        .elements
        .iter()
        .all(|e| matches!(e, Element::Ref { structure, .. } if structure == ROW_NAME)));
    let row = db.structure(ROW_NAME).unwrap();
    assert_eq!(row.elements.len(), 4);
    assert_eq!(db.flatten().len(), 16 * 4);
    assert_eq!(db.leaf_placements().len(), 16);
}

#[test]
fn density_matches_hand_value() {
    let t = default_template();
    let d = density_mbits_per_mm2(&cfg(128, 128, 8), &t);
    let expected = 16384.0 / (0.29442 * 0.64241 * 1_048_576.0);
    assert!((d - expected).abs() < 1e-12 * expected);
    assert!((d - 0.0826).abs() < 5e-5, "{d}");
    assert!((density_mbits_per_mm2(&cfg(1, 1, 1), &t) - d).abs() < 1e-12);

    let big = CellTemplate::new(
        2.0 * t.width_nm(),
        2.0 * t.height_nm(),
        t.shapes().to_vec(),
        LineKind::ALL.iter().map(|&k| (k, *t.port(k))).collect(),
    );
    // pins no longer reach the doubled footprint edges
    assert!(big.is_err());
}

#[test]
fn density_scales_with_pitch_area() {
    let t = default_template();
    let layers = LayerMap::default();
    let m1 = layers.get(M1).unwrap();
    let m4 = layers.get(M4).unwrap();
    let (w, h) = (2.0 * t.width_nm(), 2.0 * t.height_nm());
    let (fw, fh) = (w.ceil() as i64, h.ceil() as i64);
    let sel = Rect::new(m1, 0, 100, fw, 400).unwrap();
    let p = Rect::new(m4, 100, 0, 500, fh).unwrap();
    let n = Rect::new(m4, 1000, 0, 1400, fh).unwrap();
    let ports = [(LineKind::Sel, sel), (LineKind::P, p), (LineKind::N, n)].into();
    let doubled = CellTemplate::new(w, h, vec![sel, p, n], ports).unwrap();
    let c = cfg(8, 8, 1);
    let ratio = density_mbits_per_mm2(&c, &t) / density_mbits_per_mm2(&c, &doubled);
    assert!((ratio - 4.0).abs() < 1e-12);
}

#[test]
fn template_validation() {
    let t = default_template();
    let shapes = t.shapes().to_vec();
    let ports: BTreeMap<_, _> = LineKind::ALL.iter().map(|&k| (k, *t.port(k))).collect();
    // taller than wide
    assert!(CellTemplate::new(2000.0, 3000.0, shapes.clone(), ports.clone()).is_err());
    // missing pin
    let mut partial = ports.clone();
    partial.remove(&LineKind::N);
    assert!(CellTemplate::new(t.width_nm(), t.height_nm(), shapes.clone(), partial).is_err());
    // shape outside the footprint
    let mut outside = shapes.clone();
    outside.push(Rect::new(t.port(LineKind::Sel).layer, 0, 0, 6000, 10).unwrap());
    assert!(CellTemplate::new(t.width_nm(), t.height_nm(), outside, ports).is_err());
}

#[test]
fn rect_grid_and_shape() {
    let l = LayerId::new(30, 0);
    let r = Rect::from_um(l, 0.0, 0.0, 1.0, 0.25).unwrap();
    assert_eq!((r.width(), r.height()), (1000, 250));
    assert!(matches!(
        Rect::from_um(l, 0.0, 0.0, 1.0005, 1.0),
        Err(LayoutError::GridViolation(_))
    ));
    assert!(Rect::new(l, 5, 0, 5, 1).is_err());
    let a = Rect::new(l, 0, 0, 10, 10).unwrap();
    assert!(a.touches(&Rect::new(l, 10, 0, 20, 10).unwrap()));
    assert!(!a.touches(&Rect::new(l, 11, 0, 20, 10).unwrap()));
}

#[test]
fn layer_map_overrides() {
    let mut layers = LayerMap::default();
    assert_eq!(layers.get(POLY), Some(LayerId::new(10, 0)));
    assert!(layers.set(M1, LayerId::new(36, 0)).is_err());
    let kv = KvMap::parse("layer_m1 = 31/2\n").unwrap();
    layers.apply_kv(&kv).unwrap();
    assert_eq!(layers.get(M1), Some(LayerId::new(31, 2)));
    assert_eq!(layers.name_of(LayerId::new(31, 2)), Some(M1));
    let t = template_with_layers(&layers).unwrap();
    assert_eq!(t.port(LineKind::Sel).layer, LayerId::new(31, 2));
    assert!(layers.apply_kv(&KvMap::parse("layer_m4 = x\n").unwrap()).is_err());
}

#[test]
fn hierarchy_rejects_forward_references() {
    let mut db = LayoutDb::new("lib");
    let mut top = Structure::new("top");
    top.elements.push(Element::Ref {
        structure: "leaf".into(),
        x: 0,
        y: 0,
    });
    assert!(matches!(
        db.add_structure(top),
        Err(LayoutError::UnknownStructure { .. })
    ));
    db.add_structure(Structure::new("leaf")).unwrap();
    assert!(db.add_structure(Structure::new("leaf")).is_err());
}

/// Merged extent of closed intervals, or `None` when they leave a gap.
fn merged_span(mut iv: Vec<(i64, i64)>) -> Option<(i64, i64)> {
    iv.sort();
    let (start, mut end) = *iv.first()?;
    for &(a, b) in &iv[1..] {
        if a > end {
            return None;
        }
        end = end.max(b);
    }
    Some((start, end))
}

#[test]
fn lines_abut_into_continuous_strips() {
    let t = default_template();
    for (m, n) in [(4, 8), (16, 16), (8, 32)] {
        let db = tile_array(&cfg(m, n, 1), &t);
        let bb = db.bbox().unwrap();
        let flat = db.flatten();
        let sel = t.port(LineKind::Sel);
        for i in 0..m {
            let y = t.row_offset(i) + sel.y0;
            let iv = flat
                .iter()
                .filter(|r| r.layer == sel.layer && r.y0 == y)
                .map(|r| (r.x0, r.x1))
                .collect();
            assert_eq!(merged_span(iv), Some((bb.x0, bb.x1)), "SEL row {i}");
        }
        for kind in [LineKind::P, LineKind::N] {
            let pin = t.port(kind);
            for j in 0..n {
                let x = t.column_offset(j) + pin.x0;
                let iv = flat
                    .iter()
                    .filter(|r| r.layer == pin.layer && r.x0 == x)
                    .map(|r| (r.y0, r.y1))
                    .collect();
                assert_eq!(merged_span(iv), Some((bb.y0, bb.y1)), "{kind} column {j}");
            }
        }
    }
}

#[test]
fn placements_invert_to_grid_positions() {
    let t = default_template();
    let db = tile_array(&cfg(8, 16, 2), &t);
    let mut seen = std::collections::BTreeSet::new();
    for p in db.leaf_placements() {
        let rc = (t.row_at(p.y).unwrap(), t.column_at(p.x).unwrap());
        assert!(seen.insert(rc));
    }
    assert_eq!(seen.len(), 128);
    assert_eq!(t.column_at(1), None);
}

#[test]
fn gds_empty_library_round_trip() {
    let db = LayoutDb::new("empty");
    let bytes = emit_gdsii(&db).unwrap();
    assert_eq!(parse_gdsii(&bytes).unwrap(), db);
    assert_eq!(db.bbox(), None);
}

#[test]
fn gds_single_rect_is_closed_ring() {
    let mut db = LayoutDb::new("one");
    let mut s = Structure::new("sq");
    let r = Rect::from_um(LayerId::new(30, 0), 0.0, 0.0, 1.0, 1.0).unwrap();
    s.elements.push(Element::Rect(r));
    db.add_structure(s).unwrap();
    let bytes = emit_gdsii(&db).unwrap();

    // independent walk of the record stream
    let mut pos = 0;
    let mut xy = None;
    let mut kinds = Vec::new();
    while pos < bytes.len() {
        let len = u16::from_be_bytes([bytes[pos], bytes[pos + 1]]) as usize;
        kinds.push(bytes[pos + 2]);
        if bytes[pos + 2] == 0x10 {
            xy = Some(bytes[pos + 4..pos + len].to_vec());
        }
        pos += len;
    }
    assert_eq!(
        kinds,
        [0x00, 0x01, 0x02, 0x03, 0x05, 0x06, 0x08, 0x0D, 0x0E, 0x10, 0x11, 0x07, 0x04]
    );
    let xy: Vec<i32> = xy
        .unwrap()
        .chunks(4)
        .map(|c| i32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    assert_eq!(xy, [0, 0, 1000, 0, 1000, 1000, 0, 1000, 0, 0]);
    // HEADER carries stream version 600
    assert_eq!(&bytes[..6], &[0, 6, 0x00, 0x02, 0x02, 0x58]);
    assert_eq!(parse_gdsii(&bytes).unwrap(), db);
}

#[test]
fn gds_is_byte_deterministic() {
    let db = tile_array(&cfg(4, 4, 2), &default_template());
    assert_eq!(emit_gdsii(&db).unwrap(), emit_gdsii(&db).unwrap());
    let stamped = emit_gdsii_with(
        &db,
        GdsOptions {
            real_timestamps: true,
        },
    )
    .unwrap();
    assert_eq!(parse_gdsii(&stamped).unwrap(), db);
}

#[test]
fn gds_round_trip_preserves_counts_and_bbox() {
    let db = tile_array(&cfg(4, 4, 1), &default_template());
    let back = parse_gdsii(&emit_gdsii(&db).unwrap()).unwrap();
    assert_eq!(back.bbox(), db.bbox());
    assert_eq!(back.structures().len(), 3);
    assert_eq!(back.flatten().len(), db.flatten().len());
    assert_eq!(back, db);
}

#[test]
fn gds_truncated_stream() {
    let bytes = emit_gdsii(&tile_array(&cfg(2, 2, 1), &default_template())).unwrap();
    for cut in [3, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(
            parse_gdsii(&bytes[..cut]),
            Err(LayoutError::MalformedRecord { .. })
        ));
    }
}

#[test]
fn gds_unknown_record_is_named() {
    let mut bytes = emit_gdsii(&tile_array(&cfg(1, 1, 1), &default_template())).unwrap();
    // turn the first BOUNDARY into a TEXT record (0x0C)
    let mut pos = 0;
    loop {
        let len = u16::from_be_bytes([bytes[pos], bytes[pos + 1]]) as usize;
        if bytes[pos + 2] == 0x08 {
            bytes[pos + 2] = 0x0C;
            break;
        }
        pos += len;
    }
    assert_eq!(
        parse_gdsii(&bytes),
        Err(LayoutError::UnsupportedRecord {
            id: 0x0C,
            offset: pos
        })
    );
}

#[test]
fn gds_rejects_foreign_units() {
    let mut bytes = emit_gdsii(&LayoutDb::new("u")).unwrap();
    // UNITS follows HEADER (6 bytes), BGNLIB (28) and LIBNAME (6)
    let units = 6 + 28 + 6;
    assert_eq!(bytes[units + 2], 0x03);
    bytes[units + 4 + 8..units + 20].copy_from_slice(&gds::encode_real8(1e-6));
    assert!(matches!(
        parse_gdsii(&bytes),
        Err(LayoutError::MalformedRecord { .. })
    ));
}

#[test]
fn svg_has_one_rect_per_shape() {
    for (m, n) in [(1, 1), (4, 8)] {
        let db = tile_array(&cfg(m, n, 1), &default_template());
        let svg = render_svg(&db, &SvgOptions::default());
        assert_eq!(svg.matches(r#"class="shape""#).count(), db.flatten().len());
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let legend = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("swatch"))
            .count();
        assert_eq!(legend, 3);
        assert!(svg.contains("1 µm"));
        assert_eq!(svg, render_svg(&db, &SvgOptions::default()));
    }
}

#[test]
fn svg_single_cell_draws_template() {
    let t = default_template();
    let svg = render_svg(&tile_array(&cfg(1, 1, 1), &t), &SvgOptions::default());
    for s in t.shapes() {
        let needle = format!(
            r#"x="{}" y="{}" width="{}" height="{}""#,
            s.x0,
            t.footprint().1 - s.y1,
            s.width(),
            s.height()
        );
        assert!(svg.contains(&needle), "{needle}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gds_round_trip_random_arrays(y in 0u32..5, x in 0u32..3, bexp in 0u32..3) {
        let b = 1usize << bexp;
        let c = cfg(1 << y, b << x, b);
        let db = tile_array(&c, &default_template());
        let back = parse_gdsii(&emit_gdsii(&db).unwrap()).unwrap();
        prop_assert_eq!(back, db);
    }

    #[test]
    fn rect_round_trip_random(
        x0 in -100_000i64..100_000, y0 in -100_000i64..100_000,
        w in 1i64..50_000, h in 1i64..50_000, layer in 0i16..64, dt in 0i16..4,
    ) {
        let mut db = LayoutDb::new("p");
        let mut s = Structure::new("s");
        s.elements.push(Element::Rect(Rect::new(LayerId::new(layer, dt), x0, y0, x0 + w, y0 + h).unwrap()));
        db.add_structure(s).unwrap();
        let mut t = Structure::new("t");
        t.elements.push(Element::Ref { structure: "s".into(), x: -x0, y: y0 });
        db.add_structure(t).unwrap();
        let back = parse_gdsii(&emit_gdsii(&db).unwrap()).unwrap();
        prop_assert_eq!(um(back.bbox().unwrap().x0), 0.0);
        prop_assert_eq!(back, db);
    }
}
