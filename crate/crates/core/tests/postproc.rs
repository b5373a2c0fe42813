mod common;

use cmt::imaging::{resize, GrayImage};
use cmt::models::{ModelConfig, ModelGraph, Predictor, WidthScale};
use cmt::postproc::{
    adaptive_threshold, apply_mask, binarize, close, connected_components, dilate, erode, heatmap_overlay,
    infection_percentage, open, run_pipeline, select_largest, BinaryMask, Connectivity, MaskOracle, Mode,
    PipelineParams, StructuringElement,
};
use cmt::synthdata::{counted_masks, gen_infection_set, SynthKind, SynthSpec};
use cmt::training::prepare_input;

fn hand_chained(
    image: &GrayImage,
    model: &dyn Predictor,
    p: &PipelineParams,
) -> (BinaryMask, BinaryMask, cmt::InfectionReport) {
    let [_, h, w] = model.input_shape();
    let probs = model.predict(&prepare_input(image, model.input_shape()).unwrap()).unwrap();
    let raw = binarize(&probs, p.threshold).unwrap();
    let refined = open(&close(&raw, &p.element), &p.element);
    let regions = connected_components(&refined, p.connectivity);
    let lung = select_largest(&regions, p.mode.regions(), w, h);
    let small = resize(image, w, h).unwrap();
    let infected = adaptive_threshold(&apply_mask(&small, &lung).unwrap(), &lung, p.window, p.offset).unwrap();
    let report = infection_percentage(&lung, &infected).unwrap();
    (lung, infected, report)
}

#[test]
fn pipeline_is_the_composition_of_its_stages() {
    let samples = gen_infection_set(&SynthSpec::new(SynthKind::Infection, 5, 64, 31)).unwrap();
    let net = ModelGraph::build(&ModelConfig::nabla3([1, 32, 32], WidthScale::new(1, 8).unwrap()), 2).unwrap();
    let params = PipelineParams::new(Mode::Lung);
    for s in &samples {
        let oracle = MaskOracle::new(s.lung.clone());
        for model in [&oracle as &dyn Predictor, &net] {
            let out = run_pipeline(&s.image, model, &params).unwrap();
            let (lung, infected, report) = hand_chained(&s.image, model, &params);
            assert_eq!(out.region_mask, lung);
            assert_eq!(out.infected_mask, infected);
            assert_eq!(out.report, report);
            assert_eq!(out.heatmap, heatmap_overlay(&out.image, &infected).unwrap());
        }
    }
}

#[test]
fn oracle_segmenter_recovers_ground_truth_exactly() {
    let samples = gen_infection_set(&SynthSpec::new(SynthKind::Infection, 20, 64, 77)).unwrap();
    for (i, s) in samples.iter().enumerate() {
        let out = run_pipeline(&s.image, &MaskOracle::new(s.lung.clone()), &PipelineParams::new(Mode::Lung)).unwrap();
        assert_eq!(out.region_mask, s.lung, "sample {i}");
        assert_eq!(out.infected_mask, s.infected, "sample {i}");
        assert_eq!(out.report, s.report, "sample {i}");
    }
}

#[test]
fn chest_mode_keeps_only_the_largest_region() {
    let s = &gen_infection_set(&SynthSpec::new(SynthKind::Infection, 1, 64, 5)).unwrap()[0];
    let oracle = MaskOracle::new(s.lung.clone());
    let lung = run_pipeline(&s.image, &oracle, &PipelineParams::new(Mode::Lung)).unwrap();
    let chest = run_pipeline(&s.image, &oracle, &PipelineParams::new(Mode::Chest)).unwrap();
    assert_eq!(lung.raw_mask, chest.raw_mask);
    let regions = connected_components(&lung.region_mask, Connectivity::Eight);
    assert_eq!(regions.len(), 2);
    assert_eq!(chest.region_mask, select_largest(&regions, 1, 64, 64));
    assert!(chest.region_mask.is_subset_of(&lung.region_mask));
}

#[test]
fn pipeline_runs_are_bit_identical() {
    let s = &gen_infection_set(&SynthSpec::new(SynthKind::Infection, 1, 64, 9)).unwrap()[0];
    let net = ModelGraph::build(&ModelConfig::nabla3([1, 32, 32], WidthScale::new(1, 8).unwrap()), 4).unwrap();
    let p = PipelineParams::new(Mode::Lung);
    assert_eq!(run_pipeline(&s.image, &net, &p).unwrap(), run_pipeline(&s.image, &net, &p).unwrap());
}

#[test]
fn morphology_matches_brute_force_on_random_masks() {
    let se = StructuringElement::default();
    for seed in 0..100 {
        let m = common::random_mask(16, 16, 0.55, seed);
        let (e, d) = (common::erode_oracle(&m, &se), common::dilate_oracle(&m, &se));
        assert_eq!(erode(&m, &se), e, "seed {seed}");
        assert_eq!(dilate(&m, &se), d, "seed {seed}");
        assert_eq!(open(&m, &se), common::dilate_oracle(&e, &se), "seed {seed}");
        assert_eq!(close(&m, &se), common::erode_oracle(&d, &se), "seed {seed}");
    }
}

#[test]
fn larger_and_sparse_elements_match_brute_force() {
    let plus = StructuringElement::new(3, vec![false, true, false, true, true, true, false, true, false]).unwrap();
    let big = StructuringElement::square(5).unwrap();
    for seed in 0..20 {
        let m = common::random_mask(13, 11, 0.6, seed);
        for se in [&plus, &big] {
            assert_eq!(erode(&m, se), common::erode_oracle(&m, se));
            assert_eq!(dilate(&m, se), common::dilate_oracle(&m, se));
        }
    }
}

#[test]
fn outside_pixels_read_as_background() {
    let se = StructuringElement::default();
    let full = BinaryMask::full(6, 5);
    let eroded = erode(&full, &se);
    assert_eq!(eroded.count(), 4 * 3);
    assert!(!eroded.get(0, 0) && eroded.get(1, 1));
    // closing a mask that touches the border can lose border pixels
    let corner = BinaryMask::from_fn(6, 5, |x, y| x == 0 && y == 0);
    assert!(!corner.is_subset_of(&close(&corner, &se)));
    // with a one pixel margin it cannot
    let padded = BinaryMask::from_fn(6, 5, |x, y| x == 1 && y == 1);
    assert!(padded.is_subset_of(&close(&padded, &se)));
}

#[test]
fn opening_removes_specks_and_closing_fills_holes() {
    let se = StructuringElement::default();
    let speck = BinaryMask::from_fn(7, 7, |x, y| (x, y) == (3, 3));
    assert!(open(&speck, &se).is_empty());
    let holed = BinaryMask::from_fn(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y) && (x, y) != (4, 4));
    let closed = close(&holed, &se);
    assert!(closed.get(4, 4));
    assert_eq!(closed, common::erode_oracle(&common::dilate_oracle(&holed, &se), &se));
}

#[test]
fn diagonal_neighbours_depend_on_connectivity() {
    let m = BinaryMask::from_fn(4, 4, |x, y| (x, y) == (1, 1) || (x, y) == (2, 2));
    assert_eq!(connected_components(&m, Connectivity::Eight).len(), 1);
    assert_eq!(connected_components(&m, Connectivity::Four).len(), 2);
    assert!(connected_components(&BinaryMask::empty(5, 5), Connectivity::Eight).is_empty());
}

#[test]
fn selection_keeps_both_tied_regions() {
    // sizes 50, 50 and 3
    let m = BinaryMask::from_fn(30, 12, |x, y| {
        (y < 5 && x < 10) || ((6..11).contains(&y) && x >= 20) || (y == 0 && (13..16).contains(&x))
    });
    let regions = connected_components(&m, Connectivity::Eight);
    let sizes: Vec<usize> = regions.iter().map(|r| r.pixel_count).collect();
    assert_eq!(sizes, vec![50, 50, 3]);
    let two = select_largest(&regions, 2, 30, 12);
    assert_eq!(two.count(), 100);
    assert!(!two.get(14, 0));
    assert_eq!(select_largest(&regions, 9, 30, 12), m);
}

#[test]
fn adaptive_threshold_matches_its_definition() {
    for seed in 0..20 {
        let image = common::random_image(24, 20, seed);
        let roi = common::random_mask(24, 20, 0.7, seed + 1000);
        for (window, offset) in [(15, 5.0), (3, 0.0), (7, -2.5)] {
            assert_eq!(
                adaptive_threshold(&image, &roi, window, offset).unwrap(),
                common::adaptive_threshold_oracle(&image, &roi, window, offset),
                "seed {seed} window {window}"
            );
        }
    }
}

#[test]
fn adaptive_threshold_finds_a_bright_square() {
    let image = GrayImage::from_fn(20, 20, |x, y| if (8..12).contains(&x) && (8..12).contains(&y) { 200 } else { 50 });
    let roi = BinaryMask::full(20, 20);
    let found = adaptive_threshold(&image, &roi, 15, 5.0).unwrap();
    assert_eq!(found, BinaryMask::from_fn(20, 20, |x, y| (8..12).contains(&x) && (8..12).contains(&y)));
    assert!(adaptive_threshold(&GrayImage::filled(9, 9, 120), &roi_of(9), 5, 1.0).unwrap().is_empty());
}

fn roi_of(side: usize) -> BinaryMask {
    BinaryMask::full(side, side)
}

#[test]
fn worked_infection_examples() {
    for (lung, infected, want) in
        [(6696, 2245, "33.52"), (9601, 3609, "37.58"), (5184, 1599, "30.84"), (400, 0, "0.00")]
    {
        let (l, i) = counted_masks(100, 100, lung, infected).unwrap();
        let r = infection_percentage(&l, &i).unwrap();
        assert_eq!((r.lung_pixels, r.infected_pixels), (lung, infected));
        assert_eq!(r.percent_string(), want);
    }
}

#[test]
fn heatmap_only_touches_infected_pixels() {
    let image = common::random_image(10, 10, 3);
    let infected = common::random_mask(10, 10, 0.3, 4);
    let heat = heatmap_overlay(&image, &infected).unwrap();
    for y in 0..10 {
        for x in 0..10 {
            let g = image.get(x, y);
            if !infected.get(x, y) {
                assert_eq!(heat.get(x, y), [g, g, g]);
            }
        }
    }
    let black = heatmap_overlay(&GrayImage::filled(3, 3, 0), &BinaryMask::full(3, 3)).unwrap();
    assert!(black.pixels().chunks(3).all(|c| c == [127, 0, 0]));
}
