//! Property checks shared by the core test suite and the acceptance run.

use image::{Rgb, RgbImage};
use iterator_core::imaging::{color_descriptor, extract_palette, shape_descriptor};
use iterator_core::metrics::auc;
use iterator_core::Mask;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    )
}

fn report(r: Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// Exhaustive positive/negative pair count with ties as one half.
pub fn pair_count_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi && !yj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

/// Rank AUC against pair counting; scores are drawn from a small grid so
/// ties are common.
pub fn auc_matches_pairs(cases: u32) -> Result<(), String> {
    let strat = (1usize..60).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..12, n),
            proptest::collection::vec(any::<bool>(), n),
            any::<bool>(),
        )
    });
    report(runner(cases).run(&strat, |(grid, labels, fine)| {
        let scores: Vec<f64> = grid
            .iter()
            .enumerate()
            .map(|(i, &g)| if fine { f64::from(g) + i as f64 * 1e-3 } else { f64::from(g) * 0.1 })
            .collect();
        match (auc(&scores, &labels), pair_count_auc(&scores, &labels)) {
            (None, None) => {}
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}"),
            (a, b) => return Err(TestCaseError::fail(format!("{a:?} vs {b:?}"))),
        }
        Ok(())
    }))
}

fn arb_image() -> impl Strategy<Value = (RgbImage, Mask)> {
    (4u32..24, 4u32..24, any::<u64>()).prop_map(|(w, h, seed)| {
        let mut s = seed | 1;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s
        };
        let img = RgbImage::from_fn(w, h, |_, _| {
            let v = next();
            Rgb([v as u8, (v >> 8) as u8, (v >> 16) as u8])
        });
        let mut mask = Mask::from_fn(w, h, |_, _| next() % 3 != 0);
        mask.set(0, 0, true);
        (img, mask)
    })
}

/// Hue vector length never exceeds mean saturation; s and v stay in [0, 1].
pub fn color_hue_bound(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&arb_image(), |(img, mask)| {
        let d = color_descriptor(&img, &mask).map_err(|e| TestCaseError::fail(e.to_string()))?.vector;
        prop_assert_eq!(d.len(), 4);
        prop_assert!(d[0].hypot(d[1]) <= d[2] + 1e-12);
        prop_assert!((0.0..=1.0).contains(&d[2]) && (0.0..=1.0).contains(&d[3]));
        Ok(())
    }))
}

/// A fully saturated, full-value color maps to `(cos h, sin h, 1, 1)`.
pub fn color_fixed_points(cases: u32) -> Result<(), String> {
    let red = RgbImage::from_pixel(5, 5, Rgb([255, 0, 0]));
    let all = Mask::from_fn(5, 5, |_, _| true);
    let d = color_descriptor(&red, &all).map_err(|e| e.to_string())?.vector;
    if d != vec![1.0, 0.0, 1.0, 1.0] {
        return Err(format!("red descriptor {d:?}"));
    }
    // the six primaries and secondaries, plus arbitrary pure hues
    let strat = (0u8..6, 0u8..=255);
    report(runner(cases).run(&strat, |(sector, t)| {
        let (r, g, b) = match sector {
            0 => (255, t, 0),
            1 => (255 - t, 255, 0),
            2 => (0, 255, t),
            3 => (0, 255 - t, 255),
            4 => (t, 0, 255),
            _ => (255, 0, 255 - t),
        };
        let img = RgbImage::from_pixel(3, 3, Rgb([r, g, b]));
        let m = Mask::from_fn(3, 3, |_, _| true);
        let d = color_descriptor(&img, &m).map_err(|e| TestCaseError::fail(e.to_string()))?.vector;
        let frac = f64::from(t) / 255.0;
        let hue = std::f64::consts::TAU / 6.0 * (f64::from(sector) + frac);
        prop_assert!((d[0] - hue.cos()).abs() < 1e-9, "{:?} {}", d, hue);
        prop_assert!((d[1] - hue.sin()).abs() < 1e-9, "{:?} {}", d, hue);
        prop_assert_eq!(d[2], 1.0);
        prop_assert_eq!(d[3], 1.0);
        Ok(())
    }))
}

fn arb_shape() -> impl Strategy<Value = Vec<Vec<bool>>> {
    (2usize..12, 2usize..12)
        .prop_flat_map(|(w, h)| proptest::collection::vec(proptest::collection::vec(any::<bool>(), w), h))
        .prop_map(|mut rows| {
            rows[0][0] = true;
            let (h, w) = (rows.len(), rows[0].len());
            rows[h - 1][w - 1] = true;
            rows
        })
}

fn place(shape: &[Vec<bool>], scale: u32, dx: u32, dy: u32, canvas: u32) -> Mask {
    Mask::from_fn(canvas, canvas, |x, y| {
        if x < dx || y < dy {
            return false;
        }
        let (sx, sy) = (((x - dx) / scale) as usize, ((y - dy) / scale) as usize);
        shape.get(sy).and_then(|r| r.get(sx)).copied().unwrap_or(false)
    })
}

/// Same descriptor under translation and integer upscaling; entries in [0, 1].
pub fn shape_invariance(cases: u32) -> Result<(), String> {
    let strat = (arb_shape(), 0u32..20, 0u32..20, 2u32..5);
    report(runner(cases).run(&strat, |(shape, dx, dy, k)| {
        let desc = |m: &Mask| shape_descriptor(m).map(|e| e.vector).map_err(|e| TestCaseError::fail(e.to_string()));
        let base = desc(&place(&shape, 1, 0, 0, 80))?;
        prop_assert_eq!(base.len(), 256);
        prop_assert!(base.iter().all(|v| (0.0..=1.0).contains(v)));
        let moved = desc(&place(&shape, 1, dx, dy, 80))?;
        prop_assert_eq!(&base, &moved);
        let scaled = desc(&place(&shape, k, dx, dy, 80))?;
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
        Ok(())
    }))
}

/// Palette weights are positive and sum to one.
pub fn palette_weights(cases: u32) -> Result<(), String> {
    let strat = (arb_image(), 1usize..6, any::<u64>());
    report(runner(cases).run(&strat, |((img, mask), k, seed)| {
        let k = k.min(mask.count());
        let p = extract_palette(&img, &mask, k, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(p.entries.len(), k);
        let total: f64 = p.entries.iter().map(|e| e.weight).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(p.entries.iter().all(|e| e.weight > 0.0));
        Ok(())
    }))
}

pub const DESCRIPTOR_CHECKS: [(&str, fn(u32) -> Result<(), String>); 4] = [
    ("color hue-norm bound", color_hue_bound),
    ("color pure-hue fixed points", color_fixed_points),
    ("shape scale/translation invariance", shape_invariance),
    ("palette weight normalization", palette_weights),
];
