use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rsvl_core::matrix::l2_normalize;
use rsvl_core::probe::{
    knn_classify, logreg_fit, logreg_predict, LabeledFeatures, Metric, ProbeConfig,
};
use rsvl_core::retrieval::{recall_at_k, CaptionMap, Direction};
use rsvl_core::rng::seeded;
use rsvl_core::semloc::{
    prob_centroid, r_as, r_da, r_mi, r_su, score_map, similarity_map, window_grid,
    GroundTruthRegion, SemLocMap, SemLocWeights,
};
use rsvl_core::zeroshot::{top1_accuracy, zeroshot_classify};
use rsvl_core::{CropRect, EmbeddingMatrix, SimilarityMatrix};

fn random_matrix(rng: &mut impl Rng, rows: usize, dim: usize) -> EmbeddingMatrix {
    EmbeddingMatrix::new(
        rows,
        dim,
        (0..rows * dim)
            .map(|_| rng.gen_range(-1.0f32..1.0))
            .collect(),
    )
    .unwrap()
}

fn random_instance(seed: u64) -> (SimilarityMatrix, CaptionMap) {
    let mut rng = seeded(seed);
    let n_images = rng.gen_range(1..12);
    let per = rng.gen_range(1..4);
    let image_of: Vec<usize> = (0..n_images * per).map(|c| c / per).collect();
    // coarse scores produce plenty of ties
    let scores = (0..n_images * image_of.len())
        .map(|_| rng.gen_range(0..6) as f32 / 5.0)
        .collect();
    (
        SimilarityMatrix::new(n_images, image_of.len(), scores).unwrap(),
        CaptionMap::new(n_images, image_of).unwrap(),
    )
}

proptest! {
    #[test]
    fn recall_monotone_in_k_and_rank_invariant(seed in any::<u64>()) {
        let (sim, map) = random_instance(seed);
        for dir in [Direction::ImageToText, Direction::TextToImage] {
            let mut prev = 0.0;
            for k in 1..=14 {
                let r = recall_at_k(&sim, &map, k, dir).unwrap();
                prop_assert!(r >= prev && (0.0..=100.0).contains(&r));
                prev = r;
            }
            // strictly increasing transform keeps every ranking
            let warped: Vec<f32> = sim.scores().iter().map(|s| (3.0 * s).exp() + 1.0).collect();
            let warped = SimilarityMatrix::new(sim.n_images(), sim.n_texts(), warped).unwrap();
            for k in [1, 2, 5] {
                prop_assert_eq!(recall_at_k(&sim, &map, k, dir).unwrap(), recall_at_k(&warped, &map, k, dir).unwrap());
            }
        }
    }

    #[test]
    fn recall_invariant_to_relabeling_images(seed in any::<u64>()) {
        // scores without ties, so the permutation cannot interact with the tie rule
        let mut rng = seeded(seed);
        let n_images = rng.gen_range(2..10);
        let image_of: Vec<usize> = (0..n_images * 2).map(|c| c / 2).collect();
        let n_texts = image_of.len();
        let scores: Vec<f32> = (0..n_images * n_texts).map(|_| rng.gen()).collect();
        let sim = SimilarityMatrix::new(n_images, n_texts, scores.clone()).unwrap();
        let map = CaptionMap::new(n_images, image_of.clone()).unwrap();

        let mut perm: Vec<usize> = (0..n_images).collect(); // new index → old index
        perm.shuffle(&mut rng);
        let mut inverse = vec![0; n_images];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let permuted: Vec<f32> = perm.iter().flat_map(|&old| scores[old * n_texts..(old + 1) * n_texts].to_vec()).collect();
        let sim_p = SimilarityMatrix::new(n_images, n_texts, permuted).unwrap();
        let map_p = CaptionMap::new(n_images, image_of.iter().map(|&i| inverse[i]).collect()).unwrap();
        for dir in [Direction::ImageToText, Direction::TextToImage] {
            for k in [1, 3] {
                prop_assert_eq!(recall_at_k(&sim, &map, k, dir).unwrap(), recall_at_k(&sim_p, &map_p, k, dir).unwrap());
            }
        }
    }

    #[test]
    fn zeroshot_equivariant_under_class_permutation(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let classes = random_matrix(&mut rng, 6, 5);
        let images = random_matrix(&mut rng, 10, 5);
        let pred = zeroshot_classify(&images, &classes).unwrap();
        let mut perm: Vec<usize> = (0..6).collect();
        perm.shuffle(&mut rng);
        let permuted = classes.select_rows(&perm).unwrap();
        let pred_p = zeroshot_classify(&images, &permuted).unwrap();
        for (a, b) in pred.iter().zip(&pred_p) {
            prop_assert_eq!(*a, perm[*b]);
        }
        prop_assert_eq!(top1_accuracy(&pred, &pred).unwrap(), 100.0);
    }

    #[test]
    fn semloc_metrics_are_bounded_and_shift_invariant(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let (w, h) = (rng.gen_range(1..9usize), rng.gen_range(1..9usize));
        let weights: Vec<f64> = (0..w * h).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen() }).collect();
        let map = SemLocMap::from_weights(w, h, &weights).unwrap();
        let gx = rng.gen_range(0..w as u32);
        let gy = rng.gen_range(0..h as u32);
        let rect = CropRect::new(gx, gy, rng.gen_range(1..=w as u32 - gx), rng.gen_range(1..=h as u32 - gy));
        let gt = GroundTruthRegion::new(w, h, vec![rect]).unwrap();
        let s = score_map(&map, &gt, &SemLocWeights::default()).unwrap();
        for v in [s.r_su, s.r_as, s.r_da, s.r_mi] {
            prop_assert!((0.0..=1.0).contains(&v), "{:?}", s);
        }
        // mass outside + inside = 1
        let outside: f64 = (0..w * h)
            .filter(|&i| !gt.contains_cell(i % w, i / w))
            .map(|i| f64::from(map.mass()[i]))
            .sum();
        prop_assert!((s.r_su + outside - 1.0).abs() < 1e-5);

        let scene = 64u32;
        let rects = window_grid(scene, scene, 16, 8).unwrap();
        let scores: Vec<(CropRect, f32)> = rects.iter().map(|r| (*r, rng.gen_range(-1.0f32..1.0))).collect();
        let shifted: Vec<(CropRect, f32)> = scores.iter().map(|(r, s)| (*r, s + 0.75)).collect();
        let a = similarity_map(&scores, scene, scene, 8).unwrap();
        let b = similarity_map(&shifted, scene, scene, 8).unwrap();
        for (x, y) in a.mass().iter().zip(b.mass()) {
            prop_assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn r_mi_monotone(su in 0.0f64..1.0, as_ in 0.0f64..1.0, da in 0.0f64..1.0, d in 0.0f64..0.2) {
        let w = SemLocWeights::new(0.2, 0.5, 0.3).unwrap();
        let base = r_mi(su, as_, da, &w);
        prop_assert!(r_mi((su + d).min(1.0), as_, da, &w) >= base);
        prop_assert!(r_mi(su, as_, (da + d).min(1.0), &w) >= base);
        prop_assert!(r_mi(su, (as_ + d).min(1.0), da, &w) <= base);
    }

    #[test]
    fn knn_invariant_under_rotation(seed in any::<u64>(), angle in 0.0f64..std::f64::consts::TAU) {
        let mut rng = seeded(seed);
        let train = random_matrix(&mut rng, 40, 2);
        let labels: Vec<usize> = (0..40).map(|_| rng.gen_range(0..3)).collect();
        let queries = random_matrix(&mut rng, 15, 2);
        let rotate = |m: &EmbeddingMatrix| {
            let (s, c) = angle.sin_cos();
            let data = m
                .iter_rows()
                .flat_map(|r| {
                    let (x, y) = (f64::from(r[0]), f64::from(r[1]));
                    [(c * x - s * y) as f32, (s * x + c * y) as f32]
                })
                .collect();
            EmbeddingMatrix::new(m.rows(), 2, data).unwrap()
        };
        let a = knn_classify(&LabeledFeatures::new(train.clone(), labels.clone(), 3).unwrap(), &queries, 5, Metric::Euclidean).unwrap();
        let b = knn_classify(&LabeledFeatures::new(rotate(&train), labels, 3).unwrap(), &rotate(&queries), 5, Metric::Euclidean).unwrap();
        // rotation in f32 can only flip near-exact distance ties
        let agree = a.iter().zip(&b).filter(|(x, y)| x == y).count();
        prop_assert!(agree >= a.len() - 1, "{:?} vs {:?}", a, b);
    }
}

#[test]
fn semloc_translation_invariance() {
    let (w, h) = (12, 10);
    let mut weights = vec![0.0; w * h];
    for (cx, cy, m) in [(1, 1, 0.5), (2, 1, 0.2), (2, 3, 0.3), (0, 2, 0.1)] {
        weights[cy * w + cx] = m;
    }
    let gt = vec![CropRect::new(1, 1, 2, 2)];
    let base = score_map(
        &SemLocMap::from_weights(w, h, &weights).unwrap(),
        &GroundTruthRegion::new(w, h, gt.clone()).unwrap(),
        &SemLocWeights::default(),
    )
    .unwrap();
    let (dx, dy) = (5, 4);
    let mut moved = vec![0.0; w * h];
    for cy in 0..h - dy {
        for cx in 0..w - dx {
            moved[(cy + dy) * w + cx + dx] = weights[cy * w + cx];
        }
    }
    let gt_moved: Vec<CropRect> = gt
        .iter()
        .map(|r| CropRect::new(r.x + dx as u32, r.y + dy as u32, r.w, r.h))
        .collect();
    let shifted = score_map(
        &SemLocMap::from_weights(w, h, &moved).unwrap(),
        &GroundTruthRegion::new(w, h, gt_moved).unwrap(),
        &SemLocWeights::default(),
    )
    .unwrap();
    for (a, b) in [
        (base.r_su, shifted.r_su),
        (base.r_as, shifted.r_as),
        (base.r_da, shifted.r_da),
        (base.r_mi, shifted.r_mi),
    ] {
        assert!((a - b).abs() < 1e-6, "{base:?} vs {shifted:?}");
    }
}

#[test]
fn semloc_point_mass_inside_gt_is_perfect() {
    let mut weights = vec![0.0; 49];
    weights[3 * 7 + 3] = 2.0;
    let map = SemLocMap::from_weights(7, 7, &weights).unwrap();
    let gt = GroundTruthRegion::new(7, 7, vec![CropRect::new(3, 3, 1, 1)]).unwrap();
    assert_eq!(prob_centroid(&map), (3.5, 3.5));
    assert_eq!(r_su(&map, &gt).unwrap(), 1.0);
    assert_eq!(r_as(&map, &gt).unwrap(), 0.0);
    assert_eq!(r_da(&map), 1.0);
}

fn blobs(n_per: usize, seed: u64, spread: f32) -> (EmbeddingMatrix, Vec<usize>) {
    let mut rng = seeded(seed);
    let centers = [(-3.0f32, 0.0f32), (3.0, 0.0), (0.0, 4.0)];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n_per * 3 {
        let (cx, cy) = centers[i % 3];
        rows.push([
            cx + rng.gen_range(-spread..spread),
            cy + rng.gen_range(-spread..spread),
        ]);
        labels.push(i % 3);
    }
    (EmbeddingMatrix::from_rows(2, &rows).unwrap(), labels)
}

#[test]
fn logreg_duplication_matches_halved_strength() {
    // mean cross-entropy is unchanged by duplicating rows while the penalty
    // ‖W‖²/(2Cn) halves; halving C restores the original objective exactly
    let (x, labels) = blobs(10, 4, 2.5);
    let data = LabeledFeatures::new(x.clone(), labels.clone(), 3).unwrap();
    let idx: Vec<usize> = (0..data.len()).chain(0..data.len()).collect();
    let doubled = data.subset(&idx).unwrap();
    let cfg = ProbeConfig {
        grad_tol: 1e-8,
        max_iter: 20_000,
        ..ProbeConfig::default()
    };
    let a = logreg_fit(&data, &cfg).unwrap();
    let b = logreg_fit(
        &doubled,
        &ProbeConfig {
            l2_strength: 0.5,
            ..cfg.clone()
        },
    )
    .unwrap();
    assert!(
        a.converged && b.converged,
        "{} {} {} {}",
        a.iterations,
        a.grad_inf_norm,
        b.iterations,
        b.grad_inf_norm
    );
    for (p, q) in a
        .model
        .weight
        .iter()
        .chain(&a.model.bias)
        .zip(b.model.weight.iter().chain(&b.model.bias))
    {
        assert!((p - q).abs() < 1e-6, "{p} vs {q}");
    }
    assert_eq!(
        logreg_predict(&a.model, &x).unwrap(),
        logreg_predict(&b.model, &x).unwrap()
    );
}

#[test]
fn l2_normalize_idempotent_on_random_rows() {
    let mut rng = seeded(99);
    let m = random_matrix(&mut rng, 50, 7);
    let once = l2_normalize(&m).unwrap();
    let twice = l2_normalize(&once).unwrap();
    for (a, b) in once.data().iter().zip(twice.data()) {
        assert!((a - b).abs() <= 1e-7);
    }
}
