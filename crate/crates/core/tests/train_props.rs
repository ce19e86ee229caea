use std::collections::BTreeMap;

use condis::data::{mask_labels, AttributeTable, ToyDataset};
use condis::nn::Parameters;
use condis::train::pack::conditional_plans;
use condis::train::{conditional_shuffle, FixedSource, LossForm, SubspaceLayout, TrainConfig, Trainer};
use condis::Objective;
use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x7a1),
        ..Config::default()
    }
}

fn rows_of(a: &Array2<f64>, rows: &[usize]) -> Vec<Vec<u64>> {
    let mut v: Vec<Vec<u64>> = rows.iter().map(|&i| a.row(i).iter().map(|x| x.to_bits()).collect()).collect();
    v.sort();
    v
}

fn small_config(objective: Objective, seed: u64) -> TrainConfig {
    TrainConfig {
        objective,
        lr_encoder: 1e-2,
        lr_classifiers: 1e-2,
        lr_discriminator: 1e-3,
        adversarial_weight: 10.0,
        pack_size: 4,
        epochs: 2,
        batch: 64,
        layout: SubspaceLayout::uniform(2, 2).unwrap(),
        encoder_hidden: vec![6],
        discriminator_hidden: vec![8],
        loss_form: LossForm::NegLogLikelihood,
        seed,
        ..TrainConfig::default()
    }
}

fn toy(seed: u64, n: usize) -> (Array2<f64>, AttributeTable) {
    let d = ToyDataset::generate(&Array2::eye(2), 0.8, 0.8, n, seed).unwrap();
    (d.x, d.attrs)
}

fn snapshot(p: &impl Parameters) -> Vec<u64> {
    p.tensors().iter().flat_map(|(_, _, d)| d.iter().map(|v| v.to_bits())).collect()
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn conditional_shuffle_preserves_group_blocks(seed in any::<u64>(), n in 4usize..80, card in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<usize> = (0..n).map(|_| rng.random_range(0..card)).collect();
        let blocks: Vec<Array2<f64>> = [2usize, 1, 3]
            .iter()
            .map(|&w| Array2::from_shape_fn((n, w), |_| rng.random::<f64>()))
            .collect();
        let out = conditional_shuffle(&blocks, &s, 1, &mut rng).unwrap();
        prop_assert_eq!(&out[1], &blocks[1]);
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &v) in s.iter().enumerate() {
            groups.entry(v).or_default().push(i);
        }
        for rows in groups.values() {
            for b in 0..3 {
                prop_assert_eq!(rows_of(&out[b], rows), rows_of(&blocks[b], rows));
                for c in 0..blocks[b].ncols() {
                    let m_in: f64 = rows.iter().map(|&i| blocks[b][(i, c)]).sum::<f64>() / rows.len() as f64;
                    let m_out: f64 = rows.iter().map(|&i| out[b][(i, c)]).sum::<f64>() / rows.len() as f64;
                    prop_assert!((m_in - m_out).abs() < 1e-12);
                }
            }
            // Blocks 0 and 2 move together: tag each row by its original index.
            let tag0: Vec<u64> = rows.iter().map(|&i| out[0][(i, 0)].to_bits()).collect();
            let tag2: Vec<u64> = rows.iter().map(|&i| out[2][(i, 0)].to_bits()).collect();
            for (a, b) in tag0.iter().zip(&tag2) {
                let src = (0..n).find(|&j| blocks[0][(j, 0)].to_bits() == *a).unwrap();
                prop_assert_eq!(blocks[2][(src, 0)].to_bits(), *b);
            }
        }
    }

    #[test]
    fn conditional_packs_only_use_labeled_rows(seed in any::<u64>(), fraction in 0.1f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, attrs) = toy(seed, 200);
        let masked = mask_labels(&attrs, fraction, &mut rng).unwrap();
        for k in 0..2 {
            let (joint, shuffled) = conditional_plans(&masked, k, 5, &mut rng);
            for src in joint.gather.sources.iter().chain(&shuffled.gather.sources) {
                prop_assert!(src.iter().all(|&i| masked.mask[(i, k)]));
            }
        }
    }
}

#[test]
fn zero_weight_cmi_matches_base_bitwise() {
    for seed in 0..3 {
        let (x, attrs) = toy(seed, 256);
        let base_cfg = small_config(Objective::Base, seed);
        let mut cmi_cfg = small_config(Objective::BaseCmi, seed);
        cmi_cfg.adversarial_weight = 0.0;
        let mut base = Trainer::new(base_cfg, 2, &[2, 2]).unwrap();
        let mut cmi = Trainer::new(cmi_cfg, 2, &[2, 2]).unwrap();
        base.fit(&mut FixedSource::new(x.clone(), attrs.clone()).unwrap()).unwrap();
        cmi.fit(&mut FixedSource::new(x, attrs).unwrap()).unwrap();
        assert_eq!(snapshot(&base.models.encoder), snapshot(&cmi.models.encoder));
        assert_eq!(snapshot(&base.models.heads), snapshot(&cmi.models.heads));
    }
}

#[test]
fn updates_touch_only_their_own_parameters() {
    for objective in [Objective::BaseMi, Objective::BaseCmi] {
        let (x, attrs) = toy(11, 128);
        let mut t = Trainer::new(small_config(objective, 11), 2, &[2, 2]).unwrap();
        let enc = snapshot(&t.models.encoder);
        let heads = snapshot(&t.models.heads);
        let disc = snapshot(t.models.discriminator.as_ref().unwrap());
        t.discriminator_step(&x, &attrs).unwrap();
        assert_eq!(snapshot(&t.models.encoder), enc);
        assert_eq!(snapshot(&t.models.heads), heads);
        let disc_after = snapshot(t.models.discriminator.as_ref().unwrap());
        assert_ne!(disc_after, disc);
        t.encoder_step(&x, &attrs).unwrap();
        assert_eq!(snapshot(t.models.discriminator.as_ref().unwrap()), disc_after);
        assert_ne!(snapshot(&t.models.encoder), enc);
    }
}

#[test]
fn unlabeled_rows_carry_no_signal() {
    let (x, attrs) = toy(5, 128);
    let masked = mask_labels(&attrs, 0.25, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let mut scrambled = masked.clone();
    for i in 0..scrambled.n() {
        for k in 0..2 {
            if !scrambled.mask[(i, k)] {
                scrambled.labels[(i, k)] = 1 - scrambled.labels[(i, k)];
            }
        }
    }
    let mut a = Trainer::new(small_config(Objective::BaseCmi, 5), 2, &[2, 2]).unwrap();
    let mut b = Trainer::new(small_config(Objective::BaseCmi, 5), 2, &[2, 2]).unwrap();
    for _ in 0..3 {
        a.train_batch(&x, &masked).unwrap();
        b.train_batch(&x, &scrambled).unwrap();
    }
    assert_eq!(snapshot(&a.models.encoder), snapshot(&b.models.encoder));
    assert_eq!(snapshot(&a.models.heads), snapshot(&b.models.heads));
    assert_eq!(snapshot(a.models.discriminator.as_ref().unwrap()), snapshot(b.models.discriminator.as_ref().unwrap()));
}
