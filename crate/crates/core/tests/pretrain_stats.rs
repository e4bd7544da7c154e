mod common;

use std::sync::OnceLock;

use wikiprep::pretrain::{build_instances, masked_count, ExampleGenConfig, PretrainInstance, TokenizedDocument};
use wikiprep::subword::SubwordVocab;

struct Fixture {
    vocab: SubwordVocab,
    docs: Vec<TokenizedDocument>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let (vocab, docs) = common::mask_fixture();
        Fixture { vocab, docs }
    })
}

fn config() -> ExampleGenConfig {
    ExampleGenConfig { max_seq_length: 64, max_predictions_per_seq: 10, dupe_factor: 120, ..Default::default() }
}

fn generate(cfg: &ExampleGenConfig) -> Vec<PretrainInstance> {
    let f = fixture();
    build_instances(&f.docs, &f.vocab, cfg).unwrap().0
}

fn instances() -> &'static [PretrainInstance] {
    static I: OnceLock<Vec<PretrainInstance>> = OnceLock::new();
    I.get_or_init(|| generate(&config()))
}

#[test]
fn structural_invariants_hold_for_every_instance() {
    let f = fixture();
    let sp = f.vocab.specials();
    let cfg = config();
    let all = instances();
    assert!(all.len() >= 10_000, "only {} instances", all.len());
    for (k, inst) in all.iter().enumerate() {
        let l = cfg.max_seq_length;
        assert_eq!(inst.input_ids.len(), l);
        assert_eq!(inst.input_mask.len(), l);
        assert_eq!(inst.segment_ids.len(), l);
        let real = inst.input_mask.iter().take_while(|&&m| m == 1).count();
        assert!(inst.input_mask[real..].iter().all(|&m| m == 0), "instance {k}: mask not a prefix");
        assert!(inst.input_ids[real..].iter().all(|&t| t == sp.pad));
        assert_eq!(inst.input_ids[0], sp.cls);
        let seps: Vec<usize> = (0..real).filter(|&i| inst.input_ids[i] == sp.sep).collect();
        assert_eq!(seps.len(), 2, "instance {k}");
        assert_eq!(seps[1], real - 1);
        assert!(seps[0] > 1 && seps[0] + 2 < seps[1], "both segments non-empty");
        for i in 0..l {
            let expected = u8::from(i > seps[0] && i < real);
            assert_eq!(inst.segment_ids[i], expected, "instance {k} position {i}");
        }
        assert!(inst.next_sentence_label <= 1);

        assert_eq!(inst.masked_lm_positions.len(), inst.masked_lm_ids.len());
        assert!(inst.masked_lm_positions.windows(2).all(|w| w[0] < w[1]));
        for (&p, &orig) in inst.masked_lm_positions.iter().zip(&inst.masked_lm_ids) {
            let p = p as usize;
            assert!(p < real && p != 0 && !seps.contains(&p));
            assert!(![sp.cls, sp.sep, sp.pad, sp.mask].contains(&orig));
        }
        let n = real - 3;
        assert_eq!(
            inst.masked_lm_positions.len(),
            masked_count(n, cfg.masked_lm_prob, cfg.max_predictions_per_seq),
            "instance {k}: n={n}"
        );
        assert_eq!(masked_count(n, 0.15, 10), ((0.15 * n as f64).round() as usize).clamp(1, 10));
    }
}

#[test]
fn replacement_branches_and_next_sentence_rate() {
    let f = fixture();
    let sp = f.vocab.specials();
    let (mut mask, mut keep, mut random, mut positions) = (0u64, 0u64, 0u64, 0u64);
    let mut random_next = 0u64;
    let all = instances();
    for inst in all {
        for (&p, &orig) in inst.masked_lm_positions.iter().zip(&inst.masked_lm_ids) {
            let shown = inst.input_ids[p as usize];
            positions += 1;
            if shown == sp.mask {
                mask += 1;
            } else if shown == orig {
                keep += 1;
            } else {
                assert!(!sp.contains(shown), "random replacement drew a special token");
                random += 1;
            }
        }
        random_next += u64::from(inst.next_sentence_label);
    }
    assert!(positions >= 100_000, "only {positions} masked positions");
    let frac = |c: u64| c as f64 / positions as f64;
    assert!((frac(mask) - 0.8).abs() <= 0.02, "mask {}", frac(mask));
    assert!((frac(keep) - 0.1).abs() <= 0.02, "keep {}", frac(keep));
    assert!((frac(random) - 0.1).abs() <= 0.02, "random {}", frac(random));
    let nsp = random_next as f64 / all.len() as f64;
    assert!((0.48..=0.52).contains(&nsp), "next-sentence label mean {nsp}");
}

#[test]
fn restored_segments_are_contiguous_source_spans() {
    let f = fixture();
    let sp = f.vocab.specials();
    let streams: Vec<Vec<u32>> = f.docs.iter().map(|d| d.sentences.concat()).collect();
    let occurs = |seg: &[u32]| streams.iter().any(|s| s.windows(seg.len()).any(|w| w == seg));
    for (k, inst) in instances().iter().take(1000).enumerate() {
        let mut ids = inst.input_ids.clone();
        for (&p, &orig) in inst.masked_lm_positions.iter().zip(&inst.masked_lm_ids) {
            ids[p as usize] = orig;
        }
        let real = inst.input_mask.iter().filter(|&&m| m == 1).count();
        let seps: Vec<usize> = (0..real).filter(|&i| ids[i] == sp.sep).collect();
        assert!(occurs(&ids[1..seps[0]]), "instance {k}: segment A");
        assert!(occurs(&ids[seps[0] + 1..seps[1]]), "instance {k}: segment B");
    }
}

#[test]
fn output_is_identical_across_thread_counts() {
    let cfg = ExampleGenConfig { dupe_factor: 3, ..config() };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| generate(&cfg))
    };
    let one = run(1);
    assert_eq!(one, run(8));
    assert_eq!(one, run(3));
}

#[test]
fn different_seeds_give_different_instances() {
    let cfg = ExampleGenConfig { dupe_factor: 1, ..config() };
    let other = ExampleGenConfig { seed: cfg.seed + 1, ..cfg.clone() };
    assert_ne!(generate(&cfg), generate(&other));
}
