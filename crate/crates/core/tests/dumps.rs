use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use proptest::prelude::*;
use vidsme::dumpio::*;
use vidsme::synthbench::{gen_synth_dump, write_synth_dataset, SynthProfile};

/// Relative path → contents of every file below `root`.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn profile() -> impl Strategy<Value = SynthProfile> {
    (any::<u64>(), 2usize..40, 1usize..12, 0usize..4, 0usize..4, any::<bool>(), 0.0..2.0f64).prop_map(
        |(seed, vocab_size, span_len, prefix_len, suffix_len, heavy_tailed, signal)| SynthProfile {
            seed,
            vocab_size,
            span_len,
            prefix_len,
            suffix_len,
            heavy_tailed,
            signal,
            n_samples: 2,
            ..SynthProfile::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dumps_round_trip_to_identical_bytes(p in profile(), index in 0usize..2) {
        let dump = gen_synth_dump(&p, index).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        write_dump(&dump, &a).unwrap();
        let back = read_dump(&a).unwrap();
        prop_assert_eq!(&back, &dump);
        write_dump(&back, &b).unwrap();
        prop_assert_eq!(snapshot(&a), snapshot(&b));
    }

    #[test]
    fn slices_have_equal_lengths_and_next_token_targets(p in profile(), index in 0usize..2) {
        let dump = gen_synth_dump(&p, index).unwrap();
        let slices = extract_video_slices(&dump).unwrap();
        prop_assert_eq!(slices.natural.probs.len(), p.span_len);
        prop_assert_eq!(slices.reversed.probs.len(), p.span_len);
        let ids = dump.target_token_ids_natural.as_ref().unwrap();
        let span = dump.video_span_natural;
        let targets = slices.natural.targets.unwrap();
        for (k, &t) in targets.iter().enumerate() {
            prop_assert_eq!(t, ids[span.start + k + 1] as usize);
        }
        // only the last position may lack a following token
        prop_assert!(targets.len() + 1 >= p.span_len);
    }
}

#[test]
fn synthetic_datasets_are_byte_identical() {
    let profile = SynthProfile {
        n_samples: 6,
        frames: 4,
        width: 32,
        height: 32,
        ..SynthProfile::default()
    };
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let manifest = write_synth_dataset(&profile, &a).unwrap();
    write_synth_dataset(&profile, &b).unwrap();
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.len(), sb.len());
    assert_eq!(sa, sb);

    let records = load_manifest(&manifest).unwrap();
    assert_eq!(records.len(), 6);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.label.is_member(), i % 2 == 0);
        assert_eq!(read_dump(&r.dump_dir).unwrap().sample_id, r.sample_id);
        assert!(r.frames_dir.as_ref().unwrap().is_dir());
    }
}

#[test]
fn truncated_bytes_are_reported_as_corrupt() {
    let dump = gen_synth_dump(&SynthProfile::default(), 0).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    write_dump(&dump, tmp.path()).unwrap();
    let file = tmp.path().join(NATURAL_FILE);
    let bytes = fs::read(&file).unwrap();
    fs::write(&file, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(read_dump(tmp.path()), Err(vidsme::Error::CorruptDump { .. })));
}
