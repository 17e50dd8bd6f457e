//! Synthetic blobs, the disjoint split, IDX and CSV round trips, block-mean
//! downsampling and random relabeling.

use reconlab::data::{downsample_images, load_csv, load_idx, relabel_random, split, synth_classification, write_csv, write_idx, SplitSpec, SynthSpec};

fn main() -> reconlab::Result<()> {
    let data = synth_classification(&SynthSpec { dim: 16, classes: 4, n: 400, cluster_std: 0.1, seed: 1 })?;
    let parts = split(&data, &SplitSpec { fixed_size: 100, shadow_size: 250, test_target_size: 50, split_seed: 2 })?;
    println!("split: fixed {} shadow {} targets {}", parts.fixed.len(), parts.shadow.len(), parts.targets.len());

    let dir = std::env::temp_dir().join("reconlab-datasets-example");
    std::fs::create_dir_all(&dir)?;
    let (img, lab) = (dir.join("images.idx"), dir.join("labels.idx"));
    write_idx(&parts.targets, 4, 4, &img, &lab)?;
    let back = load_idx(&img, &lab)?;
    let small = downsample_images(&back, 4, 4, 2)?;
    println!("idx: {} images of dim {}, downsampled to dim {}", back.len(), back.dim(), small.dim());

    let csv = dir.join("targets.csv");
    write_csv(&parts.targets, &csv)?;
    let loaded = load_csv(&csv, "label")?;
    println!("csv: {} rows, identical {}", loaded.len(), loaded.points() == parts.targets.points());

    let noisy = relabel_random(&parts.shadow, 4, 3)?;
    let changed = noisy.iter().zip(parts.shadow.iter()).filter(|(a, b)| a.y != b.y).count();
    println!("relabel: {changed}/{} labels changed", noisy.len());
    Ok(())
}
