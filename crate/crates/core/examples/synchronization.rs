//! Recovers global poses and slot orders from noisy, partly corrupted
//! relative measurements on a random scene graph.

use scenesynth::align::synthetic::{max_rotation_error, permutation_problem, pose_problem};
use scenesynth::align::{
    permutation_sync, rotation_sync, translation_sync, PermutationSyncConfig, RotationSyncConfig,
    TranslationSyncConfig,
};

fn main() -> scenesynth::Result<()> {
    println!("corrupted   rot err (deg)   trans err (m)   exact perms");
    for corrupt in [0.0, 0.1, 0.2, 0.3] {
        let p = pose_problem(100, 8, 5.0, corrupt, 3)?;
        let rot = rotation_sync(&p.graph, &p.rotations, &RotationSyncConfig::default())?;
        let truth: Vec<f64> = p.truth.iter().map(|t| t.theta).collect();
        let tr = translation_sync(&p.graph, &p.translations, &rot.thetas, &TranslationSyncConfig::default())?;
        let trans = tr
            .translations
            .iter()
            .zip(&p.truth)
            .map(|(e, t)| ((e[0] - t.t[0]).powi(2) + (e[1] - t.t[1]).powi(2) + (e[2] - t.t[2]).powi(2)).sqrt())
            .fold(0.0, f64::max);

        let pp = permutation_problem(100, 8, 4, corrupt, 4)?;
        let ps = permutation_sync(&pp.graph, 4, &pp.measurements, &PermutationSyncConfig::default())?;
        let exact = ps.perms.iter().zip(&pp.truth).filter(|(a, b)| a == b).count();

        println!(
            "{:>8.0}%   {:>13.4}   {:>13.2e}   {exact:>7}/100",
            100.0 * corrupt,
            max_rotation_error(&rot.thetas, &truth).to_degrees(),
            trans
        );
    }
    Ok(())
}
