use std::f64::consts::{FRAC_PI_2, PI};

use super::{AnchorSpec, CorpusSpec, ObjectSpec, PatternSpec, SatelliteSpec, Site};
use crate::error::Result;
use crate::scene::CategoryConfig;

/// The 30 most frequent bedroom classes, most frequent first. The source
/// table lists "computer" twice; the second entry is taken as "chair".
pub const BEDROOM_CATEGORIES: [&str; 30] = [
    "window",
    "bed",
    "wardrobe",
    "stand",
    "door",
    "table lamp",
    "television",
    "curtain",
    "rug",
    "computer",
    "chair",
    "chandelier",
    "desk",
    "picture frame",
    "shelving",
    "dresser",
    "plant",
    "table",
    "dressing table",
    "tv stand",
    "books",
    "ottoman",
    "mirror",
    "air conditioner",
    "floor lamp",
    "wall lamp",
    "sofa",
    "vase",
    "hanger",
    "heater",
];

/// The 30 most frequent living-room classes, most frequent first.
pub const LIVINGROOM_CATEGORIES: [&str; 30] = [
    "sofa",
    "window",
    "table",
    "chair",
    "television",
    "plant",
    "door",
    "chandelier",
    "rug",
    "curtain",
    "tv stand",
    "picture frame",
    "shelving",
    "floor lamp",
    "loudspeaker",
    "vase",
    "ottoman",
    "computer",
    "books",
    "fireplace",
    "air conditioner",
    "wall lamp",
    "wardrobe",
    "clock",
    "stereo set",
    "kitchen cabinet",
    "desk",
    "heater",
    "fish tank",
    "playstation",
];

pub const DEFAULT_MULTIPLICITY: usize = 4;

pub fn bedroom_config(descriptor_dim: usize) -> Result<CategoryConfig> {
    CategoryConfig::uniform(&BEDROOM_CATEGORIES, DEFAULT_MULTIPLICITY, descriptor_dim)
}

pub fn livingroom_config(descriptor_dim: usize) -> Result<CategoryConfig> {
    CategoryConfig::uniform(&LIVINGROOM_CATEGORIES, DEFAULT_MULTIPLICITY, descriptor_dim)
}

fn object(category: &str, multiplicity: &[f64], size: [f64; 3], elevation: f64) -> ObjectSpec {
    ObjectSpec {
        category: category.into(),
        multiplicity: multiplicity.to_vec(),
        size,
        size_std: 0.02,
        elevation,
    }
}

fn anchor(o: ObjectSpec, sites: &[([f64; 2], f64)]) -> AnchorSpec {
    AnchorSpec {
        object: o,
        sites: sites.iter().map(|&(position, heading)| Site { position, heading }).collect(),
        position_std: 0.08,
        heading_std: 0.03,
    }
}

fn satellite(o: ObjectSpec, offsets: &[[f64; 2]], heading_offset: f64) -> SatelliteSpec {
    SatelliteSpec {
        object: o,
        offsets: offsets.to_vec(),
        offset_std: 0.06,
        heading_offset,
        heading_offset_std: 0.05,
    }
}

fn alone(a: AnchorSpec) -> PatternSpec {
    PatternSpec {
        anchor: a,
        satellites: Vec::new(),
    }
}

/// A 4 m × 3.5 m bedroom: bed against the north wall with nightstands at the
/// head and a television facing it, a desk with a chair facing it, windows
/// on the perimeter, a wardrobe and a door.
pub fn default_bedroom_spec() -> CorpusSpec {
    let south = -FRAC_PI_2;
    let patterns = vec![
        PatternSpec {
            anchor: anchor(object("bed", &[0.05, 0.95], [2.0, 1.6, 0.5], 0.0), &[([-0.4, 0.75], south)]),
            satellites: vec![
                satellite(object("stand", &[0.15, 0.25, 0.6], [0.45, 0.45, 0.55], 0.0), &[[1.1, -1.75], [-1.1, -1.75]], 0.0),
                satellite(object("television", &[0.4, 0.6], [0.15, 1.0, 0.6], 0.5), &[[0.0, 1.3]], PI),
                satellite(object("rug", &[0.5, 0.5], [1.4, 2.0, 0.02], 0.0), &[[0.0, -0.4]], 0.0),
            ],
        },
        PatternSpec {
            anchor: anchor(object("desk", &[0.3, 0.7], [0.6, 1.2, 0.75], 0.0), &[([1.4, -1.4], FRAC_PI_2)]),
            satellites: vec![
                satellite(object("chair", &[0.1, 0.9], [0.5, 0.5, 0.9], 0.0), &[[0.0, 0.3]], PI),
                satellite(object("computer", &[0.5, 0.5], [0.3, 0.5, 0.4], 0.75), &[[0.0, -0.3]], 0.0),
            ],
        },
        alone(anchor(
            object("window", &[0.1, 0.35, 0.45, 0.1], [0.1, 1.2, 1.2], 0.9),
            &[([-0.4, 1.75], south), ([2.0, 0.4], PI), ([-2.0, -0.6], 0.0)],
        )),
        alone(anchor(object("wardrobe", &[0.3, 0.7], [0.6, 1.5, 2.0], 0.0), &[([-1.7, -1.0], 0.0)])),
        alone(anchor(object("door", &[0.1, 0.9], [0.1, 0.9, 2.0], 0.0), &[([0.4, -1.75], FRAC_PI_2)])),
        alone(anchor(object("plant", &[0.6, 0.4], [0.4, 0.4, 0.8], 0.0), &[([1.75, 1.5], PI)])),
    ];
    CorpusSpec {
        n: 300,
        patterns,
        quarter_turns: true,
        rotation_jitter_std: 3f64.to_radians(),
        translation_std: 0.5,
        shuffle_slots: true,
        descriptor_std: 0.05,
        seed: 1,
    }
}

/// A living room: sofa against the south wall with a coffee table in front
/// and a television facing it across the room, a plant beside the sofa,
/// windows, a door and a floor lamp.
pub fn default_livingroom_spec() -> CorpusSpec {
    let patterns = vec![
        PatternSpec {
            anchor: anchor(object("sofa", &[0.05, 0.95], [0.9, 2.2, 0.8], 0.0), &[([0.0, -1.4], FRAC_PI_2)]),
            satellites: vec![
                satellite(object("table", &[0.1, 0.9], [0.6, 1.1, 0.45], 0.0), &[[0.0, 0.5]], 0.0),
                satellite(object("television", &[0.2, 0.8], [0.15, 1.2, 0.7], 0.5), &[[0.0, 2.6]], PI),
                satellite(object("plant", &[0.4, 0.4, 0.2], [0.4, 0.4, 0.9], 0.0), &[[1.5, -0.4], [-1.5, -0.4]], 0.0),
                satellite(object("rug", &[0.4, 0.6], [1.6, 2.4, 0.02], 0.0), &[[0.0, 0.6]], 0.0),
            ],
        },
        alone(anchor(
            object("window", &[0.1, 0.4, 0.4, 0.1], [0.1, 1.4, 1.3], 0.9),
            &[([2.25, 0.0], PI), ([-2.25, 0.5], 0.0), ([0.0, 2.0], -FRAC_PI_2)],
        )),
        alone(anchor(object("door", &[0.1, 0.9], [0.1, 0.9, 2.0], 0.0), &[([-1.6, 2.0], -FRAC_PI_2)])),
        alone(anchor(object("floor lamp", &[0.5, 0.5], [0.35, 0.35, 1.6], 0.0), &[([1.9, -1.6], PI)])),
        alone(anchor(object("shelving", &[0.5, 0.5], [0.4, 1.2, 1.8], 0.0), &[([-2.0, -1.0], 0.0)])),
    ];
    CorpusSpec {
        n: 300,
        patterns,
        quarter_turns: true,
        rotation_jitter_std: 3f64.to_radians(),
        translation_std: 0.5,
        shuffle_slots: true,
        descriptor_std: 0.05,
        seed: 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_specs_validate() {
        let bed = bedroom_config(4).unwrap();
        default_bedroom_spec().validate(&bed).unwrap();
        let living = livingroom_config(4).unwrap();
        default_livingroom_spec().validate(&living).unwrap();
        assert_eq!(bed.num_categories(), 30);
        assert!(bed.categories.iter().all(|c| c.max_multiplicity == 4));
    }
}
