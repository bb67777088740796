//! Built-in vocabulary for synthetic node texts.

const THEMES: [&[&str]; 8] = [
    &[
        "camera", "lens", "aperture", "shutter", "zoom", "tripod", "sensor", "flash",
        "autofocus", "viewfinder", "megapixel", "exposure",
    ],
    &[
        "headphones", "speaker", "bass", "earbuds", "microphone", "treble", "amplifier",
        "stereo", "subwoofer", "soundbar", "equalizer", "volume",
    ],
    &[
        "laptop", "keyboard", "processor", "monitor", "touchpad", "ssd", "motherboard",
        "webcam", "mouse", "router", "firmware", "chipset",
    ],
    &[
        "blender", "toaster", "kettle", "microwave", "spatula", "skillet", "cookware",
        "oven", "grinder", "knife", "mixer", "stovetop",
    ],
    &[
        "empire", "dynasty", "medieval", "revolution", "pharaoh", "archive", "chronicle",
        "monarchy", "treaty", "crusade", "antiquity", "colonial",
    ],
    &[
        "shovel", "hose", "seeds", "fertilizer", "trowel", "lawnmower", "rake", "planter",
        "compost", "sprinkler", "pruner", "greenhouse",
    ],
    &[
        "dumbbell", "treadmill", "yoga", "kettlebell", "barbell", "stretching", "cardio",
        "protein", "resistance", "workout", "squat", "rowing",
    ],
    &[
        "puzzle", "lego", "doll", "plush", "boardgame", "crayons", "marbles", "kite",
        "robot", "blocks", "stickers", "playset",
    ],
];

const NOISE_SENTENCES: &[&str] = &[
    "so much fun.",
    "shipping took about a week.",
    "my brother recommended it to me.",
    "the box arrived a little dented.",
    "i bought this as a birthday gift.",
    "customer service answered quickly.",
    "would buy again from this seller.",
    "the price was fair for what you get.",
    "it came wrapped in plenty of paper.",
    "my wife liked the color a lot.",
    "delivery was on a rainy monday.",
    "i waited for a holiday sale.",
    "the instructions were in three languages.",
    "packaging could be more eco friendly.",
    "five stars from our whole family.",
    "it looks nice on the shelf.",
    "honestly better than expected!",
    "not sure why others complain.",
    "the courier left it at the door.",
    "we ordered two of these last spring.",
    "my neighbor has the same one.",
    "returned the first one by mistake.",
    "the receipt was missing from the parcel.",
    "this was a gift for my uncle.",
    "arrived earlier than the estimate.",
    "the smell of new plastic faded quickly.",
    "i read many reviews before buying.",
    "great value overall?",
    "the store clerk was very friendly.",
    "it fits in my small apartment.",
    "my kids argue over who gets it.",
    "the warranty card was easy to fill.",
];

const SIGNAL_TEMPLATES: &[&str] = &[
    "the {} is great.",
    "really happy with the {}.",
    "the {} works exactly as described.",
    "i use the {} every day.",
    "quality of the {} is excellent.",
    "the {} feels solid and reliable.",
];

/// Keyword lists for `num_classes` classes. The first eight classes use
/// product-style themes; further classes get synthetic tokens.
pub fn default_lexicon(num_classes: usize) -> Vec<Vec<String>> {
    (0..num_classes)
        .map(|c| match THEMES.get(c) {
            Some(words) => words.iter().map(|w| w.to_string()).collect(),
            None => (0..12).map(|k| format!("topic{c}term{k}")).collect(),
        })
        .collect()
}

pub fn default_noise_sentences() -> Vec<String> {
    NOISE_SENTENCES.iter().map(|s| s.to_string()).collect()
}

pub(crate) fn signal_templates() -> &'static [&'static str] {
    SIGNAL_TEMPLATES
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::tokenize;

    #[test]
    fn noise_and_templates_contain_no_keywords() {
        let keywords: Vec<String> = default_lexicon(8).into_iter().flatten().collect();
        for text in NOISE_SENTENCES.iter().chain(SIGNAL_TEMPLATES) {
            for tok in tokenize(text) {
                assert!(!keywords.contains(&tok), "{tok} in {text}");
            }
        }
    }

    #[test]
    fn themes_are_disjoint() {
        let all: Vec<String> = default_lexicon(8).into_iter().flatten().collect();
        let mut dedup = all.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), all.len());
    }
}
