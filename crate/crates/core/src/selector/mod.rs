//! The multi-label model selector: features, network, loss and training.

pub mod augment;
pub mod features;
pub mod loss;
pub mod net;
pub mod train;

pub use augment::{augment, AugmentTrace};
pub use features::{extract_all, FeatureExtractor, SceneStats};
pub use loss::{class_balanced_bce, compute_beta, ohem_filter, sigmoid};
pub use net::{argmax, select, Layer, SelectorNet};
pub use train::{selector_accuracy, train, train_augmented, Augmentation, EpochLog, TrainConfig, TrainLog};
