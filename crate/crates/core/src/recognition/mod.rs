//! Embedded similarity recognizers carried by agents.
//!
//! Every recognizer answers one question: is another agent's description
//! functionally similar to the owner's? Learned recognizers (perceptron and
//! SVM) are trained on the owner's description plus random variants of it,
//! and can keep learning from the outcome of targeted visits.

pub mod bits;
pub mod mlp;
pub mod svm;

use rand::Rng;

pub use bits::{encode_input, BitVector};
pub use mlp::{hidden_width_for, sigmoid, Mlp, MlpGradient, TrainReport};
pub use svm::{rbf_kernel, smo_train, SmoParams, SvmModel};

use crate::error::{EcoError, Result};
use crate::semantic::{difference, generate_variant, SemanticDescription, BITS_PER_TUPLE};

/// Variants closer than this to the owner are labeled positive.
pub const POSITIVE_DIFFERENCE: f64 = 0.10;
/// Variants are generated with target differences drawn from `[0, MAX]`.
pub const MAX_VARIANT_DIFFERENCE: f64 = 0.3;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub description: SemanticDescription,
    pub input: BitVector,
    pub label: bool,
}

impl TrainingExample {
    pub fn new(description: SemanticDescription, width: usize, label: bool) -> Self {
        let input = encode_input(&description, width);
        TrainingExample { description, input, label }
    }
}

/// Input width sized for an owner description.
pub fn input_width_for(own: &SemanticDescription) -> usize {
    own.len() * BITS_PER_TUPLE
}

/// The owner as a positive plus `n_variants` random variants, labeled
/// positive iff their measured difference is below 0.10.
///
/// A variant whose truncated input equals an existing example's input but
/// carries the opposite label is redrawn (a tuple appended past the owner's
/// width is invisible to the recognizer).
pub fn build_initial_training_set<R: Rng + ?Sized>(
    own: &SemanticDescription,
    n_variants: usize,
    width: usize,
    rng: &mut R,
) -> Vec<TrainingExample> {
    const REDRAWS: usize = 16;
    let mut set = Vec::with_capacity(n_variants + 1);
    set.push(TrainingExample::new(own.clone(), width, true));
    for _ in 0..n_variants {
        for attempt in 0..REDRAWS {
            let target = rng.gen_range(0.0..=MAX_VARIANT_DIFFERENCE);
            let variant = generate_variant(own, target, rng);
            let label = difference(own, &variant) < POSITIVE_DIFFERENCE;
            let example = TrainingExample::new(variant, width, label);
            let conflict = set.iter().any(|e| e.input == example.input && e.label != label);
            if !conflict {
                set.push(example);
                break;
            }
            if attempt + 1 == REDRAWS {
                // Give up on this slot; the owner label stands.
                set.push(TrainingExample::new(own.clone(), width, true));
            }
        }
    }
    set
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlpParams {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub margin: f64,
    pub threshold: f64,
    pub init_scale: f64,
    /// Epoch cap for incremental retraining after a new example.
    pub retrain_epochs: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            learning_rate: 0.1,
            max_epochs: 500,
            margin: 0.1,
            threshold: 0.90,
            init_scale: 0.5,
            retrain_epochs: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// `None` means `1 / input_width`.
    pub gamma: Option<f64>,
    pub tol: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, gamma: None, tol: 1e-3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecognizerParams {
    pub n_variants: usize,
    pub mlp: MlpParams,
    pub svm: SvmParams,
    pub distance_threshold: f64,
}

impl Default for RecognizerParams {
    fn default() -> Self {
        RecognizerParams {
            n_variants: 20,
            mlp: MlpParams::default(),
            svm: SvmParams::default(),
            distance_threshold: 0.90,
        }
    }
}

/// Perceptron recognizer; weights are stored in single precision.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpRecognizer {
    own: SemanticDescription,
    net: Mlp<f32>,
    training_set: Vec<TrainingExample>,
    params: MlpParams,
    trained: bool,
}

impl MlpRecognizer {
    /// Randomly initialized, untrained.
    pub fn new<R: Rng + ?Sized>(own: SemanticDescription, params: MlpParams, rng: &mut R) -> Self {
        let width = input_width_for(&own);
        let net = Mlp::random(width, hidden_width_for(width), params.init_scale, rng);
        MlpRecognizer { own, net, training_set: Vec::new(), params, trained: false }
    }

    pub fn net(&self) -> &Mlp<f32> {
        &self.net
    }

    pub fn training_set(&self) -> &[TrainingExample] {
        &self.training_set
    }

    pub fn train<R: Rng + ?Sized>(&mut self, set: Vec<TrainingExample>, rng: &mut R) -> Result<TrainReport> {
        if set.is_empty() {
            return Err(EcoError::EmptyTrainingSet);
        }
        self.training_set = set;
        let mut report = self.fit(self.params.max_epochs, rng)?;
        // Train to criterion: halve the step while the set still does not fit.
        let mut lr = self.params.learning_rate;
        for _ in 0..3 {
            if report.converged {
                break;
            }
            lr *= 0.5;
            let samples: Vec<(&BitVector, bool)> = self.training_set.iter().map(|e| (&e.input, e.label)).collect();
            report = self.net.train(&samples, self.params.max_epochs, lr, self.params.margin, rng)?;
        }
        Ok(report)
    }

    fn fit<R: Rng + ?Sized>(&mut self, epochs: usize, rng: &mut R) -> Result<TrainReport> {
        let samples: Vec<(&BitVector, bool)> = self.training_set.iter().map(|e| (&e.input, e.label)).collect();
        let report = self.net.train(&samples, epochs, self.params.learning_rate, self.params.margin, rng)?;
        self.trained = true;
        Ok(report)
    }

    pub fn score(&self, other: &SemanticDescription) -> Result<f32> {
        if !self.trained {
            return Err(EcoError::Untrained);
        }
        self.net.forward(&encode_input(other, self.net.input_width()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmRecognizer {
    own: SemanticDescription,
    width: usize,
    training_set: Vec<TrainingExample>,
    params: SvmParams,
    model: Option<SvmModel>,
}

impl SvmRecognizer {
    pub fn new(own: SemanticDescription, params: SvmParams) -> Self {
        let width = input_width_for(&own);
        SvmRecognizer { own, width, training_set: Vec::new(), params, model: None }
    }

    pub fn model(&self) -> Option<&SvmModel> {
        self.model.as_ref()
    }

    pub fn training_set(&self) -> &[TrainingExample] {
        &self.training_set
    }

    pub fn train(&mut self, set: Vec<TrainingExample>) -> Result<()> {
        self.training_set = set;
        self.fit()
    }

    fn fit(&mut self) -> Result<()> {
        let points: Vec<BitVector> = self.training_set.iter().map(|e| e.input.clone()).collect();
        let labels: Vec<bool> = self.training_set.iter().map(|e| e.label).collect();
        let gamma = self.params.gamma.unwrap_or(1.0 / self.width as f64);
        let own = encode_input(&self.own, self.width);
        // Train to criterion: the owner must land on the positive side.
        let mut c = self.params.c;
        let mut model = smo_train(&points, &labels, &SmoParams::new(c, gamma, self.params.tol))?;
        for _ in 0..16 {
            if model.decision(&own)? > 0.0 {
                break;
            }
            c *= 2.0;
            model = smo_train(&points, &labels, &SmoParams::new(c, gamma, self.params.tol))?;
        }
        self.model = Some(model);
        Ok(())
    }

    pub fn decision(&self, other: &SemanticDescription) -> Result<f64> {
        let model = self.model.as_ref().ok_or(EcoError::Untrained)?;
        model.decision(&encode_input(other, self.width))
    }
}

/// The pattern-recognition control: thresholded `1 - difference`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceRecognizer {
    own: SemanticDescription,
    threshold: f64,
}

impl DistanceRecognizer {
    pub fn new(own: SemanticDescription, threshold: f64) -> Self {
        DistanceRecognizer { own, threshold }
    }

    pub fn similarity(&self, other: &SemanticDescription) -> f64 {
        1.0 - difference(&self.own, other)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RecognizerKind {
    Mlp,
    Svm,
    Distance,
    /// Rejects everything; used to check that an inert augmentation leaves
    /// the ecosystem untouched.
    Never,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Recognizer {
    Mlp(MlpRecognizer),
    Svm(SvmRecognizer),
    Distance(DistanceRecognizer),
    Never,
}

impl Recognizer {
    /// Builds and, for learned kinds, trains a recognizer for `own`.
    pub fn build<R: Rng + ?Sized>(
        kind: RecognizerKind,
        own: &SemanticDescription,
        params: &RecognizerParams,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match kind {
            RecognizerKind::Mlp => {
                let width = input_width_for(own);
                let set = build_initial_training_set(own, params.n_variants, width, rng);
                let mut r = MlpRecognizer::new(own.clone(), params.mlp, rng);
                r.train(set, rng)?;
                Recognizer::Mlp(r)
            }
            RecognizerKind::Svm => {
                let width = input_width_for(own);
                let mut set = build_initial_training_set(own, params.n_variants, width, rng);
                // SMO needs both classes; fall back to a far variant.
                if set.iter().all(|e| e.label) {
                    let far = generate_variant(own, MAX_VARIANT_DIFFERENCE, rng);
                    set.push(TrainingExample::new(far, width, false));
                }
                let mut r = SvmRecognizer::new(own.clone(), params.svm);
                r.train(set)?;
                Recognizer::Svm(r)
            }
            RecognizerKind::Distance => Recognizer::Distance(DistanceRecognizer::new(own.clone(), params.distance_threshold)),
            RecognizerKind::Never => Recognizer::Never,
        })
    }

    pub fn kind(&self) -> RecognizerKind {
        match self {
            Recognizer::Mlp(_) => RecognizerKind::Mlp,
            Recognizer::Svm(_) => RecognizerKind::Svm,
            Recognizer::Distance(_) => RecognizerKind::Distance,
            Recognizer::Never => RecognizerKind::Never,
        }
    }

    pub fn is_similar(&self, other: &SemanticDescription) -> Result<bool> {
        match self {
            Recognizer::Mlp(r) => Ok(r.score(other)? as f64 >= r.params.threshold),
            Recognizer::Svm(r) => Ok(r.decision(other)? > 0.0),
            Recognizer::Distance(r) => Ok(r.similarity(other) >= r.threshold),
            Recognizer::Never => Ok(false),
        }
    }

    pub fn training_len(&self) -> usize {
        match self {
            Recognizer::Mlp(r) => r.training_set.len(),
            Recognizer::Svm(r) => r.training_set.len(),
            _ => 0,
        }
    }

    /// Appends the outcome of a visit as a labeled example and retrains.
    /// Stateless recognizers ignore it.
    pub fn extend_training_set<R: Rng + ?Sized>(
        &mut self,
        other: &SemanticDescription,
        visit_success: bool,
        rng: &mut R,
    ) -> Result<()> {
        match self {
            Recognizer::Mlp(r) => {
                let width = r.net.input_width();
                r.training_set.push(TrainingExample::new(other.clone(), width, visit_success));
                r.fit(r.params.retrain_epochs, rng)?;
            }
            Recognizer::Svm(r) => {
                r.training_set.push(TrainingExample::new(other.clone(), r.width, visit_success));
                r.fit()?;
            }
            Recognizer::Distance(_) | Recognizer::Never => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn own() -> SemanticDescription {
        SemanticDescription::from_pairs(&[(1, 25), (2, 35), (3, 55), (4, 6)]).unwrap()
    }

    #[test]
    fn initial_set_labels_follow_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let set = build_initial_training_set(&own(), 20, input_width_for(&own()), &mut rng);
        assert_eq!(set.len(), 21);
        assert_eq!(set[0].description, own());
        assert!(set[0].label);
        for e in &set {
            assert_eq!(e.label, difference(&own(), &e.description) < POSITIVE_DIFFERENCE);
            assert_eq!(e.input.len(), 384);
        }
    }

    #[test]
    fn every_kind_accepts_its_owner() {
        let params = RecognizerParams::default();
        for kind in [RecognizerKind::Mlp, RecognizerKind::Svm, RecognizerKind::Distance] {
            let mut rng = ChaCha8Rng::seed_from_u64(21);
            let r = Recognizer::build(kind, &own(), &params, &mut rng).unwrap();
            assert!(r.is_similar(&own()).unwrap(), "{kind:?}");
        }
    }

    #[test]
    fn distance_control_thresholds() {
        let r = Recognizer::Distance(DistanceRecognizer::new(own(), 0.9));
        let half = SemanticDescription::from_pairs(&[(1, 75), (2, 85), (3, 5), (4, 56)]).unwrap();
        assert!((difference(&own(), &half) - 0.5).abs() < 1e-9);
        assert!(!r.is_similar(&half).unwrap());
        let disjoint = SemanticDescription::from_pairs(&[(7, 1), (8, 2), (9, 3)]).unwrap();
        assert!(!r.is_similar(&disjoint).unwrap());
    }

    #[test]
    fn untrained_recognizers_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Recognizer::Mlp(MlpRecognizer::new(own(), MlpParams::default(), &mut rng));
        assert_eq!(mlp.is_similar(&own()), Err(EcoError::Untrained));
        let svm = Recognizer::Svm(SvmRecognizer::new(own(), SvmParams::default()));
        assert_eq!(svm.is_similar(&own()), Err(EcoError::Untrained));
    }

    #[test]
    fn extension_appends_with_label() {
        let params = RecognizerParams::default();
        for kind in [RecognizerKind::Mlp, RecognizerKind::Svm] {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let mut r = Recognizer::build(kind, &own(), &params, &mut rng).unwrap();
            let n = r.training_len();
            let other = SemanticDescription::from_pairs(&[(1, 30), (2, 35), (3, 50)]).unwrap();
            r.extend_training_set(&other, true, &mut rng).unwrap();
            assert_eq!(r.training_len(), n + 1);
            r.extend_training_set(&other, false, &mut rng).unwrap();
            assert_eq!(r.training_len(), n + 2);
            let last = match &r {
                Recognizer::Mlp(m) => m.training_set().last().unwrap().label,
                Recognizer::Svm(s) => s.training_set().last().unwrap().label,
                _ => unreachable!(),
            };
            assert!(!last);
            assert!(r.is_similar(&own()).unwrap(), "{kind:?} lost its owner");
        }
    }

    #[test]
    fn copies_behave_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = Recognizer::build(RecognizerKind::Mlp, &own(), &RecognizerParams::default(), &mut rng).unwrap();
        let copy = r.clone();
        let probe = SemanticDescription::from_pairs(&[(1, 26), (2, 35), (3, 55), (4, 9)]).unwrap();
        match (&r, &copy) {
            (Recognizer::Mlp(a), Recognizer::Mlp(b)) => {
                assert_eq!(a.score(&probe).unwrap().to_bits(), b.score(&probe).unwrap().to_bits())
            }
            _ => unreachable!(),
        }
    }
}
