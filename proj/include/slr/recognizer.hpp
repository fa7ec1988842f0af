#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "slr/encoders.hpp"
#include "slr/retrieval.hpp"

namespace slr {

enum class Domain { lexicon, continuous };

// Fixed-length training clip drawn from an annotation window.
struct ClipSample {
    Tensor2 features;  // window_len x D
    std::size_t label = 0;
    Domain domain = Domain::continuous;
};

// MLP over mean-pooled windows: affine(D->H) + relu + affine(H->|classes|).
// The relu activations are the latent embedding used for spotting/retrieval.
struct WindowClassifier {
    std::size_t window_len = 16;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    ParamGrad w1, b1;  // D -> H
    ParamGrad w2, b2;  // H -> |classes|
    std::vector<std::string> class_vocab;  // class index -> word

    static WindowClassifier init(std::size_t window_len, std::size_t input_dim,
                                 std::size_t hidden_dim, std::vector<std::string> class_vocab,
                                 Rng& rng);
    std::vector<ParamGrad*> params();
    std::size_t num_classes() const { return class_vocab.size(); }
};

struct ClassifierTrainConfig {
    std::size_t epochs = 25;
    double learning_rate = 1e-2;
    std::size_t decay_epoch = 20;  // lr divided by decay_factor from this epoch on
    double decay_factor = 10.0;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
};

// Cross-entropy training with sgd_momentum; mixes both domains as supplied.
// Returns the final-epoch mean loss.
double train_classifier(const std::vector<ClipSample>& clips, WindowClassifier& clf,
                        const ClassifierTrainConfig& cfg);

double classifier_accuracy(const std::vector<ClipSample>& clips, const WindowClassifier& clf);

// Latent (penultimate) activations at every stride-1 window position: T' x H.
Tensor2 latent_embed(const FeatureSequence& seq, const WindowClassifier& clf);

struct WindowPrediction {
    std::size_t position = 0;  // window start frame
    std::size_t cls = 0;
    double prob = 0;
};

std::vector<WindowPrediction> sliding_window_predict(const FeatureSequence& seq,
                                                     const WindowClassifier& clf);

// Deterministic rule cascade with an optional irregulars table
// (text file, lines `surface lemma`).
struct Lemmatizer {
    std::unordered_map<std::string, std::string> irregulars;

    static Lemmatizer load(const std::string& path);
    std::string lemma(const std::string& word) const;
};

// Rule cascade with no irregulars table.
std::string lemmatize(const std::string& word);

using WordSet = std::set<std::string>;

WordSet extract_word_set(const std::vector<WindowPrediction>& predictions,
                         const WindowClassifier& clf, double threshold = 0.5,
                         const Lemmatizer* lem = nullptr);

WordSet lemmatize_tokens(const std::vector<std::string>& tokens,
                         const Lemmatizer* lem = nullptr);

double iou_similarity(const WordSet& a, const WordSet& b);

SimilarityMatrix sr_similarity_matrix(const std::vector<TextSequence>& queries,
                                      const std::vector<FeatureSequence>& videos,
                                      const WindowClassifier& clf, double threshold = 0.5,
                                      const Lemmatizer* lem = nullptr);

void save_sr_checkpoint(const std::string& path, WindowClassifier& clf, std::uint64_t seed);
WindowClassifier load_sr_checkpoint(const std::string& path);

}  // namespace slr
