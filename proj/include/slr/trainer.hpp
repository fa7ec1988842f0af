#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "slr/encoders.hpp"
#include "slr/retrieval.hpp"

namespace slr {

// Eq-style double sum over ordered pairs is the default reading; the single
// (unordered) reading is kept as a study switch.
enum class LossPairMode { ordered_double, unordered_single };

struct TrainConfig {
    double margin = 0.2;
    std::size_t batch_size = 16;  // paper scale 128
    std::size_t epochs = 40;
    OptimizerConfig optimizer;  // radam, lr 0.001, weight decay 1e-5
    std::uint64_t seed = 0;
    bool shuffle = true;
    LossPairMode loss_pair_mode = LossPairMode::ordered_double;
    std::vector<int> eval_ks = {1, 5, 10};
};

enum class Split { train, val, test };

struct PairedCorpus {
    std::vector<FeatureSequence> videos;
    std::vector<TextSequence> texts;  // texts[i] is the ground-truth match of videos[i]
    Split split = Split::train;

    std::size_t size() const { return videos.size(); }
};

struct RankingLossResult {
    double loss = 0;
    Tensor2 dsim;
};

// sim[i][j] is the similarity between video i and text j; diagonal holds the
// positive pairs. Loss is averaged over the batch (1/B).
RankingLossResult margin_ranking_loss(const Tensor2& sim, double margin,
                                      LossPairMode mode = LossPairMode::ordered_double);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0;
    Metrics val_metrics;
    double geometric_mean = 0;
    std::vector<Tensor2> snapshot;  // parameter values in model.params() order
};

double train_epoch(const PairedCorpus& corpus, const WordEmbeddingTable& table,
                   JointEmbeddingModel& model, const TrainConfig& cfg,
                   Optimizer& opt, Rng& rng);

// t2v metrics of the frozen model on a paired corpus.
Metrics evaluate_model(const PairedCorpus& corpus, const WordEmbeddingTable& table,
                       const JointEmbeddingModel& model, const std::vector<int>& ks);

// Full loop; logs one line per epoch (`epoch loss R1 R5 R10 MedR gm`) if log given.
std::vector<EpochRecord> train(const PairedCorpus& train_set, const PairedCorpus& val_set,
                               const WordEmbeddingTable& table, JointEmbeddingModel& model,
                               const TrainConfig& cfg, std::ostream* log = nullptr);

// Index of the record with the highest validation geometric mean (earliest on ties).
std::size_t select_model(const std::vector<EpochRecord>& history);

void restore_snapshot(JointEmbeddingModel& model, const std::vector<Tensor2>& snapshot);

void save_cm_checkpoint(const std::string& path, JointEmbeddingModel& model,
                        std::uint64_t seed);
JointEmbeddingModel load_cm_checkpoint(const std::string& path);

}  // namespace slr
