#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "slr/recognizer.hpp"

namespace slr {

struct MouthingCandidate {
    std::string video_id;
    std::string word;
    std::size_t frame_index = 0;
    double confidence = 0;
};

// source "M" for mouthing, "D1"/"D2"/... for dictionary iterations.
struct SpotAnnotation {
    std::string video_id;
    std::string sign_class;
    std::size_t frame_index = 0;
    double confidence = 0;
    std::string source;
};

// sign class -> lexicon-domain exemplar clips.
using ExemplarSet = std::map<std::string, std::vector<FeatureSequence>>;

std::vector<MouthingCandidate> load_mouthing(const std::string& path);
void save_mouthing(const std::string& path, const std::vector<MouthingCandidate>& candidates);

std::vector<SpotAnnotation> load_annotations(const std::string& path);
void save_annotations(const std::string& path, const std::vector<SpotAnnotation>& annotations);

// Keeps candidates with confidence strictly above the threshold whose word is
// in the vocabulary filter; word doubles as the sign class name.
std::vector<SpotAnnotation> filter_mouthing(const std::vector<MouthingCandidate>& candidates,
                                            double threshold,
                                            const std::set<std::string>& vocab_filter);

// Subtitle tokens plus their lemmas, intersected with the lexicon vocabulary.
std::set<std::string> candidate_words(const TextSequence& subtitle,
                                      const std::set<std::string>& lexicon_vocab,
                                      const Lemmatizer* lem = nullptr);

enum class SpotEmbedMode { pooled, single };

struct SpotConfig {
    double threshold = 0.75;
    SpotEmbedMode embed_mode = SpotEmbedMode::pooled;
};

// Exemplar-vs-window cosine matching; at most one annotation per queried class,
// placed at the similarity argmax. `iteration` names the source tag D_i.
std::vector<SpotAnnotation> dictionary_spot(const FeatureSequence& video,
                                            const std::set<std::string>& queries,
                                            const ExemplarSet& exemplars,
                                            const WindowClassifier& clf,
                                            const SpotConfig& cfg, std::size_t iteration);

struct FrameRange {
    std::size_t begin = 0;  // inclusive
    std::size_t end = 0;    // inclusive
};

// Mouthing windows are [-15, 4] around the annotation, dictionary windows
// [-3, 22]; both clamped to the video extent.
FrameRange clip_window(const SpotAnnotation& a, std::size_t video_frames);

struct SpotCorpus {
    std::vector<FeatureSequence> videos;    // continuous domain streams
    std::vector<TextSequence> subtitles;    // aligned with videos
};

struct SpotAlignConfig {
    SpotConfig spot;
    ClassifierTrainConfig classifier;
    std::size_t hidden_dim = 32;
    std::size_t window_len = 16;
    std::size_t clips_per_annotation = 1;
    std::size_t clips_per_exemplar = 1;
    bool joint_training = true;  // false = exemplar-only degraded mode
    std::uint64_t seed = 0;
};

struct SpotAlignState {
    std::size_t iteration = 0;
    std::vector<SpotAnnotation> mouthing;                    // M, persists across rounds
    std::vector<std::vector<SpotAnnotation>> dictionary;     // D_1..D_i per round
    WindowClassifier classifier;
    std::vector<std::size_t> yield_history;                  // |D_i| per round

    // M union the latest dictionary round.
    std::vector<SpotAnnotation> current_annotations() const;
};

// One retrain-and-requery round: builds clips from current annotations
// (continuous) and exemplars (lexicon), trains the joint classifier, then
// re-runs dictionary spotting over the whole corpus.
SpotAlignState spot_align_round(const SpotAlignState& state, const SpotCorpus& corpus,
                                const ExemplarSet& exemplars, const SpotAlignConfig& cfg);

struct YieldStats {
    std::map<std::string, std::size_t> per_source;
    std::map<std::string, std::size_t> per_class;
    std::size_t total = 0;

    // Restricted view keeps only classes in the given vocabulary.
    std::size_t total_in_vocab(const std::set<std::string>& vocab) const;
};

YieldStats yield_stats(const std::vector<SpotAnnotation>& annotations);

// Mean cosine distance between lexicon-exemplar and continuous same-class
// pooled latents (the domain-alignment measure).
double cross_domain_distance(const ExemplarSet& exemplars,
                             const std::vector<SpotAnnotation>& annotations,
                             const std::vector<FeatureSequence>& videos,
                             const WindowClassifier& clf);

}  // namespace slr
