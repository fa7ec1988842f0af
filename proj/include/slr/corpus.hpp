#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slr/spotalign.hpp"
#include "slr/trainer.hpp"

namespace slr {

struct CountRange {
    std::size_t lo = 1, hi = 1;
};

struct SyntheticConfig {
    std::size_t vocab_size = 30;
    std::size_t n_train = 300, n_val = 60, n_test = 60;
    CountRange signs_per_video{2, 4};
    CountRange frames_per_sign{16, 24};
    CountRange filler_frames{8, 16};
    std::size_t feature_dim = 64;
    std::size_t word_dim = 16;
    double class_center_spread = 1.0;
    double noise_sigma = 0.1;
    double domain_gap_offset = 0.0;  // norm of the lexicon-vs-continuous mean shift
    bool rotation_gap = false;       // additionally rotate sign features per class
    std::size_t exemplars_per_class = 3;
    double mouthing_recall = 0.6;
    double mouthing_precision = 0.9;
    double text_filler_rate = 0.3;
    double inflect_rate = 0.3;  // chance a subtitle gloss appears with an -ing inflection
    std::uint64_t seed = 0;

    void validate() const;
};

struct SubtitleRecord {
    std::string video_id;
    std::size_t t_begin = 0, t_end = 0;  // frame units, [t_begin, t_end)
    std::string text;
};

// Ground-truth sign occurrence, recorded for oracle tests only.
struct PlantRecord {
    std::string video_id;
    std::string sign_class;
    std::size_t begin = 0, end = 0;  // [begin, end)
};

struct CorpusBundle {
    std::vector<FeatureSequence> videos;  // full continuous-domain streams
    std::vector<SubtitleRecord> subtitles;
    WordEmbeddingTable table;
    ExemplarSet exemplars;
    std::vector<MouthingCandidate> mouthing;
    std::vector<PlantRecord> plants;
    std::vector<std::string> train_ids, val_ids, test_ids;

    const std::vector<std::string>& ids(Split s) const;
    const FeatureSequence& video(const std::string& id) const;
    const SubtitleRecord& subtitle(const std::string& id) const;
    std::vector<std::string> gloss_vocab() const;  // sign class names, sorted
};

CorpusBundle generate_synthetic(const SyntheticConfig& cfg);

// Shifts each subtitle window by a draw from N(mean, sigma), clamped to the
// video extent (window length preserved where possible).
std::vector<SubtitleRecord> perturb_alignment(const std::vector<SubtitleRecord>& subtitles,
                                              const CorpusBundle& bundle,
                                              double shift_mean, double shift_sigma,
                                              std::uint64_t seed);

// Subtitle-cropped (video, text) pairs for one split.
PairedCorpus make_paired(const CorpusBundle& bundle, Split split);
PairedCorpus make_paired(const CorpusBundle& bundle, Split split,
                         const std::vector<SubtitleRecord>& subtitles);

// Continuous streams plus subtitles for one split (spotting input).
SpotCorpus make_spot_corpus(const CorpusBundle& bundle, Split split);

// Directory layout: features.bin, exemplars.bin, subtitles.txt, embeddings.txt,
// mouthing.txt, plants.txt, splits.txt.
void save_bundle(const std::string& dir, const CorpusBundle& bundle);
CorpusBundle load_bundle(const std::string& dir);

// Feature container: 8-byte magic, manifest `seq <id> <T> <D>` lines, f32 blob.
void save_features(const std::string& path, const std::vector<FeatureSequence>& seqs);
std::vector<FeatureSequence> load_features(const std::string& path);

std::vector<SubtitleRecord> load_subtitles(const std::string& path);
void save_subtitles(const std::string& path, const std::vector<SubtitleRecord>& subtitles);

}  // namespace slr
