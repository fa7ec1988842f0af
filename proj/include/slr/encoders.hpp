#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "slr/optim.hpp"
#include "slr/rng.hpp"
#include "slr/tensor.hpp"

namespace slr {

// Per-frame feature sequence for one video segment (TxD, stride-1 positions).
struct FeatureSequence {
    std::string video_id;
    Tensor2 features;

    std::size_t frames() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
};

struct TextSequence {
    std::string text_id;
    std::vector<std::string> tokens;
};

// Lowercase, strip punctuation, split on whitespace.
std::vector<std::string> tokenize(const std::string& text);

struct WordEmbeddingTable {
    std::unordered_map<std::string, std::size_t> vocab;
    Tensor2 vectors;  // |V| x D_t
    std::size_t unk_index = 0;

    std::size_t lookup(const std::string& word) const;
    std::size_t dim() const { return vectors.cols; }

    // Text format: header `vocab <N> dim <D>` then N lines `word v1 ... vD`.
    // The `<unk>` token is mandatory.
    static WordEmbeddingTable load(const std::string& path);
    void save(const std::string& path) const;
};

enum class PoolingMode { average, max };

PoolingMode parse_pooling(const std::string& s);
std::string pooling_name(PoolingMode m);

struct NetVladParams {
    ParamGrad centers;         // K x D_t
    ParamGrad assign_weights;  // D_t x K
    ParamGrad assign_bias;     // 1 x K

    std::size_t clusters() const { return centers.value.rows; }
    std::size_t dim() const { return centers.value.cols; }
};

struct GatedUnitParams {
    ParamGrad w1, b1;  // in -> out
    ParamGrad w2, b2;  // out -> out (gate)
};

// Both encoder branches; emits unit-norm embed_dim vectors.
struct JointEmbeddingModel {
    PoolingMode pooling_mode = PoolingMode::average;
    std::size_t feature_dim = 0, word_dim = 0, embed_dim = 0;

    ParamGrad video_w, video_b;  // D -> C
    NetVladParams text_netvlad;
    GatedUnitParams text_gated;  // K*D_t -> K*D_t
    ParamGrad text_w, text_b;    // K*D_t -> C

    // table, when given, seeds NetVLAD centers from a sample of word vectors.
    static JointEmbeddingModel init(std::size_t feature_dim, std::size_t word_dim,
                                    std::size_t embed_dim, std::size_t clusters,
                                    PoolingMode mode, Rng& rng,
                                    const WordEmbeddingTable* table = nullptr);

    std::vector<ParamGrad*> params();
};

// --- stage operations (forward caches enable exact backward passes) ---

Tensor2 temporal_pool(const Tensor2& seq, PoolingMode mode,
                      std::vector<std::size_t>* argmax = nullptr);
void temporal_pool_backward(const Tensor2& seq, PoolingMode mode,
                            const std::vector<std::size_t>& argmax,
                            const Tensor2& dy, Tensor2& dseq);

struct NetVladCache {
    Tensor2 assign;  // L x K soft assignment
    Tensor2 raw;     // 1 x K*D_t residuals before intra-normalization
    Tensor2 intra;   // 1 x K*D_t after per-block L2
};

Tensor2 netvlad_aggregate(const Tensor2& embedded, const NetVladParams& p,
                          NetVladCache* cache = nullptr);
void netvlad_backward(const Tensor2& embedded, NetVladParams& p,
                      const NetVladCache& cache, const Tensor2& dout,
                      Tensor2* dembedded);

struct GatedCache {
    Tensor2 z1, gate_pre, gate, z2;
    bool degenerate = false;
};

Tensor2 gated_embedding_unit(const Tensor2& x, const GatedUnitParams& p,
                             GatedCache* cache = nullptr, bool* degenerate = nullptr);
void gated_backward(const Tensor2& x, GatedUnitParams& p, const GatedCache& cache,
                    const Tensor2& dout, Tensor2* dx);

struct VideoEncodeCache {
    Tensor2 pooled, proj;
    std::vector<std::size_t> argmax;
    bool degenerate = false;
};

Tensor2 encode_video(const FeatureSequence& seq, const JointEmbeddingModel& model,
                     VideoEncodeCache* cache = nullptr);
void encode_video_backward(const FeatureSequence& seq, JointEmbeddingModel& model,
                           const VideoEncodeCache& cache, const Tensor2& dout,
                           Tensor2* dfeatures = nullptr);

struct TextEncodeCache {
    Tensor2 embedded;  // L x D_t looked-up rows
    NetVladCache vlad;
    Tensor2 vlad_out;
    GatedCache gated;
    Tensor2 gated_out;
    Tensor2 proj;
    bool degenerate = false;
};

Tensor2 encode_text(const TextSequence& t, const WordEmbeddingTable& table,
                    const JointEmbeddingModel& model, TextEncodeCache* cache = nullptr);
void encode_text_backward(JointEmbeddingModel& model, const TextEncodeCache& cache,
                          const Tensor2& dout);

}  // namespace slr
