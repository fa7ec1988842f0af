#pragma once

#include <map>
#include <string>
#include <vector>

#include "slr/tensor.hpp"

namespace slr {

enum class Direction { t2v, v2t };

// Q x V score matrix with a single ground-truth column per query row.
struct SimilarityMatrix {
    Tensor2 scores;
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    std::vector<std::size_t> ground_truth;  // row -> matching column

    void validate() const;

    // Manifest + row-major little-endian float32 block.
    static SimilarityMatrix load(const std::string& path);
    void save(const std::string& path) const;
};

struct Metrics {
    std::map<int, double> r_at;  // K -> percentage
    double med_r = 0;
    Direction direction = Direction::t2v;

    double geometric_mean() const;  // over R@1, R@5, R@10

    void save(const std::string& path, const std::string& task) const;
};

// scores[q][v] = dot(text_q, video_v); both sides unit-norm (zero rows allowed).
SimilarityMatrix similarity_matrix(const std::vector<Tensor2>& video_embs,
                                   const std::vector<Tensor2>& text_embs,
                                   std::vector<std::string> video_ids,
                                   std::vector<std::string> text_ids);

// 1-based; ties resolved in favour of the ground truth (strictly-greater count).
std::vector<std::size_t> rank_of_ground_truth(const SimilarityMatrix& sim);

double recall_at_k(const std::vector<std::size_t>& ranks, std::size_t k);
double median_rank(const std::vector<std::size_t>& ranks);

Metrics evaluate(const SimilarityMatrix& sim, const std::vector<int>& ks,
                 Direction dir = Direction::t2v);

// Transposed matrix with inverted ground truth (evaluates the other direction).
SimilarityMatrix transpose_with_inverted_truth(const SimilarityMatrix& sim);

SimilarityMatrix fuse(const SimilarityMatrix& a, const SimilarityMatrix& b,
                      double wa = 0.5, double wb = 0.5,
                      bool per_query_minmax = false);

}  // namespace slr
