#include "slr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <fstream>
#include <stdexcept>

#include "slr/blobfile.hpp"

namespace slr {

namespace {
constexpr const char* kSimMagic = "SLRSIM01";
}

void SimilarityMatrix::validate() const {
    if (scores.rows != row_ids.size() || scores.cols != col_ids.size())
        throw std::invalid_argument("similarity matrix: id lists inconsistent with " +
                                    scores.shape_str());
    if (ground_truth.size() != scores.rows)
        throw std::invalid_argument("similarity matrix: ground truth missing for some queries");
    for (std::size_t g : ground_truth)
        if (g >= scores.cols)
            throw std::invalid_argument("similarity matrix: ground-truth column out of range");
    if (!scores.all_finite())
        throw std::invalid_argument("similarity matrix: non-finite score");
}

SimilarityMatrix SimilarityMatrix::load(const std::string& path) {
    BlobFile f = BlobFile::load(path, kSimMagic);
    SimilarityMatrix sim;
    std::size_t q = 0, v = 0;
    for (const auto& line : f.manifest) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "rows") ss >> q;
        else if (key == "cols") ss >> v;
        else if (key == "row_id") { std::string id; ss >> id; sim.row_ids.push_back(id); }
        else if (key == "col_id") { std::string id; ss >> id; sim.col_ids.push_back(id); }
        else if (key == "truth") { std::size_t g; ss >> g; sim.ground_truth.push_back(g); }
        else throw std::runtime_error(path + ": unknown manifest key `" + key + "`");
    }
    std::size_t off = 0;
    sim.scores = f.take(&off, q, v, path);
    if (off != f.blob.size())
        throw std::runtime_error(path + ": trailing blob data at float offset " + std::to_string(off));
    sim.validate();
    return sim;
}

void SimilarityMatrix::save(const std::string& path) const {
    validate();
    BlobFile f;
    f.manifest.push_back("rows " + std::to_string(scores.rows));
    f.manifest.push_back("cols " + std::to_string(scores.cols));
    for (const auto& id : row_ids) f.manifest.push_back("row_id " + id);
    for (const auto& id : col_ids) f.manifest.push_back("col_id " + id);
    for (std::size_t g : ground_truth) f.manifest.push_back("truth " + std::to_string(g));
    f.append(scores);
    f.save(path, kSimMagic);
}

double Metrics::geometric_mean() const {
    double p = 1;
    for (int k : {1, 5, 10}) {
        auto it = r_at.find(k);
        p *= (it == r_at.end() ? 0.0 : it->second);
    }
    return std::cbrt(p);
}

void Metrics::save(const std::string& path, const std::string& task) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write metrics: " + path);
    char buf[64];
    out << "task " << task << "\n";
    for (const auto& [k, v] : r_at) {
        std::snprintf(buf, sizeof(buf), "R@%d %.4f", k, v);
        out << buf << "\n";
    }
    std::snprintf(buf, sizeof(buf), "MedR %.2f", med_r);
    out << buf << "\n";
}

SimilarityMatrix similarity_matrix(const std::vector<Tensor2>& video_embs,
                                   const std::vector<Tensor2>& text_embs,
                                   std::vector<std::string> video_ids,
                                   std::vector<std::string> text_ids) {
    SimilarityMatrix sim;
    sim.scores = Tensor2(text_embs.size(), video_embs.size());
    for (std::size_t q = 0; q < text_embs.size(); ++q)
        for (std::size_t v = 0; v < video_embs.size(); ++v)
            sim.scores.at(q, v) = dot(text_embs[q], video_embs[v]);
    sim.row_ids = std::move(text_ids);
    sim.col_ids = std::move(video_ids);
    sim.ground_truth.resize(text_embs.size());
    for (std::size_t q = 0; q < sim.ground_truth.size(); ++q) sim.ground_truth[q] = q;
    return sim;
}

std::vector<std::size_t> rank_of_ground_truth(const SimilarityMatrix& sim) {
    sim.validate();
    std::vector<std::size_t> ranks(sim.scores.rows);
    for (std::size_t q = 0; q < sim.scores.rows; ++q) {
        double truth = sim.scores.at(q, sim.ground_truth[q]);
        std::size_t better = 0;
        for (std::size_t v = 0; v < sim.scores.cols; ++v)
            if (sim.scores.at(q, v) > truth) ++better;
        ranks[q] = better + 1;
    }
    return ranks;
}

double recall_at_k(const std::vector<std::size_t>& ranks, std::size_t k) {
    if (ranks.empty()) throw std::invalid_argument("recall_at_k: empty rank list");
    if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
    std::size_t hits = 0;
    for (std::size_t r : ranks)
        if (r <= k) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double median_rank(const std::vector<std::size_t>& ranks) {
    if (ranks.empty()) throw std::invalid_argument("median_rank: empty rank list");
    std::vector<std::size_t> s = ranks;
    std::sort(s.begin(), s.end());
    std::size_t n = s.size();
    if (n % 2 == 1) return static_cast<double>(s[n / 2]);
    return (static_cast<double>(s[n / 2 - 1]) + static_cast<double>(s[n / 2])) / 2.0;
}

Metrics evaluate(const SimilarityMatrix& sim, const std::vector<int>& ks, Direction dir) {
    std::vector<std::size_t> ranks = rank_of_ground_truth(sim);
    Metrics m;
    m.direction = dir;
    for (int k : ks) m.r_at[k] = recall_at_k(ranks, static_cast<std::size_t>(k));
    m.med_r = median_rank(ranks);
    return m;
}

SimilarityMatrix transpose_with_inverted_truth(const SimilarityMatrix& sim) {
    sim.validate();
    if (sim.scores.rows != sim.scores.cols)
        throw std::invalid_argument("direction flip needs a square matrix, got " +
                                    sim.scores.shape_str());
    SimilarityMatrix out;
    out.scores = transpose(sim.scores);
    out.row_ids = sim.col_ids;
    out.col_ids = sim.row_ids;
    out.ground_truth.assign(sim.scores.cols, 0);
    for (std::size_t q = 0; q < sim.ground_truth.size(); ++q)
        out.ground_truth[sim.ground_truth[q]] = q;
    return out;
}

SimilarityMatrix fuse(const SimilarityMatrix& a, const SimilarityMatrix& b,
                      double wa, double wb, bool per_query_minmax) {
    a.validate();
    b.validate();
    if (!a.scores.same_shape(b.scores))
        throw std::invalid_argument("fuse: shape mismatch " + a.scores.shape_str() + " vs " +
                                    b.scores.shape_str());
    if (a.row_ids != b.row_ids || a.col_ids != b.col_ids || a.ground_truth != b.ground_truth)
        throw std::invalid_argument("fuse: id ordering or ground truth differs between inputs");

    auto normalized = [&](const Tensor2& s) {
        if (!per_query_minmax) return s;
        Tensor2 out = s;
        for (std::size_t q = 0; q < s.rows; ++q) {
            double lo = s.at(q, 0), hi = s.at(q, 0);
            for (std::size_t v = 1; v < s.cols; ++v) {
                lo = std::min(lo, s.at(q, v));
                hi = std::max(hi, s.at(q, v));
            }
            double range = hi - lo;
            for (std::size_t v = 0; v < s.cols; ++v)
                out.at(q, v) = range > 0 ? (s.at(q, v) - lo) / range : 0.0;
        }
        return out;
    };

    SimilarityMatrix out = a;
    Tensor2 sa = normalized(a.scores), sb = normalized(b.scores);
    for (std::size_t i = 0; i < out.scores.data.size(); ++i)
        out.scores.data[i] = wa * sa.data[i] + wb * sb.data[i];
    return out;
}

}  // namespace slr
