#include "slr/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace slr {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (std::isspace(c)) {
            if (!cur.empty()) { out.push_back(cur); cur.clear(); }
        }
        // punctuation is dropped
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::size_t WordEmbeddingTable::lookup(const std::string& word) const {
    auto it = vocab.find(word);
    return it == vocab.end() ? unk_index : it->second;
}

WordEmbeddingTable WordEmbeddingTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding table: " + path);
    std::string kw1, kw2;
    std::size_t n = 0, d = 0;
    if (!(in >> kw1 >> n >> kw2 >> d) || kw1 != "vocab" || kw2 != "dim")
        throw std::runtime_error("embedding table " + path + ": bad header (want `vocab N dim D`)");
    WordEmbeddingTable t;
    t.vectors = Tensor2(n, d);
    bool have_unk = false;
    for (std::size_t i = 0; i < n; ++i) {
        std::string word;
        if (!(in >> word))
            throw std::runtime_error("embedding table " + path + ": truncated at entry " + std::to_string(i));
        for (std::size_t j = 0; j < d; ++j)
            if (!(in >> t.vectors.at(i, j)))
                throw std::runtime_error("embedding table " + path + ": bad value in row for `" + word + "`");
        t.vocab[word] = i;
        if (word == "<unk>") { t.unk_index = i; have_unk = true; }
    }
    if (!have_unk)
        throw std::runtime_error("embedding table " + path + ": missing mandatory `<unk>` entry");
    return t;
}

void WordEmbeddingTable::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embedding table: " + path);
    out << "vocab " << vectors.rows << " dim " << vectors.cols << "\n";
    std::vector<std::string> words(vectors.rows);
    for (const auto& [w, i] : vocab) words[i] = w;
    char buf[64];
    for (std::size_t i = 0; i < vectors.rows; ++i) {
        out << words[i];
        for (std::size_t j = 0; j < vectors.cols; ++j) {
            std::snprintf(buf, sizeof(buf), " %.9g", vectors.at(i, j));
            out << buf;
        }
        out << "\n";
    }
}

PoolingMode parse_pooling(const std::string& s) {
    if (s == "average") return PoolingMode::average;
    if (s == "max") return PoolingMode::max;
    throw std::invalid_argument("unknown pooling mode: " + s);
}

std::string pooling_name(PoolingMode m) {
    return m == PoolingMode::average ? "average" : "max";
}

Tensor2 temporal_pool(const Tensor2& seq, PoolingMode mode, std::vector<std::size_t>* argmax) {
    if (seq.rows == 0)
        throw std::invalid_argument("temporal_pool: empty sequence");
    Tensor2 out(1, seq.cols);
    if (mode == PoolingMode::average) {
        for (std::size_t i = 0; i < seq.rows; ++i)
            for (std::size_t j = 0; j < seq.cols; ++j)
                out.data[j] += seq.at(i, j);
        for (double& v : out.data) v /= static_cast<double>(seq.rows);
    } else {
        if (argmax) argmax->assign(seq.cols, 0);
        for (std::size_t j = 0; j < seq.cols; ++j) {
            double best = seq.at(0, j);
            std::size_t bi = 0;
            for (std::size_t i = 1; i < seq.rows; ++i) {
                if (seq.at(i, j) > best) { best = seq.at(i, j); bi = i; }
            }
            out.data[j] = best;
            if (argmax) (*argmax)[j] = bi;
        }
    }
    return out;
}

void temporal_pool_backward(const Tensor2& seq, PoolingMode mode,
                            const std::vector<std::size_t>& argmax,
                            const Tensor2& dy, Tensor2& dseq) {
    if (mode == PoolingMode::average) {
        double inv = 1.0 / static_cast<double>(seq.rows);
        for (std::size_t i = 0; i < seq.rows; ++i)
            for (std::size_t j = 0; j < seq.cols; ++j)
                dseq.at(i, j) += dy.data[j] * inv;
    } else {
        for (std::size_t j = 0; j < seq.cols; ++j)
            dseq.at(argmax[j], j) += dy.data[j];
    }
}

namespace {
constexpr double kBlockEps = 1e-9;
}

Tensor2 netvlad_aggregate(const Tensor2& embedded, const NetVladParams& p, NetVladCache* cache) {
    if (embedded.rows == 0)
        throw std::invalid_argument("netvlad: empty input");
    const std::size_t K = p.clusters(), D = p.dim();
    if (embedded.cols != D)
        throw std::invalid_argument("netvlad: input dim " + embedded.shape_str() +
                                    " vs centers " + p.centers.value.shape_str());
    Tensor2 logits = affine_forward(embedded, p.assign_weights.value, p.assign_bias.value);
    Tensor2 assign = softmax(logits);

    Tensor2 raw(1, K * D);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < embedded.rows; ++i) {
            double a = assign.at(i, k);
            for (std::size_t j = 0; j < D; ++j)
                raw.data[k * D + j] += a * (embedded.at(i, j) - p.centers.value.at(k, j));
        }

    Tensor2 intra(1, K * D);
    for (std::size_t k = 0; k < K; ++k) {
        double n = 0;
        for (std::size_t j = 0; j < D; ++j) n += raw.data[k * D + j] * raw.data[k * D + j];
        // eps-regularized so near-zero residual blocks stay near zero
        double s = std::sqrt(n + kBlockEps * kBlockEps);
        for (std::size_t j = 0; j < D; ++j) intra.data[k * D + j] = raw.data[k * D + j] / s;
    }
    Tensor2 out = l2_normalize(intra);
    if (cache) {
        cache->assign = std::move(assign);
        cache->raw = std::move(raw);
        cache->intra = intra;
    }
    return out;
}

void netvlad_backward(const Tensor2& embedded, NetVladParams& p,
                      const NetVladCache& cache, const Tensor2& dout,
                      Tensor2* dembedded) {
    const std::size_t K = p.clusters(), D = p.dim(), L = embedded.rows;

    Tensor2 dintra(1, K * D);
    l2_normalize_backward(cache.intra, dout, dintra);

    Tensor2 draw(1, K * D);
    for (std::size_t k = 0; k < K; ++k) {
        Tensor2 blk(1, D), dblk(1, D);
        for (std::size_t j = 0; j < D; ++j) {
            blk.data[j] = cache.raw.data[k * D + j];
            dblk.data[j] = dintra.data[k * D + j];
        }
        double n = blk.frobenius_norm();
        double s = std::sqrt(n * n + kBlockEps * kBlockEps);
        double inner = 0;
        for (std::size_t j = 0; j < D; ++j) inner += blk.data[j] * dblk.data[j];
        for (std::size_t j = 0; j < D; ++j)
            draw.data[k * D + j] = dblk.data[j] / s - blk.data[j] * inner / (s * s * s);
    }

    // raw block k = sum_i assign[i][k] * (x_i - c_k)
    Tensor2 dassign(L, K);
    Tensor2 dx_local(L, D);
    for (std::size_t k = 0; k < K; ++k) {
        double asum = 0;
        for (std::size_t i = 0; i < L; ++i) {
            double a = cache.assign.at(i, k);
            asum += a;
            double s = 0;
            for (std::size_t j = 0; j < D; ++j) {
                double g = draw.data[k * D + j];
                s += g * (embedded.at(i, j) - p.centers.value.at(k, j));
                dx_local.at(i, j) += a * g;
            }
            dassign.at(i, k) = s;
        }
        for (std::size_t j = 0; j < D; ++j)
            p.centers.grad.at(k, j) -= asum * draw.data[k * D + j];
    }

    Tensor2 dlogits(L, K);
    softmax_backward(cache.assign, dassign, dlogits);
    affine_backward(embedded, p.assign_weights.value, dlogits,
                    dembedded ? &dx_local : nullptr, &p.assign_weights.grad, &p.assign_bias.grad);
    if (dembedded) dembedded->add_scaled(dx_local, 1.0);
}

Tensor2 gated_embedding_unit(const Tensor2& x, const GatedUnitParams& p,
                             GatedCache* cache, bool* degenerate) {
    Tensor2 z1 = affine_forward(x, p.w1.value, p.b1.value);
    Tensor2 gate_pre = affine_forward(z1, p.w2.value, p.b2.value);
    Tensor2 gate(gate_pre.rows, gate_pre.cols);
    for (std::size_t i = 0; i < gate.data.size(); ++i) gate.data[i] = sigmoid(gate_pre.data[i]);
    Tensor2 z2 = z1;
    for (std::size_t i = 0; i < z2.data.size(); ++i) z2.data[i] *= gate.data[i];
    bool degen = false;
    Tensor2 out = l2_normalize(z2, &degen);
    if (degenerate) *degenerate = degen;
    if (cache) {
        cache->z1 = std::move(z1);
        cache->gate_pre = std::move(gate_pre);
        cache->gate = std::move(gate);
        cache->z2 = std::move(z2);
        cache->degenerate = degen;
    }
    return out;
}

void gated_backward(const Tensor2& x, GatedUnitParams& p, const GatedCache& cache,
                    const Tensor2& dout, Tensor2* dx) {
    Tensor2 dz2(cache.z2.rows, cache.z2.cols);
    l2_normalize_backward(cache.z2, dout, dz2);

    Tensor2 dz1(cache.z1.rows, cache.z1.cols);
    Tensor2 dgate_pre(cache.gate_pre.rows, cache.gate_pre.cols);
    for (std::size_t i = 0; i < dz2.data.size(); ++i) {
        double g = cache.gate.data[i];
        dz1.data[i] = dz2.data[i] * g;
        dgate_pre.data[i] = dz2.data[i] * cache.z1.data[i] * g * (1.0 - g);
    }
    affine_backward(cache.z1, p.w2.value, dgate_pre, &dz1, &p.w2.grad, &p.b2.grad);
    affine_backward(x, p.w1.value, dz1, dx, &p.w1.grad, &p.b1.grad);
}

Tensor2 encode_video(const FeatureSequence& seq, const JointEmbeddingModel& model,
                     VideoEncodeCache* cache) {
    if (seq.dim() != model.feature_dim)
        throw std::invalid_argument("encode_video: feature dim " + std::to_string(seq.dim()) +
                                    " != model dim " + std::to_string(model.feature_dim));
    std::vector<std::size_t> argmax;
    Tensor2 pooled = temporal_pool(seq.features, model.pooling_mode, &argmax);
    Tensor2 proj = affine_forward(pooled, model.video_w.value, model.video_b.value);
    bool degen = false;
    Tensor2 out = l2_normalize(proj, &degen);
    if (cache) {
        cache->pooled = std::move(pooled);
        cache->proj = std::move(proj);
        cache->argmax = std::move(argmax);
        cache->degenerate = degen;
    }
    return out;
}

void encode_video_backward(const FeatureSequence& seq, JointEmbeddingModel& model,
                           const VideoEncodeCache& cache, const Tensor2& dout,
                           Tensor2* dfeatures) {
    Tensor2 dproj(1, cache.proj.cols);
    l2_normalize_backward(cache.proj, dout, dproj);
    Tensor2 dpooled(1, cache.pooled.cols);
    affine_backward(cache.pooled, model.video_w.value, dproj,
                    dfeatures ? &dpooled : nullptr, &model.video_w.grad, &model.video_b.grad);
    if (dfeatures)
        temporal_pool_backward(seq.features, model.pooling_mode, cache.argmax, dpooled, *dfeatures);
}

Tensor2 encode_text(const TextSequence& t, const WordEmbeddingTable& table,
                    const JointEmbeddingModel& model, TextEncodeCache* cache) {
    if (t.tokens.empty())
        throw std::invalid_argument("encode_text: empty token list for `" + t.text_id + "`");
    if (table.dim() != model.word_dim)
        throw std::invalid_argument("encode_text: table dim " + std::to_string(table.dim()) +
                                    " != model word dim " + std::to_string(model.word_dim));
    std::vector<std::size_t> rows(t.tokens.size());
    for (std::size_t i = 0; i < t.tokens.size(); ++i)
        rows[i] = table.lookup(t.tokens[i]);
    // canonical row order: the encoder is a bag of words, and a fixed
    // summation order makes shuffled token lists bitwise-identical
    std::sort(rows.begin(), rows.end());
    Tensor2 embedded(t.tokens.size(), table.dim());
    for (std::size_t i = 0; i < t.tokens.size(); ++i)
        for (std::size_t j = 0; j < table.dim(); ++j)
            embedded.at(i, j) = table.vectors.at(rows[i], j);
    TextEncodeCache local;
    TextEncodeCache& c = cache ? *cache : local;
    Tensor2 vlad_out = netvlad_aggregate(embedded, model.text_netvlad, &c.vlad);
    Tensor2 gated_out = gated_embedding_unit(vlad_out, model.text_gated, &c.gated);
    Tensor2 proj = affine_forward(gated_out, model.text_w.value, model.text_b.value);
    bool degen = false;
    Tensor2 out = l2_normalize(proj, &degen);
    if (cache) {
        c.embedded = std::move(embedded);
        c.vlad_out = std::move(vlad_out);
        c.gated_out = std::move(gated_out);
        c.proj = std::move(proj);
        c.degenerate = degen;
    }
    return out;
}

void encode_text_backward(JointEmbeddingModel& model, const TextEncodeCache& cache,
                          const Tensor2& dout) {
    Tensor2 dproj(1, cache.proj.cols);
    l2_normalize_backward(cache.proj, dout, dproj);
    Tensor2 dgated(1, cache.gated_out.cols);
    affine_backward(cache.gated_out, model.text_w.value, dproj,
                    &dgated, &model.text_w.grad, &model.text_b.grad);
    Tensor2 dvlad(1, cache.vlad_out.cols);
    gated_backward(cache.vlad_out, model.text_gated, cache.gated, dgated, &dvlad);
    netvlad_backward(cache.embedded, model.text_netvlad, cache.vlad, dvlad, nullptr);
}

namespace {

Tensor2 seed_centers(std::size_t clusters, std::size_t dim, Rng& rng,
                     const WordEmbeddingTable* table) {
    Tensor2 centers(clusters, dim);
    if (table && table->vectors.rows >= clusters && table->dim() == dim) {
        // K-means-style seeding on a sample of word vectors.
        std::vector<std::size_t> sample(table->vectors.rows);
        for (std::size_t i = 0; i < sample.size(); ++i) sample[i] = i;
        rng.shuffle(sample);
        if (sample.size() > 256) sample.resize(256);
        for (std::size_t k = 0; k < clusters; ++k)
            for (std::size_t j = 0; j < dim; ++j)
                centers.at(k, j) = table->vectors.at(sample[k], j);
        for (int iter = 0; iter < 5; ++iter) {
            Tensor2 sum(clusters, dim);
            std::vector<std::size_t> count(clusters, 0);
            for (std::size_t s : sample) {
                std::size_t best = 0;
                double best_d = 1e300;
                for (std::size_t k = 0; k < clusters; ++k) {
                    double d = 0;
                    for (std::size_t j = 0; j < dim; ++j) {
                        double diff = table->vectors.at(s, j) - centers.at(k, j);
                        d += diff * diff;
                    }
                    if (d < best_d) { best_d = d; best = k; }
                }
                ++count[best];
                for (std::size_t j = 0; j < dim; ++j) sum.at(best, j) += table->vectors.at(s, j);
            }
            for (std::size_t k = 0; k < clusters; ++k)
                if (count[k] > 0)
                    for (std::size_t j = 0; j < dim; ++j)
                        centers.at(k, j) = sum.at(k, j) / static_cast<double>(count[k]);
        }
        // jitter so singleton clusters never sit exactly on a word vector,
        // which would make the intra-normalized residual ill-conditioned
        for (double& v : centers.data) v += rng.normal(0, 0.05);
    } else {
        for (std::size_t k = 0; k < clusters; ++k) {
            Tensor2 v(1, dim);
            for (std::size_t j = 0; j < dim; ++j) v.data[j] = rng.normal(0, 1);
            v = l2_normalize(v);
            for (std::size_t j = 0; j < dim; ++j) centers.at(k, j) = v.data[j];
        }
    }
    return centers;
}

Tensor2 random_matrix(std::size_t r, std::size_t c, double scale, Rng& rng) {
    Tensor2 t(r, c);
    for (double& v : t.data) v = rng.normal(0, scale);
    return t;
}

}  // namespace

JointEmbeddingModel JointEmbeddingModel::init(std::size_t feature_dim, std::size_t word_dim,
                                              std::size_t embed_dim, std::size_t clusters,
                                              PoolingMode mode, Rng& rng,
                                              const WordEmbeddingTable* table) {
    JointEmbeddingModel m;
    m.pooling_mode = mode;
    m.feature_dim = feature_dim;
    m.word_dim = word_dim;
    m.embed_dim = embed_dim;

    m.video_w = ParamGrad("video_w", random_matrix(feature_dim, embed_dim,
                                                   1.0 / std::sqrt((double)feature_dim), rng));
    m.video_b = ParamGrad("video_b", Tensor2(1, embed_dim));

    Tensor2 centers = seed_centers(clusters, word_dim, rng, table);
    const double alpha = 10.0;
    Tensor2 aw(word_dim, clusters), ab(1, clusters);
    for (std::size_t k = 0; k < clusters; ++k) {
        double n2 = 0;
        for (std::size_t j = 0; j < word_dim; ++j) {
            aw.at(j, k) = 2.0 * alpha * centers.at(k, j);
            n2 += centers.at(k, j) * centers.at(k, j);
        }
        ab.at(0, k) = -alpha * n2;
    }
    m.text_netvlad.centers = ParamGrad("netvlad_centers", std::move(centers));
    m.text_netvlad.assign_weights = ParamGrad("netvlad_assign_w", std::move(aw));
    m.text_netvlad.assign_bias = ParamGrad("netvlad_assign_b", std::move(ab));

    std::size_t vd = clusters * word_dim;
    m.text_gated.w1 = ParamGrad("gated_w1", random_matrix(vd, vd, 1.0 / std::sqrt((double)vd), rng));
    m.text_gated.b1 = ParamGrad("gated_b1", Tensor2(1, vd));
    m.text_gated.w2 = ParamGrad("gated_w2", random_matrix(vd, vd, 1.0 / std::sqrt((double)vd), rng));
    m.text_gated.b2 = ParamGrad("gated_b2", Tensor2(1, vd));

    m.text_w = ParamGrad("text_w", random_matrix(vd, embed_dim, 1.0 / std::sqrt((double)vd), rng));
    m.text_b = ParamGrad("text_b", Tensor2(1, embed_dim));
    return m;
}

std::vector<ParamGrad*> JointEmbeddingModel::params() {
    return {&video_w, &video_b,
            &text_netvlad.centers, &text_netvlad.assign_weights, &text_netvlad.assign_bias,
            &text_gated.w1, &text_gated.b1, &text_gated.w2, &text_gated.b2,
            &text_w, &text_b};
}

}  // namespace slr
